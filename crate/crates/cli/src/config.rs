//! Run settings: a TOML file merged with command-line overrides.

use std::path::{Path, PathBuf};

use hfmm::driver::TablePolicy;
use hfmm::greens::MediaConfig;
use serde::Deserialize;

use crate::scenario::{Generator, Scenario};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Accuracy,
    Bench,
    Validate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = CliError;
    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(CliError::Usage(format!("unknown format '{other}' (csv or json)"))),
        }
    }
}

/// Contents of a config file. Every field is optional; missing ones fall
/// back to the command's defaults.
#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default)]
    pub media: MediaSection,
    #[serde(default)]
    pub scenario: ScenarioSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub run: RunSection,
}

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct MediaSection {
    pub kind: Option<String>,
    pub k: Option<f64>,
    pub alpha: Option<f64>,
    pub k1: Option<f64>,
    pub k2: Option<f64>,
    pub k3: Option<f64>,
    pub d: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    pub name: Option<String>,
    pub generator: Option<String>,
    pub center: Option<[f64; 2]>,
    pub side: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub p: Option<Vec<usize>>,
    pub p_ref: Option<usize>,
    pub n: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub leaf_size: Option<usize>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub tables: Option<String>,
    pub eval_subset: Option<usize>,
    pub oracle_tol: Option<f64>,
}

impl FileConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Usage(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Layer `other` on top of `self`; fields set in `other` win.
    pub fn merge(mut self, other: FileConfig) -> Self {
        macro_rules! take {
            ($($sec:ident . $f:ident),*) => {$(
                if other.$sec.$f.is_some() { self.$sec.$f = other.$sec.$f; }
            )*};
        }
        take!(
            media.kind, media.k, media.alpha, media.k1, media.k2, media.k3, media.d,
            scenario.name, scenario.generator, scenario.center, scenario.side,
            sweep.p, sweep.p_ref, sweep.n,
            run.leaf_size, run.seed, run.threads, run.tables, run.eval_subset, run.oracle_tol
        );
        self
    }
}

/// Fully resolved settings for one command.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub command: Command,
    pub media: MediaConfig,
    pub scenario: Scenario,
    pub p_list: Vec<usize>,
    pub p_ref: usize,
    pub n_list: Vec<usize>,
    pub leaf_size: usize,
    pub seed: u64,
    pub threads: Option<usize>,
    pub tables: TablePolicy,
    /// Number of leading targets entering the error metric; all when `None`.
    pub eval_subset: Option<usize>,
    pub oracle_tol: f64,
}

fn parse_tables(s: &str) -> Result<TablePolicy, CliError> {
    match s {
        "precompute" => Ok(TablePolicy::Precompute),
        "on-the-fly" => Ok(TablePolicy::OnTheFly),
        _ => match s.strip_prefix("cache=") {
            Some(p) if !p.is_empty() => Ok(TablePolicy::Cache(PathBuf::from(p))),
            _ => Err(CliError::Usage(format!(
                "unknown table policy '{s}' (precompute, on-the-fly or cache=PATH)"
            ))),
        },
    }
}

fn media_from(m: &MediaSection) -> Result<MediaConfig, CliError> {
    let kind = m.kind.as_deref().unwrap_or("two-layer");
    let media = match kind {
        "free" => MediaConfig::Free { k: m.k.unwrap_or(0.1) },
        "two-layer" => MediaConfig::TwoLayer {
            k: m.k.unwrap_or(0.1),
            alpha: m.alpha.unwrap_or(1.0),
        },
        "three-layer" => {
            let k1 = m.k1.or(m.k).unwrap_or(1.0);
            MediaConfig::ThreeLayer {
                k1,
                k2: m.k2.unwrap_or(1.5 * k1),
                k3: m.k3.unwrap_or(2.0 * k1),
                d: m.d.unwrap_or(0.5),
            }
        }
        other => {
            return Err(CliError::Usage(format!(
                "unknown media '{other}' (free, two-layer or three-layer)"
            )))
        }
    };
    media.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(media)
}

impl Settings {
    pub fn resolve(command: Command, file: &FileConfig) -> Result<Settings, CliError> {
        let media = media_from(&file.media)?;
        let (p_default, n_default, leaf_default, gen_default) = match command {
            Command::Accuracy => (vec![5, 10, 20, 30], vec![10_000], 200, "uniform-square"),
            Command::Bench => (vec![20], vec![10_000, 90_000, 360_000], 40, "random-uniform"),
            Command::Validate => (vec![20], vec![150], 8, "random-uniform"),
        };
        let sc = &file.scenario;
        let generator = match sc.generator.as_deref().unwrap_or(gen_default) {
            "uniform-square" => Generator::UniformSquare,
            "random-uniform" => Generator::RandomUniform,
            other => {
                return Err(CliError::Usage(format!(
                    "unknown generator '{other}' (uniform-square or random-uniform)"
                )))
            }
        };
        let center = sc.center.unwrap_or([0.0, 1.5]);
        let side = sc.side.unwrap_or(1.0);
        if !(side > 0.0) || !side.is_finite() {
            return Err(CliError::Usage(format!("scenario side {side} must be positive")));
        }
        if media.is_layered() && center[1] - 0.5 * side <= 0.0 {
            return Err(CliError::Usage("scenario box must lie strictly above the interface y = 0".into()));
        }
        let scenario = Scenario {
            name: sc.name.clone().unwrap_or_else(|| match command {
                Command::Accuracy => "accuracy".into(),
                Command::Bench => "bench".into(),
                Command::Validate => "validate".into(),
            }),
            generator,
            center,
            side,
        };
        let p_list = file.sweep.p.clone().unwrap_or(p_default);
        let n_list = file.sweep.n.clone().unwrap_or(n_default);
        if p_list.is_empty() || n_list.is_empty() {
            return Err(CliError::Usage("empty sweep: give at least one P and one N".into()));
        }
        if p_list.contains(&0) || n_list.contains(&0) {
            return Err(CliError::Usage("P and N values must be positive".into()));
        }
        let p_ref = file.sweep.p_ref.unwrap_or(39);
        if p_ref == 0 {
            return Err(CliError::Usage("reference order must be positive".into()));
        }
        let leaf_size = file.run.leaf_size.unwrap_or(leaf_default);
        if leaf_size == 0 {
            return Err(CliError::Usage("leaf size must be positive".into()));
        }
        let tables = match &file.run.tables {
            Some(s) => parse_tables(s)?,
            None => TablePolicy::Precompute,
        };
        if file.run.threads == Some(0) {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        let oracle_tol = file.run.oracle_tol.unwrap_or(1e-12);
        if !(1e-14..=1e-6).contains(&oracle_tol) {
            return Err(CliError::Usage(format!("oracle tolerance {oracle_tol} outside [1e-14, 1e-6]")));
        }
        Ok(Settings {
            command,
            media,
            scenario,
            p_list,
            p_ref,
            n_list,
            leaf_size,
            seed: file.run.seed.unwrap_or(2024),
            threads: file.run.threads,
            tables,
            eval_subset: file.run.eval_subset,
            oracle_tol,
        })
    }

    pub fn run_config(&self, order: usize) -> hfmm::driver::RunConfig {
        let mut c = hfmm::driver::RunConfig::new(self.media, order, self.leaf_size);
        c.tables = self.tables.clone();
        c.oracle_tol = self.oracle_tol;
        c.threads = self.threads;
        c
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_and_defaults() {
        let f = FileConfig::parse(
            r#"
            [media]
            kind = "two-layer"
            k = 1.0
            [sweep]
            p = [5, 10]
            [run]
            tables = "cache=/tmp/t.bin"
            "#,
        )
        .unwrap();
        let s = Settings::resolve(Command::Accuracy, &f).unwrap();
        assert_eq!(s.media, MediaConfig::TwoLayer { k: 1.0, alpha: 1.0 });
        assert_eq!(s.p_list, vec![5, 10]);
        assert_eq!(s.p_ref, 39);
        assert_eq!(s.n_list, vec![10_000]);
        assert_eq!(s.tables, TablePolicy::Cache("/tmp/t.bin".into()));
    }

    #[test]
    fn overrides_win() {
        let base = FileConfig::parse("[run]\nleaf_size = 10\nseed = 3").unwrap();
        let over = FileConfig::parse("[run]\nleaf_size = 20").unwrap();
        let m = base.merge(over);
        assert_eq!(m.run.leaf_size, Some(20));
        assert_eq!(m.run.seed, Some(3));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(FileConfig::parse("[media]\nbogus = 1").is_err());
        let bad = |t: &str| Settings::resolve(Command::Bench, &FileConfig::parse(t).unwrap()).is_err();
        assert!(bad("[sweep]\nn = []"));
        assert!(bad("[media]\nkind = \"four-layer\""));
        assert!(bad("[media]\nalpha = -1.0"));
        assert!(bad("[run]\ntables = \"sometimes\""));
        assert!(bad("[scenario]\ncenter = [0.0, 0.2]"));
    }
}
