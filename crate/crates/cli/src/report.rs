//! Result rows and their CSV / JSON encodings.

use std::io::Write;

use hfmm::greens::MediaConfig;
use serde::Serialize;

use crate::config::Format;

pub const CSV_VERSION_LINE: &str = "# hfmm-csv v1";
pub const CSV_HEADER: &str = "scenario,media,k,alpha,P,N,metric,value,seconds";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub scenario: String,
    pub media: String,
    pub k: f64,
    /// Impedance; absent for other media.
    pub alpha: Option<f64>,
    #[serde(rename = "P")]
    pub p: Option<usize>,
    #[serde(rename = "N")]
    pub n: Option<usize>,
    pub metric: String,
    pub value: f64,
    pub seconds: Option<f64>,
    /// The value itself is a wall-clock measurement.
    #[serde(skip)]
    pub timing: bool,
}

impl Row {
    pub fn new(scenario: &str, media: &MediaConfig, metric: impl Into<String>, value: f64) -> Row {
        Row {
            scenario: scenario.to_string(),
            media: media.name().to_string(),
            k: media.wavenumber(),
            alpha: match media {
                MediaConfig::TwoLayer { alpha, .. } => Some(*alpha),
                _ => None,
            },
            p: None,
            n: None,
            metric: metric.into(),
            value,
            seconds: None,
            timing: false,
        }
    }

    pub fn timing(mut self) -> Row {
        self.timing = true;
        self
    }

    pub fn order(mut self, p: usize) -> Row {
        self.p = Some(p);
        self
    }

    pub fn count(mut self, n: usize) -> Row {
        self.n = Some(n);
        self
    }

    pub fn seconds(mut self, s: f64) -> Row {
        self.seconds = Some(s);
        self
    }
}

/// Rows produced by one command, plus pass/fail for validation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pub rows: Vec<Row>,
    pub failures: Vec<String>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    /// Drop wall-clock columns so repeated runs produce identical bytes.
    pub fn strip_timings(&mut self) {
        self.rows.retain(|r| !r.timing);
        for r in &mut self.rows {
            r.seconds = None;
        }
    }

    pub fn write(&self, format: Format, out: &mut dyn Write) -> std::io::Result<()> {
        match format {
            Format::Csv => {
                writeln!(out, "{CSV_VERSION_LINE}")?;
                writeln!(out, "{CSV_HEADER}")?;
                for r in &self.rows {
                    writeln!(
                        out,
                        "{},{},{},{},{},{},{},{:e},{}",
                        csv_field(&r.scenario),
                        csv_field(&r.media),
                        r.k,
                        opt(r.alpha),
                        opt(r.p),
                        opt(r.n),
                        csv_field(&r.metric),
                        r.value,
                        opt(r.seconds)
                    )?;
                }
                Ok(())
            }
            Format::Json => {
                serde_json::to_writer_pretty(&mut *out, &self.rows)?;
                writeln!(out)
            }
        }
    }
}

fn opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Report {
        let m = MediaConfig::TwoLayer { k: 0.1, alpha: 1.0 };
        Report {
            rows: vec![
                Row::new("acc", &m, "E", 1.5e-4).order(5).count(100).seconds(0.25),
                Row::new("a,b", &MediaConfig::Free { k: 1.0 }, "beta", 1.0),
            ],
            failures: vec![],
        }
    }

    #[test]
    fn csv_layout() {
        let mut buf = Vec::new();
        sample().write(Format::Csv, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], CSV_VERSION_LINE);
        assert_eq!(lines[1], CSV_HEADER);
        assert_eq!(lines[2], "acc,two-layer,0.1,1,5,100,E,1.5e-4,0.25");
        assert_eq!(lines[3], "\"a,b\",free,1,,,,beta,1e0,");
    }

    #[test]
    fn json_mirrors_fields() {
        let mut buf = Vec::new();
        sample().write(Format::Json, &mut buf).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&buf).unwrap();
        let r = &v[0];
        for key in ["scenario", "media", "k", "alpha", "P", "N", "metric", "value", "seconds"] {
            assert!(r.get(key).is_some(), "{key}");
        }
        assert!(v[1]["alpha"].is_null());
    }
}
