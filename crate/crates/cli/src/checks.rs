//! Validation suite. Each check measures one quantity and compares it with
//! a fixed threshold.

use hfmm::driver::{direct_apply_threads, error_metric, fmm_apply, RunConfig};
use hfmm::expansions::toeplitz_apply;
use hfmm::greens::{
    domain_green, free_space, free_space_spectral, interface_trace, mirror_image, scattered_direct, MediaConfig,
    Point2, SpectralPoint, SpectralRules,
};
use hfmm::layered::{compute_a, TranslationGeometry};
use hfmm::tree::Particle;
use hfmm::{Complex64, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::scenario::{Generator, Scenario};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Deliberate faults, used to show that a check can fail.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// Evaluate the impedance residual with `+iα` in place of `-iα`.
    WrongSignAlpha,
}

impl std::str::FromStr for Fault {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "wrong-sign-alpha" => Ok(Fault::WrongSignAlpha),
            other => Err(format!("unknown fault '{other}' (wrong-sign-alpha)")),
        }
    }
}

/// Inputs shared by the checks.
#[derive(Debug, Clone)]
pub struct CheckContext {
    pub seed: u64,
    pub threads: Option<usize>,
    /// Particle count for the FMM comparisons.
    pub n: usize,
    pub order: usize,
    pub fault: Option<Fault>,
}

impl Default for CheckContext {
    fn default() -> Self {
        Self {
            seed: 2024,
            threads: None,
            n: 150,
            order: 20,
            fault: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub value: f64,
    pub threshold: f64,
}

impl CheckOutcome {
    pub fn passed(&self) -> bool {
        self.value <= self.threshold
    }
}

type CheckFn = fn(&CheckContext) -> Result<CheckOutcome>;

pub const CHECKS: &[(&str, CheckFn)] = &[
    ("sommerfeld-identity", sommerfeld_identity),
    ("boundary-residual", boundary_residual),
    ("reciprocity", reciprocity),
    ("three-layer-equal-wavenumbers", three_layer_equal_wavenumbers),
    ("three-layer-decoupled-limit", three_layer_decoupled_limit),
    ("mirror-limit", mirror_limit),
    ("toeplitz", toeplitz),
    ("oracle-agreement", oracle_agreement),
];

pub fn check_names() -> Vec<&'static str> {
    CHECKS.iter().map(|(n, _)| *n).collect()
}

pub fn run_check(name: &str, ctx: &CheckContext) -> Option<Result<CheckOutcome>> {
    CHECKS.iter().find(|(n, _)| *n == name).map(|(_, f)| f(ctx))
}

fn rng(ctx: &CheckContext, salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(ctx.seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn relative(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / b.norm()
}

/// Spectral free-space kernel against the closed form at 50 separated pairs
/// for each of k = 0.1 and k = 1.
pub fn sommerfeld_identity(ctx: &CheckContext) -> Result<CheckOutcome> {
    let mut r = rng(ctx, 1);
    let rules = SpectralRules::default();
    let mut worst: f64 = 0.0;
    for k in [0.1, 1.0] {
        for _ in 0..50 {
            let x = Point2::new(r.gen_range(-2.0..2.0), r.gen_range(0.1..3.0));
            let x0 = Point2::new(r.gen_range(-2.0..2.0), r.gen_range(0.1..3.0));
            if (x.y - x0.y).abs() < 0.05 || (x - x0).norm() < 0.1 {
                continue;
            }
            let want = free_space(k, x, x0)?;
            worst = worst.max(relative(free_space_spectral(k, x, x0, &rules)?, want));
        }
    }
    Ok(CheckOutcome {
        name: "sommerfeld-identity",
        value: worst,
        threshold: 1e-10,
    })
}

/// `|∂u/∂n - iαu| / |u|` at 20 interface points for a source at (0, 1).
pub fn boundary_residual(ctx: &CheckContext) -> Result<CheckOutcome> {
    let alpha = 1.0;
    let media = MediaConfig::TwoLayer { k: 1.0, alpha };
    let sign = if ctx.fault == Some(Fault::WrongSignAlpha) { -1.0 } else { 1.0 };
    let mut worst: f64 = 0.0;
    for j in 0..20 {
        let x = -3.0 + 6.0 * j as f64 / 19.0;
        let (u, dn) = interface_trace(&media, x, Point2::new(0.0, 1.0), 1e-3, 1e-13)?;
        worst = worst.max((dn - sign * I * alpha * u).norm() / u.norm());
    }
    Ok(CheckOutcome {
        name: "boundary-residual",
        value: worst,
        threshold: 1e-6,
    })
}

/// `u_{x0}(x) = u_x(x0)` for two- and three-layer media.
pub fn reciprocity(ctx: &CheckContext) -> Result<CheckOutcome> {
    let mut r = rng(ctx, 3);
    let media = [
        MediaConfig::TwoLayer { k: 1.0, alpha: 1.0 },
        MediaConfig::ThreeLayer { k1: 1.0, k2: 1.5, k3: 2.0, d: 0.5 },
    ];
    let mut worst: f64 = 0.0;
    for m in &media {
        for _ in 0..10 {
            let x = Point2::new(r.gen_range(-1.0..1.0), r.gen_range(0.05..2.0));
            let x0 = Point2::new(r.gen_range(-1.0..1.0), r.gen_range(0.05..2.0));
            let a = domain_green(m, x, x0, 1e-13)?;
            let b = domain_green(m, x0, x, 1e-13)?;
            worst = worst.max(relative(a, b));
        }
    }
    Ok(CheckOutcome {
        name: "reciprocity",
        value: worst,
        threshold: 1e-10,
    })
}

/// Equal wavenumbers in all three layers leave no scattered field.
pub fn three_layer_equal_wavenumbers(ctx: &CheckContext) -> Result<CheckOutcome> {
    let mut r = rng(ctx, 4);
    let media = MediaConfig::ThreeLayer { k1: 1.0, k2: 1.0, k3: 1.0, d: 0.7 };
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let x = Point2::new(r.gen_range(-1.0..1.0), r.gen_range(0.05..2.0));
        let x0 = Point2::new(r.gen_range(-1.0..1.0), r.gen_range(0.05..2.0));
        worst = worst.max(scattered_direct(&media, x, x0, 1e-13)?.norm());
    }
    Ok(CheckOutcome {
        name: "three-layer-equal-wavenumbers",
        value: worst,
        threshold: 1e-12,
    })
}

/// For a very thick middle layer, σ₁ reduces to the single-interface
/// coefficient `(κ₁ - κ₂)/(κ₁ + κ₂)` on nodes evanescent in the middle
/// layer too (`|λ| > k₂`), where `e^{-κ₂ d}` vanishes.
pub fn three_layer_decoupled_limit(_ctx: &CheckContext) -> Result<CheckOutcome> {
    let (k1, k2) = (1.0, 1.5);
    let media = MediaConfig::ThreeLayer { k1, k2, k3: 2.0, d: 60.0 };
    let mut worst: f64 = 0.0;
    for j in 0..20 {
        let t = 1.2 + 0.5 * j as f64;
        let p = SpectralPoint::evanescent(k1, t);
        let kappa2 = hfmm::greens::kappa_branch(p.lambda_sq, k2);
        let want = (p.kappa - kappa2) / (p.kappa + kappa2);
        worst = worst.max((media.reflectance(&p)? - want).norm());
    }
    Ok(CheckOutcome {
        name: "three-layer-decoupled-limit",
        value: worst,
        threshold: 1e-10,
    })
}

fn cloud(ctx: &CheckContext, n: usize, salt: u64, y_center: f64) -> Vec<Particle> {
    Scenario {
        name: String::new(),
        generator: Generator::RandomUniform,
        center: [0.0, y_center],
        side: 1.0,
    }
    .particles(n, ctx.seed ^ salt)
}

/// Zero impedance against a free-space run on the sources plus their mirror
/// images.
pub fn mirror_limit(ctx: &CheckContext) -> Result<CheckOutcome> {
    let p = cloud(ctx, ctx.n, 6, 0.55);
    let k = 1.0;
    let mut cfg = RunConfig::new(MediaConfig::TwoLayer { k, alpha: 0.0 }, ctx.order.max(25), 10);
    cfg.threads = ctx.threads;
    let layered = fmm_apply(&p, &cfg)?;
    let doubled: Vec<Particle> = p
        .iter()
        .cloned()
        .chain(p.iter().map(|q| Particle {
            position: mirror_image(q.position),
            strength: q.strength,
        }))
        .collect();
    cfg.media = MediaConfig::Free { k };
    let free = fmm_apply(&doubled, &cfg)?;
    Ok(CheckOutcome {
        name: "mirror-limit",
        value: error_metric(&free.values, &layered.values, p.len())?,
        threshold: 1e-9,
    })
}

/// Dense `A_{p,m}` assembled column by column from the operator must be
/// constant along diagonals.
pub fn toeplitz(ctx: &CheckContext) -> Result<CheckOutcome> {
    let order = ctx.order;
    let len = 2 * order + 1;
    let geom = TranslationGeometry::between(Point2::new(0.0, 0.625), 0.125, Point2::new(0.5, 0.875), 0.125);
    let a = compute_a(&geom, &MediaConfig::TwoLayer { k: 1.0, alpha: 1.0 }, order, &SpectralRules::default())?;
    let mut dense = vec![vec![Complex64::new(0.0, 0.0); len]; len];
    for m in 0..len {
        let mut e = vec![Complex64::new(0.0, 0.0); len];
        e[m] = Complex64::new(1.0, 0.0);
        let mut col = vec![Complex64::new(0.0, 0.0); len];
        toeplitz_apply(&e, &a, &mut col);
        for p in 0..len {
            dense[p][m] = col[p];
        }
    }
    let scale = dense.iter().flatten().map(|v| v.norm()).fold(0.0, f64::max);
    let mut worst: f64 = 0.0;
    for p in 0..len - 1 {
        for m in 0..len - 1 {
            worst = worst.max((dense[p + 1][m + 1] - dense[p][m]).norm() / scale);
        }
    }
    Ok(CheckOutcome {
        name: "toeplitz",
        value: worst,
        threshold: 1e-14,
    })
}

/// FMM against the O(N²) Sommerfeld sum for particles close to the
/// interface, where every near-field route is exercised.
pub fn oracle_agreement(ctx: &CheckContext) -> Result<CheckOutcome> {
    let media = MediaConfig::TwoLayer { k: 1.0, alpha: 1.0 };
    let p = cloud(ctx, ctx.n, 8, 0.52);
    let mut cfg = RunConfig::new(media, ctx.order.max(20), 8);
    cfg.threads = ctx.threads;
    let got = fmm_apply(&p, &cfg)?;
    let want = direct_apply_threads(&p, &media, 1e-12, None, ctx.threads)?;
    Ok(CheckOutcome {
        name: "oracle-agreement",
        value: error_metric(&want.values, &got.values, p.len())?,
        threshold: 1e-8,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_are_unique() {
        let mut n = check_names();
        n.sort();
        n.dedup();
        assert_eq!(n.len(), CHECKS.len());
        assert!(run_check("nope", &CheckContext::default()).is_none());
    }

    #[test]
    fn injected_fault_is_caught() {
        let ctx = CheckContext::default();
        assert!(boundary_residual(&ctx).unwrap().passed());
        let bad = CheckContext {
            fault: Some(Fault::WrongSignAlpha),
            ..ctx
        };
        assert!(!boundary_residual(&bad).unwrap().passed());
    }
}
