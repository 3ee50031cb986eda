//! Gauss–Legendre and generalized Gauss–Laguerre rules.
//!
//! Nodes are found by Newton iteration on the three-term recurrence of the
//! orthogonal polynomials, so no tabulated nodes are needed.

use std::f64::consts::PI;

use crate::error::{Error, Result};

const NEWTON_TOL: f64 = 1e-15;
const NEWTON_MAX_ITER: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RuleKind {
    /// Gauss–Legendre on `[a, b]`.
    Legendre { a: f64, b: f64 },
    /// Gauss–Laguerre for the weight `t^a e^{-t}` on `[0, ∞)`.
    Laguerre { a_param: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub kind: RuleKind,
}

impl QuadratureRule {
    pub fn count(&self) -> usize {
        self.nodes.len()
    }

    /// `Σ w_i f(x_i)`.
    pub fn integrate<T, F>(&self, mut f: F) -> T
    where
        F: FnMut(f64) -> T,
        T: std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T> + Default,
    {
        self.nodes
            .iter()
            .zip(&self.weights)
            .fold(T::default(), |acc, (&x, &w)| acc + f(x) * w)
    }

    /// Affine image of a Legendre rule on a new interval.
    pub fn remap(&self, a: f64, b: f64) -> Result<QuadratureRule> {
        let RuleKind::Legendre { a: a0, b: b0 } = self.kind else {
            return Err(Error::Quadrature("only Legendre rules can be remapped".into()));
        };
        check_interval(a, b)?;
        let s = (b - a) / (b0 - a0);
        Ok(QuadratureRule {
            nodes: self.nodes.iter().map(|&x| a + (x - a0) * s).collect(),
            weights: self.weights.iter().map(|&w| w * s).collect(),
            kind: RuleKind::Legendre { a, b },
        })
    }
}

fn check_interval(a: f64, b: f64) -> Result<()> {
    if !(a.is_finite() && b.is_finite() && a < b) {
        return Err(Error::Quadrature(format!("invalid interval [{a}, {b}]")));
    }
    Ok(())
}

/// Count-point Gauss–Legendre rule on `[a, b]`.
pub fn gauss_legendre(count: usize, a: f64, b: f64) -> Result<QuadratureRule> {
    if count == 0 {
        return Err(Error::Quadrature("count must be positive".into()));
    }
    check_interval(a, b)?;
    let n = count;
    let nf = n as f64;
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..NEWTON_MAX_ITER {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() <= NEWTON_TOL {
                let (_, d) = legendre_with_derivative(n, z);
                dp = d;
                break;
            }
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    Ok(QuadratureRule {
        nodes: x.iter().map(|&t| mid + half * t).collect(),
        weights: w.iter().map(|&t| half * t).collect(),
        kind: RuleKind::Legendre { a, b },
    })
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p1 = 1.0;
    let mut p2 = 0.0;
    for j in 1..=n {
        let p3 = p2;
        p2 = p1;
        let jf = j as f64;
        p1 = ((2.0 * jf - 1.0) * z * p2 - (jf - 1.0) * p3) / jf;
    }
    let nf = n as f64;
    (p1, nf * (z * p1 - p2) / (z * z - 1.0))
}

/// Count-point generalized Gauss–Laguerre rule for `∫_0^∞ t^a e^{-t} f(t) dt`.
pub fn gauss_laguerre_generalized(count: usize, a_param: f64) -> Result<QuadratureRule> {
    if count == 0 {
        return Err(Error::Quadrature("count must be positive".into()));
    }
    if !(a_param >= 0.0 && a_param.is_finite()) {
        return Err(Error::Quadrature(format!(
            "Laguerre parameter must be non-negative, got {a_param}"
        )));
    }
    let n = count;
    let nf = n as f64;
    let alf = a_param;
    let log_norm = ln_gamma(alf + nf) - ln_gamma(nf);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut z = 0.0;
    for i in 0..n {
        z = match i {
            0 => (1.0 + alf) * (3.0 + 0.92 * alf) / (1.0 + 2.4 * nf + 1.8 * alf),
            1 => z + (15.0 + 6.25 * alf) / (1.0 + 0.9 * alf + 2.5 * nf),
            _ => {
                let ai = (i - 1) as f64;
                z + ((1.0 + 2.55 * ai) / (1.9 * ai) + 1.26 * ai * alf / (1.0 + 3.5 * ai))
                    * (z - x[i - 2])
                    / (1.0 + 0.3 * alf)
            }
        };
        let mut eval = laguerre_scaled(n, alf, z);
        for _ in 0..NEWTON_MAX_ITER {
            let dz = eval.p1 / eval.pp;
            z -= dz;
            eval = laguerre_scaled(n, alf, z);
            if dz.abs() <= NEWTON_TOL * z.max(1.0) {
                break;
            }
        }
        x[i] = z;
        // w = -Γ(n+a)/Γ(n) / (n L'_n(z) L_{n-1}(z)), with the shared scale folded back in.
        let denom = eval.pp * nf * eval.p2;
        w[i] = -(log_norm - 2.0 * eval.log_scale).exp() / denom;
    }
    if x.windows(2).any(|p| p[1] <= p[0]) || w.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::Quadrature(format!(
            "Laguerre node search failed for count={count}, a={a_param}"
        )));
    }
    Ok(QuadratureRule {
        nodes: x,
        weights: w,
        kind: RuleKind::Laguerre { a_param },
    })
}

struct LaguerreEval {
    p1: f64,
    p2: f64,
    pp: f64,
    log_scale: f64,
}

/// `L_n^a(z)`, `L_{n-1}^a(z)` and the derivative, all divided by `e^{log_scale}`.
fn laguerre_scaled(n: usize, alf: f64, z: f64) -> LaguerreEval {
    const BIG: f64 = 1e150;
    let mut p1 = 1.0;
    let mut p2 = 0.0;
    let mut log_scale = 0.0;
    for j in 1..=n {
        let p3 = p2;
        p2 = p1;
        let jf = j as f64;
        p1 = ((2.0 * jf - 1.0 + alf - z) * p2 - (jf - 1.0 + alf) * p3) / jf;
        if p1.abs() > BIG {
            p1 /= BIG;
            p2 /= BIG;
            log_scale += BIG.ln();
        }
    }
    let nf = n as f64;
    let pp = (nf * p1 - (nf + alf) * p2) / z;
    LaguerreEval {
        p1,
        p2,
        pp,
        log_scale,
    }
}

/// `ln Γ(x)` for `x > 0` (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        return (PI / (PI * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = COEF[0];
    let t = x + 7.5;
    for (i, &c) in COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn midpoint_and_two_point() {
        let r = gauss_legendre(1, -1.0, 1.0).unwrap();
        assert_eq!(r.nodes, vec![0.0]);
        assert!((r.weights[0] - 2.0).abs() < 1e-15);
        let r = gauss_legendre(2, -1.0, 1.0).unwrap();
        assert!((r.nodes[0] + 0.577_350_269_189_626).abs() < 1e-15);
        assert!((r.nodes[1] - 0.577_350_269_189_626).abs() < 1e-15);
        assert!((r.weights[0] - 1.0).abs() < 1e-15 && (r.weights[1] - 1.0).abs() < 1e-15);
        let v: f64 = r.integrate(|x| x * x);
        assert!((v - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn legendre_errors() {
        assert!(gauss_legendre(0, 0.0, 1.0).is_err());
        assert!(gauss_legendre(4, 1.0, 1.0).is_err());
        assert!(gauss_legendre(4, 2.0, 1.0).is_err());
    }

    #[test]
    fn single_point_laguerre() {
        let r = gauss_laguerre_generalized(1, 0.0).unwrap();
        assert!((r.nodes[0] - 1.0).abs() < 1e-14 && (r.weights[0] - 1.0).abs() < 1e-14);
        let r = gauss_laguerre_generalized(1, 1.0).unwrap();
        assert!((r.nodes[0] - 2.0).abs() < 1e-14 && (r.weights[0] - 1.0).abs() < 1e-14);
        let r = gauss_laguerre_generalized(2, 0.0).unwrap();
        let v: f64 = r.integrate(|t| t * t * t);
        assert!((v - 6.0).abs() < 1e-12);
    }

    #[test]
    fn laguerre_errors() {
        assert!(gauss_laguerre_generalized(0, 0.0).is_err());
        assert!(gauss_laguerre_generalized(3, -0.5).is_err());
    }

    #[test]
    fn ln_gamma_values() {
        assert!((ln_gamma(1.0)).abs() < 1e-14);
        assert!((ln_gamma(5.0) - 24f64.ln()).abs() < 1e-13);
        assert!((ln_gamma(0.5) - PI.sqrt().ln()).abs() < 1e-14);
    }
}
