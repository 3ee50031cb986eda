//! Media descriptions and their spectral reflection coefficients.

use num_complex::Complex64;

use crate::error::{Error, Result};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// A point on the real spectral axis, carried as `λ²` together with the
/// top-layer `κ = sqrt(λ² - k²)` on the outgoing branch. The propagating
/// parameterization gives `κ = -i k sin τ`, the evanescent one `κ = t ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralPoint {
    pub lambda_sq: f64,
    pub kappa: Complex64,
}

impl SpectralPoint {
    /// `λ = -k cos τ`, `τ ∈ [0, π]`.
    pub fn propagating(k: f64, tau: f64) -> Self {
        let (s, c) = tau.sin_cos();
        Self {
            lambda_sq: k * k * c * c,
            kappa: Complex64::new(0.0, -k * s),
        }
    }

    /// `|λ| = sqrt(t² + k²)`, `κ = t ≥ 0`.
    pub fn evanescent(k: f64, t: f64) -> Self {
        Self {
            lambda_sq: t * t + k * k,
            kappa: Complex64::new(t, 0.0),
        }
    }

    /// `t = k sinh w`, so `|λ| = k cosh w`.
    pub fn evanescent_sinh(k: f64, w: f64) -> Self {
        let c = k * w.cosh();
        Self {
            lambda_sq: c * c,
            kappa: Complex64::new(k * w.sinh(), 0.0),
        }
    }
}

/// `sqrt(λ² - k²)` with `Re ≥ 0`, and `-i sqrt(k² - λ²)` when `|λ| < k`.
pub fn kappa_branch(lambda_sq: f64, k: f64) -> Complex64 {
    let d = lambda_sq - k * k;
    if d >= 0.0 {
        Complex64::new(d.sqrt(), 0.0)
    } else {
        Complex64::new(0.0, -(-d).sqrt())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MediaConfig {
    Free { k: f64 },
    /// Impedance half-space below `y = 0`.
    TwoLayer { k: f64, alpha: f64 },
    /// Interfaces at `y = 0` and `y = -d`; sources and targets in the top layer.
    ThreeLayer { k1: f64, k2: f64, k3: f64, d: f64 },
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Media(format!("{name} must be positive and finite, got {v}")))
    }
}

impl MediaConfig {
    pub fn validate(&self) -> Result<()> {
        match *self {
            MediaConfig::Free { k } => positive("k", k),
            MediaConfig::TwoLayer { k, alpha } => {
                positive("k", k)?;
                if !(alpha >= 0.0 && alpha.is_finite()) {
                    return Err(Error::Media(format!(
                        "impedance alpha must be finite and non-negative, got {alpha}"
                    )));
                }
                Ok(())
            }
            MediaConfig::ThreeLayer { k1, k2, k3, d } => {
                positive("k1", k1)?;
                positive("k2", k2)?;
                positive("k3", k3)?;
                positive("d", d)?;
                if k2 > k1.max(k3) {
                    return Err(Error::Media(format!(
                        "k2 = {k2} exceeds both k1 = {k1} and k3 = {k3}: the slab carries guided modes"
                    )));
                }
                Ok(())
            }
        }
    }

    /// Wavenumber of the layer holding sources and targets.
    pub fn wavenumber(&self) -> f64 {
        match *self {
            MediaConfig::Free { k } | MediaConfig::TwoLayer { k, .. } => k,
            MediaConfig::ThreeLayer { k1, .. } => k1,
        }
    }

    pub fn is_layered(&self) -> bool {
        !matches!(self, MediaConfig::Free { .. })
    }

    pub fn name(&self) -> &'static str {
        match self {
            MediaConfig::Free { .. } => "free",
            MediaConfig::TwoLayer { .. } => "two-layer",
            MediaConfig::ThreeLayer { .. } => "three-layer",
        }
    }

    /// `|λ|` values where some lower-layer `κ_j` vanishes (square-root branch
    /// points of the reflectance on the real axis).
    pub fn branch_points(&self) -> Vec<f64> {
        match *self {
            MediaConfig::ThreeLayer { k1, k2, k3, .. } => {
                let mut v: Vec<f64> = [k2, k3].into_iter().filter(|&kj| kj != k1).collect();
                v.sort_by(f64::total_cmp);
                v.dedup();
                v
            }
            _ => Vec::new(),
        }
    }

    /// Spectral reflectance seen by the top layer: `σ̂` for two layers,
    /// `σ₁` for three layers and zero for free space.
    pub fn reflectance(&self, p: &SpectralPoint) -> Result<Complex64> {
        match *self {
            MediaConfig::Free { .. } => Ok(Complex64::new(0.0, 0.0)),
            MediaConfig::TwoLayer { alpha, .. } => two_layer_reflectance(alpha, p.kappa),
            MediaConfig::ThreeLayer { .. } => Ok(self.three_layer_sigma(p)?[0]),
        }
    }

    /// Full `(σ₁, σ₂⁺, σ₂⁻, σ₃)`; errors for other media.
    pub fn three_layer_sigma(&self, p: &SpectralPoint) -> Result<[Complex64; 4]> {
        let MediaConfig::ThreeLayer { k2, k3, d, .. } = *self else {
            return Err(Error::Media("three-layer coefficients requested for another medium".into()));
        };
        let kappa2 = kappa_branch(p.lambda_sq, k2);
        let kappa3 = kappa_branch(p.lambda_sq, k3);
        let decay = (-kappa2 * d).exp();
        solve_three_layer([p.kappa, kappa2, kappa3], decay).map_err(|e| match e {
            Error::SingularSystem { pivot, .. } => Error::SingularSystem {
                lambda: p.lambda_sq.sqrt(),
                pivot,
            },
            other => other,
        })
    }

    /// Stable 64-bit identity of the medium, used to tag cached tables.
    pub fn fingerprint(&self) -> u64 {
        let (tag, vals): (u8, Vec<f64>) = match *self {
            MediaConfig::Free { k } => (0, vec![k]),
            MediaConfig::TwoLayer { k, alpha } => (1, vec![k, alpha]),
            MediaConfig::ThreeLayer { k1, k2, k3, d } => (2, vec![k1, k2, k3, d]),
        };
        let mut h = Fnv::new();
        h.write(&[tag]);
        for v in vals {
            h.write(&v.to_bits().to_le_bytes());
        }
        h.finish()
    }
}

/// `(κ + iα) / (κ - iα)`.
pub fn two_layer_reflectance(alpha: f64, kappa: Complex64) -> Result<Complex64> {
    let den = kappa - I * alpha;
    if den.norm() <= 1e-14 * (kappa.norm() + alpha.abs()) {
        return Err(Error::SingularSystem {
            lambda: f64::NAN,
            pivot: den.norm(),
        });
    }
    Ok((kappa + I * alpha) / den)
}

/// Solves the 4×4 interface system for `(σ₁, σ₂⁺, σ₂⁻, σ₃)` given
/// `κ₁, κ₂, κ₃` and `e^{-κ₂ d}`, by elimination with partial pivoting.
pub fn solve_three_layer(kappa: [Complex64; 3], decay: Complex64) -> Result<[Complex64; 4]> {
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    let [k1, k2, k3] = kappa;
    if k1.norm() == 0.0 || k2.norm() == 0.0 || k3.norm() == 0.0 {
        return Err(Error::SingularSystem {
            lambda: f64::NAN,
            pivot: 0.0,
        });
    }
    let (r1, r2, r3) = (one / k1, one / k2, one / k3);
    let mut m = [
        [r1, -r2, -decay * r2, zero, -r1],
        [zero, decay * r2, r2, -r3, zero],
        [one, one, -decay, zero, one],
        [zero, decay, -one, -one, zero],
    ];
    let scale = m
        .iter()
        .flat_map(|row| row[..4].iter())
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    for col in 0..4 {
        let piv = (col..4)
            .max_by(|&a, &b| m[a][col].norm().total_cmp(&m[b][col].norm()))
            .unwrap_or(col);
        if m[piv][col].norm() <= 1e-14 * scale {
            return Err(Error::SingularSystem {
                lambda: f64::NAN,
                pivot: m[piv][col].norm(),
            });
        }
        m.swap(col, piv);
        for row in col + 1..4 {
            let f = m[row][col] / m[col][col];
            for c in col..5 {
                let v = m[col][c];
                m[row][c] -= f * v;
            }
        }
    }
    let mut x = [zero; 4];
    for row in (0..4).rev() {
        let mut acc = m[row][4];
        for c in row + 1..4 {
            acc -= m[row][c] * x[c];
        }
        x[row] = acc / m[row][row];
    }
    Ok(x)
}

/// FNV-1a, 64 bit.
pub(crate) struct Fnv(u64);

impl Fnv {
    pub(crate) fn new() -> Self {
        Fnv(0xcbf2_9ce4_8422_2325)
    }
    pub(crate) fn write(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 ^= u64::from(b);
            self.0 = self.0.wrapping_mul(0x0100_0000_01b3);
        }
    }
    pub(crate) fn finish(&self) -> u64 {
        self.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn two_layer_zero_alpha_is_unit() {
        let m = MediaConfig::TwoLayer { k: 1.3, alpha: 0.0 };
        for tau in [0.1, 1.0, 2.5] {
            let s = m.reflectance(&SpectralPoint::propagating(1.3, tau)).unwrap();
            assert!(close(s, Complex64::new(1.0, 0.0), 1e-15));
        }
        let s = m.reflectance(&SpectralPoint::evanescent(1.3, 0.7)).unwrap();
        assert!(close(s, Complex64::new(1.0, 0.0), 1e-15));
    }

    #[test]
    fn equal_wavenumbers_give_transparent_interfaces() {
        let k = 0.8;
        let d = 0.6;
        let m = MediaConfig::ThreeLayer { k1: k, k2: k, k3: k, d };
        for p in [
            SpectralPoint::propagating(k, 0.4),
            SpectralPoint::propagating(k, 2.0),
            SpectralPoint::evanescent(k, 0.5),
            SpectralPoint::evanescent(k, 3.0),
        ] {
            let s = m.three_layer_sigma(&p).unwrap();
            let decay = (-p.kappa * d).exp();
            assert!(close(s[0], Complex64::new(0.0, 0.0), 1e-14));
            assert!(close(s[1], Complex64::new(1.0, 0.0), 1e-14));
            assert!(close(s[2], Complex64::new(0.0, 0.0), 1e-14));
            assert!(close(s[3], decay, 1e-14));
        }
    }

    #[test]
    fn branch_is_outgoing() {
        let kap = kappa_branch(0.25, 1.0);
        assert_eq!(kap.re, 0.0);
        assert!(kap.im < 0.0);
        assert_eq!(kappa_branch(4.0, 1.0), Complex64::new(3f64.sqrt(), 0.0));
    }

    #[test]
    fn validation() {
        assert!(MediaConfig::Free { k: 0.0 }.validate().is_err());
        assert!(MediaConfig::TwoLayer { k: 1.0, alpha: -0.5 }.validate().is_err());
        assert!(MediaConfig::ThreeLayer { k1: 1.0, k2: 2.0, k3: 1.0, d: 1.0 }
            .validate()
            .is_err());
        assert!(MediaConfig::ThreeLayer { k1: 1.0, k2: 0.7, k3: 1.3, d: 0.5 }
            .validate()
            .is_ok());
        assert!(MediaConfig::ThreeLayer { k1: 1.0, k2: 0.7, k3: 1.3, d: 0.0 }
            .validate()
            .is_err());
    }

    #[test]
    fn fingerprint_distinguishes_media() {
        let a = MediaConfig::TwoLayer { k: 1.0, alpha: 1.0 }.fingerprint();
        let b = MediaConfig::TwoLayer { k: 1.0, alpha: 0.5 }.fingerprint();
        assert_ne!(a, b);
        assert_eq!(a, MediaConfig::TwoLayer { k: 1.0, alpha: 1.0 }.fingerprint());
    }
}
