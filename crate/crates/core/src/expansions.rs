//! Free-space multipole and local expansions.
//!
//! With `W_n(z) = H_n(k|z|) e^{in arg z}` and `V_n(z) = J_n(k|z|) e^{in arg z}`
//! a multipole expansion about `c` represents `(i/4) Σ α_p W_p(x − c)` and a
//! local expansion `(i/4) Σ β_p V_p(x − c)`. Every translation is a Toeplitz
//! product over the order difference:
//!
//! * M2M and L2L: `b_p = Σ_m a_m V_{m−p}(c_new − c_old)`
//! * M2L: `β_p = Σ_m α_m W_{m−p}(c_local − c_multipole)`

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::greens::Point2;
use crate::specfun::{bessel_j_array, hankel1_array};
use crate::tree::Particle;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };
const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

#[derive(Debug, Clone, PartialEq)]
pub struct MultipoleExpansion {
    pub center: Point2,
    pub order: usize,
    /// `α_p` at index `p + order`.
    pub coeffs: Vec<Complex64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalExpansion {
    pub center: Point2,
    pub order: usize,
    /// `β_p` at index `p + order`.
    pub coeffs: Vec<Complex64>,
}

macro_rules! expansion_common {
    ($t:ident) => {
        impl $t {
            pub fn zero(center: Point2, order: usize) -> Self {
                Self {
                    center,
                    order,
                    coeffs: vec![ZERO; 2 * order + 1],
                }
            }

            pub fn coeff(&self, p: i64) -> Complex64 {
                self.coeffs[(p + self.order as i64) as usize]
            }

            /// Coefficient-wise sum; centers and orders must match.
            pub fn add_assign(&mut self, other: &Self) -> Result<()> {
                if other.order != self.order {
                    return Err(Error::OrderMismatch {
                        expected: self.order,
                        got: other.order,
                    });
                }
                for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
                    *a += b;
                }
                Ok(())
            }

            pub fn scale(&mut self, c: Complex64) {
                for a in &mut self.coeffs {
                    *a *= c;
                }
            }
        }
    };
}

expansion_common!(MultipoleExpansion);
expansion_common!(LocalExpansion);

/// `(−1)^n`.
fn parity(n: i64) -> f64 {
    if n & 1 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// `V_ν(d)` for `ν = −n..=n`, index `ν + n`.
pub fn bessel_waves(k: f64, d: Point2, n: usize) -> Result<Vec<Complex64>> {
    let pol = d.polar();
    let j = bessel_j_array(n, k * pol.rho)?;
    Ok(signed_waves(&j.iter().map(|&v| Complex64::new(v, 0.0)).collect::<Vec<_>>(), pol.theta, n))
}

/// `W_ν(d)` for `ν = −n..=n`, index `ν + n`.
pub fn hankel_waves(k: f64, d: Point2, n: usize) -> Result<Vec<Complex64>> {
    let pol = d.polar();
    if pol.rho == 0.0 {
        return Err(Error::Coincident);
    }
    let h = hankel1_array(n, k * pol.rho)?;
    Ok(signed_waves(&h, pol.theta, n))
}

/// Extend `C_0..=C_n` to `C_ν e^{iνθ}` over `ν = −n..=n` by reflection.
fn signed_waves(c: &[Complex64], theta: f64, n: usize) -> Vec<Complex64> {
    let mut out = vec![ZERO; 2 * n + 1];
    let rot = Complex64::from_polar(1.0, theta);
    let mut e = Complex64::new(1.0, 0.0);
    for (nu, &cv) in c.iter().enumerate().take(n + 1) {
        let v = cv * e;
        out[n + nu] = v;
        // C_{−ν} e^{−iνθ} = (−1)^ν C_ν e^{−iνθ}
        out[n - nu] = cv * e.conj() * parity(nu as i64);
        e *= rot;
    }
    out
}

/// `out_p += Σ_m a_m t(m − p)` with `t` indexed `ν + 2P` over `ν ∈ [−2P, 2P]`.
///
/// `a` and `out` may have different orders; `t` must cover every difference.
pub fn toeplitz_apply(a: &[Complex64], t: &[Complex64], out: &mut [Complex64]) {
    let pa = (a.len() / 2) as i64;
    let po = (out.len() / 2) as i64;
    let pt = (t.len() / 2) as i64;
    debug_assert!(pt >= pa + po);
    for (pi, o) in out.iter_mut().enumerate() {
        let p = pi as i64 - po;
        let base = (pt - pa - p) as usize;
        let mut acc = ZERO;
        for (am, tv) in a.iter().zip(&t[base..base + a.len()]) {
            acc += am * tv;
        }
        *o += acc;
    }
}

/// Add the contribution of `(position, strength)` pairs to `exp`.
pub fn p2m_accumulate(exp: &mut MultipoleExpansion, k: f64, points: &[Point2], strengths: &[Complex64]) -> Result<()> {
    let n = exp.order;
    for (&x, &q) in points.iter().zip(strengths) {
        let pol = (x - exp.center).polar();
        let j = bessel_j_array(n, k * pol.rho)?;
        let rot = Complex64::from_polar(1.0, -pol.theta);
        let mut e = Complex64::new(1.0, 0.0);
        for (p, &jp) in j.iter().enumerate() {
            // α_p gets q e^{−ipθ} J_p and α_{−p} gets q e^{ipθ} (−1)^p J_p.
            exp.coeffs[n + p] += q * e * jp;
            if p > 0 {
                exp.coeffs[n - p] += q * e.conj() * (parity(p as i64) * jp);
            }
            e *= rot;
        }
    }
    Ok(())
}

/// `α_p = Σ_j q_j e^{−ipθ_j} J_p(kρ_j)` about `center`.
pub fn p2m(particles: &[Particle], center: Point2, order: usize, k: f64) -> Result<MultipoleExpansion> {
    let mut exp = MultipoleExpansion::zero(center, order);
    let points: Vec<Point2> = particles.iter().map(|p| p.position).collect();
    let strengths: Vec<Complex64> = particles.iter().map(|p| p.strength).collect();
    p2m_accumulate(&mut exp, k, &points, &strengths)?;
    Ok(exp)
}

/// `(i/4) Σ α_p W_p(x − c)`.
pub fn eval_multipole(exp: &MultipoleExpansion, k: f64, x: Point2) -> Result<Complex64> {
    let w = hankel_waves(k, x - exp.center, exp.order)?;
    let s: Complex64 = exp.coeffs.iter().zip(&w).map(|(a, b)| a * b).sum();
    Ok(0.25 * I * s)
}

/// `(i/4) Σ β_p V_p(x − c)`.
pub fn eval_local(local: &LocalExpansion, k: f64, x: Point2) -> Result<Complex64> {
    let v = bessel_waves(k, x - local.center, local.order)?;
    let s: Complex64 = local.coeffs.iter().zip(&v).map(|(a, b)| a * b).sum();
    Ok(0.25 * I * s)
}

/// Shift operator `V_ν(c_new − c_old)`, `ν ∈ [−2P, 2P]`, shared by M2M and L2L.
pub fn shift_operator(k: f64, old_center: Point2, new_center: Point2, order: usize) -> Result<Vec<Complex64>> {
    bessel_waves(k, new_center - old_center, 2 * order)
}

/// Free-space M2L operator `W_ν(c_local − c_multipole)`, `ν ∈ [−2P, 2P]`.
pub fn m2l_operator(k: f64, source_center: Point2, target_center: Point2, order: usize) -> Result<Vec<Complex64>> {
    hankel_waves(k, target_center - source_center, 2 * order)
}

/// Re-center a multipole expansion.
pub fn m2m(child: &MultipoleExpansion, new_center: Point2, k: f64) -> Result<MultipoleExpansion> {
    let t = shift_operator(k, child.center, new_center, child.order)?;
    let mut out = MultipoleExpansion::zero(new_center, child.order);
    toeplitz_apply(&child.coeffs, &t, &mut out.coeffs);
    Ok(out)
}

/// Convert a multipole expansion into a local expansion about `target_center`.
pub fn m2l_free(exp: &MultipoleExpansion, target_center: Point2, k: f64) -> Result<LocalExpansion> {
    let t = m2l_operator(k, exp.center, target_center, exp.order)?;
    let mut out = LocalExpansion::zero(target_center, exp.order);
    toeplitz_apply(&exp.coeffs, &t, &mut out.coeffs);
    Ok(out)
}

/// Re-center a local expansion.
pub fn l2l(local: &LocalExpansion, new_center: Point2, k: f64) -> Result<LocalExpansion> {
    let t = shift_operator(k, local.center, new_center, local.order)?;
    let mut out = LocalExpansion::zero(new_center, local.order);
    toeplitz_apply(&local.coeffs, &t, &mut out.coeffs);
    Ok(out)
}
