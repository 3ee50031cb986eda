//! Integer-order Bessel and Hankel functions of real non-negative argument.
//!
//! `J_n` comes from Miller's downward recurrence. Below [`ASYMPTOTIC_SPLIT`]
//! the recurrence is normalized with `J_0 + 2 Σ J_2k = 1` and `Y_0`, `Y_1`
//! follow from their Neumann series in the already normalized `J_n`. Above
//! the split the Hankel asymptotic expansions supply `J_0, J_1, Y_0, Y_1`
//! (the smallest asymptotic term there is below 1e-21). `Y_n` is always
//! obtained by forward recurrence, which is stable for the dominant solution.

use num_complex::Complex64;
use std::f64::consts::{FRAC_2_PI, PI};

use crate::error::{Error, Result};

/// Largest supported argument.
pub const MAX_ARGUMENT: f64 = 1.0e4;

/// Argument at which `J_0, J_1, Y_0, Y_1` switch to the asymptotic form.
pub const ASYMPTOTIC_SPLIT: f64 = 25.0;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Below this argument `H_0` is evaluated from its ascending series.
const SERIES_SPLIT: f64 = 2.0;

fn check_j_arg(x: f64) -> Result<()> {
    if !(x >= 0.0) {
        return Err(Error::Domain {
            function: "bessel_j",
            value: x,
        });
    }
    if x > MAX_ARGUMENT {
        return Err(Error::Range {
            function: "bessel_j",
            order: 0,
            value: x,
        });
    }
    Ok(())
}

fn check_y_arg(function: &'static str, x: f64) -> Result<()> {
    if !(x > 0.0) {
        return Err(Error::Domain { function, value: x });
    }
    if x > MAX_ARGUMENT {
        return Err(Error::Range {
            function,
            order: 0,
            value: x,
        });
    }
    Ok(())
}

fn reflect_sign(n: i64) -> f64 {
    if n.rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Hankel asymptotic form `(J_ν, Y_ν)` for ν ∈ {0, 1}.
fn asymptotic_jy(nu: u32, x: f64) -> (f64, f64) {
    let mu = 4.0 * f64::from(nu * nu);
    let inv8x = 1.0 / (8.0 * x);
    // a_k = prod_{j=1..k} (mu - (2j-1)^2) / (k! (8x)^k)
    let mut p = 1.0;
    let mut q = 0.0;
    let mut term = 1.0;
    let mut last = f64::INFINITY;
    for k in 1..60 {
        let odd = (2 * k - 1) as f64;
        term *= (mu - odd * odd) * inv8x / k as f64;
        let mag = term.abs();
        if mag > last || mag < 1e-18 {
            break;
        }
        last = mag;
        // P collects even k with alternating sign, Q odd k.
        match k % 4 {
            1 => q += term,
            2 => p -= term,
            3 => q -= term,
            _ => p += term,
        }
    }
    let chi = x - (0.5 * f64::from(nu) + 0.25) * PI;
    let (s, c) = chi.sin_cos();
    let amp = (FRAC_2_PI / x).sqrt();
    (amp * (p * c - q * s), amp * (p * s + q * c))
}

/// Miller's algorithm. Returns unnormalized `f_0..=f_top` proportional to
/// `J_0..=J_top` together with the top index used.
fn miller_unnormalized(nmax: usize, x: f64) -> Vec<f64> {
    let nn = nmax.max(x.ceil() as usize);
    let mut start = nn + 20 + (40.0 * nn as f64).sqrt() as usize;
    if start % 2 == 1 {
        start += 1;
    }
    let mut f = vec![0.0; start + 2];
    f[start] = 1e-30;
    let two_over_x = 2.0 / x;
    for j in (1..=start).rev() {
        let v = j as f64 * two_over_x * f[j] - f[j + 1];
        f[j - 1] = v;
        if v.abs() > 1e200 {
            for fv in f[j - 1..].iter_mut() {
                *fv *= 1e-200;
            }
        }
    }
    f
}

/// `J_0..=J_nmax` at `x`, together with enough higher orders for the
/// Neumann series when `x` is below the asymptotic split.
fn j_sweep(nmax: usize, x: f64) -> Vec<f64> {
    if x == 0.0 {
        let mut v = vec![0.0; nmax + 1];
        v[0] = 1.0;
        return v;
    }
    let mut f = miller_unnormalized(nmax, x);
    let scale = if x < ASYMPTOTIC_SPLIT {
        let mut sum = f[0];
        let mut k = 2;
        while k < f.len() {
            sum += 2.0 * f[k];
            k += 2;
        }
        1.0 / sum
    } else {
        let (j0, _) = asymptotic_jy(0, x);
        let (j1, _) = asymptotic_jy(1, x);
        if j0.abs() > j1.abs() {
            j0 / f[0]
        } else {
            j1 / f[1]
        }
    };
    for v in f.iter_mut() {
        *v *= scale;
    }
    f
}

/// Neumann series for `(Y_0, Y_1)` from a normalized `J` sweep.
fn neumann_y01(j: &[f64], x: f64) -> (f64, f64) {
    let lg = (0.5 * x).ln() + EULER_GAMMA;
    let mut s0 = 0.0;
    let mut s1 = 0.0;
    let mut k = 1;
    while 2 * k + 1 < j.len() {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        s0 += sign * j[2 * k] / k as f64;
        s1 += sign * (j[2 * k - 1] - j[2 * k + 1]) / k as f64;
        k += 1;
    }
    let y0 = FRAC_2_PI * (lg * j[0] - 2.0 * s0);
    let y1 = FRAC_2_PI * (lg * j[1] - j[0] / x + s1);
    (y0, y1)
}

fn y_forward(nmax: usize, x: f64, y0: f64, y1: f64) -> Result<Vec<f64>> {
    let mut y = Vec::with_capacity(nmax + 1);
    y.push(y0);
    if nmax >= 1 {
        y.push(y1);
    }
    for n in 1..nmax {
        let next = 2.0 * n as f64 / x * y[n] - y[n - 1];
        if !next.is_finite() {
            return Err(Error::Range {
                function: "bessel_y",
                order: n as i64 + 1,
                value: x,
            });
        }
        y.push(next);
    }
    Ok(y)
}

/// `J_n(x)` for `n = 0..=nmax`.
pub fn bessel_j_array(nmax: usize, x: f64) -> Result<Vec<f64>> {
    check_j_arg(x)?;
    let mut j = j_sweep(nmax, x);
    j.truncate(nmax + 1);
    Ok(j)
}

/// `Y_n(x)` for `n = 0..=nmax`.
pub fn bessel_y_array(nmax: usize, x: f64) -> Result<Vec<f64>> {
    Ok(jy_arrays(nmax, x)?.1)
}

/// `(J_n(x), Y_n(x))` for `n = 0..=nmax` in one sweep.
pub fn jy_arrays(nmax: usize, x: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    check_y_arg("bessel_y", x)?;
    let mut j = j_sweep(nmax.max(1), x);
    let (y0, y1) = if x < ASYMPTOTIC_SPLIT {
        neumann_y01(&j, x)
    } else {
        (asymptotic_jy(0, x).1, asymptotic_jy(1, x).1)
    };
    let y = y_forward(nmax, x, y0, y1)?;
    j.truncate(nmax + 1);
    Ok((j, y))
}

/// `H_n^(1)(x)` for `n = 0..=nmax`.
pub fn hankel1_array(nmax: usize, x: f64) -> Result<Vec<Complex64>> {
    check_y_arg("hankel1", x)?;
    let (j, y) = jy_arrays(nmax, x)?;
    Ok(j.into_iter()
        .zip(y)
        .map(|(a, b)| Complex64::new(a, b))
        .collect())
}

/// `J_n(x)` for any integer order, `x ≥ 0`.
pub fn bessel_j(n: i64, x: f64) -> Result<f64> {
    let j = bessel_j_array(n.unsigned_abs() as usize, x)?;
    let v = j[n.unsigned_abs() as usize];
    Ok(if n < 0 { reflect_sign(n) * v } else { v })
}

/// `Y_n(x)` for any integer order, `x > 0`.
pub fn bessel_y(n: i64, x: f64) -> Result<f64> {
    let y = bessel_y_array(n.unsigned_abs() as usize, x)?;
    let v = y[n.unsigned_abs() as usize];
    Ok(if n < 0 { reflect_sign(n) * v } else { v })
}

/// `H_n^(1)(x) = J_n(x) + i Y_n(x)` for any integer order, `x > 0`.
pub fn hankel1(n: i64, x: f64) -> Result<Complex64> {
    let h = hankel1_array(n.unsigned_abs() as usize, x)?;
    let v = h[n.unsigned_abs() as usize];
    Ok(if n < 0 { v * reflect_sign(n) } else { v })
}

/// `H_n^(1)(x)` for `n = -nmax..=nmax`, index `n + nmax`.
pub fn hankel1_signed(nmax: usize, x: f64) -> Result<Vec<Complex64>> {
    let h = hankel1_array(nmax, x)?;
    Ok(signed_from(&h, nmax))
}

/// `J_n(x)` for `n = -nmax..=nmax`, index `n + nmax`.
pub fn bessel_j_signed(nmax: usize, x: f64) -> Result<Vec<f64>> {
    let j = bessel_j_array(nmax, x)?;
    Ok(signed_from(&j, nmax))
}

fn signed_from<T>(pos: &[T], nmax: usize) -> Vec<T>
where
    T: Copy + std::ops::Neg<Output = T>,
{
    (0..=2 * nmax)
        .map(|i| {
            let n = i as i64 - nmax as i64;
            let v = pos[n.unsigned_abs() as usize];
            if n < 0 && n % 2 != 0 {
                -v
            } else {
                v
            }
        })
        .collect()
}

/// `H_0^(1)(x)`, the free-space kernel primitive. Uses the ascending series
/// for small arguments and the general sweep otherwise.
pub fn hankel1_0(x: f64) -> Result<Complex64> {
    check_y_arg("hankel1", x)?;
    if x > SERIES_SPLIT {
        return hankel1(0, x);
    }
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut j0 = 1.0;
    let mut harmonic = 0.0;
    let mut ysum = 0.0;
    for k in 1..40 {
        let kf = k as f64;
        term *= -q / (kf * kf);
        harmonic += 1.0 / kf;
        j0 += term;
        ysum -= harmonic * term;
        if term.abs() < 1e-17 {
            break;
        }
    }
    let y0 = FRAC_2_PI * (((0.5 * x).ln() + EULER_GAMMA) * j0 + ysum);
    Ok(Complex64::new(j0, y0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_zero_at_origin() {
        assert_eq!(bessel_j(0, 0.0).unwrap(), 1.0);
        assert_eq!(bessel_j(1, 0.0).unwrap(), 0.0);
        assert_eq!(bessel_j(-3, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn domain_errors() {
        assert!(matches!(bessel_j(0, -1.0), Err(Error::Domain { .. })));
        assert!(matches!(bessel_y(0, 0.0), Err(Error::Domain { .. })));
        assert!(matches!(hankel1(2, -0.5), Err(Error::Domain { .. })));
        assert!(matches!(bessel_j(0, 2.0e4), Err(Error::Range { .. })));
        assert!(matches!(bessel_y(0, f64::NAN), Err(Error::Domain { .. })));
    }

    #[test]
    fn y_overflow_is_range_error() {
        assert!(matches!(bessel_y(200, 1e-3), Err(Error::Range { .. })));
    }

    #[test]
    fn small_argument_series_matches_sweep() {
        for &x in &[1e-6, 0.01, 0.3, 1.0, 1.7, 2.0] {
            let a = hankel1_0(x).unwrap();
            let b = hankel1(0, x).unwrap();
            assert!((a - b).norm() <= 2e-15 * b.norm(), "x={x}: {a} vs {b}");
        }
    }

    #[test]
    fn continuity_across_asymptotic_split() {
        let lo = ASYMPTOTIC_SPLIT * (1.0 - 1e-14);
        let hi = ASYMPTOTIC_SPLIT * (1.0 + 1e-14);
        for n in [0, 1, 5, 30] {
            let a = hankel1(n, lo).unwrap();
            let b = hankel1(n, hi).unwrap();
            assert!((a - b).norm() < 1e-12 * a.norm().max(1e-3), "n={n}");
        }
    }

    #[test]
    fn signed_sweep_matches_reflection() {
        let h = hankel1_signed(6, 2.5).unwrap();
        for n in -6i64..=6 {
            let v = hankel1(n, 2.5).unwrap();
            // Different Miller start indices, so agreement is to rounding only.
            assert!((h[(n + 6) as usize] - v).norm() <= 1e-14 * v.norm());
        }
    }
}
