//! Direct (non-hierarchical) evaluation of the free-space and layered
//! Green's functions. These are the near-field kernels of the FMM and the
//! brute-force oracle everything else is checked against.

pub mod media;
pub mod spectral;

use num_complex::Complex64;
use std::ops::{Add, Sub};

pub use media::{kappa_branch, solve_three_layer, MediaConfig, SpectralPoint};
pub use spectral::{
    adaptive_order_zero, cylindrical_waves, EvanescentScheme, SpectralRules, SpectralSum,
    SpectralWeight,
};

use crate::error::{Error, Result};
use crate::quadrature::gauss_legendre;
use crate::specfun::hankel1_0;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn polar(self) -> PolarOffset {
        PolarOffset {
            rho: self.norm(),
            theta: self.y.atan2(self.x),
        }
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, o: Point2) -> Point2 {
        Point2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, o: Point2) -> Point2 {
        Point2::new(self.x - o.x, self.y - o.y)
    }
}

/// Polar form of an offset; `theta ∈ (-π, π]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarOffset {
    pub rho: f64,
    pub theta: f64,
}

impl PolarOffset {
    pub fn to_cartesian(self) -> Point2 {
        let (s, c) = self.theta.sin_cos();
        Point2::new(self.rho * c, self.rho * s)
    }
}

/// `(i/4) H_0^(1)(k |x - x0|)`.
pub fn free_space(k: f64, x: Point2, x0: Point2) -> Result<Complex64> {
    let r = (x - x0).norm();
    if r == 0.0 {
        return Err(Error::Coincident);
    }
    Ok(0.25 * I * hankel1_0(k * r)?)
}

/// Free-space kernel through its propagating/evanescent spectral split.
/// Validation only; requires `y ≠ y0`.
pub fn free_space_spectral(
    k: f64,
    x: Point2,
    x0: Point2,
    rules: &SpectralRules,
) -> Result<Complex64> {
    let d = x - x0;
    if d.y == 0.0 {
        return Err(Error::Geometry(
            "spectral split needs a non-zero vertical separation".into(),
        ));
    }
    let s = cylindrical_waves(k, d.x, d.y.abs(), 0, &SpectralWeight::Unit, rules)?;
    Ok(0.25 * I * s.values[0])
}

/// `(x, y) → (x, -y)`.
pub fn mirror_image(p: Point2) -> Point2 {
    Point2::new(p.x, -p.y)
}

/// Line-image density `μ(s) = 2iα e^{iαs}`.
pub fn line_image_density(alpha: f64, s: f64) -> Complex64 {
    I * (2.0 * alpha) * Complex64::from_polar(1.0, alpha * s)
}

/// Spectral reflectance of `media` at a spectral point.
pub fn reflectance(media: &MediaConfig, p: &SpectralPoint) -> Result<Complex64> {
    media.reflectance(p)
}

fn check_above(p: Point2) -> Result<()> {
    if p.y > 0.0 && p.y.is_finite() && p.x.is_finite() {
        Ok(())
    } else {
        Err(Error::BelowInterface { x: p.x, y: p.y })
    }
}

fn check_tol(tol: f64) -> Result<()> {
    if (1e-14..=1e-6).contains(&tol) {
        Ok(())
    } else {
        Err(Error::Invalid(format!(
            "oracle tolerance {tol} outside [1e-14, 1e-6]"
        )))
    }
}

/// Scattered part of the layered Green's function by adaptive quadrature of
/// its Sommerfeld integral. Zero for free space.
pub fn scattered_direct(media: &MediaConfig, x: Point2, x0: Point2, tol: f64) -> Result<Complex64> {
    check_tol(tol)?;
    media.validate()?;
    if !media.is_layered() {
        return Ok(Complex64::new(0.0, 0.0));
    }
    check_above(x)?;
    check_above(x0)?;
    let w = adaptive_order_zero(
        media.wavenumber(),
        x.x - x0.x,
        x.y + x0.y,
        &SpectralWeight::Reflection(*media),
        tol,
    )?;
    Ok(0.25 * I * w)
}

/// Total layered Green's function `g(x, x0) + u^s_{x0}(x)`.
pub fn domain_green(media: &MediaConfig, x: Point2, x0: Point2, tol: f64) -> Result<Complex64> {
    Ok(free_space(media.wavenumber(), x, x0)? + scattered_direct(media, x, x0, tol)?)
}

/// Value and normal derivative `∂u/∂n`, `n = (0, -1)`, of the domain
/// Green's function at the interface point `(x, 0)`. The oracle is only
/// defined above the interface, so both come from the cubic through
/// `y = h, 2h, 3h, 4h` extrapolated to `y = 0`.
pub fn interface_trace(media: &MediaConfig, x: f64, x0: Point2, h: f64, tol: f64) -> Result<(Complex64, Complex64)> {
    if !(h > 0.0) {
        return Err(Error::Invalid(format!("step {h} must be positive")));
    }
    let mut f = [Complex64::new(0.0, 0.0); 4];
    for (i, v) in f.iter_mut().enumerate() {
        *v = domain_green(media, Point2::new(x, (i + 1) as f64 * h), x0, tol)?;
    }
    let u = 4.0 * f[0] - 6.0 * f[1] + 4.0 * f[2] - f[3];
    let du_dy = (-13.0 / 3.0 * f[0] + 9.5 * f[1] - 7.0 * f[2] + 11.0 / 6.0 * f[3]) / h;
    Ok((u, -du_dy))
}

/// `∫_0^C g(x, x0_im - s ŷ) μ(s) ds`, the near part of the two-layer line
/// image. Panels grow geometrically from `s = 0` starting at the distance
/// between `x` and the point image.
pub fn line_image_segment(k: f64, alpha: f64, x: Point2, x0: Point2, cutoff: f64) -> Result<Complex64> {
    const NODES: usize = 24;
    if cutoff <= 0.0 || alpha == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let image = mirror_image(x0);
    let r0 = (x - image).norm();
    if r0 == 0.0 {
        return Err(Error::Coincident);
    }
    let base = gauss_legendre(NODES, 0.0, 1.0)?;
    let mut acc = Complex64::new(0.0, 0.0);
    let mut lo = 0.0;
    let mut h = 0.5 * r0;
    while lo < cutoff {
        let hi = (lo + h).min(cutoff);
        for (&u, &wu) in base.nodes.iter().zip(&base.weights) {
            let s = lo + (hi - lo) * u;
            let src = Point2::new(image.x, image.y - s);
            acc += free_space(k, x, src)? * line_image_density(alpha, s) * (wu * (hi - lo));
        }
        lo = hi;
        h *= 2.0;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn impedance_condition_holds_on_the_interface() {
        let alpha = 1.0;
        let media = MediaConfig::TwoLayer { k: 1.0, alpha };
        for &x in &[-2.0, -0.3, 0.0, 0.7, 3.0] {
            let (u, dn) = interface_trace(&media, x, Point2::new(0.0, 1.0), 1e-3, 1e-13).unwrap();
            let res = (dn - I * alpha * u).norm() / u.norm();
            let flipped = (dn + I * alpha * u).norm() / u.norm();
            assert!(res < 1e-6 && flipped > 0.1, "x={x}: {res} {flipped}");
        }
    }

    #[test]
    fn free_space_at_unit_distance() {
        let v = free_space(1.0, Point2::new(0.0, 0.0), Point2::new(0.6, 0.8)).unwrap();
        assert!((v - Complex64::new(-0.022_064_241_053_919, 0.191_299_421_639_492)).norm() < 1e-14);
        let w = free_space(1.0, Point2::new(0.6, 0.8), Point2::new(0.0, 0.0)).unwrap();
        assert_eq!(v, w);
    }

    #[test]
    fn coincident_points_error() {
        let p = Point2::new(0.3, 0.4);
        assert_eq!(free_space(1.0, p, p), Err(Error::Coincident));
    }

    #[test]
    fn mirror_and_density() {
        assert_eq!(mirror_image(Point2::new(0.0, 1.0)), Point2::new(0.0, -1.0));
        assert_eq!(mirror_image(Point2::new(2.0, 0.0)), Point2::new(2.0, 0.0));
        let p = Point2::new(-1.5, 0.25);
        assert_eq!(mirror_image(mirror_image(p)), p);
        assert_eq!(line_image_density(0.0, 3.0), Complex64::new(0.0, 0.0));
        assert_eq!(line_image_density(1.0, 0.0), Complex64::new(0.0, 2.0));
        for s in [0.0, 0.7, 10.0, 123.4] {
            assert!((line_image_density(-1.7, s).norm() - 3.4).abs() < 1e-14);
        }
    }

    #[test]
    fn polar_round_trip() {
        for p in [Point2::new(0.3, -0.4), Point2::new(-2.0, 0.0), Point2::new(-1.0, 1e-9)] {
            let q = p.polar().to_cartesian();
            assert!((q - p).norm() < 1e-14);
            let th = p.polar().theta;
            assert!(th > -std::f64::consts::PI && th <= std::f64::consts::PI);
        }
    }

    #[test]
    fn oracle_rejects_points_below_interface() {
        let m = MediaConfig::TwoLayer { k: 1.0, alpha: 1.0 };
        let r = scattered_direct(&m, Point2::new(0.0, -0.1), Point2::new(0.0, 1.0), 1e-10);
        assert!(matches!(r, Err(Error::BelowInterface { .. })));
        let r = scattered_direct(&m, Point2::new(0.0, 0.5), Point2::new(0.0, 1.0), 1e-3);
        assert!(r.is_err());
    }

    #[test]
    fn free_media_has_no_scattered_field() {
        let m = MediaConfig::Free { k: 2.0 };
        let v = scattered_direct(&m, Point2::new(0.0, 0.5), Point2::new(0.2, 1.0), 1e-10).unwrap();
        assert_eq!(v, Complex64::new(0.0, 0.0));
    }
}
