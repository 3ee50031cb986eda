//! Reference values computed independently (mpmath at 30 digits) and frozen
//! here. The layered values use the complex line-image form
//! `g(x, x0_im) + ∫_0^∞ g(x, x0_im - sŷ) 2iα e^{iαs} ds` integrated along a
//! rotated ray, which shares no code path with the Sommerfeld oracle.

use hfmm::greens::{free_space, scattered_direct, MediaConfig, Point2};
use hfmm::quadrature::{gauss_legendre, gauss_laguerre_generalized};
use hfmm::specfun::{bessel_j, bessel_y, hankel1};
use hfmm::Complex64;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn bessel_values() {
    // (n, x, J_n(x), Y_n(x))
    let table: &[(i64, f64, f64, f64)] = &[
        (0, 1e-3, 0.9999997500000156, -4.471416611375923),
        (1, 2.5, 0.49709410246427405, 0.1459181379667858),
        (5, 10.0, -0.23406152818679363, 0.13540304768936232),
        (20, 3.0, 1.2275946737992987e-15, -13113540041757.447),
        (0, 30.0, -0.08636798358104021, -0.11729573168666403),
        (3, 100.0, 0.07628420172033194, 0.02344578668776091),
        (40, 0.5, 1.0122626959003595e-72, -7.861960484882533e+69),
    ];
    for &(n, x, j, y) in table {
        assert!(rel(bessel_j(n, x).unwrap(), j) < 1e-13, "J_{n}({x})");
        assert!(rel(bessel_y(n, x).unwrap(), y) < 1e-13, "Y_{n}({x})");
        let h = hankel1(n, x).unwrap();
        assert!(rel(h.re, j) < 1e-13 && rel(h.im, y) < 1e-13);
    }
    // Reflection J_{-n} = (-1)^n J_n.
    assert!(rel(bessel_j(-5, 10.0).unwrap(), 0.23406152818679363) < 1e-13);
}

#[test]
fn gauss_legendre_five_points() {
    let r = gauss_legendre(5, -1.0, 1.0).unwrap();
    let nodes = [-0.906179845938664, -0.5384693101056831, 0.0, 0.5384693101056831, 0.906179845938664];
    let weights = [0.23692688505618942, 0.4786286704993662, 0.568888888888889, 0.4786286704993662, 0.23692688505618942];
    for i in 0..5 {
        assert!((r.nodes[i] - nodes[i]).abs() < 1e-15);
        assert!((r.weights[i] - weights[i]).abs() < 1e-15);
    }
    // Γ(4) = 6 from two Laguerre nodes.
    let l = gauss_laguerre_generalized(2, 0.0).unwrap();
    let v: f64 = l.nodes.iter().zip(&l.weights).map(|(t, w)| w * t.powi(3)).sum();
    assert!((v - 6.0).abs() < 1e-12);
}

#[test]
fn free_space_value() {
    // (i/4) H_0(1) = (i/4)(J_0(1) + i Y_0(1))
    let g = free_space(1.0, Point2::new(0.0, 0.0), Point2::new(0.6, 0.8)).unwrap();
    let want = Complex64::new(-0.25 * 0.08825696421567697, 0.25 * 0.7651976865579666);
    assert!((g - want).norm() < 1e-15);
}

#[test]
fn two_layer_scattered_values() {
    // (k, alpha, x, x0, Re, Im)
    let table: &[(f64, f64, (f64, f64), (f64, f64), f64, f64)] = &[
        (1.0, 1.0, (0.5, 1.5), (0.0, 1.0), -0.0008746040461407372, -0.01091698131758431),
        (0.1, 1.0, (0.3, 1.2), (-0.2, 1.7), -0.1882696541411874, -0.14437305624918276),
        (1.0, 0.3, (2.0, 0.05), (0.0, 0.1), -0.06158504902110971, -0.030861440817749077),
        (3.0, 2.0, (0.1, 0.02), (0.0, 0.03), 0.005702792330853758, 0.134355479859523),
    ];
    for &(k, alpha, x, x0, re, im) in table {
        let media = MediaConfig::TwoLayer { k, alpha };
        let got = scattered_direct(&media, Point2::new(x.0, x.1), Point2::new(x0.0, x0.1), 1e-13).unwrap();
        let want = Complex64::new(re, im);
        assert!((got - want).norm() < 1e-11 * want.norm(), "k={k} alpha={alpha}: {got} vs {want}");
    }
}
