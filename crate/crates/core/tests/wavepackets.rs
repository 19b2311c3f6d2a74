use std::f64::consts::PI;

use mbscatter::quadrature::{integrate_with_points, Tolerance};
use mbscatter::wavepackets::{
    c3_constant, overlap_f, q2_energy_integral, q2_kernel, q3_kernel, q3_kernel_quadrature, TabulatedShape,
    WavepacketConfig,
};

fn gauss(tau_ratio: f64) -> WavepacketConfig {
    WavepacketConfig::gaussian(1.0, 50.0, 1.0, tau_ratio).unwrap()
}

fn convolution(z: f64, wp: &WavepacketConfig) -> f64 {
    let lam = wp.dwell_length();
    let f2 = |x: f64| (-x * x / 4.0).exp();
    integrate_with_points(
        |u: f64| f2(z - u) * (-u.abs() / lam).exp() / (2.0 * lam),
        -60.0 - 60.0 * lam,
        60.0 + 60.0 * lam,
        &[0.0, z],
        Tolerance::new(1e-15, 1e-13),
    )
    .unwrap()
    .value
}

#[test]
fn energy_integral_matches_convolution() {
    for tau in [0.1, 1.0, 5.0] {
        let wp = gauss(tau);
        for z in [0.0, 1.0, 3.0] {
            let two_d = q2_energy_integral(z, &wp, Tolerance::new(1e-12, 1e-10)).unwrap();
            let closed = q2_kernel(z, &wp).unwrap();
            let direct = convolution(z, &wp);
            assert!((two_d / direct - 1.0).abs() < 1e-6, "tau={tau} z={z}: {two_d} vs {direct}");
            assert!((closed / direct - 1.0).abs() < 1e-11, "tau={tau} z={z}");
        }
    }
}

#[test]
fn small_dwell_reduces_to_overlap_squared() {
    let wp = gauss(0.1);
    for i in 0..=40 {
        let z = i as f64 * 0.25;
        let q = q2_kernel(z, &wp).unwrap();
        assert!((q - overlap_f(z, &wp).powi(2)).abs() < 0.02, "z={z}");
    }
    let q = q2_energy_integral(3.0, &wp, Tolerance::default()).unwrap();
    assert!((q - overlap_f(3.0, &wp).powi(2)).abs() < 1e-2);
}

#[test]
fn exponential_tail() {
    let wp = gauss(5.0);
    let lam = wp.dwell_length();
    for z in [4.0 * lam + 1.0, 5.0 * lam, 8.0 * lam] {
        let h = 0.5;
        let slope = (q2_kernel(z + h, &wp).unwrap().ln() - q2_kernel(z - h, &wp).unwrap().ln()) / (2.0 * h);
        assert!((slope * lam + 1.0).abs() < 0.02, "z={z}: {slope}");
    }
}

#[test]
fn kernel_bounds_and_parity() {
    for tau in [0.0, 0.3, 2.0, 10.0] {
        let wp = gauss(tau);
        let q0 = q2_kernel(0.0, &wp).unwrap();
        assert!(q0 <= 1.0 + 1e-15 && q0 > 0.0);
        for z in [0.5, 2.0, 7.0] {
            let q = q2_kernel(z, &wp).unwrap();
            assert!(q > 0.0 && q <= q0);
            assert!((q - q2_kernel(-z, &wp).unwrap()).abs() < 1e-15);
        }
    }
}

fn gaussian_table(step: f64) -> TabulatedShape {
    let n = (16.0 / step) as i64;
    let xs: Vec<f64> = (-n..=n).map(|i| i as f64 * step).collect();
    let amp: Vec<f64> = xs.iter().map(|x| (-x * x / 4.0).exp()).collect();
    TabulatedShape::normalized(xs, amp).unwrap()
}

#[test]
fn tabulated_gaussian_agrees_with_analytic() {
    let shape = gaussian_table(0.01);
    let tab = WavepacketConfig::tabulated(shape, 50.0, 1.0, 1.0).unwrap();
    let ana = gauss(1.0);
    assert!((tab.width() - 1.0).abs() < 1e-4);
    for z in [0.0, 0.7, 2.0, 4.0] {
        assert!((tab.overlap(z) - ana.overlap(z)).abs() < 1e-4, "z={z}");
        let a = q2_kernel(z, &tab).unwrap();
        let b = q2_kernel(z, &ana).unwrap();
        assert!((a - b).abs() < 1e-4, "z={z}: {a} {b}");
    }
}

#[test]
fn c3_gaussian_by_quadrature() {
    let f = |x: f64| (-x * x / 8.0).exp();
    let tol = Tolerance::new(1e-13, 1e-11);
    let outer = |z: f64| {
        let inner = |zp: f64| f(zp) * f(z - zp);
        f(z) * integrate_with_points(inner, -40.0, 40.0, &[0.0, z], tol).unwrap().value
    };
    let direct = integrate_with_points(outer, -40.0, 40.0, &[0.0], tol).unwrap().value;
    let c3 = c3_constant(&gauss(1.0)).unwrap();
    assert!((c3 / direct - 1.0).abs() < 1e-10, "{c3} vs {direct}");
    assert!((c3 - 8.0 * PI / 3f64.sqrt()).abs() < 1e-14);

    let tab = WavepacketConfig::tabulated(gaussian_table(0.02), 50.0, 1.0, 1.0).unwrap();
    let c3_tab = c3_constant(&tab).unwrap();
    assert!((c3_tab / c3 - 1.0).abs() < 1e-3, "{c3_tab}");
}

#[test]
fn q3_short_dwell_limit() {
    let wp = gauss(0.01);
    for (z, zp) in [(0.0, 0.0), (1.0, -1.0), (2.0, 0.5)] {
        let want = overlap_f(z, &wp) * overlap_f(zp, &wp) * overlap_f(z - zp, &wp);
        let got = q3_kernel(z, zp, &wp).unwrap();
        assert!((got - want).abs() < 0.02, "({z},{zp}): {got} vs {want}");
    }
}

#[test]
fn q3_long_dwell_limit() {
    let tau = 400.0;
    let wp = gauss(tau);
    let lam = wp.dwell_length();
    let c3 = c3_constant(&wp).unwrap();
    for (u, w) in [(0.0, 0.0), (0.5, -0.3), (-0.4, -0.9), (0.8, 0.2)] {
        let (z, zp) = (u * lam, w * lam);
        let m = z.max(zp).max(0.0);
        let want = c3 / 3.0 / (tau * tau) * (-(3.0 * m - z - zp) / lam).exp();
        let got = q3_kernel(z, zp, &wp).unwrap();
        assert!((got / want - 1.0).abs() < 0.02, "({u},{w}): {got} vs {want}");
    }
}

#[test]
fn q3_symmetry_and_routes() {
    for tau in [0.5, 2.0] {
        let wp = gauss(tau);
        for (z, zp) in [(1.3, -0.4), (2.0, 3.5), (-1.0, -2.2)] {
            let a = q3_kernel(z, zp, &wp).unwrap();
            let b = q3_kernel(zp, z, &wp).unwrap();
            assert!((a - b).abs() < 1e-10 * a);
            let c = q3_kernel_quadrature(z, zp, &wp, Tolerance::new(1e-11, 1e-9)).unwrap();
            assert!((a - c).abs() < 1e-8, "({z},{zp}): {a} {c}");
        }
    }
}
