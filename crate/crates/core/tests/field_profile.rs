use std::f64::consts::PI;

use proptest::prelude::*;
use spinmem::field_profile::*;

/// Complete elliptic integrals K(m), E(m) of parameter m = k² via the AGM.
fn elliptic_ke(m: f64) -> (f64, f64) {
    let (mut a, mut b) = (1.0f64, (1.0 - m).sqrt());
    let mut c = m.sqrt();
    let mut sum = 0.5 * c * c;
    let mut pow = 0.5;
    for _ in 0..64 {
        if c.abs() <= 1e-16 * a {
            break;
        }
        let an = 0.5 * (a + b);
        c = 0.5 * (a - b);
        b = (a * b).sqrt();
        a = an;
        pow *= 2.0;
        sum += pow * c * c;
    }
    let k = PI / (2.0 * a);
    (k, k * (1.0 - sum))
}

/// Closed-form in-plane loop field in units of K0.
fn loop_field_oracle(big_r: f64, r: f64) -> f64 {
    let m = 4.0 * big_r * r / ((big_r + r) * (big_r + r));
    let (k, e) = elliptic_ke(m);
    2.0 * (k / (big_r + r) + e / (big_r - r))
}

#[test]
fn quadrature_matches_elliptic_closed_form() {
    let coil = DriveCoil::new(2.0, 0.5, 0.3, 1.7).unwrap();
    for i in 0..=45 {
        let r = i as f64 * 0.04;
        let got = field_at_radius(&coil, r).unwrap();
        let want = 1.7 * loop_field_oracle(2.0, r);
        assert!((got / want - 1.0).abs() < 1e-10, "r = {r}: {got} vs {want}");
    }
}

#[test]
fn paper_style_range_is_representable_directly() {
    let r = DriveAmplitudeRange::new(10.0, 10.5).unwrap();
    assert_eq!((r.b_min(), r.b_max()), (10.0, 10.5));
    assert!(DriveAmplitudeRange::new(10.5, 10.0).is_err());
    assert!(DriveAmplitudeRange::new(0.0, 1.0).is_err());
}

#[test]
fn loop_four_times_sample_gives_documented_range() {
    // b_min normalised to 10 by choice of K0.
    let big_r = 4.0;
    let coil = DriveCoil::new(big_r, 1.0, 0.5, 10.0 * big_r / (2.0 * PI)).unwrap();
    let range = amplitude_range(&coil);
    assert!((range.b_min() - 10.0).abs() < 1e-12);
    assert!((range.b_max() - 10.468_75).abs() < 1e-12);
    let homogeneous = amplitude_range(&DriveCoil::new(big_r, 0.0, 0.5, 1.0).unwrap());
    assert!(homogeneous.is_homogeneous());
}

#[test]
fn rectangle_density_integrates_to_one() {
    let r = DriveAmplitudeRange::new(10.0, 10.5).unwrap();
    let o = spinmem::quad::QuadOptions::with_tol(1e-14, 1e-13);
    let mass = spinmem::quad::integrate(|b| drive_amplitude_pdf(&r, b), 10.0, 10.5, o).unwrap().value;
    assert!((mass - 1.0).abs() < 1e-12);
    assert_eq!(drive_amplitude_pdf(&r, 10.25), 2.0);
    assert_eq!(drive_amplitude_pdf(&r, 9.99), 0.0);
    assert_eq!(drive_amplitude_pdf(&r, 10.51), 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn series_error_is_fourth_order(big_r in 0.5f64..10.0, frac in 0.0f64..0.25, k0 in 0.1f64..10.0) {
        let coil = DriveCoil::new(big_r, 0.5 * big_r, 1.0, k0).unwrap();
        let r = frac * big_r;
        let q = field_at_radius(&coil, r).unwrap();
        let s = field_series_approx(&coil, r).unwrap();
        prop_assert!(((s - q) / q).abs() <= 2.0 * frac.powi(4) + 1e-12);
    }

    #[test]
    fn field_monotone_inside_loop(big_r in 0.5f64..10.0, k0 in 0.1f64..10.0) {
        let coil = DriveCoil::new(big_r, 0.1 * big_r, 1.0, k0).unwrap();
        let mut last = 0.0;
        for i in 0..100 {
            let b = field_at_radius(&coil, 0.9 * big_r * i as f64 / 99.0).unwrap();
            prop_assert!(b >= last);
            last = b;
        }
    }

    #[test]
    fn wide_loop_keeps_spread_below_five_percent(d in 0.0f64..1.0, ratio in 4.0f64..50.0, k0 in 0.1f64..10.0) {
        let coil = DriveCoil::new(ratio * d.max(1e-3), d, 1.0, k0).unwrap();
        let range = amplitude_range(&coil);
        prop_assert!(range.spread() / range.b_min() <= 0.05);
    }

    #[test]
    fn range_grows_with_sample_radius(d1 in 0.0f64..0.9, d2 in 0.0f64..0.9) {
        let (lo, hi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
        let a = amplitude_range(&DriveCoil::new(1.0, lo, 1.0, 1.0).unwrap());
        let b = amplitude_range(&DriveCoil::new(1.0, hi, 1.0, 1.0).unwrap());
        prop_assert!(b.b_max() >= a.b_max());
        prop_assert_eq!(a.b_min(), b.b_min());
    }
}

#[test]
fn geometry_is_validated() {
    assert!(DriveCoil::new(1.0, 1.0, 1.0, 1.0).is_err());
    assert!(DriveCoil::new(-1.0, 0.1, 1.0, 1.0).is_err());
    assert!(DriveCoil::new(1.0, 0.1, 0.0, 1.0).is_err());
    assert!(DriveCoil::new(1.0, 0.1, 1.0, f64::NAN).is_err());
    let coil = DriveCoil::new(1.0, 0.1, 1.0, 1.0).unwrap();
    assert!(field_at_radius(&coil, 1.0).is_err());
    assert!(field_series_approx(&coil, -0.1).is_err());
}
