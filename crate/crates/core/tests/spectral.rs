use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use spinmem::dynamics::{build_model, transmission_spectrum, CavitySpec};
use spinmem::field_profile::DriveAmplitudeRange;
use spinmem::quad::{self, QuadOptions};
use spinmem::spectral::*;

fn dressed(b_min: f64, b_max: f64) -> DressedDensity {
    DressedDensity::new(1.0, DriveAmplitudeRange::new(b_min, b_max).unwrap()).unwrap()
}

/// KS distance between physically sampled dressed frequencies and the closed-form CDF.
fn ks_distance(d: &DressedDensity, seed: u64, n: usize) -> f64 {
    let (b_min, b_max) = (d.drive().b_min(), d.drive().b_max());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x: Vec<f64> = (0..n)
        .map(|_| {
            let detuning = 0.5 * (PI * (rng.gen::<f64>() - 0.5)).tan();
            let b = if b_max > b_min { rng.gen_range(b_min..=b_max) } else { b_min };
            detuning.hypot(b)
        })
        .collect();
    x.sort_by(f64::total_cmp);
    let cdf = d.cdf_sorted(&x).unwrap();
    let nf = n as f64;
    cdf.iter()
        .enumerate()
        .map(|(i, &c)| (c - i as f64 / nf).abs().max((c - (i + 1) as f64 / nf).abs()))
        .fold(0.0, f64::max)
}

#[test]
fn monte_carlo_matches_closed_form_for_all_parameter_sets() {
    for (k, (b_min, b_max)) in [(10.0, 10.5), (20.0, 20.5), (10.0, 10.0)].into_iter().enumerate() {
        let ks = ks_distance(&dressed(b_min, b_max), 100 + k as u64, 1_000_000);
        assert!(ks < 0.005, "({b_min}, {b_max}): KS {ks}");
    }
}

#[test]
fn wrong_width_is_detected_by_the_oracle() {
    // A density built with twice the width must be rejected by the same test.
    let wide = DressedDensity::new(2.0, DriveAmplitudeRange::new(10.0, 10.5).unwrap()).unwrap();
    assert!(ks_distance(&wide, 5, 200_000) > 0.02);
}

#[test]
fn lorentzian_examples() {
    let l = LorentzianDensity::new(1.0, 0.0).unwrap();
    assert!((lorentzian_pdf(&l, 0.0) - 2.0 / PI).abs() < 1e-15);
    assert!((lorentzian_pdf(&l, 0.5) - 1.0 / PI).abs() < 1e-15);
    let o = QuadOptions::with_tol(1e-12, 1e-12);
    let mass = quad::integrate_pieces(|x| lorentzian_pdf(&l, x), &[-1e4, -10.0, 0.0, 10.0, 1e4], o)
        .unwrap()
        .value;
    let exact = 2.0 * (2.0e4f64).atan() / PI;
    assert!((mass - exact).abs() < 1e-10);
    assert!((1.0 - mass - 1.0 / (PI * 1e4)).abs() < 1e-8);
}

#[test]
fn mu_kernel_regression_pin() {
    // Closed form evaluated independently with compensated arithmetic:
    // arctan(10 / sqrt((4·10.2² + 1)(10.2² − 100))).
    let a = 4.0 * 10.2f64 * 10.2 + 1.0;
    let b = (10.2f64 - 10.0) * (10.2 + 10.0);
    let want = (10.0 / (a * b).sqrt()).atan();
    let got = mu_kernel(10.0, 10.2, 1.0).unwrap();
    assert!((got - want).abs() < 1e-14, "{got} vs {want}");
    assert!((mu_kernel(10.0, 10.0, 1.0).unwrap() - PI / 2.0).abs() < 1e-15);
    assert!(mu_kernel(10.0, 1e9, 1.0).unwrap() < 1e-8);
    assert!(mu_kernel(10.0, 9.0, 1.0).is_err());
}

#[test]
fn tails_are_reshaped_by_the_drive() {
    let d = dressed(10.0, 10.5);
    let c = 10.25;
    let outside = 1.0 - (d.cdf(c + 5.0) - d.cdf(c - 5.0));
    let lorentz = 2.0 * (0.1f64).atan() / PI;
    assert!((lorentz - 0.0635).abs() < 1e-4);
    assert!(outside < 0.5 * lorentz, "dressed tail {outside} vs Lorentzian {lorentz}");
}

#[test]
fn discretisation_schemes_give_matching_transmission() {
    let den = SpectralDensity::Lorentzian(LorentzianDensity::new(1.0, 0.0).unwrap());
    let window = Window::new(-200.0, 200.0).unwrap();
    let grid: Vec<f64> = (0..=1200).map(|k| -12.0 + k as f64 * 0.02).collect();
    let mut curves = Vec::new();
    for scheme in [DiscretizationScheme::Quantile, DiscretizationScheme::Grid] {
        // Spin linewidth γ = 0.5 exceeds the grid spacing 0.1, so neither comb resolves into spikes.
        let ens = discretize(&den, 4000, 5.0, scheme, Some(window), 0.5).unwrap();
        let cav = CavitySpec::new(0.0, 0.1).unwrap();
        curves.push(transmission_spectrum(&build_model(cav, ens), &grid).unwrap().power());
    }
    let peak = curves[0].iter().cloned().fold(0.0, f64::max);
    let worst = curves[0]
        .iter()
        .zip(&curves[1])
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(worst < 0.01 * peak, "max difference {worst} vs peak {peak}");
}

#[test]
fn ensemble_table_is_exact() {
    let den = SpectralDensity::Dressed(dressed(10.0, 10.5));
    let e = discretize(&den, 257, 3.0, DiscretizationScheme::Grid, None, 1e-3).unwrap();
    let back = Ensemble::from_table(&e.to_table()).unwrap();
    assert_eq!(back.frequencies(), e.frequencies());
    assert_eq!(back.couplings(), e.couplings());
    assert!(Ensemble::from_table("1.0 2.0\nnot numbers\n").is_err());
}

#[test]
fn cauchy_transform_of_lorentzian_has_closed_form() {
    let l = LorentzianDensity::new(1.0, 0.0).unwrap();
    let den = SpectralDensity::Lorentzian(l);
    let wide = Window::new(-1e6, 1e6).unwrap();
    for z in [Complex64::new(0.3, 0.2), Complex64::new(-4.0, 1e-3), Complex64::new(12.0, 0.5)] {
        // ∫ p(ν)/(ν - z) dν for a Lorentzian of FWHM 1 closes on the pole at -i/2.
        let exact = -1.0 / (z + Complex64::new(0.0, 0.5));
        let got = den.cauchy_transform_window(wide, z).unwrap();
        assert!((got - exact).norm() < 1e-5 * exact.norm(), "z = {z}: {got} vs {exact}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn collective_coupling_is_exact(
        n in 2usize..600,
        omega in 0.1f64..50.0,
        grid_scheme in any::<bool>(),
        driven in any::<bool>(),
    ) {
        let den = if driven {
            SpectralDensity::Dressed(dressed(10.0, 10.5))
        } else {
            SpectralDensity::Lorentzian(LorentzianDensity::new(1.0, 0.0).unwrap())
        };
        let scheme = if grid_scheme { DiscretizationScheme::Grid } else { DiscretizationScheme::Quantile };
        let e = discretize(&den, n, omega, scheme, None, 0.0).unwrap();
        let sum: f64 = e.couplings().iter().map(|g| g * g).sum();
        prop_assert!((sum.sqrt() / omega - 1.0).abs() < 1e-12);
        prop_assert!(e.frequencies().windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(e.couplings().iter().all(|&g| g >= 0.0));
        prop_assert_eq!(e.len(), n);
    }

    #[test]
    fn dressed_coupling_bound(detuning in -1.0f64..1.0, b in 10.0f64..100.0, g in 0.01f64..10.0) {
        let (w, gbar) = dress_spin(detuning, b, g).unwrap();
        prop_assert!((w - detuning.hypot(b)).abs() <= 1e-12 * w);
        prop_assert!((gbar - 0.5 * g).abs() <= 0.5 * g / b + 1e-15);
    }

    #[test]
    fn quantile_inverts_cdf(u in 0.001f64..0.999, b_min in 5.0f64..30.0, spread in 0.0f64..2.0) {
        let d = dressed(b_min, b_min + spread);
        let x = d.quantile(u).unwrap();
        prop_assert!(x >= b_min);
        let tol = 1e-9f64.max(4.0 * d.pdf(x) * x * f64::EPSILON);
        prop_assert!((d.cdf(x) - u).abs() < tol);
    }

    #[test]
    fn density_vanishes_below_band(b_min in 1.0f64..30.0, spread in 0.0f64..2.0, frac in 0.0f64..0.999) {
        let d = dressed(b_min, b_min + spread);
        prop_assert_eq!(d.pdf(frac * b_min), 0.0);
        prop_assert!(d.pdf(b_min + spread + 0.1) > 0.0);
    }
}
