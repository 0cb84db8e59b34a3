//! Spectral densities of the spin ensemble.
//!
//! Bare spins follow a Lorentzian detuning density. Under a continuous drive
//! each spin is dressed to `ω̄ = sqrt(Δ_k² + b²)` with `b` uniform over the
//! drive range, which produces a one-sided density starting at `b_min` whose
//! tail falls off much faster than the Lorentzian. Both densities can be
//! discretised into a finite [`Ensemble`].

mod dressed;
mod ensemble;

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;

use crate::error::{ensure_finite, Error, Result};
use crate::quad::QuadValue;

pub use dressed::{dressed_cdf, dressed_pdf, DressedDensity};
pub use ensemble::{discretize, discretize_single, DiscretizationScheme, Ensemble, EnsembleMeta, Window};

/// Lorentzian density of detunings `x = ω - center` with full width `width`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LorentzianDensity {
    width: f64,
    center: f64,
}

impl LorentzianDensity {
    pub fn new(width: f64, center: f64) -> Result<Self> {
        ensure_finite("width", width)?;
        ensure_finite("center", center)?;
        if width <= 0.0 {
            return Err(Error::validation("width", "must be > 0"));
        }
        Ok(LorentzianDensity { width, center })
    }

    pub fn width(&self) -> f64 {
        self.width
    }
    pub fn center(&self) -> f64 {
        self.center
    }

    /// `2Δ / (π (Δ² + 4x²))` at detuning `x`.
    pub fn pdf_detuning(&self, x: f64) -> f64 {
        let w = self.width;
        2.0 * w / (PI * (w * w + 4.0 * x * x))
    }

    pub fn cdf_detuning(&self, x: f64) -> f64 {
        0.5 + (2.0 * x / self.width).atan() / PI
    }

    pub fn quantile_detuning(&self, u: f64) -> f64 {
        0.5 * self.width * (PI * (u - 0.5)).tan()
    }

    /// Cauchy transform `∫ p(ν)/(ν - z) dν` of the untruncated density, `Im z > 0`.
    pub fn cauchy_transform(&self, z: Complex64) -> Complex64 {
        1.0 / (Complex64::new(self.center, -0.5 * self.width) - z)
    }
}

/// Free-function form of [`LorentzianDensity::pdf_detuning`].
pub fn lorentzian_pdf(den: &LorentzianDensity, x: f64) -> f64 {
    den.pdf_detuning(x)
}

/// A spin transition-frequency density, in absolute frequency.
#[derive(Debug, Clone)]
pub enum SpectralDensity {
    Lorentzian(LorentzianDensity),
    Dressed(DressedDensity),
}

impl SpectralDensity {
    pub fn pdf(&self, omega: f64) -> f64 {
        match self {
            SpectralDensity::Lorentzian(l) => l.pdf_detuning(omega - l.center),
            SpectralDensity::Dressed(d) => d.pdf(omega),
        }
    }

    pub fn cdf(&self, omega: f64) -> f64 {
        match self {
            SpectralDensity::Lorentzian(l) => l.cdf_detuning(omega - l.center),
            SpectralDensity::Dressed(d) => d.cdf(omega),
        }
    }

    pub fn quantile(&self, u: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&u) {
            return Err(Error::validation("u", format!("probability must lie in [0, 1], got {u}")));
        }
        match self {
            SpectralDensity::Lorentzian(l) => Ok(l.center + l.quantile_detuning(u)),
            SpectralDensity::Dressed(d) => d.quantile(u),
        }
    }

    /// Broadening width Δ shared by both densities.
    pub fn width(&self) -> f64 {
        match self {
            SpectralDensity::Lorentzian(l) => l.width,
            SpectralDensity::Dressed(d) => d.width(),
        }
    }

    /// Reference frequency of the spin line: the Lorentzian centre or the
    /// middle of the drive range.
    pub fn line_center(&self) -> f64 {
        match self {
            SpectralDensity::Lorentzian(l) => l.center,
            SpectralDensity::Dressed(d) => d.drive().center(),
        }
    }

    /// Default discretisation window: ±200Δ about the Lorentzian centre, or
    /// `[b_min, b_min + 200Δ]` for dressed spins.
    pub fn default_window(&self) -> Window {
        let w = self.width();
        match self {
            SpectralDensity::Lorentzian(l) => Window::new(l.center - 200.0 * w, l.center + 200.0 * w),
            SpectralDensity::Dressed(d) => Window::new(d.drive().b_min(), d.drive().b_min() + 200.0 * w),
        }
        .expect("default window is ordered")
    }

    /// Integrates `p(ν) f(ν)` over `[lo, hi]`, splitting at the density's
    /// non-smooth points and at `extra` breakpoints.
    pub fn integrate_weighted<T, F>(&self, lo: f64, hi: f64, extra: &[f64], f: F) -> Result<T>
    where
        T: QuadValue,
        F: FnMut(f64) -> T,
    {
        match self {
            SpectralDensity::Lorentzian(l) => {
                let mut f = f;
                let mut breaks = vec![lo, hi, l.center];
                breaks.extend_from_slice(extra);
                let breaks = sorted_breaks(breaks, lo, hi);
                let opts = crate::quad::QuadOptions::with_tol(1e-15, 1e-12);
                Ok(crate::quad::integrate_pieces(|x| f(x) * l.pdf_detuning(x - l.center), &breaks, opts)?.value)
            }
            SpectralDensity::Dressed(d) => d.integrate_weighted(lo, hi, extra, f),
        }
    }

    /// Cauchy transform `∫_window p(ν)/(ν - z) dν`, normalised by the window mass.
    ///
    /// For `z` close to the real axis the pole is handled by subtracting
    /// `p(Re z)` and adding its logarithmic integral analytically.
    pub fn cauchy_transform_window(&self, window: Window, z: Complex64) -> Result<Complex64> {
        if z.im <= 0.0 {
            return Err(Error::Domain(format!("Cauchy transform needs Im z > 0, got {z}")));
        }
        let (lo, hi) = (window.lo(), window.hi());
        let mass = self.cdf(hi) - self.cdf(lo);
        let x0 = z.re;
        let regular_at_x0 = match self {
            SpectralDensity::Lorentzian(_) => true,
            SpectralDensity::Dressed(d) => d.is_smooth_at(x0),
        };
        let value = if x0 > lo && x0 < hi && regular_at_x0 && z.im < 0.5 * (hi - lo) {
            let p0 = self.pdf(x0);
            let smooth: Complex64 = integrate_difference(self, lo, hi, x0, z, p0)?;
            let logs = (Complex64::new(hi, 0.0) - z).ln() - (Complex64::new(lo, 0.0) - z).ln();
            smooth + logs * p0
        } else {
            self.integrate_weighted(lo, hi, &[x0.clamp(lo, hi)], |nu| {
                Complex64::new(1.0, 0.0) / (Complex64::new(nu, 0.0) - z)
            })?
        };
        Ok(value / mass)
    }
}

fn integrate_difference(
    den: &SpectralDensity,
    lo: f64,
    hi: f64,
    x0: f64,
    z: Complex64,
    p0: f64,
) -> Result<Complex64> {
    // ∫ (p(ν) - p0)/(ν - z) dν over the window.
    let mut breaks = vec![lo, hi, x0];
    if let SpectralDensity::Dressed(d) = den {
        breaks.push(d.drive().b_min());
        breaks.push(d.drive().b_max());
    }
    let breaks = sorted_breaks(breaks, lo, hi);
    let opts = crate::quad::QuadOptions::with_tol(1e-15, 1e-11);
    let mut total = Complex64::new(0.0, 0.0);
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        let g = |nu: f64| (den.pdf(nu) - p0) / (Complex64::new(nu, 0.0) - z);
        let singular_left = matches!(den, SpectralDensity::Dressed(d) if d.is_edge(a));
        let singular_right = matches!(den, SpectralDensity::Dressed(d) if d.is_edge(b));
        let piece = match (singular_left, singular_right) {
            (true, true) => crate::quad::integrate_sqrt_both(g, a, b, opts)?,
            (true, false) => crate::quad::integrate_sqrt_left(g, a, b, opts)?,
            (false, true) => crate::quad::integrate_sqrt_right(g, a, b, opts)?,
            (false, false) => crate::quad::integrate(g, a, b, opts)?,
        };
        total += piece.value;
    }
    Ok(total)
}

pub(crate) fn sorted_breaks(mut breaks: Vec<f64>, lo: f64, hi: f64) -> Vec<f64> {
    breaks.retain(|x| x.is_finite() && *x >= lo && *x <= hi);
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    breaks
}

/// Dresses a spin of detuning `detuning` with a drive of amplitude `drive`.
///
/// Returns `(ω̄, ḡ)` with `ω̄ = sqrt(Δ_k² + b²)` and the exact dressed
/// coupling `ḡ = (g/2)(1 + Δ_k/ω̄)`. Ensembles built by this crate use the
/// approximation `ḡ ≈ g/2`.
pub fn dress_spin(detuning: f64, drive: f64, coupling: f64) -> Result<(f64, f64)> {
    ensure_finite("detuning", detuning)?;
    ensure_finite("drive", drive)?;
    ensure_finite("coupling", coupling)?;
    if drive <= 0.0 {
        return Err(Error::validation("drive", "dressing requires a drive amplitude > 0"));
    }
    let omega_bar = detuning.hypot(drive);
    Ok((omega_bar, 0.5 * coupling * (1.0 + detuning / omega_bar)))
}

/// `μ(b, ω̄) = arctan(bΔ / sqrt((4ω̄² + Δ²)(ω̄² − b²)))`, with the limit π/2 at `ω̄ = b`.
pub fn mu_kernel(b: f64, omega_bar: f64, width: f64) -> Result<f64> {
    ensure_finite("b", b)?;
    ensure_finite("omega_bar", omega_bar)?;
    ensure_finite("width", width)?;
    if b <= 0.0 {
        return Err(Error::validation("b", "must be > 0"));
    }
    if b > omega_bar {
        return Err(Error::Domain(format!("μ kernel needs b <= ω̄, got b = {b}, ω̄ = {omega_bar}")));
    }
    Ok(FRAC_PI_2 - mu_complement(b, omega_bar, width))
}

/// `π/2 - μ(b, ω̄)`, evaluated without cancellation. Requires `b <= ω̄`.
pub(crate) fn mu_complement(b: f64, omega_bar: f64, width: f64) -> f64 {
    mu_complement_gap(b, omega_bar, (omega_bar - b) * (omega_bar + b), width)
}

/// [`mu_complement`] with `gap = ω̄² - b²` supplied by the caller.
pub(crate) fn mu_complement_gap(b: f64, omega_bar: f64, gap: f64, width: f64) -> f64 {
    if gap <= 0.0 {
        return 0.0;
    }
    let radial = ((4.0 * omega_bar * omega_bar + width * width) * gap).sqrt();
    radial.atan2(b * width)
}

/// `μ(b_hi, ω̄) - μ(b_lo, ω̄)` for `b_lo <= b_hi <= ω̄`, as a single arctangent
/// so the far tail keeps full relative precision.
#[cfg(test)]
pub(crate) fn mu_difference(b_lo: f64, b_hi: f64, omega_bar: f64, width: f64) -> f64 {
    let gap = |b: f64| (omega_bar - b) * (omega_bar + b);
    mu_difference_gap(b_lo, b_hi, omega_bar, gap(b_lo), gap(b_hi), width)
}

/// [`mu_difference`] with both gaps `ω̄² - b²` supplied by the caller.
pub(crate) fn mu_difference_gap(b_lo: f64, b_hi: f64, omega_bar: f64, gap_lo: f64, gap_hi: f64, width: f64) -> f64 {
    let scale = 4.0 * omega_bar * omega_bar + width * width;
    let s_lo = (scale * gap_lo.max(0.0)).sqrt();
    let s_hi = (scale * gap_hi.max(0.0)).sqrt();
    // b_hi s_lo - b_lo s_hi, rewritten so a narrow band does not cancel.
    let cross = scale * omega_bar * omega_bar * (b_hi - b_lo) * (b_hi + b_lo) / (b_hi * s_lo + b_lo * s_hi);
    (width * cross).atan2(s_lo * s_hi + width * width * b_lo * b_hi)
}
