//! Laplace-domain overlap and its numerical inversion along a Bromwich line.

use num_complex::Complex64;
use rustfft::FftPlanner;

use super::SingleExcitationModel;
use crate::error::{ensure_finite, Error, Result};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Laplace transform `f̄(s)` of the overlap with a polariton initial state
/// `cos(θ/2)|1,G⟩ - sin(θ/2)|0,S⟩`.
#[derive(Debug, Clone)]
pub struct LaplaceOverlap<'a> {
    model: &'a SingleExcitationModel,
    cos_half: f64,
    /// `sin(θ/2)/Ω`, the weight of each `g_k` in the spin part.
    spin_scale: f64,
}

impl<'a> LaplaceOverlap<'a> {
    /// Checks `cot θ = δ/(2Ω)` against the model's collective coupling.
    pub fn new(model: &'a SingleExcitationModel, delta: f64, theta: f64) -> Result<Self> {
        ensure_finite("delta", delta)?;
        ensure_finite("theta", theta)?;
        if !(theta > 0.0 && theta < std::f64::consts::PI) {
            return Err(Error::validation("theta", "mixing angle must lie in (0, π)"));
        }
        let omega = model.ensemble().collective_coupling();
        if omega == 0.0 {
            return Err(Error::validation("couplings", "polariton needs a coupled ensemble"));
        }
        let want = delta / (2.0 * omega);
        let cot = theta.cos() / theta.sin();
        if (cot - want).abs() > 1e-9 * (1.0 + want.abs()) {
            return Err(Error::validation(
                "theta",
                format!("cot θ = {cot} inconsistent with δ/(2Ω) = {want}"),
            ));
        }
        Ok(Self::from_angle(model, theta))
    }

    /// Skips the δ consistency check; `θ = 0` gives the bare cavity state.
    /// A decoupled ensemble has no bright mode, so only its cavity part is kept.
    pub fn from_angle(model: &'a SingleExcitationModel, theta: f64) -> Self {
        let omega = model.ensemble().collective_coupling();
        let sin_half = (0.5 * theta).sin();
        LaplaceOverlap {
            model,
            cos_half: (0.5 * theta).cos(),
            spin_scale: if omega > 0.0 { sin_half / omega } else { 0.0 },
        }
    }

    /// Cavity amplitude `A₀(s) = [cos(θ/2) + (i/Ω) sin(θ/2) M(s)] T(s)`.
    pub fn cavity_amplitude(&self, s: Complex64) -> Result<Complex64> {
        let m = self.model.memory_kernel(s)?;
        let t = self.model.resolvent(s)?;
        Ok((self.cos_half + I * self.spin_scale * m) * t)
    }

    /// `f̄(s) = A₀(s)[cos(θ/2) + i(sin(θ/2)/Ω) M(s)] + (sin²(θ/2)/Ω²) M(s)`.
    pub fn eval(&self, s: Complex64) -> Result<Complex64> {
        let m = self.model.memory_kernel(s)?;
        let t = self.model.resolvent(s)?;
        let mix = self.cos_half + I * self.spin_scale * m;
        let r = self.spin_scale;
        Ok(mix * mix * t + r * r * m)
    }

    /// The initial state as a full amplitude vector.
    pub fn initial_state(&self) -> Vec<Complex64> {
        std::iter::once(Complex64::new(self.cos_half, 0.0))
            .chain(
                self.model
                    .ensemble()
                    .couplings()
                    .iter()
                    .map(|g| Complex64::new(-self.spin_scale * g, 0.0)),
            )
            .collect()
    }
}

/// Settings for [`invert_laplace`]. Frequencies in units of Δ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BromwichOptions {
    /// Abscissa ε of the contour `s = ε + iω`.
    pub epsilon: f64,
    /// Half-width of the sampled frequency band around the centre.
    pub half_span: f64,
    /// Band centre; `None` uses the mean frequency from the first moment.
    pub center: Option<f64>,
    /// Number of exact moments removed through a closed-form reference.
    pub reference_terms: usize,
    /// Decay rate σ of the reference `Σ a_j/(p + σ)^{j+1}`.
    pub reference_decay: f64,
    /// Wrap-around suppression: the period exceeds `t_max + margin/ε`.
    pub alias_margin: f64,
    /// FFT length; `None` picks the smallest power of two satisfying the margin.
    pub points: Option<usize>,
}

impl Default for BromwichOptions {
    fn default() -> Self {
        BromwichOptions {
            epsilon: 0.05,
            half_span: 800.0,
            center: None,
            reference_terms: 4,
            reference_decay: 1.0,
            alias_margin: 30.0,
            points: None,
        }
    }
}

/// Inverts `f̄` on a uniform time grid `t_j = j·dt` by sampling the Bromwich
/// line and one inverse FFT.
///
/// `moments[n] = f⁽ⁿ⁾(0)` feeds a closed-form reference transform whose
/// subtraction makes the truncated frequency integral converge quickly.
pub fn invert_laplace<F>(fbar: F, moments: &[Complex64], times: &[f64], opts: &BromwichOptions) -> Result<Vec<Complex64>>
where
    F: Fn(Complex64) -> Result<Complex64> + Sync + Send,
{
    let eps = opts.epsilon;
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::validation("epsilon", "Bromwich abscissa must be > 0"));
    }
    if !(opts.half_span > 0.0 && opts.half_span.is_finite()) {
        return Err(Error::validation("half_span", "must be > 0"));
    }
    if !(opts.reference_decay > 0.0) {
        return Err(Error::validation("reference_decay", "must be > 0"));
    }
    if times.is_empty() {
        return Ok(Vec::new());
    }
    if times.len() == 1 && times[0] > 0.0 {
        let both = invert_laplace(fbar, moments, &[0.0, times[0]], opts)?;
        return Ok(vec![both[1]]);
    }
    let (dt, count) = uniform_grid(times)?;
    let t_max = dt * (count - 1) as f64;
    let k = opts.reference_terms.min(moments.len());
    let center = match opts.center {
        Some(c) => c,
        None if moments.len() >= 2 => (I * moments[1]).re,
        None => 0.0,
    };
    ensure_finite("center", center)?;

    // Node spacing τ = dt/q resolves the band; the period M τ covers the horizon.
    let tau_max = std::f64::consts::PI / opts.half_span;
    let q = if dt > 0.0 { (dt / tau_max).ceil().max(1.0) as usize } else { 1 };
    let tau = if dt > 0.0 { dt / q as f64 } else { tau_max };
    let period_min = t_max + opts.alias_margin / eps;
    let m = match opts.points {
        Some(m) => {
            if (m as f64) * tau < period_min {
                return Err(Error::validation(
                    "points",
                    format!(
                        "{m} FFT points give period {:.3} < required {:.3}; frequency grid too coarse for t_max = {t_max}",
                        m as f64 * tau,
                        period_min
                    ),
                ));
            }
            m
        }
        None => ((period_min / tau).ceil() as usize).next_power_of_two(),
    };
    let h = 2.0 * std::f64::consts::PI / (m as f64 * tau);
    let w0 = -0.5 * m as f64 * h;

    // Reference r(t) = e^{-σt} Σ a_j t^j/j! with r⁽ⁿ⁾(0) = g⁽ⁿ⁾(0), where
    // g(t) = f(t) e^{iω_c t} is the overlap in the frame rotating at the centre.
    let shifted = shift_moments(&moments[..k], center);
    let sigma = opts.reference_decay;
    let coeffs = reference_coefficients(&shifted, sigma);
    let reference = |p: Complex64| -> Complex64 {
        let inv = (p + sigma).inv();
        let mut pow = inv;
        let mut acc = Complex64::new(0.0, 0.0);
        for a in &coeffs {
            acc += a * pow;
            pow *= inv;
        }
        acc
    };

    let nodes: Vec<usize> = (0..m).collect();
    let samples = crate::parallel::map(&nodes, |&i| {
        let w = w0 + i as f64 * h;
        let p = Complex64::new(eps, w);
        let s = p - I * center;
        Ok(fbar(s)? - reference(p))
    })?;
    let mut buf = samples;
    FftPlanner::<f64>::new().plan_fft_inverse(m).process(&mut buf);

    let mut out = Vec::with_capacity(count);
    for j in 0..count {
        let n = j * q;
        let t = n as f64 * tau;
        // Σ_i F_i e^{iω_i t} = e^{iω_0 t} Σ_i F_i e^{2πi i n/M}.
        let residual = buf[n] * (I * w0 * t).exp() * (eps * t).exp() * (h / (2.0 * std::f64::consts::PI));
        let mut r = Complex64::new(0.0, 0.0);
        let mut fact = 1.0;
        for (jj, a) in coeffs.iter().enumerate() {
            if jj > 0 {
                fact *= jj as f64;
            }
            r += a * t.powi(jj as i32) / fact;
        }
        r *= (-sigma * t).exp();
        out.push((r + residual) * (-I * center * t).exp());
    }
    Ok(out)
}

/// `(dt, count)` for `t_j = j·dt`, or a validation error.
fn uniform_grid(times: &[f64]) -> Result<(f64, usize)> {
    for &t in times {
        ensure_finite("time", t)?;
    }
    let count = times.len();
    if times[0] != 0.0 && count > 1 {
        return Err(Error::validation("times", "Bromwich inversion needs a uniform grid starting at 0"));
    }
    if count == 1 {
        if times[0] != 0.0 {
            return Err(Error::validation("times", "a single time must be 0; pass [0, t] instead"));
        }
        return Ok((0.0, 1));
    }
    let dt = times[count - 1] / (count - 1) as f64;
    if !(dt > 0.0) {
        return Err(Error::validation("times", "grid must be increasing"));
    }
    for (j, &t) in times.iter().enumerate() {
        if (t - j as f64 * dt).abs() > 1e-9 * dt.max(1.0) {
            return Err(Error::validation("times", "Bromwich inversion needs a uniform grid starting at 0"));
        }
    }
    Ok((dt, count))
}

/// Moments of `g(t) = f(t) e^{iω_c t}` from those of `f`.
fn shift_moments(moments: &[Complex64], center: f64) -> Vec<Complex64> {
    let shift = I * center;
    (0..moments.len())
        .map(|n| {
            let mut acc = Complex64::new(0.0, 0.0);
            let mut binom = 1.0;
            for k in 0..=n {
                acc += moments[k] * shift.powi((n - k) as i32) * binom;
                binom = binom * (n - k) as f64 / (k + 1) as f64;
            }
            acc
        })
        .collect()
}

/// `a_m` such that `e^{-σt} Σ a_j t^j/j!` has derivatives `moments` at 0.
fn reference_coefficients(moments: &[Complex64], sigma: f64) -> Vec<Complex64> {
    let mut a: Vec<Complex64> = Vec::with_capacity(moments.len());
    for (m, &target) in moments.iter().enumerate() {
        let mut acc = target;
        let mut binom = 1.0;
        for (j, aj) in a.iter().enumerate() {
            acc -= aj * binom * (-sigma).powi((m - j) as i32);
            binom = binom * (m - j) as f64 / (j + 1) as f64;
        }
        a.push(acc);
    }
    a
}
