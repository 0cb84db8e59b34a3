//! Single-excitation cavity–ensemble model: transmission, time evolution and
//! the Laplace-domain overlap.

mod eigen;
mod laplace;

use std::fmt::Write as _;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::spectral::Ensemble;

pub use eigen::{EigenDecomposition, EigenSolver};
pub use laplace::{invert_laplace, BromwichOptions, LaplaceOverlap};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Cavity frequency and energy damping rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CavitySpec {
    frequency: f64,
    kappa: f64,
}

impl CavitySpec {
    pub fn new(frequency: f64, kappa: f64) -> Result<Self> {
        ensure_finite("cavity frequency", frequency)?;
        ensure_finite("kappa", kappa)?;
        if kappa < 0.0 {
            return Err(Error::validation("kappa", "damping must be >= 0"));
        }
        Ok(CavitySpec { frequency, kappa })
    }
    pub fn frequency(&self) -> f64 {
        self.frequency
    }
    pub fn kappa(&self) -> f64 {
        self.kappa
    }
    /// `ω̃_c = ω_c - iκ/2`.
    pub fn complex_frequency(&self) -> Complex64 {
        Complex64::new(self.frequency, -0.5 * self.kappa)
    }
}

/// Cavity coupled to every spin of an ensemble, spins uncoupled among themselves.
#[derive(Debug, Clone)]
pub struct SingleExcitationModel {
    cavity: CavitySpec,
    ensemble: Ensemble,
}

/// Builds the `(N + 1)`-dimensional arrowhead model.
pub fn build_model(cavity: CavitySpec, ensemble: Ensemble) -> SingleExcitationModel {
    SingleExcitationModel { cavity, ensemble }
}

impl SingleExcitationModel {
    pub fn cavity(&self) -> &CavitySpec {
        &self.cavity
    }
    pub fn ensemble(&self) -> &Ensemble {
        &self.ensemble
    }
    pub fn dim(&self) -> usize {
        self.ensemble.len() + 1
    }

    /// Diagonal `(ω̃_c, ω̃_1, …, ω̃_N)`.
    pub fn diagonal(&self) -> Vec<Complex64> {
        let half_gamma = 0.5 * self.ensemble.gamma();
        std::iter::once(self.cavity.complex_frequency())
            .chain(self.ensemble.frequencies().iter().map(|&w| Complex64::new(w, -half_gamma)))
            .collect()
    }

    /// Dense matrix, row-major; only sensible at small N.
    pub fn dense_matrix(&self) -> Vec<Vec<Complex64>> {
        let n = self.dim();
        let diag = self.diagonal();
        let mut m = vec![vec![Complex64::new(0.0, 0.0); n]; n];
        for i in 0..n {
            m[i][i] = diag[i];
        }
        for (k, &g) in self.ensemble.couplings().iter().enumerate() {
            m[0][k + 1] = Complex64::new(g, 0.0);
            m[k + 1][0] = Complex64::new(g, 0.0);
        }
        m
    }

    /// `H x` in O(N).
    pub fn apply(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        if x.len() != self.dim() {
            return Err(Error::validation("amplitudes", format!("expected {} entries, got {}", self.dim(), x.len())));
        }
        let diag = self.diagonal();
        let g = self.ensemble.couplings();
        let mut out: Vec<Complex64> = x.iter().zip(&diag).map(|(a, d)| a * d).collect();
        for k in 0..g.len() {
            out[0] += x[k + 1] * g[k];
            out[k + 1] += x[0] * g[k];
        }
        Ok(out)
    }

    pub fn eigen(&self, solver: EigenSolver) -> Result<EigenDecomposition> {
        EigenDecomposition::new(
            self.cavity.frequency,
            self.cavity.kappa,
            self.ensemble.frequencies(),
            self.ensemble.couplings(),
            self.ensemble.gamma(),
            solver,
        )
    }

    /// Copy with the cavity moved to `frequency`.
    pub fn with_cavity_frequency(&self, frequency: f64) -> Result<SingleExcitationModel> {
        Ok(SingleExcitationModel {
            cavity: CavitySpec::new(frequency, self.cavity.kappa)?,
            ensemble: self.ensemble.clone(),
        })
    }

    /// `M(s) = Σ g_k² / (s + iω̃_k)`.
    pub fn memory_kernel(&self, s: Complex64) -> Result<Complex64> {
        let half_gamma = 0.5 * self.ensemble.gamma();
        let mut sum = Complex64::new(0.0, 0.0);
        for (&w, &g) in self.ensemble.frequencies().iter().zip(self.ensemble.couplings()) {
            let den = s + I * Complex64::new(w, -half_gamma);
            if den == Complex64::new(0.0, 0.0) {
                return Err(Error::Pole { frequency: w });
            }
            sum += g * g / den;
        }
        Ok(sum)
    }

    /// Cavity resolvent `T(s) = 1 / (s + iω̃_c + M(s))`.
    pub fn resolvent(&self, s: Complex64) -> Result<Complex64> {
        let den = s + I * self.cavity.complex_frequency() + self.memory_kernel(s)?;
        if den == Complex64::new(0.0, 0.0) {
            return Err(Error::Pole {
                frequency: -s.im,
            });
        }
        Ok(den.inv())
    }

    /// Exact moments `ψ^†(-iH)^n ψ` for `n = 0..count`.
    pub fn moments(&self, psi: &[Complex64], count: usize) -> Result<Vec<Complex64>> {
        let mut v = psi.to_vec();
        let mut out = Vec::with_capacity(count);
        for n in 0..count {
            if n > 0 {
                v = self.apply(&v)?.into_iter().map(|z| -I * z).collect();
            }
            out.push(psi.iter().zip(&v).map(|(a, b)| a.conj() * b).sum());
        }
        Ok(out)
    }
}

/// Input–output transmission amplitude at probe frequency `omega`.
pub fn transmission(model: &SingleExcitationModel, omega: f64) -> Result<Complex64> {
    transmission_broadened(model, omega, None)
}

fn transmission_broadened(model: &SingleExcitationModel, omega: f64, extra: Option<&[f64]>) -> Result<Complex64> {
    ensure_finite("omega", omega)?;
    let kappa = model.cavity.kappa;
    let half_gamma = 0.5 * model.ensemble.gamma();
    let mut self_energy = Complex64::new(0.0, 0.0);
    for (k, (&w, &g)) in model.ensemble.frequencies().iter().zip(model.ensemble.couplings()).enumerate() {
        let width = half_gamma + extra.map_or(0.0, |e| 0.5 * e[k]);
        let den = Complex64::new(w - omega, -width);
        if den == Complex64::new(0.0, 0.0) {
            if g == 0.0 {
                continue;
            }
            return Err(Error::Pole { frequency: w });
        }
        self_energy += g * g / den;
    }
    let den = Complex64::new(model.cavity.frequency - omega, -0.5 * kappa) - self_energy;
    if kappa == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    Ok(I * (0.5 * kappa) / den)
}

/// How spins are broadened when sampling a spectrum of a finite ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Broadening {
    /// Exact model: each spin keeps its own linewidth γ.
    #[default]
    None,
    /// Adds `factor × local spacing` to each spin's linewidth, so the comb of
    /// single-spin resonances merges into the continuum line shape.
    LocalSpacing(f64),
}

/// One transmission maximum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub position: f64,
    pub height: f64,
    /// Full width at half maximum of `|t|²`; `None` if a crossing is off-grid.
    pub fwhm: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TransmissionSpectrum {
    pub omega: Vec<f64>,
    pub amplitude: Vec<Complex64>,
    /// Up to two highest maxima, sorted by position.
    pub peaks: Vec<Peak>,
}

impl TransmissionSpectrum {
    pub fn power(&self) -> Vec<f64> {
        self.amplitude.iter().map(|t| t.norm_sqr()).collect()
    }

    /// CSV with columns `omega, re_t, im_t, abs_t2`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("omega,re_t,im_t,abs_t2\n");
        for (w, t) in self.omega.iter().zip(&self.amplitude) {
            let _ = writeln!(out, "{},{},{},{}", fmt12(*w), fmt12(t.re), fmt12(t.im), fmt12(t.norm_sqr()));
        }
        out
    }
}

/// 12 significant digits.
pub(crate) fn fmt12(x: f64) -> String {
    format!("{x:.11e}")
}

/// Transmission on a sorted grid with peak analysis.
pub fn transmission_spectrum(model: &SingleExcitationModel, grid: &[f64]) -> Result<TransmissionSpectrum> {
    transmission_spectrum_with(model, grid, Broadening::None)
}

pub fn transmission_spectrum_with(
    model: &SingleExcitationModel,
    grid: &[f64],
    broadening: Broadening,
) -> Result<TransmissionSpectrum> {
    if grid.len() < 3 {
        return Err(Error::validation("grid", "need at least 3 probe frequencies"));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::validation("grid", "probe frequencies must be strictly increasing"));
    }
    let extra = match broadening {
        Broadening::None => None,
        Broadening::LocalSpacing(f) => {
            if !(f >= 0.0 && f.is_finite()) {
                return Err(Error::validation("broadening", "factor must be finite and >= 0"));
            }
            Some(model.ensemble.local_spacing().into_iter().map(|s| f * s).collect::<Vec<_>>())
        }
    };
    let amplitude = crate::parallel::map(grid, |&w| transmission_broadened(model, w, extra.as_deref()))?;
    let power: Vec<f64> = amplitude.iter().map(|t| t.norm_sqr()).collect();
    let peaks = find_peaks(grid, &power, 2);
    Ok(TransmissionSpectrum {
        omega: grid.to_vec(),
        amplitude,
        peaks,
    })
}

/// Highest `max_peaks` strict local maxima, refined by a parabola through
/// three samples; widths from linear interpolation of the half-height crossings.
pub fn find_peaks(x: &[f64], y: &[f64], max_peaks: usize) -> Vec<Peak> {
    let mut candidates: Vec<usize> = (1..y.len() - 1)
        .filter(|&i| y[i] > y[i - 1] && y[i] >= y[i + 1])
        .collect();
    candidates.sort_by(|&a, &b| y[b].total_cmp(&y[a]).then(a.cmp(&b)));
    candidates.truncate(max_peaks);
    let mut peaks: Vec<Peak> = candidates
        .into_iter()
        .map(|i| {
            let (x0, x1, x2) = (x[i - 1], x[i], x[i + 1]);
            let (y0, y1, y2) = (y[i - 1], y[i], y[i + 1]);
            // Vertex of the interpolating parabola (non-uniform spacing allowed).
            let d0 = (y1 - y0) / (x1 - x0);
            let d1 = (y2 - y1) / (x2 - x1);
            let curv = (d1 - d0) / (x2 - x0);
            let (position, height) = if curv < 0.0 {
                let xv = 0.5 * (x0 + x1) - d0 / (2.0 * curv);
                let xv = xv.clamp(x0, x2);
                let yv = y1 + d0 * (xv - x1) + curv * (xv - x0) * (xv - x1);
                (xv, yv.max(y1))
            } else {
                (x1, y1)
            };
            let half = 0.5 * height;
            let left = (0..i).rev().find(|&k| y[k] < half).map(|k| {
                x[k] + (half - y[k]) * (x[k + 1] - x[k]) / (y[k + 1] - y[k])
            });
            let right = (i + 1..y.len()).find(|&k| y[k] < half).map(|k| {
                x[k - 1] + (y[k - 1] - half) * (x[k] - x[k - 1]) / (y[k - 1] - y[k])
            });
            let fwhm = match (left, right) {
                (Some(l), Some(r)) => Some(r - l),
                _ => None,
            };
            Peak { position, height, fwhm }
        })
        .collect();
    peaks.sort_by(|a, b| a.position.total_cmp(&b.position));
    peaks
}

/// Time series of the cavity amplitude and the overlap with the initial state.
#[derive(Debug, Clone)]
pub struct AmplitudeTrajectory {
    pub times: Vec<f64>,
    pub cavity: Vec<Complex64>,
    pub overlap: Vec<Complex64>,
}

impl AmplitudeTrajectory {
    /// `F(t) = |f(t)|²`.
    pub fn fidelity(&self) -> Vec<f64> {
        self.overlap.iter().map(|f| f.norm_sqr()).collect()
    }

    /// CSV with columns `t, re_f, im_f, fidelity`.
    pub fn to_csv(&self) -> String {
        overlap_csv(&self.times, &self.overlap)
    }
}

pub(crate) fn overlap_csv(times: &[f64], overlap: &[Complex64]) -> String {
    let mut out = String::from("t,re_f,im_f,fidelity\n");
    for (t, f) in times.iter().zip(overlap) {
        let _ = writeln!(out, "{},{},{},{}", fmt12(*t), fmt12(f.re), fmt12(f.im), fmt12(f.norm_sqr()));
    }
    out
}

/// Evaluates `Σ c_j e^{-iλ_j t}` at every time.
pub fn sum_exponentials(terms: &[(Complex64, Complex64)], times: &[f64]) -> Vec<Complex64> {
    crate::parallel::map_infallible(times, |&t| terms.iter().map(|(lambda, c)| c * (-I * lambda * t).exp()).sum())
}

fn check_times(times: &[f64]) -> Result<()> {
    for &t in times {
        ensure_finite("time", t)?;
        if t < 0.0 {
            return Err(Error::validation("time", "times must be >= 0"));
        }
    }
    Ok(())
}

/// Solves the single-excitation Schrödinger equation exactly from `initial`.
///
/// The overlap `f(t) = ⟨ψ(0)|ψ(t)⟩` is taken against the undecayed initial vector.
pub fn evolve(model: &SingleExcitationModel, initial: &[Complex64], times: &[f64]) -> Result<AmplitudeTrajectory> {
    evolve_with(model, initial, times, EigenSolver::Secular)
}

pub fn evolve_with(
    model: &SingleExcitationModel,
    initial: &[Complex64],
    times: &[f64],
    solver: EigenSolver,
) -> Result<AmplitudeTrajectory> {
    check_times(times)?;
    if initial.len() != model.dim() {
        return Err(Error::validation("initial", format!("expected {} amplitudes, got {}", model.dim(), initial.len())));
    }
    let norm: f64 = initial.iter().map(|z| z.norm_sqr()).sum();
    if !(norm <= 1.0 + 1e-12) {
        return Err(Error::validation("initial", format!("norm {norm} exceeds 1")));
    }
    let eig = model.eigen(solver)?;
    let overlap_terms = eig.overlap_expansion(initial, initial)?;
    let mut cavity_bra = vec![Complex64::new(0.0, 0.0); model.dim()];
    cavity_bra[0] = Complex64::new(1.0, 0.0);
    let cavity_terms = eig.overlap_expansion(&cavity_bra, initial)?;
    Ok(AmplitudeTrajectory {
        times: times.to_vec(),
        cavity: sum_exponentials(&cavity_terms, times),
        overlap: sum_exponentials(&overlap_terms, times),
    })
}
