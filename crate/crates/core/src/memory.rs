//! Polariton storage experiments: initial states, fidelity curves, detuning
//! optimisation and the driven versus undriven comparison.

use std::fmt::Write as _;
use std::str::FromStr;

use num_complex::Complex64;

use crate::dynamics::{
    build_model, invert_laplace, overlap_csv, sum_exponentials, BromwichOptions, CavitySpec, EigenSolver,
    LaplaceOverlap, SingleExcitationModel,
};
use crate::error::{ensure_finite, Error, Result};
use crate::field_profile::DriveAmplitudeRange;
use crate::spectral::{discretize, DiscretizationScheme, DressedDensity, Ensemble, LorentzianDensity, SpectralDensity, Window};

/// `cos(θ/2)|1,G⟩ - sin(θ/2)|0,S⟩` with `cot θ = δ/(2Ω)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolaritonState {
    pub detuning: f64,
    pub theta: f64,
    pub cavity: f64,
    pub spin: f64,
}

pub fn polariton_state(detuning: f64, omega: f64) -> Result<PolaritonState> {
    ensure_finite("detuning", detuning)?;
    if !(omega > 0.0 && omega.is_finite()) {
        return Err(Error::validation("omega", "collective coupling must be > 0"));
    }
    // arccot on (0, π): π/2 - atan(x) is continuous and decreasing.
    let theta = std::f64::consts::FRAC_PI_2 - (detuning / (2.0 * omega)).atan();
    let (s, c) = (0.5 * theta).sin_cos();
    Ok(PolaritonState {
        detuning,
        theta,
        cavity: c,
        spin: -s,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    #[default]
    Eigen,
    Bromwich,
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "eigen" => Ok(Method::Eigen),
            "bromwich" => Ok(Method::Bromwich),
            _ => Err(Error::validation("method", format!("unknown method `{s}` (expected eigen or bromwich)"))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Eigen => "eigen",
            Method::Bromwich => "bromwich",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpinLine {
    Lorentzian,
    Driven(DriveAmplitudeRange),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DetuningChoice {
    Fixed(f64),
    /// Search bracket; `None` means `[0, 20Ω]`.
    Optimize(Option<(f64, f64)>),
}

/// A storage experiment. Frequencies in units of the broadening width, times in its inverse.
///
/// The detuning is `δ = ω_c - ω_line` where `ω_line` is the Lorentzian centre,
/// or the middle of the drive range for dressed spins.
#[derive(Debug, Clone, PartialEq)]
pub struct MemoryScenario {
    pub line: SpinLine,
    pub width: f64,
    pub spin_center: f64,
    /// Bare collective coupling; dressed ensembles couple with `Ω/2`.
    pub omega: f64,
    pub kappa: f64,
    pub gamma: f64,
    pub detuning: DetuningChoice,
    pub horizon: f64,
    pub dt: f64,
    pub target_time: f64,
    pub n_spins: usize,
    pub scheme: DiscretizationScheme,
    pub window: Option<Window>,
    pub method: Method,
    pub solver: EigenSolver,
    /// Also run the other method and record the largest fidelity difference.
    pub cross_check: bool,
}

impl MemoryScenario {
    pub fn new(line: SpinLine, omega: f64, kappa: f64, gamma: f64) -> Self {
        MemoryScenario {
            line,
            width: 1.0,
            spin_center: 0.0,
            omega,
            kappa,
            gamma,
            detuning: DetuningChoice::Optimize(None),
            horizon: 50.0,
            dt: 0.05,
            target_time: 50.0,
            n_spins: 4000,
            scheme: DiscretizationScheme::Grid,
            window: None,
            method: Method::Eigen,
            solver: EigenSolver::Secular,
            cross_check: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("width", self.width),
            ("spin_center", self.spin_center),
            ("omega", self.omega),
            ("kappa", self.kappa),
            ("gamma", self.gamma),
            ("horizon", self.horizon),
            ("dt", self.dt),
            ("target_time", self.target_time),
        ] {
            ensure_finite(name, v)?;
        }
        if !(self.width > 0.0) {
            return Err(Error::validation("width", "must be > 0"));
        }
        if !(self.omega > 0.0) {
            return Err(Error::validation("omega", "must be > 0"));
        }
        if self.kappa < 0.0 {
            return Err(Error::validation("kappa", "must be >= 0"));
        }
        if self.gamma < 0.0 {
            return Err(Error::validation("gamma", "must be >= 0"));
        }
        if !(self.horizon > 0.0) {
            return Err(Error::validation("horizon", "must be > 0"));
        }
        if !(self.dt > 0.0 && self.dt <= self.horizon) {
            return Err(Error::validation("dt", "must lie in (0, horizon]"));
        }
        if self.target_time < 0.0 {
            return Err(Error::validation("target_time", "must be >= 0"));
        }
        if self.n_spins == 0 {
            return Err(Error::validation("n_spins", "must be >= 1"));
        }
        match self.detuning {
            DetuningChoice::Fixed(d) => ensure_finite("detuning", d)?,
            DetuningChoice::Optimize(Some((lo, hi))) => {
                ensure_finite("detuning_min", lo)?;
                ensure_finite("detuning_max", hi)?;
                if !(lo < hi) {
                    return Err(Error::validation("detuning", "search bracket must satisfy min < max"));
                }
            }
            DetuningChoice::Optimize(None) => {}
        }
        Ok(())
    }

    /// Collective coupling of the ensemble actually simulated.
    pub fn coupling(&self) -> f64 {
        match self.line {
            SpinLine::Lorentzian => self.omega,
            SpinLine::Driven(_) => 0.5 * self.omega,
        }
    }

    pub fn density(&self) -> Result<SpectralDensity> {
        Ok(match self.line {
            SpinLine::Lorentzian => SpectralDensity::Lorentzian(LorentzianDensity::new(self.width, self.spin_center)?),
            SpinLine::Driven(range) => SpectralDensity::Dressed(DressedDensity::new(self.width, range)?),
        })
    }

    /// Time grid `0, dt, 2dt, …` up to the horizon.
    pub fn times(&self) -> Vec<f64> {
        let count = (self.horizon / self.dt * (1.0 + 1e-12)).floor() as usize;
        (0..=count).map(|j| j as f64 * self.dt).collect()
    }

    pub fn prepare(&self) -> Result<PreparedScenario> {
        self.validate()?;
        let density = self.density()?;
        let ensemble = if self.n_spins == 1 {
            crate::spectral::discretize_single(&density, self.coupling(), self.gamma)?
        } else {
            discretize(&density, self.n_spins, self.coupling(), self.scheme, self.window, self.gamma)?
        };
        Ok(PreparedScenario {
            scenario: self.clone(),
            line_center: density.line_center(),
            ensemble,
        })
    }
}

/// A scenario with its ensemble discretised once, ready for repeated evaluation at different δ.
#[derive(Debug, Clone)]
pub struct PreparedScenario {
    scenario: MemoryScenario,
    ensemble: Ensemble,
    line_center: f64,
}

impl PreparedScenario {
    /// Wraps an explicit ensemble; `line_center` anchors δ.
    pub fn from_ensemble(scenario: MemoryScenario, ensemble: Ensemble, line_center: f64) -> Result<Self> {
        scenario.validate()?;
        ensure_finite("line_center", line_center)?;
        Ok(PreparedScenario {
            scenario,
            ensemble,
            line_center,
        })
    }

    pub fn scenario(&self) -> &MemoryScenario {
        &self.scenario
    }

    pub fn ensemble(&self) -> &Ensemble {
        &self.ensemble
    }

    pub fn line_center(&self) -> f64 {
        self.line_center
    }

    pub fn model(&self, delta: f64) -> Result<SingleExcitationModel> {
        ensure_finite("detuning", delta)?;
        let cavity = CavitySpec::new(self.line_center + delta, self.scenario.kappa)?;
        Ok(build_model(cavity, self.ensemble.clone()))
    }

    /// Initial polariton for cavity detuning `delta`.
    ///
    /// The stored state is the spin-like eigenvector of the cavity plus
    /// superradiant-mode block, whose mixing obeys `cot θ = (ω_line - ω_c)/(2Ω)`.
    pub fn state(&self, delta: f64) -> Result<PolaritonState> {
        polariton_state(-delta, self.ensemble.collective_coupling())
    }

    /// `f(t)` at each time with the chosen method.
    pub fn overlap(&self, delta: f64, times: &[f64], method: Method) -> Result<Vec<Complex64>> {
        self.overlap_with_angle(delta, self.state(delta)?.theta, times, method)
    }

    /// `f(t)` for the state `cos(θ/2)|1,G⟩ - sin(θ/2)|0,S⟩`; `θ = 0` gives the vacuum Rabi signal.
    pub fn overlap_with_angle(&self, delta: f64, theta: f64, times: &[f64], method: Method) -> Result<Vec<Complex64>> {
        ensure_finite("theta", theta)?;
        let model = self.model(delta)?;
        let lap = LaplaceOverlap::from_angle(&model, theta);
        let psi = lap.initial_state();
        match method {
            Method::Eigen => {
                let eig = model.eigen(self.scenario.solver)?;
                let terms = eig.overlap_expansion(&psi, &psi)?;
                Ok(sum_exponentials(&terms, times))
            }
            Method::Bromwich => {
                let opts = self.bromwich_options(&model);
                let moments = model.moments(&psi, opts.reference_terms)?;
                invert_laplace(|s| lap.eval(s), &moments, times, &opts)
            }
        }
    }

    fn bromwich_options(&self, model: &SingleExcitationModel) -> BromwichOptions {
        let mut opts = BromwichOptions::default();
        let f = self.ensemble.frequencies();
        let wc = model.cavity().frequency();
        let lo = f.first().copied().unwrap_or(wc).min(wc);
        let hi = f.last().copied().unwrap_or(wc).max(wc);
        let center = 0.5 * (lo + hi);
        let extent = 0.5 * (hi - lo) + 4.0 * self.ensemble.collective_coupling() + 10.0 * self.scenario.kappa;
        opts.center = Some(center);
        opts.half_span = opts.half_span.max(4.0 * extent);
        opts
    }

    pub fn fidelity_at(&self, delta: f64, t: f64) -> Result<f64> {
        ensure_finite("time", t)?;
        if t < 0.0 {
            return Err(Error::validation("time", "must be >= 0"));
        }
        let f = self.overlap(delta, &[t], self.scenario.method)?;
        let v = f[0].norm_sqr();
        if !v.is_finite() {
            return Err(Error::Numerical(format!("non-finite fidelity at δ = {delta}")));
        }
        Ok(v)
    }

    /// Default search bracket `[0, 20Ω]` with the simulated ensemble's coupling.
    pub fn default_bracket(&self) -> (f64, f64) {
        (0.0, 20.0 * self.ensemble.collective_coupling())
    }
}

/// Result of a detuning search.
#[derive(Debug, Clone, PartialEq)]
pub struct DetuningOptimum {
    pub delta: f64,
    pub fidelity: f64,
    /// Coarse scan `(δ, F)` in ascending δ.
    pub scan: Vec<(f64, f64)>,
    pub evaluations: usize,
}

const SCAN_POINTS: usize = 64;
const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Coarse scan points on `[lo, hi]`: uniform in `asinh(δ/a)` with `a = Ω/10`,
/// so linear near zero and logarithmic beyond `Ω/10`.
pub fn scan_grid(lo: f64, hi: f64, omega: f64, points: usize) -> Vec<f64> {
    let a = 0.1 * omega;
    let (ulo, uhi) = ((lo / a).asinh(), (hi / a).asinh());
    let last = points.max(2) - 1;
    (0..=last)
        .map(|i| match i {
            0 => lo,
            i if i == last => hi,
            i => a * (ulo + (uhi - ulo) * i as f64 / last as f64).sinh(),
        })
        .collect()
}

/// Maximises `F(t*)` over δ: coarse scan, then golden-section refinement to
/// a bracket of `resolution`. Ties go to the smaller δ.
pub fn optimize_detuning(
    prepared: &PreparedScenario,
    target_time: f64,
    bracket: Option<(f64, f64)>,
) -> Result<DetuningOptimum> {
    let (lo, hi) = bracket.unwrap_or_else(|| prepared.default_bracket());
    ensure_finite("detuning_min", lo)?;
    ensure_finite("detuning_max", hi)?;
    if !(lo < hi) {
        return Err(Error::validation("detuning", "search bracket must satisfy min < max"));
    }
    let resolution = 1e-3 * prepared.scenario.width;
    let eval = |d: f64| -> Result<f64> {
        let f = prepared.fidelity_at(d, target_time)?;
        if !f.is_finite() {
            return Err(Error::Numerical(format!("non-finite fidelity at δ = {d}")));
        }
        Ok(f)
    };
    let grid = scan_grid(lo, hi, prepared.ensemble.collective_coupling(), SCAN_POINTS);
    let values = crate::parallel::map(&grid, |&d| eval(d))?;
    let mut evaluations = grid.len();
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    let (mut a, mut b) = (grid[best.saturating_sub(1)], grid[(best + 1).min(grid.len() - 1)]);
    let mut best_d = grid[best];
    let mut best_f = values[best];
    let mut consider = |d: f64, f: f64| {
        if f > best_f || (f == best_f && d < best_d) {
            best_d = d;
            best_f = f;
        }
    };
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = eval(x1)?;
    let mut f2 = eval(x2)?;
    evaluations += 2;
    consider(x1, f1);
    consider(x2, f2);
    while b - a > resolution {
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = eval(x1)?;
            consider(x1, f1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = eval(x2)?;
            consider(x2, f2);
        }
        evaluations += 1;
    }
    Ok(DetuningOptimum {
        delta: best_d,
        fidelity: best_f,
        scan: grid.into_iter().zip(values).collect(),
        evaluations,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportMeta {
    pub ensemble_size: usize,
    pub coupling: f64,
    pub truncated_mass: f64,
    pub warning: Option<String>,
    pub method: Method,
    /// Largest `|F_eigen - F_bromwich|` on the curve, when cross-checked.
    pub method_residual: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FidelityReport {
    pub times: Vec<f64>,
    pub overlap: Vec<Complex64>,
    pub fidelity: Vec<f64>,
    pub target_time: f64,
    pub target_fidelity: f64,
    pub delta: f64,
    pub theta: f64,
    pub optimum: Option<DetuningOptimum>,
    pub meta: ReportMeta,
}

impl FidelityReport {
    /// Columns `t, re_f, im_f, fidelity`.
    pub fn to_csv(&self) -> String {
        overlap_csv(&self.times, &self.overlap)
    }

    /// `key = value` block describing the run.
    pub fn metadata(&self) -> String {
        let mut out = String::new();
        let m = &self.meta;
        let _ = writeln!(out, "ensemble_size = {}", m.ensemble_size);
        let _ = writeln!(out, "coupling = {:e}", m.coupling);
        let _ = writeln!(out, "truncated_mass = {:e}", m.truncated_mass);
        let _ = writeln!(out, "method = \"{}\"", m.method);
        if let Some(r) = m.method_residual {
            let _ = writeln!(out, "method_residual = {r:e}");
        }
        let _ = writeln!(out, "delta = {:e}", self.delta);
        let _ = writeln!(out, "optimized = {}", self.optimum.is_some());
        let _ = writeln!(out, "theta = {:e}", self.theta);
        let _ = writeln!(out, "target_time = {:e}", self.target_time);
        let _ = writeln!(out, "target_fidelity = {:e}", self.target_fidelity);
        if let Some(w) = &m.warning {
            let _ = writeln!(out, "warning = {:?}", w);
        }
        out
    }

    /// CSV `delta,fidelity` of the coarse optimiser scan, if any.
    pub fn scan_csv(&self) -> Option<String> {
        let opt = self.optimum.as_ref()?;
        let mut out = String::from("delta,fidelity\n");
        for (d, f) in &opt.scan {
            let _ = writeln!(out, "{:.11e},{:.11e}", d, f);
        }
        Some(out)
    }
}

pub fn fidelity_curve(scenario: &MemoryScenario) -> Result<FidelityReport> {
    fidelity_curve_prepared(&scenario.prepare()?)
}

pub fn fidelity_curve_prepared(prepared: &PreparedScenario) -> Result<FidelityReport> {
    let sc = &prepared.scenario;
    let (delta, optimum) = match sc.detuning {
        DetuningChoice::Fixed(d) => (d, None),
        DetuningChoice::Optimize(bracket) => {
            let opt = optimize_detuning(prepared, sc.target_time, bracket)?;
            (opt.delta, Some(opt))
        }
    };
    let times = sc.times();
    let overlap = prepared.overlap(delta, &times, sc.method)?;
    let fidelity: Vec<f64> = overlap.iter().map(|f| f.norm_sqr()).collect();
    if let Some(bad) = fidelity.iter().find(|f| !f.is_finite()) {
        return Err(Error::Numerical(format!("non-finite fidelity {bad}")));
    }
    let method_residual = if sc.cross_check {
        let other = match sc.method {
            Method::Eigen => Method::Bromwich,
            Method::Bromwich => Method::Eigen,
        };
        let alt = prepared.overlap(delta, &times, other)?;
        Some(
            fidelity
                .iter()
                .zip(&alt)
                .map(|(a, b)| (a - b.norm_sqr()).abs())
                .fold(0.0, f64::max),
        )
    } else {
        None
    };
    let target_fidelity = match &optimum {
        Some(o) => o.fidelity,
        None => prepared.fidelity_at(delta, sc.target_time)?,
    };
    let meta = prepared.ensemble.meta();
    Ok(FidelityReport {
        times,
        overlap,
        fidelity,
        target_time: sc.target_time,
        target_fidelity,
        delta,
        theta: prepared.state(delta)?.theta,
        optimum,
        meta: ReportMeta {
            ensemble_size: prepared.ensemble.len(),
            coupling: prepared.ensemble.collective_coupling(),
            truncated_mass: meta.truncated_mass,
            warning: meta.warning.clone(),
            method: sc.method,
            method_residual,
        },
    })
}

/// Single-time fidelity; optimises δ first when the scenario asks for it.
pub fn fidelity_at(scenario: &MemoryScenario, t: f64) -> Result<f64> {
    let prepared = scenario.prepare()?;
    let delta = match scenario.detuning {
        DetuningChoice::Fixed(d) => d,
        DetuningChoice::Optimize(bracket) => optimize_detuning(&prepared, scenario.target_time, bracket)?.delta,
    };
    prepared.fidelity_at(delta, t)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub omega: f64,
    pub undriven: FidelityReport,
    pub driven: FidelityReport,
}

impl ComparisonRow {
    pub fn ratio(&self) -> f64 {
        self.driven.target_fidelity / self.undriven.target_fidelity
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonTable {
    pub rows: Vec<ComparisonRow>,
}

impl ComparisonTable {
    /// `(max - min)/max` of the undriven optimum over the scan.
    pub fn undriven_spread(&self) -> f64 {
        relative_spread(self.rows.iter().map(|r| r.undriven.target_fidelity))
    }

    pub fn driven_non_decreasing(&self) -> bool {
        self.rows
            .windows(2)
            .all(|w| w[1].driven.target_fidelity >= w[0].driven.target_fidelity)
    }

    pub fn min_ratio(&self) -> f64 {
        self.rows.iter().map(ComparisonRow::ratio).fold(f64::INFINITY, f64::min)
    }

    /// Columns `omega, undriven_delta, undriven_f, driven_delta, driven_f, ratio`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("omega,undriven_delta,undriven_f,driven_delta,driven_f,ratio\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:.11e},{:.11e},{:.11e},{:.11e},{:.11e},{:.11e}",
                r.omega,
                r.undriven.delta,
                r.undriven.target_fidelity,
                r.driven.delta,
                r.driven.target_fidelity,
                r.ratio()
            );
        }
        out
    }
}

pub(crate) fn relative_spread(values: impl Iterator<Item = f64>) -> f64 {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    (hi - lo) / hi
}

/// Optimised undriven and driven memories at equal bare Ω. `base.line` must be driven.
pub fn compare_driven_undriven(base: &MemoryScenario, omegas: &[f64]) -> Result<ComparisonTable> {
    let SpinLine::Driven(_) = base.line else {
        return Err(Error::validation("line", "comparison needs a driven base scenario"));
    };
    if omegas.is_empty() {
        return Err(Error::validation("omegas", "need at least one coupling"));
    }
    let mut rows = Vec::with_capacity(omegas.len());
    for &omega in omegas {
        let mut driven = base.clone();
        driven.omega = omega;
        if let DetuningChoice::Fixed(_) = driven.detuning {
            driven.detuning = DetuningChoice::Optimize(None);
        }
        let mut undriven = driven.clone();
        undriven.line = SpinLine::Lorentzian;
        let pair = crate::parallel::map(&[undriven, driven], fidelity_curve)?;
        let mut it = pair.into_iter();
        let (u, d) = (it.next().unwrap(), it.next().unwrap());
        rows.push(ComparisonRow {
            omega,
            undriven: u,
            driven: d,
        });
    }
    Ok(ComparisonTable { rows })
}
