//! Command implementations behind the `spinmem` binary.
//!
//! Every command computes its outputs in memory and writes them at the end,
//! together with `resolved.toml` (the scenario in units of the width) and
//! `manifest.json`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use sha1::{Digest, Sha1};

use crate::config::{parse_config, GridSetting, ScenarioConfig};
use crate::dynamics::{overlap_csv, transmission_spectrum_with, Broadening, Peak};
use crate::error::{Error, Result};
use crate::memory::{
    fidelity_curve_prepared, optimize_detuning, DetuningChoice, MemoryScenario, Method, PreparedScenario, SpinLine,
};
use crate::spectral::{DiscretizationScheme, SpectralDensity};

pub const FIG2_CONFIG: &str = include_str!("../configs/fig2.toml");
pub const FIG3_CONFIG: &str = include_str!("../configs/fig3.toml");
pub const FIG4_CONFIG: &str = include_str!("../configs/fig4.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    Fig2,
    Fig3,
    Fig4,
}

impl Figure {
    pub fn default_config(self) -> &'static str {
        match self {
            Figure::Fig2 => FIG2_CONFIG,
            Figure::Fig3 => FIG3_CONFIG,
            Figure::Fig4 => FIG4_CONFIG,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Figure::Fig2 => "fig2",
            Figure::Fig3 => "fig3",
            Figure::Fig4 => "fig4",
        }
    }
}

impl FromStr for Figure {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fig2" => Ok(Figure::Fig2),
            "fig3" => Ok(Figure::Fig3),
            "fig4" => Ok(Figure::Fig4),
            _ => Err(Error::validation("figure", format!("unknown figure `{s}` (fig2 | fig3 | fig4)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Spectrum,
    Transmission,
    Rabi,
    Memory,
    Optimize,
    Reproduce(Figure),
}

impl Command {
    fn name(self) -> String {
        match self {
            Command::Spectrum => "spectrum".into(),
            Command::Transmission => "transmission".into(),
            Command::Rabi => "rabi".into(),
            Command::Memory => "memory".into(),
            Command::Optimize => "optimize".into(),
            Command::Reproduce(f) => format!("reproduce {}", f.name()),
        }
    }
}

/// Command-line values that take precedence over the scenario file.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Overrides {
    pub n_spins: Option<usize>,
    pub scheme: Option<DiscretizationScheme>,
    pub method: Option<Method>,
    pub seed: Option<u64>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut ScenarioConfig) -> Result<()> {
        if let Some(n) = self.n_spins {
            if n == 0 {
                return Err(Error::validation("n_spins", "must be >= 1"));
            }
            cfg.n_spins = n;
        }
        if let Some(s) = self.scheme {
            cfg.scheme = s;
        }
        if let Some(m) = self.method {
            cfg.method = m;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    /// Git blob hash of the scenario file as given.
    pub config_sha1: String,
    pub config: ScenarioConfig,
    pub seed: u64,
    pub outputs: Vec<String>,
    /// One-line results for the terminal.
    pub summary: Vec<String>,
}

impl RunManifest {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serialises");
        s.push('\n');
        s
    }
}

/// `sha1("blob <len>\0" + bytes)`, as `git hash-object` computes it.
pub fn git_blob_sha1(bytes: &[u8]) -> String {
    let mut h = Sha1::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Files produced by a command, before they are written.
#[derive(Debug, Default)]
struct Outputs {
    files: Vec<(String, String)>,
    summary: Vec<String>,
}

impl Outputs {
    fn add(&mut self, name: &str, content: String) {
        self.files.push((name.to_string(), content));
    }

    fn note(&mut self, line: String) {
        self.summary.push(line);
    }
}

/// Parses `config_text`, runs `command` and writes its files into `out`.
pub fn run(command: Command, config_text: &str, overrides: &Overrides, out: &Path) -> Result<RunManifest> {
    let mut cfg = parse_config(config_text)?;
    overrides.apply(&mut cfg)?;
    let mut o = Outputs::default();
    match command {
        Command::Spectrum => spectrum(&cfg, "spectrum", &mut o)?,
        Command::Transmission => transmission(&cfg, &mut o)?,
        Command::Rabi => rabi(&cfg, &mut o)?,
        Command::Memory => memory(&cfg, &mut o)?,
        Command::Optimize => optimize(&cfg, &mut o)?,
        Command::Reproduce(Figure::Fig2) => fig2(&cfg, &mut o)?,
        Command::Reproduce(Figure::Fig3) => fig3(&cfg, &mut o)?,
        Command::Reproduce(Figure::Fig4) => fig4(&cfg, &mut o)?,
    }
    o.add("resolved.toml", cfg.to_toml());
    let mut manifest = RunManifest {
        command: command.name(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        config_sha1: git_blob_sha1(config_text.as_bytes()),
        seed: cfg.seed,
        config: cfg,
        outputs: o.files.iter().map(|(n, _)| n.clone()).collect(),
        summary: o.summary,
    };
    manifest.outputs.push("manifest.json".into());
    std::fs::create_dir_all(out)?;
    for (name, content) in &o.files {
        std::fs::write(out.join(name), content)?;
    }
    std::fs::write(out.join("manifest.json"), manifest.to_json())?;
    Ok(manifest)
}

/// Reads a scenario file and runs `command` on it.
pub fn run_file(command: Command, config: &Path, overrides: &Overrides, out: &Path) -> Result<RunManifest> {
    let text = std::fs::read_to_string(config)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", config.display()))))?;
    run(command, &text, overrides, out)
}

pub fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

fn lorentzian_of(cfg: &ScenarioConfig) -> Result<SpectralDensity> {
    let mut s = MemoryScenario::new(SpinLine::Lorentzian, 1.0, 0.0, 0.0);
    s.spin_center = cfg.center;
    s.density()
}

fn density_csv(density: &SpectralDensity, grid: &[f64]) -> String {
    let c = density.line_center();
    let mut out = String::from("omega,density\n");
    for &x in grid {
        let _ = writeln!(out, "{:.11e},{:.11e}", x, density.pdf(c + x));
    }
    out
}

fn spectrum(cfg: &ScenarioConfig, prefix: &str, o: &mut Outputs) -> Result<()> {
    let grid = cfg
        .grid
        .unwrap_or(GridSetting {
            min: -10.0,
            max: 10.0,
            points: 2001,
        })
        .values();
    let lorentzian = lorentzian_of(cfg)?;
    o.add(&format!("{prefix}_lorentzian.csv"), density_csv(&lorentzian, &grid));
    let line = match cfg.line()? {
        SpinLine::Driven(range) => {
            let mut s = MemoryScenario::new(SpinLine::Driven(range), 1.0, 0.0, 0.0);
            s.spin_center = cfg.center;
            let dressed = s.density()?;
            o.add(&format!("{prefix}_dressed.csv"), density_csv(&dressed, &grid));
            dressed
        }
        SpinLine::Lorentzian => lorentzian,
    };
    if cfg.samples > 0 {
        o.add(&format!("{prefix}_samples.csv"), histogram(&line, &grid, cfg.samples, cfg.seed)?);
    }
    Ok(())
}

/// Monte-Carlo density estimate on the cells between grid points.
fn histogram(density: &SpectralDensity, grid: &[f64], samples: usize, seed: u64) -> Result<String> {
    let c = density.line_center();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = vec![0usize; grid.len() - 1];
    for _ in 0..samples {
        let x = density.quantile(rng.gen::<f64>())? - c;
        let k = grid.partition_point(|&g| g <= x);
        if k >= 1 && k < grid.len() {
            counts[k - 1] += 1;
        }
    }
    let mut out = String::from("omega,density\n");
    for (k, n) in counts.iter().enumerate() {
        let w = grid[k + 1] - grid[k];
        let _ = writeln!(out, "{:.11e},{:.11e}", 0.5 * (grid[k] + grid[k + 1]), *n as f64 / (samples as f64 * w));
    }
    Ok(out)
}

fn fixed_detuning(cfg: &ScenarioConfig) -> f64 {
    match cfg.detuning {
        crate::config::DetuningSetting::Fixed { value } => value,
        _ => 0.0,
    }
}

fn prepared_for(cfg: &ScenarioConfig, line: SpinLine) -> Result<PreparedScenario> {
    let mut s = cfg.memory_scenario()?;
    s.line = line;
    s.prepare()
}

fn peaks_text(label: &str, peaks: &[Peak]) -> String {
    let mut out = String::new();
    for (i, p) in peaks.iter().enumerate() {
        let w = p.fwhm.map_or("nan".to_string(), |w| format!("{w:.11e}"));
        let _ = writeln!(out, "{label}.peak{i}.position = {:.11e}", p.position);
        let _ = writeln!(out, "{label}.peak{i}.height = {:.11e}", p.height);
        let _ = writeln!(out, "{label}.peak{i}.fwhm = {w}");
    }
    out
}

/// Transmission with the probe grid and peaks expressed as offsets from the line centre.
fn transmission_of(cfg: &ScenarioConfig, prepared: &PreparedScenario) -> Result<(String, Vec<Peak>)> {
    let c = prepared.line_center();
    let grid = cfg.grid_or_default(prepared.ensemble().collective_coupling());
    let absolute: Vec<f64> = grid.values().iter().map(|x| c + x).collect();
    let model = prepared.model(fixed_detuning(cfg))?;
    let broadening = if cfg.smoothing > 0.0 {
        Broadening::LocalSpacing(cfg.smoothing)
    } else {
        Broadening::None
    };
    let mut spec = transmission_spectrum_with(&model, &absolute, broadening)?;
    spec.omega = grid.values();
    for p in &mut spec.peaks {
        p.position -= c;
    }
    Ok((spec.to_csv(), spec.peaks))
}

fn transmission(cfg: &ScenarioConfig, o: &mut Outputs) -> Result<()> {
    let prepared = prepared_for(cfg, cfg.line()?)?;
    let (csv, peaks) = transmission_of(cfg, &prepared)?;
    o.add("transmission.csv", csv);
    o.add("transmission_peaks.txt", peaks_text("transmission", &peaks));
    for p in &peaks {
        o.note(format!("peak at {:+.6} width {:?}", p.position, p.fwhm));
    }
    Ok(())
}

fn rabi_of(cfg: &ScenarioConfig, prepared: &PreparedScenario) -> Result<String> {
    let times = prepared.scenario().times();
    let f: Vec<Complex64> = prepared.overlap_with_angle(fixed_detuning(cfg), 0.0, &times, cfg.method)?;
    Ok(overlap_csv(&times, &f))
}

fn rabi(cfg: &ScenarioConfig, o: &mut Outputs) -> Result<()> {
    let prepared = prepared_for(cfg, cfg.line()?)?;
    o.add("rabi.csv", rabi_of(cfg, &prepared)?);
    Ok(())
}

fn memory(cfg: &ScenarioConfig, o: &mut Outputs) -> Result<()> {
    let prepared = prepared_for(cfg, cfg.line()?)?;
    let report = fidelity_curve_prepared(&prepared)?;
    o.add("memory.csv", report.to_csv());
    o.add("memory_meta.txt", report.metadata());
    if let Some(scan) = report.scan_csv() {
        o.add("memory_scan.csv", scan);
    }
    o.note(format!(
        "delta = {:.6}, F({}) = {:.6e}",
        report.delta, report.target_time, report.target_fidelity
    ));
    Ok(())
}

fn bracket(prepared: &PreparedScenario) -> Option<(f64, f64)> {
    match prepared.scenario().detuning {
        DetuningChoice::Optimize(b) => b,
        DetuningChoice::Fixed(_) => None,
    }
}

fn optimize(cfg: &ScenarioConfig, o: &mut Outputs) -> Result<()> {
    let prepared = prepared_for(cfg, cfg.line()?)?;
    let opt = optimize_detuning(&prepared, cfg.target_time, bracket(&prepared))?;
    let mut scan = String::from("delta,fidelity\n");
    for (d, f) in &opt.scan {
        let _ = writeln!(scan, "{d:.11e},{f:.11e}");
    }
    o.add("optimize_scan.csv", scan);
    o.add(
        "optimize.txt",
        format!(
            "delta = {:.11e}\nfidelity = {:.11e}\ntarget_time = {:.11e}\nevaluations = {}\n",
            opt.delta, opt.fidelity, cfg.target_time, opt.evaluations
        ),
    );
    o.note(format!("delta* = {:.6}, F({}) = {:.6e}", opt.delta, cfg.target_time, opt.fidelity));
    Ok(())
}

fn require_drive(cfg: &ScenarioConfig) -> Result<()> {
    if cfg.drive.is_none() {
        return Err(Error::validation("drive", "this figure needs a [drive] section"));
    }
    Ok(())
}

fn fig2(cfg: &ScenarioConfig, o: &mut Outputs) -> Result<()> {
    require_drive(cfg)?;
    spectrum(cfg, "fig2", o)
}

fn fig3(cfg: &ScenarioConfig, o: &mut Outputs) -> Result<()> {
    require_drive(cfg)?;
    let mut peaks = String::new();
    for (label, line) in [("undriven", SpinLine::Lorentzian), ("driven", cfg.line()?)] {
        let prepared = prepared_for(cfg, line)?;
        let (csv, p) = transmission_of(cfg, &prepared)?;
        o.add(&format!("fig3_transmission_{label}.csv"), csv);
        peaks.push_str(&peaks_text(label, &p));
        if let Some(w) = p.iter().filter_map(|p| p.fwhm).reduce(f64::max) {
            o.note(format!("{label}: widest peak FWHM {w:.6}"));
        }
        o.add(&format!("fig3_rabi_{label}.csv"), rabi_of(cfg, &prepared)?);
    }
    o.add("fig3_peaks.txt", peaks);
    Ok(())
}

fn fig4(cfg: &ScenarioConfig, o: &mut Outputs) -> Result<()> {
    require_drive(cfg)?;
    let mut summary = String::new();
    for (label, line) in [("undriven", SpinLine::Lorentzian), ("driven", cfg.line()?)] {
        let prepared = prepared_for(cfg, line)?;
        let (lo, hi) = bracket(&prepared).unwrap_or_else(|| prepared.default_bracket());
        let grid = GridSetting {
            min: lo,
            max: hi,
            points: cfg.scan_points,
        }
        .values();
        let values = crate::parallel::map(&grid, |&d| prepared.fidelity_at(d, cfg.target_time))?;
        let mut scan = String::from("delta,fidelity\n");
        for (d, f) in grid.iter().zip(&values) {
            let _ = writeln!(scan, "{d:.11e},{f:.11e}");
        }
        o.add(&format!("fig4_scan_{label}.csv"), scan);
        let mut s = prepared.scenario().clone();
        s.detuning = DetuningChoice::Optimize(Some((lo, hi)));
        let prepared = PreparedScenario::from_ensemble(s, prepared.ensemble().clone(), prepared.line_center())?;
        let report = fidelity_curve_prepared(&prepared)?;
        o.add(&format!("fig4_curve_{label}.csv"), report.to_csv());
        let _ = writeln!(summary, "{label}.delta = {:.11e}", report.delta);
        let _ = writeln!(summary, "{label}.fidelity = {:.11e}", report.target_fidelity);
        o.note(format!(
            "{label}: delta* = {:.6}, F({}) = {:.6e}",
            report.delta, cfg.target_time, report.target_fidelity
        ));
    }
    o.add("fig4_summary.txt", summary);
    Ok(())
}
