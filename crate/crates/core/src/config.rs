//! Scenario files.
//!
//! A scenario is a small sectioned `key = value` file. Every physical quantity
//! is a string carrying its unit, e.g. `kappa = "0.1 MHz"` or
//! `horizon = "50 us"`. MHz values are angular frequencies (rad/μs), so with a
//! broadening width `Δ` in MHz a frequency `f` becomes `f/Δ` and a time `t`
//! becomes `tΔ`. Quantities may also be given directly in units of the width
//! (`"0.1 Delta"`, `"50 1/Delta"`), in which case `[units]` may be omitted.
//!
//! ```toml
//! [units]
//! width = "1 MHz"
//!
//! [ensemble]
//! coupling = "10 MHz"
//! gamma = "1e-4 MHz"
//!
//! [drive]
//! b_min = "10 MHz"
//! b_max = "10.5 MHz"
//!
//! [cavity]
//! kappa = "0.1 MHz"
//! detuning = "optimize"
//!
//! [run]
//! horizon = "50 us"
//! ```

use std::fmt;
use std::fmt::Write as _;

use serde::Serialize;
use toml_edit::{ImDocument, Item, Table};

use crate::error::{Error, Result};
use crate::field_profile::DriveAmplitudeRange;
use crate::memory::{DetuningChoice, MemoryScenario, Method, SpinLine};
use crate::spectral::{DiscretizationScheme, Window};

/// One problem found while parsing a configuration file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigIssue {
    pub line: usize,
    pub column: usize,
    pub key: Option<String>,
    pub message: String,
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: ", self.line, self.column)?;
        if let Some(k) = &self.key {
            write!(f, "`{k}`: ")?;
        }
        f.write_str(&self.message)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum DetuningSetting {
    Fixed { value: f64 },
    Optimize { min: Option<f64>, max: Option<f64> },
}

/// Frequency grid, as offsets from the spin line centre.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridSetting {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl GridSetting {
    pub fn values(&self) -> Vec<f64> {
        let step = (self.max - self.min) / (self.points - 1) as f64;
        (0..self.points)
            .map(|k| if k + 1 == self.points { self.max } else { self.min + k as f64 * step })
            .collect()
    }
}

/// A validated scenario. Frequencies are in units of the width, times in its inverse.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioConfig {
    /// Width in MHz, when the file fixes a physical scale.
    pub width_mhz: Option<f64>,
    /// Bare collective coupling Ω.
    pub coupling: Option<f64>,
    pub center: f64,
    pub gamma: f64,
    pub n_spins: usize,
    pub scheme: DiscretizationScheme,
    pub window: Option<(f64, f64)>,
    pub drive: Option<(f64, f64)>,
    pub kappa: f64,
    pub detuning: DetuningSetting,
    pub horizon: f64,
    pub dt: f64,
    pub target_time: f64,
    pub method: Method,
    pub seed: u64,
    pub samples: usize,
    pub grid: Option<GridSetting>,
    /// Extra spin linewidth for spectra, in units of the local level spacing.
    pub smoothing: f64,
    pub scan_points: usize,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            width_mhz: None,
            coupling: None,
            center: 0.0,
            gamma: 0.0,
            n_spins: 4000,
            scheme: DiscretizationScheme::Grid,
            window: None,
            drive: None,
            kappa: 0.0,
            detuning: DetuningSetting::Optimize { min: None, max: None },
            horizon: 50.0,
            dt: 0.05,
            target_time: 50.0,
            method: Method::Eigen,
            seed: 0,
            samples: 0,
            grid: None,
            smoothing: 0.0,
            scan_points: 64,
        }
    }
}

const SECTIONS: &[(&str, &[&str])] = &[
    ("units", &["width"]),
    ("ensemble", &["coupling", "center", "gamma", "n_spins", "scheme", "window_min", "window_max"]),
    ("drive", &["b_min", "b_max"]),
    ("cavity", &["kappa", "detuning", "detuning_min", "detuning_max"]),
    (
        "run",
        &[
            "horizon",
            "dt",
            "target_time",
            "method",
            "seed",
            "samples",
            "grid_min",
            "grid_max",
            "grid_points",
            "smoothing",
            "scan_points",
        ],
    ),
];

/// Parses and validates a scenario file, reporting every problem found.
pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    let doc = match ImDocument::parse(text) {
        Ok(d) => d,
        Err(e) => {
            let (line, column) = e.span().map_or((1, 1), |s| line_col(text, s.start));
            return Err(Error::Config(vec![ConfigIssue {
                line,
                column,
                key: None,
                message: e.message().trim().to_string(),
            }]));
        }
    };
    let mut p = Parser {
        text,
        issues: Vec::new(),
        width: None,
    };
    let root = doc.as_table();
    let mut tables: [Option<&Table>; 5] = [None; 5];
    for (name, item) in root.iter() {
        let Some(idx) = SECTIONS.iter().position(|(s, _)| *s == name) else {
            p.issue_key(root, name, None, format!("unknown section `{name}`"));
            continue;
        };
        match item.as_table() {
            Some(t) => tables[idx] = Some(t),
            None => p.issue_key(root, name, None, format!("`{name}` must be a section")),
        }
    }
    for (idx, table) in tables.iter().enumerate() {
        if let Some(t) = table {
            p.check_keys(SECTIONS[idx].0, t, SECTIONS[idx].1);
        }
    }
    let [units, ensemble, drive, cavity, run] = tables;
    let mut cfg = ScenarioConfig::default();

    if let Some(t) = units {
        if let Some((v, span)) = p.quantity(t, "units", "width", Dim::Frequency, true) {
            if v > 0.0 && v.is_finite() {
                p.width = Some(v);
                cfg.width_mhz = Some(v);
            } else {
                p.issue_at(span, "units.width", "must be > 0");
            }
        }
    }

    if let Some(t) = ensemble {
        if let Some(v) = p.frequency(t, "ensemble", "coupling") {
            if v > 0.0 {
                cfg.coupling = Some(v);
            } else {
                p.issue_value(t, "ensemble", "coupling", "must be > 0");
            }
        }
        if let Some(v) = p.frequency(t, "ensemble", "center") {
            cfg.center = v;
        }
        if let Some(v) = p.frequency(t, "ensemble", "gamma") {
            p.non_negative(t, "ensemble", "gamma", v);
            cfg.gamma = v;
        }
        if let Some(v) = p.integer(t, "ensemble", "n_spins", 1) {
            cfg.n_spins = v as usize;
        }
        if let Some(s) = p.string(t, "ensemble", "scheme") {
            match s.parse() {
                Ok(v) => cfg.scheme = v,
                Err(_) => p.issue_value(t, "ensemble", "scheme", "expected \"grid\" or \"quantile\""),
            }
        }
        let lo = p.frequency(t, "ensemble", "window_min");
        let hi = p.frequency(t, "ensemble", "window_max");
        cfg.window = p.pair(t, "ensemble", ("window_min", lo), ("window_max", hi), false);
    }

    if let Some(t) = drive {
        let lo = p.frequency(t, "drive", "b_min");
        let hi = p.frequency(t, "drive", "b_max");
        if lo.is_none() && !t.contains_key("b_min") {
            p.issue_table(t, "drive.b_min", "required when [drive] is present");
        }
        if hi.is_none() && !t.contains_key("b_max") {
            p.issue_table(t, "drive.b_max", "required when [drive] is present");
        }
        if let Some(v) = lo {
            p.non_negative(t, "drive", "b_min", v);
        }
        if lo.is_some() && hi.is_some() {
            cfg.drive = p.pair(t, "drive", ("b_min", lo), ("b_max", hi), true);
        }
    }

    if let Some(t) = cavity {
        if let Some(v) = p.frequency(t, "cavity", "kappa") {
            p.non_negative(t, "cavity", "kappa", v);
            cfg.kappa = v;
        }
        let fixed = match t.get("detuning") {
            Some(item) if item.as_str().map(str::trim) == Some("optimize") => None,
            Some(_) => p.frequency(t, "cavity", "detuning"),
            None => None,
        };
        let lo = p.frequency(t, "cavity", "detuning_min");
        let hi = p.frequency(t, "cavity", "detuning_max");
        if let Some(value) = fixed {
            cfg.detuning = DetuningSetting::Fixed { value };
            for k in ["detuning_min", "detuning_max"] {
                if t.contains_key(k) {
                    p.issue_key(t, k, Some(&format!("cavity.{k}")), "only allowed with detuning = \"optimize\"".into());
                }
            }
        } else {
            let pair = p.pair(t, "cavity", ("detuning_min", lo), ("detuning_max", hi), false);
            cfg.detuning = DetuningSetting::Optimize {
                min: pair.map(|x| x.0).or(lo),
                max: pair.map(|x| x.1).or(hi),
            };
        }
    }

    if let Some(t) = run {
        if let Some(v) = p.time(t, "run", "horizon") {
            if v > 0.0 {
                cfg.horizon = v;
            } else {
                p.issue_value(t, "run", "horizon", "must be > 0");
            }
        }
        if let Some(v) = p.time(t, "run", "dt") {
            if v > 0.0 {
                cfg.dt = v;
            } else {
                p.issue_value(t, "run", "dt", "must be > 0");
            }
        }
        cfg.target_time = cfg.horizon;
        if let Some(v) = p.time(t, "run", "target_time") {
            p.non_negative(t, "run", "target_time", v);
            cfg.target_time = v;
        }
        if cfg.dt > cfg.horizon {
            p.issue_value(t, "run", "dt", "must not exceed the horizon");
        }
        if let Some(s) = p.string(t, "run", "method") {
            match s.parse() {
                Ok(m) => cfg.method = m,
                Err(_) => p.issue_value(t, "run", "method", "expected \"eigen\" or \"bromwich\""),
            }
        }
        if let Some(v) = p.integer(t, "run", "seed", 0) {
            cfg.seed = v as u64;
        }
        if let Some(v) = p.integer(t, "run", "samples", 0) {
            cfg.samples = v as usize;
        }
        if let Some(v) = p.integer(t, "run", "scan_points", 2) {
            cfg.scan_points = v as usize;
        }
        if let Some(v) = p.number(t, "run", "smoothing") {
            p.non_negative(t, "run", "smoothing", v);
            cfg.smoothing = v;
        }
        let lo = p.frequency(t, "run", "grid_min");
        let hi = p.frequency(t, "run", "grid_max");
        let points = p.integer(t, "run", "grid_points", 3);
        let any = t.contains_key("grid_min") || t.contains_key("grid_max") || t.contains_key("grid_points");
        if any {
            if let Some((min, max)) = p.pair(t, "run", ("grid_min", lo), ("grid_max", hi), true) {
                cfg.grid = Some(GridSetting {
                    min,
                    max,
                    points: points.map_or(2001, |n| n as usize),
                });
            }
        }
    }

    if p.issues.is_empty() {
        Ok(cfg)
    } else {
        Err(Error::Config(p.issues))
    }
}

impl ScenarioConfig {
    /// Writes the resolved values back out in units of the width; parsing the
    /// result gives back an identical config.
    pub fn to_toml(&self) -> String {
        let mut o = String::new();
        let f = |v: f64| format!("\"{v:?} Delta\"");
        let t = |v: f64| format!("\"{v:?} 1/Delta\"");
        if let Some(w) = self.width_mhz {
            let _ = writeln!(o, "[units]\nwidth = \"{w:?} MHz\"\n");
        }
        o.push_str("[ensemble]\n");
        if let Some(c) = self.coupling {
            let _ = writeln!(o, "coupling = {}", f(c));
        }
        let _ = writeln!(o, "center = {}", f(self.center));
        let _ = writeln!(o, "gamma = {}", f(self.gamma));
        let _ = writeln!(o, "n_spins = {}", self.n_spins);
        let _ = writeln!(o, "scheme = \"{}\"", self.scheme);
        if let Some((lo, hi)) = self.window {
            let _ = writeln!(o, "window_min = {}\nwindow_max = {}", f(lo), f(hi));
        }
        if let Some((lo, hi)) = self.drive {
            let _ = writeln!(o, "\n[drive]\nb_min = {}\nb_max = {}", f(lo), f(hi));
        }
        o.push_str("\n[cavity]\n");
        let _ = writeln!(o, "kappa = {}", f(self.kappa));
        match self.detuning {
            DetuningSetting::Fixed { value } => {
                let _ = writeln!(o, "detuning = {}", f(value));
            }
            DetuningSetting::Optimize { min, max } => {
                o.push_str("detuning = \"optimize\"\n");
                if let Some(v) = min {
                    let _ = writeln!(o, "detuning_min = {}", f(v));
                }
                if let Some(v) = max {
                    let _ = writeln!(o, "detuning_max = {}", f(v));
                }
            }
        }
        o.push_str("\n[run]\n");
        let _ = writeln!(o, "horizon = {}", t(self.horizon));
        let _ = writeln!(o, "dt = {}", t(self.dt));
        let _ = writeln!(o, "target_time = {}", t(self.target_time));
        let _ = writeln!(o, "method = \"{}\"", self.method);
        let _ = writeln!(o, "seed = {}", self.seed);
        let _ = writeln!(o, "samples = {}", self.samples);
        let _ = writeln!(o, "smoothing = {:?}", self.smoothing);
        let _ = writeln!(o, "scan_points = {}", self.scan_points);
        if let Some(g) = self.grid {
            let _ = writeln!(o, "grid_min = {}\ngrid_max = {}\ngrid_points = {}", f(g.min), f(g.max), g.points);
        }
        o
    }

    pub fn is_driven(&self) -> bool {
        self.drive.is_some()
    }

    pub fn require_coupling(&self) -> Result<f64> {
        self.coupling
            .ok_or_else(|| Error::validation("ensemble.coupling", "this command needs a collective coupling"))
    }

    pub fn line(&self) -> Result<SpinLine> {
        Ok(match self.drive {
            Some((lo, hi)) => SpinLine::Driven(DriveAmplitudeRange::new(lo, hi)?),
            None => SpinLine::Lorentzian,
        })
    }

    /// The configured frequency grid, or one spanning both polariton branches.
    pub fn grid_or_default(&self, coupling: f64) -> GridSetting {
        self.grid.unwrap_or_else(|| {
            let half = 2.0 * coupling + 5.0;
            GridSetting {
                min: -half,
                max: half,
                points: 2001,
            }
        })
    }

    pub fn memory_scenario(&self) -> Result<MemoryScenario> {
        let mut s = MemoryScenario::new(self.line()?, self.require_coupling()?, self.kappa, self.gamma);
        s.spin_center = self.center;
        s.detuning = match self.detuning {
            DetuningSetting::Fixed { value } => DetuningChoice::Fixed(value),
            DetuningSetting::Optimize { min: Some(lo), max: Some(hi) } => DetuningChoice::Optimize(Some((lo, hi))),
            DetuningSetting::Optimize { min, max } => {
                if min.is_some() || max.is_some() {
                    let (lo, hi) = (0.0, 20.0 * s.coupling());
                    DetuningChoice::Optimize(Some((min.unwrap_or(lo), max.unwrap_or(hi))))
                } else {
                    DetuningChoice::Optimize(None)
                }
            }
        };
        s.horizon = self.horizon;
        s.dt = self.dt;
        s.target_time = self.target_time;
        s.n_spins = self.n_spins;
        s.scheme = self.scheme;
        s.window = self.window.map(|(lo, hi)| Window::new(lo, hi)).transpose()?;
        s.method = self.method;
        s.validate()?;
        Ok(s)
    }
}

#[derive(Clone, Copy)]
enum Dim {
    Frequency,
    Time,
}

/// Conversion factor to MHz or μs for a physical unit.
fn physical_scale(dim: Dim, unit: &str) -> Option<f64> {
    match (dim, unit) {
        (Dim::Frequency, "MHz") => Some(1.0),
        (Dim::Frequency, "kHz") => Some(1e-3),
        (Dim::Frequency, "GHz") => Some(1e3),
        (Dim::Time, "us" | "μs" | "µs") => Some(1.0),
        (Dim::Time, "ns") => Some(1e-3),
        (Dim::Time, "ms") => Some(1e3),
        _ => None,
    }
}

struct Parser<'a> {
    text: &'a str,
    issues: Vec<ConfigIssue>,
    width: Option<f64>,
}

impl Parser<'_> {
    fn issue_at(&mut self, span: Option<std::ops::Range<usize>>, key: &str, message: impl Into<String>) {
        let (line, column) = span.map_or((1, 1), |s| line_col(self.text, s.start));
        self.issues.push(ConfigIssue {
            line,
            column,
            key: Some(key.to_string()),
            message: message.into(),
        });
    }

    fn issue_key(&mut self, table: &Table, key: &str, full: Option<&str>, message: String) {
        let span = table.key(key).and_then(|k| k.span());
        let (line, column) = span.map_or((1, 1), |s| line_col(self.text, s.start));
        self.issues.push(ConfigIssue {
            line,
            column,
            key: Some(full.unwrap_or(key).to_string()),
            message,
        });
    }

    fn issue_value(&mut self, table: &Table, section: &str, key: &str, message: &str) {
        let span = table.get(key).and_then(Item::span);
        self.issue_at(span, &format!("{section}.{key}"), message);
    }

    fn issue_table(&mut self, table: &Table, key: &str, message: &str) {
        self.issue_at(table.span(), key, message);
    }

    fn check_keys(&mut self, section: &str, table: &Table, allowed: &[&str]) {
        for (key, _) in table.iter() {
            if !allowed.contains(&key) {
                self.issue_key(table, key, Some(&format!("{section}.{key}")), format!("unknown key `{key}` in [{section}]"));
            }
        }
    }

    fn non_negative(&mut self, table: &Table, section: &str, key: &str, v: f64) {
        if v < 0.0 {
            self.issue_value(table, section, key, "must be >= 0");
        }
    }

    fn quantity(&mut self, table: &Table, section: &str, key: &str, dim: Dim, physical_only: bool) -> Option<(f64, Option<std::ops::Range<usize>>)> {
        let item = table.get(key)?;
        let span = item.span();
        let full = format!("{section}.{key}");
        let Some(raw) = item.as_str() else {
            if item.as_float().is_some() || item.as_integer().is_some() {
                self.issue_at(span, &full, "missing unit: write the value as a string such as \"0.1 MHz\"");
            } else {
                self.issue_at(span, &full, "expected a quantity string such as \"0.1 MHz\"");
            }
            return None;
        };
        let raw = raw.trim();
        let (num, unit) = match raw.split_once(char::is_whitespace) {
            Some((n, u)) => (n, u.trim()),
            None => {
                self.issue_at(span, &full, format!("missing unit in `{raw}`"));
                return None;
            }
        };
        let value: f64 = match num.parse() {
            Ok(v) if f64::is_finite(v) => v,
            _ => {
                self.issue_at(span, &full, format!("`{num}` is not a finite number"));
                return None;
            }
        };
        let native = match dim {
            Dim::Frequency => "Delta",
            Dim::Time => "1/Delta",
        };
        if unit == native && !physical_only {
            return Some((value, span));
        }
        let Some(scale) = physical_scale(dim, unit) else {
            let expected = match dim {
                Dim::Frequency => "MHz, kHz, GHz or Delta",
                Dim::Time => "us, ns, ms or 1/Delta",
            };
            self.issue_at(span, &full, format!("unknown unit `{unit}` (expected {expected})"));
            return None;
        };
        if physical_only {
            return Some((value * scale, span));
        }
        let Some(width) = self.width else {
            self.issue_at(span, &full, format!("unit `{unit}` needs [units] width"));
            return None;
        };
        Some(match dim {
            Dim::Frequency => (value * scale / width, span),
            Dim::Time => (value * scale * width, span),
        })
    }

    fn frequency(&mut self, table: &Table, section: &str, key: &str) -> Option<f64> {
        self.quantity(table, section, key, Dim::Frequency, false).map(|x| x.0)
    }

    fn time(&mut self, table: &Table, section: &str, key: &str) -> Option<f64> {
        self.quantity(table, section, key, Dim::Time, false).map(|x| x.0)
    }

    fn integer(&mut self, table: &Table, section: &str, key: &str, min: i64) -> Option<i64> {
        let item = table.get(key)?;
        match item.as_integer() {
            Some(v) if v >= min => Some(v),
            Some(_) => {
                self.issue_value(table, section, key, &format!("must be >= {min}"));
                None
            }
            None => {
                self.issue_value(table, section, key, "expected an integer");
                None
            }
        }
    }

    fn number(&mut self, table: &Table, section: &str, key: &str) -> Option<f64> {
        let item = table.get(key)?;
        match item.as_float().or_else(|| item.as_integer().map(|i| i as f64)) {
            Some(v) if v.is_finite() => Some(v),
            _ => {
                self.issue_value(table, section, key, "expected a finite number");
                None
            }
        }
    }

    fn string<'t>(&mut self, table: &'t Table, section: &str, key: &str) -> Option<&'t str> {
        let item = table.get(key)?;
        let s = item.as_str();
        if s.is_none() {
            self.issue_value(table, section, key, "expected a string");
        }
        s
    }

    /// Both ends or neither; `min < max`.
    fn pair(
        &mut self,
        table: &Table,
        section: &str,
        lo: (&str, Option<f64>),
        hi: (&str, Option<f64>),
        allow_equal: bool,
    ) -> Option<(f64, f64)> {
        match (lo.1, hi.1) {
            (Some(a), Some(b)) => {
                if a < b || (allow_equal && a == b) {
                    Some((a, b))
                } else {
                    let rel = if allow_equal { "<=" } else { "<" };
                    self.issue_value(table, section, hi.0, &format!("needs {} {rel} {}", lo.0, hi.0));
                    None
                }
            }
            (Some(_), None) if !table.contains_key(hi.0) && section != "cavity" => {
                self.issue_table(table, &format!("{section}.{}", hi.0), &format!("required together with {}", lo.0));
                None
            }
            (None, Some(_)) if !table.contains_key(lo.0) && section != "cavity" => {
                self.issue_table(table, &format!("{section}.{}", lo.0), &format!("required together with {}", hi.0));
                None
            }
            _ => None,
        }
    }
}

/// 1-based line and column (in characters) of a byte offset.
fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let offset = offset.min(text.len());
    let before = &text[..offset];
    let line = before.matches('\n').count() + 1;
    let start = before.rfind('\n').map_or(0, |i| i + 1);
    (line, before[start..].chars().count() + 1)
}
