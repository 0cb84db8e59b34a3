use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::SpectralDensity;
use crate::error::{ensure_finite, Error, Result};

/// Closed frequency interval used to truncate a density before discretising.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    lo: f64,
    hi: f64,
}

impl Window {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        ensure_finite("window.lo", lo)?;
        ensure_finite("window.hi", hi)?;
        if hi <= lo {
            return Err(Error::validation("window", format!("empty window [{lo}, {hi}]")));
        }
        Ok(Window { lo, hi })
    }
    pub fn lo(&self) -> f64 {
        self.lo
    }
    pub fn hi(&self) -> f64 {
        self.hi
    }
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DiscretizationScheme {
    /// Equal couplings at the `(k - ½)/N` quantiles of the windowed density.
    Quantile,
    /// Uniform frequency grid, couplings weighted by the mass of each bin.
    Grid,
}

impl FromStr for DiscretizationScheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quantile" => Ok(DiscretizationScheme::Quantile),
            "grid" => Ok(DiscretizationScheme::Grid),
            other => Err(Error::validation("scheme", format!("unknown scheme `{other}` (quantile | grid)"))),
        }
    }
}

impl std::fmt::Display for DiscretizationScheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DiscretizationScheme::Quantile => "quantile",
            DiscretizationScheme::Grid => "grid",
        })
    }
}

/// Provenance of a discretised ensemble.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EnsembleMeta {
    pub scheme: Option<DiscretizationScheme>,
    pub window: Option<Window>,
    /// Probability mass of the density lying outside the window.
    pub truncated_mass: f64,
    pub warning: Option<String>,
}

/// Finite spin ensemble: frequencies (ascending), couplings, common damping γ.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    frequencies: Vec<f64>,
    couplings: Vec<f64>,
    gamma: f64,
    collective: f64,
    meta: EnsembleMeta,
}

impl Ensemble {
    /// Builds an ensemble, sorting spins by frequency. All-zero couplings give
    /// a decoupled (empty) ensemble.
    pub fn new(frequencies: Vec<f64>, couplings: Vec<f64>, gamma: f64) -> Result<Self> {
        if frequencies.is_empty() {
            return Err(Error::validation("frequencies", "ensemble needs at least one spin"));
        }
        if frequencies.len() != couplings.len() {
            return Err(Error::validation(
                "couplings",
                format!("{} couplings for {} frequencies", couplings.len(), frequencies.len()),
            ));
        }
        ensure_finite("gamma", gamma)?;
        if gamma < 0.0 {
            return Err(Error::validation("gamma", "damping must be >= 0"));
        }
        for (&w, &g) in frequencies.iter().zip(&couplings) {
            ensure_finite("frequency", w)?;
            ensure_finite("coupling", g)?;
            if g < 0.0 {
                return Err(Error::validation("coupling", format!("couplings must be >= 0, got {g}")));
            }
        }
        let mut order: Vec<usize> = (0..frequencies.len()).collect();
        order.sort_by(|&a, &b| frequencies[a].total_cmp(&frequencies[b]));
        let frequencies: Vec<f64> = order.iter().map(|&i| frequencies[i]).collect();
        let couplings: Vec<f64> = order.iter().map(|&i| couplings[i]).collect();
        let collective = couplings.iter().map(|g| g * g).sum::<f64>().sqrt();
        Ok(Ensemble {
            frequencies,
            couplings,
            gamma,
            collective,
            meta: EnsembleMeta::default(),
        })
    }

    /// A single spin; the degenerate `N = 1` case of [`discretize`].
    pub fn single_spin(frequency: f64, coupling: f64, gamma: f64) -> Result<Self> {
        Ensemble::new(vec![frequency], vec![coupling], gamma)
    }

    pub fn with_meta(mut self, meta: EnsembleMeta) -> Self {
        self.meta = meta;
        self
    }

    pub fn len(&self) -> usize {
        self.frequencies.len()
    }
    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }
    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }
    pub fn couplings(&self) -> &[f64] {
        &self.couplings
    }
    pub fn gamma(&self) -> f64 {
        self.gamma
    }
    /// Collective coupling `Ω = (Σ g_k²)^½`.
    pub fn collective_coupling(&self) -> f64 {
        self.collective
    }
    pub fn meta(&self) -> &EnsembleMeta {
        &self.meta
    }

    /// Copy with every frequency shifted by `offset`.
    pub fn shifted(&self, offset: f64) -> Ensemble {
        let mut e = self.clone();
        e.frequencies.iter_mut().for_each(|w| *w += offset);
        e
    }

    /// Copy with every coupling multiplied by `factor` (> 0).
    pub fn scaled_couplings(&self, factor: f64) -> Result<Ensemble> {
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(Error::validation("factor", "coupling scale must be finite and > 0"));
        }
        let mut e = self.clone();
        e.couplings.iter_mut().for_each(|g| *g *= factor);
        e.collective *= factor;
        Ok(e)
    }

    /// Copy with a different spin damping.
    pub fn with_gamma(&self, gamma: f64) -> Result<Ensemble> {
        ensure_finite("gamma", gamma)?;
        if gamma < 0.0 {
            return Err(Error::validation("gamma", "damping must be >= 0"));
        }
        let mut e = self.clone();
        e.gamma = gamma;
        Ok(e)
    }

    /// Half the distance between each spin's neighbours (one-sided at the ends).
    pub fn local_spacing(&self) -> Vec<f64> {
        let w = &self.frequencies;
        let n = w.len();
        if n == 1 {
            return vec![0.0];
        }
        (0..n)
            .map(|k| {
                if k == 0 {
                    w[1] - w[0]
                } else if k == n - 1 {
                    w[n - 1] - w[n - 2]
                } else {
                    0.5 * (w[k + 1] - w[k - 1])
                }
            })
            .collect()
    }

    /// Serialises as a flat table, one `ω g` row per spin, 17 significant digits.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# spinmem ensemble");
        let _ = writeln!(out, "# gamma {:.16e}", self.gamma);
        let _ = writeln!(out, "# truncated_mass {:.16e}", self.meta.truncated_mass);
        let _ = writeln!(out, "# omega g");
        for (w, g) in self.frequencies.iter().zip(&self.couplings) {
            let _ = writeln!(out, "{w:.16e} {g:.16e}");
        }
        out
    }

    /// Parses the output of [`Ensemble::to_table`].
    pub fn from_table(text: &str) -> Result<Self> {
        let mut gamma = None;
        let mut truncated_mass = 0.0;
        let mut freqs = Vec::new();
        let mut couplings = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                let mut it = rest.split_whitespace();
                match (it.next(), it.next()) {
                    (Some("gamma"), Some(v)) => gamma = Some(parse_num(v, lineno)?),
                    (Some("truncated_mass"), Some(v)) => truncated_mass = parse_num(v, lineno)?,
                    _ => {}
                }
                continue;
            }
            let mut it = line.split_whitespace();
            let (w, g) = match (it.next(), it.next(), it.next()) {
                (Some(w), Some(g), None) => (parse_num(w, lineno)?, parse_num(g, lineno)?),
                _ => {
                    return Err(Error::validation(
                        "ensemble table",
                        format!("line {}: expected two columns", lineno + 1),
                    ))
                }
            };
            freqs.push(w);
            couplings.push(g);
        }
        let gamma = gamma.ok_or_else(|| Error::validation("ensemble table", "missing `# gamma` header"))?;
        Ok(Ensemble::new(freqs, couplings, gamma)?.with_meta(EnsembleMeta {
            truncated_mass,
            ..Default::default()
        }))
    }
}

fn parse_num(s: &str, lineno: usize) -> Result<f64> {
    s.parse::<f64>()
        .map_err(|e| Error::validation("ensemble table", format!("line {}: `{s}`: {e}", lineno + 1)))
}

/// Discretises `density` into `n ≥ 2` spins with `Σ g_k² = Ω²`.
pub fn discretize(
    density: &SpectralDensity,
    n: usize,
    collective: f64,
    scheme: DiscretizationScheme,
    window: Option<Window>,
    gamma: f64,
) -> Result<Ensemble> {
    if n < 2 {
        return Err(Error::validation("n", "discretisation needs N >= 2; use discretize_single for one spin"));
    }
    ensure_finite("collective", collective)?;
    if collective <= 0.0 {
        return Err(Error::validation("collective", "collective coupling must be > 0"));
    }
    let window = window.unwrap_or_else(|| density.default_window());
    let f_lo = density.cdf(window.lo());
    let f_hi = density.cdf(window.hi());
    let in_window = f_hi - f_lo;
    if in_window <= 0.0 {
        return Err(Error::validation("window", "window contains no spectral mass"));
    }
    let truncated_mass = (1.0 - in_window).max(0.0);

    let (freqs, couplings) = match scheme {
        DiscretizationScheme::Quantile => {
            let g = collective / (n as f64).sqrt();
            let freqs = (0..n)
                .map(|k| density.quantile(f_lo + in_window * (k as f64 + 0.5) / n as f64))
                .collect::<Result<Vec<_>>>()?;
            (freqs, vec![g; n])
        }
        DiscretizationScheme::Grid => {
            let h = window.width() / n as f64;
            let edges: Vec<f64> = (0..=n).map(|k| window.lo() + h * k as f64).collect();
            let cdf: Vec<f64> = match density {
                SpectralDensity::Dressed(d) => d.cdf_sorted(&edges)?,
                _ => edges.iter().map(|&x| density.cdf(x)).collect(),
            };
            let masses: Vec<f64> = cdf.windows(2).map(|c| (c[1] - c[0]).max(0.0)).collect();
            let total: f64 = masses.iter().sum();
            let freqs = (0..n).map(|k| window.lo() + h * (k as f64 + 0.5)).collect();
            let couplings = masses.iter().map(|m| collective * (m / total).sqrt()).collect();
            (freqs, couplings)
        }
    };
    let mut ensemble = Ensemble::new(freqs, couplings, gamma)?;
    // Pin Σ g² = Ω² against rounding in the per-bin weights.
    let fix = collective / ensemble.collective;
    ensemble.couplings.iter_mut().for_each(|g| *g *= fix);
    ensemble.collective = ensemble.couplings.iter().map(|g| g * g).sum::<f64>().sqrt();
    let warning = (truncated_mass > 1e-3).then(|| {
        format!(
            "window [{}, {}] excludes {:.3e} of the spectral mass",
            window.lo(),
            window.hi(),
            truncated_mass
        )
    });
    Ok(ensemble.with_meta(EnsembleMeta {
        scheme: Some(scheme),
        window: Some(window),
        truncated_mass,
        warning,
    }))
}

/// One spin at the median of `density` carrying the full coupling `Ω`.
pub fn discretize_single(density: &SpectralDensity, collective: f64, gamma: f64) -> Result<Ensemble> {
    Ensemble::single_spin(density.quantile(0.5)?, collective, gamma)
}
