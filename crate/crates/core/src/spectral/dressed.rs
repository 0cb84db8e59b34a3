use std::f64::consts::PI;
use std::sync::Arc;

use rand::Rng;

use super::{mu_complement_gap, mu_difference_gap, sorted_breaks};
use crate::error::{ensure_finite, Error, Result};
use crate::field_profile::DriveAmplitudeRange;
use crate::quad::{self, QuadOptions, QuadValue};

/// Density of dressed spin frequencies `ω̄ = sqrt(Δ_k² + b²)` for Lorentzian
/// detunings of width Δ and drive amplitudes uniform on `[b_min, b_max]`.
///
/// The density vanishes below `b_min`. With an inhomogeneous drive it has
/// square-root kinks at `b_min` and `b_max`; with a homogeneous drive it
/// diverges like `(ω̄ - b_min)^(-1/2)` at the band edge.
#[derive(Debug, Clone)]
pub struct DressedDensity {
    width: f64,
    drive: DriveAmplitudeRange,
    table: Arc<CdfTable>,
}

/// Cumulative mass at a fixed set of nodes, built once at construction.
#[derive(Debug)]
struct CdfTable {
    nodes: Vec<f64>,
    cumulative: Vec<f64>,
    total: f64,
}

fn opts() -> QuadOptions {
    QuadOptions::with_tol(1e-15, 1e-12)
}

impl DressedDensity {
    pub fn new(width: f64, drive: DriveAmplitudeRange) -> Result<Self> {
        ensure_finite("width", width)?;
        if width <= 0.0 {
            return Err(Error::validation("width", "must be > 0"));
        }
        let mut den = DressedDensity {
            width,
            drive,
            table: Arc::new(CdfTable {
                nodes: Vec::new(),
                cumulative: Vec::new(),
                total: 1.0,
            }),
        };
        den.table = Arc::new(den.build_table()?);
        Ok(den)
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn drive(&self) -> &DriveAmplitudeRange {
        &self.drive
    }

    pub fn is_homogeneous(&self) -> bool {
        self.drive.is_homogeneous()
    }

    /// True at `b_min` and `b_max`, where the density is not smooth.
    pub(crate) fn is_edge(&self, x: f64) -> bool {
        x == self.drive.b_min() || x == self.drive.b_max()
    }

    pub(crate) fn is_smooth_at(&self, x: f64) -> bool {
        x > self.drive.b_min() && x != self.drive.b_max()
    }

    /// Closed-form density at `omega_bar`.
    pub fn pdf(&self, omega_bar: f64) -> f64 {
        if omega_bar.is_nan() {
            return f64::NAN;
        }
        self.pdf_offset(omega_bar, 0.0)
    }

    /// Density at `base + t`, with distances to the band edges formed as
    /// `(base - edge) + t` so the square-root factors stay accurate near them.
    fn pdf_offset(&self, base: f64, t: f64) -> f64 {
        let (b_min, b_max) = (self.drive.b_min(), self.drive.b_max());
        let omega_bar = base + t;
        let dist = |edge: f64| (base - edge) + t;
        let d_min = dist(b_min);
        if d_min < 0.0 {
            return 0.0;
        }
        let gap_min = d_min * (omega_bar + b_min);
        let w = self.width;
        if self.is_homogeneous() {
            if gap_min == 0.0 {
                return f64::INFINITY;
            }
            return 4.0 * omega_bar * w / (PI * gap_min.sqrt() * (w * w + 4.0 * gap_min));
        }
        let d_max = dist(b_max);
        if d_max <= 0.0 {
            self.prefactor(omega_bar) * self.inner_branch(omega_bar, gap_min)
        } else {
            self.prefactor(omega_bar) * self.outer_branch(omega_bar, gap_min, d_max * (omega_bar + b_max))
        }
    }

    fn prefactor(&self, omega_bar: f64) -> f64 {
        let w = self.width;
        4.0 * omega_bar / (PI * self.drive.spread() * (4.0 * omega_bar * omega_bar + w * w).sqrt())
    }

    /// `π/2 - μ(b_min, ω̄)`, the bracket on `[b_min, b_max]`.
    fn inner_branch(&self, omega_bar: f64, gap_min: f64) -> f64 {
        mu_complement_gap(self.drive.b_min(), omega_bar, gap_min, self.width)
    }

    /// `μ(b_max, ω̄) - μ(b_min, ω̄)`, the bracket above `b_max`.
    fn outer_branch(&self, omega_bar: f64, gap_min: f64, gap_max: f64) -> f64 {
        let (b_min, b_max) = (self.drive.b_min(), self.drive.b_max());
        mu_difference_gap(b_min, b_max, omega_bar, gap_min, gap_max, self.width)
    }

    /// `2u · p(edge + u²)`, finite at `u = 0` even for a homogeneous drive.
    fn sqrt_weighted_pdf(&self, edge: f64, u: f64) -> f64 {
        let t = u * u;
        if self.is_homogeneous() {
            let b = self.drive.b_min();
            let omega_bar = edge + t;
            let root = (omega_bar + b).sqrt();
            let gap = t * (omega_bar + b);
            let w = self.width;
            return 8.0 * omega_bar * w / (PI * root * (w * w + 4.0 * gap));
        }
        2.0 * u * self.pdf_offset(edge, t)
    }

    /// Integrates `p(ν) f(ν)` on `[lo, hi]` with the band edges treated as
    /// square-root singular points.
    pub fn integrate_weighted<T, F>(&self, lo: f64, hi: f64, extra: &[f64], f: F) -> Result<T>
    where
        T: QuadValue,
        F: FnMut(f64) -> T,
    {
        self.integrate_weighted_with(lo, hi, extra, f, opts())
    }

    fn integrate_weighted_with<T, F>(&self, lo: f64, hi: f64, extra: &[f64], mut f: F, o: QuadOptions) -> Result<T>
    where
        T: QuadValue,
        F: FnMut(f64) -> T,
    {
        let lo = lo.max(self.drive.b_min());
        if hi <= lo {
            return Ok(T::zero());
        }
        let mut breaks = vec![lo, hi, self.drive.b_min(), self.drive.b_max()];
        breaks.extend_from_slice(extra);
        let breaks = sorted_breaks(breaks, lo, hi);
        let mut total = T::zero();
        for w in breaks.windows(2) {
            total = total + self.integrate_piece(w[0], w[1], &mut f, o)?;
        }
        Ok(total)
    }

    fn integrate_piece<T, F>(&self, a: f64, b: f64, f: &mut F, o: QuadOptions) -> Result<T>
    where
        T: QuadValue,
        F: FnMut(f64) -> T,
    {
        let out = if self.is_edge(a) {
            let g = |u: f64| f(a + u * u) * self.sqrt_weighted_pdf(a, u);
            quad::integrate(g, 0.0, (b - a).sqrt(), o)?
        } else {
            quad::integrate(|x: f64| f(x) * self.pdf(x), a, b, o)?
        };
        Ok(out.value)
    }

    fn mass_between(&self, a: f64, b: f64) -> Result<f64> {
        self.mass_between_with(a, b, opts())
    }

    fn mass_between_with(&self, a: f64, b: f64, o: QuadOptions) -> Result<f64> {
        self.integrate_weighted_with(a, b, &[], |_| 1.0, o)
    }

    fn tail_mass(&self, from: f64) -> Result<f64> {
        let scale = (from - self.drive.b_min()).max(self.width);
        Ok(quad::integrate_to_infinity(|x| self.pdf(x), from, scale, opts())?.value)
    }

    fn build_table(&self) -> Result<CdfTable> {
        let (b_min, b_max) = (self.drive.b_min(), self.drive.b_max());
        let mut nodes = vec![b_min];
        if !self.is_homogeneous() {
            for k in 1..=16 {
                nodes.push(b_min + self.drive.spread() * k as f64 / 16.0);
            }
            *nodes.last_mut().unwrap() = b_max;
        }
        let far = b_max + 1e5 * self.width;
        // A nearly homogeneous drive leaves a near-singular bump just above
        // b_max, so the geometric tail grid starts at the band width.
        let mut first = 1e-4 * self.width;
        if !self.is_homogeneous() {
            first = first.min(self.drive.spread());
        }
        let mut j = 0;
        loop {
            let x = b_max + first * 2f64.powf(0.5 * j as f64);
            if x > far {
                break;
            }
            nodes.push(x);
            j += 1;
        }
        let mut cumulative = Vec::with_capacity(nodes.len());
        cumulative.push(0.0);
        let mut acc = 0.0;
        for w in nodes.windows(2) {
            acc += self.mass_between(w[0], w[1])?;
            cumulative.push(acc);
        }
        let total = acc + self.tail_mass(*nodes.last().unwrap())?;
        if (total - 1.0).abs() > 1e-8 {
            return Err(Error::Numerical(format!("dressed density integrates to {total}, expected 1")));
        }
        Ok(CdfTable {
            nodes,
            cumulative,
            total,
        })
    }

    /// Numerically integrated mass of the closed-form density (≈ 1).
    pub fn total_mass(&self) -> f64 {
        self.table.total
    }

    /// Cumulative distribution `∫_{b_min}^{ω̄} p`.
    pub fn cdf(&self, omega_bar: f64) -> f64 {
        let t = &self.table;
        if omega_bar.is_nan() {
            return f64::NAN;
        }
        if omega_bar <= t.nodes[0] {
            return 0.0;
        }
        let last = *t.nodes.last().unwrap();
        let value = if omega_bar >= last {
            // Far out ω̄ ≈ |Δ_k|, so the Lorentzian tail is the fallback.
            let asymptotic = 2.0 / PI * (2.0 * omega_bar / self.width).atan();
            self.tail_mass(omega_bar).map_or(asymptotic, |tail| 1.0 - tail)
        } else {
            let j = t.nodes.partition_point(|&x| x <= omega_bar) - 1;
            let extra = self
                .mass_between(t.nodes[j], omega_bar)
                .or_else(|_| self.mass_between_with(t.nodes[j], omega_bar, QuadOptions::with_tol(1e-13, 1e-9)))
                .unwrap_or(f64::NAN);
            t.cumulative[j] + extra
        };
        value.clamp(0.0, 1.0)
    }

    /// Evaluates the CDF at ascending points, integrating only between
    /// consecutive points.
    pub fn cdf_sorted(&self, points: &[f64]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(points.len());
        let mut prev_x = f64::NEG_INFINITY;
        let mut prev_f = 0.0;
        for &x in points {
            if x < prev_x {
                return Err(Error::validation("points", "must be sorted ascending"));
            }
            let f = if prev_x == f64::NEG_INFINITY || prev_x < self.drive.b_min() {
                self.cdf(x)
            } else {
                prev_f + self.mass_between(prev_x, x)?
            };
            out.push(f.clamp(0.0, 1.0));
            prev_x = x;
            prev_f = f;
        }
        Ok(out)
    }

    /// Inverse CDF by bracketed Newton iteration on the cached table.
    pub fn quantile(&self, u: f64) -> Result<f64> {
        ensure_finite("u", u)?;
        if !(0.0..=1.0).contains(&u) {
            return Err(Error::validation("u", format!("probability must lie in [0, 1], got {u}")));
        }
        let t = &self.table;
        if u == 0.0 {
            return Ok(t.nodes[0]);
        }
        if u == 1.0 {
            return Ok(f64::INFINITY);
        }
        let (mut lo, mut hi) = match t.cumulative.partition_point(|&c| c <= u) {
            k if k < t.nodes.len() => (t.nodes[k - 1], t.nodes[k]),
            _ => {
                let mut lo = *t.nodes.last().unwrap();
                let mut hi = 2.0 * lo;
                while self.cdf(hi) < u {
                    lo = hi;
                    hi *= 2.0;
                    if !hi.is_finite() {
                        return Err(Error::Numerical(format!("quantile {u} out of range")));
                    }
                }
                (lo, hi)
            }
        };
        let mut x = 0.5 * (lo + hi);
        for _ in 0..200 {
            let fx = self.cdf(x) - u;
            if fx == 0.0 {
                return Ok(x);
            }
            if fx > 0.0 {
                hi = x;
            } else {
                lo = x;
            }
            if hi - lo <= 4.0 * f64::EPSILON * hi.abs() {
                return Ok(0.5 * (lo + hi));
            }
            let p = self.pdf(x);
            let step = fx / p;
            if step.abs() <= 2.0 * f64::EPSILON * x.abs() {
                return Ok(x);
            }
            let newton = x - step;
            x = if p.is_finite() && p > 0.0 && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
        }
        Ok(x)
    }

    /// Draws one frequency by inverse-CDF sampling.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        let u: f64 = rng.gen();
        self.quantile(u)
    }
}

/// Closed-form dressed density; rejects NaN.
pub fn dressed_pdf(den: &DressedDensity, omega_bar: f64) -> Result<f64> {
    if omega_bar.is_nan() {
        return Err(Error::validation("omega_bar", "must not be NaN"));
    }
    Ok(den.pdf(omega_bar))
}

/// Cumulative distribution of the dressed density.
pub fn dressed_cdf(den: &DressedDensity, omega_bar: f64) -> Result<f64> {
    if omega_bar.is_nan() {
        return Err(Error::validation("omega_bar", "must not be NaN"));
    }
    Ok(den.cdf(omega_bar))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dressed(b_min: f64, b_max: f64) -> DressedDensity {
        DressedDensity::new(1.0, DriveAmplitudeRange::new(b_min, b_max).unwrap()).unwrap()
    }

    /// Independent normalisation: split at the edges, substitute near them,
    /// and map the tail beyond 10³ onto a finite interval. A homogeneous
    /// drive is integrated in `x = sqrt(ω̄² - b²)`, where `p dω̄ = p ω̄/x dx`
    /// is bounded.
    fn total_mass_oracle(d: &DressedDensity) -> f64 {
        let (b_min, b_max) = (d.drive().b_min(), d.drive().b_max());
        let o = QuadOptions::with_tol(1e-15, 1e-12);
        let pdf = |x: f64| d.pdf(x);
        if b_min == b_max {
            let g = |x: f64| {
                let w = x.hypot(b_min);
                d.pdf_offset(b_min, x * x / (w + b_min)) * x / w
            };
            let o = QuadOptions::with_tol(1e-13, 1e-10);
            return quad::integrate_pieces(g, &[0.0, 1e-3, 1.0, 1e3], o).unwrap().value
                + quad::integrate_to_infinity(g, 1e3, 1e3, o).unwrap().value;
        }
        let mut m = 0.0;
        if b_max > b_min {
            m += quad::integrate_sqrt_both(pdf, b_min, b_max, o).unwrap().value;
        }
        m += quad::integrate_sqrt_left(pdf, b_max, b_max + 1.0, o).unwrap().value;
        m += quad::integrate(pdf, b_max + 1.0, 1e3, o).unwrap().value;
        m += quad::integrate_to_infinity(pdf, 1e3, 1e3, o).unwrap().value;
        m
    }

    #[test]
    fn normalisation_three_parameter_sets() {
        for (b_min, b_max) in [(10.0, 10.5), (20.0, 20.5), (10.0, 10.0)] {
            let d = dressed(b_min, b_max);
            let m = total_mass_oracle(&d);
            assert!((m - 1.0).abs() < 1e-6, "({b_min}, {b_max}): mass {m}");
            assert!((d.total_mass() - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn zero_below_band_and_nonnegative() {
        let d = dressed(10.0, 10.5);
        assert_eq!(dressed_pdf(&d, 5.0).unwrap(), 0.0);
        assert_eq!(d.pdf(9.999_999), 0.0);
        for i in 0..2000 {
            let x = 9.0 + i as f64 * 0.01;
            assert!(d.pdf(x) >= 0.0);
        }
        assert!(dressed_pdf(&d, f64::NAN).is_err());
    }

    #[test]
    fn continuity_at_upper_edge() {
        let d = dressed(10.0, 10.5);
        let b = 10.5;
        let gap = (b - 10.0) * (b + 10.0);
        let left = d.inner_branch(b, gap);
        let right = d.outer_branch(b, gap, 0.0);
        assert!((left - right).abs() <= 1e-8 * left, "{left} vs {right}");
        // Approach from above: a square-root kink, so the gap shrinks like sqrt(ε).
        let at = d.pdf(b);
        for eps in [1e-12, 1e-10, 1e-8] {
            let jump = (at - d.pdf(b + eps)).abs() / at;
            assert!(jump < 10.0 * eps.sqrt(), "ε = {eps}: {jump}");
        }
    }

    #[test]
    fn homogeneous_limit() {
        let narrow = dressed(10.0, 10.0 + 1e-6);
        let homog = dressed(10.0, 10.0);
        assert!(homog.pdf(10.0).is_infinite());
        for k in [0.5, 1.0, 2.0, 5.0] {
            let x = 10.0 + 1e-6 + k;
            let a = narrow.pdf(x);
            let b = homog.pdf(x);
            assert!((a - b).abs() < 1e-3 * b, "k = {k}: {a} vs {b}");
        }
    }

    #[test]
    fn cdf_edges_and_roundtrip() {
        for (b_min, b_max) in [(10.0, 10.5), (10.0, 10.0)] {
            let d = dressed(b_min, b_max);
            assert_eq!(dressed_cdf(&d, b_min).unwrap(), 0.0);
            assert!(d.cdf(b_min + 1e4) >= 0.9996);
            let med = d.quantile(0.5).unwrap();
            assert!((d.cdf(med) - 0.5).abs() < 1e-8);
            for &u in &[1e-6, 0.01, 0.3, 0.9, 0.999, 0.99999] {
                let x = d.quantile(u).unwrap();
                // Near a divergent edge one ulp in x moves the CDF by p(x)·ulp.
                let tol = 1e-10f64.max(4.0 * d.pdf(x) * x * f64::EPSILON);
                assert!((d.cdf(x) - u).abs() < tol, "u = {u}: x = {x}, cdf = {}", d.cdf(x));
            }
        }
    }

    #[test]
    fn cdf_is_monotone() {
        let d = dressed(10.0, 10.5);
        let pts: Vec<f64> = (0..500).map(|i| 9.9 + i as f64 * 0.01).collect();
        let cdf = d.cdf_sorted(&pts).unwrap();
        for w in cdf.windows(2) {
            assert!(w[1] >= w[0]);
        }
        for (x, c) in pts.iter().zip(&cdf).step_by(37) {
            assert!((d.cdf(*x) - c).abs() < 1e-11);
        }
    }

    #[test]
    fn tail_reshaping_against_lorentzian() {
        let d = dressed(10.0, 10.5);
        let c = 10.25;
        let dressed_tail = 1.0 - (d.cdf(c + 5.0) - d.cdf(c - 5.0));
        let lorentz_tail = 2.0 / PI * (0.1f64).atan();
        assert!((lorentz_tail - 0.063_451).abs() < 1e-5);
        assert!(dressed_tail < 0.5 * lorentz_tail, "{dressed_tail} vs {lorentz_tail}");
    }
}
