//! Eigendecomposition of the complex-symmetric arrowhead Hamiltonian.
//!
//! The matrix has diagonal `(ω̃_c, ω̃_1, …, ω̃_N)` with `ω̃_k = ω_k - iγ/2` and
//! real couplings `g_k` in the cavity row and column. Spins sharing a frequency
//! are folded into one bright direction plus dark states, spins with `g = 0`
//! decouple, and the reduced problem is solved through its secular equation
//!
//! ```text
//! s(λ) = λ - ω̃_c - Σ z_i² / (λ - ω̃_i) = 0,   v = (1, z_i / (λ - ω̃_i)),   vᵀv = s'(λ).
//! ```
//!
//! Roots are first found for the real problem (κ = γ) with a bracketed Newton
//! iteration, then carried to the complex problem by Newton's method, with
//! Aberth sweeps and a dense solver as fallbacks. Every eigenvalue is stored as
//! an offset from its nearest pole so that `λ - ω̃_i` keeps full precision.

use nalgebra::DMatrix;
use rayon::prelude::*;
use num_complex::Complex64;

use crate::error::{Error, Result};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Which eigenvalue algorithm to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EigenSolver {
    /// O(N²) secular-equation solver.
    #[default]
    Secular,
    /// Dense complex Schur factorisation, O(N³); for validation at small N.
    Dense,
}

#[derive(Debug, Clone)]
struct Group {
    /// Index into the reduced poles, `None` for uncoupled spins.
    pole: Option<usize>,
    start: usize,
    end: usize,
}

/// Spectral decomposition `H = Σ_j v_j v_jᵀ / (v_jᵀ v_j) λ_j + dark part`.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    gamma: f64,
    /// Cavity diagonal in the frame shifted by `+iγ/2`: `ω_c - i(κ - γ)/2`.
    cavity: Complex64,
    poles: Vec<f64>,
    z2: Vec<f64>,
    origin: Vec<Option<usize>>,
    offset: Vec<Complex64>,
    deriv: Vec<Complex64>,
    groups: Vec<Group>,
    frequencies: Vec<f64>,
    couplings: Vec<f64>,
}

impl EigenDecomposition {
    /// Decomposes the arrowhead matrix. `frequencies` must be sorted.
    pub(crate) fn new(
        cavity_frequency: f64,
        kappa: f64,
        frequencies: &[f64],
        couplings: &[f64],
        gamma: f64,
        solver: EigenSolver,
    ) -> Result<Self> {
        let mut groups = Vec::new();
        let mut poles = Vec::new();
        let mut z2 = Vec::new();
        let mut k = 0;
        while k < frequencies.len() {
            if couplings[k] == 0.0 {
                groups.push(Group {
                    pole: None,
                    start: k,
                    end: k + 1,
                });
                k += 1;
                continue;
            }
            let mut end = k + 1;
            let mut weight = couplings[k] * couplings[k];
            while end < frequencies.len() && frequencies[end] == frequencies[k] && couplings[end] > 0.0 {
                weight += couplings[end] * couplings[end];
                end += 1;
            }
            groups.push(Group {
                pole: Some(poles.len()),
                start: k,
                end,
            });
            poles.push(frequencies[k]);
            z2.push(weight);
            k = end;
        }
        let mut dec = EigenDecomposition {
            gamma,
            cavity: Complex64::new(cavity_frequency, -0.5 * (kappa - gamma)),
            poles,
            z2,
            origin: Vec::new(),
            offset: Vec::new(),
            deriv: Vec::new(),
            groups,
            frequencies: frequencies.to_vec(),
            couplings: couplings.to_vec(),
        };
        match solver {
            EigenSolver::Secular => dec.solve_secular()?,
            EigenSolver::Dense => dec.solve_dense()?,
        }
        Ok(dec)
    }

    /// Number of bright eigenvalues (reduced dimension + 1).
    pub fn bright_len(&self) -> usize {
        self.offset.len()
    }

    /// Bright eigenvalues `λ_j`, ordered by the real part of the real-problem root.
    pub fn eigenvalues(&self) -> Vec<Complex64> {
        (0..self.offset.len()).map(|j| self.eigenvalue(j)).collect()
    }

    /// All N + 1 eigenvalues, dark ones included.
    pub fn all_eigenvalues(&self) -> Vec<Complex64> {
        let mut out = self.eigenvalues();
        for g in &self.groups {
            let dark = match g.pole {
                Some(_) => g.end - g.start - 1,
                None => 1,
            };
            for _ in 0..dark {
                out.push(Complex64::new(self.frequencies[g.start], -0.5 * self.gamma));
            }
        }
        out
    }

    /// Cavity weight `1/s'(λ_j)` of each bright eigenvector.
    pub fn cavity_weights(&self) -> Vec<Complex64> {
        self.deriv.iter().map(|d| d.inv()).collect()
    }

    fn eigenvalue(&self, j: usize) -> Complex64 {
        let base = self.origin[j].map_or(0.0, |o| self.poles[o]);
        Complex64::new(base, 0.0) + self.offset[j] - I * (0.5 * self.gamma)
    }

    /// `λ_j - ω̃_i` for reduced pole `i`, without cancellation.
    fn gap(&self, j: usize, i: usize) -> Complex64 {
        let base = self.origin[j].map_or(0.0, |o| self.poles[o]);
        Complex64::new(base - self.poles[i], 0.0) + self.offset[j]
    }

    /// `(s, s')` at offset `tau` from root `j`'s origin, in the shifted frame.
    fn secular(&self, j: usize, tau: Complex64) -> (Complex64, Complex64) {
        secular_at(&self.poles, &self.z2, self.cavity, self.origin[j], tau)
    }

    fn trace_residual(&self) -> f64 {
        // In the shifted frame, Σ μ_j = a' + Σ d_i.
        let mut sum = Complex64::new(0.0, 0.0);
        let mut scale = 0.0;
        for j in 0..self.offset.len() {
            let mu = self.eigenvalue(j) + I * (0.5 * self.gamma);
            sum += mu;
            scale += mu.norm();
        }
        let expected = self.cavity + self.poles.iter().sum::<f64>();
        (sum - expected).norm() / (1.0 + scale)
    }

    fn weight_residual(&self) -> f64 {
        let total: Complex64 = self.deriv.iter().map(|d| d.inv()).sum();
        (total - 1.0).norm()
    }

    /// Stores `s'(λ_j)` for the current roots and checks the sum rules.
    fn validate(&mut self) -> Result<()> {
        self.deriv = (0..self.offset.len())
            .into_par_iter()
            .map(|j| self.secular(j, self.offset[j]).1)
            .collect();
        let w = self.weight_residual();
        let t = self.trace_residual();
        let tol_w = 1e-9;
        let tol_t = 1e-12 * (self.offset.len() as f64).sqrt().max(1.0);
        if !(w <= tol_w && t <= tol_t) {
            return Err(Error::Numerical(format!(
                "eigen sum rules violated: |Σ 1/s' - 1| = {w:.3e}, trace residual {t:.3e}"
            )));
        }
        Ok(())
    }

    fn solve_secular(&mut self) -> Result<()> {
        let n = self.poles.len();
        if n == 0 {
            self.origin = vec![None];
            self.offset = vec![self.cavity];
            self.deriv = vec![Complex64::new(1.0, 0.0)];
            return Ok(());
        }
        let a = self.cavity.re;
        let roots = real_roots(&self.poles, &self.z2, a);
        self.origin = roots.iter().map(|r| Some(r.0)).collect();
        let kappa_shift = -self.cavity.im;
        if kappa_shift == 0.0 {
            self.offset = roots.iter().map(|r| Complex64::new(r.1, 0.0)).collect();
            return self.validate();
        }
        // First-order guess: each root moves by -iκ'/2 times its cavity weight.
        let guesses: Vec<Complex64> = roots.iter().map(|&(_, t, slope)| Complex64::new(t, -kappa_shift / slope)).collect();
        self.offset = (0..=n).into_par_iter().map(|j| self.newton(j, guesses[j])).collect();
        // Strongly hybridised neighbours can all be drawn to one root.
        let suspects = self.collided();
        if !suspects.is_empty() {
            for &j in &suspects {
                self.offset[j] = guesses[j];
            }
            self.aberth(100, &suspects);
        }
        if self.validate().is_ok() {
            return Ok(());
        }
        self.offset = guesses;
        self.aberth(200, &(0..=n).collect::<Vec<_>>());
        self.offset = (0..=n).into_par_iter().map(|j| self.newton(j, self.offset[j])).collect();
        if self.validate().is_ok() {
            return Ok(());
        }
        if n <= 3000 {
            return self.solve_dense();
        }
        self.validate()
    }

    fn newton(&self, j: usize, mut tau: Complex64) -> Complex64 {
        for _ in 0..60 {
            let (s, ds) = self.secular(j, tau);
            let step = s / ds;
            if !step.re.is_finite() || !step.im.is_finite() {
                break;
            }
            tau -= step;
            // Quadratic convergence: the error after a step this small is at rounding level.
            if step.norm() <= 1e-9 * tau.norm().max(1e-300) {
                break;
            }
        }
        tau
    }

    /// Indices near roots that Newton left coincident, padded by a few neighbours.
    fn collided(&self) -> Vec<usize> {
        const REACH: usize = 3;
        const PAD: usize = 8;
        let m = self.offset.len();
        let mut hit = vec![false; m];
        for j in 0..m {
            let mu = self.eigenvalue(j);
            for k in j + 1..(j + 1 + REACH).min(m) {
                if (mu - self.eigenvalue(k)).norm() <= 1e-7 * (1.0 + mu.norm()) {
                    for i in j.saturating_sub(PAD)..(k + 1 + PAD).min(m) {
                        hit[i] = true;
                    }
                }
            }
        }
        (0..m).filter(|&j| hit[j]).collect()
    }

    /// Aberth–Ehrlich sweeps on `s(μ) Π (μ - d_i)` updating only the roots in `active`.
    fn aberth(&mut self, sweeps: usize, active: &[usize]) {
        let m = self.offset.len();
        let base: Vec<f64> = (0..m).map(|j| self.origin[j].map_or(0.0, |o| self.poles[o])).collect();
        for _ in 0..sweeps {
            let mut max_rel = 0.0f64;
            for &j in active {
                let tau = self.offset[j];
                let (s, ds) = self.secular(j, tau);
                let mut pole_sum = Complex64::new(0.0, 0.0);
                for &d in &self.poles {
                    pole_sum += (Complex64::new(base[j] - d, 0.0) + tau).inv();
                }
                let newton = s / (ds + s * pole_sum);
                let mut repulsion = Complex64::new(0.0, 0.0);
                for i in 0..m {
                    if i != j {
                        repulsion += (Complex64::new(base[j] - base[i], 0.0) + tau - self.offset[i]).inv();
                    }
                }
                let step = newton / (Complex64::new(1.0, 0.0) - newton * repulsion);
                if step.re.is_finite() && step.im.is_finite() {
                    self.offset[j] = tau - step;
                    max_rel = max_rel.max(step.norm() / (1.0 + (base[j] + tau.re).abs()));
                }
            }
            if max_rel < 1e-15 {
                break;
            }
        }
    }

    fn solve_dense(&mut self) -> Result<()> {
        let n = self.poles.len();
        let mut h = DMatrix::<Complex64>::zeros(n + 1, n + 1);
        h[(0, 0)] = self.cavity;
        for i in 0..n {
            let z = self.z2[i].sqrt();
            h[(0, i + 1)] = Complex64::new(z, 0.0);
            h[(i + 1, 0)] = Complex64::new(z, 0.0);
            h[(i + 1, i + 1)] = Complex64::new(self.poles[i], 0.0);
        }
        let eig = nalgebra::linalg::Schur::new(h)
            .eigenvalues()
            .ok_or_else(|| Error::Numerical("dense Schur factorisation failed".into()))?;
        let mut roots: Vec<Complex64> = eig.iter().copied().collect();
        roots.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        self.origin.clear();
        self.offset.clear();
        for mu in roots {
            let o = nearest(&self.poles, mu.re);
            self.origin.push(o);
            let base = o.map_or(0.0, |o| self.poles[o]);
            self.offset.push(mu - base);
        }
        for j in 0..self.offset.len() {
            self.offset[j] = self.newton(j, self.offset[j]);
        }
        self.validate()
    }

    /// `Σ_{k∈G} x_k g_k` for every coupled group, indexed by reduced pole.
    fn group_sums(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.poles.len()];
        for g in &self.groups {
            if let Some(p) = g.pole {
                out[p] = (g.start..g.end).map(|k| x[k + 1] * self.couplings[k]).sum();
            }
        }
        out
    }

    /// `(v_jᵀ a, v_jᵀ b)` for full vectors given by cavity entries and group sums, sharing `1/(λ_j - d_i)`.
    fn project_pair(
        &self,
        j: usize,
        a0: Complex64,
        a: &[Complex64],
        b0: Complex64,
        b: &[Complex64],
    ) -> (Complex64, Complex64) {
        let base = self.origin[j].map_or(0.0, |o| self.poles[o]);
        let tau = self.offset[j];
        let ti2 = tau.im * tau.im;
        let (mut ar, mut ai, mut br, mut bi) = (a0.re, a0.im, b0.re, b0.im);
        for ((&d, x), y) in self.poles.iter().zip(a).zip(b) {
            let re = (base - d) + tau.re;
            let inv = 1.0 / (re * re + ti2);
            let (rr, ri) = (re * inv, -tau.im * inv);
            ar += x.re * rr - x.im * ri;
            ai += x.re * ri + x.im * rr;
            br += y.re * rr - y.im * ri;
            bi += y.re * ri + y.im * rr;
        }
        (Complex64::new(ar, ai), Complex64::new(br, bi))
    }

    fn dark_overlaps(&self, bra: &[Complex64], ket: &[Complex64]) -> Vec<(Complex64, Complex64)> {
        let mut out = Vec::new();
        for g in &self.groups {
            let lambda = Complex64::new(self.frequencies[g.start], -0.5 * self.gamma);
            match g.pole {
                None => out.push((lambda, bra[g.start + 1].conj() * ket[g.start + 1])),
                Some(p) if g.end - g.start > 1 => {
                    let mut full = Complex64::new(0.0, 0.0);
                    let mut bg = Complex64::new(0.0, 0.0);
                    let mut kg = Complex64::new(0.0, 0.0);
                    for k in g.start..g.end {
                        full += bra[k + 1].conj() * ket[k + 1];
                        bg += bra[k + 1].conj() * self.couplings[k];
                        kg += ket[k + 1] * self.couplings[k];
                    }
                    out.push((lambda, full - bg * kg / self.z2[p]));
                }
                Some(_) => {}
            }
        }
        out
    }

    /// `α` when the spin part of `x` equals `α g` to rounding.
    fn bright_amplitude(&self, x: &[Complex64]) -> Option<Complex64> {
        let total: f64 = self.z2.iter().sum();
        if total == 0.0 {
            return None;
        }
        let mut proj = Complex64::new(0.0, 0.0);
        let mut norm2 = 0.0;
        for (v, &g) in x[1..].iter().zip(&self.couplings) {
            proj += v * g;
            norm2 += v.norm_sqr();
        }
        let alpha = proj / total;
        let resid: f64 = x[1..].iter().zip(&self.couplings).map(|(v, &g)| (v - alpha * g).norm_sqr()).sum();
        (resid <= 1e-26 * norm2.max(f64::MIN_POSITIVE)).then_some(alpha)
    }

    /// Expansion of `⟨bra| e^{-iHt} |ket⟩` as `Σ_j c_j e^{-iλ_j t}`.
    pub fn overlap_expansion(&self, bra: &[Complex64], ket: &[Complex64]) -> Result<Vec<(Complex64, Complex64)>> {
        self.check_len(bra)?;
        self.check_len(ket)?;
        let bra_conj: Vec<Complex64> = bra.iter().map(|b| b.conj()).collect();
        if let (Some(ab), Some(ak)) = (self.bright_amplitude(&bra_conj), self.bright_amplitude(ket)) {
            // For x = (x_0, α g), v_jᵀ x = x_0 + α Σ z_i²/(λ_j - ω̃_i) = x_0 + α (λ_j - ω̃_c).
            let shift = Complex64::new(0.0, 0.5 * self.gamma);
            return Ok((0..self.offset.len())
                .map(|j| {
                    let lambda = self.eigenvalue(j);
                    let r = lambda + shift - self.cavity;
                    let pb = bra_conj[0] + ab * r;
                    let pk = ket[0] + ak * r;
                    (lambda, pb * pk / self.deriv[j])
                })
                .collect());
        }
        let sb = self.group_sums(&bra_conj);
        let sk = self.group_sums(ket);
        let mut terms: Vec<(Complex64, Complex64)> = (0..self.offset.len())
            .into_par_iter()
            .map(|j| {
                let (pb, pk) = self.project_pair(j, bra_conj[0], &sb, ket[0], &sk);
                (self.eigenvalue(j), pb * pk / self.deriv[j])
            })
            .collect();
        terms.extend(self.dark_overlaps(bra, ket));
        Ok(terms)
    }

    /// Full amplitude vector `e^{-iHt} x` at each time.
    pub fn propagate(&self, x: &[Complex64], times: &[f64]) -> Result<Vec<Vec<Complex64>>> {
        self.check_len(x)?;
        let m = self.offset.len();
        let sums = self.group_sums(x);
        let coeff: Vec<Complex64> = (0..m).map(|j| self.project_pair(j, x[0], &sums, x[0], &sums).0 / self.deriv[j]).collect();
        // Dark remainders per group: x_G minus its bright component.
        let mut dark: Vec<(usize, Vec<Complex64>)> = Vec::new();
        for g in &self.groups {
            match g.pole {
                None => dark.push((g.start, vec![x[g.start + 1]])),
                Some(p) if g.end - g.start > 1 => {
                    let mut kg = Complex64::new(0.0, 0.0);
                    for k in g.start..g.end {
                        kg += x[k + 1] * self.couplings[k];
                    }
                    let scale = kg / self.z2[p];
                    dark.push((g.start, (g.start..g.end).map(|k| x[k + 1] - scale * self.couplings[k]).collect()));
                }
                Some(_) => {}
            }
        }
        let n = self.frequencies.len();
        let mut out = Vec::with_capacity(times.len());
        for &t in times {
            let mut v = vec![Complex64::new(0.0, 0.0); n + 1];
            for j in 0..m {
                let c = coeff[j] * (-I * self.eigenvalue(j) * t).exp();
                v[0] += c;
                for g in &self.groups {
                    if let Some(p) = g.pole {
                        let share = c / self.gap(j, p);
                        for k in g.start..g.end {
                            v[k + 1] += share * self.couplings[k];
                        }
                    }
                }
            }
            for (start, rem) in &dark {
                let phase = (-I * Complex64::new(self.frequencies[*start], -0.5 * self.gamma) * t).exp();
                for (i, r) in rem.iter().enumerate() {
                    v[start + 1 + i] += r * phase;
                }
            }
            out.push(v);
        }
        Ok(out)
    }

    fn check_len(&self, x: &[Complex64]) -> Result<()> {
        if x.len() != self.frequencies.len() + 1 {
            return Err(Error::validation(
                "amplitudes",
                format!("expected {} amplitudes, got {}", self.frequencies.len() + 1, x.len()),
            ));
        }
        Ok(())
    }
}

fn nearest(poles: &[f64], x: f64) -> Option<usize> {
    if poles.is_empty() {
        return None;
    }
    let k = poles.partition_point(|&d| d < x);
    if k == 0 {
        Some(0)
    } else if k == poles.len() || x - poles[k - 1] <= poles[k] - x {
        Some(k - 1)
    } else {
        Some(k)
    }
}

fn secular_at(
    poles: &[f64],
    z2: &[f64],
    cavity: Complex64,
    origin: Option<usize>,
    tau: Complex64,
) -> (Complex64, Complex64) {
    let base = origin.map_or(0.0, |o| poles[o]);
    let (sum, dsum) = complex_sums(poles, z2, base, tau);
    (Complex64::new(base, 0.0) + tau - cavity - sum, dsum + 1.0)
}

/// `Σ w_i r_i` and `Σ w_i r_i²` with `r_i = 1/((base - d_i) + tau)`.
fn complex_sums(poles: &[f64], z2: &[f64], base: f64, tau: Complex64) -> (Complex64, Complex64) {
    const L: usize = 4;
    let (tr, ti) = (tau.re, tau.im);
    let ti2 = ti * ti;
    let mut s_re = [0.0f64; L];
    let mut s_im = [0.0f64; L];
    let mut d_re = [0.0f64; L];
    let mut d_im = [0.0f64; L];
    let n = poles.len() / L * L;
    for c in (0..n).step_by(L) {
        for k in 0..L {
            let x = (base - poles[c + k]) + tr;
            let inv = 1.0 / (x * x + ti2);
            let rr = x * inv;
            let ri = -ti * inv;
            let w = z2[c + k];
            s_re[k] += w * rr;
            s_im[k] += w * ri;
            // w r² = w (rr² - ri² + 2i rr ri)
            d_re[k] += w * (rr * rr - ri * ri);
            d_im[k] += w * (2.0 * rr * ri);
        }
    }
    for i in n..poles.len() {
        let x = (base - poles[i]) + tr;
        let inv = 1.0 / (x * x + ti2);
        let rr = x * inv;
        let ri = -ti * inv;
        let w = z2[i];
        s_re[0] += w * rr;
        s_im[0] += w * ri;
        d_re[0] += w * (rr * rr - ri * ri);
        d_im[0] += w * (2.0 * rr * ri);
    }
    let total = |a: &[f64; L]| a.iter().sum::<f64>();
    (Complex64::new(total(&s_re), total(&s_im)), Complex64::new(total(&d_re), total(&d_im)))
}

/// `Σ w_i r_i` and `Σ w_i r_i²` with `r_i = 1/((base - d_i) + tau)`, real case.
fn real_sums(poles: &[f64], z2: &[f64], base: f64, tau: f64) -> (f64, f64) {
    const L: usize = 4;
    let mut s = [0.0f64; L];
    let mut ds = [0.0f64; L];
    let pc = poles.chunks_exact(L);
    let wc = z2.chunks_exact(L);
    let (pr, wr) = (pc.remainder(), wc.remainder());
    for (p, w) in pc.zip(wc) {
        for k in 0..L {
            let r = 1.0 / ((base - p[k]) + tau);
            let t = w[k] * r;
            s[k] += t;
            ds[k] += t * r;
        }
    }
    for (k, (&d, &w)) in pr.iter().zip(wr).enumerate() {
        let r = 1.0 / ((base - d) + tau);
        let t = w * r;
        s[k] += t;
        ds[k] += t * r;
    }
    (s.iter().sum(), ds.iter().sum())
}

/// Roots of the real secular equation `μ - a - Σ z_i²/(μ - d_i)`, one per
/// interval between consecutive poles plus one on each side. Returns the
/// nearest-pole origin, offset and secular slope `s'` of each root.
fn real_roots(poles: &[f64], z2: &[f64], a: f64) -> Vec<(usize, f64, f64)> {
    let n = poles.len();
    let norm = z2.iter().sum::<f64>().sqrt();
    (0..=n).into_par_iter().map(|j| {
        let left = j.checked_sub(1);
        let right = (j < n).then_some(j);
        let (o, lo, hi, start) = match (left, right) {
            (None, Some(r)) => {
                let lb = a.min(poles[0]) - norm - 1.0;
                (r, lb - poles[r], 0.0, None)
            }
            (Some(l), None) => {
                let ub = a.max(poles[n - 1]) + norm + 1.0;
                (l, 0.0, ub - poles[l], None)
            }
            (Some(l), Some(r)) => {
                let len = poles[r] - poles[l];
                let half = 0.5 * len;
                let h_mid = removed_secular(poles, z2, a, l, Some(l), Some(r), half).0;
                // Two-pole model with the remaining sum frozen at its midpoint value.
                let (wl, wr) = (z2[l], z2[r]);
                let c = (h_mid + (wl - wr) * half) / (half * half);
                if h_mid >= 0.0 {
                    (l, 0.0, half, two_pole_root(c, len, wl, wr))
                } else {
                    // Same model measured from the right pole.
                    (r, -(len - half), 0.0, two_pole_root(-c, len, wr, wl).map(|y| -y))
                }
            }
            (None, None) => unreachable!(),
        };
        let (tau, slope) = bracketed_newton(|t| removed_secular(poles, z2, a, o, left, right, t), lo, hi, start);
        (o, tau, slope)
    }).collect()
}

/// `h = s·P` with the poles bounding the interval multiplied out, `h'`, and `s'`.
/// `P = (μ - d_l)(d_r - μ)`, dropping the factor of a missing side.
fn removed_secular(
    poles: &[f64],
    z2: &[f64],
    a: f64,
    origin: usize,
    left: Option<usize>,
    right: Option<usize>,
    tau: f64,
) -> (f64, f64, f64) {
    let base = poles[origin];
    // Bounding poles are adjacent; skip them as a block.
    let skip_lo = left.or(right).unwrap_or(0);
    let skip_hi = right.or(left).map_or(0, |i| i + 1);
    let (s1, d1) = real_sums(&poles[..skip_lo], &z2[..skip_lo], base, tau);
    let (s2, d2) = real_sums(&poles[skip_hi..], &z2[skip_hi..], base, tau);
    let rest = (base + tau - a) - (s1 + s2);
    let drest = 1.0 + d1 + d2;
    // Distances to the bounding poles measured from the origin.
    let dl = left.map(|l| (base - poles[l]) + tau);
    let dr = right.map(|r| (poles[r] - base) - tau);
    match (dl, dr) {
        (Some(xl), Some(xr)) => {
            let (wl, wr) = (z2[left.unwrap()], z2[right.unwrap()]);
            let p = xl * xr;
            let h = p * rest - wl * xr + wr * xl;
            let dh = (xr - xl) * rest + p * drest + wl + wr;
            (h, dh, drest + wl / (xl * xl) + wr / (xr * xr))
        }
        (None, Some(xr)) => {
            let wr = z2[right.unwrap()];
            (xr * rest + wr, -rest + xr * drest, drest + wr / (xr * xr))
        }
        (Some(xl), None) => {
            let wl = z2[left.unwrap()];
            (xl * rest - wl, rest + xl * drest, drest + wl / (xl * xl))
        }
        (None, None) => (rest, drest, drest),
    }
}

/// Root in `(0, len)` of `c x (len - x) - wl (len - x) + wr x`.
fn two_pole_root(c: f64, len: f64, wl: f64, wr: f64) -> Option<f64> {
    let b = c * len + wl + wr;
    let prod = wl * len;
    if c == 0.0 {
        return (b > 0.0).then(|| prod / b);
    }
    let disc = b * b - 4.0 * c * prod;
    if disc < 0.0 {
        return None;
    }
    let q = 0.5 * (b + b.signum() * disc.sqrt());
    [q / c, prod / q].into_iter().find(|x| *x > 0.0 && *x < len)
}

/// Root of an increasing-through-zero `f` on `(lo, hi)` by Newton with
/// bisection safeguard. `f` returns `(h, h', aux)`; the last `aux` is passed back.
fn bracketed_newton<F: FnMut(f64) -> (f64, f64, f64)>(
    mut f: F,
    mut lo: f64,
    mut hi: f64,
    start: Option<f64>,
) -> (f64, f64) {
    let mut x = match start {
        Some(x) if x > lo && x < hi => x,
        _ => 0.5 * (lo + hi),
    };
    let mut aux = f64::NAN;
    for _ in 0..200 {
        let (h, dh, a) = f(x);
        aux = a;
        if h == 0.0 {
            return (x, aux);
        }
        if h < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let step = h / dh;
        let scale = x.abs().max(lo.abs().min(hi.abs())).max(f64::MIN_POSITIVE);
        // Quadratic convergence: the error after a step this small is at rounding level.
        if step.abs() <= 1e-9 * scale {
            return ((x - step).clamp(lo, hi), aux);
        }
        let mut next = x - step;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if hi - lo <= 2.0 * f64::EPSILON * scale {
            return (next, aux);
        }
        x = next;
    }
    (x, aux)
}
