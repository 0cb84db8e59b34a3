//! Globally adaptive Gauss–Kronrod (7/15) quadrature.
//!
//! Intervals are kept in a max-heap keyed on their local error estimate and
//! the worst one is bisected until the summed estimate meets the requested
//! tolerance. Helpers remove inverse-square-root endpoint singularities and
//! map semi-infinite ranges onto a finite one.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

// Gauss weights for the odd Kronrod nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Scalar types the integrator can accumulate.
pub trait QuadValue:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self>
{
    fn zero() -> Self;
    fn magnitude(&self) -> f64;
    fn is_finite_value(&self) -> bool;
}

impl QuadValue for f64 {
    fn zero() -> Self {
        0.0
    }
    fn magnitude(&self) -> f64 {
        self.abs()
    }
    fn is_finite_value(&self) -> bool {
        self.is_finite()
    }
}

impl QuadValue for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn magnitude(&self) -> f64 {
        self.norm()
    }
    fn is_finite_value(&self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

/// Tolerances and subdivision budget.
#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions {
            abs_tol: 1e-12,
            rel_tol: 1e-10,
            max_intervals: 4000,
        }
    }
}

impl QuadOptions {
    pub fn with_tol(abs_tol: f64, rel_tol: f64) -> Self {
        QuadOptions {
            abs_tol,
            rel_tol,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct QuadOutput<T> {
    pub value: T,
    pub abs_error: f64,
    pub intervals: usize,
}

struct Segment<T> {
    a: f64,
    b: f64,
    value: T,
    error: f64,
}

impl<T> PartialEq for Segment<T> {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl<T> Eq for Segment<T> {}
impl<T> PartialOrd for Segment<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<T> Ord for Segment<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod15<T: QuadValue>(f: &mut impl FnMut(f64) -> T, a: f64, b: f64) -> (T, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        let pair = f1 + f2;
        kron = kron + pair * WGK[j];
        if j % 2 == 1 {
            gauss = gauss + pair * WG[j / 2];
        }
    }
    let value = kron * half;
    let error = (kron - gauss).magnitude() * half.abs();
    (value, error)
}

/// Integrates `f` over `[a, b]`.
pub fn integrate<T, F>(mut f: F, a: f64, b: f64, opts: QuadOptions) -> Result<QuadOutput<T>>
where
    T: QuadValue,
    F: FnMut(f64) -> T,
{
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Domain(format!("integration bounds must be finite: [{a}, {b}]")));
    }
    if a == b {
        return Ok(QuadOutput {
            value: T::zero(),
            abs_error: 0.0,
            intervals: 0,
        });
    }
    let (v0, e0) = kronrod15(&mut f, a, b);
    let mut total = v0;
    let mut total_err = e0;
    let mut heap = BinaryHeap::new();
    heap.push(Segment {
        a,
        b,
        value: v0,
        error: e0,
    });
    let min_width = (b - a).abs() * 1e-15;
    while total_err > opts.abs_tol.max(opts.rel_tol * total.magnitude()) {
        if heap.len() >= opts.max_intervals {
            break;
        }
        let worst = match heap.pop() {
            Some(s) => s,
            None => break,
        };
        if (worst.b - worst.a).abs() < min_width {
            heap.push(worst);
            break;
        }
        let mid = 0.5 * (worst.a + worst.b);
        let (vl, el) = kronrod15(&mut f, worst.a, mid);
        let (vr, er) = kronrod15(&mut f, mid, worst.b);
        total = total - worst.value + vl + vr;
        total_err += el + er - worst.error;
        heap.push(Segment {
            a: worst.a,
            b: mid,
            value: vl,
            error: el,
        });
        heap.push(Segment {
            a: mid,
            b: worst.b,
            value: vr,
            error: er,
        });
    }
    // Re-sum to shed the drift of incremental updates.
    let mut value = T::zero();
    let mut abs_error = 0.0;
    for s in heap.iter() {
        value = value + s.value;
        abs_error += s.error;
    }
    if !value.is_finite_value() {
        return Err(Error::Numerical(format!(
            "non-finite integral on [{a}, {b}]"
        )));
    }
    let target = opts.abs_tol.max(opts.rel_tol * value.magnitude());
    if abs_error > target * 10.0 {
        return Err(Error::Numerical(format!(
            "quadrature on [{a}, {b}] did not converge: error {abs_error:.3e} > {target:.3e}"
        )));
    }
    Ok(QuadOutput {
        value,
        abs_error,
        intervals: heap.len(),
    })
}

/// Integrates over consecutive breakpoints, summing the pieces.
pub fn integrate_pieces<T, F>(mut f: F, breaks: &[f64], opts: QuadOptions) -> Result<QuadOutput<T>>
where
    T: QuadValue,
    F: FnMut(f64) -> T,
{
    let mut value = T::zero();
    let mut abs_error = 0.0;
    let mut intervals = 0;
    for w in breaks.windows(2) {
        let piece = integrate(&mut f, w[0], w[1], opts)?;
        value = value + piece.value;
        abs_error += piece.abs_error;
        intervals += piece.intervals;
    }
    Ok(QuadOutput {
        value,
        abs_error,
        intervals,
    })
}

/// Integrates `f` on `[a, b]` where `f` may blow up like `(x - a)^(-1/2)`.
///
/// Uses `x = a + u²`, which turns the singularity into a bounded integrand.
pub fn integrate_sqrt_left<T, F>(mut f: F, a: f64, b: f64, opts: QuadOptions) -> Result<QuadOutput<T>>
where
    T: QuadValue,
    F: FnMut(f64) -> T,
{
    let span = (b - a).max(0.0).sqrt();
    integrate(move |u| f(a + u * u) * (2.0 * u), 0.0, span, opts)
}

/// Mirror of [`integrate_sqrt_left`] for a singular right endpoint.
pub fn integrate_sqrt_right<T, F>(mut f: F, a: f64, b: f64, opts: QuadOptions) -> Result<QuadOutput<T>>
where
    T: QuadValue,
    F: FnMut(f64) -> T,
{
    let span = (b - a).max(0.0).sqrt();
    integrate(move |u| f(b - u * u) * (2.0 * u), 0.0, span, opts)
}

/// Integrates over `[a, b]` with square-root-type behaviour allowed at both ends.
pub fn integrate_sqrt_both<T, F>(mut f: F, a: f64, b: f64, opts: QuadOptions) -> Result<QuadOutput<T>>
where
    T: QuadValue,
    F: FnMut(f64) -> T,
{
    let mid = 0.5 * (a + b);
    let left = integrate_sqrt_left(&mut f, a, mid, opts)?;
    let right = integrate_sqrt_right(&mut f, mid, b, opts)?;
    Ok(QuadOutput {
        value: left.value + right.value,
        abs_error: left.abs_error + right.abs_error,
        intervals: left.intervals + right.intervals,
    })
}

/// Integrates `f` over `[a, ∞)` through `x = a + scale·t/(1 - t)`.
pub fn integrate_to_infinity<T, F>(mut f: F, a: f64, scale: f64, opts: QuadOptions) -> Result<QuadOutput<T>>
where
    T: QuadValue,
    F: FnMut(f64) -> T,
{
    integrate(
        move |t| {
            let one_minus = 1.0 - t;
            let x = a + scale * t / one_minus;
            f(x) * (scale / (one_minus * one_minus))
        },
        0.0,
        1.0,
        opts,
    )
}
