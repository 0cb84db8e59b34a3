//! Drive-field amplitude across a cylindrical sample sitting inside a
//! circular drive loop, and the resulting distribution of drive amplitudes.
//!
//! The physical prefactor `g_e μ_B μ_0 I / 4π` is carried as one opaque
//! scale `K0`, so the loop field at the centre is `2π K0 / R`. Downstream
//! code only ever needs Rabi frequencies in units of the broadening width.

use std::f64::consts::PI;

use crate::error::{ensure_finite, Error, Result};
use crate::quad::{integrate, QuadOptions};

/// Geometry and strength of the drive loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveCoil {
    loop_radius: f64,
    sample_radius: f64,
    sample_height: f64,
    current_scale: f64,
}

impl DriveCoil {
    pub fn new(loop_radius: f64, sample_radius: f64, sample_height: f64, current_scale: f64) -> Result<Self> {
        ensure_finite("loop_radius", loop_radius)?;
        ensure_finite("sample_radius", sample_radius)?;
        ensure_finite("sample_height", sample_height)?;
        ensure_finite("current_scale", current_scale)?;
        if loop_radius <= 0.0 {
            return Err(Error::validation("loop_radius", "must be > 0"));
        }
        if sample_radius < 0.0 {
            return Err(Error::validation("sample_radius", "must be >= 0"));
        }
        if sample_height <= 0.0 {
            return Err(Error::validation("sample_height", "must be > 0"));
        }
        if current_scale <= 0.0 {
            return Err(Error::validation("current_scale", "must be > 0"));
        }
        if sample_radius >= loop_radius {
            return Err(Error::validation(
                "sample_radius",
                format!("sample must sit strictly inside the loop (d = {sample_radius} >= R = {loop_radius})"),
            ));
        }
        Ok(DriveCoil {
            loop_radius,
            sample_radius,
            sample_height,
            current_scale,
        })
    }

    pub fn loop_radius(&self) -> f64 {
        self.loop_radius
    }
    pub fn sample_radius(&self) -> f64 {
        self.sample_radius
    }
    pub fn sample_height(&self) -> f64 {
        self.sample_height
    }
    pub fn current_scale(&self) -> f64 {
        self.current_scale
    }

    /// Field at the loop centre, `2π K0 / R`.
    pub fn center_field(&self) -> f64 {
        2.0 * PI * self.current_scale / self.loop_radius
    }

    fn check_radius(&self, r: f64) -> Result<()> {
        ensure_finite("r", r)?;
        if r < 0.0 {
            return Err(Error::validation("r", "must be >= 0"));
        }
        if r >= self.loop_radius {
            return Err(Error::Domain(format!(
                "radius {r} is on or outside the drive loop (R = {})",
                self.loop_radius
            )));
        }
        Ok(())
    }
}

/// Minimum and maximum drive amplitude (Rabi frequency) over the sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveAmplitudeRange {
    b_min: f64,
    b_max: f64,
}

impl DriveAmplitudeRange {
    pub fn new(b_min: f64, b_max: f64) -> Result<Self> {
        ensure_finite("b_min", b_min)?;
        ensure_finite("b_max", b_max)?;
        if b_min <= 0.0 {
            return Err(Error::validation("b_min", "must be > 0"));
        }
        if b_max < b_min {
            return Err(Error::validation("b_max", format!("must be >= b_min ({b_max} < {b_min})")));
        }
        Ok(DriveAmplitudeRange { b_min, b_max })
    }

    pub fn b_min(&self) -> f64 {
        self.b_min
    }
    pub fn b_max(&self) -> f64 {
        self.b_max
    }
    /// Drive inhomogeneity `b_max - b_min`.
    pub fn spread(&self) -> f64 {
        self.b_max - self.b_min
    }
    pub fn center(&self) -> f64 {
        0.5 * (self.b_min + self.b_max)
    }
    pub fn is_homogeneous(&self) -> bool {
        self.b_max == self.b_min
    }
}

/// Biot–Savart field of the loop at in-plane distance `r` from the sample centre.
pub fn field_at_radius(coil: &DriveCoil, r: f64) -> Result<f64> {
    coil.check_radius(r)?;
    let big_r = coil.loop_radius;
    if r == 0.0 {
        return Ok(coil.center_field());
    }
    let integrand = |theta: f64| {
        let c = theta.cos();
        let dist2 = big_r * big_r - 2.0 * big_r * r * c + r * r;
        big_r * (big_r - r * c) / (dist2 * dist2.sqrt())
    };
    // The integrand is even about θ = π; integrate one half.
    let half = integrate(integrand, 0.0, PI, QuadOptions::with_tol(0.0, 1e-12))?;
    Ok(coil.current_scale * 2.0 * half.value)
}

/// Quadratic truncation `2π K0/R · (1 + ¾ (r/R)²)` of [`field_at_radius`].
pub fn field_series_approx(coil: &DriveCoil, r: f64) -> Result<f64> {
    coil.check_radius(r)?;
    let x = r / coil.loop_radius;
    Ok(coil.center_field() * (1.0 + 0.75 * x * x))
}

/// Drive amplitudes at the sample centre and rim, using the series field.
pub fn amplitude_range(coil: &DriveCoil) -> DriveAmplitudeRange {
    let b_min = coil.center_field();
    let x = coil.sample_radius / coil.loop_radius;
    DriveAmplitudeRange {
        b_min,
        b_max: b_min * (1.0 + 0.75 * x * x),
    }
}

/// Rectangular density of drive amplitudes on `[b_min, b_max]`.
///
/// For a homogeneous drive the distribution is a point mass; this returns
/// `f64::INFINITY` at `b_min` and zero elsewhere, so callers must branch.
pub fn drive_amplitude_pdf(range: &DriveAmplitudeRange, b: f64) -> f64 {
    if b < range.b_min || b > range.b_max || b.is_nan() {
        return 0.0;
    }
    if range.is_homogeneous() {
        return f64::INFINITY;
    }
    1.0 / range.spread()
}
