use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::TimeGrid;
use crate::error::{Error, Result};
use crate::C64;

/// Apodization applied to `c(t)` before the transform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Window {
    None,
    /// Half-cosine taper from 1 to 0 over the final `fraction` of the grid.
    HalfCosineTail {
        fraction: f64,
    },
}

impl Default for Window {
    fn default() -> Self {
        Window::HalfCosineTail { fraction: 0.1 }
    }
}

impl Window {
    fn validate(&self) -> Result<()> {
        match *self {
            Window::None => Ok(()),
            Window::HalfCosineTail { fraction } if fraction > 0.0 && fraction <= 1.0 => Ok(()),
            Window::HalfCosineTail { fraction } => Err(Error::InvalidParameter(format!(
                "window fraction must lie in (0, 1], got {fraction}"
            ))),
        }
    }

    fn weight(&self, t: f64, t_max: f64) -> f64 {
        match *self {
            Window::None => 1.0,
            Window::HalfCosineTail { fraction } => {
                let start = (1.0 - fraction) * t_max;
                if t <= start {
                    1.0
                } else {
                    0.5 * (1.0 + (std::f64::consts::PI * (t - start) / (fraction * t_max)).cos())
                }
            }
        }
    }
}

/// `n_points` equally spaced frequencies from `min` to `max` inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrequencyGrid {
    pub min: f64,
    pub max: f64,
    pub n_points: usize,
}

impl FrequencyGrid {
    pub fn new(min: f64, max: f64, n_points: usize) -> Result<Self> {
        if !(min.is_finite() && max.is_finite() && max > min && n_points >= 2) {
            return Err(Error::InvalidParameter(format!(
                "invalid frequency grid [{min}, {max}] with {n_points} points"
            )));
        }
        Ok(Self { min, max, n_points })
    }

    pub fn points(&self) -> Vec<f64> {
        let step = (self.max - self.min) / (self.n_points - 1) as f64;
        (0..self.n_points)
            .map(|k| self.min + k as f64 * step)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub omega: Vec<f64>,
    /// Normalized to unit maximum.
    pub intensity: Vec<f64>,
    pub window: Window,
}

fn check(c_t: &[C64], grid: &TimeGrid, window: &Window) -> Result<()> {
    grid.validate()?;
    window.validate()?;
    if c_t.len() != grid.len() {
        return Err(Error::DimensionMismatch {
            context: "amplitude sequence vs time grid",
            expected: grid.len(),
            got: c_t.len(),
        });
    }
    if c_t.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite("amplitude sequence"));
    }
    Ok(())
}

fn raw(c_t: &[C64], grid: &TimeGrid, omega: f64, window: &Window) -> f64 {
    let dt = grid.dt();
    let last = c_t.len() - 1;
    let sum: f64 = c_t
        .iter()
        .enumerate()
        .map(|(n, c)| {
            let t = grid.time(n);
            let w = if n == 0 || n == last { 0.5 } else { 1.0 };
            let (s, co) = (omega * t).sin_cos();
            w * window.weight(t, grid.t_max) * (c.re * co - c.im * s)
        })
        .sum();
    sum * dt
}

/// Unnormalized `Re Σₙ wₙ dt c(tₙ) e^{iωtₙ}` with trapezoid weights `wₙ`.
pub fn transform(c_t: &[C64], grid: &TimeGrid, omega: f64, window: Window) -> Result<f64> {
    check(c_t, grid, &window)?;
    if omega.abs() > grid.nyquist() {
        return Err(Error::GridTooCoarse {
            omega,
            nyquist: grid.nyquist(),
        });
    }
    Ok(raw(c_t, grid, omega, &window))
}

/// Absorption spectrum `A(ω) ∝ Re ∫₀^∞ dt e^{iωt} c(t)`, normalized to unit
/// maximum over the requested frequencies.
pub fn spectrum(
    c_t: &[C64],
    grid: &TimeGrid,
    freqs: &FrequencyGrid,
    window: Window,
) -> Result<Spectrum> {
    check(c_t, grid, &window)?;
    let omega = freqs.points();
    let nyquist = grid.nyquist();
    if let Some(&bad) = omega.iter().find(|w| w.abs() > nyquist) {
        return Err(Error::GridTooCoarse {
            omega: bad,
            nyquist,
        });
    }
    let values: Vec<f64> = omega
        .par_iter()
        .map(|&w| raw(c_t, grid, w, &window))
        .collect();
    let peak = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(peak > 0.0) {
        return Err(Error::NonFinite("spectrum has no positive maximum"));
    }
    Ok(Spectrum {
        omega,
        intensity: values.iter().map(|v| v / peak).collect(),
        window,
    })
}
