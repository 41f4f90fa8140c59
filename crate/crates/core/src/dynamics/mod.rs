//! Time evolution, optical response and absorption spectra.

mod density;
mod output;
mod propagate;
mod spectrum;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use density::{
    dark_state_density, h0_eigenstates, hermite_functions, H0Eigenstates, StateDensity,
};
pub use output::{write_spectrum_csv, write_trajectory_csv};
pub use propagate::{filter_response, propagate, Method, Propagator};
pub use spectrum::{spectrum, transform, FrequencyGrid, Spectrum, Window};

/// Uniform grid `tₙ = n·dt`, `n = 0..=n_steps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGrid {
    pub t_max: f64,
    pub n_steps: usize,
}

impl TimeGrid {
    pub fn new(t_max: f64, n_steps: usize) -> Result<Self> {
        let g = Self { t_max, n_steps };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_max.is_finite() && self.t_max > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "t_max must be positive, got {}",
                self.t_max
            )));
        }
        if self.n_steps < 2 {
            return Err(Error::InvalidParameter(format!(
                "n_steps must be >= 2, got {}",
                self.n_steps
            )));
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        self.t_max / self.n_steps as f64
    }

    pub fn len(&self) -> usize {
        self.n_steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.dt()
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|n| self.time(n)).collect()
    }

    /// Frequency resolution `2π / t_max`.
    pub fn resolution(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.t_max
    }

    /// Largest frequency representable without aliasing, `π / dt`.
    pub fn nyquist(&self) -> f64 {
        std::f64::consts::PI / self.dt()
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub grid: TimeGrid,
    /// `⟨ψ₀|ψ(tₙ)⟩`.
    pub c_t: Vec<crate::C64>,
    /// `‖ψ(tₙ)‖`.
    pub norm_t: Vec<f64>,
    /// Method actually used after any fallback.
    pub method: Method,
}

impl Trajectory {
    pub fn populations(&self) -> Vec<f64> {
        self.c_t.iter().map(|c| c.norm_sqr()).collect()
    }
}
