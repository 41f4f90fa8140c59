//! Single-molecule vibronic structure.
//!
//! Each molecule carries a set of harmonic vibrational modes that are
//! displaced, but not distorted, on the excited electronic surface. Energies
//! are measured from the ground vibronic state (`omega_g[0] = 0`) and
//! `electronic_gap` is the adiabatic 0–0 transition energy. All quantities
//! are in hartree atomic units.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default cap on the vibronic basis size `m`.
pub const DEFAULT_BASIS_CAP: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VibrationalMode {
    pub frequency: f64,
    /// Huang–Rhys factor, the dimensionless squared displacement `d²/2`.
    pub huang_rhys: f64,
    /// Highest vibrational quantum kept for this mode.
    pub n_max: usize,
}

impl VibrationalMode {
    pub fn new(frequency: f64, huang_rhys: f64, n_max: usize) -> Self {
        Self {
            frequency,
            huang_rhys,
            n_max,
        }
    }

    /// Excited-surface minimum in dimensionless normal coordinates.
    pub fn displacement(&self) -> f64 {
        (2.0 * self.huang_rhys).sqrt()
    }

    /// Overlaps `⟨χᵉᵢ|χᵍⱼ⟩` between the `n_max + 1` lowest eigenfunctions of
    /// the displaced and undisplaced oscillators.
    ///
    /// Built from the ladder-operator relation `a_e = a_g − √s`, which gives
    ///
    /// ```text
    /// O[i+1][j] = (√j·O[i][j−1] − √s·O[i][j]) / √(i+1)
    /// O[0][j+1] = √s·O[0][j] / √(j+1),      O[0][0] = exp(−s/2)
    /// ```
    pub fn overlaps(&self) -> DMatrix<f64> {
        let n = self.n_max + 1;
        let lam = self.huang_rhys.sqrt();
        let mut o = DMatrix::zeros(n, n);
        o[(0, 0)] = (-0.5 * self.huang_rhys).exp();
        for j in 0..n - 1 {
            o[(0, j + 1)] = lam * o[(0, j)] / ((j + 1) as f64).sqrt();
        }
        for i in 0..n - 1 {
            for j in 0..n {
                let lower = if j > 0 {
                    (j as f64).sqrt() * o[(i, j - 1)]
                } else {
                    0.0
                };
                o[(i + 1, j)] = (lower - lam * o[(i, j)]) / ((i + 1) as f64).sqrt();
            }
        }
        o
    }

    fn validate(&self) -> Result<()> {
        if !(self.frequency > 0.0 && self.frequency.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "mode frequency must be positive, got {}",
                self.frequency
            )));
        }
        if !(self.huang_rhys >= 0.0 && self.huang_rhys.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "Huang-Rhys factor must be non-negative, got {}",
                self.huang_rhys
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MolecularModel {
    pub electronic_gap: f64,
    #[serde(default)]
    pub modes: Vec<VibrationalMode>,
}

impl MolecularModel {
    pub fn new(electronic_gap: f64, modes: Vec<VibrationalMode>) -> Self {
        Self {
            electronic_gap,
            modes,
        }
    }

    /// Two-level molecule without vibrations.
    pub fn two_level(electronic_gap: f64) -> Self {
        Self::new(electronic_gap, Vec::new())
    }

    /// Vertical (Franck–Condon) transition energy `ω₀ + Σ ω_ν s_ν`.
    pub fn vertical_gap(&self) -> f64 {
        self.electronic_gap
            + self
                .modes
                .iter()
                .map(|m| m.frequency * m.huang_rhys)
                .sum::<f64>()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.electronic_gap > 0.0 && self.electronic_gap.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "electronic gap must be positive, got {}",
                self.electronic_gap
            )));
        }
        self.modes.iter().try_for_each(VibrationalMode::validate)
    }

    /// Product of per-mode basis sizes, `None` on overflow.
    pub fn basis_size(&self) -> Option<usize> {
        self.modes
            .iter()
            .try_fold(1usize, |acc, m| acc.checked_mul(m.n_max.checked_add(1)?))
    }
}

/// Vibronic energies and Franck–Condon overlaps of one molecule.
#[derive(Debug, Clone, PartialEq)]
pub struct VibronicStructure {
    /// Ground-surface vibronic energies, `omega_g[0] = 0`.
    pub omega_g: Vec<f64>,
    /// Excited-surface vibronic energies, `omega_e[0] = ω₀`.
    pub omega_e: Vec<f64>,
    /// `fc[(i, j)] = ⟨φᵉᵢ|φᵍⱼ⟩`.
    pub fc: DMatrix<f64>,
    /// Vibrational quanta per mode for each vibronic index.
    pub quanta: Vec<Vec<usize>>,
    pub model: MolecularModel,
}

impl VibronicStructure {
    /// Vibronic basis size `m`.
    pub fn m(&self) -> usize {
        self.omega_g.len()
    }
}

pub fn build_vibronic(model: &MolecularModel) -> Result<VibronicStructure> {
    build_vibronic_with_cap(model, DEFAULT_BASIS_CAP)
}

/// Builds the vibronic structure, failing when the basis would exceed `cap`.
///
/// States are enumerated lexicographically in the per-mode quanta (first mode
/// most significant) and then stably sorted by energy; energies equal to
/// within 1e-12 hartree keep their lexicographic order.
pub fn build_vibronic_with_cap(model: &MolecularModel, cap: usize) -> Result<VibronicStructure> {
    model.validate()?;
    let m = model.basis_size().unwrap_or(usize::MAX);
    if m > cap {
        return Err(Error::SizeGuard {
            what: "vibronic basis",
            size: m,
            cap,
        });
    }

    let mut quanta: Vec<Vec<usize>> = vec![Vec::new()];
    for mode in &model.modes {
        quanta = quanta
            .into_iter()
            .flat_map(|q| {
                (0..=mode.n_max).map(move |n| {
                    let mut next = q.clone();
                    next.push(n);
                    next
                })
            })
            .collect();
    }
    let vib_energy = |q: &[usize]| -> f64 {
        q.iter()
            .zip(&model.modes)
            .map(|(&n, mode)| n as f64 * mode.frequency)
            .sum()
    };
    // Lexicographic order is the enumeration order, so a stable sort on a
    // quantized energy key keeps ties lexicographic.
    quanta.sort_by_key(|q| (vib_energy(q) * 1e12).round() as i64);

    let per_mode: Vec<DMatrix<f64>> = model.modes.iter().map(VibrationalMode::overlaps).collect();
    let fc = DMatrix::from_fn(m, m, |i, j| {
        quanta[i]
            .iter()
            .zip(&quanta[j])
            .zip(&per_mode)
            .map(|((&qi, &qj), o)| o[(qi, qj)])
            .product()
    });

    let omega_g: Vec<f64> = quanta.iter().map(|q| vib_energy(q)).collect();
    let omega_e = omega_g.iter().map(|w| model.electronic_gap + w).collect();
    Ok(VibronicStructure {
        omega_g,
        omega_e,
        fc,
        quanta,
        model: model.clone(),
    })
}
