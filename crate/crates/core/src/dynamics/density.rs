use std::collections::BTreeMap;

use nalgebra::DMatrix;

use crate::cute::{build_h0, CavityParams};
use crate::error::{Error, Result};
use crate::linalg::eigh;
use crate::vibronic::VibronicStructure;
use crate::C64;

/// Harmonic-oscillator eigenfunctions `χ₀(x)…χ_{n_max}(x)` in dimensionless
/// coordinates.
pub fn hermite_functions(n_max: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n_max + 1);
    out.push(std::f64::consts::PI.powf(-0.25) * (-0.5 * x * x).exp());
    if n_max >= 1 {
        out.push(std::f64::consts::SQRT_2 * x * out[0]);
    }
    for n in 1..n_max {
        let nf = n as f64;
        out.push((2.0 / (nf + 1.0)).sqrt() * x * out[n] - (nf / (nf + 1.0)).sqrt() * out[n - 1]);
    }
    out
}

/// Eigenstates of the lossless zeroth block, energies ascending.
#[derive(Debug, Clone)]
pub struct H0Eigenstates {
    pub energies: Vec<f64>,
    /// Columns in the basis `(|1⟩, |e₁⟩, …, |e_m⟩)`.
    pub vectors: DMatrix<C64>,
    /// `|⟨1|ψ⟩|²` per eigenstate.
    pub photonic_weights: Vec<f64>,
}

impl H0Eigenstates {
    /// Lowest eigenstate with photonic weight below `threshold`.
    pub fn lowest_dark(&self, threshold: f64) -> Option<usize> {
        (0..self.energies.len()).find(|&k| self.photonic_weights[k] < threshold)
    }

    /// Brightest eigenstate below `omega`.
    pub fn lower_polariton(&self, omega: f64) -> Option<usize> {
        self.brightest(|e| e < omega)
    }

    /// Brightest eigenstate above `omega`.
    pub fn upper_polariton(&self, omega: f64) -> Option<usize> {
        self.brightest(|e| e > omega)
    }

    fn brightest(&self, keep: impl Fn(f64) -> bool) -> Option<usize> {
        (0..self.energies.len())
            .filter(|&k| keep(self.energies[k]))
            .max_by(|&a, &b| self.photonic_weights[a].total_cmp(&self.photonic_weights[b]))
    }
}

pub fn h0_eigenstates(vs: &VibronicStructure, cav: &CavityParams) -> Result<H0Eigenstates> {
    cav.validate()?;
    let e = eigh(&build_h0(vs, cav))?;
    let photonic_weights = (0..e.dim()).map(|k| e.vectors[(0, k)].norm_sqr()).collect();
    Ok(H0Eigenstates {
        energies: e.values.iter().copied().collect(),
        vectors: e.vectors,
        photonic_weights,
    })
}

/// Vibrational content of the excited-electronic part of an eigenstate.
#[derive(Debug, Clone)]
pub struct StateDensity {
    pub index: usize,
    pub energy: f64,
    pub photonic_weight: f64,
    /// Excited-sector amplitudes renormalized to unit norm, one per vibronic
    /// state.
    pub amplitudes: Vec<C64>,
    pub quanta: Vec<Vec<usize>>,
    /// Excited-surface minimum per mode in dimensionless ground coordinates.
    pub displacements: Vec<f64>,
    /// `marginals[mode][n]`: probability of `n` quanta in `mode`.
    pub marginals: Vec<Vec<f64>>,
}

impl StateDensity {
    /// Reduced coordinate density of one mode, the other modes traced out.
    /// Integrates to one when the basis is converged.
    pub fn coordinate_density(&self, mode: usize, x: &[f64]) -> Result<Vec<f64>> {
        if mode >= self.displacements.len() {
            return Err(Error::IndexOutOfRange {
                what: "vibrational mode",
                index: mode,
                len: self.displacements.len(),
            });
        }
        let mut groups: BTreeMap<Vec<usize>, Vec<(usize, C64)>> = BTreeMap::new();
        for (q, &a) in self.quanta.iter().zip(&self.amplitudes) {
            let mut rest = q.clone();
            rest.remove(mode);
            groups.entry(rest).or_default().push((q[mode], a));
        }
        let n_max = self.marginals[mode].len().saturating_sub(1);
        let d = self.displacements[mode];
        Ok(x.iter()
            .map(|&xi| {
                let chi = hermite_functions(n_max, xi - d);
                groups
                    .values()
                    .map(|terms| {
                        terms
                            .iter()
                            .map(|&(n, a)| a * chi[n])
                            .sum::<C64>()
                            .norm_sqr()
                    })
                    .sum()
            })
            .collect())
    }
}

/// Vibrational densities of the H₀ eigenstate `which` (ascending energy).
pub fn dark_state_density(
    vs: &VibronicStructure,
    cav: &CavityParams,
    which: usize,
) -> Result<StateDensity> {
    let eig = h0_eigenstates(vs, cav)?;
    if which >= eig.energies.len() {
        return Err(Error::IndexOutOfRange {
            what: "H0 eigenstate",
            index: which,
            len: eig.energies.len(),
        });
    }
    let column = eig.vectors.column(which);
    let excited: Vec<C64> = column.iter().skip(1).copied().collect();
    let norm = excited.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    if norm < 1e-12 {
        return Err(Error::InvalidParameter(format!(
            "eigenstate {which} has no excited-molecule component"
        )));
    }
    let amplitudes: Vec<C64> = excited.iter().map(|a| a / norm).collect();
    let modes = &vs.model.modes;
    let marginals = modes
        .iter()
        .enumerate()
        .map(|(mode, vm)| {
            let mut p = vec![0.0; vm.n_max + 1];
            for (q, a) in vs.quanta.iter().zip(&amplitudes) {
                p[q[mode]] += a.norm_sqr();
            }
            p
        })
        .collect();
    Ok(StateDensity {
        index: which,
        energy: eig.energies[which],
        photonic_weight: eig.photonic_weights[which],
        amplitudes,
        quanta: vs.quanta.clone(),
        displacements: modes.iter().map(|vm| vm.displacement()).collect(),
        marginals,
    })
}
