//! Block Hamiltonians of the collective/single-molecule partition.
//!
//! The bosonic Hamiltonian splits as `H = H⁽⁰⁾ + v`. `H⁽⁰⁾` holds the bare
//! energies and the collective light-matter coupling, which only moves
//! molecules into and out of the global ground state and therefore conserves
//! the number of vibrationally excited ground-state molecules (the quasi block
//! index). `v` holds the remaining single-molecule couplings, which change that
//! number by one. In the quasi-block basis `H` is block-tridiagonal.
//!
//! Matrices for arbitrary blocks come from the generic second-quantized
//! mapping; the explicit `build_h0`, `build_h1k` and `build_v0k` constructions
//! exist for the low blocks used by the perturbative expansion.

use std::ops::Range;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fockspace::{self, Ensemble, PhotonLadder, SymBasis};
use crate::sparse::SparseMatrix;
use crate::vibronic::VibronicStructure;
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CavityParams {
    pub omega_c: f64,
    /// Collective coupling `g√N`, held fixed as `N` varies.
    pub g_sqrt_n: f64,
    pub ensemble: Ensemble,
    /// Cavity leakage rate.
    #[serde(default)]
    pub kappa: f64,
}

impl CavityParams {
    pub fn new(omega_c: f64, g_sqrt_n: f64, ensemble: impl Into<Ensemble>, kappa: f64) -> Self {
        Self {
            omega_c,
            g_sqrt_n,
            ensemble: ensemble.into(),
            kappa,
        }
    }

    pub fn with_ensemble(self, ensemble: impl Into<Ensemble>) -> Self {
        Self {
            ensemble: ensemble.into(),
            ..self
        }
    }

    pub fn with_kappa(self, kappa: f64) -> Self {
        Self { kappa, ..self }
    }

    /// Single-molecule coupling `g = g√N / √N`; zero for an infinite ensemble.
    pub fn single_molecule_coupling(&self) -> f64 {
        match self.ensemble {
            Ensemble::Finite(n) => self.g_sqrt_n / (n as f64).sqrt(),
            Ensemble::Infinite => 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega_c.is_finite() && self.omega_c > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "cavity frequency must be positive, got {}",
                self.omega_c
            )));
        }
        if !(self.g_sqrt_n.is_finite() && self.g_sqrt_n >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "collective coupling must be non-negative, got {}",
                self.g_sqrt_n
            )));
        }
        if !(self.kappa.is_finite() && self.kappa >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "cavity leakage must be non-negative, got {}",
                self.kappa
            )));
        }
        if self.ensemble == Ensemble::Finite(0) {
            return Err(Error::InvalidParameter(
                "molecule number must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

fn c(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// Zeroth block in the basis `(|1⟩, |e₁⟩, …, |e_m⟩)`: an arrowhead matrix with
/// the cavity in the corner and the collective couplings `g√N⟨φᵍ₁|φᵉᵢ⟩`.
pub fn build_h0(vs: &VibronicStructure, cav: &CavityParams) -> DMatrix<C64> {
    arrowhead(vs, cav.omega_c, cav.g_sqrt_n, 0.0)
}

fn arrowhead(vs: &VibronicStructure, omega_c: f64, coupling: f64, shift: f64) -> DMatrix<C64> {
    let m = vs.m();
    let mut h = DMatrix::zeros(m + 1, m + 1);
    h[(0, 0)] = c(omega_c + shift);
    for i in 0..m {
        let x = c(coupling * vs.fc[(i, 0)]);
        h[(0, i + 1)] = x;
        h[(i + 1, 0)] = x;
        h[(i + 1, i + 1)] = c(vs.omega_e[i] + shift);
    }
    h
}

fn check_k(vs: &VibronicStructure, k: usize) -> Result<()> {
    if k == 0 || k >= vs.m() {
        return Err(Error::IndexOutOfRange {
            what: "vibrationally excited ground state (1..m)",
            index: k,
            len: vs.m(),
        });
    }
    Ok(())
}

/// Sub-block of quasi block 1 with one ground-state molecule in vibronic state
/// `k` (0-based, `k ≥ 1`), in the basis `(|g_k 1⟩, |g_k e₁⟩, …, |g_k e_m⟩)`.
///
/// The collective coupling is `g√(N−1)` and every diagonal entry is shifted
/// by `ω_g,k`; for an infinite ensemble this is exactly `H₀ + ω_g,k·I`.
pub fn build_h1k(vs: &VibronicStructure, cav: &CavityParams, k: usize) -> Result<DMatrix<C64>> {
    check_k(vs, k)?;
    let coupling = match cav.ensemble {
        Ensemble::Infinite => cav.g_sqrt_n,
        Ensemble::Finite(n) if n >= 2 => cav.single_molecule_coupling() * ((n - 1) as f64).sqrt(),
        Ensemble::Finite(_) => {
            return Err(Error::InvalidParameter(
                "quasi block 1 needs at least two molecules".into(),
            ))
        }
    };
    Ok(arrowhead(vs, cav.omega_c, coupling, vs.omega_g[k]))
}

/// `H₀ + ω_g,k·I`, the large-N approximation of [`build_h1k`].
pub fn shifted_h0(vs: &VibronicStructure, cav: &CavityParams, k: usize) -> Result<DMatrix<C64>> {
    check_k(vs, k)?;
    Ok(arrowhead(vs, cav.omega_c, cav.g_sqrt_n, vs.omega_g[k]))
}

/// Single-molecule coupling from the zeroth block (rows) into sub-block `k`
/// of quasi block 1 (columns). Only the first column is populated:
/// `⟨eᵢ|v|g_k 1⟩ = g⟨φᵉᵢ|φᵍ_k⟩`.
pub fn build_v0k(vs: &VibronicStructure, cav: &CavityParams, k: usize) -> Result<DMatrix<C64>> {
    check_k(vs, k)?;
    if !cav.ensemble.is_finite() {
        return Err(Error::InfiniteEnsemble("single-molecule coupling"));
    }
    let g = cav.single_molecule_coupling();
    let m = vs.m();
    let mut v = DMatrix::zeros(m + 1, m + 1);
    for i in 0..m {
        v[(i + 1, 0)] = c(g * vs.fc[(i, k)]);
    }
    Ok(v)
}

/// How the basis of a [`BlockHamiltonian`] is cut into blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Partition {
    /// By the quasi-conserved number of vibrationally excited ground-state
    /// molecules, ascending.
    Quasi,
    /// By photon number, descending (high-excitation zero-temperature layout).
    PhotonNumber,
}

/// Assembled block-tridiagonal Hamiltonian.
#[derive(Debug, Clone)]
pub struct BlockHamiltonian {
    pub basis: SymBasis,
    pub partition: Partition,
    /// Quasi index or photon number of each block.
    pub labels: Vec<u64>,
    pub ranges: Vec<Range<usize>>,
    /// Diagonal blocks.
    pub blocks: Vec<DMatrix<C64>>,
    /// `couplings[b]` links block `b` (rows) to block `b + 1` (columns).
    pub couplings: Vec<DMatrix<C64>>,
    /// Collective part `H⁽⁰⁾`.
    pub collective: SparseMatrix,
    /// Single-molecule part `v`.
    pub single_molecule: SparseMatrix,
}

impl BlockHamiltonian {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn full(&self) -> SparseMatrix {
        self.collective.add(&self.single_molecule)
    }

    pub fn photon_counts(&self) -> Vec<f64> {
        self.basis.photon_counts()
    }

    pub fn block_sizes(&self) -> Vec<usize> {
        self.ranges.iter().map(|r| r.len()).collect()
    }

    /// Writes the full matrix in the plain-text sparse format.
    pub fn write_text<W: std::io::Write>(&self, w: W) -> Result<()> {
        self.full().write_text(w)
    }
}

/// Hamiltonian of the first excitation manifold truncated at quasi block
/// `q_max` (CUT-E order `q_max`).
pub fn assemble_truncated(
    vs: &VibronicStructure,
    cav: &CavityParams,
    q_max: u64,
) -> Result<BlockHamiltonian> {
    assemble(vs, cav, 1, q_max)
}

/// Hamiltonian on all states with `n_exc` excitations and `quasi ≤ q_max`,
/// partitioned into quasi blocks.
pub fn assemble(
    vs: &VibronicStructure,
    cav: &CavityParams,
    n_exc: u64,
    q_max: u64,
) -> Result<BlockHamiltonian> {
    cav.validate()?;
    let basis = fockspace::enumerate_basis(cav.ensemble, n_exc, vs.m(), q_max)?;
    build_blocks(vs, cav, basis, Partition::Quasi)
}

/// Zero-temperature Hamiltonian of the `n_exc` manifold without vibrationally
/// excited ground-state molecules, blocked by photon number from `n_exc` down
/// to 0. The inter-block couplings are collective.
pub fn assemble_high_excitation(
    vs: &VibronicStructure,
    cav: &CavityParams,
    n_exc: u64,
) -> Result<BlockHamiltonian> {
    cav.validate()?;
    if n_exc == 0 {
        return Err(Error::InvalidParameter(
            "excitation number must be >= 1".into(),
        ));
    }
    if let Ensemble::Finite(n) = cav.ensemble {
        if n < n_exc {
            return Err(Error::InvalidParameter(format!(
                "{n} molecules cannot hold {n_exc} excitations at zero temperature"
            )));
        }
    }
    let basis = fockspace::enumerate_basis(cav.ensemble, n_exc, vs.m(), 0)?;
    build_blocks(vs, cav, basis, Partition::PhotonNumber)
}

/// One-body matrices over the `2m` registers: bare energies, the collective
/// coupling `g Σᵢ ⟨φᵉᵢ|φᵍ₁⟩ B†ᵢ b₁` and the single-molecule coupling
/// `g Σᵢ,ⱼ₍ⱼ>₁₎ ⟨φᵉᵢ|φᵍⱼ⟩ B†ᵢ bⱼ`.
fn one_body_terms(vs: &VibronicStructure, collective_scale: f64, g: f64) -> [DMatrix<C64>; 3] {
    let m = vs.m();
    let mut energies = DMatrix::zeros(2 * m, 2 * m);
    for i in 0..m {
        energies[(i, i)] = c(vs.omega_g[i]);
        energies[(m + i, m + i)] = c(vs.omega_e[i]);
    }
    let mut collective = DMatrix::zeros(2 * m, 2 * m);
    let mut single = DMatrix::zeros(2 * m, 2 * m);
    for i in 0..m {
        collective[(m + i, 0)] = c(collective_scale * vs.fc[(i, 0)]);
        for j in 1..m {
            single[(m + i, j)] = c(g * vs.fc[(i, j)]);
        }
    }
    [energies, collective, single]
}

fn build_blocks(
    vs: &VibronicStructure,
    cav: &CavityParams,
    basis: SymBasis,
    partition: Partition,
) -> Result<BlockHamiltonian> {
    let (collective, single_molecule) = match cav.ensemble {
        Ensemble::Finite(_) => {
            let g = cav.single_molecule_coupling();
            let [energies, coll, single] = one_body_terms(vs, g, g);
            let h0 = fockspace::map_operator(&energies, &basis)?
                .add(&fockspace::photon_number(&basis).scale(c(cav.omega_c)))
                .add(&fockspace::map_term(&coll, PhotonLadder::Lower, &basis)?)
                .add(&fockspace::map_term(
                    &coll.adjoint(),
                    PhotonLadder::Raise,
                    &basis,
                )?);
            let v = fockspace::map_term(&single, PhotonLadder::Lower, &basis)?.add(
                &fockspace::map_term(&single.adjoint(), PhotonLadder::Raise, &basis)?,
            );
            (h0, v)
        }
        Ensemble::Infinite => {
            // With g = g√N/√N, the reservoir factor √n₁/√N → 1 and every
            // coupling not involving the reservoir vanishes.
            let ladder = |r: usize, n: u64| if r == 0 { 1.0 } else { (n as f64).sqrt() };
            let [energies, coll, _] = one_body_terms(vs, cav.g_sqrt_n, 0.0);
            let h0 = fockspace::map_term_with(&energies, PhotonLadder::Identity, &basis, ladder)
                .add(&fockspace::photon_number(&basis).scale(c(cav.omega_c)))
                .add(&fockspace::map_term_with(
                    &coll,
                    PhotonLadder::Lower,
                    &basis,
                    ladder,
                ))
                .add(&fockspace::map_term_with(
                    &coll.adjoint(),
                    PhotonLadder::Raise,
                    &basis,
                    ladder,
                ));
            (h0, SparseMatrix::zeros(basis.len(), basis.len()))
        }
    };

    let label_of = |p: usize| match partition {
        Partition::Quasi => basis.states[p].quasi(),
        Partition::PhotonNumber => basis.states[p].n_ph,
    };
    let mut labels = Vec::new();
    let mut ranges: Vec<Range<usize>> = Vec::new();
    for p in 0..basis.len() {
        let l = label_of(p);
        match (labels.last(), ranges.last_mut()) {
            (Some(&last), Some(r)) if last == l => r.end = p + 1,
            _ => {
                labels.push(l);
                ranges.push(p..p + 1);
            }
        }
    }

    let full = collective.add(&single_molecule);
    let idx = |r: &Range<usize>| r.clone().collect::<Vec<_>>();
    for r in &ranges {
        if r.len() > crate::sparse::DENSE_LIMIT {
            return Err(Error::SizeGuard {
                what: "dense block",
                size: r.len(),
                cap: crate::sparse::DENSE_LIMIT,
            });
        }
    }
    let blocks = ranges
        .iter()
        .map(|r| full.submatrix(&idx(r), &idx(r)))
        .collect();
    let couplings = ranges
        .windows(2)
        .map(|w| full.submatrix(&idx(&w[0]), &idx(&w[1])))
        .collect();

    Ok(BlockHamiltonian {
        basis,
        partition,
        labels,
        ranges,
        blocks,
        couplings,
        collective,
        single_molecule,
    })
}
