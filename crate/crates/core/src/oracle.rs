//! Brute-force reference: distinguishable molecules on the full tensor
//! product space, for a handful of molecules.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};

use crate::cute::CavityParams;
use crate::dynamics::{Method, Propagator, TimeGrid, Trajectory};
use crate::error::{Error, Result};
use crate::fockspace::{enumerate_basis, Ensemble, SymBasis, SymState};
use crate::sparse::SparseMatrix;
use crate::vibronic::VibronicStructure;
use crate::C64;

pub const MAX_MOLECULES: u64 = 4;
pub const MAX_EXCITATIONS: u64 = 2;
pub const MAX_TENSOR_DIM: usize = 1_000_000;

/// Product states `|s₁ s₂ … s_N⟩ ⊗ |n_ph⟩` with a fixed excitation number.
/// Local state `s < m` is ground vibronic state `s`, `s ≥ m` is excited
/// vibronic state `s − m`.
#[derive(Debug, Clone)]
pub struct TensorBasis {
    pub n: usize,
    pub m: usize,
    pub n_exc: u64,
    /// Local states followed by the photon number.
    pub states: Vec<Vec<usize>>,
    index: HashMap<Vec<usize>, usize>,
}

impl TensorBasis {
    pub fn new(n: u64, m: usize, n_exc: u64) -> Result<Self> {
        if n == 0 || n > MAX_MOLECULES {
            return Err(Error::InvalidParameter(format!(
                "oracle supports 1..={MAX_MOLECULES} molecules, got {n}"
            )));
        }
        if n_exc > MAX_EXCITATIONS {
            return Err(Error::InvalidParameter(format!(
                "oracle supports at most {MAX_EXCITATIONS} excitations, got {n_exc}"
            )));
        }
        if m == 0 {
            return Err(Error::InvalidParameter("vibronic basis is empty".into()));
        }
        let n = n as usize;
        let local = 2 * m;
        let full = (local as f64).powi(n as i32) * (n_exc + 1) as f64;
        if full > MAX_TENSOR_DIM as f64 {
            return Err(Error::SizeGuard {
                what: "tensor-product basis",
                size: full.min(usize::MAX as f64) as usize,
                cap: MAX_TENSOR_DIM,
            });
        }
        let mut states = Vec::new();
        let mut digits = vec![0usize; n];
        loop {
            let excited = digits.iter().filter(|&&s| s >= m).count() as u64;
            if excited <= n_exc {
                let mut s = digits.clone();
                s.push((n_exc - excited) as usize);
                states.push(s);
            }
            // odometer with the last molecule fastest
            let mut pos = n;
            loop {
                if pos == 0 {
                    let index = states
                        .iter()
                        .cloned()
                        .enumerate()
                        .map(|(i, s)| (s, i))
                        .collect();
                    return Ok(Self {
                        n,
                        m,
                        n_exc,
                        states,
                        index,
                    });
                }
                pos -= 1;
                digits[pos] += 1;
                if digits[pos] < local {
                    break;
                }
                digits[pos] = 0;
            }
        }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn index_of(&self, state: &[usize]) -> Option<usize> {
        self.index.get(state).copied()
    }

    pub fn photon_counts(&self) -> Vec<f64> {
        self.states.iter().map(|s| s[self.n] as f64).collect()
    }

    /// Occupation-number state of the same configuration.
    pub fn occupations(&self, pos: usize) -> SymState {
        let s = &self.states[pos];
        let mut n_g = vec![0u64; self.m];
        let mut n_e = vec![0u64; self.m];
        for &l in &s[..self.n] {
            if l < self.m {
                n_g[l] += 1;
            } else {
                n_e[l - self.m] += 1;
            }
        }
        SymState {
            n_g,
            n_e,
            n_ph: s[self.n] as u64,
        }
    }
}

/// Rotating-wave Hamiltonian of `N` distinguishable molecules, each in its
/// vibronic eigenbasis, coupled to one cavity mode.
pub fn build_full_h(
    vs: &VibronicStructure,
    cav: &CavityParams,
    n_exc: u64,
) -> Result<(TensorBasis, SparseMatrix)> {
    cav.validate()?;
    let n = match cav.ensemble {
        Ensemble::Finite(n) => n,
        Ensemble::Infinite => return Err(Error::InfiniteEnsemble("brute-force oracle")),
    };
    let m = vs.m();
    let basis = TensorBasis::new(n, m, n_exc)?;
    let g = cav.single_molecule_coupling();
    let nmol = basis.n;
    let mut triplets = Vec::new();
    for (col, s) in basis.states.iter().enumerate() {
        let n_ph = s[nmol];
        let mut diag = cav.omega_c * n_ph as f64;
        for &l in &s[..nmol] {
            diag += if l < m {
                vs.omega_g[l]
            } else {
                vs.omega_e[l - m]
            };
        }
        triplets.push((col, col, C64::from(diag)));
        for mol in 0..nmol {
            let l = s[mol];
            if l < m && n_ph > 0 {
                // absorb a photon: |g_j⟩ → |e_i⟩
                let amp = g * (n_ph as f64).sqrt();
                for i in 0..m {
                    let mut t = s.clone();
                    t[mol] = m + i;
                    t[nmol] = n_ph - 1;
                    if let Some(row) = basis.index_of(&t) {
                        triplets.push((row, col, C64::from(amp * vs.fc[(i, l)])));
                    }
                }
            } else if l >= m {
                // emit a photon: |e_i⟩ → |g_j⟩
                let amp = g * ((n_ph + 1) as f64).sqrt();
                for j in 0..m {
                    let mut t = s.clone();
                    t[mol] = j;
                    t[nmol] = n_ph + 1;
                    if let Some(row) = basis.index_of(&t) {
                        triplets.push((row, col, C64::from(amp * vs.fc[(l - m, j)])));
                    }
                }
            }
        }
    }
    let dim = basis.len();
    Ok((basis, SparseMatrix::from_triplets(dim, dim, triplets)))
}

/// Permutation operator exchanging molecules `a` and `b`.
pub fn swap_operator(basis: &TensorBasis, a: usize, b: usize) -> Result<SparseMatrix> {
    for x in [a, b] {
        if x >= basis.n {
            return Err(Error::IndexOutOfRange {
                what: "molecule",
                index: x,
                len: basis.n,
            });
        }
    }
    let triplets = basis.states.iter().enumerate().map(|(col, s)| {
        let mut t = s.clone();
        t.swap(a, b);
        (
            basis
                .index_of(&t)
                .expect("swap preserves excitation number"),
            col,
            C64::from(1.0),
        )
    });
    Ok(SparseMatrix::from_triplets(
        basis.len(),
        basis.len(),
        triplets.collect::<Vec<_>>(),
    ))
}

/// Isometry from the permutation-symmetric occupation basis into the tensor
/// basis; column `j` is the normalized symmetrization of `sym.states[j]`.
#[derive(Debug, Clone)]
pub struct Symmetrizer {
    pub isometry: SparseMatrix,
}

impl Symmetrizer {
    pub fn new(tensor: &TensorBasis, sym: &SymBasis) -> Result<Self> {
        let mut groups: Vec<Vec<usize>> = vec![Vec::new(); sym.len()];
        for pos in 0..tensor.len() {
            let occ = tensor.occupations(pos);
            let j = sym.index_of(&occ).ok_or_else(|| {
                Error::InvalidParameter("symmetric basis does not cover the tensor basis".into())
            })?;
            groups[j].push(pos);
        }
        if let Some(j) = groups.iter().position(|g| g.is_empty()) {
            return Err(Error::InvalidParameter(format!(
                "symmetric state {j} has no tensor-product representative"
            )));
        }
        let triplets: Vec<_> = groups
            .iter()
            .enumerate()
            .flat_map(|(j, g)| {
                let amp = C64::from(1.0 / (g.len() as f64).sqrt());
                g.iter().map(move |&pos| (pos, j, amp))
            })
            .collect();
        Ok(Self {
            isometry: SparseMatrix::from_triplets(tensor.len(), sym.len(), triplets),
        })
    }

    pub fn sym_dim(&self) -> usize {
        self.isometry.ncols()
    }

    /// `W†ψ`.
    pub fn project(&self, psi: &DVector<C64>) -> DVector<C64> {
        self.isometry.adjoint().mul_vec(psi)
    }

    /// `Wφ`.
    pub fn lift(&self, phi: &DVector<C64>) -> DVector<C64> {
        self.isometry.mul_vec(phi)
    }

    /// `W†HW`.
    pub fn project_operator(&self, h: &SparseMatrix) -> Result<DMatrix<C64>> {
        let w = self.isometry.to_dense()?;
        Ok(w.adjoint() * h.to_dense()? * w)
    }

    /// Norm of the component of `ψ` outside the symmetric subspace.
    pub fn asymmetry(&self, psi: &DVector<C64>) -> f64 {
        (psi - self.lift(&self.project(psi))).norm()
    }
}

/// Tensor-space Hamiltonian together with its symmetric-subspace embedding.
pub struct Oracle {
    pub tensor: TensorBasis,
    pub sym: SymBasis,
    pub h: SparseMatrix,
    pub symmetrizer: Symmetrizer,
    pub kappa: f64,
}

impl Oracle {
    pub fn new(vs: &VibronicStructure, cav: &CavityParams, n_exc: u64) -> Result<Self> {
        let (tensor, h) = build_full_h(vs, cav, n_exc)?;
        let n = tensor.n as u64;
        let sym = enumerate_basis(n, n_exc, vs.m(), n)?;
        let symmetrizer = Symmetrizer::new(&tensor, &sym)?;
        Ok(Self {
            tensor,
            sym,
            h,
            symmetrizer,
            kappa: cav.kappa,
        })
    }

    /// Restriction of the tensor Hamiltonian to the symmetric subspace, in
    /// the order of [`Oracle::sym`].
    pub fn symmetric_hamiltonian(&self) -> Result<DMatrix<C64>> {
        self.symmetrizer.project_operator(&self.h)
    }

    /// Survival amplitude of a tensor-space initial state, which must be
    /// permutation symmetric.
    pub fn survival_tensor(&self, psi0: &DVector<C64>, grid: TimeGrid) -> Result<Trajectory> {
        let asym = self.symmetrizer.asymmetry(psi0);
        if asym > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "initial state is not permutation symmetric (asymmetric norm {asym:.2e})"
            )));
        }
        let norm = psi0.norm();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidParameter(format!(
                "initial state must be normalized, norm = {norm}"
            )));
        }
        let prop = Propagator::new(
            &self.h,
            &self.tensor.photon_counts(),
            self.kappa,
            grid,
            Method::Auto,
        )?;
        let mut c_t = Vec::with_capacity(grid.len());
        let mut norm_t = Vec::with_capacity(grid.len());
        prop.run(psi0, |_, psi| {
            c_t.push(psi0.dotc(psi));
            norm_t.push(psi.norm());
        })?;
        Ok(Trajectory {
            grid,
            c_t,
            norm_t,
            method: prop.method(),
        })
    }

    /// Survival amplitude of a state given in the symmetric occupation basis.
    pub fn survival(&self, psi0_sym: &DVector<C64>, grid: TimeGrid) -> Result<Trajectory> {
        if psi0_sym.len() != self.sym.len() {
            return Err(Error::DimensionMismatch {
                context: "symmetric initial state",
                expected: self.sym.len(),
                got: psi0_sym.len(),
            });
        }
        self.survival_tensor(&self.symmetrizer.lift(psi0_sym), grid)
    }

    /// Largest weight outside the symmetric subspace along the trajectory of
    /// a symmetric initial state.
    pub fn symmetry_leakage(&self, psi0_sym: &DVector<C64>, grid: TimeGrid) -> Result<f64> {
        let prop = Propagator::new(
            &self.h,
            &self.tensor.photon_counts(),
            self.kappa,
            grid,
            Method::Auto,
        )?;
        let mut worst: f64 = 0.0;
        prop.run(&self.symmetrizer.lift(psi0_sym), |_, psi| {
            worst = worst.max(self.symmetrizer.asymmetry(psi));
        })?;
        Ok(worst)
    }
}

/// Brute-force survival amplitude of a symmetric initial state with
/// `n_exc` excitations.
pub fn oracle_survival(
    vs: &VibronicStructure,
    cav: &CavityParams,
    n_exc: u64,
    psi0_sym: &DVector<C64>,
    grid: TimeGrid,
) -> Result<Trajectory> {
    Oracle::new(vs, cav, n_exc)?.survival(psi0_sym, grid)
}
