//! Permutation-symmetric many-body basis.
//!
//! A state of `N` identical molecules and one cavity mode is labeled by how
//! many molecules occupy each single-molecule vibronic state,
//! `|n_g[0..m], n_e[0..m], n_ph⟩`. Symmetric sums of one-body operators act on
//! these occupations through bosonic ladder operators
//!
//! ```text
//! Σₖ o⁽ᵏ⁾  →  Σᵢⱼ ⟨νᵢ|o|νⱼ⟩ β†ᵢ βⱼ
//! ```
//!
//! Single-molecule states are addressed as registers: `0..m` are the ground
//! electronic vibronic states and `m..2m` the excited ones. Register 0, the
//! global ground state, is the macroscopically occupied reservoir.

use std::collections::HashMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;
use crate::C64;

/// Default cap on the number of enumerated basis states.
pub const DEFAULT_STATE_CAP: usize = 2_000_000;

/// Reservoir occupation recorded for states of an infinite ensemble.
pub const RESERVOIR: u64 = 1 << 62;

/// Number of molecules, with `N → ∞` at fixed collective coupling as a
/// first-class value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Ensemble {
    Finite(u64),
    Infinite,
}

impl Ensemble {
    pub fn is_finite(self) -> bool {
        matches!(self, Ensemble::Finite(_))
    }

    pub fn count(self) -> Option<u64> {
        match self {
            Ensemble::Finite(n) => Some(n),
            Ensemble::Infinite => None,
        }
    }
}

impl From<u64> for Ensemble {
    fn from(n: u64) -> Self {
        Ensemble::Finite(n)
    }
}

impl std::fmt::Display for Ensemble {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Ensemble::Finite(n) => write!(f, "{n}"),
            Ensemble::Infinite => f.write_str("inf"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SymState {
    pub n_g: Vec<u64>,
    pub n_e: Vec<u64>,
    pub n_ph: u64,
}

impl SymState {
    /// Ground-electronic molecules carrying vibrational quanta; the
    /// quasi-conserved block index.
    pub fn quasi(&self) -> u64 {
        self.n_g[1..].iter().sum()
    }

    pub fn excitations(&self) -> u64 {
        self.n_e.iter().sum::<u64>() + self.n_ph
    }

    pub fn molecules(&self) -> u64 {
        self.n_g.iter().chain(&self.n_e).sum()
    }

    pub fn m(&self) -> usize {
        self.n_g.len()
    }

    pub fn register(&self, r: usize) -> u64 {
        let m = self.m();
        if r < m {
            self.n_g[r]
        } else {
            self.n_e[r - m]
        }
    }

    fn register_mut(&mut self, r: usize) -> &mut u64 {
        let m = self.m();
        if r < m {
            &mut self.n_g[r]
        } else {
            &mut self.n_e[r - m]
        }
    }
}

/// Ordered, indexed set of symmetric states with fixed `N` and `N_exc`.
#[derive(Debug, Clone)]
pub struct SymBasis {
    pub states: Vec<SymState>,
    index: HashMap<SymState, usize>,
    pub ensemble: Ensemble,
    pub n_exc: u64,
    pub m: usize,
    pub q_max: u64,
}

impl SymBasis {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn index_of(&self, state: &SymState) -> Option<usize> {
        self.index.get(state).copied()
    }

    pub fn quasi(&self, pos: usize) -> u64 {
        self.states[pos].quasi()
    }

    /// Positions of the states in quasi block `q`; contiguous by construction.
    pub fn block_indices(&self, q: u64) -> Vec<usize> {
        (0..self.len()).filter(|&p| self.quasi(p) == q).collect()
    }

    /// Photon number of every state, in basis order.
    pub fn photon_counts(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.n_ph as f64).collect()
    }
}

/// Compositions of `total` into `parts` non-negative integers, in
/// descending lexicographic order.
fn compositions(total: u64, parts: usize) -> Vec<Vec<u64>> {
    fn rec(total: u64, parts: usize, prefix: &mut Vec<u64>, out: &mut Vec<Vec<u64>>) {
        if parts == 1 {
            prefix.push(total);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for first in (0..=total).rev() {
            prefix.push(first);
            rec(total - first, parts - 1, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    match parts {
        0 if total == 0 => out.push(Vec::new()),
        0 => {}
        _ => rec(total, parts, &mut Vec::with_capacity(parts), &mut out),
    }
    out
}

fn binomial(n: u64, k: u64) -> u128 {
    let k = k.min(n.saturating_sub(k));
    (0..k).fold(1u128, |acc, i| {
        acc.saturating_mul((n - i) as u128) / (i as u128 + 1)
    })
}

fn count_compositions(total: u64, parts: usize) -> u128 {
    match parts {
        0 => u128::from(total == 0),
        _ => binomial(total + parts as u64 - 1, parts as u64 - 1),
    }
}

pub fn enumerate_basis(
    ensemble: impl Into<Ensemble>,
    n_exc: u64,
    m: usize,
    q_max: u64,
) -> Result<SymBasis> {
    enumerate_basis_with_cap(ensemble, n_exc, m, q_max, DEFAULT_STATE_CAP)
}

/// Enumerates every state with the given `N`, `N_exc` and `quasi ≤ q_max`.
///
/// Ordering: ascending quasi block, then descending photon number (photon
/// sector before excited sector), then descending lexicographic order of the
/// occupation vector, so that `|e₁⟩` precedes `|e₂⟩`.
pub fn enumerate_basis_with_cap(
    ensemble: impl Into<Ensemble>,
    n_exc: u64,
    m: usize,
    q_max: u64,
    cap: usize,
) -> Result<SymBasis> {
    let ensemble = ensemble.into();
    if m == 0 {
        return Err(Error::InvalidParameter(
            "vibronic basis size m must be >= 1".into(),
        ));
    }
    if let Ensemble::Finite(n) = ensemble {
        if n == 0 {
            return Err(Error::InvalidParameter(
                "molecule number must be >= 1".into(),
            ));
        }
        if q_max > n {
            return Err(Error::InvalidParameter(format!(
                "truncation order {q_max} exceeds the molecule number {n}"
            )));
        }
    }

    // (q, n_ph, excited molecules) sectors that exist for this ensemble.
    let mut sectors = Vec::new();
    for q in 0..=q_max {
        if m == 1 && q > 0 {
            break;
        }
        for n_ph in (0..=n_exc).rev() {
            let excited = n_exc - n_ph;
            if let Ensemble::Finite(n) = ensemble {
                if excited + q > n {
                    continue;
                }
            }
            sectors.push((q, n_ph, excited));
        }
    }
    let total: u128 = sectors
        .iter()
        .map(|&(q, _, e)| count_compositions(q, m - 1).saturating_mul(count_compositions(e, m)))
        .fold(0u128, |a, b| a.saturating_add(b));
    if total > cap as u128 {
        return Err(Error::SizeGuard {
            what: "symmetric basis",
            size: usize::try_from(total).unwrap_or(usize::MAX),
            cap,
        });
    }

    let mut states = Vec::with_capacity(total as usize);
    for &(q, n_ph, excited) in &sectors {
        let reservoir = match ensemble {
            Ensemble::Finite(n) => n - excited - q,
            Ensemble::Infinite => RESERVOIR,
        };
        let excited_parts = compositions(excited, m);
        for vib in compositions(q, m - 1) {
            for n_e in &excited_parts {
                let mut n_g = Vec::with_capacity(m);
                n_g.push(reservoir);
                n_g.extend_from_slice(&vib);
                states.push(SymState {
                    n_g,
                    n_e: n_e.clone(),
                    n_ph,
                });
            }
        }
    }
    let index = states
        .iter()
        .enumerate()
        .map(|(p, s)| (s.clone(), p))
        .collect();
    Ok(SymBasis {
        states,
        index,
        ensemble,
        n_exc,
        m,
        q_max,
    })
}

/// Photon-mode factor accompanying a molecular one-body operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhotonLadder {
    Identity,
    /// `a`
    Lower,
    /// `a†`
    Raise,
}

impl PhotonLadder {
    fn apply(self, n_ph: u64) -> Option<(u64, f64)> {
        match self {
            PhotonLadder::Identity => Some((n_ph, 1.0)),
            PhotonLadder::Lower if n_ph == 0 => None,
            PhotonLadder::Lower => Some((n_ph - 1, (n_ph as f64).sqrt())),
            PhotonLadder::Raise => Some((n_ph + 1, ((n_ph + 1) as f64).sqrt())),
        }
    }
}

/// Action of `Σᵢⱼ oᵢⱼ β†ᵢ βⱼ ⊗ P` on one occupation state, without projection
/// onto any basis. Targets are returned in a deterministic order.
pub fn apply_one_body(
    one_body: &DMatrix<C64>,
    photon: PhotonLadder,
    state: &SymState,
) -> Result<Vec<(SymState, C64)>> {
    check_one_body(one_body, state.m())?;
    Ok(apply_with(one_body, photon, state, &|_, n| {
        (n as f64).sqrt()
    }))
}

fn apply_with<F>(
    one_body: &DMatrix<C64>,
    photon: PhotonLadder,
    state: &SymState,
    ladder: &F,
) -> Vec<(SymState, C64)>
where
    F: Fn(usize, u64) -> f64,
{
    let Some((n_ph, ph_amp)) = photon.apply(state.n_ph) else {
        return Vec::new();
    };
    let dim = one_body.nrows();
    let mut out = Vec::new();
    for j in 0..dim {
        let nj = state.register(j);
        if nj == 0 {
            continue;
        }
        for i in 0..dim {
            let o = one_body[(i, j)];
            if o == C64::new(0.0, 0.0) {
                continue;
            }
            let mut target = state.clone();
            target.n_ph = n_ph;
            let amp = if i == j {
                ladder(j, nj) * ladder(j, nj)
            } else {
                *target.register_mut(j) -= 1;
                let ni = target.register(i);
                *target.register_mut(i) += 1;
                ladder(j, nj) * ladder(i, ni + 1)
            };
            out.push((target, o * (amp * ph_amp)));
        }
    }
    out
}

fn check_one_body(one_body: &DMatrix<C64>, m: usize) -> Result<()> {
    if one_body.nrows() != 2 * m || one_body.ncols() != 2 * m {
        return Err(Error::DimensionMismatch {
            context: "one-body operator (expected 2m x 2m)",
            expected: 2 * m,
            got: one_body.nrows().max(one_body.ncols()),
        });
    }
    Ok(())
}

/// Matrix of `Σᵢⱼ oᵢⱼ β†ᵢ βⱼ` on the basis, projected onto its span.
pub fn map_operator(one_body: &DMatrix<C64>, basis: &SymBasis) -> Result<SparseMatrix> {
    map_term(one_body, PhotonLadder::Identity, basis)
}

/// Matrix of `(Σᵢⱼ oᵢⱼ β†ᵢ βⱼ) ⊗ P` on the basis, projected onto its span.
pub fn map_term(
    one_body: &DMatrix<C64>,
    photon: PhotonLadder,
    basis: &SymBasis,
) -> Result<SparseMatrix> {
    if !basis.ensemble.is_finite() {
        return Err(Error::InfiniteEnsemble("map_term"));
    }
    check_one_body(one_body, basis.m)?;
    Ok(map_term_with(one_body, photon, basis, |_, n| {
        (n as f64).sqrt()
    }))
}

/// Generic projected mapping with a caller-supplied annihilation amplitude
/// `ladder(register, occupancy)`; `√n` gives the exact bosonic algebra.
pub(crate) fn map_term_with<F>(
    one_body: &DMatrix<C64>,
    photon: PhotonLadder,
    basis: &SymBasis,
    ladder: F,
) -> SparseMatrix
where
    F: Fn(usize, u64) -> f64,
{
    let mut triplets = Vec::new();
    for (col, state) in basis.states.iter().enumerate() {
        for (mut target, amp) in apply_with(one_body, photon, state, &ladder) {
            if !basis.ensemble.is_finite() {
                target.n_g[0] = RESERVOIR;
            }
            if let Some(row) = basis.index_of(&target) {
                triplets.push((row, col, amp));
            }
        }
    }
    SparseMatrix::from_triplets(basis.len(), basis.len(), triplets)
}

pub fn photon_number(basis: &SymBasis) -> SparseMatrix {
    SparseMatrix::from_diagonal(&basis.photon_counts())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    MoleculeNumber,
    ExcitationNumber,
    /// Coupling between quasi blocks further apart than allowed.
    QuasiJump(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Violation {
    pub row: usize,
    pub col: usize,
    pub kind: ViolationKind,
}

/// Largest quasi-block distance a matrix element may bridge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuasiBand {
    /// Full Hamiltonian: `|Δquasi| ≤ 1`.
    Tridiagonal,
    /// Collective part alone: `Δquasi = 0`.
    Diagonal,
}

/// Lists every nonzero element of `h` that breaks conservation of `N` or
/// `N_exc`, or bridges quasi blocks beyond `band`. Empty on success.
pub fn conserved_check(basis: &SymBasis, h: &SparseMatrix, band: QuasiBand) -> Vec<Violation> {
    let max_jump = match band {
        QuasiBand::Tridiagonal => 1,
        QuasiBand::Diagonal => 0,
    };
    let mut out = Vec::new();
    for &(row, col, _) in h.triplets() {
        let (a, b) = (&basis.states[row], &basis.states[col]);
        if basis.ensemble.is_finite() && a.molecules() != b.molecules() {
            out.push(Violation {
                row,
                col,
                kind: ViolationKind::MoleculeNumber,
            });
        }
        if a.excitations() != b.excitations() {
            out.push(Violation {
                row,
                col,
                kind: ViolationKind::ExcitationNumber,
            });
        }
        let jump = a.quasi().abs_diff(b.quasi());
        if jump > max_jump {
            out.push(Violation {
                row,
                col,
                kind: ViolationKind::QuasiJump(jump),
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn state(n_g: &[u64], n_e: &[u64], n_ph: u64) -> SymState {
        SymState {
            n_g: n_g.to_vec(),
            n_e: n_e.to_vec(),
            n_ph,
        }
    }

    /// Every occupation vector of N molecules over 2m registers plus photons,
    /// filtered by the conservation laws.
    fn brute_force_count(n: u64, n_exc: u64, m: usize, q_max: u64) -> usize {
        let mut count = 0;
        let regs = 2 * m;
        let mut occ = vec![0u64; regs];
        fn rec(pos: usize, left: u64, occ: &mut Vec<u64>, f: &mut dyn FnMut(&[u64])) {
            if pos == occ.len() - 1 {
                occ[pos] = left;
                f(occ);
                return;
            }
            for k in 0..=left {
                occ[pos] = k;
                rec(pos + 1, left - k, occ, f);
            }
        }
        rec(0, n, &mut occ, &mut |o: &[u64]| {
            let excited: u64 = o[m..].iter().sum();
            let quasi: u64 = o[1..m].iter().sum();
            if excited <= n_exc && quasi <= q_max {
                count += 1;
            }
        });
        count
    }

    #[test]
    fn zeroth_block_states() {
        let b = enumerate_basis(3, 1, 2, 0).unwrap();
        assert_eq!(
            b.states,
            vec![
                state(&[3, 0], &[0, 0], 1),
                state(&[2, 0], &[1, 0], 0),
                state(&[2, 0], &[0, 1], 0),
            ]
        );
    }

    #[test]
    fn first_block_adds_vibrationally_excited_ground_molecule() {
        let b = enumerate_basis(3, 1, 2, 1).unwrap();
        assert_eq!(b.len(), brute_force_count(3, 1, 2, 1));
        assert_eq!(b.len(), 6);
        assert_eq!(
            &b.states[3..],
            &[
                state(&[2, 1], &[0, 0], 1),
                state(&[1, 1], &[1, 0], 0),
                state(&[1, 1], &[0, 1], 0),
            ]
        );
    }

    #[test]
    fn jaynes_cummings_limit() {
        let b = enumerate_basis(1, 1, 1, 0).unwrap();
        assert_eq!(b.states, vec![state(&[1], &[0], 1), state(&[0], &[1], 0)]);
    }

    #[test]
    fn sizes_match_brute_force() {
        for n in 1..=5u64 {
            for n_exc in 0..=3u64 {
                for m in 1..=3usize {
                    for q_max in 0..=n {
                        let b = enumerate_basis(n, n_exc, m, q_max).unwrap();
                        assert_eq!(
                            b.len(),
                            brute_force_count(n, n_exc, m, q_max),
                            "{n} {n_exc} {m} {q_max}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn first_manifold_block_sizes() {
        for m in 1..=5usize {
            let b0 = enumerate_basis(10, 1, m, 0).unwrap();
            let b1 = enumerate_basis(10, 1, m, 1).unwrap();
            assert_eq!(b0.len(), m + 1);
            assert_eq!(b1.len(), (m + 1) + (m - 1) * (m + 1));
        }
    }

    #[test]
    fn infinite_ensemble_records_reservoir() {
        let b = enumerate_basis(Ensemble::Infinite, 2, 1, 0).unwrap();
        assert_eq!(b.len(), 3);
        assert!(b.states.iter().all(|s| s.n_g[0] == RESERVOIR));
        assert_eq!(
            b.states.iter().map(|s| s.n_ph).collect::<Vec<_>>(),
            vec![2, 1, 0]
        );
    }

    #[test]
    fn guards() {
        assert!(matches!(
            enumerate_basis_with_cap(1000, 3, 10, 3, 1000),
            Err(Error::SizeGuard { .. })
        ));
        assert!(enumerate_basis(2, 1, 2, 3).is_err());
        assert!(enumerate_basis(0, 1, 2, 0).is_err());
        assert!(enumerate_basis(2, 1, 0, 0).is_err());
    }

    #[test]
    fn identity_maps_to_molecule_number() {
        let b = enumerate_basis(4, 1, 2, 4).unwrap();
        let id = DMatrix::<C64>::identity(4, 4);
        let op = map_operator(&id, &b).unwrap();
        let expect = SparseMatrix::from_diagonal(&vec![4.0; b.len()]);
        assert!(op.max_abs_diff(&expect) < 1e-14);
    }

    #[test]
    fn ground_projector_counts_ground_molecules() {
        let n = 5;
        let b = enumerate_basis(n, 1, 2, 0).unwrap();
        let mut o = DMatrix::<C64>::zeros(4, 4);
        o[(0, 0)] = C64::new(1.0, 0.0);
        let op = map_operator(&o, &b).unwrap();
        let e1 = b.index_of(&state(&[n - 1, 0], &[1, 0], 0)).unwrap();
        assert_eq!(op.get(e1, e1), C64::new((n - 1) as f64, 0.0));
    }

    #[test]
    fn excitation_from_reservoir_is_bosonically_enhanced() {
        let n = 7;
        let m = 3;
        // |φᵉ₂, e⟩⟨φᵍ₁, g|
        let mut o = DMatrix::<C64>::zeros(2 * m, 2 * m);
        o[(m + 1, 0)] = C64::new(1.0, 0.0);
        let out = apply_one_body(
            &o,
            PhotonLadder::Identity,
            &state(&[n, 0, 0], &[0, 0, 0], 0),
        )
        .unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].0, state(&[n - 1, 0, 0], &[0, 1, 0], 0));
        assert!((out[0].1.re - (n as f64).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn one_body_dimension_mismatch() {
        let b = enumerate_basis(2, 1, 2, 0).unwrap();
        let o = DMatrix::<C64>::identity(3, 3);
        assert!(matches!(
            map_operator(&o, &b),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn conservation_check_flags_injected_element() {
        let b = enumerate_basis(3, 1, 3, 2).unwrap();
        let q0 = b.block_indices(0)[0];
        let q2 = b.block_indices(2)[0];
        let bad = SparseMatrix::from_triplets(b.len(), b.len(), vec![(q0, q2, C64::new(1.0, 0.0))]);
        let v = conserved_check(&b, &bad, QuasiBand::Tridiagonal);
        assert_eq!(
            v,
            vec![Violation {
                row: q0,
                col: q2,
                kind: ViolationKind::QuasiJump(2)
            }]
        );
    }

    fn random_hermitian(vals: &[f64], dim: usize) -> DMatrix<C64> {
        let mut h = DMatrix::<C64>::zeros(dim, dim);
        let mut it = vals.iter().copied();
        for i in 0..dim {
            h[(i, i)] = C64::new(it.next().unwrap(), 0.0);
            for j in 0..i {
                let z = C64::new(it.next().unwrap(), it.next().unwrap());
                h[(i, j)] = z;
                h[(j, i)] = z.conj();
            }
        }
        h
    }

    proptest! {
        #[test]
        fn index_is_bijective(n in 1u64..6, n_exc in 0u64..3, m in 1usize..4, q in 0u64..3) {
            let q = q.min(n);
            let b = enumerate_basis(n, n_exc, m, q).unwrap();
            for (p, s) in b.states.iter().enumerate() {
                prop_assert_eq!(b.index_of(s), Some(p));
                prop_assert_eq!(s.molecules(), n);
                prop_assert_eq!(s.excitations(), n_exc);
                prop_assert!(s.quasi() <= q);
            }
        }

        #[test]
        fn hermitian_maps_to_hermitian(vals in proptest::collection::vec(-1.0f64..1.0, 16)) {
            let b = enumerate_basis(3, 1, 2, 3).unwrap();
            let h = random_hermitian(&vals, 4);
            let op = map_operator(&h, &b).unwrap();
            prop_assert!(op.hermiticity_defect() < 1e-14);
        }

        #[test]
        fn commutators_close(
            a in proptest::collection::vec(-1.0f64..1.0, 16),
            c in proptest::collection::vec(-1.0f64..1.0, 16),
            n in 1u64..4,
            m in 1usize..3,
        ) {
            // The full N-molecule symmetric space (all excitation counts) is
            // closed under one-body operators.
            let dim = 2 * m;
            let a = random_hermitian(&a, dim);
            let c = random_hermitian(&c, dim);
            let comm = &a * &c - &c * &a;
            let basis = full_basis(n, m);
            let ma = map_term_with(&a, PhotonLadder::Identity, &basis, |_, k| (k as f64).sqrt()).to_dense().unwrap();
            let mc = map_term_with(&c, PhotonLadder::Identity, &basis, |_, k| (k as f64).sqrt()).to_dense().unwrap();
            let mcomm = map_term_with(&comm, PhotonLadder::Identity, &basis, |_, k| (k as f64).sqrt()).to_dense().unwrap();
            let lhs = &ma * &mc - &mc * &ma;
            prop_assert!((lhs - mcomm).iter().map(|z| z.norm()).fold(0.0, f64::max) < 1e-12);
        }
    }

    /// All N-molecule symmetric states without photons, every excitation count.
    fn full_basis(n: u64, m: usize) -> SymBasis {
        let mut states = Vec::new();
        for occ in compositions(n, 2 * m) {
            states.push(SymState {
                n_g: occ[..m].to_vec(),
                n_e: occ[m..].to_vec(),
                n_ph: 0,
            });
        }
        let index = states
            .iter()
            .enumerate()
            .map(|(p, s)| (s.clone(), p))
            .collect();
        SymBasis {
            states,
            index,
            ensemble: Ensemble::Finite(n),
            n_exc: 0,
            m,
            q_max: n,
        }
    }
}
