//! Second-order single-molecule corrections to the infinite-ensemble
//! dynamics and the radiative pumping rate of dark states.
//!
//! Starting in the zeroth quasi block, odd powers of `v` cannot return to it,
//! so the leading correction to the survival amplitude is the Dyson term
//!
//! ```text
//! c_corr(t) = −Σₖ ∫₀ᵗdt₁ ∫₀^{t₁}dt₂ ⟨i|e^{−iH₀(t−t₁)} v₀ₖ e^{−iH₁ₖ(t₁−t₂)} v₀ₖ† e^{−iH₀t₂}|i⟩.
//! ```
//!
//! In the eigenbases of `H₀` and `H₁ₖ` the double integral of the three
//! exponentials is the second divided difference of `u ↦ e^{ut}`, so the
//! correction is evaluated in closed form.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cute::{build_h0, build_h1k, BlockHamiltonian, CavityParams, Partition};
use crate::dynamics::{h0_eigenstates, TimeGrid};
use crate::error::{Error, Result};
use crate::fockspace::Ensemble;
use crate::linalg::{eig, eigh, Eigen};
use crate::vibronic::VibronicStructure;
use crate::C64;

pub const DEFAULT_DARK_THRESHOLD: f64 = 1e-3;

/// Taylor expansion of the divided difference is used when all points lie
/// within this distance of each other, in units of `1/t`.
const CLUSTER: f64 = 1e-2;

/// `(e^w − 1)/w`.
fn phi1(w: C64) -> C64 {
    if w.norm() < 0.5 {
        let mut term = C64::from(1.0);
        let mut sum = term;
        for n in 2..40 {
            term *= w / n as f64;
            sum += term;
            if term.norm() < 1e-18 * sum.norm() {
                break;
            }
        }
        sum
    } else {
        (w.exp() - 1.0) / w
    }
}

/// First divided difference of `u ↦ e^{ut}` at `p, q`.
fn dd1_exp(p: C64, q: C64, t: f64) -> C64 {
    (q * t).exp() * t * phi1((p - q) * t)
}

/// Second divided difference of `u ↦ e^{ut}` at `x, y, z`, which equals
/// `∫₀ᵗdt₁ ∫₀^{t₁}dt₂ e^{x(t−t₁) + y(t₁−t₂) + z t₂}`.
pub fn dd2_exp(x: C64, y: C64, z: C64, t: f64) -> C64 {
    if t == 0.0 {
        return C64::from(0.0);
    }
    let pts = [x, y, z];
    let pairs = [(0, 1, 2), (1, 2, 0), (0, 2, 1)];
    let (p, r, q) = pairs
        .iter()
        .copied()
        .max_by(|a, b| {
            (pts[a.0] - pts[a.1])
                .norm()
                .total_cmp(&(pts[b.0] - pts[b.1]).norm())
        })
        .unwrap();
    if (pts[p] - pts[r]).norm() * t.abs() >= CLUSTER {
        dd2_split(pts[p], pts[q], pts[r], t)
    } else {
        dd2_taylor(x, y, z, t)
    }
}

/// Recursive formula with the most separated pair `p, r` as divisor.
fn dd2_split(p: C64, q: C64, r: C64, t: f64) -> C64 {
    (dd1_exp(p, q, t) - dd1_exp(q, r, t)) / (p - r)
}

/// `e^{ct} Σₙ tⁿ/n! h_{n−2}(x − c, y − c, z − c)` about the centroid `c`,
/// with `h` the complete homogeneous symmetric polynomials.
fn dd2_taylor(x: C64, y: C64, z: C64, t: f64) -> C64 {
    let c = (x + y + z) / 3.0;
    let (a, b, d) = (x - c, y - c, z - c);
    let mut h_bd = C64::from(1.0);
    let mut h_abd = C64::from(1.0);
    let mut d_pow = C64::from(1.0);
    let mut coeff = t * t / 2.0;
    let mut sum = coeff * h_abd;
    for n in 3..60 {
        d_pow *= d;
        h_bd = d_pow + b * h_bd;
        h_abd = h_bd + a * h_abd;
        coeff *= t / n as f64;
        let term = coeff * h_abd;
        sum += term;
        if term.norm() < 1e-18 * sum.norm() {
            break;
        }
    }
    (c * t).exp() * sum
}

/// Treatment of the first quasi block in the correction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Block1 {
    /// Exact sub-blocks with collective coupling `g√(N−1)`.
    Exact,
    /// `H₀ + ω_g,k·I`, reusing the eigendecomposition of `H₀`.
    Shifted,
}

#[derive(Debug, Clone)]
pub struct ExpansionResult {
    pub grid: TimeGrid,
    pub ensemble: Ensemble,
    /// Infinite-ensemble survival amplitude `⟨i|e^{−iH₀t}|i⟩`.
    pub c1_t: Vec<C64>,
    /// Leading `1/N` correction.
    pub c_corr_t: Vec<C64>,
    /// `N·c_corr`, the `N`-independent coefficient of the correction. For an
    /// infinite ensemble this is its limiting value while `c_corr_t` is zero.
    pub scaled_corr_t: Vec<C64>,
}

impl ExpansionResult {
    pub fn total(&self) -> Vec<C64> {
        self.c1_t
            .iter()
            .zip(&self.c_corr_t)
            .map(|(a, b)| a + b)
            .collect()
    }
}

fn with_leakage(mut h: DMatrix<C64>, kappa: f64) -> DMatrix<C64> {
    h[(0, 0)] -= C64::new(0.0, 0.5 * kappa);
    h
}

fn decompose(h: DMatrix<C64>, kappa: f64) -> Result<Eigen> {
    if kappa == 0.0 {
        Ok(Eigen::from_hermitian(&eigh(&h)?))
    } else {
        eig(&with_leakage(h, kappa))
    }
}

/// Second-order correction terms of one sub-block `k`:
/// `α_a β_b γ_a'` with exponents `λ_a`, `μ_b`, `λ_a'`.
struct Channel {
    alpha: Vec<C64>,
    beta: Vec<C64>,
    gamma: Vec<C64>,
    mu: Vec<C64>,
}

/// Survival amplitude of a zeroth-block state to leading order in `1/N`.
///
/// `psi0` is given in the zeroth-block basis `(|1⟩, |e₁⟩, …, |e_m⟩)`; use
/// [`restrict_to_block0`] to obtain it from a full-basis vector. Leakage
/// `cav.kappa` acts on the photon state of every block.
pub fn survival_correction(
    vs: &VibronicStructure,
    cav: &CavityParams,
    psi0: &DVector<C64>,
    grid: TimeGrid,
    block1: Block1,
) -> Result<ExpansionResult> {
    cav.validate()?;
    grid.validate()?;
    let m = vs.m();
    if psi0.len() != m + 1 {
        return Err(Error::DimensionMismatch {
            context: "zeroth-block initial state",
            expected: m + 1,
            got: psi0.len(),
        });
    }
    if (psi0.norm() - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidParameter(format!(
            "initial state must be normalized, norm = {}",
            psi0.norm()
        )));
    }

    let e0 = decompose(build_h0(vs, cav), cav.kappa)?;
    let left = e0.vectors.transpose() * psi0.conjugate();
    let right = &e0.inverse * psi0;
    let x: Vec<C64> = e0.values.iter().map(|l| -C64::i() * l).collect();
    let w0: Vec<C64> = (0..=m).map(|a| left[a] * right[a]).collect();

    // Coupling strength of v: single-molecule g, or g√N for the scaled limit.
    let (g_eff, scale) = match cav.ensemble {
        Ensemble::Finite(n) => (cav.single_molecule_coupling(), n as f64),
        Ensemble::Infinite => (cav.g_sqrt_n, 1.0),
    };
    let block1 = if cav.ensemble.is_finite() {
        block1
    } else {
        Block1::Shifted
    };

    let channels = (1..m)
        .map(|k| {
            let u = DVector::from_iterator(
                m + 1,
                std::iter::once(C64::from(0.0))
                    .chain((0..m).map(|i| C64::from(g_eff * vs.fc[(i, k)]))),
            );
            let wu = &e0.inverse * &u;
            let uv = e0.vectors.adjoint() * &u;
            let alpha = (0..=m).map(|a| left[a] * wu[a]).collect();
            let gamma = (0..=m).map(|a| uv[a].conj() * right[a]).collect();
            let (beta, mu) = match block1 {
                Block1::Shifted => {
                    let shift = C64::from(vs.omega_g[k]);
                    (
                        (0..=m)
                            .map(|b| e0.vectors[(0, b)] * e0.inverse[(b, 0)])
                            .collect(),
                        e0.values.iter().map(|l| -C64::i() * (l + shift)).collect(),
                    )
                }
                Block1::Exact => {
                    let e1 = decompose(build_h1k(vs, cav, k)?, cav.kappa)?;
                    (
                        (0..=m)
                            .map(|b| e1.vectors[(0, b)] * e1.inverse[(b, 0)])
                            .collect(),
                        e1.values.iter().map(|l| -C64::i() * l).collect(),
                    )
                }
            };
            Ok(Channel {
                alpha,
                beta,
                gamma,
                mu,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let times = grid.times();
    let c1_t: Vec<C64> = times
        .iter()
        .map(|&t| w0.iter().zip(&x).map(|(w, xa)| w * (xa * t).exp()).sum())
        .collect();
    let raw: Vec<C64> = times
        .par_iter()
        .map(|&t| {
            let mut total = C64::from(0.0);
            for ch in &channels {
                for (a, xa) in x.iter().enumerate() {
                    if ch.alpha[a] == C64::from(0.0) {
                        continue;
                    }
                    for (b, yb) in ch.mu.iter().enumerate() {
                        let ab = ch.alpha[a] * ch.beta[b];
                        for (a2, za) in x.iter().enumerate() {
                            total += ab * ch.gamma[a2] * dd2_exp(*xa, *yb, *za, t);
                        }
                    }
                }
            }
            -total
        })
        .collect();

    let (c_corr_t, scaled_corr_t) = match cav.ensemble {
        Ensemble::Finite(_) => {
            let scaled = raw.iter().map(|c| c * scale).collect();
            (raw, scaled)
        }
        Ensemble::Infinite => (vec![C64::from(0.0); raw.len()], raw),
    };
    Ok(ExpansionResult {
        grid,
        ensemble: cav.ensemble,
        c1_t,
        c_corr_t,
        scaled_corr_t,
    })
}

/// Zeroth-block coordinates of a full-basis vector of a quasi-partitioned
/// Hamiltonian. Fails if more than `1e−12` of the weight lies elsewhere.
pub fn restrict_to_block0(bh: &BlockHamiltonian, psi: &DVector<C64>) -> Result<DVector<C64>> {
    if bh.partition != Partition::Quasi || bh.labels.first() != Some(&0) {
        return Err(Error::InvalidParameter(
            "Hamiltonian has no zeroth quasi block".into(),
        ));
    }
    if psi.len() != bh.dim() {
        return Err(Error::DimensionMismatch {
            context: "full-basis state",
            expected: bh.dim(),
            got: psi.len(),
        });
    }
    let range = bh.ranges[0].clone();
    let outside: f64 = psi
        .iter()
        .enumerate()
        .filter(|(j, _)| !range.contains(j))
        .map(|(_, z)| z.norm_sqr())
        .sum();
    if outside > 1e-12 {
        return Err(Error::OutsideZerothBlock(outside));
    }
    Ok(psi.rows(range.start, range.len()).into_owned())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateChannel {
    /// Vibronic ground state left behind (0-based, `k ≥ 1`).
    pub k: usize,
    pub omega_g: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub dark_index: usize,
    #[serde(rename = "E_D")]
    pub e_d: f64,
    pub photonic_weight: f64,
    #[serde(rename = "Gamma_total")]
    pub gamma_total: f64,
    /// `κ·|⟨1|D⟩|²`, the dark state's own leakage, not part of `Γ`.
    pub direct_leakage: f64,
    pub channels: Vec<RateChannel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
}

/// Rate at which the `H₀` eigenstate `dark_index` decays through `v₀ₖ` into
/// the leaky first quasi block, to second order in `v`:
/// `Γ = −2 Σₖ Im ⟨D|v₀ₖ (E_D − H₁ₖ + iκ/2·n̂)⁻¹ v₀ₖ†|D⟩`.
///
/// Near an isolated final state this is the golden rule with a Lorentzian of
/// width `κ·|⟨1|f⟩|²`; away from resonance it keeps the interference between
/// final states that share the photon.
pub fn radiative_pumping_rate(
    vs: &VibronicStructure,
    cav: &CavityParams,
    dark_index: usize,
    threshold: f64,
) -> Result<RateReport> {
    cav.validate()?;
    if !cav.ensemble.is_finite() {
        return Err(Error::InfiniteEnsemble("radiative pumping rate"));
    }
    let eig = h0_eigenstates(vs, cav)?;
    if dark_index >= eig.energies.len() {
        return Err(Error::IndexOutOfRange {
            what: "H0 eigenstate",
            index: dark_index,
            len: eig.energies.len(),
        });
    }
    let weight = eig.photonic_weights[dark_index];
    if weight >= threshold {
        return Err(Error::NotDark {
            index: dark_index,
            weight,
            threshold,
        });
    }
    let e_d = eig.energies[dark_index];
    let dark = eig.vectors.column(dark_index);
    let g = cav.single_molecule_coupling();
    let m = vs.m();

    let channels: Vec<RateChannel> = (1..m)
        .into_par_iter()
        .map(|k| {
            // v₀ₖ†|D⟩ lies entirely on |g_k 1⟩.
            let amp: C64 = (0..m).map(|i| g * vs.fc[(i, k)] * dark[i + 1]).sum();
            let h1 = build_h1k(vs, cav, k)?;
            let resolvent = arrowhead_corner_resolvent(&h1, e_d, cav.kappa);
            let gamma = -2.0 * amp.norm_sqr() * resolvent.im;
            Ok(RateChannel {
                k,
                omega_g: vs.omega_g[k],
                gamma,
            })
        })
        .collect::<Result<_>>()?;
    let gamma_total: f64 = channels.iter().map(|c| c.gamma).sum();
    let diagnostic = if cav.kappa == 0.0 {
        Some("no leakage: final states have zero width".to_string())
    } else if gamma_total == 0.0 {
        Some("no final state couples to the dark state".to_string())
    } else {
        None
    };
    Ok(RateReport {
        dark_index,
        e_d,
        photonic_weight: weight,
        gamma_total,
        direct_leakage: cav.kappa * weight,
        channels,
        diagnostic,
    })
}

/// `⟨1|(E − H + iκ/2·|1⟩⟨1|)⁻¹|1⟩` for an arrowhead `H` with the photon in
/// the corner, by Schur complement. States degenerate with `E` that do not
/// couple to the photon drop out; a coupled one pins the element to zero.
fn arrowhead_corner_resolvent(h: &DMatrix<C64>, e: f64, kappa: f64) -> C64 {
    let mut self_energy = C64::new(0.0, 0.0);
    for i in 1..h.nrows() {
        let x = h[(0, i)].norm_sqr();
        if x == 0.0 {
            continue;
        }
        let detuning = e - h[(i, i)].re;
        if detuning == 0.0 {
            return C64::new(0.0, 0.0);
        }
        self_energy += x / detuning;
    }
    1.0 / (C64::new(e - h[(0, 0)].re, 0.5 * kappa) - self_energy)
}
