use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{TimeGrid, Trajectory};
use crate::cute::{build_h0, CavityParams};
use crate::error::{Error, Result};
use crate::linalg::{eig, eigh, Eigen};
use crate::sparse::{SparseMatrix, DENSE_LIMIT};
use crate::vibronic::VibronicStructure;
use crate::C64;

const MAX_KRYLOV: usize = 40;
const KRYLOV_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Spectral up to the dense limit (stepping if the eigenvectors are
    /// ill-conditioned), Krylov beyond it.
    Auto,
    /// `V e^{−iΛt} V⁻¹` from a dense eigendecomposition of `H_eff`.
    Spectral,
    /// Repeated application of the dense one-step propagator `e^{−iH_eff dt}`.
    Stepping,
    /// Arnoldi approximation of `e^{−iH_eff τ}ψ` with adaptive substeps.
    Krylov,
    /// Classical fourth-order Runge–Kutta with fixed substeps per grid step.
    Rk4 { substeps: usize },
}

enum Kind {
    Spectral(Eigen),
    Stepping(DMatrix<C64>),
    Krylov(SparseMatrix),
    Rk4 { h: DMatrix<C64>, substeps: usize },
}

/// Evolution under `H_eff = H − i(κ/2)·n̂_ph` on a fixed time grid.
pub struct Propagator {
    grid: TimeGrid,
    dim: usize,
    kind: Kind,
}

fn i() -> C64 {
    C64::new(0.0, 1.0)
}

impl Propagator {
    /// `photons[j]` is the photon number of basis state `j`.
    pub fn new(
        h: &SparseMatrix,
        photons: &[f64],
        kappa: f64,
        grid: TimeGrid,
        method: Method,
    ) -> Result<Self> {
        grid.validate()?;
        let dim = h.nrows();
        if h.ncols() != dim {
            return Err(Error::DimensionMismatch {
                context: "Hamiltonian must be square",
                expected: dim,
                got: h.ncols(),
            });
        }
        if photons.len() != dim {
            return Err(Error::DimensionMismatch {
                context: "photon numbers",
                expected: dim,
                got: photons.len(),
            });
        }
        if !(kappa.is_finite() && kappa >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "cavity leakage must be non-negative, got {kappa}"
            )));
        }
        if h.triplets()
            .iter()
            .any(|(_, _, z)| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(Error::NonFinite("Hamiltonian"));
        }
        let scale = h.triplets().iter().map(|t| t.2.norm()).fold(1.0, f64::max);
        let defect = h.hermiticity_defect();
        if defect > 1e-10 * scale {
            return Err(Error::NotSymmetric(defect));
        }

        let leak: Vec<(usize, usize, C64)> = photons
            .iter()
            .enumerate()
            .filter(|(_, &n)| n != 0.0 && kappa != 0.0)
            .map(|(j, &n)| (j, j, C64::new(0.0, -0.5 * kappa * n)))
            .collect();
        let hermitian = leak.is_empty();
        let h_eff = h.add(&SparseMatrix::from_triplets(dim, dim, leak));

        let method = match method {
            Method::Auto if dim > DENSE_LIMIT => Method::Krylov,
            other => other,
        };
        let kind = match method {
            Method::Auto | Method::Spectral => {
                let dense = h_eff.to_dense()?;
                let decomposition = if hermitian {
                    eigh(&dense).map(|e| Eigen::from_hermitian(&e))
                } else {
                    eig(&dense)
                };
                match (decomposition, method) {
                    (Ok(e), _) => Kind::Spectral(e),
                    (Err(_), Method::Auto) => Kind::Stepping(step_matrix(&dense, grid.dt())),
                    (Err(e), _) => return Err(e),
                }
            }
            Method::Stepping => Kind::Stepping(step_matrix(&h_eff.to_dense()?, grid.dt())),
            Method::Krylov => Kind::Krylov(h_eff),
            Method::Rk4 { substeps } => {
                if substeps == 0 {
                    return Err(Error::InvalidParameter(
                        "rk4 needs at least one substep".into(),
                    ));
                }
                Kind::Rk4 {
                    h: h_eff.to_dense()?,
                    substeps,
                }
            }
        };
        Ok(Self { grid, dim, kind })
    }

    pub fn method(&self) -> Method {
        match &self.kind {
            Kind::Spectral(_) => Method::Spectral,
            Kind::Stepping(_) => Method::Stepping,
            Kind::Krylov(_) => Method::Krylov,
            Kind::Rk4 { substeps, .. } => Method::Rk4 {
                substeps: *substeps,
            },
        }
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    fn check_state(&self, psi0: &DVector<C64>) -> Result<()> {
        if psi0.len() != self.dim {
            return Err(Error::DimensionMismatch {
                context: "initial state",
                expected: self.dim,
                got: psi0.len(),
            });
        }
        if psi0.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("initial state"));
        }
        Ok(())
    }

    /// Calls `visit(n, ψ(tₙ))` for every grid point in order.
    pub fn run<F>(&self, psi0: &DVector<C64>, mut visit: F) -> Result<()>
    where
        F: FnMut(usize, &DVector<C64>),
    {
        self.check_state(psi0)?;
        let dt = self.grid.dt();
        match &self.kind {
            Kind::Spectral(e) => {
                let b = &e.inverse * psi0;
                let mut coeff = b.clone();
                for n in 0..self.grid.len() {
                    let t = self.grid.time(n);
                    for k in 0..coeff.len() {
                        coeff[k] = b[k] * (-i() * e.values[k] * t).exp();
                    }
                    visit(n, &(&e.vectors * &coeff));
                }
            }
            Kind::Stepping(u) => {
                let mut psi = psi0.clone();
                visit(0, &psi);
                for n in 1..self.grid.len() {
                    psi = u * &psi;
                    visit(n, &psi);
                }
            }
            Kind::Krylov(h) => {
                let mut psi = psi0.clone();
                visit(0, &psi);
                for n in 1..self.grid.len() {
                    psi = krylov_step(h, &psi, dt)?;
                    visit(n, &psi);
                }
            }
            Kind::Rk4 { h, substeps } => {
                let tau = dt / *substeps as f64;
                let f = |v: &DVector<C64>| -(h * v) * i();
                let mut psi = psi0.clone();
                visit(0, &psi);
                for n in 1..self.grid.len() {
                    for _ in 0..*substeps {
                        let k1 = f(&psi);
                        let k2 = f(&(&psi + &k1 * C64::from(0.5 * tau)));
                        let k3 = f(&(&psi + &k2 * C64::from(0.5 * tau)));
                        let k4 = f(&(&psi + &k3 * C64::from(tau)));
                        psi += (k1 + k2 * C64::from(2.0) + k3 * C64::from(2.0) + k4)
                            * C64::from(tau / 6.0);
                    }
                    visit(n, &psi);
                }
            }
        }
        Ok(())
    }

    /// `⟨ψ₀|ψ(tₙ)⟩` only; linear in the dimension per step for the spectral
    /// method.
    pub fn survival(&self, psi0: &DVector<C64>) -> Result<Vec<C64>> {
        self.check_state(psi0)?;
        match &self.kind {
            Kind::Spectral(e) => {
                let b = &e.inverse * psi0;
                let left = e.vectors.adjoint() * psi0;
                let weights: Vec<C64> = (0..b.len()).map(|k| left[k].conj() * b[k]).collect();
                Ok((0..self.grid.len())
                    .map(|n| {
                        let t = self.grid.time(n);
                        weights
                            .iter()
                            .zip(e.values.iter())
                            .map(|(w, l)| w * (-i() * l * t).exp())
                            .sum()
                    })
                    .collect())
            }
            _ => {
                let mut out = Vec::with_capacity(self.grid.len());
                self.run(psi0, |_, psi| out.push(psi0.dotc(psi)))?;
                Ok(out)
            }
        }
    }
}

fn step_matrix(h: &DMatrix<C64>, dt: f64) -> DMatrix<C64> {
    (h * (-i() * dt)).exp()
}

/// One grid step of `e^{−iHdt}ψ`, split into substeps until the Arnoldi
/// error estimate falls below tolerance.
fn krylov_step(h: &SparseMatrix, psi: &DVector<C64>, dt: f64) -> Result<DVector<C64>> {
    let mut psi = psi.clone();
    let mut remaining = dt;
    while remaining > dt * 1e-14 {
        let beta = psi.norm();
        if beta == 0.0 {
            return Ok(psi);
        }
        let mut basis = vec![&psi / C64::from(beta)];
        let mut hess = DMatrix::<C64>::zeros(MAX_KRYLOV + 1, MAX_KRYLOV);
        let mut dim = MAX_KRYLOV;
        let mut exact = false;
        for j in 0..MAX_KRYLOV {
            let mut w = h.mul_vec(&basis[j]);
            let scale = w.norm().max(1e-300);
            // Two passes of Gram–Schmidt keep the basis orthonormal.
            for _ in 0..2 {
                for (k, v) in basis.iter().enumerate() {
                    let c = v.dotc(&w);
                    hess[(k, j)] += c;
                    w -= v * c;
                }
            }
            let norm = w.norm();
            hess[(j + 1, j)] = C64::from(norm);
            if norm <= 1e-13 * scale {
                dim = j + 1;
                exact = true;
                break;
            }
            basis.push(w / C64::from(norm));
        }
        let small = hess.view((0, 0), (dim, dim)).into_owned();
        let mut tau = remaining;
        loop {
            let e = (&small * (-i() * tau)).exp();
            let err = if exact {
                0.0
            } else {
                beta * hess[(dim, dim - 1)].norm() * e[(dim - 1, 0)].norm()
            };
            if err <= KRYLOV_TOL * tau / dt {
                let mut next = DVector::zeros(psi.len());
                for (k, v) in basis.iter().take(dim).enumerate() {
                    next += v * (e[(k, 0)] * beta);
                }
                psi = next;
                remaining -= tau;
                break;
            }
            tau *= 0.5;
            if tau < dt * 1e-8 {
                return Err(Error::Eigensolver(format!(
                    "Krylov step failed to converge (error {err:.2e})"
                )));
            }
        }
        if psi.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("Krylov propagation"));
        }
    }
    Ok(psi)
}

/// Evolves a normalized state and records survival amplitude and norm.
pub fn propagate(
    h: &SparseMatrix,
    photons: &[f64],
    psi0: &DVector<C64>,
    grid: TimeGrid,
    kappa: f64,
    method: Method,
) -> Result<Trajectory> {
    let norm = psi0.norm();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidParameter(format!(
            "initial state must be normalized, norm = {norm}"
        )));
    }
    let prop = Propagator::new(h, photons, kappa, grid, method)?;
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

/// Linear response of the cavity in the infinite-ensemble limit:
/// `−i⟨1|e^{−iH₀t}|1⟩` with leakage included in `H₀`.
pub fn filter_response(
    vs: &VibronicStructure,
    cav: &CavityParams,
    grid: TimeGrid,
) -> Result<Vec<C64>> {
    cav.validate()?;
    let h0 = SparseMatrix::from_dense(&build_h0(vs, cav));
    let mut photons = vec![0.0; vs.m() + 1];
    photons[0] = 1.0;
    let mut psi0 = DVector::zeros(vs.m() + 1);
    psi0[0] = C64::from(1.0);
    let prop = Propagator::new(&h0, &photons, cav.kappa, grid, Method::Auto)?;
    Ok(prop
        .survival(&psi0)?
        .into_iter()
        .map(|c| -i() * c)
        .collect())
}
