//! End-to-end acceptance criteria. Runs as a plain binary so every criterion
//! reports a single line even when an earlier one fails.

use std::panic::{self, AssertUnwindSafe};
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use polariton::cute::{assemble, assemble_high_excitation, assemble_truncated, build_h0};
use polariton::dynamics::{
    dark_state_density, h0_eigenstates, propagate, spectrum, transform, FrequencyGrid, Method,
    Propagator, TimeGrid, Window,
};
use polariton::fockspace::{conserved_check, QuasiBand, SymState};
use polariton::linalg::{eig, eigh, max_abs};
use polariton::oracle::Oracle;
use polariton::perturbation::{
    radiative_pumping_rate, survival_correction, Block1, DEFAULT_DARK_THRESHOLD,
};
use polariton::{
    CavityParams, Ensemble, MolecularModel, SparseMatrix, VibrationalMode, VibronicStructure, C64,
};

type Outcome = Result<String, String>;

/// `(ω₀, modes, ω_c, g√N, κ)`
type Fixture = (f64, &'static [(f64, f64, usize)], f64, f64, f64);

type Criterion = (&'static str, fn() -> Outcome, Duration);

fn vib(omega0: f64, modes: &[(f64, f64, usize)]) -> VibronicStructure {
    let modes = modes
        .iter()
        .map(|&(w, s, n)| VibrationalMode::new(w, s, n))
        .collect();
    polariton::vibronic::build_vibronic(&MolecularModel::new(omega0, modes)).unwrap()
}

fn unit(dim: usize, j: usize) -> DVector<C64> {
    let mut v = DVector::zeros(dim);
    v[j] = C64::new(1.0, 0.0);
    v
}

fn max_diff(a: &[C64], b: &[C64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

fn max_norm(a: &[C64]) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_1() -> Outcome {
    // each with m ≤ 4
    let fixtures: [Fixture; 3] = [
        (0.1034, &[(0.0123, 0.37, 3)], 0.1087, 0.027, 0.0),
        (
            0.0970,
            &[(0.011, 0.8, 1), (0.0047, 1.3, 1)],
            0.1130,
            0.031,
            0.0012,
        ),
        (0.1012, &[(0.0089, 2.1, 2)], 0.0995, 0.019, 0.0),
    ];
    let (mut worst_h, mut worst_c) = (0.0f64, 0.0f64);
    for (omega0, modes, wc, big_g, kappa) in fixtures {
        let vs = vib(omega0, modes);
        assert!(vs.m() <= 4);
        for n in [1u64, 2, 3] {
            let cav = CavityParams::new(wc, big_g, n, kappa);
            let oracle = Oracle::new(&vs, &cav, 1).unwrap();
            let bh = assemble_truncated(&vs, &cav, n).unwrap();
            let cute = bh.full();
            worst_h = worst_h.max(max_abs(
                &(oracle.symmetric_hamiltonian().unwrap() - cute.to_dense().unwrap()),
            ));

            let dim = bh.dim();
            let mut psi = DVector::from_fn(dim, |j, _| {
                let x = j as f64;
                C64::new((1.3 * x + 0.7).sin(), (0.9 * x + 0.2).cos())
            });
            psi /= C64::from(psi.norm());
            let grid = TimeGrid::new(10.0 / big_g, 500).unwrap();
            let brute = oracle.survival(&psi, grid).unwrap();
            let sym =
                propagate(&cute, &bh.photon_counts(), &psi, grid, kappa, Method::Auto).unwrap();
            worst_c = worst_c.max(max_diff(&brute.c_t, &sym.c_t));
        }
    }
    check(
        worst_h < 1e-12 && worst_c < 1e-10,
        format!("max |ΔH| = {worst_h:.2e} (tol 1e-12), max |Δc| = {worst_c:.2e} (tol 1e-10)"),
    )
}

fn reference_and_exact(vs: &VibronicStructure, n: u64, grid: TimeGrid) -> (Vec<C64>, Vec<C64>) {
    let cav = CavityParams::new(0.105, 0.03, n, 0.0);
    let h0 = SparseMatrix::from_dense(&build_h0(vs, &cav));
    let mut ph0 = vec![0.0; h0.nrows()];
    ph0[0] = 1.0;
    let c1 = propagate(&h0, &ph0, &unit(h0.nrows(), 0), grid, 0.0, Method::Auto)
        .unwrap()
        .c_t;
    let bh = assemble(vs, &cav, 1, n).unwrap();
    let exact = propagate(
        &bh.full(),
        &bh.photon_counts(),
        &unit(bh.dim(), 0),
        grid,
        0.0,
        Method::Auto,
    )
    .unwrap()
    .c_t;
    (c1, exact)
}

fn criterion_2() -> Outcome {
    let vs = vib(0.1, &[(0.01, 0.5, 1)]);
    assert_eq!(vs.m(), 2);
    let grid = TimeGrid::new(333.0, 400).unwrap();
    let errors: Vec<f64> = [8u64, 16, 32]
        .iter()
        .map(|&n| {
            let (c1, exact) = reference_and_exact(&vs, n, grid);
            max_diff(&c1, &exact)
        })
        .collect();
    let r1 = errors[0] / errors[1];
    let r2 = errors[1] / errors[2];
    check(
        (r2 - 2.0).abs() <= 0.5,
        format!(
            "errors N=8,16,32: {:.3e}, {:.3e}, {:.3e}; ratio 8/16 = {r1:.3}, 16/32 = {r2:.3} (target 2 ± 25%)",
            errors[0], errors[1], errors[2]
        ),
    )
}

fn criterion_3() -> Outcome {
    let vs = vib(0.1, &[(0.01, 0.5, 2)]);
    let grid = TimeGrid::new(333.0, 400).unwrap();
    let psi0 = unit(vs.m() + 1, 0);

    let scaled: Vec<Vec<C64>> = [1000u64, 10000]
        .iter()
        .map(|&n| {
            let cav = CavityParams::new(0.105, 0.03, n, 0.0);
            survival_correction(&vs, &cav, &psi0, grid, Block1::Exact)
                .unwrap()
                .scaled_corr_t
        })
        .collect();
    let spread = max_diff(&scaled[0], &scaled[1]) / max_norm(&scaled[1]);

    let residual: Vec<f64> = [8u64, 16]
        .iter()
        .map(|&n| {
            let cav = CavityParams::new(0.105, 0.03, n, 0.0);
            let exp = survival_correction(&vs, &cav, &psi0, grid, Block1::Exact).unwrap();
            let (_, exact) = reference_and_exact(&vs, n, grid);
            max_diff(&exact, &exp.total())
        })
        .collect();
    let ratio = residual[0] / residual[1];
    check(
        spread < 0.01 && (ratio - 4.0).abs() <= 1.2,
        format!(
            "N·c_corr spread 1e3 vs 1e4 = {:.3}% (tol 1%); residual N=8 {:.3e}, N=16 {:.3e}, ratio {ratio:.3} (target 4 ± 30%)",
            100.0 * spread,
            residual[0],
            residual[1]
        ),
    )
}

/// Least-squares decay rate of `ln p(t)`.
fn fit_rate(t: &[f64], p: &[f64]) -> f64 {
    let y: Vec<f64> = p.iter().map(|x| x.ln()).collect();
    let n = t.len() as f64;
    let (mt, my) = (t.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let num: f64 = t.iter().zip(&y).map(|(a, b)| (a - mt) * (b - my)).sum();
    let den: f64 = t.iter().map(|a| (a - mt).powi(2)).sum();
    -num / den
}

fn criterion_4() -> Outcome {
    let vs = vib(0.1, &[(0.01, 1.0, 8)]);
    let (wc, big_g, kappa) = (0.11, 0.03, 0.0015);
    let rate = |n: u64| {
        let cav = CavityParams::new(wc, big_g, n, kappa);
        let eig = h0_eigenstates(&vs, &cav).unwrap();
        let dark = eig.lowest_dark(DEFAULT_DARK_THRESHOLD).unwrap();
        (
            cav,
            eig,
            dark,
            radiative_pumping_rate(&vs, &cav, dark, DEFAULT_DARK_THRESHOLD).unwrap(),
        )
    };
    let (cav, eig, dark, r1) = rate(1000);
    let (_, _, _, r2) = rate(2000);
    let scaling = r2.gamma_total / r1.gamma_total;

    let bh = assemble_truncated(&vs, &cav, 1).unwrap();
    let mut psi = DVector::zeros(bh.dim());
    for i in 0..=vs.m() {
        psi[i] = eig.vectors[(i, dark)];
    }
    let total = r1.gamma_total + r1.direct_leakage;
    let grid = TimeGrid::new(2.0 / total, 400).unwrap();
    let prop = Propagator::new(&bh.full(), &bh.photon_counts(), kappa, grid, Method::Auto).unwrap();
    let mut pop = Vec::with_capacity(grid.len());
    prop.run(&psi, |_, v| pop.push(psi.dotc(v).norm_sqr()))
        .unwrap();
    let start = grid.len() / 10;
    let fitted = fit_rate(&grid.times()[start..], &pop[start..]);
    let pumping = fitted - r1.direct_leakage;
    let mismatch = (pumping - r1.gamma_total).abs() / r1.gamma_total;
    check(
        (scaling - 0.5).abs() <= 0.025 && mismatch <= 0.15,
        format!(
            "Γ(2000)/Γ(1000) = {scaling:.4} (target 0.5 ± 5%); Γ = {:.4e}, trajectory {:.4e} after removing direct leakage {:.3e}, mismatch {:.1}% (tol 15%)",
            r1.gamma_total,
            pumping,
            r1.direct_leakage,
            100.0 * mismatch
        ),
    )
}

fn fig5() -> (VibronicStructure, CavityParams) {
    (
        vib(0.1, &[(0.01, 0.01, 2), (0.001, 16.0, 48)]),
        CavityParams::new(0.1161, 0.03, Ensemble::Infinite, 0.0015),
    )
}

fn golden_max(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - r * (b - a);
    let mut x2 = a + r * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while b - a > 1e-12 {
        if f1 > f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - r * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + r * (b - a);
            f2 = f(x2);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

fn criterion_5() -> Outcome {
    let (vs, cav) = fig5();
    let bh = assemble_truncated(&vs, &cav, 0).unwrap();
    let dim = bh.dim();
    let grid = TimeGrid::new(65536.0, 65536).unwrap();
    let c_t = propagate(
        &bh.full(),
        &bh.photon_counts(),
        &unit(dim, 0),
        grid,
        cav.kappa,
        Method::Stepping,
    )
    .unwrap()
    .c_t;

    // Pole oracle: c(tₙ) = Σ_f r_f e^{−iλ_f n dt}, summed as geometric series
    // with the same trapezoid end weights.
    let mut h_eff = build_h0(&vs, &cav);
    h_eff[(0, 0)] -= C64::new(0.0, 0.5 * cav.kappa);
    let e = eig(&h_eff).unwrap();
    let residues: Vec<(C64, C64)> = (0..e.dim())
        .map(|f| (e.values[f], e.vectors[(0, f)] * e.inverse[(f, 0)]))
        .collect();
    let (dt, last) = (grid.dt(), grid.n_steps as i32);
    let oracle = |w: f64| -> f64 {
        residues
            .iter()
            .map(|&(lambda, r)| {
                let q = (C64::new(0.0, w * dt) - C64::new(0.0, dt) * lambda).exp();
                let sum = (C64::from(1.0) - q.powi(last + 1)) / (C64::from(1.0) - q);
                r * (sum - 0.5 * (C64::from(1.0) + q.powi(last)))
            })
            .sum::<C64>()
            .re
            * dt
    };
    let code = |w: f64| transform(&c_t, &grid, w, Window::None).unwrap();

    let freqs = FrequencyGrid::new(0.05, 0.18, 5201).unwrap();
    let spec = spectrum(&c_t, &grid, &freqs, Window::None).unwrap();
    let scale = code(
        spec.omega[spec
            .intensity
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0],
    );
    let step = spec.omega[1] - spec.omega[0];
    let mut peaks = Vec::new();
    for k in 1..spec.omega.len() - 1 {
        let y = &spec.intensity;
        if y[k] >= 1e-2 && y[k] > y[k - 1] && y[k] >= y[k + 1] {
            let (lo, hi) = (spec.omega[k] - step, spec.omega[k] + step);
            let (wc_, hc) = golden_max(&code, lo, hi);
            let (wo, ho) = golden_max(&oracle, lo, hi);
            peaks.push((wc_, hc / scale, wo, ho / scale));
        }
    }
    let pos_err = peaks
        .iter()
        .map(|p| ((p.0 - p.2) / p.2).abs())
        .fold(0.0, f64::max);
    let height_err = peaks.iter().map(|p| (p.1 - p.3).abs()).fold(0.0, f64::max);

    let mut by_height = peaks.clone();
    by_height.sort_by(|a, b| b.1.total_cmp(&a.1));
    let straddle = by_height.len() >= 2 && {
        let (a, b) = (by_height[0].0, by_height[1].0);
        a.min(b) < cav.omega_c && a.max(b) > cav.omega_c
    };
    let eig0 = h0_eigenstates(&vs, &cav).unwrap();
    let nearest = |w: f64| {
        (0..eig0.energies.len())
            .min_by(|&a, &b| {
                (eig0.energies[a] - w)
                    .abs()
                    .total_cmp(&(eig0.energies[b] - w).abs())
            })
            .unwrap()
    };
    let (p0, p1) = (by_height[0].0, by_height.get(1).map_or(f64::NAN, |p| p.0));
    check(
        !peaks.is_empty() && pos_err < 1e-6 && height_err < 1e-6 && straddle,
        format!(
            "{} peaks; max relative position error {pos_err:.2e}, max height error {height_err:.2e} (tol 1e-6); dominant peaks {p0:.5} (H₀ level {:.5}, weight {:.3}) and {p1:.5} straddle ω_c = {}: {straddle}",
            peaks.len(),
            eig0.energies[nearest(p0)],
            eig0.photonic_weights[nearest(p0)],
            cav.omega_c
        ),
    )
}

fn criterion_6() -> Outcome {
    let (vs, cav) = fig5();
    let eig = h0_eigenstates(&vs, &cav).unwrap();
    let dark = eig
        .lowest_dark(DEFAULT_DARK_THRESHOLD)
        .ok_or("no near-dark eigenstate")?;
    let lp = eig
        .lower_polariton(cav.omega_c)
        .ok_or("no lower polariton")?;
    let d = vs.model.modes[1].displacement();
    let x: Vec<f64> = (0..=1600).map(|k| -4.0 + 0.01 * k as f64).collect();
    let peak = |k: usize| {
        let rho = dark_state_density(&vs, &cav, k)
            .unwrap()
            .coordinate_density(1, &x)
            .unwrap();
        x[(0..rho.len())
            .max_by(|&a, &b| rho[a].total_cmp(&rho[b]))
            .unwrap()]
    };
    let (x_dark, x_lp) = (peak(dark), peak(lp));
    check(
        (x_dark - d).abs() < x_dark.abs() && x_lp.abs() < (x_lp - d).abs(),
        format!(
            "excited minimum at {d:.3}; dark state (E = {:.5}, weight {:.1e}) peaks at {x_dark:.2}, lower polariton (E = {:.5}) at {x_lp:.2}",
            eig.energies[dark], eig.photonic_weights[dark], eig.energies[lp]
        ),
    )
}

fn criterion_7() -> Outcome {
    let vs = vib(0.1, &[(0.01, 0.7, 1), (0.004, 1.2, 1)]);
    let mut problems = Vec::new();
    for (ens, n_exc, q_max) in [
        (Ensemble::Finite(5), 1u64, 2u64),
        (Ensemble::Finite(5), 2, 3),
        (Ensemble::Finite(3), 2, 3),
        (Ensemble::Infinite, 2, 2),
    ] {
        let cav = CavityParams::new(0.11, 0.03, ens, 0.0);
        let bh = assemble(&vs, &cav, n_exc, q_max).unwrap();
        let h = bh.full();
        if h.hermiticity_defect() != 0.0 {
            problems.push(format!(
                "{ens:?}: hermiticity defect {:.1e}",
                h.hermiticity_defect()
            ));
        }
        let v = conserved_check(&bh.basis, &h, QuasiBand::Tridiagonal);
        let w = conserved_check(&bh.basis, &bh.collective, QuasiBand::Diagonal);
        if !v.is_empty() || !w.is_empty() {
            problems.push(format!(
                "{ens:?}, N_exc = {n_exc}: {} violations",
                v.len() + w.len()
            ));
        }
    }
    let g = 0.005;
    let mut worst = 0.0f64;
    for n in [4u64, 9, 16] {
        let cav = CavityParams::new(0.11, g * (n as f64).sqrt(), n, 0.0);
        let bh = assemble_truncated(&vs, &cav, 1).unwrap();
        let m = vs.m();
        let ground = |n_g0: u64| {
            let mut n_g = vec![0; m];
            n_g[0] = n_g0;
            n_g
        };
        let ph = SymState {
            n_g: ground(n),
            n_e: vec![0; m],
            n_ph: 1,
        };
        let col = bh.basis.index_of(&ph).unwrap();
        for i in 0..m {
            let mut n_e = vec![0; m];
            n_e[i] = 1;
            let exc = SymState {
                n_g: ground(n - 1),
                n_e,
                n_ph: 0,
            };
            let element = bh.full().get(bh.basis.index_of(&exc).unwrap(), col).re;
            let expect = (n as f64).sqrt() * g * vs.fc[(i, 0)];
            worst = worst.max((element - expect).abs());
        }
    }
    if worst >= 1e-12 {
        problems.push(format!("collective coupling off by {worst:.1e}"));
    }
    check(
        problems.is_empty(),
        if problems.is_empty() {
            format!("Hermitian, N and N_exc conserved, block-tridiagonal; √N amplification error {worst:.1e}")
        } else {
            problems.join("; ")
        },
    )
}

fn criterion_8() -> Outcome {
    let vs = vib(0.1, &[(0.01, 0.9, 3)]);
    let mut h0_diff = 0.0f64;
    for ens in [Ensemble::Infinite, Ensemble::Finite(25)] {
        let cav = CavityParams::new(0.108, 0.03, ens, 0.0);
        let bh = assemble_high_excitation(&vs, &cav, 1).unwrap();
        h0_diff = h0_diff.max(max_abs(
            &(bh.full().to_dense().unwrap() - build_h0(&vs, &cav)),
        ));
    }

    let (w0, wc, big_g, n) = (0.1, 0.107, 0.03, 10u64);
    let two_level = polariton::vibronic::build_vibronic(&MolecularModel::two_level(w0)).unwrap();
    let cav = CavityParams::new(wc, big_g, n, 0.0);
    let bh = assemble_high_excitation(&two_level, &cav, 2).unwrap();
    let g = big_g / (n as f64).sqrt();
    // |2 ph⟩, |1 ph, 1 e⟩, |0 ph, 2 e⟩
    let a = g * (2.0 * n as f64).sqrt();
    let b = g * (2.0 * (n - 1) as f64).sqrt();
    let hand = DMatrix::from_row_slice(3, 3, &[2.0 * wc, a, 0.0, a, wc + w0, b, 0.0, b, 2.0 * w0])
        .map(C64::from);
    let e_hand = eigh(&hand).unwrap().values;
    let e_code = eigh(&bh.full().to_dense().unwrap()).unwrap().values;
    let eig_diff = (&e_hand - &e_code).amax();
    check(
        h0_diff < 1e-15 && eig_diff < 1e-12,
        format!("N_exc = 1 vs H₀: {h0_diff:.1e}; N_exc = 2, m = 1 eigenvalues vs hand 3×3: {eig_diff:.1e} (tol 1e-12)"),
    )
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("oracle equivalence", criterion_1, Duration::from_secs(60)),
        ("N→∞ exactness", criterion_2, Duration::from_secs(300)),
        ("1/N expansion", criterion_3, Duration::from_secs(300)),
        ("radiative pumping", criterion_4, Duration::from_secs(300)),
        ("infinite-N spectrum", criterion_5, Duration::from_secs(120)),
        ("dark-state geometry", criterion_6, Duration::from_secs(120)),
        (
            "structural invariants",
            criterion_7,
            Duration::from_secs(60),
        ),
        (
            "high-excitation construction",
            criterion_8,
            Duration::from_secs(1),
        ),
    ];
    let mut failed = 0;
    for (k, (name, run, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            Err(format!(
                "panicked: {:?}",
                e.downcast_ref::<String>()
                    .map(String::as_str)
                    .or(e.downcast_ref::<&str>().copied())
            ))
        });
        let elapsed = start.elapsed();
        let (ok, detail) = match outcome {
            Ok(d) => (elapsed <= *budget, d),
            Err(d) => (false, d),
        };
        if !ok {
            failed += 1;
        }
        println!(
            "criterion {}: {} {name} [{:.2} s, budget {} s] {detail}",
            k + 1,
            if ok { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            budget.as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
