//! Task pipelines. Each writes its artifact atomically and returns a summary.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use nalgebra::DVector;
use polariton::cute::{assemble, assemble_truncated};
use polariton::dynamics::{
    dark_state_density, h0_eigenstates, propagate, spectrum, write_spectrum_csv,
    write_trajectory_csv, H0Eigenstates, Trajectory,
};
use polariton::linalg::max_abs;
use polariton::oracle::{Oracle, MAX_MOLECULES};
use polariton::perturbation::{radiative_pumping_rate, RateReport};
use polariton::vibronic::build_vibronic;
use polariton::{CavityParams, Ensemble, SymBasis, VibronicStructure, C64};
use serde::Serialize;
use tempfile::NamedTempFile;

use crate::config::{Initial, RunConfig, RunMethod, StateSelector, Task};
use crate::CliError;

/// Outcome of a run: the files written and, for `validate`, the verdict.
#[derive(Debug)]
pub struct Summary {
    pub files: Vec<PathBuf>,
    pub message: String,
    pub passed: bool,
}

/// Writes through a temporary file in the target directory, then renames.
fn write_atomic<F>(path: &Path, fill: F) -> Result<(), CliError>
where
    F: FnOnce(&mut dyn Write) -> Result<(), CliError>,
{
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let mut tmp = NamedTempFile::new_in(dir)?;
    {
        let mut w = BufWriter::new(tmp.as_file_mut());
        fill(&mut w)?;
        w.flush()?;
    }
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| CliError::Io(e.error))?;
    Ok(())
}

fn header(cfg: &RunConfig, task: Task, extra: &[String]) -> Vec<String> {
    let mut lines = vec![format!("polariton {task} {}", env!("CARGO_PKG_VERSION"))];
    lines.extend(cfg.to_toml().lines().map(str::to_string));
    lines.extend(extra.iter().cloned());
    lines
}

fn output_path(cfg: &RunConfig, task: Task, out: Option<&Path>, ext: &str) -> PathBuf {
    let dir = out.map_or_else(|| cfg.output.directory.clone(), Path::to_path_buf);
    dir.join(format!("{}.{ext}", cfg.stem(task)))
}

/// Runs a resolved configuration.
pub fn run(cfg: &RunConfig, task: Task, out: Option<&Path>) -> Result<Summary, CliError> {
    let vs = build_vibronic(&cfg.model())?;
    let cav = cfg.cavity();
    match task {
        Task::Spectrum => run_spectrum(cfg, &vs, &cav, out),
        Task::Dynamics => run_dynamics(cfg, &vs, &cav, out),
        Task::Rate => run_rate(cfg, &vs, &cav, out),
        Task::Densities => run_densities(cfg, &vs, &cav, out),
        Task::Validate => run_validate(cfg, &vs, &cav, out),
    }
}

/// Block-0 amplitudes `(|1⟩, |e₁⟩, …)` of the configured initial state.
fn initial_block0(cfg: &RunConfig, eig: &H0Eigenstates) -> Result<DVector<C64>, CliError> {
    match cfg.dynamics.initial {
        Initial::Photon => {
            let mut v = DVector::zeros(eig.energies.len());
            v[0] = C64::new(1.0, 0.0);
            Ok(v)
        }
        Initial::H0Eigenstate(k) if k < eig.energies.len() => {
            Ok(eig.vectors.column(k).into_owned())
        }
        Initial::H0Eigenstate(k) => Err(CliError::Config(format!(
            "`dynamics.initial`: h0:{k} out of range, the zeroth block has {} states",
            eig.energies.len()
        ))),
    }
}

/// Places block-0 amplitudes into a symmetric basis.
fn embed(basis: &SymBasis, block0: &DVector<C64>) -> DVector<C64> {
    let mut psi = DVector::zeros(basis.len());
    for (pos, s) in basis.states.iter().enumerate() {
        if s.quasi() != 0 {
            continue;
        }
        if s.n_ph == 1 {
            psi[pos] = block0[0];
        } else if let Some(i) = s.n_e.iter().position(|&n| n == 1) {
            psi[pos] = block0[i + 1];
        }
    }
    psi
}

fn survival(
    cfg: &RunConfig,
    vs: &VibronicStructure,
    cav: &CavityParams,
) -> Result<Trajectory, CliError> {
    let grid = cfg.time_grid()?;
    let eig = h0_eigenstates(vs, cav)?;
    let block0 = initial_block0(cfg, &eig)?;
    let n = cav.ensemble.count();
    let q_max = match cfg.method {
        RunMethod::Infinite => 0,
        RunMethod::Cute(q) => q,
        RunMethod::ExactN | RunMethod::Oracle => n.expect("finite ensemble"),
    };
    if cfg.method == RunMethod::Oracle {
        let oracle = Oracle::new(vs, cav, 1)?;
        let psi = embed(&oracle.sym, &block0);
        return Ok(oracle.survival(&psi, grid)?);
    }
    let bh = assemble_truncated(vs, cav, q_max)?;
    let psi = embed(&bh.basis, &block0);
    Ok(propagate(
        &bh.full(),
        &bh.photon_counts(),
        &psi,
        grid,
        cav.kappa,
        cfg.dynamics.propagation.into(),
    )?)
}

fn run_spectrum(
    cfg: &RunConfig,
    vs: &VibronicStructure,
    cav: &CavityParams,
    out: Option<&Path>,
) -> Result<Summary, CliError> {
    let tr = survival(cfg, vs, cav)?;
    let eig = h0_eigenstates(vs, cav)?;
    let margin = cav
        .g_sqrt_n
        .max(10.0 * cav.kappa)
        .max(10.0 * tr.grid.resolution());
    let (lo, hi) = (
        eig.energies[0] - margin,
        eig.energies[eig.energies.len() - 1] + margin,
    );
    let freqs = cfg.frequency_grid(lo, hi)?;
    let spec = spectrum(&tr.c_t, &tr.grid, &freqs, cfg.spectrum.window())?;
    let path = output_path(cfg, Task::Spectrum, out, "csv");
    let extra = [
        format!("propagation = {:?}", tr.method),
        format!(
            "frequency_grid = [{:.10e}, {:.10e}] x {}",
            freqs.min, freqs.max, freqs.n_points
        ),
    ];
    let lines = header(cfg, Task::Spectrum, &extra);
    write_atomic(&path, |w| Ok(write_spectrum_csv(w, &lines, &spec)?))?;
    Ok(Summary {
        message: format!(
            "spectrum with {} points written to {}",
            freqs.n_points,
            path.display()
        ),
        files: vec![path],
        passed: true,
    })
}

fn run_dynamics(
    cfg: &RunConfig,
    vs: &VibronicStructure,
    cav: &CavityParams,
    out: Option<&Path>,
) -> Result<Summary, CliError> {
    let tr = survival(cfg, vs, cav)?;
    let path = output_path(cfg, Task::Dynamics, out, "csv");
    let lines = header(
        cfg,
        Task::Dynamics,
        &[format!("propagation = {:?}", tr.method)],
    );
    write_atomic(&path, |w| Ok(write_trajectory_csv(w, &lines, &tr)?))?;
    Ok(Summary {
        message: format!("{} time points written to {}", tr.c_t.len(), path.display()),
        files: vec![path],
        passed: true,
    })
}

#[derive(Serialize)]
struct RateRecord<'a> {
    config: &'a RunConfig,
    #[serde(flatten)]
    report: RateReport,
}

fn run_rate(
    cfg: &RunConfig,
    vs: &VibronicStructure,
    cav: &CavityParams,
    out: Option<&Path>,
) -> Result<Summary, CliError> {
    let threshold = cfg.rate.threshold;
    let dark = match cfg.rate.dark_index {
        Some(k) => k,
        None => h0_eigenstates(vs, cav)?
            .lowest_dark(threshold)
            .ok_or_else(|| {
                CliError::Guard(format!(
                    "no H0 eigenstate has photonic weight below {threshold:e}"
                ))
            })?,
    };
    let report = radiative_pumping_rate(vs, cav, dark, threshold)?;
    let message = format!(
        "dark state {dark} at E_D = {:.10e}: Gamma_total = {:.6e}",
        report.e_d, report.gamma_total
    );
    let path = output_path(cfg, Task::Rate, out, "json");
    let record = RateRecord {
        config: cfg,
        report,
    };
    write_atomic(&path, |w| {
        serde_json::to_writer_pretty(&mut *w, &record)?;
        writeln!(w)?;
        Ok(())
    })?;
    Ok(Summary {
        message,
        files: vec![path],
        passed: true,
    })
}

fn run_densities(
    cfg: &RunConfig,
    vs: &VibronicStructure,
    cav: &CavityParams,
    out: Option<&Path>,
) -> Result<Summary, CliError> {
    let d = &cfg.densities;
    let eig = h0_eigenstates(vs, cav)?;
    let mut columns = Vec::new();
    for sel in &d.states {
        let (label, index) = match sel {
            StateSelector::Index(k) => (format!("state_{k}"), Some(*k)),
            StateSelector::Named(name) => {
                let k = match name.as_str() {
                    "lowest_dark" => eig.lowest_dark(d.dark_threshold),
                    "lower_polariton" => eig.lower_polariton(cav.omega_c),
                    "upper_polariton" => eig.upper_polariton(cav.omega_c),
                    other => {
                        return Err(CliError::Config(format!(
                            "`densities.states`: unknown state `{other}`, expected lowest_dark, lower_polariton, upper_polariton or an index"
                        )))
                    }
                };
                (name.clone(), k)
            }
        };
        let index =
            index.ok_or_else(|| CliError::Guard(format!("no eigenstate qualifies as {label}")))?;
        columns.push((label, dark_state_density(vs, cav, index)?));
    }
    let step = (d.x_max - d.x_min) / (d.n_points - 1) as f64;
    let x: Vec<f64> = (0..d.n_points).map(|k| d.x_min + k as f64 * step).collect();
    let rho = columns
        .iter()
        .map(|(_, s)| s.coordinate_density(d.mode, &x))
        .collect::<polariton::Result<Vec<_>>>()?;

    let mut extra = vec![format!(
        "mode {} excited-surface minimum at x = {:.10e}",
        d.mode,
        vs.model.modes[d.mode].displacement()
    )];
    for (label, s) in &columns {
        extra.push(format!(
            "{label}: index {}, energy {:.10e}, photonic weight {:.6e}",
            s.index, s.energy, s.photonic_weight
        ));
    }
    let lines = header(cfg, Task::Densities, &extra);
    let path = output_path(cfg, Task::Densities, out, "csv");
    write_atomic(&path, |w| {
        for line in &lines {
            writeln!(w, "# {line}")?;
        }
        let names: Vec<&str> = columns.iter().map(|(l, _)| l.as_str()).collect();
        writeln!(w, "x,{}", names.join(","))?;
        for (k, xk) in x.iter().enumerate() {
            write!(w, "{xk:.16e}")?;
            for col in &rho {
                write!(w, ",{:.16e}", col[k])?;
            }
            writeln!(w)?;
        }
        Ok(())
    })?;
    Ok(Summary {
        message: format!("{} densities written to {}", columns.len(), path.display()),
        files: vec![path],
        passed: true,
    })
}

#[derive(Serialize)]
struct ValidationRecord<'a> {
    config: &'a RunConfig,
    symmetric_dim: usize,
    tensor_dim: usize,
    hamiltonian_deviation: f64,
    survival_deviation: f64,
    symmetry_leakage: f64,
    max_deviation: f64,
    tolerance: f64,
    passed: bool,
}

/// Brute-force oracle against the untruncated symmetric assembly.
fn run_validate(
    cfg: &RunConfig,
    vs: &VibronicStructure,
    cav: &CavityParams,
    out: Option<&Path>,
) -> Result<Summary, CliError> {
    let n = match cav.ensemble {
        Ensemble::Finite(n) if n <= MAX_MOLECULES => n,
        _ => {
            return Err(CliError::Config(format!(
                "`cavity.molecules`: validation needs at most {MAX_MOLECULES} molecules"
            )))
        }
    };
    let grid = cfg.time_grid()?;
    let oracle = Oracle::new(vs, cav, 1)?;
    let bh = assemble(vs, cav, 1, n)?;
    let h_dev = max_abs(&(oracle.symmetric_hamiltonian()? - bh.full().to_dense()?));

    let eig = h0_eigenstates(vs, cav)?;
    let psi = embed(&bh.basis, &initial_block0(cfg, &eig)?);
    let brute = oracle.survival(&psi, grid)?;
    let sym = propagate(
        &bh.full(),
        &bh.photon_counts(),
        &psi,
        grid,
        cav.kappa,
        cfg.dynamics.propagation.into(),
    )?;
    let c_dev = brute
        .c_t
        .iter()
        .zip(&sym.c_t)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    let leakage = oracle.symmetry_leakage(&psi, grid)?;
    let max_deviation = h_dev.max(c_dev).max(leakage);
    let tolerance = cfg.validate.tolerance;
    let passed = max_deviation < tolerance;

    let record = ValidationRecord {
        config: cfg,
        symmetric_dim: bh.dim(),
        tensor_dim: oracle.tensor.len(),
        hamiltonian_deviation: h_dev,
        survival_deviation: c_dev,
        symmetry_leakage: leakage,
        max_deviation,
        tolerance,
        passed,
    };
    let path = output_path(cfg, Task::Validate, out, "json");
    write_atomic(&path, |w| {
        serde_json::to_writer_pretty(&mut *w, &record)?;
        writeln!(w)?;
        Ok(())
    })?;
    Ok(Summary {
        message: format!(
            "max deviation {max_deviation:.3e} (hamiltonian {h_dev:.3e}, survival {c_dev:.3e}, symmetry leakage {leakage:.3e}), tolerance {tolerance:.1e}: {}",
            if passed { "PASS" } else { "FAIL" }
        ),
        files: vec![path],
        passed,
    })
}
