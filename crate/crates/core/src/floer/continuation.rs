use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::solver::{solve_strip, SolveReport, SolverOptions};
use super::strip::{diagnostics, StripGrid};
use super::Cutoff;
use crate::error::{Error, Result};
use crate::hamiltonian::HamiltonianSystem;

#[derive(Clone, Debug)]
pub struct ContinuationOptions {
    pub t_max: f64,
    /// Number of equal schedule intervals on `[0, T_max]`.
    pub steps: usize,
    /// Smallest `ΔT` tried before giving up.
    pub min_step: f64,
    pub ns: usize,
    pub nt: usize,
    /// `S = T̂(T_max) + margin`.
    pub margin: f64,
    pub solver: SolverOptions,
    /// Sign of the `ω` term in the action profile.
    pub action_orientation: f64,
    /// Hofer norm estimate of `G^k`, checked against `π/4` when present.
    pub hofer_estimate: Option<f64>,
    pub snapshot_dir: Option<PathBuf>,
}

impl Default for ContinuationOptions {
    fn default() -> Self {
        ContinuationOptions {
            t_max: 20.0,
            steps: 20,
            min_step: 1e-3,
            ns: 200,
            nt: 32,
            margin: 5.0,
            solver: SolverOptions::default(),
            action_orientation: -1.0,
            hofer_estimate: None,
            snapshot_dir: None,
        }
    }
}

impl ContinuationOptions {
    pub fn schedule(&self) -> Vec<f64> {
        let steps = self.steps.max(1);
        (1..=steps)
            .map(|i| self.t_max * i as f64 / steps as f64)
            .collect()
    }

    pub fn s_half(&self) -> f64 {
        Cutoff::new(self.t_max).t_hat() + self.margin
    }
}

/// One accepted `T`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct StepRecord {
    #[serde(rename = "T")]
    pub t: f64,
    pub iterations: usize,
    pub residual: f64,
    pub energy: f64,
    pub defect_min: f64,
    pub action_min: f64,
    pub action_max: f64,
}

#[derive(Clone, Debug)]
pub struct ContinuationState {
    pub grid: StripGrid,
    pub schedule: Vec<f64>,
    pub records: Vec<StepRecord>,
    pub snapshots: Vec<PathBuf>,
    pub warnings: Vec<String>,
}

impl ContinuationState {
    pub fn t(&self) -> f64 {
        self.grid.t_cut()
    }

    /// Continuation log as CSV text.
    pub fn log_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.records {
            w.serialize(r)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv is utf-8"))
    }

    pub fn write_log(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(self.log_csv()?.as_bytes())?;
        Ok(())
    }
}

fn check_hypothesis(opts: &ContinuationOptions, warnings: &mut Vec<String>) {
    if let Some(h) = opts.hofer_estimate {
        if h >= std::f64::consts::FRAC_PI_4 {
            let msg = format!("theorem hypothesis violated: Hofer norm estimate {h:.6} >= pi/4");
            log::warn!("{msg}");
            warnings.push(msg);
        }
    }
}

/// Follow the strip for mode `n` from the constant solution at `T = 0`
/// through the schedule `T_max·i/steps`.
pub fn continue_in_t(
    sys: &HamiltonianSystem,
    n: i64,
    opts: &ContinuationOptions,
) -> Result<ContinuationState> {
    let grid = StripGrid::constant(sys.k(), n, 0.0, opts.s_half(), opts.ns, opts.nt)?;
    let mut warnings = Vec::new();
    check_hypothesis(opts, &mut warnings);
    let mut state = ContinuationState {
        grid,
        schedule: opts.schedule(),
        records: Vec::new(),
        snapshots: Vec::new(),
        warnings,
    };
    let report = SolveReport::default();
    record(sys, &mut state, &report, opts);
    run(sys, state, opts)
}

/// Continue from a snapshot taken by an earlier run with the same options.
pub fn resume(
    sys: &HamiltonianSystem,
    grid: StripGrid,
    opts: &ContinuationOptions,
) -> Result<ContinuationState> {
    if grid.k() != sys.k() || grid.ns() != opts.ns || grid.nt() != opts.nt {
        return Err(Error::invalid(format!(
            "snapshot shape (k {}, {}x{}) does not match the run (k {}, {}x{})",
            grid.k(),
            grid.ns(),
            grid.nt(),
            sys.k(),
            opts.ns,
            opts.nt
        )));
    }
    if (grid.s_half() - opts.s_half()).abs() > 1e-12 {
        return Err(Error::invalid(format!(
            "snapshot half-width {} does not match {}",
            grid.s_half(),
            opts.s_half()
        )));
    }
    let mut warnings = Vec::new();
    check_hypothesis(opts, &mut warnings);
    let state = ContinuationState {
        grid,
        schedule: opts.schedule(),
        records: Vec::new(),
        snapshots: Vec::new(),
        warnings,
    };
    run(sys, state, opts)
}

fn record(sys: &HamiltonianSystem, state: &mut ContinuationState, rep: &SolveReport, opts: &ContinuationOptions) {
    let d = diagnostics(sys, &state.grid, opts.action_orientation);
    state.records.push(StepRecord {
        t: state.grid.t_cut(),
        iterations: rep.iterations,
        residual: rep.residual,
        energy: d.energy,
        defect_min: d.defect_min,
        action_min: d.action_min,
        action_max: d.action_max,
    });
}

fn run(
    sys: &HamiltonianSystem,
    mut state: ContinuationState,
    opts: &ContinuationOptions,
) -> Result<ContinuationState> {
    if let Some(dir) = &opts.snapshot_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::Snapshot {
            path: dir.clone(),
            reason: e.to_string(),
        })?;
    }
    let targets: Vec<f64> = state
        .schedule
        .iter()
        .copied()
        .filter(|&t| t > state.grid.t_cut() + 1e-12)
        .collect();
    for target in targets {
        // Aim for the target directly after every accepted step, bisecting on
        // failure; this keeps the accepted sequence a function of (T, grid).
        while state.grid.t_cut() < target - 1e-12 {
            let current = state.grid.t_cut();
            let mut step = target - current;
            loop {
                let mut trial = state.grid.clone();
                trial.set_t_cut(current + step);
                match solve_strip(sys, trial, &opts.solver) {
                    Ok((grid, rep)) => {
                        state.grid = grid;
                        record(sys, &mut state, &rep, opts);
                        log::info!(
                            "T = {:.6}: residual {:.3e}, {} iterations",
                            state.grid.t_cut(),
                            rep.residual,
                            rep.iterations
                        );
                        if let Some(dir) = &opts.snapshot_dir {
                            let path = dir.join(format!(
                                "strip_n{}_T{:.6}.json",
                                state.grid.mode(),
                                state.grid.t_cut()
                            ));
                            state.grid.save(&path)?;
                            state.snapshots.push(path);
                        }
                        break;
                    }
                    Err(Error::StripSolve { reason, residual, .. }) => {
                        step *= 0.5;
                        log::info!(
                            "T = {:.6} failed ({reason}, residual {residual:.3e}); halving step to {step:.3e}",
                            current + 2.0 * step
                        );
                        if step < opts.min_step {
                            return Err(Error::ContinuationStalled {
                                t: current,
                                step,
                                reason,
                                state: Box::new(state),
                            });
                        }
                    }
                    Err(e) => return Err(e),
                }
            }
        }
    }
    Ok(state)
}
