//! Experiment pipelines behind the command-line tool: each writes its
//! artifacts plus a `manifest.json` into the output directory.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::fixedpoint::{extract_candidate, label_and_separate, refine_candidate, FixedPointRecord};
use crate::floer::{
    action_profile, continue_in_t, diagnostics, gauge_component, residual, resume, ContinuationOptions,
    ContinuationState, StripGrid,
};
use crate::flow::{flow_g, flow_g_observed, free_flow, time_one_map};
use crate::hamiltonian::{hofer_norm, Frame, HamiltonianSystem, HoferEstimate, SystemHamiltonian};
use crate::par;
use crate::rng::{purpose, stream};
use crate::spectral::{FourierField, TWO_PI};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    Simulate,
    Hofer,
    Strip,
    Fixedpoints,
    Verify,
}

/// Options that only make sense on the command line.
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Final time of `simulate` (default 1).
    pub t1: Option<f64>,
    pub state_in: Option<PathBuf>,
    pub state_out: Option<PathBuf>,
    /// Observables CSV of `simulate`; defaults to `observables.csv` in the
    /// output directory.
    pub observables: Option<PathBuf>,
    pub snapshot_dir: Option<PathBuf>,
    pub resume: Option<PathBuf>,
    /// Catalog path of `fixedpoints`; defaults to `catalog.json`.
    pub catalog: Option<PathBuf>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Manifest {
    pub kind: ExperimentKind,
    pub format_version: u32,
    pub crate_version: String,
    pub config_hash: String,
    pub config: String,
    pub started_unix: f64,
    pub wall_clock_seconds: f64,
    pub artifacts: Vec<PathBuf>,
    pub warnings: Vec<String>,
    pub status: String,
    pub error: Option<String>,
}

struct Outputs {
    dir: PathBuf,
    artifacts: Vec<PathBuf>,
    warnings: Vec<String>,
}

impl Outputs {
    fn new(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Outputs {
            dir: dir.to_path_buf(),
            artifacts: Vec::new(),
            warnings: Vec::new(),
        })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn write(&mut self, path: PathBuf, bytes: &[u8]) -> Result<()> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::File::create(&path)?.write_all(bytes)?;
        self.artifacts.push(path);
        Ok(())
    }

    fn write_json<T: Serialize>(&mut self, path: PathBuf, value: &T) -> Result<()> {
        let text = serde_json::to_string_pretty(value)?;
        self.write(path, text.as_bytes())
    }

    fn warn(&mut self, msg: String) {
        log::warn!("{msg}");
        if !self.warnings.contains(&msg) {
            self.warnings.push(msg);
        }
    }
}

fn csv_bytes<T: Serialize>(rows: &[T]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| Error::Format(e.to_string()))
}

/// Run one experiment and write its manifest, also on failure.
pub fn run_experiment(cfg: &RunConfig, kind: ExperimentKind, opts: &RunOptions) -> Result<Manifest> {
    let started = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0);
    let clock = Instant::now();
    let mut out = Outputs::new(&cfg.output_dir)?;
    let result = match kind {
        ExperimentKind::Simulate => simulate(cfg, opts, &mut out),
        ExperimentKind::Hofer => hofer(cfg, &mut out),
        ExperimentKind::Strip => strip(cfg, opts, &mut out),
        ExperimentKind::Fixedpoints => fixedpoints(cfg, opts, &mut out),
        ExperimentKind::Verify => verify(cfg, &mut out).map(|_| ()),
    };
    let manifest = Manifest {
        kind,
        format_version: FORMAT_VERSION,
        crate_version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: cfg.hash(),
        config: cfg.to_toml_string(),
        started_unix: started,
        wall_clock_seconds: clock.elapsed().as_secs_f64(),
        artifacts: out.artifacts.clone(),
        warnings: out.warnings.clone(),
        status: if result.is_ok() { "ok" } else { "error" }.to_string(),
        error: result.as_ref().err().map(|e| e.to_string()),
    };
    let text = serde_json::to_string_pretty(&manifest)?;
    std::fs::write(out.path("manifest.json"), text)?;
    result.map(|_| manifest)
}

#[derive(Serialize)]
struct Observation {
    t: f64,
    norm: f64,
    #[serde(rename = "F")]
    f: f64,
    #[serde(rename = "G")]
    g: f64,
    #[serde(rename = "H0")]
    h0: f64,
}

/// `H⁰(u) = ½ ∫ |u_x|² = π Σ n² |û(n)|²`.
pub fn free_energy(u: &FourierField) -> f64 {
    0.5 * TWO_PI * u.iter_modes().map(|(n, c)| (n * n) as f64 * c.norm_sqr()).sum::<f64>()
}

fn initial_state(cfg: &RunConfig, opts: &RunOptions) -> Result<FourierField> {
    match &opts.state_in {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            let u = FourierField::from_json(&text)?;
            if u.k() != cfg.k {
                return Err(Error::Config(format!(
                    "state {} has k = {}, the run uses k = {}",
                    path.display(),
                    u.k(),
                    cfg.k
                )));
            }
            u.normalized()
        }
        None => Ok(FourierField::random_unit(cfg.k, &mut stream(cfg.seed, purpose::SIMULATE))),
    }
}

/// Integrates the interaction picture `v̇ = X^G_t(v)`; the physical state is
/// `u(t) = φ⁰_{−t} v(t)`. States read and written are physical.
fn simulate(cfg: &RunConfig, opts: &RunOptions, out: &mut Outputs) -> Result<()> {
    let spec = cfg.flow_spec()?;
    let t1 = opts.t1.unwrap_or(1.0);
    let u0 = initial_state(cfg, opts)?;
    let sys = &spec.sys;
    let mut rows = Vec::new();
    let outcome = flow_g_observed(&spec.over(0.0, t1), &u0, |t, v| {
        let u = free_flow(v, -t);
        rows.push(Observation {
            t,
            norm: v.norm(),
            f: sys.eval_f(&u, t),
            g: sys.eval_g(v, t),
            h0: free_energy(&u),
        });
    })?;
    let path = opts.observables.clone().unwrap_or_else(|| out.path("observables.csv"));
    out.write(path, &csv_bytes(&rows)?)?;
    let final_state = free_flow(&outcome.state, -t1);
    let path = opts.state_out.clone().unwrap_or_else(|| out.path("state.json"));
    out.write(path, final_state.to_json().as_bytes())?;
    log::info!("simulate: t1 = {t1}, max norm drift {:.3e}", outcome.max_drift);
    Ok(())
}

#[derive(Serialize)]
struct HoferReport {
    #[serde(rename = "F")]
    f: HoferEstimate,
    #[serde(rename = "G")]
    g: HoferEstimate,
    pi_over_4: f64,
    hypothesis_holds: bool,
}

fn hofer_pair(sys: &HamiltonianSystem, cfg: &RunConfig) -> (HoferEstimate, HoferEstimate) {
    let opts = cfg.hofer_options();
    let f = hofer_norm(&SystemHamiltonian { sys, frame: Frame::F }, &opts);
    let g = hofer_norm(&SystemHamiltonian { sys, frame: Frame::G }, &opts);
    (f, g)
}

fn check_hypothesis(est: &HoferEstimate, label: &str, out: &mut Outputs) -> bool {
    let holds = est.value < std::f64::consts::FRAC_PI_4;
    if !holds {
        out.warn(format!(
            "theorem hypothesis violated: |||{label}||| estimate {:.6} >= pi/4",
            est.value
        ));
    }
    let flagged = est.flagged();
    if !flagged.is_empty() {
        out.warn(format!("|||{label}||| estimate: inner optimizer not converged at nodes {flagged:?}"));
    }
    holds
}

fn hofer(cfg: &RunConfig, out: &mut Outputs) -> Result<()> {
    let sys = cfg.system()?;
    let (f, g) = hofer_pair(&sys, cfg);
    let holds = check_hypothesis(&f, "F", out) & check_hypothesis(&g, "G", out);
    log::info!("hofer: |||F||| ≈ {:.9}, |||G||| ≈ {:.9}", f.value, g.value);
    let report = HoferReport {
        f,
        g,
        pi_over_4: std::f64::consts::FRAC_PI_4,
        hypothesis_holds: holds,
    };
    out.write_json(out.path("hofer.json"), &report)
}

fn strip_options(cfg: &RunConfig, hofer_g: f64, snapshot_dir: Option<PathBuf>) -> ContinuationOptions {
    ContinuationOptions {
        hofer_estimate: Some(hofer_g),
        snapshot_dir,
        ..cfg.continuation_options()
    }
}

#[derive(Serialize)]
struct ProfileRow {
    s: f64,
    action: f64,
}

fn write_strip(state: &ContinuationState, sys: &HamiltonianSystem, cfg: &RunConfig, out: &mut Outputs) -> Result<()> {
    let n = state.grid.mode();
    out.write(out.path(&format!("strip_n{n}.csv")), state.log_csv()?.as_bytes())?;
    out.write(
        out.path(&format!("strip_n{n}_final.json")),
        state.grid.to_snapshot_json().as_bytes(),
    )?;
    let rows: Vec<ProfileRow> = action_profile(sys, &state.grid, cfg.strip.action_orientation)
        .into_iter()
        .map(|(s, action)| ProfileRow { s, action })
        .collect();
    out.write(out.path(&format!("action_n{n}.csv")), &csv_bytes(&rows)?)?;
    for w in &state.warnings {
        out.warn(w.clone());
    }
    Ok(())
}

fn strip(cfg: &RunConfig, opts: &RunOptions, out: &mut Outputs) -> Result<()> {
    let sys = cfg.system()?;
    let g = hofer_norm(&SystemHamiltonian { sys: &sys, frame: Frame::G }, &cfg.hofer_options());
    if let Some(snap) = &opts.resume {
        let grid = StripGrid::load(snap)?;
        let copts = strip_options(cfg, g.value, opts.snapshot_dir.clone());
        let state = resume(&sys, grid, &copts)?;
        out.artifacts.extend(state.snapshots.iter().cloned());
        return write_strip(&state, &sys, cfg, out);
    }
    for &n in &cfg.modes {
        let copts = strip_options(cfg, g.value, opts.snapshot_dir.clone());
        let state = continue_in_t(&sys, n, &copts)?;
        out.artifacts.extend(state.snapshots.iter().cloned());
        write_strip(&state, &sys, cfg, out)?;
    }
    Ok(())
}

/// Strips for every configured mode, then refinement of each extracted
/// candidate (concurrently) and the action-ordered catalog.
pub fn fixed_point_records(cfg: &RunConfig, hofer_g: Option<f64>) -> Result<Vec<FixedPointRecord>> {
    let spec = cfg.flow_spec()?;
    let sys = &spec.sys;
    let mut candidates = Vec::new();
    for &n in &cfg.modes {
        let mut copts = cfg.continuation_options();
        copts.hofer_estimate = hofer_g;
        let state = continue_in_t(sys, n, &copts)?;
        candidates.push(extract_candidate(sys, &state, cfg.strip.action_orientation));
    }
    let newton = cfg.newton_options();
    let records = par::map_slice(&candidates, |c| refine_candidate(&spec, c, &newton));
    records.into_iter().collect()
}

fn fixedpoints(cfg: &RunConfig, opts: &RunOptions, out: &mut Outputs) -> Result<()> {
    let records = fixed_point_records(cfg, None)?;
    let catalog = label_and_separate(&records, &cfg.kernel()?);
    let path = opts.catalog.clone().unwrap_or_else(|| out.path("catalog.json"));
    out.write_json(path, &catalog)?;
    out.write_json(out.path("fixedpoints.json"), &records)
}

/// One entry of the verification report.
#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub bound: f64,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub passed: bool,
    pub checks: Vec<Check>,
    pub warnings: Vec<String>,
}

impl VerifyReport {
    /// One line per check.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            s += &format!(
                "{} {:<28} value {:.3e} bound {:.3e} {}\n",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.value,
                c.bound,
                c.detail
            );
        }
        for w in &self.warnings {
            s += &format!("WARN {w}\n");
        }
        let failed = self.checks.iter().filter(|c| !c.passed).count();
        s += &format!("{} checks, {failed} failed\n", self.checks.len());
        s
    }
}

struct Checks(Vec<Check>);

impl Checks {
    fn le(&mut self, name: &str, value: f64, bound: f64, detail: impl Into<String>) {
        self.0.push(Check {
            name: name.to_string(),
            passed: value <= bound,
            value,
            bound,
            detail: detail.into(),
        });
    }
}

/// Invariant suite over the configured system. Warnings (for instance a
/// Hofer estimate at or above `π/4`) do not fail the run.
pub fn run_verify(cfg: &RunConfig) -> Result<VerifyReport> {
    let dir = std::env::temp_dir().join(format!("convfloer-verify-{}", std::process::id()));
    let mut out = Outputs::new(&dir)?;
    let report = verify_checks(cfg, &mut out);
    let _ = std::fs::remove_dir_all(&dir);
    report
}

fn verify(cfg: &RunConfig, out: &mut Outputs) -> Result<VerifyReport> {
    let report = verify_checks(cfg, out)?;
    out.write_json(out.path("verify.json"), &report)?;
    out.write(out.path("verify.txt"), report.summary().as_bytes())?;
    if report.passed {
        Ok(report)
    } else {
        let failed: Vec<&str> = report
            .checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.name.as_str())
            .collect();
        Err(Error::CheckFailed(failed.join(", ")))
    }
}

fn verify_checks(cfg: &RunConfig, out: &mut Outputs) -> Result<VerifyReport> {
    let spec = cfg.flow_spec()?;
    let sys = &spec.sys;
    let k = cfg.k;
    let mut c = Checks(Vec::new());
    let mut rng = stream(cfg.seed, purpose::VERIFY);
    let samples: Vec<FourierField> = (0..50).map(|_| FourierField::random_unit(k, &mut rng)).collect();
    let dirs: Vec<FourierField> = (0..50).map(|_| FourierField::random_unit(k, &mut rng)).collect();
    let times: Vec<f64> = (0..50).map(|i| (i as f64 + 0.5) / 50.0).collect();

    // spectral
    let col = sys.collocation();
    let parseval = samples
        .iter()
        .map(|u| (col.to_grid(u).l2_norm() - u.norm()).abs() / u.norm())
        .fold(0.0, f64::max);
    c.le("parseval", parseval, 1e-10, "grid vs spectral L2 norm, relative");
    let psi_grid = col.to_grid(sys.kernel().coeffs());
    let imag = (0..psi_grid.len())
        .map(|j| psi_grid.samples[j].im.abs())
        .fold(0.0, f64::max);
    c.le("kernel_real", imag, 1e-12, "max |Im ψ(x)|");

    // hamiltonian
    let perp = samples
        .iter()
        .zip(&times)
        .map(|(u, &t)| u.inner(&sys.x_f(u, t)).abs())
        .fold(0.0, f64::max);
    c.le("perpendicularity", perp, 1e-10, "max |<u, X^F(u)>|");
    let phase = samples
        .iter()
        .zip(&times)
        .map(|(u, &t)| {
            let z = crate::spectral::C64::from_polar(1.0, 0.7 + t);
            (sys.eval_f(&u.scaled(z), t) - sys.eval_f(u, t)).abs()
        })
        .fold(0.0, f64::max);
    c.le("phase_invariance", phase, 1e-12, "max |F(e^{iθ}u) − F(u)|");
    let h = 1e-5;
    let mut grad_err: f64 = 0.0;
    for ((u, v), &t) in samples.iter().zip(&dirs).zip(&times).take(20) {
        for frame in [Frame::F, Frame::G] {
            let eval = |w: &FourierField| match frame {
                Frame::F => sys.eval_f(w, t),
                Frame::G => sys.eval_g(w, t),
            };
            let grad = match frame {
                Frame::F => sys.grad_f(u, t),
                Frame::G => sys.grad_g(u, t),
            };
            let mut up = u.clone();
            up.add_scaled(crate::spectral::C64::new(h, 0.0), v);
            let mut dn = u.clone();
            dn.add_scaled(crate::spectral::C64::new(-h, 0.0), v);
            let fd = (eval(&up) - eval(&dn)) / (2.0 * h);
            let exact = grad.inner(v);
            let scale = exact.abs().max(grad.norm() * v.norm() * 1e-3).max(1e-300);
            if grad.norm() > 0.0 {
                grad_err = grad_err.max((fd - exact).abs() / scale);
            }
        }
    }
    c.le("gradient_fd", grad_err, 1e-6, "relative error of central differences, h = 1e-5");
    let conj = samples
        .iter()
        .zip(&times)
        .map(|(u, &t)| {
            let direct = free_flow(&sys.grad_f(&free_flow(u, -t), t), t);
            sys.grad_g(u, t).sub(&direct).norm()
        })
        .fold(0.0, f64::max);
    c.le("grad_g_conjugation", conj, 1e-14, "‖∇G − φ⁰_t ∇F φ⁰_{−t}‖");

    // flow
    let mut free_err: f64 = 0.0;
    for n in -(k as i64)..=(k as i64) {
        let u = FourierField::mode(k, n);
        let q = free_flow(&u, 1.0);
        let expected = crate::spectral::C64::from_polar(1.0, (n * n) as f64);
        free_err = free_err.max((q.get(n) / u.get(n) - expected).norm());
    }
    c.le("free_multipliers", free_err, 1e-14, "max |multiplier − exp(in²)|");
    let mut drift: f64 = 0.0;
    let mut rev: f64 = 0.0;
    for u in samples.iter().take(4) {
        let fwd = flow_g_observed(&spec, u, |_, _| {})?;
        drift = drift.max(fwd.max_drift);
        let back = flow_g(&spec.over(1.0, 0.0), &fwd.state)?;
        rev = rev.max(back.sub(u).norm());
    }
    c.le("norm_conservation", drift, 1e-10, format!("max |‖u(t)‖ − 1|, dt = {}", cfg.dt));
    c.le("reversibility", rev, 1e-8, "forward then backward");

    // hofer
    let (hf, hg) = hofer_pair(sys, cfg);
    check_hypothesis(&hf, "F", out);
    check_hypothesis(&hg, "G", out);
    let hofer_diff = (hf.value - hg.value).abs();
    c.le(
        "hofer_f_vs_g",
        hofer_diff,
        (0.05 * hf.value.max(hg.value)).max(2.0 * cfg.hofer.tol),
        format!("|||F||| ≈ {:.6}, |||G||| ≈ {:.6}", hf.value, hg.value),
    );

    // floer
    let mut anchor: f64 = 0.0;
    for n in 0..=(k as i64).min(8) {
        let g = StripGrid::constant(k, n, 0.0, 4.0, 10, 4)?;
        for (_, a) in action_profile(sys, &g, cfg.strip.action_orientation) {
            anchor = anchor.max((a - (n * n) as f64 / 2.0).abs());
        }
    }
    c.le("action_anchor", anchor, 0.0, "T = 0 constant strips, |A − n²/2|");

    let bound = 2.0 * hg.value;
    let mut records = Vec::new();
    if let Some(&n) = cfg.modes.first() {
        let mut copts = cfg.continuation_options();
        copts.hofer_estimate = Some(hg.value);
        let state = continue_in_t(sys, n, &copts)?;
        for w in &state.warnings {
            out.warn(w.clone());
        }
        let grid = &state.grid;
        let t = grid.t_cut();
        let d = diagnostics(sys, grid, cfg.strip.action_orientation);
        let res = residual(sys, grid);
        let tag = format!("n = {n}, T = {t}");
        c.le("strip_residual", res.norm, cfg.tol.residual, tag.clone());
        c.le("strip_gauge", gauge_component(grid, &res), 1e-10, tag.clone());
        let asym = (0..grid.nt())
            .flat_map(|j| [(0, j), (grid.ns() - 1, j)])
            .map(|(i, j)| grid.field(i, j).projective_distance(&grid.asymptote()))
            .fold(0.0, f64::max);
        c.le("strip_asymptote", asym, cfg.tol.asymptote, tag.clone());
        c.le("strip_energy_bound", d.energy, bound * 1.05, format!("{tag}, 2|||G||| (+5%)"));
        if d.energy > 1e-12 {
            c.le(
                "strip_energy_identity",
                (d.energy - d.energy_identity).abs() / d.energy,
                0.02,
                tag.clone(),
            );
        }
        if t > 0.0 {
            c.le(
                "strip_slice_defect",
                d.defect_min,
                std::f64::consts::PI / (4.0 * t) * 1.05,
                format!("{tag}, π/4T (+5%)"),
            );
        }
        let n2 = (n * n) as f64 / 2.0;
        let window = (d.action_min - n2).abs().max((d.action_max - n2).abs());
        c.le("strip_action_window", window, bound * 1.05, format!("{tag}, 2|||G||| (+5%)"));

        let cand = extract_candidate(sys, &state, cfg.strip.action_orientation);
        let rec = refine_candidate(&spec, &cand, &cfg.newton_options())?;
        c.le("fixed_point_residual", rec.residual, cfg.tol.newton, tag.clone());
        c.le("fixed_point_multiplier", (rec.lambda.norm() - 1.0).abs(), 1e-12, tag);
        records.push(rec);
    }

    // fixedpoint: with f ≡ 0 every mode is fixed and actions are n²/2
    let free_sys = HamiltonianSystem::new(sys.kernel(), crate::hamiltonian::DensityModel::Zero, k);
    let free_spec = crate::flow::FlowSpec::new(free_sys, cfg.dt)?;
    let mut free_res: f64 = 0.0;
    for n in -(k as i64)..=(k as i64) {
        let u = FourierField::mode(k, n);
        let q = time_one_map(&free_spec, &u)?;
        free_res = free_res.max(q.projective_distance(&u));
    }
    c.le("free_fixed_points", free_res, 1e-14, "projective distance Q(u⁰_n) to u⁰_n");

    let passed = c.0.iter().all(|x| x.passed);
    Ok(VerifyReport {
        passed,
        checks: c.0,
        warnings: out.warnings.clone(),
    })
}
