//! Acceptance criteria at finite truncation. All criteria run in one test so
//! their runtimes are measured without competing test threads; each prints a
//! PASS/FAIL line before the final assertion.

use std::f64::consts::{FRAC_PI_4, PI};
use std::io::Write;
use std::time::{Duration, Instant};

use convfloer::fixedpoint::{
    extract_candidate, label_and_separate, refine_candidate, NewtonOptions, SEPARATION_NOT_CERTIFIED,
};
use convfloer::floer::{
    action_profile, continue_in_t, diagnostics, normal_split, ContinuationOptions, ContinuationState,
    SolverOptions, StripGrid,
};
use convfloer::flow::{flow_g_observed, free_flow, time_one_map, FlowSpec};
use convfloer::hamiltonian::{
    hofer_gap, hofer_norm, DensityModel, Frame, HamiltonianSystem, HoferOptions, SystemHamiltonian,
};
use convfloer::par;
use convfloer::rng::stream;
use convfloer::spectral::{
    convolve, make_admissible_kernel, truncate_kernel, truncation_error_bound, Collocation, DecayProfile,
    FourierField, Kernel, C64,
};

struct Outcome {
    id: usize,
    name: &'static str,
    passed: bool,
    detail: String,
    elapsed: Duration,
    limit: Duration,
}

/// Written to the stdout handle directly so the lines survive the test
/// harness's output capture.
fn report(line: String) {
    let mut out = std::io::stdout().lock();
    writeln!(out, "{line}").unwrap();
    out.flush().unwrap();
}

fn criterion(id: usize, name: &'static str, limit_secs: u64, f: impl FnOnce() -> (bool, String)) -> Outcome {
    let start = Instant::now();
    let (ok, detail) = f();
    let elapsed = start.elapsed();
    let limit = Duration::from_secs(limit_secs);
    let o = Outcome {
        id,
        name,
        passed: ok && elapsed <= limit,
        detail,
        elapsed,
        limit,
    };
    report(format!(
        "{} criterion {:>2} {:<28} {:>9.2?} (limit {:?}) {}",
        if o.passed { "PASS" } else { "FAIL" },
        o.id,
        o.name,
        o.elapsed,
        o.limit,
        o.detail
    ));
    o
}

/// Default reference kernel: geometric decay `0.3·0.8^{|m|}` on `M_0.1`.
fn reference_kernel(k: usize) -> Kernel {
    make_admissible_kernel(0.1, k, &DecayProfile::Geometric { amplitude: 0.3, ratio: 0.8 }).unwrap()
}

fn gp(c: f64) -> DensityModel {
    DensityModel::GrossPitaevskii {
        coupling: c,
        potential: 0.05,
    }
}

fn strip_options() -> ContinuationOptions {
    ContinuationOptions {
        t_max: 20.0,
        steps: 20,
        ns: 200,
        nt: 32,
        ..ContinuationOptions::default()
    }
}

fn hofer_g(sys: &HamiltonianSystem) -> f64 {
    hofer_norm(&SystemHamiltonian { sys, frame: Frame::G }, &HoferOptions::default()).value
}

fn c1_free_flow() -> (bool, String) {
    let mut mult_err: f64 = 0.0;
    let mut fixed_err: f64 = 0.0;
    let mut leaked = 0usize;
    for k in 0..=64usize {
        let sys = HamiltonianSystem::new(&reference_kernel(k.max(1)), DensityModel::Zero, k);
        let spec = FlowSpec::new(sys, 1e-3).unwrap();
        for n in -(k as i64)..=(k as i64) {
            let u = FourierField::mode(k, n);
            let q = time_one_map(&spec, &u).unwrap();
            let expected = C64::from_polar(1.0, (n * n) as f64);
            mult_err = mult_err.max((q.get(n) / u.get(n) - expected).norm());
            fixed_err = fixed_err.max(q.projective_distance(&u));
            leaked += q.iter_modes().filter(|&(m, c)| m != n && c != C64::new(0.0, 0.0)).count();
        }
    }
    // Eigenvectors of a diagonal unitary with multipliers e^{in²}: the fixed
    // points are the modes (and ±n combinations, which share a multiplier)
    // as long as distinct |n| have distinct multipliers.
    let mut min_gap = f64::INFINITY;
    for a in 0..=64i64 {
        for b in 0..a {
            let d = (C64::from_polar(1.0, (a * a) as f64) - C64::from_polar(1.0, (b * b) as f64)).norm();
            min_gap = min_gap.min(d);
        }
    }
    let mut rng = stream(1, 0);
    let u = FourierField::random_unit(64, &mut rng);
    let generic = free_flow(&u, 1.0).projective_distance(&u);
    // Q(u⁰_n) must be supported exactly on {n}; the distance itself only
    // carries rounding from the phase alignment.
    let ok = mult_err <= 1e-14 && leaked == 0 && fixed_err <= 1e-14 && min_gap > 1e-6 && generic > 1e-3;
    (
        ok,
        format!(
            "multiplier error {mult_err:.1e}, off-mode coefficients {leaked}, fixed-point distance {fixed_err:.1e}, min gap between |n| classes {min_gap:.2e}, generic field moved {generic:.2e}"
        ),
    )
}

fn c2_conservation() -> (bool, String) {
    let k = 8;
    let sys = HamiltonianSystem::new(&reference_kernel(k), gp(0.1), k);
    let spec = FlowSpec::new(sys, 1e-3).unwrap();
    let results = par::map_range(1000, |i| {
        let mut rng = stream(2, i as u64);
        let u0 = FourierField::random_unit(k, &mut rng);
        let mut perp: f64 = 0.0;
        let out = flow_g_observed(&spec, &u0, |t, v| {
            let u = free_flow(v, -t);
            perp = perp.max(u.inner(&spec.sys.x_f(&u, t)).abs());
        })
        .unwrap();
        (out.max_drift, perp)
    });
    let drift = results.iter().map(|r| r.0).fold(0.0, f64::max);
    let perp = results.iter().map(|r| r.1).fold(0.0, f64::max);
    (
        drift <= 1e-10 && perp <= 1e-10,
        format!("max norm drift {drift:.2e}, max |<u, X^F(u)>| {perp:.2e}"),
    )
}

fn c3_gradients() -> (bool, String) {
    let k = 8;
    let sys = HamiltonianSystem::new(&reference_kernel(k), gp(0.1), k);
    let h = 1e-5;
    let mut worst = [0.0f64; 2];
    for i in 0..50u64 {
        let mut rng = stream(3, i);
        let u = FourierField::random_unit(k, &mut rng);
        let v = FourierField::random_unit(k, &mut rng);
        let t = (i as f64 + 0.5) / 50.0;
        for (slot, frame) in [Frame::F, Frame::G].into_iter().enumerate() {
            let eval = |w: &FourierField| match frame {
                Frame::F => sys.eval_f(w, t),
                Frame::G => sys.eval_g(w, t),
            };
            let grad = match frame {
                Frame::F => sys.grad_f(&u, t),
                Frame::G => sys.grad_g(&u, t),
            };
            let mut up = u.clone();
            up.add_scaled(C64::new(h, 0.0), &v);
            let mut dn = u.clone();
            dn.add_scaled(C64::new(-h, 0.0), &v);
            let fd = (eval(&up) - eval(&dn)) / (2.0 * h);
            let exact = grad.inner(&v);
            worst[slot] = worst[slot].max((fd - exact).abs() / exact.abs());
        }
    }
    (
        worst[0] <= 1e-6 && worst[1] <= 1e-6,
        format!("max relative error F {:.2e}, G {:.2e}", worst[0], worst[1]),
    )
}

fn single_pair(k: usize, c: f64) -> Kernel {
    let mut coeffs = FourierField::zeros(k);
    coeffs.set(1, C64::new(c, 0.0));
    coeffs.set(-1, C64::new(c, 0.0));
    Kernel::new(coeffs, 0.5).unwrap()
}

fn c4_hofer() -> (bool, String) {
    let c = 0.1;
    let exact = 2.0 * PI * PI * c * c;
    let opts = HoferOptions::default();
    let mut ok = true;
    let mut detail = Vec::new();
    for k in [1, 4] {
        let sys = HamiltonianSystem::new(&single_pair(k, c), DensityModel::Linear { lambda: 1.0 }, k);
        let f = hofer_norm(&SystemHamiltonian { sys: &sys, frame: Frame::F }, &opts);
        let g = hofer_norm(&SystemHamiltonian { sys: &sys, frame: Frame::G }, &opts);
        let rel = (f.value - exact).abs() / exact;
        let diff = (f.value - g.value).abs();
        ok &= rel <= 1e-6 && diff <= 2.0 * opts.tol && f.flagged().is_empty() && g.flagged().is_empty();
        detail.push(format!("k={k}: |||F||| rel err {rel:.1e}, |F−G| {diff:.1e}"));
    }
    (ok, format!("2π²c² = {exact:.6}; {}", detail.join("; ")))
}

fn c5_truncation() -> (bool, String) {
    let kpsi = 16;
    let psi = reference_kernel(kpsi);
    let col = Collocation::with_size(kpsi, 4096).unwrap();
    let mut violations = 0;
    let mut worst_ratio: f64 = 0.0;
    for k in [2, 4, 8] {
        let bound = truncation_error_bound(&psi, k);
        let psik = truncate_kernel(&psi, k);
        for i in 0..100u64 {
            let mut rng = stream(5, i);
            let u = FourierField::random_unit(kpsi, &mut rng);
            let diff = convolve(&u, &psi).sub(&convolve(&u, &psik));
            let sup = col
                .to_grid(&diff.resized(kpsi))
                .samples
                .iter()
                .map(|z| z.norm())
                .fold(0.0, f64::max);
            let allowed = u.norm() * bound;
            if sup > allowed {
                violations += 1;
            }
            worst_ratio = worst_ratio.max(sup / allowed);
        }
    }
    (
        violations == 0,
        format!("{violations} violations over 300 fields, max sup/bound {worst_ratio:.3}"),
    )
}

fn c6_action_anchor() -> (bool, String) {
    let k = 8;
    let sys = HamiltonianSystem::new(&reference_kernel(k), gp(0.05), k);
    let mut ok = true;
    let mut worst: f64 = 0.0;
    for n in 0..=8i64 {
        let grid = StripGrid::constant(k, n, 0.0, 25.0, 200, 32).unwrap();
        let target = (n * n) as f64 / 2.0;
        for (_, a) in action_profile(&sys, &grid, -1.0) {
            ok &= a == target;
            worst = worst.max((a - target).abs());
        }
    }
    (ok, format!("max |A − n²/2| = {worst:e} over n = 0..8"))
}

struct StripCheck {
    ok: bool,
    detail: String,
}

fn check_strip(sys: &HamiltonianSystem, state: &ContinuationState, hofer: f64, n: i64) -> StripCheck {
    let bound = 2.0 * hofer * 1.05;
    let n2 = (n * n) as f64 / 2.0;
    let mut ok = true;
    for r in state.records.iter().filter(|r| r.t > 0.0) {
        ok &= r.energy <= bound;
        ok &= r.defect_min <= PI / (4.0 * r.t) * 1.05;
        ok &= (r.action_min - n2).abs() <= bound && (r.action_max - n2).abs() <= bound;
    }
    let d = diagnostics(sys, &state.grid, -1.0);
    let window = action_profile(sys, &state.grid, -1.0)
        .iter()
        .map(|(_, a)| (a - n2).abs())
        .fold(0.0, f64::max);
    ok &= window <= bound && d.energy <= bound;
    StripCheck {
        ok,
        detail: format!(
            "n={n} T={}: energy {:.3e}, defect {:.2e} (π/4T {:.3e}), |A−n²/2| ≤ {window:.2e}, 2|||G||| {:.4}",
            state.t(),
            d.energy,
            d.defect_min,
            PI / (4.0 * state.t()),
            2.0 * hofer
        ),
    }
}

fn c7_strip(sys: &HamiltonianSystem, hofer: f64, state: &ContinuationState) -> (bool, String) {
    let completed = (state.t() - 20.0).abs() < 1e-12;
    let c = check_strip(sys, state, hofer, 5);
    let hyp = hofer < FRAC_PI_4;
    (completed && c.ok && hyp, format!("{}; |||G||| < π/4: {hyp}", c.detail))
}

fn c8_confinement() -> (bool, String) {
    let k = 8;
    let psi = make_admissible_kernel(0.1, 2, &DecayProfile::Geometric { amplitude: 0.3, ratio: 0.8 }).unwrap();
    let sys = HamiltonianSystem::new(&psi, gp(0.05), k);
    let mut worst_normal: f64 = 0.0;
    let mut ok = true;
    for n in 0..=2 {
        let state = continue_in_t(&sys, n, &strip_options()).unwrap();
        let split = normal_split(&state.grid, 2).unwrap();
        worst_normal = worst_normal.max(split.max_normal_coeff);
    }
    ok &= worst_normal <= 1e-10;

    let full = HamiltonianSystem::new(&reference_kernel(k), gp(0.05), k);
    let l = 4;
    let gap = hofer_gap(&full, l, &HoferOptions::default()).value;
    let mut worst_ratio: f64 = 0.0;
    let mut energies = Vec::new();
    for n in 1..=4 {
        let state = continue_in_t(&full, n, &strip_options()).unwrap();
        let split = normal_split(&state.grid, l).unwrap();
        ok &= split.normal_energy <= 2.0 * gap * 1.05;
        worst_ratio = worst_ratio.max(split.normal_energy / (2.0 * gap));
        energies.push(format!("{:.2e}", split.normal_energy));
    }
    (
        ok,
        format!(
            "supp ⊆ [−2,2]: max normal coefficient {worst_normal:.1e}; ℓ=4: normal energies [{}] vs 2·gap {:.3e} (max ratio {worst_ratio:.2e})",
            energies.join(", "),
            2.0 * gap
        ),
    )
}

fn c9_fixed_points(sys: &HamiltonianSystem, hofer: f64, states: &[ContinuationState]) -> (bool, String) {
    let spec = FlowSpec::new(sys.clone(), 1e-3).unwrap();
    let cands: Vec<_> = states.iter().map(|s| extract_candidate(sys, s, -1.0)).collect();
    let records: Vec<_> = par::map_slice(&cands, |c| refine_candidate(&spec, c, &NewtonOptions::default()))
        .into_iter()
        .collect::<Result<_, _>>()
        .unwrap();
    let mut ok = true;
    let mut lines = Vec::new();
    for r in &records {
        let n2 = (r.n * r.n) as f64 / 2.0;
        ok &= r.residual <= 1e-9;
        ok &= (r.lambda.norm() - 1.0).abs() <= 1e-12;
        ok &= (r.action - n2).abs() <= 2.0 * hofer * 1.05;
        lines.push(format!("n={} res {:.1e} A {:.6}", r.n, r.residual, r.action));
    }
    let catalog = label_and_separate(&records, sys.kernel());
    let mut min_gap = f64::INFINITY;
    for w in catalog.windows(2) {
        min_gap = min_gap.min(w[1].action - w[0].action);
        ok &= w[1].n > w[0].n;
    }
    ok &= min_gap > PI;
    ok &= catalog.iter().all(|e| !e.flags.iter().any(|f| f == SEPARATION_NOT_CERTIFIED));
    (ok, format!("{}; min action gap {min_gap:.4}", lines.join(", ")))
}

/// Action profile interpolated at `s = 0` (midway between the two central
/// nodes of an even grid).
fn action_at_zero(sys: &HamiltonianSystem, grid: &StripGrid) -> f64 {
    let p = action_profile(sys, grid, -1.0);
    let i = grid.ns() / 2;
    0.5 * (p[i - 1].1 + p[i].1)
}

fn c10_orders() -> (bool, String) {
    let k = 8;
    let sys = HamiltonianSystem::new(&reference_kernel(k), gp(0.05), k);
    let mut rk_ratios = Vec::new();
    for i in 0..3u64 {
        let u = FourierField::random_unit(k, &mut stream(10, i));
        let run = |dt: f64| time_one_map(&FlowSpec::new(sys.clone(), dt).unwrap(), &u).unwrap();
        let (a, b, c) = (run(1.0 / 80.0), run(1.0 / 160.0), run(1.0 / 320.0));
        rk_ratios.push(a.sub(&b).norm() / b.sub(&c).norm());
    }
    let mut energy = Vec::new();
    let mut action = Vec::new();
    for (ns, nt) in [(50, 8), (100, 16), (200, 32)] {
        let opts = ContinuationOptions {
            t_max: 2.0,
            steps: 2,
            ns,
            nt,
            solver: SolverOptions {
                tol: 1e-11,
                ..SolverOptions::default()
            },
            ..ContinuationOptions::default()
        };
        let state = continue_in_t(&sys, 1, &opts).unwrap();
        energy.push(diagnostics(&sys, &state.grid, -1.0).energy);
        action.push(action_at_zero(&sys, &state.grid));
    }
    let ratio = |v: &[f64]| (v[0] - v[1]) / (v[1] - v[2]);
    let (re, ra) = (ratio(&energy), ratio(&action));
    let in_band = |r: f64, lo: f64, hi: f64| (lo..=hi).contains(&r);
    let ok = rk_ratios.iter().all(|&r| in_band(r, 14.0, 18.0)) && in_band(re, 3.0, 5.0) && in_band(ra, 3.0, 5.0);
    (
        ok,
        format!(
            "RK4 ratios {:?}; strip ratios energy {re:.3}, action {ra:.3}",
            rk_ratios.iter().map(|r| format!("{r:.2}")).collect::<Vec<_>>()
        ),
    )
}

#[test]
fn acceptance() {
    let mut outcomes = vec![
        criterion(1, "free-flow exactness", 1, c1_free_flow),
        criterion(2, "conservation", 120, c2_conservation),
        criterion(3, "gradient correctness", 60, c3_gradients),
        criterion(4, "closed-form Hofer norm", 60, c4_hofer),
        criterion(5, "truncation bound", 60, c5_truncation),
        criterion(6, "action anchor", 1, c6_action_anchor),
    ];

    let k = 8;
    let sys = HamiltonianSystem::new(&reference_kernel(k), gp(0.05), k);
    let mut shared = None;
    outcomes.push(criterion(7, "strip suite", 1800, || {
        let hofer = hofer_g(&sys);
        let state = continue_in_t(&sys, 5, &strip_options()).unwrap();
        let r = c7_strip(&sys, hofer, &state);
        shared = Some((hofer, state));
        r
    }));

    outcomes.push(criterion(8, "finite-dim confinement", 1800, c8_confinement));

    let (hofer, n5) = shared.expect("criterion 7 ran");
    // The n = 5 strip is shared with criterion 7 and timed there.
    outcomes.push(criterion(9, "fixed-point closure", 3600, || {
        let mut states = vec![n5];
        for n in 6..=8 {
            states.push(continue_in_t(&sys, n, &strip_options()).unwrap());
        }
        c9_fixed_points(&sys, hofer, &states)
    }));

    outcomes.push(criterion(10, "order checks", 600, c10_orders));

    let failed: Vec<usize> = outcomes.iter().filter(|o| !o.passed).map(|o| o.id).collect();
    report(format!("{} of {} criteria passed", outcomes.len() - failed.len(), outcomes.len()));
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
