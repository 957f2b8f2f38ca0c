//! Fixed points of the projectivized time-one map: extraction from strips,
//! Newton refinement and an action-ordered catalog.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::floer::{action_profile, best_slice, ContinuationState};
use crate::flow::{flow_g_observed, tangent_columns, time_one_map, FlowSpec};
use crate::hamiltonian::HamiltonianSystem;
use crate::spectral::{FourierField, Kernel, C64, TWO_PI};

#[derive(Clone, Debug, Serialize)]
pub struct FixedPointRecord {
    pub u: FourierField,
    pub n: i64,
    /// `‖Q(u) − λu‖₂`.
    pub residual: f64,
    pub lambda: C64,
    pub action: f64,
    /// Change of the Hamiltonian term of the action caused by refinement.
    pub action_drift: f64,
    pub t_source: f64,
    pub distinct_from_trivial: bool,
    pub iterations: usize,
    pub flags: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            tol: 1e-9,
            max_iter: 20,
        }
    }
}

/// `(‖Q(u) − λu‖, λ)` with `λ = ⟨u, Qu⟩_ℂ / |⟨u, Qu⟩_ℂ|`.
pub fn fixed_point_residual(spec: &FlowSpec, u: &FourierField) -> Result<(f64, C64)> {
    let q = time_one_map(spec, u)?;
    let z = u.inner_c(&q);
    let lambda = if z.norm() > 0.0 { z / z.norm() } else { C64::new(1.0, 0.0) };
    Ok((q.sub(&u.scaled(lambda)).norm(), lambda))
}

/// Orthonormal real basis of the horizontal space at `u` (dimension
/// `2(2k+1) − 2`).
fn horizontal_basis(u: &FourierField) -> Vec<FourierField> {
    let k = u.k();
    let unit = 1.0 / TWO_PI.sqrt();
    let mut basis: Vec<FourierField> = Vec::new();
    let target = 2 * (2 * k + 1) - 2;
    for n in -(k as i64)..=(k as i64) {
        for z in [C64::new(unit, 0.0), C64::new(0.0, unit)] {
            let mut e = FourierField::zeros(k);
            e.set(n, z);
            let mut v = e.horizontal_at(u);
            for _ in 0..2 {
                for b in &basis {
                    let c = v.inner(b);
                    v.add_scaled(C64::new(-c, 0.0), b);
                }
            }
            let nv = v.norm();
            if nv > 1e-6 {
                basis.push(v.scaled(C64::new(1.0 / nv, 0.0)));
            }
            if basis.len() == target {
                return basis;
            }
        }
    }
    basis
}

/// Minimum-norm least squares for a small dense real system, by CG on the
/// normal equations.
fn dense_lsq(cols: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = cols.len();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let apply = |x: &[f64]| {
        let mut out = vec![0.0; b.len()];
        for (c, &xi) in cols.iter().zip(x) {
            for (o, v) in out.iter_mut().zip(c) {
                *o += xi * v;
            }
        }
        out
    };
    let apply_t = |y: &[f64]| cols.iter().map(|c| dot(c, y)).collect::<Vec<_>>();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut s = apply_t(&r);
    let mut p = s.clone();
    let g0 = dot(&s, &s);
    let mut g = g0;
    for _ in 0..4 * n {
        if g <= 1e-30 * g0 || g == 0.0 {
            break;
        }
        let q = apply(&p);
        let qq = dot(&q, &q);
        if qq == 0.0 {
            break;
        }
        let a = g / qq;
        for i in 0..n {
            x[i] += a * p[i];
        }
        for (ri, qi) in r.iter_mut().zip(&q) {
            *ri -= a * qi;
        }
        s = apply_t(&r);
        let gn = dot(&s, &s);
        let beta = gn / g;
        g = gn;
        for i in 0..n {
            p[i] = s[i] + beta * p[i];
        }
    }
    x
}

fn to_real(v: &FourierField) -> Vec<f64> {
    v.coeffs().iter().flat_map(|c| [c.re, c.im]).collect()
}

fn dominant_mode(u: &FourierField) -> i64 {
    u.iter_modes()
        .max_by(|a, b| a.1.norm_sqr().total_cmp(&b.1.norm_sqr()))
        .map(|(n, _)| n)
        .unwrap_or(0)
}

/// Newton iteration for `Q(u) = λu` on the horizontal space at `u` plus the
/// phase of `λ`. The record's action is the free value `n²/2` of the
/// dominant mode; [`refine_candidate`] replaces it with the strip action.
pub fn refine_newton(spec: &FlowSpec, u0: &FourierField, opts: &NewtonOptions) -> Result<FixedPointRecord> {
    let mut u = u0.normalized()?;
    let (mut res, mut lambda) = fixed_point_residual(spec, &u)?;
    let mut iterations = 0;
    let record = |u: FourierField, res: f64, lambda: C64, iterations: usize| {
        let n = dominant_mode(&u);
        FixedPointRecord {
            u,
            n,
            residual: res,
            lambda,
            action: 0.5 * (n * n) as f64,
            action_drift: 0.0,
            t_source: 0.0,
            distinct_from_trivial: true,
            iterations,
            flags: Vec::new(),
        }
    };
    while res > opts.tol {
        if iterations >= opts.max_iter {
            return Err(Error::NewtonFailed {
                iterations,
                residual: res,
                best: Box::new(record(u, res, lambda, iterations)),
            });
        }
        let q = time_one_map(spec, &u)?;
        let r = q.sub(&u.scaled(lambda));
        let basis = horizontal_basis(&u);
        let images = tangent_columns(spec, &u, &basis)?;
        let mut cols: Vec<Vec<f64>> = basis
            .iter()
            .zip(&images)
            .map(|(b, d)| to_real(&d.sub(&b.scaled(lambda))))
            .collect();
        cols.push(to_real(&u.scaled(-C64::new(0.0, 1.0) * lambda)));
        let rhs: Vec<f64> = to_real(&r).into_iter().map(|x| -x).collect();
        let x = dense_lsq(&cols, &rhs);
        let mut step = FourierField::zeros(u.k());
        for (b, &xi) in basis.iter().zip(&x) {
            step.add_scaled(C64::new(xi, 0.0), b);
        }
        let mut alpha = 1.0;
        let mut accepted = None;
        while alpha >= 1.0 / 64.0 {
            let mut trial = u.clone();
            trial.add_scaled(C64::new(alpha, 0.0), &step);
            let trial = trial.normalized()?;
            let (tr, tl) = fixed_point_residual(spec, &trial)?;
            if tr < res {
                accepted = Some((trial, tr, tl));
                break;
            }
            alpha *= 0.5;
        }
        iterations += 1;
        match accepted {
            Some((nu, nr, nl)) => {
                u = nu;
                res = nr;
                lambda = nl;
                log::debug!("newton {iterations}: residual {res:.3e}");
            }
            None => {
                return Err(Error::NewtonFailed {
                    iterations,
                    residual: res,
                    best: Box::new(record(u, res, lambda, iterations)),
                })
            }
        }
    }
    Ok(record(u, res, lambda, iterations))
}

/// A fixed-point candidate taken from a converged strip.
#[derive(Clone, Debug, Serialize)]
pub struct Candidate {
    pub u: FourierField,
    pub n: i64,
    pub column: usize,
    pub s: f64,
    pub defect: f64,
    /// Strip action `A(s)` at the extraction column.
    pub action: f64,
    /// `φ_T(s)` and `φ_T(s) ∫₀¹ G_t(ũ(s, t)) dt` at the extraction column.
    pub phi: f64,
    pub hamiltonian_term: f64,
    pub t_source: f64,
}

/// The `t = 0` node of the column with the smallest slice defect.
pub fn extract_candidate(sys: &HamiltonianSystem, state: &ContinuationState, orientation: f64) -> Candidate {
    let grid = &state.grid;
    let (column, defect) = best_slice(sys, grid);
    let profile = action_profile(sys, grid, orientation);
    let phi = grid.cutoff().eval(grid.s(column));
    let ham: f64 = (0..grid.nt())
        .map(|j| sys.eval_g_raw(grid.node(column, j), grid.t(j)) * grid.dt())
        .sum();
    Candidate {
        u: grid.field(column, 0),
        n: grid.mode(),
        column,
        s: grid.s(column),
        defect,
        action: profile[column].1,
        phi,
        hamiltonian_term: phi * ham,
        t_source: grid.t_cut(),
    }
}

/// `∫₀¹ G_t(φ^G_t(u)) dt` along the computed orbit (trapezoid on the RK4 steps).
fn orbit_hamiltonian(spec: &FlowSpec, u: &FourierField) -> Result<f64> {
    let fwd = spec.over(0.0, 1.0);
    let mut samples = Vec::new();
    flow_g_observed(&fwd, u, |t, v| samples.push(spec.sys.eval_g(v, t)))?;
    let h = 1.0 / (samples.len() - 1) as f64;
    let inner: f64 = samples[1..samples.len() - 1].iter().sum();
    Ok(h * (inner + 0.5 * (samples[0] + samples[samples.len() - 1])))
}

/// Refine a strip candidate; the action is the strip action plus the change
/// of the Hamiltonian term between the strip slice and the refined orbit.
pub fn refine_candidate(spec: &FlowSpec, cand: &Candidate, opts: &NewtonOptions) -> Result<FixedPointRecord> {
    let mut rec = refine_newton(spec, &cand.u, opts)?;
    let drift = if cand.phi == 0.0 {
        0.0
    } else {
        cand.phi * orbit_hamiltonian(spec, &rec.u)? - cand.hamiltonian_term
    };
    rec.n = cand.n;
    rec.action = cand.action + drift;
    rec.action_drift = drift;
    rec.t_source = cand.t_source;
    Ok(rec)
}

#[derive(Clone, Debug, Serialize)]
pub struct CatalogEntry {
    pub n: i64,
    pub action: f64,
    pub action_drift: f64,
    pub residual: f64,
    pub lambda: [f64; 2],
    pub coeffs: Vec<[f64; 2]>,
    pub flags: Vec<String>,
}

pub const SEPARATION_NOT_CERTIFIED: &str = "separation-not-certified";
pub const TRIVIAL_COINCIDENT: &str = "trivial-coincident";

/// Sort by action, flag pairs closer than `π` in action and records that
/// coincide with a free fixed point `u⁰_m` where `ψ̂(m) = 0`.
pub fn label_and_separate(records: &[FixedPointRecord], psi: &Kernel) -> Vec<CatalogEntry> {
    let mut recs: Vec<FixedPointRecord> = records.to_vec();
    recs.sort_by(|a, b| a.action.total_cmp(&b.action).then(a.n.cmp(&b.n)));
    let mut out = Vec::with_capacity(recs.len());
    for (i, r) in recs.iter().enumerate() {
        let mut flags = r.flags.clone();
        let close = recs
            .iter()
            .enumerate()
            .any(|(j, o)| j != i && (o.action - r.action).abs() < std::f64::consts::PI);
        if close {
            flags.push(SEPARATION_NOT_CERTIFIED.to_string());
        }
        let k = r.u.k() as i64;
        let trivial = (-k..=k).any(|m| {
            psi.get(m).norm() == 0.0 && r.u.projective_distance(&FourierField::mode(r.u.k(), m)) <= 1e-6
        });
        if trivial {
            flags.push(TRIVIAL_COINCIDENT.to_string());
        }
        out.push(CatalogEntry {
            n: r.n,
            action: r.action,
            action_drift: r.action_drift,
            residual: r.residual,
            lambda: [r.lambda.re, r.lambda.im],
            coeffs: r.u.coeffs().iter().map(|c| [c.re, c.im]).collect(),
            flags,
        });
    }
    out
}
