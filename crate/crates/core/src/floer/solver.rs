//! Damped Gauss–Newton for the strip residual with CGLS inner solves.
//!
//! The linearization acts on horizontal perturbations `ξ` at the interior
//! nodes. Alignment phases of the difference stencils are frozen at the
//! current iterate and `Hess G` comes from cached pointwise data.

use serde::Serialize;

use super::strip::{overlap, residual, Residual, StripGrid};
use crate::error::{Error, Result};
use crate::hamiltonian::{HamiltonianSystem, HessianCache};
use crate::linalg::cgls;
use crate::par;
use crate::spectral::{apply_free_phase, project_horizontal, C64, I};

#[derive(Clone, Debug)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub cg_max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-8,
            max_iter: 25,
            cg_max_iter: 3000,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct SolveReport {
    pub iterations: usize,
    pub residual: f64,
    pub cg_iterations: usize,
}

struct NodeLin {
    phases: [C64; 4],
    c: C64,
    hess: Option<HessianCache>,
}

pub(crate) struct Linearization<'a> {
    sys: &'a HamiltonianSystem,
    grid: &'a StripGrid,
    phi: Vec<f64>,
    nodes: Vec<NodeLin>,
}

impl<'a> Linearization<'a> {
    pub(crate) fn new(sys: &'a HamiltonianSystem, grid: &'a StripGrid) -> Self {
        let cut = grid.cutoff();
        let phi: Vec<f64> = (0..grid.ns()).map(|i| cut.eval(grid.s(i))).collect();
        let nt = grid.nt();
        let nodes = par::map_range(grid.ns() * nt, |idx| {
            let (i, j) = (idx / nt, idx % nt);
            if grid.is_boundary(i) {
                return NodeLin {
                    phases: [C64::new(1.0, 0.0); 4],
                    c: C64::new(0.0, 0.0),
                    hess: None,
                };
            }
            let active = phi[i] != 0.0;
            let loc = grid.local(active.then_some(sys), i, j);
            let e: Vec<C64> = (0..loc.ds.len())
                .map(|q| loc.ds[q] + I * loc.dt[q] + phi[i] * loc.grad[q])
                .collect();
            let u = grid.node(i, j);
            NodeLin {
                phases: loc.phases,
                c: overlap(u, &e),
                hess: active.then(|| sys.hessian_cache_g(u, grid.t(j))),
            }
        });
        Linearization {
            sys,
            grid,
            phi,
            nodes,
        }
    }

    fn len(&self) -> usize {
        self.grid.nodes().len()
    }

    pub(crate) fn apply(&self, xi: &[C64], out: &mut [C64]) {
        let g = self.grid;
        let (m, nt) = (g.m(), g.nt());
        let hs = 0.5 / g.ds();
        let ht = 0.5 / g.dt();
        par::for_each_chunk_mut(out, nt * m, |i, col| {
            if g.is_boundary(i) {
                col.fill(C64::new(0.0, 0.0));
                return;
            }
            let mut up = vec![C64::new(0.0, 0.0); m];
            let mut down = vec![C64::new(0.0, 0.0); m];
            let mut hx = vec![C64::new(0.0, 0.0); m];
            for j in 0..nt {
                let nl = &self.nodes[i * nt + j];
                let at = |ii: usize, jj: usize| &xi[g.offset(ii, jj)..g.offset(ii, jj) + m];
                let x = at(i, j);
                let xp = at(i + 1, j);
                let xm = at(i - 1, j);
                if j + 1 < nt {
                    up.copy_from_slice(at(i, j + 1));
                } else {
                    up.copy_from_slice(at(i, 0));
                    apply_free_phase(g.k(), 1.0, &mut up);
                }
                if j > 0 {
                    down.copy_from_slice(at(i, j - 1));
                } else {
                    down.copy_from_slice(at(i, nt - 1));
                    apply_free_phase(g.k(), -1.0, &mut down);
                }
                if let Some(h) = &nl.hess {
                    self.sys.hessian_g_apply(h, x, &mut hx);
                } else {
                    hx.fill(C64::new(0.0, 0.0));
                }
                let o = &mut col[j * m..(j + 1) * m];
                let [am, ap, adn, aup] = nl.phases;
                for q in 0..m {
                    o[q] = (ap * xp[q] - am * xm[q]) * hs
                        + I * (aup * up[q] - adn * down[q]) * ht
                        + self.phi[i] * hx[q]
                        - nl.c * x[q];
                }
                project_horizontal(g.node(i, j), o);
            }
        });
    }

    pub(crate) fn apply_t(&self, y: &[C64], out: &mut [C64]) {
        let g = self.grid;
        let (m, nt) = (g.m(), g.nt());
        let hs = 0.5 / g.ds();
        let ht = 0.5 / g.dt();
        let mut yp = y.to_vec();
        par::for_each_chunk_mut(&mut yp, nt * m, |i, col| {
            if g.is_boundary(i) {
                col.fill(C64::new(0.0, 0.0));
                return;
            }
            for j in 0..nt {
                project_horizontal(g.node(i, j), &mut col[j * m..(j + 1) * m]);
            }
        });
        let yp = &yp;
        par::for_each_chunk_mut(out, nt * m, |i, col| {
            if g.is_boundary(i) {
                col.fill(C64::new(0.0, 0.0));
                return;
            }
            let at = |ii: usize, jj: usize| &yp[g.offset(ii, jj)..g.offset(ii, jj) + m];
            let mut hx = vec![C64::new(0.0, 0.0); m];
            let mut tmp = vec![C64::new(0.0, 0.0); m];
            for j in 0..nt {
                let nl = &self.nodes[i * nt + j];
                let y0 = at(i, j);
                if let Some(h) = &nl.hess {
                    self.sys.hessian_g_apply(h, y0, &mut hx);
                } else {
                    hx.fill(C64::new(0.0, 0.0));
                }
                let o = &mut col[j * m..(j + 1) * m];
                for q in 0..m {
                    o[q] = self.phi[i] * hx[q] - nl.c.conj() * y0[q];
                }
                // s-neighbours (boundary rows of yp are zero)
                let a = self.nodes[(i - 1) * nt + j].phases[1].conj();
                let yl = at(i - 1, j);
                let b = self.nodes[(i + 1) * nt + j].phases[0].conj();
                let yr = at(i + 1, j);
                for q in 0..m {
                    o[q] += (a * yl[q] - b * yr[q]) * hs;
                }
                // node (i, j) is the upper neighbour of (i, j−1)
                let jm = if j > 0 { j - 1 } else { nt - 1 };
                let a = self.nodes[i * nt + jm].phases[3].conj();
                for (t, v) in tmp.iter_mut().zip(at(i, jm)) {
                    *t = -I * a * v * ht;
                }
                if j == 0 {
                    apply_free_phase(g.k(), -1.0, &mut tmp);
                }
                for q in 0..m {
                    o[q] += tmp[q];
                }
                // and the lower neighbour of (i, j+1)
                let jp = if j + 1 < nt { j + 1 } else { 0 };
                let a = self.nodes[i * nt + jp].phases[2].conj();
                for (t, v) in tmp.iter_mut().zip(at(i, jp)) {
                    *t = I * a * v * ht;
                }
                if j + 1 == nt {
                    apply_free_phase(g.k(), 1.0, &mut tmp);
                }
                for q in 0..m {
                    o[q] += tmp[q];
                }
                project_horizontal(g.node(i, j), o);
            }
        });
    }
}

/// `ũ ← normalize(ũ + α ξ)` at interior nodes.
fn stepped(grid: &StripGrid, xi: &[C64], alpha: f64) -> StripGrid {
    let mut out = grid.clone();
    let m = grid.m();
    let nt = grid.nt();
    let nodes = out.nodes_mut();
    for i in 1..grid.ns() - 1 {
        let o = i * nt * m;
        for (u, x) in nodes[o..o + nt * m].iter_mut().zip(&xi[o..o + nt * m]) {
            *u += alpha * x;
        }
    }
    out.normalize();
    out
}

/// Solve `Π(∂̄ũ + φ_T ∇G_t(ũ)) = 0` starting from `grid`.
pub fn solve_strip(
    sys: &HamiltonianSystem,
    grid: StripGrid,
    opts: &SolverOptions,
) -> Result<(StripGrid, SolveReport)> {
    let mut grid = grid;
    let mut res: Residual = residual(sys, &grid);
    let mut report = SolveReport {
        iterations: 0,
        residual: res.norm,
        cg_iterations: 0,
    };
    if !res.norm.is_finite() {
        return Err(Error::StripSolve {
            iterations: 0,
            residual: res.norm,
            reason: "non-finite initial residual".into(),
            best: Box::new(grid),
        });
    }
    while res.norm > opts.tol {
        if report.iterations >= opts.max_iter {
            return Err(Error::StripSolve {
                iterations: report.iterations,
                residual: res.norm,
                reason: "iteration cap reached".into(),
                best: Box::new(grid),
            });
        }
        let lin = Linearization::new(sys, &grid);
        let rhs: Vec<C64> = res.values.iter().map(|v| -v).collect();
        let rtol = (0.1 * res.norm).clamp(1e-10, 1e-2);
        let (xi, cg) = cgls(
            lin.len(),
            &rhs,
            |v, o| lin.apply(v, o),
            |v, o| lin.apply_t(v, o),
            rtol,
            opts.cg_max_iter,
        );
        report.cg_iterations += cg.iterations;
        log::debug!(
            "Gauss-Newton {}: residual {:.3e}, CGLS {} iterations, relative normal residual {:.3e}",
            report.iterations,
            res.norm,
            cg.iterations,
            cg.relative_normal_residual
        );
        let mut alpha = 1.0;
        let accepted = loop {
            let trial = stepped(&grid, &xi, alpha);
            let tres = residual(sys, &trial);
            if tres.norm.is_finite() && tres.norm <= (1.0 - 1e-4 * alpha) * res.norm {
                break Some((trial, tres));
            }
            alpha *= 0.5;
            if alpha < 1.0 / 256.0 {
                break None;
            }
        };
        report.iterations += 1;
        match accepted {
            Some((mut trial, tres)) => {
                trial.align_columns();
                grid = trial;
                res = tres;
                report.residual = res.norm;
                log::debug!(
                    "gauss-newton {}: residual {:.3e} (cg {}, step {alpha})",
                    report.iterations,
                    res.norm,
                    cg.iterations
                );
            }
            None => {
                return Err(Error::StripSolve {
                    iterations: report.iterations,
                    residual: res.norm,
                    reason: "line search failed".into(),
                    best: Box::new(grid),
                })
            }
        }
    }
    Ok((grid, report))
}
