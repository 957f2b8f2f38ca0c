//! Hofer norm `∫₀¹ (max H_t − min H_t) dt` estimated by Gauss–Legendre
//! quadrature in `t` and multistart projected gradient ascent on the unit
//! sphere of `ℂ^{2k+1}`.

use serde::Serialize;

use super::HamiltonianSystem;
use crate::par;
use crate::rng::{purpose, stream};
use crate::spectral::{dot_re, norm_sqr_raw, FourierField, C64, TWO_PI};

/// A time-dependent Hamiltonian on band-`k` fields.
pub trait TimeHamiltonian: Sync {
    fn k(&self) -> usize;
    fn value(&self, u: &[C64], t: f64) -> f64;
    fn gradient(&self, u: &[C64], t: f64, out: &mut [C64]);
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Frame {
    /// `F_t` (lab frame).
    F,
    /// `G_t = F_t ∘ φ⁰_{−t}` (interaction picture).
    G,
}

pub struct SystemHamiltonian<'a> {
    pub sys: &'a HamiltonianSystem,
    pub frame: Frame,
}

impl TimeHamiltonian for SystemHamiltonian<'_> {
    fn k(&self) -> usize {
        self.sys.k()
    }

    fn value(&self, u: &[C64], t: f64) -> f64 {
        match self.frame {
            Frame::F => self.sys.eval_f_raw(u, t),
            Frame::G => self.sys.eval_g_raw(u, t),
        }
    }

    fn gradient(&self, u: &[C64], t: f64, out: &mut [C64]) {
        match self.frame {
            Frame::F => self.sys.grad_f_raw(u, t, out),
            Frame::G => self.sys.grad_g_raw(u, t, out),
        }
    }
}

/// `A_t − B_t`.
pub struct DifferenceHamiltonian<A, B> {
    pub a: A,
    pub b: B,
}

impl<A: TimeHamiltonian, B: TimeHamiltonian> TimeHamiltonian for DifferenceHamiltonian<A, B> {
    fn k(&self) -> usize {
        self.a.k()
    }

    fn value(&self, u: &[C64], t: f64) -> f64 {
        self.a.value(u, t) - self.b.value(u, t)
    }

    fn gradient(&self, u: &[C64], t: f64, out: &mut [C64]) {
        let mut tmp = vec![C64::new(0.0, 0.0); out.len()];
        self.a.gradient(u, t, out);
        self.b.gradient(u, t, &mut tmp);
        for (o, x) in out.iter_mut().zip(tmp) {
            *o -= x;
        }
    }
}

#[derive(Clone, Debug)]
pub struct HoferOptions {
    pub nodes: usize,
    pub starts: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for HoferOptions {
    fn default() -> Self {
        HoferOptions {
            nodes: 8,
            starts: 32,
            tol: 1e-9,
            max_iter: 5000,
            seed: 0,
        }
    }
}

/// Extrema at one quadrature node.
#[derive(Clone, Debug, Serialize)]
pub struct HoferNode {
    pub t: f64,
    pub weight: f64,
    pub max: f64,
    pub min: f64,
    pub argmax: FourierField,
    pub argmin: FourierField,
    pub max_converged: bool,
    pub min_converged: bool,
    pub iterations: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct HoferEstimate {
    pub value: f64,
    pub nodes: Vec<HoferNode>,
}

impl HoferEstimate {
    /// Indices of nodes where some inner optimization hit the iteration cap.
    pub fn flagged(&self) -> Vec<usize> {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| !(n.max_converged && n.min_converged))
            .map(|(i, _)| i)
            .collect()
    }
}

/// Gauss–Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "need at least one quadrature node");
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for j in 2..=n {
                let p2 = ((2 * j - 1) as f64 * z * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let wi = 1.0 / ((1.0 - z * z) * dp * dp);
        x[i] = 0.5 * (1.0 - z);
        x[n - 1 - i] = 0.5 * (1.0 + z);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

struct Extremum {
    value: f64,
    point: Vec<C64>,
    converged: bool,
    iterations: usize,
}

fn normalize(v: &mut [C64]) {
    let s = 1.0 / (TWO_PI * norm_sqr_raw(v)).sqrt();
    for c in v.iter_mut() {
        *c *= s;
    }
}

/// Ascent (`sign = 1`) or descent (`sign = −1`) of `H_t` on the unit sphere
/// from `start`, with Barzilai–Borwein steps and Armijo backtracking.
fn optimize<H: TimeHamiltonian + ?Sized>(
    h: &H,
    t: f64,
    start: Vec<C64>,
    sign: f64,
    tol: f64,
    max_iter: usize,
) -> Extremum {
    let m = start.len();
    let mut u = start;
    normalize(&mut u);
    let mut val = sign * h.value(&u, t);
    let mut g = vec![C64::new(0.0, 0.0); m];
    let project = |u: &[C64], g: &mut [C64]| {
        let r = TWO_PI * dot_re(u, g);
        for (x, &b) in g.iter_mut().zip(u) {
            *x -= r * b;
        }
    };
    h.gradient(&u, t, &mut g);
    g.iter_mut().for_each(|c| *c *= sign);
    project(&u, &mut g);
    let mut step = 1.0;
    let mut trial = vec![C64::new(0.0, 0.0); m];
    let mut g_new = vec![C64::new(0.0, 0.0); m];
    for it in 0..max_iter {
        let gn2 = TWO_PI * norm_sqr_raw(&g);
        if gn2.sqrt() <= tol {
            return Extremum {
                value: sign * val,
                point: u,
                converged: true,
                iterations: it,
            };
        }
        let mut alpha = step;
        let mut accepted = false;
        let slack = 1e-15 * val.abs().max(1e-300);
        for _ in 0..60 {
            for ((x, &a), &b) in trial.iter_mut().zip(&u).zip(&g) {
                *x = a + alpha * b;
            }
            normalize(&mut trial);
            let v = sign * h.value(&trial, t);
            if v >= val + 1e-4 * alpha * gn2 - slack {
                accepted = true;
                val = v;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            return Extremum {
                value: sign * val,
                point: u,
                converged: false,
                iterations: it,
            };
        }
        h.gradient(&trial, t, &mut g_new);
        g_new.iter_mut().for_each(|c| *c *= sign);
        project(&trial, &mut g_new);
        // BB1 step from the displacement and the (sign-flipped) gradient change
        let mut ss = 0.0;
        let mut sy = 0.0;
        for i in 0..m {
            let s = trial[i] - u[i];
            let y = g[i] - g_new[i];
            ss += s.norm_sqr();
            sy += s.re * y.re + s.im * y.im;
        }
        step = if sy > 0.0 && ss > 0.0 {
            (ss / sy).clamp(1e-8, 1e8)
        } else {
            (2.0 * alpha).min(1e8)
        };
        std::mem::swap(&mut u, &mut trial);
        std::mem::swap(&mut g, &mut g_new);
    }
    let gn = (TWO_PI * norm_sqr_raw(&g)).sqrt();
    Extremum {
        value: sign * val,
        point: u,
        converged: gn <= tol,
        iterations: max_iter,
    }
}

/// Best of all starts; ties go to the lowest start index so the reduction
/// does not depend on evaluation order.
fn best_over_starts<H: TimeHamiltonian + ?Sized>(
    h: &H,
    t: f64,
    starts: &[Vec<C64>],
    sign: f64,
    opts: &HoferOptions,
) -> Extremum {
    let results = par::map_slice(starts, |s| optimize(h, t, s.clone(), sign, opts.tol, opts.max_iter));
    let mut best: Option<Extremum> = None;
    for r in results {
        let better = match &best {
            None => true,
            Some(b) => sign * r.value > sign * b.value,
        };
        if better {
            best = Some(r);
        }
    }
    best.expect("at least one start")
}

fn starting_points(k: usize, opts: &HoferOptions, node: usize) -> Vec<Vec<C64>> {
    let kk = k as i64;
    let mut starts: Vec<Vec<C64>> = (-kk..=kk)
        .map(|n| FourierField::mode(k, n).into_coeffs())
        .collect();
    let mut rng = stream(opts.seed, purpose::HOFER_STARTS + node as u64);
    for _ in 0..opts.starts {
        starts.push(FourierField::random_unit(k, &mut rng).into_coeffs());
    }
    starts
}

/// Estimate `|||H|||`. Each extremum is a local optimum reached from the
/// best of the starts, so the value is a lower bound up to the optimizer
/// tolerance.
pub fn hofer_norm<H: TimeHamiltonian + ?Sized>(h: &H, opts: &HoferOptions) -> HoferEstimate {
    let k = h.k();
    let (ts, ws) = gauss_legendre(opts.nodes.max(1));
    let mut nodes = Vec::with_capacity(ts.len());
    let mut value = 0.0;
    for (i, (&t, &w)) in ts.iter().zip(&ws).enumerate() {
        let starts = starting_points(k, opts, i);
        let hi = best_over_starts(h, t, &starts, 1.0, opts);
        let lo = best_over_starts(h, t, &starts, -1.0, opts);
        value += w * (hi.value - lo.value);
        nodes.push(HoferNode {
            t,
            weight: w,
            max: hi.value,
            min: lo.value,
            argmax: FourierField::from_coeffs(k, hi.point).expect("band preserved"),
            argmin: FourierField::from_coeffs(k, lo.point).expect("band preserved"),
            max_converged: hi.converged,
            min_converged: lo.converged,
            iterations: hi.iterations.max(lo.iterations),
        });
    }
    HoferEstimate { value, nodes }
}

/// `|||G^k − G^l|||` for the ladder elements of `sys` (which is at level `k`).
pub fn hofer_gap(sys: &HamiltonianSystem, l: usize, opts: &HoferOptions) -> HoferEstimate {
    let lower = sys.truncated(l.min(sys.k()));
    let diff = DifferenceHamiltonian {
        a: SystemHamiltonian {
            sys,
            frame: Frame::G,
        },
        b: SystemHamiltonian {
            sys: &lower,
            frame: Frame::G,
        },
    };
    hofer_norm(&diff, opts)
}
