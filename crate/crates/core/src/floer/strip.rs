use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Cutoff;
use crate::error::{Error, Result};
use crate::hamiltonian::HamiltonianSystem;
use crate::par;
use crate::spectral::{
    alignment_phase, apply_free_phase, projective_distance_raw, dot_c, dot_re, norm_sqr_raw, project_horizontal,
    FourierField, C64, I, TWO_PI,
};

/// Discretized strip `ũ: [−S, S] × [0, 1] → ℙ(ℂ^{2k+1})`.
///
/// Nodes sit at `s_i = −S + iΔs` (`i = 0..N_s`, `Δs = 2S/(N_s − 1)`) and
/// `t_j = j/N_t` (`j = 0..N_t`). The row `t = 1` is not stored: it is the
/// free-flow image of row `t = 0`. The columns `s = ±S` are held at `u⁰_n`.
/// Each node is a unit-norm representative with an arbitrary phase.
#[derive(Clone, Debug, PartialEq)]
pub struct StripGrid {
    k: usize,
    n: i64,
    t_cut: f64,
    s_half: f64,
    ns: usize,
    nt: usize,
    nodes: Vec<C64>,
}

/// Aligned differences and gradient at one node.
pub(crate) struct Local {
    pub ds: Vec<C64>,
    pub dt: Vec<C64>,
    pub grad: Vec<C64>,
    /// Alignment phases of the neighbours `s−, s+, t−, t+`.
    pub phases: [C64; 4],
}

impl StripGrid {
    /// The constant strip `ũ ≡ u⁰_n`.
    pub fn constant(k: usize, n: i64, t_cut: f64, s_half: f64, ns: usize, nt: usize) -> Result<Self> {
        if n.unsigned_abs() as usize > k {
            return Err(Error::invalid(format!("mode {n} exceeds the band k = {k}")));
        }
        if ns < 5 || nt < 3 {
            return Err(Error::invalid(format!("strip grid {ns}x{nt} too small (need at least 5x3)")));
        }
        if ns % 2 == 1 {
            // With both boundary columns even, central differences in s leave
            // the odd columns free to carry a common null perturbation.
            return Err(Error::invalid(format!("strip column count {ns} must be even")));
        }
        if !(s_half > 0.0 && s_half.is_finite()) || !(t_cut >= 0.0 && t_cut.is_finite()) {
            return Err(Error::invalid("strip half-width must be positive and T nonnegative"));
        }
        let u = FourierField::mode(k, n);
        let mut nodes = Vec::with_capacity(ns * nt * (2 * k + 1));
        for _ in 0..ns * nt {
            nodes.extend_from_slice(u.coeffs());
        }
        Ok(StripGrid {
            k,
            n,
            t_cut,
            s_half,
            ns,
            nt,
            nodes,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn mode(&self) -> i64 {
        self.n
    }

    pub fn t_cut(&self) -> f64 {
        self.t_cut
    }

    pub fn set_t_cut(&mut self, t: f64) {
        self.t_cut = t;
    }

    pub fn cutoff(&self) -> Cutoff {
        Cutoff::new(self.t_cut)
    }

    pub fn s_half(&self) -> f64 {
        self.s_half
    }

    pub fn ns(&self) -> usize {
        self.ns
    }

    pub fn nt(&self) -> usize {
        self.nt
    }

    pub(crate) fn m(&self) -> usize {
        2 * self.k + 1
    }

    pub fn ds(&self) -> f64 {
        2.0 * self.s_half / (self.ns - 1) as f64
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.nt as f64
    }

    pub fn s(&self, i: usize) -> f64 {
        -self.s_half + i as f64 * self.ds()
    }

    pub fn t(&self, j: usize) -> f64 {
        j as f64 * self.dt()
    }

    pub fn is_boundary(&self, i: usize) -> bool {
        i == 0 || i + 1 == self.ns
    }

    pub(crate) fn offset(&self, i: usize, j: usize) -> usize {
        (i * self.nt + j) * self.m()
    }

    pub fn node(&self, i: usize, j: usize) -> &[C64] {
        let o = self.offset(i, j);
        &self.nodes[o..o + self.m()]
    }

    pub fn node_mut(&mut self, i: usize, j: usize) -> &mut [C64] {
        let o = self.offset(i, j);
        let m = self.m();
        &mut self.nodes[o..o + m]
    }

    pub fn field(&self, i: usize, j: usize) -> FourierField {
        FourierField::from_coeffs(self.k, self.node(i, j).to_vec()).expect("node length")
    }

    pub fn nodes(&self) -> &[C64] {
        &self.nodes
    }

    pub(crate) fn nodes_mut(&mut self) -> &mut [C64] {
        &mut self.nodes
    }

    pub fn asymptote(&self) -> FourierField {
        FourierField::mode(self.k, self.n)
    }

    /// Node at `(i, j ± 1)`, with the twist applied across `t = 1` / `t = 0`.
    pub(crate) fn t_neighbor(&self, i: usize, j: usize, up: bool, out: &mut [C64]) {
        if up {
            if j + 1 < self.nt {
                out.copy_from_slice(self.node(i, j + 1));
            } else {
                out.copy_from_slice(self.node(i, 0));
                apply_free_phase(self.k, 1.0, out);
            }
        } else if j > 0 {
            out.copy_from_slice(self.node(i, j - 1));
        } else {
            out.copy_from_slice(self.node(i, self.nt - 1));
            apply_free_phase(self.k, -1.0, out);
        }
    }

    /// Aligned `D_s`, `D_t` and (if requested) `∇G_t` at node `(i, j)`.
    /// `D_s` is one-sided of second order on the boundary columns.
    pub(crate) fn local(&self, sys: Option<&HamiltonianSystem>, i: usize, j: usize) -> Local {
        let m = self.m();
        let u = self.node(i, j);
        let h = self.ds();
        let mut ds = vec![C64::new(0.0, 0.0); m];
        let mut phases = [C64::new(1.0, 0.0); 4];
        if i == 0 || i + 1 == self.ns {
            let (a, b, sgn) = if i == 0 {
                (self.node(1, j), self.node(2, j), 1.0)
            } else {
                (self.node(i - 1, j), self.node(i - 2, j), -1.0)
            };
            let pa = alignment_phase(u, a);
            let pb = alignment_phase(u, b);
            for q in 0..m {
                ds[q] = sgn * (-3.0 * u[q] + 4.0 * pa * a[q] - pb * b[q]) / (2.0 * h);
            }
        } else {
            let plus = self.node(i + 1, j);
            let minus = self.node(i - 1, j);
            phases[0] = alignment_phase(u, minus);
            phases[1] = alignment_phase(u, plus);
            for q in 0..m {
                ds[q] = (phases[1] * plus[q] - phases[0] * minus[q]) / (2.0 * h);
            }
        }
        let mut up = vec![C64::new(0.0, 0.0); m];
        let mut down = vec![C64::new(0.0, 0.0); m];
        self.t_neighbor(i, j, true, &mut up);
        self.t_neighbor(i, j, false, &mut down);
        phases[2] = alignment_phase(u, &down);
        phases[3] = alignment_phase(u, &up);
        let inv = 0.5 / self.dt();
        let dt: Vec<C64> = (0..m)
            .map(|q| (phases[3] * up[q] - phases[2] * down[q]) * inv)
            .collect();
        let mut grad = vec![C64::new(0.0, 0.0); m];
        if let Some(sys) = sys {
            sys.grad_g_raw(u, self.t(j), &mut grad);
        }
        Local {
            ds,
            dt,
            grad,
            phases,
        }
    }

    /// Rotate each interior column by a common phase so that consecutive
    /// columns have real, nonnegative overlap.
    pub fn align_columns(&mut self) {
        let m = self.m();
        let nt = self.nt;
        for i in 1..self.ns - 1 {
            let (head, tail) = self.nodes.split_at_mut(i * nt * m);
            let prev = &head[(i - 1) * nt * m..];
            let cur = &mut tail[..nt * m];
            let p = alignment_phase(prev, cur);
            for c in cur.iter_mut() {
                *c *= p;
            }
        }
    }

    /// Rescale every node to unit norm.
    pub fn normalize(&mut self) {
        let m = self.m();
        for node in self.nodes.chunks_mut(m) {
            let s = 1.0 / (TWO_PI * norm_sqr_raw(node)).sqrt();
            node.iter_mut().for_each(|c| *c *= s);
        }
    }

    /// Largest nodewise projective distance to another grid of equal shape.
    pub fn max_projective_distance(&self, other: &StripGrid) -> f64 {
        assert_eq!(self.nodes.len(), other.nodes.len());
        let m = self.m();
        self.nodes
            .chunks(m)
            .zip(other.nodes.chunks(m))
            .map(|(a, b)| projective_distance_raw(a, b))
            .fold(0.0, f64::max)
    }
}

fn wnorm2(v: &[C64]) -> f64 {
    TWO_PI * norm_sqr_raw(v)
}

fn winner(a: &[C64], b: &[C64]) -> f64 {
    TWO_PI * dot_re(a, b)
}

fn projected(u: &[C64], v: &[C64]) -> Vec<C64> {
    let mut w = v.to_vec();
    project_horizontal(u, &mut w);
    w
}

/// Trapezoid weight of column `i`.
fn col_weight(grid: &StripGrid, i: usize) -> f64 {
    if grid.is_boundary(i) {
        0.5 * grid.ds()
    } else {
        grid.ds()
    }
}

/// Pointwise residual `Π_u(D_s ũ + i D_t ũ + φ_T ∇G_t(ũ))` at interior
/// nodes (zero on the boundary columns) and its discrete L² norm.
#[derive(Clone, Debug)]
pub struct Residual {
    pub values: Vec<C64>,
    pub norm: f64,
}

pub fn residual(sys: &HamiltonianSystem, grid: &StripGrid) -> Residual {
    let m = grid.m();
    let nt = grid.nt();
    let cut = grid.cutoff();
    let mut values = vec![C64::new(0.0, 0.0); grid.nodes.len()];
    par::for_each_chunk_mut(&mut values, nt * m, |i, col| {
        if grid.is_boundary(i) {
            return;
        }
        let phi = cut.eval(grid.s(i));
        let sys = (phi != 0.0).then_some(sys);
        for j in 0..nt {
            let loc = grid.local(sys, i, j);
            let out = &mut col[j * m..(j + 1) * m];
            for q in 0..m {
                out[q] = loc.ds[q] + I * loc.dt[q] + phi * loc.grad[q];
            }
            project_horizontal(grid.node(i, j), out);
        }
    });
    let norm = (wnorm2(&values) * grid.ds() * grid.dt()).sqrt();
    Residual { values, norm }
}

/// Largest `|⟨iu, R⟩|` over nodes, which vanishes when `Π_u` is applied.
pub fn gauge_component(grid: &StripGrid, res: &Residual) -> f64 {
    let m = grid.m();
    grid.nodes
        .chunks(m)
        .zip(res.values.chunks(m))
        .map(|(u, r)| {
            let iu: Vec<C64> = u.iter().map(|c| I * c).collect();
            winner(&iu, r).abs()
        })
        .fold(0.0, f64::max)
}

/// Per-column data shared by the strip functionals.
struct ColumnSums {
    energy: f64,
    identity: f64,
    omega: f64,
    hamiltonian: f64,
    defect: f64,
}

fn column_sums(sys: &HamiltonianSystem, grid: &StripGrid, i: usize) -> ColumnSums {
    let cut = grid.cutoff();
    let phi = cut.eval(grid.s(i));
    let dt = grid.dt();
    let mut out = ColumnSums {
        energy: 0.0,
        identity: 0.0,
        omega: 0.0,
        hamiltonian: 0.0,
        defect: 0.0,
    };
    for j in 0..grid.nt() {
        let u = grid.node(i, j);
        let loc = grid.local(Some(sys), i, j);
        let pds = projected(u, &loc.ds);
        let pdt = projected(u, &loc.dt);
        let x: Vec<C64> = loc.grad.iter().map(|g| I * g).collect();
        let orbit_dev: Vec<C64> = loc.dt.iter().zip(&x).map(|(a, b)| a - phi * b).collect();
        let defect_dev: Vec<C64> = loc.dt.iter().zip(&x).map(|(a, b)| a - b).collect();
        out.energy += 0.5 * (wnorm2(&pds) + wnorm2(&projected(u, &orbit_dev))) * dt;
        out.identity -= phi * winner(&loc.grad, &pds) * dt;
        let ipds: Vec<C64> = pds.iter().map(|c| I * c).collect();
        out.omega += winner(&ipds, &pdt) * dt;
        out.hamiltonian += sys.eval_g_raw(u, grid.t(j)) * dt;
        out.defect += wnorm2(&projected(u, &defect_dev)) * dt;
    }
    out
}

fn all_columns(sys: &HamiltonianSystem, grid: &StripGrid) -> Vec<ColumnSums> {
    par::map_range(grid.ns(), |i| column_sums(sys, grid, i))
}

/// `∬ ½(|Π D_s ũ|² + |Π(D_t ũ − φ_T X^G)|²) ds dt`, trapezoid in `s`.
pub fn energy(sys: &HamiltonianSystem, grid: &StripGrid) -> f64 {
    all_columns(sys, grid)
        .iter()
        .enumerate()
        .map(|(i, c)| col_weight(grid, i) * c.energy)
        .sum()
}

/// `−∬ φ_T ⟨∇G_t(ũ), Π D_s ũ⟩ ds dt`, equal to the energy on solutions.
pub fn energy_identity(sys: &HamiltonianSystem, grid: &StripGrid) -> f64 {
    all_columns(sys, grid)
        .iter()
        .enumerate()
        .map(|(i, c)| col_weight(grid, i) * c.identity)
        .sum()
}

/// `∫₀¹ |Π(D_t ũ(s_i, t) − X^G_t(ũ(s_i, t)))|² dt`.
pub fn slice_defect(sys: &HamiltonianSystem, grid: &StripGrid, i: usize) -> f64 {
    column_sums(sys, grid, i).defect
}

/// Column index in `|s| ≤ T` with the smallest slice defect, and the defect.
/// If no column lies in that window, the column closest to `s = 0` is used.
pub fn best_slice(sys: &HamiltonianSystem, grid: &StripGrid) -> (usize, f64) {
    let t = grid.t_cut();
    let mut cols: Vec<usize> = (0..grid.ns()).filter(|&i| grid.s(i).abs() <= t).collect();
    if cols.is_empty() {
        let i = (0..grid.ns())
            .min_by(|&a, &b| grid.s(a).abs().total_cmp(&grid.s(b).abs()))
            .expect("nonempty grid");
        cols.push(i);
    }
    let defects = par::map_slice(&cols, |&i| slice_defect(sys, grid, i));
    let mut best = (cols[0], defects[0]);
    for (&i, &d) in cols.iter().zip(&defects) {
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

/// `A(s_i) = n²/2 + σ ∫_{−S}^{s_i} ∫₀¹ ω(∂_s ũ, ∂_t ũ) + φ_T(s_i) ∫₀¹ G_t(ũ(s_i, t)) dt`
/// for every column, with `σ = orientation`.
pub fn action_profile(sys: &HamiltonianSystem, grid: &StripGrid, orientation: f64) -> Vec<(f64, f64)> {
    let cols = all_columns(sys, grid);
    let cut = grid.cutoff();
    let anchor = 0.5 * (grid.mode() * grid.mode()) as f64;
    let mut acc = 0.0;
    let mut out = Vec::with_capacity(grid.ns());
    for (i, c) in cols.iter().enumerate() {
        if i > 0 {
            acc += 0.5 * (cols[i - 1].omega + c.omega) * grid.ds();
        }
        let s = grid.s(i);
        let phi = cut.eval(s);
        let ham = if phi == 0.0 { 0.0 } else { phi * c.hamiltonian };
        out.push((s, anchor + orientation * acc + ham));
    }
    out
}

/// Summary of the strip functionals at one grid.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct StripDiagnostics {
    pub energy: f64,
    pub energy_identity: f64,
    pub defect_min: f64,
    pub defect_column: usize,
    pub action_min: f64,
    pub action_max: f64,
}

/// Energy, best slice and the action range over `|s| ≤ T`.
pub fn diagnostics(sys: &HamiltonianSystem, grid: &StripGrid, orientation: f64) -> StripDiagnostics {
    let cols = all_columns(sys, grid);
    let energy = cols
        .iter()
        .enumerate()
        .map(|(i, c)| col_weight(grid, i) * c.energy)
        .sum();
    let energy_identity = cols
        .iter()
        .enumerate()
        .map(|(i, c)| col_weight(grid, i) * c.identity)
        .sum();
    let (defect_column, defect_min) = best_slice(sys, grid);
    let profile = action_profile(sys, grid, orientation);
    let window: Vec<f64> = profile
        .iter()
        .filter(|(s, _)| s.abs() <= grid.t_cut())
        .map(|&(_, a)| a)
        .collect();
    let window = if window.is_empty() {
        profile.iter().map(|&(_, a)| a).collect()
    } else {
        window
    };
    StripDiagnostics {
        energy,
        energy_identity,
        defect_min,
        defect_column,
        action_min: window.iter().cloned().fold(f64::INFINITY, f64::min),
        action_max: window.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
    }
}

/// Splitting of a strip near `ℂP^{2ℓ}` into modes `|m| ≤ ℓ` and `|m| > ℓ`.
#[derive(Clone, Debug)]
pub struct NormalSplit {
    /// Renormalized projection onto `|m| ≤ ℓ`, still in band `k`.
    pub tangential: StripGrid,
    /// Per node, the coefficients with `|m| > ℓ` (ordered `−k..−ℓ−1, ℓ+1..k`).
    pub normal: Vec<Vec<C64>>,
    /// `∬ |(Π D_s ũ)_{|m|≤ℓ}|²` and `∬ |(Π D_s ũ)_{|m|>ℓ}|²`; they sum to
    /// `∬ |Π D_s ũ|²`.
    pub tangential_energy: f64,
    pub normal_energy: f64,
    pub max_normal_coeff: f64,
}

pub fn normal_split(grid: &StripGrid, l: usize) -> Result<NormalSplit> {
    if l > grid.k() {
        return Err(Error::invalid(format!("l = {l} exceeds k = {}", grid.k())));
    }
    let k = grid.k() as i64;
    let m = grid.m();
    let low = |q: usize| (q as i64 - k).unsigned_abs() as usize <= l;
    let mut tangential = grid.clone();
    let mut normal = Vec::with_capacity(grid.ns() * grid.nt());
    let mut max_normal_coeff: f64 = 0.0;
    for i in 0..grid.ns() {
        for j in 0..grid.nt() {
            let u = grid.node(i, j);
            let proj = (TWO_PI * (0..m).filter(|&q| low(q)).map(|q| u[q].norm_sqr()).sum::<f64>()).sqrt();
            if proj < 0.5 {
                return Err(Error::TubularNeighborhood {
                    s_index: i,
                    t_index: j,
                    projection_norm: proj,
                });
            }
            let node = tangential.node_mut(i, j);
            let mut perp = Vec::with_capacity(m);
            for q in 0..m {
                if low(q) {
                    node[q] = u[q] / proj;
                } else {
                    perp.push(u[q]);
                    max_normal_coeff = max_normal_coeff.max(u[q].norm());
                    node[q] = C64::new(0.0, 0.0);
                }
            }
            normal.push(perp);
        }
    }
    let mut tangential_energy = 0.0;
    let mut normal_energy = 0.0;
    for i in 0..grid.ns() {
        let w = col_weight(grid, i) * grid.dt();
        for j in 0..grid.nt() {
            let loc = grid.local(None, i, j);
            let pds = projected(grid.node(i, j), &loc.ds);
            for (q, c) in pds.iter().enumerate() {
                let e = TWO_PI * c.norm_sqr() * w;
                if low(q) {
                    tangential_energy += e;
                } else {
                    normal_energy += e;
                }
            }
        }
    }
    Ok(NormalSplit {
        tangential,
        normal,
        tangential_energy,
        normal_energy,
        max_normal_coeff,
    })
}

/// `∬ |Π D_s ũ|² ds dt` (no factor ½), the total of the two parts of
/// [`normal_split`].
pub fn ds_energy(grid: &StripGrid) -> f64 {
    let mut e = 0.0;
    for i in 0..grid.ns() {
        let w = col_weight(grid, i) * grid.dt();
        for j in 0..grid.nt() {
            let loc = grid.local(None, i, j);
            e += wnorm2(&projected(grid.node(i, j), &loc.ds)) * w;
        }
    }
    e
}

#[derive(Serialize, Deserialize)]
struct SnapshotJson {
    version: u32,
    #[serde(rename = "T")]
    t: f64,
    #[serde(rename = "S")]
    s: f64,
    #[serde(rename = "Ns")]
    ns: usize,
    #[serde(rename = "Nt")]
    nt: usize,
    n: i64,
    k: usize,
    rows: Vec<Vec<[f64; 2]>>,
}

impl StripGrid {
    /// Snapshot JSON; `rows` lists node coefficient arrays in `(i, j)` order
    /// with `j` fastest.
    pub fn to_snapshot_json(&self) -> String {
        let rows = self
            .nodes
            .chunks(self.m())
            .map(|c| c.iter().map(|z| [z.re, z.im]).collect())
            .collect();
        serde_json::to_string(&SnapshotJson {
            version: 1,
            t: self.t_cut,
            s: self.s_half,
            ns: self.ns,
            nt: self.nt,
            n: self.n,
            k: self.k,
            rows,
        })
        .expect("snapshot serializes")
    }

    pub fn from_snapshot_json(text: &str) -> Result<Self> {
        let s: SnapshotJson = serde_json::from_str(text)?;
        if s.version != 1 {
            return Err(Error::Format(format!("unsupported snapshot version {}", s.version)));
        }
        let mut grid = StripGrid::constant(s.k, s.n, s.t, s.s, s.ns, s.nt)?;
        if s.rows.len() != s.ns * s.nt {
            return Err(Error::Format(format!(
                "expected {} nodes, found {}",
                s.ns * s.nt,
                s.rows.len()
            )));
        }
        let m = grid.m();
        for (node, row) in grid.nodes.chunks_mut(m).zip(&s.rows) {
            if row.len() != m {
                return Err(Error::Format(format!("node has {} coefficients, expected {m}", row.len())));
            }
            for (c, p) in node.iter_mut().zip(row) {
                if !(p[0].is_finite() && p[1].is_finite()) {
                    return Err(Error::Format("non-finite coefficient".into()));
                }
                *c = C64::new(p[0], p[1]);
            }
        }
        Ok(grid)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_snapshot_json()).map_err(|e| Error::Snapshot {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Snapshot {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        Self::from_snapshot_json(&text).map_err(|e| Error::Snapshot {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })
    }
}

/// Complex overlap `2π Σ conj(a) b`.
pub(crate) fn overlap(a: &[C64], b: &[C64]) -> C64 {
    TWO_PI * dot_c(a, b)
}
