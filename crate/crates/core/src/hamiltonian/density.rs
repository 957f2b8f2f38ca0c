//! Scalar densities `f(r, x, t)` entering `F_t(u) = ∫ ½ f(|u*ψ|², x, t) dx`.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::TWO_PI;

/// Density `f` together with its first two `r`-derivatives. All models are
/// one-periodic in `t` and `2π`-periodic in `x`.
#[derive(Clone, Debug)]
pub enum DensityModel {
    Zero,
    /// `f(r) = λ r`.
    Linear { lambda: f64 },
    /// `f(r, x, t) = c/2 · r² + V(t, x) · r`, `V(t, x) = a cos(x) (1 + cos 2πt)`.
    GrossPitaevskii { coupling: f64, potential: f64 },
    Table(Arc<DensityTable>),
}

impl DensityModel {
    pub fn is_zero(&self) -> bool {
        match self {
            DensityModel::Zero => true,
            DensityModel::Linear { lambda } => *lambda == 0.0,
            DensityModel::GrossPitaevskii {
                coupling,
                potential,
            } => *coupling == 0.0 && *potential == 0.0,
            DensityModel::Table(t) => t.values.iter().all(|&v| v == 0.0),
        }
    }

    #[inline]
    pub fn f(&self, r: f64, x: f64, t: f64) -> f64 {
        match self {
            DensityModel::Zero => 0.0,
            DensityModel::Linear { lambda } => lambda * r,
            DensityModel::GrossPitaevskii {
                coupling,
                potential,
            } => 0.5 * coupling * r * r + gp_potential(*potential, x, t) * r,
            DensityModel::Table(tab) => tab.eval(r, x, t).0,
        }
    }

    /// `∂₁f`.
    #[inline]
    pub fn d1f(&self, r: f64, x: f64, t: f64) -> f64 {
        match self {
            DensityModel::Zero => 0.0,
            DensityModel::Linear { lambda } => *lambda,
            DensityModel::GrossPitaevskii {
                coupling,
                potential,
            } => coupling * r + gp_potential(*potential, x, t),
            DensityModel::Table(tab) => tab.eval(r, x, t).1,
        }
    }

    /// `∂₁∂₁f`.
    #[inline]
    pub fn d11f(&self, r: f64, x: f64, t: f64) -> f64 {
        match self {
            DensityModel::Zero | DensityModel::Linear { .. } => 0.0,
            DensityModel::GrossPitaevskii { coupling, .. } => *coupling,
            DensityModel::Table(tab) => tab.eval(r, x, t).2,
        }
    }

    /// Upper bound for `|∂₁f|` over `r ∈ [0, r_max]`, used for chain-rule
    /// estimates of truncation effects.
    pub fn d1f_bound(&self, r_max: f64) -> f64 {
        match self {
            DensityModel::Zero => 0.0,
            DensityModel::Linear { lambda } => lambda.abs(),
            DensityModel::GrossPitaevskii {
                coupling,
                potential,
            } => coupling.abs() * r_max + 2.0 * potential.abs(),
            DensityModel::Table(tab) => tab.d1f_bound(),
        }
    }
}

#[inline]
fn gp_potential(a: f64, x: f64, t: f64) -> f64 {
    if a == 0.0 {
        0.0
    } else {
        a * x.cos() * (1.0 + (TWO_PI * t).cos())
    }
}

/// `f` sampled on a uniform lattice in `(r, x, t)` and interpolated with
/// tensor-product Catmull–Rom cubics.
///
/// * `r_j = j · r_max / (nr − 1)`, `j = 0..nr`; clamped cubic ends.
/// * `x_i = 2π i / nx` (periodic), `t_l = l / nt` (periodic).
/// * `values[(j·nx + i)·nt + l] = f(r_j, x_i, t_l)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityTable {
    pub version: u32,
    pub r_max: f64,
    pub nr: usize,
    pub nx: usize,
    pub nt: usize,
    pub values: Vec<f64>,
}

/// Catmull–Rom weights for value, first and second derivative at `s ∈ [0,1)`
/// on points `p_{-1}, p_0, p_1, p_2`.
fn cr_weights(s: f64) -> ([f64; 4], [f64; 4], [f64; 4]) {
    let s2 = s * s;
    let s3 = s2 * s;
    let w = [
        0.5 * (-s3 + 2.0 * s2 - s),
        0.5 * (3.0 * s3 - 5.0 * s2 + 2.0),
        0.5 * (-3.0 * s3 + 4.0 * s2 + s),
        0.5 * (s3 - s2),
    ];
    let d = [
        0.5 * (-3.0 * s2 + 4.0 * s - 1.0),
        0.5 * (9.0 * s2 - 10.0 * s),
        0.5 * (-9.0 * s2 + 8.0 * s + 1.0),
        0.5 * (3.0 * s2 - 2.0 * s),
    ];
    let dd = [
        0.5 * (-6.0 * s + 4.0),
        0.5 * (18.0 * s - 10.0),
        0.5 * (-18.0 * s + 8.0),
        0.5 * (6.0 * s - 2.0),
    ];
    (w, d, dd)
}

impl DensityTable {
    pub fn new(r_max: f64, nr: usize, nx: usize, nt: usize, values: Vec<f64>) -> Result<Self> {
        let t = DensityTable {
            version: 1,
            r_max,
            nr,
            nx,
            nt,
            values,
        };
        t.validate()?;
        Ok(t)
    }

    /// Sample `f` on the lattice.
    pub fn sample(
        r_max: f64,
        nr: usize,
        nx: usize,
        nt: usize,
        f: impl Fn(f64, f64, f64) -> f64,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(nr * nx * nt);
        for j in 0..nr {
            let r = j as f64 * r_max / (nr.max(2) - 1) as f64;
            for i in 0..nx {
                let x = TWO_PI * i as f64 / nx as f64;
                for l in 0..nt {
                    values.push(f(r, x, l as f64 / nt as f64));
                }
            }
        }
        Self::new(r_max, nr, nx, nt, values)
    }

    fn validate(&self) -> Result<()> {
        if self.version != 1 {
            return Err(Error::Format(format!(
                "unsupported density table version {}",
                self.version
            )));
        }
        if self.nr < 2 || self.nx < 1 || self.nt < 1 || !(self.r_max > 0.0) {
            return Err(Error::Format(
                "density table needs nr ≥ 2, nx ≥ 1, nt ≥ 1 and r_max > 0".into(),
            ));
        }
        if self.values.len() != self.nr * self.nx * self.nt {
            return Err(Error::Format(format!(
                "density table has {} values, expected nr·nx·nt = {}",
                self.values.len(),
                self.nr * self.nx * self.nt
            )));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Format("density table contains non-finite values".into()));
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let t: DensityTable = serde_json::from_str(&text)?;
        t.validate()?;
        Ok(t)
    }

    fn at(&self, j: isize, i: isize, l: isize) -> f64 {
        let nr = self.nr as isize;
        let i = i.rem_euclid(self.nx as isize) as usize;
        let l = l.rem_euclid(self.nt as isize) as usize;
        let get = |j: usize| self.values[(j * self.nx + i) * self.nt + l];
        if j < 0 {
            // linear ghost point below r = 0
            2.0 * get(0) - get(1)
        } else if j >= nr {
            2.0 * get(self.nr - 1) - get(self.nr - 2)
        } else {
            get(j as usize)
        }
    }

    /// `(f, ∂_r f, ∂_r² f)` at `(r, x, t)`.
    pub fn eval(&self, r: f64, x: f64, t: f64) -> (f64, f64, f64) {
        let hr = self.r_max / (self.nr - 1) as f64;
        let ur = (r / hr).clamp(0.0, (self.nr - 1) as f64 - 1e-12);
        let jr = ur.floor();
        let sr = r / hr - jr;
        let jr = jr as isize;

        let ux = (x / TWO_PI).rem_euclid(1.0) * self.nx as f64;
        let jx = ux.floor() as isize;
        let sx = ux - jx as f64;
        let ut = t.rem_euclid(1.0) * self.nt as f64;
        let jt = ut.floor() as isize;
        let st = ut - jt as f64;

        let (wr, dr, ddr) = cr_weights(sr.min(1.0));
        let (wx, _, _) = cr_weights(sx);
        let (wt, _, _) = cr_weights(st);

        let (mut f, mut d, mut dd) = (0.0, 0.0, 0.0);
        for (a, ((&w0, &w1), &w2)) in wr.iter().zip(&dr).zip(&ddr).enumerate() {
            let mut plane = 0.0;
            for (b, &wxb) in wx.iter().enumerate() {
                let mut line = 0.0;
                for (c, &wtc) in wt.iter().enumerate() {
                    line += wtc * self.at(jr + a as isize - 1, jx + b as isize - 1, jt + c as isize - 1);
                }
                plane += wxb * line;
            }
            f += w0 * plane;
            d += w1 * plane;
            dd += w2 * plane;
        }
        let d = d / hr;
        let dd = dd / (hr * hr);
        if sr > 1.0 {
            // beyond the lattice: first-order extrapolation
            let excess = (sr - 1.0) * hr;
            return (f + d * excess, d, 0.0);
        }
        (f, d, dd)
    }

    fn d1f_bound(&self) -> f64 {
        let hr = self.r_max / (self.nr - 1) as f64;
        let mut m: f64 = 0.0;
        for j in 0..self.nr - 1 {
            for i in 0..self.nx {
                for l in 0..self.nt {
                    let a = self.values[(j * self.nx + i) * self.nt + l];
                    let b = self.values[((j + 1) * self.nx + i) * self.nt + l];
                    m = m.max(((b - a) / hr).abs());
                }
            }
        }
        // Catmull–Rom overshoot is bounded by 1.25× the secant slopes
        1.25 * m
    }
}
