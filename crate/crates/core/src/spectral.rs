//! Fourier-side representation of fields on the circle `S¹ = ℝ/2πℤ`.
//!
//! A field is stored by its coefficients `û(n)`, `|n| ≤ k`, in the convention
//! `u(x) = Σ û(n) e^{inx}` with `û(n) = (1/2π) ∫ u(x) e^{-inx} dx`. With this
//! convention the L² quantities carry a factor `2π`:
//!
//! * `‖u‖₂² = 2π Σ |û(n)|²`
//! * `⟨u, v⟩ = Re(2π Σ û(n) conj(v̂(n)))`
//! * `(u * ψ)^(n) = 2π û(n) ψ̂(n)`
//!
//! Pointwise nonlinearities are evaluated on an equispaced collocation grid
//! ([`Collocation`]) that is large enough to avoid aliasing of quartic terms.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const TWO_PI: f64 = 2.0 * PI;

pub(crate) const I: C64 = C64::new(0.0, 1.0);

/// Truncated spectrum of a field on the circle, frequencies `-k..=k`.
#[derive(Clone, PartialEq)]
pub struct FourierField {
    k: usize,
    coeffs: Vec<C64>,
}

impl fmt::Debug for FourierField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FourierField")
            .field("k", &self.k)
            .field("norm", &self.norm())
            .finish()
    }
}

impl FourierField {
    pub fn zeros(k: usize) -> Self {
        FourierField {
            k,
            coeffs: vec![C64::new(0.0, 0.0); 2 * k + 1],
        }
    }

    /// Build from coefficients ordered `n = -k..=k`.
    pub fn from_coeffs(k: usize, coeffs: Vec<C64>) -> Result<Self> {
        if coeffs.len() != 2 * k + 1 {
            return Err(Error::invalid(format!(
                "expected {} coefficients for k = {k}, got {}",
                2 * k + 1,
                coeffs.len()
            )));
        }
        Ok(FourierField { k, coeffs })
    }

    /// The free fixed point `u⁰_n = e^{inx}/√(2π)`, a unit vector.
    pub fn mode(k: usize, n: i64) -> Self {
        let mut u = Self::zeros(k);
        u.set(n, C64::new(1.0 / TWO_PI.sqrt(), 0.0));
        u
    }

    /// Uniformly distributed point on the unit sphere of `ℂ^{2k+1}`.
    pub fn random_unit<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Self {
        loop {
            let coeffs = (0..2 * k + 1)
                .map(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
                .collect();
            let u = FourierField { k, coeffs };
            if let Ok(v) = u.normalized() {
                return v;
            }
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [C64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<C64> {
        self.coeffs
    }

    /// Iterate `(n, û(n))` for `n = -k..=k`.
    pub fn iter_modes(&self) -> impl Iterator<Item = (i64, C64)> + '_ {
        let k = self.k as i64;
        self.coeffs.iter().enumerate().map(move |(i, &c)| (i as i64 - k, c))
    }

    /// Coefficient at frequency `n`; zero outside the band.
    pub fn get(&self, n: i64) -> C64 {
        if n.unsigned_abs() as usize > self.k {
            C64::new(0.0, 0.0)
        } else {
            self.coeffs[(n + self.k as i64) as usize]
        }
    }

    /// Panics if `|n| > k`.
    pub fn set(&mut self, n: i64, value: C64) {
        assert!(
            n.unsigned_abs() as usize <= self.k,
            "frequency {n} outside band {}",
            self.k
        );
        self.coeffs[(n + self.k as i64) as usize] = value;
    }

    pub fn norm_sqr(&self) -> f64 {
        TWO_PI * self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::invalid("cannot normalize a zero or non-finite field"));
        }
        Ok(self.scaled(C64::new(1.0 / n, 0.0)))
    }

    /// Real inner product `Re(2π Σ û conj(v̂))`.
    pub fn inner(&self, other: &Self) -> f64 {
        TWO_PI * dot_re(&self.coeffs, &other.coeffs)
    }

    /// Complex inner product `2π Σ conj(û) v̂`, conjugate-linear in `self`.
    pub fn inner_c(&self, other: &Self) -> C64 {
        TWO_PI * dot_c(&self.coeffs, &other.coeffs)
    }

    /// Symplectic form `ω(u, v) = ⟨i u, v⟩`.
    pub fn omega(&self, other: &Self) -> f64 {
        self.mul_i().inner(other)
    }

    pub fn mul_i(&self) -> Self {
        self.scaled(I)
    }

    pub fn scaled(&self, a: C64) -> Self {
        FourierField {
            k: self.k,
            coeffs: self.coeffs.iter().map(|&c| c * a).collect(),
        }
    }

    /// `self += a * other`.
    pub fn add_scaled(&mut self, a: C64, other: &Self) {
        debug_assert_eq!(self.k, other.k);
        for (x, &y) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *x += a * y;
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.add_scaled(C64::new(-1.0, 0.0), other);
        out
    }

    /// Zero-pad or truncate to cut-off `k`.
    pub fn resized(&self, k: usize) -> Self {
        let mut out = Self::zeros(k);
        let m = self.k.min(k) as i64;
        for n in -m..=m {
            out.set(n, self.get(n));
        }
        out
    }

    /// Keep only frequencies with `|n| ≤ l` (same cut-off `k`).
    pub fn low_pass(&self, l: usize) -> Self {
        let mut out = self.clone();
        for (n, c) in out.coeffs.iter_mut().enumerate() {
            if (n as i64 - self.k as i64).unsigned_abs() as usize > l {
                *c = C64::new(0.0, 0.0);
            }
        }
        out
    }

    /// Distance in `ℙ(ℍ)` between the lines of two unit vectors,
    /// `min_θ ‖u − e^{iθ} v‖₂ = sqrt(2 − 2|⟨u, v⟩_ℂ|)`.
    /// Evaluated as the norm of the aligned difference, which stays accurate
    /// for nearby points.
    pub fn projective_distance(&self, other: &Self) -> f64 {
        projective_distance_raw(&self.coeffs, &other.coeffs)
    }

    /// Multiply by the unit phase that makes `⟨reference, self⟩_ℂ` real and
    /// nonnegative.
    pub fn aligned_to(&self, reference: &Self) -> Self {
        self.scaled(alignment_phase(&reference.coeffs, &self.coeffs))
    }

    /// Orthogonal projection onto the horizontal space at the unit vector
    /// `base`, i.e. removal of the real span of `{base, i·base}`.
    pub fn horizontal_at(&self, base: &Self) -> Self {
        let mut out = self.clone();
        project_horizontal(&base.coeffs, &mut out.coeffs);
        out
    }
}

/// `Re Σ a conj(b)` without the `2π` weight.
pub(crate) fn dot_re(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.re * y.re + x.im * y.im).sum()
}

/// `Σ conj(a) b` without the `2π` weight.
pub(crate) fn dot_c(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub(crate) fn norm_sqr_raw(a: &[C64]) -> f64 {
    a.iter().map(|c| c.norm_sqr()).sum()
}

/// Unit phase `p` with `Σ conj(reference) · p · v` real and nonnegative.
pub(crate) fn alignment_phase(reference: &[C64], v: &[C64]) -> C64 {
    let z = dot_c(v, reference);
    let r = z.norm();
    if r > 0.0 {
        z / r
    } else {
        C64::new(1.0, 0.0)
    }
}

/// `min_θ ‖a − e^{iθ} b‖₂` for coefficient slices.
pub(crate) fn projective_distance_raw(a: &[C64], b: &[C64]) -> f64 {
    let p = alignment_phase(a, b);
    let d: f64 = a.iter().zip(b).map(|(x, y)| (x - p * y).norm_sqr()).sum();
    (TWO_PI * d).sqrt()
}

/// Remove the complex span of the unit vector `base` from `v` in place.
/// `base` must have unit L² norm (`2π Σ|b̂|² = 1`).
pub(crate) fn project_horizontal(base: &[C64], v: &mut [C64]) {
    let c = TWO_PI * dot_c(base, v);
    for (x, &b) in v.iter_mut().zip(base) {
        *x -= c * b;
    }
}

/// Multiply coefficients by `exp(i t n²)`.
pub(crate) fn apply_free_phase(k: usize, t: f64, v: &mut [C64]) {
    if t == 0.0 {
        return;
    }
    let kk = k as i64;
    for (i, c) in v.iter_mut().enumerate() {
        let n = i as i64 - kk;
        if n != 0 {
            *c *= C64::from_polar(1.0, t * (n * n) as f64);
        }
    }
}

/// Samples of a field at `x_j = 2πj/N`, `j = 0..N`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridField {
    pub samples: Vec<C64>,
}

impl GridField {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn node(&self, j: usize) -> f64 {
        TWO_PI * j as f64 / self.samples.len() as f64
    }

    /// Trapezoid-rule L² norm.
    pub fn l2_norm(&self) -> f64 {
        let h = TWO_PI / self.samples.len() as f64;
        (h * norm_sqr_raw(&self.samples)).sqrt()
    }
}

/// FFT plans for one band limit `k` and grid size `N`.
#[derive(Clone)]
pub struct Collocation {
    k: usize,
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Collocation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Collocation {{ k: {}, n: {} }}", self.k, self.n)
    }
}

impl Collocation {
    /// Smallest power of two with `N ≥ 4k + 4`, which resolves quartic
    /// products of band-`k` fields without aliasing.
    pub fn new(k: usize) -> Self {
        let n = (4 * k + 4).next_power_of_two();
        Self::with_size(k, n).expect("default grid size is valid")
    }

    pub fn with_size(k: usize, n: usize) -> Result<Self> {
        if !n.is_power_of_two() || n < 2 * (2 * k + 1) {
            return Err(Error::invalid(format!(
                "grid size {n} must be a power of two ≥ 2(2k+1) = {}",
                2 * (2 * k + 1)
            )));
        }
        let mut planner = FftPlanner::new();
        Ok(Collocation {
            k,
            n,
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn node(&self, j: usize) -> f64 {
        TWO_PI * j as f64 / self.n as f64
    }

    /// Evaluate `Σ ĉ(n) e^{inx_j}` into `out` (length `N`).
    pub fn spectrum_to_grid(&self, coeffs: &[C64], out: &mut [C64]) {
        debug_assert_eq!(coeffs.len(), 2 * self.k + 1);
        debug_assert_eq!(out.len(), self.n);
        out.fill(C64::new(0.0, 0.0));
        let k = self.k as i64;
        let n = self.n as i64;
        for (i, &c) in coeffs.iter().enumerate() {
            let m = i as i64 - k;
            out[m.rem_euclid(n) as usize] = c;
        }
        self.inv.process(out);
    }

    /// Discrete Fourier coefficients `(1/N) Σ u_j e^{-inx_j}`, `|n| ≤ k`.
    /// Overwrites `grid`.
    pub fn grid_to_spectrum(&self, grid: &mut [C64], out: &mut [C64]) {
        debug_assert_eq!(grid.len(), self.n);
        debug_assert_eq!(out.len(), 2 * self.k + 1);
        self.fwd.process(grid);
        let k = self.k as i64;
        let n = self.n as i64;
        let scale = 1.0 / self.n as f64;
        for (i, c) in out.iter_mut().enumerate() {
            let m = i as i64 - k;
            *c = grid[m.rem_euclid(n) as usize] * scale;
        }
    }

    pub fn to_grid(&self, u: &FourierField) -> GridField {
        assert_eq!(u.k(), self.k, "band mismatch");
        let mut samples = vec![C64::new(0.0, 0.0); self.n];
        self.spectrum_to_grid(u.coeffs(), &mut samples);
        GridField { samples }
    }

    pub fn to_spectrum(&self, g: &GridField) -> FourierField {
        assert_eq!(g.len(), self.n, "grid size mismatch");
        let mut buf = g.samples.clone();
        let mut out = FourierField::zeros(self.k);
        self.grid_to_spectrum(&mut buf, out.coeffs_mut());
        out
    }
}

/// Amplitude profile used to populate kernel coefficients.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DecayProfile {
    /// `a_m = amplitude · ratio^{|m|}`.
    Geometric { amplitude: f64, ratio: f64 },
    /// `a_m = amplitude` for every allowed frequency.
    Flat { amplitude: f64 },
    /// `a_m = values[|m|]`, zero beyond the table.
    Table { values: Vec<f64> },
}

impl DecayProfile {
    pub fn amplitude(&self, m: i64) -> f64 {
        let a = m.unsigned_abs();
        match self {
            DecayProfile::Geometric { amplitude, ratio } => amplitude * ratio.powi(a as i32),
            DecayProfile::Flat { amplitude } => *amplitude,
            DecayProfile::Table { values } => values.get(a as usize).copied().unwrap_or(0.0),
        }
    }
}

/// Real smoothing kernel ψ given by Hermitian coefficients `ψ̂(n)`, `|n| ≤ k_ψ`,
/// together with its admissibility threshold δ.
#[derive(Clone, Debug, PartialEq)]
pub struct Kernel {
    coeffs: FourierField,
    delta: f64,
    allowed: Vec<i64>,
}

const HERMITIAN_TOL: f64 = 1e-14;

impl Kernel {
    /// Validates Hermitian symmetry and admissibility.
    pub fn new(coeffs: FourierField, delta: f64) -> Result<Self> {
        let allowed = admissible_frequencies(delta, coeffs.k())?;
        let kernel = Kernel {
            coeffs,
            delta,
            allowed,
        };
        kernel.validate()?;
        Ok(kernel)
    }

    fn validate(&self) -> Result<()> {
        let k = self.coeffs.k() as i64;
        let scale = self
            .coeffs
            .coeffs()
            .iter()
            .map(|c| c.norm())
            .fold(0.0, f64::max)
            .max(1.0);
        for m in 0..=k {
            let a = self.coeffs.get(m);
            let b = self.coeffs.get(-m).conj();
            if (a - b).norm() > HERMITIAN_TOL * scale {
                return Err(Error::NotHermitian { mode: m });
            }
        }
        for m in -k..=k {
            let value = self.coeffs.get(m).norm();
            if value != 0.0 && self.allowed.binary_search(&m).is_err() {
                return Err(Error::NotAdmissible {
                    mode: m,
                    value,
                    gap: phase_gap(m),
                    delta: self.delta,
                });
            }
        }
        Ok(())
    }

    pub fn k(&self) -> usize {
        self.coeffs.k()
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// `M_δ ∩ [-k_ψ, k_ψ]`, sorted.
    pub fn allowed(&self) -> &[i64] {
        &self.allowed
    }

    pub fn coeffs(&self) -> &FourierField {
        &self.coeffs
    }

    pub fn get(&self, n: i64) -> C64 {
        self.coeffs.get(n)
    }

    /// Largest `|n|` with `ψ̂(n) ≠ 0`, or `None` for the zero kernel.
    pub fn support_radius(&self) -> Option<usize> {
        self.coeffs
            .iter_modes()
            .filter(|(_, c)| c.norm() != 0.0)
            .map(|(n, _)| n.unsigned_abs() as usize)
            .max()
    }

    /// Coefficients resampled to band `k` (zero padded or truncated).
    pub fn coeffs_at(&self, k: usize) -> Vec<C64> {
        self.coeffs.resized(k).into_coeffs()
    }

    /// `‖ψ‖₂`.
    pub fn l2_norm(&self) -> f64 {
        self.coeffs.norm()
    }
}

/// `|exp(i m²) − 1| = 2|sin(m²/2)|`, evaluated in double precision.
/// Accurate to about `1e-9` for `|m| ≤ 10⁶`.
pub fn phase_gap(m: i64) -> f64 {
    let m2 = (m as f64) * (m as f64);
    2.0 * (0.5 * m2).sin().abs()
}

/// `M_δ ∩ [-k, k] = {m : |m| ≤ k, 2|sin(m²/2)| ≥ δ}`, sorted ascending.
pub fn admissible_frequencies(delta: f64, k: usize) -> Result<Vec<i64>> {
    if !(delta > 0.0 && delta < 2.0) {
        return Err(Error::invalid(format!(
            "admissibility threshold delta = {delta} must lie in (0, 2)"
        )));
    }
    let k = k as i64;
    Ok((-k..=k).filter(|&m| phase_gap(m) >= delta).collect())
}

/// Kernel with `ψ̂(m) = a_m` on the admissible frequencies and zero elsewhere.
pub fn make_admissible_kernel(delta: f64, k: usize, profile: &DecayProfile) -> Result<Kernel> {
    let allowed = admissible_frequencies(delta, k)?;
    if allowed.is_empty() {
        return Err(Error::NoAdmissibleFrequencies { delta, k });
    }
    let mut coeffs = FourierField::zeros(k);
    for &m in &allowed {
        let a = profile.amplitude(m);
        if !(a >= 0.0) || !a.is_finite() {
            return Err(Error::invalid(format!(
                "profile amplitude at m = {m} must be finite and nonnegative, got {a}"
            )));
        }
        coeffs.set(m, C64::new(a, 0.0));
    }
    Kernel::new(coeffs, delta)
}

/// `ψ^k`: coefficients with `|n| ≤ k` kept, the rest zeroed. The band of the
/// returned kernel is unchanged so it can be compared mode by mode.
pub fn truncate_kernel(psi: &Kernel, k: usize) -> Kernel {
    Kernel {
        coeffs: psi.coeffs.low_pass(k),
        delta: psi.delta,
        allowed: psi.allowed.clone(),
    }
}

/// `‖ψ − ψ^k‖₂ = sqrt(2π Σ_{|n|>k} |ψ̂(n)|²)`. Multiplied by `‖u‖₂` this bounds
/// `‖u*ψ − u*ψ^k‖_∞`.
pub fn truncation_error_bound(psi: &Kernel, k: usize) -> f64 {
    let tail: f64 = psi
        .coeffs
        .iter_modes()
        .filter(|(n, _)| n.unsigned_abs() as usize > k)
        .map(|(_, c)| c.norm_sqr())
        .sum();
    (TWO_PI * tail).sqrt()
}

/// `u * ψ` with `(u*ψ)^(n) = 2π û(n) ψ̂(n)`; returned in the band of `u`.
pub fn convolve(u: &FourierField, psi: &Kernel) -> FourierField {
    let mut out = FourierField::zeros(u.k());
    for (n, c) in u.iter_modes() {
        let p = psi.get(n);
        if p.norm_sqr() != 0.0 {
            out.set(n, TWO_PI * c * p);
        }
    }
    out
}

#[derive(Serialize, Deserialize)]
struct SpectrumJson {
    version: u32,
    k: usize,
    coeffs: Vec<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    delta: Option<f64>,
}

fn coeffs_to_pairs(c: &[C64]) -> Vec<[f64; 2]> {
    c.iter().map(|z| [z.re, z.im]).collect()
}

fn pairs_to_coeffs(p: &[[f64; 2]]) -> Vec<C64> {
    p.iter().map(|&[re, im]| C64::new(re, im)).collect()
}

impl FourierField {
    /// `{"version":1,"k":…,"coeffs":[[re,im],…]}` ordered `n = -k..=k`.
    pub fn to_json(&self) -> String {
        serde_json::to_string(&SpectrumJson {
            version: 1,
            k: self.k,
            coeffs: coeffs_to_pairs(&self.coeffs),
            delta: None,
        })
        .expect("serializable")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let j: SpectrumJson = serde_json::from_str(s)?;
        if j.version != 1 {
            return Err(Error::Format(format!("unsupported version {}", j.version)));
        }
        FourierField::from_coeffs(j.k, pairs_to_coeffs(&j.coeffs))
    }
}

impl Serialize for FourierField {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        SpectrumJson {
            version: 1,
            k: self.k,
            coeffs: coeffs_to_pairs(&self.coeffs),
            delta: None,
        }
        .serialize(serializer)
    }
}

impl Kernel {
    /// Field schema plus a `"delta"` key carrying the admissibility threshold.
    pub fn to_json(&self) -> String {
        serde_json::to_string(&SpectrumJson {
            version: 1,
            k: self.k(),
            coeffs: coeffs_to_pairs(self.coeffs.coeffs()),
            delta: Some(self.delta),
        })
        .expect("serializable")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let j: SpectrumJson = serde_json::from_str(s)?;
        if j.version != 1 {
            return Err(Error::Format(format!("unsupported version {}", j.version)));
        }
        let delta = j
            .delta
            .ok_or_else(|| Error::Format("kernel JSON requires \"delta\"".into()))?;
        Kernel::new(
            FourierField::from_coeffs(j.k, pairs_to_coeffs(&j.coeffs))?,
            delta,
        )
    }
}
