//! Free flow, interaction-picture flow `φ^G`, the time-one map and its
//! tangent.
//!
//! The time-one map is `Q = (φ^G₁)⁻¹ ∘ φ⁰₁`: a point `p` is fixed exactly when
//! the `G`-orbit starting at `p` ends at the twisted point `φ⁰₁(p)`, which is
//! the condition encoded by the strip boundary data. With `f ≡ 0` it
//! multiplies mode `n` by `exp(in²)`.

use crate::error::{Error, Result};
use crate::hamiltonian::HamiltonianSystem;
use crate::par;
use crate::spectral::{apply_free_phase, norm_sqr_raw, FourierField, C64, TWO_PI};

/// Norm drift beyond which an integration is rejected.
pub const MAX_DRIFT: f64 = 1e-6;

/// Step used for directional differences of `X^G` in the tangent flow.
pub const TANGENT_FD_STEP: f64 = 1e-6;

/// `φ⁰_t`: multiplies `û(n)` by `exp(i t n²)`. Exact.
pub fn free_flow(u: &FourierField, t: f64) -> FourierField {
    let mut v = u.clone();
    apply_free_phase(u.k(), t, v.coeffs_mut());
    v
}

/// Fixed-step RK4 for `u̇ = X^G_t(u)` on `[t0, t1]` (either direction).
#[derive(Clone, Debug)]
pub struct FlowSpec {
    pub sys: HamiltonianSystem,
    pub dt: f64,
    pub t0: f64,
    pub t1: f64,
}

/// Endpoint and the largest `|‖u(t)‖ − 1|` seen along the way.
#[derive(Clone, Debug)]
pub struct FlowOutcome {
    pub state: FourierField,
    pub max_drift: f64,
}

impl FlowSpec {
    pub fn new(sys: HamiltonianSystem, dt: f64) -> Result<Self> {
        let spec = FlowSpec {
            sys,
            dt,
            t0: 0.0,
            t1: 1.0,
        };
        spec.steps()?;
        Ok(spec)
    }

    pub fn over(&self, t0: f64, t1: f64) -> Self {
        FlowSpec {
            t0,
            t1,
            ..self.clone()
        }
    }

    /// Number of steps; `(t1 − t0)/dt` must be an integer.
    pub fn steps(&self) -> Result<usize> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::invalid(format!("dt must be positive, got {}", self.dt)));
        }
        let q = (self.t1 - self.t0).abs() / self.dt;
        let n = q.round();
        if (q - n).abs() > 1e-9 * n.max(1.0) {
            return Err(Error::invalid(format!(
                "interval length {} is not a multiple of dt = {}",
                (self.t1 - self.t0).abs(),
                self.dt
            )));
        }
        Ok(n as usize)
    }
}

fn drift(u: &[C64]) -> f64 {
    ((TWO_PI * norm_sqr_raw(u)).sqrt() - 1.0).abs()
}

struct Rk4Buffers {
    k1: Vec<C64>,
    k2: Vec<C64>,
    k3: Vec<C64>,
    k4: Vec<C64>,
    tmp: Vec<C64>,
}

impl Rk4Buffers {
    fn new(m: usize) -> Self {
        let z = vec![C64::new(0.0, 0.0); m];
        Rk4Buffers {
            k1: z.clone(),
            k2: z.clone(),
            k3: z.clone(),
            k4: z.clone(),
            tmp: z,
        }
    }
}

/// One RK4 step of `ẏ = rhs(t, y)` in place.
fn rk4_step(
    y: &mut [C64],
    t: f64,
    h: f64,
    b: &mut Rk4Buffers,
    rhs: &impl Fn(f64, &[C64], &mut [C64]),
) {
    rhs(t, y, &mut b.k1);
    for i in 0..y.len() {
        b.tmp[i] = y[i] + 0.5 * h * b.k1[i];
    }
    rhs(t + 0.5 * h, &b.tmp, &mut b.k2);
    for i in 0..y.len() {
        b.tmp[i] = y[i] + 0.5 * h * b.k2[i];
    }
    rhs(t + 0.5 * h, &b.tmp, &mut b.k3);
    for i in 0..y.len() {
        b.tmp[i] = y[i] + h * b.k3[i];
    }
    rhs(t + h, &b.tmp, &mut b.k4);
    for i in 0..y.len() {
        y[i] += h / 6.0 * (b.k1[i] + 2.0 * b.k2[i] + 2.0 * b.k3[i] + b.k4[i]);
    }
}

/// Integrate `u̇ = X^G_t(u)`, calling `observe(t, u)` at the start and after
/// every step.
pub fn flow_g_observed(
    spec: &FlowSpec,
    u: &FourierField,
    mut observe: impl FnMut(f64, &FourierField),
) -> Result<FlowOutcome> {
    let steps = spec.steps()?;
    let h = if steps == 0 {
        0.0
    } else {
        (spec.t1 - spec.t0) / steps as f64
    };
    let mut y = u.clone();
    let mut buf = Rk4Buffers::new(y.coeffs().len());
    let sys = &spec.sys;
    let rhs = |t: f64, y: &[C64], out: &mut [C64]| sys.x_g_raw(y, t, out);
    let start_norm = u.norm();
    let mut max_drift = (start_norm - 1.0).abs();
    observe(spec.t0, &y);
    let frozen = sys.density().is_zero();
    for s in 0..steps {
        let t = spec.t0 + s as f64 * h;
        if frozen {
            // X^G vanishes, the state never changes.
            observe(spec.t0 + (s + 1) as f64 * h, &y);
            continue;
        }
        rk4_step(y.coeffs_mut(), t, h, &mut buf, &rhs);
        let d = drift(y.coeffs());
        max_drift = max_drift.max(d);
        if d > MAX_DRIFT {
            return Err(Error::IntegratorStepTooLarge {
                drift: d,
                limit: MAX_DRIFT,
                dt: spec.dt,
            });
        }
        observe(spec.t0 + (s + 1) as f64 * h, &y);
    }
    Ok(FlowOutcome {
        state: y,
        max_drift,
    })
}

/// `φ^G` from `t0` to `t1`.
pub fn flow_g(spec: &FlowSpec, u: &FourierField) -> Result<FourierField> {
    flow_g_observed(spec, u, |_, _| {}).map(|o| o.state)
}

/// `Q(u) = (φ^G₁)⁻¹(φ⁰₁(u))`, integrating `X^G` backward from `t = 1`.
pub fn time_one_map(spec: &FlowSpec, u: &FourierField) -> Result<FourierField> {
    let back = spec.over(1.0, 0.0);
    flow_g(&back, &free_flow(u, 1.0))
}

/// `DQ(u)[v]`: the variational equation integrated alongside the orbit, with
/// `DX^G(u)[v]` from central differences of `X^G` along `v`.
pub fn tangent_time_one(spec: &FlowSpec, u: &FourierField, v: &FourierField) -> Result<FourierField> {
    let back = spec.over(1.0, 0.0);
    let steps = back.steps()?;
    let h = -1.0 / steps.max(1) as f64;
    let m = u.coeffs().len();
    let mut y = Vec::with_capacity(2 * m);
    y.extend_from_slice(free_flow(u, 1.0).coeffs());
    y.extend_from_slice(free_flow(v, 1.0).coeffs());
    if spec.sys.density().is_zero() {
        return FourierField::from_coeffs(u.k(), y[m..].to_vec());
    }
    let sys = &spec.sys;
    let rhs = |t: f64, y: &[C64], out: &mut [C64]| {
        let (uu, vv) = y.split_at(m);
        let (ou, ov) = out.split_at_mut(m);
        sys.x_g_raw(uu, t, ou);
        let vn = (TWO_PI * norm_sqr_raw(vv)).sqrt();
        if vn == 0.0 {
            ov.fill(C64::new(0.0, 0.0));
            return;
        }
        let eps = TANGENT_FD_STEP / vn;
        let mut p: Vec<C64> = uu.iter().zip(vv).map(|(a, b)| a + eps * b).collect();
        let mut xp = vec![C64::new(0.0, 0.0); m];
        sys.x_g_raw(&p, t, &mut xp);
        for ((q, a), b) in p.iter_mut().zip(uu).zip(vv) {
            *q = a - eps * b;
        }
        sys.x_g_raw(&p, t, ov);
        let s = 0.5 / eps;
        for (o, x) in ov.iter_mut().zip(&xp) {
            *o = (x - *o) * s;
        }
    };
    let mut buf = Rk4Buffers::new(2 * m);
    for s in 0..steps {
        let t = 1.0 + s as f64 * h;
        rk4_step(&mut y, t, h, &mut buf, &rhs);
        let d = drift(&y[..m]);
        if d > MAX_DRIFT {
            return Err(Error::IntegratorStepTooLarge {
                drift: d,
                limit: MAX_DRIFT,
                dt: spec.dt,
            });
        }
    }
    FourierField::from_coeffs(u.k(), y[m..].to_vec())
}

/// Tangent images of several directions, evaluated concurrently.
pub fn tangent_columns(
    spec: &FlowSpec,
    u: &FourierField,
    dirs: &[FourierField],
) -> Result<Vec<FourierField>> {
    par::map_slice(dirs, |v| tangent_time_one(spec, u, v))
        .into_iter()
        .collect()
}
