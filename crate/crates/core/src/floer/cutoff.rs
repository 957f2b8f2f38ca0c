/// Two-sided cut-off `φ_T`: 1 on `[−T, T]`, 0 outside `[−T̂, T̂]` with
/// `T̂ = min(2T, T+1)`, smooth transitions built from `exp(−1/x)`.
/// `φ_0 ≡ 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cutoff {
    t: f64,
}

fn bump(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        (-1.0 / x).exp()
    }
}

fn bump_d(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        (-1.0 / x).exp() / (x * x)
    }
}

/// Smooth step from 0 at `x ≤ 0` to 1 at `x ≥ 1`.
fn step(x: f64) -> f64 {
    let a = bump(x);
    a / (a + bump(1.0 - x))
}

fn step_d(x: f64) -> f64 {
    let (a, b) = (bump(x), bump(1.0 - x));
    let (da, db) = (bump_d(x), -bump_d(1.0 - x));
    let d = a + b;
    (da * d - a * (da + db)) / (d * d)
}

impl Cutoff {
    pub fn new(t: f64) -> Self {
        assert!(t >= 0.0 && t.is_finite(), "cut-off parameter must be ≥ 0");
        Cutoff { t }
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    /// `T̂ = min(2T, T+1)`.
    pub fn t_hat(&self) -> f64 {
        (2.0 * self.t).min(self.t + 1.0)
    }

    pub fn eval(&self, s: f64) -> f64 {
        if self.t == 0.0 {
            return 0.0;
        }
        let a = s.abs();
        if a <= self.t {
            1.0
        } else if a >= self.t_hat() {
            0.0
        } else {
            1.0 - step((a - self.t) / (self.t_hat() - self.t))
        }
    }

    pub fn derivative(&self, s: f64) -> f64 {
        if self.t == 0.0 {
            return 0.0;
        }
        let a = s.abs();
        if a <= self.t || a >= self.t_hat() {
            return 0.0;
        }
        let w = self.t_hat() - self.t;
        -s.signum() * step_d((a - self.t) / w) / w
    }
}
