//! Conjugate gradients on the normal equations (CGLS) for complex vectors
//! viewed as real vector spaces.

use crate::spectral::C64;

fn dot(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.re * y.re + x.im * y.im).sum()
}

#[derive(Clone, Copy, Debug)]
pub struct CglsReport {
    pub iterations: usize,
    /// `‖Jᵀ(b − Jx)‖ / ‖Jᵀb‖` at exit.
    pub relative_normal_residual: f64,
}

/// Least-squares solution of `J x ≈ b` starting from `x = 0`. `apply`
/// computes `J v` and `apply_t` computes `Jᵀ w`, both adjoint with respect to
/// `Re Σ a conj(b)`.
pub fn cgls(
    n_in: usize,
    b: &[C64],
    apply: impl Fn(&[C64], &mut [C64]),
    apply_t: impl Fn(&[C64], &mut [C64]),
    rtol: f64,
    max_iter: usize,
) -> (Vec<C64>, CglsReport) {
    let zero = C64::new(0.0, 0.0);
    let mut x = vec![zero; n_in];
    let mut r = b.to_vec();
    let mut s = vec![zero; n_in];
    apply_t(&r, &mut s);
    let mut p = s.clone();
    let mut q = vec![zero; b.len()];
    let gamma0 = dot(&s, &s);
    let mut gamma = gamma0;
    if gamma0 == 0.0 {
        return (
            x,
            CglsReport {
                iterations: 0,
                relative_normal_residual: 0.0,
            },
        );
    }
    let mut it = 0;
    while it < max_iter && gamma > rtol * rtol * gamma0 {
        apply(&p, &mut q);
        let qq = dot(&q, &q);
        if qq == 0.0 {
            break;
        }
        let alpha = gamma / qq;
        for (xi, pi) in x.iter_mut().zip(&p) {
            *xi += alpha * pi;
        }
        for (ri, qi) in r.iter_mut().zip(&q) {
            *ri -= alpha * qi;
        }
        apply_t(&r, &mut s);
        let gamma_new = dot(&s, &s);
        let beta = gamma_new / gamma;
        gamma = gamma_new;
        for (pi, si) in p.iter_mut().zip(&s) {
            *pi = si + beta * *pi;
        }
        it += 1;
    }
    (
        x,
        CglsReport {
            iterations: it,
            relative_normal_residual: (gamma / gamma0).sqrt(),
        },
    )
}
