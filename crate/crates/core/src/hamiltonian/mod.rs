//! Hamiltonians `F_t(u) = ∫ ½ f(|u*ψ^k|², x, t) dx` and their
//! interaction-picture versions `G_t = F_t ∘ φ⁰_{−t}`.
//!
//! Gradients are taken with respect to the real inner product
//! `⟨u, v⟩ = Re ∫ u conj(v)`; symplectic gradients are `X = i ∇`. Values and
//! gradients are defined for any field, but callers only use unit-sphere
//! representatives.

mod density;
mod hofer;

use std::cell::RefCell;

pub use density::{DensityModel, DensityTable};
pub use hofer::{
    gauss_legendre, hofer_gap, hofer_norm, DifferenceHamiltonian, Frame, HoferEstimate,
    HoferNode, HoferOptions, SystemHamiltonian, TimeHamiltonian,
};

use crate::spectral::{
    apply_free_phase, dot_re, Collocation, FourierField, Kernel, C64, I, TWO_PI,
};

/// Kernel, density and the mode cut-off `k` of the truncation level in use.
#[derive(Clone, Debug)]
pub struct HamiltonianSystem {
    k: usize,
    psi: Kernel,
    /// `2π ψ̂^k(n)` on the band `-k..=k`.
    multiplier: Vec<C64>,
    density: DensityModel,
    col: Collocation,
}

#[derive(Default)]
struct Workspace {
    a: Vec<C64>,
    b: Vec<C64>,
}

thread_local! {
    static WS: RefCell<Workspace> = RefCell::new(Workspace::default());
}

fn with_ws<R>(n: usize, f: impl FnOnce(&mut Vec<C64>, &mut Vec<C64>) -> R) -> R {
    WS.with(|ws| {
        let mut ws = ws.borrow_mut();
        let Workspace { a, b } = &mut *ws;
        a.resize(n, C64::new(0.0, 0.0));
        b.resize(n, C64::new(0.0, 0.0));
        f(a, b)
    })
}

/// Pointwise data of `F_t` at one field, cached for repeated Hessian
/// products: `w = u*ψ` on the grid together with `∂₁f` and `∂₁∂₁f`.
#[derive(Clone, Debug)]
pub struct HessianCache {
    t: f64,
    w: Vec<C64>,
    d1: Vec<f64>,
    d11: Vec<f64>,
}

impl HamiltonianSystem {
    /// `F^k` for the kernel truncated to `|n| ≤ k`.
    pub fn new(psi: &Kernel, density: DensityModel, k: usize) -> Self {
        Self::with_collocation(psi, density, Collocation::new(k))
    }

    pub fn with_collocation(psi: &Kernel, density: DensityModel, col: Collocation) -> Self {
        let k = col.k();
        let psi = crate::spectral::truncate_kernel(psi, k);
        let multiplier = psi.coeffs_at(k).into_iter().map(|c| TWO_PI * c).collect();
        HamiltonianSystem {
            k,
            psi,
            multiplier,
            density,
            col,
        }
    }

    /// The same system with the kernel truncated further to `|n| ≤ l`, still
    /// acting on the band `k` (the ladder element `G^l` inside `ℂ^{2k+1}`).
    pub fn truncated(&self, l: usize) -> Self {
        let psi = crate::spectral::truncate_kernel(&self.psi, l);
        Self::with_collocation(&psi, self.density.clone(), self.col.clone())
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn kernel(&self) -> &Kernel {
        &self.psi
    }

    pub fn density(&self) -> &DensityModel {
        &self.density
    }

    pub fn collocation(&self) -> &Collocation {
        &self.col
    }

    pub fn grid_size(&self) -> usize {
        self.col.size()
    }

    /// `u*ψ^k` evaluated on the collocation grid.
    fn convolved_grid(&self, u: &[C64], out: &mut [C64], spec: &mut [C64]) {
        for ((s, &c), &m) in spec.iter_mut().zip(u).zip(&self.multiplier) {
            *s = c * m;
        }
        self.col.spectrum_to_grid(&spec[..2 * self.k + 1], out);
    }

    /// `conj(2πψ̂)` applied to the spectrum of a grid function (the adjoint
    /// of `v ↦ v*ψ`). Overwrites `grid`.
    fn adjoint_convolve(&self, grid: &mut [C64], out: &mut [C64]) {
        self.col.grid_to_spectrum(grid, out);
        for (o, &m) in out.iter_mut().zip(&self.multiplier) {
            *o *= m.conj();
        }
    }

    pub fn eval_f_raw(&self, u: &[C64], t: f64) -> f64 {
        if self.density.is_zero() {
            return 0.0;
        }
        let n = self.col.size();
        with_ws(n, |grid, spec| {
            self.convolved_grid(u, grid, spec);
            let mut sum = 0.0;
            for (j, w) in grid.iter().enumerate() {
                sum += self.density.f(w.norm_sqr(), self.col.node(j), t);
            }
            0.5 * sum * TWO_PI / n as f64
        })
    }

    pub fn grad_f_raw(&self, u: &[C64], t: f64, out: &mut [C64]) {
        if self.density.is_zero() {
            out.fill(C64::new(0.0, 0.0));
            return;
        }
        let n = self.col.size();
        with_ws(n, |grid, spec| {
            self.convolved_grid(u, grid, spec);
            for (j, w) in grid.iter_mut().enumerate() {
                *w *= self.density.d1f(w.norm_sqr(), self.col.node(j), t);
            }
            self.adjoint_convolve(grid, out);
        })
    }

    /// `F_t(u)` by trapezoid quadrature on the collocation grid.
    pub fn eval_f(&self, u: &FourierField, t: f64) -> f64 {
        self.eval_f_raw(u.coeffs(), t)
    }

    /// `∇F_t(u) = (∂₁f(|u*ψ|²)·(u*ψ)) ⋆ ψ`, where `⋆ ψ` is the adjoint of
    /// `*ψ` (multiplication by `2π conj(ψ̂(n))`; equal to `*ψ` for even ψ).
    pub fn grad_f(&self, u: &FourierField, t: f64) -> FourierField {
        let mut out = FourierField::zeros(self.k);
        self.grad_f_raw(u.coeffs(), t, out.coeffs_mut());
        out
    }

    /// `X^F_t(u) = i ∇F_t(u)`.
    pub fn x_f(&self, u: &FourierField, t: f64) -> FourierField {
        self.grad_f(u, t).mul_i()
    }

    /// `G_t(u) = F_t(φ⁰_{−t} u)`.
    pub fn eval_g(&self, u: &FourierField, t: f64) -> f64 {
        self.eval_g_raw(u.coeffs(), t)
    }

    pub fn eval_g_raw(&self, u: &[C64], t: f64) -> f64 {
        let mut v = u.to_vec();
        apply_free_phase(self.k, -t, &mut v);
        self.eval_f_raw(&v, t)
    }

    /// `∇G_t(u) = φ⁰_t ∇F_t(φ⁰_{−t} u)`.
    pub fn grad_g(&self, u: &FourierField, t: f64) -> FourierField {
        let mut out = FourierField::zeros(self.k);
        self.grad_g_raw(u.coeffs(), t, out.coeffs_mut());
        out
    }

    pub fn grad_g_raw(&self, u: &[C64], t: f64, out: &mut [C64]) {
        let mut v = u.to_vec();
        apply_free_phase(self.k, -t, &mut v);
        self.grad_f_raw(&v, t, out);
        apply_free_phase(self.k, t, out);
    }

    /// `X^G_t(u) = i ∇G_t(u)`.
    pub fn x_g(&self, u: &FourierField, t: f64) -> FourierField {
        self.grad_g(u, t).mul_i()
    }

    pub fn x_g_raw(&self, u: &[C64], t: f64, out: &mut [C64]) {
        self.grad_g_raw(u, t, out);
        for c in out.iter_mut() {
            *c *= I;
        }
    }

    /// Pointwise data for Hessian products of `G_t` at `u`.
    pub fn hessian_cache_g(&self, u: &[C64], t: f64) -> HessianCache {
        let n = self.col.size();
        let mut v = u.to_vec();
        apply_free_phase(self.k, -t, &mut v);
        let mut w = vec![C64::new(0.0, 0.0); n];
        let mut spec = vec![C64::new(0.0, 0.0); 2 * self.k + 1];
        self.convolved_grid(&v, &mut w, &mut spec);
        let mut d1 = Vec::with_capacity(n);
        let mut d11 = Vec::with_capacity(n);
        for (j, wj) in w.iter().enumerate() {
            let r = wj.norm_sqr();
            let x = self.col.node(j);
            d1.push(self.density.d1f(r, x, t));
            d11.push(self.density.d11f(r, x, t));
        }
        HessianCache { t, w, d1, d11 }
    }

    /// `Hess G_t(u)[ξ]` using a cache built at `u`. The Hessian is symmetric
    /// in the real inner product.
    pub fn hessian_g_apply(&self, cache: &HessianCache, xi: &[C64], out: &mut [C64]) {
        if self.density.is_zero() {
            out.fill(C64::new(0.0, 0.0));
            return;
        }
        let n = self.col.size();
        with_ws(n, |grid, spec| {
            spec[..xi.len()].copy_from_slice(xi);
            apply_free_phase(self.k, -cache.t, &mut spec[..xi.len()]);
            let v = spec[..xi.len()].to_vec();
            self.convolved_grid(&v, grid, spec);
            for (j, om) in grid.iter_mut().enumerate() {
                let w = cache.w[j];
                let re = w.re * om.re + w.im * om.im;
                *om = *om * cache.d1[j] + w * (2.0 * cache.d11[j] * re);
            }
            self.adjoint_convolve(grid, out);
        });
        apply_free_phase(self.k, cache.t, out);
    }

    /// Radial part `⟨u, ∇G_t(u)⟩` (real inner product, with the `2π` weight).
    pub fn radial_g(&self, u: &[C64], grad: &[C64]) -> f64 {
        TWO_PI * dot_re(u, grad)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::free_flow;
    use crate::rng::stream;
    use crate::spectral::{make_admissible_kernel, DecayProfile};
    use rand::Rng;

    fn gp_system(k: usize, c: f64, a: f64) -> HamiltonianSystem {
        let psi = make_admissible_kernel(
            0.1,
            k,
            &DecayProfile::Geometric {
                amplitude: 0.4,
                ratio: 0.6,
            },
        )
        .unwrap();
        HamiltonianSystem::new(
            &psi,
            DensityModel::GrossPitaevskii {
                coupling: c,
                potential: a,
            },
            k,
        )
    }

    fn pair_system(k: usize, m: i64, c: f64) -> HamiltonianSystem {
        let mut coeffs = FourierField::zeros(k);
        coeffs.set(m, C64::new(c, 0.0));
        coeffs.set(-m, C64::new(c, 0.0));
        let psi = Kernel::new(coeffs, 1e-6).unwrap();
        HamiltonianSystem::new(&psi, DensityModel::Linear { lambda: 1.0 }, k)
    }

    #[test]
    fn zero_density() {
        let sys = HamiltonianSystem::new(
            &make_admissible_kernel(0.1, 4, &DecayProfile::Flat { amplitude: 1.0 }).unwrap(),
            DensityModel::Zero,
            4,
        );
        let u = FourierField::random_unit(4, &mut stream(1, 1));
        assert_eq!(sys.eval_f(&u, 0.3), 0.0);
        assert_eq!(sys.grad_g(&u, 0.3).norm(), 0.0);
    }

    #[test]
    fn closed_form_linear_density() {
        // f(r) = r, ψ̂(±1) = c, u = e^{ix}/√(2π):
        //   F = ½ ∫ |2πc e^{ix}/√(2π)|² dx = 2π²c²
        //   ∇F = (2π)² c² e^{ix}/√(2π)
        let c = 0.17;
        let sys = pair_system(3, 1, c);
        let u = FourierField::mode(3, 1);
        let f = sys.eval_f(&u, 0.0);
        assert!((f - 2.0 * std::f64::consts::PI.powi(2) * c * c).abs() < 1e-14);
        let g = sys.grad_f(&u, 0.0);
        let expected = u.scaled(C64::new(TWO_PI * TWO_PI * c * c, 0.0));
        assert!(g.sub(&expected).norm() < 1e-14);

        // ∇F(0) = 0 for f(r) = r
        assert_eq!(sys.grad_f(&FourierField::zeros(3), 0.0).norm(), 0.0);
    }

    #[test]
    fn gp_quartic_matches_fine_quadrature() {
        // V ≡ 0: F = (c/4) ∫ |u*ψ|⁴ dx against an 8192-point oracle
        let k = 6;
        let c = 0.3;
        let sys = gp_system(k, c, 0.0);
        let mut rng = stream(2, 0);
        for _ in 0..5 {
            let u = FourierField::random_unit(k, &mut rng);
            let w = crate::spectral::convolve(&u, sys.kernel());
            let n = 8192;
            let mut sum = 0.0;
            for j in 0..n {
                let x = TWO_PI * j as f64 / n as f64;
                let val: C64 = w.iter_modes().map(|(m, c)| c * C64::from_polar(1.0, m as f64 * x)).sum();
                sum += val.norm_sqr().powi(2);
            }
            let oracle = 0.25 * c * sum * TWO_PI / n as f64;
            assert!((sys.eval_f(&u, 0.0) - oracle).abs() < 1e-10 * oracle.abs().max(1e-3));
        }
    }

    #[test]
    fn gradients_match_directional_differences() {
        let k = 5;
        let sys = gp_system(k, 0.2, 0.1);
        let mut rng = stream(3, 0);
        let h = 1e-5;
        for _ in 0..20 {
            let u = FourierField::random_unit(k, &mut rng);
            let v = FourierField::random_unit(k, &mut rng);
            let t: f64 = rng.random();
            let mut up = u.clone();
            up.add_scaled(C64::new(h, 0.0), &v);
            let mut um = u.clone();
            um.add_scaled(C64::new(-h, 0.0), &v);
            let fd_f = (sys.eval_f(&up, t) - sys.eval_f(&um, t)) / (2.0 * h);
            let fd_g = (sys.eval_g(&up, t) - sys.eval_g(&um, t)) / (2.0 * h);
            let an_f = sys.grad_f(&u, t).inner(&v);
            let an_g = sys.grad_g(&u, t).inner(&v);
            assert!((fd_f - an_f).abs() <= 1e-7 * an_f.abs().max(1e-2), "{fd_f} {an_f}");
            assert!((fd_g - an_g).abs() <= 1e-7 * an_g.abs().max(1e-2), "{fd_g} {an_g}");
        }
    }

    #[test]
    fn g_is_conjugated_f() {
        let k = 5;
        let sys = gp_system(k, 0.2, 0.1);
        let mut rng = stream(4, 0);
        let u = FourierField::random_unit(k, &mut rng);
        assert_eq!(sys.eval_g(&u, 0.0), sys.eval_f(&u, 0.0));
        assert!(sys.grad_g(&u, 0.0).sub(&sys.grad_f(&u, 0.0)).norm() < 1e-15);
        for _ in 0..10 {
            let t: f64 = rng.random();
            let direct = sys.eval_f(&free_flow(&u, -t), t);
            assert!((sys.eval_g(&u, t) - direct).abs() <= 1e-14);
            let conj = free_flow(&sys.grad_f(&free_flow(&u, -t), t), t);
            assert!(sys.grad_g(&u, t).sub(&conj).norm() <= 1e-14);
        }
    }

    #[test]
    fn perpendicularity_and_phase_invariance() {
        let k = 6;
        let sys = gp_system(k, 0.3, 0.2);
        let mut rng = stream(5, 0);
        for _ in 0..200 {
            let u = FourierField::random_unit(k, &mut rng);
            let t: f64 = rng.random();
            assert!(u.inner(&sys.x_f(&u, t)).abs() <= 1e-12);
            assert!(u.inner(&sys.x_g(&u, t)).abs() <= 1e-12);
            let theta: f64 = rng.random::<f64>() * TWO_PI;
            let ur = u.scaled(C64::from_polar(1.0, theta));
            assert!((sys.eval_f(&ur, t) - sys.eval_f(&u, t)).abs() <= 1e-12);
        }
    }

    #[test]
    fn f_ignores_modes_outside_kernel_support() {
        let k = 6;
        let mut coeffs = FourierField::zeros(k);
        for m in [1i64, 2] {
            coeffs.set(m, C64::new(0.3, 0.0));
            coeffs.set(-m, C64::new(0.3, 0.0));
        }
        let psi = Kernel::new(coeffs, 0.9).unwrap();
        let sys = HamiltonianSystem::new(
            &psi,
            DensityModel::GrossPitaevskii {
                coupling: 0.5,
                potential: 0.2,
            },
            k,
        );
        let u = FourierField::random_unit(k, &mut stream(6, 0));
        let mut v = u.clone();
        for n in [-6i64, -5, -4, -3, 0, 3, 4, 5, 6] {
            v.set(n, C64::new(0.0, 0.0));
        }
        assert!((sys.eval_f(&u, 0.4) - sys.eval_f(&v, 0.4)).abs() < 1e-14);
    }

    #[test]
    fn hessian_matches_gradient_differences_and_is_symmetric() {
        let k = 5;
        let sys = gp_system(k, 0.3, 0.2);
        let mut rng = stream(7, 0);
        for _ in 0..10 {
            let u = FourierField::random_unit(k, &mut rng);
            let a = FourierField::random_unit(k, &mut rng);
            let b = FourierField::random_unit(k, &mut rng);
            let t: f64 = rng.random();
            let cache = sys.hessian_cache_g(u.coeffs(), t);
            let mut ha = FourierField::zeros(k);
            sys.hessian_g_apply(&cache, a.coeffs(), ha.coeffs_mut());
            let mut hb = FourierField::zeros(k);
            sys.hessian_g_apply(&cache, b.coeffs(), hb.coeffs_mut());
            assert!((ha.inner(&b) - a.inner(&hb)).abs() < 1e-13);

            let h = 1e-6;
            let mut up = u.clone();
            up.add_scaled(C64::new(h, 0.0), &a);
            let mut um = u.clone();
            um.add_scaled(C64::new(-h, 0.0), &a);
            let fd = sys.grad_g(&up, t).sub(&sys.grad_g(&um, t)).scaled(C64::new(0.5 / h, 0.0));
            assert!(fd.sub(&ha).norm() < 1e-8, "{}", fd.sub(&ha).norm());
        }
    }
}
