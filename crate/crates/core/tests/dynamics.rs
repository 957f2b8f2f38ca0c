use convfloer::flow::{flow_g, free_flow, time_one_map, FlowSpec};
use convfloer::hamiltonian::{DensityModel, HamiltonianSystem};
use convfloer::spectral::{make_admissible_kernel, DecayProfile, FourierField, C64};
use proptest::prelude::*;

const K: usize = 4;

fn system(c: f64) -> HamiltonianSystem {
    let psi = make_admissible_kernel(0.1, K, &DecayProfile::Geometric { amplitude: 0.3, ratio: 0.8 }).unwrap();
    HamiltonianSystem::new(
        &psi,
        DensityModel::GrossPitaevskii {
            coupling: c,
            potential: 0.05,
        },
        K,
    )
}

fn unit_field() -> impl Strategy<Value = FourierField> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 2 * K + 1).prop_filter_map("nonzero", |v| {
        FourierField::from_coeffs(K, v.into_iter().map(|(a, b)| C64::new(a, b)).collect())
            .unwrap()
            .normalized()
            .ok()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn gradient_is_perpendicular_to_phase_rotation(u in unit_field(), t in 0.0f64..1.0) {
        let sys = system(0.3);
        let g = sys.grad_f(&u, t);
        prop_assert!(g.inner(&u.mul_i()).abs() <= 1e-12 * (1.0 + g.norm()));
        let gg = sys.grad_g(&u, t);
        prop_assert!(gg.inner(&u.mul_i()).abs() <= 1e-12 * (1.0 + gg.norm()));
    }

    #[test]
    fn hamiltonian_is_phase_invariant(u in unit_field(), t in 0.0f64..1.0, theta in 0.0f64..6.3) {
        let sys = system(0.3);
        let v = u.scaled(C64::from_polar(1.0, theta));
        let (a, b) = (sys.eval_f(&u, t), sys.eval_f(&v, t));
        prop_assert!((a - b).abs() <= 1e-13 * (1.0 + a.abs()));
    }

    #[test]
    fn g_is_f_seen_through_the_free_flow(u in unit_field(), t in 0.0f64..1.0) {
        let sys = system(0.3);
        let a = sys.eval_g(&u, t);
        let b = sys.eval_f(&free_flow(&u, -t), t);
        prop_assert!((a - b).abs() <= 1e-13 * (1.0 + a.abs()));
    }

    #[test]
    fn flow_preserves_norm_and_commutes_with_phase(u in unit_field(), theta in 0.0f64..6.3) {
        let spec = FlowSpec::new(system(0.3), 1.0 / 64.0).unwrap();
        let p = C64::from_polar(1.0, theta);
        let a = time_one_map(&spec, &u.scaled(p)).unwrap();
        let b = time_one_map(&spec, &u).unwrap().scaled(p);
        prop_assert!((a.norm() - 1.0).abs() < 1e-9);
        prop_assert!(a.sub(&b).norm() < 1e-12);
    }

    #[test]
    fn backward_flow_undoes_forward_flow(u in unit_field()) {
        let spec = FlowSpec::new(system(0.3), 1.0 / 128.0).unwrap();
        let v = flow_g(&spec, &u).unwrap();
        let w = flow_g(&spec.over(1.0, 0.0), &v).unwrap();
        prop_assert!(w.sub(&u).norm() < 1e-9);
    }
}

#[test]
fn zero_density_time_one_map_is_free_flow() {
    let psi = make_admissible_kernel(0.1, K, &DecayProfile::Flat { amplitude: 0.5 }).unwrap();
    let sys = HamiltonianSystem::new(&psi, DensityModel::Zero, K);
    let spec = FlowSpec::new(sys, 1e-2).unwrap();
    let mut u = FourierField::zeros(K);
    for n in -(K as i64)..=K as i64 {
        u.set(n, C64::new(0.1 * n as f64, 0.05));
    }
    let u = u.normalized().unwrap();
    let q = time_one_map(&spec, &u).unwrap();
    assert!(q.sub(&free_flow(&u, 1.0)).norm() < 1e-15);
}

#[test]
fn non_integer_step_count_is_rejected() {
    assert!(FlowSpec::new(system(0.1), 0.3).is_err());
}
