//! Data-parallel kernels under the active backend (`par::MODE`). With the
//! `parallel` feature each workload also runs inside a one-thread rayon pool;
//! `cargo bench --no-default-features` gives the plain sequential build.

use std::hint::black_box;

use convfloer::floer::{residual, StripGrid};
use convfloer::flow::{tangent_columns, FlowSpec};
use convfloer::hamiltonian::{hofer_norm, DensityModel, Frame, HamiltonianSystem, HoferOptions, SystemHamiltonian};
use convfloer::par;
use convfloer::spectral::{make_admissible_kernel, DecayProfile, FourierField};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

const K: usize = 8;

fn system() -> HamiltonianSystem {
    let psi = make_admissible_kernel(0.1, K, &DecayProfile::Geometric { amplitude: 0.3, ratio: 0.8 }).unwrap();
    HamiltonianSystem::new(
        &psi,
        DensityModel::GrossPitaevskii {
            coupling: 0.05,
            potential: 0.05,
        },
        K,
    )
}

type Workload = Box<dyn Fn() + Send + Sync>;

fn workloads() -> Vec<(&'static str, Workload)> {
    let sys = system();
    let grid = StripGrid::constant(K, 5, 10.0, 15.0, 200, 32).unwrap();
    let sys_r = sys.clone();
    let residual_job: Workload = Box::new(move || {
        black_box(residual(&sys_r, &grid).norm);
    });

    let sys_h = sys.clone();
    let opts = HoferOptions {
        nodes: 4,
        starts: 8,
        ..HoferOptions::default()
    };
    let hofer_job: Workload = Box::new(move || {
        black_box(hofer_norm(&SystemHamiltonian { sys: &sys_h, frame: Frame::G }, &opts).value);
    });

    let spec = FlowSpec::new(sys, 1.0 / 64.0).unwrap();
    let u = FourierField::mode(K, 5);
    let dirs: Vec<FourierField> = (-(K as i64)..=K as i64).map(|n| FourierField::mode(K, n)).collect();
    let tangent_job: Workload = Box::new(move || {
        black_box(tangent_columns(&spec, &u, &dirs).unwrap());
    });

    vec![("residual", residual_job), ("hofer", hofer_job), ("tangent_columns", tangent_job)]
}

fn bench(c: &mut Criterion) {
    let mut group = c.benchmark_group("kernels");
    group.sample_size(10);
    for (name, job) in workloads() {
        group.bench_function(BenchmarkId::new(name, par::MODE), |b| b.iter(&job));
        #[cfg(feature = "parallel")]
        {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
            group.bench_function(BenchmarkId::new(name, "rayon-1-thread"), |b| {
                b.iter(|| pool.install(&job))
            });
        }
    }
    group.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
