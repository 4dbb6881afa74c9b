use std::f64::consts::PI;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use pinnkit_core::benchmarks::{allen_cahn_fdm, allen_cahn_initial, oracle_maxwell_spectral};
use pinnkit_core::diffgraph::Graph;
use pinnkit_core::losses::{residual_loss, PdeKind};
use pinnkit_core::models::{Bound, Mlp, ModelSpec};
use pinnkit_core::quantum::{estimate_complexity, pqc_forward_angles, Ansatz, CircuitSpec, ComplexityInput, EvalCounter};
use pinnkit_core::trainer::{sample_uniform, Endpoints};
use pinnkit_core::Tensor;

fn residual_step(c: &mut Criterion) {
    let mut group = c.benchmark_group("residual_and_gradient");
    group.sample_size(20);
    for width in [16usize, 32, 64] {
        let net = Mlp::new(
            ModelSpec {
                input_bounds: Some(vec![(0.0, 2.0 * PI), (0.0, 1.0)]),
                ..ModelSpec::mlp(2, width, 3, 1)
            },
            0,
        )
        .unwrap();
        let pts = sample_uniform(&[(0.0, 2.0 * PI), (0.0, 1.0)], &[32, 32], &[Endpoints::LeftClosed]).unwrap();
        group.bench_with_input(BenchmarkId::new("advection_1024", width), &width, |b, _| {
            b.iter(|| {
                let mut g = Graph::new();
                let bound = Bound::new(&net, &mut g);
                let wrt = bound.trainable();
                let l = residual_loss(&mut g, &bound, &PdeKind::Advection { c: 10.0 }, &pts).unwrap();
                g.backward(l, &wrt).unwrap()
            })
        });
        let ac = PdeKind::allen_cahn();
        group.bench_with_input(BenchmarkId::new("allen_cahn_1024", width), &width, |b, _| {
            b.iter(|| {
                let mut g = Graph::new();
                let bound = Bound::new(&net, &mut g);
                let wrt = bound.trainable();
                let l = residual_loss(&mut g, &bound, &ac, &pts).unwrap();
                g.backward(l, &wrt).unwrap()
            })
        });
    }
    group.finish();
}

fn statevector(c: &mut Criterion) {
    let mut group = c.benchmark_group("statevector_forward");
    for n in [4usize, 7, 10] {
        let spec = CircuitSpec::new(n, 4, Ansatz::StronglyEntangling);
        let theta = vec![0.3; spec.param_count()];
        let phi = Tensor::new(vec![64, n], vec![0.7; 64 * n]).unwrap();
        let counter = EvalCounter::new();
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| pqc_forward_angles(&spec, &theta, &phi, &counter).unwrap())
        });
    }
    group.finish();
}

fn oracles(c: &mut Criterion) {
    let mut group = c.benchmark_group("oracles");
    group.sample_size(10);
    group.bench_function("allen_cahn_fdm_512", |b| {
        b.iter(|| allen_cahn_fdm(allen_cahn_initial, 512, 1e-3, 11, 1.0, 1e-4, 5.0).unwrap())
    });
    group.bench_function("maxwell_spectral_128", |b| b.iter(|| oracle_maxwell_spectral(128, 1.5).unwrap()));
    group.finish();
}

fn complexity(c: &mut Criterion) {
    c.bench_function("complexity_q7_p84", |b| {
        b.iter(|| {
            estimate_complexity(&ComplexityInput {
                q: 7,
                p: 84,
                k: 1,
                s: Some(vec![7]),
            })
            .unwrap()
        })
    });
}

criterion_group!(benches, residual_step, statevector, oracles, complexity);
criterion_main!(benches);
