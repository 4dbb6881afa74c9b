use std::f64::consts::PI;

use pinnkit_core::diffgraph::Graph;
use pinnkit_core::models::{predict, ModelSpec, Network};
use pinnkit_core::quantum::{
    census, estimate_complexity, parameter_shift, pqc_forward, pqc_forward_angles, scaled_angles, AngleScaling, Ansatz,
    Basis, CircuitSpec, ComplexityInput, EvalCounter, Hybrid, HybridSpec, ShiftTarget,
};
use pinnkit_core::Tensor;
use proptest::prelude::*;

fn ansatz() -> impl Strategy<Value = Ansatz> {
    prop::sample::select(Ansatz::ALL.to_vec())
}

fn basis() -> impl Strategy<Value = Basis> {
    prop::sample::select(vec![Basis::X, Basis::Y, Basis::Z])
}

fn circuit() -> impl Strategy<Value = (CircuitSpec, Vec<f64>, Vec<f64>)> {
    (1usize..=4, 1usize..=3, ansatz(), basis()).prop_flat_map(|(n, l, a, b)| {
        let spec = CircuitSpec {
            basis: b,
            ..CircuitSpec::new(n, l, a)
        };
        let p = spec.param_count();
        (
            Just(spec),
            prop::collection::vec(-PI..PI, p),
            prop::collection::vec(-PI..PI, 3 * n),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn expectations_are_bounded((spec, theta, phi) in circuit()) {
        let phi = Tensor::new(vec![3, spec.n_qubits], phi).unwrap();
        let z = pqc_forward_angles(&spec, &theta, &phi, &EvalCounter::new()).unwrap();
        prop_assert!(z.data().iter().all(|v| v.abs() <= 1.0 + 1e-12));
    }

    #[test]
    fn batch_equals_per_sample((spec, theta, phi) in circuit()) {
        let n = spec.n_qubits;
        let batch = Tensor::new(vec![3, n], phi.clone()).unwrap();
        let all = pqc_forward_angles(&spec, &theta, &batch, &EvalCounter::new()).unwrap();
        for b in 0..3 {
            let one = Tensor::row(phi[b * n..(b + 1) * n].to_vec());
            let z = pqc_forward_angles(&spec, &theta, &one, &EvalCounter::new()).unwrap();
            for q in 0..n {
                prop_assert!((z.at(0, q) - all.at(b, q)).abs() <= 1e-14);
            }
        }
    }

    #[test]
    fn shift_matches_finite_differences((spec, theta, phi) in circuit(), k in 0usize..64) {
        prop_assume!(!theta.is_empty());
        let k = k % theta.len();
        let phi = Tensor::new(vec![3, spec.n_qubits], phi).unwrap();
        let c = EvalCounter::new();
        let d = parameter_shift(&spec, &theta, &phi, &[ShiftTarget::Theta(k)], &c).unwrap();
        prop_assert_eq!(c.get(), 2);
        let h = 1e-5;
        let mut tp = theta.clone();
        tp[k] += h;
        let mut tm = theta.clone();
        tm[k] -= h;
        let fp = pqc_forward_angles(&spec, &tp, &phi, &c).unwrap();
        let fm = pqc_forward_angles(&spec, &tm, &phi, &c).unwrap();
        for i in 0..d.data().len() {
            let fd = (fp.data()[i] - fm.data()[i]) / (2.0 * h);
            prop_assert!((d.data()[i] - fd).abs() <= 1e-7);
        }
    }

    #[test]
    fn second_angle_shift_matches_finite_differences((spec, theta, phi) in circuit(), j in 0usize..4) {
        let n = spec.n_qubits;
        let j = j % n;
        let phi = Tensor::new(vec![3, n], phi).unwrap();
        let c = EvalCounter::new();
        let d2 = parameter_shift(&spec, &theta, &phi, &[ShiftTarget::Angle(j); 2], &c).unwrap();
        prop_assert_eq!(c.get(), 4);
        let h = 1e-4;
        let shifted = |s: f64| {
            let mut p = phi.clone();
            for b in 0..3 {
                p.data_mut()[b * n + j] += s;
            }
            pqc_forward_angles(&spec, &theta, &p, &c).unwrap()
        };
        let (fp, f0, fm) = (shifted(h), shifted(0.0), shifted(-h));
        for i in 0..d2.data().len() {
            let fd = (fp.data()[i] - 2.0 * f0.data()[i] + fm.data()[i]) / (h * h);
            prop_assert!((d2.data()[i] - fd).abs() <= 1e-5);
        }
    }

    #[test]
    fn scalings_stay_in_range(a in -1.0f64..=1.0) {
        for s in AngleScaling::ALL {
            let v = s.apply(a).unwrap();
            prop_assert!(v.is_finite());
        }
        prop_assert!(AngleScaling::Acos.apply(a).unwrap() >= 0.0);
        prop_assert!(AngleScaling::Asin.apply(a).unwrap() >= 0.0);
        prop_assert!(AngleScaling::Asin.apply(a).unwrap() <= PI);
    }

    #[test]
    fn complexity_grows_with_parameters(q in 1u64..8, p in 0u64..200, k in 0u32..3) {
        let a = estimate_complexity(&ComplexityInput { q, p, k, s: None }).unwrap();
        let b = estimate_complexity(&ComplexityInput { q, p: p + 1, k, s: None }).unwrap();
        prop_assert_eq!(b.n_step - a.n_step, 2 * a.n_loss);
        prop_assert_eq!(a.n_step, (1 + 2 * p as u128) * a.n_loss);
        prop_assert!(a.bound_ok.iter().all(|&ok| ok));
    }
}

#[test]
fn scalings_reject_out_of_domain() {
    assert!(AngleScaling::Asin.apply(1.5).is_err());
    assert!(AngleScaling::Acos.apply(-1.01).is_err());
    let t = Tensor::row(vec![2.0]);
    assert!(scaled_angles(&t, AngleScaling::Acos).is_err());
    assert!(scaled_angles(&t, AngleScaling::Pi).is_ok());
}

#[test]
fn complexity_rejects_oversized_partial_counts() {
    let r = estimate_complexity(&ComplexityInput {
        q: 2,
        p: 3,
        k: 1,
        s: Some(vec![3]),
    });
    assert!(r.is_err());
}

#[test]
fn forward_counts_one_evaluation_per_batch() {
    let spec = CircuitSpec::new(3, 2, Ansatz::StronglyEntangling);
    let c = EvalCounter::new();
    let x = Tensor::new(vec![5, 3], vec![0.1; 15]).unwrap();
    pqc_forward(&spec, &vec![0.2; spec.param_count()], &x, &c).unwrap();
    assert_eq!(c.get(), 1);
}

fn hybrid() -> Hybrid {
    let spec = HybridSpec {
        trunk: ModelSpec {
            input_bounds: Some(vec![(-1.0, 1.0), (-1.0, 1.0), (0.0, 1.5)]),
            ..ModelSpec::mlp(3, 6, 2, 3)
        },
        circuit: CircuitSpec::new(3, 2, Ansatz::StronglyEntangling),
        out_dim: 3,
    };
    Hybrid::new(spec, 11).unwrap()
}

#[test]
fn hybrid_gradient_matches_finite_differences() {
    let mut net = hybrid();
    let x = Tensor::new(vec![4, 3], vec![0.1, -0.4, 0.2, 0.7, 0.3, 1.0, -0.9, 0.8, 0.5, 0.0, 0.0, 1.4]).unwrap();
    let loss = |net: &Hybrid| -> f64 { predict(net, &x).unwrap().data().iter().map(|v| v * v).sum() };
    let mut g = Graph::new();
    let params = net.params().bind(&mut g);
    let xv = g.leaf(x.clone());
    let y = net.forward(&mut g, &params, xv).unwrap();
    let sq = g.square(y).unwrap();
    let s = g.sum(sq).unwrap();
    let wrt = net.params().trainable_handles(&params);
    let grad = g.backward(s, &wrt).unwrap().flatten();
    let flat = net.params().flatten_trainable();
    let h = 1e-6;
    for k in 0..flat.len() {
        let mut p = flat.clone();
        p[k] += h;
        net.params_mut().set_trainable(&p).unwrap();
        let fp = loss(&net);
        p[k] -= 2.0 * h;
        net.params_mut().set_trainable(&p).unwrap();
        let fm = loss(&net);
        let fd = (fp - fm) / (2.0 * h);
        assert!((fd - grad[k]).abs() <= 1e-6 * (1.0 + grad[k].abs()), "param {k}: {fd} vs {}", grad[k]);
    }
}

#[test]
fn census_counts_trainable_parameters() {
    let spec = hybrid().spec().clone();
    let c = census(&spec).unwrap();
    assert_eq!(c.hybrid, hybrid().params().trainable_count());
    let want = 100.0 * (c.baseline as f64 - c.hybrid as f64) / c.baseline as f64;
    assert!((c.reduction_pct - want).abs() < 1e-12);
}
