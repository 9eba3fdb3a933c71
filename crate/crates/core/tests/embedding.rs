//! The conditional embedding against explicit linear algebra and the exact
//! mean of a linear Gaussian system.

use kernelctrl::embedding::default_regularization;
use kernelctrl::sampling::{draw_transitions, uniform_box};
use kernelctrl::systems::{make_system, SystemParams};
use kernelctrl::validate::linear_gaussian_mean;
use kernelctrl::{Embedding, HyperRect, KernelSpec, SeededRng, TransitionSample};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn integrator_sample(m: usize, seed: u64) -> TransitionSample {
    let sys = make_system("integrator", &SystemParams::new()).unwrap();
    draw_transitions(&sys, &HyperRect::cube(-1.1, 1.1, 2).unwrap(), sys.action_box(), m, &mut SeededRng::new(seed))
        .unwrap()
}

fn gauss(a: &[f64], b: &[f64], sigma: f64) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    (-d2 / (2.0 * sigma * sigma)).exp()
}

#[test]
fn factored_solve_matches_explicit_inverse() {
    let sigma = 0.7;
    for seed in 0..20 {
        let m = 40 + 8 * seed as usize;
        let s = integrator_sample(m, seed);
        let emb = Embedding::fit_default(s.clone(), KernelSpec::gaussian(sigma).unwrap()).unwrap();
        assert_eq!(emb.jitter(), 0.0);
        let lambda = default_regularization(m);
        let g = DMatrix::from_fn(m, m, |i, j| {
            gauss(&s.states()[i], &s.states()[j], sigma) * gauss(&s.actions()[i], &s.actions()[j], sigma)
                + if i == j { lambda * m as f64 } else { 0.0 }
        });
        let inv = g.try_inverse().unwrap();
        for (x, u) in [([0.1, -0.4], [0.3]), ([-0.9, 0.8], [-1.0])] {
            let z = DVector::from_fn(m, |i, _| gauss(&s.states()[i], &x, sigma) * gauss(&s.actions()[i], &u, sigma));
            let want = &inv * z;
            let got = emb.beta(&x, &u).unwrap();
            assert!((got - want).amax() <= 1e-8, "seed {seed}");
        }
    }
}

#[test]
fn batch_is_independent_of_chunk_size() {
    let emb = Embedding::fit_default(integrator_sample(300, 3), KernelSpec::gaussian(0.5).unwrap()).unwrap();
    let mut rng = SeededRng::new(11);
    let xs = uniform_box(&HyperRect::cube(-1.0, 1.0, 2).unwrap(), 100, &mut rng);
    let us = uniform_box(&HyperRect::cube(-1.0, 1.0, 1).unwrap(), 100, &mut rng);
    let queries: Vec<(Vec<f64>, Vec<f64>)> = xs.into_iter().zip(us).collect();
    let reference = emb.beta_batch(&queries, 100).unwrap();
    for chunk in [1, 7] {
        let b = emb.beta_batch(&queries, chunk).unwrap();
        assert!((&b - &reference).amax() <= 1e-10);
    }
    for (q, (x, u)) in queries.iter().enumerate().step_by(17) {
        assert!((emb.beta(x, u).unwrap() - reference.column(q)).amax() <= 1e-10);
    }
}

#[test]
fn dual_route_matches_direct_expectation() {
    let emb = Embedding::fit_default(integrator_sample(200, 4), KernelSpec::gaussian(0.5).unwrap()).unwrap();
    let f = emb.sample().map_successors(|y| y[0].sin() + y[1] * y[1]);
    let points = vec![vec![0.0, 0.0], vec![0.5, -0.2], vec![-0.7, 0.9]];
    let actions = vec![vec![-0.5], vec![0.25]];
    let table = emb.expectation_table(&f, &points, &actions, 2).unwrap();
    for (q, x) in points.iter().enumerate() {
        for (j, u) in actions.iter().enumerate() {
            let direct = emb.expectation(&f, x, u).unwrap();
            assert!((table[(q, j)] - direct).abs() <= 1e-10);
        }
    }
}

#[test]
fn error_shrinks_with_sample_size() {
    let sys = make_system("integrator", &SystemParams::new()).unwrap();
    let queries = uniform_box(&HyperRect::cube(-0.8, 0.8, 3).unwrap(), 50, &mut SeededRng::new(99));
    let mut errors = Vec::new();
    for m in [100, 400, 1600] {
        let emb = Embedding::fit_default(integrator_sample(m, 0), KernelSpec::gaussian(1.0).unwrap()).unwrap();
        let f0 = emb.sample().map_successors(|y| y[0]);
        let f1 = emb.sample().map_successors(|y| y[1]);
        let mut err = 0.0;
        for q in &queries {
            let (x, u) = (&q[..2], &q[2..]);
            let exact = linear_gaussian_mean(&sys, x, u).unwrap();
            err += (emb.expectation(&f0, x, u).unwrap() - exact[0]).abs();
            err += (emb.expectation(&f1, x, u).unwrap() - exact[1]).abs();
        }
        errors.push(err / (2.0 * queries.len() as f64));
    }
    assert!(errors.windows(2).all(|w| w[1] <= w[0]), "{errors:?}");
    assert!(errors[2] <= 0.05, "{errors:?}");
}

#[test]
fn rejects_mismatched_queries() {
    let emb = Embedding::fit_default(integrator_sample(20, 0), KernelSpec::gaussian(1.0).unwrap()).unwrap();
    assert!(emb.beta(&[0.0], &[0.0]).is_err());
    assert!(emb.beta(&[0.0, 0.0], &[0.0, 1.0]).is_err());
    assert!(emb.expectation(&DVector::zeros(3), &[0.0, 0.0], &[0.0]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn expectation_is_linear_in_f(a in -3.0..3.0f64, b in -3.0..3.0f64, x0 in -1.0..1.0f64, x1 in -1.0..1.0f64, u in -1.0..1.0f64) {
        let emb = Embedding::fit_default(integrator_sample(60, 1), KernelSpec::gaussian(0.8).unwrap()).unwrap();
        let f = emb.sample().map_successors(|y| y[0]);
        let g = emb.sample().map_successors(|y| y[1].cos());
        let x = [x0, x1];
        let combined = emb.expectation(&(&f * a + &g * b), &x, &[u]).unwrap();
        let separate = a * emb.expectation(&f, &x, &[u]).unwrap() + b * emb.expectation(&g, &x, &[u]).unwrap();
        prop_assert!((combined - separate).abs() <= 1e-9);
    }

    #[test]
    fn sample_order_does_not_matter(seed in 0u64..1000) {
        let s = integrator_sample(30, seed);
        let n = s.len();
        let rev = |v: &[Vec<f64>]| v.iter().rev().cloned().collect::<Vec<_>>();
        let r = TransitionSample::new(rev(s.states()), rev(s.actions()), rev(s.successors())).unwrap();
        let k = KernelSpec::gaussian(0.6).unwrap();
        let e1 = Embedding::fit_default(s, k).unwrap();
        let e2 = Embedding::fit_default(r, k).unwrap();
        let f1 = e1.sample().map_successors(|y| y[0] + 2.0 * y[1]);
        let f2 = e2.sample().map_successors(|y| y[0] + 2.0 * y[1]);
        prop_assert_eq!(f1.len(), n);
        let a = e1.expectation(&f1, &[0.2, 0.1], &[0.5]).unwrap();
        let b = e2.expectation(&f2, &[0.2, 0.1], &[0.5]).unwrap();
        prop_assert!((a - b).abs() <= 1e-9);
    }
}
