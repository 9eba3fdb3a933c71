//! Safety probabilities and support classifiers.

use kernelctrl::reach::{fit_forward_reach, indicator};
use kernelctrl::sampling::{cartesian, draw_transitions, grid_actions, linspace, uniform_box};
use kernelctrl::systems::{make_system, SystemParams};
use kernelctrl::{Embedding, HyperRect, KernelSpec, Problem, SRModel, SeededRng, SupportClassifier, Tube};
use proptest::prelude::*;
use std::sync::Arc;

const HORIZON: usize = 6;

fn embedding(m: usize) -> Arc<Embedding> {
    let sys = make_system("integrator", &SystemParams::new()).unwrap();
    let s = draw_transitions(&sys, &HyperRect::cube(-1.1, 1.1, 2).unwrap(), sys.action_box(), m, &mut SeededRng::new(2))
        .unwrap();
    Arc::new(Embedding::fit_default(s, KernelSpec::gaussian(0.3).unwrap()).unwrap())
}

fn model(emb: &Arc<Embedding>, problem: Problem, chunk: usize) -> SRModel {
    SRModel::fit_chunked(
        emb.clone(),
        grid_actions(&HyperRect::cube(-1.0, 1.0, 1).unwrap(), 9).unwrap(),
        Tube::constant(HyperRect::cube(-1.0, 1.0, 2).unwrap(), HORIZON),
        Tube::constant(HyperRect::cube(-0.5, 0.5, 2).unwrap(), HORIZON),
        HORIZON,
        problem,
        chunk,
    )
    .unwrap()
}

fn grid() -> Vec<Vec<f64>> {
    let axis = linspace(-1.2, 1.2, 25);
    cartesian(&[axis.clone(), axis])
}

#[test]
fn probabilities_lie_in_the_unit_interval_and_vanish_outside_the_safe_set() {
    let emb = embedding(400);
    let safe = HyperRect::cube(-1.0, 1.0, 2).unwrap();
    for problem in [Problem::Tht, Problem::Fht] {
        let m = model(&emb, problem, 64);
        for (x, p) in grid().iter().zip(m.predict(&grid()).unwrap()) {
            assert!((0.0..=1.0).contains(&p), "{x:?}: {p}");
            if !safe.contains(x) {
                assert_eq!(p, 0.0, "{x:?}");
            }
        }
        for t in 0..=HORIZON {
            assert!(m.table(t).iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }
}

#[test]
fn first_hitting_dominates_terminal_hitting_over_one_step() {
    // both recursions start from the same terminal table
    let emb = embedding(400);
    let fit = |problem| {
        SRModel::fit(
            emb.clone(),
            grid_actions(&HyperRect::cube(-1.0, 1.0, 1).unwrap(), 9).unwrap(),
            Tube::constant(HyperRect::cube(-1.0, 1.0, 2).unwrap(), 1),
            Tube::constant(HyperRect::cube(-0.5, 0.5, 2).unwrap(), 1),
            1,
            problem,
        )
        .unwrap()
        .predict(&grid())
        .unwrap()
    };
    for (a, b) in fit(Problem::Tht).iter().zip(&fit(Problem::Fht)) {
        assert!(*b >= a - 1e-12, "tht {a} fht {b}");
    }
}

#[test]
fn first_hitting_dominance_gap_stays_small_over_many_steps() {
    // beta has negative entries, so the estimate is not monotone in the
    // continuation table and exact dominance can slip; the slack is held to a
    // small fraction of the Monte-Carlo agreement tolerance
    let emb = embedding(400);
    let tht = model(&emb, Problem::Tht, 64).predict(&grid()).unwrap();
    let fht = model(&emb, Problem::Fht, 64).predict(&grid()).unwrap();
    let worst = tht.iter().zip(&fht).map(|(a, b)| a - b).fold(0.0, f64::max);
    assert!(worst <= 0.03, "largest shortfall {worst}");
    let mean_gain: f64 = tht.iter().zip(&fht).map(|(a, b)| b - a).sum::<f64>() / tht.len() as f64;
    assert!(mean_gain > 0.0);
}

#[test]
fn first_hitting_is_one_inside_the_target() {
    let emb = embedding(200);
    let m = model(&emb, Problem::Fht, 64);
    let inside: Vec<Vec<f64>> = uniform_box(&HyperRect::cube(-0.5, 0.5, 2).unwrap(), 20, &mut SeededRng::new(1));
    assert!(m.predict(&inside).unwrap().iter().all(|p| *p == 1.0));
}

#[test]
fn terminal_table_is_the_target_indicator() {
    let emb = embedding(200);
    let m = model(&emb, Problem::Tht, 64);
    let target = HyperRect::cube(-0.5, 0.5, 2).unwrap();
    for (v, y) in m.table(HORIZON).iter().zip(emb.sample().successors()) {
        assert_eq!(*v, indicator(&target, y));
    }
}

#[test]
fn predictions_do_not_depend_on_chunk_size() {
    let emb = embedding(300);
    let reference = model(&emb, Problem::Tht, 1000).predict(&grid()).unwrap();
    for chunk in [1, 7, 100] {
        let p = model(&emb, Problem::Tht, chunk).predict(&grid()).unwrap();
        for (a, b) in p.iter().zip(&reference) {
            assert!((a - b).abs() <= 1e-10);
        }
    }
}

#[test]
fn greedy_action_comes_from_the_grid() {
    let emb = embedding(200);
    let m = model(&emb, Problem::Tht, 64);
    let u = m.greedy_action(0, &[0.3, -0.2]).unwrap();
    assert!(m.actions().actions().contains(&u));
    assert!(m.greedy_action(HORIZON, &[0.0, 0.0]).is_err());
}

#[test]
fn classifier_accepts_its_training_points() {
    let pts = uniform_box(&HyperRect::cube(0.0, 1.0, 3).unwrap(), 40, &mut SeededRng::new(4));
    let cls = SupportClassifier::fit(pts.clone(), 0.2, 1.0 / 40.0).unwrap();
    assert!(pts.iter().all(|p| cls.classify(p).unwrap().1));
    assert!(!cls.classify(&[10.0, 10.0, 10.0]).unwrap().1);
    assert!(cls.tau() > 0.0 && cls.tau() < 1.0);
}

#[test]
fn forward_reach_gives_one_classifier_per_step() {
    let sys = make_system("tora", &SystemParams::new()).unwrap();
    let init = HyperRect::new(vec![0.6, -0.7, -0.4, 0.5], vec![0.7, -0.6, -0.3, 0.6]).unwrap();
    let trs = kernelctrl::sampling::draw_trajectories(
        &sys,
        &init,
        |_, x| Ok(kernelctrl::systems::tora_default_policy(x)),
        12,
        15,
        &SeededRng::new(0),
    )
    .unwrap();
    let cls = fit_forward_reach(&trs, 0.1, 1.0 / 15.0).unwrap();
    assert_eq!(cls.len(), 13);
    for (t, c) in cls.iter().enumerate() {
        assert!(trs.iter().all(|tr| c.classify(&tr.states[t]).unwrap().1));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn classifier_accepts_any_training_set(seed in 0u64..10_000, n in 1usize..30, sigma in 0.05..2.0f64) {
        let pts = uniform_box(&HyperRect::cube(-1.0, 1.0, 2).unwrap(), n, &mut SeededRng::new(seed));
        let cls = SupportClassifier::fit(pts.clone(), sigma, 1.0 / n as f64).unwrap();
        for p in &pts {
            prop_assert!(cls.classify(p).unwrap().1);
        }
    }
}
