//! A unicycle tracks a target moving along a V-shaped path. The greedy
//! controller only looks one step ahead; the dynamic-programming controller
//! plans over the whole horizon.

use std::sync::Arc;

use kernelctrl::sampling::{draw_transitions, grid_actions};
use kernelctrl::systems::{make_system, simulate, SystemParams};
use kernelctrl::{Controller, CostSpec, Embedding, HyperRect, KernelSpec, SeededRng, StageCost};

const HORIZON: usize = 10;

fn goal(t: usize) -> [f64; 2] {
    let s = 2.0 * t as f64 / HORIZON as f64;
    if s <= 1.0 {
        [-0.8 + 0.8 * s, 0.8 - 0.8 * s]
    } else {
        [0.8 * (s - 1.0), 0.8 * (s - 1.0)]
    }
}

fn main() -> kernelctrl::Result<()> {
    let mut params = SystemParams::new();
    params.insert("sampling_time".into(), 0.25);
    let sys = make_system("nonholonomic", &params)?;
    let sbox = HyperRect::new(vec![-1.2, -1.2, -3.14159], vec![1.2, 1.2, 3.14159])?;
    let sample = draw_transitions(&sys, &sbox, sys.action_box(), 800, &mut SeededRng::new(0))?;
    let emb = Arc::new(Embedding::fit_default(sample, KernelSpec::gaussian(2.0)?)?);
    let actions = grid_actions(sys.action_box(), 5)?;

    // shifted so the cost is non-positive over the sampled positions
    let cost = CostSpec::new(StageCost::state_only(|t, y| {
        let g = goal(t);
        (y[0] - g[0]).powi(2) + (y[1] - g[1]).powi(2) - 11.52
    }));
    let fwd = Controller::forward(emb.clone(), actions.clone(), cost.clone())?;
    let bwd = Controller::backward(emb, actions, cost, HORIZON)?;

    for (name, ctrl) in [("forward", &fwd), ("backward", &bwd)] {
        let mut rng = SeededRng::new(3);
        let tr = simulate(&sys, &[-0.8, 0.8, 0.0], |t, x| ctrl.act(x, t), HORIZON, &mut rng)?;
        let end = tr.final_state();
        let g = goal(HORIZON);
        println!("{name:8}: terminal distance {:.3}", (end[0] - g[0]).hypot(end[1] - g[1]));
    }
    Ok(())
}
