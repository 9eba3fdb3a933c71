//! Safety probabilities for the double integrator (stay in [-1, 1]^2, end in
//! [-0.5, 0.5]^2 after 16 steps), checked against Monte-Carlo rollouts of the
//! greedy policy.

use std::sync::Arc;

use kernelctrl::reach::DEFAULT_CHUNK;
use kernelctrl::sampling::{draw_transitions, grid_actions};
use kernelctrl::systems::{make_system, SystemParams};
use kernelctrl::validate::mc_safety;
use kernelctrl::{Embedding, HyperRect, KernelSpec, Problem, SRModel, SeededRng, Tube};

fn main() -> kernelctrl::Result<()> {
    let m = 1000;
    let horizon = 16;
    let sys = make_system("integrator", &SystemParams::new())?;
    let abox = HyperRect::cube(-1.0, 1.0, 1)?;
    let sample = draw_transitions(&sys, &HyperRect::cube(-1.1, 1.1, 2)?, &abox, m, &mut SeededRng::new(0))?;
    let emb = Arc::new(Embedding::fit_default(sample, KernelSpec::gaussian(0.3)?)?);
    let safe = Tube::constant(HyperRect::cube(-1.0, 1.0, 2)?, horizon);
    let target = Tube::constant(HyperRect::cube(-0.5, 0.5, 2)?, horizon);
    let actions = grid_actions(&abox, 21)?;

    let points: Vec<Vec<f64>> = [[-0.5, 0.25], [0.0, 0.0], [0.5, -0.5], [0.9, 0.8], [1.2, 0.0]]
        .iter()
        .map(|p| p.to_vec())
        .collect();
    for problem in [Problem::Tht, Problem::Fht] {
        let model = SRModel::fit_chunked(emb.clone(), actions.clone(), safe.clone(), target.clone(), horizon, problem, DEFAULT_CHUNK)?;
        println!("{problem:?}");
        for (x, p) in points.iter().zip(model.predict(&points)?) {
            let mc = mc_safety(&sys, |t, x| model.greedy_action(t, x), x, &safe, &target, horizon, problem, 1000, &SeededRng::new(9))?;
            println!("  x = {x:?}: kernel {p:.3}, Monte-Carlo {:.3} +- {:.3}", mc.estimate, mc.half_width);
        }
    }
    Ok(())
}
