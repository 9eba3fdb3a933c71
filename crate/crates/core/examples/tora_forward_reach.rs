//! Forward reachable sets of the TORA system: one Abel-kernel support
//! classifier per time step, fitted on simulated closed-loop trajectories.

use kernelctrl::reach::fit_forward_reach;
use kernelctrl::sampling::draw_trajectories;
use kernelctrl::systems::{make_system, tora_default_policy, SystemParams};
use kernelctrl::{HyperRect, SeededRng};

fn main() -> kernelctrl::Result<()> {
    let sys = make_system("tora", &SystemParams::new())?;
    let init = HyperRect::new(vec![0.6, -0.7, -0.4, 0.5], vec![0.7, -0.6, -0.3, 0.6])?;
    let policy = |_: usize, x: &[f64]| Ok(tora_default_policy(x));
    let horizon = 50;
    let train = draw_trajectories(&sys, &init, policy, horizon, 50, &SeededRng::new(0))?;
    let fresh = draw_trajectories(&sys, &init, policy, horizon, 50, &SeededRng::new(1))?;
    let classifiers = fit_forward_reach(&train, 0.1, 1.0 / 50.0)?;

    for t in (0..=horizon).step_by(10) {
        let cls = &classifiers[t];
        let mut inside = 0;
        for tr in &fresh {
            if cls.classify(&tr.states[t])?.1 {
                inside += 1;
            }
        }
        println!("t = {t:3}: tau {:.4}, fresh trajectories inside {inside}/50", cls.tau());
    }
    Ok(())
}
