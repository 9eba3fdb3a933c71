//! Rendezvous under Clohessy-Wiltshire-Hill dynamics with a line-of-sight
//! constraint `|x| + y <= 0` on the expected next position.

use kernelctrl::sampling::{draw_transitions, grid_actions};
use kernelctrl::systems::{make_system, simulate, SystemParams};
use kernelctrl::{Controller, CostSpec, Embedding, HyperRect, KernelSpec, SeededRng, StageCost};

fn main() -> kernelctrl::Result<()> {
    let sys = make_system("cwh", &SystemParams::new())?;
    let sbox = HyperRect::new(vec![-1.1, -1.1, -0.06, -0.06], vec![1.1, 1.1, 0.06, 0.06])?;
    let abox = HyperRect::cube(-0.05, 0.05, 2)?;
    let sample = draw_transitions(&sys, &sbox, &abox, 1500, &mut SeededRng::new(0))?;
    let emb = Embedding::fit_default(sample, KernelSpec::gaussian(0.1)?)?;

    let cost = CostSpec::new(StageCost::state_only(|_, y| y[0] * y[0] + y[1] * y[1] - 9.68))
        .with_constraint(StageCost::state_only(|_, y| y[0].abs() + y[1]));
    let ctrl = Controller::forward(emb, grid_actions(&abox, 5)?, cost)?;

    let mut rng = SeededRng::new(1);
    match simulate(&sys, &[-0.5, -0.75, 0.0, 0.0], |t, x| ctrl.act(x, t), 10, &mut rng) {
        Ok(tr) => {
            for (t, x) in tr.states.iter().enumerate() {
                println!("t = {t:2}: position ({:+.3}, {:+.3}), cone {:+.3}", x[0], x[1], x[0].abs() + x[1]);
            }
        }
        Err(kernelctrl::Error::Infeasible { violated }) => {
            println!("left the cone: constraint rows {violated:?} cannot be met");
        }
        Err(e) => return Err(e),
    }
    Ok(())
}
