//! Estimate `E[y | x, u]` for the stochastic double integrator from samples
//! and compare with the exact mean `A x + B u` as the sample grows.

use kernelctrl::sampling::draw_transitions;
use kernelctrl::systems::{make_system, SystemParams};
use kernelctrl::validate::linear_gaussian_mean;
use kernelctrl::{Embedding, HyperRect, KernelSpec, SeededRng};

fn main() -> kernelctrl::Result<()> {
    let sys = make_system("integrator", &SystemParams::new())?;
    let sbox = HyperRect::cube(-1.1, 1.1, 2)?;
    let abox = HyperRect::cube(-1.0, 1.0, 1)?;
    let queries = [([0.2, -0.3], [0.5]), ([-0.5, 0.5], [-0.2]), ([0.0, 0.0], [0.0])];

    for m in [100, 500, 2000] {
        let sample = draw_transitions(&sys, &sbox, &abox, m, &mut SeededRng::new(1))?;
        let emb = Embedding::fit_default(sample, KernelSpec::gaussian(1.0)?)?;
        let first = emb.sample().map_successors(|y| y[0]);
        let second = emb.sample().map_successors(|y| y[1]);
        let mut err = 0.0;
        for (x, u) in &queries {
            let exact = linear_gaussian_mean(&sys, x, u)?;
            let est = [emb.expectation(&first, x, u)?, emb.expectation(&second, x, u)?];
            err += (est[0] - exact[0]).abs() + (est[1] - exact[1]).abs();
        }
        println!("M = {m:5}: mean abs error {:.4}", err / (2.0 * queries.len() as f64));
    }
    Ok(())
}
