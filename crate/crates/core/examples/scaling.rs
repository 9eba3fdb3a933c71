//! Fit time against sample size: Gram assembly is quadratic in M and the
//! Cholesky factorization cubic.

use std::time::Instant;

use kernelctrl::cli::loglog_slope;
use kernelctrl::sampling::draw_transitions;
use kernelctrl::systems::{make_system, SystemParams};
use kernelctrl::{Embedding, HyperRect, KernelSpec, SeededRng};

fn main() -> kernelctrl::Result<()> {
    let sys = make_system("integrator", &SystemParams::new())?;
    let sbox = HyperRect::cube(-1.1, 1.1, 2)?;
    let mut times = Vec::new();
    for m in [200, 400, 800, 1600] {
        let s = draw_transitions(&sys, &sbox, sys.action_box(), m, &mut SeededRng::new(0))?;
        let start = Instant::now();
        Embedding::fit_default(s, KernelSpec::gaussian(0.5)?)?;
        let secs = start.elapsed().as_secs_f64();
        println!("M = {m:5}: {secs:.4} s");
        times.push((m, secs));
    }
    println!("log-log slope {:.2}", loglog_slope(&times));
    Ok(())
}
