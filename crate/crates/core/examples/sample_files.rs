//! Write a transition sample to CSV and read it back bit for bit.

use kernelctrl::cli::io::{read_sample, write_sample};
use kernelctrl::sampling::draw_transitions;
use kernelctrl::systems::{make_system, SystemParams};
use kernelctrl::{HyperRect, SeededRng};

fn main() -> kernelctrl::Result<()> {
    let sys = make_system("integrator", &SystemParams::new())?;
    let s = draw_transitions(&sys, &HyperRect::cube(-1.1, 1.1, 2)?, sys.action_box(), 100, &mut SeededRng::new(4))?;
    let path = std::env::temp_dir().join("kernelctrl_sample.csv");
    write_sample(&s, &path)?;
    let back = read_sample(&path)?;
    let same = s.states() == back.states() && s.actions() == back.actions() && s.successors() == back.successors();
    println!("{} transitions written to {}, identical after reading: {same}", s.len(), path.display());
    Ok(())
}
