//! Gram matrices for the two kernel families and the median bandwidth
//! heuristic.

use kernelctrl::kernels::median_distance;
use kernelctrl::sampling::uniform_box;
use kernelctrl::{HyperRect, KernelSpec, SeededRng};

fn main() -> kernelctrl::Result<()> {
    let pts = uniform_box(&HyperRect::cube(-1.0, 1.0, 2)?, 6, &mut SeededRng::new(7));
    let sigma = median_distance(&pts, 500).expect("at least two points");
    println!("median pairwise distance: {sigma:.4}");

    for spec in [KernelSpec::gaussian(sigma)?, KernelSpec::abel(sigma)?] {
        let g = spec.gram(&pts, &pts)?;
        println!("{:?} Gram:", spec.family);
        for i in 0..g.nrows() {
            let row: Vec<String> = g.row(i).iter().map(|v| format!("{v:.3}")).collect();
            println!("  {}", row.join(" "));
        }
        let eig = g.clone().symmetric_eigen().eigenvalues;
        println!("  smallest eigenvalue {:.3e}", eig.min());
    }
    Ok(())
}
