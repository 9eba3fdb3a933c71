//! The decision LP: minimize `c . g` over the probability simplex subject to
//! `D g <= 0`.

use kernelctrl::{solve_lp, LpOutcome, SimplexLP};

fn main() -> kernelctrl::Result<()> {
    // Cheapest action 0 violates the constraint; mixing with action 2 fixes it.
    let lp = SimplexLP::new(vec![1.0, 3.0, 4.0], vec![vec![1.0, 0.5, -1.0]])?;
    match solve_lp(&lp)? {
        LpOutcome::Optimal { gamma, objective } => {
            println!("gamma = {gamma:?}, objective = {objective:.4}");
            println!("constraint value = {:.2e}", lp.constraint_values(&gamma)[0]);
        }
        LpOutcome::Infeasible { violated } => println!("infeasible: {violated:?}"),
    }

    let impossible = SimplexLP::new(vec![1.0, 1.0], vec![vec![1.0, 2.0]])?;
    println!("{:?}", solve_lp(&impossible)?);
    Ok(())
}
