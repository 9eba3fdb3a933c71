//! Independent oracles: Monte-Carlo safety estimates from the true simulator
//! and closed-form conditional means of linear-Gaussian systems.

use rayon::prelude::*;

use crate::reach::{Problem, Tube};
use crate::sampling::SeededRng;
use crate::systems::SystemSpec;
use crate::{Error, Point, Result};

/// Success fraction of `trials` rollouts with a 95% normal-approximation
/// half width `1.96 sqrt(p (1 - p) / K)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McReport {
    pub estimate: f64,
    pub trials: usize,
    pub half_width: f64,
}

impl McReport {
    pub fn from_counts(successes: usize, trials: usize) -> Self {
        let p = successes as f64 / trials as f64;
        McReport {
            estimate: p,
            trials,
            half_width: 1.96 * (p * (1.0 - p) / trials as f64).sqrt(),
        }
    }
}

/// Whether one state sequence satisfies the reach-avoid specification.
pub fn rollout_succeeds(states: &[Point], safe: &Tube, target: &Tube, problem: Problem) -> bool {
    let horizon = states.len() - 1;
    match problem {
        Problem::Tht => {
            states[..horizon]
                .iter()
                .enumerate()
                .all(|(t, x)| safe.at(t).contains(x))
                && target.at(horizon).contains(&states[horizon])
        }
        Problem::Fht => {
            for (t, x) in states.iter().enumerate() {
                if target.at(t).contains(x) {
                    return true;
                }
                if t == horizon || !safe.at(t).contains(x) {
                    return false;
                }
            }
            false
        }
    }
}

/// Monte-Carlo estimate of the reach-avoid probability from `x0` under
/// `policy`. Trial `k` draws its noise from `rng.derive(k)`; rollouts stop as
/// soon as the outcome is decided.
#[allow(clippy::too_many_arguments)]
pub fn mc_safety<F>(
    sys: &SystemSpec,
    policy: F,
    x0: &[f64],
    safe: &Tube,
    target: &Tube,
    horizon: usize,
    problem: Problem,
    trials: usize,
    rng: &SeededRng,
) -> Result<McReport>
where
    F: Fn(usize, &[f64]) -> Result<Point> + Sync,
{
    if trials == 0 {
        return Err(Error::InvalidParameter("trial count must be at least 1".into()));
    }
    if horizon == 0 {
        return Err(Error::InvalidParameter("horizon must be at least 1".into()));
    }
    safe.check(horizon, sys.state_dim())?;
    target.check(horizon, sys.state_dim())?;
    Error::check_dim(sys.state_dim(), x0.len())?;
    let outcomes: Vec<bool> = (0..trials as u64)
        .into_par_iter()
        .map(|k| {
            let mut r = rng.derive(k);
            let mut x = x0.to_vec();
            for t in 0..horizon {
                match problem {
                    Problem::Tht if !safe.at(t).contains(&x) => return Ok(false),
                    Problem::Fht if target.at(t).contains(&x) => return Ok(true),
                    Problem::Fht if !safe.at(t).contains(&x) => return Ok(false),
                    _ => {}
                }
                let u = policy(t, &x)?;
                x = sys.step(&x, &u, &mut r)?;
            }
            Ok(target.at(horizon).contains(&x))
        })
        .collect::<Result<_>>()?;
    let successes = outcomes.iter().filter(|&&s| s).count();
    Ok(McReport::from_counts(successes, trials))
}

/// `A x + B u`, the exact conditional mean of a linear-Gaussian system.
pub fn linear_gaussian_mean(sys: &SystemSpec, x: &[f64], u: &[f64]) -> Result<Point> {
    if sys.linear_parts().is_none() {
        return Err(Error::InvalidParameter(format!(
            "system `{}` is not linear",
            sys.name()
        )));
    }
    sys.nominal_step(x, u)
}
