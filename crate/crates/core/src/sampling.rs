//! Seeded sample generators: boxes, transition samples, trajectory samples
//! and finite action grids.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embedding::TransitionSample;
use crate::systems::{simulate, SystemSpec, Trajectory};
use crate::{Error, Point, Result};

/// Closed axis-aligned box `[lower, upper]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperRect {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl HyperRect {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        Error::check_dim(lower.len(), upper.len())?;
        if lower.is_empty() {
            return Err(Error::Empty("box bounds"));
        }
        for (i, (l, u)) in lower.iter().zip(&upper).enumerate() {
            if !(l <= u) || !l.is_finite() || !u.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "box dimension {i}: lower {l} must not exceed upper {u}"
                )));
            }
        }
        Ok(HyperRect { lower, upper })
    }

    /// `[lo, hi]^dim`.
    pub fn cube(lo: f64, hi: f64, dim: usize) -> Result<Self> {
        Self::new(vec![lo; dim], vec![hi; dim])
    }

    /// The whole space; every point is contained.
    pub fn unbounded(dim: usize) -> Self {
        HyperRect {
            lower: vec![f64::NEG_INFINITY; dim],
            upper: vec![f64::INFINITY; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (l, u))| l <= v && v <= u)
    }

    pub fn midpoint(&self) -> Point {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| 0.5 * (l + u))
            .collect()
    }

    /// Uniform draw; degenerate dimensions return the bound exactly.
    pub fn sample(&self, rng: &mut SeededRng) -> Point {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(&l, &u)| if l == u { l } else { rng.random_range(l..u) })
            .collect()
    }
}

/// Finite set of admissible actions.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionGrid {
    actions: Vec<Point>,
}

impl ActionGrid {
    pub fn new(actions: Vec<Point>) -> Result<Self> {
        if actions.is_empty() {
            return Err(Error::Empty("action grid"));
        }
        let m = actions[0].len();
        for a in &actions {
            Error::check_dim(m, a.len())?;
            if a.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("action grid entry".into()));
            }
        }
        Ok(ActionGrid { actions })
    }

    pub fn actions(&self) -> &[Point] {
        &self.actions
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.actions[0].len()
    }

    pub fn get(&self, j: usize) -> &[f64] {
        &self.actions[j]
    }
}

/// ChaCha8 generator addressed by `(seed, stream)`.
#[derive(Debug, Clone)]
pub struct SeededRng {
    seed: u64,
    stream: u64,
    inner: ChaCha8Rng,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        SeededRng {
            seed,
            stream,
            inner,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Independent generator for task `index`, a pure function of
    /// `(seed, stream, index)` and unaffected by how much of `self` has been
    /// consumed.
    pub fn derive(&self, index: u64) -> SeededRng {
        SeededRng::with_stream(splitmix64(self.seed ^ splitmix64(self.stream)), index)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RngCore for SeededRng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

/// `count` i.i.d. uniform points in `bounds`.
pub fn uniform_box(bounds: &HyperRect, count: usize, rng: &mut SeededRng) -> Vec<Point> {
    (0..count).map(|_| bounds.sample(rng)).collect()
}

/// One-step transition sample: `x ~ U(state_box)`, `u ~ U(action_box)`,
/// `y = step(x, u)`.
pub fn draw_transitions(
    sys: &SystemSpec,
    state_box: &HyperRect,
    action_box: &HyperRect,
    count: usize,
    rng: &mut SeededRng,
) -> Result<TransitionSample> {
    if count == 0 {
        return Err(Error::Empty("transition sample size"));
    }
    Error::check_dim(sys.state_dim(), state_box.dim())?;
    Error::check_dim(sys.action_dim(), action_box.dim())?;
    let mut xs = Vec::with_capacity(count);
    let mut us = Vec::with_capacity(count);
    let mut ys = Vec::with_capacity(count);
    for _ in 0..count {
        let x = state_box.sample(rng);
        let u = action_box.sample(rng);
        let y = sys.step(&x, &u, rng)?;
        xs.push(x);
        us.push(u);
        ys.push(y);
    }
    TransitionSample::new(xs, us, ys)
}

/// `count` independent closed-loop rollouts of length `horizon` from uniform
/// initial states. Rollout `i` uses `rng.derive(i)`, so the result does not
/// depend on scheduling.
pub fn draw_trajectories<F>(
    sys: &SystemSpec,
    init_box: &HyperRect,
    policy: F,
    horizon: usize,
    count: usize,
    rng: &SeededRng,
) -> Result<Vec<Trajectory>>
where
    F: Fn(usize, &[f64]) -> Result<Point> + Sync,
{
    if horizon == 0 || count == 0 {
        return Err(Error::InvalidParameter(
            "trajectory horizon and count must be at least 1".into(),
        ));
    }
    Error::check_dim(sys.state_dim(), init_box.dim())?;
    (0..count as u64)
        .into_par_iter()
        .map(|i| {
            let mut r = rng.derive(i);
            let x0 = init_box.sample(&mut r);
            simulate(sys, &x0, &policy, horizon, &mut r)
        })
        .collect()
}

/// Cartesian grid with `per_dim` evenly spaced values per dimension,
/// endpoints included; `per_dim = 1` gives the midpoint. The first dimension
/// varies slowest.
pub fn grid_actions(action_box: &HyperRect, per_dim: usize) -> Result<ActionGrid> {
    if per_dim == 0 {
        return Err(Error::InvalidParameter("per_dim must be at least 1".into()));
    }
    let axes: Vec<Vec<f64>> = action_box
        .lower()
        .iter()
        .zip(action_box.upper())
        .map(|(&l, &u)| linspace(l, u, per_dim))
        .collect();
    ActionGrid::new(cartesian(&axes))
}

/// `n` evenly spaced values from `lo` to `hi` inclusive (the midpoint if
/// `n = 1`).
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.5 * (lo + hi)];
    }
    let step = (hi - lo) / (n - 1) as f64;
    (0..n)
        .map(|i| if i == n - 1 { hi } else { lo + step * i as f64 })
        .collect()
}

/// Cartesian product of `axes`, first axis varying slowest.
pub fn cartesian(axes: &[Vec<f64>]) -> Vec<Point> {
    let mut out: Vec<Point> = vec![Vec::with_capacity(axes.len())];
    for axis in axes {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                axis.iter().map(move |&v| {
                    let mut p = prefix.clone();
                    p.push(v);
                    p
                })
            })
            .collect();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::{make_system, SystemParams};

    #[test]
    fn box_validation() {
        assert!(HyperRect::new(vec![1.0], vec![0.0]).is_err());
        assert!(HyperRect::new(vec![0.0], vec![0.0, 1.0]).is_err());
        assert!(HyperRect::new(vec![], vec![]).is_err());
        assert!(HyperRect::new(vec![2.0], vec![2.0]).is_ok());
    }

    #[test]
    fn uniform_edge_cases() {
        let mut rng = SeededRng::new(1);
        let b = HyperRect::cube(0.0, 1.0, 2).unwrap();
        assert!(uniform_box(&b, 0, &mut rng).is_empty());
        let d = HyperRect::new(vec![2.0], vec![2.0]).unwrap();
        assert!(uniform_box(&d, 20, &mut rng).iter().all(|p| p[0] == 2.0));
    }

    #[test]
    fn uniform_mean_and_ks() {
        let mut rng = SeededRng::new(42);
        let b = HyperRect::cube(0.0, 1.0, 2).unwrap();
        let pts = uniform_box(&b, 10_000, &mut rng);
        for d in 0..2 {
            let mean = pts.iter().map(|p| p[d]).sum::<f64>() / pts.len() as f64;
            assert!((mean - 0.5).abs() < 0.02);
            let mut v: Vec<f64> = pts.iter().map(|p| p[d]).collect();
            v.sort_by(f64::total_cmp);
            let n = v.len() as f64;
            let ks = v
                .iter()
                .enumerate()
                .map(|(i, x)| ((i + 1) as f64 / n - x).abs().max((x - i as f64 / n).abs()))
                .fold(0.0, f64::max);
            assert!(ks <= 0.02, "ks {ks}");
        }
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let mut a = SeededRng::with_stream(7, 3);
        let mut b = SeededRng::with_stream(7, 3);
        let mut c = SeededRng::with_stream(7, 4);
        let va: Vec<u64> = (0..4).map(|_| a.next_u64()).collect();
        let vb: Vec<u64> = (0..4).map(|_| b.next_u64()).collect();
        let vc: Vec<u64> = (0..4).map(|_| c.next_u64()).collect();
        assert_eq!(va, vb);
        assert_ne!(va, vc);
        let mut used = SeededRng::new(9);
        used.next_u64();
        let mut d1 = used.derive(2);
        let mut d2 = SeededRng::new(9).derive(2);
        assert_eq!(d1.next_u64(), d2.next_u64());
    }

    #[test]
    fn grids() {
        let g = grid_actions(&HyperRect::cube(-1.0, 1.0, 1).unwrap(), 3).unwrap();
        assert_eq!(g.actions(), &[vec![-1.0], vec![0.0], vec![1.0]]);

        let g = grid_actions(&HyperRect::cube(-0.1, 0.1, 2).unwrap(), 2).unwrap();
        assert_eq!(g.len(), 4);
        for corner in [[-0.1, -0.1], [-0.1, 0.1], [0.1, -0.1], [0.1, 0.1]] {
            assert!(g.actions().iter().any(|a| a[..] == corner[..]));
        }

        let b = HyperRect::new(vec![0.1, -10.0], vec![1.0, 10.0]).unwrap();
        let g = grid_actions(&b, 1).unwrap();
        assert_eq!(g.actions(), &[vec![0.55, 0.0]]);
        assert_eq!(grid_actions(&b, 5).unwrap().len(), 25);
        assert!(grid_actions(&b, 0).is_err());
    }

    #[test]
    fn transitions_follow_the_system() {
        let mut params = SystemParams::new();
        params.insert("noise_variance".into(), 0.0);
        let sys = make_system("integrator", &params).unwrap();
        let sb = HyperRect::cube(-1.1, 1.1, 2).unwrap();
        let ab = HyperRect::cube(-1.0, 1.0, 1).unwrap();
        let s = draw_transitions(&sys, &sb, &ab, 50, &mut SeededRng::new(3)).unwrap();
        for ((x, u), y) in s.states().iter().zip(s.actions()).zip(s.successors()) {
            assert_eq!(y[0], x[0] + 0.25 * x[1] + 0.03125 * u[0]);
            assert_eq!(y[1], x[1] + 0.25 * u[0]);
            assert!(sb.contains(x) && ab.contains(u));
        }
        let again = draw_transitions(&sys, &sb, &ab, 50, &mut SeededRng::new(3)).unwrap();
        assert_eq!(s, again);
        let one = draw_transitions(&sys, &sb, &ab, 1, &mut SeededRng::new(3)).unwrap();
        assert_eq!(one.len(), 1);
        assert!(draw_transitions(&sys, &sb, &ab, 0, &mut SeededRng::new(3)).is_err());
    }

    #[test]
    fn trajectories_are_independent() {
        let sys = make_system("integrator", &SystemParams::new()).unwrap();
        let b = HyperRect::cube(0.0, 0.0, 2).unwrap();
        let zero = |_: usize, _: &[f64]| Ok(vec![0.0]);
        let rng = SeededRng::new(5);
        let t = draw_trajectories(&sys, &b, zero, 3, 2, &rng).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t[0].states.len(), 4);
        assert_ne!(t[0].states[1], t[1].states[1]);
        assert_eq!(t, draw_trajectories(&sys, &b, zero, 3, 2, &rng).unwrap());
        let single = draw_trajectories(&sys, &b, zero, 1, 1, &rng).unwrap();
        assert_eq!(single[0].states.len(), 2);
    }
}
