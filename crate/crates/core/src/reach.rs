//! Stochastic reachability from data.
//!
//! Backward recursion (terminal- and first-hitting time) on value tables kept
//! at the sample successors `y_i`; the expectation of the next-stage table is
//! the embedding estimate `V_{t+1}^T beta(y_i, u_j)`, and the supremum over
//! policies is a maximum over the action grid.
//!
//! Forward reachable sets are estimated as level sets of a kernel regression
//! with the (separating) Abel kernel, one classifier per time step.

use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::embedding::Embedding;
use crate::kernels::KernelSpec;
use crate::linalg::Cholesky;
use crate::sampling::{ActionGrid, HyperRect};
use crate::systems::Trajectory;
use crate::{Error, Point, Result};

/// Points per block when evaluating at query points.
pub const DEFAULT_CHUNK: usize = 512;

/// Time-indexed boxes, `sets[t]` for `t = 0..=N`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tube {
    sets: Vec<HyperRect>,
}

impl Tube {
    pub fn new(sets: Vec<HyperRect>) -> Result<Self> {
        if sets.is_empty() {
            return Err(Error::Empty("tube"));
        }
        let dim = sets[0].dim();
        for s in &sets {
            Error::check_dim(dim, s.dim())?;
        }
        Ok(Tube { sets })
    }

    /// The same box at every `t = 0..=horizon`.
    pub fn constant(set: HyperRect, horizon: usize) -> Self {
        Tube {
            sets: vec![set; horizon + 1],
        }
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.sets[0].dim()
    }

    pub fn at(&self, t: usize) -> &HyperRect {
        &self.sets[t]
    }

    pub(crate) fn check(&self, horizon: usize, dim: usize) -> Result<()> {
        if self.sets.len() < horizon + 1 {
            return Err(Error::InvalidParameter(format!(
                "tube has {} sets, horizon {horizon} needs {}",
                self.sets.len(),
                horizon + 1
            )));
        }
        Error::check_dim(dim, self.dim())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Problem {
    /// Stay in the safe set for `t < N` and be in the target at `t = N`.
    #[serde(rename = "THT")]
    Tht,
    /// Reach the target at some `t <= N`, safe until then.
    #[serde(rename = "FHT")]
    Fht,
}

impl FromStr for Problem {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "THT" => Ok(Problem::Tht),
            "FHT" => Ok(Problem::Fht),
            _ => Err(Error::InvalidParameter(format!(
                "unknown reachability problem `{s}` (THT or FHT)"
            ))),
        }
    }
}

/// `1` on the closed box, `0` elsewhere.
pub fn indicator(set: &HyperRect, x: &[f64]) -> f64 {
    if set.contains(x) {
        1.0
    } else {
        0.0
    }
}

/// Fitted safety-probability model.
#[derive(Debug, Clone)]
pub struct SRModel {
    emb: Arc<Embedding>,
    actions: ActionGrid,
    safe: Tube,
    target: Tube,
    horizon: usize,
    problem: Problem,
    // tables[t][i]: value at successor y_i, t = 0..=N
    tables: Vec<DVector<f64>>,
    // weights[t] = (G + lambda M I)^-1 tables[t]; weights[0] is unused
    weights: Vec<DVector<f64>>,
    action_gram: DMatrix<f64>,
    chunk: usize,
}

impl SRModel {
    pub fn fit(
        emb: impl Into<Arc<Embedding>>,
        actions: ActionGrid,
        safe: Tube,
        target: Tube,
        horizon: usize,
        problem: Problem,
    ) -> Result<Self> {
        Self::fit_chunked(emb, actions, safe, target, horizon, problem, DEFAULT_CHUNK)
    }

    /// As [`SRModel::fit`]; `max_chunk` bounds the query block size used by
    /// [`SRModel::predict`].
    pub fn fit_chunked(
        emb: impl Into<Arc<Embedding>>,
        actions: ActionGrid,
        safe: Tube,
        target: Tube,
        horizon: usize,
        problem: Problem,
        max_chunk: usize,
    ) -> Result<Self> {
        let emb = emb.into();
        if horizon == 0 {
            return Err(Error::InvalidParameter("horizon must be at least 1".into()));
        }
        if max_chunk == 0 {
            return Err(Error::InvalidParameter("max_chunk must be at least 1".into()));
        }
        let n = emb.sample().state_dim();
        safe.check(horizon, n)?;
        target.check(horizon, n)?;
        Error::check_dim(emb.sample().action_dim(), actions.dim())?;

        let ys = emb.sample().successors();
        let state_gram = emb.state_cross_gram(ys)?;
        let action_gram = emb.action_cross_gram(actions.actions())?;

        let m = emb.len();
        let mut tables = vec![DVector::zeros(m); horizon + 1];
        let mut weights = vec![DVector::zeros(m); horizon + 1];
        tables[horizon] = DVector::from_iterator(m, ys.iter().map(|y| indicator(target.at(horizon), y)));
        for t in (0..horizon).rev() {
            weights[t + 1] = emb.dual_weights(&tables[t + 1])?;
            let expect = Embedding::contract(&weights[t + 1], &state_gram, &action_gram);
            let mut v = DVector::zeros(m);
            for (i, y) in ys.iter().enumerate() {
                let best = row_max(&expect, i);
                if !best.is_finite() {
                    return Err(Error::NonFinite(format!("value at stage {t}, point {i}")));
                }
                v[i] = combine(problem, safe.at(t), target.at(t), y, best);
            }
            tables[t] = v;
        }
        Ok(SRModel {
            emb,
            actions,
            safe,
            target,
            horizon,
            problem,
            tables,
            weights,
            action_gram,
            chunk: max_chunk,
        })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn problem(&self) -> Problem {
        self.problem
    }

    pub fn embedding(&self) -> &Embedding {
        &self.emb
    }

    pub fn actions(&self) -> &ActionGrid {
        &self.actions
    }

    pub fn safe(&self) -> &Tube {
        &self.safe
    }

    pub fn target(&self) -> &Tube {
        &self.target
    }

    /// Value table at stage `t`, one entry per sample successor.
    pub fn table(&self, t: usize) -> &DVector<f64> {
        &self.tables[t]
    }

    /// Estimated value at stage `t < N` for arbitrary states.
    pub fn evaluate(&self, t: usize, points: &[Point]) -> Result<Vec<f64>> {
        if t >= self.horizon {
            return Err(Error::InvalidParameter(format!(
                "stage {t} outside 0..{}",
                self.horizon
            )));
        }
        let mut out = Vec::with_capacity(points.len());
        for chunk in points.chunks(self.chunk) {
            let kx = self.emb.state_cross_gram(chunk)?;
            let expect = Embedding::contract(&self.weights[t + 1], &kx, &self.action_gram);
            for (q, x) in chunk.iter().enumerate() {
                let best = row_max(&expect, q);
                out.push(combine(self.problem, self.safe.at(t), self.target.at(t), x, best));
            }
        }
        Ok(out)
    }

    /// Safety probabilities `V_0` at the query points, each in `[0, 1]`.
    pub fn predict(&self, points: &[Point]) -> Result<Vec<f64>> {
        self.evaluate(0, points)
    }

    /// Index of the action maximizing the estimated next-stage value at `x`
    /// (lowest index on ties).
    pub fn greedy_index(&self, t: usize, x: &[f64]) -> Result<usize> {
        if t >= self.horizon {
            return Err(Error::InvalidParameter(format!(
                "stage {t} outside 0..{}",
                self.horizon
            )));
        }
        let kx = self.emb.state_cross_gram(&[x])?;
        let expect = Embedding::contract(&self.weights[t + 1], &kx, &self.action_gram);
        Ok(row_argmax(&expect, 0))
    }

    /// The greedy policy extracted from the value tables.
    pub fn greedy_action(&self, t: usize, x: &[f64]) -> Result<Point> {
        Ok(self.actions.get(self.greedy_index(t, x)?).to_vec())
    }
}

/// Free-function form of [`SRModel::fit`].
pub fn fit_sr(
    emb: impl Into<Arc<Embedding>>,
    actions: ActionGrid,
    safe: Tube,
    target: Tube,
    horizon: usize,
    problem: Problem,
) -> Result<SRModel> {
    SRModel::fit(emb, actions, safe, target, horizon, problem)
}

/// Free-function form of [`SRModel::predict`].
pub fn predict_safety(model: &SRModel, points: &[Point]) -> Result<Vec<f64>> {
    model.predict(points)
}

fn combine(problem: Problem, safe: &HyperRect, target: &HyperRect, x: &[f64], best: f64) -> f64 {
    let cont = best.clamp(0.0, 1.0);
    match problem {
        Problem::Tht => indicator(safe, x) * cont,
        Problem::Fht => {
            if target.contains(x) {
                1.0
            } else {
                indicator(safe, x) * cont
            }
        }
    }
}

fn row_max(m: &DMatrix<f64>, r: usize) -> f64 {
    m.row(r).iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

fn row_argmax(m: &DMatrix<f64>, r: usize) -> usize {
    let mut best = 0;
    for (j, &v) in m.row(r).iter().enumerate() {
        if v > m[(r, best)] {
            best = j;
        }
    }
    best
}

/// Support estimate `{x : F(x) >= 1 - tau}` with
/// `F(x) = kappa(x)^T (K + lambda M I)^-1 1` under the Abel kernel and
/// `tau = 1 - min_i F(x_i)`.
#[derive(Debug, Clone)]
pub struct SupportClassifier {
    points: Vec<Point>,
    kernel: KernelSpec,
    lambda: f64,
    alpha: DVector<f64>,
    // min_i F(x_i) = 1 - tau, kept directly so training points pass exactly
    level: f64,
}

impl SupportClassifier {
    pub fn fit(points: Vec<Point>, sigma: f64, lambda: f64) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Empty("support sample"));
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "regularization must be positive, got {lambda}"
            )));
        }
        let kernel = KernelSpec::abel(sigma)?;
        let mut k = kernel.gram(&points, &points)?;
        let m = points.len();
        let trace = k.trace();
        for i in 0..m {
            k[(i, i)] += lambda * m as f64;
        }
        let chol = match Cholesky::factor(&k) {
            Ok(c) => c,
            Err(Error::NotPositiveDefinite { .. }) => {
                for i in 0..m {
                    k[(i, i)] += 1e-10 * trace / m as f64;
                }
                Cholesky::factor(&k)?
            }
            Err(e) => return Err(e),
        };
        let alpha = chol.solve_vec(&DVector::from_element(m, 1.0));
        let mut cls = SupportClassifier {
            points,
            kernel,
            lambda,
            alpha,
            level: 0.0,
        };
        let min_score = cls
            .points
            .iter()
            .map(|x| cls.score_unchecked(x))
            .fold(f64::INFINITY, f64::min);
        cls.level = min_score;
        Ok(cls)
    }

    fn score_unchecked(&self, x: &[f64]) -> f64 {
        self.points
            .iter()
            .zip(self.alpha.iter())
            .map(|(p, a)| self.kernel.eval_unchecked(p, x) * a)
            .sum()
    }

    /// `F(x)`.
    pub fn score(&self, x: &[f64]) -> Result<f64> {
        Error::check_dim(self.points[0].len(), x.len())?;
        Ok(self.score_unchecked(x))
    }

    /// `(F(x), F(x) >= 1 - tau)`.
    pub fn classify(&self, x: &[f64]) -> Result<(f64, bool)> {
        let s = self.score(x)?;
        Ok((s, s >= self.level))
    }

    pub fn tau(&self) -> f64 {
        1.0 - self.level
    }

    /// `1 - tau`.
    pub fn threshold(&self) -> f64 {
        self.level
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn alpha(&self) -> &DVector<f64> {
        &self.alpha
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }
}

/// Free-function form of [`SupportClassifier::fit`].
pub fn fit_support(points: Vec<Point>, sigma: f64, lambda: f64) -> Result<SupportClassifier> {
    SupportClassifier::fit(points, sigma, lambda)
}

/// Free-function form of [`SupportClassifier::classify`].
pub fn classify(cls: &SupportClassifier, x: &[f64]) -> Result<(f64, bool)> {
    cls.classify(x)
}

/// One classifier per time step, each fitted on the states all trajectories
/// occupy at that step.
pub fn fit_forward_reach(
    trajectories: &[Trajectory],
    sigma: f64,
    lambda: f64,
) -> Result<Vec<SupportClassifier>> {
    if trajectories.is_empty() {
        return Err(Error::Empty("trajectory sample"));
    }
    let steps = trajectories[0].states.len();
    for tr in trajectories {
        Error::check_dim(steps, tr.states.len())?;
    }
    (0..steps)
        .map(|t| {
            let pts = trajectories.iter().map(|tr| tr.states[t].clone()).collect();
            SupportClassifier::fit(pts, sigma, lambda)
        })
        .collect()
}
