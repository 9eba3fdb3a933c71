//! Kernel-based stochastic optimal control over a finite action grid.
//!
//! With costs split as `f(x, u) = f^x(x) + f^u(u)` and a policy supported on
//! the grid `{u_j}`, the expected cost of mixing actions with weights `g` is
//! linear in `g`:
//!
//! ```text
//! sum_j g_j (f^x^T beta(x, u_j) + f^u(u_j))
//! ```
//!
//! so each decision is a linear program over the probability simplex (see
//! [`crate::lp`]). The forward controller minimizes the next-step cost; the
//! backward controller first builds cost-to-go tables at the sample
//! successors by dynamic programming and adds them to the next-step cost.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::embedding::Embedding;
use crate::lp::{solve_lp, LpOutcome, SimplexLP};
use crate::sampling::{ActionGrid, SeededRng};
use crate::{Error, Point, Result};

type CostFn = Arc<dyn Fn(usize, &[f64]) -> f64 + Send + Sync>;

/// One decomposed cost term `f(t, x, u) = f^x(t, x) + f^u(t, u)`.
#[derive(Clone)]
pub struct StageCost {
    state: CostFn,
    action: CostFn,
}

impl fmt::Debug for StageCost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("StageCost { .. }")
    }
}

impl StageCost {
    pub fn new<S, A>(state: S, action: A) -> Self
    where
        S: Fn(usize, &[f64]) -> f64 + Send + Sync + 'static,
        A: Fn(usize, &[f64]) -> f64 + Send + Sync + 'static,
    {
        StageCost {
            state: Arc::new(state),
            action: Arc::new(action),
        }
    }

    pub fn state_only<S>(state: S) -> Self
    where
        S: Fn(usize, &[f64]) -> f64 + Send + Sync + 'static,
    {
        Self::new(state, |_, _| 0.0)
    }

    pub fn state_cost(&self, t: usize, x: &[f64]) -> f64 {
        (self.state)(t, x)
    }

    pub fn action_cost(&self, t: usize, u: &[f64]) -> f64 {
        (self.action)(t, u)
    }

    /// Multiplies both parts by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let s = self.state.clone();
        let a = self.action.clone();
        Self::new(move |t, x| factor * s(t, x), move |t, u| factor * a(t, u))
    }
}

/// Objective plus constraints `E[f_i] <= 0`.
#[derive(Debug, Clone)]
pub struct CostSpec {
    pub objective: StageCost,
    pub constraints: Vec<StageCost>,
}

impl CostSpec {
    pub fn new(objective: StageCost) -> Self {
        CostSpec {
            objective,
            constraints: Vec::new(),
        }
    }

    pub fn with_constraint(mut self, c: StageCost) -> Self {
        self.constraints.push(c);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Forward,
    Backward,
}

/// Outcome of one decision: the chosen grid index, the LP weights and the
/// LP data they solve.
#[derive(Debug, Clone)]
pub struct Decision {
    pub index: usize,
    pub gamma: Vec<f64>,
    pub lp: SimplexLP,
}

/// Coefficient row `v_j = fvals_x^T beta(x, u_j) + fu_vals[j]`.
pub fn stage_matrices(
    emb: &Embedding,
    actions: &ActionGrid,
    fvals_x: &DVector<f64>,
    fu_vals: &[f64],
    x: &[f64],
) -> Result<DVector<f64>> {
    Error::check_dim(actions.len(), fu_vals.len())?;
    let w = emb.dual_weights(fvals_x)?;
    let lu = emb.action_cross_gram(actions.actions())?;
    stage_row(emb, &w, &lu, fu_vals, x)
}

fn stage_row(
    emb: &Embedding,
    weights: &DVector<f64>,
    action_gram: &DMatrix<f64>,
    fu_vals: &[f64],
    x: &[f64],
) -> Result<DVector<f64>> {
    let kx = emb.state_cross_gram(&[x])?;
    let e = Embedding::contract(weights, &kx, action_gram);
    Ok(DVector::from_iterator(
        fu_vals.len(),
        e.row(0).iter().zip(fu_vals).map(|(a, b)| a + b),
    ))
}

#[derive(Debug, Clone)]
pub struct Controller {
    emb: Arc<Embedding>,
    actions: ActionGrid,
    costs: CostSpec,
    mode: Mode,
    horizon: Option<usize>,
    // tables[t][i]: cost-to-go from successor y_i at stage t; tables[N] = 0
    tables: Vec<DVector<f64>>,
    action_gram: DMatrix<f64>,
}

impl Controller {
    /// Greedy controller minimizing the expected next-step cost.
    pub fn forward(emb: impl Into<Arc<Embedding>>, actions: ActionGrid, costs: CostSpec) -> Result<Self> {
        let emb = emb.into();
        Error::check_dim(emb.sample().action_dim(), actions.dim())?;
        let action_gram = emb.action_cross_gram(actions.actions())?;
        Ok(Controller {
            emb,
            actions,
            costs,
            mode: Mode::Forward,
            horizon: None,
            tables: Vec::new(),
            action_gram,
        })
    }

    /// Dynamic-programming controller over `horizon` stages.
    ///
    /// `Z_N = 0` and, for `t = N-1, ..., 0`,
    /// `Z_t[i] = min_j f^u(t, u_j) + (f^x(t+1, .) + Z_{t+1})^T beta(y_i, u_j)`,
    /// the minimum taken over actions whose constraint expectations are all
    /// non-positive at `y_i` (or, if there are none, the least violating one).
    pub fn backward(
        emb: impl Into<Arc<Embedding>>,
        actions: ActionGrid,
        costs: CostSpec,
        horizon: usize,
    ) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::InvalidParameter("horizon must be at least 1".into()));
        }
        let mut ctrl = Self::forward(emb, actions, costs)?;
        ctrl.mode = Mode::Backward;
        ctrl.horizon = Some(horizon);

        let emb = ctrl.emb.clone();
        let m = emb.len();
        let ys = emb.sample().successors();
        let yy = emb.state_cross_gram(ys)?;
        let p = ctrl.actions.len();
        let mut tables = vec![DVector::zeros(m); horizon + 1];
        for t in (0..horizon).rev() {
            let next = &tables[t + 1];
            let g = ctrl.state_values(&ctrl.costs.objective, t + 1)? + next;
            let cost = Embedding::contract(&emb.dual_weights(&g)?, &yy, &ctrl.action_gram);
            let fu = ctrl.action_values(&ctrl.costs.objective, t)?;
            let mut cons = Vec::with_capacity(ctrl.costs.constraints.len());
            for c in &ctrl.costs.constraints {
                let fx = ctrl.state_values(c, t + 1)?;
                let e = Embedding::contract(&emb.dual_weights(&fx)?, &yy, &ctrl.action_gram);
                cons.push((e, ctrl.action_values(c, t)?));
            }
            let mut z = DVector::zeros(m);
            for i in 0..m {
                let violation = |j: usize| {
                    cons.iter()
                        .map(|(e, fu)| e[(i, j)] + fu[j])
                        .fold(f64::NEG_INFINITY, f64::max)
                };
                let admissible: Vec<usize> = (0..p).filter(|&j| violation(j) <= 0.0).collect();
                let candidates = if admissible.is_empty() {
                    let best = (0..p)
                        .min_by(|&a, &b| violation(a).total_cmp(&violation(b)))
                        .unwrap_or(0);
                    vec![best]
                } else {
                    admissible
                };
                let v = candidates
                    .iter()
                    .map(|&j| fu[j] + cost[(i, j)])
                    .fold(f64::INFINITY, f64::min);
                if !v.is_finite() {
                    return Err(Error::NonFinite(format!(
                        "cost-to-go at stage {t}, point {i}"
                    )));
                }
                z[i] = v;
            }
            tables[t] = z;
        }
        ctrl.tables = tables;
        Ok(ctrl)
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn horizon(&self) -> Option<usize> {
        self.horizon
    }

    pub fn actions(&self) -> &ActionGrid {
        &self.actions
    }

    pub fn embedding(&self) -> &Embedding {
        &self.emb
    }

    /// Cost-to-go table `Z_t` (backward mode only).
    pub fn table(&self, t: usize) -> Option<&DVector<f64>> {
        self.tables.get(t)
    }

    fn state_values(&self, cost: &StageCost, t: usize) -> Result<DVector<f64>> {
        let v = self.emb.sample().map_successors(|y| cost.state_cost(t, y));
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!("state cost at stage {t}")));
        }
        Ok(v)
    }

    fn action_values(&self, cost: &StageCost, t: usize) -> Result<Vec<f64>> {
        let v: Vec<f64> = self
            .actions
            .actions()
            .iter()
            .map(|u| cost.action_cost(t, u))
            .collect();
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!("action cost at stage {t}")));
        }
        Ok(v)
    }

    /// The LP posed at state `x`, stage `t`.
    pub fn program(&self, x: &[f64], t: usize) -> Result<SimplexLP> {
        let mut g = self.state_values(&self.costs.objective, t + 1)?;
        if self.mode == Mode::Backward {
            let n = self.horizon.unwrap_or(0);
            if t >= n {
                return Err(Error::InvalidParameter(format!("stage {t} outside 0..{n}")));
            }
            g += &self.tables[t + 1];
        }
        let c = stage_row(
            &self.emb,
            &self.emb.dual_weights(&g)?,
            &self.action_gram,
            &self.action_values(&self.costs.objective, t)?,
            x,
        )?;
        let mut rows = Vec::with_capacity(self.costs.constraints.len());
        for con in &self.costs.constraints {
            let fx = self.state_values(con, t + 1)?;
            let r = stage_row(
                &self.emb,
                &self.emb.dual_weights(&fx)?,
                &self.action_gram,
                &self.action_values(con, t)?,
                x,
            )?;
            rows.push(r.iter().copied().collect());
        }
        SimplexLP::new(c.iter().copied().collect(), rows)
    }

    /// Solves the decision LP and picks the action with the largest weight
    /// (lowest index on ties).
    pub fn decide(&self, x: &[f64], t: usize) -> Result<Decision> {
        let lp = self.program(x, t)?;
        match solve_lp(&lp)? {
            LpOutcome::Optimal { gamma, .. } => {
                let mut index = 0;
                for (j, &g) in gamma.iter().enumerate() {
                    if g > gamma[index] {
                        index = j;
                    }
                }
                Ok(Decision { index, gamma, lp })
            }
            LpOutcome::Infeasible { violated } => Err(Error::Infeasible { violated }),
        }
    }

    pub fn act(&self, x: &[f64], t: usize) -> Result<Point> {
        let d = self.decide(x, t)?;
        Ok(self.actions.get(d.index).to_vec())
    }

    /// Draws the action from the LP weights instead of taking the argmax.
    pub fn act_sampled(&self, x: &[f64], t: usize, rng: &mut SeededRng) -> Result<Point> {
        let d = self.decide(x, t)?;
        let r: f64 = rng.random();
        let mut acc = 0.0;
        let mut pick = d.index;
        for (j, &g) in d.gamma.iter().enumerate() {
            acc += g.max(0.0);
            if r < acc {
                pick = j;
                break;
            }
        }
        Ok(self.actions.get(pick).to_vec())
    }
}

/// Action of a forward controller.
pub fn act_forward(ctrl: &Controller, x: &[f64], t: usize) -> Result<Point> {
    if ctrl.mode() != Mode::Forward {
        return Err(Error::InvalidParameter("controller is not in forward mode".into()));
    }
    ctrl.act(x, t)
}

/// Action of a backward controller, `0 <= t < N`.
pub fn act_backward(ctrl: &Controller, x: &[f64], t: usize) -> Result<Point> {
    if ctrl.mode() != Mode::Backward {
        return Err(Error::InvalidParameter("controller is not in backward mode".into()));
    }
    ctrl.act(x, t)
}

/// Free-function form of [`Controller::backward`].
pub fn fit_backward(
    emb: impl Into<Arc<Embedding>>,
    actions: ActionGrid,
    costs: CostSpec,
    horizon: usize,
) -> Result<Controller> {
    Controller::backward(emb, actions, costs, horizon)
}
