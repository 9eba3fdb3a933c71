//! Empirical conditional distribution embedding of a sampled transition
//! kernel.
//!
//! Given transitions `(x_i, u_i, y_i)`, the estimate is
//! `m(x, u) = sum_i beta_i(x, u) k(y_i, .)` with
//!
//! ```text
//! beta(x, u) = (G + lambda M I)^-1 z(x, u),   G = K_X ⊙ L_U,   z_i = k(x_i, x) l(u_i, u)
//! ```
//!
//! so the expectation of any `f` under `Q(. | x, u)` is approximated by
//! `f^T beta(x, u)` with `f_i = f(y_i)`. `G + lambda M I` is factored once at
//! fit time; nothing ever forms its inverse.
//!
//! Because the regularized Gram matrix is symmetric, `f^T beta(x, u)` also
//! equals `w^T z(x, u)` with `w = (G + lambda M I)^-1 f`. The batched
//! contractions ([`Embedding::expectation_table`]) use that form: one solve per
//! value vector instead of one per query.

use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::kernels::KernelSpec;
use crate::linalg::Cholesky;
use crate::{Error, Point, Result};

/// The i.i.d. transition triples every estimator consumes.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionSample {
    states: Vec<Point>,
    actions: Vec<Point>,
    successors: Vec<Point>,
}

impl TransitionSample {
    pub fn new(states: Vec<Point>, actions: Vec<Point>, successors: Vec<Point>) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::Empty("transition sample"));
        }
        Error::check_dim(states.len(), actions.len())?;
        Error::check_dim(states.len(), successors.len())?;
        let n = states[0].len();
        let m = actions[0].len();
        for (x, y) in states.iter().zip(&successors) {
            Error::check_dim(n, x.len())?;
            Error::check_dim(n, y.len())?;
        }
        for u in &actions {
            Error::check_dim(m, u.len())?;
        }
        Ok(TransitionSample {
            states,
            actions,
            successors,
        })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn state_dim(&self) -> usize {
        self.states[0].len()
    }

    pub fn action_dim(&self) -> usize {
        self.actions[0].len()
    }

    pub fn states(&self) -> &[Point] {
        &self.states
    }

    pub fn actions(&self) -> &[Point] {
        &self.actions
    }

    pub fn successors(&self) -> &[Point] {
        &self.successors
    }

    /// Evaluates `f` at every successor, giving the vector `f_i = f(y_i)`.
    pub fn map_successors(&self, mut f: impl FnMut(&[f64]) -> f64) -> DVector<f64> {
        DVector::from_iterator(self.len(), self.successors.iter().map(|y| f(y)))
    }
}

/// Regularization used when none is given: `1 / M`.
pub fn default_regularization(sample_size: usize) -> f64 {
    1.0 / sample_size.max(1) as f64
}

#[derive(Clone)]
pub struct Embedding {
    sample: TransitionSample,
    state_kernel: KernelSpec,
    action_kernel: KernelSpec,
    lambda: f64,
    jitter: f64,
    factor: Cholesky,
}

impl fmt::Debug for Embedding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Embedding")
            .field("samples", &self.sample.len())
            .field("state_kernel", &self.state_kernel)
            .field("action_kernel", &self.action_kernel)
            .field("lambda", &self.lambda)
            .field("jitter", &self.jitter)
            .finish()
    }
}

impl Embedding {
    /// Fits the embedding, factoring `K_X ⊙ L_U + lambda M I`.
    ///
    /// A failed factorization is retried once with `1e-10 trace(G) / M` added
    /// to the diagonal.
    pub fn fit(
        sample: TransitionSample,
        state_kernel: KernelSpec,
        action_kernel: KernelSpec,
        lambda: f64,
    ) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "regularization must be positive, got {lambda}"
            )));
        }
        let m = sample.len();
        let mut g = state_kernel.gram_unchecked(sample.states(), sample.states());
        let lu = action_kernel.gram_unchecked(sample.actions(), sample.actions());
        g.component_mul_assign(&lu);
        let trace = g.trace();
        let shift = lambda * m as f64;
        for i in 0..m {
            g[(i, i)] += shift;
        }
        let (factor, jitter) = match Cholesky::factor(&g) {
            Ok(c) => (c, 0.0),
            Err(Error::NotPositiveDefinite { .. }) => {
                let jitter = 1e-10 * trace / m as f64;
                for i in 0..m {
                    g[(i, i)] += jitter;
                }
                (Cholesky::factor(&g)?, jitter)
            }
            Err(e) => return Err(e),
        };
        Ok(Embedding {
            sample,
            state_kernel,
            action_kernel,
            lambda,
            jitter,
            factor,
        })
    }

    /// `lambda = 1/M` and the action kernel equal to the state kernel.
    pub fn fit_default(sample: TransitionSample, kernel: KernelSpec) -> Result<Self> {
        let lambda = default_regularization(sample.len());
        Self::fit(sample, kernel, kernel, lambda)
    }

    pub fn sample(&self) -> &TransitionSample {
        &self.sample
    }

    pub fn len(&self) -> usize {
        self.sample.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sample.is_empty()
    }

    pub fn state_kernel(&self) -> &KernelSpec {
        &self.state_kernel
    }

    pub fn action_kernel(&self) -> &KernelSpec {
        &self.action_kernel
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Extra diagonal added by the retry path; zero when the first
    /// factorization succeeded.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Lower-triangular Cholesky factor of the regularized Gram matrix.
    pub fn factor(&self) -> &DMatrix<f64> {
        self.factor.l()
    }

    /// The regularized Gram matrix `K_X ⊙ L_U + (lambda M + jitter) I`,
    /// rebuilt from the sample.
    pub fn regularized_gram(&self) -> DMatrix<f64> {
        let s = &self.sample;
        let mut g = self.state_kernel.gram_unchecked(s.states(), s.states());
        g.component_mul_assign(&self.action_kernel.gram_unchecked(s.actions(), s.actions()));
        let shift = self.lambda * s.len() as f64 + self.jitter;
        for i in 0..s.len() {
            g[(i, i)] += shift;
        }
        g
    }

    fn check_query(&self, x: &[f64], u: &[f64]) -> Result<()> {
        Error::check_dim(self.sample.state_dim(), x.len())?;
        Error::check_dim(self.sample.action_dim(), u.len())
    }

    /// `z_i = k(x_i, x) l(u_i, u)`.
    pub fn features(&self, x: &[f64], u: &[f64]) -> Result<DVector<f64>> {
        self.check_query(x, u)?;
        Ok(self.features_unchecked(x, u))
    }

    fn features_unchecked(&self, x: &[f64], u: &[f64]) -> DVector<f64> {
        let s = &self.sample;
        DVector::from_iterator(
            s.len(),
            s.states().iter().zip(s.actions()).map(|(xi, ui)| {
                self.state_kernel.eval_unchecked(xi, x) * self.action_kernel.eval_unchecked(ui, u)
            }),
        )
    }

    /// Weight vector `beta(x, u)`, length `M`.
    pub fn beta(&self, x: &[f64], u: &[f64]) -> Result<DVector<f64>> {
        let mut z = self.features(x, u)?;
        self.factor.solve_in_place(z.as_mut_slice());
        Ok(z)
    }

    /// `fvals^T beta(x, u)`, the estimate of `E[f(y) | x, u]`.
    pub fn expectation(&self, fvals: &DVector<f64>, x: &[f64], u: &[f64]) -> Result<f64> {
        Error::check_dim(self.len(), fvals.len())?;
        Ok(fvals.dot(&self.beta(x, u)?))
    }

    /// `beta` for every query as the columns of an `M x |queries|` matrix,
    /// processed `max_chunk` columns at a time.
    pub fn beta_batch<P: AsRef<[f64]>>(
        &self,
        queries: &[(P, P)],
        max_chunk: usize,
    ) -> Result<DMatrix<f64>> {
        if max_chunk == 0 {
            return Err(Error::InvalidParameter("max_chunk must be at least 1".into()));
        }
        for (x, u) in queries {
            self.check_query(x.as_ref(), u.as_ref())?;
        }
        let m = self.len();
        let mut out = DMatrix::zeros(m, queries.len());
        for (c, chunk) in queries.chunks(max_chunk).enumerate() {
            let mut z = DMatrix::zeros(m, chunk.len());
            for (j, (x, u)) in chunk.iter().enumerate() {
                z.set_column(j, &self.features_unchecked(x.as_ref(), u.as_ref()));
            }
            let b = self.factor.solve_mat(&z);
            out.columns_mut(c * max_chunk, chunk.len()).copy_from(&b);
        }
        Ok(out)
    }

    /// `(G + lambda M I)^-1 f`. Contracting with features gives
    /// `w^T z(x, u) = f^T beta(x, u)`.
    pub fn dual_weights(&self, fvals: &DVector<f64>) -> Result<DVector<f64>> {
        Error::check_dim(self.len(), fvals.len())?;
        Ok(self.factor.solve_vec(fvals))
    }

    /// `M x |points|` state kernel matrix `k(x_i, points[q])`.
    pub fn state_cross_gram<P: AsRef<[f64]> + Sync>(&self, points: &[P]) -> Result<DMatrix<f64>> {
        for p in points {
            Error::check_dim(self.sample.state_dim(), p.as_ref().len())?;
        }
        if points.is_empty() {
            return Ok(DMatrix::zeros(self.len(), 0));
        }
        Ok(self.state_kernel.gram_unchecked(self.sample.states(), points))
    }

    /// `M x |actions|` action kernel matrix `l(u_i, actions[j])`.
    pub fn action_cross_gram<P: AsRef<[f64]> + Sync>(&self, actions: &[P]) -> Result<DMatrix<f64>> {
        for a in actions {
            Error::check_dim(self.sample.action_dim(), a.as_ref().len())?;
        }
        if actions.is_empty() {
            return Ok(DMatrix::zeros(self.len(), 0));
        }
        Ok(self.action_kernel.gram_unchecked(self.sample.actions(), actions))
    }

    /// Expectations of `f` at every (point, action) pair from precomputed
    /// cross Grams: entry `(q, j)` is `f^T beta(points[q], actions[j])`, given
    /// `weights = dual_weights(f)`.
    pub fn contract(
        weights: &DVector<f64>,
        state_gram: &DMatrix<f64>,
        action_gram: &DMatrix<f64>,
    ) -> DMatrix<f64> {
        let mut scaled = action_gram.clone();
        for (mut row, w) in scaled.row_iter_mut().zip(weights.iter()) {
            row *= *w;
        }
        state_gram.tr_mul(&scaled)
    }

    /// `|points| x |actions|` table of `f^T beta(points[q], actions[j])`.
    /// Points are processed `max_chunk` at a time so the state kernel block
    /// never exceeds `M x max_chunk`.
    pub fn expectation_table<P: AsRef<[f64]> + Sync>(
        &self,
        fvals: &DVector<f64>,
        points: &[P],
        actions: &[P],
        max_chunk: usize,
    ) -> Result<DMatrix<f64>> {
        if max_chunk == 0 {
            return Err(Error::InvalidParameter("max_chunk must be at least 1".into()));
        }
        let w = self.dual_weights(fvals)?;
        let lu = self.action_cross_gram(actions)?;
        let mut out = DMatrix::zeros(points.len(), actions.len());
        for (c, chunk) in points.chunks(max_chunk).enumerate() {
            let kx = self.state_cross_gram(chunk)?;
            let block = Self::contract(&w, &kx, &lu);
            out.rows_mut(c * max_chunk, chunk.len()).copy_from(&block);
        }
        Ok(out)
    }
}
