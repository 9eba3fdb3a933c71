//! Positive-definite kernels on state and action spaces.
//!
//! Both families are radial and bounded by one, `k(x, x) = 1`. Distances are
//! always accumulated as `sum (x_i - x'_i)^2`; the expanded
//! `|x|^2 + |x'|^2 - 2 x.x'` form loses all precision at small bandwidths.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelFamily {
    /// `exp(-|x - x'|^2 / (2 sigma^2))`
    GaussianRbf,
    /// `exp(-|x - x'| / sigma)`; a separating kernel.
    Abel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub bandwidth: f64,
}

impl KernelSpec {
    pub fn new(family: KernelFamily, bandwidth: f64) -> Result<Self> {
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "kernel bandwidth must be positive and finite, got {bandwidth}"
            )));
        }
        Ok(KernelSpec { family, bandwidth })
    }

    pub fn gaussian(bandwidth: f64) -> Result<Self> {
        Self::new(KernelFamily::GaussianRbf, bandwidth)
    }

    pub fn abel(bandwidth: f64) -> Result<Self> {
        Self::new(KernelFamily::Abel, bandwidth)
    }

    /// Kernel value for two points of equal dimension.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        Error::check_dim(x.len(), y.len())?;
        Ok(self.eval_unchecked(x, y))
    }

    #[inline]
    pub(crate) fn eval_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        let sq: f64 = x
            .iter()
            .zip(y)
            .map(|(a, b)| {
                let d = a - b;
                d * d
            })
            .sum();
        match self.family {
            KernelFamily::GaussianRbf => (-sq / (2.0 * self.bandwidth * self.bandwidth)).exp(),
            KernelFamily::Abel => (-sq.sqrt() / self.bandwidth).exp(),
        }
    }

    /// `|a| x |b|` matrix with `G[i][j] = k(a[i], b[j])`.
    pub fn gram<P: AsRef<[f64]> + Sync>(&self, a: &[P], b: &[P]) -> Result<DMatrix<f64>> {
        if a.is_empty() || b.is_empty() {
            return Err(Error::Empty("gram point list"));
        }
        let dim = a[0].as_ref().len();
        for p in a.iter().chain(b) {
            Error::check_dim(dim, p.as_ref().len())?;
        }
        Ok(self.gram_unchecked(a, b))
    }

    pub(crate) fn gram_unchecked<A, B>(&self, a: &[A], b: &[B]) -> DMatrix<f64>
    where
        A: AsRef<[f64]> + Sync,
        B: AsRef<[f64]> + Sync,
    {
        // Column-major storage: fill one column (fixed b[j]) per task.
        let rows = a.len();
        let mut data = vec![0.0; rows * b.len()];
        data.par_chunks_mut(rows).zip(b.par_iter()).for_each(|(col, bj)| {
            let bj = bj.as_ref();
            for (entry, ai) in col.iter_mut().zip(a) {
                *entry = self.eval_unchecked(ai.as_ref(), bj);
            }
        });
        DMatrix::from_vec(rows, b.len(), data)
    }
}

/// Free-function form of [`KernelSpec::eval`].
pub fn eval_kernel(spec: &KernelSpec, x: &[f64], y: &[f64]) -> Result<f64> {
    spec.eval(x, y)
}

/// Free-function form of [`KernelSpec::gram`].
pub fn gram<P: AsRef<[f64]> + Sync>(spec: &KernelSpec, a: &[P], b: &[P]) -> Result<DMatrix<f64>> {
    spec.gram(a, b)
}

/// Median pairwise Euclidean distance over at most `max_points` points taken
/// at an even stride. Used as a bandwidth heuristic.
pub fn median_distance<P: AsRef<[f64]>>(points: &[P], max_points: usize) -> Option<f64> {
    if points.len() < 2 || max_points < 2 {
        return None;
    }
    let stride = points.len().div_ceil(max_points).max(1);
    let chosen: Vec<&[f64]> = points.iter().step_by(stride).map(|p| p.as_ref()).collect();
    let mut dists = Vec::with_capacity(chosen.len() * (chosen.len() - 1) / 2);
    for i in 0..chosen.len() {
        for j in (i + 1)..chosen.len() {
            let sq: f64 = chosen[i]
                .iter()
                .zip(chosen[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            dists.push(sq.sqrt());
        }
    }
    if dists.is_empty() {
        return None;
    }
    dists.sort_by(f64::total_cmp);
    let n = dists.len();
    Some(if n % 2 == 1 {
        dists[n / 2]
    } else {
        0.5 * (dists[n / 2 - 1] + dists[n / 2])
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::SymmetricEigen;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn normal_points(n: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect())
            .collect()
    }

    #[test]
    fn self_similarity_is_one() {
        let k = KernelSpec::gaussian(1.0).unwrap();
        assert_eq!(k.eval(&[0.3, -0.7], &[0.3, -0.7]).unwrap(), 1.0);
        let a = KernelSpec::abel(0.4).unwrap();
        assert_eq!(a.eval(&[0.3, -0.7], &[0.3, -0.7]).unwrap(), 1.0);
    }

    #[test]
    fn hand_evaluated_values() {
        let k = KernelSpec::gaussian(1.0).unwrap();
        let v = k.eval(&[0.0, 0.0], &[1.0, 1.0]).unwrap();
        assert!((v - (-1.0f64).exp()).abs() < 1e-15);
        assert!((v - 0.367879).abs() < 1e-6);

        let a = KernelSpec::abel(0.1).unwrap();
        let v = a.eval(&[0.0], &[0.1]).unwrap();
        assert!((v - 0.367879).abs() < 1e-6);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(KernelSpec::gaussian(0.0).is_err());
        assert!(KernelSpec::abel(-1.0).is_err());
        assert!(KernelSpec::gaussian(f64::NAN).is_err());
        let k = KernelSpec::gaussian(1.0).unwrap();
        assert!(matches!(
            k.eval(&[0.0], &[0.0, 1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        let empty: Vec<Vec<f64>> = vec![];
        assert!(k.gram(&empty, &[vec![0.0]]).is_err());
        assert!(k.gram(&[vec![0.0]], &[vec![0.0, 1.0]]).is_err());
    }

    #[test]
    fn small_gram_matrices() {
        let k = KernelSpec::gaussian(1.0).unwrap();
        let g = k.gram(&[vec![0.2, 0.1]], &[vec![0.2, 0.1]]).unwrap();
        assert_eq!(g[(0, 0)], 1.0);

        let g = k
            .gram(&[vec![0.0, 0.0]], &[vec![0.0, 0.0], vec![1.0, 1.0]])
            .unwrap();
        assert_eq!(g.shape(), (1, 2));
        assert_eq!(g[(0, 0)], 1.0);
        assert!((g[(0, 1)] - 0.367879).abs() < 1e-6);
    }

    #[test]
    fn gram_of_normal_points_is_psd() {
        let pts = normal_points(50, 2, 11);
        let g = KernelSpec::gaussian(1.0).unwrap().gram(&pts, &pts).unwrap();
        let eig = SymmetricEigen::new(g);
        assert!(eig.eigenvalues.min() >= -1e-10);
    }

    #[test]
    fn median_distance_of_collinear_points() {
        let pts = vec![vec![0.0], vec![1.0], vec![3.0]];
        // distances 1, 3, 2
        assert_eq!(median_distance(&pts, 500), Some(2.0));
        assert_eq!(median_distance(&pts[..1], 500), None);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn family() -> impl Strategy<Value = KernelFamily> {
            prop_oneof![Just(KernelFamily::GaussianRbf), Just(KernelFamily::Abel)]
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(48))]

            #[test]
            fn gram_is_symmetric_bounded_and_psd(
                fam in family(),
                bw in 0.5f64..5.0,
                pts in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 3), 1..100),
            ) {
                let k = KernelSpec::new(fam, bw).unwrap();
                let g = k.gram(&pts, &pts).unwrap();
                for i in 0..pts.len() {
                    for j in 0..pts.len() {
                        prop_assert_eq!(g[(i, j)], g[(j, i)]);
                        prop_assert!(g[(i, j)] <= 1.0);
                        prop_assert!(g[(i, j)] > 0.0);
                    }
                }
                let eig = SymmetricEigen::new(g);
                prop_assert!(eig.eigenvalues.min() >= -1e-8);
            }

            #[test]
            fn pointwise_eval_matches_gram(
                fam in family(),
                bw in 0.1f64..3.0,
                x in prop::collection::vec(-2.0f64..2.0, 4),
                y in prop::collection::vec(-2.0f64..2.0, 4),
            ) {
                let k = KernelSpec::new(fam, bw).unwrap();
                let g = k.gram(&[x.clone()], &[y.clone()]).unwrap();
                let v = k.eval(&x, &y).unwrap();
                prop_assert_eq!(v, g[(0, 0)]);
                prop_assert_eq!(v, k.eval(&y, &x).unwrap());
                prop_assert!(v > 0.0 && v <= 1.0);
            }
        }
    }
}
