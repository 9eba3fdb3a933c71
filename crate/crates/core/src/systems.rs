//! Benchmark systems `x_{t+1} = f(x_t, u_t) + w_t`, simulated in discrete
//! time under zero-order hold.
//!
//! Linear systems carry their exact discrete `(A, B)` pair. Nonlinear systems
//! carry a vector field that is integrated over one sampling interval with
//! the action held constant, using fixed-step classical RK4.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{DMatrix, SymmetricEigen};
use rand_distr::{Distribution, StandardNormal};

use crate::linalg::Cholesky;
use crate::sampling::{HyperRect, SeededRng};
use crate::{Error, Point, Result};

/// Named numeric parameters for [`make_system`].
pub type SystemParams = BTreeMap<String, f64>;

/// Continuous-time vector field `(state, held action, derivative out)`.
pub type VectorField = fn(&[f64], &[f64], &mut [f64]);

pub const SYSTEM_NAMES: &str = "integrator, integrator(n), cwh, nonholonomic, tora";

/// Default RK4 substeps per sampling interval.
pub const RK4_SUBSTEPS: usize = 16;

/// Additive Gaussian disturbance `w ~ N(0, Sigma)`.
#[derive(Debug, Clone)]
pub struct NoiseSpec {
    covariance: DMatrix<f64>,
    // Sigma = factor factor^T
    factor: DMatrix<f64>,
    zero: bool,
}

impl NoiseSpec {
    pub fn gaussian(covariance: DMatrix<f64>) -> Result<Self> {
        let n = covariance.nrows();
        Error::check_dim(n, covariance.ncols())?;
        if covariance.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("noise covariance".into()));
        }
        let scale = covariance.amax().max(1.0);
        for i in 0..n {
            for j in 0..i {
                if (covariance[(i, j)] - covariance[(j, i)]).abs() > 1e-12 * scale {
                    return Err(Error::InvalidParameter(
                        "noise covariance must be symmetric".into(),
                    ));
                }
            }
        }
        let zero = covariance.iter().all(|&v| v == 0.0);
        let factor = if zero {
            DMatrix::zeros(n, n)
        } else {
            match Cholesky::factor(&covariance) {
                Ok(c) => c.l().clone(),
                Err(_) => {
                    // Singular PSD: V diag(sqrt(max(ev, 0))).
                    let eig = SymmetricEigen::new(covariance.clone());
                    if eig.eigenvalues.min() < -1e-10 * scale {
                        return Err(Error::InvalidParameter(
                            "noise covariance must be positive semidefinite".into(),
                        ));
                    }
                    let mut v = eig.eigenvectors;
                    for (mut col, ev) in v.column_iter_mut().zip(eig.eigenvalues.iter()) {
                        col *= ev.max(0.0).sqrt();
                    }
                    v
                }
            }
        };
        Ok(NoiseSpec {
            covariance,
            factor,
            zero,
        })
    }

    /// `variance * I`.
    pub fn isotropic(dim: usize, variance: f64) -> Result<Self> {
        Self::gaussian(DMatrix::identity(dim, dim) * variance)
    }

    pub fn diagonal(variances: &[f64]) -> Result<Self> {
        Self::gaussian(DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(
            variances,
        )))
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn is_zero(&self) -> bool {
        self.zero
    }

    /// One draw; always consumes `dim` normals so the stream position does
    /// not depend on the covariance.
    pub fn draw(&self, rng: &mut SeededRng) -> Vec<f64> {
        let n = self.covariance.nrows();
        let z: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
        if self.zero {
            return vec![0.0; n];
        }
        (0..n)
            .map(|i| (0..n).map(|j| self.factor[(i, j)] * z[j]).sum())
            .collect()
    }
}

#[derive(Clone)]
pub enum Dynamics {
    /// Exact discrete map `A x + B u`.
    Linear { a: DMatrix<f64>, b: DMatrix<f64> },
    /// Vector field integrated over the sampling interval.
    Continuous { field: VectorField, substeps: usize },
}

impl fmt::Debug for Dynamics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Dynamics::Linear { a, b } => f
                .debug_struct("Linear")
                .field("a", a)
                .field("b", b)
                .finish(),
            Dynamics::Continuous { substeps, .. } => f
                .debug_struct("Continuous")
                .field("substeps", substeps)
                .finish(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SystemSpec {
    name: String,
    state_dim: usize,
    action_dim: usize,
    dynamics: Dynamics,
    noise: NoiseSpec,
    sampling_time: f64,
    action_box: HyperRect,
}

/// A recorded rollout: `N + 1` states and `N` actions.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<Point>,
    pub actions: Vec<Point>,
}

impl Trajectory {
    pub fn horizon(&self) -> usize {
        self.actions.len()
    }

    pub fn final_state(&self) -> &[f64] {
        self.states.last().expect("trajectory has an initial state")
    }
}

impl SystemSpec {
    pub fn new(
        name: impl Into<String>,
        dynamics: Dynamics,
        noise: NoiseSpec,
        sampling_time: f64,
        action_box: HyperRect,
    ) -> Result<Self> {
        if !(sampling_time > 0.0 && sampling_time.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "sampling time must be positive, got {sampling_time}"
            )));
        }
        let state_dim = noise.covariance.nrows();
        let action_dim = action_box.dim();
        if let Dynamics::Linear { a, b } = &dynamics {
            Error::check_dim(state_dim, a.nrows())?;
            Error::check_dim(state_dim, a.ncols())?;
            Error::check_dim(state_dim, b.nrows())?;
            Error::check_dim(action_dim, b.ncols())?;
        }
        Ok(SystemSpec {
            name: name.into(),
            state_dim,
            action_dim,
            dynamics,
            noise,
            sampling_time,
            action_box,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    pub fn sampling_time(&self) -> f64 {
        self.sampling_time
    }

    pub fn noise(&self) -> &NoiseSpec {
        &self.noise
    }

    /// Admissible action set `U`.
    pub fn action_box(&self) -> &HyperRect {
        &self.action_box
    }

    pub fn dynamics(&self) -> &Dynamics {
        &self.dynamics
    }

    /// `(A, B)` for linear systems.
    pub fn linear_parts(&self) -> Option<(&DMatrix<f64>, &DMatrix<f64>)> {
        match &self.dynamics {
            Dynamics::Linear { a, b } => Some((a, b)),
            Dynamics::Continuous { .. } => None,
        }
    }

    pub fn with_noise(mut self, noise: NoiseSpec) -> Result<Self> {
        Error::check_dim(self.state_dim, noise.covariance.nrows())?;
        self.noise = noise;
        Ok(self)
    }

    /// Changes the RK4 substep count of a continuous system.
    pub fn with_substeps(mut self, count: usize) -> Self {
        if let Dynamics::Continuous { substeps, .. } = &mut self.dynamics {
            *substeps = count.max(1);
        }
        self
    }

    /// Noise-free successor.
    pub fn nominal_step(&self, x: &[f64], u: &[f64]) -> Result<Point> {
        Error::check_dim(self.state_dim, x.len())?;
        Error::check_dim(self.action_dim, u.len())?;
        if x.iter().chain(u).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("state {x:?} / action {u:?}")));
        }
        Ok(match &self.dynamics {
            Dynamics::Linear { a, b } => {
                let n = self.state_dim;
                (0..n)
                    .map(|i| {
                        let mut acc = 0.0;
                        for (j, xj) in x.iter().enumerate() {
                            acc += a[(i, j)] * xj;
                        }
                        for (k, uk) in u.iter().enumerate() {
                            acc += b[(i, k)] * uk;
                        }
                        acc
                    })
                    .collect()
            }
            Dynamics::Continuous { field, substeps } => {
                rk4(*field, x, u, self.sampling_time, *substeps)
            }
        })
    }

    /// One noisy step from `x` under action `u`.
    pub fn step(&self, x: &[f64], u: &[f64], rng: &mut SeededRng) -> Result<Point> {
        let mut y = self.nominal_step(x, u)?;
        let w = self.noise.draw(rng);
        for (yi, wi) in y.iter_mut().zip(w) {
            *yi += wi;
        }
        Ok(y)
    }
}

fn rk4(field: VectorField, x: &[f64], u: &[f64], span: f64, substeps: usize) -> Point {
    let n = x.len();
    let h = span / substeps as f64;
    let mut s = x.to_vec();
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut tmp = vec![0.0; n];
    for _ in 0..substeps {
        field(&s, u, &mut k1);
        for i in 0..n {
            tmp[i] = s[i] + 0.5 * h * k1[i];
        }
        field(&tmp, u, &mut k2);
        for i in 0..n {
            tmp[i] = s[i] + 0.5 * h * k2[i];
        }
        field(&tmp, u, &mut k3);
        for i in 0..n {
            tmp[i] = s[i] + h * k3[i];
        }
        field(&tmp, u, &mut k4);
        for i in 0..n {
            s[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    s
}

/// Runs `policy` in closed loop for `horizon` steps.
pub fn simulate<F>(
    sys: &SystemSpec,
    x0: &[f64],
    mut policy: F,
    horizon: usize,
    rng: &mut SeededRng,
) -> Result<Trajectory>
where
    F: FnMut(usize, &[f64]) -> Result<Point>,
{
    if horizon == 0 {
        return Err(Error::InvalidParameter("horizon must be at least 1".into()));
    }
    Error::check_dim(sys.state_dim(), x0.len())?;
    let mut states = Vec::with_capacity(horizon + 1);
    let mut actions = Vec::with_capacity(horizon);
    states.push(x0.to_vec());
    for t in 0..horizon {
        let x = &states[t];
        let u = policy(t, x)?;
        let y = sys.step(x, &u, rng)?;
        actions.push(u);
        states.push(y);
    }
    Ok(Trajectory { states, actions })
}

fn nonholonomic_field(x: &[f64], u: &[f64], dx: &mut [f64]) {
    dx[0] = u[0] * x[2].cos();
    dx[1] = u[0] * x[2].sin();
    dx[2] = u[1];
}

fn tora_field(x: &[f64], u: &[f64], dx: &mut [f64]) {
    dx[0] = x[1];
    dx[1] = -x[0] + 0.1 * x[2].sin();
    dx[2] = x[3];
    dx[3] = u[0];
}

/// Saturating state feedback used as the default TORA controller:
/// `u = clamp(-0.1 x4 - 0.1 x3, -1, 1)`.
pub fn tora_default_policy(x: &[f64]) -> Point {
    vec![(-0.1 * x[3] - 0.1 * x[2]).clamp(-1.0, 1.0)]
}

/// Gravitational parameter of Earth, km^3/s^2.
pub const EARTH_MU: f64 = 398_600.4418;
/// Equatorial radius of Earth, km.
pub const EARTH_RADIUS: f64 = 6378.1;

/// Mean motion of a circular orbit at `altitude_km`.
pub fn orbital_rate(altitude_km: f64) -> f64 {
    let r = EARTH_RADIUS + altitude_km;
    (EARTH_MU / (r * r * r)).sqrt()
}

/// Exact zero-order-hold discretization of `x' = Ac x + Bc u` through the
/// exponential of the augmented matrix `[[Ac, Bc], [0, 0]] * ts`.
pub fn discretize(ac: &DMatrix<f64>, bc: &DMatrix<f64>, ts: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = ac.nrows();
    let m = bc.ncols();
    let mut aug = DMatrix::zeros(n + m, n + m);
    aug.view_mut((0, 0), (n, n)).copy_from(&(ac * ts));
    aug.view_mut((0, n), (n, m)).copy_from(&(bc * ts));
    let e = aug.exp();
    (
        e.view((0, 0), (n, n)).into_owned(),
        e.view((0, n), (n, m)).into_owned(),
    )
}

/// Chain of `n` integrators driven by one input, discretized exactly:
/// `A[i][j] = ts^(j-i) / (j-i)!`, `B[i] = ts^(n-i) / (n-i)!`.
pub fn integrator_matrices(n: usize, ts: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let coeff = |k: usize| -> f64 {
        let mut v = 1.0;
        for i in 1..=k {
            v *= ts / i as f64;
        }
        v
    };
    let a = DMatrix::from_fn(n, n, |i, j| if j >= i { coeff(j - i) } else { 0.0 });
    let b = DMatrix::from_fn(n, 1, |i, _| coeff(n - i));
    (a, b)
}

fn parse_name(name: &str) -> Result<(String, Option<usize>)> {
    let name = name.trim();
    if let Some(rest) = name.strip_prefix("integrator(") {
        let inner = rest.strip_suffix(')').ok_or_else(|| Error::UnknownSystem {
            name: name.into(),
            valid: SYSTEM_NAMES.into(),
        })?;
        let n: usize = inner.trim().parse().map_err(|_| {
            Error::InvalidParameter(format!("integrator dimension `{inner}` is not an integer"))
        })?;
        return Ok(("integrator".into(), Some(n)));
    }
    Ok((name.to_string(), None))
}

fn take(params: &SystemParams, allowed: &[&str], name: &str) -> Result<()> {
    for key in params.keys() {
        if !allowed.contains(&key.as_str()) {
            return Err(Error::InvalidParameter(format!(
                "system `{name}` has no parameter `{key}` (allowed: {})",
                allowed.join(", ")
            )));
        }
    }
    Ok(())
}

fn positive(params: &SystemParams, key: &str, default: f64) -> Result<f64> {
    let v = params.get(key).copied().unwrap_or(default);
    if !(v > 0.0 && v.is_finite()) {
        return Err(Error::InvalidParameter(format!("`{key}` must be positive, got {v}")));
    }
    Ok(v)
}

fn nonnegative(params: &SystemParams, key: &str, default: f64) -> Result<f64> {
    let v = params.get(key).copied().unwrap_or(default);
    if !(v >= 0.0 && v.is_finite()) {
        return Err(Error::InvalidParameter(format!("`{key}` must be non-negative, got {v}")));
    }
    Ok(v)
}

/// Builds one of the benchmark systems.
///
/// | name | state | action | default `ts` | default noise |
/// |------|-------|--------|--------------|---------------|
/// | `integrator` / `integrator(n)` | n (2) | 1 in [-1, 1] | 0.25 | 0.01 I |
/// | `cwh` | 4 | 2 in [-0.1, 0.1]^2 | 20 s | diag(1e-4, 1e-4, 5e-8, 5e-8) |
/// | `nonholonomic` | 3 | [0.1, 1] x [-10, 10] | 0.1 | 0.01 I |
/// | `tora` | 4 | 1 in [-1, 1] | 0.1 | 0.01 I |
///
/// Parameters: `sampling_time` (all), `noise_variance` (isotropic override,
/// all), `dim` (integrator), `mass` and `altitude_km` (cwh; 300 kg and
/// 850 km).
pub fn make_system(name: &str, params: &SystemParams) -> Result<SystemSpec> {
    let (base, dim_from_name) = parse_name(name)?;
    match base.as_str() {
        "integrator" => {
            take(params, &["sampling_time", "noise_variance", "dim"], &base)?;
            let n = match (dim_from_name, params.get("dim")) {
                (Some(n), _) => n,
                (None, Some(&d)) if d >= 1.0 && d.fract() == 0.0 => d as usize,
                (None, Some(d)) => {
                    return Err(Error::InvalidParameter(format!(
                        "integrator `dim` must be a positive integer, got {d}"
                    )))
                }
                (None, None) => 2,
            };
            if n == 0 {
                return Err(Error::InvalidParameter("integrator dimension must be >= 1".into()));
            }
            let ts = positive(params, "sampling_time", 0.25)?;
            let var = nonnegative(params, "noise_variance", 0.01)?;
            let (a, b) = integrator_matrices(n, ts);
            SystemSpec::new(
                format!("integrator({n})"),
                Dynamics::Linear { a, b },
                NoiseSpec::isotropic(n, var)?,
                ts,
                HyperRect::cube(-1.0, 1.0, 1)?,
            )
        }
        "cwh" => {
            take(
                params,
                &["sampling_time", "noise_variance", "mass", "altitude_km"],
                &base,
            )?;
            let ts = positive(params, "sampling_time", 20.0)?;
            let mass = positive(params, "mass", 300.0)?;
            let omega = orbital_rate(positive(params, "altitude_km", 850.0)?);
            let mut ac = DMatrix::zeros(4, 4);
            ac[(0, 2)] = 1.0;
            ac[(1, 3)] = 1.0;
            ac[(2, 0)] = 3.0 * omega * omega;
            ac[(2, 3)] = 2.0 * omega;
            ac[(3, 2)] = -2.0 * omega;
            let mut bc = DMatrix::zeros(4, 2);
            bc[(2, 0)] = 1.0 / mass;
            bc[(3, 1)] = 1.0 / mass;
            let (a, b) = discretize(&ac, &bc, ts);
            let noise = match params.get("noise_variance") {
                Some(_) => NoiseSpec::isotropic(4, nonnegative(params, "noise_variance", 0.0)?)?,
                None => NoiseSpec::diagonal(&[1e-4, 1e-4, 5e-8, 5e-8])?,
            };
            SystemSpec::new(
                "cwh",
                Dynamics::Linear { a, b },
                noise,
                ts,
                HyperRect::cube(-0.1, 0.1, 2)?,
            )
        }
        "nonholonomic" => {
            take(params, &["sampling_time", "noise_variance"], &base)?;
            let ts = positive(params, "sampling_time", 0.1)?;
            let var = nonnegative(params, "noise_variance", 0.01)?;
            SystemSpec::new(
                "nonholonomic",
                Dynamics::Continuous {
                    field: nonholonomic_field,
                    substeps: RK4_SUBSTEPS,
                },
                NoiseSpec::isotropic(3, var)?,
                ts,
                HyperRect::new(vec![0.1, -10.0], vec![1.0, 10.0])?,
            )
        }
        "tora" => {
            take(params, &["sampling_time", "noise_variance"], &base)?;
            let ts = positive(params, "sampling_time", 0.1)?;
            let var = nonnegative(params, "noise_variance", 0.01)?;
            SystemSpec::new(
                "tora",
                Dynamics::Continuous {
                    field: tora_field,
                    substeps: RK4_SUBSTEPS,
                },
                NoiseSpec::isotropic(4, var)?,
                ts,
                HyperRect::cube(-1.0, 1.0, 1)?,
            )
        }
        _ => Err(Error::UnknownSystem {
            name: name.into(),
            valid: SYSTEM_NAMES.into(),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quiet(name: &str, extra: &[(&str, f64)]) -> SystemSpec {
        let mut p = SystemParams::new();
        p.insert("noise_variance".into(), 0.0);
        for (k, v) in extra {
            p.insert((*k).into(), *v);
        }
        make_system(name, &p).unwrap()
    }

    #[test]
    fn double_integrator_matrices() {
        let sys = make_system("integrator(2)", &SystemParams::new()).unwrap();
        let (a, b) = sys.linear_parts().unwrap();
        assert_eq!(a, &DMatrix::from_row_slice(2, 2, &[1.0, 0.25, 0.0, 1.0]));
        assert_eq!(b, &DMatrix::from_row_slice(2, 1, &[0.03125, 0.25]));
        assert_eq!(sys.noise().covariance(), &(DMatrix::identity(2, 2) * 0.01));
    }

    #[test]
    fn integrator_shapes_and_errors() {
        let sys = make_system("integrator(5)", &SystemParams::new()).unwrap();
        assert_eq!((sys.state_dim(), sys.action_dim()), (5, 1));
        let mut p = SystemParams::new();
        p.insert("dim".into(), 3.0);
        assert_eq!(make_system("integrator", &p).unwrap().state_dim(), 3);
        assert!(matches!(
            make_system("pendulum", &SystemParams::new()),
            Err(Error::UnknownSystem { .. })
        ));
        let mut bad = SystemParams::new();
        bad.insert("gravity".into(), 9.8);
        assert!(make_system("tora", &bad).is_err());
        let mut neg = SystemParams::new();
        neg.insert("sampling_time".into(), -1.0);
        assert!(make_system("cwh", &neg).is_err());
    }

    #[test]
    fn cwh_defaults() {
        let sys = make_system("cwh", &SystemParams::new()).unwrap();
        assert_eq!(sys.action_box(), &HyperRect::cube(-0.1, 0.1, 2).unwrap());
        let cov = sys.noise().covariance();
        assert_eq!(cov[(0, 0)], 1e-4);
        assert_eq!(cov[(3, 3)], 5e-8);
        // Discrete map agrees with a fine RK4 integration of the continuous model.
        let omega = orbital_rate(850.0);
        let (a, b) = sys.linear_parts().unwrap();
        let x0 = [0.3, -0.2, 0.01, -0.02];
        let u = [0.05, -0.03];
        let mut s = x0.to_vec();
        let h = 20.0 / 20000.0;
        let f = |s: &[f64]| {
            vec![
                s[2],
                s[3],
                3.0 * omega * omega * s[0] + 2.0 * omega * s[3] + u[0] / 300.0,
                -2.0 * omega * s[2] + u[1] / 300.0,
            ]
        };
        for _ in 0..20000 {
            let k1 = f(&s);
            let t: Vec<f64> = (0..4).map(|i| s[i] + 0.5 * h * k1[i]).collect();
            let k2 = f(&t);
            let t: Vec<f64> = (0..4).map(|i| s[i] + 0.5 * h * k2[i]).collect();
            let k3 = f(&t);
            let t: Vec<f64> = (0..4).map(|i| s[i] + h * k3[i]).collect();
            let k4 = f(&t);
            for i in 0..4 {
                s[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
        let exact = a * nalgebra::DVector::from_column_slice(&x0)
            + b * nalgebra::DVector::from_column_slice(&u);
        for i in 0..4 {
            assert!((exact[i] - s[i]).abs() < 1e-10, "{i}: {} vs {}", exact[i], s[i]);
        }
    }

    #[test]
    fn linear_steps() {
        let sys = quiet("integrator", &[]);
        let mut rng = SeededRng::new(0);
        assert_eq!(sys.step(&[0.0, 0.0], &[0.0], &mut rng).unwrap(), vec![0.0, 0.0]);
        assert_eq!(sys.step(&[1.0, 1.0], &[0.0], &mut rng).unwrap(), vec![1.25, 1.0]);
        assert!(sys.step(&[f64::NAN, 0.0], &[0.0], &mut rng).is_err());
        assert!(sys.step(&[0.0], &[0.0], &mut rng).is_err());
    }

    #[test]
    fn straight_line_motion() {
        let sys = quiet("nonholonomic", &[]);
        let y = sys
            .step(&[0.0, 0.0, 0.0], &[1.0, 0.0], &mut SeededRng::new(0))
            .unwrap();
        assert!((y[0] - 0.1).abs() < 1e-10);
        assert!(y[1].abs() < 1e-10 && y[2].abs() < 1e-10);
    }

    #[test]
    fn rk4_converges_at_fourth_order() {
        // Circular arc: x = (v/w) sin(w t), y = (v/w)(1 - cos(w t)).
        let x0 = [0.0, 0.0, 0.0];
        let u = [1.0, 8.0];
        let ts: f64 = 0.5;
        let exact = [
            (1.0 / 8.0) * (8.0 * ts).sin(),
            (1.0 / 8.0) * (1.0 - (8.0 * ts).cos()),
        ];
        let err = |k: usize| {
            let s = quiet("nonholonomic", &[("sampling_time", ts)]).with_substeps(k);
            let y = s.nominal_step(&x0, &u).unwrap();
            ((y[0] - exact[0]).powi(2) + (y[1] - exact[1]).powi(2)).sqrt()
        };
        let at = |k: usize| {
            quiet("nonholonomic", &[("sampling_time", ts)])
                .with_substeps(k)
                .nominal_step(&x0, &u)
                .unwrap()
        };
        let diff = |a: &Point, b: &Point| a.iter().zip(b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        let (c4, c8, c16) = (at(4), at(8), at(16));
        let first = diff(&c4, &c8);
        let second = diff(&c8, &c16);
        assert!(first >= 6.0 * second, "{first} vs {second}");
        assert!(err(16) < err(8) && err(8) < err(4));
        assert!(err(16) < 1e-6);
    }

    #[test]
    fn simulation_shapes_and_determinism() {
        let quiet_sys = quiet("integrator", &[]);
        let zero = |_: usize, _: &[f64]| Ok(vec![0.0]);
        let mut rng = SeededRng::new(1);
        let t = simulate(&quiet_sys, &[0.0, 0.0], zero, 1, &mut rng).unwrap();
        assert_eq!((t.states.len(), t.actions.len()), (2, 1));
        let t = simulate(&quiet_sys, &[0.0, 0.0], zero, 10, &mut rng).unwrap();
        assert!(t.states.iter().flatten().all(|&v| v == 0.0));
        assert!(simulate(&quiet_sys, &[0.0, 0.0], zero, 0, &mut rng).is_err());

        let sys = make_system("tora", &SystemParams::new()).unwrap();
        let pol = |_: usize, x: &[f64]| Ok(tora_default_policy(x));
        let a = simulate(&sys, &[0.6, -0.6, -0.3, 0.5], pol, 30, &mut SeededRng::new(8)).unwrap();
        let b = simulate(&sys, &[0.6, -0.6, -0.3, 0.5], pol, 30, &mut SeededRng::new(8)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn singular_covariance_uses_eigen_factor() {
        let cov = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let noise = NoiseSpec::gaussian(cov).unwrap();
        let mut rng = SeededRng::new(4);
        for _ in 0..20 {
            let w = noise.draw(&mut rng);
            assert!((w[0] - w[1]).abs() < 1e-12);
        }
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(NoiseSpec::gaussian(bad).is_err());
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(NoiseSpec::gaussian(asym).is_err());
    }
}
