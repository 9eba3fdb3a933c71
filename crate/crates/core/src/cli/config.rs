//! Scenario files: TOML documents parsed with spans so that every validation
//! error names the offending line.

use std::fmt;
use std::ops::Range;
use std::path::PathBuf;

use serde::Deserialize;
use toml::Spanned;

use crate::kernels::{KernelFamily, KernelSpec};
use crate::reach::{Problem, Tube};
use crate::sampling::HyperRect;
use crate::systems::{make_system, NoiseSpec, SystemParams, SystemSpec};
use crate::Point;

/// A configuration problem, with the 1-based line it was found on.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub file: Option<PathBuf>,
    pub line: Option<usize>,
    pub message: String,
}

impl ConfigError {
    pub fn new(line: Option<usize>, message: impl Into<String>) -> Self {
        ConfigError {
            file: None,
            line,
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.file, self.line) {
            (Some(p), Some(l)) => write!(f, "{}:{l}: {}", p.display(), self.message),
            (Some(p), None) => write!(f, "{}: {}", p.display(), self.message),
            (None, Some(l)) => write!(f, "line {l}: {}", self.message),
            (None, None) => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    ControlFwd,
    ControlBwd,
    ReachTht,
    ReachFht,
    ForwardReach,
}

impl Algorithm {
    pub fn is_control(self) -> bool {
        matches!(self, Algorithm::ControlFwd | Algorithm::ControlBwd)
    }

    pub fn problem(self) -> Option<Problem> {
        match self {
            Algorithm::ReachTht => Some(Problem::Tht),
            Algorithm::ReachFht => Some(Problem::Fht),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxSpec {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum TubeSpec {
    Constant(BoxSpec),
    PerStep(Vec<BoxSpec>),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum SigmaSpec {
    Value(f64),
    Named(String),
}

/// Bandwidth: a fixed value or the median pairwise distance of the states.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Sigma {
    Value(f64),
    Median,
}

impl std::str::FromStr for Sigma {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s.eq_ignore_ascii_case("median") {
            return Ok(Sigma::Median);
        }
        match s.parse::<f64>() {
            Ok(v) if v > 0.0 && v.is_finite() => Ok(Sigma::Value(v)),
            _ => Err(format!("expected a positive number or `median`, got `{s}`")),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSystem {
    name: Spanned<String>,
    #[serde(default)]
    params: Option<Spanned<SystemParams>>,
    sampling_time: Option<Spanned<f64>>,
    noise_variance: Option<Spanned<f64>>,
    noise_diagonal: Option<Spanned<Vec<f64>>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSample {
    size: Option<Spanned<i64>>,
    state_box: Option<Spanned<BoxSpec>>,
    action_box: Option<Spanned<BoxSpec>>,
    path: Option<Spanned<String>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawKernel {
    family: Option<Spanned<KernelFamily>>,
    sigma: Option<Spanned<SigmaSpec>>,
    action_sigma: Option<Spanned<f64>>,
    lambda: Option<Spanned<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawActions {
    #[serde(rename = "box")]
    bounds: Option<Spanned<BoxSpec>>,
    per_dim: Option<Spanned<i64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTubes {
    safe: Option<Spanned<TubeSpec>>,
    target: Option<Spanned<TubeSpec>>,
}

/// Objective `sum_k w_k (y_k - g_k(t))^2 + r |u|^2`, with the goal `g(t)`
/// interpolated piecewise linearly between waypoints spread evenly over
/// `0..=N`, and the stage at `t = N` scaled by `terminal_weight`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveSpec {
    pub waypoints: Vec<Vec<f64>>,
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
    #[serde(default)]
    pub action_weight: f64,
    #[serde(default = "one")]
    pub terminal_weight: f64,
    /// Constant added to the state cost. Estimated weights do not sum to one,
    /// so unlike in exact dynamic programming this can change decisions.
    #[serde(default)]
    pub offset: f64,
}

fn one() -> f64 {
    1.0
}

/// Constraint `E[a . y + b . |y| + c] <= 0` on the next state.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintSpec {
    #[serde(default)]
    pub linear: Option<Vec<f64>>,
    #[serde(default)]
    pub absolute: Option<Vec<f64>>,
    #[serde(default)]
    pub offset: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawControl {
    initial_state: Spanned<Vec<f64>>,
    objective: Spanned<ObjectiveSpec>,
    #[serde(default)]
    constraints: Vec<Spanned<ConstraintSpec>>,
    #[serde(default)]
    sample_actions: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    per_dim: Option<Vec<i64>>,
    lower: Option<Vec<f64>>,
    upper: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawReach {
    grid: Option<Spanned<RawGrid>>,
    validate_points: Option<Spanned<Vec<Vec<f64>>>>,
    trials: Option<Spanned<i64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyName {
    Zero,
    ToraDefault,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawForward {
    initial_box: Spanned<BoxSpec>,
    trajectories: Option<Spanned<i64>>,
    #[serde(default)]
    policy: Option<Spanned<PolicyName>>,
    axes: Option<Spanned<Vec<i64>>>,
    grid_per_dim: Option<Spanned<i64>>,
    holdout: Option<Spanned<i64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BenchTarget {
    Fit,
    Reach,
    Control,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBench {
    target: Option<Spanned<BenchTarget>>,
    sizes: Option<Spanned<Vec<i64>>>,
    repeats: Option<Spanned<i64>>,
    dims: Option<Spanned<Vec<i64>>>,
    dim_size: Option<Spanned<i64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    algorithm: Spanned<Algorithm>,
    #[serde(default)]
    seed: u64,
    horizon: Option<Spanned<i64>>,
    system: Spanned<RawSystem>,
    sample: Option<Spanned<RawSample>>,
    kernel: Option<Spanned<RawKernel>>,
    actions: Option<Spanned<RawActions>>,
    tubes: Option<Spanned<RawTubes>>,
    control: Option<Spanned<RawControl>>,
    reach: Option<Spanned<RawReach>>,
    forward_reach: Option<Spanned<RawForward>>,
    bench: Option<Spanned<RawBench>>,
    output: Option<RawOutput>,
}

/// Where the transitions come from.
#[derive(Debug, Clone)]
pub enum SampleSource {
    Generate {
        size: usize,
        state_box: HyperRect,
        action_box: HyperRect,
    },
    File(PathBuf),
}

#[derive(Debug, Clone)]
pub struct ControlConfig {
    pub initial_state: Point,
    pub objective: ObjectiveSpec,
    pub constraints: Vec<ConstraintSpec>,
    pub sample_actions: bool,
}

#[derive(Debug, Clone)]
pub struct GridConfig {
    pub per_dim: Vec<usize>,
    pub bounds: HyperRect,
}

#[derive(Debug, Clone)]
pub struct ReachConfig {
    pub grid: GridConfig,
    pub validate_points: Vec<Point>,
    pub trials: usize,
}

#[derive(Debug, Clone)]
pub struct ForwardConfig {
    pub initial_box: HyperRect,
    pub trajectories: usize,
    pub policy: PolicyName,
    pub axes: (usize, usize),
    pub grid_per_dim: usize,
    pub holdout: usize,
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub target: BenchTarget,
    pub sizes: Vec<usize>,
    pub repeats: usize,
    pub dims: Vec<usize>,
    pub dim_size: usize,
}

/// A validated scenario.
#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub horizon: usize,
    pub system: SystemSpec,
    pub sample: Option<SampleSource>,
    pub kernel_family: KernelFamily,
    pub sigma: Sigma,
    /// Action-kernel bandwidth; the state bandwidth when absent.
    pub action_sigma: Option<f64>,
    pub lambda: Option<f64>,
    pub action_box: HyperRect,
    pub per_dim: usize,
    pub safe: Tube,
    pub target: Tube,
    pub control: Option<ControlConfig>,
    pub reach: Option<ReachConfig>,
    pub forward: Option<ForwardConfig>,
    pub bench: Option<BenchConfig>,
    pub out_dir: PathBuf,
}

struct Ctx<'a> {
    src: &'a str,
}

impl Ctx<'_> {
    fn line(&self, span: &Range<usize>) -> usize {
        let end = span.start.min(self.src.len());
        self.src[..end].matches('\n').count() + 1
    }

    fn err<T>(&self, span: &Range<usize>, msg: impl Into<String>) -> Result<T, ConfigError> {
        Err(ConfigError::new(Some(self.line(span)), msg))
    }

    fn count(&self, v: &Spanned<i64>, what: &str, min: i64) -> Result<usize, ConfigError> {
        let n = *v.get_ref();
        if n < min {
            return self.err(&v.span(), format!("{what} must be at least {min}, got {n}"));
        }
        Ok(n as usize)
    }

    fn rect(&self, b: &Spanned<BoxSpec>, dim: usize, what: &str) -> Result<HyperRect, ConfigError> {
        let spec = b.get_ref();
        if spec.lower.len() != dim || spec.upper.len() != dim {
            return self.err(
                &b.span(),
                format!(
                    "{what} has dimension {}/{} but {dim} is required",
                    spec.lower.len(),
                    spec.upper.len()
                ),
            );
        }
        HyperRect::new(spec.lower.clone(), spec.upper.clone())
            .or_else(|e| self.err(&b.span(), format!("{what}: {e}")))
    }

    fn tube(&self, t: &Spanned<TubeSpec>, dim: usize, horizon: usize, what: &str) -> Result<Tube, ConfigError> {
        let span = t.span();
        let rect = |b: &BoxSpec| self.rect(&Spanned::new(span.clone(), b.clone()), dim, what);
        match t.get_ref() {
            TubeSpec::Constant(b) => Ok(Tube::constant(rect(b)?, horizon)),
            TubeSpec::PerStep(list) => {
                if list.len() != horizon + 1 {
                    return self.err(
                        &span,
                        format!("{what} lists {} sets but horizon {horizon} needs {}", list.len(), horizon + 1),
                    );
                }
                let sets = list.iter().map(rect).collect::<Result<Vec<_>, _>>()?;
                Tube::new(sets).or_else(|e| self.err(&span, format!("{what}: {e}")))
            }
        }
    }
}

fn missing(section: &str) -> ConfigError {
    ConfigError::new(None, format!("missing required section or key `{section}`"))
}

impl ScenarioConfig {
    /// Parses and validates a scenario document.
    pub fn parse(src: &str) -> Result<Self, ConfigError> {
        let raw: RawConfig = toml::from_str(src).map_err(|e| {
            let ctx = Ctx { src };
            ConfigError::new(e.span().map(|s| ctx.line(&s)), e.message().trim())
        })?;
        Self::validate(raw, src)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ConfigError> {
        let src = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new(None, format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&src).map_err(|mut e| {
            e.file = Some(path.to_path_buf());
            e
        })
    }

    fn validate(raw: RawConfig, src: &str) -> Result<Self, ConfigError> {
        let cx = Ctx { src };
        let algorithm = *raw.algorithm.get_ref();

        let horizon = match &raw.horizon {
            Some(h) => cx.count(h, "horizon", 1)?,
            None if algorithm == Algorithm::ControlFwd => 1,
            None => return Err(missing("horizon")),
        };

        let rs = raw.system.get_ref();
        let mut params = rs.params.as_ref().map(|p| p.get_ref().clone()).unwrap_or_default();
        if let Some(ts) = &rs.sampling_time {
            params.insert("sampling_time".into(), *ts.get_ref());
        }
        if let Some(v) = &rs.noise_variance {
            params.insert("noise_variance".into(), *v.get_ref());
        }
        let param_span = rs.params.as_ref().map(|p| p.span()).unwrap_or(rs.name.span());
        let mut system = make_system(rs.name.get_ref(), &params).or_else(|e| match e {
            crate::Error::UnknownSystem { .. } => cx.err(&rs.name.span(), e.to_string()),
            _ => cx.err(&param_span, e.to_string()),
        })?;
        let n = system.state_dim();
        let m = system.action_dim();
        if let Some(d) = &rs.noise_diagonal {
            if rs.noise_variance.is_some() {
                return cx.err(&d.span(), "give either noise_variance or noise_diagonal, not both");
            }
            if d.get_ref().len() != n {
                return cx.err(&d.span(), format!("noise_diagonal has {} entries, state dimension is {n}", d.get_ref().len()));
            }
            let noise = NoiseSpec::diagonal(d.get_ref()).or_else(|e| cx.err(&d.span(), e.to_string()))?;
            system = system.with_noise(noise).or_else(|e| cx.err(&d.span(), e.to_string()))?;
        }

        let sample = match &raw.sample {
            None => None,
            Some(s) => {
                let r = s.get_ref();
                match (&r.path, &r.size) {
                    (Some(p), None) => Some(SampleSource::File(PathBuf::from(p.get_ref()))),
                    (Some(p), Some(_)) => return cx.err(&p.span(), "give either sample.path or sample.size, not both"),
                    (None, Some(size)) => {
                        let size = cx.count(size, "sample.size", 1)?;
                        let state_box = match &r.state_box {
                            Some(b) => cx.rect(b, n, "sample.state_box")?,
                            None => return cx.err(&s.span(), "sample.state_box is required to generate a sample"),
                        };
                        let action_box = match &r.action_box {
                            Some(b) => cx.rect(b, m, "sample.action_box")?,
                            None => system.action_box().clone(),
                        };
                        Some(SampleSource::Generate { size, state_box, action_box })
                    }
                    (None, None) => return cx.err(&s.span(), "sample needs `size` or `path`"),
                }
            }
        };

        let (kernel_family, sigma, action_sigma, lambda) = match &raw.kernel {
            None => (KernelFamily::GaussianRbf, Sigma::Median, None, None),
            Some(k) => {
                let r = k.get_ref();
                let family = r.family.as_ref().map(|f| *f.get_ref()).unwrap_or(KernelFamily::GaussianRbf);
                let sigma = match &r.sigma {
                    None => Sigma::Median,
                    Some(s) => match s.get_ref() {
                        SigmaSpec::Value(v) => {
                            if !(*v > 0.0 && v.is_finite()) {
                                return cx.err(&s.span(), format!("kernel.sigma must be positive, got {v}"));
                            }
                            Sigma::Value(*v)
                        }
                        SigmaSpec::Named(name) => name.parse().or_else(|e: String| cx.err(&s.span(), format!("kernel.sigma: {e}")))?,
                    },
                };
                let lambda = match &r.lambda {
                    Some(l) if !(*l.get_ref() > 0.0 && l.get_ref().is_finite()) => {
                        return cx.err(&l.span(), format!("kernel.lambda must be positive, got {}", l.get_ref()))
                    }
                    Some(l) => Some(*l.get_ref()),
                    None => None,
                };
                let action_sigma = match &r.action_sigma {
                    Some(a) if !(*a.get_ref() > 0.0 && a.get_ref().is_finite()) => {
                        return cx.err(&a.span(), format!("kernel.action_sigma must be positive, got {}", a.get_ref()))
                    }
                    Some(a) => Some(*a.get_ref()),
                    None => None,
                };
                (family, sigma, action_sigma, lambda)
            }
        };

        let (action_box, per_dim) = match &raw.actions {
            None => (system.action_box().clone(), 5),
            Some(a) => {
                let r = a.get_ref();
                let b = match &r.bounds {
                    Some(b) => cx.rect(b, m, "actions.box")?,
                    None => system.action_box().clone(),
                };
                let p = match &r.per_dim {
                    Some(p) => cx.count(p, "actions.per_dim", 1)?,
                    None => 5,
                };
                (b, p)
            }
        };

        let (safe, target) = match &raw.tubes {
            None => (
                Tube::constant(HyperRect::unbounded(n), horizon),
                Tube::constant(HyperRect::unbounded(n), horizon),
            ),
            Some(t) => {
                let r = t.get_ref();
                let safe = match &r.safe {
                    Some(s) => cx.tube(s, n, horizon, "tubes.safe")?,
                    None => Tube::constant(HyperRect::unbounded(n), horizon),
                };
                let target = match &r.target {
                    Some(s) => cx.tube(s, n, horizon, "tubes.target")?,
                    None => Tube::constant(HyperRect::unbounded(n), horizon),
                };
                (safe, target)
            }
        };

        let control = match &raw.control {
            None if algorithm.is_control() => return Err(missing("control")),
            None => None,
            Some(c) => {
                let r = c.get_ref();
                if r.initial_state.get_ref().len() != n {
                    return cx.err(&r.initial_state.span(), format!("control.initial_state has {} entries, state dimension is {n}", r.initial_state.get_ref().len()));
                }
                let obj = r.objective.get_ref();
                let os = r.objective.span();
                if obj.waypoints.is_empty() {
                    return cx.err(&os, "control.objective.waypoints must list at least one point");
                }
                let wdim = obj.weights.as_ref().map_or(n, |w| w.len());
                if wdim != n {
                    return cx.err(&os, format!("control.objective.weights has {wdim} entries, state dimension is {n}"));
                }
                if let Some(bad) = obj.waypoints.iter().find(|w| w.len() != n) {
                    return cx.err(&os, format!("waypoint has {} entries, state dimension is {n}", bad.len()));
                }
                if !(obj.terminal_weight >= 0.0 && obj.action_weight >= 0.0) {
                    return cx.err(&os, "objective weights must be non-negative");
                }
                for con in &r.constraints {
                    let cs = con.get_ref();
                    for (name, v) in [("linear", &cs.linear), ("absolute", &cs.absolute)] {
                        if let Some(v) = v {
                            if v.len() != n {
                                return cx.err(&con.span(), format!("constraint `{name}` has {} entries, state dimension is {n}", v.len()));
                            }
                        }
                    }
                }
                Some(ControlConfig {
                    initial_state: r.initial_state.get_ref().clone(),
                    objective: obj.clone(),
                    constraints: r.constraints.iter().map(|c| c.get_ref().clone()).collect(),
                    sample_actions: r.sample_actions,
                })
            }
        };

        let reach = match &raw.reach {
            None if algorithm.problem().is_none() => None,
            other => {
                let r = other.as_ref().map(|r| r.get_ref());
                let grid = match r.and_then(|r| r.grid.as_ref()) {
                    Some(g) => {
                        let gr = g.get_ref();
                        let per_dim = match &gr.per_dim {
                            Some(p) if p.len() == n && p.iter().all(|&k| k >= 1) => p.iter().map(|&k| k as usize).collect(),
                            Some(_) => return cx.err(&g.span(), format!("reach.grid.per_dim needs {n} positive entries")),
                            None => default_grid(n),
                        };
                        let bounds = match (&gr.lower, &gr.upper) {
                            (Some(lo), Some(hi)) => {
                                cx.rect(&Spanned::new(g.span(), BoxSpec { lower: lo.clone(), upper: hi.clone() }), n, "reach.grid")?
                            }
                            (None, None) => safe.at(0).clone(),
                            _ => return cx.err(&g.span(), "reach.grid needs both lower and upper"),
                        };
                        GridConfig { per_dim, bounds }
                    }
                    None => GridConfig { per_dim: default_grid(n), bounds: safe.at(0).clone() },
                };
                if grid.bounds.lower().iter().chain(grid.bounds.upper()).any(|v| !v.is_finite()) {
                    let span = r.and_then(|r| r.grid.as_ref()).map(|g| g.span()).unwrap_or(0..0);
                    return cx.err(&span, "reach grid needs finite bounds (set tubes.safe or reach.grid)");
                }
                let validate_points = match r.and_then(|r| r.validate_points.as_ref()) {
                    Some(v) => {
                        if v.get_ref().iter().any(|p| p.len() != n) {
                            return cx.err(&v.span(), format!("reach.validate_points entries need {n} coordinates"));
                        }
                        v.get_ref().clone()
                    }
                    None => interior_points(safe.at(0)),
                };
                let trials = match r.and_then(|r| r.trials.as_ref()) {
                    Some(k) => cx.count(k, "reach.trials", 1)?,
                    None => 2000,
                };
                Some(ReachConfig { grid, validate_points, trials })
            }
        };

        let forward = match &raw.forward_reach {
            None if algorithm == Algorithm::ForwardReach => return Err(missing("forward_reach")),
            None => None,
            Some(f) => {
                let r = f.get_ref();
                let initial_box = cx.rect(&r.initial_box, n, "forward_reach.initial_box")?;
                let trajectories = match &r.trajectories {
                    Some(k) => cx.count(k, "forward_reach.trajectories", 1)?,
                    None => 50,
                };
                let axes = match &r.axes {
                    Some(a) => {
                        let v = a.get_ref();
                        if v.len() != 2 || v.iter().any(|&k| k < 0 || k as usize >= n) || v[0] == v[1] {
                            return cx.err(&a.span(), format!("forward_reach.axes needs two distinct indices below {n}"));
                        }
                        (v[0] as usize, v[1] as usize)
                    }
                    None if n >= 2 => (0, 1),
                    None => return cx.err(&f.span(), "forward_reach.axes needs a 2-D state"),
                };
                let grid_per_dim = match &r.grid_per_dim {
                    Some(k) => cx.count(k, "forward_reach.grid_per_dim", 1)?,
                    None => 25,
                };
                let holdout = match &r.holdout {
                    Some(k) => cx.count(k, "forward_reach.holdout", 0)?,
                    None => 0,
                };
                let policy = r.policy.as_ref().map(|p| *p.get_ref()).unwrap_or(PolicyName::Zero);
                if policy == PolicyName::ToraDefault && (n != 4 || m != 1) {
                    let span = r.policy.as_ref().map(|p| p.span()).unwrap_or(f.span());
                    return cx.err(&span, "the tora-default policy needs a 4-state, 1-action system");
                }
                Some(ForwardConfig { initial_box, trajectories, policy, axes, grid_per_dim, holdout })
            }
        };

        let bench = match &raw.bench {
            None => None,
            Some(b) => {
                let r = b.get_ref();
                let list = |v: &Option<Spanned<Vec<i64>>>, what: &str| -> Result<Vec<usize>, ConfigError> {
                    match v {
                        None => Ok(Vec::new()),
                        Some(v) if v.get_ref().iter().all(|&k| k >= 1) => Ok(v.get_ref().iter().map(|&k| k as usize).collect()),
                        Some(v) => cx.err(&v.span(), format!("{what} entries must be positive")),
                    }
                };
                let sizes = list(&r.sizes, "bench.sizes")?;
                let dims = list(&r.dims, "bench.dims")?;
                if sizes.is_empty() && dims.is_empty() {
                    return cx.err(&b.span(), "bench needs `sizes`, `dims`, or both");
                }
                let target = r.target.as_ref().map(|t| *t.get_ref()).unwrap_or(BenchTarget::Fit);
                if target != BenchTarget::Fit && !dims.is_empty() {
                    let span = r.target.as_ref().map(|t| t.span()).unwrap_or(b.span());
                    return cx.err(&span, "the dimension sweep only supports target = \"fit\"");
                }
                if target == BenchTarget::Control && control.is_none() {
                    return Err(missing("control"));
                }
                if !sizes.is_empty() && !matches!(sample, Some(SampleSource::Generate { .. })) {
                    return cx.err(&b.span(), "bench.sizes needs a generated sample (sample.state_box)");
                }
                Some(BenchConfig {
                    target,
                    sizes,
                    repeats: match &r.repeats {
                        Some(k) => cx.count(k, "bench.repeats", 1)?,
                        None => 3,
                    },
                    dims,
                    dim_size: match &r.dim_size {
                        Some(k) => cx.count(k, "bench.dim_size", 1)?,
                        None => 1000,
                    },
                })
            }
        };

        if (algorithm.is_control() || algorithm.problem().is_some()) && sample.is_none() {
            return Err(missing("sample"));
        }

        Ok(ScenarioConfig {
            algorithm,
            seed: raw.seed,
            horizon,
            system,
            sample,
            kernel_family,
            sigma,
            action_sigma,
            lambda,
            action_box,
            per_dim,
            safe,
            target,
            control,
            reach,
            forward,
            bench,
            out_dir: PathBuf::from(raw.output.and_then(|o| o.dir).unwrap_or_else(|| "out".into())),
        })
    }

    pub fn kernel(&self, sigma: f64) -> crate::Result<KernelSpec> {
        KernelSpec::new(self.kernel_family, sigma)
    }

    pub fn action_kernel(&self, state_sigma: f64) -> crate::Result<KernelSpec> {
        KernelSpec::new(self.kernel_family, self.action_sigma.unwrap_or(state_sigma))
    }
}

fn default_grid(n: usize) -> Vec<usize> {
    match n {
        1 => vec![100],
        2 => vec![100, 100],
        _ => vec![10; n],
    }
}

/// A 5 x 5 lattice strictly inside the first two coordinates of `set`,
/// other coordinates at the midpoint; empty if `set` is unbounded.
fn interior_points(set: &HyperRect) -> Vec<Point> {
    let (lo, hi) = (set.lower(), set.upper());
    if lo.iter().chain(hi).any(|v| !v.is_finite()) {
        return Vec::new();
    }
    let mid = set.midpoint();
    let at = |d: usize, k: usize| lo[d] + (hi[d] - lo[d]) * (k as f64 + 1.0) / 6.0;
    let mut out = Vec::new();
    for a in 0..5 {
        if lo.len() == 1 {
            out.push(vec![at(0, a)]);
            continue;
        }
        for b in 0..5 {
            let mut p = mid.clone();
            p[0] = at(0, a);
            p[1] = at(1, b);
            out.push(p);
        }
    }
    out
}
