//! The `kernelctrl` command-line front end.
//!
//! Every command reads a scenario file (see [`config`]), runs it, and writes
//! CSV files into the output directory. Data files are byte-identical across
//! runs with the same seed; wall-clock times go to separate `*timing.csv`
//! files.
//!
//! Exit codes: 0 success, 2 configuration error, 3 runtime or numerical
//! error, 4 infeasible decision LP.

pub mod config;
pub mod io;

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use crate::control::{Controller, CostSpec, StageCost};
use crate::embedding::{default_regularization, Embedding, TransitionSample};
use crate::kernels::median_distance;
use crate::reach::{fit_forward_reach, SRModel, DEFAULT_CHUNK};
use crate::sampling::{cartesian, draw_transitions, draw_trajectories, grid_actions, linspace, SeededRng};
use crate::systems::{make_system, tora_default_policy, SystemParams, SystemSpec, Trajectory};
use crate::validate::mc_safety;
use crate::{Error, HyperRect, Point};

pub use config::{Algorithm, ConfigError, ScenarioConfig, Sigma};
use config::{BenchTarget, ControlConfig, ObjectiveSpec, PolicyName, SampleSource};
use io::{fmt_f64, numbered, Summary, Table};

/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "KERNELCTRL_THREADS";

/// Points used for the median bandwidth heuristic.
const MEDIAN_POINTS: usize = 500;

// rng streams, one per independent consumer of randomness
const STREAM_SAMPLE: u64 = 1;
const STREAM_ROLLOUT: u64 = 2;
const STREAM_MC: u64 = 3;
const STREAM_FORWARD: u64 = 4;
const STREAM_HOLDOUT: u64 = 5;
const STREAM_BENCH: u64 = 100;

#[derive(Debug, Parser)]
#[command(name = "kernelctrl", version, about = "Kernel-embedding stochastic control and reachability")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a transition sample and write it as CSV.
    Sample(RunArgs),
    /// Run a forward or backward controller in closed loop.
    Control(RunArgs),
    /// Safety probabilities on an evaluation grid.
    Reach(RunArgs),
    /// Per-step support classifiers from simulated trajectories.
    ForwardReach(RunArgs),
    /// Monte-Carlo check of a reach or control scenario.
    Validate(RunArgs),
    /// Fit-time scaling over sample size and state dimension.
    Bench(RunArgs),
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Scenario file (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the scenario seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory (default: the scenario's `output.dir`, else `out`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Monte-Carlo trials for validation columns.
    #[arg(long, value_name = "K")]
    pub validate: Option<usize>,
    /// Kernel bandwidth, a positive number or `median`.
    #[arg(long, value_name = "VAL|median")]
    pub sigma: Option<Sigma>,
    /// Maximum evaluation points per block.
    #[arg(long)]
    pub chunk: Option<usize>,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Run(#[from] Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Run(Error::Infeasible { .. }) => 4,
            CliError::Run(Error::Config(_)) => 2,
            CliError::Run(_) => 3,
        }
    }
}

fn config_error(message: impl Into<String>) -> CliError {
    CliError::Config(ConfigError::new(None, message))
}

/// Parses the process arguments, runs, and returns the exit code.
pub fn main_from_env() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(files) => {
            for f in files {
                println!("wrote {}", f.display());
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Applies [`THREADS_ENV`] to the global thread pool. Only the first call in
/// a process has an effect.
pub fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n >= 1)
        .ok_or_else(|| config_error(format!("{THREADS_ENV} must be a positive integer, got `{raw}`")))?;
    // a pool that already exists keeps its size
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Runs one command; returns the files written.
pub fn run(cli: &Cli) -> Result<Vec<PathBuf>, CliError> {
    configure_threads()?;
    let (args, kind) = match &cli.command {
        Command::Sample(a) => (a, "sample"),
        Command::Control(a) => (a, "control"),
        Command::Reach(a) => (a, "reach"),
        Command::ForwardReach(a) => (a, "forward-reach"),
        Command::Validate(a) => (a, "validate"),
        Command::Bench(a) => (a, "bench"),
    };
    let session = Session::open(args)?;
    match kind {
        "sample" => session.cmd_sample(),
        "control" => session.cmd_control(),
        "reach" => session.cmd_reach(),
        "forward-reach" => session.cmd_forward_reach(),
        "validate" => session.cmd_validate(),
        _ => session.cmd_bench(),
    }
}

/// A loaded scenario plus command-line overrides.
pub struct Session {
    pub cfg: ScenarioConfig,
    pub seed: u64,
    pub out: PathBuf,
    pub trials: Option<usize>,
    pub chunk: usize,
    base_dir: PathBuf,
}

impl Session {
    pub fn open(args: &RunArgs) -> Result<Self, CliError> {
        let mut cfg = ScenarioConfig::load(&args.config)?;
        if let Some(s) = args.sigma {
            cfg.sigma = s;
        }
        if args.chunk == Some(0) {
            return Err(config_error("--chunk must be at least 1"));
        }
        if args.validate == Some(0) {
            return Err(config_error("--validate must be at least 1"));
        }
        Ok(Session {
            seed: args.seed.unwrap_or(cfg.seed),
            out: args.out.clone().unwrap_or_else(|| cfg.out_dir.clone()),
            trials: args.validate,
            chunk: args.chunk.unwrap_or(DEFAULT_CHUNK),
            base_dir: args.config.parent().map(Path::to_path_buf).unwrap_or_default(),
            cfg,
        })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn rng(&self, stream: u64) -> SeededRng {
        SeededRng::with_stream(self.seed, stream)
    }

    pub fn sample(&self) -> Result<TransitionSample, CliError> {
        match &self.cfg.sample {
            None => Err(config_error("this command needs a [sample] section")),
            Some(SampleSource::File(p)) => {
                let p = if p.is_absolute() { p.clone() } else { self.base_dir.join(p) };
                let s = io::read_sample(&p)?;
                if s.state_dim() != self.cfg.system.state_dim() || s.action_dim() != self.cfg.system.action_dim() {
                    return Err(config_error(format!(
                        "{} holds {}-state/{}-action transitions, system `{}` needs {}/{}",
                        p.display(),
                        s.state_dim(),
                        s.action_dim(),
                        self.cfg.system.name(),
                        self.cfg.system.state_dim(),
                        self.cfg.system.action_dim()
                    )));
                }
                Ok(s)
            }
            Some(SampleSource::Generate { size, state_box, action_box }) => Ok(draw_transitions(
                &self.cfg.system,
                state_box,
                action_box,
                *size,
                &mut self.rng(STREAM_SAMPLE),
            )?),
        }
    }

    fn sigma_for<P: AsRef<[f64]>>(&self, points: &[P]) -> Result<f64, CliError> {
        match self.cfg.sigma {
            Sigma::Value(v) => Ok(v),
            Sigma::Median => median_distance(points, MEDIAN_POINTS)
                .filter(|&d| d > 0.0)
                .ok_or_else(|| CliError::Run(Error::InvalidParameter("median bandwidth is undefined for this sample".into()))),
        }
    }

    fn embedding(&self, sample: TransitionSample) -> Result<(Embedding, f64), CliError> {
        let sigma = self.sigma_for(sample.states())?;
        let k = self.cfg.kernel(sigma)?;
        let l = self.cfg.action_kernel(sigma)?;
        let lambda = self.cfg.lambda.unwrap_or_else(|| default_regularization(sample.len()));
        Ok((Embedding::fit(sample, k, l, lambda)?, sigma))
    }

    fn actions(&self) -> Result<crate::ActionGrid, CliError> {
        Ok(grid_actions(&self.cfg.action_box, self.cfg.per_dim)?)
    }

    pub fn cmd_sample(&self) -> Result<Vec<PathBuf>, CliError> {
        let s = self.sample()?;
        let p = self.path("sample.csv");
        io::write_sample(&s, &p)?;
        Ok(vec![p])
    }

    fn controller(&self, emb: Embedding) -> Result<(Controller, Costs), CliError> {
        let cc = self
            .cfg
            .control
            .as_ref()
            .ok_or_else(|| config_error("this command needs a [control] section"))?;
        let costs = Costs::new(cc, self.cfg.horizon);
        let spec = costs.spec();
        let actions = self.actions()?;
        let ctrl = match self.cfg.algorithm {
            Algorithm::ControlBwd => Controller::backward(emb, actions, spec, self.cfg.horizon)?,
            _ => Controller::forward(emb, actions, spec)?,
        };
        Ok((ctrl, costs))
    }

    fn require_control(&self) -> Result<&'static str, CliError> {
        match self.cfg.algorithm {
            Algorithm::ControlFwd => Ok("fwd"),
            Algorithm::ControlBwd => Ok("bwd"),
            a => Err(config_error(format!("`control` needs algorithm control-fwd or control-bwd, scenario has {a:?}"))),
        }
    }

    pub fn cmd_control(&self) -> Result<Vec<PathBuf>, CliError> {
        let tag = self.require_control()?;
        let cc = self.cfg.control.as_ref().expect("validated");
        let t0 = Instant::now();
        let (emb, sigma) = self.embedding(self.sample()?)?;
        let m = emb.len();
        let (ctrl, costs) = self.controller(emb)?;
        let fit_time = t0.elapsed().as_secs_f64();

        let t1 = Instant::now();
        let mut rng = self.rng(STREAM_ROLLOUT);
        let tr = rollout(&self.cfg.system, &ctrl, cc, self.cfg.horizon, &mut rng)?;
        let act_time = t1.elapsed().as_secs_f64();

        let n = self.cfg.system.state_dim();
        let mu = self.cfg.system.action_dim();
        let mut header = vec!["t".to_string()];
        header.extend(numbered("x", n));
        header.extend(numbered("u", mu));
        header.extend(numbered("g", n));
        let mut table = Table::new(&header);
        for (t, x) in tr.states.iter().enumerate() {
            let mut cells = vec![t.to_string()];
            cells.extend(x.iter().map(|&v| fmt_f64(v)));
            match tr.actions.get(t) {
                Some(u) => cells.extend(u.iter().map(|&v| fmt_f64(v))),
                None => cells.extend(std::iter::repeat_n(String::new(), mu)),
            }
            cells.extend(costs.goal(t).iter().map(|&v| fmt_f64(v)));
            table.push_cells(&cells);
        }

        let report = costs.report(&tr);
        let mut summary = Summary::new();
        summary
            .text("algorithm", format!("control-{tag}"))
            .text("system", self.cfg.system.name())
            .text("sample_size", m)
            .num("sigma", sigma)
            .text("horizon", self.cfg.horizon)
            .num("terminal_distance", report.terminal_distance)
            .num("max_constraint_value", report.max_constraint)
            .text("constraint_violations", report.violations);
        if let Some(k) = self.trials {
            let stats = self.mc_control(&ctrl, cc, &costs, k)?;
            summary
                .text("mc_trials", k)
                .num("mc_mean_terminal_distance", stats.iter().map(|r| r.terminal_distance).sum::<f64>() / k as f64)
                .num("mc_violation_rate", stats.iter().filter(|r| r.violations > 0).count() as f64 / k as f64);
        }
        let mut timing = Table::new(&["phase", "seconds"]);
        timing.push_cells(&["fit".to_string(), fmt_f64(fit_time)]);
        timing.push_cells(&["act".to_string(), fmt_f64(act_time)]);

        let files = [
            (format!("control_{tag}_trajectory.csv"), table.render()),
            (format!("control_{tag}_summary.csv"), summary.render().to_string()),
            (format!("control_{tag}_timing.csv"), timing.render()),
        ];
        self.write_all(&files)
    }

    fn mc_control(&self, ctrl: &Controller, cc: &ControlConfig, costs: &Costs, k: usize) -> Result<Vec<RolloutReport>, CliError> {
        let base = self.rng(STREAM_MC);
        let out = (0..k as u64)
            .into_par_iter()
            .map(|i| {
                let mut r = base.derive(i);
                let tr = rollout(&self.cfg.system, ctrl, cc, self.cfg.horizon, &mut r)?;
                Ok(costs.report(&tr))
            })
            .collect::<crate::Result<Vec<_>>>()?;
        Ok(out)
    }

    fn write_all(&self, files: &[(String, String)]) -> Result<Vec<PathBuf>, CliError> {
        std::fs::create_dir_all(&self.out).map_err(Error::from)?;
        let mut written = Vec::new();
        for (name, body) in files {
            let p = self.path(name);
            std::fs::write(&p, body).map_err(Error::from)?;
            written.push(p);
        }
        Ok(written)
    }

    fn reach_model(&self) -> Result<(SRModel, &'static str), CliError> {
        let problem = self
            .cfg
            .algorithm
            .problem()
            .ok_or_else(|| config_error("this command needs algorithm reach-tht or reach-fht"))?;
        let (emb, _) = self.embedding(self.sample()?)?;
        let model = SRModel::fit_chunked(
            emb,
            self.actions()?,
            self.cfg.safe.clone(),
            self.cfg.target.clone(),
            self.cfg.horizon,
            problem,
            self.chunk,
        )?;
        Ok((model, if problem == crate::Problem::Tht { "tht" } else { "fht" }))
    }

    fn reach_validation(&self, model: &SRModel, trials: usize) -> Result<Table, CliError> {
        let rc = self.cfg.reach.as_ref().expect("validated");
        let n = self.cfg.system.state_dim();
        let pts = &rc.validate_points;
        if pts.is_empty() {
            return Err(config_error("no validation points: set reach.validate_points or a bounded tubes.safe"));
        }
        let pred = model.predict(pts)?;
        let mut header = numbered("x", n);
        header.extend(["prob", "mc", "half_width"].map(String::from));
        let mut table = Table::new(&header);
        let base = self.rng(STREAM_MC);
        for (k, (x, p)) in pts.iter().zip(&pred).enumerate() {
            let rep = mc_safety(
                &self.cfg.system,
                |t, x| model.greedy_action(t, x),
                x,
                model.safe(),
                model.target(),
                self.cfg.horizon,
                model.problem(),
                trials,
                &base.derive(k as u64),
            )?;
            let mut row = x.clone();
            row.extend([*p, rep.estimate, rep.half_width]);
            table.push(&row);
        }
        Ok(table)
    }

    pub fn cmd_reach(&self) -> Result<Vec<PathBuf>, CliError> {
        let t0 = Instant::now();
        let (model, tag) = self.reach_model()?;
        let fit_time = t0.elapsed().as_secs_f64();
        let rc = self.cfg.reach.as_ref().expect("validated");
        let axes: Vec<Vec<f64>> = rc
            .grid
            .bounds
            .lower()
            .iter()
            .zip(rc.grid.bounds.upper())
            .zip(&rc.grid.per_dim)
            .map(|((&lo, &hi), &k)| linspace(lo, hi, k))
            .collect();
        let grid = cartesian(&axes);
        let t1 = Instant::now();
        let probs = model.predict(&grid)?;
        let eval_time = t1.elapsed().as_secs_f64();

        let mut header = numbered("x", self.cfg.system.state_dim());
        header.push("prob".into());
        let mut table = Table::new(&header);
        for (x, p) in grid.iter().zip(&probs) {
            let mut row = x.clone();
            row.push(*p);
            table.push(&row);
        }
        let mut files = vec![(format!("reach_{tag}.csv"), table.render())];
        if let Some(k) = self.trials {
            files.push((format!("reach_{tag}_validation.csv"), self.reach_validation(&model, k)?.render()));
        }
        let mut timing = Table::new(&["phase", "seconds"]);
        timing.push_cells(&["fit".to_string(), fmt_f64(fit_time)]);
        timing.push_cells(&["evaluate".to_string(), fmt_f64(eval_time)]);
        files.push((format!("reach_{tag}_timing.csv"), timing.render()));
        self.write_all(&files)
    }

    pub fn cmd_validate(&self) -> Result<Vec<PathBuf>, CliError> {
        if self.cfg.algorithm.is_control() {
            let tag = self.require_control()?;
            let cc = self.cfg.control.as_ref().expect("validated");
            let k = self.trials.unwrap_or(100);
            let (emb, _) = self.embedding(self.sample()?)?;
            let (ctrl, costs) = self.controller(emb)?;
            let stats = self.mc_control(&ctrl, cc, &costs, k)?;
            let mut table = Table::new(&["trial", "terminal_distance", "max_constraint_value", "constraint_violations"]);
            for (i, r) in stats.iter().enumerate() {
                table.push_cells(&[
                    i.to_string(),
                    fmt_f64(r.terminal_distance),
                    fmt_f64(r.max_constraint),
                    r.violations.to_string(),
                ]);
            }
            return self.write_all(&[(format!("control_{tag}_validation.csv"), table.render())]);
        }
        let (model, tag) = self.reach_model()?;
        let k = self.trials.unwrap_or(self.cfg.reach.as_ref().expect("validated").trials);
        let table = self.reach_validation(&model, k)?;
        self.write_all(&[(format!("reach_{tag}_validation.csv"), table.render())])
    }

    pub fn cmd_forward_reach(&self) -> Result<Vec<PathBuf>, CliError> {
        let fc = self
            .cfg
            .forward
            .as_ref()
            .filter(|_| self.cfg.algorithm == Algorithm::ForwardReach)
            .ok_or_else(|| config_error("`forward-reach` needs algorithm forward-reach and a [forward_reach] section"))?;
        let sys = &self.cfg.system;
        let m = sys.action_dim();
        let policy = move |_: usize, x: &[f64]| -> crate::Result<Point> {
            Ok(match fc.policy {
                PolicyName::Zero => vec![0.0; m],
                PolicyName::ToraDefault => tora_default_policy(x),
            })
        };
        let horizon = self.cfg.horizon;
        let t0 = Instant::now();
        let train = draw_trajectories(sys, &fc.initial_box, policy, horizon, fc.trajectories, &self.rng(STREAM_FORWARD))?;
        let all: Vec<&[f64]> = train.iter().flat_map(|t| t.states.iter().map(|s| s.as_slice())).collect();
        let sigma = self.sigma_for(&all)?;
        let lambda = self.cfg.lambda.unwrap_or_else(|| default_regularization(fc.trajectories));
        let classifiers = fit_forward_reach(&train, sigma, lambda)?;
        let fit_time = t0.elapsed().as_secs_f64();

        let holdout_count = self.trials.unwrap_or(fc.holdout);
        let holdout = if holdout_count > 0 {
            Some(draw_trajectories(sys, &fc.initial_box, policy, horizon, holdout_count, &self.rng(STREAM_HOLDOUT))?)
        } else {
            None
        };
        let contained = |cls: &crate::SupportClassifier, trs: &[Trajectory], t: usize| -> crate::Result<f64> {
            let mut inside = 0usize;
            for tr in trs {
                if cls.classify(&tr.states[t])?.1 {
                    inside += 1;
                }
            }
            Ok(inside as f64 / trs.len() as f64)
        };

        let mut header = vec!["t", "tau", "train_in_set"];
        if holdout.is_some() {
            header.push("holdout_in_set");
        }
        let mut taus = Table::new(&header);
        let (mut min_train, mut mean_hold) = (1.0f64, 0.0);
        for (t, cls) in classifiers.iter().enumerate() {
            let tr_frac = contained(cls, &train, t)?;
            min_train = min_train.min(tr_frac);
            let mut cells = vec![t.to_string(), fmt_f64(cls.tau()), fmt_f64(tr_frac)];
            if let Some(h) = &holdout {
                let f = contained(cls, h, t)?;
                mean_hold += f / classifiers.len() as f64;
                cells.push(fmt_f64(f));
            }
            taus.push_cells(&cells);
        }

        let (a, b) = fc.axes;
        let mut grid = Table::new(&["t".to_string(), format!("x{a}"), format!("x{b}"), "score".into(), "in_set".into()]);
        for (t, cls) in classifiers.iter().enumerate() {
            let pts = cls.points();
            let n = pts[0].len();
            let mean: Point = (0..n).map(|d| pts.iter().map(|p| p[d]).sum::<f64>() / pts.len() as f64).collect();
            let span = |d: usize| {
                let lo = pts.iter().map(|p| p[d]).fold(f64::INFINITY, f64::min);
                let hi = pts.iter().map(|p| p[d]).fold(f64::NEG_INFINITY, f64::max);
                let pad = 0.25 * (hi - lo) + sigma;
                linspace(lo - pad, hi + pad, fc.grid_per_dim)
            };
            for &va in &span(a) {
                for &vb in &span(b) {
                    let mut x = mean.clone();
                    x[a] = va;
                    x[b] = vb;
                    let (score, inside) = cls.classify(&x)?;
                    grid.push_cells(&[t.to_string(), fmt_f64(va), fmt_f64(vb), fmt_f64(score), (inside as u8).to_string()]);
                }
            }
        }

        let mut summary = Summary::new();
        summary
            .text("trajectories", fc.trajectories)
            .text("horizon", horizon)
            .num("sigma", sigma)
            .num("lambda", lambda)
            .num("min_train_in_set", min_train);
        if holdout.is_some() {
            summary.text("holdout_trajectories", holdout_count).num("mean_holdout_in_set", mean_hold);
        }
        let mut timing = Table::new(&["phase", "seconds"]);
        timing.push_cells(&["fit".to_string(), fmt_f64(fit_time)]);
        self.write_all(&[
            ("forward_reach_tau.csv".into(), taus.render()),
            ("forward_reach_grid.csv".into(), grid.render()),
            ("forward_reach_summary.csv".into(), summary.render().to_string()),
            ("forward_reach_timing.csv".into(), timing.render()),
        ])
    }

    pub fn cmd_bench(&self) -> Result<Vec<PathBuf>, CliError> {
        let bc = self
            .cfg
            .bench
            .as_ref()
            .ok_or_else(|| config_error("`bench` needs a [bench] section"))?;
        let mut rows: Vec<(&str, usize, usize, f64)> = Vec::new();
        if !bc.sizes.is_empty() {
            let Some(SampleSource::Generate { state_box, action_box, .. }) = &self.cfg.sample else {
                return Err(config_error("bench.sizes needs a generated sample"));
            };
            for &size in &bc.sizes {
                for r in 0..bc.repeats {
                    let mut rng = SeededRng::with_stream(self.seed, STREAM_BENCH + r as u64);
                    let s = draw_transitions(&self.cfg.system, state_box, action_box, size, &mut rng)?;
                    let t0 = Instant::now();
                    self.bench_once(bc.target, s)?;
                    rows.push(("size", size, r, t0.elapsed().as_secs_f64()));
                }
            }
        }
        for &n in &bc.dims {
            let mut params = SystemParams::new();
            params.insert("dim".into(), n as f64);
            let sys = make_system("integrator", &params)?;
            let sbox = HyperRect::cube(-1.0, 1.0, n)?;
            for r in 0..bc.repeats {
                let mut rng = SeededRng::with_stream(self.seed, STREAM_BENCH + r as u64);
                let s = draw_transitions(&sys, &sbox, sys.action_box(), bc.dim_size, &mut rng)?;
                let t0 = Instant::now();
                self.bench_once(BenchTarget::Fit, s)?;
                rows.push(("dim", n, r, t0.elapsed().as_secs_f64()));
            }
        }

        let mut table = Table::new(&["mode", "value", "repeat", "seconds"]);
        for (mode, v, r, s) in &rows {
            table.push_cells(&[mode.to_string(), v.to_string(), r.to_string(), fmt_f64(*s)]);
        }
        let medians = |mode: &str, values: &[usize]| -> Vec<(usize, f64)> {
            values
                .iter()
                .map(|&v| {
                    let mut ts: Vec<f64> = rows.iter().filter(|r| r.0 == mode && r.1 == v).map(|r| r.3).collect();
                    ts.sort_by(f64::total_cmp);
                    (v, median_sorted(&ts))
                })
                .collect()
        };
        let mut summary = Table::new(&["mode", "value", "median_seconds"]);
        let size_medians = medians("size", &bc.sizes);
        let dim_medians = medians("dim", &bc.dims);
        for (mode, list) in [("size", &size_medians), ("dim", &dim_medians)] {
            for (v, t) in list.iter() {
                summary.push_cells(&[mode.to_string(), v.to_string(), fmt_f64(*t)]);
            }
        }
        if size_medians.len() >= 2 {
            let s = loglog_slope(&size_medians);
            println!("fit-time log-log slope over sample size: {s:.3}");
            summary.push_cells(&["size_slope".to_string(), String::new(), fmt_f64(s)]);
        }
        if dim_medians.len() >= 2 {
            let ratio = dim_medians.last().expect("nonempty").1 / dim_medians[0].1;
            println!("fit-time ratio across dimensions: {ratio:.3}");
            summary.push_cells(&["dim_ratio".to_string(), String::new(), fmt_f64(ratio)]);
        }
        self.write_all(&[
            ("bench_timing.csv".into(), table.render()),
            ("bench_summary_timing.csv".into(), summary.render()),
        ])
    }

    fn bench_once(&self, target: BenchTarget, s: TransitionSample) -> Result<(), CliError> {
        let (emb, _) = self.embedding(s)?;
        match target {
            BenchTarget::Fit => {}
            BenchTarget::Reach => {
                let problem = self.cfg.algorithm.problem().unwrap_or(crate::Problem::Tht);
                SRModel::fit_chunked(
                    emb,
                    self.actions()?,
                    self.cfg.safe.clone(),
                    self.cfg.target.clone(),
                    self.cfg.horizon,
                    problem,
                    self.chunk,
                )?;
            }
            BenchTarget::Control => {
                let (ctrl, _) = self.controller(emb)?;
                let cc = self.cfg.control.as_ref().expect("validated");
                ctrl.act(&cc.initial_state, 0)?;
            }
        }
        Ok(())
    }
}

fn median_sorted(v: &[f64]) -> f64 {
    match v.len() {
        0 => f64::NAN,
        n if n % 2 == 1 => v[n / 2],
        n => 0.5 * (v[n / 2 - 1] + v[n / 2]),
    }
}

/// Least-squares slope of `ln t` against `ln v`.
pub fn loglog_slope(points: &[(usize, f64)]) -> f64 {
    let xs: Vec<f64> = points.iter().map(|p| (p.0 as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Closed-loop rollout of a controller from the configured initial state.
fn rollout(
    sys: &SystemSpec,
    ctrl: &Controller,
    cc: &ControlConfig,
    horizon: usize,
    rng: &mut SeededRng,
) -> crate::Result<Trajectory> {
    let mut x = cc.initial_state.clone();
    let mut states = vec![x.clone()];
    let mut actions = Vec::with_capacity(horizon);
    for t in 0..horizon {
        let u = if cc.sample_actions {
            ctrl.act_sampled(&x, t, rng)?
        } else {
            ctrl.act(&x, t)?
        };
        x = sys.step(&x, &u, rng)?;
        states.push(x.clone());
        actions.push(u);
    }
    Ok(Trajectory { states, actions })
}

struct RolloutReport {
    terminal_distance: f64,
    max_constraint: f64,
    violations: usize,
}

/// Tracking objective and constraints built from the scenario.
#[derive(Clone)]
pub struct Costs {
    objective: Arc<ObjectiveSpec>,
    weights: Arc<Vec<f64>>,
    constraints: Vec<config::ConstraintSpec>,
    horizon: usize,
}

impl Costs {
    pub fn new(cc: &ControlConfig, horizon: usize) -> Self {
        let n = cc.initial_state.len();
        Costs {
            weights: Arc::new(cc.objective.weights.clone().unwrap_or_else(|| vec![1.0; n])),
            objective: Arc::new(cc.objective.clone()),
            constraints: cc.constraints.clone(),
            horizon,
        }
    }

    /// Goal at stage `t`: waypoints spread evenly over `0..=N`, linearly
    /// interpolated.
    pub fn goal(&self, t: usize) -> Point {
        waypoint(&self.objective.waypoints, t, self.horizon)
    }

    pub fn spec(&self) -> CostSpec {
        let this = self.clone();
        let r = self.objective.action_weight;
        let objective = StageCost::new(
            move |t, y| {
                let g = this.goal(t);
                let d: f64 = this.objective.offset
                    + y.iter().zip(&g).zip(this.weights.iter()).map(|((a, b), w)| w * (a - b) * (a - b)).sum::<f64>();
                if t >= this.horizon {
                    this.objective.terminal_weight * d
                } else {
                    d
                }
            },
            move |_, u| r * u.iter().map(|v| v * v).sum::<f64>(),
        );
        let mut spec = CostSpec::new(objective);
        for c in &self.constraints {
            let c = c.clone();
            spec = spec.with_constraint(StageCost::state_only(move |_, y| constraint_value(&c, y)));
        }
        spec
    }

    fn report(&self, tr: &Trajectory) -> RolloutReport {
        let g = self.goal(self.horizon);
        let x = tr.final_state();
        let terminal_distance = x
            .iter()
            .zip(&g)
            .zip(self.weights.iter())
            .filter(|(_, &w)| w != 0.0)
            .map(|((a, b), _)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let mut max_constraint = f64::NEG_INFINITY;
        let mut violations = 0;
        for x in &tr.states[1..] {
            let worst = self
                .constraints
                .iter()
                .map(|c| constraint_value(c, x))
                .fold(f64::NEG_INFINITY, f64::max);
            max_constraint = max_constraint.max(worst);
            if worst > 0.0 {
                violations += 1;
            }
        }
        if self.constraints.is_empty() {
            max_constraint = 0.0;
        }
        RolloutReport {
            terminal_distance,
            max_constraint,
            violations,
        }
    }
}

fn constraint_value(c: &config::ConstraintSpec, y: &[f64]) -> f64 {
    let mut v = c.offset;
    if let Some(a) = &c.linear {
        v += a.iter().zip(y).map(|(a, y)| a * y).sum::<f64>();
    }
    if let Some(b) = &c.absolute {
        v += b.iter().zip(y).map(|(b, y)| b * y.abs()).sum::<f64>();
    }
    v
}

/// Piecewise-linear path through `points` reaching the last one at `t = N`.
pub fn waypoint(points: &[Point], t: usize, horizon: usize) -> Point {
    if points.len() == 1 || horizon == 0 {
        return points[0].clone();
    }
    let s = (t.min(horizon) as f64 / horizon as f64) * (points.len() - 1) as f64;
    let k = (s.floor() as usize).min(points.len() - 2);
    let frac = s - k as f64;
    points[k]
        .iter()
        .zip(&points[k + 1])
        .map(|(a, b)| a + frac * (b - a))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn waypoints_interpolate() {
        let v = vec![vec![-1.0, 1.0], vec![0.0, 0.0], vec![1.0, 1.0]];
        assert_eq!(waypoint(&v, 0, 10), vec![-1.0, 1.0]);
        assert_eq!(waypoint(&v, 5, 10), vec![0.0, 0.0]);
        assert_eq!(waypoint(&v, 10, 10), vec![1.0, 1.0]);
        let q = waypoint(&v, 2, 10);
        assert!((q[0] + 0.6).abs() < 1e-15 && (q[1] - 0.6).abs() < 1e-15);
        assert_eq!(waypoint(&v[..1], 3, 10), vec![-1.0, 1.0]);
    }

    #[test]
    fn slope_of_a_cubic() {
        let pts: Vec<(usize, f64)> = [100usize, 200, 400].iter().map(|&m| (m, (m as f64).powi(3) * 1e-9)).collect();
        assert!((loglog_slope(&pts) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(config_error("x").exit_code(), 2);
        assert_eq!(CliError::Run(Error::Infeasible { violated: vec![0] }).exit_code(), 4);
        assert_eq!(CliError::Run(Error::NonFinite("x".into())).exit_code(), 3);
    }
}
