//! Monte Carlo experiment runner shared by the CLI and the acceptance tests.

use std::fmt;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use log::{info, warn};
use nalgebra::Vector2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{Extent, KinematicState, MotionParams};
use crate::error::{Error, Result};
use crate::geometry::device_position;
use crate::likelihood::{LikelihoodModel, MeasurementModel};
use crate::metrics::{
    ecdf, pcrlb_series, rmse, write_csv, EcdfRow, PcrlbState, RmseRow, RunRecord, StepRecord, TrajectoryRow,
};
use crate::simulator::{build_trajectory, generate_frame, Scenario};
use crate::spa_filter::{init_particles, step, Estimate, ExtentKind, FrameMeasurements, PriorConfig};

/// Stream index reserved for scenario simulation.
const SIM_STREAM: u64 = 0xFFFF;

/// Tracking methods compared by the experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "AP-PROP")]
    ApProp,
    #[serde(rename = "AP-PROP-APX")]
    ApPropApx,
    #[serde(rename = "A-PROP-APX")]
    APropApx,
    #[serde(rename = "A-PDA")]
    APda,
    #[serde(rename = "AP-PDA")]
    ApPda,
    #[serde(rename = "AP-PDA2")]
    ApPda2,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::ApProp,
        Method::ApPropApx,
        Method::APropApx,
        Method::APda,
        Method::ApPda,
        Method::ApPda2,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Method::ApProp => "AP-PROP",
            Method::ApPropApx => "AP-PROP-APX",
            Method::APropApx => "A-PROP-APX",
            Method::APda => "A-PDA",
            Method::ApPda => "AP-PDA",
            Method::ApPda2 => "AP-PDA2",
        }
    }

    /// Fixed identifier used to derive random streams.
    pub fn stream_id(&self) -> u64 {
        match self {
            Method::ApProp => 1,
            Method::ApPropApx => 2,
            Method::APropApx => 3,
            Method::APda => 4,
            Method::ApPda => 5,
            Method::ApPda2 => 6,
        }
    }

    pub fn uses_passive(&self) -> bool {
        !matches!(self, Method::APropApx | Method::APda)
    }

    pub fn extent_kind(&self) -> ExtentKind {
        match self {
            Method::ApProp => ExtentKind::Ellipse,
            _ => ExtentKind::Circle,
        }
    }

    pub fn likelihood(&self, cfg: &ExperimentConfig) -> LikelihoodModel {
        match self {
            Method::ApProp => LikelihoodModel::Eo { samples: cfg.is_samples },
            Method::ApPropApx | Method::APropApx => LikelihoodModel::Approx { omega: cfg.omega, kappa_ut: cfg.kappa_ut },
            Method::APda | Method::ApPda => LikelihoodModel::Point { sigma_r: 0.0 },
            Method::ApPda2 => LikelihoodModel::Point { sigma_r: cfg.sigma_r_pda2 },
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .iter()
            .copied()
            .find(|m| m.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Config(format!("unknown method '{s}'")))
    }
}

/// Full experiment configuration; every field has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Scenario file, resolved relative to the config file; overrides `scenario`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scenario_file: Option<PathBuf>,
    pub scenario: Scenario,
    pub methods: Vec<Method>,
    pub realizations: usize,
    pub particles: usize,
    pub is_samples: usize,
    pub seed: u64,
    pub motion: MotionParams,
    pub prior: PriorConfig,
    /// Center the position and velocity prior on the true initial state.
    pub prior_from_truth: bool,
    /// Opening angle of the scattering ellipses [rad].
    pub omega: f64,
    pub kappa_ut: f64,
    pub sigma_r_pda2: f64,
    /// Worker threads; 0 uses the available parallelism.
    pub workers: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scenario: Scenario::default(),
            methods: Method::ALL.to_vec(),
            realizations: 100,
            particles: 5000,
            is_samples: 100,
            seed: 1,
            motion: MotionParams::default(),
            prior: PriorConfig::default(),
            prior_from_truth: true,
            omega: std::f64::consts::FRAC_PI_2,
            kappa_ut: 1.0,
            sigma_r_pda2: 0.2,
            workers: 0,
            output_dir: None,
            scenario_file: None,
        }
    }
}

impl ExperimentConfig {
    /// Parses a JSON configuration; errors carry line and column.
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a config file and the scenario file it points to.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let mut cfg = Self::from_json(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        if let Some(file) = cfg.scenario_file.take() {
            let file = path.parent().map_or(file.clone(), |dir| dir.join(&file));
            let text = fs::read_to_string(&file)?;
            cfg.scenario =
                serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", file.display())))?;
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        if self.realizations == 0 || self.particles == 0 || self.is_samples == 0 {
            return Err(Error::Config("realizations, particles and is_samples must be at least 1".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("no methods selected".into()));
        }
        if !self.motion.is_valid() {
            return Err(Error::Config("motion parameters must be positive".into()));
        }
        if !(self.omega > 0.0 && self.omega < std::f64::consts::PI) {
            return Err(Error::Config("omega must lie in (0, π)".into()));
        }
        if !(2.0 + self.kappa_ut > 0.0) || self.sigma_r_pda2 < 0.0 {
            return Err(Error::Config("invalid kappa_ut or sigma_r_pda2".into()));
        }
        let motion_dt = self.motion.dt;
        if (motion_dt - self.scenario.dt).abs() > 1e-12 {
            return Err(Error::Config(format!(
                "motion.dt ({motion_dt}) differs from scenario.dt ({})",
                self.scenario.dt
            )));
        }
        Ok(())
    }

    /// Config with every derived default made explicit.
    pub fn resolved(&self, truth: &[KinematicState<f64>]) -> Self {
        let mut out = self.clone();
        out.scenario_file = None;
        if self.prior_from_truth {
            if let Some(t0) = truth.first() {
                out.prior.position_mean = [t0.position.x, t0.position.y];
                out.prior.velocity_mean = [t0.velocity.x, t0.velocity.y];
            }
        }
        out.methods.sort();
        out.methods.dedup();
        out
    }

    pub fn measurement_model(&self, method: Method) -> MeasurementModel<f64> {
        MeasurementModel {
            anchors: self.scenario.anchor_vectors(),
            noise: self.scenario.noise,
            clutter: self.scenario.clutter,
            lhf: method.likelihood(self),
            use_passive: method.uses_passive(),
        }
    }
}

/// Random source of one (stream, realization) pair.
pub fn substream(seed: u64, stream: u64, realization: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((stream << 32) | realization as u64);
    rng
}

/// One realization of the synthetic scenario.
#[derive(Debug, Clone)]
pub struct Realization {
    pub frames: Vec<FrameMeasurements<f64>>,
}

pub fn simulate_realization(cfg: &ExperimentConfig, truth: &[KinematicState<f64>], r: usize) -> Realization {
    let mut rng = substream(cfg.seed, SIM_STREAM, r);
    let frames = truth
        .iter()
        .enumerate()
        .map(|(k, kin)| generate_frame(k + 1, &cfg.scenario, kin, &mut rng).0)
        .collect();
    Realization { frames }
}

fn step_record(k: usize, truth: &KinematicState<f64>, est: &Estimate<f64>) -> StepRecord {
    let m = device_position(truth);
    let kin = &est.state.kin;
    let (e1, e2, e3) = match est.state.extent {
        Extent::Ellipse(e) => (e.a, e.b, Some(e.w)),
        Extent::Circle(c) => (c.r, c.w_s, None),
    };
    StepRecord {
        step: k + 1,
        true_m: [m.x, m.y],
        est_m: [est.device_position.x, est.device_position.y],
        b_rho: kin.bias_range,
        b_phi: kin.bias_angle,
        extent_1: e1,
        extent_2: e2,
        extent_3: e3,
    }
}

/// Runs one filter over one realization.
pub fn run_filter(
    cfg: &ExperimentConfig,
    method: Method,
    r: usize,
    truth: &[KinematicState<f64>],
    realization: &Realization,
) -> Result<RunRecord> {
    let mut rng = substream(cfg.seed, method.stream_id(), r);
    let model = cfg.measurement_model(method);
    let mut ps = init_particles::<f64, _>(&cfg.prior, method.extent_kind(), cfg.particles, &mut rng)?;
    let mut record = RunRecord::default();
    let mut last: Option<Estimate<f64>> = None;
    for (k, frame) in realization.frames.iter().enumerate() {
        match step(&ps, frame, &cfg.motion, &model, &mut rng) {
            Ok((next, est)) => {
                ps = next;
                record.steps.push(step_record(k, &truth[k], &est));
                last = Some(est);
            }
            Err(Error::AllWeightsZero) => {
                warn!("{method} realization {r}: filter diverged at step {}", k + 1);
                record.diverged_at.get_or_insert(k + 1);
                let mut prior = cfg.prior;
                if let Some(e) = &last {
                    prior.position_mean = [e.state.kin.position.x, e.state.kin.position.y];
                    prior.velocity_mean = [e.state.kin.velocity.x, e.state.kin.velocity.y];
                }
                ps = init_particles(&prior, method.extent_kind(), cfg.particles, &mut rng)?;
                let est = last.unwrap_or_else(|| Estimate {
                    state: ps.particles[0],
                    device_position: Vector2::new(prior.position_mean[0], prior.position_mean[1]),
                });
                record.steps.push(step_record(k, &truth[k], &est));
            }
            Err(e) => return Err(e),
        }
    }
    Ok(record)
}

/// Results of one method over all realizations.
#[derive(Debug, Clone)]
pub struct MethodResult {
    pub method: Method,
    pub runs: Vec<RunRecord>,
    pub rmse: Vec<f64>,
}

impl MethodResult {
    /// Position errors of every (realization, step).
    pub fn errors(&self) -> Vec<f64> {
        self.runs.iter().flat_map(|r| r.steps.iter().map(StepRecord::error)).collect()
    }
}

/// Output of a complete experiment.
#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub truth: Vec<KinematicState<f64>>,
    pub methods: Vec<MethodResult>,
    /// P-CRLB following the blockage schedule.
    pub pcrlb: Vec<f64>,
    /// P-CRLB with every direct path always visible.
    pub pcrlb_star: Vec<f64>,
}

impl ExperimentResult {
    pub fn method(&self, m: Method) -> Option<&MethodResult> {
        self.methods.iter().find(|r| r.method == m)
    }
}

/// Runs every configured method on every realization.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let sc = &config.scenario;
    let truth = build_trajectory(&sc.trajectory, sc.dt, sc.steps, &sc.true_bias)?;
    let cfg = config.resolved(&truth);

    let anchors = sc.anchor_vectors();
    let prior = PcrlbState::from_prior(cfg.prior.position_std, cfg.prior.velocity_std)?;
    let pcrlb = pcrlb_series(&truth, &anchors, |j, n| !sc.is_blocked(j, n), &sc.radio, &sc.noise, &cfg.motion, prior)?;
    let pcrlb_star = pcrlb_series(&truth, &anchors, |_, _| true, &sc.radio, &sc.noise, &cfg.motion, prior)?;

    let realizations: Vec<Realization> = (0..cfg.realizations).map(|r| simulate_realization(&cfg, &truth, r)).collect();

    let jobs: Vec<(Method, usize)> = cfg
        .methods
        .iter()
        .flat_map(|m| (0..cfg.realizations).map(move |r| (*m, r)))
        .collect();
    let slots: Vec<Mutex<Option<Result<RunRecord>>>> = jobs.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = match cfg.workers {
        0 => std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
        n => n,
    }
    .min(jobs.len())
    .max(1);
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(method, r)) = jobs.get(i) else { break };
                let out = run_filter(&cfg, method, r, &truth, &realizations[r]);
                if out.is_ok() {
                    info!("{method} realization {} of {} finished", r + 1, cfg.realizations);
                }
                *slots[i].lock().unwrap_or_else(|p| p.into_inner()) = Some(out);
            });
        }
    });

    let mut records = slots.into_iter().map(|m| m.into_inner().unwrap_or_else(|p| p.into_inner()));
    let mut methods = Vec::new();
    for m in &cfg.methods {
        let runs = (0..cfg.realizations)
            .map(|_| records.next().flatten().unwrap_or(Err(Error::InvalidArgument("missing job result".into()))))
            .collect::<Result<Vec<_>>>()?;
        let rmse = rmse(&runs)?;
        methods.push(MethodResult { method: *m, runs, rmse });
    }
    Ok(ExperimentResult { config: cfg, truth, methods, pcrlb, pcrlb_star })
}

/// Mean, standard deviation and bias of one estimated variable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariableStats {
    pub mean: f64,
    pub std: f64,
    /// `|mean − truth|`, absent when the variable has no ground truth.
    pub bias: Option<f64>,
}

impl VariableStats {
    pub fn of(values: &[f64], truth: Option<f64>) -> Self {
        let n = values.len().max(1) as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Self { mean, std: var.sqrt(), bias: truth.map(|t| (mean - t).abs()) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub b_rho: VariableStats,
    pub b_phi: VariableStats,
    /// `a` for the ellipse model, `r` for the circle model.
    pub extent_major: VariableStats,
    pub mean_rmse: f64,
    pub diverged_runs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub realizations: usize,
    pub steps: usize,
    pub methods: Vec<MethodSummary>,
}

/// Aggregates the estimated variables over every realization and step.
pub fn summarize(result: &ExperimentResult) -> Summary {
    let sc = &result.config.scenario;
    let methods = result
        .methods
        .iter()
        .map(|mr| {
            let all = || mr.runs.iter().flat_map(|r| r.steps.iter());
            let b_rho: Vec<f64> = all().map(|s| s.b_rho).collect();
            let b_phi: Vec<f64> = all().map(|s| s.b_phi).collect();
            let ext: Vec<f64> = all().map(|s| s.extent_1).collect();
            let ext_truth = match mr.method.extent_kind() {
                ExtentKind::Ellipse => Some(sc.true_extent.a),
                ExtentKind::Circle => None,
            };
            MethodSummary {
                method: mr.method,
                b_rho: VariableStats::of(&b_rho, Some(sc.true_bias.b_rho)),
                b_phi: VariableStats::of(&b_phi, Some(sc.true_bias.b_phi)),
                extent_major: VariableStats::of(&ext, ext_truth),
                mean_rmse: mr.rmse.iter().sum::<f64>() / mr.rmse.len().max(1) as f64,
                diverged_runs: mr.runs.iter().filter(|r| r.diverged_at.is_some()).count(),
            }
        })
        .collect();
    Summary { realizations: result.config.realizations, steps: result.truth.len(), methods }
}

/// Writes the configuration, per-run trajectories, RMSE/ECDF tables and the summary.
pub fn write_outputs(result: &ExperimentResult, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir.join("trajectories"))?;
    fs::write(dir.join("resolved_config.json"), serde_json::to_string_pretty(&result.config)? + "\n")?;

    let mut rmse_rows = Vec::new();
    let mut ecdf_rows = Vec::new();
    for mr in &result.methods {
        let name = mr.method.name();
        let rows: Vec<TrajectoryRow> = mr
            .runs
            .iter()
            .enumerate()
            .flat_map(|(r, run)| run.steps.iter().map(move |s| TrajectoryRow::new(name, r, s)))
            .collect();
        let file = fs::File::create(dir.join("trajectories").join(format!("{name}.csv")))?;
        write_csv(BufWriter::new(file), &rows)?;
        for (k, e) in mr.rmse.iter().enumerate() {
            rmse_rows.push(RmseRow {
                method: name.to_string(),
                step: k + 1,
                rmse: *e,
                pcrlb: result.pcrlb[k].sqrt(),
                pcrlb_star: result.pcrlb_star[k].sqrt(),
            });
        }
        for (error, frac) in ecdf(&mr.errors())? {
            ecdf_rows.push(EcdfRow { method: name.to_string(), error, ecdf_fraction: frac });
        }
    }
    write_csv(BufWriter::new(fs::File::create(dir.join("rmse.csv"))?), &rmse_rows)?;
    write_csv(BufWriter::new(fs::File::create(dir.join("ecdf.csv"))?), &ecdf_rows)?;
    fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&summarize(result))? + "\n")?;
    Ok(())
}
