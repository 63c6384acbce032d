//! Measurement-level synthetic scenarios.
//!
//! Frames are drawn directly from the statistical measurement model: one
//! direct path per unblocked anchor, Poisson scatter paths from the visible
//! part of the annulus, Poisson clutter, Rician amplitudes and a detection
//! threshold.

use std::f64::consts::PI;

use nalgebra::Vector2;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::dynamics::KinematicState;
use crate::error::{Error, Result};
use crate::geometry::{device_position, AnnulusSectorSampler, EoExtent, EoPose};
use crate::likelihood::{fisher_variance, path_length, sensor_sector, ClutterModel, Measurement, NoiseModel, Sensor};
use crate::spa_filter::{FrameMeasurements, PassiveList};

/// Redraws of an out-of-range distance before the measurement is dropped.
pub const DISTANCE_REDRAWS: usize = 100;

/// Radio parameters behind the amplitude model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RadioParams {
    /// Carrier frequency [Hz]; recorded for reference, the amplitude model is frequency-flat.
    pub f_c: f64,
    /// SNR of a direct path at 1 m [dB].
    pub snr_1m_db: f64,
    /// Scattering coefficient applied to every reflected path.
    pub beta: f64,
    pub alpha_mag_active: f64,
    pub alpha_mag_passive: f64,
    /// Detection threshold on the normalized amplitude.
    pub gamma: f64,
}

impl Default for RadioParams {
    fn default() -> Self {
        Self {
            f_c: 6.95e9,
            snr_1m_db: 30.0,
            beta: 0.5,
            alpha_mag_active: 1.0,
            alpha_mag_passive: 1.0,
            gamma: 2.0,
        }
    }
}

/// Waypoints traversed at constant nominal speed with C¹ cubic Hermite segments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySpec {
    pub waypoints: Vec<[f64; 2]>,
    /// Nominal speed [m/s]; segment durations are chord length / speed.
    pub speed: f64,
}

/// Object extent used to generate scatter points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrueExtent {
    pub a: f64,
    pub b: f64,
    pub w: f64,
}

/// Device placement relative to the object.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrueBias {
    pub b_rho: f64,
    pub b_phi: f64,
}

/// Complete synthetic scenario. Anchor indices are zero-based and blockage
/// intervals are inclusive, one-based step ranges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Scenario {
    pub anchors: Vec<[f64; 2]>,
    pub tx_set: Vec<usize>,
    pub trajectory: TrajectorySpec,
    pub dt: f64,
    pub steps: usize,
    pub true_extent: TrueExtent,
    pub true_bias: TrueBias,
    pub blockage: Vec<Vec<[usize; 2]>>,
    pub clutter: ClutterModel,
    pub radio: RadioParams,
    pub noise: NoiseModel,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            anchors: vec![[0.0, 0.0], [8.0, 0.0], [4.0, 7.0]],
            tx_set: vec![0],
            trajectory: TrajectorySpec {
                waypoints: vec![[3.0, 2.0], [5.2, 2.1], [5.1, 3.6], [3.1, 3.5]],
                speed: 0.33,
            },
            dt: 0.1,
            steps: 180,
            true_extent: TrueExtent { a: 0.3, b: 0.2, w: 0.05 },
            true_bias: TrueBias { b_rho: 0.32, b_phi: -PI / 3.0 },
            blockage: vec![vec![[31, 80], [111, 130]], vec![[31, 130]], vec![[31, 60], [111, 130]]],
            clutter: ClutterModel::default(),
            radio: RadioParams::default(),
            noise: NoiseModel::default(),
        }
    }
}

impl Scenario {
    pub fn anchor_vectors(&self) -> Vec<Vector2<f64>> {
        self.anchors.iter().map(|a| Vector2::new(a[0], a[1])).collect()
    }

    pub fn extent(&self) -> EoExtent<f64> {
        EoExtent::new(self.true_extent.a, self.true_extent.b, self.true_extent.w)
    }

    /// Passive sensors: every anchor receives from every transmitter in the set.
    pub fn passive_sensors(&self) -> Vec<Sensor> {
        let mut tx: Vec<usize> = self.tx_set.clone();
        tx.sort_unstable();
        tx.dedup();
        let mut out = Vec::new();
        for rx in 0..self.anchors.len() {
            for t in &tx {
                out.push(Sensor::Passive { rx, tx: *t });
            }
        }
        out
    }

    /// Whether the direct path of `anchor` is blocked at one-based `step`.
    pub fn is_blocked(&self, anchor: usize, step: usize) -> bool {
        self.blockage
            .get(anchor)
            .is_some_and(|iv| iv.iter().any(|[lo, hi]| (*lo..=*hi).contains(&step)))
    }

    pub fn validate(&self) -> Result<()> {
        if self.anchors.is_empty() {
            return Err(Error::Config("scenario needs at least one anchor".into()));
        }
        if self.tx_set.iter().any(|t| *t >= self.anchors.len()) {
            return Err(Error::Config("transmit set refers to a missing anchor".into()));
        }
        if self.blockage.len() > self.anchors.len() {
            return Err(Error::Config("more blockage schedules than anchors".into()));
        }
        for iv in self.blockage.iter().flatten() {
            if iv[0] < 1 || iv[0] > iv[1] || iv[1] > self.steps {
                return Err(Error::Config(format!("blockage interval {iv:?} outside [1, {}]", self.steps)));
            }
        }
        if !self.extent().is_valid() {
            return Err(Error::Config("true extent violates 0 <= w < b <= a".into()));
        }
        if !(self.dt > 0.0) || self.steps == 0 {
            return Err(Error::Config("dt and steps must be positive".into()));
        }
        if !(self.clutter.d_max > 0.0) || self.clutter.mu_m < 0.0 || self.clutter.mu_fp <= 0.0 {
            return Err(Error::Config("invalid clutter model".into()));
        }
        Ok(())
    }
}

/// Mean normalized amplitude of a path of total length `path` [m].
pub fn amplitude_mean(path: f64, scattered: bool, alpha_mag: f64, radio: &RadioParams) -> f64 {
    let u_ref = 10f64.powf(radio.snr_1m_db / 20.0);
    let beta = if scattered { radio.beta } else { 1.0 };
    u_ref * alpha_mag * beta / path
}

/// Mean amplitude for a path delay `tau` [s].
pub fn amplitude_mean_from_delay(tau: f64, scattered: bool, alpha_mag: f64, radio: &RadioParams, c: f64) -> f64 {
    amplitude_mean(c * tau, scattered, alpha_mag, radio)
}

/// Rician draw with noncentrality `nu` and squared scale 1/2.
pub fn draw_amplitude<R: Rng + ?Sized>(nu: f64, rng: &mut R) -> f64 {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let x: f64 = rng.sample::<f64, _>(rand_distr::StandardNormal) * s;
    let y: f64 = rng.sample::<f64, _>(rand_distr::StandardNormal) * s;
    ((nu + x).powi(2) + y * y).sqrt()
}

/// Clutter amplitude: Rician with `ν = γ` conditioned on `u ≥ γ`.
pub fn draw_clutter_amplitude<R: Rng + ?Sized>(gamma: f64, rng: &mut R) -> f64 {
    for _ in 0..1000 {
        let u = draw_amplitude(gamma, rng);
        if u >= gamma && u > 0.0 {
            return u;
        }
    }
    gamma.max(f64::MIN_POSITIVE)
}

fn poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> usize {
    if !(mean > 0.0) {
        return 0;
    }
    match Poisson::new(mean) {
        Ok(p) => p.sample(rng) as usize,
        Err(_) => 0,
    }
}

/// C¹ interpolant through the waypoints.
#[derive(Debug, Clone)]
pub struct Trajectory {
    knots: Vec<f64>,
    points: Vec<Vector2<f64>>,
    tangents: Vec<Vector2<f64>>,
}

impl Trajectory {
    pub fn new(spec: &TrajectorySpec) -> Result<Self> {
        if spec.waypoints.len() < 2 {
            return Err(Error::DegenerateSpec("at least two waypoints are required"));
        }
        if !(spec.speed > 0.0) {
            return Err(Error::DegenerateSpec("speed must be positive"));
        }
        let points: Vec<Vector2<f64>> = spec.waypoints.iter().map(|w| Vector2::new(w[0], w[1])).collect();
        let mut knots = vec![0.0];
        for pair in points.windows(2) {
            let len = (pair[1] - pair[0]).norm();
            if len == 0.0 {
                return Err(Error::DegenerateSpec("consecutive waypoints coincide"));
            }
            knots.push(knots.last().unwrap() + len / spec.speed);
        }
        let n = points.len();
        let tangents = (0..n)
            .map(|i| {
                let (lo, hi) = (i.saturating_sub(1), (i + 1).min(n - 1));
                (points[hi] - points[lo]) / (knots[hi] - knots[lo])
            })
            .collect();
        Ok(Self { knots, points, tangents })
    }

    pub fn duration(&self) -> f64 {
        *self.knots.last().unwrap()
    }

    /// Position and velocity at time `t`; the end point is held afterwards.
    pub fn eval(&self, t: f64) -> (Vector2<f64>, Vector2<f64>) {
        let n = self.points.len();
        if t >= self.duration() {
            return (self.points[n - 1], Vector2::zeros());
        }
        let t = t.max(0.0);
        let i = self.knots.partition_point(|k| *k <= t).clamp(1, n - 1) - 1;
        let h = self.knots[i + 1] - self.knots[i];
        let s = (t - self.knots[i]) / h;
        let (p0, p1) = (self.points[i], self.points[i + 1]);
        let (m0, m1) = (self.tangents[i] * h, self.tangents[i + 1] * h);
        let (s2, s3) = (s * s, s * s * s);
        let pos = p0 * (2.0 * s3 - 3.0 * s2 + 1.0)
            + m0 * (s3 - 2.0 * s2 + s)
            + p1 * (-2.0 * s3 + 3.0 * s2)
            + m1 * (s3 - s2);
        let vel = (p0 * (6.0 * s2 - 6.0 * s) + m0 * (3.0 * s2 - 4.0 * s + 1.0) + p1 * (-6.0 * s2 + 6.0 * s) + m1 * (3.0 * s2 - 2.0 * s)) / h;
        (pos, vel)
    }
}

/// Ground-truth kinematic states at `t = (n - 1) dt` for `n = 1..=steps`.
pub fn build_trajectory(spec: &TrajectorySpec, dt: f64, steps: usize, bias: &TrueBias) -> Result<Vec<KinematicState<f64>>> {
    let traj = Trajectory::new(spec)?;
    let mut out: Vec<KinematicState<f64>> = Vec::with_capacity(steps);
    for n in 0..steps {
        let (p, v) = traj.eval(n as f64 * dt);
        let mut k = KinematicState::new(p, v, bias.b_rho, bias.b_phi);
        if let Some(prev) = out.last() {
            k.heading = prev.heading;
            k.refresh_heading();
        }
        out.push(k);
    }
    Ok(out)
}

/// Origin of a generated measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Origin {
    Direct,
    Scatter { point: Vector2<f64> },
    Clutter,
}

/// Ground truth of one emitted measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementTruth {
    pub origin: Origin,
    /// Noise-free distance (clutter: the drawn distance itself).
    pub true_distance: f64,
}

/// Ground truth aligned with the lists of a [`FrameMeasurements`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FrameTruth {
    pub active: Vec<Vec<MeasurementTruth>>,
    pub passive: Vec<Vec<MeasurementTruth>>,
}

/// Draws the measurements of one-based step `n`.
pub fn generate_frame<R: Rng + ?Sized>(
    n: usize,
    scenario: &Scenario,
    truth: &KinematicState<f64>,
    rng: &mut R,
) -> (FrameMeasurements<f64>, FrameTruth) {
    let anchors = scenario.anchor_vectors();
    let extent = scenario.extent();
    let pose = EoPose::from_kinematic(truth);
    let m = device_position(truth);
    let radio = &scenario.radio;
    let mut frame = FrameMeasurements::empty(anchors.len());
    let mut gt = FrameTruth { active: vec![Vec::new(); anchors.len()], passive: Vec::new() };

    for j in 0..anchors.len() {
        let sensor = Sensor::Active { anchor: j };
        let mut list = Vec::new();
        if !scenario.is_blocked(j, n) {
            let d = (m - anchors[j]).norm();
            let nu = amplitude_mean(d, false, radio.alpha_mag_active, radio);
            emit(&mut list, sensor, d, nu, Origin::Direct, scenario, rng);
        }
        emit_scatter(&mut list, sensor, &extent, &pose, &m, &anchors, radio.alpha_mag_active, scenario, rng);
        emit_clutter(&mut list, sensor, scenario, rng);
        list.shuffle(rng);
        let (zs, ts) = list.into_iter().unzip();
        frame.active[j] = zs;
        gt.active[j] = ts;
    }

    for sensor in scenario.passive_sensors() {
        let Sensor::Passive { rx, tx } = sensor else { unreachable!() };
        let mut list = Vec::new();
        emit_scatter(&mut list, sensor, &extent, &pose, &m, &anchors, radio.alpha_mag_passive, scenario, rng);
        emit_clutter(&mut list, sensor, scenario, rng);
        list.shuffle(rng);
        let (zs, ts): (Vec<_>, Vec<_>) = list.into_iter().unzip();
        frame.passive.push(PassiveList { rx, tx, measurements: zs });
        gt.passive.push(ts);
    }
    (frame, gt)
}

type Emitted = Vec<(Measurement<f64>, MeasurementTruth)>;

/// Draws amplitude and noisy distance of an object-originated path.
fn emit<R: Rng + ?Sized>(
    list: &mut Emitted,
    sensor: Sensor,
    true_distance: f64,
    nu: f64,
    origin: Origin,
    scenario: &Scenario,
    rng: &mut R,
) {
    let u = draw_amplitude(nu, rng);
    if u < scenario.radio.gamma || u <= 0.0 {
        return;
    }
    let Ok(var) = fisher_variance(u, &scenario.noise) else { return };
    let sd = var.sqrt();
    for _ in 0..DISTANCE_REDRAWS {
        let d = true_distance + sd * rng.sample::<f64, _>(rand_distr::StandardNormal);
        if (0.0..=scenario.clutter.d_max).contains(&d) {
            list.push((Measurement { distance: d, amplitude: u, sensor }, MeasurementTruth { origin, true_distance }));
            return;
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn emit_scatter<R: Rng + ?Sized>(
    list: &mut Emitted,
    sensor: Sensor,
    extent: &EoExtent<f64>,
    pose: &EoPose<f64>,
    m: &Vector2<f64>,
    anchors: &[Vector2<f64>],
    alpha_mag: f64,
    scenario: &Scenario,
    rng: &mut R,
) {
    let count = poisson(scenario.clutter.mu_m, rng);
    if count == 0 {
        return;
    }
    let Some(sector) = sensor_sector(extent, pose, anchors, &sensor) else { return };
    let Ok(sampler) = AnnulusSectorSampler::new(extent, pose, &sector) else { return };
    for _ in 0..count {
        let q = sampler.sample(rng);
        let d = path_length(&q, &sensor, m, anchors);
        let nu = amplitude_mean(d, true, alpha_mag, &scenario.radio);
        emit(list, sensor, d, nu, Origin::Scatter { point: q }, scenario, rng);
    }
}

fn emit_clutter<R: Rng + ?Sized>(list: &mut Emitted, sensor: Sensor, scenario: &Scenario, rng: &mut R) {
    let count = poisson(scenario.clutter.mu_fp, rng);
    for _ in 0..count {
        let d = rng.random::<f64>() * scenario.clutter.d_max;
        let u = draw_clutter_amplitude(scenario.radio.gamma, rng);
        list.push((
            Measurement { distance: d, amplitude: u, sensor },
            MeasurementTruth { origin: Origin::Clutter, true_distance: d },
        ));
    }
}
