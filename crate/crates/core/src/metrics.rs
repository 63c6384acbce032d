//! RMSE, ECDF and the recursive posterior CRLB.

use std::io::Write;

use nalgebra::{Matrix4, RowVector4, Vector2};
use serde::{Deserialize, Serialize};

use crate::dynamics::{KinematicState, MotionParams};
use crate::error::{Error, Result};
use crate::geometry::device_position;
use crate::likelihood::{fisher_variance, NoiseModel};
use crate::simulator::{amplitude_mean, RadioParams};

/// Per-step estimates of one realization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub true_m: [f64; 2],
    pub est_m: [f64; 2],
    pub b_rho: f64,
    pub b_phi: f64,
    /// `a` (ellipse) or `r` (circle).
    pub extent_1: f64,
    /// `b` (ellipse) or `w_s` (circle).
    pub extent_2: f64,
    /// `w` (ellipse only).
    pub extent_3: Option<f64>,
}

impl StepRecord {
    pub fn error(&self) -> f64 {
        let dx = self.est_m[0] - self.true_m[0];
        let dy = self.est_m[1] - self.true_m[1];
        (dx * dx + dy * dy).sqrt()
    }
}

/// One realization of one method.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunRecord {
    pub steps: Vec<StepRecord>,
    /// First step at which the filter failed, if any.
    pub diverged_at: Option<usize>,
}

/// Per-step root mean squared position error over realizations.
pub fn rmse(records: &[RunRecord]) -> Result<Vec<f64>> {
    let first = records.first().ok_or(Error::InvalidArgument("rmse needs at least one record".into()))?;
    let n = first.steps.len();
    if let Some(bad) = records.iter().find(|r| r.steps.len() != n) {
        return Err(Error::LengthMismatch { expected: n, found: bad.steps.len() });
    }
    let r = records.len() as f64;
    Ok((0..n)
        .map(|k| (records.iter().map(|rec| rec.steps[k].error().powi(2)).sum::<f64>() / r).sqrt())
        .collect())
}

/// Right-continuous empirical CDF.
#[derive(Debug, Clone, PartialEq)]
pub struct Ecdf {
    sorted: Vec<f64>,
}

impl Ecdf {
    pub fn new(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidArgument("ecdf needs at least one value".into()));
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Ok(Self { sorted })
    }

    /// Fraction of values `≤ x`.
    pub fn eval(&self, x: f64) -> f64 {
        self.sorted.partition_point(|v| *v <= x) as f64 / self.sorted.len() as f64
    }

    /// Smallest value whose ECDF reaches `q`.
    pub fn quantile(&self, q: f64) -> f64 {
        let n = self.sorted.len();
        let k = ((q * n as f64).ceil() as usize).clamp(1, n);
        self.sorted[k - 1]
    }

    /// Distinct support points with their cumulative fractions.
    pub fn steps(&self) -> Vec<(f64, f64)> {
        let n = self.sorted.len() as f64;
        let mut out: Vec<(f64, f64)> = Vec::new();
        for (i, v) in self.sorted.iter().enumerate() {
            let frac = (i + 1) as f64 / n;
            match out.last_mut() {
                Some(last) if last.0 == *v => last.1 = frac,
                _ => out.push((*v, frac)),
            }
        }
        out
    }
}

/// Convenience wrapper returning the step function of `values`.
pub fn ecdf(values: &[f64]) -> Result<Vec<(f64, f64)>> {
    Ok(Ecdf::new(values)?.steps())
}

/// Fisher information of `(p, v)` and its position bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PcrlbState {
    pub j: Matrix4<f64>,
    /// Trace of the position block of `J⁻¹`.
    pub bound: f64,
}

impl PcrlbState {
    /// Prior information from independent position and velocity standard deviations.
    pub fn from_prior(position_std: f64, velocity_std: f64) -> Result<Self> {
        let j = Matrix4::from_diagonal(&nalgebra::Vector4::new(
            position_std.powi(-2),
            position_std.powi(-2),
            velocity_std.powi(-2),
            velocity_std.powi(-2),
        ));
        Self::from_information(j)
    }

    pub fn from_information(j: Matrix4<f64>) -> Result<Self> {
        let inv = j.try_inverse().ok_or(Error::SingularInformation)?;
        Ok(Self { j, bound: inv[(0, 0)] + inv[(1, 1)] })
    }
}

/// Constant-velocity transition matrix and process noise of `(p, v)`.
pub fn cv_matrices(params: &MotionParams) -> (Matrix4<f64>, Matrix4<f64>) {
    let dt = params.dt;
    let mut a = Matrix4::identity();
    a[(0, 2)] = dt;
    a[(1, 3)] = dt;
    let b = nalgebra::Matrix4x2::new(dt * dt / 2.0, 0.0, 0.0, dt * dt / 2.0, dt, 0.0, 0.0, dt);
    let q = b * b.transpose() * params.sigma_a * params.sigma_a;
    (a, q)
}

/// One step of the information recursion with direct-path measurements.
///
/// `visible` holds the anchor positions and expected range variances of the
/// links observed at this step; `true_kin` provides the device position.
pub fn pcrlb_step(
    state: &PcrlbState,
    visible: &[(Vector2<f64>, f64)],
    true_kin: &KinematicState<f64>,
    params: &MotionParams,
) -> Result<PcrlbState> {
    let (a, q) = cv_matrices(params);
    let prev_inv = state.j.try_inverse().ok_or(Error::SingularInformation)?;
    let predicted = (q + a * prev_inv * a.transpose()).try_inverse().ok_or(Error::SingularInformation)?;
    let m = device_position(true_kin);
    let mut j = predicted;
    for (anchor, var) in visible {
        let d = m - anchor;
        let n = d.norm();
        if n == 0.0 || !(*var > 0.0) {
            continue;
        }
        let u = d / n;
        let h = RowVector4::new(u.x, u.y, 0.0, 0.0);
        j += h.transpose() * h / *var;
    }
    // Symmetrize against accumulated rounding.
    let j = (j + j.transpose()) * 0.5;
    PcrlbState::from_information(j)
}

/// Expected direct-path range variance at the true distance.
pub fn expected_variance(distance: f64, radio: &RadioParams, noise: &NoiseModel) -> Result<f64> {
    let u = amplitude_mean(distance, false, radio.alpha_mag_active, radio);
    fisher_variance(u, noise)
}

/// P-CRLB sequence along a ground-truth trajectory; `visible(j, n)` selects links at one-based step `n`.
pub fn pcrlb_series<F: Fn(usize, usize) -> bool>(
    truth: &[KinematicState<f64>],
    anchors: &[Vector2<f64>],
    visible: F,
    radio: &RadioParams,
    noise: &NoiseModel,
    params: &MotionParams,
    prior: PcrlbState,
) -> Result<Vec<f64>> {
    let mut state = prior;
    let mut out = Vec::with_capacity(truth.len());
    for (k, kin) in truth.iter().enumerate() {
        let m = device_position(kin);
        let links: Vec<(Vector2<f64>, f64)> = anchors
            .iter()
            .enumerate()
            .filter(|(j, _)| visible(*j, k + 1))
            .map(|(_, a)| Ok((*a, expected_variance((m - a).norm(), radio, noise)?)))
            .collect::<Result<_>>()?;
        state = pcrlb_step(&state, &links, kin, params)?;
        out.push(state.bound);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmseRow {
    pub method: String,
    pub step: usize,
    pub rmse: f64,
    pub pcrlb: f64,
    pub pcrlb_star: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EcdfRow {
    pub method: String,
    pub error: f64,
    pub ecdf_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub method: String,
    pub realization: usize,
    pub step: usize,
    pub true_mx: f64,
    pub true_my: f64,
    pub est_mx: f64,
    pub est_my: f64,
    pub b_rho: f64,
    pub b_phi: f64,
    pub extent_1: f64,
    pub extent_2: f64,
    pub extent_3: Option<f64>,
}

impl TrajectoryRow {
    pub fn new(method: &str, realization: usize, s: &StepRecord) -> Self {
        Self {
            method: method.to_string(),
            realization,
            step: s.step,
            true_mx: s.true_m[0],
            true_my: s.true_m[1],
            est_mx: s.est_m[0],
            est_my: s.est_m[1],
            b_rho: s.b_rho,
            b_phi: s.b_phi,
            extent_1: s.extent_1,
            extent_2: s.extent_2,
            extent_3: s.extent_3,
        }
    }
}

/// Writes serializable rows as CSV with a header line.
pub fn write_csv<W: Write, R: Serialize>(writer: W, rows: &[R]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
