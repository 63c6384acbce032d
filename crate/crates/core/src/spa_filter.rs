//! Particle implementation of the sum-product filter.
//!
//! Each step runs prediction, the measurement update with one `ξ` factor per
//! measurement, MMSE extraction and systematic resampling.

use std::cmp::Ordering;

use log::warn;
use nalgebra::Vector2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{predict_state, transition_extent, AugmentedState, Extent, KinematicState, MotionParams};
use crate::error::{Error, Result};
use crate::geometry::{device_position, ApproxExtent, EoExtent};
use crate::likelihood::{
    false_positive_density, fisher_variance, measurement_density, xi_from_density, Measurement, MeasurementModel,
    PredictionContext, ScatterPrediction, Sensor,
};
use crate::scalar::{wrap_angle, Scalar};

/// Noise inflation used once when every weight vanishes.
pub const RECOVERY_INFLATION: f64 = 3.0;

/// Weighted particle representation of the belief.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleSet<T: Scalar> {
    pub particles: Vec<AugmentedState<T>>,
    pub weights: Vec<T>,
}

impl<T: Scalar> ParticleSet<T> {
    /// Equally weighted set.
    pub fn uniform(particles: Vec<AugmentedState<T>>) -> Self {
        let w = T::one() / T::lit(particles.len().max(1) as f64);
        let weights = vec![w; particles.len()];
        Self { particles, weights }
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    /// Effective sample size `1 / Σ w²`.
    pub fn effective_size(&self) -> T {
        let s: T = self.weights.iter().fold(T::zero(), |acc, w| acc + *w * *w);
        T::one() / s
    }
}

/// Measurement lists of one time step.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameMeasurements<T: Scalar> {
    /// Active measurements indexed by anchor.
    pub active: Vec<Vec<Measurement<T>>>,
    /// Passive measurements per `(rx, tx)` pair.
    pub passive: Vec<PassiveList<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PassiveList<T: Scalar> {
    pub rx: usize,
    pub tx: usize,
    pub measurements: Vec<Measurement<T>>,
}

impl<T: Scalar> FrameMeasurements<T> {
    pub fn empty(anchors: usize) -> Self {
        Self { active: vec![Vec::new(); anchors], passive: Vec::new() }
    }

    /// Total number of measurements.
    pub fn count(&self) -> usize {
        self.active.iter().map(Vec::len).sum::<usize>() + self.passive.iter().map(|p| p.measurements.len()).sum::<usize>()
    }

    /// Flattened measurement groups, sorted by sensor and then by `(distance, amplitude)`.
    fn groups(&self, use_passive: bool) -> Vec<(Sensor, Vec<Measurement<T>>)> {
        let mut out = Vec::new();
        for (j, list) in self.active.iter().enumerate() {
            if !list.is_empty() {
                out.push((Sensor::Active { anchor: j }, list.clone()));
            }
        }
        if use_passive {
            let mut passive: Vec<_> = self
                .passive
                .iter()
                .filter(|p| !p.measurements.is_empty())
                .map(|p| (Sensor::Passive { rx: p.rx, tx: p.tx }, p.measurements.clone()))
                .collect();
            passive.sort_by_key(|(s, _)| *s);
            // Lists of the same pair are merged so each sensor draws once.
            for (s, list) in passive {
                match out.last_mut() {
                    Some((last, acc)) if *last == s => acc.extend(list),
                    _ => out.push((s, list)),
                }
            }
        }
        for (_, list) in out.iter_mut() {
            list.sort_by(|a, b| cmp_measurement(a, b));
        }
        out
    }
}

fn cmp_measurement<T: Scalar>(a: &Measurement<T>, b: &Measurement<T>) -> Ordering {
    a.distance
        .partial_cmp(&b.distance)
        .unwrap_or(Ordering::Equal)
        .then(a.amplitude.partial_cmp(&b.amplitude).unwrap_or(Ordering::Equal))
}

/// Prior `f(y_0)` hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PriorConfig {
    pub position_mean: [f64; 2],
    pub position_std: f64,
    pub velocity_mean: [f64; 2],
    pub velocity_std: f64,
    pub bias_range_mean: f64,
    pub bias_range_shape: f64,
    /// Ellipse prior means `(a, b, w)`.
    pub ellipse_mean: [f64; 3],
    /// Circle prior means `(r, w_s)`.
    pub circle_mean: [f64; 2],
    pub extent_shape: f64,
}

impl Default for PriorConfig {
    fn default() -> Self {
        Self {
            position_mean: [0.0, 0.0],
            position_std: 0.3,
            velocity_mean: [0.0, 0.0],
            velocity_std: 0.3,
            bias_range_mean: 0.32,
            bias_range_shape: 25.0,
            ellipse_mean: [0.3, 0.2, 0.05],
            circle_mean: [0.3, 0.1],
            extent_shape: 25.0,
        }
    }
}

/// Which extent family a filter carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtentKind {
    Ellipse,
    Circle,
}

/// Draws `count` particles from the prior.
pub fn init_particles<T: Scalar, R: Rng + ?Sized>(
    prior: &PriorConfig,
    kind: ExtentKind,
    count: usize,
    rng: &mut R,
) -> Result<ParticleSet<T>> {
    if count == 0 {
        return Err(Error::InvalidArgument("particle count must be at least 1".into()));
    }
    let shape_params = MotionParams {
        kappa_a: prior.extent_shape,
        kappa_b: prior.extent_shape,
        kappa_w: prior.extent_shape,
        kappa_r: prior.extent_shape,
        kappa_ws: prior.extent_shape,
        ..MotionParams::default()
    };
    let mean_extent = match kind {
        ExtentKind::Ellipse => {
            let [a, b, w] = prior.ellipse_mean;
            Extent::Ellipse(EoExtent::new(T::lit(a), T::lit(b), T::lit(w)))
        }
        ExtentKind::Circle => {
            let [r, ws] = prior.circle_mean;
            Extent::Circle(ApproxExtent::new(T::lit(r), T::lit(ws)))
        }
    };
    let ps = T::lit(prior.position_std);
    let vs = T::lit(prior.velocity_std);
    let shape = T::lit(prior.bias_range_shape);
    let particles = (0..count)
        .map(|_| {
            let p = Vector2::new(
                T::sample_normal(rng, T::lit(prior.position_mean[0]), ps),
                T::sample_normal(rng, T::lit(prior.position_mean[1]), ps),
            );
            let v = Vector2::new(
                T::sample_normal(rng, T::lit(prior.velocity_mean[0]), vs),
                T::sample_normal(rng, T::lit(prior.velocity_mean[1]), vs),
            );
            let b_rho = T::sample_gamma(rng, shape, T::lit(prior.bias_range_mean) / shape);
            let b_phi = T::sample_uniform(rng, -T::pi(), T::pi());
            AugmentedState {
                kin: KinematicState::new(p, v, b_rho, b_phi),
                extent: transition_extent(&mean_extent, &shape_params, rng),
            }
        })
        .collect();
    Ok(ParticleSet::uniform(particles))
}

/// Bootstrap prediction: every particle is advanced by the transition model.
pub fn predict<T: Scalar, R: Rng + ?Sized>(ps: &ParticleSet<T>, params: &MotionParams, rng: &mut R) -> ParticleSet<T> {
    ParticleSet {
        particles: ps.particles.iter().map(|y| predict_state(y, params, rng)).collect(),
        weights: ps.weights.clone(),
    }
}

/// Multiplies the weights by the product of `ξ` over every measurement and normalizes.
pub fn update<T: Scalar, R: Rng + ?Sized>(
    ps: &ParticleSet<T>,
    frame: &FrameMeasurements<T>,
    model: &MeasurementModel<T>,
    rng: &mut R,
) -> Result<ParticleSet<T>> {
    let groups = frame.groups(model.use_passive);
    let sensors: Vec<Sensor> = groups.iter().map(|(s, _)| *s).collect();
    for s in &sensors {
        let ok = match *s {
            Sensor::Active { anchor } => anchor < model.anchors.len(),
            Sensor::Passive { rx, tx } => rx < model.anchors.len() && tx < model.anchors.len(),
        };
        if !ok {
            return Err(Error::InvalidArgument(format!("measurement sensor {s:?} does not match the anchors")));
        }
    }
    let variances: Vec<Vec<T>> = groups
        .iter()
        .map(|(_, list)| list.iter().map(|z| fisher_variance(z.amplitude, &model.noise)).collect::<Result<_>>())
        .collect::<Result<_>>()?;

    let f_fp = false_positive_density::<T>(&model.clutter);
    let ratio = T::lit(model.clutter.mu_m / model.clutter.mu_fp);
    let mut ctx = PredictionContext::new(model);
    let mut preds: Vec<ScatterPrediction<T>> = Vec::with_capacity(sensors.len());
    let mut log_w = Vec::with_capacity(ps.len());
    for (y, w) in ps.particles.iter().zip(&ps.weights) {
        let mut acc = w.ln();
        if !sensors.is_empty() {
            ctx.predict(y, &sensors, rng, &mut preds);
            let m = device_position(&y.kin);
            for ((_, list), (vars, pred)) in groups.iter().zip(variances.iter().zip(&preds)) {
                for (z, var) in list.iter().zip(vars) {
                    let f = measurement_density(z, *var, &m, pred, model);
                    acc += xi_from_density(f, f_fp, ratio).ln();
                }
            }
        }
        log_w.push(acc);
    }
    Ok(ParticleSet { particles: ps.particles.clone(), weights: normalize_log_weights(&log_w)? })
}

/// Exponentiates log weights after subtracting the maximum and normalizes them.
pub fn normalize_log_weights<T: Scalar>(log_w: &[T]) -> Result<Vec<T>> {
    let max = log_w
        .iter()
        .copied()
        .reduce(|a, b| if b > a { b } else { a })
        .ok_or(Error::AllWeightsZero)?;
    if !max.is_finite() {
        return Err(Error::AllWeightsZero);
    }
    let mut w: Vec<T> = log_w.iter().map(|l| (*l - max).exp()).collect();
    let sum = w.iter().fold(T::zero(), |a, b| a + *b);
    if !(sum > T::zero()) || !sum.is_finite() {
        return Err(Error::AllWeightsZero);
    }
    for x in w.iter_mut() {
        *x /= sum;
    }
    Ok(w)
}

/// Systematic resampling with a single uniform offset.
pub fn resample<T: Scalar, R: Rng + ?Sized>(ps: &ParticleSet<T>, rng: &mut R) -> ParticleSet<T> {
    let n = ps.len();
    if n == 0 {
        return ps.clone();
    }
    let step = T::one() / T::lit(n as f64);
    let mut u = T::sample_unit(rng) * step;
    let mut cum = ps.weights[0];
    let mut i = 0;
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        while u > cum && i + 1 < n {
            i += 1;
            cum += ps.weights[i];
        }
        out.push(ps.particles[i]);
        u += step;
    }
    ParticleSet::uniform(out)
}

/// Posterior-mean state together with the mean device position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate<T: Scalar> {
    pub state: AugmentedState<T>,
    /// Weighted mean of the per-particle device positions.
    pub device_position: Vector2<T>,
}

/// Weighted mean of every component; angles use the circular mean.
pub fn mmse_estimate<T: Scalar>(ps: &ParticleSet<T>) -> Result<Estimate<T>> {
    let first = ps.particles.first().ok_or(Error::InvalidArgument("empty particle set".into()))?;
    let zero2 = Vector2::zeros();
    let (mut p, mut v, mut m) = (zero2, zero2, zero2);
    let (mut rho, mut phi_c, mut phi_s, mut th_c, mut th_s) = (T::zero(), T::zero(), T::zero(), T::zero(), T::zero());
    let mut ext = [T::zero(); 3];
    for (y, w) in ps.particles.iter().zip(&ps.weights) {
        let w = *w;
        p += y.kin.position * w;
        v += y.kin.velocity * w;
        m += device_position(&y.kin) * w;
        rho += y.kin.bias_range * w;
        let (s, c) = y.kin.bias_angle.sin_cos();
        phi_c += c * w;
        phi_s += s * w;
        let (s, c) = y.kin.heading.sin_cos();
        th_c += c * w;
        th_s += s * w;
        match y.extent {
            Extent::Ellipse(e) => {
                ext[0] += e.a * w;
                ext[1] += e.b * w;
                ext[2] += e.w * w;
            }
            Extent::Circle(c) => {
                ext[0] += c.r * w;
                ext[1] += c.w_s * w;
            }
        }
    }
    let kin = KinematicState {
        position: p,
        velocity: v,
        bias_range: rho,
        bias_angle: wrap_angle(phi_s.atan2(phi_c)),
        heading: wrap_angle(th_s.atan2(th_c)),
    };
    let extent = match first.extent {
        Extent::Ellipse(_) => Extent::Ellipse(EoExtent::new(ext[0], ext[1], ext[2])),
        Extent::Circle(_) => Extent::Circle(ApproxExtent::new(ext[0], ext[1])),
    };
    Ok(Estimate { state: AugmentedState { kin, extent }, device_position: m })
}

/// One filter step: predict, update, estimate, resample.
///
/// Returns the resampled set and the estimate taken before resampling.
pub fn step<T: Scalar, R: Rng + ?Sized>(
    ps: &ParticleSet<T>,
    frame: &FrameMeasurements<T>,
    params: &MotionParams,
    model: &MeasurementModel<T>,
    rng: &mut R,
) -> Result<(ParticleSet<T>, Estimate<T>)> {
    let predicted = predict(ps, params, rng);
    let updated = match update(&predicted, frame, model, rng) {
        Ok(u) => u,
        Err(Error::AllWeightsZero) => {
            warn!("all particle weights vanished; re-predicting with inflated noise");
            let respread = predict(ps, &params.inflated(RECOVERY_INFLATION), rng);
            update(&respread, frame, model, rng)?
        }
        Err(e) => return Err(e),
    };
    let estimate = mmse_estimate(&updated)?;
    Ok((resample(&updated, rng), estimate))
}
