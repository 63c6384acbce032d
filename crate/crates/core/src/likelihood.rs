//! Measurement likelihoods and the association-marginalized factors `ξ`.

use nalgebra::Vector2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{AugmentedState, Extent, KinematicState};
use crate::error::{Error, Result};
use crate::geometry::{
    common_fov, device_position, ellipse_fov, scattering_ellipse, AngularSector, AnnulusSectorSampler,
    ApproxExtent, EoExtent, EoPose, SigmaPointSet,
};
use crate::scalar::{normal_pdf, Scalar};

/// Speed of light [m/s].
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Gaussian terms further than this many nats below their peak are skipped.
/// At that depth a term cannot move a factor `1 + ratio` in double precision.
const GAUSS_SKIP_NATS: f64 = 60.0;

/// Link that produced a measurement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Sensor {
    /// Device to anchor `anchor`.
    Active { anchor: usize },
    /// Anchor `tx` to anchor `rx`, reflected by the object.
    Passive { rx: usize, tx: usize },
}

impl Sensor {
    pub fn rx(&self) -> usize {
        match *self {
            Sensor::Active { anchor } => anchor,
            Sensor::Passive { rx, .. } => rx,
        }
    }
}

/// Distance and normalized amplitude of one detection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement<T: Scalar> {
    pub distance: T,
    pub amplitude: T,
    pub sensor: Sensor,
}

impl<T: Scalar> Measurement<T> {
    pub fn active(anchor: usize, distance: T, amplitude: T) -> Self {
        Self { distance, amplitude, sensor: Sensor::Active { anchor } }
    }

    pub fn passive(rx: usize, tx: usize, distance: T, amplitude: T) -> Self {
        Self { distance, amplitude, sensor: Sensor::Passive { rx, tx } }
    }
}

/// Poisson rates of object and false-positive measurements.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClutterModel {
    pub mu_m: f64,
    pub mu_fp: f64,
    pub d_max: f64,
    pub p_mix: f64,
}

impl Default for ClutterModel {
    fn default() -> Self {
        Self { mu_m: 5.0, mu_fp: 5.0, d_max: 30.0, p_mix: 0.5 }
    }
}

/// Parameters of the range-noise variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseModel {
    /// RMS bandwidth [Hz].
    pub beta_bw: f64,
    pub c: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self { beta_bw: rms_bandwidth_raised_cosine(500e6, 0.6), c: SPEED_OF_LIGHT }
    }
}

/// RMS bandwidth of a raised-cosine spectrum with symbol rate `rs` and roll-off `alpha`.
pub fn rms_bandwidth_raised_cosine(rs: f64, alpha: f64) -> f64 {
    let pi2 = std::f64::consts::PI * std::f64::consts::PI;
    rs * (1.0 / 12.0 + alpha * alpha * (0.25 - 2.0 / pi2)).sqrt()
}

/// Scattering likelihood used by a filter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LikelihoodModel {
    /// Ellipse model evaluated by importance sampling with `samples` draws.
    Eo { samples: usize },
    /// Circle model with scattering ellipses evaluated by the unscented transform.
    Approx { omega: f64, kappa_ut: f64 },
    /// Point object at the device position, range spread `sigma_r`.
    Point { sigma_r: f64 },
}

/// Everything a filter needs to evaluate `ξ`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementModel<T: Scalar> {
    pub anchors: Vec<Vector2<T>>,
    pub noise: NoiseModel,
    pub clutter: ClutterModel,
    pub lhf: LikelihoodModel,
    pub use_passive: bool,
}

/// Range variance `c² / (8π² β² u²)` implied by the amplitude `u`.
pub fn fisher_variance<T: Scalar>(u: T, noise: &NoiseModel) -> Result<T> {
    if !(u > T::zero()) {
        return Err(Error::NonPositiveAmplitude(u.as_f64()));
    }
    let c = T::lit(noise.c);
    let beta = T::lit(noise.beta_bw);
    let pi = T::pi();
    Ok(c * c / (T::lit(8.0) * pi * pi * beta * beta * u * u))
}

/// Direct-path density of an active measurement.
pub fn los_lhf<T: Scalar>(
    z: &Measurement<T>,
    kin: &KinematicState<T>,
    anchors: &[Vector2<T>],
    noise: &NoiseModel,
) -> Result<T> {
    let anchor = match z.sensor {
        Sensor::Active { anchor } => anchor_at(anchors, anchor)?,
        Sensor::Passive { .. } => return Err(Error::InvalidArgument("direct path needs an active measurement".into())),
    };
    let var = fisher_variance(z.amplitude, noise)?;
    let h = (device_position(kin) - anchor).norm();
    Ok(normal_pdf(z.distance, h, var))
}

pub(crate) fn anchor_at<T: Scalar>(anchors: &[Vector2<T>], idx: usize) -> Result<Vector2<T>> {
    anchors
        .get(idx)
        .copied()
        .ok_or_else(|| Error::InvalidArgument(format!("anchor index {idx} out of range")))
}

/// Bistatic length of the scattered path of `sensor` through `q`.
#[inline]
pub fn path_length<T: Scalar>(q: &Vector2<T>, sensor: &Sensor, m: &Vector2<T>, anchors: &[Vector2<T>]) -> T {
    match *sensor {
        Sensor::Active { anchor } => (q - m).norm() + (q - anchors[anchor]).norm(),
        Sensor::Passive { rx, tx } => (q - anchors[tx]).norm() + (q - anchors[rx]).norm(),
    }
}

/// Support sector of a sensor on the ellipse, `None` when nothing is visible.
pub fn sensor_sector<T: Scalar>(
    extent: &EoExtent<T>,
    pose: &EoPose<T>,
    anchors: &[Vector2<T>],
    sensor: &Sensor,
) -> Option<AngularSector<T>> {
    match *sensor {
        Sensor::Active { anchor } => ellipse_fov(extent, pose, &anchors[anchor]).ok(),
        Sensor::Passive { rx, tx } => {
            let s_rx = ellipse_fov(extent, pose, &anchors[rx]).ok()?;
            let s_tx = ellipse_fov(extent, pose, &anchors[tx]).ok()?;
            common_fov(&s_rx, &s_tx)
        }
    }
}

/// Importance-sampling estimate of the ellipse-model scatter density.
#[allow(clippy::too_many_arguments)]
pub fn scatter_lhf_is<T: Scalar, R: Rng + ?Sized>(
    z: &Measurement<T>,
    kin: &KinematicState<T>,
    extent: &EoExtent<T>,
    sector: &AngularSector<T>,
    count: usize,
    anchors: &[Vector2<T>],
    noise: &NoiseModel,
    rng: &mut R,
) -> Result<T> {
    if count == 0 {
        return Err(Error::InvalidArgument("sample count must be at least 1".into()));
    }
    check_sensor(&z.sensor, anchors.len())?;
    let pose = EoPose::from_kinematic(kin);
    let sampler = AnnulusSectorSampler::new(extent, &pose, sector)?;
    let m = device_position(kin);
    let var = fisher_variance(z.amplitude, noise)?;
    let mut sum = T::zero();
    for _ in 0..count {
        let q = sampler.sample(rng);
        sum += normal_pdf(z.distance, path_length(&q, &z.sensor, &m, anchors), var);
    }
    Ok(sum / T::lit(count as f64))
}

fn check_sensor(sensor: &Sensor, n: usize) -> Result<()> {
    let ok = match *sensor {
        Sensor::Active { anchor } => anchor < n,
        Sensor::Passive { rx, tx } => rx < n && tx < n,
    };
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("invalid sensor {sensor:?} for {n} anchors")))
    }
}

/// Sigma points of the scattering ellipse facing anchor `rx`.
pub fn scatter_sigma_points<T: Scalar>(
    extent: &ApproxExtent<T>,
    omega: T,
    kappa: T,
    center: &Vector2<T>,
    anchor: &Vector2<T>,
) -> Result<SigmaPointSet<T>> {
    scattering_ellipse(extent, omega, center, anchor)?.sigma_points(kappa)
}

/// Mean and variance of the scattered path length under the unscented transform.
pub fn ut_path_moments<T: Scalar>(
    sp: &SigmaPointSet<T>,
    sensor: &Sensor,
    m: &Vector2<T>,
    anchors: &[Vector2<T>],
) -> (T, T) {
    sp.moments(|q| path_length(q, sensor, m, anchors))
}

/// Unscented-transform density of the circle-model scatter path.
pub fn scatter_lhf_ut<T: Scalar>(
    z: &Measurement<T>,
    kin: &KinematicState<T>,
    extent: &ApproxExtent<T>,
    omega: T,
    kappa: T,
    anchors: &[Vector2<T>],
    noise: &NoiseModel,
) -> Result<T> {
    check_sensor(&z.sensor, anchors.len())?;
    let sp = scatter_sigma_points(extent, omega, kappa, &kin.position, &anchors[z.sensor.rx()])?;
    let (mean, var_ut) = ut_path_moments(&sp, &z.sensor, &device_position(kin), anchors);
    let var = fisher_variance(z.amplitude, noise)?;
    Ok(normal_pdf(z.distance, mean, var_ut + var))
}

/// Uniform false-positive density over the distance coordinate.
pub fn false_positive_density<T: Scalar>(clutter: &ClutterModel) -> T {
    T::one() / T::lit(clutter.d_max)
}

/// `1 + (μ_m/μ_fp) f / f_fp`.
#[inline]
pub fn xi_from_density<T: Scalar>(f: T, f_fp: T, rate_ratio: T) -> T {
    T::one() + rate_ratio * f / f_fp.max(T::DENSITY_FLOOR)
}

/// Per-particle prediction of one sensor's scattered path lengths.
#[derive(Debug, Clone, PartialEq)]
pub enum ScatterPrediction<T: Scalar> {
    /// Sorted path lengths of importance samples.
    Paths(Vec<T>),
    /// Gaussian path-length distribution (unscented or point model).
    Gaussian { mean: T, var: T },
    /// The sensor cannot observe any scatter path.
    Invisible,
}

impl<T: Scalar> ScatterPrediction<T> {
    /// Density of a distance `z` with measurement variance `var`.
    pub fn density(&self, z: T, var: T) -> T {
        match self {
            ScatterPrediction::Paths(paths) => mixture_density(paths, z, var),
            ScatterPrediction::Gaussian { mean, var: spread } => normal_pdf(z, *mean, *spread + var),
            ScatterPrediction::Invisible => T::zero(),
        }
    }
}

/// Equal-weight Gaussian mixture over sorted centers, skipping negligible terms.
fn mixture_density<T: Scalar>(sorted: &[T], z: T, var: T) -> T {
    if sorted.is_empty() {
        return T::zero();
    }
    let reach = (T::lit(2.0 * GAUSS_SKIP_NATS) * var).sqrt();
    let lo = sorted.partition_point(|h| *h < z - reach);
    let hi = sorted.partition_point(|h| *h <= z + reach);
    let mut sum = T::zero();
    for h in &sorted[lo..hi] {
        sum += normal_pdf(z, *h, var);
    }
    sum / T::lit(sorted.len() as f64)
}

/// Builds the scatter predictions of one particle for a list of sensors.
///
/// Importance samples are drawn once per sensor and reused for every
/// measurement of that sensor. Sigma points are computed once per receiving
/// anchor and shared between its active and passive links.
pub struct PredictionContext<'a, T: Scalar> {
    pub model: &'a MeasurementModel<T>,
    sigma_cache: Vec<Option<Result<SigmaPointSet<T>, ()>>>,
}

impl<'a, T: Scalar> PredictionContext<'a, T> {
    pub fn new(model: &'a MeasurementModel<T>) -> Self {
        Self { model, sigma_cache: vec![None; model.anchors.len()] }
    }

    pub fn predict<R: Rng + ?Sized>(
        &mut self,
        y: &AugmentedState<T>,
        sensors: &[Sensor],
        rng: &mut R,
        out: &mut Vec<ScatterPrediction<T>>,
    ) {
        for slot in self.sigma_cache.iter_mut() {
            *slot = None;
        }
        let m = device_position(&y.kin);
        let pose = EoPose::from_kinematic(&y.kin);
        out.resize(sensors.len(), ScatterPrediction::Invisible);
        for (sensor, slot) in sensors.iter().zip(out.iter_mut()) {
            self.fill(y, &m, &pose, sensor, rng, slot);
        }
    }

    fn fill<R: Rng + ?Sized>(
        &mut self,
        y: &AugmentedState<T>,
        m: &Vector2<T>,
        pose: &EoPose<T>,
        sensor: &Sensor,
        rng: &mut R,
        slot: &mut ScatterPrediction<T>,
    ) {
        let anchors = &self.model.anchors;
        match (&self.model.lhf, &y.extent) {
            (LikelihoodModel::Point { sigma_r }, _) => {
                let s2 = T::lit(*sigma_r) * T::lit(*sigma_r);
                let mean = match *sensor {
                    Sensor::Active { anchor } => (m - anchors[anchor]).norm(),
                    Sensor::Passive { rx, tx } => (m - anchors[tx]).norm() + (m - anchors[rx]).norm(),
                };
                *slot = ScatterPrediction::Gaussian { mean, var: s2 };
            }
            (LikelihoodModel::Eo { samples }, Extent::Ellipse(extent)) => {
                let Some(sector) = sensor_sector(extent, pose, anchors, sensor) else {
                    *slot = ScatterPrediction::Invisible;
                    return;
                };
                let Ok(sampler) = AnnulusSectorSampler::new(extent, pose, &sector) else {
                    *slot = ScatterPrediction::Invisible;
                    return;
                };
                let mut paths = match std::mem::replace(slot, ScatterPrediction::Invisible) {
                    ScatterPrediction::Paths(mut v) => {
                        v.clear();
                        v
                    }
                    _ => Vec::with_capacity(*samples),
                };
                for _ in 0..*samples {
                    let q = sampler.sample(rng);
                    paths.push(path_length(&q, sensor, m, anchors));
                }
                paths.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
                *slot = ScatterPrediction::Paths(paths);
            }
            (LikelihoodModel::Approx { omega, kappa_ut }, Extent::Circle(extent)) => {
                let rx = sensor.rx();
                let cached = self.sigma_cache[rx].get_or_insert_with(|| {
                    scatter_sigma_points(extent, T::lit(*omega), T::lit(*kappa_ut), &y.kin.position, &anchors[rx])
                        .map_err(|_| ())
                });
                *slot = match cached {
                    Ok(sp) => {
                        let (mean, var) = ut_path_moments(sp, sensor, m, anchors);
                        ScatterPrediction::Gaussian { mean, var }
                    }
                    Err(()) => ScatterPrediction::Invisible,
                };
            }
            // Extent of the wrong model family carries no scatter information.
            _ => *slot = ScatterPrediction::Invisible,
        }
    }
}

/// Object-originated density `f(z | y)` of one measurement given the scatter prediction.
///
/// Active measurements mix the direct path and the scatter path, except for
/// the point model which uses its widened point density alone.
pub fn measurement_density<T: Scalar>(
    z: &Measurement<T>,
    var: T,
    m: &Vector2<T>,
    prediction: &ScatterPrediction<T>,
    model: &MeasurementModel<T>,
) -> T {
    match (z.sensor, &model.lhf) {
        (_, LikelihoodModel::Point { .. }) => prediction.density(z.distance, var),
        (Sensor::Active { anchor }, _) => {
            let p_mix = T::lit(model.clutter.p_mix);
            let h = (m - model.anchors[anchor]).norm();
            let f_d = normal_pdf(z.distance, h, var);
            let f_s = prediction.density(z.distance, var);
            p_mix * f_d + (T::one() - p_mix) * f_s
        }
        (Sensor::Passive { .. }, _) => prediction.density(z.distance, var),
    }
}

/// Mixture of direct and scatter densities for an active measurement.
pub fn active_lhf<T: Scalar, R: Rng + ?Sized>(
    z: &Measurement<T>,
    y: &AugmentedState<T>,
    model: &MeasurementModel<T>,
    rng: &mut R,
) -> Result<T> {
    if !matches!(z.sensor, Sensor::Active { .. }) {
        return Err(Error::InvalidArgument("expected an active measurement".into()));
    }
    object_lhf(z, y, model, rng)
}

/// Object-originated density of any measurement under `model`.
pub fn object_lhf<T: Scalar, R: Rng + ?Sized>(
    z: &Measurement<T>,
    y: &AugmentedState<T>,
    model: &MeasurementModel<T>,
    rng: &mut R,
) -> Result<T> {
    check_sensor(&z.sensor, model.anchors.len())?;
    let var = fisher_variance(z.amplitude, &model.noise)?;
    let mut ctx = PredictionContext::new(model);
    let mut preds = Vec::new();
    ctx.predict(y, &[z.sensor], rng, &mut preds);
    Ok(measurement_density(z, var, &device_position(&y.kin), &preds[0], model))
}

/// Pseudo-likelihood factor `ξ(z; y)`.
pub fn xi_factor<T: Scalar, R: Rng + ?Sized>(
    z: &Measurement<T>,
    y: &AugmentedState<T>,
    model: &MeasurementModel<T>,
    rng: &mut R,
) -> Result<T> {
    let f = object_lhf(z, y, model, rng)?;
    let c = &model.clutter;
    Ok(xi_from_density(f, false_positive_density(c), T::lit(c.mu_m / c.mu_fp)))
}
