//! Point-object PDA baselines.
//!
//! These reuse the particle filter unchanged and swap the scattering
//! likelihoods for Gaussians centered on the device-position paths, widened
//! by `sigma_r`. Extent components ride along in the state but are never
//! informed by the measurements.

use nalgebra::Vector2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{KinematicState, MotionParams};
use crate::error::Result;
use crate::geometry::device_position;
use crate::likelihood::{anchor_at, fisher_variance, ClutterModel, LikelihoodModel, Measurement, MeasurementModel, NoiseModel, Sensor};
use crate::scalar::{normal_pdf, Scalar};
use crate::spa_filter::{step, Estimate, FrameMeasurements, ParticleSet};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PdaConfig {
    /// Extra range standard deviation [m].
    pub sigma_r: f64,
    pub use_passive: bool,
}

/// Point-object density of a measurement.
///
/// Active links use `‖m − p_a‖`, passive links `‖m − p_tx‖ + ‖m − p_rx‖`.
pub fn point_lhf<T: Scalar>(
    z: &Measurement<T>,
    kin: &KinematicState<T>,
    anchors: &[Vector2<T>],
    noise: &NoiseModel,
    config: &PdaConfig,
) -> Result<T> {
    let m = device_position(kin);
    let h = match z.sensor {
        Sensor::Active { anchor } => (m - anchor_at(anchors, anchor)?).norm(),
        Sensor::Passive { rx, tx } => (m - anchor_at(anchors, tx)?).norm() + (m - anchor_at(anchors, rx)?).norm(),
    };
    let s = T::lit(config.sigma_r);
    let var = fisher_variance(z.amplitude, noise)?;
    Ok(normal_pdf(z.distance, h, var + s * s))
}

/// Measurement model of a PDA baseline.
pub fn pda_model<T: Scalar>(
    anchors: Vec<Vector2<T>>,
    noise: NoiseModel,
    clutter: ClutterModel,
    config: &PdaConfig,
) -> MeasurementModel<T> {
    MeasurementModel {
        anchors,
        noise,
        clutter,
        lhf: LikelihoodModel::Point { sigma_r: config.sigma_r },
        use_passive: config.use_passive,
    }
}

/// One PDA filter step; identical to [`step`] with point likelihoods.
pub fn pda_step<T: Scalar, R: Rng + ?Sized>(
    ps: &ParticleSet<T>,
    frame: &FrameMeasurements<T>,
    params: &MotionParams,
    model: &MeasurementModel<T>,
    rng: &mut R,
) -> Result<(ParticleSet<T>, Estimate<T>)> {
    debug_assert!(matches!(model.lhf, LikelihoodModel::Point { .. }));
    step(ps, frame, params, model, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::likelihood::los_lhf;
    use crate::spa_filter::{init_particles, update, ExtentKind, PassiveList, PriorConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn kin(p: (f64, f64), b_rho: f64) -> KinematicState<f64> {
        KinematicState::new(Vector2::new(p.0, p.1), Vector2::new(0.0, 1.0), b_rho, -0.4)
    }

    #[test]
    fn zero_spread_equals_direct_path_bitwise() {
        let anchors = vec![Vector2::new(4.0, 5.0), Vector2::new(-3.0, 2.0)];
        let noise = NoiseModel::default();
        let cfg = PdaConfig { sigma_r: 0.0, use_passive: false };
        for d in [4.0, 5.3, 6.1] {
            let z = Measurement::active(0, d, 7.5);
            let k = kin((0.7, -0.2), 0.31);
            let a = point_lhf(&z, &k, &anchors, &noise, &cfg).unwrap();
            let b = los_lhf(&z, &k, &anchors, &noise).unwrap();
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn effective_variance_adds() {
        // σ_meas = 0.03 is reached by picking the matching amplitude.
        let noise = NoiseModel { beta_bw: 1e8, c: 3e8 };
        let u = noise.c / (0.03 * (8.0f64).sqrt() * std::f64::consts::PI * noise.beta_bw);
        let anchors = vec![Vector2::new(3.0, 4.0)];
        let k = kin((0.0, 0.0), 0.0);
        let cfg = PdaConfig { sigma_r: 0.2, use_passive: true };
        let peak = point_lhf(&Measurement::active(0, 5.0, u), &k, &anchors, &noise, &cfg).unwrap();
        let expected = 1.0 / (2.0 * std::f64::consts::PI * 0.0409f64).sqrt();
        assert!((peak / expected - 1.0).abs() < 1e-9);
    }

    #[test]
    fn passive_mean_is_path_sum() {
        let anchors = vec![Vector2::new(0.0, 5.0), Vector2::new(3.0, 4.0)];
        let noise = NoiseModel::default();
        let cfg = PdaConfig { sigma_r: 0.0, use_passive: true };
        let k = kin((0.0, 0.0), 0.0);
        let z = Measurement::passive(0, 1, 10.0, 10.0);
        let peak = point_lhf(&z, &k, &anchors, &noise, &cfg).unwrap();
        let var = fisher_variance(10.0, &noise).unwrap();
        assert!((peak - normal_pdf(10.0, 10.0, var)).abs() < 1e-12 * peak);
    }

    #[test]
    fn widening_is_monotone() {
        let anchors = vec![Vector2::new(3.0, 4.0)];
        let noise = NoiseModel::default();
        let k = kin((0.0, 0.0), 0.0);
        let sigma = fisher_variance(10.0f64, &noise).unwrap().sqrt();
        let mut last_peak = f64::INFINITY;
        let mut last_tail = 0.0;
        // The density at a fixed offset d grows with the variance only while it stays below d².
        for s in [0.0, 0.01, 0.03, 0.05] {
            assert!(s * s + sigma * sigma < 9.0 * sigma * sigma);
            let cfg = PdaConfig { sigma_r: s, use_passive: false };
            let peak = point_lhf(&Measurement::active(0, 5.0, 10.0), &k, &anchors, &noise, &cfg).unwrap();
            let tail = point_lhf(&Measurement::active(0, 5.0 + 3.0 * sigma, 10.0), &k, &anchors, &noise, &cfg).unwrap();
            assert!(peak < last_peak && tail > last_tail);
            last_peak = peak;
            last_tail = tail;
        }
    }

    #[test]
    fn active_only_ignores_passive_lists() {
        let anchors = vec![Vector2::new(4.0, 0.0), Vector2::new(0.0, 4.0)];
        let model = pda_model(anchors, NoiseModel::default(), ClutterModel::default(), &PdaConfig { sigma_r: 0.0, use_passive: false });
        let ps = init_particles::<f64, _>(&PriorConfig::default(), ExtentKind::Circle, 100, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let mut f1 = FrameMeasurements::empty(2);
        f1.active[0].push(Measurement::active(0, 3.8, 10.0));
        let mut f2 = f1.clone();
        f2.passive.push(PassiveList { rx: 1, tx: 0, measurements: vec![Measurement::passive(1, 0, 8.0, 5.0)] });
        let a = update(&ps, &f1, &model, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let b = update(&ps, &f2, &model, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        assert_eq!(a.weights, b.weights);
    }

    #[test]
    fn pda_step_is_deterministic() {
        let anchors = vec![Vector2::new(4.0, 0.0), Vector2::new(0.0, 4.0)];
        let model = pda_model(anchors, NoiseModel::default(), ClutterModel::default(), &PdaConfig { sigma_r: 0.2, use_passive: true });
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            let ps = init_particles::<f64, _>(&PriorConfig::default(), ExtentKind::Circle, 100, &mut rng).unwrap();
            let mut f = FrameMeasurements::empty(2);
            f.active[1].push(Measurement::active(1, 3.9, 10.0));
            pda_step(&ps, &f, &MotionParams::default(), &model, &mut rng).unwrap().1.device_position
        };
        assert_eq!(run(), run());
    }
}
