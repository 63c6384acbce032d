use std::f64::consts::PI;

use eotrack::dynamics::{wrapped_normal_pdf, KinematicState, MotionParams};
use eotrack::geometry::{
    annulus_preimage, annulus_sector_contains, ellipse_fov, sample_annulus_sector, sigma_points, AngularSector,
    EoExtent, EoPose,
};
use eotrack::likelihood::{
    fisher_variance, scatter_lhf_is, sensor_sector, xi_from_density, Measurement, NoiseModel, Sensor,
};
use eotrack::metrics::{ecdf, pcrlb_step, rmse, PcrlbState, RunRecord, StepRecord};
use eotrack::spa_filter::normalize_log_weights;
use nalgebra::{Matrix2, Vector2};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn vec2() -> impl Strategy<Value = Vector2<f64>> {
    (-5.0..5.0f64, -5.0..5.0f64).prop_map(|(x, y)| Vector2::new(x, y))
}

fn extent() -> impl Strategy<Value = EoExtent<f64>> {
    (0.05..1.0f64, 0.2..1.0f64, 0.0..0.95f64).prop_map(|(a, rb, rw)| {
        let b = a * rb;
        EoExtent::new(a, b, b * rw)
    })
}

fn record(errors: &[(f64, f64)]) -> RunRecord {
    RunRecord {
        steps: errors
            .iter()
            .enumerate()
            .map(|(k, &(dx, dy))| StepRecord {
                step: k + 1,
                true_m: [0.0, 0.0],
                est_m: [dx, dy],
                b_rho: 0.3,
                b_phi: 0.0,
                extent_1: 0.3,
                extent_2: 0.2,
                extent_3: None,
            })
            .collect(),
        diverged_at: None,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn normalized_weights_sum_to_one(log_w in prop::collection::vec(-700.0..700.0f64, 1..200)) {
        let w = normalize_log_weights(&log_w).unwrap();
        let sum: f64 = w.iter().sum();
        prop_assert!((sum - 1.0).abs() < 1e-12);
        prop_assert!(w.iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn xi_is_at_least_one(f in 0.0..1e6f64, d_max in 0.1..100.0f64, ratio in 1e-3..1e3f64) {
        let xi = xi_from_density(f, 1.0 / d_max, ratio);
        prop_assert!(xi >= 1.0);
        if f == 0.0 {
            prop_assert_eq!(xi, 1.0);
        }
    }

    #[test]
    fn sigma_points_reconstruct_moments(
        chi in vec2(),
        l1 in 0.0..4.0f64,
        l2 in 0.0..4.0f64,
        angle in -PI..PI,
        kappa in -1.5..5.0f64,
    ) {
        let (s, c) = angle.sin_cos();
        let rot = Matrix2::new(c, -s, s, c);
        let cov = rot * Matrix2::new(l1, 0.0, 0.0, l2) * rot.transpose();
        let sp = sigma_points(chi, &cov, kappa).unwrap();
        let mean: Vector2<f64> = sp.points.iter().zip(&sp.weights).map(|(p, w)| p * *w).sum();
        let recon: Matrix2<f64> =
            sp.points.iter().zip(&sp.weights).map(|(p, w)| (p - chi) * (p - chi).transpose() * *w).sum();
        prop_assert!((mean - chi).norm() < 1e-9);
        prop_assert!((recon - cov).norm() < 1e-9);
        prop_assert!((sp.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn wrapped_normal_integrates_to_one(mu in -PI..PI, sigma in 0.05..1.5f64) {
        let n = 20_000;
        let h = 2.0 * PI / n as f64;
        // Midpoint rule is spectrally accurate for smooth periodic integrands.
        let total: f64 = (0..n).map(|i| wrapped_normal_pdf(-PI + (i as f64 + 0.5) * h, mu, sigma, 3)).sum::<f64>() * h;
        prop_assert!((total - 1.0).abs() < 1e-8, "total {total}");
    }

    #[test]
    fn circle_fov_matches_tangency(r in 0.05..2.0f64, dist_factor in 1.05..20.0f64, angle in -PI..PI, center in vec2()) {
        let ext = EoExtent::new(r, r, 0.0);
        let pose = EoPose::new(center, 0.3);
        let anchor = center + Vector2::new(angle.cos(), angle.sin()) * (r * dist_factor);
        let fov = ellipse_fov(&ext, &pose, &anchor).unwrap();
        let half = (1.0 / dist_factor).acos();
        prop_assert!((fov.span - 2.0 * half).abs() < 1e-9);
        // The middle of the arc faces the anchor.
        let mid = fov.start + half;
        let toward = eotrack::scalar::wrap_angle(angle - 0.3);
        prop_assert!(eotrack::scalar::wrap_angle(mid - toward).abs() < 1e-9);
    }

    #[test]
    fn adding_an_anchor_never_raises_the_bound(
        p in vec2(),
        v in vec2(),
        anchors in prop::collection::vec((vec2(), 1e-4..1e-1f64), 0..4),
        extra in vec2(),
        extra_var in 1e-4..1e-1f64,
        pos_std in 0.05..1.0f64,
    ) {
        prop_assume!((extra - p).norm() > 0.1);
        let kin = KinematicState::new(p, v, 0.0, 0.0);
        let params = MotionParams::default();
        let prior = PcrlbState::from_prior(pos_std, 0.3).unwrap();
        let base = pcrlb_step(&prior, &anchors, &kin, &params).unwrap();
        let mut more = anchors.clone();
        more.push((extra, extra_var));
        let with = pcrlb_step(&prior, &more, &kin, &params).unwrap();
        prop_assert!(with.bound <= base.bound * (1.0 + 1e-12));
    }

    #[test]
    fn ecdf_scales_with_the_data(values in prop::collection::vec(0.0..10.0f64, 1..100), s in 0.01..100.0f64) {
        let a = ecdf(&values).unwrap();
        let scaled: Vec<f64> = values.iter().map(|v| v * s).collect();
        let b = ecdf(&scaled).unwrap();
        prop_assert_eq!(a.len(), b.len());
        for ((x, fa), (y, fb)) in a.iter().zip(&b) {
            prop_assert_eq!(fa, fb);
            prop_assert!((x * s - y).abs() <= 1e-12 * y.abs().max(1.0));
        }
    }

    #[test]
    fn rmse_ignores_run_order(
        runs in prop::collection::vec(prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 5), 1..8),
        rotate in 0usize..8,
    ) {
        let records: Vec<RunRecord> = runs.iter().map(|r| record(r)).collect();
        let mut shuffled = records.clone();
        shuffled.rotate_left(rotate % records.len());
        shuffled.reverse();
        let a = rmse(&records).unwrap();
        let b = rmse(&shuffled).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn amplitude_scaling_scales_variance(u in 0.5..100.0f64, s in 0.1..10.0f64) {
        let noise = NoiseModel::default();
        let v1 = fisher_variance(u, &noise).unwrap();
        let v2 = fisher_variance(u * s, &noise).unwrap();
        prop_assert!((v2 * s * s / v1 - 1.0).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn sampler_points_lie_in_the_sector(
        ext in extent(),
        center in vec2(),
        orientation in -PI..PI,
        start in -PI..PI,
        span in 0.05..(2.0 * PI),
        seed in any::<u64>(),
    ) {
        let pose = EoPose::new(center, orientation);
        let sector = AngularSector::new(start, span);
        let pts = sample_annulus_sector(&ext, &pose, &sector, 100_000, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        prop_assert!(pts.iter().all(|q| annulus_sector_contains(&ext, &pose, &sector, q, 1e-9)));
    }
}

#[test]
fn sampler_preimage_is_uniform() {
    let ext = EoExtent::new(0.3, 0.2, 0.05);
    let pose = EoPose::new(Vector2::new(1.0, -0.5), 0.7);
    let sector = AngularSector::from_bounds(-PI / 3.0, PI / 3.0);
    let n = 100_000;
    let pts = sample_annulus_sector(&ext, &pose, &sector, n, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
    let (r_in2, r_out2) = (ext.inner_radius().powi(2), ext.outer_radius().powi(2));
    let bins = 20;
    let mut counts = vec![0usize; bins * bins];
    for q in &pts {
        let (r, phi) = annulus_preimage(&ext, &pose, q);
        // Area-uniform means ρ² and φ are independent and uniform.
        let i = (((r * r - r_in2) / (r_out2 - r_in2)) * bins as f64).floor().clamp(0.0, bins as f64 - 1.0) as usize;
        let j = (((phi - sector.start) / sector.span) * bins as f64).floor().clamp(0.0, bins as f64 - 1.0) as usize;
        counts[i * bins + j] += 1;
    }
    let expected = n as f64 / (bins * bins) as f64;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let critical = ChiSquared::new((bins * bins - 1) as f64).unwrap().inverse_cdf(0.99);
    assert!(chi2 < critical, "chi2 {chi2} >= {critical}");
}

type ScatterCase = (KinematicState<f64>, EoExtent<f64>, Vec<Vector2<f64>>, Measurement<f64>, AngularSector<f64>);

fn default_scatter_case() -> ScatterCase {
    let kin = KinematicState::new(Vector2::new(1.5, 1.0), Vector2::new(0.33, 0.0), 0.32, -PI / 3.0);
    let ext = EoExtent::new(0.3, 0.2, 0.05);
    let anchors = vec![Vector2::new(0.0, 0.0), Vector2::new(4.0, 0.0), Vector2::new(2.0, 4.0)];
    let sensor = Sensor::Passive { rx: 1, tx: 0 };
    let sector = sensor_sector(&ext, &EoPose::from_kinematic(&kin), &anchors, &sensor).unwrap();
    // Distance near the middle of the path-length support.
    let z = Measurement::passive(1, 0, 1.5 + 2.5 + 0.1, 5.0);
    (kin, ext, anchors, z, sector)
}

#[test]
fn importance_sampling_is_unbiased() {
    let (kin, ext, anchors, z, sector) = default_scatter_case();
    let noise = NoiseModel::default();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let reference = scatter_lhf_is(&z, &kin, &ext, &sector, 1_000_000, &anchors, &noise, &mut rng).unwrap();
    assert!(reference > 0.0);
    let batch: Vec<f64> = (0..400)
        .map(|_| scatter_lhf_is(&z, &kin, &ext, &sector, 1_000, &anchors, &noise, &mut rng).unwrap())
        .collect();
    let n = batch.len() as f64;
    let mean = batch.iter().sum::<f64>() / n;
    let se = (batch.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt();
    assert!((mean - reference).abs() < 3.0 * se, "mean {mean} reference {reference} se {se}");
}

#[test]
fn importance_sampling_converges() {
    let (kin, ext, anchors, z, sector) = default_scatter_case();
    let noise = NoiseModel::default();
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let coarse = scatter_lhf_is(&z, &kin, &ext, &sector, 100_000, &anchors, &noise, &mut rng).unwrap();
    let fine = scatter_lhf_is(&z, &kin, &ext, &sector, 1_000_000, &anchors, &noise, &mut rng).unwrap();
    assert!((coarse / fine - 1.0).abs() < 0.01, "{coarse} vs {fine}");
}
