//! State-transition sampling for kinematic, bias and extent states.

use nalgebra::Vector2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::{heading_of, ApproxExtent, EoExtent};
use crate::scalar::{normal_pdf, wrap_angle, Scalar};

/// Below this speed the heading is held instead of recomputed from velocity.
pub const MIN_HEADING_SPEED: f64 = 1e-6;

/// Rejection attempts before extent constraints are enforced by clamping.
pub const EXTENT_REDRAWS: usize = 100;

/// Truncation half-width of the wrapped normal sum.
pub const WRAP_TERMS: usize = 3;

/// Position, velocity and device bias relative to the object center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KinematicState<T: Scalar> {
    pub position: Vector2<T>,
    pub velocity: Vector2<T>,
    /// Distance of the device from the object center, `b_ρ`.
    pub bias_range: T,
    /// Angle of the device in the object frame, `b_φ`.
    pub bias_angle: T,
    /// Orientation derived from the velocity, held when the object stops.
    pub heading: T,
}

impl<T: Scalar> KinematicState<T> {
    pub fn new(position: Vector2<T>, velocity: Vector2<T>, bias_range: T, bias_angle: T) -> Self {
        Self {
            position,
            velocity,
            bias_range,
            bias_angle: wrap_angle(bias_angle),
            heading: heading_of(&velocity),
        }
    }

    /// Recomputes the heading from the velocity unless the speed is negligible.
    pub fn refresh_heading(&mut self) {
        if self.velocity.norm() >= T::lit(MIN_HEADING_SPEED) {
            self.heading = heading_of(&self.velocity);
        }
    }
}

/// Noise parameters of the transition model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MotionParams {
    pub dt: f64,
    pub sigma_a: f64,
    pub kappa_rho: f64,
    pub sigma_phi: f64,
    pub kappa_a: f64,
    pub kappa_b: f64,
    pub kappa_w: f64,
    pub kappa_r: f64,
    pub kappa_ws: f64,
}

impl Default for MotionParams {
    fn default() -> Self {
        Self {
            dt: 0.1,
            sigma_a: 2.0,
            kappa_rho: 100.0,
            sigma_phi: 0.5,
            kappa_a: 400.0,
            kappa_b: 400.0,
            kappa_w: 400.0,
            kappa_r: 400.0,
            kappa_ws: 400.0,
        }
    }
}

impl MotionParams {
    pub fn is_valid(&self) -> bool {
        [
            self.dt,
            self.kappa_rho,
            self.kappa_a,
            self.kappa_b,
            self.kappa_w,
            self.kappa_r,
            self.kappa_ws,
        ]
        .iter()
        .all(|x| *x > 0.0 && x.is_finite())
            && self.sigma_a >= 0.0
            && self.sigma_phi >= 0.0
    }

    /// Copy with acceleration and bias-angle noise scaled by `factor` and
    /// Gamma shapes divided by `factor²`.
    pub fn inflated(&self, factor: f64) -> Self {
        let f2 = factor * factor;
        Self {
            dt: self.dt,
            sigma_a: self.sigma_a * factor,
            kappa_rho: self.kappa_rho / f2,
            sigma_phi: self.sigma_phi * factor,
            kappa_a: self.kappa_a / f2,
            kappa_b: self.kappa_b / f2,
            kappa_w: self.kappa_w / f2,
            kappa_r: self.kappa_r / f2,
            kappa_ws: self.kappa_ws / f2,
        }
    }
}

/// Extent of either object model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Extent<T: Scalar> {
    Ellipse(EoExtent<T>),
    Circle(ApproxExtent<T>),
}

impl<T: Scalar> Extent<T> {
    pub fn is_valid(&self) -> bool {
        match self {
            Extent::Ellipse(e) => e.is_valid(),
            Extent::Circle(c) => c.is_valid(),
        }
    }
}

/// Augmented state `y = (x, X)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentedState<T: Scalar> {
    pub kin: KinematicState<T>,
    pub extent: Extent<T>,
}

/// Constant-velocity step with one shared acceleration draw per axis.
pub fn predict_kinematic<T: Scalar, R: Rng + ?Sized>(
    kin: &KinematicState<T>,
    params: &MotionParams,
    rng: &mut R,
) -> KinematicState<T> {
    let dt = T::lit(params.dt);
    let sigma_a = T::lit(params.sigma_a);
    let accel = Vector2::new(
        sigma_a * T::sample_standard_normal(rng),
        sigma_a * T::sample_standard_normal(rng),
    );
    let mut out = *kin;
    out.position = kin.position + kin.velocity * dt + accel * (dt * dt / T::lit(2.0));
    out.velocity = kin.velocity + accel * dt;
    out.refresh_heading();
    out
}

/// Gamma transition of `b_ρ` and wrapped-normal transition of `b_φ`.
pub fn transition_bias<T: Scalar, R: Rng + ?Sized>(
    bias_range: T,
    bias_angle: T,
    params: &MotionParams,
    rng: &mut R,
) -> (T, T) {
    let rho = gamma_step(bias_range, params.kappa_rho, rng);
    let phi = wrap_angle(bias_angle + T::lit(params.sigma_phi) * T::sample_standard_normal(rng));
    (rho, phi)
}

#[inline]
fn gamma_step<T: Scalar, R: Rng + ?Sized>(x: T, kappa: f64, rng: &mut R) -> T {
    let k = T::lit(kappa);
    T::sample_gamma(rng, k, x / k)
}

/// Independent Gamma transitions of every extent component.
pub fn transition_extent<T: Scalar, R: Rng + ?Sized>(
    extent: &Extent<T>,
    params: &MotionParams,
    rng: &mut R,
) -> Extent<T> {
    match extent {
        Extent::Ellipse(e) => Extent::Ellipse(transition_ellipse(e, params, rng)),
        Extent::Circle(c) => Extent::Circle(ApproxExtent::new(
            gamma_step(c.r, params.kappa_r, rng),
            gamma_step(c.w_s, params.kappa_ws, rng),
        )),
    }
}

fn transition_ellipse<T: Scalar, R: Rng + ?Sized>(
    e: &EoExtent<T>,
    params: &MotionParams,
    rng: &mut R,
) -> EoExtent<T> {
    let mut last = *e;
    for _ in 0..EXTENT_REDRAWS {
        last = EoExtent::new(
            gamma_step(e.a, params.kappa_a, rng),
            gamma_step(e.b, params.kappa_b, rng),
            gamma_step(e.w, params.kappa_w, rng),
        );
        if last.is_valid() {
            return last;
        }
    }
    let (a, b) = if last.a >= last.b { (last.a, last.b) } else { (last.b, last.a) };
    let w = if last.w < b { last.w } else { b * T::lit(0.99) };
    EoExtent::new(a, b, w)
}

/// Full transition `f(y_n | y_{n-1})`.
pub fn predict_state<T: Scalar, R: Rng + ?Sized>(
    y: &AugmentedState<T>,
    params: &MotionParams,
    rng: &mut R,
) -> AugmentedState<T> {
    let mut kin = predict_kinematic(&y.kin, params, rng);
    let (rho, phi) = transition_bias(y.kin.bias_range, y.kin.bias_angle, params, rng);
    kin.bias_range = rho;
    kin.bias_angle = phi;
    AugmentedState {
        kin,
        extent: transition_extent(&y.extent, params, rng),
    }
}

/// Wrapped normal density truncated to `k ∈ [-terms, terms]`.
pub fn wrapped_normal_pdf<T: Scalar>(x: T, mu: T, sigma: T, terms: usize) -> T {
    let var = sigma * sigma;
    let mut sum = T::zero();
    let n = terms as i64;
    for k in -n..=n {
        sum += normal_pdf(x + T::two_pi() * T::lit(k as f64), mu, var);
    }
    sum
}
