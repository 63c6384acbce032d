//! Floating-point abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};

use nalgebra::RealField;
use num_traits::ToPrimitive;
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

/// Real scalar usable for geometry, likelihoods and filtering: `f32` or `f64`.
///
/// Besides the algebra inherited from [`RealField`], the trait carries the
/// handful of random draws the filter needs so that generic code does not
/// have to spell out `rand_distr` bounds everywhere.
pub trait Scalar:
    RealField + Copy + ToPrimitive + Default + Display + Debug + Send + Sync + 'static
{
    /// Densities are clamped below at this value before ratios are taken.
    const DENSITY_FLOOR: Self;

    /// Converts an `f64` literal.
    fn lit(x: f64) -> Self;

    /// Lossy conversion to `f64` for reporting.
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Uniform draw on `[0, 1)`.
    fn sample_unit<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Standard normal draw.
    fn sample_standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Gamma draw with the given shape and scale (mean `shape * scale`).
    fn sample_gamma<R: Rng + ?Sized>(rng: &mut R, shape: Self, scale: Self) -> Self;

    /// Uniform draw on `[lo, hi)`; returns `lo` when the interval is empty.
    fn sample_uniform<R: Rng + ?Sized>(rng: &mut R, lo: Self, hi: Self) -> Self {
        lo + (hi - lo) * Self::sample_unit(rng)
    }

    /// Normal draw with the given mean and standard deviation.
    fn sample_normal<R: Rng + ?Sized>(rng: &mut R, mean: Self, std: Self) -> Self {
        mean + std * Self::sample_standard_normal(rng)
    }
}

macro_rules! impl_scalar {
    ($t:ty, $floor:expr) => {
        impl Scalar for $t {
            const DENSITY_FLOOR: Self = $floor;

            #[inline]
            fn lit(x: f64) -> Self {
                x as $t
            }

            #[inline]
            fn sample_unit<R: Rng + ?Sized>(rng: &mut R) -> Self {
                rng.random::<$t>()
            }

            #[inline]
            fn sample_standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
                StandardNormal.sample(rng)
            }

            fn sample_gamma<R: Rng + ?Sized>(rng: &mut R, shape: Self, scale: Self) -> Self {
                match Gamma::new(shape, scale) {
                    Ok(g) => g.sample(rng),
                    // Non-positive scale only arises from a degenerate state; keep it put.
                    Err(_) => shape * scale,
                }
            }
        }
    };
}

impl_scalar!(f64, 1e-300);
impl_scalar!(f32, 1e-37);

/// Wraps an angle into `[-π, π)`.
pub fn wrap_angle<T: Scalar>(x: T) -> T {
    let two_pi = T::two_pi();
    let mut y = (x + T::pi()) % two_pi;
    if y < T::zero() {
        y += two_pi;
    }
    let y = y - T::pi();
    // Rounding in the modulo can land exactly on +π.
    if y >= T::pi() {
        y - two_pi
    } else {
        y
    }
}

/// Univariate normal density.
#[inline]
pub fn normal_pdf<T: Scalar>(x: T, mean: T, var: T) -> T {
    let d = x - mean;
    (-(d * d) / (T::lit(2.0) * var)).exp() / (T::two_pi() * var).sqrt()
}
