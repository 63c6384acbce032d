//! Deterministic geometry of the two object models.
//!
//! The full model treats the object as an ellipse whose scatterers lie in an
//! elliptic annulus sector limited by the field of view (FoV) of one anchor
//! or the common FoV of an anchor pair. The approximate model replaces the
//! ellipse by a circle and places one Gaussian scattering ellipse on the
//! circle per receiving anchor.
//!
//! Angles of annulus sectors are *parametric* angles: the polar angle of a
//! point after it has been mapped into the frame where the object ellipse
//! is the unit circle.

use nalgebra::{Matrix2, SymmetricEigen, Vector2};
use rand::Rng;

use crate::dynamics::KinematicState;
use crate::error::{Error, Result};
use crate::scalar::{wrap_angle, Scalar};

/// Eigenvalue regularization added to scattering matrices.
pub const SCATTER_EPS: f64 = 1e-12;

/// Center and orientation of the object.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EoPose<T: Scalar> {
    pub center: Vector2<T>,
    /// Heading in `[-π, π)`.
    pub orientation: T,
}

impl<T: Scalar> EoPose<T> {
    pub fn new(center: Vector2<T>, orientation: T) -> Self {
        Self {
            center,
            orientation: wrap_angle(orientation),
        }
    }

    pub fn from_kinematic(kin: &KinematicState<T>) -> Self {
        Self::new(kin.position, kin.heading)
    }

    /// Maps a world point into the frame where the ellipse `(a, b)` is the unit circle.
    pub fn to_unit_frame(&self, extent: &EoExtent<T>, point: &Vector2<T>) -> Vector2<T> {
        let (s, c) = self.orientation.sin_cos();
        let d = point - self.center;
        let x = c * d.x + s * d.y;
        let y = -s * d.x + c * d.y;
        Vector2::new(x / extent.a, y / extent.b)
    }

    /// Inverse of [`EoPose::to_unit_frame`].
    pub fn from_unit_frame(&self, extent: &EoExtent<T>, unit: &Vector2<T>) -> Vector2<T> {
        let (s, c) = self.orientation.sin_cos();
        let x = extent.a * unit.x;
        let y = extent.b * unit.y;
        Vector2::new(c * x - s * y, s * x + c * y) + self.center
    }
}

/// Extent of the full object model: ellipse semi-axes and annulus half-width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EoExtent<T: Scalar> {
    pub a: T,
    pub b: T,
    pub w: T,
}

impl<T: Scalar> EoExtent<T> {
    pub fn new(a: T, b: T, w: T) -> Self {
        Self { a, b, w }
    }

    pub fn is_valid(&self) -> bool {
        self.a > T::zero() && self.b > T::zero() && self.w >= T::zero() && self.w < self.b && self.a >= self.b
    }

    /// Inner radius of the annulus in the unit-circle frame.
    pub fn inner_radius(&self) -> T {
        T::one() - self.w / self.a
    }

    /// Outer radius of the annulus in the unit-circle frame.
    pub fn outer_radius(&self) -> T {
        T::one() + self.w / self.a
    }
}

/// Extent of the approximate model: circle radius and scatter-ellipse minor axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApproxExtent<T: Scalar> {
    pub r: T,
    pub w_s: T,
}

impl<T: Scalar> ApproxExtent<T> {
    pub fn new(r: T, w_s: T) -> Self {
        Self { r, w_s }
    }

    pub fn is_valid(&self) -> bool {
        self.r > T::zero() && self.w_s > T::zero()
    }
}

/// Counter-clockwise angular interval `[start, start + span]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngularSector<T: Scalar> {
    /// Start angle in `[-π, π)`.
    pub start: T,
    /// Angular width in `(0, 2π]`.
    pub span: T,
}

impl<T: Scalar> AngularSector<T> {
    pub fn new(start: T, span: T) -> Self {
        Self {
            start: wrap_angle(start),
            span,
        }
    }

    /// Sector running counter-clockwise from `start` to `end`.
    pub fn from_bounds(start: T, end: T) -> Self {
        let two_pi = T::two_pi();
        let mut span = end - start;
        if span <= T::zero() || span > two_pi {
            span %= two_pi;
            if span <= T::zero() {
                span += two_pi;
            }
        }
        Self::new(start, span)
    }

    pub fn full() -> Self {
        Self::new(-T::pi(), T::two_pi())
    }

    /// End angle on the unwrapped cover, `start + span`.
    pub fn end(&self) -> T {
        self.start + self.span
    }

    pub fn is_empty(&self) -> bool {
        !(self.span > T::zero())
    }

    /// Membership of an angle, tolerant to wrap-around.
    pub fn contains(&self, angle: T, tol: T) -> bool {
        let two_pi = T::two_pi();
        let mut off = (angle - self.start) % two_pi;
        if off < T::zero() {
            off += two_pi;
        }
        off <= self.span + tol || off >= two_pi - tol
    }
}

/// Gaussian scattering patch of the approximate model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScatteringEllipse<T: Scalar> {
    pub center: Vector2<T>,
    /// Scattering matrix `A E Aᵀ`.
    pub matrix: Matrix2<T>,
    /// Orientation of the major axis.
    pub orientation: T,
    /// Regularized eigenvalues `((l_s/2)², (w_s/2)²)`.
    pub eigenvalues: (T, T),
}

impl<T: Scalar> ScatteringEllipse<T> {
    /// Symmetric square root of the scattering matrix, in closed form.
    pub fn sqrt_matrix(&self) -> Matrix2<T> {
        let rot = rotation(self.orientation);
        let diag = Matrix2::new(self.eigenvalues.0.sqrt(), T::zero(), T::zero(), self.eigenvalues.1.sqrt());
        rot * diag * rot.transpose()
    }

    /// Sigma points of the patch, using the closed-form square root.
    pub fn sigma_points(&self, kappa: T) -> Result<SigmaPointSet<T>> {
        sigma_points_from_sqrt(self.center, &self.sqrt_matrix(), kappa)
    }
}

/// `2D + 1 = 5` sigma points with weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaPointSet<T: Scalar> {
    pub points: [Vector2<T>; 5],
    pub weights: [T; 5],
}

impl<T: Scalar> SigmaPointSet<T> {
    /// Weighted mean and variance of a scalar function over the points.
    pub fn moments<F: FnMut(&Vector2<T>) -> T>(&self, mut f: F) -> (T, T) {
        let vals: [T; 5] = std::array::from_fn(|d| f(&self.points[d]));
        let mut mean = T::zero();
        for (w, v) in self.weights.iter().zip(&vals) {
            mean += *w * *v;
        }
        let mut var = T::zero();
        for (w, v) in self.weights.iter().zip(&vals) {
            let e = *v - mean;
            var += *w * e * e;
        }
        (mean, var)
    }
}

pub fn rotation<T: Scalar>(angle: T) -> Matrix2<T> {
    let (s, c) = angle.sin_cos();
    Matrix2::new(c, -s, s, c)
}

/// Full-quadrant heading of a velocity vector, wrapped into `[-π, π)`.
pub fn heading_of<T: Scalar>(velocity: &Vector2<T>) -> T {
    wrap_angle(velocity.y.atan2(velocity.x))
}

/// Radio device position `p + b_ρ [cos(b_φ + θ), sin(b_φ + θ)]`.
pub fn device_position<T: Scalar>(kin: &KinematicState<T>) -> Vector2<T> {
    let (s, c) = (kin.bias_angle + kin.heading).sin_cos();
    kin.position + Vector2::new(c, s) * kin.bias_range
}

/// Parametric angles of the arc visible from `anchor`, bounded by the two tangents.
pub fn ellipse_fov<T: Scalar>(
    extent: &EoExtent<T>,
    pose: &EoPose<T>,
    anchor: &Vector2<T>,
) -> Result<AngularSector<T>> {
    let u = pose.to_unit_frame(extent, anchor);
    let d = u.norm();
    if !(d > extent.outer_radius()) {
        return Err(Error::AnchorInsideObject);
    }
    let toward = u.y.atan2(u.x);
    let half = (T::one() / d).acos();
    Ok(AngularSector::new(toward - half, half + half))
}

/// Largest contiguous intersection of two sectors, or `None` if they are disjoint.
pub fn common_fov<T: Scalar>(s1: &AngularSector<T>, s2: &AngularSector<T>) -> Option<AngularSector<T>> {
    let two_pi = T::two_pi();
    let (lo1, hi1) = (s1.start, s1.end());
    let mut best: Option<(T, T)> = None;
    for k in [-T::one(), T::zero(), T::one()] {
        let lo2 = s2.start + k * two_pi;
        let hi2 = s2.end() + k * two_pi;
        let lo = lo1.max(lo2);
        let hi = hi1.min(hi2);
        if hi > lo && best.is_none_or(|(bl, bh)| hi - lo > bh - bl) {
            best = Some((lo, hi));
        }
    }
    best.map(|(lo, hi)| AngularSector::new(lo, (hi - lo).min(two_pi)))
}

/// Area-uniform sampler on an elliptic annulus sector, world frame.
#[derive(Debug, Clone, Copy)]
pub struct AnnulusSectorSampler<T: Scalar> {
    cos_t: T,
    sin_t: T,
    a: T,
    b: T,
    center: Vector2<T>,
    rho_lo: T,
    rho_width: T,
    start: T,
    span: T,
}

impl<T: Scalar> AnnulusSectorSampler<T> {
    pub fn new(extent: &EoExtent<T>, pose: &EoPose<T>, sector: &AngularSector<T>) -> Result<Self> {
        if sector.is_empty() {
            return Err(Error::EmptySector);
        }
        let r_in = extent.inner_radius();
        let r_out = extent.outer_radius();
        let (sin_t, cos_t) = pose.orientation.sin_cos();
        Ok(Self {
            cos_t,
            sin_t,
            a: extent.a,
            b: extent.b,
            center: pose.center,
            rho_lo: r_in * r_in,
            rho_width: r_out * r_out - r_in * r_in,
            start: sector.start,
            span: sector.span,
        })
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vector2<T> {
        let phi = self.start + self.span * T::sample_unit(rng);
        let rho = self.rho_lo + self.rho_width * T::sample_unit(rng);
        let r = rho.sqrt();
        let (s, c) = phi.sin_cos();
        let x = self.a * r * c;
        let y = self.b * r * s;
        Vector2::new(
            self.center.x + self.cos_t * x - self.sin_t * y,
            self.center.y + self.sin_t * x + self.cos_t * y,
        )
    }
}

/// Draws `count` scatter points uniformly (by area) from the annulus sector.
pub fn sample_annulus_sector<T: Scalar, R: Rng + ?Sized>(
    extent: &EoExtent<T>,
    pose: &EoPose<T>,
    sector: &AngularSector<T>,
    count: usize,
    rng: &mut R,
) -> Result<Vec<Vector2<T>>> {
    if count == 0 {
        return Err(Error::InvalidArgument("sample count must be at least 1".into()));
    }
    let sampler = AnnulusSectorSampler::new(extent, pose, sector)?;
    Ok((0..count).map(|_| sampler.sample(rng)).collect())
}

/// Pre-image `(radius, angle)` of a world point in the unit-circle frame.
pub fn annulus_preimage<T: Scalar>(extent: &EoExtent<T>, pose: &EoPose<T>, point: &Vector2<T>) -> (T, T) {
    let u = pose.to_unit_frame(extent, point);
    (u.norm(), u.y.atan2(u.x))
}

/// Membership predicate of the support region `S`.
pub fn annulus_sector_contains<T: Scalar>(
    extent: &EoExtent<T>,
    pose: &EoPose<T>,
    sector: &AngularSector<T>,
    point: &Vector2<T>,
    tol: T,
) -> bool {
    let (r, phi) = annulus_preimage(extent, pose, point);
    r >= extent.inner_radius() - tol && r <= extent.outer_radius() + tol && sector.contains(phi, tol)
}

/// Scattering ellipse of the approximate model facing `anchor`.
///
/// The patch sits on the circle where it is crossed by the line towards the
/// anchor, its major axis follows the circle tangent and has length equal to
/// the chord subtended by the opening angle `omega`.
pub fn scattering_ellipse<T: Scalar>(
    extent: &ApproxExtent<T>,
    omega: T,
    center: &Vector2<T>,
    anchor: &Vector2<T>,
) -> Result<ScatteringEllipse<T>> {
    let dir = anchor - center;
    if dir.norm() == T::zero() {
        return Err(Error::DegenerateGeometry("anchor coincides with the object center"));
    }
    let phi = dir.y.atan2(dir.x);
    let (s, c) = phi.sin_cos();
    let chi = center + Vector2::new(c, s) * extent.r;
    let orientation = phi + T::frac_pi_2();
    let half_len = extent.r * (omega / T::lit(2.0)).sin();
    let half_width = extent.w_s / T::lit(2.0);
    let eps = T::lit(SCATTER_EPS);
    let e1 = half_len * half_len + eps;
    let e2 = half_width * half_width + eps;
    let rot = rotation(orientation);
    let matrix = rot * Matrix2::new(e1, T::zero(), T::zero(), e2) * rot.transpose();
    Ok(ScatteringEllipse {
        center: chi,
        matrix,
        orientation,
        eigenvalues: (e1, e2),
    })
}

/// Unscented-transform sigma points of `N(chi, cov)` with spread `kappa`.
pub fn sigma_points<T: Scalar>(chi: Vector2<T>, cov: &Matrix2<T>, kappa: T) -> Result<SigmaPointSet<T>> {
    let sym = (cov + cov.transpose()) * T::lit(0.5);
    let eig = SymmetricEigen::new(sym);
    let scale = eig.eigenvalues.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    let tol = T::lit(1e-12) * (T::one() + scale);
    let mut root = Matrix2::zeros();
    for (i, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda < -tol || !lambda.is_finite() {
            return Err(Error::NotPsd);
        }
        let col = eig.eigenvectors.column(i);
        root += col * col.transpose() * lambda.max(T::zero()).sqrt();
    }
    sigma_points_from_sqrt(chi, &root, kappa)
}

fn sigma_points_from_sqrt<T: Scalar>(chi: Vector2<T>, root: &Matrix2<T>, kappa: T) -> Result<SigmaPointSet<T>> {
    let dim = T::lit(2.0);
    if !(dim + kappa > T::zero()) {
        return Err(Error::InvalidArgument("sigma-point spread requires D + kappa > 0".into()));
    }
    let gain = (dim + kappa).sqrt();
    let c0 = root.column(0) * gain;
    let c1 = root.column(1) * gain;
    let w_side = T::one() / (T::lit(2.0) * (dim + kappa));
    Ok(SigmaPointSet {
        points: [chi, chi + c0, chi + c1, chi - c0, chi - c1],
        weights: [kappa / (dim + kappa), w_side, w_side, w_side, w_side],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, PI};

    fn kin(p: (f64, f64), v: (f64, f64), b_rho: f64, b_phi: f64) -> KinematicState<f64> {
        KinematicState::new(Vector2::new(p.0, p.1), Vector2::new(v.0, v.1), b_rho, b_phi)
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn device_position_examples() {
        let m = device_position(&kin((0.0, 0.0), (1.0, 0.0), 1.0, 0.0));
        assert!(close(m.x, 1.0, 1e-12) && close(m.y, 0.0, 1e-12));
        let m = device_position(&kin((0.0, 0.0), (1.0, 0.0), 0.0, 0.0));
        assert_eq!(m, Vector2::zeros());
        // θ = π/2, b_φ = -π/3, so the offset points along π/6.
        let m = device_position(&kin((1.0, 1.0), (0.0, 2.0), 0.32, -FRAC_PI_3));
        assert!(close(m.x, 1.0 + 0.32 * 3f64.sqrt() / 2.0, 1e-12), "{m}");
        assert!(close(m.y, 1.16, 1e-12));
        assert!(close(m.x, 1.2771, 1e-4));
    }

    #[test]
    fn fov_of_circle_matches_tangency_half_angle() {
        let ext = EoExtent::new(1.0, 1.0, 0.0);
        let pose = EoPose::new(Vector2::zeros(), 0.0);
        let s = ellipse_fov(&ext, &pose, &Vector2::new(2.0, 0.0)).unwrap();
        assert!(close(s.start, -FRAC_PI_3, 1e-12));
        assert!(close(s.end(), FRAC_PI_3, 1e-12));

        let far = ellipse_fov(&ext, &pose, &Vector2::new(1e9, 0.0)).unwrap();
        assert!(close(far.start, -FRAC_PI_2, 1e-8) && close(far.end(), FRAC_PI_2, 1e-8));

        assert!(matches!(
            ellipse_fov(&ext, &pose, &Vector2::new(0.5, 0.0)),
            Err(Error::AnchorInsideObject)
        ));
        // On the boundary counts as inside.
        assert!(ellipse_fov(&ext, &pose, &Vector2::new(1.0, 0.0)).is_err());
    }

    #[test]
    fn fov_tangent_points_are_tangent() {
        // The tangency points, mapped back to the world, are perpendicular to the anchor ray.
        let ext = EoExtent::<f64>::new(0.3, 0.2, 0.0);
        let pose = EoPose::new(Vector2::new(1.0, -2.0), 0.7);
        let anchor = Vector2::new(4.0, 3.0);
        let s = ellipse_fov(&ext, &pose, &anchor).unwrap();
        for phi in [s.start, s.end()] {
            let unit = Vector2::new(phi.cos(), phi.sin());
            let q = pose.from_unit_frame(&ext, &unit);
            let tangent_unit = Vector2::new(-phi.sin(), phi.cos());
            let tangent = pose.from_unit_frame(&ext, &(unit + tangent_unit)) - q;
            let ray = anchor - q;
            let cross = ray.x * tangent.y - ray.y * tangent.x;
            assert!(cross.abs() < 1e-9 * ray.norm() * tangent.norm(), "cross={cross}");
        }
    }

    #[test]
    fn common_fov_examples() {
        let s1 = AngularSector::from_bounds(-FRAC_PI_3, FRAC_PI_3);
        let s2 = AngularSector::from_bounds(0.0, 2.0 * FRAC_PI_3);
        let c = common_fov(&s1, &s2).unwrap();
        assert!(close(c.start, 0.0, 1e-12) && close(c.end(), FRAC_PI_3, 1e-12));

        let s3 = AngularSector::from_bounds(FRAC_PI_2, 2.0 * FRAC_PI_3);
        assert!(common_fov(&s1, &s3).is_none());

        let wrap = AngularSector::from_bounds(0.75 * PI, -0.75 * PI);
        assert!(close(wrap.span, FRAC_PI_2, 1e-12));
        let c = common_fov(&wrap, &AngularSector::from_bounds(FRAC_PI_2, PI)).unwrap();
        assert!(close(c.start, 0.75 * PI, 1e-12) && close(c.end(), PI, 1e-12));
    }

    #[test]
    fn common_fov_wrapping_matches_grid_membership() {
        // Brute-force oracle on a 10⁴-point angular grid.
        let wrap = AngularSector::from_bounds(0.75 * PI, -0.75 * PI);
        let other = AngularSector::from_bounds(FRAC_PI_2, PI);
        let c = common_fov(&wrap, &other).unwrap();
        let n = 10_000;
        let mut in_both = 0usize;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let phi = -PI + 2.0 * PI * (i as f64 + 0.5) / n as f64;
            if wrap.contains(phi, 0.0) && other.contains(phi, 0.0) {
                in_both += 1;
                lo = lo.min(phi);
                hi = hi.max(phi);
            }
        }
        let grid_span = in_both as f64 * 2.0 * PI / n as f64;
        assert!(close(grid_span, c.span, 2.0 * PI / n as f64 * 1.01));
        assert!(close(lo, c.start, 2.0 * PI / n as f64));
        assert!(close(hi, c.end(), 2.0 * PI / n as f64));
    }

    #[test]
    fn degenerate_annulus_lies_on_boundary() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ext = EoExtent::new(1.0, 1.0, 0.0);
        let pose = EoPose::new(Vector2::zeros(), 0.0);
        let pts = sample_annulus_sector(&ext, &pose, &AngularSector::full(), 1000, &mut rng).unwrap();
        assert!(pts.iter().all(|q| close(q.norm(), 1.0, 1e-12)));
    }

    #[test]
    fn sampler_rejects_empty_sector_and_zero_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ext = EoExtent::new(1.0, 1.0, 0.1);
        let pose = EoPose::new(Vector2::zeros(), 0.0);
        let empty = AngularSector { start: 0.0, span: 0.0 };
        assert!(matches!(
            sample_annulus_sector(&ext, &pose, &empty, 10, &mut rng),
            Err(Error::EmptySector)
        ));
        assert!(sample_annulus_sector(&ext, &pose, &AngularSector::full(), 0, &mut rng).is_err());
    }

    #[test]
    fn full_annulus_is_centered() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let ext = EoExtent::new(1.0, 1.0, 0.2);
        let pose = EoPose::new(Vector2::zeros(), 0.0);
        let n = 100_000;
        let pts = sample_annulus_sector(&ext, &pose, &AngularSector::full(), n, &mut rng).unwrap();
        let mean = pts.iter().fold(Vector2::zeros(), |acc, q| acc + q) / n as f64;
        // Per-axis variance of a uniform annulus: (r_in² + r_out²)/4.
        let sd = ((0.8f64.powi(2) + 1.2f64.powi(2)) / 4.0 / n as f64).sqrt();
        assert!(mean.x.abs() < 3.0 * sd && mean.y.abs() < 3.0 * sd, "mean={mean}");
    }

    #[test]
    fn scattering_ellipse_example() {
        let ext = ApproxExtent::new(1.0, 0.1);
        let e = scattering_ellipse(&ext, FRAC_PI_3, &Vector2::zeros(), &Vector2::new(4.0, 0.0)).unwrap();
        assert!(close(e.center.x, 1.0, 1e-12) && close(e.center.y, 0.0, 1e-12));
        assert!(close(e.orientation, FRAC_PI_2, 1e-12));
        assert!(close(e.matrix[(0, 0)], 0.05f64.powi(2), 1e-11));
        assert!(close(e.matrix[(1, 1)], 0.25, 1e-11));
        assert!(close(e.matrix[(0, 1)], 0.0, 1e-12));

        let e = scattering_ellipse(&ext, FRAC_PI_3, &Vector2::zeros(), &Vector2::new(0.0, 4.0)).unwrap();
        assert!(close(e.center.x, 0.0, 1e-12) && close(e.center.y, 1.0, 1e-12));

        assert!(matches!(
            scattering_ellipse(&ext, FRAC_PI_3, &Vector2::zeros(), &Vector2::zeros()),
            Err(Error::DegenerateGeometry(_))
        ));
    }

    #[test]
    fn scattering_ellipse_zero_opening_is_regularized() {
        let ext = ApproxExtent::new(0.5, 0.1);
        let e = scattering_ellipse(&ext, 0.0, &Vector2::zeros(), &Vector2::new(3.0, 1.0)).unwrap();
        assert!(close(e.eigenvalues.0, SCATTER_EPS, 1e-18));
        assert!(e.matrix.determinant() > 0.0);
        assert!(e.sigma_points(1.0).is_ok());
    }

    #[test]
    fn sigma_points_example() {
        let s3 = 3f64.sqrt();
        let sp = sigma_points(Vector2::zeros(), &Matrix2::new(1.0, 0.0, 0.0, 0.25), 1.0).unwrap();
        let expected = [(0.0, 0.0), (s3, 0.0), (0.0, s3 / 2.0), (-s3, 0.0), (0.0, -s3 / 2.0)];
        for (p, e) in sp.points.iter().zip(expected) {
            assert!(close(p.x, e.0, 1e-12) && close(p.y, e.1, 1e-12), "{p} vs {e:?}");
        }
        assert!(close(sp.weights[0], 1.0 / 3.0, 1e-15));
        assert!(sp.weights[1..].iter().all(|w| close(*w, 1.0 / 6.0, 1e-15)));
    }

    #[test]
    fn sigma_points_zero_spread_and_not_psd() {
        let chi = Vector2::new(1.5, -2.0);
        let sp = sigma_points(chi, &Matrix2::zeros(), 1.0).unwrap();
        assert!(sp.points.iter().all(|p| *p == chi));
        assert!(matches!(
            sigma_points(chi, &Matrix2::new(1.0, 0.0, 0.0, -1.0), 1.0),
            Err(Error::NotPsd)
        ));
    }

    #[test]
    fn closed_form_sqrt_matches_eigen_sqrt() {
        let ext = ApproxExtent::new(0.25, 0.08);
        let e = scattering_ellipse(&ext, 1.2, &Vector2::new(1.0, 2.0), &Vector2::new(-3.0, 5.0)).unwrap();
        let a = e.sigma_points(1.0).unwrap();
        let b = sigma_points(e.center, &e.matrix, 1.0).unwrap();
        for (p, q) in a.points.iter().zip(b.points.iter()) {
            assert!((p - q).norm() < 1e-9);
        }
    }

    #[test]
    fn generic_over_f32() {
        let ext = EoExtent::<f32>::new(1.0, 1.0, 0.0);
        let pose = EoPose::new(Vector2::zeros(), 0.0f32);
        let s = ellipse_fov(&ext, &pose, &Vector2::new(2.0, 0.0)).unwrap();
        assert!((s.span - 2.0 * std::f32::consts::FRAC_PI_3).abs() < 1e-5);
        let sp = sigma_points(Vector2::<f32>::zeros(), &Matrix2::new(1.0, 0.0, 0.0, 0.25), 1.0).unwrap();
        assert!((sp.weights.iter().sum::<f32>() - 1.0).abs() < 1e-6);
    }
}
