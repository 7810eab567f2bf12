//! SO(3) / SE(3) primitives and the isotropic noise models.
//!
//! Poses follow the world-to-local convention: a pose `P = (R, t)` maps world
//! coordinates into the node frame, and the relative transform between two
//! nodes is `P_i P_j^-1`. Under this convention a camera-to-marker measurement
//! is the marker pose expressed in the camera frame.

use std::ops::Mul;

use nalgebra::{Matrix3, Matrix4, Unit, UnitQuaternion, Vector3};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Concentrations at or above this value are treated as noiseless.
pub const KAPPA_NOISELESS: f64 = 1e8;
/// Precisions at or above this value are treated as noiseless.
pub const TAU_NOISELESS: f64 = 1e12;

/// Relative singular-value threshold under which a projection is ambiguous.
const DEGENERACY_EPS: f64 = 1e-10;

/// An element of SO(3), stored as a 3x3 matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rotation(Matrix3<f64>);

impl Rotation {
    pub fn identity() -> Self {
        Rotation(Matrix3::identity())
    }

    /// Wraps a matrix that is already known to be a rotation.
    pub fn from_matrix_unchecked(m: Matrix3<f64>) -> Self {
        Rotation(m)
    }

    /// Wraps `m` if it satisfies the SO(3) invariants within `tol`.
    pub fn try_from_matrix(m: Matrix3<f64>, tol: f64) -> Option<Self> {
        let r = Rotation(m);
        r.is_valid(tol).then_some(r)
    }

    pub fn from_axis_angle(axis: &Vector3<f64>, angle: f64) -> Self {
        let axis = Unit::new_normalize(*axis);
        Rotation(*nalgebra::Rotation3::from_axis_angle(&axis, angle).matrix())
    }

    /// Rotation from a (not necessarily unit) quaternion `w + xi + yj + zk`.
    pub fn from_quaternion(w: f64, x: f64, y: f64, z: f64) -> Self {
        let q = UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(w, x, y, z));
        Rotation(*q.to_rotation_matrix().matrix())
    }

    /// Haar-uniform random rotation.
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let mut q = [0.0f64; 4];
        loop {
            for c in q.iter_mut() {
                *c = StandardNormal.sample(rng);
            }
            if q.iter().map(|c| c * c).sum::<f64>() > 1e-12 {
                break;
            }
        }
        Self::from_quaternion(q[0], q[1], q[2], q[3])
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix3<f64> {
        self.0
    }

    pub fn transpose(&self) -> Self {
        Rotation(self.0.transpose())
    }

    pub fn inverse(&self) -> Self {
        self.transpose()
    }

    pub fn rotate(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.0 * v
    }

    /// `mᵀm = I` and `det(m) = 1`, both within `tol`.
    pub fn is_valid(&self, tol: f64) -> bool {
        let orth = (self.0.transpose() * self.0 - Matrix3::identity()).norm();
        orth <= tol
            && (self.0.determinant() - 1.0).abs() <= tol
            && self.0.iter().all(|v| v.is_finite())
    }
}

impl Default for Rotation {
    fn default() -> Self {
        Self::identity()
    }
}

impl Mul for Rotation {
    type Output = Rotation;
    fn mul(self, rhs: Rotation) -> Rotation {
        Rotation(self.0 * rhs.0)
    }
}

impl Mul<&Rotation> for &Rotation {
    type Output = Rotation;
    fn mul(self, rhs: &Rotation) -> Rotation {
        Rotation(self.0 * rhs.0)
    }
}

/// An element of SE(3): rotation plus translation in meters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose {
    pub r: Rotation,
    pub t: Vector3<f64>,
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose {
    pub fn new(r: Rotation, t: Vector3<f64>) -> Self {
        Pose { r, t }
    }

    pub fn identity() -> Self {
        Pose {
            r: Rotation::identity(),
            t: Vector3::zeros(),
        }
    }

    pub fn to_homogeneous(&self) -> Matrix4<f64> {
        let mut h = Matrix4::identity();
        h.fixed_view_mut::<3, 3>(0, 0).copy_from(self.r.matrix());
        h.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.t);
        h
    }

    /// Applies the pose to a point.
    pub fn transform(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.r.rotate(p) + self.t
    }
}

impl Mul for Pose {
    type Output = Pose;
    fn mul(self, rhs: Pose) -> Pose {
        compose(&self, &rhs)
    }
}

/// `p · q`.
pub fn compose(p: &Pose, q: &Pose) -> Pose {
    Pose {
        r: p.r * q.r,
        t: p.r.rotate(&q.t) + p.t,
    }
}

pub fn inverse(p: &Pose) -> Pose {
    let rt = p.r.transpose();
    Pose {
        r: rt,
        t: -rt.rotate(&p.t),
    }
}

/// `p_i · p_j^-1`.
pub fn relative(p_i: &Pose, p_j: &Pose) -> Pose {
    compose(p_i, &inverse(p_j))
}

/// Sorted SVD of a 3x3 matrix: singular values descending, `m = U Σ Vᵀ`.
pub(crate) fn svd3(m: &Matrix3<f64>) -> (Matrix3<f64>, Vector3<f64>, Matrix3<f64>) {
    let svd = m.svd(true, true);
    let u = svd.u.expect("svd u");
    let v_t = svd.v_t.expect("svd v_t");
    let s = svd.singular_values;
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| s[b].total_cmp(&s[a]));
    let mut us = Matrix3::zeros();
    let mut vs = Matrix3::zeros();
    let mut ss = Vector3::zeros();
    for (k, &i) in order.iter().enumerate() {
        us.set_column(k, &u.column(i));
        vs.set_column(k, &v_t.row(i).transpose());
        ss[k] = s[i];
    }
    (us, ss, vs)
}

/// Closest rotation to `m` in the Frobenius sense, i.e. the maximizer of
/// `Tr(Rᵀ m)` over SO(3), via a determinant-corrected SVD.
///
/// Ties between maximizers are resolved by whatever the SVD routine returns;
/// use [`try_project_to_so3`] to detect them.
pub fn project_to_so3(m: &Matrix3<f64>) -> Rotation {
    let (u, _, v) = svd3(m);
    project_from_svd(&u, &v)
}

fn project_from_svd(u: &Matrix3<f64>, v: &Matrix3<f64>) -> Rotation {
    let d = (u * v.transpose()).determinant().signum();
    let mut uc = *u;
    uc.column_mut(2).scale_mut(d);
    Rotation(uc * v.transpose())
}

/// Strict variant of [`project_to_so3`]: fails with `DegenerateProjection`
/// when the maximizer is not unique (rank below two, or a reflection with
/// repeated trailing singular values).
pub fn try_project_to_so3(m: &Matrix3<f64>) -> Result<Rotation> {
    if !m.iter().all(|v| v.is_finite()) {
        return Err(Error::DegenerateProjection([f64::NAN; 3]));
    }
    let (u, s, v) = svd3(m);
    let scale = s[0].max(f64::MIN_POSITIVE);
    let reflected = (u * v.transpose()).determinant() < 0.0;
    if s[1] <= DEGENERACY_EPS * scale || (reflected && s[1] - s[2] <= DEGENERACY_EPS * scale) {
        return Err(Error::DegenerateProjection([s[0], s[1], s[2]]));
    }
    Ok(project_from_svd(&u, &v))
}

/// Geodesic distance between two rotations, in degrees, within [0, 180].
///
/// Computed as `atan2(|sin θ|, cos θ)` from the relative rotation, which is
/// the clamped `arccos((Tr(aᵀb) - 1) / 2)` without its loss of precision
/// near zero.
pub fn geodesic_angle_deg(a: &Rotation, b: &Rotation) -> f64 {
    let q = a.matrix().transpose() * b.matrix();
    let cos = ((q.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
    let sin = 0.5
        * Vector3::new(
            q[(2, 1)] - q[(1, 2)],
            q[(0, 2)] - q[(2, 0)],
            q[(1, 0)] - q[(0, 1)],
        )
        .norm();
    sin.min(1.0).atan2(cos).to_degrees()
}

/// Isotropic noise parameters of one edge.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseParams {
    /// Langevin concentration; zero removes the edge from the rotation problem.
    pub kappa: f64,
    /// Gaussian translation precision, 1/m².
    pub tau: f64,
}

impl NoiseParams {
    pub fn new(kappa: f64, tau: f64) -> Self {
        NoiseParams { kappa, tau }
    }

    pub fn noiseless() -> Self {
        NoiseParams {
            kappa: KAPPA_NOISELESS,
            tau: TAU_NOISELESS,
        }
    }
}

/// Unnormalized density of the rotation angle of `E ~ L(I, kappa)`, scaled so
/// the exponential never overflows: `exp(2k(cos θ - 1)) (1 - cos θ)`.
pub fn langevin_angle_density(theta: f64, kappa: f64) -> f64 {
    let c = theta.cos();
    (2.0 * kappa * (c - 1.0)).exp() * (1.0 - c)
}

/// Upper end of the angle support used by the sampler. Beyond it the density
/// is below `exp(-50)` of its peak.
pub fn langevin_angle_support(kappa: f64) -> f64 {
    if kappa <= 12.5 {
        std::f64::consts::PI
    } else {
        (1.0 - 25.0 / kappa).acos()
    }
}

/// Draws `E · mean` with `E` from the isotropic Langevin distribution with
/// density proportional to `exp(kappa Tr(E))`.
///
/// The rotation axis is uniform on the sphere; the angle is drawn by
/// rejection from its marginal `exp(2k cos θ)(1 - cos θ)` with a uniform
/// proposal.
pub fn sample_langevin<R: Rng + ?Sized>(mean: &Rotation, kappa: f64, rng: &mut R) -> Rotation {
    assert!(kappa >= 0.0, "negative concentration");
    if kappa >= KAPPA_NOISELESS {
        return *mean;
    }
    let theta = sample_langevin_angle(kappa, rng);
    let axis = loop {
        let v = Vector3::new(
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
        );
        if v.norm() > 1e-9 {
            break v;
        }
    };
    Rotation::from_axis_angle(&axis, theta) * *mean
}

/// Rotation angle of a Langevin sample.
pub fn sample_langevin_angle<R: Rng + ?Sized>(kappa: f64, rng: &mut R) -> f64 {
    let support = langevin_angle_support(kappa);
    let envelope = if kappa >= 0.25 {
        (-1.0f64).exp() / (2.0 * kappa)
    } else {
        2.0 * (-4.0 * kappa).exp()
    } * (1.0 + 1e-12);
    loop {
        let theta = rng.random::<f64>() * support;
        let u = rng.random::<f64>() * envelope;
        if u <= langevin_angle_density(theta, kappa) {
            return theta;
        }
    }
}

/// `mean + ε` with `ε ~ N(0, I / tau)`.
pub fn sample_gaussian_translation<R: Rng + ?Sized>(
    mean: &Vector3<f64>,
    tau: f64,
    rng: &mut R,
) -> Vector3<f64> {
    assert!(tau > 0.0, "precision must be positive");
    if tau >= TAU_NOISELESS {
        return *mean;
    }
    let sigma = tau.recip().sqrt();
    let mut draw = || -> f64 { StandardNormal.sample(rng) };
    mean + sigma * Vector3::new(draw(), draw(), draw())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn random_matrix(rng: &mut ChaCha8Rng) -> Matrix3<f64> {
        Matrix3::from_fn(|_, _| rng.random_range(-1.0..1.0))
    }

    /// Polar decomposition by Newton iteration `X <- (X + X^-T) / 2`, with the
    /// determinant fixed up afterwards through the symmetric factor.
    fn polar_oracle(m: &Matrix3<f64>) -> Matrix3<f64> {
        let mut x = *m;
        for _ in 0..100 {
            let next = 0.5 * (x + x.try_inverse().unwrap().transpose());
            if (next - x).norm() < 1e-15 {
                x = next;
                break;
            }
            x = next;
        }
        if x.determinant() > 0.0 {
            return x;
        }
        // Reflection: flip along the eigenvector of the smallest eigenvalue of
        // the symmetric factor H = Xᵀ M.
        let h = x.transpose() * m;
        let eig = nalgebra::SymmetricEigen::new(0.5 * (h + h.transpose()));
        let (imin, _) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .unwrap();
        let w = eig.eigenvectors.column(imin).into_owned();
        x * (Matrix3::identity() - 2.0 * w * w.transpose())
    }

    #[test]
    fn project_identity_and_diagonal() {
        let r = project_to_so3(&Matrix3::identity());
        assert!((r.matrix() - Matrix3::identity()).norm() < 1e-12);
        let r = project_to_so3(&Matrix3::from_diagonal(&Vector3::new(2.0, 3.0, 4.0)));
        assert!((r.matrix() - Matrix3::identity()).norm() < 1e-12);
    }

    #[test]
    fn project_matches_polar_oracle_and_maximizes_trace() {
        let mut g = rng(11);
        for _ in 0..5 {
            let m = random_matrix(&mut g);
            let r = project_to_so3(&m);
            assert!(r.is_valid(1e-9));
            let oracle = polar_oracle(&m);
            assert!(
                (r.matrix() - oracle).norm() < 1e-9,
                "{} vs {}",
                r.matrix(),
                oracle
            );
            let best = (r.matrix().transpose() * m).trace();
            for _ in 0..20_000 {
                let q = Rotation::random(&mut g);
                assert!((q.matrix().transpose() * m).trace() <= best + 1e-12);
            }
        }
    }

    #[test]
    fn strict_projection_flags_degenerate_inputs() {
        let rank_one = Vector3::new(1.0, 2.0, 3.0) * Vector3::new(0.5, -1.0, 2.0).transpose();
        assert!(matches!(
            try_project_to_so3(&rank_one),
            Err(Error::DegenerateProjection(_))
        ));
        let tie = Matrix3::from_diagonal(&Vector3::new(3.0, 1.0, -1.0));
        assert!(try_project_to_so3(&tie).is_err());
        // The lenient version still returns a rotation.
        assert!(project_to_so3(&tie).is_valid(1e-9));
        assert!(try_project_to_so3(&Matrix3::from_diagonal(&Vector3::new(3.0, 2.0, -1.0))).is_ok());
    }

    fn quaternion_angle_deg(a: &Rotation, b: &Rotation) -> f64 {
        let qa = UnitQuaternion::from_matrix(a.matrix());
        let qb = UnitQuaternion::from_matrix(b.matrix());
        let q = qa.inverse() * qb;
        (2.0 * q.imag().norm().atan2(q.w.abs())).to_degrees()
    }

    #[test]
    fn geodesic_angle_examples() {
        let mut g = rng(3);
        let r = Rotation::random(&mut g);
        assert!(geodesic_angle_deg(&r, &r) < 1e-12);
        let rz = Rotation::from_axis_angle(&Vector3::z(), std::f64::consts::FRAC_PI_2);
        assert!((geodesic_angle_deg(&Rotation::identity(), &rz) - 90.0).abs() < 1e-12);
        let rpi = Rotation::from_axis_angle(&Vector3::x(), std::f64::consts::PI);
        assert!((geodesic_angle_deg(&Rotation::identity(), &rpi) - 180.0).abs() < 1e-9);
        for _ in 0..1000 {
            let a = Rotation::random(&mut g);
            let b = Rotation::random(&mut g);
            let oracle = quaternion_angle_deg(&a, &b);
            assert!((geodesic_angle_deg(&a, &b) - oracle).abs() < 1e-9);
        }
    }

    #[test]
    fn geodesic_angle_precise_for_moderate_angles() {
        let mut g = rng(5);
        for _ in 0..1000 {
            let a = Rotation::random(&mut g);
            let theta: f64 = g.random_range(0.01..3.1);
            let axis = Vector3::new(g.random(), g.random(), g.random::<f64>() + 0.1);
            let b = a * Rotation::from_axis_angle(&axis, theta);
            let got = geodesic_angle_deg(&a, &b);
            assert!((got - theta.to_degrees()).abs() < 1e-9);
            assert!((got - quaternion_angle_deg(&a, &b)).abs() < 1e-9);
        }
    }

    #[test]
    fn small_angles_resolved() {
        let r = Rotation::from_axis_angle(&Vector3::new(1.0, 2.0, 0.5), 1e-9);
        let got = geodesic_angle_deg(&Rotation::identity(), &r);
        assert!((got - 1e-9f64.to_degrees()).abs() < 1e-15);
    }

    #[test]
    fn pose_algebra() {
        let mut g = rng(8);
        let rp = |g: &mut ChaCha8Rng| {
            Pose::new(
                Rotation::random(g),
                Vector3::new(g.random(), g.random(), g.random()),
            )
        };
        let p = rp(&mut g);
        let rel = relative(&p, &p);
        assert!((rel.to_homogeneous() - Matrix4::identity()).norm() < 1e-12);
        let id = inverse(&Pose::identity());
        assert_eq!(id, Pose::identity());
        for _ in 0..100 {
            let (pi, pj, pk) = (rp(&mut g), rp(&mut g), rp(&mut g));
            let back = compose(&relative(&pi, &pj), &pj);
            assert!((back.to_homogeneous() - pi.to_homogeneous()).norm() < 1e-12);
            let chained = compose(&relative(&pi, &pj), &relative(&pj, &pk));
            assert!(
                (chained.to_homogeneous() - relative(&pi, &pk).to_homogeneous()).norm() < 1e-12
            );
            let h = pi.to_homogeneous() * pj.to_homogeneous().try_inverse().unwrap();
            assert!((relative(&pi, &pj).to_homogeneous() - h).norm() < 1e-12);
        }
    }

    #[test]
    fn langevin_noiseless_cutoff_returns_mean() {
        let mut g = rng(1);
        let mean = Rotation::random(&mut g);
        assert_eq!(sample_langevin(&mean, KAPPA_NOISELESS, &mut g), mean);
        assert_eq!(sample_langevin(&mean, 1e9, &mut g), mean);
    }

    /// Simpson quadrature of `f` on [a, b].
    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            let x = a + i as f64 * h;
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
        }
        s * h / 3.0
    }

    fn mean_trace_by_quadrature(kappa: f64) -> f64 {
        let pi = std::f64::consts::PI;
        let z = simpson(|t| langevin_angle_density(t, kappa), 0.0, pi, 20_000);
        simpson(
            |t| (1.0 + 2.0 * t.cos()) * langevin_angle_density(t, kappa),
            0.0,
            pi,
            20_000,
        ) / z
    }

    #[test]
    fn langevin_uniform_has_zero_mean_trace() {
        let mut g = rng(2);
        let n = 100_000;
        let mean: f64 = (0..n)
            .map(|_| {
                sample_langevin(&Rotation::identity(), 0.0, &mut g)
                    .matrix()
                    .trace()
            })
            .sum::<f64>()
            / n as f64;
        assert!(mean.abs() < 0.02, "mean trace {mean}");
    }

    #[test]
    fn langevin_mean_trace_matches_quadrature() {
        let mut g = rng(4);
        let n = 100_000;
        let expected = mean_trace_by_quadrature(5.0);
        let mean: f64 = (0..n)
            .map(|_| {
                sample_langevin(&Rotation::identity(), 5.0, &mut g)
                    .matrix()
                    .trace()
            })
            .sum::<f64>()
            / n as f64;
        assert!((mean - expected).abs() < 0.02, "{mean} vs {expected}");
    }

    #[test]
    fn langevin_angle_passes_ks_test() {
        let pi = std::f64::consts::PI;
        for (i, &kappa) in [0.5, 5.0, 50.0].iter().enumerate() {
            let mut g = rng(100 + i as u64);
            let n = 20_000;
            let mut samples: Vec<f64> = (0..n)
                .map(|_| {
                    let e = sample_langevin(&Rotation::identity(), kappa, &mut g);
                    geodesic_angle_deg(&Rotation::identity(), &e).to_radians()
                })
                .collect();
            samples.sort_by(f64::total_cmp);
            // Tabulated CDF by cumulative Simpson on a fine grid.
            let grid = 20_000;
            let h = pi / grid as f64;
            let mut cdf = vec![0.0; grid + 1];
            for k in 0..grid {
                let a = k as f64 * h;
                let seg = simpson(|t| langevin_angle_density(t, kappa), a, a + h, 2);
                cdf[k + 1] = cdf[k] + seg;
            }
            let z = cdf[grid];
            let eval = |t: f64| {
                let x = (t / h).min(grid as f64 - 1e-9);
                let k = x.floor() as usize;
                let w = x - k as f64;
                (cdf[k] * (1.0 - w) + cdf[k + 1] * w) / z
            };
            let d = samples
                .iter()
                .enumerate()
                .map(|(j, &t)| {
                    let f = eval(t);
                    (f - j as f64 / n as f64)
                        .abs()
                        .max(((j + 1) as f64 / n as f64 - f).abs())
                })
                .fold(0.0, f64::max);
            // Critical value of the one-sample KS statistic at the 1% level.
            let crit = 1.628 / (n as f64).sqrt();
            assert!(d < crit, "kappa {kappa}: D = {d} >= {crit}");
        }
    }

    #[test]
    fn langevin_truncated_support_is_negligible() {
        for &kappa in &[20.0, 1e3, 1e6] {
            let s = langevin_angle_support(kappa);
            let peak = (-1.0f64).exp() / (2.0 * kappa);
            assert!(langevin_angle_density(s, kappa) < peak * 1e-19);
        }
    }

    #[test]
    fn gaussian_translation_statistics() {
        let mut g = rng(6);
        let m = Vector3::new(1.0, -2.0, 0.5);
        assert_eq!(sample_gaussian_translation(&m, TAU_NOISELESS, &mut g), m);
        for &(tau, std) in &[(1.0, 1.0), (100.0, 0.1)] {
            let n = 100_000;
            let xs: Vec<Vector3<f64>> = (0..n)
                .map(|_| sample_gaussian_translation(&m, tau, &mut g) - m)
                .collect();
            for axis in 0..3 {
                let mean = xs.iter().map(|v| v[axis]).sum::<f64>() / n as f64;
                let var = xs.iter().map(|v| (v[axis] - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
                assert!(
                    (var.sqrt() / std - 1.0).abs() < 0.03,
                    "tau {tau}: std {}",
                    var.sqrt()
                );
            }
        }
    }

    proptest::proptest! {
        #[test]
        fn projection_idempotent_and_scale_invariant(seed in 0u64..10_000, s in 0.01f64..100.0) {
            let mut g = rng(seed);
            let r = Rotation::random(&mut g);
            let p = project_to_so3(r.matrix());
            proptest::prop_assert!((p.matrix() - r.matrix()).norm() < 1e-9);
            let m = random_matrix(&mut g);
            let a = project_to_so3(&m);
            let b = project_to_so3(&(m * s));
            proptest::prop_assert!((a.matrix() - b.matrix()).norm() < 1e-9);
        }

        #[test]
        fn geodesic_symmetric_and_bi_invariant(seed in 0u64..10_000) {
            let mut g = rng(seed);
            let (a, b, q) = (Rotation::random(&mut g), Rotation::random(&mut g), Rotation::random(&mut g));
            let d = geodesic_angle_deg(&a, &b);
            proptest::prop_assert!((d - geodesic_angle_deg(&b, &a)).abs() < 1e-9);
            proptest::prop_assert!((d - geodesic_angle_deg(&(q * a), &(q * b))).abs() < 1e-9);
            proptest::prop_assert!((d - geodesic_angle_deg(&(a * q), &(b * q))).abs() < 1e-9);
            proptest::prop_assert!((0.0..=180.0).contains(&d));
        }
    }
}
