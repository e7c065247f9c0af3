//! Tricept kinematics.
//!
//! The moving platform is an equilateral triangle of side `a` carrying the
//! spherical joints; the base is an equilateral triangle of side `b`
//! carrying the universal joints. A pose is two rotations (`theta` about
//! the global y axis, `psi` about the global x axis) plus the passive leg
//! extension `c`.
//!
//! Platform joint `i` sits at `R (p_i + d z) + c z`, where `R = Ry(theta)
//! Rx(psi)`, `p_i` is the joint position in the platform frame and the `c z`
//! offset is applied in the global frame. Leg length `q_i` is the distance
//! between platform joint `i` and base joint `i`; that vector-norm form is
//! the reference every other routine here is checked against.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::numerics;

const SQRT_3: f64 = 1.732_050_807_568_877_2;

/// Any leg shorter than this (mm) is treated as a singular configuration.
pub const SINGULAR_LENGTH: f64 = 1e-9;

/// Forward kinematics gives up when the Jacobian condition estimate exceeds this.
pub const SINGULAR_CONDITION: f64 = 1e12;

/// Fixed machine dimensions, all in mm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriceptGeometry {
    a: f64,
    b: f64,
    d: f64,
}

impl TriceptGeometry {
    pub fn new(a: f64, b: f64, d: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && d.is_finite()) {
            return Err(Error::InvalidArgument("geometry must be finite".into()));
        }
        if a <= 0.0 {
            return Err(Error::InvalidArgument(format!("platform side a must be > 0, got {a}")));
        }
        if b < 0.0 {
            return Err(Error::InvalidArgument(format!("base side b must be >= 0, got {b}")));
        }
        if d < 0.0 {
            return Err(Error::InvalidArgument(format!("tool offset d must be >= 0, got {d}")));
        }
        Ok(TriceptGeometry { a, b, d })
    }

    /// Platform triangle side.
    pub fn a(&self) -> f64 {
        self.a
    }

    /// Base triangle side.
    pub fn b(&self) -> f64 {
        self.b
    }

    /// Offset from the passive-leg joint to the platform origin.
    pub fn d(&self) -> f64 {
        self.d
    }
}

impl Default for TriceptGeometry {
    /// Placeholder machine (a = 500, b = 760, d = 30 mm). The real
    /// dimensions behind the reference workspace were never published.
    fn default() -> Self {
        TriceptGeometry {
            a: 500.0,
            b: 760.0,
            d: 30.0,
        }
    }
}

/// Task-space pose: `theta`, `psi` in rad, `c` in mm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub theta: f64,
    pub psi: f64,
    pub c: f64,
}

impl Pose {
    pub fn new(theta: f64, psi: f64, c: f64) -> Result<Self> {
        let pose = Pose { theta, psi, c };
        pose.validate()?;
        Ok(pose)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta.is_finite() && self.psi.is_finite() && self.c.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite pose {self:?}")));
        }
        if self.c <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "passive extension c must be > 0, got {}",
                self.c
            )));
        }
        Ok(())
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.theta, self.psi, self.c]
    }

    pub fn from_array(v: [f64; 3]) -> Self {
        Pose {
            theta: v[0],
            psi: v[1],
            c: v[2],
        }
    }
}

/// Closed interval `[min, max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Range {
    pub min: f64,
    pub max: f64,
}

impl Range {
    pub fn new(min: f64, max: f64) -> Result<Self> {
        if !(min.is_finite() && max.is_finite()) || min > max {
            return Err(Error::InvalidArgument(format!("invalid range [{min}, {max}]")));
        }
        Ok(Range { min, max })
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.min && v <= self.max
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.min + self.max)
    }

    pub fn span(&self) -> f64 {
        self.max - self.min
    }
}

/// Box of admissible poses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseDomain {
    pub theta: Range,
    pub psi: Range,
    pub c: Range,
}

impl PoseDomain {
    pub fn new(theta: Range, psi: Range, c: Range) -> Result<Self> {
        let domain = PoseDomain { theta, psi, c };
        domain.validate()?;
        Ok(domain)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, r) in [("theta", self.theta), ("psi", self.psi), ("c", self.c)] {
            if !(r.min.is_finite() && r.max.is_finite()) || r.min > r.max {
                return Err(Error::InvalidArgument(format!(
                    "{name} range [{}, {}] is empty",
                    r.min, r.max
                )));
            }
        }
        if self.c.min <= 0.0 {
            return Err(Error::InvalidArgument("c range must be positive".into()));
        }
        Ok(())
    }

    pub fn contains(&self, pose: &Pose) -> bool {
        self.theta.contains(pose.theta) && self.psi.contains(pose.psi) && self.c.contains(pose.c)
    }

    pub fn centroid(&self) -> Pose {
        Pose {
            theta: self.theta.mid(),
            psi: self.psi.mid(),
            c: self.c.mid(),
        }
    }

    pub fn ranges(&self) -> [Range; 3] {
        [self.theta, self.psi, self.c]
    }
}

impl Default for PoseDomain {
    /// Angles in [-0.5027, 0.5027] rad, c in [426, 634] mm.
    fn default() -> Self {
        PoseDomain {
            theta: Range {
                min: -0.5027,
                max: 0.5027,
            },
            psi: Range {
                min: -0.5027,
                max: 0.5027,
            },
            c: Range {
                min: 426.0,
                max: 634.0,
            },
        }
    }
}

/// Proper rotation `Ry(theta) Rx(psi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationMatrix(Matrix3<f64>);

impl RotationMatrix {
    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn apply(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.0 * v
    }
}

/// Actuator lengths in mm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LegLengths(pub [f64; 3]);

impl LegLengths {
    pub fn new(q1: f64, q2: f64, q3: f64) -> Result<Self> {
        for (i, q) in [q1, q2, q3].into_iter().enumerate() {
            if !(q.is_finite() && q > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "leg {} length must be > 0, got {q}",
                    i + 1
                )));
            }
        }
        Ok(LegLengths([q1, q2, q3]))
    }

    pub fn q1(&self) -> f64 {
        self.0[0]
    }

    pub fn q2(&self) -> f64 {
        self.0[1]
    }

    pub fn q3(&self) -> f64 {
        self.0[2]
    }
}

/// Per-leg vectors of the closure loop.
#[derive(Debug, Clone, PartialEq)]
pub struct LegVectors {
    pub platform_joints: [Vector3<f64>; 3],
    pub base_joints: [Vector3<f64>; 3],
    /// Unit vectors from each base joint to its platform joint.
    pub leg_directions: [Vector3<f64>; 3],
    pub leg_lengths: [f64; 3],
}

pub fn rotation_matrix(theta: f64, psi: f64) -> Result<RotationMatrix> {
    if !(theta.is_finite() && psi.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "non-finite angles theta={theta}, psi={psi}"
        )));
    }
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = psi.sin_cos();
    #[rustfmt::skip]
    let m = Matrix3::new(
        ct,  sp * st, cp * st,
        0.0, cp,      -sp,
        -st, ct * sp, ct * cp,
    );
    Ok(RotationMatrix(m))
}

/// Joint positions of an equilateral triangle with side `side`, in its own
/// plane: vertex 1 on +x, vertices 2 and 3 at +y and -y.
fn triangle(side: f64) -> [Vector3<f64>; 3] {
    [
        Vector3::new(side / SQRT_3, 0.0, 0.0),
        Vector3::new(-side / (2.0 * SQRT_3), side / 2.0, 0.0),
        Vector3::new(-side / (2.0 * SQRT_3), -side / 2.0, 0.0),
    ]
}

/// Spherical joint positions in the global frame.
pub fn platform_joints(geom: &TriceptGeometry, pose: &Pose) -> Result<[Vector3<f64>; 3]> {
    pose.validate()?;
    let r = rotation_matrix(pose.theta, pose.psi)?;
    let offset = Vector3::new(0.0, 0.0, geom.d);
    let lift = Vector3::new(0.0, 0.0, pose.c);
    Ok(triangle(geom.a).map(|p| r.apply(&(p + offset)) + lift))
}

/// Universal joint positions in the global frame.
pub fn base_joints(geom: &TriceptGeometry) -> [Vector3<f64>; 3] {
    triangle(geom.b)
}

pub fn leg_vectors(geom: &TriceptGeometry, pose: &Pose) -> Result<LegVectors> {
    let platform = platform_joints(geom, pose)?;
    let base = base_joints(geom);
    let mut directions = [Vector3::zeros(); 3];
    let mut lengths = [0.0; 3];
    for i in 0..3 {
        let leg = platform[i] - base[i];
        let len = leg.norm();
        if !(len >= SINGULAR_LENGTH) {
            return Err(Error::Singular(format!(
                "leg {} has length {len:e} at {pose:?}",
                i + 1
            )));
        }
        directions[i] = leg / len;
        lengths[i] = len;
    }
    Ok(LegVectors {
        platform_joints: platform,
        base_joints: base,
        leg_directions: directions,
        leg_lengths: lengths,
    })
}

pub fn inverse_kinematics(geom: &TriceptGeometry, pose: &Pose) -> Result<LegLengths> {
    Ok(LegLengths(leg_vectors(geom, pose)?.leg_lengths))
}

/// Evaluates the textbook closed-form expansions of `q_i^2` term by term.
///
/// These printed expansions are known to disagree with the vector-norm
/// lengths; see [`printed_expansion_discrepancy`]. Elided terms are taken as
/// zero. Exists only to cross-check the algebra.
pub fn expanded_leg_lengths(geom: &TriceptGeometry, pose: &Pose) -> Result<LegLengths> {
    pose.validate()?;
    let TriceptGeometry { a, b, d } = *geom;
    let c = pose.c;
    let (st, ct) = pose.theta.sin_cos();
    let (sp, cp) = pose.psi.sin_cos();
    let common = a * a / 3.0 + b * b / 3.0 + c * c + d * d;

    let q1_sq = common - (2.0 / 3.0) * a * b * ct + 2.0 * c * d * ct * cp
        - (2.0 * b * d / SQRT_3) * cp * st;
    let q2_sq = common - 0.5 * a * b * (ct / 3.0 - sp * st / SQRT_3 + cp)
        + b * d * (cp * st / SQRT_3 + sp)
        + 2.0 * c * d * ct * cp
        - a * c * (st / SQRT_3 + ct * sp);
    let q3_sq = common - 0.5 * a * b * (ct / 3.0 + sp * st / SQRT_3 + cp)
        + b * d * (cp * st / SQRT_3 - sp)
        + 2.0 * c * d * ct * cp
        - a * c * (st / SQRT_3 - ct * sp);

    let mut q = [0.0; 3];
    for (i, sq) in [q1_sq, q2_sq, q3_sq].into_iter().enumerate() {
        if !(sq >= 0.0) {
            return Err(Error::AlgebraMismatch { leg: i + 1, value: sq });
        }
        q[i] = sq.sqrt();
    }
    Ok(LegLengths(q))
}

/// Closed-form difference `printed q_i^2 - exact q_i^2` between the printed
/// expansions and the vector-norm lengths.
///
/// Every discrepancy is a single `a*c` cross term:
///
/// | leg | printed minus exact                     |
/// |-----|-----------------------------------------|
/// | 1   | `+(2ac/sqrt3) sin(theta)`               |
/// | 2   | `-2ac (sin(theta)/sqrt3 + cos(theta) sin(psi))` |
/// | 3   | `-2ac (sin(theta)/sqrt3 - cos(theta) sin(psi))` |
///
/// Leg 1 is missing its term entirely; legs 2 and 3 carry it with the wrong
/// sign. All three vanish at `theta = psi = 0`.
pub fn printed_expansion_discrepancy(geom: &TriceptGeometry, pose: &Pose) -> [f64; 3] {
    let (a, c) = (geom.a, pose.c);
    let (st, ct) = pose.theta.sin_cos();
    let sp = pose.psi.sin();
    [
        2.0 * a * c / SQRT_3 * st,
        -2.0 * a * c * (st / SQRT_3 + ct * sp),
        -2.0 * a * c * (st / SQRT_3 - ct * sp),
    ]
}

/// Projects the closure loop onto each leg direction and subtracts the
/// supplied length. Zero means `lengths` closes the loop at `pose`.
pub fn closure_residual(
    geom: &TriceptGeometry,
    pose: &Pose,
    lengths: &LegLengths,
) -> Result<[f64; 3]> {
    let legs = leg_vectors(geom, pose)?;
    let r = rotation_matrix(pose.theta, pose.psi)?;
    let lift = Vector3::new(0.0, 0.0, pose.c);
    let offset = Vector3::new(0.0, 0.0, geom.d);
    let local = triangle(geom.a);
    let mut out = [0.0; 3];
    for i in 0..3 {
        let n = &legs.leg_directions[i];
        let reach = lift.dot(n) + r.apply(&(local[i] + offset)).dot(n);
        out[i] = reach - legs.base_joints[i].dot(n) - lengths.0[i];
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FkOptions {
    /// Stop when every leg is within this many mm of its target.
    pub tol: f64,
    pub max_iter: usize,
    /// Central-difference step for the Jacobian.
    pub step: f64,
}

impl Default for FkOptions {
    fn default() -> Self {
        FkOptions {
            tol: 1e-10,
            max_iter: 100,
            step: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FkSolution {
    pub pose: Pose,
    pub iterations: usize,
    pub max_residual: f64,
}

fn length_error(geom: &TriceptGeometry, pose: &Pose, target: &LegLengths) -> Result<[f64; 3]> {
    let q = inverse_kinematics(geom, pose)?.0;
    Ok([q[0] - target.0[0], q[1] - target.0[1], q[2] - target.0[2]])
}

fn max_abs(v: &[f64; 3]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

fn norm(v: &[f64; 3]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Recovers the pose producing `lengths` by damped Newton iteration with a
/// finite-difference Jacobian, starting from `guess`.
///
/// The Newton step is halved until the residual norm decreases.
pub fn forward_kinematics(
    geom: &TriceptGeometry,
    lengths: &LegLengths,
    guess: &Pose,
    opts: &FkOptions,
) -> Result<FkSolution> {
    guess.validate()?;
    if !(opts.tol > 0.0) || !(opts.step > 0.0) {
        return Err(Error::InvalidArgument("tolerance and step must be > 0".into()));
    }

    let mut pose = *guess;
    let mut err = length_error(geom, &pose, lengths)?;
    let mut iterations = 0;
    while max_abs(&err) > opts.tol {
        if iterations == opts.max_iter {
            return Err(Error::Convergence {
                iterations,
                residual: max_abs(&err),
            });
        }
        iterations += 1;

        let at = pose.to_array();
        let jac = numerics::finite_difference_jacobian(
            |x| match inverse_kinematics(geom, &Pose::from_array([x[0], x[1], x[2]])) {
                Ok(q) => q.0.to_vec(),
                Err(_) => vec![f64::NAN; 3],
            },
            &at,
            opts.step,
        )?;
        let j = Matrix3::from_fn(|r, c| jac.get(r, c));
        let sv = j.singular_values();
        let (smax, smin) = (sv.max(), sv.min());
        if !(smin > 0.0) || smax / smin > SINGULAR_CONDITION {
            return Err(Error::Singular(format!(
                "forward-kinematics Jacobian condition {:e} at {pose:?}",
                smax / smin
            )));
        }
        let rhs = Vector3::new(err[0], err[1], err[2]);
        let delta = j
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Singular(format!("Jacobian not invertible at {pose:?}")))?;

        let current = norm(&err);
        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let trial = Pose::from_array([
                at[0] - scale * delta[0],
                at[1] - scale * delta[1],
                at[2] - scale * delta[2],
            ]);
            if let Ok(e) = length_error(geom, &trial, lengths) {
                if norm(&e) < current {
                    accepted = Some((trial, e));
                    break;
                }
            }
            scale *= 0.5;
        }
        match accepted {
            Some((p, e)) => {
                pose = p;
                err = e;
            }
            None => {
                return Err(Error::Convergence {
                    iterations,
                    residual: max_abs(&err),
                })
            }
        }
    }
    Ok(FkSolution {
        pose,
        iterations,
        max_residual: max_abs(&err),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_pose(rng: &mut ChaCha8Rng, domain: &PoseDomain) -> Pose {
        Pose {
            theta: rng.gen_range(domain.theta.min..=domain.theta.max),
            psi: rng.gen_range(domain.psi.min..=domain.psi.max),
            c: rng.gen_range(domain.c.min..=domain.c.max),
        }
    }

    #[test]
    fn geometry_validation() {
        assert!(TriceptGeometry::new(0.0, 0.0, 0.0).is_err());
        assert!(TriceptGeometry::new(-1.0, 1.0, 0.0).is_err());
        assert!(TriceptGeometry::new(1.0, 1.0, -1.0).is_err());
        assert!(TriceptGeometry::new(1.0, 0.0, 0.0).is_ok());
        assert!(TriceptGeometry::new(f64::NAN, 1.0, 0.0).is_err());
    }

    #[test]
    fn pose_validation() {
        assert!(Pose::new(0.0, 0.0, 0.0).is_err());
        assert!(Pose::new(f64::INFINITY, 0.0, 1.0).is_err());
        assert!(Pose::new(0.1, -0.1, 500.0).is_ok());
    }

    #[test]
    fn rotation_at_zero_is_identity() {
        assert_eq!(*rotation_matrix(0.0, 0.0).unwrap().matrix(), Matrix3::identity());
    }

    #[test]
    fn rotation_with_zero_psi_is_pure_y_rotation() {
        let t: f64 = 0.37;
        let r = rotation_matrix(t, 0.0).unwrap();
        #[rustfmt::skip]
        let expected = Matrix3::new(
            t.cos(),  0.0, t.sin(),
            0.0,      1.0, 0.0,
            -t.sin(), 0.0, t.cos(),
        );
        assert!((r.matrix() - expected).abs().max() < 1e-15);
    }

    #[test]
    fn rotation_matches_elementary_product() {
        // Ry(0.3) * Rx(-0.2), multiplied out long-hand.
        let (st, ct) = 0.3_f64.sin_cos();
        let (sp, cp) = (-0.2_f64).sin_cos();
        let ry = [[ct, 0.0, st], [0.0, 1.0, 0.0], [-st, 0.0, ct]];
        let rx = [[1.0, 0.0, 0.0], [0.0, cp, -sp], [0.0, sp, cp]];
        let r = rotation_matrix(0.3, -0.2).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let mut acc = 0.0;
                for k in 0..3 {
                    acc += ry[i][k] * rx[k][j];
                }
                assert!((r.matrix()[(i, j)] - acc).abs() < 1e-15);
            }
        }
        assert!(rotation_matrix(f64::NAN, 0.0).is_err());
    }

    #[test]
    fn platform_joints_at_zero_angles() {
        let g = TriceptGeometry::new(200.0, 300.0, 100.0).unwrap();
        let p = platform_joints(&g, &Pose::new(0.0, 0.0, 500.0).unwrap()).unwrap();
        let s = 3.0_f64.sqrt();
        let expected = [
            [200.0 / s, 0.0, 600.0],
            [-200.0 / (2.0 * s), 100.0, 600.0],
            [-200.0 / (2.0 * s), -100.0, 600.0],
        ];
        for i in 0..3 {
            for k in 0..3 {
                assert!((p[i][k] - expected[i][k]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn platform_joints_match_direct_construction() {
        // Build R entry by entry and do the products by hand.
        let (a, d, c) = (200.0_f64, 100.0_f64, 500.0_f64);
        let (t, p) = (0.1_f64, -0.1_f64);
        let g = TriceptGeometry::new(a, 300.0, d).unwrap();
        let got = platform_joints(&g, &Pose::new(t, p, c).unwrap()).unwrap();
        let r = [
            [t.cos(), p.sin() * t.sin(), p.cos() * t.sin()],
            [0.0, p.cos(), -p.sin()],
            [-t.sin(), t.cos() * p.sin(), t.cos() * p.cos()],
        ];
        let s = 3.0_f64.sqrt();
        let local = [
            [a / s, 0.0, d],
            [-a / (2.0 * s), a / 2.0, d],
            [-a / (2.0 * s), -a / 2.0, d],
        ];
        for i in 0..3 {
            for row in 0..3 {
                let mut v = r[row][0] * local[i][0] + r[row][1] * local[i][1] + r[row][2] * local[i][2];
                if row == 2 {
                    v += c;
                }
                assert!((got[i][row] - v).abs() < 1e-12, "joint {i} row {row}");
            }
        }
    }

    #[test]
    fn platform_triangle_is_rigid() {
        let g = TriceptGeometry::default();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let pose = random_pose(&mut rng, &PoseDomain::default());
            let p = platform_joints(&g, &pose).unwrap();
            for (i, j) in [(0, 1), (1, 2), (0, 2)] {
                assert!(((p[i] - p[j]).norm() - g.a()).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn base_joints_layout() {
        let zero = base_joints(&TriceptGeometry::new(1.0, 0.0, 0.0).unwrap());
        assert!(zero.iter().all(|v| v.norm() == 0.0));
        let g = TriceptGeometry::new(1.0, 300.0, 0.0).unwrap();
        let b = base_joints(&g);
        assert!((b[0][0] - 173.2051).abs() < 1e-4);
        for (i, j) in [(0, 1), (1, 2), (0, 2)] {
            assert!(((b[i] - b[j]).norm() - 300.0).abs() < 1e-12);
        }
    }

    #[test]
    fn ik_at_zero_angles_is_symmetric_closed_form() {
        let g = TriceptGeometry::default();
        for c in [426.0, 530.0, 634.0] {
            let q = inverse_kinematics(&g, &Pose::new(0.0, 0.0, c).unwrap()).unwrap();
            let expected = ((g.a() - g.b()).powi(2) / 3.0 + (c + g.d()).powi(2)).sqrt();
            for v in q.0 {
                assert!((v - expected).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn ik_detects_singular_leg() {
        // a = b, d = 0 and a tiny c would put joints nearly on top of each other;
        // c must stay positive so use a pose where leg 1 closes exactly.
        let g = TriceptGeometry::new(300.0, 300.0, 0.0).unwrap();
        let pose = Pose { theta: 0.0, psi: 0.0, c: 1e-12 };
        assert!(matches!(inverse_kinematics(&g, &pose), Err(Error::Singular(_))));
    }

    #[test]
    fn psi_mirror_swaps_legs_two_and_three() {
        let g = TriceptGeometry::default();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..500 {
            let pose = random_pose(&mut rng, &PoseDomain::default());
            let mirrored = Pose { psi: -pose.psi, ..pose };
            let q = inverse_kinematics(&g, &pose).unwrap().0;
            let m = inverse_kinematics(&g, &mirrored).unwrap().0;
            assert!((q[0] - m[0]).abs() <= 1e-10 * q[0]);
            assert!((q[1] - m[2]).abs() <= 1e-10 * q[1]);
            assert!((q[2] - m[1]).abs() <= 1e-10 * q[2]);
        }
    }

    #[test]
    fn expansions_agree_at_zero_angles() {
        let g = TriceptGeometry::default();
        let pose = Pose::new(0.0, 0.0, 480.0).unwrap();
        let exact = inverse_kinematics(&g, &pose).unwrap().0;
        let printed = expanded_leg_lengths(&g, &pose).unwrap().0;
        for i in 0..3 {
            assert!((exact[i] - printed[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn printed_discrepancy_is_the_ac_cross_term() {
        let g = TriceptGeometry::default();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..1000 {
            let pose = random_pose(&mut rng, &PoseDomain::default());
            let legs = leg_vectors(&g, &pose).unwrap();
            let delta = printed_expansion_discrepancy(&g, &pose);
            let printed = expanded_leg_lengths(&g, &pose).unwrap().0;
            for i in 0..3 {
                // brute force: squared norm of the joint difference
                let exact_sq = (legs.platform_joints[i] - legs.base_joints[i]).norm_squared();
                let diff = printed[i] * printed[i] - exact_sq;
                assert!(
                    (diff - delta[i]).abs() <= 1e-9 * exact_sq,
                    "leg {} diff {diff} vs {}",
                    i + 1,
                    delta[i]
                );
            }
        }
    }

    #[test]
    fn printed_expansion_can_go_negative() {
        // Far outside the working domain the wrong-signed cross term on leg 3
        // drives the printed square below zero.
        let g = TriceptGeometry::new(8.0971, 5.6048, 2.8842).unwrap();
        let pose = Pose::new(1.9988, 0.7949, 4.1290).unwrap();
        match expanded_leg_lengths(&g, &pose) {
            Err(Error::AlgebraMismatch { leg, value }) => {
                assert_eq!(leg, 3);
                assert!(value < 0.0);
            }
            other => panic!("expected mismatch, got {other:?}"),
        }
    }

    #[test]
    fn closure_residual_is_zero_for_ik_lengths() {
        let g = TriceptGeometry::default();
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for _ in 0..200 {
            let pose = random_pose(&mut rng, &PoseDomain::default());
            let q = inverse_kinematics(&g, &pose).unwrap();
            let r = closure_residual(&g, &pose, &q).unwrap();
            assert!(r.iter().all(|v| v.abs() <= 1e-9), "{r:?}");
        }
    }

    #[test]
    fn closure_residual_tracks_length_perturbation() {
        let g = TriceptGeometry::default();
        let pose = Pose::new(0.2, -0.3, 510.0).unwrap();
        let mut q = inverse_kinematics(&g, &pose).unwrap();
        q.0[1] += 1.0;
        let r = closure_residual(&g, &pose, &q).unwrap();
        assert!(r[0].abs() < 1e-9 && (r[1] + 1.0).abs() < 1e-9 && r[2].abs() < 1e-9);
    }

    #[test]
    fn closure_residual_equals_norm_minus_length() {
        let g = TriceptGeometry::default();
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        for _ in 0..100 {
            let pose = random_pose(&mut rng, &PoseDomain::default());
            let lengths = LegLengths::new(
                rng.gen_range(100.0..900.0),
                rng.gen_range(100.0..900.0),
                rng.gen_range(100.0..900.0),
            )
            .unwrap();
            let legs = leg_vectors(&g, &pose).unwrap();
            let r = closure_residual(&g, &pose, &lengths).unwrap();
            for i in 0..3 {
                let direct = (legs.platform_joints[i] - legs.base_joints[i]).norm() - lengths.0[i];
                assert!((r[i] - direct).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn fk_from_exact_guess_takes_no_iterations() {
        let g = TriceptGeometry::default();
        let pose = Pose::new(0.1, 0.2, 600.0).unwrap();
        let q = inverse_kinematics(&g, &pose).unwrap();
        let sol = forward_kinematics(&g, &q, &pose, &FkOptions::default()).unwrap();
        assert!(sol.iterations <= 1);
        assert_eq!(sol.pose, pose);
    }

    #[test]
    fn fk_round_trip_from_centroid() {
        let g = TriceptGeometry::default();
        let domain = PoseDomain::default();
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        for _ in 0..50 {
            let pose = random_pose(&mut rng, &domain);
            let q = inverse_kinematics(&g, &pose).unwrap();
            let sol = forward_kinematics(&g, &q, &domain.centroid(), &FkOptions::default()).unwrap();
            assert!((sol.pose.theta - pose.theta).abs() < 1e-8);
            assert!((sol.pose.psi - pose.psi).abs() < 1e-8);
            assert!((sol.pose.c - pose.c).abs() < 1e-8);
        }
    }

    #[test]
    fn fk_equal_lengths_gives_zero_angles() {
        let g = TriceptGeometry::default();
        let q = 620.0;
        let lengths = LegLengths::new(q, q, q).unwrap();
        let guess = Pose::new(0.0, 0.0, 530.0).unwrap();
        let sol = forward_kinematics(&g, &lengths, &guess, &FkOptions::default()).unwrap();
        let c = (q * q - (g.a() - g.b()).powi(2) / 3.0).sqrt() - g.d();
        assert!(sol.pose.theta.abs() < 1e-10 && sol.pose.psi.abs() < 1e-10);
        assert!((sol.pose.c - c).abs() < 1e-8);
    }

    #[test]
    fn fk_reports_non_convergence() {
        let g = TriceptGeometry::default();
        let pose = Pose::new(0.3, 0.3, 600.0).unwrap();
        let q = inverse_kinematics(&g, &pose).unwrap();
        let opts = FkOptions { max_iter: 1, tol: 1e-14, ..FkOptions::default() };
        let r = forward_kinematics(&g, &q, &PoseDomain::default().centroid(), &opts);
        assert!(matches!(r, Err(Error::Convergence { .. })));
        assert!(forward_kinematics(&g, &q, &pose, &FkOptions { tol: 0.0, ..opts }).is_err());
    }
}
