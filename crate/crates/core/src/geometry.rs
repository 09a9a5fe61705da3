//! Analytic evolving surfaces.
//!
//! Every family is described by a closed-form flow map from the reference
//! surface `Γ(0)`, the velocity of that flow, a level-set function and an
//! analytic closest-point projection. Mesh nodes are moved with the flow map
//! directly, so node trajectories carry no time-integration error.
//!
//! The two tori are only determined up to tangential motion by their level
//! sets. Here material points keep their toroidal angles `(θ, φ)` fixed:
//!
//! ```text
//! x(θ, φ, t) = ((R(t) + r(t) cos φ) cos θ, (R(t) + r(t) cos φ) sin θ, r(t) sin φ)
//! ```
//!
//! with `R(t) = 0.75 + t, r(t) = 0.25` for the expanding torus and
//! `R(t) = 0.75, r(t) = 0.25 (1 - t)` for the shrinking one.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

pub type Point3 = Vector3<f64>;

const TORUS_MAJOR: f64 = 0.75;
const TORUS_MINOR: f64 = 0.25;
const SHRINKING_T_MAX: f64 = 0.99;
const EXPANDING_T_MAX: f64 = 20.0;
/// Fraction of the tube radius inside which torus projections are accepted.
const TUBE_FRACTION: f64 = 0.8;

/// One of the analytic surface evolutions used by the experiments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SurfaceFamily {
    /// Sphere of fixed radius centred at the origin.
    StationarySphere { radius: f64 },
    /// Unit sphere at `t = 0` with level set `|x|² − eᵗ = 0`.
    ExpandingSphere,
    /// `(√(x²+y²) − 0.75 − t)² + z² − 0.25² = 0`.
    ExpandingTorus,
    /// `(√(x²+y²) − 0.75)² + z² − (0.25 − 0.25t)² = 0`, valid for `t < 0.99`.
    ShrinkingTorus,
}

impl SurfaceFamily {
    pub fn unit_sphere() -> Self {
        SurfaceFamily::StationarySphere { radius: 1.0 }
    }

    /// Short identifier, also used as the config/CLI spelling.
    pub fn tag(&self) -> &'static str {
        match self {
            SurfaceFamily::StationarySphere { .. } => "stationary_sphere",
            SurfaceFamily::ExpandingSphere => "expanding_sphere",
            SurfaceFamily::ExpandingTorus => "expanding_torus",
            SurfaceFamily::ShrinkingTorus => "shrinking_torus",
        }
    }

    pub fn is_sphere(&self) -> bool {
        matches!(
            self,
            SurfaceFamily::StationarySphere { .. } | SurfaceFamily::ExpandingSphere
        )
    }

    pub fn is_torus(&self) -> bool {
        !self.is_sphere()
    }

    pub fn is_stationary(&self) -> bool {
        matches!(self, SurfaceFamily::StationarySphere { .. })
    }

    /// Upper end of the admissible time interval.
    pub fn t_max(&self) -> f64 {
        match self {
            SurfaceFamily::StationarySphere { .. } => f64::INFINITY,
            SurfaceFamily::ExpandingSphere | SurfaceFamily::ExpandingTorus => EXPANDING_T_MAX,
            SurfaceFamily::ShrinkingTorus => SHRINKING_T_MAX,
        }
    }

    pub fn check_time(&self, t: f64) -> Result<()> {
        let ok = match self {
            SurfaceFamily::ShrinkingTorus => (0.0..SHRINKING_T_MAX).contains(&t),
            _ => t >= 0.0 && t <= self.t_max(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "time {t} outside the valid interval of {}",
                self.tag()
            )))
        }
    }

    fn sphere_radius(&self, t: f64) -> f64 {
        match *self {
            SurfaceFamily::StationarySphere { radius } => radius,
            SurfaceFamily::ExpandingSphere => (0.5 * t).exp(),
            _ => unreachable!("not a sphere"),
        }
    }

    /// `(R(t), r(t))` for the tori.
    fn torus_radii(&self, t: f64) -> (f64, f64) {
        match self {
            SurfaceFamily::ExpandingTorus => (TORUS_MAJOR + t, TORUS_MINOR),
            SurfaceFamily::ShrinkingTorus => (TORUS_MAJOR, TORUS_MINOR * (1.0 - t)),
            _ => unreachable!("not a torus"),
        }
    }

    /// Level-set function whose zero set is `Γ(t)`.
    pub fn level_set(&self, x: &Point3, t: f64) -> f64 {
        if self.is_sphere() {
            let r = self.sphere_radius(t);
            x.norm_squared() - r * r
        } else {
            let (big, small) = self.torus_radii(t);
            let rho = x.x.hypot(x.y);
            (rho - big).powi(2) + x.z * x.z - small * small
        }
    }

    /// Exact area of `Γ(t)`.
    pub fn area(&self, t: f64) -> f64 {
        if self.is_sphere() {
            let r = self.sphere_radius(t);
            4.0 * PI * r * r
        } else {
            let (big, small) = self.torus_radii(t);
            4.0 * PI * PI * big * small
        }
    }

    /// Moves a point of `Γ(0)` to its position on `Γ(t)`.
    pub fn flow_map(&self, x0: &Point3, t: f64) -> Result<Point3> {
        self.check_time(t)?;
        if self.is_sphere() {
            let scale = self.sphere_radius(t) / self.sphere_radius(0.0);
            return Ok(x0 * scale);
        }
        let (big0, small0) = self.torus_radii(0.0);
        let (big, small) = self.torus_radii(t);
        let rho0 = x0.x.hypot(x0.y);
        if rho0 == 0.0 {
            return Err(Error::Domain("point on the torus axis".into()));
        }
        // cos φ = (ρ₀ − R₀)/r₀, sin φ = z₀/r₀
        let ratio = small / small0;
        let rho = big + ratio * (rho0 - big0);
        Ok(Point3::new(
            rho * x0.x / rho0,
            rho * x0.y / rho0,
            ratio * x0.z,
        ))
    }

    /// Velocity of the material point currently at `x ∈ Γ(t)`.
    pub fn velocity(&self, x: &Point3, t: f64) -> Result<Point3> {
        self.check_time(t)?;
        Ok(match self {
            SurfaceFamily::StationarySphere { .. } => Point3::zeros(),
            SurfaceFamily::ExpandingSphere => 0.5 * x,
            SurfaceFamily::ExpandingTorus => {
                let rho = x.x.hypot(x.y);
                if rho == 0.0 {
                    return Err(Error::Domain("point on the torus axis".into()));
                }
                Point3::new(x.x / rho, x.y / rho, 0.0)
            }
            SurfaceFamily::ShrinkingTorus => {
                let (big, small) = self.torus_radii(t);
                let rho = x.x.hypot(x.y);
                if rho == 0.0 {
                    return Err(Error::Domain("point on the torus axis".into()));
                }
                // r'(t) (cos φ e_ρ + sin φ e_z) with r' = −0.25
                let s = -TORUS_MINOR / small;
                let radial = s * (rho - big) / rho;
                Point3::new(radial * x.x, radial * x.y, s * x.z)
            }
        })
    }

    /// Outward unit normal at the closest point of `x`.
    pub fn normal(&self, x: &Point3, t: f64) -> Result<Point3> {
        if self.is_sphere() {
            let n = x.norm();
            if n == 0.0 {
                return Err(Error::Domain("normal undefined at the origin".into()));
            }
            return Ok(x / n);
        }
        let (big, _) = self.torus_radii(t);
        let rho = x.x.hypot(x.y);
        if rho == 0.0 {
            return Err(Error::Domain("point on the torus axis".into()));
        }
        let dr = rho - big;
        let len = dr.hypot(x.z);
        if len == 0.0 {
            return Err(Error::Domain("point on the torus centre circle".into()));
        }
        Ok(Point3::new(dr * x.x / (rho * len), dr * x.y / (rho * len), x.z / len))
    }

    /// Signed distance to `Γ(t)`, positive outside.
    pub fn signed_distance(&self, x: &Point3, t: f64) -> f64 {
        if self.is_sphere() {
            x.norm() - self.sphere_radius(t)
        } else {
            let (big, small) = self.torus_radii(t);
            (x.x.hypot(x.y) - big).hypot(x.z) - small
        }
    }

    /// Largest |signed distance| for which [`closest_point`](Self::closest_point) is accepted.
    pub fn tube_radius(&self, t: f64) -> f64 {
        if self.is_sphere() {
            f64::INFINITY
        } else {
            let (big, small) = self.torus_radii(t);
            TUBE_FRACTION * small.min(big - small)
        }
    }

    /// Closest point of `Γ(t)` to `x`, computed radially for spheres and
    /// through toroidal coordinates for tori.
    pub fn closest_point(&self, x: &Point3, t: f64) -> Result<Point3> {
        self.check_time(t)?;
        if self.is_sphere() {
            let n = x.norm();
            if n == 0.0 {
                return Err(Error::Domain("closest point undefined at the origin".into()));
            }
            return Ok(x * (self.sphere_radius(t) / n));
        }
        let d = self.signed_distance(x, t);
        if !(d.abs() < self.tube_radius(t)) {
            return Err(Error::Domain(format!(
                "point at distance {d} is outside the tubular neighbourhood of {}",
                self.tag()
            )));
        }
        let (big, small) = self.torus_radii(t);
        let rho = x.x.hypot(x.y);
        let dr = rho - big;
        let len = dr.hypot(x.z);
        let rho_p = big + small * dr / len;
        Ok(Point3::new(
            rho_p * x.x / rho,
            rho_p * x.y / rho,
            small * x.z / len,
        ))
    }

    /// Derivative of the closest-point map at `x`, as a 3×3 matrix acting on
    /// displacement vectors.
    pub fn closest_point_jacobian(&self, x: &Point3, t: f64) -> Result<Matrix3<f64>> {
        self.check_time(t)?;
        if self.is_sphere() {
            let n = x.norm();
            if n == 0.0 {
                return Err(Error::Domain("closest point undefined at the origin".into()));
            }
            let u = x / n;
            let r = self.sphere_radius(t);
            return Ok((Matrix3::identity() - u * u.transpose()) * (r / n));
        }
        let (big, small) = self.torus_radii(t);
        let rho = x.x.hypot(x.y);
        if rho == 0.0 {
            return Err(Error::Domain("point on the torus axis".into()));
        }
        let e_rho = Point3::new(x.x / rho, x.y / rho, 0.0);
        let e_theta = Point3::new(-x.y / rho, x.x / rho, 0.0);
        let e_z = Point3::z();
        let dr = rho - big;
        let len = dr.hypot(x.z);
        if len == 0.0 {
            return Err(Error::Domain("point on the torus centre circle".into()));
        }
        let n = (dr * e_rho + x.z * e_z) / len;
        // p = R e_ρ + r n with n = (d_ρ e_ρ + z e_z)/|d|.
        // de_ρ[v] = (v·e_θ) e_θ / ρ; the meridian vector d moves by
        // (v·e_ρ) e_ρ + (v·e_z) e_z + d_ρ de_ρ[v].
        let meridian = e_rho * e_rho.transpose() + e_z * e_z.transpose();
        let de_rho = e_theta * e_theta.transpose() / rho;
        let dd = meridian + de_rho * dr;
        let proj = Matrix3::identity() - n * n.transpose();
        let dn = proj * dd / len;
        Ok(de_rho * big + dn * small)
    }
}

impl fmt::Display for SurfaceFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SurfaceFamily::StationarySphere { radius } if *radius != 1.0 => {
                write!(f, "stationary_sphere(radius={radius})")
            }
            _ => f.write_str(self.tag()),
        }
    }
}

impl FromStr for SurfaceFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "stationary_sphere" => Ok(SurfaceFamily::unit_sphere()),
            "expanding_sphere" => Ok(SurfaceFamily::ExpandingSphere),
            "expanding_torus" => Ok(SurfaceFamily::ExpandingTorus),
            "shrinking_torus" => Ok(SurfaceFamily::ShrinkingTorus),
            other => Err(Error::Input(format!("unknown surface family `{other}`"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const FAMILIES: [SurfaceFamily; 4] = [
        SurfaceFamily::StationarySphere { radius: 1.0 },
        SurfaceFamily::ExpandingSphere,
        SurfaceFamily::ExpandingTorus,
        SurfaceFamily::ShrinkingTorus,
    ];

    fn random_reference_point(family: &SurfaceFamily, rng: &mut ChaCha8Rng) -> Point3 {
        let a: f64 = rng.random_range(0.0..2.0 * PI);
        let b: f64 = rng.random_range(0.0..2.0 * PI);
        if family.is_sphere() {
            let z: f64 = rng.random_range(-1.0..1.0);
            let s = (1.0 - z * z).sqrt();
            Point3::new(s * a.cos(), s * a.sin(), z)
        } else {
            let rho = TORUS_MAJOR + TORUS_MINOR * b.cos();
            Point3::new(rho * a.cos(), rho * a.sin(), TORUS_MINOR * b.sin())
        }
    }

    #[test]
    fn expanding_sphere_flow_doubles_radius_at_ln4() {
        let x = SurfaceFamily::ExpandingSphere
            .flow_map(&Point3::new(1.0, 0.0, 0.0), 4f64.ln())
            .unwrap();
        assert_abs_diff_eq!(x, Point3::new(2.0, 0.0, 0.0), epsilon = 1e-14);
    }

    #[test]
    fn expanding_torus_outer_equator_moves_radially() {
        let x = SurfaceFamily::ExpandingTorus
            .flow_map(&Point3::new(1.0, 0.0, 0.0), 0.5)
            .unwrap();
        assert_abs_diff_eq!(x, Point3::new(1.5, 0.0, 0.0), epsilon = 1e-14);
    }

    #[test]
    fn flow_is_identity_at_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for family in FAMILIES {
            let x0 = random_reference_point(&family, &mut rng);
            assert_abs_diff_eq!(family.flow_map(&x0, 0.0).unwrap(), x0, epsilon = 1e-15);
        }
    }

    #[test]
    fn level_set_and_velocity_consistency() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for family in FAMILIES {
            for _ in 0..100 {
                let x0 = random_reference_point(&family, &mut rng);
                assert!(family.level_set(&x0, 0.0).abs() < 1e-10);
                let t: f64 = rng.random_range(0.0..0.9);
                let x = family.flow_map(&x0, t).unwrap();
                assert!(family.level_set(&x, t).abs() < 1e-12, "{family} t={t}");
                let step = 1e-5;
                let fd = (family.flow_map(&x0, t + step).unwrap()
                    - family.flow_map(&x0, t - step.min(t)).unwrap())
                    / (step + step.min(t));
                let v = family.velocity(&x, t).unwrap();
                assert!((fd - v).norm() < 1e-6, "{family}: {fd} vs {v}");
            }
        }
    }

    #[test]
    fn velocity_closed_forms() {
        let x = Point3::new(0.3, -0.4, 0.5);
        assert_eq!(SurfaceFamily::unit_sphere().velocity(&x, 0.3).unwrap(), Point3::zeros());
        assert_abs_diff_eq!(
            SurfaceFamily::ExpandingSphere.velocity(&x, 0.3).unwrap(),
            x / 2.0,
            epsilon = 1e-15
        );
        let y = Point3::new(0.6, 0.8, 0.1);
        assert_abs_diff_eq!(
            SurfaceFamily::ExpandingTorus.velocity(&y, 0.1).unwrap(),
            Point3::new(0.6, 0.8, 0.0),
            epsilon = 1e-15
        );
    }

    #[test]
    fn closest_point_examples() {
        let p = SurfaceFamily::ExpandingSphere
            .closest_point(&Point3::new(3.0, 0.0, 0.0), 4f64.ln())
            .unwrap();
        assert_abs_diff_eq!(p, Point3::new(2.0, 0.0, 0.0), epsilon = 1e-14);
        let q = SurfaceFamily::ExpandingTorus
            .closest_point(&Point3::new(1.1, 0.0, 0.0), 0.0)
            .unwrap();
        assert_abs_diff_eq!(q, Point3::new(1.0, 0.0, 0.0), epsilon = 1e-14);
        assert!(SurfaceFamily::ExpandingTorus
            .closest_point(&Point3::new(1.3, 0.0, 0.0), 0.0)
            .is_err());
        assert!(SurfaceFamily::unit_sphere().closest_point(&Point3::zeros(), 0.0).is_err());
    }

    #[test]
    fn closest_point_is_orthogonal_and_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for family in FAMILIES {
            for _ in 0..100 {
                let t: f64 = rng.random_range(0.0..0.6);
                let x0 = random_reference_point(&family, &mut rng);
                let on = family.flow_map(&x0, t).unwrap();
                assert!((family.closest_point(&on, t).unwrap() - on).norm() < 1e-10);
                let n = family.normal(&on, t).unwrap();
                let off = on + n * rng.random_range(-0.5..0.5) * family.tube_radius(t).min(0.5)
                    + Point3::new(1e-3, -2e-3, 1e-3);
                let p = family.closest_point(&off, t).unwrap();
                assert!(family.level_set(&p, t).abs() < 1e-10);
                let np = family.normal(&p, t).unwrap();
                assert!((off - p).cross(&np).norm() < 1e-10);
                let pp = family.closest_point(&p, t).unwrap();
                assert!((pp - p).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn closest_point_jacobian_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for family in FAMILIES {
            for _ in 0..20 {
                let t: f64 = rng.random_range(0.0..0.5);
                let x0 = random_reference_point(&family, &mut rng);
                let x = family.flow_map(&x0, t).unwrap() + Point3::new(0.01, 0.02, -0.015);
                let jac = family.closest_point_jacobian(&x, t).unwrap();
                let step = 1e-6;
                for k in 0..3 {
                    let mut e = Point3::zeros();
                    e[k] = step;
                    let fd = (family.closest_point(&(x + e), t).unwrap()
                        - family.closest_point(&(x - e), t).unwrap())
                        / (2.0 * step);
                    assert!((fd - jac.column(k)).norm() < 1e-7, "{family} col {k}");
                }
            }
        }
    }

    #[test]
    fn shrinking_torus_rejects_late_times() {
        let x0 = Point3::new(1.0, 0.0, 0.0);
        assert!(SurfaceFamily::ShrinkingTorus.flow_map(&x0, 0.99).is_err());
        assert!(SurfaceFamily::ShrinkingTorus.flow_map(&x0, 1.0).is_err());
        assert!(SurfaceFamily::ShrinkingTorus.flow_map(&x0, 0.98).is_ok());
        assert!(SurfaceFamily::ExpandingTorus.flow_map(&x0, -0.1).is_err());
    }
}
