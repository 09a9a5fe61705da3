//! Interpolation, Ritz projection, discrete inverse Laplacians,
//! prolongation between meshes and discrete norms.

use std::collections::HashMap;

use nalgebra::{Matrix2, Vector2};

use crate::assembly::{self, FeFunction};
use crate::error::{Error, Result};
use crate::geometry::{Point3, SurfaceFamily};
use crate::lu::{nested_dissection, CscMatrix, LuFactors};
use crate::mesh::SurfaceMesh;
use crate::quadrature::DUNAVANT4;
use crate::sparse::SparseSymMatrix;

const PIVOT_TOL: f64 = 0.1;

/// A smooth scalar field on ambient space with its ambient gradient.
pub trait SmoothField {
    fn value(&self, x: &Point3) -> f64;
    fn gradient(&self, x: &Point3) -> Point3;
}

/// `x ↦ c · x`.
#[derive(Debug, Clone, Copy)]
pub struct LinearField(pub Point3);

impl SmoothField for LinearField {
    fn value(&self, x: &Point3) -> f64 {
        self.0.dot(x)
    }

    fn gradient(&self, _x: &Point3) -> Point3 {
        self.0
    }
}

/// Field given by a pair of closures.
pub struct FnField<F, G>(pub F, pub G);

impl<F, G> SmoothField for FnField<F, G>
where
    F: Fn(&Point3) -> f64,
    G: Fn(&Point3) -> Point3,
{
    fn value(&self, x: &Point3) -> f64 {
        (self.0)(x)
    }

    fn gradient(&self, x: &Point3) -> Point3 {
        (self.1)(x)
    }
}

/// Lagrange interpolant: coefficient `i` is `g(x_i)`.
pub fn interpolate(mesh: &SurfaceMesh, g: impl Fn(&Point3) -> f64) -> Result<FeFunction> {
    let coefficients = mesh
        .vertices()
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let v = g(x);
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::Input(format!("interpolated field is {v} at vertex {i}")))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    FeFunction::new(coefficients, mesh)
}

/// `Σ_i M̄_ii z_i / Σ_i M̄_ii`.
pub fn lumped_mean(mesh: &SurfaceMesh, z: &FeFunction) -> Result<f64> {
    z.check_bound_to(mesh)?;
    let m = assembly::lumped_mass_diagonal(mesh);
    let total: f64 = m.iter().sum();
    Ok(m.iter().zip(&z.coefficients).map(|(a, b)| a * b).sum::<f64>() / total)
}

pub fn h1_seminorm(mesh: &SurfaceMesh, z: &FeFunction) -> Result<f64> {
    z.check_bound_to(mesh)?;
    Ok(assembly::stiffness(mesh).quad_form(&z.coefficients).max(0.0).sqrt())
}

pub fn l2_norm(mesh: &SurfaceMesh, z: &FeFunction) -> Result<f64> {
    z.check_bound_to(mesh)?;
    Ok(assembly::consistent_mass(mesh).quad_form(&z.coefficients).max(0.0).sqrt())
}

pub fn lumped_norm(mesh: &SurfaceMesh, z: &FeFunction) -> Result<f64> {
    z.check_bound_to(mesh)?;
    let m = assembly::lumped_mass_diagonal(mesh);
    Ok(m.iter().zip(&z.coefficients).map(|(a, v)| a * v * v).sum::<f64>().sqrt())
}

/// Factorized bordered system `[[A, m], [mᵀ, 0]]` enforcing `mᵀ c = prescribed`.
#[derive(Debug, Clone)]
pub struct BorderedSolver {
    n: usize,
    lu: LuFactors,
}

impl BorderedSolver {
    pub fn new(matrix: &SparseSymMatrix, border: &[f64], adjacency: &[Vec<usize>]) -> Result<Self> {
        let n = matrix.dim();
        let mut triplets: Vec<(usize, usize, f64)> = matrix.entries().collect();
        for (i, &m) in border.iter().enumerate() {
            triplets.push((i, n, m));
            triplets.push((n, i, m));
        }
        let csc = CscMatrix::from_triplets(n + 1, &triplets);
        let mut order = nested_dissection(adjacency);
        order.push(n);
        let lu = LuFactors::factorize(&csc, &order, PIVOT_TOL)?;
        Ok(BorderedSolver { n, lu })
    }

    /// Returns `c` with `A c + λ m = rhs`, `mᵀ c = constraint`.
    pub fn solve(&self, rhs: &[f64], constraint: f64) -> Vec<f64> {
        let mut b = rhs.to_vec();
        b.push(constraint);
        let mut x = self.lu.solve(&b);
        x.truncate(self.n);
        x
    }
}

/// Per-quadrature-point data of a triangle lifted onto the exact surface
/// through the closest-point map.
struct LiftedPoint {
    bary: [f64; 3],
    y: Point3,
    /// tangent vectors ∂y/∂ξ₁, ∂y/∂ξ₂
    tangents: [Point3; 2],
    metric_inv: Matrix2<f64>,
    /// quadrature weight times surface measure
    weight: f64,
}

/// Parameter gradients of the barycentric basis, `∂λ_i/∂ξ`.
const BASIS_REF_GRAD: [[f64; 2]; 3] = [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]];

fn lifted_points(family: &SurfaceFamily, t: f64, p: &[Point3; 3]) -> Result<Vec<LiftedPoint>> {
    let e1 = p[1] - p[0];
    let e2 = p[2] - p[0];
    DUNAVANT4
        .iter()
        .map(|&(bary, w)| {
            let x = p[0] * bary[0] + p[1] * bary[1] + p[2] * bary[2];
            let y = family.closest_point(&x, t)?;
            let jac = family.closest_point_jacobian(&x, t)?;
            let tangents = [jac * e1, jac * e2];
            let g = Matrix2::new(
                tangents[0].dot(&tangents[0]),
                tangents[0].dot(&tangents[1]),
                tangents[1].dot(&tangents[0]),
                tangents[1].dot(&tangents[1]),
            );
            let det = g.determinant();
            let metric_inv = g
                .try_inverse()
                .ok_or_else(|| Error::Numeric("degenerate lifted triangle".into()))?;
            // reference triangle has area 1/2
            Ok(LiftedPoint { bary, y, tangents, metric_inv, weight: 0.5 * w * det.sqrt() })
        })
        .collect()
}

/// `∫_{Γ(t)} z`, by lifted quadrature over the mesh triangles.
pub fn lifted_integral(mesh: &SurfaceMesh, family: &SurfaceFamily, z: &dyn SmoothField) -> Result<f64> {
    let mut total = 0.0;
    for k in 0..mesh.triangle_count() {
        for q in lifted_points(family, mesh.time(), &mesh.triangle_points(k))? {
            total += q.weight * z.value(&q.y);
        }
    }
    Ok(total)
}

/// `(‖z − I_h^ℓ z_h‖_{L²(Γ)}, ‖∇_Γ(z − z_h^ℓ)‖_{L²(Γ)})` for the lift of the
/// discrete field `z_h`.
pub fn lifted_errors(
    mesh: &SurfaceMesh,
    family: &SurfaceFamily,
    zh: &FeFunction,
    z: &dyn SmoothField,
) -> Result<(f64, f64)> {
    zh.check_bound_to(mesh)?;
    let (mut l2, mut h1) = (0.0, 0.0);
    for (k, tri) in mesh.triangles().iter().enumerate() {
        let c = tri.map(|i| zh.coefficients[i]);
        let dzh = Vector2::new(
            (0..3).map(|i| c[i] * BASIS_REF_GRAD[i][0]).sum::<f64>(),
            (0..3).map(|i| c[i] * BASIS_REF_GRAD[i][1]).sum::<f64>(),
        );
        for q in lifted_points(family, mesh.time(), &mesh.triangle_points(k))? {
            let vh: f64 = (0..3).map(|i| q.bary[i] * c[i]).sum();
            let diff = z.value(&q.y) - vh;
            let gz = z.gradient(&q.y);
            let de = Vector2::new(gz.dot(&q.tangents[0]), gz.dot(&q.tangents[1])) - dzh;
            l2 += q.weight * diff * diff;
            h1 += q.weight * de.dot(&(q.metric_inv * de));
        }
    }
    Ok((l2.sqrt(), h1.sqrt()))
}

/// Ritz projection: `A c = b` with `b_i = ∫_Γ ∇_Γ z · ∇_Γ φ_i^ℓ`, subject
/// to `∫_{Γ_h} Π_h z = ∫_Γ z`.
pub fn ritz_projection(mesh: &SurfaceMesh, family: &SurfaceFamily, z: &dyn SmoothField) -> Result<FeFunction> {
    let t = mesh.time();
    let mut rhs = vec![0.0; mesh.vertex_count()];
    let mut mean = 0.0;
    for (k, tri) in mesh.triangles().iter().enumerate() {
        for q in lifted_points(family, t, &mesh.triangle_points(k))? {
            let gz = z.gradient(&q.y);
            let dz = Vector2::new(gz.dot(&q.tangents[0]), gz.dot(&q.tangents[1]));
            let flux = q.metric_inv * dz;
            for (a, &i) in tri.iter().enumerate() {
                let dl = Vector2::new(BASIS_REF_GRAD[a][0], BASIS_REF_GRAD[a][1]);
                rhs[i] += q.weight * flux.dot(&dl);
            }
            mean += q.weight * z.value(&q.y);
        }
    }
    let a = assembly::stiffness(mesh);
    let m = assembly::lumped_mass_diagonal(mesh);
    let solver = BorderedSolver::new(&a, &m, &mesh.vertex_adjacency())?;
    let c = solver.solve(&rhs, mean);
    if c.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("Ritz projection produced non-finite values".into()));
    }
    FeFunction::new(c, mesh)
}

/// Cached operators of one snapshot for the discrete inverse Laplacians
/// `Ḡ` (`A c = M̄ z`) and `G` (`A c = M z`), both with `∫ c = 0`.
#[derive(Debug, Clone)]
pub struct NegNormWorkspace {
    time: f64,
    stiffness: SparseSymMatrix,
    lumped: Vec<f64>,
    consistent: SparseSymMatrix,
    solver: BorderedSolver,
}

impl NegNormWorkspace {
    pub fn new(mesh: &SurfaceMesh) -> Result<Self> {
        let stiffness = assembly::stiffness(mesh);
        let lumped = assembly::lumped_mass_diagonal(mesh);
        let solver = BorderedSolver::new(&stiffness, &lumped, &mesh.vertex_adjacency())?;
        Ok(NegNormWorkspace {
            time: mesh.time(),
            stiffness,
            lumped,
            consistent: assembly::consistent_mass(mesh),
            solver,
        })
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn stiffness(&self) -> &SparseSymMatrix {
        &self.stiffness
    }

    pub fn lumped(&self) -> &[f64] {
        &self.lumped
    }

    fn check(&self, z: &FeFunction) -> Result<()> {
        if z.mesh_time != self.time || z.len() != self.lumped.len() {
            return Err(Error::Precondition(format!(
                "workspace bound to t = {}, field bound to t = {}",
                self.time, z.mesh_time
            )));
        }
        let mean: f64 = self.lumped.iter().zip(&z.coefficients).map(|(m, v)| m * v).sum();
        let scale: f64 = self.lumped.iter().zip(&z.coefficients).map(|(m, v)| m * v.abs()).sum();
        if mean.abs() > 1e-10 * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::Precondition(format!("field has nonzero mean {mean:e}")));
        }
        Ok(())
    }

    fn solve(&self, rhs: Vec<f64>) -> Result<FeFunction> {
        let c = self.solver.solve(&rhs, 0.0);
        if c.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("inverse Laplacian produced non-finite values".into()));
        }
        Ok(FeFunction { coefficients: c, mesh_time: self.time })
    }

    /// `Ḡ z`: `A c = M̄ z`, `Σ M̄_ii c_i = 0`.
    pub fn inv_laplacian_lumped(&self, z: &FeFunction) -> Result<FeFunction> {
        self.check(z)?;
        self.solve(self.lumped.iter().zip(&z.coefficients).map(|(m, v)| m * v).collect())
    }

    /// `G z`: `A c = M z`, `Σ M̄_ii c_i = 0`.
    pub fn inv_laplacian_consistent(&self, z: &FeFunction) -> Result<FeFunction> {
        self.check(z)?;
        self.solve(self.consistent.mul_vec(&z.coefficients))
    }

    /// `‖z‖_{−h} = √(cᵀ A c)` with `c = Ḡ z`.
    pub fn neg_norm_lumped(&self, z: &FeFunction) -> Result<f64> {
        let c = self.inv_laplacian_lumped(z)?;
        Ok(self.stiffness.quad_form(&c.coefficients).max(0.0).sqrt())
    }

    /// Same with the consistent mass, `c = G z`.
    pub fn neg_norm_consistent(&self, z: &FeFunction) -> Result<f64> {
        let c = self.inv_laplacian_consistent(z)?;
        Ok(self.stiffness.quad_form(&c.coefficients).max(0.0).sqrt())
    }

    /// `M̄⁻¹ A z`, the lumped discrete Laplacian (up to sign).
    pub fn discrete_laplacian(&self, z: &FeFunction) -> FeFunction {
        let az = self.stiffness.mul_vec(&z.coefficients);
        FeFunction {
            coefficients: az.iter().zip(&self.lumped).map(|(a, m)| a / m).collect(),
            mesh_time: self.time,
        }
    }
}

/// Uniform bucket grid over triangle bounding boxes.
struct TriangleGrid {
    origin: Point3,
    cell: f64,
    buckets: HashMap<[i64; 3], Vec<usize>>,
}

impl TriangleGrid {
    fn new(mesh: &SurfaceMesh, cell: f64) -> Self {
        let origin = mesh
            .vertices()
            .iter()
            .fold(Point3::repeat(f64::INFINITY), |m, v| m.inf(v));
        let mut grid = TriangleGrid { origin, cell, buckets: HashMap::new() };
        for k in 0..mesh.triangle_count() {
            let p = mesh.triangle_points(k);
            let lo = grid.key(&p[0].inf(&p[1]).inf(&p[2]));
            let hi = grid.key(&p[0].sup(&p[1]).sup(&p[2]));
            for i in lo[0]..=hi[0] {
                for j in lo[1]..=hi[1] {
                    for l in lo[2]..=hi[2] {
                        grid.buckets.entry([i, j, l]).or_default().push(k);
                    }
                }
            }
        }
        grid
    }

    fn key(&self, x: &Point3) -> [i64; 3] {
        let r = (x - self.origin) / self.cell;
        [r.x.floor() as i64, r.y.floor() as i64, r.z.floor() as i64]
    }

    /// Sorted candidate triangles whose boxes meet the cube `x ± radius`.
    fn candidates(&self, x: &Point3, radius: f64) -> Vec<usize> {
        let lo = self.key(&(x - Point3::repeat(radius)));
        let hi = self.key(&(x + Point3::repeat(radius)));
        let mut out = Vec::new();
        for i in lo[0]..=hi[0] {
            for j in lo[1]..=hi[1] {
                for l in lo[2]..=hi[2] {
                    if let Some(b) = self.buckets.get(&[i, j, l]) {
                        out.extend_from_slice(b);
                    }
                }
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }
}

/// Closest point of triangle `abc` to `x`, as barycentric coordinates.
pub fn closest_on_triangle(x: &Point3, p: &[Point3; 3]) -> [f64; 3] {
    let (a, b, c) = (p[0], p[1], p[2]);
    let ab = b - a;
    let ac = c - a;
    let ap = x - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return [1.0, 0.0, 0.0];
    }
    let bp = x - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return [0.0, 1.0, 0.0];
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return [1.0 - v, v, 0.0];
    }
    let cp = x - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return [0.0, 0.0, 1.0];
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return [1.0 - w, 0.0, w];
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return [0.0, 1.0 - w, w];
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    [1.0 - v - w, v, w]
}

/// Linear map taking coarse coefficients to fine ones: each row holds a fine
/// vertex's coarse triangle and barycentric weights.
#[derive(Debug, Clone)]
pub struct Prolongation {
    rows: Vec<([usize; 3], [f64; 3])>,
    coarse_len: usize,
    fine_time: f64,
}

impl Prolongation {
    /// Matches every fine vertex to the nearest coarse triangle (ties go to
    /// the lowest triangle index).
    pub fn new(coarse: &SurfaceMesh, fine: &SurfaceMesh) -> Result<Self> {
        if coarse.time() != fine.time() {
            return Err(Error::Precondition(format!(
                "coarse mesh at t = {}, fine mesh at t = {}",
                coarse.time(),
                fine.time()
            )));
        }
        if coarse.family() != fine.family() {
            return Err(Error::Precondition("meshes belong to different surface families".into()));
        }
        let h = coarse.h();
        let tol = 0.5 * h;
        let grid = TriangleGrid::new(coarse, h);
        let mut rows = Vec::with_capacity(fine.vertex_count());
        for (v, x) in fine.vertices().iter().enumerate() {
            let mut best: Option<(f64, usize, [f64; 3])> = None;
            for k in grid.candidates(x, tol) {
                let p = coarse.triangle_points(k);
                let bary = closest_on_triangle(x, &p);
                let q = p[0] * bary[0] + p[1] * bary[1] + p[2] * bary[2];
                let d = (x - q).norm();
                if best.is_none_or(|(bd, _, _)| d < bd) {
                    best = Some((d, k, bary));
                }
            }
            match best {
                Some((d, k, bary)) if d <= tol => rows.push((coarse.triangles()[k], bary)),
                _ => {
                    return Err(Error::Matching(format!(
                        "fine vertex {v} has no coarse triangle within {tol:e}"
                    )))
                }
            }
        }
        Ok(Prolongation { rows, coarse_len: coarse.vertex_count(), fine_time: fine.time() })
    }

    pub fn apply(&self, z: &FeFunction) -> Result<FeFunction> {
        if z.len() != self.coarse_len {
            return Err(Error::Precondition("field does not live on the coarse mesh".into()));
        }
        let coefficients = self
            .rows
            .iter()
            .map(|(tri, bary)| (0..3).map(|a| bary[a] * z.coefficients[tri[a]]).sum())
            .collect();
        Ok(FeFunction { coefficients, mesh_time: self.fine_time })
    }
}

/// Evaluates the coarse field at the fine vertices.
pub fn prolong(coarse: &SurfaceMesh, z: &FeFunction, fine: &SurfaceMesh) -> Result<FeFunction> {
    z.check_bound_to(coarse)?;
    Prolongation::new(coarse, fine)?.apply(z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{make_icosphere, make_torus_mesh};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn mean_zero_random(ws: &NegNormWorkspace, rng: &mut ChaCha8Rng) -> FeFunction {
        let n = ws.lumped().len();
        let mut z: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mean = ws.lumped().iter().zip(&z).map(|(m, v)| m * v).sum::<f64>()
            / ws.lumped().iter().sum::<f64>();
        z.iter_mut().for_each(|v| *v -= mean);
        FeFunction { coefficients: z, mesh_time: ws.time() }
    }

    #[test]
    fn interpolation_examples() {
        let ico = make_icosphere(2, SurfaceFamily::unit_sphere()).unwrap();
        let one = interpolate(&ico, |_| 1.0).unwrap();
        assert!(one.coefficients.iter().all(|&v| v == 1.0));
        let half_x = interpolate(&ico, |x| 0.5 * x.x).unwrap();
        let idx = ico
            .vertices()
            .iter()
            .position(|v| (v - Point3::new(1.0, 0.0, 0.0)).norm() < 1e-12);
        if let Some(i) = idx {
            assert_abs_diff_eq!(half_x.coefficients[i], 0.5, epsilon = 1e-15);
        }
        assert!(interpolate(&ico, |x| 1.0 / (x.x - x.x)).is_err());

        let torus = make_torus_mesh(64, 47, SurfaceFamily::ExpandingTorus).unwrap();
        let u0 = interpolate(&torus, |x| 0.9 * x.x * (PI * x.y / 2.0).cos()).unwrap();
        assert!(lumped_mean(&torus, &u0).unwrap().abs() < 1e-10);
    }

    #[test]
    fn norms_of_constants() {
        let ico = make_icosphere(2, SurfaceFamily::unit_sphere()).unwrap();
        let one = FeFunction::constant(1.0, &ico);
        assert!(h1_seminorm(&ico, &one).unwrap() < 1e-7);
        assert_abs_diff_eq!(l2_norm(&ico, &one).unwrap(), ico.area().sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(lumped_norm(&ico, &one).unwrap(), ico.area().sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn inverse_laplacian_properties() {
        let ico = make_icosphere(3, SurfaceFamily::unit_sphere()).unwrap();
        let ws = NegNormWorkspace::new(&ico).unwrap();
        let zero = FeFunction::constant(0.0, &ico);
        assert_eq!(ws.neg_norm_lumped(&zero).unwrap(), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..5 {
            let z = mean_zero_random(&ws, &mut rng);
            let w = mean_zero_random(&ws, &mut rng);
            let gz = ws.inv_laplacian_lumped(&z).unwrap();
            let gw = ws.inv_laplacian_lumped(&w).unwrap();
            // A c = M̄ z residual and mean constraint
            let ac = ws.stiffness().mul_vec(&gz.coefficients);
            let scale = z.max_abs() * ws.lumped().iter().cloned().fold(0.0, f64::max);
            for ((a, m), v) in ac.iter().zip(ws.lumped()).zip(&z.coefficients) {
                assert!((a - m * v).abs() < 1e-10 * scale);
            }
            let mean: f64 = ws.lumped().iter().zip(&gz.coefficients).map(|(m, v)| m * v).sum();
            assert!(mean.abs() < 1e-12);
            // self-adjointness in the lumped inner product
            let lhs: f64 = (0..z.len()).map(|i| ws.lumped()[i] * gz.coefficients[i] * w.coefficients[i]).sum();
            let rhs: f64 = (0..z.len()).map(|i| ws.lumped()[i] * z.coefficients[i] * gw.coefficients[i]).sum();
            assert!((lhs - rhs).abs() < 1e-10 * lhs.abs().max(1.0));
            // round trip
            let back = ws.discrete_laplacian(&gz);
            for (b, v) in back.coefficients.iter().zip(&z.coefficients) {
                assert!((b - v).abs() < 1e-9);
            }
            // linearity of the norm
            let two_z = FeFunction {
                coefficients: z.coefficients.iter().map(|v| 2.0 * v).collect(),
                mesh_time: z.mesh_time,
            };
            let (n1, n2) = (ws.neg_norm_lumped(&z).unwrap(), ws.neg_norm_lumped(&two_z).unwrap());
            assert!((n2 - 2.0 * n1).abs() < 1e-12 * n2);
            assert!(ws.neg_norm_consistent(&z).unwrap() > 0.0);
        }
        let bad = FeFunction::constant(1.0, &ico);
        assert!(matches!(ws.inv_laplacian_lumped(&bad), Err(Error::Precondition(_))));
    }

    #[test]
    fn ritz_of_constant_matches_area_ratio() {
        let family = SurfaceFamily::unit_sphere();
        let ico = make_icosphere(3, family).unwrap();
        let field = FnField(|_: &Point3| 2.0, |_: &Point3| Point3::zeros());
        let c = ritz_projection(&ico, &family, &field).unwrap();
        let lifted = lifted_integral(&ico, &family, &field).unwrap();
        assert!((lifted - 8.0 * PI).abs() < 1e-7);
        let expect = lifted / ico.area();
        for v in &c.coefficients {
            assert!((v - expect).abs() < 1e-9, "{v} vs {expect}");
        }
    }

    #[test]
    fn ritz_mean_constraint_holds() {
        let family = SurfaceFamily::ExpandingTorus;
        let torus = make_torus_mesh(24, 12, family).unwrap();
        let field = FnField(|x: &Point3| x.x * x.y + 0.3, |x: &Point3| Point3::new(x.y, x.x, 0.0));
        let r = ritz_projection(&torus, &family, &field).unwrap();
        let discrete: f64 = assembly::lumped_mass_diagonal(&torus)
            .iter()
            .zip(&r.coefficients)
            .map(|(m, v)| m * v)
            .sum();
        let exact = lifted_integral(&torus, &family, &field).unwrap();
        assert!((discrete - exact).abs() < 1e-9);
        // the exact integral of x y + 0.3 over the torus is 0.3 · area
        assert!((exact - 0.3 * family.area(0.0)).abs() < 1e-3);
    }

    #[test]
    fn prolongation_examples() {
        let family = SurfaceFamily::unit_sphere();
        let coarse = make_icosphere(2, family).unwrap();
        let fine = make_icosphere(4, family).unwrap();
        let z = interpolate(&coarse, |x| x.x).unwrap();
        let same = prolong(&coarse, &z, &coarse).unwrap();
        for (a, b) in same.coefficients.iter().zip(&z.coefficients) {
            assert!((a - b).abs() < 1e-12);
        }
        let one = prolong(&coarse, &FeFunction::constant(1.0, &coarse), &fine).unwrap();
        assert!(one.coefficients.iter().all(|v| (v - 1.0).abs() < 1e-14));
        let pz = prolong(&coarse, &z, &fine).unwrap();
        let iz = interpolate(&fine, |x| x.x).unwrap();
        let gap = pz.coefficients.iter().zip(&iz.coefficients).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let h = coarse.h();
        assert!(gap <= h * h, "gap {gap} vs h² {}", h * h);

        let moved = crate::mesh::advect_mesh(&fine, family, 0.1).unwrap();
        assert!(prolong(&coarse, &z, &moved).is_err());
    }
}
