//! Piecewise-linear finite element matrices on a mesh snapshot.
//!
//! All element kernels are evaluated in each triangle's own plane. The
//! stiffness kernel `|K| ∇λ_iᵀ∇λ_j` is the cotangent formula written with
//! edge vectors: with `e_i` the edge opposite vertex `i`,
//! `∇λ_i · ∇λ_j = e_i · e_j / (4|K|²)`.

use crate::error::{Error, Result};
use crate::geometry::Point3;
use crate::mesh::SurfaceMesh;
use crate::sparse::SparseSymMatrix;

/// Nodal coefficient vector of a piecewise-linear field on one snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct FeFunction {
    pub coefficients: Vec<f64>,
    pub mesh_time: f64,
}

impl FeFunction {
    pub fn new(coefficients: Vec<f64>, mesh: &SurfaceMesh) -> Result<Self> {
        if coefficients.len() != mesh.vertex_count() {
            return Err(Error::Input(format!(
                "{} coefficients for a mesh with {} vertices",
                coefficients.len(),
                mesh.vertex_count()
            )));
        }
        Ok(FeFunction { coefficients, mesh_time: mesh.time() })
    }

    pub fn constant(value: f64, mesh: &SurfaceMesh) -> Self {
        FeFunction { coefficients: vec![value; mesh.vertex_count()], mesh_time: mesh.time() }
    }

    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    pub fn max_abs(&self) -> f64 {
        self.coefficients.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Checks that this field lives on `mesh`.
    pub fn check_bound_to(&self, mesh: &SurfaceMesh) -> Result<()> {
        if self.len() != mesh.vertex_count() || self.mesh_time != mesh.time() {
            return Err(Error::Precondition(format!(
                "field bound to a mesh at t = {} with {} nodes, used on t = {} with {} nodes",
                self.mesh_time,
                self.len(),
                mesh.time(),
                mesh.vertex_count()
            )));
        }
        Ok(())
    }
}

/// In-plane gradients of the three barycentric basis functions and the area.
pub fn basis_gradients(p: &[Point3; 3]) -> ([Point3; 3], f64) {
    let normal = (p[1] - p[0]).cross(&(p[2] - p[0]));
    let double_area = normal.norm();
    let unit = normal / double_area;
    let mut grads = [Point3::zeros(); 3];
    for (i, g) in grads.iter_mut().enumerate() {
        let edge = p[(i + 2) % 3] - p[(i + 1) % 3];
        *g = unit.cross(&edge) / double_area;
    }
    (grads, 0.5 * double_area)
}

/// Element stiffness kernel `|K| ∇λ_i · ∇λ_j`.
pub fn element_stiffness(p: &[Point3; 3]) -> [[f64; 3]; 3] {
    let edges = [p[2] - p[1], p[0] - p[2], p[1] - p[0]];
    let area = 0.5 * edges[2].cross(&(-edges[1])).norm();
    let mut k = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            k[i][j] = edges[i].dot(&edges[j]) / (4.0 * area);
        }
    }
    k
}

/// Diagonal of the lumped mass matrix: a third of the area of the
/// triangles around each vertex.
pub fn lumped_mass_diagonal(mesh: &SurfaceMesh) -> Vec<f64> {
    let mut diag = vec![0.0; mesh.vertex_count()];
    for (k, t) in mesh.triangles().iter().enumerate() {
        let third = mesh.triangle_area(k) / 3.0;
        for &i in t {
            diag[i] += third;
        }
    }
    diag
}

pub fn lumped_mass(mesh: &SurfaceMesh) -> SparseSymMatrix {
    SparseSymMatrix::from_diagonal(&lumped_mass_diagonal(mesh))
}

pub fn consistent_mass(mesh: &SurfaceMesh) -> SparseSymMatrix {
    let mut triplets = Vec::with_capacity(9 * mesh.triangle_count());
    for (k, t) in mesh.triangles().iter().enumerate() {
        let area = mesh.triangle_area(k);
        for a in 0..3 {
            for b in 0..3 {
                let v = if a == b { area / 6.0 } else { area / 12.0 };
                triplets.push((t[a], t[b], v));
            }
        }
    }
    SparseSymMatrix::from_triplets(mesh.vertex_count(), &triplets)
}

pub fn stiffness(mesh: &SurfaceMesh) -> SparseSymMatrix {
    let mut triplets = Vec::with_capacity(9 * mesh.triangle_count());
    for (k, t) in mesh.triangles().iter().enumerate() {
        let local = element_stiffness(&mesh.triangle_points(k));
        for a in 0..3 {
            for b in 0..3 {
                triplets.push((t[a], t[b], local[a][b]));
            }
        }
    }
    SparseSymMatrix::from_triplets(mesh.vertex_count(), &triplets)
}

/// Lumped mass diagonal and stiffness matrix of one snapshot.
#[derive(Debug, Clone)]
pub struct SnapshotMatrices {
    pub time: f64,
    pub lumped: Vec<f64>,
    pub stiffness: SparseSymMatrix,
}

impl SnapshotMatrices {
    pub fn assemble(mesh: &SurfaceMesh) -> Self {
        SnapshotMatrices {
            time: mesh.time(),
            lumped: lumped_mass_diagonal(mesh),
            stiffness: stiffness(mesh),
        }
    }

    pub fn dim(&self) -> usize {
        self.lumped.len()
    }

    /// `Σ_i M̄_ii z_i`, the integral of `z` over the discrete surface.
    pub fn integral(&self, z: &[f64]) -> f64 {
        self.lumped.iter().zip(z).map(|(m, v)| m * v).sum()
    }

    pub fn area(&self) -> f64 {
        self.lumped.iter().sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::SurfaceFamily;
    use crate::mesh::make_icosphere;
    use approx::assert_abs_diff_eq;
    use nalgebra::SymmetricEigen;

    fn unit_triangle() -> SurfaceMesh {
        SurfaceMesh::from_raw(
            vec![Point3::new(0.0, 0.0, 0.0), Point3::new(1.0, 0.0, 0.0), Point3::new(0.0, 1.0, 0.0)],
            vec![[0, 1, 2]],
        )
        .unwrap()
    }

    #[test]
    fn single_triangle_kernels() {
        let m = unit_triangle();
        for v in lumped_mass_diagonal(&m) {
            assert_abs_diff_eq!(v, 1.0 / 6.0, epsilon = 1e-16);
        }
        let c = consistent_mass(&m);
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 1.0 / 12.0 } else { 1.0 / 24.0 };
                assert_abs_diff_eq!(c.get(i, j), expect, epsilon = 1e-16);
            }
        }
        let a = stiffness(&m);
        let expect = [[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]];
        for i in 0..3 {
            for j in 0..3 {
                assert_abs_diff_eq!(a.get(i, j), expect[i][j], epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn gradient_kernel_matches_edge_formula() {
        let p = [Point3::new(0.1, 0.2, 0.3), Point3::new(1.1, -0.2, 0.5), Point3::new(0.4, 0.9, -0.3)];
        let (g, area) = basis_gradients(&p);
        let k = element_stiffness(&p);
        for i in 0..3 {
            for j in 0..3 {
                assert_abs_diff_eq!(area * g[i].dot(&g[j]), k[i][j], epsilon = 1e-13);
            }
        }
        // gradients of a partition of unity sum to zero and reproduce linears
        assert!((g[0] + g[1] + g[2]).norm() < 1e-14);
        assert_abs_diff_eq!(g[1].dot(&(p[1] - p[0])), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn icosphere_matrix_properties() {
        let mesh = make_icosphere(3, SurfaceFamily::unit_sphere()).unwrap();
        let lumped = lumped_mass_diagonal(&mesh);
        let area = mesh.area();
        assert!(((lumped.iter().sum::<f64>() - area) / area).abs() < 1e-12);
        assert!(lumped.iter().all(|&v| v > 0.0));

        let c = consistent_mass(&mesh);
        for (row, l) in c.row_sums().iter().zip(&lumped) {
            assert_abs_diff_eq!(*row, *l, epsilon = 1e-15);
        }
        let a = stiffness(&mesh);
        assert_eq!(a.asymmetry(), 0.0);
        assert_eq!(c.asymmetry(), 0.0);
        let ones = vec![1.0; mesh.vertex_count()];
        let scale = a.diagonal().iter().cloned().fold(0.0, f64::max);
        for v in a.mul_vec(&ones) {
            assert!(v.abs() < 1e-12 * scale);
        }
        // acute mesh: nonpositive off-diagonals
        for (i, j, v) in a.entries() {
            if i != j {
                assert!(v <= 1e-14, "a[{i},{j}] = {v}");
            }
        }
    }

    #[test]
    fn dense_spectra_on_level2() {
        let mesh = make_icosphere(2, SurfaceFamily::unit_sphere()).unwrap();
        assert_eq!(mesh.vertex_count(), 162);
        let mass = SymmetricEigen::new(consistent_mass(&mesh).to_dense()).eigenvalues;
        assert!(mass.min() > 0.0);
        let stiff = SymmetricEigen::new(stiffness(&mesh).to_dense()).eigenvalues;
        let mut ev: Vec<f64> = stiff.iter().cloned().collect();
        ev.sort_by(f64::total_cmp);
        assert!(ev[0].abs() < 1e-12);
        assert!(ev[1] > 1e-3, "second eigenvalue {}", ev[1]);
    }
}
