//! Triangulated surfaces: generators, node advection and quality measures.

use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::{Point3, SurfaceFamily};

pub type Triangle = [usize; 3];

/// Finest icosphere level accepted by [`make_icosphere`].
pub const MAX_ICOSPHERE_LEVEL: u32 = 8;

/// Relative floor on triangle areas, in units of `h²`.
const DEGENERATE_AREA: f64 = 1e-14;

/// Snapshot of a triangulated surface at one time.
///
/// The reference (`t = 0`) node positions and the connectivity are shared
/// between all snapshots advected from the same initial mesh.
#[derive(Debug, Clone)]
pub struct SurfaceMesh {
    reference: Arc<Vec<Point3>>,
    triangles: Arc<Vec<Triangle>>,
    vertices: Vec<Point3>,
    time: f64,
    family: Option<SurfaceFamily>,
}

impl SurfaceMesh {
    /// Wraps raw data that is not tied to any surface family (test patches,
    /// imported geometry). Such meshes cannot be advected.
    pub fn from_raw(vertices: Vec<Point3>, triangles: Vec<Triangle>) -> Result<Self> {
        let n = vertices.len();
        if let Some(t) = triangles.iter().find(|t| t.iter().any(|&i| i >= n)) {
            return Err(Error::Input(format!("triangle {t:?} references a missing vertex")));
        }
        let mesh = SurfaceMesh {
            reference: Arc::new(vertices.clone()),
            triangles: Arc::new(triangles),
            vertices,
            time: 0.0,
            family: None,
        };
        mesh.check_degenerate()?;
        Ok(mesh)
    }

    fn from_family(vertices: Vec<Point3>, triangles: Vec<Triangle>, family: SurfaceFamily) -> Result<Self> {
        let mesh = SurfaceMesh {
            reference: Arc::new(vertices.clone()),
            triangles: Arc::new(triangles),
            vertices,
            time: 0.0,
            family: Some(family),
        };
        mesh.check_degenerate()?;
        Ok(mesh)
    }

    pub fn vertices(&self) -> &[Point3] {
        &self.vertices
    }

    pub fn reference_vertices(&self) -> &[Point3] {
        &self.reference
    }

    pub fn triangles(&self) -> &[Triangle] {
        &self.triangles
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn family(&self) -> Option<SurfaceFamily> {
        self.family
    }

    /// True when `other` was advected from the same initial mesh.
    pub fn shares_connectivity(&self, other: &SurfaceMesh) -> bool {
        Arc::ptr_eq(&self.triangles, &other.triangles)
    }

    pub fn triangle_points(&self, k: usize) -> [Point3; 3] {
        let [a, b, c] = self.triangles[k];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn triangle_area(&self, k: usize) -> f64 {
        let [a, b, c] = self.triangle_points(k);
        0.5 * (b - a).cross(&(c - a)).norm()
    }

    pub fn area(&self) -> f64 {
        (0..self.triangle_count()).map(|k| self.triangle_area(k)).sum()
    }

    /// Largest triangle diameter (longest edge).
    pub fn h(&self) -> f64 {
        (0..self.triangle_count())
            .map(|k| {
                let [a, b, c] = self.triangle_points(k);
                (b - a).norm().max((c - b).norm()).max((a - c).norm())
            })
            .fold(0.0, f64::max)
    }

    /// Undirected edges with the number of incident triangles.
    pub fn edge_counts(&self) -> HashMap<(usize, usize), usize> {
        let mut edges = HashMap::new();
        for t in self.triangles.iter() {
            for e in 0..3 {
                let (a, b) = (t[e], t[(e + 1) % 3]);
                *edges.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        edges
    }

    pub fn euler_characteristic(&self) -> i64 {
        let edges = self.edge_counts().len() as i64;
        self.vertex_count() as i64 - edges + self.triangle_count() as i64
    }

    /// Checks that every edge is shared by exactly two triangles and that
    /// neighbouring triangles traverse their common edge in opposite directions.
    pub fn check_closed_manifold(&self) -> Result<()> {
        let mut directed: HashMap<(usize, usize), usize> = HashMap::new();
        for t in self.triangles.iter() {
            for e in 0..3 {
                *directed.entry((t[e], t[(e + 1) % 3])).or_insert(0) += 1;
            }
        }
        for (&(a, b), &count) in &directed {
            if count != 1 {
                return Err(Error::Input(format!("edge ({a}, {b}) is traversed {count} times")));
            }
            if !directed.contains_key(&(b, a)) {
                return Err(Error::Input(format!("edge ({a}, {b}) is a boundary edge")));
            }
        }
        Ok(())
    }

    fn check_degenerate(&self) -> Result<()> {
        let h = self.h();
        let floor = DEGENERATE_AREA * h * h;
        for k in 0..self.triangle_count() {
            let area = self.triangle_area(k);
            if !(area > floor) {
                return Err(Error::Input(format!("triangle {k} is degenerate (area {area:e})")));
            }
        }
        Ok(())
    }

    /// Vertex-to-vertex adjacency lists (sorted, without self loops).
    pub fn vertex_adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.vertex_count()];
        for t in self.triangles.iter() {
            for e in 0..3 {
                let (a, b) = (t[e], t[(e + 1) % 3]);
                adj[a].push(b);
                adj[b].push(a);
            }
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        adj
    }

    /// Largest |level set| over the vertices.
    pub fn max_level_set_violation(&self) -> Option<f64> {
        let family = self.family?;
        Some(
            self.vertices
                .iter()
                .map(|x| family.level_set(x, self.time).abs())
                .fold(0.0, f64::max),
        )
    }
}

/// Icosahedron refined `level` times by edge bisection, with every vertex
/// projected onto `Γ(0)` of a sphere family.
pub fn make_icosphere(level: u32, family: SurfaceFamily) -> Result<SurfaceMesh> {
    if level > MAX_ICOSPHERE_LEVEL {
        return Err(Error::Input(format!("icosphere level {level} exceeds {MAX_ICOSPHERE_LEVEL}")));
    }
    if !family.is_sphere() {
        return Err(Error::Input(format!("icosphere requested for {family}")));
    }
    let g = (1.0 + 5f64.sqrt()) / 2.0;
    let mut vertices: Vec<Point3> = [
        (-1.0, g, 0.0),
        (1.0, g, 0.0),
        (-1.0, -g, 0.0),
        (1.0, -g, 0.0),
        (0.0, -1.0, g),
        (0.0, 1.0, g),
        (0.0, -1.0, -g),
        (0.0, 1.0, -g),
        (g, 0.0, -1.0),
        (g, 0.0, 1.0),
        (-g, 0.0, -1.0),
        (-g, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Point3::new(x, y, z).normalize())
    .collect();
    let mut triangles: Vec<Triangle> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for t in &mut triangles {
        let [a, b, c] = t.map(|i| vertices[i]);
        if (b - a).cross(&(c - a)).dot(&(a + b + c)) < 0.0 {
            t.swap(1, 2);
        }
    }

    for _ in 0..level {
        let mut midpoints: HashMap<(usize, usize), usize> = HashMap::new();
        let mut refined = Vec::with_capacity(triangles.len() * 4);
        let mut midpoint = |a: usize, b: usize, vertices: &mut Vec<Point3>| -> usize {
            *midpoints.entry((a.min(b), a.max(b))).or_insert_with(|| {
                vertices.push(((vertices[a] + vertices[b]) * 0.5).normalize());
                vertices.len() - 1
            })
        };
        for &[a, b, c] in &triangles {
            let ab = midpoint(a, b, &mut vertices);
            let bc = midpoint(b, c, &mut vertices);
            let ca = midpoint(c, a, &mut vertices);
            refined.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        triangles = refined;
    }

    let vertices = vertices
        .iter()
        .map(|x| family.closest_point(x, 0.0))
        .collect::<Result<Vec<_>>>()?;
    SurfaceMesh::from_family(vertices, triangles, family)
}

/// Structured `(θ, φ)` grid on the reference torus (`R = 0.75`, `r = 0.25`);
/// each grid cell is split along alternating diagonals.
///
/// For `n_theta` divisible by 4 the mesh is mirror symmetric under `x ↦ −x`
/// and `y ↦ −y`.
pub fn make_torus_mesh(n_theta: usize, n_phi: usize, family: SurfaceFamily) -> Result<SurfaceMesh> {
    if n_theta < 8 || n_phi < 8 {
        return Err(Error::Input(format!(
            "torus grid {n_theta}x{n_phi} is too coarse (need at least 8x8)"
        )));
    }
    torus_grid(n_theta, n_phi, family)
}

pub(crate) fn torus_grid(n_theta: usize, n_phi: usize, family: SurfaceFamily) -> Result<SurfaceMesh> {
    if !family.is_torus() {
        return Err(Error::Input(format!("torus mesh requested for {family}")));
    }
    if n_theta < 3 || n_phi < 3 {
        return Err(Error::Input("torus grid needs at least 3x3 cells".into()));
    }
    let (big, small) = (0.75, 0.25);
    let mut vertices = Vec::with_capacity(n_theta * n_phi);
    for i in 0..n_theta {
        let theta = 2.0 * PI * i as f64 / n_theta as f64;
        for j in 0..n_phi {
            let phi = 2.0 * PI * j as f64 / n_phi as f64;
            let rho = big + small * phi.cos();
            vertices.push(Point3::new(rho * theta.cos(), rho * theta.sin(), small * phi.sin()));
        }
    }
    let index = |i: usize, j: usize| (i % n_theta) * n_phi + (j % n_phi);
    let mut triangles = Vec::with_capacity(2 * n_theta * n_phi);
    for i in 0..n_theta {
        for j in 0..n_phi {
            let (a, b, c, d) = (index(i, j), index(i + 1, j), index(i + 1, j + 1), index(i, j + 1));
            // (θ, φ) order is outward for this parametrization
            if (i + j) % 2 == 0 {
                triangles.push([a, b, c]);
                triangles.push([a, c, d]);
            } else {
                triangles.push([a, b, d]);
                triangles.push([b, c, d]);
            }
        }
    }
    SurfaceMesh::from_family(vertices, triangles, family)
}

/// Moves every node along the flow map of `family` to time `t_new`.
/// Connectivity and orientation are shared with the input.
pub fn advect_mesh(mesh: &SurfaceMesh, family: SurfaceFamily, t_new: f64) -> Result<SurfaceMesh> {
    if mesh.family != Some(family) {
        return Err(Error::Precondition(format!(
            "mesh belongs to {:?}, not {family}",
            mesh.family.map(|f| f.tag())
        )));
    }
    family.check_time(t_new)?;
    let vertices = mesh
        .reference
        .iter()
        .map(|x0| family.flow_map(x0, t_new))
        .collect::<Result<Vec<_>>>()?;
    Ok(SurfaceMesh {
        reference: Arc::clone(&mesh.reference),
        triangles: Arc::clone(&mesh.triangles),
        vertices,
        time: t_new,
        family: Some(family),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshQuality {
    /// Largest triangle diameter.
    pub h: f64,
    /// Smallest inscribed-circle diameter.
    pub rho_min: f64,
    pub min_angle: f64,
    pub max_angle: f64,
    pub is_acute: bool,
    pub triangles_scanned: usize,
}

impl MeshQuality {
    /// Measured quasi-uniformity constant `rho_min / h`.
    pub fn rho_ratio(&self) -> f64 {
        self.rho_min / self.h
    }
}

/// Interior angles of a triangle, computed from its 3d edge vectors.
pub fn triangle_angles(p: &[Point3; 3]) -> [f64; 3] {
    let mut angles = [0.0; 3];
    for (i, angle) in angles.iter_mut().enumerate() {
        let u = p[(i + 1) % 3] - p[i];
        let v = p[(i + 2) % 3] - p[i];
        *angle = u.cross(&v).norm().atan2(u.dot(&v));
    }
    angles
}

pub fn quality(mesh: &SurfaceMesh) -> MeshQuality {
    let mut q = MeshQuality {
        h: 0.0,
        rho_min: f64::INFINITY,
        min_angle: f64::INFINITY,
        max_angle: 0.0,
        is_acute: true,
        triangles_scanned: mesh.triangle_count(),
    };
    for k in 0..mesh.triangle_count() {
        let p = mesh.triangle_points(k);
        let edges = [(p[1] - p[0]).norm(), (p[2] - p[1]).norm(), (p[0] - p[2]).norm()];
        let perimeter: f64 = edges.iter().sum();
        q.h = q.h.max(edges.iter().cloned().fold(0.0, f64::max));
        q.rho_min = q.rho_min.min(4.0 * mesh.triangle_area(k) / perimeter);
        for a in triangle_angles(&p) {
            q.min_angle = q.min_angle.min(a);
            q.max_angle = q.max_angle.max(a);
        }
    }
    q.is_acute = q.max_angle <= FRAC_PI_2 + 1e-12;
    q
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn icosphere_counts() {
        let ico = make_icosphere(0, SurfaceFamily::unit_sphere()).unwrap();
        assert_eq!((ico.vertex_count(), ico.triangle_count()), (12, 20));
        for level in 1..=4 {
            let m = make_icosphere(level, SurfaceFamily::unit_sphere()).unwrap();
            assert_eq!(m.triangle_count(), 20 * 4usize.pow(level));
            assert_eq!(m.vertex_count(), 10 * 4usize.pow(level) + 2);
            assert_eq!(m.euler_characteristic(), 2);
            m.check_closed_manifold().unwrap();
        }
        assert!(make_icosphere(9, SurfaceFamily::unit_sphere()).is_err());
        assert!(make_icosphere(1, SurfaceFamily::ExpandingTorus).is_err());
    }

    #[test]
    fn icosphere_is_outward_oriented_and_on_surface() {
        let m = make_icosphere(2, SurfaceFamily::ExpandingSphere).unwrap();
        for k in 0..m.triangle_count() {
            let [a, b, c] = m.triangle_points(k);
            assert!((b - a).cross(&(c - a)).dot(&(a + b + c)) > 0.0);
        }
        assert!(m.max_level_set_violation().unwrap() < 1e-10);
    }

    #[test]
    fn icosphere_area_converges_quadratically() {
        let errors: Vec<(f64, f64)> = (2..=5)
            .map(|l| {
                let m = make_icosphere(l, SurfaceFamily::unit_sphere()).unwrap();
                (m.h(), (4.0 * PI - m.area()).abs())
            })
            .collect();
        assert!(errors[2].1 / (4.0 * PI) < 0.01);
        for w in errors.windows(2) {
            let order = (w[0].1 / w[1].1).ln() / (w[0].0 / w[1].0).ln();
            assert!(order > 1.8, "area order {order}");
        }
    }

    #[test]
    fn icosphere_h_halves_under_refinement() {
        let hs: Vec<f64> = (1..=5)
            .map(|l| make_icosphere(l, SurfaceFamily::unit_sphere()).unwrap().h())
            .collect();
        for w in hs.windows(2) {
            let ratio = w[1] / w[0];
            assert!((ratio - 0.5).abs() < 0.05, "h ratio {ratio}");
        }
    }

    #[test]
    fn torus_counts_and_topology() {
        let small = torus_grid(4, 4, SurfaceFamily::ExpandingTorus).unwrap();
        assert_eq!((small.vertex_count(), small.triangle_count()), (16, 32));
        assert_eq!(small.euler_characteristic(), 0);
        for (nt, np) in [(47, 64), (64, 47)] {
            let m = make_torus_mesh(nt, np, SurfaceFamily::ExpandingTorus).unwrap();
            assert_eq!(m.triangle_count(), 6016);
            assert_eq!(m.euler_characteristic(), 0);
            m.check_closed_manifold().unwrap();
        }
        assert!(make_torus_mesh(4, 4, SurfaceFamily::ExpandingTorus).is_err());
    }

    #[test]
    fn torus_is_outward_oriented() {
        let family = SurfaceFamily::ExpandingTorus;
        let m = make_torus_mesh(12, 8, family).unwrap();
        for k in 0..m.triangle_count() {
            let [a, b, c] = m.triangle_points(k);
            let centroid = (a + b + c) / 3.0;
            let n = family.normal(&centroid, 0.0).unwrap();
            assert!((b - a).cross(&(c - a)).dot(&n) > 0.0);
        }
    }

    #[test]
    fn advection_examples() {
        let family = SurfaceFamily::ExpandingSphere;
        let m = make_icosphere(3, family).unwrap();
        let same = advect_mesh(&m, family, 0.0).unwrap();
        assert_eq!(same.vertices(), m.vertices());
        let big = advect_mesh(&m, family, 4f64.ln()).unwrap();
        assert!(big.shares_connectivity(&m));
        for x in big.vertices() {
            assert_abs_diff_eq!(x.norm(), 2.0, epsilon = 1e-12);
        }
        assert!(advect_mesh(&m, SurfaceFamily::unit_sphere(), 0.1).is_err());

        let torus = make_torus_mesh(16, 8, SurfaceFamily::ExpandingTorus).unwrap();
        let mut last = torus.area();
        for t in [0.1, 0.2, 0.4, 0.6] {
            let a = advect_mesh(&torus, SurfaceFamily::ExpandingTorus, t).unwrap().area();
            assert!(a > last);
            last = a;
        }
    }

    #[test]
    fn quality_of_simple_triangles() {
        let eq = SurfaceMesh::from_raw(
            vec![
                Point3::new(0.0, 0.0, 0.0),
                Point3::new(1.0, 0.0, 0.0),
                Point3::new(0.5, 3f64.sqrt() / 2.0, 0.0),
            ],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let q = quality(&eq);
        assert_abs_diff_eq!(q.min_angle, PI / 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(q.max_angle, PI / 3.0, epsilon = 1e-14);
        assert!(q.is_acute);

        let right = SurfaceMesh::from_raw(
            vec![Point3::new(0.0, 0.0, 0.0), Point3::new(1.0, 0.0, 0.0), Point3::new(0.0, 1.0, 0.0)],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let q = quality(&right);
        assert_abs_diff_eq!(q.max_angle, FRAC_PI_2, epsilon = 1e-15);
        assert!(q.is_acute);
    }

    #[test]
    fn icosphere_level3_is_acute() {
        let m = make_icosphere(3, SurfaceFamily::unit_sphere()).unwrap();
        let q = quality(&m);
        assert_eq!(q.triangles_scanned, 1280);
        assert!(q.is_acute, "max angle {}", q.max_angle);
        assert!(q.h > 0.0 && q.rho_ratio() > 0.0);
    }

    #[test]
    fn degenerate_triangles_rejected() {
        let r = SurfaceMesh::from_raw(
            vec![Point3::new(0.0, 0.0, 0.0), Point3::new(1.0, 0.0, 0.0), Point3::new(2.0, 0.0, 0.0)],
            vec![[0, 1, 2]],
        );
        assert!(r.is_err());
    }
}
