//! Per-step observables and convergence-order arithmetic.

use crate::assembly::{self, FeFunction, SnapshotMatrices};
use crate::error::{Error, Result};
use crate::geometry::SurfaceFamily;
use crate::mesh::{self, SurfaceMesh};
use crate::potential::{big_f_total, PotentialParams};

/// One row of the trace.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsRecord {
    pub step: usize,
    pub time: f64,
    pub mass: f64,
    pub energy: f64,
    pub max_abs_u: f64,
    pub min_gap: f64,
    pub newton_iters: usize,
    pub mesh_is_acute: bool,
    pub min_div_v: f64,
}

impl DiagnosticsRecord {
    pub const CSV_HEADER: &'static str =
        "step,time,mass,energy,max_abs_u,min_gap,newton_iters,mesh_is_acute,min_div_v";

    /// CSV row with shortest round-trip float formatting.
    pub fn csv_row(&self) -> String {
        format!(
            "{},{:?},{:?},{:?},{:?},{:?},{},{},{:?}",
            self.step,
            self.time,
            self.mass,
            self.energy,
            self.max_abs_u,
            self.min_gap,
            self.newton_iters,
            self.mesh_is_acute,
            self.min_div_v
        )
    }

    /// Builds the record of one accepted state.
    pub fn measure(
        step: usize,
        mesh: &SurfaceMesh,
        matrices: &SnapshotMatrices,
        u: &FeFunction,
        potential: &PotentialParams,
        family: &SurfaceFamily,
        newton_iters: usize,
    ) -> Result<Self> {
        let max_abs_u = u.max_abs();
        Ok(DiagnosticsRecord {
            step,
            time: mesh.time(),
            mass: matrices.integral(&u.coefficients),
            energy: energy_with(matrices, u, potential)?,
            max_abs_u,
            min_gap: 1.0 - max_abs_u,
            newton_iters,
            mesh_is_acute: mesh::quality(mesh).is_acute,
            min_div_v: min_of(&discrete_div_velocity(mesh, family)?),
        })
    }
}

fn energy_with(matrices: &SnapshotMatrices, u: &FeFunction, params: &PotentialParams) -> Result<f64> {
    let eps = params.epsilon;
    let mut bulk = 0.0;
    for (m, &v) in matrices.lumped.iter().zip(&u.coefficients) {
        bulk += m * big_f_total(v, params)?;
    }
    Ok(0.5 * eps * matrices.stiffness.quad_form(&u.coefficients) + bulk / eps)
}

/// Discrete Ginzburg–Landau energy `(ε/2) UᵀAU + (1/ε) Σ_i M̄_ii F(U_i)`.
pub fn gl_energy(mesh: &SurfaceMesh, u: &FeFunction, params: &PotentialParams) -> Result<f64> {
    u.check_bound_to(mesh)?;
    energy_with(&SnapshotMatrices::assemble(mesh), u, params)
}

/// Elementwise tangential divergence of the nodal interpolant of the
/// surface velocity at the mesh time.
pub fn discrete_div_velocity(mesh: &SurfaceMesh, family: &SurfaceFamily) -> Result<Vec<f64>> {
    let t = mesh.time();
    let v = mesh
        .vertices()
        .iter()
        .map(|x| family.velocity(x, t))
        .collect::<Result<Vec<_>>>()?;
    Ok(mesh
        .triangles()
        .iter()
        .enumerate()
        .map(|(k, tri)| {
            let (grads, _) = assembly::basis_gradients(&mesh.triangle_points(k));
            (0..3).map(|a| v[tri[a]].dot(&grads[a])).sum()
        })
        .collect())
}

pub fn min_of(values: &[f64]) -> f64 {
    values.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// `EOC_k = ln(e_k/e_{k+1}) / ln(h_k/h_{k+1})`.
pub fn eoc(errors: &[f64], hs: &[f64]) -> Result<Vec<f64>> {
    if errors.len() != hs.len() || errors.len() < 2 {
        return Err(Error::Input(format!(
            "need two or more matching errors and mesh sizes, got {} and {}",
            errors.len(),
            hs.len()
        )));
    }
    if errors.iter().chain(hs).any(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(Error::Input("errors and mesh sizes must be positive".into()));
    }
    if hs.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Input("mesh sizes must be strictly decreasing".into()));
    }
    Ok((0..errors.len() - 1)
        .map(|k| (errors[k] / errors[k + 1]).ln() / (hs[k] / hs[k + 1]).ln())
        .collect())
}

/// Index of the smallest energy and whether it lies within the central
/// `[5%, 95%]` of the step range.
pub fn interior_minimum(energies: &[f64]) -> Option<(usize, bool)> {
    let (idx, _) = energies
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))?;
    let last = (energies.len() - 1) as f64;
    let pos = idx as f64;
    Some((idx, pos >= 0.05 * last && pos <= 0.95 * last))
}

/// Largest per-step energy increase, `max_n (E_{n+1} − E_n)`.
pub fn max_energy_increase(energies: &[f64]) -> f64 {
    energies.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max)
}
