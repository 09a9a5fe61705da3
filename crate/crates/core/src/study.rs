//! Convergence studies against a fine reference solution.

use std::thread;

use log::info;

use crate::assembly::FeFunction;
use crate::config::{ExperimentConfig, MeshSpec};
use crate::diagnostics::eoc;
use crate::error::{Error, Result};
use crate::io::EocRow;
use crate::mesh::SurfaceMesh;
use crate::operators::{h1_seminorm, prolong};
use crate::solver::Simulation;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StudyLevel {
    pub mesh: MeshSpec,
    pub tau: f64,
}

impl StudyLevel {
    /// `τ = T / ⌈T / (c h²)⌉`: the largest step not exceeding `c h²` that
    /// divides `T` evenly, with `h` measured at `t = 0`.
    pub fn with_cfl(mesh: MeshSpec, base: &ExperimentConfig, c: f64) -> Result<Self> {
        let h = mesh.build(base.family)?.h();
        let target = c * h * h;
        let tau = if base.t_end > 0.0 { base.t_end / (base.t_end / target).ceil() } else { target };
        Ok(StudyLevel { mesh, tau })
    }
}

/// Final state of one level run.
#[derive(Debug, Clone)]
pub struct LevelResult {
    pub h: f64,
    pub tau: f64,
    pub mesh: SurfaceMesh,
    pub u: FeFunction,
}

/// Runs `base` with the mesh and step of `level` to `base.t_end`.
pub fn run_level(base: &ExperimentConfig, level: &StudyLevel) -> Result<LevelResult> {
    let cfg = ExperimentConfig { mesh: level.mesh, tau: level.tau, ..base.clone() };
    let (mesh, params, u0) = cfg.build()?;
    let h = mesh.h();
    let mut sim = Simulation::new(&mesh, cfg.family, params, u0)?;
    while !sim.is_finished() {
        sim.step()?;
    }
    info!("{} with tau = {:e} finished", level.mesh, level.tau);
    let s = sim.state();
    Ok(LevelResult { h, tau: level.tau, mesh: s.mesh.clone(), u: s.u.clone() })
}

/// Runs every level and the reference concurrently, then reports the H¹
/// seminorm of `U_ref − prolong(U_k)` on the reference mesh at `T` and the
/// orders between consecutive levels.
pub fn eoc_study(base: &ExperimentConfig, levels: &[StudyLevel], reference: &StudyLevel) -> Result<Vec<EocRow>> {
    if levels.is_empty() {
        return Err(Error::Config("an EOC study needs at least one level".into()));
    }
    let (results, reference) = thread::scope(|scope| {
        let handles: Vec<_> = levels
            .iter()
            .map(|level| scope.spawn(move || run_level(base, level)))
            .collect();
        let reference = run_level(base, reference);
        let results: Vec<Result<LevelResult>> = handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(Error::Numeric("level worker panicked".into()))))
            .collect();
        (results, reference)
    });
    let reference = reference?;
    let results = results.into_iter().collect::<Result<Vec<_>>>()?;
    if let Some(r) = results.iter().find(|r| r.h <= reference.h) {
        return Err(Error::Config(format!(
            "reference (h = {}) must be finer than every level (h = {})",
            reference.h, r.h
        )));
    }
    let mut rows = Vec::with_capacity(results.len());
    for (level, r) in levels.iter().zip(&results) {
        let fine = prolong(&r.mesh, &r.u, &reference.mesh)?;
        let diff = FeFunction {
            coefficients: reference.u.coefficients.iter().zip(&fine.coefficients).map(|(a, b)| a - b).collect(),
            mesh_time: reference.mesh.time(),
        };
        let label = match level.mesh {
            MeshSpec::Icosphere { level } => level.to_string(),
            MeshSpec::Torus { n_theta, n_phi } => format!("{n_theta}x{n_phi}"),
        };
        rows.push(EocRow { label, h: r.h, tau: r.tau, error: h1_seminorm(&reference.mesh, &diff)?, eoc: None });
    }
    for k in 0..rows.len().saturating_sub(1) {
        rows[k].eoc = eoc(&[rows[k].error, rows[k + 1].error], &[rows[k].h, rows[k + 1].h])
            .ok()
            .map(|v| v[0])
            .filter(|v| v.is_finite());
    }
    Ok(rows)
}
