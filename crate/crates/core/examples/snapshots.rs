//! Custom initial data from an expression, VTK snapshots during a run on a
//! stationary sphere, and reading a snapshot back.
//!
//!     cargo run --release --example snapshots [output dir]

use std::path::PathBuf;

use esfem_ch::config::ExperimentConfig;
use esfem_ch::io::{read_vtk, snapshot_path, write_vtk, TraceWriter};
use esfem_ch::solver::Simulation;

const CONFIG: &str = "\
surface.kind = stationary_sphere
surface.radius = 1.0
mesh.kind = icosphere
mesh.level = 3
model.epsilon = 0.1
model.theta = 0.4
time.tau = 1e-4
time.t_end = 0.01
initial = expr(0.4*sin(3*x)*cos(2*y) + 0.1*z)
";

fn main() -> esfem_ch::Result<()> {
    env_logger::init();
    let dir = std::env::args().nth(1).map_or_else(|| std::env::temp_dir().join("esfem-ch-snapshots"), PathBuf::from);
    std::fs::create_dir_all(&dir)?;
    let cfg = ExperimentConfig::parse(CONFIG, None)?;
    let (mesh, params, u0) = cfg.build()?;
    let mut sim = Simulation::new(&mesh, cfg.family, params, u0)?;
    let mut trace = TraceWriter::create(&dir.join("trace.csv"))?;
    sim.run(|state, rec| {
        trace.push(rec)?;
        if state.step % 25 == 0 {
            write_vtk(&snapshot_path(&dir, state.step), &state.mesh, state.step, &state.u.coefficients, &state.w.coefficients)?;
        }
        Ok(())
    })?;
    let last = read_vtk(&snapshot_path(&dir, 100))?;
    println!("wrote {} (snapshot at t = {}, {} points)", dir.display(), last.time, last.points.len());
    println!("max |U| in the last snapshot: {:.6}", last.u.iter().fold(0.0f64, |m, v| m.max(v.abs())));
    Ok(())
}
