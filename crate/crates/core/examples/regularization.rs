//! One expanding-torus step solved with the exact logarithm and with the
//! δ-regularized potential for a walk of δ values, starting from data that
//! sits close to the pure phases.
//!
//!     cargo run --release --example regularization [amplitude] [width] [tau]

use esfem_ch::assembly::FeFunction;
use esfem_ch::config::{ExperimentConfig, InitialData};
use esfem_ch::operators::lumped_norm;
use esfem_ch::solver::Simulation;

fn main() -> esfem_ch::Result<()> {
    env_logger::init();
    let amplitude: f64 = std::env::args().nth(1).map_or(Ok(0.99999), |a| a.parse()).expect("amplitude");
    let width: f64 = std::env::args().nth(2).map_or(Ok(0.05), |a| a.parse()).expect("width");
    let tau: f64 = std::env::args().nth(3).map_or(Ok(1e-5), |a| a.parse()).expect("tau");
    let cfg = ExperimentConfig {
        tau,
        initial: InitialData::Expression(format!("{amplitude}*tanh(x/{width})").parse()?),
        ..ExperimentConfig::preset("expanding_torus_reduced")?
    };
    let (mesh, params, u0) = cfg.build()?;
    let sim = Simulation::new(&mesh, cfg.family, params.clone(), u0)?;
    let stepper = sim.stepper();
    let exact = stepper.newton_step(sim.state())?;
    println!("exact step: max|U| = {:.8}, {} Newton iterations", exact.u.max_abs(), exact.stats.last_iters);
    println!("{:>8} {:>14} {:>12}", "delta", "||U^d - U||", "max|U^d|");
    for &delta in &params.delta_schedule {
        let reg = stepper.regularized_step(sim.state(), delta)?;
        let diff: Vec<f64> = reg.u.coefficients.iter().zip(&exact.u.coefficients).map(|(a, b)| a - b).collect();
        let d = lumped_norm(&exact.mesh, &FeFunction::new(diff, &exact.mesh)?)?;
        println!("{delta:>8.0e} {d:>14.6e} {:>12.8}", reg.u.max_abs());
    }
    Ok(())
}
