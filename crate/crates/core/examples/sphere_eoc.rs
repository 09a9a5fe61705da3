//! Convergence study on the expanding sphere: coarse runs with `τ ≈ c h²`
//! are prolonged to a finer reference run and compared in the H¹ seminorm.
//!
//!     cargo run --release --example sphere_eoc [cfl] [reference level]
//!
//! The default (`c = 0.2` against level 5) takes a few minutes.

use esfem_ch::config::{ExperimentConfig, MeshSpec};
use esfem_ch::io::format_eoc_table;
use esfem_ch::study::{eoc_study, StudyLevel};

fn main() -> esfem_ch::Result<()> {
    env_logger::init();
    let mut args = std::env::args().skip(1);
    let cfl: f64 = args.next().map_or(Ok(0.2), |a| a.parse()).expect("cfl");
    let reference_level: u32 = args.next().map_or(Ok(5), |a| a.parse()).expect("level");

    let base = ExperimentConfig::preset("expanding_sphere_desk")?;
    let levels = (2..reference_level)
        .map(|l| StudyLevel::with_cfl(MeshSpec::Icosphere { level: l }, &base, cfl))
        .collect::<esfem_ch::Result<Vec<_>>>()?;
    let reference = StudyLevel { mesh: MeshSpec::Icosphere { level: reference_level }, tau: 1e-4 };
    let rows = eoc_study(&base, &levels, &reference)?;
    print!("{}", format_eoc_table(&rows));
    Ok(())
}
