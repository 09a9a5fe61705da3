use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::{error, info, warn};

use esfem_ch::config::{ExperimentConfig, MeshSpec, PRESETS};
use esfem_ch::geometry::SurfaceFamily;
use esfem_ch::io::{self, TraceWriter};
use esfem_ch::mesh::{self, advect_mesh};
use esfem_ch::solver::Simulation;
use esfem_ch::study::{eoc_study, StudyLevel};
use esfem_ch::{verify, Error};

#[derive(Parser)]
#[command(name = "esfem-ch", version, about = "Cahn-Hilliard with a logarithmic potential on evolving surfaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Source {
    /// Configuration file (`key = value` lines).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Named preset; a config file, when also given, overrides it.
    #[arg(long)]
    preset: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment, writing trace.csv and VTK snapshots.
    Run {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Convergence study against a finer reference run.
    Eoc {
        #[command(flatten)]
        source: Source,
        /// Comma-separated icosphere levels, or torus grids as `NTxNP`.
        #[arg(long, value_delimiter = ',', default_value = "2,3,4")]
        levels: Vec<String>,
        #[arg(long, default_value = "5")]
        reference: String,
        /// Step of the reference run; defaults to the configured tau.
        #[arg(long)]
        reference_tau: Option<f64>,
        /// Coarse steps are `c h²` rounded down to divide `t_end`.
        #[arg(long, default_value_t = 0.2)]
        cfl: f64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run property suites; prints one line per property.
    Verify {
        /// Suite name; all suites when omitted.
        #[arg(long)]
        suite: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Print mesh size, counts and quality.
    MeshInfo {
        #[command(flatten)]
        source: Source,
        /// Also report the mesh advected to this time.
        #[arg(long)]
        time: Option<f64>,
    },
}

fn load(source: &Source) -> Result<ExperimentConfig, Error> {
    let base = source.preset.as_deref().map(ExperimentConfig::preset).transpose()?;
    match (&source.config, base) {
        (Some(path), base) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            ExperimentConfig::parse(&text, base)
        }
        (None, Some(c)) => Ok(c),
        (None, None) => Err(Error::Config(format!(
            "give --config or --preset (presets: {})",
            PRESETS.join(", ")
        ))),
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Admissibility(_) | Error::Input(_) => 2,
        _ => 3,
    }
}

fn cmd_run(cfg: ExperimentConfig) -> Result<(), Error> {
    let (mesh, params, u0) = cfg.build()?;
    let dir = &cfg.output_dir;
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("config.txt"), cfg.to_text())?;
    let mut sim = Simulation::new(&mesh, cfg.family, params, u0)?;
    let mut trace = TraceWriter::create(&dir.join("trace.csv"))?;
    let every = cfg.snapshot_every;
    let total = sim.params().step_count();
    let mut acute = true;
    let result = sim.run(|state, rec| {
        trace.push(rec)?;
        if every > 0 && (state.step % every == 0 || state.step == total) {
            io::write_vtk(&io::snapshot_path(dir, state.step), &state.mesh, state.step, &state.u.coefficients, &state.w.coefficients)?;
            if acute && !rec.mesh_is_acute {
                warn!("mesh is no longer acute at t = {}", rec.time);
                acute = false;
            }
        }
        Ok(())
    });
    let records = result?;
    let last = records.last().expect("initial record");
    info!("finished {} steps, t = {}, energy = {}", last.step, last.time, last.energy);
    println!("{}", dir.join("trace.csv").display());
    Ok(())
}

fn parse_level(s: &str) -> Result<MeshSpec, Error> {
    let s = s.trim();
    if let Some((a, b)) = s.split_once('x') {
        let p = |v: &str| v.parse().map_err(|_| Error::Config(format!("bad torus grid `{s}`")));
        Ok(MeshSpec::Torus { n_theta: p(a)?, n_phi: p(b)? })
    } else {
        s.parse()
            .map(|level| MeshSpec::Icosphere { level })
            .map_err(|_| Error::Config(format!("bad level `{s}`")))
    }
}

fn cmd_eoc(cfg: ExperimentConfig, levels: &[String], reference: &str, reference_tau: Option<f64>, cfl: f64, output: &Path) -> Result<(), Error> {
    let specs = levels.iter().map(|l| parse_level(l)).collect::<Result<Vec<_>, _>>()?;
    let study = specs.iter().map(|&m| StudyLevel::with_cfl(m, &cfg, cfl)).collect::<Result<Vec<_>, _>>()?;
    let reference = StudyLevel { mesh: parse_level(reference)?, tau: reference_tau.unwrap_or(cfg.tau) };
    let rows = eoc_study(&cfg, &study, &reference)?;
    std::fs::create_dir_all(output)?;
    let path = output.join("eoc.csv");
    io::write_eoc_table(&path, &rows)?;
    print!("{}", io::format_eoc_table(&rows));
    info!("wrote {}", path.display());
    Ok(())
}

fn cmd_mesh_info(cfg: &ExperimentConfig, time: Option<f64>) -> Result<(), Error> {
    let m0 = cfg.mesh.build(cfg.family)?;
    let report = |m: &esfem_ch::mesh::SurfaceMesh, family: SurfaceFamily| {
        let q = mesh::quality(m);
        println!(
            "family={} t={} vertices={} triangles={} euler={} area={:e} h={:e} rho_ratio={:e} min_angle={:e} max_angle={:e} acute={}",
            family,
            m.time(),
            m.vertex_count(),
            m.triangle_count(),
            m.euler_characteristic(),
            m.area(),
            q.h,
            q.rho_ratio(),
            q.min_angle,
            q.max_angle,
            q.is_acute
        );
    };
    report(&m0, cfg.family);
    if let Some(t) = time {
        report(&advect_mesh(&m0, cfg.family, t)?, cfg.family);
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run { source, output } => load(&source).and_then(|mut cfg| {
            if let Some(o) = output {
                cfg.output_dir = o;
            }
            cmd_run(cfg)
        }),
        Command::Eoc { source, levels, reference, reference_tau, cfl, output } => load(&source).and_then(|cfg| {
            let out = output.unwrap_or_else(|| cfg.output_dir.clone());
            cmd_eoc(cfg, &levels, &reference, reference_tau, cfl, &out)
        }),
        Command::MeshInfo { source, time } => load(&source).and_then(|cfg| cmd_mesh_info(&cfg, time)),
        Command::Verify { suite, seed } => match verify::run(suite.as_deref(), seed) {
            Ok(results) => {
                for r in &results {
                    println!("{r}");
                }
                let failed = results.iter().filter(|r| !r.passed()).count();
                if failed > 0 {
                    error!("{failed} of {} properties failed", results.len());
                    return ExitCode::from(4);
                }
                return ExitCode::SUCCESS;
            }
            Err(e) => Err(e),
        },
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
