//! Discrete inverse Laplacians and the norm chain `−h`, `L²`, `H¹` for a
//! mean-zero field on meshes of increasing resolution.
//!
//!     cargo run --release --example negative_norms

use esfem_ch::assembly::FeFunction;
use esfem_ch::geometry::SurfaceFamily;
use esfem_ch::mesh::make_icosphere;
use esfem_ch::operators::{h1_seminorm, interpolate, lumped_norm, NegNormWorkspace};

fn main() -> esfem_ch::Result<()> {
    let family = SurfaceFamily::unit_sphere();
    println!("{:>5} {:>12} {:>12} {:>12} {:>12}", "level", "|z|_-h", "|z|_-h,cons", "|z|_h", "|grad z|");
    for level in 1..=5 {
        let mesh = make_icosphere(level, family)?;
        let ws = NegNormWorkspace::new(&mesh)?;
        // x y z has zero mean on the sphere; remove the discrete residue
        let z = interpolate(&mesh, |p| p.x * p.y * p.z + 0.3 * p.x)?;
        let total: f64 = ws.lumped().iter().sum();
        let mean = ws.lumped().iter().zip(&z.coefficients).map(|(m, v)| m * v).sum::<f64>() / total;
        let z = FeFunction::new(z.coefficients.iter().map(|v| v - mean).collect(), &mesh)?;
        println!(
            "{level:>5} {:12.6e} {:12.6e} {:12.6e} {:12.6e}",
            ws.neg_norm_lumped(&z)?,
            ws.neg_norm_consistent(&z)?,
            lumped_norm(&mesh, &z)?,
            h1_seminorm(&mesh, &z)?
        );
    }
    Ok(())
}
