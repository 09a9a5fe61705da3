//! Mesh sizes and shape quality of the generated meshes, at the initial and
//! final time of each surface family.
//!
//!     cargo run --release --example mesh_quality

use esfem_ch::geometry::SurfaceFamily;
use esfem_ch::mesh::{advect_mesh, make_icosphere, make_torus_mesh, quality, SurfaceMesh};

fn report(label: &str, mesh: &SurfaceMesh) {
    let q = quality(mesh);
    println!(
        "{label:<28} t={:.2} N={:6} h={:.5} rho_ratio={:.3} angles=[{:.1}, {:.1}] deg acute={}",
        mesh.time(),
        mesh.vertex_count(),
        q.h,
        q.rho_ratio(),
        q.min_angle.to_degrees(),
        q.max_angle.to_degrees(),
        q.is_acute
    );
}

fn main() -> esfem_ch::Result<()> {
    for level in 0..=5 {
        let family = SurfaceFamily::ExpandingSphere;
        let m = make_icosphere(level, family)?;
        report(&format!("icosphere level {level}"), &m);
        report("  advected", &advect_mesh(&m, family, 0.1)?);
    }
    for (nt, np) in [(36, 21), (64, 47)] {
        for family in [SurfaceFamily::ExpandingTorus, SurfaceFamily::ShrinkingTorus] {
            let m = make_torus_mesh(nt, np, family)?;
            report(&format!("{family} {nt}x{np}"), &m);
            report("  advected", &advect_mesh(&m, family, 0.6)?);
        }
    }
    Ok(())
}
