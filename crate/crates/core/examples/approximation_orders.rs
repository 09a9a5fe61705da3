//! Interpolation and Ritz projection errors of `z = 0.5 x` on the unit
//! sphere, measured on the exact surface through the lift.
//!
//!     cargo run --release --example approximation_orders

use esfem_ch::assembly::FeFunction;
use esfem_ch::diagnostics::eoc;
use esfem_ch::geometry::{Point3, SurfaceFamily};
use esfem_ch::mesh::make_icosphere;
use esfem_ch::operators::{interpolate, l2_norm, lifted_errors, ritz_projection, LinearField};

fn main() -> esfem_ch::Result<()> {
    let family = SurfaceFamily::unit_sphere();
    let z = LinearField(Point3::new(0.5, 0.0, 0.0));
    let (mut hs, mut l2, mut h1, mut gap) = (vec![], vec![], vec![], vec![]);
    for level in 1..=5 {
        let mesh = make_icosphere(level, family)?;
        let iz = interpolate(&mesh, |p| 0.5 * p.x)?;
        let (e0, e1) = lifted_errors(&mesh, &family, &iz, &z)?;
        let rz = ritz_projection(&mesh, &family, &z)?;
        let d: Vec<f64> = rz.coefficients.iter().zip(&iz.coefficients).map(|(a, b)| a - b).collect();
        hs.push(mesh.h());
        l2.push(e0);
        h1.push(e1);
        gap.push(l2_norm(&mesh, &FeFunction::new(d, &mesh)?)?);
    }
    let (o0, o1, og) = (eoc(&l2, &hs)?, eoc(&h1, &hs)?, eoc(&gap, &hs)?);
    println!("{:>9} {:>11} {:>6} {:>11} {:>6} {:>11} {:>6}", "h", "|z - Iz|", "order", "|grad(z-Iz)|", "order", "|Rz - Iz|", "order");
    for k in 0..hs.len() {
        let o = |v: &[f64]| if k == 0 { "-".to_string() } else { format!("{:.3}", v[k - 1]) };
        println!(
            "{:9.5} {:11.4e} {:>6} {:11.4e} {:>6} {:11.4e} {:>6}",
            hs[k], l2[k], o(&o0), h1[k], o(&o1), gap[k], o(&og)
        );
    }
    Ok(())
}
