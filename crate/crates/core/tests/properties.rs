use approx::assert_relative_eq;
use proptest::prelude::*;

use esfem_ch::assembly::{consistent_mass, lumped_mass_diagonal, stiffness, FeFunction};
use esfem_ch::config::{ExperimentConfig, InitialData, PRESETS};
use esfem_ch::diagnostics::eoc;
use esfem_ch::expr::Expr;
use esfem_ch::geometry::{Point3, SurfaceFamily};
use esfem_ch::lu::{CscMatrix, LuFactors};
use esfem_ch::mesh::{advect_mesh, make_icosphere, make_torus_mesh};
use esfem_ch::operators::{interpolate, NegNormWorkspace};
use esfem_ch::potential::{big_f_log, big_f_log_delta, f_delta_raw, f_log, PotentialParams};
use esfem_ch::solver::{SchemeParams, Simulation};

fn family() -> impl Strategy<Value = SurfaceFamily> {
    prop_oneof![
        Just(SurfaceFamily::ExpandingSphere),
        Just(SurfaceFamily::ExpandingTorus),
        Just(SurfaceFamily::ShrinkingTorus),
        (0.5f64..2.0).prop_map(|radius| SurfaceFamily::StationarySphere { radius }),
    ]
}

fn coarse_mesh(f: SurfaceFamily) -> esfem_ch::mesh::SurfaceMesh {
    if f.is_torus() {
        make_torus_mesh(16, 10, f).unwrap()
    } else {
        make_icosphere(2, f).unwrap()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn lumped_and_consistent_mass_integrate_constants_alike(f in family(), t in 0.0f64..0.6) {
        let mesh = advect_mesh(&coarse_mesh(f), f, t).unwrap();
        let lumped: f64 = lumped_mass_diagonal(&mesh).iter().sum();
        let ones = vec![1.0; mesh.vertex_count()];
        let consistent: f64 = consistent_mass(&mesh).mul_vec(&ones).iter().sum();
        assert_relative_eq!(lumped, mesh.area(), max_relative = 1e-12);
        assert_relative_eq!(consistent, mesh.area(), max_relative = 1e-12);
        let a1 = stiffness(&mesh).mul_vec(&ones);
        prop_assert!(a1.iter().all(|v| v.abs() < 1e-10));
    }

    #[test]
    fn regularized_potential_matches_inside_the_knots(delta in 1e-4f64..0.4, s in -1.0f64..1.0) {
        let r = s * (1.0 - delta);
        prop_assert!((f_delta_raw(r, delta) - f_log(r).unwrap()).abs() <= 1e-9 * (1.0 + f_log(r).unwrap().abs()));
        prop_assert!((big_f_log_delta(r, delta) - big_f_log(r).unwrap()).abs() <= 1e-9);
        prop_assert_eq!(big_f_log_delta(r, delta), big_f_log_delta(-r, delta));
    }

    #[test]
    fn regularized_derivative_is_increasing(delta in 1e-3f64..0.4, a in -3.0f64..3.0, b in -3.0f64..3.0) {
        prop_assume!(a < b);
        prop_assert!(f_delta_raw(a, delta) < f_delta_raw(b, delta));
    }

    #[test]
    fn eoc_recovers_power_laws(c in 0.1f64..10.0, p in 0.5f64..3.0, h0 in 0.1f64..1.0) {
        let hs: Vec<f64> = (0..4).map(|k| h0 / 2f64.powi(k)).collect();
        let errors: Vec<f64> = hs.iter().map(|h| c * h.powf(p)).collect();
        for o in eoc(&errors, &hs).unwrap() {
            prop_assert!((o - p).abs() < 1e-10);
        }
    }

    #[test]
    fn expressions_print_and_reparse(a in -3.0f64..3.0, b in 0.1f64..2.0, x in -1.0f64..1.0, y in -1.0f64..1.0) {
        let src = format!("{a:?}*sin(x*{b:?}) - (y^2)/{b:?} + tanh(-x*y)");
        let e: Expr = src.parse().unwrap();
        let back: Expr = e.to_string().parse().unwrap();
        let p = Point3::new(x, y, 0.3);
        let expected = a * (x * b).sin() - y * y / b + (-x * y).tanh();
        prop_assert!((e.eval(&p) - expected).abs() < 1e-12);
        prop_assert_eq!(back.eval(&p), e.eval(&p));
    }

    #[test]
    fn configurations_round_trip(
        idx in 0..PRESETS.len(),
        eps in 0.05f64..0.5,
        theta in 0.05f64..0.95,
        tau in 1e-5f64..1e-2,
        c in -0.9f64..0.9,
    ) {
        let cfg = ExperimentConfig {
            epsilon: eps,
            theta,
            tau,
            initial: InitialData::Constant(c),
            ..ExperimentConfig::preset(PRESETS[idx]).unwrap()
        };
        let back = ExperimentConfig::parse(&cfg.to_text(), None).unwrap();
        prop_assert_eq!(back, cfg);
    }

    #[test]
    fn sparse_lu_solves_perturbed_laplacians(seed in any::<u64>(), shift in 0.01f64..1.0) {
        let mesh = make_icosphere(1, SurfaceFamily::unit_sphere()).unwrap();
        let a = stiffness(&mesh);
        let n = mesh.vertex_count();
        let mut triplets = Vec::new();
        for i in 0..n {
            triplets.push((i, i, shift));
            for (j, v) in a.row(i) {
                // a small skew part keeps the matrix unsymmetric
                let skew = match (i.cmp(&j), (seed >> (i % 60)) & 1) {
                    (std::cmp::Ordering::Less, 1) => 0.1,
                    (std::cmp::Ordering::Greater, 1) => -0.1,
                    _ => 0.0,
                };
                triplets.push((i, j, v + skew));
            }
        }
        let m = CscMatrix::from_triplets(n, &triplets);
        let x: Vec<f64> = (0..n).map(|i| ((i as u64).wrapping_mul(seed | 1) % 97) as f64 / 97.0 - 0.5).collect();
        let b = m.mul_vec(&x);
        let order: Vec<usize> = (0..n).rev().collect();
        let sol = LuFactors::factorize(&m, &order, 0.1).unwrap().solve(&b);
        for (u, v) in sol.iter().zip(&x) {
            prop_assert!((u - v).abs() < 1e-8);
        }
    }

    #[test]
    fn inverse_laplacian_round_trips(f in family(), t in 0.0f64..0.5, k in 1.0f64..4.0) {
        let mesh = advect_mesh(&coarse_mesh(f), f, t).unwrap();
        let ws = NegNormWorkspace::new(&mesh).unwrap();
        let z = interpolate(&mesh, |p| (k * p.x).sin() * p.y + p.z * p.z).unwrap();
        let total: f64 = ws.lumped().iter().sum();
        let mean = ws.lumped().iter().zip(&z.coefficients).map(|(m, v)| m * v).sum::<f64>() / total;
        let z = FeFunction::new(z.coefficients.iter().map(|v| v - mean).collect(), &mesh).unwrap();
        let back = ws.discrete_laplacian(&ws.inv_laplacian_lumped(&z).unwrap());
        let scale = z.max_abs();
        for (a, b) in back.coefficients.iter().zip(&z.coefficients) {
            prop_assert!((a - b).abs() <= 1e-9 * scale);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn steps_conserve_mass_and_respect_bounds(f in family(), a in 0.1f64..0.9, m in -0.3f64..0.3) {
        let mesh = coarse_mesh(f);
        let params = SchemeParams::new(PotentialParams::new(0.4, 0.2).unwrap(), 1e-3, 3e-3);
        let u0 = interpolate(&mesh, |p| (m + a * p.x * p.y.cos()).clamp(-0.95, 0.95)).unwrap();
        let mut sim = Simulation::new(&mesh, f, params, u0).unwrap();
        let records = sim.run(|_, _| Ok(())).unwrap();
        let scale = records[0].mass.abs().max(mesh.area());
        for r in &records {
            prop_assert!((r.mass - records[0].mass).abs() <= 1e-10 * scale);
            prop_assert!(r.max_abs_u <= 1.0 - 1e-9);
        }
    }
}
