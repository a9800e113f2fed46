use std::sync::Arc;

use tangent_stokes::assembly::OperatorConfig;
use tangent_stokes::mesh::build_mesh;
use tangent_stokes::problems::{Problem, DIFFUSION_ALPHA};
use tangent_stokes::solver::{SolverKind, SolverOptions};
use tangent_stokes::study::{solve_level, LevelSolution};
use tangent_stokes::vtk::{to_vtk_string, vertex_fields, write_vtk};

fn block() -> SolverOptions {
    SolverOptions { kind: SolverKind::BlockGmres, ..SolverOptions::default() }
}

fn solve(problem: &Problem, level: usize, k: usize) -> LevelSolution {
    let mesh = Arc::new(build_mesh(&problem.surface, level, k + 1).unwrap());
    solve_level(mesh, problem, k, k, &block()).unwrap()
}

#[test]
fn torus_pressure_stays_within_the_closed_form_bounds() {
    let problem = Problem::manufactured_torus(2.0, 1.0, OperatorConfig::bochner(1.0)).unwrap();
    let sol = solve(&problem, 3, 3);
    let fields = vertex_fields(&sol.v_u, &sol.v_p, &sol.w, &sol.p).unwrap();
    let eps = 1e-2;
    for p in &fields.pressure {
        assert!(p.abs() <= 1.0 + eps, "{p}");
    }
    let max = fields.pressure.iter().fold(0.0f64, |m, p| m.max(p.abs()));
    assert!(max > 0.9);
}

#[test]
fn dziuk_export_has_one_vector_and_two_scalar_fields() {
    let problem = Problem::dziuk_diffusion(OperatorConfig::diffusion(DIFFUSION_ALPHA, 1.0)).unwrap();
    let sol = solve(&problem, 1, 2);
    let text = to_vtk_string(&sol.v_u, &sol.v_p, &sol.w, &sol.p, "dziuk").unwrap();
    let nv = sol.v_u.mesh().vertices().len();
    let nt = sol.v_u.mesh().n_elements();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "# vtk DataFile Version 3.0");
    assert_eq!(lines[2], "ASCII");
    assert_eq!(lines.iter().filter(|l| l.starts_with("VECTORS ")).count(), 1);
    assert_eq!(lines.iter().filter(|l| l.starts_with("SCALARS ")).count(), 2);
    assert!(lines.contains(&format!("POINTS {nv} double").as_str()));
    assert!(lines.contains(&format!("POLYGONS {nt} {}", 4 * nt).as_str()));
    // header, points, polygons, point data, one vector block and two scalar blocks
    assert_eq!(lines.len(), 5 + nv + 1 + nt + 1 + (1 + nv) + 2 * (2 + nv));
    for l in &lines {
        for tok in l.split_whitespace() {
            if let Ok(x) = tok.parse::<f64>() {
                assert!(x.is_finite());
            }
        }
    }

    let dir = std::env::temp_dir().join(format!("tangent-stokes-vtk-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("dziuk.vtk");
    write_vtk(&path, &sol.v_u, &sol.v_p, &sol.w, &sol.p, "dziuk").unwrap();
    assert_eq!(std::fs::read_to_string(&path).unwrap(), text);
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn export_is_byte_deterministic() {
    let problem = Problem::sphere_smoke(1.0, OperatorConfig::bochner(1.0)).unwrap();
    let a = solve(&problem, 1, 2);
    let b = solve(&problem, 1, 2);
    let sa = to_vtk_string(&a.v_u, &a.v_p, &a.w, &a.p, "sphere").unwrap();
    let sb = to_vtk_string(&b.v_u, &b.v_p, &b.w, &b.p, "sphere").unwrap();
    assert_eq!(sa, sb);
}

#[test]
fn mismatched_coefficients_are_rejected() {
    let problem = Problem::sphere_smoke(1.0, OperatorConfig::bochner(1.0)).unwrap();
    let sol = solve(&problem, 1, 1);
    assert!(to_vtk_string(&sol.v_u, &sol.v_p, &sol.p, &sol.p, "bad").is_err());
    assert!(write_vtk(std::path::Path::new("/nonexistent-dir/x.vtk"), &sol.v_u, &sol.v_p, &sol.w, &sol.p, "t").is_err());
}
