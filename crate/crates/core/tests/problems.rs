mod common;

use std::sync::Arc;

use common::{rng, TorusChart};
use nalgebra::Vector3;
use rand::Rng;
use tangent_stokes::ad::{ScalarFn, VectorFn};
use tangent_stokes::assembly::{assemble_system, AssemblyOptions, OperatorConfig};
use tangent_stokes::fem::quadrature::QuadratureRule;
use tangent_stokes::fem::space::FESpace;
use tangent_stokes::geometry::{eval_surface, LevelSetSurface};
use tangent_stokes::mesh::{build_mesh, SurfaceMesh};
use tangent_stokes::problems::ops::{self, TangentialGradient};
use tangent_stokes::problems::{data_map, DataPoint, Problem, ScalarExpr, VectorExpr, VectorField};

fn arr(y: &Vector3<f64>) -> [f64; 3] {
    [y[0], y[1], y[2]]
}

/// `P(−y³, z² + y, x)` evaluated with the chart normal.
fn chart_velocity(chart: TorusChart) -> impl Fn(&Vector3<f64>) -> Vector3<f64> {
    move |x| {
        let v = Vector3::new(-x[1].powi(3), x[2] * x[2] + x[1], x[0]);
        let (t, s) = chart.angles(x);
        chart.projector(t, s) * v
    }
}

fn chart_pressure(x: &Vector3<f64>) -> f64 {
    use std::f64::consts::PI;
    (PI * x[0]).sin() * (PI * x[1] * x[2]).sin()
}

fn torus_problem() -> Problem {
    Problem::manufactured_torus(2.0, 1.0, OperatorConfig::bochner(1.0)).unwrap()
}

#[test]
fn divergence_at_outer_equator_matches_chart() {
    let problem = torus_problem();
    let chart = TorusChart::new(2.0, 1.0);
    let y = Vector3::new(3.0, 0.0, 0.0);
    let ad = problem.data_at(&y).unwrap().f_div;
    let oracle = chart.div(&chart_velocity(chart), 0.0, 0.0);
    assert!((ad - oracle).abs() <= 1e-8, "{ad} vs {oracle}");
}

#[test]
fn operators_agree_with_chart_at_random_points() {
    let problem = torus_problem();
    let surface = problem.surface;
    let chart = TorusChart::new(2.0, 1.0);
    let u = problem.velocity.unwrap();
    let p = problem.pressure.unwrap();
    let u_chart = chart_velocity(chart);
    let mut rng = rng(31);
    for _ in 0..100 {
        let (t, s) = chart.random_angles(&mut rng);
        let y = chart.point(t, s);
        let g = ops::grad(&surface, &p, &y).unwrap();
        assert!((g - chart.grad(&chart_pressure, t, s)).norm() <= 1e-8);
        let d = ops::div(&surface, &u, &y).unwrap();
        assert!((d - chart.div(&u_chart, t, s)).abs() <= 1e-8);
        let lap = ops::laplace_beltrami(&surface, &p, &y).unwrap();
        let lap_chart = chart.laplace_beltrami(&chart_pressure, t, s);
        assert!((lap - lap_chart).abs() <= 1e-8 * (1.0 + lap_chart.abs()), "{lap} vs {lap_chart}");
        let b = ops::bochner_laplacian(&surface, &u, &y).unwrap();
        let b_chart = chart.bochner(&u_chart, t, s);
        assert!((b - b_chart).norm() <= 1e-8 * (1.0 + b_chart.norm()), "{b:?} vs {b_chart:?}");
    }
}

#[test]
fn manufactured_divergence_integrates_to_zero() {
    let problem = torus_problem();
    let u = problem.velocity.unwrap();
    let chart = TorusChart::new(2.0, 1.0);
    let total = chart.integrate(160, &|y| ops::div(&problem.surface, &u, y).unwrap());
    assert!(total.abs() <= 1e-8, "{total}");
}

#[test]
fn mean_target_matches_trapezoid_oracle() {
    let problem = torus_problem();
    let chart = TorusChart::new(2.0, 1.0);
    let oracle = chart.integrate(200, &chart_pressure);
    assert!((problem.c0() - oracle).abs() <= 1e-9 * (1.0 + oracle.abs()), "{} vs {oracle}", problem.c0());
}

#[test]
fn manufactured_velocity_is_tangent() {
    let problem = torus_problem();
    let u = problem.velocity.unwrap();
    let chart = TorusChart::new(2.0, 1.0);
    let mut rng = rng(32);
    for _ in 0..1000 {
        let (t, s) = chart.random_angles(&mut rng);
        let y = chart.point(t, s);
        let n = eval_surface(&problem.surface, &y).unwrap().normal;
        assert!(Vector3::from(u.eval(&arr(&y))).dot(&n).abs() <= 1e-12);
    }
    let mesh = build_mesh(&problem.surface, 2, 3).unwrap();
    let rule = QuadratureRule::with_exactness(10);
    let worst = mesh
        .integrate(&rule, |pt| {
            let n = eval_surface(&problem.surface, &pt.y)?.normal;
            let un = Vector3::from(u.eval(&arr(&pt.y))).dot(&n).abs();
            assert!(un <= 1e-12, "{un}");
            Ok([un])
        })
        .unwrap()[0];
    assert!(worst <= 1e-10);
}

#[test]
fn data_map_special_cases() {
    let d = DataPoint { force: Vector3::new(1.0, -2.0, 0.5), f_div: 0.0, grad_f_div: Vector3::zeros() };
    for op in [OperatorConfig::bochner(1.0), OperatorConfig::diffusion(1e-2, 1.0)] {
        let l = data_map(&d, &op);
        assert_eq!(l.velocity_load, d.force);
        assert_eq!(l.pressure_flux, d.force);
        assert_eq!(l.pressure_source, 0.0);
        let zero = data_map(&DataPoint { force: Vector3::zeros(), f_div: 0.0, grad_f_div: Vector3::zeros() }, &op);
        assert_eq!(zero.velocity_load.norm() + zero.pressure_flux.norm() + zero.pressure_source.abs(), 0.0);
    }
}

/// `|a(v, ∇q) − (div v, Δq) + (Rv, ∇q)|` relative to `∫ |∇v:∇∇q| + |div v Δq| + |Rv·∇q|`.
fn bochner_identity_residual(mesh: &SurfaceMesh, v: &VectorField, q: &ScalarExpr) -> f64 {
    let surface = *mesh.surface();
    let rule = QuadratureRule::with_exactness(12);
    let grad_q = TangentialGradient { surface: &surface, f: q };
    let [a, b, c, scale] = mesh
        .integrate(&rule, |pt| {
            let y = &pt.y;
            let gv = ops::tangential_jacobian(&surface, v, y)?;
            let hq = ops::tangential_jacobian(&surface, &grad_q, y)?;
            let div = ops::div(&surface, v, y)?;
            let lap = ops::laplace_beltrami(&surface, q, y)?;
            let rv = ops::ricci_apply(&surface, v, y)?;
            let gq = ops::grad(&surface, q, y)?;
            let terms = [gv.dot(&hq), div * lap, rv.dot(&gq)];
            Ok([terms[0], terms[1], terms[2], terms.iter().map(|t| t.abs()).sum()])
        })
        .unwrap();
    (a - b + c).abs() / scale
}

fn random_pair(rng: &mut impl Rng, surface: LevelSetSurface) -> (VectorField, ScalarExpr) {
    let mut wave = || [0; 3].map(|_: i32| rng.random_range(-1.5..1.5));
    let waves = [wave(), wave(), wave()];
    let qwave = wave();
    let phases = [0; 3].map(|_: i32| rng.random_range(0.0..6.3));
    let v = VectorField::tangential(VectorExpr::Trig { waves, phases }, surface);
    (v, ScalarExpr::Trig { wave: qwave, phase: phases[0] + 1.0 })
}

#[test]
fn bochner_identity_for_the_spec_pair_on_a_fine_sphere() {
    let surface = LevelSetSurface::unit_sphere();
    let mesh = build_mesh(&surface, 4, 4).unwrap();
    let v = VectorField::tangential(VectorExpr::TorusVelocity, surface);
    let residual = bochner_identity_residual(&mesh, &v, &ScalarExpr::Xyz);
    assert!(residual <= 1e-8, "{residual}");
}

#[test]
fn bochner_identity_for_random_pairs_converges_with_geometry() {
    let mut rng = rng(33);
    let k_geo = 3;
    for surface in [LevelSetSurface::unit_sphere(), LevelSetSurface::torus(2.0, 1.0)] {
        let mut mesh = build_mesh(&surface, 1, k_geo).unwrap();
        let pairs: Vec<_> = (0..5).map(|_| random_pair(&mut rng, surface)).collect();
        let mut history = vec![];
        for level in 1..=3 {
            history.push(pairs.iter().map(|(v, q)| bochner_identity_residual(&mesh, v, q)).collect::<Vec<_>>());
            if level < 3 {
                mesh = mesh.refine().unwrap();
            }
        }
        for (i, last) in history[2].iter().enumerate() {
            assert!(*last <= 1e-6, "{surface:?} pair {i}: {history:?}");
            let rate = (history[0][i] / last).log2() / 2.0;
            assert!(rate >= (k_geo - 1) as f64, "{surface:?} pair {i}: rate {rate}, {history:?}");
        }
    }
}

#[test]
fn interpolated_exact_solution_is_consistent() {
    let problem = torus_problem();
    let test_v = VectorField::tangential(VectorExpr::Rotation, problem.surface);
    let test_q = ScalarExpr::Trig { wave: [0.7, -0.4, 1.1], phase: 0.3 };
    for k in [1usize, 2] {
        let mut mesh = Arc::new(build_mesh(&problem.surface, 1, k + 1).unwrap());
        let mut residuals = vec![];
        for level in 1..=3 {
            let vu = FESpace::vector(mesh.clone(), k);
            let vp = FESpace::scalar(mesh.clone(), k);
            let sys = assemble_system(&vu, &vp, &problem, &AssemblyOptions::default()).unwrap();
            let u = problem.velocity.unwrap();
            let p = problem.pressure.unwrap();
            let w = vu.interpolate_vector(|y| Vector3::from(u.eval(&arr(y)))).unwrap();
            let pi = vp.interpolate_scalar(|y| p.eval(&arr(y))).unwrap();
            let v = vu.interpolate_vector(|y| Vector3::from(test_v.eval(&arr(y)))).unwrap();
            let q = vp.interpolate_scalar(|y| test_q.eval(&arr(y))).unwrap();
            let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
            let rhs = dot(&sys.f1, &v) + dot(&sys.f2, &q);
            residuals.push((sys.form(&w, &pi, &v, &q) - rhs).abs() / rhs.abs().max(1.0));
            if level < 3 {
                mesh = Arc::new(mesh.refine().unwrap());
            }
        }
        for pair in residuals.windows(2) {
            let rate = (pair[0] / pair[1]).log2();
            assert!(rate >= k as f64, "k {k}: {residuals:?}");
        }
    }
}

