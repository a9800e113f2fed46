//! Test problems: exact fields, synthesized data and the data map into the
//! elliptic right-hand sides.

pub mod fields;
pub mod ops;

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use nalgebra::{Matrix3, Vector3};

use crate::ad::{ScalarFn, VectorFn};
use crate::assembly::{OperatorConfig, OperatorKind};
use crate::error::{Error, Result};
use crate::fem::quadrature::QuadratureRule;
use crate::geometry::LevelSetSurface;
use crate::mesh::build_mesh;

pub use fields::{ScalarExpr, VectorExpr, VectorField};

/// Mesh level and geometric degree used for `c₀` and the reference norms.
pub const REFERENCE_LEVEL: usize = 4;
pub const REFERENCE_GEOM_DEGREE: usize = 6;
pub const REFERENCE_EXACTNESS: usize = 14;

pub const PROBLEM_IDS: [&str; 3] = ["torus-manufactured", "dziuk-diffusion", "sphere-smoke"];

/// Default `α` of the surface-diffusion experiment.
pub const DIFFUSION_ALPHA: f64 = 1e-2;

#[derive(Clone, Copy, Debug, PartialEq)]
enum Data {
    /// Force and divergence synthesized from the exact solution.
    Manufactured,
    Given { force: VectorField, f_div: ScalarExpr },
}

/// Problem data evaluated at a point of Γ.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DataPoint {
    /// Momentum force `𝐟`.
    pub force: Vector3<f64>,
    /// Prescribed divergence `f`.
    pub f_div: f64,
    /// `∇_Γ f`.
    pub grad_f_div: Vector3<f64>,
}

/// Exact solution evaluated at a point of Γ.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExactPoint {
    pub u: Vector3<f64>,
    /// `∇_Γ u = P Du P`
    pub grad_u: Matrix3<f64>,
    pub p: f64,
    pub grad_p: Vector3<f64>,
}

/// `‖u‖, ‖∇_Γ u‖, ‖p‖, ‖∇_Γ p‖` on Γ.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReferenceNorms {
    pub u_l2: f64,
    pub u_h1: f64,
    pub p_l2: f64,
    pub p_h1: f64,
}

/// Integrands of the two right-hand-side functionals at one point.
///
/// `F₁(v) = ∫ velocity_load · Pv` and `F₂(q) = ∫ pressure_flux · ∇_Γ q + pressure_source q`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LoadPoint {
    pub velocity_load: Vector3<f64>,
    pub pressure_flux: Vector3<f64>,
    pub pressure_source: f64,
}

/// Integrate-by-parts form of the data map for the chosen operator.
pub fn data_map(d: &DataPoint, op: &OperatorConfig) -> LoadPoint {
    match op.kind {
        OperatorKind::Bochner => LoadPoint {
            velocity_load: d.force,
            pressure_flux: d.force + d.grad_f_div,
            pressure_source: 0.0,
        },
        OperatorKind::Diffusion => LoadPoint {
            velocity_load: d.force,
            pressure_flux: d.force + 2.0 * d.grad_f_div,
            pressure_source: op.alpha * d.f_div,
        },
    }
}

#[derive(Clone, Debug)]
pub struct Problem {
    pub id: String,
    pub surface: LevelSetSurface,
    pub operator: OperatorConfig,
    pub velocity: Option<VectorField>,
    pub pressure: Option<ScalarExpr>,
    data: Data,
    c0: f64,
    norms: Option<ReferenceNorms>,
}

impl Problem {
    /// Manufactured problem from a tangential velocity and a pressure.
    pub fn manufactured(
        id: &str,
        surface: LevelSetSurface,
        velocity: VectorExpr,
        pressure: ScalarExpr,
        operator: OperatorConfig,
    ) -> Result<Problem> {
        operator.validate()?;
        let mut problem = Problem {
            id: id.to_string(),
            surface,
            operator,
            velocity: Some(VectorField::tangential(velocity, surface)),
            pressure: Some(pressure),
            data: Data::Manufactured,
            c0: 0.0,
            norms: None,
        };
        let (c0, norms) = cached_reference(&problem)?;
        problem.c0 = c0;
        problem.norms = Some(norms);
        Ok(problem)
    }

    /// Problem with given data and no exact solution; the pressure mean is zero.
    pub fn from_data(
        id: &str,
        surface: LevelSetSurface,
        force: VectorField,
        f_div: ScalarExpr,
        operator: OperatorConfig,
    ) -> Result<Problem> {
        operator.validate()?;
        Ok(Problem {
            id: id.to_string(),
            surface,
            operator,
            velocity: None,
            pressure: None,
            data: Data::Given { force, f_div },
            c0: 0.0,
            norms: None,
        })
    }

    /// `u = P(−y³, z² + y, x)`, `p = sin(πx) sin(πyz)` on the torus.
    pub fn manufactured_torus(major: f64, minor: f64, operator: OperatorConfig) -> Result<Problem> {
        Problem::manufactured(
            "torus-manufactured",
            LevelSetSurface::torus(major, minor),
            VectorExpr::TorusVelocity,
            ScalarExpr::SinPiXSinPiYZ,
            operator,
        )
    }

    /// The torus problem's fields carried over to a sphere.
    pub fn sphere_smoke(radius: f64, operator: OperatorConfig) -> Result<Problem> {
        Problem::manufactured(
            "sphere-smoke",
            LevelSetSurface::sphere(radius),
            VectorExpr::TorusVelocity,
            ScalarExpr::SinPiXSinPiYZ,
            operator,
        )
    }

    /// Surface diffusion on the Dziuk surface with `𝐟 = (xy, sin(xy²), −exp(−z))`, `f = 0`.
    pub fn dziuk_diffusion(operator: OperatorConfig) -> Result<Problem> {
        Problem::from_data(
            "dziuk-diffusion",
            LevelSetSurface::Dziuk,
            VectorField::ambient(VectorExpr::DziukForce),
            ScalarExpr::Zero,
            operator,
        )
    }

    /// Zero force and divergence.
    pub fn homogeneous(surface: LevelSetSurface, operator: OperatorConfig) -> Result<Problem> {
        Problem::from_data(
            "homogeneous",
            surface,
            VectorField::ambient(VectorExpr::Zero),
            ScalarExpr::Zero,
            operator,
        )
    }

    /// Look a problem up by id. `surface` overrides the problem's default geometry
    /// where that makes sense (torus radii, sphere radius).
    pub fn from_id(id: &str, surface: Option<LevelSetSurface>, operator: OperatorConfig) -> Result<Problem> {
        match (id, surface) {
            ("torus-manufactured", None) => Problem::manufactured_torus(2.0, 1.0, operator),
            ("torus-manufactured", Some(LevelSetSurface::Torus { major, minor })) => {
                Problem::manufactured_torus(major, minor, operator)
            }
            ("sphere-smoke", None) => Problem::sphere_smoke(1.0, operator),
            ("sphere-smoke", Some(LevelSetSurface::Sphere { radius })) => Problem::sphere_smoke(radius, operator),
            ("dziuk-diffusion", None | Some(LevelSetSurface::Dziuk)) => Problem::dziuk_diffusion(operator),
            (id, Some(s)) if PROBLEM_IDS.contains(&id) => {
                Err(Error::Config(format!("problem '{id}' is not defined on surface '{}'", s.id())))
            }
            (id, _) => Err(Error::Config(format!(
                "unknown problem '{id}' (expected one of {})",
                PROBLEM_IDS.join(", ")
            ))),
        }
    }

    pub fn has_exact_solution(&self) -> bool {
        self.velocity.is_some() && self.pressure.is_some()
    }

    /// Target of the pressure mean constraint, `∫_Γ p`.
    pub fn c0(&self) -> f64 {
        self.c0
    }

    pub fn reference_norms(&self) -> Result<ReferenceNorms> {
        self.norms.ok_or(Error::MissingExactSolution)
    }

    /// Force and divergence at a point of Γ.
    pub fn data_at(&self, y: &Vector3<f64>) -> Result<DataPoint> {
        let s = &self.surface;
        match (&self.data, &self.velocity, &self.pressure) {
            (Data::Given { force, f_div }, _, _) => Ok(DataPoint {
                force: Vector3::from(force.eval(&[y[0], y[1], y[2]])),
                f_div: f_div.eval(&[y[0], y[1], y[2]]),
                grad_f_div: ops::grad(s, f_div, y)?,
            }),
            (Data::Manufactured, Some(u), Some(p)) => {
                let lap = match self.operator.kind {
                    OperatorKind::Bochner => ops::bochner_laplacian(s, u, y)?,
                    OperatorKind::Diffusion => {
                        ops::surface_diffusion(s, u, y)? - self.operator.alpha * Vector3::from(u.eval(&[y[0], y[1], y[2]]))
                    }
                };
                Ok(DataPoint {
                    force: ops::grad(s, p, y)? - lap,
                    f_div: ops::div(s, u, y)?,
                    grad_f_div: ops::grad_div(s, u, y)?,
                })
            }
            _ => Err(Error::MissingExactSolution),
        }
    }

    /// Right-hand-side integrands at a point of Γ.
    pub fn load_at(&self, y: &Vector3<f64>) -> Result<LoadPoint> {
        Ok(data_map(&self.data_at(y)?, &self.operator))
    }

    pub fn exact_at(&self, y: &Vector3<f64>) -> Result<ExactPoint> {
        let (Some(u), Some(p)) = (&self.velocity, &self.pressure) else {
            return Err(Error::MissingExactSolution);
        };
        let s = &self.surface;
        Ok(ExactPoint {
            u: Vector3::from(u.eval(&[y[0], y[1], y[2]])),
            grad_u: ops::tangential_jacobian(s, u, y)?,
            p: p.eval(&[y[0], y[1], y[2]]),
            grad_p: ops::grad(s, p, y)?,
        })
    }
}

type ReferenceKey = (String, [u64; 2]);

fn reference_key(problem: &Problem) -> ReferenceKey {
    let params = match problem.surface {
        LevelSetSurface::Torus { major, minor } => [major.to_bits(), minor.to_bits()],
        LevelSetSurface::Sphere { radius } => [radius.to_bits(), 0],
        LevelSetSurface::Dziuk => [0, 0],
    };
    (format!("{:?}|{:?}|{}", problem.velocity, problem.pressure, problem.surface.id()), params)
}

/// `c₀` and reference norms, computed once per exact solution and surface.
fn cached_reference(problem: &Problem) -> Result<(f64, ReferenceNorms)> {
    static CACHE: OnceLock<Mutex<HashMap<ReferenceKey, (f64, ReferenceNorms)>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    let key = reference_key(problem);
    if let Some(v) = cache.lock().unwrap().get(&key) {
        return Ok(*v);
    }
    let v = compute_reference(problem)?;
    cache.lock().unwrap().insert(key, v);
    Ok(v)
}

/// High-order quadrature of `∫p` and the exact-field norms.
pub fn compute_reference(problem: &Problem) -> Result<(f64, ReferenceNorms)> {
    let mesh = build_mesh(&problem.surface, REFERENCE_LEVEL, REFERENCE_GEOM_DEGREE)?;
    let rule = QuadratureRule::with_exactness(REFERENCE_EXACTNESS);
    let [p_int, u2, gu2, p2, gp2] = mesh.integrate(&rule, |pt| {
        let ex = problem.exact_at(&pt.y)?;
        Ok([ex.p, ex.u.norm_squared(), ex.grad_u.norm_squared(), ex.p * ex.p, ex.grad_p.norm_squared()])
    })?;
    Ok((p_int, ReferenceNorms { u_l2: u2.sqrt(), u_h1: gu2.sqrt(), p_l2: p2.sqrt(), p_h1: gp2.sqrt() }))
}
