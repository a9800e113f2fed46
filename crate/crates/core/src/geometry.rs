//! Exact level-set geometry of the built-in test surfaces.
//!
//! All curvature quantities are obtained from the analytic level-set function
//! by hyper-dual differentiation: `n = ∇φ/|∇φ|`, `P = I − n⊗n`,
//! `W = P ∇²φ P / |∇φ|` and the Ricci map `R = tr(W) W − W²`.

use nalgebra::{Matrix3, Matrix4, Vector3, Vector4};

use crate::ad::{self, Scalar, ScalarFn, VectorFn};
use crate::error::{Error, Result};

/// Smallest admissible level-set gradient norm.
pub const MIN_GRADIENT: f64 = 1e-8;

/// Maximum Newton iterations of the closest-point projection.
pub const MAX_PROJECTION_ITERS: usize = 30;

/// Default closest-point tolerance.
pub const PROJECTION_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LevelSetSurface {
    /// `(√(x²+y²) − R)² + z² − r²`
    Torus { major: f64, minor: f64 },
    /// `|x|² − ρ²`
    Sphere { radius: f64 },
    /// `(x − z²)² + y² + z² − 1`
    Dziuk,
}

impl LevelSetSurface {
    pub fn torus(major: f64, minor: f64) -> Self {
        LevelSetSurface::Torus { major, minor }
    }

    pub fn sphere(radius: f64) -> Self {
        LevelSetSurface::Sphere { radius }
    }

    pub fn unit_sphere() -> Self {
        LevelSetSurface::Sphere { radius: 1.0 }
    }

    /// Parse a CLI surface id. `major`/`minor` are used for the torus and
    /// `minor` doubles as the sphere radius.
    pub fn from_id(id: &str, major: f64, minor: f64) -> Result<Self> {
        match id {
            "torus" => {
                if !(major > minor && minor > 0.0) {
                    return Err(Error::Config(format!(
                        "torus needs R > r > 0, got R = {major}, r = {minor}"
                    )));
                }
                Ok(Self::torus(major, minor))
            }
            "sphere" => {
                if minor <= 0.0 {
                    return Err(Error::Config(format!("sphere radius must be positive, got {minor}")));
                }
                Ok(Self::sphere(minor))
            }
            "dziuk" => Ok(LevelSetSurface::Dziuk),
            other => Err(Error::Config(format!("unknown surface '{other}'"))),
        }
    }

    pub fn id(&self) -> &'static str {
        match self {
            LevelSetSurface::Torus { .. } => "torus",
            LevelSetSurface::Sphere { .. } => "sphere",
            LevelSetSurface::Dziuk => "dziuk",
        }
    }

    /// Euler characteristic of the surface topology.
    pub fn euler_characteristic(&self) -> i64 {
        match self {
            LevelSetSurface::Torus { .. } => 0,
            _ => 2,
        }
    }

    #[inline]
    pub fn phi<S: Scalar>(&self, x: &[S; 3]) -> S {
        match *self {
            LevelSetSurface::Torus { major, minor } => {
                let rho = (x[0] * x[0] + x[1] * x[1]).sqrt();
                let d = rho - major;
                d * d + x[2] * x[2] - minor * minor
            }
            LevelSetSurface::Sphere { radius } => {
                x[0] * x[0] + x[1] * x[1] + x[2] * x[2] - radius * radius
            }
            LevelSetSurface::Dziuk => {
                let s = x[0] - x[2] * x[2];
                s * s + x[1] * x[1] + x[2] * x[2] - 1.0
            }
        }
    }

    /// Unit normal `∇φ/|∇φ|` evaluated in any scalar type.
    #[inline]
    pub fn normal<S: Scalar>(&self, x: &[S; 3]) -> [S; 3] {
        let (_, g) = ad::gradient(self, x);
        let inv = S::from_f64(1.0) / ad::dot(&g, &g).sqrt();
        [g[0] * inv, g[1] * inv, g[2] * inv]
    }
}

impl ScalarFn for LevelSetSurface {
    #[inline]
    fn eval<S: Scalar>(&self, x: &[S; 3]) -> S {
        self.phi(x)
    }
}

/// The level-set unit normal as an ambient vector field.
pub struct UnitNormal<'a>(pub &'a LevelSetSurface);

impl VectorFn for UnitNormal<'_> {
    #[inline]
    fn eval<S: Scalar>(&self, x: &[S; 3]) -> [S; 3] {
        self.0.normal(x)
    }
}

/// Pointwise geometry bundle.
#[derive(Clone, Copy, Debug)]
pub struct SurfaceSample {
    pub point: Vector3<f64>,
    pub phi: f64,
    pub grad_phi: Vector3<f64>,
    pub hess_phi: Matrix3<f64>,
    pub normal: Vector3<f64>,
    pub projector: Matrix3<f64>,
    pub weingarten: Matrix3<f64>,
    pub mean_curvature: f64,
    pub ricci: Matrix3<f64>,
}

impl SurfaceSample {
    /// Tangential principal curvatures in ascending order.
    pub fn principal_curvatures(&self) -> [f64; 2] {
        let eig = self.weingarten.symmetric_eigen();
        // drop the eigenvalue whose eigenvector is closest to the normal
        let mut best = 0;
        let mut best_align = -1.0;
        for i in 0..3 {
            let align = eig.eigenvectors.column(i).dot(&self.normal).abs();
            if align > best_align {
                best_align = align;
                best = i;
            }
        }
        let mut k: Vec<f64> = (0..3).filter(|&i| i != best).map(|i| eig.eigenvalues[i]).collect();
        k.sort_by(|a, b| a.total_cmp(b));
        [k[0], k[1]]
    }

    pub fn gauss_curvature(&self) -> f64 {
        let [k1, k2] = self.principal_curvatures();
        k1 * k2
    }
}

/// Evaluate the full geometry bundle at an ambient point.
pub fn eval_surface(surface: &LevelSetSurface, x: &Vector3<f64>) -> Result<SurfaceSample> {
    let p = [x[0], x[1], x[2]];
    let (phi, g, h) = ad::hessian(surface, &p);
    let grad_phi = Vector3::from(g);
    let norm = grad_phi.norm();
    if !(norm >= MIN_GRADIENT) {
        return Err(Error::DegenerateGradient { point: p, norm });
    }
    let hess_phi = Matrix3::from_fn(|i, j| h[i][j]);
    let normal = grad_phi / norm;
    let projector = Matrix3::identity() - normal * normal.transpose();
    let weingarten = projector * hess_phi * projector / norm;
    let mean_curvature = weingarten.trace();
    let ricci = mean_curvature * weingarten - weingarten * weingarten;
    Ok(SurfaceSample {
        point: *x,
        phi,
        grad_phi,
        hess_phi,
        normal,
        projector,
        weingarten,
        mean_curvature,
        ricci,
    })
}

/// Closest-point projection onto the zero level set.
///
/// Damped Newton on `y − x − μ∇φ(y) = 0, φ(y) = 0` in the unknowns `(y, μ)`.
pub fn closest_point(surface: &LevelSetSurface, x: &Vector3<f64>, tol: f64) -> Result<Vector3<f64>> {
    let eval = |y: &Vector3<f64>| {
        let (phi, g, h) = ad::hessian(surface, &[y[0], y[1], y[2]]);
        (phi, Vector3::from(g), Matrix3::from_fn(|i, j| h[i][j]))
    };
    let residual = |y: &Vector3<f64>, mu: f64, phi: f64, g: &Vector3<f64>| {
        let r = y - x - mu * g;
        Vector4::new(r[0], r[1], r[2], phi)
    };

    let (phi0, g0, _) = eval(x);
    let gg = g0.norm_squared();
    if !(gg.sqrt() >= MIN_GRADIENT) {
        return Err(Error::DegenerateGradient { point: [x[0], x[1], x[2]], norm: gg.sqrt() });
    }
    if phi0.abs() <= tol {
        return Ok(*x);
    }
    // move along the gradient onto the zero set; these steps are not the Newton
    // iterations below and only supply a feasible start
    let pull = |mut y: Vector3<f64>| {
        for _ in 0..4 * MAX_PROJECTION_ITERS {
            let (phi, g, _) = eval(&y);
            if phi.abs() <= 0.1 * tol || !(g.norm() >= MIN_GRADIENT) {
                break;
            }
            y -= phi / g.norm_squared() * g;
        }
        y
    };
    let mut y = pull(*x);
    let (mut phi, mut g, mut h) = eval(&y);
    let mut mu = (y - x).dot(&g) / g.norm_squared();
    let mut res = residual(&y, mu, phi, &g);

    for _ in 0..MAX_PROJECTION_ITERS {
        let tangential = (y - x) - (y - x).dot(&g) / g.norm_squared() * g;
        if phi.abs() <= tol && tangential.norm() <= tol {
            return Ok(y);
        }
        let mut jac = Matrix4::zeros();
        let block = Matrix3::identity() - mu * h;
        for i in 0..3 {
            for j in 0..3 {
                jac[(i, j)] = block[(i, j)];
            }
            jac[(i, 3)] = -g[i];
            jac[(3, i)] = g[i];
        }
        let base = res.norm();
        let mut accepted = false;
        if let Some(step) = jac.lu().solve(&(-res)) {
            let mut damping = 1.0;
            while damping >= 0.125 {
                let y_try = y + damping * Vector3::new(step[0], step[1], step[2]);
                let mu_try = mu + damping * step[3];
                let (phi_t, g_t, h_t) = eval(&y_try);
                let res_t = residual(&y_try, mu_try, phi_t, &g_t);
                if res_t.norm() < base {
                    (y, mu, phi, g, h, res) = (y_try, mu_try, phi_t, g_t, h_t, res_t);
                    accepted = true;
                    break;
                }
                damping *= 0.5;
            }
        }
        if !accepted {
            // descent along the surface: tangent-plane step toward x, then back onto
            // the zero set, halved until the distance to x decreases
            let n = g / g.norm();
            let d = x - y;
            let dt = d - d.dot(&n) * n;
            let dist = d.norm();
            let mut theta = 1.0;
            while theta >= 1e-3 {
                let y_try = pull(y + theta * dt);
                if (x - y_try).norm() < dist {
                    y = y_try;
                    break;
                }
                theta *= 0.5;
            }
            (phi, g, h) = eval(&y);
            mu = (y - x).dot(&g) / g.norm_squared();
            res = residual(&y, mu, phi, &g);
        }
    }
    let tangential = (y - x) - (y - x).dot(&g) / g.norm_squared() * g;
    if phi.abs() <= tol && tangential.norm() <= tol {
        return Ok(y);
    }
    Err(Error::NoConvergence { point: [x[0], x[1], x[2]], residual: res.norm() })
}
