//! Error norms, experimental orders of convergence and curvature diagnostics.

use std::sync::Arc;

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;

use crate::assembly::default_exactness;
use crate::error::{Error, Result};
use crate::fem::quadrature::QuadratureRule;
use crate::fem::space::{Arity, FESpace};
use crate::geometry::{self, SurfaceSample};
use crate::mesh::{LiftedPoint, SurfaceMesh};
use crate::problems::Problem;

/// Relative errors of one discrete solution.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ErrorNorms {
    pub eu_l2: f64,
    pub eu_h1: f64,
    pub ep_l2: f64,
    pub ep_h1: f64,
}

impl ErrorNorms {
    pub fn to_array(self) -> [f64; 4] {
        [self.eu_l2, self.eu_h1, self.ep_l2, self.ep_h1]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        ErrorNorms { eu_l2: a[0], eu_h1: a[1], ep_l2: a[2], ep_h1: a[3] }
    }
}

/// One row of a convergence table. `rates` is `None` on the first level.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorRecord {
    pub level: usize,
    pub dofs: usize,
    pub errors: ErrorNorms,
    pub rates: Option<ErrorNorms>,
}

/// Discrete fields and exact geometry at one lifted quadrature point.
pub struct FieldPoint<'a> {
    pub point: &'a LiftedPoint,
    pub sample: SurfaceSample,
    pub w: Vector3<f64>,
    /// `P(∇_{Γh} w)P − (n·w)W`
    pub grad_w: Matrix3<f64>,
    pub p: f64,
    pub grad_p: Vector3<f64>,
}

/// `Σ_T Σ_q weight · f` over the fields `(w, p)`, summed in element order.
pub fn integrate_fields<const N: usize>(
    v_u: &FESpace,
    v_p: &FESpace,
    w: &[f64],
    p: &[f64],
    exactness: usize,
    f: impl Fn(&FieldPoint) -> Result<[f64; N]> + Sync,
) -> Result<[f64; N]> {
    if !Arc::ptr_eq(v_u.mesh(), v_p.mesh()) || v_u.arity() != Arity::Vector || v_p.arity() != Arity::Scalar {
        return Err(Error::SpaceMismatch("expected vector velocity and scalar pressure spaces on one mesh".into()));
    }
    if w.len() != v_u.n_dofs() || p.len() != v_p.n_dofs() {
        return Err(Error::SpaceMismatch(format!(
            "coefficient lengths {}/{} do not match spaces {}/{}",
            w.len(),
            p.len(),
            v_u.n_dofs(),
            v_p.n_dofs()
        )));
    }
    let mesh = v_u.mesh();
    let rule = QuadratureRule::with_exactness(exactness);
    let tab_geo = mesh.geom_basis().tabulate(&rule);
    let tab_u = v_u.basis().tabulate(&rule);
    let tab_p = v_p.basis().tabulate(&rule);
    let partial: Vec<[f64; N]> = (0..mesh.n_elements())
        .into_par_iter()
        .map(|e| {
            let mut acc = [0.0; N];
            for pt in mesh.lifted_points(e, &rule, &tab_geo)? {
                let sample = geometry::eval_surface(mesh.surface(), &pt.y)?;
                let q = pt.q;
                let wv = v_u.vector_value(e, w, tab_u.values(q));
                let g = v_u.vector_gradient(e, w, &pt.map, tab_u.grads(q));
                let (pr, n, wein) = (sample.projector, sample.normal, sample.weingarten);
                let grad_w = pr * g * pr - wein * n.dot(&wv);
                let fp = FieldPoint {
                    point: &pt,
                    w: wv,
                    grad_w,
                    p: v_p.scalar_value(e, p, tab_p.values(q)),
                    grad_p: v_p.scalar_gradient(e, p, &pt.map, tab_p.grads(q)),
                    sample,
                };
                let v = f(&fp)?;
                for i in 0..N {
                    acc[i] += pt.weight * v[i];
                }
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let mut total = [0.0; N];
    for part in partial {
        for i in 0..N {
            total[i] += part[i];
        }
    }
    Ok(total)
}

/// Relative velocity and pressure errors against the problem's exact solution.
///
/// The velocity L² error only sees the tangential part `P(u − w_h)`; the H¹
/// error compares `∇_Γ u` with the Weingarten-corrected discrete gradient.
pub fn compute_errors(problem: &Problem, v_u: &FESpace, v_p: &FESpace, w: &[f64], p: &[f64]) -> Result<ErrorNorms> {
    let norms = problem.reference_norms()?;
    let q = default_exactness(v_u.degree(), v_p.degree(), v_u.mesh().geom_degree());
    let [u2, gu2, p2, gp2] = integrate_fields(v_u, v_p, w, p, q, |fp| {
        let ex = problem.exact_at(&fp.point.y)?;
        let pr = fp.sample.projector;
        Ok([
            (pr * (ex.u - fp.w)).norm_squared(),
            (ex.grad_u - fp.grad_w).norm_squared(),
            (ex.p - fp.p).powi(2),
            (ex.grad_p - pr * fp.grad_p).norm_squared(),
        ])
    })?;
    Ok(ErrorNorms {
        eu_l2: u2.sqrt() / norms.u_l2,
        eu_h1: gu2.sqrt() / norms.u_h1,
        ep_l2: p2.sqrt() / norms.p_l2,
        ep_h1: gp2.sqrt() / norms.p_h1,
    })
}

/// `‖div_{Γh} w_h‖` with `div_{Γh} w_h = tr(P(∇_{Γh} w_h)P − (n·w_h)W)`, and `‖P w_h‖`.
pub fn divergence_norms(v_u: &FESpace, v_p: &FESpace, w: &[f64], p: &[f64]) -> Result<(f64, f64)> {
    let q = default_exactness(v_u.degree(), v_p.degree(), v_u.mesh().geom_degree());
    let [d2, u2] = integrate_fields(v_u, v_p, w, p, q, |fp| {
        Ok([fp.grad_w.trace().powi(2), (fp.sample.projector * fp.w).norm_squared()])
    })?;
    Ok((d2.sqrt(), u2.sqrt()))
}

/// `log(e_{ℓ−1}/e_ℓ) / log 2` for consecutive entries.
pub fn eoc(errors: &[f64]) -> Result<Vec<f64>> {
    if errors.len() < 2 {
        return Err(Error::InsufficientLevels(errors.len()));
    }
    Ok(errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect())
}

/// Fill in per-level rates from consecutive rows.
pub fn eoc_table(records: &mut [ErrorRecord]) {
    for i in 1..records.len() {
        let (a, b) = (records[i - 1].errors.to_array(), records[i].errors.to_array());
        records[i].rates = Some(ErrorNorms::from_array(std::array::from_fn(|k| (a[k] / b[k]).log2())));
    }
    if let Some(first) = records.first_mut() {
        first.rates = None;
    }
}

/// Least-squares slope of `−log₂ e` against the level over the last (up to) three levels.
pub fn least_squares_rate(levels: &[usize], errors: &[f64]) -> Result<f64> {
    if levels.len() != errors.len() || levels.len() < 2 {
        return Err(Error::InsufficientLevels(levels.len().min(errors.len())));
    }
    let start = levels.len().saturating_sub(3);
    let xs: Vec<f64> = levels[start..].iter().map(|&l| l as f64).collect();
    let ys: Vec<f64> = errors[start..].iter().map(|e| -e.log2()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurvatureDiagnostics {
    /// `‖P − R‖_{0,∞}` over quadrature points.
    pub max_p_minus_r: f64,
    /// Largest `|tr W|`.
    pub max_mean_curvature: f64,
    pub min_principal: f64,
    pub max_principal: f64,
}

/// Quadrature-point extrema of the exact curvature quantities over a mesh.
pub fn curvature_diagnostics(mesh: &SurfaceMesh, exactness: usize) -> Result<CurvatureDiagnostics> {
    let rule = QuadratureRule::with_exactness(exactness);
    let tab = mesh.geom_basis().tabulate(&rule);
    let per_element: Vec<[f64; 4]> = (0..mesh.n_elements())
        .into_par_iter()
        .map(|e| {
            let mut acc = [0.0, 0.0, f64::INFINITY, f64::NEG_INFINITY];
            for pt in mesh.lifted_points(e, &rule, &tab)? {
                let s = geometry::eval_surface(mesh.surface(), &pt.y)?;
                let d = s.projector - s.ricci;
                let norm = d.symmetric_eigen().eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                let [k1, k2] = s.principal_curvatures();
                acc[0] = acc[0].max(norm);
                acc[1] = acc[1].max(s.mean_curvature.abs());
                acc[2] = acc[2].min(k1.min(k2));
                acc[3] = acc[3].max(k1.max(k2));
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let mut out = [0.0, 0.0, f64::INFINITY, f64::NEG_INFINITY];
    for a in per_element {
        out[0] = out[0].max(a[0]);
        out[1] = out[1].max(a[1]);
        out[2] = out[2].min(a[2]);
        out[3] = out[3].max(a[3]);
    }
    Ok(CurvatureDiagnostics { max_p_minus_r: out[0], max_mean_curvature: out[1], min_principal: out[2], max_principal: out[3] })
}
