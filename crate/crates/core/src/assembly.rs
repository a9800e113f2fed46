//! Assembly of the elliptic velocity–pressure block system.
//!
//! Unknowns are ordered `(w, p, λ)`: interleaved ambient velocity components,
//! pressure, and the scalar multiplier of the pressure mean constraint. All
//! geometric quantities and data are evaluated at the closest point on Γ of
//! each quadrature point of the curved mesh.

use std::sync::Arc;

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fem::basis::Tabulation;
use crate::fem::quadrature::QuadratureRule;
use crate::fem::space::{Arity, FESpace};
use crate::geometry::{self, PROJECTION_TOL};
use crate::mesh::SurfaceMesh;
use crate::problems::Problem;
use crate::sparse::CsrMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OperatorKind {
    /// Bochner Laplacian `−Δ_B`.
    Bochner,
    /// Perturbed surface diffusion `αI − Δ_S`.
    Diffusion,
}

impl OperatorKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "bochner" => Ok(OperatorKind::Bochner),
            "diffusion" => Ok(OperatorKind::Diffusion),
            other => Err(Error::Config(format!("unknown operator '{other}' (expected bochner or diffusion)"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            OperatorKind::Bochner => "bochner",
            OperatorKind::Diffusion => "diffusion",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OperatorConfig {
    pub kind: OperatorKind,
    /// Zeroth-order coefficient, diffusion only.
    pub alpha: f64,
    /// Penalty scaling: the normal-component penalty weight is `η h⁻²`.
    pub eta: f64,
}

impl OperatorConfig {
    pub fn bochner(eta: f64) -> Self {
        OperatorConfig { kind: OperatorKind::Bochner, alpha: 0.0, eta }
    }

    pub fn diffusion(alpha: f64, eta: f64) -> Self {
        OperatorConfig { kind: OperatorKind::Diffusion, alpha, eta }
    }

    /// Factor in front of the Ricci coupling in the pressure equation.
    pub fn ricci_factor(&self) -> f64 {
        match self.kind {
            OperatorKind::Bochner => 1.0,
            OperatorKind::Diffusion => 2.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0) {
            return Err(Error::Config(format!("penalty scaling must be positive, got {}", self.eta)));
        }
        match self.kind {
            OperatorKind::Diffusion if !(self.alpha > 0.0) => {
                Err(Error::Config(format!("diffusion operator needs alpha > 0, got {}", self.alpha)))
            }
            OperatorKind::Bochner if self.alpha != 0.0 => {
                Err(Error::Config("alpha is only used by the diffusion operator".into()))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct AssemblyOptions {
    /// Quadrature exactness; `None` selects `2·max(k_u, k_p, k_geo) + 2`.
    pub exactness: Option<usize>,
    pub parallel: bool,
}

impl Default for AssemblyOptions {
    fn default() -> Self {
        AssemblyOptions { exactness: None, parallel: true }
    }
}

pub fn default_exactness(k_u: usize, k_p: usize, k_geo: usize) -> usize {
    2 * k_u.max(k_p).max(k_geo) + 2
}

/// Assembled blocks, right-hand sides and auxiliary matrices.
#[derive(Clone, Debug)]
pub struct BlockSystem {
    pub operator: OperatorConfig,
    /// Velocity–velocity form including the penalty.
    pub a: CsrMatrix,
    /// Pressure gradient tested with tangential velocities (`3N_u × N_p`).
    pub b: CsrMatrix,
    /// Ricci coupling in the pressure equation (`N_p × 3N_u`).
    pub c: CsrMatrix,
    pub a_p: CsrMatrix,
    /// `∫ q_j`
    pub m: Vec<f64>,
    pub f1: Vec<f64>,
    pub f2: Vec<f64>,
    pub c0: f64,
    /// `∫ Pw · Pv`
    pub mass_t: CsrMatrix,
    pub mass_p: CsrMatrix,
    /// `η h⁻² ∫ (w·n)(v·n)`, already contained in `a`.
    pub penalty: CsrMatrix,
    /// Quadrature-point maximum of `‖P − R‖₂`.
    pub max_p_minus_r: f64,
    /// Quadrature-point maximum of `‖P − ρR‖₂` with `ρ` the Ricci factor.
    pub max_coupling_defect: f64,
    pub h: f64,
}

impl BlockSystem {
    pub fn n_u(&self) -> usize {
        self.a.nrows()
    }

    pub fn n_p(&self) -> usize {
        self.a_p.nrows()
    }

    pub fn n_total(&self) -> usize {
        self.n_u() + self.n_p() + 1
    }

    /// `[[A, B, 0], [−C, A_p, m], [0, mᵀ, 0]]`
    pub fn monolithic(&self) -> CsrMatrix {
        let (nu, np) = (self.n_u(), self.n_p());
        let n = nu + np + 1;
        let mut rows = Vec::with_capacity(n);
        let mut vals = Vec::with_capacity(n);
        for r in 0..nu {
            let (ca, va) = self.a.row(r);
            let (cb, vb) = self.b.row(r);
            rows.push(ca.iter().copied().chain(cb.iter().map(|c| c + nu)).collect::<Vec<_>>());
            vals.push(va.iter().chain(vb).copied().collect::<Vec<_>>());
        }
        for r in 0..np {
            let (cc, vc) = self.c.row(r);
            let (cp, vp) = self.a_p.row(r);
            let mut row: Vec<usize> = cc.to_vec();
            row.extend(cp.iter().map(|c| c + nu));
            row.push(n - 1);
            let mut v: Vec<f64> = vc.iter().map(|x| -x).collect();
            v.extend_from_slice(vp);
            v.push(self.m[r]);
            rows.push(row);
            vals.push(v);
        }
        rows.push((nu..nu + np).collect());
        vals.push(self.m.clone());
        let mut mat = CsrMatrix::from_rows(n, rows);
        let flat: Vec<f64> = vals.into_iter().flatten().collect();
        mat.values_mut().copy_from_slice(&flat);
        mat
    }

    /// `(F₁, F₂, c₀)`
    pub fn rhs(&self) -> Vec<f64> {
        let mut r = Vec::with_capacity(self.n_total());
        r.extend_from_slice(&self.f1);
        r.extend_from_slice(&self.f2);
        r.push(self.c0);
        r
    }

    /// Split a monolithic vector into `(w, p, λ)`.
    pub fn split<'a>(&self, x: &'a [f64]) -> (&'a [f64], &'a [f64], f64) {
        let (w, rest) = x.split_at(self.n_u());
        let (p, l) = rest.split_at(self.n_p());
        (w, p, l[0])
    }

    /// Discrete bilinear form `𝒜_h[(w, p), (v, q)]`.
    pub fn form(&self, w: &[f64], p: &[f64], v: &[f64], q: &[f64]) -> f64 {
        self.a.bilinear(v, w) + self.b.bilinear(v, p) + self.a_p.bilinear(q, p) - self.c.bilinear(q, w)
    }
}

/// Inputs shared by all element kernels.
struct Context<'a> {
    mesh: &'a SurfaceMesh,
    v_u: &'a FESpace,
    v_p: &'a FESpace,
    problem: &'a Problem,
    rule: QuadratureRule,
    tab_geo: Tabulation,
    tab_u: Tabulation,
    tab_p: Tabulation,
    penalty_weight: f64,
}

/// Exact geometry and basis data at one lifted quadrature point.
struct PointData {
    weight: f64,
    n: Vector3<f64>,
    p: Matrix3<f64>,
    ricci: Matrix3<f64>,
    /// Corrected gradients `P(e_c ⊗ ∇_{Γh}Nᵢ)P − (n·e_c Nᵢ) W`, index `3i + c`.
    gc: Vec<Matrix3<f64>>,
    /// Velocity basis values.
    nu: Vec<f64>,
    /// Pressure basis values and discrete tangential gradients.
    mp: Vec<f64>,
    gp: Vec<Vector3<f64>>,
    y: Vector3<f64>,
}

impl Context<'_> {
    fn point(&self, e: usize, q: usize) -> Result<PointData> {
        let map = self.mesh.map_point(e, self.tab_geo.values(q), self.tab_geo.grads(q))?;
        let y = geometry::closest_point(self.mesh.surface(), &map.x, PROJECTION_TOL)
            .map_err(|err| Error::ProjectionFailure(Box::new(err)))?;
        let s = geometry::eval_surface(self.mesh.surface(), &y)?;
        let (n, p, w) = (s.normal, s.projector, s.weingarten);
        let nu = self.tab_u.values(q).to_vec();
        let mut gc = Vec::with_capacity(3 * nu.len());
        for (i, g) in self.tab_u.grads(q).iter().enumerate() {
            let pg = p * map.surface_gradient(*g);
            for c in 0..3 {
                gc.push(p.column(c) * pg.transpose() - w * (n[c] * nu[i]));
            }
        }
        let gp = self.tab_p.grads(q).iter().map(|g| map.surface_gradient(*g)).collect();
        Ok(PointData {
            weight: self.rule.weights[q] * map.measure,
            n,
            p,
            ricci: s.ricci,
            gc,
            nu,
            mp: self.tab_p.values(q).to_vec(),
            gp,
            y,
        })
    }
}

/// Dense element contributions, row-major.
struct Local {
    a: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
    a_p: Vec<f64>,
    mass_t: Vec<f64>,
    mass_p: Vec<f64>,
    penalty: Vec<f64>,
    m: Vec<f64>,
    f1: Vec<f64>,
    f2: Vec<f64>,
    max_p_minus_r: f64,
    max_coupling_defect: f64,
}

fn spectral_norm(m: &Matrix3<f64>) -> f64 {
    m.symmetric_eigen().eigenvalues.iter().fold(0.0, |a: f64, v| a.max(v.abs()))
}

fn local_system(ctx: &Context, e: usize) -> Result<Local> {
    let nu = ctx.v_u.basis().len();
    let np = ctx.v_p.basis().len();
    let nv = 3 * nu;
    let op = &ctx.problem.operator;
    let rf = op.ricci_factor();
    let mut l = Local {
        a: vec![0.0; nv * nv],
        b: vec![0.0; nv * np],
        c: vec![0.0; np * nv],
        a_p: vec![0.0; np * np],
        mass_t: vec![0.0; nv * nv],
        mass_p: vec![0.0; np * np],
        penalty: vec![0.0; nv * nv],
        m: vec![0.0; np],
        f1: vec![0.0; nv],
        f2: vec![0.0; np],
        max_p_minus_r: 0.0,
        max_coupling_defect: 0.0,
    };
    for q in 0..ctx.rule.len() {
        let d = ctx.point(e, q)?;
        let wt = d.weight;
        let load = ctx.problem.load_at(&d.y)?;
        l.max_p_minus_r = l.max_p_minus_r.max(spectral_norm(&(d.p - d.ricci)));
        l.max_coupling_defect = l.max_coupling_defect.max(spectral_norm(&(d.p - d.ricci * rf)));

        let sym: Vec<Matrix3<f64>> = match op.kind {
            OperatorKind::Bochner => Vec::new(),
            OperatorKind::Diffusion => d.gc.iter().map(|g| g + g.transpose()).collect(),
        };
        for r in 0..nv {
            let (i, c) = (r / 3, r % 3);
            for s in 0..nv {
                let (j, dd) = (s / 3, s % 3);
                let nn = d.nu[i] * d.nu[j];
                let elliptic = match op.kind {
                    OperatorKind::Bochner => d.gc[s].dot(&d.gc[r]),
                    OperatorKind::Diffusion => d.gc[s].dot(&sym[r]) + op.alpha * nn * d.p[(c, dd)],
                };
                let pen = nn * d.n[c] * d.n[dd];
                l.a[r * nv + s] += wt * (elliptic + ctx.penalty_weight * pen);
                l.penalty[r * nv + s] += wt * ctx.penalty_weight * pen;
                l.mass_t[r * nv + s] += wt * nn * d.p[(c, dd)];
            }
        }
        let pgrads: Vec<Vector3<f64>> = d.gp.iter().map(|g| d.p * g).collect();
        let rgrads: Vec<Vector3<f64>> = d.gp.iter().map(|g| d.ricci * g).collect();
        for r in 0..nv {
            let (i, c) = (r / 3, r % 3);
            for j in 0..np {
                l.b[r * np + j] += wt * d.nu[i] * pgrads[j][c];
                l.c[j * nv + r] += wt * rf * d.nu[i] * rgrads[j][c];
            }
        }
        for j in 0..np {
            for k in 0..np {
                l.a_p[j * np + k] += wt * d.gp[j].dot(&d.gp[k]);
                l.mass_p[j * np + k] += wt * d.mp[j] * d.mp[k];
            }
        }
        let f_t = d.p * load.velocity_load;
        let flux = d.p * load.pressure_flux;
        for r in 0..nv {
            l.f1[r] += wt * d.nu[r / 3] * f_t[r % 3];
        }
        for j in 0..np {
            l.m[j] += wt * d.mp[j];
            l.f2[j] += wt * (flux.dot(&d.gp[j]) + load.pressure_source * d.mp[j]);
        }
    }
    Ok(l)
}

fn vector_dofs(space: &FESpace, e: usize) -> Vec<usize> {
    space.element_nodes(e).iter().flat_map(|&n| (0..3).map(move |c| 3 * n + c)).collect()
}

fn check_spaces(v_u: &FESpace, v_p: &FESpace, problem: &Problem) -> Result<()> {
    if !Arc::ptr_eq(v_u.mesh(), v_p.mesh()) {
        return Err(Error::SpaceMismatch("velocity and pressure spaces live on different meshes".into()));
    }
    if v_u.arity() != Arity::Vector || v_p.arity() != Arity::Scalar {
        return Err(Error::SpaceMismatch(format!(
            "velocity space must be vector and pressure space scalar, got {:?}/{:?}",
            v_u.arity(),
            v_p.arity()
        )));
    }
    if v_u.mesh().surface() != &problem.surface {
        return Err(Error::SpaceMismatch(format!(
            "mesh surface '{}' differs from problem surface '{}'",
            v_u.mesh().surface().id(),
            problem.surface.id()
        )));
    }
    Ok(())
}

fn context<'a>(v_u: &'a FESpace, v_p: &'a FESpace, problem: &'a Problem, opts: &AssemblyOptions) -> Context<'a> {
    let mesh = v_u.mesh().as_ref();
    let q = opts
        .exactness
        .unwrap_or_else(|| default_exactness(v_u.degree(), v_p.degree(), mesh.geom_degree()));
    let rule = QuadratureRule::with_exactness(q);
    Context {
        mesh,
        v_u,
        v_p,
        problem,
        tab_geo: mesh.geom_basis().tabulate(&rule),
        tab_u: v_u.basis().tabulate(&rule),
        tab_p: v_p.basis().tabulate(&rule),
        rule,
        penalty_weight: problem.operator.eta / (mesh.h() * mesh.h()),
    }
}

/// Elements per parallel batch; local matrices of a batch are scattered in element order.
const BATCH: usize = 512;

fn for_each_local(
    n_elements: usize,
    parallel: bool,
    compute: impl Fn(usize) -> Result<Local> + Sync,
    mut scatter: impl FnMut(usize, Local),
) -> Result<()> {
    let mut start = 0;
    while start < n_elements {
        let end = (start + BATCH).min(n_elements);
        let locals: Vec<Local> = if parallel {
            (start..end).into_par_iter().map(&compute).collect::<Result<_>>()?
        } else {
            (start..end).map(&compute).collect::<Result<_>>()?
        };
        for (offset, local) in locals.into_iter().enumerate() {
            scatter(start + offset, local);
        }
        start = end;
    }
    Ok(())
}

fn scatter_dense(m: &mut CsrMatrix, rows: &[usize], cols: &[usize], vals: &[f64]) {
    for (a, &r) in rows.iter().enumerate() {
        for (b, &c) in cols.iter().enumerate() {
            m.add(r, c, vals[a * cols.len() + b]);
        }
    }
}

/// Assemble every block of the discrete elliptic system.
pub fn assemble_system(
    v_u: &FESpace,
    v_p: &FESpace,
    problem: &Problem,
    opts: &AssemblyOptions,
) -> Result<BlockSystem> {
    check_spaces(v_u, v_p, problem)?;
    problem.operator.validate()?;
    let ctx = context(v_u, v_p, problem, opts);
    let mesh = ctx.mesh;
    let ne = mesh.n_elements();
    let (nun, npn) = (v_u.n_nodes(), v_p.n_nodes());
    let u_nodes = |e: usize| v_u.element_nodes(e).to_vec();
    let p_nodes = |e: usize| v_p.element_nodes(e).to_vec();
    let vv = CsrMatrix::from_connectivity(nun, 3, u_nodes, nun, 3, u_nodes, ne);
    let pp = CsrMatrix::from_connectivity(npn, 1, p_nodes, npn, 1, p_nodes, ne);
    let mut sys = BlockSystem {
        operator: problem.operator,
        a: vv.clone(),
        b: CsrMatrix::from_connectivity(nun, 3, u_nodes, npn, 1, p_nodes, ne),
        c: CsrMatrix::from_connectivity(npn, 1, p_nodes, nun, 3, u_nodes, ne),
        a_p: pp.clone(),
        m: vec![0.0; v_p.n_dofs()],
        f1: vec![0.0; v_u.n_dofs()],
        f2: vec![0.0; v_p.n_dofs()],
        c0: problem.c0(),
        mass_t: vv.clone(),
        mass_p: pp,
        penalty: vv,
        max_p_minus_r: 0.0,
        max_coupling_defect: 0.0,
        h: mesh.h(),
    };
    for_each_local(
        ne,
        opts.parallel,
        |e| local_system(&ctx, e),
        |e, l| {
            let ru = vector_dofs(v_u, e);
            let rp = v_p.element_nodes(e);
            scatter_dense(&mut sys.a, &ru, &ru, &l.a);
            scatter_dense(&mut sys.mass_t, &ru, &ru, &l.mass_t);
            scatter_dense(&mut sys.penalty, &ru, &ru, &l.penalty);
            scatter_dense(&mut sys.b, &ru, rp, &l.b);
            scatter_dense(&mut sys.c, rp, &ru, &l.c);
            scatter_dense(&mut sys.a_p, rp, rp, &l.a_p);
            scatter_dense(&mut sys.mass_p, rp, rp, &l.mass_p);
            for (k, &r) in ru.iter().enumerate() {
                sys.f1[r] += l.f1[k];
            }
            for (k, &r) in rp.iter().enumerate() {
                sys.f2[r] += l.f2[k];
                sys.m[r] += l.m[k];
            }
            sys.max_p_minus_r = sys.max_p_minus_r.max(l.max_p_minus_r);
            sys.max_coupling_defect = sys.max_coupling_defect.max(l.max_coupling_defect);
        },
    )?;
    Ok(sys)
}

/// Velocity and pressure parts of a single shape function at a point.
#[derive(Clone, Copy)]
struct Shape {
    value: Vector3<f64>,
    grad: Matrix3<f64>,
    grad_p: Vector3<f64>,
}

/// Pointwise density of `𝒜_h[W, V]`.
fn form_density(d: &PointData, op: &OperatorConfig, penalty_weight: f64, w: &Shape, v: &Shape) -> f64 {
    let elliptic = match op.kind {
        OperatorKind::Bochner => w.grad.dot(&v.grad),
        OperatorKind::Diffusion => w.grad.dot(&(v.grad + v.grad.transpose())) + op.alpha * (d.p * w.value).dot(&(d.p * v.value)),
    };
    let penalty = penalty_weight * w.value.dot(&d.n) * v.value.dot(&d.n);
    let b = w.grad_p.dot(&(d.p * v.value));
    let a = w.grad_p.dot(&v.grad_p);
    let c = op.ricci_factor() * (d.ricci * w.value).dot(&v.grad_p);
    elliptic + penalty + b + a - c
}

/// Matrix of the adjoint form `(V, W) ↦ 𝒜_h[W, V]` over the `(w, p)` unknowns.
///
/// Rows are indexed by the trial function `W` of the primal form and columns
/// by its test function `V`, so the result equals the transpose of the primal
/// `[[A, B], [−C, A_p]]`. It is assembled from the pointwise form density and
/// shares no element kernel with [`assemble_system`].
pub fn assemble_adjoint(v_u: &FESpace, v_p: &FESpace, problem: &Problem, opts: &AssemblyOptions) -> Result<CsrMatrix> {
    check_spaces(v_u, v_p, problem)?;
    let ctx = context(v_u, v_p, problem, opts);
    let nu_dofs = v_u.n_dofs();
    let n = nu_dofs + v_p.n_dofs();
    let mut triplets = Vec::new();
    for e in 0..ctx.mesh.n_elements() {
        let mut dofs = vector_dofs(v_u, e);
        dofs.extend(v_p.element_nodes(e).iter().map(|&j| nu_dofs + j));
        let nloc = dofs.len();
        let mut local = vec![0.0; nloc * nloc];
        for q in 0..ctx.rule.len() {
            let d = ctx.point(e, q)?;
            let shapes: Vec<Shape> = (0..nloc)
                .map(|k| {
                    if k < d.gc.len() {
                        let mut value = Vector3::zeros();
                        value[k % 3] = d.nu[k / 3];
                        Shape { value, grad: d.gc[k], grad_p: Vector3::zeros() }
                    } else {
                        let j = k - d.gc.len();
                        Shape { value: Vector3::zeros(), grad: Matrix3::zeros(), grad_p: d.gp[j] }
                    }
                })
                .collect();
            for (r, w) in shapes.iter().enumerate() {
                for (s, v) in shapes.iter().enumerate() {
                    local[r * nloc + s] += d.weight * form_density(&d, &problem.operator, ctx.penalty_weight, w, v);
                }
            }
        }
        for (r, &gr) in dofs.iter().enumerate() {
            for (s, &gs) in dofs.iter().enumerate() {
                triplets.push((gr, gs, local[r * nloc + s]));
            }
        }
    }
    Ok(CsrMatrix::from_triplets(n, n, &triplets))
}

/// Both sides of the discrete Gårding inequality for one trial vector.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GardingTrial {
    /// `𝒜_h[W, W]`
    pub lhs: f64,
    /// `c₁‖W‖²_{1h,1} − c₂‖W_t‖²_{0,0}`
    pub rhs: f64,
}

impl GardingTrial {
    /// `lhs ≥ rhs` up to rounding relative to the energy scale.
    pub fn holds(&self) -> bool {
        self.lhs >= self.rhs - 1e-12 * (1.0 + self.lhs.abs() + self.rhs.abs())
    }
}

/// Evaluate `𝒜_h[W, W] ≥ ½‖W‖²_{1h,1} − ½‖P − ρR‖²_{0,∞}‖W_t‖²_{0,0}` for each trial `(w, p)`.
pub fn garding_check(sys: &BlockSystem, trials: &[(Vec<f64>, Vec<f64>)]) -> Vec<GardingTrial> {
    let c1 = 0.5;
    let c2 = 0.5 * sys.max_coupling_defect.powi(2);
    trials
        .iter()
        .map(|(w, p)| {
            let energy = sys.a.bilinear(w, w) + sys.a_p.bilinear(p, p);
            let l2 = sys.mass_t.bilinear(w, w) + sys.mass_p.bilinear(p, p);
            GardingTrial { lhs: sys.form(w, p, w, p), rhs: c1 * energy - c2 * l2 }
        })
        .collect()
}
