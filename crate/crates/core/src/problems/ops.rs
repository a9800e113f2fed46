//! Surface differential operators applied to closed-form fields.
//!
//! Every operator projects with the exact level-set `P`, so only tangential
//! derivatives of the ambient extension enter and the result on Γ does not
//! depend on how a field is continued off the surface. Derivatives come from
//! nesting [`crate::ad::Dual3`]; no finite differences are involved.

use nalgebra::{Matrix3, Vector3};

use crate::ad::{self, dot, mat_mul, projector, MatrixFn, Scalar, ScalarFn, VectorFn};
use crate::error::{Error, Result};
use crate::geometry::{self, LevelSetSurface, MIN_GRADIENT};

/// `∇_Γ f = P∇f` as an ambient vector field.
pub struct TangentialGradient<'a, F: ?Sized> {
    pub surface: &'a LevelSetSurface,
    pub f: &'a F,
}

impl<F: ScalarFn + ?Sized> VectorFn for TangentialGradient<'_, F> {
    #[inline]
    fn eval<S: Scalar>(&self, x: &[S; 3]) -> [S; 3] {
        let (_, g) = ad::gradient(self.f, x);
        let n = self.surface.normal(x);
        let gn = dot(&g, &n);
        [g[0] - gn * n[0], g[1] - gn * n[1], g[2] - gn * n[2]]
    }
}

/// `∇_Γ v = P Dv P` as an ambient matrix field.
pub struct TangentialJacobian<'a, V: ?Sized> {
    pub surface: &'a LevelSetSurface,
    pub v: &'a V,
}

impl<V: VectorFn + ?Sized> MatrixFn for TangentialJacobian<'_, V> {
    #[inline]
    fn eval<S: Scalar>(&self, x: &[S; 3]) -> [[S; 3]; 3] {
        let (_, j) = ad::jacobian(self.v, x);
        let p = projector(&self.surface.normal(x));
        mat_mul(&mat_mul(&p, &j), &p)
    }
}

/// `E_s(v) = ∇_Γ v + ∇_Γ vᵀ` as an ambient matrix field.
pub struct SymmetricGradient<'a, V: ?Sized> {
    pub surface: &'a LevelSetSurface,
    pub v: &'a V,
}

impl<V: VectorFn + ?Sized> MatrixFn for SymmetricGradient<'_, V> {
    #[inline]
    fn eval<S: Scalar>(&self, x: &[S; 3]) -> [[S; 3]; 3] {
        let g = TangentialJacobian { surface: self.surface, v: self.v }.eval(x);
        std::array::from_fn(|i| std::array::from_fn(|j| g[i][j] + g[j][i]))
    }
}

/// `div_Γ v = tr(P Dv)` as an ambient scalar field.
pub struct Divergence<'a, V: ?Sized> {
    pub surface: &'a LevelSetSurface,
    pub v: &'a V,
}

impl<V: VectorFn + ?Sized> ScalarFn for Divergence<'_, V> {
    #[inline]
    fn eval<S: Scalar>(&self, x: &[S; 3]) -> S {
        let (_, j) = ad::jacobian(self.v, x);
        let n = self.surface.normal(x);
        // tr(P J) = tr J − n·J n
        let jn = ad::mat_vec(&j, &n);
        j[0][0] + j[1][1] + j[2][2] - dot(&n, &jn)
    }
}

fn arr(y: &Vector3<f64>) -> [f64; 3] {
    [y[0], y[1], y[2]]
}

fn checked_projector(surface: &LevelSetSurface, y: &Vector3<f64>) -> Result<Matrix3<f64>> {
    let (_, g) = ad::gradient(surface, &arr(y));
    let norm = dot(&g, &g).sqrt();
    if !(norm >= MIN_GRADIENT) {
        return Err(Error::DegenerateGradient { point: arr(y), norm });
    }
    let n = Vector3::from(g) / norm;
    Ok(Matrix3::identity() - n * n.transpose())
}

/// `∇_Γ f` at a point of Γ.
pub fn grad<F: ScalarFn + ?Sized>(surface: &LevelSetSurface, f: &F, y: &Vector3<f64>) -> Result<Vector3<f64>> {
    let p = checked_projector(surface, y)?;
    let (_, g) = ad::gradient(f, &arr(y));
    Ok(p * Vector3::from(g))
}

/// `∇_Γ v = P Dv P`.
pub fn tangential_jacobian<V: VectorFn + ?Sized>(
    surface: &LevelSetSurface,
    v: &V,
    y: &Vector3<f64>,
) -> Result<Matrix3<f64>> {
    checked_projector(surface, y)?;
    let m = TangentialJacobian { surface, v }.eval(&arr(y));
    Ok(Matrix3::from_fn(|i, j| m[i][j]))
}

/// `E_s(v)`.
pub fn symmetric_gradient<V: VectorFn + ?Sized>(
    surface: &LevelSetSurface,
    v: &V,
    y: &Vector3<f64>,
) -> Result<Matrix3<f64>> {
    let g = tangential_jacobian(surface, v, y)?;
    Ok(g + g.transpose())
}

/// `div_Γ v`.
pub fn div<V: VectorFn + ?Sized>(surface: &LevelSetSurface, v: &V, y: &Vector3<f64>) -> Result<f64> {
    checked_projector(surface, y)?;
    Ok(Divergence { surface, v }.eval(&arr(y)))
}

/// `Δ_Γ f = div_Γ ∇_Γ f`.
pub fn laplace_beltrami<F: ScalarFn + ?Sized>(surface: &LevelSetSurface, f: &F, y: &Vector3<f64>) -> Result<f64> {
    div(surface, &TangentialGradient { surface, f }, y)
}

/// Row-wise tangential divergence `(div_Γ M)ᵢ = Σⱼ div_Γ(Mᵢⱼ eⱼ)` of a matrix field.
pub fn matrix_divergence<M: MatrixFn + ?Sized>(
    surface: &LevelSetSurface,
    m: &M,
    y: &Vector3<f64>,
) -> Result<Vector3<f64>> {
    let p = checked_projector(surface, y)?;
    let (_, d) = ad::matrix_derivative(m, &arr(y));
    let mut out = Vector3::zeros();
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                out[i] += d[k][i][j] * p[(k, j)];
            }
        }
    }
    Ok(out)
}

/// `Δ_B v = P div_Γ ∇_Γ v`.
pub fn bochner_laplacian<V: VectorFn + ?Sized>(
    surface: &LevelSetSurface,
    v: &V,
    y: &Vector3<f64>,
) -> Result<Vector3<f64>> {
    let p = checked_projector(surface, y)?;
    Ok(p * matrix_divergence(surface, &TangentialJacobian { surface, v }, y)?)
}

/// `Δ_S v = P div_Γ E_s(v)`.
pub fn surface_diffusion<V: VectorFn + ?Sized>(
    surface: &LevelSetSurface,
    v: &V,
    y: &Vector3<f64>,
) -> Result<Vector3<f64>> {
    let p = checked_projector(surface, y)?;
    Ok(p * matrix_divergence(surface, &SymmetricGradient { surface, v }, y)?)
}

/// `∇_Γ div_Γ v`.
pub fn grad_div<V: VectorFn + ?Sized>(surface: &LevelSetSurface, v: &V, y: &Vector3<f64>) -> Result<Vector3<f64>> {
    grad(surface, &Divergence { surface, v }, y)
}

/// `R v` with the exact Ricci map.
pub fn ricci_apply<V: VectorFn + ?Sized>(surface: &LevelSetSurface, v: &V, y: &Vector3<f64>) -> Result<Vector3<f64>> {
    let s = geometry::eval_surface(surface, y)?;
    Ok(s.ricci * Vector3::from(v.eval(&arr(y))))
}
