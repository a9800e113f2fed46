//! Forward-mode automatic differentiation in three ambient directions.
//!
//! [`Dual3`] carries a value and its three partial derivatives. Nesting it
//! (`Dual3<Dual3<f64>>`) yields hyper-dual numbers whose mixed infinitesimal
//! parts are exact second derivatives; a third level gives third derivatives.
//! Every closed-form field in this crate is written once against the
//! [`Scalar`] trait and differentiated by instantiating it with the nested
//! type that the requested derivative order needs.

use std::fmt::Debug;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

/// Real-like number type the closed-form fields are generic over.
pub trait Scalar:
    Copy
    + Debug
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
{
    fn from_f64(v: f64) -> Self;
    /// Innermost real part.
    fn real(&self) -> f64;
    fn sqrt(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn exp(self) -> Self;
    fn powi(self, n: i32) -> Self;

    #[inline]
    fn zero() -> Self {
        Self::from_f64(0.0)
    }
}

impl Scalar for f64 {
    #[inline]
    fn from_f64(v: f64) -> Self {
        v
    }
    #[inline]
    fn real(&self) -> f64 {
        *self
    }
    #[inline]
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    #[inline]
    fn sin(self) -> Self {
        f64::sin(self)
    }
    #[inline]
    fn cos(self) -> Self {
        f64::cos(self)
    }
    #[inline]
    fn exp(self) -> Self {
        f64::exp(self)
    }
    #[inline]
    fn powi(self, n: i32) -> Self {
        f64::powi(self, n)
    }
}

/// First-order dual number in three directions over an arbitrary [`Scalar`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dual3<T> {
    pub re: T,
    pub eps: [T; 3],
}

impl<T: Scalar> Dual3<T> {
    #[inline]
    pub fn constant(re: T) -> Self {
        Dual3 { re, eps: [T::zero(); 3] }
    }

    /// Independent variable along ambient direction `dir`.
    #[inline]
    pub fn variable(re: T, dir: usize) -> Self {
        let mut eps = [T::zero(); 3];
        eps[dir] = T::from_f64(1.0);
        Dual3 { re, eps }
    }

    #[inline]
    fn chain(self, value: T, slope: T) -> Self {
        Dual3 {
            re: value,
            eps: [self.eps[0] * slope, self.eps[1] * slope, self.eps[2] * slope],
        }
    }
}

impl<T: Scalar> Add for Dual3<T> {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Dual3 {
            re: self.re + o.re,
            eps: [self.eps[0] + o.eps[0], self.eps[1] + o.eps[1], self.eps[2] + o.eps[2]],
        }
    }
}

impl<T: Scalar> Sub for Dual3<T> {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Dual3 {
            re: self.re - o.re,
            eps: [self.eps[0] - o.eps[0], self.eps[1] - o.eps[1], self.eps[2] - o.eps[2]],
        }
    }
}

impl<T: Scalar> Mul for Dual3<T> {
    type Output = Self;
    #[inline]
    fn mul(self, o: Self) -> Self {
        Dual3 {
            re: self.re * o.re,
            eps: [
                self.re * o.eps[0] + self.eps[0] * o.re,
                self.re * o.eps[1] + self.eps[1] * o.re,
                self.re * o.eps[2] + self.eps[2] * o.re,
            ],
        }
    }
}

impl<T: Scalar> Div for Dual3<T> {
    type Output = Self;
    #[inline]
    fn div(self, o: Self) -> Self {
        let inv = T::from_f64(1.0) / o.re;
        let q = self.re * inv;
        Dual3 {
            re: q,
            eps: [
                (self.eps[0] - q * o.eps[0]) * inv,
                (self.eps[1] - q * o.eps[1]) * inv,
                (self.eps[2] - q * o.eps[2]) * inv,
            ],
        }
    }
}

impl<T: Scalar> Neg for Dual3<T> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Dual3 { re: -self.re, eps: [-self.eps[0], -self.eps[1], -self.eps[2]] }
    }
}

impl<T: Scalar> Add<f64> for Dual3<T> {
    type Output = Self;
    #[inline]
    fn add(self, o: f64) -> Self {
        Dual3 { re: self.re + o, eps: self.eps }
    }
}

impl<T: Scalar> Sub<f64> for Dual3<T> {
    type Output = Self;
    #[inline]
    fn sub(self, o: f64) -> Self {
        Dual3 { re: self.re - o, eps: self.eps }
    }
}

impl<T: Scalar> Mul<f64> for Dual3<T> {
    type Output = Self;
    #[inline]
    fn mul(self, o: f64) -> Self {
        Dual3 { re: self.re * o, eps: [self.eps[0] * o, self.eps[1] * o, self.eps[2] * o] }
    }
}

impl<T: Scalar> Div<f64> for Dual3<T> {
    type Output = Self;
    #[inline]
    fn div(self, o: f64) -> Self {
        self * (1.0 / o)
    }
}

impl<T: Scalar> AddAssign for Dual3<T> {
    #[inline]
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl<T: Scalar> SubAssign for Dual3<T> {
    #[inline]
    fn sub_assign(&mut self, o: Self) {
        *self = *self - o;
    }
}

impl<T: Scalar> MulAssign for Dual3<T> {
    #[inline]
    fn mul_assign(&mut self, o: Self) {
        *self = *self * o;
    }
}

impl<T: Scalar> Scalar for Dual3<T> {
    #[inline]
    fn from_f64(v: f64) -> Self {
        Dual3::constant(T::from_f64(v))
    }
    #[inline]
    fn real(&self) -> f64 {
        self.re.real()
    }
    #[inline]
    fn sqrt(self) -> Self {
        let s = self.re.sqrt();
        self.chain(s, T::from_f64(0.5) / s)
    }
    #[inline]
    fn sin(self) -> Self {
        self.chain(self.re.sin(), self.re.cos())
    }
    #[inline]
    fn cos(self) -> Self {
        self.chain(self.re.cos(), -self.re.sin())
    }
    #[inline]
    fn exp(self) -> Self {
        let e = self.re.exp();
        self.chain(e, e)
    }
    #[inline]
    fn powi(self, n: i32) -> Self {
        match n {
            0 => Self::from_f64(1.0),
            1 => self,
            _ => {
                let lower = self.re.powi(n - 1);
                self.chain(lower * self.re, lower * (n as f64))
            }
        }
    }
}

/// Ambient scalar field `R³ → R`, differentiable to any order by nesting.
pub trait ScalarFn {
    fn eval<S: Scalar>(&self, x: &[S; 3]) -> S;
}

/// Ambient vector field `R³ → R³`.
pub trait VectorFn {
    fn eval<S: Scalar>(&self, x: &[S; 3]) -> [S; 3];
}

/// Ambient matrix field `R³ → R³ˣ³`.
pub trait MatrixFn {
    fn eval<S: Scalar>(&self, x: &[S; 3]) -> [[S; 3]; 3];
}

#[inline]
pub fn seed<S: Scalar>(x: &[S; 3]) -> [Dual3<S>; 3] {
    [Dual3::variable(x[0], 0), Dual3::variable(x[1], 1), Dual3::variable(x[2], 2)]
}

/// Value and ambient gradient of a scalar field.
#[inline]
pub fn gradient<S: Scalar, F: ScalarFn + ?Sized>(f: &F, x: &[S; 3]) -> (S, [S; 3]) {
    let d = f.eval(&seed(x));
    (d.re, d.eps)
}

/// Value and Jacobian `J[i][k] = ∂ₖ fᵢ` of a vector field.
#[inline]
pub fn jacobian<S: Scalar, F: VectorFn + ?Sized>(f: &F, x: &[S; 3]) -> ([S; 3], [[S; 3]; 3]) {
    let d = f.eval(&seed(x));
    ([d[0].re, d[1].re, d[2].re], [d[0].eps, d[1].eps, d[2].eps])
}

/// Value and partial derivatives `D[k][i][j] = ∂ₖ Mᵢⱼ` of a matrix field.
#[inline]
pub fn matrix_derivative<S: Scalar, F: MatrixFn + ?Sized>(
    f: &F,
    x: &[S; 3],
) -> ([[S; 3]; 3], [[[S; 3]; 3]; 3]) {
    let d = f.eval(&seed(x));
    let mut value = [[S::zero(); 3]; 3];
    let mut deriv = [[[S::zero(); 3]; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            value[i][j] = d[i][j].re;
            for k in 0..3 {
                deriv[k][i][j] = d[i][j].eps[k];
            }
        }
    }
    (value, deriv)
}

/// Gradient of a scalar field viewed as a vector field (used for Hessians).
pub struct GradientOf<'a, F: ?Sized>(pub &'a F);

impl<F: ScalarFn + ?Sized> VectorFn for GradientOf<'_, F> {
    #[inline]
    fn eval<S: Scalar>(&self, x: &[S; 3]) -> [S; 3] {
        gradient(self.0, x).1
    }
}

/// Value, gradient and Hessian of a scalar field at an `f64` point.
pub fn hessian<F: ScalarFn + ?Sized>(f: &F, x: &[f64; 3]) -> (f64, [f64; 3], [[f64; 3]; 3]) {
    let d = f.eval(&seed(&seed(x)));
    let grad = [d.re.eps[0], d.re.eps[1], d.re.eps[2]];
    let mut h = [[0.0; 3]; 3];
    for (i, row) in h.iter_mut().enumerate() {
        for (j, hij) in row.iter_mut().enumerate() {
            *hij = d.eps[i].eps[j];
        }
    }
    (d.re.re, grad, h)
}

#[inline]
pub fn dot<S: Scalar>(a: &[S; 3], b: &[S; 3]) -> S {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Tangential projector `I − n⊗n`.
#[inline]
pub fn projector<S: Scalar>(n: &[S; 3]) -> [[S; 3]; 3] {
    let mut p = [[S::zero(); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            p[i][j] = -(n[i] * n[j]);
        }
        p[i][i] += S::from_f64(1.0);
    }
    p
}

#[inline]
pub fn mat_vec<S: Scalar>(m: &[[S; 3]; 3], v: &[S; 3]) -> [S; 3] {
    [dot(&m[0], v), dot(&m[1], v), dot(&m[2], v)]
}

#[inline]
pub fn mat_mul<S: Scalar>(a: &[[S; 3]; 3], b: &[[S; 3]; 3]) -> [[S; 3]; 3] {
    let mut c = [[S::zero(); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
        }
    }
    c
}
