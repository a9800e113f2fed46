//! Independent oracles for the integration tests.
//!
//! Surface quantities on the torus are recomputed from its angular chart
//! `X(t, s) = ((R + r cos t) cos s, (R + r cos t) sin s, r sin t)` with
//! eighth-order central differences in the chart variables, so they share no
//! code with the level-set/AD path of the library.

#![allow(dead_code)]

use std::f64::consts::PI;
use std::ops::{Add, Mul, Sub};

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tangent_stokes::geometry::{closest_point, LevelSetSurface};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

const STEP: f64 = 1e-2;

/// `f'(x)` by the eighth-order central difference.
pub fn d1<T>(f: &dyn Fn(f64) -> T, x: f64) -> T
where
    T: Copy + Add<Output = T> + Sub<Output = T> + Mul<f64, Output = T>,
{
    let c = [4.0 / 5.0, -1.0 / 5.0, 4.0 / 105.0, -1.0 / 280.0];
    let mut acc = (f(x + STEP) - f(x - STEP)) * c[0];
    for (k, ck) in c.iter().enumerate().skip(1) {
        let h = (k + 1) as f64 * STEP;
        acc = acc + (f(x + h) - f(x - h)) * *ck;
    }
    acc * (1.0 / STEP)
}

#[derive(Clone, Copy, Debug)]
pub struct TorusChart {
    pub major: f64,
    pub minor: f64,
}

impl TorusChart {
    pub fn new(major: f64, minor: f64) -> Self {
        TorusChart { major, minor }
    }

    pub fn surface(&self) -> LevelSetSurface {
        LevelSetSurface::torus(self.major, self.minor)
    }

    pub fn point(&self, t: f64, s: f64) -> Vector3<f64> {
        let rho = self.major + self.minor * t.cos();
        Vector3::new(rho * s.cos(), rho * s.sin(), self.minor * t.sin())
    }

    /// Chart angles of a point on the torus.
    pub fn angles(&self, x: &Vector3<f64>) -> (f64, f64) {
        let rho = x[0].hypot(x[1]);
        (x[2].atan2(rho - self.major), x[1].atan2(x[0]))
    }

    pub fn normal(&self, t: f64, s: f64) -> Vector3<f64> {
        Vector3::new(t.cos() * s.cos(), t.cos() * s.sin(), t.sin())
    }

    /// Principal curvatures `1/r` and `cos t / (R + r cos t)`.
    pub fn principal_curvatures(&self, t: f64) -> [f64; 2] {
        [1.0 / self.minor, t.cos() / (self.major + self.minor * t.cos())]
    }

    pub fn gauss_curvature(&self, t: f64) -> f64 {
        let [a, b] = self.principal_curvatures(t);
        a * b
    }

    fn tangents(&self, t: f64, s: f64) -> [Vector3<f64>; 2] {
        [d1(&|a| self.point(a, s), t), d1(&|b| self.point(t, b), s)]
    }

    /// Surface measure `√det g` in chart variables.
    pub fn measure(&self, t: f64) -> f64 {
        self.minor * (self.major + self.minor * t.cos())
    }

    /// `Σ g^{ii} ∂ᵢ(u∘X) ⊗ ∂ᵢX`, the ambient derivative of `u` restricted to tangent directions.
    pub fn derivative(&self, u: &dyn Fn(&Vector3<f64>) -> Vector3<f64>, t: f64, s: f64) -> Matrix3<f64> {
        let [xt, xs] = self.tangents(t, s);
        let ut = d1(&|a| u(&self.point(a, s)), t);
        let us = d1(&|b| u(&self.point(t, b)), s);
        ut * xt.transpose() / xt.norm_squared() + us * xs.transpose() / xs.norm_squared()
    }

    pub fn projector(&self, t: f64, s: f64) -> Matrix3<f64> {
        let n = self.normal(t, s);
        Matrix3::identity() - n * n.transpose()
    }

    pub fn weingarten(&self, t: f64, s: f64) -> Matrix3<f64> {
        self.derivative(&|x| {
            let (a, b) = self.angles(x);
            self.normal(a, b)
        }, t, s)
    }

    pub fn grad(&self, f: &dyn Fn(&Vector3<f64>) -> f64, t: f64, s: f64) -> Vector3<f64> {
        let [xt, xs] = self.tangents(t, s);
        let ft = d1(&|a| f(&self.point(a, s)), t);
        let fs = d1(&|b| f(&self.point(t, b)), s);
        xt * (ft / xt.norm_squared()) + xs * (fs / xs.norm_squared())
    }

    /// `P Du P` for an ambient vector field.
    pub fn tangential_jacobian(&self, u: &dyn Fn(&Vector3<f64>) -> Vector3<f64>, t: f64, s: f64) -> Matrix3<f64> {
        self.projector(t, s) * self.derivative(u, t, s)
    }

    pub fn div(&self, u: &dyn Fn(&Vector3<f64>) -> Vector3<f64>, t: f64, s: f64) -> f64 {
        self.derivative(u, t, s).trace()
    }

    /// `(1/√g) ∂ᵢ(√g g^{ii} ∂ᵢ f)`.
    pub fn laplace_beltrami(&self, f: &dyn Fn(&Vector3<f64>) -> f64, t: f64, s: f64) -> f64 {
        let (r, big_r) = (self.minor, self.major);
        let ft = |a: f64, b: f64| d1(&|c| f(&self.point(c, b)), a);
        let fs = |a: f64, b: f64| d1(&|c| f(&self.point(a, c)), b);
        let tt = d1(&|a| self.measure(a) / (r * r) * ft(a, s), t);
        let ss = d1(&|b| self.measure(t) / (big_r + r * t.cos()).powi(2) * fs(t, b), s);
        (tt + ss) / self.measure(t)
    }

    /// `P div_Γ(P Du P)` with the row-wise divergence taken in the chart.
    pub fn bochner(&self, u: &dyn Fn(&Vector3<f64>) -> Vector3<f64>, t: f64, s: f64) -> Vector3<f64> {
        let m = |a: f64, b: f64| self.tangential_jacobian(u, a, b);
        let [xt, xs] = self.tangents(t, s);
        let mt = d1(&|a| m(a, s), t);
        let ms = d1(&|b| m(t, b), s);
        let div = mt * xt / xt.norm_squared() + ms * xs / xs.norm_squared();
        self.projector(t, s) * div
    }

    /// `∫ f dΓ` by the trapezoidal rule in both periodic angles.
    pub fn integrate(&self, n: usize, f: &dyn Fn(&Vector3<f64>) -> f64) -> f64 {
        let h = 2.0 * PI / n as f64;
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                let (t, s) = (i as f64 * h, j as f64 * h);
                acc += f(&self.point(t, s)) * self.measure(t);
            }
        }
        acc * h * h
    }

    pub fn random_angles(&self, rng: &mut impl Rng) -> (f64, f64) {
        (rng.random_range(0.0..2.0 * PI), rng.random_range(0.0..2.0 * PI))
    }
}

pub fn random_unit(rng: &mut impl Rng) -> Vector3<f64> {
    loop {
        let v = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return v / n;
        }
    }
}

/// Random point on one of the built-in surfaces.
pub fn random_surface_point(surface: &LevelSetSurface, rng: &mut impl Rng) -> Vector3<f64> {
    match *surface {
        LevelSetSurface::Torus { major, minor } => {
            let chart = TorusChart::new(major, minor);
            let (t, s) = chart.random_angles(rng);
            chart.point(t, s)
        }
        LevelSetSurface::Sphere { radius } => random_unit(rng) * radius,
        LevelSetSurface::Dziuk => {
            // The surface is the unit sphere sheared by x ↦ x + z², so sheared sphere points lie on it.
            let v = random_unit(rng);
            let x = Vector3::new(v[0] + v[2] * v[2], v[1], v[2]);
            closest_point(surface, &x, 1e-13).expect("projection onto the Dziuk surface")
        }
    }
}

pub fn surfaces() -> Vec<LevelSetSurface> {
    vec![
        LevelSetSurface::torus(2.0, 1.0),
        LevelSetSurface::unit_sphere(),
        LevelSetSurface::sphere(2.0),
        LevelSetSurface::Dziuk,
    ]
}

/// Relative distance between matrices.
pub fn rel_diff(a: &Matrix3<f64>, b: &Matrix3<f64>) -> f64 {
    (a - b).norm() / b.norm().max(1.0)
}
