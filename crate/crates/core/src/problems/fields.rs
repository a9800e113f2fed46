//! Closed-form ambient fields, generic over the AD scalar type.

use std::f64::consts::PI;

use crate::ad::{dot, Scalar, ScalarFn, VectorFn};
use crate::geometry::LevelSetSurface;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ScalarExpr {
    Zero,
    Constant(f64),
    /// The ambient coordinate `x_i`.
    Coordinate(usize),
    /// `sin(πx) sin(πyz)`
    SinPiXSinPiYZ,
    /// `xyz`
    Xyz,
    /// `sin(k·x + phase)`
    Trig { wave: [f64; 3], phase: f64 },
}

impl ScalarFn for ScalarExpr {
    #[inline]
    fn eval<S: Scalar>(&self, x: &[S; 3]) -> S {
        match *self {
            ScalarExpr::Zero => S::zero(),
            ScalarExpr::Constant(c) => S::from_f64(c),
            ScalarExpr::Coordinate(i) => x[i],
            ScalarExpr::SinPiXSinPiYZ => (x[0] * PI).sin() * (x[1] * x[2] * PI).sin(),
            ScalarExpr::Xyz => x[0] * x[1] * x[2],
            ScalarExpr::Trig { wave, phase } => (x[0] * wave[0] + x[1] * wave[1] + x[2] * wave[2] + phase).sin(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum VectorExpr {
    Zero,
    Constant([f64; 3]),
    /// `(−y³, z² + y, x)`
    TorusVelocity,
    /// `(xy, sin(xy²), −exp(−z))`
    DziukForce,
    /// `(−y, x, 0)`
    Rotation,
    /// Component `i` is `sin(kᵢ·x + phaseᵢ)`.
    Trig { waves: [[f64; 3]; 3], phases: [f64; 3] },
}

impl VectorFn for VectorExpr {
    #[inline]
    fn eval<S: Scalar>(&self, x: &[S; 3]) -> [S; 3] {
        match *self {
            VectorExpr::Zero => [S::zero(); 3],
            VectorExpr::Constant(c) => c.map(S::from_f64),
            VectorExpr::TorusVelocity => [-(x[1].powi(3)), x[2] * x[2] + x[1], x[0]],
            VectorExpr::DziukForce => [x[0] * x[1], (x[0] * x[1] * x[1]).sin(), -((-x[2]).exp())],
            VectorExpr::Rotation => [-x[1], x[0], S::zero()],
            VectorExpr::Trig { waves, phases } => {
                std::array::from_fn(|i| ScalarExpr::Trig { wave: waves[i], phase: phases[i] }.eval(x))
            }
        }
    }
}

/// Vector field, optionally projected onto the tangent planes of a surface.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VectorField {
    pub expr: VectorExpr,
    pub tangent_to: Option<LevelSetSurface>,
}

impl VectorField {
    pub fn ambient(expr: VectorExpr) -> Self {
        VectorField { expr, tangent_to: None }
    }

    /// `P(x) expr(x)` with `P` from the level-set normal.
    pub fn tangential(expr: VectorExpr, surface: LevelSetSurface) -> Self {
        VectorField { expr, tangent_to: Some(surface) }
    }
}

impl VectorFn for VectorField {
    #[inline]
    fn eval<S: Scalar>(&self, x: &[S; 3]) -> [S; 3] {
        let v = self.expr.eval(x);
        match &self.tangent_to {
            None => v,
            Some(surface) => {
                let n = surface.normal(x);
                let vn = dot(&n, &v);
                [v[0] - vn * n[0], v[1] - vn * n[1], v[2] - vn * n[2]]
            }
        }
    }
}
