//! Quadrature on the reference triangle `{ξ, η ≥ 0, ξ + η ≤ 1}`.
//!
//! Rules are collapsed (conical) products: Gauss–Jacobi with weight `(1 − s)`
//! in the collapsed direction and Gauss–Legendre along the fibres. Every
//! weight is positive and every point is interior.

use nalgebra::{DMatrix, SymmetricEigen};

#[derive(Clone, Debug)]
pub struct QuadratureRule {
    /// Reference coordinates `(ξ, η)`.
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
    /// Total polynomial degree integrated exactly.
    pub exactness: usize,
}

impl QuadratureRule {
    /// Rule exact for all polynomials of total degree `≤ q`.
    pub fn with_exactness(q: usize) -> Self {
        let n = q / 2 + 1;
        let (xs, ws) = gauss_jacobi(n, 1.0, 0.0);
        let (xt, wt) = gauss_jacobi(n, 0.0, 0.0);
        let mut points = Vec::with_capacity(n * n);
        let mut weights = Vec::with_capacity(n * n);
        for (x, w) in xs.iter().zip(&ws) {
            let s = 0.5 * (1.0 + x);
            for (t, v) in xt.iter().zip(&wt) {
                let t = 0.5 * (1.0 + t);
                points.push([s, (1.0 - s) * t]);
                // (1−x)/2 = 1−s absorbs the collapse Jacobian; dx dt = 4 ds dt
                weights.push(0.125 * w * v);
            }
        }
        QuadratureRule { points, weights, exactness: q }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Gauss–Jacobi nodes and weights on `[−1, 1]` for weight `(1−x)^α (1+x)^β`.
fn gauss_jacobi(n: usize, alpha: f64, beta: f64) -> (Vec<f64>, Vec<f64>) {
    // recurrence for the orthonormal polynomials: x p_k = b_{k+1} p_{k+1} + a_k p_k + b_k p_{k-1}
    let ab = alpha + beta;
    let a: Vec<f64> = (0..n)
        .map(|k| {
            let k = k as f64;
            let s = 2.0 * k + ab;
            if s.abs() < 1e-300 || (s + 2.0).abs() < 1e-300 || (beta * beta - alpha * alpha) == 0.0 {
                0.0
            } else {
                (beta * beta - alpha * alpha) / (s * (s + 2.0))
            }
        })
        .collect();
    let b: Vec<f64> = (0..n + 1)
        .map(|k| {
            if k == 0 {
                return 0.0;
            }
            let k = k as f64;
            let s = 2.0 * k + ab;
            let num = 4.0 * k * (k + alpha) * (k + beta) * (k + ab);
            let den = s * s * (s + 1.0) * (s - 1.0);
            (num / den).sqrt()
        })
        .collect();
    let mu0 = 2f64.powf(ab + 1.0) * gamma_ratio(alpha, beta);

    let jacobi = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            a[i]
        } else if i + 1 == j {
            b[j]
        } else if j + 1 == i {
            b[i]
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(jacobi);
    let mut nodes: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    nodes.sort_by(|x, y| x.total_cmp(y));

    let orthonormal = |x: f64| -> (Vec<f64>, f64) {
        // values p_0..p_{n-1}, plus p_n and its derivative via recurrence
        let mut p = vec![0.0; n + 1];
        let mut dp = vec![0.0; n + 1];
        p[0] = 1.0 / mu0.sqrt();
        for k in 0..n {
            let prev = if k > 0 { b[k] * p[k - 1] } else { 0.0 };
            let dprev = if k > 0 { b[k] * dp[k - 1] } else { 0.0 };
            p[k + 1] = ((x - a[k]) * p[k] - prev) / b[k + 1];
            dp[k + 1] = (p[k] + (x - a[k]) * dp[k] - dprev) / b[k + 1];
        }
        let dn = dp[n];
        (p, dn)
    };

    let mut weights = Vec::with_capacity(n);
    for x in nodes.iter_mut() {
        for _ in 0..3 {
            let (p, dn) = orthonormal(*x);
            if dn == 0.0 {
                break;
            }
            *x -= p[n] / dn;
        }
        let (p, _) = orthonormal(*x);
        let s: f64 = p[..n].iter().map(|v| v * v).sum();
        weights.push(1.0 / s);
    }
    (nodes, weights)
}

/// `Γ(α+1)Γ(β+1)/Γ(α+β+2)` for the small integer exponents used here.
fn gamma_ratio(alpha: f64, beta: f64) -> f64 {
    fn fact(x: f64) -> f64 {
        let n = x.round() as u64;
        assert!((x - n as f64).abs() < 1e-12, "integer Jacobi exponents only");
        (1..=n).map(|k| k as f64).product()
    }
    fact(alpha) * fact(beta) / fact(alpha + beta + 1.0)
}
