//! Lagrange basis of degree `k` on the equispaced reference lattice.

use super::quadrature::QuadratureRule;

pub const MAX_DEGREE: usize = 8;

/// Nodal Lagrange basis `P_k` on the reference triangle.
///
/// Local node `m` sits at barycentric multiplicities `lattice[m] = (a₀, a₁, a₂)`
/// with `a₀ + a₁ + a₂ = k`, i.e. at `(ξ, η) = (a₁/k, a₂/k)`.
#[derive(Clone, Debug)]
pub struct LagrangeBasis {
    degree: usize,
    lattice: Vec<[usize; 3]>,
}

impl LagrangeBasis {
    pub fn new(degree: usize) -> Self {
        assert!((1..=MAX_DEGREE).contains(&degree), "unsupported degree {degree}");
        let mut lattice = Vec::with_capacity((degree + 1) * (degree + 2) / 2);
        for j in 0..=degree {
            for i in 0..=degree - j {
                lattice.push([degree - i - j, i, j]);
            }
        }
        LagrangeBasis { degree, lattice }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.lattice.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lattice.is_empty()
    }

    pub fn lattice(&self) -> &[[usize; 3]] {
        &self.lattice
    }

    pub fn node(&self, m: usize) -> [f64; 2] {
        let k = self.degree as f64;
        [self.lattice[m][1] as f64 / k, self.lattice[m][2] as f64 / k]
    }

    /// Local index of the node at reference vertex `v ∈ {0, 1, 2}`.
    pub fn vertex_node(&self, v: usize) -> usize {
        self.lattice.iter().position(|a| a[v] == self.degree).expect("vertex node")
    }

    /// Values and reference gradients `(∂ξ, ∂η)` of all basis functions at `p`.
    pub fn eval(&self, p: [f64; 2], values: &mut [f64], grads: &mut [[f64; 2]]) {
        let k = self.degree;
        let lam = [1.0 - p[0] - p[1], p[0], p[1]];
        // s[c][a] = Π_{q<a} (kλ_c − q)/(q+1) and its λ-derivative
        let mut s = [[0.0; MAX_DEGREE + 1]; 3];
        let mut ds = [[0.0; MAX_DEGREE + 1]; 3];
        for c in 0..3 {
            let t = k as f64 * lam[c];
            s[c][0] = 1.0;
            ds[c][0] = 0.0;
            for a in 1..=k {
                let q = (a - 1) as f64;
                let f = (t - q) / (q + 1.0);
                s[c][a] = s[c][a - 1] * f;
                ds[c][a] = ds[c][a - 1] * f + s[c][a - 1] * k as f64 / (q + 1.0);
            }
        }
        for (m, a) in self.lattice.iter().enumerate() {
            let (s0, s1, s2) = (s[0][a[0]], s[1][a[1]], s[2][a[2]]);
            values[m] = s0 * s1 * s2;
            let d0 = ds[0][a[0]] * s1 * s2;
            let d1 = s0 * ds[1][a[1]] * s2;
            let d2 = s0 * s1 * ds[2][a[2]];
            grads[m] = [d1 - d0, d2 - d0];
        }
    }

    pub fn tabulate(&self, rule: &QuadratureRule) -> Tabulation {
        let n = self.len();
        let mut values = vec![0.0; rule.len() * n];
        let mut grads = vec![[0.0; 2]; rule.len() * n];
        for (q, p) in rule.points.iter().enumerate() {
            self.eval(*p, &mut values[q * n..(q + 1) * n], &mut grads[q * n..(q + 1) * n]);
        }
        Tabulation { n_local: n, values, grads }
    }
}

/// Basis values and reference gradients at every point of a quadrature rule.
#[derive(Clone, Debug)]
pub struct Tabulation {
    pub n_local: usize,
    values: Vec<f64>,
    grads: Vec<[f64; 2]>,
}

impl Tabulation {
    #[inline]
    pub fn values(&self, q: usize) -> &[f64] {
        &self.values[q * self.n_local..(q + 1) * self.n_local]
    }

    #[inline]
    pub fn grads(&self, q: usize) -> &[[f64; 2]] {
        &self.grads[q * self.n_local..(q + 1) * self.n_local]
    }
}
