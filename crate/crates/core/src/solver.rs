//! Linear solvers for the monolithic system: sparse LU, restarted GMRES with
//! an ILU(0) right preconditioner, and GMRES preconditioned by the
//! block-triangular part of the system with Cholesky-factored diagonal blocks.

use std::time::Instant;

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::sparse::linalg::{colamd, lu};
use faer::linalg::solvers::SolveCore;
use faer::sparse::linalg::solvers::Llt;
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};
use faer::{Conj, Mat, Par, Side};

use crate::assembly::BlockSystem;
use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolverKind {
    Direct,
    Gmres,
    /// GMRES with the block upper-triangular preconditioner `[[A, B], [0, A_p]]`.
    BlockGmres,
}

impl SolverKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "direct" | "lu" => Ok(SolverKind::Direct),
            "gmres" => Ok(SolverKind::Gmres),
            "block-gmres" | "block" => Ok(SolverKind::BlockGmres),
            other => Err(Error::Config(format!("unknown solver '{other}' (expected direct, gmres or block-gmres)"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Direct => "direct",
            SolverKind::Gmres => "gmres",
            SolverKind::BlockGmres => "block-gmres",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    pub kind: SolverKind,
    /// Relative residual target of GMRES.
    pub tol: f64,
    pub restart: usize,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { kind: SolverKind::Direct, tol: 1e-10, restart: 200, max_iter: 2000 }
    }
}

#[derive(Clone, Debug)]
pub struct SolveReport {
    pub solution: Vec<f64>,
    /// `‖b − Ax‖ / ‖b‖` (absolute when `b = 0`).
    pub residual: f64,
    /// GMRES iterations; zero for the direct solver.
    pub iterations: usize,
    pub kind: SolverKind,
    /// Wall time in seconds.
    pub seconds: f64,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn relative_residual(a: &CsrMatrix, x: &[f64], b: &[f64]) -> f64 {
    let ax = a.mul_vec(x);
    let r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let nb = norm(b);
    norm(&r) / if nb > 0.0 { nb } else { 1.0 }
}

/// Solve `Ax = b`.
pub fn solve(a: &CsrMatrix, b: &[f64], opts: &SolverOptions) -> Result<SolveReport> {
    if a.nrows() != a.ncols() || b.len() != a.nrows() {
        return Err(Error::Config(format!(
            "system is {}x{} with a right-hand side of length {}",
            a.nrows(),
            a.ncols(),
            b.len()
        )));
    }
    let start = Instant::now();
    let (solution, iterations) = match opts.kind {
        SolverKind::Direct => (lu_solve(a, b)?, 0),
        SolverKind::Gmres | SolverKind::BlockGmres => gmres(a, b, opts)?,
    };
    let residual = relative_residual(a, &solution, b);
    if !residual.is_finite() {
        return Err(Error::SingularSystem("non-finite solution".into()));
    }
    Ok(SolveReport { solution, residual, iterations, kind: opts.kind, seconds: start.elapsed().as_secs_f64() })
}

/// Solve the monolithic system of `sys`.
///
/// The direct and block paths never factor the dense constraint row. Constant
/// pressures span both the right and the left kernel of the `(w, p)` block
/// `K = [[A, B], [−C, A_p]]`, so testing the pressure equations with the
/// constant gives `λ = Σ F₂ / Σ m`. The remaining consistent system is solved
/// with `K + s e_j e_jᵀ` (one pinned pressure unknown), which is nonsingular
/// and reproduces the kernel-free solution; a constant shift then enforces
/// `mᵀp = c₀`. The residual is measured on the full monolithic matrix.
/// Plain `Gmres` works on the monolithic matrix directly.
pub fn solve_system(sys: &BlockSystem, opts: &SolverOptions) -> Result<SolveReport> {
    let monolithic = sys.monolithic();
    let rhs = sys.rhs();
    if opts.kind == SolverKind::Gmres {
        return solve(&monolithic, &rhs, opts);
    }
    let start = Instant::now();
    let (nu, np) = (sys.n_u(), sys.n_p());
    let area: f64 = sys.m.iter().sum();
    if np == 0 || area.abs() == 0.0 {
        return Err(Error::SingularSystem("empty pressure space".into()));
    }
    let lambda = sys.f2.iter().sum::<f64>() / area;
    let mut r = sys.f1.clone();
    r.extend(sys.f2.iter().zip(&sys.m).map(|(f, m)| f - lambda * m));
    let (k, s) = pinned_block(sys);
    let (mut x, iterations) = match opts.kind {
        SolverKind::BlockGmres => block_gmres(sys, &k, s, &r, opts)?,
        _ => (lu_solve(&k, &r)?, 0),
    };
    let mean: f64 = sys.m.iter().zip(&x[nu..]).map(|(m, p)| m * p).sum();
    let shift = (sys.c0 - mean) / area;
    x[nu..].iter_mut().for_each(|p| *p += shift);
    x.push(lambda);
    let residual = relative_residual(&monolithic, &x, &rhs);
    if !(residual <= DIRECT_RESIDUAL_LIMIT) {
        return Err(Error::SingularSystem(format!("solve left relative residual {residual:e}")));
    }
    Ok(SolveReport { solution: x, residual, iterations, kind: opts.kind, seconds: start.elapsed().as_secs_f64() })
}

/// Relative residual above which a direct solution is treated as a failed factorization.
const DIRECT_RESIDUAL_LIMIT: f64 = 1e-6;

/// `[[A, B], [−C, A_p + s e₀e₀ᵀ]]` with `s` the mean diagonal of `A_p`.
fn pinned_block(sys: &BlockSystem) -> (CsrMatrix, f64) {
    let (nu, np) = (sys.n_u(), sys.n_p());
    let s = (0..np).map(|j| sys.a_p.get(j, j)).sum::<f64>() / np as f64;
    let s = if s > 0.0 { s } else { 1.0 };
    let mut rows = Vec::with_capacity(nu + np);
    let mut vals = Vec::with_capacity(nu + np);
    for r in 0..nu {
        let (ca, va) = sys.a.row(r);
        let (cb, vb) = sys.b.row(r);
        rows.push(ca.iter().copied().chain(cb.iter().map(|c| c + nu)).collect::<Vec<_>>());
        vals.extend(va.iter().chain(vb).copied());
    }
    for r in 0..np {
        let (cc, vc) = sys.c.row(r);
        let (cp, vp) = sys.a_p.row(r);
        rows.push(cc.iter().copied().chain(cp.iter().map(|c| c + nu)).collect::<Vec<_>>());
        vals.extend(vc.iter().map(|v| -v).chain(vp.iter().copied()));
    }
    let mut k = CsrMatrix::from_rows(nu + np, rows);
    k.values_mut().copy_from_slice(&vals);
    if sys.a_p.row(0).0.contains(&0) {
        k.add(nu, nu, s);
    }
    (k, s)
}

/// Sparse Cholesky of a symmetric positive definite CSR matrix.
struct Cholesky {
    llt: Llt<usize, f64>,
}

impl Cholesky {
    fn new(a: &CsrMatrix) -> Result<Self> {
        let n = a.nrows();
        let structure = SymbolicSparseColMatRef::new_checked(n, n, a.indptr(), None, a.indices());
        let llt = SparseColMatRef::new(structure, a.values())
            .sp_cholesky(Side::Lower)
            .map_err(|e| Error::SingularSystem(format!("Cholesky factorization failed: {e:?}")))?;
        Ok(Cholesky { llt })
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut rhs = Mat::from_fn(b.len(), 1, |i, _| b[i]);
        self.llt.solve_in_place_with_conj(Conj::No, rhs.as_mut());
        (0..b.len()).map(|i| rhs[(i, 0)]).collect()
    }
}

/// GMRES on the pinned block system, right-preconditioned by
/// `[[A, B], [0, A_p + s e₀e₀ᵀ]]` with both diagonal blocks factored exactly.
fn block_gmres(sys: &BlockSystem, k: &CsrMatrix, s: f64, r: &[f64], opts: &SolverOptions) -> Result<(Vec<f64>, usize)> {
    let nu = sys.n_u();
    let a = Cholesky::new(&sys.a)?;
    let mut ap = sys.a_p.clone();
    if ap.row(0).0.contains(&0) {
        ap.add(0, 0, s);
    }
    let ap = Cholesky::new(&ap)?;
    let precond = |z: &[f64]| {
        let p = ap.solve(&z[nu..]);
        let bp = sys.b.mul_vec(&p);
        let rw: Vec<f64> = z[..nu].iter().zip(&bp).map(|(z, b)| z - b).collect();
        let mut x = a.solve(&rw);
        x.extend(p);
        x
    };
    gmres_with(|x| k.mul_vec(x), precond, r, opts)
}

/// Sparse LU of `Aᵀ` (the CSR arrays read as CSC), solved transposed.
///
/// Rows and columns much denser than the median, such as the mean-value
/// constraint, are flagged as dense for the fill-reducing column ordering;
/// otherwise they couple every pressure unknown and the factor fills in.
fn lu_solve(a: &CsrMatrix, b: &[f64]) -> Result<Vec<f64>> {
    let n = a.nrows();
    let par = Par::Seq;
    let mut degrees: Vec<usize> = a.indptr().windows(2).map(|w| w[1] - w[0]).collect();
    degrees.sort_unstable();
    let typical = degrees.get(n / 2).copied().unwrap_or(1).max(1);
    let dense = (8 * typical).max(64) as f64 / n.max(1) as f64;
    let params = lu::LuSymbolicParams {
        colamd_params: colamd::Control { dense_row: dense, dense_col: dense, aggressive: true },
        ..Default::default()
    };
    let singular = |e: &dyn std::fmt::Debug| Error::SingularSystem(format!("{e:?}"));
    let structure = SymbolicSparseColMatRef::new_checked(n, n, a.indptr(), None, a.indices());
    let at = SparseColMatRef::new(structure, a.values());
    let symbolic = lu::factorize_symbolic_lu(structure, params).map_err(|e| singular(&e))?;
    let mut numeric = lu::NumericLu::new();
    let mut scratch = MemBuffer::try_new(symbolic.factorize_numeric_lu_scratch::<f64>(par, Default::default()))
        .map_err(|e| singular(&e))?;
    let factor = symbolic
        .factorize_numeric_lu(&mut numeric, at, par, MemStack::new(&mut scratch), Default::default())
        .map_err(|e| singular(&e))?;
    let mut rhs = Mat::from_fn(n, 1, |i, _| b[i]);
    let mut scratch =
        MemBuffer::try_new(symbolic.solve_transpose_in_place_scratch::<f64>(1, par)).map_err(|e| singular(&e))?;
    factor.solve_transpose_in_place_with_conj(Conj::No, rhs.as_mut(), par, MemStack::new(&mut scratch));
    let x: Vec<f64> = (0..n).map(|i| rhs[(i, 0)]).collect();
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularSystem("zero pivot in numeric factorization".into()));
    }
    Ok(x)
}

/// Incomplete LU factorization on the pattern of `A`.
///
/// Pivots that vanish relative to their row are replaced by the row's largest
/// magnitude, which keeps the factor usable for saddle-point rows with an
/// empty diagonal.
struct Ilu0 {
    lu: CsrMatrix,
    diag: Vec<usize>,
}

impl Ilu0 {
    fn new(a: &CsrMatrix) -> Result<Self> {
        let n = a.nrows();
        let mut rows: Vec<Vec<usize>> = Vec::with_capacity(n);
        let mut vals: Vec<Vec<f64>> = Vec::with_capacity(n);
        for r in 0..n {
            let (c, v) = a.row(r);
            let mut c = c.to_vec();
            let mut v = v.to_vec();
            if c.binary_search(&r).is_err() {
                let k = c.partition_point(|&x| x < r);
                c.insert(k, r);
                v.insert(k, 0.0);
            }
            rows.push(c);
            vals.push(v);
        }
        let flat: Vec<f64> = vals.into_iter().flatten().collect();
        let mut lu = CsrMatrix::from_rows(n, rows);
        lu.values_mut().copy_from_slice(&flat);
        let diag: Vec<usize> = (0..n)
            .map(|r| lu.indptr()[r] + lu.row(r).0.binary_search(&r).unwrap())
            .collect();
        let indptr = lu.indptr().to_vec();
        let indices = lu.indices().to_vec();
        let values = lu.values_mut();
        let mut pos = vec![usize::MAX; n];
        for i in 0..n {
            let (start, end) = (indptr[i], indptr[i + 1]);
            let scale = values[start..end].iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for k in start..end {
                pos[indices[k]] = k;
            }
            for k in start..diag[i] {
                let j = indices[k];
                values[k] /= values[diag[j]];
                let lij = values[k];
                for kk in diag[j] + 1..indptr[j + 1] {
                    let p = pos[indices[kk]];
                    if p != usize::MAX {
                        values[p] -= lij * values[kk];
                    }
                }
            }
            if values[diag[i]].abs() <= 1e-14 * scale.max(f64::MIN_POSITIVE) {
                if scale == 0.0 {
                    return Err(Error::SingularSystem(format!("row {i} is empty")));
                }
                values[diag[i]] = scale;
            }
            for k in start..end {
                pos[indices[k]] = usize::MAX;
            }
        }
        Ok(Ilu0 { lu, diag })
    }

    fn apply(&self, b: &[f64]) -> Vec<f64> {
        let n = b.len();
        let mut x = b.to_vec();
        for i in 0..n {
            let (cols, vals) = self.lu.row(i);
            let nl = self.diag[i] - self.lu.indptr()[i];
            let s: f64 = cols[..nl].iter().zip(&vals[..nl]).map(|(&c, v)| v * x[c]).sum();
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let (cols, vals) = self.lu.row(i);
            let nl = self.diag[i] - self.lu.indptr()[i];
            let s: f64 = cols[nl + 1..].iter().zip(&vals[nl + 1..]).map(|(&c, v)| v * x[c]).sum();
            x[i] = (x[i] - s) / vals[nl];
        }
        x
    }
}

fn gmres(a: &CsrMatrix, b: &[f64], opts: &SolverOptions) -> Result<(Vec<f64>, usize)> {
    let ilu = Ilu0::new(a)?;
    gmres_with(|x| a.mul_vec(x), |x| ilu.apply(x), b, opts)
}

/// Right-preconditioned restarted GMRES with modified Gram–Schmidt.
fn gmres_with(
    op: impl Fn(&[f64]) -> Vec<f64>,
    precond: impl Fn(&[f64]) -> Vec<f64>,
    b: &[f64],
    opts: &SolverOptions,
) -> Result<(Vec<f64>, usize)> {
    let n = b.len();
    let m = RESTART_CAP.min(opts.restart.max(1));
    let residual_of = |x: &[f64]| {
        let ax = op(x);
        b.iter().zip(&ax).map(|(b, a)| b - a).collect::<Vec<f64>>()
    };
    let nb = norm(b);
    if nb == 0.0 {
        return Ok((vec![0.0; n], 0));
    }
    let mut x = vec![0.0; n];
    let mut iterations = 0;
    let mut rel = 1.0;
    while iterations < opts.max_iter {
        let r = residual_of(&x);
        let beta = norm(&r);
        rel = beta / nb;
        if rel <= opts.tol {
            return Ok((x, iterations));
        }
        let mut v: Vec<Vec<f64>> = vec![r.iter().map(|x| x / beta).collect()];
        let mut h = vec![vec![0.0; m]; m + 1];
        let (mut cs, mut sn) = (vec![0.0; m], vec![0.0; m]);
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut k = 0;
        while k < m && iterations < opts.max_iter {
            let mut w = op(&precond(&v[k]));
            for (i, vi) in v.iter().enumerate() {
                let hik: f64 = w.iter().zip(vi).map(|(a, b)| a * b).sum();
                h[i][k] = hik;
                w.iter_mut().zip(vi).for_each(|(a, b)| *a -= hik * b);
            }
            let hn = norm(&w);
            h[k + 1][k] = hn;
            for i in 0..k {
                let t = cs[i] * h[i][k] + sn[i] * h[i + 1][k];
                h[i + 1][k] = -sn[i] * h[i][k] + cs[i] * h[i + 1][k];
                h[i][k] = t;
            }
            let d = h[k][k].hypot(h[k + 1][k]);
            if d == 0.0 {
                return Err(Error::SingularSystem("GMRES breakdown".into()));
            }
            cs[k] = h[k][k] / d;
            sn[k] = h[k + 1][k] / d;
            h[k][k] = d;
            h[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            iterations += 1;
            k += 1;
            rel = g[k].abs() / nb;
            if rel <= opts.tol || hn == 0.0 {
                break;
            }
            v.push(w.iter().map(|x| x / hn).collect());
        }
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let s: f64 = (i + 1..k).map(|j| h[i][j] * y[j]).sum();
            y[i] = (g[i] - s) / h[i][i];
        }
        let mut update = vec![0.0; n];
        for (yi, vi) in y.iter().zip(&v) {
            update.iter_mut().zip(vi).for_each(|(u, v)| *u += yi * v);
        }
        let z = precond(&update);
        x.iter_mut().zip(&z).for_each(|(x, z)| *x += z);
    }
    let final_rel = norm(&residual_of(&x)) / nb;
    if final_rel <= opts.tol {
        return Ok((x, iterations));
    }
    Err(Error::SolverNoConvergence { iterations, residual: rel.max(final_rel) })
}

/// Upper bound on the Krylov basis size kept in memory.
const RESTART_CAP: usize = 500;
