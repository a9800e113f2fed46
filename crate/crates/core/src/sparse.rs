//! Compressed sparse row matrices with patterns fixed by element connectivity.

use std::collections::BTreeSet;

/// Square or rectangular CSR matrix with sorted column indices per row.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Zero matrix on an explicit pattern. Each row of `rows` must be sorted.
    pub fn from_rows(ncols: usize, rows: Vec<Vec<usize>>) -> Self {
        let nrows = rows.len();
        let mut indptr = Vec::with_capacity(nrows + 1);
        indptr.push(0);
        let nnz = rows.iter().map(Vec::len).sum();
        let mut indices = Vec::with_capacity(nnz);
        for row in rows {
            debug_assert!(row.windows(2).all(|w| w[0] < w[1]));
            indices.extend(row);
            indptr.push(indices.len());
        }
        CsrMatrix { nrows, ncols, values: vec![0.0; indices.len()], indptr, indices }
    }

    /// Zero matrix whose pattern couples every row node of an element with every
    /// column node of the same element, expanded to `row_block × col_block`
    /// interleaved components (`block·node + component`).
    pub fn from_connectivity(
        n_row_nodes: usize,
        row_block: usize,
        row_elems: impl Fn(usize) -> Vec<usize>,
        n_col_nodes: usize,
        col_block: usize,
        col_elems: impl Fn(usize) -> Vec<usize>,
        n_elements: usize,
    ) -> Self {
        let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n_row_nodes];
        for e in 0..n_elements {
            let cols = col_elems(e);
            for r in row_elems(e) {
                adj[r].extend(cols.iter().copied());
            }
        }
        let mut rows = Vec::with_capacity(n_row_nodes * row_block);
        for set in &adj {
            let mut row = Vec::with_capacity(set.len() * col_block);
            for &c in set {
                row.extend((0..col_block).map(|d| col_block * c + d));
            }
            for _ in 0..row_block {
                rows.push(row.clone());
            }
        }
        CsrMatrix::from_rows(n_col_nodes * col_block, rows)
    }

    /// Build from `(row, col, value)` triplets; duplicates are summed in input order.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut rows: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); nrows];
        for &(r, c, _) in triplets {
            rows[r].insert(c);
        }
        let mut m = CsrMatrix::from_rows(ncols, rows.into_iter().map(|s| s.into_iter().collect()).collect());
        for &(r, c, v) in triplets {
            m.add(r, c, v);
        }
        m
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn indptr(&self) -> &[usize] {
        &self.indptr
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    #[inline]
    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.indptr[r], self.indptr[r + 1]);
        (&self.indices[a..b], &self.values[a..b])
    }

    #[inline]
    fn position(&self, r: usize, c: usize) -> Option<usize> {
        let (a, b) = (self.indptr[r], self.indptr[r + 1]);
        self.indices[a..b].binary_search(&c).ok().map(|k| a + k)
    }

    /// Add to an entry of the pattern. Panics if `(r, c)` is not in the pattern.
    #[inline]
    pub fn add(&mut self, r: usize, c: usize, v: f64) {
        let k = self.position(r, c).unwrap_or_else(|| panic!("({r}, {c}) outside sparsity pattern"));
        self.values[k] += v;
    }

    /// Entry value, zero outside the pattern.
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.position(r, c).map_or(0.0, |k| self.values[k])
    }

    /// `y = A x`
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows)
            .map(|r| {
                let (cols, vals) = self.row(r);
                cols.iter().zip(vals).map(|(&c, v)| v * x[c]).sum()
            })
            .collect()
    }

    /// `xᵀ A y`
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        self.mul_vec(y).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut counts = vec![0usize; self.ncols + 1];
        for &c in &self.indices {
            counts[c + 1] += 1;
        }
        for i in 0..self.ncols {
            counts[i + 1] += counts[i];
        }
        let indptr = counts.clone();
        let mut next = counts;
        let mut indices = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                indices[next[c]] = r;
                values[next[c]] = v;
                next[c] += 1;
            }
        }
        CsrMatrix { nrows: self.ncols, ncols: self.nrows, indptr, indices, values }
    }

    pub fn scale(&mut self, s: f64) {
        self.values.iter_mut().for_each(|v| *v *= s);
    }

    /// Row sums.
    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.nrows).map(|r| self.row(r).1.iter().sum()).collect()
    }

    /// Largest `|A_ij − B_ij|` over the union of both patterns.
    pub fn max_abs_diff(&self, other: &CsrMatrix) -> f64 {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let mut worst: f64 = 0.0;
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                worst = worst.max((v - other.get(r, c)).abs());
            }
            let (cols, vals) = other.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                worst = worst.max((v - self.get(r, c)).abs());
            }
        }
        worst
    }

    /// Largest `|A_ij − A_ji|`.
    pub fn asymmetry(&self) -> f64 {
        self.max_abs_diff(&self.transpose())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Dense row-major copy (tests and small eigenproblems).
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.ncols]; self.nrows];
        for (r, row) in d.iter_mut().enumerate() {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                row[c] = v;
            }
        }
        d
    }
}
