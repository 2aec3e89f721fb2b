//! Sparse symmetric linear algebra: CSR storage, a fill-reducing LDL^T
//! factorization for the direct path, and Jacobi-preconditioned CG for
//! systems too large to factor comfortably.
//!
//! Matrices assembled here are SPD (the least-squares form guarantees it),
//! so the factorization runs without pivoting; a nonpositive pivot is
//! reported as an error rather than patched over.

use crate::error::{FoslsError, Result};

/// Accumulator for duplicate-summing assembly.
#[derive(Debug, Clone)]
pub struct Triplets {
    n_rows: usize,
    n_cols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl Triplets {
    pub fn new(n_rows: usize, n_cols: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            entries: Vec::new(),
        }
    }

    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.n_rows && col < self.n_cols);
        if value != 0.0 {
            self.entries.push((row, col, value));
        }
    }

    pub fn to_csr(&self) -> CsrMatrix {
        let mut sorted = self.entries.clone();
        sorted.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut indptr = vec![0usize; self.n_rows + 1];
        let mut indices = Vec::with_capacity(sorted.len());
        let mut data: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut last = None;
        for &(r, c, v) in &sorted {
            if last == Some((r, c)) {
                *data.last_mut().unwrap() += v;
            } else {
                indices.push(c);
                data.push(v);
                indptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..self.n_rows {
            indptr[r + 1] += indptr[r];
        }
        CsrMatrix {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            indptr,
            indices,
            data,
        }
    }
}

/// Compressed sparse row matrix.
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    pub n_rows: usize,
    pub n_cols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub data: Vec<f64>,
}

impl CsrMatrix {
    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let lo = self.indptr[r];
        let hi = self.indptr[r + 1];
        (&self.indices[lo..hi], &self.data[lo..hi])
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n_cols);
        let mut y = vec![0.0; self.n_rows];
        for r in 0..self.n_rows {
            let (cols, vals) = self.row(r);
            let mut acc = 0.0;
            for (&c, &v) in cols.iter().zip(vals) {
                acc += v * x[c];
            }
            y[r] = acc;
        }
        y
    }

    pub fn transpose_matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n_rows);
        let mut y = vec![0.0; self.n_cols];
        for r in 0..self.n_rows {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                y[c] += v * x[r];
            }
        }
        y
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n_rows.min(self.n_cols)];
        for r in 0..d.len() {
            let (cols, vals) = self.row(r);
            if let Ok(k) = cols.binary_search(&r) {
                d[r] = vals[k];
            }
        }
        d
    }

    /// Write `row col value` lines, one entry per line, zero-based indices.
    pub fn write_coo(&self, w: &mut impl std::io::Write) -> std::io::Result<()> {
        for r in 0..self.n_rows {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                writeln!(w, "{r} {c} {v:.17e}")?;
            }
        }
        Ok(())
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Reverse Cuthill-McKee ordering of the symmetric pattern; returns
/// `perm` with `perm[new] = old`.
pub fn reverse_cuthill_mckee(a: &CsrMatrix) -> Vec<usize> {
    let n = a.n_rows;
    let degree: Vec<usize> = (0..n).map(|r| a.row(r).0.len()).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut component = Vec::new();
    while order.len() < n {
        let seed = (0..n)
            .filter(|&v| !visited[v])
            .min_by_key(|&v| degree[v])
            .expect("unvisited vertex exists");
        // push the seed towards the periphery with two BFS sweeps
        let mut start = seed;
        for _ in 0..2 {
            component.clear();
            bfs_levels(a, start, &visited, &mut component);
            let (&last, _) = component
                .iter()
                .zip(0..)
                .last()
                .expect("nonempty component");
            start = last;
        }
        // Cuthill-McKee BFS from `start`, neighbors by increasing degree
        let mut queue = std::collections::VecDeque::new();
        visited[start] = true;
        queue.push_back(start);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut nbrs: Vec<usize> = a
                .row(v)
                .0
                .iter()
                .copied()
                .filter(|&u| u != v && !visited[u])
                .collect();
            nbrs.sort_unstable_by_key(|&u| (degree[u], u));
            for u in nbrs {
                if !visited[u] {
                    visited[u] = true;
                    queue.push_back(u);
                }
            }
        }
    }
    order.reverse();
    order
}

fn bfs_levels(a: &CsrMatrix, start: usize, visited: &[bool], out: &mut Vec<usize>) {
    let mut seen = vec![false; a.n_rows];
    let mut queue = std::collections::VecDeque::new();
    seen[start] = true;
    queue.push_back(start);
    while let Some(v) = queue.pop_front() {
        out.push(v);
        for &u in a.row(v).0 {
            if !seen[u] && !visited[u] {
                seen[u] = true;
                queue.push_back(u);
            }
        }
    }
}

/// Sparse LDL^T factorization of an SPD matrix, up-looking with an
/// elimination tree, after a reverse Cuthill-McKee reorder.
pub struct LdltFactor {
    n: usize,
    perm: Vec<usize>,
    lp: Vec<usize>,
    li: Vec<usize>,
    lx: Vec<f64>,
    d: Vec<f64>,
}

pub fn ldlt_factor(a: &CsrMatrix) -> Result<LdltFactor> {
    assert_eq!(a.n_rows, a.n_cols, "LDL^T needs a square matrix");
    let n = a.n_rows;
    let perm = reverse_cuthill_mckee(a);
    let mut inv = vec![0usize; n];
    for (new, &old) in perm.iter().enumerate() {
        inv[old] = new;
    }

    // Upper triangle of the permuted matrix in CSC layout: column k holds
    // rows i <= k. Since A is symmetric and fully stored, column k of the
    // permuted matrix is row perm[k] of A with relabeled indices.
    let mut col_entries: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for k in 0..n {
        let (cols, vals) = a.row(perm[k]);
        for (&c, &v) in cols.iter().zip(vals) {
            let i = inv[c];
            if i <= k {
                col_entries[k].push((i, v));
            }
        }
        col_entries[k].sort_unstable_by_key(|e| e.0);
    }

    // symbolic pass: elimination tree and column counts of L
    let mut parent = vec![usize::MAX; n];
    let mut flag = vec![usize::MAX; n];
    let mut lnz = vec![0usize; n];
    for k in 0..n {
        flag[k] = k;
        for &(mut i, _) in &col_entries[k] {
            while i < k && flag[i] != k {
                if parent[i] == usize::MAX {
                    parent[i] = k;
                }
                lnz[i] += 1;
                flag[i] = k;
                i = parent[i];
            }
        }
    }
    let mut lp = vec![0usize; n + 1];
    for k in 0..n {
        lp[k + 1] = lp[k] + lnz[k];
    }
    let nnz_l = lp[n];
    let mut li = vec![0usize; nnz_l];
    let mut lx = vec![0.0f64; nnz_l];
    let mut d = vec![0.0f64; n];

    // numeric pass, row k of L at a time
    let mut y = vec![0.0f64; n];
    let mut pattern = vec![0usize; n];
    let mut fill = vec![0usize; n]; // entries placed so far in column i
    let mut flag2 = vec![usize::MAX; n];
    let mut chain: Vec<usize> = Vec::with_capacity(64);
    for k in 0..n {
        let mut top = n;
        flag2[k] = k;
        for &(i0, v) in &col_entries[k] {
            y[i0] += v;
            chain.clear();
            let mut i = i0;
            while i < k && flag2[i] != k {
                chain.push(i);
                flag2[i] = k;
                i = parent[i];
            }
            // the chain runs towards the root; the pattern needs it sorted
            // ascending overall, so place it top-down
            for &node in chain.iter().rev() {
                top -= 1;
                pattern[top] = node;
            }
        }
        d[k] = y[k];
        y[k] = 0.0;
        for s in top..n {
            let i = pattern[s];
            let yi = y[i];
            y[i] = 0.0;
            for p in lp[i]..lp[i] + fill[i] {
                y[li[p]] -= lx[p] * yi;
            }
            let lki = yi / d[i];
            d[k] -= lki * yi;
            let p = lp[i] + fill[i];
            li[p] = k;
            lx[p] = lki;
            fill[i] += 1;
        }
        if !(d[k] > 0.0) {
            return Err(FoslsError::Solver(format!(
                "nonpositive pivot {} at column {k}; matrix is not SPD",
                d[k]
            )));
        }
    }

    Ok(LdltFactor {
        n,
        perm,
        lp,
        li,
        lx,
        d,
    })
}

impl LdltFactor {
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let mut x: Vec<f64> = self.perm.iter().map(|&old| b[old]).collect();
        // L z = Pb (L unit lower, stored by columns)
        for j in 0..self.n {
            let xj = x[j];
            for p in self.lp[j]..self.lp[j + 1] {
                x[self.li[p]] -= self.lx[p] * xj;
            }
        }
        for j in 0..self.n {
            x[j] /= self.d[j];
        }
        // L^T w = z
        for j in (0..self.n).rev() {
            let mut acc = x[j];
            for p in self.lp[j]..self.lp[j + 1] {
                acc -= self.lx[p] * x[self.li[p]];
            }
            x[j] = acc;
        }
        let mut out = vec![0.0; self.n];
        for (new, &old) in self.perm.iter().enumerate() {
            out[old] = x[new];
        }
        out
    }

    pub fn l_nnz(&self) -> usize {
        self.lx.len()
    }
}

/// Jacobi-preconditioned conjugate gradients. Returns the solution, the
/// iteration count and the final relative residual.
pub fn pcg_jacobi(
    a: &CsrMatrix,
    b: &[f64],
    tol_rel: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, usize, f64)> {
    let n = b.len();
    let norm_b = norm(b);
    if norm_b == 0.0 {
        return Ok((vec![0.0; n], 0, 0.0));
    }
    let diag = a.diagonal();
    let inv_diag: Vec<f64> = diag
        .iter()
        .map(|&v| if v.abs() > 0.0 { 1.0 / v } else { 1.0 })
        .collect();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(ri, di)| ri * di).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    for it in 1..=max_iter {
        let ap = a.matvec(&p);
        let alpha = rz / dot(&p, &ap);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let res = norm(&r) / norm_b;
        if res <= tol_rel {
            return Ok((x, it, res));
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    let res = norm(&r) / norm_b;
    Err(FoslsError::Solver(format!(
        "CG did not reach tolerance {tol_rel:e} in {max_iter} iterations (residual {res:e})"
    )))
}
