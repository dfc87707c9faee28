//! Compressed sparse row storage and a banded LU factorization with
//! partial pivoting.

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut sorted: Vec<_> = triplets.to_vec();
        sorted.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0; nrows + 1];
        let mut col_idx: Vec<usize> = Vec::with_capacity(sorted.len());
        let mut values: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in sorted {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) out of bounds");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..nrows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// Takes ownership of an existing pattern; column indices must be sorted per row.
    pub(crate) fn from_parts(
        nrows: usize,
        ncols: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<f64>,
    ) -> Self {
        debug_assert_eq!(row_ptr.len(), nrows + 1);
        debug_assert_eq!(col_idx.len(), values.len());
        Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()]
            .iter()
            .copied()
            .zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[r.clone()].binary_search(&j) {
            Ok(k) => self.values[r.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows)
            .map(|i| self.row(i).map(|(j, v)| v * x[j]).sum())
            .collect()
    }

    /// `v^T A v`
    pub fn quadratic_form(&self, v: &[f64]) -> f64 {
        self.matvec(v).iter().zip(v).map(|(a, b)| a * b).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `max |A - A^T|` over all entries.
    pub fn max_asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst
    }

    /// `(lower, upper)` bandwidths of the sparsity pattern.
    pub fn bandwidths(&self) -> (usize, usize) {
        let (mut kl, mut ku) = (0, 0);
        for i in 0..self.nrows {
            for (j, _) in self.row(i) {
                if j < i {
                    kl = kl.max(i - j);
                } else {
                    ku = ku.max(j - i);
                }
            }
        }
        (kl, ku)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.ncols]; self.nrows];
        for (i, row) in d.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] += v;
            }
        }
        d
    }
}

/// LU factors of a banded matrix, `P A = L U` with the row interchanges and
/// Gauss transforms stored in application order.
#[derive(Clone, Debug)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    // row i holds columns [i - kl, i - kl + width)
    rows: Vec<f64>,
    pivots: Vec<usize>,
    // multipliers of step k live at k * kl ..
    multipliers: Vec<f64>,
}

impl BandedLu {
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::Validation("LU requires a square matrix".into()));
        }
        let n = a.nrows();
        let (kl, ku) = a.bandwidths();
        let width = 2 * kl + ku + 1;
        let mut rows = vec![0.0; n * width];
        for i in 0..n {
            for (j, v) in a.row(i) {
                rows[i * width + kl + j - i] += v;
            }
        }
        let scale = a.max_abs();
        let tiny = scale * 1e-14;
        let mut pivots = vec![0; n];
        let mut multipliers = vec![0.0; n * kl];
        let idx = |i: usize, col: usize| i * width + kl + col - i;
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = rows[idx(k, k)].abs();
            for r in k + 1..=last_row {
                let v = rows[idx(r, k)].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if !(best > tiny) {
                return Err(Error::Numerical(format!(
                    "zero pivot at row {k} during LU factorization (possible loss of coercivity)"
                )));
            }
            pivots[k] = p;
            let last_col = (k + kl + ku).min(n - 1);
            if p != k {
                for col in k..=last_col {
                    rows.swap(idx(k, col), idx(p, col));
                }
            }
            let pivot = rows[idx(k, k)];
            let (head, tail) = rows.split_at_mut((k + 1) * width);
            let urow = &head[idx(k, k + 1)..=idx(k, last_col)];
            for i in k + 1..=last_row {
                let base = (i - k - 1) * width;
                let off = base + kl + k - i;
                let l = tail[off] / pivot;
                multipliers[k * kl + (i - k - 1)] = l;
                if l != 0.0 {
                    tail[off] = 0.0;
                    let target = &mut tail[off + 1..off + 1 + urow.len()];
                    for (t, u) in target.iter_mut().zip(urow) {
                        *t -= l * u;
                    }
                }
            }
        }
        Ok(Self {
            n,
            kl,
            ku,
            width,
            rows,
            pivots,
            multipliers,
        })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let n = self.n;
        let mut x = b.to_vec();
        for k in 0..n {
            x.swap(k, self.pivots[k]);
            let xk = x[k];
            if xk != 0.0 {
                let last_row = (k + self.kl).min(n - 1);
                for i in k + 1..=last_row {
                    x[i] -= self.multipliers[k * self.kl + (i - k - 1)] * xk;
                }
            }
        }
        for k in (0..n).rev() {
            let last_col = (k + self.kl + self.ku).min(n - 1);
            let base = k * self.width + self.kl - k;
            let mut s = x[k];
            for col in k + 1..=last_col {
                s -= self.rows[base + col] * x[col];
            }
            x[k] = s / self.rows[base + k];
        }
        x
    }
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Solves `A x = b` with one step of iterative refinement if the relative
/// residual exceeds `tol`.
pub fn solve_checked(a: &CsrMatrix, b: &[f64], tol: f64) -> Result<Vec<f64>> {
    let bn = norm2(b);
    if bn == 0.0 {
        return Ok(vec![0.0; b.len()]);
    }
    let lu = BandedLu::factor(a)?;
    let mut x = lu.solve(b);
    let residual = |x: &[f64]| -> Vec<f64> { a.matvec(x).iter().zip(b).map(|(ax, bi)| bi - ax).collect() };
    let mut r = residual(&x);
    if norm2(&r) / bn > tol {
        let dx = lu.solve(&r);
        x.iter_mut().zip(dx).for_each(|(xi, d)| *xi += d);
        r = residual(&x);
    }
    let rel = norm2(&r) / bn;
    if !(rel <= tol) {
        return Err(Error::Numerical(format!(
            "relative residual {rel:e} exceeds {tol:e} (possible loss of coercivity)"
        )));
    }
    Ok(x)
}
