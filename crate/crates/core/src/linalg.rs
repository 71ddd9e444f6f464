//! Dense least squares for the small, tall systems of the trajectory fit.

use thiserror::Error;

use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum LinalgError {
    #[error("system has {rows} rows but {cols} unknowns")]
    Underdetermined { rows: usize, cols: usize },
    #[error("right-hand side has length {got}, expected {expected}")]
    DimensionMismatch { got: usize, expected: usize },
    #[error("matrix is numerically rank deficient (condition estimate {condition:e})")]
    IllConditioned { condition: f64 },
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        Self {
            rows: rows.len(),
            cols,
            data: rows.iter().flatten().copied().collect(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> T {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: T) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|r| self.row(r).iter().zip(x).fold(T::zero(), |acc, (a, b)| acc + *a * *b))
            .collect()
    }
}

/// Least-squares solution of a full-column-rank system, shared across
/// several right-hand sides.
#[derive(Debug, Clone)]
pub struct LeastSquares<T> {
    pub solutions: Vec<Vec<T>>,
    /// `|R[0,0]| / |R[n-1,n-1]|` of the pivoted, column-equilibrated factor.
    pub condition: T,
}

/// Minimizes `||A x - b||` for each `b` via Householder QR with column
/// pivoting. Columns are equilibrated to unit norm first, which leaves the
/// minimizer unchanged but keeps the monomial basis well scaled.
pub fn least_squares<T: Real>(
    a: &Matrix<T>,
    rhs: &[&[T]],
    max_condition: T,
) -> Result<LeastSquares<T>, LinalgError> {
    let (m, n) = (a.rows, a.cols);
    if m < n {
        return Err(LinalgError::Underdetermined { rows: m, cols: n });
    }
    for b in rhs {
        if b.len() != m {
            return Err(LinalgError::DimensionMismatch {
                got: b.len(),
                expected: m,
            });
        }
    }

    let mut scale = vec![T::one(); n];
    let mut w = a.clone();
    for (c, s) in scale.iter_mut().enumerate() {
        let norm = (0..m).fold(T::zero(), |acc, r| acc + w.get(r, c).powi(2)).sqrt();
        if norm > T::zero() {
            *s = T::one() / norm;
            for r in 0..m {
                w.set(r, c, w.get(r, c) * *s);
            }
        }
    }
    let mut bs: Vec<Vec<T>> = rhs.iter().map(|b| b.to_vec()).collect();
    let mut perm: Vec<usize> = (0..n).collect();

    for k in 0..n {
        // pivot on the largest remaining column norm
        let col_norm = |w: &Matrix<T>, c: usize| (k..m).fold(T::zero(), |acc, r| acc + w.get(r, c).powi(2));
        let p = (k..n)
            .max_by(|&i, &j| col_norm(&w, i).partial_cmp(&col_norm(&w, j)).unwrap_or(std::cmp::Ordering::Equal).then(j.cmp(&i)))
            .unwrap();
        if p != k {
            for r in 0..m {
                let tmp = w.get(r, k);
                w.set(r, k, w.get(r, p));
                w.set(r, p, tmp);
            }
            perm.swap(k, p);
        }

        let alpha = col_norm(&w, k).sqrt();
        if alpha == T::zero() {
            continue;
        }
        let x0 = w.get(k, k);
        let alpha = if x0 > T::zero() { -alpha } else { alpha };
        // v = x - alpha e1, stored in a scratch vector
        let mut v: Vec<T> = (k..m).map(|r| w.get(r, k)).collect();
        v[0] -= alpha;
        let vnorm_sq = v.iter().fold(T::zero(), |acc, x| acc + *x * *x);
        if vnorm_sq == T::zero() {
            continue;
        }
        let reflect = |get: &dyn Fn(usize) -> T| {
            let dot = v.iter().enumerate().fold(T::zero(), |acc, (i, vi)| acc + *vi * get(k + i));
            (dot + dot) / vnorm_sq
        };
        for c in k..n {
            let f = reflect(&|r| w.get(r, c));
            for (i, vi) in v.iter().enumerate() {
                w.set(k + i, c, w.get(k + i, c) - f * *vi);
            }
        }
        for b in bs.iter_mut() {
            let f = reflect(&|r| b[r]);
            for (i, vi) in v.iter().enumerate() {
                b[k + i] -= f * *vi;
            }
        }
    }

    let r_first = w.get(0, 0).abs();
    let r_last = w.get(n - 1, n - 1).abs();
    let condition = if r_last > T::zero() { r_first / r_last } else { T::infinity() };
    if !(condition <= max_condition) {
        return Err(LinalgError::IllConditioned {
            condition: condition.as_f64(),
        });
    }

    let solutions = bs
        .iter()
        .map(|qtb| {
            let mut z = vec![T::zero(); n];
            for k in (0..n).rev() {
                let mut acc = qtb[k];
                for j in k + 1..n {
                    acc -= w.get(k, j) * z[j];
                }
                z[k] = acc / w.get(k, k);
            }
            let mut x = vec![T::zero(); n];
            for (k, &col) in perm.iter().enumerate() {
                x[col] = z[k] * scale[col];
            }
            x
        })
        .collect();
    Ok(LeastSquares {
        solutions,
        condition,
    })
}
