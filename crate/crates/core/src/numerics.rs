//! Dense complex linear algebra for channels and precoders.
//!
//! Matrices here are small (at most 32×64), so everything is a plain
//! row-major `Vec<Complex64>` with naive loops. Pivoted Gaussian elimination
//! backs both `solve` and the right pseudo-inverse used by zero-forcing.

use num_complex::Complex64;
use thiserror::Error;

/// Relative pivot threshold below which a system is treated as singular.
pub const SINGULARITY_THRESHOLD: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericsError {
    #[error("dimension mismatch in {op}: {lhs:?} vs {rhs:?}")]
    DimensionMismatch {
        op: &'static str,
        lhs: (usize, usize),
        rhs: (usize, usize),
    },
    #[error("matrix is singular or rank deficient at pivot {pivot}")]
    Singular { pivot: usize },
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("{context}: {source}")]
    Context {
        context: &'static str,
        #[source]
        source: Box<NumericsError>,
    },
}

impl NumericsError {
    /// Pivot index carried by a singularity error, looking through context.
    pub fn singular_pivot(&self) -> Option<usize> {
        match self {
            NumericsError::Singular { pivot } => Some(*pivot),
            NumericsError::Context { source, .. } => source.singular_pivot(),
            _ => None,
        }
    }
}

pub type Result<T> = std::result::Result<T, NumericsError>;

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        ComplexMatrix {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    /// Builds a matrix from row-major entries, rejecting bad lengths and
    /// non-finite values.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(NumericsError::DimensionMismatch {
                op: "from_row_major",
                lhs: (rows, cols),
                rhs: (data.len(), 1),
            });
        }
        if let Some(idx) = data.iter().position(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(NumericsError::NonFinite {
                row: idx / cols.max(1),
                col: idx % cols.max(1),
            });
        }
        Ok(ComplexMatrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        if rows.iter().any(|row| row.len() != c) {
            return Err(NumericsError::DimensionMismatch {
                op: "from_rows",
                lhs: (r, c),
                rhs: (r, rows.iter().map(|row| row.len()).max().unwrap_or(0)),
            });
        }
        Self::from_row_major(r, c, rows.concat())
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        ComplexMatrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<Complex64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    /// Copies out rows `start..start + count`.
    pub fn row_block(&self, start: usize, count: usize) -> ComplexMatrix {
        let data = self.data[start * self.cols..(start + count) * self.cols].to_vec();
        ComplexMatrix {
            rows: count,
            cols: self.cols,
            data,
        }
    }

    pub fn frobenius_norm_sqr(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.frobenius_norm_sqr().sqrt()
    }

    pub fn scale(&self, factor: Complex64) -> ComplexMatrix {
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * factor).collect(),
        }
    }

    pub fn sub(&self, other: &ComplexMatrix) -> Result<ComplexMatrix> {
        if self.shape() != other.shape() {
            return Err(NumericsError::DimensionMismatch {
                op: "sub",
                lhs: self.shape(),
                rhs: other.shape(),
            });
        }
        Ok(ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        })
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

impl std::ops::Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;

    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

pub fn matmul(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    if a.cols != b.rows {
        return Err(NumericsError::DimensionMismatch {
            op: "matmul",
            lhs: a.shape(),
            rhs: b.shape(),
        });
    }
    let mut out = ComplexMatrix::zeros(a.rows, b.cols);
    for i in 0..a.rows {
        let a_row = a.row(i);
        let out_row = &mut out.data[i * b.cols..(i + 1) * b.cols];
        for (k, &aik) in a_row.iter().enumerate() {
            if aik == Complex64::new(0.0, 0.0) {
                continue;
            }
            for (o, &bkj) in out_row.iter_mut().zip(b.row(k)) {
                *o += aik * bkj;
            }
        }
    }
    Ok(out)
}

/// Conjugate transpose.
pub fn hermitian(a: &ComplexMatrix) -> ComplexMatrix {
    ComplexMatrix::from_fn(a.cols, a.rows, |i, j| a[(j, i)].conj())
}

/// Solves `a · X = b` by Gaussian elimination with partial pivoting.
///
/// A pivot whose magnitude falls below `SINGULARITY_THRESHOLD` times the
/// largest entry magnitude of the original `a` is reported as
/// [`NumericsError::Singular`] with the elimination step index.
pub fn solve(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    let n = a.rows;
    if a.rows != a.cols {
        return Err(NumericsError::DimensionMismatch {
            op: "solve (square)",
            lhs: a.shape(),
            rhs: a.shape(),
        });
    }
    if b.rows != n {
        return Err(NumericsError::DimensionMismatch {
            op: "solve",
            lhs: a.shape(),
            rhs: b.shape(),
        });
    }
    let m = b.cols;
    let mut lu = a.clone();
    let mut x = b.clone();

    let scale = lu.data.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if n > 0 && scale == 0.0 {
        return Err(NumericsError::Singular { pivot: 0 });
    }
    let tol = SINGULARITY_THRESHOLD * scale;

    for k in 0..n {
        let (p, pmag) = (k..n)
            .map(|i| (i, lu[(i, k)].norm()))
            .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if !(pmag >= tol) || pmag == 0.0 {
            return Err(NumericsError::Singular { pivot: k });
        }
        if p != k {
            for j in 0..n {
                lu.data.swap(k * n + j, p * n + j);
            }
            for j in 0..m {
                x.data.swap(k * m + j, p * m + j);
            }
        }
        let pivot = lu[(k, k)];
        for i in k + 1..n {
            let factor = lu[(i, k)] / pivot;
            if factor == Complex64::new(0.0, 0.0) {
                continue;
            }
            lu[(i, k)] = Complex64::new(0.0, 0.0);
            for j in k + 1..n {
                let v = lu[(k, j)];
                lu[(i, j)] -= factor * v;
            }
            for j in 0..m {
                let v = x[(k, j)];
                x[(i, j)] -= factor * v;
            }
        }
    }

    for k in (0..n).rev() {
        let pivot = lu[(k, k)];
        for j in 0..m {
            let mut acc = x[(k, j)];
            for t in k + 1..n {
                acc -= lu[(k, t)] * x[(t, j)];
            }
            x[(k, j)] = acc / pivot;
        }
    }
    Ok(x)
}

/// `Hᴴ (H Hᴴ)⁻¹` for a wide, full-row-rank `h`.
pub fn right_pseudo_inverse(h: &ComplexMatrix) -> Result<ComplexMatrix> {
    if h.rows > h.cols {
        return Err(NumericsError::DimensionMismatch {
            op: "right_pseudo_inverse (rows <= cols)",
            lhs: h.shape(),
            rhs: (h.cols, h.rows),
        });
    }
    let hh = hermitian(h);
    let gram = matmul(h, &hh)?;
    // Solve (H Hᴴ) Y = H, then W = Yᴴ, which equals Hᴴ (H Hᴴ)⁻¹ because the
    // Gram matrix is Hermitian.
    let y = solve(&gram, h).map_err(|e| NumericsError::Context {
        context: "ZF infeasible: users not separable",
        source: Box::new(e),
    })?;
    Ok(hermitian(&y))
}
