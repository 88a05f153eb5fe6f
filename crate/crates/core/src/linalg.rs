//! Dense linear algebra for the learners.
//!
//! Everything here works on small, dense, row-major matrices. The symmetric
//! eigensolver is a cyclic Jacobi iteration, which is slow asymptotically but
//! accurate to working precision on the matrix sizes metric learning produces
//! (one row and column per feature).

use std::fmt;
use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};

/// Relative asymmetry accepted by the symmetric routines.
pub const SYMMETRY_TOL: f64 = 1e-9;
/// Relative cutoff below which eigenvalues count as zero in pseudo-inverses.
pub const RANK_TOL: f64 = 1e-10;
/// Smallest admissible `lambda_min / lambda_max` of the right-hand matrix of a pencil.
const PENCIL_TOL: f64 = 1e-12;

const JACOBI_TOL: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 100;

/// Dense real matrix in row-major order. Entries are always finite.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

/// Raw data matrix, one sample per row.
pub type FeatureMatrix = Matrix;

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::dim("matrix data length", rows * cols, data.len()));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("matrix entries".into()));
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Builds a matrix from row slices; all rows must have the same length.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::dim(format!("row {i}"), cols, r.len()));
            }
            data.extend_from_slice(r);
        }
        Matrix::new(rows.len(), cols, data)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// First `rows` rows of the `cols`-dimensional identity.
    pub fn eye_rect(rows: usize, cols: usize) -> Self {
        let mut m = Matrix::zeros(rows, cols);
        for i in 0..rows.min(cols) {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Matrix::zeros(diag.len(), diag.len());
        for (i, &v) in diag.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    /// Internal constructor for results of arithmetic on finite inputs.
    pub(crate) fn from_vec_unchecked(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        Matrix { rows, cols, data }
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

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_iter(&self) -> impl Iterator<Item = &[f64]> + '_ {
        // chunks_exact(0) panics, and a zero-width matrix has no useful rows anyway
        let width = self.cols.max(1);
        self.data.chunks_exact(width).take(if self.cols == 0 { 0 } else { self.rows })
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.row_iter().map(<[f64]>::to_vec).collect()
    }

    /// Matrix made of the selected rows, in the given order.
    pub fn select_rows(&self, idx: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Matrix::from_vec_unchecked(idx.len(), self.cols, data)
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::dim("matrix product", self.cols, other.rows));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let a = self.row(i);
            let o = out.row_mut(i);
            for (k, &aik) in a.iter().enumerate() {
                if aik == 0.0 {
                    continue;
                }
                for (oj, &bkj) in o.iter_mut().zip(other.row(k)) {
                    *oj += aik * bkj;
                }
            }
        }
        Ok(out)
    }

    /// `self * other^T`, computed as row-by-row dot products.
    pub fn matmul_t(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.cols {
            return Err(Error::dim("matrix product with transpose", self.cols, other.cols));
        }
        let mut data = Vec::with_capacity(self.rows * other.rows);
        for a in self.row_iter() {
            for b in other.row_iter() {
                data.push(dot(a, b));
            }
        }
        Ok(Matrix::from_vec_unchecked(self.rows, other.rows, data))
    }

    /// `self^T * self`, mirrored so the result is exactly symmetric.
    pub fn gram(&self) -> Matrix {
        let n = self.cols;
        let mut g = Matrix::zeros(n, n);
        for r in self.row_iter() {
            for i in 0..n {
                let ri = r[i];
                if ri == 0.0 {
                    continue;
                }
                for j in i..n {
                    g.data[i * n + j] += ri * r[j];
                }
            }
        }
        for i in 0..n {
            for j in 0..i {
                g.data[i * n + j] = g.data[j * n + i];
            }
        }
        g
    }

    pub fn mul_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.cols {
            return Err(Error::dim("matrix-vector product", self.cols, v.len()));
        }
        Ok(self.row_iter().map(|r| dot(r, v)).collect())
    }

    /// `v^T A v`.
    pub fn quad_form(&self, v: &[f64]) -> f64 {
        debug_assert!(self.is_square() && v.len() == self.rows);
        self.row_iter().zip(v).map(|(r, &vi)| vi * dot(r, v)).sum()
    }

    pub fn add(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with(other, |a, b| a - b)
    }

    /// `self + alpha * other`.
    pub fn add_scaled(&self, alpha: f64, other: &Matrix) -> Result<Matrix> {
        self.zip_with(other, |a, b| a + alpha * b)
    }

    fn zip_with(&self, other: &Matrix, f: impl Fn(f64, f64) -> f64) -> Result<Matrix> {
        if self.shape() != other.shape() {
            return Err(Error::dim(
                "elementwise operation",
                self.rows * self.cols,
                other.rows * other.cols,
            ));
        }
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect();
        Ok(Matrix::from_vec_unchecked(self.rows, self.cols, data))
    }

    pub fn scale(&self, alpha: f64) -> Matrix {
        Matrix::from_vec_unchecked(
            self.rows,
            self.cols,
            self.data.iter().map(|v| v * alpha).collect(),
        )
    }

    pub fn add_identity(&self, alpha: f64) -> Matrix {
        let mut m = self.clone();
        for i in 0..self.rows.min(self.cols) {
            m[(i, i)] += alpha;
        }
        m
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    pub fn trace(&self) -> f64 {
        self.diag().iter().sum()
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Frobenius inner product `sum_ij a_ij b_ij`.
    pub fn inner(&self, other: &Matrix) -> f64 {
        debug_assert_eq!(self.shape(), other.shape());
        dot(&self.data, &other.data)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        debug_assert_eq!(self.shape(), other.shape());
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Largest `|a_ij - a_ji|`; only meaningful for square matrices.
    pub fn asymmetry(&self) -> f64 {
        let n = self.rows;
        let mut dev = 0.0f64;
        for i in 0..n {
            for j in 0..i {
                dev = dev.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        dev
    }

    /// `(A + A^T) / 2`.
    pub fn symmetrized(&self) -> Matrix {
        let n = self.rows;
        let mut s = self.clone();
        for i in 0..n {
            for j in 0..i {
                let v = 0.5 * (self[(i, j)] + self[(j, i)]);
                s[(i, j)] = v;
                s[(j, i)] = v;
            }
        }
        s
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for r in self.row_iter() {
            writeln!(f, "  {r:?}")?;
        }
        write!(f, "]")
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Eigen-decomposition of a symmetric matrix.
#[derive(Clone, Debug)]
pub struct SymEigResult {
    /// Sorted in descending order.
    pub eigenvalues: Vec<f64>,
    /// Column `i` is the unit eigenvector of `eigenvalues[i]`.
    pub eigenvectors: Matrix,
}

impl SymEigResult {
    pub fn eigenvector(&self, i: usize) -> Vec<f64> {
        self.eigenvectors.column(i)
    }

    /// `V diag(f(lambda)) V^T`, mirrored to exact symmetry.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> Matrix {
        let v = &self.eigenvectors;
        let n = v.rows();
        let k = v.cols();
        let weights: Vec<f64> = self.eigenvalues.iter().map(|&l| f(l)).collect();
        let mut out = Matrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let mut s = 0.0;
                for c in 0..k {
                    s += v[(i, c)] * weights[c] * v[(j, c)];
                }
                out[(i, j)] = s;
                out[(j, i)] = s;
            }
        }
        out
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(0.0)
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(0.0)
    }
}

fn check_symmetric(a: &Matrix) -> Result<()> {
    if !a.is_square() {
        return Err(Error::NotSquare {
            rows: a.rows(),
            cols: a.cols(),
        });
    }
    let deviation = a.asymmetry();
    if deviation > SYMMETRY_TOL * a.max_abs() {
        return Err(Error::Asymmetric { deviation });
    }
    Ok(())
}

/// Full eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Eigenvalues come back in descending order (ties keep their diagonal
/// order) and every eigenvector is flipped so that its largest-magnitude
/// entry is positive.
pub fn sym_eig(a: &Matrix) -> Result<SymEigResult> {
    check_symmetric(a)?;
    if !a.is_finite() {
        return Err(Error::NonFinite("symmetric eigensolver input".into()));
    }
    let n = a.rows();
    let mut m = a.symmetrized();
    let mut v = Matrix::identity(n);
    let target = JACOBI_TOL * m.frobenius();

    let mut converged = false;
    for _ in 0..=JACOBI_MAX_SWEEPS {
        if off_diagonal_norm(&m) <= target {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                rotate(&mut m, &mut v, p, q);
            }
        }
    }
    if !converged {
        return Err(Error::NoConvergence { size: n });
    }

    let mut order: Vec<usize> = (0..n).collect();
    // stable sort: equal eigenvalues keep their original index order
    order.sort_by(|&i, &j| m[(j, j)].total_cmp(&m[(i, i)]));

    let eigenvalues: Vec<f64> = order.iter().map(|&i| m[(i, i)]).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = v.column(src);
        normalize_with_sign(&mut col);
        for (i, val) in col.into_iter().enumerate() {
            vectors[(i, dst)] = val;
        }
    }
    Ok(SymEigResult {
        eigenvalues,
        eigenvectors: vectors,
    })
}

fn off_diagonal_norm(m: &Matrix) -> f64 {
    let n = m.rows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += m[(i, j)] * m[(i, j)];
            }
        }
    }
    s.sqrt()
}

/// One Jacobi rotation annihilating `m[p][q]`, accumulated into `v`.
fn rotate(m: &mut Matrix, v: &mut Matrix, p: usize, q: usize) {
    let apq = m[(p, q)];
    if apq == 0.0 {
        return;
    }
    let n = m.rows();
    let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
    let t = if theta.abs() > 1e150 {
        0.5 / theta
    } else {
        theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
    };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;

    for k in 0..n {
        let akp = m[(k, p)];
        let akq = m[(k, q)];
        m[(k, p)] = c * akp - s * akq;
        m[(k, q)] = s * akp + c * akq;
    }
    for k in 0..n {
        let apk = m[(p, k)];
        let aqk = m[(q, k)];
        m[(p, k)] = c * apk - s * aqk;
        m[(q, k)] = s * apk + c * aqk;
    }
    m[(p, q)] = 0.0;
    m[(q, p)] = 0.0;
    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = c * vkp - s * vkq;
        v[(k, q)] = s * vkp + c * vkq;
    }
}

fn normalize_with_sign(col: &mut [f64]) {
    let norm = col.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        col.iter_mut().for_each(|x| *x /= norm);
    }
    let mut pivot = 0;
    for (i, x) in col.iter().enumerate() {
        if x.abs() > col[pivot].abs() {
            pivot = i;
        }
    }
    if col.get(pivot).is_some_and(|&x| x < 0.0) {
        col.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Nearest positive-semidefinite matrix in Frobenius norm (eigenvalue clipping).
pub fn psd_project(a: &Matrix) -> Result<Matrix> {
    let eig = sym_eig(a)?;
    Ok(eig.reconstruct_with(|l| l.max(0.0)))
}

/// Like [`psd_project`] but with every eigenvalue raised to at least `floor`.
pub fn psd_floor(a: &Matrix, floor: f64) -> Result<Matrix> {
    let eig = sym_eig(a)?;
    Ok(eig.reconstruct_with(|l| l.max(floor)))
}

/// Square-root factor `B` of a PSD matrix, `B^T B = a`.
///
/// With `invert`, `B^T B` is instead the pseudo-inverse of `a` on its range.
/// Rows of `B` are the eigenvectors scaled by `sqrt(lambda)` (or
/// `1/sqrt(lambda)`), largest eigenvalue first.
pub fn psd_sqrt(a: &Matrix, invert: bool) -> Result<Matrix> {
    let eig = sym_eig(a)?;
    let n = a.rows();
    let lmax = eig.max_eigenvalue();
    let lmin = eig.min_eigenvalue();
    if lmin < -SYMMETRY_TOL * lmax.abs().max(lmin.abs()) {
        return Err(Error::NotPsd { eigenvalue: lmin });
    }
    if invert && lmax <= 0.0 {
        return Err(Error::ZeroRank);
    }
    let cutoff = RANK_TOL * lmax;
    let mut b = Matrix::zeros(n, n);
    for (r, &l) in eig.eigenvalues.iter().enumerate() {
        let l = l.max(0.0);
        let w = if invert {
            if l > cutoff {
                1.0 / l.sqrt()
            } else {
                0.0
            }
        } else {
            l.sqrt()
        };
        for c in 0..n {
            b[(r, c)] = w * eig.eigenvectors[(c, r)];
        }
    }
    Ok(b)
}

/// Top-`k` eigenpairs of the symmetric-definite pencil `b v = lambda w v`.
///
/// The problem is reduced to an ordinary symmetric one by whitening with
/// `C = w^{-1/2}`; eigenvectors are mapped back and scaled to unit
/// Euclidean norm with the usual sign convention.
pub fn gen_sym_eig(b: &Matrix, w: &Matrix, k: usize) -> Result<SymEigResult> {
    check_symmetric(b)?;
    check_symmetric(w)?;
    if b.shape() != w.shape() {
        return Err(Error::dim("generalized eigenproblem", b.rows(), w.rows()));
    }
    let n = b.rows();
    if k == 0 || k > n {
        return Err(Error::Validation(format!(
            "requested {k} eigenpairs of a {n}x{n} problem"
        )));
    }
    let weig = sym_eig(w)?;
    let (lmin, lmax) = (weig.min_eigenvalue(), weig.max_eigenvalue());
    if lmax <= 0.0 || lmin <= PENCIL_TOL * lmax {
        return Err(Error::IllConditioned {
            min_eigenvalue: lmin,
            max_eigenvalue: lmax,
        });
    }
    let mut c = Matrix::zeros(n, n);
    for (r, &l) in weig.eigenvalues.iter().enumerate() {
        let s = 1.0 / l.sqrt();
        for col in 0..n {
            c[(r, col)] = s * weig.eigenvectors[(col, r)];
        }
    }
    let reduced = c.matmul(b)?.matmul_t(&c)?.symmetrized();
    let eig = sym_eig(&reduced)?;

    let ct = c.transpose();
    let mut vectors = Matrix::zeros(n, k);
    for i in 0..k {
        let mut v = ct.mul_vec(&eig.eigenvector(i))?;
        normalize_with_sign(&mut v);
        for (r, val) in v.into_iter().enumerate() {
            vectors[(r, i)] = val;
        }
    }
    Ok(SymEigResult {
        eigenvalues: eig.eigenvalues[..k].to_vec(),
        eigenvectors: vectors,
    })
}

/// Inverse of a symmetric positive-definite matrix.
pub fn spd_inverse(a: &Matrix) -> Result<Matrix> {
    let eig = sym_eig(a)?;
    let lmin = eig.min_eigenvalue();
    if lmin <= 0.0 {
        return Err(Error::IllConditioned {
            min_eigenvalue: lmin,
            max_eigenvalue: eig.max_eigenvalue(),
        });
    }
    Ok(eig.reconstruct_with(|l| 1.0 / l))
}

/// `log det a` for a symmetric positive-definite matrix; `None` otherwise.
pub fn spd_logdet(a: &Matrix) -> Result<Option<f64>> {
    let eig = sym_eig(a)?;
    if eig.min_eigenvalue() <= 0.0 {
        return Ok(None);
    }
    Ok(Some(eig.eigenvalues.iter().map(|l| l.ln()).sum()))
}

/// LogDet divergence `tr(M P) - log det(M P) - d`, with `P` the inverse prior.
///
/// `prior_logdet` is `log det M0`. Returns `None` when `m` is not positive
/// definite.
pub fn logdet_divergence(m: &Matrix, prior_inv: &Matrix, prior_logdet: f64) -> Result<Option<f64>> {
    let Some(ld) = spd_logdet(m)? else {
        return Ok(None);
    };
    let d = m.rows() as f64;
    // tr(M P) for symmetric M, P
    Ok(Some(m.inner(prior_inv) - (ld - prior_logdet) - d))
}

/// `sum_ij w_ij (x_i - x_j)(x_i - x_j)^T` for an arbitrary weight matrix.
///
/// Uses the Laplacian identity `X^T (D - W - W^T) X` with
/// `D = diag(rowsum(W) + colsum(W))`, which costs `O(n^2 + n d^2)`.
pub fn weighted_scatter(x: &Matrix, w: &Matrix) -> Matrix {
    let n = x.rows();
    debug_assert_eq!(w.shape(), (n, n));
    let mut lap = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let wij = w[(i, j)];
            if wij == 0.0 {
                continue;
            }
            lap[(i, i)] += wij;
            lap[(j, j)] += wij;
            lap[(i, j)] -= wij;
            lap[(j, i)] -= wij;
        }
    }
    // X^T Lap X, then mirror for exact symmetry
    let d = x.cols();
    let mut out = Matrix::zeros(d, d);
    for i in 0..n {
        let li = lap.row(i);
        let mut acc = vec![0.0; d];
        for (j, &lij) in li.iter().enumerate() {
            if lij == 0.0 {
                continue;
            }
            for (a, &xj) in acc.iter_mut().zip(x.row(j)) {
                *a += lij * xj;
            }
        }
        let xi = x.row(i);
        for p in 0..d {
            if xi[p] == 0.0 {
                continue;
            }
            for q in 0..d {
                out[(p, q)] += xi[p] * acc[q];
            }
        }
    }
    out.symmetrized()
}
