//! Small dense linear algebra for the complex Hermitian and real matrices
//! that carry spectral densities, prediction-error covariances and Whittle
//! curvature terms. Dimensions stay tiny (p ≤ 16), so everything is direct:
//! LU with partial pivoting for determinants and inverses, cyclic Jacobi
//! sweeps for Hermitian eigendecompositions.

use num_complex::Complex64;

use crate::error::{LgcError, Result};

pub type C64 = Complex64;

/// Relative pivot threshold below which LU-based inversion reports a
/// singular matrix.
pub const SINGULARITY_RTOL: f64 = 1e-14;

/// Eigenvalues below this are treated as violations of positive
/// semidefiniteness.
pub const PSD_EIG_TOL: f64 = -1e-10;

// ---------------------------------------------------------------------------
// Complex matrices
// ---------------------------------------------------------------------------

/// Dense complex matrix in row-major order. Square in almost all uses; the
/// rectangular case appears only for cross-spectral blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct CMat {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl CMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows >= 1 && cols >= 1, "matrix dimensions must be positive");
        CMat {
            rows,
            cols,
            data: vec![C64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = CMat::zeros(n, n);
        for i in 0..n {
            m.set(i, i, C64::new(1.0, 0.0));
        }
        m
    }

    pub fn diag(entries: &[C64]) -> Self {
        let mut m = CMat::zeros(entries.len(), entries.len());
        for (i, &e) in entries.iter().enumerate() {
            m.set(i, i, e);
        }
        m
    }

    pub fn from_rows(rows: &[Vec<C64>]) -> Self {
        let r = rows.len();
        assert!(r >= 1);
        let c = rows[0].len();
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        CMat {
            rows: r,
            cols: c,
            data: rows.iter().flatten().copied().collect(),
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut m = CMat::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Side length of a square matrix.
    pub fn dim(&self) -> usize {
        debug_assert!(self.is_square());
        self.rows
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: C64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn transpose(&self) -> CMat {
        CMat::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn conj_transpose(&self) -> CMat {
        CMat::from_fn(self.cols, self.rows, |i, j| self.get(j, i).conj())
    }

    pub fn mul(&self, rhs: &CMat) -> CMat {
        assert_eq!(self.cols, rhs.rows, "inner dimensions must agree");
        let mut out = CMat::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let aik = self.get(i, k);
                if aik.norm_sqr() == 0.0 {
                    continue;
                }
                for j in 0..rhs.cols {
                    let v = out.get(i, j) + aik * rhs.get(k, j);
                    out.set(i, j, v);
                }
            }
        }
        out
    }

    pub fn add(&self, rhs: &CMat) -> CMat {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        CMat::from_fn(self.rows, self.cols, |i, j| self.get(i, j) + rhs.get(i, j))
    }

    pub fn sub(&self, rhs: &CMat) -> CMat {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        CMat::from_fn(self.rows, self.cols, |i, j| self.get(i, j) - rhs.get(i, j))
    }

    pub fn scale(&self, c: C64) -> CMat {
        CMat::from_fn(self.rows, self.cols, |i, j| self.get(i, j) * c)
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim()).map(|i| self.get(i, i)).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Largest entry of the anti-Hermitian part, max |a_ij − conj(a_ji)| / 2.
    pub fn hermitian_defect(&self) -> f64 {
        assert!(self.is_square());
        let mut d = 0.0f64;
        for i in 0..self.rows {
            for j in 0..self.cols {
                d = d.max(0.5 * (self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        d
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.is_square() && self.hermitian_defect() <= tol
    }

    /// (A + Aᴴ)/2.
    pub fn hermitize(&self) -> CMat {
        assert!(self.is_square());
        CMat::from_fn(self.rows, self.cols, |i, j| {
            0.5 * (self.get(i, j) + self.get(j, i).conj())
        })
    }

    /// Copy of the block with rows in `r0..r1`, columns in `c0..c1`.
    pub fn block(&self, r0: usize, r1: usize, c0: usize, c1: usize) -> CMat {
        assert!(r0 < r1 && r1 <= self.rows && c0 < c1 && c1 <= self.cols);
        CMat::from_fn(r1 - r0, c1 - c0, |i, j| self.get(r0 + i, c0 + j))
    }

    /// Stack `top` above `bottom`.
    pub fn vstack(top: &CMat, bottom: &CMat) -> CMat {
        assert_eq!(top.cols, bottom.cols);
        CMat::from_fn(top.rows + bottom.rows, top.cols, |i, j| {
            if i < top.rows {
                top.get(i, j)
            } else {
                bottom.get(i - top.rows, j)
            }
        })
    }

    /// Place `left` beside `right`.
    pub fn hstack(left: &CMat, right: &CMat) -> CMat {
        assert_eq!(left.rows, right.rows);
        CMat::from_fn(left.rows, left.cols + right.cols, |i, j| {
            if j < left.cols {
                left.get(i, j)
            } else {
                right.get(i, j - left.cols)
            }
        })
    }
}

/// LU decomposition with partial pivoting; returns (packed LU, pivot rows,
/// sign of the permutation). Never fails: zero pivots simply propagate.
fn lu_decompose(m: &CMat) -> (CMat, Vec<usize>, f64) {
    let n = m.dim();
    let mut lu = m.clone();
    let mut piv: Vec<usize> = (0..n).collect();
    let mut sign = 1.0;
    for k in 0..n {
        // pick the largest remaining pivot in column k
        let mut best = k;
        let mut best_abs = lu.get(k, k).norm();
        for i in (k + 1)..n {
            let a = lu.get(i, k).norm();
            if a > best_abs {
                best = i;
                best_abs = a;
            }
        }
        if best != k {
            for j in 0..n {
                let tmp = lu.get(k, j);
                lu.set(k, j, lu.get(best, j));
                lu.set(best, j, tmp);
            }
            piv.swap(k, best);
            sign = -sign;
        }
        let pivot = lu.get(k, k);
        if pivot.norm() == 0.0 {
            continue;
        }
        for i in (k + 1)..n {
            let factor = lu.get(i, k) / pivot;
            lu.set(i, k, factor);
            for j in (k + 1)..n {
                let v = lu.get(i, j) - factor * lu.get(k, j);
                lu.set(i, j, v);
            }
        }
    }
    (lu, piv, sign)
}

/// Determinant via LU with partial pivoting. A zero determinant is a valid
/// return value, not an error.
pub fn cdet(m: &CMat) -> C64 {
    assert!(m.is_square(), "determinant requires a square matrix");
    let n = m.dim();
    let (lu, _, sign) = lu_decompose(m);
    let mut det = C64::new(sign, 0.0);
    for k in 0..n {
        det *= lu.get(k, k);
    }
    det
}

/// Inverse via LU with partial pivoting. Reports `SingularMatrix` when a
/// pivot falls below `SINGULARITY_RTOL` relative to the largest entry.
pub fn cinv(m: &CMat) -> Result<CMat> {
    assert!(m.is_square(), "inverse requires a square matrix");
    let n = m.dim();
    let scale = m.max_abs();
    let threshold = SINGULARITY_RTOL * scale.max(f64::MIN_POSITIVE);
    let (lu, piv, _) = lu_decompose(m);
    for k in 0..n {
        if lu.get(k, k).norm() <= threshold {
            return Err(LgcError::SingularMatrix(format!(
                "pivot {:.3e} below threshold {:.3e} at step {k}",
                lu.get(k, k).norm(),
                threshold
            )));
        }
    }
    // solve A x = e_j column by column
    let mut inv = CMat::zeros(n, n);
    let mut col = vec![C64::new(0.0, 0.0); n];
    for j in 0..n {
        for (i, c) in col.iter_mut().enumerate() {
            *c = if piv[i] == j {
                C64::new(1.0, 0.0)
            } else {
                C64::new(0.0, 0.0)
            };
        }
        // forward substitution (unit lower triangle)
        for i in 1..n {
            for k in 0..i {
                let t = lu.get(i, k) * col[k];
                col[i] -= t;
            }
        }
        // back substitution
        for i in (0..n).rev() {
            for k in (i + 1)..n {
                let t = lu.get(i, k) * col[k];
                col[i] -= t;
            }
            col[i] /= lu.get(i, i);
        }
        for i in 0..n {
            inv.set(i, j, col[i]);
        }
    }
    Ok(inv)
}

/// Eigendecomposition of a Hermitian matrix by cyclic Jacobi sweeps with
/// complex plane rotations. Returns eigenvalues (ascending) and a unitary
/// matrix whose columns are the matching eigenvectors.
pub fn hermitian_eigen(m: &CMat) -> Result<(Vec<f64>, CMat)> {
    let n = m.dim();
    let defect = m.hermitian_defect();
    let scale = m.max_abs().max(1.0);
    if defect > 1e-9 * scale {
        return Err(LgcError::Domain(format!(
            "hermitian_eigen requires a Hermitian input (defect {defect:.3e})"
        )));
    }
    let mut a = m.hermitize();
    let mut q = CMat::identity(n);
    let tol = 1e-15 * scale;

    for _sweep in 0..100 {
        let mut off = 0.0f64;
        for p in 0..n {
            for r in (p + 1)..n {
                off = off.max(a.get(p, r).norm());
            }
        }
        if off <= tol {
            break;
        }
        for p in 0..n {
            for r in (p + 1)..n {
                let apr = a.get(p, r);
                let mag = apr.norm();
                if mag <= tol * 1e-2 {
                    continue;
                }
                // phase-rotate the (p, r) block to the real symmetric case
                // (D = diag(1, conj(φ)) with φ = a_pr/|a_pr| makes the block
                // [[app, |a_pr|], [|a_pr|, arr]]), then zero it with the
                // small-angle root of b(c²−s²) + cs(arr−app) = 0
                let phase = apr / mag;
                let app = a.get(p, p).re;
                let arr = a.get(r, r).re;
                let rho = (arr - app) / (2.0 * mag);
                let t = if rho >= 0.0 {
                    -1.0 / (rho + (1.0 + rho * rho).sqrt())
                } else {
                    1.0 / (-rho + (1.0 + rho * rho).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // unitary plane rotation V = diag(1, conj(φ)) · [[c, −s], [s, c]]
                let vpp = C64::new(c, 0.0);
                let vrp = phase.conj() * s;
                let vpr = C64::new(-s, 0.0);
                let vrr = phase.conj() * c;
                // A ← Vᴴ A V, acting on rows/cols p and r
                for j in 0..n {
                    let ap = a.get(p, j);
                    let ar = a.get(r, j);
                    a.set(p, j, vpp.conj() * ap + vrp.conj() * ar);
                    a.set(r, j, vpr.conj() * ap + vrr.conj() * ar);
                }
                for i in 0..n {
                    let ap = a.get(i, p);
                    let ar = a.get(i, r);
                    a.set(i, p, ap * vpp + ar * vrp);
                    a.set(i, r, ap * vpr + ar * vrr);
                }
                for i in 0..n {
                    let qp = q.get(i, p);
                    let qr = q.get(i, r);
                    q.set(i, p, qp * vpp + qr * vrp);
                    q.set(i, r, qp * vpr + qr * vrr);
                }
            }
        }
    }

    let mut eig: Vec<(f64, usize)> = (0..n).map(|i| (a.get(i, i).re, i)).collect();
    eig.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
    let values: Vec<f64> = eig.iter().map(|&(v, _)| v).collect();
    let vectors = CMat::from_fn(n, n, |i, j| q.get(i, eig[j].1));
    Ok((values, vectors))
}

/// Hermitian positive semidefinite square root: R with R·Rᴴ = m, itself
/// Hermitian PSD. Eigenvalues below `PSD_EIG_TOL` raise `NotPsd`; small
/// negative noise is clamped to zero.
pub fn psd_sqrt(m: &CMat) -> Result<CMat> {
    let (values, vectors) = hermitian_eigen(m)?;
    if let Some(&min) =
        values
            .iter()
            .filter(|v| **v < PSD_EIG_TOL)
            .reduce(|a, b| if a < b { a } else { b })
    {
        return Err(LgcError::NotPsd(min));
    }
    let n = m.dim();
    let sqrt_diag = CMat::diag(
        &values
            .iter()
            .map(|&v| C64::new(v.max(0.0).sqrt(), 0.0))
            .collect::<Vec<_>>(),
    );
    let r = vectors.mul(&sqrt_diag).mul(&vectors.conj_transpose());
    debug_assert_eq!(r.dim(), n);
    Ok(r.hermitize())
}

// ---------------------------------------------------------------------------
// Real matrices
// ---------------------------------------------------------------------------

/// Dense real matrix in row-major order. Used for VAR coefficient matrices,
/// innovation covariances and the d×d curvature/covariance matrices of the
/// estimation theory.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct RMat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl RMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows >= 1 && cols >= 1);
        RMat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = RMat::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        assert!(r >= 1);
        let c = rows[0].len();
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        RMat {
            rows: r,
            cols: c,
            data: rows.iter().flatten().copied().collect(),
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = RMat::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    pub fn diag(entries: &[f64]) -> Self {
        let mut m = RMat::zeros(entries.len(), entries.len());
        for (i, &e) in entries.iter().enumerate() {
            m.set(i, i, e);
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn dim(&self) -> usize {
        debug_assert!(self.rows == self.cols);
        self.rows
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn add_assign_at(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] += v;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn transpose(&self) -> RMat {
        RMat::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn mul(&self, rhs: &RMat) -> RMat {
        assert_eq!(self.cols, rhs.rows);
        let mut out = RMat::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let aik = self.get(i, k);
                if aik == 0.0 {
                    continue;
                }
                for j in 0..rhs.cols {
                    out.add_assign_at(i, j, aik * rhs.get(k, j));
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self.get(i, j) * v[j]).sum())
            .collect()
    }

    pub fn add(&self, rhs: &RMat) -> RMat {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        RMat::from_fn(self.rows, self.cols, |i, j| self.get(i, j) + rhs.get(i, j))
    }

    pub fn sub(&self, rhs: &RMat) -> RMat {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        RMat::from_fn(self.rows, self.cols, |i, j| self.get(i, j) - rhs.get(i, j))
    }

    pub fn scale(&self, c: f64) -> RMat {
        RMat::from_fn(self.rows, self.cols, |i, j| self.get(i, j) * c)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn symmetric_defect(&self) -> f64 {
        let mut d = 0.0f64;
        for i in 0..self.rows {
            for j in 0..self.cols {
                d = d.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        d
    }

    pub fn symmetrize(&self) -> RMat {
        RMat::from_fn(self.rows, self.cols, |i, j| {
            0.5 * (self.get(i, j) + self.get(j, i))
        })
    }

    pub fn block(&self, r0: usize, r1: usize, c0: usize, c1: usize) -> RMat {
        assert!(r0 < r1 && r1 <= self.rows && c0 < c1 && c1 <= self.cols);
        RMat::from_fn(r1 - r0, c1 - c0, |i, j| self.get(r0 + i, c0 + j))
    }

    pub fn to_cmat(&self) -> CMat {
        CMat::from_fn(self.rows, self.cols, |i, j| C64::new(self.get(i, j), 0.0))
    }

    pub fn det(&self) -> f64 {
        cdet(&self.to_cmat()).re
    }

    pub fn inverse(&self) -> Result<RMat> {
        let inv = cinv(&self.to_cmat())?;
        Ok(RMat::from_fn(self.rows, self.cols, |i, j| inv.get(i, j).re))
    }

    /// Lower-triangular Cholesky factor of a symmetric positive definite
    /// matrix; fails otherwise.
    pub fn cholesky(&self) -> Result<RMat> {
        if !self.is_square() {
            return Err(LgcError::Dimension("cholesky requires square".into()));
        }
        let n = self.rows;
        if self.symmetric_defect() > 1e-9 * self.max_abs().max(1.0) {
            return Err(LgcError::Domain(
                "cholesky requires a symmetric matrix".into(),
            ));
        }
        let mut l = RMat::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let mut sum = self.get(i, j);
                for k in 0..j {
                    sum -= l.get(i, k) * l.get(j, k);
                }
                if i == j {
                    if sum <= 0.0 {
                        return Err(LgcError::NotPsd(sum));
                    }
                    l.set(i, j, sum.sqrt());
                } else {
                    l.set(i, j, sum / l.get(j, j));
                }
            }
        }
        Ok(l)
    }

    /// Eigendecomposition of a symmetric matrix (via the Hermitian Jacobi
    /// path). Returns ascending eigenvalues and orthonormal columns.
    pub fn sym_eigen(&self) -> Result<(Vec<f64>, RMat)> {
        let (values, vectors) = hermitian_eigen(&self.to_cmat())?;
        let v = RMat::from_fn(self.rows, self.cols, |i, j| vectors.get(i, j).re);
        Ok((values, v))
    }

    /// Symmetric PSD square root (eigenvalues clamped at zero).
    pub fn psd_sqrt(&self) -> Result<RMat> {
        let r = psd_sqrt(&self.to_cmat())?;
        Ok(RMat::from_fn(self.rows, self.cols, |i, j| r.get(i, j).re))
    }

    /// Spectral radius. Exact closed form for 2×2; otherwise a Gelfand
    /// estimate from repeated squaring with renormalization.
    pub fn spectral_radius(&self) -> f64 {
        assert!(self.is_square());
        let n = self.rows;
        if n == 1 {
            return self.get(0, 0).abs();
        }
        if n == 2 {
            let tr = self.get(0, 0) + self.get(1, 1);
            let det = self.get(0, 0) * self.get(1, 1) - self.get(0, 1) * self.get(1, 0);
            let disc = tr * tr - 4.0 * det;
            if disc >= 0.0 {
                let sq = disc.sqrt();
                return (0.5 * (tr + sq)).abs().max((0.5 * (tr - sq)).abs());
            }
            return det.abs().sqrt();
        }
        // ρ(A) = lim ‖A^k‖^{1/k}; eight squarings give k = 256, which more
        // than suffices for a stability-constraint check at these sizes
        let norm0 = self.frobenius();
        if norm0 == 0.0 {
            return 0.0;
        }
        let mut b = self.scale(1.0 / norm0);
        let mut log_scale = 0.0f64;
        let mut k = 1.0f64;
        for _ in 0..8 {
            let nb = b.frobenius();
            if nb == 0.0 {
                return 0.0;
            }
            log_scale += nb.ln() / k;
            b = b.scale(1.0 / nb);
            b = b.mul(&b);
            k *= 2.0;
        }
        let nb = b.frobenius().max(f64::MIN_POSITIVE);
        norm0 * (log_scale + nb.ln() / k).exp()
    }
}
