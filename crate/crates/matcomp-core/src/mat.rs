//! Dense row-major matrix storage plus the handful of linear-algebra
//! primitives everything else is built on.
//!
//! Factorizations (SVD, QR) delegate to nalgebra; elementwise work runs
//! directly on the flat buffer. All matrices are validated finite at
//! construction so downstream arithmetic can assume clean inputs.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Relative cutoff for treating a singular value as zero: σ_j counts as
/// nonzero only when σ_j ≥ RANK_REL_TOL · σ_max.
pub const RANK_REL_TOL: f64 = 1e-10;

/// A factorization only counts if U·diag(σ)·Vᵀ reproduces the input to
/// this relative Frobenius accuracy; failures trigger the Jacobi fallback.
const SVD_ROUNDTRIP_REL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    n_rows: usize,
    n_cols: usize,
    entries: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        assert!(n_rows > 0 && n_cols > 0, "matrix dimensions must be positive");
        DenseMatrix {
            n_rows,
            n_cols,
            entries: vec![0.0; n_rows * n_cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    /// Build from a row-major buffer; rejects length mismatches and
    /// non-finite entries.
    pub fn from_vec(n_rows: usize, n_cols: usize, entries: Vec<f64>) -> Result<Self> {
        if n_rows == 0 || n_cols == 0 {
            return Err(Error::InvalidArgument(
                "matrix dimensions must be positive".into(),
            ));
        }
        if entries.len() != n_rows * n_cols {
            return Err(Error::DimensionMismatch(format!(
                "expected {} entries for a {}x{} matrix, got {}",
                n_rows * n_cols,
                n_rows,
                n_cols,
                entries.len()
            )));
        }
        if let Some(pos) = entries.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "entry ({}, {}) is {}",
                pos / n_cols,
                pos % n_cols,
                entries[pos]
            )));
        }
        Ok(DenseMatrix {
            n_rows,
            n_cols,
            entries,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() || rows[0].is_empty() {
            return Err(Error::InvalidArgument("empty matrix".into()));
        }
        let n_cols = rows[0].len();
        if let Some(bad) = rows.iter().find(|r| r.len() != n_cols) {
            return Err(Error::DimensionMismatch(format!(
                "ragged rows: expected {} columns, found a row with {}",
                n_cols,
                bad.len()
            )));
        }
        let entries: Vec<f64> = rows.iter().flatten().copied().collect();
        Self::from_vec(rows.len(), n_cols, entries)
    }

    pub fn from_fn(n_rows: usize, n_cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(n_rows, n_cols);
        for i in 0..n_rows {
            for j in 0..n_cols {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    #[inline]
    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    #[inline]
    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.n_rows, self.n_cols)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n_cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.entries[i * self.n_cols + j] = v;
    }

    #[inline]
    pub fn add_assign_at(&mut self, i: usize, j: usize, v: f64) {
        self.entries[i * self.n_cols + j] += v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.entries
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.entries
    }

    pub fn same_dims(&self, other: &DenseMatrix) -> bool {
        self.dims() == other.dims()
    }

    fn check_same_dims(&self, other: &DenseMatrix, what: &str) -> Result<()> {
        if !self.same_dims(other) {
            return Err(Error::DimensionMismatch(format!(
                "{}: {}x{} vs {}x{}",
                what, self.n_rows, self.n_cols, other.n_rows, other.n_cols
            )));
        }
        Ok(())
    }

    // ─── Elementwise arithmetic ──────────────────────────────────────────

    pub fn add(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        self.check_same_dims(other, "add")?;
        let entries = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a + b)
            .collect();
        Ok(DenseMatrix {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            entries,
        })
    }

    pub fn sub(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        self.check_same_dims(other, "sub")?;
        let entries = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a - b)
            .collect();
        Ok(DenseMatrix {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            entries,
        })
    }

    pub fn scale(&self, a: f64) -> DenseMatrix {
        DenseMatrix {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            entries: self.entries.iter().map(|v| a * v).collect(),
        }
    }

    /// self += a · other, in place.
    pub fn axpy(&mut self, a: f64, other: &DenseMatrix) -> Result<()> {
        self.check_same_dims(other, "axpy")?;
        for (s, o) in self.entries.iter_mut().zip(&other.entries) {
            *s += a * o;
        }
        Ok(())
    }

    /// Frobenius inner product ⟨⟨A, B⟩⟩ = Σ A_jk B_jk.
    pub fn dot(&self, other: &DenseMatrix) -> Result<f64> {
        self.check_same_dims(other, "dot")?;
        Ok(self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a * b)
            .sum())
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
    }

    pub fn transpose(&self) -> DenseMatrix {
        DenseMatrix::from_fn(self.n_cols, self.n_rows, |i, j| self.get(j, i))
    }

    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.n_cols != other.n_rows {
            return Err(Error::DimensionMismatch(format!(
                "matmul: {}x{} times {}x{}",
                self.n_rows, self.n_cols, other.n_rows, other.n_cols
            )));
        }
        let mut out = DenseMatrix::zeros(self.n_rows, other.n_cols);
        for i in 0..self.n_rows {
            for k in 0..self.n_cols {
                let aik = self.get(i, k);
                if aik == 0.0 {
                    continue;
                }
                for j in 0..other.n_cols {
                    out.entries[i * out.n_cols + j] += aik * other.get(k, j);
                }
            }
        }
        Ok(out)
    }

    // ─── Factorizations ─────────────────────────────────────────────────

    pub(crate) fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n_rows, self.n_cols, &self.entries)
    }

    pub(crate) fn from_dmatrix(m: &DMatrix<f64>) -> DenseMatrix {
        DenseMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
    }

    /// Full thin SVD, singular values sorted descending. Non-convergence is
    /// an explicit error.
    ///
    /// The nalgebra factorization is verified by recomposition before it is
    /// returned: on exactly rank-deficient inputs its vector-accumulating
    /// path can emit U, σ, Vᵀ that do not multiply back to the input (the
    /// values-only path stays correct, so the damage is silent). Broken
    /// factorizations are recomputed with one-sided Jacobi rotations.
    pub fn svd(&self) -> Result<Svd> {
        if let Some(checked) = self.svd_via_backend()? {
            return Ok(checked);
        }
        self.svd_jacobi()
    }

    fn svd_via_backend(&self) -> Result<Option<Svd>> {
        let Some(svd) = self.to_dmatrix().try_svd(true, true, f64::EPSILON, 10_000) else {
            return Ok(None);
        };
        let u = svd.u.expect("u requested");
        let v_t = svd.v_t.expect("v_t requested");
        let k = svd.singular_values.len();
        // nalgebra sorts for us, but ordering is relied on everywhere below,
        // so enforce it here.
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| {
            svd.singular_values[b]
                .partial_cmp(&svd.singular_values[a])
                .expect("finite singular values")
        });
        let values: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
        let u_sorted = DenseMatrix::from_fn(u.nrows(), k, |i, j| u[(i, order[j])]);
        let vt_sorted = DenseMatrix::from_fn(k, v_t.ncols(), |i, j| v_t[(order[i], j)]);
        let candidate = Svd {
            u: u_sorted,
            values,
            vt: vt_sorted,
        };
        let residual = candidate.recompose().sub(self)?.frobenius_norm();
        if residual <= SVD_ROUNDTRIP_REL_TOL * (1.0 + self.frobenius_norm()) {
            Ok(Some(candidate))
        } else {
            Ok(None)
        }
    }

    /// One-sided Jacobi SVD: orthogonalize the columns of a working copy by
    /// plane rotations, accumulate them into V, then read off σ_j = ‖b_j‖.
    /// Slower than the backend but numerically self-contained.
    fn svd_jacobi(&self) -> Result<Svd> {
        if self.n_rows < self.n_cols {
            // A = (Aᵀ)ᵀ: factor the tall transpose and swap the factors
            let t = self.transpose().svd_jacobi()?;
            return Ok(Svd {
                u: t.vt.transpose(),
                values: t.values,
                vt: t.u.transpose(),
            });
        }
        let (m, n) = (self.n_rows, self.n_cols);
        let mut b = self.clone();
        let mut v = DenseMatrix::identity(n);
        // Columns this small carry singular values at roundoff scale; rotating
        // them only chases noise and can stall the sweep, so they are skipped.
        let negligible = (1e-15 * self.frobenius_norm()).powi(2);
        let mut converged = false;
        for _ in 0..64 {
            let mut rotated = false;
            for p in 0..n.saturating_sub(1) {
                for q in (p + 1)..n {
                    let mut alpha = 0.0;
                    let mut beta = 0.0;
                    let mut gamma = 0.0;
                    for i in 0..m {
                        let bp = b.get(i, p);
                        let bq = b.get(i, q);
                        alpha += bp * bp;
                        beta += bq * bq;
                        gamma += bp * bq;
                    }
                    if alpha <= negligible || beta <= negligible {
                        continue;
                    }
                    if gamma.abs() <= 1e-14 * (alpha * beta).sqrt() {
                        continue;
                    }
                    rotated = true;
                    let zeta = (beta - alpha) / (2.0 * gamma);
                    let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = c * t;
                    for i in 0..m {
                        let bp = b.get(i, p);
                        let bq = b.get(i, q);
                        b.set(i, p, c * bp - s * bq);
                        b.set(i, q, s * bp + c * bq);
                    }
                    for j in 0..n {
                        let vp = v.get(j, p);
                        let vq = v.get(j, q);
                        v.set(j, p, c * vp - s * vq);
                        v.set(j, q, s * vp + c * vq);
                    }
                }
            }
            if !rotated {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::SvdFailure {
                rows: self.n_rows,
                cols: self.n_cols,
            });
        }

        let mut norms: Vec<f64> = (0..n)
            .map(|j| (0..m).map(|i| b.get(i, j).powi(2)).sum::<f64>().sqrt())
            .collect();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &c| {
            norms[c]
                .partial_cmp(&norms[a])
                .expect("finite column norms")
        });
        norms = order.iter().map(|&j| norms[j]).collect();

        let sigma_max = norms.first().copied().unwrap_or(0.0);
        let mut u = DenseMatrix::zeros(m, n);
        for (out_col, &src_col) in order.iter().enumerate() {
            let sigma = norms[out_col];
            if sigma > sigma_max * 1e-15 && sigma > 0.0 {
                for i in 0..m {
                    u.set(i, out_col, b.get(i, src_col) / sigma);
                }
            }
        }
        // exact-zero directions still need orthonormal U columns; take the
        // best standard basis vector and orthogonalize against what exists
        for out_col in 0..n {
            let sigma = norms[out_col];
            if sigma > sigma_max * 1e-15 && sigma > 0.0 {
                continue;
            }
            norms[out_col] = 0.0;
            let mut filled = false;
            for candidate in 0..m {
                let mut col = vec![0.0; m];
                col[candidate] = 1.0;
                for prev in 0..out_col {
                    let dot: f64 = (0..m).map(|i| col[i] * u.get(i, prev)).sum();
                    for (i, value) in col.iter_mut().enumerate() {
                        *value -= dot * u.get(i, prev);
                    }
                }
                let norm = col.iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm > 0.5 {
                    for (i, value) in col.iter().enumerate() {
                        u.set(i, out_col, value / norm);
                    }
                    filled = true;
                    break;
                }
            }
            if !filled {
                return Err(Error::SvdFailure {
                    rows: self.n_rows,
                    cols: self.n_cols,
                });
            }
        }

        let vt = DenseMatrix::from_fn(n, n, |i, j| v.get(j, order[i]));
        Ok(Svd {
            u,
            values: norms,
            vt,
        })
    }

    /// Singular values only (descending). Routed through the verified
    /// factorization so every consumer sees consistent spectra.
    pub fn singular_values(&self) -> Result<Vec<f64>> {
        Ok(self.svd()?.values)
    }

    /// Largest singular value.
    pub fn operator_norm(&self) -> Result<f64> {
        Ok(self.singular_values()?.first().copied().unwrap_or(0.0))
    }

    pub fn nuclear_norm(&self) -> Result<f64> {
        Ok(self.singular_values()?.iter().sum())
    }

    /// Count of singular values above RANK_REL_TOL · σ_max.
    pub fn numerical_rank(&self) -> Result<usize> {
        Ok(numerical_rank_of(&self.singular_values()?))
    }
}

/// Thin SVD A = U · diag(values) · Vᵀ with `values` sorted descending.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: DenseMatrix,
    pub values: Vec<f64>,
    pub vt: DenseMatrix,
}

impl Svd {
    /// U · diag(values) · Vᵀ.
    pub fn recompose(&self) -> DenseMatrix {
        self.recompose_with(&self.values)
    }

    /// U · diag(v) · Vᵀ for a replacement value vector (used by singular
    /// value shrinkage).
    pub fn recompose_with(&self, values: &[f64]) -> DenseMatrix {
        assert_eq!(values.len(), self.values.len());
        let (m, k) = self.u.dims();
        let n = self.vt.n_cols();
        let mut out = DenseMatrix::zeros(m, n);
        for l in 0..k {
            let s = values[l];
            if s == 0.0 {
                continue;
            }
            for i in 0..m {
                let uis = self.u.get(i, l) * s;
                if uis == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out.add_assign_at(i, j, uis * self.vt.get(l, j));
                }
            }
        }
        out
    }
}

/// Numerical rank of a descending singular value vector.
pub fn numerical_rank_of(values: &[f64]) -> usize {
    let sigma_max = values.first().copied().unwrap_or(0.0);
    if sigma_max <= 0.0 {
        return 0;
    }
    values.iter().filter(|&&s| s >= RANK_REL_TOL * sigma_max).count()
}
