//! Row/column sampling weights.
//!
//! A `WeightPair` holds the diagonals of R and C: entry (j, k) is sampled
//! with probability R_j C_k / (d_r d_c), so each weight vector sums to its
//! dimension. Uniform weights (all ones) recover ordinary uniform sampling
//! and make every weighted norm collapse to its plain counterpart.

use crate::error::{Error, Result};
use crate::mat::DenseMatrix;

/// Relative tolerance on the Σ weights = dimension normalization.
const SUM_REL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct WeightPair {
    row_weights: Vec<f64>,
    col_weights: Vec<f64>,
    // cached √R, √C; every norm and operator evaluation needs them
    sqrt_rows: Vec<f64>,
    sqrt_cols: Vec<f64>,
}

impl WeightPair {
    /// Validates positivity and the Σ R_j = d_r, Σ C_k = d_c normalization.
    pub fn new(row_weights: Vec<f64>, col_weights: Vec<f64>) -> Result<Self> {
        check_weight_vector(&row_weights, "row")?;
        check_weight_vector(&col_weights, "column")?;
        let sqrt_rows = row_weights.iter().map(|w| w.sqrt()).collect();
        let sqrt_cols = col_weights.iter().map(|w| w.sqrt()).collect();
        Ok(WeightPair {
            row_weights,
            col_weights,
            sqrt_rows,
            sqrt_cols,
        })
    }

    pub fn uniform(d_r: usize, d_c: usize) -> Self {
        Self::new(vec![1.0; d_r], vec![1.0; d_c]).expect("uniform weights are valid")
    }

    #[inline]
    pub fn d_r(&self) -> usize {
        self.row_weights.len()
    }

    #[inline]
    pub fn d_c(&self) -> usize {
        self.col_weights.len()
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.d_r(), self.d_c())
    }

    /// (d_r + d_c) / 2, the dimension parameter in every rate formula.
    pub fn mean_dim(&self) -> f64 {
        (self.d_r() as f64 + self.d_c() as f64) / 2.0
    }

    pub fn row_weights(&self) -> &[f64] {
        &self.row_weights
    }

    pub fn col_weights(&self) -> &[f64] {
        &self.col_weights
    }

    #[inline]
    pub fn sqrt_row(&self, j: usize) -> f64 {
        self.sqrt_rows[j]
    }

    #[inline]
    pub fn sqrt_col(&self, k: usize) -> f64 {
        self.sqrt_cols[k]
    }

    /// L = max(1, 1/min weight entry); finite because all entries are
    /// strictly positive.
    pub fn l_bound(&self) -> f64 {
        let min = self
            .row_weights
            .iter()
            .chain(&self.col_weights)
            .fold(f64::INFINITY, |acc, &w| acc.min(w));
        (1.0 / min).max(1.0)
    }

    pub fn is_uniform(&self) -> bool {
        self.row_weights.iter().all(|&w| w == 1.0) && self.col_weights.iter().all(|&w| w == 1.0)
    }

    pub fn check_matches(&self, m: &DenseMatrix) -> Result<()> {
        if m.dims() != self.dims() {
            return Err(Error::DimensionMismatch(format!(
                "matrix is {}x{} but weights are for {}x{}",
                m.n_rows(),
                m.n_cols(),
                self.d_r(),
                self.d_c()
            )));
        }
        Ok(())
    }
}

fn check_weight_vector(w: &[f64], which: &str) -> Result<()> {
    if w.is_empty() {
        return Err(Error::InvalidArgument(format!("{which} weights empty")));
    }
    if let Some(&bad) = w.iter().find(|&&v| !(v > 0.0) || !v.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "{which} weights must be strictly positive and finite, found {bad}"
        )));
    }
    let d = w.len() as f64;
    let sum: f64 = w.iter().sum();
    if (sum - d).abs() > SUM_REL_TOL * d {
        return Err(Error::InvalidArgument(format!(
            "{which} weights must sum to their dimension {d}, got {sum}"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn uniform_weights_are_flat() {
        let w = WeightPair::uniform(3, 4);
        assert_eq!(w.dims(), (3, 4));
        assert!(w.is_uniform());
        assert_abs_diff_eq!(w.l_bound(), 1.0);
        assert_abs_diff_eq!(w.mean_dim(), 3.5);
    }

    #[test]
    fn rejects_nonpositive_and_unnormalized() {
        assert!(WeightPair::new(vec![2.0, 0.0], vec![1.0, 1.0]).is_err());
        assert!(WeightPair::new(vec![-1.0, 3.0], vec![1.0, 1.0]).is_err());
        assert!(WeightPair::new(vec![1.0, 1.5], vec![1.0, 1.0]).is_err());
        assert!(WeightPair::new(vec![1.0, f64::NAN], vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn l_bound_uses_smallest_entry() {
        let w = WeightPair::new(vec![1.5, 0.5], vec![1.0, 1.0]).unwrap();
        assert_abs_diff_eq!(w.l_bound(), 2.0);
        // all weights ≥ 1 floors L at 1
        let u = WeightPair::uniform(5, 5);
        assert_abs_diff_eq!(u.l_bound(), 1.0);
    }

    #[test]
    fn sqrt_caches_match() {
        let w = WeightPair::new(vec![1.5, 0.5], vec![0.25, 1.75]).unwrap();
        assert_abs_diff_eq!(w.sqrt_row(0), 1.5f64.sqrt());
        assert_abs_diff_eq!(w.sqrt_col(0), 0.5);
    }
}
