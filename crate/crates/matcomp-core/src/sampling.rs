//! Weighted entrywise sampling model and its observation operator.
//!
//! Index pairs are drawn i.i.d. with row j ~ R_j/d_r and column k ~ C_k/d_c,
//! each draw carrying an independent uniform ±1 sign. The i-th measurement
//! matrix is X(i) = √(d_r d_c) · sign_i · e_row e_colᵀ and the response is
//!
//! ```text
//! y_i = ⟨⟨X(i), Θ*⟩⟩ + ν·ξ_i = √(d_r d_c)·sign_i·Θ*_{row,col} + ν·ξ_i
//! ```
//!
//! `GammaOperator` is the same operator conjugated into Γ = √RΘ√C
//! coordinates (each X(i) premultiplied by R^{-1/2} and postmultiplied by
//! C^{-1/2}), which is what the solver differentiates through.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::mat::DenseMatrix;
use crate::weights::WeightPair;

// ─── Sample indices ─────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampleIndex {
    pub row: usize,
    pub col: usize,
    /// ±1.
    pub sign: i8,
}

impl SampleIndex {
    pub fn new(row: usize, col: usize, sign: i8) -> Result<Self> {
        if sign != 1 && sign != -1 {
            return Err(Error::InvalidArgument(format!(
                "sign must be +1 or -1, got {sign}"
            )));
        }
        Ok(SampleIndex { row, col, sign })
    }
}

fn check_bounds(indices: &[SampleIndex], d_r: usize, d_c: usize) -> Result<()> {
    for (i, idx) in indices.iter().enumerate() {
        if idx.row >= d_r || idx.col >= d_c {
            return Err(Error::InvalidArgument(format!(
                "index {} at ({}, {}) outside a {}x{} matrix",
                i, idx.row, idx.col, d_r, d_c
            )));
        }
        if idx.sign != 1 && idx.sign != -1 {
            return Err(Error::InvalidArgument(format!(
                "index {} has sign {}, expected +1 or -1",
                i, idx.sign
            )));
        }
    }
    Ok(())
}

/// Inverse-CDF sampler over one weight vector, O(log d) per draw.
struct CumulativeSampler {
    cdf: Vec<f64>,
}

impl CumulativeSampler {
    fn new(weights: &[f64]) -> Self {
        let mut acc = 0.0;
        let cdf = weights
            .iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect();
        CumulativeSampler { cdf }
    }

    fn draw(&self, rng: &mut impl Rng) -> usize {
        let total = *self.cdf.last().expect("nonempty weights");
        let u: f64 = rng.random::<f64>() * total;
        self.cdf.partition_point(|&c| c <= u).min(self.cdf.len() - 1)
    }
}

fn sample_indices_impl(
    w: &WeightPair,
    n: usize,
    random_signs: bool,
    rng: &mut impl Rng,
) -> Result<Vec<SampleIndex>> {
    if n == 0 {
        return Err(Error::InvalidArgument("need at least one sample".into()));
    }
    let rows = CumulativeSampler::new(w.row_weights());
    let cols = CumulativeSampler::new(w.col_weights());
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let row = rows.draw(rng);
        let col = cols.draw(rng);
        let sign = if random_signs && rng.random::<bool>() {
            -1
        } else {
            1
        };
        out.push(SampleIndex { row, col, sign });
    }
    Ok(out)
}

/// n i.i.d. weighted index draws with uniform random ±1 signs.
pub fn sample_indices(w: &WeightPair, n: usize, rng: &mut impl Rng) -> Result<Vec<SampleIndex>> {
    sample_indices_impl(w, n, true, rng)
}

/// Same marginals with all signs fixed to +1 (the signless model variant;
/// statistically equivalent for symmetric noise).
pub fn sample_indices_unsigned(
    w: &WeightPair,
    n: usize,
    rng: &mut impl Rng,
) -> Result<Vec<SampleIndex>> {
    sample_indices_impl(w, n, false, rng)
}

// ─── Noise ──────────────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseModel {
    /// Standard normal ξ.
    Gaussian,
    /// Unit-variance double exponential (scale 1/√2).
    Laplace,
}

impl FromStr for NoiseModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(NoiseModel::Gaussian),
            "laplace" => Ok(NoiseModel::Laplace),
            other => Err(Error::InvalidArgument(format!(
                "unknown noise model '{other}' (expected gaussian or laplace)"
            ))),
        }
    }
}

impl fmt::Display for NoiseModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NoiseModel::Gaussian => write!(f, "gaussian"),
            NoiseModel::Laplace => write!(f, "laplace"),
        }
    }
}

/// One unit-variance noise draw.
pub fn draw_noise(model: NoiseModel, rng: &mut impl Rng) -> f64 {
    match model {
        NoiseModel::Gaussian => StandardNormal.sample(rng),
        NoiseModel::Laplace => {
            // inverse CDF on u ∈ [-1/2, 1/2); scale b = 1/√2 gives unit variance
            let u: f64 = rng.random::<f64>() - 0.5;
            let t = (1.0 - 2.0 * u.abs()).max(f64::MIN_POSITIVE);
            -u.signum() * t.ln() / 2.0f64.sqrt()
        }
    }
}

// ─── Observations ───────────────────────────────────────────────────────

#[derive(Debug, Clone)]
pub struct ObservationSet {
    pub indices: Vec<SampleIndex>,
    pub responses: Vec<f64>,
    pub noise_level: f64,
    pub weights: WeightPair,
    pub seed: u64,
}

impl ObservationSet {
    pub fn new(
        indices: Vec<SampleIndex>,
        responses: Vec<f64>,
        noise_level: f64,
        weights: WeightPair,
        seed: u64,
    ) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::InvalidArgument("empty observation set".into()));
        }
        if indices.len() != responses.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} indices vs {} responses",
                indices.len(),
                responses.len()
            )));
        }
        if !(noise_level >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "noise level must be nonnegative, got {noise_level}"
            )));
        }
        check_bounds(&indices, weights.d_r(), weights.d_c())?;
        Ok(ObservationSet {
            indices,
            responses,
            noise_level,
            weights,
            seed,
        })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.indices.len()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.weights.dims()
    }
}

/// Evaluate y_i = √(d_r d_c)·sign_i·Θ*_{row,col} + ν·ξ_i for given indices.
/// `seed` is recorded in the output so a run can be traced back to it; the
/// caller supplies the generator (usually one seeded with that same value,
/// already advanced past the index draws).
pub fn observe(
    theta_star: &DenseMatrix,
    indices: &[SampleIndex],
    nu: f64,
    noise: NoiseModel,
    w: &WeightPair,
    seed: u64,
    rng: &mut impl Rng,
) -> Result<ObservationSet> {
    w.check_matches(theta_star)?;
    check_bounds(indices, w.d_r(), w.d_c())?;
    if !(nu >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "noise level must be nonnegative, got {nu}"
        )));
    }
    let root_dims = ((w.d_r() * w.d_c()) as f64).sqrt();
    let responses = indices
        .iter()
        .map(|idx| {
            let clean = root_dims * f64::from(idx.sign) * theta_star.get(idx.row, idx.col);
            if nu > 0.0 {
                clean + nu * draw_noise(noise, rng)
            } else {
                clean
            }
        })
        .collect();
    ObservationSet::new(indices.to_vec(), responses, nu, w.clone(), seed)
}

/// Sample indices and observe in one deterministic step: the entire
/// realization is a function of (theta_star, w, n, nu, noise, seed).
pub fn generate_observations(
    theta_star: &DenseMatrix,
    w: &WeightPair,
    n: usize,
    nu: f64,
    noise: NoiseModel,
    seed: u64,
) -> Result<ObservationSet> {
    let mut rng = crate::seed::seeded_rng(seed);
    let indices = sample_indices(w, n, &mut rng)?;
    observe(theta_star, &indices, nu, noise, w, seed, &mut rng)
}

// ─── Observation operator ───────────────────────────────────────────────

/// [𝔛(Θ)]_i = √(d_r d_c)·sign_i·Θ_{row,col}.
pub fn apply_operator(indices: &[SampleIndex], theta: &DenseMatrix) -> Result<Vec<f64>> {
    check_bounds(indices, theta.n_rows(), theta.n_cols())?;
    let root_dims = ((theta.n_rows() * theta.n_cols()) as f64).sqrt();
    Ok(indices
        .iter()
        .map(|idx| root_dims * f64::from(idx.sign) * theta.get(idx.row, idx.col))
        .collect())
}

/// Adjoint of [`apply_operator`]: Σ_i v_i·√(d_r d_c)·sign_i·e_row e_colᵀ,
/// so that ⟨apply(Θ), v⟩ = ⟨⟨Θ, adjoint(v)⟩⟩ exactly.
pub fn apply_adjoint(
    indices: &[SampleIndex],
    v: &[f64],
    dims: (usize, usize),
) -> Result<DenseMatrix> {
    if indices.len() != v.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} indices vs {} coefficients",
            indices.len(),
            v.len()
        )));
    }
    check_bounds(indices, dims.0, dims.1)?;
    let root_dims = ((dims.0 * dims.1) as f64).sqrt();
    let mut out = DenseMatrix::zeros(dims.0, dims.1);
    for (idx, &vi) in indices.iter().zip(v) {
        out.add_assign_at(idx.row, idx.col, root_dims * f64::from(idx.sign) * vi);
    }
    Ok(out)
}

/// The observation operator in Γ-coordinates: per-draw coefficient
/// √(d_r d_c)·sign_i/(√R_row·√C_col), so that applying it to Γ = √RΘ√C
/// reproduces `apply_operator` on Θ. Precomputes the coefficient list once;
/// the solver calls apply/adjoint every iteration.
#[derive(Debug, Clone)]
pub struct GammaOperator {
    d_r: usize,
    d_c: usize,
    rows: Vec<usize>,
    cols: Vec<usize>,
    coefs: Vec<f64>,
    max_multiplicity: usize,
}

impl GammaOperator {
    pub fn new(indices: &[SampleIndex], w: &WeightPair) -> Result<Self> {
        check_bounds(indices, w.d_r(), w.d_c())?;
        let root_dims = ((w.d_r() * w.d_c()) as f64).sqrt();
        let mut rows = Vec::with_capacity(indices.len());
        let mut cols = Vec::with_capacity(indices.len());
        let mut coefs = Vec::with_capacity(indices.len());
        let mut counts: HashMap<(usize, usize), usize> = HashMap::new();
        for idx in indices {
            rows.push(idx.row);
            cols.push(idx.col);
            coefs.push(root_dims * f64::from(idx.sign) / (w.sqrt_row(idx.row) * w.sqrt_col(idx.col)));
            *counts.entry((idx.row, idx.col)).or_insert(0) += 1;
        }
        let max_multiplicity = counts.values().copied().max().unwrap_or(0);
        Ok(GammaOperator {
            d_r: w.d_r(),
            d_c: w.d_c(),
            rows,
            cols,
            coefs,
            max_multiplicity,
        })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.coefs.len()
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.d_r, self.d_c)
    }

    /// Largest repeat count of any (row, col) pair.
    pub fn max_multiplicity(&self) -> usize {
        self.max_multiplicity
    }

    fn check_gamma(&self, gamma: &DenseMatrix) -> Result<()> {
        if gamma.dims() != (self.d_r, self.d_c) {
            return Err(Error::DimensionMismatch(format!(
                "operator is for {}x{}, matrix is {}x{}",
                self.d_r,
                self.d_c,
                gamma.n_rows(),
                gamma.n_cols()
            )));
        }
        Ok(())
    }

    pub fn apply(&self, gamma: &DenseMatrix) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.n()];
        self.apply_into(gamma, &mut out)?;
        Ok(out)
    }

    pub fn apply_into(&self, gamma: &DenseMatrix, out: &mut [f64]) -> Result<()> {
        self.check_gamma(gamma)?;
        if out.len() != self.n() {
            return Err(Error::DimensionMismatch(format!(
                "output buffer has {} slots for {} observations",
                out.len(),
                self.n()
            )));
        }
        for i in 0..self.n() {
            out[i] = self.coefs[i] * gamma.get(self.rows[i], self.cols[i]);
        }
        Ok(())
    }

    pub fn adjoint(&self, v: &[f64]) -> Result<DenseMatrix> {
        let mut out = DenseMatrix::zeros(self.d_r, self.d_c);
        self.adjoint_into(v, &mut out)?;
        Ok(out)
    }

    /// Overwrites `out` with the adjoint applied to `v`.
    pub fn adjoint_into(&self, v: &[f64], out: &mut DenseMatrix) -> Result<()> {
        if v.len() != self.n() {
            return Err(Error::DimensionMismatch(format!(
                "{} coefficients for {} observations",
                v.len(),
                self.n()
            )));
        }
        self.check_gamma(out)?;
        out.as_mut_slice().fill(0.0);
        for i in 0..self.n() {
            out.add_assign_at(self.rows[i], self.cols[i], self.coefs[i] * v[i]);
        }
        Ok(())
    }
}
