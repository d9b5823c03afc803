//! Declarative Monte-Carlo experiment runner: generate a random target of
//! a declared class, sample noisy observations, solve, and record both
//! squared errors per trial, with every trial reproducible from one
//! master seed. Includes the per-(d, n) summary with the curve-collapse
//! statistic and the log-log slope of the mean error.

use std::collections::HashSet;
use std::path::PathBuf;
use std::time::Instant;

use anyhow::{ensure, Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use matcomp_core::gen::{random_low_rank, random_lq};
use matcomp_core::measures::{lq_membership, measures, to_gamma};
use matcomp_core::sampling::{generate_observations, NoiseModel};
use matcomp_core::seed::{derive_seed, seeded_rng};
use matcomp_core::solver::{default_lambda, solve, SolverOptions};
use matcomp_core::WeightPair;

use crate::io::read_weights;

// ─── Configuration ──────────────────────────────────────────────────────

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "snake_case")]
pub enum RankRule {
    /// r = ⌈(ln d)²⌉.
    LogSq,
    Fixed(usize),
}

impl Default for RankRule {
    fn default() -> Self {
        RankRule::LogSq
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "snake_case")]
pub enum LambdaRule {
    /// Noise-calibrated default from the observation parameters.
    Auto,
    Fixed(f64),
}

impl Default for LambdaRule {
    fn default() -> Self {
        LambdaRule::Auto
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "snake_case")]
pub enum WeightsRule {
    Uniform,
    File(PathBuf),
}

impl Default for WeightsRule {
    fn default() -> Self {
        WeightsRule::Uniform
    }
}

/// Sample sizes: an explicit list, or the rule n = c·r·d·ln d over a list
/// of constants c (grid points then match across dimensions).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum NGrid {
    Explicit(Vec<usize>),
    ByConstant { c: Vec<f64> },
}

fn default_rho_q() -> f64 {
    2.0
}
fn default_nu() -> f64 {
    0.5
}
fn default_trials() -> usize {
    25
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dims: Vec<usize>,
    /// 0 means an exact-rank target; (0, 1] draws from the ℓ_q ball.
    #[serde(default)]
    pub q: f64,
    #[serde(default)]
    pub rank_rule: RankRule,
    #[serde(default = "default_rho_q")]
    pub rho_q: f64,
    #[serde(default = "default_nu")]
    pub nu: f64,
    #[serde(default = "default_trials")]
    pub trials: usize,
    pub n_grid: NGrid,
    /// Box-constraint level; absent means 2·√(32·ln d) per dimension, far
    /// above the generated spikiness so the constraint stays inactive.
    #[serde(default)]
    pub alpha_star: Option<f64>,
    #[serde(default)]
    pub lambda_rule: LambdaRule,
    pub master_seed: u64,
    #[serde(default)]
    pub weights_rule: WeightsRule,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        ensure!(!self.dims.is_empty(), "dims must be nonempty");
        ensure!(
            self.dims.iter().all(|d| *d >= 10),
            "all dimensions must be at least 10"
        );
        ensure!(self.trials >= 1, "trials must be at least 1");
        ensure!(
            (0.0..=1.0).contains(&self.q),
            "q must lie in [0, 1], got {}",
            self.q
        );
        if self.q > 0.0 {
            ensure!(self.rho_q > 0.0, "rho_q must be positive when q > 0");
        }
        ensure!(self.nu >= 0.0, "nu must be nonnegative");
        if let Some(a) = self.alpha_star {
            ensure!(a > 0.0, "alpha_star must be positive");
        }
        if let RankRule::Fixed(r) = self.rank_rule {
            ensure!(r >= 1, "fixed rank must be at least 1");
            for d in &self.dims {
                ensure!(r <= *d, "fixed rank {r} exceeds dimension {d}");
            }
        }
        if let LambdaRule::Fixed(l) = self.lambda_rule {
            ensure!(l > 0.0, "fixed lambda must be positive");
        }
        match &self.n_grid {
            NGrid::Explicit(ns) => {
                ensure!(!ns.is_empty(), "n_grid must be nonempty");
                ensure!(ns.iter().all(|n| *n >= 1), "sample sizes must be positive");
            }
            NGrid::ByConstant { c } => {
                ensure!(!c.is_empty(), "n_grid constant list must be nonempty");
                ensure!(c.iter().all(|v| *v > 0.0), "grid constants must be positive");
            }
        }
        Ok(())
    }

    pub fn rank_for(&self, d: usize) -> usize {
        match self.rank_rule {
            RankRule::LogSq => (d as f64).ln().powi(2).ceil() as usize,
            RankRule::Fixed(r) => r,
        }
    }

    pub fn alpha_for(&self, d: usize) -> f64 {
        self.alpha_star
            .unwrap_or_else(|| 2.0 * (32.0 * (d as f64).ln()).sqrt())
    }

    /// Sample sizes rescale by r·d·ln d in the exact-rank regime and by
    /// ρ_q^{1/(1−q/2)}·d·ln d inside an lq ball. Curves for different d
    /// coincide when plotted against n divided by this scale.
    fn n_scale(&self, d: usize, r: usize) -> f64 {
        let d = d as f64;
        if self.q == 0.0 {
            r as f64 * d * d.ln()
        } else {
            self.rho_q.powf(1.0 / (1.0 - self.q / 2.0)) * d * d.ln()
        }
    }

    pub fn n_values(&self, d: usize, r: usize) -> Vec<usize> {
        match &self.n_grid {
            NGrid::Explicit(ns) => ns.clone(),
            NGrid::ByConstant { c } => {
                let base = self.n_scale(d, r);
                c.iter().map(|c| (c * base).round() as usize).collect()
            }
        }
    }

    pub fn rescaled_n(&self, d: usize, r: usize, n: usize) -> f64 {
        n as f64 / self.n_scale(d, r)
    }
}

// ─── Result rows ────────────────────────────────────────────────────────

/// One trial. Field order is the CSV column order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResultRow {
    pub d: usize,
    pub r: usize,
    pub q: f64,
    /// Config radius, echoed in every row (unused when q = 0).
    pub rho_q: f64,
    pub n: usize,
    pub trial: usize,
    pub seed: u64,
    pub lambda: f64,
    /// ‖Θ̂ − Θ*‖² in the weighted Frobenius norm.
    pub mse_weighted_frob: f64,
    /// ‖Θ̂ − Θ*‖² in the plain Frobenius norm.
    pub mse_frob: f64,
    pub rescaled_n: f64,
    pub iterations: usize,
    /// Wall-clock solve time; the only column a rerun does not reproduce.
    pub runtime_ms: f64,
    pub converged: bool,
}

struct Task {
    d: usize,
    r: usize,
    n: usize,
    trial: usize,
    seed: u64,
    weights: WeightPair,
}

fn resolve_weights(rule: &WeightsRule, d: usize) -> Result<WeightPair> {
    match rule {
        WeightsRule::Uniform => Ok(WeightPair::uniform(d, d)),
        WeightsRule::File(path) => {
            let w = read_weights(path)?;
            ensure!(
                w.dims() == (d, d),
                "weights file {} is {}x{} but the experiment needs {d}x{d}",
                path.display(),
                w.d_r(),
                w.d_c()
            );
            Ok(w)
        }
    }
}

fn run_task(cfg: &ExperimentConfig, task: &Task) -> Result<ResultRow> {
    let Task { d, r, n, trial, seed, ref weights } = *task;
    let spike_cap = (32.0 * (d as f64).ln()).sqrt();

    // independent streams for the target and the observations
    let mut theta_rng = seeded_rng(derive_seed(seed, &[1]));
    let theta_star = if cfg.q == 0.0 {
        random_low_rank(d, d, r, spike_cap, weights, &mut theta_rng)?
    } else {
        random_lq(d, cfg.q, cfg.rho_q, weights, &mut theta_rng)?
    };

    // the generated target must sit in its declared class
    if cfg.q == 0.0 {
        let rep = measures(&theta_star, weights)?;
        ensure!(
            theta_star.numerical_rank()? <= r,
            "trial {trial}: generated rank exceeds {r}"
        );
        ensure!(
            (rep.weighted_frobenius - 1.0).abs() <= 1e-8,
            "trial {trial}: target norm {} is not 1",
            rep.weighted_frobenius
        );
        let alpha = rep.spikiness.context("zero target")?;
        ensure!(
            alpha <= spike_cap * (1.0 + 1e-10),
            "trial {trial}: target spikiness {alpha} exceeds {spike_cap}"
        );
    } else {
        let check = lq_membership(&theta_star, weights, cfg.q, cfg.rho_q * (1.0 + 1e-8))?;
        ensure!(
            check.member,
            "trial {trial}: target leaves the ball, radius {}",
            check.value
        );
    }

    let obs = generate_observations(
        &theta_star,
        weights,
        n,
        cfg.nu,
        NoiseModel::Gaussian,
        derive_seed(seed, &[2]),
    )?;

    let lambda = match cfg.lambda_rule {
        LambdaRule::Auto => {
            default_lambda(cfg.nu, weights.l_bound(), weights.mean_dim(), n)?.recommended()
        }
        LambdaRule::Fixed(l) => l,
    };

    let start = Instant::now();
    let est = solve(&obs, lambda, cfg.alpha_for(d), &SolverOptions::default())?;
    let runtime_ms = start.elapsed().as_secs_f64() * 1e3;

    let diff = est.theta_hat.sub(&theta_star)?;
    let mse_weighted_frob = to_gamma(&diff, weights)?.frobenius_norm().powi(2);
    let mse_frob = diff.frobenius_norm().powi(2);

    Ok(ResultRow {
        d,
        r,
        q: cfg.q,
        rho_q: cfg.rho_q,
        n,
        trial,
        seed,
        lambda,
        mse_weighted_frob,
        mse_frob,
        rescaled_n: cfg.rescaled_n(d, r, n),
        iterations: est.iterations,
        runtime_ms,
        converged: est.converged,
    })
}

/// Run every (d, n, trial) cell of the config. Rows come back in
/// deterministic (d, n, trial) order regardless of `jobs`; seeds are
/// derived per triple and collision-checked. Solver non-convergence is
/// recorded in the row, not raised.
pub fn run_experiment(cfg: &ExperimentConfig, jobs: usize) -> Result<Vec<ResultRow>> {
    cfg.validate()?;

    let mut tasks = Vec::new();
    let mut seen_seeds = HashSet::new();
    for &d in &cfg.dims {
        let weights = resolve_weights(&cfg.weights_rule, d)?;
        let r = cfg.rank_for(d);
        ensure!(r <= d, "rank rule gives r = {r} > d = {d}");
        let n_values = cfg.n_values(d, r);
        let mut seen_n = HashSet::new();
        for n in n_values {
            ensure!(
                seen_n.insert(n),
                "duplicate sample size {n} in the grid for d = {d}"
            );
            for trial in 0..cfg.trials {
                let seed = derive_seed(cfg.master_seed, &[d as u64, n as u64, trial as u64]);
                ensure!(
                    seen_seeds.insert(seed),
                    "seed collision at d = {d}, n = {n}, trial = {trial}"
                );
                tasks.push(Task {
                    d,
                    r,
                    n,
                    trial,
                    seed,
                    weights: weights.clone(),
                });
            }
        }
    }

    let run_all = || -> Result<Vec<ResultRow>> {
        tasks.par_iter().map(|t| run_task(cfg, t)).collect()
    };
    if jobs == 0 {
        run_all()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .context("building the worker pool")?;
        pool.install(run_all)
    }
}

// ─── Summaries ──────────────────────────────────────────────────────────

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SummaryCell {
    pub d: usize,
    pub n: usize,
    pub rescaled_n: f64,
    /// Mean plain-Frobenius squared error over trials.
    pub mean_mse: f64,
    pub stderr_mse: f64,
    pub trials: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CollapseStat {
    /// Max over matched grid positions of (max_d mean − min_d mean)/min_d
    /// mean; 0 means the per-d curves coincide.
    pub value: f64,
    /// Mean rescaled_n at each matched grid position.
    pub grid: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SlopeFit {
    /// Least-squares slope of ln(mean MSE) against ln(rescaled n).
    pub slope: f64,
    pub intercept: f64,
    pub points: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Summary {
    pub cells: Vec<SummaryCell>,
    pub collapse: Option<CollapseStat>,
    /// Reason the collapse statistic was omitted, when it was.
    pub collapse_note: Option<String>,
    pub slope: Option<SlopeFit>,
}

/// Group rows by (d, n), average over trials, and attach the collapse
/// statistic (matched across dimensions by grid position) and the pooled
/// log-log slope.
pub fn summarize(rows: &[ResultRow]) -> Result<Summary> {
    ensure!(!rows.is_empty(), "no rows to summarize");

    let mut groups: std::collections::BTreeMap<(usize, usize), Vec<&ResultRow>> =
        Default::default();
    for row in rows {
        groups.entry((row.d, row.n)).or_default().push(row);
    }
    let cells: Vec<SummaryCell> = groups
        .iter()
        .map(|(&(d, n), rs)| {
            let t = rs.len() as f64;
            let mean = rs.iter().map(|r| r.mse_frob).sum::<f64>() / t;
            let var = if rs.len() > 1 {
                rs.iter()
                    .map(|r| (r.mse_frob - mean).powi(2))
                    .sum::<f64>()
                    / (t - 1.0)
            } else {
                0.0
            };
            SummaryCell {
                d,
                n,
                rescaled_n: rs.iter().map(|r| r.rescaled_n).sum::<f64>() / t,
                mean_mse: mean,
                stderr_mse: (var / t).sqrt(),
                trials: rs.len(),
            }
        })
        .collect();

    // collapse across dimensions at matched grid positions
    let mut by_d: std::collections::BTreeMap<usize, Vec<&SummaryCell>> = Default::default();
    for cell in &cells {
        by_d.entry(cell.d).or_default().push(cell);
    }
    for list in by_d.values_mut() {
        list.sort_by(|a, b| a.n.cmp(&b.n));
    }
    let (collapse, collapse_note) = if by_d.len() < 2 {
        (
            None,
            Some("collapse statistic needs at least two dimensions".to_string()),
        )
    } else {
        let lens: HashSet<usize> = by_d.values().map(|v| v.len()).collect();
        if lens.len() != 1 {
            (
                None,
                Some("collapse statistic needs matching grid lengths across dimensions".into()),
            )
        } else {
            let len = *lens.iter().next().unwrap();
            let mut worst: f64 = 0.0;
            let mut grid = Vec::with_capacity(len);
            let mut degenerate = false;
            for i in 0..len {
                let means: Vec<f64> = by_d.values().map(|v| v[i].mean_mse).collect();
                let min = means.iter().cloned().fold(f64::INFINITY, f64::min);
                let max = means.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                if min <= 0.0 {
                    degenerate = true;
                    break;
                }
                worst = worst.max((max - min) / min);
                grid.push(
                    by_d.values().map(|v| v[i].rescaled_n).sum::<f64>() / by_d.len() as f64,
                );
            }
            if degenerate {
                (
                    None,
                    Some("collapse statistic undefined: a grid point has mean MSE <= 0".into()),
                )
            } else {
                (Some(CollapseStat { value: worst, grid }), None)
            }
        }
    };

    // pooled log-log fit over all positive cells
    let points: Vec<(f64, f64)> = cells
        .iter()
        .filter(|c| c.mean_mse > 0.0 && c.rescaled_n > 0.0)
        .map(|c| (c.rescaled_n.ln(), c.mean_mse.ln()))
        .collect();
    let slope = if points.len() >= 2 {
        let k = points.len() as f64;
        let mx = points.iter().map(|(x, _)| x).sum::<f64>() / k;
        let my = points.iter().map(|(_, y)| y).sum::<f64>() / k;
        let sxx: f64 = points.iter().map(|(x, _)| (x - mx).powi(2)).sum();
        let sxy: f64 = points.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
        if sxx > 0.0 {
            let slope = sxy / sxx;
            Some(SlopeFit {
                slope,
                intercept: my - slope * mx,
                points: points.len(),
            })
        } else {
            None
        }
    } else {
        None
    };

    Ok(Summary {
        cells,
        collapse,
        collapse_note,
        slope,
    })
}
