//! `matcomp`: weighted matrix completion tools. Simulate observation
//! sets, fit the box-constrained nuclear-norm estimator, check the
//! restricted-convexity and noise-scaling predictions, build packing
//! sets, and run the full Monte-Carlo experiment grid.

use std::fs;
use std::path::PathBuf;

use anyhow::{bail, ensure, Context, Result};
use clap::{Parser, Subcommand};

use matcomp_cli::experiment::{run_experiment, summarize, ExperimentConfig};
use matcomp_cli::io;
use matcomp_cli::reports;

use matcomp_core::diagnostics::RateClass;
use matcomp_core::gen::{random_low_rank, random_lq};
use matcomp_core::sampling::{generate_observations, NoiseModel};
use matcomp_core::seed::{derive_seed, seeded_rng};
use matcomp_core::solver::{default_lambda, solve, SolverOptions};
use matcomp_core::WeightPair;

#[derive(Parser)]
#[command(
    name = "matcomp",
    version,
    about = "Weighted low-rank matrix completion: estimator, diagnostics and experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random target and a noisy observation set.
    Simulate {
        /// Row (and default column) dimension of the target.
        #[arg(long)]
        d: usize,
        /// Column dimension when the target is not square.
        #[arg(long = "d-cols")]
        d_cols: Option<usize>,
        /// Target rank (exact-rank class); ignored when --q is given.
        #[arg(long, default_value_t = 2)]
        rank: usize,
        /// Draw from the lq ball with this exponent instead of a fixed rank.
        #[arg(long)]
        q: Option<f64>,
        #[arg(long = "rho-q", default_value_t = 2.0)]
        rho_q: f64,
        /// Number of observations.
        #[arg(long)]
        n: usize,
        /// Noise standard deviation.
        #[arg(long, default_value_t = 0.5)]
        nu: f64,
        /// Spikiness cap for the generated target; default sqrt(32 ln d).
        #[arg(long = "spike-cap")]
        spike_cap: Option<f64>,
        #[arg(long)]
        seed: u64,
        /// Weights file (two CSV lines); omitted means uniform.
        #[arg(long)]
        weights: Option<PathBuf>,
        /// Observation CSV path; a .json sidecar is written next to it.
        #[arg(long)]
        out: PathBuf,
        /// Also write the generated target matrix here.
        #[arg(long)]
        target: Option<PathBuf>,
    },
    /// Fit the nuclear-norm estimator to an observation set.
    Estimate {
        /// Observation CSV (with its .json sidecar next to it).
        #[arg(long)]
        obs: PathBuf,
        /// Regularization weight, or `auto` for the noise-calibrated value.
        #[arg(long, default_value = "auto")]
        lambda: String,
        /// Spikiness level of the box constraint.
        #[arg(long = "alpha-star")]
        alpha_star: f64,
        /// Output CSV for the estimated matrix.
        #[arg(long)]
        out: PathBuf,
    },
    /// Monte-Carlo check of the restricted strong convexity margins.
    RscCheck {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 200)]
        draws: usize,
        #[arg(long, default_value_t = 1)]
        rank: usize,
        #[arg(long, default_value_t = 1.0)]
        c0: f64,
        /// Spikiness cap for test directions; default sqrt(32 ln d).
        #[arg(long = "spike-cap")]
        spike_cap: Option<f64>,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Operator-norm samples of the random noise matrix.
    NoiseNorm {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0.5)]
        nu: f64,
        #[arg(long, default_value_t = 50)]
        reps: usize,
        /// gaussian or laplace.
        #[arg(long, default_value = "gaussian")]
        model: String,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Predicted error rates and the minimax floor on a sample-size grid.
    Rates {
        /// exact or lq.
        #[arg(long)]
        kind: String,
        /// Rank for the exact kind (also the q = 0 floor radius).
        #[arg(long)]
        r: Option<usize>,
        #[arg(long)]
        q: Option<f64>,
        #[arg(long = "rho-q")]
        rho_q: Option<f64>,
        #[arg(long, default_value_t = 0.5)]
        nu: f64,
        #[arg(long = "alpha-star", default_value_t = 1.0)]
        alpha_star: f64,
        #[arg(long)]
        d: f64,
        /// Sample sizes; repeat the flag for a grid.
        #[arg(long, required = true)]
        n: Vec<f64>,
        /// Leading constant of the rate.
        #[arg(long, default_value_t = 1.0)]
        c: f64,
        /// Leading constant of the floor.
        #[arg(long, default_value_t = 1.0)]
        c5: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate and verify a packing set.
    Packing {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        r: usize,
        #[arg(long)]
        delta: f64,
        #[arg(long)]
        seed: u64,
        #[arg(long = "max-attempts", default_value_t = 20)]
        max_attempts: usize,
        /// Directory for the matrix CSVs and the JSON report.
        #[arg(long = "out-dir")]
        out_dir: PathBuf,
    },
    /// Run the Monte-Carlo experiment grid described by a JSON config.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        /// Output CSV of per-trial results.
        #[arg(long)]
        out: PathBuf,
        /// Worker threads; 0 means one per core.
        #[arg(long, default_value_t = 0)]
        jobs: usize,
    },
    /// Aggregate an experiment CSV into per-cell means, the collapse
    /// statistic and the log-log slope.
    Summarize {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn default_spike_cap(d: usize) -> f64 {
    (32.0 * (d as f64).ln()).sqrt()
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Simulate {
            d,
            d_cols,
            rank,
            q,
            rho_q,
            n,
            nu,
            spike_cap,
            seed,
            weights,
            out,
            target,
        } => {
            let d_c = d_cols.unwrap_or(d);
            let (w, weights_ref) = match &weights {
                None => (WeightPair::uniform(d, d_c), "uniform".to_string()),
                Some(path) => {
                    let w = io::read_weights(path)?;
                    ensure!(
                        w.dims() == (d, d_c),
                        "weights file is {}x{}, expected {d}x{d_c}",
                        w.d_r(),
                        w.d_c()
                    );
                    (w, path.display().to_string())
                }
            };
            let mut rng = seeded_rng(derive_seed(seed, &[1]));
            let theta = match q {
                None => {
                    let cap = spike_cap.unwrap_or_else(|| default_spike_cap(d));
                    random_low_rank(d, d_c, rank, cap, &w, &mut rng)?
                }
                Some(q) => {
                    ensure!(d_c == d, "lq targets must be square");
                    random_lq(d, q, rho_q, &w, &mut rng)?
                }
            };
            let obs =
                generate_observations(&theta, &w, n, nu, NoiseModel::Gaussian, derive_seed(seed, &[2]))?;
            io::write_observations(&out, &obs, &weights_ref)?;
            if let Some(tpath) = target {
                io::write_matrix(&tpath, &theta)?;
            }
            println!(
                "wrote {} observations of a {d}x{d_c} target to {}",
                obs.n(),
                out.display()
            );
        }

        Command::Estimate {
            obs,
            lambda,
            alpha_star,
            out,
        } => {
            let observations = io::read_observations(&obs)?;
            let w = &observations.weights;
            let lambda = match lambda.as_str() {
                "auto" => default_lambda(
                    observations.noise_level,
                    w.l_bound(),
                    w.mean_dim(),
                    observations.n(),
                )?
                .recommended(),
                text => {
                    let v: f64 = text.parse().context("lambda must be a number or `auto`")?;
                    ensure!(v > 0.0, "lambda must be positive");
                    v
                }
            };
            let est = solve(&observations, lambda, alpha_star, &SolverOptions::default())?;
            io::write_matrix(&out, &est.theta_hat)?;
            println!(
                "lambda={} iterations={} converged={} objective={}",
                est.lambda,
                est.iterations,
                est.converged,
                est.objective_trace.last().copied().unwrap_or(f64::NAN)
            );
        }

        Command::RscCheck {
            d,
            n,
            draws,
            rank,
            c0,
            spike_cap,
            seed,
            out,
        } => {
            let params = reports::RscParams {
                d,
                n,
                draws,
                rank,
                c0,
                spike_cap: spike_cap.unwrap_or_else(|| default_spike_cap(d)),
                seed,
            };
            let report = reports::rsc_check(params)?;
            fs::write(&out, reports::to_json_bytes(&report)?)?;
            println!(
                "{} of {} margins negative (rate {})",
                report.summary.violations,
                report.summary.n_samples_tested,
                report.summary.violation_rate
            );
        }

        Command::NoiseNorm {
            d,
            n,
            nu,
            reps,
            model,
            seed,
            out,
        } => {
            let noise: NoiseModel = model.parse()?;
            let params = reports::NoiseParams {
                d,
                n,
                nu,
                reps,
                model: noise.to_string(),
                seed,
            };
            let report = reports::noise_norm(params, noise)?;
            fs::write(&out, reports::to_json_bytes(&report)?)?;
            println!(
                "mean opnorm {} over {} reps (reference {})",
                report.summary.mean, reps, report.summary.reference
            );
        }

        Command::Rates {
            kind,
            r,
            q,
            rho_q,
            nu,
            alpha_star,
            d,
            n,
            c,
            c5,
            out,
        } => {
            let (class, q_eff, rho_eff) = match kind.as_str() {
                "exact" => {
                    let r = r.context("--r is required for the exact kind")?;
                    // the q = 0 floor radius is the rank itself
                    (RateClass::ExactRank { r }, 0.0, r as f64)
                }
                "lq" => {
                    let q = q.context("--q is required for the lq kind")?;
                    let rho_q = rho_q.context("--rho-q is required for the lq kind")?;
                    (RateClass::LqBall { q, rho_q }, q, rho_q)
                }
                other => bail!("unknown kind {other:?}; use exact or lq"),
            };
            let params = reports::RatesParams {
                kind,
                r,
                q: q_eff,
                rho_q: rho_eff,
                nu,
                alpha_star,
                d,
                c,
            };
            let report = reports::rates(params, &class, &n, c5)?;
            fs::write(&out, reports::to_json_bytes(&report)?)?;
            println!(
                "{} grid points, rates in [{}, {}]",
                report.values.len(),
                report.summary.min_rate,
                report.summary.max_rate
            );
        }

        Command::Packing {
            d,
            r,
            delta,
            seed,
            max_attempts,
            out_dir,
        } => {
            let params = reports::PackingParams {
                d,
                r,
                delta,
                seed,
                max_attempts,
            };
            let (set, json) = reports::run_packing(params)?;
            fs::create_dir_all(&out_dir)
                .with_context(|| format!("creating {}", out_dir.display()))?;
            for (i, m) in set.matrices.iter().enumerate() {
                io::write_matrix(&out_dir.join(format!("matrix_{:03}.csv", i + 1)), m)?;
            }
            fs::write(
                out_dir.join("packing_report.json"),
                reports::to_json_bytes(&json)?,
            )?;
            println!(
                "packed {} matrices in {} attempts -> {}",
                set.matrices.len(),
                set.attempts_used,
                out_dir.display()
            );
        }

        Command::Experiment { config, out, jobs } => {
            let cfg: ExperimentConfig = serde_json::from_str(
                &fs::read_to_string(&config)
                    .with_context(|| format!("reading config {}", config.display()))?,
            )
            .with_context(|| format!("parsing config {}", config.display()))?;
            let rows = run_experiment(&cfg, jobs)?;
            io::write_rows(&out, &rows)?;
            let unconverged = rows.iter().filter(|r| !r.converged).count();
            println!(
                "wrote {} rows to {} ({} unconverged)",
                rows.len(),
                out.display(),
                unconverged
            );
        }

        Command::Summarize { input, out } => {
            let rows = io::read_rows(&input)?;
            let summary = summarize(&rows)?;
            fs::write(&out, reports::to_json_bytes(&summary)?)?;
            match (&summary.collapse, &summary.slope) {
                (Some(c), Some(s)) => {
                    println!("collapse {} over {} cells, slope {}", c.value, summary.cells.len(), s.slope)
                }
                _ => println!("{} cells summarized", summary.cells.len()),
            }
        }
    }
    Ok(())
}
