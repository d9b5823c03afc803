//! JSON report payloads for the diagnostic subcommands. Builders are
//! separated from the binary so tests can reproduce the exact bytes the
//! CLI writes.

use anyhow::Result;
use serde::Serialize;

use matcomp_core::diagnostics::{
    minimax_floor, noise_norm_samples, predicted_rate, rsc_monte_carlo, FloorPrediction,
    RateClass, RscReport,
};
use matcomp_core::packing::{generate_packing, PackingReport, PackingSet};
use matcomp_core::sampling::NoiseModel;
use matcomp_core::seed::seeded_rng;
use matcomp_core::WeightPair;

pub fn to_json_bytes<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

// ─── Restricted strong convexity check ──────────────────────────────────

#[derive(Debug, Clone, Serialize)]
pub struct RscParams {
    pub d: usize,
    pub n: usize,
    pub draws: usize,
    pub rank: usize,
    pub c0: f64,
    pub spike_cap: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RscSummary {
    pub n_samples_tested: usize,
    pub violations: usize,
    pub violation_rate: f64,
    pub min_margin: f64,
    pub mean_margin: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RscJson {
    pub params: RscParams,
    pub margins: Vec<f64>,
    pub summary: RscSummary,
}

pub fn rsc_check(params: RscParams) -> Result<RscJson> {
    let w = WeightPair::uniform(params.d, params.d);
    let report: RscReport = rsc_monte_carlo(
        &w,
        params.n,
        params.draws,
        params.rank,
        params.c0,
        params.spike_cap,
        params.seed,
    )?;
    let min_margin = report.margins.iter().cloned().fold(f64::INFINITY, f64::min);
    let mean_margin =
        report.margins.iter().sum::<f64>() / report.margins.len().max(1) as f64;
    let summary = RscSummary {
        n_samples_tested: report.n_samples_tested,
        violations: report.violations,
        violation_rate: report.violations as f64 / report.n_samples_tested.max(1) as f64,
        min_margin,
        mean_margin,
    };
    Ok(RscJson {
        params,
        margins: report.margins,
        summary,
    })
}

// ─── Noise operator norm ────────────────────────────────────────────────

#[derive(Debug, Clone, Serialize)]
pub struct NoiseParams {
    pub d: usize,
    pub n: usize,
    pub nu: f64,
    pub reps: usize,
    pub model: String,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct NoiseSummary {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    /// 4·ν·√(d·ln d/n), the calibration scale the mean should track.
    pub reference: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct NoiseJson {
    pub params: NoiseParams,
    pub values: Vec<f64>,
    pub summary: NoiseSummary,
}

pub fn noise_norm(params: NoiseParams, model: NoiseModel) -> Result<NoiseJson> {
    let w = WeightPair::uniform(params.d, params.d);
    let values = noise_norm_samples(&w, params.n, params.nu, model, params.reps, params.seed)?;
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let d = params.d as f64;
    let reference = 4.0 * params.nu * (d * d.ln() / params.n as f64).sqrt();
    Ok(NoiseJson {
        params,
        values,
        summary: NoiseSummary {
            mean,
            min,
            max,
            reference,
        },
    })
}

// ─── Rate predictions ───────────────────────────────────────────────────

#[derive(Debug, Clone, Serialize)]
pub struct RatesParams {
    pub kind: String,
    pub r: Option<usize>,
    pub q: f64,
    pub rho_q: f64,
    pub nu: f64,
    pub alpha_star: f64,
    pub d: f64,
    pub c: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RatePoint {
    pub n: f64,
    pub rate: f64,
    pub floor: FloorPrediction,
}

#[derive(Debug, Clone, Serialize)]
pub struct RatesSummary {
    pub min_rate: f64,
    pub max_rate: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RatesJson {
    pub params: RatesParams,
    pub values: Vec<RatePoint>,
    pub summary: RatesSummary,
}

pub fn rates(params: RatesParams, class: &RateClass, ns: &[f64], c5: f64) -> Result<RatesJson> {
    let mut values = Vec::with_capacity(ns.len());
    for &n in ns {
        let rate = predicted_rate(class, params.nu, params.alpha_star, params.d, n, params.c)?;
        let floor = minimax_floor(params.rho_q, params.q, params.nu, params.d, n, c5)?;
        values.push(RatePoint { n, rate, floor });
    }
    let min_rate = values.iter().map(|v| v.rate).fold(f64::INFINITY, f64::min);
    let max_rate = values
        .iter()
        .map(|v| v.rate)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(RatesJson {
        params,
        values,
        summary: RatesSummary { min_rate, max_rate },
    })
}

// ─── Packing ────────────────────────────────────────────────────────────

#[derive(Debug, Clone, Serialize)]
pub struct PackingParams {
    pub d: usize,
    pub r: usize,
    pub delta: f64,
    pub seed: u64,
    pub max_attempts: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct PackingJson {
    pub params: PackingParams,
    pub cardinality: usize,
    pub attempts_used: usize,
    pub report: PackingReport,
}

pub fn run_packing(params: PackingParams) -> Result<(PackingSet, PackingJson)> {
    let mut rng = seeded_rng(params.seed);
    let set = generate_packing(
        params.d,
        params.r,
        params.delta,
        &mut rng,
        params.max_attempts,
    )?;
    let json = PackingJson {
        cardinality: set.matrices.len(),
        attempts_used: set.attempts_used,
        report: set.report.clone(),
        params,
    };
    Ok((set, json))
}
