//! File formats: matrices, weight pairs, observation sets and result
//! tables. All float output goes through the standard shortest
//! round-trip formatter, so files are byte-deterministic for identical
//! inputs.
//!
//! - matrix CSV: one row per line, comma-separated reals, first line
//!   `# rows=<r> cols=<c>` (accepted but optional on read);
//! - weights file: two CSV lines, row weights then column weights;
//! - observation CSV: header `row,col,sign,y`, one sample per line, plus
//!   a `.json` sidecar holding dims, noise level, seed and a weights
//!   reference (`uniform` or a path, resolved relative to the sidecar).

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use matcomp_core::sampling::{ObservationSet, SampleIndex};
use matcomp_core::{DenseMatrix, WeightPair};

use crate::experiment::ResultRow;

fn join_floats(values: impl IntoIterator<Item = f64>) -> String {
    values
        .into_iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

// ─── Matrices ───────────────────────────────────────────────────────────

pub fn matrix_to_string(m: &DenseMatrix) -> String {
    let mut out = format!("# rows={} cols={}\n", m.n_rows(), m.n_cols());
    for i in 0..m.n_rows() {
        out.push_str(&join_floats((0..m.n_cols()).map(|j| m.get(i, j))));
        out.push('\n');
    }
    out
}

pub fn write_matrix(path: &Path, m: &DenseMatrix) -> Result<()> {
    fs::write(path, matrix_to_string(m))
        .with_context(|| format!("writing matrix to {}", path.display()))
}

pub fn parse_matrix(text: &str) -> Result<DenseMatrix> {
    let mut declared: Option<(usize, usize)> = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            if lineno == 0 {
                declared = parse_dims_comment(rest);
            }
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|tok| {
                tok.trim()
                    .parse::<f64>()
                    .with_context(|| format!("bad number {tok:?} on line {}", lineno + 1))
            })
            .collect::<Result<_>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        bail!("matrix file contains no data rows");
    }
    let n_cols = rows[0].len();
    if rows.iter().any(|r| r.len() != n_cols) {
        bail!("matrix rows have inconsistent lengths");
    }
    if let Some((dr, dc)) = declared {
        if (dr, dc) != (rows.len(), n_cols) {
            bail!(
                "header declares {dr}x{dc} but file contains {}x{n_cols}",
                rows.len()
            );
        }
    }
    Ok(DenseMatrix::from_rows(&rows)?)
}

fn parse_dims_comment(rest: &str) -> Option<(usize, usize)> {
    let mut rows = None;
    let mut cols = None;
    for tok in rest.split_whitespace() {
        if let Some(v) = tok.strip_prefix("rows=") {
            rows = v.parse().ok();
        } else if let Some(v) = tok.strip_prefix("cols=") {
            cols = v.parse().ok();
        }
    }
    rows.zip(cols)
}

pub fn read_matrix(path: &Path) -> Result<DenseMatrix> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading matrix {}", path.display()))?;
    parse_matrix(&text).with_context(|| format!("parsing matrix {}", path.display()))
}

// ─── Weights ────────────────────────────────────────────────────────────

pub fn weights_to_string(w: &WeightPair) -> String {
    format!(
        "{}\n{}\n",
        join_floats(w.row_weights().iter().copied()),
        join_floats(w.col_weights().iter().copied())
    )
}

pub fn write_weights(path: &Path, w: &WeightPair) -> Result<()> {
    fs::write(path, weights_to_string(w))
        .with_context(|| format!("writing weights to {}", path.display()))
}

pub fn read_weights(path: &Path) -> Result<WeightPair> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading weights {}", path.display()))?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let parse_line = |line: &str| -> Result<Vec<f64>> {
        line.split(',')
            .map(|tok| {
                tok.trim()
                    .parse::<f64>()
                    .with_context(|| format!("bad weight {tok:?}"))
            })
            .collect()
    };
    let rows = parse_line(lines.next().context("weights file needs two lines")?)?;
    let cols = parse_line(lines.next().context("weights file needs two lines")?)?;
    if lines.next().is_some() {
        bail!("weights file has more than two data lines");
    }
    Ok(WeightPair::new(rows, cols)?)
}

// ─── Observations ───────────────────────────────────────────────────────

#[derive(Debug, Serialize, Deserialize)]
struct ObsSidecar {
    d_r: usize,
    d_c: usize,
    noise_level: f64,
    seed: u64,
    /// `uniform` or a weights-file path, relative paths resolved against
    /// the sidecar's directory.
    weights: String,
}

pub fn sidecar_path(obs_path: &Path) -> PathBuf {
    obs_path.with_extension("json")
}

pub fn observations_to_string(obs: &ObservationSet) -> String {
    let mut out = String::from("row,col,sign,y\n");
    for (ix, y) in obs.indices.iter().zip(&obs.responses) {
        out.push_str(&format!("{},{},{},{}\n", ix.row, ix.col, ix.sign, y));
    }
    out
}

/// Write the sample CSV and its JSON sidecar; `weights_ref` is recorded
/// verbatim (`uniform` or the path the weights came from).
pub fn write_observations(path: &Path, obs: &ObservationSet, weights_ref: &str) -> Result<()> {
    fs::write(path, observations_to_string(obs))
        .with_context(|| format!("writing observations to {}", path.display()))?;
    let (d_r, d_c) = obs.dims();
    let sidecar = ObsSidecar {
        d_r,
        d_c,
        noise_level: obs.noise_level,
        seed: obs.seed,
        weights: weights_ref.to_string(),
    };
    let text = serde_json::to_string_pretty(&sidecar)?;
    fs::write(sidecar_path(path), text + "\n")
        .with_context(|| format!("writing sidecar for {}", path.display()))?;
    Ok(())
}

pub fn read_observations(path: &Path) -> Result<ObservationSet> {
    let sidecar_file = sidecar_path(path);
    let sidecar: ObsSidecar = serde_json::from_str(
        &fs::read_to_string(&sidecar_file)
            .with_context(|| format!("reading sidecar {}", sidecar_file.display()))?,
    )
    .with_context(|| format!("parsing sidecar {}", sidecar_file.display()))?;

    let weights = if sidecar.weights == "uniform" {
        WeightPair::uniform(sidecar.d_r, sidecar.d_c)
    } else {
        let mut wpath = PathBuf::from(&sidecar.weights);
        if wpath.is_relative() {
            if let Some(dir) = sidecar_file.parent() {
                wpath = dir.join(wpath);
            }
        }
        read_weights(&wpath)?
    };

    let text = fs::read_to_string(path)
        .with_context(|| format!("reading observations {}", path.display()))?;
    let mut lines = text.lines();
    match lines.next() {
        Some(header) if header.trim() == "row,col,sign,y" => {}
        other => bail!("expected header row,col,sign,y, found {other:?}"),
    }
    let mut indices = Vec::new();
    let mut responses = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 4 {
            bail!("line {}: expected 4 fields, found {}", lineno + 2, parts.len());
        }
        let row: usize = parts[0].trim().parse().context("bad row index")?;
        let col: usize = parts[1].trim().parse().context("bad column index")?;
        let sign: i8 = parts[2].trim().parse().context("bad sign")?;
        let y: f64 = parts[3].trim().parse().context("bad response")?;
        indices.push(SampleIndex::new(row, col, sign)?);
        responses.push(y);
    }
    Ok(ObservationSet::new(
        indices,
        responses,
        sidecar.noise_level,
        weights,
        sidecar.seed,
    )?)
}

// ─── Result tables ──────────────────────────────────────────────────────

pub fn rows_to_csv_string(rows: &[ResultRow]) -> Result<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for row in rows {
        writer.serialize(row)?;
    }
    Ok(String::from_utf8(writer.into_inner()?)?)
}

pub fn write_rows(path: &Path, rows: &[ResultRow]) -> Result<()> {
    fs::write(path, rows_to_csv_string(rows)?)
        .with_context(|| format!("writing results to {}", path.display()))
}

pub fn read_rows(path: &Path) -> Result<Vec<ResultRow>> {
    let mut reader = csv::Reader::from_path(path)
        .with_context(|| format!("reading results {}", path.display()))?;
    let rows: std::result::Result<Vec<ResultRow>, _> = reader.deserialize().collect();
    Ok(rows.with_context(|| format!("parsing results {}", path.display()))?)
}

/// The result table minus the wall-clock column: the canonical content
/// for byte-identity comparisons, since elapsed time is the one field a
/// rerun cannot reproduce.
pub fn csv_without_runtime(csv_text: &str) -> String {
    let mut out = String::with_capacity(csv_text.len());
    for line in csv_text.lines() {
        let fields: Vec<&str> = line.split(',').collect();
        let kept: Vec<&str> = fields
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != 12)
            .map(|(_, f)| *f)
            .collect();
        out.push_str(&kept.join(","));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use matcomp_core::sampling::{generate_observations, NoiseModel};
    use tempfile::tempdir;

    #[test]
    fn matrix_roundtrip_is_exact() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let m = DenseMatrix::from_vec(
            2,
            3,
            vec![1.5, -2.25, 1.0 / 3.0, 0.0, 1e-17, -123456.789],
        )
        .unwrap();
        write_matrix(&path, &m).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("# rows=2 cols=3\n"));
        let back = read_matrix(&path).unwrap();
        assert_eq!(m, back);
        // writing again yields identical bytes
        write_matrix(&path, &back).unwrap();
        assert_eq!(text, fs::read_to_string(&path).unwrap());
    }

    #[test]
    fn matrix_reads_without_header_comment() {
        let m = parse_matrix("1,2\n3,4\n").unwrap();
        assert_eq!(m.dims(), (2, 2));
        assert_eq!(m.get(1, 0), 3.0);
        assert!(parse_matrix("# rows=3 cols=2\n1,2\n3,4\n").is_err());
        assert!(parse_matrix("1,2\n3\n").is_err());
        assert!(parse_matrix("").is_err());
    }

    #[test]
    fn weights_roundtrip() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("w.csv");
        let w = WeightPair::new(vec![0.5, 1.5], vec![1.0, 0.75, 1.25]).unwrap();
        write_weights(&path, &w).unwrap();
        let back = read_weights(&path).unwrap();
        assert_eq!(w.row_weights(), back.row_weights());
        assert_eq!(w.col_weights(), back.col_weights());
    }

    #[test]
    fn observations_roundtrip_with_uniform_weights() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("obs.csv");
        let w = WeightPair::uniform(6, 5);
        let theta = DenseMatrix::from_fn(6, 5, |i, j| (i + 2 * j) as f64 / 7.0);
        let obs = generate_observations(&theta, &w, 40, 0.3, NoiseModel::Gaussian, 99).unwrap();
        write_observations(&path, &obs, "uniform").unwrap();
        let back = read_observations(&path).unwrap();
        assert_eq!(back.n(), 40);
        assert_eq!(back.dims(), (6, 5));
        assert_eq!(back.indices, obs.indices);
        assert_eq!(back.responses, obs.responses);
        assert_eq!(back.noise_level, 0.3);
        assert_eq!(back.seed, 99);
        assert!(back.weights.is_uniform());
    }

    #[test]
    fn observations_resolve_relative_weight_paths() {
        let dir = tempdir().unwrap();
        let wpath = dir.path().join("w.csv");
        let w = WeightPair::new(vec![0.5, 1.5, 1.0], vec![1.0, 1.0, 1.0]).unwrap();
        write_weights(&wpath, &w).unwrap();
        let theta = DenseMatrix::from_fn(3, 3, |i, j| (i * 3 + j) as f64);
        let obs = generate_observations(&theta, &w, 10, 0.0, NoiseModel::Gaussian, 7).unwrap();
        let opath = dir.path().join("obs.csv");
        write_observations(&opath, &obs, "w.csv").unwrap();
        let back = read_observations(&opath).unwrap();
        assert_eq!(back.weights.row_weights(), w.row_weights());
    }

    #[test]
    fn runtime_column_is_dropped_cleanly() {
        let text = "a,b,c,d,e,f,g,h,i,j,k,l,runtime_ms,n\n\
                    0,1,2,3,4,5,6,7,8,9,10,11,12,13\n";
        let cleaned = csv_without_runtime(text);
        assert_eq!(
            cleaned,
            "a,b,c,d,e,f,g,h,i,j,k,l,n\n0,1,2,3,4,5,6,7,8,9,10,11,13\n"
        );
    }
}
