//! Plain-CSV readers and writers for the pipeline artifacts. All floats are
//! written with 17 significant digits so repeated runs are byte-identical
//! and chained stages reproduce the in-process pipeline exactly.

use std::fs;
use std::path::Path;

use thetainv_core::linalg::Mat;
use thetainv_core::operator::{EigenPair, EigenSystem};
use thetainv_core::spectral::{ExtractedData, SpectralSamples};

use crate::CliError;

pub fn fmt(v: f64) -> String {
    format!("{:.16e}", v)
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::Io(path.display().to_string(), e))
}

fn read_file(path: &Path) -> Result<String, CliError> {
    if !path.exists() {
        return Err(CliError::MissingInput(path.display().to_string()));
    }
    fs::read_to_string(path).map_err(|e| CliError::Io(path.display().to_string(), e))
}

fn parse_f64(tok: &str, path: &Path) -> Result<f64, CliError> {
    tok.trim()
        .parse::<f64>()
        .map_err(|_| CliError::Parse(path.display().to_string(), tok.to_string()))
}

/// eigensystem.csv: `lambda,trace_0,...,trace_{b-1},v_0,...,v_{dof-1}`.
pub fn write_eigensystem(path: &Path, eig: &EigenSystem) -> Result<(), CliError> {
    let mut out = String::new();
    let b = eig.pairs.first().map(|p| p.trace.len()).unwrap_or(0);
    out.push_str("lambda");
    for i in 0..b {
        out.push_str(&format!(",trace_{i}"));
    }
    let dof = eig.pairs.first().map(|p| p.vector.len()).unwrap_or(0);
    for i in 0..dof {
        out.push_str(&format!(",v_{i}"));
    }
    out.push('\n');
    for p in &eig.pairs {
        out.push_str(&fmt(p.lambda));
        for t in &p.trace {
            out.push(',');
            out.push_str(&fmt(*t));
        }
        for v in &p.vector {
            out.push(',');
            out.push_str(&fmt(*v));
        }
        out.push('\n');
    }
    write_file(path, &out)
}

pub fn read_eigensystem(path: &Path, boundary_len: usize) -> Result<EigenSystem, CliError> {
    let text = read_file(path)?;
    let mut pairs = Vec::new();
    for line in text.lines().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let vals: Vec<f64> = line
            .split(',')
            .map(|t| parse_f64(t, path))
            .collect::<Result<_, _>>()?;
        if vals.len() < 1 + boundary_len {
            return Err(CliError::Parse(
                path.display().to_string(),
                "row too short".into(),
            ));
        }
        pairs.push(EigenPair {
            lambda: vals[0],
            trace: vals[1..1 + boundary_len].to_vec(),
            vector: vals[1 + boundary_len..].to_vec(),
        });
    }
    Ok(EigenSystem { pairs })
}

/// theta.csv: `lambda,theta_0,...,theta_{b-1}`.
pub fn write_theta(path: &Path, samples: &SpectralSamples) -> Result<(), CliError> {
    let b = samples.theta.cols();
    let mut out = String::from("lambda");
    for i in 0..b {
        out.push_str(&format!(",theta_{i}"));
    }
    out.push('\n');
    for (k, &lambda) in samples.lambda_grid.iter().enumerate() {
        out.push_str(&fmt(lambda));
        for i in 0..b {
            out.push(',');
            out.push_str(&fmt(samples.theta.get(k, i)));
        }
        out.push('\n');
    }
    write_file(path, &out)
}

pub fn read_theta(path: &Path) -> Result<SpectralSamples, CliError> {
    let text = read_file(path)?;
    let mut lambda_grid = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for line in text.lines().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let vals: Vec<f64> = line
            .split(',')
            .map(|t| parse_f64(t, path))
            .collect::<Result<_, _>>()?;
        lambda_grid.push(vals[0]);
        rows.push(vals[1..].to_vec());
    }
    let b = rows.first().map(|r| r.len()).unwrap_or(0);
    let mut theta = Mat::zeros(rows.len(), b);
    for (k, row) in rows.iter().enumerate() {
        for (i, &v) in row.iter().enumerate() {
            theta.set(k, i, v);
        }
    }
    Ok(SpectralSamples { lambda_grid, theta })
}

/// extracted.csv: `lambda,sq_0,...,sq_{b-1}`.
pub fn write_extracted(path: &Path, data: &ExtractedData) -> Result<(), CliError> {
    let b = data.squared_traces.cols();
    let mut out = String::from("lambda");
    for i in 0..b {
        out.push_str(&format!(",sq_{i}"));
    }
    out.push('\n');
    for (j, &lambda) in data.eigenvalues.iter().enumerate() {
        out.push_str(&fmt(lambda));
        for i in 0..b {
            out.push(',');
            out.push_str(&fmt(data.squared_traces.get(j, i)));
        }
        out.push('\n');
    }
    write_file(path, &out)
}

pub fn read_extracted(path: &Path) -> Result<ExtractedData, CliError> {
    let text = read_file(path)?;
    let mut eigenvalues = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for line in text.lines().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let vals: Vec<f64> = line
            .split(',')
            .map(|t| parse_f64(t, path))
            .collect::<Result<_, _>>()?;
        eigenvalues.push(vals[0]);
        rows.push(vals[1..].to_vec());
    }
    let b = rows.first().map(|r| r.len()).unwrap_or(0);
    let mut squared_traces = Mat::zeros(rows.len(), b);
    for (j, row) in rows.iter().enumerate() {
        for (i, &v) in row.iter().enumerate() {
            squared_traces.set(j, i, v);
        }
    }
    Ok(ExtractedData {
        eigenvalues,
        squared_traces,
    })
}

/// traces_signed.csv: row per pair, `lambda,phi_0,...,phi_{b-1}`.
pub fn write_signed_traces(
    path: &Path,
    eigenvalues: &[f64],
    traces: &[Vec<f64>],
) -> Result<(), CliError> {
    let b = traces.first().map(|t| t.len()).unwrap_or(0);
    let mut out = String::from("lambda");
    for i in 0..b {
        out.push_str(&format!(",phi_{i}"));
    }
    out.push('\n');
    for (lambda, row) in eigenvalues.iter().zip(traces.iter()) {
        out.push_str(&fmt(*lambda));
        for v in row {
            out.push(',');
            out.push_str(&fmt(*v));
        }
        out.push('\n');
    }
    write_file(path, &out)
}

pub fn read_signed_traces(path: &Path) -> Result<(Vec<f64>, Vec<Vec<f64>>), CliError> {
    let text = read_file(path)?;
    let mut eigenvalues = Vec::new();
    let mut rows = Vec::new();
    for line in text.lines().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let vals: Vec<f64> = line
            .split(',')
            .map(|t| parse_f64(t, path))
            .collect::<Result<_, _>>()?;
        eigenvalues.push(vals[0]);
        rows.push(vals[1..].to_vec());
    }
    Ok((eigenvalues, rows))
}

/// zeros.csv: `pair,location,order,confidence` (one row per zero).
pub fn write_zeros(
    path: &Path,
    rows: &[(usize, f64, usize, f64)],
) -> Result<(), CliError> {
    let mut out = String::from("pair,location,order,confidence\n");
    for (pair, loc, order, conf) in rows {
        out.push_str(&format!("{pair},{},{order},{}\n", fmt(*loc), fmt(*conf)));
    }
    write_file(path, &out)
}

/// ndmap_<k>.csv: first row `lambda,<value>`, then the dense map.
pub fn write_nd_map(path: &Path, lambda: f64, map: &Mat) -> Result<(), CliError> {
    let mut out = format!("lambda,{}\n", fmt(lambda));
    for i in 0..map.rows() {
        for k in 0..map.cols() {
            if k > 0 {
                out.push(',');
            }
            out.push_str(&fmt(map.get(i, k)));
        }
        out.push('\n');
    }
    write_file(path, &out)
}
