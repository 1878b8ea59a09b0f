//! Boundary spectral function: synthesis of `theta(s,s,lambda)` on a
//! lambda grid, extraction of eigenvalues and squared boundary traces from
//! its jumps, and assembly of the truncated resolvent kernel and the
//! Neumann-to-Dirichlet map.
//!
//! `theta(s,s,lambda) = sum_{lambda_j < lambda} phi_j(s)^2` is
//! left-continuous and nondecreasing in lambda; every jump is the squared
//! trace of one eigenfunction (simple spectrum assumed).

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geometry::BoundaryMesh;
use crate::linalg::Mat;
use crate::operator::EigenSystem;

/// Sampled boundary spectral function: `theta.get(k, i)` is
/// `theta(s_i, s_i, lambda_k)`.
#[derive(Debug, Clone)]
pub struct SpectralSamples {
    pub lambda_grid: Vec<f64>,
    pub theta: Mat,
}

/// Eigenvalues and squared traces recovered from the jumps of theta.
/// `squared_traces.get(j, i)` is `phi_j(s_i)^2`.
#[derive(Debug, Clone)]
pub struct ExtractedData {
    pub eigenvalues: Vec<f64>,
    pub squared_traces: Mat,
}

/// Discrete Neumann-to-Dirichlet operator at a regular lambda: nodal
/// Neumann data in, nodal Dirichlet values out (quadrature weights folded
/// into the matrix).
#[derive(Debug, Clone)]
pub struct NdOperator {
    pub lambda: f64,
    pub map: Mat,
}

impl NdOperator {
    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        self.map.mul_vec(f)
    }

    /// Largest asymmetry of the weight-normalised map, relative to its
    /// scale. Zero up to roundoff for a real resolvent.
    pub fn symmetry_defect(&self, weights: &[f64]) -> f64 {
        let n = self.map.rows();
        let mut defect = 0.0_f64;
        let mut scale = 0.0_f64;
        for i in 0..n {
            for k in 0..n {
                // Normalised entry: w_i^{1/2} G_{ik} w_k^{1/2}
                //                 = map_{ik} (w_i / w_k)^{1/2}.
                let a = self.map.get(i, k) * libm::sqrt(weights[i] / weights[k]);
                let b = self.map.get(k, i) * libm::sqrt(weights[k] / weights[i]);
                defect = defect.max((a - b).abs());
                scale = scale.max(a.abs());
            }
        }
        if scale == 0.0 {
            0.0
        } else {
            defect / scale
        }
    }
}

/// Point source of theta values, used to refine jump locations by
/// bisection. The extraction itself only consumes grid samples; the oracle
/// stands in for "theta is known for every lambda".
pub trait ThetaOracle {
    /// Sum over the boundary nodes of `theta(s_i, s_i, lambda)`.
    fn theta_total(&self, lambda: f64) -> f64;
}

impl ThetaOracle for EigenSystem {
    fn theta_total(&self, lambda: f64) -> f64 {
        self.pairs
            .iter()
            .take_while(|p| p.lambda < lambda)
            .map(|p| p.trace.iter().map(|t| t * t).sum::<f64>())
            .sum()
    }
}

/// Sample `theta(s_i, s_i, lambda_k)` from an eigensystem.
///
/// Requires the eigensystem to reach past the top of the grid, otherwise
/// jumps above the truncation would silently be missing.
pub fn synthesize_theta(
    eig: &EigenSystem,
    lambda_grid: &[f64],
    boundary: &BoundaryMesh,
) -> Result<SpectralSamples> {
    if lambda_grid.is_empty() || lambda_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidSpec("lambda grid must be ascending"));
    }
    let lambda_max = *lambda_grid.last().unwrap();
    match eig.pairs.last() {
        Some(p) if p.lambda > lambda_max => {}
        _ => return Err(Error::TruncationInsufficient),
    }
    let b = boundary.len();
    let mut theta = Mat::zeros(lambda_grid.len(), b);
    let mut running = vec![0.0_f64; b];
    let mut j = 0;
    for (k, &lambda) in lambda_grid.iter().enumerate() {
        while j < eig.pairs.len() && eig.pairs[j].lambda < lambda {
            for (acc, t) in running.iter_mut().zip(eig.pairs[j].trace.iter()) {
                *acc += t * t;
            }
            j += 1;
        }
        for i in 0..b {
            theta.set(k, i, running[i]);
        }
    }
    Ok(SpectralSamples {
        lambda_grid: lambda_grid.to_vec(),
        theta,
    })
}

/// Scan the sampled theta for jumps and recover `(lambda_j, phi_j^2(s_i))`.
///
/// A jump between consecutive grid points is detected when the increment
/// exceeds `jump_tol` at any node; increments at the same interval are one
/// eigenvalue (simple spectrum). With an oracle the bracketing interval is
/// refined by bisection, otherwise the midpoint is reported.
///
/// A jump whose trace happens to fall below `jump_tol` at every sampled
/// node simultaneously cannot be seen in the data at all; extraction has no
/// way to recover it (callers log this as a missed-jump risk).
pub fn extract_eigendata(
    samples: &SpectralSamples,
    eps_gap: f64,
    jump_tol: f64,
    oracle: Option<&dyn ThetaOracle>,
) -> Result<ExtractedData> {
    let grid = &samples.lambda_grid;
    let spacing = grid
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(0.0_f64, f64::max);
    if !(spacing < eps_gap / 2.0) {
        return Err(Error::UnresolvedGrid);
    }
    let b = samples.theta.cols();
    let mut eigenvalues = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for k in 0..grid.len() - 1 {
        let mut deltas = vec![0.0_f64; b];
        let mut seen = false;
        for i in 0..b {
            let d = samples.theta.get(k + 1, i) - samples.theta.get(k, i);
            deltas[i] = d.max(0.0);
            if d > jump_tol {
                seen = true;
            }
        }
        if !seen {
            continue;
        }
        let lambda = match oracle {
            Some(orc) => bisect_jump(orc, grid[k], grid[k + 1]),
            None => 0.5 * (grid[k] + grid[k + 1]),
        };
        eigenvalues.push(lambda);
        rows.push(deltas);
    }
    for w in eigenvalues.windows(2) {
        if w[1] - w[0] < eps_gap {
            return Err(Error::DegenerateSpectrum);
        }
    }
    let mut squared_traces = Mat::zeros(rows.len(), b);
    for (j, row) in rows.iter().enumerate() {
        for i in 0..b {
            squared_traces.set(j, i, row[i]);
        }
    }
    Ok(ExtractedData {
        eigenvalues,
        squared_traces,
    })
}

/// Bisect the single jump of `theta_total` inside `(lo, hi]` down to a
/// machine-width bracket.
fn bisect_jump(oracle: &dyn ThetaOracle, mut lo: f64, mut hi: f64) -> f64 {
    let g_lo = oracle.theta_total(lo);
    let g_hi = oracle.theta_total(hi);
    let cut = 0.5 * (g_lo + g_hi);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if oracle.theta_total(mid) > cut {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Truncated resolvent kernel on the boundary:
/// `G(s_i, t_k) = sum_{j <= j_cut} phi_j(s_i) phi_j(t_k) / (lambda_j - lambda)`.
pub fn resolvent_kernel(
    eig: &EigenSystem,
    lambda: f64,
    j_cut: usize,
    eps_gap: f64,
) -> Result<Mat> {
    assert!(j_cut <= eig.len());
    let b = eig.pairs.first().map(|p| p.trace.len()).unwrap_or(0);
    let mut g = Mat::zeros(b, b);
    for pair in eig.pairs.iter().take(j_cut) {
        if (pair.lambda - lambda).abs() <= eps_gap {
            return Err(Error::NearEigenvalue);
        }
        let inv = 1.0 / (pair.lambda - lambda);
        for i in 0..b {
            let ti = pair.trace[i] * inv;
            for k in 0..b {
                g.add_to(i, k, ti * pair.trace[k]);
            }
        }
    }
    Ok(g)
}

/// Neumann-to-Dirichlet map assembled from the truncated resolvent kernel:
/// `(map f)_i = sum_k G(s_i, s_k) w_k f_k`, the quadrature analogue of
/// `h(s) = int_S G(s,t,lambda) f(t) dt`.
pub fn nd_map(
    eig: &EigenSystem,
    lambda: f64,
    j_cut: usize,
    boundary: &BoundaryMesh,
    eps_gap: f64,
) -> Result<NdOperator> {
    let g = resolvent_kernel(eig, lambda, j_cut, eps_gap)?;
    let b = boundary.len();
    assert_eq!(g.rows(), b);
    let mut map = Mat::zeros(b, b);
    for i in 0..b {
        for k in 0..b {
            map.set(i, k, g.get(i, k) * boundary.nodes[k].weight);
        }
    }
    Ok(NdOperator { lambda, map })
}
