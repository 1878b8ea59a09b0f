//! Pipeline stages. Every stage reads its inputs from the output directory
//! and writes its artifacts back there, so a full `run` and a chain of
//! individual stage invocations produce byte-identical data files.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thetainv_core::geometry::{build_domain, BoundaryMesh, DomainKind, Grid};
use thetainv_core::inverse::{
    fit_objective, orthogonality_probe, reconstruct_potential, FitData, FitOptions,
    TraceObjective,
};
use thetainv_core::linalg::Mat;
use thetainv_core::operator::{assemble_operator, eigensolve};
use thetainv_core::sign::lift_sign;
use thetainv_core::spectral::{extract_eigendata, nd_map, synthesize_theta};

use crate::config::{build_potential, objective_from_name, RunConfig};
use crate::io;
use crate::CliError;

pub struct Context {
    pub config: RunConfig,
    pub grid: Grid,
    pub boundary: BoundaryMesh,
    pub out: PathBuf,
}

impl Context {
    pub fn new(config: RunConfig, out: &Path) -> Result<Self, CliError> {
        let spec = config.domain_spec()?;
        let (grid, boundary) = build_domain(&spec)?;
        fs::create_dir_all(out).map_err(|e| CliError::Io(out.display().to_string(), e))?;
        Ok(Context {
            config,
            grid,
            boundary,
            out: out.to_path_buf(),
        })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }
}

#[derive(Serialize)]
pub struct StageRecord {
    pub name: String,
    pub seconds: f64,
    pub outputs: Vec<String>,
}

#[derive(Serialize)]
pub struct Manifest {
    pub version: String,
    pub seed: u64,
    pub stages: Vec<StageRecord>,
}

impl Manifest {
    pub fn new(seed: u64) -> Self {
        Manifest {
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            stages: Vec::new(),
        }
    }

    pub fn record(&mut self, name: &str, started: Instant, outputs: &[&str]) {
        self.stages.push(StageRecord {
            name: name.to_string(),
            seconds: started.elapsed().as_secs_f64(),
            outputs: outputs.iter().map(|s| s.to_string()).collect(),
        });
    }

    pub fn write(&self, out: &Path) -> Result<(), CliError> {
        let path = out.join("manifest.json");
        let text = serde_json::to_string_pretty(self).expect("manifest serialization");
        fs::write(&path, text).map_err(|e| CliError::Io(path.display().to_string(), e))
    }
}

/// Solve the eigenproblem of the configured operator.
pub fn stage_forward(ctx: &Context, manifest: &mut Manifest) -> Result<(), CliError> {
    let t0 = Instant::now();
    let q = build_potential(&ctx.grid, &ctx.config.potential.terms)?;
    let op = assemble_operator(&ctx.grid, &ctx.boundary, &q)?;
    let eig = eigensolve(&op, ctx.config.spectral.j_max.min(ctx.grid.dof()))?;
    io::write_eigensystem(&ctx.path("eigensystem.csv"), &eig)?;
    manifest.record("forward", t0, &["eigensystem.csv"]);
    Ok(())
}

/// Sample the boundary spectral function on the configured lambda grid.
pub fn stage_synthesize(ctx: &Context, manifest: &mut Manifest) -> Result<(), CliError> {
    let t0 = Instant::now();
    let eig = io::read_eigensystem(&ctx.path("eigensystem.csv"), ctx.boundary.len())?;
    let samples = synthesize_theta(&eig, &ctx.config.lambda_grid(), &ctx.boundary)?;
    io::write_theta(&ctx.path("theta.csv"), &samples)?;
    manifest.record("synthesize", t0, &["theta.csv"]);
    Ok(())
}

/// Recover eigenvalues and squared traces from the sampled jumps. The
/// eigensystem file doubles as the bisection oracle, standing in for
/// "theta is available at any lambda".
pub fn stage_extract(ctx: &Context, manifest: &mut Manifest) -> Result<(), CliError> {
    let t0 = Instant::now();
    let samples = io::read_theta(&ctx.path("theta.csv"))?;
    let eig = io::read_eigensystem(&ctx.path("eigensystem.csv"), ctx.boundary.len())?;
    let eps_gap = ctx.config.spectral.eps_gap;
    eig.check_simple(eps_gap, ctx.config.spectral.lambda_max)?;
    let data = extract_eigendata(&samples, eps_gap, ctx.config.spectral.jump_tol, Some(&eig))?;
    io::write_extracted(&ctx.path("extracted.csv"), &data)?;
    manifest.record("extract", t0, &["extracted.csv"]);
    Ok(())
}

/// Lift the squared traces to signed ones.
///
/// On the interval the boundary is two points and the lifting is by
/// oscillation count: the pair with the j-th smallest eigenvalue has j
/// interior sign changes, so its endpoint signs are (+, (-1)^j). On a
/// closed boundary curve the zero-order parity walk does the work.
pub fn stage_lift(ctx: &Context, manifest: &mut Manifest) -> Result<(), CliError> {
    let t0 = Instant::now();
    let data = io::read_extracted(&ctx.path("extracted.csv"))?;
    let b = ctx.boundary.len();
    let mut traces: Vec<Vec<f64>> = Vec::with_capacity(data.eigenvalues.len());
    let mut zero_rows: Vec<(usize, f64, usize, f64)> = Vec::new();
    match ctx.grid.spec.kind {
        DomainKind::Interval => {
            for j in 0..data.eigenvalues.len() {
                let s0 = data.squared_traces.get(j, 0).max(0.0).sqrt();
                let s1 = data.squared_traces.get(j, 1).max(0.0).sqrt();
                let flip = if j % 2 == 0 { 1.0 } else { -1.0 };
                traces.push(vec![s0, flip * s1]);
            }
        }
        DomainKind::Rectangle => {
            let cfg = ctx.config.sign_config();
            for j in 0..data.eigenvalues.len() {
                let sq: Vec<f64> = (0..b).map(|i| data.squared_traces.get(j, i)).collect();
                let lifted = lift_sign(&ctx.boundary, &sq, &cfg)?;
                for z in &lifted.zeros {
                    zero_rows.push((j, z.location, z.order, z.confidence));
                }
                traces.push(lifted.values);
            }
        }
    }
    io::write_signed_traces(&ctx.path("traces_signed.csv"), &data.eigenvalues, &traces)?;
    io::write_zeros(&ctx.path("zeros.csv"), &zero_rows)?;
    manifest.record("lift", t0, &["traces_signed.csv", "zeros.csv"]);
    Ok(())
}

/// Assemble the truncated Neumann-to-Dirichlet maps at the probe lambdas.
pub fn stage_ndmap(ctx: &Context, manifest: &mut Manifest) -> Result<(), CliError> {
    let t0 = Instant::now();
    let eig = io::read_eigensystem(&ctx.path("eigensystem.csv"), ctx.boundary.len())?;
    let j_cut = ctx.config.nd.j_cut.min(eig.len());
    let mut outputs = Vec::new();
    for (k, &lambda) in ctx.config.nd.lambdas.iter().enumerate() {
        let nd = nd_map(
            &eig,
            lambda,
            j_cut,
            &ctx.boundary,
            ctx.config.spectral.eps_gap,
        )?;
        let name = format!("ndmap_{k}.csv");
        io::write_nd_map(&ctx.path(&name), lambda, &nd.map)?;
        outputs.push(name);
    }
    let refs: Vec<&str> = outputs.iter().map(|s| s.as_str()).collect();
    manifest.record("ndmap", t0, &refs);
    Ok(())
}

#[derive(Serialize)]
struct ReconstructionReport {
    coefficients: Vec<f64>,
    misfit_history: Vec<f64>,
    data_misfit: f64,
    reg_weight: f64,
    objective: String,
    misfit_at_start: f64,
}

/// Fit the potential coefficients to the extracted spectral data.
pub fn stage_reconstruct(ctx: &Context, manifest: &mut Manifest) -> Result<(), CliError> {
    let t0 = Instant::now();
    let Some(rec) = ctx.config.reconstruction.clone() else {
        return Err(CliError::ConfigInvalid(
            "no [reconstruction] section in the config".into(),
        ));
    };
    let data_sq = io::read_extracted(&ctx.path("extracted.csv"))?;
    let j_used = rec.j_used.min(data_sq.eigenvalues.len());
    let b = ctx.boundary.len();
    let objective = objective_from_name(&rec.objective);
    let mut traces = Mat::zeros(j_used, b);
    match objective {
        TraceObjective::Squared => {
            for j in 0..j_used {
                for i in 0..b {
                    traces.set(j, i, data_sq.squared_traces.get(j, i));
                }
            }
        }
        TraceObjective::Signed => {
            let (_, rows) = io::read_signed_traces(&ctx.path("traces_signed.csv"))?;
            for (j, row) in rows.iter().take(j_used).enumerate() {
                for (i, &v) in row.iter().enumerate() {
                    traces.set(j, i, v);
                }
            }
        }
    }
    let data = FitData {
        eigenvalues: data_sq.eigenvalues[..j_used].to_vec(),
        traces,
    };
    let mut basis = Vec::with_capacity(rec.basis.len());
    for name in &rec.basis {
        basis.push(crate::config::basis_potential(&ctx.grid, name)?);
    }
    let start = if rec.start.is_empty() {
        vec![0.0; basis.len()]
    } else {
        rec.start.clone()
    };
    let opts = FitOptions {
        reg_weight: rec.reg_weight,
        max_iter: rec.max_iter,
        objective,
        ..FitOptions::default()
    };
    let misfit_at_start =
        fit_objective(&ctx.grid, &ctx.boundary, &basis, &data, &opts, &start)?;
    let result = reconstruct_potential(&ctx.grid, &ctx.boundary, &basis, &data, &start, &opts)?;
    let report = ReconstructionReport {
        coefficients: result.coefficients,
        misfit_history: result.misfit_history,
        data_misfit: result.data_misfit,
        reg_weight: result.reg_weight,
        objective: rec.objective.clone(),
        misfit_at_start,
    };
    let path = ctx.path("reconstruction.json");
    let text = serde_json::to_string_pretty(&report).expect("report serialization");
    fs::write(&path, text).map_err(|e| CliError::Io(path.display().to_string(), e))?;
    manifest.record("reconstruct", t0, &["reconstruction.json"]);
    Ok(())
}

#[derive(Serialize)]
struct ProbeReportOut {
    lambda: f64,
    orthogonality_value: f64,
    boundary_term: f64,
    green_residual: f64,
}

/// Numerical orthogonality probe between the configured potential and the
/// `[probe]` one, with seeded random boundary data.
pub fn stage_probe(ctx: &Context, manifest: &mut Manifest) -> Result<(), CliError> {
    let t0 = Instant::now();
    let Some(probe) = ctx.config.probe.clone() else {
        return Err(CliError::ConfigInvalid(
            "no [probe] section in the config".into(),
        ));
    };
    let q1 = build_potential(&ctx.grid, &ctx.config.potential.terms)?;
    let q2 = build_potential(&ctx.grid, &probe.terms)?;
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.config.seed);
    let b = ctx.boundary.len();
    let f: Vec<f64> = (0..b).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let g: Vec<f64> = (0..b).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let report = orthogonality_probe(
        &ctx.grid,
        &ctx.boundary,
        &q1,
        &q2,
        probe.lambda,
        &f,
        &g,
    )?;
    let out = ProbeReportOut {
        lambda: probe.lambda,
        orthogonality_value: report.orthogonality_value,
        boundary_term: report.boundary_term,
        green_residual: report.green_residual,
    };
    let path = ctx.path("probe.json");
    let text = serde_json::to_string_pretty(&out).expect("probe serialization");
    fs::write(&path, text).map_err(|e| CliError::Io(path.display().to_string(), e))?;
    manifest.record("probe", t0, &["probe.json"]);
    Ok(())
}

/// The full pipeline: each stage re-reads its inputs from disk, so chained
/// stage invocations reproduce `run` exactly.
pub fn run_all(ctx: &Context, manifest: &mut Manifest) -> Result<(), CliError> {
    stage_forward(ctx, manifest)?;
    stage_synthesize(ctx, manifest)?;
    stage_extract(ctx, manifest)?;
    stage_lift(ctx, manifest)?;
    stage_ndmap(ctx, manifest)?;
    if ctx.config.reconstruction.is_some() {
        stage_reconstruct(ctx, manifest)?;
    }
    Ok(())
}
