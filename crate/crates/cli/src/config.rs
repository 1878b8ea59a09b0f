//! TOML run configuration and its translation into core types.

use serde::Deserialize;
use thetainv_core::geometry::{sample_potential, DomainSpec, Grid, Potential};
use thetainv_core::inverse::TraceObjective;
use thetainv_core::sign::SignConfig;

use crate::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Seed for every random draw the pipeline makes.
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub domain: DomainSection,
    pub potential: PotentialSection,
    pub spectral: SpectralSection,
    #[serde(default)]
    pub sign: SignSection,
    pub nd: NdSection,
    #[serde(default)]
    pub reconstruction: Option<ReconstructionSection>,
    #[serde(default)]
    pub probe: Option<ProbeSection>,
}

fn default_seed() -> u64 {
    0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSection {
    pub kind: String,
    pub extent_a: f64,
    /// Rectangle height; omitted means the default irrational aspect.
    #[serde(default)]
    pub extent_b: Option<f64>,
    pub n_a: usize,
    #[serde(default)]
    pub n_b: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSection {
    pub terms: Vec<BasisTerm>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisTerm {
    pub basis: String,
    pub coef: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectralSection {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub lambda_step: f64,
    pub eps_gap: f64,
    #[serde(default = "default_jump_tol")]
    pub jump_tol: f64,
    /// Eigenpairs computed by the forward stage.
    pub j_max: usize,
}

fn default_jump_tol() -> f64 {
    1e-12
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SignSection {
    #[serde(default)]
    pub tau_rel: Option<f64>,
    #[serde(default)]
    pub window: Option<usize>,
    #[serde(default)]
    pub m_max: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NdSection {
    pub lambdas: Vec<f64>,
    pub j_cut: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReconstructionSection {
    pub basis: Vec<String>,
    #[serde(default)]
    pub reg_weight: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_objective")]
    pub objective: String,
    #[serde(default)]
    pub start: Vec<f64>,
    /// Extracted pairs fed to the fit.
    pub j_used: usize,
}

fn default_max_iter() -> usize {
    50
}

fn default_objective() -> String {
    "squared".into()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSection {
    /// Second potential of the probe pair.
    pub terms: Vec<BasisTerm>,
    pub lambda: f64,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| CliError::ConfigInvalid(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        match self.domain.kind.as_str() {
            "interval" => {}
            "rectangle" => {
                if self.domain.n_b.is_none() {
                    return Err(CliError::ConfigInvalid(
                        "rectangle domain needs n_b".into(),
                    ));
                }
            }
            other => {
                return Err(CliError::ConfigInvalid(format!(
                    "unknown domain kind {other:?}"
                )))
            }
        }
        if self.potential.terms.is_empty() {
            return Err(CliError::ConfigInvalid("potential.terms is empty".into()));
        }
        if !(self.spectral.lambda_step > 0.0)
            || !(self.spectral.lambda_max > self.spectral.lambda_min)
        {
            return Err(CliError::ConfigInvalid(
                "lambda grid must be ascending with positive step".into(),
            ));
        }
        if !(self.spectral.eps_gap > 0.0) {
            return Err(CliError::ConfigInvalid("eps_gap must be positive".into()));
        }
        if let Some(rec) = &self.reconstruction {
            if rec.basis.is_empty() {
                return Err(CliError::ConfigInvalid(
                    "reconstruction.basis is empty".into(),
                ));
            }
            if !rec.start.is_empty() && rec.start.len() != rec.basis.len() {
                return Err(CliError::ConfigInvalid(
                    "reconstruction.start length mismatch".into(),
                ));
            }
            match rec.objective.as_str() {
                "squared" | "signed" => {}
                other => {
                    return Err(CliError::ConfigInvalid(format!(
                        "unknown objective {other:?}"
                    )))
                }
            }
        }
        Ok(())
    }

    pub fn domain_spec(&self) -> Result<DomainSpec, CliError> {
        let d = &self.domain;
        let spec = match d.kind.as_str() {
            "interval" => DomainSpec::interval(d.extent_a, d.n_a),
            _ => {
                let n_b = d.n_b.unwrap();
                match d.extent_b {
                    Some(b) => DomainSpec::rectangle(d.extent_a, b, d.n_a, n_b),
                    None => DomainSpec::rectangle_default_aspect(d.extent_a, d.n_a, n_b),
                }
            }
        };
        spec.validate().map_err(CliError::Core)?;
        Ok(spec)
    }

    pub fn lambda_grid(&self) -> Vec<f64> {
        let s = &self.spectral;
        let n = ((s.lambda_max - s.lambda_min) / s.lambda_step).round() as usize;
        (0..=n).map(|k| s.lambda_min + s.lambda_step * k as f64).collect()
    }

    pub fn sign_config(&self) -> SignConfig {
        let mut cfg = SignConfig::default();
        if let Some(v) = self.sign.tau_rel {
            cfg.tau_rel = v;
        }
        if let Some(v) = self.sign.window {
            cfg.window = v;
        }
        if let Some(v) = self.sign.m_max {
            cfg.m_max = v;
        }
        cfg
    }
}

/// Evaluate one named basis function on a grid. Shapes are normalised to
/// the domain extents so the same names work on any geometry.
pub fn basis_potential(grid: &Grid, name: &str) -> Result<Potential, CliError> {
    let ea = grid.spec.extent_a;
    let eb = grid.spec.extent_b.max(f64::MIN_POSITIVE);
    let pot = match name {
        "one" => sample_potential(grid, |_, _| 1.0),
        "linear_x" => sample_potential(grid, move |x, _| x / ea),
        "linear_y" => sample_potential(grid, move |_, y| y / eb),
        "sin_x" => sample_potential(grid, move |x, _| (core::f64::consts::PI * x / ea).sin()),
        "cos_x" => sample_potential(grid, move |x, _| (core::f64::consts::PI * x / ea).cos()),
        "cos_y" => sample_potential(grid, move |_, y| (core::f64::consts::PI * y / eb).cos()),
        other => {
            return Err(CliError::ConfigInvalid(format!(
                "unknown basis function {other:?}"
            )))
        }
    };
    pot.map_err(CliError::Core)
}

pub fn build_potential(grid: &Grid, terms: &[BasisTerm]) -> Result<Potential, CliError> {
    let mut total = Potential::zero(grid);
    for term in terms {
        let shape = basis_potential(grid, &term.basis)?;
        for (acc, v) in total.values.iter_mut().zip(shape.values.iter()) {
            *acc += term.coef * v;
        }
    }
    Ok(total)
}

pub fn objective_from_name(name: &str) -> TraceObjective {
    match name {
        "signed" => TraceObjective::Signed,
        _ => TraceObjective::Squared,
    }
}
