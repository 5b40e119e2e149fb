//! On-disk record of one identification run.

use std::fs;
use std::path::Path;

use nlid_core::optimizer::OptStatus;
use nlid_core::{Mesh1D, ThetaBasis, ThetaField};
use serde::{Deserialize, Serialize};

use crate::datasets::Case;
use crate::error::{AppError, AppResult};
use crate::experiments::{Identification, RunSettings};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Basis {
    Linear,
    Constant,
}

impl From<ThetaBasis> for Basis {
    fn from(b: ThetaBasis) -> Self {
        match b {
            ThetaBasis::ContinuousPiecewiseLinear => Basis::Linear,
            ThetaBasis::PiecewiseConstant => Basis::Constant,
        }
    }
}

impl From<Basis> for ThetaBasis {
    fn from(b: Basis) -> Self {
        match b {
            Basis::Linear => ThetaBasis::ContinuousPiecewiseLinear,
            Basis::Constant => ThetaBasis::PiecewiseConstant,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Converged,
    MaxIterations,
    LineSearchFailed,
}

impl From<OptStatus> for Status {
    fn from(s: OptStatus) -> Self {
        match s {
            OptStatus::Converged => Status::Converged,
            OptStatus::MaxIterations => Status::MaxIterations,
            OptStatus::LineSearchFailed => Status::LineSearchFailed,
        }
    }
}

/// Inputs of the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunEcho {
    pub case: Case,
    pub a: f64,
    pub b: f64,
    pub eps: f64,
    pub n: usize,
    pub m: usize,
    pub beta: f64,
    pub init: f64,
    pub basis: Basis,
    pub grad_tol: f64,
    pub max_iters: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Iterate {
    pub alpha: f64,
    pub objective: f64,
    pub grad_inf: f64,
    pub trials: usize,
    pub updated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Errors {
    pub e_u2: f64,
    pub e_theta: f64,
    pub e_theta_full: f64,
    pub theta_l2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultFile {
    pub run: RunEcho,
    pub status: Status,
    pub iterations: usize,
    pub evaluations: usize,
    pub j_match: f64,
    pub j_reg: f64,
    pub j_total: f64,
    pub initial_grad_inf: f64,
    pub grad_inf: f64,
    pub errors: Errors,
    pub coeffs: Vec<f64>,
    /// Nodal state values over all state-mesh nodes.
    pub state: Vec<f64>,
    pub iterates: Vec<Iterate>,
}

impl ResultFile {
    pub fn new(case: Case, id: &Identification, settings: &RunSettings) -> Self {
        let mesh = id.theta.mesh();
        Self {
            run: RunEcho {
                case,
                a: mesh.a(),
                b: mesh.b(),
                eps: mesh.eps(),
                n: id.n,
                m: id.m,
                beta: id.beta,
                init: settings.init,
                basis: id.theta.basis().into(),
                grad_tol: settings.bfgs.grad_tol,
                max_iters: settings.bfgs.max_iters,
            },
            status: id.run.status.into(),
            iterations: id.run.iterations,
            evaluations: id.run.evaluations,
            j_match: id.report.j_match,
            j_reg: id.report.j_reg,
            j_total: id.report.j_total,
            initial_grad_inf: id.run.initial_grad_inf,
            grad_inf: id.run.grad_inf(),
            errors: Errors {
                e_u2: id.e_u2,
                e_theta: id.e_theta,
                e_theta_full: id.e_theta_full,
                theta_l2: id.theta_l2,
            },
            coeffs: id.theta.coeffs().to_vec(),
            state: id.state.values().to_vec(),
            iterates: id
                .run
                .steps
                .iter()
                .map(|s| Iterate {
                    alpha: s.alpha,
                    objective: s.phi,
                    grad_inf: s.grad_inf,
                    trials: s.trials,
                    updated: s.updated,
                })
                .collect(),
        }
    }

    /// Rebuilds the identified parameter.
    pub fn theta(&self) -> AppResult<ThetaField> {
        let r = &self.run;
        let mesh = Mesh1D::uniform(r.a, r.b, r.eps, r.m)?;
        Ok(ThetaField::new(mesh, r.basis.into(), self.coeffs.clone())?)
    }

    pub fn save(&self, path: &Path) -> AppResult<()> {
        let text = serde_json::to_string_pretty(self).expect("result serializes");
        fs::write(path, text).map_err(AppError::io(path))
    }

    pub fn load(path: &Path) -> AppResult<Self> {
        let text = fs::read_to_string(path).map_err(AppError::io(path))?;
        serde_json::from_str(&text).map_err(|source| AppError::Format {
            path: path.to_path_buf(),
            source,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::CaseSpec;
    use crate::experiments::{run_identification, Experiment};
    use crate::surrogate::reference_state;
    use nlid_core::QuadratureOrder;

    #[test]
    fn round_trip_rebuilds_theta() {
        let spec = CaseSpec::new(Case::B, Some(0.25)).unwrap();
        let u = reference_state(&spec, None, QuadratureOrder::default(), 0, false).unwrap();
        let exp = Experiment::new(spec, u);
        let settings = RunSettings::default();
        let id = run_identification(&exp, 8, 2, None, &settings).unwrap();
        let file = ResultFile::new(Case::B, &id, &settings);
        assert_eq!(file.iterates.len(), id.run.iterations);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.json");
        file.save(&path).unwrap();
        let back = ResultFile::load(&path).unwrap();
        assert_eq!(back, file);
        assert_eq!(back.theta().unwrap(), id.theta);
    }

    #[test]
    fn malformed_file_is_a_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.json");
        fs::write(&path, "{\"run\": 3}").unwrap();
        let err = ResultFile::load(&path).unwrap_err();
        assert!(matches!(err, AppError::Format { .. }));
        assert_eq!(err.exit_code(), 2);
    }
}
