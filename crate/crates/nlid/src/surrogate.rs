//! Fine-mesh forward solutions standing in for exact states.

use std::fs;
use std::path::Path;

use nlid_core::assembly::{load_vector, max_relative_change, self_check_tolerance, MAX_DOUBLINGS};
use nlid_core::{Error, Mesh1D, NonlocalOperator, NonlocalSystem, QuadratureOrder, StateField};
use serde::{Deserialize, Serialize};

use crate::datasets::{case_b_solution, Case, CaseSpec, TargetKind};
use crate::error::{AppError, AppResult};
use crate::parallel;

/// Solves the state equation with the true parameter on an `n`-element mesh
/// of `Omega`. With `verify`, the quadrature order is doubled until two
/// consecutive orders agree.
pub fn forward_solve(
    spec: &CaseSpec,
    n: usize,
    order: QuadratureOrder,
    threads: usize,
    verify: bool,
) -> AppResult<StateField> {
    let (a, b) = spec.domain;
    let mesh = Mesh1D::uniform(a, b, spec.eps(), n)?;
    let kinks = nlid_core::MidpointFunction::breakpoints(&spec.theta_true);
    let build = |o| -> AppResult<_> {
        let op = NonlocalOperator::new(mesh.clone(), spec.kernel, o, &kinks)?;
        Ok(parallel::stiffness(&op, &spec.theta_true, threads)?)
    };
    let mut stiff = build(order)?;
    if verify {
        let mut current = order;
        let mut doublings = 0;
        loop {
            let fine = build(current.doubled())?;
            let (worst, row, col) = max_relative_change(&stiff, &fine);
            if worst <= self_check_tolerance(&spec.kernel) {
                break;
            }
            doublings += 1;
            if doublings == MAX_DOUBLINGS {
                return Err(Error::QuadratureInconsistent {
                    row,
                    col,
                    rel_change: worst,
                }
                .into());
            }
            current = current.doubled();
            stiff = fine;
        }
    }
    let source = spec.source();
    let constraint = spec.constraint();
    let sys = NonlocalSystem::new(mesh.clone(), spec.kernel, stiff, load_vector(&mesh, &*source))?;
    Ok(sys.apply_volume_constraint(&*constraint).solve()?)
}

/// Surrogate target for cases A, C and D; `n` defaults to the case's fine
/// mesh size.
pub fn make_surrogate(
    spec: &CaseSpec,
    n: Option<usize>,
    order: QuadratureOrder,
    threads: usize,
    verify: bool,
) -> AppResult<StateField> {
    let default_n = spec
        .surrogate_n()
        .ok_or_else(|| AppError::Config(format!("case {} has a closed-form target and no surrogate", spec.case)))?;
    forward_solve(spec, n.unwrap_or(default_n), order, threads, verify)
}

/// The reference state `u*` used in the error measures: the surrogate, or
/// for case B the interpolant of the closed form on a fine mesh.
pub fn reference_state(
    spec: &CaseSpec,
    surrogate: Option<StateField>,
    order: QuadratureOrder,
    threads: usize,
    verify: bool,
) -> AppResult<StateField> {
    match spec.target {
        TargetKind::ClosedForm => {
            let (a, b) = spec.domain;
            let mesh = Mesh1D::uniform(a, b, spec.eps(), crate::datasets::CASE_B_FINE_N)?;
            Ok(StateField::interpolate(mesh, case_b_solution))
        }
        TargetKind::Surrogate { .. } => match surrogate {
            Some(s) => {
                check_compatible(spec, &s)?;
                Ok(s)
            }
            None => make_surrogate(spec, None, order, threads, verify),
        },
    }
}

fn check_compatible(spec: &CaseSpec, s: &StateField) -> AppResult<()> {
    let m = s.mesh();
    if (m.a(), m.b()) != spec.domain || m.eps() != spec.eps() {
        return Err(AppError::Config(format!(
            "surrogate on ({}, {}) with eps {} does not fit case {} on ({}, {}) with eps {}",
            m.a(),
            m.b(),
            m.eps(),
            spec.case,
            spec.domain.0,
            spec.domain.1,
            spec.eps()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateFile {
    pub case: Case,
    pub a: f64,
    pub b: f64,
    pub eps: f64,
    pub n: usize,
    pub values: Vec<f64>,
}

impl SurrogateFile {
    pub fn new(case: Case, state: &StateField) -> Self {
        let m = state.mesh();
        Self {
            case,
            a: m.a(),
            b: m.b(),
            eps: m.eps(),
            n: m.interior_elem_count(),
            values: state.values().to_vec(),
        }
    }

    pub fn to_state(&self) -> AppResult<StateField> {
        let mesh = Mesh1D::uniform(self.a, self.b, self.eps, self.n)?;
        Ok(StateField::new(mesh, self.values.clone())?)
    }

    pub fn save(&self, path: &Path) -> AppResult<()> {
        let text = serde_json::to_string(self).expect("surrogate serializes");
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
