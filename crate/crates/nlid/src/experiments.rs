//! Identification runs and convergence tables.

use std::fmt::Write as _;
use std::sync::Arc;
use std::thread;

use nlid_core::assembly::{consistent_stiffness, weighted_theta_error};
use nlid_core::optimizer::minimize;
use nlid_core::{
    BfgsConfig, IdentificationProblem, Mesh1D, ObjectiveReport, OptRun, ProblemData, QuadratureOrder, Region,
    StateField, ThetaField,
};

use crate::datasets::{case_b_solution, CaseSpec, TargetKind};
use crate::error::{AppError, AppResult};

/// Numerical settings shared by all runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSettings {
    pub bfgs: BfgsConfig,
    pub order: QuadratureOrder,
    /// Constant initial parameter.
    pub init: f64,
    pub verify_quadrature: bool,
    /// 0 or 1 is sequential.
    pub threads: usize,
}

impl Default for RunSettings {
    fn default() -> Self {
        Self {
            bfgs: BfgsConfig::default(),
            order: QuadratureOrder::default(),
            init: 1.0,
            verify_quadrature: false,
            threads: 0,
        }
    }
}

/// A case together with its reference state `u*`.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub spec: CaseSpec,
    pub u_star: Arc<StateField>,
}

impl Experiment {
    pub fn new(spec: CaseSpec, u_star: StateField) -> Self {
        Self {
            spec,
            u_star: Arc::new(u_star),
        }
    }

    pub fn problem_data(&self) -> ProblemData {
        let target: nlid_core::inverse::ScalarFn = match self.spec.target {
            TargetKind::ClosedForm => Arc::new(case_b_solution),
            TargetKind::Surrogate { .. } => {
                let u = Arc::clone(&self.u_star);
                Arc::new(move |x| u.value_at(x))
            }
        };
        ProblemData {
            source: self.spec.source(),
            constraint: self.spec.constraint(),
            target,
        }
    }

    pub fn parameter_mesh(&self, m: usize) -> AppResult<Mesh1D> {
        let (a, b) = self.spec.domain;
        Ok(Mesh1D::uniform(a, b, self.spec.eps(), m)?)
    }

    pub fn problem(&self, n: usize, m: usize, beta: f64, order: QuadratureOrder) -> AppResult<IdentificationProblem> {
        let (a, b) = self.spec.domain;
        let mesh = Mesh1D::uniform(a, b, self.spec.eps(), n)?;
        let template = ThetaField::constant(self.parameter_mesh(m)?, self.spec.basis, 1.0)?;
        Ok(IdentificationProblem::new(
            mesh,
            self.spec.kernel,
            self.problem_data(),
            template,
            beta,
            order,
        )?)
    }
}

#[derive(Debug, Clone)]
pub struct Identification {
    pub n: usize,
    pub m: usize,
    pub beta: f64,
    pub theta: ThetaField,
    pub state: StateField,
    pub report: ObjectiveReport,
    pub run: OptRun,
    /// `||u_N - u_hat||_{L^2(Omega)}` with `u_hat` interpolated on the state mesh.
    pub e_u2: f64,
    /// Weighted parameter error against the true parameter on `Omega x Omega`.
    pub e_theta: f64,
    /// The same functional over `(Omega u Omega_I)^2`.
    pub e_theta_full: f64,
    /// `||theta_M - theta_true||_{L^2(Omega)}`.
    pub theta_l2: f64,
}

impl Identification {
    pub fn converged(&self) -> bool {
        self.run.status.is_converged()
    }
}

/// Minimizes the matching functional on an `n`-element state mesh with an
/// `m`-element parameter mesh. `beta` defaults to the case's weight.
pub fn run_identification(
    exp: &Experiment,
    n: usize,
    m: usize,
    beta: Option<f64>,
    settings: &RunSettings,
) -> AppResult<Identification> {
    if !(settings.init > 0.0 && settings.init.is_finite()) {
        return Err(AppError::Config(format!("initial parameter {} must be positive", settings.init)));
    }
    let beta = beta.unwrap_or(exp.spec.beta);
    let mut order = settings.order;
    if settings.verify_quadrature {
        // The order is chosen once, for the initial parameter.
        let (a, b) = exp.spec.domain;
        let mesh = Mesh1D::uniform(a, b, exp.spec.eps(), n)?;
        let theta = ThetaField::constant(exp.parameter_mesh(m)?, exp.spec.basis, settings.init)?;
        order = consistent_stiffness(&theta, exp.spec.kernel, &mesh, order)?.0;
    }
    let problem = exp.problem(n, m, beta, order)?;
    let theta0 = ThetaField::constant(problem.template().mesh().clone(), exp.spec.basis, settings.init)?;
    let run = minimize(
        |c: &[f64]| problem.objective_and_gradient(c).map(|r| (r.j_total, r.grad)),
        theta0.coeffs(),
        &settings.bfgs,
    )?;
    let theta = problem.theta(&run.x)?;
    let state = problem.solve_state(&theta)?;
    let report = problem.objective_and_gradient_for(&theta)?;
    let e_u2 = problem.state_error(&state);
    let e_theta_on = |region| {
        weighted_theta_error(&exp.spec.theta_true, &theta, exp.spec.kernel, &exp.u_star, order, region)
    };
    let e_theta = e_theta_on(Region::Omega)?;
    let e_theta_full = e_theta_on(Region::Full)?;
    let theta_l2 = theta.l2_distance_on_omega(&exp.spec.theta_true, order.outer)?;
    Ok(Identification {
        n,
        m,
        beta,
        theta,
        state,
        report,
        run,
        e_u2,
        e_theta,
        e_theta_full,
        theta_l2,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum RowStatus {
    Converged,
    NotConverged,
    Failed(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub n: usize,
    pub m: usize,
    pub e_u2: f64,
    pub rate_u: Option<f64>,
    pub e_theta: f64,
    pub rate_theta: Option<f64>,
    pub status: RowStatus,
}

/// `log2(prev / cur)`.
pub fn rate(prev: f64, cur: f64) -> f64 {
    (prev / cur).log2()
}

/// Parses `"n0:m0,n1:m1,..."`.
pub fn parse_levels(s: &str) -> AppResult<Vec<(usize, usize)>> {
    let bad = |item: &str| AppError::Config(format!("bad level {item:?}, expected N:M"));
    let levels = s
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|item| {
            let (n, m) = item.split_once(':').ok_or_else(|| bad(item))?;
            let n = n.trim().parse().map_err(|_| bad(item))?;
            let m = m.trim().parse().map_err(|_| bad(item))?;
            Ok((n, m))
        })
        .collect::<AppResult<Vec<_>>>()?;
    if levels.is_empty() {
        return Err(AppError::Config("no levels given".into()));
    }
    Ok(levels)
}

/// Runs every level and fills in rates. Levels run concurrently when
/// `settings.threads > 1`; each run is sequential and the row order follows
/// `levels`, so the output does not depend on the thread count.
pub fn convergence_table(
    exp: &Experiment,
    levels: &[(usize, usize)],
    beta: Option<f64>,
    settings: &RunSettings,
) -> Vec<(ConvergenceRow, Option<Identification>)> {
    let job = |&(n, m): &(usize, usize)| {
        let inner = RunSettings { threads: 0, ..*settings };
        run_identification(exp, n, m, beta, &inner)
    };
    let results: Vec<AppResult<Identification>> = if settings.threads > 1 {
        let mut out = Vec::with_capacity(levels.len());
        for batch in levels.chunks(settings.threads) {
            thread::scope(|s| {
                let handles: Vec<_> = batch.iter().map(|lv| s.spawn(move || job(lv))).collect();
                out.extend(handles.into_iter().map(|h| h.join().expect("identification worker panicked")));
            });
        }
        out
    } else {
        levels.iter().map(job).collect()
    };
    let mut rows: Vec<(ConvergenceRow, Option<Identification>)> = Vec::with_capacity(levels.len());
    for (&(n, m), res) in levels.iter().zip(results) {
        let (row, ident) = match res {
            Ok(id) => (
                ConvergenceRow {
                    n,
                    m,
                    e_u2: id.e_u2,
                    rate_u: None,
                    e_theta: id.e_theta,
                    rate_theta: None,
                    status: if id.converged() { RowStatus::Converged } else { RowStatus::NotConverged },
                },
                Some(id),
            ),
            Err(e) => (
                ConvergenceRow {
                    n,
                    m,
                    e_u2: f64::NAN,
                    rate_u: None,
                    e_theta: f64::NAN,
                    rate_theta: None,
                    status: RowStatus::Failed(e.to_string()),
                },
                None,
            ),
        };
        rows.push((row, ident));
    }
    for i in 1..rows.len() {
        let failed = |r: &ConvergenceRow| matches!(r.status, RowStatus::Failed(_));
        if failed(&rows[i - 1].0) || failed(&rows[i].0) {
            continue;
        }
        let (pu, pt) = (rows[i - 1].0.e_u2, rows[i - 1].0.e_theta);
        let row = &mut rows[i].0;
        row.rate_u = Some(rate(pu, row.e_u2));
        row.rate_theta = Some(rate(pt, row.e_theta));
    }
    rows
}

pub const TABLE_HEADER: &str = "N,M,e_u2,rate_u,e_theta,rate_theta";

/// CSV text of a table; empty rate fields on the first row and across
/// failed rows.
pub fn table_csv(rows: &[ConvergenceRow]) -> String {
    let opt = |r: Option<f64>| r.map_or(String::new(), |v| format!("{v:.4}"));
    let mut out = String::from(TABLE_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{:.6e},{},{:.6e},{}",
            r.n,
            r.m,
            r.e_u2,
            opt(r.rate_u),
            r.e_theta,
            opt(r.rate_theta)
        );
    }
    out
}

/// `samples` equally spaced values of `theta` over `[a - eps, b + eps]`.
pub fn emit_theta_profile(theta: &ThetaField, samples: usize) -> AppResult<Vec<(f64, f64)>> {
    if samples < 2 {
        return Err(AppError::Config(format!("need at least 2 samples, got {samples}")));
    }
    let (lo, hi) = theta.mesh().domain();
    let step = (hi - lo) / (samples - 1) as f64;
    Ok((0..samples)
        .map(|i| {
            let z = if i + 1 == samples { hi } else { lo + step * i as f64 };
            (z, theta.value_at(z))
        })
        .collect())
}

pub fn profile_csv(samples: &[(f64, f64)]) -> String {
    let mut out = String::from("z,theta\n");
    for (z, t) in samples {
        let _ = writeln!(out, "{z:.12e},{t:.12e}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::{theta_c, Case};
    use nlid_core::ThetaBasis;

    #[test]
    fn rate_arithmetic() {
        assert!((rate(3.24e-5, 7.66e-6) - 2.08).abs() < 5e-3);
        assert_eq!(rate(1e-3, 1e-3), 0.0);
    }

    #[test]
    fn level_parsing() {
        assert_eq!(parse_levels("16:4, 32:8").unwrap(), vec![(16, 4), (32, 8)]);
        assert!(parse_levels("16").is_err());
        assert!(parse_levels("").is_err());
        assert!(parse_levels("a:b").is_err());
    }

    #[test]
    fn profiles() {
        let mesh = Mesh1D::uniform(0.0, 1.0, 0.0625, 16).unwrap();
        let one = ThetaField::constant(mesh.clone(), ThetaBasis::ContinuousPiecewiseLinear, 1.0).unwrap();
        let p = emit_theta_profile(&one, 11).unwrap();
        assert!(p.iter().all(|&(_, t)| t == 1.0));
        assert_eq!(p[0].0, -0.0625);
        assert_eq!(p[10].0, 1.0625);
        let c = ThetaField::interpolate(mesh.clone(), ThetaBasis::ContinuousPiecewiseLinear, theta_c).unwrap();
        let at = emit_theta_profile(&c, 5).unwrap();
        // Sample 2 is z = 0.5, a mesh node.
        assert!((at[2].0 - 0.5).abs() < 1e-15);
        assert!((at[2].1 - 0.215625).abs() < 1e-12);
        let d = ThetaField::interpolate(mesh, ThetaBasis::PiecewiseConstant, crate::datasets::theta_d).unwrap();
        assert!((d.value_at(0.3) - 0.1).abs() < 1e-15);
        assert!(emit_theta_profile(&d, 1).is_err());
    }

    #[test]
    fn csv_layout() {
        let rows = vec![
            ConvergenceRow {
                n: 16,
                m: 4,
                e_u2: 1e-3,
                rate_u: None,
                e_theta: 2e-2,
                rate_theta: None,
                status: RowStatus::Converged,
            },
            ConvergenceRow {
                n: 32,
                m: 8,
                e_u2: 2.5e-4,
                rate_u: Some(2.0),
                e_theta: 1e-2,
                rate_theta: Some(1.0),
                status: RowStatus::Converged,
            },
        ];
        let csv = table_csv(&rows);
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines[0], TABLE_HEADER);
        assert_eq!(lines[1], "16,4,1.000000e-3,,2.000000e-2,");
        assert_eq!(lines[2], "32,8,2.500000e-4,2.0000,1.000000e-2,1.0000");
    }

    #[test]
    fn exact_constant_target_is_a_fixed_point() {
        // Target generated with theta = 1.7 on the state mesh itself.
        let spec = CaseSpec::new(Case::C, Some(0.125)).unwrap();
        let mesh = Mesh1D::uniform(0.0, 1.0, 0.125, 16).unwrap();
        let pm = Mesh1D::uniform(0.0, 1.0, 0.125, 2).unwrap();
        let t = ThetaField::constant(pm, ThetaBasis::ContinuousPiecewiseLinear, 1.7).unwrap();
        let src = spec.source();
        let u = nlid_core::inverse::solve_state(&t, spec.kernel, &mesh, &*src, &|_| 0.0, QuadratureOrder::default())
            .unwrap();
        let exp = Experiment::new(spec, u);
        let mut settings = RunSettings::default();
        settings.bfgs.grad_tol = 1e-12;
        let id = run_identification(&exp, 16, 2, Some(0.0), &settings).unwrap();
        assert!(id.converged());
        for c in id.theta.coeffs() {
            assert!((c - 1.7).abs() < 1e-8, "{c}");
        }
        assert!(id.e_u2 < 1e-8, "{}", id.e_u2);
    }
}
