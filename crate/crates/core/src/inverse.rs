//! Reduced-space formulation of the identification problem.
//!
//! For coefficients `c` of a parameter field `theta`:
//!
//! * state: `B(theta; u, v) = (f, v)` for all `v` vanishing on `Omega_I`,
//!   `u = g` on `Omega_I`;
//! * matching functional `J = 1/2 ||u - I_N u_hat||^2_{L^2(Omega)}`, plus the
//!   optional jump penalty;
//! * adjoint: `B(theta; w, v) = (u - u_hat, v)`, `w = 0` on `Omega_I`;
//! * gradient: `dJ/dc_k = -B(psi_k; u, w)`.
//!
//! Perturbing `theta` by `d theta` gives `B(theta; du, v) = -B(d theta; u, v)`,
//! hence `dJ[d theta] = (u - u_hat, du) = B(theta; w, du) = -B(d theta; u, w)`.
//! All integrals use the same quadrature points, so the gradient is the
//! exact derivative of the discrete objective.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::assembly::{load_vector, NonlocalOperator, LOAD_ORDER};
use crate::error::{Error, Result};
use crate::field::StateField;
use crate::kernel::KernelSpec;
use crate::linalg::{Cholesky, SymMatrix};
use crate::mesh::Mesh1D;
use crate::quadrature::{GaussRule, QuadratureOrder};
use crate::theta::ThetaField;

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Source `f` on `Omega`, volume constraint `g` on `Omega_I`, target `u_hat`
/// on `Omega`. The target is used through its nodal interpolant on the
/// state mesh.
#[derive(Clone)]
pub struct ProblemData {
    pub source: ScalarFn,
    pub constraint: ScalarFn,
    pub target: ScalarFn,
}

impl core::fmt::Debug for ProblemData {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str("ProblemData { .. }")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveReport {
    /// `1/2 ||u - I_N u_hat||^2_{L^2(Omega)}`
    pub j_match: f64,
    /// Jump penalty.
    pub j_reg: f64,
    pub j_total: f64,
    pub grad: Vec<f64>,
}

/// State solution together with the factorization that produced it, so the
/// adjoint can reuse it.
#[derive(Debug, Clone)]
pub struct FactoredState {
    pub state: StateField,
    factor: Cholesky,
}

#[derive(Debug, Clone)]
struct OmegaPoint {
    elem: usize,
    weight: f64,
    lam: f64,
    target: f64,
}

/// Everything that stays fixed while the parameter changes: cached pair
/// quadrature on the state mesh, load, pinned values and target samples.
#[derive(Debug, Clone)]
pub struct IdentificationProblem {
    op: NonlocalOperator,
    data: ProblemData,
    template: ThetaField,
    beta: f64,
    load: Vec<f64>,
    pinned: Vec<f64>,
    omega_points: Vec<OmegaPoint>,
}

impl IdentificationProblem {
    /// `template` fixes the parameter mesh and basis; its coefficients are
    /// ignored.
    pub fn new(
        state_mesh: Mesh1D,
        kernel: KernelSpec,
        data: ProblemData,
        template: ThetaField,
        beta: f64,
        order: QuadratureOrder,
    ) -> Result<Self> {
        if !(beta >= 0.0 && beta.is_finite()) {
            return Err(Error::InvalidArgument(format!("beta = {beta} must be >= 0")));
        }
        let (sa, sb) = (state_mesh.a(), state_mesh.b());
        let (pa, pb) = (template.mesh().a(), template.mesh().b());
        if sa != pa || sb != pb {
            return Err(Error::InvalidArgument(format!(
                "state domain ({sa}, {sb}) differs from parameter domain ({pa}, {pb})"
            )));
        }
        let kinks = template.mesh().interior_nodes().to_vec();
        let op = NonlocalOperator::new(state_mesh.clone(), kernel, order, &kinks)?
            .omega_coupled()
            .with_cache();
        let load = load_vector(&state_mesh, &*data.source);
        let free = state_mesh.free_nodes();
        let pinned = (0..state_mesh.node_count())
            .map(|i| if free.contains(&i) { 0.0 } else { (data.constraint)(state_mesh.node(i)) })
            .collect();
        // The target enters through its nodal interpolant on the state mesh,
        // so a target that lies in the state space is matched exactly.
        let rule = GaussRule::legendre(LOAD_ORDER)?;
        let mut omega_points = Vec::new();
        for e in state_mesh.omega_elements() {
            let (l, r) = state_mesh.element(e);
            let (tl, tr) = ((data.target)(l), (data.target)(r));
            for (x, w) in rule.mapped(l, r) {
                let lam = (x - l) / (r - l);
                omega_points.push(OmegaPoint {
                    elem: e,
                    weight: w,
                    lam,
                    target: (1.0 - lam) * tl + lam * tr,
                });
            }
        }
        Ok(Self {
            op,
            data,
            template,
            beta,
            load,
            pinned,
            omega_points,
        })
    }

    pub fn operator(&self) -> &NonlocalOperator {
        &self.op
    }

    pub fn mesh(&self) -> &Mesh1D {
        self.op.mesh()
    }

    pub fn kernel(&self) -> &KernelSpec {
        self.op.kernel()
    }

    pub fn data(&self) -> &ProblemData {
        &self.data
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn template(&self) -> &ThetaField {
        &self.template
    }

    pub fn coeff_count(&self) -> usize {
        self.template.coeffs().len()
    }

    pub fn theta(&self, coeffs: &[f64]) -> Result<ThetaField> {
        self.template.with_coeffs(coeffs.to_vec())
    }

    fn check_theta(&self, theta: &ThetaField) -> Result<()> {
        if theta.mesh() != self.template.mesh() || theta.basis() != self.template.basis() {
            return Err(Error::InvalidArgument("parameter field does not match the problem's parameter space".into()));
        }
        Ok(())
    }

    /// Free-node block of the stiffness for `theta` and the state right-hand side.
    ///
    /// `theta` is not required to be positive pointwise: the search is
    /// unconstrained and only a reduced matrix that fails to factor rejects a
    /// parameter.
    pub fn reduced_system(&self, theta: &ThetaField) -> Result<(SymMatrix, Vec<f64>)> {
        self.check_theta(theta)?;
        let a = self.op.stiffness_with(theta, false)?;
        let free = self.mesh().free_nodes();
        let coupling = a.matvec(&self.pinned);
        let rhs = self
            .load
            .iter()
            .zip(&coupling[free.clone()])
            .map(|(b, c)| b - c)
            .collect();
        Ok((a.sub_block(free), rhs))
    }

    pub fn solve_state_factored(&self, theta: &ThetaField) -> Result<FactoredState> {
        let (a, rhs) = self.reduced_system(theta)?;
        let factor = a.cholesky()?;
        let x = factor.solve(&rhs);
        let state = self.embed(&self.pinned, &x)?;
        Ok(FactoredState { state, factor })
    }

    pub fn solve_state(&self, theta: &ThetaField) -> Result<StateField> {
        Ok(self.solve_state_factored(theta)?.state)
    }

    /// Adjoint for the state `u`; zero on `Omega_I`.
    pub fn solve_adjoint(&self, theta: &ThetaField, u: &StateField) -> Result<StateField> {
        let (a, _) = self.reduced_system(theta)?;
        let factor = a.cholesky()?;
        self.adjoint_with(&factor, u)
    }

    pub fn adjoint_with(&self, factor: &Cholesky, u: &StateField) -> Result<StateField> {
        let r = self.adjoint_rhs(u);
        let x = factor.solve(&r);
        let zeros = alloc::vec![0.0; self.mesh().node_count()];
        self.embed(&zeros, &x)
    }

    fn embed(&self, base: &[f64], free_values: &[f64]) -> Result<StateField> {
        let mut values = base.to_vec();
        let start = self.mesh().free_nodes().start;
        values[start..start + free_values.len()].copy_from_slice(free_values);
        StateField::new(self.mesh().clone(), values)
    }

    /// `(u - I_N u_hat, phi_i)` for each free node.
    pub fn adjoint_rhs(&self, u: &StateField) -> Vec<f64> {
        let free = self.mesh().free_nodes();
        let mut r = alloc::vec![0.0; free.len()];
        let vals = u.values();
        for q in &self.omega_points {
            let uq = (1.0 - q.lam) * vals[q.elem] + q.lam * vals[q.elem + 1];
            let res = q.weight * (uq - q.target);
            for (node, phi) in [(q.elem, 1.0 - q.lam), (q.elem + 1, q.lam)] {
                if free.contains(&node) {
                    r[node - free.start] += res * phi;
                }
            }
        }
        r
    }

    /// `1/2 ||u - I_N u_hat||^2_{L^2(Omega)}`, exact for piecewise-linear data.
    pub fn matching(&self, u: &StateField) -> f64 {
        let vals = u.values();
        0.5 * self
            .omega_points
            .iter()
            .map(|q| {
                let d = (1.0 - q.lam) * vals[q.elem] + q.lam * vals[q.elem + 1] - q.target;
                q.weight * d * d
            })
            .sum::<f64>()
    }

    /// `||u - I_N u_hat||_{L^2(Omega)}`, consistent with the objective.
    pub fn state_error(&self, u: &StateField) -> f64 {
        crate::math::sqrt(2.0 * self.matching(u))
    }

    /// Objective only (no adjoint solve).
    pub fn objective(&self, coeffs: &[f64]) -> Result<f64> {
        let theta = self.theta(coeffs)?;
        let u = self.solve_state(&theta)?;
        Ok(self.matching(&u) + theta.jump_penalty(self.beta)?)
    }

    pub fn objective_and_gradient(&self, coeffs: &[f64]) -> Result<ObjectiveReport> {
        let theta = self.theta(coeffs)?;
        self.objective_and_gradient_for(&theta)
    }

    pub fn objective_and_gradient_for(&self, theta: &ThetaField) -> Result<ObjectiveReport> {
        let FactoredState { state, factor } = self.solve_state_factored(theta)?;
        let adjoint = self.adjoint_with(&factor, &state)?;
        let j_match = self.matching(&state);
        let j_reg = theta.jump_penalty(self.beta)?;
        let pairing = self.op.theta_pairing(theta, state.values(), adjoint.values());
        let reg_grad = theta.jump_penalty_gradient(self.beta)?;
        let grad = pairing.iter().zip(&reg_grad).map(|(g, r)| r - g).collect();
        Ok(ObjectiveReport {
            j_match,
            j_reg,
            j_total: j_match + j_reg,
            grad,
        })
    }
}

/// One-off state solve without building an identification problem.
pub fn solve_state(
    theta: &ThetaField,
    kernel: KernelSpec,
    mesh: &Mesh1D,
    source: &dyn Fn(f64) -> f64,
    constraint: &dyn Fn(f64) -> f64,
    order: QuadratureOrder,
) -> Result<StateField> {
    crate::assembly::assemble_system(theta, kernel, mesh, source, order)?
        .apply_volume_constraint(constraint)
        .solve()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::theta::ThetaBasis;

    fn problem(beta: f64, basis: ThetaBasis) -> IdentificationProblem {
        let eps = 0.125;
        let mesh = Mesh1D::uniform(0.0, 1.0, eps, 8).unwrap();
        let k = KernelSpec::integrable(eps).unwrap();
        let data = ProblemData {
            source: Arc::new(|x| 1.0 + x),
            constraint: Arc::new(|_| 0.0),
            target: Arc::new(|x| 0.1 * x * (1.0 - x)),
        };
        let pm = Mesh1D::uniform(0.0, 1.0, eps, 4).unwrap();
        let t = ThetaField::constant(pm, basis, 1.0).unwrap();
        IdentificationProblem::new(mesh, k, data, t, beta, QuadratureOrder::default()).unwrap()
    }

    #[test]
    fn zero_data_zero_state() {
        let mesh = Mesh1D::uniform(0.0, 1.0, 0.25, 4).unwrap();
        let k = KernelSpec::integrable(0.25).unwrap();
        let t = ThetaField::constant(mesh.clone(), ThetaBasis::ContinuousPiecewiseLinear, 1.3).unwrap();
        let u = solve_state(&t, k, &mesh, &|_| 0.0, &|_| 0.0, QuadratureOrder::default()).unwrap();
        assert!(u.values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn adjoint_vanishes_when_target_is_reached() {
        let p = problem(0.0, ThetaBasis::ContinuousPiecewiseLinear);
        let theta = p.theta(&[1.0, 1.2, 0.9, 1.1, 1.0]).unwrap();
        let u = p.solve_state(&theta).unwrap();
        let u_copy = u.clone();
        let data = ProblemData {
            target: Arc::new(move |x| u_copy.value_at(x)),
            ..p.data().clone()
        };
        let q = IdentificationProblem::new(
            p.mesh().clone(),
            *p.kernel(),
            data,
            p.template().clone(),
            0.0,
            QuadratureOrder::default(),
        )
        .unwrap();
        let w = q.solve_adjoint(&theta, &u).unwrap();
        assert!(w.values().iter().all(|v| v.abs() < 1e-14));
        let rep = q.objective_and_gradient_for(&theta).unwrap();
        assert!(rep.j_total < 1e-28);
        assert!(rep.grad.iter().all(|g| g.abs() < 1e-12));
    }

    #[test]
    fn adjoint_is_zero_on_layer_and_coercive() {
        let p = problem(0.0, ThetaBasis::ContinuousPiecewiseLinear);
        let theta = p.theta(&[1.0, 1.5, 2.0, 1.5, 1.0]).unwrap();
        let u = p.solve_state(&theta).unwrap();
        let w = p.solve_adjoint(&theta, &u).unwrap();
        for i in 0..p.mesh().node_count() {
            if p.mesh().is_constraint_node(i) {
                assert_eq!(w.values()[i], 0.0);
            }
        }
        // (u - u_hat, w) = B(theta; w, w) >= 0
        let r = p.adjoint_rhs(&u);
        let free = p.mesh().free_nodes();
        let lhs: f64 = r.iter().zip(&w.values()[free]).map(|(a, b)| a * b).sum();
        let bww = p.operator().bilinear(&theta, w.values(), w.values());
        assert!(lhs >= 0.0);
        assert!((lhs - bww).abs() <= 1e-10 * bww.abs().max(1e-300));
    }

    #[test]
    fn report_totals_add_up() {
        let p = problem(1e-2, ThetaBasis::PiecewiseConstant);
        let rep = p.objective_and_gradient(&[1.0, 0.5, 2.0, 1.0]).unwrap();
        assert!(rep.j_reg > 0.0);
        assert_eq!(rep.j_total, rep.j_match + rep.j_reg);
        assert_eq!(rep.grad.len(), 4);
    }

    #[test]
    fn wrong_coefficient_count_is_rejected() {
        let p = problem(0.0, ThetaBasis::ContinuousPiecewiseLinear);
        assert!(p.objective_and_gradient(&[1.0; 3]).is_err());
    }
}
