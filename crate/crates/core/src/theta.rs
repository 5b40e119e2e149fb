//! Finite-dimensional diffusion parameters `theta(x, y) = theta((x + y) / 2)`.
//!
//! Free coefficients live on `Omega` only. Values in the interaction layer
//! are derived: the continuous piecewise-linear basis continues the affine
//! function of the adjacent interior element, the piecewise-constant basis
//! copies the adjacent interior element.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::mesh::Mesh1D;
use crate::quadrature::GaussRule;

/// A function of the midpoint `z = (x + y) / 2`, used as the weight in the
/// double integrals.
pub trait MidpointFunction {
    fn value(&self, z: f64) -> f64;

    /// Points where the function or its derivative may jump. Quadrature
    /// splits at these.
    fn breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }
}

impl<F: Fn(f64) -> f64> MidpointFunction for F {
    fn value(&self, z: f64) -> f64 {
        self(z)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThetaBasis {
    ContinuousPiecewiseLinear,
    PiecewiseConstant,
}

/// Up to two `(coefficient index, basis value)` pairs at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasisValues {
    entries: [(usize, f64); 2],
    len: usize,
}

impl BasisValues {
    pub fn as_slice(&self) -> &[(usize, f64)] {
        &self.entries[..self.len]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThetaField {
    mesh: Mesh1D,
    basis: ThetaBasis,
    coeffs: Vec<f64>,
}

impl ThetaField {
    pub fn new(mesh: Mesh1D, basis: ThetaBasis, coeffs: Vec<f64>) -> Result<Self> {
        let want = Self::coeff_count_for(&mesh, basis);
        if coeffs.len() != want {
            return Err(Error::InvalidArgument(format!(
                "{basis:?} basis on {} interior elements needs {want} coefficients, got {}",
                mesh.interior_elem_count(),
                coeffs.len()
            )));
        }
        if let Some(c) = coeffs.iter().find(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite coefficient {c}")));
        }
        Ok(Self { mesh, basis, coeffs })
    }

    pub fn constant(mesh: Mesh1D, basis: ThetaBasis, value: f64) -> Result<Self> {
        let n = Self::coeff_count_for(&mesh, basis);
        Self::new(mesh, basis, vec![value; n])
    }

    /// Nodal interpolant (linear basis) or element-midpoint sample (constant
    /// basis) of `f` on `Omega`.
    pub fn interpolate(mesh: Mesh1D, basis: ThetaBasis, f: impl Fn(f64) -> f64) -> Result<Self> {
        let coeffs = match basis {
            ThetaBasis::ContinuousPiecewiseLinear => {
                (mesh.a_index()..=mesh.b_index()).map(|i| f(mesh.node(i))).collect()
            }
            ThetaBasis::PiecewiseConstant => mesh
                .omega_elements()
                .map(|e| {
                    let (l, r) = mesh.element(e);
                    f(0.5 * (l + r))
                })
                .collect(),
        };
        Self::new(mesh, basis, coeffs)
    }

    pub fn coeff_count_for(mesh: &Mesh1D, basis: ThetaBasis) -> usize {
        match basis {
            ThetaBasis::ContinuousPiecewiseLinear => mesh.interior_elem_count() + 1,
            ThetaBasis::PiecewiseConstant => mesh.interior_elem_count(),
        }
    }

    pub fn mesh(&self) -> &Mesh1D {
        &self.mesh
    }

    pub fn basis(&self) -> ThetaBasis {
        self.basis
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Same mesh and basis, new coefficients.
    pub fn with_coeffs(&self, coeffs: Vec<f64>) -> Result<Self> {
        Self::new(self.mesh.clone(), self.basis, coeffs)
    }

    /// `theta(z)` on `[a - eps, b + eps]`.
    pub fn evaluate(&self, z: f64) -> Result<f64> {
        let (lo, hi) = self.mesh.domain();
        if !(z >= lo && z <= hi) {
            return Err(Error::OutOfDomain { x: z, lo, hi });
        }
        Ok(self.value_at(z))
    }

    /// `theta(x, y) = theta((x + y) / 2)`.
    pub fn eval_two_point(&self, x: f64, y: f64) -> Result<f64> {
        let (lo, hi) = self.mesh.domain();
        for p in [x, y] {
            if !(p >= lo && p <= hi) {
                return Err(Error::OutOfDomain { x: p, lo, hi });
            }
        }
        Ok(self.value_at(0.5 * (x + y)))
    }

    #[inline]
    pub fn value_at(&self, z: f64) -> f64 {
        self.basis_values(z)
            .as_slice()
            .iter()
            .map(|&(k, v)| self.coeffs[k] * v)
            .sum()
    }

    /// Values of the basis functions that are nonzero at `z`. No domain
    /// check; points outside `[a, b]` use the extension rule.
    #[inline]
    pub fn basis_values(&self, z: f64) -> BasisValues {
        let j = self.mesh.interior_elem_count();
        let a_idx = self.mesh.a_index();
        // Interior element holding z, clamped so the layer reuses the
        // adjacent interior element.
        let e = if z <= self.mesh.a() {
            0
        } else if z >= self.mesh.b() {
            j - 1
        } else {
            (self.mesh.locate_unchecked(z) - a_idx).min(j - 1)
        };
        match self.basis {
            ThetaBasis::PiecewiseConstant => BasisValues {
                entries: [(e, 1.0), (0, 0.0)],
                len: 1,
            },
            ThetaBasis::ContinuousPiecewiseLinear => {
                let (l, r) = self.mesh.element(a_idx + e);
                let lam = (z - l) / (r - l);
                BasisValues {
                    entries: [(e, 1.0 - lam), (e + 1, lam)],
                    len: 2,
                }
            }
        }
    }

    /// Midpoints of the interior elements, where the jump penalty samples
    /// the field.
    fn element_midpoints(&self) -> impl Iterator<Item = f64> + '_ {
        self.mesh.omega_elements().map(move |e| {
            let (l, r) = self.mesh.element(e);
            0.5 * (l + r)
        })
    }

    /// `beta * sum_j (theta(m_j) - theta(m_{j+1}))^2` over consecutive
    /// interior element midpoints `m_j`.
    pub fn jump_penalty(&self, beta: f64) -> Result<f64> {
        check_beta(beta)?;
        if beta == 0.0 {
            return Ok(0.0);
        }
        let vals: Vec<f64> = self.element_midpoints().map(|z| self.value_at(z)).collect();
        Ok(beta * vals.windows(2).map(|w| (w[0] - w[1]) * (w[0] - w[1])).sum::<f64>())
    }

    /// Gradient of [`Self::jump_penalty`] with respect to the coefficients.
    pub fn jump_penalty_gradient(&self, beta: f64) -> Result<Vec<f64>> {
        check_beta(beta)?;
        let mut grad = vec![0.0; self.coeffs.len()];
        if beta == 0.0 {
            return Ok(grad);
        }
        let mids: Vec<f64> = self.element_midpoints().collect();
        for w in mids.windows(2) {
            let (bl, br) = (self.basis_values(w[0]), self.basis_values(w[1]));
            let diff = self.value_at(w[0]) - self.value_at(w[1]);
            for &(k, v) in bl.as_slice() {
                grad[k] += 2.0 * beta * diff * v;
            }
            for &(k, v) in br.as_slice() {
                grad[k] -= 2.0 * beta * diff * v;
            }
        }
        Ok(grad)
    }

    /// Coefficients clamped into the box.
    pub fn project_box(&self, bounds: &AdmissibleBox) -> Self {
        Self {
            mesh: self.mesh.clone(),
            basis: self.basis,
            coeffs: self
                .coeffs
                .iter()
                .map(|c| c.clamp(bounds.theta_lo(), bounds.theta_hi()))
                .collect(),
        }
    }

    /// Smallest and largest value over `[a - eps, b + eps]`. Both bases are
    /// piecewise linear, so the extremes sit at nodes or at the ends.
    pub fn range(&self) -> (f64, f64) {
        let (lo, hi) = self.mesh.domain();
        let mut pts: Vec<f64> = self.mesh.interior_nodes().to_vec();
        pts.extend([lo, hi, self.mesh.a(), self.mesh.b()]);
        if self.basis == ThetaBasis::PiecewiseConstant {
            pts.extend(self.element_midpoints());
        }
        pts.iter().map(|&z| self.value_at(z)).fold((f64::INFINITY, f64::NEG_INFINITY), |acc, v| {
            (acc.0.min(v), acc.1.max(v))
        })
    }

    /// `||self - other||_{L^2(Omega)}` with Gauss-Legendre of `order` points
    /// on each piece between the union of both breakpoint sets.
    pub fn l2_distance_on_omega(&self, other: &dyn MidpointFunction, order: usize) -> Result<f64> {
        let rule = GaussRule::legendre(order)?;
        let (a, b) = (self.mesh.a(), self.mesh.b());
        let mut cuts: Vec<f64> = vec![a, b];
        cuts.extend(self.breakpoints().into_iter().chain(other.breakpoints()).filter(|&z| z > a && z < b));
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let mut acc = 0.0;
        for w in cuts.windows(2) {
            for (z, wt) in rule.mapped(w[0], w[1]) {
                let d = self.value_at(z) - other.value(z);
                acc += wt * d * d;
            }
        }
        Ok(crate::math::sqrt(acc))
    }
}

impl MidpointFunction for ThetaField {
    fn value(&self, z: f64) -> f64 {
        self.value_at(z)
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.mesh.interior_nodes().to_vec()
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::InvalidArgument(format!("regularization weight beta = {beta} must be >= 0")));
    }
    Ok(())
}

/// Bounds `0 < theta_lo <= theta <= theta_hi` and `||theta||_{1,inf} <= C`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmissibleBox {
    theta_lo: f64,
    theta_hi: f64,
    w1inf_bound: f64,
}

impl AdmissibleBox {
    pub fn new(theta_lo: f64, theta_hi: f64, w1inf_bound: f64) -> Result<Self> {
        if !(theta_lo > 0.0 && theta_lo <= theta_hi) {
            return Err(Error::InvalidArgument(format!(
                "admissible bounds need 0 < lo <= hi, got [{theta_lo}, {theta_hi}]"
            )));
        }
        Ok(Self {
            theta_lo,
            theta_hi,
            w1inf_bound,
        })
    }

    pub fn theta_lo(&self) -> f64 {
        self.theta_lo
    }

    pub fn theta_hi(&self) -> f64 {
        self.theta_hi
    }

    pub fn w1inf_bound(&self) -> f64 {
        self.w1inf_bound
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear(a: f64, b: f64, eps: f64, m: usize, c: Vec<f64>) -> ThetaField {
        ThetaField::new(Mesh1D::uniform(a, b, eps, m).unwrap(), ThetaBasis::ContinuousPiecewiseLinear, c).unwrap()
    }

    fn constant(c: Vec<f64>, eps: f64) -> ThetaField {
        let m = Mesh1D::uniform(0.0, 1.0, eps, c.len()).unwrap();
        ThetaField::new(m, ThetaBasis::PiecewiseConstant, c).unwrap()
    }

    #[test]
    fn linear_extension_into_layer() {
        // Two interior elements, nodes {0, 0.5, 1}, slope 2 throughout.
        let t = linear(0.0, 1.0, 0.25, 2, vec![1.0, 2.0, 3.0]);
        assert!((t.evaluate(-0.1).unwrap() - 0.8).abs() < 1e-14);
        assert!((t.evaluate(1.2).unwrap() - 3.4).abs() < 1e-14);
    }

    #[test]
    fn linear_interpolation_midpoint() {
        let t = linear(0.0, 1.0, 0.0, 2, vec![2.0, 4.0, 2.0]);
        assert!((t.evaluate(0.25).unwrap() - 3.0).abs() < 1e-14);
        assert_eq!(t.evaluate(0.5).unwrap(), 4.0);
    }

    #[test]
    fn constant_extension_copies_neighbour() {
        let t = constant(vec![1.0, 0.1, 1.0], 0.1);
        assert_eq!(t.evaluate(-0.05).unwrap(), 1.0);
        assert_eq!(t.evaluate(0.5).unwrap(), 0.1);
        assert_eq!(t.evaluate(1.05).unwrap(), 1.0);
    }

    #[test]
    fn evaluate_rejects_outside() {
        let t = constant(vec![1.0, 1.0], 0.1);
        assert!(t.evaluate(-0.2).is_err());
        assert!(t.eval_two_point(0.0, 1.3).is_err());
    }

    #[test]
    fn two_point_uses_midpoint() {
        let tha = |z: f64| 2.0 + 0.4 * (2.0 * z - 1.0).powi(2);
        let t = ThetaField::interpolate(
            Mesh1D::uniform(0.0, 1.0, 0.0625, 64).unwrap(),
            ThetaBasis::ContinuousPiecewiseLinear,
            tha,
        )
        .unwrap();
        assert!((t.eval_two_point(0.5, 0.5).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(t.eval_two_point(0.1, 0.7).unwrap(), t.eval_two_point(0.7, 0.1).unwrap());
        let c = ThetaField::constant(Mesh1D::uniform(0.0, 1.0, 0.1, 4).unwrap(), ThetaBasis::ContinuousPiecewiseLinear, 1.7)
            .unwrap();
        for x in [-0.1, 0.2, 0.9, 1.1] {
            assert!((c.eval_two_point(x, 0.3).unwrap() - 1.7).abs() < 1e-15);
        }
    }

    #[test]
    fn jump_penalty_examples() {
        assert!((constant(vec![1.0, 1.0, 0.5], 0.1).jump_penalty(5e-4).unwrap() - 1.25e-4).abs() < 1e-18);
        assert_eq!(constant(vec![1.0, 0.1, 1.0], 0.1).jump_penalty(0.0).unwrap(), 0.0);
        assert!((constant(vec![1.0, 0.1, 1.0], 0.1).jump_penalty(1.0).unwrap() - 1.62).abs() < 1e-14);
        assert!(constant(vec![1.0, 0.1], 0.1).jump_penalty(-1.0).is_err());
    }

    #[test]
    fn project_box_examples() {
        let t = constant(vec![-0.5, 2.0, 9.0], 0.1);
        let b = AdmissibleBox::new(0.1, 5.0, 10.0).unwrap();
        assert_eq!(t.project_box(&b).coeffs(), &[0.1, 2.0, 5.0]);
        let inside = constant(vec![0.3, 2.0, 4.0], 0.1);
        assert_eq!(inside.project_box(&b).coeffs(), inside.coeffs());
        let unit = AdmissibleBox::new(1.0, 1.0, 0.0).unwrap();
        assert_eq!(t.project_box(&unit).coeffs(), &[1.0, 1.0, 1.0]);
        assert!(AdmissibleBox::new(0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn linear_extension_is_continuous_at_ends() {
        let t = linear(0.0, 1.0, 0.1, 4, vec![1.0, 3.0, 0.5, 2.0, 4.0]);
        for z in [0.0, 1.0] {
            let l = t.evaluate(z - 1e-12).unwrap();
            let r = t.evaluate(z + 1e-12).unwrap();
            assert!((l - r).abs() < 1e-9);
        }
        for (i, z) in [0.0, 0.25, 0.5, 0.75, 1.0].iter().enumerate() {
            assert!((t.evaluate(*z).unwrap() - t.coeffs()[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn coefficient_count_is_checked() {
        let m = Mesh1D::uniform(0.0, 1.0, 0.1, 4).unwrap();
        assert!(ThetaField::new(m.clone(), ThetaBasis::ContinuousPiecewiseLinear, vec![1.0; 4]).is_err());
        assert!(ThetaField::new(m, ThetaBasis::PiecewiseConstant, vec![1.0; 4]).is_ok());
    }

    #[test]
    fn range_includes_extension() {
        let t = linear(0.0, 1.0, 0.25, 2, vec![1.0, 2.0, 3.0]);
        let (lo, hi) = t.range();
        assert!((lo - 0.5).abs() < 1e-14 && (hi - 3.5).abs() < 1e-14);
    }
}
