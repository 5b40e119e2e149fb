//! Continuous piecewise-linear fields on the state mesh.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::mesh::Mesh1D;
use crate::quadrature::GaussRule;

/// Nodal values over all nodes, `Omega_I` included. Used for both the state
/// and the adjoint.
#[derive(Debug, Clone, PartialEq)]
pub struct StateField {
    mesh: Mesh1D,
    values: Vec<f64>,
}

impl StateField {
    pub fn new(mesh: Mesh1D, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.node_count() {
            return Err(Error::InvalidArgument(format!(
                "state field needs {} nodal values, got {}",
                mesh.node_count(),
                values.len()
            )));
        }
        Ok(Self { mesh, values })
    }

    pub fn zeros(mesh: Mesh1D) -> Self {
        let n = mesh.node_count();
        Self {
            mesh,
            values: alloc::vec![0.0; n],
        }
    }

    /// Nodal interpolant of `f`.
    pub fn interpolate(mesh: Mesh1D, f: impl Fn(f64) -> f64) -> Self {
        let values = mesh.nodes().iter().map(|&x| f(x)).collect();
        Self { mesh, values }
    }

    pub fn mesh(&self) -> &Mesh1D {
        &self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn evaluate(&self, x: f64) -> Result<f64> {
        let e = self.mesh.locate(x)?;
        Ok(self.value_in(e, x))
    }

    /// Value at `x` assuming `x` lies in element `e`.
    #[inline]
    pub fn value_in(&self, e: usize, x: f64) -> f64 {
        let (l, r) = self.mesh.element(e);
        let lam = (x - l) / (r - l);
        (1.0 - lam) * self.values[e] + lam * self.values[e + 1]
    }

    /// Value at an arbitrary point of the mesh domain; points outside are
    /// clamped to the ends.
    #[inline]
    pub fn value_at(&self, x: f64) -> f64 {
        let (lo, hi) = self.mesh.domain();
        let x = x.clamp(lo, hi);
        self.value_in(self.mesh.locate_unchecked(x), x)
    }

    /// `||u - reference||_{L^2(Omega)}` with Gauss-Legendre of `order` points
    /// per interior element.
    pub fn l2_error_on_omega(&self, reference: &dyn Fn(f64) -> f64, order: usize) -> Result<f64> {
        let rule = GaussRule::legendre(order)?;
        let mut acc = 0.0;
        for e in self.mesh.omega_elements() {
            let (l, r) = self.mesh.element(e);
            for (x, w) in rule.mapped(l, r) {
                let d = self.value_in(e, x) - reference(x);
                acc += w * d * d;
            }
        }
        Ok(crate::math::sqrt(acc))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolation_is_exact_for_linear() {
        let mesh = Mesh1D::uniform(0.0, 1.0, 0.25, 4).unwrap();
        let u = StateField::interpolate(mesh, |x| 3.0 * x - 1.0);
        for x in [-0.25, -0.1, 0.0, 0.33, 0.9, 1.25] {
            assert!((u.evaluate(x).unwrap() - (3.0 * x - 1.0)).abs() < 1e-14);
        }
        assert!(u.evaluate(1.3).is_err());
    }

    #[test]
    fn l2_error_examples() {
        let mesh = Mesh1D::uniform(0.0, 1.0, 0.1, 8).unwrap();
        let u = StateField::interpolate(mesh.clone(), |x| x * x);
        // P1 interpolant of x^2 only matches at nodes; the error is positive.
        assert!(u.l2_error_on_omega(&|x| x * x, 5).unwrap() > 0.0);
        let lin = StateField::interpolate(mesh.clone(), |x| 2.0 * x);
        assert!(lin.l2_error_on_omega(&|x| 2.0 * x, 5).unwrap() < 1e-15);
        let one = StateField::interpolate(mesh, |_| 1.0);
        assert!((one.l2_error_on_omega(&|_| 0.0, 5).unwrap() - 1.0).abs() < 1e-14);
    }
}
