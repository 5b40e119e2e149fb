//! Truncated symmetric kernels.
//!
//! The kernel never carries the diffusion parameter; assembly multiplies the
//! two.

use alloc::format;

use crate::error::{Error, Result};
use crate::math;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelFamily {
    /// `|x - y|^{-(1 + 2s)}` with `0 < s < 1`.
    Fractional { s: f64 },
    /// `1 / (eps^2 |x - y|)`.
    Integrable,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    family: KernelFamily,
    eps: f64,
}

impl KernelSpec {
    pub fn fractional(s: f64, eps: f64) -> Result<Self> {
        if !(s > 0.0 && s < 1.0) {
            return Err(Error::InvalidArgument(format!("fractional order s = {s} not in (0, 1)")));
        }
        Self::new(KernelFamily::Fractional { s }, eps)
    }

    pub fn integrable(eps: f64) -> Result<Self> {
        Self::new(KernelFamily::Integrable, eps)
    }

    pub fn new(family: KernelFamily, eps: f64) -> Result<Self> {
        if !(eps.is_finite() && eps > 0.0) {
            return Err(Error::InvalidArgument(format!("interaction radius eps = {eps} must be positive")));
        }
        if let KernelFamily::Fractional { s } = family {
            if !(s > 0.0 && s < 1.0) {
                return Err(Error::InvalidArgument(format!("fractional order s = {s} not in (0, 1)")));
            }
        }
        Ok(Self { family, eps })
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// `gamma(x, y)`. Undefined on the diagonal.
    pub fn eval(&self, x: f64, y: f64) -> Result<f64> {
        if x == y {
            return Err(Error::SingularPoint(x));
        }
        Ok(self.eval_distance(math::abs(x - y)))
    }

    /// Kernel as a function of `r = |x - y| > 0`.
    #[inline]
    pub fn eval_distance(&self, r: f64) -> f64 {
        if r > self.eps {
            return 0.0;
        }
        match self.family {
            KernelFamily::Fractional { s } => math::powf(r, -(1.0 + 2.0 * s)),
            KernelFamily::Integrable => 1.0 / (self.eps * self.eps * r),
        }
    }

    /// The power `p` with `gamma ~ |x - y|^{-p}` near the diagonal.
    pub fn singularity_exponent(&self) -> f64 {
        match self.family {
            KernelFamily::Fractional { s } => 1.0 + 2.0 * s,
            KernelFamily::Integrable => 1.0,
        }
    }
}
