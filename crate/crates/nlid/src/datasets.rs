//! The four identification data sets.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nlid_core::inverse::ScalarFn;
use nlid_core::{KernelSpec, MidpointFunction, Result, ThetaBasis};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Case {
    A,
    B,
    C,
    D,
}

impl Case {
    pub const ALL: [Case; 4] = [Case::A, Case::B, Case::C, Case::D];
}

impl fmt::Display for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Case::A => "A",
            Case::B => "B",
            Case::C => "C",
            Case::D => "D",
        };
        f.write_str(s)
    }
}

impl FromStr for Case {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "A" => Ok(Case::A),
            "B" => Ok(Case::B),
            "C" => Ok(Case::C),
            "D" => Ok(Case::D),
            other => Err(format!("unknown case {other:?}, expected A, B, C or D")),
        }
    }
}

/// Fractional order used by case A.
pub const CASE_A_S: f64 = 0.7;
/// Horizon used when none is given.
pub const DEFAULT_EPS: f64 = 0.0625;
/// Jump-penalty weight for case D.
pub const CASE_D_BETA: f64 = 5e-4;
/// Mesh used for the `u*` of the parameter error in case B.
pub const CASE_B_FINE_N: usize = 1 << 10;

/// `2 + 0.4 (2z - 1)^2`, i.e. `2 + 0.4 (x + y - 1)^2`.
pub fn theta_a(z: f64) -> f64 {
    let t = 2.0 * z - 1.0;
    2.0 + 0.4 * t * t
}

/// Jumps at 0.625 (0.2 to 1.875) and at 0.75 (2.0 on both sides).
pub fn theta_c(z: f64) -> f64 {
    if z < 0.625 {
        0.2 + (z - 0.625) * (z - 0.625)
    } else if z < 0.75 {
        z + 1.25
    } else {
        14.4 * (z - 0.75) + 2.0
    }
}

pub fn theta_d(z: f64) -> f64 {
    if (0.2..0.6).contains(&z) {
        0.1
    } else {
        1.0
    }
}

pub fn case_b_solution(x: f64) -> f64 {
    2.5 * x * (1.0 - x)
}

/// `-L u_hat` for `theta_a` and the integrable kernel of horizon `eps`.
pub fn case_b_source(eps: f64, x: f64) -> f64 {
    eps * eps + 24.0 * x * x - 24.0 * x + 16.0
}

/// A true parameter with the points where it is not smooth.
#[derive(Clone)]
pub struct TrueTheta {
    f: fn(f64) -> f64,
    breaks: &'static [f64],
}

impl TrueTheta {
    pub fn eval(&self, z: f64) -> f64 {
        (self.f)(z)
    }
}

impl fmt::Debug for TrueTheta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TrueTheta").field("breaks", &self.breaks).finish()
    }
}

impl MidpointFunction for TrueTheta {
    fn value(&self, z: f64) -> f64 {
        (self.f)(z)
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.breaks.to_vec()
    }
}

/// How the target state is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetKind {
    ClosedForm,
    /// Forward solution with the true parameter on a fine mesh.
    Surrogate { n: usize },
}

/// Everything that defines a case at a given horizon.
#[derive(Debug, Clone)]
pub struct CaseSpec {
    pub case: Case,
    pub domain: (f64, f64),
    pub kernel: KernelSpec,
    pub basis: ThetaBasis,
    pub beta: f64,
    pub theta_true: TrueTheta,
    pub target: TargetKind,
}

impl CaseSpec {
    /// `eps` defaults to [`DEFAULT_EPS`].
    pub fn new(case: Case, eps: Option<f64>) -> Result<Self> {
        let eps = eps.unwrap_or(DEFAULT_EPS);
        let spec = match case {
            Case::A => CaseSpec {
                case,
                domain: (-1.0, 1.0),
                kernel: KernelSpec::fractional(CASE_A_S, eps)?,
                basis: ThetaBasis::ContinuousPiecewiseLinear,
                beta: 0.0,
                theta_true: TrueTheta { f: theta_a, breaks: &[] },
                target: TargetKind::Surrogate { n: 1 << 11 },
            },
            Case::B => CaseSpec {
                case,
                domain: (0.0, 1.0),
                kernel: KernelSpec::integrable(eps)?,
                basis: ThetaBasis::ContinuousPiecewiseLinear,
                beta: 0.0,
                theta_true: TrueTheta { f: theta_a, breaks: &[] },
                target: TargetKind::ClosedForm,
            },
            Case::C => CaseSpec {
                case,
                domain: (0.0, 1.0),
                kernel: KernelSpec::integrable(eps)?,
                basis: ThetaBasis::ContinuousPiecewiseLinear,
                beta: 0.0,
                theta_true: TrueTheta {
                    f: theta_c,
                    breaks: &[0.625, 0.75],
                },
                target: TargetKind::Surrogate { n: 1 << 12 },
            },
            Case::D => CaseSpec {
                case,
                domain: (0.0, 1.0),
                kernel: KernelSpec::integrable(eps)?,
                basis: ThetaBasis::PiecewiseConstant,
                beta: CASE_D_BETA,
                theta_true: TrueTheta {
                    f: theta_d,
                    breaks: &[0.2, 0.6],
                },
                target: TargetKind::Surrogate { n: 1 << 12 },
            },
        };
        Ok(spec)
    }

    pub fn eps(&self) -> f64 {
        self.kernel.eps()
    }

    pub fn source(&self) -> ScalarFn {
        match self.case {
            Case::A => Arc::new(|_| 1.0),
            Case::B => {
                let eps = self.eps();
                Arc::new(move |x| case_b_source(eps, x))
            }
            Case::C | Case::D => Arc::new(|_| 5.0),
        }
    }

    pub fn constraint(&self) -> ScalarFn {
        match self.case {
            Case::B => Arc::new(case_b_solution),
            _ => Arc::new(|_| 0.0),
        }
    }

    pub fn surrogate_n(&self) -> Option<usize> {
        match self.target {
            TargetKind::Surrogate { n } => Some(n),
            TargetKind::ClosedForm => None,
        }
    }
}
