//! Dense BFGS on the inverse Hessian with a strong-Wolfe line search.
//!
//! The objective callback may fail (for instance when a trial parameter is
//! not positive). A failed trial is treated like a step that is too long and
//! the line search backs off.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BfgsConfig {
    /// Stop when `||g||_inf <= grad_tol * max(1, ||g_0||_inf)`.
    pub grad_tol: f64,
    pub max_iters: usize,
    /// Sufficient-decrease constant.
    pub c1: f64,
    /// Curvature constant.
    pub c2: f64,
    /// Trial steps per line search.
    pub max_trials: usize,
}

impl Default for BfgsConfig {
    fn default() -> Self {
        Self {
            grad_tol: 1e-8,
            max_iters: 500,
            c1: 1e-4,
            c2: 0.9,
            max_trials: 40,
        }
    }
}

impl BfgsConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.grad_tol > 0.0
            && self.grad_tol.is_finite()
            && 0.0 < self.c1
            && self.c1 < self.c2
            && self.c2 < 1.0
            && self.max_trials > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(alloc::format!("invalid optimizer settings {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptStatus {
    Converged,
    MaxIterations,
    /// No step satisfying the Wolfe conditions could be found, usually
    /// because the objective has hit rounding level.
    LineSearchFailed,
}

impl OptStatus {
    pub fn is_converged(self) -> bool {
        self == OptStatus::Converged
    }
}

/// One accepted step. `phi0`, `dphi0` are the value and directional
/// derivative at the start, `phi`, `dphi` at the accepted point.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub alpha: f64,
    pub phi0: f64,
    pub dphi0: f64,
    pub phi: f64,
    pub dphi: f64,
    pub trials: usize,
    /// Whether the curvature update was applied.
    pub updated: bool,
    pub grad_inf: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptRun {
    pub x: Vec<f64>,
    pub value: f64,
    pub grad: Vec<f64>,
    pub status: OptStatus,
    pub iterations: usize,
    pub evaluations: usize,
    pub initial_grad_inf: f64,
    pub steps: Vec<StepRecord>,
}

impl OptRun {
    pub fn grad_inf(&self) -> f64 {
        inf_norm(&self.grad)
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(math::abs(*x)))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}

struct Point {
    alpha: f64,
    phi: f64,
    dphi: f64,
    x: Vec<f64>,
    g: Vec<f64>,
}

enum Search {
    Accepted(Point, usize),
    Failed(usize),
}

/// Minimizes `f` from `x0`. `f` returns the value and gradient.
pub fn minimize<F>(mut f: F, x0: &[f64], cfg: &BfgsConfig) -> Result<OptRun>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    cfg.validate()?;
    let n = x0.len();
    let mut x = x0.to_vec();
    let (mut fx, mut g) = f(&x)?;
    let mut evaluations = 1;
    if !fx.is_finite() || g.len() != n {
        return Err(Error::InvalidArgument("objective is not finite at the initial point".into()));
    }
    let g0 = inf_norm(&g);
    let stop = cfg.grad_tol * g0.max(1.0);
    let mut h = identity(n);
    let mut scaled = false;
    let mut steps = Vec::new();
    let mut status = OptStatus::MaxIterations;
    let mut iterations = 0;

    while iterations < cfg.max_iters {
        if inf_norm(&g) <= stop {
            status = OptStatus::Converged;
            break;
        }
        let mut d = direction(&h, &g);
        let mut dphi0 = dot(&g, &d);
        if !(dphi0 < 0.0) {
            h = identity(n);
            scaled = false;
            d = g.iter().map(|v| -v).collect();
            dphi0 = dot(&g, &d);
        }
        let alpha0 = if steps.is_empty() { (0.1 / inf_norm(&g)).min(1.0) } else { 1.0 };
        let mut res = line_search(&mut f, &x, fx, dphi0, &d, alpha0, cfg);
        if let (Search::Failed(t), true) = (&res, scaled) {
            // Retry once along steepest descent, dropping the curvature model.
            evaluations += t;
            h = identity(n);
            scaled = false;
            d = g.iter().map(|v| -v).collect();
            dphi0 = dot(&g, &d);
            res = line_search(&mut f, &x, fx, dphi0, &d, (0.1 / inf_norm(&g)).min(1.0), cfg);
        }
        let (p, trials) = match res {
            Search::Accepted(p, t) => (p, t),
            Search::Failed(t) => {
                evaluations += t;
                status = OptStatus::LineSearchFailed;
                break;
            }
        };
        evaluations += trials;
        iterations += 1;

        let s: Vec<f64> = p.x.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = p.g.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        let updated = sy > 1e-12 * math::sqrt(dot(&s, &s)) * math::sqrt(dot(&y, &y));
        if updated {
            if !scaled {
                let scale = sy / dot(&y, &y);
                h.iter_mut().for_each(|v| *v *= scale);
                scaled = true;
            }
            bfgs_update(&mut h, &s, &y, sy);
        }
        steps.push(StepRecord {
            alpha: p.alpha,
            phi0: fx,
            dphi0,
            phi: p.phi,
            dphi: p.dphi,
            trials,
            updated,
            grad_inf: inf_norm(&p.g),
        });
        x = p.x;
        fx = p.phi;
        g = p.g;
    }
    if status == OptStatus::MaxIterations && inf_norm(&g) <= stop {
        status = OptStatus::Converged;
    }
    Ok(OptRun {
        x,
        value: fx,
        grad: g,
        status,
        iterations,
        evaluations,
        initial_grad_inf: g0,
        steps,
    })
}

fn identity(n: usize) -> Vec<f64> {
    let mut h = vec![0.0; n * n];
    for i in 0..n {
        h[i * n + i] = 1.0;
    }
    h
}

fn direction(h: &[f64], g: &[f64]) -> Vec<f64> {
    let n = g.len();
    (0..n).map(|i| -dot(&h[i * n..(i + 1) * n], g)).collect()
}

/// `H <- (I - rho s y^T) H (I - rho y s^T) + rho s s^T`.
fn bfgs_update(h: &mut [f64], s: &[f64], y: &[f64], sy: f64) {
    let n = s.len();
    let rho = 1.0 / sy;
    let hy: Vec<f64> = (0..n).map(|i| dot(&h[i * n..(i + 1) * n], y)).collect();
    let yhy = dot(y, &hy);
    let c = rho * rho * yhy + rho;
    for i in 0..n {
        for j in 0..n {
            h[i * n + j] += c * s[i] * s[j] - rho * (hy[i] * s[j] + s[i] * hy[j]);
        }
    }
}

/// Bracketing and zoom in one loop. `lo` always satisfies sufficient
/// decrease; `hi` is the other end of the bracket once known. A trial whose
/// evaluation fails closes the bracket without values.
fn line_search<F>(f: &mut F, x: &[f64], phi0: f64, dphi0: f64, d: &[f64], alpha0: f64, cfg: &BfgsConfig) -> Search
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let mut lo = (0.0, phi0, dphi0);
    let mut hi: Option<(f64, Option<(f64, f64)>)> = None;
    let mut alpha = alpha0;
    for trial in 1..=cfg.max_trials {
        let xt: Vec<f64> = x.iter().zip(d).map(|(a, b)| a + alpha * b).collect();
        let eval = f(&xt).ok().filter(|(v, gr)| v.is_finite() && gr.iter().all(|t| t.is_finite()));
        match eval {
            None => hi = Some((alpha, None)),
            Some((phi, gt)) => {
                let dphi = dot(&gt, d);
                if phi > phi0 + cfg.c1 * alpha * dphi0 || phi >= lo.1 {
                    hi = Some((alpha, Some((phi, dphi))));
                } else if math::abs(dphi) <= -cfg.c2 * dphi0 {
                    return Search::Accepted(Point { alpha, phi, dphi, x: xt, g: gt }, trial);
                } else {
                    let span = hi.map_or(f64::INFINITY, |h| h.0 - lo.0);
                    if dphi * span >= 0.0 {
                        hi = Some((lo.0, Some((lo.1, lo.2))));
                    }
                    lo = (alpha, phi, dphi);
                }
            }
        }
        alpha = match hi {
            None => 2.0 * alpha,
            Some((ah, vals)) => {
                let (a, b) = if lo.0 < ah { (lo.0, ah) } else { (ah, lo.0) };
                let width = b - a;
                if !(width > f64::EPSILON * b.max(1e-300)) {
                    break;
                }
                let guess = vals.map_or(f64::NAN, |(ph, _)| {
                    // Minimizer of the quadratic through (lo, phi_lo, dphi_lo) and (hi, phi_hi).
                    let dh = ah - lo.0;
                    let denom = 2.0 * (ph - lo.1 - lo.2 * dh);
                    if denom > 0.0 {
                        lo.0 - lo.2 * dh * dh / denom
                    } else {
                        f64::NAN
                    }
                });
                let (l, r) = (a + 0.1 * width, b - 0.1 * width);
                if guess.is_finite() && guess >= l && guess <= r {
                    guess
                } else {
                    0.5 * (a + b)
                }
            }
        };
    }
    Search::Failed(cfg.max_trials)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let (a, b) = (x[0], x[1]);
        let v = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
        let g = vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)];
        Ok((v, g))
    }

    #[test]
    fn quadratic_bowl() {
        let diag = [1.0, 10.0, 100.0, 0.5];
        let f = |x: &[f64]| -> Result<(f64, Vec<f64>)> {
            let v = x.iter().zip(&diag).map(|(a, d)| 0.5 * d * (a - 1.0).powi(2)).sum();
            Ok((v, x.iter().zip(&diag).map(|(a, d)| d * (a - 1.0)).collect()))
        };
        let run = minimize(f, &[0.0; 4], &BfgsConfig::default()).unwrap();
        assert_eq!(run.status, OptStatus::Converged);
        // ||g||_inf <= 1e-8 * 100 and the smallest curvature is 0.5.
        assert!(run.grad_inf() <= 1e-6);
        for v in &run.x {
            assert!((v - 1.0).abs() < 2e-6 + 1e-12);
        }
    }

    #[test]
    fn rosenbrock_converges_and_steps_satisfy_wolfe() {
        let cfg = BfgsConfig::default();
        let run = minimize(rosenbrock, &[-1.2, 1.0], &cfg).unwrap();
        assert_eq!(run.status, OptStatus::Converged);
        assert!((run.x[0] - 1.0).abs() < 1e-6 && (run.x[1] - 1.0).abs() < 1e-6);
        for s in &run.steps {
            assert!(s.dphi0 < 0.0);
            assert!(s.phi <= s.phi0 + cfg.c1 * s.alpha * s.dphi0);
            assert!(s.dphi.abs() <= -cfg.c2 * s.dphi0);
        }
    }

    #[test]
    fn failed_evaluations_shrink_the_step() {
        // Defined only for x > 0.
        let f = |x: &[f64]| -> Result<(f64, Vec<f64>)> {
            if x[0] <= 0.0 {
                return Err(Error::NonPositiveTheta { z: 0.0, value: x[0] });
            }
            Ok((x[0] - x[0].ln(), vec![1.0 - 1.0 / x[0]]))
        };
        let run = minimize(f, &[20.0], &BfgsConfig::default()).unwrap();
        assert_eq!(run.status, OptStatus::Converged);
        assert!((run.x[0] - 1.0).abs() < 1e-7);
    }

    #[test]
    fn starting_at_the_minimum_returns_immediately() {
        let run = minimize(|x: &[f64]| Ok((x[0] * x[0], vec![2.0 * x[0]])), &[0.0], &BfgsConfig::default()).unwrap();
        assert_eq!(run.iterations, 0);
        assert!(run.status.is_converged());
    }

    #[test]
    fn iteration_cap_is_reported() {
        let cfg = BfgsConfig {
            max_iters: 2,
            ..BfgsConfig::default()
        };
        let run = minimize(rosenbrock, &[-1.2, 1.0], &cfg).unwrap();
        assert_eq!(run.status, OptStatus::MaxIterations);
        assert_eq!(run.iterations, 2);
    }

    #[test]
    fn bad_settings_are_rejected() {
        let cfg = BfgsConfig {
            c2: 1e-5,
            ..BfgsConfig::default()
        };
        assert!(minimize(rosenbrock, &[0.0, 0.0], &cfg).is_err());
    }
}
