//! Gauss rules built with the Golub-Welsch algorithm.
//!
//! Jacobi rules integrate `(1 - x)^alpha (1 + x)^beta g(x)` on `[-1, 1]`
//! exactly for polynomial `g` of degree `2n - 1`. The pair quadrature uses
//! them with `alpha = 0` to absorb the `t^beta` behaviour of the integrand
//! next to the diagonal `x = y`.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;

/// Points per one-dimensional rule for the outer and inner integrations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuadratureOrder {
    pub outer: usize,
    pub inner: usize,
}

impl Default for QuadratureOrder {
    fn default() -> Self {
        Self { outer: 5, inner: 5 }
    }
}

impl QuadratureOrder {
    pub fn doubled(self) -> Self {
        Self {
            outer: 2 * self.outer,
            inner: 2 * self.inner,
        }
    }
}

/// Nodes and weights on the reference interval `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    beta: f64,
}

impl GaussRule {
    pub fn legendre(n: usize) -> Result<Self> {
        Self::jacobi(n, 0.0, 0.0)
    }

    pub fn jacobi(n: usize, alpha: f64, beta: f64) -> Result<Self> {
        if n == 0 || !(alpha > -1.0 && beta > -1.0) {
            return Err(Error::InvalidArgument(alloc::format!(
                "Gauss-Jacobi rule needs n >= 1, alpha, beta > -1 (n = {n}, alpha = {alpha}, beta = {beta})"
            )));
        }
        let ab = alpha + beta;
        let mut diag = vec![0.0; n];
        let mut off = vec![0.0; n];
        diag[0] = (beta - alpha) / (ab + 2.0);
        for k in 1..n {
            let kf = k as f64;
            let t = 2.0 * kf + ab;
            diag[k] = (beta * beta - alpha * alpha) / (t * (t + 2.0));
            let num = 4.0 * kf * (kf + alpha) * (kf + beta) * (kf + ab);
            let den = t * t * (t + 1.0) * (t - 1.0);
            off[k - 1] = math::sqrt(num / den);
        }
        let mu0 = math::powf(2.0, ab + 1.0) * math::gamma(alpha + 1.0) * math::gamma(beta + 1.0)
            / math::gamma(ab + 2.0);

        let mut first = vec![0.0; n];
        first[0] = 1.0;
        symmetric_tridiagonal_ql(&mut diag, &mut off, &mut first)?;

        let mut pairs: Vec<(f64, f64)> = diag
            .iter()
            .zip(&first)
            .map(|(&x, &v)| (x, mu0 * v * v))
            .collect();
        pairs.sort_by(|l, r| l.0.total_cmp(&r.0));
        Ok(Self {
            nodes: pairs.iter().map(|p| p.0).collect(),
            weights: pairs.iter().map(|p| p.1).collect(),
            beta,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Rule for `int_lo^hi g(x) dx` (Legendre) as `(x_i, w_i)` pairs.
    pub fn mapped(&self, lo: f64, hi: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (mid + half * x, half * w))
    }

    /// Rule for `int_0^len t^beta g(t) dt` with the `beta` this rule was
    /// built with (requires `alpha = 0`).
    pub fn mapped_left_weighted(&self, len: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * len;
        let scale = math::powf(half, self.beta + 1.0);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (half * (1.0 + x), scale * w))
    }
}

/// Implicit QL on a symmetric tridiagonal matrix. On return `diag` holds the
/// eigenvalues and `first` the first component of each eigenvector
/// (initialise it with `e_1`).
fn symmetric_tridiagonal_ql(diag: &mut [f64], off: &mut [f64], first: &mut [f64]) -> Result<()> {
    let n = diag.len();
    if n == 1 {
        return Ok(());
    }
    off[n - 1] = 0.0;
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m < n - 1 {
                let dd = math::abs(diag[m]) + math::abs(diag[m + 1]);
                if math::abs(off[m]) <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return Err(Error::QuadratureRule);
            }
            let mut g = (diag[l + 1] - diag[l]) / (2.0 * off[l]);
            let mut r = math::hypot(g, 1.0);
            g = diag[m] - diag[l] + off[l] / (g + if g >= 0.0 { r } else { -r });
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut deflated = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * off[i];
                let b = c * off[i];
                r = math::hypot(f, g);
                off[i + 1] = r;
                if r == 0.0 {
                    diag[i + 1] -= p;
                    off[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = diag[i + 1] - p;
                r = (diag[i] - g) * s + 2.0 * c * b;
                p = s * r;
                diag[i + 1] = g + p;
                g = c * r - b;
                let fz = first[i + 1];
                first[i + 1] = s * first[i] + c * fz;
                first[i] = c * first[i] - s * fz;
            }
            if deflated {
                continue;
            }
            diag[l] -= p;
            off[l] = g;
            off[m] = 0.0;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_five_point_nodes() {
        let r = GaussRule::legendre(5).unwrap();
        let expected = [
            -0.906_179_845_938_664,
            -0.538_469_310_105_683,
            0.0,
            0.538_469_310_105_683,
            0.906_179_845_938_664,
        ];
        for (x, e) in r.nodes.iter().zip(expected) {
            assert!((x - e).abs() < 1e-14, "{x} vs {e}");
        }
        let w_mid = 128.0 / 225.0;
        assert!((r.weights[2] - w_mid).abs() < 1e-14);
        assert!((r.weights.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn legendre_exact_on_polynomials() {
        for n in 1..12 {
            let r = GaussRule::legendre(n).unwrap();
            for k in 0..2 * n {
                let approx: f64 = r.mapped(0.0, 1.0).map(|(x, w)| w * x.powi(k as i32)).sum();
                let exact = 1.0 / (k as f64 + 1.0);
                assert!((approx - exact).abs() < 1e-13, "n = {n}, k = {k}");
            }
        }
    }

    #[test]
    fn jacobi_left_weight_exact_on_polynomials() {
        for &beta in &[-0.4, 0.0, 0.6, 1.0, 1.6] {
            for n in [3usize, 5, 10] {
                let r = GaussRule::jacobi(n, 0.0, beta).unwrap();
                for k in 0..2 * n {
                    let len = 0.3;
                    let approx: f64 = r
                        .mapped_left_weighted(len)
                        .map(|(t, w)| w * t.powi(k as i32))
                        .sum();
                    let exact = len.powf(beta + k as f64 + 1.0) / (beta + k as f64 + 1.0);
                    assert!(
                        ((approx - exact) / exact).abs() < 1e-12,
                        "beta = {beta}, n = {n}, k = {k}: {approx} vs {exact}"
                    );
                }
            }
        }
    }

    #[test]
    fn jacobi_rejects_bad_exponents() {
        assert!(GaussRule::jacobi(5, 0.0, -1.0).is_err());
        assert!(GaussRule::jacobi(0, 0.0, 0.0).is_err());
    }
}
