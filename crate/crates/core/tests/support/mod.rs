//! Brute-force tensor midpoint integration of the nonlocal double integrals.
//!
//! The cell grid covers `(a - eps, b + eps)^2`. Callers choose `cells` so
//! that every mesh node lies on a grid line; then the lines `|x - y| = eps`
//! run through cell centers diagonally and those cells get half weight.

#![allow(dead_code)]

pub struct Oracle {
    pub nodes: Vec<f64>,
    pub eps: f64,
    /// `gamma(t) t^2` on `|t| < eps`.
    pub kt2: fn(f64, f64) -> f64,
    pub cells: usize,
}

pub fn integrable_kt2(t: f64, eps: f64) -> f64 {
    t.abs() / (eps * eps)
}

pub fn fractional_half_kt2(_t: f64, _eps: f64) -> f64 {
    1.0
}

/// Hat function `i` and its slope at `x` (one-sided to the right at nodes).
pub fn hat(nodes: &[f64], i: usize, x: f64) -> (f64, f64) {
    if i > 0 && x >= nodes[i - 1] && x < nodes[i] {
        let h = nodes[i] - nodes[i - 1];
        return ((x - nodes[i - 1]) / h, 1.0 / h);
    }
    if i + 1 < nodes.len() && x >= nodes[i] && x < nodes[i + 1] {
        let h = nodes[i + 1] - nodes[i];
        return ((nodes[i + 1] - x) / h, -1.0 / h);
    }
    if i + 1 == nodes.len() && x == nodes[i] {
        return (1.0, 0.0);
    }
    (0.0, 0.0)
}

/// Parameter basis function `k` on the nodes `z` of `[a, b]`: hat on
/// `[a, b]`, affine continuation of the end elements outside.
pub fn theta_hat(z_nodes: &[f64], k: usize, z: f64) -> f64 {
    let last = z_nodes.len() - 1;
    let affine = |e: usize| {
        let (l, r) = (z_nodes[e], z_nodes[e + 1]);
        let t = (z - l) / (r - l);
        if k == e {
            1.0 - t
        } else if k == e + 1 {
            t
        } else {
            0.0
        }
    };
    if z < z_nodes[0] {
        return affine(0);
    }
    if z >= z_nodes[last] {
        return affine(last - 1);
    }
    let e = z_nodes.partition_point(|&p| p <= z) - 1;
    affine(e)
}

impl Oracle {
    /// Visits every cell center with the truncation weight and the difference
    /// quotients `(phi_i(y) - phi_i(x)) / (y - x)` of all hats.
    fn for_each(&self, mut f: impl FnMut(f64, f64, &[f64])) {
        let lo = self.nodes[0];
        let hi = *self.nodes.last().unwrap();
        let h = (hi - lo) / self.cells as f64;
        let tol = 1e-9 * h;
        let nn = self.nodes.len();
        let mut q = vec![0.0; nn];
        for ix in 0..self.cells {
            let x = lo + (ix as f64 + 0.5) * h;
            for iy in 0..self.cells {
                let y = lo + (iy as f64 + 0.5) * h;
                let t = y - x;
                let cut = if (t.abs() - self.eps).abs() <= tol {
                    0.5
                } else if t.abs() < self.eps {
                    1.0
                } else {
                    continue;
                };
                for (i, qi) in q.iter_mut().enumerate() {
                    *qi = if ix == iy {
                        hat(&self.nodes, i, x).1
                    } else {
                        (hat(&self.nodes, i, y).0 - hat(&self.nodes, i, x).0) / t
                    };
                }
                f(0.5 * (x + y), h * h * cut * (self.kt2)(t, self.eps), &q);
            }
        }
    }

    /// Stiffness over all nodes for the weight `w`.
    pub fn stiffness(&self, w: impl Fn(f64) -> f64) -> Vec<Vec<f64>> {
        let nn = self.nodes.len();
        let mut a = vec![vec![0.0; nn]; nn];
        self.for_each(|z, weight, q| {
            let s = weight * w(z);
            for i in 0..nn {
                for j in 0..nn {
                    a[i][j] += s * q[i] * q[j];
                }
            }
        });
        a
    }

    /// `B(psi_k; u, v)` for every parameter basis function.
    pub fn pairings(&self, z_nodes: &[f64], u: &[f64], v: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; z_nodes.len()];
        self.for_each(|z, weight, q| {
            let du: f64 = q.iter().zip(u).map(|(a, b)| a * b).sum();
            let dv: f64 = q.iter().zip(v).map(|(a, b)| a * b).sum();
            for (k, gk) in g.iter_mut().enumerate() {
                *gk += weight * theta_hat(z_nodes, k, z) * du * dv;
            }
        });
        g
    }
}

pub fn quad_form(a: &[Vec<f64>], u: &[f64]) -> f64 {
    a.iter()
        .zip(u)
        .map(|(row, ui)| ui * row.iter().zip(u).map(|(x, y)| x * y).sum::<f64>())
        .sum()
}
