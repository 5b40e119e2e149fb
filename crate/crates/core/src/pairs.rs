//! Quadrature for double integrals of the form
//!
//! ```text
//! int int W((x + y) / 2) gamma(x, y) (u(y) - u(x)) (v(y) - v(x)) dy dx
//! ```
//!
//! over pairs of mesh elements, where `u`, `v` are continuous piecewise
//! linear on the mesh and `W` is piecewise smooth in the midpoint with known
//! breakpoints.
//!
//! Each unordered pair `(K, L)`, `K <= L`, is integrated over `x in K`,
//! `y in L` and doubled, since the integrand is symmetric under `x <-> y`.
//!
//! * Same element: substitute `t = y - x`. Inside one element the basis
//!   differences are `slope * t`, so the integrand behaves like
//!   `t^{2 - p}` and a Gauss-Jacobi rule in `t` absorbs it. The inner
//!   integral in `x` is Gauss-Legendre.
//! * Adjacent elements: Duffy split of the square at the shared node into
//!   the triangles `b <= a` and `a < b` (`a = p - x`, `b = y - p`). In polar
//!   form the corner singularity becomes `r^{3 - p}`, handled by
//!   Gauss-Jacobi in the radial variable; the angular variable is smooth.
//! * Separated elements: iterated Gauss-Legendre with the inner range cut
//!   at `x + eps`.
//!
//! Every range is also cut where the midpoint crosses a breakpoint of `W`
//! and where the truncation boundary `|x - y| = eps` changes which
//! constraint is active, so each piece is smooth.

use alloc::vec::Vec;

use crate::error::Result;
use crate::kernel::KernelSpec;
use crate::math;
use crate::mesh::Mesh1D;
use crate::quadrature::{GaussRule, QuadratureOrder};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairKind {
    Same,
    Adjacent,
    Separated,
}

/// Unordered pair of elements `left <= right` that interact.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ElementPair {
    pub left: usize,
    pub right: usize,
    pub kind: PairKind,
}

impl ElementPair {
    /// Global node indices touched by the pair and their count.
    pub fn local_nodes(&self) -> ([usize; 4], usize) {
        let (l, r) = (self.left, self.right);
        match self.kind {
            PairKind::Same => ([l, l + 1, 0, 0], 2),
            PairKind::Adjacent => ([l, l + 1, l + 2, 0], 3),
            PairKind::Separated => ([l, l + 1, r, r + 1], 4),
        }
    }
}

/// One quadrature point of a pair. `delta[n]` is `phi_n(y) - phi_n(x)` for
/// the pair's local node `n`; `weight` already contains the kernel, the
/// Jacobian and the factor 2 for the mirrored pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub weight: f64,
    pub delta: [f64; 4],
}

/// All element pairs within interaction distance, in lexicographic order.
pub fn interacting_pairs(mesh: &Mesh1D, eps: f64) -> Vec<ElementPair> {
    let ne = mesh.element_count();
    let mut out = Vec::new();
    for l in 0..ne {
        out.push(ElementPair {
            left: l,
            right: l,
            kind: PairKind::Same,
        });
        if l + 1 < ne {
            out.push(ElementPair {
                left: l,
                right: l + 1,
                kind: PairKind::Adjacent,
            });
        }
        let x1 = mesh.node(l + 1);
        for r in l + 2..ne {
            if mesh.node(r) - x1 >= eps {
                break;
            }
            out.push(ElementPair {
                left: l,
                right: r,
                kind: PairKind::Separated,
            });
        }
    }
    out
}

/// Largest `|i - j|` over node pairs coupled by some element pair.
pub fn node_bandwidth(pairs: &[ElementPair]) -> usize {
    pairs
        .iter()
        .map(|p| {
            let (nodes, len) = p.local_nodes();
            nodes[len - 1] - nodes[0]
        })
        .max()
        .unwrap_or(0)
}

#[derive(Debug, Clone)]
struct Rules {
    outer: GaussRule,
    inner: GaussRule,
    /// Weight `t^{2 - p}` for the same-element diagonal.
    diagonal: GaussRule,
    /// Weight `r^{3 - p}` for the radial variable at a shared node.
    corner: GaussRule,
}

/// Point generator for a fixed mesh, kernel, order and weight breakpoints.
#[derive(Debug, Clone)]
pub struct PairQuadrature {
    kernel: KernelSpec,
    rules: Rules,
    kinks: Vec<f64>,
    p: f64,
}

impl PairQuadrature {
    pub fn new(kernel: KernelSpec, order: QuadratureOrder, kinks: &[f64]) -> Result<Self> {
        let p = kernel.singularity_exponent();
        let mut kinks = kinks.to_vec();
        kinks.sort_by(f64::total_cmp);
        kinks.dedup();
        Ok(Self {
            kernel,
            rules: Rules {
                outer: GaussRule::legendre(order.outer)?,
                inner: GaussRule::legendre(order.inner)?,
                diagonal: GaussRule::jacobi(order.outer, 0.0, 2.0 - p)?,
                corner: GaussRule::jacobi(order.inner, 0.0, 3.0 - p)?,
            },
            kinks,
            p,
        })
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn kinks(&self) -> &[f64] {
        &self.kinks
    }

    /// Breakpoints of the weight with midpoint in the open interval.
    fn kinks_in(&self, lo: f64, hi: f64) -> &[f64] {
        let s = self.kinks.partition_point(|&k| k <= lo);
        let e = self.kinks.partition_point(|&k| k < hi);
        &self.kinks[s..e.max(s)]
    }

    /// Visit every quadrature point of `pair`.
    pub fn for_each_point<F: FnMut(&PairPoint)>(&self, mesh: &Mesh1D, pair: &ElementPair, mut f: F) {
        match pair.kind {
            PairKind::Same => self.same_element(mesh, pair.left, &mut f),
            PairKind::Adjacent => self.adjacent(mesh, pair.left, &mut f),
            PairKind::Separated => self.separated(mesh, pair.left, pair.right, &mut f),
        }
    }

    fn same_element<F: FnMut(&PairPoint)>(&self, mesh: &Mesh1D, e: usize, f: &mut F) {
        let (x0, x1) = mesh.element(e);
        let h = x1 - x0;
        let t_max = h.min(self.kernel.eps());
        let kinks = self.kinks_in(x0, x1);

        let mut t_cuts = Vec::with_capacity(2 + 2 * kinks.len());
        t_cuts.push(0.0);
        t_cuts.push(t_max);
        for &zk in kinks {
            t_cuts.push(2.0 * (zk - x0));
            t_cuts.push(2.0 * (x1 - zk));
        }
        normalize_cuts(&mut t_cuts, 0.0, t_max);

        let mut x_cuts = Vec::with_capacity(2 + kinks.len());
        for w in t_cuts.windows(2) {
            let (ta, tb) = (w[0], w[1]);
            let t_points: Vec<(f64, f64)> = if ta == 0.0 {
                self.rules
                    .diagonal
                    .mapped_left_weighted(tb)
                    .map(|(t, wt)| (t, wt * math::powf(t, self.p - 2.0)))
                    .collect()
            } else {
                self.rules.outer.mapped(ta, tb).collect()
            };
            for (t, wt) in t_points {
                let kw = 2.0 * wt * self.kernel.eval_distance(t);
                let d = t / h;
                x_cuts.clear();
                x_cuts.push(x0);
                x_cuts.push(x1 - t);
                x_cuts.extend(kinks.iter().map(|&zk| zk - 0.5 * t));
                normalize_cuts(&mut x_cuts, x0, x1 - t);
                for xw in x_cuts.windows(2) {
                    for (x, wx) in self.rules.inner.mapped(xw[0], xw[1]) {
                        f(&PairPoint {
                            x,
                            y: x + t,
                            z: x + 0.5 * t,
                            weight: kw * wx,
                            delta: [-d, d, 0.0, 0.0],
                        });
                    }
                }
            }
        }
    }

    fn adjacent<F: FnMut(&PairPoint)>(&self, mesh: &Mesh1D, left: usize, f: &mut F) {
        let (xk0, p) = mesh.element(left);
        let (_, yl1) = mesh.element(left + 1);
        let hk = p - xk0;
        let hl = yl1 - p;
        let eps = self.kernel.eps();

        // Triangle b <= a: x = p - a, y = p + a * eta.
        let below: Vec<f64> = self
            .kinks_in(p - 0.5 * hk, p)
            .iter()
            .map(|&zk| 2.0 * (p - zk))
            .collect();
        self.corner_triangle(hk, hl, eps, &below, f, |a, eta| {
            let b = a * eta;
            (p - a, p + b, [-a / hk, a / hk - b / hl, b / hl, 0.0])
        });

        // Triangle a < b: x = p - b * eta, y = p + b.
        let above: Vec<f64> = self
            .kinks_in(p, p + 0.5 * hl)
            .iter()
            .map(|&zk| 2.0 * (zk - p))
            .collect();
        self.corner_triangle(hl, hk, eps, &above, f, |b, eta| {
            let a = b * eta;
            (p - a, p + b, [-a / hk, a / hk - b / hl, b / hl, 0.0])
        });
    }

    /// Integrates over `{(r, eta): 0 <= eta <= 1, r <= h_near, r * eta <= h_far,
    /// r (1 + eta) <= eps}` with Jacobian `r`. `kink_c` lists constants `c`
    /// such that the midpoint crosses a weight breakpoint at `r = c / (1 - eta)`.
    fn corner_triangle<F, M>(&self, h_near: f64, h_far: f64, eps: f64, kink_c: &[f64], f: &mut F, map: M)
    where
        F: FnMut(&PairPoint),
        M: Fn(f64, f64) -> (f64, f64, [f64; 4]),
    {
        let r_max = |eta: f64| {
            let mut r = h_near.min(eps / (1.0 + eta));
            if eta > 0.0 {
                r = r.min(h_far / eta);
            }
            r
        };

        let mut eta_cuts = Vec::with_capacity(8 + 3 * kink_c.len());
        eta_cuts.extend([0.0, 1.0, h_far / h_near, eps / h_near - 1.0]);
        if eps > h_far {
            eta_cuts.push(h_far / (eps - h_far));
        }
        for &c in kink_c {
            eta_cuts.push(1.0 - c / h_near);
            eta_cuts.push(h_far / (c + h_far));
            eta_cuts.push((eps - c) / (eps + c));
        }
        normalize_cuts(&mut eta_cuts, 0.0, 1.0);

        let mut r_cuts = Vec::with_capacity(2 + kink_c.len());
        for w in eta_cuts.windows(2) {
            for (eta, w_eta) in self.rules.outer.mapped(w[0], w[1]) {
                let rm = r_max(eta);
                r_cuts.clear();
                r_cuts.push(0.0);
                r_cuts.push(rm);
                r_cuts.extend(kink_c.iter().map(|&c| c / (1.0 - eta)));
                normalize_cuts(&mut r_cuts, 0.0, rm);
                let dist = 1.0 + eta;
                for (i, rw) in r_cuts.windows(2).enumerate() {
                    let mut emit = |r: f64, wr: f64| {
                        let (x, y, delta) = map(r, eta);
                        let weight = 2.0 * w_eta * wr * self.kernel.eval_distance(r * dist);
                        f(&PairPoint {
                            x,
                            y,
                            z: 0.5 * (x + y),
                            weight,
                            delta,
                        });
                    };
                    if i == 0 {
                        for (r, wr) in self.rules.corner.mapped_left_weighted(rw[1]) {
                            // Jacobian r over the rule's weight r^{3 - p}.
                            emit(r, wr * math::powf(r, self.p - 2.0));
                        }
                    } else {
                        for (r, wr) in self.rules.inner.mapped(rw[0], rw[1]) {
                            emit(r, wr * r);
                        }
                    }
                }
            }
        }
    }

    fn separated<F: FnMut(&PairPoint)>(&self, mesh: &Mesh1D, left: usize, right: usize, f: &mut F) {
        let (x0, x1) = mesh.element(left);
        let (y0, y1) = mesh.element(right);
        let (hk, hl) = (x1 - x0, y1 - y0);
        let eps = self.kernel.eps();
        let x_lo = x0.max(y0 - eps);
        if x_lo >= x1 {
            return;
        }
        let kinks = self.kinks_in(0.5 * (x_lo + y0), 0.5 * (x1 + y1));

        let mut x_cuts = Vec::with_capacity(3 + 3 * kinks.len());
        x_cuts.extend([x_lo, x1, y1 - eps]);
        for &zk in kinks {
            x_cuts.extend([2.0 * zk - y0, 2.0 * zk - y1, zk - 0.5 * eps]);
        }
        normalize_cuts(&mut x_cuts, x_lo, x1);

        let mut y_cuts = Vec::with_capacity(2 + kinks.len());
        for xw in x_cuts.windows(2) {
            for (x, wx) in self.rules.outer.mapped(xw[0], xw[1]) {
                let y_hi = y1.min(x + eps);
                if y_hi <= y0 {
                    continue;
                }
                y_cuts.clear();
                y_cuts.push(y0);
                y_cuts.push(y_hi);
                y_cuts.extend(kinks.iter().map(|&zk| 2.0 * zk - x));
                normalize_cuts(&mut y_cuts, y0, y_hi);
                let lx = (x - x0) / hk;
                for yw in y_cuts.windows(2) {
                    for (y, wy) in self.rules.inner.mapped(yw[0], yw[1]) {
                        let ly = (y - y0) / hl;
                        f(&PairPoint {
                            x,
                            y,
                            z: 0.5 * (x + y),
                            weight: 2.0 * wx * wy * self.kernel.eval_distance(y - x),
                            delta: [lx - 1.0, -lx, 1.0 - ly, ly],
                        });
                    }
                }
            }
        }
    }
}

/// Keep `lo`, `hi` and the candidates strictly between them, sorted, with
/// near-duplicates removed.
fn normalize_cuts(cuts: &mut Vec<f64>, lo: f64, hi: f64) {
    let tol = 1e-13 * (hi - lo).max(0.0);
    cuts.retain(|&c| c.is_finite() && c > lo + tol && c < hi - tol);
    cuts.push(lo);
    cuts.push(hi);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|a, b| *a - *b <= tol);
}
