//! Assembly of the nonlocal bilinear form
//!
//! ```text
//! B(W; u, v) = int int W((x + y) / 2) gamma(x, y) (u(y) - u(x)) (v(y) - v(x)) dy dx
//! ```
//!
//! over `(Omega ∪ Omega_I)^2`, the load vector, the energy semi-norm, the
//! parameter-gradient pairing and the parameter error functional.
//!
//! Entries are accumulated element pair by element pair in lexicographic
//! pair order, points in generation order, so results are bitwise
//! reproducible. [`NonlocalOperator::local_block`] exposes the per-pair
//! contribution so callers can compute blocks concurrently and merge them
//! with [`NonlocalOperator::merge_blocks`] in the same order.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::field::StateField;
use crate::kernel::KernelSpec;
use crate::linalg::SymMatrix;
use crate::math;
use crate::mesh::Mesh1D;
use crate::pairs::{interacting_pairs, node_bandwidth, ElementPair, PairQuadrature};
use crate::quadrature::{GaussRule, QuadratureOrder};
use crate::theta::{MidpointFunction, ThetaField};

/// Meshes with at most this many interior elements use dense storage.
pub const DENSE_LIMIT: usize = 1 << 9;

/// Gauss-Legendre points per element for the load vector and `L^2(Omega)`
/// integrals.
pub const LOAD_ORDER: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq)]
struct CachedPoint {
    z: f64,
    weight: f64,
    delta: [f64; 4],
}

/// Contribution of one element pair: a symmetric block over up to four
/// nodes, lower triangle filled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalBlock {
    nodes: [usize; 4],
    len: usize,
    vals: [[f64; 4]; 4],
}

/// Mesh, kernel and pair quadrature for one discretization. Optionally
/// caches every quadrature point so repeated assemblies with different
/// weights skip point generation.
#[derive(Debug, Clone)]
pub struct NonlocalOperator {
    mesh: Mesh1D,
    quad: PairQuadrature,
    order: QuadratureOrder,
    pairs: Vec<ElementPair>,
    bandwidth: usize,
    cache: Option<(Vec<usize>, Vec<CachedPoint>)>,
}

impl NonlocalOperator {
    /// `kinks` are the breakpoints of the weights this operator will be used
    /// with (for a parameter field: its interior mesh nodes).
    pub fn new(mesh: Mesh1D, kernel: KernelSpec, order: QuadratureOrder, kinks: &[f64]) -> Result<Self> {
        let quad = PairQuadrature::new(kernel, order, kinks)?;
        let pairs = interacting_pairs(&mesh, kernel.eps());
        let bandwidth = node_bandwidth(&pairs);
        Ok(Self {
            mesh,
            quad,
            order,
            pairs,
            bandwidth,
            cache: None,
        })
    }

    /// Drops the pairs with both elements in `Omega_I`. They only feed the
    /// block between pinned nodes, which the reduced system, the adjoint and
    /// the gradient pairing never read. Must be called before
    /// [`Self::with_cache`].
    pub fn omega_coupled(mut self) -> Self {
        let omega = self.mesh.omega_elements();
        self.pairs.retain(|p| omega.contains(&p.left) || omega.contains(&p.right));
        self.bandwidth = node_bandwidth(&self.pairs);
        self.cache = None;
        self
    }

    /// Precompute and keep all quadrature points.
    pub fn with_cache(mut self) -> Self {
        let mut offsets = Vec::with_capacity(self.pairs.len() + 1);
        let mut points = Vec::new();
        offsets.push(0);
        for pair in &self.pairs {
            self.quad.for_each_point(&self.mesh, pair, |pt| {
                points.push(CachedPoint {
                    z: pt.z,
                    weight: pt.weight,
                    delta: pt.delta,
                })
            });
            offsets.push(points.len());
        }
        self.cache = Some((offsets, points));
        self
    }

    pub fn mesh(&self) -> &Mesh1D {
        &self.mesh
    }

    pub fn kernel(&self) -> &KernelSpec {
        self.quad.kernel()
    }

    pub fn order(&self) -> QuadratureOrder {
        self.order
    }

    pub fn pairs(&self) -> &[ElementPair] {
        &self.pairs
    }

    pub fn kinks(&self) -> &[f64] {
        self.quad.kinks()
    }

    /// Node bandwidth of the full stiffness matrix.
    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    pub fn point_count(&self) -> Option<usize> {
        self.cache.as_ref().map(|(_, p)| p.len())
    }

    #[inline]
    fn for_each_point<F: FnMut(f64, f64, &[f64; 4])>(&self, idx: usize, mut f: F) {
        match &self.cache {
            Some((offsets, points)) => {
                for pt in &points[offsets[idx]..offsets[idx + 1]] {
                    f(pt.z, pt.weight, &pt.delta);
                }
            }
            None => self
                .quad
                .for_each_point(&self.mesh, &self.pairs[idx], |pt| f(pt.z, pt.weight, &pt.delta)),
        }
    }

    /// Empty matrix over all nodes with the storage this mesh calls for.
    pub fn new_matrix(&self) -> SymMatrix {
        let n = self.mesh.node_count();
        if self.mesh.interior_elem_count() <= DENSE_LIMIT {
            SymMatrix::dense(n)
        } else {
            SymMatrix::banded(n, self.bandwidth)
        }
    }

    /// Block of pair `idx` for the weight `w`. Rejects non-positive weight
    /// values when `require_positive` is set.
    pub fn local_block(&self, idx: usize, w: &dyn MidpointFunction, require_positive: bool) -> Result<LocalBlock> {
        let (nodes, len) = self.pairs[idx].local_nodes();
        let mut vals = [[0.0; 4]; 4];
        let mut bad = None;
        self.for_each_point(idx, |z, weight, d| {
            let wz = w.value(z);
            if require_positive && !(wz > 0.0 && wz.is_finite()) {
                bad.get_or_insert((z, wz));
            }
            let s = weight * wz;
            for a in 0..len {
                let sa = s * d[a];
                for b in 0..=a {
                    vals[a][b] += sa * d[b];
                }
            }
        });
        if let Some((z, value)) = bad {
            return Err(Error::NonPositiveTheta { z, value });
        }
        Ok(LocalBlock { nodes, len, vals })
    }

    /// Adds blocks in the order given.
    pub fn merge_blocks<'a>(&self, matrix: &mut SymMatrix, blocks: impl IntoIterator<Item = &'a LocalBlock>) {
        for blk in blocks {
            for a in 0..blk.len {
                for b in 0..=a {
                    matrix.add(blk.nodes[a], blk.nodes[b], blk.vals[a][b]);
                }
            }
        }
    }

    /// Full stiffness matrix for the weight `w` (all nodes).
    pub fn stiffness(&self, w: &dyn MidpointFunction) -> Result<SymMatrix> {
        self.stiffness_with(w, true)
    }

    /// As [`stiffness`](Self::stiffness), optionally accepting weights that
    /// are not positive everywhere.
    pub fn stiffness_with(&self, w: &dyn MidpointFunction, require_positive: bool) -> Result<SymMatrix> {
        let mut m = self.new_matrix();
        for idx in 0..self.pairs.len() {
            let blk = self.local_block(idx, w, require_positive)?;
            self.merge_blocks(&mut m, [&blk]);
        }
        Ok(m)
    }

    /// `B(W; u, v)` for nodal vectors over all nodes.
    pub fn bilinear(&self, w: &dyn MidpointFunction, u: &[f64], v: &[f64]) -> f64 {
        let mut acc = 0.0;
        for idx in 0..self.pairs.len() {
            let (nodes, len) = self.pairs[idx].local_nodes();
            self.for_each_point(idx, |z, weight, d| {
                let (mut du, mut dv) = (0.0, 0.0);
                for a in 0..len {
                    du += d[a] * u[nodes[a]];
                    dv += d[a] * v[nodes[a]];
                }
                acc += weight * w.value(z) * du * dv;
            });
        }
        acc
    }

    /// `B(W; u, v)` restricted to the pairs accepted by `keep`.
    pub fn bilinear_where(
        &self,
        w: &dyn MidpointFunction,
        u: &[f64],
        v: &[f64],
        keep: impl Fn(&ElementPair) -> bool,
    ) -> f64 {
        let mut acc = 0.0;
        for idx in 0..self.pairs.len() {
            if !keep(&self.pairs[idx]) {
                continue;
            }
            let (nodes, len) = self.pairs[idx].local_nodes();
            self.for_each_point(idx, |z, weight, d| {
                let (mut du, mut dv) = (0.0, 0.0);
                for a in 0..len {
                    du += d[a] * u[nodes[a]];
                    dv += d[a] * v[nodes[a]];
                }
                acc += weight * w.value(z) * du * dv;
            });
        }
        acc
    }

    /// `G_k = B(psi_k; u, w)` for every basis function `psi_k` of the
    /// parameter space of `theta`.
    pub fn theta_pairing(&self, theta: &ThetaField, u: &[f64], w: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; theta.coeffs().len()];
        for idx in 0..self.pairs.len() {
            let (nodes, len) = self.pairs[idx].local_nodes();
            self.for_each_point(idx, |z, weight, d| {
                let (mut du, mut dw) = (0.0, 0.0);
                for a in 0..len {
                    du += d[a] * u[nodes[a]];
                    dw += d[a] * w[nodes[a]];
                }
                let s = weight * du * dw;
                for &(k, v) in theta.basis_values(z).as_slice() {
                    g[k] += v * s;
                }
            });
        }
        g
    }
}

/// `int_Omega f phi_i dx` for every free node, Gauss-Legendre per element.
pub fn load_vector(mesh: &Mesh1D, f: &dyn Fn(f64) -> f64) -> Vec<f64> {
    let rule = GaussRule::legendre(LOAD_ORDER).expect("fixed order");
    let free = mesh.free_nodes();
    let mut b = vec![0.0; free.len()];
    for e in mesh.omega_elements() {
        let (l, r) = mesh.element(e);
        for (x, w) in rule.mapped(l, r) {
            let lam = (x - l) / (r - l);
            let fx = w * f(x);
            for (node, phi) in [(e, 1.0 - lam), (e + 1, lam)] {
                if free.contains(&node) {
                    b[node - free.start] += fx * phi;
                }
            }
        }
    }
    b
}

/// Stiffness over all nodes plus the load on the free nodes.
#[derive(Debug, Clone)]
pub struct NonlocalSystem {
    mesh: Mesh1D,
    kernel: KernelSpec,
    stiffness: SymMatrix,
    load: Vec<f64>,
}

impl NonlocalSystem {
    pub fn new(mesh: Mesh1D, kernel: KernelSpec, stiffness: SymMatrix, load: Vec<f64>) -> Result<Self> {
        if stiffness.dim() != mesh.node_count() || load.len() != mesh.free_nodes().len() {
            return Err(Error::InvalidArgument(format!(
                "system sizes do not match the mesh: matrix {}, load {}",
                stiffness.dim(),
                load.len()
            )));
        }
        Ok(Self {
            mesh,
            kernel,
            stiffness,
            load,
        })
    }

    pub fn mesh(&self) -> &Mesh1D {
        &self.mesh
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn stiffness(&self) -> &SymMatrix {
        &self.stiffness
    }

    pub fn load(&self) -> &[f64] {
        &self.load
    }

    /// Pins `u = g` at every constraint node and moves the coupling to the
    /// right-hand side.
    pub fn apply_volume_constraint(&self, g: &dyn Fn(f64) -> f64) -> ReducedSystem {
        let free = self.mesh.free_nodes();
        let pinned: Vec<f64> = (0..self.mesh.node_count())
            .map(|i| if free.contains(&i) { 0.0 } else { g(self.mesh.node(i)) })
            .collect();
        let coupling = self.stiffness.matvec(&pinned);
        let rhs = self
            .load
            .iter()
            .zip(&coupling[free.clone()])
            .map(|(b, c)| b - c)
            .collect();
        ReducedSystem {
            mesh: self.mesh.clone(),
            matrix: self.stiffness.sub_block(free),
            rhs,
            pinned,
        }
    }
}

/// Free-node matrix and right-hand side after the volume constraint.
#[derive(Debug, Clone)]
pub struct ReducedSystem {
    mesh: Mesh1D,
    matrix: SymMatrix,
    rhs: Vec<f64>,
    pinned: Vec<f64>,
}

impl ReducedSystem {
    pub fn matrix(&self) -> &SymMatrix {
        &self.matrix
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    /// Constraint values on pinned nodes, zero on free nodes.
    pub fn pinned(&self) -> &[f64] {
        &self.pinned
    }

    pub fn solve(&self) -> Result<StateField> {
        let x = self.matrix.cholesky()?.solve(&self.rhs);
        let mut values = self.pinned.clone();
        let start = self.mesh.free_nodes().start;
        values[start..start + x.len()].copy_from_slice(&x);
        StateField::new(self.mesh.clone(), values)
    }
}

/// Relative tolerance of the doubled-order self-check.
pub fn self_check_tolerance(_kernel: &KernelSpec) -> f64 {
    1e-8
}

/// Assembles stiffness and load for `theta`.
pub fn assemble_system(
    theta: &dyn MidpointFunction,
    kernel: KernelSpec,
    mesh: &Mesh1D,
    f: &dyn Fn(f64) -> f64,
    order: QuadratureOrder,
) -> Result<NonlocalSystem> {
    let op = NonlocalOperator::new(mesh.clone(), kernel, order, &theta.breakpoints())?;
    let a = op.stiffness(theta)?;
    NonlocalSystem::new(mesh.clone(), kernel, a, load_vector(mesh, f))
}

/// Doublings tried by [`consistent_stiffness`] before giving up.
pub const MAX_DOUBLINGS: usize = 3;

/// Stiffness at the lowest order, starting from `order`, that agrees with
/// the next doubled order to [`self_check_tolerance`] relative to
/// `sqrt(|A_ii A_jj|)`. Returns that order and its matrix; fails after
/// [`MAX_DOUBLINGS`] doublings.
pub fn consistent_stiffness(
    theta: &dyn MidpointFunction,
    kernel: KernelSpec,
    mesh: &Mesh1D,
    order: QuadratureOrder,
) -> Result<(QuadratureOrder, SymMatrix)> {
    let kinks = theta.breakpoints();
    let build = |o| NonlocalOperator::new(mesh.clone(), kernel, o, &kinks)?.stiffness(theta);
    let tol = self_check_tolerance(&kernel);
    let mut current = (order, build(order)?);
    let mut last = (f64::INFINITY, 0, 0);
    for _ in 0..MAX_DOUBLINGS {
        let next = current.0.doubled();
        let fine = build(next)?;
        last = max_relative_change(&current.1, &fine);
        if last.0 <= tol {
            return Ok(current);
        }
        current = (next, fine);
    }
    Err(Error::QuadratureInconsistent {
        row: last.1,
        col: last.2,
        rel_change: last.0,
    })
}

/// Like [`assemble_system`] at the order chosen by [`consistent_stiffness`].
pub fn assemble_system_verified(
    theta: &dyn MidpointFunction,
    kernel: KernelSpec,
    mesh: &Mesh1D,
    f: &dyn Fn(f64) -> f64,
    order: QuadratureOrder,
) -> Result<(QuadratureOrder, NonlocalSystem)> {
    let (used, a) = consistent_stiffness(theta, kernel, mesh, order)?;
    Ok((used, NonlocalSystem::new(mesh.clone(), kernel, a, load_vector(mesh, f))?))
}

/// Largest `|A_ij - B_ij| / sqrt(|B_ii B_jj|)` and where it occurs.
pub fn max_relative_change(a: &SymMatrix, b: &SymMatrix) -> (f64, usize, usize) {
    let n = a.dim();
    let bw = a.bandwidth().max(b.bandwidth());
    let mut worst = (0.0, 0, 0);
    for i in 0..n {
        for j in i.saturating_sub(bw)..=i {
            let scale = math::sqrt(math::abs(b.get(i, i) * b.get(j, j)));
            if scale == 0.0 {
                continue;
            }
            let rel = math::abs(a.get(i, j) - b.get(i, j)) / scale;
            if rel > worst.0 {
                worst = (rel, i, j);
            }
        }
    }
    worst
}

/// A single stiffness entry `B(theta; phi_j, phi_i)`.
pub fn bilinear_entry(
    theta: &dyn MidpointFunction,
    kernel: KernelSpec,
    mesh: &Mesh1D,
    i: usize,
    j: usize,
    order: QuadratureOrder,
) -> Result<f64> {
    let n = mesh.node_count();
    if i >= n || j >= n {
        return Err(Error::InvalidArgument(format!("node index out of range ({i}, {j}) for {n} nodes")));
    }
    let op = NonlocalOperator::new(mesh.clone(), kernel, order, &theta.breakpoints())?;
    let mut acc = 0.0;
    for idx in 0..op.pairs().len() {
        let (nodes, len) = op.pairs()[idx].local_nodes();
        let (Some(a), Some(b)) = (
            nodes[..len].iter().position(|&x| x == i),
            nodes[..len].iter().position(|&x| x == j),
        ) else {
            continue;
        };
        op.for_each_point(idx, |z, weight, d| acc += weight * theta.value(z) * d[a] * d[b]);
    }
    Ok(acc)
}

/// `|||v||| = sqrt(v^T A v)` with `A` assembled for `theta = 1`.
pub fn energy_norm(unit_system: &NonlocalSystem, v: &[f64]) -> Result<f64> {
    let a = unit_system.stiffness();
    if v.len() != a.dim() {
        return Err(Error::InvalidArgument(format!("vector of length {} for {} nodes", v.len(), a.dim())));
    }
    let q = a.quad_form(v);
    let scale = a.max_abs() * v.iter().map(|x| x * x).sum::<f64>();
    if q < -1e-12 * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::IndefiniteForm(q));
    }
    Ok(math::sqrt(q.max(0.0)))
}

/// `int int psi((x + y) / 2) gamma (u(y) - u(x)) (w(y) - w(x)) dy dx`.
pub fn gradient_pairing(
    psi: &dyn MidpointFunction,
    kernel: KernelSpec,
    u: &StateField,
    w: &StateField,
    order: QuadratureOrder,
) -> Result<f64> {
    if u.mesh() != w.mesh() {
        return Err(Error::InvalidArgument("state and adjoint live on different meshes".into()));
    }
    let op = NonlocalOperator::new(u.mesh().clone(), kernel, order, &psi.breakpoints())?;
    Ok(op.bilinear(psi, u.values(), w.values()))
}

/// Integration region of a double integral.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Region {
    /// `(Omega u Omega_I)^2`.
    #[default]
    Full,
    /// `Omega x Omega`.
    Omega,
}

/// `e*_theta = int int |theta_ref - theta_m| gamma (u*(y) - u*(x))^2 dy dx`
/// over `region`, on the mesh of `u_star`.
pub fn weighted_theta_error(
    theta_ref: &dyn MidpointFunction,
    theta_m: &dyn MidpointFunction,
    kernel: KernelSpec,
    u_star: &StateField,
    order: QuadratureOrder,
    region: Region,
) -> Result<f64> {
    let mut kinks = theta_ref.breakpoints();
    kinks.extend(theta_m.breakpoints());
    let op = NonlocalOperator::new(u_star.mesh().clone(), kernel, order, &kinks)?;
    let diff = |z: f64| math::abs(theta_ref.value(z) - theta_m.value(z));
    let omega = u_star.mesh().omega_elements();
    let u = u_star.values();
    Ok(match region {
        Region::Full => op.bilinear(&diff, u, u),
        Region::Omega => op.bilinear_where(&diff, u, u, |p| omega.contains(&p.left) && omega.contains(&p.right)),
    })
}
