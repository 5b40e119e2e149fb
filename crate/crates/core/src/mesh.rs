//! Partitions of `Omega ∪ Omega_I = (a - eps, b + eps)`.
//!
//! The same type carries the state grid and the parameter grid. Nodes are
//! numbered left to right over the whole interval; the first
//! `constraint_elem_count_per_side` elements cover `(a - eps, a)`, the next
//! `interior_elem_count` cover `Omega = (a, b)`, the rest cover `(b, b + eps)`.

use alloc::format;
use alloc::vec::Vec;
use core::ops::Range;

use crate::error::{Error, Result};
use crate::math;

/// Relative tolerance for deciding whether `eps` is a multiple of `h`.
const ALIGN_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh1D {
    a: f64,
    b: f64,
    eps: f64,
    nodes: Vec<f64>,
    interior_elem_count: usize,
    constraint_elem_count_per_side: usize,
}

impl Mesh1D {
    /// Uniform split of `(a, b)` into `n_interior` elements. Each side of the
    /// interaction layer gets `eps / h` elements of width `h` when `eps` is a
    /// multiple of `h`, otherwise one element of width `eps`.
    pub fn uniform(a: f64, b: f64, eps: f64, n_interior: usize) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && b > a) {
            return Err(Error::InvalidGeometry(format!("need a < b, got a = {a}, b = {b}")));
        }
        if !(eps.is_finite() && eps >= 0.0) {
            return Err(Error::InvalidGeometry(format!("negative or non-finite eps = {eps}")));
        }
        if n_interior < 2 {
            return Err(Error::InvalidGeometry(format!(
                "need at least 2 interior elements, got {n_interior}"
            )));
        }
        let h = (b - a) / n_interior as f64;
        let side = if eps == 0.0 {
            0
        } else {
            let ratio = eps / h;
            let k = math::round(ratio);
            if ratio >= 1.0 - ALIGN_TOL && math::abs(ratio - k) <= ALIGN_TOL * ratio {
                k as usize
            } else {
                1
            }
        };

        let mut nodes = Vec::with_capacity(n_interior + 2 * side + 1);
        if side > 0 {
            nodes.push(a - eps);
            let w = eps / side as f64;
            for i in 1..side {
                nodes.push(a - (side - i) as f64 * w);
            }
        }
        for i in 0..n_interior {
            nodes.push(a + i as f64 * h);
        }
        nodes.push(b);
        if side > 0 {
            let w = eps / side as f64;
            for i in 1..side {
                nodes.push(b + i as f64 * w);
            }
            nodes.push(b + eps);
        }

        Ok(Self {
            a,
            b,
            eps,
            nodes,
            interior_elem_count: n_interior,
            constraint_elem_count_per_side: side,
        })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> f64 {
        self.nodes[i]
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn element_count(&self) -> usize {
        self.nodes.len() - 1
    }

    /// Number of elements inside `Omega` (J).
    pub fn interior_elem_count(&self) -> usize {
        self.interior_elem_count
    }

    /// Number of elements on each side of `Omega_I` (K).
    pub fn constraint_elem_count_per_side(&self) -> usize {
        self.constraint_elem_count_per_side
    }

    /// End points of element `e`.
    #[inline]
    pub fn element(&self, e: usize) -> (f64, f64) {
        (self.nodes[e], self.nodes[e + 1])
    }

    #[inline]
    pub fn width(&self, e: usize) -> f64 {
        self.nodes[e + 1] - self.nodes[e]
    }

    /// `(a - eps, b + eps)` as a pair.
    pub fn domain(&self) -> (f64, f64) {
        (self.nodes[0], self.nodes[self.nodes.len() - 1])
    }

    /// Node index of `x = a`.
    pub fn a_index(&self) -> usize {
        self.constraint_elem_count_per_side
    }

    /// Node index of `x = b`.
    pub fn b_index(&self) -> usize {
        self.constraint_elem_count_per_side + self.interior_elem_count
    }

    /// Elements covering `Omega`.
    pub fn omega_elements(&self) -> Range<usize> {
        self.a_index()..self.b_index()
    }

    /// Nodes strictly inside `Omega`; these carry the unknowns. Nodes on the
    /// closure of `Omega_I` (including `a` and `b`) are pinned.
    pub fn free_nodes(&self) -> Range<usize> {
        self.a_index() + 1..self.b_index()
    }

    pub fn is_constraint_node(&self, i: usize) -> bool {
        !self.free_nodes().contains(&i)
    }

    /// Largest element width (h).
    pub fn h_max(&self) -> f64 {
        (0..self.element_count()).map(|e| self.width(e)).fold(0.0, f64::max)
    }

    pub fn h_min(&self) -> f64 {
        (0..self.element_count())
            .map(|e| self.width(e))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn quasi_uniformity_ratio(&self) -> f64 {
        self.h_max() / self.h_min()
    }

    /// Index of the element containing `x`. Shared nodes belong to the
    /// element on their left, except the global left end.
    pub fn locate(&self, x: f64) -> Result<usize> {
        let (lo, hi) = self.domain();
        if !(x >= lo && x <= hi) {
            return Err(Error::OutOfDomain { x, lo, hi });
        }
        Ok(self.locate_unchecked(x))
    }

    #[inline]
    pub(crate) fn locate_unchecked(&self, x: f64) -> usize {
        let idx = self.nodes.partition_point(|&n| n < x);
        idx.saturating_sub(1).min(self.element_count() - 1)
    }

    /// Nodes strictly inside `(a, b)`, in increasing order. These are the
    /// only places where a parameter field on this mesh may have a kink.
    pub fn interior_nodes(&self) -> &[f64] {
        &self.nodes[self.free_nodes()]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eps_equal_to_h_gives_one_element_per_side() {
        let m = Mesh1D::uniform(0.0, 1.0, 1.0 / 16.0, 16).unwrap();
        assert_eq!(m.element_count(), 18);
        assert_eq!(m.constraint_elem_count_per_side(), 1);
        assert_eq!(m.width(0), 1.0 / 16.0);
        assert_eq!(m.width(17), 1.0 / 16.0);
    }

    #[test]
    fn small_eps_gives_single_narrow_element() {
        let eps = 2f64.powi(-9);
        let m = Mesh1D::uniform(0.0, 1.0, eps, 16).unwrap();
        assert_eq!(m.element_count(), 18);
        assert_eq!(m.width(0), eps);
        assert_eq!(m.width(17), eps);
        assert_eq!(m.width(1), 1.0 / 16.0);
    }

    #[test]
    fn symmetric_domain_with_eps_below_h() {
        let m = Mesh1D::uniform(-1.0, 1.0, 1.0 / 16.0, 16).unwrap();
        assert_eq!(m.width(5), 1.0 / 8.0);
        assert_eq!(m.constraint_elem_count_per_side(), 1);
        assert_eq!(m.width(0), 1.0 / 16.0);
        assert_eq!(m.domain(), (-1.0 - 1.0 / 16.0, 1.0 + 1.0 / 16.0));
    }

    #[test]
    fn aligned_multiple_eps_splits_layer() {
        let m = Mesh1D::uniform(0.0, 1.0, 0.25, 16).unwrap();
        assert_eq!(m.constraint_elem_count_per_side(), 4);
        assert_eq!(m.element_count(), 24);
        assert_eq!(m.node(m.a_index()), 0.0);
        assert_eq!(m.node(m.b_index()), 1.0);
        assert!(m.quasi_uniformity_ratio() <= 8.0);
    }

    #[test]
    fn rejects_bad_geometry() {
        assert!(Mesh1D::uniform(1.0, 0.0, 0.1, 4).is_err());
        assert!(Mesh1D::uniform(0.0, 1.0, -0.1, 4).is_err());
        assert!(Mesh1D::uniform(0.0, 1.0, 0.1, 1).is_err());
    }

    #[test]
    fn locate_examples() {
        let m = Mesh1D::uniform(0.0, 1.0, 0.0, 4).unwrap();
        assert_eq!(m.locate(0.3).unwrap(), 1);
        assert_eq!(m.locate(0.25).unwrap(), 0);
        assert_eq!(m.locate(0.0).unwrap(), 0);
        assert_eq!(m.locate(1.0).unwrap(), 3);
        assert!(m.locate(1.1).is_err());
        assert!(m.locate(-0.1).is_err());
    }

    #[test]
    fn free_nodes_exclude_a_and_b() {
        let m = Mesh1D::uniform(0.0, 1.0, 0.25, 4).unwrap();
        assert_eq!(m.a_index(), 1);
        assert_eq!(m.b_index(), 5);
        assert_eq!(m.free_nodes(), 2..5);
        assert!(m.is_constraint_node(1));
        assert!(!m.is_constraint_node(2));
    }
}
