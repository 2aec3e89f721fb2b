//! Nodal Lagrange bases on the reference triangle.
//!
//! Nodes sit on the equispaced lattice (i/p, j/p). With barycentric
//! coordinates L0 = 1-x-y, L1 = x, L2 = y and a node multi-index
//! (a, b, c), a+b+c = p, the shape function is the closed product
//!
//! ```text
//! phi_abc = prod_{m<a} (p L0 - m)/(a-m)
//!         * prod_{m<b} (p L1 - m)/(b-m)
//!         * prod_{m<c} (p L2 - m)/(c-m)
//! ```
//!
//! which is 1 at its own node and 0 at every other lattice node, so no
//! Vandermonde solve is needed and partition of unity holds to rounding.
//!
//! Node ordering is entity-major: the three vertices first, then the
//! interior nodes of each local edge walked in that edge's local
//! direction, then cell-interior nodes. Global DOF maps rely on the edge
//! blocks being contiguous and direction-ordered.

use crate::error::{FoslsError, Result};
use crate::point::Point2;

/// Scalar degrees go one past the vector limit because the curl potential
/// of BDM_p lives in Lagrange_{p+1}.
pub const MAX_SCALAR_DEGREE: usize = 6;

#[derive(Debug, Clone)]
pub struct LagrangeBasis {
    degree: usize,
    multi: Vec<[usize; 3]>,
    nodes: Vec<Point2>,
    edge_nodes: [Vec<usize>; 3],
}

/// One barycentric factor of the product form: value and d/dL.
fn lattice_factor(p: f64, a: usize, lam: f64) -> (f64, f64) {
    let mut v = 1.0;
    let mut d = 0.0;
    for m in 0..a {
        let denom = (a - m) as f64;
        let c = (p * lam - m as f64) / denom;
        d = d * c + v * p / denom;
        v *= c;
    }
    (v, d)
}

impl LagrangeBasis {
    pub fn new(degree: usize) -> Result<Self> {
        if degree == 0 || degree > MAX_SCALAR_DEGREE {
            return Err(FoslsError::Degree(degree));
        }
        let p = degree;
        let mut multi: Vec<[usize; 3]> = vec![[p, 0, 0], [0, p, 0], [0, 0, p]];
        let mut edge_nodes: [Vec<usize>; 3] = Default::default();
        // edge interior nodes, walked from REF_EDGE[i][0] to REF_EDGE[i][1]
        for m in 1..p {
            edge_nodes[0].push(multi.len());
            multi.push([0, p - m, m]);
        }
        for m in 1..p {
            edge_nodes[1].push(multi.len());
            multi.push([m, 0, p - m]);
        }
        for m in 1..p {
            edge_nodes[2].push(multi.len());
            multi.push([p - m, m, 0]);
        }
        for a in 1..p {
            for b in 1..p - a {
                let c = p - a - b;
                if c >= 1 {
                    multi.push([a, b, c]);
                }
            }
        }
        let nodes = multi
            .iter()
            .map(|&[_, b, c]| Point2::new(b as f64 / p as f64, c as f64 / p as f64))
            .collect();
        Ok(LagrangeBasis { degree, multi, nodes, edge_nodes })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn num_nodes(&self) -> usize {
        self.multi.len()
    }

    pub fn nodes(&self) -> &[Point2] {
        &self.nodes
    }

    /// Local index of the node at local vertex v.
    pub fn vertex_node(&self, v: usize) -> usize {
        v
    }

    /// Local indices of the interior nodes of local edge e, ordered along
    /// the local edge direction.
    pub fn edge_nodes(&self, e: usize) -> &[usize] {
        &self.edge_nodes[e]
    }

    pub fn num_interior_nodes(&self) -> usize {
        self.num_nodes() - 3 * self.degree
    }

    /// Local indices of cell-interior nodes.
    pub fn interior_nodes(&self) -> std::ops::Range<usize> {
        3 * self.degree..self.num_nodes()
    }

    pub fn eval(&self, x: Point2) -> Vec<f64> {
        self.eval_with_grad(x).into_iter().map(|(v, _)| v).collect()
    }

    /// Values and reference gradients of all shape functions at x.
    pub fn eval_with_grad(&self, x: Point2) -> Vec<(f64, Point2)> {
        let p = self.degree as f64;
        let lam = [1.0 - x.x - x.y, x.x, x.y];
        self.multi
            .iter()
            .map(|&[a, b, c]| {
                let (v0, d0) = lattice_factor(p, a, lam[0]);
                let (v1, d1) = lattice_factor(p, b, lam[1]);
                let (v2, d2) = lattice_factor(p, c, lam[2]);
                let grad = Point2::new(
                    -d0 * v1 * v2 + v0 * d1 * v2,
                    -d0 * v1 * v2 + v0 * v1 * d2,
                );
                (v0 * v1 * v2, grad)
            })
            .collect()
    }
}
