//! Global finite element spaces: DOF maps, orientation signs, boundary
//! masks, and the Piola transform.
//!
//! Scalar Lagrange DOFs are numbered vertices first, then one block of
//! `p - 1` nodes per mesh edge walked in the global edge direction (lower
//! to higher vertex index), then cell interiors. Vector DOFs are one block
//! of normal moments per edge, then cell interiors.
//!
//! The vector elements transform contravariantly,
//!
//! ```text
//! phi(F(x)) = (1/det F') F' phihat(x),    div phi = (1/det F') divhat phihat,
//! ```
//!
//! which preserves edge fluxes: `phi . n |e| = phihat . nhat |ehat|`. A
//! shared edge therefore carries one set of flux moments, and an element
//! whose local edge runs against the global direction flips the sign of
//! its moment-`m` coefficient by `(-1)^(m+1)` (odd Legendre factors absorb
//! one sign under the parameter reversal).

use crate::error::{FoslsError, Result};
use crate::geometry::{ElementMap, Mesh};
use crate::hdiv::{edge_dof_sign, Family, VectorBasis};
use crate::lagrange::LagrangeBasis;
use crate::point::Point2;

/// Contravariant Piola push-forward of a reference vector value and its
/// reference divergence at reference point `r`.
pub fn piola_push_forward(
    map: &ElementMap,
    r: Point2,
    value: Point2,
    divergence: f64,
) -> Result<(Point2, f64)> {
    let jac = map.jacobian(r);
    let det = jac.det();
    if !(det > 0.0) {
        return Err(FoslsError::InvalidMesh(format!(
            "non-positive Jacobian {det} at ({}, {})",
            r.x, r.y
        )));
    }
    Ok((jac.apply(value) * (1.0 / det), divergence / det))
}

/// Covariant push-forward of a reference gradient: `grad u = F'^{-T} gradhat`.
pub fn gradient_push_forward(map: &ElementMap, r: Point2, grad: Point2) -> Point2 {
    map.jacobian(r).inverse().transpose().apply(grad)
}

/// Continuous Lagrange space of degree `p_s` on a mesh, optionally with a
/// zero trace on the boundary.
#[derive(Debug)]
pub struct ScalarSpace {
    basis: LagrangeBasis,
    zero_trace: bool,
    /// Local basis index -> global DOF, per triangle.
    cell_dofs: Vec<Vec<usize>>,
    boundary: Vec<bool>,
}

impl ScalarSpace {
    pub fn new(mesh: &Mesh, degree: usize, zero_trace: bool) -> Result<ScalarSpace> {
        let basis = LagrangeBasis::new(degree)?;
        let p = degree;
        let nv = mesh.num_vertices();
        let ne = mesh.num_edges();
        let per_edge = p - 1;
        let n_int = basis.num_interior_nodes();

        let mut cell_dofs = Vec::with_capacity(mesh.num_triangles());
        for k in 0..mesh.num_triangles() {
            let tri = mesh.triangle(k);
            let mut local = vec![0usize; basis.num_nodes()];
            for v in 0..3 {
                local[basis.vertex_node(v)] = tri[v];
            }
            for i in 0..3 {
                let (e, same) = mesh.triangle_edge(k, i);
                for (m, &node) in basis.edge_nodes(i).iter().enumerate() {
                    let slot = if same { m } else { per_edge - 1 - m };
                    local[node] = nv + e * per_edge + slot;
                }
            }
            for (j, node) in basis.interior_nodes().enumerate() {
                local[node] = nv + ne * per_edge + k * n_int + j;
            }
            cell_dofs.push(local);
        }

        let num_dofs = nv + ne * per_edge + mesh.num_triangles() * n_int;
        let mut boundary = vec![false; num_dofs];
        for v in 0..nv {
            boundary[v] = mesh.is_boundary_vertex(v);
        }
        for (e, edge) in mesh.edges().iter().enumerate() {
            if edge.boundary {
                for slot in 0..per_edge {
                    boundary[nv + e * per_edge + slot] = true;
                }
            }
        }

        Ok(ScalarSpace { basis, zero_trace, cell_dofs, boundary })
    }

    pub fn basis(&self) -> &LagrangeBasis {
        &self.basis
    }

    pub fn zero_trace(&self) -> bool {
        self.zero_trace
    }

    pub fn degree(&self) -> usize {
        self.basis.degree()
    }

    pub fn num_dofs(&self) -> usize {
        self.boundary.len()
    }

    pub fn num_free(&self) -> usize {
        (0..self.num_dofs()).filter(|&g| !self.is_constrained(g)).count()
    }

    pub fn is_boundary(&self, g: usize) -> bool {
        self.boundary[g]
    }

    pub fn is_constrained(&self, g: usize) -> bool {
        self.zero_trace && self.boundary[g]
    }

    pub fn cell_dofs(&self, k: usize) -> &[usize] {
        &self.cell_dofs[k]
    }

    /// Value and physical gradient of the global field `coeffs` at reference
    /// point `r` of cell `k`.
    pub fn value_on_cell(
        &self,
        mesh: &Mesh,
        k: usize,
        r: Point2,
        coeffs: &[f64],
    ) -> (f64, Point2) {
        let mut u = 0.0;
        let mut grad = Point2::new(0.0, 0.0);
        for (local, (v, g)) in self.basis.eval_with_grad(r).into_iter().enumerate() {
            let c = coeffs[self.cell_dofs[k][local]];
            u += c * v;
            grad = grad + g * c;
        }
        (u, gradient_push_forward(mesh.map(k), r, grad))
    }
}

/// H(div)-conforming RT/BDM space on a mesh, optionally with zero normal
/// trace on the boundary.
#[derive(Debug)]
pub struct VectorSpace {
    basis: VectorBasis,
    zero_normal_trace: bool,
    /// Local basis index -> (global DOF, orientation sign), per triangle.
    cell_dofs: Vec<Vec<(usize, f64)>>,
    boundary: Vec<bool>,
}

impl VectorSpace {
    pub fn new(
        mesh: &Mesh,
        family: Family,
        degree: usize,
        zero_normal_trace: bool,
    ) -> Result<VectorSpace> {
        let basis = VectorBasis::new(family, degree)?;
        let per_edge = basis.edge_dofs_per_edge();
        let n_int = basis.num_interior_dofs();
        let ne = mesh.num_edges();

        let mut cell_dofs = Vec::with_capacity(mesh.num_triangles());
        for k in 0..mesh.num_triangles() {
            let mut local = vec![(0usize, 0.0); basis.dim()];
            for i in 0..3 {
                let (e, same) = mesh.triangle_edge(k, i);
                for m in 0..per_edge {
                    local[basis.edge_dof(i, m)] =
                        (e * per_edge + m, edge_dof_sign(same, m));
                }
            }
            for j in 0..n_int {
                local[basis.interior_dof(j)] = (ne * per_edge + k * n_int + j, 1.0);
            }
            cell_dofs.push(local);
        }

        let num_dofs = ne * per_edge + mesh.num_triangles() * n_int;
        let mut boundary = vec![false; num_dofs];
        for (e, edge) in mesh.edges().iter().enumerate() {
            if edge.boundary {
                for m in 0..per_edge {
                    boundary[e * per_edge + m] = true;
                }
            }
        }

        Ok(VectorSpace { basis, zero_normal_trace, cell_dofs, boundary })
    }

    pub fn basis(&self) -> &VectorBasis {
        &self.basis
    }

    pub fn zero_normal_trace(&self) -> bool {
        self.zero_normal_trace
    }

    pub fn family(&self) -> Family {
        self.basis.family()
    }

    pub fn degree(&self) -> usize {
        self.basis.degree()
    }

    pub fn num_dofs(&self) -> usize {
        self.boundary.len()
    }

    pub fn num_free(&self) -> usize {
        (0..self.num_dofs()).filter(|&g| !self.is_constrained(g)).count()
    }

    pub fn is_boundary(&self, g: usize) -> bool {
        self.boundary[g]
    }

    pub fn is_constrained(&self, g: usize) -> bool {
        self.zero_normal_trace && self.boundary[g]
    }

    pub fn cell_dofs(&self, k: usize) -> &[(usize, f64)] {
        &self.cell_dofs[k]
    }

    /// Physical value and divergence of the global field `coeffs` at
    /// reference point `r` of cell `k`.
    pub fn value_on_cell(
        &self,
        mesh: &Mesh,
        k: usize,
        r: Point2,
        coeffs: &[f64],
    ) -> (Point2, f64) {
        let mut value = Point2::new(0.0, 0.0);
        let mut div = 0.0;
        for (local, (v, d)) in self.basis.eval(r).into_iter().enumerate() {
            let (g, sign) = self.cell_dofs[k][local];
            let c = coeffs[g] * sign;
            value = value + v * c;
            div += d * c;
        }
        let jac = mesh.map(k).jacobian(r);
        let det = jac.det();
        (jac.apply(value) * (1.0 / det), div / det)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{ref_edge_point, REF_EDGE};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn interior_edge_samples(mesh: &Mesh, e: usize) -> Vec<(usize, usize, bool)> {
        // (triangle, local edge, same-direction) for both incident cells
        let mut out = Vec::new();
        for t in mesh.edge(e).triangles.iter().flatten() {
            for i in 0..3 {
                let (ei, same) = mesh.triangle_edge(*t, i);
                if ei == e {
                    out.push((*t, i, same));
                }
            }
        }
        out
    }

    #[test]
    fn lagrange_cubic_count_matches_euler_formula() {
        let mesh = Mesh::disk(6, 1).unwrap();
        let space = ScalarSpace::new(&mesh, 3, false).unwrap();
        let expected =
            mesh.num_vertices() + 2 * mesh.num_edges() + mesh.num_triangles();
        assert_eq!(space.num_dofs(), expected);
        // every global DOF is referenced by some cell
        let mut seen = vec![false; space.num_dofs()];
        for k in 0..mesh.num_triangles() {
            for &g in space.cell_dofs(k) {
                seen[g] = true;
            }
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn rt_lowest_order_fan_has_one_dof_per_edge() {
        let mesh = Mesh::coarse_disk(4).unwrap();
        assert_eq!(mesh.num_edges(), 8);
        let free = VectorSpace::new(&mesh, Family::RaviartThomas, 1, false).unwrap();
        assert_eq!(free.num_dofs(), 8);
        assert_eq!(free.num_free(), 8);
        let constrained =
            VectorSpace::new(&mesh, Family::RaviartThomas, 1, true).unwrap();
        assert_eq!(constrained.num_free(), 4);
    }

    #[test]
    fn linear_lagrange_fan_leaves_center_free_under_zero_trace() {
        let mesh = Mesh::coarse_disk(4).unwrap();
        let space = ScalarSpace::new(&mesh, 1, true).unwrap();
        assert_eq!(space.num_dofs(), 5);
        assert_eq!(space.num_free(), 1);
        assert!(!space.is_constrained(0));
    }

    #[test]
    fn shared_scalar_nodes_coincide_physically() {
        let mesh = Mesh::disk(5, 1).unwrap();
        for p in [2usize, 4] {
            let space = ScalarSpace::new(&mesh, p, false).unwrap();
            let mut position: Vec<Option<Point2>> = vec![None; space.num_dofs()];
            for k in 0..mesh.num_triangles() {
                for (local, &g) in space.cell_dofs(k).iter().enumerate() {
                    let x = mesh
                        .map(k)
                        .eval(space.basis().nodes()[local])
                        .unwrap();
                    match position[g] {
                        None => position[g] = Some(x),
                        Some(prev) => assert!(
                            prev.dist(x) < 1e-12,
                            "p={p} dof {g}: {prev:?} vs {x:?}"
                        ),
                    }
                }
            }
        }
    }

    #[test]
    fn scalar_field_continuous_across_interior_edges() {
        let mesh = Mesh::disk(4, 1).unwrap();
        let space = ScalarSpace::new(&mesh, 4, false).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let coeffs: Vec<f64> =
            (0..space.num_dofs()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for e in 0..mesh.num_edges() {
            if mesh.edge(e).boundary {
                continue;
            }
            let sides = interior_edge_samples(&mesh, e);
            assert_eq!(sides.len(), 2);
            for s in 0..5 {
                let t = (s as f64 + 0.5) / 5.0;
                let vals: Vec<f64> = sides
                    .iter()
                    .map(|&(k, i, same)| {
                        let tl = if same { t } else { 1.0 - t };
                        let r = ref_edge_point(i, tl);
                        space.value_on_cell(&mesh, k, r, &coeffs).0
                    })
                    .collect();
                assert!(
                    (vals[0] - vals[1]).abs() < 1e-11,
                    "edge {e}: {} vs {}",
                    vals[0],
                    vals[1]
                );
            }
        }
    }

    #[test]
    fn normal_trace_continuous_across_interior_edges() {
        let mesh = Mesh::disk(4, 1).unwrap();
        for (family, p) in [
            (Family::RaviartThomas, 1),
            (Family::RaviartThomas, 3),
            (Family::BrezziDouglasMarini, 2),
        ] {
            let space = VectorSpace::new(&mesh, family, p, false).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(42);
            let coeffs: Vec<f64> =
                (0..space.num_dofs()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            for e in 0..mesh.num_edges() {
                let edge = mesh.edge(e);
                if edge.boundary {
                    continue;
                }
                let lo = mesh.vertex(edge.vertices[0]);
                let hi = mesh.vertex(edge.vertices[1]);
                let normal = {
                    let t = hi - lo;
                    t.rot_cw() * (1.0 / t.norm())
                };
                let sides = interior_edge_samples(&mesh, e);
                for s in 0..5 {
                    let t = (s as f64 + 0.5) / 5.0;
                    let fluxes: Vec<f64> = sides
                        .iter()
                        .map(|&(k, i, same)| {
                            let tl = if same { t } else { 1.0 - t };
                            let r = ref_edge_point(i, tl);
                            space.value_on_cell(&mesh, k, r, &coeffs).0.dot(normal)
                        })
                        .collect();
                    assert!(
                        (fluxes[0] - fluxes[1]).abs() < 1e-11,
                        "{} p={p} edge {e}: {} vs {}",
                        family.name(),
                        fluxes[0],
                        fluxes[1]
                    );
                }
            }
        }
    }

    #[test]
    fn zero_normal_trace_vanishes_on_the_curved_boundary() {
        let mesh = Mesh::disk(6, 1).unwrap();
        let space = VectorSpace::new(&mesh, Family::RaviartThomas, 2, true).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let coeffs: Vec<f64> = (0..space.num_dofs())
            .map(|g| if space.is_constrained(g) { 0.0 } else { rng.gen_range(-1.0..1.0) })
            .collect();
        let mut checked = 0;
        for k in 0..mesh.num_triangles() {
            for i in 0..3 {
                let (e, _) = mesh.triangle_edge(k, i);
                if !mesh.edge(e).boundary {
                    continue;
                }
                for s in 0..5 {
                    let r = ref_edge_point(i, (s as f64 + 0.5) / 5.0);
                    let (value, _) = space.value_on_cell(&mesh, k, r, &coeffs);
                    let x = mesh.map(k).eval(r).unwrap();
                    assert!((x.norm() - 1.0).abs() < 1e-12, "boundary edge off the arc");
                    let flux = value.dot(x);
                    assert!(flux.abs() < 1e-11, "cell {k} edge {e}: flux {flux}");
                    checked += 1;
                }
            }
        }
        assert_eq!(checked, 5 * mesh.num_boundary_edges());
    }

    #[test]
    fn piola_matches_hand_computed_affine_case() {
        // F(x) = 2x: jac = 2I, det = 4, so (1,0) maps to (0.5, 0)
        let map = ElementMap::Affine {
            origin: Point2::new(0.0, 0.0),
            jac: crate::point::Mat2::new(2.0, 0.0, 0.0, 2.0),
        };
        let (v, d) =
            piola_push_forward(&map, Point2::new(0.2, 0.3), Point2::new(1.0, 0.0), 2.0)
                .unwrap();
        assert!((v.x - 0.5).abs() < 1e-15 && v.y.abs() < 1e-15);
        assert!((d - 0.5).abs() < 1e-15);
    }

    #[test]
    fn piola_under_identity_map_is_identity() {
        let map = ElementMap::Affine {
            origin: Point2::new(0.0, 0.0),
            jac: crate::point::Mat2::new(1.0, 0.0, 0.0, 1.0),
        };
        let value = Point2::new(0.3, -0.7);
        let (v, d) = piola_push_forward(&map, Point2::new(0.25, 0.25), value, 1.5).unwrap();
        assert!((v.x - value.x).abs() < 1e-15 && (v.y - value.y).abs() < 1e-15);
        assert!((d - 1.5).abs() < 1e-15);
    }

    #[test]
    fn piola_divergence_matches_finite_differences_on_blended_cell() {
        let mesh = Mesh::disk(6, 1).unwrap();
        let k = (0..mesh.num_triangles())
            .find(|&k| mesh.map(k).is_curved())
            .expect("level-1 disk has rim cells");
        let basis = VectorBasis::new(Family::RaviartThomas, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        let coeffs: Vec<f64> = (0..basis.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let map = mesh.map(k);
        let field = |x: Point2| -> Point2 {
            let r = map.invert(x).expect("point inside cell");
            let mut vhat = Point2::new(0.0, 0.0);
            for (local, (v, _)) in basis.eval(r).into_iter().enumerate() {
                vhat = vhat + v * coeffs[local];
            }
            let jac = map.jacobian(r);
            jac.apply(vhat) * (1.0 / jac.det())
        };
        let points = [(0.25, 0.25), (0.5, 0.2), (0.2, 0.5), (0.4, 0.4), (0.3, 0.15)];
        for (rx, ry) in points {
            let r = Point2::new(rx, ry);
            let mut div_hat = 0.0;
            for (local, (_, d)) in basis.eval(r).into_iter().enumerate() {
                div_hat += d * coeffs[local];
            }
            let (_, div) = piola_push_forward(map, r, Point2::new(0.0, 0.0), div_hat).unwrap();
            let x = map.eval(r).unwrap();
            let h = 1e-6;
            let dx = (field(Point2::new(x.x + h, x.y)).x
                - field(Point2::new(x.x - h, x.y)).x)
                / (2.0 * h);
            let dy = (field(Point2::new(x.x, x.y + h)).y
                - field(Point2::new(x.x, x.y - h)).y)
                / (2.0 * h);
            let fd = dx + dy;
            assert!(
                (div - fd).abs() / div.abs().max(1.0) < 1e-5,
                "at {r:?}: analytic {div}, fd {fd}"
            );
        }
    }

    #[test]
    fn gradient_push_forward_matches_chain_rule() {
        // u(x) = x . a on the physical cell, uhat = u o F; check
        // F'^{-T} gradhat(uhat) recovers a on a curved cell.
        let mesh = Mesh::disk(6, 0).unwrap();
        let map = mesh.map(0);
        assert!(map.is_curved());
        let a = Point2::new(0.7, -0.4);
        let r = Point2::new(0.3, 0.4);
        let h = 1e-6;
        let uhat = |r: Point2| map.eval_unchecked(r).dot(a);
        let ghat = Point2::new(
            (uhat(Point2::new(r.x + h, r.y)) - uhat(Point2::new(r.x - h, r.y))) / (2.0 * h),
            (uhat(Point2::new(r.x, r.y + h)) - uhat(Point2::new(r.x, r.y - h))) / (2.0 * h),
        );
        let g = gradient_push_forward(map, r, ghat);
        assert!(g.dist(a) < 1e-8, "{g:?} vs {a:?}");
    }

    #[test]
    fn local_edges_follow_reference_vertices() {
        // REF_EDGE[i] runs between the local vertices opposite to i; the
        // DOF maps rely on that pairing.
        let verts = [Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), Point2::new(0.0, 1.0)];
        for (i, [a, b]) in REF_EDGE.iter().enumerate() {
            assert!(verts[(i + 1) % 3].dist(*a) < 1e-15);
            assert!(verts[(i + 2) % 3].dist(*b) < 1e-15);
        }
    }
}
