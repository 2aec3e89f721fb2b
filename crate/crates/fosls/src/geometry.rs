//! Triangulations of the unit disk with exact curved boundary cells.
//!
//! The coarse mesh is a fan of `n_fan` triangles around the origin. Uniform
//! refinement splits every triangle into four by edge midpoints; midpoints
//! of boundary edges are pushed radially onto the circle, so the boundary
//! polyline never degrades. Each boundary ("rim") triangle carries a
//! transfinite map that interpolates the circular arc exactly:
//!
//! ```text
//! F(x, y) = P0 + (P1 - P0) x + (P2 - P0) y + (x + y) * (arc(t) - chord(t)),
//! t = y / (x + y),
//! ```
//!
//! where the arc spans the edge opposite the interior vertex P0. On the two
//! straight edges the correction vanishes, so neighboring affine elements
//! see plain affine edge parametrizations and the cells tile the disk with
//! no gaps or overlaps. For the coarse fan (P0 at the origin) the map
//! collapses to polar coordinates and its Jacobian determinant is the
//! constant arc angle.
//!
//! Interior edges are stored with ascending vertex indices; that global
//! orientation is what the degree-of-freedom maps later key their edge
//! directions off.

use crate::error::{FoslsError, Result};
use crate::point::{Mat2, Point2};
use crate::quadrature::QuadratureRule;
use std::collections::HashMap;

#[derive(Debug, Clone, Copy)]
struct Cx {
    re: f64,
    im: f64,
}

impl Cx {
    const ZERO: Cx = Cx { re: 0.0, im: 0.0 };
    const ONE: Cx = Cx { re: 1.0, im: 0.0 };

    fn mul(self, o: Cx) -> Cx {
        Cx {
            re: self.re * o.re - self.im * o.im,
            im: self.re * o.im + self.im * o.re,
        }
    }

    fn add(self, o: Cx) -> Cx {
        Cx {
            re: self.re + o.re,
            im: self.im + o.im,
        }
    }

    fn scale(self, s: f64) -> Cx {
        Cx {
            re: self.re * s,
            im: self.im * s,
        }
    }
}

/// First divided difference of E(z) = (e^z - 1)/z between a and b, and its
/// derivative in a. E is entire, so the series
/// `sum_k (a^k - b^k) / ((a - b) (k+1)!)` converges fast for the small
/// imaginary arguments used here (|a|, |b| <= 2*pi/3).
fn exp_ratio_dd(a: Cx, b: Cx) -> (Cx, Cx) {
    // s_k = (a^k - b^k)/(a - b), t_k = ds_k/da, with
    // s_{k+1} = a s_k + b^k and t_{k+1} = s_k + a t_k
    let mut s = Cx::ONE;
    let mut t = Cx::ZERO;
    let mut bpow = b;
    let mut fact = 2.0; // (k+1)! for k = 1
    let mut sum = s.scale(1.0 / fact);
    let mut dsum = Cx::ZERO;
    for k in 1..=32 {
        let t_next = s.add(a.mul(t));
        let s_next = a.mul(s).add(bpow);
        fact *= (k + 2) as f64;
        sum = sum.add(s_next.scale(1.0 / fact));
        dsum = dsum.add(t_next.scale(1.0 / fact));
        s = s_next;
        t = t_next;
        bpow = bpow.mul(b);
    }
    (sum, dsum)
}

/// How far coordinates may sit outside the closed reference triangle
/// before evaluation refuses them.
pub const REFERENCE_TOL: f64 = 1e-12;

/// An undirected mesh edge; `vertices` is sorted ascending.
#[derive(Debug, Clone)]
pub struct Edge {
    pub vertices: [usize; 2],
    /// Incident triangles; boundary edges have one.
    pub triangles: [Option<usize>; 2],
    pub boundary: bool,
}

/// Map from the reference triangle {(0,0),(1,0),(0,1)} to a physical cell.
#[derive(Debug, Clone)]
pub enum ElementMap {
    Affine {
        origin: Point2,
        jac: Mat2,
    },
    /// Rim cell: the edge opposite local vertex 0 follows the unit circle
    /// from angle `theta0` (at local vertex 1) over `dtheta` (to vertex 2).
    Blended {
        p: [Point2; 3],
        theta0: f64,
        dtheta: f64,
    },
}

impl ElementMap {
    pub fn is_curved(&self) -> bool {
        matches!(self, ElementMap::Blended { .. })
    }

    /// Blend coefficient of a rim cell and its t-derivative.
    ///
    /// The map is `F = affine + x*y*R(y)` with `R(t)` chosen so that the
    /// reference edge x + y = 1 lands exactly on the circular arc:
    ///
    /// ```text
    /// R(t) = (arc(t) - chord(t)) / (t (1 - t))
    ///      = e^(i theta0) dtheta^2 E[i dtheta t, i dtheta],
    /// ```
    ///
    /// where E[a, b] is the divided difference of the entire function
    /// (e^z - 1)/z. Writing it that way removes the 0/0 at the edge
    /// endpoints, so R is analytic on all of [0, 1] and Gauss quadrature
    /// of anything built from this map converges at its usual spectral
    /// rate. A naive transfinite blend (interpolating along rays through
    /// the interior vertex) is only continuous there, which caps the
    /// quadrature accuracy near 1e-4 regardless of rule degree.
    fn arc_blend(theta0: f64, dtheta: f64, t: f64) -> (Point2, Point2) {
        let a = Cx { re: 0.0, im: dtheta * t };
        let b = Cx { re: 0.0, im: dtheta };
        let (e, de) = exp_ratio_dd(a, b);
        let rot = Cx { re: theta0.cos(), im: theta0.sin() };
        let r = rot.mul(e).scale(dtheta * dtheta);
        // d/dt gives a factor da/dt = i dtheta
        let rp = rot.mul(b.mul(de)).scale(dtheta * dtheta);
        (Point2::new(r.re, r.im), Point2::new(rp.re, rp.im))
    }

    pub fn eval(&self, r: Point2) -> Result<Point2> {
        if r.x < -REFERENCE_TOL || r.y < -REFERENCE_TOL || r.x + r.y > 1.0 + REFERENCE_TOL {
            return Err(FoslsError::OutsideReference(r.x, r.y));
        }
        Ok(self.eval_unchecked(r))
    }

    pub fn eval_unchecked(&self, r: Point2) -> Point2 {
        match *self {
            ElementMap::Affine { origin, jac } => origin + jac.apply(r),
            ElementMap::Blended { p, theta0, dtheta } => {
                let (blend, _) = Self::arc_blend(theta0, dtheta, r.y);
                p[0] + (p[1] - p[0]) * r.x + (p[2] - p[0]) * r.y + blend * (r.x * r.y)
            }
        }
    }

    /// Jacobian of the map; analytic on the closed reference cell.
    pub fn jacobian(&self, r: Point2) -> Mat2 {
        match *self {
            ElementMap::Affine { jac, .. } => jac,
            ElementMap::Blended { p, theta0, dtheta } => {
                let (blend, blend_dt) = Self::arc_blend(theta0, dtheta, r.y);
                let col0 = (p[1] - p[0]) + blend * r.y;
                let col1 = (p[2] - p[0]) + blend * r.x + blend_dt * (r.x * r.y);
                Mat2::from_cols(col0, col1)
            }
        }
    }

    /// Newton inversion; `None` when the point is not in this cell.
    pub fn invert(&self, x: Point2) -> Option<Point2> {
        let mut r = Point2::new(1.0 / 3.0, 1.0 / 3.0);
        if let ElementMap::Affine { origin, jac } = *self {
            r = jac.inverse().apply(x - origin);
        } else {
            for _ in 0..40 {
                let res = x - self.eval_unchecked(r);
                if res.norm() < 1e-14 {
                    break;
                }
                let step = self.jacobian(r).inverse().apply(res);
                // keep Newton from wandering to a far-away root of the
                // extended blend
                r = Point2::new(
                    (r.x + step.x).clamp(-0.5, 1.5),
                    (r.y + step.y).clamp(-0.5, 1.5),
                );
            }
            if (x - self.eval_unchecked(r)).norm() > 1e-10 {
                return None;
            }
        }
        let inside = r.x >= -1e-10 && r.y >= -1e-10 && r.x + r.y <= 1.0 + 1e-10;
        inside.then_some(r)
    }

    /// The affine map through the cell vertices, used for the shape checks.
    fn vertex_jacobian(&self) -> Mat2 {
        match *self {
            ElementMap::Affine { jac, .. } => jac,
            ElementMap::Blended { p, .. } => Mat2::from_cols(p[1] - p[0], p[2] - p[0]),
        }
    }
}

/// Reference-edge endpoints; local edge i is opposite local vertex i and
/// runs counterclockwise around the cell.
pub const REF_EDGE: [[Point2; 2]; 3] = [
    [Point2::new(1.0, 0.0), Point2::new(0.0, 1.0)],
    [Point2::new(0.0, 1.0), Point2::new(0.0, 0.0)],
    [Point2::new(0.0, 0.0), Point2::new(1.0, 0.0)],
];

/// Parametrize local edge `i` of the reference triangle by t in [0, 1].
pub fn ref_edge_point(i: usize, t: f64) -> Point2 {
    let [a, b] = REF_EDGE[i];
    a + (b - a) * t
}

#[derive(Debug, Clone)]
pub struct Mesh {
    n_fan: usize,
    level: usize,
    vertices: Vec<Point2>,
    triangles: Vec<[usize; 3]>,
    edges: Vec<Edge>,
    /// `(edge id, local direction equals global ascending direction)` for
    /// each local edge of each triangle.
    triangle_edges: Vec<[(usize, bool); 3]>,
    maps: Vec<ElementMap>,
}

impl Mesh {
    /// Fan of `n_fan >= 3` triangles around the origin; every cell of the
    /// coarse mesh touches the boundary and carries the arc-blended map.
    pub fn coarse_disk(n_fan: usize) -> Result<Mesh> {
        if n_fan < 3 {
            return Err(FoslsError::InvalidMesh(format!(
                "fan needs at least 3 triangles, got {n_fan}"
            )));
        }
        let mut vertices = vec![Point2::new(0.0, 0.0)];
        for k in 0..n_fan {
            let th = 2.0 * std::f64::consts::PI * k as f64 / n_fan as f64;
            vertices.push(Point2::new(th.cos(), th.sin()));
        }
        let triangles: Vec<[usize; 3]> = (0..n_fan)
            .map(|k| [0, 1 + k, 1 + (k + 1) % n_fan])
            .collect();
        Self::assemble(n_fan, 0, vertices, triangles)
    }

    /// One level of uniform red refinement. Midpoints of boundary edges are
    /// projected radially onto the unit circle.
    pub fn refined(&self) -> Mesh {
        let mut vertices = self.vertices.clone();
        let mut midpoint = vec![0usize; self.edges.len()];
        for (e, edge) in self.edges.iter().enumerate() {
            let [a, b] = edge.vertices;
            let mut m = (self.vertices[a] + self.vertices[b]) * 0.5;
            if edge.boundary {
                let n = m.norm();
                assert!(n > 0.0, "degenerate boundary edge");
                m = m * (1.0 / n);
            }
            midpoint[e] = vertices.len();
            vertices.push(m);
        }
        let mut triangles = Vec::with_capacity(4 * self.triangles.len());
        for (k, &[a, b, c]) in self.triangles.iter().enumerate() {
            let mab = midpoint[self.triangle_edges[k][2].0];
            let mbc = midpoint[self.triangle_edges[k][0].0];
            let mca = midpoint[self.triangle_edges[k][1].0];
            triangles.push([a, mab, mca]);
            triangles.push([b, mbc, mab]);
            triangles.push([c, mca, mbc]);
            triangles.push([mab, mbc, mca]);
        }
        Self::assemble(self.n_fan, self.level + 1, vertices, triangles)
            .expect("refinement of a valid mesh is valid")
    }

    /// Coarse mesh refined `level` times.
    pub fn disk(n_fan: usize, level: usize) -> Result<Mesh> {
        let mut mesh = Self::coarse_disk(n_fan)?;
        for _ in 0..level {
            mesh = mesh.refined();
        }
        Ok(mesh)
    }

    fn assemble(
        n_fan: usize,
        level: usize,
        vertices: Vec<Point2>,
        mut triangles: Vec<[usize; 3]>,
    ) -> Result<Mesh> {
        // count edge incidences to find the boundary
        let mut edge_ids: HashMap<(usize, usize), usize> = HashMap::new();
        let mut edges: Vec<Edge> = Vec::new();
        let mut tri_of_edge: Vec<Vec<usize>> = Vec::new();
        let key = |a: usize, b: usize| (a.min(b), a.max(b));
        for (k, t) in triangles.iter().enumerate() {
            for i in 0..3 {
                let (a, b) = (t[(i + 1) % 3], t[(i + 2) % 3]);
                let id = *edge_ids.entry(key(a, b)).or_insert_with(|| {
                    edges.push(Edge {
                        vertices: [a.min(b), a.max(b)],
                        triangles: [None, None],
                        boundary: false,
                    });
                    tri_of_edge.push(Vec::new());
                    edges.len() - 1
                });
                tri_of_edge[id].push(k);
            }
        }
        for (edge, tris) in edges.iter_mut().zip(&tri_of_edge) {
            match tris.len() {
                1 => {
                    edge.boundary = true;
                    edge.triangles = [Some(tris[0]), None];
                }
                2 => edge.triangles = [Some(tris[0]), Some(tris[1])],
                n => {
                    return Err(FoslsError::InvalidMesh(format!(
                        "edge {:?} has {n} incident triangles",
                        edge.vertices
                    )))
                }
            }
        }

        // rotate rim triangles so their boundary edge is opposite local
        // vertex 0, where the blended map expects it
        let boundary_key: std::collections::HashSet<(usize, usize)> = edges
            .iter()
            .filter(|e| e.boundary)
            .map(|e| (e.vertices[0], e.vertices[1]))
            .collect();
        for t in triangles.iter_mut() {
            let on_boundary: Vec<usize> = (0..3)
                .filter(|&i| boundary_key.contains(&key(t[(i + 1) % 3], t[(i + 2) % 3])))
                .collect();
            match on_boundary.len() {
                0 => {}
                1 => {
                    let i = on_boundary[0];
                    *t = [t[i], t[(i + 1) % 3], t[(i + 2) % 3]];
                }
                n => {
                    return Err(FoslsError::InvalidMesh(format!(
                        "triangle {t:?} has {n} boundary edges"
                    )))
                }
            }
        }

        // re-key edges to the rotated triangle order
        let mut triangle_edges = vec![[(0usize, false); 3]; triangles.len()];
        for (k, t) in triangles.iter().enumerate() {
            for i in 0..3 {
                let (a, b) = (t[(i + 1) % 3], t[(i + 2) % 3]);
                let id = edge_ids[&key(a, b)];
                triangle_edges[k][i] = (id, a < b);
            }
        }

        // build element maps
        let mut maps = Vec::with_capacity(triangles.len());
        for (k, t) in triangles.iter().enumerate() {
            let p = [vertices[t[0]], vertices[t[1]], vertices[t[2]]];
            let jac = Mat2::from_cols(p[1] - p[0], p[2] - p[0]);
            if jac.det() <= 0.0 {
                return Err(FoslsError::InvalidMesh(format!(
                    "triangle {k} is not counterclockwise (det {})",
                    jac.det()
                )));
            }
            let curved = boundary_key.contains(&key(t[1], t[2]));
            if curved {
                for v in [p[1], p[2]] {
                    assert!(
                        (v.norm() - 1.0).abs() < 1e-13,
                        "boundary vertex off the unit circle: {v:?}"
                    );
                }
                let theta0 = p[1].y.atan2(p[1].x);
                let theta1 = p[2].y.atan2(p[2].x);
                let mut dtheta = theta1 - theta0;
                while dtheta <= 0.0 {
                    dtheta += 2.0 * std::f64::consts::PI;
                }
                assert!(
                    dtheta < std::f64::consts::PI,
                    "boundary arc of triangle {k} spans {dtheta} >= pi"
                );
                maps.push(ElementMap::Blended {
                    p,
                    theta0,
                    dtheta,
                });
            } else {
                maps.push(ElementMap::Affine {
                    origin: p[0],
                    jac,
                });
            }
        }

        Ok(Mesh {
            n_fan,
            level,
            vertices,
            triangles,
            edges,
            triangle_edges,
            maps,
        })
    }

    pub fn n_fan(&self) -> usize {
        self.n_fan
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn num_boundary_edges(&self) -> usize {
        self.edges.iter().filter(|e| e.boundary).count()
    }

    pub fn vertex(&self, i: usize) -> Point2 {
        self.vertices[i]
    }

    pub fn triangle(&self, k: usize) -> [usize; 3] {
        self.triangles[k]
    }

    pub fn edge(&self, e: usize) -> &Edge {
        &self.edges[e]
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Global edge id and whether the local CCW direction of edge `i`
    /// agrees with the global ascending-vertex-index direction.
    pub fn triangle_edge(&self, k: usize, i: usize) -> (usize, bool) {
        self.triangle_edges[k][i]
    }

    pub fn map(&self, k: usize) -> &ElementMap {
        &self.maps[k]
    }

    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        // every circle vertex is an endpoint of some boundary edge
        self.edges
            .iter()
            .any(|e| e.boundary && (e.vertices[0] == v || e.vertices[1] == v))
    }

    /// Largest pairwise vertex distance of cell `k`.
    pub fn element_diameter(&self, k: usize) -> f64 {
        let [a, b, c] = self.triangles[k];
        let (pa, pb, pc) = (self.vertices[a], self.vertices[b], self.vertices[c]);
        pa.dist(pb).max(pb.dist(pc)).max(pc.dist(pa))
    }

    /// Mesh size h: the largest element diameter.
    pub fn mesh_size(&self) -> f64 {
        (0..self.triangles.len())
            .map(|k| self.element_diameter(k))
            .fold(0.0, f64::max)
    }

    /// Total area by mapped quadrature; the disk has area pi.
    pub fn area(&self, rule: &QuadratureRule) -> f64 {
        let mut total = 0.0;
        for map in &self.maps {
            for (&node, &w) in rule.nodes.iter().zip(&rule.weights) {
                total += w * map.jacobian(node).det();
            }
        }
        total
    }

    /// Smallest Jacobian determinant over all cells at the rule's nodes.
    pub fn min_jacobian_det(&self, rule: &QuadratureRule) -> f64 {
        let mut min = f64::INFINITY;
        for map in &self.maps {
            for &node in &rule.nodes {
                min = min.min(map.jacobian(node).det());
            }
        }
        min
    }

    /// Shape-regularity constants of the vertex maps:
    /// `max ||A'|| / h_K` and `max h_K ||A'^-1||`.
    pub fn map_constants(&self) -> (f64, f64) {
        let mut c_fwd: f64 = 0.0;
        let mut c_inv: f64 = 0.0;
        for k in 0..self.triangles.len() {
            let h = self.element_diameter(k);
            let a = self.maps[k].vertex_jacobian();
            c_fwd = c_fwd.max(a.norm2() / h);
            c_inv = c_inv.max(a.inverse().norm2() * h);
        }
        (c_fwd, c_inv)
    }

    /// Locate the cell containing `x` and return `(cell, reference coords)`.
    pub fn locate(&self, x: Point2) -> Result<(usize, Point2)> {
        // cheap reject by vertex-triangle proximity first, exact Newton after
        let mut order: Vec<usize> = (0..self.triangles.len()).collect();
        let center = |k: usize| {
            let [a, b, c] = self.triangles[k];
            (self.vertices[a] + self.vertices[b] + self.vertices[c]) * (1.0 / 3.0)
        };
        order.sort_by(|&i, &j| center(i).dist(x).total_cmp(&center(j).dist(x)));
        for k in order {
            if let Some(r) = self.maps[k].invert(x) {
                return Ok((k, r));
            }
        }
        Err(FoslsError::OutsideDomain(x.x, x.y))
    }

    /// Plain-text dump: vertex, triangle, and boundary-edge sections.
    pub fn write_text(&self, w: &mut impl std::io::Write) -> std::io::Result<()> {
        writeln!(w, "vertices {}", self.vertices.len())?;
        for v in &self.vertices {
            writeln!(w, "{:.17e} {:.17e}", v.x, v.y)?;
        }
        writeln!(w, "triangles {}", self.triangles.len())?;
        for t in &self.triangles {
            writeln!(w, "{} {} {}", t[0], t[1], t[2])?;
        }
        let boundary: Vec<&Edge> = self.edges.iter().filter(|e| e.boundary).collect();
        writeln!(w, "boundary_edges {}", boundary.len())?;
        for e in boundary {
            writeln!(w, "{} {}", e.vertices[0], e.vertices[1])?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::triangle_rule;

    #[test]
    fn rejects_tiny_fans() {
        assert!(Mesh::coarse_disk(2).is_err());
        assert!(Mesh::coarse_disk(0).is_err());
    }

    #[test]
    fn fan_counts_n4() {
        let mesh = Mesh::coarse_disk(4).unwrap();
        assert_eq!(mesh.num_vertices(), 5);
        assert_eq!(mesh.num_triangles(), 4);
        assert_eq!(mesh.num_edges(), 8);
        assert_eq!(mesh.num_boundary_edges(), 4);
        let refined = mesh.refined();
        assert_eq!(refined.num_triangles(), 16);
        assert_eq!(refined.num_vertices(), 13);
        assert_eq!(refined.num_boundary_edges(), 8);
    }

    #[test]
    fn euler_characteristic_holds_across_levels() {
        for n_fan in [3, 5, 6] {
            let mut mesh = Mesh::coarse_disk(n_fan).unwrap();
            for _ in 0..3 {
                // disk: V - E + T = 1
                let (v, e, t) = (mesh.num_vertices(), mesh.num_edges(), mesh.num_triangles());
                assert_eq!(v + t, e + 1, "V={v} E={e} T={t}");
                mesh = mesh.refined();
            }
        }
    }

    #[test]
    fn coarse_area_is_pi_to_machine_precision() {
        let mesh = Mesh::coarse_disk(6).unwrap();
        let rule = triangle_rule(10).unwrap();
        assert!((mesh.area(&rule) - std::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn refined_area_stays_pi() {
        let rule = triangle_rule(10).unwrap();
        for n_fan in [3, 6] {
            let mut mesh = Mesh::coarse_disk(n_fan).unwrap();
            for _ in 0..3 {
                mesh = mesh.refined();
                let area = mesh.area(&rule);
                assert!(
                    (area - std::f64::consts::PI).abs() < 1e-10,
                    "n_fan={n_fan} level={}: area {area}",
                    mesh.level()
                );
            }
        }
    }

    #[test]
    fn mesh_size_settles_into_halving() {
        // The first refinement reshapes cells near the rim: projected
        // boundary midpoints stretch the outer children while interior
        // midpoints stay put, so h drops by only ~1.6x from level 0 to 1
        // and h0/h2 is ~3, not 4. From level 1 on the cell shapes are
        // self-similar and h halves within +-15% per level.
        let mut mesh = Mesh::coarse_disk(6).unwrap();
        let mut h = vec![mesh.mesh_size()];
        for _ in 0..4 {
            mesh = mesh.refined();
            h.push(mesh.mesh_size());
        }
        assert!((h[0] - 1.0).abs() < 1e-12, "coarse fan chord, h0 = {}", h[0]);
        let r02 = h[0] / h[2];
        assert!((2.8..=3.2).contains(&r02), "h0/h2 = {r02}");
        for k in 1..h.len() - 1 {
            let r = h[k] / h[k + 1];
            assert!((1.7..=2.3).contains(&r), "h{k}/h{} = {r}", k + 1);
        }
    }

    #[test]
    fn jacobian_positive_on_dense_grid_for_widest_sectors() {
        // 120 degree sectors of the 3-fan bend the blend hardest
        let mesh = Mesh::coarse_disk(3).unwrap();
        let n = 40;
        for k in 0..mesh.num_triangles() {
            for i in 0..=n {
                for j in 0..=(n - i) {
                    let r = Point2::new(i as f64 / n as f64, j as f64 / n as f64);
                    let det = mesh.map(k).jacobian(r).det();
                    assert!(det > 0.0, "cell {k} at {r:?}: det {det}");
                }
            }
        }
    }

    #[test]
    fn rim_cell_area_matches_circular_segment_formula() {
        // straight-sided area (shoelace) plus the circular segment over the
        // chord, (dtheta - sin dtheta)/2, is exact; quadrature of |det J|
        // must reproduce it because the blend is analytic on the cell
        let mesh = Mesh::disk(6, 1).unwrap();
        let k = (0..mesh.num_triangles())
            .find(|&k| mesh.map(k).is_curved())
            .unwrap();
        let ElementMap::Blended { p, dtheta, .. } = *mesh.map(k) else {
            unreachable!();
        };
        let shoelace = 0.5 * Mat2::from_cols(p[1] - p[0], p[2] - p[0]).det();
        let exact = shoelace + 0.5 * (dtheta - dtheta.sin());
        for (degree, tol) in [(6, 1e-9), (12, 2e-14)] {
            let rule = triangle_rule(degree).unwrap();
            let mut area = 0.0;
            for (node, w) in rule.nodes.iter().zip(&rule.weights) {
                area += w * mesh.map(k).jacobian(*node).det();
            }
            assert!(
                (area - exact).abs() < tol,
                "degree {degree}: area {area} vs exact {exact}"
            );
        }
    }

    #[test]
    fn jacobian_dets_positive_everywhere() {
        let rule = triangle_rule(12).unwrap();
        for n_fan in [3, 4, 6] {
            let mut mesh = Mesh::coarse_disk(n_fan).unwrap();
            for _ in 0..=2 {
                assert!(
                    mesh.min_jacobian_det(&rule) > 0.0,
                    "n_fan={n_fan} level={}",
                    mesh.level()
                );
                mesh = mesh.refined();
            }
        }
    }

    #[test]
    fn map_rejects_points_outside_reference_triangle() {
        let mesh = Mesh::coarse_disk(6).unwrap();
        assert!(mesh.map(0).eval(Point2::new(-0.01, 0.2)).is_err());
        assert!(mesh.map(0).eval(Point2::new(0.7, 0.7)).is_err());
        assert!(mesh.map(0).eval(Point2::new(0.5, 0.5)).is_ok());
    }

    /// Oracle: central finite differences of the map itself.
    #[test]
    fn jacobian_matches_finite_differences() {
        let mesh = Mesh::disk(5, 1).unwrap();
        let pts = [
            (0.21, 0.17),
            (0.4, 0.35),
            (0.11, 0.62),
            (0.55, 0.2),
            (0.3, 0.3),
            (0.15, 0.45),
            (0.62, 0.11),
            (0.25, 0.5),
            (0.45, 0.45),
            (0.33, 0.21),
        ];
        let h = 1e-6;
        for k in 0..mesh.num_triangles() {
            let map = mesh.map(k);
            for &(x, y) in &pts {
                let r = Point2::new(x, y);
                let jac = map.jacobian(r);
                let fx1 = map.eval_unchecked(Point2::new(x + h, y));
                let fx0 = map.eval_unchecked(Point2::new(x - h, y));
                let fy1 = map.eval_unchecked(Point2::new(x, y + h));
                let fy0 = map.eval_unchecked(Point2::new(x, y - h));
                let fd = Mat2::new(
                    (fx1.x - fx0.x) / (2.0 * h),
                    (fy1.x - fy0.x) / (2.0 * h),
                    (fx1.y - fx0.y) / (2.0 * h),
                    (fy1.y - fy0.y) / (2.0 * h),
                );
                for (a, b) in [
                    (jac.a, fd.a),
                    (jac.b, fd.b),
                    (jac.c, fd.c),
                    (jac.d, fd.d),
                ] {
                    assert!((a - b).abs() < 1e-6, "cell {k} at ({x},{y}): {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn curved_edges_lie_on_unit_circle() {
        for level in 0..3 {
            let mesh = Mesh::disk(4, level).unwrap();
            for k in 0..mesh.num_triangles() {
                if !mesh.map(k).is_curved() {
                    continue;
                }
                for j in 1..=7 {
                    let t = j as f64 / 8.0;
                    let x = mesh.map(k).eval_unchecked(ref_edge_point(0, t));
                    assert!(
                        (x.norm() - 1.0).abs() < 1e-13,
                        "level {level} cell {k}: |{:?}| = {}",
                        x,
                        x.norm()
                    );
                }
            }
        }
    }

    #[test]
    fn boundary_arcs_cover_full_circle() {
        let mesh = Mesh::disk(3, 2).unwrap();
        let mut total = 0.0;
        for map in (0..mesh.num_triangles()).map(|k| mesh.map(k)) {
            if let ElementMap::Blended { dtheta, .. } = map {
                total += dtheta;
            }
        }
        assert!((total - 2.0 * std::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn shared_edges_agree_pointwise_from_both_sides() {
        let mesh = Mesh::disk(6, 2).unwrap();
        for (e, edge) in mesh.edges().iter().enumerate() {
            let [Some(ka), Some(kb)] = edge.triangles else {
                continue;
            };
            let local = |k: usize| {
                (0..3)
                    .find(|&i| mesh.triangle_edge(k, i).0 == e)
                    .expect("edge listed in incident triangle")
            };
            let (ia, ib) = (local(ka), local(kb));
            for j in 0..5 {
                let t = (j as f64 + 0.5) / 5.0;
                // walk both parametrizations in the global (ascending) direction
                let ta = if mesh.triangle_edge(ka, ia).1 { t } else { 1.0 - t };
                let tb = if mesh.triangle_edge(kb, ib).1 { t } else { 1.0 - t };
                let xa = mesh.map(ka).eval_unchecked(ref_edge_point(ia, ta));
                let xb = mesh.map(kb).eval_unchecked(ref_edge_point(ib, tb));
                assert!(xa.dist(xb) < 1e-12, "edge {e}: {xa:?} vs {xb:?}");
            }
        }
    }

    #[test]
    fn shape_constants_stable_under_refinement() {
        // The forward constant locks in once the level-2 cell shapes
        // appear. The inverse constant creeps upward as rim cells flatten
        // toward their limit shape, with geometrically shrinking
        // increments; successive ratios sit inside 10% from level 2 on
        // and both constants stay bounded.
        let mut mesh = Mesh::coarse_disk(6).unwrap();
        let mut fwd = Vec::new();
        let mut inv = Vec::new();
        for _ in 0..=4 {
            let (f, i) = mesh.map_constants();
            fwd.push(f);
            inv.push(i);
            mesh = mesh.refined();
        }
        for k in 0..fwd.len() {
            assert!(fwd[k] < 1.5 && inv[k] < 2.5, "level {k}: {} {}", fwd[k], inv[k]);
        }
        for k in 2..fwd.len() - 1 {
            assert!((fwd[k + 1] / fwd[k] - 1.0).abs() < 0.1, "fwd at level {k}");
            assert!((inv[k + 1] / inv[k] - 1.0).abs() < 0.1, "inv at level {k}");
        }
        for k in 1..inv.len() - 1 {
            assert!(
                inv[k + 1] - inv[k] < inv[k] - inv[k - 1],
                "increments must shrink: {:?}",
                inv
            );
        }
    }

    #[test]
    fn locate_roundtrips_points() {
        let mesh = Mesh::disk(6, 2).unwrap();
        for &(x, y) in &[(0.0, 0.0), (0.3, 0.4), (-0.7, 0.2), (0.0, -0.95)] {
            let p = Point2::new(x, y);
            let (k, r) = mesh.locate(p).unwrap();
            let back = mesh.map(k).eval_unchecked(r);
            assert!(back.dist(p) < 1e-10, "({x},{y}) -> cell {k} -> {back:?}");
        }
        assert!(mesh.locate(Point2::new(1.2, 0.0)).is_err());
    }

    #[test]
    fn text_dump_has_expected_shape() {
        let mesh = Mesh::coarse_disk(4).unwrap();
        let mut buf = Vec::new();
        mesh.write_text(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "vertices 5");
        assert_eq!(lines[6], "triangles 4");
        assert_eq!(lines[11], "boundary_edges 4");
        assert_eq!(lines.len(), 16);
    }
}
