//! Reference H(div) bases: Raviart-Thomas and Brezzi-Douglas-Marini.
//!
//! On the reference triangle,
//!
//! ```text
//! BDM_p    = P_p^2                          dim (p+1)(p+2)
//! RT_{p-1} = P_{p-1}^2 + x Ptilde_{p-1}     dim p(p+2)
//! ```
//!
//! where Ptilde is the homogeneous part. A basis is built by inverting
//! the generalized Vandermonde of the degree-of-freedom functionals:
//!
//! * per-edge normal moments against Legendre polynomials in the edge
//!   parameter (these carry the inter-element continuity and get sign
//!   flips from edge orientation),
//! * interior moments against an orthonormal basis of the coefficient
//!   null space of the edge-moment matrix. Any complement works because
//!   interior DOFs are private to a cell; the null-space choice makes the
//!   combined functional matrix provably invertible whenever the edge
//!   block has full rank, which is checked at construction.
//!
//! Edge DOF m of an edge walked against its stored direction picks up the
//! sign (-1)^(m+1): the unit normal flips (-1) and the Legendre weight
//! contributes (-1)^m under t -> 1-t.

use crate::error::{FoslsError, Result};
use crate::geometry::{ref_edge_point, REF_EDGE};
use crate::point::Point2;
use crate::quadrature::{gauss_legendre_01, legendre_values, triangle_rule, QuadratureRule};
use nalgebra::DMatrix;

pub const MAX_VECTOR_DEGREE: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    RaviartThomas,
    BrezziDouglasMarini,
}

impl Family {
    /// Degree of the scalar Lagrange space whose curls span the
    /// divergence-free subspace of this family at vector degree p_v.
    pub fn potential_degree(self, p_v: usize) -> usize {
        match self {
            Family::RaviartThomas => p_v,
            Family::BrezziDouglasMarini => p_v + 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Family::RaviartThomas => "rt",
            Family::BrezziDouglasMarini => "bdm",
        }
    }
}

/// Prime (pre-nodal) basis function. The full polynomial block uses
/// Bernstein polynomials, whose Vandermonde stays well conditioned up to
/// the supported degrees; raw monomials lose ~6 digits by degree 5. The
/// Raviart-Thomas enrichment x * (homogeneous monomial) keeps the
/// monomial form because it must be homogeneous.
#[derive(Debug, Clone, Copy)]
enum Prime {
    /// binom-weighted L0^a L1^b L2^c in component `comp`
    Bernstein { a: i32, b: i32, c: i32, comp: usize, scale: f64 },
    /// x * x^a y^(k-a), vector-valued
    Tail { a: i32, k: i32, scale: f64 },
}

fn powi0(x: f64, e: i32) -> f64 {
    if e <= 0 {
        1.0
    } else {
        x.powi(e)
    }
}

impl Prime {
    fn eval(&self, x: Point2) -> Point2 {
        match *self {
            Prime::Bernstein { a, b, c, comp, scale } => {
                let l0 = 1.0 - x.x - x.y;
                let v = scale * powi0(l0, a) * powi0(x.x, b) * powi0(x.y, c);
                if comp == 0 {
                    Point2::new(v, 0.0)
                } else {
                    Point2::new(0.0, v)
                }
            }
            Prime::Tail { a, k, scale } => {
                let h = scale * powi0(x.x, a) * powi0(x.y, k - a);
                Point2::new(x.x * h, x.y * h)
            }
        }
    }

    fn div(&self, x: Point2) -> f64 {
        match *self {
            Prime::Bernstein { a, b, c, comp, scale } => {
                let l0 = 1.0 - x.x - x.y;
                // d/dcomp of L0^a L1^b L2^c
                let mut d = 0.0;
                if a > 0 {
                    d -= a as f64 * powi0(l0, a - 1) * powi0(x.x, b) * powi0(x.y, c);
                }
                if comp == 0 && b > 0 {
                    d += b as f64 * powi0(l0, a) * powi0(x.x, b - 1) * powi0(x.y, c);
                }
                if comp == 1 && c > 0 {
                    d += c as f64 * powi0(l0, a) * powi0(x.x, b) * powi0(x.y, c - 1);
                }
                scale * d
            }
            // div(x q) = (k + 2) q for homogeneous q of degree k
            Prime::Tail { a, k, scale } => {
                scale * (k + 2) as f64 * powi0(x.x, a) * powi0(x.y, k - a)
            }
        }
    }

    fn rescaled(self, factor: f64) -> Prime {
        match self {
            Prime::Bernstein { a, b, c, comp, scale } => {
                Prime::Bernstein { a, b, c, comp, scale: scale * factor }
            }
            Prime::Tail { a, k, scale } => Prime::Tail { a, k, scale: scale * factor },
        }
    }
}

fn binomial_weight(d: i32, a: i32, b: i32, c: i32) -> f64 {
    let fact = |n: i32| (1..=n).map(|k| k as f64).product::<f64>();
    fact(d) / (fact(a) * fact(b) * fact(c))
}

/// Coefficient-space transform `T` such that the functions with atomic-prime
/// coefficient columns `T e_j` are L2-orthonormal: `T^T G T = I` for the
/// atomic Gram matrix `G`.
///
/// Two modified Gram-Schmidt passes: one pass leaves an orthogonality defect
/// of order `eps * cond(basis)`, which at the top degree costs two digits in
/// every downstream solve; the second pass removes it.
fn orthonormal_transform(gram: &DMatrix<f64>) -> DMatrix<f64> {
    let n = gram.nrows();
    let mut t = DMatrix::identity(n, n);
    for _pass in 0..2 {
        for j in 0..n {
            for i in 0..j {
                let ti = t.column(i).into_owned();
                let proj = ti.dot(&(gram * t.column(j)));
                let update = t.column(j) - &ti * proj;
                t.set_column(j, &update);
            }
            let tj = t.column(j).into_owned();
            let norm = tj.dot(&(gram * &tj)).sqrt();
            t.set_column(j, &(tj / norm));
        }
    }
    t
}

fn prime_basis(family: Family, degree: usize) -> Vec<Prime> {
    let mut primes = Vec::new();
    let full = match family {
        Family::RaviartThomas => degree as i32 - 1,
        Family::BrezziDouglasMarini => degree as i32,
    };
    for comp in 0..2 {
        for b in 0..=full {
            for c in 0..=(full - b) {
                let a = full - b - c;
                primes.push(Prime::Bernstein {
                    a,
                    b,
                    c,
                    comp,
                    scale: binomial_weight(full, a, b, c),
                });
            }
        }
    }
    if family == Family::RaviartThomas {
        let k = degree as i32 - 1;
        for a in 0..=k {
            primes.push(Prime::Tail { a, k, scale: binomial_weight(k, a, k - a, 0) });
        }
    }
    primes
}

/// Edge quadrature and normal data for applying edge DOF functionals.
#[derive(Debug, Clone)]
struct EdgeRule {
    /// (reference point, weight including edge length, Legendre values)
    points: Vec<(Point2, f64, Vec<f64>)>,
    normal: Point2,
}

#[derive(Debug, Clone)]
pub struct VectorBasis {
    family: Family,
    degree: usize,
    primes: Vec<Prime>,
    /// column j = prime coefficients of nodal basis function j
    coeff: DMatrix<f64>,
    edge_rules: [EdgeRule; 3],
    /// interior weight fields, as prime coefficient vectors
    null_vectors: DMatrix<f64>,
    interior_rule: QuadratureRule,
    vandermonde_condition: f64,
}

impl VectorBasis {
    pub fn new(family: Family, degree: usize) -> Result<Self> {
        if degree == 0 || degree > MAX_VECTOR_DEGREE {
            return Err(FoslsError::Degree(degree));
        }
        let mut primes = prime_basis(family, degree);
        let n = primes.len();
        let per_edge = match family {
            Family::RaviartThomas => degree,
            Family::BrezziDouglasMarini => degree + 1,
        };

        let interior_rule = triangle_rule(2 * degree)?;
        // normalize every prime to unit L2 norm; corner Bernstein functions
        // and the homogeneous tails are otherwise orders of magnitude apart
        for p in primes.iter_mut() {
            let norm2: f64 = interior_rule
                .nodes
                .iter()
                .zip(&interior_rule.weights)
                .map(|(x, w)| {
                    let v = p.eval(*x);
                    w * v.dot(v)
                })
                .sum();
            *p = p.rescaled(1.0 / norm2.sqrt());
        }

        let edge_rules = std::array::from_fn(|e| {
            let [a, b] = REF_EDGE[e];
            let tangent = (b - a) * (1.0 / (b - a).norm());
            let length = (b - a).norm();
            let (ts, ws) = gauss_legendre_01(degree + 2);
            let points = ts
                .iter()
                .zip(&ws)
                .map(|(&t, &w)| {
                    let leg = legendre_values(per_edge - 1, 2.0 * t - 1.0);
                    (ref_edge_point(e, t), w * length, leg)
                })
                .collect();
            EdgeRule { points, normal: tangent.rot_cw() }
        });

        let mut gram = DMatrix::zeros(n, n);
        for (node, w) in interior_rule.nodes.iter().zip(&interior_rule.weights) {
            let vals: Vec<Point2> = primes.iter().map(|p| p.eval(*node)).collect();
            for r in 0..n {
                for c in 0..n {
                    gram[(r, c)] += w * vals[r].dot(vals[c]);
                }
            }
        }
        // L2-orthonormalize the primes (double modified Gram-Schmidt in
        // coefficient space: the second pass removes the defect the first
        // leaves at high degree). The transform is folded back into the
        // final coefficients, so evaluation still runs over the atomic
        // primes.
        let transform = orthonormal_transform(&gram);
        let gram_w = transform.transpose() * &gram * &transform;

        // edge-moment matrix over the orthonormalized primes
        let mut e_atomic = DMatrix::zeros(3 * per_edge, n);
        for (e, rule) in edge_rules.iter().enumerate() {
            for (j, prime) in primes.iter().enumerate() {
                for (x, w, leg) in &rule.points {
                    let flux = prime.eval(*x).dot(rule.normal) * w;
                    for m in 0..per_edge {
                        e_atomic[(e * per_edge + m, j)] += flux * leg[m];
                    }
                }
            }
        }
        let e_mat = e_atomic * &transform;

        // Null space of the edge moments via the spectral decomposition of
        // E^T E; nalgebra's SVD is thin and does not expose it for a wide E.
        let ete = e_mat.transpose() * &e_mat;
        let eig = nalgebra::SymmetricEigen::new(ete);
        let emax = eig.eigenvalues.max();
        let rank = eig.eigenvalues.iter().filter(|&&v| v > 1e-12 * emax).count();
        if rank != 3 * per_edge {
            return Err(FoslsError::Solver(format!(
                "edge moment matrix rank {rank}, expected {}",
                3 * per_edge
            )));
        }
        let n_interior = n - 3 * per_edge;
        let mut null_vectors = DMatrix::zeros(n, n_interior);
        let mut col = 0;
        for (i, &val) in eig.eigenvalues.iter().enumerate() {
            if val <= 1e-12 * emax {
                null_vectors.set_column(col, &eig.eigenvectors.column(i));
                col += 1;
            }
        }
        debug_assert_eq!(col, n_interior);

        let mut vandermonde = DMatrix::zeros(n, n);
        vandermonde.rows_mut(0, 3 * per_edge).copy_from(&e_mat);
        vandermonde
            .rows_mut(3 * per_edge, n_interior)
            .copy_from(&(null_vectors.transpose() * &gram_w));

        let vs = vandermonde.clone().svd(false, false);
        let vandermonde_condition = vs.singular_values.max()
            / vs.singular_values
                .iter()
                .cloned()
                .fold(f64::INFINITY, f64::min);
        let coeff = vandermonde
            .clone()
            .lu()
            .try_inverse()
            .ok_or_else(|| FoslsError::Solver("singular DOF matrix".into()))?;
        // one Newton step on the inverse polishes the last digit or two
        let coeff = &coeff * (DMatrix::identity(n, n) * 2.0 - &vandermonde * &coeff);

        // back to atomic-prime coordinates for evaluation and moments
        let coeff = &transform * coeff;
        let null_vectors = transform * null_vectors;

        Ok(VectorBasis {
            family,
            degree,
            primes,
            coeff,
            edge_rules,
            null_vectors,
            interior_rule,
            vandermonde_condition,
        })
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn dim(&self) -> usize {
        self.primes.len()
    }

    pub fn edge_dofs_per_edge(&self) -> usize {
        match self.family {
            Family::RaviartThomas => self.degree,
            Family::BrezziDouglasMarini => self.degree + 1,
        }
    }

    pub fn num_interior_dofs(&self) -> usize {
        self.dim() - 3 * self.edge_dofs_per_edge()
    }

    /// Local index of moment m on local edge e.
    pub fn edge_dof(&self, e: usize, m: usize) -> usize {
        e * self.edge_dofs_per_edge() + m
    }

    pub fn interior_dof(&self, j: usize) -> usize {
        3 * self.edge_dofs_per_edge() + j
    }

    pub fn vandermonde_condition(&self) -> f64 {
        self.vandermonde_condition
    }

    /// Values and reference divergences of all nodal basis functions.
    pub fn eval(&self, x: Point2) -> Vec<(Point2, f64)> {
        let vals: Vec<(Point2, f64)> =
            self.primes.iter().map(|p| (p.eval(x), p.div(x))).collect();
        (0..self.dim())
            .map(|j| {
                let mut v = Point2::new(0.0, 0.0);
                let mut d = 0.0;
                for (n, (pv, pd)) in vals.iter().enumerate() {
                    let c = self.coeff[(n, j)];
                    v = v + *pv * c;
                    d += pd * c;
                }
                (v, d)
            })
            .collect()
    }

    /// Apply all reference DOF functionals to an arbitrary field.
    pub fn dofs(&self, f: impl Fn(Point2) -> Point2) -> Vec<f64> {
        let per_edge = self.edge_dofs_per_edge();
        let mut out = vec![0.0; self.dim()];
        for (e, rule) in self.edge_rules.iter().enumerate() {
            for (x, w, leg) in &rule.points {
                let flux = f(*x).dot(rule.normal) * w;
                for m in 0..per_edge {
                    out[self.edge_dof(e, m)] += flux * leg[m];
                }
            }
        }
        for (node, w) in self.interior_rule.nodes.iter().zip(&self.interior_rule.weights) {
            let fv = f(*node);
            let prime_vals: Vec<Point2> = self.primes.iter().map(|p| p.eval(*node)).collect();
            for j in 0..self.num_interior_dofs() {
                let mut wj = Point2::new(0.0, 0.0);
                for (n, pv) in prime_vals.iter().enumerate() {
                    wj = wj + *pv * self.null_vectors[(n, j)];
                }
                out[self.interior_dof(j)] += w * fv.dot(wj);
            }
        }
        out
    }

    /// Interpolate a field: DOF functionals give the coefficients.
    pub fn interpolate(&self, f: impl Fn(Point2) -> Point2) -> Vec<f64> {
        self.dofs(f)
    }
}

/// Sign relating the local edge DOF to the global one when the local edge
/// direction disagrees with the global (ascending-vertex) direction.
pub fn edge_dof_sign(same_direction: bool, moment: usize) -> f64 {
    if same_direction {
        1.0
    } else if moment % 2 == 0 {
        -1.0
    } else {
        1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_ref_points(n: usize, seed: u64) -> Vec<Point2> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let mut x: f64 = rng.gen();
                let mut y: f64 = rng.gen();
                if x + y > 1.0 {
                    (x, y) = (1.0 - x, 1.0 - y);
                }
                Point2::new(x, y)
            })
            .collect()
    }

    #[test]
    fn dimensions_match_the_span_formulas() {
        for p in 1..=MAX_VECTOR_DEGREE {
            let rt = VectorBasis::new(Family::RaviartThomas, p).unwrap();
            assert_eq!(rt.dim(), p * (p + 2), "RT p={p}");
            assert_eq!(rt.edge_dofs_per_edge(), p);
            assert_eq!(rt.num_interior_dofs(), p * (p - 1));
            let bdm = VectorBasis::new(Family::BrezziDouglasMarini, p).unwrap();
            assert_eq!(bdm.dim(), (p + 1) * (p + 2), "BDM p={p}");
            assert_eq!(bdm.edge_dofs_per_edge(), p + 1);
            assert_eq!(bdm.num_interior_dofs(), p * p - 1);
        }
    }

    #[test]
    fn rt0_has_three_dofs_and_bdm1_six() {
        assert_eq!(VectorBasis::new(Family::RaviartThomas, 1).unwrap().dim(), 3);
        assert_eq!(VectorBasis::new(Family::BrezziDouglasMarini, 1).unwrap().dim(), 6);
        assert_eq!(VectorBasis::new(Family::RaviartThomas, 2).unwrap().dim(), 8);
    }

    #[test]
    fn nodal_duality_holds() {
        for family in [Family::RaviartThomas, Family::BrezziDouglasMarini] {
            for p in 1..=MAX_VECTOR_DEGREE {
                let basis = VectorBasis::new(family, p).unwrap();
                for j in 0..basis.dim() {
                    let dofs = basis.dofs(|x| basis.eval(x)[j].0);
                    for (i, d) in dofs.iter().enumerate() {
                        let want = if i == j { 1.0 } else { 0.0 };
                        assert!(
                            (d - want).abs() < 1e-10,
                            "{} p={p}: dof {i} of fn {j} = {d}",
                            family.name()
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn position_field_has_divergence_two() {
        for family in [Family::RaviartThomas, Family::BrezziDouglasMarini] {
            for p in 1..=3 {
                let basis = VectorBasis::new(family, p).unwrap();
                let coef = basis.interpolate(|x| x);
                for x in random_ref_points(6, 11) {
                    let evals = basis.eval(x);
                    let mut v = Point2::new(0.0, 0.0);
                    let mut d = 0.0;
                    for (c, (bv, bd)) in coef.iter().zip(&evals) {
                        v = v + *bv * *c;
                        d += bd * c;
                    }
                    assert!(v.dist(x) < 1e-10, "{} p={p} at {x:?}: {v:?}", family.name());
                    assert!((d - 2.0).abs() < 1e-10, "{} p={p}: div {d}", family.name());
                }
            }
        }
    }

    #[test]
    fn bdm_reproduces_full_polynomial_fields() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for p in 1..=4 {
            let basis = VectorBasis::new(Family::BrezziDouglasMarini, p).unwrap();
            let cx: Vec<f64> = (0..(p + 1) * (p + 2) / 2).map(|_| rng.gen::<f64>() - 0.5).collect();
            let cy: Vec<f64> = (0..(p + 1) * (p + 2) / 2).map(|_| rng.gen::<f64>() - 0.5).collect();
            let field = |x: Point2| {
                let mut out = Point2::new(0.0, 0.0);
                let mut i = 0;
                for a in 0..=p as i32 {
                    for b in 0..=(p as i32 - a) {
                        let m = x.x.powi(a) * x.y.powi(b);
                        out.x += cx[i] * m;
                        out.y += cy[i] * m;
                        i += 1;
                    }
                }
                out
            };
            let coef = basis.interpolate(field);
            for x in random_ref_points(8, 5 + p as u64) {
                let evals = basis.eval(x);
                let mut v = Point2::new(0.0, 0.0);
                for (c, (bv, _)) in coef.iter().zip(&evals) {
                    v = v + *bv * *c;
                }
                assert!(v.dist(field(x)) < 1e-9, "p={p} at {x:?}");
            }
        }
    }

    /// Every RT_{p-1} basis function projects onto BDM_p with zero
    /// residual: the L2 projection reproduces it exactly.
    #[test]
    fn rt_included_in_bdm_via_l2_projection() {
        for p in 1..=MAX_VECTOR_DEGREE {
            let rt = VectorBasis::new(Family::RaviartThomas, p).unwrap();
            let bdm = VectorBasis::new(Family::BrezziDouglasMarini, p).unwrap();
            let rule = triangle_rule(2 * (p + 1)).unwrap();
            let nb = bdm.dim();
            let mut gram = DMatrix::zeros(nb, nb);
            for (node, w) in rule.nodes.iter().zip(&rule.weights) {
                let bv: Vec<Point2> = bdm.eval(*node).into_iter().map(|(v, _)| v).collect();
                for r in 0..nb {
                    for c in 0..nb {
                        gram[(r, c)] += w * bv[r].dot(bv[c]);
                    }
                }
            }
            let lu = gram.clone().lu();
            for j in 0..rt.dim() {
                let mut rhs: DMatrix<f64> = DMatrix::zeros(nb, 1);
                for (node, w) in rule.nodes.iter().zip(&rule.weights) {
                    let rv = rt.eval(*node)[j].0;
                    let bv = bdm.eval(*node);
                    for r in 0..nb {
                        rhs[(r, 0)] += w * bv[r].0.dot(rv);
                    }
                }
                let mut sol = lu.solve(&rhs).unwrap();
                sol += lu.solve(&(&rhs - &gram * &sol)).unwrap();
                // residual measured pointwise to dodge cancellation in the
                // norm identity
                let mut residual2 = 0.0;
                for (node, w) in rule.nodes.iter().zip(&rule.weights) {
                    let rv = rt.eval(*node)[j].0;
                    let bv = bdm.eval(*node);
                    let mut proj = Point2::new(0.0, 0.0);
                    for r in 0..nb {
                        proj = proj + bv[r].0 * sol[(r, 0)];
                    }
                    residual2 += w * (rv - proj).dot(rv - proj);
                }
                assert!(
                    residual2.sqrt() < 1e-12,
                    "p={p} fn {j}: residual {}",
                    residual2.sqrt()
                );
            }
        }
    }

    #[test]
    fn divergence_matches_finite_differences() {
        let basis = VectorBasis::new(Family::RaviartThomas, 3).unwrap();
        let h = 1e-6;
        for x in random_ref_points(5, 3) {
            let evals = basis.eval(x);
            for j in 0..basis.dim() {
                let fxp = basis.eval(Point2::new(x.x + h, x.y))[j].0;
                let fxm = basis.eval(Point2::new(x.x - h, x.y))[j].0;
                let fyp = basis.eval(Point2::new(x.x, x.y + h))[j].0;
                let fym = basis.eval(Point2::new(x.x, x.y - h))[j].0;
                let fd = (fxp.x - fxm.x + fyp.y - fym.y) / (2.0 * h);
                assert!((evals[j].1 - fd).abs() < 1e-5 * (1.0 + evals[j].1.abs()));
            }
        }
    }

    #[test]
    fn vandermonde_condition_is_reproducible() {
        for family in [Family::RaviartThomas, Family::BrezziDouglasMarini] {
            for p in 1..=MAX_VECTOR_DEGREE {
                let a = VectorBasis::new(family, p).unwrap();
                let b = VectorBasis::new(family, p).unwrap();
                assert!(a.vandermonde_condition().is_finite());
                assert_eq!(a.vandermonde_condition(), b.vandermonde_condition());
            }
        }
    }

    #[test]
    fn edge_sign_law() {
        assert_eq!(edge_dof_sign(true, 0), 1.0);
        assert_eq!(edge_dof_sign(true, 3), 1.0);
        assert_eq!(edge_dof_sign(false, 0), -1.0);
        assert_eq!(edge_dof_sign(false, 1), 1.0);
        assert_eq!(edge_dof_sign(false, 2), -1.0);
    }
}
