//! Divergence-constrained L2 projection onto the vector space, and the
//! discrete Helmholtz-like splitting behind it.
//!
//! The projector solves
//!
//! ```text
//! I_h phi = argmin |phi - phi_h|_{L2}
//!           s.t.  (div(phi - phi_h), div chi_h) = 0  for all chi_h,
//! ```
//!
//! over the discrete space (optionally with zero normal trace, giving
//! the boundary-respecting variant). Instead of assembling an indefinite
//! saddle system with a multiplier in the divergence range, the
//! constraint is split off by a null-space method:
//!
//! ```text
//! 1. particular:  B c_p = g,   B = div-div Gram, g_i = (div phi, div v_i)
//! 2. correction:  G y = Z^T (m - M c_p),   c = c_p + Z y
//! ```
//!
//! B is positive semidefinite with kernel exactly the divergence-free
//! subspace, and g is consistent, so plain conjugate gradients from zero
//! converge to the range component. The kernel is parametrized exactly:
//! in 2D the divergence-free subspace is curl(Lagrange_q) with q the
//! family's potential degree, where curl mu = (d_y mu, -d_x mu). The
//! embedding Z holds the vector-space coefficients of each potential
//! basis curl; the identity rot(F'^{-T} g) = (1/J) F' rot(g) makes the
//! reference curl map through the Piola transform on any cell, curved
//! ones included. G = Z^T M Z equals the potential-space stiffness
//! matrix, because |curl mu| = |grad mu| pointwise.
//!
//! Without a boundary condition the potential is determined up to a
//! constant, so one vertex DOF is pinned; with zero trace the constant
//! is excluded already and the pinning is skipped.

use std::collections::BTreeMap;

use crate::error::{FoslsError, Result};
use crate::geometry::Mesh;
use crate::point::Point2;
use crate::quadrature::{triangle_rule, QuadratureRule, MAX_DEGREE};
use crate::space::{gradient_push_forward, ScalarSpace, VectorSpace};
use crate::sparse::{dot, ldlt_factor, norm, CsrMatrix, LdltFactor, Triplets};

/// Reusable projector for one mesh and vector space: carries the mass
/// and div-div Gram matrices, the curl embedding of the potential
/// space, and the factored potential stiffness.
pub struct DivProjector<'a> {
    mesh: &'a Mesh,
    space: &'a VectorSpace,
    degree: usize,
    free_of_global: Vec<Option<usize>>,
    global_of_free: Vec<usize>,
    mass: CsrMatrix,
    divdiv: CsrMatrix,
    z: CsrMatrix,
    zt: CsrMatrix,
    potential: ScalarSpace,
    stiffness: CsrMatrix,
    stiffness_factor: LdltFactor,
}

impl<'a> DivProjector<'a> {
    pub fn new(mesh: &'a Mesh, space: &'a VectorSpace) -> Result<DivProjector<'a>> {
        let q = space.family().potential_degree(space.degree());
        let degree = (2 * (space.degree().max(q) + 3)).min(MAX_DEGREE);
        let rule = triangle_rule(degree)?;

        let mut free_of_global = vec![None; space.num_dofs()];
        let mut global_of_free = Vec::new();
        for g in 0..space.num_dofs() {
            if !space.is_constrained(g) {
                free_of_global[g] = Some(global_of_free.len());
                global_of_free.push(g);
            }
        }
        let n_free = global_of_free.len();

        // vector-space mass and div-div Gram over free DOFs
        let tab: Vec<Vec<(Point2, f64)>> = rule
            .nodes
            .iter()
            .map(|&r| space.basis().eval(r))
            .collect();
        let mut mass_t = Triplets::new(n_free, n_free);
        let mut div_t = Triplets::new(n_free, n_free);
        let n_loc = space.basis().dim();
        for k in 0..mesh.num_triangles() {
            let map = mesh.map(k);
            let dofs = space.cell_dofs(k);
            let mut m_loc = vec![0.0; n_loc * n_loc];
            let mut d_loc = vec![0.0; n_loc * n_loc];
            for (qi, &r) in rule.nodes.iter().enumerate() {
                let jac = map.jacobian(r);
                let det = jac.det();
                let w = rule.weights[qi] * det;
                let pv: Vec<(Point2, f64)> = tab[qi]
                    .iter()
                    .zip(dofs)
                    .map(|(&(v, d), &(_, sign))| (jac.apply(v) * (sign / det), d * sign / det))
                    .collect();
                for i in 0..n_loc {
                    for j in i..n_loc {
                        m_loc[i * n_loc + j] += w * pv[i].0.dot(pv[j].0);
                        d_loc[i * n_loc + j] += w * pv[i].1 * pv[j].1;
                    }
                }
            }
            for i in 0..n_loc {
                let Some(fi) = free_of_global[dofs[i].0] else {
                    continue;
                };
                for j in i..n_loc {
                    let Some(fj) = free_of_global[dofs[j].0] else {
                        continue;
                    };
                    mass_t.push(fi, fj, m_loc[i * n_loc + j]);
                    div_t.push(fi, fj, d_loc[i * n_loc + j]);
                    if fi != fj {
                        mass_t.push(fj, fi, m_loc[i * n_loc + j]);
                        div_t.push(fj, fi, d_loc[i * n_loc + j]);
                    }
                }
            }
        }
        let mass = mass_t.to_csr();
        let divdiv = div_t.to_csr();

        // potential space of the divergence-free subspace; pin one
        // vertex DOF when no boundary condition excludes constants
        let potential = ScalarSpace::new(mesh, q, space.zero_normal_trace())?;
        let pinned = if space.zero_normal_trace() {
            None
        } else {
            Some(0usize)
        };
        let mut col_of_pot = vec![None; potential.num_dofs()];
        let mut n_cols = 0usize;
        for g in 0..potential.num_dofs() {
            if potential.is_constrained(g) || Some(g) == pinned {
                continue;
            }
            col_of_pot[g] = Some(n_cols);
            n_cols += 1;
        }

        // curl embedding: per cell, local coefficients of the reference
        // curl of each potential basis function; overwrite semantics on
        // shared DOFs (both sides produce the identical value)
        let mut z_entries: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        let n_pot_loc = potential.basis().num_nodes();
        for k in 0..mesh.num_triangles() {
            let dofs = space.cell_dofs(k);
            for m in 0..n_pot_loc {
                let Some(col) = col_of_pot[potential.cell_dofs(k)[m]] else {
                    continue;
                };
                let w = space.basis().interpolate(|r| {
                    let g = potential.basis().eval_with_grad(r)[m].1;
                    Point2::new(g.y, -g.x)
                });
                for (i, &(gd, sign)) in dofs.iter().enumerate() {
                    if let Some(fi) = free_of_global[gd] {
                        z_entries.insert((fi, col), sign * w[i]);
                    }
                }
            }
        }
        let mut z_t = Triplets::new(n_free, n_cols);
        let mut zt_t = Triplets::new(n_cols, n_free);
        for (&(r, c), &v) in &z_entries {
            z_t.push(r, c, v);
            zt_t.push(c, r, v);
        }
        let z = z_t.to_csr();
        let zt = zt_t.to_csr();

        // potential stiffness G = (grad mu_i, grad mu_j); equals Z^T M Z
        let pot_tab: Vec<Vec<(f64, Point2)>> = rule
            .nodes
            .iter()
            .map(|&r| potential.basis().eval_with_grad(r))
            .collect();
        let mut g_t = Triplets::new(n_cols, n_cols);
        for k in 0..mesh.num_triangles() {
            let map = mesh.map(k);
            let cols: Vec<Option<usize>> = potential.cell_dofs(k)
                .iter()
                .map(|&g| col_of_pot[g])
                .collect();
            let mut loc = vec![0.0; n_pot_loc * n_pot_loc];
            for (qi, &r) in rule.nodes.iter().enumerate() {
                let w = rule.weights[qi] * map.jacobian(r).det();
                let grads: Vec<Point2> = pot_tab[qi]
                    .iter()
                    .map(|&(_, g)| gradient_push_forward(map, r, g))
                    .collect();
                for i in 0..n_pot_loc {
                    for j in i..n_pot_loc {
                        loc[i * n_pot_loc + j] += w * grads[i].dot(grads[j]);
                    }
                }
            }
            for i in 0..n_pot_loc {
                let Some(ci) = cols[i] else { continue };
                for j in i..n_pot_loc {
                    let Some(cj) = cols[j] else { continue };
                    g_t.push(ci, cj, loc[i * n_pot_loc + j]);
                    if ci != cj {
                        g_t.push(cj, ci, loc[i * n_pot_loc + j]);
                    }
                }
            }
        }
        let stiffness = g_t.to_csr();
        let stiffness_factor = ldlt_factor(&stiffness)?;

        Ok(DivProjector {
            mesh,
            space,
            degree,
            free_of_global,
            global_of_free,
            mass,
            divdiv,
            z,
            zt,
            potential,
            stiffness,
            stiffness_factor,
        })
    }

    pub fn potential(&self) -> &ScalarSpace {
        &self.potential
    }

    /// Dimension of the divergence-free subspace curl(potential).
    pub fn curl_dimension(&self) -> usize {
        self.z.n_cols
    }

    /// Coefficient matrix of curl(potential) inside the vector space,
    /// one column per non-pinned potential DOF (free indexing).
    pub fn curl_embedding(&self) -> &CsrMatrix {
        &self.z
    }

    /// Gram matrix of divergences, `(div v_i, div v_j)` (free indexing).
    pub fn divdiv_gram(&self) -> &CsrMatrix {
        &self.divdiv
    }

    /// Vector-space mass matrix `(v_i, v_j)` (free indexing).
    pub fn mass_gram(&self) -> &CsrMatrix {
        &self.mass
    }

    /// Stiffness matrix of the potential space; equals `Z^T M Z` because
    /// a curl has the same pointwise norm as the potential's gradient.
    pub fn potential_stiffness(&self) -> &CsrMatrix {
        &self.stiffness
    }

    fn quadrature(&self) -> Result<QuadratureRule> {
        triangle_rule(self.degree)
    }

    /// Moment vectors m_i = (phi, v_i) and g_i = (div phi, div v_i) over
    /// the free DOFs, the right sides paired with [`Self::mass_gram`] and
    /// [`Self::divdiv_gram`].
    pub fn moments(
        &self,
        phi: impl Fn(Point2) -> Point2,
        div_phi: impl Fn(Point2) -> f64,
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        let rule = self.quadrature()?;
        let n_free = self.global_of_free.len();
        let mut m = vec![0.0; n_free];
        let mut g = vec![0.0; n_free];
        for k in 0..self.mesh.num_triangles() {
            let map = self.mesh.map(k);
            let dofs = self.space.cell_dofs(k);
            for (&r, &wq) in rule.nodes.iter().zip(&rule.weights) {
                let jac = map.jacobian(r);
                let det = jac.det();
                let w = wq * det;
                let x = map.eval_unchecked(r);
                let fx = phi(x);
                let dx = div_phi(x);
                for (&(v, d), &(gd, sign)) in self.space.basis().eval(r).iter().zip(dofs) {
                    if let Some(fi) = self.free_of_global[gd] {
                        let pv = jac.apply(v) * (sign / det);
                        m[fi] += w * fx.dot(pv);
                        g[fi] += w * dx * (d * sign / det);
                    }
                }
            }
        }
        Ok((m, g))
    }

    fn solve_from_moments(&self, m: &[f64], g: &[f64]) -> Result<Vec<f64>> {
        let cp = cg_consistent(&self.divdiv, g)?;
        let mc = self.mass.matvec(&cp);
        let rhs: Vec<f64> = m.iter().zip(&mc).map(|(a, b)| a - b).collect();
        let y = self.stiffness_factor.solve(&self.zt.matvec(&rhs));
        let zy = self.z.matvec(&y);
        let mut out = vec![0.0; self.space.num_dofs()];
        for (fi, &gd) in self.global_of_free.iter().enumerate() {
            out[gd] = cp[fi] + zy[fi];
        }
        Ok(out)
    }

    /// Projects a physical field with known divergence; returns the full
    /// coefficient vector (constrained DOFs zero).
    pub fn apply(
        &self,
        phi: impl Fn(Point2) -> Point2,
        div_phi: impl Fn(Point2) -> f64,
    ) -> Result<Vec<f64>> {
        let (m, g) = self.moments(phi, div_phi)?;
        self.solve_from_moments(&m, &g)
    }

    /// Projects a field already given by discrete coefficients; the
    /// moments come from the Gram matrices, so a fixed point of this map
    /// is exactly the projection property.
    pub fn apply_to_discrete(&self, coeffs: &[f64]) -> Result<Vec<f64>> {
        let c = self.gather(coeffs);
        let m = self.mass.matvec(&c);
        let g = self.divdiv.matvec(&c);
        self.solve_from_moments(&m, &g)
    }

    /// Splits a discrete field into its L2-orthogonal curl part and the
    /// remainder; the remainder keeps the full divergence.
    pub fn helmholtz_split(&self, coeffs: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let c = self.gather(coeffs);
        let y = self.stiffness_factor.solve(&self.zt.matvec(&self.mass.matvec(&c)));
        let zy = self.z.matvec(&y);
        let mut curl = vec![0.0; self.space.num_dofs()];
        let mut rem = vec![0.0; self.space.num_dofs()];
        for (fi, &gd) in self.global_of_free.iter().enumerate() {
            curl[gd] = zy[fi];
            rem[gd] = c[fi] - zy[fi];
        }
        Ok((curl, rem))
    }

    /// Plain L2 projection of a field, the unconstrained comparison
    /// candidate for the divergence bound: it minimizes `||phi - v||`
    /// alone, so its divergence error can only be worse.
    pub fn l2_projection(&self, phi: impl Fn(Point2) -> Point2) -> Result<Vec<f64>> {
        let (m, _) = self.moments(phi, |_| 0.0)?;
        let c = ldlt_factor(&self.mass)?.solve(&m);
        let mut out = vec![0.0; self.space.num_dofs()];
        for (fi, &gd) in self.global_of_free.iter().enumerate() {
            out[gd] = c[fi];
        }
        Ok(out)
    }

    /// Full coefficient vector of the divergence-free field with the
    /// given potential coordinates, `sum_m y_m curl(mu_m)`.
    pub fn curl_field(&self, y: &[f64]) -> Vec<f64> {
        let zy = self.z.matvec(y);
        let mut out = vec![0.0; self.space.num_dofs()];
        for (fi, &gd) in self.global_of_free.iter().enumerate() {
            out[gd] = zy[fi];
        }
        out
    }

    /// Restriction of a full coefficient vector to the free DOFs, the
    /// indexing used by the Gram and embedding accessors.
    pub fn gather(&self, full: &[f64]) -> Vec<f64> {
        self.global_of_free.iter().map(|&g| full[g]).collect()
    }
}

/// Plain conjugate gradients for a consistent positive semidefinite
/// system, started at zero so the iterates stay in the range. A right
/// side below the roundoff floor (for example the moments of an exactly
/// divergence-free target) maps to zero instead of feeding CG pure
/// inconsistent noise.
fn cg_consistent(a: &CsrMatrix, b: &[f64]) -> Result<Vec<f64>> {
    let n = b.len();
    let nb = norm(b);
    let max_diag = a.diagonal().iter().fold(0.0f64, |m, &v| m.max(v));
    if nb <= 1e-10 * (1.0 + max_diag) {
        return Ok(vec![0.0; n]);
    }
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut p = r.clone();
    let rs0 = dot(&r, &r);
    let mut rs = rs0;
    let mut best = x.clone();
    let mut best_rs = rs;
    for _ in 0..50 * n.max(100) {
        let ap = a.matvec(&p);
        let pap = dot(&p, &ap);
        if pap <= 0.0 || rs > 1e6 * rs0 {
            break;
        }
        let alpha = rs / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rs_new = dot(&r, &r);
        if rs_new < best_rs {
            best_rs = rs_new;
            best.copy_from_slice(&x);
        }
        if rs_new.sqrt() <= 1e-13 * nb {
            break;
        }
        let beta = rs_new / rs;
        rs = rs_new;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
    }
    let res = a.matvec(&best);
    let rel = b
        .iter()
        .zip(&res)
        .map(|(bi, ri)| (bi - ri) * (bi - ri))
        .sum::<f64>()
        .sqrt()
        / nb;
    if rel > 1e-9 {
        return Err(FoslsError::Solver(format!(
            "constrained projection: divergence solve stalled at relative residual {rel:.2e}"
        )));
    }
    Ok(best)
}
