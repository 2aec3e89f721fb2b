//! Assembly and solution of the first-order system least squares
//! formulation of the reaction-diffusion problem on the disk.
//!
//! The second-order problem `-div grad u + gamma u = f` is rewritten with
//! the flux unknown `phi = -grad u`, and the least squares functional of
//! the first-order system is minimized over the discrete pair spaces.
//! That yields the symmetric positive definite variational problem
//!
//! ```text
//! b((phi, u), (psi, v)) = (div phi + gamma u, div psi + gamma v)
//!                       + (grad u + phi, grad v + psi),
//! F((psi, v))           = (f, div psi + gamma v),
//! ```
//!
//! assembled here by pullback quadrature: scalar gradients transform
//! covariantly, vector fields by the contravariant Piola map. Homogeneous
//! boundary conditions are imposed by eliminating constrained DOFs, which
//! keeps the reduced matrix SPD.

use crate::cut::split_by_circle;
use crate::error::{FoslsError, Result};
use crate::geometry::Mesh;
use crate::hdiv::Family;
use crate::lagrange::MAX_SCALAR_DEGREE;
use crate::point::Point2;
use crate::quadrature::{triangle_rule, MAX_DEGREE};
use crate::sparse::{ldlt_factor, norm, pcg_jacobi, CsrMatrix, Triplets};
use crate::space::{ScalarSpace, VectorSpace};

/// Which homogeneous boundary condition closes the first-order system.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BcMode {
    /// `phi . n = 0` on the boundary (natural for `du/dn = 0`).
    Neumann,
    /// `u = 0` on the boundary.
    Dirichlet,
}

/// Parameters of one discrete problem.
#[derive(Debug, Clone, Copy)]
pub struct ProblemConfig {
    pub gamma: f64,
    pub bc: BcMode,
    pub family: Family,
    pub p_s: usize,
    pub p_v: usize,
}

impl ProblemConfig {
    pub fn new(
        gamma: f64,
        bc: BcMode,
        family: Family,
        p_s: usize,
        p_v: usize,
    ) -> Result<ProblemConfig> {
        if !(gamma > 0.0) {
            return Err(FoslsError::Config(format!(
                "reaction coefficient must be positive, got {gamma}"
            )));
        }
        if p_s == 0 || p_s > MAX_SCALAR_DEGREE - 1 {
            return Err(FoslsError::Degree(p_s));
        }
        if p_v == 0 || p_v > 5 {
            return Err(FoslsError::Degree(p_v));
        }
        Ok(ProblemConfig { gamma, bc, family, p_s, p_v })
    }

    /// Assembly over-integrates to keep the curved-map variational crime
    /// below the discretization error.
    pub fn assembly_degree(&self) -> usize {
        (2 * (self.p_s.max(self.p_v) + 3)).min(MAX_DEGREE)
    }

    /// Error norms integrate with two extra orders on top of assembly.
    pub fn error_degree(&self) -> usize {
        (2 * (self.p_s.max(self.p_v) + 5)).min(MAX_DEGREE)
    }
}

/// Assembled SPD system over the free DOFs, ordered vector block first.
#[derive(Debug)]
pub struct FoslsSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SolverReport {
    pub method: &'static str,
    pub iterations: usize,
    pub rel_residual: f64,
}

/// Solution coefficients on the full (constrained DOFs included, zeroed)
/// global index sets of both spaces.
#[derive(Debug, Clone)]
pub struct SolutionPair {
    pub phi: Vec<f64>,
    pub u: Vec<f64>,
    pub report: SolverReport,
}

/// Field values of a solution at one physical point.
#[derive(Debug, Clone, Copy)]
pub struct PointValues {
    pub u: f64,
    pub grad_u: Point2,
    pub phi: Point2,
    pub div_phi: f64,
}

/// Free DOFs above this count switch the solver from the direct
/// factorization to preconditioned CG.
const DIRECT_SOLVER_LIMIT: usize = 50_000;

/// Mesh, spaces and free-DOF numbering for one problem configuration.
#[derive(Debug)]
pub struct Discretization {
    mesh: Mesh,
    config: ProblemConfig,
    vector: VectorSpace,
    scalar: ScalarSpace,
    /// Composite global index ([vector DOFs | scalar DOFs]) -> free index.
    free_of_global: Vec<Option<usize>>,
    global_of_free: Vec<usize>,
    n_vector_free: usize,
}

impl Discretization {
    pub fn new(mesh: Mesh, config: ProblemConfig) -> Result<Discretization> {
        let vector = VectorSpace::new(
            &mesh,
            config.family,
            config.p_v,
            config.bc == BcMode::Neumann,
        )?;
        let scalar = ScalarSpace::new(&mesh, config.p_s, config.bc == BcMode::Dirichlet)?;

        let nv = vector.num_dofs();
        let ns = scalar.num_dofs();
        let mut free_of_global = vec![None; nv + ns];
        let mut global_of_free = Vec::new();
        for g in 0..nv {
            if !vector.is_constrained(g) {
                free_of_global[g] = Some(global_of_free.len());
                global_of_free.push(g);
            }
        }
        let n_vector_free = global_of_free.len();
        for g in 0..ns {
            if !scalar.is_constrained(g) {
                free_of_global[nv + g] = Some(global_of_free.len());
                global_of_free.push(nv + g);
            }
        }

        Ok(Discretization {
            mesh,
            config,
            vector,
            scalar,
            free_of_global,
            global_of_free,
            n_vector_free,
        })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn config(&self) -> &ProblemConfig {
        &self.config
    }

    pub fn vector(&self) -> &VectorSpace {
        &self.vector
    }

    pub fn scalar(&self) -> &ScalarSpace {
        &self.scalar
    }

    pub fn num_free(&self) -> usize {
        self.global_of_free.len()
    }

    pub fn num_vector_free(&self) -> usize {
        self.n_vector_free
    }

    pub fn num_scalar_free(&self) -> usize {
        self.num_free() - self.n_vector_free
    }

    /// Assemble matrix and load. `jump_radius` marks a circle across which
    /// `f` is discontinuous; load integration on crossed cells then uses
    /// interface-aligned split rules.
    pub fn assemble(
        &self,
        f: impl Fn(Point2) -> f64,
        jump_radius: Option<f64>,
    ) -> Result<FoslsSystem> {
        let gamma = self.config.gamma;
        let rule = triangle_rule(self.config.assembly_degree())?;
        let nq = rule.nodes.len();
        let vb = self.vector.basis();
        let sb = self.scalar.basis();
        let nv = vb.dim();
        let ns = sb.num_nodes();
        let vector_tab: Vec<Vec<(Point2, f64)>> =
            rule.nodes.iter().map(|&r| vb.eval(r)).collect();
        let scalar_tab: Vec<Vec<(f64, Point2)>> =
            rule.nodes.iter().map(|&r| sb.eval_with_grad(r)).collect();

        let n_free = self.num_free();
        let mut trip = Triplets::new(n_free, n_free);
        let mut rhs = vec![0.0; n_free];

        // physical basis data at one quadrature node
        let mut pval = vec![Point2::new(0.0, 0.0); nv];
        let mut pdiv = vec![0.0; nv];
        let mut sval = vec![0.0; ns];
        let mut sgrad = vec![Point2::new(0.0, 0.0); ns];
        let mut avv = vec![0.0; nv * nv];
        let mut avs = vec![0.0; nv * ns];
        let mut ass = vec![0.0; ns * ns];
        let mut fv = vec![0.0; nv];
        let mut fs = vec![0.0; ns];

        for k in 0..self.mesh.num_triangles() {
            let map = self.mesh.map(k);
            let vdofs = self.vector.cell_dofs(k);
            let sdofs = self.scalar.cell_dofs(k);
            avv.fill(0.0);
            avs.fill(0.0);
            ass.fill(0.0);
            fv.fill(0.0);
            fs.fill(0.0);

            let load_rule = match jump_radius {
                Some(rho) if self.possibly_cut(k, rho) => {
                    Some(split_by_circle(map, rho, self.config.assembly_degree()))
                }
                _ => None,
            };

            for q in 0..nq {
                let r = rule.nodes[q];
                let jac = map.jacobian(r);
                let det = jac.det();
                debug_assert!(det > 0.0, "negative Jacobian on cell {k}");
                let w = rule.weights[q] * det;
                let inv_t = jac.inverse().transpose();
                for (i, &(v, d)) in vector_tab[q].iter().enumerate() {
                    let sign = vdofs[i].1;
                    pval[i] = jac.apply(v) * (sign / det);
                    pdiv[i] = d * sign / det;
                }
                for (a, &(v, g)) in scalar_tab[q].iter().enumerate() {
                    sval[a] = v;
                    sgrad[a] = inv_t.apply(g);
                }
                for i in 0..nv {
                    for j in i..nv {
                        avv[i * nv + j] +=
                            w * (pdiv[i] * pdiv[j] + pval[i].dot(pval[j]));
                    }
                    for a in 0..ns {
                        avs[i * ns + a] +=
                            w * (pdiv[i] * gamma * sval[a] + pval[i].dot(sgrad[a]));
                    }
                }
                for a in 0..ns {
                    for b in a..ns {
                        ass[a * ns + b] += w
                            * (gamma * gamma * sval[a] * sval[b]
                                + sgrad[a].dot(sgrad[b]));
                    }
                }
                if load_rule.is_none() {
                    let fx = f(map.eval_unchecked(r));
                    for i in 0..nv {
                        fv[i] += w * fx * pdiv[i];
                    }
                    for a in 0..ns {
                        fs[a] += w * fx * gamma * sval[a];
                    }
                }
            }

            if let Some(split) = &load_rule {
                for part in [&split.inside, &split.outside] {
                    for (&r, &wq) in part.nodes.iter().zip(&part.weights) {
                        let jac = map.jacobian(r);
                        let det = jac.det();
                        let w = wq * det;
                        let fx = f(map.eval_unchecked(r));
                        if fx == 0.0 {
                            continue;
                        }
                        for (i, (_, d)) in vb.eval(r).into_iter().enumerate() {
                            fv[i] += w * fx * d * vdofs[i].1 / det;
                        }
                        for (a, (v, _)) in sb.eval_with_grad(r).into_iter().enumerate() {
                            fs[a] += w * fx * gamma * v;
                        }
                    }
                }
            }

            // scatter, mirroring the upper triangles of the diagonal blocks
            let nvd = self.vector.num_dofs();
            for i in 0..nv {
                let Some(fi) = self.free_of_global[vdofs[i].0] else { continue };
                rhs[fi] += fv[i];
                for j in i..nv {
                    if let Some(fj) = self.free_of_global[vdofs[j].0] {
                        trip.push(fi, fj, avv[i * nv + j]);
                        if fi != fj {
                            trip.push(fj, fi, avv[i * nv + j]);
                        }
                    }
                }
                for a in 0..ns {
                    if let Some(fa) = self.free_of_global[nvd + sdofs[a]] {
                        trip.push(fi, fa, avs[i * ns + a]);
                        trip.push(fa, fi, avs[i * ns + a]);
                    }
                }
            }
            for a in 0..ns {
                let Some(fa) = self.free_of_global[nvd + sdofs[a]] else { continue };
                rhs[fa] += fs[a];
                for b in a..ns {
                    if let Some(fb) = self.free_of_global[nvd + sdofs[b]] {
                        trip.push(fa, fb, ass[a * ns + b]);
                        if fa != fb {
                            trip.push(fb, fa, ass[a * ns + b]);
                        }
                    }
                }
            }
        }

        Ok(FoslsSystem { matrix: trip.to_csr(), rhs })
    }

    /// Conservative test whether the circle |x| = rho can intersect cell
    /// `k`: reference-lattice radii widened by the cell diameter.
    pub(crate) fn possibly_cut(&self, k: usize, rho: f64) -> bool {
        let map = self.mesh.map(k);
        let margin = 0.6 * self.mesh.element_diameter(k);
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let n = 5;
        for a in 0..=n {
            for b in 0..=(n - a) {
                let r = Point2::new(a as f64 / n as f64, b as f64 / n as f64);
                let radius = map.eval_unchecked(r).norm();
                lo = lo.min(radius);
                hi = hi.max(radius);
            }
        }
        lo - margin <= rho && rho <= hi + margin
    }

    pub fn solve(&self, system: &FoslsSystem) -> Result<SolutionPair> {
        let n = system.rhs.len();
        let (x, method, iterations) = if n <= DIRECT_SOLVER_LIMIT {
            let factor = ldlt_factor(&system.matrix)?;
            (factor.solve(&system.rhs), "ldlt", 0)
        } else {
            let (x, it, _) = pcg_jacobi(&system.matrix, &system.rhs, 1e-12, 10_000)?;
            (x, "pcg-jacobi", it)
        };
        let residual: Vec<f64> = system
            .matrix
            .matvec(&x)
            .iter()
            .zip(&system.rhs)
            .map(|(ax, b)| ax - b)
            .collect();
        let scale = norm(&system.rhs).max(1e-300);
        let rel_residual = norm(&residual) / scale;
        if rel_residual > 1e-10 {
            return Err(FoslsError::Solver(format!(
                "{method} left relative residual {rel_residual:e} after {iterations} iterations"
            )));
        }

        let mut phi = vec![0.0; self.vector.num_dofs()];
        let mut u = vec![0.0; self.scalar.num_dofs()];
        for (fi, &g) in self.global_of_free.iter().enumerate() {
            if g < phi.len() {
                phi[g] = x[fi];
            } else {
                u[g - phi.len()] = x[fi];
            }
        }
        Ok(SolutionPair {
            phi,
            u,
            report: SolverReport { method, iterations, rel_residual },
        })
    }

    /// Evaluate the discrete pair at physical points.
    pub fn evaluate(&self, sol: &SolutionPair, points: &[Point2]) -> Result<Vec<PointValues>> {
        points
            .iter()
            .map(|&x| {
                let (k, r) = self.mesh.locate(x)?;
                let (u, grad_u) = self.scalar.value_on_cell(&self.mesh, k, r, &sol.u);
                let (phi, div_phi) =
                    self.vector.value_on_cell(&self.mesh, k, r, &sol.phi);
                Ok(PointValues { u, grad_u, phi, div_phi })
            })
            .collect()
    }

    /// The bilinear form `b` between two global coefficient pairs,
    /// integrated with the assembly rule.
    pub fn b_inner(
        &self,
        (phi1, u1): (&[f64], &[f64]),
        (phi2, u2): (&[f64], &[f64]),
    ) -> f64 {
        let gamma = self.config.gamma;
        let rule = triangle_rule(self.config.assembly_degree()).expect("assembly degree");
        let mut acc = 0.0;
        for k in 0..self.mesh.num_triangles() {
            let map = self.mesh.map(k);
            for (&r, &wq) in rule.nodes.iter().zip(&rule.weights) {
                let w = wq * map.jacobian(r).det();
                let (v1, d1) = self.vector.value_on_cell(&self.mesh, k, r, phi1);
                let (s1, g1) = self.scalar.value_on_cell(&self.mesh, k, r, u1);
                let (v2, d2) = self.vector.value_on_cell(&self.mesh, k, r, phi2);
                let (s2, g2) = self.scalar.value_on_cell(&self.mesh, k, r, u2);
                acc += w
                    * ((d1 + gamma * s1) * (d2 + gamma * s2)
                        + (g1 + v1).dot(g2 + v2));
            }
        }
        acc
    }

    /// Squared H1 norm of a global scalar field.
    pub fn h1_norm2(&self, u: &[f64]) -> f64 {
        let rule = triangle_rule(self.config.assembly_degree()).expect("assembly degree");
        let mut acc = 0.0;
        for k in 0..self.mesh.num_triangles() {
            let map = self.mesh.map(k);
            for (&r, &wq) in rule.nodes.iter().zip(&rule.weights) {
                let w = wq * map.jacobian(r).det();
                let (v, g) = self.scalar.value_on_cell(&self.mesh, k, r, u);
                acc += w * (v * v + g.dot(g));
            }
        }
        acc
    }

    /// Squared H(div) norm of a global vector field.
    pub fn hdiv_norm2(&self, phi: &[f64]) -> f64 {
        let rule = triangle_rule(self.config.assembly_degree()).expect("assembly degree");
        let mut acc = 0.0;
        for k in 0..self.mesh.num_triangles() {
            let map = self.mesh.map(k);
            for (&r, &wq) in rule.nodes.iter().zip(&rule.weights) {
                let w = wq * map.jacobian(r).det();
                let (v, d) = self.vector.value_on_cell(&self.mesh, k, r, phi);
                acc += w * (v.dot(v) + d * d);
            }
        }
        acc
    }

    /// Max scaled entry of `F(test) - b(exact, test)` over all free test
    /// functions; near zero when the exact fields satisfy the first-order
    /// system, regardless of mesh or degree.
    pub fn exact_residual(
        &self,
        u: impl Fn(Point2) -> f64,
        grad_u: impl Fn(Point2) -> Point2,
        phi: impl Fn(Point2) -> Point2,
        div_phi: impl Fn(Point2) -> f64,
        f: impl Fn(Point2) -> f64,
    ) -> f64 {
        let gamma = self.config.gamma;
        let rule = triangle_rule(self.config.assembly_degree()).expect("assembly degree");
        let vb = self.vector.basis();
        let sb = self.scalar.basis();
        let nvd = self.vector.num_dofs();
        let mut res = vec![0.0; self.num_free()];
        let mut scale: f64 = 0.0;
        for k in 0..self.mesh.num_triangles() {
            let map = self.mesh.map(k);
            let vdofs = self.vector.cell_dofs(k);
            let sdofs = self.scalar.cell_dofs(k);
            for (&r, &wq) in rule.nodes.iter().zip(&rule.weights) {
                let jac = map.jacobian(r);
                let det = jac.det();
                let w = wq * det;
                let inv_t = jac.inverse().transpose();
                let x = map.eval_unchecked(r);
                let first = div_phi(x) + gamma * u(x) - f(x);
                let second = grad_u(x) + phi(x);
                for (i, (v, d)) in vb.eval(r).into_iter().enumerate() {
                    if let Some(fi) = self.free_of_global[vdofs[i].0] {
                        let sign = vdofs[i].1;
                        let pv = jac.apply(v) * (sign / det);
                        let pd = d * sign / det;
                        let term = w * (first * pd + second.dot(pv));
                        res[fi] -= term;
                        scale = scale.max(w.abs() * (pd.abs() + pv.norm()));
                    }
                }
                for (a, (v, g)) in sb.eval_with_grad(r).into_iter().enumerate() {
                    if let Some(fa) = self.free_of_global[nvd + sdofs[a]] {
                        let pg = inv_t.apply(g);
                        let term = w * (first * gamma * v + second.dot(pg));
                        res[fa] -= term;
                        scale = scale.max(w.abs() * (gamma * v.abs() + pg.norm()));
                    }
                }
            }
        }
        res.iter().fold(0.0f64, |m, &v| m.max(v.abs())) / scale.max(1e-300)
    }
}

impl ScalarSpace {
    /// Global nodal interpolant of a physical scalar field.
    pub fn interpolate(&self, mesh: &Mesh, f: impl Fn(Point2) -> f64) -> Vec<f64> {
        let mut out = vec![0.0; self.num_dofs()];
        for k in 0..mesh.num_triangles() {
            let map = mesh.map(k);
            for (local, &g) in self.cell_dofs(k).iter().enumerate() {
                out[g] = f(map.eval_unchecked(self.basis().nodes()[local]));
            }
        }
        out
    }
}

impl VectorSpace {
    /// Global interpolant of a physical vector field: local DOF
    /// functionals applied to the Piola pullback, written with the
    /// orientation sign (shared edges receive the same value from both
    /// sides because physical flux moments are orientation-consistent).
    pub fn interpolate(&self, mesh: &Mesh, f: impl Fn(Point2) -> Point2 + Copy) -> Vec<f64> {
        let mut out = vec![0.0; self.num_dofs()];
        for k in 0..mesh.num_triangles() {
            let map = mesh.map(k);
            let pullback = |r: Point2| {
                let jac = map.jacobian(r);
                jac.inverse().apply(f(map.eval_unchecked(r))) * jac.det()
            };
            let local = self.basis().dofs(pullback);
            for (i, &(g, sign)) in self.cell_dofs(k).iter().enumerate() {
                out[g] = sign * local[i];
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn config(bc: BcMode, family: Family, p_s: usize, p_v: usize) -> ProblemConfig {
        ProblemConfig::new(1.0, bc, family, p_s, p_v).unwrap()
    }

    fn dense(m: &CsrMatrix) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; m.n_cols]; m.n_rows];
        for r in 0..m.n_rows {
            let (cols, vals) = m.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                out[r][c] = v;
            }
        }
        out
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(ProblemConfig::new(0.0, BcMode::Neumann, Family::RaviartThomas, 1, 1).is_err());
        assert!(ProblemConfig::new(1.0, BcMode::Neumann, Family::RaviartThomas, 0, 1).is_err());
        assert!(ProblemConfig::new(1.0, BcMode::Neumann, Family::RaviartThomas, 1, 6).is_err());
        assert!(ProblemConfig::new(1.0, BcMode::Neumann, Family::RaviartThomas, 6, 1).is_err());
    }

    #[test]
    fn assembled_matrix_is_symmetric_and_spd() {
        let mesh = Mesh::disk(4, 1).unwrap();
        let disc = Discretization::new(
            mesh,
            config(BcMode::Neumann, Family::RaviartThomas, 2, 2),
        )
        .unwrap();
        let sys = disc.assemble(|_| 1.0, None).unwrap();
        let a = dense(&sys.matrix);
        let n = sys.rhs.len();
        let mut max_entry: f64 = 0.0;
        let mut max_asym: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                max_entry = max_entry.max(a[i][j].abs());
                max_asym = max_asym.max((a[i][j] - a[j][i]).abs());
            }
        }
        assert!(max_asym < 1e-12 * max_entry, "asymmetry {max_asym}");
        assert!(ldlt_factor(&sys.matrix).is_ok(), "factorization failed");
    }

    #[test]
    fn constant_pair_energy_is_disk_area() {
        // b((0, 1), (0, 1)) = gamma^2 |disk| = pi at gamma = 1
        let mesh = Mesh::disk(6, 2).unwrap();
        let disc = Discretization::new(
            mesh,
            config(BcMode::Neumann, Family::RaviartThomas, 1, 1),
        )
        .unwrap();
        let ones = vec![1.0; disc.scalar().num_dofs()];
        let zeros = vec![0.0; disc.vector().num_dofs()];
        let b = disc.b_inner((&zeros, &ones), (&zeros, &ones));
        assert!((b - PI).abs() < 1e-10, "b = {b}, err {:.2e}", (b - PI).abs());
    }

    #[test]
    fn half_position_field_energy_converges_to_nine_pi_over_eight() {
        // phi = (x, y)/2: ||div phi||^2 + ||phi||^2 = pi + pi/8. The
        // interpolant is exact on affine cells but not on rim cells (the
        // Piola pullback of a linear field under the arc-blended map is
        // not polynomial), so the energy converges to the analytic value
        // at high order instead of matching it outright.
        let mut errs = Vec::new();
        for level in 1..4 {
            let mesh = Mesh::disk(6, level).unwrap();
            let disc = Discretization::new(
                mesh,
                config(BcMode::Dirichlet, Family::RaviartThomas, 2, 2),
            )
            .unwrap();
            let phi = disc.vector().interpolate(disc.mesh(), |x| x * 0.5);
            let zeros = vec![0.0; disc.scalar().num_dofs()];
            let b = disc.b_inner((&phi, &zeros), (&phi, &zeros));
            errs.push((b - 9.0 * PI / 8.0).abs());
        }
        assert!(errs[2] < 5e-6, "errors {errs:?}");
        assert!(errs[0] > 8.0 * errs[1] && errs[1] > 8.0 * errs[2], "errors {errs:?}");
    }

    #[test]
    fn constants_are_recovered_exactly() {
        let c = 0.7;
        let gamma = 2.0;
        let mesh = Mesh::disk(5, 1).unwrap();
        let disc = Discretization::new(
            mesh,
            ProblemConfig::new(gamma, BcMode::Neumann, Family::RaviartThomas, 1, 1).unwrap(),
        )
        .unwrap();
        let sys = disc.assemble(|_| gamma * c, None).unwrap();
        let sol = disc.solve(&sys).unwrap();
        for &ui in &sol.u {
            assert!((ui - c).abs() < 1e-9, "u coefficient {ui}");
        }
        for (g, &pi) in sol.phi.iter().enumerate() {
            assert!(pi.abs() < 1e-9, "phi dof {g}: {pi}");
        }
        let vals = disc
            .evaluate(&sol, &[Point2::new(0.1, 0.2), Point2::new(-0.5, 0.3)])
            .unwrap();
        for v in vals {
            assert!((v.u - c).abs() < 1e-9);
            assert!(v.phi.norm() < 1e-9);
        }
    }

    #[test]
    fn interpolated_position_field_evaluates_back() {
        let mesh = Mesh::disk(6, 2).unwrap();
        for family in [Family::RaviartThomas, Family::BrezziDouglasMarini] {
            let disc =
                Discretization::new(mesh.clone(), config(BcMode::Dirichlet, family, 1, 1))
                    .unwrap();
            let phi = disc.vector().interpolate(disc.mesh(), |x| x);
            let u = vec![0.0; disc.scalar().num_dofs()];
            let sol = SolutionPair {
                phi,
                u,
                report: SolverReport { method: "none", iterations: 0, rel_residual: 0.0 },
            };
            let x = Point2::new(0.3, 0.4);
            let v = disc.evaluate(&sol, &[x]).unwrap()[0];
            assert!(
                v.phi.dist(x) < 1e-10,
                "{}: {:?} vs {:?}",
                family.name(),
                v.phi,
                x
            );
        }
    }

    #[test]
    fn galerkin_residual_and_b_inner_agree_with_matrix() {
        let gamma = 1.0;
        let mesh = Mesh::disk(4, 1).unwrap();
        let disc = Discretization::new(
            mesh,
            ProblemConfig::new(gamma, BcMode::Dirichlet, Family::BrezziDouglasMarini, 2, 2)
                .unwrap(),
        )
        .unwrap();
        let f = move |x: Point2| 4.0 + gamma * (1.0 - x.dot(x));
        let sys = disc.assemble(f, None).unwrap();
        let sol = disc.solve(&sys).unwrap();
        assert!(sol.report.rel_residual < 1e-10);

        // pack the solution back into free coordinates
        let nvd = disc.vector().num_dofs();
        let x_free: Vec<f64> = disc
            .global_of_free
            .iter()
            .map(|&g| if g < nvd { sol.phi[g] } else { sol.u[g - nvd] })
            .collect();
        // a random discrete pair, constrained DOFs zero
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let w_free: Vec<f64> = (0..disc.num_free()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut w_phi = vec![0.0; nvd];
        let mut w_u = vec![0.0; disc.scalar().num_dofs()];
        for (fi, &g) in disc.global_of_free.iter().enumerate() {
            if g < nvd {
                w_phi[g] = w_free[fi];
            } else {
                w_u[g - nvd] = w_free[fi];
            }
        }
        // b(x, w) computed by quadrature matches x^T A w from assembly
        let through_matrix = crate::sparse::dot(&sys.matrix.matvec(&w_free), &x_free);
        let through_quadrature = disc.b_inner((&sol.phi, &sol.u), (&w_phi, &w_u));
        assert!(
            (through_matrix - through_quadrature).abs()
                < 1e-11 * through_matrix.abs().max(1.0),
            "{through_matrix} vs {through_quadrature}"
        );
    }

    #[test]
    fn norm_equivalence_upper_bound_holds() {
        for gamma in [1.0, 3.0] {
            let mesh = Mesh::disk(4, 1).unwrap();
            let disc = Discretization::new(
                mesh,
                ProblemConfig::new(gamma, BcMode::Neumann, Family::RaviartThomas, 2, 2)
                    .unwrap(),
            )
            .unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(11);
            for trial in 0..20 {
                let phi: Vec<f64> = (0..disc.vector().num_dofs())
                    .map(|_| rng.gen_range(-1.0..1.0))
                    .collect();
                let u: Vec<f64> = (0..disc.scalar().num_dofs())
                    .map(|_| rng.gen_range(-1.0..1.0))
                    .collect();
                let b = disc.b_inner((&phi, &u), (&phi, &u));
                let bound = 2.0
                    * gamma.powi(2).max(1.0)
                    * (disc.h1_norm2(&u) + disc.hdiv_norm2(&phi));
                assert!(
                    b <= bound + 1e-9,
                    "gamma {gamma} trial {trial}: b {b} > bound {bound}"
                );
            }
        }
    }

    #[test]
    fn exact_solution_annihilates_the_residual_functional() {
        let gamma = 1.5;
        let mesh = Mesh::disk(5, 1).unwrap();
        let disc = Discretization::new(
            mesh,
            ProblemConfig::new(gamma, BcMode::Dirichlet, Family::RaviartThomas, 3, 2).unwrap(),
        )
        .unwrap();
        // u = 1 - r^2, phi = -grad u = (2x, 2y), div phi = 4
        let res = disc.exact_residual(
            |x| 1.0 - x.dot(x),
            |x| -x * 2.0,
            |x| x * 2.0,
            |_| 4.0,
            move |x| 4.0 + gamma * (1.0 - x.dot(x)),
        );
        assert!(res < 1e-10, "scaled residual {res}");
    }

    #[test]
    fn smoke_problem_point_error_decreases_under_refinement() {
        // u = 1 - r^2 with Dirichlet data: representable on affine cells
        // for p_s >= 2 but not on rim cells, so point errors shrink fast
        // with level instead of vanishing.
        let gamma = 1.0;
        let mut errs = Vec::new();
        for level in 1..5 {
            let mesh = Mesh::disk(4, level).unwrap();
            let disc = Discretization::new(
                mesh,
                config(BcMode::Dirichlet, Family::RaviartThomas, 2, 2),
            )
            .unwrap();
            let sys =
                disc.assemble(move |x| 4.0 + gamma * (1.0 - x.dot(x)), None).unwrap();
            let sol = disc.solve(&sys).unwrap();
            let v = disc.evaluate(&sol, &[Point2::new(0.0, 0.0)]).unwrap()[0];
            errs.push((v.u - 1.0).abs());
        }
        for pair in errs.windows(2) {
            assert!(pair[1] < pair[0] / 4.0, "errors {errs:?}");
        }
        assert!(errs[3] < 1e-7, "errors {errs:?}");
    }

    #[test]
    fn pcg_and_direct_paths_agree() {
        let mesh = Mesh::disk(4, 1).unwrap();
        let disc = Discretization::new(
            mesh,
            config(BcMode::Neumann, Family::RaviartThomas, 1, 1),
        )
        .unwrap();
        let sys = disc.assemble(|x| x.x + 2.0, None).unwrap();
        let direct = disc.solve(&sys).unwrap();
        assert_eq!(direct.report.method, "ldlt");
        let (iterative, _, _) = pcg_jacobi(&sys.matrix, &sys.rhs, 1e-13, 10_000).unwrap();
        let nvd = disc.vector().num_dofs();
        for (fi, &g) in disc.global_of_free.iter().enumerate() {
            let d = if g < nvd { direct.phi[g] } else { direct.u[g - nvd] };
            assert!((d - iterative[fi]).abs() < 1e-8);
        }
    }

    #[test]
    fn dirichlet_mode_constrains_the_scalar_boundary() {
        let mesh = Mesh::disk(4, 1).unwrap();
        let nb = mesh.num_boundary_edges();
        let nv: usize = (0..mesh.num_vertices())
            .filter(|&v| mesh.is_boundary_vertex(v))
            .count();
        let disc =
            Discretization::new(mesh, config(BcMode::Dirichlet, Family::RaviartThomas, 2, 1))
                .unwrap();
        // p_s = 2: one node per boundary vertex and one per boundary edge
        assert_eq!(
            disc.num_scalar_free(),
            disc.scalar().num_dofs() - nv - nb
        );
        assert_eq!(disc.num_vector_free(), disc.vector().num_dofs());
    }
}
