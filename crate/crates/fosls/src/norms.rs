//! Error norms against exact solutions, EOC tables and CSV output.
//!
//! For a discrete pair (phi_h, u_h) and an exact bundle, the report
//! carries the five L2 norms
//!
//! ```text
//! err_u      = |u - u_h|
//! err_gradu  = |grad u - grad u_h|
//! err_phi    = |phi - phi_h|
//! err_divphi = |div phi - div phi_h|
//! err_b      = sqrt(|div e_phi + gamma e_u|^2 + |grad e_u + e_phi|^2)
//! ```
//!
//! where div phi of the exact solution is evaluated through the strong
//! equation as f - gamma u, so no second derivatives of u are needed.
//! Quadrature runs two orders hotter than assembly; on cells that the
//! jump circle of a case may cross, the rule is replaced by the
//! circle-aligned split rule so the discontinuous integrands never get
//! sampled across the interface.
//!
//! Empirical orders of convergence compare consecutive levels against
//! the mesh size,
//!
//! ```text
//! EOC_k = log(e_k / e_{k+1}) / log(h_k / h_{k+1}),
//! ```
//!
//! and the CSV table mirrors one study: one row per level, EOC columns
//! blank on the first row.

use std::io::Write;

use crate::assemble::{Discretization, SolutionPair};
use crate::cases::ManufacturedCase;
use crate::cut::split_by_circle;
use crate::error::{FoslsError, Result};
use crate::quadrature::triangle_rule;

/// Error norms of one solve, plus the level metadata a study row needs.
#[derive(Debug, Clone, Copy)]
pub struct ErrorReport {
    pub h: f64,
    pub dof_total: usize,
    pub dof_u: usize,
    pub dof_phi: usize,
    pub err_u: f64,
    pub err_gradu: f64,
    pub err_phi: f64,
    pub err_divphi: f64,
    pub err_b: f64,
}

/// Computes all error norms at the elevated error-quadrature degree of
/// the discretization's configuration.
pub fn compute_errors(
    disc: &Discretization,
    sol: &SolutionPair,
    case: &ManufacturedCase,
) -> Result<ErrorReport> {
    compute_errors_at_degree(disc, sol, case, disc.config().error_degree())
}

/// Same as [`compute_errors`] with an explicit quadrature degree, used
/// to verify that the default degree is saturated.
pub fn compute_errors_at_degree(
    disc: &Discretization,
    sol: &SolutionPair,
    case: &ManufacturedCase,
    degree: usize,
) -> Result<ErrorReport> {
    if (case.gamma() - disc.config().gamma).abs() > 1e-14 * case.gamma() {
        return Err(FoslsError::Config(format!(
            "case gamma {} does not match discretization gamma {}",
            case.gamma(),
            disc.config().gamma
        )));
    }
    let gamma = case.gamma();
    let mesh = disc.mesh();
    let rule = triangle_rule(degree)?;
    let mut s = [0.0f64; 5];
    let mut accumulate = |k: usize, r: crate::point::Point2, w: f64| {
        let map = mesh.map(k);
        let x = map.eval_unchecked(r);
        let det = map.jacobian(r).det();
        let (uh, guh) = disc.scalar().value_on_cell(mesh, k, r, &sol.u);
        let (ph, dph) = disc.vector().value_on_cell(mesh, k, r, &sol.phi);
        let e_u = case.u(x) - uh;
        let e_g = case.grad_u(x) - guh;
        let e_p = case.phi(x) - ph;
        let e_d = case.div_phi(x) - dph;
        let wd = w * det;
        s[0] += wd * e_u * e_u;
        s[1] += wd * e_g.dot(e_g);
        s[2] += wd * e_p.dot(e_p);
        s[3] += wd * e_d * e_d;
        let b_div = e_d + gamma * e_u;
        let b_grad = e_g + e_p;
        s[4] += wd * (b_div * b_div + b_grad.dot(b_grad));
    };
    for k in 0..mesh.num_triangles() {
        let cut = match case.jump_radius() {
            Some(rho) => disc.possibly_cut(k, rho),
            None => false,
        };
        if cut {
            let split = split_by_circle(mesh.map(k), case.jump_radius().unwrap(), degree);
            for part in [&split.inside, &split.outside] {
                for (&r, &w) in part.nodes.iter().zip(&part.weights) {
                    accumulate(k, r, w);
                }
            }
        } else {
            for (&r, &w) in rule.nodes.iter().zip(&rule.weights) {
                accumulate(k, r, w);
            }
        }
    }
    Ok(ErrorReport {
        h: mesh.mesh_size(),
        dof_total: disc.num_free(),
        dof_u: disc.num_scalar_free(),
        dof_phi: disc.num_vector_free(),
        err_u: s[0].sqrt(),
        err_gradu: s[1].sqrt(),
        err_phi: s[2].sqrt(),
        err_divphi: s[3].sqrt(),
        err_b: s[4].sqrt(),
    })
}

/// Empirical orders of convergence of an error sequence against mesh
/// sizes; entry k compares levels k and k+1.
pub fn eoc(errors: &[f64], h: &[f64]) -> Result<Vec<f64>> {
    if errors.len() != h.len() {
        return Err(FoslsError::Config(format!(
            "eoc needs matching lengths, got {} errors and {} mesh sizes",
            errors.len(),
            h.len()
        )));
    }
    if errors.len() < 2 {
        return Err(FoslsError::Config(
            "eoc needs at least two levels".into(),
        ));
    }
    for &e in errors {
        if !(e > 0.0 && e.is_finite()) {
            return Err(FoslsError::Config(format!(
                "eoc needs positive finite errors, got {e}"
            )));
        }
    }
    for pair in h.windows(2) {
        if !(pair[0] > pair[1] && pair[1] > 0.0) {
            return Err(FoslsError::Config(format!(
                "eoc needs strictly decreasing positive mesh sizes, got {} then {}",
                pair[0], pair[1]
            )));
        }
    }
    Ok(errors
        .windows(2)
        .zip(h.windows(2))
        .map(|(e, hh)| (e[0] / e[1]).ln() / (hh[0] / hh[1]).ln())
        .collect())
}

/// CSV header of a study table.
pub const CSV_HEADER: &str =
    "level,h,dof_total,dof_u,dof_phi,err_u,err_gradu,err_phi,err_divphi,err_b,eoc_u,eoc_gradu,eoc_phi";

/// Writes one study as CSV: a fixed header, one row per level, EOC
/// columns computed between consecutive rows and blank on the first.
/// The fixed-precision formatting makes the output reproducible.
pub fn write_csv<W: Write>(out: &mut W, first_level: usize, reports: &[ErrorReport]) -> Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for (i, r) in reports.iter().enumerate() {
        let eoc_cols = if i == 0 {
            ",,".to_string()
        } else {
            let p = &reports[i - 1];
            let rate = |e0: f64, e1: f64| (e0 / e1).ln() / (p.h / r.h).ln();
            format!(
                "{:.6},{:.6},{:.6}",
                rate(p.err_u, r.err_u),
                rate(p.err_gradu, r.err_gradu),
                rate(p.err_phi, r.err_phi)
            )
        };
        writeln!(
            out,
            "{},{:.16e},{},{},{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}",
            first_level + i,
            r.h,
            r.dof_total,
            r.dof_u,
            r.dof_phi,
            r.err_u,
            r.err_gradu,
            r.err_phi,
            r.err_divphi,
            r.err_b,
            eoc_cols
        )?;
    }
    Ok(())
}
