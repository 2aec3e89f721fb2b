//! Radial reference oracle for the indicator source problem.
//!
//! Solves the boundary value problem
//!
//! ```text
//! -(u'' + u'/r) + gamma u = 1_{r <= 1/2},   u'(1) = 0,   u regular at 0,
//! ```
//!
//! by linear shooting, independently of the Bessel closed form used by
//! the manufactured case. Two initial value problems start at a small
//! radius r0 with series data (the r = 0 coordinate singularity is
//! removable for regular solutions):
//!
//! ```text
//! homogeneous:  w = 1 + gamma r^2 / 4 + O(r^4)
//! particular:   v = -f(0) r^2 / 4 + O(r^4),    v(0) = 0
//! ```
//!
//! Linearity gives u = c w + v with c = -v'(1) / w'(1) enforcing the
//! Neumann condition. Integration restarts at the source jump r = 1/2 so
//! the adaptive stepper never straddles the discontinuity.

use crate::error::{FoslsError, Result};

const JUMP: f64 = 0.5;
const R0: f64 = 1e-6;

fn source(r: f64) -> f64 {
    if r <= JUMP {
        1.0
    } else {
        0.0
    }
}

/// Right-hand side of the first order system (u, u')' = (u', -u'/r + gamma u - f r-side).
fn rhs(gamma: f64, with_source: bool, r: f64, y: [f64; 2]) -> [f64; 2] {
    let f = if with_source { source(r) } else { 0.0 };
    [y[1], -y[1] / r + gamma * y[0] - f]
}

/// One adaptive Dormand-Prince (RK5(4)) integration from ra to rb.
fn integrate(gamma: f64, with_source: bool, mut y: [f64; 2], ra: f64, rb: f64) -> Result<[f64; 2]> {
    // Dormand-Prince coefficients, 5th order solution with embedded 4th
    const A: [[f64; 6]; 6] = [
        [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [
            19372.0 / 6561.0,
            -25360.0 / 2187.0,
            64448.0 / 6561.0,
            -212.0 / 729.0,
            0.0,
            0.0,
        ],
        [
            9017.0 / 3168.0,
            -355.0 / 33.0,
            46732.0 / 5247.0,
            49.0 / 176.0,
            -5103.0 / 18656.0,
            0.0,
        ],
        [
            35.0 / 384.0,
            0.0,
            500.0 / 1113.0,
            125.0 / 192.0,
            -2187.0 / 6784.0,
            11.0 / 84.0,
        ],
    ];
    const C: [f64; 6] = [0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
    const E: [f64; 7] = [
        71.0 / 57600.0,
        0.0,
        -71.0 / 16695.0,
        71.0 / 1920.0,
        -17253.0 / 339200.0,
        22.0 / 525.0,
        -1.0 / 40.0,
    ];

    if rb <= ra {
        return Ok(y);
    }
    let tol = 1e-13;
    let mut r = ra;
    let mut h = (rb - ra).min(1e-3);
    let mut k = [[0.0f64; 2]; 7];
    let mut steps = 0usize;
    while r < rb {
        steps += 1;
        if steps > 2_000_000 {
            return Err(FoslsError::Solver(
                "radial oracle exceeded the step budget".into(),
            ));
        }
        h = h.min(rb - r);
        k[0] = rhs(gamma, with_source, r, y);
        for stage in 0..6 {
            let mut ys = y;
            for (j, kj) in k.iter().enumerate().take(stage + 1) {
                ys[0] += h * A[stage][j] * kj[0];
                ys[1] += h * A[stage][j] * kj[1];
            }
            k[stage + 1] = rhs(gamma, with_source, r + C[stage] * h, ys);
        }
        // the 6th stage row of A is also the 5th order solution weight row
        let mut y5 = y;
        for (j, kj) in k.iter().enumerate().take(6) {
            y5[0] += h * A[5][j] * kj[0];
            y5[1] += h * A[5][j] * kj[1];
        }
        let mut err: f64 = 0.0;
        for i in 0..2 {
            let mut e = 0.0;
            for (j, kj) in k.iter().enumerate() {
                e += E[j] * kj[i];
            }
            let scale = tol * (1.0 + y[i].abs().max(y5[i].abs()));
            err = err.max((h * e / scale).abs());
        }
        if err <= 1.0 {
            r += h;
            y = y5;
        }
        let factor = if err > 0.0 {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        } else {
            5.0
        };
        h = (h * factor).min(rb - ra).max(1e-12);
    }
    Ok(y)
}

/// Solves one IVP from the series start at R0 out to radius r,
/// restarting at the source jump.
fn shoot(gamma: f64, with_source: bool, y0: [f64; 2], r: f64) -> Result<[f64; 2]> {
    if r <= R0 {
        return Ok(y0);
    }
    let mid = integrate(gamma, with_source, y0, R0, r.min(JUMP))?;
    integrate(gamma, with_source, mid, JUMP, r)
}

/// Reference values (u(r), u'(r)) of the indicator source problem at the
/// requested radii, each in (0, 1].
pub fn reference_radial_solution(gamma: f64, radii: &[f64]) -> Result<Vec<(f64, f64)>> {
    if gamma <= 0.0 {
        return Err(FoslsError::Config(format!(
            "radial oracle needs gamma > 0, got {gamma}"
        )));
    }
    // series initial data at R0; the O(r^4) terms are ~1e-24, below roundoff
    let w0 = [1.0 + gamma * R0 * R0 / 4.0, gamma * R0 / 2.0];
    let v0 = [-R0 * R0 / 4.0, -R0 / 2.0];
    let w_end = shoot(gamma, false, w0, 1.0)?;
    let v_end = shoot(gamma, true, v0, 1.0)?;
    if w_end[1].abs() < 1e-300 {
        return Err(FoslsError::Solver(
            "radial oracle: degenerate homogeneous slope".into(),
        ));
    }
    let c = -v_end[1] / w_end[1];
    let mut out = Vec::with_capacity(radii.len());
    for &r in radii {
        if !(0.0..=1.0).contains(&r) {
            return Err(FoslsError::Config(format!(
                "radial oracle radius {r} outside [0, 1]"
            )));
        }
        let rr = r.max(R0);
        let w = shoot(gamma, false, w0, rr)?;
        let v = shoot(gamma, true, v0, rr)?;
        out.push((c * w[0] + v[0], c * w[1] + v[1]));
    }
    Ok(out)
}
