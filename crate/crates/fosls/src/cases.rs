//! Manufactured solutions of -Delta u + gamma u = f on the unit disk.
//!
//! Three exact-solution bundles drive the convergence studies:
//!
//! ```text
//! smooth:          u = cos(2 pi r^2), Neumann, C-infinity regular
//! dirichlet-smoke: u = 1 - r^2, homogeneous Dirichlet, polynomial
//! indicator:       f = 1_{r <= 1/2}, Neumann, u in H^{5/2 - eps} only
//! ```
//!
//! The indicator case is radial, so the equation reduces to the ODE
//!
//! ```text
//! -(u'' + u'/r) + gamma u = 1_{r <= 1/2},   u'(1) = 0,
//! ```
//!
//! solved in closed form with modified Bessel functions: the inner branch
//! is 1/gamma + A I0(chi r) and the outer branch B I0(chi r) + C K0(chi r)
//! with chi = sqrt(gamma), where A, B, C come from C1 matching at r = 1/2
//! plus the Neumann condition. An independent adaptive ODE shooting oracle
//! cross-checks the closed form in the tests.
//!
//! Each bundle carries its reaction coefficient, boundary-condition mode,
//! Sobolev regularity exponent used in rate predictions, and the jump
//! radius (if any) on which integrands lose smoothness.

use std::f64::consts::PI;

use crate::assemble::BcMode;
use crate::bessel::{bessel_i0, bessel_i1, bessel_k0, bessel_k1};
use crate::error::{FoslsError, Result};
use crate::point::Point2;

type ScalarFn = Box<dyn Fn(Point2) -> f64>;
type VectorFn = Box<dyn Fn(Point2) -> Point2>;

/// Exact-solution bundle: callbacks plus the metadata the study harness
/// needs to pick boundary conditions and predict convergence rates.
pub struct ManufacturedCase {
    name: &'static str,
    gamma: f64,
    bc: BcMode,
    /// Limiting Sobolev exponent s with u in H^{s + regularity shift};
    /// infinity for smooth fields, 1/2 for the indicator case (which sits
    /// in H^{5/2 - eps} for every eps > 0).
    regularity: f64,
    jump_radius: Option<f64>,
    u_fn: ScalarFn,
    grad_fn: VectorFn,
    f_fn: ScalarFn,
}

impl ManufacturedCase {
    /// Builds a bundle from user-supplied callbacks. The caller promises
    /// that grad_u differentiates u and that f = -Delta u + gamma u.
    #[allow(clippy::too_many_arguments)]
    pub fn from_callbacks(
        name: &'static str,
        gamma: f64,
        bc: BcMode,
        regularity: f64,
        jump_radius: Option<f64>,
        u: impl Fn(Point2) -> f64 + 'static,
        grad_u: impl Fn(Point2) -> Point2 + 'static,
        f: impl Fn(Point2) -> f64 + 'static,
    ) -> Result<ManufacturedCase> {
        check_gamma(gamma)?;
        Ok(ManufacturedCase {
            name,
            gamma,
            bc,
            regularity,
            jump_radius,
            u_fn: Box::new(u),
            grad_fn: Box::new(grad_u),
            f_fn: Box::new(f),
        })
    }

    pub fn name(&self) -> &'static str {
        self.name
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn bc(&self) -> BcMode {
        self.bc
    }

    pub fn regularity(&self) -> f64 {
        self.regularity
    }

    /// Radius of the circle where f jumps, if the case has one.
    pub fn jump_radius(&self) -> Option<f64> {
        self.jump_radius
    }

    pub fn u(&self, x: Point2) -> f64 {
        (self.u_fn)(x)
    }

    pub fn grad_u(&self, x: Point2) -> Point2 {
        (self.grad_fn)(x)
    }

    /// Position flux phi = -grad u, as a wrapper so the identity is exact.
    pub fn phi(&self, x: Point2) -> Point2 {
        -(self.grad_fn)(x)
    }

    pub fn f(&self, x: Point2) -> f64 {
        (self.f_fn)(x)
    }

    /// div phi = f - gamma u, read off the strong equation.
    pub fn div_phi(&self, x: Point2) -> f64 {
        (self.f_fn)(x) - self.gamma * (self.u_fn)(x)
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma.is_finite() {
        Ok(())
    } else {
        Err(FoslsError::Config(format!(
            "manufactured cases need a positive finite gamma, got {gamma}"
        )))
    }
}

/// u = cos(2 pi r^2) with exactly vanishing normal derivative on r = 1.
pub fn smooth_case(gamma: f64) -> Result<ManufacturedCase> {
    check_gamma(gamma)?;
    Ok(ManufacturedCase {
        name: "smooth",
        gamma,
        bc: BcMode::Neumann,
        regularity: f64::INFINITY,
        jump_radius: None,
        u_fn: Box::new(|x| (2.0 * PI * x.dot(x)).cos()),
        grad_fn: Box::new(|x| x * (-4.0 * PI * (2.0 * PI * x.dot(x)).sin())),
        f_fn: Box::new(move |x| {
            let s = 2.0 * PI * x.dot(x);
            8.0 * PI * s.sin() + 16.0 * PI * PI * x.dot(x) * s.cos() + gamma * s.cos()
        }),
    })
}

/// u = 1 - r^2, the polynomial Dirichlet smoke field (f = 4 + gamma u).
pub fn dirichlet_smoke_case(gamma: f64) -> Result<ManufacturedCase> {
    check_gamma(gamma)?;
    Ok(ManufacturedCase {
        name: "dirichlet-smoke",
        gamma,
        bc: BcMode::Dirichlet,
        regularity: f64::INFINITY,
        jump_radius: None,
        u_fn: Box::new(|x| 1.0 - x.dot(x)),
        grad_fn: Box::new(|x| x * -2.0),
        f_fn: Box::new(move |x| 4.0 + gamma * (1.0 - x.dot(x))),
    })
}

/// Radial solution for f = 1_{r <= 1/2} via the Bessel closed form.
pub fn indicator_case(gamma: f64) -> Result<ManufacturedCase> {
    check_gamma(gamma)?;
    let chi = gamma.sqrt();
    let s = 0.5 * chi;
    // C1 matching at r = 1/2 plus u'(1) = 0, unknowns (A, B, C); the chi
    // factor of the slope condition is divided out of the second row
    let m = nalgebra::Matrix3::new(
        bessel_i0(s),
        -bessel_i0(s),
        -bessel_k0(s),
        bessel_i1(s),
        -bessel_i1(s),
        bessel_k1(s),
        0.0,
        bessel_i1(chi),
        -bessel_k1(chi),
    );
    let rhs = nalgebra::Vector3::new(-1.0 / gamma, 0.0, 0.0);
    let abc = m.lu().solve(&rhs).ok_or_else(|| {
        FoslsError::Solver("indicator case: singular Bessel matching system".into())
    })?;
    let (a, b, c) = (abc[0], abc[1], abc[2]);

    let u_radial = move |r: f64| {
        if r <= 0.5 {
            1.0 / gamma + a * bessel_i0(chi * r)
        } else {
            b * bessel_i0(chi * r) + c * bessel_k0(chi * r)
        }
    };
    let du_radial = move |r: f64| {
        if r <= 0.5 {
            a * chi * bessel_i1(chi * r)
        } else {
            chi * (b * bessel_i1(chi * r) - c * bessel_k1(chi * r))
        }
    };
    Ok(ManufacturedCase {
        name: "indicator",
        gamma,
        bc: BcMode::Neumann,
        regularity: 0.5,
        jump_radius: Some(0.5),
        u_fn: Box::new(move |x| u_radial(x.norm())),
        grad_fn: Box::new(move |x| {
            let r = x.norm();
            if r < 1e-12 {
                // du/dr ~ A chi^2 r / 2, so grad u -> 0 at the origin
                Point2::new(0.0, 0.0)
            } else {
                x * (du_radial(r) / r)
            }
        }),
        f_fn: Box::new(|x| if x.norm() <= 0.5 { 1.0 } else { 0.0 }),
    })
}

/// Lookup by the study-configuration name.
pub fn case_by_name(name: &str, gamma: f64) -> Result<ManufacturedCase> {
    match name {
        "smooth" => smooth_case(gamma),
        "indicator" => indicator_case(gamma),
        "dirichlet-smoke" => dirichlet_smoke_case(gamma),
        other => Err(FoslsError::Config(format!(
            "unknown case '{other}' (expected smooth, indicator, or dirichlet-smoke)"
        ))),
    }
}
