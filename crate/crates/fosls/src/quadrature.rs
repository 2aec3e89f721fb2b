//! Quadrature on the reference triangle {(0,0), (1,0), (0,1)}.
//!
//! Rules are exact for polynomials up to a requested total degree, have
//! strictly positive weights, and keep every node strictly inside the
//! triangle (element maps are only guaranteed smooth there). Low degrees
//! use the classic symmetric rules; the rest collapse a tensor
//! Gauss-Legendre grid through the Duffy substitution
//! x = xi*(1-eta), y = eta with Jacobian (1-eta).

use crate::error::{FoslsError, Result};
use crate::point::Point2;

/// Largest supported exactness degree.
pub const MAX_DEGREE: usize = 20;

/// Nodes and weights on the reference triangle; weights sum to its area 1/2.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub degree: usize,
    pub nodes: Vec<Point2>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Integrate a function given by its values at the rule nodes.
    pub fn integrate(&self, f: impl Fn(Point2) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&p, &w)| w * f(p))
            .sum()
    }
}

/// Gauss-Legendre nodes and weights on [0, 1], exact to degree 2n-1.
///
/// Computed by Newton iteration on the Legendre recurrence; converges to
/// machine precision in a handful of steps for the sizes used here.
pub fn gauss_legendre_01(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "empty Gauss rule requested");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        // Chebyshev-like initial guess on [-1, 1]
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-15 {
                let (_, d2) = legendre(n, x);
                dp = d2;
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // map [-1, 1] -> [0, 1]
        nodes[n - 1 - i] = 0.5 * (x + 1.0);
        weights[n - 1 - i] = 0.5 * w;
    }
    (nodes, weights)
}

/// Values of P_0..=P_max at x, by the three-term recurrence.
pub fn legendre_values(max: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(max + 1);
    out.push(1.0);
    if max == 0 {
        return out;
    }
    out.push(x);
    for k in 2..=max {
        let kf = k as f64;
        let next = ((2.0 * kf - 1.0) * x * out[k - 1] - (kf - 1.0) * out[k - 2]) / kf;
        out.push(next);
    }
    out
}

/// Value and derivative of the Legendre polynomial P_n at x.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Build a rule exact for all polynomials of total degree <= `degree`.
pub fn triangle_rule(degree: usize) -> Result<QuadratureRule> {
    if degree == 0 || degree > MAX_DEGREE {
        return Err(FoslsError::QuadratureDegree(degree));
    }
    let (nodes, weights) = match degree {
        1 => (vec![Point2::new(1.0 / 3.0, 1.0 / 3.0)], vec![0.5]),
        2 => {
            // midpoints of the medians
            let s = 1.0 / 6.0;
            let t = 2.0 / 3.0;
            (
                vec![
                    Point2::new(s, s),
                    Point2::new(t, s),
                    Point2::new(s, t),
                ],
                vec![s, s, s],
            )
        }
        d => duffy_rule(d),
    };
    Ok(QuadratureRule {
        degree,
        nodes,
        weights,
    })
}

/// Collapsed tensor rule: exact to `degree` because the Duffy substitution
/// turns x^a y^b into xi^a (1-eta)^(a+1) eta^b with a <= degree and
/// (a+1)+b <= degree+1.
fn duffy_rule(degree: usize) -> (Vec<Point2>, Vec<f64>) {
    let n_xi = degree / 2 + 1; // 2n-1 >= degree
    let n_eta = (degree + 1) / 2 + 1; // 2n-1 >= degree+1
    let (xi_n, xi_w) = gauss_legendre_01(n_xi);
    let (eta_n, eta_w) = gauss_legendre_01(n_eta);
    let mut nodes = Vec::with_capacity(n_xi * n_eta);
    let mut weights = Vec::with_capacity(n_xi * n_eta);
    for (&eta, &we) in eta_n.iter().zip(&eta_w) {
        for (&xi, &wx) in xi_n.iter().zip(&xi_w) {
            nodes.push(Point2::new(xi * (1.0 - eta), eta));
            weights.push(wx * we * (1.0 - eta));
        }
    }
    (nodes, weights)
}

/// Exact moment of x^a y^b over the reference triangle: a! b! / (a+b+2)!.
pub fn monomial_moment(a: usize, b: usize) -> f64 {
    factorial(a) * factorial(b) / factorial(a + b + 2)
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}
