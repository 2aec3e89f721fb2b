//! Interface-aligned quadrature for cells crossed by a circle r = rho.
//!
//! The indicator source term jumps across r = 1/2, so a fixed rule on a
//! crossed cell integrates a discontinuous pullback and stalls at low
//! order. This module splits the reference cell along the pulled-back
//! circle and lays composite Gauss rules on each side, restoring spectral
//! accuracy.
//!
//! The construction leans on one structural fact: in Duffy coordinates
//!
//! ```text
//! xhat = xi (1 - eta),   yhat = eta,   (xi, eta) in [0,1]^2,
//! ```
//!
//! every element map here (affine, and the arc-blended rim map, which is
//! `affine + xhat yhat R(yhat)`) is affine in `xi` at fixed `eta`. Hence
//!
//! ```text
//! |F|^2 - rho^2 = |A(eta) + xi B(eta)|^2 - rho^2
//! ```
//!
//! is an exact quadratic in `xi` whose roots locate the interface on each
//! horizontal slice. Slices are grouped into panels on which the root
//! count is constant; panel boundaries come from exact edge-crossing
//! roots plus a scan for tangencies.

use crate::geometry::ElementMap;
use crate::point::Point2;
use crate::quadrature::gauss_legendre_01;

/// Reference nodes and weights for one side of the interface. Weights
/// carry the Duffy factor, so summing `w * ghat(node)` integrates `ghat`
/// over that side's part of the reference triangle.
#[derive(Debug, Clone, Default)]
pub struct PartRule {
    pub nodes: Vec<Point2>,
    pub weights: Vec<f64>,
}

/// Split quadrature for one cell against the circle |x| = rho.
#[derive(Debug, Clone)]
pub struct SplitRule {
    pub inside: PartRule,
    pub outside: PartRule,
}

impl SplitRule {
    /// Integrate a reference-space integrand over one side.
    pub fn integrate(part: &PartRule, mut g: impl FnMut(Point2) -> f64) -> f64 {
        part.nodes.iter().zip(&part.weights).map(|(&r, &w)| w * g(r)).sum()
    }
}

/// Affine-in-xi coefficients of the map along slice `eta`:
/// `F(xi, eta) = a + xi b`.
fn slice_coefficients(map: &ElementMap, eta: f64) -> (Point2, Point2) {
    let a = map.eval_unchecked(Point2::new(0.0, eta));
    let far = map.eval_unchecked(Point2::new(1.0 - eta, eta));
    (a, far - a)
}

/// Roots of `q ξ² + l ξ + c` inside (0, 1), ascending.
fn unit_interval_roots(q: f64, l: f64, c: f64) -> Vec<f64> {
    let scale = q.abs().max(l.abs()).max(c.abs());
    if scale == 0.0 {
        return Vec::new();
    }
    let mut roots = Vec::new();
    if q.abs() < 1e-14 * scale {
        if l.abs() > 1e-14 * scale {
            roots.push(-c / l);
        }
    } else {
        let disc = l * l - 4.0 * q * c;
        if disc > 0.0 {
            let s = disc.sqrt();
            let big = -(l + l.signum() * s) / 2.0;
            if big == 0.0 {
                roots.push(0.0);
            } else {
                roots.push(big / q);
                roots.push(c / big);
            }
        }
    }
    roots.retain(|&r| r > 1e-13 && r < 1.0 - 1e-13);
    roots.sort_by(|x, y| x.partial_cmp(y).unwrap());
    roots
}

fn slice_roots(map: &ElementMap, rho: f64, eta: f64) -> Vec<f64> {
    let (a, b) = slice_coefficients(map, eta);
    unit_interval_roots(b.dot(b), 2.0 * a.dot(b), a.dot(a) - rho * rho)
}

/// Roots eta in (0,1) of `|p + eta q|^2 = rho^2`.
fn segment_crossings(p: Point2, q: Point2, rho: f64) -> Vec<f64> {
    unit_interval_roots(q.dot(q), 2.0 * p.dot(q), p.dot(p) - rho * rho)
}

/// Panel boundaries in eta: exact edge crossings plus scan-located
/// tangencies (slices where the interface enters or leaves the cell
/// without touching the xi = 0 or xi = 1 edge).
fn eta_breakpoints(map: &ElementMap, rho: f64) -> Vec<f64> {
    let mut cuts = Vec::new();
    let v0 = map.eval_unchecked(Point2::new(0.0, 0.0));
    let v1 = map.eval_unchecked(Point2::new(1.0, 0.0));
    let v2 = map.eval_unchecked(Point2::new(0.0, 1.0));
    // xi = 0 edge: v0 -> v2, affine for every supported map
    cuts.extend(segment_crossings(v0, v2 - v0, rho));
    // xi = 1 edge: v1 -> v2; affine cells only (the blended hypotenuse
    // sits on the unit circle, away from any rho < 1)
    if !map.is_curved() {
        cuts.extend(segment_crossings(v1, v2 - v1, rho));
    }

    let scan = 512;
    let mut prev = slice_roots(map, rho, 0.0).len();
    for k in 1..=scan {
        let eta = k as f64 / scan as f64;
        let count = slice_roots(map, rho, eta).len();
        if count != prev {
            let (mut lo, mut hi) = ((k - 1) as f64 / scan as f64, eta);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if slice_roots(map, rho, mid).len() == prev {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            cuts.push(0.5 * (lo + hi));
        }
        prev = count;
    }

    cuts.retain(|&c| c > 1e-12 && c < 1.0 - 1e-12);
    cuts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    cuts.dedup_by(|x, y| (*x - *y).abs() < 1e-11);
    cuts
}

/// Split quadrature for the cell `map` against the circle |x| = rho,
/// accurate to (at least) polynomial degree `degree` per smooth piece.
pub fn split_by_circle(map: &ElementMap, rho: f64, degree: usize) -> SplitRule {
    let n = degree / 2 + 4;
    let (gx, gw) = gauss_legendre_01(n);
    // Off a tangency the segment endpoints move like sqrt(eta_t - eta), so
    // plain Gauss stalls on the panel that ends there. Substituting the
    // smoothstep eta(s) (endpoint derivatives zero) turns every Puiseux
    // sqrt branch at a panel end into an analytic function of s; the eta
    // rule carries more points because the substitution also triples the
    // polynomial degree of smooth integrands.
    let (sx, sw) = gauss_legendre_01(3 * degree / 2 + 6);

    let mut coarse = vec![0.0];
    coarse.extend(eta_breakpoints(map, rho));
    coarse.push(1.0);
    let mut panels = vec![0.0];
    for pair in coarse.windows(2) {
        let parts = ((pair[1] - pair[0]) / 0.125).ceil().max(1.0) as usize;
        for j in 1..=parts {
            panels.push(pair[0] + (pair[1] - pair[0]) * j as f64 / parts as f64);
        }
    }

    let mut inside = PartRule::default();
    let mut outside = PartRule::default();
    for pair in panels.windows(2) {
        let (e0, e1) = (pair[0], pair[1]);
        if e1 - e0 < 1e-13 {
            continue;
        }
        for (s, ws) in sx.iter().zip(&sw) {
            let eta = e0 + (e1 - e0) * s * s * (3.0 - 2.0 * s);
            let w_eta = ws * (e1 - e0) * 6.0 * s * (1.0 - s) * (1.0 - eta);
            let mut stops = vec![0.0];
            stops.extend(slice_roots(map, rho, eta));
            stops.push(1.0);
            for seg in stops.windows(2) {
                let (s0, s1) = (seg[0], seg[1]);
                if s1 - s0 < 1e-13 {
                    continue;
                }
                let mid = Point2::new(0.5 * (s0 + s1) * (1.0 - eta), eta);
                let part = if map.eval_unchecked(mid).norm() < rho {
                    &mut inside
                } else {
                    &mut outside
                };
                for (xq, wq) in gx.iter().zip(&gw) {
                    let xi = s0 + (s1 - s0) * xq;
                    part.nodes.push(Point2::new(xi * (1.0 - eta), eta));
                    part.weights.push(wq * (s1 - s0) * w_eta);
                }
            }
        }
    }
    SplitRule { inside, outside }
}
