//! Gauss-Lobatto-Legendre (GLL) quadrature on `[-1, 1]` and its mapping onto
//! the wall-model interval `[0, h_wm]`.
//!
//! A `Q`-point GLL rule keeps both end points as nodes, places the `Q - 2`
//! interior nodes at the zeros of `L'_{Q-1}` and uses the weights
//! `w_i = 2 / (Q (Q - 1) L_{Q-1}(xi_i)^2)`. The rule is exact for polynomials
//! of degree `<= 2Q - 3`.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::{Arc, Mutex, OnceLock};

use thiserror::Error;

/// Newton step size below which an interior node is accepted.
pub const NODE_TOLERANCE: f64 = 1e-14;

const MAX_NODE_ITERATIONS: usize = 100;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadratureError {
    #[error("GLL rule needs at least 2 points, got {0}")]
    InvalidOrder(usize),
    #[error("node {index} of the {order}-point GLL rule did not converge")]
    NodeNotConverged { order: usize, index: usize },
    #[error("wall-model height must be positive and finite, got {0}")]
    InvalidDomain(f64),
}

/// A GLL node/weight set on the reference interval `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Integrates `f` over `[-1, 1]`.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    /// Barycentric weights of the Lagrange interpolant through the nodes,
    /// scaled so the largest magnitude is one.
    pub fn barycentric_weights(&self) -> Vec<f64> {
        let n = self.nodes.len();
        // Accumulate in log space; products over 500+ factors under/overflow.
        let mut log_mag = vec![0.0; n];
        let mut sign = vec![1.0; n];
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    let d = self.nodes[i] - self.nodes[j];
                    log_mag[i] -= d.abs().ln();
                    if d < 0.0 {
                        sign[i] = -sign[i];
                    }
                }
            }
        }
        let max = log_mag.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        log_mag
            .iter()
            .zip(&sign)
            .map(|(&l, &s)| s * (l - max).exp())
            .collect()
    }

    /// CSV rows `q,index,node,weight` (with header) for cross-checking against
    /// published tables.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("q,index,node,weight\n");
        for (i, (x, w)) in self.nodes.iter().zip(&self.weights).enumerate() {
            let _ = writeln!(out, "{},{},{:.17e},{:.17e}", self.order(), i, x, w);
        }
        out
    }
}

/// Evaluates the barycentric Lagrange interpolant through `(nodes, values)`.
pub fn barycentric_interpolate(nodes: &[f64], bary: &[f64], values: &[f64], x: f64) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for ((&xi, &wi), &fi) in nodes.iter().zip(bary).zip(values) {
        let d = x - xi;
        if d == 0.0 {
            return fi;
        }
        let t = wi / d;
        num += t * fi;
        den += t;
    }
    num / den
}

/// Legendre polynomial `L_n(x)` and its first derivative, by the three-term
/// recurrence.
pub fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let (mut p_prev, mut p) = (1.0, x);
    let (mut d_prev, mut d) = (0.0, 1.0);
    for k in 1..n {
        let kf = k as f64;
        let p_next = ((2.0 * kf + 1.0) * x * p - kf * p_prev) / (kf + 1.0);
        // L'_{k+1} = L'_{k-1} + (2k + 1) L_k
        let d_next = d_prev + (2.0 * kf + 1.0) * p;
        p_prev = p;
        p = p_next;
        d_prev = d;
        d = d_next;
    }
    (p, d)
}

/// Builds the `order_q`-point GLL rule.
pub fn build_gll_rule(order_q: usize) -> Result<QuadratureRule, QuadratureError> {
    if order_q < 2 {
        return Err(QuadratureError::InvalidOrder(order_q));
    }
    let n = order_q - 1; // degree of the Legendre polynomial
    let nf = n as f64;
    let mut nodes = vec![0.0; order_q];
    nodes[0] = -1.0;
    nodes[n] = 1.0;

    // Interior nodes: roots of L'_n. Only the lower half is solved for; the
    // upper half is mirrored so the rule is exactly symmetric.
    let half = order_q / 2;
    for j in 1..half {
        let mut x = -(std::f64::consts::PI * j as f64 / nf).cos();
        let mut converged = false;
        for _ in 0..MAX_NODE_ITERATIONS {
            let (p, dp) = legendre_with_derivative(n, x);
            // (1 - x^2) L''_n = 2x L'_n - n(n + 1) L_n
            let ddp = (2.0 * x * dp - nf * (nf + 1.0) * p) / (1.0 - x * x);
            let step = dp / ddp;
            x -= step;
            if step.abs() <= NODE_TOLERANCE {
                converged = true;
                break;
            }
        }
        if !converged || !(x > -1.0 && x < 0.0 + f64::EPSILON) {
            return Err(QuadratureError::NodeNotConverged {
                order: order_q,
                index: j,
            });
        }
        nodes[j] = x;
        nodes[n - j] = -x;
    }
    if order_q % 2 == 1 {
        nodes[half] = 0.0;
    }

    let scale = 2.0 / (order_q as f64 * nf);
    let weights = nodes
        .iter()
        .map(|&x| {
            let (p, _) = legendre_with_derivative(n, x);
            scale / (p * p)
        })
        .collect();

    Ok(QuadratureRule { nodes, weights })
}

/// Returns the rule for `order_q` from a process-wide cache, building it on
/// first use.
pub fn cached_gll_rule(order_q: usize) -> Result<Arc<QuadratureRule>, QuadratureError> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<QuadratureRule>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(rule) = cache.lock().expect("rule cache poisoned").get(&order_q) {
        return Ok(Arc::clone(rule));
    }
    let rule = Arc::new(build_gll_rule(order_q)?);
    cache
        .lock()
        .expect("rule cache poisoned")
        .entry(order_q)
        .or_insert_with(|| Arc::clone(&rule));
    Ok(rule)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MapKind {
    /// `y = (h/2)(1 + xi)`
    Linear,
    /// `y = h (e^{xi+1} - 1) / (e^2 - 1)`; packs nodes towards the wall.
    Clustered,
}

/// Transformation from the reference interval to `[0, h_wm]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DomainMap {
    pub kind: MapKind,
    pub h_wm: f64,
}

impl DomainMap {
    pub fn new(kind: MapKind, h_wm: f64) -> Result<Self, QuadratureError> {
        if !(h_wm > 0.0 && h_wm.is_finite()) {
            return Err(QuadratureError::InvalidDomain(h_wm));
        }
        Ok(Self { kind, h_wm })
    }

    pub fn linear(h_wm: f64) -> Result<Self, QuadratureError> {
        Self::new(MapKind::Linear, h_wm)
    }

    pub fn clustered(h_wm: f64) -> Result<Self, QuadratureError> {
        Self::new(MapKind::Clustered, h_wm)
    }

    /// Physical coordinate of reference point `xi`.
    pub fn to_physical(&self, xi: f64) -> f64 {
        match self.kind {
            MapKind::Linear => 0.5 * self.h_wm * (1.0 + xi),
            MapKind::Clustered => {
                if xi <= -1.0 {
                    0.0
                } else if xi >= 1.0 {
                    self.h_wm
                } else {
                    self.h_wm * (xi + 1.0).exp_m1() / E2_M1
                }
            }
        }
    }

    /// Inverse of [`DomainMap::to_physical`].
    pub fn to_reference(&self, y: f64) -> f64 {
        match self.kind {
            MapKind::Linear => 2.0 * y / self.h_wm - 1.0,
            MapKind::Clustered => (y * E2_M1 / self.h_wm).ln_1p() - 1.0,
        }
    }

    /// `dy/dxi` at reference point `xi`.
    pub fn jacobian(&self, xi: f64) -> f64 {
        match self.kind {
            MapKind::Linear => 0.5 * self.h_wm,
            MapKind::Clustered => self.h_wm * (xi + 1.0).exp() / E2_M1,
        }
    }
}

const E2_M1: f64 = 6.38905609893065; // e^2 - 1

/// Physical quadrature points and Jacobian-scaled weights for `[0, h_wm]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalQuadrature {
    pub y_points: Vec<f64>,
    pub jacobian_weights: Vec<f64>,
}

impl PhysicalQuadrature {
    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.y_points
            .iter()
            .zip(&self.jacobian_weights)
            .map(|(&y, &w)| w * f(y))
            .sum()
    }

    pub fn len(&self) -> usize {
        self.y_points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y_points.is_empty()
    }
}

pub fn map_to_physical(
    rule: &QuadratureRule,
    dmap: &DomainMap,
) -> Result<PhysicalQuadrature, QuadratureError> {
    if !(dmap.h_wm > 0.0 && dmap.h_wm.is_finite()) {
        return Err(QuadratureError::InvalidDomain(dmap.h_wm));
    }
    let (y_points, jacobian_weights) = rule
        .nodes
        .iter()
        .zip(&rule.weights)
        .map(|(&xi, &w)| (dmap.to_physical(xi), dmap.jacobian(xi) * w))
        .unzip();
    Ok(PhysicalQuadrature {
        y_points,
        jacobian_weights,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn two_and_three_point_rules_closed_form() {
        let r2 = build_gll_rule(2).unwrap();
        assert_eq!(r2.nodes(), &[-1.0, 1.0]);
        assert_relative_eq!(r2.weights()[0], 1.0, epsilon = 1e-15);
        assert_relative_eq!(r2.weights()[1], 1.0, epsilon = 1e-15);

        let r3 = build_gll_rule(3).unwrap();
        assert_eq!(r3.nodes(), &[-1.0, 0.0, 1.0]);
        let expect = [1.0 / 3.0, 4.0 / 3.0, 1.0 / 3.0];
        for (w, e) in r3.weights().iter().zip(expect) {
            assert_relative_eq!(*w, e, epsilon = 1e-15);
        }
    }

    #[test]
    fn four_and_five_point_rules_match_tables() {
        let r4 = build_gll_rule(4).unwrap();
        let s5 = 5f64.sqrt() / 5.0;
        assert_relative_eq!(r4.nodes()[1], -s5, epsilon = 1e-15);
        assert_relative_eq!(r4.weights()[0], 1.0 / 6.0, epsilon = 1e-15);
        assert_relative_eq!(r4.weights()[1], 5.0 / 6.0, epsilon = 1e-15);

        let r5 = build_gll_rule(5).unwrap();
        let s21 = 21f64.sqrt() / 7.0;
        assert_relative_eq!(r5.nodes()[3], s21, epsilon = 1e-15);
        assert_relative_eq!(r5.weights()[1], 49.0 / 90.0, epsilon = 1e-15);
        assert_relative_eq!(r5.weights()[2], 32.0 / 45.0, epsilon = 1e-15);
    }

    #[test]
    fn rejects_order_below_two() {
        assert_eq!(build_gll_rule(1), Err(QuadratureError::InvalidOrder(1)));
        assert_eq!(build_gll_rule(0), Err(QuadratureError::InvalidOrder(0)));
    }

    #[test]
    fn odd_top_degree_monomial_integrates_to_zero() {
        for q in 2..=40 {
            let rule = build_gll_rule(q).unwrap();
            let d = 2 * q as i32 - 3;
            assert!(rule.integrate(|x| x.powi(d)).abs() < 1e-14, "q = {q}");
        }
    }

    #[test]
    fn weights_positive_and_sum_to_two_up_to_512() {
        for q in [2, 7, 64, 200, 256, 333, 512] {
            let rule = build_gll_rule(q).unwrap();
            assert!(rule.weights().iter().all(|&w| w > 0.0), "q = {q}");
            let sum: f64 = rule.weights().iter().sum();
            assert!((sum - 2.0).abs() < 1e-12, "q = {q}, sum = {sum}");
            assert!(rule.nodes().windows(2).all(|p| p[0] < p[1]), "q = {q}");
        }
    }

    #[test]
    fn cache_returns_same_rule() {
        let a = cached_gll_rule(17).unwrap();
        let b = cached_gll_rule(17).unwrap();
        assert!(Arc::ptr_eq(&a, &b));
        assert_eq!(*a, build_gll_rule(17).unwrap());
    }

    #[test]
    fn two_point_maps_hit_the_end_points() {
        let rule = build_gll_rule(2).unwrap();
        let lin = map_to_physical(&rule, &DomainMap::linear(1.0).unwrap()).unwrap();
        assert_eq!(lin.y_points, vec![0.0, 1.0]);
        assert_eq!(lin.jacobian_weights, vec![0.5, 0.5]);
        let clu = map_to_physical(&rule, &DomainMap::clustered(1.0).unwrap()).unwrap();
        assert_eq!(clu.y_points[0], 0.0);
        assert_relative_eq!(clu.y_points[1], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn mapped_rules_integrate_y_exactly_enough() {
        let rule = build_gll_rule(4).unwrap();
        for h in [1.0, 0.1, 3.7] {
            let exact = 0.5 * h * h;
            let lin = map_to_physical(&rule, &DomainMap::linear(h).unwrap()).unwrap();
            assert_relative_eq!(lin.integrate(|y| y), exact, max_relative = 1e-12);
            // The clustered Jacobian is not polynomial: Q = 4 still resolves it
            // to a few parts in 1e3, higher Q converges to the exact value.
            let clu4 = map_to_physical(&rule, &DomainMap::clustered(h).unwrap()).unwrap();
            assert_relative_eq!(clu4.integrate(|y| y), exact, max_relative = 5e-3);
            let rule16 = build_gll_rule(16).unwrap();
            let clu = map_to_physical(&rule16, &DomainMap::clustered(h).unwrap()).unwrap();
            assert_relative_eq!(clu.integrate(|y| y), exact, max_relative = 1e-12);
        }
    }

    #[test]
    fn invalid_domain_rejected() {
        assert_eq!(
            DomainMap::linear(0.0),
            Err(QuadratureError::InvalidDomain(0.0))
        );
        assert!(DomainMap::clustered(-1.0).is_err());
        let rule = build_gll_rule(3).unwrap();
        let bad = DomainMap {
            kind: MapKind::Linear,
            h_wm: -2.0,
        };
        assert!(map_to_physical(&rule, &bad).is_err());
    }

    #[test]
    fn maps_are_monotone_and_invertible() {
        for kind in [MapKind::Linear, MapKind::Clustered] {
            let m = DomainMap::new(kind, 0.3).unwrap();
            assert_eq!(m.to_physical(-1.0), 0.0);
            assert_eq!(m.to_physical(1.0), 0.3);
            let mut prev = -1.0;
            for k in 0..=200 {
                let xi = -1.0 + k as f64 / 100.0;
                let y = m.to_physical(xi);
                assert!(y >= prev);
                prev = y;
                assert!((m.to_reference(y) - xi).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn barycentric_interpolant_reproduces_polynomials() {
        let rule = build_gll_rule(9).unwrap();
        let bary = rule.barycentric_weights();
        let f = |x: f64| 3.0 * x.powi(8) - x.powi(3) + 0.5;
        let vals: Vec<f64> = rule.nodes().iter().map(|&x| f(x)).collect();
        for k in 0..50 {
            let x = -0.98 + 0.04 * k as f64;
            let p = barycentric_interpolate(rule.nodes(), &bary, &vals, x);
            assert!((p - f(x)).abs() < 1e-12);
        }
    }

    #[test]
    fn csv_dump_has_header_and_rows() {
        let csv = build_gll_rule(3).unwrap().to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "q,index,node,weight");
        assert_eq!(lines.len(), 4);
        assert!(lines[2].starts_with("3,1,0.0"));
    }
}
