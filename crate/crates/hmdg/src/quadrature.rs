//! Quadrature rules on the reference triangle and the unit interval.
//!
//! Triangle rules are collapsed tensor products of Gauss-Legendre rules:
//! for a requested exactness degree `d` the rule integrates every
//! bivariate polynomial of total degree <= d exactly on the reference
//! triangle {x >= 0, y >= 0, x + y <= 1}. Edge rules are plain
//! Gauss-Legendre on [0, 1].

use crate::{invalid, Result};

/// Highest polynomial degree the rule factory supports.
pub const MAX_DEGREE: usize = 10;

/// Points and weights on a reference domain.
///
/// For triangle rules the weights sum to 1/2 (reference area), for edge
/// rules to 1 (unit interval).
#[derive(Debug, Clone)]
pub struct QuadRule {
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
    /// Declared polynomial exactness degree.
    pub degree: usize,
}

impl QuadRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// A 1D rule on [0, 1]; `points[i][1]` is unused but kept so both rule
/// kinds share evaluation plumbing.
pub type EdgeRule = QuadRule;

/// Gauss-Legendre nodes/weights on [-1, 1] by Newton iteration on the
/// Legendre recurrence.
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut xs = vec![0.0; n];
    let mut ws = vec![0.0; n];
    for i in 0..n {
        // Chebyshev initial guess.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_with_derivative(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(n, x);
        xs[i] = x;
        ws[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    xs.reverse();
    ws.reverse();
    (xs, ws)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
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
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Gauss-Legendre rule on [0, 1] exact for polynomials of degree `degree`.
pub fn edge(degree: usize) -> Result<EdgeRule> {
    if degree == 0 || degree > 2 * MAX_DEGREE + 1 {
        return Err(invalid(format!("unsupported edge quadrature degree {degree}")));
    }
    let n = degree / 2 + 1;
    let (xs, ws) = gauss_legendre(n);
    Ok(QuadRule {
        points: xs.iter().map(|&x| [0.5 * (x + 1.0), 0.0]).collect(),
        weights: ws.iter().map(|&w| 0.5 * w).collect(),
        degree,
    })
}

/// Rule on the reference triangle exact for total degree `degree`.
///
/// Built from the identity
///   int_T f = int_0^1 int_0^1 f(xi (1 - eta), eta) (1 - eta) dxi deta,
/// so a monomial x^a y^b needs xi-degree a and eta-degree a + b + 1; both
/// directions use Gauss-Legendre of sufficient order. All points are
/// strictly interior and all weights positive.
pub fn triangle(degree: usize) -> Result<QuadRule> {
    if degree == 0 || degree > MAX_DEGREE {
        return Err(invalid(format!(
            "unsupported triangle quadrature degree {degree} (max {MAX_DEGREE})"
        )));
    }
    let n_xi = degree / 2 + 1; // 2n-1 >= degree
    let n_eta = (degree + 1) / 2 + 1; // 2n-1 >= degree + 1
    let (xi, wxi) = gauss_legendre(n_xi);
    let (eta, weta) = gauss_legendre(n_eta);
    let mut points = Vec::with_capacity(n_xi * n_eta);
    let mut weights = Vec::with_capacity(n_xi * n_eta);
    for (j, &ej) in eta.iter().enumerate() {
        let e = 0.5 * (ej + 1.0);
        for (i, &xii) in xi.iter().enumerate() {
            let s = 0.5 * (xii + 1.0);
            points.push([s * (1.0 - e), e]);
            weights.push(0.25 * wxi[i] * weta[j] * (1.0 - e));
        }
    }
    Ok(QuadRule { points, weights, degree })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Exact reference-triangle integral of x^a y^b: a! b! / (a + b + 2)!.
    fn exact_monomial(a: u32, b: u32) -> f64 {
        let fact = |n: u32| (1..=n as u64).product::<u64>() as f64;
        fact(a) * fact(b) / fact(a + b + 2)
    }

    #[test]
    fn triangle_rule_integrates_constant() {
        let rule = triangle(2).unwrap();
        let sum: f64 = rule.weights.iter().sum();
        assert!((sum - 0.5).abs() < 1e-15);
    }

    #[test]
    fn triangle_rule_integrates_xy() {
        let rule = triangle(2).unwrap();
        let val: f64 = rule
            .points
            .iter()
            .zip(&rule.weights)
            .map(|(p, w)| w * p[0] * p[1])
            .sum();
        assert!((val - 1.0 / 24.0).abs() < 1e-15, "got {val}");
    }

    #[test]
    fn triangle_rule_integrates_x4_with_degree_4() {
        let rule = triangle(4).unwrap();
        let val: f64 = rule
            .points
            .iter()
            .zip(&rule.weights)
            .map(|(p, w)| w * p[0].powi(4))
            .sum();
        assert!((val - 1.0 / 30.0).abs() < 1e-15, "got {val}");
    }

    #[test]
    fn triangle_rules_exact_for_all_declared_monomials() {
        for degree in 1..=MAX_DEGREE {
            let rule = triangle(degree).unwrap();
            for a in 0..=degree as u32 {
                for b in 0..=(degree as u32 - a) {
                    let val: f64 = rule
                        .points
                        .iter()
                        .zip(&rule.weights)
                        .map(|(p, w)| w * p[0].powi(a as i32) * p[1].powi(b as i32))
                        .sum();
                    let exact = exact_monomial(a, b);
                    assert!(
                        (val - exact).abs() < 1e-14,
                        "degree {degree} monomial x^{a} y^{b}: {val} vs {exact}"
                    );
                }
            }
        }
    }

    #[test]
    fn triangle_points_interior_weights_positive() {
        for degree in 1..=MAX_DEGREE {
            let rule = triangle(degree).unwrap();
            for (p, w) in rule.points.iter().zip(&rule.weights) {
                assert!(*w > 0.0);
                assert!(p[0] > 0.0 && p[1] > 0.0 && p[0] + p[1] < 1.0);
            }
        }
    }

    #[test]
    fn edge_rules_exact_on_unit_interval() {
        for degree in 1..=11usize {
            let rule = edge(degree).unwrap();
            for a in 0..=degree as i32 {
                let val: f64 = rule
                    .points
                    .iter()
                    .zip(&rule.weights)
                    .map(|(p, w)| w * p[0].powi(a))
                    .sum();
                let exact = 1.0 / (a as f64 + 1.0);
                assert!((val - exact).abs() < 1e-14, "degree {degree}, s^{a}");
            }
        }
    }

    #[test]
    fn unsupported_degree_rejected() {
        assert!(triangle(0).is_err());
        assert!(triangle(MAX_DEGREE + 1).is_err());
        assert!(edge(0).is_err());
    }
}
