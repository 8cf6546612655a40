//! Raviart-Thomas vector elements RT_k = [P_k]^2 + x P_k on the
//! reference triangle, k <= 2.
//!
//! The basis is dual to the classical degrees of freedom:
//! - for each edge i and q = 0..k, the moment int_e (v.n_i) L_q(s) ds
//!   against the orthonormal Legendre basis of P_k(e), with the edge
//!   traversed counterclockwise and n_i the outward reference normal;
//! - for k >= 1, interior moments int_K v.(m, 0) and int_K v.(0, m) for
//!   monomials m of degree <= k-1.
//!
//! Duality makes the normal trace on edge i depend only on that edge's
//! k+1 coefficients, which is what lets boundary fluxes be constrained
//! strongly by dropping coefficients.

use nalgebra::DMatrix;

use crate::basis::{edge_basis, monomial_exponents};
use crate::geometry::{ref_edge_point, REF_EDGE_LENGTHS, REF_EDGE_NORMALS};
use crate::quadrature;
use crate::{invalid, Result};

/// Number of RT_k basis functions.
pub fn dim_rt(k: usize) -> usize {
    (k + 1) * (k + 3)
}

/// A raw member of the RT_k spanning set.
#[derive(Debug, Clone, Copy)]
enum Span {
    /// (x^a y^b, 0)
    Ex(u32, u32),
    /// (0, x^a y^b)
    Ey(u32, u32),
    /// (x, y) x^a y^b with a + b = k
    Radial(u32, u32),
}

impl Span {
    fn eval(&self, p: [f64; 2]) -> ([f64; 2], f64) {
        let pow = |x: f64, n: u32| x.powi(n as i32);
        match *self {
            Span::Ex(a, b) => {
                let m = pow(p[0], a) * pow(p[1], b);
                let div = if a == 0 { 0.0 } else { a as f64 * pow(p[0], a - 1) * pow(p[1], b) };
                ([m, 0.0], div)
            }
            Span::Ey(a, b) => {
                let m = pow(p[0], a) * pow(p[1], b);
                let div = if b == 0 { 0.0 } else { b as f64 * pow(p[0], a) * pow(p[1], b - 1) };
                ([0.0, m], div)
            }
            Span::Radial(a, b) => {
                let m = pow(p[0], a) * pow(p[1], b);
                // div((x,y) m) = (a + b + 2) m for homogeneous m.
                ([p[0] * m, p[1] * m], (a + b + 2) as f64 * m)
            }
        }
    }
}

/// RT_k basis on the reference triangle.
#[derive(Debug, Clone)]
pub struct RtBasis {
    pub k: usize,
    span: Vec<Span>,
    /// Column j holds the spanning-set coefficients of basis function j.
    coeffs: DMatrix<f64>,
}

/// Index of the DOF that is moment `q` on edge `e`; interior DOFs follow.
pub fn edge_dof(k: usize, e: usize, q: usize) -> usize {
    e * (k + 1) + q
}

impl RtBasis {
    pub fn new(k: usize) -> Result<Self> {
        if k > 2 {
            return Err(invalid(format!("RT degree {k} unsupported (max 2)")));
        }
        let mut span = Vec::with_capacity(dim_rt(k));
        for &(a, b) in &monomial_exponents(k) {
            span.push(Span::Ex(a, b));
        }
        for &(a, b) in &monomial_exponents(k) {
            span.push(Span::Ey(a, b));
        }
        for b in 0..=k as u32 {
            span.push(Span::Radial(k as u32 - b, b));
        }
        let n = span.len();
        debug_assert_eq!(n, dim_rt(k));

        // DOF matrix D[i][m] = sigma_i(span_m), inverted to get the dual basis.
        let edge_rule = quadrature::edge(2 * k + 3)?;
        let cell_rule = quadrature::triangle((2 * k).max(1))?;
        let mut dof = DMatrix::zeros(n, n);
        for e in 0..3 {
            for (qp, w) in edge_rule.points.iter().zip(&edge_rule.weights) {
                let s = qp[0];
                let p = ref_edge_point(e, s);
                let nrm = REF_EDGE_NORMALS[e];
                let leg = edge_basis(k, s);
                for (m, sp) in span.iter().enumerate() {
                    let (v, _) = sp.eval(p);
                    let vn = v[0] * nrm[0] + v[1] * nrm[1];
                    for q in 0..=k {
                        dof[(edge_dof(k, e, q), m)] += w * REF_EDGE_LENGTHS[e] * vn * leg[q];
                    }
                }
            }
        }
        if k >= 1 {
            let interior = monomial_exponents(k - 1);
            let base = 3 * (k + 1);
            for (qp, w) in cell_rule.points.iter().zip(&cell_rule.weights) {
                for (m, sp) in span.iter().enumerate() {
                    let (v, _) = sp.eval(*qp);
                    for (im, &(a, b)) in interior.iter().enumerate() {
                        let mono = qp[0].powi(a as i32) * qp[1].powi(b as i32);
                        dof[(base + 2 * im, m)] += w * v[0] * mono;
                        dof[(base + 2 * im + 1, m)] += w * v[1] * mono;
                    }
                }
            }
            debug_assert_eq!(base + 2 * interior.len(), n);
        }

        let coeffs = dof
            .lu()
            .try_inverse()
            .ok_or_else(|| invalid("RT DOF matrix is singular"))?;
        Ok(Self { k, span, coeffs })
    }

    pub fn len(&self) -> usize {
        self.span.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Reference values and divergences of all basis functions at a point.
    pub fn eval(&self, p: [f64; 2]) -> (Vec<[f64; 2]>, Vec<f64>) {
        let raw: Vec<([f64; 2], f64)> = self.span.iter().map(|s| s.eval(p)).collect();
        let n = self.len();
        let mut vals = vec![[0.0; 2]; n];
        let mut divs = vec![0.0; n];
        for j in 0..n {
            for m in 0..n {
                let c = self.coeffs[(m, j)];
                if c != 0.0 {
                    vals[j][0] += c * raw[m].0[0];
                    vals[j][1] += c * raw[m].0[1];
                    divs[j] += c * raw[m].1;
                }
            }
        }
        (vals, divs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn dimensions() {
        assert_eq!(dim_rt(0), 3);
        assert_eq!(dim_rt(1), 8);
        assert_eq!(dim_rt(2), 15);
        assert!(RtBasis::new(3).is_err());
    }

    /// Re-apply the DOF functionals to the constructed basis; the result
    /// must be the identity matrix.
    #[test]
    fn dof_matrix_is_identity() {
        for k in 0..=2usize {
            let rt = RtBasis::new(k).unwrap();
            let n = rt.len();
            let edge_rule = quadrature::edge(2 * k + 3).unwrap();
            let cell_rule = quadrature::triangle((2 * k).max(1)).unwrap();
            let mut dof = vec![vec![0.0; n]; n];
            for e in 0..3 {
                for (qp, w) in edge_rule.points.iter().zip(&edge_rule.weights) {
                    let s = qp[0];
                    let p = ref_edge_point(e, s);
                    let (vals, _) = rt.eval(p);
                    let nrm = REF_EDGE_NORMALS[e];
                    let leg = edge_basis(k, s);
                    for j in 0..n {
                        let vn = vals[j][0] * nrm[0] + vals[j][1] * nrm[1];
                        for q in 0..=k {
                            dof[edge_dof(k, e, q)][j] += w * REF_EDGE_LENGTHS[e] * vn * leg[q];
                        }
                    }
                }
            }
            if k >= 1 {
                let interior = monomial_exponents(k - 1);
                let base = 3 * (k + 1);
                for (qp, w) in cell_rule.points.iter().zip(&cell_rule.weights) {
                    let (vals, _) = rt.eval(*qp);
                    for j in 0..n {
                        for (im, &(a, b)) in interior.iter().enumerate() {
                            let mono = qp[0].powi(a as i32) * qp[1].powi(b as i32);
                            dof[base + 2 * im][j] += w * vals[j][0] * mono;
                            dof[base + 2 * im + 1][j] += w * vals[j][1] * mono;
                        }
                    }
                }
            }
            for i in 0..n {
                for j in 0..n {
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!(
                        (dof[i][j] - expect).abs() < 1e-12,
                        "k={k} dof ({i},{j}) = {}",
                        dof[i][j]
                    );
                }
            }
        }
    }

    #[test]
    fn rt0_matches_classical_shape_functions() {
        // With unit-flux edge DOFs the RT0 dual basis is x - V_i, V_i the
        // vertex opposite edge i.
        let rt = RtBasis::new(0).unwrap();
        let verts = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let pts = [[0.25, 0.25], [0.6, 0.2], [0.1, 0.7]];
        for p in pts {
            let (vals, divs) = rt.eval(p);
            for i in 0..3 {
                assert!((vals[i][0] - (p[0] - verts[i][0])).abs() < 1e-12);
                assert!((vals[i][1] - (p[1] - verts[i][1])).abs() < 1e-12);
                assert!((divs[i] - 2.0).abs() < 1e-12, "RT0 divergence constant 2");
            }
        }
    }

    #[test]
    fn divergences_match_finite_differences() {
        let h = 1e-6;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for k in 0..=2usize {
            let rt = RtBasis::new(k).unwrap();
            for _ in 0..4 {
                let x: f64 = rng.gen_range(0.1..0.6);
                let y: f64 = rng.gen_range(0.1..0.35);
                let (_, divs) = rt.eval([x, y]);
                let (vxp, _) = rt.eval([x + h, y]);
                let (vxm, _) = rt.eval([x - h, y]);
                let (vyp, _) = rt.eval([x, y + h]);
                let (vym, _) = rt.eval([x, y - h]);
                for j in 0..rt.len() {
                    let fd = (vxp[j][0] - vxm[j][0]) / (2.0 * h) + (vyp[j][1] - vym[j][1]) / (2.0 * h);
                    let tol = 1e-8 * divs[j].abs().max(1.0);
                    assert!((divs[j] - fd).abs() < tol, "k={k} fn {j}: {} vs {fd}", divs[j]);
                }
            }
        }
    }

    /// The normal trace of every basis function on every reference edge
    /// must lie in P_k(e): its projection onto the Legendre basis of
    /// degree k reproduces it pointwise.
    #[test]
    fn normal_traces_are_degree_k() {
        for k in 0..=2usize {
            let rt = RtBasis::new(k).unwrap();
            let rule = quadrature::edge(2 * k + 5).unwrap();
            for e in 0..3 {
                for j in 0..rt.len() {
                    // Project trace onto P_k(e).
                    let mut proj = vec![0.0; k + 1];
                    for (qp, w) in rule.points.iter().zip(&rule.weights) {
                        let p = ref_edge_point(e, qp[0]);
                        let (vals, _) = rt.eval(p);
                        let nrm = REF_EDGE_NORMALS[e];
                        let vn = vals[j][0] * nrm[0] + vals[j][1] * nrm[1];
                        let leg = edge_basis(k, qp[0]);
                        for q in 0..=k {
                            proj[q] += w * vn * leg[q];
                        }
                    }
                    // Compare pointwise at fresh points.
                    for m in 0..7 {
                        let s = (m as f64 + 0.5) / 7.0;
                        let p = ref_edge_point(e, s);
                        let (vals, _) = rt.eval(p);
                        let nrm = REF_EDGE_NORMALS[e];
                        let vn = vals[j][0] * nrm[0] + vals[j][1] * nrm[1];
                        let leg = edge_basis(k, s);
                        let rec: f64 = (0..=k).map(|q| proj[q] * leg[q]).sum();
                        assert!(
                            (vn - rec).abs() < 1e-11,
                            "k={k} edge {e} fn {j}: trace not in P_k"
                        );
                    }
                }
            }
        }
    }
}
