//! Scalar polynomial bases: modal P_k on the reference triangle and
//! shifted Legendre P_k on the unit interval (for edge traces and
//! multipliers).
//!
//! The triangle basis is the monomial basis orthonormalized against the
//! *area-normalized* inner product <f, g> = 2 int_T f g, so the first
//! function is identically 1 and the physical mass matrix of a mapped
//! basis is |K| times the identity.

use nalgebra::DMatrix;

use crate::{invalid, Result};

/// Supported polynomial degrees for the solver spaces.
pub const MAX_K: usize = 2;

/// Number of P_k functions on a triangle.
pub fn dim_triangle(k: usize) -> usize {
    (k + 1) * (k + 2) / 2
}

/// Monomial exponents of P_k in graded lexicographic order.
pub fn monomial_exponents(k: usize) -> Vec<(u32, u32)> {
    let mut exps = Vec::with_capacity(dim_triangle(k));
    for total in 0..=k as u32 {
        for b in 0..=total {
            exps.push((total - b, b));
        }
    }
    exps
}

/// Exact integral of x^a y^b over the reference triangle: a!b!/(a+b+2)!.
pub fn monomial_integral(a: u32, b: u32) -> f64 {
    let fact = |n: u32| (1..=n as u64).product::<u64>() as f64;
    fact(a) * fact(b) / fact(a + b + 2)
}

/// Modal orthonormal basis of P_k on the reference triangle.
#[derive(Debug, Clone)]
pub struct ScalarBasis {
    pub k: usize,
    exps: Vec<(u32, u32)>,
    /// Row i holds the monomial coefficients of basis function i.
    coeffs: DMatrix<f64>,
}

impl ScalarBasis {
    pub fn new(k: usize) -> Result<Self> {
        if k > MAX_K {
            return Err(invalid(format!("scalar degree {k} unsupported (max {MAX_K})")));
        }
        let exps = monomial_exponents(k);
        let n = exps.len();
        // Gram matrix under <f,g> = 2 int f g, factored G = L L^T; the
        // orthonormal coefficients are the rows of L^{-1}.
        let gram = DMatrix::from_fn(n, n, |i, j| {
            2.0 * monomial_integral(exps[i].0 + exps[j].0, exps[i].1 + exps[j].1)
        });
        let chol = gram
            .cholesky()
            .ok_or_else(|| invalid("monomial Gram matrix not SPD"))?;
        let l_inv = chol
            .l()
            .try_inverse()
            .ok_or_else(|| invalid("singular Cholesky factor"))?;
        Ok(Self { k, exps, coeffs: l_inv })
    }

    pub fn len(&self) -> usize {
        self.exps.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Values of all basis functions at a reference point.
    pub fn eval(&self, p: [f64; 2]) -> Vec<f64> {
        let mono: Vec<f64> = self
            .exps
            .iter()
            .map(|&(a, b)| p[0].powi(a as i32) * p[1].powi(b as i32))
            .collect();
        (0..self.len())
            .map(|i| (0..self.len()).map(|j| self.coeffs[(i, j)] * mono[j]).sum())
            .collect()
    }

    /// Reference gradients of all basis functions at a point.
    pub fn eval_grad(&self, p: [f64; 2]) -> Vec<[f64; 2]> {
        let dmono: Vec<[f64; 2]> = self
            .exps
            .iter()
            .map(|&(a, b)| {
                let dx = if a == 0 {
                    0.0
                } else {
                    a as f64 * p[0].powi(a as i32 - 1) * p[1].powi(b as i32)
                };
                let dy = if b == 0 {
                    0.0
                } else {
                    b as f64 * p[0].powi(a as i32) * p[1].powi(b as i32 - 1)
                };
                [dx, dy]
            })
            .collect();
        (0..self.len())
            .map(|i| {
                let mut g = [0.0, 0.0];
                for j in 0..self.len() {
                    g[0] += self.coeffs[(i, j)] * dmono[j][0];
                    g[1] += self.coeffs[(i, j)] * dmono[j][1];
                }
                g
            })
            .collect()
    }
}

/// Orthonormal shifted Legendre values on [0, 1]: L_q(s) = sqrt(2q+1) P_q(2s-1),
/// orthonormal under int_0^1.
pub fn edge_basis(k: usize, s: f64) -> Vec<f64> {
    let x = 2.0 * s - 1.0;
    let mut vals = Vec::with_capacity(k + 1);
    let mut p0 = 1.0;
    let mut p1 = x;
    for q in 0..=k {
        let pq = match q {
            0 => 1.0,
            1 => x,
            _ => {
                let qf = q as f64;
                let p2 = ((2.0 * qf - 1.0) * x * p1 - (qf - 1.0) * p0) / qf;
                p0 = p1;
                p1 = p2;
                p2
            }
        };
        vals.push((2.0 * q as f64 + 1.0).sqrt() * pq);
    }
    vals
}

/// Number of P_k functions on an edge.
pub fn dim_edge(k: usize) -> usize {
    k + 1
}
