//! Field storage at quadrature points and DG coefficient fields.
//!
//! Pointwise fields (porosity, coefficients, sources) are stored at every
//! cell-rule point and, separately, at every edge-rule point as seen from
//! each adjacent cell side; DG fields are discontinuous, so their edge
//! traces are genuinely two-valued.

use crate::basis::dim_triangle;
use crate::chemistry;
use crate::context::FemContext;
use crate::{invalid, Result};

/// Scalar values at all cell-rule points and all cell-side edge points.
#[derive(Debug, Clone)]
pub struct QuadField {
    /// `[cell * n_cp + pt]`
    pub vol: Vec<f64>,
    /// `[(cell*3+le) * n_ep + pt]`
    pub edge: Vec<f64>,
}

impl QuadField {
    pub fn from_fn(ctx: &FemContext, f: impl Fn([f64; 2]) -> f64) -> Self {
        let n_ep = ctx.n_edge_pts();
        let vol = ctx.cell_pts.iter().map(|&x| f(x)).collect();
        let mut edge = Vec::with_capacity(ctx.mesh.n_cells() * 3 * n_ep);
        for c in 0..ctx.mesh.n_cells() {
            for le in 0..3 {
                let eid = ctx.mesh.cell_edges[c][le];
                for pt in 0..n_ep {
                    edge.push(f(ctx.edge_pts[eid * n_ep + pt]));
                }
            }
        }
        Self { vol, edge }
    }

    pub fn constant(ctx: &FemContext, v: f64) -> Self {
        Self {
            vol: vec![v; ctx.mesh.n_cells() * ctx.n_cell_pts()],
            edge: vec![v; ctx.mesh.n_cells() * 3 * ctx.n_edge_pts()],
        }
    }

    #[inline]
    pub fn vol_at(&self, ctx: &FemContext, cell: usize, pt: usize) -> f64 {
        self.vol[cell * ctx.n_cell_pts() + pt]
    }

    #[inline]
    pub fn edge_at(&self, ctx: &FemContext, cell: usize, le: usize, pt: usize) -> f64 {
        self.edge[(cell * 3 + le) * ctx.n_edge_pts() + pt]
    }

    /// Applies `f` to every stored value.
    pub fn map_in_place(&mut self, f: impl Fn(f64) -> f64) {
        for v in self.vol.iter_mut().chain(self.edge.iter_mut()) {
            *v = f(*v);
        }
    }

    pub fn zip_with(&mut self, other: &QuadField, f: impl Fn(f64, f64) -> f64) {
        for (a, b) in self.vol.iter_mut().zip(&other.vol) {
            *a = f(*a, *b);
        }
        for (a, b) in self.edge.iter_mut().zip(&other.edge) {
            *a = f(*a, *b);
        }
    }
}

/// Vector values with the same layout as `QuadField`.
#[derive(Debug, Clone)]
pub struct VelocityField {
    pub vol: Vec<[f64; 2]>,
    pub edge: Vec<[f64; 2]>,
}

impl VelocityField {
    pub fn from_fn(ctx: &FemContext, f: impl Fn([f64; 2]) -> [f64; 2]) -> Self {
        let n_ep = ctx.n_edge_pts();
        let vol = ctx.cell_pts.iter().map(|&x| f(x)).collect();
        let mut edge = Vec::with_capacity(ctx.mesh.n_cells() * 3 * n_ep);
        for c in 0..ctx.mesh.n_cells() {
            for le in 0..3 {
                let eid = ctx.mesh.cell_edges[c][le];
                for pt in 0..n_ep {
                    edge.push(f(ctx.edge_pts[eid * n_ep + pt]));
                }
            }
        }
        Self { vol, edge }
    }

    pub fn zero(ctx: &FemContext) -> Self {
        Self {
            vol: vec![[0.0; 2]; ctx.mesh.n_cells() * ctx.n_cell_pts()],
            edge: vec![[0.0; 2]; ctx.mesh.n_cells() * 3 * ctx.n_edge_pts()],
        }
    }

    #[inline]
    pub fn vol_at(&self, ctx: &FemContext, cell: usize, pt: usize) -> [f64; 2] {
        self.vol[cell * ctx.n_cell_pts() + pt]
    }

    #[inline]
    pub fn edge_at(&self, ctx: &FemContext, cell: usize, le: usize, pt: usize) -> [f64; 2] {
        self.edge[(cell * 3 + le) * ctx.n_edge_pts() + pt]
    }
}

/// Pointwise porosity with its frozen initial state and growth-rate field.
///
/// `eta` already contains any capacity scaling; both `phi0` and `eta` may
/// vary in space.
#[derive(Debug, Clone)]
pub struct PorosityField {
    pub phi: QuadField,
    pub phi0: QuadField,
    pub eta: QuadField,
}

impl PorosityField {
    pub fn initial(ctx: &FemContext, phi0: impl Fn([f64; 2]) -> f64, eta: impl Fn([f64; 2]) -> f64) -> Self {
        let phi0_field = QuadField::from_fn(ctx, &phi0);
        let eta_field = QuadField::from_fn(ctx, &eta);
        Self { phi: phi0_field.clone(), phi0: phi0_field, eta: eta_field }
    }

    /// Advances every stored point by the exact exponential update with
    /// the clamped concentration frozen over the step.
    pub fn step(&mut self, cbar: &QuadField, dt: f64) -> Result<()> {
        step_slice(&mut self.phi.vol, &cbar.vol, &self.eta.vol, dt)?;
        step_slice(&mut self.phi.edge, &cbar.edge, &self.eta.edge, dt)?;
        Ok(())
    }

    /// Sourced variant for manufactured runs; no boundedness guarantee.
    pub fn step_with_source(&mut self, cbar: &QuadField, source: &QuadField, dt: f64) {
        for ((phi, c), (eta, g)) in self
            .phi
            .vol
            .iter_mut()
            .zip(&cbar.vol)
            .zip(self.eta.vol.iter().zip(&source.vol))
        {
            *phi = chemistry::porosity_step_with_source(*phi, *c, *g, dt, *eta);
        }
        for ((phi, c), (eta, g)) in self
            .phi
            .edge
            .iter_mut()
            .zip(&cbar.edge)
            .zip(self.eta.edge.iter().zip(&source.edge))
        {
            *phi = chemistry::porosity_step_with_source(*phi, *c, *g, dt, *eta);
        }
    }

    /// Largest violation of the envelope
    /// phi0 <= phi <= 1 - (1 - phi0) exp(-eta t) at accumulated time t;
    /// nonpositive when the bound holds everywhere.
    pub fn bound_violation(&self, t: f64) -> f64 {
        let mut worst = f64::NEG_INFINITY;
        for ((&phi, &phi0), &eta) in self
            .phi
            .vol
            .iter()
            .zip(&self.phi0.vol)
            .chain(self.phi.edge.iter().zip(&self.phi0.edge))
            .zip(self.eta.vol.iter().chain(&self.eta.edge))
        {
            let upper = 1.0 - (1.0 - phi0) * (-eta * t).exp();
            worst = worst.max(phi0 - phi).max(phi - upper);
        }
        worst
    }

    pub fn max(&self) -> f64 {
        self.phi.vol.iter().chain(&self.phi.edge).fold(f64::NEG_INFINITY, |m, &v| m.max(v))
    }
}

fn step_slice(phi: &mut [f64], cbar: &[f64], eta: &[f64], dt: f64) -> Result<()> {
    for ((p, &c), &e) in phi.iter_mut().zip(cbar).zip(eta) {
        *p = chemistry::porosity_step(*p, c, dt, e)?;
    }
    Ok(())
}

/// Discontinuous P_k field: per-cell modal coefficients.
#[derive(Debug, Clone)]
pub struct DGField {
    pub k: usize,
    /// `[cell * n_p + i]`
    pub coeffs: Vec<f64>,
}

impl DGField {
    pub fn zero(n_cells: usize, k: usize) -> Self {
        Self { k, coeffs: vec![0.0; n_cells * dim_triangle(k)] }
    }

    pub fn n_cells(&self) -> usize {
        self.coeffs.len() / dim_triangle(self.k)
    }

    pub fn validate(&self, n_cells: usize) -> Result<()> {
        if self.coeffs.len() != n_cells * dim_triangle(self.k) {
            return Err(invalid("DG coefficient array length mismatch"));
        }
        Ok(())
    }

    /// Elementwise L2 projection of `f`, computed with the context rule.
    /// The basis is orthonormal under the area-normalized measure, so the
    /// projection coefficients are plain weighted averages.
    pub fn project(ctx: &FemContext, k: usize, f: impl Fn([f64; 2]) -> f64) -> Self {
        let tab = ctx.tables(k);
        let n_p = dim_triangle(k);
        let n_cp = ctx.n_cell_pts();
        let mut coeffs = vec![0.0; ctx.mesh.n_cells() * n_p];
        for c in 0..ctx.mesh.n_cells() {
            for pt in 0..n_cp {
                // 2 w and not w/|K|: the rule weights sum to 1/2 on the
                // reference triangle and the basis is orthonormal under
                // the normalized measure.
                let w2 = 2.0 * ctx.cell_rule.weights[pt];
                let fv = f(ctx.cell_pts[c * n_cp + pt]);
                for i in 0..n_p {
                    coeffs[c * n_p + i] += w2 * fv * tab.cell_val[pt * n_p + i];
                }
            }
        }
        Self { k, coeffs }
    }

    /// Values at all cell-rule points.
    pub fn eval_vol(&self, ctx: &FemContext) -> Vec<f64> {
        let tab = ctx.tables(self.k);
        let n_p = dim_triangle(self.k);
        let n_cp = ctx.n_cell_pts();
        let mut out = vec![0.0; self.n_cells() * n_cp];
        for c in 0..self.n_cells() {
            for pt in 0..n_cp {
                let mut acc = 0.0;
                for i in 0..n_p {
                    acc += self.coeffs[c * n_p + i] * tab.cell_val[pt * n_p + i];
                }
                out[c * n_cp + pt] = acc;
            }
        }
        out
    }

    /// Values at cell-side edge points, and the full `QuadField`.
    pub fn eval_quadfield(&self, ctx: &FemContext) -> QuadField {
        let tab = ctx.tables(self.k);
        let n_p = dim_triangle(self.k);
        let n_ep = ctx.n_edge_pts();
        let vol = self.eval_vol(ctx);
        let mut edge = vec![0.0; self.n_cells() * 3 * n_ep];
        for side in 0..self.n_cells() * 3 {
            let cell = side / 3;
            for pt in 0..n_ep {
                let mut acc = 0.0;
                for i in 0..n_p {
                    acc += self.coeffs[cell * n_p + i] * tab.edge_val[(side * n_ep + pt) * n_p + i];
                }
                edge[side * n_ep + pt] = acc;
            }
        }
        QuadField { vol, edge }
    }

    /// Point value inside `cell` at reference coordinates `xh`.
    pub fn eval_ref(&self, ctx: &FemContext, cell: usize, xh: [f64; 2]) -> f64 {
        let tab = ctx.tables(self.k);
        let vals = tab.scalar.eval(xh);
        let n_p = dim_triangle(self.k);
        (0..n_p).map(|i| self.coeffs[cell * n_p + i] * vals[i]).sum()
    }

    /// Cell means, one value per cell.
    pub fn cell_means(&self, ctx: &FemContext) -> Vec<f64> {
        let n_cp = ctx.n_cell_pts();
        let vol = self.eval_vol(ctx);
        (0..self.n_cells())
            .map(|c| {
                (0..n_cp)
                    .map(|pt| 2.0 * ctx.cell_rule.weights[pt] * vol[c * n_cp + pt])
                    .sum::<f64>()
            })
            .collect()
    }
}
