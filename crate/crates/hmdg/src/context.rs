//! Precomputed evaluation tables tying a mesh to the discrete spaces.
//!
//! Assembly visits every cell quadrature point and every edge quadrature
//! point (from both sides) many times per run, so basis values at those
//! points are tabulated once per mesh. Cell-rule points live on the
//! reference triangle and are shared by all cells; edge-rule points are
//! placed with the *global* edge parameterization and then pulled back
//! into each adjacent cell, which is what keeps two-sided quantities
//! (jumps, averages, multiplier couplings) consistent.

use crate::basis::{dim_edge, dim_triangle, edge_basis, ScalarBasis};
use crate::mesh::Mesh;
use crate::quadrature::{self, QuadRule};
use crate::rt::{dim_rt, RtBasis};
use crate::Result;

/// Per-degree basis tables.
#[derive(Debug)]
pub struct DegreeTables {
    pub k: usize,
    pub scalar: ScalarBasis,
    pub rt: RtBasis,
    /// Scalar values at cell-rule points, `[pt * n_p + i]`.
    pub cell_val: Vec<f64>,
    /// Scalar reference gradients at cell-rule points.
    pub cell_grad: Vec<[f64; 2]>,
    /// RT reference values at cell-rule points, `[pt * n_rt + j]`.
    pub rt_cell_val: Vec<[f64; 2]>,
    /// RT reference divergences at cell-rule points.
    pub rt_cell_div: Vec<f64>,
    /// Scalar values at edge-side points, `[(cell*3+le) * n_ep * n_p + pt * n_p + i]`.
    pub edge_val: Vec<f64>,
    /// Scalar reference gradients at edge-side points.
    pub edge_grad: Vec<[f64; 2]>,
    /// RT reference values at edge-side points.
    pub rt_edge_val: Vec<[f64; 2]>,
    /// Legendre multiplier values at edge-rule params, `[pt * (k+1) + q]`.
    pub leg: Vec<f64>,
}

/// Mesh plus quadrature and basis tables for the degrees in use.
#[derive(Debug)]
pub struct FemContext {
    pub mesh: Mesh,
    pub cell_rule: QuadRule,
    pub edge_rule: QuadRule,
    /// Physical coordinates of cell-rule points, `[cell * n_cp + pt]`.
    pub cell_pts: Vec<[f64; 2]>,
    /// Physical coordinates of edge-rule points, `[edge * n_ep + pt]`.
    pub edge_pts: Vec<[f64; 2]>,
    /// Reference coordinates of edge-rule points seen from each cell side,
    /// `[(cell*3+le) * n_ep + pt]`.
    pub edge_ref_pts: Vec<[f64; 2]>,
    tables: [Option<DegreeTables>; 3],
}

impl FemContext {
    /// Builds tables for the given polynomial degrees (duplicates fine).
    pub fn new(mesh: Mesh, degrees: &[usize]) -> Result<Self> {
        let kmax = degrees.iter().copied().max().unwrap_or(1);
        let cell_rule = quadrature::triangle((2 * kmax + 2).max(6))?;
        let edge_rule = quadrature::edge(2 * kmax + 3)?;
        let n_cp = cell_rule.len();
        let n_ep = edge_rule.len();

        let mut cell_pts = Vec::with_capacity(mesh.n_cells() * n_cp);
        for c in 0..mesh.n_cells() {
            let g = mesh.geometry(c);
            for p in &cell_rule.points {
                cell_pts.push(g.map(*p));
            }
        }

        let mut edge_pts = Vec::with_capacity(mesh.n_edges() * n_ep);
        for e in 0..mesh.n_edges() {
            for p in &edge_rule.points {
                edge_pts.push(mesh.edge_point(e, p[0]));
            }
        }

        let mut edge_ref_pts = vec![[0.0; 2]; mesh.n_cells() * 3 * n_ep];
        for c in 0..mesh.n_cells() {
            let g = mesh.geometry(c);
            for le in 0..3 {
                let eid = mesh.cell_edges[c][le];
                for pt in 0..n_ep {
                    let x = edge_pts[eid * n_ep + pt];
                    edge_ref_pts[(c * 3 + le) * n_ep + pt] = g.unmap(x);
                }
            }
        }

        let mut ctx = Self {
            mesh,
            cell_rule,
            edge_rule,
            cell_pts,
            edge_pts,
            edge_ref_pts,
            tables: [None, None, None],
        };
        for &k in degrees {
            ctx.ensure_degree(k)?;
        }
        Ok(ctx)
    }

    fn ensure_degree(&mut self, k: usize) -> Result<()> {
        if self.tables[k].is_some() {
            return Ok(());
        }
        let scalar = ScalarBasis::new(k)?;
        let rt = RtBasis::new(k)?;
        let n_p = dim_triangle(k);
        let n_rt = dim_rt(k);
        let n_cp = self.cell_rule.len();
        let n_ep = self.edge_rule.len();

        let mut cell_val = Vec::with_capacity(n_cp * n_p);
        let mut cell_grad = Vec::with_capacity(n_cp * n_p);
        let mut rt_cell_val = Vec::with_capacity(n_cp * n_rt);
        let mut rt_cell_div = Vec::with_capacity(n_cp * n_rt);
        for p in &self.cell_rule.points {
            cell_val.extend(scalar.eval(*p));
            cell_grad.extend(scalar.eval_grad(*p));
            let (v, d) = rt.eval(*p);
            rt_cell_val.extend(v);
            rt_cell_div.extend(d);
        }

        let n_sides = self.mesh.n_cells() * 3;
        let mut edge_val = Vec::with_capacity(n_sides * n_ep * n_p);
        let mut edge_grad = Vec::with_capacity(n_sides * n_ep * n_p);
        let mut rt_edge_val = Vec::with_capacity(n_sides * n_ep * n_rt);
        for side in 0..n_sides {
            for pt in 0..n_ep {
                let xh = self.edge_ref_pts[side * n_ep + pt];
                edge_val.extend(scalar.eval(xh));
                edge_grad.extend(scalar.eval_grad(xh));
                let (v, _) = rt.eval(xh);
                rt_edge_val.extend(v);
            }
        }

        let mut leg = Vec::with_capacity(n_ep * dim_edge(k));
        for p in &self.edge_rule.points {
            leg.extend(edge_basis(k, p[0]));
        }

        self.tables[k] = Some(DegreeTables {
            k,
            scalar,
            rt,
            cell_val,
            cell_grad,
            rt_cell_val,
            rt_cell_div,
            edge_val,
            edge_grad,
            rt_edge_val,
            leg,
        });
        Ok(())
    }

    pub fn tables(&self, k: usize) -> &DegreeTables {
        self.tables[k].as_ref().expect("degree tables not built")
    }

    pub fn n_cell_pts(&self) -> usize {
        self.cell_rule.len()
    }

    pub fn n_edge_pts(&self) -> usize {
        self.edge_rule.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn edge_side_tables_see_same_physical_points() {
        let mesh = Mesh::build_structured(2, [0.0, 0.0], [1.0, 1.0]).unwrap();
        let ctx = FemContext::new(mesh, &[1]).unwrap();
        let n_ep = ctx.n_edge_pts();
        for e in ctx.mesh.interior_edges().collect::<Vec<_>>() {
            let edge = &ctx.mesh.edges[e];
            let (cl, cr) = (edge.cell_left, edge.cell_right.unwrap());
            let le_l = ctx.mesh.local_edge(cl, e);
            let le_r = ctx.mesh.local_edge(cr, e);
            for pt in 0..n_ep {
                let xl = ctx.edge_ref_pts[(cl * 3 + le_l) * n_ep + pt];
                let xr = ctx.edge_ref_pts[(cr * 3 + le_r) * n_ep + pt];
                let pl = ctx.mesh.geometry(cl).map(xl);
                let pr = ctx.mesh.geometry(cr).map(xr);
                assert!((pl[0] - pr[0]).abs() < 1e-13);
                assert!((pl[1] - pr[1]).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn cell_rule_covers_required_degree() {
        let mesh = Mesh::build_structured(1, [0.0, 0.0], [1.0, 1.0]).unwrap();
        let ctx = FemContext::new(mesh, &[2]).unwrap();
        assert!(ctx.cell_rule.degree >= 6);
        assert!(ctx.edge_rule.degree >= 7);
    }
}
