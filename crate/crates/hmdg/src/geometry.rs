//! Affine cell geometry and the contravariant Piola transform.
//!
//! The reference triangle has vertices (0,0), (1,0), (0,1). A physical
//! cell with counterclockwise vertices (v0, v1, v2) is the image of the
//! affine map F(xh) = v0 + J xh with J = [v1-v0 | v2-v0], det J = 2|K| > 0.

use crate::{invalid, Result};

#[derive(Debug, Clone, Copy)]
pub struct CellGeometry {
    pub origin: [f64; 2],
    /// Column-major Jacobian [[j00, j10], [j01, j11]] stored as rows.
    pub jac: [[f64; 2]; 2],
    pub inv_jac: [[f64; 2]; 2],
    pub det: f64,
}

impl CellGeometry {
    pub fn new(v0: [f64; 2], v1: [f64; 2], v2: [f64; 2]) -> Result<Self> {
        let jac = [[v1[0] - v0[0], v2[0] - v0[0]], [v1[1] - v0[1], v2[1] - v0[1]]];
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        if det <= 0.0 || !det.is_finite() {
            return Err(invalid(format!("degenerate or clockwise cell (det J = {det})")));
        }
        let inv_jac = [
            [jac[1][1] / det, -jac[0][1] / det],
            [-jac[1][0] / det, jac[0][0] / det],
        ];
        Ok(Self { origin: v0, jac, inv_jac, det })
    }

    pub fn area(&self) -> f64 {
        0.5 * self.det
    }

    /// Reference -> physical.
    pub fn map(&self, xh: [f64; 2]) -> [f64; 2] {
        [
            self.origin[0] + self.jac[0][0] * xh[0] + self.jac[0][1] * xh[1],
            self.origin[1] + self.jac[1][0] * xh[0] + self.jac[1][1] * xh[1],
        ]
    }

    /// Physical -> reference.
    pub fn unmap(&self, x: [f64; 2]) -> [f64; 2] {
        let d = [x[0] - self.origin[0], x[1] - self.origin[1]];
        [
            self.inv_jac[0][0] * d[0] + self.inv_jac[0][1] * d[1],
            self.inv_jac[1][0] * d[0] + self.inv_jac[1][1] * d[1],
        ]
    }

    /// Contravariant Piola transform of a reference vector value:
    /// v(x) = J vh(xh) / det J. Preserves edge fluxes int_e v.n.
    pub fn piola(&self, vh: [f64; 2]) -> [f64; 2] {
        [
            (self.jac[0][0] * vh[0] + self.jac[0][1] * vh[1]) / self.det,
            (self.jac[1][0] * vh[0] + self.jac[1][1] * vh[1]) / self.det,
        ]
    }

    /// Physical divergence of a Piola-mapped field: div v = div vh / det J.
    pub fn piola_div(&self, div_ref: f64) -> f64 {
        div_ref / self.det
    }

    /// Physical gradient of a mapped scalar: grad = J^{-T} grad_ref.
    pub fn grad(&self, gh: [f64; 2]) -> [f64; 2] {
        [
            self.inv_jac[0][0] * gh[0] + self.inv_jac[1][0] * gh[1],
            self.inv_jac[0][1] * gh[0] + self.inv_jac[1][1] * gh[1],
        ]
    }
}

/// Reference-triangle edge endpoints in counterclockwise traversal:
/// edge i runs opposite vertex i.
pub const REF_EDGE_ENDPOINTS: [([f64; 2], [f64; 2]); 3] = [
    ([1.0, 0.0], [0.0, 1.0]),
    ([0.0, 1.0], [0.0, 0.0]),
    ([0.0, 0.0], [1.0, 0.0]),
];

/// Outward unit normals of the reference edges.
pub const REF_EDGE_NORMALS: [[f64; 2]; 3] = [
    [std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::FRAC_1_SQRT_2],
    [-1.0, 0.0],
    [0.0, -1.0],
];

/// Lengths of the reference edges.
pub const REF_EDGE_LENGTHS: [f64; 3] = [std::f64::consts::SQRT_2, 1.0, 1.0];

/// Point on reference edge `e` at parameter s in [0, 1].
pub fn ref_edge_point(e: usize, s: f64) -> [f64; 2] {
    let (a, b) = REF_EDGE_ENDPOINTS[e];
    [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature;

    #[test]
    fn identity_map_leaves_fields_unchanged() {
        let g = CellGeometry::new([0.0, 0.0], [1.0, 0.0], [0.0, 1.0]).unwrap();
        assert!((g.det - 1.0).abs() < 1e-15);
        let v = g.piola([0.3, -0.7]);
        assert!((v[0] - 0.3).abs() < 1e-15 && (v[1] + 0.7).abs() < 1e-15);
        assert!((g.piola_div(2.5) - 2.5).abs() < 1e-15);
    }

    #[test]
    fn clockwise_cell_rejected() {
        assert!(CellGeometry::new([0.0, 0.0], [0.0, 1.0], [1.0, 0.0]).is_err());
    }

    #[test]
    fn piola_preserves_edge_flux() {
        // Arbitrary affine cell; compare int_e v.n computed on reference
        // edge 0 against the physical edge for a polynomial field.
        let g = CellGeometry::new([0.2, -0.1], [1.4, 0.3], [0.5, 1.1]).unwrap();
        let vh = |p: [f64; 2]| [1.0 + 2.0 * p[0] - p[1], -0.5 + p[0] * p[1]];
        let rule = quadrature::edge(6).unwrap();
        for e in 0..3 {
            // Reference side flux.
            let mut ref_flux = 0.0;
            for (q, w) in rule.points.iter().zip(&rule.weights) {
                let p = ref_edge_point(e, q[0]);
                let v = vh(p);
                let n = REF_EDGE_NORMALS[e];
                ref_flux += w * REF_EDGE_LENGTHS[e] * (v[0] * n[0] + v[1] * n[1]);
            }
            // Physical side flux of the Piola-mapped field.
            let (a, b) = REF_EDGE_ENDPOINTS[e];
            let pa = g.map(a);
            let pb = g.map(b);
            let len = ((pb[0] - pa[0]).powi(2) + (pb[1] - pa[1]).powi(2)).sqrt();
            let tangent = [(pb[0] - pa[0]) / len, (pb[1] - pa[1]) / len];
            // Outward normal: rotate tangent by -90 degrees (CCW traversal).
            let n = [tangent[1], -tangent[0]];
            let mut phys_flux = 0.0;
            for (q, w) in rule.points.iter().zip(&rule.weights) {
                let p = ref_edge_point(e, q[0]);
                let v = g.piola(vh(p));
                phys_flux += w * len * (v[0] * n[0] + v[1] * n[1]);
            }
            assert!((ref_flux - phys_flux).abs() < 1e-13, "edge {e}: {ref_flux} vs {phys_flux}");
        }
    }

    #[test]
    fn divergence_theorem_on_mapped_cell() {
        // int_K div v should equal the sum of edge fluxes and also the
        // reference divergence integral.
        let g = CellGeometry::new([0.0, 0.0], [2.0, 0.5], [0.3, 1.5]).unwrap();
        let vh = |p: [f64; 2]| [p[0] * p[0], p[0] + 3.0 * p[1]];
        let divh = |p: [f64; 2]| 2.0 * p[0] + 3.0;
        let cell_rule = quadrature::triangle(4).unwrap();
        let mut vol = 0.0;
        for (p, w) in cell_rule.points.iter().zip(&cell_rule.weights) {
            vol += w * g.det * g.piola_div(divh(*p));
        }
        let ref_div: f64 = cell_rule
            .points
            .iter()
            .zip(&cell_rule.weights)
            .map(|(p, w)| w * divh(*p))
            .sum();
        assert!((vol - ref_div).abs() < 1e-13);

        let edge_rule = quadrature::edge(8).unwrap();
        let mut flux = 0.0;
        for e in 0..3 {
            let (a, b) = REF_EDGE_ENDPOINTS[e];
            let pa = g.map(a);
            let pb = g.map(b);
            let len = ((pb[0] - pa[0]).powi(2) + (pb[1] - pa[1]).powi(2)).sqrt();
            let t = [(pb[0] - pa[0]) / len, (pb[1] - pa[1]) / len];
            let n = [t[1], -t[0]];
            for (q, w) in edge_rule.points.iter().zip(&edge_rule.weights) {
                let v = g.piola(vh(ref_edge_point(e, q[0])));
                flux += w * len * (v[0] * n[0] + v[1] * n[1]);
            }
        }
        assert!((vol - flux).abs() < 1e-12, "{vol} vs {flux}");
    }
}
