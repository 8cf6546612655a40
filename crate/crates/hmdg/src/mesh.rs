//! Conforming triangular meshes with oriented edges.
//!
//! Conventions baked in here and relied on everywhere else:
//! - cell vertices are counterclockwise, so every affine Jacobian has
//!   positive determinant;
//! - an edge stores its vertices as (min id, max id); the global edge
//!   parameterization runs from the first stored vertex to the second,
//!   and both adjacent cells use it when integrating multiplier or trace
//!   quantities;
//! - the fixed unit normal n_e points from `cell_left` into `cell_right`
//!   where `cell_left` is the lower cell index; on boundary edges it
//!   points outward;
//! - local edge i of a cell connects local vertices (i+1, i+2) mod 3,
//!   matching the reference-triangle numbering in `geometry`.

use crate::geometry::CellGeometry;
use crate::{invalid, Result};

#[derive(Debug, Clone)]
pub struct Edge {
    /// Global vertex ids, (min, max); defines the edge parameterization.
    pub vertices: [usize; 2],
    /// Lower-index adjacent cell.
    pub cell_left: usize,
    /// Higher-index adjacent cell, `None` on the boundary.
    pub cell_right: Option<usize>,
    pub boundary: bool,
    /// Edge length h_e.
    pub length: f64,
    /// Fixed unit normal, left -> right (outward on the boundary).
    pub normal: [f64; 2],
}

#[derive(Debug, Clone)]
pub struct Mesh {
    pub vertices: Vec<[f64; 2]>,
    /// Counterclockwise vertex triples.
    pub cells: Vec<[usize; 3]>,
    pub edges: Vec<Edge>,
    /// Per cell: global edge id of local edges 0, 1, 2.
    pub cell_edges: Vec<[usize; 3]>,
    /// Per cell and local edge: +1 if the global parameterization agrees
    /// with the counterclockwise local traversal, -1 otherwise.
    pub cell_edge_orientation: Vec<[i8; 3]>,
    geometry: Vec<CellGeometry>,
}

/// Two-sided reference-coordinate frames for points on an edge.
#[derive(Debug, Clone)]
pub struct EdgeFrames {
    pub physical: Vec<[f64; 2]>,
    pub left_cell: usize,
    pub left_ref: Vec<[f64; 2]>,
    pub right_cell: Option<usize>,
    pub right_ref: Option<Vec<[f64; 2]>>,
}

impl Mesh {
    /// Assembles full connectivity from vertices and CCW cells.
    pub fn from_cells(vertices: Vec<[f64; 2]>, cells: Vec<[usize; 3]>) -> Result<Self> {
        let mut geometry = Vec::with_capacity(cells.len());
        for (ci, c) in cells.iter().enumerate() {
            if c.iter().any(|&v| v >= vertices.len()) {
                return Err(invalid(format!("cell {ci} references missing vertex")));
            }
            geometry.push(
                CellGeometry::new(vertices[c[0]], vertices[c[1]], vertices[c[2]])
                    .map_err(|_| invalid(format!("cell {ci} is degenerate or clockwise")))?,
            );
        }

        // Edge extraction keyed by sorted vertex pair, first-seen order.
        let mut key_to_edge: std::collections::HashMap<(usize, usize), usize> =
            std::collections::HashMap::new();
        let mut edges: Vec<Edge> = Vec::new();
        let mut edge_cells: Vec<Vec<usize>> = Vec::new();
        let mut cell_edges = vec![[usize::MAX; 3]; cells.len()];
        let mut cell_edge_orientation = vec![[0i8; 3]; cells.len()];
        for (ci, c) in cells.iter().enumerate() {
            for le in 0..3 {
                let a = c[(le + 1) % 3];
                let b = c[(le + 2) % 3];
                let key = (a.min(b), a.max(b));
                let eid = *key_to_edge.entry(key).or_insert_with(|| {
                    let (va, vb) = (vertices[key.0], vertices[key.1]);
                    let length = ((vb[0] - va[0]).powi(2) + (vb[1] - va[1]).powi(2)).sqrt();
                    edges.push(Edge {
                        vertices: [key.0, key.1],
                        cell_left: usize::MAX,
                        cell_right: None,
                        boundary: false,
                        length,
                        normal: [0.0, 0.0],
                    });
                    edge_cells.push(Vec::new());
                    edges.len() - 1
                });
                edge_cells[eid].push(ci);
                cell_edges[ci][le] = eid;
                cell_edge_orientation[ci][le] = if a == key.0 { 1 } else { -1 };
            }
        }

        for (eid, adj) in edge_cells.iter().enumerate() {
            let e = &mut edges[eid];
            match adj.as_slice() {
                [c0] => {
                    e.cell_left = *c0;
                    e.boundary = true;
                }
                [c0, c1] => {
                    e.cell_left = *c0.min(c1);
                    e.cell_right = Some(*c0.max(c1));
                }
                _ => {
                    return Err(invalid(format!(
                        "edge {eid} has {} adjacent cells (non-manifold mesh)",
                        adj.len()
                    )))
                }
            }
            // Normal: rotate the tangent and orient away from cell_left.
            let va = vertices[e.vertices[0]];
            let vb = vertices[e.vertices[1]];
            let t = [(vb[0] - va[0]) / e.length, (vb[1] - va[1]) / e.length];
            let mut n = [t[1], -t[0]];
            let cl = cells[e.cell_left];
            let centroid = [
                (vertices[cl[0]][0] + vertices[cl[1]][0] + vertices[cl[2]][0]) / 3.0,
                (vertices[cl[0]][1] + vertices[cl[1]][1] + vertices[cl[2]][1]) / 3.0,
            ];
            let mid = [0.5 * (va[0] + vb[0]), 0.5 * (va[1] + vb[1])];
            if (mid[0] - centroid[0]) * n[0] + (mid[1] - centroid[1]) * n[1] < 0.0 {
                n = [-n[0], -n[1]];
            }
            e.normal = n;
        }

        let mesh = Self {
            vertices,
            cells,
            edges,
            cell_edges,
            cell_edge_orientation,
            geometry,
        };
        mesh.validate()?;
        Ok(mesh)
    }

    /// Structured triangulation of an axis-aligned rectangle: nx * nx
    /// squares, each split along its lower-left to upper-right diagonal.
    pub fn build_structured(nx: usize, origin: [f64; 2], size: [f64; 2]) -> Result<Self> {
        if nx == 0 {
            return Err(invalid("nx must be at least 1"));
        }
        if size[0] <= 0.0 || size[1] <= 0.0 {
            return Err(invalid("degenerate rectangle"));
        }
        let hx = size[0] / nx as f64;
        let hy = size[1] / nx as f64;
        let mut vertices = Vec::with_capacity((nx + 1) * (nx + 1));
        for j in 0..=nx {
            for i in 0..=nx {
                vertices.push([origin[0] + i as f64 * hx, origin[1] + j as f64 * hy]);
            }
        }
        let vid = |i: usize, j: usize| j * (nx + 1) + i;
        let mut cells = Vec::with_capacity(2 * nx * nx);
        for j in 0..nx {
            for i in 0..nx {
                let (ll, lr, ur, ul) = (vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1));
                cells.push([ll, lr, ur]);
                cells.push([ll, ur, ul]);
            }
        }
        Self::from_cells(vertices, cells)
    }

    /// Uniform red refinement: each triangle splits into 4 congruent
    /// children through its edge midpoints.
    pub fn refine_uniform(&self) -> Result<Self> {
        let mut vertices = self.vertices.clone();
        let mut midpoint = vec![0usize; self.edges.len()];
        for (eid, e) in self.edges.iter().enumerate() {
            let a = self.vertices[e.vertices[0]];
            let b = self.vertices[e.vertices[1]];
            midpoint[eid] = vertices.len();
            vertices.push([0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]);
        }
        let mut cells = Vec::with_capacity(4 * self.cells.len());
        for (ci, c) in self.cells.iter().enumerate() {
            // m[i] is the midpoint of local edge i (opposite vertex i).
            let m = [
                midpoint[self.cell_edges[ci][0]],
                midpoint[self.cell_edges[ci][1]],
                midpoint[self.cell_edges[ci][2]],
            ];
            cells.push([c[0], m[2], m[1]]);
            cells.push([c[1], m[0], m[2]]);
            cells.push([c[2], m[1], m[0]]);
            cells.push([m[0], m[1], m[2]]);
        }
        Self::from_cells(vertices, cells)
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn geometry(&self, cell: usize) -> &CellGeometry {
        &self.geometry[cell]
    }

    pub fn interior_edges(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.edges.len()).filter(|&e| !self.edges[e].boundary)
    }

    pub fn boundary_edges(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.edges.len()).filter(|&e| self.edges[e].boundary)
    }

    /// Physical point on edge `eid` at global parameter s in [0, 1].
    pub fn edge_point(&self, eid: usize, s: f64) -> [f64; 2] {
        let e = &self.edges[eid];
        let a = self.vertices[e.vertices[0]];
        let b = self.vertices[e.vertices[1]];
        [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])]
    }

    /// Local edge index of global edge `eid` within `cell`.
    pub fn local_edge(&self, cell: usize, eid: usize) -> usize {
        self.cell_edges[cell]
            .iter()
            .position(|&g| g == eid)
            .expect("edge does not belong to cell")
    }

    /// Restriction frames mapping edge parameters to the reference
    /// coordinates of each adjacent cell; both sides see the same
    /// physical points.
    pub fn edge_frames(&self, eid: usize, params: &[f64]) -> EdgeFrames {
        let e = &self.edges[eid];
        let physical: Vec<[f64; 2]> = params.iter().map(|&s| self.edge_point(eid, s)).collect();
        let left_ref = physical
            .iter()
            .map(|&x| self.geometry[e.cell_left].unmap(x))
            .collect();
        let right_ref = e
            .cell_right
            .map(|c| physical.iter().map(|&x| self.geometry[c].unmap(x)).collect());
        EdgeFrames {
            physical,
            left_cell: e.cell_left,
            left_ref,
            right_cell: e.cell_right,
            right_ref,
        }
    }

    pub fn total_area(&self) -> f64 {
        self.geometry.iter().map(|g| g.area()).sum()
    }

    /// Connectivity and orientation invariants; cheap enough to run on
    /// every construction.
    pub fn validate(&self) -> Result<()> {
        let euler =
            self.n_vertices() as i64 - self.n_edges() as i64 + self.n_cells() as i64;
        if euler != 1 {
            return Err(invalid(format!("Euler relation violated: V-E+T = {euler}")));
        }
        for (eid, e) in self.edges.iter().enumerate() {
            if e.boundary != e.cell_right.is_none() {
                return Err(invalid(format!("edge {eid} boundary flag inconsistent")));
            }
            if let Some(cr) = e.cell_right {
                if cr <= e.cell_left {
                    return Err(invalid(format!("edge {eid} cell ordering broken")));
                }
            }
        }
        for (ci, les) in self.cell_edges.iter().enumerate() {
            for &eid in les {
                let e = &self.edges[eid];
                if e.cell_left != ci && e.cell_right != Some(ci) {
                    return Err(invalid(format!("cell {ci} / edge {eid} adjacency broken")));
                }
            }
        }
        Ok(())
    }
}
