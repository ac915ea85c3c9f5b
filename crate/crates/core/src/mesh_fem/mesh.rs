//! Structured simplicial meshes on intervals and axis-aligned rectangles.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Computational domain. Only intervals and axis-aligned rectangles are supported.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Domain {
    Interval { a: f64, b: f64 },
    Rectangle { x0: f64, x1: f64, y0: f64, y1: f64 },
}

impl Domain {
    pub fn unit_interval() -> Self {
        Domain::Interval { a: 0.0, b: 1.0 }
    }

    pub fn unit_square() -> Self {
        Domain::Rectangle {
            x0: 0.0,
            x1: 1.0,
            y0: 0.0,
            y1: 1.0,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Domain::Interval { .. } => 1,
            Domain::Rectangle { .. } => 2,
        }
    }

    /// Lebesgue measure of the domain.
    pub fn measure(&self) -> f64 {
        match *self {
            Domain::Interval { a, b } => b - a,
            Domain::Rectangle { x0, x1, y0, y1 } => (x1 - x0) * (y1 - y0),
        }
    }

    /// Lower corner and side lengths, padded with a unit second axis in 1D.
    pub(crate) fn bounds(&self) -> ([f64; 2], [f64; 2]) {
        match *self {
            Domain::Interval { a, b } => ([a, 0.0], [b - a, 1.0]),
            Domain::Rectangle { x0, x1, y0, y1 } => ([x0, y0], [x1 - x0, y1 - y0]),
        }
    }
}

/// Per-element geometric data. Only the first `dim + 1` slots of `vertices`
/// and `grads` are meaningful; gradient components beyond `dim` are zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Element {
    pub vertices: [usize; 3],
    pub measure: f64,
    pub diameter: f64,
    pub barycenter: [f64; 2],
    /// Gradients of the barycentric (hat) functions restricted to the element.
    pub grads: [[f64; 2]; 3],
}

/// A conforming P1 mesh of an interval or rectangle.
///
/// Rectangles are split into `nx * ny` cells, each cut into two triangles along
/// the diagonal from the lower-left to the upper-right corner. Nodes are numbered
/// row-major (x fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    dim: usize,
    domain: Domain,
    divisions: [usize; 2],
    nodes: Vec<[f64; 2]>,
    elements: Vec<Element>,
    boundary: Vec<bool>,
    boundary_nodes: Vec<usize>,
    interior_nodes: Vec<usize>,
    h: f64,
    gamma0: f64,
}

/// Builds a uniform mesh with `resolution` subdivisions per axis.
pub fn build_mesh(domain: Domain, resolution: usize) -> Result<Mesh> {
    match domain {
        Domain::Interval { .. } => Mesh::new(domain, [resolution, 1]),
        Domain::Rectangle { .. } => Mesh::new(domain, [resolution, resolution]),
    }
}

impl Mesh {
    /// Builds a mesh with possibly different subdivision counts per axis. The
    /// second count is ignored for intervals.
    pub fn new(domain: Domain, divisions: [usize; 2]) -> Result<Mesh> {
        let dim = domain.dim();
        let (origin, extent) = domain.bounds();
        for (axis, len) in extent.iter().enumerate().take(dim) {
            if !(len.is_finite() && *len > 0.0) {
                return Err(Error::DegenerateDomain(format!(
                    "axis {axis} has length {len}"
                )));
            }
        }
        for &n in divisions.iter().take(dim) {
            if n < 2 {
                return Err(Error::Resolution(n));
            }
        }
        let divisions = if dim == 1 {
            [divisions[0], 1]
        } else {
            divisions
        };
        let [nx, ny] = divisions;
        let hx = extent[0] / nx as f64;

        let mut nodes = Vec::new();
        let mut boundary = Vec::new();
        let mut elements = Vec::new();
        if dim == 1 {
            for i in 0..=nx {
                nodes.push([origin[0] + i as f64 * hx, 0.0]);
                boundary.push(i == 0 || i == nx);
            }
            for i in 0..nx {
                elements.push(make_element(&nodes, [i, i + 1, 0], 1));
            }
        } else {
            let hy = extent[1] / ny as f64;
            for j in 0..=ny {
                for i in 0..=nx {
                    nodes.push([origin[0] + i as f64 * hx, origin[1] + j as f64 * hy]);
                    boundary.push(i == 0 || i == nx || j == 0 || j == ny);
                }
            }
            let id = |i: usize, j: usize| j * (nx + 1) + i;
            for j in 0..ny {
                for i in 0..nx {
                    let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
                    elements.push(make_element(&nodes, [a, b, c], 2));
                    elements.push(make_element(&nodes, [a, c, d], 2));
                }
            }
        }

        if let Some(bad) = elements.iter().position(|e| !(e.measure > 0.0)) {
            return Err(Error::DegenerateDomain(format!(
                "element {bad} has non-positive measure"
            )));
        }
        let h = elements.iter().map(|e| e.diameter).fold(0.0, f64::max);
        let min_diam = elements
            .iter()
            .map(|e| e.diameter)
            .fold(f64::INFINITY, f64::min);
        let boundary_nodes = (0..nodes.len()).filter(|&i| boundary[i]).collect();
        let interior_nodes = (0..nodes.len()).filter(|&i| !boundary[i]).collect();
        Ok(Mesh {
            dim,
            domain,
            divisions,
            nodes,
            elements,
            boundary,
            boundary_nodes,
            interior_nodes,
            h,
            gamma0: min_diam / h,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    /// Subdivisions per axis (`[n, 1]` for intervals).
    pub fn divisions(&self) -> [usize; 2] {
        self.divisions
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    /// Vertices of element `e` (2 in 1D, 3 in 2D).
    pub fn element_vertices(&self, e: usize) -> &[usize] {
        &self.elements[e].vertices[..self.dim + 1]
    }

    pub fn boundary_nodes(&self) -> &[usize] {
        &self.boundary_nodes
    }

    pub fn interior_nodes(&self) -> &[usize] {
        &self.interior_nodes
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        self.boundary[node]
    }

    /// Maximal element diameter.
    pub fn h(&self) -> f64 {
        self.h
    }

    /// Quasi-uniformity ratio `min diam / h`.
    pub fn gamma0(&self) -> f64 {
        self.gamma0
    }

    pub fn measure(&self) -> f64 {
        self.elements.iter().map(|e| e.measure).sum()
    }

    /// Gradient of a nodal P1 field on element `e`.
    pub fn element_gradient(&self, e: usize, values: &[f64]) -> [f64; 2] {
        let el = &self.elements[e];
        let mut g = [0.0; 2];
        for (k, &v) in el.vertices[..self.dim + 1].iter().enumerate() {
            g[0] += values[v] * el.grads[k][0];
            g[1] += values[v] * el.grads[k][1];
        }
        g
    }

    /// Value of a nodal P1 field at the barycenter of element `e`.
    pub fn element_mean(&self, e: usize, values: &[f64]) -> f64 {
        let verts = self.element_vertices(e);
        verts.iter().map(|&v| values[v]).sum::<f64>() / verts.len() as f64
    }

    /// Elements incident to each node.
    pub fn node_patches(&self) -> Vec<Vec<usize>> {
        let mut patches = vec![Vec::new(); self.num_nodes()];
        for e in 0..self.num_elements() {
            for &v in self.element_vertices(e) {
                patches[v].push(e);
            }
        }
        patches
    }
}

fn make_element(nodes: &[[f64; 2]], vertices: [usize; 3], dim: usize) -> Element {
    if dim == 1 {
        let (x0, x1) = (nodes[vertices[0]][0], nodes[vertices[1]][0]);
        let len = x1 - x0;
        return Element {
            vertices,
            measure: len,
            diameter: len.abs(),
            barycenter: [0.5 * (x0 + x1), 0.0],
            grads: [[-1.0 / len, 0.0], [1.0 / len, 0.0], [0.0, 0.0]],
        };
    }
    let p = [nodes[vertices[0]], nodes[vertices[1]], nodes[vertices[2]]];
    let (e1, e2) = (
        [p[1][0] - p[0][0], p[1][1] - p[0][1]],
        [p[2][0] - p[0][0], p[2][1] - p[0][1]],
    );
    let det = e1[0] * e2[1] - e1[1] * e2[0];
    // Gradients of the barycentric coordinates from the inverse Jacobian.
    let g1 = [e2[1] / det, -e2[0] / det];
    let g2 = [-e1[1] / det, e1[0] / det];
    let g0 = [-g1[0] - g2[0], -g1[1] - g2[1]];
    let dist = |a: [f64; 2], b: [f64; 2]| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
    let diameter = dist(p[0], p[1]).max(dist(p[1], p[2])).max(dist(p[0], p[2]));
    Element {
        vertices,
        measure: 0.5 * det,
        diameter,
        barycenter: [
            (p[0][0] + p[1][0] + p[2][0]) / 3.0,
            (p[0][1] + p[1][1] + p[2][1]) / 3.0,
        ],
        grads: [g0, g1, g2],
    }
}
