use crate::geometry::Surface;

use super::SfemError;

/// Triangulated embedding of the Monge patch over an `n × n` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    pub n: usize,
    /// Embedded positions `(u, v, z(u,v))`.
    pub vertices: Vec<[f64; 3]>,
    /// Parametric coordinates `(u, v)`.
    pub params: Vec<[f64; 2]>,
    /// Counter-clockwise in parameter space.
    pub triangles: Vec<[usize; 3]>,
    /// One third of the area of every incident triangle.
    pub lumped_area: Vec<f64>,
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn norm(a: [f64; 3]) -> f64 {
    dot(a, a).sqrt()
}

/// Area of the triangle `(a, b, c)`.
pub fn triangle_area(a: [f64; 3], b: [f64; 3], c: [f64; 3]) -> f64 {
    0.5 * norm(cross(sub(b, a), sub(c, a)))
}

/// Cotangent of the angle at `a` in the triangle `(a, b, c)`.
pub fn cot_at(a: [f64; 3], b: [f64; 3], c: [f64; 3]) -> f64 {
    let (e1, e2) = (sub(b, a), sub(c, a));
    dot(e1, e2) / norm(cross(e1, e2))
}

impl TriMesh {
    /// `(n+1)²` vertices at `r(i/n, j/n)`; each cell is split along its
    /// lower-left to upper-right diagonal.
    pub fn build<S: Surface + ?Sized>(surface: &S, n: usize) -> Result<Self, SfemError> {
        if n < 1 {
            return Err(SfemError::Config {
                field: "n",
                reason: "grid size must be at least 1".into(),
            });
        }
        let side = n + 1;
        let mut vertices = Vec::with_capacity(side * side);
        let mut params = Vec::with_capacity(side * side);
        for j in 0..side {
            for i in 0..side {
                let (u, v) = (i as f64 / n as f64, j as f64 / n as f64);
                let z = surface.height(u, v, 0).z;
                vertices.push([u, v, z]);
                params.push([u, v]);
            }
        }
        let idx = |i: usize, j: usize| j * side + i;
        let mut triangles = Vec::with_capacity(2 * n * n);
        for j in 0..n {
            for i in 0..n {
                let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
                triangles.push([a, b, c]);
                triangles.push([a, c, d]);
            }
        }
        let mut lumped_area = vec![0.0; vertices.len()];
        for (k, t) in triangles.iter().enumerate() {
            let area = triangle_area(vertices[t[0]], vertices[t[1]], vertices[t[2]]);
            if !(area >= 1e-14) {
                return Err(SfemError::DegenerateTriangle { index: k, area });
            }
            for &v in t {
                lumped_area[v] += area / 3.0;
            }
        }
        Ok(Self {
            n,
            vertices,
            params,
            triangles,
            lumped_area,
        })
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_edges(&self) -> usize {
        // horizontal + vertical + diagonal
        let n = self.n;
        2 * n * (n + 1) + n * n
    }

    /// Total surface area as the sum of lumped vertex areas.
    pub fn area(&self) -> f64 {
        self.lumped_area.iter().sum()
    }

    pub fn triangle_area(&self, k: usize) -> f64 {
        let t = self.triangles[k];
        triangle_area(self.vertices[t[0]], self.vertices[t[1]], self.vertices[t[2]])
    }
}
