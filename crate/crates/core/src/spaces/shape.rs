//! Reference shape functions on a triangle, expressed through barycentric
//! coordinates. Local edge `k` joins local vertices `k+1` and `k+2`.

use crate::mesh::Mesh2D;

#[derive(Debug, Clone, Copy)]
pub struct TriGeom {
    pub area: f64,
    /// Gradients of the barycentric coordinates.
    pub grads: [[f64; 2]; 3],
    pub nodes: [usize; 3],
    pub coords: [[f64; 2]; 3],
}

impl TriGeom {
    pub fn new(mesh: &Mesh2D, t: usize) -> Self {
        let nodes = mesh.triangles()[t].nodes;
        let coords = nodes.map(|n| mesh.nodes()[n]);
        let [p0, p1, p2] = coords;
        let det = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
        let grads = [
            [(p1[1] - p2[1]) / det, (p2[0] - p1[0]) / det],
            [(p2[1] - p0[1]) / det, (p0[0] - p2[0]) / det],
            [(p0[1] - p1[1]) / det, (p1[0] - p0[0]) / det],
        ];
        TriGeom { area: 0.5 * det, grads, nodes, coords }
    }

    pub fn point(&self, lam: [f64; 3]) -> [f64; 2] {
        let mut p = [0.0; 2];
        for k in 0..3 {
            p[0] += lam[k] * self.coords[k][0];
            p[1] += lam[k] * self.coords[k][1];
        }
        p
    }

    /// Local vertex pair `(a, b)` of local edge `k`.
    pub fn edge_vertices(k: usize) -> (usize, usize) {
        ((k + 1) % 3, (k + 2) % 3)
    }

    /// +1 if local edge `k` runs from the lower to the higher global node id.
    pub fn edge_sign(&self, k: usize) -> f64 {
        let (a, b) = Self::edge_vertices(k);
        if self.nodes[a] < self.nodes[b] {
            1.0
        } else {
            -1.0
        }
    }
}

/// Scalar or vector local function on a triangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LocalFn {
    /// Nodal hat λ_k.
    Hat(usize),
    /// Edge bubble λ_a λ_b of local edge k.
    Bubble(usize),
    /// Whitney edge function of local edge k, oriented low to high global id.
    Whitney(usize),
    /// Gradient of the edge bubble of local edge k.
    GradBubble(usize),
}

impl LocalFn {
    /// Value of a scalar function.
    pub fn scalar(self, _g: &TriGeom, lam: [f64; 3]) -> f64 {
        match self {
            LocalFn::Hat(k) => lam[k],
            LocalFn::Bubble(k) => {
                let (a, b) = TriGeom::edge_vertices(k);
                lam[a] * lam[b]
            }
            _ => panic!("vector function has no scalar value"),
        }
    }

    /// Gradient of a scalar function, or the value of a vector function.
    pub fn vector(self, g: &TriGeom, lam: [f64; 3]) -> [f64; 2] {
        match self {
            LocalFn::Hat(k) => g.grads[k],
            LocalFn::Bubble(k) | LocalFn::GradBubble(k) => {
                let (a, b) = TriGeom::edge_vertices(k);
                [
                    lam[a] * g.grads[b][0] + lam[b] * g.grads[a][0],
                    lam[a] * g.grads[b][1] + lam[b] * g.grads[a][1],
                ]
            }
            LocalFn::Whitney(k) => {
                let (a, b) = TriGeom::edge_vertices(k);
                let s = g.edge_sign(k);
                [
                    s * (lam[a] * g.grads[b][0] - lam[b] * g.grads[a][0]),
                    s * (lam[a] * g.grads[b][1] - lam[b] * g.grads[a][1]),
                ]
            }
        }
    }

    /// Scalar curl of a vector function (constant on the triangle).
    pub fn curl(self, g: &TriGeom) -> f64 {
        match self {
            // 2 ∇λa × ∇λb = 1 / area for CCW triangles
            LocalFn::Whitney(k) => g.edge_sign(k) / g.area,
            _ => 0.0,
        }
    }
}

/// One-dimensional local function on an interface segment, parametrised by
/// `s ∈ [0, 1]` from the first to the second node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LineFn {
    Start,
    End,
    Bubble,
}

impl LineFn {
    pub fn value(self, s: f64) -> f64 {
        match self {
            LineFn::Start => 1.0 - s,
            LineFn::End => s,
            LineFn::Bubble => s * (1.0 - s),
        }
    }

    /// Derivative with respect to arclength on a segment of length `len`.
    pub fn deriv(self, s: f64, len: f64) -> f64 {
        match self {
            LineFn::Start => -1.0 / len,
            LineFn::End => 1.0 / len,
            LineFn::Bubble => (1.0 - 2.0 * s) / len,
        }
    }
}

/// A local function together with its expansion over global DOFs.
pub type LocalEntry<F> = (F, Vec<(usize, f64)>);

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{Mesh2D, Region, Triangle};

    fn one_triangle() -> Mesh2D {
        Mesh2D::from_parts(
            vec![[0.0, 0.0], [2.0, 0.0], [0.5, 1.5]],
            vec![Triangle { nodes: [0, 1, 2], region: Region::AAir }],
            vec![],
            vec![],
            vec![],
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn whitney_circulation_is_one() {
        let m = one_triangle();
        let g = TriGeom::new(&m, 0);
        for k in 0..3 {
            for j in 0..3 {
                // tangential component along edge j integrated with the midpoint rule
                let (ja, jb) = TriGeom::edge_vertices(j);
                let mut lam = [0.0; 3];
                lam[ja] = 0.5;
                lam[jb] = 0.5;
                let w = LocalFn::Whitney(k).vector(&g, lam);
                let (jlo, jhi) = if g.nodes[ja] < g.nodes[jb] { (ja, jb) } else { (jb, ja) };
                let dj = [g.coords[jhi][0] - g.coords[jlo][0], g.coords[jhi][1] - g.coords[jlo][1]];
                let circ = w[0] * dj[0] + w[1] * dj[1];
                let expect = if j == k { 1.0 } else { 0.0 };
                assert!((circ - expect).abs() < 1e-14, "k={k} j={j} circ={circ}");
            }
        }
    }

    #[test]
    fn whitney_curl_matches_circulation() {
        let m = one_triangle();
        let g = TriGeom::new(&m, 0);
        // ∮ around the CCW boundary equals curl × area
        for k in 0..3 {
            let sign_ccw = g.edge_sign(k);
            assert!((LocalFn::Whitney(k).curl(&g) * g.area - sign_ccw).abs() < 1e-14);
        }
    }
}
