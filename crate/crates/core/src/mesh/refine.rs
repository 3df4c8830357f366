use super::{BoundarySegment, InterfaceSegment, Mesh2D, Triangle};

/// Uniform red refinement: every triangle is split into four, every boundary
/// and interface segment into two, and the characteristic size is halved.
/// Midpoint nodes are appended in edge order, so existing node ids are kept.
pub fn refine(mesh: &Mesh2D) -> Mesh2D {
    let topo = mesh.topology();
    let n0 = mesh.n_nodes();
    let mut nodes = mesh.nodes().to_vec();
    for &[a, b] in &topo.edges {
        let (p, q) = (mesh.nodes()[a], mesh.nodes()[b]);
        nodes.push([0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])]);
    }
    let mid = |a: usize, b: usize| n0 + topo.edge_between(a, b).expect("edge exists");

    let mut triangles = Vec::with_capacity(4 * mesh.triangles().len());
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let [a, b, c] = tri.nodes;
        let [e0, e1, e2] = topo.tri_edges[t];
        let (m0, m1, m2) = (n0 + e0, n0 + e1, n0 + e2);
        let region = tri.region;
        for nodes in [[a, m2, m1], [m2, b, m0], [m1, m0, c], [m0, m1, m2]] {
            triangles.push(Triangle { nodes, region });
        }
    }
    let mut boundary = Vec::with_capacity(2 * mesh.boundary().len());
    for s in mesh.boundary() {
        let [a, b] = s.nodes;
        let m = mid(a, b);
        boundary.push(BoundarySegment { nodes: [a, m], ..*s });
        boundary.push(BoundarySegment { nodes: [m, b], ..*s });
    }
    let mut interfaces = Vec::with_capacity(2 * mesh.interfaces().len());
    for s in mesh.interfaces() {
        let [a, b] = s.nodes;
        let m = mid(a, b);
        interfaces.push(InterfaceSegment { nodes: [a, m], ..*s });
        interfaces.push(InterfaceSegment { nodes: [m, b], ..*s });
    }
    Mesh2D::from_parts(
        nodes,
        triangles,
        boundary,
        interfaces,
        mesh.tapes().to_vec(),
        0.5 * mesh.delta(),
    )
    .expect("refinement of a valid mesh is valid")
}
