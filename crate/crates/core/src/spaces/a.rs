use std::collections::{BTreeSet, HashMap};

use super::{
    BoundaryData, Constraint, DofSpace, DofTable, EntityKind, Family, LocalEntry, LocalFn,
    SpaceData, SpaceError, Source,
};
use crate::mesh::{BoundaryTag, InterfaceTag, Mesh2D};

#[derive(Debug, Clone)]
pub(crate) struct AData {
    pub node_dof: HashMap<usize, usize>,
    /// Bubble DOF per interface edge.
    pub bubble: HashMap<usize, usize>,
    pub interface: InterfaceTag,
    pub in_a: Vec<bool>,
    pub tri_edges: Vec<[usize; 3]>,
    pub tri_nodes: Vec<[usize; 3]>,
}

impl AData {
    pub fn tri_local(&self, t: usize) -> Vec<LocalEntry<LocalFn>> {
        if !self.in_a[t] {
            return Vec::new();
        }
        let mut out = Vec::with_capacity(6);
        for (k, n) in self.tri_nodes[t].iter().enumerate() {
            out.push((LocalFn::Hat(k), vec![(self.node_dof[n], 1.0)]));
        }
        for (k, e) in self.tri_edges[t].iter().enumerate() {
            if let Some(&d) = self.bubble.get(e) {
                out.push((LocalFn::Bubble(k), vec![(d, 1.0)]));
            }
        }
        out
    }
}

/// Builds the continuous piecewise linear vector-potential space on the a
/// domain. `enrichment = 2` adds one quadratic edge bubble per segment of
/// `interface`. On `GAMMA_E` the potential of the uniform external field is
/// imposed, so that `curl(a ẑ) = b_ext · field_dir`.
pub fn build_a_space(
    mesh: &Mesh2D,
    enrichment: u8,
    interface: InterfaceTag,
    bc: &BoundaryData,
) -> Result<DofSpace, SpaceError> {
    if enrichment != 1 && enrichment != 2 {
        return Err(SpaceError::Enrichment(enrichment));
    }
    let tris = mesh.triangles();
    let topo = mesh.topology();
    let nodes: BTreeSet<usize> = tris
        .iter()
        .filter(|t| t.region.in_a())
        .flat_map(|t| t.nodes)
        .collect();
    if nodes.is_empty() {
        return Err(SpaceError::MissingRegion("a domain"));
    }
    let gamma_e: BTreeSet<usize> = mesh
        .boundary()
        .iter()
        .filter(|s| s.tag == BoundaryTag::GammaE)
        .flat_map(|s| s.nodes)
        .collect();
    let [dx, dy] = bc.field_dir;

    let mut table = DofTable::default();
    let mut node_dof = HashMap::new();
    for &n in &nodes {
        let c = gamma_e.contains(&n).then(|| {
            let [x, y] = mesh.nodes()[n];
            Constraint { source: Source::ExternalField, coeff: dx * y - dy * x }
        });
        node_dof.insert(n, table.push(EntityKind::Node, n, c));
    }
    let mut bubble = HashMap::new();
    if enrichment == 2 {
        let segs = mesh.interface_segments(interface);
        if segs.is_empty() {
            return Err(SpaceError::MissingRegion("coupling interface"));
        }
        for seg in segs {
            let e = mesh.interface_edge(seg);
            let [a, b] = topo.edges[e];
            let fixed = gamma_e.contains(&a) && gamma_e.contains(&b) && on_gamma_e(mesh, a, b);
            let c = fixed.then_some(Constraint { source: Source::Fixed, coeff: 0.0 });
            bubble.insert(e, table.push(EntityKind::Bubble, e, c));
        }
    }
    let data = AData {
        node_dof,
        bubble,
        interface,
        in_a: tris.iter().map(|t| t.region.in_a()).collect(),
        tri_edges: topo.tri_edges.clone(),
        tri_nodes: tris.iter().map(|t| t.nodes).collect(),
    };
    Ok(table.finish(Family::A, enrichment, Vec::new(), SpaceData::A(data)))
}

fn on_gamma_e(mesh: &Mesh2D, a: usize, b: usize) -> bool {
    mesh.boundary()
        .iter()
        .any(|s| s.tag == BoundaryTag::GammaE && (s.nodes == [a, b] || s.nodes == [b, a]))
}

/// Value and gradient of `a` on triangle `t` at barycentric point `lam`.
pub fn eval_a(space: &DofSpace, mesh: &Mesh2D, coeffs: &[f64], t: usize, lam: [f64; 3]) -> (f64, [f64; 2]) {
    let g = super::TriGeom::new(mesh, t);
    let mut v = 0.0;
    let mut grad = [0.0; 2];
    for (f, exp) in space.tri_local(t) {
        let c: f64 = exp.iter().map(|&(d, w)| w * coeffs[d]).sum();
        v += c * f.scalar(&g, lam);
        let gr = f.vector(&g, lam);
        grad[0] += c * gr[0];
        grad[1] += c * gr[1];
    }
    (v, grad)
}
