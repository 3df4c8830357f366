use std::collections::{BTreeSet, HashMap};

use super::cut::{build_cut, conductors, CutBasis};
use super::{
    BoundaryData, Circuit, Constraint, DofSpace, DofTable, EntityKind, Family, LocalEntry,
    LocalFn, SpaceData, SpaceError, Source, TriGeom,
};
use crate::mesh::{BoundaryTag, InterfaceTag, Mesh2D};

#[derive(Debug, Clone)]
pub(crate) struct HData {
    /// Circulation of h along each mesh edge (low to high id) as a DOF expansion.
    pub edge_map: Vec<Vec<(usize, f64)>>,
    /// Gradient-bubble DOF per interface edge.
    pub bubble: HashMap<usize, usize>,
    pub in_h: Vec<bool>,
    pub cuts: Vec<CutBasis>,
    pub tri_edges: Vec<[usize; 3]>,
}

impl HData {
    pub fn tri_local(&self, t: usize) -> Vec<LocalEntry<LocalFn>> {
        if !self.in_h[t] {
            return Vec::new();
        }
        let mut out = Vec::with_capacity(6);
        for (k, &e) in self.tri_edges[t].iter().enumerate() {
            out.push((LocalFn::Whitney(k), self.edge_map[e].clone()));
        }
        for (k, &e) in self.tri_edges[t].iter().enumerate() {
            if let Some(&d) = self.bubble.get(&e) {
                out.push((LocalFn::GradBubble(k), vec![(d, 1.0)]));
            }
        }
        out
    }
}

/// Builds the curl-free-outside-conductors field space on the h domain:
/// edge DOFs inside conductors, a scalar potential on the rest of the h domain
/// closure, one net-current DOF per conductor and, for `enrichment = 2`, one
/// gradient-bubble DOF per `GAMMA_M` edge.
pub fn build_h_space(mesh: &Mesh2D, enrichment: u8, bc: &BoundaryData) -> Result<DofSpace, SpaceError> {
    if enrichment != 1 && enrichment != 2 {
        return Err(SpaceError::Enrichment(enrichment));
    }
    let tris = mesh.triangles();
    let topo = mesh.topology();
    if !tris.iter().any(|t| t.region.in_h()) {
        return Err(SpaceError::MissingRegion("h domain"));
    }
    let conds = conductors(mesh)?;
    let cuts = (0..conds.len())
        .map(|i| build_cut(mesh, &conds, i))
        .collect::<Result<Vec<_>, _>>()?;

    let n_edges = topo.n_edges();
    let mut interior = vec![false; n_edges];
    let mut phi_edge = vec![false; n_edges];
    for e in 0..n_edges {
        let owners: Vec<usize> = topo.edge_tris[e].iter().flatten().copied().collect();
        let n_h = owners.iter().filter(|&&t| tris[t].region.in_h()).count();
        let n_sc = owners.iter().filter(|&&t| tris[t].region.is_conducting()).count();
        if n_sc == 2 {
            interior[e] = true;
        } else if n_h > 0 {
            phi_edge[e] = true;
        }
    }
    let phi_nodes: BTreeSet<usize> = (0..n_edges)
        .filter(|&e| phi_edge[e])
        .flat_map(|e| topo.edges[e])
        .collect();
    let gamma_h: BTreeSet<usize> = mesh
        .boundary()
        .iter()
        .filter(|s| s.tag == BoundaryTag::GammaH)
        .flat_map(|s| s.nodes)
        .filter(|n| phi_nodes.contains(n))
        .collect();

    // gauge: one fixed potential per connected potential region without GAMMA_H
    let mut parent: HashMap<usize, usize> = phi_nodes.iter().map(|&n| (n, n)).collect();
    fn find(p: &mut HashMap<usize, usize>, mut x: usize) -> usize {
        while p[&x] != x {
            let up = p[&p[&x]];
            p.insert(x, up);
            x = up;
        }
        x
    }
    for e in (0..n_edges).filter(|&e| phi_edge[e]) {
        let [a, b] = topo.edges[e];
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent.insert(ra.max(rb), ra.min(rb));
        }
    }
    let mut comps: HashMap<usize, Vec<usize>> = HashMap::new();
    for &n in &phi_nodes {
        let r = find(&mut parent, n);
        comps.entry(r).or_default().push(n);
    }
    let mut gauge = BTreeSet::new();
    for nodes in comps.values() {
        if !nodes.iter().any(|n| gamma_h.contains(n)) {
            gauge.insert(*nodes.iter().min().unwrap());
        }
    }

    let mut table = DofTable::default();
    let zero = Constraint { source: Source::Fixed, coeff: 0.0 };
    let mut phi_dof = HashMap::new();
    for &n in &phi_nodes {
        let c = (gamma_h.contains(&n) || gauge.contains(&n)).then_some(zero);
        phi_dof.insert(n, table.push(EntityKind::Node, n, c));
    }
    let mut edge_dof = HashMap::new();
    for e in (0..n_edges).filter(|&e| interior[e]) {
        edge_dof.insert(e, table.push(EntityKind::Edge, e, None));
    }
    let mut bubble = HashMap::new();
    if enrichment == 2 {
        for seg in mesh.interface_segments(InterfaceTag::GammaM) {
            let e = mesh.interface_edge(seg);
            bubble.insert(e, table.push(EntityKind::Bubble, e, None));
        }
    }
    let mut globals = Vec::new();
    for i in 0..conds.len() {
        let c = match bc.circuit(i) {
            Circuit::Current => Some(Constraint { source: Source::Current(i), coeff: 1.0 }),
            Circuit::Voltage => None,
        };
        globals.push(table.push(EntityKind::Global, i, c));
    }

    let mut edge_map = vec![Vec::new(); n_edges];
    for e in 0..n_edges {
        if interior[e] {
            edge_map[e] = vec![(edge_dof[&e], 1.0)];
        } else if phi_edge[e] {
            let [a, b] = topo.edges[e];
            let mut m = vec![(phi_dof[&b], 1.0), (phi_dof[&a], -1.0)];
            for (i, cut) in cuts.iter().enumerate() {
                let c = cut.coeff(e);
                if c != 0.0 {
                    m.push((globals[i], c));
                }
            }
            edge_map[e] = m;
        }
    }
    let in_h = tris.iter().map(|t| t.region.in_h()).collect();
    let data = HData {
        edge_map,
        bubble,
        in_h,
        cuts,
        tri_edges: topo.tri_edges.clone(),
    };
    Ok(table.finish(Family::H, enrichment, globals, SpaceData::H(data)))
}

/// Field `h` and `curl h` of triangle `t` at barycentric point `lam`.
pub fn eval_h(space: &DofSpace, mesh: &Mesh2D, coeffs: &[f64], t: usize, lam: [f64; 3]) -> ([f64; 2], f64) {
    let g = TriGeom::new(mesh, t);
    let mut h = [0.0; 2];
    let mut curl = 0.0;
    for (f, exp) in space.tri_local(t) {
        let c: f64 = exp.iter().map(|&(d, w)| w * coeffs[d]).sum();
        let v = f.vector(&g, lam);
        h[0] += c * v[0];
        h[1] += c * v[1];
        curl += c * f.curl(&g);
    }
    (h, curl)
}

/// `curl h` on triangle `t` as a DOF expansion. Potential and cut terms
/// cancel exactly outside the conductors.
pub fn curl_expansion(space: &DofSpace, mesh: &Mesh2D, t: usize) -> Vec<(usize, f64)> {
    let g = TriGeom::new(mesh, t);
    let local = space.tri_local(t);
    let merged = super::merge_expansion(
        local
            .iter()
            .filter_map(|(f, exp)| match f {
                LocalFn::Whitney(k) => Some((g.edge_sign(*k), exp.as_slice())),
                _ => None,
            }),
    );
    merged.into_iter().filter(|&(_, c)| c != 0.0).map(|(d, c)| (d, c / g.area)).collect()
}
