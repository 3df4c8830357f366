use std::collections::{BTreeSet, HashMap, VecDeque};

use super::SpaceError;
use crate::mesh::{Mesh2D, Region};

/// A connected component of the conducting region.
#[derive(Debug, Clone, PartialEq)]
pub struct Conductor {
    pub triangles: Vec<usize>,
    /// Mesh edges on the conductor boundary.
    pub boundary_edges: Vec<usize>,
    /// Boundary nodes in counter-clockwise order (first node not repeated).
    pub boundary_loop: Vec<usize>,
}

/// Discrete cut function of one conductor, stored as edge circulations.
#[derive(Debug, Clone, PartialEq)]
pub struct CutBasis {
    pub conductor: usize,
    /// Triangles where the cut function is not a plain gradient of zero.
    pub layer: Vec<usize>,
    /// Circulation along mesh edges, oriented from the lower to the higher node id.
    pub edge_coeffs: Vec<(usize, f64)>,
    /// Node path from the conductor to the boundary of the h domain.
    pub path: Vec<usize>,
}

impl CutBasis {
    pub fn coeff(&self, edge: usize) -> f64 {
        self.edge_coeffs
            .iter()
            .find(|(e, _)| *e == edge)
            .map_or(0.0, |&(_, c)| c)
    }

    /// Circulation along a closed node loop `nodes[0] -> nodes[1] -> ... -> nodes[0]`.
    pub fn loop_circulation(&self, mesh: &Mesh2D, nodes: &[usize]) -> f64 {
        loop_sum(mesh, nodes, |e| self.coeff(e))
    }
}

/// Sum of `f(edge)` along a closed node loop, with orientation signs.
pub(crate) fn loop_sum(mesh: &Mesh2D, nodes: &[usize], f: impl Fn(usize) -> f64) -> f64 {
    let topo = mesh.topology();
    let mut s = 0.0;
    for k in 0..nodes.len() {
        let (a, b) = (nodes[k], nodes[(k + 1) % nodes.len()]);
        let e = topo.edge_between(a, b).expect("loop follows mesh edges");
        s += if a < b { f(e) } else { -f(e) };
    }
    s
}

/// Conducting components, ordered by their lowest triangle index.
pub fn conductors(mesh: &Mesh2D) -> Result<Vec<Conductor>, SpaceError> {
    let topo = mesh.topology();
    let tris = mesh.triangles();
    let mut comp = vec![usize::MAX; tris.len()];
    let mut out = Vec::new();
    for start in 0..tris.len() {
        if tris[start].region != Region::HSc || comp[start] != usize::MAX {
            continue;
        }
        let id = out.len();
        let mut members = Vec::new();
        let mut queue = VecDeque::from([start]);
        comp[start] = id;
        while let Some(t) = queue.pop_front() {
            members.push(t);
            for &e in &topo.tri_edges[t] {
                for o in topo.edge_tris[e].iter().flatten().copied() {
                    if tris[o].region == Region::HSc && comp[o] == usize::MAX {
                        comp[o] = id;
                        queue.push_back(o);
                    }
                }
            }
        }
        members.sort_unstable();
        let mut boundary_edges = Vec::new();
        let mut next: HashMap<usize, usize> = HashMap::new();
        for &t in &members {
            let nodes = tris[t].nodes;
            for (k, &e) in topo.tri_edges[t].iter().enumerate() {
                let inside = topo.edge_tris[e]
                    .iter()
                    .flatten()
                    .filter(|&&o| comp[o] == id)
                    .count();
                if inside == 1 {
                    boundary_edges.push(e);
                    let (a, b) = (nodes[(k + 1) % 3], nodes[(k + 2) % 3]);
                    if next.insert(a, b).is_some() {
                        return Err(SpaceError::UnsupportedTopology(format!(
                            "conductor {id} boundary touches itself at node {a}"
                        )));
                    }
                }
            }
        }
        boundary_edges.sort_unstable();
        let first = *next.keys().min().expect("conductor has a boundary");
        let mut boundary_loop = vec![first];
        let mut cur = next[&first];
        while cur != first {
            boundary_loop.push(cur);
            cur = next[&cur];
        }
        if boundary_loop.len() != next.len() {
            return Err(SpaceError::UnsupportedTopology(format!(
                "conductor {id} is multiply connected"
            )));
        }
        out.push(Conductor { triangles: members, boundary_edges, boundary_loop });
    }
    Ok(out)
}

/// Nodes on the boundary of the h domain.
fn h_boundary_nodes(mesh: &Mesh2D) -> BTreeSet<usize> {
    let topo = mesh.topology();
    let tris = mesh.triangles();
    let mut set = BTreeSet::new();
    for (e, owners) in topo.edge_tris.iter().enumerate() {
        let n_h = owners.iter().flatten().filter(|&&t| tris[t].region.in_h()).count();
        if n_h == 1 {
            set.extend(topo.edges[e]);
        }
    }
    set
}

/// Builds the cut function of conductor `conductor_id`: circulation one
/// counter-clockwise around that conductor, zero around any other.
pub fn build_cut_function(mesh: &Mesh2D, conductor_id: usize) -> Result<CutBasis, SpaceError> {
    let conds = conductors(mesh)?;
    build_cut(mesh, &conds, conductor_id)
}

pub(crate) fn build_cut(mesh: &Mesh2D, conds: &[Conductor], id: usize) -> Result<CutBasis, SpaceError> {
    let cond = conds
        .get(id)
        .ok_or_else(|| SpaceError::UnsupportedTopology(format!("no conductor {id}")))?;
    let topo = mesh.topology();
    let tris = mesh.triangles();
    let dh = h_boundary_nodes(mesh);

    // conductor touching the boundary of the h domain: the cut degenerates
    // to a single boundary edge
    if let Some(k) = cond.boundary_loop.iter().position(|n| dh.contains(n)) {
        let n = cond.boundary_loop.len();
        let (p0, q) = (cond.boundary_loop[k], cond.boundary_loop[(k + 1) % n]);
        let e = topo.edge_between(p0, q).expect("boundary loop edge");
        let layer = topo.edge_tris[e]
            .iter()
            .flatten()
            .copied()
            .filter(|&t| tris[t].region == Region::HSc)
            .collect();
        let c = if p0 < q { 1.0 } else { -1.0 };
        return Ok(CutBasis { conductor: id, layer, edge_coeffs: vec![(e, c)], path: vec![p0] });
    }

    // shortest path through the non-conducting h region
    let mut other_boundary = vec![false; mesh.n_nodes()];
    for (j, c) in conds.iter().enumerate() {
        if j != id {
            c.boundary_loop.iter().for_each(|&n| other_boundary[n] = true);
        }
    }
    let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); mesh.n_nodes()];
    for (t, tri) in tris.iter().enumerate() {
        if tri.region != Region::HAir {
            continue;
        }
        for &e in &topo.tri_edges[t] {
            let [a, b] = topo.edges[e];
            adj[a].insert(b);
            adj[b].insert(a);
        }
    }
    let mut prev = vec![usize::MAX; mesh.n_nodes()];
    let mut seen = vec![false; mesh.n_nodes()];
    let mut sources = cond.boundary_loop.clone();
    sources.sort_unstable();
    let mut queue: VecDeque<usize> = VecDeque::new();
    for &s in &sources {
        seen[s] = true;
        queue.push_back(s);
    }
    let mut target = None;
    while let Some(u) = queue.pop_front() {
        if dh.contains(&u) {
            target = Some(u);
            break;
        }
        for &v in &adj[u] {
            if !seen[v] && !other_boundary[v] {
                seen[v] = true;
                prev[v] = u;
                queue.push_back(v);
            }
        }
    }
    let target = target.ok_or_else(|| {
        SpaceError::UnsupportedTopology(format!("no cut path from conductor {id} to the h boundary"))
    })?;
    let mut path = vec![target];
    while prev[*path.last().unwrap()] != usize::MAX {
        path.push(prev[*path.last().unwrap()]);
    }
    path.reverse();
    let on_path: BTreeSet<usize> = path.iter().copied().collect();
    let path_edges: BTreeSet<usize> = path
        .windows(2)
        .map(|w| topo.edge_between(w[0], w[1]).expect("path edge"))
        .collect();

    // split the triangles around the path into its two sides
    let fan: Vec<usize> = (0..tris.len())
        .filter(|&t| tris[t].region == Region::HAir && tris[t].nodes.iter().any(|n| on_path.contains(n)))
        .collect();
    let in_fan: BTreeSet<usize> = fan.iter().copied().collect();
    let mut side = HashMap::new();
    let mut queue = VecDeque::from([fan[0]]);
    side.insert(fan[0], ());
    while let Some(t) = queue.pop_front() {
        for &e in &topo.tri_edges[t] {
            let [a, b] = topo.edges[e];
            if path_edges.contains(&e) || !(on_path.contains(&a) || on_path.contains(&b)) {
                continue;
            }
            for o in topo.edge_tris[e].iter().flatten().copied() {
                if in_fan.contains(&o) && side.insert(o, ()).is_none() {
                    queue.push_back(o);
                }
            }
        }
    }
    if side.len() == fan.len() {
        return Err(SpaceError::UnsupportedTopology(format!(
            "cut of conductor {id} does not separate its neighbourhood"
        )));
    }
    let mut layer: Vec<usize> = side.keys().copied().collect();
    layer.sort_unstable();
    let mut coeffs: HashMap<usize, f64> = HashMap::new();
    for &t in &layer {
        for &e in &topo.tri_edges[t] {
            let [a, b] = topo.edges[e];
            let (pa, pb) = (on_path.contains(&a), on_path.contains(&b));
            if pa != pb {
                // unit jump from the off-path node to the path node
                coeffs.insert(e, if pb { 1.0 } else { -1.0 });
            }
        }
    }
    let mut edge_coeffs: Vec<(usize, f64)> = coeffs.into_iter().collect();
    edge_coeffs.sort_unstable_by_key(|&(e, _)| e);
    let mut cut = CutBasis { conductor: id, layer, edge_coeffs, path };
    let circ = cut.loop_circulation(mesh, &cond.boundary_loop);
    if (circ.abs() - 1.0).abs() > 1e-12 {
        return Err(SpaceError::UnsupportedTopology(format!(
            "cut of conductor {id} has circulation {circ}"
        )));
    }
    if circ < 0.0 {
        cut.edge_coeffs.iter_mut().for_each(|(_, c)| *c = -*c);
    }
    Ok(cut)
}
