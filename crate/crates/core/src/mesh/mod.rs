//! Triangular meshes for the stacked-bar and single-tape geometries.
//!
//! A [`Mesh2D`] is immutable once built. Besides nodes and tagged triangles it
//! carries the outer boundary segments, the oriented coupling interfaces
//! (`GAMMA_M` between the h and a domains, `GAMMA_W` for collapsed tapes) and
//! the edge topology used by the function spaces.

mod generate;
mod io;
mod msh;
mod refine;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use generate::{build_mesh, build_stacked_bar_mesh, build_tape_mesh, graded_lines, region_mesh, tensor_mesh};
pub use io::{read_native, write_native};
pub use msh::{read_msh22, MshTagMap};
pub use refine::refine;

/// Tolerance used for duplicate-node detection (m).
pub const NODE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("invalid geometry parameters: {0}")]
    InvalidParams(String),
    #[error("mesh too coarse: {0}")]
    UnderResolved(String),
    #[error("triangle {0} has non-positive signed area")]
    NegativeArea(usize),
    #[error("nodes {0} and {1} coincide")]
    DuplicateNode(usize, usize),
    #[error("edge {0:?} is shared by more than two triangles")]
    NonConforming([usize; 2]),
    #[error("interface is inconsistent: {0}")]
    Interface(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Region {
    /// Conducting part of the h domain.
    HSc,
    /// Non-conducting part of the h domain.
    HAir,
    /// Ferromagnet, a domain.
    AFerro,
    /// Air, a domain.
    AAir,
}

impl Region {
    pub const ALL: [Region; 4] = [Region::HSc, Region::HAir, Region::AFerro, Region::AAir];

    pub fn in_h(self) -> bool {
        matches!(self, Region::HSc | Region::HAir)
    }

    pub fn in_a(self) -> bool {
        !self.in_h()
    }

    pub fn is_conducting(self) -> bool {
        self == Region::HSc
    }

    pub fn tag(self) -> &'static str {
        match self {
            Region::HSc => "OMEGA_H_SC",
            Region::HAir => "OMEGA_H_AIR",
            Region::AFerro => "OMEGA_A_FERRO",
            Region::AAir => "OMEGA_A_AIR",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        Region::ALL.into_iter().find(|r| r.tag() == tag)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BoundaryTag {
    /// Normal b (tangential e) imposed: essential condition on a.
    GammaE,
    /// Tangential h imposed.
    GammaH,
}

impl BoundaryTag {
    pub fn tag(self) -> &'static str {
        match self {
            BoundaryTag::GammaE => "GAMMA_E",
            BoundaryTag::GammaH => "GAMMA_H",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum InterfaceTag {
    /// Common boundary of the h and a domains.
    GammaM,
    /// Collapsed tape line inside the a domain.
    GammaW,
}

impl InterfaceTag {
    pub fn tag(self) -> &'static str {
        match self {
            InterfaceTag::GammaM => "GAMMA_M",
            InterfaceTag::GammaW => "GAMMA_W",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Scenario {
    StackedBar,
    SingleTape,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triangle {
    pub nodes: [usize; 3],
    pub region: Region,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundarySegment {
    pub nodes: [usize; 2],
    pub tag: BoundaryTag,
}

/// Oriented interface segment. For `GAMMA_M` the h domain lies on the left of
/// `nodes[0] -> nodes[1]` and `normal` is the outer normal of the h domain.
/// For `GAMMA_W` segments run from the minus to the plus end of the tape.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterfaceSegment {
    pub nodes: [usize; 2],
    pub tag: InterfaceTag,
    pub normal: [f64; 2],
    /// Tape index for `GAMMA_W`, loop index for `GAMMA_M`.
    pub group: usize,
}

/// A collapsed tape: endpoints `DGW_MINUS`/`DGW_PLUS` and thickness `w`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tape {
    pub minus: usize,
    pub plus: usize,
    pub thickness: f64,
}

/// Edge connectivity. Edges are oriented from the lower to the higher node id;
/// local edge `k` of a triangle is opposite to its local vertex `k`.
#[derive(Debug, Clone, Default)]
pub struct Topology {
    pub edges: Vec<[usize; 2]>,
    pub tri_edges: Vec<[usize; 3]>,
    pub edge_tris: Vec<[Option<usize>; 2]>,
    lookup: HashMap<(usize, usize), usize>,
}

impl Topology {
    fn build(triangles: &[Triangle]) -> Result<Self, MeshError> {
        let mut topo = Topology::default();
        for (t, tri) in triangles.iter().enumerate() {
            let mut te = [0usize; 3];
            for (k, slot) in te.iter_mut().enumerate() {
                let a = tri.nodes[(k + 1) % 3];
                let b = tri.nodes[(k + 2) % 3];
                let key = (a.min(b), a.max(b));
                let id = match topo.lookup.get(&key) {
                    Some(&id) => {
                        let owners = &mut topo.edge_tris[id];
                        if owners[1].is_some() {
                            return Err(MeshError::NonConforming([key.0, key.1]));
                        }
                        owners[1] = Some(t);
                        id
                    }
                    None => {
                        let id = topo.edges.len();
                        topo.edges.push([key.0, key.1]);
                        topo.edge_tris.push([Some(t), None]);
                        topo.lookup.insert(key, id);
                        id
                    }
                };
                *slot = id;
            }
            topo.tri_edges.push(te);
        }
        Ok(topo)
    }

    pub fn edge_between(&self, a: usize, b: usize) -> Option<usize> {
        self.lookup.get(&(a.min(b), a.max(b))).copied()
    }

    /// Local index (0..3) of `edge` inside triangle `t`.
    pub fn local_edge(&self, t: usize, edge: usize) -> Option<usize> {
        self.tri_edges[t].iter().position(|&e| e == edge)
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }
}

#[derive(Debug, Clone)]
pub struct Mesh2D {
    nodes: Vec<[f64; 2]>,
    triangles: Vec<Triangle>,
    boundary: Vec<BoundarySegment>,
    interfaces: Vec<InterfaceSegment>,
    tapes: Vec<Tape>,
    delta: f64,
    topology: Topology,
}

impl Mesh2D {
    /// Assembles a mesh from raw parts, builds the topology and checks the
    /// structural invariants.
    pub fn from_parts(
        nodes: Vec<[f64; 2]>,
        triangles: Vec<Triangle>,
        boundary: Vec<BoundarySegment>,
        interfaces: Vec<InterfaceSegment>,
        tapes: Vec<Tape>,
        delta: f64,
    ) -> Result<Self, MeshError> {
        let n = nodes.len();
        let refs = triangles
            .iter()
            .flat_map(|t| t.nodes)
            .chain(boundary.iter().flat_map(|s| s.nodes))
            .chain(interfaces.iter().flat_map(|s| s.nodes))
            .chain(tapes.iter().flat_map(|t| [t.minus, t.plus]));
        for v in refs {
            if v >= n {
                return Err(MeshError::InvalidParams(format!("reference to missing node {v}")));
            }
        }
        let topology = Topology::build(&triangles)?;
        let mesh = Mesh2D {
            nodes,
            triangles,
            boundary,
            interfaces,
            tapes,
            delta,
            topology,
        };
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn triangles(&self) -> &[Triangle] {
        &self.triangles
    }

    pub fn boundary(&self) -> &[BoundarySegment] {
        &self.boundary
    }

    pub fn interfaces(&self) -> &[InterfaceSegment] {
        &self.interfaces
    }

    pub fn tapes(&self) -> &[Tape] {
        &self.tapes
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn signed_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t].nodes;
        let (pa, pb, pc) = (self.nodes[a], self.nodes[b], self.nodes[c]);
        0.5 * ((pb[0] - pa[0]) * (pc[1] - pa[1]) - (pc[0] - pa[0]) * (pb[1] - pa[1]))
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.signed_area(t)).sum()
    }

    pub fn segment_length(&self, nodes: [usize; 2]) -> f64 {
        let (p, q) = (self.nodes[nodes[0]], self.nodes[nodes[1]]);
        ((q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2)).sqrt()
    }

    pub fn centroid(&self, t: usize) -> [f64; 2] {
        let [a, b, c] = self.triangles[t].nodes;
        let p = [self.nodes[a], self.nodes[b], self.nodes[c]];
        [
            (p[0][0] + p[1][0] + p[2][0]) / 3.0,
            (p[0][1] + p[1][1] + p[2][1]) / 3.0,
        ]
    }

    /// Interface segments with a given tag and group, in polyline order.
    pub fn interface_chain(&self, tag: InterfaceTag, group: usize) -> Vec<usize> {
        (0..self.interfaces.len())
            .filter(|&i| self.interfaces[i].tag == tag && self.interfaces[i].group == group)
            .collect()
    }

    /// All interface segments with a given tag, in storage (polyline) order.
    pub fn interface_segments(&self, tag: InterfaceTag) -> Vec<usize> {
        (0..self.interfaces.len())
            .filter(|&i| self.interfaces[i].tag == tag)
            .collect()
    }

    pub fn interface_length(&self, tag: InterfaceTag) -> f64 {
        self.interfaces
            .iter()
            .filter(|s| s.tag == tag)
            .map(|s| self.segment_length(s.nodes))
            .sum()
    }

    /// Mesh edge carrying interface segment `seg`.
    pub fn interface_edge(&self, seg: usize) -> usize {
        let [a, b] = self.interfaces[seg].nodes;
        self.topology
            .edge_between(a, b)
            .expect("interface segment is a mesh edge")
    }

    /// Triangle adjacent to interface segment `seg` on its h side (`GAMMA_M`)
    /// or on its left side (`GAMMA_W`).
    pub fn interface_left_triangle(&self, seg: usize) -> Option<usize> {
        let s = &self.interfaces[seg];
        let e = self.interface_edge(seg);
        self.topology.edge_tris[e]
            .iter()
            .flatten()
            .copied()
            .find(|&t| self.is_left_of(t, s.nodes))
    }

    /// Triangle adjacent to interface segment `seg` on its right side.
    pub fn interface_right_triangle(&self, seg: usize) -> Option<usize> {
        let s = &self.interfaces[seg];
        let e = self.interface_edge(seg);
        self.topology.edge_tris[e]
            .iter()
            .flatten()
            .copied()
            .find(|&t| !self.is_left_of(t, s.nodes))
    }

    fn is_left_of(&self, t: usize, seg: [usize; 2]) -> bool {
        let c = self.centroid(t);
        let (p, q) = (self.nodes[seg[0]], self.nodes[seg[1]]);
        (q[0] - p[0]) * (c[1] - p[1]) - (q[1] - p[1]) * (c[0] - p[0]) > 0.0
    }

    /// Smallest axis-aligned box containing all triangles of `pred` regions.
    pub fn region_bbox(&self, pred: impl Fn(Region) -> bool) -> Option<[f64; 4]> {
        let mut bb = [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY];
        let mut any = false;
        for tri in self.triangles.iter().filter(|t| pred(t.region)) {
            any = true;
            for &n in &tri.nodes {
                let p = self.nodes[n];
                bb[0] = bb[0].min(p[0]);
                bb[1] = bb[1].min(p[1]);
                bb[2] = bb[2].max(p[0]);
                bb[3] = bb[3].max(p[1]);
            }
        }
        any.then_some(bb)
    }

    /// Locates the triangle containing `p` (barycentric test, tolerance 1e-12).
    /// Returns the triangle and the barycentric coordinates of `p`.
    pub fn locate(&self, p: [f64; 2]) -> Option<(usize, [f64; 3])> {
        let mut best: Option<(usize, [f64; 3], f64)> = None;
        for t in 0..self.triangles.len() {
            let lam = self.barycentric(t, p);
            let worst = lam.iter().cloned().fold(f64::INFINITY, f64::min);
            if worst >= -1e-12 {
                return Some((t, lam));
            }
            if best.as_ref().is_none_or(|b| worst > b.2) {
                best = Some((t, lam, worst));
            }
        }
        best.filter(|b| b.2 > -1e-9).map(|b| (b.0, b.1))
    }

    pub fn barycentric(&self, t: usize, p: [f64; 2]) -> [f64; 3] {
        let [a, b, c] = self.triangles[t].nodes;
        let (pa, pb, pc) = (self.nodes[a], self.nodes[b], self.nodes[c]);
        let det = (pb[0] - pa[0]) * (pc[1] - pa[1]) - (pc[0] - pa[0]) * (pb[1] - pa[1]);
        let l1 = ((pb[0] - p[0]) * (pc[1] - p[1]) - (pc[0] - p[0]) * (pb[1] - p[1])) / det;
        let l2 = ((pc[0] - p[0]) * (pa[1] - p[1]) - (pa[0] - p[0]) * (pc[1] - p[1])) / det;
        [l1, l2, 1.0 - l1 - l2]
    }

    /// Checks the structural invariants: positive areas, no duplicate nodes,
    /// interfaces made of mesh edges with unit normals, uniform tape meshes.
    pub fn validate(&self) -> Result<(), MeshError> {
        for t in 0..self.triangles.len() {
            if self.signed_area(t) <= 0.0 {
                return Err(MeshError::NegativeArea(t));
            }
        }
        let cell = |v: f64| (v / NODE_TOLERANCE).floor() as i64;
        let mut buckets: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for (i, p) in self.nodes.iter().enumerate() {
            let (cx, cy) = (cell(p[0]), cell(p[1]));
            for dx in -1..=1 {
                for dy in -1..=1 {
                    for &j in buckets.get(&(cx + dx, cy + dy)).into_iter().flatten() {
                        let q = self.nodes[j];
                        if (p[0] - q[0]).abs() <= NODE_TOLERANCE
                            && (p[1] - q[1]).abs() <= NODE_TOLERANCE
                        {
                            return Err(MeshError::DuplicateNode(j, i));
                        }
                    }
                }
            }
            buckets.entry((cx, cy)).or_default().push(i);
        }
        for (i, s) in self.interfaces.iter().enumerate() {
            let Some(e) = self.topology.edge_between(s.nodes[0], s.nodes[1]) else {
                return Err(MeshError::Interface(format!("segment {i} is not a mesh edge")));
            };
            let nn = (s.normal[0].powi(2) + s.normal[1].powi(2)).sqrt();
            if (nn - 1.0).abs() > 1e-12 {
                return Err(MeshError::Interface(format!("segment {i} normal not unit")));
            }
            let owners = self.topology.edge_tris[e];
            match s.tag {
                InterfaceTag::GammaM => {
                    let regions: Vec<Region> = owners
                        .iter()
                        .flatten()
                        .map(|&t| self.triangles[t].region)
                        .collect();
                    let ok = regions.len() == 2
                        && regions.iter().filter(|r| r.in_h()).count() == 1;
                    if !ok {
                        return Err(MeshError::Interface(format!(
                            "GAMMA_M segment {i} does not separate the h and a domains"
                        )));
                    }
                }
                InterfaceTag::GammaW => {
                    let ok = owners.iter().all(|o| {
                        o.is_some_and(|t| self.triangles[t].region == Region::AAir)
                    });
                    if !ok {
                        return Err(MeshError::Interface(format!(
                            "GAMMA_W segment {i} is not interior to the air region"
                        )));
                    }
                }
            }
        }
        for (k, tape) in self.tapes.iter().enumerate() {
            let chain = self.interface_chain(InterfaceTag::GammaW, k);
            if chain.is_empty() {
                return Err(MeshError::Interface(format!("tape {k} has no segments")));
            }
            let first = self.interfaces[chain[0]].nodes[0];
            let last = self.interfaces[*chain.last().unwrap()].nodes[1];
            if first != tape.minus || last != tape.plus {
                return Err(MeshError::Interface(format!("tape {k} endpoints mismatch")));
            }
            for w in chain.windows(2) {
                if self.interfaces[w[0]].nodes[1] != self.interfaces[w[1]].nodes[0] {
                    return Err(MeshError::Interface(format!("tape {k} is not a polyline")));
                }
            }
            let lens: Vec<f64> = chain
                .iter()
                .map(|&s| self.segment_length(self.interfaces[s].nodes))
                .collect();
            let max = lens.iter().cloned().fold(0.0, f64::max);
            let min = lens.iter().cloned().fold(f64::INFINITY, f64::min);
            if max > 1.01 * min {
                return Err(MeshError::Interface(format!("tape {k} mesh is not uniform")));
            }
        }
        Ok(())
    }

    /// Ratio of longest to shortest segment on a tape.
    pub fn tape_uniformity(&self, tape: usize) -> f64 {
        let lens: Vec<f64> = self
            .interface_chain(InterfaceTag::GammaW, tape)
            .iter()
            .map(|&s| self.segment_length(self.interfaces[s].nodes))
            .collect();
        let max = lens.iter().cloned().fold(0.0, f64::max);
        let min = lens.iter().cloned().fold(f64::INFINITY, f64::min);
        max / min
    }

    /// Nodes of the tape polyline from the minus to the plus end.
    pub fn tape_nodes(&self, tape: usize) -> Vec<usize> {
        let chain = self.interface_chain(InterfaceTag::GammaW, tape);
        let mut out = Vec::with_capacity(chain.len() + 1);
        for (k, &s) in chain.iter().enumerate() {
            if k == 0 {
                out.push(self.interfaces[s].nodes[0]);
            }
            out.push(self.interfaces[s].nodes[1]);
        }
        out
    }

    pub fn tape_width(&self, tape: usize) -> f64 {
        self.interface_chain(InterfaceTag::GammaW, tape)
            .iter()
            .map(|&s| self.segment_length(self.interfaces[s].nodes))
            .sum()
    }
}

/// Geometry of the two supported scenarios. All lengths in metres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryParams {
    pub scenario: Scenario,
    pub bar_width: f64,
    pub bar_height: f64,
    pub air_half_size: f64,
    pub tape_width: f64,
    pub tape_thickness: f64,
    pub delta: f64,
    /// Growth factor of element sizes in the air region (1 = uniform).
    pub grading: f64,
}

impl GeometryParams {
    pub fn stacked_bar(delta: f64) -> Self {
        GeometryParams {
            scenario: Scenario::StackedBar,
            bar_width: 0.02,
            bar_height: 0.01,
            air_half_size: 0.05,
            tape_width: 0.01,
            tape_thickness: 1e-6,
            delta,
            grading: 1.3,
        }
    }

    pub fn single_tape(delta: f64) -> Self {
        GeometryParams {
            scenario: Scenario::SingleTape,
            air_half_size: 0.03,
            ..Self::stacked_bar(delta)
        }
    }

    /// Reference width used to normalise the mesh size in sweeps.
    pub fn reference_width(&self) -> f64 {
        match self.scenario {
            Scenario::StackedBar => self.bar_width,
            Scenario::SingleTape => self.tape_width,
        }
    }

    pub fn validate(&self) -> Result<(), MeshError> {
        let lengths = [
            ("bar_width", self.bar_width),
            ("bar_height", self.bar_height),
            ("air_half_size", self.air_half_size),
            ("tape_width", self.tape_width),
            ("tape_thickness", self.tape_thickness),
            ("delta", self.delta),
        ];
        for (name, v) in lengths {
            if !(v > 0.0 && v.is_finite()) {
                return Err(MeshError::InvalidParams(format!("{name} must be positive")));
            }
        }
        if self.grading < 1.0 {
            return Err(MeshError::InvalidParams("grading must be >= 1".into()));
        }
        let w = self.reference_width();
        if self.delta >= w / 2.0 {
            return Err(MeshError::InvalidParams("delta must be below half the width".into()));
        }
        Ok(())
    }
}
