use std::collections::HashMap;

use super::{
    BoundaryData, Circuit, Constraint, DofSpace, DofTable, EntityKind, Family, LineFn, LocalEntry,
    SpaceData, SpaceError, Source,
};
use crate::mesh::{InterfaceTag, Mesh2D};

#[derive(Debug, Clone)]
pub(crate) struct TapeDofs {
    /// DOF of the current potential at each tape node, minus end first.
    pub node_dofs: Vec<usize>,
    pub segs: Vec<usize>,
    pub bubble_dofs: Vec<Option<usize>>,
    pub thickness: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct TData {
    pub tapes: Vec<TapeDofs>,
    /// Interface segment to (tape, position along the tape).
    pub seg_pos: HashMap<usize, (usize, usize)>,
}

impl TData {
    pub fn seg_local(&self, seg: usize) -> Vec<LocalEntry<LineFn>> {
        let Some(&(i, k)) = self.seg_pos.get(&seg) else {
            return Vec::new();
        };
        let tp = &self.tapes[i];
        let mut out = vec![
            (LineFn::Start, vec![(tp.node_dofs[k], 1.0)]),
            (LineFn::End, vec![(tp.node_dofs[k + 1], 1.0)]),
        ];
        if let Some(d) = tp.bubble_dofs[k] {
            out.push((LineFn::Bubble, vec![(d, 1.0)]));
        }
        out
    }
}

/// Builds the current-potential space on every tape: continuous piecewise
/// linear along the tape, zero at the minus end and equal to `I / thickness`
/// at the plus end (a global DOF). `enrichment = 2` adds one quadratic bubble
/// per segment.
pub fn build_t_space(mesh: &Mesh2D, enrichment: u8, bc: &BoundaryData) -> Result<DofSpace, SpaceError> {
    if enrichment != 1 && enrichment != 2 {
        return Err(SpaceError::Enrichment(enrichment));
    }
    if mesh.tapes().is_empty() {
        return Err(SpaceError::MissingRegion("tape"));
    }
    let mut table = DofTable::default();
    let zero = Constraint { source: Source::Fixed, coeff: 0.0 };
    let mut tapes = Vec::new();
    let mut seg_pos = HashMap::new();
    for (i, tape) in mesh.tapes().iter().enumerate() {
        let nodes = mesh.tape_nodes(i);
        let segs = mesh.interface_chain(InterfaceTag::GammaW, i);
        if nodes.len() < 2 || nodes[0] != tape.minus || *nodes.last().unwrap() != tape.plus {
            return Err(SpaceError::UnsupportedTopology(format!(
                "tape {i} polyline does not run from its minus to its plus end"
            )));
        }
        let mut node_dofs = Vec::with_capacity(nodes.len());
        for (k, &n) in nodes[..nodes.len() - 1].iter().enumerate() {
            node_dofs.push(table.push(EntityKind::Node, n, (k == 0).then_some(zero)));
        }
        for (k, &s) in segs.iter().enumerate() {
            seg_pos.insert(s, (i, k));
        }
        tapes.push(TapeDofs {
            node_dofs,
            segs,
            bubble_dofs: Vec::new(),
            thickness: tape.thickness,
        });
    }
    for tp in tapes.iter_mut() {
        tp.bubble_dofs = tp
            .segs
            .iter()
            .map(|&s| (enrichment == 2).then(|| table.push(EntityKind::Bubble, mesh.interface_edge(s), None)))
            .collect();
    }
    let mut globals = Vec::new();
    for (i, tp) in tapes.iter_mut().enumerate() {
        let c = match bc.circuit(i) {
            Circuit::Current => Some(Constraint { source: Source::Current(i), coeff: 1.0 / tp.thickness }),
            Circuit::Voltage => None,
        };
        let d = table.push(EntityKind::Global, i, c);
        tp.node_dofs.push(d);
        globals.push(d);
    }
    let data = TData { tapes, seg_pos };
    Ok(table.finish(Family::T, enrichment, globals, SpaceData::T(data)))
}
