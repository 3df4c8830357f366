//! Discrete function spaces for the magnetic field `h`, the vector potential
//! `a` and the tape current potential `t`.
//!
//! Every space numbers its DOFs as nodes, then edges, then bubbles, then
//! global (net current) DOFs. Essential DOFs stay in the numbering and carry a
//! [`Constraint`]; the assembly eliminates them symmetrically.

mod a;
mod cut;
mod h;
pub mod shape;
mod t;
mod trace;

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use a::{build_a_space, eval_a};
pub use cut::{build_cut_function, conductors, Conductor, CutBasis};
pub use h::{build_h_space, curl_expansion, eval_h};
pub use shape::{LineFn, LocalEntry, LocalFn, TriGeom};
pub use t::build_t_space;
pub use trace::{eval_trace, eval_trace_limits, interface_arclength, segment_trace};

use crate::mesh::InterfaceTag;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpaceError {
    #[error("unsupported topology: {0}")]
    UnsupportedTopology(String),
    #[error("mesh has no {0}")]
    MissingRegion(&'static str),
    #[error("invalid enrichment {0}, expected 1 or 2")]
    Enrichment(u8),
    #[error("circuit specification: {0}")]
    Circuit(String),
    #[error("coefficient vector has length {got}, space has {expected} dofs")]
    Length { expected: usize, got: usize },
    #[error("arclength {s} outside interface of length {len}")]
    OutOfRange { s: f64, len: f64 },
    #[error("space does not support this operation: {0}")]
    Unsupported(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    H,
    A,
    T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EntityKind {
    Node,
    Edge,
    Bubble,
    Global,
}

impl EntityKind {
    pub fn name(self) -> &'static str {
        match self {
            EntityKind::Node => "node",
            EntityKind::Edge => "edge",
            EntityKind::Bubble => "bubble",
            EntityKind::Global => "global",
        }
    }
}

/// Identifies what a DOF is attached to. Bubble ids are mesh edge ids;
/// global ids are conductor or tape indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Entity {
    pub kind: EntityKind,
    pub id: usize,
}

/// What an essential value is proportional to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Source {
    /// A fixed value equal to the coefficient.
    Fixed,
    /// The external field amplitude.
    ExternalField,
    /// The imposed current of conductor or tape `i`.
    Current(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constraint {
    pub source: Source,
    pub coeff: f64,
}

/// Instantaneous source amplitudes.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SourceValues {
    /// External field amplitude (T).
    pub b_ext: f64,
    /// Imposed currents (A), indexed by conductor or tape.
    pub currents: Vec<f64>,
    /// Imposed voltages (V per unit length in 2D h-a, V for tapes).
    pub voltages: Vec<f64>,
}

impl Constraint {
    pub fn value(&self, src: &SourceValues) -> f64 {
        match self.source {
            Source::Fixed => self.coeff,
            Source::ExternalField => self.coeff * src.b_ext,
            Source::Current(i) => self.coeff * src.currents.get(i).copied().unwrap_or(0.0),
        }
    }
}

/// How the net current of a conductor or tape is controlled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(rename_all = "lowercase")]
pub enum Circuit {
    /// Net current imposed (essential global DOF).
    Current,
    /// Voltage imposed (free global DOF, voltage enters the right-hand side).
    Voltage,
}

/// Boundary data shared by the space builders.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryData {
    /// Unit direction of the uniform external field imposed on `GAMMA_E`.
    pub field_dir: [f64; 2],
    /// One entry per conductor (h-a) or tape (t-a).
    pub circuits: Vec<Circuit>,
}

impl Default for BoundaryData {
    fn default() -> Self {
        BoundaryData { field_dir: [0.0, 1.0], circuits: Vec::new() }
    }
}

impl BoundaryData {
    pub fn circuit(&self, i: usize) -> Circuit {
        self.circuits.get(i).copied().unwrap_or(Circuit::Current)
    }
}

#[derive(Debug, Clone)]
pub(crate) enum SpaceData {
    H(h::HData),
    A(a::AData),
    T(t::TData),
}

/// A discrete function space with its DOF table and essential constraints.
#[derive(Debug, Clone)]
pub struct DofSpace {
    pub family: Family,
    pub enrichment: u8,
    entities: Vec<Entity>,
    table: HashMap<Entity, usize>,
    constraints: Vec<Option<Constraint>>,
    free_index: Vec<Option<usize>>,
    free_dofs: Vec<usize>,
    globals: Vec<usize>,
    pub(crate) data: SpaceData,
}

/// Incremental DOF numbering used by the builders.
#[derive(Default)]
pub(crate) struct DofTable {
    entities: Vec<Entity>,
    table: HashMap<Entity, usize>,
    constraints: Vec<Option<Constraint>>,
}

impl DofTable {
    pub fn push(&mut self, kind: EntityKind, id: usize, constraint: Option<Constraint>) -> usize {
        let e = Entity { kind, id };
        if let Some(&d) = self.table.get(&e) {
            return d;
        }
        let d = self.entities.len();
        self.entities.push(e);
        self.table.insert(e, d);
        self.constraints.push(constraint);
        d
    }

    pub fn finish(self, family: Family, enrichment: u8, globals: Vec<usize>, data: SpaceData) -> DofSpace {
        let mut free_index = vec![None; self.entities.len()];
        let mut free_dofs = Vec::new();
        for (d, c) in self.constraints.iter().enumerate() {
            if c.is_none() {
                free_index[d] = Some(free_dofs.len());
                free_dofs.push(d);
            }
        }
        DofSpace {
            family,
            enrichment,
            entities: self.entities,
            table: self.table,
            constraints: self.constraints,
            free_index,
            free_dofs,
            globals,
            data,
        }
    }
}

impl DofSpace {
    pub fn n_dofs(&self) -> usize {
        self.entities.len()
    }

    pub fn n_free(&self) -> usize {
        self.free_dofs.len()
    }

    pub fn entity(&self, dof: usize) -> Entity {
        self.entities[dof]
    }

    pub fn dof_of(&self, kind: EntityKind, id: usize) -> Option<usize> {
        self.table.get(&Entity { kind, id }).copied()
    }

    pub fn constraint(&self, dof: usize) -> Option<Constraint> {
        self.constraints[dof]
    }

    pub fn is_essential(&self, dof: usize) -> bool {
        self.constraints[dof].is_some()
    }

    pub fn free_index(&self, dof: usize) -> Option<usize> {
        self.free_index[dof]
    }

    pub fn free_dofs(&self) -> &[usize] {
        &self.free_dofs
    }

    /// Global DOF of conductor or tape `i`.
    pub fn global_dofs(&self) -> &[usize] {
        &self.globals
    }

    pub fn count(&self, kind: EntityKind) -> usize {
        self.entities.iter().filter(|e| e.kind == kind).count()
    }

    /// Full coefficient vector with essential values set and free values zero.
    pub fn essential_vector(&self, src: &SourceValues) -> Vec<f64> {
        self.constraints
            .iter()
            .map(|c| c.map_or(0.0, |c| c.value(src)))
            .collect()
    }

    /// Overwrites the essential entries of `coeffs` with their imposed values.
    pub fn apply_essential(&self, coeffs: &mut [f64], src: &SourceValues) {
        for (d, c) in self.constraints.iter().enumerate() {
            if let Some(c) = c {
                coeffs[d] = c.value(src);
            }
        }
    }

    /// Free part of a full coefficient vector.
    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        self.free_dofs.iter().map(|&d| full[d]).collect()
    }

    /// Full vector from free values plus essential values.
    pub fn expand(&self, free: &[f64], src: &SourceValues) -> Vec<f64> {
        let mut full = self.essential_vector(src);
        for (k, &d) in self.free_dofs.iter().enumerate() {
            full[d] = free[k];
        }
        full
    }

    pub fn check_len(&self, coeffs: &[f64]) -> Result<(), SpaceError> {
        if coeffs.len() != self.n_dofs() {
            return Err(SpaceError::Length { expected: self.n_dofs(), got: coeffs.len() });
        }
        Ok(())
    }

    /// Coupling interface of an A space (where its bubbles live).
    pub fn interface(&self) -> Option<InterfaceTag> {
        match &self.data {
            SpaceData::A(a) => Some(a.interface),
            SpaceData::H(_) => Some(InterfaceTag::GammaM),
            SpaceData::T(_) => Some(InterfaceTag::GammaW),
        }
    }

    /// Local functions of triangle `t` with their DOF expansions; empty if
    /// the space has no support on `t`.
    pub fn tri_local(&self, t: usize) -> Vec<LocalEntry<LocalFn>> {
        match &self.data {
            SpaceData::H(h) => h.tri_local(t),
            SpaceData::A(a) => a.tri_local(t),
            SpaceData::T(_) => Vec::new(),
        }
    }

    /// Local functions of interface segment `seg` (T spaces only).
    pub fn seg_local(&self, seg: usize) -> Vec<LocalEntry<LineFn>> {
        match &self.data {
            SpaceData::T(t) => t.seg_local(seg),
            _ => Vec::new(),
        }
    }

    /// Circulation of `h` along mesh edge `e` (low to high node id) as a DOF
    /// expansion (H spaces only).
    pub fn edge_circulation(&self, e: usize) -> &[(usize, f64)] {
        match &self.data {
            SpaceData::H(h) => &h.edge_map[e],
            _ => &[],
        }
    }

    pub fn cuts(&self) -> &[CutBasis] {
        match &self.data {
            SpaceData::H(h) => &h.cuts,
            _ => &[],
        }
    }

    /// Thickness of tape `i` (T spaces only).
    pub fn tape_thickness(&self, i: usize) -> Option<f64> {
        match &self.data {
            SpaceData::T(t) => t.tapes.get(i).map(|tp| tp.thickness),
            _ => None,
        }
    }

    /// DOF expansion of the `t` value at each node of tape `i`.
    pub fn tape_node_dofs(&self, i: usize) -> Option<&[usize]> {
        match &self.data {
            SpaceData::T(t) => t.tapes.get(i).map(|tp| tp.node_dofs.as_slice()),
            _ => None,
        }
    }

    /// DOF table as CSV: `entityKind,entityId,dofIndex,essentialValue`.
    pub fn dof_table_csv(&self, src: &SourceValues) -> String {
        let mut s = String::from("entityKind,entityId,dofIndex,essentialValue\n");
        for (d, e) in self.entities.iter().enumerate() {
            let ess = self.constraints[d].map(|c| format!("{:.16e}", c.value(src))).unwrap_or_default();
            let _ = writeln!(s, "{},{},{},{}", e.kind.name(), e.id, d, ess);
        }
        s
    }
}

/// Merges a DOF expansion with weights into a map from DOF to coefficient,
/// cancelling exactly where possible.
pub fn merge_expansion<'a>(terms: impl IntoIterator<Item = (f64, &'a [(usize, f64)])>) -> Vec<(usize, f64)> {
    let mut acc: Vec<(usize, f64)> = Vec::new();
    for (w, list) in terms {
        for &(d, c) in list {
            match acc.iter_mut().find(|(k, _)| *k == d) {
                Some(slot) => slot.1 += w * c,
                None => acc.push((d, w * c)),
            }
        }
    }
    acc.sort_by_key(|&(d, _)| d);
    acc
}
