//! Element-level bilinear forms scattered into full (unconstrained) matrices.

use crate::linalg::{SparseMatrix, TripletBuilder};
use crate::mesh::{InterfaceTag, Mesh2D, Region};
use crate::quadrature::{GAUSS3, TRI6};
use crate::spaces::{curl_expansion, DofSpace, Family, LineFn, LocalFn, TriGeom};

use super::AssemblyError;

/// Adds `w * Σ_ij c_i c_j` for two DOF expansions.
pub(crate) fn scatter(tb: &mut TripletBuilder, rows: &[(usize, f64)], cols: &[(usize, f64)], w: f64, roff: usize, coff: usize) {
    if w == 0.0 {
        return;
    }
    for &(i, ci) in rows {
        for &(j, cj) in cols {
            tb.add(roff + i, coff + j, w * ci * cj);
        }
    }
}

/// `∫ w(region) h·h'` over the h domain.
pub fn h_mass(mesh: &Mesh2D, h: &DofSpace, weight: impl Fn(Region) -> f64) -> SparseMatrix {
    let n = h.n_dofs();
    let mut tb = TripletBuilder::new(n, n);
    for (t, tri) in mesh.triangles().iter().enumerate() {
        if !tri.region.in_h() {
            continue;
        }
        let w = weight(tri.region);
        let g = TriGeom::new(mesh, t);
        let local = h.tri_local(t);
        let vals: Vec<Vec<[f64; 2]>> = TRI6
            .iter()
            .map(|(lam, _)| local.iter().map(|(f, _)| f.vector(&g, *lam)).collect())
            .collect();
        for (i, (_, ei)) in local.iter().enumerate() {
            for (j, (_, ej)) in local.iter().enumerate() {
                let m: f64 = TRI6
                    .iter()
                    .zip(&vals)
                    .map(|((_, qw), v)| qw * (v[i][0] * v[j][0] + v[i][1] * v[j][1]))
                    .sum();
                scatter(&mut tb, ei, ej, w * g.area * m, 0, 0);
            }
        }
    }
    tb.build().with_symmetric(true)
}

/// `∫ w_t curl h curl h'` over conducting triangles, with `w_t` per triangle.
pub fn h_curlcurl(mesh: &Mesh2D, h: &DofSpace, weight: impl Fn(usize) -> f64) -> SparseMatrix {
    let n = h.n_dofs();
    let mut tb = TripletBuilder::new(n, n);
    for (t, tri) in mesh.triangles().iter().enumerate() {
        if tri.region != Region::HSc {
            continue;
        }
        let c = curl_expansion(h, mesh, t);
        let area = mesh.signed_area(t);
        scatter(&mut tb, &c, &c, weight(t) * area, 0, 0);
    }
    tb.build().with_symmetric(true)
}

/// Element-wise `curl h` of a coefficient vector (zero off the conductors).
pub fn h_curls(mesh: &Mesh2D, h: &DofSpace, coeffs: &[f64]) -> Vec<f64> {
    (0..mesh.triangles().len())
        .map(|t| {
            if mesh.triangles()[t].region == Region::HSc {
                curl_expansion(h, mesh, t).iter().map(|&(d, c)| c * coeffs[d]).sum()
            } else {
                0.0
            }
        })
        .collect()
}

/// `∫ w(region) grad a · grad a'` over the a domain.
pub fn a_gradgrad(mesh: &Mesh2D, a: &DofSpace, weight: impl Fn(Region) -> f64) -> SparseMatrix {
    let n = a.n_dofs();
    let mut tb = TripletBuilder::new(n, n);
    for (t, tri) in mesh.triangles().iter().enumerate() {
        if !tri.region.in_a() {
            continue;
        }
        let w = weight(tri.region);
        let g = TriGeom::new(mesh, t);
        let local = a.tri_local(t);
        let quadratic = local.iter().any(|(f, _)| matches!(f, LocalFn::Bubble(_)));
        let vals: Vec<Vec<[f64; 2]>> = TRI6
            .iter()
            .map(|(lam, _)| local.iter().map(|(f, _)| f.vector(&g, *lam)).collect())
            .collect();
        for (i, (_, ei)) in local.iter().enumerate() {
            for (j, (_, ej)) in local.iter().enumerate() {
                let m: f64 = if quadratic {
                    TRI6.iter()
                        .zip(&vals)
                        .map(|((_, qw), v)| qw * (v[i][0] * v[j][0] + v[i][1] * v[j][1]))
                        .sum()
                } else {
                    // constant gradients: one-point rule is exact and avoids round-off
                    let v = &vals[0];
                    v[i][0] * v[j][0] + v[i][1] * v[j][1]
                };
                scatter(&mut tb, ei, ej, w * g.area * m, 0, 0);
            }
        }
    }
    tb.build().with_symmetric(true)
}

/// Trace basis of a space on interface segment `seg`: each entry is a DOF
/// expansion with a function of the local parameter `u ∈ [0, 1]`.
pub(crate) enum TraceFn {
    /// Tangential component `h·τ` of an H function (constant part / bubble part).
    HConst(f64),
    HBubble(f64),
    /// Scalar value of an A function.
    A(LineFn),
    /// Arclength derivative of a T function.
    T(LineFn, f64),
}

impl TraceFn {
    pub fn eval(&self, u: f64) -> f64 {
        match *self {
            TraceFn::HConst(c) => c,
            TraceFn::HBubble(inv_len) => (1.0 - 2.0 * u) * inv_len,
            TraceFn::A(f) => f.value(u),
            TraceFn::T(f, len) => f.deriv(u, len),
        }
    }
}

pub(crate) fn trace_basis(mesh: &Mesh2D, space: &DofSpace, seg: usize) -> Vec<(TraceFn, Vec<(usize, f64)>)> {
    let s = &mesh.interfaces()[seg];
    let len = mesh.segment_length(s.nodes);
    let e = mesh.interface_edge(seg);
    let mut out = Vec::new();
    match space.family {
        Family::H => {
            let sigma = if s.nodes[0] < s.nodes[1] { 1.0 } else { -1.0 };
            out.push((TraceFn::HConst(sigma / len), space.edge_circulation(e).to_vec()));
            if let Some(d) = space.dof_of(crate::spaces::EntityKind::Bubble, e) {
                out.push((TraceFn::HBubble(1.0 / len), vec![(d, 1.0)]));
            }
        }
        Family::A => {
            use crate::spaces::EntityKind::{Bubble, Node};
            for (f, n) in [(LineFn::Start, s.nodes[0]), (LineFn::End, s.nodes[1])] {
                if let Some(d) = space.dof_of(Node, n) {
                    out.push((TraceFn::A(f), vec![(d, 1.0)]));
                }
            }
            if let Some(d) = space.dof_of(Bubble, e) {
                out.push((TraceFn::A(LineFn::Bubble), vec![(d, 1.0)]));
            }
        }
        Family::T => {
            for (f, exp) in space.seg_local(seg) {
                out.push((TraceFn::T(f, len), exp));
            }
        }
    }
    out
}

/// Coupling matrix `B` (rows: Q = A space, columns: V = H or T space) over
/// the full DOF sets.
///
/// h-a: `B[q, v] = ∮_Γm ψ_q (ψ_v · τ) ds` with `τ = ẑ × n_Ωh`.
/// t-a: `B[q, v] = ∮_Γw w ψ_q (dψ_v/ds) ds`.
pub fn coupling_matrix(mesh: &Mesh2D, v: &DofSpace, q: &DofSpace) -> Result<SparseMatrix, AssemblyError> {
    if q.family != Family::A {
        return Err(AssemblyError::Mismatch("Q space must be an A space".into()));
    }
    let tag = match v.family {
        Family::H => InterfaceTag::GammaM,
        Family::T => InterfaceTag::GammaW,
        Family::A => return Err(AssemblyError::Mismatch("V space must be an H or T space".into())),
    };
    if q.interface() != Some(tag) && q.enrichment == 2 {
        return Err(AssemblyError::Mismatch("A space enriched on a different interface".into()));
    }
    let segs = mesh.interface_segments(tag);
    if segs.is_empty() {
        return Err(AssemblyError::Mismatch(format!("mesh has no {} interface", tag.tag())));
    }
    let mut tb = TripletBuilder::new(q.n_dofs(), v.n_dofs());
    for seg in segs {
        let s = &mesh.interfaces()[seg];
        let len = mesh.segment_length(s.nodes);
        let w = match v.family {
            Family::T => v.tape_thickness(s.group).unwrap_or(1.0),
            _ => 1.0,
        };
        let vb = trace_basis(mesh, v, seg);
        let qb = trace_basis(mesh, q, seg);
        for (qf, qe) in &qb {
            for (vf, ve) in &vb {
                let m: f64 = GAUSS3.iter().map(|&(u, gw)| gw * qf.eval(u) * vf.eval(u)).sum();
                scatter(&mut tb, qe, ve, w * len * m, 0, 0);
            }
        }
    }
    Ok(tb.build())
}

/// `∮_Γw w_seg(u) (dt/ds)(dt'/ds) ds` with a weight per segment and Gauss point.
pub fn tape_stiffness(mesh: &Mesh2D, t: &DofSpace, weight: impl Fn(usize, usize) -> f64) -> SparseMatrix {
    let n = t.n_dofs();
    let mut tb = TripletBuilder::new(n, n);
    for seg in mesh.interface_segments(InterfaceTag::GammaW) {
        let len = mesh.segment_length(mesh.interfaces()[seg].nodes);
        let basis = trace_basis(mesh, t, seg);
        for (fi, ei) in &basis {
            for (fj, ej) in &basis {
                let m: f64 = GAUSS3
                    .iter()
                    .enumerate()
                    .map(|(k, &(u, gw))| gw * weight(seg, k) * fi.eval(u) * fj.eval(u))
                    .sum();
                scatter(&mut tb, ei, ej, len * m, 0, 0);
            }
        }
    }
    tb.build().with_symmetric(true)
}

/// Sheet current density `dt/ds` at the Gauss points of every tape segment.
pub fn tape_currents(mesh: &Mesh2D, t: &DofSpace, coeffs: &[f64]) -> Vec<[f64; 3]> {
    let segs = mesh.interface_segments(InterfaceTag::GammaW);
    let mut out = vec![[0.0; 3]; mesh.interfaces().len()];
    for seg in segs {
        let basis = trace_basis(mesh, t, seg);
        for (k, &(u, _)) in GAUSS3.iter().enumerate() {
            out[seg][k] = basis
                .iter()
                .map(|(f, e)| f.eval(u) * e.iter().map(|&(d, c)| c * coeffs[d]).sum::<f64>())
                .sum();
        }
    }
    out
}

/// Row `G[v] = ∮_Γm ψ_v · τ ds`: the coupling term produced by a uniform
/// out-of-plane electric potential gradient. It equals the circulation of
/// `ψ_v` around the closed interface.
pub fn uniform_potential_row(mesh: &Mesh2D, h: &DofSpace) -> Vec<f64> {
    let mut g = vec![0.0; h.n_dofs()];
    for seg in mesh.interface_segments(InterfaceTag::GammaM) {
        let len = mesh.segment_length(mesh.interfaces()[seg].nodes);
        for (f, e) in trace_basis(mesh, h, seg) {
            let m: f64 = GAUSS3.iter().map(|&(u, gw)| gw * f.eval(u)).sum();
            for (d, c) in e {
                g[d] += len * m * c;
            }
        }
    }
    g
}
