use super::{DofSpace, Family, LineFn, SpaceData, SpaceError};
use crate::mesh::{InterfaceTag, Mesh2D};

/// Cumulative arclength at the start of every segment of `tag`, in storage
/// order, followed by the total length.
pub fn interface_arclength(mesh: &Mesh2D, tag: InterfaceTag) -> Vec<f64> {
    let mut out = vec![0.0];
    for s in mesh.interface_segments(tag) {
        let last = *out.last().unwrap();
        out.push(last + mesh.segment_length(mesh.interfaces()[s].nodes));
    }
    out
}

/// Trace of a space on its coupling interface at parameter `u ∈ [0, 1]` of
/// segment `seg`. For H spaces this is `(h × n)_z = -h·τ` with `τ` the
/// direction of travel along the segment; for A spaces the value of `a`; for
/// T spaces the sheet current density `dt/ds`.
/// Panics if `seg` is not a segment of the space's interface.
pub fn segment_trace(space: &DofSpace, mesh: &Mesh2D, coeffs: &[f64], seg: usize, u: f64) -> f64 {
    let s = &mesh.interfaces()[seg];
    let len = mesh.segment_length(s.nodes);
    let e = mesh.interface_edge(seg);
    match &space.data {
        SpaceData::H(h) => {
            let sigma = if s.nodes[0] < s.nodes[1] { 1.0 } else { -1.0 };
            let circ: f64 = h.edge_map[e].iter().map(|&(d, c)| c * coeffs[d]).sum();
            let mut ht = sigma * circ / len;
            if let Some(&d) = h.bubble.get(&e) {
                ht += coeffs[d] * (1.0 - 2.0 * u) / len;
            }
            -ht
        }
        SpaceData::A(a) => {
            let mut v = coeffs[a.node_dof[&s.nodes[0]]] * (1.0 - u) + coeffs[a.node_dof[&s.nodes[1]]] * u;
            if let Some(&d) = a.bubble.get(&e) {
                v += coeffs[d] * u * (1.0 - u);
            }
            v
        }
        SpaceData::T(t) => t
            .seg_local(seg)
            .iter()
            .map(|(f, exp): &(LineFn, Vec<(usize, f64)>)| {
                f.deriv(u, len) * exp.iter().map(|&(d, c)| c * coeffs[d]).sum::<f64>()
            })
            .sum(),
    }
}

fn trace_tag(space: &DofSpace) -> InterfaceTag {
    match space.family {
        Family::H => InterfaceTag::GammaM,
        Family::T => InterfaceTag::GammaW,
        Family::A => space.interface().unwrap_or(InterfaceTag::GammaM),
    }
}

/// Locates arclength `s`: (segment, local parameter). Points on a node belong
/// to the segment that starts there, except the final node.
fn locate(mesh: &Mesh2D, tag: InterfaceTag, s: f64) -> Result<(usize, f64, usize), SpaceError> {
    let segs = mesh.interface_segments(tag);
    let arc = interface_arclength(mesh, tag);
    let len = *arc.last().unwrap();
    let tol = 1e-12 * len.max(1e-300);
    if segs.is_empty() || s < -tol || s > len + tol {
        return Err(SpaceError::OutOfRange { s, len });
    }
    let k = match arc[1..].iter().position(|&a| s < a) {
        Some(k) => k,
        None => segs.len() - 1,
    };
    let u = ((s - arc[k]) / (arc[k + 1] - arc[k])).clamp(0.0, 1.0);
    Ok((segs[k], u, k))
}

/// Trace of the discrete field at arclength `s` along the coupling interface.
pub fn eval_trace(space: &DofSpace, mesh: &Mesh2D, coeffs: &[f64], s: f64) -> Result<f64, SpaceError> {
    space.check_len(coeffs)?;
    let (seg, u, _) = locate(mesh, trace_tag(space), s)?;
    Ok(segment_trace(space, mesh, coeffs, seg, u))
}

/// Left and right limits of the trace at arclength `s`. They differ only at
/// interface nodes; at the two ends the missing side repeats the other.
pub fn eval_trace_limits(space: &DofSpace, mesh: &Mesh2D, coeffs: &[f64], s: f64) -> Result<(f64, f64), SpaceError> {
    space.check_len(coeffs)?;
    let tag = trace_tag(space);
    let (seg, u, k) = locate(mesh, tag, s)?;
    let right = segment_trace(space, mesh, coeffs, seg, u);
    if u == 0.0 && k > 0 {
        let prev = mesh.interface_segments(tag)[k - 1];
        return Ok((segment_trace(space, mesh, coeffs, prev, 1.0), right));
    }
    Ok((right, right))
}
