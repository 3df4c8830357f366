//! Post-processing: flux density profiles near the material interface, tape
//! current profiles and a scalar oscillation measure.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use nalgebra::{DMatrix, DVector};

use crate::assembly::{norm_matrix, AssemblyError, Fields, NormSpec};
use crate::infsup::Formulation;
use crate::linalg::{solve_sparse, LinalgError};
use crate::materials::{Materials, MU0};
use crate::mesh::{InterfaceTag, Mesh2D, Region};
use crate::spaces::{
    build_a_space, build_h_space, build_t_space, eval_a, eval_h, segment_trace, BoundaryData, DofSpace, EntityKind,
    Family, SourceValues, SpaceError,
};
use crate::transient::Problem;

/// Default distance of the sampling line from the interface (m).
pub const DEFAULT_OFFSET: f64 = 1e-4;
/// Default number of samples of a flux density profile.
pub const DEFAULT_SAMPLES: usize = 400;

#[derive(Debug, Error, PartialEq)]
pub enum DiagnosticsError {
    #[error("sample point ({0:e}, {1:e}) is not in the expected region")]
    OutsideRegion(f64, f64),
    #[error("profile needs at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("mesh has no {0}")]
    Missing(&'static str),
    #[error("wrong space: {0}")]
    WrongSpace(&'static str),
    #[error(transparent)]
    Space(#[from] SpaceError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Side {
    /// In the a domain, `b = curl(a ẑ)`.
    Above,
    /// In the h domain, `b = μ0 h`.
    Below,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileSample {
    /// Strictly increasing positions (m).
    pub positions: Vec<f64>,
    pub values: Vec<f64>,
    /// Distance of the sampling line from the interface (m); zero on tapes.
    pub offset: f64,
    pub side: Option<Side>,
    /// Length of the element each value belongs to (tape profiles only).
    pub cell_widths: Vec<f64>,
}

impl ProfileSample {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `position,value` with 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("position,value\n");
        for (x, v) in self.positions.iter().zip(&self.values) {
            out.push_str(&format!("{x:.16e},{v:.16e}\n"));
        }
        out
    }

    /// Sign changes between consecutive samples, exact zeros skipped.
    pub fn sign_changes(&self) -> usize {
        crate::infsup::sign_changes(&self.values)
    }

    /// Sign changes that do not involve the first or last `skip` samples.
    pub fn interior_sign_changes(&self, skip: usize) -> usize {
        let n = self.values.len();
        if n <= 2 * skip {
            return 0;
        }
        crate::infsup::sign_changes(&self.values[skip..n - skip])
    }
}

/// Top edge of the conducting region of the stacked bar: `(y, x_min, x_max)`.
fn material_interface(mesh: &Mesh2D) -> Result<(f64, f64, f64), DiagnosticsError> {
    let [x0, _, x1, y1] = mesh
        .region_bbox(|r| r == Region::HSc)
        .ok_or(DiagnosticsError::Missing("conducting region"))?;
    Ok((y1, x0, x1))
}

/// Samples `b·n` (with `n` the outward normal of the conductor, here `+y`)
/// along a horizontal line at `offset` above or below the upper face of
/// the conductor. Points are evaluated in the element that contains them.
pub fn sample_bn_profile(
    mesh: &Mesh2D,
    h: &DofSpace,
    a: &DofSpace,
    h_coeffs: &[f64],
    a_coeffs: &[f64],
    offset: f64,
    side: Side,
    n_samples: usize,
) -> Result<ProfileSample, DiagnosticsError> {
    if h.family != Family::H || a.family != Family::A {
        return Err(DiagnosticsError::WrongSpace("need an H and an A space"));
    }
    if n_samples < 50 {
        return Err(DiagnosticsError::TooFewSamples { needed: 50, got: n_samples });
    }
    h.check_len(h_coeffs)?;
    a.check_len(a_coeffs)?;
    let (y0, x0, x1) = material_interface(mesh)?;
    let y = match side {
        Side::Above => y0 + offset,
        Side::Below => y0 - offset,
    };
    let mut positions = Vec::with_capacity(n_samples);
    let mut values = Vec::with_capacity(n_samples);
    for k in 0..n_samples {
        let x = x0 + (k as f64 + 0.5) * (x1 - x0) / n_samples as f64;
        let (t, lam) = mesh.locate([x, y]).ok_or(DiagnosticsError::OutsideRegion(x, y))?;
        let region = mesh.triangles()[t].region;
        let v = match side {
            Side::Above if region.in_a() => -eval_a(a, mesh, a_coeffs, t, lam).1[0],
            Side::Below if region == Region::HSc => MU0 * eval_h(h, mesh, h_coeffs, t, lam).0[1],
            _ => return Err(DiagnosticsError::OutsideRegion(x, y)),
        };
        positions.push(x);
        values.push(v);
    }
    Ok(ProfileSample { positions, values, offset, side: Some(side), cell_widths: Vec::new() })
}

/// `j_z / j_c` at the midpoint of every segment of tape `tape`, positioned
/// by arclength from the minus end.
pub fn sample_tape_current(
    mesh: &Mesh2D,
    t: &DofSpace,
    coeffs: &[f64],
    tape: usize,
    j_c: f64,
) -> Result<ProfileSample, DiagnosticsError> {
    if t.family != Family::T {
        return Err(DiagnosticsError::WrongSpace("need a T space"));
    }
    if tape >= mesh.tapes().len() {
        return Err(DiagnosticsError::Missing("such tape"));
    }
    t.check_len(coeffs)?;
    let mut positions = Vec::new();
    let mut values = Vec::new();
    let mut cell_widths = Vec::new();
    let mut s = 0.0;
    for seg in mesh.interface_chain(InterfaceTag::GammaW, tape) {
        let len = mesh.segment_length(mesh.interfaces()[seg].nodes);
        positions.push(s + 0.5 * len);
        values.push(segment_trace(t, mesh, coeffs, seg, 0.5) / j_c);
        cell_widths.push(len);
        s += len;
    }
    Ok(ProfileSample { positions, values, offset: 0.0, side: None, cell_widths })
}

/// Net current of a tape profile: `w j_c Σ value · cell width`.
pub fn profile_current(profile: &ProfileSample, thickness: f64, j_c: f64) -> f64 {
    thickness * j_c * profile.values.iter().zip(&profile.cell_widths).map(|(v, l)| v * l).sum::<f64>()
}

/// Total variation divided by the range; 1 for monotone or constant
/// profiles.
pub fn oscillation_metric(profile: &ProfileSample) -> Result<f64, DiagnosticsError> {
    oscillation_of(&profile.values)
}

pub fn oscillation_of(v: &[f64]) -> Result<f64, DiagnosticsError> {
    if v.len() < 3 {
        return Err(DiagnosticsError::TooFewSamples { needed: 3, got: v.len() });
    }
    if v.windows(2).all(|w| w[1] >= w[0]) || v.windows(2).all(|w| w[1] <= w[0]) {
        // summed differences may round above the range
        return Ok(1.0);
    }
    let tv: f64 = v.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = v.iter().copied().fold(f64::INFINITY, f64::min);
    if max == min {
        return Ok(1.0);
    }
    Ok((tv / (max - min)).max(1.0))
}

/// Area of conducting triangles where `|j| ≥ fraction · j_c`.
pub fn penetrated_area(mesh: &Mesh2D, currents: &[(usize, f64)], j_c: f64, fraction: f64) -> f64 {
    currents
        .iter()
        .filter(|(_, j)| j.abs() >= fraction * j_c)
        .map(|&(t, _)| mesh.signed_area(t))
        .sum()
}

/// Magnetic moment per unit length `m_y = −∫ x j dA` of element-wise
/// constant currents.
pub fn magnetic_moment(mesh: &Mesh2D, currents: &[(usize, f64)]) -> f64 {
    -currents
        .iter()
        .map(|&(t, j)| mesh.centroid(t)[0] * j * mesh.signed_area(t))
        .sum::<f64>()
}

#[derive(Debug, Error)]
pub enum PatchError {
    #[error("uniform field is not representable: interpolation residual {0:e}")]
    NotRepresentable(f64),
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Outcome of a uniform-field patch test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchReport {
    pub pairing: (u8, u8),
    /// Energy norm of the exact interpolant.
    pub reference_norm: f64,
    /// Energy norm of the discrete solution minus the interpolant.
    pub error_norm: f64,
    /// Computed coefficients, for spaces built with `field_dir`.
    #[serde(skip)]
    pub solution: Fields,
}

impl PatchReport {
    pub fn relative_error(&self) -> f64 {
        self.error_norm / self.reference_norm
    }
}

/// Uniform field `b0 · field_dir` with vacuum everywhere and conductors of
/// linear resistivity `rho` carrying no net current. The previous time level
/// is set to the exact interpolant, so the exact field is a solution of the
/// step: it is compared with the computed one in the norms of the inf-sup test.
pub fn uniform_field_patch(
    mesh: &Mesh2D,
    formulation: Formulation,
    pairing: (u8, u8),
    field_dir: [f64; 2],
    b0: f64,
    rho: f64,
) -> Result<PatchReport, PatchError> {
    let bc = BoundaryData { field_dir, ..BoundaryData::default() };
    let v = match formulation {
        Formulation::Ha => build_h_space(mesh, pairing.0, &bc)?,
        Formulation::Ta => build_t_space(mesh, pairing.0, &bc)?,
    };
    let a = build_a_space(mesh, pairing.1, formulation.interface(), &bc)?;
    let src = SourceValues { b_ext: b0, currents: vec![0.0; v.global_dofs().len()], voltages: Vec::new() };
    let b = [b0 * field_dir[0], b0 * field_dir[1]];
    // b = (da/dy, -da/dx)
    let exact_a = |p: [f64; 2]| b[0] * p[1] - b[1] * p[0];
    let q: Vec<f64> = (0..a.n_dofs())
        .map(|d| match a.entity(d) {
            e if e.kind == EntityKind::Node => exact_a(mesh.nodes()[e.id]),
            _ => 0.0,
        })
        .collect();
    let x_v = match v.family {
        Family::H => interpolate_uniform_h(mesh, &v, [b[0] / MU0, b[1] / MU0], &src)?,
        _ => v.essential_vector(&src),
    };
    let exact = Fields { v: x_v, q };
    let p = Problem::new(mesh, &v, &a, Materials::vacuum(rho))?;
    let sys = p.assemble(&exact, &exact, 1.0, &src)?;
    let computed = sys.expand(&solve_sparse(&sys.k, &sys.rhs)?);
    let norms = NormSpec::default();
    let energy = |x: &Fields| -> Result<f64, PatchError> {
        let nv = norm_matrix(mesh, &v, &norms)?;
        let nq = norm_matrix(mesh, &a, &norms)?;
        let dot = |m: &crate::linalg::SparseMatrix, y: &[f64]| -> f64 {
            m.mul_vec(y).iter().zip(y).map(|(u, w)| u * w).sum()
        };
        Ok((dot(&nv, &x.v) + dot(&nq, &x.q)).max(0.0).sqrt())
    };
    let diff = Fields {
        v: computed.v.iter().zip(&exact.v).map(|(u, w)| u - w).collect(),
        q: computed.q.iter().zip(&exact.q).map(|(u, w)| u - w).collect(),
    };
    Ok(PatchReport { pairing, reference_norm: energy(&exact)?, error_norm: energy(&diff)?, solution: computed })
}

/// Coefficients of a uniform `h` matching its circulation along every edge
/// of the h domain; essential values are kept and bubbles left at zero.
fn interpolate_uniform_h(mesh: &Mesh2D, h: &DofSpace, h0: [f64; 2], src: &SourceValues) -> Result<Vec<f64>, PatchError> {
    let mut x = h.essential_vector(src);
    let free = h.free_dofs();
    let topo = mesh.topology();
    let rows: Vec<usize> = (0..topo.n_edges()).filter(|&e| !h.edge_circulation(e).is_empty()).collect();
    let mut m = DMatrix::zeros(rows.len(), free.len());
    let mut r = DVector::zeros(rows.len());
    for (k, &e) in rows.iter().enumerate() {
        let [n0, n1] = topo.edges[e];
        let (p0, p1) = (mesh.nodes()[n0], mesh.nodes()[n1]);
        r[k] = h0[0] * (p1[0] - p0[0]) + h0[1] * (p1[1] - p0[1]);
        for &(d, c) in h.edge_circulation(e) {
            match h.free_index(d) {
                Some(f) => m[(k, f)] += c,
                None => r[k] -= c * x[d],
            }
        }
    }
    let sol = m.clone().svd(true, true).solve(&r, 1e-12).map_err(|_| PatchError::NotRepresentable(f64::NAN))?;
    let scale = r.amax().max(f64::MIN_POSITIVE);
    let miss = (&m * &sol - &r).amax() / scale;
    if miss > 1e-10 {
        return Err(PatchError::NotRepresentable(miss));
    }
    for (k, &d) in free.iter().enumerate() {
        x[d] = sol[k];
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prof(v: &[f64]) -> ProfileSample {
        ProfileSample {
            positions: (0..v.len()).map(|k| k as f64).collect(),
            values: v.to_vec(),
            offset: 0.0,
            side: None,
            cell_widths: vec![1.0; v.len()],
        }
    }

    #[test]
    fn metric_examples() {
        assert_eq!(oscillation_metric(&prof(&[0.0, 1.0, 3.0, 3.5])).unwrap(), 1.0);
        assert_eq!(oscillation_metric(&prof(&[0.0, 1.0, 2.0, 1.0, 0.0])).unwrap(), 2.0);
        assert_eq!(oscillation_metric(&prof(&[2.0; 5])).unwrap(), 1.0);
        for m in 2..10 {
            let v: Vec<f64> = (0..2 * m).map(|k| if k % 2 == 0 { 1.0 } else { -1.0 }).collect();
            assert_eq!(oscillation_metric(&prof(&v)).unwrap(), (2 * m - 1) as f64);
        }
        assert!(oscillation_metric(&prof(&[1.0, 2.0])).is_err());
    }

    #[test]
    fn interior_sign_changes_skip_ends() {
        let p = prof(&[-1.0, 1.0, 1.0, -1.0, 1.0, 1.0, -1.0]);
        assert_eq!(p.sign_changes(), 4);
        assert_eq!(p.interior_sign_changes(1), 2);
        assert_eq!(p.interior_sign_changes(4), 0);
    }

    #[test]
    fn patch_is_exact_on_the_base_bar_mesh() {
        let mesh = crate::mesh::build_stacked_bar_mesh(&crate::mesh::GeometryParams::stacked_bar(2.5e-3)).unwrap();
        for pairing in [(1, 1), (2, 1)] {
            let r = uniform_field_patch(&mesh, Formulation::Ha, pairing, [0.0, 1.0], 0.2, 1.6e-8).unwrap();
            assert!(r.reference_norm > 0.0);
            assert!(r.relative_error() < 1e-10, "{r:?}");
        }
    }
}
