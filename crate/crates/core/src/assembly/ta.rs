use crate::linalg::SparseMatrix;
use crate::materials::Materials;
use crate::mesh::{InterfaceTag, Mesh2D};
use crate::quadrature::GAUSS3;
use crate::spaces::{DofSpace, Family, SourceValues};

use super::forms::{a_gradgrad, coupling_matrix, tape_currents, tape_stiffness, trace_basis};
use super::{block_matrix, AssembledSystem, AssemblyError, Fields};

/// Iteration-independent parts of the t-a system.
#[derive(Debug, Clone)]
pub struct TaProblem<'a> {
    pub mesh: &'a Mesh2D,
    pub t: &'a DofSpace,
    pub a: &'a DofSpace,
    pub materials: Materials,
    /// Coupling `B[q, v] = ∮ w ψ_q dψ_v/ds` (a rows, t columns).
    pub b: SparseMatrix,
    /// `∫ ν grad a·grad a'`.
    pub k: SparseMatrix,
}

impl<'a> TaProblem<'a> {
    pub fn new(mesh: &'a Mesh2D, t: &'a DofSpace, a: &'a DofSpace, materials: Materials) -> Result<Self, AssemblyError> {
        if t.family != Family::T || a.family != Family::A {
            return Err(AssemblyError::Mismatch("t-a needs a T and an A space".into()));
        }
        let b = coupling_matrix(mesh, t, a)?;
        let k = a_gradgrad(mesh, a, |r| materials.magnetic(r).nu_and_dh_db(0.0).1);
        Ok(TaProblem { mesh, t, a, materials, b, k })
    }

    pub fn essential(&self, src: &SourceValues) -> Vec<Option<f64>> {
        let mut out: Vec<Option<f64>> = (0..self.t.n_dofs())
            .map(|d| self.t.constraint(d).map(|c| c.value(src)))
            .collect();
        out.extend((0..self.a.n_dofs()).map(|d| self.a.constraint(d).map(|c| c.value(src))));
        out
    }

    fn thickness(&self, seg: usize) -> f64 {
        self.t.tape_thickness(self.mesh.interfaces()[seg].group).unwrap_or(1.0)
    }
}

/// Newton-iteration system of the t-a formulation, multiplied by `dt` and
/// with the tape equation negated for symmetry:
///
/// ```text
/// [ −dt Rρ'  −Bᵀ ] [t]   [ −Bᵀ a⁻ + dt ∮ w (ρ − ρ') j dt'/ds − dt w V ]
/// [ −B        K  ] [a] = [ 0                                         ]
/// ```
///
/// with `j = dt/ds` at the iterate and `V` in the global row of each
/// voltage-driven tape.
pub fn assemble_ta_iteration(
    p: &TaProblem,
    prev: &Fields,
    iter: &Fields,
    dt: f64,
    src: &SourceValues,
) -> Result<AssembledSystem, AssemblyError> {
    let (nt, na) = (p.t.n_dofs(), p.a.n_dofs());
    for (x, name) in [(prev, "previous state"), (iter, "iterate")] {
        if x.v.len() != nt || x.q.len() != na {
            return Err(AssemblyError::Mismatch(format!("{name} has wrong length")));
        }
    }
    let law = p.materials.conductor;
    let js = tape_currents(p.mesh, p.t, &iter.v);
    let mut de = vec![[0.0; 3]; js.len()];
    let mut s_t: Vec<f64> = p.b.tmul_vec(&prev.q).iter().map(|v| -v).collect();
    for seg in p.mesh.interface_segments(InterfaceTag::GammaW) {
        let w = p.thickness(seg);
        let len = p.mesh.segment_length(p.mesh.interfaces()[seg].nodes);
        let basis = trace_basis(p.mesh, p.t, seg);
        for (k, &(u, gw)) in GAUSS3.iter().enumerate() {
            let j = js[seg][k];
            let (rho, d) = (law.rho(j), law.de_dj(j));
            if !(rho.is_finite() && d.is_finite()) {
                return Err(AssemblyError::NonFinite(seg));
            }
            de[seg][k] = w * d;
            let r = dt * w * (rho - d) * j * gw * len;
            if r != 0.0 {
                for (f, e) in &basis {
                    let fv = f.eval(u);
                    for &(dof, c) in e {
                        s_t[dof] += r * fv * c;
                    }
                }
            }
        }
    }
    for (i, &g) in p.t.global_dofs().iter().enumerate() {
        if !p.t.is_essential(g) {
            let w = p.t.tape_thickness(i).unwrap_or(1.0);
            s_t[g] -= dt * w * src.voltages.get(i).copied().unwrap_or(0.0);
        }
    }
    let r = tape_stiffness(p.mesh, p.t, |seg, k| de[seg][k]);
    let k = block_matrix(&r.scale(-dt), &p.b.scale(-1.0), &p.k);
    let mut s = s_t;
    s.extend(std::iter::repeat_n(0.0, na));
    Ok(AssembledSystem::from_full(k, s, &p.essential(src), nt, dt))
}
