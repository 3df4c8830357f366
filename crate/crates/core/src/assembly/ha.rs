use crate::linalg::{SparseMatrix, TripletBuilder};
use crate::materials::{Materials, MU0};
use crate::mesh::{Mesh2D, Region};
use crate::spaces::{curl_expansion, DofSpace, Family, SourceValues};

use super::forms::{a_gradgrad, coupling_matrix, h_mass, scatter};
use super::{block_matrix, AssembledSystem, AssemblyError, Fields};

/// Iteration-independent parts of the h-a system.
#[derive(Debug, Clone)]
pub struct HaProblem<'a> {
    pub mesh: &'a Mesh2D,
    pub h: &'a DofSpace,
    pub a: &'a DofSpace,
    pub materials: Materials,
    /// `∫ μ0 h·h'`.
    pub mass: SparseMatrix,
    /// Coupling `B` (a rows, h columns).
    pub b: SparseMatrix,
    /// `∫ ν grad a·grad a'`.
    pub c: SparseMatrix,
    /// Conducting triangles with area and `curl h` expansion.
    pub(crate) curls: Vec<(usize, f64, Vec<(usize, f64)>)>,
}

impl<'a> HaProblem<'a> {
    pub fn new(mesh: &'a Mesh2D, h: &'a DofSpace, a: &'a DofSpace, materials: Materials) -> Result<Self, AssemblyError> {
        if h.family != Family::H || a.family != Family::A {
            return Err(AssemblyError::Mismatch("h-a needs an H and an A space".into()));
        }
        let mass = h_mass(mesh, h, |_| MU0);
        let b = coupling_matrix(mesh, h, a)?;
        let c = a_gradgrad(mesh, a, |r| materials.magnetic(r).nu_and_dh_db(0.0).1);
        let curls = (0..mesh.triangles().len())
            .filter(|&t| mesh.triangles()[t].region == Region::HSc)
            .map(|t| (t, mesh.signed_area(t), curl_expansion(h, mesh, t)))
            .collect();
        Ok(HaProblem { mesh, h, a, materials, mass, b, c, curls })
    }

    /// `curl h` per conducting triangle, in the order of the stored expansions.
    pub fn current_densities(&self, h: &[f64]) -> Vec<(usize, f64)> {
        self.curls
            .iter()
            .map(|(t, _, e)| (*t, e.iter().map(|&(d, c)| c * h[d]).sum()))
            .collect()
    }

    /// Essential values of both fields at the given source amplitudes.
    pub fn essential(&self, src: &SourceValues) -> Vec<Option<f64>> {
        let mut out: Vec<Option<f64>> = (0..self.h.n_dofs())
            .map(|d| self.h.constraint(d).map(|c| c.value(src)))
            .collect();
        out.extend((0..self.a.n_dofs()).map(|d| self.a.constraint(d).map(|c| c.value(src))));
        out
    }
}

/// Newton-iteration system of the h-a formulation, multiplied by `dt`:
///
/// ```text
/// [ μ0 M + dt Kρ'   Bᵀ ] [h]   [ M h⁻ + Bᵀ a⁻ − dt ∫(ρ − ρ') j curl h' + dt V ]
/// [ B             −C  ] [a] = [ 0                                          ]
/// ```
///
/// where `ρ' = ∂e/∂j` and `j` are evaluated at `iter`, `h⁻, a⁻` is the previous
/// step and `V` enters the global row of each voltage-driven conductor.
pub fn assemble_ha_iteration(
    p: &HaProblem,
    prev: &Fields,
    iter: &Fields,
    dt: f64,
    src: &SourceValues,
) -> Result<AssembledSystem, AssemblyError> {
    let (nh, na) = (p.h.n_dofs(), p.a.n_dofs());
    for (x, name) in [(prev, "previous state"), (iter, "iterate")] {
        if x.v.len() != nh || x.q.len() != na {
            return Err(AssemblyError::Mismatch(format!("{name} has wrong length")));
        }
    }
    let law = p.materials.conductor;
    let mut kc = TripletBuilder::new(nh, nh);
    let mut s_h = p.mass.mul_vec(&prev.v);
    let bt_a = p.b.tmul_vec(&prev.q);
    s_h.iter_mut().zip(&bt_a).for_each(|(s, v)| *s += v);
    for (t, area, e) in &p.curls {
        let j: f64 = e.iter().map(|&(d, c)| c * iter.v[d]).sum();
        let (rho, de) = (law.rho(j), law.de_dj(j));
        if !(rho.is_finite() && de.is_finite()) {
            return Err(AssemblyError::NonFinite(*t));
        }
        scatter(&mut kc, e, e, dt * de * area, 0, 0);
        let r = dt * (rho - de) * j * area;
        if r != 0.0 {
            for &(d, c) in e {
                s_h[d] -= r * c;
            }
        }
    }
    for (i, &g) in p.h.global_dofs().iter().enumerate() {
        if !p.h.is_essential(g) {
            s_h[g] += dt * src.voltages.get(i).copied().unwrap_or(0.0);
        }
    }
    let a_block = p.mass.add(1.0, &kc.build(), 1.0);
    let k = block_matrix(&a_block, &p.b, &p.c.scale(-1.0));
    let mut s = s_h;
    s.extend(std::iter::repeat_n(0.0, na));
    Ok(AssembledSystem::from_full(k, s, &p.essential(src), nh, dt))
}
