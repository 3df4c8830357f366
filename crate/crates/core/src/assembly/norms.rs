use serde::{Deserialize, Serialize};

use crate::linalg::SparseMatrix;
use crate::materials::MU0;
use crate::mesh::Mesh2D;
use crate::spaces::{DofSpace, Family};

use super::forms::{a_gradgrad, h_curlcurl, h_mass, tape_stiffness};
use super::AssemblyError;

/// Characteristic constants of the energy norms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct NormSpec {
    pub mu0: f64,
    pub rho0: f64,
    pub dt0: f64,
    pub nu0: f64,
    /// Scale the tape norm by the mesh size.
    pub mesh_dependent: bool,
}

impl Default for NormSpec {
    fn default() -> Self {
        NormSpec::new(1.0)
    }
}

impl NormSpec {
    pub fn new(dt0: f64) -> Self {
        NormSpec { mu0: MU0, rho0: 1.6e-8, dt0, nu0: 1.0 / MU0, mesh_dependent: true }
    }

    pub fn validate(&self) -> Result<(), AssemblyError> {
        for (v, name) in [(self.mu0, "mu0"), (self.rho0, "rho0"), (self.dt0, "dt0"), (self.nu0, "nu0")] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(AssemblyError::Mismatch(format!("norm constant {name} must be positive")));
            }
        }
        Ok(())
    }
}

/// Norm matrix of a space over its full DOF set:
///
/// - H: `∫ μ0 h·h' + ∫_sc Δt0 ρ0 curl h curl h'`
/// - A: `∫ ν0 grad a·grad a'`
/// - T: `δ ∮ w Δt0 ρ0 (dt/ds)(dt'/ds)`
pub fn norm_matrix(mesh: &Mesh2D, space: &DofSpace, spec: &NormSpec) -> Result<SparseMatrix, AssemblyError> {
    spec.validate()?;
    Ok(match space.family {
        Family::H => {
            let m = h_mass(mesh, space, |_| spec.mu0);
            m.add(1.0, &h_curlcurl(mesh, space, |_| spec.dt0 * spec.rho0), 1.0)
        }
        Family::A => {
            if space.n_free() == space.n_dofs() {
                return Err(AssemblyError::SingularNorm(
                    "A norm needs essential values on GAMMA_E".into(),
                ));
            }
            a_gradgrad(mesh, space, |_| spec.nu0)
        }
        Family::T => {
            let delta = if spec.mesh_dependent { mesh.delta() } else { 1.0 };
            let w: Vec<f64> = mesh
                .interfaces()
                .iter()
                .map(|s| space.tape_thickness(s.group).unwrap_or(1.0))
                .collect();
            tape_stiffness(mesh, space, |seg, _| delta * w[seg] * spec.dt0 * spec.rho0)
        }
    })
}

/// Restriction of a full matrix to the free DOFs of a row and a column space.
pub fn restrict_free(m: &SparseMatrix, rows: &DofSpace, cols: &DofSpace) -> SparseMatrix {
    m.select(rows.free_dofs(), cols.free_dofs())
}
