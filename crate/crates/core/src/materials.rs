//! Constitutive laws: superconductor resistivity and magnetic reluctivity.
//!
//! In the 2D setting the current density and electric field are out-of-plane
//! scalars, so the differential resistivity is a scalar as well.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mesh::Region;

/// Vacuum permeability (H/m).
pub const MU0: f64 = 4.0e-7 * std::f64::consts::PI;

#[derive(Debug, Error, PartialEq)]
pub enum MaterialError {
    #[error("invalid material parameter: {0}")]
    Invalid(String),
}

/// Power-law resistivity with a lower floor `j_reg` and an upper clamp.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLaw {
    pub e_c: f64,
    pub j_c: f64,
    pub n: f64,
    pub j_reg: f64,
}

impl PowerLaw {
    /// Law with the default floor `j_reg = 1e-3 j_c`.
    pub fn new(e_c: f64, j_c: f64, n: f64) -> Result<Self, MaterialError> {
        let law = PowerLaw { e_c, j_c, n, j_reg: 1e-3 * j_c };
        law.validate()?;
        Ok(law)
    }

    pub fn validate(&self) -> Result<(), MaterialError> {
        if !(self.e_c > 0.0 && self.e_c.is_finite()) {
            return Err(MaterialError::Invalid("e_c must be positive".into()));
        }
        if !(self.j_c > 0.0 && self.j_c.is_finite()) {
            return Err(MaterialError::Invalid("j_c must be positive".into()));
        }
        if !(self.n >= 1.0 && self.n.is_finite()) {
            return Err(MaterialError::Invalid("n must be at least 1".into()));
        }
        if !(self.j_reg >= 0.0 && self.j_reg.is_finite()) {
            return Err(MaterialError::Invalid("j_reg must be non-negative".into()));
        }
        Ok(())
    }

    pub fn rho_max(&self) -> f64 {
        self.e_c / self.j_c * 10f64.powf(6.0 * (self.n - 1.0) / self.n)
    }

    /// Resistivity ρ(|j|) in Ωm.
    pub fn rho(&self, j_norm: f64) -> f64 {
        let j = j_norm.abs().max(self.j_reg);
        (self.e_c / self.j_c * (j / self.j_c).powf(self.n - 1.0)).min(self.rho_max())
    }

    /// Differential resistivity ∂e/∂j.
    pub fn de_dj(&self, j: f64) -> f64 {
        let a = j.abs();
        if a <= self.j_reg {
            return self.n * self.rho(self.j_reg);
        }
        let raw = self.e_c / self.j_c * (a / self.j_c).powf(self.n - 1.0);
        if raw >= self.rho_max() {
            self.rho_max()
        } else {
            self.n * raw
        }
    }

    pub fn e(&self, j: f64) -> f64 {
        self.rho(j) * j
    }
}

/// Resistivity law of the conducting region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Resistivity {
    PowerLaw(PowerLaw),
    Linear(f64),
}

impl Resistivity {
    pub fn rho(&self, j: f64) -> f64 {
        match self {
            Resistivity::PowerLaw(p) => p.rho(j),
            Resistivity::Linear(r) => *r,
        }
    }

    pub fn de_dj(&self, j: f64) -> f64 {
        match self {
            Resistivity::PowerLaw(p) => p.de_dj(j),
            Resistivity::Linear(r) => *r,
        }
    }

    pub fn e(&self, j: f64) -> f64 {
        self.rho(j) * j
    }

    pub fn is_linear(&self) -> bool {
        match self {
            Resistivity::PowerLaw(p) => p.n == 1.0,
            Resistivity::Linear(_) => true,
        }
    }

    pub fn validate(&self) -> Result<(), MaterialError> {
        match self {
            Resistivity::PowerLaw(p) => p.validate(),
            Resistivity::Linear(r) if *r > 0.0 && r.is_finite() => Ok(()),
            Resistivity::Linear(_) => Err(MaterialError::Invalid("rho must be positive".into())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum MagneticLaw {
    Vacuum,
    Linear { mu_r: f64 },
}

impl MagneticLaw {
    pub fn mu(&self) -> f64 {
        match self {
            MagneticLaw::Vacuum => MU0,
            MagneticLaw::Linear { mu_r } => MU0 * mu_r,
        }
    }

    /// Reluctivity ν and differential reluctivity ∂h/∂b at `|b|`.
    pub fn nu_and_dh_db(&self, _b_norm: f64) -> (f64, f64) {
        let nu = 1.0 / self.mu();
        (nu, nu)
    }

    pub fn validate(&self) -> Result<(), MaterialError> {
        match self {
            MagneticLaw::Linear { mu_r } if !(*mu_r >= 1.0 && mu_r.is_finite()) => {
                Err(MaterialError::Invalid("mu_r must be at least 1".into()))
            }
            _ => Ok(()),
        }
    }
}

/// Material assignment per region. The h domain is non-magnetic; the
/// non-conducting part of the a domain outside the ferromagnet is vacuum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Materials {
    pub conductor: Resistivity,
    pub ferro: MagneticLaw,
}

impl Materials {
    pub fn new(conductor: Resistivity, ferro: MagneticLaw) -> Result<Self, MaterialError> {
        conductor.validate()?;
        ferro.validate()?;
        Ok(Materials { conductor, ferro })
    }

    /// Linear conductor and vacuum everywhere.
    pub fn vacuum(rho: f64) -> Self {
        Materials { conductor: Resistivity::Linear(rho), ferro: MagneticLaw::Vacuum }
    }

    pub fn magnetic(&self, region: Region) -> MagneticLaw {
        match region {
            Region::AFerro => self.ferro,
            _ => MagneticLaw::Vacuum,
        }
    }

    pub fn is_linear(&self) -> bool {
        self.conductor.is_linear()
    }

    /// Critical current density of the conductor, if defined.
    pub fn j_c(&self) -> Option<f64> {
        match self.conductor {
            Resistivity::PowerLaw(p) => Some(p.j_c),
            Resistivity::Linear(_) => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn critical_field_at_jc() {
        for n in [1.0, 5.0, 20.0, 40.0] {
            let p = PowerLaw::new(1e-4, 3e8, n).unwrap();
            assert!((p.e(3e8) - 1e-4).abs() < 1e-18);
        }
    }

    #[test]
    fn floor_and_clamp() {
        let p = PowerLaw::new(1e-4, 3e8, 20.0).unwrap();
        let floor = 20.0 * 1e-4 / 3e8 * 1e-3f64.powi(19);
        assert!((p.de_dj(0.0) - floor).abs() <= 1e-12 * floor);
        assert!(p.de_dj(0.0) > 0.0);
        assert_eq!(p.rho(1e12), p.rho_max());
        assert_eq!(p.de_dj(1e12), p.rho_max());
    }

    #[test]
    fn vacuum_reluctivity() {
        let (nu, d) = MagneticLaw::Vacuum.nu_and_dh_db(1.0);
        assert!((nu - 7.957_747_154_594_767e5).abs() < 1e-6);
        assert_eq!(nu, d);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(PowerLaw::new(1e-4, -1.0, 20.0).is_err());
        assert!(PowerLaw::new(1e-4, 1.0, 0.5).is_err());
        assert!(MagneticLaw::Linear { mu_r: 0.5 }.validate().is_err());
    }
}
