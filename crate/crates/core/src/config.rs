//! Declarative run configuration. Every field has a default, so `{}` runs
//! the stacked-bar case; `null` entries resolve to scenario defaults.

use std::path::Path;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assembly::NormSpec;
use crate::infsup::Formulation;
use crate::materials::{MagneticLaw, Materials, PowerLaw, Resistivity};
use crate::mesh::{GeometryParams, Mesh2D, Scenario};
use crate::spaces::{BoundaryData, Circuit};
use crate::transient::{NewtonConfig, TimeConfig, Waveform};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("invalid config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

/// Geometry and mesh size. `delta` is the element size at the conductor
/// surface of the base mesh, which is refined `refinements` times for
/// `solve`, `mesh` and `eigenmode`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryConfig {
    /// Width of each bar (m).
    pub bar_width: f64,
    /// Height of each bar (m).
    pub bar_height: f64,
    /// Half side of the square air box (m); scenario default when null.
    pub air_half_size: Option<f64>,
    pub tape_width: f64,
    pub tape_thickness: f64,
    /// Base element size (m).
    pub delta: f64,
    /// Size growth factor away from the conductors.
    pub grading: f64,
    /// Uniform refinements of the base mesh.
    pub refinements: usize,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        GeometryConfig {
            bar_width: 0.02,
            bar_height: 0.01,
            air_half_size: None,
            tape_width: 0.01,
            tape_thickness: 1e-6,
            delta: 2.5e-3,
            grading: 1.3,
            refinements: 3,
        }
    }
}

/// Conductor and magnetic material parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct MaterialConfig {
    /// Critical electric field (V/m).
    pub e_c: f64,
    /// Critical current density (A/m²); 3e8 for the bar, 2.5e8 for the tape when null.
    pub j_c: Option<f64>,
    /// Power-law exponent.
    pub n: f64,
    /// Relative permeability of the ferromagnet; 1000 for the bar, 1 for the tape when null.
    pub mu_r: Option<f64>,
    /// Linear resistivity (Ωm); replaces the power law when set.
    pub rho_linear: Option<f64>,
    /// Lower current-density floor of the power law (A/m²); 1e-3 j_c when null.
    pub j_reg: Option<f64>,
}

impl Default for MaterialConfig {
    fn default() -> Self {
        MaterialConfig { e_c: 1e-4, j_c: None, n: 20.0, mu_r: None, rho_linear: None, j_reg: None }
    }
}

/// Source ramp: linear from zero to the peak over `t_ramp`, then held for
/// as long again.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct TimeSettings {
    pub t_ramp: f64,
    pub ramp_steps: usize,
    /// Peak applied field (T); 0.4 for the bar, 0 for the tape when null.
    pub b_peak: Option<f64>,
    /// How each conductor or tape is driven.
    pub circuit: Circuit,
    /// Peak imposed current (A); zero for the bar, 0.1 I_c for the tape when null.
    pub current_peak: Option<f64>,
    /// Peak imposed voltage (V/m for bars, V for tapes) under voltage drive.
    pub voltage_peak: f64,
    pub newton: NewtonConfig,
}

impl Default for TimeSettings {
    fn default() -> Self {
        TimeSettings {
            t_ramp: 1.0,
            ramp_steps: 40,
            b_peak: None,
            circuit: Circuit::Current,
            current_peak: None,
            voltage_peak: 0.0,
            newton: NewtonConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    /// Number of uniform refinements of the base mesh (at least 3).
    pub n_refinements: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig { n_refinements: 3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticsConfig {
    /// Distance of the flux-density sampling line from the conductor (m).
    pub offset: f64,
    /// Second sampling line, inside the first element layer (m).
    pub interface_offset: f64,
    pub samples: usize,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        DiagnosticsConfig { offset: crate::diagnostics::DEFAULT_OFFSET, interface_offset: 1e-6, samples: 400 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct EigenmodeConfig {
    /// Index into the ascending nonzero spectrum; 0 is the smallest mode.
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    /// HA for the bar, TA for the tape when null.
    pub formulation: Option<Formulation>,
    /// Polynomial enrichment `[i, j]` of the (h or t, a) spaces. `solve` and
    /// `eigenmode` default to the stable `[2, 1]` (HA) or `[1, 2]` (TA);
    /// `infsup` runs all four pairings when null.
    pub pairing: Option<[u8; 2]>,
    pub geometry: GeometryConfig,
    pub material: MaterialConfig,
    pub time: TimeSettings,
    pub norms: NormSpec,
    pub sweep: SweepConfig,
    pub diagnostics: DiagnosticsConfig,
    pub eigenmode: EigenmodeConfig,
    /// Output directory; `--out` takes precedence.
    pub output_dir: Option<String>,
    /// Seed for randomized checks.
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            scenario: Scenario::StackedBar,
            formulation: None,
            pairing: None,
            geometry: GeometryConfig::default(),
            material: MaterialConfig::default(),
            time: TimeSettings::default(),
            norms: NormSpec::default(),
            sweep: SweepConfig::default(),
            diagnostics: DiagnosticsConfig::default(),
            eigenmode: EigenmodeConfig::default(),
            output_dir: None,
            seed: 0,
        }
    }
}

fn positive(v: f64, name: &str) -> Result<(), ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("{name} must be positive, got {v}")))
    }
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::from_json(&text)
    }

    /// JSON schema of the configuration, defaults included.
    pub fn schema() -> serde_json::Value {
        serde_json::to_value(schemars::schema_for!(ScenarioConfig)).expect("schema serializes")
    }

    /// Fills scenario defaults and validates every value. The pairing stays
    /// unset when it was not given.
    pub fn resolved(&self) -> Result<ScenarioConfig, ConfigError> {
        let mut c = self.clone();
        let bar = c.scenario == Scenario::StackedBar;
        let formulation = *c.formulation.get_or_insert(if bar { Formulation::Ha } else { Formulation::Ta });
        match (c.scenario, formulation) {
            (Scenario::StackedBar, Formulation::Ha) | (Scenario::SingleTape, Formulation::Ta) => {}
            (s, f) => return Err(invalid(format!("formulation {f:?} does not apply to scenario {s:?}"))),
        }
        let g = &mut c.geometry;
        g.air_half_size.get_or_insert(if bar { 0.05 } else { 0.03 });
        let m = &mut c.material;
        let j_c = *m.j_c.get_or_insert(if bar { 3e8 } else { 2.5e8 });
        m.mu_r.get_or_insert(if bar { 1000.0 } else { 1.0 });
        m.j_reg.get_or_insert(1e-3 * j_c);
        let t = &mut c.time;
        t.b_peak.get_or_insert(if bar { 0.4 } else { 0.0 });
        let i_c = j_c * c.geometry.tape_thickness * c.geometry.tape_width;
        t.current_peak.get_or_insert(if bar { 0.0 } else { 0.1 * i_c });
        c.validate()?;
        Ok(c)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        if let Some([i, j]) = self.pairing {
            if !(1..=2).contains(&i) || !(1..=2).contains(&j) {
                return Err(invalid(format!("pairing entries must be 1 or 2, got [{i}, {j}]")));
            }
        }
        let params = self.geometry_params();
        params.validate().map_err(|e| invalid(e.to_string()))?;
        crate::mesh::build_mesh(&params).map_err(|e| invalid(e.to_string()))?;
        let m = &self.material;
        positive(m.e_c, "material.e_c")?;
        positive(m.j_c.unwrap_or(f64::NAN), "material.j_c")?;
        if !(m.n >= 1.0 && m.n.is_finite()) {
            return Err(invalid(format!("material.n must be at least 1, got {}", m.n)));
        }
        if let Some(r) = m.rho_linear {
            positive(r, "material.rho_linear")?;
        }
        self.materials()?;
        let t = &self.time;
        positive(t.t_ramp, "time.t_ramp")?;
        if t.ramp_steps == 0 {
            return Err(invalid("time.ramp_steps must be positive"));
        }
        for (v, name) in [
            (t.b_peak.unwrap_or(f64::NAN), "time.b_peak"),
            (t.current_peak.unwrap_or(f64::NAN), "time.current_peak"),
            (t.voltage_peak, "time.voltage_peak"),
        ] {
            if !v.is_finite() {
                return Err(invalid(format!("{name} must be finite")));
            }
        }
        self.time_config().validate().map_err(|e| invalid(e.to_string()))?;
        self.norms.validate().map_err(|e| invalid(e.to_string()))?;
        if self.sweep.n_refinements < 3 {
            return Err(invalid(format!("sweep.n_refinements must be at least 3, got {}", self.sweep.n_refinements)));
        }
        let d = &self.diagnostics;
        positive(d.offset, "diagnostics.offset")?;
        positive(d.interface_offset, "diagnostics.interface_offset")?;
        if d.samples < 50 {
            return Err(invalid("diagnostics.samples must be at least 50"));
        }
        Ok(())
    }

    pub fn formulation(&self) -> Formulation {
        self.formulation.unwrap_or(match self.scenario {
            Scenario::StackedBar => Formulation::Ha,
            Scenario::SingleTape => Formulation::Ta,
        })
    }

    /// Configured pairing, or the stable default of the formulation.
    pub fn pairing_or_default(&self) -> (u8, u8) {
        match (self.pairing, self.formulation()) {
            (Some([i, j]), _) => (i, j),
            (None, Formulation::Ha) => (2, 1),
            (None, Formulation::Ta) => (1, 2),
        }
    }

    pub fn geometry_params(&self) -> GeometryParams {
        let g = &self.geometry;
        let base = match self.scenario {
            Scenario::StackedBar => GeometryParams::stacked_bar(g.delta),
            Scenario::SingleTape => GeometryParams::single_tape(g.delta),
        };
        GeometryParams {
            bar_width: g.bar_width,
            bar_height: g.bar_height,
            air_half_size: g.air_half_size.unwrap_or(base.air_half_size),
            tape_width: g.tape_width,
            tape_thickness: g.tape_thickness,
            grading: g.grading,
            ..base
        }
    }

    /// Base mesh refined `geometry.refinements` times.
    pub fn mesh(&self) -> Result<Mesh2D, ConfigError> {
        let mut mesh = crate::mesh::build_mesh(&self.geometry_params()).map_err(|e| invalid(e.to_string()))?;
        for _ in 0..self.geometry.refinements {
            mesh = crate::mesh::refine(&mesh);
        }
        Ok(mesh)
    }

    pub fn materials(&self) -> Result<Materials, ConfigError> {
        let m = &self.material;
        let conductor = match m.rho_linear {
            Some(r) => Resistivity::Linear(r),
            None => {
                let j_c = m.j_c.unwrap_or(f64::NAN);
                let law = PowerLaw { e_c: m.e_c, j_c, n: m.n, j_reg: m.j_reg.unwrap_or(1e-3 * j_c) };
                Resistivity::PowerLaw(law)
            }
        };
        let mu_r = m.mu_r.unwrap_or(1.0);
        let ferro = if mu_r == 1.0 { MagneticLaw::Vacuum } else { MagneticLaw::Linear { mu_r } };
        Materials::new(conductor, ferro).map_err(|e| invalid(e.to_string()))
    }

    /// Number of driven conductors (bars or tapes).
    pub fn n_conductors(&self) -> usize {
        match self.scenario {
            Scenario::StackedBar => 2,
            Scenario::SingleTape => 1,
        }
    }

    pub fn boundary_data(&self) -> BoundaryData {
        BoundaryData { circuits: vec![self.time.circuit; self.n_conductors()], ..BoundaryData::default() }
    }

    pub fn time_config(&self) -> TimeConfig {
        let t = &self.time;
        let mut tc = TimeConfig::ramp_and_hold(t.t_ramp, t.ramp_steps);
        tc.newton = t.newton;
        tc.b_ext = Waveform::ramp_hold(t.b_peak.unwrap_or(0.0), t.t_ramp);
        let n = self.n_conductors();
        match t.circuit {
            Circuit::Current => {
                tc.currents = vec![Waveform::ramp_hold(t.current_peak.unwrap_or(0.0), t.t_ramp); n];
            }
            Circuit::Voltage => {
                tc.voltages = vec![Waveform::ramp_hold(t.voltage_peak, t.t_ramp); n];
            }
        }
        tc
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_the_stacked_bar() {
        let c = ScenarioConfig::from_json("{}").unwrap().resolved().unwrap();
        assert_eq!(c.formulation, Some(Formulation::Ha));
        assert_eq!(c.material.j_c, Some(3e8));
        assert_eq!(c.material.mu_r, Some(1000.0));
        assert_eq!(c.time.b_peak, Some(0.4));
        assert_eq!(c.pairing_or_default(), (2, 1));
        assert_eq!(c.time_config().n_steps(), 80);
    }

    #[test]
    fn tape_defaults() {
        let c = ScenarioConfig::from_json(r#"{"scenario": "SINGLE_TAPE"}"#).unwrap().resolved().unwrap();
        assert_eq!(c.formulation, Some(Formulation::Ta));
        assert_eq!(c.material.j_c, Some(2.5e8));
        assert!((c.time.current_peak.unwrap() - 0.25).abs() < 1e-12);
        assert_eq!(c.materials().unwrap().ferro, MagneticLaw::Vacuum);
        assert_eq!(c.pairing_or_default(), (1, 2));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(ScenarioConfig::from_json(r#"{"bogus": 1}"#), Err(ConfigError::Parse(_))));
        assert!(matches!(ScenarioConfig::from_json(r#"{"material": {"jc": 1}}"#), Err(ConfigError::Parse(_))));
        for bad in [
            r#"{"material": {"j_c": -3e8}}"#,
            r#"{"sweep": {"n_refinements": 2}}"#,
            r#"{"pairing": [3, 1]}"#,
            r#"{"scenario": "SINGLE_TAPE", "formulation": "HA"}"#,
            r#"{"geometry": {"delta": 0.009}}"#,
            r#"{"time": {"ramp_steps": 0}}"#,
        ] {
            let c = ScenarioConfig::from_json(bad).unwrap();
            assert!(matches!(c.resolved(), Err(ConfigError::Invalid(_))), "{bad}");
        }
    }

    #[test]
    fn resolved_round_trips() {
        let c = ScenarioConfig::default().resolved().unwrap();
        let text = serde_json::to_string_pretty(&c).unwrap();
        let back = ScenarioConfig::from_json(&text).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.resolved().unwrap(), c);
    }
}
