//! Command implementations behind the `mfem-stab` binary.
//!
//! Every command resolves its configuration before touching the output
//! directory and keeps its files in memory until the run has succeeded, so a
//! rejected configuration leaves nothing behind. Data files are
//! deterministic; timings only appear in `run.json`.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::{json, Value};
use thiserror::Error;

use crate::config::{ConfigError, ScenarioConfig};
use crate::diagnostics::{oscillation_metric, profile_current, sample_bn_profile, sample_tape_current, Side};
use crate::infsup::{
    coercivity_estimates, export_eigenmode, linearized, run_infsup_sweep, Formulation, InfSupError, InfSupProblem,
    InfSupReport,
};
use crate::linalg::LinalgError;
use crate::mesh::{write_native, Mesh2D};
use crate::spaces::{build_a_space, build_h_space, build_t_space, DofSpace};
use crate::transient::{run_transient, TimeHistory, TransientError};

pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NONCONVERGENCE: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Solve,
    Infsup,
    Mesh,
    Eigenmode,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Infsup => "infsup",
            Command::Mesh => "mesh",
            Command::Eigenmode => "eigenmode",
        }
    }
}

/// Command-line overrides of the configuration.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out: Option<PathBuf>,
    pub pairing: Option<(u8, u8)>,
    /// Sweep refinements for `infsup`, mesh refinements otherwise.
    pub refinements: Option<usize>,
    pub quiet: bool,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    NonConvergence(TransientError),
    #[error("{0}")]
    Failed(String),
    #[error("cannot write {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::NonConvergence(_) => EXIT_NONCONVERGENCE,
            CliError::Failed(_) | CliError::Io { .. } => EXIT_FAILURE,
        }
    }

    /// Machine-readable description, printed on stderr by the binary.
    pub fn to_json(&self) -> Value {
        let kind = match self {
            CliError::Config(_) => "config",
            CliError::NonConvergence(_) => "nonconvergence",
            CliError::Failed(_) => "failure",
            CliError::Io { .. } => "io",
        };
        let mut v = json!({ "error": kind, "message": self.to_string(), "exit_code": self.exit_code() });
        if let CliError::NonConvergence(TransientError::NonConvergence { step, time, halvings, trace }) = self {
            v["step"] = json!(step);
            v["time"] = json!(time);
            v["halvings"] = json!(halvings);
            v["residual_trace"] = json!(trace);
        }
        v
    }
}

impl From<TransientError> for CliError {
    fn from(e: TransientError) -> Self {
        match e {
            TransientError::Config(m) => CliError::Config(ConfigError::Invalid(m)),
            e @ TransientError::NonConvergence { .. } => CliError::NonConvergence(e),
            e => CliError::Failed(e.to_string()),
        }
    }
}

impl From<InfSupError> for CliError {
    fn from(e: InfSupError) -> Self {
        match e {
            InfSupError::TooFewRefinements(_)
            | InfSupError::Pairing(..)
            | InfSupError::Linalg(LinalgError::RankOutOfRange { .. }) => {
                CliError::Config(ConfigError::Invalid(e.to_string()))
            }
            e => CliError::Failed(e.to_string()),
        }
    }
}

fn failed(e: impl std::fmt::Display) -> CliError {
    CliError::Failed(e.to_string())
}

/// Files produced by a command, written only once it has succeeded.
#[derive(Debug, Default)]
struct Outputs {
    files: Vec<(String, String)>,
}

impl Outputs {
    fn add(&mut self, name: impl Into<String>, text: impl Into<String>) {
        self.files.push((name.into(), text.into()));
    }

    fn add_json(&mut self, name: &str, v: &impl serde::Serialize) {
        let mut text = serde_json::to_string_pretty(v).expect("serializable");
        text.push('\n');
        self.add(name, text);
    }

    fn names(&self) -> Vec<&str> {
        self.files.iter().map(|f| f.0.as_str()).collect()
    }

    fn write(&self, dir: &Path) -> Result<(), CliError> {
        fn io(p: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
            move |source| CliError::Io { path: p.display().to_string(), source }
        }
        std::fs::create_dir_all(dir).map_err(io(dir))?;
        for (name, text) in &self.files {
            let path = dir.join(name);
            std::fs::write(&path, text).map_err(io(&path))?;
        }
        Ok(())
    }
}

/// Summary of a finished run, also written to `run.json`.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub files: Vec<String>,
    pub json: Value,
}

/// Applies the overrides of `opts` and resolves the configuration.
pub fn prepare(cmd: Command, config: &ScenarioConfig, opts: &RunOptions) -> Result<ScenarioConfig, CliError> {
    let mut c = config.clone();
    if let Some((i, j)) = opts.pairing {
        c.pairing = Some([i, j]);
    }
    if let Some(n) = opts.refinements {
        match cmd {
            Command::Infsup => c.sweep.n_refinements = n,
            _ => c.geometry.refinements = n,
        }
    }
    Ok(c.resolved()?)
}

/// Output directory: `--out`, then the configured one, then `./out`.
pub fn out_dir(config: &ScenarioConfig, opts: &RunOptions) -> PathBuf {
    opts.out
        .clone()
        .or_else(|| config.output_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}

/// Runs `cmd` and writes its files. A non-converging transient writes only
/// `error.json`; any other error writes nothing.
pub fn run(cmd: Command, config: &ScenarioConfig, opts: &RunOptions) -> Result<RunSummary, CliError> {
    let start = Instant::now();
    let c = prepare(cmd, config, opts)?;
    let dir = out_dir(&c, opts);
    let say = |m: String| {
        if !opts.quiet {
            eprintln!("{m}");
        }
    };
    let mut out = Outputs::default();
    out.add_json("config.resolved.json", &c);
    let result = match cmd {
        Command::Solve => solve(&c, &mut out, &say),
        Command::Infsup => infsup(&c, &mut out, &say),
        Command::Mesh => mesh(&c, &mut out, &say),
        Command::Eigenmode => eigenmode(&c, &mut out, &say),
    };
    let details = match result {
        Ok(d) => d,
        Err(e @ CliError::NonConvergence(_)) => {
            let mut err = Outputs::default();
            err.add_json("error.json", &e.to_json());
            err.write(&dir)?;
            return Err(e);
        }
        Err(e) => return Err(e),
    };
    let mut files: Vec<String> = out.names().iter().map(|s| s.to_string()).collect();
    files.push("run.json".into());
    let json = json!({
        "command": cmd.name(),
        "version": env!("CARGO_PKG_VERSION"),
        "seconds": start.elapsed().as_secs_f64(),
        "threads": crate::infsup::worker_count(),
        "files": files,
        "result": details,
    });
    out.add_json("run.json", &json);
    out.write(&dir)?;
    say(format!("{} finished in {:.1} s; output in {}", cmd.name(), start.elapsed().as_secs_f64(), dir.display()));
    Ok(RunSummary { out_dir: dir, files, json })
}

/// Flux and potential spaces of `pairing` on `mesh`.
pub fn build_spaces(c: &ScenarioConfig, mesh: &Mesh2D, pairing: (u8, u8)) -> Result<(DofSpace, DofSpace), CliError> {
    let bc = c.boundary_data();
    let f = c.formulation();
    let v = match f {
        Formulation::Ha => build_h_space(mesh, pairing.0, &bc),
        Formulation::Ta => build_t_space(mesh, pairing.0, &bc),
    }
    .map_err(failed)?;
    let a = build_a_space(mesh, pairing.1, f.interface(), &bc).map_err(failed)?;
    Ok((v, a))
}

fn pairing_name((i, j): (u8, u8)) -> String {
    format!("{i}{j}")
}

fn solve(c: &ScenarioConfig, out: &mut Outputs, say: &dyn Fn(String)) -> Result<Value, CliError> {
    let pairing = c.pairing_or_default();
    let mesh = c.mesh()?;
    let (v, a) = build_spaces(c, &mesh, pairing)?;
    let time = c.time_config();
    say(format!(
        "solve {:?} pairing {:?}: {} + {} unknowns, {} steps",
        c.formulation(),
        pairing,
        v.n_free(),
        a.n_free(),
        time.n_steps()
    ));
    let start = Instant::now();
    let hist = run_transient(&mesh, &v, &a, c.materials()?, &time)?;
    let seconds = start.elapsed().as_secs_f64();
    out.add("newton.csv", hist.newton_csv());
    for i in 0..c.n_conductors() {
        out.add(format!("current_{i}.csv"), TimeHistory::series_csv(&hist.current(i)));
        out.add(format!("voltage_{i}.csv"), TimeHistory::series_csv(&hist.voltage(i)));
    }
    let last = hist.snapshots.last().ok_or_else(|| failed("no time steps"))?;
    let step = hist.steps.last().expect("one record per snapshot");
    let mut metrics = json!({
        "formulation": c.formulation(),
        "pairing": [pairing.0, pairing.1],
        "time": step.time,
        "steps": hist.steps.len(),
        "newton_iterations": hist.total_newton_iters(),
        "max_substeps": hist.steps.iter().map(|s| s.substeps).max().unwrap_or(0),
        "currents": step.currents,
        "voltages": step.voltages,
    });
    let d = &c.diagnostics;
    match c.formulation() {
        Formulation::Ha => {
            for (name, offset) in [("profile", d.offset), ("profile_interface", d.interface_offset)] {
                let p = sample_bn_profile(&mesh, &v, &a, &last.v, &last.q, offset, Side::Above, d.samples)
                    .map_err(failed)?;
                metrics[name] = json!({
                    "offset": offset,
                    "oscillation": oscillation_metric(&p).map_err(failed)?,
                    "sign_changes": p.sign_changes(),
                });
                out.add(format!("{name}.csv"), p.to_csv());
            }
        }
        Formulation::Ta => {
            let j_c = c.material.j_c.unwrap_or(f64::NAN);
            for tape in 0..mesh.tapes().len() {
                let p = sample_tape_current(&mesh, &v, &last.v, tape, j_c).map_err(failed)?;
                metrics[format!("tape_{tape}")] = json!({
                    "oscillation": oscillation_metric(&p).map_err(failed)?,
                    "interior_sign_changes": p.interior_sign_changes(1),
                    "profile_current": profile_current(&p, c.geometry.tape_thickness, j_c),
                });
                out.add(format!("tape_{tape}_current.csv"), p.to_csv());
            }
        }
    }
    out.add("final_state.txt", final_snapshot(&hist));
    out.add_json("metrics.json", &metrics);
    Ok(json!({ "solve_seconds": seconds, "newton_iterations": hist.total_newton_iters() }))
}

fn final_snapshot(hist: &TimeHistory) -> String {
    let n = hist.steps.len();
    let last = TimeHistory {
        formulation: hist.formulation,
        steps: hist.steps[n.saturating_sub(1)..].to_vec(),
        snapshots: hist.snapshots[n.saturating_sub(1)..].to_vec(),
    };
    last.snapshots_text()
}

fn infsup(c: &ScenarioConfig, out: &mut Outputs, say: &dyn Fn(String)) -> Result<Value, CliError> {
    let pairings: Vec<(u8, u8)> = match c.pairing {
        Some([i, j]) => vec![(i, j)],
        None => vec![(1, 1), (1, 2), (2, 1), (2, 2)],
    };
    let base = crate::mesh::build_mesh(&c.geometry_params()).map_err(|e| ConfigError::Invalid(e.to_string()))?;
    let materials = c.materials()?;
    let reference = if materials.is_linear() { materials } else { linearized(&materials) };
    let mut reports: Vec<InfSupReport> = Vec::new();
    let mut verdicts = serde_json::Map::new();
    let mut seconds = serde_json::Map::new();
    for p in pairings {
        let start = Instant::now();
        let mut r = run_infsup_sweep(&base, c.formulation(), p, c.sweep.n_refinements, &c.norms)?;
        r.coercivity = coercivity_estimates(&reference, &c.norms, c.time_config().dt).ok();
        say(format!(
            "infsup {:?} {:?}: {:?}, slope {:.3}, beta {:.3e} .. {:.3e}",
            r.formulation,
            p,
            r.verdict,
            r.fit.slope,
            r.min_beta(),
            r.max_beta()
        ));
        out.add(format!("infsup_{}.csv", pairing_name(p)), r.to_csv());
        verdicts.insert(pairing_name(p), json!(r.verdict));
        let mut t: Vec<f64> = r.records.iter().map(|m| m.seconds).collect();
        t.push(start.elapsed().as_secs_f64());
        seconds.insert(pairing_name(p), json!(t));
        reports.push(r);
    }
    // per-mesh timings go to run.json only
    let reports: Vec<InfSupReport> = reports
        .into_iter()
        .map(|mut r| {
            r.records.iter_mut().for_each(|m| m.seconds = 0.0);
            r
        })
        .collect();
    out.add_json("infsup.json", &reports);
    Ok(json!({ "verdicts": verdicts, "seconds": seconds }))
}

fn mesh(c: &ScenarioConfig, out: &mut Outputs, say: &dyn Fn(String)) -> Result<Value, CliError> {
    let mesh = c.mesh()?;
    mesh.validate().map_err(failed)?;
    let summary = json!({
        "scenario": c.scenario,
        "refinements": c.geometry.refinements,
        "nodes": mesh.n_nodes(),
        "triangles": mesh.triangles().len(),
        "edges": mesh.topology().n_edges(),
        "interface_segments": mesh.interfaces().len(),
        "tapes": mesh.tapes().len(),
        "delta": mesh.delta(),
        "area": mesh.total_area(),
    });
    say(format!("mesh: {} nodes, {} triangles, delta {:.3e} m", mesh.n_nodes(), mesh.triangles().len(), mesh.delta()));
    out.add("mesh.txt", write_native(&mesh));
    out.add_json("mesh.json", &summary);
    Ok(summary)
}

fn eigenmode(c: &ScenarioConfig, out: &mut Outputs, say: &dyn Fn(String)) -> Result<Value, CliError> {
    let pairing = c.pairing_or_default();
    let mesh = c.mesh()?;
    let p = InfSupProblem::new(&mesh, c.formulation(), pairing, &c.norms)?;
    let r = p.solve()?;
    let e = export_eigenmode(&p, &r, c.eigenmode.rank)?;
    say(format!(
        "eigenmode {:?} {:?} rank {}: eigenvalue {:.6e}, {} trace sign changes",
        c.formulation(),
        pairing,
        e.rank,
        e.eigenvalue,
        e.trace_sign_changes()
    ));
    let summary = json!({
        "formulation": c.formulation(),
        "pairing": [pairing.0, pairing.1],
        "rank": e.rank,
        "eigenvalue": e.eigenvalue,
        "beta": r.beta(),
        "rayleigh": e.rayleigh,
        "q_norm2": e.q_norm2,
        "trace_sign_changes": e.trace_sign_changes(),
        "n_nonzero": r.len(),
        "n_zero": r.n_zero,
    });
    out.add("eigen_q.csv", e.q_csv());
    out.add("eigen_v.csv", e.v_csv(p.v.family));
    out.add("eigen_trace.csv", e.trace_csv());
    out.add_json("eigenmode.json", &summary);
    Ok(summary)
}

/// Parses `i,j` into a pairing.
pub fn parse_pairing(s: &str) -> Result<(u8, u8), String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    match parts.as_slice() {
        [i, j] => {
            let i: u8 = i.parse().map_err(|_| format!("bad enrichment {i:?}"))?;
            let j: u8 = j.parse().map_err(|_| format!("bad enrichment {j:?}"))?;
            Ok((i, j))
        }
        _ => Err(format!("expected i,j, got {s:?}")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairing_parses() {
        assert_eq!(parse_pairing("2,1"), Ok((2, 1)));
        assert_eq!(parse_pairing(" 1 , 2 "), Ok((1, 2)));
        assert!(parse_pairing("1").is_err());
        assert!(parse_pairing("a,1").is_err());
    }

    #[test]
    fn overrides_are_applied() {
        let opts = RunOptions { pairing: Some((1, 1)), refinements: Some(4), ..RunOptions::default() };
        let c = prepare(Command::Infsup, &ScenarioConfig::default(), &opts).unwrap();
        assert_eq!(c.pairing, Some([1, 1]));
        assert_eq!(c.sweep.n_refinements, 4);
        let c = prepare(Command::Mesh, &ScenarioConfig::default(), &opts).unwrap();
        assert_eq!(c.geometry.refinements, 4);
        let opts = RunOptions { refinements: Some(2), ..RunOptions::default() };
        let e = prepare(Command::Infsup, &ScenarioConfig::default(), &opts).unwrap_err();
        assert_eq!(e.exit_code(), EXIT_CONFIG);
    }

    #[test]
    fn error_json_carries_the_exit_code() {
        let e = CliError::from(TransientError::NonConvergence { step: 3, time: 0.1, halvings: 4, trace: vec![1.0] });
        let v = e.to_json();
        assert_eq!(v["exit_code"], 3);
        assert_eq!(v["error"], "nonconvergence");
        assert_eq!(v["step"], 3);
    }
}
