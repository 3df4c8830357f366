//! Implicit Euler time stepping with Newton-Raphson iterations for both
//! coupled formulations, and recovery of the circuit quantities.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assembly::{
    assemble_ha_iteration, assemble_ta_iteration, AssembledSystem, AssemblyError, Fields, HaProblem,
    TaProblem,
};
use crate::infsup::Formulation;
use crate::linalg::{solve_sparse_ordered, weak_diagonal, FillOrder, LinalgError};
use crate::materials::Materials;
use crate::mesh::Mesh2D;
use crate::spaces::{DofSpace, Family, SourceValues};

#[derive(Debug, Error)]
pub enum TransientError {
    #[error("invalid time configuration: {0}")]
    Config(String),
    #[error("Newton failed at step {step} (t = {time:e}) after {halvings} halvings; residuals {trace:?}")]
    NonConvergence {
        step: usize,
        time: f64,
        halvings: usize,
        trace: Vec<f64>,
    },
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error("snapshot parse error: {0}")]
    Parse(String),
}

/// Piecewise-linear function of time, constant beyond its end points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Waveform {
    /// `(t, value)` pairs with increasing `t`.
    pub points: Vec<[f64; 2]>,
}

impl Waveform {
    pub fn constant(v: f64) -> Self {
        Waveform { points: vec![[0.0, v]] }
    }

    /// Linear rise from 0 to `peak` over `[0, t_ramp]`, then hold.
    pub fn ramp_hold(peak: f64, t_ramp: f64) -> Self {
        Waveform { points: vec![[0.0, 0.0], [t_ramp, peak]] }
    }

    pub fn at(&self, t: f64) -> f64 {
        let p = &self.points;
        match p.iter().position(|q| q[0] > t) {
            None => p.last().map_or(0.0, |q| q[1]),
            Some(0) => p[0][1],
            Some(k) => {
                let ([t0, v0], [t1, v1]) = (p[k - 1], p[k]);
                v0 + (v1 - v0) * (t - t0) / (t1 - t0)
            }
        }
    }

    fn validate(&self, name: &str) -> Result<(), TransientError> {
        if self.points.is_empty() {
            return Err(TransientError::Config(format!("{name}: waveform needs a point")));
        }
        if self.points.iter().any(|q| !q[0].is_finite() || !q[1].is_finite()) {
            return Err(TransientError::Config(format!("{name}: non-finite waveform point")));
        }
        if self.points.windows(2).any(|w| w[1][0] <= w[0][0]) {
            return Err(TransientError::Config(format!("{name}: waveform times must increase")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct NewtonConfig {
    pub max_iter: usize,
    pub rel_residual_tol: f64,
    pub rel_increment_tol: f64,
    /// Maximum number of successive step halvings.
    pub max_halvings: u32,
    /// Backtracking halvings of a Newton update that does not reduce the
    /// scaled residual; zero gives plain Newton-Raphson.
    pub max_backtracks: u32,
}

fn default_backtracks() -> u32 {
    4
}

impl Default for NewtonConfig {
    fn default() -> Self {
        NewtonConfig {
            max_iter: 30,
            rel_residual_tol: 1e-10,
            rel_increment_tol: 1e-12,
            max_halvings: 4,
            max_backtracks: default_backtracks(),
        }
    }
}

/// Time step, horizon and source waveforms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeConfig {
    pub dt: f64,
    pub t_end: f64,
    pub b_ext: Waveform,
    /// Imposed current per conductor or tape (used when current-driven).
    pub currents: Vec<Waveform>,
    /// Imposed voltage per conductor or tape (used when voltage-driven).
    pub voltages: Vec<Waveform>,
    pub newton: NewtonConfig,
}

impl TimeConfig {
    /// Ramp over `t_ramp` in `ramp_steps` steps, then hold for as long again.
    pub fn ramp_and_hold(t_ramp: f64, ramp_steps: usize) -> Self {
        TimeConfig {
            dt: t_ramp / ramp_steps as f64,
            t_end: 2.0 * t_ramp,
            b_ext: Waveform::constant(0.0),
            currents: Vec::new(),
            voltages: Vec::new(),
            newton: NewtonConfig::default(),
        }
    }

    pub fn n_steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }

    pub fn sources(&self, t: f64) -> SourceValues {
        SourceValues {
            b_ext: self.b_ext.at(t),
            currents: self.currents.iter().map(|w| w.at(t)).collect(),
            voltages: self.voltages.iter().map(|w| w.at(t)).collect(),
        }
    }

    pub fn validate(&self) -> Result<(), TransientError> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(TransientError::Config("dt must be positive".into()));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(TransientError::Config("t_end must be positive".into()));
        }
        let n = self.t_end / self.dt;
        if (n - n.round()).abs() > 1e-9 * n.max(1.0) {
            return Err(TransientError::Config("t_end must be a multiple of dt".into()));
        }
        let nw = &self.newton;
        if nw.max_iter < 1 {
            return Err(TransientError::Config("max_iter must be at least 1".into()));
        }
        for (v, name) in [(nw.rel_residual_tol, "rel_residual_tol"), (nw.rel_increment_tol, "rel_increment_tol")] {
            if !(v > 0.0 && v < 1.0) {
                return Err(TransientError::Config(format!("{name} must lie in (0, 1)")));
            }
        }
        if nw.max_halvings > 20 {
            return Err(TransientError::Config("max_halvings above 20".into()));
        }
        self.b_ext.validate("b_ext")?;
        for w in self.currents.iter().chain(&self.voltages) {
            w.validate("circuit")?;
        }
        Ok(())
    }
}

/// One accepted time step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub time: f64,
    /// Number of sub-steps taken to reach `time` (1 without halving).
    pub substeps: usize,
    /// Newton iterations summed over the sub-steps.
    pub newton_iters: usize,
    /// Scaled residual at acceptance of the last sub-step.
    pub residual: f64,
    /// Residual after each iteration of the last sub-step.
    pub residual_trace: Vec<f64>,
    /// Net current per conductor or tape (A).
    pub currents: Vec<f64>,
    /// Voltage per conductor or tape.
    pub voltages: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeHistory {
    pub formulation: Formulation,
    pub steps: Vec<StepRecord>,
    /// Solution at the end of every step.
    pub snapshots: Vec<Fields>,
}

impl TimeHistory {
    pub fn times(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.time).collect()
    }

    /// `(t, I_i)` for every step.
    pub fn current(&self, i: usize) -> Vec<[f64; 2]> {
        self.steps.iter().map(|s| [s.time, s.currents.get(i).copied().unwrap_or(0.0)]).collect()
    }

    /// `(t, V_i)` for every step.
    pub fn voltage(&self, i: usize) -> Vec<[f64; 2]> {
        self.steps.iter().map(|s| [s.time, s.voltages.get(i).copied().unwrap_or(0.0)]).collect()
    }

    pub fn total_newton_iters(&self) -> usize {
        self.steps.iter().map(|s| s.newton_iters).sum()
    }

    /// `time,value` with 17 significant digits.
    pub fn series_csv(series: &[[f64; 2]]) -> String {
        let mut out = String::from("time,value\n");
        for p in series {
            out.push_str(&format!("{:.16e},{:.16e}\n", p[0], p[1]));
        }
        out
    }

    /// Per-step Newton statistics.
    pub fn newton_csv(&self) -> String {
        let mut out = String::from("step,time,substeps,newton_iters,residual\n");
        for s in &self.steps {
            out.push_str(&format!(
                "{},{:.16e},{},{},{:.16e}\n",
                s.step, s.time, s.substeps, s.newton_iters, s.residual
            ));
        }
        out
    }

    /// ASCII block format: a `step <k> time <t> v <n_v> q <n_q>` header
    /// followed by one value per line, V block first.
    pub fn snapshots_text(&self) -> String {
        let mut out = String::new();
        for (s, x) in self.steps.iter().zip(&self.snapshots) {
            out.push_str(&format!("step {} time {:.16e} v {} q {}\n", s.step, s.time, x.v.len(), x.q.len()));
            for v in x.v.iter().chain(&x.q) {
                out.push_str(&format!("{v:.16e}\n"));
            }
        }
        out
    }
}

/// Parses [`TimeHistory::snapshots_text`] output into `(step, time, fields)`.
pub fn parse_snapshots(text: &str) -> Result<Vec<(usize, f64, Fields)>, TransientError> {
    let bad = |m: &str| TransientError::Parse(m.to_string());
    let mut lines = text.lines();
    let mut out = Vec::new();
    while let Some(header) = lines.next() {
        let f: Vec<&str> = header.split_whitespace().collect();
        if f.len() != 8 || f[0] != "step" || f[2] != "time" || f[4] != "v" || f[6] != "q" {
            return Err(bad(&format!("bad header {header:?}")));
        }
        let step = f[1].parse().map_err(|_| bad("step"))?;
        let time = f[3].parse().map_err(|_| bad("time"))?;
        let nv: usize = f[5].parse().map_err(|_| bad("v count"))?;
        let nq: usize = f[7].parse().map_err(|_| bad("q count"))?;
        let mut vals = Vec::with_capacity(nv + nq);
        for _ in 0..nv + nq {
            let l = lines.next().ok_or_else(|| bad("truncated block"))?;
            vals.push(l.trim().parse::<f64>().map_err(|_| bad("value"))?);
        }
        let q = vals.split_off(nv);
        out.push((step, time, Fields { v: vals, q }));
    }
    Ok(out)
}

/// The assembled problem of either formulation.
pub enum Problem<'a> {
    Ha(HaProblem<'a>),
    Ta(TaProblem<'a>),
}

impl<'a> Problem<'a> {
    /// Chooses the formulation from the family of `v`.
    pub fn new(mesh: &'a Mesh2D, v: &'a DofSpace, a: &'a DofSpace, materials: Materials) -> Result<Self, AssemblyError> {
        Ok(match v.family {
            Family::T => Problem::Ta(TaProblem::new(mesh, v, a, materials)?),
            _ => Problem::Ha(HaProblem::new(mesh, v, a, materials)?),
        })
    }

    pub fn formulation(&self) -> Formulation {
        match self {
            Problem::Ha(_) => Formulation::Ha,
            Problem::Ta(_) => Formulation::Ta,
        }
    }

    pub fn v_space(&self) -> &DofSpace {
        match self {
            Problem::Ha(p) => p.h,
            Problem::Ta(p) => p.t,
        }
    }

    pub fn a_space(&self) -> &DofSpace {
        match self {
            Problem::Ha(p) => p.a,
            Problem::Ta(p) => p.a,
        }
    }

    pub fn assemble(&self, prev: &Fields, iter: &Fields, dt: f64, src: &SourceValues) -> Result<AssembledSystem, AssemblyError> {
        match self {
            Problem::Ha(p) => assemble_ha_iteration(p, prev, iter, dt, src),
            Problem::Ta(p) => assemble_ta_iteration(p, prev, iter, dt, src),
        }
    }

    /// Net currents and voltages at a converged state. `sys` must be
    /// assembled at `x`.
    pub fn circuit(&self, sys: &AssembledSystem, x: &Fields, src: &SourceValues) -> (Vec<f64>, Vec<f64>) {
        let v = self.v_space();
        let res = sys.full_residual(x);
        let mut currents = Vec::new();
        let mut voltages = Vec::new();
        for (i, &g) in v.global_dofs().iter().enumerate() {
            let w = v.tape_thickness(i).unwrap_or(1.0);
            let imposed_v = src.voltages.get(i).copied().unwrap_or(0.0);
            match self {
                Problem::Ha(_) => {
                    currents.push(x.v[g]);
                    voltages.push(if v.is_essential(g) { res[g] / sys.dt } else { imposed_v });
                }
                Problem::Ta(_) => {
                    currents.push(w * x.v[g]);
                    voltages.push(if v.is_essential(g) { -res[g] / (sys.dt * w) } else { imposed_v });
                }
            }
        }
        (currents, voltages)
    }
}

struct StepOutcome {
    x: Fields,
    sys: AssembledSystem,
    iters: usize,
    trace: Vec<f64>,
}

/// Block-wise relative change `max_B ‖x_B − y_B‖∞ / ‖x_B‖∞`.
fn rel_increment(new: &Fields, old: &Fields) -> f64 {
    let block = |a: &[f64], b: &[f64]| {
        let d = a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        let n = a.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if d == 0.0 {
            0.0
        } else {
            d / n
        }
    };
    block(&new.v, &old.v).max(block(&new.q, &old.q))
}

/// Unknowns eliminated last through a dense Schur complement: the tape
/// unknowns of the t-a system, whose diagonal vanishes below `j_c`, and
/// weak-diagonal unknowns otherwise.
fn deferred_unknowns(p: &Problem, sys: &AssembledSystem) -> Vec<bool> {
    match p {
        Problem::Ta(_) => (0..sys.n_free()).map(|i| i < sys.n_v).collect(),
        Problem::Ha(_) => weak_diagonal(&sys.k),
    }
}

/// Takes the full update unless it fails to reduce the scaled residual, in
/// which case the best of up to `backtracks` halved updates is kept.
#[allow(clippy::too_many_arguments)]
fn line_search(
    p: &Problem,
    prev: &Fields,
    dt: f64,
    src: &SourceValues,
    x: &Fields,
    full: Fields,
    res_cur: f64,
    backtracks: u32,
) -> Result<(Fields, AssembledSystem, f64), AssemblyError> {
    let sys = p.assemble(prev, &full, dt, src)?;
    let res = sys.scaled_residual(&full);
    if res < res_cur || backtracks == 0 {
        return Ok((full, sys, res));
    }
    let mut best = (full.clone(), sys, res);
    let mut alpha = 1.0;
    for _ in 0..backtracks {
        alpha *= 0.5;
        let lerp = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(u, v)| u + alpha * (v - u)).collect();
        let cand = Fields { v: lerp(&x.v, &full.v), q: lerp(&x.q, &full.q) };
        let sys = p.assemble(prev, &cand, dt, src)?;
        let res = sys.scaled_residual(&cand);
        if res < best.2 {
            best = (cand, sys, res);
        }
        if best.2 < res_cur {
            break;
        }
    }
    Ok(best)
}

fn newton(
    p: &Problem,
    order: &mut Option<(Vec<bool>, FillOrder)>,
    prev: &Fields,
    dt: f64,
    src: &SourceValues,
    cfg: &NewtonConfig,
) -> Result<StepOutcome, (Vec<f64>, Option<AssemblyError>)> {
    let mut x = prev.clone();
    p.v_space().apply_essential(&mut x.v, src);
    p.a_space().apply_essential(&mut x.q, src);
    let mut sys = p.assemble(prev, &x, dt, src).map_err(|e| (Vec::new(), Some(e)))?;
    let mut res_cur = sys.scaled_residual(&x);
    let mut trace = Vec::new();
    for k in 1..=cfg.max_iter {
        let weak = deferred_unknowns(p, &sys);
        if !matches!(order, Some((w, _)) if *w == weak) {
            let fill = FillOrder::with_deferred(&sys.k, &weak);
            *order = Some((weak, fill));
        }
        let fill = &order.as_ref().expect("order set above").1;
        let xf = match solve_sparse_ordered(&sys.k, &sys.rhs, fill) {
            Ok(xf) => xf,
            Err(LinalgError::Inaccurate(r)) => {
                trace.push(r);
                return Err((trace, None));
            }
            Err(_) => {
                // residual of the iterate the solver could not improve
                trace.push(res_cur);
                return Err((trace, None));
            }
        };
        let full = sys.expand(&xf);
        let (x_new, sys_new, res) = match line_search(p, prev, dt, src, &x, full, res_cur, cfg.max_backtracks) {
            Ok(found) => found,
            Err(AssemblyError::NonFinite(_)) => return Err((trace, None)),
            Err(e) => return Err((trace, Some(e))),
        };
        let inc = rel_increment(&x_new, &x);
        trace.push(res);
        x = x_new;
        sys = sys_new;
        res_cur = res;
        if !res.is_finite() {
            return Err((trace, None));
        }
        if res < cfg.rel_residual_tol || inc < cfg.rel_increment_tol {
            return Ok(StepOutcome { x, sys, iters: k, trace });
        }
    }
    Err((trace, None))
}

/// Integrates from a zero initial state over `time.n_steps()` steps.
///
/// A sub-step whose Newton iterations fail is retried with half the step,
/// at most `max_halvings` times in a row; after two consecutive sub-steps
/// converging in at most half the allowed iterations the step is doubled
/// again, never beyond `dt`.
pub fn run_transient(
    mesh: &Mesh2D,
    v: &DofSpace,
    a: &DofSpace,
    materials: Materials,
    time: &TimeConfig,
) -> Result<TimeHistory, TransientError> {
    time.validate()?;
    let p = Problem::new(mesh, v, a, materials)?;
    let cfg = &time.newton;
    let ticks = 1usize << cfg.max_halvings;
    let mut x = Fields::zeros(v.n_dofs(), a.n_dofs());
    let mut level = 0u32;
    let mut easy = 0;
    let mut steps = Vec::new();
    let mut snapshots = Vec::new();
    // the sparsity pattern is fixed, so an order is reused until the set of
    // weak-diagonal unknowns changes
    let mut order = None;
    for step in 0..time.n_steps() {
        let mut tick = 0usize;
        let mut substeps = 0;
        let mut iters = 0;
        let mut last: Option<StepOutcome> = None;
        while tick < ticks {
            let len = (ticks >> level).min(ticks - tick);
            let t = time.dt * (step as f64 + (tick + len) as f64 / ticks as f64);
            let h = time.dt * len as f64 / ticks as f64;
            let src = time.sources(t);
            match newton(&p, &mut order, &x, h, &src, cfg) {
                Ok(out) => {
                    tick += len;
                    substeps += 1;
                    iters += out.iters;
                    if out.iters <= cfg.max_iter.div_ceil(2) {
                        easy += 1;
                        if easy >= 2 && level > 0 {
                            level -= 1;
                            easy = 0;
                        }
                    } else {
                        easy = 0;
                    }
                    x = out.x.clone();
                    last = Some(out);
                }
                Err((_, Some(e))) => return Err(e.into()),
                Err((trace, None)) => {
                    easy = 0;
                    if level >= cfg.max_halvings {
                        return Err(TransientError::NonConvergence { step, time: t, halvings: level as usize, trace });
                    }
                    level += 1;
                }
            }
        }
        let out = last.expect("at least one sub-step");
        let t = time.dt * (step + 1) as f64;
        let src = time.sources(t);
        let (currents, voltages) = p.circuit(&out.sys, &out.x, &src);
        steps.push(StepRecord {
            step,
            time: t,
            substeps,
            newton_iters: iters,
            residual: out.trace.last().copied().unwrap_or(0.0),
            residual_trace: out.trace,
            currents,
            voltages,
        });
        snapshots.push(out.x);
    }
    Ok(TimeHistory { formulation: p.formulation(), steps, snapshots })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn waveform_interpolates_and_holds() {
        let w = Waveform::ramp_hold(2.0, 4.0);
        assert_eq!(w.at(-1.0), 0.0);
        assert_eq!(w.at(1.0), 0.5);
        assert_eq!(w.at(4.0), 2.0);
        assert_eq!(w.at(9.0), 2.0);
        assert_eq!(Waveform::constant(3.0).at(5.0), 3.0);
    }

    #[test]
    fn config_validation() {
        let mut c = TimeConfig::ramp_and_hold(1.0, 40);
        assert!(c.validate().is_ok());
        assert_eq!(c.n_steps(), 80);
        c.t_end = 1.013;
        assert!(c.validate().is_err());
        let mut c = TimeConfig::ramp_and_hold(1.0, 40);
        c.newton.rel_residual_tol = 1.0;
        assert!(c.validate().is_err());
        let mut c = TimeConfig::ramp_and_hold(1.0, 40);
        c.b_ext = Waveform { points: vec![[1.0, 0.0], [1.0, 1.0]] };
        assert!(c.validate().is_err());
    }

    #[test]
    fn snapshot_round_trip() {
        let h = TimeHistory {
            formulation: Formulation::Ha,
            steps: vec![StepRecord {
                step: 0,
                time: 0.25,
                substeps: 1,
                newton_iters: 1,
                residual: 0.0,
                residual_trace: vec![],
                currents: vec![],
                voltages: vec![],
            }],
            snapshots: vec![Fields { v: vec![1.0 / 3.0, -2e-300], q: vec![std::f64::consts::PI] }],
        };
        let parsed = parse_snapshots(&h.snapshots_text()).unwrap();
        assert_eq!(parsed.len(), 1);
        assert_eq!(parsed[0].2, h.snapshots[0]);
        assert!(parse_snapshots("step x").is_err());
    }

    #[test]
    fn increment_is_blockwise() {
        let a = Fields { v: vec![1e5, 0.0], q: vec![1e-3] };
        let b = Fields { v: vec![1e5, 0.0], q: vec![2e-3] };
        assert!((rel_increment(&b, &a) - 0.5).abs() < 1e-15);
        assert_eq!(rel_increment(&a, &a), 0.0);
    }
}
