//! Numerical inf-sup test: the smallest and largest nonzero singular values
//! of the coupling operator in the energy norms, tracked over a sequence of
//! uniformly refined meshes.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::assembly::{coupling_matrix, norm_matrix, restrict_free, AssemblyError, NormSpec};
use crate::linalg::{infsup_eigenpairs, EigenResult, LinalgError, SparseMatrix, DEFAULT_ZERO_TOL};
use crate::materials::{MagneticLaw, Materials, Resistivity};
use crate::mesh::{refine, InterfaceTag, Mesh2D, MeshError, Region};
use crate::spaces::{
    build_a_space, build_h_space, build_t_space, eval_a, eval_h, BoundaryData, DofSpace, Family,
    SpaceError,
};

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "MFEM_STAB_THREADS";

/// Reference iterate `j / j_c` at which a power law is linearised for the
/// coercivity report.
pub const REFERENCE_J_RATIO: f64 = 0.7;

#[derive(Debug, Error)]
pub enum InfSupError {
    #[error("at least 3 refinements are needed, got {0}")]
    TooFewRefinements(usize),
    #[error("pairing ({0}, {1}) is not in {{1, 2}}^2")]
    Pairing(u8, u8),
    #[error("coercivity bounds only apply to linear laws")]
    NotApplicable,
    #[error("coupling operator has no nonzero singular value on mesh {0}")]
    Degenerate(usize),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(rename_all = "UPPERCASE")]
pub enum Formulation {
    Ha,
    Ta,
}

impl Formulation {
    pub fn interface(self) -> InterfaceTag {
        match self {
            Formulation::Ha => InterfaceTag::GammaM,
            Formulation::Ta => InterfaceTag::GammaW,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Stable,
    Unstable,
    Inconclusive,
}

/// One mesh of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshRecord {
    pub delta: f64,
    /// Mesh size relative to the conductor width.
    pub delta_rel: f64,
    pub beta: f64,
    pub norm_b: f64,
    pub n_nonzero: usize,
    pub n_zero: usize,
    pub dim_v: usize,
    pub dim_q: usize,
    pub seconds: f64,
}

/// Least-squares line through `(log δ, log β)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub n_points: usize,
    /// 95% confidence band of the slope; absent with fewer than 3 points.
    pub band: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coercivity {
    pub alpha_lower: f64,
    pub gamma_lower: f64,
    pub a_upper: f64,
    pub c_upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfSupReport {
    pub formulation: Formulation,
    pub pairing: (u8, u8),
    /// Sorted by decreasing mesh size.
    pub records: Vec<MeshRecord>,
    pub fit: SlopeFit,
    pub verdict: Verdict,
    pub coercivity: Option<Coercivity>,
    pub norms: NormSpec,
}

impl InfSupReport {
    /// `meshsize,beta,normb` with 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("meshsize,beta,normb\n");
        for r in &self.records {
            out.push_str(&format!("{:.16e},{:.16e},{:.16e}\n", r.delta_rel, r.beta, r.norm_b));
        }
        out
    }

    pub fn min_beta(&self) -> f64 {
        self.records.iter().map(|r| r.beta).fold(f64::INFINITY, f64::min)
    }

    pub fn max_beta(&self) -> f64 {
        self.records.iter().map(|r| r.beta).fold(0.0, f64::max)
    }
}

/// Spaces and matrices of the inf-sup pencil on one mesh, restricted to the
/// free DOFs.
#[derive(Debug, Clone)]
pub struct InfSupProblem<'m> {
    pub mesh: &'m Mesh2D,
    pub formulation: Formulation,
    pub v: DofSpace,
    pub q: DofSpace,
    /// Coupling matrix, free a rows by free h (or t) columns.
    pub b: SparseMatrix,
    pub n_v: SparseMatrix,
    pub n_q: SparseMatrix,
}

impl<'m> InfSupProblem<'m> {
    pub fn new(
        mesh: &'m Mesh2D,
        formulation: Formulation,
        pairing: (u8, u8),
        norms: &NormSpec,
    ) -> Result<Self, InfSupError> {
        check_pairing(pairing)?;
        let bc = BoundaryData::default();
        let v = match formulation {
            Formulation::Ha => build_h_space(mesh, pairing.0, &bc)?,
            Formulation::Ta => build_t_space(mesh, pairing.0, &bc)?,
        };
        let q = build_a_space(mesh, pairing.1, formulation.interface(), &bc)?;
        let b = coupling_matrix(mesh, &v, &q)?.select(q.free_dofs(), v.free_dofs());
        let n_v = restrict_free(&norm_matrix(mesh, &v, norms)?, &v, &v);
        let n_q = restrict_free(&norm_matrix(mesh, &q, norms)?, &q, &q);
        Ok(InfSupProblem { mesh, formulation, v, q, b, n_v, n_q })
    }

    pub fn solve(&self) -> Result<EigenResult, InfSupError> {
        Ok(infsup_eigenpairs(&self.b, &self.n_v, &self.n_q, DEFAULT_ZERO_TOL)?)
    }
}

fn check_pairing((i, j): (u8, u8)) -> Result<(), InfSupError> {
    if matches!(i, 1 | 2) && matches!(j, 1 | 2) {
        Ok(())
    } else {
        Err(InfSupError::Pairing(i, j))
    }
}

/// Width of the conductor used to normalise mesh sizes.
pub fn reference_width(mesh: &Mesh2D, formulation: Formulation) -> f64 {
    match formulation {
        Formulation::Ha => mesh
            .region_bbox(|r| r == Region::HSc)
            .map(|[x0, _, x1, _]| x1 - x0)
            .unwrap_or(1.0),
        Formulation::Ta => {
            if mesh.tapes().is_empty() {
                1.0
            } else {
                mesh.tape_width(0)
            }
        }
    }
}

/// Worker count: available parallelism capped by [`THREADS_ENV`].
pub fn worker_count() -> usize {
    let avail = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    match std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok()) {
        Some(n) if n >= 1 => n.min(avail),
        _ => avail,
    }
}

/// Runs `f` on every item with at most `workers` threads; results keep the
/// input order.
pub(crate) fn par_map<T: Sync, R: Send>(items: &[T], workers: usize, f: impl Fn(usize, &T) -> R + Sync) -> Vec<R> {
    let workers = workers.clamp(1, items.len().max(1));
    if workers == 1 {
        return items.iter().enumerate().map(|(i, x)| f(i, x)).collect();
    }
    let next = std::sync::atomic::AtomicUsize::new(0);
    let mut slots: Vec<Option<R>> = (0..items.len()).map(|_| None).collect();
    let results = std::sync::Mutex::new(&mut slots);
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = f(i, &items[i]);
                results.lock().unwrap()[i] = Some(r);
            });
        }
    });
    slots.into_iter().map(|r| r.expect("every item processed")).collect()
}

/// Builds `n_refinements + 1` meshes by uniform refinement of `base`, runs
/// the inf-sup eigenproblem on each, fits the trend and issues a verdict.
pub fn run_infsup_sweep(
    base: &Mesh2D,
    formulation: Formulation,
    pairing: (u8, u8),
    n_refinements: usize,
    norms: &NormSpec,
) -> Result<InfSupReport, InfSupError> {
    if n_refinements < 3 {
        return Err(InfSupError::TooFewRefinements(n_refinements));
    }
    check_pairing(pairing)?;
    norms.validate()?;
    let mut meshes = vec![base.clone()];
    for _ in 0..n_refinements {
        meshes.push(refine(meshes.last().unwrap()));
    }
    let width = reference_width(base, formulation);
    // largest meshes first so that they start early
    let order: Vec<usize> = (0..meshes.len()).rev().collect();
    let solved = par_map(&order, worker_count(), |_, &k| -> Result<MeshRecord, InfSupError> {
        let start = std::time::Instant::now();
        let mesh = &meshes[k];
        let p = InfSupProblem::new(mesh, formulation, pairing, norms)?;
        let r = p.solve()?;
        if r.is_empty() {
            return Err(InfSupError::Degenerate(k));
        }
        Ok(MeshRecord {
            delta: mesh.delta(),
            delta_rel: mesh.delta() / width,
            beta: r.beta(),
            norm_b: r.norm_b(),
            n_nonzero: r.len(),
            n_zero: r.n_zero,
            dim_v: p.v.n_free(),
            dim_q: p.q.n_free(),
            seconds: start.elapsed().as_secs_f64(),
        })
    });
    let mut records = solved.into_iter().collect::<Result<Vec<_>, _>>()?;
    records.sort_by(|a, b| b.delta.total_cmp(&a.delta));
    let fit = fit_slope(&records);
    let verdict = verdict(&records, &fit);
    Ok(InfSupReport {
        formulation,
        pairing,
        records,
        fit,
        verdict,
        coercivity: None,
        norms: *norms,
    })
}

/// Least-squares slope of `log β` against `log δ` over the finest
/// `⌈n/2⌉` records (at least two).
pub fn fit_slope(records: &[MeshRecord]) -> SlopeFit {
    let n = records.len();
    let m = n.div_ceil(2).max(2).min(n);
    let mut sorted: Vec<&MeshRecord> = records.iter().collect();
    sorted.sort_by(|a, b| a.delta.total_cmp(&b.delta));
    let pts: Vec<(f64, f64)> = sorted[..m].iter().map(|r| (r.delta.ln(), r.beta.ln())).collect();
    let k = pts.len() as f64;
    let (mx, my) = (
        pts.iter().map(|p| p.0).sum::<f64>() / k,
        pts.iter().map(|p| p.1).sum::<f64>() / k,
    );
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let band = (pts.len() >= 3 && sxx > 0.0).then(|| {
        let dof = pts.len() as f64 - 2.0;
        let sse: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
        let se = (sse / dof / sxx).sqrt();
        let t = StudentsT::new(0.0, 1.0, dof).expect("positive dof").inverse_cdf(0.975);
        [slope - t * se, slope + t * se]
    });
    SlopeFit { slope, intercept, n_points: pts.len(), band }
}

/// STABLE if `|slope| < 0.3` and the smallest β exceeds half the largest;
/// UNSTABLE if the slope lies in `[0.7, 1.3]`; INCONCLUSIVE otherwise.
pub fn verdict(records: &[MeshRecord], fit: &SlopeFit) -> Verdict {
    let min = records.iter().map(|r| r.beta).fold(f64::INFINITY, f64::min);
    let max = records.iter().map(|r| r.beta).fold(0.0, f64::max);
    if fit.slope.abs() < 0.3 && min > 0.5 * max {
        Verdict::Stable
    } else if (0.7..=1.3).contains(&fit.slope) {
        Verdict::Unstable
    } else {
        Verdict::Inconclusive
    }
}

/// Coercivity constants of the linear problem relative to the norm
/// constants: `α` from the h (or t) block, `γ` from the a block.
pub fn coercivity_estimates(materials: &Materials, norms: &NormSpec, dt: f64) -> Result<Coercivity, InfSupError> {
    let rho = match materials.conductor {
        Resistivity::Linear(r) => r,
        Resistivity::PowerLaw(p) if p.n == 1.0 => p.rho(p.j_c),
        Resistivity::PowerLaw(_) => return Err(InfSupError::NotApplicable),
    };
    let alpha = [crate::materials::MU0 / norms.mu0, dt / norms.dt0 * rho / norms.rho0];
    let mut nus = vec![MagneticLaw::Vacuum.nu_and_dh_db(0.0).0 / norms.nu0];
    if materials.ferro != MagneticLaw::Vacuum {
        nus.push(materials.ferro.nu_and_dh_db(0.0).0 / norms.nu0);
    }
    Ok(Coercivity {
        alpha_lower: alpha.iter().copied().fold(f64::INFINITY, f64::min),
        a_upper: alpha.iter().copied().fold(0.0, f64::max),
        gamma_lower: nus.iter().copied().fold(f64::INFINITY, f64::min),
        c_upper: nus.iter().copied().fold(0.0, f64::max),
    })
}

/// Linear materials with a power law replaced by its differential
/// resistivity at `j = 0.7 j_c`.
pub fn linearized(materials: &Materials) -> Materials {
    match materials.conductor {
        Resistivity::PowerLaw(p) => Materials {
            conductor: Resistivity::Linear(p.de_dj(REFERENCE_J_RATIO * p.j_c)),
            ferro: materials.ferro,
        },
        Resistivity::Linear(_) => *materials,
    }
}

/// Eigenmode of the inf-sup pencil sampled for plotting.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenmodeExport {
    pub rank: usize,
    pub eigenvalue: f64,
    /// `qᵀ B v / qᵀ N_Q q` with `v` the supremizer.
    pub rayleigh: f64,
    /// `qᵀ N_Q q`.
    pub q_norm2: f64,
    /// `(x, y, a)` at every node of the a domain.
    pub q_nodes: Vec<[f64; 3]>,
    /// `(x, y, h_x, h_y)` at triangle centroids for H, or `(x, y, j, 0)` at
    /// segment midpoints for T.
    pub v_samples: Vec<[f64; 4]>,
    /// `(s, a)` along the coupling interface: node values and segment midpoints.
    pub q_trace: Vec<[f64; 2]>,
}

impl EigenmodeExport {
    /// Sign changes of the trace at interface nodes.
    pub fn trace_sign_changes(&self) -> usize {
        let nodal: Vec<f64> = self.q_trace.iter().step_by(2).map(|p| p[1]).collect();
        sign_changes(&nodal)
    }

    pub fn q_csv(&self) -> String {
        let mut out = String::from("x,y,value\n");
        for p in &self.q_nodes {
            out.push_str(&format!("{:.16e},{:.16e},{:.16e}\n", p[0], p[1], p[2]));
        }
        out
    }

    pub fn v_csv(&self, family: Family) -> String {
        let mut out = match family {
            Family::T => String::from("x,y,value\n"),
            _ => String::from("x,y,vx,vy\n"),
        };
        for p in &self.v_samples {
            match family {
                Family::T => out.push_str(&format!("{:.16e},{:.16e},{:.16e}\n", p[0], p[1], p[2])),
                _ => out.push_str(&format!("{:.16e},{:.16e},{:.16e},{:.16e}\n", p[0], p[1], p[2], p[3])),
            }
        }
        out
    }

    pub fn trace_csv(&self) -> String {
        let mut out = String::from("s,value\n");
        for p in &self.q_trace {
            out.push_str(&format!("{:.16e},{:.16e}\n", p[0], p[1]));
        }
        out
    }
}

/// Number of strict sign changes in a sequence, ignoring exact zeros.
pub fn sign_changes(v: &[f64]) -> usize {
    let signs: Vec<bool> = v.iter().filter(|x| **x != 0.0).map(|x| *x > 0.0).collect();
    signs.windows(2).filter(|w| w[0] != w[1]).count()
}

/// Samples eigenvector `rank` (0 = smallest nonzero) and its supremizer.
pub fn export_eigenmode(p: &InfSupProblem, r: &EigenResult, rank: usize) -> Result<EigenmodeExport, InfSupError> {
    let q_free = r.eigenvector(rank)?;
    let v_free = r.supremizer(rank)?;
    let bv = p.b.mul_vec(&v_free);
    let nq = p.n_q.mul_vec(&q_free);
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let q_norm2 = dot(&q_free, &nq);
    let rayleigh = dot(&q_free, &bv) / q_norm2;

    let mut q = vec![0.0; p.q.n_dofs()];
    for (k, &d) in p.q.free_dofs().iter().enumerate() {
        q[d] = q_free[k];
    }
    let mut v = vec![0.0; p.v.n_dofs()];
    for (k, &d) in p.v.free_dofs().iter().enumerate() {
        v[d] = v_free[k];
    }
    let mesh = p.mesh;
    let mut q_nodes = Vec::new();
    let mut seen = vec![false; mesh.n_nodes()];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        if !tri.region.in_a() {
            continue;
        }
        for (k, &n) in tri.nodes.iter().enumerate() {
            if !seen[n] {
                seen[n] = true;
                let mut lam = [0.0; 3];
                lam[k] = 1.0;
                let [x, y] = mesh.nodes()[n];
                q_nodes.push((n, [x, y, eval_a(&p.q, mesh, &q, t, lam).0]));
            }
        }
    }
    q_nodes.sort_by_key(|e| e.0);
    let q_nodes = q_nodes.into_iter().map(|e| e.1).collect();

    let third = [1.0 / 3.0; 3];
    let v_samples = match p.v.family {
        Family::H => (0..mesh.triangles().len())
            .filter(|&t| mesh.triangles()[t].region.in_h())
            .map(|t| {
                let c = mesh.centroid(t);
                let (h, _) = eval_h(&p.v, mesh, &v, t, third);
                [c[0], c[1], h[0], h[1]]
            })
            .collect(),
        _ => mesh
            .interface_segments(InterfaceTag::GammaW)
            .into_iter()
            .map(|seg| {
                let [a, b] = mesh.interfaces()[seg].nodes;
                let (pa, pb) = (mesh.nodes()[a], mesh.nodes()[b]);
                let j = crate::spaces::segment_trace(&p.v, mesh, &v, seg, 0.5);
                [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1]), j, 0.0]
            })
            .collect(),
    };

    let tag = p.formulation.interface();
    let mut q_trace = Vec::new();
    let mut s0 = 0.0;
    for seg in mesh.interface_segments(tag) {
        let len = mesh.segment_length(mesh.interfaces()[seg].nodes);
        q_trace.push([s0, crate::spaces::segment_trace(&p.q, mesh, &q, seg, 0.0)]);
        q_trace.push([s0 + 0.5 * len, crate::spaces::segment_trace(&p.q, mesh, &q, seg, 0.5)]);
        s0 += len;
    }

    Ok(EigenmodeExport {
        rank,
        eigenvalue: r.eigenvalues[rank],
        rayleigh,
        q_norm2,
        q_nodes,
        v_samples,
        q_trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(delta: f64, beta: f64) -> MeshRecord {
        MeshRecord {
            delta,
            delta_rel: delta,
            beta,
            norm_b: 1.0,
            n_nonzero: 1,
            n_zero: 0,
            dim_v: 1,
            dim_q: 1,
            seconds: 0.0,
        }
    }

    #[test]
    fn slope_of_exact_power_law() {
        let recs: Vec<_> = (0..6).map(|k| rec(0.5f64.powi(k), 3.0 * 0.5f64.powi(k))).collect();
        let fit = fit_slope(&recs);
        assert!((fit.slope - 1.0).abs() < 1e-12);
        assert_eq!(fit.n_points, 3);
        let [lo, hi] = fit.band.unwrap();
        assert!((hi - lo).abs() < 1e-9);
        assert_eq!(verdict(&recs, &fit), Verdict::Unstable);
    }

    #[test]
    fn flat_sequence_is_stable() {
        let recs: Vec<_> = (0..4).map(|k| rec(0.5f64.powi(k), 0.4 + 0.01 * k as f64)).collect();
        let fit = fit_slope(&recs);
        assert!(fit.slope.abs() < 0.3);
        assert!(fit.band.is_none());
        assert_eq!(verdict(&recs, &fit), Verdict::Stable);
    }

    #[test]
    fn flat_tail_after_drop_is_not_stable() {
        // slope of the fine meshes is zero but β dropped by more than half
        let betas = [1.0, 0.3, 0.1, 0.1];
        let recs: Vec<_> = betas.iter().enumerate().map(|(k, &b)| rec(0.5f64.powi(k as i32), b)).collect();
        let fit = fit_slope(&recs);
        assert_eq!(verdict(&recs, &fit), Verdict::Inconclusive);
    }

    #[test]
    fn band_matches_t_quantile() {
        // df = 1: t_0.975 = 12.7062
        let recs = vec![rec(1.0, 1.0), rec(0.5, 0.45), rec(0.25, 0.26), rec(2.0, 2.0), rec(4.0, 4.0)];
        let fit = fit_slope(&recs);
        let pts = [(0.25f64, 0.26f64), (0.5, 0.45), (1.0, 1.0)];
        let xs: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
        let ys: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
        let mx = xs.iter().sum::<f64>() / 3.0;
        let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        let sse: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - fit.intercept - fit.slope * x).powi(2)).sum();
        let half = 12.706_204_736 * (sse / sxx).sqrt();
        let [lo, hi] = fit.band.unwrap();
        assert!(((hi - lo) / 2.0 - half).abs() < 1e-6 * half);
    }

    #[test]
    fn coercivity_examples() {
        let n = NormSpec::new(1.0);
        let c = coercivity_estimates(&Materials::vacuum(n.rho0), &n, 1.0).unwrap();
        assert!((c.alpha_lower - 1.0).abs() < 1e-15 && (c.gamma_lower - 1.0).abs() < 1e-15);
        let c = coercivity_estimates(&Materials::vacuum(n.rho0), &n, 2.0).unwrap();
        assert!((c.alpha_lower - 1.0).abs() < 1e-15 && (c.a_upper - 2.0).abs() < 1e-15);
        let m = Materials { ferro: MagneticLaw::Linear { mu_r: 1000.0 }, ..Materials::vacuum(n.rho0) };
        let c = coercivity_estimates(&m, &n, 1.0).unwrap();
        assert!((c.gamma_lower - 1e-3).abs() < 1e-15);
        let pl = crate::materials::PowerLaw::new(1e-4, 3e8, 20.0).unwrap();
        let m = Materials { conductor: Resistivity::PowerLaw(pl), ..m };
        assert!(matches!(coercivity_estimates(&m, &n, 1.0), Err(InfSupError::NotApplicable)));
        assert!(coercivity_estimates(&linearized(&m), &n, 1.0).is_ok());
    }

    #[test]
    fn par_map_keeps_order() {
        let items: Vec<usize> = (0..37).collect();
        let out = par_map(&items, 4, |i, x| i * 100 + x);
        assert_eq!(out, items.iter().map(|x| x * 101).collect::<Vec<_>>());
    }

    #[test]
    fn sign_change_count() {
        assert_eq!(sign_changes(&[1.0, -1.0, 0.0, -2.0, 3.0]), 2);
        assert_eq!(sign_changes(&[]), 0);
    }
}
