//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
//! failure. Run with `cargo test --test acceptance`.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use mfem_stab::assembly::{coupling_matrix, uniform_potential_row, NormSpec};
use mfem_stab::diagnostics::{
    oscillation_metric, profile_current, sample_bn_profile, sample_tape_current, uniform_field_patch, Side,
};
use mfem_stab::infsup::{run_infsup_sweep, Formulation, InfSupReport, Verdict};
use mfem_stab::linalg::{infsup_eigenpairs, SparseMatrix, DEFAULT_ZERO_TOL};
use mfem_stab::materials::{MagneticLaw, Materials, PowerLaw, Resistivity};
use mfem_stab::mesh::{
    build_stacked_bar_mesh, build_tape_mesh, refine, region_mesh, GeometryParams, InterfaceTag, Mesh2D, Region,
};
use mfem_stab::spaces::{build_a_space, build_h_space, build_t_space, curl_expansion, BoundaryData, EntityKind};
use mfem_stab::transient::{run_transient, TimeConfig, TimeHistory, TransientError, Waveform};
use nalgebra::DMatrix;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

type Check = Result<(bool, String), Box<dyn std::error::Error>>;

const PAIRINGS: [(u8, u8); 4] = [(1, 1), (1, 2), (2, 1), (2, 2)];
const BASE_DELTA: f64 = 2.5e-3;

fn refined(mut mesh: Mesh2D, levels: usize) -> Mesh2D {
    for _ in 0..levels {
        mesh = refine(&mesh);
    }
    mesh
}

fn bar_mesh(levels: usize) -> Mesh2D {
    refined(build_stacked_bar_mesh(&GeometryParams::stacked_bar(BASE_DELTA)).unwrap(), levels)
}

fn tape_mesh(levels: usize) -> Mesh2D {
    refined(build_tape_mesh(&GeometryParams::single_tape(BASE_DELTA)).unwrap(), levels)
}

fn power_law(j_c: f64, n: f64, mu_r: Option<f64>) -> Materials {
    let ferro = mu_r.map_or(MagneticLaw::Vacuum, |mu_r| MagneticLaw::Linear { mu_r });
    Materials::new(Resistivity::PowerLaw(PowerLaw::new(1e-4, j_c, n).unwrap()), ferro).unwrap()
}

fn bar_transient(levels: usize, pairing: (u8, u8), n: f64) -> Result<(Mesh2D, TimeHistory, f64, f64), Box<dyn std::error::Error>> {
    let mesh = bar_mesh(levels);
    let bc = BoundaryData::default();
    let h = build_h_space(&mesh, pairing.0, &bc)?;
    let a = build_a_space(&mesh, pairing.1, InterfaceTag::GammaM, &bc)?;
    let mut time = TimeConfig::ramp_and_hold(1.0, 40);
    time.b_ext = Waveform::ramp_hold(0.4, 1.0);
    let start = Instant::now();
    let hist = run_transient(&mesh, &h, &a, power_law(3e8, n, Some(1000.0)), &time)?;
    let seconds = start.elapsed().as_secs_f64();
    let x = hist.snapshots.last().ok_or("no steps")?;
    let p = sample_bn_profile(&mesh, &h, &a, &x.v, &x.q, 1e-6, Side::Above, 400)?;
    Ok((mesh, hist, oscillation_metric(&p)?, seconds))
}

struct TapeRun {
    hist: TimeHistory,
    /// `(imposed, from the profile)` net current at every step.
    currents: Vec<(f64, f64)>,
    metric: f64,
    sign_changes: usize,
    seconds: f64,
}

const TAPE_JC: f64 = 2.5e8;

fn tape_time() -> TimeConfig {
    let p = GeometryParams::single_tape(BASE_DELTA);
    let i_c = TAPE_JC * p.tape_thickness * p.tape_width;
    let mut time = TimeConfig::ramp_and_hold(1.0, 40);
    time.currents = vec![Waveform::ramp_hold(0.1 * i_c, 1.0)];
    time
}

fn tape_transient(mesh: &Mesh2D, pairing: (u8, u8), n: f64) -> Result<TapeRun, TransientError> {
    let bc = BoundaryData::default();
    let t = build_t_space(mesh, pairing.0, &bc).unwrap();
    let a = build_a_space(mesh, pairing.1, InterfaceTag::GammaW, &bc).unwrap();
    let time = tape_time();
    let start = Instant::now();
    let hist = run_transient(mesh, &t, &a, power_law(TAPE_JC, n, None), &time)?;
    let seconds = start.elapsed().as_secs_f64();
    let w = GeometryParams::single_tape(BASE_DELTA).tape_thickness;
    let currents = hist
        .steps
        .iter()
        .zip(&hist.snapshots)
        .map(|(s, x)| {
            let p = sample_tape_current(mesh, &t, &x.v, 0, TAPE_JC).unwrap();
            (time.sources(s.time).currents[0], profile_current(&p, w, TAPE_JC))
        })
        .collect();
    let last = hist.snapshots.last().unwrap();
    let p = sample_tape_current(mesh, &t, &last.v, 0, TAPE_JC).unwrap();
    Ok(TapeRun {
        metric: oscillation_metric(&p).unwrap(),
        sign_changes: p.interior_sign_changes(1),
        hist,
        currents,
        seconds,
    })
}

fn sweep_all(base: &Mesh2D, f: Formulation, refinements: usize) -> Result<(Vec<InfSupReport>, f64), Box<dyn std::error::Error>> {
    let start = Instant::now();
    let norms = NormSpec::default();
    let reports = PAIRINGS
        .iter()
        .map(|&p| run_infsup_sweep(base, f, p, refinements, &norms))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((reports, start.elapsed().as_secs_f64()))
}

fn criterion_1(reports: &[InfSupReport], seconds: f64) -> Check {
    let mut ok = seconds < 120.0;
    let mut detail = Vec::new();
    for r in reports {
        let n = r.records.len();
        let lo = r.records.iter().map(|m| m.delta_rel).fold(f64::INFINITY, f64::min);
        let hi = r.records.iter().map(|m| m.delta_rel).fold(0.0, f64::max);
        let unstable = r.pairing.0 == r.pairing.1;
        let good = n >= 4
            && lo <= 0.025
            && if unstable {
                r.verdict == Verdict::Unstable && (0.7..=1.3).contains(&r.fit.slope)
            } else {
                r.verdict == Verdict::Stable && r.fit.slope.abs() < 0.3 && r.max_beta() <= 2.0 * r.min_beta()
            };
        ok &= good;
        detail.push(format!(
            "({},{}) {:?} slope {:.3} on {n} meshes, delta/W {:.4}..{:.3}",
            r.pairing.0, r.pairing.1, r.verdict, r.fit.slope, lo, hi
        ));
    }
    Ok((ok, format!("{}; {:.1} s", detail.join("; "), seconds)))
}

fn criterion_2(reports: &[InfSupReport]) -> Check {
    let all: Vec<f64> = reports.iter().flat_map(|r| r.records.iter().map(|m| m.norm_b)).collect();
    let lo = all.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = all.iter().copied().fold(0.0, f64::max);
    Ok((lo >= 1.0 && hi <= 2.0, format!("|b| in [{lo:.4}, {hi:.4}] over {} records", all.len())))
}

fn criterion_3(reports: &[InfSupReport], tape: &Mesh2D) -> Check {
    let mut ok = true;
    let mut detail = Vec::new();
    for r in reports {
        let exactly_one = (r.pairing.0 == 2) != (r.pairing.1 == 2);
        ok &= (r.verdict == Verdict::Stable) == exactly_one;
        detail.push(format!("({},{}) {:?} slope {:.3}", r.pairing.0, r.pairing.1, r.verdict, r.fit.slope));
    }
    let outcome = match tape_transient(tape, (2, 1), 20.0) {
        Ok(run) => format!("converged, {} Newton iterations", run.hist.total_newton_iters()),
        Err(TransientError::NonConvergence { step, .. }) => format!("Newton failure at step {step}"),
        Err(e) => format!("error: {e}"),
    };
    Ok((ok, format!("{}; (2,1) transient recorded: {outcome}", detail.join("; "))))
}

fn criterion_4(bar: [(f64, f64); 2], tape: [&TapeRun; 2]) -> Check {
    let [(m11, s11), (m21, s21)] = bar;
    let bar_ratio = m11 / m21;
    let tape_ratio = tape[0].metric / tape[1].metric;
    let slowest = [s11, s21, tape[0].seconds, tape[1].seconds].into_iter().fold(0.0, f64::max);
    let ok = bar_ratio >= 5.0 && tape_ratio >= 5.0 && tape[0].sign_changes >= 10 && slowest < 300.0;
    Ok((
        ok,
        format!(
            "bar (1,1) {m11:.2} vs (2,1) {m21:.2} = {bar_ratio:.1}x; tape (1,1) {:.2} vs (1,2) {:.2} = {tape_ratio:.1}x \
             with {} interior sign changes; slowest transient {slowest:.1} s",
            tape[0].metric, tape[1].metric, tape[0].sign_changes
        ),
    ))
}

fn random_spd(rng: &mut StdRng, n: usize) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    &g * g.transpose() / n as f64 + DMatrix::identity(n, n) * 0.1
}

fn criterion_5() -> Check {
    let mut rng = StdRng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    let mut count_ok = true;
    for _ in 0..20 {
        let m = rng.random_range(2..=40);
        let n = rng.random_range(2..=60);
        let b = DMatrix::from_fn(m, n, |_, _| rng.random_range(-1.0..1.0));
        let (nv, nq) = (random_spd(&mut rng, n), random_spd(&mut rng, m));
        let r = infsup_eigenpairs(
            &SparseMatrix::from_dense(&b),
            &SparseMatrix::from_dense(&nv),
            &SparseMatrix::from_dense(&nq),
            DEFAULT_ZERO_TOL,
        )?;
        let lq = nq.cholesky().ok_or("N_Q not SPD")?.l();
        let lv = nv.cholesky().ok_or("N_V not SPD")?.l();
        let lq_inv = lq.try_inverse().ok_or("singular factor")?;
        let lv_inv = lv.try_inverse().ok_or("singular factor")?;
        let w = lq_inv * &b * lv_inv.transpose();
        let mut oracle: Vec<f64> = w.singular_values().iter().map(|s| s * s).collect();
        oracle.sort_by(f64::total_cmp);
        count_ok &= oracle.len() == r.len();
        for (got, want) in r.eigenvalues.iter().zip(&oracle) {
            worst = worst.max((got - want).abs() / want);
        }
    }
    Ok((count_ok && worst < 1e-10, format!("20 pencils, worst relative error {worst:.2e}")))
}

fn criterion_6() -> Check {
    let j_c = 3e8;
    let mut worst = 0.0f64;
    for n in [5.0, 20.0, 40.0] {
        let law = Resistivity::PowerLaw(PowerLaw::new(1e-4, j_c, n)?);
        for k in 0..10 {
            let j = j_c * 0.01 * (300.0f64).powf(k as f64 / 9.0);
            let h = 1e-6 * j;
            let fd = (law.e(j + h) - law.e(j - h)) / (2.0 * h);
            worst = worst.max((law.de_dj(j) - fd).abs() / fd.abs());
        }
    }
    Ok((worst < 1e-5, format!("worst relative deviation {worst:.2e} over n = 5, 20, 40")))
}

/// Conductor `[-1,1]²` inside an h-air ring up to `[-2,2]²`, inside an a-air box.
fn ringed_mesh() -> Mesh2D {
    let xs: Vec<f64> = (0..=12).map(|i| -3.0 + 0.5 * i as f64).collect();
    region_mesh(
        &xs,
        &xs,
        |x, y| {
            if x.abs() < 1.0 && y.abs() < 1.0 {
                Region::HSc
            } else if x.abs() < 2.0 && y.abs() < 2.0 {
                Region::HAir
            } else {
                Region::AAir
            }
        },
        0.5,
    )
    .unwrap()
}

fn criterion_7(tapes: [&TapeRun; 2]) -> Check {
    let mut rng = StdRng::seed_from_u64(7);
    let bc = BoundaryData::default();

    let ring = ringed_mesh();
    let mut curl_air = 0.0f64;
    for e in [1, 2] {
        let h = build_h_space(&ring, e, &bc)?;
        let x: Vec<f64> = (0..h.n_dofs()).map(|_| rng.random_range(-1.0..1.0)).collect();
        for (t, tri) in ring.triangles().iter().enumerate() {
            if tri.region == Region::HAir {
                let c: f64 = curl_expansion(&h, &ring, t).iter().map(|&(d, c)| c * x[d]).sum();
                curl_air = curl_air.max(c.abs());
            }
        }
    }

    let bar = bar_mesh(1);
    let h = build_h_space(&bar, 2, &bc)?;
    let x: Vec<f64> = (0..h.n_dofs()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut no_bubbles = x.clone();
    for (d, v) in no_bubbles.iter_mut().enumerate() {
        if h.entity(d).kind == EntityKind::Bubble {
            *v = 0.0;
        }
    }
    let mut bubble_diff = 0.0f64;
    for t in 0..bar.triangles().len() {
        let c = curl_expansion(&h, &bar, t);
        let full: f64 = c.iter().map(|&(d, k)| k * x[d]).sum();
        let base: f64 = c.iter().map(|&(d, k)| k * no_bubbles[d]).sum();
        bubble_diff = bubble_diff.max((full - base).abs());
    }

    let mut current_err = 0.0f64;
    for run in tapes {
        for &(imposed, got) in &run.currents {
            current_err = current_err.max((got - imposed).abs() / imposed.abs());
        }
    }

    let mut g_row = 0.0f64;
    let mut g_global = 0.0f64;
    let mut n_global = 0;
    for e in [1, 2] {
        let h = build_h_space(&bar, e, &bc)?;
        let a = build_a_space(&bar, 1, InterfaceTag::GammaM, &bc)?;
        let scale = coupling_matrix(&bar, &h, &a)?.max_abs();
        let g = uniform_potential_row(&bar, &h);
        for (d, v) in g.iter().enumerate() {
            if h.entity(d).kind == EntityKind::Global {
                n_global += 1;
                g_global = g_global.max((v.abs() - 1.0).abs());
            } else {
                g_row = g_row.max(v.abs() / scale);
            }
        }
    }

    let ok = curl_air < 1e-12 && bubble_diff < 1e-12 && current_err < 1e-10 && g_row < 1e-12 && n_global == 2 && g_global < 1e-12;
    Ok((
        ok,
        format!(
            "curl in h-air {curl_air:.1e}; bubble curl change {bubble_diff:.1e}; tape current {current_err:.1e} \
             over {} steps; grad-v row {g_row:.1e} (net-current entry off by {g_global:.1e})",
            tapes[0].currents.len() + tapes[1].currents.len()
        ),
    ))
}

fn criterion_8() -> Check {
    let mut worst = 0.0f64;
    for (mesh, f) in [(bar_mesh(1), Formulation::Ha), (tape_mesh(1), Formulation::Ta)] {
        for p in PAIRINGS {
            for dir in [[1.0, 0.0], [0.0, 1.0]] {
                let r = uniform_field_patch(&mesh, f, p, dir, 0.1, 1.6e-8)?;
                worst = worst.max(r.relative_error());
            }
        }
    }
    Ok((worst < 1e-10, format!("worst relative energy error {worst:.2e} (16 runs)")))
}

fn criterion_9() -> Check {
    let (_, bar, _, _) = bar_transient(1, (2, 1), 1.0)?;
    let tape = tape_transient(&tape_mesh(2), (1, 2), 1.0)?;
    let steps: Vec<_> = bar.steps.iter().chain(&tape.hist.steps).collect();
    let iters_ok = steps.iter().all(|s| s.newton_iters == 1 && s.substeps == 1);
    let worst = steps.iter().map(|s| s.residual).fold(0.0, f64::max);
    Ok((iters_ok && worst < 1e-12, format!("{} steps, all single-iteration: {iters_ok}, worst residual {worst:.1e}", steps.len())))
}

fn read_dir(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap())
        .filter(|e| e.file_name() != "run.json")
        .map(|e| (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap()))
        .collect()
}

fn criterion_10() -> Check {
    let tmp = tempfile::tempdir()?;
    let cfg = tmp.path().join("tape.json");
    std::fs::write(&cfg, r#"{"scenario": "SINGLE_TAPE", "geometry": {"refinements": 2}}"#)?;
    let mut ok = true;
    let mut compared = 0;
    for (cmd, extra) in [("solve", vec!["--pairing", "1,1"]), ("infsup", vec![]), ("eigenmode", vec![]), ("mesh", vec![])] {
        let mut outs = Vec::new();
        for (k, threads) in ["1", "4"].iter().enumerate() {
            let out = tmp.path().join(format!("{cmd}{k}"));
            let status = Command::new(env!("CARGO_BIN_EXE_mfem-stab"))
                .arg(cmd)
                .arg("--config")
                .arg(&cfg)
                .arg("--out")
                .arg(&out)
                .arg("--quiet")
                .args(&extra)
                .env("MFEM_STAB_THREADS", threads)
                .status()?;
            ok &= status.success();
            outs.push(read_dir(&out));
        }
        ok &= !outs[0].is_empty() && outs[0] == outs[1];
        compared += outs[0].len();
    }
    Ok((ok, format!("{compared} files byte-identical across repeated runs")))
}

fn report(id: usize, name: &str, check: Check, failures: &mut Vec<usize>) {
    let (pass, detail) = check.unwrap_or_else(|e| (false, format!("error: {e}")));
    if !pass {
        failures.push(id);
    }
    println!("criterion {id:>2} {} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
}

fn main() {
    // the libtest flags passed by `cargo test` are not used
    let start = Instant::now();
    let mut failures = Vec::new();

    let bar_sweep = sweep_all(&bar_mesh(0), Formulation::Ha, 4);
    match bar_sweep {
        Ok((reports, seconds)) => {
            report(1, "h-a inf-sup verdicts", criterion_1(&reports, seconds), &mut failures);
            report(2, "h-a |b| bounded", criterion_2(&reports), &mut failures);
        }
        Err(e) => {
            report(1, "h-a inf-sup verdicts", Err(e.to_string().into()), &mut failures);
            report(2, "h-a |b| bounded", Err(e.to_string().into()), &mut failures);
        }
    }

    let tape = tape_mesh(3);
    let ta = sweep_all(&tape_mesh(0), Formulation::Ta, 3).and_then(|(r, _)| criterion_3(&r, &tape));
    report(3, "t-a inf-sup verdicts", ta, &mut failures);

    let tape_runs = (tape_transient(&tape, (1, 1), 20.0), tape_transient(&tape, (1, 2), 20.0));
    let bar_runs = (bar_transient(3, (1, 1), 20.0), bar_transient(3, (2, 1), 20.0));
    let contrast = match (&bar_runs, &tape_runs) {
        ((Ok(b11), Ok(b21)), (Ok(t11), Ok(t12))) => criterion_4([(b11.2, b11.3), (b21.2, b21.3)], [t11, t12]),
        _ => Err("a transient failed".into()),
    };
    report(4, "oscillation contrast", contrast, &mut failures);
    report(5, "eigensolver vs whitened SVD", criterion_5(), &mut failures);
    report(6, "power-law Jacobian", criterion_6(), &mut failures);
    let invariants = match &tape_runs {
        (Ok(t11), Ok(t12)) => criterion_7([t11, t12]),
        _ => Err("tape transient failed".into()),
    };
    report(7, "exactness invariants", invariants, &mut failures);
    report(8, "uniform-field patch test", criterion_8(), &mut failures);
    report(9, "linear limit n = 1", criterion_9(), &mut failures);
    report(10, "CLI determinism", criterion_10(), &mut failures);

    println!("acceptance: {} of 10 passed in {:.1} s", 10 - failures.len(), start.elapsed().as_secs_f64());
    if !failures.is_empty() {
        std::process::exit(1);
    }
}
