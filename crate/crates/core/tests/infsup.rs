use mfem_stab::assembly::NormSpec;
use mfem_stab::infsup::{
    coercivity_estimates, export_eigenmode, linearized, run_infsup_sweep, Formulation, InfSupError, InfSupProblem,
    Verdict,
};
use mfem_stab::materials::{MagneticLaw, Materials, PowerLaw, Resistivity};
use mfem_stab::mesh::{build_stacked_bar_mesh, build_tape_mesh, refine, GeometryParams, InterfaceTag, Mesh2D};
use mfem_stab::spaces::Family;

fn bar() -> Mesh2D {
    build_stacked_bar_mesh(&GeometryParams::stacked_bar(2.5e-3)).unwrap()
}

fn tape() -> Mesh2D {
    build_tape_mesh(&GeometryParams::single_tape(2.5e-3)).unwrap()
}

#[test]
fn tape_verdicts_follow_the_enrichment_rule() {
    let base = tape();
    let norms = NormSpec::default();
    for pairing in [(1, 1), (1, 2), (2, 1), (2, 2)] {
        let r = run_infsup_sweep(&base, Formulation::Ta, pairing, 3, &norms).unwrap();
        let expected = if (pairing.0 == 2) != (pairing.1 == 2) { Verdict::Stable } else { Verdict::Unstable };
        assert_eq!(r.verdict, expected, "{pairing:?}: slope {}", r.fit.slope);
        assert_eq!(r.records.len(), 4);
        assert!(r.records.windows(2).all(|w| w[1].delta < w[0].delta));
        assert!(r.records.iter().all(|m| m.norm_b >= m.beta));
    }
}

#[test]
fn bar_sweep_separates_stable_and_unstable() {
    let base = bar();
    let norms = NormSpec::default();
    let stable = run_infsup_sweep(&base, Formulation::Ha, (2, 1), 3, &norms).unwrap();
    let unstable = run_infsup_sweep(&base, Formulation::Ha, (1, 1), 3, &norms).unwrap();
    assert_eq!(stable.verdict, Verdict::Stable);
    assert!(stable.fit.slope.abs() < 0.3);
    assert_eq!(unstable.verdict, Verdict::Unstable);
    assert!(unstable.fit.slope > 0.7);
    let csv = stable.to_csv();
    assert!(csv.starts_with("meshsize,beta,normb\n"));
    assert_eq!(csv.lines().count(), 5);
}

#[test]
fn sweep_preconditions() {
    let base = tape();
    let norms = NormSpec::default();
    assert!(matches!(
        run_infsup_sweep(&base, Formulation::Ta, (1, 2), 2, &norms),
        Err(InfSupError::TooFewRefinements(2))
    ));
    assert!(matches!(run_infsup_sweep(&base, Formulation::Ta, (3, 1), 3, &norms), Err(InfSupError::Pairing(3, 1))));
    let bad = NormSpec { rho0: -1.0, ..NormSpec::default() };
    assert!(run_infsup_sweep(&base, Formulation::Ta, (1, 2), 3, &bad).is_err());
}

#[test]
fn largest_mode_reaches_the_coupling_norm() {
    let m = refine(&bar());
    let p = InfSupProblem::new(&m, Formulation::Ha, (1, 2), &NormSpec::default()).unwrap();
    let r = p.solve().unwrap();
    let top = r.len() - 1;
    let e = export_eigenmode(&p, &r, top).unwrap();
    let nb2 = r.norm_b().powi(2);
    assert!((e.rayleigh - nb2).abs() < 1e-8 * nb2, "{} vs {nb2}", e.rayleigh);
    assert!((e.eigenvalue - nb2).abs() < 1e-12 * nb2);
    assert!((e.q_norm2 - 1.0).abs() < 1e-8);
    assert!(export_eigenmode(&p, &r, r.len()).is_err());
}

#[test]
fn unstable_lowest_mode_oscillates_along_the_interface() {
    let m = refine(&bar());
    let p = InfSupProblem::new(&m, Formulation::Ha, (1, 1), &NormSpec::default()).unwrap();
    let r = p.solve().unwrap();
    let e = export_eigenmode(&p, &r, 0).unwrap();
    assert!((e.rayleigh - r.beta().powi(2)).abs() < 1e-8 * r.beta().powi(2));
    let edges = m.interface_segments(InterfaceTag::GammaM).len();
    assert!(2 * e.trace_sign_changes() >= edges, "{} sign changes on {edges} edges", e.trace_sign_changes());

    let v = e.v_csv(Family::H);
    assert!(v.starts_with("x,y,vx,vy\n"));
    assert_eq!(e.q_csv().lines().count(), e.q_nodes.len() + 1);
    assert_eq!(e.trace_csv().lines().count(), e.q_trace.len() + 1);
}

#[test]
fn coercivity_bounds() {
    let norms = NormSpec::default();
    let vacuum = Materials::vacuum(norms.rho0);
    let c = coercivity_estimates(&vacuum, &norms, norms.dt0).unwrap();
    assert_eq!((c.alpha_lower, c.gamma_lower), (1.0, 1.0));
    let c = coercivity_estimates(&vacuum, &norms, 2.0 * norms.dt0).unwrap();
    assert_eq!(c.alpha_lower, 1.0);

    let ferro = Materials::new(Resistivity::Linear(norms.rho0), MagneticLaw::Linear { mu_r: 1000.0 }).unwrap();
    let c = coercivity_estimates(&ferro, &norms, norms.dt0).unwrap();
    assert!((c.gamma_lower - 1e-3).abs() < 1e-15);

    let hts = Materials::new(Resistivity::PowerLaw(PowerLaw::new(1e-4, 3e8, 20.0).unwrap()), MagneticLaw::Vacuum).unwrap();
    assert!(matches!(coercivity_estimates(&hts, &norms, norms.dt0), Err(InfSupError::NotApplicable)));
    let lin = linearized(&hts);
    assert!(lin.is_linear());
    assert!(coercivity_estimates(&lin, &norms, norms.dt0).is_ok());
}
