//! Stacked bar magnetized by a ramped external field. Compares the flux
//! density just above the superconductor for a stable and an unstable
//! pairing. Pass a refinement level as argument (default 1; 3 shows the
//! oscillations clearly but takes about a minute per run).

use mfem_stab::diagnostics::{oscillation_metric, sample_bn_profile, Side};
use mfem_stab::materials::{MagneticLaw, Materials, PowerLaw, Resistivity};
use mfem_stab::mesh::{build_stacked_bar_mesh, refine, GeometryParams, InterfaceTag};
use mfem_stab::spaces::{build_a_space, build_h_space, BoundaryData};
use mfem_stab::transient::{run_transient, TimeConfig, Waveform};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let level: usize = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(1);
    let mut mesh = build_stacked_bar_mesh(&GeometryParams::stacked_bar(2.5e-3))?;
    for _ in 0..level {
        mesh = refine(&mesh);
    }
    let bc = BoundaryData::default();
    let materials = Materials::new(
        Resistivity::PowerLaw(PowerLaw::new(1e-4, 3e8, 20.0)?),
        MagneticLaw::Linear { mu_r: 1000.0 },
    )?;
    let mut time = TimeConfig::ramp_and_hold(1.0, 40);
    time.b_ext = Waveform::ramp_hold(0.4, 1.0);

    for pairing in [(1, 1), (2, 1)] {
        let h = build_h_space(&mesh, pairing.0, &bc)?;
        let a = build_a_space(&mesh, pairing.1, InterfaceTag::GammaM, &bc)?;
        let start = std::time::Instant::now();
        let hist = run_transient(&mesh, &h, &a, materials.clone(), &time)?;
        let x = hist.snapshots.last().expect("steps were run");
        let profile = sample_bn_profile(&mesh, &h, &a, &x.v, &x.q, 1e-6, Side::Above, 400)?;
        println!(
            "pairing {pairing:?}: {} Newton iterations in {:.1} s, b.n oscillation {:.2} ({} sign changes)",
            hist.total_newton_iters(),
            start.elapsed().as_secs_f64(),
            oscillation_metric(&profile)?,
            profile.sign_changes()
        );
    }
    Ok(())
}
