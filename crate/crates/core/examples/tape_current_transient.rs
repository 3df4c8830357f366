//! Single tape driven by a ramped current. Prints the current density
//! profile at the end of the ramp for the unstable (1,1) and the stable
//! (1,2) pairing.

use mfem_stab::diagnostics::{oscillation_metric, profile_current, sample_tape_current};
use mfem_stab::materials::{MagneticLaw, Materials, PowerLaw, Resistivity};
use mfem_stab::mesh::{build_tape_mesh, refine, GeometryParams, InterfaceTag};
use mfem_stab::spaces::{build_a_space, build_t_space, BoundaryData};
use mfem_stab::transient::{run_transient, TimeConfig, Waveform};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let params = GeometryParams::single_tape(2.5e-3);
    let mut mesh = build_tape_mesh(&params)?;
    for _ in 0..3 {
        mesh = refine(&mesh);
    }
    let j_c = 2.5e8;
    let i_c = j_c * params.tape_thickness * params.tape_width;
    let materials = Materials::new(Resistivity::PowerLaw(PowerLaw::new(1e-4, j_c, 20.0)?), MagneticLaw::Vacuum)?;
    let mut time = TimeConfig::ramp_and_hold(1.0, 40);
    time.currents = vec![Waveform::ramp_hold(0.1 * i_c, 1.0)];
    let bc = BoundaryData::default();

    for pairing in [(1, 1), (1, 2)] {
        let t = build_t_space(&mesh, pairing.0, &bc)?;
        let a = build_a_space(&mesh, pairing.1, InterfaceTag::GammaW, &bc)?;
        let hist = run_transient(&mesh, &t, &a, materials.clone(), &time)?;
        let x = &hist.snapshots[39];
        let p = sample_tape_current(&mesh, &t, &x.v, 0, j_c)?;
        println!(
            "pairing {pairing:?}: oscillation {:.2}, {} interior sign changes, I = {:.6} A (imposed {:.6} A)",
            oscillation_metric(&p)?,
            p.interior_sign_changes(1),
            profile_current(&p, params.tape_thickness, j_c),
            hist.steps[39].currents[0]
        );
        let row: Vec<String> = p.values.iter().map(|v| format!("{v:+.2}")).collect();
        println!("    j/jc: {}", row.join(" "));
    }
    Ok(())
}
