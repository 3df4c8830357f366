//! Tape with a linear resistivity driven once by a current and once by the
//! resulting voltage; both runs give back the same current.

use mfem_stab::materials::Materials;
use mfem_stab::mesh::{build_tape_mesh, refine, GeometryParams, InterfaceTag};
use mfem_stab::spaces::{build_a_space, build_t_space, BoundaryData, Circuit};
use mfem_stab::transient::{run_transient, TimeConfig, Waveform};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let params = GeometryParams::single_tape(2.5e-3);
    let mesh = refine(&build_tape_mesh(&params)?);
    let rho = 1e-8;
    let materials = Materials::vacuum(rho);
    let current = 2.0;
    let mut time = TimeConfig::ramp_and_hold(1.0, 10);
    time.currents = vec![Waveform::constant(current)];

    let run = |circuit: Circuit, time: &TimeConfig| -> Result<_, Box<dyn std::error::Error>> {
        let bc = BoundaryData { circuits: vec![circuit], ..BoundaryData::default() };
        let t = build_t_space(&mesh, 1, &bc)?;
        let a = build_a_space(&mesh, 2, InterfaceTag::GammaW, &bc)?;
        Ok(run_transient(&mesh, &t, &a, materials.clone(), time)?)
    };

    let driven = run(Circuit::Current, &time)?;
    let last = driven.steps.last().expect("steps were run");
    let resistance = rho / (params.tape_thickness * params.tape_width);
    println!(
        "current driven: I = {:.6} A, V = {:.6e} V/m (R I = {:.6e} V/m)",
        last.currents[0],
        last.voltages[0],
        resistance * current
    );

    let mut vtime = time.clone();
    vtime.voltages = vec![Waveform::constant(last.voltages[0])];
    let back = run(Circuit::Voltage, &vtime)?;
    println!("voltage driven: I = {:.6} A", back.steps.last().expect("steps were run").currents[0]);
    Ok(())
}
