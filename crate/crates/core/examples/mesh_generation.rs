//! Builds both scenario meshes, refines them and round-trips the native
//! text format.

use mfem_stab::mesh::{
    build_stacked_bar_mesh, build_tape_mesh, read_native, refine, write_native, GeometryParams, InterfaceTag,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut bar = build_stacked_bar_mesh(&GeometryParams::stacked_bar(2.5e-3))?;
    println!("level  nodes  triangles  delta(m)   perimeter(m)");
    for level in 0..4 {
        println!(
            "{level:>5}  {:>5}  {:>9}  {:.3e}  {:.6}",
            bar.n_nodes(),
            bar.triangles().len(),
            bar.delta(),
            bar.interface_length(InterfaceTag::GammaM)
        );
        bar = refine(&bar);
    }

    let tape = refine(&build_tape_mesh(&GeometryParams::single_tape(2.5e-3))?);
    println!(
        "tape: {} segments, width {:.4} m, uniformity {:.3}",
        tape.interface_segments(InterfaceTag::GammaW).len(),
        tape.tape_width(0),
        tape.tape_uniformity(0)
    );

    let text = write_native(&tape);
    let back = read_native(&text)?;
    assert_eq!(back.triangles().len(), tape.triangles().len());
    println!("native format: {} bytes, round trip ok", text.len());
    Ok(())
}
