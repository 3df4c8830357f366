//! Inf-sup sweep of the h-a formulation on the stacked bar for the four
//! enrichment pairings.

use mfem_stab::assembly::NormSpec;
use mfem_stab::infsup::{run_infsup_sweep, Formulation};
use mfem_stab::mesh::{build_stacked_bar_mesh, GeometryParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let base = build_stacked_bar_mesh(&GeometryParams::stacked_bar(2.5e-3))?;
    let norms = NormSpec::default();
    for pairing in [(1, 1), (1, 2), (2, 1), (2, 2)] {
        let r = run_infsup_sweep(&base, Formulation::Ha, pairing, 3, &norms)?;
        println!("pairing {pairing:?}: {:?}, slope {:.3}", r.verdict, r.fit.slope);
        for m in &r.records {
            println!("    delta/W {:.4}  beta {:.4e}  |b| {:.4}", m.delta_rel, m.beta, m.norm_b);
        }
    }
    Ok(())
}
