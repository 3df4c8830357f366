//! Inf-sup sweep of the t-a formulation on a single tape, with the
//! mesh-dependent norm on the tape potential.

use mfem_stab::assembly::NormSpec;
use mfem_stab::infsup::{run_infsup_sweep, Formulation, Verdict};
use mfem_stab::mesh::{build_tape_mesh, GeometryParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let base = build_tape_mesh(&GeometryParams::single_tape(2.5e-3))?;
    let norms = NormSpec::default();
    for pairing in [(1, 1), (1, 2), (2, 1), (2, 2)] {
        let r = run_infsup_sweep(&base, Formulation::Ta, pairing, 3, &norms)?;
        let mark = if r.verdict == Verdict::Stable { "stable" } else { "not stable" };
        println!(
            "pairing {pairing:?}: {mark} ({:?}), slope {:.3}, beta {:.3e} .. {:.3e}",
            r.verdict,
            r.fit.slope,
            r.min_beta(),
            r.max_beta()
        );
    }
    Ok(())
}
