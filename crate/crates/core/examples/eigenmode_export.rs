//! Smallest inf-sup eigenmode of the unstable (1,1) h-a pairing, written as
//! CSV files into the directory given as argument (default `eigenmode`).

use std::path::PathBuf;

use mfem_stab::assembly::NormSpec;
use mfem_stab::infsup::{export_eigenmode, Formulation, InfSupProblem};
use mfem_stab::mesh::{build_stacked_bar_mesh, refine, GeometryParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "eigenmode".into()));
    let mesh = refine(&build_stacked_bar_mesh(&GeometryParams::stacked_bar(2.5e-3))?);
    let p = InfSupProblem::new(&mesh, Formulation::Ha, (1, 1), &NormSpec::default())?;
    let r = p.solve()?;
    println!("beta = {:.4e}, {} nonzero and {} zero eigenvalues", r.beta(), r.len(), r.n_zero);
    for rank in 0..3 {
        let e = export_eigenmode(&p, &r, rank)?;
        println!(
            "rank {rank}: eigenvalue {:.4e}, Rayleigh quotient {:.4e}, {} sign changes of the trace",
            e.eigenvalue,
            e.rayleigh,
            e.trace_sign_changes()
        );
        if rank == 0 {
            std::fs::create_dir_all(&dir)?;
            std::fs::write(dir.join("q.csv"), e.q_csv())?;
            std::fs::write(dir.join("v.csv"), e.v_csv(p.v.family))?;
            std::fs::write(dir.join("trace.csv"), e.trace_csv())?;
        }
    }
    println!("wrote {}", dir.display());
    Ok(())
}
