//! Assembly of the Newton-iteration systems of both coupled formulations,
//! the coupling matrices and the norm matrices used by the inf-sup test.
//!
//! Matrices are first assembled over the full DOF sets, essential values
//! included, then the essential DOFs are eliminated symmetrically. The full
//! system is kept so that reactions (circuit voltages) can be recovered.

mod forms;
mod ha;
mod norms;
mod ta;

use thiserror::Error;

pub use forms::{
    a_gradgrad, coupling_matrix, h_curlcurl, h_curls, h_mass, tape_currents, tape_stiffness,
    uniform_potential_row,
};
pub use ha::{assemble_ha_iteration, HaProblem};
pub use norms::{norm_matrix, restrict_free, NormSpec};
pub use ta::{assemble_ta_iteration, TaProblem};

use crate::linalg::{write_matrix_market, SparseMatrix};
use crate::materials::MaterialError;
use crate::spaces::SpaceError;

#[derive(Debug, Error)]
pub enum AssemblyError {
    #[error("inconsistent spaces: {0}")]
    Mismatch(String),
    #[error("non-finite material value in triangle or segment {0}")]
    NonFinite(usize),
    #[error("norm matrix is singular: {0}")]
    SingularNorm(String),
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Material(#[from] MaterialError),
}

/// Coefficient vectors of both fields of a coupled formulation. `v` holds the
/// h (or t) coefficients and `q` the a coefficients, both over full DOF sets.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Fields {
    pub v: Vec<f64>,
    pub q: Vec<f64>,
}

impl Fields {
    pub fn zeros(n_v: usize, n_q: usize) -> Self {
        Fields { v: vec![0.0; n_v], q: vec![0.0; n_q] }
    }
}

/// A symmetric system over the free DOFs, ordered V block then Q block.
#[derive(Debug, Clone)]
pub struct AssembledSystem {
    pub k: SparseMatrix,
    pub rhs: Vec<f64>,
    /// Free DOFs in the V (h or t) block.
    pub n_v: usize,
    /// Free DOFs in the Q (a) block.
    pub n_q: usize,
    pub dt: f64,
    k_full: SparseMatrix,
    s_full: Vec<f64>,
    essential: Vec<f64>,
    free: Vec<usize>,
    nv_full: usize,
}

impl AssembledSystem {
    /// Eliminates the essential entries of a full system. `essential[i]` is
    /// `Some(value)` for constrained unknowns.
    pub fn from_full(
        k_full: SparseMatrix,
        s_full: Vec<f64>,
        essential: &[Option<f64>],
        nv_full: usize,
        dt: f64,
    ) -> Self {
        let free: Vec<usize> = (0..essential.len()).filter(|&i| essential[i].is_none()).collect();
        let x_ess: Vec<f64> = essential.iter().map(|e| e.unwrap_or(0.0)).collect();
        let lift = k_full.mul_vec(&x_ess);
        let rhs = free.iter().map(|&i| s_full[i] - lift[i]).collect();
        let k = k_full.select(&free, &free).with_symmetric(true);
        let n_v = free.iter().filter(|&&i| i < nv_full).count();
        AssembledSystem {
            n_q: free.len() - n_v,
            n_v,
            k,
            rhs,
            dt,
            k_full,
            s_full,
            essential: x_ess,
            free,
            nv_full,
        }
    }

    pub fn n_free(&self) -> usize {
        self.free.len()
    }

    /// Full unknown vector from free values.
    pub fn expand(&self, x_free: &[f64]) -> Fields {
        let mut full = self.essential.clone();
        for (k, &i) in self.free.iter().enumerate() {
            full[i] = x_free[k];
        }
        let q = full.split_off(self.nv_full);
        Fields { v: full, q }
    }

    /// Free values of a full unknown vector.
    pub fn restrict(&self, x: &Fields) -> Vec<f64> {
        self.free
            .iter()
            .map(|&i| if i < self.nv_full { x.v[i] } else { x.q[i - self.nv_full] })
            .collect()
    }

    /// `K x − s` over all unknowns, essential rows included.
    pub fn full_residual(&self, x: &Fields) -> Vec<f64> {
        let mut all = x.v.clone();
        all.extend_from_slice(&x.q);
        let kx = self.k_full.mul_vec(&all);
        kx.iter().zip(&self.s_full).map(|(a, b)| a - b).collect()
    }

    /// Scaled residual of the free rows, taken block by block:
    /// `max_B ‖r_B‖∞ / (‖ |K_B| |x| ‖∞ + ‖s_B‖∞)`. Zero when both the
    /// residual and the scale vanish.
    pub fn scaled_residual(&self, x: &Fields) -> f64 {
        let mut all = x.v.clone();
        all.extend_from_slice(&x.q);
        let mut num = [0.0f64; 2];
        let mut den = [0.0f64; 2];
        for &i in &self.free {
            let b = usize::from(i >= self.nv_full);
            let (mut kx, mut kabs) = (0.0, 0.0);
            for (j, v) in self.k_full.row(i) {
                kx += v * all[j];
                kabs += (v * all[j]).abs();
            }
            num[b] = num[b].max((kx - self.s_full[i]).abs());
            den[b] = den[b].max(kabs + self.s_full[i].abs());
        }
        (0..2)
            .map(|b| if num[b] == 0.0 { 0.0 } else { num[b] / den[b] })
            .fold(0.0, f64::max)
    }

    pub fn full_matrix(&self) -> &SparseMatrix {
        &self.k_full
    }

    pub fn full_rhs(&self) -> &[f64] {
        &self.s_full
    }

    /// Number of V unknowns in the full numbering.
    pub fn n_v_full(&self) -> usize {
        self.nv_full
    }

    /// Reduced matrix in MatrixMarket format.
    pub fn to_matrix_market(&self) -> String {
        write_matrix_market(&self.k)
    }
}

/// Stacks `[[kvv, kqvᵀ], [kqv, kqq]]` where `kqv` is `n_q × n_v`.
pub(crate) fn block_matrix(kvv: &SparseMatrix, kqv: &SparseMatrix, kqq: &SparseMatrix) -> SparseMatrix {
    let (nv, nq) = (kvv.nrows(), kqq.nrows());
    let mut tb = crate::linalg::TripletBuilder::with_capacity(
        nv + nq,
        nv + nq,
        kvv.nnz() + 2 * kqv.nnz() + kqq.nnz(),
    );
    for i in 0..nv {
        for (j, v) in kvv.row(i) {
            tb.add(i, j, v);
        }
    }
    for i in 0..nq {
        for (j, v) in kqv.row(i) {
            tb.add(nv + i, j, v);
            tb.add(j, nv + i, v);
        }
        for (j, v) in kqq.row(i) {
            tb.add(nv + i, nv + j, v);
        }
    }
    tb.build().with_symmetric(true)
}
