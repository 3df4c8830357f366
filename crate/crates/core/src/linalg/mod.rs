//! Sparse storage, a direct symmetric solver and the generalized eigensolver
//! behind the inf-sup test.
//!
//! [`solve_sparse`] factors with [`Ldl`] (no pivoting, minimum-degree
//! ordering, Ruiz equilibration), handles unknowns with negligible diagonal
//! through a dense Schur complement ([`BlockLdl`]), refines iteratively, and
//! falls back to dense LU for small systems whose `LDLᵀ` breaks down.

mod eigen;
mod ldl;
mod mm;
mod ordering;
mod schur;
mod sparse;

use nalgebra::DVector;
use thiserror::Error;

pub use eigen::{infsup_eigenpairs, EigenResult, DEFAULT_ZERO_TOL};
pub use ldl::Ldl;
pub use mm::{read_matrix_market, write_matrix_market};
pub use ordering::{minimum_degree, minimum_degree_deferred};
pub use schur::{BlockLdl, MAX_DENSE_TAIL};
pub use sparse::{SparseMatrix, TripletBuilder};

/// Coupling-to-diagonal ratio above which an unknown is eliminated last.
const WEAK_RATIO: f64 = 1e6;

/// Largest system handed to the dense fallback.
pub const DENSE_FALLBACK_MAX: usize = 4000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("singular system: zero pivot {pivot:e} at dof {dof}")]
    Singular { dof: usize, pivot: f64 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("matrix {0} is not symmetric positive definite")]
    NotPositiveDefinite(&'static str),
    #[error("coupling matrix has no nonzero singular value")]
    DegenerateCoupling,
    #[error("eigen rank {rank} out of range (have {count})")]
    RankOutOfRange { rank: usize, count: usize },
    #[error("residual {0:e} above tolerance after refinement")]
    Inaccurate(f64),
    #[error("matrix market parse error: {0}")]
    Parse(String),
}

/// Scaled residual `‖Kx − s‖∞ / (‖K‖∞ ‖x‖∞ + ‖s‖∞)`.
pub fn scaled_residual(k: &SparseMatrix, x: &[f64], s: &[f64]) -> f64 {
    let r = k.mul_vec(x);
    let num = r.iter().zip(s).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    let xn = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let sn = s.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let den = k.norm_inf() * xn + sn;
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Solves `K x = s` for symmetric (possibly indefinite) `K` in full storage.
/// The result satisfies [`scaled_residual`] below 1e-10 or an error is returned.
pub fn solve_sparse(k: &SparseMatrix, s: &[f64]) -> Result<Vec<f64>, LinalgError> {
    if k.nrows() != k.ncols() || k.nrows() != s.len() {
        return Err(LinalgError::Dimension(format!(
            "matrix {}x{}, rhs {}",
            k.nrows(),
            k.ncols(),
            s.len()
        )));
    }
    solve_sparse_ordered(k, s, &FillOrder::new(k))
}

/// Unknowns whose diagonal is negligible against their couplings:
/// `|a_ij| > 1e6 sqrt(|a_ii a_jj|)` for some `j` with `|a_jj| > |a_ii|`, or a
/// zero diagonal.
pub fn weak_diagonal(a: &SparseMatrix) -> Vec<bool> {
    let d = a.diag();
    (0..a.nrows())
        .map(|i| {
            d[i] == 0.0
                || a.row(i)
                    .any(|(j, v)| {
                        j != i && d[i].abs() < d[j].abs() && v.abs() > WEAK_RATIO * (d[i] * d[j]).abs().sqrt()
                    })
        })
        .collect()
}

/// Elimination order for [`BlockLdl`]: minimum degree over the
/// well-conditioned unknowns, followed by the `n_deferred` weak-diagonal ones.
#[derive(Debug, Clone, PartialEq)]
pub struct FillOrder {
    pub perm: Vec<usize>,
    pub n_deferred: usize,
}

impl FillOrder {
    pub fn new(a: &SparseMatrix) -> Self {
        Self::with_deferred(a, &weak_diagonal(a))
    }

    pub fn with_deferred(a: &SparseMatrix, deferred: &[bool]) -> Self {
        FillOrder {
            perm: minimum_degree_deferred(a, deferred),
            n_deferred: deferred.iter().filter(|&&d| d).count(),
        }
    }
}

/// [`solve_sparse`] with a given elimination order, for sequences of
/// matrices sharing one sparsity pattern.
pub fn solve_sparse_ordered(k: &SparseMatrix, s: &[f64], order: &FillOrder) -> Result<Vec<f64>, LinalgError> {
    if k.nrows() != k.ncols() || k.nrows() != s.len() || order.perm.len() != k.nrows() {
        return Err(LinalgError::Dimension(format!(
            "matrix {}x{}, rhs {}, ordering {}",
            k.nrows(),
            k.ncols(),
            s.len(),
            order.perm.len()
        )));
    }
    match BlockLdl::factor(k, order) {
        Ok(f) => match refine_solution(k, s, |r| f.solve(r)) {
            Err(LinalgError::Inaccurate(_)) if k.nrows() <= DENSE_FALLBACK_MAX => solve_dense(k, s),
            other => other,
        },
        Err(e @ LinalgError::Singular { .. }) if k.nrows() > DENSE_FALLBACK_MAX => Err(e),
        Err(LinalgError::Singular { .. }) => solve_dense(k, s),
        Err(e) => Err(e),
    }
}

fn refine_solution(
    k: &SparseMatrix,
    s: &[f64],
    solve: impl Fn(&[f64]) -> Vec<f64>,
) -> Result<Vec<f64>, LinalgError> {
    let mut x = solve(s);
    let mut err = componentwise_residual(k, &x, s);
    for _ in 0..6 {
        if !(err > 1e-15) {
            break;
        }
        let kx = k.mul_vec(&x);
        let r: Vec<f64> = s.iter().zip(&kx).map(|(a, b)| a - b).collect();
        let dx = solve(&r);
        let cand: Vec<f64> = x.iter().zip(&dx).map(|(a, b)| a + b).collect();
        let cerr = componentwise_residual(k, &cand, s);
        if cerr < err {
            x = cand;
            err = cerr;
        } else {
            break;
        }
    }
    let res = scaled_residual(k, &x, s);
    if res.is_finite() && res < 1e-10 {
        Ok(x)
    } else {
        Err(LinalgError::Inaccurate(res))
    }
}

/// Componentwise backward error `max_i |Kx − s|_i / (|K| |x| + |s|)_i`.
pub fn componentwise_residual(k: &SparseMatrix, x: &[f64], s: &[f64]) -> f64 {
    (0..k.nrows())
        .map(|i| {
            let (mut r, mut d) = (-s[i], s[i].abs());
            for (j, v) in k.row(i) {
                r += v * x[j];
                d += (v * x[j]).abs();
            }
            if r == 0.0 {
                0.0
            } else {
                r.abs() / d
            }
        })
        .fold(0.0, f64::max)
}

/// Dense LU with partial pivoting; used as fallback and as test oracle.
pub fn solve_dense(k: &SparseMatrix, s: &[f64]) -> Result<Vec<f64>, LinalgError> {
    let n = k.nrows();
    let lu = k.to_dense().lu();
    let u = lu.u();
    let umax = u.diagonal().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for i in 0..n {
        if !(u[(i, i)].abs() > 1e-15 * umax) {
            return Err(LinalgError::Singular { dof: i, pivot: u[(i, i)] });
        }
    }
    refine_solution(k, s, |r| {
        lu.solve(&DVector::from_column_slice(r))
            .map(|v| v.as_slice().to_vec())
            .unwrap_or_else(|| vec![f64::NAN; n])
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_solve() {
        let k = SparseMatrix::identity(5);
        let s = vec![1.0, -2.0, 3.0, 0.5, 0.0];
        assert_eq!(solve_sparse(&k, &s).unwrap(), s);
    }

    #[test]
    fn zero_diagonal_falls_back_to_dense() {
        // [[0, 1], [1, 0]] has no LDLᵀ without pivoting
        let mut b = TripletBuilder::new(2, 2);
        b.add_sym(0, 1, 1.0);
        let k = b.build();
        let x = solve_sparse(&k, &[2.0, 3.0]).unwrap();
        assert_eq!(x, vec![3.0, 2.0]);
    }

    #[test]
    fn singular_is_reported() {
        let mut b = TripletBuilder::new(2, 2);
        b.add(0, 0, 1.0);
        let k = b.build();
        assert!(matches!(solve_sparse(&k, &[1.0, 1.0]), Err(LinalgError::Singular { .. })));
    }
}
