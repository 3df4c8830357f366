use nalgebra::{Cholesky, DMatrix, SymmetricEigen};

use super::{LinalgError, Ldl, SparseMatrix};

/// Default relative threshold below which eigenvalues count as zero.
pub const DEFAULT_ZERO_TOL: f64 = 1e-10;

/// Nonzero spectrum of the pencil `B N_V⁻¹ Bᵀ q = λ N_Q q`.
///
/// Rows of `B` that are identically zero cannot carry a nonzero eigenvalue,
/// so the pencil is reduced to the active rows `Γ` with the Schur complement
/// of `N_Q` onto `Γ`. Eigenvectors are kept on `Γ` and extended on demand.
#[derive(Debug, Clone)]
pub struct EigenResult {
    /// Retained (nonzero) eigenvalues, ascending.
    pub eigenvalues: Vec<f64>,
    /// Number of eigenvalues classified as zero, out of `dim Q`.
    pub n_zero: usize,
    /// Absolute cutoff used for the zero classification.
    pub threshold: f64,
    /// Smallest eigenvalue before the cutoff (may be slightly negative).
    pub min_raw: f64,
    n_q: usize,
    active: Vec<usize>,
    interior: Vec<usize>,
    vectors: DMatrix<f64>,
    nii: Option<Ldl>,
    n_i_gamma: SparseMatrix,
    nv: Ldl,
    bt: SparseMatrix,
}

impl EigenResult {
    pub fn beta(&self) -> f64 {
        self.eigenvalues[0].sqrt()
    }

    pub fn norm_b(&self) -> f64 {
        self.eigenvalues[self.eigenvalues.len() - 1].sqrt()
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn dim_q(&self) -> usize {
        self.n_q
    }

    /// Rows of `B` with nonzero entries.
    pub fn active_rows(&self) -> &[usize] {
        &self.active
    }

    /// Full `N_Q`-normalised eigenvector for retained eigenvalue `rank`
    /// (0 = smallest nonzero).
    pub fn eigenvector(&self, rank: usize) -> Result<Vec<f64>, LinalgError> {
        if rank >= self.len() {
            return Err(LinalgError::RankOutOfRange { rank, count: self.len() });
        }
        let mut q = vec![0.0; self.n_q];
        let qg: Vec<f64> = self.vectors.column(rank).iter().copied().collect();
        for (k, &i) in self.active.iter().enumerate() {
            q[i] = qg[k];
        }
        if let Some(nii) = &self.nii {
            let rhs = self.n_i_gamma.mul_vec(&qg);
            let qi = nii.solve(&rhs);
            for (k, &i) in self.interior.iter().enumerate() {
                q[i] = -qi[k];
            }
        }
        Ok(q)
    }

    /// Supremizer `v = N_V⁻¹ Bᵀ q` of eigenvector `rank`.
    pub fn supremizer(&self, rank: usize) -> Result<Vec<f64>, LinalgError> {
        let q = self.eigenvector(rank)?;
        Ok(self.nv.solve(&self.bt.mul_vec(&q)))
    }
}

/// Solves the inf-sup pencil. `b` is `dim Q × dim V`.
pub fn infsup_eigenpairs(
    b: &SparseMatrix,
    n_v: &SparseMatrix,
    n_q: &SparseMatrix,
    zero_tol_rel: f64,
) -> Result<EigenResult, LinalgError> {
    let (nq, nv) = (b.nrows(), b.ncols());
    if n_v.nrows() != nv || n_v.ncols() != nv || n_q.nrows() != nq || n_q.ncols() != nq {
        return Err(LinalgError::Dimension(format!(
            "B {}x{}, N_V {}x{}, N_Q {}x{}",
            nq,
            nv,
            n_v.nrows(),
            n_v.ncols(),
            n_q.nrows(),
            n_q.ncols()
        )));
    }
    let nv_f = match Ldl::factor(n_v) {
        Ok(f) if f.is_positive_definite() => f,
        _ => return Err(LinalgError::NotPositiveDefinite("N_V")),
    };
    let active = b.nonzero_rows();
    let mut is_active = vec![false; nq];
    active.iter().for_each(|&i| is_active[i] = true);
    let interior: Vec<usize> = (0..nq).filter(|&i| !is_active[i]).collect();
    let m = active.len();

    // Schur complement of N_Q onto the active rows
    let mut s = n_q.select(&active, &active).to_dense();
    let n_i_gamma = n_q.select(&interior, &active);
    let nii = if interior.is_empty() {
        None
    } else {
        let nii = n_q.select(&interior, &interior);
        let f = match Ldl::factor(&nii) {
            Ok(f) if f.is_positive_definite() => f,
            _ => return Err(LinalgError::NotPositiveDefinite("N_Q")),
        };
        let n_gamma_i = n_i_gamma.transpose();
        for col in 0..m {
            let mut rhs = vec![0.0; interior.len()];
            for (r, v) in n_gamma_i.row(col) {
                rhs[r] = v;
            }
            if rhs.iter().all(|&v| v == 0.0) {
                continue;
            }
            let y = f.solve(&rhs);
            let corr = n_gamma_i.mul_vec(&y);
            for row in 0..m {
                s[(row, col)] -= corr[row];
            }
        }
        Some(f)
    };
    if m == 0 {
        return Err(LinalgError::DegenerateCoupling);
    }
    let s = 0.5 * (&s + s.transpose());
    let chol = Cholesky::new(s).ok_or(LinalgError::NotPositiveDefinite("N_Q"))?;

    // G = B_Γ N_V⁻¹ B_Γᵀ
    let b_gamma = b.select(&active, &(0..nv).collect::<Vec<_>>());
    let bt_gamma = b_gamma.transpose();
    let mut g = DMatrix::zeros(m, m);
    let mut unit = vec![0.0; m];
    for col in 0..m {
        unit[col] = 1.0;
        let x = nv_f.solve(&bt_gamma.mul_vec(&unit));
        unit[col] = 0.0;
        let gc = b_gamma.mul_vec(&x);
        for row in 0..m {
            g[(row, col)] = gc[row];
        }
    }
    let g = 0.5 * (&g + g.transpose());

    let l = chol.l();
    let lg = l.solve_lower_triangular(&g).expect("Cholesky factor is invertible");
    let mt = l
        .solve_lower_triangular(&lg.transpose())
        .expect("Cholesky factor is invertible");
    let mt = 0.5 * (&mt + mt.transpose());
    let eig = SymmetricEigen::new(mt);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let lambda_max = eig.eigenvalues[order[m - 1]];
    if !(lambda_max > 0.0) {
        return Err(LinalgError::DegenerateCoupling);
    }
    let threshold = zero_tol_rel * lambda_max;
    let keep: Vec<usize> = order
        .iter()
        .copied()
        .filter(|&i| eig.eigenvalues[i] > threshold)
        .collect();
    let mut y = DMatrix::zeros(m, keep.len());
    for (c, &i) in keep.iter().enumerate() {
        y.set_column(c, &eig.eigenvectors.column(i));
    }
    let vectors = l
        .transpose()
        .solve_upper_triangular(&y)
        .expect("Cholesky factor is invertible");
    Ok(EigenResult {
        eigenvalues: keep.iter().map(|&i| eig.eigenvalues[i]).collect(),
        n_zero: nq - keep.len(),
        threshold,
        min_raw: eig.eigenvalues[order[0]],
        n_q: nq,
        active,
        interior,
        vectors,
        nii,
        n_i_gamma,
        nv: nv_f,
        bt: b.transpose(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::TripletBuilder;

    #[test]
    fn identity_pencil() {
        let i = SparseMatrix::identity(6);
        let r = infsup_eigenpairs(&i, &i, &i, DEFAULT_ZERO_TOL).unwrap();
        assert_eq!(r.len(), 6);
        assert!((r.beta() - 1.0).abs() < 1e-14 && (r.norm_b() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn zero_row_gives_one_zero_eigenvalue() {
        let mut b = TripletBuilder::new(4, 4);
        for k in 0..3 {
            b.add(k, k, (k + 1) as f64);
        }
        let i = SparseMatrix::identity(4);
        let r = infsup_eigenpairs(&b.build(), &i, &i, DEFAULT_ZERO_TOL).unwrap();
        assert_eq!(r.n_zero, 1);
        assert!((r.beta() - 1.0).abs() < 1e-14);
        assert!((r.norm_b() - 3.0).abs() < 1e-14);
    }

    #[test]
    fn degenerate_coupling() {
        let b = SparseMatrix::zeros(3, 3);
        let i = SparseMatrix::identity(3);
        assert!(matches!(
            infsup_eigenpairs(&b, &i, &i, DEFAULT_ZERO_TOL),
            Err(LinalgError::DegenerateCoupling)
        ));
    }
}
