use nalgebra::{DMatrix, DVector};

use super::{FillOrder, Ldl, LinalgError, SparseMatrix};

/// Deferred blocks larger than this are left to the sparse factorization.
pub const MAX_DENSE_TAIL: usize = 1500;

/// Factorization of a symmetric matrix split by a [`FillOrder`]: the leading
/// unknowns go through sparse [`Ldl`], the deferred tail through a dense
/// fully pivoted LU of its Schur complement.
#[derive(Debug, Clone)]
pub struct BlockLdl {
    head: Vec<usize>,
    tail: Vec<usize>,
    ldl: Ldl,
    /// `A11⁻¹ A12`, head × tail.
    x: DMatrix<f64>,
    a12: SparseMatrix,
    schur: Option<nalgebra::linalg::FullPivLU<f64, nalgebra::Dyn, nalgebra::Dyn>>,
}

impl BlockLdl {
    pub fn factor(a: &SparseMatrix, order: &FillOrder) -> Result<BlockLdl, LinalgError> {
        let n = a.nrows();
        let m = if order.n_deferred > MAX_DENSE_TAIL || order.n_deferred == n { 0 } else { order.n_deferred };
        let head = order.perm[..n - m].to_vec();
        let tail = order.perm[n - m..].to_vec();
        if m == 0 {
            let ldl = Ldl::factor_with(a, order.perm.clone())?;
            return Ok(BlockLdl {
                head: order.perm.clone(),
                tail,
                ldl,
                x: DMatrix::zeros(0, 0),
                a12: SparseMatrix::zeros(0, 0),
                schur: None,
            });
        }
        let a11 = a.select(&head, &head).with_symmetric(true);
        let ldl = Ldl::factor_with(&a11, (0..head.len()).collect())
            .map_err(|e| relabel(e, &head))?;
        let a12 = a.select(&head, &tail);
        let mut x = DMatrix::zeros(head.len(), m);
        let mut col = vec![0.0; head.len()];
        let a12t = a12.transpose();
        for c in 0..m {
            col.iter_mut().for_each(|v| *v = 0.0);
            for (i, v) in a12t.row(c) {
                col[i] = v;
            }
            x.set_column(c, &DVector::from_vec(ldl.solve(&col)));
        }
        let mut s = a.select(&tail, &tail).to_dense();
        for i in 0..head.len() {
            for (r, v) in a12.row(i) {
                for c in 0..m {
                    s[(r, c)] -= v * x[(i, c)];
                }
            }
        }
        let lu = s.full_piv_lu();
        let u = lu.u();
        let umax = u.diagonal().iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        if let Some(k) = (0..m).find(|&k| !(u[(k, k)].abs() > 1e-15 * umax)) {
            return Err(LinalgError::Singular { dof: tail[k.min(m - 1)], pivot: u[(k, k)] });
        }
        Ok(BlockLdl { head, tail, ldl, x, a12, schur: Some(lu) })
    }

    /// Number of unknowns in the dense block.
    pub fn n_dense(&self) -> usize {
        self.tail.len()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let Some(lu) = &self.schur else {
            return self.ldl.solve(b);
        };
        let b1: Vec<f64> = self.head.iter().map(|&i| b[i]).collect();
        let y1 = self.ldl.solve(&b1);
        let mut r2 = DVector::from_iterator(self.tail.len(), self.tail.iter().map(|&i| b[i]));
        for (i, &yi) in y1.iter().enumerate() {
            for (c, v) in self.a12.row(i) {
                r2[c] -= v * yi;
            }
        }
        let x2 = lu.solve(&r2).unwrap_or_else(|| DVector::from_element(self.tail.len(), f64::NAN));
        let x1 = DVector::from_vec(y1) - &self.x * &x2;
        let mut out = vec![0.0; b.len()];
        for (k, &i) in self.head.iter().enumerate() {
            out[i] = x1[k];
        }
        for (k, &i) in self.tail.iter().enumerate() {
            out[i] = x2[k];
        }
        out
    }
}

fn relabel(e: LinalgError, head: &[usize]) -> LinalgError {
    match e {
        LinalgError::Singular { dof, pivot } => LinalgError::Singular { dof: head[dof], pivot },
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{solve_dense, TripletBuilder};

    #[test]
    fn matches_dense_with_tiny_tail_diagonal() {
        // Laplacian chain coupled to two unknowns with negligible diagonal
        let n = 12;
        let mut b = TripletBuilder::new(n + 2, n + 2);
        for i in 0..n {
            b.add(i, i, 2.0);
            if i + 1 < n {
                b.add_sym(i, i + 1, -1.0);
            }
        }
        b.add(n, n, -1e-70);
        b.add(n + 1, n + 1, -1e-70);
        b.add_sym(n, 3, 1e-3);
        b.add_sym(n, 4, -1e-3);
        b.add_sym(n + 1, 7, 1e-3);
        b.add_sym(n + 1, 9, -1e-3);
        let a = b.build();
        let order = FillOrder::new(&a);
        assert_eq!(order.n_deferred, 2);
        let f = BlockLdl::factor(&a, &order).unwrap();
        assert_eq!(f.n_dense(), 2);
        let rhs: Vec<f64> = (0..n + 2).map(|i| (i as f64 * 0.7).cos()).collect();
        let x = f.solve(&rhs);
        let y = solve_dense(&a, &rhs).unwrap();
        for (u, v) in x.iter().zip(&y) {
            assert!((u - v).abs() <= 1e-9 * v.abs().max(1.0), "{u} vs {v}");
        }
    }
}
