use super::{minimum_degree, LinalgError, SparseMatrix};

/// Pivots below this magnitude (after equilibration) are treated as zero.
const PIVOT_TOL: f64 = 1e-15;

/// Sparse `P S A S Pᵀ = L D Lᵀ` factorization without pivoting, where `S` is a
/// diagonal equilibration and `P` a minimum-degree permutation. Symmetric
/// positive definite and quasi-definite matrices always factor.
#[derive(Debug, Clone)]
pub struct Ldl {
    n: usize,
    perm: Vec<usize>,
    scale: Vec<f64>,
    lp: Vec<usize>,
    li: Vec<usize>,
    lx: Vec<f64>,
    d: Vec<f64>,
}

/// Symmetric Ruiz equilibration: `sweeps` passes of `s_i ← s_i / sqrt(max_j |s_i a_ij s_j|)`.
fn ruiz_scaling(a: &SparseMatrix, sweeps: usize) -> Vec<f64> {
    let n = a.nrows();
    let mut s = vec![1.0; n];
    for _ in 0..sweeps {
        let m: Vec<f64> = (0..n)
            .map(|i| a.row(i).fold(0.0f64, |m, (j, v)| m.max((s[i] * v * s[j]).abs())))
            .collect();
        for i in 0..n {
            if m[i] > 0.0 {
                s[i] /= m[i].sqrt();
            }
        }
    }
    s
}

impl Ldl {
    /// Factors the symmetric matrix `a`, given in full storage.
    pub fn factor(a: &SparseMatrix) -> Result<Ldl, LinalgError> {
        let perm = minimum_degree(a);
        Self::factor_with(a, perm)
    }

    pub fn factor_with(a: &SparseMatrix, perm: Vec<usize>) -> Result<Ldl, LinalgError> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(LinalgError::Dimension(format!("{}x{} is not square", n, a.ncols())));
        }
        let scale = ruiz_scaling(a, 6);
        let mut pinv = vec![0usize; n];
        for (k, &p) in perm.iter().enumerate() {
            pinv[p] = k;
        }

        // symbolic: elimination tree and column counts
        let mut parent = vec![usize::MAX; n];
        let mut flag = vec![0usize; n];
        let mut lnz = vec![0usize; n];
        for k in 0..n {
            flag[k] = k;
            for (j, _) in a.row(perm[k]) {
                let mut i = pinv[j];
                if i < k {
                    while flag[i] != k {
                        if parent[i] == usize::MAX {
                            parent[i] = k;
                        }
                        lnz[i] += 1;
                        flag[i] = k;
                        i = parent[i];
                    }
                }
            }
        }
        let mut lp = vec![0usize; n + 1];
        for k in 0..n {
            lp[k + 1] = lp[k] + lnz[k];
        }

        // numeric, row by row
        let nnz = lp[n];
        let mut li = vec![0usize; nnz];
        let mut lx = vec![0.0; nnz];
        let mut d = vec![0.0; n];
        let mut y = vec![0.0; n];
        let mut pattern = vec![0usize; n];
        lnz.iter_mut().for_each(|c| *c = 0);
        for k in 0..n {
            let mut top = n;
            flag[k] = k;
            let kk = perm[k];
            for (j, v) in a.row(kk) {
                let mut i = pinv[j];
                if i <= k {
                    y[i] += v * scale[kk] * scale[j];
                    let mut len = 0;
                    while flag[i] != k {
                        pattern[len] = i;
                        len += 1;
                        flag[i] = k;
                        i = parent[i];
                    }
                    while len > 0 {
                        top -= 1;
                        len -= 1;
                        pattern[top] = pattern[len];
                    }
                }
            }
            d[k] = y[k];
            y[k] = 0.0;
            while top < n {
                let i = pattern[top];
                let yi = y[i];
                y[i] = 0.0;
                let p2 = lp[i] + lnz[i];
                for p in lp[i]..p2 {
                    y[li[p]] -= lx[p] * yi;
                }
                let l_ki = yi / d[i];
                d[k] -= l_ki * yi;
                li[p2] = k;
                lx[p2] = l_ki;
                lnz[i] += 1;
                top += 1;
            }
            if !(d[k].abs() > PIVOT_TOL) {
                return Err(LinalgError::Singular { dof: kk, pivot: d[k] });
            }
        }
        Ok(Ldl { n, perm, scale, lp, li, lx, d })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz_l(&self) -> usize {
        self.lp[self.n]
    }

    /// True when every pivot is positive, i.e. the matrix is positive definite.
    pub fn is_positive_definite(&self) -> bool {
        self.d.iter().all(|&v| v > 0.0)
    }

    /// Number of negative pivots (the inertia's negative count).
    pub fn negative_pivots(&self) -> usize {
        self.d.iter().filter(|&&v| v < 0.0).count()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let mut x: Vec<f64> = (0..self.n).map(|k| b[self.perm[k]] * self.scale[self.perm[k]]).collect();
        for j in 0..self.n {
            let xj = x[j];
            if xj != 0.0 {
                for p in self.lp[j]..self.lp[j + 1] {
                    x[self.li[p]] -= self.lx[p] * xj;
                }
            }
        }
        for j in 0..self.n {
            x[j] /= self.d[j];
        }
        for j in (0..self.n).rev() {
            let mut s = x[j];
            for p in self.lp[j]..self.lp[j + 1] {
                s -= self.lx[p] * x[self.li[p]];
            }
            x[j] = s;
        }
        let mut out = vec![0.0; self.n];
        for k in 0..self.n {
            let i = self.perm[k];
            out[i] = x[k] * self.scale[i];
        }
        out
    }
}
