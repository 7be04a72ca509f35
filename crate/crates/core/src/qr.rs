//! Householder QR with column pivoting.

use nalgebra::{DMatrix, DVector};

/// Relative tolerance on |R_kk| / |R_00| below which a column is treated
/// as linearly dependent on the ones pivoted before it.
pub const RANK_TOLERANCE: f64 = 1e-10;

pub(crate) struct PivotedQr {
    /// R in the upper triangle; entries below the diagonal are zero.
    r: DMatrix<f64>,
    /// Householder vectors, `reflectors[k]` acting on rows `k..n`.
    reflectors: Vec<(DVector<f64>, f64)>,
    /// `perm[k]` is the original index of the k-th pivoted column.
    perm: Vec<usize>,
    rank: usize,
}

impl PivotedQr {
    pub(crate) fn new(x: &DMatrix<f64>) -> Self {
        let (n, p) = x.shape();
        let mut a = x.clone();
        let mut perm: Vec<usize> = (0..p).collect();
        let steps = n.min(p);
        let mut reflectors = Vec::with_capacity(steps);

        for k in 0..steps {
            let mut best = k;
            let mut best_norm = -1.0;
            for j in k..p {
                let norm = a.column(j).rows(k, n - k).norm_squared();
                if norm > best_norm {
                    best_norm = norm;
                    best = j;
                }
            }
            if best != k {
                a.swap_columns(k, best);
                perm.swap(k, best);
            }

            let mut v: DVector<f64> = a.column(k).rows(k, n - k).into_owned();
            let alpha = v.norm();
            if alpha == 0.0 {
                reflectors.push((v, 0.0));
                continue;
            }
            let r_kk = if v[0] >= 0.0 { -alpha } else { alpha };
            v[0] -= r_kk;
            let beta = 2.0 / v.norm_squared();
            for j in k + 1..p {
                let mut col = a.column_mut(j);
                let mut col = col.rows_mut(k, n - k);
                let s = beta * v.dot(&col);
                col.axpy(-s, &v, 1.0);
            }
            a[(k, k)] = r_kk;
            a.view_mut((k + 1, k), (n - k - 1, 1)).fill(0.0);
            reflectors.push((v, beta));
        }

        let r = a.rows(0, steps).into_owned();
        let lead = if steps > 0 { r[(0, 0)].abs() } else { 0.0 };
        let rank = (0..steps)
            .take_while(|&k| lead > 0.0 && r[(k, k)].abs() > RANK_TOLERANCE * lead)
            .count();
        PivotedQr {
            r,
            reflectors,
            perm,
            rank,
        }
    }

    pub(crate) fn rank(&self) -> usize {
        self.rank
    }

    /// Original column indices that fell below the rank tolerance.
    pub(crate) fn dependent_columns(&self) -> Vec<usize> {
        let mut cols = self.perm[self.rank..].to_vec();
        cols.sort_unstable();
        cols
    }

    /// Dependent columns together with the independent columns they are
    /// (numerically) combinations of, in original order.
    pub(crate) fn dependent_set(&self) -> Vec<usize> {
        let rank = self.rank;
        let mut set = self.dependent_columns();
        if rank > 0 {
            let r11 = self.r.view((0, 0), (rank, rank));
            for d in rank..self.perm.len().min(self.r.nrows()) {
                let rhs = self.r.view((0, d), (rank, 1)).into_owned();
                if let Some(z) = r11.solve_upper_triangular(&rhs) {
                    let scale = z.amax().max(1.0);
                    for (i, zi) in z.iter().enumerate() {
                        if zi.abs() > 1e-8 * scale {
                            set.push(self.perm[i]);
                        }
                    }
                }
            }
        }
        set.sort_unstable();
        set.dedup();
        set
    }

    fn apply_qt(&self, y: &DVector<f64>) -> DVector<f64> {
        let mut qty = y.clone();
        for (k, (v, beta)) in self.reflectors.iter().enumerate() {
            if *beta == 0.0 {
                continue;
            }
            let mut tail = qty.rows_mut(k, v.len());
            let s = beta * v.dot(&tail);
            tail.axpy(-s, v, 1.0);
        }
        qty
    }

    /// Least-squares solution in original column order. Requires full column rank.
    pub(crate) fn solve(&self, y: &DVector<f64>) -> DVector<f64> {
        let p = self.perm.len();
        let qty = self.apply_qt(y);
        let rhs = qty.rows(0, p).into_owned();
        let z = self
            .r
            .view((0, 0), (p, p))
            .solve_upper_triangular(&rhs)
            .expect("full-rank R has a nonzero diagonal");
        let mut beta = DVector::zeros(p);
        for (k, &orig) in self.perm.iter().enumerate() {
            beta[orig] = z[k];
        }
        beta
    }

    /// (X'X)^{-1} in original column order, as R^{-1} R^{-T} un-permuted.
    pub(crate) fn xtx_inverse(&self) -> DMatrix<f64> {
        let p = self.perm.len();
        let r_inv = self
            .r
            .view((0, 0), (p, p))
            .solve_upper_triangular(&DMatrix::identity(p, p))
            .expect("full-rank R has a nonzero diagonal");
        let m = &r_inv * r_inv.transpose();
        let mut out = DMatrix::zeros(p, p);
        for i in 0..p {
            for j in 0..p {
                out[(self.perm[i], self.perm[j])] = m[(i, j)];
            }
        }
        out
    }
}
