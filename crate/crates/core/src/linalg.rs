//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector, Dyn, LU};

/// LU factorisation with a 1-norm condition estimate.
pub struct Factored {
    lu: LU<f64, Dyn, Dyn>,
    pub cond: f64,
}

impl Factored {
    pub fn solve(&self, b: &DMatrix<f64>) -> Option<DMatrix<f64>> {
        self.lu.solve(b)
    }
}

fn norm1(a: &DMatrix<f64>) -> f64 {
    a.column_iter().map(|c| c.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// Factor `a` and estimate `κ₁(a)` with Hager's method.  Returns `None` when
/// the factorisation breaks down (exactly singular matrix).
pub fn factor(a: &DMatrix<f64>) -> Option<Factored> {
    let n = a.nrows();
    let lu = a.clone().lu();
    let lut = a.transpose().lu();
    if !lu.is_invertible() || !lut.is_invertible() {
        return None;
    }
    let mut x = DVector::from_element(n, 1.0 / n as f64);
    let mut est = 0.0;
    for iter in 0..5 {
        let y = lu.solve(&x)?;
        est = y.iter().map(|v| v.abs()).sum::<f64>();
        let xi = y.map(|v| if v >= 0.0 { 1.0 } else { -1.0 });
        let z = lut.solve(&xi)?;
        let (j, zmax) = z
            .iter()
            .enumerate()
            .map(|(j, v)| (j, v.abs()))
            .fold((0, 0.0), |acc, p| if p.1 > acc.1 { p } else { acc });
        if iter > 0 && zmax <= z.dot(&x) {
            break;
        }
        x = DVector::zeros(n);
        x[j] = 1.0;
    }
    let cond = norm1(a) * est;
    if !cond.is_finite() {
        return None;
    }
    Some(Factored { lu, cond })
}

/// Scale each row to unit max-norm, applying the same factors to `rhs`.
pub fn equilibrate_rows(a: &mut DMatrix<f64>, rhs: &mut DMatrix<f64>) {
    for i in 0..a.nrows() {
        let m = a.row(i).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if m > 0.0 {
            a.row_mut(i).scale_mut(1.0 / m);
            rhs.row_mut(i).scale_mut(1.0 / m);
        }
    }
}

/// Least-squares solution with singular values (descending).
pub struct LstSq {
    pub x: DMatrix<f64>,
    pub singular_values: Vec<f64>,
    /// Right singular vectors spanning the numerical nullspace (columns).
    pub nullspace: DMatrix<f64>,
    pub rank: usize,
}

/// Minimum-norm least squares via SVD, truncating singular values below
/// `rcond · σ_max`.
pub fn lstsq(a: &DMatrix<f64>, b: &DMatrix<f64>, rcond: f64) -> LstSq {
    let (m, n) = a.shape();
    // thin SVD loses the nullspace when m < n; pad with zero rows
    let padded;
    let a_use = if m < n {
        padded = a.clone().resize_vertically(n, 0.0);
        &padded
    } else {
        a
    };
    let svd = a_use.clone().svd(true, true);
    let u = svd.u.as_ref().unwrap();
    let vt = svd.v_t.as_ref().unwrap();
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let sv: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let smax = sv.first().copied().unwrap_or(0.0);
    let cut = rcond * smax;
    let rank = sv.iter().filter(|s| **s > cut && **s > 0.0).count();
    let mut x = DMatrix::zeros(n, b.ncols());
    let b_use = if m < n { b.clone().resize_vertically(n, 0.0) } else { b.clone() };
    for &i in order.iter().take(rank) {
        let s = svd.singular_values[i];
        let coeff = u.column(i).transpose() * &b_use / s;
        x += vt.row(i).transpose() * coeff;
    }
    let null_idx: Vec<usize> = order.iter().skip(rank).copied().collect();
    let mut nullspace = DMatrix::zeros(n, null_idx.len());
    for (k, &i) in null_idx.iter().enumerate() {
        nullspace.set_column(k, &vt.row(i).transpose());
    }
    LstSq {
        x,
        singular_values: sv,
        nullspace,
        rank,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn condition_estimate_is_close_for_diagonal() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1e-3, 10.0]));
        let f = factor(&a).unwrap();
        assert!((f.cond - 1e4).abs() < 1e-6);
        assert!(factor(&DMatrix::zeros(2, 2)).is_none());
    }

    #[test]
    fn lstsq_reports_nullspace() {
        let a = DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let b = DMatrix::from_row_slice(2, 1, &[2.0, 3.0]);
        let r = lstsq(&a, &b, 1e-12);
        assert_eq!(r.rank, 2);
        assert_eq!(r.nullspace.ncols(), 1);
        assert!((r.nullspace[(2, 0)].abs() - 1.0).abs() < 1e-12);
        assert!((r.x[(0, 0)] - 2.0).abs() < 1e-12 && (r.x[(1, 0)] - 3.0).abs() < 1e-12);
    }
}
