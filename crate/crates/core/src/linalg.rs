//! Thin helpers over `nalgebra` for complex least squares.

use nalgebra::DMatrix;
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;

/// Singular values below `RCOND * σ_max` are treated as zero.
pub const DEFAULT_RCOND: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct LstsqSolution {
    pub x: CMatrix,
    /// Numerical rank at the requested cutoff.
    pub rank: usize,
    /// `σ_max / σ_min` over all singular values (infinite when `σ_min = 0`).
    pub condition: f64,
}

/// Minimum-norm least-squares solution of `A X = B`.
///
/// Tall systems are first reduced with a QR factorisation so the SVD only
/// sees the `n x n` triangular factor.
pub fn lstsq(a: &CMatrix, b: &CMatrix, rcond: f64) -> LstsqSolution {
    assert_eq!(a.nrows(), b.nrows(), "lstsq: row mismatch");
    let (rows, cols) = a.shape();
    if cols == 0 {
        return LstsqSolution {
            x: CMatrix::zeros(0, b.ncols()),
            rank: 0,
            condition: 1.0,
        };
    }
    if rows > 2 * cols {
        let qr = a.clone().qr();
        let q = qr.q();
        let r = qr.r();
        let qb = q.adjoint() * b;
        return svd_solve(&r, &qb, rcond);
    }
    svd_solve(a, b, rcond)
}

fn svd_solve(a: &CMatrix, b: &CMatrix, rcond: f64) -> LstsqSolution {
    let cols = a.ncols();
    let svd = a.clone().svd(true, true);
    let u = svd.u.as_ref().expect("svd u");
    let v_t = svd.v_t.as_ref().expect("svd v_t");
    let sv = &svd.singular_values;
    let s_max = sv.iter().cloned().fold(0.0, f64::max);
    let s_min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    // A rank-deficient square/wide system has fewer singular values than columns.
    let s_min = if sv.len() < cols { 0.0 } else { s_min };
    let condition = if s_max == 0.0 {
        f64::INFINITY
    } else {
        s_max / s_min
    };
    let cutoff = rcond * s_max;
    let mut uhb = u.adjoint() * b;
    let mut rank = 0;
    for (i, &s) in sv.iter().enumerate() {
        if s_max > 0.0 && s > cutoff {
            rank += 1;
            uhb.row_mut(i).scale_mut(1.0 / s);
        } else {
            uhb.row_mut(i).fill(Complex64::new(0.0, 0.0));
        }
    }
    LstsqSolution {
        x: v_t.adjoint() * uhb,
        rank,
        condition,
    }
}

/// Singular values in descending order.
pub fn singular_values(a: &CMatrix) -> Vec<f64> {
    let mut sv: Vec<f64> = a.clone().svd(false, false).singular_values.iter().cloned().collect();
    sv.sort_by(|x, y| y.total_cmp(x));
    sv
}

pub fn frobenius(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}
