//! Numerical kernels shared by both estimation pipelines.
//!
//! Nothing here knows about delays or Dopplers beyond the two phase
//! mappings; the kernels operate on plain complex data.

use std::f64::consts::PI;

use nalgebra::Schur;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{lstsq, CMatrix, DEFAULT_RCOND};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Relative residual every polished root must meet.
pub const ROOT_RESIDUAL_TOL: f64 = 1e-6;
const NEWTON_STEPS: usize = 4;
const SCHUR_MAX_ITER: usize = 10_000;

/// Monic annihilating filter `a[0..=P]`, `a[0] = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnihilatorCoeffs {
    pub coeffs: Vec<Complex64>,
    /// Set when the data carried no energy; `coeffs` is then `(1, 0, ..., 0)`.
    pub degenerate: bool,
}

impl AnnihilatorCoeffs {
    pub fn new(coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() < 2 {
            return Err(Error::Argument("annihilator needs degree >= 1".into()));
        }
        if coeffs[0] != ONE {
            return Err(Error::Argument("annihilator must be monic (a[0] = 1)".into()));
        }
        Ok(Self {
            coeffs,
            degenerate: false,
        })
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// `a[0] x^P + a[1] x^{P-1} + ... + a[P]` by Horner's rule.
    pub fn eval(&self, x: Complex64) -> Complex64 {
        self.coeffs.iter().fold(ZERO, |acc, &c| acc * x + c)
    }

    fn eval_with_derivative(&self, x: Complex64) -> (Complex64, Complex64) {
        let mut p = ZERO;
        let mut dp = ZERO;
        for &c in &self.coeffs {
            dp = dp * x + p;
            p = p * x + c;
        }
        (p, dp)
    }

    /// `|p(z)|` scaled by the largest coefficient and by `|z|^P` when `|z| > 1`.
    pub fn relative_residual(&self, z: Complex64) -> f64 {
        let scale = self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
        let growth = z.norm().max(1.0).powi(self.degree() as i32);
        self.eval(z).norm() / (scale * growth)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RootSet {
    pub roots: Vec<Complex64>,
}

/// Solves `data · a ≈ 0` with `a[0] = 1` in the least-squares sense:
/// `data[:, 1..] a[1..] = -data[:, 0]`, minimum-norm when rank deficient.
///
/// Each row of `data` is one equation made of `order + 1` lagged samples.
pub fn annihilating_filter(data: &CMatrix, order: usize) -> Result<AnnihilatorCoeffs> {
    if order < 1 {
        return Err(Error::Argument("filter order must be >= 1".into()));
    }
    if data.nrows() < 1 || data.ncols() != order + 1 {
        return Err(Error::Argument(format!(
            "data is {}x{}, expected >= 1 row and {} columns",
            data.nrows(),
            data.ncols(),
            order + 1
        )));
    }
    let mut coeffs = vec![ZERO; order + 1];
    coeffs[0] = ONE;
    if data.iter().all(|z| *z == ZERO) {
        return Ok(AnnihilatorCoeffs {
            coeffs,
            degenerate: true,
        });
    }
    let lhs = data.columns(1, order).into_owned();
    let rhs = -data.column(0).into_owned();
    let rhs = CMatrix::from_column_slice(rhs.nrows(), 1, rhs.as_slice());
    let sol = lstsq(&lhs, &rhs, DEFAULT_RCOND);
    coeffs[1..].copy_from_slice(sol.x.as_slice());
    Ok(AnnihilatorCoeffs {
        coeffs,
        degenerate: false,
    })
}

/// All roots of the monic polynomial: companion-matrix eigenvalues from a
/// complex Schur decomposition, then a few guarded Newton steps each.
pub fn polynomial_roots(a: &AnnihilatorCoeffs) -> Result<RootSet> {
    let deg = a.degree();
    if a.coeffs[0] != ONE {
        return Err(Error::Argument("polynomial must be monic".into()));
    }
    let mut companion = CMatrix::zeros(deg, deg);
    for j in 0..deg {
        companion[(0, j)] = -a.coeffs[j + 1];
    }
    for i in 1..deg {
        companion[(i, i - 1)] = ONE;
    }
    let fail = || Error::RootNonConvergence {
        coeffs: a.coeffs.clone(),
    };
    let schur = Schur::try_new(companion, f64::EPSILON, SCHUR_MAX_ITER).ok_or_else(fail)?;
    let eig = schur.eigenvalues().ok_or_else(fail)?;

    let mut roots: Vec<Complex64> = eig.iter().copied().collect();
    for z in roots.iter_mut() {
        *z = polish(a, *z);
        if !z.is_finite() || a.relative_residual(*z) > ROOT_RESIDUAL_TOL {
            return Err(fail());
        }
    }
    Ok(RootSet { roots })
}

fn polish(a: &AnnihilatorCoeffs, mut z: Complex64) -> Complex64 {
    let mut best = a.eval(z).norm();
    for _ in 0..NEWTON_STEPS {
        let (p, dp) = a.eval_with_derivative(z);
        if dp == ZERO || p == ZERO {
            break;
        }
        let next = z - p / dp;
        let r = a.eval(next).norm();
        if !(r < best) {
            break;
        }
        best = r;
        z = next;
    }
    z
}

/// `arg(z) / (2πT)`, in `[-1/(2T), 1/(2T)]`.
pub fn phase_to_doppler(z: Complex64, period: f64) -> Result<f64> {
    if z == ZERO || !z.is_finite() {
        return Err(Error::Degenerate("cannot take the phase of a zero root".into()));
    }
    Ok(z.arg() / (2.0 * PI * period))
}

/// `T ((-arg(z) / 2π) mod 1)`, in `[0, T)`.
pub fn phase_to_delay(z: Complex64, period: f64) -> Result<f64> {
    if z == ZERO || !z.is_finite() {
        return Err(Error::Degenerate("cannot take the phase of a zero root".into()));
    }
    let mut frac = (-z.arg() / (2.0 * PI)).rem_euclid(1.0);
    if frac >= 1.0 {
        frac = 0.0;
    }
    Ok(period * frac)
}

/// Least-squares ratio `Z` minimising `Σ |y[m+1] - Z y[m]|²`.
///
/// This is the order-one annihilating filter of `y` in closed form.
pub fn single_mode_ratio(y: &[Complex64]) -> Result<Complex64> {
    if y.len() < 2 {
        return Err(Error::Argument("need at least two samples".into()));
    }
    let (num, den) = y
        .windows(2)
        .fold((ZERO, 0.0), |(num, den), w| (num + w[1] * w[0].conj(), den + w[0].norm_sqr()));
    if den == 0.0 || num == ZERO {
        return Err(Error::Degenerate("sequence carries no energy".into()));
    }
    Ok(num / den)
}

/// `argmin_V ‖R - E V‖_F` through the pseudo-inverse of `E`.
pub fn ls_separate(e: &CMatrix, r: &CMatrix) -> Result<CMatrix> {
    if e.nrows() != r.nrows() {
        return Err(Error::Argument(format!(
            "E has {} rows, R has {}",
            e.nrows(),
            r.nrows()
        )));
    }
    if e.nrows() < e.ncols() {
        return Err(Error::Argument("E must have at least as many rows as columns".into()));
    }
    Ok(lstsq(e, r, DEFAULT_RCOND).x)
}

/// Expands `Π (x - z_i)` into monic coefficients, highest power first.
pub fn poly_from_roots(roots: &[Complex64]) -> Vec<Complex64> {
    let mut coeffs = vec![ONE];
    for &z in roots {
        let mut next = vec![ZERO; coeffs.len() + 1];
        for (i, &c) in coeffs.iter().enumerate() {
            next[i] += c;
            next[i + 1] -= c * z;
        }
        coeffs = next;
    }
    coeffs
}
