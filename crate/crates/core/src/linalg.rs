//! Dense complex matrix helpers shared by the simulation modules.

use ndarray::{Array1, Array2, Axis, ShapeBuilder};
use ndarray_linalg::{Eig, Eigh, SVD, UPLO};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = Array2<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

pub fn identity(dim: usize) -> CMatrix {
    Array2::eye(dim)
}

pub fn dagger(m: &CMatrix) -> CMatrix {
    m.t().mapv(|z| z.conj())
}

fn check_same_shape(a: &CMatrix, b: &CMatrix) -> Result<()> {
    if a.dim() != b.dim() {
        let (r0, c0) = a.dim();
        let (r1, c1) = b.dim();
        return Err(Error::DimensionMismatch(r0, c0, r1, c1));
    }
    Ok(())
}

fn check_square(m: &CMatrix) -> Result<()> {
    let (r, c) = m.dim();
    if r != c {
        return Err(Error::DimensionMismatch(r, c, c, r));
    }
    Ok(())
}

/// Largest absolute entry of `m - m†`.
pub fn hermitian_deviation(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut dev = 0.0f64;
    for i in 0..n {
        for j in i..n {
            dev = dev.max((m[[i, j]] - m[[j, i]].conj()).norm());
        }
    }
    dev
}

/// Largest absolute entry of `m†m - I`.
pub fn unitarity_error(m: &CMatrix) -> f64 {
    let prod = dagger(m).dot(m);
    max_abs_diff(&prod, &identity(m.nrows()))
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Largest singular value.
pub fn spectral_norm(m: &CMatrix) -> Result<f64> {
    if m.is_empty() {
        return Ok(0.0);
    }
    let (_, s, _) = m.svd(false, false)?;
    Ok(s.iter().cloned().fold(0.0, f64::max))
}

/// Maximum eigenvalue modulus of `u - e`. The difference is in general not
/// normal, so a general (non-Hermitian) eigensolver is used.
pub fn spectral_error(u: &CMatrix, e: &CMatrix) -> Result<f64> {
    check_same_shape(u, e)?;
    check_square(u)?;
    let diff = u - e;
    if diff.iter().all(|z| *z == ZERO) {
        return Ok(0.0);
    }
    let (vals, _) = diff.eig()?;
    Ok(vals.iter().map(|z| z.norm()).fold(0.0, f64::max))
}

/// Eigendecomposition of a Hermitian matrix. Rejects inputs whose
/// anti-Hermitian part exceeds `tol`.
pub fn eigh_checked(m: &CMatrix, tol: f64) -> Result<(Array1<f64>, CMatrix)> {
    check_square(m)?;
    let dev = hermitian_deviation(m);
    if dev > tol {
        return Err(Error::NotHermitian(dev));
    }
    // Row-major input reaches LAPACK as the transpose, i.e. the conjugate of
    // a Hermitian matrix, which conjugates the eigenvectors. Pass column-major.
    let mut f = Array2::zeros(m.dim().f());
    f.assign(m);
    Ok(f.eigh(UPLO::Upper)?)
}

/// `V diag(f(λ)) V†` from a Hermitian eigendecomposition.
pub fn spectral_apply<F>(evals: &Array1<f64>, evecs: &CMatrix, f: F) -> CMatrix
where
    F: Fn(f64) -> C64,
{
    let fvals: Array1<C64> = evals.mapv(f);
    let scaled = evecs * &fvals.insert_axis(Axis(0));
    scaled.dot(&dagger(evecs))
}

/// Matrix power by repeated squaring.
pub fn mat_pow(m: &CMatrix, mut exp: usize) -> CMatrix {
    let mut result = identity(m.nrows());
    let mut base = m.clone();
    while exp > 0 {
        if exp & 1 == 1 {
            result = result.dot(&base);
        }
        exp >>= 1;
        if exp > 0 {
            base = base.dot(&base);
        }
    }
    result
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    let mut out = CMatrix::zeros((ar * br, ac * bc));
    for i in 0..ar {
        for j in 0..ac {
            let s = a[[i, j]];
            if s == ZERO {
                continue;
            }
            for k in 0..br {
                for l in 0..bc {
                    out[[i * br + k, j * bc + l]] = s * b[[k, l]];
                }
            }
        }
    }
    out
}

/// Smallest `a` with `2^a >= n` (0 for `n <= 1`).
pub fn ceil_log2(n: usize) -> usize {
    if n <= 1 {
        0
    } else {
        (usize::BITS - (n - 1).leading_zeros()) as usize
    }
}
