//! Jacobi–Anger polynomials and a qubitization-walk model of QSVT evolution.
//!
//! The degree-`d` approximation of `e^{-ixt}` is a Chebyshev series whose
//! coefficients are Bessel functions. Applied to a block-encoding it becomes
//! `Σ_k a_k ⟨0|(RW)^k|0⟩`, which equals the polynomial of the encoded block
//! when `W` is exact and carries block errors through every power when not.

use ndarray::s;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::blockenc::{self, BlockEncoding, SparseEncodingOptions, SparseNormalization};
use crate::dynamics::SparsePlan;
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, C64, ZERO};
use crate::pauli::Hamiltonian;

const BESSEL_MAX_ORDER: usize = 10_000;
const BESSEL_MAX_ARG: f64 = 1e3;

/// Walk tolerance on the anti-Hermitian part of the encoded block.
pub const WALK_HERMITIAN_TOL: f64 = 1e-8;

fn check_bessel_range(k: usize, x: f64) -> Result<()> {
    if k > BESSEL_MAX_ORDER || !(x.abs() <= BESSEL_MAX_ARG) {
        return Err(Error::OutOfRange(format!(
            "bessel J_{k}({x}) outside k <= {BESSEL_MAX_ORDER}, |x| <= {BESSEL_MAX_ARG}"
        )));
    }
    Ok(())
}

/// `J_0(x), …, J_kmax(x)` by Miller's downward recurrence, normalized with
/// `J_0 + 2 Σ J_{2m} = 1`.
pub fn bessel_j_all(kmax: usize, x: f64) -> Result<Vec<f64>> {
    check_bessel_range(kmax, x)?;
    let mut out = vec![0.0; kmax + 1];
    if x == 0.0 {
        out[0] = 1.0;
        return Ok(out);
    }
    let ax = x.abs();
    let base = kmax.max(ax.ceil() as usize);
    let mut start = base + (10.0 + 2.0 * (base as f64).sqrt()).ceil() as usize;
    // The recurrence only becomes stable once the start order clears the
    // turning point at k ≈ |x|.
    start = start.max((ax + 10.0 * ax.cbrt() + 20.0).ceil() as usize);
    start += start % 2;

    let mut next = 0.0; // J_{k+1}
    let mut cur = 1e-300; // J_k
    let mut norm = 0.0;
    for k in (0..=start).rev() {
        if k <= kmax {
            out[k] = cur;
        }
        if k == 0 {
            norm += cur;
        } else if k % 2 == 0 {
            norm += 2.0 * cur;
        }
        if k == 0 {
            break;
        }
        let prev = 2.0 * k as f64 / ax * cur - next;
        next = cur;
        cur = prev;
        if cur.abs() > 1e250 {
            let scale = 1.0 / cur.abs();
            cur *= scale;
            next *= scale;
            norm *= scale;
            for v in out.iter_mut() {
                *v *= scale;
            }
        }
    }
    for (k, v) in out.iter_mut().enumerate() {
        *v /= norm;
        if x < 0.0 && k % 2 == 1 {
            *v = -*v;
        }
    }
    Ok(out)
}

pub fn bessel_j(k: usize, x: f64) -> Result<f64> {
    Ok(bessel_j_all(k, x)?[k])
}

/// Truncated Jacobi–Anger series of `e^{-ixt}`.
#[derive(Clone, Debug, PartialEq)]
pub struct JacobiAngerSeries {
    pub t_eff: f64,
    pub d: usize,
    /// Coefficients of `T_0, T_2, …`.
    pub cos_coeffs: Vec<f64>,
    /// Coefficients of `T_1, T_3, …`.
    pub sin_coeffs: Vec<f64>,
}

impl JacobiAngerSeries {
    pub fn new(t_eff: f64, d: usize) -> Result<Self> {
        let j = bessel_j_all(d, t_eff)?;
        let sign = |m: usize| if m % 2 == 0 { 1.0 } else { -1.0 };
        let cos_coeffs = (0..=d / 2)
            .map(|m| if m == 0 { j[0] } else { sign(m) * 2.0 * j[2 * m] })
            .collect();
        let sin_coeffs = (0..(d + 1) / 2).map(|m| sign(m) * 2.0 * j[2 * m + 1]).collect();
        Ok(Self {
            t_eff,
            d,
            cos_coeffs,
            sin_coeffs,
        })
    }

    /// Complex coefficient `a_k` of `T_k` in the cos − i·sin series.
    pub fn coefficients(&self) -> Vec<C64> {
        (0..=self.d)
            .map(|k| {
                if k % 2 == 0 {
                    C64::new(self.cos_coeffs[k / 2], 0.0)
                } else {
                    C64::new(0.0, -self.sin_coeffs[k / 2])
                }
            })
            .collect()
    }
}

fn bound_log(t_eff: f64, d: usize) -> f64 {
    d as f64 * (t_eff / d as f64).ln()
}

/// Smallest `d > e·t_eff` with `(t_eff/d)^d ≤ ε`.
pub fn truncation_degree(eps_poly: f64, t_eff: f64) -> Result<usize> {
    if !(eps_poly > 0.0 && eps_poly < 1.0) {
        return Err(Error::OutOfRange(format!("polynomial error {eps_poly} outside (0, 1)")));
    }
    if !(t_eff > 0.0) || !t_eff.is_finite() {
        return Err(Error::OutOfRange(format!("effective time {t_eff} must be positive")));
    }
    let target = eps_poly.ln() + 1e-12;
    let mut d = (std::f64::consts::E * t_eff).floor() as usize + 1;
    while bound_log(t_eff, d) > target {
        d += 1;
    }
    Ok(d)
}

/// `(t_eff/d)^d`, defined for `d > t_eff`.
pub fn poly_error(t_eff: f64, d: usize) -> Result<f64> {
    if (d as f64) <= t_eff {
        return Err(Error::OutOfRange(format!(
            "truncation bound needs d > t_eff (d = {d}, t_eff = {t_eff})"
        )));
    }
    if t_eff == 0.0 {
        return Ok(0.0);
    }
    Ok(bound_log(t_eff, d).exp())
}

/// Clenshaw evaluation of the series at `x ∈ [-1, 1]`.
pub fn eval_exponential_poly(x: f64, series: &JacobiAngerSeries) -> C64 {
    let coeffs = series.coefficients();
    let mut b1 = ZERO;
    let mut b2 = ZERO;
    for a in coeffs[1..].iter().rev() {
        let b0 = a + b1 * (2.0 * x) - b2;
        b2 = b1;
        b1 = b0;
    }
    coeffs[0] + b1 * x - b2
}

/// Polynomial of `h/normalization` with `t_eff = normalization·t`, for
/// several degrees from one eigendecomposition.
pub fn apply_poly_eigenbasis_dense(
    h: &CMatrix,
    normalization: f64,
    t: f64,
    degrees: &[usize],
) -> Result<Vec<CMatrix>> {
    let scaled = h.mapv(|z| z / normalization);
    let (vals, vecs) = linalg::eigh_checked(&scaled, 1e-9)?;
    if let Some(v) = vals.iter().find(|v| v.abs() > 1.0 + 1e-9) {
        return Err(Error::OutOfRange(format!("eigenvalue {v} of H/λ outside [-1, 1]")));
    }
    degrees
        .iter()
        .map(|&d| {
            let series = JacobiAngerSeries::new(normalization * t, d)?;
            Ok(linalg::spectral_apply(&vals, &vecs, |x| eval_exponential_poly(x.clamp(-1.0, 1.0), &series)))
        })
        .collect()
}

/// Ideal QSVT output: the degree-`d` polynomial applied to `H/λ`.
pub fn apply_poly_eigenbasis(h: &Hamiltonian, t: f64, d: usize) -> Result<CMatrix> {
    let mut out = apply_poly_eigenbasis_dense(&h.dense()?, h.one_norm()?, t, &[d])?;
    Ok(out.remove(0))
}

/// `R·W` with `R = (2Π - I) ⊗ I` and no Hermiticity check on the block.
pub fn walk_from_unitary(w: &CMatrix, system_dim: usize) -> CMatrix {
    let mut rw = w.clone();
    rw.slice_mut(s![system_dim.., ..]).mapv_inplace(|z| -z);
    rw
}

pub fn walk_operator(be: &BlockEncoding) -> Result<CMatrix> {
    let dev = linalg::hermitian_deviation(&be.block());
    if dev > WALK_HERMITIAN_TOL {
        return Err(Error::NotHermitian(dev));
    }
    Ok(walk_from_unitary(&be.w, be.system_dim()))
}

/// `⟨0|(RW)^k|0⟩` for `k = 0..=kmax`.
pub fn walk_blocks(be: &BlockEncoding, kmax: usize) -> Vec<CMatrix> {
    let n = be.system_dim();
    let walk = walk_from_unitary(&be.w, n);
    let mut x = linalg::identity(be.dim()).slice(s![.., ..n]).to_owned();
    let mut out = Vec::with_capacity(kmax + 1);
    for k in 0..=kmax {
        out.push(x.slice(s![..n, ..]).to_owned());
        if k < kmax {
            x = walk.dot(&x);
        }
    }
    out
}

/// Partial sums `Σ_{k≤d} a_k ⟨0|(RW)^k|0⟩` for each requested degree, with
/// coefficients at `t_eff = normalization·t`.
pub fn qsvt_simulate_degrees(be: &BlockEncoding, t: f64, degrees: &[usize]) -> Result<Vec<CMatrix>> {
    if degrees.is_empty() {
        return Ok(Vec::new());
    }
    if degrees.contains(&0) {
        return Err(Error::InvalidArgument("degree must be >= 1".into()));
    }
    let dmax = *degrees.iter().max().unwrap();
    let t_eff = be.normalization * t;
    let n = be.system_dim();
    let walk = walk_from_unitary(&be.w, n);
    let mut x = linalg::identity(be.dim()).slice(s![.., ..n]).to_owned();
    // Coefficients of the partial sums differ only in the Bessel values kept,
    // and J_k does not depend on the truncation degree.
    let coeffs = JacobiAngerSeries::new(t_eff, dmax)?.coefficients();
    let mut acc = CMatrix::zeros((n, n));
    let mut sums = std::collections::BTreeMap::new();
    for (k, a) in coeffs.iter().enumerate() {
        acc.scaled_add(*a, &x.slice(s![..n, ..]));
        if degrees.contains(&k) {
            sums.insert(k, acc.clone());
        }
        if k < dmax {
            x = walk.dot(&x);
        }
    }
    Ok(degrees.iter().map(|d| sums[d].clone()).collect())
}

pub fn qsvt_simulate(be: &BlockEncoding, t: f64, d: usize) -> Result<CMatrix> {
    Ok(qsvt_simulate_degrees(be, t, &[d])?.remove(0))
}

/// One row of the Fig.-2 style error split.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorDecomposition {
    pub d: usize,
    /// `(t_eff/d)^d`; `None` where the bound does not apply (`d ≤ t_eff`).
    pub eps_poly: Option<f64>,
    /// Distance between perturbed and exact QSVT outputs.
    pub eps_be: f64,
    /// Distance between perturbed QSVT output and `e^{-iHt}`.
    pub eps_total: f64,
}

pub fn qsvt_error_decomposition_degrees(
    h: &Hamiltonian,
    exact: &BlockEncoding,
    perturbed: &BlockEncoding,
    t: f64,
    degrees: &[usize],
) -> Result<Vec<ErrorDecomposition>> {
    let target = crate::dynamics::exact_evolution(h, t)?;
    let ideal = qsvt_simulate_degrees(exact, t, degrees)?;
    let noisy = qsvt_simulate_degrees(perturbed, t, degrees)?;
    let t_eff = exact.normalization * t;
    degrees
        .iter()
        .zip(ideal.iter().zip(&noisy))
        .map(|(&d, (u, ut))| {
            Ok(ErrorDecomposition {
                d,
                eps_poly: poly_error(t_eff, d).ok(),
                eps_be: linalg::spectral_error(ut, u)?,
                eps_total: linalg::spectral_error(ut, &target)?,
            })
        })
        .collect()
}

pub fn qsvt_error_decomposition(
    h: &Hamiltonian,
    exact: &BlockEncoding,
    perturbed: &BlockEncoding,
    t: f64,
    d: usize,
) -> Result<ErrorDecomposition> {
    Ok(qsvt_error_decomposition_degrees(h, exact, perturbed, t, &[d])?.remove(0))
}

/// `C·d·√var + ε_poly`.
pub fn sparse_qsvt_error_model(d: usize, var_coeff: f64, eps_poly: f64, constant: f64) -> Result<f64> {
    if var_coeff < 0.0 || eps_poly < 0.0 || constant < 0.0 {
        return Err(Error::InvalidArgument("error model inputs must be nonnegative".into()));
    }
    Ok(constant * d as f64 * var_coeff.sqrt() + eps_poly)
}

/// How stochastic block-encodings are drawn across the `d` uses.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SparseDrawMode {
    /// One draw reused for every power.
    #[default]
    Correlated,
    /// A fresh draw for every walk step.
    PerPower,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QsvtBackend {
    /// Dense walk powers on system plus ancilla register.
    Walk,
    /// Polynomial applied to the eigenvalues of the encoded operator. Exact
    /// for ideal encodings and far cheaper when the ancilla register is large.
    #[default]
    Eigenbasis,
}

/// Sparse-QSVT output for each degree, from one realization.
pub fn sparse_qsvt_simulate<R: Rng + ?Sized>(
    h: &Hamiltonian,
    plan: &SparsePlan,
    t: f64,
    degrees: &[usize],
    options: SparseEncodingOptions,
    mode: SparseDrawMode,
    backend: QsvtBackend,
    rng: &mut R,
) -> Result<Vec<CMatrix>> {
    match (mode, backend) {
        (SparseDrawMode::Correlated, QsvtBackend::Eigenbasis) => {
            let mask = blockenc::draw_survivors(h, plan, options.empty_draw, rng)?;
            let (encoded, norm) = blockenc::sparse_operator(h, plan, &mask, options.normalization)?;
            apply_poly_eigenbasis_dense(&encoded.dense()?, norm, t, degrees)
        }
        (SparseDrawMode::Correlated, QsvtBackend::Walk) => {
            let be = blockenc::sparse_block_encode(h, plan, options, rng)?;
            qsvt_simulate_degrees(&be, t, degrees)
        }
        (SparseDrawMode::PerPower, QsvtBackend::Walk) => per_power_walk(h, plan, t, degrees, options, rng),
        (SparseDrawMode::PerPower, QsvtBackend::Eigenbasis) => Err(Error::InvalidArgument(
            "per-power draws need the walk backend".into(),
        )),
    }
}

/// Fresh draw per walk step. Every draw is padded to `⌈log₂ L⌉` ancillas
/// and normalized by the original `λ` so the steps share one register and
/// one effective time.
fn per_power_walk<R: Rng + ?Sized>(
    h: &Hamiltonian,
    plan: &SparsePlan,
    t: f64,
    degrees: &[usize],
    options: SparseEncodingOptions,
    rng: &mut R,
) -> Result<Vec<CMatrix>> {
    if degrees.is_empty() {
        return Ok(Vec::new());
    }
    if degrees.contains(&0) {
        return Err(Error::InvalidArgument("degree must be >= 1".into()));
    }
    let lambda = h.one_norm()?;
    let a = linalg::ceil_log2(h.len());
    let n = 1usize << h.n_qubits();
    let dmax = *degrees.iter().max().unwrap();
    let coeffs = JacobiAngerSeries::new(lambda * t, dmax)?.coefficients();
    let mut x = linalg::identity(n << a).slice(s![.., ..n]).to_owned();
    let mut acc = CMatrix::zeros((n, n));
    let mut sums = std::collections::BTreeMap::new();
    for (k, c) in coeffs.iter().enumerate() {
        acc.scaled_add(*c, &x.slice(s![..n, ..]));
        if degrees.contains(&k) {
            sums.insert(k, acc.clone());
        }
        if k < dmax {
            let mask = blockenc::draw_survivors(h, plan, options.empty_draw, rng)?;
            let (encoded, _) = blockenc::sparse_operator(h, plan, &mask, SparseNormalization::Original)?;
            let be = blockenc::block_encode_padded(&encoded, a)?;
            x = walk_from_unitary(&be.w, n).dot(&x);
        }
    }
    Ok(degrees.iter().map(|d| sums[d].clone()).collect())
}
