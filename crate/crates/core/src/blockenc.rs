//! Dense LCU block-encodings.
//!
//! Index layout: the ancilla register is the most significant part of the
//! basis index, so the ancilla-zero subspace is the first `2^n` rows and
//! columns and the encoded block is the top-left corner of `W`.

use ndarray::{s, Array2};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dynamics::SparsePlan;
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, C64, ONE};
use crate::pauli::{Hamiltonian, DENSE_QUBIT_LIMIT};

/// Unitary `W` with `⟨0|W|0⟩ = H_eff / normalization`.
#[derive(Clone, Debug)]
pub struct BlockEncoding {
    pub w: CMatrix,
    pub n_qubits: usize,
    pub ancillas: usize,
    pub normalization: f64,
    /// The operator actually encoded, up to `normalization`.
    pub hamiltonian: Hamiltonian,
    /// Survivor mask of a stochastic encoding.
    pub draw: Option<Vec<bool>>,
}

impl BlockEncoding {
    pub fn system_dim(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.w.nrows()
    }

    /// Top-left `2^n × 2^n` block.
    pub fn block(&self) -> CMatrix {
        let n = self.system_dim();
        self.w.slice(s![..n, ..n]).to_owned()
    }

    /// Same metadata with a replacement unitary, e.g. a perturbed one.
    pub fn with_unitary(&self, w: CMatrix) -> Result<Self> {
        if w.dim() != self.w.dim() {
            let (r0, c0) = self.w.dim();
            let (r1, c1) = w.dim();
            return Err(Error::DimensionMismatch(r0, c0, r1, c1));
        }
        Ok(Self { w, ..self.clone() })
    }
}

/// Amplitudes `√(|c_j|/λ)`, zero-padded to `2^⌈log₂ L⌉`.
pub fn prepare_state(c: &[f64]) -> Result<Vec<f64>> {
    prepare_state_padded(c, linalg::ceil_log2(c.len()))
}

/// As [`prepare_state`] on a register of `a` qubits.
pub fn prepare_state_padded(c: &[f64], a: usize) -> Result<Vec<f64>> {
    if c.is_empty() {
        return Err(Error::EmptyHamiltonian);
    }
    let lambda: f64 = c.iter().map(|x| x.abs()).sum();
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidArgument("coefficients must be finite and not all zero".into()));
    }
    if c.len() > 1 << a {
        return Err(Error::InvalidArgument(format!("{} terms do not fit {a} ancilla qubits", c.len())));
    }
    let mut amps = vec![0.0; 1 << a];
    for (a, x) in amps.iter_mut().zip(c) {
        *a = (x.abs() / lambda).sqrt();
    }
    Ok(amps)
}

/// Householder reflection `I - 2uuᵀ` with `V e₀ = prepare_state(c)`.
pub fn prepare_unitary(c: &[f64]) -> Result<CMatrix> {
    prepare_unitary_padded(c, linalg::ceil_log2(c.len()))
}

pub fn prepare_unitary_padded(c: &[f64], a: usize) -> Result<CMatrix> {
    let v = prepare_state_padded(c, a)?;
    let dim = v.len();
    let mut u: Vec<f64> = v.iter().map(|x| -x).collect();
    u[0] += 1.0;
    let norm2: f64 = u.iter().map(|x| x * x).sum();
    if norm2 < 1e-30 {
        return Ok(linalg::identity(dim));
    }
    Ok(Array2::from_shape_fn((dim, dim), |(i, j)| {
        let delta = if i == j { 1.0 } else { 0.0 };
        C64::new(delta - 2.0 * u[i] * u[j] / norm2, 0.0)
    }))
}

/// `Σ_j |j⟩⟨j| ⊗ sign(c_j) P_j`, identity on padding blocks `j ≥ L`.
pub fn select_matrix(h: &Hamiltonian, a: usize) -> Result<CMatrix> {
    let n = h.n_qubits();
    if n + a > DENSE_QUBIT_LIMIT {
        return Err(Error::DenseLimit {
            n_qubits: n + a,
            limit: DENSE_QUBIT_LIMIT,
        });
    }
    let blocks = 1usize << a;
    if h.len() > blocks {
        return Err(Error::InvalidArgument(format!(
            "{} terms do not fit {a} ancilla qubits",
            h.len()
        )));
    }
    let sys = 1usize << n;
    let mut s = CMatrix::zeros((blocks * sys, blocks * sys));
    for (j, term) in h.terms().iter().enumerate() {
        let act = term.string.action();
        let sign = term.coefficient.signum();
        let off = j * sys;
        for col in 0..sys {
            let (row, entry) = act.column(col);
            s[[off + row, off + col]] = entry * sign;
        }
    }
    for j in h.len()..blocks {
        for d in 0..sys {
            s[[j * sys + d, j * sys + d]] = ONE;
        }
    }
    Ok(s)
}

/// `(V ⊗ I) X` for `V` acting on the most significant register.
fn kron_left(v: &CMatrix, x: &CMatrix) -> CMatrix {
    let blocks = v.nrows();
    let (rows, cols) = x.dim();
    let sys = rows / blocks;
    let folded = x
        .as_standard_layout()
        .into_owned()
        .into_shape_with_order((blocks, sys * cols))
        .expect("contiguous reshape");
    v.dot(&folded)
        .into_shape_with_order((rows, cols))
        .expect("contiguous reshape")
}

/// `(V₁† ⊗ I) S (V₂ ⊗ I)`.
pub fn assemble_lcu(v_left: &CMatrix, s: &CMatrix, v_right: &CMatrix) -> Result<CMatrix> {
    let blocks = v_left.nrows();
    if v_right.dim() != (blocks, blocks) || v_left.ncols() != blocks || s.nrows() % blocks != 0 || s.nrows() != s.ncols() {
        let (r0, c0) = s.dim();
        return Err(Error::DimensionMismatch(r0, c0, blocks, blocks));
    }
    // S (V ⊗ I) = ((Vᵀ ⊗ I) Sᵀ)ᵀ
    let right = kron_left(&v_right.t().to_owned(), &s.t().to_owned()).reversed_axes();
    Ok(kron_left(&linalg::dagger(v_left), &right))
}

pub fn block_encode(h: &Hamiltonian) -> Result<BlockEncoding> {
    block_encode_padded(h, linalg::ceil_log2(h.len()))
}

/// Block-encoding on an ancilla register of `a ≥ ⌈log₂ L⌉` qubits.
pub fn block_encode_padded(h: &Hamiltonian, a: usize) -> Result<BlockEncoding> {
    let lambda = h.one_norm()?;
    let v = prepare_unitary_padded(&h.coefficients(), a)?;
    let s = select_matrix(h, a)?;
    Ok(BlockEncoding {
        w: assemble_lcu(&v, &s, &v)?,
        n_qubits: h.n_qubits(),
        ancillas: a,
        normalization: lambda,
        hamiltonian: h.clone(),
        draw: None,
    })
}

/// Random Hermitian matrix with unit spectral norm.
pub fn random_hermitian<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Result<(ndarray::Array1<f64>, CMatrix)> {
    let g = Array2::from_shape_simple_fn((dim, dim), || {
        C64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal))
    });
    let k = (&g + &linalg::dagger(&g)).mapv(|z| z * 0.5);
    let (vals, vecs) = linalg::eigh_checked(&k, 1e-9)?;
    let scale = vals.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    Ok((vals.mapv(|x| x / scale), vecs))
}

/// `U e^{iδK}` with `‖U - Ũ‖ = ε`.
///
/// `‖I - e^{iδK}‖ = 2 sin(δ/2)` for unit-norm `K` and `δ ≤ π`, so `δ` is
/// obtained in closed form rather than by a search.
pub fn perturb_unitary<R: Rng + ?Sized>(u: &CMatrix, eps: f64, rng: &mut R) -> Result<CMatrix> {
    if !(0.0..=2.0).contains(&eps) {
        return Err(Error::OutOfRange(format!("perturbation size {eps} outside [0, 2]")));
    }
    if eps == 0.0 {
        return Ok(u.clone());
    }
    if eps == 2.0 {
        return Ok(u.mapv(|z| -z));
    }
    let delta = 2.0 * (eps / 2.0).asin();
    let (vals, vecs) = random_hermitian(u.ncols(), rng)?;
    let phase = linalg::spectral_apply(&vals, &vecs, |k| C64::from_polar(1.0, delta * k));
    Ok(u.dot(&phase))
}

/// `‖W - W̃‖`.
pub fn lcu_error(w: &CMatrix, w_tilde: &CMatrix) -> Result<f64> {
    if w.dim() != w_tilde.dim() {
        let (r0, c0) = w.dim();
        let (r1, c1) = w_tilde.dim();
        return Err(Error::DimensionMismatch(r0, c0, r1, c1));
    }
    linalg::spectral_norm(&(w - w_tilde))
}

/// Block-encoding with an imperfect Prepare `Ṽ` and the exact Select.
pub fn with_perturbed_prepare(h: &Hamiltonian, v_tilde: &CMatrix) -> Result<CMatrix> {
    let a = linalg::ceil_log2(h.len());
    assemble_lcu(v_tilde, &select_matrix(h, a)?, v_tilde)
}

/// Block-encoding with the exact Prepare and an imperfect Select `S̃`.
pub fn with_perturbed_select(h: &Hamiltonian, s_tilde: &CMatrix) -> Result<CMatrix> {
    let v = prepare_unitary(&h.coefficients())?;
    assemble_lcu(&v, s_tilde, &v)
}

/// Normalization used for a stochastic encoding.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SparseNormalization {
    /// Realized `λ̂ = Σ_survivors |c_j|/p_j`; the block is exactly `Ĥ/λ̂`.
    #[default]
    Realized,
    /// Original `λ`; the encoded operator is `Ĥ` rescaled to one-norm `λ`.
    Original,
}

/// What to do when every term is dropped.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmptyDraw {
    #[default]
    ForceLargest,
    Resample,
    Fail,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SparseEncodingOptions {
    pub normalization: SparseNormalization,
    pub empty_draw: EmptyDraw,
}

const MAX_RESAMPLES: usize = 10_000;

/// Draw a survivor mask, handling the all-dropped case.
pub fn draw_survivors<R: Rng + ?Sized>(
    h: &Hamiltonian,
    plan: &SparsePlan,
    empty: EmptyDraw,
    rng: &mut R,
) -> Result<Vec<bool>> {
    for _ in 0..MAX_RESAMPLES {
        let mut mask = plan.sample_mask(rng);
        if mask.iter().any(|&m| m) {
            return Ok(mask);
        }
        match empty {
            EmptyDraw::ForceLargest => {
                let j = h
                    .terms()
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.coefficient.abs().total_cmp(&b.1.coefficient.abs()).then(b.0.cmp(&a.0)))
                    .map(|(j, _)| j)
                    .ok_or(Error::EmptyHamiltonian)?;
                mask[j] = true;
                return Ok(mask);
            }
            EmptyDraw::Fail => return Err(Error::InvalidArgument("stochastic draw dropped every term".into())),
            EmptyDraw::Resample => {}
        }
    }
    Err(Error::InvalidArgument("stochastic draw kept dropping every term".into()))
}

/// The operator encoded by a stochastic draw and its normalization.
pub fn sparse_operator(
    h: &Hamiltonian,
    plan: &SparsePlan,
    mask: &[bool],
    normalization: SparseNormalization,
) -> Result<(Hamiltonian, f64)> {
    let est = plan.estimator(h, mask)?;
    let realized = est.one_norm()?;
    Ok(match normalization {
        SparseNormalization::Realized => (est, realized),
        SparseNormalization::Original => {
            let lambda = h.one_norm()?;
            (est.scaled(lambda / realized)?, lambda)
        }
    })
}

/// Block-encoding of one stochastic estimator `Ĥ`.
pub fn sparse_block_encode<R: Rng + ?Sized>(
    h: &Hamiltonian,
    plan: &SparsePlan,
    options: SparseEncodingOptions,
    rng: &mut R,
) -> Result<BlockEncoding> {
    if plan.len() != h.len() {
        return Err(Error::InvalidArgument("plan does not match the hamiltonian".into()));
    }
    let mask = draw_survivors(h, plan, options.empty_draw, rng)?;
    let (encoded, normalization) = sparse_operator(h, plan, &mask, options.normalization)?;
    let mut be = block_encode(&encoded)?;
    be.normalization = normalization;
    be.draw = Some(mask);
    Ok(be)
}

/// `‖M‖` of the top-left block minus `H/λ`; zero for an exact encoding.
pub fn block_deviation(be: &BlockEncoding) -> Result<f64> {
    let target = be.hamiltonian.dense()?.mapv(|z| z / be.normalization);
    Ok(linalg::max_abs_diff(&be.block(), &target))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{make_sparse_plan, SparsePlan};
    use crate::ensembles::{sample_hamiltonian, CoefficientDistribution, EnsembleSpec, WeightMode};
    use crate::linalg::{max_abs_diff, unitarity_error, ZERO};
    use crate::seeding::task_rng;

    fn pareto_instance(seed: u64, n: usize, l: usize) -> Hamiltonian {
        let spec = EnsembleSpec::new(n, l, n, WeightMode::UpToK, CoefficientDistribution::pareto(0.9).unwrap(), seed);
        sample_hamiltonian(&spec).unwrap()
    }

    /// Independent dense oracle `(V† ⊗ I) S (V ⊗ I)` via Kronecker products.
    fn kron_oracle(v: &CMatrix, s: &CMatrix, n: usize) -> CMatrix {
        let id = linalg::identity(1 << n);
        linalg::dagger(&linalg::kron(v, &id)).dot(s).dot(&linalg::kron(v, &id))
    }

    #[test]
    fn prepare_state_examples() {
        assert_eq!(prepare_state(&[1.0]).unwrap(), vec![1.0]);
        let half = prepare_state(&[0.5, 0.5]).unwrap();
        assert!((half[0] - 0.5f64.sqrt()).abs() < 1e-15 && (half[1] - 0.5f64.sqrt()).abs() < 1e-15);
        let v = prepare_state(&[0.6, -0.3, 0.1]).unwrap();
        assert_eq!(v.len(), 4);
        for (a, b) in v.iter().zip([0.6f64.sqrt(), 0.3f64.sqrt(), 0.1f64.sqrt(), 0.0]) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!((v.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(prepare_state(&[0.0, 0.0]).is_err());
        assert!(prepare_state(&[]).is_err());
    }

    #[test]
    fn prepare_unitary_first_column_and_unitarity() {
        for c in [vec![0.25; 4], vec![0.6, -0.3, 0.1], vec![1.0, 0.0], vec![0.1, 0.2, 0.3, 0.15, 0.25]] {
            let v = prepare_unitary(&c).unwrap();
            let target = prepare_state(&c).unwrap();
            for (i, t) in target.iter().enumerate() {
                assert!((v[[i, 0]] - C64::new(*t, 0.0)).norm() < 1e-14);
            }
            assert!(unitarity_error(&v) < 1e-12);
        }
        assert_eq!(prepare_unitary(&[1.0, 0.0]).unwrap(), linalg::identity(2));
    }

    #[test]
    fn select_examples() {
        let z = Hamiltonian::from_pairs(1, &[(1.0, "Z")]).unwrap();
        assert_eq!(select_matrix(&z, 0).unwrap(), z.dense().unwrap());

        let h = Hamiltonian::from_pairs(1, &[(0.6, "X"), (-0.4, "Z")]).unwrap();
        let s = select_matrix(&h, 1).unwrap();
        let x = PauliTermDense::x();
        assert_eq!(s.slice(s![..2, ..2]).to_owned(), x);
        assert_eq!(s.slice(s![2.., 2..]).to_owned(), PauliTermDense::z().mapv(|v| -v));
        assert!(s.slice(s![..2, 2..]).iter().all(|v| *v == ZERO));

        let padded = select_matrix(&h, 2).unwrap();
        assert_eq!(padded.slice(s![4.., 4..]).to_owned(), linalg::identity(4));
        assert!(select_matrix(&h, 0).is_err());
    }

    struct PauliTermDense;
    impl PauliTermDense {
        fn x() -> CMatrix {
            Hamiltonian::from_pairs(1, &[(1.0, "X")]).unwrap().dense().unwrap()
        }
        fn z() -> CMatrix {
            Hamiltonian::from_pairs(1, &[(1.0, "Z")]).unwrap().dense().unwrap()
        }
    }

    #[test]
    fn block_encode_examples() {
        let single = Hamiltonian::from_pairs(2, &[(-0.7, "XY")]).unwrap();
        let be = block_encode(&single).unwrap();
        assert_eq!(be.ancillas, 0);
        assert!(max_abs_diff(&be.block(), &single.dense().unwrap().mapv(|z| z / 0.7)) < 1e-15);

        let h = Hamiltonian::from_pairs(1, &[(0.6, "X"), (0.4, "Z")]).unwrap();
        let be = block_encode(&h).unwrap();
        let (vals, _) = linalg::eigh_checked(&be.block(), 1e-10).unwrap();
        let r = 0.52f64.sqrt();
        assert!((vals[0] + r).abs() < 1e-12 && (vals[1] - r).abs() < 1e-12);

        let h15 = pareto_instance(3, 4, 15);
        assert_eq!(block_encode(&h15).unwrap().ancillas, 4);
    }

    #[test]
    fn block_encode_matches_kron_oracle() {
        for seed in 0..5 {
            let h = pareto_instance(seed, 3, 6);
            let be = block_encode(&h).unwrap();
            let v = prepare_unitary(&h.coefficients()).unwrap();
            let s = select_matrix(&h, be.ancillas).unwrap();
            assert!(max_abs_diff(&be.w, &kron_oracle(&v, &s, 3)) < 1e-12);
            assert!(unitarity_error(&be.w) < 1e-10);
            assert!(block_deviation(&be).unwrap() < 1e-10);
            let block = be.block();
            assert!(linalg::hermitian_deviation(&block) < 1e-10);
            assert!(linalg::spectral_norm(&block).unwrap() <= 1.0 + 1e-10);
        }
    }

    #[test]
    fn perturbation_examples() {
        let h = pareto_instance(11, 3, 7);
        let v = prepare_unitary(&h.coefficients()).unwrap();
        let mut rng = task_rng(5, 0);
        assert_eq!(perturb_unitary(&v, 0.0, &mut rng).unwrap(), v);
        let flipped = perturb_unitary(&v, 2.0, &mut rng).unwrap();
        assert!((linalg::spectral_norm(&(&v - &flipped)).unwrap() - 2.0).abs() < 1e-12);
        for eps in [1e-4, 1e-2, 0.5] {
            let vt = perturb_unitary(&v, eps, &mut rng).unwrap();
            let measured = linalg::spectral_norm(&(&v - &vt)).unwrap();
            assert!((measured / eps - 1.0).abs() < 0.01, "{measured} vs {eps}");
            assert!(unitarity_error(&vt) < 1e-10);
        }
        assert!(perturb_unitary(&v, 2.5, &mut rng).is_err());
        assert!(perturb_unitary(&v, -0.1, &mut rng).is_err());
    }

    #[test]
    fn perturbation_bounds_hold() {
        let mut rng = task_rng(8, 0);
        for seed in 0..5 {
            let h = pareto_instance(seed, 3, 7);
            let be = block_encode(&h).unwrap();
            assert_eq!(lcu_error(&be.w, &be.w).unwrap(), 0.0);
            let v = prepare_unitary(&h.coefficients()).unwrap();
            let s = select_matrix(&h, be.ancillas).unwrap();
            for eps in [1e-4, 1e-3, 1e-2, 1e-1] {
                let wt = with_perturbed_prepare(&h, &perturb_unitary(&v, eps, &mut rng).unwrap()).unwrap();
                assert!(lcu_error(&be.w, &wt).unwrap() <= 2.0 * eps * (1.0 + 1e-9));
                let wt = with_perturbed_select(&h, &perturb_unitary(&s, eps, &mut rng).unwrap()).unwrap();
                assert!(lcu_error(&be.w, &wt).unwrap() <= eps * (1.0 + 1e-9));
            }
        }
        assert!(lcu_error(&linalg::identity(2), &linalg::identity(4)).is_err());
    }

    #[test]
    fn sparse_full_plan_is_dense_encoding() {
        let h = pareto_instance(2, 3, 6);
        let plan = SparsePlan::from_probabilities(&h, vec![1.0; 6]).unwrap();
        let be = sparse_block_encode(&h, &plan, SparseEncodingOptions::default(), &mut task_rng(1, 1)).unwrap();
        let dense = block_encode(&h).unwrap();
        assert!(max_abs_diff(&be.w, &dense.w) < 1e-12);
        assert!((be.normalization - dense.normalization).abs() < 1e-14);
        assert_eq!(be.draw, Some(vec![true; 6]));
    }

    #[test]
    fn sparse_encoding_is_unbiased() {
        let h = pareto_instance(4, 2, 8);
        let plan = make_sparse_plan(&h, 0.3).unwrap();
        let mut rng = task_rng(12, 0);
        let dense = h.dense().unwrap();
        let draws = 1000;
        let mut sum = CMatrix::zeros(dense.dim());
        let mut sum_sq = Array2::<f64>::zeros(dense.dim());
        let mut counts = Vec::new();
        for _ in 0..draws {
            let be = sparse_block_encode(&h, &plan, SparseEncodingOptions::default(), &mut rng).unwrap();
            counts.push(be.draw.as_ref().unwrap().iter().filter(|&&m| m).count() as f64);
            let est = be.block().mapv(|z| z * be.normalization);
            sum_sq = sum_sq + est.mapv(|z| z.norm_sqr());
            sum = sum + est;
        }
        let n = draws as f64;
        for ((s, sq), d) in sum.iter().zip(sum_sq.iter()).zip(dense.iter()) {
            let mean = s / n;
            let se = ((sq / n - mean.norm_sqr()).max(0.0) / n).sqrt();
            assert!((mean - d).norm() <= 3.5 * se + 1e-12);
        }
        let mean = counts.iter().sum::<f64>() / n;
        let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((mean - plan.mu).abs() <= 3.0 * (var / n).sqrt());
    }

    #[test]
    fn sparse_original_normalization_and_empty_draws() {
        let h = Hamiltonian::from_pairs(2, &[(0.5, "XI"), (0.3, "IZ"), (0.2, "YY")]).unwrap();
        let plan = SparsePlan::from_probabilities(&h, vec![0.3, 0.2, 0.1]).unwrap();
        let opts = SparseEncodingOptions {
            normalization: SparseNormalization::Original,
            empty_draw: EmptyDraw::ForceLargest,
        };
        let mut rng = task_rng(6, 0);
        for _ in 0..50 {
            let be = sparse_block_encode(&h, &plan, opts, &mut rng).unwrap();
            assert!((be.normalization - 1.0).abs() < 1e-15);
            assert!((be.hamiltonian.one_norm().unwrap() - 1.0).abs() < 1e-12);
            assert!(block_deviation(&be).unwrap() < 1e-10);
        }
        let never = SparsePlan::from_probabilities(&h, vec![1e-300, 1e-300, 1e-300]).unwrap();
        let mask = draw_survivors(&h, &never, EmptyDraw::ForceLargest, &mut rng).unwrap();
        assert_eq!(mask, vec![true, false, false]);
        assert!(draw_survivors(&h, &never, EmptyDraw::Fail, &mut rng).is_err());
    }
}
