//! Exact evolution, product formulas, qDRIFT and SparSto.
//!
//! All evolutions return dense unitaries on the system register. Products of
//! per-term exponentials are written left to right as in `Π_j e^{-i c_j H_j δt}`:
//! the first factor is the leftmost matrix.

use rand::Rng;
use rand_distr::{weighted::WeightedIndex, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, C64};
use crate::pauli::{Hamiltonian, PauliString, PauliTerm};

pub use crate::linalg::spectral_error;

/// Default constant `C` in the qDRIFT bound `C λ² t² / N`.
pub const QDRIFT_BOUND_CONSTANT: f64 = 2.0;

/// Tolerance on `H - H†` accepted by the eigensolver.
const HERMITIAN_TOL: f64 = 1e-10;

/// `e^{-iHt}` via Hermitian eigendecomposition.
pub fn exact_evolution(h: &Hamiltonian, t: f64) -> Result<CMatrix> {
    exact_evolution_dense(&h.dense()?, t)
}

pub fn exact_evolution_dense(h: &CMatrix, t: f64) -> Result<CMatrix> {
    let (vals, vecs) = linalg::eigh_checked(h, HERMITIAN_TOL)?;
    Ok(linalg::spectral_apply(&vals, &vecs, |e| C64::from_polar(1.0, -e * t)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
pub enum TrotterOrder {
    First,
    Second,
}

impl TrotterOrder {
    pub fn as_u8(self) -> u8 {
        match self {
            Self::First => 1,
            Self::Second => 2,
        }
    }
}

impl TryFrom<u8> for TrotterOrder {
    type Error = Error;

    fn try_from(p: u8) -> Result<Self> {
        match p {
            1 => Ok(Self::First),
            2 => Ok(Self::Second),
            _ => Err(Error::InvalidArgument(format!("product-formula order {p} not in {{1, 2}}"))),
        }
    }
}

/// `F_1 F_2 ⋯ F_m` with `F_i = exp(-i θ_i P_i)`.
pub fn product_of_exponentials<'a, I>(n_qubits: usize, factors: I) -> CMatrix
where
    I: IntoIterator<Item = (&'a PauliString, f64)>,
    I::IntoIter: DoubleEndedIterator,
{
    let mut u = linalg::identity(1 << n_qubits);
    apply_product_left(&mut u, factors);
    u
}

/// `u ← F_1 F_2 ⋯ F_m · u`.
pub fn apply_product_left<'a, I>(u: &mut CMatrix, factors: I)
where
    I: IntoIterator<Item = (&'a PauliString, f64)>,
    I::IntoIter: DoubleEndedIterator,
{
    for (p, theta) in factors.into_iter().rev() {
        p.apply_exp_left(u, theta);
    }
}

fn check_permutation(perm: &[usize], len: usize) -> Result<()> {
    let mut seen = vec![false; len];
    if perm.len() != len {
        return Err(Error::InvalidArgument(format!(
            "permutation has {} entries for {len} terms",
            perm.len()
        )));
    }
    for &i in perm {
        if i >= len || std::mem::replace(&mut seen[i], true) {
            return Err(Error::InvalidArgument("term order is not a permutation".into()));
        }
    }
    Ok(())
}

/// One product-formula step of size `dt`. `order` defaults to insertion order.
pub fn trotter_step(
    h: &Hamiltonian,
    dt: f64,
    p: TrotterOrder,
    order: Option<&[usize]>,
) -> Result<CMatrix> {
    if h.n_qubits() > crate::pauli::DENSE_QUBIT_LIMIT {
        return Err(Error::DenseLimit {
            n_qubits: h.n_qubits(),
            limit: crate::pauli::DENSE_QUBIT_LIMIT,
        });
    }
    let terms = h.terms();
    let idx: Vec<usize> = match order {
        Some(perm) => {
            check_permutation(perm, terms.len())?;
            perm.to_vec()
        }
        None => (0..terms.len()).collect(),
    };
    let factor = |i: &usize, scale: f64| (&terms[*i].string, terms[*i].coefficient * dt * scale);
    Ok(match p {
        TrotterOrder::First => product_of_exponentials(h.n_qubits(), idx.iter().map(|i| factor(i, 1.0))),
        TrotterOrder::Second => {
            let forward = idx.iter().map(|i| factor(i, 0.5));
            let backward = idx.iter().rev().map(|i| factor(i, 0.5));
            let seq: Vec<_> = forward.chain(backward).collect();
            product_of_exponentials(h.n_qubits(), seq)
        }
    })
}

/// `S_p(t/r)^r`.
pub fn trotter_evolution(h: &Hamiltonian, t: f64, r: usize, p: TrotterOrder) -> Result<CMatrix> {
    if r == 0 {
        return Err(Error::InvalidArgument("step count r must be >= 1".into()));
    }
    let step = trotter_step(h, t / r as f64, p, None)?;
    Ok(linalg::mat_pow(&step, r))
}

/// One qDRIFT realization.
#[derive(Clone, Debug)]
pub struct QdriftSample {
    pub unitary: CMatrix,
    /// Sampled term indices `j_1, …, j_N` in product order.
    pub indices: Vec<usize>,
}

/// Sampler for term indices with probabilities `|c_j| / λ`.
pub fn qdrift_sampler(h: &Hamiltonian) -> Result<WeightedIndex<f64>> {
    if h.is_empty() {
        return Err(Error::EmptyHamiltonian);
    }
    WeightedIndex::new(h.terms().iter().map(|t| t.coefficient.abs()))
        .map_err(|e| Error::InvalidArgument(format!("qdrift weights: {e}")))
}

/// Product of `n` factors `exp(-i sign(c_j) λ H_j t/n)` with `j ~ |c_j|/λ`.
pub fn qdrift_evolution<R: Rng + ?Sized>(
    h: &Hamiltonian,
    t: f64,
    n: usize,
    rng: &mut R,
) -> Result<QdriftSample> {
    if n == 0 {
        return Err(Error::InvalidArgument("sample count N must be >= 1".into()));
    }
    let lambda = h.one_norm()?;
    let sampler = qdrift_sampler(h)?;
    let indices: Vec<usize> = (0..n).map(|_| sampler.sample(rng)).collect();
    let theta = lambda * t / n as f64;
    let terms = h.terms();
    let unitary = product_of_exponentials(
        h.n_qubits(),
        indices
            .iter()
            .map(|&j| (&terms[j].string, terms[j].coefficient.signum() * theta)),
    );
    Ok(QdriftSample { unitary, indices })
}

/// `C λ² t² / N`.
pub fn qdrift_bound(lambda: f64, t: f64, n: usize, constant: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidArgument("sample count N must be >= 1".into()));
    }
    Ok(constant * lambda * lambda * t * t / n as f64)
}

/// Sampling probabilities and derived quantities of a SparSto estimator
/// `Ĥ = Σ_j (c_j/p_j) H_j ξ_j`, `ξ_j ~ Bernoulli(p_j)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SparsePlan {
    pub probabilities: Vec<f64>,
    /// Indices kept with probability one by construction.
    pub deterministic: Vec<usize>,
    pub tau: f64,
    /// Scale of `p_j = α|c_j|` outside the deterministic set; infinite when
    /// every term is deterministic.
    pub alpha: f64,
    /// Expected number of surviving terms `Σ p_j`.
    pub mu: f64,
    /// `u_j = (1/p_j - 1) c_j²`.
    pub u: Vec<f64>,
}

impl SparsePlan {
    /// Plan from explicit probabilities in `(0, 1]`.
    pub fn from_probabilities(h: &Hamiltonian, probabilities: Vec<f64>) -> Result<Self> {
        if h.is_empty() {
            return Err(Error::EmptyHamiltonian);
        }
        if probabilities.len() != h.len() {
            return Err(Error::InvalidArgument(format!(
                "{} probabilities for {} terms",
                probabilities.len(),
                h.len()
            )));
        }
        if let Some(p) = probabilities.iter().find(|p| !(**p > 0.0 && **p <= 1.0)) {
            return Err(Error::InvalidArgument(format!("probability {p} outside (0, 1]")));
        }
        let deterministic = (0..h.len()).filter(|&j| probabilities[j] == 1.0).collect();
        Ok(Self::assemble(h, probabilities, deterministic, f64::NAN, f64::NAN))
    }

    fn assemble(h: &Hamiltonian, probabilities: Vec<f64>, deterministic: Vec<usize>, tau: f64, alpha: f64) -> Self {
        let mu = probabilities.iter().sum();
        let u = h
            .terms()
            .iter()
            .zip(&probabilities)
            .map(|(t, &p)| if p == 1.0 { 0.0 } else { (1.0 / p - 1.0) * t.coefficient * t.coefficient })
            .collect();
        Self {
            probabilities,
            deterministic,
            tau,
            alpha,
            mu,
            u,
        }
    }

    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }

    /// `‖u‖₁ = Σ_j c_j² (1/p_j - 1)`.
    pub fn variance_proxy(&self) -> f64 {
        self.u.iter().sum()
    }

    /// Independent Bernoulli draws `ξ_j`.
    pub fn sample_mask<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<bool> {
        self.probabilities
            .iter()
            .map(|&p| p >= 1.0 || rng.random::<f64>() < p)
            .collect()
    }

    /// Scalar `Σ_j (c_j/p_j) ξ_j` for one draw.
    pub fn estimator_scalar(&self, h: &Hamiltonian, mask: &[bool]) -> f64 {
        h.terms()
            .iter()
            .zip(&self.probabilities)
            .zip(mask)
            .filter(|(_, &keep)| keep)
            .map(|((t, &p), _)| t.coefficient / p)
            .sum()
    }

    /// The reweighted Hamiltonian `Ĥ` over the surviving terms of `mask`.
    pub fn estimator(&self, h: &Hamiltonian, mask: &[bool]) -> Result<Hamiltonian> {
        let terms = h
            .terms()
            .iter()
            .zip(&self.probabilities)
            .zip(mask)
            .filter(|(_, &keep)| keep)
            .map(|((t, &p), _)| PauliTerm::new(t.coefficient / p, t.string))
            .collect::<Result<Vec<_>>>()?;
        Hamiltonian::new(h.n_qubits(), terms)
    }
}

/// Deterministic set by greedy one-norm budget `τλ`, the rest sampled with
/// `p_j = min(1, α|c_j|)` at the largest admissible `α = 1/max_{j∉A}|c_j|`.
pub fn make_sparse_plan(h: &Hamiltonian, tau: f64) -> Result<SparsePlan> {
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(Error::InvalidArgument(format!("threshold τ = {tau} outside (0, 1]")));
    }
    let lambda = h.one_norm()?;
    let mags: Vec<f64> = h.terms().iter().map(|t| t.coefficient.abs()).collect();
    let mut order: Vec<usize> = (0..mags.len()).collect();
    // Descending magnitude; the stable sort keeps index order on ties.
    order.sort_by(|&a, &b| mags[b].total_cmp(&mags[a]));

    let budget = tau * lambda * (1.0 + 1e-12);
    let mut in_a = vec![false; mags.len()];
    let mut acc = 0.0;
    let mut deterministic = Vec::new();
    for &j in &order {
        if acc + mags[j] > budget {
            break;
        }
        acc += mags[j];
        in_a[j] = true;
        deterministic.push(j);
    }
    deterministic.sort_unstable();

    let rest_max = (0..mags.len()).filter(|&j| !in_a[j]).map(|j| mags[j]).fold(0.0, f64::max);
    let alpha = if rest_max > 0.0 { 1.0 / rest_max } else { f64::INFINITY };
    let probabilities = (0..mags.len())
        .map(|j| if in_a[j] { 1.0 } else { (mags[j] / rest_max).min(1.0) })
        .collect();
    Ok(SparsePlan::assemble(h, probabilities, deterministic, tau, alpha))
}

/// `r` slices, each a first-order product over a fresh draw of `Ĥ`.
pub fn sparsto_evolution<R: Rng + ?Sized>(
    h: &Hamiltonian,
    t: f64,
    r: usize,
    plan: &SparsePlan,
    rng: &mut R,
) -> Result<CMatrix> {
    if r == 0 {
        return Err(Error::InvalidArgument("step count r must be >= 1".into()));
    }
    if plan.len() != h.len() {
        return Err(Error::InvalidArgument("plan does not match the hamiltonian".into()));
    }
    let dt = t / r as f64;
    let terms = h.terms();
    let mut u = linalg::identity(1 << h.n_qubits());
    for _ in 0..r {
        let mask = plan.sample_mask(rng);
        let factors: Vec<(&PauliString, f64)> = terms
            .iter()
            .zip(&plan.probabilities)
            .zip(&mask)
            .filter(|(_, &keep)| keep)
            .map(|((term, &p), _)| (&term.string, term.coefficient / p * dt))
            .collect();
        apply_product_left(&mut u, factors);
    }
    Ok(u)
}

/// Leading term `2 t² μ ‖u‖₁ / G` of the SparSto diamond-norm bound.
pub fn sparsto_bound_leading(t: f64, mu: f64, gates: f64, u: &[f64]) -> Result<f64> {
    if gates < 1.0 {
        return Err(Error::InvalidArgument(format!("gate budget G = {gates} must be >= 1")));
    }
    let u1: f64 = u.iter().sum();
    Ok(2.0 * t * t * mu * u1 / gates)
}

/// Leading term plus a caller-supplied higher-order contribution `K(t, μ, G)`.
pub fn sparsto_bound<K>(t: f64, mu: f64, gates: f64, u: &[f64], higher_order: K) -> Result<f64>
where
    K: Fn(f64, f64, f64) -> f64,
{
    Ok(sparsto_bound_leading(t, mu, gates, u)? + higher_order(t, mu, gates))
}

/// Gate budget `G = r μ`: total expected exponentials over `r` slices.
pub fn sparsto_gate_budget(r: usize, mu: f64) -> f64 {
    r as f64 * mu
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{max_abs_diff, unitarity_error, I, ONE};
    use crate::seeding::task_rng;
    use ndarray::Array2;
    use std::f64::consts::PI;

    fn two_term() -> Hamiltonian {
        Hamiltonian::from_pairs(1, &[(0.6, "X"), (0.4, "Z")]).unwrap()
    }

    fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
        let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
        let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
        let n = lx.len() as f64;
        let mx = lx.iter().sum::<f64>() / n;
        let my = ly.iter().sum::<f64>() / n;
        let cov: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
        let var: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
        cov / var
    }

    #[test]
    fn exact_evolution_examples() {
        let h = two_term();
        let u0 = exact_evolution(&h, 0.0).unwrap();
        assert!(max_abs_diff(&u0, &linalg::identity(2)) < 1e-14);

        let hz = Hamiltonian::from_pairs(1, &[(0.5, "Z")]).unwrap();
        let u = exact_evolution(&hz, PI).unwrap();
        assert!((u[[0, 0]] - C64::from_polar(1.0, -PI / 2.0)).norm() < 1e-12);
        assert!((u[[1, 1]] - C64::from_polar(1.0, PI / 2.0)).norm() < 1e-12);
        assert!(u[[0, 1]].norm() < 1e-12);

        let u = exact_evolution(&h, 1.3).unwrap();
        assert!(unitarity_error(&u) < 1e-10);
        let (evals, _) = linalg::eigh_checked(&h.dense().unwrap(), 1e-12).unwrap();
        let mut phases: Vec<f64> = linalg::eigh_checked(&(&u + &linalg::dagger(&u)).mapv(|z| z * 0.5), 1e-10)
            .unwrap()
            .0
            .to_vec();
        phases.sort_by(f64::total_cmp);
        let mut expected: Vec<f64> = evals.iter().map(|e| (e * 1.3).cos()).collect();
        expected.sort_by(f64::total_cmp);
        for (a, b) in phases.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn exact_evolution_rejects_non_hermitian() {
        let mut m = Array2::zeros((2, 2));
        m[[0, 1]] = ONE;
        assert!(matches!(exact_evolution_dense(&m, 1.0), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn commuting_terms_are_exact() {
        let h = Hamiltonian::from_pairs(3, &[(0.3, "ZZI"), (-0.5, "IZZ"), (0.2, "ZIZ")]).unwrap();
        let exact = exact_evolution(&h, 0.7).unwrap();
        for p in [TrotterOrder::First, TrotterOrder::Second] {
            let step = trotter_step(&h, 0.7, p, None).unwrap();
            assert!(max_abs_diff(&step, &exact) < 1e-10);
            for r in [1, 3, 8] {
                let u = trotter_evolution(&h, 0.7, r, p).unwrap();
                assert!(spectral_error(&u, &exact).unwrap() < 1e-10);
            }
        }
    }

    #[test]
    fn single_term_step_is_exact_exponential() {
        let h = Hamiltonian::from_pairs(2, &[(0.7, "XY")]).unwrap();
        let p = h.dense().unwrap().mapv(|z| z / 0.7);
        let expected = linalg::identity(4).mapv(|z| z * (0.7f64 * 0.2).cos()) - p.mapv(|z| z * I * (0.7f64 * 0.2).sin());
        for order in [TrotterOrder::First, TrotterOrder::Second] {
            assert!(max_abs_diff(&trotter_step(&h, 0.2, order, None).unwrap(), &expected) < 1e-14);
        }
    }

    #[test]
    fn trotter_step_local_error_order() {
        let h = two_term();
        for (p, order) in [(1, TrotterOrder::First), (2, TrotterOrder::Second)] {
            let err = |dt: f64| {
                spectral_error(&trotter_step(&h, dt, order, None).unwrap(), &exact_evolution(&h, dt).unwrap()).unwrap()
            };
            let ratio = err(0.1) / err(0.05);
            let expected = 2f64.powi(p + 1);
            assert!((ratio / expected - 1.0).abs() < 0.15, "p={p}: ratio {ratio}");
        }
    }

    #[test]
    fn trotter_global_error_slope() {
        let h = Hamiltonian::from_pairs(2, &[(0.4, "XZ"), (-0.35, "YI"), (0.25, "ZY")]).unwrap();
        let exact = exact_evolution(&h, 1.0).unwrap();
        let rs = [10usize, 20, 40, 100];
        for (p, order) in [(1.0, TrotterOrder::First), (2.0, TrotterOrder::Second)] {
            let errs: Vec<f64> = rs
                .iter()
                .map(|&r| spectral_error(&trotter_evolution(&h, 1.0, r, order).unwrap(), &exact).unwrap())
                .collect();
            let xs: Vec<f64> = rs.iter().map(|&r| r as f64).collect();
            let slope = loglog_slope(&xs, &errs);
            assert!((slope + p).abs() < 0.15, "p={p}: slope {slope}");
        }
        let one = trotter_evolution(&h, 0.3, 1, TrotterOrder::Second).unwrap();
        assert!(max_abs_diff(&one, &trotter_step(&h, 0.3, TrotterOrder::Second, None).unwrap()) < 1e-15);
    }

    #[test]
    fn explicit_term_order() {
        let h = two_term();
        let fwd = trotter_step(&h, 0.3, TrotterOrder::First, Some(&[0, 1])).unwrap();
        let rev = trotter_step(&h, 0.3, TrotterOrder::First, Some(&[1, 0])).unwrap();
        assert!(max_abs_diff(&fwd, &trotter_step(&h, 0.3, TrotterOrder::First, None).unwrap()) < 1e-15);
        assert!(max_abs_diff(&fwd, &rev) > 1e-3);
        assert!(trotter_step(&h, 0.3, TrotterOrder::First, Some(&[0, 0])).is_err());
        assert!(TrotterOrder::try_from(3).is_err());
        assert!(trotter_evolution(&h, 1.0, 0, TrotterOrder::First).is_err());
    }

    #[test]
    fn qdrift_single_term_is_exact() {
        let h = Hamiltonian::from_pairs(2, &[(-0.8, "ZX")]).unwrap();
        let exact = exact_evolution(&h, 1.5).unwrap();
        let mut rng = task_rng(1, 0);
        for n in [1, 7, 50] {
            let s = qdrift_evolution(&h, 1.5, n, &mut rng).unwrap();
            assert!(max_abs_diff(&s.unitary, &exact) < 1e-12);
        }
    }

    #[test]
    fn qdrift_is_seed_reproducible_and_unitary() {
        let h = Hamiltonian::from_pairs(2, &[(0.5, "ZX"), (0.3, "YY"), (-0.2, "IZ")]).unwrap();
        let a = qdrift_evolution(&h, 1.0, 200, &mut task_rng(9, 2)).unwrap();
        let b = qdrift_evolution(&h, 1.0, 200, &mut task_rng(9, 2)).unwrap();
        assert_eq!(a.indices, b.indices);
        assert_eq!(a.unitary, b.unitary);
        assert!(unitarity_error(&a.unitary) < 1e-8);
        assert!(qdrift_evolution(&h, 1.0, 0, &mut task_rng(9, 2)).is_err());
    }

    #[test]
    fn qdrift_channel_average_is_first_order_accurate() {
        let h = Hamiltonian::from_pairs(3, &[(0.45, "XZI"), (-0.3, "IYY"), (0.15, "ZZZ"), (0.1, "XII")]).unwrap();
        let lambda = h.one_norm().unwrap();
        let n_steps = 100usize;
        let t = 1e-2 * n_steps as f64 / lambda;
        let mut rng = task_rng(17, 0);
        let mut psi = Array2::zeros((8, 1));
        for r in 0..8 {
            psi[[r, 0]] = C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
        }
        let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        psi.mapv_inplace(|z| z / norm);

        let draws = 4000;
        let mut avg = Array2::zeros((8, 1));
        for _ in 0..draws {
            let s = qdrift_evolution(&h, t / n_steps as f64 * 1.0, 1, &mut rng).unwrap();
            avg = avg + s.unitary.dot(&psi);
        }
        avg.mapv_inplace(|z| z / draws as f64);
        let theta = lambda * t / n_steps as f64;
        let first_order = &psi - &h.dense().unwrap().dot(&psi).mapv(|z| z * I * theta / lambda);
        assert!(max_abs_diff(&avg, &first_order) < 1e-3);
    }

    #[test]
    fn qdrift_bound_examples() {
        assert!((qdrift_bound(1.0, 1.0, 100, QDRIFT_BOUND_CONSTANT).unwrap() - 0.02).abs() < 1e-15);
        let b1 = qdrift_bound(1.0, 1.0, 1000, 2.0).unwrap();
        let b2 = qdrift_bound(1.0, 2.0, 1000, 2.0).unwrap();
        assert!((b2 / b1 - 4.0).abs() < 1e-12);
        assert!(qdrift_bound(1.0, 1.0, usize::MAX, 2.0).unwrap() < 1e-15);
        assert!(qdrift_bound(1.0, 1.0, 0, 2.0).is_err());
    }

    #[test]
    fn sparse_plan_hand_example() {
        let h = Hamiltonian::from_pairs(2, &[(0.5, "XI"), (-0.3, "IZ"), (0.2, "YY")]).unwrap();
        let plan = make_sparse_plan(&h, 0.5).unwrap();
        assert_eq!(plan.deterministic, vec![0]);
        assert!((plan.alpha - 1.0 / 0.3).abs() < 1e-12);
        assert_eq!(plan.probabilities[0], 1.0);
        assert_eq!(plan.probabilities[1], 1.0);
        assert!((plan.probabilities[2] - 2.0 / 3.0).abs() < 1e-15);
        assert!((plan.mu - 8.0 / 3.0).abs() < 1e-14);
        assert_eq!(plan.u[0], 0.0);
        assert_eq!(plan.u[1], 0.0);
        assert!((plan.u[2] - 0.5 * 0.04).abs() < 1e-15);
    }

    #[test]
    fn sparse_plan_full_threshold_is_deterministic() {
        let h = Hamiltonian::from_pairs(2, &[(0.5, "XI"), (-0.3, "IZ"), (0.2, "YY")]).unwrap();
        let plan = make_sparse_plan(&h, 1.0).unwrap();
        assert_eq!(plan.deterministic, vec![0, 1, 2]);
        assert!(plan.probabilities.iter().all(|&p| p == 1.0));
        assert_eq!(plan.mu, 3.0);
        assert_eq!(plan.variance_proxy(), 0.0);
        assert!(make_sparse_plan(&h, 0.0).is_err());
        assert!(make_sparse_plan(&h, 1.5).is_err());
        assert!(make_sparse_plan(&Hamiltonian::new(1, vec![]).unwrap(), 0.5).is_err());
    }

    #[test]
    fn sparse_plan_ties_break_by_index() {
        let h = Hamiltonian::from_pairs(2, &[(0.25, "XI"), (0.25, "IZ"), (0.25, "YY"), (0.25, "ZZ")]).unwrap();
        let plan = make_sparse_plan(&h, 0.5).unwrap();
        assert_eq!(plan.deterministic, vec![0, 1]);
    }

    #[test]
    fn sparsto_deterministic_limit_matches_trotter() {
        let h = Hamiltonian::from_pairs(2, &[(0.4, "XZ"), (-0.35, "YI"), (0.25, "ZY")]).unwrap();
        let plan = make_sparse_plan(&h, 1.0).unwrap();
        let u = sparsto_evolution(&h, 1.2, 5, &plan, &mut task_rng(3, 0)).unwrap();
        let v = trotter_evolution(&h, 1.2, 5, TrotterOrder::First).unwrap();
        assert!(max_abs_diff(&u, &v) < 1e-12);
    }

    #[test]
    fn sparsto_estimator_statistics() {
        let h = Hamiltonian::from_pairs(
            2,
            &[(0.35, "XZ"), (-0.25, "YI"), (0.2, "ZY"), (0.12, "XX"), (-0.08, "IZ")],
        )
        .unwrap();
        let plan = make_sparse_plan(&h, 0.4).unwrap();
        let dense = h.dense().unwrap();
        let mut rng = task_rng(21, 0);
        let draws = 4000usize;
        let mut sum = Array2::<C64>::zeros(dense.dim());
        let mut sum_sq = Array2::<f64>::zeros(dense.dim());
        let mut counts = Vec::with_capacity(draws);
        for _ in 0..draws {
            let mask = plan.sample_mask(&mut rng);
            counts.push(mask.iter().filter(|&&m| m).count() as f64);
            let est = plan.estimator(&h, &mask).unwrap().dense().unwrap();
            sum_sq = sum_sq + est.mapv(|z| z.norm_sqr());
            sum = sum + est;
        }
        let n = draws as f64;
        for ((s, sq), d) in sum.iter().zip(sum_sq.iter()).zip(dense.iter()) {
            let mean = s / n;
            let var = (sq / n - mean.norm_sqr()).max(0.0);
            let se = (var / n).sqrt();
            assert!((mean - d).norm() <= 3.0 * se + 1e-12, "{mean} vs {d} (se {se})");
        }
        let mean_count = counts.iter().sum::<f64>() / n;
        let var_count = counts.iter().map(|c| (c - mean_count).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((mean_count - plan.mu).abs() <= 3.0 * (var_count / n).sqrt());
    }

    #[test]
    fn sparsto_is_unitary() {
        let h = Hamiltonian::from_pairs(2, &[(0.4, "XZ"), (-0.35, "YI"), (0.25, "ZY")]).unwrap();
        let plan = make_sparse_plan(&h, 0.3).unwrap();
        let u = sparsto_evolution(&h, 3.0, 40, &plan, &mut task_rng(4, 4)).unwrap();
        assert!(unitarity_error(&u) < 1e-8);
        assert!(sparsto_evolution(&h, 3.0, 0, &plan, &mut task_rng(4, 4)).is_err());
    }

    #[test]
    fn sparsto_bound_examples() {
        assert_eq!(sparsto_bound_leading(1.0, 2.0, 100.0, &[0.0, 0.0]).unwrap(), 0.0);
        let b = sparsto_bound_leading(1.0, 2.0, 100.0, &[0.004, 0.006]).unwrap();
        assert!((b - 4e-4).abs() < 1e-16);
        let b2 = sparsto_bound_leading(1.0, 2.0, 200.0, &[0.004, 0.006]).unwrap();
        assert!((b / b2 - 2.0).abs() < 1e-12);
        assert!(sparsto_bound_leading(1.0, 2.0, 0.5, &[0.1]).is_err());
        let with_k = sparsto_bound(1.0, 2.0, 100.0, &[0.01], |_, _, _| 1e-5).unwrap();
        assert!((with_k - 4.1e-4).abs() < 1e-16);
        assert_eq!(sparsto_gate_budget(10, 2.5), 25.0);
    }
}
