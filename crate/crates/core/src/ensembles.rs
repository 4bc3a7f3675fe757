//! Random Pauli-sum Hamiltonian ensembles with heavy-tailed coefficients,
//! and maximum-likelihood fits of coefficient-magnitude distributions.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::pauli::{Hamiltonian, PauliString, PauliTerm, MAX_QUBITS};

/// Fitted Pareto-II shapes above this are reported as an overflow.
pub const PARETO_SHAPE_CAP: f64 = 1e6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CoefficientDistribution {
    /// `log x ~ N(mu_log, sigma2)`.
    LogNormal { mu_log: f64, sigma2: f64 },
    /// Lomax density `a (1 + x)^{-(a+1)}` on `x >= 0`.
    ParetoII { a: f64 },
}

impl CoefficientDistribution {
    pub fn lognormal(sigma2: f64) -> Result<Self> {
        let d = Self::LogNormal { mu_log: 0.0, sigma2 };
        d.validate()?;
        Ok(d)
    }

    pub fn pareto(a: f64) -> Result<Self> {
        let d = Self::ParetoII { a };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::LogNormal { mu_log, sigma2 } => {
                if !(sigma2 > 0.0 && sigma2.is_finite() && mu_log.is_finite()) {
                    return Err(Error::InvalidArgument(format!(
                        "lognormal needs finite mu_log and sigma2 > 0, got ({mu_log}, {sigma2})"
                    )));
                }
            }
            Self::ParetoII { a } => {
                if !(a > 0.0 && a.is_finite()) {
                    return Err(Error::InvalidArgument(format!("pareto shape {a} must be > 0")));
                }
            }
        }
        Ok(())
    }

    /// One positive draw. Pareto-II uses the inverse CDF `(1-u)^{-1/a} - 1`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Self::LogNormal { mu_log, sigma2 } => {
                let z: f64 = rng.sample(StandardNormal);
                (mu_log + sigma2.sqrt() * z).exp()
            }
            Self::ParetoII { a } => {
                let u: f64 = rng.random();
                (1.0 - u).powf(-1.0 / a) - 1.0
            }
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        match *self {
            Self::LogNormal { mu_log, sigma2 } => {
                if x <= 0.0 {
                    return 0.0;
                }
                let d = x.ln() - mu_log;
                (-d * d / (2.0 * sigma2)).exp() / (x * (2.0 * std::f64::consts::PI * sigma2).sqrt())
            }
            Self::ParetoII { a } => {
                if x < 0.0 {
                    0.0
                } else {
                    a * (1.0 + x).powf(-(a + 1.0))
                }
            }
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            Self::LogNormal { mu_log, sigma2 } => {
                if x <= 0.0 {
                    return 0.0;
                }
                0.5 * erfc(-(x.ln() - mu_log) / (2.0 * sigma2).sqrt())
            }
            Self::ParetoII { a } => {
                if x <= 0.0 {
                    0.0
                } else {
                    1.0 - (1.0 + x).powf(-a)
                }
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightMode {
    /// Strings of weight 1..=k.
    UpToK,
    /// Strings of weight exactly k.
    ExactlyK,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleSpec {
    pub n_qubits: usize,
    pub n_terms: usize,
    pub k: usize,
    pub mode: WeightMode,
    pub dist: CoefficientDistribution,
    pub seed: u64,
    /// Attach an independent uniform ±1 sign to each coefficient.
    pub random_signs: bool,
}

impl EnsembleSpec {
    pub fn new(
        n_qubits: usize,
        n_terms: usize,
        k: usize,
        mode: WeightMode,
        dist: CoefficientDistribution,
        seed: u64,
    ) -> Self {
        Self {
            n_qubits,
            n_terms,
            k,
            mode,
            dist,
            seed,
            random_signs: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_qubits == 0 || self.n_qubits > MAX_QUBITS {
            return Err(Error::InvalidArgument(format!(
                "qubit count {} outside 1..={MAX_QUBITS}",
                self.n_qubits
            )));
        }
        if self.n_terms == 0 {
            return Err(Error::InvalidArgument("ensemble needs at least one term".into()));
        }
        self.dist.validate()?;
        let max = max_terms(self.n_qubits, self.k, self.mode)?;
        if self.n_terms as u128 > max {
            return Err(Error::InvalidArgument(format!(
                "{} terms requested but only {max} distinct strings exist",
                self.n_terms
            )));
        }
        Ok(())
    }
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// Number of distinct admissible strings.
pub fn max_terms(n_qubits: usize, k: usize, mode: WeightMode) -> Result<u128> {
    if k == 0 || k > n_qubits {
        return Err(Error::InvalidArgument(format!(
            "weight bound k = {k} must lie in 1..={n_qubits}"
        )));
    }
    let count = |j: usize| binomial(n_qubits, j).saturating_mul(3u128.saturating_pow(j as u32));
    Ok(match mode {
        WeightMode::UpToK => (1..=k).map(count).fold(0u128, |a, b| a.saturating_add(b)),
        WeightMode::ExactlyK => count(k),
    })
}

/// Random string of the given weight: uniform support, uniform X/Y/Z letters.
fn random_string_of_weight<R: Rng>(n: usize, w: usize, rng: &mut R) -> PauliString {
    let mut qubits: Vec<usize> = (0..n).collect();
    let (support, _) = qubits.partial_shuffle(rng, w);
    let (mut x, mut z) = (0u64, 0u64);
    for &q in support.iter() {
        match rng.random_range(0..3u8) {
            0 => x |= 1 << q,
            1 => {
                x |= 1 << q;
                z |= 1 << q;
            }
            _ => z |= 1 << q,
        }
    }
    PauliString::new(n, x, z).expect("masks within register")
}

fn enumerate_strings(n: usize, k: usize, mode: WeightMode) -> Vec<PauliString> {
    let weights: Vec<usize> = match mode {
        WeightMode::UpToK => (1..=k).collect(),
        WeightMode::ExactlyK => vec![k],
    };
    let mut out = Vec::new();
    for support in 1u64..(1u64 << n) {
        let w = support.count_ones() as usize;
        if !weights.contains(&w) {
            continue;
        }
        let sites: Vec<usize> = (0..n).filter(|q| (support >> q) & 1 == 1).collect();
        let total = 3usize.pow(w as u32);
        for code in 0..total {
            let (mut x, mut z, mut c) = (0u64, 0u64, code);
            for &q in &sites {
                match c % 3 {
                    0 => x |= 1 << q,
                    1 => {
                        x |= 1 << q;
                        z |= 1 << q;
                    }
                    _ => z |= 1 << q,
                }
                c /= 3;
            }
            out.push(PauliString::new(n, x, z).expect("masks within register"));
        }
    }
    out
}

fn sample_strings<R: Rng>(spec: &EnsembleSpec, max: u128, rng: &mut R) -> Vec<PauliString> {
    let n = spec.n_qubits;
    let want = spec.n_terms;
    if (want as u128) * 2 > max && n < 32 {
        let mut all = enumerate_strings(n, spec.k, spec.mode);
        all.shuffle(rng);
        all.truncate(want);
        return all;
    }
    // Weight drawn proportionally to the number of strings of that weight.
    let weights: Vec<(usize, f64)> = match spec.mode {
        WeightMode::UpToK => (1..=spec.k)
            .map(|j| (j, binomial(n, j) as f64 * 3f64.powi(j as i32)))
            .collect(),
        WeightMode::ExactlyK => vec![(spec.k, 1.0)],
    };
    let total: f64 = weights.iter().map(|(_, w)| w).sum();
    let mut seen = HashSet::with_capacity(want);
    let mut out = Vec::with_capacity(want);
    while out.len() < want {
        let mut u: f64 = rng.random::<f64>() * total;
        let mut w = weights.last().expect("nonempty").0;
        for &(j, cnt) in &weights {
            if u < cnt {
                w = j;
                break;
            }
            u -= cnt;
        }
        let s = random_string_of_weight(n, w, rng);
        if seen.insert((s.x_mask(), s.z_mask())) {
            out.push(s);
        }
    }
    out
}

/// Draws a Hamiltonian with distinct strings and unit one-norm.
pub fn sample_hamiltonian(spec: &EnsembleSpec) -> Result<Hamiltonian> {
    spec.validate()?;
    let max = max_terms(spec.n_qubits, spec.k, spec.mode)?;
    let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);
    let strings = sample_strings(spec, max, &mut rng);
    let mut coeffs = Vec::with_capacity(strings.len());
    for _ in 0..strings.len() {
        let mut mag = spec.dist.sample(&mut rng);
        while !(mag > 0.0 && mag.is_finite()) {
            mag = spec.dist.sample(&mut rng);
        }
        let sign = if spec.random_signs && rng.random::<bool>() { -1.0 } else { 1.0 };
        coeffs.push(sign * mag);
    }
    let norm: f64 = coeffs.iter().map(|c| c.abs()).sum();
    let terms = coeffs
        .into_iter()
        .zip(strings)
        .map(|(c, s)| PauliTerm::new(c / norm, s))
        .collect::<Result<Vec<_>>>()?;
    Hamiltonian::new(spec.n_qubits, terms)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogNormalFit {
    pub mu_log: f64,
    pub sigma2: f64,
}

fn check_magnitudes(mags: &[f64]) -> Result<()> {
    if mags.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 magnitudes, got {}",
            mags.len()
        )));
    }
    if let Some(bad) = mags.iter().find(|x| !(**x > 0.0 && x.is_finite())) {
        return Err(Error::InvalidArgument(format!("magnitude {bad} is not positive")));
    }
    Ok(())
}

/// Mean and unbiased variance of `log |c|`.
pub fn fit_lognormal(mags: &[f64]) -> Result<LogNormalFit> {
    check_magnitudes(mags)?;
    let logs: Vec<f64> = mags.iter().map(|x| x.ln()).collect();
    let n = logs.len() as f64;
    let mean = logs.iter().sum::<f64>() / n;
    let var = logs.iter().map(|l| (l - mean) * (l - mean)).sum::<f64>() / (n - 1.0);
    Ok(LogNormalFit {
        mu_log: mean,
        sigma2: var,
    })
}

/// Maximum-likelihood Lomax shape at unit scale: `n / Σ ln(1 + x)`.
pub fn fit_pareto2(mags: &[f64]) -> Result<f64> {
    check_magnitudes(mags)?;
    let s: f64 = mags.iter().map(|x| x.ln_1p()).sum();
    let a = mags.len() as f64 / s;
    if !(a.is_finite() && a <= PARETO_SHAPE_CAP) {
        return Err(Error::FitOverflow(format!(
            "pareto shape {a:e} exceeds cap {PARETO_SHAPE_CAP:e}"
        )));
    }
    Ok(a)
}

/// Keeps the magnitudes at or above the empirical `quantile`.
pub fn tail_above_quantile(mags: &[f64], quantile: f64) -> Result<Vec<f64>> {
    if !(0.0..1.0).contains(&quantile) {
        return Err(Error::InvalidArgument(format!("tail quantile {quantile} outside [0, 1)")));
    }
    let mut sorted = mags.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let idx = ((sorted.len() as f64) * quantile).floor() as usize;
    Ok(sorted[idx.min(sorted.len().saturating_sub(1))..].to_vec())
}

/// Kolmogorov–Smirnov distance between the empirical CDF of `samples` and `cdf`.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}
