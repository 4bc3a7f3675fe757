//! Clifford+T cost models.
//!
//! Tallies count gates before rotation synthesis; `finalize` converts the
//! `Rz` count to T gates under a synthesis model with the accuracy budget
//! split evenly across rotations. Work ancillas are reused between
//! sub-circuits, so the `ancillas` field combines by maximum.

use std::ops::{Add, AddAssign, Mul};

use serde::{Deserialize, Serialize};

use crate::dynamics::{SparsePlan, TrotterOrder};
use crate::error::{Error, Result};
use crate::pauli::{Hamiltonian, PauliString};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ResourceTally {
    pub t_count: u64,
    pub cnot_count: u64,
    pub rz_count: u64,
    pub clifford_1q: u64,
    pub ancillas: u64,
}

impl Add for ResourceTally {
    type Output = Self;

    fn add(self, o: Self) -> Self {
        Self {
            t_count: self.t_count + o.t_count,
            cnot_count: self.cnot_count + o.cnot_count,
            rz_count: self.rz_count + o.rz_count,
            clifford_1q: self.clifford_1q + o.clifford_1q,
            ancillas: self.ancillas.max(o.ancillas),
        }
    }
}

impl AddAssign for ResourceTally {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

/// `n` sequential repetitions.
impl Mul<ResourceTally> for u64 {
    type Output = ResourceTally;

    fn mul(self, t: ResourceTally) -> ResourceTally {
        ResourceTally {
            t_count: self * t.t_count,
            cnot_count: self * t.cnot_count,
            rz_count: self * t.rz_count,
            clifford_1q: self * t.clifford_1q,
            ancillas: if self == 0 { 0 } else { t.ancillas },
        }
    }
}

impl std::iter::Sum for ResourceTally {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::default(), Add::add)
    }
}

/// Expected counts of a randomized circuit, kept fractional until reported.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ExpectedTally {
    pub t_count: f64,
    pub cnot_count: f64,
    pub rz_count: f64,
    pub clifford_1q: f64,
    pub ancillas: f64,
}

impl From<ResourceTally> for ExpectedTally {
    fn from(t: ResourceTally) -> Self {
        Self {
            t_count: t.t_count as f64,
            cnot_count: t.cnot_count as f64,
            rz_count: t.rz_count as f64,
            clifford_1q: t.clifford_1q as f64,
            ancillas: t.ancillas as f64,
        }
    }
}

impl Add for ExpectedTally {
    type Output = Self;

    fn add(self, o: Self) -> Self {
        Self {
            t_count: self.t_count + o.t_count,
            cnot_count: self.cnot_count + o.cnot_count,
            rz_count: self.rz_count + o.rz_count,
            clifford_1q: self.clifford_1q + o.clifford_1q,
            ancillas: self.ancillas.max(o.ancillas),
        }
    }
}

impl AddAssign for ExpectedTally {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl Mul<ExpectedTally> for f64 {
    type Output = ExpectedTally;

    fn mul(self, t: ExpectedTally) -> ExpectedTally {
        ExpectedTally {
            t_count: self * t.t_count,
            cnot_count: self * t.cnot_count,
            rz_count: self * t.rz_count,
            clifford_1q: self * t.clifford_1q,
            ancillas: if self == 0.0 { 0.0 } else { t.ancillas },
        }
    }
}

impl ExpectedTally {
    /// Nearest-integer counts for reporting.
    pub fn rounded(&self) -> ResourceTally {
        let r = |x: f64| x.round().max(0.0) as u64;
        ResourceTally {
            t_count: r(self.t_count),
            cnot_count: r(self.cnot_count),
            rz_count: r(self.rz_count),
            clifford_1q: r(self.clifford_1q),
            ancillas: r(self.ancillas),
        }
    }
}

/// T-count per synthesized `Rz` as a function of its accuracy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthesisModel {
    pub slope: f64,
    pub offset: f64,
    /// `(ε, T-count)` calibration points. A rotation at accuracy `ε` uses
    /// the entry with the largest tabulated `ε' ≤ ε`, else the formula.
    pub table: Vec<(f64, u64)>,
}

impl Default for SynthesisModel {
    fn default() -> Self {
        Self {
            slope: 3.0,
            offset: 0.0,
            table: Vec::new(),
        }
    }
}

impl SynthesisModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.slope > 0.0) || !self.offset.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "synthesis slope {} must be positive and offset {} finite",
                self.slope, self.offset
            )));
        }
        if let Some((e, t)) = self.table.iter().find(|(e, t)| !(*e > 0.0 && *e < 1.0) || *t == 0) {
            return Err(Error::InvalidArgument(format!("bad synthesis table entry {e}: {t}")));
        }
        Ok(())
    }
}

/// `⌈slope·log₂(1/ε) + offset⌉`, or the table entry.
pub fn rz_tcount(eps_deco: f64, model: &SynthesisModel) -> Result<u64> {
    if !(eps_deco > 0.0 && eps_deco < 1.0) {
        return Err(Error::OutOfRange(format!("synthesis accuracy {eps_deco} outside (0, 1)")));
    }
    let tabulated = model
        .table
        .iter()
        .filter(|(e, _)| *e <= eps_deco * (1.0 + 1e-12))
        .max_by(|a, b| a.0.total_cmp(&b.0));
    if let Some((_, t)) = tabulated {
        return Ok(*t);
    }
    // Guard against log2(2^-k) landing a hair above k.
    let raw = model.slope * (1.0 / eps_deco).log2() + model.offset;
    Ok((raw - 1e-9).ceil().max(0.0) as u64)
}

/// `ε / n_rotations`.
pub fn deco_budget(eps_total: f64, n_rotations: f64) -> Result<f64> {
    if !(n_rotations >= 1.0) {
        return Err(Error::InvalidArgument(format!("rotation count {n_rotations} must be >= 1")));
    }
    Ok(eps_total / n_rotations)
}

/// Adds synthesized T gates for every `Rz`, budgeting `ε` over all of them.
pub fn finalize(tally: ResourceTally, eps: f64, model: &SynthesisModel) -> Result<ResourceTally> {
    if tally.rz_count == 0 {
        return Ok(tally);
    }
    let per = rz_tcount(deco_budget(eps, tally.rz_count as f64)?, model)?;
    Ok(ResourceTally {
        t_count: tally.t_count + tally.rz_count * per,
        ..tally
    })
}

pub fn finalize_expected(tally: ExpectedTally, eps: f64, model: &SynthesisModel) -> Result<ExpectedTally> {
    if tally.rz_count == 0.0 {
        return Ok(tally);
    }
    let per = rz_tcount(deco_budget(eps, tally.rz_count.max(1.0))?, model)? as f64;
    Ok(ExpectedTally {
        t_count: tally.t_count + tally.rz_count * per,
        ..tally
    })
}

/// `e^{-iθP}`: basis changes, a CNOT ladder down and up, one `Rz`. The
/// identity string is a global phase and costs nothing.
pub fn pauli_exp_cost(p: &PauliString) -> ResourceTally {
    let k = p.weight() as u64;
    if k == 0 {
        return ResourceTally::default();
    }
    let (nx, ny, _) = p.site_counts();
    ResourceTally {
        cnot_count: 2 * (k - 1),
        rz_count: 1,
        clifford_1q: 2 * nx as u64 + 4 * ny as u64,
        ..Default::default()
    }
}

/// Worst case over site types (every site a `Y`).
pub fn pauli_exp_cost_weight(k: usize) -> ResourceTally {
    let k = k as u64;
    if k == 0 {
        return ResourceTally::default();
    }
    ResourceTally {
        cnot_count: 2 * (k - 1),
        rz_count: 1,
        clifford_1q: 4 * k,
        ..Default::default()
    }
}

fn step_exponentials(p: TrotterOrder) -> u64 {
    match p {
        TrotterOrder::First => 1,
        TrotterOrder::Second => 2,
    }
}

/// `r` steps of `L` (first order) or `2L` (second order) exponentials.
pub fn trotter_cost(h: &Hamiltonian, r: usize, p: TrotterOrder, eps: f64, model: &SynthesisModel) -> Result<ResourceTally> {
    let per_step: ResourceTally = h.terms().iter().map(|t| pauli_exp_cost(&t.string)).sum();
    finalize((r as u64 * step_exponentials(p)) * per_step, eps, model)
}

/// Expected tally of `N` sampled exponentials.
pub fn qdrift_cost(h: &Hamiltonian, n: usize, eps: f64, model: &SynthesisModel) -> Result<ExpectedTally> {
    if n == 0 {
        return Err(Error::InvalidArgument("sample count N must be >= 1".into()));
    }
    let lambda = h.one_norm()?;
    let mut per_step = ExpectedTally::default();
    for t in h.terms() {
        per_step += (t.coefficient.abs() / lambda) * ExpectedTally::from(pauli_exp_cost(&t.string));
    }
    finalize_expected(n as f64 * per_step, eps, model)
}

/// Expected tally of `r` SparSto slices.
pub fn sparsto_cost(
    h: &Hamiltonian,
    plan: &SparsePlan,
    r: usize,
    eps: f64,
    model: &SynthesisModel,
) -> Result<ExpectedTally> {
    if plan.len() != h.len() {
        return Err(Error::InvalidArgument("plan does not match the hamiltonian".into()));
    }
    let mut per_step = ExpectedTally::default();
    for (t, &p) in h.terms().iter().zip(&plan.probabilities) {
        per_step += p * ExpectedTally::from(pauli_exp_cost(&t.string));
    }
    finalize_expected(r as f64 * per_step, eps, model)
}

pub fn toffoli_cost() -> ResourceTally {
    ResourceTally {
        cnot_count: 6,
        clifford_1q: 2,
        t_count: 7,
        ..Default::default()
    }
}

/// Multi-controlled X on `a` controls via a Toffoli chain.
pub fn mcx_cost(a: usize) -> ResourceTally {
    match a {
        0 => ResourceTally::default(),
        1 => ResourceTally {
            cnot_count: 1,
            ..Default::default()
        },
        2 => toffoli_cost(),
        _ => ResourceTally {
            ancillas: a as u64 - 2,
            ..(2 * a as u64 - 3) * toffoli_cost()
        },
    }
}

/// Real-amplitude state preparation on `a` qubits.
pub fn mottonen_cost(a: usize) -> ResourceTally {
    if a == 0 {
        return ResourceTally::default();
    }
    ResourceTally {
        rz_count: (1u64 << a) - 1,
        cnot_count: (1u64 << a) - 2,
        ..Default::default()
    }
}

/// Constants of the Select model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelectModel {
    /// Toffolis per internal node of the binary tree walk.
    pub tree_toffolis_per_node: f64,
    /// CNOTs per non-identity site of each controlled Pauli.
    pub fanout_cnots_per_site: f64,
    /// CNOTs per controlled term application on top of the fanout.
    pub cnots_per_application: f64,
}

impl Default for SelectModel {
    fn default() -> Self {
        Self {
            tree_toffolis_per_node: 2.0,
            fanout_cnots_per_site: 1.0,
            cnots_per_application: 0.0,
        }
    }
}

/// Select over `l` (possibly expected) terms with total Pauli weight
/// `weight_sum`.
pub fn select_cost_expected(l: f64, weight_sum: f64, model: &SelectModel) -> ExpectedTally {
    let toffolis = model.tree_toffolis_per_node * (l - 1.0).max(0.0);
    let tof = ExpectedTally::from(toffoli_cost());
    let mut out = toffolis * tof;
    out.cnot_count += model.fanout_cnots_per_site * weight_sum + model.cnots_per_application * l;
    out
}

pub fn select_cost(l: usize, a: usize, weights: &[usize], model: &SelectModel) -> Result<ExpectedTally> {
    if l > 1 << a {
        return Err(Error::InvalidArgument(format!("{l} terms do not fit {a} ancilla qubits")));
    }
    let wsum: usize = weights.iter().sum();
    Ok(select_cost_expected(l as f64, wsum as f64, model))
}

/// Smallest `a` with `2^a ≥ x`.
pub fn ancillas_for(x: f64) -> usize {
    let mut a = 0;
    while ((1u64 << a) as f64) < x {
        a += 1;
    }
    a
}

/// `d` projector phases and `d` block-encoding uses over `l_eff` terms.
pub fn qsvt_cost(
    l_eff: f64,
    d: usize,
    weight_sum: f64,
    eps: f64,
    synthesis: &SynthesisModel,
    select: &SelectModel,
) -> Result<ExpectedTally> {
    if d == 0 {
        return Err(Error::InvalidArgument("degree must be >= 1".into()));
    }
    if !(l_eff > 0.0) {
        return Err(Error::InvalidArgument(format!("term count {l_eff} must be positive")));
    }
    let a = ancillas_for(l_eff);
    let mut phase = ExpectedTally::from(2 * mcx_cost(a));
    phase.rz_count += 1.0;
    let encoding = ExpectedTally::from(2 * mottonen_cost(a)) + select_cost_expected(l_eff, weight_sum, select);
    let mut total = d as f64 * (phase + encoding);
    total.ancillas = a as f64 + total.ancillas;
    finalize_expected(total, eps, synthesis)
}

/// Dense QSVT on all terms of `h`.
pub fn dense_qsvt_cost(
    h: &Hamiltonian,
    d: usize,
    eps: f64,
    synthesis: &SynthesisModel,
    select: &SelectModel,
) -> Result<ExpectedTally> {
    let wsum: usize = h.terms().iter().map(|t| t.string.weight()).sum();
    qsvt_cost(h.len() as f64, d, wsum as f64, eps, synthesis, select)
}

/// Sparse QSVT with `L_eff = μ` and expected total weight `Σ p_j w_j`.
pub fn sparse_qsvt_cost(
    h: &Hamiltonian,
    plan: &SparsePlan,
    d: usize,
    eps: f64,
    synthesis: &SynthesisModel,
    select: &SelectModel,
) -> Result<ExpectedTally> {
    let wsum: f64 = h
        .terms()
        .iter()
        .zip(&plan.probabilities)
        .map(|(t, p)| p * t.string.weight() as f64)
        .sum();
    qsvt_cost(plan.mu, d, wsum, eps, synthesis, select)
}
