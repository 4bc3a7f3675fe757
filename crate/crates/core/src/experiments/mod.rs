//! Config-driven experiment runners.
//!
//! Every runner expands its config into a flat list of independent tasks
//! (instance × method × grid point), evaluates them on the rayon pool and
//! returns the records in task order, so the output does not depend on the
//! worker count. Random streams are keyed by derived seeds, never by worker.

pub mod analysis;
pub mod config;
pub mod record;

use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;

use crate::blockenc;
use crate::dynamics::{self, SparsePlan, TrotterOrder};
use crate::ensembles::{self, EnsembleSpec};
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::pauli::Hamiltonian;
use crate::qsvt::{self, QsvtBackend};
use crate::resources;
use crate::seeding::{derive_seed, task_rng};

pub use analysis::{detect_floor, find_crossover, loglog_slope, spearman, Crossover};
pub use config::{DistributionKind, ExperimentConfig, ExperimentKind, Method, Resolved};
pub use record::{csv_string, write_csv, CsvRecord, FitRecord, SweepRecord};

// Seed-path tags, one per randomized task family.
const TAG_PREPARE: u64 = 1;
const TAG_SELECT: u64 = 2;
const TAG_QDRIFT: u64 = 3;
const TAG_SPARSTO: u64 = 4;
const TAG_SPARSE_QSVT: u64 = 5;

#[derive(Clone, Debug, PartialEq)]
pub enum Output {
    Sweep(Vec<SweepRecord>),
    Fit(Vec<FitRecord>),
}

impl Output {
    pub fn len(&self) -> usize {
        match self {
            Output::Sweep(r) => r.len(),
            Output::Fit(r) => r.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn write<W: std::io::Write>(&self, out: W, metadata: &[(&str, String)]) -> Result<()> {
        match self {
            Output::Sweep(r) => write_csv(out, metadata, r),
            Output::Fit(r) => write_csv(out, metadata, r),
        }
    }

    pub fn to_csv(&self, metadata: &[(&str, String)]) -> Result<String> {
        let mut buf = Vec::new();
        self.write(&mut buf, metadata)?;
        String::from_utf8(buf).map_err(|e| Error::Io(std::io::Error::other(e)))
    }
}

/// Runs the configured experiment on a pool of `jobs` workers (all cores
/// when `None`).
pub fn run(cfg: &Resolved, jobs: Option<usize>) -> Result<Output> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    pool.install(|| dispatch(cfg))
}

fn dispatch(cfg: &Resolved) -> Result<Output> {
    Ok(match cfg.kind {
        ExperimentKind::LcuPropagation => Output::Sweep(run_lcu_propagation(cfg)?),
        ExperimentKind::QsvtPropagation => Output::Sweep(run_qsvt_propagation(cfg)?),
        ExperimentKind::TrotterVsSparsto | ExperimentKind::QsvtVsSparse => Output::Sweep(run_method_sweep(cfg)?),
        ExperimentKind::LocalitySweep => Output::Sweep(run_locality_sweep(cfg)?),
        ExperimentKind::Crossover => Output::Sweep(run_crossover(cfg)?),
        ExperimentKind::FitCoefficients => Output::Fit(run_fit(cfg)?),
    })
}

/// One sampled Hamiltonian of the ensemble grid.
#[derive(Clone, Debug)]
pub struct Instance {
    pub h: Hamiltonian,
    pub k: usize,
    pub dist_param: f64,
    pub index: usize,
    pub seed: u64,
}

impl Instance {
    fn record(&self, cfg: &Resolved) -> SweepRecord {
        SweepRecord {
            experiment: cfg.kind.name().to_string(),
            n_qubits: self.h.n_qubits(),
            k: self.k,
            n_terms: self.h.len(),
            distribution: cfg.distribution.name().to_string(),
            dist_param: self.dist_param,
            instance: self.index,
            instance_seed: self.seed,
            ..Default::default()
        }
    }

    /// Evolution time for `t_multiplier` in units of `1/λ`.
    fn time(&self, cfg: &Resolved) -> Result<f64> {
        Ok(cfg.t_multiplier / self.h.one_norm()?)
    }
}

/// Samples the ensemble grid `k × L × parameter × instance` in that order.
pub fn sample_instances(cfg: &Resolved, ks: &[usize]) -> Result<Vec<Instance>> {
    let mut specs = Vec::new();
    for &k in ks {
        for &l in &cfg.l_list {
            for (pi, &param) in cfg.dist_params.iter().enumerate() {
                for i in 0..cfg.n_instances {
                    let seed = derive_seed(cfg.base_seed, &[k as u64, l as u64, pi as u64, i as u64]);
                    let mut spec =
                        EnsembleSpec::new(cfg.n_qubits, l, k, cfg.mode, cfg.distribution.with_param(param)?, seed);
                    spec.random_signs = cfg.random_signs;
                    specs.push((spec, param, i));
                }
            }
        }
    }
    specs
        .into_par_iter()
        .map(|(spec, param, index)| {
            Ok(Instance {
                h: ensembles::sample_hamiltonian(&spec)?,
                k: spec.k,
                dist_param: param,
                index,
                seed: spec.seed,
            })
        })
        .collect()
}

fn mean_sem(xs: &[f64]) -> (f64, Option<f64>) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, None);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, Some((var / n).sqrt()))
}

fn timed<T>(enabled: bool, f: impl FnOnce() -> Result<T>) -> Result<(T, f64)> {
    let start = Instant::now();
    let out = f()?;
    Ok((out, if enabled { start.elapsed().as_secs_f64() } else { 0.0 }))
}

/// Prepare-oracle perturbation: `ε_LCU` against `ε_prep` per instance.
pub fn run_lcu_propagation(cfg: &Resolved) -> Result<Vec<SweepRecord>> {
    let instances = sample_instances(cfg, &[cfg.k])?;
    let exact: Vec<(CMatrix, CMatrix)> = instances
        .par_iter()
        .map(|inst| {
            let be = blockenc::block_encode(&inst.h)?;
            let v = blockenc::prepare_unitary_padded(&inst.h.coefficients(), be.ancillas)?;
            Ok((be.w, v))
        })
        .collect::<Result<_>>()?;
    let tasks: Vec<(usize, usize)> = (0..instances.len())
        .flat_map(|i| (0..cfg.eps_grid.len()).map(move |e| (i, e)))
        .collect();
    tasks
        .par_iter()
        .map(|&(i, e)| {
            let inst = &instances[i];
            let eps = cfg.eps_grid[e];
            let (err, wall) = timed(cfg.record_wall_time, || {
                let (w, v) = &exact[i];
                let mut rng = task_rng(derive_seed(inst.seed, &[TAG_PREPARE]), e as u64);
                let v_tilde = blockenc::perturb_unitary(v, eps, &mut rng)?;
                blockenc::lcu_error(w, &blockenc::with_perturbed_prepare(&inst.h, &v_tilde)?)
            })?;
            Ok(SweepRecord {
                method: "lcu-prepare".into(),
                eps_param: Some(eps),
                realizations: 1,
                spectral_error: err,
                bound: Some(2.0 * eps),
                wall_time: wall,
                ..inst.record(cfg)
            })
        })
        .collect()
}

/// Select-oracle perturbation: QSVT error decomposition over the degree grid.
pub fn run_qsvt_propagation(cfg: &Resolved) -> Result<Vec<SweepRecord>> {
    let instances = sample_instances(cfg, &[cfg.k])?;
    let tasks: Vec<(usize, usize)> = (0..instances.len())
        .flat_map(|i| (0..cfg.eps_grid.len()).map(move |e| (i, e)))
        .collect();
    let chunks: Vec<Vec<SweepRecord>> = tasks
        .par_iter()
        .map(|&(i, e)| {
            let inst = &instances[i];
            let eps = cfg.eps_grid[e];
            let t = inst.time(cfg)?;
            let (rows, wall) = timed(cfg.record_wall_time, || {
                let be = blockenc::block_encode(&inst.h)?;
                let s = blockenc::select_matrix(&inst.h, be.ancillas)?;
                let mut rng = task_rng(derive_seed(inst.seed, &[TAG_SELECT]), e as u64);
                let s_tilde = blockenc::perturb_unitary(&s, eps, &mut rng)?;
                let perturbed = be.with_unitary(blockenc::with_perturbed_select(&inst.h, &s_tilde)?)?;
                qsvt::qsvt_error_decomposition_degrees(&inst.h, &be, &perturbed, t, &cfg.d_grid)
            })?;
            rows.into_iter()
                .map(|dec| {
                    let mut rec = SweepRecord {
                        method: "qsvt-select".into(),
                        steps: Some(dec.d),
                        eps_param: Some(eps),
                        realizations: 1,
                        spectral_error: dec.eps_be,
                        total_error: Some(dec.eps_total),
                        eps_poly: dec.eps_poly,
                        bound: dec.eps_poly.map(|p| dec.d as f64 * eps + p),
                        wall_time: wall,
                        ..inst.record(cfg)
                    };
                    rec.set_tally(&resources::dense_qsvt_cost(
                        &inst.h,
                        dec.d,
                        cfg.synthesis_eps,
                        &cfg.synthesis,
                        &cfg.select,
                    )?);
                    Ok(rec)
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(chunks.into_iter().flatten().collect())
}

/// One unit of work of a method sweep.
#[derive(Clone, Copy, Debug, PartialEq)]
enum SweepTask {
    Trotter(TrotterOrder, usize),
    Qdrift(usize, usize),
    /// Threshold index and grid index.
    Sparsto(usize, usize),
    Qsvt,
    SparseQsvt(usize),
}

fn sweep_tasks(cfg: &Resolved) -> Vec<SweepTask> {
    let mut out = Vec::new();
    for &m in &cfg.methods {
        match m {
            Method::Trotter1 | Method::Trotter2 => {
                let p = m.trotter_order().expect("trotter method");
                out.extend(cfg.r_grid.iter().map(|&r| SweepTask::Trotter(p, r)));
            }
            Method::Qdrift => out.extend((0..cfg.n_grid.len()).map(|g| SweepTask::Qdrift(g, cfg.n_grid[g]))),
            Method::Sparsto => {
                for ti in 0..cfg.thresholds.len() {
                    out.extend((0..cfg.sparsto_r_grid.len()).map(|g| SweepTask::Sparsto(ti, g)));
                }
            }
            Method::Qsvt => out.push(SweepTask::Qsvt),
            Method::SparseQsvt => out.extend((0..cfg.thresholds.len()).map(SweepTask::SparseQsvt)),
        }
    }
    out
}

struct Prepared {
    exact: CMatrix,
    t: f64,
    plans: Vec<SparsePlan>,
}

fn prepare(cfg: &Resolved, inst: &Instance) -> Result<Prepared> {
    let t = inst.time(cfg)?;
    let needs_plans = cfg.methods.iter().any(|m| matches!(m, Method::Sparsto | Method::SparseQsvt));
    let plans = if needs_plans {
        cfg.thresholds
            .iter()
            .map(|&tau| dynamics::make_sparse_plan(&inst.h, tau))
            .collect::<Result<_>>()?
    } else {
        Vec::new()
    };
    Ok(Prepared {
        exact: dynamics::exact_evolution(&inst.h, t)?,
        t,
        plans,
    })
}

fn realize<F>(cfg: &Resolved, seed: u64, mut f: F) -> Result<Vec<f64>>
where
    F: FnMut(&mut crate::seeding::TaskRng) -> Result<f64>,
{
    (0..cfg.n_realizations)
        .map(|j| {
            let mut rng = task_rng(seed, j as u64);
            f(&mut rng)
        })
        .collect()
}

fn eval_task(cfg: &Resolved, inst: &Instance, prep: &Prepared, task: SweepTask) -> Result<Vec<SweepRecord>> {
    let h = &inst.h;
    let base = inst.record(cfg);
    let eps = cfg.synthesis_eps;
    let t = prep.t;
    let (mut rows, wall) = timed(cfg.record_wall_time, || -> Result<Vec<SweepRecord>> {
        Ok(match task {
            SweepTask::Trotter(p, r) => {
                let u = dynamics::trotter_evolution(h, t, r, p)?;
                let mut rec = SweepRecord {
                    method: format!("trotter{}", p.as_u8()),
                    order: Some(p.as_u8() as usize),
                    steps: Some(r),
                    realizations: 1,
                    spectral_error: linalg::spectral_error(&u, &prep.exact)?,
                    ..base.clone()
                };
                rec.set_tally(&resources::trotter_cost(h, r, p, eps, &cfg.synthesis)?.into());
                vec![rec]
            }
            SweepTask::Qdrift(g, n) => {
                let seed = derive_seed(inst.seed, &[TAG_QDRIFT, g as u64]);
                let errs = realize(cfg, seed, |rng| {
                    let s = dynamics::qdrift_evolution(h, t, n, rng)?;
                    linalg::spectral_error(&s.unitary, &prep.exact)
                })?;
                let (mean, sem) = mean_sem(&errs);
                let mut rec = SweepRecord {
                    method: "qdrift".into(),
                    steps: Some(n),
                    realizations: errs.len(),
                    spectral_error: mean,
                    error_sem: sem,
                    bound: Some(dynamics::qdrift_bound(h.one_norm()?, t, n, cfg.qdrift_constant)?),
                    ..base.clone()
                };
                rec.set_tally(&resources::qdrift_cost(h, n, eps, &cfg.synthesis)?);
                vec![rec]
            }
            SweepTask::Sparsto(ti, g) => {
                let plan = &prep.plans[ti];
                let r = cfg.sparsto_r_grid[g];
                let seed = derive_seed(inst.seed, &[TAG_SPARSTO, ti as u64, g as u64]);
                let errs = realize(cfg, seed, |rng| {
                    let u = dynamics::sparsto_evolution(h, t, r, plan, rng)?;
                    linalg::spectral_error(&u, &prep.exact)
                })?;
                let (mean, sem) = mean_sem(&errs);
                let gates = dynamics::sparsto_gate_budget(r, plan.mu);
                let mut rec = SweepRecord {
                    method: "sparsto".into(),
                    tau: Some(plan.tau),
                    steps: Some(r),
                    realizations: errs.len(),
                    spectral_error: mean,
                    error_sem: sem,
                    bound: dynamics::sparsto_bound_leading(t, plan.mu, gates, &plan.u).ok(),
                    mu: Some(plan.mu),
                    ..base.clone()
                };
                rec.set_tally(&resources::sparsto_cost(h, plan, r, eps, &cfg.synthesis)?);
                vec![rec]
            }
            SweepTask::Qsvt => {
                let outputs = match cfg.qsvt_backend {
                    QsvtBackend::Eigenbasis => {
                        qsvt::apply_poly_eigenbasis_dense(&h.dense()?, h.one_norm()?, t, &cfg.d_grid)?
                    }
                    QsvtBackend::Walk => qsvt::qsvt_simulate_degrees(&blockenc::block_encode(h)?, t, &cfg.d_grid)?,
                };
                let t_eff = h.one_norm()? * t;
                cfg.d_grid
                    .iter()
                    .zip(&outputs)
                    .map(|(&d, u)| {
                        let eps_poly = qsvt::poly_error(t_eff, d).ok();
                        let mut rec = SweepRecord {
                            method: "qsvt".into(),
                            steps: Some(d),
                            realizations: 1,
                            spectral_error: linalg::spectral_error(u, &prep.exact)?,
                            eps_poly,
                            bound: eps_poly,
                            ..base.clone()
                        };
                        rec.set_tally(&resources::dense_qsvt_cost(h, d, eps, &cfg.synthesis, &cfg.select)?);
                        Ok(rec)
                    })
                    .collect::<Result<_>>()?
            }
            SweepTask::SparseQsvt(ti) => {
                let plan = &prep.plans[ti];
                let seed = derive_seed(inst.seed, &[TAG_SPARSE_QSVT, ti as u64]);
                let mut per_degree = vec![Vec::with_capacity(cfg.n_realizations); cfg.d_grid.len()];
                for j in 0..cfg.n_realizations {
                    let mut rng = task_rng(seed, j as u64);
                    let outs = qsvt::sparse_qsvt_simulate(
                        h,
                        plan,
                        t,
                        &cfg.d_grid,
                        cfg.sparse,
                        cfg.sparse_draw_mode,
                        cfg.qsvt_backend,
                        &mut rng,
                    )?;
                    for (slot, u) in per_degree.iter_mut().zip(&outs) {
                        slot.push(linalg::spectral_error(u, &prep.exact)?);
                    }
                }
                let t_eff = h.one_norm()? * t;
                cfg.d_grid
                    .iter()
                    .zip(&per_degree)
                    .map(|(&d, errs)| {
                        let (mean, sem) = mean_sem(errs);
                        let eps_poly = qsvt::poly_error(t_eff, d).ok();
                        let bound = match eps_poly {
                            Some(p) => Some(qsvt::sparse_qsvt_error_model(d, plan.variance_proxy(), p, 1.0)?),
                            None => None,
                        };
                        let mut rec = SweepRecord {
                            method: "sparse-qsvt".into(),
                            tau: Some(plan.tau),
                            steps: Some(d),
                            realizations: errs.len(),
                            spectral_error: mean,
                            error_sem: sem,
                            eps_poly,
                            bound,
                            mu: Some(plan.mu),
                            ..base.clone()
                        };
                        rec.set_tally(&resources::sparse_qsvt_cost(h, plan, d, eps, &cfg.synthesis, &cfg.select)?);
                        Ok(rec)
                    })
                    .collect::<Result<_>>()?
            }
        })
    })?;
    for r in &mut rows {
        r.wall_time = wall;
    }
    Ok(rows)
}

fn sweep_instances(cfg: &Resolved, instances: &[Instance]) -> Result<Vec<SweepRecord>> {
    let prepared: Vec<Prepared> = instances.par_iter().map(|i| prepare(cfg, i)).collect::<Result<_>>()?;
    let methods = sweep_tasks(cfg);
    let tasks: Vec<(usize, SweepTask)> = (0..instances.len())
        .flat_map(|i| methods.iter().map(move |&m| (i, m)))
        .collect();
    let chunks: Vec<Vec<SweepRecord>> = tasks
        .par_iter()
        .map(|&(i, task)| eval_task(cfg, &instances[i], &prepared[i], task))
        .collect::<Result<_>>()?;
    Ok(chunks.into_iter().flatten().collect())
}

/// Error and modeled cost of every configured method on every instance.
pub fn run_method_sweep(cfg: &Resolved) -> Result<Vec<SweepRecord>> {
    let instances = sample_instances(cfg, &[cfg.k])?;
    sweep_instances(cfg, &instances)
}

/// Method sweep repeated for every weight in `k_list`.
pub fn run_locality_sweep(cfg: &Resolved) -> Result<Vec<SweepRecord>> {
    let instances = sample_instances(cfg, &cfg.k_list)?;
    sweep_instances(cfg, &instances)
}

/// `(t_count, spectral_error)` curve of one method on one instance.
pub fn cost_curve(records: &[SweepRecord], instance_seed: u64, method: &str, tau: Option<f64>) -> Vec<(f64, f64)> {
    let mut pts: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| r.instance_seed == instance_seed && r.method == method && r.tau == tau)
        .map(|r| (r.t_count, r.spectral_error))
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    pts.dedup_by(|a, b| a.0 == b.0);
    pts
}

/// Method sweep plus one `crossover` row per instance where the second-order
/// Trotter and SparSto(`crossover_tau`) curves intersect.
pub fn run_crossover(cfg: &Resolved) -> Result<Vec<SweepRecord>> {
    let mut cfg = cfg.clone();
    if !cfg.thresholds.iter().any(|&t| t == cfg.crossover_tau) {
        cfg.thresholds.push(cfg.crossover_tau);
    }
    for m in [Method::Trotter2, Method::Sparsto] {
        if !cfg.methods.contains(&m) {
            cfg.methods.push(m);
        }
    }
    let instances = sample_instances(&cfg, &[cfg.k])?;
    let mut records = sweep_instances(&cfg, &instances)?;
    let mut extra = Vec::new();
    for inst in &instances {
        let trotter = cost_curve(&records, inst.seed, "trotter2", None);
        let sparsto = cost_curve(&records, inst.seed, "sparsto", Some(cfg.crossover_tau));
        if trotter.len() < 4 || sparsto.len() < 4 {
            continue;
        }
        if let Some(c) = find_crossover(&trotter, &sparsto)? {
            extra.push(SweepRecord {
                method: if c.degenerate { "crossover-degenerate".into() } else { "crossover".into() },
                tau: Some(cfg.crossover_tau),
                spectral_error: c.error,
                t_count: c.cost,
                ..inst.record(&cfg)
            });
        }
    }
    records.extend(extra);
    Ok(records)
}

/// Fit of normalized coefficient magnitudes. The lognormal uses every
/// magnitude; the Pareto shape uses those above `tail_quantile` when given,
/// and is `None` when its estimate overflows.
pub fn fit_hamiltonian(source: &str, h: &Hamiltonian, tail_quantile: Option<f64>) -> Result<FitRecord> {
    let lambda = h.one_norm()?;
    let mags: Vec<f64> = h.terms().iter().map(|t| t.coefficient.abs() / lambda).collect();
    let ln = ensembles::fit_lognormal(&mags)?;
    let tail = match tail_quantile {
        Some(q) => ensembles::tail_above_quantile(&mags, q)?,
        None => mags,
    };
    let pareto_a = match ensembles::fit_pareto2(&tail) {
        Ok(a) => Some(a),
        Err(Error::FitOverflow(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(FitRecord {
        source: source.to_string(),
        n_terms: h.len(),
        n_qubits: h.n_qubits(),
        sigma2: ln.sigma2,
        mu_log: ln.mu_log,
        pareto_a,
    })
}

pub fn fit_term_list(path: &Path, tail_quantile: Option<f64>) -> Result<FitRecord> {
    let text = std::fs::read_to_string(path)?;
    let h = Hamiltonian::parse_term_list(&text)?;
    fit_hamiltonian(&path.display().to_string(), &h, tail_quantile)
}

/// Fits the supplied term list, or every instance of the configured
/// ensemble when none is given.
pub fn run_fit(cfg: &Resolved) -> Result<Vec<FitRecord>> {
    if let Some(path) = &cfg.term_list {
        return Ok(vec![fit_term_list(path, cfg.tail_quantile)?]);
    }
    let instances = sample_instances(cfg, &[cfg.k])?;
    instances
        .par_iter()
        .map(|inst| {
            let source = format!(
                "{}:{}:L{}:{}",
                cfg.distribution.name(),
                inst.dist_param,
                inst.h.len(),
                inst.index
            );
            fit_hamiltonian(&source, &inst.h, cfg.tail_quantile)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::resources::ExpectedTally;

    fn resolve(text: &str) -> Resolved {
        ExperimentConfig::from_toml_str(text).unwrap().resolve().unwrap()
    }

    #[test]
    fn lcu_rows_respect_bound() {
        let cfg = resolve("experiment = \"lcu-propagation\"\nn_instances = 3\nbase_seed = 5");
        let rows = run_lcu_propagation(&cfg).unwrap();
        assert_eq!(rows.len(), 30);
        for r in &rows {
            assert!(r.spectral_error <= r.bound.unwrap() * (1.0 + 1e-9));
        }
    }

    #[test]
    fn zero_perturbation_gives_zero_error() {
        let cfg = resolve("experiment = \"lcu-propagation\"\nn_instances = 1\neps_grid = [0.0]");
        let rows = run_lcu_propagation(&cfg).unwrap();
        assert!(rows[0].spectral_error < 1e-12);
    }

    #[test]
    fn sweep_tallies_match_resources() {
        let cfg = resolve(
            "experiment = \"trotter-vs-sparsto\"\nn_qubits = 3\nk = 2\nl_list = [12]\ndist_params = [2.0]\n\
             n_instances = 1\nr_grid = [2, 4]\nn_grid = [20]\nsparsto_r_grid = [3]\nn_realizations = 3",
        );
        let rows = run_method_sweep(&cfg).unwrap();
        assert_eq!(rows.len(), 2 + 2 + 1 + 2);
        let inst = &sample_instances(&cfg, &[cfg.k]).unwrap()[0];
        for r in &rows {
            let expected: ExpectedTally = match r.method.as_str() {
                "trotter1" | "trotter2" => {
                    let p = TrotterOrder::try_from(r.order.unwrap() as u8).unwrap();
                    resources::trotter_cost(&inst.h, r.steps.unwrap(), p, cfg.synthesis_eps, &cfg.synthesis)
                        .unwrap()
                        .into()
                }
                "qdrift" => resources::qdrift_cost(&inst.h, r.steps.unwrap(), cfg.synthesis_eps, &cfg.synthesis).unwrap(),
                "sparsto" => {
                    let plan = dynamics::make_sparse_plan(&inst.h, r.tau.unwrap()).unwrap();
                    resources::sparsto_cost(&inst.h, &plan, r.steps.unwrap(), cfg.synthesis_eps, &cfg.synthesis)
                        .unwrap()
                }
                m => panic!("unexpected method {m}"),
            };
            assert_eq!(r.tally(), expected, "{}", r.method);
            assert_eq!(r.instance_seed, inst.seed);
        }
    }

    #[test]
    fn output_is_independent_of_worker_count() {
        let text = "experiment = \"trotter-vs-sparsto\"\nn_qubits = 3\nk = 2\nl_list = [10]\n\
                    dist_params = [2.0]\nn_instances = 2\nr_grid = [1, 2]\nn_grid = [10]\nsparsto_r_grid = [2]\n\
                    n_realizations = 2";
        let cfg = resolve(text);
        let meta = cfg.metadata();
        let a = run(&cfg, Some(1)).unwrap().to_csv(&meta).unwrap();
        let b = run(&cfg, Some(4)).unwrap().to_csv(&meta).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn constant_coefficients_fit_zero_variance() {
        let h = Hamiltonian::from_pairs(2, &[(0.5, "XI"), (0.5, "IZ"), (-0.5, "ZZ")]).unwrap();
        let f = fit_hamiltonian("const", &h, None).unwrap();
        assert!(f.sigma2.abs() < 1e-24);
        assert_eq!(f.n_terms, 3);
    }
}
