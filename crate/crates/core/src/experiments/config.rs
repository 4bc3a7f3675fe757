//! Flat key/value experiment configuration.
//!
//! The file is TOML restricted to top-level keys. Keys left out take
//! per-experiment defaults; every key can be overridden with `key=value`
//! where the value uses TOML syntax (bare words are read as strings).

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::blockenc::{EmptyDraw, SparseEncodingOptions, SparseNormalization};
use crate::dynamics::{TrotterOrder, QDRIFT_BOUND_CONSTANT};
use crate::ensembles::{CoefficientDistribution, WeightMode};
use crate::error::{Error, Result};
use crate::qsvt::{QsvtBackend, SparseDrawMode};
use crate::resources::{SelectModel, SynthesisModel};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    LcuPropagation,
    QsvtPropagation,
    TrotterVsSparsto,
    QsvtVsSparse,
    LocalitySweep,
    Crossover,
    FitCoefficients,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::LcuPropagation => "lcu-propagation",
            Self::QsvtPropagation => "qsvt-propagation",
            Self::TrotterVsSparsto => "trotter-vs-sparsto",
            Self::QsvtVsSparse => "qsvt-vs-sparse",
            Self::LocalitySweep => "locality-sweep",
            Self::Crossover => "crossover",
            Self::FitCoefficients => "fit-coefficients",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistributionKind {
    Lognormal,
    Pareto,
}

impl DistributionKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Lognormal => "lognormal",
            Self::Pareto => "pareto",
        }
    }

    /// `param` is σ² for the lognormal and the shape `a` for Pareto.
    pub fn with_param(self, param: f64) -> Result<CoefficientDistribution> {
        match self {
            Self::Lognormal => CoefficientDistribution::lognormal(param),
            Self::Pareto => CoefficientDistribution::pareto(param),
        }
    }
}

/// Simulation method in a sweep.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Trotter1,
    Trotter2,
    Qdrift,
    Sparsto,
    Qsvt,
    SparseQsvt,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Self::Trotter1 => "trotter1",
            Self::Trotter2 => "trotter2",
            Self::Qdrift => "qdrift",
            Self::Sparsto => "sparsto",
            Self::Qsvt => "qsvt",
            Self::SparseQsvt => "sparse-qsvt",
        }
    }

    pub fn trotter_order(self) -> Option<TrotterOrder> {
        match self {
            Self::Trotter1 => Some(TrotterOrder::First),
            Self::Trotter2 => Some(TrotterOrder::Second),
            _ => None,
        }
    }

    pub fn is_randomized(self) -> bool {
        matches!(self, Self::Qdrift | Self::Sparsto | Self::SparseQsvt)
    }
}

/// Raw configuration as written; `None` means "use the experiment default".
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Option<ExperimentKind>,
    pub n_qubits: Option<usize>,
    pub k: Option<usize>,
    pub mode: Option<WeightMode>,
    pub k_list: Option<Vec<usize>>,
    pub l_list: Option<Vec<usize>>,
    pub distribution: Option<DistributionKind>,
    pub dist_params: Option<Vec<f64>>,
    pub random_signs: Option<bool>,
    /// Evolution time in units of `1/λ`.
    pub t_multiplier: Option<f64>,
    pub thresholds: Option<Vec<f64>>,
    pub methods: Option<Vec<Method>>,
    pub r_grid: Option<Vec<usize>>,
    pub n_grid: Option<Vec<usize>>,
    pub sparsto_r_grid: Option<Vec<usize>>,
    pub d_grid: Option<Vec<usize>>,
    /// `ε_prep` or `ε_sel` grid for the propagation experiments.
    pub eps_grid: Option<Vec<f64>>,
    pub n_instances: Option<usize>,
    pub n_realizations: Option<usize>,
    pub base_seed: Option<u64>,
    pub synthesis_eps: Option<f64>,
    pub synthesis_slope: Option<f64>,
    pub synthesis_offset: Option<f64>,
    pub synthesis_table: Option<Vec<(f64, u64)>>,
    pub select_tree_toffolis_per_node: Option<f64>,
    pub select_fanout_cnots_per_site: Option<f64>,
    pub select_cnots_per_application: Option<f64>,
    pub qdrift_constant: Option<f64>,
    pub sparse_normalization: Option<SparseNormalization>,
    pub sparse_draw_mode: Option<SparseDrawMode>,
    pub qsvt_backend: Option<QsvtBackend>,
    pub empty_draw: Option<EmptyDraw>,
    pub crossover_tau: Option<f64>,
    /// Fit the Pareto tail only above this magnitude quantile.
    pub tail_quantile: Option<f64>,
    pub term_list: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub record_wall_time: Option<bool>,
}

fn parse_value(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match toml::Table::from_str(&doc) {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.to_string())),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        Self::from_toml_with_overrides::<&str>(text, &[])
    }

    /// Parses `text` and applies `key=value` overrides in order.
    pub fn from_toml_with_overrides<S: AsRef<str>>(text: &str, overrides: &[S]) -> Result<Self> {
        let mut table = toml::Table::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if let Some((k, _)) = table.iter().find(|(_, v)| v.is_table()) {
            return Err(Error::Config(format!("nested table `{k}` not allowed; keys are flat")));
        }
        for o in overrides {
            let o = o.as_ref();
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override `{o}` is not key=value")))?;
            table.insert(k.trim().to_string(), parse_value(v.trim()));
        }
        let cfg: Self = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.resolve()?;
        Ok(cfg)
    }

    pub fn load<S: AsRef<str>>(path: &Path, overrides: &[S]) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_with_overrides(&text, overrides)
    }

    /// Concrete settings with defaults filled in and validated.
    pub fn resolve(&self) -> Result<Resolved> {
        let kind = self
            .experiment
            .ok_or_else(|| Error::Config("missing `experiment`".into()))?;
        let four_qubit = matches!(kind, ExperimentKind::LcuPropagation | ExperimentKind::QsvtPropagation);
        let n_qubits = self.n_qubits.unwrap_or(if four_qubit { 4 } else { 8 });
        let default_k = if four_qubit { n_qubits } else { 6.min(n_qubits) };
        let (default_dist, default_params) = if four_qubit || kind == ExperimentKind::QsvtVsSparse {
            (DistributionKind::Pareto, vec![0.9])
        } else {
            (DistributionKind::Lognormal, vec![2.0, 6.0])
        };
        let default_t = if kind == ExperimentKind::QsvtPropagation { 50.0 } else { 10.0 };
        let default_methods = match kind {
            ExperimentKind::QsvtVsSparse => vec![Method::Qsvt, Method::SparseQsvt],
            ExperimentKind::Crossover => vec![Method::Trotter2, Method::Sparsto],
            _ => vec![Method::Trotter1, Method::Trotter2, Method::Qdrift, Method::Sparsto],
        };
        let default_eps = match kind {
            ExperimentKind::QsvtPropagation => vec![1e-5, 1e-4, 1e-3, 1e-2],
            _ => (0..10).map(|i| 10f64.powf(-4.0 + i as f64 / 3.0)).collect(),
        };
        let t_multiplier = self.t_multiplier.unwrap_or(default_t);
        let default_d = if kind == ExperimentKind::QsvtPropagation {
            let start = t_multiplier.ceil() as usize;
            (start..=start + 60).collect()
        } else {
            (1..=20).map(|i| 5 * i).collect()
        };
        let synthesis = SynthesisModel {
            slope: self.synthesis_slope.unwrap_or(3.0),
            offset: self.synthesis_offset.unwrap_or(0.0),
            table: self.synthesis_table.clone().unwrap_or_default(),
        };
        let defaults = SelectModel::default();
        let select = SelectModel {
            tree_toffolis_per_node: self.select_tree_toffolis_per_node.unwrap_or(defaults.tree_toffolis_per_node),
            fanout_cnots_per_site: self.select_fanout_cnots_per_site.unwrap_or(defaults.fanout_cnots_per_site),
            cnots_per_application: self.select_cnots_per_application.unwrap_or(defaults.cnots_per_application),
        };
        let r = Resolved {
            kind,
            n_qubits,
            k: self.k.unwrap_or(default_k),
            mode: self.mode.unwrap_or(if kind == ExperimentKind::LocalitySweep {
                WeightMode::ExactlyK
            } else {
                WeightMode::UpToK
            }),
            k_list: self.k_list.clone().unwrap_or_else(|| {
                if kind == ExperimentKind::LocalitySweep {
                    vec![2, 3, 4, 5, 6]
                } else {
                    vec![self.k.unwrap_or(default_k)]
                }
            }),
            l_list: self.l_list.clone().unwrap_or_else(|| {
                if four_qubit {
                    vec![15]
                } else if kind == ExperimentKind::LocalitySweep {
                    vec![1000]
                } else {
                    vec![100, 1000, 10000]
                }
            }),
            distribution: self.distribution.unwrap_or(default_dist),
            dist_params: self.dist_params.clone().unwrap_or(default_params),
            random_signs: self.random_signs.unwrap_or(true),
            t_multiplier,
            thresholds: self.thresholds.clone().unwrap_or_else(|| vec![0.3, 0.9]),
            methods: self.methods.clone().unwrap_or(default_methods),
            r_grid: self.r_grid.clone().unwrap_or_else(|| (0..10).map(|i| 1usize << i).collect()),
            n_grid: self
                .n_grid
                .clone()
                .unwrap_or_else(|| vec![100, 300, 1000, 3000, 10_000, 30_000]),
            sparsto_r_grid: self
                .sparsto_r_grid
                .clone()
                .unwrap_or_else(|| vec![1, 3, 10, 30, 100, 300]),
            d_grid: self.d_grid.clone().unwrap_or(default_d),
            eps_grid: self.eps_grid.clone().unwrap_or(default_eps),
            n_instances: self.n_instances.unwrap_or(if kind == ExperimentKind::QsvtPropagation { 1 } else { 10 }),
            n_realizations: self.n_realizations.unwrap_or(10),
            base_seed: self.base_seed.unwrap_or(0),
            synthesis_eps: self.synthesis_eps.unwrap_or(1e-3),
            synthesis,
            select,
            qdrift_constant: self.qdrift_constant.unwrap_or(QDRIFT_BOUND_CONSTANT),
            sparse: SparseEncodingOptions {
                normalization: self.sparse_normalization.unwrap_or_default(),
                empty_draw: self.empty_draw.unwrap_or_default(),
            },
            sparse_draw_mode: self.sparse_draw_mode.unwrap_or_default(),
            qsvt_backend: self.qsvt_backend.unwrap_or(if four_qubit {
                QsvtBackend::Walk
            } else {
                QsvtBackend::Eigenbasis
            }),
            crossover_tau: self.crossover_tau.unwrap_or(0.9),
            tail_quantile: self.tail_quantile,
            term_list: self.term_list.clone(),
            output: self.output.clone(),
            record_wall_time: self.record_wall_time.unwrap_or(false),
        };
        r.validate()?;
        Ok(r)
    }
}

/// Fully specified experiment settings.
#[derive(Clone, Debug, PartialEq)]
pub struct Resolved {
    pub kind: ExperimentKind,
    pub n_qubits: usize,
    pub k: usize,
    pub mode: WeightMode,
    pub k_list: Vec<usize>,
    pub l_list: Vec<usize>,
    pub distribution: DistributionKind,
    pub dist_params: Vec<f64>,
    pub random_signs: bool,
    pub t_multiplier: f64,
    pub thresholds: Vec<f64>,
    pub methods: Vec<Method>,
    pub r_grid: Vec<usize>,
    pub n_grid: Vec<usize>,
    pub sparsto_r_grid: Vec<usize>,
    pub d_grid: Vec<usize>,
    pub eps_grid: Vec<f64>,
    pub n_instances: usize,
    pub n_realizations: usize,
    pub base_seed: u64,
    pub synthesis_eps: f64,
    pub synthesis: SynthesisModel,
    pub select: SelectModel,
    pub qdrift_constant: f64,
    pub sparse: SparseEncodingOptions,
    pub sparse_draw_mode: SparseDrawMode,
    pub qsvt_backend: QsvtBackend,
    pub crossover_tau: f64,
    pub tail_quantile: Option<f64>,
    pub term_list: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub record_wall_time: bool,
}

fn nonempty<T>(name: &str, v: &[T]) -> Result<()> {
    if v.is_empty() {
        return Err(Error::Config(format!("`{name}` must not be empty")));
    }
    Ok(())
}

fn positive<T: PartialOrd + Default + Copy + fmt::Display>(name: &str, v: &[T]) -> Result<()> {
    if let Some(x) = v.iter().find(|x| !(**x > T::default())) {
        return Err(Error::Config(format!("`{name}` entries must be positive (got {x})")));
    }
    Ok(())
}

impl Resolved {
    fn validate(&self) -> Result<()> {
        let cfg = |e: Error| Error::Config(e.to_string());
        if let Some(q) = self.tail_quantile {
            if !(0.0..1.0).contains(&q) {
                return Err(Error::Config(format!("`tail_quantile` = {q} outside [0, 1)")));
            }
        }
        if self.kind == ExperimentKind::FitCoefficients {
            if self.term_list.is_none() {
                nonempty("l_list", &self.l_list)?;
                nonempty("dist_params", &self.dist_params)?;
            }
            return Ok(());
        }
        if self.n_qubits == 0 || self.n_qubits > crate::pauli::DENSE_QUBIT_LIMIT {
            return Err(Error::Config(format!(
                "`n_qubits` = {} outside 1..={}",
                self.n_qubits,
                crate::pauli::DENSE_QUBIT_LIMIT
            )));
        }
        for (name, v) in [("l_list", &self.l_list), ("k_list", &self.k_list)] {
            nonempty(name, v)?;
            positive(name, v)?;
        }
        for (name, v) in [
            ("r_grid", &self.r_grid),
            ("n_grid", &self.n_grid),
            ("sparsto_r_grid", &self.sparsto_r_grid),
            ("d_grid", &self.d_grid),
        ] {
            nonempty(name, v)?;
            positive(name, v)?;
        }
        nonempty("dist_params", &self.dist_params)?;
        nonempty("thresholds", &self.thresholds)?;
        nonempty("methods", &self.methods)?;
        nonempty("eps_grid", &self.eps_grid)?;
        if self.n_instances == 0 || self.n_realizations == 0 {
            return Err(Error::Config("`n_instances` and `n_realizations` must be >= 1".into()));
        }
        for &p in &self.dist_params {
            self.distribution.with_param(p).map_err(cfg)?;
        }
        if let Some(tau) = self.thresholds.iter().find(|t| !(**t > 0.0 && **t <= 1.0)) {
            return Err(Error::Config(format!("threshold {tau} outside (0, 1]")));
        }
        if !(self.crossover_tau > 0.0 && self.crossover_tau <= 1.0) {
            return Err(Error::Config(format!("`crossover_tau` = {} outside (0, 1]", self.crossover_tau)));
        }
        if let Some(e) = self.eps_grid.iter().find(|e| !(**e >= 0.0 && **e <= 2.0)) {
            return Err(Error::Config(format!("perturbation size {e} outside [0, 2]")));
        }
        if !(self.t_multiplier >= 0.0) || !self.t_multiplier.is_finite() {
            return Err(Error::Config(format!("`t_multiplier` = {} must be finite and >= 0", self.t_multiplier)));
        }
        if !(self.synthesis_eps > 0.0 && self.synthesis_eps < 1.0) {
            return Err(Error::Config(format!("`synthesis_eps` = {} outside (0, 1)", self.synthesis_eps)));
        }
        self.synthesis.validate().map_err(cfg)?;
        if self.kind == ExperimentKind::Crossover
            && !(self.methods.contains(&Method::Trotter2) && self.methods.contains(&Method::Sparsto))
        {
            return Err(Error::Config("crossover needs trotter2 and sparsto among `methods`".into()));
        }
        for &k in &self.k_list {
            let probe = crate::ensembles::EnsembleSpec::new(
                self.n_qubits,
                *self.l_list.iter().max().unwrap(),
                k,
                self.mode,
                self.distribution.with_param(self.dist_params[0]).map_err(cfg)?,
                0,
            );
            probe.validate().map_err(cfg)?;
        }
        Ok(())
    }

    /// `(key, value)` pairs for the CSV metadata header.
    pub fn metadata(&self) -> Vec<(&'static str, String)> {
        let list = |v: &[usize]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
        let flist = |v: &[f64]| v.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(" ");
        let mut meta = vec![
            ("experiment", self.kind.name().to_string()),
            ("n_qubits", self.n_qubits.to_string()),
            ("k_list", list(&self.k_list)),
            ("mode", format!("{:?}", self.mode)),
            ("l_list", list(&self.l_list)),
            ("distribution", self.distribution.name().to_string()),
            ("dist_params", flist(&self.dist_params)),
            ("t_multiplier", format!("{:e}", self.t_multiplier)),
            ("eps_grid", flist(&self.eps_grid)),
            ("n_instances", self.n_instances.to_string()),
            ("n_realizations", self.n_realizations.to_string()),
            ("base_seed", self.base_seed.to_string()),
            ("synthesis_eps", format!("{:e}", self.synthesis_eps)),
            ("synthesis_slope", format!("{:e}", self.synthesis.slope)),
            ("synthesis_offset", format!("{:e}", self.synthesis.offset)),
        ];
        if let Some(q) = self.tail_quantile {
            meta.push(("tail_quantile", format!("{q:e}")));
        }
        meta
    }
}
