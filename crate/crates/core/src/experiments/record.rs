//! Output rows and CSV emission.

use std::io::Write;

use crate::error::{Error, Result};
use crate::resources::ExpectedTally;

/// 17 significant digits, so every `f64` round-trips.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

fn fmt_opt_usize(x: Option<usize>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

pub trait CsvRecord {
    fn header() -> &'static [&'static str];
    fn fields(&self) -> Vec<String>;
}

/// One measured point of a sweep.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SweepRecord {
    pub experiment: String,
    pub n_qubits: usize,
    pub k: usize,
    pub n_terms: usize,
    pub distribution: String,
    pub dist_param: f64,
    pub instance: usize,
    pub instance_seed: u64,
    pub method: String,
    pub order: Option<usize>,
    pub tau: Option<f64>,
    /// r, N or d depending on the method.
    pub steps: Option<usize>,
    /// Oracle perturbation size for the propagation experiments.
    pub eps_param: Option<f64>,
    pub realizations: usize,
    pub spectral_error: f64,
    /// Standard error of the mean over realizations.
    pub error_sem: Option<f64>,
    pub total_error: Option<f64>,
    pub eps_poly: Option<f64>,
    pub bound: Option<f64>,
    pub mu: Option<f64>,
    pub t_count: f64,
    pub cnot_count: f64,
    pub rz_count: f64,
    pub clifford_1q: f64,
    pub ancillas: f64,
    pub wall_time: f64,
}

impl SweepRecord {
    pub fn set_tally(&mut self, t: &ExpectedTally) {
        self.t_count = t.t_count;
        self.cnot_count = t.cnot_count;
        self.rz_count = t.rz_count;
        self.clifford_1q = t.clifford_1q;
        self.ancillas = t.ancillas;
    }

    pub fn tally(&self) -> ExpectedTally {
        ExpectedTally {
            t_count: self.t_count,
            cnot_count: self.cnot_count,
            rz_count: self.rz_count,
            clifford_1q: self.clifford_1q,
            ancillas: self.ancillas,
        }
    }
}

impl CsvRecord for SweepRecord {
    fn header() -> &'static [&'static str] {
        &[
            "experiment",
            "n_qubits",
            "k",
            "n_terms",
            "distribution",
            "dist_param",
            "instance",
            "instance_seed",
            "method",
            "order",
            "tau",
            "steps",
            "eps_param",
            "realizations",
            "spectral_error",
            "error_sem",
            "total_error",
            "eps_poly",
            "bound",
            "mu",
            "t_count",
            "cnot_count",
            "rz_count",
            "clifford_1q",
            "ancillas",
            "wall_time",
        ]
    }

    fn fields(&self) -> Vec<String> {
        vec![
            self.experiment.clone(),
            self.n_qubits.to_string(),
            self.k.to_string(),
            self.n_terms.to_string(),
            self.distribution.clone(),
            fmt_f64(self.dist_param),
            self.instance.to_string(),
            self.instance_seed.to_string(),
            self.method.clone(),
            fmt_opt_usize(self.order),
            fmt_opt(self.tau),
            fmt_opt_usize(self.steps),
            fmt_opt(self.eps_param),
            self.realizations.to_string(),
            fmt_f64(self.spectral_error),
            fmt_opt(self.error_sem),
            fmt_opt(self.total_error),
            fmt_opt(self.eps_poly),
            fmt_opt(self.bound),
            fmt_opt(self.mu),
            fmt_f64(self.t_count),
            fmt_f64(self.cnot_count),
            fmt_f64(self.rz_count),
            fmt_f64(self.clifford_1q),
            fmt_f64(self.ancillas),
            fmt_f64(self.wall_time),
        ]
    }
}

/// Fitted coefficient statistics of one Hamiltonian.
#[derive(Clone, Debug, PartialEq)]
pub struct FitRecord {
    pub source: String,
    pub n_terms: usize,
    pub n_qubits: usize,
    pub sigma2: f64,
    pub mu_log: f64,
    pub pareto_a: Option<f64>,
}

impl CsvRecord for FitRecord {
    fn header() -> &'static [&'static str] {
        &["source", "n_terms", "n_qubits", "sigma2", "mu_log", "pareto_a"]
    }

    fn fields(&self) -> Vec<String> {
        vec![
            self.source.clone(),
            self.n_terms.to_string(),
            self.n_qubits.to_string(),
            fmt_f64(self.sigma2),
            fmt_f64(self.mu_log),
            fmt_opt(self.pareto_a),
        ]
    }
}

/// `# key = value` metadata lines, a header row, then one row per record.
pub fn write_csv<W: Write, R: CsvRecord>(mut out: W, metadata: &[(&str, String)], records: &[R]) -> Result<()> {
    for (k, v) in metadata {
        writeln!(out, "# {k} = {v}")?;
    }
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(R::header()).map_err(csv_err)?;
    for r in records {
        w.write_record(r.fields()).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn csv_string<R: CsvRecord>(metadata: &[(&str, String)], records: &[R]) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(&mut buf, metadata, records)?;
    String::from_utf8(buf).map_err(|e| Error::Io(std::io::Error::other(e)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0 / 3.0, 1e-300, 6.02214076e23, -2.5] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(fmt_f64(f64::NAN), "nan");
    }

    #[test]
    fn csv_layout() {
        let rec = SweepRecord {
            experiment: "x".into(),
            method: "trotter2".into(),
            order: Some(2),
            spectral_error: 0.5,
            ..Default::default()
        };
        let s = csv_string(&[("seed", "3".into())], &[rec.clone(), rec]).unwrap();
        let lines: Vec<&str> = s.split('\n').collect();
        assert_eq!(lines[0], "# seed = 3");
        assert_eq!(lines[1].split(',').count(), SweepRecord::header().len());
        assert!(lines[1].starts_with("experiment,n_qubits"));
        assert_eq!(lines.len(), 5);
        assert_eq!(lines[4], "");
        assert!(!s.contains('\r'));
        assert!(lines[2].contains(",trotter2,2,,"));
    }
}
