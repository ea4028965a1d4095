//! Batch experiment harness: seeded trial sweeps over the TDS pipelines,
//! JSON-lines reports with an aggregate footer, and CSV table emission.
//!
//! Trials are independent and derive their randomness from `seed + i`, so a
//! sweep is reproducible from its config alone. A failing trial records its
//! error and the sweep continues; reports are written atomically (temp file
//! plus rename).

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boundary::{tds_intersections_run, IntersectionsPipelineConfig};
use crate::chow::{tds_chow_run, ChowTesterConfig, TDSOutcome};
use crate::concepts::Concept;
use crate::data::Verdict;
use crate::distributions::{label_with, sample, DistributionSpec};
use crate::error::{Error, Result};
use crate::grid::{tds_subspace_junta_run, JuntaPipelineConfig, NeighborhoodSpec};
use crate::rng::RngSpec;
use crate::training::{zero_one_error, TrainerSpec};

/// Which decoupled pipeline a sweep drives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "pipeline", rename_all = "snake_case")]
pub enum TesterSpec {
    Chow { config: ChowTesterConfig },
    Junta { config: JuntaPipelineConfig, neighborhood: NeighborhoodSpec },
    Intersections { config: IntersectionsPipelineConfig },
}

/// One experiment: a planted concept, train/test marginals, a trainer and a
/// tester, repeated over seeded trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub train_distribution: DistributionSpec,
    pub test_distribution: DistributionSpec,
    pub concept: Concept,
    #[serde(default)]
    pub noise_rate: f64,
    pub m_train: usize,
    pub m_test: usize,
    pub trainer: TrainerSpec,
    pub tester: TesterSpec,
    pub trials: usize,
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be >= 1".into()));
        }
        if self.m_train < 10 || self.m_test == 0 {
            return Err(Error::Config("m_train must be >= 10 and m_test >= 1".into()));
        }
        self.train_distribution.validate()?;
        self.test_distribution.validate()?;
        if self.train_distribution.dim() != self.test_distribution.dim() {
            return Err(Error::Config("train/test distributions disagree on dimension".into()));
        }
        Ok(())
    }
}

/// Per-trial outcome.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub verdict: Option<Verdict>,
    pub err_train: Option<f64>,
    /// Disagreement of the released hypothesis with the planted concept on
    /// the test sample; present only on accepted trials.
    pub err_test: Option<f64>,
    pub certified_bound: Option<f64>,
    pub wall_time: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentAggregate {
    pub trials: usize,
    pub completed: usize,
    pub accept_rate: f64,
    /// Max over accepted trials of `err_test − certified_bound`.
    pub max_err_minus_bound: Option<f64>,
    pub mean_err_train: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub name: String,
    pub records: Vec<TrialRecord>,
    pub aggregate: ExperimentAggregate,
}

fn run_trial(cfg: &ExperimentConfig, trial: usize) -> Result<(TDSOutcome, Option<f64>)> {
    let seed = cfg.seed + trial as u64;
    let rng = RngSpec::new(seed, 0);

    let train_points = sample(&cfg.train_distribution, cfg.m_train, rng.child(1))?;
    let train_data = label_with(&cfg.concept, &train_points, cfg.noise_rate, rng.child(2))?;
    let test_points = sample(&cfg.test_distribution, cfg.m_test, rng.child(3))?;

    let outcome = match &cfg.tester {
        TesterSpec::Chow { config } => {
            tds_chow_run(&train_data, &test_points, &cfg.trainer, config, rng.child(4))?
        }
        TesterSpec::Junta { config, neighborhood } => tds_subspace_junta_run(
            &train_data,
            &test_points,
            &cfg.trainer,
            config,
            neighborhood,
            rng.child(4),
        )?,
        TesterSpec::Intersections { config } => {
            tds_intersections_run(&train_data, &test_points, &cfg.trainer, config, rng.child(4))?
        }
    };

    // Ground truth is known here, so measure the shipped hypothesis against
    // the planted concept on the test sample.
    let err_test = match &outcome.hypothesis {
        Some(h) => {
            let truth_labels = label_with(&cfg.concept, &test_points, 0.0, rng.child(5))?;
            Some(zero_one_error(h, &truth_labels)?)
        }
        None => None,
    };
    Ok((outcome, err_test))
}

/// Execute all trials (in parallel) and assemble the report in trial order.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let records: Vec<TrialRecord> = (0..cfg.trials)
        .into_par_iter()
        .map(|trial| {
            let started = std::time::Instant::now();
            match run_trial(cfg, trial) {
                Ok((outcome, err_test)) => TrialRecord {
                    trial,
                    seed: cfg.seed + trial as u64,
                    verdict: Some(outcome.verdict),
                    err_train: Some(outcome.training_error),
                    err_test,
                    certified_bound: Some(outcome.certified_error_bound),
                    wall_time: started.elapsed().as_secs_f64(),
                    error: None,
                },
                Err(e) => TrialRecord {
                    trial,
                    seed: cfg.seed + trial as u64,
                    verdict: None,
                    err_train: None,
                    err_test: None,
                    certified_bound: None,
                    wall_time: started.elapsed().as_secs_f64(),
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();

    let aggregate = aggregate(&records);
    Ok(ExperimentReport { name: cfg.name.clone(), records, aggregate })
}

pub fn aggregate(records: &[TrialRecord]) -> ExperimentAggregate {
    let completed = records.iter().filter(|r| r.error.is_none()).count();
    let accepted = records
        .iter()
        .filter(|r| r.verdict.as_ref().map(|v| v.accepted).unwrap_or(false))
        .count();
    let max_excess = records
        .iter()
        .filter_map(|r| match (r.err_test, r.certified_bound) {
            (Some(e), Some(b)) => Some(e - b),
            _ => None,
        })
        .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))));
    let errs: Vec<f64> = records.iter().filter_map(|r| r.err_train).collect();
    ExperimentAggregate {
        trials: records.len(),
        completed,
        accept_rate: if completed > 0 { accepted as f64 / completed as f64 } else { 0.0 },
        max_err_minus_bound: max_excess,
        mean_err_train: if errs.is_empty() {
            None
        } else {
            Some(errs.iter().sum::<f64>() / errs.len() as f64)
        },
    }
}

/// Serialize as JSON lines: one record per line, then an aggregate footer.
pub fn report_to_jsonl(report: &ExperimentReport) -> Result<String> {
    let mut out = String::new();
    for r in &report.records {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    #[derive(Serialize)]
    struct Footer<'a> {
        name: &'a str,
        aggregate: &'a ExperimentAggregate,
    }
    out.push_str(&serde_json::to_string(&Footer { name: &report.name, aggregate: &report.aggregate })?);
    out.push('\n');
    Ok(out)
}

/// Parse a JSON-lines report (records followed by one aggregate footer).
pub fn report_from_jsonl(text: &str) -> Result<ExperimentReport> {
    let mut records = Vec::new();
    let mut footer: Option<(String, ExperimentAggregate)> = None;
    #[derive(Deserialize)]
    struct Footer {
        name: String,
        aggregate: ExperimentAggregate,
    }
    for line in text.lines() {
        if line.trim().is_empty() {
            continue;
        }
        if let Ok(f) = serde_json::from_str::<Footer>(line) {
            footer = Some((f.name, f.aggregate));
            continue;
        }
        let rec: TrialRecord = serde_json::from_str(line)
            .map_err(|e| Error::Config(format!("report line does not match the trial schema: {e}")))?;
        records.push(rec);
    }
    let (name, aggregate) =
        footer.ok_or_else(|| Error::Config("report is missing its aggregate footer".into()))?;
    Ok(ExperimentReport { name, records, aggregate })
}

/// Atomic write: temp file in the same directory, then rename.
pub fn write_report(report: &ExperimentReport, path: &Path) -> Result<()> {
    let text = report_to_jsonl(report)?;
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    std::fs::create_dir_all(dir)?;
    let tmp = dir.join(format!(
        ".{}.tmp",
        path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "report".into())
    ));
    std::fs::write(&tmp, text)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// One CSV row per report aggregate, stable column order.
pub fn emit_table(reports: &[ExperimentReport]) -> String {
    let mut out = String::from(
        "name,trials,completed,accept_rate,mean_err_train,max_err_minus_bound\n",
    );
    for r in reports {
        let fmt_opt = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.name,
            r.aggregate.trials,
            r.aggregate.completed,
            r.aggregate.accept_rate,
            fmt_opt(r.aggregate.mean_err_train),
            fmt_opt(r.aggregate.max_err_minus_bound),
        ));
    }
    out
}
