//! Metrics, grouped summaries and the CSV record format.

use std::collections::BTreeMap;
use std::io;

use serde::{Deserialize, Serialize};

use super::{PipelineError, RunRecord, Technique};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub mean_tvd: f64,
    /// Sample standard deviation (n - 1).
    pub std_tvd: f64,
    /// `std_tvd / mean_tvd`; 0 for a single run or a zero mean.
    pub cov: f64,
    pub n_runs: usize,
}

pub fn metrics_summary(tvds: &[f64]) -> Result<MetricsSummary, PipelineError> {
    if tvds.is_empty() {
        return Err(PipelineError::Report("no runs to summarize".into()));
    }
    let n = tvds.len() as f64;
    let mean = tvds.iter().sum::<f64>() / n;
    let std = if tvds.len() > 1 {
        (tvds.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Ok(MetricsSummary {
        mean_tvd: mean,
        std_tvd: std,
        cov: if mean > 0.0 { std / mean } else { 0.0 },
        n_runs: tvds.len(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub circuit: String,
    pub technique: Technique,
    #[serde(flatten)]
    pub metrics: MetricsSummary,
}

/// One summary per (circuit, technique); circuits in order of first
/// appearance, techniques in their canonical order.
pub fn summarize(records: &[RunRecord]) -> Result<Vec<GroupSummary>, PipelineError> {
    let mut circuits: Vec<&str> = Vec::new();
    let mut groups: BTreeMap<(usize, Technique), Vec<f64>> = BTreeMap::new();
    for r in records {
        let ci = match circuits.iter().position(|c| *c == r.circuit) {
            Some(i) => i,
            None => {
                circuits.push(&r.circuit);
                circuits.len() - 1
            }
        };
        groups.entry((ci, r.technique)).or_default().push(r.tvd);
    }
    groups
        .into_iter()
        .map(|((ci, technique), tvds)| {
            Ok(GroupSummary {
                circuit: circuits[ci].to_string(),
                technique,
                metrics: metrics_summary(&tvds)?,
            })
        })
        .collect()
}

/// ANCHOR against one baseline on one circuit; reductions are
/// `(baseline - anchor) / baseline`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Reduction {
    pub circuit: String,
    pub baseline: Technique,
    pub mean_tvd_reduction: f64,
    pub cov_reduction: f64,
}

fn rel(base: f64, anchor: f64) -> f64 {
    if base > 0.0 {
        (base - anchor) / base
    } else {
        0.0
    }
}

pub fn reductions(groups: &[GroupSummary]) -> Vec<Reduction> {
    let mut out = Vec::new();
    for a in groups.iter().filter(|g| g.technique == Technique::Anchor) {
        for b in groups
            .iter()
            .filter(|g| g.circuit == a.circuit && g.technique != Technique::Anchor)
        {
            out.push(Reduction {
                circuit: a.circuit.clone(),
                baseline: b.technique,
                mean_tvd_reduction: rel(b.metrics.mean_tvd, a.metrics.mean_tvd),
                cov_reduction: rel(b.metrics.cov, a.metrics.cov),
            });
        }
    }
    out
}

/// Aggregate of [`Reduction`]s against one baseline over all circuits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineComparison {
    pub baseline: Technique,
    pub median_cov_reduction: f64,
    pub median_mean_tvd_reduction: f64,
    /// Fraction of circuits where ANCHOR's CoV is strictly lower.
    pub anchor_lower_cov_fraction: f64,
    pub circuits: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryReport {
    pub groups: Vec<GroupSummary>,
    pub reductions: Vec<Reduction>,
    pub comparisons: Vec<BaselineComparison>,
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

impl SummaryReport {
    pub fn from_records(records: &[RunRecord]) -> Result<Self, PipelineError> {
        let groups = summarize(records)?;
        let reductions = reductions(&groups);
        let mut by_base: BTreeMap<Technique, Vec<&Reduction>> = BTreeMap::new();
        for r in &reductions {
            by_base.entry(r.baseline).or_default().push(r);
        }
        let comparisons = by_base
            .into_iter()
            .map(|(baseline, rs)| {
                let cov: Vec<f64> = rs.iter().map(|r| r.cov_reduction).collect();
                let mean: Vec<f64> = rs.iter().map(|r| r.mean_tvd_reduction).collect();
                BaselineComparison {
                    baseline,
                    median_cov_reduction: median(&cov),
                    median_mean_tvd_reduction: median(&mean),
                    anchor_lower_cov_fraction: cov.iter().filter(|&&c| c > 0.0).count() as f64
                        / rs.len() as f64,
                    circuits: rs.len(),
                }
            })
            .collect();
        Ok(Self {
            groups,
            reductions,
            comparisons,
        })
    }

    pub fn group(&self, circuit: &str, technique: Technique) -> Option<&MetricsSummary> {
        self.groups
            .iter()
            .find(|g| g.circuit == circuit && g.technique == technique)
            .map(|g| &g.metrics)
    }

    pub fn comparison(&self, baseline: Technique) -> Option<&BaselineComparison> {
        self.comparisons.iter().find(|c| c.baseline == baseline)
    }
}

#[derive(Serialize, Deserialize)]
struct CsvRow {
    technique: Technique,
    circuit: String,
    device: String,
    day: i64,
    tvd_pct: f64,
    wall_time_s: Option<f64>,
    seed: u64,
}

/// Writes `technique,circuit,device,day,tvd_pct,wall_time_s,seed`.
/// `wall_time_s` is left empty unless `with_wall_time` is set.
pub fn write_records_csv<W: io::Write>(
    out: W,
    records: &[RunRecord],
    with_wall_time: bool,
) -> Result<(), PipelineError> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(CsvRow {
            technique: r.technique,
            circuit: r.circuit.clone(),
            device: r.device.clone(),
            day: r.day,
            tvd_pct: r.tvd,
            wall_time_s: with_wall_time.then_some(r.wall_time),
            seed: r.seed,
        })
        .map_err(|e| PipelineError::Report(e.to_string()))?;
    }
    w.flush().map_err(|e| PipelineError::Report(e.to_string()))
}

pub fn read_records_csv<R: io::Read>(input: R) -> Result<Vec<RunRecord>, PipelineError> {
    csv::Reader::from_reader(input)
        .deserialize::<CsvRow>()
        .map(|row| {
            let row = row.map_err(|e| PipelineError::Report(e.to_string()))?;
            Ok(RunRecord {
                technique: row.technique,
                circuit: row.circuit,
                device: row.device,
                day: row.day,
                tvd: row.tvd_pct,
                wall_time: row.wall_time_s.unwrap_or(0.0),
                seed: row.seed,
            })
        })
        .collect()
}
