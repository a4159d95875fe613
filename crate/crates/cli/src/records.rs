//! Stored run records, the JSON summary and CSV tables derived from them.

use fracdn::dnmap::PairingRecord;
use fracdn::recon::{DeterminationReport, RecordFlags, StabilityReport};
use fracdn::{ExperimentRecord, Extrapolation, MonotonicityReport};
use serde::{Deserialize, Serialize};

use crate::error::{EXIT_CONFIG, EXIT_FLAGGED, EXIT_NON_CONVERGENCE, EXIT_OK};

/// Header of every per-sequence table.
pub const SEQUENCE_HEADER: [&str; 6] = [
    "N",
    "pairing",
    "energy",
    "correction",
    "u_minus_phi_norm",
    "iterations",
];

/// Tolerance on `|[Φ_N] - 1|` in seminorm checks.
pub const NORMALIZATION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    #[serde(rename = "N")]
    pub n: u32,
    pub t: f64,
    /// `‖Ψ_N‖_{L^p}` for `t = 0`, otherwise `[Ψ_N]_{W^{t,p}}` over all of `R^n`.
    pub value: f64,
    /// `value / value at the first N`
    pub ratio: f64,
    /// `(N / N_first)^{t - n/p}`
    pub expected: f64,
    /// `|[Φ_N]_{W^{s,p}} - 1|`
    pub normalization_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveSummary {
    pub coefficient: String,
    pub energy: f64,
    pub iterations: usize,
    pub gradient_norm: f64,
    pub converged: bool,
    pub epsilon: f64,
    pub epsilon_sensitivity: Option<f64>,
    pub estimate_ratio: Option<f64>,
    pub estimate_bound: f64,
    /// Node coordinates and solution values.
    pub nodes: Vec<[f64; 2]>,
    pub u: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RunRecords {
    SeminormCheck { rows: Vec<ScalingRow> },
    Solve { summary: SolveSummary },
    Pair { record: PairingRecord },
    Reconstruct { record: ExperimentRecord },
    Determine { report: DeterminationReport },
    Stability { report: StabilityReport },
    VerifyInequalities { report: MonotonicityReport },
}

fn record_status(r: &ExperimentRecord) -> i32 {
    if r.flags.non_converged {
        EXIT_NON_CONVERGENCE
    } else if r.failure.is_some() {
        EXIT_CONFIG
    } else if r.flags.any() {
        EXIT_FLAGGED
    } else {
        EXIT_OK
    }
}

/// Worst status first: non-convergence, then config-type failures, then flags.
fn combine(codes: impl IntoIterator<Item = i32>) -> i32 {
    let rank = |c: i32| match c {
        EXIT_NON_CONVERGENCE => 3,
        EXIT_CONFIG => 2,
        EXIT_FLAGGED => 1,
        _ => 0,
    };
    codes.into_iter().max_by_key(|c| rank(*c)).unwrap_or(EXIT_OK)
}

impl RunRecords {
    pub fn kind(&self) -> &'static str {
        match self {
            RunRecords::SeminormCheck { .. } => "seminorm-check",
            RunRecords::Solve { .. } => "solve",
            RunRecords::Pair { .. } => "pair",
            RunRecords::Reconstruct { .. } => "reconstruct",
            RunRecords::Determine { .. } => "determine",
            RunRecords::Stability { .. } => "stability",
            RunRecords::VerifyInequalities { .. } => "verify-inequalities",
        }
    }

    /// Exit status implied by the stored flags.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunRecords::SeminormCheck { rows } => {
                if rows.iter().all(|r| r.normalization_error <= NORMALIZATION_TOL) {
                    EXIT_OK
                } else {
                    EXIT_FLAGGED
                }
            }
            RunRecords::Solve { summary } => {
                if summary.converged {
                    EXIT_OK
                } else {
                    EXIT_NON_CONVERGENCE
                }
            }
            RunRecords::Pair { record } => {
                if record.diagnostics.converged {
                    EXIT_OK
                } else {
                    EXIT_NON_CONVERGENCE
                }
            }
            RunRecords::Reconstruct { record } => record_status(record),
            RunRecords::Determine { report } => {
                let records = report
                    .records
                    .iter()
                    .flat_map(|(a, b)| [record_status(a), record_status(b)]);
                let consistency = if report.consistent() { EXIT_OK } else { EXIT_FLAGGED };
                combine(records.chain([consistency]))
            }
            RunRecords::Stability { report } => {
                let fallback = if report.extrapolated.fallback {
                    EXIT_FLAGGED
                } else {
                    EXIT_OK
                };
                combine([
                    record_status(&report.records.0),
                    record_status(&report.records.1),
                    fallback,
                ])
            }
            RunRecords::VerifyInequalities { report } => {
                if report.holds() {
                    EXIT_OK
                } else {
                    EXIT_FLAGGED
                }
            }
        }
    }

    /// Named per-sequence records contained in the run.
    pub fn sequences(&self) -> Vec<(String, &ExperimentRecord)> {
        match self {
            RunRecords::Reconstruct { record } => vec![("reconstruct".into(), record)],
            RunRecords::Determine { report } => report
                .records
                .iter()
                .enumerate()
                .flat_map(|(k, (a, b))| {
                    [
                        (format!("determine_probe{k}_sigma1"), a),
                        (format!("determine_probe{k}_sigma2"), b),
                    ]
                })
                .collect(),
            RunRecords::Stability { report } => vec![
                ("stability_sigma1".into(), &report.records.0),
                ("stability_sigma2".into(), &report.records.1),
            ],
            _ => Vec::new(),
        }
    }

    pub fn summary(&self, run_id: &str) -> Summary {
        let mut experiments: Vec<ExperimentSummary> = self
            .sequences()
            .into_iter()
            .map(|(name, r)| ExperimentSummary {
                name,
                target: Some(r.target),
                pairing_limit: r.pairing_limit,
                energy_limit: r.energy_limit,
                error: r.error,
                flags: Some(r.flags.clone()),
                failure: r.failure.clone(),
            })
            .collect();
        match self {
            RunRecords::Stability { report } => experiments.push(ExperimentSummary {
                name: "stability_difference".into(),
                target: Some(report.target),
                pairing_limit: Some(report.extrapolated),
                energy_limit: None,
                error: Some((report.extrapolated.value - report.target).abs()),
                flags: None,
                failure: None,
            }),
            RunRecords::Pair { record } => experiments.push(ExperimentSummary {
                name: format!("pair_{}_{}", record.f_id, record.g_id),
                target: None,
                pairing_limit: None,
                energy_limit: None,
                error: None,
                flags: None,
                failure: (!record.diagnostics.converged).then(|| "solver did not converge".into()),
            }),
            _ => {}
        }
        Summary {
            run_id: run_id.to_string(),
            kind: self.kind().to_string(),
            exit_code: self.exit_code(),
            experiments,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub name: String,
    pub target: Option<f64>,
    pub pairing_limit: Option<Extrapolation>,
    pub energy_limit: Option<Extrapolation>,
    pub error: Option<f64>,
    pub flags: Option<RecordFlags>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub run_id: String,
    pub kind: String,
    pub exit_code: i32,
    pub experiments: Vec<ExperimentSummary>,
}

/// One CSV table.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub bytes: Vec<u8>,
}

fn csv_bytes(header: &[&str], rows: &[Vec<String>]) -> Vec<u8> {
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(Vec::new());
    w.write_record(header).expect("in-memory csv");
    for r in rows {
        w.write_record(r).expect("in-memory csv");
    }
    w.into_inner().expect("in-memory csv")
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// The `N,pairing,energy,correction,u_minus_phi_norm,iterations` table, with
/// a `FAILED` marker row when the sequence stopped early.
pub fn sequence_table(record: &ExperimentRecord) -> Vec<u8> {
    let mut rows: Vec<Vec<String>> = record
        .rows
        .iter()
        .map(|r| {
            vec![
                r.n.to_string(),
                r.pairing.to_string(),
                r.energy.to_string(),
                r.correction.to_string(),
                r.u_minus_phi_norm.to_string(),
                r.iterations.to_string(),
            ]
        })
        .collect();
    if let Some(msg) = &record.failure {
        rows.push(vec![
            "FAILED".into(),
            msg.clone(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
        ]);
    }
    csv_bytes(&SEQUENCE_HEADER, &rows)
}

/// Every CSV table for a run, in a fixed order.
pub fn tables(records: &RunRecords) -> Vec<Table> {
    let mut out: Vec<Table> = records
        .sequences()
        .into_iter()
        .map(|(name, r)| Table {
            name,
            bytes: sequence_table(r),
        })
        .collect();
    match records {
        RunRecords::SeminormCheck { rows } => out.push(Table {
            name: "seminorm_check".into(),
            bytes: csv_bytes(
                &["N", "t", "value", "ratio", "expected", "normalization_error"],
                &rows
                    .iter()
                    .map(|r| {
                        vec![
                            r.n.to_string(),
                            r.t.to_string(),
                            r.value.to_string(),
                            r.ratio.to_string(),
                            r.expected.to_string(),
                            r.normalization_error.to_string(),
                        ]
                    })
                    .collect::<Vec<_>>(),
            ),
        }),
        RunRecords::Solve { summary } => out.push(Table {
            name: "solution".into(),
            bytes: csv_bytes(
                &["x", "y", "u"],
                &summary
                    .nodes
                    .iter()
                    .zip(&summary.u)
                    .map(|(x, u)| vec![x[0].to_string(), x[1].to_string(), u.to_string()])
                    .collect::<Vec<_>>(),
            ),
        }),
        RunRecords::Pair { record } => out.push(Table {
            name: "pair".into(),
            bytes: csv_bytes(
                &["f_id", "g_id", "value", "iterations", "converged"],
                &[vec![
                    record.f_id.clone(),
                    record.g_id.clone(),
                    record.value.to_string(),
                    record.diagnostics.iterations.to_string(),
                    record.diagnostics.converged.to_string(),
                ]],
            ),
        }),
        RunRecords::Determine { report } => out.push(Table {
            name: "determine_comparison".into(),
            bytes: csv_bytes(
                &[
                    "x0",
                    "limit_1",
                    "limit_2",
                    "limit_difference",
                    "diagonal_difference",
                    "max_pairing_difference",
                    "consistent",
                ],
                &report
                    .rows
                    .iter()
                    .map(|r| {
                        vec![
                            r.x0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" "),
                            opt(r.limit_1),
                            opt(r.limit_2),
                            opt(r.limit_difference),
                            r.diagonal_difference.to_string(),
                            r.max_pairing_difference.to_string(),
                            r.consistent.to_string(),
                        ]
                    })
                    .collect::<Vec<_>>(),
            ),
        }),
        RunRecords::Stability { report } => out.push(Table {
            name: "stability_differences".into(),
            bytes: csv_bytes(
                &["N", "pairing_difference"],
                &report
                    .differences
                    .iter()
                    .map(|(n, d)| vec![n.to_string(), d.to_string()])
                    .collect::<Vec<_>>(),
            ),
        }),
        RunRecords::VerifyInequalities { report } => out.push(Table {
            name: "inequalities".into(),
            bytes: csv_bytes(
                &[
                    "p",
                    "samples",
                    "seed",
                    "lower_infimum",
                    "upper_supremum",
                    "max_scale_deviation",
                ],
                &[vec![
                    report.p.to_string(),
                    report.samples.to_string(),
                    report.seed.to_string(),
                    report.lower_infimum.to_string(),
                    report.upper_supremum.to_string(),
                    report.max_scale_deviation.to_string(),
                ]],
            ),
        }),
        RunRecords::Reconstruct { .. } => {}
    }
    out
}

/// Human-readable summary table.
pub fn summary_text(summary: &Summary) -> String {
    let mut s = format!("run {} ({})\n", summary.run_id, summary.kind);
    s.push_str(&format!(
        "{:<28} {:>14} {:>14} {:>14} {:>11}  flags\n",
        "experiment", "target", "pairing limit", "energy limit", "error"
    ));
    let cell = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_else(|| "-".into());
    for e in &summary.experiments {
        let mut flags = Vec::new();
        if let Some(f) = &e.flags {
            if f.non_converged {
                flags.push("non-converged");
            }
            if f.inconsistent {
                flags.push("inconsistent");
            }
            if f.extrapolation_fallback {
                flags.push("fallback");
            }
        }
        if e.failure.is_some() {
            flags.push("FAILED");
        }
        s.push_str(&format!(
            "{:<28} {:>14} {:>14} {:>14} {:>11}  {}\n",
            e.name,
            cell(e.target),
            cell(e.pairing_limit.map(|x| x.value)),
            cell(e.energy_limit.map(|x| x.value)),
            e.error.map(|x| format!("{x:.3e}")).unwrap_or_else(|| "-".into()),
            if flags.is_empty() { "-".into() } else { flags.join(",") }
        ));
        if let Some(msg) = &e.failure {
            s.push_str(&format!("    failure: {msg}\n"));
        }
    }
    s
}
