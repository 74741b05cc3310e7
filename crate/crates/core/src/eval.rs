//! Evaluation harness: rubric and accuracy record ingestion, per-group
//! aggregation, weighted averages, and report rendering.
//!
//! Rubric records carry five 1–3 scores per generated question (fluency,
//! clarity, conciseness, relevance to the slide, relevance to the marked
//! concept); accuracy records carry a binary verdict per answer. Group means
//! are computed on unrounded values and rendered at three decimals (two for
//! percentages), rounding half away from zero.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::Serialize;
use thiserror::Error;

pub const RUBRIC_HEADER: &str =
    "mooc,dnu_concept,question_id,fluency,clarity,conciseness,rel_slide,rel_dnuconcept";
pub const ACCURACY_HEADER: &str = "mooc,question_id,verdict";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("record {record}: {message}")]
    Validation { record: usize, message: String },
    #[error("unrecognized header {header:?}")]
    Header { header: String },
    #[error("no records for group {mooc:?}")]
    EmptyGroup { mooc: String },
    #[error("{message}")]
    Contract { message: String },
    #[error("no records to aggregate")]
    Empty,
}

/// Five rubric dimensions, each scored 1–3.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RubricScores {
    pub fluency: u8,
    pub clarity: u8,
    pub conciseness: u8,
    pub rel_slide: u8,
    pub rel_dnuconcept: u8,
}

impl RubricScores {
    pub fn as_array(&self) -> [u8; 5] {
        [
            self.fluency,
            self.clarity,
            self.conciseness,
            self.rel_slide,
            self.rel_dnuconcept,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QgRubricRecord {
    pub mooc_label: String,
    pub dnu_concept: String,
    pub question_id: String,
    pub scores: RubricScores,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Correct,
    Incorrect,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QaAccuracyRecord {
    pub mooc_label: String,
    pub question_id: String,
    pub verdict: Verdict,
}

/// A parsed record file: one kind per file, chosen by its header line.
#[derive(Debug, Clone, PartialEq)]
pub enum RecordFile {
    Rubric(Vec<QgRubricRecord>),
    Accuracy(Vec<QaAccuracyRecord>),
}

/// Parses a delimited record file. The header line selects the record kind;
/// fields are comma-separated with no quoting. Scores outside 1–3, bad
/// verdicts, wrong field counts, and duplicate (mooc, question_id) pairs are
/// rejected with the offending record's index.
pub fn ingest_records(text: &str) -> Result<RecordFile, EvalError> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let Some((_, header)) = lines.next() else {
        return Err(EvalError::Empty);
    };
    let header = header.trim();
    if header == RUBRIC_HEADER {
        let mut records = Vec::new();
        let mut seen: BTreeSet<(String, String)> = BTreeSet::new();
        for (index, (_, line)) in lines.enumerate() {
            let record = index + 1;
            let fields: Vec<&str> = line.trim().split(',').collect();
            if fields.len() != 8 {
                return Err(EvalError::Validation {
                    record,
                    message: format!("expected 8 fields, found {}", fields.len()),
                });
            }
            let mut scores = [0u8; 5];
            for (i, raw) in fields[3..8].iter().enumerate() {
                let value: u8 = raw.trim().parse().map_err(|_| EvalError::Validation {
                    record,
                    message: format!("score {raw:?} is not an integer"),
                })?;
                if !(1..=3).contains(&value) {
                    return Err(EvalError::Validation {
                        record,
                        message: format!("score {value} out of range 1..=3"),
                    });
                }
                scores[i] = value;
            }
            let key = (fields[0].trim().to_string(), fields[2].trim().to_string());
            if !seen.insert(key.clone()) {
                return Err(EvalError::Validation {
                    record,
                    message: format!("duplicate record for ({}, {})", key.0, key.1),
                });
            }
            records.push(QgRubricRecord {
                mooc_label: key.0,
                dnu_concept: fields[1].trim().to_string(),
                question_id: key.1,
                scores: RubricScores {
                    fluency: scores[0],
                    clarity: scores[1],
                    conciseness: scores[2],
                    rel_slide: scores[3],
                    rel_dnuconcept: scores[4],
                },
            });
        }
        Ok(RecordFile::Rubric(records))
    } else if header == ACCURACY_HEADER {
        let mut records = Vec::new();
        let mut seen: BTreeSet<(String, String)> = BTreeSet::new();
        for (index, (_, line)) in lines.enumerate() {
            let record = index + 1;
            let fields: Vec<&str> = line.trim().split(',').collect();
            if fields.len() != 3 {
                return Err(EvalError::Validation {
                    record,
                    message: format!("expected 3 fields, found {}", fields.len()),
                });
            }
            let verdict = match fields[2].trim() {
                "correct" => Verdict::Correct,
                "incorrect" => Verdict::Incorrect,
                other => {
                    return Err(EvalError::Validation {
                        record,
                        message: format!("verdict {other:?} must be correct or incorrect"),
                    })
                }
            };
            let key = (fields[0].trim().to_string(), fields[1].trim().to_string());
            if !seen.insert(key.clone()) {
                return Err(EvalError::Validation {
                    record,
                    message: format!("duplicate record for ({}, {})", key.0, key.1),
                });
            }
            records.push(QaAccuracyRecord {
                mooc_label: key.0,
                question_id: key.1,
                verdict,
            });
        }
        Ok(RecordFile::Accuracy(records))
    } else {
        Err(EvalError::Header {
            header: header.to_string(),
        })
    }
}

/// Unrounded means of the five dimensions plus their row average.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DimensionMeans {
    pub fluency: f64,
    pub clarity: f64,
    pub conciseness: f64,
    pub rel_slide: f64,
    pub rel_dnuconcept: f64,
    /// Mean of the five dimension means.
    pub average: f64,
}

impl DimensionMeans {
    pub fn as_array(&self) -> [f64; 6] {
        [
            self.fluency,
            self.clarity,
            self.conciseness,
            self.rel_slide,
            self.rel_dnuconcept,
            self.average,
        ]
    }

    /// Rendered at three decimals, rounding half away from zero.
    pub fn rounded(&self) -> DimensionMeans {
        DimensionMeans {
            fluency: round_half_away(self.fluency, 3),
            clarity: round_half_away(self.clarity, 3),
            conciseness: round_half_away(self.conciseness, 3),
            rel_slide: round_half_away(self.rel_slide, 3),
            rel_dnuconcept: round_half_away(self.rel_dnuconcept, 3),
            average: round_half_away(self.average, 3),
        }
    }
}

/// Rounds half away from zero at `decimals` places. A tiny epsilon absorbs
/// binary representation error on exact decimal ties.
pub fn round_half_away(x: f64, decimals: u32) -> f64 {
    let scale = libm::pow(10.0, decimals as f64);
    let scaled = x * scale;
    let nudged = libm::fabs(scaled) + 0.5 + 1e-9;
    libm::copysign(libm::floor(nudged), scaled) / scale
}

/// Per-dimension arithmetic means over one group's records, on unrounded
/// values.
pub fn dimension_means(
    records: &[QgRubricRecord],
    mooc: &str,
) -> Result<DimensionMeans, EvalError> {
    let mut sums = [0.0f64; 5];
    let mut count = 0usize;
    for r in records.iter().filter(|r| r.mooc_label == mooc) {
        for (i, s) in r.scores.as_array().iter().enumerate() {
            sums[i] += f64::from(*s);
        }
        count += 1;
    }
    if count == 0 {
        return Err(EvalError::EmptyGroup {
            mooc: mooc.to_string(),
        });
    }
    let n = count as f64;
    let means = [
        sums[0] / n,
        sums[1] / n,
        sums[2] / n,
        sums[3] / n,
        sums[4] / n,
    ];
    Ok(DimensionMeans {
        fluency: means[0],
        clarity: means[1],
        conciseness: means[2],
        rel_slide: means[3],
        rel_dnuconcept: means[4],
        average: means.iter().sum::<f64>() / 5.0,
    })
}

/// Σ(mean × weight) / Σweight per dimension. The two maps must cover the
/// same groups.
pub fn weighted_average(
    per_mooc_means: &BTreeMap<String, DimensionMeans>,
    weights: &BTreeMap<String, f64>,
) -> Result<DimensionMeans, EvalError> {
    if per_mooc_means.is_empty() {
        return Err(EvalError::Empty);
    }
    let means_keys: BTreeSet<&String> = per_mooc_means.keys().collect();
    let weight_keys: BTreeSet<&String> = weights.keys().collect();
    if means_keys != weight_keys {
        return Err(EvalError::Contract {
            message: format!("group sets differ: {means_keys:?} vs {weight_keys:?}"),
        });
    }
    let total: f64 = weights.values().sum();
    if total <= 0.0 {
        return Err(EvalError::Contract {
            message: "weights must be positive".to_string(),
        });
    }
    let mut acc = [0.0f64; 6];
    for (mooc, means) in per_mooc_means {
        let w = weights[mooc];
        if w <= 0.0 {
            return Err(EvalError::Contract {
                message: format!("weight for {mooc:?} must be positive"),
            });
        }
        for (i, v) in means.as_array().iter().enumerate() {
            acc[i] += v * w;
        }
    }
    Ok(DimensionMeans {
        fluency: acc[0] / total,
        clarity: acc[1] / total,
        conciseness: acc[2] / total,
        rel_slide: acc[3] / total,
        rel_dnuconcept: acc[4] / total,
        average: acc[5] / total,
    })
}

/// Accuracy of one group: percent (two decimals), correct, and total counts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AccuracyRow {
    pub mooc: String,
    pub percent: f64,
    pub correct: usize,
    pub total: usize,
}

pub fn accuracy(records: &[QaAccuracyRecord], mooc: &str) -> Result<AccuracyRow, EvalError> {
    let mut correct = 0usize;
    let mut total = 0usize;
    for r in records.iter().filter(|r| r.mooc_label == mooc) {
        total += 1;
        if r.verdict == Verdict::Correct {
            correct += 1;
        }
    }
    if total == 0 {
        return Err(EvalError::EmptyGroup {
            mooc: mooc.to_string(),
        });
    }
    Ok(AccuracyRow {
        mooc: mooc.to_string(),
        percent: round_half_away(100.0 * correct as f64 / total as f64, 2),
        correct,
        total,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QgTableRow {
    pub mooc: String,
    pub count: usize,
    #[serde(flatten)]
    pub means: DimensionMeans,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QgTable {
    pub rows: Vec<QgTableRow>,
    pub weighted: DimensionMeans,
    pub total_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QaTable {
    pub rows: Vec<AccuracyRow>,
    pub weighted: AccuracyRow,
}

/// The full report: whichever tables the input records support.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub question_generation: Option<QgTable>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub question_answering: Option<QaTable>,
}

/// Group labels in first-appearance order.
fn mooc_order<'a, T>(records: &'a [T], label: impl Fn(&'a T) -> &'a str) -> Vec<String> {
    let mut seen = BTreeSet::new();
    let mut order = Vec::new();
    for r in records {
        let l = label(r);
        if seen.insert(l) {
            order.push(l.to_string());
        }
    }
    order
}

/// Builds the report. Rendered values are rounded (three decimals for means,
/// two for percentages); weighted rows are computed from unrounded group
/// means with record counts as weights. Empty input is an error, never an
/// empty report.
pub fn aggregate_report(
    rubric: &[QgRubricRecord],
    accuracy_records: &[QaAccuracyRecord],
) -> Result<AggregateReport, EvalError> {
    if rubric.is_empty() && accuracy_records.is_empty() {
        return Err(EvalError::Empty);
    }

    let question_generation = if rubric.is_empty() {
        None
    } else {
        let order = mooc_order(rubric, |r| r.mooc_label.as_str());
        let mut rows = Vec::new();
        let mut means_map = BTreeMap::new();
        let mut weights = BTreeMap::new();
        let mut total_count = 0usize;
        for mooc in &order {
            let means = dimension_means(rubric, mooc)?;
            let count = rubric.iter().filter(|r| &r.mooc_label == mooc).count();
            rows.push(QgTableRow {
                mooc: mooc.clone(),
                count,
                means: means.rounded(),
            });
            means_map.insert(mooc.clone(), means);
            weights.insert(mooc.clone(), count as f64);
            total_count += count;
        }
        let weighted = weighted_average(&means_map, &weights)?.rounded();
        Some(QgTable {
            rows,
            weighted,
            total_count,
        })
    };

    let question_answering = if accuracy_records.is_empty() {
        None
    } else {
        let order = mooc_order(accuracy_records, |r| r.mooc_label.as_str());
        let mut rows = Vec::new();
        let mut correct = 0usize;
        let mut total = 0usize;
        for mooc in &order {
            let row = accuracy(accuracy_records, mooc)?;
            correct += row.correct;
            total += row.total;
            rows.push(row);
        }
        let weighted = AccuracyRow {
            mooc: "Weighted Average".to_string(),
            percent: round_half_away(100.0 * correct as f64 / total as f64, 2),
            correct,
            total,
        };
        Some(QaTable { rows, weighted })
    };

    Ok(AggregateReport {
        question_generation,
        question_answering,
    })
}

/// Plain-text tables mirroring the report.
pub fn render_text(report: &AggregateReport) -> String {
    let mut out = String::new();
    if let Some(qg) = &report.question_generation {
        out.push_str("Question Generation (1-3 rubric means)\n");
        out.push_str(&format!(
            "{:<28} {:>7} {:>7} {:>7} {:>9} {:>13} {:>7}\n",
            "MOOC", "Flu.", "Clar.", "Conc.", "Rel_slide", "Rel_dnuconcept", "Avg."
        ));
        for row in &qg.rows {
            out.push_str(&render_qg_row(&row.mooc, &row.means));
        }
        out.push_str(&render_qg_row("Weighted Avg.", &qg.weighted));
        out.push('\n');
    }
    if let Some(qa) = &report.question_answering {
        out.push_str("Question Answering accuracy\n");
        out.push_str(&format!(
            "{:<28} {:>12} {:>9}\n",
            "MOOC", "Accuracy (%)", "Correct"
        ));
        for row in &qa.rows {
            out.push_str(&format!(
                "{:<28} {:>12.2} {:>5}/{}\n",
                row.mooc, row.percent, row.correct, row.total
            ));
        }
        let w = &qa.weighted;
        out.push_str(&format!(
            "{:<28} {:>12.2} {:>5}/{}\n",
            w.mooc, w.percent, w.correct, w.total
        ));
    }
    out
}

fn render_qg_row(label: &str, m: &DimensionMeans) -> String {
    format!(
        "{:<28} {:>7.3} {:>7.3} {:>7.3} {:>9.3} {:>13.3} {:>7.3}\n",
        label, m.fluency, m.clarity, m.conciseness, m.rel_slide, m.rel_dnuconcept, m.average
    )
}
