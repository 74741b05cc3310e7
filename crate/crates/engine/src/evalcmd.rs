//! The `eval` subcommand: read record files, aggregate, print the tables,
//! and optionally write the machine-readable report.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

use edukg_core::eval::{
    aggregate_report, ingest_records, render_text, AggregateReport, QaAccuracyRecord,
    QgRubricRecord, RecordFile,
};

pub fn run_eval(files: &[PathBuf], out: Option<&Path>) -> Result<AggregateReport> {
    let mut rubric: Vec<QgRubricRecord> = Vec::new();
    let mut accuracy: Vec<QaAccuracyRecord> = Vec::new();
    for file in files {
        let text = std::fs::read_to_string(file)
            .with_context(|| format!("reading records {}", file.display()))?;
        match ingest_records(&text)
            .with_context(|| format!("validating records {}", file.display()))?
        {
            RecordFile::Rubric(records) => rubric.extend(records),
            RecordFile::Accuracy(records) => accuracy.extend(records),
        }
    }
    let report = aggregate_report(&rubric, &accuracy).context("aggregating records")?;
    print!("{}", render_text(&report));
    if let Some(out) = out {
        let mut bytes = serde_json::to_vec_pretty(&report)?;
        bytes.push(b'\n');
        std::fs::write(out, bytes).with_context(|| format!("writing {}", out.display()))?;
        log::info!("report written to {}", out.display());
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use edukg_core::eval::{ACCURACY_HEADER, RUBRIC_HEADER};

    #[test]
    fn eval_merges_both_kinds_and_writes_report() {
        let dir = tempfile::tempdir().unwrap();
        let rubric_path = dir.path().join("qg.csv");
        let mut rubric = format!("{RUBRIC_HEADER}\n");
        for i in 0..4 {
            rubric.push_str(&format!("LA,c,q{i},3,3,3,3,3\n"));
        }
        std::fs::write(&rubric_path, rubric).unwrap();

        let accuracy_path = dir.path().join("qa.csv");
        let accuracy = format!("{ACCURACY_HEADER}\nLA,q0,correct\nLA,q1,incorrect\n");
        std::fs::write(&accuracy_path, accuracy).unwrap();

        let out = dir.path().join("report.json");
        let report = run_eval(&[rubric_path, accuracy_path], Some(&out)).unwrap();
        assert!(report.question_generation.is_some());
        assert_eq!(report.question_answering.unwrap().weighted.percent, 50.0);

        let written: serde_json::Value =
            serde_json::from_slice(&std::fs::read(&out).unwrap()).unwrap();
        assert_eq!(written["question_generation"]["rows"][0]["fluency"], 3.0);
    }

    #[test]
    fn eval_fails_on_bad_scores() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("qg.csv");
        std::fs::write(&path, format!("{RUBRIC_HEADER}\nLA,c,q1,3,9,3,3,3\n")).unwrap();
        assert!(run_eval(&[path], None).is_err());
    }
}
