use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::experiment::EvaluationReport;
use super::metrics::{ConfusionMatrix, Metrics};
use crate::error::Result;

/// Published results on the original corpus: features, classifier, accuracy, TPR, TNR, PPV.
pub const REFERENCE_TABLE: [(&str, &str, f64, f64, f64, f64); 16] = [
    ("None", "RF", 99.74, 99.48, 100.0, 100.0),
    ("VT", "RF", 99.78, 99.59, 99.97, 99.97),
    ("AE-1L", "RF", 99.41, 98.86, 99.97, 99.97),
    ("AE-3L", "RF", 99.36, 98.72, 100.0, 100.0),
    ("None", "DNN-2L", 97.79, 96.33, 99.26, 99.24),
    ("VT", "DNN-2L", 98.84, 98.32, 99.37, 99.37),
    ("AE-1L", "DNN-2L", 96.95, 94.57, 99.37, 99.34),
    ("AE-3L", "DNN-2L", 96.25, 93.75, 98.79, 98.74),
    ("None", "DNN-4L", 97.42, 95.38, 99.48, 99.46),
    ("VT", "DNN-4L", 98.69, 97.96, 99.42, 99.42),
    ("AE-1L", "DNN-4L", 98.99, 98.29, 99.70, 99.70),
    ("AE-3L", "DNN-4L", 97.16, 98.61, 95.68, 95.85),
    ("None", "DNN-7L", 96.15, 99.05, 93.20, 93.66),
    ("VT", "DNN-7L", 96.20, 98.89, 93.48, 93.89),
    ("AE-1L", "DNN-7L", 98.99, 98.61, 99.81, 99.81),
    ("AE-3L", "DNN-7L", 93.60, 87.97, 99.31, 99.23),
];

/// Identifies the run in every report file's header comment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stamp {
    pub config_hash: String,
    pub seed: u64,
}

impl Stamp {
    pub fn comment(&self) -> String {
        format!("config_hash={} seed={}", self.config_hash, self.seed)
    }
}

fn create(path: &Path, stamp: &Stamp) -> Result<BufWriter<fs::File>> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    writeln!(out, "# {}", stamp.comment())?;
    Ok(out)
}

fn counts_and_metrics(cm: &ConfusionMatrix, m: &Metrics) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{}",
        cm.tp,
        cm.fn_,
        cm.tn,
        cm.fp,
        m.accuracy,
        m.tpr,
        m.tnr,
        m.ppv,
        m.undefined.describe()
    )
}

/// Writes `table.csv`, `folds.csv`, `fold_assignment.csv`, `fit_log.csv`,
/// `reference.csv` and `traces/*.csv` into `dir`.
pub fn write_report(report: &EvaluationReport, dir: &Path, stamp: &Stamp) -> Result<()> {
    fs::create_dir_all(dir.join("traces"))?;

    let mut table = create(&dir.join("table.csv"), stamp)?;
    writeln!(table, "features,classifier,accuracy,tpr,tnr,ppv")?;
    for agg in &report.aggregates {
        let m = &agg.metrics;
        writeln!(
            table,
            "{},{},{:.2},{:.2},{:.2},{:.2}",
            agg.reducer.label(),
            agg.classifier.label(),
            100.0 * m.accuracy,
            100.0 * m.tpr,
            100.0 * m.tnr,
            100.0 * m.ppv
        )?;
    }
    table.flush()?;

    let mut folds = create(&dir.join("folds.csv"), stamp)?;
    writeln!(folds, "features,classifier,fold,test_rows,tp,fn,tn,fp,accuracy,tpr,tnr,ppv,undefined")?;
    for f in &report.folds {
        writeln!(
            folds,
            "{},{},{},{},{}",
            f.reducer.label(),
            f.classifier.label(),
            f.fold,
            f.test_rows,
            counts_and_metrics(&f.confusion, &f.metrics)
        )?;
    }
    for agg in &report.aggregates {
        writeln!(
            folds,
            "{},{},all,{},{}",
            agg.reducer.label(),
            agg.classifier.label(),
            agg.confusion.total(),
            counts_and_metrics(&agg.confusion, &agg.metrics)
        )?;
    }
    folds.flush()?;

    let mut assignment = create(&dir.join("fold_assignment.csv"), stamp)?;
    writeln!(assignment, "row_id,fold")?;
    for (id, fold) in report.row_ids.iter().zip(&report.plan.assignment) {
        writeln!(assignment, "{id},{fold}")?;
    }
    assignment.flush()?;

    let mut fit_log = create(&dir.join("fit_log.csv"), stamp)?;
    writeln!(fit_log, "stage,features,classifier,fold,n_rows,row_ids")?;
    for record in &report.fit_log {
        writeln!(
            fit_log,
            "{},{},{},{},{},{}",
            record.stage.name(),
            record.reducer.map_or("", |r| r.label()),
            record.classifier.map_or("", |c| c.label()),
            record.fold,
            record.row_ids.len(),
            record.row_ids.join(";")
        )?;
    }
    fit_log.flush()?;

    let mut reference = create(&dir.join("reference.csv"), stamp)?;
    writeln!(reference, "# published values on the original corpus, not reproduced here")?;
    writeln!(reference, "features,classifier,accuracy,tpr,tnr,ppv")?;
    for (features, classifier, acc, tpr, tnr, ppv) in REFERENCE_TABLE {
        writeln!(reference, "{features},{classifier},{acc:.2},{tpr:.2},{tnr:.2},{ppv:.2}")?;
    }
    reference.flush()?;

    let comment = stamp.comment();
    for rt in &report.reducer_traces {
        let path = dir.join("traces").join(format!("{}_fold{}.csv", rt.reducer.tag(), rt.fold));
        let mut out = BufWriter::new(fs::File::create(path)?);
        rt.trace.write_csv(&mut out, Some(&comment))?;
        out.flush()?;
    }
    for f in &report.folds {
        if let Some(trace) = &f.trace {
            let path = dir
                .join("traces")
                .join(format!("{}_{}_fold{}.csv", f.reducer.tag(), f.classifier.tag(), f.fold));
            let mut out = BufWriter::new(fs::File::create(path)?);
            trace.write_csv(&mut out, Some(&comment))?;
            out.flush()?;
        }
    }
    Ok(())
}
