//! End-to-end wiring: corpus → labeled dataset → evaluation grid → report.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use log::info;

use crate::config::{InputSource, RunConfig, SynthSettings};
use crate::dataset::{self, Label, LabeledDataset, SynthParams};
use crate::disasm::{self, MasterOpcodeList};
use crate::error::{Error, Result};
use crate::evaluate::{run_experiment, write_report, EvaluationReport, ExperimentConfig, Stamp};
use crate::seed;

/// Reads a `file_id,label` CSV with a header row.
pub fn read_labels(path: &Path) -> Result<HashMap<String, Label>> {
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path)?;
    let mut labels = HashMap::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let line = record.position().map_or(i as u64 + 2, |p| p.line());
        if record.len() != 2 {
            return Err(Error::FormatViolation {
                line,
                message: format!("expected 2 fields, found {}", record.len()),
            });
        }
        let label = record[1]
            .trim()
            .parse::<u8>()
            .ok()
            .and_then(Label::from_u8)
            .ok_or_else(|| Error::FormatViolation {
                line,
                message: format!("label `{}` is not 0 or 1", &record[1]),
            })?;
        labels.insert(record[0].trim().to_string(), label);
    }
    Ok(labels)
}

/// Labels from the directory layout: ids under `malware/` are 1, under `benign/` are 0.
pub fn labels_from_layout<'a>(file_ids: impl IntoIterator<Item = &'a str>) -> HashMap<String, Label> {
    file_ids
        .into_iter()
        .filter_map(|id| {
            let label = match id.split('/').next() {
                Some("malware") => Label::Malware,
                Some("benign") => Label::Benign,
                _ => return None,
            };
            Some((id.to_string(), label))
        })
        .collect()
}

#[derive(Debug)]
pub struct Extracted {
    pub dataset: LabeledDataset,
    pub master: MasterOpcodeList,
    pub excluded: Vec<String>,
}

/// Parses a listing directory into opcode-count rows over its master list.
pub fn extract_dataset(asm_dir: &Path, labels: Option<&Path>) -> Result<Extracted> {
    let extraction = disasm::extract_dir(asm_dir)?;
    let master = disasm::build_master_list(&extraction.sequences)?;
    let vectors: Vec<_> = extraction
        .sequences
        .iter()
        .map(|s| disasm::histogram(s, &master).0)
        .collect();
    let label_map = match labels {
        Some(path) => read_labels(path)?,
        None => labels_from_layout(vectors.iter().map(|v| v.file_id.as_str())),
    };
    let dataset = dataset::assemble(&vectors, &label_map, master.opcodes())?;
    Ok(Extracted {
        dataset,
        master,
        excluded: extraction.excluded,
    })
}

/// Synthetic corpus seeded from `master_seed`, as `run` generates it.
pub fn synth_from_master(settings: &SynthSettings, master_seed: u64) -> Result<LabeledDataset> {
    dataset::synth_corpus(&SynthParams {
        n_minority: settings.n_minority,
        n_majority: settings.n_majority,
        n_opcodes: settings.n_opcodes,
        separation: settings.separation,
        seed: seed::derive_seed(master_seed, "synth", ""),
    })
}

/// Stamp for a report: hashes the experiment settings and the dataset contents.
pub fn stamp_for(cfg: &ExperimentConfig, data: &LabeledDataset) -> Result<Stamp> {
    let mut bytes = Vec::new();
    dataset::write_csv(data, &mut bytes, None)?;
    let mut material = cfg.config_hash().into_bytes();
    material.push(b'\n');
    material.extend(seed::content_hash(&bytes).into_bytes());
    Ok(Stamp {
        config_hash: seed::content_hash(&material),
        seed: cfg.seed,
    })
}

/// Runs the grid on `data` and writes the report into `out_dir`.
pub fn evaluate_to_dir(data: &LabeledDataset, cfg: &ExperimentConfig, out_dir: &Path) -> Result<EvaluationReport> {
    let stamp = stamp_for(cfg, data)?;
    let report = run_experiment(data, cfg)?;
    write_report(&report, out_dir, &stamp)?;
    info!("report written to {}", out_dir.display());
    Ok(report)
}

/// The whole pipeline described by a config file.
pub fn run(cfg: &RunConfig) -> Result<EvaluationReport> {
    let master_seed = cfg.experiment.seed;
    let (data, master) = match &cfg.input {
        InputSource::AsmDir { dir, labels } => {
            let extracted = extract_dataset(dir, labels.as_deref())?;
            (extracted.dataset, Some(extracted.master))
        }
        InputSource::Dataset(path) => (dataset::load(path)?, None),
        InputSource::Synth(settings) => (synth_from_master(settings, master_seed)?, None),
    };
    info!(
        "dataset: {} rows × {} columns, class counts (benign, malware) = {:?}",
        data.n_rows(),
        data.n_cols(),
        data.class_counts()
    );
    let stamp = stamp_for(&cfg.experiment, &data)?;
    let report = run_experiment(&data, &cfg.experiment)?;
    fs::create_dir_all(&cfg.output_dir)?;
    write_report(&report, &cfg.output_dir, &stamp)?;
    dataset::persist_with_comment(&data, &cfg.output_dir.join("dataset.csv"), Some(&stamp.comment()))?;
    if let Some(master) = master {
        fs::write(
            cfg.output_dir.join("master.txt"),
            format!("# {}\n{}", stamp.comment(), master.to_text()),
        )?;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_labels() {
        let map = labels_from_layout(["malware/a", "benign/x/y", "other/z"]);
        assert_eq!(map.len(), 2);
        assert_eq!(map["malware/a"], Label::Malware);
        assert_eq!(map["benign/x/y"], Label::Benign);
    }

    #[test]
    fn label_file_rejects_bad_value() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("labels.csv");
        fs::write(&path, "file_id,label\na,1\nb,2\n").unwrap();
        assert!(matches!(read_labels(&path), Err(Error::FormatViolation { line: 3, .. })));
    }

    #[test]
    fn extract_with_layout_labels() {
        let dir = tempfile::tempdir().unwrap();
        for (sub, name, ops) in [("malware", "m1", ["push", "mov"]), ("benign", "b1", ["mov", "ret"])] {
            fs::create_dir_all(dir.path().join(sub)).unwrap();
            let body: String = ops
                .iter()
                .enumerate()
                .map(|(i, op)| format!("  {:x}:\t55 \t{op} eax\n", 0x1000 + i))
                .collect();
            fs::write(dir.path().join(sub).join(format!("{name}.asm")), body).unwrap();
        }
        fs::write(dir.path().join("benign/empty.asm"), "file format\n").unwrap();
        let ex = extract_dataset(dir.path(), None).unwrap();
        assert_eq!(ex.master.opcodes(), ["mov", "push", "ret"]);
        assert_eq!(ex.excluded, ["benign/empty"]);
        assert_eq!(ex.dataset.row_ids, ["benign/b1", "malware/m1"]);
        assert_eq!(ex.dataset.labels, [Label::Benign, Label::Malware]);
        assert_eq!(ex.dataset.matrix.row(1).to_vec(), vec![1.0, 1.0, 0.0]);
    }
}
