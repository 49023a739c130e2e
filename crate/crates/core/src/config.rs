//! Experiment configuration files.
//!
//! ```toml
//! seed = 7
//!
//! [input]
//! synth = true            # or: dataset = "features.csv", or: asm_dir = "asm/"
//!
//! [synth]
//! n_minority = 200
//! n_majority = 800
//! n_opcodes = 50
//! separation = 0.9
//!
//! [output]
//! dir = "report"
//!
//! [grid]
//! reducers = ["none", "vt", "ae1", "ae3"]
//! classifiers = ["rf", "dnn2", "dnn4", "dnn7"]
//! folds = 3
//! ```
//!
//! Relative paths resolve against the directory holding the config file.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use toml::Spanned;

use crate::balance::AdasynConfig;
use crate::error::{Error, Result};
use crate::evaluate::ExperimentConfig;
use crate::models::{ClassifierKind, RandomForestConfig, TreeConfig};
use crate::neural::{AdamConfig, TrainConfig, Validation};
use crate::reduce::{ReducerKind, DEFAULT_VARIANCE_THRESHOLD};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSettings {
    pub n_minority: usize,
    pub n_majority: usize,
    pub n_opcodes: usize,
    pub separation: f64,
}

impl Default for SynthSettings {
    fn default() -> Self {
        SynthSettings {
            n_minority: 200,
            n_majority: 800,
            n_opcodes: 50,
            separation: 0.9,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InputSource {
    /// Directory of `.asm` listings; labels from a `file_id,label` CSV or
    /// from top-level `malware/` and `benign/` subdirectories.
    AsmDir { dir: PathBuf, labels: Option<PathBuf> },
    Dataset(PathBuf),
    Synth(SynthSettings),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub input: InputSource,
    pub output_dir: PathBuf,
    pub experiment: ExperimentConfig,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    seed: Option<u64>,
    jobs: Option<usize>,
    input: Option<Spanned<RawInput>>,
    #[serde(default)]
    synth: RawSynth,
    output: Option<RawOutput>,
    #[serde(default)]
    adasyn: RawAdasyn,
    #[serde(default)]
    grid: RawGrid,
    #[serde(default)]
    variance_threshold: RawThreshold,
    #[serde(default)]
    autoencoder: RawTrain,
    #[serde(default)]
    dnn: RawTrain,
    #[serde(default)]
    forest: RawForest,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInput {
    asm_dir: Option<Spanned<String>>,
    labels: Option<Spanned<String>>,
    dataset: Option<Spanned<String>>,
    #[serde(default)]
    synth: bool,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawSynth {
    n_minority: Option<usize>,
    n_majority: Option<usize>,
    n_opcodes: Option<usize>,
    separation: Option<Spanned<f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: Spanned<String>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawAdasyn {
    k: Option<Spanned<usize>>,
    beta: Option<Spanned<f64>>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    reducers: Option<Vec<Spanned<String>>>,
    classifiers: Option<Vec<Spanned<String>>>,
    folds: Option<Spanned<usize>>,
    stratified: Option<bool>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawThreshold {
    threshold: Option<Spanned<f64>>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawTrain {
    epochs: Option<Spanned<usize>>,
    batch_size: Option<Spanned<usize>>,
    learning_rate: Option<Spanned<f64>>,
    validation_fraction: Option<Spanned<f64>>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawForest {
    n_trees: Option<Spanned<usize>>,
    max_depth: Option<usize>,
    min_samples_split: Option<Spanned<usize>>,
    features_per_split: Option<Spanned<usize>>,
}

struct Source<'a> {
    text: &'a str,
    base: &'a Path,
}

impl Source<'_> {
    fn line(&self, offset: usize) -> usize {
        1 + self.text[..offset.min(self.text.len())].matches('\n').count()
    }

    fn err<T>(&self, spanned: &Spanned<T>, message: impl Into<String>) -> Error {
        Error::config(Some(self.line(spanned.span().start)), message)
    }

    fn path(&self, raw: &Spanned<String>) -> PathBuf {
        let p = Path::new(raw.get_ref());
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }

    fn existing_dir(&self, raw: &Spanned<String>, what: &str) -> Result<PathBuf> {
        let p = self.path(raw);
        if !p.is_dir() {
            return Err(self.err(raw, format!("{what} `{}` is not a directory", p.display())));
        }
        Ok(p)
    }

    fn existing_file(&self, raw: &Spanned<String>, what: &str) -> Result<PathBuf> {
        let p = self.path(raw);
        if !p.is_file() {
            return Err(self.err(raw, format!("{what} `{}` does not exist", p.display())));
        }
        Ok(p)
    }

    fn positive(&self, v: &Option<Spanned<usize>>, name: &str, default: usize) -> Result<usize> {
        match v {
            None => Ok(default),
            Some(s) if *s.get_ref() == 0 => Err(self.err(s, format!("{name} must be at least 1"))),
            Some(s) => Ok(*s.get_ref()),
        }
    }

    fn in_range(&self, v: &Option<Spanned<f64>>, name: &str, lo: f64, hi: f64, default: f64) -> Result<f64> {
        match v {
            None => Ok(default),
            Some(s) if !(lo..=hi).contains(s.get_ref()) => {
                Err(self.err(s, format!("{name} = {} outside [{lo}, {hi}]", s.get_ref())))
            }
            Some(s) => Ok(*s.get_ref()),
        }
    }

    fn train(&self, raw: &RawTrain, section: &str, default: TrainConfig) -> Result<TrainConfig> {
        let fraction = match &raw.validation_fraction {
            Some(s) if !(0.0..1.0).contains(s.get_ref()) => {
                return Err(self.err(s, format!("{section}.validation_fraction must lie in [0, 1)")))
            }
            Some(s) => *s.get_ref(),
            None => {
                let Validation::Fraction(f) = default.validation;
                f
            }
        };
        let learning_rate = match &raw.learning_rate {
            Some(s) if !(*s.get_ref() > 0.0) => {
                return Err(self.err(s, format!("{section}.learning_rate must be positive")))
            }
            Some(s) => *s.get_ref(),
            None => default.adam.learning_rate,
        };
        Ok(TrainConfig {
            epochs: self.positive(&raw.epochs, &format!("{section}.epochs"), default.epochs)?,
            batch_size: self.positive(&raw.batch_size, &format!("{section}.batch_size"), default.batch_size)?,
            adam: AdamConfig {
                learning_rate,
                ..default.adam
            },
            validation: Validation::Fraction(fraction),
            seed: 0,
        })
    }
}

fn toml_error(text: &str, e: toml::de::Error) -> Error {
    let line = e.span().map(|s| 1 + text[..s.start.min(text.len())].matches('\n').count());
    Error::config(line, e.message().to_string())
}

/// Parses and validates a config. `base` anchors relative paths.
pub fn parse(text: &str, base: &Path) -> Result<RunConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| toml_error(text, e))?;
    let src = Source { text, base };

    let input_raw = raw
        .input
        .as_ref()
        .ok_or_else(|| Error::config(None, "missing [input] section"))?;
    let inp = input_raw.get_ref();
    let chosen = usize::from(inp.asm_dir.is_some()) + usize::from(inp.dataset.is_some()) + usize::from(inp.synth);
    if chosen != 1 {
        return Err(src.err(input_raw, "[input] needs exactly one of asm_dir, dataset or synth = true"));
    }
    if inp.labels.is_some() && inp.asm_dir.is_none() {
        return Err(src.err(inp.labels.as_ref().unwrap(), "input.labels only applies to asm_dir"));
    }
    let input = if let Some(dir) = &inp.asm_dir {
        InputSource::AsmDir {
            dir: src.existing_dir(dir, "asm_dir")?,
            labels: inp
                .labels
                .as_ref()
                .map(|l| src.existing_file(l, "labels"))
                .transpose()?,
        }
    } else if let Some(ds) = &inp.dataset {
        InputSource::Dataset(src.existing_file(ds, "dataset")?)
    } else {
        let d = SynthSettings::default();
        InputSource::Synth(SynthSettings {
            n_minority: raw.synth.n_minority.unwrap_or(d.n_minority),
            n_majority: raw.synth.n_majority.unwrap_or(d.n_majority),
            n_opcodes: raw.synth.n_opcodes.unwrap_or(d.n_opcodes),
            separation: src.in_range(&raw.synth.separation, "synth.separation", 0.0, 1.0, d.separation)?,
        })
    };

    let output = raw
        .output
        .as_ref()
        .ok_or_else(|| Error::config(None, "missing [output] section"))?;
    let output_dir = src.path(&output.dir);
    if let Some(parent) = output_dir.parent().filter(|p| !p.as_os_str().is_empty()) {
        if !parent.is_dir() {
            return Err(src.err(
                &output.dir,
                format!("parent of output dir `{}` does not exist", output_dir.display()),
            ));
        }
    }

    let defaults = ExperimentConfig::default();
    let reducers = match &raw.grid.reducers {
        None => defaults.reducers.clone(),
        Some(list) => list
            .iter()
            .map(|s| s.get_ref().parse::<ReducerKind>().map_err(|e| src.err(s, e.to_string())))
            .collect::<Result<Vec<_>>>()?,
    };
    let classifiers = match &raw.grid.classifiers {
        None => defaults.classifiers.clone(),
        Some(list) => list
            .iter()
            .map(|s| s.get_ref().parse::<ClassifierKind>().map_err(|e| src.err(s, e.to_string())))
            .collect::<Result<Vec<_>>>()?,
    };
    if reducers.is_empty() || classifiers.is_empty() {
        return Err(Error::config(None, "grid.reducers and grid.classifiers must be non-empty"));
    }
    let folds = match &raw.grid.folds {
        Some(s) if *s.get_ref() < 2 => return Err(src.err(s, "grid.folds must be at least 2")),
        Some(s) => *s.get_ref(),
        None => defaults.folds,
    };

    let adasyn = AdasynConfig {
        k: src.positive(&raw.adasyn.k, "adasyn.k", AdasynConfig::default().k)?,
        beta: src.in_range(&raw.adasyn.beta, "adasyn.beta", 0.0, 1.0, AdasynConfig::default().beta)?,
        seed: 0,
    };
    let variance_threshold = src.in_range(
        &raw.variance_threshold.threshold,
        "variance_threshold.threshold",
        0.0,
        f64::MAX,
        DEFAULT_VARIANCE_THRESHOLD,
    )?;

    let forest_default = RandomForestConfig::default();
    let forest = RandomForestConfig {
        n_trees: src.positive(&raw.forest.n_trees, "forest.n_trees", forest_default.n_trees)?,
        tree: TreeConfig {
            max_depth: raw.forest.max_depth,
            min_samples_split: src.positive(
                &raw.forest.min_samples_split,
                "forest.min_samples_split",
                forest_default.tree.min_samples_split,
            )?,
            features_per_split: match &raw.forest.features_per_split {
                Some(s) if *s.get_ref() == 0 => {
                    return Err(src.err(s, "forest.features_per_split must be at least 1"))
                }
                other => other.as_ref().map(|s| *s.get_ref()),
            },
        },
        ..forest_default
    };

    let experiment = ExperimentConfig {
        folds,
        stratified: raw.grid.stratified.unwrap_or(false),
        reducers,
        classifiers,
        adasyn,
        variance_threshold,
        autoencoder: src.train(&raw.autoencoder, "autoencoder", TrainConfig::default())?,
        models: crate::models::ClassifierConfig {
            forest,
            dnn: src.train(&raw.dnn, "dnn", TrainConfig::default())?,
        },
        seed: raw.seed.unwrap_or(0),
        jobs: raw.jobs.unwrap_or(1).max(1),
    };
    Ok(RunConfig {
        input,
        output_dir,
        experiment,
    })
}

pub fn load(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::config(None, format!("cannot read config `{}`: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse(&text, base)
}
