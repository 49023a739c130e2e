use std::time::Instant;

use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::folds::{kfold_split, kfold_split_stratified, FoldPlan};
use super::metrics::{confusion, ConfusionMatrix, Metrics};
use crate::balance::{adasyn, AdasynConfig};
use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::models::{train_classifier, ClassifierConfig, ClassifierKind};
use crate::neural::TrainingTrace;
use crate::reduce::{self, ReducerKind, ReducerSpec, DEFAULT_VARIANCE_THRESHOLD};
use crate::seed;

/// Everything `run_experiment` needs besides the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub folds: usize,
    pub stratified: bool,
    pub reducers: Vec<ReducerKind>,
    pub classifiers: Vec<ClassifierKind>,
    pub adasyn: AdasynConfig,
    pub variance_threshold: f64,
    pub autoencoder: crate::neural::TrainConfig,
    pub models: ClassifierConfig,
    pub seed: u64,
    /// Worker threads for the grid. Results do not depend on it.
    #[serde(skip)]
    pub jobs: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            folds: 3,
            stratified: false,
            reducers: ReducerKind::ALL.to_vec(),
            classifiers: ClassifierKind::ALL.to_vec(),
            adasyn: AdasynConfig::default(),
            variance_threshold: DEFAULT_VARIANCE_THRESHOLD,
            autoencoder: Default::default(),
            models: ClassifierConfig::default(),
            seed: 0,
            jobs: 1,
        }
    }
}

impl ExperimentConfig {
    /// Hash of the result-affecting settings.
    pub fn config_hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        seed::content_hash(json.as_bytes())
    }

    pub fn validate(&self) -> Result<()> {
        if self.reducers.is_empty() || self.classifiers.is_empty() {
            return Err(Error::InvalidArgument("the grid needs at least one reducer and one classifier".into()));
        }
        if self.folds < 2 {
            return Err(Error::InvalidArgument(format!("need at least 2 folds, got {}", self.folds)));
        }
        self.adasyn.validate()?;
        self.autoencoder.validate()?;
        self.models.dnn.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum FitStage {
    Adasyn,
    Reducer,
    Classifier,
}

impl FitStage {
    pub fn name(self) -> &'static str {
        match self {
            FitStage::Adasyn => "adasyn",
            FitStage::Reducer => "reducer",
            FitStage::Classifier => "classifier",
        }
    }
}

/// Row ids a fit call saw.
#[derive(Debug, Clone, PartialEq)]
pub struct FitRecord {
    pub stage: FitStage,
    pub reducer: Option<ReducerKind>,
    pub classifier: Option<ClassifierKind>,
    pub fold: usize,
    pub row_ids: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct FoldResult {
    pub reducer: ReducerKind,
    pub classifier: ClassifierKind,
    pub fold: usize,
    pub test_rows: usize,
    pub confusion: ConfusionMatrix,
    pub metrics: Metrics,
    pub trace: Option<TrainingTrace>,
}

#[derive(Debug, Clone)]
pub struct AggregateResult {
    pub reducer: ReducerKind,
    pub classifier: ClassifierKind,
    pub confusion: ConfusionMatrix,
    pub metrics: Metrics,
}

#[derive(Debug, Clone)]
pub struct ReducerTrace {
    pub reducer: ReducerKind,
    pub fold: usize,
    pub trace: TrainingTrace,
}

#[derive(Debug, Clone)]
pub struct EvaluationReport {
    pub plan: FoldPlan,
    pub row_ids: Vec<String>,
    /// Ordered by reducer, classifier, fold as requested.
    pub folds: Vec<FoldResult>,
    pub aggregates: Vec<AggregateResult>,
    pub reducer_traces: Vec<ReducerTrace>,
    pub fit_log: Vec<FitRecord>,
}

impl EvaluationReport {
    pub fn test_row_ids(&self, fold: usize) -> Vec<&str> {
        self.plan
            .test_indices(fold)
            .into_iter()
            .map(|i| self.row_ids[i].as_str())
            .collect()
    }
}

fn coordinate(reducer: Option<ReducerKind>, classifier: Option<ClassifierKind>, fold: usize) -> String {
    let mut parts = Vec::new();
    if let Some(r) = reducer {
        parts.push(format!("features={}", r.label()));
    }
    if let Some(c) = classifier {
        parts.push(format!("classifier={}", c.label()));
    }
    parts.push(format!("fold={fold}"));
    parts.join(" ")
}

struct FoldData {
    balanced: LabeledDataset,
    test: LabeledDataset,
}

struct ReducedFold {
    train: LabeledDataset,
    test: LabeledDataset,
    trace: Option<TrainingTrace>,
}

pub fn run_experiment(dataset: &LabeledDataset, cfg: &ExperimentConfig) -> Result<EvaluationReport> {
    cfg.validate()?;
    dataset.require_both_classes()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    pool.install(|| run_grid(dataset, cfg))
}

fn run_grid(dataset: &LabeledDataset, cfg: &ExperimentConfig) -> Result<EvaluationReport> {
    let fold_seed = seed::derive_seed(cfg.seed, "folds", "");
    let plan = if cfg.stratified {
        kfold_split_stratified(&dataset.labels, cfg.folds, fold_seed)?
    } else {
        kfold_split(dataset.n_rows(), cfg.folds, fold_seed)?
    };
    let k = plan.k;
    let mut fit_log = Vec::new();

    let fold_data = (0..k)
        .into_par_iter()
        .map(|fold| {
            let train = dataset.select_rows(&plan.train_indices(fold));
            let test = dataset.select_rows(&plan.test_indices(fold));
            let adasyn_cfg = AdasynConfig {
                seed: seed::derive_seed(cfg.seed, "adasyn", &format!("fold={fold}")),
                ..cfg.adasyn
            };
            let outcome = adasyn(&train, &adasyn_cfg).map_err(|e| e.at(coordinate(None, None, fold)))?;
            Ok((
                train.row_ids,
                FoldData {
                    balanced: outcome.dataset,
                    test,
                },
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let fold_data: Vec<FoldData> = fold_data
        .into_iter()
        .enumerate()
        .map(|(fold, (row_ids, data))| {
            fit_log.push(FitRecord {
                stage: FitStage::Adasyn,
                reducer: None,
                classifier: None,
                fold,
                row_ids,
            });
            data
        })
        .collect();

    let reducer_cells: Vec<(ReducerKind, usize)> = cfg
        .reducers
        .iter()
        .flat_map(|&r| (0..k).map(move |f| (r, f)))
        .collect();
    let reduced = reducer_cells
        .par_iter()
        .map(|&(kind, fold)| {
            let data = &fold_data[fold];
            let spec = ReducerSpec {
                kind,
                threshold: cfg.variance_threshold,
                train: crate::neural::TrainConfig {
                    seed: seed::derive_seed(cfg.seed, "reducer", &format!("{}/fold={fold}", kind.tag())),
                    ..cfg.autoencoder
                },
            };
            let at = || coordinate(Some(kind), None, fold);
            let started = Instant::now();
            let fit = reduce::fit(&spec, data.balanced.matrix.view()).map_err(|e| e.at(at()))?;
            let cell = ReducedFold {
                train: fit.model.apply_dataset(&data.balanced).map_err(|e| e.at(at()))?,
                test: fit.model.apply_dataset(&data.test).map_err(|e| e.at(at()))?,
                trace: fit.trace,
            };
            info!("[{}] reducer fitted in {:.1?}", at(), started.elapsed());
            Ok(cell)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut reducer_traces = Vec::new();
    for (&(reducer, fold), cell) in reducer_cells.iter().zip(&reduced) {
        fit_log.push(FitRecord {
            stage: FitStage::Reducer,
            reducer: Some(reducer),
            classifier: None,
            fold,
            row_ids: fold_data[fold].balanced.row_ids.clone(),
        });
        if let Some(trace) = &cell.trace {
            reducer_traces.push(ReducerTrace {
                reducer,
                fold,
                trace: trace.clone(),
            });
        }
    }

    let cells: Vec<(usize, ReducerKind, ClassifierKind, usize)> = cfg
        .reducers
        .iter()
        .enumerate()
        .flat_map(|(ri, &r)| {
            cfg.classifiers
                .iter()
                .flat_map(move |&c| (0..k).map(move |f| (ri * k + f, r, c, f)))
        })
        .collect();
    let folds = cells
        .par_iter()
        .map(|&(cell_index, reducer, classifier, fold)| {
            let data = &reduced[cell_index];
            let at = || coordinate(Some(reducer), Some(classifier), fold);
            let cell_seed = seed::derive_seed(
                cfg.seed,
                "classifier",
                &format!("{}/{}/fold={fold}", reducer.tag(), classifier.tag()),
            );
            let started = Instant::now();
            let (model, trace) = train_classifier(classifier, &data.train, &cfg.models, cell_seed, reducer.tag())
                .map_err(|e| e.at(at()))?;
            let prediction = model.predict(data.test.matrix.view()).map_err(|e| e.at(at()))?;
            let cm = confusion(&data.test.labels, &prediction.labels).map_err(|e| e.at(at()))?;
            info!(
                "[{}] accuracy {:.4} in {:.1?}",
                at(),
                cm.metrics().accuracy,
                started.elapsed()
            );
            Ok(FoldResult {
                reducer,
                classifier,
                fold,
                test_rows: data.test.n_rows(),
                confusion: cm,
                metrics: cm.metrics(),
                trace,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    for (&(cell_index, reducer, classifier, fold), _) in cells.iter().zip(&folds) {
        fit_log.push(FitRecord {
            stage: FitStage::Classifier,
            reducer: Some(reducer),
            classifier: Some(classifier),
            fold,
            row_ids: reduced[cell_index].train.row_ids.clone(),
        });
    }

    let aggregates = folds
        .chunks(k)
        .map(|chunk| {
            let total = chunk
                .iter()
                .fold(ConfusionMatrix::default(), |acc, f| acc + f.confusion);
            AggregateResult {
                reducer: chunk[0].reducer,
                classifier: chunk[0].classifier,
                confusion: total,
                metrics: total.metrics(),
            }
        })
        .collect();

    Ok(EvaluationReport {
        plan,
        row_ids: dataset.row_ids.clone(),
        folds,
        aggregates,
        reducer_traces,
        fit_log,
    })
}
