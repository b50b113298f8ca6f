use log::info;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::metrics::MetricsReport;
use super::run::{DataSource, RunConfig};
use crate::autograd::{adam_step, AdamConfig, AdamState, ParamStore, Tape, Var};
use crate::dataset::{generate_synthetic, prepare, read_split, DatasetSplit, Vocab};
use crate::error::{Error, Result};
use crate::graph::Representation;
use crate::layers::BatchStats;
use crate::model::{encode_samples, Batch, EncodedSample, MagrecModel, VocabSizes};

/// A trainable click-probability model.
pub trait Scorer: Clone {
    fn params(&self) -> &ParamStore;
    fn params_mut(&mut self) -> &mut ParamStore;
    /// `B × 1` probabilities plus batch statistics in training mode.
    fn score(&self, tape: &mut Tape, batch: &Batch, training: bool) -> Result<(Var, Option<BatchStats>)>;
    fn commit_batch_stats(&mut self, stats: &BatchStats);
}

impl Scorer for MagrecModel {
    fn params(&self) -> &ParamStore {
        &self.store
    }

    fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    fn score(&self, tape: &mut Tape, batch: &Batch, training: bool) -> Result<(Var, Option<BatchStats>)> {
        let out = self.forward(tape, batch, training)?;
        Ok((out.prediction, out.bn_stats))
    }

    fn commit_batch_stats(&mut self, stats: &BatchStats) {
        let bn = self.bn.clone();
        bn.update_running(&mut self.store, stats);
    }
}

/// Loads or generates the split described by `run`.
pub fn load_split(run: &RunConfig) -> Result<DatasetSplit> {
    match &run.data {
        DataSource::Split(dir) => read_split(dir),
        DataSource::Synthetic(cfg) => Ok(prepare(&generate_synthetic(cfg)?, run.data_seed)),
    }
}

/// Graph-encoded samples of every split part.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub repr: Representation,
    pub vocab: Vocab,
    pub train: Vec<EncodedSample>,
    pub validation: Vec<EncodedSample>,
    pub test: Vec<EncodedSample>,
    /// Samples without a buildable graph (Disjoint with no history in the
    /// candidate's domain).
    pub dropped: usize,
}

impl PreparedData {
    pub fn new(split: &DatasetSplit, repr: Representation) -> Result<Self> {
        let vocab = Vocab::from_split(split);
        let (train, a) = encode_samples(&split.train, repr, &vocab)?;
        let (validation, b) = encode_samples(&split.validation, repr, &vocab)?;
        let (test, c) = encode_samples(&split.test, repr, &vocab)?;
        if a + b + c > 0 {
            info!("{repr}: dropped {} samples without a graph", a + b + c);
        }
        Ok(Self {
            repr,
            vocab,
            train,
            validation,
            test,
            dropped: a + b + c,
        })
    }

    pub fn sizes(&self) -> VocabSizes {
        let (items, users, domains) = self.vocab.sizes();
        VocabSizes { items, users, domains }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSettings {
    pub epochs: usize,
    /// Epochs without validation improvement before stopping; 0 disables.
    pub patience: usize,
    pub batch_size: usize,
    pub eval_batch_size: usize,
    pub adam: AdamConfig,
    pub seed: u64,
}

impl TrainSettings {
    pub fn from_run(run: &RunConfig) -> Self {
        Self {
            epochs: run.epochs,
            patience: run.patience,
            batch_size: run.model.batch_size,
            eval_batch_size: run.eval_batch_size,
            adam: AdamConfig {
                learning_rate: run.model.learning_rate,
                weight_decay: run.model.weight_decay,
                ..AdamConfig::default()
            },
            seed: run.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochSummary {
    pub epoch: usize,
    pub train_loss: f64,
    pub validation: MetricsReport,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<M> {
    /// Parameters from the epoch with the lowest validation logloss.
    pub model: M,
    pub best_epoch: usize,
    pub history: Vec<EpochSummary>,
}

impl<M> TrainOutcome<M> {
    pub fn best(&self) -> &EpochSummary {
        &self.history[self.best_epoch - 1]
    }

    pub fn history_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,val_logloss,val_auc\n");
        for h in &self.history {
            let auc = h.validation.overall.auc.map_or_else(|| "NA".into(), |a| a.to_string());
            out.push_str(&format!("{},{},{},{auc}\n", h.epoch, h.train_loss, h.validation.overall.logloss));
        }
        out
    }
}

/// Eval-mode scores in sample order. Batches are sharded across worker
/// threads; each batch is scored exactly as it would be serially.
pub fn predict_all<M: Scorer + Sync>(model: &M, samples: &[EncodedSample], batch_size: usize) -> Result<Vec<f64>> {
    let chunks: Vec<&[EncodedSample]> = samples.chunks(batch_size.max(1)).collect();
    let workers = std::thread::available_parallelism()
        .map_or(1, |n| n.get())
        .min(chunks.len())
        .max(1);
    let score_chunk = |chunk: &[EncodedSample]| -> Result<Vec<f64>> {
        let batch = Batch::collate(chunk);
        let mut tape = Tape::new();
        let (p, _) = model.score(&mut tape, &batch, false)?;
        Ok(tape.value(p).to_vec())
    };
    let mut scored: Vec<Option<Result<Vec<f64>>>> = (0..chunks.len()).map(|_| None).collect();
    std::thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let chunks = &chunks;
                let score_chunk = &score_chunk;
                s.spawn(move || {
                    (w..chunks.len())
                        .step_by(workers)
                        .map(|i| (i, score_chunk(chunks[i])))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        for h in handles {
            for (i, r) in h.join().expect("evaluation worker panicked") {
                scored[i] = Some(r);
            }
        }
    });
    let mut out = Vec::with_capacity(samples.len());
    for r in scored {
        out.extend(r.expect("every chunk scored")?);
    }
    Ok(out)
}

/// Per-domain and overall metrics with batch norm in eval mode.
pub fn evaluate<M: Scorer + Sync>(
    model: &M,
    samples: &[EncodedSample],
    batch_size: usize,
    seed: u64,
    epoch: usize,
) -> Result<MetricsReport> {
    if samples.is_empty() {
        return Err(Error::Data("cannot evaluate an empty split".into()));
    }
    let scores = predict_all(model, samples, batch_size)?;
    let labels: Vec<f64> = samples.iter().map(|s| s.label).collect();
    let domains: Vec<_> = samples.iter().map(|s| s.domain).collect();
    MetricsReport::compute(&scores, &labels, &domains, seed, epoch)
}

/// One epoch of shuffled mini-batch Adam; returns the mean training loss.
/// A trailing batch of a single sample is skipped (batch norm needs two).
pub fn train_epoch<M: Scorer>(
    model: &mut M,
    adam: &mut AdamState,
    samples: &[EncodedSample],
    batch_size: usize,
    seed: u64,
    epoch: usize,
) -> Result<f64> {
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch as u64);
    order.shuffle(&mut rng);
    let (mut total, mut seen) = (0.0, 0usize);
    for chunk in order.chunks(batch_size.max(2)) {
        if chunk.len() < 2 {
            continue;
        }
        let batch = Batch::collate(chunk.iter().map(|&i| &samples[i]));
        let mut tape = Tape::new();
        let (pred, stats) = model.score(&mut tape, &batch, true)?;
        let loss = tape.bce_loss(pred, &batch.labels)?;
        total += tape.scalar(loss) * chunk.len() as f64;
        seen += chunk.len();
        tape.backward(loss, model.params_mut())?;
        adam_step(model.params_mut(), adam)?;
        if let Some(s) = stats {
            model.commit_batch_stats(&s);
        }
    }
    Ok(total / seen.max(1) as f64)
}

/// Trains with early stopping on validation overall logloss and returns the
/// best model.
pub fn train_scorer<M: Scorer + Sync>(mut model: M, data: &PreparedData, settings: &TrainSettings) -> Result<TrainOutcome<M>> {
    if data.train.len() < 2 {
        return Err(Error::Config(format!(
            "training needs at least 2 samples, the train split has {}",
            data.train.len()
        )));
    }
    if data.validation.is_empty() {
        return Err(Error::Data("validation split is empty".into()));
    }
    let mut adam = AdamState::for_store(settings.adam, model.params());
    let mut best: Option<(f64, usize, M)> = None;
    let mut history = Vec::new();
    let mut stale = 0;
    for epoch in 1..=settings.epochs {
        let train_loss = train_epoch(&mut model, &mut adam, &data.train, settings.batch_size, settings.seed, epoch)?;
        let validation = evaluate(&model, &data.validation, settings.eval_batch_size, settings.seed, epoch)?;
        let ll = validation.overall.logloss;
        info!("epoch {epoch}: train loss {train_loss:.5}, validation logloss {ll:.5}");
        history.push(EpochSummary {
            epoch,
            train_loss,
            validation,
        });
        if best.as_ref().is_none_or(|(b, _, _)| ll < *b) {
            best = Some((ll, epoch, model.clone()));
            stale = 0;
        } else {
            stale += 1;
            if settings.patience > 0 && stale >= settings.patience {
                break;
            }
        }
    }
    let (_, best_epoch, model) = best.expect("at least one epoch");
    Ok(TrainOutcome {
        model,
        best_epoch,
        history,
    })
}

/// Builds a model from `run` (seeded by `run.seed`) and trains it.
pub fn train(run: &RunConfig, data: &PreparedData) -> Result<TrainOutcome<MagrecModel>> {
    run.validate()?;
    let model = MagrecModel::new(run.model.clone(), data.sizes(), run.seed)?;
    train_scorer(model, data, &TrainSettings::from_run(run))
}
