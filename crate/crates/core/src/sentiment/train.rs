use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{bce_from_logit, embedding_rows, Mode, Params, SentimentModel};
use super::SentimentError;
use crate::corpus::Label;
use crate::textprep::{TokenSeq, Vocab};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 5, batch_size: 64, learning_rate: 0.05, momentum: 0.9, seed: 7 }
    }
}

/// A tweet as embedding rows plus its gold label.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub rows: Vec<usize>,
    pub label: Label,
}

impl Example {
    pub fn new(tokens: &TokenSeq, vocab: &Vocab, pad_len: usize, label: Label) -> Self {
        Self { rows: embedding_rows(tokens, vocab, pad_len), label }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    /// Mean loss and accuracy of the dropout-perturbed training passes.
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_loss: Option<f64>,
    pub val_accuracy: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: SentimentModel,
    pub log: Vec<EpochLog>,
    /// 1-based epoch whose parameters were kept.
    pub best_epoch: usize,
}

/// Eval-mode positive-class probabilities.
pub fn score_examples(model: &SentimentModel, examples: &[Example]) -> Result<Vec<f64>, SentimentError> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    examples
        .iter()
        .map(|ex| model.forward(&model.matrix_from_rows(&ex.rows), Mode::Eval, &mut rng))
        .collect()
}

fn loss_and_accuracy(model: &SentimentModel, examples: &[Example]) -> Result<(f64, f64), SentimentError> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut loss = 0.0;
    let mut correct = 0usize;
    for ex in examples {
        let cache = model.forward_cached(&model.matrix_from_rows(&ex.rows), Mode::Eval, &mut rng)?;
        loss += bce_from_logit(cache.logit, ex.label.is_positive());
        correct += usize::from(super::classify(cache.prob) == ex.label);
    }
    let n = examples.len() as f64;
    Ok((loss / n, correct as f64 / n))
}

/// Mini-batch SGD with momentum on binary cross-entropy, starting from
/// `model`. Returns the parameters from the epoch with the best validation
/// accuracy (training accuracy when `val` is empty).
pub fn train(
    mut model: SentimentModel,
    train: &[Example],
    val: &[Example],
    config: &TrainConfig,
) -> Result<TrainOutcome, SentimentError> {
    if train.is_empty() {
        return Err(SentimentError::EmptyData);
    }
    let positives = train.iter().filter(|e| e.label.is_positive()).count();
    if positives == 0 || positives == train.len() {
        return Err(SentimentError::DegenerateLabels);
    }
    if config.batch_size == 0 {
        return Err(SentimentError::InvalidShape("batch size must be positive".into()));
    }
    if let Some(r) = train.iter().chain(val).flat_map(|e| &e.rows).find(|&&r| r >= model.shape.vocab_rows) {
        return Err(SentimentError::InvalidShape(format!(
            "embedding row {r} outside {} rows",
            model.shape.vocab_rows
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut velocity = Params::zeros(&model.shape);
    let mut grads = Params::zeros(&model.shape);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut log = Vec::with_capacity(config.epochs);
    let mut best: Option<(f64, usize, Params)> = None;

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for batch in order.chunks(config.batch_size) {
            grads.groups_mut().into_iter().for_each(|g| g.fill(0.0));
            let scale = 1.0 / batch.len() as f64;
            for &i in batch {
                let ex = &train[i];
                let t = model.matrix_from_rows(&ex.rows);
                let cache = model.forward_cached(&t, Mode::Train, &mut rng)?;
                let y = if ex.label.is_positive() { 1.0 } else { 0.0 };
                loss_sum += bce_from_logit(cache.logit, y == 1.0);
                correct += usize::from(super::classify(cache.prob) == ex.label);
                model.backward(&cache, &ex.rows, (cache.prob - y) * scale, &mut grads);
            }
            for (v, (p, g)) in velocity
                .groups_mut()
                .into_iter()
                .zip(model.params.groups_mut().into_iter().zip(grads.groups_mut()))
            {
                for ((vi, pi), gi) in v.iter_mut().zip(p.iter_mut()).zip(g.iter()) {
                    *vi = config.momentum * *vi - config.learning_rate * gi;
                    *pi += *vi;
                }
            }
            if !model.params.all_finite() {
                return Err(SentimentError::NumericalFault(format!("non-finite parameters in epoch {epoch}")));
            }
        }

        let n = train.len() as f64;
        let (val_loss, val_accuracy) = if val.is_empty() {
            (None, None)
        } else {
            let (l, a) = loss_and_accuracy(&model, val)?;
            (Some(l), Some(a))
        };
        let entry = EpochLog {
            epoch,
            train_loss: loss_sum / n,
            train_accuracy: correct as f64 / n,
            val_loss,
            val_accuracy,
        };
        let score = entry.val_accuracy.unwrap_or(entry.train_accuracy);
        if best.as_ref().is_none_or(|(s, _, _)| score > *s) {
            best = Some((score, epoch, model.params.clone()));
        }
        log.push(entry);
    }

    let best_epoch = match best {
        Some((_, epoch, params)) => {
            model.params = params;
            epoch
        }
        None => 0,
    };
    Ok(TrainOutcome { model, log, best_epoch })
}

/// Deterministic train/validation split holding out `val_fraction` of the
/// examples, chosen by a seeded shuffle.
pub fn split(examples: Vec<Example>, val_fraction: f64, seed: u64) -> (Vec<Example>, Vec<Example>) {
    let mut order: Vec<usize> = (0..examples.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_val = ((examples.len() as f64) * val_fraction.clamp(0.0, 1.0)).round() as usize;
    let held: std::collections::BTreeSet<usize> = order[..n_val].iter().copied().collect();
    let (mut tr, mut va) = (Vec::new(), Vec::new());
    for (i, ex) in examples.into_iter().enumerate() {
        if held.contains(&i) {
            va.push(ex);
        } else {
            tr.push(ex);
        }
    }
    (tr, va)
}
