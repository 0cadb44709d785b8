use alloc::format;
use alloc::sync::Arc;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::adversarial::adversarial_loss;
use super::{Example, Model};
use crate::error::{Error, Result};
use crate::metrics::{mae, pearson};
use crate::nn::layers::dropout_mask;
use crate::nn::{AdamW, AdamWConfig, Tape, Var};

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    /// Mean clean MSE over the epoch's training examples.
    pub train_loss: f64,
    pub trial_pearson: Option<f64>,
    pub trial_mae: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters the model holds after training.
    pub best_epoch: usize,
}

fn golds(examples: &[&Example]) -> Result<Vec<f64>> {
    examples
        .iter()
        .map(|e| e.gold.ok_or_else(|| Error::Data(format!("entry {} has no gold score", e.id))))
        .collect()
}

/// Mini-batch training with AdamW on MSE. Batches are shuffled with a
/// generator seeded from `seed + 1`. With a trial split the parameters of
/// the epoch with the best trial Pearson are kept, otherwise the last
/// epoch's.
pub fn train(model: &mut Model, train: &[Example], trial: Option<&[Example]>) -> Result<History> {
    if train.is_empty() {
        return Err(Error::Usage("training set is empty".into()));
    }
    let cfg = model.config;
    golds(&train.iter().collect::<Vec<_>>())?;
    let trial_gold = match trial {
        Some(t) if !t.is_empty() => Some(golds(&t.iter().collect::<Vec<_>>())?),
        _ => None,
    };
    model.fit_standardization(train)?;
    let mut opt = AdamW::new(AdamWConfig { lr: cfg.lr, weight_decay: cfg.weight_decay, ..AdamWConfig::default() });
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut history = History { epochs: Vec::with_capacity(cfg.epochs), best_epoch: 0 };
    let mut best: Option<(f64, Vec<crate::nn::Tensor>)> = None;

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for (b, idx) in order.chunks(cfg.batch_size).enumerate() {
            let batch: Vec<&Example> = idx.iter().map(|&i| &train[i]).collect();
            let loss = train_step(model, &mut opt, &batch, &mut rng)?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch: b + 1 });
            }
            loss_sum += loss * batch.len() as f64;
        }
        let mut record = EpochRecord { epoch, train_loss: loss_sum / train.len() as f64, trial_pearson: None, trial_mae: None };
        if let (Some(t), Some(g)) = (trial, &trial_gold) {
            let preds = model.predict(t)?;
            record.trial_pearson = pearson(&preds, g).ok();
            record.trial_mae = Some(mae(&preds, g)?);
            let score = record.trial_pearson.unwrap_or(f64::NEG_INFINITY);
            if best.as_ref().map_or(true, |(s, _)| score > *s) {
                best = Some((score, model.params.values()));
                history.best_epoch = epoch;
            }
        } else {
            history.best_epoch = epoch;
        }
        log::info!(
            "epoch {epoch}: train loss {:.6}{}",
            record.train_loss,
            record.trial_pearson.map(|r| format!(", trial pearson {r:.4}")).unwrap_or_default()
        );
        history.epochs.push(record);
    }
    if let Some((_, values)) = best {
        model.params.restore(values);
    }
    Ok(history)
}

/// One optimizer step on `batch`; returns the clean batch loss.
fn train_step(model: &mut Model, opt: &mut AdamW, batch: &[&Example], rng: &mut ChaCha8Rng) -> Result<f64> {
    let cfg = model.config;
    let gold = golds(batch)?;
    let mut tape = Tape::new();
    let bound = model.bind(&mut tape);
    let (x, late) = model.input_block(&mut tape, &bound, batch)?;
    let mask = if cfg.dropout > 0.0 {
        Some(Arc::new(dropout_mask(tape.value(x).len(), cfg.dropout, rng)?))
    } else {
        None
    };
    let mut inputs = alloc::vec![x];
    inputs.extend(late);
    let epsilon = if cfg.use_adversarial { cfg.epsilon } else { 0.0 };
    let m: &Model = model;
    let out = adversarial_loss(&mut tape, &inputs, epsilon, |tape: &mut Tape, v: &[Var]| {
        let pred = m.head(tape, &bound, v[0], v.get(1).copied(), mask.as_ref())?;
        tape.mse(pred, &gold)
    })?;
    let clean = tape.value(out.clean).item()?;
    if !clean.is_finite() {
        return Ok(clean);
    }
    tape.backward(out.total)?;
    model.params.zero_grad();
    model.params.accumulate_grads(&tape);
    model.params.fill_missing_grads();
    opt.step(&mut model.params)?;
    Ok(clean)
}
