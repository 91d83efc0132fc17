use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::loss::softmax_cross_entropy;
use super::network::Network;
use super::optim::{lr_at, sgd_step, OptimizerConfig};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::eval::accuracy;
use crate::rng::{derive_seed, rng_for};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    /// Sample-weighted mean training loss over the epoch's batches.
    pub loss: f64,
    pub train_acc: f64,
    pub test_acc: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub records: Vec<EpochRecord>,
}

impl TrainingLog {
    /// One JSON object per line.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("epoch record serializes"));
            out.push('\n');
        }
        out
    }

    pub fn last(&self) -> Option<&EpochRecord> {
        self.records.last()
    }
}

/// Minibatch SGD over `epochs` epochs. Batches come from a fresh seeded
/// shuffle each epoch; the last partial batch is kept.
pub fn train(
    net: &mut Network,
    train_set: &Dataset,
    test_set: Option<&Dataset>,
    opt: &OptimizerConfig,
    epochs: usize,
    batch_size: usize,
    seed: u64,
) -> Result<TrainingLog> {
    opt.validate()?;
    if train_set.is_empty() {
        return Err(Error::InvalidArgument("empty training set".into()));
    }
    if batch_size == 0 {
        return Err(Error::InvalidArgument("batch size must be >= 1".into()));
    }
    if !train_set.is_labeled() {
        return Err(Error::InvalidArgument("training set has unlabeled samples".into()));
    }
    let n = train_set.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut log = TrainingLog::default();
    for epoch in 0..epochs {
        let lr = lr_at(&opt.schedule, epoch, epochs, opt.lr);
        order.sort_unstable();
        order.shuffle(&mut rng_for(derive_seed(seed, epoch as u64), "epoch-shuffle"));
        let mut loss_sum = 0.0;
        for chunk in order.chunks(batch_size) {
            let x = train_set.features().select_rows(chunk);
            let y: Vec<usize> = chunk.iter().map(|&i| train_set.labels()[i]).collect();
            let out = net.forward(&x)?;
            let (loss, grad) = softmax_cross_entropy(&out.logits, &y)?;
            loss_sum += loss * chunk.len() as f64;
            net.backward(&out.cache, &grad)?;
            sgd_step(net, opt, lr);
        }
        let train_acc = accuracy(&net.predict(train_set.features())?, train_set.labels())?;
        let test_acc = match test_set {
            Some(t) => Some(accuracy(&net.predict(t.features())?, t.labels())?),
            None => None,
        };
        log.records.push(EpochRecord {
            epoch,
            lr,
            loss: loss_sum / n as f64,
            train_acc,
            test_acc,
        });
    }
    Ok(log)
}
