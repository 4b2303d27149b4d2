//! Two-stage training: frozen embeddings at a constant rate, then all
//! parameters under linear warmup and cosine decay.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::adam::Adam;
use super::config::{ModelConfig, TrainSchedule};
use super::network::Targets;
use super::schedule::WarmupCosine;
use super::vocab::Vocabularies;
use super::{ModelError, ParserModel};
use crate::conllu::Treebank;
use crate::sampler::{treebank_weights, BatchSampler};
use crate::scalar::Scalar;

const SAMPLER_STREAM: u64 = 1;
const DROPOUT_STREAM: u64 = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    Frozen,
    Main,
}

/// Summary handed to the progress callback after each epoch.
#[derive(Clone, Debug)]
pub struct EpochStats {
    pub stage: Stage,
    pub epoch: usize,
    pub mean_loss: f64,
    pub last_lr: f64,
}

pub struct Trainer<'a, T> {
    model: ParserModel<T>,
    schedule: TrainSchedule,
    treebanks: &'a [Treebank],
    targets: Vec<Vec<Targets>>,
    sampler: BatchSampler,
    dropout_rng: ChaCha8Rng,
    adam: Adam<T>,
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

impl<'a, T: Scalar> Trainer<'a, T> {
    /// Builds vocabularies from `treebanks` and initialises the model.
    pub fn new(config: ModelConfig, schedule: TrainSchedule, treebanks: &'a [Treebank]) -> Result<Self, ModelError> {
        if treebanks.is_empty() || treebanks.iter().any(|tb| tb.sentences.is_empty()) {
            return Err(ModelError::EmptyTreebank);
        }
        schedule.validate()?;
        let vocabs = Vocabularies::from_treebanks(treebanks, config.lowercase_forms);
        let model = ParserModel::<T>::new(config, vocabs)?;

        let targets = treebanks
            .iter()
            .map(|tb| tb.sentences.iter().map(|s| model.targets(s)).collect())
            .collect::<Result<Vec<Vec<_>>, _>>()?;

        let counts: Vec<usize> = treebanks.iter().map(Treebank::sentence_count).collect();
        let weights = treebank_weights(&counts).map_err(|_| ModelError::EmptyTreebank)?;
        let seed = model.config.seed;
        let mut sampler_seed = stream_rng(seed, SAMPLER_STREAM);
        let sampler = BatchSampler::new(rand::Rng::gen(&mut sampler_seed), &counts, &weights)
            .map_err(|_| ModelError::EmptyTreebank)?;

        let adam = Adam::new(&model.params);
        Ok(Trainer {
            model,
            schedule,
            treebanks,
            targets,
            sampler,
            dropout_rng: stream_rng(seed, DROPOUT_STREAM),
            adam,
        })
    }

    pub fn model(&self) -> &ParserModel<T> {
        &self.model
    }

    fn step(&mut self, lr: f64, freeze: bool) -> Result<f64, ModelError> {
        let picks = self.sampler.next_batch(self.schedule.batch_size);
        let p = self.model.config.word_dropout;
        let mut batch = Vec::with_capacity(picks.len());
        for (tb, idx) in picks {
            let sentence = &self.treebanks[tb].sentences[idx];
            let inputs = self
                .model
                .inputs_with_dropout(sentence, Some((&mut self.dropout_rng, p)))?;
            batch.push((inputs, self.targets[tb][idx].clone()));
        }
        let (loss, grads) = self.model.loss_and_gradients_encoded(&batch)?;
        self.adam.step(&mut self.model.params, &grads, lr, freeze);
        Ok(loss.as_f64())
    }

    /// Embedding tables stay fixed; everything else trains at `frozen_lr`.
    pub fn run_frozen_stage(&mut self, mut progress: impl FnMut(&EpochStats)) -> Result<(), ModelError> {
        let lr = self.schedule.frozen_lr;
        for epoch in 0..self.schedule.frozen_epochs {
            let mut total = 0.0;
            for _ in 0..self.schedule.batches_per_epoch {
                total += self.step(lr, true)?;
            }
            progress(&EpochStats {
                stage: Stage::Frozen,
                epoch,
                mean_loss: total / self.schedule.batches_per_epoch.max(1) as f64,
                last_lr: lr,
            });
        }
        Ok(())
    }

    /// All parameters train under warmup and cosine decay.
    pub fn run_main_stage(&mut self, mut progress: impl FnMut(&EpochStats)) -> Result<(), ModelError> {
        let lr_at = WarmupCosine::from_schedule(&self.schedule);
        let per_epoch = self.schedule.batches_per_epoch;
        for epoch in 0..self.schedule.main_epochs {
            let mut total = 0.0;
            let mut lr = 0.0;
            for b in 0..per_epoch {
                lr = lr_at.lr(epoch * per_epoch + b);
                total += self.step(lr, false)?;
            }
            progress(&EpochStats {
                stage: Stage::Main,
                epoch,
                mean_loss: total / per_epoch.max(1) as f64,
                last_lr: lr,
            });
        }
        Ok(())
    }

    pub fn into_model(self) -> ParserModel<T> {
        self.model
    }
}

/// Runs both stages with progress reporting.
pub fn train_with_progress<T: Scalar>(
    config: ModelConfig,
    schedule: TrainSchedule,
    treebanks: &[Treebank],
    mut progress: impl FnMut(&EpochStats),
) -> Result<ParserModel<T>, ModelError> {
    let mut trainer = Trainer::new(config, schedule, treebanks)?;
    trainer.run_frozen_stage(&mut progress)?;
    trainer.run_main_stage(&mut progress)?;
    Ok(trainer.into_model())
}

/// Trains a model on `treebanks`, sampling sentences in proportion to the
/// square root of each treebank's size.
pub fn train<T: Scalar>(
    config: ModelConfig,
    schedule: TrainSchedule,
    treebanks: &[Treebank],
) -> Result<ParserModel<T>, ModelError> {
    train_with_progress(config, schedule, treebanks, |_| {})
}
