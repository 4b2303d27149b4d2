//! The jointly trained arc, label and morphology scorer.

pub mod adam;
pub mod config;
pub mod io;
pub mod network;
pub mod params;
pub mod schedule;
pub mod train;
pub mod vocab;

use ndarray::{Array2, Axis};
use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::conllu::{Features, Sentence};
use crate::decoder::{decode_mst, ArcScores};
use crate::scalar::{lit, Scalar};

pub use config::{load_config, parse_config, ChannelConfig, ChannelSource, ConfigError, ModelConfig, TrainSchedule};
pub use network::{argmax, Inputs, Targets};
pub use params::{ParamKind, Params};
pub use vocab::{Vocab, Vocabularies};

/// Added to head probabilities before taking logs for decoding.
pub const LOG_EPSILON: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("token {token} has no UPOS but the model reads gold UPOS")]
    MissingGoldUpos { token: usize },
    #[error("token {token} has no gold {what}")]
    MissingAnnotation { token: usize, what: &'static str },
    #[error("{kind} `{value}` is not in the model vocabulary")]
    UnknownLabel { kind: &'static str, value: String },
    #[error("cannot score an empty sentence")]
    EmptySentence,
    #[error("training data contains no sentences")]
    EmptyTreebank,
    #[error("empty batch")]
    EmptyBatch,
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("model file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Probability outputs of the network for one sentence.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoredSentence<T> {
    pub arc_scores: ArcScores<T>,
    /// `n x (n + 1)`: row `d - 1` is the head distribution of token `d`.
    pub head_probs: Array2<T>,
    pub label_probs: Array2<T>,
    pub upos_probs: Array2<T>,
    pub feats_probs: Array2<T>,
}

impl<T: Scalar> ScoredSentence<T> {
    pub fn len(&self) -> usize {
        self.head_probs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Most probable head of every token (first one on ties).
    pub fn argmax_heads(&self) -> Vec<usize> {
        self.head_probs.axis_iter(Axis(0)).map(argmax).collect()
    }

    /// `log(p + eps)` of the head distributions as decoder input.
    pub fn log_head_scores(&self) -> ArcScores<T> {
        log_arc_scores(&self.head_probs)
    }
}

pub(crate) fn log_arc_scores<T: Scalar>(head_probs: &Array2<T>) -> ArcScores<T> {
    let eps = lit::<T>(LOG_EPSILON);
    ArcScores::from_fn(head_probs.nrows(), |h, d| (head_probs[[d - 1, h]] + eps).ln())
}

/// Configuration, vocabularies and parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct ParserModel<T> {
    pub config: ModelConfig,
    pub vocabs: Vocabularies,
    pub params: Params<T>,
}

impl<T: Scalar> ParserModel<T> {
    /// Freshly initialised model.
    pub fn new(config: ModelConfig, vocabs: Vocabularies) -> Result<Self, ModelError> {
        config.validate()?;
        let params = Params::init(&config, &vocabs, config.seed);
        Ok(ParserModel { config, vocabs, params })
    }

    /// Same model in another precision.
    pub fn cast<U: Scalar>(&self) -> ParserModel<U> {
        ParserModel {
            config: self.config.clone(),
            vocabs: self.vocabs.clone(),
            params: self.params.cast(),
        }
    }

    /// Maps a sentence to embedding indices.
    pub fn inputs(&self, s: &Sentence) -> Result<Inputs, ModelError> {
        self.inputs_with_dropout(s, None::<(&mut rand_chacha::ChaCha8Rng, f64)>)
    }

    /// As [`ParserModel::inputs`], replacing each form by the unknown entry
    /// with probability `p`.
    pub fn inputs_with_dropout<R: Rng>(
        &self,
        s: &Sentence,
        mut dropout: Option<(&mut R, f64)>,
    ) -> Result<Inputs, ModelError> {
        if s.is_empty() {
            return Err(ModelError::EmptySentence);
        }
        let mut forms = Vec::with_capacity(s.len());
        for t in &s.tokens {
            let mut idx = self
                .vocabs
                .forms
                .get_or_unknown(&vocab::normalize_form(&t.form, self.config.lowercase_forms));
            if let Some((rng, p)) = dropout.as_mut() {
                if rng.gen::<f64>() < *p {
                    idx = 0;
                }
            }
            forms.push(idx);
        }
        let upos = if self.config.use_gold_upos {
            s.tokens
                .iter()
                .map(|t| match &t.upos {
                    Some(u) => Ok(self.vocabs.upos_input.get_or_unknown(u)),
                    None => Err(ModelError::MissingGoldUpos { token: t.id }),
                })
                .collect::<Result<Vec<_>, _>>()?
        } else {
            Vec::new()
        };
        let channels = self
            .config
            .channels
            .iter()
            .map(|c| match c.source {
                ChannelSource::WordForm => forms.clone(),
                ChannelSource::GoldUpos => upos.clone(),
            })
            .collect();
        Ok(Inputs { channels })
    }

    /// Gold training targets of a sentence.
    pub fn targets(&self, s: &Sentence) -> Result<Targets, ModelError> {
        let lookup = |v: &Vocab, kind: &'static str, value: &str| {
            v.get(value).ok_or_else(|| ModelError::UnknownLabel {
                kind,
                value: value.to_owned(),
            })
        };
        let mut targets = Targets {
            heads: Vec::with_capacity(s.len()),
            labels: Vec::with_capacity(s.len()),
            upos: Vec::with_capacity(s.len()),
            feats: Vec::with_capacity(s.len()),
        };
        for t in &s.tokens {
            let missing = |what| ModelError::MissingAnnotation { token: t.id, what };
            targets.heads.push(t.head.ok_or_else(|| missing("head"))?);
            let deprel = t.deprel.as_deref().ok_or_else(|| missing("deprel"))?;
            targets.labels.push(lookup(&self.vocabs.labels, "deprel", deprel)?);
            let upos = t.upos.as_deref().ok_or_else(|| missing("UPOS"))?;
            targets.upos.push(lookup(&self.vocabs.upos, "UPOS", upos)?);
            targets
                .feats
                .push(lookup(&self.vocabs.feats, "feature bundle", &t.feats.to_string())?);
        }
        Ok(targets)
    }

    fn scored(&self, inputs: &Inputs, label_heads: Option<&[usize]>) -> ScoredSentence<T> {
        let pass = network::forward(&self.params, inputs, label_heads);
        let n = inputs.len();
        let scores = &pass.scores;
        ScoredSentence {
            arc_scores: ArcScores::from_fn(n, |h, d| scores[[d - 1, h]]),
            head_probs: pass.head_logp.mapv(|v| v.exp()),
            label_probs: pass.label_logp.mapv(|v| v.exp()),
            upos_probs: pass.upos_logp.mapv(|v| v.exp()),
            feats_probs: pass.feats_logp.mapv(|v| v.exp()),
        }
    }

    /// Scores a sentence; labels are conditioned on each token's most
    /// probable head.
    pub fn forward(&self, s: &Sentence) -> Result<ScoredSentence<T>, ModelError> {
        Ok(self.scored(&self.inputs(s)?, None))
    }

    /// Scores a sentence with labels conditioned on the given heads.
    pub fn forward_with_label_heads(&self, s: &Sentence, heads: &[usize]) -> Result<ScoredSentence<T>, ModelError> {
        let inputs = self.inputs(s)?;
        assert_eq!(heads.len(), inputs.len(), "one head per token");
        Ok(self.scored(&inputs, Some(heads)))
    }

    /// Per-token mean of the summed head, label, UPOS and feature
    /// cross-entropies.
    pub fn loss(&self, s: &Sentence) -> Result<T, ModelError> {
        let inputs = self.inputs(s)?;
        let targets = self.targets(s)?;
        Ok(network::forward(&self.params, &inputs, None).loss(&targets))
    }

    /// Mean loss over already encoded examples and its gradient.
    pub fn loss_and_gradients_encoded(&self, batch: &[(Inputs, Targets)]) -> Result<(T, Params<T>), ModelError> {
        if batch.is_empty() {
            return Err(ModelError::EmptyBatch);
        }
        let scale = T::one() / T::from_usize(batch.len()).expect("batch size fits");
        // Per-example work runs in parallel; the sum below is sequential so
        // results do not depend on scheduling.
        let parts: Vec<(T, Params<T>)> = batch
            .par_iter()
            .map(|(inputs, targets)| {
                let pass = network::forward(&self.params, inputs, None);
                let mut g = self.params.zeros_like();
                pass.backward(&self.params, inputs, targets, T::one(), &mut g);
                (pass.loss(targets), g)
            })
            .collect();
        let mut grads = self.params.zeros_like();
        let mut loss = T::zero();
        for (l, g) in &parts {
            loss = loss + *l * scale;
            grads.add_scaled(g, scale);
        }
        Ok((loss, grads))
    }

    /// Mean batch loss and its exact gradient.
    pub fn loss_and_gradients(&self, batch: &[&Sentence]) -> Result<(T, Params<T>), ModelError> {
        let encoded = batch
            .iter()
            .map(|s| Ok((self.inputs(s)?, self.targets(s)?)))
            .collect::<Result<Vec<_>, ModelError>>()?;
        self.loss_and_gradients_encoded(&encoded)
    }

    /// Gradient of the mean batch loss with respect to every parameter.
    pub fn gradients(&self, batch: &[&Sentence]) -> Result<Params<T>, ModelError> {
        Ok(self.loss_and_gradients(batch)?.1)
    }

    /// Annotates a sentence: tree-decoded heads, labels from the label head
    /// conditioned on the most probable heads, tags by argmax.
    pub fn predict(&self, s: &Sentence) -> Result<Sentence, ModelError> {
        let scored = self.forward(s)?;
        Ok(self.annotate(s, &scored))
    }

    /// Writes the decoded analysis of `scored` into a copy of `s`.
    pub fn annotate(&self, s: &Sentence, scored: &ScoredSentence<T>) -> Sentence {
        let heads = decode_mst(&scored.log_head_scores());
        let mut out = s.clone();
        for (d, token) in out.tokens.iter_mut().enumerate() {
            token.head = Some(heads[d]);
            token.deprel = Some(self.vocabs.labels.item(argmax(scored.label_probs.row(d))).to_owned());
            if !self.config.use_gold_upos {
                token.upos = Some(self.vocabs.upos.item(argmax(scored.upos_probs.row(d))).to_owned());
            }
            let bundle = self.vocabs.feats.item(argmax(scored.feats_probs.row(d)));
            token.feats = Features::parse(bundle).unwrap_or_default();
        }
        out
    }
}
