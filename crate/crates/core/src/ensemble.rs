//! Probability-averaging ensembles.

use ndarray::{Array2, Zip};
use thiserror::Error;

use crate::conllu::Sentence;
use crate::model::{log_arc_scores, ModelError, ParserModel, ScoredSentence};
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum EnsembleError {
    #[error("no model outputs to average")]
    Empty,
    #[error("output {index} has shape {found:?}, expected {expected:?}")]
    ShapeMismatch {
        index: usize,
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("model {index} does not share the first model's {what}")]
    VocabularyMismatch { index: usize, what: &'static str },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Element-wise mean. Each element's values are summed in sorted order so
/// the result does not depend on the order of `arrays`.
fn mean<T: Scalar>(arrays: &[&Array2<T>]) -> Array2<T> {
    let k = T::from_usize(arrays.len()).expect("model count fits");
    let mut out = arrays[0].clone();
    let mut values = Vec::with_capacity(arrays.len());
    for (idx, v) in out.indexed_iter_mut() {
        values.clear();
        values.extend(arrays.iter().map(|a| a[idx]));
        values.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        *v = values.iter().fold(T::zero(), |acc, &x| acc + x) / k;
    }
    out
}

fn check_shapes<T: Scalar>(
    outputs: &[ScoredSentence<T>],
    pick: fn(&ScoredSentence<T>) -> &Array2<T>,
) -> Result<(), EnsembleError> {
    let expected = pick(&outputs[0]).dim();
    for (index, o) in outputs.iter().enumerate().skip(1) {
        let found = pick(o).dim();
        if found != expected {
            return Err(EnsembleError::ShapeMismatch { index, expected, found });
        }
    }
    Ok(())
}

/// Averages head, label, UPOS and feature distributions across models; the
/// arc scores of the result are `log(mean head probability + eps)`.
pub fn average_scored<T: Scalar>(outputs: &[ScoredSentence<T>]) -> Result<ScoredSentence<T>, EnsembleError> {
    if outputs.is_empty() {
        return Err(EnsembleError::Empty);
    }
    check_shapes(outputs, |o| &o.head_probs)?;
    check_shapes(outputs, |o| &o.label_probs)?;
    check_shapes(outputs, |o| &o.upos_probs)?;
    check_shapes(outputs, |o| &o.feats_probs)?;

    let avg = |pick: fn(&ScoredSentence<T>) -> &Array2<T>| mean(&outputs.iter().map(pick).collect::<Vec<_>>());
    let head_probs = avg(|o| &o.head_probs);
    Ok(ScoredSentence {
        arc_scores: log_arc_scores(&head_probs),
        head_probs,
        label_probs: avg(|o| &o.label_probs),
        upos_probs: avg(|o| &o.upos_probs),
        feats_probs: avg(|o| &o.feats_probs),
    })
}

fn check_models<T: Scalar>(models: &[ParserModel<T>]) -> Result<(), EnsembleError> {
    let first = models.first().ok_or(EnsembleError::Empty)?;
    for (index, m) in models.iter().enumerate().skip(1) {
        let pairs = m.vocabs.named().into_iter().zip(first.vocabs.named());
        for ((what, a), (_, b)) in pairs {
            if a != b {
                return Err(EnsembleError::VocabularyMismatch { index, what });
            }
        }
        if m.config.use_gold_upos != first.config.use_gold_upos {
            return Err(EnsembleError::VocabularyMismatch {
                index,
                what: "gold UPOS setting",
            });
        }
    }
    Ok(())
}

/// Averaged outputs of several models for one sentence. Labels of every
/// model are conditioned on the most probable head under the averaged head
/// distribution.
pub fn ensemble_forward<T: Scalar>(
    models: &[ParserModel<T>],
    sentence: &Sentence,
) -> Result<ScoredSentence<T>, EnsembleError> {
    check_models(models)?;
    let first_pass = models
        .iter()
        .map(|m| m.forward(sentence))
        .collect::<Result<Vec<_>, _>>()?;
    let heads = average_scored(&first_pass)?.argmax_heads();
    let conditioned = models
        .iter()
        .map(|m| m.forward_with_label_heads(sentence, &heads))
        .collect::<Result<Vec<_>, _>>()?;
    average_scored(&conditioned)
}

/// Annotates a sentence with the averaged prediction of `models`.
pub fn ensemble_predict<T: Scalar>(models: &[ParserModel<T>], sentence: &Sentence) -> Result<Sentence, EnsembleError> {
    let scored = ensemble_forward(models, sentence)?;
    Ok(models[0].annotate(sentence, &scored))
}

/// Checks that every distribution row is non-negative and sums to one.
pub fn is_distribution<T: Scalar>(probs: &Array2<T>, tolerance: f64) -> bool {
    let mut ok = true;
    Zip::from(probs).for_each(|&p| ok &= p >= T::zero());
    ok && probs
        .rows()
        .into_iter()
        .all(|r| (r.sum().as_f64() - 1.0).abs() <= tolerance)
}
