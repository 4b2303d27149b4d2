//! Attachment and tagging accuracy, per treebank and macro-averaged.

use serde::Serialize;
use thiserror::Error;

use crate::conllu::{universal_part, Treebank};

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("sentence {sentence}: {reason}")]
    AlignmentError { sentence: usize, reason: String },
    #[error("cannot average an empty list")]
    EmptyInput,
}

fn check_alignment(gold: &Treebank, system: &Treebank) -> Result<usize, EvalError> {
    if gold.sentence_count() != system.sentence_count() {
        return Err(EvalError::AlignmentError {
            sentence: gold.sentence_count().min(system.sentence_count()),
            reason: format!(
                "gold has {} sentences, system has {}",
                gold.sentence_count(),
                system.sentence_count()
            ),
        });
    }
    let mut total = 0;
    for (i, (g, s)) in gold.sentences.iter().zip(&system.sentences).enumerate() {
        if g.len() != s.len() {
            return Err(EvalError::AlignmentError {
                sentence: i,
                reason: format!("gold has {} tokens, system has {}", g.len(), s.len()),
            });
        }
        if let Some((gt, st)) = g.tokens.iter().zip(&s.tokens).find(|(a, b)| a.form != b.form) {
            return Err(EvalError::AlignmentError {
                sentence: i,
                reason: format!("token {}: gold form `{}`, system form `{}`", gt.id, gt.form, st.form),
            });
        }
        total += g.len();
    }
    Ok(total)
}

fn percent(correct: usize, total: usize) -> f64 {
    if total == 0 {
        100.0
    } else {
        100.0 * correct as f64 / total as f64
    }
}

fn deprel_matches(gold: Option<&str>, system: Option<&str>, strip_subtypes: bool) -> bool {
    match (gold, system) {
        (Some(g), Some(s)) if strip_subtypes => universal_part(g) == universal_part(s),
        (g, s) => g == s,
    }
}

/// `(UAS, LAS)` in percent. Every token counts, punctuation included.
pub fn attachment_scores(gold: &Treebank, system: &Treebank, strip_subtypes: bool) -> Result<(f64, f64), EvalError> {
    let total = check_alignment(gold, system)?;
    let (mut heads, mut labeled) = (0, 0);
    for (g, s) in gold.sentences.iter().zip(&system.sentences) {
        for (gt, st) in g.tokens.iter().zip(&s.tokens) {
            if gt.head.is_some() && gt.head == st.head {
                heads += 1;
                if deprel_matches(gt.deprel.as_deref(), st.deprel.as_deref(), strip_subtypes) {
                    labeled += 1;
                }
            }
        }
    }
    Ok((percent(heads, total), percent(labeled, total)))
}

/// `(UPOS accuracy, UFeats accuracy)` in percent.
pub fn tagging_accuracy(gold: &Treebank, system: &Treebank) -> Result<(f64, f64), EvalError> {
    let total = check_alignment(gold, system)?;
    let (mut upos, mut feats) = (0, 0);
    for (g, s) in gold.sentences.iter().zip(&system.sentences) {
        for (gt, st) in g.tokens.iter().zip(&s.tokens) {
            if gt.upos == st.upos {
                upos += 1;
            }
            if gt.feats.set_eq(&st.feats) {
                feats += 1;
            }
        }
    }
    Ok((percent(upos, total), percent(feats, total)))
}

/// Rounds half away from zero to two decimals.
///
/// The value is first snapped to 1e-9 so that decimal ties such as 75.475,
/// which are not representable in binary, round as they are written.
pub fn round_half_up_2(x: f64) -> f64 {
    let nano = (x * 1e9).round() as i128;
    let sign = nano.signum();
    let cents = (nano.abs() + 5_000_000) / 10_000_000;
    (sign * cents) as f64 / 100.0
}

/// Unweighted mean, rounded to two decimals.
pub fn macro_average(values: &[f64]) -> Result<f64, EvalError> {
    if values.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    Ok(round_half_up_2(mean))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TreebankMetrics {
    pub name: String,
    pub uas: f64,
    pub las: f64,
    pub upos: f64,
    pub ufeats: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MacroMetrics {
    pub uas: f64,
    pub las: f64,
    pub upos: f64,
    pub ufeats: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricReport {
    pub treebanks: Vec<TreebankMetrics>,
    #[serde(rename = "macro")]
    pub macro_avg: MacroMetrics,
}

/// Evaluates aligned `(gold, system)` pairs; each pair is named after its
/// gold treebank.
pub fn evaluate(pairs: &[(Treebank, Treebank)], strip_subtypes: bool) -> Result<MetricReport, EvalError> {
    let mut treebanks = Vec::with_capacity(pairs.len());
    for (gold, system) in pairs {
        let (uas, las) = attachment_scores(gold, system, strip_subtypes)?;
        let (upos, ufeats) = tagging_accuracy(gold, system)?;
        treebanks.push(TreebankMetrics {
            name: gold.name.clone(),
            uas,
            las,
            upos,
            ufeats,
        });
    }
    let col = |f: fn(&TreebankMetrics) -> f64| -> Result<f64, EvalError> {
        macro_average(&treebanks.iter().map(f).collect::<Vec<_>>())
    };
    let macro_avg = MacroMetrics {
        uas: col(|m| m.uas)?,
        las: col(|m| m.las)?,
        upos: col(|m| m.upos)?,
        ufeats: col(|m| m.ufeats)?,
    };
    Ok(MetricReport { treebanks, macro_avg })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conllu::{Features, Sentence};

    fn sentence(heads: &[usize], deprels: &[&str]) -> Sentence {
        let mut s = Sentence::from_forms(&["a", "b", "c", "d"][..heads.len()]);
        for (t, (&h, &r)) in s.tokens.iter_mut().zip(heads.iter().zip(deprels)) {
            t.head = Some(h);
            t.deprel = Some(r.to_owned());
        }
        s
    }

    fn tb(s: Sentence) -> Treebank {
        Treebank::new("t", vec![s])
    }

    #[test]
    fn identity() {
        let g = tb(sentence(&[2, 0, 2], &["nsubj", "root", "obj"]));
        assert_eq!(attachment_scores(&g, &g, true).unwrap(), (100.0, 100.0));
        assert_eq!(tagging_accuracy(&g, &g).unwrap(), (100.0, 100.0));
    }

    #[test]
    fn wrong_head() {
        let g = tb(sentence(&[2, 0, 2], &["nsubj", "root", "obj"]));
        let s = tb(sentence(&[2, 0, 1], &["nsubj", "root", "obj"]));
        let (uas, las) = attachment_scores(&g, &s, true).unwrap();
        assert_eq!(round_half_up_2(uas), 66.67);
        assert_eq!(round_half_up_2(las), 66.67);

        let s = tb(sentence(&[2, 0, 1], &["obj", "root", "obj"]));
        let (uas, las) = attachment_scores(&g, &s, true).unwrap();
        assert_eq!(round_half_up_2(uas), 66.67);
        assert_eq!(round_half_up_2(las), 33.33);
    }

    #[test]
    fn subtypes() {
        let g = tb(sentence(&[0, 1], &["root", "obl:arg"]));
        let s = tb(sentence(&[0, 1], &["root", "obl"]));
        assert_eq!(attachment_scores(&g, &s, true).unwrap().1, 100.0);
        assert_eq!(attachment_scores(&g, &s, false).unwrap().1, 50.0);
    }

    #[test]
    fn feats_compare_as_sets() {
        let mut g = sentence(&[0], &["root"]);
        let mut s = g.clone();
        g.tokens[0].feats = Features::parse("Case=Nom|Number=Sing").unwrap();
        s.tokens[0].feats = Features::from_pairs([("Number", "Sing"), ("Case", "Nom")]);
        assert_eq!(tagging_accuracy(&tb(g), &tb(s)).unwrap().1, 100.0);
    }

    #[test]
    fn upos_count() {
        let mut g = sentence(&[0, 1, 1, 1], &["root", "dep", "dep", "dep"]);
        let mut s = g.clone();
        for (t, u) in g.tokens.iter_mut().zip(["NOUN", "VERB", "ADJ", "ADV"]) {
            t.upos = Some(u.into());
        }
        for (t, u) in s.tokens.iter_mut().zip(["NOUN", "VERB", "ADJ", "NOUN"]) {
            t.upos = Some(u.into());
        }
        assert_eq!(tagging_accuracy(&tb(g), &tb(s)).unwrap().0, 75.0);
    }

    #[test]
    fn alignment_errors() {
        let g = tb(sentence(&[0, 1], &["root", "dep"]));
        let s = tb(sentence(&[0], &["root"]));
        assert!(matches!(
            attachment_scores(&g, &s, true),
            Err(EvalError::AlignmentError { sentence: 0, .. })
        ));
        let mut s = g.clone();
        s.sentences[0].tokens[1].form = "x".into();
        assert!(matches!(
            tagging_accuracy(&g, &s),
            Err(EvalError::AlignmentError { sentence: 0, .. })
        ));
        let two = Treebank::new("t", vec![g.sentences[0].clone(); 2]);
        assert!(attachment_scores(&g, &two, true).is_err());
    }

    #[test]
    fn macro_average_rounding() {
        assert_eq!(macro_average(&[90.91, 94.54, 86.75, 66.71, 77.08]).unwrap(), 83.20);
        assert_eq!(macro_average(&[75.75, 77.41]).unwrap(), 76.58);
        assert_eq!(macro_average(&[74.52, 76.43]).unwrap(), 75.48);
        assert_eq!(macro_average(&[42.5]).unwrap(), 42.5);
        assert_eq!(macro_average(&[]), Err(EvalError::EmptyInput));
        assert_eq!(round_half_up_2(0.125), 0.13);
        assert_eq!(round_half_up_2(-0.125), -0.13);
    }
}
