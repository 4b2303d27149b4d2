#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use udparse::conllu::{Features, Sentence, Token, Treebank};
use udparse::evaluation::attachment_scores;
use udparse::model::{ChannelConfig, ChannelSource, ModelConfig, ParserModel, TrainSchedule, Vocabularies};
use udparse::Scalar;

const NOUNS: &[(&str, &str)] = &[
    ("puella", "puellam"),
    ("agricola", "agricolam"),
    ("dominus", "dominum"),
    ("servus", "servum"),
    ("rex", "regem"),
    ("miles", "militem"),
    ("poeta", "poetam"),
    ("nauta", "nautam"),
    ("amicus", "amicum"),
    ("filius", "filium"),
    ("regina", "reginam"),
    ("lupus", "lupum"),
];

const ADJS: &[(&str, &str)] = &[
    ("bonus", "bonum"),
    ("magnus", "magnum"),
    ("parvus", "parvum"),
    ("laetus", "laetum"),
    ("malus", "malum"),
    ("novus", "novum"),
];

const VERBS: &[&str] = &["amat", "videt", "vocat", "laudat", "audit", "timet", "iuvat", "monet"];
const ADVS: &[&str] = &["saepe", "non", "semper", "hodie", "iam"];

struct Word {
    form: String,
    upos: &'static str,
    feats: &'static str,
    head: usize,
    deprel: &'static str,
}

fn token(id: usize, w: &Word) -> Token {
    let mut t = Token::new(id, w.form.clone());
    t.upos = Some(w.upos.into());
    t.feats = Features::parse(w.feats).unwrap();
    t.head = Some(w.head);
    t.deprel = Some(w.deprel.into());
    t
}

/// Noun phrase as `(words, index of the noun)`; heads are filled in later.
fn noun_phrase(rng: &mut ChaCha8Rng, accusative: bool) -> (Vec<Word>, usize) {
    let case = if accusative { "Case=Acc" } else { "Case=Nom" };
    let pick = |pair: &(&str, &str)| if accusative { pair.1 } else { pair.0 }.to_string();
    let noun = Word {
        form: pick(NOUNS.choose(rng).unwrap()),
        upos: "NOUN",
        feats: case,
        head: 0,
        deprel: if accusative { "obj" } else { "nsubj" },
    };
    if !rng.gen_bool(0.4) {
        return (vec![noun], 0);
    }
    let adj = Word {
        form: pick(ADJS.choose(rng).unwrap()),
        upos: "ADJ",
        feats: case,
        head: 0,
        deprel: "amod",
    };
    if rng.gen_bool(0.5) {
        (vec![adj, noun], 1)
    } else {
        (vec![noun, adj], 0)
    }
}

/// Small Latin-like corpus: a transitive verb, nominative subject and
/// accusative object in free order, optional adjectives, adverb and final
/// punctuation.
pub fn toy_corpus(sentences: usize, seed: u64, name: &str) -> Treebank {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(sentences);
    for _ in 0..sentences {
        // constituents: (words, index of the phrase head)
        let mut parts: Vec<(Vec<Word>, usize)> = Vec::new();
        parts.push((
            vec![Word {
                form: VERBS.choose(&mut rng).unwrap().to_string(),
                upos: "VERB",
                feats: "Mood=Ind|Number=Sing|Person=3",
                head: 0,
                deprel: "root",
            }],
            0,
        ));
        parts.push(noun_phrase(&mut rng, false));
        parts.push(noun_phrase(&mut rng, true));
        if rng.gen_bool(0.3) {
            parts.push((
                vec![Word {
                    form: ADVS.choose(&mut rng).unwrap().to_string(),
                    upos: "ADV",
                    feats: "_",
                    head: 0,
                    deprel: "advmod",
                }],
                0,
            ));
        }
        parts.shuffle(&mut rng);

        let mut words = Vec::new();
        let mut verb_id = 0;
        let mut phrase_heads = Vec::new();
        for (phrase, h) in parts {
            let base = words.len();
            let head_id = base + h + 1;
            for (i, mut w) in phrase.into_iter().enumerate() {
                if i != h {
                    w.head = head_id;
                }
                if w.upos == "VERB" {
                    verb_id = head_id;
                }
                words.push(w);
            }
            phrase_heads.push(head_id);
        }
        for id in phrase_heads {
            if id != verb_id {
                words[id - 1].head = verb_id;
            }
        }
        if rng.gen_bool(0.6) {
            words.push(Word {
                form: ".".into(),
                upos: "PUNCT",
                feats: "_",
                head: verb_id,
                deprel: "punct",
            });
        }
        let tokens = words.iter().enumerate().map(|(i, w)| token(i + 1, w)).collect();
        out.push(Sentence {
            comments: Vec::new(),
            tokens,
            mwt_ranges: Vec::new(),
        });
    }
    Treebank::new(name, out)
}

/// Embedding 32, LSTM 64, hidden 128, query/key 32; 30 epochs of 20 batches.
pub fn desk_config() -> (ModelConfig, TrainSchedule) {
    let config = ModelConfig {
        channels: vec![ChannelConfig {
            source: ChannelSource::WordForm,
            dim: 32,
        }],
        lstm_layers: 2,
        lstm_dim: 64,
        head_hidden_dim: 128,
        qk_dim: 32,
        ..ModelConfig::default()
    };
    let schedule = TrainSchedule {
        frozen_epochs: 2,
        frozen_lr: 1e-3,
        main_epochs: 30,
        batches_per_epoch: 20,
        batch_size: 16,
        peak_lr: 3e-3,
        warmup_epochs: 2,
    };
    (config, schedule)
}

/// Smaller and shorter than [`desk_config`], for tests that only need a
/// trained model rather than a good one.
pub fn quick_config(seed: u64) -> (ModelConfig, TrainSchedule) {
    let (mut config, mut schedule) = desk_config();
    config.seed = seed;
    config.channels[0].dim = 16;
    config.lstm_dim = 16;
    config.head_hidden_dim = 32;
    config.qk_dim = 16;
    schedule.frozen_epochs = 1;
    schedule.main_epochs = 4;
    schedule.batches_per_epoch = 10;
    schedule.batch_size = 8;
    (config, schedule)
}

/// Dims of 4 and 8 with one LSTM layer and two input channels.
pub fn micro_config(seed: u64) -> ModelConfig {
    ModelConfig {
        channels: vec![
            ChannelConfig {
                source: ChannelSource::WordForm,
                dim: 4,
            },
            ChannelConfig {
                source: ChannelSource::GoldUpos,
                dim: 3,
            },
        ],
        lstm_layers: 1,
        lstm_dim: 4,
        head_hidden_dim: 8,
        qk_dim: 4,
        use_gold_upos: true,
        lowercase_forms: false,
        word_dropout: 0.0,
        seed,
    }
}

pub fn predict_all<T: Scalar>(model: &ParserModel<T>, tb: &Treebank) -> Treebank {
    let sentences = tb.sentences.iter().map(|s| model.predict(s).unwrap()).collect();
    Treebank::new(tb.name.clone(), sentences)
}

pub fn las<T: Scalar>(model: &ParserModel<T>, tb: &Treebank) -> f64 {
    attachment_scores(tb, &predict_all(model, tb), true).unwrap().1
}

/// Sentence stripped to its forms (and UPOS when `keep_upos`).
pub fn unannotated(s: &Sentence, keep_upos: bool) -> Sentence {
    let mut out = s.clone();
    for t in &mut out.tokens {
        if !keep_upos {
            t.upos = None;
        }
        t.lemma = None;
        t.xpos = None;
        t.feats = Features::new();
        t.head = None;
        t.deprel = None;
        t.deps = None;
        t.misc = None;
    }
    out
}

const STEP: f64 = 1e-5;
/// Denominator floor of the relative error, so parameters whose gradient
/// is essentially zero are compared on an absolute scale.
const FLOOR: f64 = 1e-6;

pub fn micro_model(seed: u64) -> (ParserModel<f64>, Treebank) {
    let corpus = toy_corpus(3, seed, "micro");
    let vocabs = Vocabularies::from_treebanks(std::slice::from_ref(&corpus), false);
    assert!(vocabs.forms.len() <= 20);
    (ParserModel::new(micro_config(seed), vocabs).unwrap(), corpus)
}

fn batch_loss(model: &ParserModel<f64>, batch: &[&Sentence]) -> f64 {
    model.loss_and_gradients(batch).unwrap().0
}

fn perturb(model: &mut ParserModel<f64>, array: usize, flat: usize, delta: f64) {
    let mut i = 0;
    model.params.for_each_mut(|_, _, a| {
        if i == array {
            let v = a.iter_mut().nth(flat).unwrap();
            *v += delta;
        }
        i += 1;
    });
}

/// Largest relative error between the analytic gradient and central
/// differences, with the parameter name where it occurs.
pub fn max_relative_error(seed: u64) -> (f64, String) {
    let (mut model, corpus) = micro_model(seed);
    let sentences: Vec<Sentence> = corpus.sentences.clone();
    let batch: Vec<&Sentence> = sentences.iter().collect();
    let grads = model.gradients(&batch).unwrap();

    let mut analytic = Vec::new();
    grads.for_each(|name, _, a| analytic.push((name.to_string(), a.clone())));

    let mut worst = (0.0, String::new());
    for (array, (name, g)) in analytic.iter().enumerate() {
        for (flat, &a) in g.iter().enumerate() {
            perturb(&mut model, array, flat, STEP);
            let up = batch_loss(&model, &batch);
            perturb(&mut model, array, flat, -2.0 * STEP);
            let down = batch_loss(&model, &batch);
            perturb(&mut model, array, flat, STEP);
            let numeric = (up - down) / (2.0 * STEP);
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(FLOOR);
            if rel > worst.0 {
                worst = (rel, format!("{}[{}]", name, flat));
            }
        }
    }
    worst
}
