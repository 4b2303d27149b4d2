mod common;

use std::collections::HashMap;

use ndarray::Array2;

use udparse::model::ParserModel;
use udparse::Sentence;

use common::{max_relative_error, micro_model, toy_corpus};

#[test]
fn gradients_match_finite_differences() {
    for seed in 0..5 {
        let (err, at) = max_relative_error(seed);
        eprintln!("seed {}: max relative error {:.3e} at {}", seed, err, at);
        assert!(err < 1e-4, "seed {}: {:.3e} at {}", seed, err, at);
    }
}

#[test]
fn gradient_shapes_match_parameters() {
    let (model, corpus) = micro_model(1);
    let grads = model.gradients(&[&corpus.sentences[0]]).unwrap();
    assert_eq!(grads.shapes(), model.params.shapes());
}

#[test]
fn duplicate_sentence_leaves_mean_gradient() {
    let (model, corpus) = micro_model(2);
    let s = &corpus.sentences[0];
    let (l1, g1) = model.loss_and_gradients(&[s]).unwrap();
    let (l2, g2) = model.loss_and_gradients(&[s, s]).unwrap();
    assert_eq!(l1, l2);
    assert_eq!(g1, g2);
}

// Plain re-implementation of the forward computation for the oracle test.

fn row(a: &Array2<f64>, r: usize) -> Vec<f64> {
    a.row(r).to_vec()
}

fn affine(x: &[f64], w: &Array2<f64>, b: &Array2<f64>) -> Vec<f64> {
    (0..w.ncols())
        .map(|j| b[[0, j]] + x.iter().enumerate().map(|(i, v)| v * w[[i, j]]).sum::<f64>())
        .collect()
}

fn mlp(p: &HashMap<String, Array2<f64>>, name: &str, x: &[f64]) -> Vec<f64> {
    let h: Vec<f64> = affine(x, &p[&format!("{}.hidden.w", name)], &p[&format!("{}.hidden.b", name)])
        .into_iter()
        .map(|v| v.max(0.0))
        .collect();
    affine(&h, &p[&format!("{}.out.w", name)], &p[&format!("{}.out.b", name)])
}

fn sig(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn lstm_direction(p: &HashMap<String, Array2<f64>>, prefix: &str, xs: &[Vec<f64>], reverse: bool) -> Vec<Vec<f64>> {
    let wx = &p[&format!("{}.w_x", prefix)];
    let wh = &p[&format!("{}.w_h", prefix)];
    let b = &p[&format!("{}.b", prefix)];
    let hd = wh.nrows();
    let n = xs.len();
    let mut out = vec![Vec::new(); n];
    let (mut h, mut c) = (vec![0.0; hd], vec![0.0; hd]);
    let order: Vec<usize> = if reverse {
        (0..n).rev().collect()
    } else {
        (0..n).collect()
    };
    for t in order {
        let zx = affine(&xs[t], wx, b);
        let z: Vec<f64> = (0..4 * hd)
            .map(|j| zx[j] + (0..hd).map(|k| h[k] * wh[[k, j]]).sum::<f64>())
            .collect();
        for j in 0..hd {
            let (i, f, g, o) = (sig(z[j]), sig(z[hd + j]), z[2 * hd + j].tanh(), sig(z[3 * hd + j]));
            c[j] = f * c[j] + i * g;
            h[j] = o * c[j].tanh();
        }
        out[t] = h.clone();
    }
    out
}

fn log_softmax(xs: &[f64]) -> Vec<f64> {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let z = m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln();
    xs.iter().map(|x| x - z).collect()
}

/// Returns `(scores[d][h], loss)` for one sentence.
fn oracle(model: &ParserModel<f64>, s: &Sentence) -> (Vec<Vec<f64>>, f64) {
    let mut p = HashMap::new();
    model.params.for_each(|name, _, a| {
        p.insert(name.to_string(), a.clone());
    });
    let inputs = model.inputs(s).unwrap();
    let targets = model.targets(s).unwrap();
    let n = s.len();

    let mut xs: Vec<Vec<f64>> = (0..n)
        .map(|t| {
            (0..inputs.channels.len())
                .flat_map(|c| row(&p[&format!("embed.{}", c)], inputs.channels[c][t]))
                .collect()
        })
        .collect();
    for l in 0..model.config.lstm_layers {
        let f = lstm_direction(&p, &format!("lstm.{}.fwd", l), &xs, false);
        let b = lstm_direction(&p, &format!("lstm.{}.bwd", l), &xs, true);
        xs = (0..n).map(|t| [f[t].clone(), b[t].clone()].concat()).collect();
    }
    let mut with_root = vec![row(&p["root"], 0)];
    with_root.extend(xs.iter().cloned());

    let keys: Vec<Vec<f64>> = with_root.iter().map(|x| mlp(&p, "arc_key", x)).collect();
    let mut scores = Vec::new();
    let mut loss = 0.0;
    for d in 0..n {
        let q = mlp(&p, "arc_query", &xs[d]);
        let sc: Vec<f64> = keys.iter().map(|k| q.iter().zip(k).map(|(a, b)| a * b).sum()).collect();
        let mut masked = sc.clone();
        masked[d + 1] = f64::NEG_INFINITY;
        let head_lp = log_softmax(&masked);
        let mut best = 0;
        for h in 0..=n {
            if head_lp[h] > head_lp[best] {
                best = h;
            }
        }
        let label_in = [xs[d].clone(), with_root[best].clone()].concat();
        let label_lp = log_softmax(&mlp(&p, "label", &label_in));
        let upos_lp = log_softmax(&mlp(&p, "upos", &xs[d]));
        let feats_lp = log_softmax(&mlp(&p, "feats", &xs[d]));
        loss -= head_lp[targets.heads[d]]
            + label_lp[targets.labels[d]]
            + upos_lp[targets.upos[d]]
            + feats_lp[targets.feats[d]];
        scores.push(sc);
    }
    (scores, loss / n as f64)
}

#[test]
fn forward_matches_plain_oracle() {
    for seed in [42, 7] {
        let (model, corpus) = micro_model(seed);
        for s in &corpus.sentences {
            let (scores, loss) = oracle(&model, s);
            let out = model.forward(s).unwrap();
            for d in 1..=s.len() {
                for h in 0..=s.len() {
                    if h != d {
                        assert!((out.arc_scores.score(h, d) - scores[d - 1][h]).abs() < 1e-10);
                    }
                }
            }
            let got = model.loss(s).unwrap();
            assert!((got - loss).abs() < 1e-10, "{} vs {}", got, loss);
        }
    }
}

#[test]
fn two_token_sentence_oracle() {
    let (model, _) = micro_model(42);
    let mut s = toy_corpus(1, 42, "x").sentences.remove(0);
    // keep the verb and the token attached to it, re-rooted as a pair
    let verb = s.tokens.iter().position(|t| t.head == Some(0)).unwrap();
    let dep = s.tokens.iter().position(|t| t.head == Some(verb + 1)).unwrap();
    let mut tokens = vec![s.tokens[verb].clone(), s.tokens[dep].clone()];
    tokens[0].id = 1;
    tokens[0].head = Some(0);
    tokens[1].id = 2;
    tokens[1].head = Some(1);
    s.tokens = tokens;
    let (_, loss) = oracle(&model, &s);
    assert!((model.loss(&s).unwrap() - loss).abs() < 1e-10);
}
