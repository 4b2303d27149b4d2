mod common;

use udparse::sampler::{sample_batches, treebank_weights, BatchSampler, SamplerError};

/// Upper 0.001 quantile of the chi-square distribution with 6 degrees of
/// freedom.
const CHI2_DF6_P001: f64 = 22.457744484825323;

/// Training sizes of the seven Latin treebanks, in thousands of tokens.
const SEVEN: [usize; 7] = [391, 194, 178, 31, 18, 11, 1];

fn counts(seed: u64, sizes: &[usize], draws: usize) -> Vec<usize> {
    let weights = treebank_weights(sizes).unwrap();
    let mut sampler = BatchSampler::new(seed, sizes, &weights).unwrap();
    let mut hits = vec![0; sizes.len()];
    for _ in 0..draws {
        let (tb, idx) = sampler.sample();
        assert!(idx < sizes[tb]);
        hits[tb] += 1;
    }
    hits
}

#[test]
fn two_treebanks() {
    let hits = counts(1, &[100, 400], 30_000);
    let share = hits[1] as f64 / 30_000.0;
    assert!((share - 2.0 / 3.0).abs() <= 0.01, "{}", share);
}

#[test]
fn seven_treebanks_chi_square() {
    let draws = 100_000;
    let weights = treebank_weights(&SEVEN).unwrap();
    for seed in [3, 4] {
        let hits = counts(seed, &SEVEN, draws);
        let chi2: f64 = hits
            .iter()
            .zip(weights.as_slice())
            .map(|(&o, &p)| {
                let e = p * draws as f64;
                (o as f64 - e).powi(2) / e
            })
            .sum();
        assert!(chi2 < CHI2_DF6_P001, "seed {}: {}", seed, chi2);
    }
}

#[test]
fn weights_are_normalised_square_roots() {
    let w = treebank_weights(&[100, 400]).unwrap();
    assert!((w.as_slice()[0] - 1.0 / 3.0).abs() < 1e-15);
    let w = treebank_weights(&SEVEN).unwrap();
    assert!((w.as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    assert_eq!(treebank_weights(&[]).unwrap_err(), SamplerError::EmptyInput);
    assert_eq!(treebank_weights(&[3, 0]).unwrap_err(), SamplerError::ZeroCount(1));
}

#[test]
fn batches_deterministic_per_seed() {
    let tbs = [common::toy_corpus(5, 1, "a"), common::toy_corpus(20, 2, "b")];
    let w = treebank_weights(&[5, 20]).unwrap();
    let run = |seed| -> Vec<Vec<String>> {
        sample_batches(seed, &tbs, &w, 4, 6)
            .unwrap()
            .map(|b| b.iter().map(|s| s.tokens[0].form.clone()).collect())
            .collect()
    };
    assert_eq!(run(9), run(9));
    assert_ne!(run(9), run(10));
    assert!(run(9).iter().all(|b| b.len() == 4));
}
