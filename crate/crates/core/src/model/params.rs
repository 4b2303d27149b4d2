//! Parameter layout. Every parameter is a 2-D array; biases and the root
//! vector are single rows.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::ModelConfig;
use super::vocab::Vocabularies;
use crate::scalar::{lit, Scalar};

/// `y = x W + b` with `W: in x out` and `b: 1 x out`.
#[derive(Clone, Debug, PartialEq)]
pub struct Linear<T> {
    pub w: Array2<T>,
    pub b: Array2<T>,
}

impl<T: Scalar> Linear<T> {
    fn zeros(input: usize, output: usize) -> Self {
        Linear {
            w: Array2::zeros((input, output)),
            b: Array2::zeros((1, output)),
        }
    }
}

/// Hidden ReLU layer followed by an output projection.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp<T> {
    pub hidden: Linear<T>,
    pub out: Linear<T>,
}

impl<T: Scalar> Mlp<T> {
    fn zeros(input: usize, hidden: usize, output: usize) -> Self {
        Mlp {
            hidden: Linear::zeros(input, hidden),
            out: Linear::zeros(hidden, output),
        }
    }
}

/// One direction of one LSTM layer. Gate blocks are ordered
/// input, forget, cell, output.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmCell<T> {
    pub w_x: Array2<T>,
    pub w_h: Array2<T>,
    pub b: Array2<T>,
}

impl<T: Scalar> LstmCell<T> {
    fn zeros(input: usize, hidden: usize) -> Self {
        LstmCell {
            w_x: Array2::zeros((input, 4 * hidden)),
            w_h: Array2::zeros((hidden, 4 * hidden)),
            b: Array2::zeros((1, 4 * hidden)),
        }
    }

    pub fn hidden_dim(&self) -> usize {
        self.w_h.nrows()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LstmLayer<T> {
    pub forward: LstmCell<T>,
    pub backward: LstmCell<T>,
}

/// All trainable arrays. Gradients use the same type.
#[derive(Clone, Debug, PartialEq)]
pub struct Params<T> {
    pub embeddings: Vec<Array2<T>>,
    pub lstm: Vec<LstmLayer<T>>,
    pub root: Array2<T>,
    pub arc_query: Mlp<T>,
    pub arc_key: Mlp<T>,
    pub label: Mlp<T>,
    pub upos: Mlp<T>,
    pub feats: Mlp<T>,
}

/// Whether a parameter is a matrix (initialised randomly) or a bias.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParamKind {
    Embedding,
    Matrix,
    Bias,
}

impl<T: Scalar> Params<T> {
    /// All-zero parameters shaped for `config` and `vocabs`.
    pub fn zeros(config: &ModelConfig, vocabs: &Vocabularies) -> Self {
        let embeddings = config
            .channels
            .iter()
            .map(|c| {
                let rows = match c.source {
                    super::config::ChannelSource::WordForm => vocabs.forms.len(),
                    super::config::ChannelSource::GoldUpos => vocabs.upos_input.len(),
                };
                Array2::zeros((rows, c.dim))
            })
            .collect();

        let mut lstm = Vec::with_capacity(config.lstm_layers);
        let mut input = config.input_dim();
        for _ in 0..config.lstm_layers {
            lstm.push(LstmLayer {
                forward: LstmCell::zeros(input, config.lstm_dim),
                backward: LstmCell::zeros(input, config.lstm_dim),
            });
            input = 2 * config.lstm_dim;
        }

        let enc = config.encoder_dim();
        let hid = config.head_hidden_dim;
        Params {
            embeddings,
            lstm,
            root: Array2::zeros((1, enc)),
            arc_query: Mlp::zeros(enc, hid, config.qk_dim),
            arc_key: Mlp::zeros(enc, hid, config.qk_dim),
            label: Mlp::zeros(2 * enc, hid, vocabs.labels.len()),
            upos: Mlp::zeros(enc, hid, vocabs.upos.len()),
            feats: Mlp::zeros(enc, hid, vocabs.feats.len()),
        }
    }

    /// Seeded initialisation: matrices uniform in `[-r, r]` with
    /// `r = sqrt(6 / (fan_in + fan_out))`, biases zero.
    pub fn init(config: &ModelConfig, vocabs: &Vocabularies, seed: u64) -> Self {
        let mut params = Self::zeros(config, vocabs);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        params.for_each_mut(|_, kind, a| {
            if kind == ParamKind::Bias {
                return;
            }
            let (rows, cols) = a.dim();
            let r = (6.0 / (rows + cols) as f64).sqrt();
            a.mapv_inplace(|_| lit::<T>(rng.gen_range(-r..=r)));
        });
        params
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.for_each_mut(|_, _, a| a.fill(T::zero()));
        z
    }

    /// Visits every array with its unique name, in a fixed order.
    pub fn for_each<'a>(&'a self, mut f: impl FnMut(&str, ParamKind, &'a Array2<T>)) {
        for (i, e) in self.embeddings.iter().enumerate() {
            f(&format!("embed.{}", i), ParamKind::Embedding, e);
        }
        for (l, layer) in self.lstm.iter().enumerate() {
            for (dir, cell) in [("fwd", &layer.forward), ("bwd", &layer.backward)] {
                f(&format!("lstm.{}.{}.w_x", l, dir), ParamKind::Matrix, &cell.w_x);
                f(&format!("lstm.{}.{}.w_h", l, dir), ParamKind::Matrix, &cell.w_h);
                f(&format!("lstm.{}.{}.b", l, dir), ParamKind::Bias, &cell.b);
            }
        }
        f("root", ParamKind::Matrix, &self.root);
        for (name, mlp) in self.heads() {
            f(&format!("{}.hidden.w", name), ParamKind::Matrix, &mlp.hidden.w);
            f(&format!("{}.hidden.b", name), ParamKind::Bias, &mlp.hidden.b);
            f(&format!("{}.out.w", name), ParamKind::Matrix, &mlp.out.w);
            f(&format!("{}.out.b", name), ParamKind::Bias, &mlp.out.b);
        }
    }

    /// Mutable counterpart of [`Params::for_each`], same order and names.
    pub fn for_each_mut(&mut self, mut f: impl FnMut(&str, ParamKind, &mut Array2<T>)) {
        for (i, e) in self.embeddings.iter_mut().enumerate() {
            f(&format!("embed.{}", i), ParamKind::Embedding, e);
        }
        for (l, layer) in self.lstm.iter_mut().enumerate() {
            for (dir, cell) in [("fwd", &mut layer.forward), ("bwd", &mut layer.backward)] {
                f(&format!("lstm.{}.{}.w_x", l, dir), ParamKind::Matrix, &mut cell.w_x);
                f(&format!("lstm.{}.{}.w_h", l, dir), ParamKind::Matrix, &mut cell.w_h);
                f(&format!("lstm.{}.{}.b", l, dir), ParamKind::Bias, &mut cell.b);
            }
        }
        f("root", ParamKind::Matrix, &mut self.root);
        for (name, mlp) in [
            ("arc_query", &mut self.arc_query),
            ("arc_key", &mut self.arc_key),
            ("label", &mut self.label),
            ("upos", &mut self.upos),
            ("feats", &mut self.feats),
        ] {
            f(&format!("{}.hidden.w", name), ParamKind::Matrix, &mut mlp.hidden.w);
            f(&format!("{}.hidden.b", name), ParamKind::Bias, &mut mlp.hidden.b);
            f(&format!("{}.out.w", name), ParamKind::Matrix, &mut mlp.out.w);
            f(&format!("{}.out.b", name), ParamKind::Bias, &mut mlp.out.b);
        }
    }

    fn heads(&self) -> [(&'static str, &Mlp<T>); 5] {
        [
            ("arc_query", &self.arc_query),
            ("arc_key", &self.arc_key),
            ("label", &self.label),
            ("upos", &self.upos),
            ("feats", &self.feats),
        ]
    }

    /// Names and shapes in visiting order.
    pub fn shapes(&self) -> Vec<(String, (usize, usize))> {
        let mut out = Vec::new();
        self.for_each(|name, _, a| out.push((name.to_owned(), a.dim())));
        out
    }

    pub fn num_values(&self) -> usize {
        let mut n = 0;
        self.for_each(|_, _, a| n += a.len());
        n
    }

    /// `self += other * scale`, array by array.
    pub fn add_scaled(&mut self, other: &Params<T>, scale: T) {
        let mut others = Vec::new();
        other.for_each(|_, _, a| others.push(a));
        let mut it = others.into_iter();
        self.for_each_mut(|_, _, a| {
            let o = it.next().expect("same layout");
            a.scaled_add(scale, o);
        });
    }

    /// Converts every array to another scalar type.
    pub fn cast<U: Scalar>(&self) -> Params<U> {
        let conv = |a: &Array2<T>| a.mapv(|v| U::from_f64_lossy(v.as_f64()));
        let lin = |l: &Linear<T>| Linear {
            w: conv(&l.w),
            b: conv(&l.b),
        };
        let mlp = |m: &Mlp<T>| Mlp {
            hidden: lin(&m.hidden),
            out: lin(&m.out),
        };
        let cell = |c: &LstmCell<T>| LstmCell {
            w_x: conv(&c.w_x),
            w_h: conv(&c.w_h),
            b: conv(&c.b),
        };
        Params {
            embeddings: self.embeddings.iter().map(conv).collect(),
            lstm: self
                .lstm
                .iter()
                .map(|l| LstmLayer {
                    forward: cell(&l.forward),
                    backward: cell(&l.backward),
                })
                .collect(),
            root: conv(&self.root),
            arc_query: mlp(&self.arc_query),
            arc_key: mlp(&self.arc_key),
            label: mlp(&self.label),
            upos: mlp(&self.upos),
            feats: mlp(&self.feats),
        }
    }
}
