//! Forward pass and hand-written reverse pass of the scoring network.
//!
//! Shapes for a sentence of `n` tokens, encoder width `e`:
//!
//! ```text
//! embeddings  n x input_dim ── BiLSTM stack ──> enc  n x e
//! enc_root    (n+1) x e          row 0 is the learned root vector
//! query       n x qk      = mlp_q(enc)
//! key         (n+1) x qk  = mlp_k(enc_root)
//! scores      n x (n+1)   = query . key^T        scores[d-1][h]
//! label in    n x 2e      = [enc[d] ; enc_root[argmax head of d]]
//! ```

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};

use super::params::{Linear, LstmCell, Mlp, Params};
use crate::scalar::Scalar;

/// Integer-coded network input: one index list per channel.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Inputs {
    pub channels: Vec<Vec<usize>>,
}

impl Inputs {
    pub fn len(&self) -> usize {
        self.channels.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Gold indices per token; heads are 0..=n.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Targets {
    pub heads: Vec<usize>,
    pub labels: Vec<usize>,
    pub upos: Vec<usize>,
    pub feats: Vec<usize>,
}

struct MlpCache<T> {
    input: Array2<T>,
    pre: Array2<T>,
    act: Array2<T>,
}

fn linear<T: Scalar>(l: &Linear<T>, x: &Array2<T>) -> Array2<T> {
    x.dot(&l.w) + &l.b
}

fn mlp_forward<T: Scalar>(m: &Mlp<T>, input: Array2<T>) -> (Array2<T>, MlpCache<T>) {
    let pre = linear(&m.hidden, &input);
    let act = pre.mapv(|v| if v > T::zero() { v } else { T::zero() });
    let out = linear(&m.out, &act);
    (out, MlpCache { input, pre, act })
}

fn column_sums<T: Scalar>(d: &Array2<T>) -> Array2<T> {
    d.sum_axis(Axis(0)).insert_axis(Axis(0))
}

fn mlp_backward<T: Scalar>(m: &Mlp<T>, cache: &MlpCache<T>, d_out: &Array2<T>, g: &mut Mlp<T>) -> Array2<T> {
    g.out.w += &cache.act.t().dot(d_out);
    g.out.b += &column_sums(d_out);
    let mut d_pre = d_out.dot(&m.out.w.t());
    ndarray::Zip::from(&mut d_pre).and(&cache.pre).for_each(|d, &p| {
        if p <= T::zero() {
            *d = T::zero();
        }
    });
    g.hidden.w += &cache.input.t().dot(&d_pre);
    g.hidden.b += &column_sums(&d_pre);
    d_pre.dot(&m.hidden.w.t())
}

fn sigmoid<T: Scalar>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

/// Activations of one LSTM direction, indexed by token position.
struct CellCache<T> {
    reverse: bool,
    gates: Array2<T>,
    c: Array2<T>,
    tanh_c: Array2<T>,
    h: Array2<T>,
}

impl<T> CellCache<T> {
    fn prev(&self, t: usize, n: usize) -> Option<usize> {
        if self.reverse {
            (t + 1 < n).then_some(t + 1)
        } else {
            t.checked_sub(1)
        }
    }
}

fn order(n: usize, reverse: bool) -> Box<dyn Iterator<Item = usize>> {
    if reverse {
        Box::new((0..n).rev())
    } else {
        Box::new(0..n)
    }
}

fn cell_forward<T: Scalar>(cell: &LstmCell<T>, x: &Array2<T>, reverse: bool) -> CellCache<T> {
    let n = x.nrows();
    let hd = cell.hidden_dim();
    let pre = x.dot(&cell.w_x) + &cell.b;
    let mut cache = CellCache {
        reverse,
        gates: Array2::zeros((n, 4 * hd)),
        c: Array2::zeros((n, hd)),
        tanh_c: Array2::zeros((n, hd)),
        h: Array2::zeros((n, hd)),
    };
    for t in order(n, reverse) {
        let mut z = pre.row(t).to_owned();
        let mut c_prev = Array1::zeros(hd);
        if let Some(p) = cache.prev(t, n) {
            z += &cache.h.row(p).dot(&cell.w_h);
            c_prev.assign(&cache.c.row(p));
        }
        for j in 0..hd {
            let i = sigmoid(z[j]);
            let f = sigmoid(z[hd + j]);
            let g = z[2 * hd + j].tanh();
            let o = sigmoid(z[3 * hd + j]);
            let c = f * c_prev[j] + i * g;
            let tc = c.tanh();
            cache.gates[[t, j]] = i;
            cache.gates[[t, hd + j]] = f;
            cache.gates[[t, 2 * hd + j]] = g;
            cache.gates[[t, 3 * hd + j]] = o;
            cache.c[[t, j]] = c;
            cache.tanh_c[[t, j]] = tc;
            cache.h[[t, j]] = o * tc;
        }
    }
    cache
}

fn cell_backward<T: Scalar>(
    cell: &LstmCell<T>,
    x: &Array2<T>,
    cache: &CellCache<T>,
    d_h_out: ArrayView2<'_, T>,
    g: &mut LstmCell<T>,
) -> Array2<T> {
    let n = x.nrows();
    let hd = cell.hidden_dim();
    let mut d_pre = Array2::<T>::zeros((n, 4 * hd));
    let mut h_prev_rows = Array2::<T>::zeros((n, hd));
    let mut d_h_next = Array1::<T>::zeros(hd);
    let mut d_c_next = Array1::<T>::zeros(hd);

    let steps: Vec<usize> = order(n, cache.reverse).collect();
    for &t in steps.iter().rev() {
        let prev = cache.prev(t, n);
        let mut d_c_prev = Array1::<T>::zeros(hd);
        for j in 0..hd {
            let i = cache.gates[[t, j]];
            let f = cache.gates[[t, hd + j]];
            let gg = cache.gates[[t, 2 * hd + j]];
            let o = cache.gates[[t, 3 * hd + j]];
            let tc = cache.tanh_c[[t, j]];
            let c_prev = prev.map_or(T::zero(), |p| cache.c[[p, j]]);

            let dh = d_h_out[[t, j]] + d_h_next[j];
            let d_o = dh * tc;
            let dc = d_c_next[j] + dh * o * (T::one() - tc * tc);
            let d_i = dc * gg;
            let d_g = dc * i;
            let d_f = dc * c_prev;
            d_c_prev[j] = dc * f;

            d_pre[[t, j]] = d_i * i * (T::one() - i);
            d_pre[[t, hd + j]] = d_f * f * (T::one() - f);
            d_pre[[t, 2 * hd + j]] = d_g * (T::one() - gg * gg);
            d_pre[[t, 3 * hd + j]] = d_o * o * (T::one() - o);
        }
        match prev {
            Some(p) => {
                h_prev_rows.row_mut(t).assign(&cache.h.row(p));
                d_h_next = cell.w_h.dot(&d_pre.row(t));
            }
            None => d_h_next.fill(T::zero()),
        }
        d_c_next = d_c_prev;
    }

    g.w_h += &h_prev_rows.t().dot(&d_pre);
    g.w_x += &x.t().dot(&d_pre);
    g.b += &column_sums(&d_pre);
    d_pre.dot(&cell.w_x.t())
}

/// Row-wise log-softmax; with `mask_diagonal`, entry `[d, d + 1]` (the self
/// arc of dependent `d + 1`) is excluded and gets `-inf`.
fn log_softmax_rows<T: Scalar>(logits: &Array2<T>, mask_diagonal: bool) -> Array2<T> {
    let mut out = logits.clone();
    for (r, mut row) in out.axis_iter_mut(Axis(0)).enumerate() {
        if mask_diagonal {
            row[r + 1] = T::neg_infinity();
        }
        let max = row.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
        let sum: T = row.iter().map(|&v| (v - max).exp()).sum();
        let log_z = max + sum.ln();
        row.mapv_inplace(|v| v - log_z);
    }
    out
}

/// First index of the largest entry.
pub fn argmax<T: Scalar>(row: ArrayView1<'_, T>) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Everything the reverse pass needs, plus the outputs.
pub struct ForwardPass<T> {
    layer_inputs: Vec<Array2<T>>,
    layers: Vec<(CellCache<T>, CellCache<T>)>,
    enc: Array2<T>,
    query_cache: MlpCache<T>,
    key_cache: MlpCache<T>,
    query: Array2<T>,
    key: Array2<T>,
    pub scores: Array2<T>,
    pub head_logp: Array2<T>,
    pub label_heads: Vec<usize>,
    label_cache: MlpCache<T>,
    pub label_logp: Array2<T>,
    upos_cache: MlpCache<T>,
    pub upos_logp: Array2<T>,
    feats_cache: MlpCache<T>,
    pub feats_logp: Array2<T>,
}

/// Runs the network. The label head is conditioned on `label_heads` when
/// given, otherwise on the most probable head of each token.
pub fn forward<T: Scalar>(params: &Params<T>, inputs: &Inputs, label_heads: Option<&[usize]>) -> ForwardPass<T> {
    let n = inputs.len();

    let widths: Vec<usize> = params.embeddings.iter().map(|e| e.ncols()).collect();
    let mut x0 = Array2::<T>::zeros((n, widths.iter().sum()));
    let mut offset = 0;
    for ((table, idx), &w) in params.embeddings.iter().zip(&inputs.channels).zip(&widths) {
        for (t, &i) in idx.iter().enumerate() {
            x0.slice_mut(s![t, offset..offset + w]).assign(&table.row(i));
        }
        offset += w;
    }

    let mut layer_inputs = Vec::with_capacity(params.lstm.len());
    let mut layers = Vec::with_capacity(params.lstm.len());
    let mut x = x0;
    for layer in &params.lstm {
        let fw = cell_forward(&layer.forward, &x, false);
        let bw = cell_forward(&layer.backward, &x, true);
        let hd = layer.forward.hidden_dim();
        let mut out = Array2::<T>::zeros((n, 2 * hd));
        out.slice_mut(s![.., ..hd]).assign(&fw.h);
        out.slice_mut(s![.., hd..]).assign(&bw.h);
        layer_inputs.push(std::mem::replace(&mut x, out));
        layers.push((fw, bw));
    }
    let enc = x;
    let e = enc.ncols();

    let mut enc_root = Array2::<T>::zeros((n + 1, e));
    enc_root.row_mut(0).assign(&params.root.row(0));
    enc_root.slice_mut(s![1.., ..]).assign(&enc);

    let (query, query_cache) = mlp_forward(&params.arc_query, enc.clone());
    let (key, key_cache) = mlp_forward(&params.arc_key, enc_root);
    let scores = query.dot(&key.t());
    let head_logp = log_softmax_rows(&scores, true);

    let label_heads: Vec<usize> = match label_heads {
        Some(h) => h.to_vec(),
        // argmax over probabilities, matching what an ensemble sees
        None => head_logp.mapv(|v| v.exp()).axis_iter(Axis(0)).map(argmax).collect(),
    };
    let mut label_in = Array2::<T>::zeros((n, 2 * e));
    for (d, &h) in label_heads.iter().enumerate() {
        label_in.slice_mut(s![d, ..e]).assign(&enc.row(d));
        label_in.slice_mut(s![d, e..]).assign(&key_cache.input.row(h));
    }
    let (label_logits, label_cache) = mlp_forward(&params.label, label_in);
    let (upos_logits, upos_cache) = mlp_forward(&params.upos, enc.clone());
    let (feats_logits, feats_cache) = mlp_forward(&params.feats, enc.clone());

    ForwardPass {
        layer_inputs,
        layers,
        enc,
        query_cache,
        key_cache,
        query,
        key,
        scores,
        head_logp,
        label_heads,
        label_cache,
        label_logp: log_softmax_rows(&label_logits, false),
        upos_cache,
        upos_logp: log_softmax_rows(&upos_logits, false),
        feats_cache,
        feats_logp: log_softmax_rows(&feats_logits, false),
    }
}

impl<T: Scalar> ForwardPass<T> {
    /// Mean over tokens of the summed cross-entropies of the four tasks.
    pub fn loss(&self, targets: &Targets) -> T {
        let n = targets.heads.len();
        let mut total = T::zero();
        for d in 0..n {
            total = total
                - self.head_logp[[d, targets.heads[d]]]
                - self.label_logp[[d, targets.labels[d]]]
                - self.upos_logp[[d, targets.upos[d]]]
                - self.feats_logp[[d, targets.feats[d]]];
        }
        total / T::from_usize(n).expect("token count fits")
    }

    /// Accumulates `scale * d(loss)/d(params)` into `grads`.
    pub fn backward(&self, params: &Params<T>, inputs: &Inputs, targets: &Targets, scale: T, grads: &mut Params<T>) {
        let n = targets.heads.len();
        let e = self.enc.ncols();
        let w = scale / T::from_usize(n).expect("token count fits");

        let softmax_grad = |logp: &Array2<T>, gold: &[usize]| -> Array2<T> {
            let mut d = logp.mapv(|v| v.exp() * w);
            for (r, &g) in gold.iter().enumerate() {
                d[[r, g]] = d[[r, g]] - w;
            }
            d
        };

        let d_scores = softmax_grad(&self.head_logp, &targets.heads);
        let d_query = d_scores.dot(&self.key);
        let d_key = d_scores.t().dot(&self.query);

        let mut d_enc = mlp_backward(&params.arc_query, &self.query_cache, &d_query, &mut grads.arc_query);
        let mut d_enc_root = mlp_backward(&params.arc_key, &self.key_cache, &d_key, &mut grads.arc_key);

        let d_label_in = mlp_backward(
            &params.label,
            &self.label_cache,
            &softmax_grad(&self.label_logp, &targets.labels),
            &mut grads.label,
        );
        for (d, &h) in self.label_heads.iter().enumerate() {
            let mut dst = d_enc.row_mut(d);
            dst += &d_label_in.slice(s![d, ..e]);
            let mut dst = d_enc_root.row_mut(h);
            dst += &d_label_in.slice(s![d, e..]);
        }

        d_enc += &mlp_backward(
            &params.upos,
            &self.upos_cache,
            &softmax_grad(&self.upos_logp, &targets.upos),
            &mut grads.upos,
        );
        d_enc += &mlp_backward(
            &params.feats,
            &self.feats_cache,
            &softmax_grad(&self.feats_logp, &targets.feats),
            &mut grads.feats,
        );

        d_enc += &d_enc_root.slice(s![1.., ..]);
        let mut root_grad = grads.root.row_mut(0);
        root_grad += &d_enc_root.row(0);

        let mut d_x = d_enc;
        for l in (0..params.lstm.len()).rev() {
            let layer = &params.lstm[l];
            let (fw, bw) = &self.layers[l];
            let x = &self.layer_inputs[l];
            let hd = layer.forward.hidden_dim();
            let g = &mut grads.lstm[l];
            let dx_f = cell_backward(&layer.forward, x, fw, d_x.slice(s![.., ..hd]), &mut g.forward);
            let dx_b = cell_backward(&layer.backward, x, bw, d_x.slice(s![.., hd..]), &mut g.backward);
            d_x = dx_f + dx_b;
        }

        let mut offset = 0;
        for (table_grad, idx) in grads.embeddings.iter_mut().zip(&inputs.channels) {
            let width = table_grad.ncols();
            for (t, &i) in idx.iter().enumerate() {
                let mut row = table_grad.row_mut(i);
                row += &d_x.slice(s![t, offset..offset + width]);
            }
            offset += width;
        }
    }
}
