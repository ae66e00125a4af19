use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::SentimentError;
use crate::textprep::{TokenSeq, Vocab};

/// One convolution bank: `filters` filters spanning `width` tokens.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BankSpec {
    pub width: usize,
    pub filters: usize,
    /// Dropout applied to this bank's pooled features.
    pub dropout: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelShape {
    /// Vocabulary size plus the out-of-vocabulary row 0.
    pub vocab_rows: usize,
    pub embed_dim: usize,
    pub pad_len: usize,
    pub banks: Vec<BankSpec>,
    pub hidden: usize,
    /// Dropout over rows of the embedded tweet matrix.
    pub input_dropout: f64,
    pub hidden_dropout: f64,
}

impl ModelShape {
    /// 200-dimensional embeddings, 64-token tweets, 256/256/512 filters of
    /// width 3/4/5 and a 256-unit hidden layer.
    pub fn standard(vocab_size: usize) -> Self {
        Self {
            vocab_rows: vocab_size + 1,
            embed_dim: 200,
            pad_len: 64,
            banks: vec![
                BankSpec { width: 3, filters: 256, dropout: 0.5 },
                BankSpec { width: 4, filters: 256, dropout: 0.2 },
                BankSpec { width: 5, filters: 512, dropout: 0.2 },
            ],
            hidden: 256,
            input_dropout: 0.5,
            hidden_dropout: 0.5,
        }
    }

    /// Total pooled features feeding the hidden layer.
    pub fn features(&self) -> usize {
        self.banks.iter().map(|b| b.filters).sum()
    }

    pub fn validate(&self) -> Result<(), SentimentError> {
        let bad = |msg: String| Err(SentimentError::InvalidShape(msg));
        if self.vocab_rows == 0 || self.embed_dim == 0 || self.pad_len == 0 || self.hidden == 0 {
            return bad("vocab_rows, embed_dim, pad_len and hidden must be positive".into());
        }
        if self.banks.is_empty() || self.banks.iter().any(|b| b.filters == 0 || b.width == 0) {
            return bad("every bank needs a positive width and filter count".into());
        }
        if let Some(b) = self.banks.iter().find(|b| b.width > self.pad_len) {
            return Err(SentimentError::FilterTooWide { width: b.width, pad_len: self.pad_len });
        }
        let rates = self.banks.iter().map(|b| b.dropout).chain([self.input_dropout, self.hidden_dropout]);
        for p in rates {
            if !(0.0..1.0).contains(&p) {
                return bad(format!("dropout rate {p} outside [0, 1)"));
            }
        }
        Ok(())
    }
}

/// Weights and bias of one bank; filter `i` occupies
/// `weights[i * width * dim .. (i + 1) * width * dim]`, row-major over
/// (token offset, embedding component).
#[derive(Debug, Clone, PartialEq)]
pub struct BankParams {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    /// `vocab_rows x embed_dim`; row 0 stays zero.
    pub embedding: Vec<f64>,
    pub banks: Vec<BankParams>,
    /// `hidden x features`.
    pub dense_w: Vec<f64>,
    pub dense_b: Vec<f64>,
    pub out_w: Vec<f64>,
    pub out_b: Vec<f64>,
}

impl Params {
    pub fn zeros(shape: &ModelShape) -> Self {
        let n = shape.embed_dim;
        Self {
            embedding: vec![0.0; shape.vocab_rows * n],
            banks: shape
                .banks
                .iter()
                .map(|b| BankParams {
                    weights: vec![0.0; b.filters * b.width * n],
                    bias: vec![0.0; b.filters],
                })
                .collect(),
            dense_w: vec![0.0; shape.hidden * shape.features()],
            dense_b: vec![0.0; shape.hidden],
            out_w: vec![0.0; shape.hidden],
            out_b: vec![0.0],
        }
    }

    /// Parameter groups with stable names, in serialization order.
    pub fn groups(&self, shape: &ModelShape) -> Vec<(String, &[f64])> {
        let mut g: Vec<(String, &[f64])> = vec![("embedding".into(), &self.embedding)];
        for (spec, b) in shape.banks.iter().zip(&self.banks) {
            g.push((format!("conv{}.weight", spec.width), &b.weights));
            g.push((format!("conv{}.bias", spec.width), &b.bias));
        }
        g.push(("dense.weight".into(), &self.dense_w));
        g.push(("dense.bias".into(), &self.dense_b));
        g.push(("output.weight".into(), &self.out_w));
        g.push(("output.bias".into(), &self.out_b));
        g
    }

    pub fn groups_mut(&mut self) -> Vec<&mut Vec<f64>> {
        let mut g = vec![&mut self.embedding];
        for b in &mut self.banks {
            g.push(&mut b.weights);
            g.push(&mut b.bias);
        }
        g.push(&mut self.dense_w);
        g.push(&mut self.dense_b);
        g.push(&mut self.out_w);
        g.push(&mut self.out_b);
        g
    }

    pub fn all_finite(&self) -> bool {
        self.embedding
            .iter()
            .chain(self.banks.iter().flat_map(|b| b.weights.iter().chain(&b.bias)))
            .chain(&self.dense_w)
            .chain(&self.dense_b)
            .chain(&self.out_w)
            .chain(&self.out_b)
            .all(|v| v.is_finite())
    }
}

/// `pad_len x embed_dim` tweet representation; rows at and beyond `len`
/// are zero padding.
#[derive(Debug, Clone, PartialEq)]
pub struct TweetMatrix {
    pub rows: usize,
    pub dim: usize,
    /// Number of leading rows that came from tokens.
    pub len: usize,
    pub data: Vec<f64>,
}

impl TweetMatrix {
    pub fn zeros(rows: usize, dim: usize) -> Self {
        Self { rows, dim, len: 0, data: vec![0.0; rows * dim] }
    }

    /// Wraps a dense matrix, treating every row as content.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Self {
        let dim = rows.first().map_or(0, Vec::len);
        let n = rows.len();
        Self { rows: n, dim, len: n, data: rows.into_iter().flatten().collect() }
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.data[k * self.dim..(k + 1) * self.dim]
    }
}

/// Embedding rows for a token sequence: vocabulary id + 1, or 0 when unknown.
pub fn embedding_rows(tokens: &TokenSeq, vocab: &Vocab, pad_len: usize) -> Vec<usize> {
    tokens
        .iter()
        .take(pad_len)
        .map(|t| vocab.id(t).map_or(0, |id| id as usize + 1))
        .collect()
}

pub fn embed(tokens: &TokenSeq, vocab: &Vocab, model: &SentimentModel) -> TweetMatrix {
    model.matrix_from_rows(&embedding_rows(tokens, vocab, model.shape.pad_len))
}

/// A single filter, for scoring outside a model.
#[derive(Debug, Clone, PartialEq)]
pub struct Filter {
    pub width: usize,
    /// `width x dim`, row-major.
    pub weights: Vec<f64>,
    pub bias: f64,
}

/// Max over windows of `ReLU(<filter, rows k..k+width> + bias)`, scanning
/// every window of the padded matrix.
pub fn conv_feature(filter: &Filter, t: &TweetMatrix) -> Result<f64, SentimentError> {
    if filter.width > t.rows {
        return Err(SentimentError::FilterTooWide { width: filter.width, pad_len: t.rows });
    }
    let span = filter.width * t.dim;
    let best = (0..=t.rows - filter.width)
        .map(|k| (dot(&filter.weights, &t.data[k * t.dim..k * t.dim + span]) + filter.bias).max(0.0))
        .fold(0.0, f64::max);
    Ok(best)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    let mut acc = [0.0f64; 4];
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Activations kept from a forward pass for backpropagation.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    len: usize,
    input_scale: Vec<f64>,
    /// Content rows after input dropout, `len x dim`.
    x: Vec<f64>,
    /// Winning window per feature, `None` when the ReLU output is 0.
    argmax: Vec<Option<usize>>,
    feat_scale: Vec<f64>,
    features: Vec<f64>,
    hidden_pre: Vec<f64>,
    hidden_scale: Vec<f64>,
    hidden_out: Vec<f64>,
    pub logit: f64,
    pub prob: f64,
}

fn dropout_scales(n: usize, p: f64, mode: Mode, rng: &mut impl Rng) -> Vec<f64> {
    if mode == Mode::Eval || p == 0.0 {
        return vec![1.0; n];
    }
    let keep = 1.0 / (1.0 - p);
    (0..n).map(|_| if rng.random::<f64>() < p { 0.0 } else { keep }).collect()
}

fn sigmoid(z: f64) -> f64 {
    // clamped so the output stays inside the open unit interval
    let p = 1.0 / (1.0 + (-z).exp());
    p.clamp(f64::EPSILON, 1.0 - f64::EPSILON)
}

/// Binary cross-entropy computed from the logit.
pub fn bce_from_logit(logit: f64, positive: bool) -> f64 {
    let softplus = logit.max(0.0) + (-logit.abs()).exp().ln_1p();
    softplus - if positive { logit } else { 0.0 }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SentimentModel {
    pub shape: ModelShape,
    pub params: Params,
}

impl SentimentModel {
    pub fn zeros(shape: ModelShape) -> Result<Self, SentimentError> {
        shape.validate()?;
        let params = Params::zeros(&shape);
        Ok(Self { shape, params })
    }

    /// Embeddings uniform in (-0.05, 0.05) except the zero OOV row; layer
    /// weights Glorot-uniform; biases zero.
    pub fn initialized(shape: ModelShape, seed: u64) -> Result<Self, SentimentError> {
        let mut model = Self::zeros(shape)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = model.shape.embed_dim;
        for v in &mut model.params.embedding[n..] {
            *v = rng.random_range(-0.05..0.05);
        }
        let glorot = |fan_in: usize, fan_out: usize| (6.0 / (fan_in + fan_out) as f64).sqrt();
        for (spec, bank) in model.shape.banks.iter().zip(&mut model.params.banks) {
            let lim = glorot(spec.width * n, spec.filters);
            bank.weights.iter_mut().for_each(|w| *w = rng.random_range(-lim..lim));
        }
        let lim = glorot(model.shape.features(), model.shape.hidden);
        model.params.dense_w.iter_mut().for_each(|w| *w = rng.random_range(-lim..lim));
        let lim = glorot(model.shape.hidden, 1);
        model.params.out_w.iter_mut().for_each(|w| *w = rng.random_range(-lim..lim));
        Ok(model)
    }

    pub fn matrix_from_rows(&self, rows: &[usize]) -> TweetMatrix {
        let (m, n) = (self.shape.pad_len, self.shape.embed_dim);
        let mut t = TweetMatrix::zeros(m, n);
        t.len = rows.len().min(m);
        for (k, &r) in rows.iter().take(m).enumerate() {
            t.data[k * n..(k + 1) * n].copy_from_slice(&self.params.embedding[r * n..(r + 1) * n]);
        }
        t
    }

    /// Probability of the positive class.
    pub fn forward(&self, t: &TweetMatrix, mode: Mode, rng: &mut impl Rng) -> Result<f64, SentimentError> {
        Ok(self.forward_cached(t, mode, rng)?.prob)
    }

    pub fn forward_cached(&self, t: &TweetMatrix, mode: Mode, rng: &mut impl Rng) -> Result<ForwardCache, SentimentError> {
        let shape = &self.shape;
        let (m, n) = (shape.pad_len, shape.embed_dim);
        if t.rows != m || t.dim != n {
            return Err(SentimentError::InvalidShape(format!(
                "tweet matrix is {}x{}, model expects {m}x{n}",
                t.rows, t.dim
            )));
        }
        let len = t.len.min(m);
        let input_scale = dropout_scales(len, shape.input_dropout, mode, rng);
        let mut x = t.data[..len * n].to_vec();
        for (k, s) in input_scale.iter().enumerate() {
            if *s != 1.0 {
                x[k * n..(k + 1) * n].iter_mut().for_each(|v| *v *= s);
            }
        }

        // Windows starting at or after `len` see only padding, so their
        // pre-activation is the bias; one representative (index `len`)
        // stands in for all of them.
        let mut argmax = Vec::with_capacity(shape.features());
        let mut pooled = Vec::with_capacity(shape.features());
        for (spec, bank) in shape.banks.iter().zip(&self.params.banks) {
            let h = spec.width;
            let windows = m - h + 1;
            let real = windows.min(len);
            for (f, w) in bank.weights.chunks_exact(h * n).enumerate() {
                let bias = bank.bias[f];
                let mut best = f64::NEG_INFINITY;
                let mut best_k = 0;
                for k in 0..real {
                    let rows = h.min(len - k);
                    let pre = dot(&w[..rows * n], &x[k * n..(k + rows) * n]) + bias;
                    if pre > best {
                        best = pre;
                        best_k = k;
                    }
                }
                if windows > real && bias > best {
                    best = bias;
                    best_k = real;
                }
                if best > 0.0 {
                    pooled.push(best);
                    argmax.push(Some(best_k));
                } else {
                    pooled.push(0.0);
                    argmax.push(None);
                }
            }
        }

        let feat_scale: Vec<f64> = shape
            .banks
            .iter()
            .flat_map(|b| dropout_scales(b.filters, b.dropout, mode, rng))
            .collect();
        let features: Vec<f64> = pooled.iter().zip(&feat_scale).map(|(p, s)| p * s).collect();

        let nf = features.len();
        let hidden_pre: Vec<f64> = self
            .params
            .dense_w
            .chunks_exact(nf)
            .zip(&self.params.dense_b)
            .map(|(row, b)| dot(row, &features) + b)
            .collect();
        let hidden_scale = dropout_scales(shape.hidden, shape.hidden_dropout, mode, rng);
        let hidden_out: Vec<f64> = hidden_pre
            .iter()
            .zip(&hidden_scale)
            .map(|(z, s)| z.max(0.0) * s)
            .collect();
        let logit = dot(&self.params.out_w, &hidden_out) + self.params.out_b[0];
        if !logit.is_finite() || hidden_pre.iter().any(|v| v.is_nan()) {
            return Err(SentimentError::NumericalFault(format!("non-finite logit {logit}")));
        }
        Ok(ForwardCache {
            len,
            input_scale,
            x,
            argmax,
            feat_scale,
            features,
            hidden_pre,
            hidden_scale,
            hidden_out,
            logit,
            prob: sigmoid(logit),
        })
    }

    /// Accumulates `d loss / d params` into `grads`, given the loss
    /// derivative with respect to the logit. `rows` are the embedding rows
    /// the tweet matrix was built from; the OOV row receives no gradient.
    pub fn backward(&self, cache: &ForwardCache, rows: &[usize], dlogit: f64, grads: &mut Params) {
        let shape = &self.shape;
        let n = shape.embed_dim;
        let nf = cache.features.len();

        grads.out_b[0] += dlogit;
        axpy(dlogit, &cache.hidden_out, &mut grads.out_w);

        let mut dfeat = vec![0.0; nf];
        for j in 0..shape.hidden {
            if cache.hidden_pre[j] <= 0.0 {
                continue;
            }
            let dpre = dlogit * self.params.out_w[j] * cache.hidden_scale[j];
            if dpre == 0.0 {
                continue;
            }
            grads.dense_b[j] += dpre;
            axpy(dpre, &cache.features, &mut grads.dense_w[j * nf..(j + 1) * nf]);
            axpy(dpre, &self.params.dense_w[j * nf..(j + 1) * nf], &mut dfeat);
        }

        let mut dx = vec![0.0; cache.len * n];
        let mut feat = 0;
        for ((spec, bank), gbank) in shape.banks.iter().zip(&self.params.banks).zip(&mut grads.banks) {
            let h = spec.width;
            for f in 0..spec.filters {
                let i = feat + f;
                let Some(k) = cache.argmax[i] else { continue };
                let dpre = dfeat[i] * cache.feat_scale[i];
                if dpre == 0.0 {
                    continue;
                }
                gbank.bias[f] += dpre;
                if k < cache.len {
                    let rows = h.min(cache.len - k);
                    let span = rows * n;
                    let w = &bank.weights[f * h * n..f * h * n + span];
                    axpy(dpre, &cache.x[k * n..k * n + span], &mut gbank.weights[f * h * n..f * h * n + span]);
                    axpy(dpre, w, &mut dx[k * n..k * n + span]);
                }
            }
            feat += spec.filters;
        }

        for (k, &r) in rows.iter().take(cache.len).enumerate() {
            if r == 0 || cache.input_scale[k] == 0.0 {
                continue;
            }
            axpy(cache.input_scale[k], &dx[k * n..(k + 1) * n], &mut grads.embedding[r * n..(r + 1) * n]);
        }
    }
}
