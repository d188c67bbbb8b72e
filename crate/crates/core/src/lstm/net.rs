//! Forward pass, loss and backpropagation through time.

use rand::Rng as _;

use super::linalg::{add_bias, add_row_sums, gemm, Mat, View};
use super::{Layout, ModelParams, NORM_EPS};
use crate::error::{Error, Result};
use crate::rng::{self, tag};
use crate::signal::ImpactSample;

/// Probabilities are clamped to this floor inside the log of the loss.
pub const LOSS_CLAMP: f64 = 1e-12;

/// A batch of sequences stored as one `features × (seq_len · batch)`
/// matrix; column `t · batch + b` holds timestep `t` of sequence `b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub(crate) x: Mat,
    pub labels: Vec<usize>,
    pub batch: usize,
    pub seq_len: usize,
}

impl Batch {
    /// `data` is indexed `[sequence][timestep][feature]`.
    pub fn from_sequences(batch: usize, seq_len: usize, features: usize, data: &[f64], labels: Vec<usize>) -> Result<Self> {
        if data.len() != batch * seq_len * features {
            return Err(Error::Shape(format!(
                "expected {batch}×{seq_len}×{features} values, got {}",
                data.len()
            )));
        }
        if labels.len() != batch {
            return Err(Error::Shape(format!("expected {batch} labels, got {}", labels.len())));
        }
        if batch == 0 {
            return Err(Error::Empty("batch has no sequences".into()));
        }
        let mut x = Mat::zeros(features, seq_len * batch);
        for b in 0..batch {
            for t in 0..seq_len {
                let src = &data[(b * seq_len + t) * features..][..features];
                x.col_mut(t * batch + b).copy_from_slice(src);
            }
        }
        Ok(Self {
            x,
            labels,
            batch,
            seq_len,
        })
    }

    /// One sequence per sample; feature `k` is the reduced trace of sensor `k`.
    pub fn from_samples(samples: &[&ImpactSample]) -> Result<Self> {
        let first = samples.first().ok_or_else(|| Error::Empty("batch has no samples".into()))?;
        let features = first.traces.len();
        let seq_len = first.traces.first().map_or(0, |t| t.samples.len());
        let batch = samples.len();
        let mut x = Mat::zeros(features, seq_len * batch);
        for (b, s) in samples.iter().enumerate() {
            if s.traces.len() != features || s.traces.iter().any(|t| t.samples.len() != seq_len) {
                return Err(Error::Shape("samples in a batch must share trace count and length".into()));
            }
            for (k, trace) in s.traces.iter().enumerate() {
                for (t, &v) in trace.samples.iter().enumerate() {
                    x.data[(t * batch + b) * features + k] = v;
                }
            }
        }
        Ok(Self {
            x,
            labels: samples.iter().map(|s| s.label.index()).collect(),
            batch,
            seq_len,
        })
    }

    pub fn features(&self) -> usize {
        self.x.rows
    }

    /// Feature vector of sequence `b` at timestep `t`.
    pub fn at(&self, b: usize, t: usize) -> &[f64] {
        self.x.col(t * self.batch + b)
    }
}

struct BlockCache {
    x_in: Mat,
    /// Dense output after ReLU.
    d: Mat,
    xhat: Mat,
    inv_s: Vec<f64>,
    n: Mat,
    /// Activated gates, rows input, forget, cell, output.
    gates: Mat,
    c: Mat,
    tc: Mat,
    h: Mat,
    /// Scaled keep mask applied to `h` (non-final blocks, training only).
    mask: Option<Mat>,
}

/// Activations kept for the backward pass.
pub struct ForwardCache {
    blocks: Vec<BlockCache>,
    /// Per block (mean, biased variance) per timestep, in training mode.
    pub(crate) batch_stats: Vec<(Vec<f64>, Vec<f64>)>,
    /// Final hidden state after dropout, hidden × batch.
    last: Mat,
    last_mask: Option<Mat>,
    /// classes × batch
    probs: Mat,
    train_mode: bool,
}

impl ForwardCache {
    /// Class probabilities, one row per sequence.
    pub fn probs(&self) -> Vec<Vec<f64>> {
        (0..self.probs.cols).map(|b| self.probs.col(b).to_vec()).collect()
    }

    /// Index of the most probable class per sequence (lowest index on ties).
    pub fn predictions(&self) -> Vec<usize> {
        (0..self.probs.cols)
            .map(|b| {
                let col = self.probs.col(b);
                (0..col.len()).fold(0, |best, k| if col[k] > col[best] { k } else { best })
            })
            .collect()
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn dropout_mask(r: &mut rng::Rng, rows: usize, cols: usize, p: f64) -> Mat {
    let keep = 1.0 - p;
    let mut m = Mat::zeros(rows, cols);
    for v in &mut m.data {
        *v = if r.random::<f64>() < keep { 1.0 / keep } else { 0.0 };
    }
    m
}

fn check_batch(params: &ModelParams, batch: &Batch) -> Result<()> {
    let spec = &params.spec;
    if batch.features() != spec.input_features {
        return Err(Error::Shape(format!(
            "model expects {} features, batch has {}",
            spec.input_features,
            batch.features()
        )));
    }
    if batch.seq_len != spec.seq_len {
        return Err(Error::Shape(format!(
            "model expects sequences of {}, batch has {}",
            spec.seq_len, batch.seq_len
        )));
    }
    if batch.x.data.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("batch input".into()));
    }
    if let Some(&l) = batch.labels.iter().find(|&&l| l >= spec.n_classes) {
        return Err(Error::Shape(format!("label {l} out of range")));
    }
    Ok(())
}

/// Runs the network. In training mode, normalization uses batch statistics
/// and dropout masks are drawn from `seed`; otherwise normalization uses the
/// running statistics and dropout is the identity.
pub fn forward(params: &ModelParams, batch: &Batch, train_mode: bool, seed: u64) -> Result<ForwardCache> {
    params.check()?;
    check_batch(params, batch)?;
    let spec = &params.spec;
    let layout = Layout::of(spec);
    let th = &params.theta;
    let (t_len, bs) = (batch.seq_len, batch.batch);
    let tb = t_len * bs;
    let use_dropout = train_mode && spec.dropout > 0.0;
    let mut drop_rng = rng::rng_from(seed, &[tag::DROPOUT]);

    let mut x = batch.x.clone();
    for v in &mut x.data {
        *v *= params.input_scale;
    }
    let mut blocks = Vec::with_capacity(layout.blocks.len());
    let mut batch_stats = Vec::new();
    let mut last = Mat::zeros(spec.lstm_hidden, bs);
    let mut last_mask = None;

    for (bi, bl) in layout.blocks.iter().enumerate() {
        let (u, h, f_in) = (bl.u, bl.h, bl.f_in);

        let mut d = Mat::zeros(u, tb);
        gemm(1.0, View::new(&th[bl.wd..bl.wd + u * f_in], u, f_in).n(), x.view().n(), 0.0, &mut d.data, u);
        add_bias(&mut d.data, u, &th[bl.bd..bl.bd + u]);
        for v in &mut d.data {
            *v = v.max(0.0);
        }

        let gamma = &th[bl.gamma..bl.gamma + u];
        let beta = &th[bl.beta..bl.beta + u];
        let mut xhat = Mat::zeros(u, tb);
        let mut n = Mat::zeros(u, tb);
        let mut inv_s = vec![0.0; t_len];
        let mut means = vec![0.0; t_len];
        let mut vars = vec![0.0; t_len];
        let pooled = (u * bs) as f64;
        for t in 0..t_len {
            let block = d.cols(t * bs, bs).data;
            let (mean, var) = if train_mode {
                let mean = block.iter().sum::<f64>() / pooled;
                let var = block.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / pooled;
                (mean, var)
            } else {
                (params.norm[bi].mean[t], params.norm[bi].var[t])
            };
            means[t] = mean;
            vars[t] = var;
            let is = 1.0 / (var + NORM_EPS).sqrt();
            inv_s[t] = is;
            let start = t * bs * u;
            for (k, &v) in block.iter().enumerate() {
                let r = k % u;
                let xh = (v - mean) * is;
                xhat.data[start + k] = xh;
                n.data[start + k] = gamma[r] * xh + beta[r];
            }
        }
        if train_mode {
            batch_stats.push((means, vars));
        }

        let mut gates = Mat::zeros(4 * h, tb);
        gemm(1.0, View::new(&th[bl.wx..bl.wx + 4 * h * u], 4 * h, u).n(), n.view().n(), 0.0, &mut gates.data, 4 * h);
        add_bias(&mut gates.data, 4 * h, &th[bl.b..bl.b + 4 * h]);
        let wh = View::new(&th[bl.wh..bl.wh + 4 * h * h], 4 * h, h);
        let mut c = Mat::zeros(h, tb);
        let mut tc = Mat::zeros(h, tb);
        let mut hm = Mat::zeros(h, tb);
        for t in 0..t_len {
            if t > 0 {
                gemm(1.0, wh.n(), hm.cols((t - 1) * bs, bs).n(), 1.0, gates.cols_mut(t * bs, bs), 4 * h);
            }
            for j in 0..bs {
                let col = t * bs + j;
                let g = gates.col_mut(col);
                for v in &mut g[..2 * h] {
                    *v = sigmoid(*v);
                }
                for v in &mut g[2 * h..3 * h] {
                    *v = v.tanh();
                }
                for v in &mut g[3 * h..] {
                    *v = sigmoid(*v);
                }
                for k in 0..h {
                    let c_prev = if t > 0 { c.data[(col - bs) * h + k] } else { 0.0 };
                    let ck = g[h + k] * c_prev + g[k] * g[2 * h + k];
                    let tk = ck.tanh();
                    c.data[col * h + k] = ck;
                    tc.data[col * h + k] = tk;
                    hm.data[col * h + k] = g[3 * h + k] * tk;
                }
            }
        }

        let is_last = bi + 1 == layout.blocks.len();
        let mut mask = None;
        let next_x = if is_last {
            last.data.copy_from_slice(hm.cols((t_len - 1) * bs, bs).data);
            if use_dropout {
                let m = dropout_mask(&mut drop_rng, h, bs, spec.dropout);
                for (v, k) in last.data.iter_mut().zip(&m.data) {
                    *v *= k;
                }
                last_mask = Some(m);
            }
            None
        } else {
            let mut y = hm.clone();
            if use_dropout {
                let m = dropout_mask(&mut drop_rng, h, tb, spec.dropout);
                for (v, k) in y.data.iter_mut().zip(&m.data) {
                    *v *= k;
                }
                mask = Some(m);
            }
            Some(y)
        };
        let x_in = match next_x {
            Some(y) => std::mem::replace(&mut x, y),
            None => std::mem::replace(&mut x, Mat::zeros(0, 0)),
        };
        blocks.push(BlockCache {
            x_in,
            d,
            xhat,
            inv_s,
            n,
            gates,
            c,
            tc,
            h: hm,
            mask,
        });
    }

    let classes = spec.n_classes;
    let mut probs = Mat::zeros(classes, bs);
    gemm(
        1.0,
        View::new(&th[layout.wo..layout.wo + classes * spec.lstm_hidden], classes, spec.lstm_hidden).n(),
        last.view().n(),
        0.0,
        &mut probs.data,
        classes,
    );
    add_bias(&mut probs.data, classes, &th[layout.bo..layout.bo + classes]);
    for col in probs.data.chunks_exact_mut(classes) {
        let max = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in col.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in col.iter_mut() {
            *v /= sum;
        }
    }
    Ok(ForwardCache {
        blocks,
        batch_stats,
        last,
        last_mask,
        probs,
        train_mode,
    })
}

/// Mean negative log-likelihood of the true labels. Probabilities below
/// [`LOSS_CLAMP`] are raised to it before taking the log.
pub fn loss(probs: &[Vec<f64>], labels: &[usize]) -> Result<f64> {
    if probs.len() != labels.len() {
        return Err(Error::Shape(format!("{} rows vs {} labels", probs.len(), labels.len())));
    }
    if probs.is_empty() {
        return Err(Error::Empty("no predictions".into()));
    }
    let mut total = 0.0;
    for (row, &l) in probs.iter().zip(labels) {
        let sum: f64 = row.iter().sum();
        if row.iter().any(|p| !p.is_finite() || *p < 0.0) || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument("rows must be probability distributions".into()));
        }
        let p = *row
            .get(l)
            .ok_or_else(|| Error::Shape(format!("label {l} out of range")))?;
        total -= p.max(LOSS_CLAMP).ln();
    }
    Ok(total / probs.len() as f64)
}

/// Gradient of the mean loss, laid out like [`ModelParams::theta`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub flat: Vec<f64>,
}

impl Gradients {
    pub fn norm(&self) -> f64 {
        self.flat.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Exact gradient of the mean loss for the activations in `cache`, which
/// must come from [`forward`] on the same parameters and batch.
pub fn backward(params: &ModelParams, batch: &Batch, cache: &ForwardCache) -> Result<Gradients> {
    let spec = &params.spec;
    let layout = Layout::of(spec);
    let th = &params.theta;
    let (t_len, bs) = (batch.seq_len, batch.batch);
    let tb = t_len * bs;
    let classes = spec.n_classes;
    let hid = spec.lstm_hidden;
    if cache.probs.cols != bs || cache.blocks.len() != layout.blocks.len() {
        return Err(Error::Shape("forward cache does not match the batch".into()));
    }
    let mut grad = vec![0.0; layout.total];

    let mut dlogits = cache.probs.clone();
    for (b, &l) in batch.labels.iter().enumerate() {
        dlogits.data[b * classes + l] -= 1.0;
    }
    for v in &mut dlogits.data {
        *v /= bs as f64;
    }
    gemm(
        1.0,
        dlogits.view().n(),
        cache.last.view().t(),
        0.0,
        &mut grad[layout.wo..layout.wo + classes * hid],
        classes,
    );
    add_row_sums(&dlogits.data, classes, &mut grad[layout.bo..layout.bo + classes]);
    let mut dlast = Mat::zeros(hid, bs);
    gemm(
        1.0,
        View::new(&th[layout.wo..layout.wo + classes * hid], classes, hid).t(),
        dlogits.view().n(),
        0.0,
        &mut dlast.data,
        hid,
    );
    if let Some(m) = &cache.last_mask {
        for (v, k) in dlast.data.iter_mut().zip(&m.data) {
            *v *= k;
        }
    }
    let mut dh_out = Mat::zeros(hid, tb);
    dh_out.cols_mut((t_len - 1) * bs, bs).copy_from_slice(&dlast.data);

    for (bi, bl) in layout.blocks.iter().enumerate().rev() {
        let bc = &cache.blocks[bi];
        let (u, h, f_in) = (bl.u, bl.h, bl.f_in);

        let mut dz = Mat::zeros(4 * h, tb);
        let mut dh_rec = vec![0.0; h * bs];
        let mut dc_next = vec![0.0; h * bs];
        let wh = View::new(&th[bl.wh..bl.wh + 4 * h * h], 4 * h, h);
        for t in (0..t_len).rev() {
            for j in 0..bs {
                let col = t * bs + j;
                let g = bc.gates.col(col);
                let dzc = &mut dz.data[col * 4 * h..(col + 1) * 4 * h];
                for k in 0..h {
                    let dh = dh_out.data[col * h + k] + dh_rec[j * h + k];
                    let (i, f, gg, o) = (g[k], g[h + k], g[2 * h + k], g[3 * h + k]);
                    let tk = bc.tc.data[col * h + k];
                    let d_o = dh * tk;
                    let dc = dh * o * (1.0 - tk * tk) + dc_next[j * h + k];
                    let c_prev = if t > 0 { bc.c.data[(col - bs) * h + k] } else { 0.0 };
                    dc_next[j * h + k] = dc * f;
                    dzc[k] = dc * gg * i * (1.0 - i);
                    dzc[h + k] = dc * c_prev * f * (1.0 - f);
                    dzc[2 * h + k] = dc * i * (1.0 - gg * gg);
                    dzc[3 * h + k] = d_o * o * (1.0 - o);
                }
            }
            gemm(1.0, wh.t(), dz.cols(t * bs, bs).n(), 0.0, &mut dh_rec, h);
        }
        if t_len > 1 {
            let steps = (t_len - 1) * bs;
            gemm(1.0, dz.cols(bs, steps).n(), bc.h.cols(0, steps).t(), 0.0, &mut grad[bl.wh..bl.wh + 4 * h * h], 4 * h);
        }
        gemm(1.0, dz.view().n(), bc.n.view().t(), 0.0, &mut grad[bl.wx..bl.wx + 4 * h * u], 4 * h);
        add_row_sums(&dz.data, 4 * h, &mut grad[bl.b..bl.b + 4 * h]);
        let mut dn = Mat::zeros(u, tb);
        gemm(1.0, View::new(&th[bl.wx..bl.wx + 4 * h * u], 4 * h, u).t(), dz.view().n(), 0.0, &mut dn.data, u);
        drop(dz);

        let gamma = &th[bl.gamma..bl.gamma + u];
        {
            let (dgamma, dbeta) = (bl.gamma, bl.beta);
            for (k, (&g, &xh)) in dn.data.iter().zip(&bc.xhat.data).enumerate() {
                let r = k % u;
                grad[dgamma + r] += g * xh;
                grad[dbeta + r] += g;
            }
        }
        let mut dd = dn;
        for (k, v) in dd.data.iter_mut().enumerate() {
            *v *= gamma[k % u];
        }
        let pooled = (u * bs) as f64;
        for t in 0..t_len {
            let range = t * bs * u..(t + 1) * bs * u;
            let xh = &bc.xhat.data[range.clone()];
            let block = &mut dd.data[range];
            let is = bc.inv_s[t];
            if cache.train_mode {
                let m1 = block.iter().sum::<f64>() / pooled;
                let m2 = block.iter().zip(xh).map(|(a, b)| a * b).sum::<f64>() / pooled;
                for (v, x) in block.iter_mut().zip(xh) {
                    *v = is * (*v - m1 - x * m2);
                }
            } else {
                for v in block.iter_mut() {
                    *v *= is;
                }
            }
        }
        for (v, &a) in dd.data.iter_mut().zip(&bc.d.data) {
            if a <= 0.0 {
                *v = 0.0;
            }
        }
        gemm(1.0, dd.view().n(), bc.x_in.view().t(), 0.0, &mut grad[bl.wd..bl.wd + u * f_in], u);
        add_row_sums(&dd.data, u, &mut grad[bl.bd..bl.bd + u]);

        if bi > 0 {
            let mut dy = Mat::zeros(f_in, tb);
            gemm(1.0, View::new(&th[bl.wd..bl.wd + u * f_in], u, f_in).t(), dd.view().n(), 0.0, &mut dy.data, f_in);
            if let Some(m) = &cache.blocks[bi - 1].mask {
                for (v, k) in dy.data.iter_mut().zip(&m.data) {
                    *v *= k;
                }
            }
            dh_out = dy;
        }
    }

    if grad.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("gradient".into()));
    }
    Ok(Gradients { flat: grad })
}

/// Loss and gradient of one training-mode step.
pub fn loss_and_gradient(params: &ModelParams, batch: &Batch, seed: u64) -> Result<(f64, Gradients, ForwardCache)> {
    let cache = forward(params, batch, true, seed)?;
    let l = loss(&cache.probs(), &batch.labels)?;
    let g = backward(params, batch, &cache)?;
    Ok((l, g, cache))
}
