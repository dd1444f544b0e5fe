//! Network parameters, forward pass and hand-written backpropagation.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Arch, NeuralError, SequenceSample};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Tensor<T: Scalar> {
    pub shape: Vec<usize>,
    pub data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn zeros(shape: &[usize]) -> Self {
        Tensor {
            shape: shape.to_vec(),
            data: vec![T::zero(); shape.iter().product()],
        }
    }

    pub fn uniform<R: Rng>(shape: &[usize], bound: f64, rng: &mut R) -> Self {
        let n = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: (0..n).map(|_| T::of(rng.random_range(-bound..bound))).collect(),
        }
    }

    /// Glorot-uniform bound for a `rows × cols` matrix.
    fn glorot<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Self {
        Self::uniform(&[rows, cols], (6.0 / (rows + cols) as f64).sqrt(), rng)
    }

    pub fn cols(&self) -> usize {
        self.shape.get(1).copied().unwrap_or(1)
    }

    pub fn row(&self, r: usize) -> &[T] {
        let c = self.cols();
        &self.data[r * c..(r + 1) * c]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    fn zeros_like(&self) -> Self {
        Self::zeros(&self.shape)
    }

    fn consistent(&self) -> bool {
        !self.shape.is_empty() && self.shape.iter().product::<usize>() == self.data.len()
    }
}

fn matvec<T: Scalar>(w: &Tensor<T>, x: &[T], out: &mut [T]) {
    let c = w.cols();
    for (r, o) in out.iter_mut().enumerate() {
        let row = &w.data[r * c..(r + 1) * c];
        let mut s = T::zero();
        for (a, b) in row.iter().zip(x) {
            s += *a * *b;
        }
        *o += s;
    }
}

/// out += wᵀ y
fn matvec_t<T: Scalar>(w: &Tensor<T>, y: &[T], out: &mut [T]) {
    let c = w.cols();
    for (r, &yr) in y.iter().enumerate() {
        if yr == T::zero() {
            continue;
        }
        let row = &w.data[r * c..(r + 1) * c];
        for (o, a) in out.iter_mut().zip(row) {
            *o += *a * yr;
        }
    }
}

/// g += a ⊗ b
fn outer_add<T: Scalar>(g: &mut Tensor<T>, a: &[T], b: &[T]) {
    let c = g.cols();
    for (r, &ar) in a.iter().enumerate() {
        if ar == T::zero() {
            continue;
        }
        let row = &mut g.data[r * c..(r + 1) * c];
        for (o, bv) in row.iter_mut().zip(b) {
            *o += ar * *bv;
        }
    }
}

fn add_into<T: Scalar>(dst: &mut [T], src: &[T]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += *s;
    }
}

fn sigmoid<T: Scalar>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

pub(crate) fn softmax<T: Scalar>(v: &[T]) -> Vec<T> {
    let m = v.iter().copied().fold(T::neg_infinity(), T::max);
    let e: Vec<T> = v.iter().map(|&x| (x - m).exp()).collect();
    let s: T = e.iter().copied().sum();
    e.into_iter().map(|x| x / s).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Conv<T: Scalar> {
    pub width: usize,
    /// `filters × (width · d)`
    pub w: Tensor<T>,
    pub b: Tensor<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Lstm<T: Scalar> {
    /// `4H × d`, gate blocks in the order input, forget, cell, output.
    pub wx: Tensor<T>,
    /// `4H × H`
    pub wh: Tensor<T>,
    pub b: Tensor<T>,
}

impl<T: Scalar> Lstm<T> {
    fn hidden(&self) -> usize {
        self.wh.cols()
    }

    fn init<R: Rng>(d: usize, h: usize, rng: &mut R) -> Self {
        let mut b = Tensor::zeros(&[4 * h]);
        for v in &mut b.data[h..2 * h] {
            *v = T::one();
        }
        Lstm {
            wx: Tensor::glorot(4 * h, d, rng),
            wh: Tensor::glorot(4 * h, h, rng),
            b,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Attention<T: Scalar> {
    /// `A × 2H`
    pub w: Tensor<T>,
    pub b: Tensor<T>,
    pub v: Tensor<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct NetworkParams<T: Scalar> {
    pub arch: Arch,
    /// `(n + 1) × d`; row 0 is the padding row and stays zero.
    pub embedding: Tensor<T>,
    pub convs: Vec<Conv<T>>,
    pub forward_lstm: Option<Lstm<T>>,
    pub backward_lstm: Option<Lstm<T>>,
    pub attention: Option<Attention<T>>,
    /// `K × D`
    pub dense_w: Tensor<T>,
    pub dense_b: Tensor<T>,
}

/// Layer sizes used by [`NetworkParams::init`].
#[derive(Debug, Clone, PartialEq)]
pub struct Dims {
    pub hidden: usize,
    pub filters: usize,
    pub kernel_widths: Vec<usize>,
    pub attention: usize,
    pub classes: usize,
}

impl<T: Scalar> NetworkParams<T> {
    pub fn init<R: Rng>(arch: Arch, embedding: Tensor<T>, dims: &Dims, rng: &mut R) -> Self {
        let d = embedding.cols();
        let h = dims.hidden;
        let mut p = NetworkParams {
            arch,
            embedding,
            convs: Vec::new(),
            forward_lstm: None,
            backward_lstm: None,
            attention: None,
            dense_w: Tensor::zeros(&[dims.classes, 1]),
            dense_b: Tensor::zeros(&[dims.classes]),
        };
        let feat = match arch {
            Arch::Cnn1d => {
                p.convs = dims
                    .kernel_widths
                    .iter()
                    .map(|&w| Conv {
                        width: w,
                        w: Tensor::glorot(dims.filters, w * d, rng),
                        b: Tensor::zeros(&[dims.filters]),
                    })
                    .collect();
                dims.filters * dims.kernel_widths.len()
            }
            Arch::Lstm => {
                p.forward_lstm = Some(Lstm::init(d, h, rng));
                h
            }
            Arch::Bilstm | Arch::BilstmAttention => {
                p.forward_lstm = Some(Lstm::init(d, h, rng));
                p.backward_lstm = Some(Lstm::init(d, h, rng));
                if arch == Arch::BilstmAttention {
                    p.attention = Some(Attention {
                        w: Tensor::glorot(dims.attention, 2 * h, rng),
                        b: Tensor::zeros(&[dims.attention]),
                        v: Tensor::uniform(&[dims.attention], (3.0 / dims.attention as f64).sqrt(), rng),
                    });
                }
                2 * h
            }
        };
        p.dense_w = Tensor::glorot(dims.classes, feat, rng);
        p
    }

    pub fn n_classes(&self) -> usize {
        self.dense_b.len()
    }

    pub fn embedding_dim(&self) -> usize {
        self.embedding.cols()
    }

    /// Named tensors in a fixed order.
    pub fn tensors(&self) -> Vec<(String, &Tensor<T>)> {
        let mut out = vec![("embedding".to_string(), &self.embedding)];
        for (i, c) in self.convs.iter().enumerate() {
            out.push((format!("conv{i}.w"), &c.w));
            out.push((format!("conv{i}.b"), &c.b));
        }
        for (name, l) in [("lstm_fwd", &self.forward_lstm), ("lstm_bwd", &self.backward_lstm)] {
            if let Some(l) = l {
                out.push((format!("{name}.wx"), &l.wx));
                out.push((format!("{name}.wh"), &l.wh));
                out.push((format!("{name}.b"), &l.b));
            }
        }
        if let Some(a) = &self.attention {
            out.push(("attention.w".into(), &a.w));
            out.push(("attention.b".into(), &a.b));
            out.push(("attention.v".into(), &a.v));
        }
        out.push(("dense.w".into(), &self.dense_w));
        out.push(("dense.b".into(), &self.dense_b));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, &mut Tensor<T>)> {
        let mut out = vec![("embedding".to_string(), &mut self.embedding)];
        for (i, c) in self.convs.iter_mut().enumerate() {
            out.push((format!("conv{i}.w"), &mut c.w));
            out.push((format!("conv{i}.b"), &mut c.b));
        }
        for (name, l) in [("lstm_fwd", &mut self.forward_lstm), ("lstm_bwd", &mut self.backward_lstm)] {
            if let Some(l) = l {
                out.push((format!("{name}.wx"), &mut l.wx));
                out.push((format!("{name}.wh"), &mut l.wh));
                out.push((format!("{name}.b"), &mut l.b));
            }
        }
        if let Some(a) = &mut self.attention {
            out.push(("attention.w".into(), &mut a.w));
            out.push(("attention.b".into(), &mut a.b));
            out.push(("attention.v".into(), &mut a.v));
        }
        out.push(("dense.w".into(), &mut self.dense_w));
        out.push(("dense.b".into(), &mut self.dense_b));
        out
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for (_, t) in z.tensors_mut() {
            *t = t.zeros_like();
        }
        z
    }

    fn feature_dim(&self) -> usize {
        match self.arch {
            Arch::Cnn1d => self.convs.iter().map(|c| c.b.len()).sum(),
            Arch::Lstm => self.forward_lstm.as_ref().map_or(0, Lstm::hidden),
            Arch::Bilstm | Arch::BilstmAttention => 2 * self.forward_lstm.as_ref().map_or(0, Lstm::hidden),
        }
    }

    /// Checks that every tensor the architecture needs is present and sized.
    pub fn validate(&self) -> Result<(), NeuralError> {
        let bad = |what: &str| Err(NeuralError::Uninitialized(what.to_string()));
        if self.tensors().iter().any(|(_, t)| !t.consistent()) {
            return bad("tensor data does not match its shape");
        }
        if self.embedding.shape.len() != 2 || self.embedding.shape[0] == 0 {
            return bad("embedding");
        }
        if self.embedding.row(0).iter().any(|&v| v != T::zero()) {
            return bad("embedding padding row is not zero");
        }
        let d = self.embedding_dim();
        let need_lstm = !matches!(self.arch, Arch::Cnn1d);
        let need_bwd = matches!(self.arch, Arch::Bilstm | Arch::BilstmAttention);
        if self.arch == Arch::Cnn1d && (self.convs.is_empty() || self.convs.iter().any(|c| c.w.cols() != c.width * d)) {
            return bad("convolution layers");
        }
        for (need, l) in [(need_lstm, &self.forward_lstm), (need_bwd, &self.backward_lstm)] {
            match l {
                Some(l) if need && l.wx.cols() == d && l.wx.shape[0] == 4 * l.hidden() => {}
                None if !need => {}
                _ => return bad("lstm layers"),
            }
        }
        if (self.arch == Arch::BilstmAttention) != self.attention.is_some() {
            return bad("attention layer");
        }
        if self.dense_w.shape.len() != 2 || self.dense_w.cols() != self.feature_dim() || self.dense_w.shape[0] != self.n_classes() {
            return bad("dense layer");
        }
        Ok(())
    }
}

struct Step<T> {
    pos: usize,
    x: Vec<T>,
    h_prev: Vec<T>,
    c_prev: Vec<T>,
    i: Vec<T>,
    f: Vec<T>,
    g: Vec<T>,
    o: Vec<T>,
    tanh_c: Vec<T>,
    h: Vec<T>,
}

fn lstm_forward<T: Scalar>(p: &Lstm<T>, emb: &Tensor<T>, seq: &SequenceSample, order: impl Iterator<Item = usize>) -> Vec<Step<T>> {
    let h = p.hidden();
    let mut h_prev = vec![T::zero(); h];
    let mut c_prev = vec![T::zero(); h];
    let mut steps = Vec::new();
    for pos in order {
        let x = emb.row(seq.indices[pos] as usize).to_vec();
        let mut a = p.b.data.clone();
        matvec(&p.wx, &x, &mut a);
        matvec(&p.wh, &h_prev, &mut a);
        let i: Vec<T> = a[..h].iter().map(|&v| sigmoid(v)).collect();
        let f: Vec<T> = a[h..2 * h].iter().map(|&v| sigmoid(v)).collect();
        let g: Vec<T> = a[2 * h..3 * h].iter().map(|&v| v.tanh()).collect();
        let o: Vec<T> = a[3 * h..].iter().map(|&v| sigmoid(v)).collect();
        let c: Vec<T> = (0..h).map(|k| f[k] * c_prev[k] + i[k] * g[k]).collect();
        let tanh_c: Vec<T> = c.iter().map(|v| v.tanh()).collect();
        let hn: Vec<T> = (0..h).map(|k| o[k] * tanh_c[k]).collect();
        let step = Step {
            pos,
            x,
            h_prev: std::mem::replace(&mut h_prev, hn.clone()),
            c_prev: std::mem::replace(&mut c_prev, c),
            i,
            f,
            g,
            o,
            tanh_c,
            h: hn,
        };
        steps.push(step);
    }
    steps
}

/// `dh_ext[s]` is the external gradient on the hidden state of step `s`
/// (step order, not position order). Accumulates into `grad`, and into
/// `demb` rows when given.
fn lstm_backward<T: Scalar>(
    p: &Lstm<T>,
    steps: &[Step<T>],
    dh_ext: &[Vec<T>],
    grad: &mut Lstm<T>,
    seq: &SequenceSample,
    mut demb: Option<&mut Tensor<T>>,
) {
    let h = p.hidden();
    let mut dh_next = vec![T::zero(); h];
    let mut dc_next = vec![T::zero(); h];
    let one = T::one();
    for (s, st) in steps.iter().enumerate().rev() {
        let dh: Vec<T> = (0..h).map(|k| dh_next[k] + dh_ext[s][k]).collect();
        let mut da = vec![T::zero(); 4 * h];
        let mut dc_prev = vec![T::zero(); h];
        for k in 0..h {
            let dc = dc_next[k] + dh[k] * st.o[k] * (one - st.tanh_c[k] * st.tanh_c[k]);
            let d_o = dh[k] * st.tanh_c[k];
            let di = dc * st.g[k];
            let dg = dc * st.i[k];
            let df = dc * st.c_prev[k];
            dc_prev[k] = dc * st.f[k];
            da[k] = di * st.i[k] * (one - st.i[k]);
            da[h + k] = df * st.f[k] * (one - st.f[k]);
            da[2 * h + k] = dg * (one - st.g[k] * st.g[k]);
            da[3 * h + k] = d_o * st.o[k] * (one - st.o[k]);
        }
        outer_add(&mut grad.wx, &da, &st.x);
        outer_add(&mut grad.wh, &da, &st.h_prev);
        add_into(&mut grad.b.data, &da);
        if let Some(demb) = demb.as_deref_mut() {
            let row = seq.indices[st.pos] as usize;
            if row != 0 {
                let c = demb.cols();
                matvec_t(&p.wx, &da, &mut demb.data[row * c..(row + 1) * c]);
            }
        }
        let mut dhp = vec![T::zero(); h];
        matvec_t(&p.wh, &da, &mut dhp);
        dh_next = dhp;
        dc_next = dc_prev;
    }
}

struct ConvCache<T> {
    /// Per filter, the arg-max window start when the pooled value is positive.
    best: Vec<Option<usize>>,
    pooled: Vec<T>,
}

/// Window starts over the valid prefix; a prefix shorter than the kernel
/// still gets one window, zero-filled past its end.
fn windows(true_length: usize, width: usize) -> usize {
    match true_length {
        0 => 0,
        t if t < width => 1,
        t => t - width + 1,
    }
}

fn conv_forward<T: Scalar>(c: &Conv<T>, emb: &Tensor<T>, seq: &SequenceSample) -> ConvCache<T> {
    let d = emb.cols();
    let filters = c.b.len();
    let t = seq.true_length;
    let n = windows(t, c.width);
    let mut best = vec![None; filters];
    let mut pooled = vec![T::zero(); filters];
    let mut max_z = vec![T::neg_infinity(); filters];
    for s in 0..n {
        for f in 0..filters {
            let row = c.w.row(f);
            let mut z = c.b.data[f];
            for o in 0..c.width {
                let pos = s + o;
                if pos >= t {
                    break;
                }
                let e = emb.row(seq.indices[pos] as usize);
                for j in 0..d {
                    z += row[o * d + j] * e[j];
                }
            }
            if z > max_z[f] {
                max_z[f] = z;
                if z > T::zero() {
                    best[f] = Some(s);
                    pooled[f] = z;
                }
            }
        }
    }
    ConvCache { best, pooled }
}

struct AttCache<T> {
    hs: Vec<Vec<T>>,
    u: Vec<Vec<T>>,
    alpha: Vec<T>,
}

fn attention_forward<T: Scalar>(a: &Attention<T>, hs: Vec<Vec<T>>) -> (Vec<T>, AttCache<T>) {
    let dim = hs.first().map_or(0, Vec::len);
    let mut u = Vec::with_capacity(hs.len());
    let mut scores = Vec::with_capacity(hs.len());
    for h in &hs {
        let mut pre = a.b.data.clone();
        matvec(&a.w, h, &mut pre);
        let ut: Vec<T> = pre.into_iter().map(|v| v.tanh()).collect();
        scores.push(ut.iter().zip(&a.v.data).map(|(x, y)| *x * *y).sum());
        u.push(ut);
    }
    let alpha = if hs.is_empty() { Vec::new() } else { softmax(&scores) };
    let mut ctx = vec![T::zero(); dim];
    for (h, &w) in hs.iter().zip(&alpha) {
        for (c, v) in ctx.iter_mut().zip(h) {
            *c += w * *v;
        }
    }
    (ctx, AttCache { hs, u, alpha })
}

struct SampleCache<T> {
    feat: Vec<T>,
    probs: Vec<T>,
    convs: Vec<ConvCache<T>>,
    fwd: Vec<Step<T>>,
    bwd: Vec<Step<T>>,
    att: Option<AttCache<T>>,
}

fn sample_forward<T: Scalar>(p: &NetworkParams<T>, seq: &SequenceSample) -> SampleCache<T> {
    let t = seq.true_length;
    let mut cache = SampleCache {
        feat: Vec::new(),
        probs: Vec::new(),
        convs: Vec::new(),
        fwd: Vec::new(),
        bwd: Vec::new(),
        att: None,
    };
    match p.arch {
        Arch::Cnn1d => {
            for c in &p.convs {
                let cc = conv_forward(c, &p.embedding, seq);
                cache.feat.extend(cc.pooled.iter().copied());
                cache.convs.push(cc);
            }
        }
        Arch::Lstm => {
            let l = p.forward_lstm.as_ref().expect("validated");
            cache.fwd = lstm_forward(l, &p.embedding, seq, 0..t);
            cache.feat = cache.fwd.last().map_or_else(|| vec![T::zero(); l.hidden()], |s| s.h.clone());
        }
        Arch::Bilstm | Arch::BilstmAttention => {
            let lf = p.forward_lstm.as_ref().expect("validated");
            let lb = p.backward_lstm.as_ref().expect("validated");
            let h = lf.hidden();
            cache.fwd = lstm_forward(lf, &p.embedding, seq, 0..t);
            cache.bwd = lstm_forward(lb, &p.embedding, seq, (0..t).rev());
            if let Some(a) = &p.attention {
                // backward step s covers position t - 1 - s
                let hs: Vec<Vec<T>> = (0..t)
                    .map(|pos| {
                        let mut v = cache.fwd[pos].h.clone();
                        v.extend_from_slice(&cache.bwd[t - 1 - pos].h);
                        v
                    })
                    .collect();
                let (ctx, att) = attention_forward(a, hs);
                cache.feat = if t == 0 { vec![T::zero(); 2 * h] } else { ctx };
                cache.att = Some(att);
            } else {
                let zero = vec![T::zero(); h];
                cache.feat = cache.fwd.last().map_or_else(|| zero.clone(), |s| s.h.clone());
                cache.feat.extend_from_slice(&cache.bwd.last().map_or(zero, |s| s.h.clone()));
            }
        }
    }
    let mut logits = p.dense_b.data.clone();
    matvec(&p.dense_w, &cache.feat, &mut logits);
    cache.probs = softmax(&logits);
    cache
}

fn check_batch<T: Scalar>(p: &NetworkParams<T>, batch: &[SequenceSample]) -> Result<(), NeuralError> {
    p.validate()?;
    if batch.is_empty() {
        return Err(NeuralError::EmptyBatch);
    }
    let rows = p.embedding.shape[0];
    for s in batch {
        if s.true_length > s.indices.len() {
            return Err(NeuralError::BadSequence("true_length exceeds sequence length".into()));
        }
        if let Some(&i) = s.indices.iter().find(|&&i| i as usize >= rows) {
            return Err(NeuralError::BadSequence(format!("index {i} outside embedding with {rows} rows")));
        }
    }
    Ok(())
}

/// Class probabilities, one row per sample.
pub fn forward<T: Scalar>(p: &NetworkParams<T>, batch: &[SequenceSample]) -> Result<Vec<Vec<T>>, NeuralError> {
    check_batch(p, batch)?;
    Ok(batch.iter().map(|s| sample_forward(p, s).probs).collect())
}

/// Attention weights over all `L` positions (zero past `true_length`), or
/// `None` for architectures without attention.
pub fn attention_weights<T: Scalar>(p: &NetworkParams<T>, seq: &SequenceSample) -> Result<Option<Vec<T>>, NeuralError> {
    check_batch(p, std::slice::from_ref(seq))?;
    let cache = sample_forward(p, seq);
    Ok(cache.att.map(|a| {
        let mut w = vec![T::zero(); seq.indices.len()];
        w[..a.alpha.len()].copy_from_slice(&a.alpha);
        w
    }))
}

/// Mean cross-entropy over the batch and its gradient for every tensor.
/// The embedding gradient is filled only when `train_embedding`, and never
/// for the padding row.
pub fn backward<T: Scalar>(
    p: &NetworkParams<T>,
    batch: &[SequenceSample],
    targets: &[usize],
    train_embedding: bool,
) -> Result<(T, NetworkParams<T>), NeuralError> {
    check_batch(p, batch)?;
    if targets.len() != batch.len() {
        return Err(NeuralError::BadSequence(format!("{} targets for {} samples", targets.len(), batch.len())));
    }
    if let Some(&k) = targets.iter().find(|&&k| k >= p.n_classes()) {
        return Err(NeuralError::BadSequence(format!("target class {k} out of range")));
    }
    let mut g = p.zeros_like();
    let scale = T::one() / T::of(batch.len() as f64);
    let mut loss = T::zero();
    for (seq, &y) in batch.iter().zip(targets) {
        let cache = sample_forward(p, seq);
        loss += -(cache.probs[y].max(T::min_positive_value())).ln() * scale;
        sample_backward(p, seq, y, &cache, scale, train_embedding, &mut g);
    }
    Ok((loss, g))
}

fn sample_backward<T: Scalar>(
    p: &NetworkParams<T>,
    seq: &SequenceSample,
    y: usize,
    cache: &SampleCache<T>,
    scale: T,
    train_embedding: bool,
    g: &mut NetworkParams<T>,
) {
    let mut dlogits: Vec<T> = cache.probs.iter().map(|&v| v * scale).collect();
    dlogits[y] -= scale;
    outer_add(&mut g.dense_w, &dlogits, &cache.feat);
    add_into(&mut g.dense_b.data, &dlogits);
    let mut dfeat = vec![T::zero(); cache.feat.len()];
    matvec_t(&p.dense_w, &dlogits, &mut dfeat);

    let d = p.embedding_dim();
    let t = seq.true_length;
    let mut demb = if train_embedding { Some(&mut g.embedding) } else { None };
    match p.arch {
        Arch::Cnn1d => {
            let mut offset = 0;
            for ((c, cc), gc) in p.convs.iter().zip(&cache.convs).zip(g.convs.iter_mut()) {
                for (f, best) in cc.best.iter().enumerate() {
                    let dz = dfeat[offset + f];
                    let Some(s) = *best else { continue };
                    gc.b.data[f] += dz;
                    let cols = gc.w.cols();
                    for o in 0..c.width {
                        let pos = s + o;
                        if pos >= t {
                            break;
                        }
                        let row = seq.indices[pos] as usize;
                        let e = p.embedding.row(row);
                        for j in 0..d {
                            gc.w.data[f * cols + o * d + j] += dz * e[j];
                        }
                        if let Some(demb) = demb.as_deref_mut() {
                            if row != 0 {
                                let wrow = c.w.row(f);
                                for j in 0..d {
                                    demb.data[row * d + j] += dz * wrow[o * d + j];
                                }
                            }
                        }
                    }
                }
                offset += c.b.len();
            }
        }
        Arch::Lstm => {
            if t > 0 {
                let l = p.forward_lstm.as_ref().expect("validated");
                let mut ext = vec![vec![T::zero(); l.hidden()]; t];
                ext[t - 1] = dfeat;
                lstm_backward(l, &cache.fwd, &ext, g.forward_lstm.as_mut().expect("same shape"), seq, demb);
            }
        }
        Arch::Bilstm | Arch::BilstmAttention => {
            if t == 0 {
                return;
            }
            let lf = p.forward_lstm.as_ref().expect("validated");
            let lb = p.backward_lstm.as_ref().expect("validated");
            let h = lf.hidden();
            let mut ext_f = vec![vec![T::zero(); h]; t];
            let mut ext_b = vec![vec![T::zero(); h]; t];
            match (&p.attention, &cache.att) {
                (Some(a), Some(att)) => {
                    let ga = g.attention.as_mut().expect("same shape");
                    let dalpha: Vec<T> = att.hs.iter().map(|hv| hv.iter().zip(&dfeat).map(|(x, y)| *x * *y).sum()).collect();
                    let mean: T = att.alpha.iter().zip(&dalpha).map(|(x, y)| *x * *y).sum();
                    for pos in 0..t {
                        let ds = att.alpha[pos] * (dalpha[pos] - mean);
                        let mut dh: Vec<T> = dfeat.iter().map(|&v| v * att.alpha[pos]).collect();
                        add_into(&mut ga.v.data, &att.u[pos].iter().map(|&u| u * ds).collect::<Vec<_>>());
                        let dpre: Vec<T> = att.u[pos]
                            .iter()
                            .zip(&a.v.data)
                            .map(|(&u, &v)| ds * v * (T::one() - u * u))
                            .collect();
                        outer_add(&mut ga.w, &dpre, &att.hs[pos]);
                        add_into(&mut ga.b.data, &dpre);
                        matvec_t(&a.w, &dpre, &mut dh);
                        ext_f[pos] = dh[..h].to_vec();
                        ext_b[t - 1 - pos] = dh[h..].to_vec();
                    }
                }
                _ => {
                    ext_f[t - 1] = dfeat[..h].to_vec();
                    ext_b[t - 1] = dfeat[h..].to_vec();
                }
            }
            lstm_backward(lf, &cache.fwd, &ext_f, g.forward_lstm.as_mut().expect("same shape"), seq, demb.as_deref_mut());
            lstm_backward(lb, &cache.bwd, &ext_b, g.backward_lstm.as_mut().expect("same shape"), seq, demb);
        }
    }
}
