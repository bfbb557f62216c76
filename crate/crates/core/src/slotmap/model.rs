//! Recurrent multi-label slot classifier.
//!
//! Tokens are fed one-hot into an LSTM (optionally a second one reading the
//! sentence backwards). The final hidden state passes through a rectified
//! dense layer and then one output per slot. In the sigmoid mode every slot
//! has its own logit; in the paired-softmax mode every slot has an
//! (on, off) pair of logits normalized against each other.
//!
//! Parameters live in one flat vector:
//!
//! ```text
//! per direction: wx [vocab x 4H]  wh [H x 4H]  b [4H]     gate order i f g o
//! wd [dirs*H x D]  bd [D]  wo [D x U]  bo [U]             U = 40 or 80
//! ```

use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dataset::LabeledSample;
use super::metrics::{MicroCounter, Scores};
use super::vocab::Vocab;
use crate::calendar::{SlotMask, SLOT_COUNT};
use crate::checkpoint::Checkpoint;
use crate::error::{Error, Result};
use crate::gradcheck::{self, GradCheckReport};
use crate::nn::{accumulate_affine, backprop_affine, he_uniform, sigmoid, Adam};

pub const THRESHOLD: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputMode {
    Sigmoid,
    SoftmaxPairs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossMode {
    /// Binary cross-entropy of every output, summed.
    Separate,
    /// One squared-error loss over the whole output vector.
    Shared,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MapperConfig {
    pub hidden: usize,
    pub dense: usize,
    pub bidirectional: bool,
    pub output: OutputMode,
    pub loss: LossMode,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    /// Global gradient-norm clip; zero disables it.
    pub clip_norm: f64,
    /// Multiplier applied to the learning rate after every epoch.
    pub lr_decay: f64,
    /// L2 penalty on all parameters, added to the gradient only.
    pub weight_decay: f64,
}

impl Default for MapperConfig {
    fn default() -> Self {
        MapperConfig {
            hidden: 64,
            dense: 64,
            bidirectional: false,
            output: OutputMode::Sigmoid,
            loss: LossMode::Separate,
            learning_rate: 0.005,
            batch_size: 16,
            max_epochs: 60,
            patience: 5,
            clip_norm: 5.0,
            lr_decay: 1.0,
            weight_decay: 0.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Layout {
    vocab: usize,
    hidden: usize,
    dense: usize,
    dirs: usize,
    units: usize,
    pairs: bool,
    shared: bool,
}

#[derive(Clone, Copy, Debug)]
struct DirOffsets {
    wx: usize,
    wh: usize,
    b: usize,
}

impl Layout {
    fn new(vocab: usize, config: &MapperConfig) -> Layout {
        let pairs = config.output == OutputMode::SoftmaxPairs;
        Layout {
            vocab,
            hidden: config.hidden,
            dense: config.dense,
            dirs: if config.bidirectional { 2 } else { 1 },
            units: if pairs { 2 * SLOT_COUNT } else { SLOT_COUNT },
            pairs,
            shared: config.loss == LossMode::Shared,
        }
    }

    fn gates(&self) -> usize {
        4 * self.hidden
    }

    fn dir_len(&self) -> usize {
        (self.vocab + self.hidden + 1) * self.gates()
    }

    fn dir(&self, d: usize) -> DirOffsets {
        let base = d * self.dir_len();
        DirOffsets {
            wx: base,
            wh: base + self.vocab * self.gates(),
            b: base + (self.vocab + self.hidden) * self.gates(),
        }
    }

    fn feature(&self) -> usize {
        self.dirs * self.hidden
    }

    fn wd(&self) -> usize {
        self.dirs * self.dir_len()
    }

    fn bd(&self) -> usize {
        self.wd() + self.feature() * self.dense
    }

    fn wo(&self) -> usize {
        self.bd() + self.dense
    }

    fn bo(&self) -> usize {
        self.wo() + self.dense * self.units
    }

    fn len(&self) -> usize {
        self.bo() + self.units
    }
}

/// Activations of one LSTM direction over a sentence.
struct DirTrace {
    /// Activated gates (i, f, g, o) per step.
    gates: Vec<Vec<f64>>,
    cells: Vec<Vec<f64>>,
    hiddens: Vec<Vec<f64>>,
}

struct Trace {
    dirs: Vec<(Vec<usize>, DirTrace)>,
    feature: Vec<f64>,
    dense_pre: Vec<f64>,
    dense: Vec<f64>,
    /// One logit per slot (the on-minus-off difference in paired mode).
    logits: [f64; SLOT_COUNT],
}

fn run_direction(l: &Layout, p: &[f64], off: DirOffsets, tokens: &[usize]) -> DirTrace {
    let h = l.hidden;
    let g4 = l.gates();
    let wh = &p[off.wh..off.wh + h * g4];
    let bias = &p[off.b..off.b + g4];
    let mut trace = DirTrace {
        gates: Vec::with_capacity(tokens.len()),
        cells: Vec::with_capacity(tokens.len()),
        hiddens: Vec::with_capacity(tokens.len()),
    };
    let mut h_prev = vec![0.0; h];
    let mut c_prev = vec![0.0; h];
    for &tok in tokens {
        let row = &p[off.wx + tok * g4..off.wx + (tok + 1) * g4];
        let mut z: Vec<f64> = row.iter().zip(bias).map(|(a, b)| a + b).collect();
        accumulate_affine(&mut z, wh, &h_prev);
        for j in 0..h {
            z[j] = sigmoid(z[j]);
            z[h + j] = sigmoid(z[h + j]);
            z[2 * h + j] = z[2 * h + j].tanh();
            z[3 * h + j] = sigmoid(z[3 * h + j]);
        }
        let c: Vec<f64> = (0..h).map(|j| z[h + j] * c_prev[j] + z[j] * z[2 * h + j]).collect();
        let hn: Vec<f64> = (0..h).map(|j| z[3 * h + j] * c[j].tanh()).collect();
        trace.gates.push(z);
        trace.cells.push(c.clone());
        trace.hiddens.push(hn.clone());
        h_prev = hn;
        c_prev = c;
    }
    trace
}

fn forward(l: &Layout, p: &[f64], tokens: &[usize]) -> Trace {
    let mut dirs = Vec::with_capacity(l.dirs);
    let mut feature = Vec::with_capacity(l.feature());
    for d in 0..l.dirs {
        let order: Vec<usize> = if d == 0 {
            tokens.to_vec()
        } else {
            tokens.iter().rev().copied().collect()
        };
        let t = run_direction(l, p, l.dir(d), &order);
        match t.hiddens.last() {
            Some(last) => feature.extend_from_slice(last),
            None => feature.extend(std::iter::repeat(0.0).take(l.hidden)),
        }
        dirs.push((order, t));
    }
    let mut dense_pre = p[l.bd()..l.bd() + l.dense].to_vec();
    accumulate_affine(&mut dense_pre, &p[l.wd()..l.bd()], &feature);
    let dense: Vec<f64> = dense_pre.iter().map(|&x| x.max(0.0)).collect();
    let mut out = p[l.bo()..l.bo() + l.units].to_vec();
    accumulate_affine(&mut out, &p[l.wo()..l.bo()], &dense);
    let mut logits = [0.0; SLOT_COUNT];
    for (k, q) in logits.iter_mut().enumerate() {
        *q = if l.pairs { out[2 * k] - out[2 * k + 1] } else { out[k] };
    }
    Trace {
        dirs,
        feature,
        dense_pre,
        dense,
        logits,
    }
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Loss of one sample and its derivative with respect to each slot logit.
fn sample_loss(l: &Layout, logits: &[f64; SLOT_COUNT], label: SlotMask) -> (f64, [f64; SLOT_COUNT]) {
    let mut loss = 0.0;
    let mut dq = [0.0; SLOT_COUNT];
    for k in 0..SLOT_COUNT {
        let t = if label.contains(k) { 1.0 } else { 0.0 };
        let q = logits[k];
        let p = sigmoid(q);
        if l.shared {
            loss += (p - t) * (p - t) / SLOT_COUNT as f64;
            dq[k] = 2.0 * (p - t) * p * (1.0 - p) / SLOT_COUNT as f64;
        } else {
            loss += softplus(q) - t * q;
            dq[k] = p - t;
        }
    }
    (loss, dq)
}

fn backprop_direction(l: &Layout, p: &[f64], g: &mut [f64], off: DirOffsets, tokens: &[usize], t: &DirTrace, dh_last: &[f64]) {
    let h = l.hidden;
    let g4 = l.gates();
    let wh = &p[off.wh..off.wh + h * g4];
    let mut dh = dh_last.to_vec();
    let mut dc = vec![0.0; h];
    let zeros = vec![0.0; h];
    let mut dz = vec![0.0; g4];
    for step in (0..tokens.len()).rev() {
        let gates = &t.gates[step];
        let c = &t.cells[step];
        let c_prev = if step == 0 { &zeros } else { &t.cells[step - 1] };
        let h_prev = if step == 0 { &zeros } else { &t.hiddens[step - 1] };
        for j in 0..h {
            let (i, f, gg, o) = (gates[j], gates[h + j], gates[2 * h + j], gates[3 * h + j]);
            let tc = c[j].tanh();
            dc[j] += dh[j] * o * (1.0 - tc * tc);
            dz[j] = dc[j] * gg * i * (1.0 - i);
            dz[h + j] = dc[j] * c_prev[j] * f * (1.0 - f);
            dz[2 * h + j] = dc[j] * i * (1.0 - gg * gg);
            dz[3 * h + j] = dh[j] * tc * o * (1.0 - o);
            dc[j] *= f;
        }
        let tok = tokens[step];
        for (gw, d) in g[off.wx + tok * g4..off.wx + (tok + 1) * g4].iter_mut().zip(&dz) {
            *gw += d;
        }
        for (gb, d) in g[off.b..off.b + g4].iter_mut().zip(&dz) {
            *gb += d;
        }
        let mut dh_prev = vec![0.0; h];
        backprop_affine(&mut g[off.wh..off.wh + h * g4], wh, h_prev, &dz, Some(&mut dh_prev));
        dh = dh_prev;
    }
}

/// Mean loss over `batch`, adding its gradient into `grad` when given.
/// The returned pattern lists the on/off state of every dense unit.
fn batch_loss(l: &Layout, p: &[f64], batch: &[(Vec<usize>, SlotMask)], mut grad: Option<&mut [f64]>) -> (f64, Vec<bool>) {
    let n = batch.len().max(1) as f64;
    let mut total = 0.0;
    let mut pattern = Vec::new();
    for (tokens, label) in batch {
        let tr = forward(l, p, tokens);
        let (loss, dq) = sample_loss(l, &tr.logits, *label);
        total += loss;
        pattern.extend(tr.dense_pre.iter().map(|&x| x > 0.0));
        let Some(g) = grad.as_deref_mut() else { continue };
        let mut dout = vec![0.0; l.units];
        for k in 0..SLOT_COUNT {
            let d = dq[k] / n;
            if l.pairs {
                dout[2 * k] = d;
                dout[2 * k + 1] = -d;
            } else {
                dout[k] = d;
            }
        }
        for (gb, d) in g[l.bo()..l.bo() + l.units].iter_mut().zip(&dout) {
            *gb += d;
        }
        let mut ddense = vec![0.0; l.dense];
        backprop_affine(&mut g[l.wo()..l.bo()], &p[l.wo()..l.bo()], &tr.dense, &dout, Some(&mut ddense));
        for (dd, &pre) in ddense.iter_mut().zip(&tr.dense_pre) {
            if pre <= 0.0 {
                *dd = 0.0;
            }
        }
        for (gb, d) in g[l.bd()..l.bd() + l.dense].iter_mut().zip(&ddense) {
            *gb += d;
        }
        let mut dfeat = vec![0.0; l.feature()];
        backprop_affine(&mut g[l.wd()..l.bd()], &p[l.wd()..l.bd()], &tr.feature, &ddense, Some(&mut dfeat));
        for (d, (order, dt)) in tr.dirs.iter().enumerate() {
            let dh = &dfeat[d * l.hidden..(d + 1) * l.hidden];
            backprop_direction(l, p, g, l.dir(d), order, dt, dh);
        }
    }
    (total / n, pattern)
}

/// Per-epoch training record.
#[derive(Clone, Debug, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    pub validation: Scores,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MapperModel {
    vocab: Vocab,
    config: MapperConfig,
    layout: Layout,
    params: Vec<f64>,
}

fn encode_all(vocab: &Vocab, samples: &[LabeledSample]) -> Vec<(Vec<usize>, SlotMask)> {
    samples.iter().map(|s| (vocab.encode(&s.sentence), s.label)).collect()
}

impl MapperModel {
    pub fn init(vocab: Vocab, config: MapperConfig, seed: u64) -> MapperModel {
        let layout = Layout::new(vocab.len(), &config);
        let mut params = vec![0.0; layout.len()];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = layout.hidden;
        let limit = 1.0 / (h as f64).sqrt();
        for d in 0..layout.dirs {
            let off = layout.dir(d);
            for w in &mut params[off.wx..off.b] {
                *w = rng.gen_range(-limit..limit);
            }
            // forget gates start open
            for b in &mut params[off.b + h..off.b + 2 * h] {
                *b = 1.0;
            }
        }
        he_uniform(&mut rng, &mut params[layout.wd()..layout.bd()], layout.feature());
        let (wo, bo) = (layout.wo(), layout.bo());
        let glorot = (6.0 / (layout.dense + layout.units) as f64).sqrt();
        for w in &mut params[wo..bo] {
            *w = rng.gen_range(-glorot..glorot);
        }
        MapperModel {
            vocab,
            config,
            layout,
            params,
        }
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    pub fn config(&self) -> &MapperConfig {
        &self.config
    }

    pub fn parameters(&self) -> &[f64] {
        &self.params
    }

    pub fn parameters_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Per-slot probability that the sentence names the slot.
    pub fn probabilities(&self, sentence: &str) -> [f64; SLOT_COUNT] {
        let tr = forward(&self.layout, &self.params, &self.vocab.encode(sentence));
        tr.logits.map(sigmoid)
    }

    pub fn predict_slots(&self, sentence: &str) -> SlotMask {
        let mut m = SlotMask::empty();
        for (k, p) in self.probabilities(sentence).iter().enumerate() {
            if *p > THRESHOLD {
                m.insert(k);
            }
        }
        m
    }

    pub fn evaluate(&self, samples: &[LabeledSample]) -> Scores {
        let mut c = MicroCounter::default();
        for s in samples {
            c.add(self.predict_slots(&s.sentence), s.label);
        }
        c.scores()
    }

    pub fn loss_and_gradient(&self, samples: &[LabeledSample]) -> (f64, Vec<f64>) {
        let batch = encode_all(&self.vocab, samples);
        let mut grad = vec![0.0; self.params.len()];
        let (loss, _) = batch_loss(&self.layout, &self.params, &batch, Some(&mut grad));
        (loss, grad)
    }

    /// One Adam step on the mean loss of `samples`.
    pub fn train_step(&mut self, adam: &mut Adam, samples: &[LabeledSample]) -> Result<f64> {
        let batch = encode_all(&self.vocab, samples);
        self.step_encoded(adam, &batch, self.config.learning_rate)
    }

    fn step_encoded(&mut self, adam: &mut Adam, batch: &[(Vec<usize>, SlotMask)], lr: f64) -> Result<f64> {
        let mut grad = vec![0.0; self.params.len()];
        let (loss, _) = batch_loss(&self.layout, &self.params, batch, Some(&mut grad));
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Diverged(format!("slot mapper loss became {loss}")));
        }
        if self.config.weight_decay > 0.0 {
            for (g, p) in grad.iter_mut().zip(&self.params) {
                *g += self.config.weight_decay * p;
            }
        }
        if self.config.clip_norm > 0.0 {
            let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
            if norm > self.config.clip_norm {
                let s = self.config.clip_norm / norm;
                grad.iter_mut().for_each(|g| *g *= s);
            }
        }
        adam.step(&mut self.params, &grad, lr);
        Ok(loss)
    }

    /// Compares the backprop gradient with central differences on
    /// `samples` randomly chosen parameters.
    pub fn gradient_check(&self, batch: &[LabeledSample], samples: usize, seed: u64) -> GradCheckReport {
        let (_, grad) = self.loss_and_gradient(batch);
        self.gradient_check_against(batch, &grad, samples, seed)
    }

    pub fn gradient_check_against(
        &self,
        batch: &[LabeledSample],
        analytic: &[f64],
        samples: usize,
        seed: u64,
    ) -> GradCheckReport {
        let encoded = encode_all(&self.vocab, batch);
        let layout = self.layout;
        let mut probe = |p: &[f64]| batch_loss(&layout, p, &encoded, None);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        gradcheck::check_random(&self.params, analytic, &mut probe, samples, gradcheck::DEFAULT_STEP, &mut rng)
    }

    /// Random check restricted to [`active_parameters`](Self::active_parameters).
    pub fn gradient_check_active(&self, batch: &[LabeledSample], samples: usize, seed: u64) -> GradCheckReport {
        let (_, grad) = self.loss_and_gradient(batch);
        let encoded = encode_all(&self.vocab, batch);
        let layout = self.layout;
        let mut probe = |p: &[f64]| batch_loss(&layout, p, &encoded, None);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        gradcheck::check_random_among(
            &self.params,
            &grad,
            &mut probe,
            &self.active_parameters(batch),
            samples,
            gradcheck::DEFAULT_STEP,
            &mut rng,
        )
    }

    /// Parameter indices that any of `batch`'s tokens can influence; other
    /// vocabulary rows have an identically zero gradient.
    pub fn active_parameters(&self, batch: &[LabeledSample]) -> Vec<usize> {
        let l = self.layout;
        let g4 = l.gates();
        let mut used = vec![false; l.vocab];
        for s in batch {
            for t in self.vocab.encode(&s.sentence) {
                used[t] = true;
            }
        }
        let mut out = Vec::new();
        for d in 0..l.dirs {
            let off = l.dir(d);
            for (tok, _) in used.iter().enumerate().filter(|(_, u)| **u) {
                out.extend(off.wx + tok * g4..off.wx + (tok + 1) * g4);
            }
            out.extend(off.wh..off.b + g4);
        }
        out.extend(l.wd()..l.len());
        out
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let l = self.layout;
        let c = &self.config;
        let mut ck = Checkpoint::new("mapper");
        ck.set_meta("sizes", &[l.vocab, l.hidden, l.dense, l.units]);
        ck.set_meta("bidirectional", &[c.bidirectional]);
        ck.set_meta("output", &[format!("{:?}", c.output)]);
        ck.set_meta("loss", &[format!("{:?}", c.loss)]);
        ck.set_list("vocab", self.vocab.tokens());
        ck.set_array("params", &self.params);
        ck
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<MapperModel> {
        ck.expect_kind("mapper")?;
        let bad = |m: String| Error::Checkpoint(m);
        let sizes: Vec<usize> = ck.meta("sizes")?;
        let [vocab_len, hidden, dense, units] = sizes[..] else {
            return Err(bad(format!("bad layer sizes {sizes:?}")));
        };
        let bidirectional = ck.meta::<bool>("bidirectional")?.first().copied().unwrap_or(false);
        let output = match ck.meta::<String>("output")?.first().map(String::as_str) {
            Some("Sigmoid") => OutputMode::Sigmoid,
            Some("SoftmaxPairs") => OutputMode::SoftmaxPairs,
            other => return Err(bad(format!("unknown output mode {other:?}"))),
        };
        let loss = match ck.meta::<String>("loss")?.first().map(String::as_str) {
            Some("Separate") => LossMode::Separate,
            Some("Shared") => LossMode::Shared,
            other => return Err(bad(format!("unknown loss mode {other:?}"))),
        };
        let vocab = Vocab::from_tokens(ck.list("vocab")?.to_vec()).ok_or_else(|| bad("malformed vocabulary".into()))?;
        let config = MapperConfig {
            hidden,
            dense,
            bidirectional,
            output,
            loss,
            ..MapperConfig::default()
        };
        let layout = Layout::new(vocab.len(), &config);
        if vocab.len() != vocab_len || layout.units != units {
            return Err(bad("layer sizes disagree with vocabulary or output mode".into()));
        }
        let params = ck.array("params")?.to_vec();
        if params.len() != layout.len() {
            return Err(bad(format!("`params` has {} values, expected {}", params.len(), layout.len())));
        }
        Ok(MapperModel {
            vocab,
            config,
            layout,
            params,
        })
    }

    pub fn save<W: Write>(&self, out: W) -> Result<()> {
        self.to_checkpoint().write(out)
    }

    pub fn load<R: BufRead>(input: R) -> Result<MapperModel> {
        MapperModel::from_checkpoint(&Checkpoint::read(input)?)
    }
}

#[derive(Clone, Debug)]
pub struct TrainedMapper {
    pub model: MapperModel,
    pub history: Vec<EpochMetrics>,
    pub best_epoch: usize,
}

/// Trains on `train` with mini-batch Adam, keeping the parameters of the
/// epoch with the best validation micro-F1 and stopping after `patience`
/// epochs without improvement once the F1 has left zero.
pub fn train_mapper(
    train: &[LabeledSample],
    validation: &[LabeledSample],
    config: &MapperConfig,
    seed: u64,
) -> Result<TrainedMapper> {
    if train.is_empty() || validation.is_empty() {
        return Err(Error::Config("slot mapper needs non-empty training and validation sets".into()));
    }
    if config.batch_size == 0 {
        return Err(Error::Config("batch_size must be positive".into()));
    }
    let vocab = Vocab::build(train.iter().map(|s| s.sentence.as_str()));
    let mut model = MapperModel::init(vocab, *config, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_5107);
    let mut adam = Adam::new(model.params.len());
    let encoded = encode_all(&model.vocab, train);
    let mut order: Vec<usize> = (0..encoded.len()).collect();
    let mut history = Vec::new();
    let mut best: Option<(f64, usize, Vec<f64>)> = None;
    let mut stale = 0;
    let mut lr = config.learning_rate;
    for epoch in 0..config.max_epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<(Vec<usize>, SlotMask)> = chunk.iter().map(|&i| encoded[i].clone()).collect();
            loss_sum += model.step_encoded(&mut adam, &batch, lr)? * chunk.len() as f64;
        }
        lr *= config.lr_decay;
        let validation_scores = model.evaluate(validation);
        history.push(EpochMetrics {
            epoch,
            train_loss: loss_sum / encoded.len() as f64,
            validation: validation_scores,
        });
        let f1 = validation_scores.f1;
        if best.as_ref().is_none_or(|(b, _, _)| f1 > *b) {
            best = Some((f1, epoch, model.params.clone()));
            stale = 0;
        } else if f1 > 0.0 {
            // the plateau before any output first crosses the threshold
            // is not counted
            stale += 1;
            if stale >= config.patience {
                break;
            }
        }
    }
    let (_, best_epoch, params) = best.expect("at least one epoch runs");
    model.params = params;
    Ok(TrainedMapper {
        model,
        history,
        best_epoch,
    })
}
