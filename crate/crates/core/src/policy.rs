//! The scheduling policy: a two-hidden-layer perceptron with a softmax over
//! {schedule, defer}, trained by reward-weighted log-likelihood (REINFORCE)
//! with Adam.

use std::io::{BufRead, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::checkpoint::Checkpoint;
use crate::env::Action;
use crate::error::{Error, Result};
use crate::gradcheck::{self, GradCheckReport};
use crate::nn::{accumulate_affine, backprop_affine, he_uniform, relu, Adam};
use crate::trainer::Experience;

pub const ACTIONS: usize = 2;

/// Probabilities are clipped to `[PROB_CLIP, 1 - PROB_CLIP]` inside the log.
pub const PROB_CLIP: f64 = 1e-8;

pub const DEFAULT_LEARNING_RATE: f64 = 1e-3;

/// Shrinks the initial output-layer weights.
pub const OUTPUT_INIT_SCALE: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LayerSizes {
    pub input: usize,
    pub hidden1: usize,
    pub hidden2: usize,
}

impl Default for LayerSizes {
    fn default() -> Self {
        LayerSizes {
            input: crate::trainer::STATE_LEN,
            hidden1: 128,
            hidden2: 32,
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct Offsets {
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
    w3: usize,
    b3: usize,
    end: usize,
}

impl LayerSizes {
    fn offsets(&self) -> Offsets {
        let w1 = 0;
        let b1 = w1 + self.input * self.hidden1;
        let w2 = b1 + self.hidden1;
        let b2 = w2 + self.hidden1 * self.hidden2;
        let w3 = b2 + self.hidden2;
        let b3 = w3 + self.hidden2 * ACTIONS;
        Offsets {
            w1,
            b1,
            w2,
            b2,
            w3,
            b3,
            end: b3 + ACTIONS,
        }
    }

    pub fn param_count(&self) -> usize {
        self.offsets().end
    }
}

/// Intermediate values of one forward pass.
struct Trace {
    pre1: Vec<f64>,
    h1: Vec<f64>,
    pre2: Vec<f64>,
    h2: Vec<f64>,
    probs: [f64; ACTIONS],
}

fn forward_trace(sizes: &LayerSizes, params: &[f64], state: &[f64]) -> Trace {
    let o = sizes.offsets();
    let mut pre1 = params[o.b1..o.w2].to_vec();
    accumulate_affine(&mut pre1, &params[o.w1..o.b1], state);
    let h1: Vec<f64> = pre1.iter().map(|&x| relu(x)).collect();
    let mut pre2 = params[o.b2..o.w3].to_vec();
    accumulate_affine(&mut pre2, &params[o.w2..o.b2], &h1);
    let h2: Vec<f64> = pre2.iter().map(|&x| relu(x)).collect();
    let mut logits = [params[o.b3], params[o.b3 + 1]];
    accumulate_affine(&mut logits, &params[o.w3..o.b3], &h2);
    Trace {
        pre1,
        h1,
        pre2,
        h2,
        probs: softmax2(logits),
    }
}

pub fn softmax2(logits: [f64; ACTIONS]) -> [f64; ACTIONS] {
    let m = logits[0].max(logits[1]);
    let e0 = (logits[0] - m).exp();
    let e1 = (logits[1] - m).exp();
    let s = e0 + e1;
    [e0 / s, e1 / s]
}

fn clipped(p: f64) -> bool {
    !(PROB_CLIP..=1.0 - PROB_CLIP).contains(&p)
}

/// `-r log clip(p_a)` summed over the batch, and its gradient (added into `grad`).
fn batch_loss<'a, I>(sizes: &LayerSizes, params: &[f64], batch: I, grad: Option<&mut [f64]>) -> f64
where
    I: IntoIterator<Item = &'a Experience>,
{
    let o = sizes.offsets();
    let mut grad = grad;
    let mut loss = 0.0;
    let mut dh1 = vec![0.0; sizes.hidden1];
    let mut dh2 = vec![0.0; sizes.hidden2];
    for exp in batch {
        if exp.reward == 0.0 {
            continue;
        }
        let t = forward_trace(sizes, params, &exp.state);
        let a = exp.action.index();
        let p = t.probs[a].clamp(PROB_CLIP, 1.0 - PROB_CLIP);
        loss -= exp.reward * p.ln();
        let Some(g) = grad.as_deref_mut() else {
            continue;
        };
        if clipped(t.probs[a]) {
            continue;
        }
        // d(-r log p_a)/dz_k = r (p_k - [k == a])
        let mut dz = [0.0; ACTIONS];
        for (k, d) in dz.iter_mut().enumerate() {
            *d = exp.reward * (t.probs[k] - if k == a { 1.0 } else { 0.0 });
        }
        g[o.b3] += dz[0];
        g[o.b3 + 1] += dz[1];
        dh2.fill(0.0);
        backprop_affine(&mut g[o.w3..o.b3], &params[o.w3..o.b3], &t.h2, &dz, Some(&mut dh2));
        for (d, &pre) in dh2.iter_mut().zip(&t.pre2) {
            if pre <= 0.0 {
                *d = 0.0;
            }
        }
        for (gb, &d) in g[o.b2..o.w3].iter_mut().zip(&dh2) {
            *gb += d;
        }
        dh1.fill(0.0);
        backprop_affine(&mut g[o.w2..o.b2], &params[o.w2..o.b2], &t.h1, &dh2, Some(&mut dh1));
        for (d, &pre) in dh1.iter_mut().zip(&t.pre1) {
            if pre <= 0.0 {
                *d = 0.0;
            }
        }
        for (gb, &d) in g[o.b1..o.w2].iter_mut().zip(&dh1) {
            *gb += d;
        }
        backprop_affine(&mut g[o.w1..o.b1], &params[o.w1..o.b1], &exp.state, &dh1, None);
    }
    loss
}

/// Loss plus the on/off pattern of every ReLU and of the probability clip.
fn loss_with_pattern(sizes: &LayerSizes, params: &[f64], batch: &[Experience]) -> (f64, Vec<bool>) {
    let mut pattern = Vec::new();
    for exp in batch {
        let t = forward_trace(sizes, params, &exp.state);
        pattern.extend(t.pre1.iter().map(|&x| x > 0.0));
        pattern.extend(t.pre2.iter().map(|&x| x > 0.0));
        pattern.push(clipped(t.probs[exp.action.index()]));
    }
    (batch_loss(sizes, params, batch, None), pattern)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PolicyParams {
    sizes: LayerSizes,
    params: Vec<f64>,
    adam: Adam,
}

impl PolicyParams {
    pub fn init(seed: u64) -> PolicyParams {
        PolicyParams::init_with(LayerSizes::default(), seed)
    }

    pub fn init_with(sizes: LayerSizes, seed: u64) -> PolicyParams {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let o = sizes.offsets();
        let mut params = vec![0.0; o.end];
        he_uniform(&mut rng, &mut params[o.w1..o.b1], sizes.input);
        he_uniform(&mut rng, &mut params[o.w2..o.b2], sizes.hidden1);
        he_uniform(&mut rng, &mut params[o.w3..o.b3], sizes.hidden2);
        // A small head starts every state near a coin flip. A full-scale one
        // can open with a strong bias towards deferring, and then no
        // timestep ever reaches its threshold to teach otherwise.
        params[o.w3..o.b3].iter_mut().for_each(|w| *w *= OUTPUT_INIT_SCALE);
        PolicyParams {
            sizes,
            adam: Adam::new(params.len()),
            params,
        }
    }

    /// Network with every weight and bias set to zero.
    pub fn zeros(sizes: LayerSizes) -> PolicyParams {
        let n = sizes.param_count();
        PolicyParams {
            sizes,
            params: vec![0.0; n],
            adam: Adam::new(n),
        }
    }

    pub fn sizes(&self) -> LayerSizes {
        self.sizes
    }

    pub fn parameters(&self) -> &[f64] {
        &self.params
    }

    pub fn parameters_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn adam(&self) -> &Adam {
        &self.adam
    }

    /// Weight from input unit `from` to unit `to` of layer `layer` (0-based).
    pub fn weight(&self, layer: usize, to: usize, from: usize) -> f64 {
        let o = self.sizes.offsets();
        let (base, n_out) = match layer {
            0 => (o.w1, self.sizes.hidden1),
            1 => (o.w2, self.sizes.hidden2),
            2 => (o.w3, ACTIONS),
            _ => panic!("layer {layer} out of range"),
        };
        self.params[base + from * n_out + to]
    }

    /// Logical `(rows, cols)` of each weight matrix, output-major.
    pub fn weight_shapes(&self) -> [(usize, usize); 3] {
        let s = self.sizes;
        [
            (s.hidden1, s.input),
            (s.hidden2, s.hidden1),
            (ACTIONS, s.hidden2),
        ]
    }

    /// `(p_schedule, p_defer)` for an encoded state.
    pub fn forward(&self, state: &[f64]) -> Result<[f64; ACTIONS]> {
        if state.len() != self.sizes.input {
            return Err(Error::Shape {
                expected: self.sizes.input,
                got: state.len(),
            });
        }
        Ok(forward_trace(&self.sizes, &self.params, state).probs)
    }

    pub fn probability(&self, state: &[f64], action: Action) -> f64 {
        forward_trace(&self.sizes, &self.params, state).probs[action.index()]
    }

    pub fn loss_and_gradient<'a, I>(&self, batch: I) -> (f64, Vec<f64>)
    where
        I: IntoIterator<Item = &'a Experience>,
    {
        let mut grad = vec![0.0; self.params.len()];
        let loss = batch_loss(&self.sizes, &self.params, batch, Some(&mut grad));
        (loss, grad)
    }

    /// One Adam step on `-sum r log pi(a|s)` over the batch. An empty batch
    /// (or one whose rewards are all zero) leaves the parameters untouched.
    pub fn reinforce_update<'a, I>(&mut self, batch: I, learning_rate: f64) -> Result<()>
    where
        I: IntoIterator<Item = &'a Experience>,
    {
        let mut grad = vec![0.0; self.params.len()];
        let mut used = 0usize;
        let counted = batch.into_iter().inspect(|e| {
            if e.reward != 0.0 {
                used += 1;
            }
        });
        let loss = batch_loss(&self.sizes, &self.params, counted, Some(&mut grad));
        if used == 0 {
            return Ok(());
        }
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Diverged(format!(
                "policy loss {loss} over {used} experiences produced a non-finite gradient"
            )));
        }
        self.adam.step(&mut self.params, &grad, learning_rate);
        Ok(())
    }

    /// Max relative error between backprop and central differences over
    /// `samples` random parameters.
    pub fn gradient_check(&self, batch: &[Experience], samples: usize, seed: u64) -> GradCheckReport {
        let (_, grad) = self.loss_and_gradient(batch);
        self.gradient_check_against(batch, &grad, samples, seed)
    }

    /// Same as [`gradient_check`](Self::gradient_check) but against a caller-supplied gradient.
    pub fn gradient_check_against(
        &self,
        batch: &[Experience],
        analytic: &[f64],
        samples: usize,
        seed: u64,
    ) -> GradCheckReport {
        let sizes = self.sizes;
        let mut probe = |p: &[f64]| loss_with_pattern(&sizes, p, batch);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        gradcheck::check_random(
            &self.params,
            analytic,
            &mut probe,
            samples,
            gradcheck::DEFAULT_STEP,
            &mut rng,
        )
    }

    /// Random check restricted to [`active_parameters`](Self::active_parameters).
    pub fn gradient_check_active(&self, batch: &[Experience], samples: usize, seed: u64) -> GradCheckReport {
        let (_, grad) = self.loss_and_gradient(batch);
        let sizes = self.sizes;
        let mut probe = |p: &[f64]| loss_with_pattern(&sizes, p, batch);
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

    /// Parameters `batch` can move: first-layer weights of inputs that are
    /// zero in every state have an identically zero gradient.
    pub fn active_parameters(&self, batch: &[Experience]) -> Vec<usize> {
        let o = self.sizes.offsets();
        let n = self.sizes.hidden1;
        let mut out = Vec::new();
        for i in 0..self.sizes.input {
            if batch.iter().any(|e| e.state.get(i).is_some_and(|x| *x != 0.0)) {
                out.extend(o.w1 + i * n..o.w1 + (i + 1) * n);
            }
        }
        out.extend(o.b1..o.end);
        out
    }

    pub fn gradient_check_indices(&self, batch: &[Experience], analytic: &[f64], indices: &[usize]) -> GradCheckReport {
        let sizes = self.sizes;
        let mut probe = |p: &[f64]| loss_with_pattern(&sizes, p, batch);
        gradcheck::check_indices(&self.params, analytic, &mut probe, indices, gradcheck::DEFAULT_STEP)
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut c = Checkpoint::new("policy");
        let s = self.sizes;
        c.set_meta("sizes", &[s.input, s.hidden1, s.hidden2, ACTIONS]);
        c.set_meta("adam_steps", &[self.adam.steps()]);
        c.set_array("params", &self.params);
        let (m, v) = self.adam.moments();
        c.set_array("adam_m", m);
        c.set_array("adam_v", v);
        c
    }

    pub fn from_checkpoint(c: &Checkpoint) -> Result<PolicyParams> {
        c.expect_kind("policy")?;
        let sizes: Vec<usize> = c.meta("sizes")?;
        if sizes.len() != 4 || sizes[3] != ACTIONS {
            return Err(Error::Checkpoint(format!("bad layer sizes {sizes:?}")));
        }
        let sizes = LayerSizes {
            input: sizes[0],
            hidden1: sizes[1],
            hidden2: sizes[2],
        };
        let n = sizes.param_count();
        let check = |name: &str, v: &[f64]| -> Result<Vec<f64>> {
            if v.len() != n {
                return Err(Error::Checkpoint(format!("`{name}` has {} values, expected {n}", v.len())));
            }
            Ok(v.to_vec())
        };
        let params = check("params", c.array("params")?)?;
        let mut adam = Adam::new(n);
        let steps: Vec<u64> = c.meta("adam_steps")?;
        adam.restore(
            check("adam_m", c.array("adam_m")?)?,
            check("adam_v", c.array("adam_v")?)?,
            steps.first().copied().unwrap_or(0),
        );
        Ok(PolicyParams { sizes, params, adam })
    }

    pub fn save<W: Write>(&self, out: W) -> Result<()> {
        self.to_checkpoint().write(out)
    }

    pub fn load<R: BufRead>(input: R) -> Result<PolicyParams> {
        PolicyParams::from_checkpoint(&Checkpoint::read(input)?)
    }
}
