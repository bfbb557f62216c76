//! Small numeric helpers shared by the policy network and the slot mapper.

use rand::Rng;

#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(len: usize) -> Adam {
        Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn moments(&self) -> (&[f64], &[f64]) {
        (&self.m, &self.v)
    }

    pub(crate) fn restore(&mut self, m: Vec<f64>, v: Vec<f64>, t: u64) {
        assert_eq!(m.len(), self.m.len());
        assert_eq!(v.len(), self.v.len());
        self.m = m;
        self.v = v;
        self.t = t;
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64], lr: f64) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grads.len(), self.m.len());
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
pub fn relu(x: f64) -> f64 {
    x.max(0.0)
}

/// Fills `w` with `U(-sqrt(6 / fan_in), sqrt(6 / fan_in))`.
pub fn he_uniform<R: Rng + ?Sized>(rng: &mut R, w: &mut [f64], fan_in: usize) {
    let limit = (6.0 / fan_in as f64).sqrt();
    for x in w {
        *x = rng.gen_range(-limit..limit);
    }
}

/// `out[o] += sum_i input[i] * w[i * out.len() + o]`, skipping zero inputs.
/// Weights are stored input-major.
#[inline]
pub fn accumulate_affine(out: &mut [f64], w: &[f64], input: &[f64]) {
    let n_out = out.len();
    for (i, &x) in input.iter().enumerate() {
        if x != 0.0 {
            let row = &w[i * n_out..(i + 1) * n_out];
            for (o, &wv) in out.iter_mut().zip(row) {
                *o += x * wv;
            }
        }
    }
}

/// Backward of [`accumulate_affine`]: `dw += input ⊗ dout` and, when given,
/// `dinput[i] += sum_o w[i, o] dout[o]`.
#[inline]
pub fn backprop_affine(
    dw: &mut [f64],
    w: &[f64],
    input: &[f64],
    dout: &[f64],
    mut dinput: Option<&mut [f64]>,
) {
    let n_out = dout.len();
    for (i, &x) in input.iter().enumerate() {
        let base = i * n_out;
        if x != 0.0 {
            for (g, &d) in dw[base..base + n_out].iter_mut().zip(dout) {
                *g += x * d;
            }
        }
        if let Some(di) = dinput.as_deref_mut() {
            let row = &w[base..base + n_out];
            di[i] += row.iter().zip(dout).map(|(a, b)| a * b).sum::<f64>();
        }
    }
}
