use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ForecastError, TcnArch};
use crate::Scalar;

/// Causal 1-D convolution. `weight` is laid out `[kernel][c_in][c_out]`;
/// tap `j` reads input step `t − (kernel − 1 − j)·dilation`, zero before 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conv<T> {
    pub c_in: usize,
    pub c_out: usize,
    pub kernel: usize,
    pub dilation: usize,
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

/// Affine map, `weight` laid out `[n_in][n_out]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense<T> {
    pub n_in: usize,
    pub n_out: usize,
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Block<T> {
    pub conv1: Conv<T>,
    pub conv2: Conv<T>,
    /// 1×1 projection on the skip path when input and hidden widths differ.
    pub proj: Option<Dense<T>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TcnModel<T> {
    pub arch: TcnArch,
    pub blocks: Vec<Block<T>>,
    pub head: Dense<T>,
}

#[inline]
fn relu<T: Scalar>(v: T) -> T {
    if v > T::zero() {
        v
    } else {
        T::zero()
    }
}

impl<T: Scalar> Conv<T> {
    fn zeros(c_in: usize, c_out: usize, kernel: usize, dilation: usize) -> Self {
        Self { c_in, c_out, kernel, dilation, weight: vec![T::zero(); c_out * kernel * c_in], bias: vec![T::zero(); c_out] }
    }

    /// Pre-activation output at step `t` of an input laid out `[steps][c_in]`.
    /// Zero inputs are skipped; they contribute nothing for finite weights.
    #[inline]
    pub(crate) fn apply_at(&self, input: &[T], t: usize, out: &mut [T]) {
        let (k, ci, co) = (self.kernel, self.c_in, self.c_out);
        let out = &mut out[..co];
        out.copy_from_slice(&self.bias);
        for j in 0..k {
            let back = (k - 1 - j) * self.dilation;
            if back > t {
                continue;
            }
            let src = &input[(t - back) * ci..(t - back + 1) * ci];
            for (c, &xv) in src.iter().enumerate() {
                if xv == T::zero() {
                    continue;
                }
                let w = &self.weight[(j * ci + c) * co..(j * ci + c + 1) * co];
                for (o, &wv) in out.iter_mut().zip(w) {
                    *o += xv * wv;
                }
            }
        }
    }
}

impl<T: Scalar> Dense<T> {
    fn zeros(n_in: usize, n_out: usize) -> Self {
        Self { n_in, n_out, weight: vec![T::zero(); n_out * n_in], bias: vec![T::zero(); n_out] }
    }

    #[inline]
    pub(crate) fn apply(&self, input: &[T], out: &mut [T]) {
        let out = &mut out[..self.n_out];
        out.copy_from_slice(&self.bias);
        for (c, &xv) in input[..self.n_in].iter().enumerate() {
            if xv == T::zero() {
                continue;
            }
            let w = &self.weight[c * self.n_out..(c + 1) * self.n_out];
            for (o, &wv) in out.iter_mut().zip(w) {
                *o += xv * wv;
            }
        }
    }
}

/// Activations of one block over the truncated window, kept for backprop.
pub(crate) struct BlockTrace<T> {
    pub input: Vec<T>,
    pub h1: Vec<T>,
    pub h2: Vec<T>,
    pub out: Vec<T>,
}

pub(crate) struct Trace<T> {
    pub steps: usize,
    pub blocks: Vec<BlockTrace<T>>,
    pub output: Vec<T>,
}

/// Positions each block must evaluate so that the last step is exact.
struct BlockPlan {
    h1: Vec<usize>,
    out: Vec<usize>,
}

impl<T: Scalar> TcnModel<T> {
    /// All weights and biases zero.
    pub fn zeros(arch: &TcnArch) -> Result<Self, ForecastError> {
        arch.validate()?;
        let (d, h, k) = (arch.input_channels, arch.hidden_channels, arch.kernel_size);
        let blocks = arch
            .dilations
            .iter()
            .enumerate()
            .map(|(b, &dil)| {
                let c_in = if b == 0 { d } else { h };
                Block {
                    conv1: Conv::zeros(c_in, h, k, dil),
                    conv2: Conv::zeros(h, h, k, dil),
                    proj: (c_in != h).then(|| Dense::zeros(c_in, h)),
                }
            })
            .collect();
        Ok(Self { arch: arch.clone(), blocks, head: Dense::zeros(h, d) })
    }

    /// Glorot-uniform kernels, zero biases; deterministic in `seed`.
    pub fn init(arch: &TcnArch, seed: u64) -> Result<Self, ForecastError> {
        let mut model = Self::zeros(arch)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut fill = |w: &mut Vec<T>, fan_in: usize, fan_out: usize| {
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for v in w.iter_mut() {
                *v = T::of(rng.random_range(-limit..limit));
            }
        };
        for block in &mut model.blocks {
            for conv in [&mut block.conv1, &mut block.conv2] {
                fill(&mut conv.weight, conv.c_in * conv.kernel, conv.c_out * conv.kernel);
            }
            if let Some(p) = &mut block.proj {
                fill(&mut p.weight, p.n_in, p.n_out);
            }
        }
        fill(&mut model.head.weight, model.head.n_in, model.head.n_out);
        Ok(model)
    }

    pub fn receptive_field(&self) -> usize {
        self.arch.receptive_field()
    }

    pub fn channels(&self) -> usize {
        self.arch.input_channels
    }

    /// Visits every tensor in persistence order: per block `conv1.weight`,
    /// `conv1.bias`, `conv2.weight`, `conv2.bias`, then `proj.weight`,
    /// `proj.bias` if present; finally `head.weight`, `head.bias`.
    pub fn for_each_tensor(&self, mut f: impl FnMut(String, Vec<usize>, &[T])) {
        for (b, block) in self.blocks.iter().enumerate() {
            for (name, conv) in [("conv1", &block.conv1), ("conv2", &block.conv2)] {
                f(format!("blocks.{b}.{name}.weight"), vec![conv.kernel, conv.c_in, conv.c_out], &conv.weight);
                f(format!("blocks.{b}.{name}.bias"), vec![conv.c_out], &conv.bias);
            }
            if let Some(p) = &block.proj {
                f(format!("blocks.{b}.proj.weight"), vec![p.n_in, p.n_out], &p.weight);
                f(format!("blocks.{b}.proj.bias"), vec![p.n_out], &p.bias);
            }
        }
        f("head.weight".into(), vec![self.head.n_in, self.head.n_out], &self.head.weight);
        f("head.bias".into(), vec![self.head.n_out], &self.head.bias);
    }

    fn tensors_mut(&mut self) -> Vec<&mut Vec<T>> {
        let mut out = Vec::new();
        for block in &mut self.blocks {
            out.push(&mut block.conv1.weight);
            out.push(&mut block.conv1.bias);
            out.push(&mut block.conv2.weight);
            out.push(&mut block.conv2.bias);
            if let Some(p) = &mut block.proj {
                out.push(&mut p.weight);
                out.push(&mut p.bias);
            }
        }
        out.push(&mut self.head.weight);
        out.push(&mut self.head.bias);
        out
    }

    pub fn param_count(&self) -> usize {
        let mut n = 0;
        self.for_each_tensor(|_, _, t| n += t.len());
        n
    }

    /// All parameters concatenated in persistence order.
    pub fn flat(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.param_count());
        self.for_each_tensor(|_, _, t| out.extend_from_slice(t));
        out
    }

    pub fn set_flat(&mut self, values: &[T]) -> Result<(), ForecastError> {
        if values.len() != self.param_count() {
            return Err(ForecastError::Shape(format!("{} values for {} parameters", values.len(), self.param_count())));
        }
        let mut at = 0;
        for t in self.tensors_mut() {
            let n = t.len();
            t.copy_from_slice(&values[at..at + n]);
            at += n;
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        let mut ok = true;
        self.for_each_tensor(|_, _, t| ok &= t.iter().all(|v| v.is_finite()));
        ok
    }

    /// Same model with every parameter converted to another scalar type.
    pub fn cast<U: Scalar>(&self) -> TcnModel<U> {
        let mut out = TcnModel::<U>::zeros(&self.arch).expect("architecture already validated");
        let flat: Vec<U> = self.flat().into_iter().map(|v| U::of(v.as_f64())).collect();
        out.set_flat(&flat).expect("same architecture");
        out
    }

    /// Checks a `rows × channels` window and returns its last
    /// receptive-field rows.
    pub(crate) fn window_tail<'a>(&self, window: &'a [T]) -> Result<&'a [T], ForecastError> {
        let d = self.channels();
        if window.len() % d != 0 {
            return Err(ForecastError::Shape(format!("window length {} is not a multiple of {d}", window.len())));
        }
        let rows = window.len() / d;
        let need = self.receptive_field();
        if rows < need {
            return Err(ForecastError::WindowTooShort { got: rows, need });
        }
        Ok(&window[(rows - need) * d..])
    }

    /// Predicts the row following `window` (`rows × channels`, row-major).
    ///
    /// Only the last receptive-field rows are read; the result is exactly
    /// what the full zero-padded network would produce at the final step.
    pub fn forward(&self, window: &[T]) -> Result<Vec<T>, ForecastError> {
        let tail = self.window_tail(window)?;
        Ok(self.predict_tail(tail))
    }

    /// Forward pass over a validated tail, evaluating only the positions
    /// that feed the final step.
    pub(crate) fn predict_tail(&self, x: &[T]) -> Vec<T> {
        let steps = x.len() / self.channels();
        let plan = self.plan(steps);
        let h = self.arch.hidden_channels;
        let mut input: Vec<T> = x.to_vec();
        let mut h1 = vec![T::zero(); steps * h];
        let mut tmp = vec![T::zero(); h];
        let mut res = vec![T::zero(); h];
        for (block, bp) in self.blocks.iter().zip(&plan) {
            let c_in = block.conv1.c_in;
            for &t in &bp.h1 {
                let slot = &mut h1[t * h..(t + 1) * h];
                block.conv1.apply_at(&input, t, slot);
                slot.iter_mut().for_each(|v| *v = relu(*v));
            }
            let mut out = vec![T::zero(); steps * h];
            for &t in &bp.out {
                block.conv2.apply_at(&h1, t, &mut tmp);
                let skip = &input[t * c_in..(t + 1) * c_in];
                match &block.proj {
                    Some(p) => p.apply(skip, &mut res),
                    None => res.copy_from_slice(skip),
                }
                for o in 0..h {
                    out[t * h + o] = relu(relu(tmp[o]) + res[o]);
                }
            }
            input = out;
        }
        let mut y = vec![T::zero(); self.head.n_out];
        self.head.apply(&input[(steps - 1) * h..], &mut y);
        y
    }

    fn plan(&self, steps: usize) -> Vec<BlockPlan> {
        let k = self.arch.kernel_size;
        let mut need_out = vec![false; steps];
        need_out[steps - 1] = true;
        let mut plans = Vec::with_capacity(self.blocks.len());
        let spread = |need: &[bool], dil: usize| {
            let mut src = vec![false; steps];
            for t in (0..steps).filter(|&t| need[t]) {
                for j in 0..k {
                    let back = (k - 1 - j) * dil;
                    if back <= t {
                        src[t - back] = true;
                    }
                }
            }
            src
        };
        for block in self.blocks.iter().rev() {
            let dil = block.conv1.dilation;
            let need_h1 = spread(&need_out, dil);
            let mut need_in = spread(&need_h1, dil);
            for (n, &o) in need_in.iter_mut().zip(&need_out) {
                *n |= o;
            }
            let positions = |m: &[bool]| (0..steps).filter(|&t| m[t]).collect::<Vec<_>>();
            plans.push(BlockPlan { h1: positions(&need_h1), out: positions(&need_out) });
            need_out = need_in;
        }
        plans.reverse();
        plans
    }

    /// Full forward pass over every step of a validated tail, keeping
    /// activations for backpropagation.
    pub(crate) fn forward_trace(&self, x: &[T]) -> Trace<T> {
        let steps = x.len() / self.channels();
        let h = self.arch.hidden_channels;
        let mut input = x.to_vec();
        let mut traces = Vec::with_capacity(self.blocks.len());
        let mut tmp = vec![T::zero(); h];
        let mut res = vec![T::zero(); h];
        for block in &self.blocks {
            let c_in = block.conv1.c_in;
            let mut h1 = vec![T::zero(); steps * h];
            for t in 0..steps {
                let slot = &mut h1[t * h..(t + 1) * h];
                block.conv1.apply_at(&input, t, slot);
                slot.iter_mut().for_each(|v| *v = relu(*v));
            }
            let mut h2 = vec![T::zero(); steps * h];
            let mut out = vec![T::zero(); steps * h];
            for t in 0..steps {
                block.conv2.apply_at(&h1, t, &mut tmp);
                let skip = &input[t * c_in..(t + 1) * c_in];
                match &block.proj {
                    Some(p) => p.apply(skip, &mut res),
                    None => res.copy_from_slice(skip),
                }
                for o in 0..h {
                    let a = relu(tmp[o]);
                    h2[t * h + o] = a;
                    out[t * h + o] = relu(a + res[o]);
                }
            }
            let next = out.clone();
            traces.push(BlockTrace { input, h1, h2, out });
            input = next;
        }
        let mut output = vec![T::zero(); self.head.n_out];
        self.head.apply(&input[(steps - 1) * h..], &mut output);
        Trace { steps, blocks: traces, output }
    }
}
