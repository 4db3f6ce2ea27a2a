use rayon::prelude::*;

use super::model::{Conv, Trace};
use super::{ForecastError, TcnModel};
use crate::Scalar;

/// Samples per parallel work unit; partial sums are reduced in chunk order
/// so results do not depend on the thread count.
const CHUNK: usize = 8;

/// Mean squared error over the batch and all output channels, with its
/// exact gradient (returned as a model-shaped tensor set).
pub fn loss_and_grads<T: Scalar>(
    model: &TcnModel<T>,
    batch: &[(&[T], &[T])],
) -> Result<(T, TcnModel<T>), ForecastError> {
    if batch.is_empty() {
        return Err(ForecastError::Shape("empty batch".into()));
    }
    let d = model.channels();
    let mut tails = Vec::with_capacity(batch.len());
    for (window, target) in batch {
        if target.len() != d {
            return Err(ForecastError::Shape(format!("target has {} values, expected {d}", target.len())));
        }
        tails.push((model.window_tail(window)?, *target));
    }
    let scale = T::one() / T::of_usize(batch.len() * d);

    let partials: Vec<(T, TcnModel<T>)> = tails
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut grads = TcnModel::zeros(&model.arch).expect("validated architecture");
            let mut sse = T::zero();
            for (tail, target) in chunk {
                let trace = model.forward_trace(tail);
                let mut dy = vec![T::zero(); d];
                for o in 0..d {
                    let err = trace.output[o] - target[o];
                    sse += err * err;
                    dy[o] = T::of(2.0) * err * scale;
                }
                backward(model, &trace, &dy, &mut grads);
            }
            (sse, grads)
        })
        .collect();

    let mut total = T::zero();
    let mut acc = TcnModel::zeros(&model.arch)?;
    let mut flat = acc.flat();
    for (sse, g) in partials {
        total += sse;
        for (a, v) in flat.iter_mut().zip(g.flat()) {
            *a += v;
        }
    }
    acc.set_flat(&flat)?;
    Ok((total * scale, acc))
}

fn backward<T: Scalar>(model: &TcnModel<T>, trace: &Trace<T>, dy: &[T], grads: &mut TcnModel<T>) {
    let steps = trace.steps;
    let h = model.arch.hidden_channels;
    let last = &trace.blocks.last().expect("at least one block").out[(steps - 1) * h..];

    let head = &model.head;
    let mut d_out = vec![T::zero(); steps * h];
    for o in 0..head.n_out {
        grads.head.bias[o] += dy[o];
        for c in 0..h {
            grads.head.weight[c * head.n_out + o] += dy[o] * last[c];
            d_out[(steps - 1) * h + c] += dy[o] * head.weight[c * head.n_out + o];
        }
    }

    for (b, block) in model.blocks.iter().enumerate().rev() {
        let bt = &trace.blocks[b];
        let gb = &mut grads.blocks[b];
        let c_in = block.conv1.c_in;

        let mut d_sum = d_out;
        for (g, &o) in d_sum.iter_mut().zip(&bt.out) {
            if o <= T::zero() {
                *g = T::zero();
            }
        }

        let mut d_in = vec![T::zero(); steps * c_in];
        match (&block.proj, &mut gb.proj) {
            (Some(p), Some(gp)) => {
                for t in 0..steps {
                    let x = &bt.input[t * c_in..(t + 1) * c_in];
                    for o in 0..h {
                        let g = d_sum[t * h + o];
                        if g == T::zero() {
                            continue;
                        }
                        gp.bias[o] += g;
                        for c in 0..c_in {
                            gp.weight[c * h + o] += g * x[c];
                            d_in[t * c_in + c] += g * p.weight[c * h + o];
                        }
                    }
                }
            }
            _ => {
                for (a, &g) in d_in.iter_mut().zip(&d_sum) {
                    *a += g;
                }
            }
        }

        let mut d_z2 = d_sum;
        for (g, &a) in d_z2.iter_mut().zip(&bt.h2) {
            if a <= T::zero() {
                *g = T::zero();
            }
        }
        let mut d_z1 = conv_backward(&block.conv2, &bt.h1, &d_z2, &mut gb.conv2, steps);
        for (g, &a) in d_z1.iter_mut().zip(&bt.h1) {
            if a <= T::zero() {
                *g = T::zero();
            }
        }
        let d_x = conv_backward(&block.conv1, &bt.input, &d_z1, &mut gb.conv1, steps);
        for (a, v) in d_in.iter_mut().zip(d_x) {
            *a += v;
        }
        d_out = d_in;
    }
}

/// Accumulates parameter gradients of a causal convolution and returns the
/// gradient with respect to its input.
fn conv_backward<T: Scalar>(conv: &Conv<T>, input: &[T], d_z: &[T], grad: &mut Conv<T>, steps: usize) -> Vec<T> {
    let (k, ci, co) = (conv.kernel, conv.c_in, conv.c_out);
    let mut d_input = vec![T::zero(); steps * ci];
    for t in 0..steps {
        for o in 0..co {
            let g = d_z[t * co + o];
            if g == T::zero() {
                continue;
            }
            grad.bias[o] += g;
            for j in 0..k {
                let back = (k - 1 - j) * conv.dilation;
                if back > t {
                    continue;
                }
                let src = t - back;
                for c in 0..ci {
                    let w = (j * ci + c) * co + o;
                    grad.weight[w] += g * input[src * ci + c];
                    d_input[src * ci + c] += g * conv.weight[w];
                }
            }
        }
    }
    d_input
}
