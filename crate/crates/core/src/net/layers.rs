//! Batched dense and same-padded stride-1 convolution kernels.
//!
//! Activations are row-major `[batch, features]`; convolution features are
//! laid out `[channels, height, width]`. Weights are `[outputs, inputs]` and
//! `[out_channels, in_channels, kernel, kernel]`.

pub(crate) fn dense_forward(
    weights: &[f64],
    bias: Option<&[f64]>,
    scale: f64,
    input: &[f64],
    batch: usize,
    inputs: usize,
    outputs: usize,
) -> Vec<f64> {
    let mut out = vec![0.0; batch * outputs];
    for (x, row) in input.chunks_exact(inputs).zip(out.chunks_exact_mut(outputs)) {
        for (o, slot) in row.iter_mut().enumerate() {
            let w = &weights[o * inputs..(o + 1) * inputs];
            let dot: f64 = w.iter().zip(x).map(|(a, b)| a * b).sum();
            *slot = scale * dot + bias.map_or(0.0, |b| b[o]);
        }
    }
    debug_assert_eq!(out.len(), batch * outputs);
    out
}

/// Returns `(grad_input, grad_weights, grad_bias)`.
pub(crate) fn dense_backward(
    weights: &[f64],
    scale: f64,
    input: &[f64],
    grad_out: &[f64],
    inputs: usize,
    outputs: usize,
    need_input_grad: bool,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut grad_w = vec![0.0; weights.len()];
    let mut grad_b = vec![0.0; outputs];
    let mut grad_in = if need_input_grad {
        vec![0.0; input.len()]
    } else {
        Vec::new()
    };
    for (b, (x, dout)) in input
        .chunks_exact(inputs)
        .zip(grad_out.chunks_exact(outputs))
        .enumerate()
    {
        for (o, &d) in dout.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            grad_b[o] += d;
            let sd = scale * d;
            let gw = &mut grad_w[o * inputs..(o + 1) * inputs];
            for (g, &xi) in gw.iter_mut().zip(x) {
                *g += sd * xi;
            }
            if need_input_grad {
                let w = &weights[o * inputs..(o + 1) * inputs];
                let gi = &mut grad_in[b * inputs..(b + 1) * inputs];
                for (g, &wi) in gi.iter_mut().zip(w) {
                    *g += sd * wi;
                }
            }
        }
    }
    (grad_in, grad_w, grad_b)
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct ConvGeometry {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub height: usize,
    pub width: usize,
}

impl ConvGeometry {
    fn plane(&self) -> usize {
        self.height * self.width
    }

    /// Offset range of output coordinates for which `coord + k - radius` is
    /// inside `[0, extent)`.
    fn valid(extent: usize, k: usize, radius: usize) -> (usize, usize, isize) {
        let shift = k as isize - radius as isize;
        let lo = (-shift).max(0) as usize;
        let hi = (extent as isize - shift).min(extent as isize).max(0) as usize;
        (lo, hi, shift)
    }
}

pub(crate) fn conv_forward(
    weights: &[f64],
    bias: Option<&[f64]>,
    scale: f64,
    input: &[f64],
    batch: usize,
    g: ConvGeometry,
) -> Vec<f64> {
    let plane = g.plane();
    let k = g.kernel;
    let r = k / 2;
    let in_dim = g.in_channels * plane;
    let out_dim = g.out_channels * plane;
    let mut out = vec![0.0; batch * out_dim];
    for b in 0..batch {
        let x = &input[b * in_dim..(b + 1) * in_dim];
        let y = &mut out[b * out_dim..(b + 1) * out_dim];
        for oc in 0..g.out_channels {
            let acc = &mut y[oc * plane..(oc + 1) * plane];
            for ic in 0..g.in_channels {
                let src = &x[ic * plane..(ic + 1) * plane];
                for ky in 0..k {
                    let (ylo, yhi, dy) = ConvGeometry::valid(g.height, ky, r);
                    for kx in 0..k {
                        let w = weights[((oc * g.in_channels + ic) * k + ky) * k + kx];
                        if w == 0.0 {
                            continue;
                        }
                        let (xlo, xhi, dx) = ConvGeometry::valid(g.width, kx, r);
                        for row in ylo..yhi {
                            let srow = (row as isize + dy) as usize * g.width;
                            let drow = row * g.width;
                            for col in xlo..xhi {
                                acc[drow + col] += w * src[srow + (col as isize + dx) as usize];
                            }
                        }
                    }
                }
            }
            let b_oc = bias.map_or(0.0, |b| b[oc]);
            for v in acc.iter_mut() {
                *v = scale * *v + b_oc;
            }
        }
    }
    out
}

pub(crate) fn conv_backward(
    weights: &[f64],
    scale: f64,
    input: &[f64],
    grad_out: &[f64],
    batch: usize,
    g: ConvGeometry,
    need_input_grad: bool,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let plane = g.plane();
    let k = g.kernel;
    let r = k / 2;
    let in_dim = g.in_channels * plane;
    let out_dim = g.out_channels * plane;
    let mut grad_w = vec![0.0; weights.len()];
    let mut grad_b = vec![0.0; g.out_channels];
    let mut grad_in = if need_input_grad {
        vec![0.0; input.len()]
    } else {
        Vec::new()
    };
    for b in 0..batch {
        let x = &input[b * in_dim..(b + 1) * in_dim];
        let dy_all = &grad_out[b * out_dim..(b + 1) * out_dim];
        for oc in 0..g.out_channels {
            let d = &dy_all[oc * plane..(oc + 1) * plane];
            grad_b[oc] += d.iter().sum::<f64>();
            for ic in 0..g.in_channels {
                let src = &x[ic * plane..(ic + 1) * plane];
                for ky in 0..k {
                    let (ylo, yhi, dy) = ConvGeometry::valid(g.height, ky, r);
                    for kx in 0..k {
                        let widx = ((oc * g.in_channels + ic) * k + ky) * k + kx;
                        let (xlo, xhi, dx) = ConvGeometry::valid(g.width, kx, r);
                        let mut acc = 0.0;
                        for row in ylo..yhi {
                            let srow = (row as isize + dy) as usize * g.width;
                            let drow = row * g.width;
                            for col in xlo..xhi {
                                acc += d[drow + col] * src[srow + (col as isize + dx) as usize];
                            }
                        }
                        grad_w[widx] += scale * acc;
                        if need_input_grad {
                            let sw = scale * weights[widx];
                            let gi = &mut grad_in[b * in_dim + ic * plane..b * in_dim + (ic + 1) * plane];
                            for row in ylo..yhi {
                                let srow = (row as isize + dy) as usize * g.width;
                                let drow = row * g.width;
                                for col in xlo..xhi {
                                    gi[srow + (col as isize + dx) as usize] += sw * d[drow + col];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    (grad_in, grad_w, grad_b)
}
