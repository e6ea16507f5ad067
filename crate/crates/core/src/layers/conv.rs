use super::{expect_shape, Initializer};
use crate::error::{Error, Result};
use crate::scalar::{axpy, dot};
use crate::tensor::Tensor;
use crate::Scalar;

/// 1D convolution over a `[channels × time]` signal with symmetric zero
/// padding.
#[derive(Clone, Debug, PartialEq)]
pub struct Conv1dParams<T> {
    /// `[out_channels × in_channels × kernel]`
    pub weights: Tensor<T>,
    /// `[out_channels]`
    pub bias: Tensor<T>,
    pub stride: usize,
    pub padding: usize,
}

impl<T: Scalar> Conv1dParams<T> {
    pub fn new(
        weights: Tensor<T>,
        bias: Tensor<T>,
        stride: usize,
        padding: usize,
    ) -> Result<Self> {
        let &[c_out, _, k] = weights.shape() else {
            return Err(Error::dim(format!(
                "conv weights must be rank 3, got {:?}",
                weights.shape()
            )));
        };
        if k == 0 || stride == 0 {
            return Err(Error::Config("conv kernel and stride must be ≥ 1".into()));
        }
        expect_shape("conv bias", &bias, &[c_out])?;
        Ok(Conv1dParams {
            weights,
            bias,
            stride,
            padding,
        })
    }

    pub fn init(
        init: &mut Initializer,
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
    ) -> Result<Self> {
        let weights = init.weights(&[out_channels, in_channels, kernel], in_channels * kernel)?;
        let bias = init.zeros(&[out_channels])?;
        Self::new(weights, bias, stride, padding)
    }

    pub fn out_channels(&self) -> usize {
        self.weights.shape()[0]
    }

    pub fn in_channels(&self) -> usize {
        self.weights.shape()[1]
    }

    pub fn kernel(&self) -> usize {
        self.weights.shape()[2]
    }

    /// Output length for an input of `t` samples, or `None` if the padded
    /// input is shorter than the kernel.
    pub fn output_len(&self, t: usize) -> Option<usize> {
        let padded = t + 2 * self.padding;
        (padded >= self.kernel()).then(|| (padded - self.kernel()) / self.stride + 1)
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}

#[derive(Clone, Debug)]
pub struct Conv1dCache<T> {
    x_padded: Vec<T>,
    t_in: usize,
    t_out: usize,
}

#[derive(Clone, Debug)]
pub struct Conv1dGrads<T> {
    pub x: Tensor<T>,
    pub weights: Tensor<T>,
    pub bias: Tensor<T>,
}

pub fn conv1d_forward<T: Scalar>(
    p: &Conv1dParams<T>,
    x: &Tensor<T>,
) -> Result<(Tensor<T>, Conv1dCache<T>)> {
    let (c_in, c_out, k, s) = (p.in_channels(), p.out_channels(), p.kernel(), p.stride);
    let &[xc, t_in] = x.shape() else {
        return Err(Error::dim(format!(
            "conv input must be [channels × time], got {:?}",
            x.shape()
        )));
    };
    if xc != c_in {
        return Err(Error::dim(format!(
            "conv expects {c_in} input channels, got {xc}"
        )));
    }
    let t_out = p.output_len(t_in).ok_or_else(|| {
        Error::dim(format!(
            "window of {t_in} samples (padding {}) is shorter than kernel {k}",
            p.padding
        ))
    })?;
    let t_pad = t_in + 2 * p.padding;
    let mut x_padded = vec![T::zero(); c_in * t_pad];
    for c in 0..c_in {
        x_padded[c * t_pad + p.padding..c * t_pad + p.padding + t_in]
            .copy_from_slice(&x.data()[c * t_in..(c + 1) * t_in]);
    }

    let w = p.weights.data();
    let mut y = vec![T::zero(); c_out * t_out];
    let mut gathered = vec![T::zero(); t_out];
    for o in 0..c_out {
        let row = &mut y[o * t_out..(o + 1) * t_out];
        row.fill(p.bias.data()[o]);
        for c in 0..c_in {
            let xc = &x_padded[c * t_pad..(c + 1) * t_pad];
            for kk in 0..k {
                let wv = w[(o * c_in + c) * k + kk];
                if s == 1 {
                    axpy(wv, &xc[kk..kk + t_out], row);
                } else {
                    for (t, g) in gathered.iter_mut().enumerate() {
                        *g = xc[t * s + kk];
                    }
                    axpy(wv, &gathered, row);
                }
            }
        }
    }
    let cache = Conv1dCache {
        x_padded,
        t_in,
        t_out,
    };
    Ok((Tensor::new(vec![c_out, t_out], y)?, cache))
}

pub fn conv1d_backward<T: Scalar>(
    p: &Conv1dParams<T>,
    cache: &Conv1dCache<T>,
    grad_y: &Tensor<T>,
) -> Result<Conv1dGrads<T>> {
    let (c_in, c_out, k, s) = (p.in_channels(), p.out_channels(), p.kernel(), p.stride);
    let (t_in, t_out) = (cache.t_in, cache.t_out);
    expect_shape("conv grad_y", grad_y, &[c_out, t_out])?;
    let t_pad = t_in + 2 * p.padding;
    if cache.x_padded.len() != c_in * t_pad {
        return Err(Error::dim("conv cache does not match these parameters"));
    }
    let gy = grad_y.data();
    let w = p.weights.data();

    let grad_b: Vec<T> = (0..c_out)
        .map(|o| gy[o * t_out..(o + 1) * t_out].iter().copied().sum())
        .collect();

    let mut grad_w = vec![T::zero(); c_out * c_in * k];
    let mut grad_xp = vec![T::zero(); c_in * t_pad];
    let mut gathered = vec![T::zero(); t_out];
    for o in 0..c_out {
        let g = &gy[o * t_out..(o + 1) * t_out];
        for c in 0..c_in {
            let xc = &cache.x_padded[c * t_pad..(c + 1) * t_pad];
            let gxc = &mut grad_xp[c * t_pad..(c + 1) * t_pad];
            for kk in 0..k {
                let wi = (o * c_in + c) * k + kk;
                if s == 1 {
                    grad_w[wi] = dot(g, &xc[kk..kk + t_out]);
                    axpy(w[wi], g, &mut gxc[kk..kk + t_out]);
                } else {
                    for (t, v) in gathered.iter_mut().enumerate() {
                        *v = xc[t * s + kk];
                    }
                    grad_w[wi] = dot(g, &gathered);
                    for (t, &gv) in g.iter().enumerate() {
                        gxc[t * s + kk] += w[wi] * gv;
                    }
                }
            }
        }
    }
    let mut grad_x = Vec::with_capacity(c_in * t_in);
    for c in 0..c_in {
        grad_x.extend_from_slice(&grad_xp[c * t_pad + p.padding..c * t_pad + p.padding + t_in]);
    }
    Ok(Conv1dGrads {
        x: Tensor::new(vec![c_in, t_in], grad_x)?,
        weights: Tensor::new(vec![c_out, c_in, k], grad_w)?,
        bias: Tensor::new(vec![c_out], grad_b)?,
    })
}
