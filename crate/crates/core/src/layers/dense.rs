use super::{expect_shape, Initializer};
use crate::error::{Error, Result};
use crate::scalar::{axpy, dot};
use crate::tensor::Tensor;
use crate::Scalar;

/// Fully connected layer, `y = W x + b`.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseParams<T> {
    /// `[out × in]`
    pub weights: Tensor<T>,
    /// `[out]`
    pub bias: Tensor<T>,
}

impl<T: Scalar> DenseParams<T> {
    pub fn new(weights: Tensor<T>, bias: Tensor<T>) -> Result<Self> {
        let &[o, _] = weights.shape() else {
            return Err(Error::dim(format!(
                "dense weights must be rank 2, got {:?}",
                weights.shape()
            )));
        };
        expect_shape("dense bias", &bias, &[o])?;
        Ok(DenseParams { weights, bias })
    }

    pub fn init(init: &mut Initializer, input: usize, output: usize) -> Result<Self> {
        Self::new(init.weights(&[output, input], input)?, init.zeros(&[output])?)
    }

    pub fn input(&self) -> usize {
        self.weights.shape()[1]
    }

    pub fn output(&self) -> usize {
        self.weights.shape()[0]
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}

#[derive(Clone, Debug)]
pub struct DenseCache<T> {
    x: Tensor<T>,
}

#[derive(Clone, Debug)]
pub struct DenseGrads<T> {
    pub x: Tensor<T>,
    pub weights: Tensor<T>,
    pub bias: Tensor<T>,
}

pub fn dense_forward<T: Scalar>(
    p: &DenseParams<T>,
    x: &Tensor<T>,
) -> Result<(Tensor<T>, DenseCache<T>)> {
    expect_shape("dense input", x, &[p.input()])?;
    let i = p.input();
    let y: Vec<T> = (0..p.output())
        .map(|o| p.bias.data()[o] + dot(&p.weights.data()[o * i..(o + 1) * i], x.data()))
        .collect();
    Ok((Tensor::from_vec(y)?, DenseCache { x: x.clone() }))
}

pub fn dense_backward<T: Scalar>(
    p: &DenseParams<T>,
    cache: &DenseCache<T>,
    grad_y: &Tensor<T>,
) -> Result<DenseGrads<T>> {
    expect_shape("dense grad_y", grad_y, &[p.output()])?;
    expect_shape("dense cache", &cache.x, &[p.input()])?;
    let i = p.input();
    let mut gw = vec![T::zero(); p.output() * i];
    let mut gx = vec![T::zero(); i];
    for (o, &g) in grad_y.data().iter().enumerate() {
        axpy(g, cache.x.data(), &mut gw[o * i..(o + 1) * i]);
        axpy(g, &p.weights.data()[o * i..(o + 1) * i], &mut gx);
    }
    Ok(DenseGrads {
        x: Tensor::from_vec(gx)?,
        weights: Tensor::new(vec![p.output(), i], gw)?,
        bias: grad_y.clone(),
    })
}
