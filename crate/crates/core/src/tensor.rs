//! Dense row-major n-dimensional array.

use std::fmt;

use crate::error::{Error, Result};
use crate::scalar::{relu, sigmoid, Scalar};

/// Row-major (last axis fastest) dense array with at least one axis and no
/// empty extents.
#[derive(Clone, PartialEq)]
pub struct Tensor<T> {
    shape: Vec<usize>,
    data: Vec<T>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EwOp {
    Add,
    Sub,
    Mul,
    Sigmoid,
    Tanh,
    Relu,
}

impl EwOp {
    pub fn is_binary(self) -> bool {
        matches!(self, EwOp::Add | EwOp::Sub | EwOp::Mul)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReduceOp {
    Sum,
    Mean,
    /// Index of the largest element; ties resolve to the lowest index.
    Argmax,
}

fn check_shape(shape: &[usize]) -> Result<usize> {
    if shape.is_empty() {
        return Err(Error::dim("tensor rank must be at least 1"));
    }
    if shape.contains(&0) {
        return Err(Error::dim(format!("zero extent in shape {shape:?}")));
    }
    Ok(shape.iter().product())
}

impl<T: Scalar> Tensor<T> {
    pub fn new(shape: Vec<usize>, data: Vec<T>) -> Result<Self> {
        let n = check_shape(&shape)?;
        if n != data.len() {
            return Err(Error::dim(format!(
                "shape {shape:?} needs {n} values, got {}",
                data.len()
            )));
        }
        Ok(Tensor { shape, data })
    }

    pub fn full(shape: &[usize], value: T) -> Result<Self> {
        let n = check_shape(shape)?;
        Ok(Tensor {
            shape: shape.to_vec(),
            data: vec![value; n],
        })
    }

    pub fn zeros(shape: &[usize]) -> Result<Self> {
        Self::full(shape, T::zero())
    }

    pub fn identity(n: usize) -> Result<Self> {
        let mut t = Self::zeros(&[n, n])?;
        for i in 0..n {
            t.data[i * n + i] = T::one();
        }
        Ok(t)
    }

    pub fn from_vec(data: Vec<T>) -> Result<Self> {
        Self::new(vec![data.len()], data)
    }

    pub fn scalar(value: T) -> Self {
        Tensor {
            shape: vec![1],
            data: vec![value],
        }
    }

    /// Builds a `rows × cols` tensor from nested rows.
    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::dim("ragged rows"));
        }
        Self::new(vec![rows.len(), cols], rows.concat())
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    /// Mutable access to the values; the shape stays fixed.
    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn reshape(self, shape: Vec<usize>) -> Result<Self> {
        Self::new(shape, self.data)
    }

    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&x| U::of(x.as_f64())).collect(),
        }
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, &x| m.max(x.abs()))
    }

    /// Swaps the two axes of a rank-2 tensor.
    pub fn transpose(&self) -> Result<Self> {
        let [r, c] = self.shape[..] else {
            return Err(Error::dim(format!(
                "transpose needs rank 2, got shape {:?}",
                self.shape
            )));
        };
        let mut out = Vec::with_capacity(r * c);
        for j in 0..c {
            for i in 0..r {
                out.push(self.data[i * c + j]);
            }
        }
        Self::new(vec![c, r], out)
    }

    pub fn matmul(&self, other: &Tensor<T>) -> Result<Self> {
        matmul(self, other)
    }

    pub fn ew(&self, op: EwOp, other: Option<&Tensor<T>>) -> Result<Self> {
        ew(op, self, other)
    }

    pub fn reduce(&self, op: ReduceOp, axis: usize) -> Result<Self> {
        reduce(op, self, axis)
    }
}

impl<T: fmt::Debug> fmt::Debug for Tensor<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.data.len() <= 16 {
            write!(f, "Tensor{:?}{:?}", self.shape, self.data)
        } else {
            write!(f, "Tensor{:?}[{} values]", self.shape, self.data.len())
        }
    }
}

/// `out[i,j] = Σ_k a[i,k]·b[k,j]`, accumulated in ascending `k`.
pub fn matmul<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    let (&[m, ka], &[kb, n]) = (&a.shape[..], &b.shape[..]) else {
        return Err(Error::dim(format!(
            "matmul needs rank-2 operands, got {:?} and {:?}",
            a.shape, b.shape
        )));
    };
    if ka != kb {
        return Err(Error::dim(format!(
            "matmul inner extents differ: {:?} × {:?}",
            a.shape, b.shape
        )));
    }
    let mut out = vec![T::zero(); m * n];
    for i in 0..m {
        for j in 0..n {
            let mut acc = T::zero();
            for k in 0..ka {
                acc += a.data[i * ka + k] * b.data[k * n + j];
            }
            out[i * n + j] = acc;
        }
    }
    Tensor::new(vec![m, n], out)
}

/// Elementwise operation. Binary kinds take either an identically shaped
/// tensor or a single-element tensor, which is applied to every element.
pub fn ew<T: Scalar>(op: EwOp, a: &Tensor<T>, b: Option<&Tensor<T>>) -> Result<Tensor<T>> {
    let unary = |f: fn(T) -> T| -> Result<Tensor<T>> {
        if b.is_some() {
            return Err(Error::dim(format!("{op:?} takes a single operand")));
        }
        Ok(a.map(f))
    };
    let binary = |f: fn(T, T) -> T| -> Result<Tensor<T>> {
        let b = b.ok_or_else(|| Error::dim(format!("{op:?} needs two operands")))?;
        let data = if b.shape == a.shape {
            a.data.iter().zip(&b.data).map(|(&x, &y)| f(x, y)).collect()
        } else if b.len() == 1 {
            a.data.iter().map(|&x| f(x, b.data[0])).collect()
        } else if a.len() == 1 {
            return Tensor::new(
                b.shape.clone(),
                b.data.iter().map(|&y| f(a.data[0], y)).collect(),
            );
        } else {
            return Err(Error::dim(format!(
                "{op:?} shapes differ: {:?} vs {:?}",
                a.shape, b.shape
            )));
        };
        Tensor::new(a.shape.clone(), data)
    };
    match op {
        EwOp::Add => binary(|x, y| x + y),
        EwOp::Sub => binary(|x, y| x - y),
        EwOp::Mul => binary(|x, y| x * y),
        EwOp::Sigmoid => unary(sigmoid),
        EwOp::Tanh => unary(|x| x.tanh()),
        EwOp::Relu => unary(relu),
    }
}

/// Reduces along `axis`, removing it. Reducing a rank-1 tensor yields a
/// single-element tensor of shape `[1]`.
pub fn reduce<T: Scalar>(op: ReduceOp, a: &Tensor<T>, axis: usize) -> Result<Tensor<T>> {
    if axis >= a.rank() {
        return Err(Error::dim(format!(
            "axis {axis} out of range for shape {:?}",
            a.shape
        )));
    }
    let outer: usize = a.shape[..axis].iter().product();
    let inner: usize = a.shape[axis + 1..].iter().product();
    let extent = a.shape[axis];
    let mut out = Vec::with_capacity(outer * inner);
    for o in 0..outer {
        for i in 0..inner {
            let at = |k: usize| a.data[(o * extent + k) * inner + i];
            let v = match op {
                ReduceOp::Sum | ReduceOp::Mean => {
                    let mut s = T::zero();
                    for k in 0..extent {
                        s += at(k);
                    }
                    if op == ReduceOp::Mean {
                        s / T::of(extent as f64)
                    } else {
                        s
                    }
                }
                ReduceOp::Argmax => {
                    let mut best = 0;
                    for k in 1..extent {
                        if at(k) > at(best) {
                            best = k;
                        }
                    }
                    T::of(best as f64)
                }
            };
            out.push(v);
        }
    }
    let mut shape: Vec<usize> = a.shape[..axis]
        .iter()
        .chain(&a.shape[axis + 1..])
        .copied()
        .collect();
    if shape.is_empty() {
        shape.push(1);
    }
    Tensor::new(shape, out)
}

/// Index of the maximum of a slice, lowest index on ties.
pub fn argmax<T: PartialOrd>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}
