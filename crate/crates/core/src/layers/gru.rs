//! Single-layer GRU with the update convention
//!
//! ```text
//! z_t = σ(W_z x_t + U_z h_{t-1} + b_z)
//! r_t = σ(W_r x_t + U_r h_{t-1} + b_r)
//! ĥ_t = tanh(W_h x_t + U_h (r_t ⊙ h_{t-1}) + b_h)
//! h_t = (1 - z_t) ⊙ h_{t-1} + z_t ⊙ ĥ_t
//! ```
//!
//! One bias vector per gate.

use super::{expect_shape, Initializer};
use crate::error::{Error, Result};
use crate::scalar::{axpy, dot, sigmoid};
use crate::tensor::Tensor;
use crate::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct GruParams<T> {
    /// `[hidden × input]`
    pub w_z: Tensor<T>,
    pub w_r: Tensor<T>,
    pub w_h: Tensor<T>,
    /// `[hidden × hidden]`
    pub u_z: Tensor<T>,
    pub u_r: Tensor<T>,
    pub u_h: Tensor<T>,
    /// `[hidden]`
    pub b_z: Tensor<T>,
    pub b_r: Tensor<T>,
    pub b_h: Tensor<T>,
}

/// Gradients have the same layout as the parameters.
pub type GruGrads<T> = GruParams<T>;

impl<T: Scalar> GruParams<T> {
    pub fn init(init: &mut Initializer, input: usize, hidden: usize) -> Result<Self> {
        let p = GruParams {
            w_z: init.weights(&[hidden, input], input)?,
            w_r: init.weights(&[hidden, input], input)?,
            w_h: init.weights(&[hidden, input], input)?,
            u_z: init.weights(&[hidden, hidden], hidden)?,
            u_r: init.weights(&[hidden, hidden], hidden)?,
            u_h: init.weights(&[hidden, hidden], hidden)?,
            b_z: init.zeros(&[hidden])?,
            b_r: init.zeros(&[hidden])?,
            b_h: init.zeros(&[hidden])?,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn zeros(input: usize, hidden: usize) -> Result<Self> {
        let w = Tensor::zeros(&[hidden, input])?;
        let u = Tensor::zeros(&[hidden, hidden])?;
        let b = Tensor::zeros(&[hidden])?;
        Ok(GruParams {
            w_z: w.clone(),
            w_r: w.clone(),
            w_h: w,
            u_z: u.clone(),
            u_r: u.clone(),
            u_h: u,
            b_z: b.clone(),
            b_r: b.clone(),
            b_h: b,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let (h, i) = (self.hidden(), self.input());
        for w in [&self.w_z, &self.w_r, &self.w_h] {
            expect_shape("GRU input weights", w, &[h, i])?;
        }
        for u in [&self.u_z, &self.u_r, &self.u_h] {
            expect_shape("GRU recurrent weights", u, &[h, h])?;
        }
        for b in [&self.b_z, &self.b_r, &self.b_h] {
            expect_shape("GRU bias", b, &[h])?;
        }
        Ok(())
    }

    pub fn hidden(&self) -> usize {
        self.w_z.shape()[0]
    }

    pub fn input(&self) -> usize {
        self.w_z.shape().get(1).copied().unwrap_or(0)
    }

    /// Tensors in canonical order: W_z, W_r, W_h, U_z, U_r, U_h, b_z, b_r, b_h.
    pub fn tensors(&self) -> [&Tensor<T>; 9] {
        [
            &self.w_z, &self.w_r, &self.w_h, &self.u_z, &self.u_r, &self.u_h, &self.b_z,
            &self.b_r, &self.b_h,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut Tensor<T>; 9] {
        [
            &mut self.w_z,
            &mut self.w_r,
            &mut self.w_h,
            &mut self.u_z,
            &mut self.u_r,
            &mut self.u_h,
            &mut self.b_z,
            &mut self.b_r,
            &mut self.b_h,
        ]
    }

    pub fn param_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }
}

#[derive(Clone, Debug)]
pub struct GruCache<T> {
    x_seq: Tensor<T>,
    h0: Vec<T>,
    /// Per step, each `[T × H]` flattened.
    z: Vec<T>,
    r: Vec<T>,
    h_cand: Vec<T>,
    h: Vec<T>,
}

fn matvec<T: Scalar>(w: &Tensor<T>, x: &[T], out: &mut [T]) {
    let cols = x.len();
    for (i, o) in out.iter_mut().enumerate() {
        *o += dot(&w.data()[i * cols..(i + 1) * cols], x);
    }
}

/// `out += Wᵀ v`, accumulated row by row.
fn matvec_t<T: Scalar>(w: &Tensor<T>, v: &[T], out: &mut [T]) {
    let cols = out.len();
    for (i, &vi) in v.iter().enumerate() {
        axpy(vi, &w.data()[i * cols..(i + 1) * cols], out);
    }
}

/// `grad += v ⊗ x`
fn outer_acc<T: Scalar>(grad: &mut [T], v: &[T], x: &[T]) {
    let cols = x.len();
    for (i, &vi) in v.iter().enumerate() {
        axpy(vi, x, &mut grad[i * cols..(i + 1) * cols]);
    }
}

pub fn gru_forward<T: Scalar>(
    p: &GruParams<T>,
    x_seq: &Tensor<T>,
    h0: &Tensor<T>,
) -> Result<(Tensor<T>, GruCache<T>)> {
    let (hid, inp) = (p.hidden(), p.input());
    let &[steps, xi] = x_seq.shape() else {
        return Err(Error::dim(format!(
            "GRU input must be [time × features], got {:?}",
            x_seq.shape()
        )));
    };
    if xi != inp {
        return Err(Error::dim(format!(
            "GRU expects {inp} input features, got {xi}"
        )));
    }
    expect_shape("GRU h0", h0, &[hid])?;

    let n = steps * hid;
    let (mut z, mut r, mut h_cand, mut h) =
        (vec![T::zero(); n], vec![T::zero(); n], vec![T::zero(); n], vec![T::zero(); n]);
    let mut rh = vec![T::zero(); hid];
    for t in 0..steps {
        let x = &x_seq.data()[t * inp..(t + 1) * inp];
        let prev: Vec<T> = if t == 0 {
            h0.data().to_vec()
        } else {
            h[(t - 1) * hid..t * hid].to_vec()
        };
        let span = t * hid..(t + 1) * hid;

        let zt = &mut z[span.clone()];
        zt.copy_from_slice(p.b_z.data());
        matvec(&p.w_z, x, zt);
        matvec(&p.u_z, &prev, zt);
        zt.iter_mut().for_each(|v| *v = sigmoid(*v));

        let rt = &mut r[span.clone()];
        rt.copy_from_slice(p.b_r.data());
        matvec(&p.w_r, x, rt);
        matvec(&p.u_r, &prev, rt);
        rt.iter_mut().for_each(|v| *v = sigmoid(*v));

        for j in 0..hid {
            rh[j] = r[t * hid + j] * prev[j];
        }
        let ct = &mut h_cand[span.clone()];
        ct.copy_from_slice(p.b_h.data());
        matvec(&p.w_h, x, ct);
        matvec(&p.u_h, &rh, ct);
        ct.iter_mut().for_each(|v| *v = v.tanh());

        for j in 0..hid {
            let zj = z[t * hid + j];
            h[t * hid + j] = (T::one() - zj) * prev[j] + zj * h_cand[t * hid + j];
        }
    }
    let out = Tensor::new(vec![steps, hid], h.clone())?;
    let cache = GruCache {
        x_seq: x_seq.clone(),
        h0: h0.data().to_vec(),
        z,
        r,
        h_cand,
        h,
    };
    Ok((out, cache))
}

/// Backpropagation through time. Returns `(grad_x_seq, grad_params, grad_h0)`.
pub fn gru_backward<T: Scalar>(
    p: &GruParams<T>,
    cache: &GruCache<T>,
    grad_h_seq: &Tensor<T>,
) -> Result<(Tensor<T>, GruGrads<T>, Tensor<T>)> {
    let (hid, inp) = (p.hidden(), p.input());
    let steps = cache.x_seq.shape()[0];
    expect_shape("GRU grad_h_seq", grad_h_seq, &[steps, hid])?;
    if cache.h.len() != steps * hid || cache.x_seq.shape()[1] != inp {
        return Err(Error::dim("GRU cache does not match these parameters"));
    }
    let mut g = GruParams::zeros(inp, hid)?;
    let mut grad_x = vec![T::zero(); steps * inp];
    let mut carry = vec![T::zero(); hid];
    let (mut dz, mut dr, mut dc, mut rh, mut drh) = (
        vec![T::zero(); hid],
        vec![T::zero(); hid],
        vec![T::zero(); hid],
        vec![T::zero(); hid],
        vec![T::zero(); hid],
    );

    for t in (0..steps).rev() {
        let prev: &[T] = if t == 0 {
            &cache.h0
        } else {
            &cache.h[(t - 1) * hid..t * hid]
        };
        let x = &cache.x_seq.data()[t * inp..(t + 1) * inp];
        let (z, r, c) = (
            &cache.z[t * hid..(t + 1) * hid],
            &cache.r[t * hid..(t + 1) * hid],
            &cache.h_cand[t * hid..(t + 1) * hid],
        );
        let upstream = &grad_h_seq.data()[t * hid..(t + 1) * hid];

        let mut dprev = vec![T::zero(); hid];
        for j in 0..hid {
            let dh = upstream[j] + carry[j];
            dprev[j] = dh * (T::one() - z[j]);
            // pre-activation gradients
            dz[j] = dh * (c[j] - prev[j]) * z[j] * (T::one() - z[j]);
            dc[j] = dh * z[j] * (T::one() - c[j] * c[j]);
            rh[j] = r[j] * prev[j];
        }

        drh.fill(T::zero());
        matvec_t(&p.u_h, &dc, &mut drh);
        for j in 0..hid {
            dr[j] = drh[j] * prev[j] * r[j] * (T::one() - r[j]);
            dprev[j] += drh[j] * r[j];
        }

        outer_acc(g.w_z.data_mut(), &dz, x);
        outer_acc(g.w_r.data_mut(), &dr, x);
        outer_acc(g.w_h.data_mut(), &dc, x);
        outer_acc(g.u_z.data_mut(), &dz, prev);
        outer_acc(g.u_r.data_mut(), &dr, prev);
        outer_acc(g.u_h.data_mut(), &dc, &rh);
        for (b, d) in [(&mut g.b_z, &dz), (&mut g.b_r, &dr), (&mut g.b_h, &dc)] {
            axpy(T::one(), d, b.data_mut());
        }

        matvec_t(&p.u_z, &dz, &mut dprev);
        matvec_t(&p.u_r, &dr, &mut dprev);

        let gx = &mut grad_x[t * inp..(t + 1) * inp];
        matvec_t(&p.w_z, &dz, gx);
        matvec_t(&p.w_r, &dr, gx);
        matvec_t(&p.w_h, &dc, gx);

        carry = dprev;
    }
    Ok((
        Tensor::new(vec![steps, inp], grad_x)?,
        g,
        Tensor::new(vec![hid], carry)?,
    ))
}
