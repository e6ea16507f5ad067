use super::{conv1d_backward, conv1d_forward, expect_shape, Conv1dCache, Conv1dParams, Initializer};
use crate::error::{Error, Result};
use crate::scalar::sigmoid;
use crate::tensor::Tensor;
use crate::Scalar;

/// Learnable per-channel gate on a skip path:
/// `y = main + sigmoid(gate_logits) ⊙ P(skip)`, with the gate broadcast over
/// time and `P` a 1×1 projection when the channel counts differ.
#[derive(Clone, Debug, PartialEq)]
pub struct GatedSkipParams<T> {
    /// `[out_channels]`
    pub gate_logits: Tensor<T>,
    /// Present iff the skip input has a different channel count.
    pub projection: Option<Conv1dParams<T>>,
}

impl<T: Scalar> GatedSkipParams<T> {
    pub fn new(gate_logits: Tensor<T>, projection: Option<Conv1dParams<T>>) -> Result<Self> {
        if gate_logits.rank() != 1 {
            return Err(Error::dim("gate logits must be rank 1"));
        }
        if let Some(proj) = &projection {
            if proj.kernel() != 1 || proj.stride != 1 || proj.padding != 0 {
                return Err(Error::Config(
                    "skip projection must be a 1×1 convolution".into(),
                ));
            }
            if proj.out_channels() != gate_logits.len() {
                return Err(Error::dim("projection and gate channel counts differ"));
            }
        }
        Ok(GatedSkipParams {
            gate_logits,
            projection,
        })
    }

    /// Gate logits start at zero (half-open gate).
    pub fn init(init: &mut Initializer, in_channels: usize, out_channels: usize) -> Result<Self> {
        let projection = if in_channels != out_channels {
            Some(Conv1dParams::init(init, in_channels, out_channels, 1, 1, 0)?)
        } else {
            None
        };
        Self::new(init.zeros(&[out_channels])?, projection)
    }

    pub fn channels(&self) -> usize {
        self.gate_logits.len()
    }

    pub fn gates(&self) -> Vec<T> {
        self.gate_logits.data().iter().map(|&g| sigmoid(g)).collect()
    }

    pub fn param_count(&self) -> usize {
        self.gate_logits.len() + self.projection.as_ref().map_or(0, |p| p.param_count())
    }
}

#[derive(Clone, Debug)]
pub struct GatedSkipCache<T> {
    projected: Tensor<T>,
    gates: Vec<T>,
    projection: Option<Conv1dCache<T>>,
}

#[derive(Clone, Debug)]
pub struct GatedSkipGrads<T> {
    pub main: Tensor<T>,
    pub skip_in: Tensor<T>,
    pub gate_logits: Tensor<T>,
    /// `(weights, bias)` of the projection; absent when there is none.
    pub projection: Option<(Tensor<T>, Tensor<T>)>,
}

pub fn gated_skip_apply<T: Scalar>(
    p: &GatedSkipParams<T>,
    main: &Tensor<T>,
    skip_in: &Tensor<T>,
) -> Result<(Tensor<T>, GatedSkipCache<T>)> {
    let c = p.channels();
    let &[mc, t] = main.shape() else {
        return Err(Error::dim(format!(
            "gated skip main path must be [channels × time], got {:?}",
            main.shape()
        )));
    };
    if mc != c {
        return Err(Error::dim(format!(
            "gated skip expects {c} main channels, got {mc}"
        )));
    }
    if skip_in.rank() != 2 || skip_in.shape()[1] != t {
        return Err(Error::dim(format!(
            "gated skip time extents differ: main {:?}, skip {:?}",
            main.shape(),
            skip_in.shape()
        )));
    }
    let (projected, proj_cache) = match &p.projection {
        Some(proj) => {
            let (y, cache) = conv1d_forward(proj, skip_in)?;
            (y, Some(cache))
        }
        None => {
            if skip_in.shape()[0] != c {
                return Err(Error::dim(format!(
                    "skip input has {} channels but no projection to {c}",
                    skip_in.shape()[0]
                )));
            }
            (skip_in.clone(), None)
        }
    };
    let gates = p.gates();
    let mut y = main.data().to_vec();
    for ch in 0..c {
        let g = gates[ch];
        for (yv, &pv) in y[ch * t..(ch + 1) * t]
            .iter_mut()
            .zip(&projected.data()[ch * t..(ch + 1) * t])
        {
            *yv += g * pv;
        }
    }
    let cache = GatedSkipCache {
        projected,
        gates,
        projection: proj_cache,
    };
    Ok((Tensor::new(vec![c, t], y)?, cache))
}

pub fn gated_skip_backward<T: Scalar>(
    p: &GatedSkipParams<T>,
    cache: &GatedSkipCache<T>,
    grad_y: &Tensor<T>,
) -> Result<GatedSkipGrads<T>> {
    expect_shape("gated skip grad_y", grad_y, cache.projected.shape())?;
    let c = p.channels();
    let t = grad_y.shape()[1];
    let gy = grad_y.data();
    let proj = cache.projected.data();

    let mut grad_gate = Vec::with_capacity(c);
    let mut grad_projected = Vec::with_capacity(c * t);
    for ch in 0..c {
        let g = cache.gates[ch];
        let row = &gy[ch * t..(ch + 1) * t];
        let mut acc = T::zero();
        for (&gv, &pv) in row.iter().zip(&proj[ch * t..(ch + 1) * t]) {
            acc += gv * pv;
        }
        grad_gate.push(acc * g * (T::one() - g));
        grad_projected.extend(row.iter().map(|&gv| gv * g));
    }
    let grad_projected = Tensor::new(vec![c, t], grad_projected)?;

    let (skip_in, projection) = match (&p.projection, &cache.projection) {
        (Some(params), Some(pc)) => {
            let g = conv1d_backward(params, pc, &grad_projected)?;
            (g.x, Some((g.weights, g.bias)))
        }
        (None, None) => (grad_projected, None),
        _ => return Err(Error::dim("gated skip cache does not match parameters")),
    };
    Ok(GatedSkipGrads {
        main: grad_y.clone(),
        skip_in,
        gate_logits: Tensor::new(vec![c], grad_gate)?,
        projection,
    })
}
