use crate::error::{Error, Result};
use crate::tensor::Tensor;
use crate::Scalar;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam moments for a fixed, ordered list of parameter tensors.
#[derive(Clone, Debug)]
pub struct AdamState<T> {
    pub config: AdamConfig,
    pub step: u64,
    pub m: Vec<Vec<T>>,
    pub v: Vec<Vec<T>>,
}

impl<T: Scalar> AdamState<T> {
    pub fn new<'a>(
        config: AdamConfig,
        params: impl IntoIterator<Item = &'a Tensor<T>>,
    ) -> Result<Self> {
        if !(0.0..1.0).contains(&config.beta1) || !(0.0..1.0).contains(&config.beta2) {
            return Err(Error::Config(format!(
                "Adam betas must lie in [0, 1), got {} and {}",
                config.beta1, config.beta2
            )));
        }
        let m: Vec<Vec<T>> = params.into_iter().map(|p| vec![T::zero(); p.len()]).collect();
        Ok(AdamState {
            config,
            step: 0,
            v: m.clone(),
            m,
        })
    }
}

/// One bias-corrected Adam update over parallel lists of parameters and
/// gradients. The step counter advances once per call.
pub fn adam_step<T: Scalar>(
    params: &mut [&mut Tensor<T>],
    grads: &[&Tensor<T>],
    state: &mut AdamState<T>,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::dim(format!(
            "Adam got {} parameters, {} gradients, {} moment slots",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    for (i, (p, g)) in params.iter().zip(grads).enumerate() {
        if p.shape() != g.shape() || state.m[i].len() != p.len() {
            return Err(Error::dim(format!(
                "Adam slot {i}: parameter {:?}, gradient {:?}",
                p.shape(),
                g.shape()
            )));
        }
    }
    state.step += 1;
    let c = state.config;
    let (b1, b2) = (T::of(c.beta1), T::of(c.beta2));
    let bc1 = T::of(1.0 - c.beta1.powi(state.step as i32));
    let bc2 = T::of(1.0 - c.beta2.powi(state.step as i32));
    let (lr, eps) = (T::of(c.lr), T::of(c.eps));
    for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
        let (m, v) = (&mut state.m[i], &mut state.v[i]);
        for (j, (pv, &gv)) in p.data_mut().iter_mut().zip(g.data()).enumerate() {
            m[j] = b1 * m[j] + (T::one() - b1) * gv;
            v[j] = b2 * v[j] + (T::one() - b2) * gv * gv;
            let m_hat = m[j] / bc1;
            let v_hat = v[j] / bc2;
            *pv -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one(v: f64) -> Tensor<f64> {
        Tensor::scalar(v)
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut p = one(2.0);
        let g = one(1.0);
        let mut st = AdamState::new(AdamConfig { lr: 0.1, ..Default::default() }, [&p]).unwrap();
        adam_step(&mut [&mut p], &[&g], &mut st).unwrap();
        assert!((p.data()[0] - 1.9).abs() < 1e-6);
        assert_eq!(st.step, 1);
    }

    #[test]
    fn zero_lr_keeps_params_but_updates_moments() {
        let mut p = one(2.0);
        let g = one(0.5);
        let mut st = AdamState::new(AdamConfig { lr: 0.0, ..Default::default() }, [&p]).unwrap();
        for _ in 0..3 {
            adam_step(&mut [&mut p], &[&g], &mut st).unwrap();
        }
        assert_eq!(p.data()[0], 2.0);
        assert!(st.m[0][0] > 0.0 && st.v[0][0] > 0.0);
    }

    #[test]
    fn zero_gradient_from_rest_is_a_no_op() {
        let mut p = one(-3.0);
        let g = one(0.0);
        let mut st = AdamState::new(AdamConfig::default(), [&p]).unwrap();
        adam_step(&mut [&mut p], &[&g], &mut st).unwrap();
        assert_eq!(p.data()[0], -3.0);
    }

    #[test]
    fn mismatched_shapes_are_rejected() {
        let mut p = one(1.0);
        let g = Tensor::from_vec(vec![1.0, 2.0]).unwrap();
        let mut st = AdamState::new(AdamConfig::default(), [&p]).unwrap();
        assert!(adam_step(&mut [&mut p], &[&g], &mut st).is_err());
    }
}
