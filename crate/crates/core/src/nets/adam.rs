use super::Parameters;
use crate::error::{Error, Result};

/// First/second moment estimates shaped like the parameters they track.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<P> {
    pub m: P,
    pub v: P,
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl<P: Parameters> AdamState<P> {
    pub fn new(params: &P) -> Self {
        AdamState {
            m: params.zeros_like(),
            v: params.zeros_like(),
            step: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One bias-corrected Adam update of `params` in place.
pub fn adam_step<P: Parameters>(params: &mut P, grads: &P, state: &mut AdamState<P>, lr: f64) -> Result<()> {
    if !grads.is_finite() {
        return Err(Error::NonFinite { term: "gradient" });
    }
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2, eps) = (state.beta1, state.beta2, state.eps);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);

    let g = grads.tensors();
    let p = params.tensors_mut();
    let m = state.m.tensors_mut();
    let v = state.v.tensors_mut();
    for (((g, (_, p)), (_, m)), (_, v)) in g.iter().zip(p).zip(m).zip(v) {
        for i in 0..p.len() {
            let gi = g.data[i];
            m[i] = b1 * m[i] + (1.0 - b1) * gi;
            v[i] = b2 * v[i] + (1.0 - b2) * gi * gi;
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nets::Dense;
    use ndarray::array;

    fn layer() -> Dense {
        Dense::new(array![[1.0, -2.0], [0.5, 3.0]], array![0.1, -0.1])
    }

    #[test]
    fn zero_grads_leave_params() {
        let mut p = layer();
        let before = p.clone();
        let mut state = AdamState::new(&p);
        let zeros = p.zeros_like();
        adam_step(&mut p, &zeros, &mut state, 1e-3).unwrap();
        assert_eq!(p, before);
        assert!(state.m.weight.iter().all(|&m| m == 0.0));
        assert_eq!(state.step, 1);
    }

    #[test]
    fn first_step_is_signed_lr() {
        let mut p = layer();
        let before = p.clone();
        let grads = Dense::new(array![[0.3, -4.0], [1e-2, -7.5]], array![2.0, -0.02]);
        let mut state = AdamState::new(&p);
        adam_step(&mut p, &grads, &mut state, 1e-3).unwrap();
        for ((a, b), g) in p.weight.iter().zip(&before.weight).zip(&grads.weight) {
            assert!(((b - a) - 1e-3 * g.signum()).abs() < 1e-8);
        }
    }

    #[test]
    fn zero_lr_is_identity_and_deterministic() {
        let grads = Dense::new(array![[0.3, -4.0], [1e-2, -7.5]], array![2.0, -0.02]);
        let mut p = layer();
        let mut state = AdamState::new(&p);
        adam_step(&mut p, &grads, &mut state, 0.0).unwrap();
        assert_eq!(p, layer());

        let run = || {
            let mut p = layer();
            let mut s = AdamState::new(&p);
            adam_step(&mut p, &grads, &mut s, 1e-2).unwrap();
            adam_step(&mut p, &grads, &mut s, 1e-2).unwrap();
            (p, s)
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn rejects_nan_grads() {
        let mut p = layer();
        let mut grads = p.zeros_like();
        grads.bias[0] = f64::NAN;
        let mut s = AdamState::new(&p);
        assert!(adam_step(&mut p, &grads, &mut s, 1e-3).is_err());
    }
}
