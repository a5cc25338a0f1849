use crate::autodiff::Tensor;
use crate::error::{Error, Result};

/// Bias-corrected Adam with one moment pair per parameter tensor.
#[derive(Clone, Debug)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl Adam {
    pub fn new(lr: f64, shapes: &[&[usize]]) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: shapes.iter().map(|s| Tensor::zeros(s)).collect(),
            v: shapes.iter().map(|s| Tensor::zeros(s)).collect(),
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    pub fn first_moments(&self) -> &[Tensor] {
        &self.m
    }

    pub fn second_moments(&self) -> &[Tensor] {
        &self.v
    }

    /// Applies one update. `iteration` only labels a divergence error.
    pub fn step(&mut self, params: &mut [&mut Tensor], grads: &[Tensor], iteration: usize) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::Contract(format!(
                "Adam tracks {} tensors, got {} parameters and {} gradients",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        for (k, g) in grads.iter().enumerate() {
            if g.shape() != self.m[k].shape() || params[k].shape() != self.m[k].shape() {
                return Err(Error::Dimension {
                    op: "adam",
                    lhs: self.m[k].shape().to_vec(),
                    rhs: g.shape().to_vec(),
                });
            }
            if !g.all_finite() {
                return Err(Error::Divergence {
                    iteration,
                    step: 0,
                    detail: format!("non-finite gradient in parameter tensor {k}"),
                });
            }
        }
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        for (k, g) in grads.iter().enumerate() {
            let m = self.m[k].data_mut();
            let v = self.v[k].data_mut();
            let p = params[k].data_mut();
            for i in 0..g.len() {
                let gi = g.data()[i];
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * gi;
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * gi * gi;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                p[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_lr() {
        let mut theta = Tensor::scalar(0.0);
        let mut adam = Adam::new(0.005, &[&[1]]);
        adam.step(&mut [&mut theta], &[Tensor::scalar(1.0)], 0).unwrap();
        // m_hat = 1, v_hat = 1, so the step is lr / (1 + eps)
        let expected = -0.005 / (1.0 + 1e-8);
        assert!((theta.data()[0] - expected).abs() < 1e-18);
        assert_eq!(adam.steps_taken(), 1);
    }

    #[test]
    fn zero_gradient_leaves_parameters_and_decays_moments() {
        let mut theta = Tensor::scalar(0.3);
        let mut adam = Adam::new(0.01, &[&[1]]);
        adam.step(&mut [&mut theta], &[Tensor::scalar(2.0)], 0).unwrap();
        let after_first = theta.data()[0];
        let (m1, v1) = (adam.first_moments()[0].data()[0], adam.second_moments()[0].data()[0]);
        let mut zero_state = Adam::new(0.01, &[&[1]]);
        let mut still = Tensor::scalar(0.3);
        zero_state.step(&mut [&mut still], &[Tensor::scalar(0.0)], 0).unwrap();
        assert_eq!(still.data()[0], 0.3);
        adam.step(&mut [&mut theta], &[Tensor::scalar(0.0)], 1).unwrap();
        assert!((adam.first_moments()[0].data()[0] - 0.9 * m1).abs() < 1e-15);
        assert!((adam.second_moments()[0].data()[0] - 0.999 * v1).abs() < 1e-15);
        // momentum still carries the parameter
        assert!(theta.data()[0] < after_first);
    }

    #[test]
    fn identical_inputs_identical_updates() {
        let grads = [Tensor::new(vec![2], vec![0.5, -1.5]).unwrap()];
        let mut a = Tensor::new(vec![2], vec![1.0, 2.0]).unwrap();
        let mut b = a.clone();
        let mut oa = Adam::new(0.005, &[&[2]]);
        let mut ob = Adam::new(0.005, &[&[2]]);
        for i in 0..5 {
            oa.step(&mut [&mut a], &grads, i).unwrap();
            ob.step(&mut [&mut b], &grads, i).unwrap();
        }
        assert_eq!(a, b);
    }

    #[test]
    fn non_finite_gradient_diverges() {
        let mut theta = Tensor::scalar(0.0);
        let mut adam = Adam::new(0.005, &[&[1]]);
        let err = adam
            .step(&mut [&mut theta], &[Tensor::scalar(f64::NAN)], 7)
            .unwrap_err();
        assert!(matches!(err, Error::Divergence { iteration: 7, .. }));
        assert_eq!(theta.data()[0], 0.0);
    }
}
