use super::Optimizer;
use crate::error::{Error, Result};
use crate::numerics::{ParamId, ParamStore, Tensor};

/// Per-parameter optimizer moments.
#[derive(Clone, Debug)]
pub struct OptimizerState {
    optimizer: Optimizer,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
    steps: i32,
}

impl OptimizerState {
    pub fn new(optimizer: Optimizer, store: &ParamStore) -> Self {
        let zeros: Vec<Vec<f64>> = store.iter().map(|(_, p)| vec![0.0; p.value.len()]).collect();
        OptimizerState {
            optimizer,
            first: zeros.clone(),
            second: zeros,
            steps: 0,
        }
    }

    /// Applies one update. Parameters absent from `grads` are left alone.
    pub fn step(&mut self, store: &mut ParamStore, grads: &[(ParamId, Tensor)], learning_rate: f64) -> Result<()> {
        self.steps += 1;
        for (id, grad) in grads {
            if !store.get(*id).trainable {
                continue;
            }
            if grad.shape() != store.value(*id).shape() {
                return Err(Error::ShapeMismatch(format!(
                    "gradient {:?} for parameter {:?}",
                    grad.shape(),
                    store.value(*id).shape()
                )));
            }
            let values = store.value_mut(*id).data_mut();
            match self.optimizer {
                Optimizer::Sgd => {
                    for (v, g) in values.iter_mut().zip(grad.data()) {
                        *v -= learning_rate * g;
                    }
                }
                Optimizer::Adam { beta1, beta2, epsilon } => {
                    let m = &mut self.first[id.index()];
                    let s = &mut self.second[id.index()];
                    let c1 = 1.0 - beta1.powi(self.steps);
                    let c2 = 1.0 - beta2.powi(self.steps);
                    for (j, (v, &g)) in values.iter_mut().zip(grad.data()).enumerate() {
                        m[j] = beta1 * m[j] + (1.0 - beta1) * g;
                        s[j] = beta2 * s[j] + (1.0 - beta2) * g * g;
                        let m_hat = m[j] / c1;
                        let s_hat = s[j] / c2;
                        *v -= learning_rate * m_hat / (s_hat.sqrt() + epsilon);
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one(value: f64) -> (ParamStore, ParamId) {
        let mut s = ParamStore::new();
        let id = s.add("w", Tensor::vector(vec![value]).unwrap()).unwrap();
        (s, id)
    }

    #[test]
    fn sgd_step() {
        let (mut s, id) = one(1.0);
        let mut opt = OptimizerState::new(Optimizer::Sgd, &s);
        opt.step(&mut s, &[(id, Tensor::vector(vec![0.5]).unwrap())], 0.1).unwrap();
        assert_eq!(s.value(id).data(), &[0.95]);
    }

    #[test]
    fn adam_first_step_moves_by_learning_rate() {
        // Bias correction makes the first step lr * g / (|g| + eps).
        let (mut s, id) = one(1.0);
        let mut opt = OptimizerState::new(Optimizer::default(), &s);
        opt.step(&mut s, &[(id, Tensor::vector(vec![-4.0]).unwrap())], 0.01).unwrap();
        let expected = 1.0 + 0.01 * 4.0 / (4.0 + 1e-8);
        assert!((s.value(id).item() - expected).abs() < 1e-15);
    }

    #[test]
    fn adam_minimizes_quadratic() {
        let (mut s, id) = one(3.0);
        let mut opt = OptimizerState::new(Optimizer::default(), &s);
        for _ in 0..2000 {
            let w = s.value(id).item();
            opt.step(&mut s, &[(id, Tensor::vector(vec![2.0 * (w - 0.5)]).unwrap())], 0.01).unwrap();
        }
        assert!((s.value(id).item() - 0.5).abs() < 1e-3);
    }

    #[test]
    fn frozen_parameters_do_not_move() {
        let (mut s, id) = one(1.0);
        s.set_trainable(id, false);
        let mut opt = OptimizerState::new(Optimizer::Sgd, &s);
        opt.step(&mut s, &[(id, Tensor::vector(vec![1.0]).unwrap())], 0.1).unwrap();
        assert_eq!(s.value(id).item(), 1.0);
    }
}
