use super::matrix::Matrix;
use super::Parameters;

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// Adaptive-moment optimizer with bias correction.
#[derive(Clone, Debug)]
pub struct Adam {
    pub learning_rate: f64,
    step: i32,
    first: Vec<Matrix>,
    second: Vec<Matrix>,
}

impl Adam {
    pub fn new<M: Parameters>(model: &M, learning_rate: f64) -> Self {
        let zeros: Vec<Matrix> =
            model.tensors().iter().map(|t| Matrix::zeros(t.rows(), t.cols())).collect();
        Adam { learning_rate, step: 0, first: zeros.clone(), second: zeros }
    }

    pub fn step<M: Parameters>(&mut self, model: &mut M, grads: &M) {
        self.step += 1;
        let bias1 = 1.0 - BETA1.powi(self.step);
        let bias2 = 1.0 - BETA2.powi(self.step);
        let lr = self.learning_rate;
        for (((param, grad), m), v) in model
            .tensors_mut()
            .into_iter()
            .zip(grads.tensors())
            .zip(&mut self.first)
            .zip(&mut self.second)
        {
            let iter = param
                .data_mut()
                .iter_mut()
                .zip(grad.data())
                .zip(m.data_mut().iter_mut().zip(v.data_mut().iter_mut()));
            for ((p, &g), (m, v)) in iter {
                *m = BETA1 * *m + (1.0 - BETA1) * g;
                *v = BETA2 * *v + (1.0 - BETA2) * g * g;
                let m_hat = *m / bias1;
                let v_hat = *v / bias2;
                *p -= lr * m_hat / (v_hat.sqrt() + EPSILON);
            }
        }
    }
}

/// Rescales all gradients so their global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_global_norm<M: Parameters>(grads: &mut M, max_norm: f64) -> f64 {
    let norm = grads.tensors().iter().map(|t| t.norm_sq()).sum::<f64>().sqrt();
    if norm > max_norm {
        let factor = max_norm / norm;
        for t in grads.tensors_mut() {
            t.scale(factor);
        }
    }
    norm
}

pub fn scale_all<M: Parameters>(grads: &mut M, factor: f64) {
    for t in grads.tensors_mut() {
        t.scale(factor);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::layers::Linear;
    use proptest::prelude::*;

    fn linear(values: &[f64]) -> Linear {
        let mut l = Linear::zeros(values.len(), 1);
        l.weight.data_mut().copy_from_slice(values);
        l
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut model = linear(&[1.0, -1.0]);
        let grads = linear(&[0.5, -3.0]);
        let mut adam = Adam::new(&model, 0.1);
        adam.step(&mut model, &grads);
        // With bias correction the first update is lr * sign(g).
        assert!((model.weight.data()[0] - 0.9).abs() < 1e-6);
        assert!((model.weight.data()[1] + 0.9).abs() < 1e-6);
    }

    #[test]
    fn zero_learning_rate_is_a_no_op() {
        let mut model = linear(&[0.25, 4.0]);
        let before = model.clone();
        let mut adam = Adam::new(&model, 0.0);
        for _ in 0..10 {
            adam.step(&mut model, &linear(&[1.0, -2.0]));
        }
        assert_eq!(model, before);
    }

    proptest! {
        #[test]
        fn clipped_norm_within_threshold(
            values in prop::collection::vec(-1e3f64..1e3, 1..20),
            max in 1e-3f64..10.0,
        ) {
            let mut g = linear(&values);
            clip_global_norm(&mut g, max);
            let norm = g.tensors().iter().map(|t| t.norm_sq()).sum::<f64>().sqrt();
            prop_assert!(norm <= max + 1e-9);
        }
    }
}
