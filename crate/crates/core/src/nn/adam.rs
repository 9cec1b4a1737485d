use alloc::format;
use alloc::vec::Vec;

use crate::{Error, Result};

/// Bias-corrected Adam with per-parameter first and second moments.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    learning_rate: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    step: u64,
    first_moment: Vec<f64>,
    second_moment: Vec<f64>,
}

impl AdamState {
    /// Standard coefficients: beta1 = 0.9, beta2 = 0.999, epsilon = 1e-8.
    pub fn new(n_params: usize, learning_rate: f64) -> Result<Self> {
        AdamState::with_coefficients(n_params, learning_rate, 0.9, 0.999, 1e-8)
    }

    pub fn with_coefficients(
        n_params: usize,
        learning_rate: f64,
        beta1: f64,
        beta2: f64,
        epsilon: f64,
    ) -> Result<Self> {
        if !(learning_rate > 0.0 && learning_rate.is_finite()) {
            return Err(Error::config(format!(
                "learning rate must be positive and finite, got {learning_rate}"
            )));
        }
        for (name, beta) in [("beta1", beta1), ("beta2", beta2)] {
            if !(0.0..1.0).contains(&beta) {
                return Err(Error::config(format!("{name} must lie in [0, 1), got {beta}")));
            }
        }
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::config(format!("epsilon must be positive, got {epsilon}")));
        }
        Ok(AdamState {
            learning_rate,
            beta1,
            beta2,
            epsilon,
            step: 0,
            first_moment: alloc::vec![0.0; n_params],
            second_moment: alloc::vec![0.0; n_params],
        })
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    /// One Adam step in place: moments update, bias correction, then
    /// `params -= lr * m_hat / (sqrt(v_hat) + epsilon)`.
    pub fn apply(&mut self, params: &mut [f64], grads: &[f64]) {
        assert_eq!(params.len(), self.first_moment.len(), "parameter count mismatch");
        assert_eq!(grads.len(), params.len(), "gradient count mismatch");
        self.step += 1;
        let correction1 = 1.0 - libm::pow(self.beta1, self.step as f64);
        let correction2 = 1.0 - libm::pow(self.beta2, self.step as f64);
        let scale = self.learning_rate / correction1;
        for i in 0..params.len() {
            let g = grads[i];
            let m = &mut self.first_moment[i];
            *m += (1.0 - self.beta1) * (g - *m);
            let v = &mut self.second_moment[i];
            *v += (1.0 - self.beta2) * (g * g - *v);
            params[i] -= scale * *m / (libm::sqrt(*v / correction2) + self.epsilon);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradients_leave_parameters_unchanged() {
        let mut adam = AdamState::new(3, 1e-3).unwrap();
        let mut params = [1.0, -2.0, 0.5];
        adam.apply(&mut params, &[0.0, 0.0, 0.0]);
        assert_eq!(params, [1.0, -2.0, 0.5]);
        assert_eq!(adam.step_count(), 1);
    }

    /// For the first step the bias corrections cancel the moment decay, so
    /// the update is -lr * g / (|g| + eps'), essentially -lr * sign(g).
    #[test]
    fn first_step_moves_by_learning_rate_against_the_gradient_sign() {
        let mut adam = AdamState::new(2, 0.01).unwrap();
        let mut params = [0.0, 0.0];
        adam.apply(&mut params, &[2.5, -0.003]);
        assert!((params[0] + 0.01).abs() < 1e-6, "got {}", params[0]);
        assert!((params[1] - 0.01).abs() < 1e-6, "got {}", params[1]);
    }

    #[test]
    fn identical_histories_give_identical_parameters() {
        let mut a = AdamState::new(2, 3e-4).unwrap();
        let mut b = AdamState::new(2, 3e-4).unwrap();
        let mut pa = [0.3, -0.7];
        let mut pb = [0.3, -0.7];
        for k in 0..50 {
            let g = [(k as f64).sin(), (k as f64).cos()];
            a.apply(&mut pa, &g);
            b.apply(&mut pb, &g);
        }
        assert_eq!(pa, pb);
        assert_eq!(a, b);
    }

    #[test]
    fn invalid_coefficients_are_rejected() {
        assert!(AdamState::new(1, 0.0).is_err());
        assert!(AdamState::with_coefficients(1, 1e-3, 1.0, 0.999, 1e-8).is_err());
        assert!(AdamState::with_coefficients(1, 1e-3, 0.9, -0.1, 1e-8).is_err());
        assert!(AdamState::with_coefficients(1, 1e-3, 0.9, 0.999, 0.0).is_err());
    }

    #[test]
    fn converges_on_a_quadratic_bowl() {
        let mut adam = AdamState::new(2, 0.05).unwrap();
        let mut params = [3.0, -4.0];
        for _ in 0..2_000 {
            let grads = [2.0 * params[0], 2.0 * params[1]];
            adam.apply(&mut params, &grads);
        }
        assert!(params[0].abs() < 1e-3 && params[1].abs() < 1e-3, "got {params:?}");
    }
}
