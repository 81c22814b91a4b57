/// Moment estimates for ADAM with bias correction.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step_count: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    /// Fresh state with the usual `(0.9, 0.999, 1e-8)` constants.
    pub fn new(n: usize) -> Self {
        Self::with_constants(n, 0.9, 0.999, 1e-8)
    }

    pub fn with_constants(n: usize, beta1: f64, beta2: f64, epsilon: f64) -> Self {
        AdamState {
            m: vec![0.0; n],
            v: vec![0.0; n],
            step_count: 0,
            beta1,
            beta2,
            epsilon,
        }
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }

    /// Apply one descent step `phi -= lr * m_hat / (sqrt(v_hat) + eps)` in place.
    pub fn step(&mut self, phi: &mut [f64], grad: &[f64], lr: f64) {
        assert_eq!(phi.len(), self.m.len(), "parameter length mismatch");
        assert_eq!(grad.len(), self.m.len(), "gradient length mismatch");
        self.step_count += 1;
        let t = self.step_count as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        let (b1, b2, eps) = (self.beta1, self.beta2, self.epsilon);
        for (((p, &g), m), v) in phi
            .iter_mut()
            .zip(grad)
            .zip(self.m.iter_mut())
            .zip(self.v.iter_mut())
        {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
}

/// Functional form: returns the updated parameters and state.
pub fn adam_step(state: &AdamState, phi: &[f64], grad: &[f64], lr: f64) -> (Vec<f64>, AdamState) {
    let mut s = state.clone();
    let mut p = phi.to_vec();
    s.step(&mut p, grad, lr);
    (p, s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_each_coordinate_by_lr() {
        let s = AdamState::new(4);
        let phi = vec![1.0, -2.0, 0.5, 0.0];
        let g = vec![0.3, -7.0, 1e-3, 42.0];
        let (p, s2) = adam_step(&s, &phi, &g, 1e-3);
        for i in 0..4 {
            let d = phi[i] - p[i];
            assert!((d.abs() - 1e-3).abs() < 1e-3 * 1e-4, "{d}");
            assert_eq!(d.signum(), g[i].signum());
        }
        assert_eq!(s2.step_count, 1);
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let s = AdamState::new(3);
        let phi = vec![0.1, 0.2, 0.3];
        let (p, s2) = adam_step(&s, &phi, &[0.0; 3], 0.01);
        assert_eq!(p, phi);
        assert!(s2.m.iter().all(|&x| x == 0.0) && s2.v.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn two_steps_match_hand_recursion() {
        let (b1, b2, eps, lr) = (0.9f64, 0.999f64, 1e-8f64, 0.05f64);
        let g = 0.7f64;
        let mut phi = 2.0f64;
        // step 1
        let m1 = (1.0 - b1) * g;
        let v1 = (1.0 - b2) * g * g;
        phi -= lr * (m1 / (1.0 - b1)) / ((v1 / (1.0 - b2)).sqrt() + eps);
        // step 2
        let m2 = b1 * m1 + (1.0 - b1) * g;
        let v2 = b2 * v1 + (1.0 - b2) * g * g;
        phi -= lr * (m2 / (1.0 - b1 * b1)) / ((v2 / (1.0 - b2 * b2)).sqrt() + eps);

        let mut s = AdamState::new(1);
        let mut p = vec![2.0];
        s.step(&mut p, &[g], lr);
        s.step(&mut p, &[g], lr);
        assert!((p[0] - phi).abs() < 1e-12);
        assert!(s.v.iter().all(|&x| x >= 0.0));
    }
}
