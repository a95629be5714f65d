//! Adam with optional elementwise clipping.

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
}

impl AdamState {
    /// Fresh state with `β₁ = 0.9`, `β₂ = 0.999`, `eps = 1e-8`.
    pub fn new(len: usize, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; len],
            v: vec![0.0; len],
            step: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn first_moment(&self) -> &[f64] {
        &self.m
    }

    pub fn second_moment(&self) -> &[f64] {
        &self.v
    }

    /// One bias-corrected update. With `clip = Some((lo, hi))` the gradient is
    /// clamped to `[lo, hi]` before the update and the parameters after it.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64], clip: Option<(f64, f64)>) {
        assert_eq!(params.len(), self.m.len(), "parameter length changed");
        assert_eq!(grad.len(), self.m.len(), "gradient length mismatch");
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for k in 0..params.len() {
            let g = match clip {
                Some((lo, hi)) => grad[k].clamp(lo, hi),
                None => grad[k],
            };
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g;
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[k] / c1;
            let v_hat = self.v[k] / c2;
            params[k] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            if let Some((lo, hi)) = clip {
                params[k] = params[k].clamp(lo, hi);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut adam = AdamState::new(3, 0.01);
        let mut p = vec![0.5, -0.2, 3.0];
        adam.step(&mut p, &[0.0; 3], None);
        assert_eq!(p, vec![0.5, -0.2, 3.0]);
        assert_eq!(adam.steps(), 1);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut adam = AdamState::new(1, 0.01);
        let mut p = vec![0.0];
        adam.step(&mut p, &[1.0], None);
        // m̂ = 1 and v̂ = 1 after bias correction.
        assert!((p[0] + 0.01 / (1.0 + 1e-8)).abs() < 1e-15);
    }

    #[test]
    fn clipping_clamps_parameters() {
        let mut adam = AdamState::new(1, 0.01);
        let mut p = vec![0.999];
        adam.step(&mut p, &[-5.0], Some((-1.0, 1.0)));
        assert_eq!(p[0], 1.0);
        assert!((adam.first_moment()[0] + 0.1).abs() < 1e-15);
    }
}
