//! Adam with bias correction.

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First and second moment estimates for one parameter tensor.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
        }
    }
}

/// One Adam update at step `t >= 1`.
pub fn adam_step(params: &mut [f64], grads: &[f64], state: &mut AdamState, t: u32, cfg: &AdamConfig) {
    assert!(t >= 1, "Adam steps are numbered from 1");
    assert_eq!(params.len(), grads.len());
    let c1 = 1.0 - cfg.beta1.powi(t as i32);
    let c2 = 1.0 - cfg.beta2.powi(t as i32);
    for (((p, &g), m), v) in params.iter_mut().zip(grads).zip(&mut state.m).zip(&mut state.v) {
        *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
        *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = vec![1.0, -2.0];
        let mut s = AdamState::new(2);
        adam_step(&mut p, &[0.0, 0.0], &mut s, 1, &AdamConfig::default());
        assert_eq!(p, vec![1.0, -2.0]);
    }

    #[test]
    fn single_unit_step() {
        let cfg = AdamConfig::default();
        let mut p = vec![0.0];
        let mut s = AdamState::new(1);
        adam_step(&mut p, &[1.0], &mut s, 1, &cfg);
        assert!((p[0] + 0.01 / (1.0 + 1e-8)).abs() < 1e-15);
    }

    #[test]
    fn constant_gradient_step_tends_to_learning_rate() {
        let cfg = AdamConfig::default();
        let mut p = vec![0.0];
        let mut s = AdamState::new(1);
        let mut last = 0.0;
        for t in 1..=2000 {
            let before = p[0];
            adam_step(&mut p, &[-3.0], &mut s, t, &cfg);
            last = p[0] - before;
        }
        assert!((last - 0.01).abs() < 1e-6);
    }
}
