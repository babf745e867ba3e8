//! Adaptive-moment optimizer with decoupled weight decay (AdamW).
//!
//! Updates are applied per parameter slice so sparse embedding rows only
//! pay for the rows a batch touched. Decay is applied directly to the
//! parameters and never enters the moment estimates:
//!
//! `θ ← θ·(1 − lr·wd) − lr·m̂ / (√v̂ + ε)`

#[derive(Debug, Clone, PartialEq)]
pub struct AdamW {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: u64,
}

impl AdamW {
    pub fn new(learning_rate: f64, weight_decay: f64) -> Self {
        AdamW {
            learning_rate,
            weight_decay,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
        }
    }

    /// Advances the shared step counter used for bias correction. Call once
    /// per optimizer step, before the slice updates of that step.
    pub fn begin_step(&mut self) {
        self.step += 1;
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Multiplier applied to every updated parameter by the decay term.
    pub fn decay_factor(&self) -> f64 {
        1.0 - self.learning_rate * self.weight_decay
    }

    pub fn update(&self, params: &mut [f64], grad: &[f64], m: &mut [f64], v: &mut [f64]) {
        debug_assert!(self.step > 0, "begin_step must be called first");
        let t = self.step as i32;
        let bc1 = 1.0 - libm::pow(self.beta1, f64::from(t));
        let bc2 = 1.0 - libm::pow(self.beta2, f64::from(t));
        let decay = self.decay_factor();
        for (((p, &g), m), v) in params.iter_mut().zip(grad).zip(m.iter_mut()).zip(v.iter_mut()) {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p = *p * decay - self.learning_rate * m_hat / (libm::sqrt(v_hat) + self.epsilon);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decay_is_decoupled_from_moments() {
        let mut opt = AdamW::new(0.01, 0.1);
        opt.begin_step();
        let mut params = [0.5, -2.0, 3.25];
        let before = params;
        let (mut m, mut v) = ([0.0; 3], [0.0; 3]);
        opt.update(&mut params, &[0.0; 3], &mut m, &mut v);
        for (p, b) in params.iter().zip(before) {
            assert_eq!(*p, b * (1.0 - 0.01 * 0.1));
        }
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        // With bias correction the first Adam step has magnitude ≈ lr.
        let mut opt = AdamW::new(0.1, 0.0);
        opt.begin_step();
        let mut p = [1.0];
        opt.update(&mut p, &[4.0], &mut [0.0], &mut [0.0]);
        assert!((p[0] - 0.9).abs() < 1e-6);
    }

    #[test]
    fn minimizes_a_quadratic() {
        let mut opt = AdamW::new(0.05, 0.0);
        let (mut m, mut v) = ([0.0; 2], [0.0; 2]);
        let mut x = [3.0, -4.0];
        for _ in 0..2000 {
            opt.begin_step();
            let g = [2.0 * (x[0] - 1.0), 2.0 * (x[1] + 2.0)];
            opt.update(&mut x, &g, &mut m, &mut v);
        }
        assert!((x[0] - 1.0).abs() < 1e-3 && (x[1] + 2.0).abs() < 1e-3);
    }
}
