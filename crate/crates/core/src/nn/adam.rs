use serde::{Deserialize, Serialize};

use super::{NnError, Params, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Bias-corrected Adam. Moments are stored flat in the parameter visiting
/// order of the model being optimised.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub step_count: u64,
}

impl AdamState {
    pub fn new(config: AdamConfig, n_params: usize) -> Self {
        Self {
            config,
            first_moment: vec![0.0; n_params],
            second_moment: vec![0.0; n_params],
            step_count: 0,
        }
    }

    pub fn for_params<P: Params>(config: AdamConfig, params: &P) -> Self {
        Self::new(config, params.num_params())
    }

    pub fn step<P: Params>(&mut self, params: &mut P, grads: &P) -> Result<()> {
        let g = grads.flatten();
        if g.len() != self.first_moment.len() || params.num_params() != g.len() {
            return Err(NnError::Shape(format!(
                "optimizer holds {} moments, parameters {} and gradients {}",
                self.first_moment.len(),
                params.num_params(),
                g.len()
            )));
        }
        self.step_count += 1;
        let AdamConfig {
            lr,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let t = self.step_count as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        let m = &mut self.first_moment;
        let v = &mut self.second_moment;
        let mut i = 0;
        params.visit_mut(&mut |slice| {
            for p in slice.iter_mut() {
                let gi = g[i];
                m[i] = beta1 * m[i] + (1.0 - beta1) * gi;
                v[i] = beta2 * v[i] + (1.0 - beta2) * gi * gi;
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                *p -= lr * m_hat / (v_hat.sqrt() + epsilon);
                i += 1;
            }
        });
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Clone, Debug, PartialEq)]
    struct Scalar(Vec<f64>);

    impl Params for Scalar {
        fn visit(&self, f: &mut dyn FnMut(&[f64])) {
            f(&self.0)
        }
        fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64])) {
            f(&mut self.0)
        }
    }

    #[test]
    fn zero_gradient_is_fixed_point() {
        let mut p = Scalar(vec![1.0, -2.0, 3.0]);
        let before = p.clone();
        let mut adam = AdamState::for_params(AdamConfig::default(), &p);
        for _ in 0..10 {
            adam.step(&mut p, &Scalar(vec![0.0; 3])).unwrap();
        }
        assert_eq!(p, before);
        assert_eq!(adam.step_count, 10);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        for g in [1e-3, 0.5, -7.0] {
            let mut p = Scalar(vec![0.0]);
            let cfg = AdamConfig::default();
            let mut adam = AdamState::for_params(cfg, &p);
            adam.step(&mut p, &Scalar(vec![g])).unwrap();
            // m_hat = g, v_hat = g^2  =>  step = lr |g| / (|g| + eps).
            let expected = cfg.lr * g.abs() / (g.abs() + cfg.epsilon);
            assert!((p.0[0].abs() - expected).abs() < 1e-15);
            assert!((p.0[0].abs() - cfg.lr).abs() < 1e-8);
            assert_eq!(p.0[0].signum(), -g.signum());
        }
    }

    #[test]
    fn minimises_quadratic() {
        let mut p = Scalar(vec![1.0]);
        let cfg = AdamConfig {
            lr: 0.1,
            ..AdamConfig::default()
        };
        let mut adam = AdamState::for_params(cfg, &p);
        let mut trace = vec![p.0[0].abs()];
        for _ in 0..200 {
            let g = Scalar(vec![2.0 * p.0[0]]);
            adam.step(&mut p, &g).unwrap();
            trace.push(p.0[0].abs());
        }
        assert!(p.0[0].abs() < 1e-2, "final {}", p.0[0]);
        // Adam overshoots and rings around the minimum, so the decrease is
        // checked on the maxima of consecutive 20-step blocks after warm-up.
        let block_max: Vec<f64> = trace[20..]
            .chunks(20)
            .map(|w| w.iter().cloned().fold(0.0, f64::max))
            .collect();
        assert!(block_max.windows(2).all(|w| w[1] < w[0]), "{block_max:?}");
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mut p = Scalar(vec![0.0; 2]);
        let mut adam = AdamState::new(AdamConfig::default(), 3);
        assert!(adam.step(&mut p, &Scalar(vec![0.0; 2])).is_err());
    }
}
