//! Resilient backpropagation (iRPROP- variant).
//!
//! Each real parameter keeps its own step size. Steps grow while the
//! gradient sign holds, shrink on a sign flip; on a flip the stored
//! gradient is zeroed and the parameter is left alone for one iteration.
//! Only gradient signs matter, so any positive scaling of the cost is
//! equivalent.

/// Step-size schedule constants.
#[derive(Debug, Clone)]
pub struct RpropConfig {
    pub delta0: f64,
    pub eta_plus: f64,
    pub eta_minus: f64,
    pub delta_min: f64,
    pub delta_max: f64,
}

impl Default for RpropConfig {
    fn default() -> Self {
        Self {
            delta0: 0.07,
            eta_plus: 1.2,
            eta_minus: 0.5,
            delta_min: 1e-6,
            delta_max: 50.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Rprop {
    cfg: RpropConfig,
    delta: Vec<f64>,
    prev_grad: Vec<f64>,
}

impl Rprop {
    pub fn new(n_params: usize, cfg: RpropConfig) -> Self {
        Self {
            delta: vec![cfg.delta0; n_params],
            prev_grad: vec![0.0; n_params],
            cfg,
        }
    }

    /// One update over all parameters given the current batch gradient.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        debug_assert_eq!(params.len(), grad.len());
        debug_assert_eq!(params.len(), self.delta.len());
        for i in 0..params.len() {
            let g = grad[i];
            let prod = self.prev_grad[i] * g;
            if prod > 0.0 {
                self.delta[i] = (self.delta[i] * self.cfg.eta_plus).min(self.cfg.delta_max);
                params[i] -= g.signum() * self.delta[i];
                self.prev_grad[i] = g;
            } else if prod < 0.0 {
                self.delta[i] = (self.delta[i] * self.cfg.eta_minus).max(self.cfg.delta_min);
                self.prev_grad[i] = 0.0;
            } else {
                if g != 0.0 {
                    params[i] -= g.signum() * self.delta[i];
                }
                self.prev_grad[i] = g;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimizes_separable_quadratic() {
        // f(p) = sum (p_i - c_i)^2 with very different curvatures per axis;
        // sign-only updates must still land near c.
        let c = [3.0, -120.0, 0.004];
        let scale = [1.0, 40.0, 0.001];
        let mut p = vec![0.0; 3];
        let mut opt = Rprop::new(3, RpropConfig::default());
        for _ in 0..300 {
            let grad: Vec<f64> = (0..3).map(|i| 2.0 * scale[i] * (p[i] - c[i])).collect();
            opt.step(&mut p, &grad);
        }
        for i in 0..3 {
            assert!(
                (p[i] - c[i]).abs() < 1e-3,
                "axis {i}: {} vs {}",
                p[i],
                c[i]
            );
        }
    }

    #[test]
    fn sign_flip_shrinks_step_and_skips_update() {
        let mut opt = Rprop::new(1, RpropConfig::default());
        let mut p = vec![0.0];
        opt.step(&mut p, &[1.0]);
        let after_first = p[0];
        assert!((after_first + 0.07).abs() < 1e-15);
        // Opposite sign: parameter must stay put, next step must be smaller.
        opt.step(&mut p, &[-1.0]);
        assert_eq!(p[0], after_first);
        opt.step(&mut p, &[-1.0]);
        // prev_grad was zeroed, so this counts as "no history": step at the
        // shrunk size 0.035.
        assert!((p[0] - (after_first + 0.035)).abs() < 1e-15, "{}", p[0]);
    }

    #[test]
    fn step_saturates_at_bounds() {
        let cfg = RpropConfig::default();
        let mut opt = Rprop::new(1, cfg.clone());
        let mut p = vec![0.0];
        for _ in 0..200 {
            opt.step(&mut p, &[-1.0]);
        }
        // After many same-sign steps the per-step movement is delta_max.
        let before = p[0];
        opt.step(&mut p, &[-1.0]);
        assert!((p[0] - before - cfg.delta_max).abs() < 1e-12);
    }
}
