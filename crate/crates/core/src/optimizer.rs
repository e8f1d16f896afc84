//! Adam over the trainable parameter slots, with inverse-time learning-rate
//! decay `lr_t = lr0 / (1 + lambda * t)` (`t` = completed steps).

use crate::{Error, Result};

/// Moment buffers and hyperparameters for one training phase.
///
/// The buffers cover the trainable view only; frozen slots never appear
/// here, so they are untouched by construction.
#[derive(Clone, Debug)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub lr0: f64,
    pub decay: f64,
}

impl AdamState {
    pub fn new(n: usize, lr0: f64, decay: f64) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            lr0,
            decay,
        }
    }

    /// Steps taken so far.
    pub fn steps(&self) -> u64 {
        self.t
    }

    /// Learning rate after `t` completed steps; the first step uses `lr0`.
    pub fn effective_lr(&self, t: u64) -> f64 {
        self.lr0 / (1.0 + self.decay * t as f64)
    }

    /// One Adam update on the trainable view. Returns the learning rate
    /// used. A non-finite gradient is a training fault.
    pub fn step(&mut self, theta: &mut [f64], grad: &[f64]) -> Result<f64> {
        if theta.len() != self.m.len() || grad.len() != self.m.len() {
            return Err(Error::config(format!(
                "adam state sized for {} slots, got {} params and {} gradients",
                self.m.len(),
                theta.len(),
                grad.len()
            )));
        }
        if let Some((i, g)) = grad.iter().enumerate().find(|(_, g)| !g.is_finite()) {
            return Err(Error::Numerical(format!(
                "training fault: non-finite gradient {g} at trainable slot {i}"
            )));
        }
        let lr = self.effective_lr(self.t);
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for ((th, &g), (m, v)) in theta
            .iter_mut()
            .zip(grad)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *th -= lr * m_hat / (v_hat.sqrt() + self.epsilon);
        }
        Ok(lr)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_step_closed_form() {
        // from theta=0 with g=1: m_hat = v_hat = 1, so the step is
        // -lr * 1/(1 + eps)
        let mut adam = AdamState::new(1, 0.1, 0.0);
        let mut theta = [0.0];
        adam.step(&mut theta, &[1.0]).unwrap();
        let expect = -0.1 / (1.0 + 1e-8);
        assert!((theta[0] - expect).abs() < 1e-15, "{}", theta[0]);
    }

    #[test]
    fn zero_gradient_leaves_parameters_unchanged() {
        let mut adam = AdamState::new(3, 0.05, 1e-4);
        let mut theta = [1.0, -2.0, 0.25];
        for _ in 0..10 {
            adam.step(&mut theta, &[0.0, 0.0, 0.0]).unwrap();
        }
        assert_eq!(theta, [1.0, -2.0, 0.25]);
    }

    #[test]
    fn inverse_time_decay_halves_at_expected_step() {
        let adam = AdamState::new(1, 3e-4, 1e-4);
        assert_eq!(adam.effective_lr(0), 3e-4);
        assert!((adam.effective_lr(10_000) - 1.5e-4).abs() < 1e-20);
    }

    #[test]
    fn non_finite_gradient_is_a_fault() {
        let mut adam = AdamState::new(1, 0.1, 0.0);
        let mut theta = [0.0];
        assert!(adam.step(&mut theta, &[f64::NAN]).is_err());
        assert!(adam.step(&mut theta, &[f64::INFINITY]).is_err());
    }

    #[test]
    fn quadratic_loss_converges_and_matches_reference() {
        // independent scripted Adam alongside the implementation
        let mut adam = AdamState::new(1, 0.01, 0.0);
        let mut theta = [0.0f64];
        let (mut rm, mut rv, mut rth) = (0.0f64, 0.0f64, 0.0f64);
        for t in 1..=5000u64 {
            let g = 2.0 * (theta[0] - 3.0);
            adam.step(&mut theta, &[g]).unwrap();

            let rg = 2.0 * (rth - 3.0);
            rm = 0.9 * rm + 0.1 * rg;
            rv = 0.999 * rv + 0.001 * rg * rg;
            let mh = rm / (1.0 - 0.9f64.powi(t as i32));
            let vh = rv / (1.0 - 0.999f64.powi(t as i32));
            rth -= 0.01 * mh / (vh.sqrt() + 1e-8);
        }
        assert!((theta[0] - 3.0).abs() <= 1e-3, "theta = {}", theta[0]);
        assert!((theta[0] - rth).abs() <= 1e-12, "diverged from reference");
    }

    #[test]
    fn update_is_permutation_equivariant() {
        // permuting slots (with their gradients and moments) permutes the
        // update and nothing else
        let mut a = AdamState::new(3, 0.01, 1e-4);
        let mut b = AdamState::new(3, 0.01, 1e-4);
        let mut ta = [0.3, -0.7, 1.1];
        let mut tb = [1.1, 0.3, -0.7]; // rotation of ta
        let ga = [0.5, -0.25, 2.0];
        let gb = [2.0, 0.5, -0.25];
        for _ in 0..5 {
            a.step(&mut ta, &ga).unwrap();
            b.step(&mut tb, &gb).unwrap();
        }
        assert_eq!(ta[0], tb[1]);
        assert_eq!(ta[1], tb[2]);
        assert_eq!(ta[2], tb[0]);
    }
}
