use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Bias-corrected Adam.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(lr: f64, num_params: usize) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; num_params],
            v: vec![0.0; num_params],
            t: 0,
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.t
    }

    /// Applies one update; `step` is only used to label errors.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64], step: usize) -> Result<()> {
        if grads.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFiniteGradient { step });
        }
        crate::error::check_len("Adam gradient", self.m.len(), grads.len())?;
        crate::error::check_len("Adam parameters", self.m.len(), params.len())?;
        self.t += 1;
        let t = self.t as i32;
        let c1 = 1.0 - libm::pow(self.beta1, t as f64);
        let c2 = 1.0 - libm::pow(self.beta2, t as f64);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let mh = self.m[i] / c1;
            let vh = self.v[i] / c2;
            params[i] -= self.lr * mh / (libm::sqrt(vh) + self.eps);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_lr() {
        let mut adam = Adam::new(0.1, 2);
        let mut p = vec![1.0, -1.0];
        adam.step(&mut p, &[3.0, -0.5], 0).unwrap();
        assert!((p[0] - 0.9).abs() < 1e-7);
        assert!((p[1] + 0.9).abs() < 1e-7);
    }

    #[test]
    fn minimises_quadratic() {
        let mut adam = Adam::new(0.05, 1);
        let mut p = vec![5.0];
        for s in 0..2000 {
            let g = 2.0 * (p[0] - 2.0);
            adam.step(&mut p, &[g], s).unwrap();
        }
        assert!((p[0] - 2.0).abs() < 1e-3);
    }

    #[test]
    fn rejects_non_finite() {
        let mut adam = Adam::new(0.1, 1);
        let mut p = vec![0.0];
        assert_eq!(adam.step(&mut p, &[f64::NAN], 7), Err(Error::NonFiniteGradient { step: 7 }));
        assert_eq!(p[0], 0.0);
    }
}
