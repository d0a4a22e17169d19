//! Adam optimizer. Two independent instances drive the minimax loop: the
//! solution network descends, the adversary ascends.

use crate::error::{FwanError, Result};

/// Direction of the parameter update.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Descend,
    Ascend,
}

/// Adam state with bias correction; canonical defaults for the moment
/// decay rates and epsilon.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Completed steps.
    pub t: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl AdamState {
    pub fn new(n_params: usize, lr: f64) -> Self {
        AdamState {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
        }
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }

    /// One Adam update. Descend subtracts the bias-corrected step, ascend
    /// adds its exact negation. A non-finite gradient leaves both the
    /// parameters and the optimizer state untouched.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64], direction: Direction) -> Result<()> {
        if params.len() != self.m.len() || grad.len() != self.m.len() {
            return Err(FwanError::Usage(format!(
                "adam_step length mismatch: params {}, grad {}, state {}",
                params.len(),
                grad.len(),
                self.m.len()
            )));
        }
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(FwanError::Domain {
                context: "adam_step",
                message: "gradient contains NaN or Inf".into(),
            });
        }
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        let sign = match direction {
            Direction::Descend => -1.0,
            Direction::Ascend => 1.0,
        };
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] += sign * (self.lr * m_hat / (v_hat.sqrt() + self.eps));
        }
        Ok(())
    }
}
