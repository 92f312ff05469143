use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Adam,
    Sgd,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            kind: OptimizerKind::Adam,
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr.is_finite() && self.lr >= 0.0) {
            return Err(invalid(format!("learning rate must be non-negative, got {}", self.lr)));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(invalid("Adam betas must lie in [0, 1)"));
        }
        if !(self.eps > 0.0) {
            return Err(invalid("Adam epsilon must be positive"));
        }
        Ok(())
    }
}

/// Moment estimates of one parameter block.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamBlock {
    /// Learning rate used for this block.
    pub lr: f64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

/// Optimizer state over a fixed list of parameter blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerState {
    pub config: OptimizerConfig,
    pub step: usize,
    pub blocks: Vec<ParamBlock>,
    /// Loss passed to each step.
    pub loss_history: Vec<f64>,
}

impl OptimizerState {
    /// One block per `(learning rate, length)` pair.
    pub fn new(config: OptimizerConfig, blocks: &[(f64, usize)]) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            step: 0,
            blocks: blocks
                .iter()
                .map(|&(lr, n)| ParamBlock {
                    lr,
                    m: vec![0.0; n],
                    v: vec![0.0; n],
                })
                .collect(),
            loss_history: Vec::new(),
        })
    }
}

/// Applies one bias-corrected Adam update (or plain gradient descent) to
/// every block and records `loss`.
pub fn adam_step(state: &mut OptimizerState, params: &mut [&mut [f64]], grads: &[&[f64]], loss: f64) -> Result<()> {
    if params.len() != state.blocks.len() || grads.len() != state.blocks.len() {
        return Err(invalid(format!(
            "expected {} parameter blocks, got {} parameters and {} gradients",
            state.blocks.len(),
            params.len(),
            grads.len()
        )));
    }
    for (i, ((p, g), b)) in params.iter().zip(grads).zip(&state.blocks).enumerate() {
        if p.len() != b.m.len() || g.len() != b.m.len() {
            return Err(invalid(format!(
                "block {i}: {} parameters and {} gradients for a block of {}",
                p.len(),
                g.len(),
                b.m.len()
            )));
        }
    }
    let c = &state.config;
    let t = (state.step + 1) as i32;
    let correct1 = 1.0 - c.beta1.powi(t);
    let correct2 = 1.0 - c.beta2.powi(t);
    for ((p, g), b) in params.iter_mut().zip(grads).zip(state.blocks.iter_mut()) {
        match c.kind {
            OptimizerKind::Sgd => {
                for (x, gi) in p.iter_mut().zip(g.iter()) {
                    *x -= b.lr * gi;
                }
            }
            OptimizerKind::Adam => {
                for (((x, gi), m), v) in p.iter_mut().zip(g.iter()).zip(b.m.iter_mut()).zip(b.v.iter_mut()) {
                    *m = c.beta1 * *m + (1.0 - c.beta1) * gi;
                    *v = c.beta2 * *v + (1.0 - c.beta2) * gi * gi;
                    let m_hat = *m / correct1;
                    let v_hat = *v / correct2;
                    *x -= b.lr * m_hat / (v_hat.sqrt() + c.eps);
                }
            }
        }
    }
    state.step += 1;
    state.loss_history.push(loss);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state(n: usize) -> OptimizerState {
        OptimizerState::new(OptimizerConfig::default(), &[(1e-3, n)]).unwrap()
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut s = state(3);
        let mut p = vec![1.0, -2.0, 0.5];
        let before = p.clone();
        adam_step(&mut s, &mut [&mut p], &[&[0.0; 3]], 1.0).unwrap();
        assert_eq!(p, before);
        assert_eq!(s.step, 1);
        assert_eq!(s.loss_history, vec![1.0]);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut s = state(3);
        let mut p = vec![0.0; 3];
        adam_step(&mut s, &mut [&mut p], &[&[3.0, -0.01, 250.0]], 0.0).unwrap();
        for (x, sign) in p.iter().zip([-1.0, 1.0, -1.0]) {
            assert!((x - sign * 1e-3).abs() < 1e-8, "{x}");
        }
    }

    #[test]
    fn steps_are_reproducible() {
        let run = || {
            let mut s = state(4);
            let mut p = vec![0.3, -0.1, 2.0, 0.0];
            for k in 0..50 {
                let g: Vec<f64> = p.iter().map(|x| 2.0 * x + 0.01 * k as f64).collect();
                adam_step(&mut s, &mut [&mut p], &[&g], 0.0).unwrap();
            }
            p
        };
        let (a, b) = (run(), run());
        assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let mut s = state(3);
        let mut p = vec![0.0; 2];
        assert!(adam_step(&mut s, &mut [&mut p], &[&[0.0; 2]], 0.0).is_err());
        let mut p = vec![0.0; 3];
        assert!(adam_step(&mut s, &mut [&mut p], &[], 0.0).is_err());
        assert_eq!(s.step, 0);
    }

    #[test]
    fn sgd_is_plain_descent() {
        let config = OptimizerConfig {
            kind: OptimizerKind::Sgd,
            ..OptimizerConfig::default()
        };
        let mut s = OptimizerState::new(config, &[(0.1, 2)]).unwrap();
        let mut p = vec![1.0, 1.0];
        adam_step(&mut s, &mut [&mut p], &[&[2.0, -1.0]], 0.0).unwrap();
        assert!((p[0] - 0.8).abs() < 1e-15 && (p[1] - 1.1).abs() < 1e-15);
    }
}
