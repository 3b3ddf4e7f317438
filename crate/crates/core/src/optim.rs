//! Adam and SGD with L2 weight decay folded into the gradient.

use ndarray::{Array2, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Adam,
    Sgd,
}

#[derive(Debug, Clone)]
pub struct Optimizer {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<Array2<f64>>,
    v: Vec<Array2<f64>>,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, learning_rate: f64, weight_decay: f64) -> Self {
        Self {
            kind,
            learning_rate,
            weight_decay,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn adam(learning_rate: f64, weight_decay: f64) -> Self {
        Self::new(OptimizerKind::Adam, learning_rate, weight_decay)
    }

    pub fn sgd(learning_rate: f64, weight_decay: f64) -> Self {
        Self::new(OptimizerKind::Sgd, learning_rate, weight_decay)
    }

    /// Number of updates applied so far.
    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Applies one update. Parameters are left untouched when any gradient
    /// is not finite.
    pub fn step(&mut self, params: &mut [&mut Array2<f64>], grads: &[Array2<f64>]) -> Result<()> {
        if params.len() != grads.len() {
            return Err(Error::invalid(format!(
                "{} parameters but {} gradients",
                params.len(),
                grads.len()
            )));
        }
        for (k, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.dim() != g.dim() {
                return Err(Error::invalid(format!("gradient {k} has the wrong shape")));
            }
            if g.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numerical(format!("non-finite gradient in tensor {k}")));
            }
        }
        if self.m.is_empty() {
            self.m = params.iter().map(|p| Array2::zeros(p.dim())).collect();
            self.v = self.m.clone();
        }
        self.step += 1;
        let (lr, wd) = (self.learning_rate, self.weight_decay);
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, g) in params.iter_mut().zip(grads) {
                    Zip::from(&mut **p)
                        .and(g)
                        .for_each(|w, &gw| *w -= lr * (gw + wd * *w));
                }
            }
            OptimizerKind::Adam => {
                let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
                let c1 = 1.0 - b1.powi(self.step as i32);
                let c2 = 1.0 - b2.powi(self.step as i32);
                for ((p, g), (m, v)) in params
                    .iter_mut()
                    .zip(grads)
                    .zip(self.m.iter_mut().zip(self.v.iter_mut()))
                {
                    Zip::from(&mut **p).and(g).and(m).and(v).for_each(|w, &gw, mw, vw| {
                        let gt = gw + wd * *w;
                        *mw = b1 * *mw + (1.0 - b1) * gt;
                        *vw = b2 * *vw + (1.0 - b2) * gt * gt;
                        let mhat = *mw / c1;
                        let vhat = *vw / c2;
                        *w -= lr * mhat / (vhat.sqrt() + eps);
                    });
                }
            }
        }
        Ok(())
    }
}
