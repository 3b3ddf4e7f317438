//! Named experiment setups: a dataset generator paired with the training
//! configuration that goes with it.
//!
//! All of them keep `beta = 5` and `upsilon = 0.1`. The optimization knobs
//! (learning rate, weight decay, batch size, epochs) were picked so each run
//! finishes in seconds on one core.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::datasets::{self, Dataset, FairnessOptions, SpuriousOptions, ToyKind};
use crate::error::{Error, Result};
use crate::optim::OptimizerKind;
use crate::training::{ExperimentConfig, Objective, ParamKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// Mask on toy 1: `sin(X1) + 2 sin(X2) + 3 sin(X3)`.
    Toy1,
    /// One-hidden-layer network on toy 2.
    Toy2,
    /// Two-hidden-layer network on toy 3.
    Toy3,
    /// Mask on the 240-column functional dataset.
    Functional,
    /// dF2 network on the spurious-correlation data.
    Spurious,
    /// dF3 mask on the fairness data.
    Fairness,
    /// dF1 mask on the fairness data, the unconstrained reference for
    /// [`Preset::Fairness`].
    FairnessBaseline,
}

impl Preset {
    pub const ALL: [Preset; 7] = [
        Preset::Toy1,
        Preset::Toy2,
        Preset::Toy3,
        Preset::Functional,
        Preset::Spurious,
        Preset::Fairness,
        Preset::FairnessBaseline,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Toy1 => "toy1",
            Preset::Toy2 => "toy2",
            Preset::Toy3 => "toy3",
            Preset::Functional => "functional",
            Preset::Spurious => "spurious",
            Preset::Fairness => "fairness",
            Preset::FairnessBaseline => "fairness_baseline",
        }
    }

    /// Generates the (unstandardized) dataset for `seed`.
    pub fn dataset(self, seed: u64) -> Result<Dataset> {
        match self {
            Preset::Toy1 => datasets::gen_toy(ToyKind::Toy1, seed),
            Preset::Toy2 => datasets::gen_toy(ToyKind::Toy2, seed),
            Preset::Toy3 => datasets::gen_toy(ToyKind::Toy3, seed),
            Preset::Functional => datasets::gen_functional(seed),
            Preset::Spurious => datasets::gen_spurious(seed, SpuriousOptions::default()),
            Preset::Fairness | Preset::FairnessBaseline => {
                datasets::gen_fairness(seed, FairnessOptions::default())
            }
        }
    }

    pub fn config(self, seed: u64) -> ExperimentConfig {
        let mask = ParamKind::Vec;
        let mut cfg = match self {
            Preset::Toy1 => ExperimentConfig::new(Objective::Df1, mask),
            Preset::Toy2 => ExperimentConfig::new(Objective::Df1, ParamKind::Mlp { hidden: vec![20] }),
            Preset::Toy3 => ExperimentConfig::new(Objective::Df1, ParamKind::Mlp { hidden: vec![20, 20] }),
            Preset::Functional => ExperimentConfig::new(Objective::Df1, mask),
            Preset::Spurious => ExperimentConfig::new(Objective::Df2, ParamKind::Mlp { hidden: vec![16] }),
            Preset::Fairness => ExperimentConfig::new(Objective::Df3, mask),
            Preset::FairnessBaseline => ExperimentConfig::new(Objective::Df1, mask),
        };
        cfg.seed = seed;
        match self {
            Preset::Toy1 | Preset::Toy2 | Preset::Toy3 => {
                cfg.learning_rate = 5e-3;
                cfg.weight_decay = 1e-2;
                cfg.batch_size = Some(256);
                cfg.epochs = 300;
            }
            Preset::Functional => {
                cfg.learning_rate = 5e-3;
                cfg.weight_decay = 2.0;
                cfg.batch_size = None;
                cfg.epochs = 1000;
            }
            Preset::Spurious => {
                cfg.optimizer = OptimizerKind::Sgd;
                cfg.learning_rate = 5e-2;
                cfg.weight_decay = 1e-4;
                cfg.batch_size = Some(256);
                cfg.epochs = 100;
                cfg.eta = 1.0;
            }
            Preset::Fairness | Preset::FairnessBaseline => {
                cfg.learning_rate = 5e-3;
                cfg.weight_decay = 5e-2;
                cfg.batch_size = Some(256);
                cfg.epochs = 600;
            }
        }
        cfg
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Preset::ALL.iter().map(|p| p.name()).collect();
                Error::invalid(format!("unknown preset `{s}`; expected one of {}", names.join(", ")))
            })
    }
}
