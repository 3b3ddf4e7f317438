//! Rank-based dependence estimators, FOCI feature selection, and a
//! differentiable relaxation of the conditional dependence coefficient with
//! the training loops built on it.

pub mod autodiff;
pub mod datasets;
pub mod error;
pub mod eval;
pub mod foci;
pub mod models;
pub mod optim;
pub mod presets;
pub mod rank;
pub mod rng;
pub mod soft;
pub mod training;

pub use autodiff::{Graph, Var};
pub use error::{Error, Result};
pub use foci::{foci_order, foci_select, SelectionResult, StopReason};
pub use models::{clip_params, MlpParam, ParamSet, VecParam};
pub use optim::{Optimizer, OptimizerKind};
pub use presets::Preset;
pub use rank::{compute_ranks, nearest_neighbors, q_n_p_n, t_n, xi_n, DataMatrix, NeighborIndex, RankVector};
pub use soft::{t_n_beta, t_n_beta_parts, t_n_beta_value, SoftNeighborMatrices};
