//! Trainable parameterizations: an elementwise feature mask and a small
//! rectifier MLP.
//!
//! Parameters live outside the autodiff tape. Each training step binds them
//! as fresh leaves on a new [`Graph`], runs the forward pass, and reads the
//! leaf gradients back after `backward`.

use ndarray::{Array1, Array2, ArrayView2};
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::autodiff::{Graph, Var};
use crate::error::{Error, Result};
use crate::rng;

/// Variance of the mask initialization around 1.
pub const VEC_INIT_VARIANCE: f64 = 0.1;

/// `f(X) = theta ⊙ X`, one weight per column.
#[derive(Debug, Clone, PartialEq)]
pub struct VecParam {
    /// Stored as a `1 x p` row.
    pub theta: Array2<f64>,
}

impl VecParam {
    /// Draws `theta_j ~ N(1, 0.1)` from the init stream of `seed`.
    pub fn init(p: usize, seed: u64) -> Self {
        let mut rng = rng::stream(seed, rng::TAG_INIT);
        let normal = Normal::new(1.0, VEC_INIT_VARIANCE.sqrt()).expect("valid normal");
        Self {
            theta: Array2::from_shape_fn((1, p), |_| normal.sample(&mut rng)),
        }
    }

    pub fn from_theta(theta: &[f64]) -> Result<Self> {
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::invalid("theta has non-finite entries"));
        }
        Ok(Self {
            theta: Array2::from_shape_vec((1, theta.len()), theta.to_vec())
                .expect("row vector shape"),
        })
    }

    pub fn p(&self) -> usize {
        self.theta.ncols()
    }

    pub fn theta_vec(&self) -> Vec<f64> {
        self.theta.iter().copied().collect()
    }
}

/// Scales column `j` of `x` by `theta[j]` on the graph.
pub fn vec_forward(g: &mut Graph, theta: Var, x: Var) -> Result<Var> {
    g.mul_cols(x, theta)
}

/// One affine layer, `h W + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// `fan_in x fan_out`.
    pub weight: Array2<f64>,
    /// `1 x fan_out`.
    pub bias: Array2<f64>,
}

/// Affine layers with rectifiers between them; the last layer is affine only.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParam {
    pub layers: Vec<Layer>,
}

impl MlpParam {
    /// Glorot-uniform weights and zero biases for the widths
    /// `[input, hidden..., output]`.
    pub fn init(widths: &[usize], seed: u64) -> Result<Self> {
        if widths.len() < 2 || widths.contains(&0) {
            return Err(Error::invalid(format!("invalid MLP widths {widths:?}")));
        }
        let mut rng = rng::stream(seed, rng::TAG_INIT);
        let layers = widths
            .windows(2)
            .map(|w| {
                let bound = (6.0 / (w[0] + w[1]) as f64).sqrt();
                let dist = Uniform::new_inclusive(-bound, bound).expect("valid bound");
                Layer {
                    weight: Array2::from_shape_fn((w[0], w[1]), |_| dist.sample(&mut rng)),
                    bias: Array2::zeros((1, w[1])),
                }
            })
            .collect();
        Ok(Self { layers })
    }

    pub fn widths(&self) -> Vec<usize> {
        let mut w = vec![self.layers[0].weight.nrows()];
        w.extend(self.layers.iter().map(|l| l.weight.ncols()));
        w
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].weight.nrows()
    }

    pub fn output_width(&self) -> usize {
        self.layers.last().expect("at least one layer").weight.ncols()
    }
}

/// Output of a forward pass: the activations feeding the last layer and the
/// last layer's output.
#[derive(Debug, Clone, Copy)]
pub struct Forward {
    pub features: Var,
    pub output: Var,
}

/// Runs the MLP given its bound parameter leaves `[W0, b0, W1, b1, ...]`.
pub fn mlp_forward(g: &mut Graph, params: &[Var], x: Var) -> Result<Forward> {
    if params.len() < 2 || !params.len().is_multiple_of(2) {
        return Err(Error::invalid("MLP parameters must come in weight/bias pairs"));
    }
    let k = params.len() / 2;
    let mut h = x;
    for layer in 0..k {
        let z = g.matmul(h, params[2 * layer])?;
        let z = g.add_bias(z, params[2 * layer + 1])?;
        if layer + 1 == k {
            return Ok(Forward {
                features: h,
                output: z,
            });
        }
        h = g.relu(z);
    }
    unreachable!("loop returns on the last layer")
}

/// A named trainable tensor, as stored in checkpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorRecord {
    pub name: String,
    pub shape: [usize; 2],
    /// Row-major.
    pub values: Vec<f64>,
}

/// Either parameterization, behind one interface for the training loops.
#[derive(Debug, Clone, PartialEq)]
pub enum ParamSet {
    Vec(VecParam),
    Mlp(MlpParam),
}

impl ParamSet {
    pub fn tensors(&self) -> Vec<&Array2<f64>> {
        match self {
            ParamSet::Vec(v) => vec![&v.theta],
            ParamSet::Mlp(m) => m.layers.iter().flat_map(|l| [&l.weight, &l.bias]).collect(),
        }
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Array2<f64>> {
        match self {
            ParamSet::Vec(v) => vec![&mut v.theta],
            ParamSet::Mlp(m) => m
                .layers
                .iter_mut()
                .flat_map(|l| [&mut l.weight, &mut l.bias])
                .collect(),
        }
    }

    pub fn names(&self) -> Vec<String> {
        match self {
            ParamSet::Vec(_) => vec!["theta".into()],
            ParamSet::Mlp(m) => (0..m.layers.len())
                .flat_map(|k| [format!("layer{k}.weight"), format!("layer{k}.bias")])
                .collect(),
        }
    }

    /// Adds every tensor to the graph as a trainable leaf.
    pub fn bind(&self, g: &mut Graph) -> Vec<Var> {
        self.tensors().into_iter().map(|t| g.param(t.clone())).collect()
    }

    /// Forward pass on bound parameters. For the mask, `features` and
    /// `output` coincide.
    pub fn forward(&self, g: &mut Graph, vars: &[Var], x: Var) -> Result<Forward> {
        match self {
            ParamSet::Vec(_) => {
                let out = vec_forward(g, vars[0], x)?;
                Ok(Forward {
                    features: out,
                    output: out,
                })
            }
            ParamSet::Mlp(_) => mlp_forward(g, vars, x),
        }
    }

    /// Forward pass on plain values, without recording gradients.
    pub fn apply(&self, x: ArrayView2<'_, f64>) -> Result<(Array2<f64>, Array2<f64>)> {
        let mut g = Graph::new();
        let vars: Vec<Var> = self
            .tensors()
            .into_iter()
            .map(|t| g.constant(t.clone()))
            .collect();
        let xv = g.constant(x.to_owned());
        let f = self.forward(&mut g, &vars, xv)?;
        Ok((g.value(f.features).clone(), g.value(f.output).clone()))
    }

    pub fn to_records(&self) -> Vec<TensorRecord> {
        self.names()
            .into_iter()
            .zip(self.tensors())
            .map(|(name, t)| TensorRecord {
                name,
                shape: [t.nrows(), t.ncols()],
                values: t.iter().copied().collect(),
            })
            .collect()
    }

    /// Rebuilds a parameter set from checkpoint records. A single record
    /// named `theta` yields a mask; otherwise weight/bias pairs form an MLP.
    pub fn from_records(records: &[TensorRecord]) -> Result<Self> {
        let to_array = |r: &TensorRecord| {
            Array2::from_shape_vec((r.shape[0], r.shape[1]), r.values.clone())
                .map_err(|e| Error::invalid(format!("tensor `{}`: {e}", r.name)))
        };
        if let [only] = records {
            if only.name == "theta" {
                return Ok(ParamSet::Vec(VecParam {
                    theta: to_array(only)?,
                }));
            }
        }
        if records.is_empty() || !records.len().is_multiple_of(2) {
            return Err(Error::invalid("checkpoint must hold weight/bias pairs"));
        }
        let mut layers = Vec::new();
        for (k, pair) in records.chunks(2).enumerate() {
            if pair[0].name != format!("layer{k}.weight") || pair[1].name != format!("layer{k}.bias") {
                return Err(Error::invalid(format!(
                    "unexpected tensor names `{}`, `{}`",
                    pair[0].name, pair[1].name
                )));
            }
            let weight = to_array(&pair[0])?;
            let bias = to_array(&pair[1])?;
            if bias.nrows() != 1 || bias.ncols() != weight.ncols() {
                return Err(Error::invalid(format!("layer {k}: bias shape mismatch")));
            }
            if let Some(prev) = layers.last() {
                let prev: &Layer = prev;
                if prev.weight.ncols() != weight.nrows() {
                    return Err(Error::invalid(format!("layer {k}: shapes do not chain")));
                }
            }
            layers.push(Layer { weight, bias });
        }
        Ok(ParamSet::Mlp(MlpParam { layers }))
    }
}

/// Zeroes every entry with `|theta| <= upsilon`.
pub fn clip_params(theta: &Array1<f64>, upsilon: f64) -> Array1<f64> {
    theta.mapv(|t| if t.abs() <= upsilon { 0.0 } else { t })
}

/// In-place [`clip_params`] on any tensor.
pub fn clip_in_place(t: &mut Array2<f64>, upsilon: f64) {
    t.mapv_inplace(|v| if v.abs() <= upsilon { 0.0 } else { v });
}
