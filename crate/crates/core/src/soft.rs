//! The differentiable relaxation `T_{n,beta}` of the conditional dependence
//! estimator.
//!
//! Hard nearest-neighbour rank lookups `r_{N(i)}` and `r_{M(i)}` are replaced
//! by softmax-weighted rank averages `r^T S_i` and `r^T U_i`. `S` depends only
//! on the conditioning columns, which never carry parameters, so it and the
//! whole denominator are constants; gradients flow through `U` alone.

use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::autodiff::{self, Graph, Var, EPS_MASK};
use crate::error::{Error, Result};
use crate::rank::{compute_ranks, nearest_neighbors_tagged, DataMatrix, RankVector};
use crate::rng;

/// The soft neighbour matrices behind one evaluation of the estimator.
#[derive(Debug, Clone)]
pub struct SoftNeighborMatrices {
    /// Built from the conditioning columns; absent in the unconditional form.
    pub s_beta: Option<Array2<f64>>,
    /// Node holding the soft neighbour matrix of the joint columns.
    pub u_beta: Var,
    pub beta: f64,
    /// Diagonal offset used for `U`.
    pub lambda_mask: f64,
    pub eps_mask: f64,
}

/// A graph node for the estimator together with its scaled numerator and
/// denominator.
#[derive(Debug, Clone)]
pub struct SoftEstimate {
    pub value: Var,
    pub q_n_beta: f64,
    pub p_n_beta: f64,
    pub matrices: SoftNeighborMatrices,
}

/// Adds `T_{n,beta}(y, Z | X)` to the graph. `z` is the (usually trainable)
/// node; `x` is a constant conditioning matrix, `None` for the unconditional
/// form.
pub fn t_n_beta(
    g: &mut Graph,
    ranks: &RankVector,
    z: Var,
    x: Option<ArrayView2<'_, f64>>,
    beta: f64,
) -> Result<Var> {
    Ok(t_n_beta_parts(g, ranks, z, x, beta)?.value)
}

/// As [`t_n_beta`], also returning the soft matrices and `Q_{n,beta}`,
/// `P_{n,beta}`.
pub fn t_n_beta_parts(
    g: &mut Graph,
    ranks: &RankVector,
    z: Var,
    x: Option<ArrayView2<'_, f64>>,
    beta: f64,
) -> Result<SoftEstimate> {
    let n = ranks.len();
    if n < 2 {
        return Err(Error::InsufficientSamples(n));
    }
    let (zn, zq) = g.shape(z);
    if zn != n {
        return Err(Error::invalid(format!("Z has {zn} rows, ranks have {n}")));
    }
    if zq == 0 {
        return Err(Error::invalid("Z must have at least one column"));
    }
    if ranks.r_tied.iter().all(|&v| v == n) {
        return Err(Error::DegenerateResponse);
    }
    let x = x.filter(|x| x.ncols() > 0);
    if let Some(x) = &x {
        if x.nrows() != n {
            return Err(Error::invalid(format!("X has {} rows, ranks have {n}", x.nrows())));
        }
    }

    let r = Array1::from_iter(ranks.r.iter().map(|&v| v as f64));
    let r_col = r.clone().insert_axis(Axis(1));

    let joint = match &x {
        Some(x) => {
            let xc = g.constant(x.to_owned());
            g.concat_cols(xc, z)?
        }
        None => z,
    };
    let m = g.pairwise_dist(joint);
    let lambda_mask = autodiff::mask_offset(g.value(m).view());
    let u = g.soft_neighbors(m, beta)?;
    let ur = g.matvec_const(u, r.clone())?;
    let mins = g.min_const(ur, r_col)?;
    let s1 = g.sum(mins);

    let nf = n as f64;
    let (value, num_const, den, scale, s_beta) = match &x {
        Some(x) => {
            check_conditional_denominator(ranks, x.view())?;
            let s = autodiff::soft_neighbor_weights(autodiff::pairwise_distances(x.view()).view(), beta)?;
            let sr = s.dot(&r);
            let c1: f64 = r.iter().zip(&sr).map(|(&ri, &si)| ri.min(si)).sum();
            let den: f64 = r.iter().sum::<f64>() - c1;
            if !(den > 0.0) {
                return Err(Error::DegenerateDenominator);
            }
            let value = g.affine(s1, 1.0 / den, -c1 / den);
            (value, c1, den, nf * nf, Some(s))
        }
        None => {
            let l2: f64 = ranks.l.iter().map(|&l| (l * l) as f64).sum();
            let den: f64 = ranks.l.iter().map(|&l| (l * (n - l)) as f64).sum();
            if !(den > 0.0) {
                return Err(Error::DegenerateDenominator);
            }
            let value = g.affine(s1, nf / den, -l2 / den);
            (value, l2, den, nf * nf * nf, None)
        }
    };
    let s1v = g.scalar(s1);
    let numerator = match &x {
        Some(_) => s1v - num_const,
        None => nf * s1v - num_const,
    };
    let v = g.scalar(value);
    if !v.is_finite() {
        return Err(Error::Numerical(format!("estimator evaluated to {v}")));
    }
    Ok(SoftEstimate {
        value,
        q_n_beta: numerator / scale,
        p_n_beta: den / scale,
        matrices: SoftNeighborMatrices {
            s_beta,
            u_beta: u,
            beta,
            lambda_mask,
            eps_mask: EPS_MASK,
        },
    })
}

/// The hard estimator's tie-counting denominator is zero exactly when the
/// response is constant on every nearest-neighbour pair of the conditioning
/// columns; the soft denominator is then an artefact of the temperature.
fn check_conditional_denominator(ranks: &RankVector, x: ArrayView2<'_, f64>) -> Result<()> {
    let nbr = nearest_neighbors_tagged(x, ranks.tie_seed, rng::TAG_NN_COND);
    let tied = &ranks.r_tied;
    let raw: usize = (0..tied.len())
        .map(|i| tied[i] - tied[i].min(tied[nbr[i]]))
        .sum();
    if raw == 0 {
        return Err(Error::DegenerateDenominator);
    }
    Ok(())
}

/// Value of `T_{n,beta}(y, Z | X)` on plain matrices, with ranks drawn from
/// `seed` exactly as the hard estimator draws them.
pub fn t_n_beta_value(
    y: &[f64],
    z: &DataMatrix,
    x: Option<&DataMatrix>,
    beta: f64,
    seed: u64,
) -> Result<f64> {
    let (q, p) = q_n_p_n_beta(y, z, x, beta, seed)?;
    Ok(q / p)
}

/// `(Q_{n,beta}, P_{n,beta})` on plain matrices.
pub fn q_n_p_n_beta(
    y: &[f64],
    z: &DataMatrix,
    x: Option<&DataMatrix>,
    beta: f64,
    seed: u64,
) -> Result<(f64, f64)> {
    if z.n() != y.len() {
        return Err(Error::invalid(format!("Z has {} rows, y has {}", z.n(), y.len())));
    }
    let ranks = compute_ranks(y, seed)?;
    let mut g = Graph::new();
    let zv = g.constant(z.values().clone());
    let est = t_n_beta_parts(&mut g, &ranks, zv, x.map(DataMatrix::view), beta)?;
    Ok((est.q_n_beta, est.p_n_beta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rank::t_n;
    use ndarray::Array2;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(n: usize, p: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((n, p), |_| StandardNormal.sample(&mut rng))
    }

    #[test]
    fn large_beta_recovers_hard_estimator() {
        let z = DataMatrix::from_array(gaussian(60, 2, 1)).unwrap();
        let x = DataMatrix::from_array(gaussian(60, 2, 2)).unwrap();
        let y: Vec<f64> = (0..60)
            .map(|i| z.values()[[i, 0]] + x.values()[[i, 1]])
            .collect();
        let hard = t_n(&y, &z, Some(&x), 4).unwrap();
        let soft = t_n_beta_value(&y, &z, Some(&x), 1e6, 4).unwrap();
        assert!((hard - soft).abs() < 1e-3, "{hard} vs {soft}");
        let hard0 = t_n(&y, &z, None, 4).unwrap();
        let soft0 = t_n_beta_value(&y, &z, None, 1e6, 4).unwrap();
        assert!((hard0 - soft0).abs() < 1e-3, "{hard0} vs {soft0}");
    }

    #[test]
    fn denominator_is_constant() {
        let zv = gaussian(20, 2, 3);
        let x = gaussian(20, 1, 4);
        let y: Vec<f64> = (0..20).map(|i| zv[[i, 0]] - x[[i, 0]]).collect();
        let ranks = compute_ranks(&y, 0).unwrap();
        let mut g = Graph::new();
        let z = g.param(zv);
        let est = t_n_beta_parts(&mut g, &ranks, z, Some(x.view()), 5.0).unwrap();
        let v = g.scalar(est.value);
        assert!((v - est.q_n_beta / est.p_n_beta).abs() < 1e-12);
        assert!(est.matrices.lambda_mask >= autodiff::LAMBDA_FLOOR);
    }

    #[test]
    fn function_of_condition_is_degenerate() {
        let xs: Vec<f64> = (0..30).map(|i| (i / 3) as f64).collect();
        let y: Vec<f64> = xs.iter().map(|v| v.sin()).collect();
        let x = DataMatrix::from_columns(&[xs]).unwrap();
        let z = DataMatrix::from_array(gaussian(30, 1, 5)).unwrap();
        assert!(matches!(
            t_n_beta_value(&y, &z, Some(&x), 5.0, 0),
            Err(Error::DegenerateDenominator)
        ));
    }

    #[test]
    fn constant_response_is_rejected() {
        let z = DataMatrix::from_array(gaussian(10, 1, 5)).unwrap();
        assert!(matches!(
            t_n_beta_value(&[2.0; 10], &z, None, 5.0, 0),
            Err(Error::DegenerateResponse)
        ));
    }
}
