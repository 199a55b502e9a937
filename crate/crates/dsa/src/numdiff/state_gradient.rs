//! Gradients of tendencies with respect to the state, estimated sample by
//! sample with weighted local polynomial regression.
//!
//! Around each sample the tendency is fit against monomials of the state up
//! to degree k over an adaptive nearest-neighbor cloud with Gaussian
//! distance weights; the degree-k coefficients, rescaled by the multi-index
//! factorial, are the order-k gradient tensor entries at that sample.

use crate::error::{Error, Result};
use crate::linalg::weighted_least_squares;
use crate::poly::{multi_factorial, PolyBasis};
use nalgebra::{DMatrix, DVector};
use ndarray::{Array2, Array3};
use rayon::prelude::*;

#[derive(Debug, Clone)]
pub struct NeighborhoodOpts {
    /// Neighbor count multiplier over the monomial count; the paper-side
    /// construction is silent, 3x keeps the regressions overdetermined.
    pub min_factor: usize,
    /// Relative condition-number bound on the local Gram matrix.
    pub max_condition: f64,
    /// Local fits run at degree `order + extra_degree`, so the order-k
    /// coefficients stay exact on polynomial dynamics even when the
    /// neighborhood has to grow.
    pub extra_degree: usize,
}

impl Default for NeighborhoodOpts {
    fn default() -> Self {
        NeighborhoodOpts {
            min_factor: 3,
            max_condition: 1e10,
            extra_degree: 1,
        }
    }
}

/// Per-sample gradient tensors of one order.
#[derive(Debug, Clone)]
pub struct GradientTensors {
    pub order: usize,
    /// multi-indices of total degree == order over the driver dimensions
    pub indices: Vec<Vec<u8>>,
    /// (sample, response, index)
    pub coeffs: Array3<f64>,
}

/// Order-k state-space gradient of `response_dot` with respect to `driver`.
///
/// `driver` is (samples x state dim), `response_dot` (samples x responses).
/// A degree-k polynomial is fit in a neighborhood of every sample; entries
/// are symmetric in the driver indices by construction (monomial storage).
pub fn state_space_gradient(
    driver: &Array2<f64>,
    response_dot: &Array2<f64>,
    k: usize,
    opts: &NeighborhoodOpts,
) -> Result<GradientTensors> {
    let (n, dim) = driver.dim();
    let (nr, n_resp) = response_dot.dim();
    if nr != n {
        return Err(Error::ShapeMismatch("driver vs response sample counts".into()));
    }
    if k == 0 {
        return Err(Error::Config("gradient order must be at least 1".into()));
    }
    let basis = PolyBasis::new(dim, k + opts.extra_degree);
    let q = basis.len();
    let n_min = (opts.min_factor * q).min(n);
    if n < q + 1 {
        return Err(Error::RankDeficient {
            msg: format!("{n} samples cannot determine {q} monomials of degree <= {k}"),
            cond: f64::INFINITY,
        });
    }

    let k_indices = basis.of_degree(k);
    let out_indices: Vec<Vec<u8>> = k_indices.iter().map(|&i| basis.indices[i].clone()).collect();

    // per-dimension scale for conditioning of the local design
    let mut scale = vec![0.0f64; dim];
    for d in 0..dim {
        let col: Vec<f64> = driver.column(d).to_vec();
        let s = crate::linalg::std_dev(&col);
        scale[d] = if s > 0.0 { s } else { 1.0 };
    }

    let rows: Vec<Result<Vec<f64>>> = (0..n)
        .into_par_iter()
        .map(|i| {
            // grow the neighborhood when the local cloud degenerates
            // (samples along one trajectory are collinear in state space)
            let mut take = n_min;
            loop {
                match local_fit(
                    driver,
                    response_dot,
                    i,
                    &basis,
                    &k_indices,
                    &scale,
                    take,
                    opts,
                ) {
                    Ok(row) => return Ok(row),
                    Err(e) => {
                        if take >= n {
                            return Err(e);
                        }
                        take = (take * 2).min(n);
                    }
                }
            }
        })
        .collect();

    let mut coeffs = Array3::zeros((n, n_resp, k_indices.len()));
    for (i, row) in rows.into_iter().enumerate() {
        let row = row?;
        for r in 0..n_resp {
            for (c, &v) in row[r * k_indices.len()..(r + 1) * k_indices.len()]
                .iter()
                .enumerate()
            {
                coeffs[(i, r, c)] = v;
            }
        }
    }
    Ok(GradientTensors {
        order: k,
        indices: out_indices,
        coeffs,
    })
}

#[allow(clippy::too_many_arguments)]
fn local_fit(
    driver: &Array2<f64>,
    response_dot: &Array2<f64>,
    i: usize,
    basis: &PolyBasis,
    k_indices: &[usize],
    scale: &[f64],
    n_min: usize,
    opts: &NeighborhoodOpts,
) -> Result<Vec<f64>> {
    let (n, dim) = driver.dim();
    let n_resp = response_dot.ncols();
    let center: Vec<f64> = driver.row(i).to_vec();

    // scaled distances to every sample
    let mut dist: Vec<(f64, usize)> = (0..n)
        .map(|j| {
            let mut d2 = 0.0;
            for d in 0..dim {
                let z = (driver[(j, d)] - center[d]) / scale[d];
                d2 += z * z;
            }
            (d2, j)
        })
        .collect();
    dist.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let take = n_min.max(basis.len() + 2).min(n);
    let neighbors = &dist[..take];
    let bandwidth2 = neighbors.last().unwrap().0.max(1e-12);

    let mut a = DMatrix::zeros(take, basis.len());
    let mut ys = vec![DVector::zeros(take); n_resp];
    let mut weights = vec![0.0; take];
    let mut row = vec![0.0; basis.len()];
    let mut local = vec![0.0; dim];
    for (r, &(d2, j)) in neighbors.iter().enumerate() {
        weights[r] = (-0.5 * d2 / (0.25 * bandwidth2)).exp();
        for d in 0..dim {
            local[d] = (driver[(j, d)] - center[d]) / scale[d];
        }
        basis.eval_row(&local, &mut row);
        for (c, &v) in row.iter().enumerate() {
            a[(r, c)] = v;
        }
        for (re, y) in ys.iter_mut().enumerate() {
            y[r] = response_dot[(j, re)];
        }
    }

    let mut out = vec![0.0; n_resp * k_indices.len()];
    for (re, y) in ys.iter().enumerate() {
        let (sol, cond) = weighted_least_squares(&a, y, Some(&weights))?;
        if !cond.is_finite() || cond > opts.max_condition {
            return Err(Error::RankDeficient {
                msg: format!("neighborhood of sample {i} is too degenerate"),
                cond,
            });
        }
        for (c, &bi) in k_indices.iter().enumerate() {
            let alpha = &basis.indices[bi];
            // unscale: coefficient over raw coordinates, times alpha! to go
            // from Taylor coefficient to derivative tensor entry
            let mut unscale = 1.0;
            for (d, &pa) in alpha.iter().enumerate() {
                for _ in 0..pa {
                    unscale /= scale[d];
                }
            }
            out[re * k_indices.len() + c] = sol[bi] * multi_factorial(alpha) * unscale;
        }
    }
    Ok(out)
}
