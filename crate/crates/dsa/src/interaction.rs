//! Dynamic interaction tensors: order-k sensitivities of a system's
//! tendencies to its state, for one process or several stacked ones.
//!
//! Entries are stored over multi-indices of the driver components (the
//! symmetric tensor's distinct entries); diagonal entries have every driver
//! index equal to the response component, everything else counts as
//! off-diagonal. Per-sample tensors come from the local regression in
//! [`crate::numdiff::state_space_gradient`]; the reference-manifold
//! aggregate weights samples by inverse phase-space speed so slow, recurrent
//! regions dominate.

use crate::error::{Error, Result};
use crate::field::{PartitionMember, SpatioTemporalField};
use crate::numdiff::{state_space_gradient, DerivativeStack, NeighborhoodOpts};
use crate::poly::permutation_multiplicity;
use crate::spacetime::{retrieval_product, CoevolutionManifold, SubspaceBasis, SubspaceLabel};
use ndarray::{Array1, Array2, Array3};
use std::ops::Range;

/// Order-k dynamic interaction tensor.
#[derive(Debug, Clone)]
pub struct InteractionTensor {
    pub order: usize,
    /// Multi-indices over driver components, total degree == order.
    pub indices: Vec<Vec<u8>>,
    /// Per-sample entries (sample, response, index); samples pool (time, cell).
    pub per_sample: Option<Array3<f64>>,
    /// Reference-manifold aggregate (response, index).
    pub aggregate: Array2<f64>,
    /// Aggregation weights per sample (inverse local phase-space speed).
    pub weights: Option<Array1<f64>>,
    /// Diagonal spectrum: per response, the all-indices-equal entry
    /// (aggregate value). Empty when responses do not map onto drivers.
    pub diagonal: Vec<f64>,
    /// Sobolev off-diagonal norm, see [`InteractionTensor::recompute_offdiag_norm`].
    pub offdiag_norm: f64,
    /// Driver component ranges per stacked process.
    pub blocks: Vec<Range<usize>>,
    /// Sample spacing in days (for the first-differential Sobolev term).
    pub dt: f64,
    /// Sample layout: (n_time, n_cells) when pooled from a field.
    pub sample_shape: (usize, usize),
}

impl InteractionTensor {
    pub fn n_responses(&self) -> usize {
        self.aggregate.nrows()
    }

    pub fn n_drivers(&self) -> usize {
        self.indices.first().map(|a| a.len()).unwrap_or(0)
    }

    /// True when the multi-index is the response's self-interaction.
    pub fn is_diagonal(&self, response: usize, index: usize) -> bool {
        let alpha = &self.indices[index];
        alpha
            .iter()
            .enumerate()
            .all(|(d, &a)| if d == response { a as usize == self.order } else { a == 0 })
    }

    /// Quadratic norm of the off-diagonal entries in the order-(alpha<=1)
    /// Sobolev inner product: the sample mean square of each entry stream
    /// plus the mean square of its first time differential, each weighted by
    /// the multiplicity of the multi-index inside the full symmetric tensor.
    pub fn recompute_offdiag_norm(&self) -> f64 {
        let mult: Vec<f64> = self
            .indices
            .iter()
            .map(|a| permutation_multiplicity(a))
            .collect();
        match &self.per_sample {
            Some(stream) => {
                let (n, nr, ni) = stream.dim();
                let mut acc = 0.0;
                for r in 0..nr {
                    for c in 0..ni {
                        if r < self.n_drivers() && self.is_diagonal(r, c) {
                            continue;
                        }
                        let mut l2 = 0.0;
                        let mut d2 = 0.0;
                        for s in 0..n {
                            let v = stream[(s, r, c)];
                            l2 += v * v;
                            if s + 1 < n {
                                let dv = (stream[(s + 1, r, c)] - v) / self.dt;
                                d2 += dv * dv;
                            }
                        }
                        acc += mult[c] * (l2 / n as f64 + d2 / (n - 1).max(1) as f64);
                    }
                }
                acc
            }
            None => {
                let mut acc = 0.0;
                for r in 0..self.n_responses() {
                    for c in 0..self.indices.len() {
                        if r < self.n_drivers() && self.is_diagonal(r, c) {
                            continue;
                        }
                        let v = self.aggregate[(r, c)];
                        acc += mult[c] * v * v;
                    }
                }
                acc
            }
        }
    }

    /// Aggregate off-diagonal Frobenius norm (no differential term).
    pub fn aggregate_offdiag_norm(&self) -> f64 {
        let mut acc = 0.0;
        for r in 0..self.n_responses() {
            for c in 0..self.indices.len() {
                if r < self.n_drivers() && self.is_diagonal(r, c) {
                    continue;
                }
                let v = self.aggregate[(r, c)];
                acc += permutation_multiplicity(&self.indices[c]) * v * v;
            }
        }
        acc
    }

    /// Norm over entries coupling different blocks (cross-process terms).
    pub fn cross_block_norm(&self) -> f64 {
        let mut acc = 0.0;
        for r in 0..self.n_responses() {
            let r_block = self.blocks.iter().position(|b| b.contains(&r));
            for (c, alpha) in self.indices.iter().enumerate() {
                let touches_other = alpha.iter().enumerate().any(|(d, &a)| {
                    a > 0 && self.blocks.iter().position(|b| b.contains(&d)) != r_block
                });
                if touches_other {
                    let v = self.aggregate[(r, c)];
                    acc += permutation_multiplicity(alpha) * v * v;
                }
            }
        }
        acc.sqrt()
    }
}

/// Inverse-speed aggregation weights: slow (recurrent) samples dominate.
fn reference_weights(response_dot: &Array2<f64>) -> Array1<f64> {
    let n = response_dot.nrows();
    let mut speed = vec![0.0; n];
    for i in 0..n {
        let mut s = 0.0;
        for r in 0..response_dot.ncols() {
            s += response_dot[(i, r)] * response_dot[(i, r)];
        }
        speed[i] = s.sqrt();
    }
    let mut sorted = speed.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let med = sorted[n / 2].max(1e-300);
    let mut w = Array1::zeros(n);
    let mut total = 0.0;
    for i in 0..n {
        let v = 1.0 / (speed[i] + 0.1 * med);
        w[i] = v;
        total += v;
    }
    w.mapv_inplace(|v| v / total);
    w
}

/// Estimate an order-k interaction tensor from explicit sample matrices.
///
/// `driver` is (samples x state), `response_dot` (samples x responses);
/// `sample_shape` records the (time, cell) layout of the pooled samples.
pub fn interaction_from_samples(
    driver: &Array2<f64>,
    response_dot: &Array2<f64>,
    k: usize,
    dt: f64,
    sample_shape: (usize, usize),
    blocks: Vec<Range<usize>>,
) -> Result<InteractionTensor> {
    let grads = state_space_gradient(driver, response_dot, k, &NeighborhoodOpts::default())?;
    let (n, nr, ni) = grads.coeffs.dim();
    let weights = reference_weights(response_dot);
    let mut aggregate = Array2::zeros((nr, ni));
    for s in 0..n {
        for r in 0..nr {
            for c in 0..ni {
                aggregate[(r, c)] += weights[s] * grads.coeffs[(s, r, c)];
            }
        }
    }
    let n_drivers = driver.ncols();
    let blocks = if blocks.is_empty() {
        vec![0..n_drivers]
    } else {
        blocks
    };
    let mut tensor = InteractionTensor {
        order: k,
        indices: grads.indices,
        per_sample: Some(grads.coeffs),
        aggregate,
        weights: Some(weights),
        diagonal: Vec::new(),
        offdiag_norm: 0.0,
        blocks,
        dt,
        sample_shape,
    };
    if nr <= n_drivers {
        tensor.diagonal = (0..nr)
            .map(|r| {
                let c = tensor
                    .indices
                    .iter()
                    .position(|a| {
                        a.iter()
                            .enumerate()
                            .all(|(d, &v)| if d == r { v as usize == k } else { v == 0 })
                    })
                    .expect("self multi-index exists");
                tensor.aggregate[(r, c)]
            })
            .collect();
    }
    tensor.offdiag_norm = tensor.recompute_offdiag_norm();
    Ok(tensor)
}

/// Pool a field's (time, cell) samples into state/tendency matrices.
pub fn pool_samples(
    x: &SpatioTemporalField,
    derivs: &DerivativeStack,
) -> Result<(Array2<f64>, Array2<f64>)> {
    x.require_complete("interaction sampling")?;
    let (nc, nt, ny, nx) = x.values().dim();
    let dot = derivs.tendency()?;
    if dot.dim() != x.values().dim() {
        return Err(Error::ShapeMismatch(
            "derivative stack does not match the field".into(),
        ));
    }
    // drop samples estimated one-sided at the record edges
    let valid: Vec<usize> = (0..nt)
        .filter(|&t| !derivs.time_onesided.first().map(|m| m[t]).unwrap_or(false))
        .collect();
    let n = valid.len() * ny * nx;
    let mut driver = Array2::zeros((n, nc));
    let mut response = Array2::zeros((n, nc));
    let mut s = 0;
    for &t in &valid {
        for i in 0..ny {
            for j in 0..nx {
                for c in 0..nc {
                    driver[(s, c)] = x.values()[(c, t, i, j)];
                    response[(s, c)] = dot[(c, t, i, j)];
                }
                s += 1;
            }
        }
    }
    debug_assert_eq!(s, n);
    Ok((driver, response))
}

/// Order-k dynamic interaction of a field with itself.
pub fn dynamic_interaction(
    x: &SpatioTemporalField,
    derivs: &DerivativeStack,
    k: usize,
) -> Result<InteractionTensor> {
    let (driver, response) = pool_samples(x, derivs)?;
    let nt_valid = driver.nrows() / (x.grid.n_cells());
    interaction_from_samples(
        &driver,
        &response,
        k,
        derivs.dt,
        (nt_valid, x.grid.n_cells()),
        vec![],
    )
}

/// Order-k interaction among several processes on a shared time axis.
///
/// States are stacked component-wise; the gradient runs over the full
/// stacked state (cross blocks addressable through
/// [`InteractionTensor::cross_block_norm`]).
pub fn multi_process_interaction(
    processes: &[&SpatioTemporalField],
    derivs: &[&DerivativeStack],
    k: usize,
) -> Result<InteractionTensor> {
    if processes.is_empty() || processes.len() != derivs.len() {
        return Err(Error::Config("need one derivative stack per process".into()));
    }
    let t0 = processes[0].time.timestamps();
    let cells0 = (processes[0].grid.n_lat(), processes[0].grid.n_lon());
    for p in processes.iter().skip(1) {
        if p.time.timestamps() != t0 {
            return Err(Error::ShapeMismatch("processes on different time axes".into()));
        }
        if (p.grid.n_lat(), p.grid.n_lon()) != cells0 {
            return Err(Error::ShapeMismatch("processes on different grids".into()));
        }
    }
    let mut pooled: Vec<(Array2<f64>, Array2<f64>)> = Vec::new();
    for (p, d) in processes.iter().zip(derivs.iter()) {
        pooled.push(pool_samples(p, d)?);
    }
    let n = pooled.iter().map(|(d, _)| d.nrows()).min().unwrap();
    let total_dim: usize = pooled.iter().map(|(d, _)| d.ncols()).sum();
    const MAX_STACKED_DIM: usize = 32;
    if total_dim > MAX_STACKED_DIM {
        return Err(Error::Config(format!(
            "stacked state dimension {total_dim} exceeds the {MAX_STACKED_DIM} limit"
        )));
    }
    let mut driver = Array2::zeros((n, total_dim));
    let mut response = Array2::zeros((n, total_dim));
    let mut blocks = Vec::new();
    let mut off = 0;
    for (d, r) in &pooled {
        let w = d.ncols();
        for s in 0..n {
            for c in 0..w {
                driver[(s, off + c)] = d[(s, c)];
                response[(s, off + c)] = r[(s, c)];
            }
        }
        blocks.push(off..off + w);
        off += w;
    }
    let cells = cells0.0 * cells0.1;
    interaction_from_samples(&driver, &response, k, derivs[0].dt, (n / cells, cells), blocks)
}

/// Spatial or temporal structure of a per-sample tensor stream inside a
/// partition window, through the subspace decomposition operator.
///
/// Returns one structure per (response, index) entry: over cells for
/// `SubspaceLabel::Space`, over window time samples for `SubspaceLabel::Time`.
pub fn interaction_structure(
    tensor: &InteractionTensor,
    subspace: SubspaceLabel,
    window: &PartitionMember,
    grid_shape: (usize, usize),
    manifold: Option<&CoevolutionManifold>,
) -> Result<Vec<((usize, usize), Array1<f64>)>> {
    let stream = tensor
        .per_sample
        .as_ref()
        .ok_or_else(|| Error::Config("tensor carries no per-sample stream".into()))?;
    let (_, nr, ni) = stream.dim();
    let (nt, ncells) = tensor.sample_shape;
    if nt * ncells != stream.dim().0 {
        return Err(Error::ShapeMismatch("sample shape vs stream length".into()));
    }
    let (ny, nx) = grid_shape;
    if ny * nx != ncells {
        return Err(Error::ShapeMismatch("grid shape vs pooled cells".into()));
    }
    if window.time.is_empty() || window.lat.is_empty() || window.lon.is_empty() {
        return Err(Error::Config("empty partition window".into()));
    }
    let t_range: Vec<usize> = window.time.clone().filter(|&t| t < nt).collect();
    let cells: Vec<usize> = window
        .lat
        .clone()
        .flat_map(|i| window.lon.clone().map(move |j| i * nx + j))
        .collect();
    if t_range.is_empty() || cells.is_empty() {
        return Err(Error::Config("window does not overlap the stream".into()));
    }

    let mut out = Vec::new();
    for r in 0..nr {
        for c in 0..ni {
            // entry matrix over (cell, time) restricted to the window
            let mut a = Array2::zeros((cells.len(), t_range.len()));
            for (ci, &cell) in cells.iter().enumerate() {
                for (ti, &t) in t_range.iter().enumerate() {
                    a[(ci, ti)] = stream[(t * ncells + cell, r, c)];
                }
            }
            let structure = match subspace {
                SubspaceLabel::Space => {
                    let e_t = uniform_basis(t_range.len(), SubspaceLabel::Time);
                    retrieval_product(&a, &e_t, manifold)?
                }
                SubspaceLabel::Time | SubspaceLabel::Generic => {
                    let e_s = uniform_basis(cells.len(), SubspaceLabel::Space);
                    retrieval_product(&a, &e_s, manifold)?
                }
            };
            out.push(((r, c), structure));
        }
    }
    Ok(out)
}

fn uniform_basis(len: usize, label: SubspaceLabel) -> SubspaceBasis {
    let v = 1.0 / (len as f64).sqrt();
    SubspaceBasis {
        label,
        vectors: Array2::from_elem((len, 1), v),
    }
}

/// Flat-text tensor dump: one line per nonzero aggregate entry,
/// `k comp i1..ik value` with sorted driver indices.
pub fn write_tensor(tensor: &InteractionTensor, path: &std::path::Path) -> Result<()> {
    let mut out = String::new();
    for r in 0..tensor.n_responses() {
        for (c, alpha) in tensor.indices.iter().enumerate() {
            let v = tensor.aggregate[(r, c)];
            if v != 0.0 {
                let mut ids = Vec::new();
                for (d, &a) in alpha.iter().enumerate() {
                    for _ in 0..a {
                        ids.push(d.to_string());
                    }
                }
                out.push_str(&format!(
                    "{} {} {} {}\n",
                    tensor.order,
                    r,
                    ids.join(" "),
                    v
                ));
            }
        }
    }
    crate::field::atomic_write(path, &out)
}
