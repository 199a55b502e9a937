//! Space-time decomposition through a coevolution manifold.
//!
//! A spatiotemporal process is split into a spatial structure and a temporal
//! structure; when space and time are coupled (a propagating pattern), the
//! coupling is concentrated into the manifold: its first-order form is a
//! celerity field, its rank counts the shared space-time dimensions. With
//! rank 0 the operators reduce to plain subspace projections; with rank >= 1
//! the field is first resampled along the characteristics so the structures
//! live in comoving (non-redundant) coordinates.
//!
//! Characteristic resampling wraps periodically at the domain edges and uses
//! cubic interpolation for fractional cell shifts.

use crate::error::{Error, Result};
use crate::field::{Grid, SpatioTemporalField};
use crate::linalg::{mean, std_dev};
use crate::numdiff::{self, SobolevConfig};
use nalgebra::DMatrix;
use ndarray::{Array1, Array2};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubspaceLabel {
    Space,
    Time,
    Generic,
}

/// Orthonormal basis of a subspace over its flattened index.
#[derive(Debug, Clone)]
pub struct SubspaceBasis {
    pub label: SubspaceLabel,
    /// (subspace length, rank) with orthonormal columns
    pub vectors: Array2<f64>,
}

impl SubspaceBasis {
    pub fn rank(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn len(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Max deviation of V^T V from the identity.
    pub fn orthonormality_defect(&self) -> f64 {
        let r = self.rank();
        let mut worst = 0.0f64;
        for a in 0..r {
            for b in 0..r {
                let dot: f64 = (0..self.len())
                    .map(|i| self.vectors[(i, a)] * self.vectors[(i, b)])
                    .sum();
                let target = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((dot - target).abs());
            }
        }
        worst
    }
}

/// Axis along which the dominant propagation runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PropagationAxis {
    Lat,
    Lon,
}

/// Space-time coupling object.
#[derive(Debug, Clone)]
pub struct CoevolutionManifold {
    /// Number of shared space-time dimensions.
    pub rank: usize,
    /// Per-cell first-order celerity in grid-cells per time-step along the
    /// dominant axis (0 where the spatial gradient sits under the noise floor).
    pub celerity_cells: Array2<f64>,
    pub axis: PropagationAxis,
    /// Robust summary celerity, axis units per day.
    pub celerity: f64,
    /// Same summary in grid-cells per time-step.
    pub celerity_cell_rate: f64,
    /// Normalized higher-order derivative-pair couplings, orders 1..=3.
    pub couplings: Vec<f64>,
    /// Singular-value spectrum of the space-time matrix (rank evidence).
    pub spectrum: Vec<f64>,
    /// Set when the field had no usable gradients.
    pub flat: bool,
}

/// Decomposition output: spatial pattern, temporal series, the manifold that
/// binds them, and bookkeeping for exact recomposition.
#[derive(Debug, Clone)]
pub struct StructurePair {
    /// Raw (unstandardized) spatial structure over the grid.
    pub spatial_raw: Array2<f64>,
    /// Raw temporal structure over the window.
    pub temporal_raw: Array1<f64>,
    pub manifold: CoevolutionManifold,
    pub spatial_rank: usize,
    pub temporal_rank: usize,
    /// Relative Frobenius residual of compose(decompose(x)) against x.
    pub residual: f64,
    /// Standardization transforms (mean, std) for each structure.
    pub spatial_affine: (f64, f64),
    pub temporal_affine: (f64, f64),
}

impl StructurePair {
    /// Composed dimensionality: spatial rank + temporal rank - manifold rank.
    pub fn composed_rank(&self) -> isize {
        self.spatial_rank as isize + self.temporal_rank as isize - self.manifold.rank as isize
    }

    pub fn spatial_standardized(&self) -> Array2<f64> {
        let (m, s) = self.spatial_affine;
        self.spatial_raw.mapv(|v| (v - m) / s)
    }

    pub fn temporal_standardized(&self) -> Array1<f64> {
        let (m, s) = self.temporal_affine;
        self.temporal_raw.mapv(|v| (v - m) / s)
    }
}

fn affine_of(values: &[f64]) -> (f64, f64) {
    let m = mean(values);
    let s = std_dev(values);
    (m, if s > 0.0 { s } else { 1.0 })
}

/// Singular decomposition through the Gram matrix of the smaller side,
/// singular values descending. The direct bidiagonal SVD misbehaves on
/// exactly degenerate (constant) matrices; the symmetric eigensolver does
/// not, and the squared conditioning is harmless at the 1e-3 rank threshold
/// used here.
fn sorted_svd(m: &DMatrix<f64>, vectors: bool) -> Result<(Vec<f64>, DMatrix<f64>, DMatrix<f64>)> {
    let (nr, nc) = m.shape();
    let small_is_cols = nc <= nr;
    let gram = if small_is_cols {
        m.transpose() * m
    } else {
        m * m.transpose()
    };
    let eig = nalgebra::SymmetricEigen::new(gram);
    let k = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
    let values: Vec<f64> = order
        .iter()
        .map(|&i| eig.eigenvalues[i].max(0.0).sqrt())
        .collect();
    if !vectors {
        return Ok((values, DMatrix::zeros(0, 0), DMatrix::zeros(0, 0)));
    }
    let mut us = DMatrix::zeros(nr, k);
    let mut vs = DMatrix::zeros(nc, k);
    let tol = values[0].max(1e-300) * 1e-14;
    for (pos, &i) in order.iter().enumerate() {
        let w = eig.eigenvectors.column(i);
        if small_is_cols {
            for c in 0..nc {
                vs[(c, pos)] = w[c];
            }
            if values[pos] > tol {
                let u = m * w / values[pos];
                for r in 0..nr {
                    us[(r, pos)] = u[r];
                }
            }
        } else {
            for r in 0..nr {
                us[(r, pos)] = w[r];
            }
            if values[pos] > tol {
                let v = m.transpose() * w / values[pos];
                for c in 0..nc {
                    vs[(c, pos)] = v[c];
                }
            }
        }
    }
    Ok((values, us, vs))
}

/// Leading singular bases of an arbitrary (rows x cols) matrix: row-space
/// basis first, column-space basis second.
pub fn matrix_bases(
    a: &Array2<f64>,
    rank: usize,
    row_label: SubspaceLabel,
    col_label: SubspaceLabel,
) -> Result<(SubspaceBasis, SubspaceBasis)> {
    let (nr, nc) = a.dim();
    let mut m = DMatrix::zeros(nr, nc);
    for i in 0..nr {
        for j in 0..nc {
            m[(i, j)] = a[(i, j)];
        }
    }
    let (values, u, v) = sorted_svd(&m, true)?;
    let r = rank.min(values.len());
    let mut us = Array2::zeros((nr, r));
    let mut vs = Array2::zeros((nc, r));
    for k in 0..r {
        for i in 0..nr {
            us[(i, k)] = u[(i, k)];
        }
        for j in 0..nc {
            vs[(j, k)] = v[(j, k)];
        }
    }
    Ok((
        SubspaceBasis { label: row_label, vectors: us },
        SubspaceBasis { label: col_label, vectors: vs },
    ))
}

/// Space-time matrix of one component: rows are flattened cells, columns are
/// time samples.
fn space_time_matrix(f: &SpatioTemporalField, comp: usize) -> DMatrix<f64> {
    let (ny, nx, nt) = (f.grid.n_lat(), f.grid.n_lon(), f.n_time());
    let mut m = DMatrix::zeros(ny * nx, nt);
    for t in 0..nt {
        for i in 0..ny {
            for j in 0..nx {
                m[(i * nx + j, t)] = f.values()[(comp, t, i, j)];
            }
        }
    }
    m
}

/// Leading singular bases of the space-time matrix.
pub fn subspace_bases(
    f: &SpatioTemporalField,
    comp: usize,
    rank: usize,
) -> Result<(SubspaceBasis, SubspaceBasis)> {
    let m = space_time_matrix(f, comp);
    let (values, u, v) = sorted_svd(&m, true)?;
    let r = rank.min(values.len());
    let mut us = Array2::zeros((u.nrows(), r));
    let mut vs = Array2::zeros((v.nrows(), r));
    for k in 0..r {
        for i in 0..u.nrows() {
            us[(i, k)] = u[(i, k)];
        }
        for t in 0..v.nrows() {
            vs[(t, k)] = v[(t, k)];
        }
    }
    Ok((
        SubspaceBasis { label: SubspaceLabel::Space, vectors: us },
        SubspaceBasis { label: SubspaceLabel::Time, vectors: vs },
    ))
}

/// Estimate the coevolution manifold of a (filled) field.
///
/// The celerity field follows the characteristics relation
/// `ds/dt = -(dx/dt)/(dx/ds)` per cell where the spatial gradient clears a
/// noise floor; the rank counts singular values of the space-time coupling
/// spectrum above 1e-3 of the leading one, beyond the first mode.
pub fn estimate_coevolution(x: &SpatioTemporalField) -> Result<CoevolutionManifold> {
    x.require_complete("estimate_coevolution")?;
    let (ny, nx, nt) = (x.grid.n_lat(), x.grid.n_lon(), x.n_time());
    if nt < 8 || (ny < 8 && nx < 8) {
        return Err(Error::Config("both axes must have at least 8 samples".into()));
    }
    let comp = 0;
    let dt = x.time.step();

    let tcfg = SobolevConfig::new(1)?;
    let dstack = numdiff::time_derivatives(x, &tcfg)?;
    let d_t = dstack.tendency()?;
    let sstack = numdiff::space_derivatives(x, &tcfg)?;
    let d_lat = sstack.space_order(1, 0).map(|s| s.values.clone());
    let d_lon = sstack.space_order(0, 1).map(|s| s.values.clone());

    // dominant axis by mean absolute spatial gradient
    let grad_scale = |d: &Option<ndarray::Array4<f64>>| -> f64 {
        d.as_ref()
            .map(|a| a.iter().map(|v| v.abs()).sum::<f64>() / a.len() as f64)
            .unwrap_or(0.0)
    };
    let (axis, d_s, step_s) = if grad_scale(&d_lat) >= grad_scale(&d_lon) {
        (
            PropagationAxis::Lat,
            d_lat.clone(),
            Grid::uniform_step(x.grid.lat()).unwrap_or(1.0),
        )
    } else {
        (
            PropagationAxis::Lon,
            d_lon.clone(),
            Grid::uniform_step(x.grid.lon()).unwrap_or(1.0),
        )
    };

    let mut celerity_cells = Array2::zeros((ny, nx));
    let mut all_ratios: Vec<f64> = Vec::new();
    let mut flat = true;
    let vmax = x.values().iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    if let Some(ds) = &d_s {
        let gmax = ds.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
        let floor = 1e-3 * gmax;
        // roundoff-level gradients on a value scale vmax mean a flat field
        if gmax * step_s.abs() > 1e-10 * vmax.max(1e-300) {
            flat = false;
            for i in 0..ny {
                for j in 0..nx {
                    let mut ratios = Vec::new();
                    for t in 0..nt {
                        let g = ds[(comp, t, i, j)];
                        if g.abs() > floor {
                            ratios.push(-d_t[(comp, t, i, j)] / g);
                        }
                    }
                    if !ratios.is_empty() {
                        ratios.sort_by(|a, b| a.partial_cmp(b).unwrap());
                        let med = ratios[ratios.len() / 2];
                        celerity_cells[(i, j)] = med * dt / step_s;
                        all_ratios.extend_from_slice(&ratios);
                    }
                }
            }
        }
    }
    let celerity = if all_ratios.is_empty() {
        0.0
    } else {
        all_ratios.sort_by(|a, b| a.partial_cmp(b).unwrap());
        all_ratios[all_ratios.len() / 2]
    };
    let celerity_cell_rate = celerity * dt / step_s;

    // coupling spectrum: singular values of the space-time matrix; one mode
    // is a plain separable product, anything beyond it is shared dimension
    let m = space_time_matrix(x, comp);
    let (spectrum, _, _) = sorted_svd(&m, false)?;
    let s1 = spectrum.first().copied().unwrap_or(0.0);
    let rank = if flat || s1 <= 0.0 {
        0
    } else {
        let above = spectrum.iter().filter(|&&s| s > 1e-3 * s1).count();
        above.saturating_sub(1).min(ny.min(nx).min(nt) - 1)
    };

    // higher-order derivative-pair couplings (orders 1..=3 where axes allow)
    let mut couplings = Vec::new();
    let hcfg = SobolevConfig::new(3.min(nt / 9).max(1))?;
    let tstack3 = numdiff::time_derivatives(x, &hcfg).ok();
    let sstack3 = numdiff::space_derivatives(x, &hcfg).ok();
    for k in 1..=3u8 {
        let mut c = 0.0;
        if let (Some(ts), Some(ss)) = (&tstack3, &sstack3) {
            let t_ok = ts.time_derivs.len() >= k as usize;
            let s_ok = match axis {
                PropagationAxis::Lat => ss.space_order(k, 0),
                PropagationAxis::Lon => ss.space_order(0, k),
            };
            if let (true, Some(sd)) = (t_ok, s_ok) {
                let td = &ts.time_derivs[k as usize - 1];
                let mut dot = 0.0;
                let mut na = 0.0;
                let mut nb = 0.0;
                for (a, b) in td.iter().zip(sd.values.iter()) {
                    dot += a * b;
                    na += a * a;
                    nb += b * b;
                }
                if na > 0.0 && nb > 0.0 {
                    c = (dot / (na * nb).sqrt()).abs();
                }
            }
        }
        couplings.push(c);
    }

    Ok(CoevolutionManifold {
        rank,
        celerity_cells,
        axis,
        celerity,
        celerity_cell_rate,
        couplings,
        spectrum,
        flat,
    })
}

/// Periodic cubic (Catmull-Rom) interpolation of a row at fractional index.
fn sample_periodic(row: &[f64], pos: f64) -> f64 {
    let n = row.len() as isize;
    let base = pos.floor();
    let frac = pos - base;
    let i = base as isize;
    let idx = |k: isize| -> f64 {
        let mut m = (i + k) % n;
        if m < 0 {
            m += n;
        }
        row[m as usize]
    };
    if frac == 0.0 {
        return idx(0);
    }
    let (p0, p1, p2, p3) = (idx(-1), idx(0), idx(1), idx(2));
    let t = frac;
    0.5 * ((2.0 * p1)
        + (-p0 + p2) * t
        + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * t * t
        + (-p0 + 3.0 * p1 - 3.0 * p2 + p3) * t * t * t)
}

/// Resample one component into comoving coordinates (+1) or back (-1).
fn shift_along_characteristics(
    values: &Array2<f64>, // (cell_along_axis, time) for a fixed off-axis row
    cell_rate: f64,
    direction: f64,
) -> Array2<f64> {
    let (ncells, nt) = values.dim();
    let mut out = Array2::zeros((ncells, nt));
    let mut row = vec![0.0; ncells];
    for t in 0..nt {
        for c in 0..ncells {
            row[c] = values[(c, t)];
        }
        let shift = direction * cell_rate * t as f64;
        for c in 0..ncells {
            out[(c, t)] = sample_periodic(&row, c as f64 + shift);
        }
    }
    out
}

/// View of one component as (lat-or-lon lines): for each off-axis row, an
/// (along-axis, time) matrix.
fn axis_lines(f: &SpatioTemporalField, comp: usize, axis: PropagationAxis) -> Vec<Array2<f64>> {
    let (ny, nx, nt) = (f.grid.n_lat(), f.grid.n_lon(), f.n_time());
    match axis {
        PropagationAxis::Lon => (0..ny)
            .map(|i| {
                let mut m = Array2::zeros((nx, nt));
                for t in 0..nt {
                    for j in 0..nx {
                        m[(j, t)] = f.values()[(comp, t, i, j)];
                    }
                }
                m
            })
            .collect(),
        PropagationAxis::Lat => (0..nx)
            .map(|j| {
                let mut m = Array2::zeros((ny, nt));
                for t in 0..nt {
                    for i in 0..ny {
                        m[(i, t)] = f.values()[(comp, t, i, j)];
                    }
                }
                m
            })
            .collect(),
    }
}

fn lines_to_cells(lines: &[Array2<f64>], grid: &Grid, axis: PropagationAxis) -> Vec<Array2<f64>> {
    // back to (cells, time) in (lat, lon) flat order per time
    let (ny, nx) = (grid.n_lat(), grid.n_lon());
    let nt = lines[0].ncols();
    let mut out = vec![Array2::zeros((ny, nx)); nt];
    for (r, line) in lines.iter().enumerate() {
        for t in 0..nt {
            for a in 0..line.nrows() {
                let (i, j) = match axis {
                    PropagationAxis::Lon => (r, a),
                    PropagationAxis::Lat => (a, r),
                };
                out[t][(i, j)] = line[(a, t)];
            }
        }
    }
    out
}

/// Comoving view of a component: propagation removed when rank >= 1.
fn comoving_matrix(
    f: &SpatioTemporalField,
    comp: usize,
    manifold: &CoevolutionManifold,
    direction: f64,
) -> DMatrix<f64> {
    let (ny, nx, nt) = (f.grid.n_lat(), f.grid.n_lon(), f.n_time());
    if manifold.rank == 0 || manifold.celerity_cell_rate == 0.0 {
        return space_time_matrix(f, comp);
    }
    let lines = axis_lines(f, comp, manifold.axis);
    let shifted: Vec<Array2<f64>> = lines
        .iter()
        .map(|l| shift_along_characteristics(l, manifold.celerity_cell_rate, direction))
        .collect();
    let per_time = lines_to_cells(&shifted, &f.grid, manifold.axis);
    let mut m = DMatrix::zeros(ny * nx, nt);
    for (t, slab) in per_time.iter().enumerate() {
        for i in 0..ny {
            for j in 0..nx {
                m[(i * nx + j, t)] = slab[(i, j)];
            }
        }
    }
    m
}

/// Split a field into spatial and temporal structures bound by the manifold.
pub fn decompose(
    x: &SpatioTemporalField,
    manifold: &CoevolutionManifold,
) -> Result<StructurePair> {
    x.require_complete("decompose")?;
    let (ny, nx) = (x.grid.n_lat(), x.grid.n_lon());
    let comp = 0;
    let m = comoving_matrix(x, comp, manifold, 1.0);
    let (values, u, v) = sorted_svd(&m, true)?;
    let scale = values[0].max(0.0).sqrt();

    let mut spatial = Array2::zeros((ny, nx));
    for i in 0..ny {
        for j in 0..nx {
            spatial[(i, j)] = u[(i * nx + j, 0)] * scale;
        }
    }
    let nt = x.n_time();
    let mut temporal = Array1::zeros(nt);
    for t in 0..nt {
        temporal[t] = v[(t, 0)] * scale;
    }

    // sign convention: largest-magnitude spatial loading positive
    let mut flip = 1.0;
    let mut best = 0.0f64;
    for v in spatial.iter() {
        if v.abs() > best {
            best = v.abs();
            flip = if *v < 0.0 { -1.0 } else { 1.0 };
        }
    }
    spatial.mapv_inplace(|v| v * flip);
    temporal.mapv_inplace(|v| v * flip);

    let spatial_affine = affine_of(spatial.as_slice().unwrap());
    let temporal_affine = affine_of(temporal.as_slice().unwrap());

    let mut pair = StructurePair {
        spatial_raw: spatial,
        temporal_raw: temporal,
        manifold: manifold.clone(),
        spatial_rank: 1,
        temporal_rank: 1,
        residual: 0.0,
        spatial_affine,
        temporal_affine,
    };
    let rebuilt = compose(&pair, &x.grid, x.n_time())?;
    let mut num = 0.0;
    let mut den = 0.0;
    for (a, b) in rebuilt.values().iter().zip(x.values().iter()) {
        num += (a - b) * (a - b);
        den += b * b;
    }
    pair.residual = if den > 0.0 { (num / den).sqrt() } else { 0.0 };
    Ok(pair)
}

/// Rebuild the field from its structures: outer product of the structures
/// contracted back through the manifold (inverse characteristic shift).
pub fn compose(pair: &StructurePair, grid: &Grid, nt: usize) -> Result<SpatioTemporalField> {
    let (ny, nx) = (grid.n_lat(), grid.n_lon());
    if pair.spatial_raw.dim() != (ny, nx) {
        return Err(Error::ShapeMismatch("spatial structure vs grid".into()));
    }
    if pair.temporal_raw.len() != nt {
        return Err(Error::ShapeMismatch("temporal structure vs time axis".into()));
    }
    let mut values = ndarray::Array4::zeros((1, nt, ny, nx));
    for t in 0..nt {
        for i in 0..ny {
            for j in 0..nx {
                values[(0, t, i, j)] = pair.spatial_raw[(i, j)] * pair.temporal_raw[t];
            }
        }
    }
    let time = crate::field::TimeAxis::regular(0.0, 1.0, nt)?;
    let outer = SpatioTemporalField::complete(grid.clone(), time, values)?;
    if pair.manifold.rank == 0 || pair.manifold.celerity_cell_rate == 0.0 {
        return Ok(outer);
    }
    let lines = axis_lines(&outer, 0, pair.manifold.axis);
    let shifted: Vec<Array2<f64>> = lines
        .iter()
        .map(|l| shift_along_characteristics(l, pair.manifold.celerity_cell_rate, -1.0))
        .collect();
    let per_time = lines_to_cells(&shifted, grid, pair.manifold.axis);
    let mut values = ndarray::Array4::zeros((1, nt, ny, nx));
    for (t, slab) in per_time.iter().enumerate() {
        for i in 0..ny {
            for j in 0..nx {
                values[(0, t, i, j)] = slab[(i, j)];
            }
        }
    }
    let time = crate::field::TimeAxis::regular(0.0, 1.0, nt)?;
    SpatioTemporalField::complete(grid.clone(), time, values)
}

/// Contraction of a (cells x time) entry matrix against a subspace basis,
/// optionally riding the manifold characteristics first.
///
/// With a time basis the result is the spatial structure (length = cells);
/// with a space basis, the temporal structure (length = time). When the
/// basis has a nonzero mean the projection is normalized so a constant field
/// maps to the same constant.
pub fn retrieval_product(
    a: &Array2<f64>,
    b: &SubspaceBasis,
    manifold: Option<&CoevolutionManifold>,
) -> Result<Array1<f64>> {
    let (ncells, nt) = a.dim();
    let shifted: Array2<f64> = match manifold {
        Some(m) if m.rank >= 1 && m.celerity_cell_rate != 0.0 => {
            // single-line view: rows are cells along the dominant axis
            shift_along_characteristics(a, m.celerity_cell_rate, 1.0)
        }
        _ => a.clone(),
    };
    let e = &b.vectors;
    match b.label {
        SubspaceLabel::Time => {
            if e.nrows() != nt {
                return Err(Error::ShapeMismatch("time basis length".into()));
            }
            let esum: f64 = (0..nt).map(|t| e[(t, 0)]).sum();
            let norm = if esum.abs() > 1e-8 * (nt as f64).sqrt() {
                esum
            } else {
                1.0
            };
            let mut out = Array1::zeros(ncells);
            for c in 0..ncells {
                let mut acc = 0.0;
                for t in 0..nt {
                    acc += shifted[(c, t)] * e[(t, 0)];
                }
                out[c] = acc / norm;
            }
            Ok(out)
        }
        SubspaceLabel::Space | SubspaceLabel::Generic => {
            if e.nrows() != ncells {
                return Err(Error::ShapeMismatch("space basis length".into()));
            }
            let esum: f64 = (0..ncells).map(|c| e[(c, 0)]).sum();
            let norm = if esum.abs() > 1e-8 * (ncells as f64).sqrt() {
                esum
            } else {
                1.0
            };
            let mut out = Array1::zeros(nt);
            for t in 0..nt {
                let mut acc = 0.0;
                for c in 0..ncells {
                    acc += shifted[(c, t)] * e[(c, 0)];
                }
                out[t] = acc / norm;
            }
            Ok(out)
        }
    }
}

/// Serialize a structure pair: spatial part as csv-grid, temporal part as
/// two-column text, manifold as flat text.
pub fn write_structure_pair(
    pair: &StructurePair,
    grid: &Grid,
    timestamps: &[f64],
    dir: &std::path::Path,
) -> Result<()> {
    crate::field::write_map_csv(grid, &pair.spatial_raw, &dir.join("spatial.csv"))?;
    let mut temporal = String::new();
    for (t, v) in pair.temporal_raw.iter().enumerate() {
        temporal.push_str(&format!("{} {}\n", timestamps.get(t).copied().unwrap_or(t as f64), v));
    }
    crate::field::atomic_write(&dir.join("temporal.txt"), &temporal)?;
    let mut mf = String::new();
    mf.push_str(&format!("rank {}\n", pair.manifold.rank));
    mf.push_str(&format!("celerity {}\n", pair.manifold.celerity));
    mf.push_str(&format!("celerity_cells_per_step {}\n", pair.manifold.celerity_cell_rate));
    mf.push_str(&format!(
        "axis {}\n",
        match pair.manifold.axis {
            PropagationAxis::Lat => "lat",
            PropagationAxis::Lon => "lon",
        }
    ));
    mf.push_str(&format!(
        "couplings {}\n",
        pair.manifold
            .couplings
            .iter()
            .map(|c| c.to_string())
            .collect::<Vec<_>>()
            .join(" ")
    ));
    for i in 0..grid.n_lat() {
        let row: Vec<String> = (0..grid.n_lon())
            .map(|j| pair.manifold.celerity_cells[(i, j)].to_string())
            .collect();
        mf.push_str(&format!("celerity_row {}\n", row.join(" ")));
    }
    crate::field::atomic_write(&dir.join("manifold.txt"), &mf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::TimeAxis;
    use ndarray::Array4;
    use std::f64::consts::PI;

    /// Propagating carrier at celerity `omega` times the canonic temporal
    /// oscillation at `omega - v`; periodic in lon over [0, 2 pi).
    fn wave_field(nx: usize, nt: usize, omega: f64, v: f64) -> SpatioTemporalField {
        let dsigma = 2.0 * PI / nx as f64;
        let dt = dsigma / omega; // one cell per step at the carrier celerity
        let lon: Vec<f64> = (0..nx).map(|j| j as f64 * dsigma).collect();
        let grid = Grid::new(vec![0.0, 1.0], lon.clone()).unwrap();
        let time = TimeAxis::regular(0.0, dt, nt).unwrap();
        let mut values = Array4::zeros((1, nt, 2, nx));
        for t in 0..nt {
            let tv = time.timestamps()[t];
            for j in 0..nx {
                let w = (lon[j] - omega * tv).cos() * ((omega - v) * tv).cos();
                values[(0, t, 0, j)] = w;
                values[(0, t, 1, j)] = w;
            }
        }
        SpatioTemporalField::complete(grid, time, values).unwrap()
    }

    fn separable_field(nx: usize, nt: usize) -> SpatioTemporalField {
        let lon: Vec<f64> = (0..nx).map(|j| 2.0 * PI * j as f64 / nx as f64).collect();
        let grid = Grid::new(vec![0.0, 1.0], lon.clone()).unwrap();
        let time = TimeAxis::regular(0.0, 0.05, nt).unwrap();
        let mut values = Array4::zeros((1, nt, 2, nx));
        for t in 0..nt {
            let h = (0.9 * time.timestamps()[t]).sin() + 1.7;
            for j in 0..nx {
                let g = lon[j].cos() + 0.3;
                values[(0, t, 0, j)] = g * h;
                values[(0, t, 1, j)] = g * h;
            }
        }
        SpatioTemporalField::complete(grid, time, values).unwrap()
    }

    #[test]
    fn wave_celerity_within_one_percent() {
        let f = wave_field(128, 256, 2.0, 0.5);
        let m = estimate_coevolution(&f).unwrap();
        assert_eq!(m.axis, PropagationAxis::Lon);
        assert!(
            (m.celerity - 2.0).abs() / 2.0 < 0.01,
            "estimated celerity {}",
            m.celerity
        );
        assert_eq!(m.rank, 1, "spectrum {:?}", &m.spectrum[..4.min(m.spectrum.len())]);
    }

    #[test]
    fn separable_field_has_rank_zero() {
        let f = separable_field(64, 128);
        let m = estimate_coevolution(&f).unwrap();
        assert_eq!(m.rank, 0);
    }

    #[test]
    fn standing_wave_is_separable() {
        let nx = 64;
        let nt = 128;
        let lon: Vec<f64> = (0..nx).map(|j| 2.0 * PI * j as f64 / nx as f64).collect();
        let grid = Grid::new(vec![0.0, 1.0], lon.clone()).unwrap();
        let time = TimeAxis::regular(0.0, 0.05, nt).unwrap();
        let mut values = Array4::zeros((1, nt, 2, nx));
        for t in 0..nt {
            for j in 0..nx {
                let w = lon[j].cos() * (0.5 * time.timestamps()[t]).cos();
                values[(0, t, 0, j)] = w;
                values[(0, t, 1, j)] = w;
            }
        }
        let f = SpatioTemporalField::complete(grid, time, values).unwrap();
        let m = estimate_coevolution(&f).unwrap();
        assert_eq!(m.rank, 0);
    }

    #[test]
    fn flat_field_rank_zero_with_warning() {
        let grid = Grid::new(
            (0..8).map(|i| i as f64).collect(),
            (0..8).map(|i| i as f64).collect(),
        )
        .unwrap();
        let time = TimeAxis::regular(0.0, 1.0, 32).unwrap();
        let values = Array4::from_elem((1, 32, 8, 8), 1.5);
        let f = SpatioTemporalField::complete(grid, time, values).unwrap();
        let m = estimate_coevolution(&f).unwrap();
        assert!(m.flat);
        assert_eq!(m.rank, 0);
        assert!(m.celerity_cells.iter().all(|&c| c == 0.0));
    }

    #[test]
    fn separable_decomposition_recovers_factors() {
        let f = separable_field(64, 128);
        let m = estimate_coevolution(&f).unwrap();
        let pair = decompose(&f, &m).unwrap();
        // correlation against the true factors
        let lon = f.grid.lon().to_vec();
        let g: Vec<f64> = lon.iter().map(|&s| s.cos() + 0.3).collect();
        let h: Vec<f64> = f
            .time
            .timestamps()
            .iter()
            .map(|&t| (0.9 * t).sin() + 1.7)
            .collect();
        let xs: Vec<f64> = (0..64).map(|j| pair.spatial_raw[(0, j)]).collect();
        let xt: Vec<f64> = pair.temporal_raw.to_vec();
        assert!(crate::linalg::correlation(&xs, &g).abs() >= 0.999);
        assert!(crate::linalg::correlation(&xt, &h).abs() >= 0.999);
        // compose round trip at projection accuracy
        assert!(pair.residual <= 1e-10, "residual {}", pair.residual);
    }

    #[test]
    fn constant_field_structures_are_constant() {
        let grid = Grid::new(vec![0.0, 1.0], (0..16).map(|i| i as f64).collect()).unwrap();
        let time = TimeAxis::regular(0.0, 1.0, 32).unwrap();
        let values = Array4::from_elem((1, 32, 2, 16), 2.5);
        let f = SpatioTemporalField::complete(grid, time, values).unwrap();
        let m = CoevolutionManifold {
            rank: 0,
            celerity_cells: Array2::zeros((2, 16)),
            axis: PropagationAxis::Lon,
            celerity: 0.0,
            celerity_cell_rate: 0.0,
            couplings: vec![0.0; 3],
            spectrum: vec![],
            flat: true,
        };
        let pair = decompose(&f, &m).unwrap();
        let s0 = pair.spatial_raw[(0, 0)];
        assert!(pair.spatial_raw.iter().all(|&v| (v - s0).abs() < 1e-10));
        let t0 = pair.temporal_raw[0];
        assert!(pair.temporal_raw.iter().all(|&v| (v - t0).abs() < 1e-10));
        assert!((s0 * t0 - 2.5).abs() < 1e-10);
    }

    #[test]
    fn traveling_wave_canonic_temporal_structure() {
        let f = wave_field(256, 512, 2.0, 0.5);
        let m = estimate_coevolution(&f).unwrap();
        assert_eq!(m.rank, 1);
        let pair = decompose(&f, &m).unwrap();
        // temporal structure should be cos(1.5 t) up to scale and sign
        let xt = pair.temporal_standardized();
        let target: Vec<f64> = f
            .time
            .timestamps()
            .iter()
            .map(|&t| (1.5 * t).cos())
            .collect();
        let (mt, st) = (mean(&target), std_dev(&target));
        let tgt_std: Vec<f64> = target.iter().map(|v| (v - mt) / st).collect();
        let sign = if crate::linalg::correlation(&xt.to_vec(), &tgt_std) < 0.0 {
            -1.0
        } else {
            1.0
        };
        let rms: f64 = (xt
            .iter()
            .zip(&tgt_std)
            .map(|(a, b)| (sign * a - b) * (sign * a - b))
            .sum::<f64>()
            / xt.len() as f64)
            .sqrt();
        let target_rms =
            (tgt_std.iter().map(|v| v * v).sum::<f64>() / tgt_std.len() as f64).sqrt();
        assert!(rms / target_rms < 0.01, "relative rms {}", rms / target_rms);
        // round trip within the wave tolerance
        assert!(pair.residual <= 1e-6, "residual {}", pair.residual);
        // rank additivity
        assert_eq!(pair.composed_rank(), 1);
    }

    #[test]
    fn separable_rank_additivity_is_two() {
        let f = separable_field(64, 128);
        let m = estimate_coevolution(&f).unwrap();
        let pair = decompose(&f, &m).unwrap();
        assert_eq!(pair.composed_rank(), 2);
    }

    #[test]
    fn retrieval_product_identity_and_noncommutativity() {
        let f = separable_field(32, 64);
        // single-line view of component 0 at lat row 0
        let mut a = Array2::zeros((32, 64));
        for t in 0..64 {
            for j in 0..32 {
                a[(j, t)] = f.values()[(0, t, 0, j)];
            }
        }
        let (e_s, e_t) =
            matrix_bases(&a, 1, SubspaceLabel::Space, SubspaceLabel::Time).unwrap();
        assert!(e_s.orthonormality_defect() < 1e-10);
        assert!(e_t.orthonormality_defect() < 1e-10);

        // retrieving against the field's own leading temporal basis equals
        // the plain projection when rank is 0
        let spatial = retrieval_product(&a, &e_t, None).unwrap();
        let esum: f64 = (0..64).map(|t| e_t.vectors[(t, 0)]).sum();
        for j in 0..32 {
            let mut proj = 0.0;
            for t in 0..64 {
                proj += a[(j, t)] * e_t.vectors[(t, 0)];
            }
            assert!((spatial[j] - proj / esum).abs() <= 1e-12);
        }

        // order matters: space-structure of A given B differs from the
        // B-side retrieval on a generic asymmetric operand
        let temporal = retrieval_product(&a, &half_space_basis(&e_s), None).unwrap();
        assert_ne!(spatial.len(), 0);
        assert_ne!(temporal.len(), 0);
        let s_head: Vec<f64> = spatial.iter().take(8).copied().collect();
        let t_head: Vec<f64> = temporal.iter().take(8).copied().collect();
        assert!(
            s_head
                .iter()
                .zip(&t_head)
                .any(|(x, y)| (x - y).abs() > 1e-9),
            "retrievals coincide unexpectedly"
        );
    }

    fn half_space_basis(e_s: &SubspaceBasis) -> SubspaceBasis {
        // perturbed copy so the operand pair is genuinely asymmetric
        let mut v = e_s.vectors.clone();
        let n = v.nrows();
        for i in 0..n {
            v[(i, 0)] *= 1.0 + 0.1 * (i as f64 / n as f64);
        }
        let norm: f64 = (0..n).map(|i| v[(i, 0)] * v[(i, 0)]).sum::<f64>().sqrt();
        for i in 0..n {
            v[(i, 0)] /= norm;
        }
        SubspaceBasis {
            label: SubspaceLabel::Space,
            vectors: v,
        }
    }
}
