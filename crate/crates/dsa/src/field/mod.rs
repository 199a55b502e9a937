//! Gridded spatiotemporal field model: axes, the field type, file formats,
//! preprocessing (moving average, standardization, fill) and partitions.
//!
//! Fields are immutable after construction; every operation returns a new
//! field, so shared inputs can be processed concurrently.

mod io;
mod partition;
mod preprocess;

pub use io::{read_field, write_field, write_map_csv, FieldFormat, MISSING_SENTINEL};
pub(crate) use io::atomic_write;
pub use partition::{enumerate_partitions, Partition, PartitionMember, PartitionScheme};
pub use preprocess::{fill, moving_average, standardize, CellMoments};

use crate::error::{Error, Result};
use ndarray::{Array1, Array2, Array4};

/// Spatial grid: ordered latitude/longitude axes plus normalized
/// cos(latitude) area weights (summing to 1 over all cells).
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    lat: Vec<f64>,
    lon: Vec<f64>,
    weights: Array2<f64>,
}

fn strictly_monotone(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] > w[0]) || v.windows(2).all(|w| w[1] < w[0])
}

impl Grid {
    pub fn new(lat: Vec<f64>, lon: Vec<f64>) -> Result<Self> {
        if lat.len() < 2 || lon.len() < 2 {
            return Err(Error::InvalidAxis(
                "grid needs at least 2 points per axis".into(),
            ));
        }
        if !strictly_monotone(&lat) {
            return Err(Error::InvalidAxis("latitude axis not strictly monotone".into()));
        }
        if !strictly_monotone(&lon) {
            return Err(Error::InvalidAxis("longitude axis not strictly monotone".into()));
        }
        let mut weights = Array2::zeros((lat.len(), lon.len()));
        for (i, la) in lat.iter().enumerate() {
            let w = la.to_radians().cos().max(0.0);
            for j in 0..lon.len() {
                weights[(i, j)] = w;
            }
        }
        let total: f64 = weights.sum();
        if total <= 0.0 {
            // poles-only grid; fall back to uniform measure
            weights.fill(1.0 / (lat.len() * lon.len()) as f64);
        } else {
            weights.mapv_inplace(|w| w / total);
        }
        Ok(Grid { lat, lon, weights })
    }

    pub fn lat(&self) -> &[f64] {
        &self.lat
    }
    pub fn lon(&self) -> &[f64] {
        &self.lon
    }
    pub fn n_lat(&self) -> usize {
        self.lat.len()
    }
    pub fn n_lon(&self) -> usize {
        self.lon.len()
    }
    pub fn n_cells(&self) -> usize {
        self.lat.len() * self.lon.len()
    }

    /// Normalized area weight of cell (i, j); weights sum to 1.
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[(i, j)]
    }
    pub fn weights(&self) -> &Array2<f64> {
        &self.weights
    }

    /// Uniform spacing of an axis, if uniform within 1e-9 relative.
    pub fn uniform_step(values: &[f64]) -> Option<f64> {
        let step = values[1] - values[0];
        let ok = values
            .windows(2)
            .all(|w| ((w[1] - w[0]) - step).abs() <= 1e-9 * step.abs().max(1.0));
        ok.then_some(step)
    }
}

/// Regularly spaced time axis in days since an arbitrary epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeAxis {
    timestamps: Vec<f64>,
    step: f64,
}

impl TimeAxis {
    pub fn new(timestamps: Vec<f64>) -> Result<Self> {
        if timestamps.is_empty() {
            return Err(Error::InvalidAxis("time axis needs at least 1 sample".into()));
        }
        if timestamps.len() == 1 {
            // single map; nominal unit step
            return Ok(TimeAxis { timestamps, step: 1.0 });
        }
        if !timestamps.windows(2).all(|w| w[1] > w[0]) {
            return Err(Error::InvalidAxis("time axis not strictly increasing".into()));
        }
        let step = timestamps[1] - timestamps[0];
        for w in timestamps.windows(2) {
            if ((w[1] - w[0]) - step).abs() > 1e-9 * step.abs() {
                return Err(Error::InvalidAxis(format!(
                    "irregular time axis: step {} vs {}",
                    w[1] - w[0],
                    step
                )));
            }
        }
        Ok(TimeAxis { timestamps, step })
    }

    /// Evenly spaced axis with `n` samples starting at `start`.
    pub fn regular(start: f64, step: f64, n: usize) -> Result<Self> {
        Self::new((0..n).map(|i| start + step * i as f64).collect())
    }

    pub fn timestamps(&self) -> &[f64] {
        &self.timestamps
    }
    pub fn len(&self) -> usize {
        self.timestamps.len()
    }
    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }
    pub fn step(&self) -> f64 {
        self.step
    }
}

/// Gridded multi-component field over a space grid and time axis.
///
/// Values are indexed `(component, time, lat, lon)`. The missing mask is
/// `true` where a value is absent; all non-missing values are finite.
#[derive(Debug, Clone)]
pub struct SpatioTemporalField {
    pub grid: Grid,
    pub time: TimeAxis,
    values: Array4<f64>,
    mask: Array4<bool>,
}

impl SpatioTemporalField {
    pub fn new(grid: Grid, time: TimeAxis, values: Array4<f64>, mask: Array4<bool>) -> Result<Self> {
        let (nc, nt, ny, nx) = values.dim();
        if nc == 0 {
            return Err(Error::ShapeMismatch("field needs at least 1 component".into()));
        }
        if nt != time.len() || ny != grid.n_lat() || nx != grid.n_lon() {
            return Err(Error::ShapeMismatch(format!(
                "values {:?} vs time {} and grid {}x{}",
                values.dim(),
                time.len(),
                grid.n_lat(),
                grid.n_lon()
            )));
        }
        if mask.dim() != values.dim() {
            return Err(Error::ShapeMismatch("mask shape differs from values".into()));
        }
        for (v, &m) in values.iter().zip(mask.iter()) {
            if !m && !v.is_finite() {
                return Err(Error::Numerical("non-missing value is not finite".into()));
            }
        }
        Ok(SpatioTemporalField { grid, time, values, mask })
    }

    /// Field with no missing values.
    pub fn complete(grid: Grid, time: TimeAxis, values: Array4<f64>) -> Result<Self> {
        let mask = Array4::from_elem(values.dim(), false);
        Self::new(grid, time, values, mask)
    }

    /// Build an `n_comp`-component field from per-component time series,
    /// each broadcast over every grid cell.
    pub fn from_series(grid: Grid, time: TimeAxis, series: &Array2<f64>) -> Result<Self> {
        let (nt, nc) = series.dim();
        if nt != time.len() {
            return Err(Error::ShapeMismatch("series rows vs time axis".into()));
        }
        let (ny, nx) = (grid.n_lat(), grid.n_lon());
        let mut values = Array4::zeros((nc, nt, ny, nx));
        for c in 0..nc {
            for t in 0..nt {
                let v = series[(t, c)];
                for i in 0..ny {
                    for j in 0..nx {
                        values[(c, t, i, j)] = v;
                    }
                }
            }
        }
        Self::complete(grid, time, values)
    }

    pub fn n_components(&self) -> usize {
        self.values.dim().0
    }
    pub fn n_time(&self) -> usize {
        self.values.dim().1
    }
    pub fn values(&self) -> &Array4<f64> {
        &self.values
    }
    pub fn mask(&self) -> &Array4<bool> {
        &self.mask
    }
    pub fn has_missing(&self) -> bool {
        self.mask.iter().any(|&m| m)
    }

    pub fn require_complete(&self, what: &str) -> Result<()> {
        if self.has_missing() {
            Err(Error::MissingValues(what.into()))
        } else {
            Ok(())
        }
    }

    /// Area-weighted spatial mean series of one component.
    pub fn area_mean_series(&self, comp: usize) -> Array1<f64> {
        let nt = self.n_time();
        let mut out = Array1::zeros(nt);
        for t in 0..nt {
            let mut acc = 0.0;
            let mut wsum = 0.0;
            for i in 0..self.grid.n_lat() {
                for j in 0..self.grid.n_lon() {
                    if !self.mask[(comp, t, i, j)] {
                        let w = self.grid.weight(i, j);
                        acc += w * self.values[(comp, t, i, j)];
                        wsum += w;
                    }
                }
            }
            out[t] = if wsum > 0.0 { acc / wsum } else { f64::NAN };
        }
        out
    }

    /// Per-component time series matrix (time x component) for fields whose
    /// cells all carry the same series; falls back to the area mean.
    pub fn component_series(&self) -> Array2<f64> {
        let (nc, nt) = (self.n_components(), self.n_time());
        let mut out = Array2::zeros((nt, nc));
        for c in 0..nc {
            let s = self.area_mean_series(c);
            out.column_mut(c).assign(&s);
        }
        out
    }
}
