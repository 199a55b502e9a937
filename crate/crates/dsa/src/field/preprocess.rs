//! Field preprocessing: centered moving averages, per-cell standardization
//! and explicit gap filling.
//!
//! Derivative and tensor estimation require mask-free inputs, so imputation
//! is a separate, auditable [`fill`] step rather than something the numeric
//! kernels do on the fly.

use super::{SpatioTemporalField, TimeAxis};
use crate::error::{Error, Result};
use ndarray::{Array4, ArrayView1};

/// Per-cell affine transform recorded by [`standardize`]: value = mean + std * z.
#[derive(Debug, Clone)]
pub struct CellMoments {
    pub mean: Array4<f64>,
    pub std: Array4<f64>,
}

impl CellMoments {
    /// Map a standardized field back to original units.
    pub fn destandardize(&self, f: &SpatioTemporalField) -> Result<SpatioTemporalField> {
        let (nc, nt, ny, nx) = f.values().dim();
        let mut out = f.values().clone();
        for c in 0..nc {
            for t in 0..nt {
                for i in 0..ny {
                    for j in 0..nx {
                        out[(c, t, i, j)] = self.mean[(c, 0, i, j)]
                            + self.std[(c, 0, i, j)] * out[(c, t, i, j)];
                    }
                }
            }
        }
        SpatioTemporalField::new(f.grid.clone(), f.time.clone(), out, f.mask().clone())
    }
}

/// Centered moving mean over non-missing values; the output time axis is
/// trimmed to positions where the window fits entirely inside the record.
pub fn moving_average(f: &SpatioTemporalField, window_days: f64) -> Result<SpatioTemporalField> {
    let step = f.time.step();
    if window_days <= 0.0 {
        return Err(Error::Config("window must be positive".into()));
    }
    let w = ((window_days / step).round() as usize).max(1);
    let nt = f.n_time();
    if w > nt {
        return Err(Error::Config(format!(
            "window of {w} steps exceeds record length {nt}"
        )));
    }
    let out_nt = nt - w + 1;
    let (nc, _, ny, nx) = f.values().dim();
    let mut values = Array4::zeros((nc, out_nt, ny, nx));
    let mut mask = Array4::from_elem((nc, out_nt, ny, nx), false);
    for c in 0..nc {
        for i in 0..ny {
            for j in 0..nx {
                for t0 in 0..out_nt {
                    let mut acc = 0.0;
                    let mut n = 0usize;
                    for t in t0..t0 + w {
                        if !f.mask()[(c, t, i, j)] {
                            acc += f.values()[(c, t, i, j)];
                            n += 1;
                        }
                    }
                    if n == 0 {
                        mask[(c, t0, i, j)] = true;
                    } else {
                        values[(c, t0, i, j)] = acc / n as f64;
                    }
                }
            }
        }
    }
    // window-center timestamps
    let ts: Vec<f64> = (0..out_nt)
        .map(|t0| {
            let lo = f.time.timestamps()[t0];
            let hi = f.time.timestamps()[t0 + w - 1];
            0.5 * (lo + hi)
        })
        .collect();
    SpatioTemporalField::new(f.grid.clone(), TimeAxis::new(ts)?, values, mask)
}

fn mean_std(xs: ArrayView1<f64>, mask: ArrayView1<bool>) -> (f64, f64, usize) {
    let mut n = 0usize;
    let mut mean = 0.0;
    for (x, &m) in xs.iter().zip(mask.iter()) {
        if !m {
            n += 1;
            mean += x;
        }
    }
    if n == 0 {
        return (0.0, 0.0, 0);
    }
    mean /= n as f64;
    let mut ss = 0.0;
    for (x, &m) in xs.iter().zip(mask.iter()) {
        if !m {
            ss += (x - mean) * (x - mean);
        }
    }
    let std = if n > 1 { (ss / (n as f64 - 1.0)).sqrt() } else { 0.0 };
    (mean, std, n)
}

/// Per-cell standardization over time (sample variance, n-1 denominator).
/// Returns the standardized field and the stored affine transform.
pub fn standardize(f: &SpatioTemporalField) -> Result<(SpatioTemporalField, CellMoments)> {
    let (nc, nt, ny, nx) = f.values().dim();
    let mut mean = Array4::zeros((nc, 1, ny, nx));
    let mut std = Array4::zeros((nc, 1, ny, nx));
    let mut values = f.values().clone();
    for c in 0..nc {
        for i in 0..ny {
            for j in 0..nx {
                let col = f.values().slice(ndarray::s![c, .., i, j]);
                let msk = f.mask().slice(ndarray::s![c, .., i, j]);
                let (m, s, n) = mean_std(col, msk);
                if n < 2 {
                    return Err(Error::Numerical(format!(
                        "cell (comp {c}, lat {i}, lon {j}) has {n} samples, need at least 2"
                    )));
                }
                if s == 0.0 {
                    return Err(Error::Numerical(format!(
                        "zero-variance cell (comp {c}, lat {i}, lon {j})"
                    )));
                }
                mean[(c, 0, i, j)] = m;
                std[(c, 0, i, j)] = s;
                for t in 0..nt {
                    values[(c, t, i, j)] = (values[(c, t, i, j)] - m) / s;
                }
            }
        }
    }
    let out = SpatioTemporalField::new(f.grid.clone(), f.time.clone(), values, f.mask().clone())?;
    Ok((out, CellMoments { mean, std }))
}

/// Fill missing values: linear interpolation in time inside each cell,
/// nearest non-missing cell in space where a whole cell record is missing.
pub fn fill(f: &SpatioTemporalField) -> Result<SpatioTemporalField> {
    let (nc, nt, ny, nx) = f.values().dim();
    let mut values = f.values().clone();
    let mut still_empty: Vec<(usize, usize, usize)> = Vec::new();
    for c in 0..nc {
        for i in 0..ny {
            for j in 0..nx {
                let known: Vec<usize> =
                    (0..nt).filter(|&t| !f.mask()[(c, t, i, j)]).collect();
                if known.is_empty() {
                    still_empty.push((c, i, j));
                    continue;
                }
                for t in 0..nt {
                    if f.mask()[(c, t, i, j)] {
                        let next = known.iter().copied().find(|&k| k > t);
                        let prev = known.iter().copied().rev().find(|&k| k < t);
                        values[(c, t, i, j)] = match (prev, next) {
                            (Some(p), Some(n)) => {
                                let a = f.values()[(c, p, i, j)];
                                let b = f.values()[(c, n, i, j)];
                                a + (b - a) * (t - p) as f64 / (n - p) as f64
                            }
                            (Some(p), None) => f.values()[(c, p, i, j)],
                            (None, Some(n)) => f.values()[(c, n, i, j)],
                            (None, None) => unreachable!(),
                        };
                    }
                }
            }
        }
    }
    for (c, i, j) in still_empty {
        // nearest cell (grid-index distance) with any data
        let mut best: Option<(usize, usize, usize)> = None;
        for ii in 0..ny {
            for jj in 0..nx {
                if (ii, jj) == (i, j) {
                    continue;
                }
                if (0..nt).any(|t| !f.mask()[(c, t, ii, jj)]) {
                    let d = (ii as isize - i as isize).unsigned_abs().pow(2)
                        + (jj as isize - j as isize).unsigned_abs().pow(2);
                    if best.map(|(bd, _, _)| d < bd).unwrap_or(true) {
                        best = Some((d, ii, jj));
                    }
                }
            }
        }
        let (_, ii, jj) = best.ok_or_else(|| {
            Error::Numerical(format!("component {c} has no data anywhere on the grid"))
        })?;
        for t in 0..nt {
            values[(c, t, i, j)] = values[(c, t, ii, jj)];
        }
    }
    SpatioTemporalField::complete(f.grid.clone(), f.time.clone(), values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Grid;
    use ndarray::Array4;

    fn grid() -> Grid {
        Grid::new(vec![0.0, 1.0], vec![0.0, 1.0]).unwrap()
    }

    fn field_from_fn(nt: usize, step: f64, f: impl Fn(f64) -> f64) -> SpatioTemporalField {
        let time = TimeAxis::regular(0.0, step, nt).unwrap();
        let mut values = Array4::zeros((1, nt, 2, 2));
        for t in 0..nt {
            let v = f(time.timestamps()[t]);
            for i in 0..2 {
                for j in 0..2 {
                    values[(0, t, i, j)] = v;
                }
            }
        }
        SpatioTemporalField::complete(grid(), time, values).unwrap()
    }

    #[test]
    fn constant_field_unchanged_by_moving_average() {
        let f = field_from_fn(20, 1.0, |_| 3.25);
        let g = moving_average(&f, 5.0).unwrap();
        assert!(g.values().iter().all(|&v| (v - 3.25).abs() < 1e-14));
        assert_eq!(g.n_time(), 16);
    }

    #[test]
    fn unit_window_is_identity() {
        let f = field_from_fn(10, 1.0, |t| t * t - 2.0);
        let g = moving_average(&f, 1.0).unwrap();
        assert_eq!(g.n_time(), 10);
        assert_eq!(g.values(), f.values());
    }

    #[test]
    fn full_period_sine_averages_to_zero() {
        // window spans exactly one period: discrete sum over equi-spaced
        // samples of a sine over a full period vanishes
        let period = 64.0;
        let f = field_from_fn(256, 1.0, |t| (2.0 * std::f64::consts::PI * t / period).sin());
        let g = moving_average(&f, period).unwrap();
        let max = g.values().iter().fold(0.0f64, |a, &b| a.max(b.abs()));
        assert!(max <= 1e-10, "residual amplitude {max}");
        // direct-summation oracle at one output index
        let t0 = 7usize;
        let oracle: f64 = (t0..t0 + 64)
            .map(|t| (2.0 * std::f64::consts::PI * t as f64 / period).sin())
            .sum::<f64>()
            / 64.0;
        assert!((g.values()[(0, t0, 0, 0)] - oracle).abs() < 1e-14);
    }

    #[test]
    fn window_longer_than_record_errors() {
        let f = field_from_fn(5, 1.0, |t| t);
        assert!(moving_average(&f, 10.0).is_err());
    }

    #[test]
    fn standardize_moments_via_independent_summation() {
        let f = field_from_fn(200, 1.0, |t| (t * 0.7).sin() * 3.0 + 5.0);
        let (g, _) = standardize(&f).unwrap();
        let n = g.n_time() as f64;
        // oracle: accumulate in reverse order with separate loops
        let mut m = 0.0;
        for t in (0..g.n_time()).rev() {
            m += g.values()[(0, t, 0, 0)];
        }
        m /= n;
        let mut ss = 0.0;
        for t in (0..g.n_time()).rev() {
            let d = g.values()[(0, t, 0, 0)] - m;
            ss += d * d;
        }
        let s = (ss / (n - 1.0)).sqrt();
        assert!(m.abs() <= 1e-12);
        assert!((s - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn standardize_affine_invariance() {
        let g0 = field_from_fn(50, 1.0, |t| (t * 0.3).cos());
        let g1 = field_from_fn(50, 1.0, |t| 2.0 * (t * 0.3).cos() + 5.0);
        let (s0, _) = standardize(&g0).unwrap();
        let (s1, _) = standardize(&g1).unwrap();
        for (a, b) in s0.values().iter().zip(s1.values().iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn standardize_is_idempotent() {
        let f = field_from_fn(64, 1.0, |t| (t * 0.9).sin());
        let (s, _) = standardize(&f).unwrap();
        let (s2, _) = standardize(&s).unwrap();
        for (a, b) in s.values().iter().zip(s2.values().iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_variance_cell_named_in_error() {
        let f = field_from_fn(10, 1.0, |_| 1.0);
        match standardize(&f) {
            Err(Error::Numerical(msg)) => assert!(msg.contains("lat 0")),
            other => panic!("expected zero-variance error, got {other:?}"),
        }
    }

    #[test]
    fn fill_interpolates_linearly_in_time() {
        let time = TimeAxis::regular(0.0, 1.0, 5).unwrap();
        let mut values = Array4::zeros((1, 5, 2, 2));
        let mut mask = Array4::from_elem((1, 5, 2, 2), false);
        for t in 0..5 {
            for i in 0..2 {
                for j in 0..2 {
                    values[(0, t, i, j)] = t as f64;
                }
            }
        }
        values[(0, 2, 0, 0)] = 0.0;
        mask[(0, 2, 0, 0)] = true;
        let f = SpatioTemporalField::new(grid(), time, values, mask).unwrap();
        let g = fill(&f).unwrap();
        assert!((g.values()[(0, 2, 0, 0)] - 2.0).abs() < 1e-14);
        assert!(!g.has_missing());
    }
}
