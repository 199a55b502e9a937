//! Temporal derivatives of order 1..=beta.

use super::stencil::{central_half_width, central_stencil, fd_weights};
use super::{DerivativeStack, SobolevConfig, TimeScheme};
use crate::error::{Error, Result};
use crate::field::SpatioTemporalField;
use ndarray::{Array1, Array4};

/// Richardson-extrapolated centered differences need points at strides
/// 1, 2 and 4 on both sides.
const RICHARDSON_STRIDES: [usize; 3] = [1, 2, 4];

/// Detect jump samples per series: |second difference| above 5 robust sigmas.
/// Weak differentiability across such samples is handled by falling back to
/// one-sided stencils that do not straddle the jump.
fn detect_jumps(series: &[f64]) -> Vec<bool> {
    let n = series.len();
    let mut flags = vec![false; n];
    if n < 4 {
        return flags;
    }
    let d2: Vec<f64> = (1..n - 1)
        .map(|t| series[t + 1] - 2.0 * series[t] + series[t - 1])
        .collect();
    let mut abs: Vec<f64> = d2.iter().map(|v| v.abs()).collect();
    abs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mad = abs[abs.len() / 2];
    let sigma = 1.4826 * mad;
    if sigma <= 0.0 {
        return flags;
    }
    for (t, v) in d2.iter().enumerate() {
        if v.abs() > 5.0 * sigma {
            flags[t + 1] = true;
        }
    }
    flags
}

struct SeriesDiff {
    order: usize,
    dt: f64,
    scheme: TimeScheme,
    /// interior half-width required by the scheme
    interior: usize,
    /// centered weights per stride (richardson) or one wide stencil (central)
    weights: Vec<Vec<f64>>,
}

impl SeriesDiff {
    fn new(order: usize, dt: f64, scheme: TimeScheme) -> Self {
        match scheme {
            TimeScheme::RichardsonCn => {
                let base = central_stencil(order);
                let w = central_half_width(order);
                SeriesDiff {
                    order,
                    dt,
                    scheme,
                    interior: w * RICHARDSON_STRIDES[2],
                    weights: vec![base],
                }
            }
            TimeScheme::CentralStencil => {
                // wide centered stencil of accuracy >= 6
                let half = (order + 5).div_ceil(2);
                let nodes: Vec<f64> = (-(half as isize)..=half as isize)
                    .map(|i| i as f64)
                    .collect();
                let w = fd_weights(0.0, &nodes, order).swap_remove(order);
                SeriesDiff {
                    order,
                    dt,
                    scheme,
                    interior: half,
                    weights: vec![w],
                }
            }
        }
    }

    /// Centered estimate at stride s (Richardson building block).
    fn centered_at(&self, series: &[f64], t: usize, stride: usize) -> f64 {
        let base = &self.weights[0];
        let w = base.len() / 2;
        let h = self.dt * stride as f64;
        let mut acc = 0.0;
        for (k, &c) in base.iter().enumerate() {
            let off = (k as isize - w as isize) * stride as isize;
            acc += c * series[(t as isize + off) as usize];
        }
        acc / h.powi(self.order as i32)
    }

    fn interior_estimate(&self, series: &[f64], t: usize) -> f64 {
        match self.scheme {
            TimeScheme::RichardsonCn => {
                let d1 = self.centered_at(series, t, RICHARDSON_STRIDES[0]);
                let d2 = self.centered_at(series, t, RICHARDSON_STRIDES[1]);
                let d4 = self.centered_at(series, t, RICHARDSON_STRIDES[2]);
                // two extrapolation stages: h^2 then h^4 error terms cancel
                let r1 = (4.0 * d1 - d2) / 3.0;
                let r2 = (4.0 * d2 - d4) / 3.0;
                (16.0 * r1 - r2) / 15.0
            }
            TimeScheme::CentralStencil => {
                let base = &self.weights[0];
                let w = base.len() / 2;
                let mut acc = 0.0;
                for (k, &c) in base.iter().enumerate() {
                    acc += c * series[t + k - w];
                }
                acc / self.dt.powi(self.order as i32)
            }
        }
    }

    /// One-sided / clamped stencil over nodes in [lo, hi), accuracy 6 where
    /// the window allows.
    fn onesided_estimate(&self, series: &[f64], t: usize, lo: usize, hi: usize) -> Result<f64> {
        let want = self.order + 6;
        let avail = hi - lo;
        if avail < self.order + 1 {
            return Err(Error::Numerical(format!(
                "record of {avail} samples is shorter than an order-{} stencil",
                self.order
            )));
        }
        let n = want.min(avail);
        // clamp an n-point window around t inside [lo, hi)
        let half = n / 2;
        let start = t
            .saturating_sub(half)
            .min(hi - n)
            .max(lo);
        let nodes: Vec<f64> = (0..n)
            .map(|k| (start + k) as f64 - t as f64)
            .collect();
        let w = fd_weights(0.0, &nodes, self.order).swap_remove(self.order);
        let mut acc = 0.0;
        for (k, &c) in w.iter().enumerate() {
            acc += c * series[start + k];
        }
        Ok(acc / self.dt.powi(self.order as i32))
    }
}

/// Time derivatives of orders 1..=beta for every component and cell.
pub fn time_derivatives(f: &SpatioTemporalField, cfg: &SobolevConfig) -> Result<DerivativeStack> {
    f.require_complete("time_derivatives")?;
    let (nc, nt, ny, nx) = f.values().dim();
    let dt = f.time.step();
    if nt < 2 {
        return Err(Error::Numerical("record too short for derivatives".into()));
    }

    let mut stack = DerivativeStack {
        dt,
        ..Default::default()
    };

    // jump flags per (comp, cell); the union over cells marks the sample
    let mut jumps: Vec<Vec<bool>> = Vec::with_capacity(nc * ny * nx);
    let mut series = vec![0.0; nt];
    for c in 0..nc {
        for i in 0..ny {
            for j in 0..nx {
                for t in 0..nt {
                    series[t] = f.values()[(c, t, i, j)];
                }
                jumps.push(detect_jumps(&series));
            }
        }
    }

    for order in 1..=cfg.beta {
        let diff = SeriesDiff::new(order, dt, cfg.time_scheme);
        let min_len = order + 1;
        if nt < min_len {
            return Err(Error::Numerical(format!(
                "record of {nt} samples is shorter than an order-{order} stencil"
            )));
        }
        let mut out = Array4::zeros((nc, nt, ny, nx));
        let mut onesided = Array1::from_elem(nt, false);
        let mut cell_idx = 0usize;
        for c in 0..nc {
            for i in 0..ny {
                for j in 0..nx {
                    for t in 0..nt {
                        series[t] = f.values()[(c, t, i, j)];
                    }
                    let flags = &jumps[cell_idx];
                    cell_idx += 1;
                    for t in 0..nt {
                        let wide = diff.interior;
                        let interior_ok = t >= wide && t + wide < nt;
                        let near_jump = interior_ok
                            && (t.saturating_sub(wide)..=(t + wide).min(nt - 1))
                                .any(|s| flags[s]);
                        let v = if interior_ok && !near_jump {
                            diff.interior_estimate(&series, t)
                        } else {
                            onesided[t] = true;
                            // stay on the smooth side of the nearest jump
                            let lo = (0..=t).rev().find(|&s| flags[s]).map_or(0, |s| s);
                            let hi = (t + 1..nt).find(|&s| flags[s]).unwrap_or(nt);
                            let lo = if flags[t] { t } else { lo };
                            diff.onesided_estimate(&series, t, lo, hi)
                                // smooth side too short: use the clamped full window
                                .or_else(|_| diff.onesided_estimate(&series, t, 0, nt))?
                        };
                        out[(c, t, i, j)] = v;
                    }
                }
            }
        }
        stack.time_derivs.push(out);
        stack.time_onesided.push(onesided);
    }
    Ok(stack)
}

/// Forward one-step tendencies (x[t+1] - x[t]) / dt.
///
/// For stationary stochastic records this is the conditional drift; centered
/// stencils cancel it on time-reversible processes, so interaction
/// estimation on such data should use this stack.
pub fn forward_tendency(f: &SpatioTemporalField) -> Result<DerivativeStack> {
    f.require_complete("forward_tendency")?;
    let (nc, nt, ny, nx) = f.values().dim();
    if nt < 2 {
        return Err(Error::Numerical("record too short for tendencies".into()));
    }
    let dt = f.time.step();
    let mut out = Array4::zeros((nc, nt, ny, nx));
    let mut onesided = Array1::from_elem(nt, false);
    onesided[nt - 1] = true;
    for c in 0..nc {
        for i in 0..ny {
            for j in 0..nx {
                for t in 0..nt - 1 {
                    out[(c, t, i, j)] =
                        (f.values()[(c, t + 1, i, j)] - f.values()[(c, t, i, j)]) / dt;
                }
                out[(c, nt - 1, i, j)] =
                    (f.values()[(c, nt - 1, i, j)] - f.values()[(c, nt - 2, i, j)]) / dt;
            }
        }
    }
    Ok(DerivativeStack {
        dt,
        time_derivs: vec![out],
        time_onesided: vec![onesided],
        space_derivs: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{Grid, TimeAxis};

    fn field_of(nt: usize, dt: f64, f: impl Fn(f64) -> f64) -> SpatioTemporalField {
        let grid = Grid::new(vec![0.0, 1.0], vec![0.0, 1.0]).unwrap();
        let time = TimeAxis::regular(0.0, dt, nt).unwrap();
        let mut values = Array4::zeros((1, nt, 2, 2));
        for t in 0..nt {
            let v = f(time.timestamps()[t]);
            for i in 0..2 {
                for j in 0..2 {
                    values[(0, t, i, j)] = v;
                }
            }
        }
        SpatioTemporalField::complete(grid, time, values).unwrap()
    }

    #[test]
    fn fifth_derivative_of_t5_is_120() {
        let f = field_of(40, 0.31, |t| t.powi(5));
        let cfg = SobolevConfig::new(5).unwrap();
        let stack = time_derivatives(&f, &cfg).unwrap();
        let d5 = stack.time_order(5).unwrap();
        for t in 0..40 {
            let v = d5[(0, t, 0, 0)];
            assert!(
                (v - 120.0).abs() / 120.0 < 1e-6,
                "t={t} value {v} (relative {})",
                (v - 120.0).abs() / 120.0
            );
        }
    }

    #[test]
    fn constant_field_has_zero_derivatives() {
        let f = field_of(30, 1.0, |_| 4.2);
        let cfg = SobolevConfig::new(3).unwrap();
        let stack = time_derivatives(&f, &cfg).unwrap();
        for d in &stack.time_derivs {
            for v in d.iter() {
                assert!(v.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn sine_first_derivative_accuracy_and_order() {
        // interior point value within 1e-8 at h = 1e-2
        let dt = 1e-2;
        let nt = 100;
        let f = field_of(nt, dt, |t| t.sin());
        let cfg = SobolevConfig::new(1).unwrap();
        let stack = time_derivatives(&f, &cfg).unwrap();
        let t_mid = nt / 2;
        let expect = f.time.timestamps()[t_mid].cos();
        let got = stack.time_order(1).unwrap()[(0, t_mid, 0, 0)];
        assert!((got - expect).abs() < 1e-8, "err {}", (got - expect).abs());

        // convergence order under step halving, measured where errors sit
        // well above roundoff
        let mut errs = Vec::new();
        for &h in &[0.4, 0.2, 0.1] {
            let nt = 64;
            let f = field_of(nt, h, |t| t.sin());
            let stack = time_derivatives(&f, &cfg).unwrap();
            let t_mid = nt / 2;
            let e = (stack.time_order(1).unwrap()[(0, t_mid, 0, 0)]
                - f.time.timestamps()[t_mid].cos())
            .abs();
            errs.push(e);
        }
        let order1 = (errs[0] / errs[1]).log2();
        let order2 = (errs[1] / errs[2]).log2();
        assert!(order1 >= 4.0, "observed order {order1}");
        assert!(order2 >= 4.0, "observed order {order2}");
    }

    #[test]
    fn linearity_of_the_operator() {
        let fa = field_of(50, 0.1, |t| (1.3 * t).sin());
        let fb = field_of(50, 0.1, |t| (0.4 * t).cos());
        let fc = field_of(50, 0.1, |t| 2.0 * (1.3 * t).sin() - 0.5 * (0.4 * t).cos());
        let cfg = SobolevConfig::new(2).unwrap();
        let da = time_derivatives(&fa, &cfg).unwrap();
        let db = time_derivatives(&fb, &cfg).unwrap();
        let dc = time_derivatives(&fc, &cfg).unwrap();
        for q in 1..=2 {
            let a = da.time_order(q).unwrap();
            let b = db.time_order(q).unwrap();
            let c = dc.time_order(q).unwrap();
            for t in 0..50 {
                let lin = 2.0 * a[(0, t, 0, 0)] - 0.5 * b[(0, t, 0, 0)];
                assert!((lin - c[(0, t, 0, 0)]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn too_short_record_errors() {
        let f = field_of(3, 1.0, |t| t);
        let cfg = SobolevConfig::new(5).unwrap();
        assert!(time_derivatives(&f, &cfg).is_err());
    }

    #[test]
    fn jump_flags_onesided_and_keeps_far_field_clean() {
        let nt = 60;
        let f = field_of(nt, 0.1, |t| if t < 3.0 { (0.9 * t).sin() } else { (0.9 * t).sin() + 5.0 });
        let cfg = SobolevConfig::new(1).unwrap();
        let stack = time_derivatives(&f, &cfg).unwrap();
        // derivative far from the jump still matches cos
        let t = 10;
        let expect = 0.9 * (0.9 * f.time.timestamps()[t]).cos();
        let got = stack.time_order(1).unwrap()[(0, t, 0, 0)];
        assert!((got - expect).abs() < 1e-6);
        // samples next to the jump are marked one-sided
        let jump_t = (3.0 / 0.1) as usize;
        assert!(stack.time_onesided[0][jump_t] || stack.time_onesided[0][jump_t - 1]);
    }

    #[test]
    fn forward_tendency_is_one_step_difference() {
        let f = field_of(10, 0.5, |t| t * t);
        let stack = forward_tendency(&f).unwrap();
        let d = stack.tendency().unwrap();
        // (f(t+h)-f(t))/h = 2t + h
        for t in 0..9 {
            let ts = f.time.timestamps()[t];
            assert!((d[(0, t, 0, 0)] - (2.0 * ts + 0.5)).abs() < 1e-12);
        }
        assert!(stack.time_onesided[0][9]);
    }
}
