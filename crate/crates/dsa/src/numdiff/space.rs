//! Spatial derivatives: mixed partials up to total order beta.
//!
//! The compact scheme solves the classical fourth-order Pade systems
//!   (1/4) f'_{i-1} + f'_i + (1/4) f'_{i+1} = (3/4h)(f_{i+1} - f_{i-1})
//!   (1/10) f''_{i-1} + f''_i + (1/10) f''_{i+1} = (6/5h^2)(f_{i+1} - 2 f_i + f_{i-1})
//! per axis line, with explicit one-sided fourth-order closures on the first
//! and last rows so the system stays tridiagonal. Higher axis orders compose
//! the two kernels (3 = 2+1, 4 = 2+2, 5 = 2+2+1); mixed partials alternate
//! the latitude and longitude passes.

use super::stencil::fd_weights;
use super::{DerivativeStack, SobolevConfig, SpaceDeriv, SpaceScheme};
use crate::error::{Error, Result};
use crate::field::{Grid, SpatioTemporalField};
use crate::linalg::solve_tridiagonal;
use ndarray::{Array2, Array4};

/// One-dimensional derivative pass over the rows or columns of a slab.
trait AxisKernel {
    /// Differentiate a line of samples with spacing h into `out`.
    fn apply(&self, line: &[f64], h: f64, out: &mut [f64]) -> Result<()>;
    /// Minimum number of points per line.
    fn min_points(&self) -> usize;
}

/// Compact Pade kernel for derivative order 1 or 2.
struct CompactKernel {
    order: usize,
}

impl AxisKernel for CompactKernel {
    fn min_points(&self) -> usize {
        6
    }

    fn apply(&self, line: &[f64], h: f64, out: &mut [f64]) -> Result<()> {
        let n = line.len();
        let (alpha, scale): (f64, f64) = match self.order {
            1 => (0.25, 3.0 / 4.0),
            2 => (0.1, 6.0 / 5.0),
            _ => unreachable!("compact kernel only covers orders 1 and 2"),
        };
        let mut lower = vec![alpha; n - 1];
        let mut upper = vec![alpha; n - 1];
        let diag = vec![1.0; n];
        let mut rhs = vec![0.0; n];
        for i in 1..n - 1 {
            rhs[i] = match self.order {
                1 => scale * (line[i + 1] - line[i - 1]) / h,
                _ => scale * (line[i + 1] - 2.0 * line[i] + line[i - 1]) / (h * h),
            };
        }
        // boundary rows: explicit one-sided stencils, diagonal rows keep the
        // system tridiagonal
        let m = (self.order + 4).min(n);
        let left_nodes: Vec<f64> = (0..m).map(|k| k as f64).collect();
        let wl = fd_weights(0.0, &left_nodes, self.order).swap_remove(self.order);
        let right_nodes: Vec<f64> = (0..m).map(|k| (n - m + k) as f64).collect();
        let wr = fd_weights((n - 1) as f64, &right_nodes, self.order).swap_remove(self.order);
        lower[n - 2] = 0.0;
        upper[0] = 0.0;
        rhs[0] = left_nodes
            .iter()
            .zip(&wl)
            .map(|(&k, &c)| c * line[k as usize])
            .sum::<f64>()
            / h.powi(self.order as i32);
        rhs[n - 1] = right_nodes
            .iter()
            .zip(&wr)
            .map(|(&k, &c)| c * line[k as usize])
            .sum::<f64>()
            / h.powi(self.order as i32);
        let sol = solve_tridiagonal(&lower, &diag, &upper, &rhs)?;
        out.copy_from_slice(&sol);
        Ok(())
    }
}

/// Explicit centered stencil of accuracy 4 with one-sided edges.
struct ExplicitKernel {
    order: usize,
}

impl AxisKernel for ExplicitKernel {
    fn min_points(&self) -> usize {
        self.order + 4
    }

    fn apply(&self, line: &[f64], h: f64, out: &mut [f64]) -> Result<()> {
        let n = line.len();
        let m = (self.order + 4).min(n);
        let hp = h.powi(self.order as i32);
        for i in 0..n {
            let half = m / 2;
            let start = i.saturating_sub(half).min(n - m);
            let nodes: Vec<f64> = (0..m).map(|k| (start + k) as f64 - i as f64).collect();
            let w = fd_weights(0.0, &nodes, self.order).swap_remove(self.order);
            let mut acc = 0.0;
            for (k, &c) in w.iter().enumerate() {
                acc += c * line[start + k];
            }
            out[i] = acc / hp;
        }
        Ok(())
    }
}

/// Decompose an axis order into kernel passes (2s first, then a single 1).
fn kernel_orders(order: u8) -> Vec<usize> {
    let mut v = Vec::new();
    let mut rem = order as usize;
    while rem >= 2 {
        v.push(2);
        rem -= 2;
    }
    if rem == 1 {
        v.push(1);
    }
    v
}

fn axis_pass(
    slab: &Array2<f64>,
    h: f64,
    along_rows: bool,
    kernel: &dyn AxisKernel,
) -> Result<Array2<f64>> {
    let (ny, nx) = slab.dim();
    let mut out = Array2::zeros((ny, nx));
    if along_rows {
        // differentiate along lon (each lat row is a line)
        let mut line_out = vec![0.0; nx];
        for i in 0..ny {
            let line: Vec<f64> = slab.row(i).to_vec();
            kernel.apply(&line, h, &mut line_out)?;
            for j in 0..nx {
                out[(i, j)] = line_out[j];
            }
        }
    } else {
        let mut line_out = vec![0.0; ny];
        for j in 0..nx {
            let line: Vec<f64> = slab.column(j).to_vec();
            kernel.apply(&line, h, &mut line_out)?;
            for i in 0..ny {
                out[(i, j)] = line_out[i];
            }
        }
    }
    Ok(out)
}

fn grid_steps(grid: &Grid) -> Result<(f64, f64)> {
    let hy = Grid::uniform_step(grid.lat())
        .ok_or_else(|| Error::InvalidAxis("latitude axis must be uniform for derivatives".into()))?;
    let hx = Grid::uniform_step(grid.lon())
        .ok_or_else(|| Error::InvalidAxis("longitude axis must be uniform for derivatives".into()))?;
    Ok((hy, hx))
}

/// Mixed spatial partials d^a_lat d^b_lon for all 1 <= a+b <= beta.
pub fn space_derivatives(f: &SpatioTemporalField, cfg: &SobolevConfig) -> Result<DerivativeStack> {
    f.require_complete("space_derivatives")?;
    let (nc, nt, ny, nx) = f.values().dim();
    let (hy, hx) = grid_steps(&f.grid)?;

    let make_kernel = |order: usize| -> Box<dyn AxisKernel> {
        match cfg.space_scheme {
            SpaceScheme::CompactAdi => Box::new(CompactKernel { order }),
            SpaceScheme::CentralStencil => Box::new(ExplicitKernel { order }),
        }
    };

    let mut stack = DerivativeStack {
        dt: f.time.step(),
        ..Default::default()
    };

    for total in 1..=cfg.beta as u8 {
        for a in 0..=total {
            let b = total - a;
            // multi-indices whose axis cannot hold the stencil are skipped;
            // the call errors below only when nothing fits at all
            let lat_fits = kernel_orders(a)
                .iter()
                .all(|&ord| ny >= make_kernel(ord).min_points());
            let lon_fits = kernel_orders(b)
                .iter()
                .all(|&ord| nx >= make_kernel(ord).min_points());
            if !lat_fits || !lon_fits {
                continue;
            }
            let mut values = Array4::zeros((nc, nt, ny, nx));
            for c in 0..nc {
                for t in 0..nt {
                    let mut slab: Array2<f64> = f
                        .values()
                        .slice(ndarray::s![c, t, .., ..])
                        .to_owned();
                    // alternate directions: lat pass, then lon pass
                    for &ord in kernel_orders(a).iter() {
                        slab = axis_pass(&slab, hy, false, make_kernel(ord).as_ref())?;
                    }
                    for &ord in kernel_orders(b).iter() {
                        slab = axis_pass(&slab, hx, true, make_kernel(ord).as_ref())?;
                    }
                    values.slice_mut(ndarray::s![c, t, .., ..]).assign(&slab);
                }
            }
            stack.space_derivs.push(SpaceDeriv {
                lat_order: a,
                lon_order: b,
                values,
            });
        }
    }
    if stack.space_derivs.is_empty() {
        return Err(Error::Numerical(format!(
            "axes too short for spatial derivatives: {ny} x {nx} points"
        )));
    }
    Ok(stack)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{Grid, TimeAxis};
    use std::f64::consts::PI;

    /// 1D-in-lon field: value depends on lon only; 2 lat rows carry copies.
    fn lon_field(nx: usize, f: impl Fn(f64) -> f64) -> SpatioTemporalField {
        let lon: Vec<f64> = (0..nx).map(|j| 2.0 * PI * j as f64 / nx as f64).collect();
        let grid = Grid::new(vec![0.0, 1.0], lon.clone()).unwrap();
        let time = TimeAxis::regular(0.0, 1.0, 2).unwrap();
        let mut values = Array4::zeros((1, 2, 2, nx));
        for t in 0..2 {
            for i in 0..2 {
                for j in 0..nx {
                    values[(0, t, i, j)] = f(lon[j]);
                }
            }
        }
        SpatioTemporalField::complete(grid, time, values).unwrap()
    }

    #[test]
    fn cos_derivative_on_fine_grid() {
        let nx = 256;
        let f = lon_field(nx, |s| s.cos());
        let cfg = SobolevConfig::new(1).unwrap();
        let stack = space_derivatives(&f, &cfg).unwrap();
        let d = &stack.space_order(0, 1).unwrap().values;
        let lon = f.grid.lon();
        let mut max_err = 0.0f64;
        // interior; boundary closures are one order lower on this open line
        for j in 4..nx - 4 {
            let err = (d[(0, 0, 0, j)] + lon[j].sin()).abs();
            max_err = max_err.max(err);
        }
        assert!(max_err < 1e-6, "max interior error {max_err}");
    }

    #[test]
    fn fourth_order_convergence_on_cos() {
        let cfg = SobolevConfig::new(1).unwrap();
        let mut errs = Vec::new();
        for nx in [64usize, 128, 256] {
            let f = lon_field(nx, |s| s.cos());
            let stack = space_derivatives(&f, &cfg).unwrap();
            let d = &stack.space_order(0, 1).unwrap().values;
            // max interior error; single points can sit on zeros of the
            // leading error term
            let margin = 6;
            let mut e = 0.0f64;
            for j in margin..nx - margin {
                e = e.max((d[(0, 0, 0, j)] + f.grid.lon()[j].sin()).abs());
            }
            errs.push(e);
        }
        let order1 = (errs[0] / errs[1]).log2();
        let order2 = (errs[1] / errs[2]).log2();
        assert!(order1 > 3.5 && order1 < 4.6, "order {order1}");
        assert!(order2 > 3.5 && order2 < 4.6, "order {order2}");
    }

    #[test]
    fn separable_mixed_partial() {
        let ny = 48;
        let nx = 48;
        let lat: Vec<f64> = (0..ny).map(|i| i as f64 * 0.05).collect();
        let lon: Vec<f64> = (0..nx).map(|j| j as f64 * 0.05).collect();
        let grid = Grid::new(lat.clone(), lon.clone()).unwrap();
        let time = TimeAxis::regular(0.0, 1.0, 2).unwrap();
        let mut values = Array4::zeros((1, 2, ny, nx));
        for t in 0..2 {
            for i in 0..ny {
                for j in 0..nx {
                    values[(0, t, i, j)] = (1.3 * lat[i]).sin() * (0.7 * lon[j]).cos();
                }
            }
        }
        let f = SpatioTemporalField::complete(grid, time, values).unwrap();
        let cfg = SobolevConfig::new(2).unwrap();
        let stack = space_derivatives(&f, &cfg).unwrap();
        let d = &stack.space_order(1, 1).unwrap().values;
        let mut max_err = 0.0f64;
        for i in 4..ny - 4 {
            for j in 4..nx - 4 {
                let expect = 1.3 * (1.3 * lat[i]).cos() * (-0.7) * (0.7 * lon[j]).sin();
                max_err = max_err.max((d[(0, 0, i, j)] - expect).abs());
            }
        }
        assert!(max_err < 1e-6, "mixed partial max error {max_err}");
    }

    #[test]
    fn linear_ramp_second_derivative_vanishes() {
        let nx = 32;
        let lon: Vec<f64> = (0..nx).map(|j| j as f64).collect();
        let grid = Grid::new(vec![0.0, 1.0], lon).unwrap();
        let time = TimeAxis::regular(0.0, 1.0, 2).unwrap();
        let mut values = Array4::zeros((1, 2, 2, nx));
        for t in 0..2 {
            for i in 0..2 {
                for j in 0..nx {
                    values[(0, t, i, j)] = 3.0 + 0.25 * j as f64;
                }
            }
        }
        let f = SpatioTemporalField::complete(grid, time, values).unwrap();
        let cfg = SobolevConfig::new(2).unwrap();
        let stack = space_derivatives(&f, &cfg).unwrap();
        let d = &stack.space_order(0, 2).unwrap().values;
        for j in 0..nx {
            assert!(d[(0, 0, 0, j)].abs() < 1e-10, "j={j}: {}", d[(0, 0, 0, j)]);
        }
    }

    #[test]
    fn axis_too_short_errors() {
        let f = lon_field(4, |s| s);
        let cfg = SobolevConfig::new(1).unwrap();
        assert!(space_derivatives(&f, &cfg).is_err());
    }
}
