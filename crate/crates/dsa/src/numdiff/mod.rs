//! High-order derivative estimation from gridded records.
//!
//! Time derivatives come from Richardson extrapolation over stride doublings
//! of the second-order centered differences (the same stencils a
//! Crank-Nicolson integrator is built on), reaching sixth-order truncation
//! at interior points. Spatial derivatives use fourth-order compact (Pade)
//! schemes solved as tridiagonal systems per axis, alternating directions
//! for mixed partials. State-space gradients are estimated by weighted local
//! polynomial regression of tendencies against state monomials.

mod space;
mod state_gradient;
mod stencil;
mod time;

pub use space::space_derivatives;
pub use state_gradient::{state_space_gradient, GradientTensors, NeighborhoodOpts};
pub use stencil::fd_weights;
pub use time::{forward_tendency, time_derivatives};

use crate::error::{Error, Result};
use ndarray::{Array1, Array4};

/// Differentiation scheme configuration.
///
/// `beta` is the highest derivative order carried by the stack; stencil
/// tables go up to order 6.
#[derive(Debug, Clone)]
pub struct SobolevConfig {
    pub beta: usize,
    pub time_scheme: TimeScheme,
    pub space_scheme: SpaceScheme,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeScheme {
    /// Richardson extrapolation over strides 1, 2, 4 of centered stencils.
    RichardsonCn,
    /// Single wide centered stencil of matching accuracy.
    CentralStencil,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpaceScheme {
    /// Fourth-order compact tridiagonal systems, alternating axes.
    CompactAdi,
    /// Explicit fourth-order centered stencils.
    CentralStencil,
}

impl SobolevConfig {
    pub fn new(beta: usize) -> Result<Self> {
        if beta == 0 || beta > 6 {
            return Err(Error::Config(format!(
                "beta must be between 1 and 6, got {beta}"
            )));
        }
        Ok(SobolevConfig {
            beta,
            time_scheme: TimeScheme::RichardsonCn,
            space_scheme: SpaceScheme::CompactAdi,
        })
    }

    pub fn with_time_scheme(mut self, s: TimeScheme) -> Self {
        self.time_scheme = s;
        self
    }

    pub fn with_space_scheme(mut self, s: SpaceScheme) -> Self {
        self.space_scheme = s;
        self
    }
}

/// Spatial derivative slab for one mixed multi-index.
#[derive(Debug, Clone)]
pub struct SpaceDeriv {
    pub lat_order: u8,
    pub lon_order: u8,
    /// (comp, time, lat, lon)
    pub values: Array4<f64>,
}

/// Derivative estimates attached to a field.
///
/// `time_derivs[q-1]` holds the order-q time derivative with the same shape
/// as the source values; `time_onesided[q-1][t]` marks samples where a
/// one-sided stencil was used (record edges and detected jumps).
#[derive(Debug, Clone, Default)]
pub struct DerivativeStack {
    pub dt: f64,
    pub time_derivs: Vec<Array4<f64>>,
    pub time_onesided: Vec<Array1<bool>>,
    pub space_derivs: Vec<SpaceDeriv>,
}

impl DerivativeStack {
    /// Stack built from known derivative slabs (oracle and test inputs).
    pub fn from_time_derivs(dt: f64, time_derivs: Vec<Array4<f64>>) -> Self {
        let onesided = time_derivs
            .iter()
            .map(|d| Array1::from_elem(d.dim().1, false))
            .collect();
        DerivativeStack {
            dt,
            time_derivs,
            time_onesided: onesided,
            space_derivs: Vec::new(),
        }
    }

    pub fn tendency(&self) -> Result<&Array4<f64>> {
        self.time_derivs
            .first()
            .ok_or_else(|| Error::Numerical("stack holds no time derivatives".into()))
    }

    pub fn time_order(&self, q: usize) -> Result<&Array4<f64>> {
        self.time_derivs
            .get(q.wrapping_sub(1))
            .ok_or_else(|| Error::Numerical(format!("stack holds no order-{q} time derivative")))
    }

    pub fn space_order(&self, lat_order: u8, lon_order: u8) -> Option<&SpaceDeriv> {
        self.space_derivs
            .iter()
            .find(|d| d.lat_order == lat_order && d.lon_order == lon_order)
    }
}
