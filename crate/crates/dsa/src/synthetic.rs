//! Ground-truth generators and brute-force oracles.
//!
//! Every scenario is deterministic in its seed and reports the generating
//! truth (mixing matrices, celerities, polynomial coefficients) in its
//! metadata, so downstream estimates can be scored against it.

use crate::error::{Error, Result};
use crate::field::{Grid, SpatioTemporalField, TimeAxis};
use crate::infostats::{anamorphosis, SampleMatrix};
use crate::interaction::InteractionTensor;
use crate::linalg::correlation;
use crate::poly::PolyBasis;
use crate::rng;
use ndarray::{Array1, Array2, Array4};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use std::collections::BTreeMap;

/// Synthetic scenario with named parameters.
#[derive(Debug, Clone)]
pub enum Scenario {
    /// Two AR(1) sources (distinct decay rates), three observables through a
    /// fixed orthonormal 3x2 mixing plus a little observation noise.
    LinearMixture { n_steps: usize, seed: u64 },
    /// Chaotic map sources (logistic r=4 and quadratic r=3.9) observed as
    /// (x1, x2, x1*x2 + 0.1*x2^2) plus a little noise.
    NonlinearMixture { n_steps: usize, seed: u64 },
    /// Propagating carrier at celerity omega times the canonic temporal
    /// oscillation at omega - v, periodic in longitude.
    TravelingWave { omega: f64, v: f64, n_space: usize, n_time: usize },
    /// Space-time separable product g(lon) * h(t).
    Separable { n_space: usize, n_time: usize },
    /// Predictand driven by a known degree-3 polynomial of two AR(1) sources.
    PolynomialLink { n_steps: usize, noise: f64, seed: u64 },
    /// Single chaotic or quasi-periodic source series.
    ChaoticSource { n_steps: usize, kind: ChaoticKind, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChaoticKind {
    Logistic,
    QuasiPeriodic,
}

/// Generator output: observed field, the generating truth where meaningful,
/// and named metadata (mixing entries, celerity, coefficients).
#[derive(Debug, Clone)]
pub struct GeneratedData {
    pub observed: SpatioTemporalField,
    /// True source series (time x m) when the scenario has latent sources.
    pub truth_series: Option<Array2<f64>>,
    /// Predictand field for link scenarios.
    pub predictand: Option<SpatioTemporalField>,
    pub metadata: BTreeMap<String, f64>,
}

fn small_grid() -> Grid {
    Grid::new(vec![40.0, 42.5], vec![0.0, 2.5]).unwrap()
}

fn standardize_col(v: &mut [f64]) {
    let m = crate::linalg::mean(v);
    let s = crate::linalg::std_dev(v).max(1e-300);
    for x in v.iter_mut() {
        *x = (*x - m) / s;
    }
}

/// AR(1) series with unit stationary variance, standardized afterwards.
fn ar1_series(n: usize, a: f64, rng: &mut impl Rng) -> Vec<f64> {
    let mut x = vec![0.0; n + 200];
    let innov = (1.0 - a * a).max(1e-6).sqrt();
    for t in 1..x.len() {
        let e: f64 = StandardNormal.sample(rng);
        x[t] = a * x[t - 1] + innov * e;
    }
    let mut out = x.split_off(200);
    standardize_col(&mut out);
    out
}

fn logistic_series(n: usize, r: f64, rng: &mut impl Rng) -> Vec<f64> {
    let mut x = rng.gen_range(0.2..0.8);
    // discard transients
    for _ in 0..100 {
        x = r * x * (1.0 - x);
    }
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        out.push(x);
        x = r * x * (1.0 - x);
    }
    out
}

pub fn generate(scn: &Scenario) -> Result<GeneratedData> {
    match scn {
        Scenario::LinearMixture { n_steps, seed } => linear_mixture(*n_steps, *seed),
        Scenario::NonlinearMixture { n_steps, seed } => nonlinear_mixture(*n_steps, *seed),
        Scenario::TravelingWave { omega, v, n_space, n_time } => {
            traveling_wave(*omega, *v, *n_space, *n_time)
        }
        Scenario::Separable { n_space, n_time } => separable(*n_space, *n_time),
        Scenario::PolynomialLink { n_steps, noise, seed } => {
            polynomial_link(*n_steps, *noise, *seed)
        }
        Scenario::ChaoticSource { n_steps, kind, seed } => chaotic_source(*n_steps, *kind, *seed),
    }
}

/// Fixed 3x2 mixing with orthonormal columns and a decent mixing angle.
fn mixing_3x2() -> Array2<f64> {
    let mut r = Array2::zeros((3, 2));
    let c1 = [1.0 / 3f64.sqrt(), 1.0 / 3f64.sqrt(), 1.0 / 3f64.sqrt()];
    let c2 = [1.0 / 2f64.sqrt(), -1.0 / 2f64.sqrt(), 0.0];
    for i in 0..3 {
        r[(i, 0)] = c1[i];
        r[(i, 1)] = c2[i];
    }
    r
}

fn series_to_field(series: &Array2<f64>, dt: f64) -> Result<SpatioTemporalField> {
    let time = TimeAxis::regular(0.0, dt, series.nrows())?;
    SpatioTemporalField::from_series(small_grid(), time, series)
}

fn linear_mixture(n_steps: usize, seed: u64) -> Result<GeneratedData> {
    if n_steps < 64 {
        return Err(Error::Config("linear-mixture needs at least 64 steps".into()));
    }
    let dt = 0.1_f64;
    let (theta1, theta2) = (1.0_f64, 3.0_f64);
    let a1 = (-theta1 * dt).exp();
    let a2 = (-theta2 * dt).exp();
    let mut rng = rng::split(seed, 1);
    let x1 = ar1_series(n_steps, a1, &mut rng);
    let x2 = ar1_series(n_steps, a2, &mut rng);
    let r = mixing_3x2();
    let noise = 0.02;
    let mut obs = Array2::zeros((n_steps, 3));
    for t in 0..n_steps {
        for j in 0..3 {
            let e: f64 = StandardNormal.sample(&mut rng);
            obs[(t, j)] = r[(j, 0)] * x1[t] + r[(j, 1)] * x2[t] + noise * e;
        }
    }
    let mut truth = Array2::zeros((n_steps, 2));
    for t in 0..n_steps {
        truth[(t, 0)] = x1[t];
        truth[(t, 1)] = x2[t];
    }
    let mut metadata = BTreeMap::new();
    metadata.insert("theta1".into(), theta1);
    metadata.insert("theta2".into(), theta2);
    metadata.insert("dt".into(), dt);
    metadata.insert("noise".into(), noise);
    for i in 0..3 {
        for j in 0..2 {
            metadata.insert(format!("mixing_{i}{j}"), r[(i, j)]);
        }
    }
    Ok(GeneratedData {
        observed: series_to_field(&obs, dt)?,
        truth_series: Some(truth),
        predictand: None,
        metadata,
    })
}

fn nonlinear_mixture(n_steps: usize, seed: u64) -> Result<GeneratedData> {
    if n_steps < 64 {
        return Err(Error::Config("nonlinear-mixture needs at least 64 steps".into()));
    }
    let dt = 1.0;
    let mut rng = rng::split(seed, 2);
    let mut x1 = logistic_series(n_steps, 4.0, &mut rng);
    let mut x2 = logistic_series(n_steps, 3.9, &mut rng);
    let mut obs = Array2::zeros((n_steps, 3));
    let noise = 0.005;
    for t in 0..n_steps {
        let e: f64 = StandardNormal.sample(&mut rng);
        obs[(t, 0)] = x1[t];
        obs[(t, 1)] = x2[t];
        obs[(t, 2)] = x1[t] * x2[t] + 0.1 * x2[t] * x2[t] + noise * e;
    }
    standardize_col(&mut x1);
    standardize_col(&mut x2);
    let mut truth = Array2::zeros((n_steps, 2));
    for t in 0..n_steps {
        truth[(t, 0)] = x1[t];
        truth[(t, 1)] = x2[t];
    }
    let mut metadata = BTreeMap::new();
    metadata.insert("r1".into(), 4.0);
    metadata.insert("r2".into(), 3.9);
    metadata.insert("dt".into(), dt);
    Ok(GeneratedData {
        observed: series_to_field(&obs, dt)?,
        truth_series: Some(truth),
        predictand: None,
        metadata,
    })
}

fn traveling_wave(omega: f64, v: f64, n_space: usize, n_time: usize) -> Result<GeneratedData> {
    if omega == 0.0 {
        return Err(Error::Config("wave celerity omega must be nonzero".into()));
    }
    if n_space < 8 || n_time < 8 {
        return Err(Error::Config("wave grid too small".into()));
    }
    let dsigma = 2.0 * std::f64::consts::PI / n_space as f64;
    // one carrier cell per step: characteristic shifts stay near-integral
    let dt = dsigma / omega;
    let lon: Vec<f64> = (0..n_space).map(|j| j as f64 * dsigma).collect();
    let grid = Grid::new(vec![40.0, 42.5], lon.clone())?;
    let time = TimeAxis::regular(0.0, dt, n_time)?;
    let mut values = Array4::zeros((1, n_time, 2, n_space));
    for t in 0..n_time {
        let tv = time.timestamps()[t];
        for j in 0..n_space {
            let w = (lon[j] - omega * tv).cos() * ((omega - v) * tv).cos();
            values[(0, t, 0, j)] = w;
            values[(0, t, 1, j)] = w;
        }
    }
    let mut metadata = BTreeMap::new();
    metadata.insert("omega".into(), omega);
    metadata.insert("v".into(), v);
    metadata.insert("canonic_frequency".into(), omega - v);
    metadata.insert("dt".into(), dt);
    Ok(GeneratedData {
        observed: SpatioTemporalField::complete(grid, time, values)?,
        truth_series: None,
        predictand: None,
        metadata,
    })
}

fn separable(n_space: usize, n_time: usize) -> Result<GeneratedData> {
    if n_space < 8 || n_time < 8 {
        return Err(Error::Config("separable grid too small".into()));
    }
    let lon: Vec<f64> = (0..n_space)
        .map(|j| 2.0 * std::f64::consts::PI * j as f64 / n_space as f64)
        .collect();
    let grid = Grid::new(vec![40.0, 42.5], lon.clone())?;
    let time = TimeAxis::regular(0.0, 0.05, n_time)?;
    let mut values = Array4::zeros((1, n_time, 2, n_space));
    for t in 0..n_time {
        let h = (0.9 * time.timestamps()[t]).sin() + 1.7;
        for j in 0..n_space {
            let g = lon[j].cos() + 0.3;
            values[(0, t, 0, j)] = g * h;
            values[(0, t, 1, j)] = g * h;
        }
    }
    let mut metadata = BTreeMap::new();
    metadata.insert("rank".into(), 0.0);
    Ok(GeneratedData {
        observed: SpatioTemporalField::complete(grid, time, values)?,
        truth_series: None,
        predictand: None,
        metadata,
    })
}

/// Degree-3 link coefficients used by the polynomial-link scenario:
/// zdot = sum_k c_k x1^k + d_k x2^k (per step).
pub const LINK_C: [f64; 4] = [0.0, -0.6, 0.25, -0.12];
pub const LINK_D: [f64; 4] = [0.0, 0.4, 0.0, 0.1];

fn polynomial_link(n_steps: usize, noise: f64, seed: u64) -> Result<GeneratedData> {
    if n_steps < 128 {
        return Err(Error::Config("polynomial-link needs at least 128 steps".into()));
    }
    let dt = 0.1;
    let mut rng = rng::split(seed, 3);
    let x1 = ar1_series(n_steps, (-0.8_f64 * dt).exp(), &mut rng);
    let x2 = ar1_series(n_steps, (-2.5_f64 * dt).exp(), &mut rng);
    let mut z = vec![0.0; n_steps];
    for t in 0..n_steps - 1 {
        let mut zdot = 0.0;
        for k in 1..=3usize {
            zdot += LINK_C[k] * x1[t].powi(k as i32) + LINK_D[k] * x2[t].powi(k as i32);
        }
        // mean reversion keeps the predictand stationary
        zdot -= 0.5 * z[t];
        let e: f64 = StandardNormal.sample(&mut rng);
        z[t + 1] = z[t] + dt * zdot + noise * dt.sqrt() * e;
    }
    let mut truth = Array2::zeros((n_steps, 2));
    let mut zcol = Array2::zeros((n_steps, 1));
    for t in 0..n_steps {
        truth[(t, 0)] = x1[t];
        truth[(t, 1)] = x2[t];
        zcol[(t, 0)] = z[t];
    }
    let mut metadata = BTreeMap::new();
    metadata.insert("dt".into(), dt);
    metadata.insert("noise".into(), noise);
    for k in 1..=3usize {
        metadata.insert(format!("c{k}"), LINK_C[k]);
        metadata.insert(format!("d{k}"), LINK_D[k]);
    }
    Ok(GeneratedData {
        observed: series_to_field(&truth, dt)?,
        truth_series: Some(truth),
        predictand: Some(series_to_field(&zcol, dt)?),
        metadata,
    })
}

fn chaotic_source(n_steps: usize, kind: ChaoticKind, seed: u64) -> Result<GeneratedData> {
    if n_steps < 64 {
        return Err(Error::Config("chaotic-source needs at least 64 steps".into()));
    }
    let mut rng = rng::split(seed, 4);
    let series: Vec<f64> = match kind {
        ChaoticKind::Logistic => logistic_series(n_steps, 4.0, &mut rng),
        ChaoticKind::QuasiPeriodic => {
            let phase: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            (0..n_steps)
                .map(|t| {
                    let tv = t as f64 * 0.37;
                    (tv + phase).sin() + (std::f64::consts::SQRT_2 * tv).sin()
                })
                .collect()
        }
    };
    let mut m = Array2::zeros((n_steps, 1));
    for t in 0..n_steps {
        m[(t, 0)] = series[t];
    }
    let mut metadata = BTreeMap::new();
    metadata.insert(
        "lyapunov".into(),
        match kind {
            ChaoticKind::Logistic => std::f64::consts::LN_2,
            ChaoticKind::QuasiPeriodic => 0.0,
        },
    );
    Ok(GeneratedData {
        observed: series_to_field(&m, 1.0)?,
        truth_series: Some(m.clone()),
        predictand: None,
        metadata,
    })
}

/// Recovery scoring: optimal assignment of recovered to true sources on the
/// absolute correlation of anamorphosed series.
#[derive(Debug, Clone)]
pub struct RecoveryScore {
    /// pairing[i] = index of the true source matched to recovered source i
    pub pairing: Vec<usize>,
    /// absolute correlations per recovered source, after the pairing
    pub scores: Vec<f64>,
}

pub fn score_recovery(truth: &Array2<f64>, recovered: &Array2<f64>) -> Result<RecoveryScore> {
    let (nt, m_true) = truth.dim();
    let (nr, m_rec) = recovered.dim();
    if nt != nr {
        return Err(Error::ShapeMismatch("truth and recovered time axes differ".into()));
    }
    if m_rec == 0 || m_true == 0 {
        return Err(Error::Config("nothing to score".into()));
    }
    // anamorphose both sets so monotone distortions cannot hide a match
    let cols: Vec<Vec<f64>> = (0..m_true)
        .map(|j| truth.column(j).to_vec())
        .chain((0..m_rec).map(|j| recovered.column(j).to_vec()))
        .collect();
    let z = anamorphosis(&SampleMatrix::from_columns(&cols)?)?;
    let mut corr = Array2::zeros((m_rec, m_true));
    for i in 0..m_rec {
        for j in 0..m_true {
            corr[(i, j)] = correlation(&z.column(m_true + i), &z.column(j)).abs();
        }
    }
    // brute-force assignment; source counts are small
    let k = m_rec.min(m_true);
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut perm: Vec<usize> = (0..m_true).collect();
    permute(&mut perm, 0, &mut |p: &[usize]| {
        let total: f64 = (0..k.min(p.len())).map(|i| corr[(i, p[i])]).sum();
        if best.as_ref().map(|(b, _)| total > *b).unwrap_or(true) {
            best = Some((total, p.to_vec()));
        }
    });
    let (_, pairing) = best.unwrap();
    let scores: Vec<f64> = (0..m_rec)
        .map(|i| {
            if i < pairing.len() {
                corr[(i, pairing[i])]
            } else {
                0.0
            }
        })
        .collect();
    Ok(RecoveryScore { pairing, scores })
}

fn permute(v: &mut Vec<usize>, k: usize, visit: &mut impl FnMut(&[usize])) {
    if k == v.len() {
        visit(v);
        return;
    }
    for i in k..v.len() {
        v.swap(k, i);
        permute(v, k + 1, visit);
        v.swap(k, i);
    }
}

/// Explicit polynomial right-hand side: the exact-coefficient oracle.
#[derive(Debug, Clone)]
pub struct PolySystem {
    pub basis: PolyBasis,
    /// (monomial, response) coefficients of dx/dt
    pub coeffs: Array2<f64>,
}

impl PolySystem {
    pub fn new(dim: usize, degree: usize) -> Self {
        let basis = PolyBasis::new(dim, degree);
        let q = basis.len();
        PolySystem {
            basis,
            coeffs: Array2::zeros((q, dim)),
        }
    }

    pub fn set_term(&mut self, response: usize, alpha: &[u8], value: f64) {
        let idx = self.basis.index_of(alpha).expect("term inside the basis");
        self.coeffs[(idx, response)] = value;
    }

    pub fn rhs(&self, x: &[f64]) -> Vec<f64> {
        let mut row = vec![0.0; self.basis.len()];
        self.basis.eval_row(x, &mut row);
        (0..self.coeffs.ncols())
            .map(|r| {
                row.iter()
                    .zip(self.coeffs.column(r))
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect()
    }

    /// Exact order-k tensor entries at a state: coefficient arithmetic only.
    pub fn tensor_at(&self, x: &[f64], k: usize) -> (Vec<Vec<u8>>, Array2<f64>) {
        let dim = self.basis.dim;
        let k_set: Vec<Vec<u8>> = PolyBasis::new(dim, k)
            .indices
            .iter()
            .filter(|a| crate::poly::total_degree(a) == k)
            .cloned()
            .collect();
        let mut row = vec![0.0; self.basis.len()];
        self.basis.eval_row(x, &mut row);
        let mut out = Array2::zeros((dim, k_set.len()));
        for (c, alpha) in k_set.iter().enumerate() {
            for (src, factor, dst) in self.basis.derivative_terms(alpha) {
                for r in 0..dim {
                    out[(r, c)] += self.coeffs[(src, r)] * factor * row[dst];
                }
            }
        }
        (k_set, out)
    }
}

/// Exact per-sample interaction tensor of a polynomial system along given
/// states: the independent oracle for the regression estimator.
pub fn brute_force_interaction(
    sys: &PolySystem,
    states: &Array2<f64>,
    k: usize,
    dt: f64,
) -> Result<InteractionTensor> {
    let (n, dim) = states.dim();
    if dim != sys.basis.dim {
        return Err(Error::ShapeMismatch("states vs system dimension".into()));
    }
    let (indices, _) = sys.tensor_at(&vec![0.0; dim], k);
    let mut per_sample = ndarray::Array3::zeros((n, dim, indices.len()));
    let mut response = Array2::zeros((n, dim));
    for s in 0..n {
        let x: Vec<f64> = states.row(s).to_vec();
        let (_, t) = sys.tensor_at(&x, k);
        for r in 0..dim {
            for c in 0..indices.len() {
                per_sample[(s, r, c)] = t[(r, c)];
            }
        }
        for (r, v) in sys.rhs(&x).into_iter().enumerate() {
            response[(s, r)] = v;
        }
    }
    // aggregate with the same inverse-speed weighting as the estimator
    let mut speeds = vec![0.0; n];
    for s in 0..n {
        speeds[s] = response.row(s).iter().map(|v| v * v).sum::<f64>().sqrt();
    }
    let mut sorted = speeds.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let med = sorted[n / 2].max(1e-300);
    let mut weights = Array1::zeros(n);
    let mut total = 0.0;
    for s in 0..n {
        weights[s] = 1.0 / (speeds[s] + 0.1 * med);
        total += weights[s];
    }
    weights.mapv_inplace(|w| w / total);
    let mut aggregate = Array2::zeros((dim, indices.len()));
    for s in 0..n {
        for r in 0..dim {
            for c in 0..indices.len() {
                aggregate[(r, c)] += weights[s] * per_sample[(s, r, c)];
            }
        }
    }
    let diagonal = (0..dim)
        .map(|r| {
            let c = indices
                .iter()
                .position(|a| {
                    a.iter()
                        .enumerate()
                        .all(|(d, &v)| if d == r { v as usize == k } else { v == 0 })
                })
                .unwrap();
            aggregate[(r, c)]
        })
        .collect();
    let mut tensor = InteractionTensor {
        order: k,
        indices,
        per_sample: Some(per_sample),
        aggregate,
        weights: Some(weights),
        diagonal,
        offdiag_norm: 0.0,
        blocks: vec![0..dim],
        dt,
        sample_shape: (n, 1),
    };
    tensor.offdiag_norm = tensor.recompute_offdiag_norm();
    Ok(tensor)
}
