//! Information-theoretic diagnostics: Gaussian anamorphosis, negentropy,
//! mutual information and interaction information, each with Monte-Carlo
//! shuffle nulls.
//!
//! All estimators run in the anamorphosed (rank-to-normal-scores) space:
//! the joint dependence term is the Gaussian-copula entropy of the
//! anamorphosed correlation, and marginal non-normality enters through
//! m-spacing entropies. Deterministic relations drive the Gaussian terms to
//! infinity; those are capped at [`MI_CAP`] nats and flagged, never silently
//! returned.

use crate::error::{Error, Result};
use crate::linalg::{mean, quantile, std_dev};
use crate::rng;
use nalgebra::DMatrix;
use ndarray::Array2;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

/// Cap for diverging mutual-information estimates (deterministic relations).
pub const MI_CAP: f64 = 20.0;

/// Samples-by-variables matrix. At least 8 samples, nothing missing.
#[derive(Debug, Clone)]
pub struct SampleMatrix {
    data: Array2<f64>,
}

impl SampleMatrix {
    pub fn new(data: Array2<f64>) -> Result<Self> {
        if data.nrows() < 8 {
            return Err(Error::Config(format!(
                "need at least 8 samples, got {}",
                data.nrows()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("sample matrix holds non-finite values".into()));
        }
        Ok(SampleMatrix { data })
    }

    pub fn from_columns(cols: &[Vec<f64>]) -> Result<Self> {
        let n = cols.first().map(|c| c.len()).unwrap_or(0);
        let mut data = Array2::zeros((n, cols.len()));
        for (j, c) in cols.iter().enumerate() {
            if c.len() != n {
                return Err(Error::ShapeMismatch("columns of unequal length".into()));
            }
            for (i, &v) in c.iter().enumerate() {
                data[(i, j)] = v;
            }
        }
        SampleMatrix::new(data)
    }

    pub fn n_samples(&self) -> usize {
        self.data.nrows()
    }
    pub fn n_vars(&self) -> usize {
        self.data.ncols()
    }
    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.data.column(j).to_vec()
    }
}

/// Estimate result with optional shuffle-null calibration.
#[derive(Debug, Clone)]
pub struct InfoResult {
    /// Headline value (clipped at 0 / capped at [`MI_CAP`]).
    pub value: f64,
    /// Value before clipping or capping.
    pub raw: f64,
    pub capped: bool,
    pub mc_null_mean: Option<f64>,
    pub mc_null_q95: Option<f64>,
    pub mc_null_sd: Option<f64>,
    pub n_shuffles: usize,
}

impl InfoResult {
    fn plain(raw: f64, value: f64, capped: bool) -> Self {
        InfoResult {
            value,
            raw,
            capped,
            mc_null_mean: None,
            mc_null_q95: None,
            mc_null_sd: None,
            n_shuffles: 0,
        }
    }

    fn with_null(mut self, null: &[f64]) -> Self {
        if !null.is_empty() {
            self.mc_null_mean = Some(mean(null));
            self.mc_null_q95 = Some(quantile(null, 0.95));
            self.mc_null_sd = Some(std_dev(null));
            self.n_shuffles = null.len();
        }
        self
    }

    /// Significant at 95% against the shuffle null.
    pub fn significant(&self) -> bool {
        self.mc_null_q95.map(|q| self.value > q).unwrap_or(false)
    }
}

/// Rank-based transform of every column to standard normal scores.
///
/// Ties get their average rank; the output column is exactly the normal
/// quantiles at (rank - 0.5) / n, so any strictly monotone transform of a
/// column leaves the result unchanged.
pub fn anamorphosis(x: &SampleMatrix) -> Result<SampleMatrix> {
    let n = x.n_samples();
    let d = x.n_vars();
    let normal = Normal::standard();
    let mut out = Array2::zeros((n, d));
    for j in 0..d {
        let col = x.column(j);
        if col.iter().all(|&v| v == col[0]) {
            return Err(Error::Numerical(format!("column {j} is constant")));
        }
        for (i, r) in average_ranks(&col).into_iter().enumerate() {
            out[(i, j)] = normal.inverse_cdf((r - 0.5) / n as f64);
        }
    }
    SampleMatrix::new(out)
}

/// Average fractional ranks (1-based midranks for ties).
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| xs[a].partial_cmp(&xs[b]).unwrap());
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Vasicek m-spacing differential entropy with Ebrahimi boundary weights.
fn spacing_entropy(xs: &[f64]) -> f64 {
    let n = xs.len();
    let m = ((n as f64).sqrt().round() as usize).clamp(1, n / 2);
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let range = (v[n - 1] - v[0]).abs().max(1e-300);
    let floor = 1e-12 * range;
    let mut acc = 0.0;
    for i in 0..n {
        let lo = i.saturating_sub(m);
        let hi = (i + m).min(n - 1);
        let c = if i < m {
            1.0 + (i as f64) / m as f64
        } else if i + m > n - 1 {
            1.0 + (n - 1 - i) as f64 / m as f64
        } else {
            2.0
        };
        let spacing = (v[hi] - v[lo]).max(floor);
        acc += (n as f64 * spacing / (c * m as f64)).ln();
    }
    acc / n as f64
}

/// Correlation matrix of the columns.
fn correlation_matrix(z: &Array2<f64>) -> DMatrix<f64> {
    let (n, d) = z.dim();
    let mut means = vec![0.0; d];
    for j in 0..d {
        means[j] = z.column(j).sum() / n as f64;
    }
    let mut cov = DMatrix::zeros(d, d);
    for a in 0..d {
        for b in a..d {
            let mut acc = 0.0;
            for i in 0..n {
                acc += (z[(i, a)] - means[a]) * (z[(i, b)] - means[b]);
            }
            cov[(a, b)] = acc / (n as f64 - 1.0);
            cov[(b, a)] = cov[(a, b)];
        }
    }
    let mut corr = DMatrix::zeros(d, d);
    for a in 0..d {
        for b in 0..d {
            let den = (cov[(a, a)] * cov[(b, b)]).sqrt();
            corr[(a, b)] = if den > 0.0 { cov[(a, b)] / den } else { 0.0 };
        }
    }
    corr
}

/// log-determinant through eigenvalues. Eigenvalues below the floor mark a
/// (numerically) deterministic relation; `None` signals the caller to cap.
fn log_det(corr: &DMatrix<f64>) -> Option<f64> {
    if corr.nrows() == 0 {
        return Some(0.0);
    }
    let eig = nalgebra::SymmetricEigen::new(corr.clone());
    let mut acc = 0.0;
    for &l in eig.eigenvalues.iter() {
        if l < 1e-12 {
            return None;
        }
        acc += l.ln();
    }
    Some(acc)
}

fn submatrix(corr: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    let k = idx.len();
    let mut out = DMatrix::zeros(k, k);
    for (a, &ia) in idx.iter().enumerate() {
        for (b, &ib) in idx.iter().enumerate() {
            out[(a, b)] = corr[(ia, ib)];
        }
    }
    out
}

/// Gaussian mutual information between two column groups of an anamorphosed
/// correlation: (ln det R_A + ln det R_B - ln det R_AB) / 2, capped.
fn gaussian_mi(corr: &DMatrix<f64>, a: &[usize], b: &[usize]) -> (f64, bool) {
    let all: Vec<usize> = a.iter().chain(b.iter()).copied().collect();
    let (da, db, dab) = (
        log_det(&submatrix(corr, a)),
        log_det(&submatrix(corr, b)),
        log_det(&submatrix(corr, &all)),
    );
    match (da, db, dab) {
        (Some(da), Some(db), Some(dab)) => {
            let raw = 0.5 * (da + db - dab);
            if raw > MI_CAP {
                (MI_CAP, true)
            } else {
                (raw.max(0.0), false)
            }
        }
        // a deterministic relation somewhere: the joint is singular while
        // the parts need not be
        _ => (MI_CAP, true),
    }
}

/// Negentropy J = H(matched diagonal Gaussian) - H(sample), from marginal
/// m-spacing entropies plus the Gaussian-copula dependence term.
pub fn negentropy(x: &SampleMatrix, shuffles: usize, seed: u64) -> Result<InfoResult> {
    let raw = negentropy_value(x)?;
    let capped = raw >= MI_CAP;
    let value = raw.clamp(0.0, MI_CAP);
    if shuffles == 0 {
        return Ok(InfoResult::plain(raw, value, capped));
    }
    let null: Vec<f64> = (0..shuffles as u64)
        .into_par_iter()
        .map(|s| {
            let mut rng = rng::split(seed, s + 1);
            let mut shuffled = x.data().clone();
            // column-independent shuffles break the joint structure
            let n = shuffled.nrows();
            for j in 0..shuffled.ncols() {
                let mut col: Vec<f64> = shuffled.column(j).to_vec();
                col.shuffle(&mut rng);
                for i in 0..n {
                    shuffled[(i, j)] = col[i];
                }
            }
            let sm = SampleMatrix::new(shuffled).expect("shape preserved");
            negentropy_value(&sm).map(|v| v.clamp(0.0, MI_CAP))
        })
        .collect::<Result<_>>()?;
    Ok(InfoResult::plain(raw, value, capped).with_null(&null))
}

fn negentropy_value(x: &SampleMatrix) -> Result<f64> {
    let z = anamorphosis(x)?;
    let corr = correlation_matrix(z.data());
    let copula = match log_det(&corr) {
        Some(ld) => -0.5 * ld,
        None => return Ok(MI_CAP),
    };
    let half_ln_2pe = 0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E).ln();
    let mut marginal = 0.0;
    for j in 0..x.n_vars() {
        let col = x.column(j);
        let sd = std_dev(&col);
        if sd <= 0.0 {
            return Err(Error::Numerical(format!("column {j} is degenerate")));
        }
        let h = spacing_entropy(&col);
        marginal += half_ln_2pe + sd.ln() - h;
    }
    Ok(marginal + copula)
}

/// Mutual information I(A;B) between two disjoint column groups, with a
/// null band from row-shuffling group B.
pub fn mutual_information(
    x: &SampleMatrix,
    group_a: &[usize],
    group_b: &[usize],
    shuffles: usize,
    seed: u64,
) -> Result<InfoResult> {
    validate_groups(x.n_vars(), &[group_a, group_b])?;
    let z = anamorphosis(x)?;
    let corr = correlation_matrix(z.data());
    let (value, capped) = gaussian_mi(&corr, group_a, group_b);
    let res = InfoResult::plain(value, value, capped);
    if shuffles == 0 {
        return Ok(res);
    }
    let n = x.n_samples();
    let null: Vec<f64> = (0..shuffles as u64)
        .into_par_iter()
        .map(|s| {
            let mut rng = rng::split(seed, s + 1);
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut rng);
            let mut zc = z.data().clone();
            for &j in group_b {
                for i in 0..n {
                    zc[(i, j)] = z.data()[(perm[i], j)];
                }
            }
            let corr = correlation_matrix(&zc);
            gaussian_mi(&corr, group_a, group_b).0
        })
        .collect();
    Ok(res.with_null(&null))
}

/// Interaction information of two parent groups about a child group.
#[derive(Debug, Clone)]
pub struct InteractionInfo {
    /// Joint-minus-individual form: I[(A,B),Y] - I(A,Y) - I(B,Y).
    pub joint_form: InfoResult,
    /// Conditional form I(A,B|Y) - I(A,B), reported as a cross-check.
    pub conditional_form: f64,
    /// |joint - conditional| should stay within twice this scale.
    pub estimator_se: f64,
}

pub fn interaction_information(
    x: &SampleMatrix,
    group_a: &[usize],
    group_b: &[usize],
    group_y: &[usize],
    shuffles: usize,
    seed: u64,
) -> Result<InteractionInfo> {
    validate_groups(x.n_vars(), &[group_a, group_b, group_y])?;
    let z = anamorphosis(x)?;
    let corr = correlation_matrix(z.data());
    let it = |corr: &DMatrix<f64>| -> f64 {
        let ab: Vec<usize> = group_a.iter().chain(group_b.iter()).copied().collect();
        let (joint, _) = gaussian_mi(corr, &ab, group_y);
        let (ia, _) = gaussian_mi(corr, group_a, group_y);
        let (ib, _) = gaussian_mi(corr, group_b, group_y);
        joint - ia - ib
    };
    let raw = it(&corr);
    let conditional = conditional_form(&corr, group_a, group_b, group_y);

    let n = x.n_samples();
    let null: Vec<f64> = (0..shuffles as u64)
        .into_par_iter()
        .map(|s| {
            let mut rng = rng::split(seed, s + 1);
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut rng);
            let mut zc = z.data().clone();
            for &j in group_y {
                for i in 0..n {
                    zc[(i, j)] = z.data()[(perm[i], j)];
                }
            }
            it(&correlation_matrix(&zc))
        })
        .collect();
    let res = InfoResult::plain(raw, raw, raw.abs() >= MI_CAP).with_null(&null);
    let se = res.mc_null_sd.unwrap_or(0.0).max(1e-6);
    Ok(InteractionInfo {
        joint_form: res,
        conditional_form: conditional,
        estimator_se: se,
    })
}

/// I(A,B|Y) - I(A,B) through Gaussian conditional entropies.
fn conditional_form(corr: &DMatrix<f64>, a: &[usize], b: &[usize], y: &[usize]) -> f64 {
    let cat = |xs: &[usize], ys: &[usize]| -> Vec<usize> {
        xs.iter().chain(ys.iter()).copied().collect()
    };
    let ld = |idx: &[usize]| log_det(&submatrix(corr, idx));
    let ab = cat(a, b);
    let aby = cat(&ab, y);
    // I(A,B|Y) = (ln det R_AY + ln det R_BY - ln det R_Y - ln det R_ABY)/2
    let cond = match (ld(&cat(a, y)), ld(&cat(b, y)), ld(y), ld(&aby)) {
        (Some(day), Some(dby), Some(dy), Some(daby)) => 0.5 * (day + dby - dy - daby),
        _ => MI_CAP,
    };
    let (iab, _) = gaussian_mi(corr, a, b);
    (cond - iab).clamp(-2.0 * MI_CAP, 2.0 * MI_CAP)
}

fn validate_groups(n_vars: usize, groups: &[&[usize]]) -> Result<()> {
    let mut seen = vec![false; n_vars];
    for g in groups {
        if g.is_empty() {
            return Err(Error::Config("empty column group".into()));
        }
        for &j in *g {
            if j >= n_vars {
                return Err(Error::Config(format!("column {j} out of range")));
            }
            if seen[j] {
                return Err(Error::Config(format!("column {j} appears in two groups")));
            }
            seen[j] = true;
        }
    }
    Ok(())
}
