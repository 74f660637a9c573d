//! Synthetic benchmarks and recovery scoring.
//!
//! A synthetic source is the outer product of a sparse filter along the rows
//! (exponential draws with scale `β`) and a dense filter along the columns
//! (drawn from a symmetric prior and normalised to unit length). The
//! injection protocol scales given rank-1 cells to a target elementwise
//! variance and adds them to a background matrix.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DataMatrix, Source};
use crate::priors::{draw_prior, PriorFamily, PriorSpec};
use crate::sampler::{standard_normal, RngHandle};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSpec {
    /// Prior of the dense (column-axis) filter before normalisation.
    #[serde(default = "default_dense_prior")]
    pub dense_prior: PriorSpec,
    /// Exponential scale `β` of the sparse (row-axis) filter.
    pub sparse_scale: f64,
}

fn default_dense_prior() -> PriorSpec {
    PriorSpec::default_for(PriorFamily::Normal)
}

impl SourceSpec {
    pub fn new(sparse_scale: f64) -> Self {
        Self {
            dense_prior: default_dense_prior(),
            sparse_scale,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub rows: usize,
    pub cols: usize,
    pub sources: Vec<SourceSpec>,
    /// Standard deviation of the i.i.d. Gaussian noise.
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            rows: 1000,
            cols: 1000,
            sources: vec![SourceSpec::new(1.0), SourceSpec::new(0.5), SourceSpec::new(0.25)],
            noise_sigma: 0.01,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::Config(format!(
                "synthetic data must be at least 1x1, got {}x{}",
                self.rows, self.cols
            )));
        }
        if self.sources.is_empty() {
            return Err(Error::Config("synthetic data needs at least one source".into()));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::Config(format!(
                "noise_sigma must be finite and >= 0, got {}",
                self.noise_sigma
            )));
        }
        for s in &self.sources {
            if !(s.sparse_scale > 0.0 && s.sparse_scale.is_finite()) {
                return Err(Error::Config(format!(
                    "sparse scale must be positive, got {}",
                    s.sparse_scale
                )));
            }
            s.dense_prior.validate()?;
            if !s.dense_prior.family.is_proper() {
                return Err(Error::Config(format!(
                    "dense prior {} is improper",
                    s.dense_prior.family
                )));
            }
        }
        Ok(())
    }
}

/// The sources that make up a data matrix, as added to it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub sources: Vec<Source>,
    /// Standard deviation of the added noise; `None` for injected data,
    /// whose background is not modelled.
    pub noise_sigma: Option<f64>,
    /// Elementwise variance of each stored source.
    pub variances: Vec<f64>,
    /// Factor applied to each source before it was added.
    pub scales: Vec<f64>,
}

impl GroundTruth {
    /// `Σ_k U_k V_kᵀ`.
    pub fn signal(&self) -> Array2<f64> {
        let mut total = self.sources[0].matrix();
        for s in &self.sources[1..] {
            total += &s.matrix();
        }
        total
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn mean_product(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / a.len() as f64
}

/// Elementwise (population) variance of the matrix `u vᵀ`.
pub fn rank_one_variance(u: &[f64], v: &[f64]) -> f64 {
    let m = mean(u) * mean(v);
    (mean_product(u, u) * mean_product(v, v) - m * m).max(0.0)
}

/// Draws a data matrix and its ground truth.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<(DataMatrix, GroundTruth)> {
    spec.validate()?;
    let mut rng = RngHandle::new(spec.seed, 0);
    let mut sources = Vec::with_capacity(spec.sources.len());
    for (index, s) in spec.sources.iter().enumerate() {
        let sparse_prior = PriorSpec::new(PriorFamily::Exponential, vec![s.sparse_scale])?;
        let spatial = draw_prior(&sparse_prior, spec.rows, &mut rng)?;
        let mut temporal = draw_prior(&s.dense_prior, spec.cols, &mut rng)?;
        let norm = temporal.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            temporal.iter_mut().for_each(|x| *x /= norm);
        }
        sources.push(Source {
            index,
            spatial,
            temporal,
            variance_explained: 0.0,
        });
    }
    let truth_signal = {
        let t = GroundTruth {
            sources: sources.clone(),
            noise_sigma: None,
            variances: vec![],
            scales: vec![],
        };
        t.signal()
    };
    let mut x = truth_signal;
    if spec.noise_sigma > 0.0 {
        x.mapv_inplace(|v| v + spec.noise_sigma * standard_normal(&mut rng));
    }
    let data = DataMatrix::new(x)?;
    let total = data.frobenius_sq();
    for s in &mut sources {
        let energy = s.spatial.iter().map(|x| x * x).sum::<f64>() * s.temporal.iter().map(|x| x * x).sum::<f64>();
        s.variance_explained = if total > 0.0 { energy / total } else { 0.0 };
    }
    let variances = sources
        .iter()
        .map(|s| rank_one_variance(&s.spatial, &s.temporal))
        .collect();
    let scales = vec![1.0; sources.len()];
    Ok((
        data,
        GroundTruth {
            sources,
            noise_sigma: Some(spec.noise_sigma),
            variances,
            scales,
        },
    ))
}

/// Scales each cell so that its elementwise variance is `target_variance`
/// and adds it to `background`. The returned sources are the scaled cells
/// (the scale is applied to the temporal filter).
pub fn inject_ground_truth(
    background: &DataMatrix,
    cells: &[Source],
    target_variance: f64,
) -> Result<(DataMatrix, GroundTruth)> {
    if !(target_variance >= 0.0 && target_variance.is_finite()) {
        return Err(Error::InvalidParams(format!(
            "target variance must be >= 0, got {target_variance}"
        )));
    }
    if cells.is_empty() {
        return Err(Error::InvalidParams("no cells to inject".into()));
    }
    let mut out = background.view().to_owned();
    let mut sources = Vec::with_capacity(cells.len());
    let mut scales = Vec::with_capacity(cells.len());
    for cell in cells {
        if cell.spatial.len() != background.rows() || cell.temporal.len() != background.cols() {
            return Err(Error::Shape(format!(
                "cell {} is {}x{}, background is {}x{}",
                cell.index,
                cell.spatial.len(),
                cell.temporal.len(),
                background.rows(),
                background.cols()
            )));
        }
        let var = rank_one_variance(&cell.spatial, &cell.temporal);
        if !(var > 0.0) {
            return Err(Error::InvalidParams(format!("cell {} has zero variance", cell.index)));
        }
        let c = (target_variance / var).sqrt();
        let scaled = Source {
            index: cell.index,
            spatial: cell.spatial.clone(),
            temporal: cell.temporal.iter().map(|v| v * c).collect(),
            variance_explained: 0.0,
        };
        if c > 0.0 {
            out += &scaled.matrix();
        }
        sources.push(scaled);
        scales.push(c);
    }
    let data = DataMatrix::new(out)?;
    let total = data.frobenius_sq();
    for s in &mut sources {
        let energy = s.spatial.iter().map(|x| x * x).sum::<f64>() * s.temporal.iter().map(|x| x * x).sum::<f64>();
        s.variance_explained = if total > 0.0 { energy / total } else { 0.0 };
    }
    let variances = vec![target_variance; sources.len()];
    Ok((
        data,
        GroundTruth {
            sources,
            noise_sigma: None,
            variances,
            scales,
        },
    ))
}

/// Sample Pearson correlation. Errors on length mismatch, fewer than two
/// values, or a constant input.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!(
            "pearson inputs have lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: a.len(),
        });
    }
    let (ma, mb) = (mean(a), mean(b));
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::InvalidParams("pearson correlation of a constant input".into()));
    }
    Ok((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

/// What two sources are compared on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorrelationTarget {
    /// The flattened rank-1 source matrices.
    #[default]
    Full,
    Spatial,
    Temporal,
}

/// `|ρ|` between two sources; 0 when either is constant.
pub fn source_correlation(a: &Source, b: &Source, target: CorrelationTarget) -> f64 {
    let r = match target {
        CorrelationTarget::Spatial => pearson(&a.spatial, &b.spatial),
        CorrelationTarget::Temporal => pearson(&a.temporal, &b.temporal),
        CorrelationTarget::Full => {
            // Moments of u vᵀ factor into moments of u and v.
            let exy = mean_product(&a.spatial, &b.spatial) * mean_product(&a.temporal, &b.temporal);
            let ex = mean(&a.spatial) * mean(&a.temporal);
            let ey = mean(&b.spatial) * mean(&b.temporal);
            let vx = rank_one_variance(&a.spatial, &a.temporal);
            let vy = rank_one_variance(&b.spatial, &b.temporal);
            if vx > 0.0 && vy > 0.0 {
                Ok(((exy - ex * ey) / (vx.sqrt() * vy.sqrt())).clamp(-1.0, 1.0))
            } else {
                Err(Error::InvalidParams("constant source".into()))
            }
        }
    };
    r.map(f64::abs).unwrap_or(0.0)
}

/// `table[i][n]` = best `|ρ|` between truth source `i` and any source of
/// run `n`.
pub fn correlation_table(truth: &[Source], runs: &[Vec<Source>], target: CorrelationTarget) -> Vec<Vec<f64>> {
    truth
        .iter()
        .map(|t| {
            runs.iter()
                .map(|run| run.iter().map(|s| source_correlation(t, s, target)).fold(0.0, f64::max))
                .collect()
        })
        .collect()
}

/// Median with the lower-middle element for even lengths.
pub fn lower_median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v[(v.len() - 1) / 2]
}

/// Mean over truth sources of the median over runs of the best correlation.
pub fn score_from_table(table: &[Vec<f64>]) -> Result<f64> {
    if table.is_empty() || table.iter().any(|row| row.is_empty()) {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    Ok(table.iter().map(|row| lower_median(row)).sum::<f64>() / table.len() as f64)
}

/// Recovery score of several runs against the ground truth.
pub fn model_score(truth: &GroundTruth, runs: &[Vec<Source>], target: CorrelationTarget) -> Result<f64> {
    if runs.is_empty() || runs.iter().any(|r| r.is_empty()) {
        return Err(Error::InsufficientData {
            needed: 1,
            got: runs.iter().map(Vec::len).min().unwrap_or(0),
        });
    }
    score_from_table(&correlation_table(&truth.sources, runs, target))
}

/// `log(‖u‖₁ / ‖u‖₂)`: 0 for a one-hot vector, `½ log n` for a constant one.
pub fn sparsity(u: &[f64]) -> f64 {
    let l1: f64 = u.iter().map(|x| x.abs()).sum();
    let l2: f64 = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    (l1 / l2).ln()
}
