//! Fitting: an EM phase of blocked Gibbs sweeps with maximum-likelihood
//! updates of `α` and `θ`, then a block coordinate descent phase that moves
//! each column to its conditional mode.
//!
//! A column's conditional posterior is `N(μ, σ²) · f(u | θ)` with
//!
//! ```text
//! μ = (A_k − U·B_k + U_k·B_kk) / B_kk,    σ = 1 / √(α·B_kk)
//! ```
//!
//! where `A = X V`, `B = VᵀV` for a `U` update and `A = XᵀU`, `B = UᵀU` for
//! a `V` update. `A` and `B` depend only on the other factor and are built
//! once per sweep.

use std::io::{self, Write};
use std::time::Instant;

use log::{debug, info, warn};
use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lowrank::{
    build_projection, estimate_flops, likelihood_params_reduced, reduced_residual_sq, LowRankConfig, ProjectionPair,
    ReducedCache,
};
use crate::model::{neg_log_joint, neg_log_joint_from_residual, residual_sq, DataMatrix, FactorBank, ModelState, Side};
use crate::priors::{draw_prior, fit_ml, posterior_mode, posterior_sample, GaussianLikelihood, PriorFamily, PriorSpec};
use crate::sampler::RngHandle;

pub const ALPHA_MIN: f64 = 1e-10;
pub const ALPHA_MAX: f64 = 1e12;
pub const DEAD_SOURCE_THRESHOLD: f64 = 1e-12;
/// EM stops when the mean monitor of the last window differs from the mean
/// of the window before it by less than `tol` (relative).
pub const CONVERGENCE_WINDOW: usize = 10;
const MAX_REINIT_ATTEMPTS: usize = 16;
/// Stream of the projection builder; stream 0 drives the sampler.
const PROJECTION_STREAM: u64 = 1;

/// Update products for one side: `A` (dim×K) and `B` (K×K).
#[derive(Debug, Clone, PartialEq)]
pub struct UpdateCache {
    pub a: Array2<f64>,
    pub b: Array2<f64>,
}

impl UpdateCache {
    pub fn build(x: &DataMatrix, state: &ModelState, side: Side) -> Self {
        match side {
            Side::U => {
                let v = state.v.columns();
                Self {
                    a: x.view().dot(&v),
                    b: v.t().dot(&v),
                }
            }
            Side::V => {
                let u = state.u.columns();
                Self {
                    a: x.view().t().dot(&u),
                    b: u.t().dot(&u),
                }
            }
        }
    }
}

/// `(a_k − F·B_k + F_k·B_kk) / B_kk` for the factor `F` being updated.
pub(crate) fn conditional_mean(
    a_k: ArrayView1<'_, f64>,
    factor: ArrayView2<'_, f64>,
    b: ArrayView2<'_, f64>,
    k: usize,
) -> Array1<f64> {
    let b_kk = b[[k, k]];
    let fb = factor.dot(&b.column(k));
    let mut mu = Array1::zeros(a_k.len());
    for i in 0..mu.len() {
        mu[i] = (a_k[i] - fb[i] + factor[[i, k]] * b_kk) / b_kk;
    }
    mu
}

/// Conditional-posterior likelihood of column `k` of `factor`.
pub fn likelihood_params(
    cache: &UpdateCache,
    factor: &FactorBank,
    alpha: f64,
    k: usize,
    dead_source_threshold: f64,
) -> Result<GaussianLikelihood> {
    if k >= factor.k() {
        return Err(Error::Shape(format!("source {k} out of range for K={}", factor.k())));
    }
    let b_kk = cache.b[[k, k]];
    if !(b_kk > dead_source_threshold) {
        return Err(Error::DeadSource { column: k, b_kk });
    }
    let mu = conditional_mean(cache.a.column(k), factor.columns(), cache.b.view(), k);
    GaussianLikelihood::new(mu.to_vec(), 1.0 / (alpha * b_kk).sqrt())
}

/// Priors for one factor: a single spec broadcast to every column, or one
/// per column. Empty hyperparameter vectors take the family defaults. With
/// `fixed` set the hyperparameters are never refitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorAssignment {
    pub specs: Vec<PriorSpec>,
    #[serde(default)]
    pub fixed: bool,
}

impl PriorAssignment {
    pub fn broadcast(family: PriorFamily) -> Self {
        Self {
            specs: vec![PriorSpec::default_for(family)],
            fixed: false,
        }
    }

    pub fn per_column(specs: Vec<PriorSpec>) -> Self {
        Self { specs, fixed: false }
    }

    pub fn with_fixed(mut self, fixed: bool) -> Self {
        self.fixed = fixed;
        self
    }

    /// One validated spec per column.
    pub fn resolve(&self, k: usize) -> Result<Vec<PriorSpec>> {
        let filled: Vec<PriorSpec> = self
            .specs
            .iter()
            .map(|s| {
                if s.params.is_empty() {
                    PriorSpec::default_for(s.family)
                } else {
                    s.clone()
                }
            })
            .collect();
        for s in &filled {
            s.validate()?;
        }
        match filled.len() {
            1 => Ok(vec![filled[0].clone(); k]),
            n if n == k => Ok(filled),
            n => Err(Error::Config(format!("{n} prior specs given for K={k} columns"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    pub k: usize,
    pub max_em_iters: usize,
    pub max_bcd_iters: usize,
    pub tol: f64,
    pub seed: u64,
    pub dead_source_threshold: f64,
    pub priors_u: PriorAssignment,
    pub priors_v: PriorAssignment,
    /// Pool all columns of a factor into one hyperparameter fit.
    pub shared_hyperparams: bool,
    pub lowrank: Option<LowRankConfig>,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            k: 1,
            max_em_iters: 200,
            max_bcd_iters: 50,
            tol: 1e-5,
            seed: 0,
            dead_source_threshold: DEAD_SOURCE_THRESHOLD,
            priors_u: PriorAssignment::broadcast(PriorFamily::Uniform),
            priors_v: PriorAssignment::broadcast(PriorFamily::Uniform),
            shared_hyperparams: false,
            lowrank: None,
        }
    }
}

impl EngineConfig {
    pub fn new(k: usize, prior_u: PriorFamily, prior_v: PriorFamily) -> Self {
        Self {
            k,
            priors_u: PriorAssignment::broadcast(prior_u),
            priors_v: PriorAssignment::broadcast(prior_v),
            ..Self::default()
        }
    }

    pub fn assignment(&self, side: Side) -> &PriorAssignment {
        match side {
            Side::U => &self.priors_u,
            Side::V => &self.priors_v,
        }
    }

    /// Checks the configuration against an M×N data matrix.
    pub fn validate(&self, m: usize, n: usize) -> Result<()> {
        let k = self.k;
        if k == 0 || k > m.min(n) {
            return Err(Error::Config(format!(
                "K={k} must lie in [1, min(M, N)] = [1, {}]",
                m.min(n)
            )));
        }
        if self.max_em_iters == 0 || self.max_bcd_iters == 0 {
            return Err(Error::Config("iteration caps must be at least 1".into()));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::Config(format!("tol must be positive, got {}", self.tol)));
        }
        if !(self.dead_source_threshold >= 0.0 && self.dead_source_threshold.is_finite()) {
            return Err(Error::Config(
                "dead_source_threshold must be finite and non-negative".into(),
            ));
        }
        for side in [Side::U, Side::V] {
            let specs = self.assignment(side).resolve(k)?;
            if self.shared_hyperparams && specs.iter().any(|s| s.family != specs[0].family) {
                return Err(Error::Config(format!(
                    "shared hyperparameters need one family per factor, {side} mixes families"
                )));
            }
        }
        if let Some(lr) = &self.lowrank {
            let (m_r, n_r) = lr.ranks(n);
            if m_r < k || m_r > m || n_r < k || n_r > n {
                return Err(Error::Config(format!(
                    "projection ranks ({m_r}, {n_r}) must lie in [K, M] x [K, N] = [{k}, {m}] x [{k}, {n}]"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Em,
    Bcd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum EventKind {
    /// `B_kk` fell to the threshold; the other factor's column was redrawn.
    DeadSource { b_kk: f64 },
    /// A column's norm collapsed before rescaling; it was redrawn.
    CollapsedColumn { norm: f64 },
    /// The projection basis contains random completions.
    RankDeficientProjection { deficit: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineEvent {
    pub iteration: usize,
    pub phase: Phase,
    /// The factor whose column was changed.
    pub side: Side,
    pub column: Option<usize>,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub phase: Phase,
    pub monitor: f64,
    pub neg_log_joint: f64,
    pub alpha: f64,
    pub theta_u: Vec<Vec<f64>>,
    pub theta_v: Vec<Vec<f64>>,
    pub flop_count: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub records: Vec<IterationRecord>,
    pub events: Vec<EngineEvent>,
    pub em_iterations: usize,
    pub bcd_iterations: usize,
    pub em_converged: bool,
    pub bcd_converged: bool,
    /// Exact, evaluated on the full data.
    pub final_neg_log_joint: f64,
    pub total_flops: f64,
    pub wall_time_secs: f64,
}

impl RunReport {
    /// One JSON object per iteration record.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> io::Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut out, r)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// `α = MN / ‖X − UVᵀ‖²_F`, clamped to `[ALPHA_MIN, ALPHA_MAX]`.
pub fn update_noise_precision(x: &DataMatrix, state: &ModelState) -> Result<f64> {
    let r2 = residual_sq(x, &state.u, &state.v)?;
    Ok(alpha_from_residual(r2, x.rows() * x.cols()))
}

fn alpha_from_residual(r2: f64, mn: usize) -> f64 {
    if r2 <= 0.0 {
        return ALPHA_MAX;
    }
    (mn as f64 / r2).clamp(ALPHA_MIN, ALPHA_MAX)
}

fn residual_energy(x: &DataMatrix, state: &ModelState, projection: Option<&ProjectionPair>) -> Result<f64> {
    match projection {
        Some(pp) if !pp.is_identity() => Ok(reduced_residual_sq(pp, state)),
        _ => residual_sq(x, &state.u, &state.v),
    }
}

fn redraw_column(state: &mut ModelState, side: Side, k: usize) -> Result<()> {
    let spec = state.bank(side).prior(k).clone();
    let dim = state.bank(side).dim();
    let values = draw_prior(&spec, dim, &mut state.rng)?;
    state
        .bank_mut(side)
        .columns_mut()
        .column_mut(k)
        .assign(&Array1::from(values));
    Ok(())
}

/// Normalises every column of `side` to unit length and moves the scale to
/// the other factor, leaving each `U_k V_kᵀ` unchanged. Columns with norm
/// below `threshold` are redrawn from their prior first. Returns the redrawn
/// columns and their norms.
pub fn rescale_columns(state: &mut ModelState, side: Side, threshold: f64) -> Result<Vec<(usize, f64)>> {
    let mut redrawn = Vec::new();
    for k in 0..state.k() {
        let mut norm = state.bank(side).column(k).dot(&state.bank(side).column(k)).sqrt();
        let mut attempts = 0;
        while !(norm >= threshold && norm > 0.0 && norm.is_finite()) {
            if attempts == 0 {
                redrawn.push((k, norm));
            }
            if attempts == MAX_REINIT_ATTEMPTS {
                return Err(Error::DeadSource {
                    column: k,
                    b_kk: norm * norm,
                });
            }
            redraw_column(state, side, k)?;
            norm = state.bank(side).column(k).dot(&state.bank(side).column(k)).sqrt();
            attempts += 1;
        }
        state
            .bank_mut(side)
            .columns_mut()
            .column_mut(k)
            .mapv_inplace(|v| v / norm);
        state
            .bank_mut(side.other())
            .columns_mut()
            .column_mut(k)
            .mapv_inplace(|v| v * norm);
    }
    Ok(redrawn)
}

enum SideCache {
    Full(UpdateCache),
    Reduced(ReducedCache),
}

impl SideCache {
    fn build(x: &DataMatrix, state: &ModelState, side: Side, projection: Option<&ProjectionPair>) -> Self {
        match projection {
            Some(pp) => SideCache::Reduced(ReducedCache::build(pp, state, side)),
            None => SideCache::Full(UpdateCache::build(x, state, side)),
        }
    }

    fn likelihood(
        &self,
        state: &ModelState,
        side: Side,
        projection: Option<&ProjectionPair>,
        k: usize,
        threshold: f64,
    ) -> Result<GaussianLikelihood> {
        match (self, projection) {
            (SideCache::Full(c), _) => likelihood_params(c, state.bank(side), state.alpha, k, threshold),
            (SideCache::Reduced(rc), Some(pp)) => likelihood_params_reduced(pp, rc, state.alpha, k, threshold),
            (SideCache::Reduced(_), None) => unreachable!("reduced cache without projection"),
        }
    }

    fn column_updated(&mut self, state: &ModelState, side: Side, projection: Option<&ProjectionPair>, k: usize) {
        if let (SideCache::Reduced(rc), Some(pp)) = (self, projection) {
            rc.column_updated(pp, k, state.bank(side).column(k));
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Update {
    Sample,
    Mode,
}

fn fit_column(state: &mut ModelState, side: Side, k: usize) -> Result<()> {
    let bank = state.bank(side);
    let spec = bank.prior(k);
    if !spec.family.is_proper() || bank.dim() < 2 {
        return Ok(());
    }
    let values = bank.column(k).to_vec();
    let theta = fit_ml(spec.family, &values, Some(&spec.params))?;
    state.bank_mut(side).set_params(k, theta);
    Ok(())
}

fn fit_shared(state: &mut ModelState, side: Side) -> Result<()> {
    let bank = state.bank(side);
    let spec = bank.prior(0).clone();
    if !spec.family.is_proper() {
        return Ok(());
    }
    let values: Vec<f64> = (0..bank.k()).flat_map(|k| bank.column(k).to_vec()).collect();
    if values.len() < 2 {
        return Ok(());
    }
    let theta = fit_ml(spec.family, &values, Some(&spec.params))?;
    for k in 0..state.k() {
        state.bank_mut(side).set_params(k, theta.clone());
    }
    Ok(())
}

struct SweepContext<'a> {
    cfg: &'a EngineConfig,
    projection: Option<&'a ProjectionPair>,
    phase: Phase,
}

fn sweep(
    x: &DataMatrix,
    state: &mut ModelState,
    side: Side,
    ctx: &SweepContext<'_>,
    update: Update,
    on_block: &mut dyn FnMut(&ModelState, usize),
) -> Result<Vec<EngineEvent>> {
    let cfg = ctx.cfg;
    let threshold = cfg.dead_source_threshold;
    let refit = update == Update::Sample && !cfg.assignment(side).fixed;
    let mut events = Vec::new();
    let event = |state: &ModelState, side: Side, k: usize, kind: EventKind| EngineEvent {
        iteration: state.iteration,
        phase: ctx.phase,
        side,
        column: Some(k),
        kind,
    };
    if refit && cfg.shared_hyperparams {
        fit_shared(state, side)?;
    }
    let mut cache = SideCache::build(x, state, side, ctx.projection);
    for k in 0..state.k() {
        if refit && !cfg.shared_hyperparams {
            fit_column(state, side, k)?;
        }
        let mut attempts = 0;
        let lik = loop {
            match cache.likelihood(state, side, ctx.projection, k, threshold) {
                Ok(lik) => break lik,
                Err(Error::DeadSource { b_kk, .. }) if attempts < MAX_REINIT_ATTEMPTS => {
                    warn!(
                        "dead source {k} while updating {side} (B_kk = {b_kk:e}); redrawing {}",
                        side.other()
                    );
                    events.push(event(state, side.other(), k, EventKind::DeadSource { b_kk }));
                    redraw_column(state, side.other(), k)?;
                    cache = SideCache::build(x, state, side, ctx.projection);
                    attempts += 1;
                }
                Err(e) => return Err(e),
            }
        };
        let prior = state.bank(side).prior(k).clone();
        let values = match update {
            Update::Sample => {
                let current = state.bank(side).column(k).to_vec();
                posterior_sample(&prior, &lik, &current, &mut state.rng)?
            }
            Update::Mode => posterior_mode(&prior, &lik)?,
        };
        state
            .bank_mut(side)
            .columns_mut()
            .column_mut(k)
            .assign(&Array1::from(values));
        cache.column_updated(state, side, ctx.projection, k);
        on_block(state, k);
    }
    for (k, norm) in rescale_columns(state, side, threshold)? {
        warn!("column {k} of {side} collapsed (norm {norm:e}); redrawn from its prior");
        events.push(event(state, side, k, EventKind::CollapsedColumn { norm }));
    }
    Ok(events)
}

/// One blocked Gibbs sweep over the columns of `side`: for each column in
/// ascending order, refit its hyperparameters (unless fixed), then draw it
/// from its conditional posterior. Ends by rescaling the columns.
pub fn gibbs_sweep_factor(
    x: &DataMatrix,
    state: &mut ModelState,
    side: Side,
    cfg: &EngineConfig,
    projection: Option<&ProjectionPair>,
) -> Result<Vec<EngineEvent>> {
    let ctx = SweepContext {
        cfg,
        projection,
        phase: Phase::Em,
    };
    sweep(x, state, side, &ctx, Update::Sample, &mut |_, _| {})
}

/// One coordinate-descent sweep: every column of `side` is set to its
/// conditional mode. Hyperparameters and `α` are left alone.
pub fn bcd_sweep_factor(
    x: &DataMatrix,
    state: &mut ModelState,
    side: Side,
    cfg: &EngineConfig,
    projection: Option<&ProjectionPair>,
) -> Result<Vec<EngineEvent>> {
    bcd_sweep_factor_with(x, state, side, cfg, projection, |_, _| {})
}

/// As [`bcd_sweep_factor`], calling `on_block(state, k)` after column `k`
/// is updated and before the final rescaling.
pub fn bcd_sweep_factor_with(
    x: &DataMatrix,
    state: &mut ModelState,
    side: Side,
    cfg: &EngineConfig,
    projection: Option<&ProjectionPair>,
    mut on_block: impl FnMut(&ModelState, usize),
) -> Result<Vec<EngineEvent>> {
    let ctx = SweepContext {
        cfg,
        projection,
        phase: Phase::Bcd,
    };
    sweep(x, state, side, &ctx, Update::Mode, &mut on_block)
}

/// Factors drawn from their priors at the configured (or default)
/// hyperparameters, `α = 1`.
pub fn initial_state(x: &DataMatrix, cfg: &EngineConfig) -> Result<ModelState> {
    cfg.validate(x.rows(), x.cols())?;
    let mut rng = RngHandle::new(cfg.seed, 0);
    let bank = |side: Side, dim: usize, rng: &mut RngHandle| -> Result<FactorBank> {
        let specs = cfg.assignment(side).resolve(cfg.k)?;
        let mut columns = Array2::zeros((dim, cfg.k));
        for (k, spec) in specs.iter().enumerate() {
            columns.column_mut(k).assign(&Array1::from(draw_prior(spec, dim, rng)?));
        }
        FactorBank::new(side, columns, specs)
    };
    let u = bank(Side::U, x.rows(), &mut rng)?;
    let v = bank(Side::V, x.cols(), &mut rng)?;
    ModelState::new(u, v, 1.0, rng)
}

/// Builds the projection pair requested by `cfg`, if any.
pub fn projection_for(x: &DataMatrix, cfg: &EngineConfig) -> Result<Option<ProjectionPair>> {
    cfg.lowrank
        .map(|lr| {
            let (m_r, n_r) = lr.ranks(x.cols());
            let mut rng = RngHandle::new(cfg.seed, PROJECTION_STREAM);
            build_projection(x, m_r, n_r, lr.oversample, &mut rng)
        })
        .transpose()
}

fn thetas(bank: &FactorBank) -> Vec<Vec<f64>> {
    bank.priors().iter().map(|p| p.params.clone()).collect()
}

fn window_converged(monitors: &[f64], tol: f64) -> bool {
    let w = CONVERGENCE_WINDOW;
    if monitors.len() < 2 * w {
        return false;
    }
    let n = monitors.len();
    let recent = monitors[n - w..].iter().sum::<f64>() / w as f64;
    let before = monitors[n - 2 * w..n - w].iter().sum::<f64>() / w as f64;
    (recent - before).abs() <= tol * before.abs().max(f64::MIN_POSITIVE)
}

/// Runs the EM phase then the BCD phase.
pub fn fit(x: &DataMatrix, cfg: &EngineConfig) -> Result<(ModelState, RunReport)> {
    let start = Instant::now();
    let mut state = initial_state(x, cfg)?;
    let projection = projection_for(x, cfg)?;
    let projection = projection.as_ref();
    let mn = x.rows() * x.cols();
    let (m_r, n_r) = projection.map_or((x.rows(), x.cols()), |pp| (pp.m_r(), pp.n_r()));
    let flops = estimate_flops(x.rows(), x.cols(), cfg.k, m_r, n_r, projection.is_some());

    let mut events = Vec::new();
    if let Some(pp) = projection {
        for side in [Side::U, Side::V] {
            let deficit = pp.rank_deficit(side);
            if deficit > 0 {
                warn!("projection for {side} padded with {deficit} random directions");
                events.push(EngineEvent {
                    iteration: 0,
                    phase: Phase::Em,
                    side,
                    column: None,
                    kind: EventKind::RankDeficientProjection { deficit },
                });
            }
        }
    }

    let mut records = Vec::new();
    let record = |state: &ModelState, phase: Phase, nlj: f64| IterationRecord {
        iteration: state.iteration,
        phase,
        monitor: -nlj,
        neg_log_joint: nlj,
        alpha: state.alpha,
        theta_u: thetas(&state.u),
        theta_v: thetas(&state.v),
        flop_count: flops,
    };

    let em_ctx = SweepContext {
        cfg,
        projection,
        phase: Phase::Em,
    };
    let mut monitors = Vec::new();
    let mut em_converged = false;
    let mut em_iterations = 0;
    for _ in 0..cfg.max_em_iters {
        state.iteration += 1;
        em_iterations += 1;
        state.alpha = alpha_from_residual(residual_energy(x, &state, projection)?, mn);
        for side in [Side::U, Side::V] {
            events.extend(sweep(x, &mut state, side, &em_ctx, Update::Sample, &mut |_, _| {})?);
        }
        let nlj = neg_log_joint_from_residual(residual_energy(x, &state, projection)?, mn, &state)?;
        state.monitor = -nlj;
        records.push(record(&state, Phase::Em, nlj));
        debug!(
            "em {}: monitor {:.6e}, alpha {:.4e}",
            state.iteration, state.monitor, state.alpha
        );
        monitors.push(state.monitor);
        if window_converged(&monitors, cfg.tol) {
            em_converged = true;
            break;
        }
    }
    info!("EM phase finished after {em_iterations} iterations (converged: {em_converged})");

    let bcd_ctx = SweepContext {
        cfg,
        projection,
        phase: Phase::Bcd,
    };
    let mut previous = -state.monitor;
    let mut bcd_converged = false;
    let mut bcd_iterations = 0;
    for _ in 0..cfg.max_bcd_iters {
        state.iteration += 1;
        bcd_iterations += 1;
        for side in [Side::U, Side::V] {
            events.extend(sweep(x, &mut state, side, &bcd_ctx, Update::Mode, &mut |_, _| {})?);
        }
        let nlj = neg_log_joint_from_residual(residual_energy(x, &state, projection)?, mn, &state)?;
        state.monitor = -nlj;
        records.push(record(&state, Phase::Bcd, nlj));
        debug!("bcd {}: neg log joint {:.6e}", state.iteration, nlj);
        if (previous - nlj).abs() <= cfg.tol * previous.abs().max(f64::MIN_POSITIVE) {
            bcd_converged = true;
            break;
        }
        previous = nlj;
    }
    info!("BCD phase finished after {bcd_iterations} iterations (converged: {bcd_converged})");

    let final_neg_log_joint = neg_log_joint(x, &state)?;
    let total_flops = flops * records.len() as f64;
    let report = RunReport {
        records,
        events,
        em_iterations,
        bcd_iterations,
        em_converged,
        bcd_converged,
        final_neg_log_joint,
        total_flops,
        wall_time_secs: start.elapsed().as_secs_f64(),
    };
    Ok((state, report))
}
