//! Monte Carlo estimates of the time constant `μ_r(x)` and its growth as the
//! density decreases.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{default_horizon, ExtendedTime, FrontEngine};
use crate::error::{FrogError, Result};
use crate::lattice::{BoxRegion, SitePoint};
use crate::randomness::{derive_seed, Configuration, WalkOracle};
use crate::stats::{least_squares, LinearFit, MeanSummary};

/// `δ_2(r) = sqrt(|log r| / r)` and `δ_d(r) = r^{-1/2}` for `d ≥ 3`.
pub fn delta(d: usize, r: f64) -> Result<f64> {
    crate::lattice::check_dim(d)?;
    if !(r > 0.0 && r <= 1.0) {
        return Err(FrogError::InvalidDensity(r));
    }
    Ok(if d == 2 { (r.ln().abs() / r).sqrt() } else { r.powf(-0.5) })
}

/// Range growth scale: `t / log t` for `d = 2`, `t` otherwise.
pub fn phi(d: usize, t: f64) -> Result<f64> {
    crate::lattice::check_dim(d)?;
    match d {
        2 if t > 1.0 => Ok(t / t.ln()),
        2 => Err(FrogError::InvalidArgument(format!("phi_2 needs t > 1, got {t}"))),
        _ if t > 0.0 => Ok(t),
        _ => Err(FrogError::InvalidArgument(format!("phi needs t > 0, got {t}"))),
    }
}

/// How the time horizon of each passage query is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum HorizonPolicy {
    /// [`default_horizon`] of the target distance and `δ_d(r)`.
    Default,
    Fixed(u64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MuParams {
    pub dim: usize,
    pub r: f64,
    pub x: SitePoint,
    pub n_list: Vec<u64>,
    pub trials: u64,
    pub master_seed: u64,
    pub horizon: HorizonPolicy,
}

/// Estimate of `μ_r(x)` from `T(0, v_n^x) / n` at one `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MuCell {
    pub n: u64,
    pub trials: u64,
    pub mu_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub delta: f64,
    /// `mu_hat / (δ_d(r)·‖x‖₁)`; infinite when `δ = 0`.
    pub ratio: f64,
    pub censor_rate: f64,
    /// Trials in which an active frog reached the domain boundary.
    pub boundary_touches: u64,
    /// Per-trial `T/n`, `None` when censored.
    pub values: Vec<Option<f64>>,
    /// Per-trial `‖v_n^x‖₁ / n`.
    pub l1_floor: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MuEstimate {
    pub dim: usize,
    pub r: f64,
    pub x: SitePoint,
    pub master_seed: u64,
    pub cells: Vec<MuCell>,
}

/// One row of `mu.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MuRow {
    pub d: usize,
    pub r: f64,
    pub x: String,
    pub n: u64,
    pub trials: u64,
    pub mu_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub delta: f64,
    pub ratio: f64,
    pub censor_rate: f64,
    pub seed: u64,
}

impl MuRow {
    pub const HEADER: [&'static str; 12] =
        ["d", "r", "x", "n", "trials", "mu_hat", "ci_low", "ci_high", "delta", "ratio", "censor_rate", "seed"];
}

impl MuEstimate {
    pub fn rows(&self) -> Vec<MuRow> {
        self.cells
            .iter()
            .map(|c| MuRow {
                d: self.dim,
                r: self.r,
                x: self.x.to_string(),
                n: c.n,
                trials: c.trials,
                mu_hat: c.mu_hat,
                ci_low: c.ci_low,
                ci_high: c.ci_high,
                delta: c.delta,
                ratio: c.ratio,
                censor_rate: c.censor_rate,
                seed: self.master_seed,
            })
            .collect()
    }
}

const TAG_MU: u64 = 0x4D55_0000_0000_0000;

struct TrialOutcome {
    value: ExtendedTime,
    target_l1: u64,
    touched_boundary: bool,
}

/// Trial seeds depend on `(master, n, trial)` only, so runs at different
/// densities share walks and occupancy uniforms and are monotonically coupled.
fn trial_seed(master: u64, n: u64, trial: u64) -> u64 {
    derive_seed(master, TAG_MU ^ n, trial)
}

fn run_trial(dim: usize, r: f64, x: &SitePoint, n: u64, seed: u64, policy: HorizonPolicy, dl: f64) -> Result<TrialOutcome> {
    let goal = x.scale(n as i64);
    let oracle = WalkOracle::new(seed, dim)?;
    let reach = goal.linf();
    // The horizon depends on the target, which depends on the configuration;
    // use the target-free bound ‖nx‖₁ + d·reach for the domain size.
    let h_bound = match policy {
        HorizonPolicy::Default => default_horizon(goal.l1() + dim as u64 * reach.max(1), dl),
        HorizonPolicy::Fixed(h) => h,
    };
    let margin = (1.5 * reach as f64 + 4.0 * (h_bound as f64).sqrt()).ceil() as u64 + reach;
    let domain = BoxRegion::linf(SitePoint::origin(dim), margin);
    let origin = SitePoint::origin(dim);
    let config = Configuration::bernoulli(seed, domain, r)?.force_occupied(origin);
    let target = config.closest_occupied(&goal)?;
    let horizon = match policy {
        HorizonPolicy::Default => default_horizon(target.l1(), dl),
        HorizonPolicy::Fixed(h) => h,
    };
    let engine = FrontEngine::new(&oracle, &config, &domain, horizon);
    let (res, outcome) = engine.passage(&origin, &target)?;
    Ok(TrialOutcome { value: res.value, target_l1: target.l1(), touched_boundary: outcome.left_domain })
}

/// `T(0, v_n^x)/n` over independent trials for each `n`, with `ω(0)` forced to one.
pub fn estimate_mu(params: &MuParams) -> Result<MuEstimate> {
    if params.trials < 2 {
        return Err(FrogError::InvalidArgument("estimate_mu needs at least 2 trials".into()));
    }
    if params.x.dim() != params.dim || params.x.is_origin() {
        return Err(FrogError::InvalidArgument(format!("direction {:?} must be a nonzero {}-vector", params.x, params.dim)));
    }
    if params.n_list.is_empty() || params.n_list.contains(&0) {
        return Err(FrogError::InvalidArgument("n values must be positive".into()));
    }
    let dl = delta(params.dim, params.r)?;
    let mut cells = Vec::with_capacity(params.n_list.len());
    for &n in &params.n_list {
        let outcomes = (0..params.trials)
            .into_par_iter()
            .map(|i| {
                let seed = trial_seed(params.master_seed, n, i);
                run_trial(params.dim, params.r, &params.x, n, seed, params.horizon, dl)
            })
            .collect::<Result<Vec<_>>>()?;
        let values: Vec<Option<f64>> =
            outcomes.iter().map(|o| o.value.finite().map(|t| t as f64 / n as f64)).collect();
        let finite: Vec<f64> = values.iter().flatten().copied().collect();
        if finite.is_empty() {
            return Err(FrogError::EstimationFailure(format!("all {} trials censored at n = {n}", params.trials)));
        }
        let s = MeanSummary::of(&finite);
        let x_l1 = params.x.l1() as f64;
        cells.push(MuCell {
            n,
            trials: params.trials,
            mu_hat: s.mean,
            ci_low: s.ci_low(),
            ci_high: s.ci_high(),
            delta: dl,
            ratio: s.mean / (dl * x_l1),
            censor_rate: 1.0 - finite.len() as f64 / params.trials as f64,
            boundary_touches: outcomes.iter().filter(|o| o.touched_boundary).count() as u64,
            values,
            l1_floor: outcomes.iter().map(|o| o.target_l1 as f64 / n as f64).collect(),
        });
    }
    Ok(MuEstimate { dim: params.dim, r: params.r, x: params.x, master_seed: params.master_seed, cells })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepParams {
    pub dim: usize,
    pub r_list: Vec<f64>,
    pub x: SitePoint,
    pub n: u64,
    pub trials: u64,
    pub master_seed: u64,
    pub horizon: HorizonPolicy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub estimates: Vec<MuEstimate>,
    /// Fit of `log mu_hat` against `log δ_d(r)` over the cells with `δ > 0`.
    pub fit: LinearFit,
}

/// Estimates `μ_r(x)` across densities and fits the log-log slope against `δ_d(r)`.
pub fn scaling_sweep(params: &SweepParams) -> Result<SweepResult> {
    let mut distinct: Vec<f64> = params.r_list.clone();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(FrogError::InvalidArgument("scaling sweep needs at least 3 distinct r values".into()));
    }
    let mut estimates = Vec::with_capacity(params.r_list.len());
    for &r in &params.r_list {
        estimates.push(estimate_mu(&MuParams {
            dim: params.dim,
            r,
            x: params.x,
            n_list: vec![params.n],
            trials: params.trials,
            master_seed: params.master_seed,
            horizon: params.horizon,
        })?);
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = estimates
        .iter()
        .map(|e| &e.cells[0])
        .filter(|c| c.delta > 0.0)
        .map(|c| (c.delta.ln(), c.mu_hat.ln()))
        .unzip();
    let fit = least_squares(&xs, &ys)
        .ok_or_else(|| FrogError::InvalidArgument("need two densities with positive delta for the fit".into()))?;
    Ok(SweepResult { estimates, fit })
}
