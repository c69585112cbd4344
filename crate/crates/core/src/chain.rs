//! Chains of active frogs.
//!
//! A chain is driven by an index sequence `I = (I_1, …, I_ν)`: the walk from the
//! current anchor runs until it has met `I_ℓ` occupied sites that no earlier
//! part of the chain has visited, and the last of them becomes the next anchor.

use rayon::prelude::*;
use rustc_hash::FxHashSet;
use serde::{Deserialize, Serialize};

use crate::dynamics::{ExtendedTime, PassageResult};
use crate::error::{FrogError, Result};
use crate::estimator::delta;
use crate::lattice::{BoxRegion, SitePoint};
use crate::randomness::{derive_seed, Configuration, WalkOracle};
use crate::stats::{ks_two_sample, KsResult, Proportion};

/// Index sequence `I`; every entry is at least one.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChainSpec {
    indices: Vec<u64>,
}

impl ChainSpec {
    pub fn new(indices: Vec<u64>) -> Result<Self> {
        if indices.is_empty() {
            return Err(FrogError::InvalidArgument("chain needs at least one leg".into()));
        }
        if indices.contains(&0) {
            return Err(FrogError::InvalidArgument("chain indices must be positive".into()));
        }
        Ok(Self { indices })
    }

    pub fn indices(&self) -> &[u64] {
        &self.indices
    }

    pub fn legs(&self) -> usize {
        self.indices.len()
    }

    pub fn total(&self) -> u64 {
        self.indices.iter().sum()
    }
}

/// Realisation of a chain: anchors, fresh-site times and visited sites per leg.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainTrace {
    pub anchors: Vec<SitePoint>,
    /// `leg_times[ℓ][i]` is `σ_I(ℓ+1, i)`; entry 0 is always `Finite(0)`.
    pub leg_times: Vec<Vec<ExtendedTime>>,
    /// Fresh occupied sites met on each leg, in order.
    pub visited_occupied: Vec<Vec<SitePoint>>,
    /// Largest `‖S_k‖₁` over every completed step of every leg.
    pub max_range: u64,
    pub censored: bool,
}

impl ChainTrace {
    /// `σ_I(ℓ, I_ℓ)` per leg; `None` for censored legs.
    pub fn leg_durations(&self) -> Vec<Option<u64>> {
        self.leg_times.iter().map(|t| t.last().and_then(|v| v.finite())).collect()
    }

    /// `Σ_ℓ σ_I(ℓ, I_ℓ)`, or `None` if any leg was censored.
    pub fn total_duration(&self) -> Option<u64> {
        if self.censored {
            return None;
        }
        self.leg_durations().into_iter().sum()
    }

    /// Steps actually walked, including the censored leg's budget.
    pub fn walked_steps(&self) -> u64 {
        self.leg_times
            .iter()
            .map(|t| match t.last() {
                Some(ExtendedTime::Finite(k)) | Some(ExtendedTime::Censored(k)) => *k,
                _ => 0,
            })
            .sum()
    }
}

/// Builds the chain induced by `spec` starting at the origin.
pub fn build_chain(oracle: &WalkOracle, config: &Configuration, spec: &ChainSpec, horizon: u64) -> ChainTrace {
    build_chain_from(oracle, config, &SitePoint::origin(oracle.dim()), spec, horizon)
}

/// Builds the chain induced by `spec` from an arbitrary start. Each leg may
/// take at most `horizon` steps before it is censored.
pub fn build_chain_from(
    oracle: &WalkOracle,
    config: &Configuration,
    start: &SitePoint,
    spec: &ChainSpec,
    horizon: u64,
) -> ChainTrace {
    let mut trace = ChainTrace {
        anchors: Vec::with_capacity(spec.legs()),
        leg_times: Vec::with_capacity(spec.legs()),
        visited_occupied: Vec::with_capacity(spec.legs()),
        max_range: start.l1(),
        censored: false,
    };
    let mut excluded: FxHashSet<SitePoint> = FxHashSet::default();
    let mut anchor = *start;
    for &target_count in spec.indices() {
        trace.anchors.push(anchor);
        let mut times = vec![ExtendedTime::Finite(0)];
        let mut fresh = Vec::new();
        let mut current: FxHashSet<SitePoint> = FxHashSet::default();
        current.insert(anchor);
        let mut walker = oracle.walker(&anchor);
        let mut last = anchor;
        while (fresh.len() as u64) < target_count && walker.steps() < horizon {
            let p = walker.advance();
            trace.max_range = trace.max_range.max(p.l1());
            if excluded.contains(&p) || !current.insert(p) {
                continue;
            }
            if config.is_occupied(&p) {
                fresh.push(p);
                times.push(ExtendedTime::Finite(walker.steps()));
                last = p;
            }
        }
        let done = fresh.len() as u64 == target_count;
        if !done {
            times.resize(target_count as usize + 1, ExtendedTime::Censored(horizon));
        }
        trace.leg_times.push(times);
        trace.visited_occupied.push(fresh);
        if !done {
            trace.censored = true;
            break;
        }
        excluded.extend(current);
        anchor = last;
    }
    trace
}

/// Recovers the index sequence behind a realised passage: `I_ℓ` counts the
/// occupied sites the `ℓ`-th leg meets, up to and including its endpoint, that
/// no earlier leg has visited.
///
/// The returned trace satisfies `Σ_ℓ σ_I(ℓ, I_ℓ) = T` whenever the realised
/// path is a minimising chain, as produced by both passage engines.
pub fn extract_minimizing_chain(
    p: &PassageResult,
    oracle: &WalkOracle,
    config: &Configuration,
) -> Result<(ChainSpec, ChainTrace)> {
    let total = p.value.finite().ok_or(FrogError::NotFinite)?;
    let path = &p.realized_path;
    if path.len() < 2 {
        return Err(FrogError::InvalidArgument("target must differ from source".into()));
    }
    let target = path[path.len() - 1];
    if !config.is_occupied(&target) {
        return Err(FrogError::InvalidArgument(format!("target {target:?} is not occupied")));
    }
    let mut excluded: FxHashSet<SitePoint> = FxHashSet::default();
    let mut indices = Vec::with_capacity(path.len() - 1);
    for (leg, pair) in path.windows(2).enumerate() {
        let (from, to) = (pair[0], pair[1]);
        let mut current: FxHashSet<SitePoint> = FxHashSet::default();
        current.insert(from);
        let mut count = 0;
        let mut walker = oracle.walker(&from);
        for _ in 0..p.per_leg_times[leg] {
            let q = walker.advance();
            if !excluded.contains(&q) && current.insert(q) && config.is_occupied(&q) {
                count += 1;
            }
        }
        if walker.position() != to {
            return Err(FrogError::InvalidArgument(format!("leg {leg} does not end at {to:?}")));
        }
        indices.push(count);
        excluded.extend(current);
    }
    let spec = ChainSpec::new(indices)?;
    let trace = build_chain_from(oracle, config, &path[0], &spec, total.max(1));
    Ok((spec, trace))
}

/// Monte Carlo plan for chain statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainPlan {
    pub dim: usize,
    pub r: f64,
    pub specs: Vec<ChainSpec>,
    pub trials: u64,
    pub master_seed: u64,
    /// Per-leg step budget.
    pub horizon: u64,
    /// Constant of the duration event `Σσ ≤ C·δ²·ΣI`.
    pub duration_constant: f64,
    /// Constant of the range event `max ‖S‖₁ ≥ C·δ·t` and `Σσ ≤ δ²·t`.
    pub range_constant: f64,
    pub range_time: f64,
}

/// One row of `chain_stats.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainRow {
    pub seed: u64,
    pub d: usize,
    pub r: f64,
    pub nu: usize,
    pub sum_i: u64,
    /// Total steps walked; only a duration when not censored.
    pub sum_sigma: u64,
    pub max_range: u64,
    pub censored: bool,
}

impl ChainRow {
    pub const HEADER: [&'static str; 8] = ["seed", "d", "r", "nu", "sum_I", "sum_sigma", "max_range", "censored"];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainStatistics {
    pub rows: Vec<ChainRow>,
    pub censor_rate: f64,
    /// Frequency of `Σσ ≤ C₁ δ² ΣI` among uncensored rows.
    pub duration_event: Proportion,
    /// Frequency of the range event among uncensored rows.
    pub range_event: Proportion,
}

const TAG_CHAIN: u64 = 0x4348_4149_4E00_0000;

/// Samples every spec of the plan `trials` times on independent realisations.
pub fn chain_statistics(plan: &ChainPlan) -> Result<ChainStatistics> {
    if plan.specs.is_empty() || plan.trials == 0 {
        return Err(FrogError::InvalidArgument("empty sampling plan".into()));
    }
    let dl = delta(plan.dim, plan.r)?;
    let jobs: Vec<(usize, u64)> =
        (0..plan.specs.len()).flat_map(|j| (0..plan.trials).map(move |i| (j, i))).collect();
    let rows = jobs
        .par_iter()
        .map(|&(j, i)| -> Result<ChainRow> {
            let spec = &plan.specs[j];
            let seed = derive_seed(plan.master_seed, TAG_CHAIN + j as u64, i);
            let oracle = WalkOracle::new(seed, plan.dim)?;
            let reach = plan.horizon.saturating_mul(spec.legs() as u64).saturating_add(1);
            let domain = BoxRegion::linf(SitePoint::origin(plan.dim), reach);
            let config = Configuration::bernoulli(seed, domain, plan.r)?;
            let trace = build_chain(&oracle, &config, spec, plan.horizon);
            Ok(ChainRow {
                seed,
                d: plan.dim,
                r: plan.r,
                nu: spec.legs(),
                sum_i: spec.total(),
                sum_sigma: trace.walked_steps(),
                max_range: trace.max_range,
                censored: trace.censored,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let done: Vec<&ChainRow> = rows.iter().filter(|r| !r.censored).collect();
    let n = done.len() as u64;
    let dur = done
        .iter()
        .filter(|r| r.sum_sigma as f64 <= plan.duration_constant * dl * dl * r.sum_i as f64)
        .count() as u64;
    let range = done
        .iter()
        .filter(|r| {
            r.max_range as f64 >= plan.range_constant * dl * plan.range_time
                && r.sum_sigma as f64 <= dl * dl * plan.range_time
        })
        .count() as u64;
    Ok(ChainStatistics {
        censor_rate: (rows.len() as u64 - n) as f64 / rows.len() as f64,
        duration_event: Proportion::new(dur, n),
        range_event: Proportion::new(range, n),
        rows,
    })
}

/// Empirical `P(σ ≥ t)` over uncensored rows of single-leg specs.
pub fn duration_tail(rows: &[ChainRow], t: u64) -> Proportion {
    let done: Vec<&ChainRow> = rows.iter().filter(|r| !r.censored).collect();
    Proportion::new(done.iter().filter(|r| r.sum_sigma >= t).count() as u64, done.len() as u64)
}

/// Compares total durations under `spec` with those under the single-leg
/// sequence `(ΣI)`; the two have the same law.
pub fn single_leg_cross_check(
    dim: usize,
    r: f64,
    spec: &ChainSpec,
    trials: u64,
    master_seed: u64,
    horizon: u64,
) -> Result<KsResult> {
    let merged = ChainSpec::new(vec![spec.total()])?;
    let plan = ChainPlan {
        dim,
        r,
        specs: vec![spec.clone(), merged],
        trials,
        master_seed,
        horizon,
        duration_constant: 1.0,
        range_constant: 1.0,
        range_time: 1.0,
    };
    let stats = chain_statistics(&plan)?;
    let (a, b): (Vec<&ChainRow>, Vec<&ChainRow>) = stats.rows.iter().partition(|row| row.nu == spec.legs());
    let sample = |rows: Vec<&ChainRow>| -> Vec<f64> {
        rows.into_iter().filter(|r| !r.censored).map(|r| r.sum_sigma as f64).collect()
    };
    Ok(ks_two_sample(&sample(a), &sample(b)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::passage_time;

    fn p(c: &[i64]) -> SitePoint {
        SitePoint::new(c)
    }

    #[test]
    fn spec_validation() {
        assert!(ChainSpec::new(vec![]).is_err());
        assert!(ChainSpec::new(vec![1, 0]).is_err());
        assert_eq!(ChainSpec::new(vec![2, 3]).unwrap().total(), 5);
    }

    #[test]
    fn lone_origin_is_censored() {
        let o = WalkOracle::new(1, 2).unwrap();
        let dom = BoxRegion::linf(SitePoint::origin(2), 50);
        let c = Configuration::explicit(dom, [SitePoint::origin(2)]);
        let t = build_chain(&o, &c, &ChainSpec::new(vec![1]).unwrap(), 300);
        assert!(t.censored);
        assert_eq!(t.leg_times[0], vec![ExtendedTime::Finite(0), ExtendedTime::Censored(300)]);
    }

    #[test]
    fn first_fresh_site_matches_replay() {
        let o = WalkOracle::new(42, 2).unwrap();
        let dom = BoxRegion::linf(SitePoint::origin(2), 100);
        let c = Configuration::bernoulli(42, dom, 0.5).unwrap();
        let t = build_chain(&o, &c, &ChainSpec::new(vec![1]).unwrap(), 1000);
        let mut k = 0;
        let mut seen = vec![SitePoint::origin(2)];
        let expect = loop {
            k += 1;
            let q = o.walk_position(&SitePoint::origin(2), k);
            if !seen.contains(&q) && c.is_occupied(&q) {
                break k;
            }
            seen.push(q);
        };
        assert_eq!(t.leg_times[0][1], ExtendedTime::Finite(expect));
    }

    #[test]
    fn anchors_chain_and_sigma_increases() {
        for seed in 0..30 {
            let o = WalkOracle::new(seed, 2).unwrap();
            let dom = BoxRegion::linf(SitePoint::origin(2), 500);
            let c = Configuration::bernoulli(seed, dom, 0.2).unwrap();
            let spec = ChainSpec::new(vec![3, 1, 4, 2]).unwrap();
            let t = build_chain(&o, &c, &spec, 5000);
            assert!(!t.censored);
            assert_eq!(t.anchors[0], SitePoint::origin(2));
            for l in 0..spec.legs() {
                let times: Vec<u64> = t.leg_times[l].iter().map(|v| v.finite().unwrap()).collect();
                assert!(times.windows(2).all(|w| w[0] < w[1]));
                if l + 1 < spec.legs() {
                    let next = o.walk_position(&t.anchors[l], *times.last().unwrap());
                    assert_eq!(t.anchors[l + 1], next);
                }
            }
            let all: Vec<SitePoint> = t.visited_occupied.iter().flatten().copied().collect();
            let unique: FxHashSet<SitePoint> = all.iter().copied().collect();
            assert_eq!(all.len(), unique.len(), "fresh site counted twice");
            let total = t.total_duration().unwrap();
            assert!(total >= spec.total());
            assert!(t.max_range <= total);
        }
    }

    #[test]
    fn extraction_reproduces_passage_value() {
        let mut checked = 0;
        for seed in 0..60 {
            let o = WalkOracle::new(seed, 2).unwrap();
            let dom = BoxRegion::linf(SitePoint::origin(2), 15);
            let c = Configuration::bernoulli(seed, dom, 0.3).unwrap().force_occupied(SitePoint::origin(2));
            let Some(y) = c.occupied_in(&BoxRegion::l1(p(&[3, 2]), 3)).find(|q| !q.is_origin()) else {
                continue;
            };
            let res = passage_time(&o, &c, &SitePoint::origin(2), &y, &dom, 20_000).unwrap();
            let Some(t) = res.value.finite() else { continue };
            let (spec, trace) = extract_minimizing_chain(&res, &o, &c).unwrap();
            assert_eq!(spec.legs(), res.realized_path.len() - 1);
            assert_eq!(trace.total_duration(), Some(t), "seed {seed}");
            checked += 1;
        }
        assert!(checked > 40);
    }

    #[test]
    fn extraction_rejects_bad_input() {
        let o = WalkOracle::new(1, 2).unwrap();
        let dom = BoxRegion::linf(SitePoint::origin(2), 5);
        let c = Configuration::explicit(dom, [SitePoint::origin(2)]);
        let cens = PassageResult {
            value: ExtendedTime::Censored(5),
            realized_path: vec![],
            per_leg_times: vec![],
        };
        assert_eq!(extract_minimizing_chain(&cens, &o, &c), Err(FrogError::NotFinite));
        let zero = PassageResult {
            value: ExtendedTime::Finite(0),
            realized_path: vec![SitePoint::origin(2)],
            per_leg_times: vec![0],
        };
        assert!(extract_minimizing_chain(&zero, &o, &c).is_err());
    }

    #[test]
    fn statistics_rows_are_consistent() {
        let plan = ChainPlan {
            dim: 2,
            r: 0.1,
            specs: vec![ChainSpec::new(vec![1]).unwrap(), ChainSpec::new(vec![2, 2]).unwrap()],
            trials: 100,
            master_seed: 9,
            horizon: 100_000,
            duration_constant: 2.0,
            range_constant: 0.5,
            range_time: 10.0,
        };
        let s = chain_statistics(&plan).unwrap();
        assert_eq!(s.rows.len(), 200);
        for r in s.rows.iter().filter(|r| !r.censored) {
            assert!(r.sum_sigma >= r.sum_i);
            assert!(r.max_range <= r.sum_sigma);
        }
        let again = chain_statistics(&plan).unwrap();
        assert_eq!(s, again);
        let tail = duration_tail(&s.rows[..100], 1);
        assert_eq!(tail.p_hat, 1.0);
    }

    #[test]
    fn chain_and_single_leg_agree_in_law() {
        let spec = ChainSpec::new(vec![2, 1, 2]).unwrap();
        let ks = single_leg_cross_check(2, 0.2, &spec, 600, 3, 100_000).unwrap();
        assert!(ks.p_value > 1e-3, "{ks:?}");
    }
}
