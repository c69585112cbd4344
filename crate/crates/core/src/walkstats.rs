//! Simple random walk toolbox: exact path enumeration and Monte Carlo checks
//! of range, hitting and covering estimates.

use std::collections::BTreeSet;

use rayon::prelude::*;
use rustc_hash::{FxHashMap, FxHashSet};
use serde::{Deserialize, Serialize};

use crate::error::{FrogError, Result};
use crate::estimator::phi;
use crate::lattice::{check_dim, BoxRegion, SitePoint};
use crate::randomness::{derive_seed, Configuration, KeyedStream, WalkOracle};
use crate::stats::{MeanSummary, Proportion};

/// Largest number of paths a single enumeration may visit.
pub const ENUMERATION_GUARD: u128 = 5_000_000;

/// An exact probability `numerator / denominator`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fraction {
    pub numerator: u128,
    pub denominator: u128,
}

impl Fraction {
    pub fn new(numerator: u128, denominator: u128) -> Self {
        Self { numerator, denominator }
    }

    pub fn value(&self) -> f64 {
        self.numerator as f64 / self.denominator as f64
    }
}

/// Histogram of `#(R_n^start ∩ Γ)` over all `(2d)^n` paths: `hist[c]` paths
/// visit exactly `c` distinct sites of `Γ`.
pub fn range_count_histogram(d: usize, n: u32, start: &SitePoint, gamma: &BTreeSet<SitePoint>) -> Result<Vec<u128>> {
    check_dim(d)?;
    let total = (2 * d as u128).checked_pow(n).unwrap_or(u128::MAX);
    if total > ENUMERATION_GUARD {
        return Err(FrogError::TooLarge(total));
    }
    if gamma.len() > 128 {
        return Err(FrogError::InvalidArgument("target set larger than 128 sites".into()));
    }
    let index: FxHashMap<SitePoint, u32> = gamma.iter().enumerate().map(|(i, s)| (*s, i as u32)).collect();
    let bit = |p: &SitePoint| index.get(p).map_or(0u128, |&i| 1u128 << i);
    let mut hist = vec![0u128; gamma.len() + 1];

    fn descend(
        pos: SitePoint,
        mask: u128,
        left: u32,
        d: usize,
        bit: &dyn Fn(&SitePoint) -> u128,
        hist: &mut [u128],
    ) {
        if left == 0 {
            hist[mask.count_ones() as usize] += 1;
            return;
        }
        for axis in 0..d {
            for positive in [true, false] {
                let mut next = pos;
                next.step(axis, positive);
                descend(next, mask | bit(&next), left - 1, d, bit, hist);
            }
        }
    }
    descend(*start, bit(start), n, d, &bit, &mut hist);
    Ok(hist)
}

/// Exact `P(H(0, z) ≤ n)` by enumeration.
pub fn exact_hitting_probability(d: usize, z: &SitePoint, n: u32) -> Result<Fraction> {
    let hist = range_count_histogram(d, n, &SitePoint::origin(d), &BTreeSet::from([*z]))?;
    Ok(Fraction::new(hist[1], hist.iter().sum()))
}

/// Exact audit of the Paley–Zygmund chain for `X = #(R_n^0 ∩ Γ)`:
///
/// * `P(X ≥ E X / 2) ≥ (E X)² / (4 E X²)` (Paley–Zygmund),
/// * `E X² ≤ 3 E X · sup_{x∈Γ} E #(R_n^x ∩ Γ)` (second moment bound),
/// * `P(X ≥ E X / 2) ≥ E X / (12 sup_{x∈Γ} E #(R_n^x ∩ Γ))` (combined).
///
/// All quantities are integer path counts over `N = (2d)^n`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnumerationReport {
    pub d: usize,
    pub n: u32,
    pub gamma: Vec<SitePoint>,
    pub paths: u128,
    /// `Σ_paths X`, so `E X = sum_count / paths`.
    pub sum_count: u128,
    /// `Σ_paths X²`.
    pub sum_square: u128,
    /// Paths with `X ≥ E X / 2`.
    pub above_half_mean: u128,
    /// `max_{x∈Γ} Σ_paths #(R_n^x ∩ Γ)`.
    pub sup_sum: u128,
    pub sup_start: SitePoint,
    pub pz_holds: bool,
    pub second_moment_holds: bool,
    pub goal_holds: bool,
}

impl EnumerationReport {
    pub fn mean(&self) -> Fraction {
        Fraction::new(self.sum_count, self.paths)
    }

    pub fn second_moment(&self) -> Fraction {
        Fraction::new(self.sum_square, self.paths)
    }

    pub fn probability_above_half_mean(&self) -> Fraction {
        Fraction::new(self.above_half_mean, self.paths)
    }

    /// `E X / (12 sup …)` as an exact fraction.
    pub fn goal_bound(&self) -> Fraction {
        Fraction::new(self.sum_count, 12 * self.sup_sum)
    }

    pub fn holds(&self) -> bool {
        self.pz_holds && self.second_moment_holds && self.goal_holds
    }
}

pub fn pz_exact_check(d: usize, n: u32, gamma: &BTreeSet<SitePoint>) -> Result<EnumerationReport> {
    if gamma.is_empty() {
        return Err(FrogError::InvalidArgument("target set must be nonempty".into()));
    }
    if gamma.iter().any(|g| g.dim() != d) {
        return Err(FrogError::InvalidArgument("target set dimension mismatch".into()));
    }
    let hist = range_count_histogram(d, n, &SitePoint::origin(d), gamma)?;
    let paths: u128 = hist.iter().sum();
    let sum_count: u128 = hist.iter().enumerate().map(|(c, h)| c as u128 * h).sum();
    let sum_square: u128 = hist.iter().enumerate().map(|(c, h)| (c * c) as u128 * h).sum();
    let above_half_mean: u128 =
        hist.iter().enumerate().filter(|(c, _)| 2 * *c as u128 * paths >= sum_count).map(|(_, h)| h).sum();
    let mut sup_sum = 0;
    let mut sup_start = *gamma.iter().next().expect("nonempty");
    for x in gamma {
        let h = range_count_histogram(d, n, x, gamma)?;
        let s: u128 = h.iter().enumerate().map(|(c, k)| c as u128 * k).sum();
        if s > sup_sum {
            sup_sum = s;
            sup_start = *x;
        }
    }
    let pz_holds = above_half_mean * 4 * sum_square >= sum_count * sum_count;
    let second_moment_holds = sum_square * paths <= 3 * sum_count * sup_sum;
    let goal_holds = above_half_mean * 12 * sup_sum >= sum_count * paths;
    Ok(EnumerationReport {
        d,
        n,
        gamma: gamma.iter().copied().collect(),
        paths,
        sum_count,
        sum_square,
        above_half_mean,
        sup_sum,
        sup_start,
        pz_holds,
        second_moment_holds,
        goal_holds,
    })
}

/// Every nonempty subset of `B_∞(0, 1) \ {0}` in `d` dimensions.
pub fn unit_box_subsets(d: usize) -> Result<Vec<BTreeSet<SitePoint>>> {
    let sites: Vec<SitePoint> =
        BoxRegion::linf(SitePoint::origin(d), 1).iter().filter(|p| !p.is_origin()).collect();
    if sites.len() > 20 {
        return Err(FrogError::TooLarge(1u128 << sites.len()));
    }
    Ok((1u32..(1 << sites.len()))
        .map(|mask| sites.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, s)| *s).collect())
        .collect())
}

const TAG_RANGE: u64 = 0x5241_4E47_0000_0000;
const TAG_HIT: u64 = 0x4849_5400_0000_0000;
const TAG_DEVIATION: u64 = 0x4445_5600_0000_0000;
const TAG_CKN: u64 = 0x434B_4E00_0000_0000;
const TAG_CHERNOFF: u64 = 0x4348_4552_0000_0000;

fn trial_oracle(master: u64, tag: u64, trial: u64, d: usize) -> Result<WalkOracle> {
    WalkOracle::new(derive_seed(master, tag, trial), d)
}

fn require_trials(trials: u64) -> Result<()> {
    if trials == 0 {
        return Err(FrogError::InvalidArgument("trials must be at least 1".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RangeRow {
    pub n: u64,
    pub trials: u64,
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub phi: f64,
    /// `mean / φ_d(n)`; undefined (NaN) where `φ_d(n)` is.
    pub ratio: f64,
}

/// Monte Carlo `E #R_n^0` at each `n`; one walk per trial serves every `n`.
pub fn range_growth(d: usize, n_list: &[u64], trials: u64, master_seed: u64) -> Result<Vec<RangeRow>> {
    require_trials(trials)?;
    check_dim(d)?;
    let max_n = n_list.iter().copied().max().unwrap_or(0);
    let mut sorted: Vec<u64> = n_list.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let per_trial: Vec<Vec<f64>> = (0..trials)
        .into_par_iter()
        .map(|i| -> Result<Vec<f64>> {
            let o = trial_oracle(master_seed, TAG_RANGE, i, d)?;
            let mut w = o.walker(&SitePoint::origin(d));
            let mut seen: FxHashSet<SitePoint> = FxHashSet::default();
            seen.reserve(max_n as usize + 1);
            seen.insert(SitePoint::origin(d));
            let mut sizes = Vec::with_capacity(sorted.len());
            let mut next = 0;
            while next < sorted.len() && sorted[next] == 0 {
                sizes.push(1.0);
                next += 1;
            }
            while next < sorted.len() {
                seen.insert(w.advance());
                while next < sorted.len() && sorted[next] == w.steps() {
                    sizes.push(seen.len() as f64);
                    next += 1;
                }
            }
            Ok(sizes)
        })
        .collect::<Result<_>>()?;
    Ok(n_list
        .iter()
        .map(|&n| {
            let k = sorted.binary_search(&n).expect("n present");
            let values: Vec<f64> = per_trial.iter().map(|v| v[k]).collect();
            let s = MeanSummary::of(&values);
            let ph = phi(d, n as f64).unwrap_or(f64::NAN);
            RangeRow { n, trials, mean: s.mean, ci_low: s.ci_low(), ci_high: s.ci_high(), phi: ph, ratio: s.mean / ph }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HittingEstimate {
    pub d: usize,
    pub z: SitePoint,
    pub n: u64,
    pub probability: Proportion,
    /// `p̂ · log(1 + ‖z‖₂)` for `d = 2`, `p̂ · ‖z‖₂^{d-2}` otherwise.
    pub implied_constant: f64,
    /// `n < ‖z‖₂²`, outside the regime of the lower bound.
    pub regime_warning: bool,
}

/// Monte Carlo `P(H(0, z) ≤ n)`.
pub fn hitting_probability(d: usize, z: &SitePoint, n: u64, trials: u64, master_seed: u64) -> Result<HittingEstimate> {
    require_trials(trials)?;
    check_dim(d)?;
    if z.dim() != d {
        return Err(FrogError::InvalidArgument("target dimension mismatch".into()));
    }
    let hits: u64 = if z.is_origin() {
        trials
    } else {
        (0..trials)
            .into_par_iter()
            .map(|i| -> Result<u64> {
                let o = trial_oracle(master_seed, TAG_HIT, i, d)?;
                let mut w = o.walker(&SitePoint::origin(d));
                for _ in 0..n {
                    let p = w.advance();
                    if p == *z {
                        return Ok(1);
                    }
                    // Too far to return in the remaining steps.
                    if p.l1_dist(z) > n - w.steps() {
                        return Ok(0);
                    }
                }
                Ok(0)
            })
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .sum()
    };
    let probability = Proportion::new(hits, trials);
    let norm = (z.l2_sq() as f64).sqrt();
    let implied_constant = if d == 2 {
        probability.p_hat * (1.0 + norm).ln()
    } else {
        probability.p_hat * norm.powi(d as i32 - 2)
    };
    Ok(HittingEstimate {
        d,
        z: *z,
        n,
        probability,
        implied_constant,
        regime_warning: (n as u128) < z.l2_sq() as u128,
    })
}

/// Frequency of `#(R_n^0 ∩ B_2(0, n^{1/2+β})) < n^{1-2β}`.
pub fn range_ball_deviation(d: usize, n: u64, beta: f64, trials: u64, master_seed: u64) -> Result<Proportion> {
    require_trials(trials)?;
    check_dim(d)?;
    if n < 2 {
        return Err(FrogError::InvalidArgument("range deviation needs n >= 2".into()));
    }
    if !(beta > 0.0 && beta <= 0.5) {
        return Err(FrogError::InvalidArgument(format!("beta {beta} outside (0, 1/2]")));
    }
    let radius_sq = (n as f64).powf(1.0 + 2.0 * beta);
    let threshold = (n as f64).powf(1.0 - 2.0 * beta);
    let events: u64 = (0..trials)
        .into_par_iter()
        .map(|i| -> Result<u64> {
            let o = trial_oracle(master_seed, TAG_DEVIATION, i, d)?;
            let mut w = o.walker(&SitePoint::origin(d));
            let mut seen: FxHashSet<SitePoint> = FxHashSet::default();
            seen.insert(SitePoint::origin(d));
            let mut inside = 1u64;
            for _ in 0..n {
                let p = w.advance();
                if seen.insert(p) && p.l2_sq() as f64 <= radius_sq {
                    inside += 1;
                }
            }
            Ok(u64::from((inside as f64) < threshold))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .sum();
    Ok(Proportion::new(events, trials))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CknParams {
    pub d: usize,
    pub n: u64,
    pub a: Vec<SitePoint>,
    pub b: Vec<SitePoint>,
    pub delta: f64,
    pub r: f64,
    pub c_ckn: f64,
    pub trials: u64,
    pub master_seed: u64,
}

/// Which branch of the covering argument each trial fell into.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CknDiagnostics {
    /// `τ < #A`: earlier walks already covered all but a `δ` fraction of `B`.
    pub early_saturation: Proportion,
    /// Mean of `Σ_i Y_i 1{τ ≥ i}`, where `Y_i` flags a walk meeting fewer than
    /// `c·φ_d(n)` still uncovered sites of `B`.
    pub mean_poor_walks: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CknReport {
    /// `min{c φ_d(n) #A, (1-δ) #B}`.
    pub threshold: f64,
    /// Frequency of `#(R_n^A ∩ B) < threshold`.
    pub covering_shortfall: Proportion,
    pub covering_bound: f64,
    /// Frequency of `#(R_n^A ∩ B ∩ O) < (r/2)·threshold`.
    pub occupied_shortfall: Proportion,
    pub occupied_bound: f64,
    /// Largest `c` on a grid of step 0.001 whose covering shortfall frequency
    /// stays below `exp(-c #A)`.
    pub admissible_c: f64,
    pub diagnostics: CknDiagnostics,
}

struct CknTrial {
    covered: u64,
    covered_occupied: u64,
    saturated_early: bool,
    poor_walks: u64,
}

/// Shortfall frequencies for walks of length `n` started from every site of
/// `A` covering the target set `B`.
pub fn ckn_event_frequency(p: &CknParams) -> Result<CknReport> {
    require_trials(p.trials)?;
    check_dim(p.d)?;
    if p.n < 2 {
        return Err(FrogError::InvalidArgument("n must be at least 2".into()));
    }
    if !(p.delta > 0.0 && p.delta < 1.0) || !(p.r > 0.0 && p.r <= 1.0) || !(p.c_ckn > 0.0 && p.c_ckn < 1.0) {
        return Err(FrogError::InvalidArgument("delta and c_ckn must lie in (0,1), r in (0,1]".into()));
    }
    let a: BTreeSet<SitePoint> = p.a.iter().copied().collect();
    let b: BTreeSet<SitePoint> = p.b.iter().copied().collect();
    if a.is_empty() || b.is_empty() || a.len() != p.a.len() || b.len() != p.b.len() {
        return Err(FrogError::InvalidArgument("A and B must be nonempty sets of distinct sites".into()));
    }
    if a.iter().chain(&b).any(|s| s.dim() != p.d) {
        return Err(FrogError::InvalidArgument("site dimension mismatch".into()));
    }
    if a.iter().any(|x| b.iter().any(|y| x.sub(y).l2_sq() > p.n)) {
        return Err(FrogError::InvalidArgument("some pair of A x B is farther apart than sqrt(n)".into()));
    }
    if (b.len() as f64) < p.delta * (p.n as f64).powf(p.d as f64 / 2.0) {
        return Err(FrogError::InvalidArgument(format!(
            "#B = {} is below delta * n^(d/2) = {}",
            b.len(),
            p.delta * (p.n as f64).powf(p.d as f64 / 2.0)
        )));
    }
    let ph = phi(p.d, p.n as f64)?;
    let ell = a.len() as f64;
    let min_term = |c: f64| (c * ph * ell).min((1.0 - p.delta) * b.len() as f64);
    let threshold = min_term(p.c_ckn);
    let reach = a.iter().chain(&b).map(|s| s.linf()).max().unwrap_or(0) + p.n;
    let domain = BoxRegion::linf(SitePoint::origin(p.d), reach);

    let trials: Vec<CknTrial> = (0..p.trials)
        .into_par_iter()
        .map(|i| -> Result<CknTrial> {
            let seed = derive_seed(p.master_seed, TAG_CKN, i);
            let o = WalkOracle::new(seed, p.d)?;
            let config = Configuration::bernoulli(seed, domain, p.r)?;
            let mut uncovered: BTreeSet<SitePoint> = b.clone();
            let mut tau: Option<usize> = None;
            let mut poor_walks = 0;
            for (idx, x) in a.iter().enumerate() {
                // `uncovered` is Γ_i for i = idx + 1.
                let i = idx + 1;
                if tau.is_none() && (uncovered.len() as f64) <= p.delta * b.len() as f64 {
                    tau = Some(i);
                }
                let before = uncovered.len();
                let mut w = o.walker(x);
                uncovered.remove(x);
                for _ in 0..p.n {
                    uncovered.remove(&w.advance());
                }
                let met = (before - uncovered.len()) as f64;
                if tau.is_none_or(|t| t >= i) && met < p.c_ckn * ph {
                    poor_walks += 1;
                }
            }
            let saturated_early = tau.is_some_and(|t| t < a.len());
            let covered_sites: Vec<&SitePoint> = b.iter().filter(|s| !uncovered.contains(s)).collect();
            Ok(CknTrial {
                covered: covered_sites.len() as u64,
                covered_occupied: covered_sites.iter().filter(|s| config.is_occupied(s)).count() as u64,
                saturated_early,
                poor_walks,
            })
        })
        .collect::<Result<_>>()?;

    let shortfall = trials.iter().filter(|t| (t.covered as f64) < threshold).count() as u64;
    let occ_threshold = p.r / 2.0 * threshold;
    let occ_shortfall = trials.iter().filter(|t| (t.covered_occupied as f64) < occ_threshold).count() as u64;
    let mut admissible_c = 0.0;
    for k in 1..1000 {
        let c = k as f64 / 1000.0;
        let th = min_term(c);
        let freq = trials.iter().filter(|t| (t.covered as f64) < th).count() as f64 / p.trials as f64;
        if freq <= (-c * ell).exp() {
            admissible_c = c;
        } else {
            break;
        }
    }
    let poor: Vec<f64> = trials.iter().map(|t| t.poor_walks as f64).collect();
    Ok(CknReport {
        threshold,
        covering_shortfall: Proportion::new(shortfall, p.trials),
        covering_bound: (-p.c_ckn * ell).exp(),
        occupied_shortfall: Proportion::new(occ_shortfall, p.trials),
        occupied_bound: (-p.c_ckn * ell).exp() + (-p.r / 8.0 * threshold).exp(),
        admissible_c,
        diagnostics: CknDiagnostics {
            early_saturation: Proportion::new(trials.iter().filter(|t| t.saturated_early).count() as u64, p.trials),
            mean_poor_walks: MeanSummary::of(&poor).mean,
        },
    })
}

/// Conditional success probabilities of an adapted 0/1 sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Schedule {
    /// Independent draws with probability `q`.
    Iid,
    /// `q` on odd steps and `q/2` on even steps.
    Alternating,
    /// `q` right after a success, `q/2` otherwise; depends on the past.
    Adversarial,
    /// Explicit per-step probabilities, cycled.
    Fixed(Vec<f64>),
}

impl Schedule {
    fn probability(&self, q: f64, step: usize, last: bool) -> f64 {
        match self {
            Schedule::Iid => q,
            Schedule::Alternating => {
                if step.is_multiple_of(2) {
                    q
                } else {
                    q / 2.0
                }
            }
            Schedule::Adversarial => {
                if last {
                    q
                } else {
                    q / 2.0
                }
            }
            Schedule::Fixed(v) => v[step % v.len()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChernoffReport {
    /// Frequency of `Σ X_i ≥ (1-c) n`.
    pub frequency: Proportion,
    pub bound: f64,
    /// The frequency does not exceed the bound.
    pub holds: bool,
}

/// Monte Carlo check of the upper tail bound for adapted Bernoulli sums with
/// conditional success probability at most `q`.
pub fn adapted_chernoff_check(
    q: f64,
    n: u64,
    c: f64,
    schedule: &Schedule,
    trials: u64,
    master_seed: u64,
) -> Result<ChernoffReport> {
    require_trials(trials)?;
    if !(0.0..=1.0).contains(&q) || !(c > 0.0 && c < 1.0) {
        return Err(FrogError::InvalidArgument("need q in [0,1] and c in (0,1)".into()));
    }
    if let Schedule::Fixed(v) = schedule {
        if v.is_empty() || v.iter().any(|&p| !(0.0..=q).contains(&p)) {
            return Err(FrogError::InvalidArgument(format!("schedule exceeds q = {q}")));
        }
    }
    let need = (1.0 - c) * n as f64;
    let hits: u64 = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut s = KeyedStream::new(derive_seed(master_seed, TAG_CHERNOFF, i));
            let mut last = false;
            let mut sum = 0u64;
            for step in 0..n as usize {
                last = s.bernoulli(schedule.probability(q, step, last));
                sum += u64::from(last);
            }
            u64::from(sum as f64 >= need)
        })
        .sum();
    let frequency = Proportion::new(hits, trials);
    let bound = (-c * n as f64).exp();
    Ok(ChernoffReport { holds: frequency.p_hat <= bound, frequency, bound })
}
