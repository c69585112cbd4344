//! Block renormalization: good sites, sowing and activating events, and the
//! directional recursion of active-frog clusters.
//!
//! All event logic takes its box sizes and time budgets from a
//! [`BoxGeometry`]. The physical geometry derives them from `(d, r, c)`; a
//! desk geometry decouples them from `r` so events can be evaluated on small
//! boxes.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rayon::prelude::*;
use rustc_hash::FxHashSet;
use serde::{Deserialize, Serialize};

use crate::dynamics::{FrontEngine, SweepObserver};
use crate::error::{FrogError, Result};
use crate::estimator::delta;
use crate::lattice::{check_dim, BoxRegion, BoxUnion, SitePoint};
use crate::randomness::{derive_seed, Configuration, WalkOracle};
use crate::stats::Proportion;

/// Real-valued constants determined by `(d, r, c)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RenormParams {
    pub d: usize,
    pub r: f64,
    /// Covering constant `c ∈ (0, 1)`; every budget below scales with it.
    pub c_ckn: f64,
    /// `1 / (12d)`.
    pub epsilon: f64,
    /// `410 d² / c`.
    pub rho: f64,
    /// `(50d)^{-d/2}`.
    pub delta_rec: f64,
    /// `2d δ_d(r)² / c`.
    pub psi: f64,
    /// `100d ⌈ψ⌉`.
    pub nu: u64,
    /// `121d ⌈r^{-(1+2ε)}⌉`.
    pub n_r: u64,
    /// `⌈r^{-d/2}⌉`.
    pub scale: u64,
}

impl RenormParams {
    pub fn new(d: usize, r: f64, c_ckn: f64) -> Result<Self> {
        check_dim(d)?;
        if !(c_ckn > 0.0 && c_ckn < 1.0) {
            return Err(FrogError::InvalidArgument(format!("c_ckn {c_ckn} outside (0, 1)")));
        }
        let dl = delta(d, r)?;
        let df = d as f64;
        let epsilon = 1.0 / (12.0 * df);
        let psi = 2.0 * df * dl * dl / c_ckn;
        Ok(Self {
            d,
            r,
            c_ckn,
            epsilon,
            rho: 410.0 * df * df / c_ckn,
            delta_rec: (50.0 * df).powf(-df / 2.0),
            psi,
            nu: 100 * d as u64 * psi.ceil() as u64,
            n_r: 121 * d as u64 * r.powf(-(1.0 + 2.0 * epsilon)).ceil() as u64,
            scale: r.powf(-df / 2.0).ceil() as u64,
        })
    }
}

/// Integer box radii, spacings and time budgets used by the events.
///
/// Real radii are floored, which keeps `B(c, ρ) ∩ Z^d` unchanged, and real
/// budgets are floored, which keeps `T ≤ budget` unchanged for integer `T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxGeometry {
    pub d: usize,
    pub r: f64,
    pub c_ckn: f64,
    /// Box sizes were set by hand rather than derived from `r`.
    pub override_mode: bool,
    /// Good-site block scale `R`.
    pub scale: u64,
    /// Radius of the central box of a block and of `Θ^in`.
    pub inner_radius: u64,
    /// Passage budget between neighbouring blocks.
    pub good_budget: u64,
    pub theta_spacing: u64,
    pub theta_radius: u64,
    pub theta_out_radius: u64,
    pub sowing_budget: u64,
    pub n_r: u64,
    pub lambda_radius: u64,
    pub v_radius: u64,
    pub w_budget: u64,
    pub hit_budget: u64,
    pub activation_budget: u64,
    pub q_half_width: u64,
    pub q_spacing: u64,
    pub nu: u64,
    pub sigma_threshold: f64,
    pub max_index: u64,
}

impl BoxGeometry {
    /// Geometry with every size derived from `(d, r, c)`.
    pub fn physical(p: &RenormParams) -> Self {
        let (d, r, eps) = (p.d as f64, p.r, p.epsilon);
        let s = r.powf(-(0.5 + eps));
        let dl = delta(p.d, r).expect("validated by RenormParams");
        let q_half = p.psi.sqrt().ceil() as u64;
        let cross = r.powf(-(d + 1.0) / 2.0);
        let target_index = r.powf(-d / 2.0) / p.psi.sqrt().max(f64::MIN_POSITIVE);
        Self {
            d: p.d,
            r,
            c_ckn: p.c_ckn,
            override_mode: false,
            scale: p.scale,
            inner_radius: s.floor() as u64,
            good_budget: (p.rho * r.powf(-d / 2.0) * dl).floor() as u64,
            theta_spacing: 7 * s.ceil() as u64,
            theta_radius: (2.0 * s).floor() as u64,
            theta_out_radius: (3.0 * s).floor() as u64,
            sowing_budget: r.powf(-(1.0 + 3.0 * eps)).floor() as u64,
            n_r: p.n_r,
            lambda_radius: r.powf(-(d + 1.0) / 4.0).floor() as u64,
            v_radius: r.powf(-((d - 1.0) / 4.0 - 2.0 * eps)).floor() as u64,
            w_budget: (2.0 * cross).floor() as u64,
            hit_budget: (4.0 * d * cross).floor() as u64,
            activation_budget: (5.0 * d * cross).floor() as u64,
            q_half_width: q_half,
            q_spacing: 3 * q_half,
            nu: p.nu,
            sigma_threshold: 2.0 * d / p.c_ckn * r.ln().abs(),
            max_index: (target_index.ceil() as u64).saturating_add(1).min(1 << 20),
        }
    }

    /// Small boxes of inner radius `s` with budgets chosen so that every
    /// implication premise holds; the density still enters the occupancy and
    /// the recursion threshold.
    pub fn desk(d: usize, r: f64, c_ckn: f64, s: u64) -> Result<Self> {
        check_dim(d)?;
        let dl = delta(d, r)?;
        if s == 0 {
            return Err(FrogError::InvalidArgument("desk box radius must be positive".into()));
        }
        // n_r / (Θ radius)² = 50, close to the physical ratio 121d/4 in d = 2.
        let n_r = 200 * s * s;
        let sowing = 2 * n_r;
        let lambda = 7 * s + 3 * s;
        let w_budget = 2 * sowing;
        let hit_budget = 4 * d as u64 * lambda * lambda;
        let scale = 4 * s;
        let g = Self {
            d,
            r,
            c_ckn,
            override_mode: true,
            scale,
            inner_radius: s,
            good_budget: (8.0 * scale as f64 * dl.max(1.0) * dl.max(1.0)).ceil() as u64,
            theta_spacing: 7 * s,
            theta_radius: 2 * s,
            theta_out_radius: 3 * s,
            sowing_budget: sowing,
            n_r,
            lambda_radius: lambda,
            v_radius: 1,
            w_budget,
            hit_budget,
            activation_budget: w_budget + hit_budget,
            q_half_width: s,
            q_spacing: 3 * s,
            nu: 8 * s * s,
            sigma_threshold: 2.0 * d as f64 / c_ckn * r.ln().abs(),
            max_index: 20,
        };
        g.validate()?;
        Ok(g)
    }

    /// Checks the nesting and disjointness the events rely on.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(FrogError::InvalidArgument(format!("inconsistent box geometry: {m}")));
        if self.inner_radius > self.theta_radius || self.theta_radius >= self.theta_out_radius {
            return bad("need inner <= theta < theta_out radius");
        }
        if self.theta_spacing <= 2 * self.theta_out_radius {
            return bad("outer annuli of neighbouring blocks overlap");
        }
        if self.theta_spacing <= self.theta_radius + self.inner_radius {
            return bad("neighbouring inner boxes meet the central block");
        }
        if self.inner_radius > self.scale {
            return bad("central box wider than the block scale");
        }
        if self.q_spacing <= 2 * self.q_half_width {
            return bad("recursion boxes overlap");
        }
        Ok(())
    }

    fn theta_center(&self, v: &SitePoint) -> SitePoint {
        v.scale(self.theta_spacing as i64)
    }

    pub fn theta_in(&self, v: &SitePoint) -> BoxRegion {
        BoxRegion::linf(self.theta_center(v), self.inner_radius)
    }

    pub fn theta(&self, v: &SitePoint) -> BoxRegion {
        BoxRegion::linf(self.theta_center(v), self.theta_radius)
    }

    /// Closed box of radius `theta_out_radius`; `Θ^out(v)` is this box minus [`Self::theta`].
    pub fn theta_out_hull(&self, v: &SitePoint) -> BoxRegion {
        BoxRegion::linf(self.theta_center(v), self.theta_out_radius)
    }

    pub fn in_theta_out(&self, v: &SitePoint, p: &SitePoint) -> bool {
        self.theta_out_hull(v).contains(p) && !self.theta(v).contains(p)
    }

    pub fn lambda(&self) -> BoxRegion {
        BoxRegion::linf(SitePoint::origin(self.d), self.lambda_radius)
    }

    pub fn v_set(&self) -> BoxRegion {
        BoxRegion::linf(SitePoint::origin(self.d), self.v_radius)
    }

    pub fn q_box(&self, xi: &SitePoint, i: u64) -> BoxRegion {
        BoxRegion::linf(xi.scale((self.q_spacing * i) as i64), self.q_half_width)
    }

    /// Lower bound on `#W_r(x)` used by the activating argument.
    pub fn w_target(&self) -> f64 {
        let (d, eps) = (self.d as f64, 1.0 / (12.0 * self.d as f64));
        self.r.powf(-d * ((d - 1.0) / 4.0 - 2.0 * eps))
    }
}

fn require_domain(config: &Configuration, needed: &BoxRegion) -> Result<()> {
    if needed.is_subset_of(config.domain()) {
        Ok(())
    } else {
        Err(FrogError::DomainTooSmall(format!(
            "need {needed:?} inside the sampled domain {:?}",
            config.domain()
        )))
    }
}

/// Records, for each target box, the first occupied site reached in it.
struct TargetHits<'a> {
    config: &'a Configuration,
    targets: Vec<BoxRegion>,
    hits: Vec<Option<(SitePoint, u64)>>,
    remaining: usize,
}

impl<'a> TargetHits<'a> {
    fn new(config: &'a Configuration, targets: Vec<BoxRegion>) -> Self {
        let n = targets.len();
        Self { config, targets, hits: vec![None; n], remaining: n }
    }

    fn record(&mut self, site: &SitePoint, time: u64) -> bool {
        for (i, b) in self.targets.iter().enumerate() {
            if self.hits[i].is_none() && b.contains(site) {
                self.hits[i] = Some((*site, time));
                self.remaining -= 1;
            }
        }
        self.remaining == 0
    }
}

impl SweepObserver for TargetHits<'_> {
    fn on_visit(&mut self, site: &SitePoint, time: u64, occupied: bool) -> bool {
        occupied && self.record(site, time)
    }

    fn on_exit(&mut self, site: &SitePoint, time: u64) -> bool {
        self.config.is_occupied(site) && self.record(site, time)
    }
}

/// Certificate that occupied `x` reached occupied `y` in the block of `u`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoodWitness {
    pub x: SitePoint,
    pub u: SitePoint,
    pub y: SitePoint,
    pub time: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoodReport {
    pub good: bool,
    pub has_occupied: bool,
    pub witnesses: Vec<GoodWitness>,
    /// First occupied `x` and neighbour `u` with no reachable `y`.
    pub failure: Option<(SitePoint, SitePoint)>,
}

/// Nearest neighbours `v ± e_i` in axis order.
fn nearest_neighbors(v: &SitePoint) -> Vec<SitePoint> {
    let mut out = Vec::with_capacity(2 * v.dim());
    for axis in 0..v.dim() {
        for positive in [true, false] {
            let mut u = *v;
            u.step(axis, positive);
            out.push(u);
        }
    }
    out
}

/// `v + {-1,0,1}^d \ {0}`, lexicographic.
fn star_neighbors(v: &SitePoint) -> Vec<SitePoint> {
    BoxRegion::linf(*v, 1).iter().filter(|u| u != v).collect()
}

/// Whether block `v` is good: its central box holds an occupied site, and
/// every occupied `x` there reaches, for every nearest neighbour `u`, some
/// occupied site of the central box of `u` within the passage budget while
/// relaying only through the block's double box `B_∞(Rv, 2R)`.
pub fn is_r_good(oracle: &WalkOracle, config: &Configuration, v: &SitePoint, g: &BoxGeometry) -> Result<GoodReport> {
    let scale = g.scale as i64;
    let center = v.scale(scale);
    let inner = BoxRegion::linf(center, g.inner_radius);
    let domain = BoxRegion::linf(center, 2 * g.scale);
    require_domain(config, &domain)?;
    let neighbors = nearest_neighbors(v);
    let targets: Vec<BoxRegion> = neighbors.iter().map(|u| BoxRegion::linf(u.scale(scale), g.inner_radius)).collect();
    for t in &targets {
        require_domain(config, t)?;
    }
    let occupied: Vec<SitePoint> = config.occupied_in(&inner).collect();
    let mut report = GoodReport { good: !occupied.is_empty(), has_occupied: !occupied.is_empty(), witnesses: vec![], failure: None };
    let engine = FrontEngine::new(oracle, config, &domain, g.good_budget);
    for x in occupied {
        let mut obs = TargetHits::new(config, targets.clone());
        engine.run(&x, None, &mut obs)?;
        for (u, hit) in neighbors.iter().zip(&obs.hits) {
            match hit {
                Some((y, time)) => report.witnesses.push(GoodWitness { x, u: *u, y: *y, time: *time }),
                None => {
                    report.good = false;
                    report.failure = Some((x, *u));
                    return Ok(report);
                }
            }
        }
    }
    Ok(report)
}

/// Length of the shortest nearest-neighbour path through good sites, or
/// `None` when there is none.
pub fn good_distance(good: &BTreeSet<SitePoint>, u: &SitePoint, v: &SitePoint) -> Option<u64> {
    if !good.contains(u) || !good.contains(v) {
        return None;
    }
    let mut dist: BTreeMap<SitePoint, u64> = BTreeMap::from([(*u, 0)]);
    let mut queue = VecDeque::from([*u]);
    while let Some(p) = queue.pop_front() {
        let dp = dist[&p];
        if p == *v {
            return Some(dp);
        }
        for q in nearest_neighbors(&p) {
            if good.contains(&q) && !dist.contains_key(&q) {
                dist.insert(q, dp + 1);
                queue.push_back(q);
            }
        }
    }
    None
}

/// Whether every occupied `x ∈ Θ^in(v)` reaches, within the sowing budget and
/// relaying only inside `Θ(v)`, an occupied site of `Θ^in(u)` for each star
/// neighbour `u` and an occupied site of `Θ^out(v)`. Requires at least one
/// occupied site in `Θ^in(v)`.
pub fn sowing_event(oracle: &WalkOracle, config: &Configuration, v: &SitePoint, g: &BoxGeometry) -> Result<bool> {
    let center = g.theta_center(v);
    require_domain(config, &BoxRegion::linf(center, g.theta_spacing + g.inner_radius))?;
    let theta = g.theta(v);
    let mut targets: Vec<BoxRegion> = star_neighbors(v).iter().map(|u| g.theta_in(u)).collect();
    // Exits that land in the hull are in Θ^out, since Θ(v) is the domain.
    targets.push(g.theta_out_hull(v));
    let occupied: Vec<SitePoint> = config.occupied_in(&g.theta_in(v)).collect();
    if occupied.is_empty() {
        return Ok(false);
    }
    let engine = FrontEngine::new(oracle, config, &theta, g.sowing_budget);
    for x in occupied {
        let mut obs = TargetHits::new(config, targets.clone());
        engine.run(&x, None, &mut obs)?;
        if obs.remaining > 0 {
            return Ok(false);
        }
    }
    Ok(true)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SowingReport {
    pub s1: bool,
    pub s2: bool,
    pub s3: bool,
    pub sowing: bool,
    /// `2 n_r ≤ sowing budget`.
    pub premise: bool,
    /// `premise ∧ s1 ∧ s2 ∧ s3 ⇒ sowing`.
    pub implication_holds: bool,
}

/// Sowing event at the origin with its three sufficient sub-events:
///
/// * `S1`: `Θ^in(0)` holds an occupied site;
/// * `S2`: for every `x ∈ Θ^in(0)` and star neighbour `u`, walks of length
///   `n_r` from `G(x)` meet an occupied site of `Θ^in(u)`;
/// * `S3`: the same walks meet an occupied site of `Θ^out(0)`;
///
/// where `G(x)` is the set of occupied sites of `Θ(0)` other than `x` met by
/// the first `n_r` steps of `S^x`.
pub fn sowing_report(oracle: &WalkOracle, config: &Configuration, g: &BoxGeometry) -> Result<SowingReport> {
    let origin = SitePoint::origin(g.d);
    let sowing = sowing_event(oracle, config, &origin, g)?;
    let theta = g.theta(&origin);
    let theta_in = g.theta_in(&origin);
    let s1 = config.occupied_in(&theta_in).next().is_some();

    let mut targets: Vec<BoxRegion> = star_neighbors(&origin).iter().map(|u| g.theta_in(u)).collect();
    let out_index = targets.len();
    targets.push(g.theta_out_hull(&origin));
    let in_target = |p: &SitePoint, i: usize| {
        if i == out_index {
            g.in_theta_out(&origin, p)
        } else {
            targets[i].contains(p)
        }
    };
    // Which targets each occupied z ∈ Θ(0) reaches within n_r steps.
    let reach: BTreeMap<SitePoint, Vec<bool>> = config
        .occupied_in(&theta)
        .map(|z| {
            let mut hit = vec![false; targets.len()];
            let mut w = oracle.walker(&z);
            for _ in 0..g.n_r {
                let p = w.advance();
                if config.is_occupied(&p) {
                    for (i, h) in hit.iter_mut().enumerate() {
                        if !*h && in_target(&p, i) {
                            *h = true;
                        }
                    }
                }
            }
            (z, hit)
        })
        .collect();

    let (mut s2, mut s3) = (true, true);
    for x in theta_in.iter() {
        let mut covered = vec![false; targets.len()];
        let mut seen: FxHashSet<SitePoint> = FxHashSet::default();
        let mut w = oracle.walker(&x);
        for _ in 0..g.n_r {
            let z = w.advance();
            if z == x || !seen.insert(z) {
                continue;
            }
            if let Some(hit) = reach.get(&z) {
                for (c, h) in covered.iter_mut().zip(hit) {
                    *c |= *h;
                }
            }
        }
        s2 &= covered[..out_index].iter().all(|&c| c);
        s3 &= covered[out_index];
        if !s2 && !s3 {
            break;
        }
    }
    let premise = 2 * g.n_r <= g.sowing_budget;
    Ok(SowingReport { s1, s2, s3, sowing, premise, implication_holds: !(premise && s1 && s2 && s3) || sowing })
}

/// Activation times of `Λ` and the seed sets `W(x)`, with the audits of the
/// two activating implications.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActivatingReport {
    pub has_occupied: bool,
    /// Every occupied `x ∈ Θ^in(0)` activates all of `Λ` within the budget.
    pub activating: bool,
    /// Sowing holds in every block of `V`.
    pub a1: bool,
    /// For every occupied `x ∈ Θ^in(0)`, walks from `W(x)` hit every site of
    /// `Λ` within the hitting budget.
    pub a2: bool,
    /// `#W(x)` per occupied `x ∈ Θ^in(0)`.
    pub w_sizes: Vec<(SitePoint, u64)>,
    pub v_count: u64,
    /// `∪ Θ^out(v) ⊆ Λ` and `(v_radius + 1) · sowing ≤ w_budget`.
    pub w_premise: bool,
    /// `w_premise ∧ a1 ⇒ #W(x) ≥ #V` for every occupied `x`.
    pub w_lemma_holds: bool,
    /// `∪ Θ^out(v) ⊆ Λ` and `w_budget + hit_budget ≤ activation budget`.
    pub premise: bool,
    /// `premise ∧ a1 ∧ a2 ⇒ activating`.
    pub implication_holds: bool,
}

/// Seeds `W(x)`: occupied sites of `∪_{v∈V} Θ^out(v)` reached within the
/// seeding budget while relaying only through `∪_{v∈V} Θ(v)`.
struct SeedCollector<'a> {
    config: &'a Configuration,
    g: &'a BoxGeometry,
    blocks: Vec<SitePoint>,
    seeds: BTreeSet<SitePoint>,
}

impl SweepObserver for SeedCollector<'_> {
    fn on_visit(&mut self, _: &SitePoint, _: u64, _: bool) -> bool {
        false
    }

    fn on_exit(&mut self, site: &SitePoint, _: u64) -> bool {
        if !self.seeds.contains(site)
            && self.config.is_occupied(site)
            && self.blocks.iter().any(|v| self.g.theta_out_hull(v).contains(site))
        {
            self.seeds.insert(*site);
        }
        false
    }
}

/// Counts first visits so a sweep can stop when the domain is covered.
struct Cover {
    remaining: u64,
}

impl SweepObserver for Cover {
    fn on_visit(&mut self, _: &SitePoint, _: u64, _: bool) -> bool {
        self.remaining -= 1;
        self.remaining == 0
    }
}

pub fn activating_event(oracle: &WalkOracle, config: &Configuration, g: &BoxGeometry) -> Result<ActivatingReport> {
    let origin = SitePoint::origin(g.d);
    let lambda = g.lambda();
    let blocks: Vec<SitePoint> = g.v_set().iter().collect();
    let hull_extent = g.v_radius * g.theta_spacing + g.theta_spacing + g.inner_radius;
    require_domain(config, &lambda)?;
    require_domain(config, &BoxRegion::linf(origin, hull_extent))?;

    let occupied: Vec<SitePoint> = config.occupied_in(&g.theta_in(&origin)).collect();
    let has_occupied = !occupied.is_empty();

    // A_r: every occupied x activates every site of Λ within the budget.
    let mut activating = has_occupied;
    let engine = FrontEngine::new(oracle, config, &lambda, g.activation_budget).tracking_all_sites();
    for x in &occupied {
        let mut cover = Cover { remaining: lambda.cardinality() };
        engine.run(x, None, &mut cover)?;
        if cover.remaining > 0 {
            activating = false;
            break;
        }
    }

    let mut a1 = true;
    for v in &blocks {
        if !sowing_event(oracle, config, v, g)? {
            a1 = false;
            break;
        }
    }

    let union = BoxUnion::new(blocks.iter().map(|v| g.theta(v)).collect());
    let seed_engine = FrontEngine::new(oracle, config, &union, g.w_budget);
    let lambda_sites: Vec<SitePoint> = lambda.iter().collect();
    let mut w_sizes = Vec::with_capacity(occupied.len());
    let mut a2 = true;
    for x in &occupied {
        let mut collector = SeedCollector { config, g, blocks: blocks.clone(), seeds: BTreeSet::new() };
        seed_engine.run(x, None, &mut collector)?;
        w_sizes.push((*x, collector.seeds.len() as u64));
        if a2 && !covers_by_hitting(oracle, &collector.seeds, &lambda, &lambda_sites, g.hit_budget) {
            a2 = false;
        }
    }

    let outs_inside = blocks.iter().all(|v| g.theta_out_hull(v).is_subset_of(&lambda));
    let v_count = blocks.len() as u64;
    let w_premise = outs_inside && (g.v_radius + 1) * g.sowing_budget <= g.w_budget;
    let w_lemma_holds = !(w_premise && a1) || w_sizes.iter().all(|&(_, n)| n >= v_count);
    let premise = outs_inside && g.w_budget + g.hit_budget <= g.activation_budget;
    Ok(ActivatingReport {
        has_occupied,
        activating,
        a1,
        a2,
        w_sizes,
        v_count,
        w_premise,
        w_lemma_holds,
        premise,
        implication_holds: !(premise && a1 && a2) || activating,
    })
}

/// Whether walks from `seeds` jointly hit every site of `region` within
/// `budget` steps (a site hit at time zero counts).
fn covers_by_hitting(
    oracle: &WalkOracle,
    seeds: &BTreeSet<SitePoint>,
    region: &BoxRegion,
    sites: &[SitePoint],
    budget: u64,
) -> bool {
    let mut uncovered: FxHashSet<SitePoint> = sites.iter().copied().collect();
    for w in seeds {
        uncovered.remove(w);
        let mut walker = oracle.walker(w);
        for _ in 0..budget {
            if uncovered.is_empty() {
                return true;
            }
            let p = walker.advance();
            if region.contains(&p) {
                uncovered.remove(&p);
            }
        }
    }
    uncovered.is_empty()
}

/// How the directional recursion ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RecursionOutcome {
    /// First index whose cluster fell below the threshold.
    Failed(u64),
    MaxIndexReached,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecursionState {
    pub xi: SitePoint,
    /// `#Γ_i` for `i = 0, 1, …` up to the stopping index.
    pub gamma_sizes: Vec<u64>,
    pub outcome: RecursionOutcome,
}

/// Propagates clusters of active frogs along `ξ`: `Γ_0` is the occupied part
/// of box `Q_0`, and `Γ_i` the occupied sites of `Q_i` met by walks of length
/// `ν` from `Γ_{i-1}`. Stops at the first `i` with `#Γ_i` below the threshold.
pub fn run_recursion(oracle: &WalkOracle, config: &Configuration, xi: &SitePoint, g: &BoxGeometry) -> Result<RecursionState> {
    if xi.dim() != g.d || xi.l1() != 1 {
        return Err(FrogError::InvalidArgument(format!("{xi:?} is not a unit direction")));
    }
    let far = g.q_box(xi, g.max_index);
    require_domain(config, &BoxRegion::linf(SitePoint::origin(g.d), far.center.linf() + g.q_half_width))?;
    let mut gamma: Vec<SitePoint> = config.occupied_in(&g.q_box(xi, 0)).collect();
    let mut sizes = vec![gamma.len() as u64];
    if (gamma.len() as f64) < g.sigma_threshold {
        return Ok(RecursionState { xi: *xi, gamma_sizes: sizes, outcome: RecursionOutcome::Failed(0) });
    }
    for i in 1..=g.max_index {
        let q = g.q_box(xi, i);
        let mut next: BTreeSet<SitePoint> = BTreeSet::new();
        for z in &gamma {
            let mut w = oracle.walker(z);
            for _ in 0..g.nu {
                let p = w.advance();
                if q.contains(&p) && config.is_occupied(&p) {
                    next.insert(p);
                }
            }
        }
        sizes.push(next.len() as u64);
        if (next.len() as f64) < g.sigma_threshold {
            return Ok(RecursionState { xi: *xi, gamma_sizes: sizes, outcome: RecursionOutcome::Failed(i) });
        }
        gamma = next.into_iter().collect();
    }
    Ok(RecursionState { xi: *xi, gamma_sizes: sizes, outcome: RecursionOutcome::MaxIndexReached })
}

/// One row of `good_prob.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoodProbRow {
    pub d: usize,
    pub r: f64,
    pub c_ckn: f64,
    pub override_mode: bool,
    pub trials: u64,
    pub p_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl GoodProbRow {
    pub const HEADER: [&'static str; 8] = ["d", "r", "c_ckn", "override_mode", "trials", "p_hat", "ci_low", "ci_high"];
}

/// One row of `recursion.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecursionRow {
    pub d: usize,
    pub r: f64,
    pub xi: String,
    pub seed: u64,
    pub sigma_index: u64,
    /// The recursion reached its maximum index without failing.
    pub censored: bool,
}

impl RecursionRow {
    pub const HEADER: [&'static str; 6] = ["d", "r", "xi", "seed", "sigma_index", "censored"];
}

const TAG_GOOD: u64 = 0x474F_4F44_0000_0000;
const TAG_RECURSION: u64 = 0x5245_4355_0000_0000;

/// Sampled configuration large enough for every event at the origin.
pub fn event_configuration(seed: u64, g: &BoxGeometry) -> Result<Configuration> {
    let extent = [
        3 * g.scale,
        (g.v_radius + 1) * g.theta_spacing + g.theta_out_radius,
        g.lambda_radius,
        g.q_spacing.saturating_mul(g.max_index) + g.q_half_width,
    ]
    .into_iter()
    .max()
    .unwrap_or(1);
    Configuration::bernoulli(seed, BoxRegion::linf(SitePoint::origin(g.d), extent), g.r)
}

/// Empirical probability that the origin block is good, for each geometry.
pub fn estimate_good_probability(geometries: &[BoxGeometry], trials: u64, master_seed: u64) -> Result<Vec<GoodProbRow>> {
    if trials == 0 {
        return Err(FrogError::InvalidArgument("trials must be at least 1".into()));
    }
    geometries
        .iter()
        .map(|g| {
            let good = (0..trials)
                .into_par_iter()
                .map(|i| -> Result<u64> {
                    let seed = derive_seed(master_seed, TAG_GOOD, i);
                    let oracle = WalkOracle::new(seed, g.d)?;
                    let config = event_configuration(seed, g)?;
                    Ok(u64::from(is_r_good(&oracle, &config, &SitePoint::origin(g.d), g)?.good))
                })
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .sum();
            let p = Proportion::new(good, trials);
            Ok(GoodProbRow {
                d: g.d,
                r: g.r,
                c_ckn: g.c_ckn,
                override_mode: g.override_mode,
                trials,
                p_hat: p.p_hat,
                ci_low: p.ci_low,
                ci_high: p.ci_high,
            })
        })
        .collect()
}

/// Runs the recursion along `xi` on independent realisations.
pub fn recursion_batch(g: &BoxGeometry, xi: &SitePoint, trials: u64, master_seed: u64) -> Result<Vec<RecursionRow>> {
    (0..trials)
        .into_par_iter()
        .map(|i| {
            let seed = derive_seed(master_seed, TAG_RECURSION, i);
            let oracle = WalkOracle::new(seed, g.d)?;
            let config = event_configuration(seed, g)?;
            let state = run_recursion(&oracle, &config, xi, g)?;
            let (sigma_index, censored) = match state.outcome {
                RecursionOutcome::Failed(i) => (i, false),
                RecursionOutcome::MaxIndexReached => (g.max_index, true),
            };
            Ok(RecursionRow { d: g.d, r: g.r, xi: xi.to_string(), seed, sigma_index, censored })
        })
        .collect()
}

/// One row of `events.csv`: the sowing and activating audits on one realisation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventRow {
    pub seed: u64,
    pub sowing: SowingReport,
    pub activating: ActivatingReport,
}

impl EventRow {
    pub const HEADER: [&'static str; 15] = [
        "seed",
        "s1",
        "s2",
        "s3",
        "sowing",
        "sowing_premise",
        "sowing_implication",
        "a1",
        "a2",
        "activating",
        "activating_premise",
        "activating_implication",
        "w_premise",
        "w_lemma",
        "min_w",
    ];

    pub fn record(&self) -> Vec<String> {
        let (s, a) = (&self.sowing, &self.activating);
        let min_w = a.w_sizes.iter().map(|&(_, n)| n).min().map_or(String::new(), |n| n.to_string());
        let mut out = vec![self.seed.to_string()];
        out.extend(
            [
                s.s1,
                s.s2,
                s.s3,
                s.sowing,
                s.premise,
                s.implication_holds,
                a.a1,
                a.a2,
                a.activating,
                a.premise,
                a.implication_holds,
                a.w_premise,
                a.w_lemma_holds,
            ]
            .map(|b| b.to_string()),
        );
        out.push(min_w);
        out
    }
}

const TAG_EVENTS: u64 = 0x4556_454E_5400_0000;

/// Sowing and activating audits at the origin on independent realisations.
pub fn event_audit(g: &BoxGeometry, trials: u64, master_seed: u64) -> Result<Vec<EventRow>> {
    (0..trials)
        .into_par_iter()
        .map(|i| {
            let seed = derive_seed(master_seed, TAG_EVENTS, i);
            let oracle = WalkOracle::new(seed, g.d)?;
            let config = event_configuration(seed, g)?;
            Ok(EventRow {
                seed,
                sowing: sowing_report(&oracle, &config, g)?,
                activating: activating_event(&oracle, &config, g)?,
            })
        })
        .collect()
}
