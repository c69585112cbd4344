//! Hitting times, restricted first passage times and activation fronts.
//!
//! Two independent engines compute `T_A(x, y)`:
//!
//! * [`passage_time`] runs Dijkstra on the graph whose vertices are the occupied
//!   sites of `A` (plus `x` and `y`), with edge weights `τ(u, v)` obtained by
//!   replaying `S^u` once per settled vertex.
//! * [`FrontEngine`] simulates the frog model itself: every active frog steps
//!   once per unit of time and wakes the sleeping frogs it lands on. The first
//!   visit time of a site is then `T_A(source, site)`.
//!
//! Both report `Finite(t)` only when `t ≤ H`, so finite values are exact.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use std::fmt;

use rustc_hash::{FxHashMap, FxHashSet};
use serde::{Deserialize, Serialize};

use crate::error::{FrogError, Result};
use crate::lattice::{BoxRegion, SitePoint, SiteSet};
use crate::randomness::{Configuration, WalkOracle, Walker};

/// A time that may be unbounded or cut off by a simulation horizon.
/// Ordering: every `Finite` < every `Censored` < `Infinite`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ExtendedTime {
    Finite(u64),
    /// The value exceeds the horizon `H`.
    Censored(u64),
    Infinite,
}

impl ExtendedTime {
    pub fn finite(&self) -> Option<u64> {
        match self {
            ExtendedTime::Finite(t) => Some(*t),
            _ => None,
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, ExtendedTime::Finite(_))
    }

    /// True for `Finite(k)` with `k ≤ t`.
    pub fn within(&self, t: u64) -> bool {
        matches!(self, ExtendedTime::Finite(k) if *k <= t)
    }
}

impl fmt::Display for ExtendedTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtendedTime::Finite(t) => write!(f, "{t}"),
            ExtendedTime::Censored(_) => write!(f, "CENSORED"),
            ExtendedTime::Infinite => write!(f, "INF"),
        }
    }
}

/// Outcome of a passage-time query together with a chain realising it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PassageResult {
    pub value: ExtendedTime,
    /// `x_0 = x, x_1, …, x_m = y`; empty unless `value` is finite.
    pub realized_path: Vec<SitePoint>,
    /// `τ(x_{i}, x_{i+1})` for each leg.
    pub per_leg_times: Vec<u64>,
}

impl PassageResult {
    fn without_path(value: ExtendedTime) -> Self {
        Self { value, realized_path: Vec::new(), per_leg_times: Vec::new() }
    }
}

/// Default horizon `50 · ‖y − x‖₁² · δ²`, with `δ` floored at one so dense
/// configurations (where `δ_2(1) = 0`) still get a usable budget.
pub fn default_horizon(l1_distance: u64, delta: f64) -> u64 {
    let dist = l1_distance.max(1) as f64;
    (50.0 * dist * dist * delta.max(1.0).powi(2)).ceil() as u64
}

/// Hitting time `τ(u, v)`: `Infinite` when `u` is vacant, otherwise the least
/// `k ≤ H` with `S^u_k = v`, or `Censored(H)`.
pub fn tau(oracle: &WalkOracle, config: &Configuration, u: &SitePoint, v: &SitePoint, horizon: u64) -> ExtendedTime {
    if !config.is_occupied(u) {
        return ExtendedTime::Infinite;
    }
    if u == v {
        return ExtendedTime::Finite(0);
    }
    let mut w = oracle.walker(u);
    for _ in 0..horizon {
        if w.advance() == *v {
            return ExtendedTime::Finite(w.steps());
        }
    }
    ExtendedTime::Censored(horizon)
}

/// Restricted first passage time `T_A(x, y)` by Dijkstra over occupied sites.
///
/// Intermediate chain sites are confined to `domain`; the target may lie
/// anywhere. `Censored(H)` means `T_A(x, y) > H`.
pub fn passage_time<D: SiteSet + ?Sized>(
    oracle: &WalkOracle,
    config: &Configuration,
    x: &SitePoint,
    y: &SitePoint,
    domain: &D,
    horizon: u64,
) -> Result<PassageResult> {
    if !domain.contains(x) {
        return Err(FrogError::OutsideDomain(*x));
    }
    if !config.is_occupied(x) {
        return Ok(PassageResult::without_path(ExtendedTime::Infinite));
    }
    if x == y {
        return Ok(PassageResult { value: ExtendedTime::Finite(0), realized_path: vec![*x], per_leg_times: vec![0] });
    }

    let mut dist: FxHashMap<SitePoint, u64> = FxHashMap::default();
    let mut parent: FxHashMap<SitePoint, (SitePoint, u64)> = FxHashMap::default();
    let mut settled: FxHashSet<SitePoint> = FxHashSet::default();
    let mut heap = BinaryHeap::new();
    dist.insert(*x, 0);
    heap.push(Reverse((0u64, *x)));

    let mut seen = FxHashSet::default();
    while let Some(Reverse((du, u))) = heap.pop() {
        if !settled.insert(u) {
            continue;
        }
        if u == *y {
            let (path, legs) = unwind(&parent, x, y);
            return Ok(PassageResult { value: ExtendedTime::Finite(du), realized_path: path, per_leg_times: legs });
        }
        // One replay of S^u serves every outgoing edge of u.
        seen.clear();
        seen.insert(u);
        let mut w = oracle.walker(&u);
        for _ in 0..horizon - du {
            let p = w.advance();
            if !seen.insert(p) {
                continue;
            }
            let eligible = p == *y || (domain.contains(&p) && config.is_occupied(&p));
            if !eligible || settled.contains(&p) {
                continue;
            }
            let cand = du + w.steps();
            if dist.get(&p).is_none_or(|&cur| cand < cur) {
                dist.insert(p, cand);
                parent.insert(p, (u, w.steps()));
                heap.push(Reverse((cand, p)));
            }
        }
    }
    Ok(PassageResult::without_path(ExtendedTime::Censored(horizon)))
}

fn unwind(parent: &FxHashMap<SitePoint, (SitePoint, u64)>, x: &SitePoint, y: &SitePoint) -> (Vec<SitePoint>, Vec<u64>) {
    let mut path = vec![*y];
    let mut legs = Vec::new();
    let mut cur = *y;
    while cur != *x {
        let (p, leg) = parent[&cur];
        legs.push(leg);
        path.push(p);
        cur = p;
    }
    path.reverse();
    legs.reverse();
    (path, legs)
}

/// Wake-up record of one frog in a front simulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Activation {
    pub site: SitePoint,
    pub time: u64,
    /// Index of the frog that woke this one; `None` for the source frog.
    pub parent: Option<u32>,
    /// Steps the parent walked to get here, `τ(parent, site)`.
    pub leg: u64,
}

/// Callback for first visits during a front simulation.
pub trait SweepObserver {
    /// Called once per site on its first visit, for occupied sites of the
    /// domain and, when all sites are tracked, for every site of the domain.
    /// Returning `true` stops the simulation after the current time step.
    fn on_visit(&mut self, site: &SitePoint, time: u64, occupied: bool) -> bool;

    /// Called every time an active frog stands on a site outside the domain.
    /// Such sites can still end a chain, so `T_A(source, site) ≤ time`.
    fn on_exit(&mut self, _site: &SitePoint, _time: u64) -> bool {
        false
    }
}

/// Observer that never stops the run.
pub struct NoObserver;

impl SweepObserver for NoObserver {
    fn on_visit(&mut self, _: &SitePoint, _: u64, _: bool) -> bool {
        false
    }
}

/// First hit of the designated target.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TargetHit {
    pub time: u64,
    pub frog: u32,
    pub leg: u64,
}

/// Result of a front simulation.
#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub source: SitePoint,
    pub horizon: u64,
    /// Frogs in activation order; index 0 is the source frog.
    pub activations: Vec<Activation>,
    pub frog_at: FxHashMap<SitePoint, u32>,
    /// First visit times of all domain sites, when tracked.
    pub visits: Option<FxHashMap<SitePoint, u64>>,
    pub target_hit: Option<TargetHit>,
    /// Last simulated time step.
    pub final_time: u64,
    /// Some active frog stepped outside the domain.
    pub left_domain: bool,
    pub source_occupied: bool,
}

impl SweepOutcome {
    /// Realised chain `(path, legs)` ending at the frog with index `frog`.
    pub fn chain_to_frog(&self, frog: u32) -> (Vec<SitePoint>, Vec<u64>) {
        let mut path = Vec::new();
        let mut legs = Vec::new();
        let mut cur = Some(frog);
        while let Some(i) = cur {
            let a = &self.activations[i as usize];
            path.push(a.site);
            if a.parent.is_some() {
                legs.push(a.leg);
            }
            cur = a.parent;
        }
        path.reverse();
        legs.reverse();
        (path, legs)
    }

    /// Passage result for the designated target of the run.
    pub fn target_result(&self, target: &SitePoint) -> PassageResult {
        if !self.source_occupied {
            return PassageResult::without_path(ExtendedTime::Infinite);
        }
        if *target == self.source {
            return PassageResult {
                value: ExtendedTime::Finite(0),
                realized_path: vec![self.source],
                per_leg_times: vec![0],
            };
        }
        match self.target_hit {
            Some(hit) => {
                let (mut path, mut legs) = self.chain_to_frog(hit.frog);
                path.push(*target);
                legs.push(hit.leg);
                PassageResult { value: ExtendedTime::Finite(hit.time), realized_path: path, per_leg_times: legs }
            }
            None => PassageResult::without_path(ExtendedTime::Censored(self.horizon)),
        }
    }

    /// Activation time of the frog on `site`, if it was woken.
    pub fn activation_time(&self, site: &SitePoint) -> Option<u64> {
        self.frog_at.get(site).map(|&i| self.activations[i as usize].time)
    }
}

/// Synchronous frog-model simulator restricted to a domain.
pub struct FrontEngine<'a, D: SiteSet + ?Sized> {
    pub oracle: &'a WalkOracle,
    pub config: &'a Configuration,
    pub domain: &'a D,
    pub horizon: u64,
    pub track_all_sites: bool,
}

struct Frog {
    walker: Walker,
}

impl<'a, D: SiteSet + ?Sized> FrontEngine<'a, D> {
    pub fn new(oracle: &'a WalkOracle, config: &'a Configuration, domain: &'a D, horizon: u64) -> Self {
        Self { oracle, config, domain, horizon, track_all_sites: false }
    }

    pub fn tracking_all_sites(mut self) -> Self {
        self.track_all_sites = true;
        self
    }

    /// Runs from `source` until the horizon, the target's first visit, or the
    /// observer asks to stop.
    pub fn run<O: SweepObserver>(
        &self,
        source: &SitePoint,
        target: Option<&SitePoint>,
        observer: &mut O,
    ) -> Result<SweepOutcome> {
        if !self.domain.contains(source) {
            return Err(FrogError::OutsideDomain(*source));
        }
        let source_occupied = self.config.is_occupied(source);
        let mut out = SweepOutcome {
            source: *source,
            horizon: self.horizon,
            activations: Vec::new(),
            frog_at: FxHashMap::default(),
            visits: self.track_all_sites.then(FxHashMap::default),
            target_hit: None,
            final_time: 0,
            left_domain: false,
            source_occupied,
        };
        if !source_occupied {
            return Ok(out);
        }
        out.activations.push(Activation { site: *source, time: 0, parent: None, leg: 0 });
        out.frog_at.insert(*source, 0);
        let mut stop = observer.on_visit(source, 0, true);
        if let Some(v) = out.visits.as_mut() {
            v.insert(*source, 0);
        }
        if target == Some(source) {
            return Ok(out);
        }
        let mut frogs = vec![Frog { walker: self.oracle.walker(source) }];

        let mut t = 0;
        while !stop && t < self.horizon {
            t += 1;
            let alive = frogs.len();
            for i in 0..alive {
                let pos = frogs[i].walker.advance();
                if target == Some(&pos) && out.target_hit.is_none() {
                    out.target_hit = Some(TargetHit { time: t, frog: i as u32, leg: frogs[i].walker.steps() });
                    stop = true;
                }
                if !self.domain.contains(&pos) {
                    out.left_domain = true;
                    if observer.on_exit(&pos, t) {
                        stop = true;
                    }
                    continue;
                }
                let occupied = self.config.is_occupied(&pos);
                if let Some(v) = out.visits.as_mut() {
                    if v.contains_key(&pos) {
                        continue;
                    }
                    v.insert(pos, t);
                    if !occupied && observer.on_visit(&pos, t, false) {
                        stop = true;
                    }
                }
                if occupied {
                    if let std::collections::hash_map::Entry::Vacant(e) = out.frog_at.entry(pos) {
                        let idx = out.activations.len() as u32;
                        e.insert(idx);
                        out.activations.push(Activation {
                            site: pos,
                            time: t,
                            parent: Some(i as u32),
                            leg: frogs[i].walker.steps(),
                        });
                        frogs.push(Frog { walker: self.oracle.walker(&pos) });
                        if observer.on_visit(&pos, t, true) {
                            stop = true;
                        }
                    }
                }
            }
        }
        out.final_time = t;
        Ok(out)
    }

    /// `T_A(source, target)` by simulation.
    pub fn passage(&self, source: &SitePoint, target: &SitePoint) -> Result<(PassageResult, SweepOutcome)> {
        let outcome = self.run(source, Some(target), &mut NoObserver)?;
        Ok((outcome.target_result(target), outcome))
    }
}

/// Visit (activation) times of every site of a finite domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivationFront {
    pub source: SitePoint,
    pub horizon: u64,
    pub times: BTreeMap<SitePoint, ExtendedTime>,
}

impl ActivationFront {
    pub fn get(&self, z: &SitePoint) -> Option<ExtendedTime> {
        self.times.get(z).copied()
    }
}

/// Counts first visits so the run can stop once the whole domain is covered.
struct CoverAll {
    remaining: u64,
}

impl SweepObserver for CoverAll {
    fn on_visit(&mut self, _: &SitePoint, _: u64, _: bool) -> bool {
        self.remaining = self.remaining.saturating_sub(1);
        self.remaining == 0
    }
}

/// `T_A(source, z)` for every `z ∈ A` at once.
pub fn activation_front(
    oracle: &WalkOracle,
    config: &Configuration,
    source: &SitePoint,
    domain: &BoxRegion,
    horizon: u64,
) -> Result<ActivationFront> {
    let engine = FrontEngine::new(oracle, config, domain, horizon).tracking_all_sites();
    let mut cover = CoverAll { remaining: domain.cardinality() };
    let outcome = engine.run(source, None, &mut cover)?;
    let times = domain
        .iter()
        .map(|z| {
            let value = if !outcome.source_occupied {
                ExtendedTime::Infinite
            } else {
                match outcome.visits.as_ref().and_then(|v| v.get(&z)) {
                    Some(&t) => ExtendedTime::Finite(t),
                    None => ExtendedTime::Censored(horizon),
                }
            };
            (z, value)
        })
        .collect();
    Ok(ActivationFront { source: *source, horizon, times })
}

/// `B(t) = { z : T(source, z) ≤ t }`; censored and infinite entries excluded.
pub fn visited_region(front: &ActivationFront, t: u64) -> BTreeSet<SitePoint> {
    front.times.iter().filter(|(_, v)| v.within(t)).map(|(z, _)| *z).collect()
}
