//! Counter-based keyed randomness.
//!
//! Every random quantity of an experiment, the occupancy `ω(x)` of each site and
//! every increment of every walk `S^x`, is a pure function of the master seed and
//! the coordinates it belongs to. Nothing is drawn from a stateful stream, so
//! values can be reproduced lazily, in any order and from any thread.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{FrogError, Result};
use crate::lattice::{l1_sphere, BoxRegion, NormKind, SitePoint};

/// Environment variable holding the default master seed.
pub const SEED_ENV: &str = "FROGSIM_SEED";

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;
const TAG_WALK: u64 = 0x5741_4C4B_0000_0001;
const TAG_OCCUPANCY: u64 = 0x4F43_4355_0000_0002;
const TAG_STREAM: u64 = 0x5354_524D_0000_0003;

/// SplitMix64 finaliser; a bijection on `u64`.
#[inline(always)]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hash of `(key, site)` mixing every coordinate, sign included, with its axis.
#[inline]
pub fn site_hash(key: u64, site: &SitePoint) -> u64 {
    let mut h = mix64(key ^ (site.dim() as u64).wrapping_mul(GOLDEN));
    for (axis, &c) in site.coords().iter().enumerate() {
        let lane = (c as u64).wrapping_mul(0xD6E8_FEB8_6659_FD93) ^ ((axis as u64 + 1) << 56);
        h = mix64(h.wrapping_add(lane));
    }
    h
}

/// Seed of an independent sub-experiment (trial `index` of stream `tag`).
pub fn derive_seed(master: u64, tag: u64, index: u64) -> u64 {
    mix64(mix64(master ^ TAG_STREAM ^ tag.wrapping_mul(GOLDEN)).wrapping_add(index.wrapping_mul(GOLDEN)))
}

/// Maps 64 random bits to `[0, n)` by widening multiplication.
#[inline(always)]
fn bounded(h: u64, n: u64) -> u64 {
    ((h as u128 * n as u128) >> 64) as u64
}

#[inline(always)]
fn unit_f64(h: u64) -> f64 {
    (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MasterSeed {
    pub seed: u64,
    pub run_label: String,
}

impl MasterSeed {
    pub fn new(seed: u64) -> Self {
        Self { seed, run_label: String::new() }
    }

    pub fn labelled(seed: u64, run_label: impl Into<String>) -> Self {
        Self { seed, run_label: run_label.into() }
    }

    /// Reads `FROGSIM_SEED`; `None` when unset, an error when unparsable.
    pub fn from_env() -> Result<Option<Self>> {
        match std::env::var(SEED_ENV) {
            Ok(v) => v
                .trim()
                .parse::<u64>()
                .map(|s| Some(Self::new(s)))
                .map_err(|_| FrogError::InvalidArgument(format!("{SEED_ENV}='{v}' is not a decimal u64"))),
            Err(_) => Ok(None),
        }
    }
}

/// Counter-based generator of the walks `S^x_k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WalkOracle {
    seed: u64,
    dim: usize,
}

impl WalkOracle {
    pub fn new(seed: u64, dim: usize) -> Result<Self> {
        crate::lattice::check_dim(dim)?;
        Ok(Self { seed, dim })
    }

    pub fn from_master(master: &MasterSeed, dim: usize) -> Result<Self> {
        Self::new(master.seed, dim)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn walk_key(&self, start: &SitePoint) -> u64 {
        site_hash(self.seed ^ TAG_WALK, start)
    }

    /// Direction of step `k >= 1` of the walk keyed by `key`, as an index in
    /// `0..2d`: axis `i / 2`, positive when `i` is odd.
    #[inline(always)]
    pub fn direction(&self, key: u64, k: u64) -> usize {
        bounded(mix64(key.wrapping_add(k.wrapping_mul(GOLDEN))), 2 * self.dim as u64) as usize
    }

    /// Increment `S^x_k − S^x_{k−1}` for `k >= 1`.
    pub fn increment(&self, start: &SitePoint, k: u64) -> SitePoint {
        assert!(k >= 1, "increments are indexed from 1");
        let dir = self.direction(self.walk_key(start), k);
        let mut e = SitePoint::origin(self.dim);
        e.step(dir / 2, dir % 2 == 1);
        e
    }

    /// Position `S^x_k`; replays `k` steps.
    pub fn walk_position(&self, start: &SitePoint, k: u64) -> SitePoint {
        let mut w = self.walker(start);
        for _ in 0..k {
            w.advance();
        }
        w.position()
    }

    pub fn walker(&self, start: &SitePoint) -> Walker {
        debug_assert_eq!(start.dim(), self.dim);
        Walker { oracle: *self, key: self.walk_key(start), start: *start, pos: *start, steps: 0 }
    }

    /// Range `R_n^A`: all sites visited by walks from `starts` up to step `n`.
    pub fn range_set<'a, I>(&self, starts: I, n: u64) -> BTreeSet<SitePoint>
    where
        I: IntoIterator<Item = &'a SitePoint>,
    {
        let mut out = BTreeSet::new();
        for s in starts {
            let mut w = self.walker(s);
            out.insert(w.position());
            for _ in 0..n {
                out.insert(w.advance());
            }
        }
        out
    }
}

/// Cursor along one walk `S^x`, yielding `S^x_1, S^x_2, …`.
#[derive(Debug, Clone, Copy)]
pub struct Walker {
    oracle: WalkOracle,
    key: u64,
    start: SitePoint,
    pos: SitePoint,
    steps: u64,
}

impl Walker {
    #[inline(always)]
    pub fn advance(&mut self) -> SitePoint {
        self.steps += 1;
        let dir = self.oracle.direction(self.key, self.steps);
        self.pos.step(dir >> 1, dir & 1 == 1);
        self.pos
    }

    #[inline]
    pub fn position(&self) -> SitePoint {
        self.pos
    }

    #[inline]
    pub fn steps(&self) -> u64 {
        self.steps
    }

    #[inline]
    pub fn start(&self) -> SitePoint {
        self.start
    }
}

/// Counter-based stream of uniform draws for Monte Carlo checks that need plain
/// random numbers rather than lattice walks.
#[derive(Debug, Clone)]
pub struct KeyedStream {
    key: u64,
    counter: u64,
}

impl KeyedStream {
    pub fn new(key: u64) -> Self {
        Self { key, counter: 0 }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.counter += 1;
        mix64(self.key.wrapping_add(self.counter.wrapping_mul(GOLDEN)))
    }

    pub fn next_f64(&mut self) -> f64 {
        unit_f64(self.next_u64())
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.next_f64() < p
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Base {
    /// Independent Bernoulli(r) occupancy keyed on `(seed, site)`.
    Bernoulli { seed: u64, density: f64 },
    /// Only the listed sites are occupied.
    Explicit(BTreeSet<SitePoint>),
}

/// Realised occupied set `O` inside a finite (possibly very large) domain.
///
/// Occupancy is evaluated lazily, so enlarging the domain never changes the
/// state of sites already inside it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Configuration {
    domain: BoxRegion,
    base: Base,
    overrides: Vec<(SitePoint, bool)>,
}

/// Bernoulli configuration with density `r` on `domain`.
pub fn sample_configuration(master: &MasterSeed, domain: BoxRegion, r: f64) -> Result<Configuration> {
    Configuration::bernoulli(master.seed, domain, r)
}

impl Configuration {
    pub fn bernoulli(seed: u64, domain: BoxRegion, r: f64) -> Result<Self> {
        if !(r > 0.0 && r <= 1.0) {
            return Err(FrogError::InvalidDensity(r));
        }
        Ok(Self { domain, base: Base::Bernoulli { seed, density: r }, overrides: Vec::new() })
    }

    pub fn explicit<I: IntoIterator<Item = SitePoint>>(domain: BoxRegion, sites: I) -> Self {
        Self { domain, base: Base::Explicit(sites.into_iter().collect()), overrides: Vec::new() }
    }

    /// Conditions on `ω(site) = 1`.
    pub fn force_occupied(mut self, site: SitePoint) -> Self {
        self.set_override(site, true);
        self
    }

    pub fn force_vacant(mut self, site: SitePoint) -> Self {
        self.set_override(site, false);
        self
    }

    fn set_override(&mut self, site: SitePoint, value: bool) {
        self.overrides.retain(|(s, _)| *s != site);
        self.overrides.push((site, value));
    }

    pub fn domain(&self) -> &BoxRegion {
        &self.domain
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    /// Same randomness on a different domain.
    pub fn with_domain(&self, domain: BoxRegion) -> Self {
        Self { domain, ..self.clone() }
    }

    /// Bernoulli parameter, or `None` for explicit configurations.
    pub fn density(&self) -> Option<f64> {
        match self.base {
            Base::Bernoulli { density, .. } => Some(density),
            Base::Explicit(_) => None,
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self.base {
            Base::Bernoulli { seed, .. } => Some(seed),
            Base::Explicit(_) => None,
        }
    }

    #[inline]
    pub fn is_occupied(&self, p: &SitePoint) -> bool {
        if !self.domain.contains(p) {
            return false;
        }
        for (s, v) in &self.overrides {
            if s == p {
                return *v;
            }
        }
        match &self.base {
            Base::Bernoulli { seed, density } => {
                *density >= 1.0 || unit_f64(site_hash(*seed ^ TAG_OCCUPANCY, p)) < *density
            }
            Base::Explicit(set) => set.contains(p),
        }
    }

    /// Occupied sites in lexicographic order.
    pub fn occupied_sites(&self) -> Vec<SitePoint> {
        match &self.base {
            Base::Explicit(set) => {
                let mut out: BTreeSet<SitePoint> =
                    set.iter().filter(|p| self.is_occupied(p)).copied().collect();
                out.extend(self.overrides.iter().filter(|(s, v)| *v && self.domain.contains(s)).map(|(s, _)| *s));
                out.into_iter().collect()
            }
            Base::Bernoulli { .. } => self.domain.iter().filter(|p| self.is_occupied(p)).collect(),
        }
    }

    pub fn occupied_in<'a>(&'a self, region: &'a BoxRegion) -> impl Iterator<Item = SitePoint> + 'a {
        region.iter().filter(move |p| self.is_occupied(p))
    }

    /// L1-nearest occupied site to `target`, ties broken lexicographically.
    pub fn closest_occupied(&self, target: &SitePoint) -> Result<SitePoint> {
        if let Base::Explicit(set) = &self.base {
            return set
                .iter()
                .chain(self.overrides.iter().filter(|(_, v)| *v).map(|(s, _)| s))
                .filter(|p| self.is_occupied(p))
                .min_by_key(|p| (p.l1_dist(target), **p))
                .copied()
                .ok_or(FrogError::NotFound);
        }
        let max_shell = self.max_l1_distance_to_domain(target);
        for radius in 0..=max_shell {
            if let Some(p) = l1_sphere(target, radius).into_iter().find(|p| self.is_occupied(p)) {
                return Ok(p);
            }
        }
        Err(FrogError::NotFound)
    }

    fn max_l1_distance_to_domain(&self, target: &SitePoint) -> u64 {
        let c = &self.domain.center;
        let r = self.domain.radius;
        match self.domain.norm_kind {
            NormKind::LInf => (0..c.dim()).map(|i| (target.coord(i) - c.coord(i)).unsigned_abs() + r).sum(),
            _ => target.l1_dist(c) + r * c.dim() as u64,
        }
    }
}

/// Free-function form of [`Configuration::closest_occupied`].
pub fn closest_occupied(config: &Configuration, target: &SitePoint) -> Result<SitePoint> {
    config.closest_occupied(target)
}
