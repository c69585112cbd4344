//! Integer lattice geometry: sites, norms, boxes and neighbourhoods.

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{FrogError, Result};

/// Largest supported lattice dimension.
pub const MAX_DIM: usize = 6;

/// A site of `Z^d`. Coordinates beyond `dim` are always zero.
#[derive(Clone, Copy, PartialEq, Eq)]
pub struct SitePoint {
    coords: [i64; MAX_DIM],
    dim: u8,
}

impl SitePoint {
    pub fn origin(dim: usize) -> Self {
        assert!((1..=MAX_DIM).contains(&dim), "dimension {dim} out of range");
        Self { coords: [0; MAX_DIM], dim: dim as u8 }
    }

    pub fn new(coords: &[i64]) -> Self {
        let mut p = Self::origin(coords.len());
        p.coords[..coords.len()].copy_from_slice(coords);
        p
    }

    /// Standard basis vector `e_axis` of `Z^dim`.
    pub fn unit_vector(dim: usize, axis: usize) -> Result<Self> {
        check_dim(dim)?;
        if axis >= dim {
            return Err(FrogError::AxisOutOfRange { axis, dim });
        }
        let mut p = Self::origin(dim);
        p.coords[axis] = 1;
        Ok(p)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    #[inline]
    pub fn coords(&self) -> &[i64] {
        &self.coords[..self.dim as usize]
    }

    #[inline]
    pub fn coord(&self, axis: usize) -> i64 {
        self.coords[axis]
    }

    #[inline]
    pub fn set_coord(&mut self, axis: usize, value: i64) {
        debug_assert!(axis < self.dim());
        self.coords[axis] = value;
    }

    /// Moves one lattice step along `axis`, forward when `positive`.
    #[inline]
    pub fn step(&mut self, axis: usize, positive: bool) {
        if positive {
            self.coords[axis] += 1;
        } else {
            self.coords[axis] -= 1;
        }
    }

    pub fn add(&self, other: &SitePoint) -> SitePoint {
        debug_assert_eq!(self.dim, other.dim);
        let mut out = *self;
        for i in 0..self.dim() {
            out.coords[i] += other.coords[i];
        }
        out
    }

    pub fn sub(&self, other: &SitePoint) -> SitePoint {
        debug_assert_eq!(self.dim, other.dim);
        let mut out = *self;
        for i in 0..self.dim() {
            out.coords[i] -= other.coords[i];
        }
        out
    }

    pub fn scale(&self, factor: i64) -> SitePoint {
        let mut out = *self;
        for i in 0..self.dim() {
            out.coords[i] *= factor;
        }
        out
    }

    pub fn l1(&self) -> u64 {
        self.coords().iter().map(|c| c.unsigned_abs()).sum()
    }

    pub fn l2_sq(&self) -> u64 {
        self.coords().iter().map(|c| c.unsigned_abs() * c.unsigned_abs()).sum()
    }

    pub fn linf(&self) -> u64 {
        self.coords().iter().map(|c| c.unsigned_abs()).max().unwrap_or(0)
    }

    pub fn l1_dist(&self, other: &SitePoint) -> u64 {
        self.sub(other).l1()
    }

    pub fn linf_dist(&self, other: &SitePoint) -> u64 {
        self.sub(other).linf()
    }

    pub fn is_origin(&self) -> bool {
        self.coords().iter().all(|&c| c == 0)
    }
}

pub(crate) fn check_dim(dim: usize) -> Result<()> {
    if (2..=MAX_DIM).contains(&dim) {
        Ok(())
    } else {
        Err(FrogError::InvalidDimension(dim))
    }
}

impl Hash for SitePoint {
    fn hash<H: Hasher>(&self, state: &mut H) {
        for c in self.coords() {
            state.write_i64(*c);
        }
    }
}

impl Ord for SitePoint {
    fn cmp(&self, other: &Self) -> Ordering {
        self.coords().cmp(other.coords())
    }
}

impl PartialOrd for SitePoint {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for SitePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.coords().iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

impl fmt::Display for SitePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, c) in self.coords().iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

/// Parses `"3,-4"` (or with surrounding parentheses).
impl FromStr for SitePoint {
    type Err = FrogError;

    fn from_str(s: &str) -> Result<Self> {
        let trimmed = s.trim().trim_start_matches('(').trim_end_matches(')');
        let coords = trimmed
            .split(',')
            .map(|t| t.trim().parse::<i64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| FrogError::InvalidArgument(format!("cannot parse site '{s}'")))?;
        if coords.is_empty() || coords.len() > MAX_DIM {
            return Err(FrogError::InvalidArgument(format!("cannot parse site '{s}'")));
        }
        Ok(SitePoint::new(&coords))
    }
}

impl Serialize for SitePoint {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.coords().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for SitePoint {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<i64>::deserialize(deserializer)?;
        if v.is_empty() || v.len() > MAX_DIM {
            return Err(serde::de::Error::custom("site dimension out of range"));
        }
        Ok(SitePoint::new(&v))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NormKind {
    L1,
    /// Euclidean norm, always handled in squared form.
    L2Sq,
    LInf,
}

/// Norm of `p`. The Euclidean case returns the squared norm.
pub fn norm(p: &SitePoint, kind: NormKind) -> u64 {
    match kind {
        NormKind::L1 => p.l1(),
        NormKind::L2Sq => p.l2_sq(),
        NormKind::LInf => p.linf(),
    }
}

/// Nearest neighbours (`star == false`, the `2d` sites at L1 distance one)
/// or the `*`-neighbours (`star == true`, the `3^d - 1` sites at L∞ distance one),
/// in lexicographic order.
pub fn neighbors(p: &SitePoint, star: bool) -> Vec<SitePoint> {
    let d = p.dim();
    if star {
        BoxRegion::linf(*p, 1).iter().filter(|q| q != p).collect()
    } else {
        let mut out = Vec::with_capacity(2 * d);
        for axis in 0..d {
            for delta in [-1, 1] {
                let mut q = *p;
                q.coords[axis] += delta;
                out.push(q);
            }
        }
        out.sort();
        out
    }
}

/// Membership test shared by every region a passage time can be restricted to.
pub trait SiteSet {
    fn contains(&self, p: &SitePoint) -> bool;
}

/// Ball `{ y : ‖y − center‖ ≤ radius }` for one of the three lattice norms.
/// For `L2Sq` the radius is the Euclidean radius; membership compares squares.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BoxRegion {
    pub center: SitePoint,
    pub radius: u64,
    pub norm_kind: NormKind,
}

impl BoxRegion {
    pub fn new(center: SitePoint, radius: u64, norm_kind: NormKind) -> Self {
        Self { center, radius, norm_kind }
    }

    pub fn linf(center: SitePoint, radius: u64) -> Self {
        Self::new(center, radius, NormKind::LInf)
    }

    pub fn l1(center: SitePoint, radius: u64) -> Self {
        Self::new(center, radius, NormKind::L1)
    }

    pub fn dim(&self) -> usize {
        self.center.dim()
    }

    #[inline]
    pub fn contains(&self, p: &SitePoint) -> bool {
        let c = &self.center;
        match self.norm_kind {
            NormKind::LInf => {
                let r = self.radius as i128;
                (0..c.dim()).all(|i| (p.coords[i] as i128 - c.coords[i] as i128).abs() <= r)
            }
            NormKind::L1 => {
                let mut acc: u128 = 0;
                for i in 0..c.dim() {
                    acc += (p.coords[i] as i128 - c.coords[i] as i128).unsigned_abs();
                }
                acc <= self.radius as u128
            }
            NormKind::L2Sq => {
                let mut acc: u128 = 0;
                for i in 0..c.dim() {
                    let t = (p.coords[i] as i128 - c.coords[i] as i128).unsigned_abs();
                    acc += t * t;
                }
                acc <= (self.radius as u128) * (self.radius as u128)
            }
        }
    }

    /// True when every member of `self` lies in `other`.
    pub fn is_subset_of(&self, other: &BoxRegion) -> bool {
        match (self.norm_kind, other.norm_kind) {
            (NormKind::LInf, NormKind::LInf) => {
                let gap = self.center.linf_dist(&other.center);
                gap + self.radius <= other.radius
            }
            _ => self.iter().all(|p| other.contains(&p)),
        }
    }

    /// Exact number of lattice points.
    pub fn cardinality(&self) -> u64 {
        match self.norm_kind {
            NormKind::LInf => (2 * self.radius + 1).pow(self.dim() as u32),
            _ => self.iter().count() as u64,
        }
    }

    /// Members in lexicographic order, each exactly once.
    pub fn iter(&self) -> BoxIter {
        BoxIter::new(*self)
    }

    pub fn enumerate(&self) -> Vec<SitePoint> {
        self.iter().collect()
    }
}

impl SiteSet for BoxRegion {
    #[inline]
    fn contains(&self, p: &SitePoint) -> bool {
        BoxRegion::contains(self, p)
    }
}

/// Union of boxes.
#[derive(Debug, Clone, Default)]
pub struct BoxUnion {
    pub boxes: Vec<BoxRegion>,
}

impl BoxUnion {
    pub fn new(boxes: Vec<BoxRegion>) -> Self {
        Self { boxes }
    }
}

impl SiteSet for BoxUnion {
    fn contains(&self, p: &SitePoint) -> bool {
        self.boxes.iter().any(|b| b.contains(p))
    }
}

/// The whole lattice.
#[derive(Debug, Clone, Copy, Default)]
pub struct Everywhere;

impl SiteSet for Everywhere {
    fn contains(&self, _p: &SitePoint) -> bool {
        true
    }
}

/// Lexicographic iterator over a ball: walks its bounding L∞ cube as an odometer
/// and filters by the norm.
pub struct BoxIter {
    region: BoxRegion,
    cursor: Option<SitePoint>,
}

impl BoxIter {
    fn new(region: BoxRegion) -> Self {
        let r = region.radius as i64;
        let mut start = region.center;
        for i in 0..start.dim() {
            start.coords[i] -= r;
        }
        Self { region, cursor: Some(start) }
    }

    fn advance(&mut self) {
        let Some(cur) = self.cursor.as_mut() else { return };
        let r = self.region.radius as i64;
        let d = cur.dim();
        let mut axis = d;
        while axis > 0 {
            axis -= 1;
            let hi = self.region.center.coords[axis] + r;
            if cur.coords[axis] < hi {
                cur.coords[axis] += 1;
                return;
            }
            cur.coords[axis] = self.region.center.coords[axis] - r;
        }
        self.cursor = None;
    }
}

impl Iterator for BoxIter {
    type Item = SitePoint;

    fn next(&mut self) -> Option<SitePoint> {
        loop {
            let cur = self.cursor?;
            self.advance();
            if self.region.norm_kind == NormKind::LInf || self.region.contains(&cur) {
                return Some(cur);
            }
        }
    }
}

/// Sites at exact L1 distance `radius` from `center`, in lexicographic order.
pub fn l1_sphere(center: &SitePoint, radius: u64) -> Vec<SitePoint> {
    fn rec(center: &SitePoint, axis: usize, remaining: i64, cur: &mut SitePoint, out: &mut Vec<SitePoint>) {
        let d = center.dim();
        if axis + 1 == d {
            for c in [-remaining, remaining] {
                cur.coords[axis] = center.coords[axis] + c;
                out.push(*cur);
                if remaining == 0 {
                    break;
                }
            }
            return;
        }
        for c in -remaining..=remaining {
            cur.coords[axis] = center.coords[axis] + c;
            rec(center, axis + 1, remaining - c.abs(), cur, out);
        }
    }
    let mut out = Vec::new();
    let mut cur = *center;
    rec(center, 0, radius as i64, &mut cur, &mut out);
    out
}
