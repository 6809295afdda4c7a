//! Sites of `Z^d`, max-norm boxes and ordered finite site sets.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A site of `Z^d`. Ordering is lexicographic on the coordinates.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LatticePoint(Vec<i32>);

impl LatticePoint {
    pub fn new(coords: impl Into<Vec<i32>>) -> Self {
        LatticePoint(coords.into())
    }

    /// The origin of `Z^d`.
    pub fn origin(dimension: usize) -> Self {
        LatticePoint(vec![0; dimension])
    }

    pub fn coords(&self) -> &[i32] {
        &self.0
    }

    pub fn dimension(&self) -> usize {
        self.0.len()
    }

    /// Maximum-norm distance `|self - other|`.
    ///
    /// Panics if the dimensions differ.
    pub fn distance(&self, other: &LatticePoint) -> u32 {
        assert_eq!(
            self.dimension(),
            other.dimension(),
            "distance between points of different dimension"
        );
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| a.abs_diff(*b))
            .max()
            .unwrap_or(0)
    }
}

impl fmt::Display for LatticePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, c) in self.0.iter().enumerate() {
            if k > 0 {
                f.write_str(",")?;
            }
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

/// Parses `"0,3"` or `"(0,3)"`.
impl FromStr for LatticePoint {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let body = s.trim().trim_start_matches('(').trim_end_matches(')');
        if body.is_empty() {
            return Err(Error::invalid(format!("empty lattice point {s:?}")));
        }
        body.split(',')
            .map(|c| {
                c.trim()
                    .parse::<i32>()
                    .map_err(|e| Error::invalid(format!("bad coordinate {c:?} in {s:?}: {e}")))
            })
            .collect::<Result<Vec<_>>>()
            .map(LatticePoint)
    }
}

/// The max-norm ball `B^L(center)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LatticeBox {
    pub center: LatticePoint,
    pub radius: u32,
}

impl LatticeBox {
    pub fn new(center: LatticePoint, radius: u32) -> Self {
        LatticeBox { center, radius }
    }

    /// `B^radius(0)` in `Z^dimension`.
    pub fn centered(dimension: usize, radius: u32) -> Self {
        LatticeBox::new(LatticePoint::origin(dimension), radius)
    }

    pub fn dimension(&self) -> usize {
        self.center.dimension()
    }

    pub fn contains(&self, p: &LatticePoint) -> bool {
        p.dimension() == self.dimension() && self.center.distance(p) <= self.radius
    }

    /// `(2L + 1)^d`.
    pub fn site_count(&self) -> usize {
        (2 * self.radius as usize + 1).pow(self.dimension() as u32)
    }

    /// Sites in lexicographic order.
    pub fn points(&self) -> Vec<LatticePoint> {
        let d = self.dimension();
        let r = self.radius as i32;
        let lo: Vec<i32> = self.center.coords().iter().map(|c| c - r).collect();
        let hi: Vec<i32> = self.center.coords().iter().map(|c| c + r).collect();
        let mut out = Vec::with_capacity(self.site_count());
        let mut cur = lo.clone();
        loop {
            out.push(LatticePoint(cur.clone()));
            // odometer, last coordinate fastest
            let mut axis = d;
            loop {
                if axis == 0 {
                    return out;
                }
                axis -= 1;
                if cur[axis] < hi[axis] {
                    cur[axis] += 1;
                    break;
                }
                cur[axis] = lo[axis];
            }
        }
    }

    pub fn sites(&self) -> SiteSet {
        SiteSet::from_sorted_unchecked(self.points())
    }
}

/// A finite set of sites of one dimension, kept in lexicographic order.
/// Index `k` of a site is its position in that order.
#[derive(Debug, Clone)]
pub struct SiteSet {
    points: Vec<LatticePoint>,
    index: HashMap<LatticePoint, usize>,
}

impl PartialEq for SiteSet {
    fn eq(&self, other: &Self) -> bool {
        self.points == other.points
    }
}

impl Eq for SiteSet {}

impl SiteSet {
    /// Sorts and deduplicates; errors on mixed dimensions.
    pub fn new(mut points: Vec<LatticePoint>) -> Result<Self> {
        if let Some(first) = points.first() {
            let d = first.dimension();
            if d == 0 {
                return Err(Error::invalid("sites must have dimension >= 1"));
            }
            if let Some(bad) = points.iter().find(|p| p.dimension() != d) {
                return Err(Error::invalid(format!(
                    "site {bad} has dimension {}, expected {d}",
                    bad.dimension()
                )));
            }
        }
        points.sort();
        points.dedup();
        Ok(Self::from_sorted_unchecked(points))
    }

    fn from_sorted_unchecked(points: Vec<LatticePoint>) -> Self {
        let index = points
            .iter()
            .enumerate()
            .map(|(k, p)| (p.clone(), k))
            .collect();
        SiteSet { points, index }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Dimension of the sites, or `None` for the empty set.
    pub fn dimension(&self) -> Option<usize> {
        self.points.first().map(LatticePoint::dimension)
    }

    pub fn points(&self) -> &[LatticePoint] {
        &self.points
    }

    pub fn iter(&self) -> std::slice::Iter<'_, LatticePoint> {
        self.points.iter()
    }

    pub fn point(&self, k: usize) -> &LatticePoint {
        &self.points[k]
    }

    pub fn index_of(&self, p: &LatticePoint) -> Option<usize> {
        self.index.get(p).copied()
    }

    pub fn contains(&self, p: &LatticePoint) -> bool {
        self.index.contains_key(p)
    }

    pub fn is_subset_of(&self, other: &SiteSet) -> bool {
        self.points.iter().all(|p| other.contains(p))
    }

    /// The box this set fills exactly, if any.
    pub fn as_box(&self) -> Option<LatticeBox> {
        let first = self.points.first()?;
        let last = self.points.last()?;
        // lexicographic order puts the two corners first and last
        let lo = first.coords();
        let hi = last.coords();
        let width = hi[0] - lo[0];
        if width < 0 || width % 2 != 0 {
            return None;
        }
        if lo.iter().zip(hi).any(|(a, b)| b - a != width) {
            return None;
        }
        let radius = (width / 2) as u32;
        let center = LatticePoint(lo.iter().map(|c| c + width / 2).collect());
        let b = LatticeBox::new(center, radius);
        (b.site_count() == self.len() && self.points.iter().all(|p| b.contains(p))).then_some(b)
    }
}

impl From<&LatticeBox> for SiteSet {
    fn from(b: &LatticeBox) -> Self {
        b.sites()
    }
}

impl<'a> IntoIterator for &'a SiteSet {
    type Item = &'a LatticePoint;
    type IntoIter = std::slice::Iter<'a, LatticePoint>;

    fn into_iter(self) -> Self::IntoIter {
        self.points.iter()
    }
}

/// File representation of a volume: a box when the set fills one, else an
/// explicit site list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum VolumeSpec {
    Box { center: LatticePoint, radius: u32 },
    Sites { sites: Vec<LatticePoint> },
}

impl VolumeSpec {
    pub fn describe(sites: &SiteSet) -> Self {
        match sites.as_box() {
            Some(b) => VolumeSpec::Box {
                center: b.center,
                radius: b.radius,
            },
            None => VolumeSpec::Sites {
                sites: sites.points().to_vec(),
            },
        }
    }

    pub fn to_sites(&self) -> Result<SiteSet> {
        match self {
            VolumeSpec::Box { center, radius } => {
                if center.dimension() == 0 {
                    return Err(Error::invalid("box center must have dimension >= 1"));
                }
                Ok(LatticeBox::new(center.clone(), *radius).sites())
            }
            VolumeSpec::Sites { sites } => SiteSet::new(sites.clone()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(c: &[i32]) -> LatticePoint {
        LatticePoint::new(c.to_vec())
    }

    #[test]
    fn max_norm_distance() {
        assert_eq!(pt(&[0, 0]).distance(&pt(&[0, 3])), 3);
        assert_eq!(pt(&[0, 0]).distance(&pt(&[2, -1])), 2);
        assert_eq!(pt(&[-1, 4, 2]).distance(&pt(&[-1, 4, 2])), 0);
    }

    #[test]
    fn box_enumeration_is_lexicographic_and_complete() {
        for d in 1..=3 {
            for r in 0..=2 {
                let b = LatticeBox::new(LatticePoint::new(vec![1; d]), r);
                let pts = b.points();
                assert_eq!(pts.len(), (2 * r as usize + 1).pow(d as u32));
                assert!(pts.windows(2).all(|w| w[0] < w[1]));
                assert!(pts.iter().all(|p| b.contains(p)));
            }
        }
        let b = LatticeBox::centered(2, 1);
        assert_eq!(b.points()[0], pt(&[-1, -1]));
        assert_eq!(b.points()[1], pt(&[-1, 0]));
        assert_eq!(b.points()[4], pt(&[0, 0]));
    }

    #[test]
    fn membership() {
        let b = LatticeBox::centered(2, 1);
        assert!(b.contains(&pt(&[1, -1])));
        assert!(!b.contains(&pt(&[2, 0])));
        assert!(!b.contains(&pt(&[0, 0, 0])));
    }

    #[test]
    fn site_set_sorts_and_indexes() {
        let s = SiteSet::new(vec![pt(&[1, 0]), pt(&[0, 0]), pt(&[1, 0])]).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.index_of(&pt(&[0, 0])), Some(0));
        assert_eq!(s.index_of(&pt(&[1, 0])), Some(1));
        assert!(SiteSet::new(vec![pt(&[0]), pt(&[0, 1])]).is_err());
    }

    #[test]
    fn as_box_detects_full_boxes_only() {
        let b = LatticeBox::new(pt(&[2, -1]), 2);
        assert_eq!(b.sites().as_box(), Some(b));
        let mut pts = LatticeBox::centered(2, 1).points();
        pts.remove(3);
        assert_eq!(SiteSet::new(pts).unwrap().as_box(), None);
        let pair = SiteSet::new(vec![pt(&[0]), pt(&[1])]).unwrap();
        assert_eq!(pair.as_box(), None);
    }

    #[test]
    fn point_parsing() {
        assert_eq!("(0,3)".parse::<LatticePoint>().unwrap(), pt(&[0, 3]));
        assert_eq!(" -2, 5 ".parse::<LatticePoint>().unwrap(), pt(&[-2, 5]));
        assert!("".parse::<LatticePoint>().is_err());
        assert!("1,x".parse::<LatticePoint>().is_err());
        assert_eq!(pt(&[-2, 5]).to_string(), "-2,5");
    }
}
