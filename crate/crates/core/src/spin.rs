//! Spin values and configurations over a [`SiteSet`].

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::lattice::{LatticePoint, SiteSet};

/// A value of the basic binary set `{-1, +1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(i8)]
pub enum Spin {
    Down = -1,
    Up = 1,
}

impl Spin {
    pub const BOTH: [Spin; 2] = [Spin::Up, Spin::Down];

    pub fn value(self) -> i8 {
        self as i8
    }

    pub fn as_f64(self) -> f64 {
        f64::from(self as i8)
    }

    pub fn flip(self) -> Spin {
        match self {
            Spin::Up => Spin::Down,
            Spin::Down => Spin::Up,
        }
    }

    pub fn is_up(self) -> bool {
        self == Spin::Up
    }

    pub fn from_value(v: i64) -> Result<Spin> {
        match v {
            1 => Ok(Spin::Up),
            -1 => Ok(Spin::Down),
            other => Err(Error::invalid(format!(
                "spin must be -1 or +1, got {other}"
            ))),
        }
    }
}

impl fmt::Display for Spin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Spin::Up => "+1",
            Spin::Down => "-1",
        })
    }
}

/// A spin assignment on a subset of sites, used to condition or to match draws.
pub type Pattern = BTreeMap<LatticePoint, Spin>;

/// A full assignment `site -> {-1, +1}` over an ordered site set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpinConfiguration {
    sites: Arc<SiteSet>,
    spins: Vec<Spin>,
}

impl SpinConfiguration {
    pub fn new(sites: Arc<SiteSet>, spins: Vec<Spin>) -> Result<Self> {
        if spins.len() != sites.len() {
            return Err(Error::invalid(format!(
                "{} spins for {} sites",
                spins.len(),
                sites.len()
            )));
        }
        Ok(SpinConfiguration { sites, spins })
    }

    pub fn uniform(sites: Arc<SiteSet>, spin: Spin) -> Self {
        let spins = vec![spin; sites.len()];
        SpinConfiguration { sites, spins }
    }

    /// Configuration whose spin at site index `k` is bit `k` of `bits` (1 = up).
    pub fn from_bits(sites: Arc<SiteSet>, bits: u64) -> Self {
        let spins = (0..sites.len())
            .map(|k| {
                if bits >> k & 1 == 1 {
                    Spin::Up
                } else {
                    Spin::Down
                }
            })
            .collect();
        SpinConfiguration { sites, spins }
    }

    pub fn sites(&self) -> &Arc<SiteSet> {
        &self.sites
    }

    pub fn spins(&self) -> &[Spin] {
        &self.spins
    }

    pub fn get(&self, p: &LatticePoint) -> Option<Spin> {
        self.sites.index_of(p).map(|k| self.spins[k])
    }

    pub fn set(&mut self, p: &LatticePoint, s: Spin) -> Result<()> {
        let k = self
            .sites
            .index_of(p)
            .ok_or_else(|| Error::invalid(format!("site {p} not in configuration")))?;
        self.spins[k] = s;
        Ok(())
    }

    /// Global spin flip.
    pub fn flipped(&self) -> Self {
        SpinConfiguration {
            sites: Arc::clone(&self.sites),
            spins: self.spins.iter().map(|s| s.flip()).collect(),
        }
    }

    pub fn to_pattern(&self) -> Pattern {
        self.sites
            .iter()
            .cloned()
            .zip(self.spins.iter().copied())
            .collect()
    }

    /// Restriction to the given sites; errors if any is missing.
    pub fn restrict<'a>(
        &self,
        sites: impl IntoIterator<Item = &'a LatticePoint>,
    ) -> Result<Pattern> {
        sites
            .into_iter()
            .map(|p| {
                self.get(p)
                    .map(|s| (p.clone(), s))
                    .ok_or_else(|| Error::invalid(format!("site {p} not in configuration")))
            })
            .collect()
    }
}
