//! Exact Gibbs computations by enumeration on small volumes.
//!
//! The finite-volume measure with single-site conditionals
//! `1 / (1 + exp(-2 Σ_j J(i,j) x(i) x(j)))` is
//! `p(x) ∝ exp(Σ_{i<j} J(i,j) x(i) x(j))`; [`ExactModel`] tabulates it over all
//! `2^|volume|` configurations. Configuration `x` is encoded as a bit mask
//! whose bit `k` is set when the site with volume index `k` is up.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::lattice::{LatticeBox, LatticePoint, SiteSet};
use crate::potential::PairwisePotential;
use crate::spin::{Pattern, Spin, SpinConfiguration};

pub const DEFAULT_ENUMERATION_CAP: usize = 20;

/// Distances `D` below this are round-off of an exact zero and are reported as 0.
pub const DEFAULT_ZERO_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct ExactModel {
    potential: PairwisePotential,
    sites: Arc<SiteSet>,
    weights: Vec<f64>,
    log_partition: f64,
    zero_tolerance: f64,
}

/// The two variance proxies entering the misidentification bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceProxies {
    /// `sup_x sup_j (1 - p(x(i) | x(B \ {i,j})) p(x(B \ {j})))`
    pub v: f64,
    /// `sup_x sup_j (1 - p(x(i) | x(B \ {i,j})) p(x(B)))`
    pub v1: f64,
}

/// Tabulates the Gibbs measure of `potential` restricted to `volume`.
pub fn exact_distribution(potential: &PairwisePotential, volume: &SiteSet) -> Result<ExactModel> {
    ExactModel::with_cap(potential, volume, DEFAULT_ENUMERATION_CAP)
}

impl ExactModel {
    pub fn with_cap(potential: &PairwisePotential, volume: &SiteSet, cap: usize) -> Result<Self> {
        if volume.len() > cap.min(63) {
            return Err(Error::Capacity {
                sites: volume.len(),
                cap: cap.min(63),
            });
        }
        let restricted = potential.restrict(volume)?;
        let m = volume.len();
        let pairs: Vec<(usize, usize, f64)> = restricted
            .edges()
            .map(|(a, b, v)| {
                (
                    volume.index_of(a).expect("restricted edge"),
                    volume.index_of(b).expect("restricted edge"),
                    v,
                )
            })
            .collect();
        let energies: Vec<f64> = (0..1u64 << m)
            .map(|x| {
                pairs
                    .iter()
                    .map(|&(a, b, v)| if (x >> a & 1) == (x >> b & 1) { v } else { -v })
                    .sum()
            })
            .collect();
        let shift = energies.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut weights: Vec<f64> = energies.iter().map(|e| (e - shift).exp()).collect();
        let total: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= total;
        }
        Ok(ExactModel {
            potential: restricted,
            sites: Arc::new(volume.clone()),
            weights,
            log_partition: shift + total.ln(),
            zero_tolerance: DEFAULT_ZERO_TOLERANCE,
        })
    }

    /// Replaces the tolerance under which `D` is reported as exactly zero.
    pub fn with_zero_tolerance(mut self, tolerance: f64) -> Self {
        self.zero_tolerance = tolerance;
        self
    }

    pub fn potential(&self) -> &PairwisePotential {
        &self.potential
    }

    pub fn sites(&self) -> &Arc<SiteSet> {
        &self.sites
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn log_partition(&self) -> f64 {
        self.log_partition
    }

    pub fn partition_constant(&self) -> f64 {
        self.log_partition.exp()
    }

    pub fn configuration(&self, bits: u64) -> SpinConfiguration {
        SpinConfiguration::from_bits(Arc::clone(&self.sites), bits)
    }

    fn mask_of(&self, pattern: &Pattern) -> Result<(u64, u64)> {
        let mut mask = 0;
        let mut value = 0;
        for (p, s) in pattern {
            let k = self.sites.index_of(p).ok_or_else(|| {
                Error::invalid(format!("pattern site {p} is outside the model volume"))
            })?;
            mask |= 1 << k;
            if s.is_up() {
                value |= 1 << k;
            }
        }
        Ok((mask, value))
    }

    /// `p(x(F))`: total weight of the configurations extending `pattern`.
    pub fn exact_marginal(&self, pattern: &Pattern) -> Result<f64> {
        let (mask, value) = self.mask_of(pattern)?;
        Ok(self
            .weights
            .iter()
            .enumerate()
            .filter(|&(x, _)| x as u64 & mask == value)
            .map(|(_, w)| w)
            .sum())
    }

    /// `P(X(i) = s | X(F) = x(F))`.
    pub fn exact_conditional(&self, i: &LatticePoint, s: Spin, pattern: &Pattern) -> Result<f64> {
        if pattern.contains_key(i) {
            return Err(Error::invalid(format!(
                "site {i} is also in the conditioning pattern"
            )));
        }
        let mut joint = pattern.clone();
        joint.insert(i.clone(), s);
        Ok(self.exact_marginal(&joint)? / self.exact_marginal(pattern)?)
    }

    fn snap(&self, d: f64) -> f64 {
        if d.abs() < self.zero_tolerance {
            0.0
        } else {
            d
        }
    }

    fn ball(&self, i: &LatticePoint, radius: u32) -> Result<Ball> {
        Ball::new(i, radius, &self.sites)
    }

    /// `D(x(B^L(i)), j)` straight from marginals of the model.
    ///
    /// `x` must assign every site of `B^L(i)`; other sites are ignored.
    pub fn exact_d(
        &self,
        i: &LatticePoint,
        j: &LatticePoint,
        radius: u32,
        x: &SpinConfiguration,
    ) -> Result<f64> {
        let ball = self.ball(i, radius)?;
        ball.check_candidate(j)?;
        let full = x.restrict(ball.points.iter())?;
        let xi = full[i];
        let mut rest = full.clone();
        rest.remove(i);
        let mut rest_no_j = rest.clone();
        rest_no_j.remove(j);
        let weight = self.exact_marginal(&rest)?;
        let with_j = self.exact_conditional(i, xi, &rest)?;
        let without_j = self.exact_conditional(i, xi, &rest_no_j)?;
        Ok(self.snap((with_j - without_j).abs() * weight))
    }

    /// `max_x D(x, j)` for every `j ∈ B^L(i) \ {i}`, exhaustively over the ball.
    pub fn exact_max_d(&self, i: &LatticePoint, radius: u32) -> Result<Vec<(LatticePoint, f64)>> {
        let ball = self.ball(i, radius)?;
        let table = self.ball_table(&ball);
        Ok(ball
            .candidates()
            .map(|(j, bit)| {
                let best = (0..table.len() as u64)
                    .map(|x| self.snap(table_distance(&table, x, ball.center_bit, bit)))
                    .fold(0.0, f64::max);
                (j.clone(), best)
            })
            .collect())
    }

    /// `V^L(i) = { j : max_x D(x, j) > 2ε }`.
    pub fn exact_v_set(
        &self,
        i: &LatticePoint,
        radius: u32,
        epsilon: f64,
    ) -> Result<BTreeSet<LatticePoint>> {
        if !(epsilon >= 0.0) {
            return Err(Error::invalid(format!(
                "epsilon must be >= 0, got {epsilon}"
            )));
        }
        Ok(self
            .exact_max_d(i, radius)?
            .into_iter()
            .filter(|&(_, d)| d > 2.0 * epsilon)
            .map(|(j, _)| j)
            .collect())
    }

    /// Variance proxies `v` and `v1` over `B^L(i)`, with `j` ranging over `B^L(i) \ {i}`.
    pub fn exact_variance(&self, i: &LatticePoint, radius: u32) -> Result<VarianceProxies> {
        let ball = self.ball(i, radius)?;
        let t = self.ball_table(&ball);
        let bi = 1u64 << ball.center_bit;
        let mut v: f64 = 0.0;
        let mut v1: f64 = 0.0;
        for (_, bit) in ball.candidates() {
            let bj = 1u64 << bit;
            for x in 0..t.len() as u64 {
                let p_full = t[x as usize];
                let p_no_j = p_full + t[(x ^ bj) as usize];
                let p_no_ij = p_no_j + t[(x ^ bi) as usize] + t[(x ^ bi ^ bj) as usize];
                let cond = p_no_j / p_no_ij;
                v = v.max(1.0 - cond * p_no_j);
                v1 = v1.max(1.0 - cond * p_full);
            }
        }
        Ok(VarianceProxies { v, v1 })
    }

    /// Marginal law of the ball, indexed by local bits in the ball's site order.
    fn ball_table(&self, ball: &Ball) -> Vec<f64> {
        let idx: Vec<usize> = ball
            .points
            .iter()
            .map(|p| self.sites.index_of(p).expect("ball inside volume"))
            .collect();
        let mut table = vec![0.0; 1 << idx.len()];
        for (x, w) in self.weights.iter().enumerate() {
            let key = idx
                .iter()
                .enumerate()
                .fold(0usize, |acc, (b, &k)| acc | ((x >> k & 1) << b));
            table[key] += w;
        }
        table
    }

    /// Text dump: one line per configuration, `bits spins weight`.
    pub fn weight_table_text(&self) -> String {
        let mut out = String::new();
        let header: Vec<String> = self.sites.iter().map(ToString::to_string).collect();
        writeln!(out, "# sites {}", header.join(" ")).unwrap();
        writeln!(out, "# log_partition {}", self.log_partition).unwrap();
        for (x, w) in self.weights.iter().enumerate() {
            let spins: Vec<String> = self
                .configuration(x as u64)
                .spins()
                .iter()
                .map(ToString::to_string)
                .collect();
            writeln!(out, "{x} {} {w:e}", spins.join(" ")).unwrap();
        }
        out
    }
}

/// `|p(x_i | rest) - p(x_i | rest \ j)| p(rest)` from a ball marginal table.
fn table_distance(t: &[f64], x: u64, center_bit: usize, j_bit: usize) -> f64 {
    let bi = 1u64 << center_bit;
    let bj = 1u64 << j_bit;
    let full = t[x as usize];
    let no_i = full + t[(x ^ bi) as usize];
    let no_ij = no_i + t[(x ^ bj) as usize] + t[(x ^ bi ^ bj) as usize];
    let no_j = full + t[(x ^ bj) as usize];
    (full / no_i - no_j / no_ij).abs() * no_i
}

/// `B^L(i)` with local bit positions, checked to lie inside a volume.
pub(crate) struct Ball {
    pub points: Vec<LatticePoint>,
    pub center_bit: usize,
}

impl Ball {
    pub fn new(center: &LatticePoint, radius: u32, volume: &SiteSet) -> Result<Self> {
        if radius < 1 {
            return Err(Error::invalid("ball radius L must be >= 1"));
        }
        let points = LatticeBox::new(center.clone(), radius).points();
        if points.len() > 63 {
            return Err(Error::Capacity {
                sites: points.len(),
                cap: 63,
            });
        }
        if let Some(p) = points.iter().find(|p| !volume.contains(p)) {
            return Err(Error::invalid(format!(
                "site {p} of B^{radius}({center}) is outside the available sites"
            )));
        }
        let center_bit = points.len() / 2;
        debug_assert_eq!(&points[center_bit], center);
        Ok(Ball { points, center_bit })
    }

    pub fn bit_of(&self, p: &LatticePoint) -> Option<usize> {
        self.points.binary_search(p).ok()
    }

    pub fn check_candidate(&self, j: &LatticePoint) -> Result<usize> {
        match self.bit_of(j) {
            Some(b) if b != self.center_bit => Ok(b),
            Some(_) => Err(Error::invalid("candidate j must differ from the center")),
            None => Err(Error::invalid(format!("candidate {j} is outside the ball"))),
        }
    }

    /// `(j, bit)` for every `j ∈ B \ {center}`.
    pub fn candidates(&self) -> impl Iterator<Item = (&LatticePoint, usize)> + '_ {
        self.points
            .iter()
            .enumerate()
            .filter(move |&(b, _)| b != self.center_bit)
            .map(|(b, p)| (p, b))
    }
}
