//! Empirical measures, the weighted conditional distance `D̂_n` and the
//! interaction-neighborhood estimator.
//!
//! All statistics are computed from integer pattern counts. With `x` a
//! configuration of `B = B^L(i)` and `x^i`, `x^j` the flips at `i`, `j`,
//!
//! ```text
//! D̂_n(x, j) = |c(x) c(x, x^i, x^j, x^ij) - c(x, x^j) c(x, x^i)| / (c(x, x^i, x^j, x^ij) n)
//! ```
//!
//! where `c(..)` sums the counts of the listed ball patterns. `D̂_n` vanishes
//! unless the pattern on `B \ {i}` was observed, so maximising over observed
//! ball patterns gives the same value as maximising over all `2^|B|`.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{LatticeBox, LatticePoint};
use crate::oracle::Ball;
use crate::sample::Sample;
use crate::spin::{Pattern, Spin, SpinConfiguration};

/// Ball patterns with at most this many sites are counted in a dense table.
const DENSE_LIMIT: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct NeighborhoodEstimate {
    pub center: LatticePoint,
    pub radius: u32,
    pub threshold: f64,
    pub selected: BTreeSet<LatticePoint>,
    /// `max_x D̂_n(x, j)` for every `j ∈ B^L(center) \ {center}`.
    pub scores: BTreeMap<LatticePoint, f64>,
}

#[derive(Serialize, Deserialize)]
struct EstimateReport {
    center: LatticePoint,
    radius: u32,
    threshold: f64,
    selected: Vec<LatticePoint>,
    scores: Vec<ScoreRecord>,
}

#[derive(Serialize, Deserialize)]
struct ScoreRecord {
    site: LatticePoint,
    score: f64,
}

impl NeighborhoodEstimate {
    pub fn to_toml(&self) -> String {
        let report = EstimateReport {
            center: self.center.clone(),
            radius: self.radius,
            threshold: self.threshold,
            selected: self.selected.iter().cloned().collect(),
            scores: self
                .scores
                .iter()
                .map(|(site, &score)| ScoreRecord {
                    site: site.clone(),
                    score,
                })
                .collect(),
        };
        toml::to_string(&report).expect("estimate report serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let report: EstimateReport =
            toml::from_str(text).map_err(|e| Error::parse(0, e.message().to_string()))?;
        Ok(NeighborhoodEstimate {
            center: report.center,
            radius: report.radius,
            threshold: report.threshold,
            selected: report.selected.into_iter().collect(),
            scores: report
                .scores
                .into_iter()
                .map(|r| (r.site, r.score))
                .collect(),
        })
    }
}

fn column_of(sample: &Sample, p: &LatticePoint) -> Result<usize> {
    sample
        .sites()
        .index_of(p)
        .ok_or_else(|| Error::invalid(format!("site {p} is not observed in the sample")))
}

fn pattern_columns(sample: &Sample, pattern: &Pattern) -> Result<Vec<(usize, Spin)>> {
    pattern
        .iter()
        .map(|(p, &s)| Ok((column_of(sample, p)?, s)))
        .collect()
}

fn count_matching(sample: &Sample, columns: &[(usize, Spin)]) -> u64 {
    sample
        .rows()
        .filter(|row| columns.iter().all(|&(k, s)| row[k] == s))
        .count() as u64
}

/// `p̂_n(x(F))`: fraction of draws agreeing with `pattern`.
pub fn empirical_prob(sample: &Sample, pattern: &Pattern) -> Result<f64> {
    let columns = pattern_columns(sample, pattern)?;
    Ok(count_matching(sample, &columns) as f64 / sample.len() as f64)
}

/// `p̂_n(X(i) = s | x(F))`, defined as 0 when `x(F)` was never observed.
pub fn empirical_conditional(
    sample: &Sample,
    i: &LatticePoint,
    s: Spin,
    pattern: &Pattern,
) -> Result<f64> {
    if pattern.contains_key(i) {
        return Err(Error::invalid(format!(
            "site {i} is also in the conditioning pattern"
        )));
    }
    let mut columns = pattern_columns(sample, pattern)?;
    let below = count_matching(sample, &columns);
    if below == 0 {
        return Ok(0.0);
    }
    columns.push((column_of(sample, i)?, s));
    Ok(count_matching(sample, &columns) as f64 / below as f64)
}

/// `D̂_n` from the four pattern counts around `x` and the sample size.
fn distance_from_counts(full: u64, minus_i: u64, minus_j: u64, minus_ij: u64, n: u64) -> f64 {
    if minus_ij == 0 {
        return 0.0;
    }
    let lhs = full as u128 * minus_ij as u128;
    let rhs = minus_j as u128 * minus_i as u128;
    lhs.abs_diff(rhs) as f64 / (minus_ij as f64 * n as f64)
}

/// `D̂_n(x(B^L(i)), j)` by scanning the sample for each of the patterns involved.
///
/// `x` must assign every site of `B^L(i)`; other sites are ignored.
pub fn empirical_d(
    sample: &Sample,
    i: &LatticePoint,
    j: &LatticePoint,
    radius: u32,
    x: &SpinConfiguration,
) -> Result<f64> {
    let ball = Ball::new(i, radius, sample.sites())?;
    ball.check_candidate(j)?;
    let pattern = x.restrict(ball.points.iter())?;
    let full = pattern_columns(sample, &pattern)?;
    let ci = column_of(sample, i)?;
    let cj = column_of(sample, j)?;
    let count = |drop: &[usize]| {
        let cols: Vec<(usize, Spin)> = full
            .iter()
            .copied()
            .filter(|(k, _)| !drop.contains(k))
            .collect();
        count_matching(sample, &cols)
    };
    let n_full = count(&[]);
    let n_minus_i = count(&[ci]);
    let n_minus_j = count(&[cj]);
    let n_minus_ij = count(&[ci, cj]);
    Ok(distance_from_counts(
        n_full,
        n_minus_i,
        n_minus_j,
        n_minus_ij,
        sample.len() as u64,
    ))
}

/// Counts of the bit-packed restrictions of the draws to a ball.
struct BallCounts {
    n: u64,
    dense: Option<Vec<u64>>,
    sparse: HashMap<u64, u64>,
}

impl BallCounts {
    fn new(sample: &Sample, ball: &Ball) -> Result<Self> {
        let columns: Vec<usize> = ball
            .points
            .iter()
            .map(|p| column_of(sample, p))
            .collect::<Result<_>>()?;
        let mut dense = (columns.len() <= DENSE_LIMIT).then(|| vec![0u64; 1 << columns.len()]);
        let mut sparse = HashMap::new();
        for row in sample.rows() {
            let key = columns
                .iter()
                .enumerate()
                .fold(0u64, |acc, (b, &k)| acc | (u64::from(row[k].is_up()) << b));
            match dense.as_mut() {
                Some(table) => table[key as usize] += 1,
                None => *sparse.entry(key).or_insert(0) += 1,
            }
        }
        if let Some(table) = &dense {
            sparse = table
                .iter()
                .enumerate()
                .filter(|&(_, &c)| c > 0)
                .map(|(k, &c)| (k as u64, c))
                .collect();
        }
        Ok(BallCounts {
            n: sample.len() as u64,
            dense,
            sparse,
        })
    }

    fn get(&self, key: u64) -> u64 {
        match &self.dense {
            Some(table) => table[key as usize],
            None => self.sparse.get(&key).copied().unwrap_or(0),
        }
    }

    fn observed(&self) -> impl Iterator<Item = u64> + '_ {
        self.sparse.keys().copied()
    }

    fn distance(&self, x: u64, bi: u64, bj: u64) -> f64 {
        let full = self.get(x);
        let flip_i = self.get(x ^ bi);
        let flip_j = self.get(x ^ bj);
        let flip_ij = self.get(x ^ bi ^ bj);
        distance_from_counts(
            full,
            full + flip_i,
            full + flip_j,
            full + flip_i + flip_j + flip_ij,
            self.n,
        )
    }
}

fn validate_epsilon(epsilon: f64) -> Result<()> {
    if epsilon >= 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "epsilon must be >= 0, got {epsilon}"
        )))
    }
}

fn select(
    center: &LatticePoint,
    radius: u32,
    epsilon: f64,
    scores: BTreeMap<LatticePoint, f64>,
) -> NeighborhoodEstimate {
    let selected = scores
        .iter()
        .filter(|&(_, &s)| s > epsilon)
        .map(|(j, _)| j.clone())
        .collect();
    NeighborhoodEstimate {
        center: center.clone(),
        radius,
        threshold: epsilon,
        selected,
        scores,
    }
}

/// `V̂^L_n(i) = { j ∈ B^L(i) \ {i} : max_x D̂_n(x, j) > ε }`.
pub fn estimate_neighborhood(
    sample: &Sample,
    i: &LatticePoint,
    radius: u32,
    epsilon: f64,
) -> Result<NeighborhoodEstimate> {
    validate_epsilon(epsilon)?;
    let ball = Ball::new(i, radius, sample.sites())?;
    let counts = BallCounts::new(sample, &ball)?;
    let bi = 1u64 << ball.center_bit;
    let scores = ball
        .candidates()
        .map(|(j, bit)| {
            let bj = 1u64 << bit;
            let best = counts
                .observed()
                .map(|x| counts.distance(x, bi, bj))
                .fold(0.0, f64::max);
            (j.clone(), best)
        })
        .collect();
    Ok(select(i, radius, epsilon, scores))
}

/// Same as [`estimate_neighborhood`] but maximising over every ball
/// configuration. Exponential in `|B^L(i)|`; limited to 20 sites.
pub fn estimate_neighborhood_exhaustive(
    sample: &Sample,
    i: &LatticePoint,
    radius: u32,
    epsilon: f64,
) -> Result<NeighborhoodEstimate> {
    validate_epsilon(epsilon)?;
    let ball = Ball::new(i, radius, sample.sites())?;
    if ball.points.len() > DENSE_LIMIT {
        return Err(Error::Capacity {
            sites: ball.points.len(),
            cap: DENSE_LIMIT,
        });
    }
    let counts = BallCounts::new(sample, &ball)?;
    let bi = 1u64 << ball.center_bit;
    let scores = ball
        .candidates()
        .map(|(j, bit)| {
            let bj = 1u64 << bit;
            let best = (0..1u64 << ball.points.len())
                .map(|x| counts.distance(x, bi, bj))
                .fold(0.0, f64::max);
            (j.clone(), best)
        })
        .collect();
    Ok(select(i, radius, epsilon, scores))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleKind {
    /// `C sqrt((2L)^d / n ((1 + e²)/e²)^(-(2L)^d))`
    Theoretical,
    /// `C / sqrt(n)`
    Simple,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSchedule {
    pub kind: ScheduleKind,
    #[serde(rename = "C")]
    pub c: f64,
    pub dimension: usize,
}

impl ThresholdSchedule {
    pub fn new(kind: ScheduleKind, c: f64, dimension: usize) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::invalid(format!(
                "threshold constant C must be positive, got {c}"
            )));
        }
        if dimension == 0 {
            return Err(Error::invalid("dimension must be >= 1"));
        }
        Ok(ThresholdSchedule { kind, c, dimension })
    }

    pub fn simple(c: f64) -> Result<Self> {
        Self::new(ScheduleKind::Simple, c, 1)
    }

    pub fn theoretical(c: f64, dimension: usize) -> Result<Self> {
        Self::new(ScheduleKind::Theoretical, c, dimension)
    }

    pub fn threshold(&self, radius: u32, n: u64) -> Result<f64> {
        threshold(self, radius, n)
    }
}

/// The threshold `ε` prescribed by `schedule` for radius `radius` and `n` draws.
pub fn threshold(schedule: &ThresholdSchedule, radius: u32, n: u64) -> Result<f64> {
    if !(schedule.c > 0.0) {
        return Err(Error::invalid("threshold constant C must be positive"));
    }
    if n < 1 {
        return Err(Error::invalid("sample size must be >= 1"));
    }
    let n = n as f64;
    match schedule.kind {
        ScheduleKind::Simple => Ok(schedule.c / n.sqrt()),
        ScheduleKind::Theoretical => {
            if radius < 1 {
                return Err(Error::invalid("radius L must be >= 1"));
            }
            let k = (2.0 * radius as f64).powi(schedule.dimension as i32);
            let e2 = 2f64.exp();
            let decay = ((1.0 + e2) / e2).powf(-k);
            Ok(schedule.c * (k / n * decay).sqrt())
        }
    }
}

/// `L_n = max(1, floor(½ (0.79 ln n)^(1/d)))`.
pub fn scale_l(n: u64, dimension: usize) -> Result<u32> {
    if n < 2 {
        return Err(Error::invalid(format!("scale_L needs n >= 2, got {n}")));
    }
    if dimension == 0 {
        return Err(Error::invalid("dimension must be >= 1"));
    }
    let raw = 0.5 * (0.79 * (n as f64).ln()).powf(1.0 / dimension as f64);
    Ok((raw.floor() as u32).max(1))
}

/// Every configuration of `B^radius(center)`, in the ball's bit order.
pub fn ball_configurations(
    center: &LatticePoint,
    radius: u32,
) -> impl Iterator<Item = SpinConfiguration> {
    let sites = std::sync::Arc::new(LatticeBox::new(center.clone(), radius).sites());
    let m = sites.len();
    (0..1u64 << m).map(move |x| SpinConfiguration::from_bits(std::sync::Arc::clone(&sites), x))
}
