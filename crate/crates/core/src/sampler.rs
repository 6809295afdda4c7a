//! Coupled single-site Gibbs dynamics.
//!
//! Two chains share the site choice `I_t` and update that site jointly with a
//! maximal coupling of their two conditional laws. [`coupled_gibbs_sample`]
//! starts the chains from all-up and all-down under the same potential and
//! returns the common configuration at the first time they agree;
//! [`coupled_truncation_chains`] runs one chain under `J` and one under `J^L`
//! and records where they disagree.

use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lattice::{LatticePoint, SiteSet};
use crate::potential::PairwisePotential;
use crate::rng::stream_rng;
use crate::sample::Sample;
use crate::spin::{Spin, SpinConfiguration};

pub const DEFAULT_STEP_CAP: u64 = 100_000_000;

/// Outcome order used to turn one uniform variate into a joint update.
pub const JOINT_OUTCOMES: [(Spin, Spin); 4] = [
    (Spin::Up, Spin::Up),
    (Spin::Down, Spin::Down),
    (Spin::Up, Spin::Down),
    (Spin::Down, Spin::Up),
];

/// `1 / (1 + exp(-2 s h))` for local field `h`.
#[inline]
pub fn logistic(s: Spin, field: f64) -> f64 {
    1.0 / (1.0 + (-2.0 * s.as_f64() * field).exp())
}

/// Single-site conditional `p_j(s | y)` with free boundary: the sum runs over
/// the sites of `neighbors` other than `j`.
pub fn local_spec(
    potential: &PairwisePotential,
    j: &LatticePoint,
    s: Spin,
    neighbors: &SpinConfiguration,
) -> f64 {
    let field: f64 = neighbors
        .sites()
        .iter()
        .zip(neighbors.spins())
        .filter(|(k, _)| *k != j)
        .map(|(k, y)| potential.coupling(j, k) * y.as_f64())
        .sum();
    logistic(s, field)
}

/// Masses of the joint update over [`JOINT_OUTCOMES`], given the probabilities
/// that the first and second chain set the site up.
///
/// Diagonal outcomes get `min{p(s|y), p'(s|y')}`, off-diagonal `(s, -s)` gets
/// `max{p(s|y) - p'(s|y'), 0}`.
pub fn joint_update_law(first_up: f64, second_up: f64) -> [f64; 4] {
    let (a, b) = (first_up, second_up);
    [
        a.min(b),
        (1.0 - a).min(1.0 - b),
        (a - b).max(0.0),
        ((1.0 - a) - (1.0 - b)).max(0.0),
    ]
}

#[inline]
fn draw_joint(first_up: f64, second_up: f64, u: f64) -> (i8, i8) {
    let masses = joint_update_law(first_up, second_up);
    let mut acc = 0.0;
    for (mass, (s, t)) in masses.iter().zip(JOINT_OUTCOMES) {
        acc += mass;
        if u < acc {
            return (s.value(), t.value());
        }
    }
    // u within rounding of 1: fall back to the last outcome with mass
    let k = masses.iter().rposition(|&m| m > 0.0).unwrap_or(0);
    let (s, t) = JOINT_OUTCOMES[k];
    (s.value(), t.value())
}

/// Couplings restricted to a volume, in CSR form over volume indices.
#[derive(Debug, Clone)]
struct LocalFields {
    offsets: Vec<usize>,
    targets: Vec<usize>,
    weights: Vec<f64>,
}

impl LocalFields {
    fn new(potential: &PairwisePotential, volume: &SiteSet) -> Self {
        let pv = potential.volume();
        let mut offsets = Vec::with_capacity(volume.len() + 1);
        let mut targets = Vec::new();
        let mut weights = Vec::new();
        offsets.push(0);
        for p in volume.iter() {
            if let Some(k) = pv.index_of(p) {
                for &(m, v) in potential.row(k) {
                    if let Some(t) = volume.index_of(pv.point(m)) {
                        targets.push(t);
                        weights.push(v);
                    }
                }
            }
            offsets.push(targets.len());
        }
        LocalFields {
            offsets,
            targets,
            weights,
        }
    }

    #[inline]
    fn field(&self, j: usize, spins: &[i8]) -> f64 {
        let (lo, hi) = (self.offsets[j], self.offsets[j + 1]);
        self.targets[lo..hi]
            .iter()
            .zip(&self.weights[lo..hi])
            .map(|(&k, &w)| w * f64::from(spins[k]))
            .sum()
    }

    #[inline]
    fn up_probability(&self, j: usize, spins: &[i8]) -> f64 {
        logistic(Spin::Up, self.field(j, spins))
    }
}

fn check_volume(volume: &SiteSet, potential: &PairwisePotential) -> Result<()> {
    if volume.is_empty() {
        return Err(Error::invalid("sampling volume is empty"));
    }
    if volume.dimension() != Some(potential.dimension()) {
        return Err(Error::invalid("volume and potential dimensions differ"));
    }
    Ok(())
}

/// A configuration returned at coalescence, with the number of steps taken.
#[derive(Debug, Clone, PartialEq)]
pub struct CoalescedDraw {
    pub configuration: SpinConfiguration,
    pub steps: u64,
}

/// Coupled Gibbs sampler for one potential on one volume.
#[derive(Debug, Clone)]
pub struct GibbsSampler {
    volume: Arc<SiteSet>,
    fields: LocalFields,
    step_cap: u64,
}

impl GibbsSampler {
    pub fn new(potential: &PairwisePotential, volume: &SiteSet, step_cap: u64) -> Result<Self> {
        check_volume(volume, potential)?;
        if step_cap < 1 {
            return Err(Error::invalid("step cap must be >= 1"));
        }
        Ok(GibbsSampler {
            volume: Arc::new(volume.clone()),
            fields: LocalFields::new(potential, volume),
            step_cap,
        })
    }

    pub fn volume(&self) -> &Arc<SiteSet> {
        &self.volume
    }

    /// Runs the all-up and all-down chains until they agree everywhere.
    pub fn coalesce<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(Vec<i8>, u64)> {
        let m = self.volume.len();
        let mut upper = vec![1i8; m];
        let mut lower = vec![-1i8; m];
        let mut disagreements = m;
        for t in 1..=self.step_cap {
            let j = rng.random_range(0..m);
            let a = self.fields.up_probability(j, &upper);
            let b = self.fields.up_probability(j, &lower);
            let (s, s2) = draw_joint(a, b, rng.random());
            let before = upper[j] != lower[j];
            upper[j] = s;
            lower[j] = s2;
            let after = s != s2;
            match (before, after) {
                (true, false) => disagreements -= 1,
                (false, true) => disagreements += 1,
                _ => {}
            }
            if disagreements == 0 {
                return Ok((upper, t));
            }
        }
        Err(Error::CoalescenceTimeout {
            steps: self.step_cap,
        })
    }

    /// Draw number `k` of a sample seeded with `seed`.
    pub fn draw(&self, seed: u64, k: u64) -> Result<CoalescedDraw> {
        let (spins, steps) = self.coalesce(&mut stream_rng(seed, k))?;
        let spins = spins
            .into_iter()
            .map(|v| if v > 0 { Spin::Up } else { Spin::Down })
            .collect();
        Ok(CoalescedDraw {
            configuration: SpinConfiguration::new(Arc::clone(&self.volume), spins)?,
            steps,
        })
    }

    /// `n` draws on streams `(seed, 0..n)` plus the total number of steps.
    pub fn sample(&self, n: usize, seed: u64) -> Result<(Sample, u64)> {
        if n < 1 {
            return Err(Error::invalid("sample size must be >= 1"));
        }
        let draws = (0..n as u64)
            .into_par_iter()
            .map(|k| self.draw(seed, k))
            .collect::<Result<Vec<_>>>()?;
        let steps = draws.iter().map(|d| d.steps).sum();
        let sample = Sample::from_rows(
            Arc::clone(&self.volume),
            draws.into_iter().map(|d| d.configuration.spins().to_vec()),
            seed,
            self.step_cap,
        )?;
        Ok((sample, steps))
    }
}

/// One coalesced draw on stream `(seed, 0)`.
pub fn coupled_gibbs_sample(
    potential: &PairwisePotential,
    volume: &SiteSet,
    seed: u64,
    step_cap: u64,
) -> Result<CoalescedDraw> {
    GibbsSampler::new(potential, volume, step_cap)?.draw(seed, 0)
}

/// `n` independent coalesced draws; draw `k` uses stream `(seed, k)`.
pub fn generate_sample(
    potential: &PairwisePotential,
    volume: &SiteSet,
    n: usize,
    seed: u64,
    step_cap: u64,
) -> Result<Sample> {
    Ok(GibbsSampler::new(potential, volume, step_cap)?
        .sample(n, seed)?
        .0)
}

const COUPLING_BATCHES: u64 = 50;

/// Per-site disagreement record of the full/truncated coupled chains.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingTrace {
    pub sites: Arc<SiteSet>,
    /// Sweeps (after burn-in) that ended with the chains disagreeing at each site.
    pub discrepancy_counts: Vec<u64>,
    pub recorded_sweeps: u64,
    pub burn_in_sweeps: u64,
    /// `batch_counts[b][k]`: disagreements at site `k` within batch `b` of
    /// consecutive recorded sweeps.
    pub batch_counts: Vec<Vec<u64>>,
    pub batch_sizes: Vec<u64>,
}

impl CouplingTrace {
    pub fn rate(&self, k: usize) -> f64 {
        self.discrepancy_counts[k] as f64 / self.recorded_sweeps as f64
    }

    pub fn rate_at(&self, p: &LatticePoint) -> Option<f64> {
        self.sites.index_of(p).map(|k| self.rate(k))
    }

    /// Batch-means Monte Carlo standard error of [`rate`](Self::rate).
    pub fn standard_error(&self, k: usize) -> f64 {
        let rates: Vec<f64> = self
            .batch_counts
            .iter()
            .zip(&self.batch_sizes)
            .map(|(c, &s)| c[k] as f64 / s as f64)
            .collect();
        let b = rates.len() as f64;
        if rates.len() < 2 {
            let p = self.rate(k);
            return (p * (1.0 - p) / self.recorded_sweeps as f64).sqrt();
        }
        let mean = rates.iter().sum::<f64>() / b;
        let var = rates.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (b - 1.0);
        (var / b).sqrt()
    }
}

/// Runs a chain under `J` and one under `J^L` on `volume`, both started from
/// all-up, with shared site choices and the maximal joint update. One sweep is
/// `|volume|` single-site steps; disagreement is recorded once per sweep after
/// `burn_in` sweeps.
pub fn coupled_truncation_chains(
    potential: &PairwisePotential,
    radius: u32,
    volume: &SiteSet,
    burn_in: u64,
    sweeps: u64,
    seed: u64,
) -> Result<CouplingTrace> {
    check_volume(volume, potential)?;
    if sweeps < 1 {
        return Err(Error::invalid("need at least one recorded sweep"));
    }
    let truncated = potential.truncate(radius)?;
    let full_fields = LocalFields::new(potential, volume);
    let trunc_fields = LocalFields::new(&truncated, volume);
    let m = volume.len();
    let mut rng = stream_rng(seed, 0);
    let mut full = vec![1i8; m];
    let mut trunc = vec![1i8; m];

    let batches = COUPLING_BATCHES.min(sweeps);
    let mut batch_sizes = vec![sweeps / batches; batches as usize];
    for size in batch_sizes.iter_mut().take((sweeps % batches) as usize) {
        *size += 1;
    }
    let mut batch_counts = vec![vec![0u64; m]; batches as usize];
    let mut counts = vec![0u64; m];

    let sweep = |full: &mut [i8], trunc: &mut [i8], rng: &mut rand_chacha::ChaCha8Rng| {
        for _ in 0..m {
            let j = rng.random_range(0..m);
            let a = full_fields.up_probability(j, full);
            let b = trunc_fields.up_probability(j, trunc);
            let (s, t) = draw_joint(a, b, rng.random());
            full[j] = s;
            trunc[j] = t;
        }
    };

    for _ in 0..burn_in {
        sweep(&mut full, &mut trunc, &mut rng);
    }
    for (batch, &size) in batch_sizes.iter().enumerate() {
        for _ in 0..size {
            sweep(&mut full, &mut trunc, &mut rng);
            for k in 0..m {
                if full[k] != trunc[k] {
                    counts[k] += 1;
                    batch_counts[batch][k] += 1;
                }
            }
        }
    }
    Ok(CouplingTrace {
        sites: Arc::new(volume.clone()),
        discrepancy_counts: counts,
        recorded_sweeps: sweeps,
        burn_in_sweeps: burn_in,
        batch_counts,
        batch_sizes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::LatticeBox;
    use approx::assert_relative_eq;

    fn pt(c: &[i32]) -> LatticePoint {
        LatticePoint::new(c.to_vec())
    }

    #[test]
    fn local_spec_of_zero_potential_is_half() {
        let v = LatticeBox::centered(2, 1).sites();
        let j = PairwisePotential::zero(v.clone());
        let y = SpinConfiguration::uniform(Arc::new(v), Spin::Up);
        for s in Spin::BOTH {
            assert_eq!(local_spec(&j, &pt(&[0, 0]), s, &y), 0.5);
        }
    }

    #[test]
    fn local_spec_single_neighbor() {
        let v = LatticeBox::centered(1, 1).sites();
        let j = PairwisePotential::new(v.clone(), [(pt(&[0]), pt(&[1]), 0.2)]).unwrap();
        let y = SpinConfiguration::uniform(Arc::new(v), Spin::Up);
        let p = local_spec(&j, &pt(&[0]), Spin::Up, &y);
        assert_relative_eq!(p, 0.598687660112452, epsilon = 1e-12);
        assert_relative_eq!(
            p + local_spec(&j, &pt(&[0]), Spin::Down, &y),
            1.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn local_spec_ignores_own_value_and_flips() {
        let v = LatticeBox::centered(2, 1).sites();
        let j = PairwisePotential::nearest_neighbor(v.clone(), 0.3).unwrap();
        let mut y = SpinConfiguration::from_bits(Arc::new(v), 0b1_0110_1001);
        let c = pt(&[0, 0]);
        let p = local_spec(&j, &c, Spin::Up, &y);
        assert_eq!(p, local_spec(&j, &c, Spin::Down, &y.flipped()));
        let own = y.get(&c).unwrap();
        y.set(&c, own.flip()).unwrap();
        assert_eq!(p, local_spec(&j, &c, Spin::Up, &y));
    }

    #[test]
    fn joint_law_edge_cases() {
        assert_eq!(joint_update_law(0.3, 0.3), [0.3, 0.7, 0.0, 0.0]);
        let m = joint_update_law(0.9, 0.2);
        assert_relative_eq!(m[0], 0.2);
        assert_relative_eq!(m[1], 0.1);
        assert_relative_eq!(m[2], 0.7);
        assert_eq!(m[3], 0.0);
        assert_eq!(draw_joint(1.0, 1.0, 0.999_999_999), (1, 1));
        assert_eq!(draw_joint(0.0, 0.0, 0.0), (-1, -1));
    }

    #[test]
    fn single_site_coalesces_at_first_step() {
        let v = LatticeBox::centered(2, 0).sites();
        let j = PairwisePotential::zero(v.clone());
        for seed in 0..20 {
            assert_eq!(coupled_gibbs_sample(&j, &v, seed, 10).unwrap().steps, 1);
        }
    }

    #[test]
    fn zero_potential_coalesces_after_every_site_was_chosen() {
        // With identical update laws the joint update is always diagonal, so
        // coalescence is exactly the coupon-collector time of the site choices.
        let v = LatticeBox::centered(2, 1).sites();
        let j = PairwisePotential::zero(v.clone());
        let sampler = GibbsSampler::new(&j, &v, 10_000).unwrap();
        for seed in 0..50 {
            let mut rng = stream_rng(seed, 0);
            let (_, steps) = sampler.coalesce(&mut rng).unwrap();
            let mut replay = stream_rng(seed, 0);
            let mut seen = [false; 9];
            let mut first_cover = 0;
            for t in 1..=steps {
                seen[replay.random_range(0..9)] = true;
                let _: f64 = replay.random();
                if first_cover == 0 && seen.iter().all(|&s| s) {
                    first_cover = t;
                }
            }
            assert_eq!(first_cover, steps);
        }
    }

    #[test]
    fn timeout_is_reported() {
        let v = LatticeBox::centered(2, 2).sites();
        let j = PairwisePotential::nearest_neighbor(v.clone(), 0.2).unwrap();
        match coupled_gibbs_sample(&j, &v, 3, 5) {
            Err(Error::CoalescenceTimeout { steps }) => assert_eq!(steps, 5),
            other => panic!("expected timeout, got {other:?}"),
        }
        assert!(coupled_gibbs_sample(&j, &v, 3, 0).is_err());
    }

    #[test]
    fn samples_are_deterministic() {
        let v = LatticeBox::centered(2, 1).sites();
        let j = PairwisePotential::nearest_neighbor(v.clone(), 0.2).unwrap();
        let a = generate_sample(&j, &v, 50, 11, DEFAULT_STEP_CAP).unwrap();
        let b = generate_sample(&j, &v, 50, 11, DEFAULT_STEP_CAP).unwrap();
        assert_eq!(a.to_text(), b.to_text());
        assert_eq!(a.len(), 50);
        let c = generate_sample(&j, &v, 50, 12, DEFAULT_STEP_CAP).unwrap();
        assert_ne!(a, c);
        let one = generate_sample(&j, &v, 1, 11, DEFAULT_STEP_CAP).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one.row(0), a.row(0));
        assert!(generate_sample(&j, &v, 0, 11, DEFAULT_STEP_CAP).is_err());
    }

    #[test]
    fn truncation_beyond_range_never_disagrees() {
        let v = LatticeBox::centered(2, 2).sites();
        let j = PairwisePotential::nearest_neighbor(v.clone(), 0.3).unwrap();
        let trace = coupled_truncation_chains(&j, 1, &v, 10, 200, 5).unwrap();
        assert!(trace.discrepancy_counts.iter().all(|&c| c == 0));
        let zero = PairwisePotential::zero(v.clone());
        let trace = coupled_truncation_chains(&zero, 1, &v, 10, 200, 5).unwrap();
        assert!(trace.discrepancy_counts.iter().all(|&c| c == 0));
        assert_eq!(trace.batch_sizes.iter().sum::<u64>(), 200);
    }

    #[test]
    fn long_edges_create_disagreement() {
        let v = LatticeBox::centered(2, 2).sites();
        let j = PairwisePotential::new(
            v.clone(),
            [
                (pt(&[0, 0]), pt(&[2, 2]), 0.6),
                (pt(&[0, 0]), pt(&[0, 1]), 0.2),
            ],
        )
        .unwrap();
        let trace = coupled_truncation_chains(&j, 1, &v, 100, 2000, 9).unwrap();
        let k = v.index_of(&pt(&[0, 0])).unwrap();
        assert!(trace.rate(k) > 0.0);
        assert!(trace.rate(k) <= 1.0);
        assert!(trace.standard_error(k) > 0.0);
        assert!(coupled_truncation_chains(&j, 0, &v, 0, 1, 0).is_err());
        assert!(coupled_truncation_chains(&j, 1, &v, 0, 0, 0).is_err());
    }
}
