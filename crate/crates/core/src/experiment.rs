//! Replicated identification experiments: draw samples from a (random or
//! given) interaction graph, run the neighborhood estimator on a grid of sample
//! sizes and threshold constants, and tally false positives and negatives.
//!
//! Configuration is TOML; every field has a default.
//!
//! ```toml
//! dimension = 2
//! graph_radius = 3          # the graph lives on B^3(0)
//! center = [0, 0]
//! radius = 1                # observation window B^1(center)
//! edge_prob = 0.1
//! degree_cap = 4
//! coupling = 0.2
//! replications = 2000
//! master_seed = 0
//! threads = 0               # 0: all available cores
//! truth = "graph"           # or "population"
//!
//! [sample_sizes]            # or: values = [500, 1500, 3000]
//! start = 500
//! step = 250
//! count = 39
//!
//! [threshold]
//! kind = "simple"           # or "theoretical"
//! C = [0.06, 0.07, 0.08, 0.09]
//! ```
//!
//! Optional keys: `potential` (path to a potential file used instead of a
//! random graph, relative to the config file), `resample_graph` (fresh graph
//! per trial), `step_cap`, `oracle_cap`.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{misid_bound_finite, misid_bound_infinite, v_analytic_bounds, BoundReport};
use crate::error::{Error, Result};
use crate::estimator::{
    estimate_neighborhood, NeighborhoodEstimate, ScheduleKind, ThresholdSchedule,
};
use crate::lattice::{LatticeBox, LatticePoint};
use crate::oracle::{ExactModel, DEFAULT_ENUMERATION_CAP};
use crate::potential::{random_interaction_graph, PairwisePotential};
use crate::rng::derive_seed;
use crate::sampler::{GibbsSampler, DEFAULT_STEP_CAP};
use crate::stats::wilson_interval;

/// Environment variable capping the worker count.
pub const THREADS_ENV: &str = "ISING_PAIRS_THREADS";

pub const INTERVAL_CONFIDENCE: f64 = 0.95;

pub const CSV_HEADER: &str =
    "n,C,fp_rate,fp_lo,fp_hi,fn_rate,fn_lo,fn_hi,bound_finite,bound_infinite";

const GRAPH_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum TruthMode {
    /// Interacting sites inside the window: `G(i) ∩ B^L(i)`.
    #[default]
    Graph,
    /// The population neighborhood of the truncated model, by enumeration.
    Population,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SampleSizes {
    Arithmetic { start: u64, step: u64, count: u64 },
    Values { values: Vec<u64> },
}

impl SampleSizes {
    pub fn values(&self) -> Vec<u64> {
        match self {
            SampleSizes::Arithmetic { start, step, count } => {
                (0..*count).map(|k| start + k * step).collect()
            }
            SampleSizes::Values { values } => values.clone(),
        }
    }
}

impl Default for SampleSizes {
    fn default() -> Self {
        SampleSizes::Arithmetic {
            start: 500,
            step: 250,
            count: 39,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdConfig {
    #[serde(default = "default_kind")]
    pub kind: ScheduleKind,
    #[serde(rename = "C", default = "default_c_grid")]
    pub c: Vec<f64>,
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        ThresholdConfig {
            kind: default_kind(),
            c: default_c_grid(),
        }
    }
}

fn default_kind() -> ScheduleKind {
    ScheduleKind::Simple
}

fn default_c_grid() -> Vec<f64> {
    vec![0.06, 0.07, 0.08, 0.09]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub dimension: usize,
    pub graph_radius: u32,
    pub center: Option<LatticePoint>,
    pub radius: u32,
    pub edge_prob: f64,
    pub degree_cap: usize,
    pub coupling: f64,
    pub sample_sizes: SampleSizes,
    pub threshold: ThresholdConfig,
    pub replications: u64,
    pub master_seed: u64,
    pub threads: usize,
    pub resample_graph: bool,
    pub truth: TruthMode,
    pub step_cap: u64,
    pub oracle_cap: usize,
    pub potential: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            dimension: 2,
            graph_radius: 3,
            center: None,
            radius: 1,
            edge_prob: 0.1,
            degree_cap: 4,
            coupling: 0.2,
            sample_sizes: SampleSizes::default(),
            threshold: ThresholdConfig::default(),
            replications: 2000,
            master_seed: 0,
            threads: 0,
            resample_graph: false,
            truth: TruthMode::Graph,
            step_cap: DEFAULT_STEP_CAP,
            oracle_cap: DEFAULT_ENUMERATION_CAP,
            potential: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: ExperimentConfig = toml::from_str(text).map_err(|e| {
            let line = e
                .span()
                .map(|s| text[..s.start].matches('\n').count() + 1)
                .unwrap_or(0);
            Error::parse(line, e.message().to_string())
        })?;
        config.validate()?;
        Ok(config)
    }

    /// Reads a config file; a relative `potential` path is resolved against
    /// the directory of the config file.
    pub fn read(path: &Path) -> Result<Self> {
        let mut config = Self::from_toml(&std::fs::read_to_string(path)?)?;
        if let Some(p) = &config.potential {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    config.potential = Some(dir.join(p));
                }
            }
        }
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn center(&self) -> LatticePoint {
        self.center
            .clone()
            .unwrap_or_else(|| LatticePoint::origin(self.dimension))
    }

    pub fn schedules(&self) -> Result<Vec<ThresholdSchedule>> {
        self.threshold
            .c
            .iter()
            .map(|&c| ThresholdSchedule::new(self.threshold.kind, c, self.dimension))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.dimension == 0 {
            return Err(Error::invalid("dimension must be >= 1"));
        }
        if self.center().dimension() != self.dimension {
            return Err(Error::invalid("center dimension differs from `dimension`"));
        }
        if self.radius < 1 {
            return Err(Error::invalid("radius must be >= 1"));
        }
        if self.replications < 1 {
            return Err(Error::invalid("replications must be >= 1"));
        }
        let sizes = self.sample_sizes.values();
        if sizes.is_empty() {
            return Err(Error::invalid("sample-size grid is empty"));
        }
        if sizes[0] == 0 || sizes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid(
                "sample sizes must be positive and strictly increasing",
            ));
        }
        if self.threshold.c.is_empty() {
            return Err(Error::invalid("threshold C grid is empty"));
        }
        self.schedules()?;
        if self.step_cap < 1 {
            return Err(Error::invalid("step_cap must be >= 1"));
        }
        if self.potential.is_some() && self.resample_graph {
            return Err(Error::invalid(
                "resample_graph needs a random graph, not a potential file",
            ));
        }
        if !(0.0..=1.0).contains(&self.edge_prob) {
            return Err(Error::invalid("edge_prob must lie in [0, 1]"));
        }
        if !self.coupling.is_finite() {
            return Err(Error::invalid("coupling must be finite"));
        }
        Ok(())
    }

    fn graph(&self, seed: u64) -> Result<PairwisePotential> {
        random_interaction_graph(
            &LatticeBox::centered(self.dimension, self.graph_radius),
            self.edge_prob,
            self.degree_cap,
            self.coupling,
            seed,
        )
    }

    /// The potential used when the graph is not resampled.
    pub fn fixed_potential(&self) -> Result<PairwisePotential> {
        match &self.potential {
            Some(path) => {
                let p = PairwisePotential::read(path)?;
                if p.dimension() != self.dimension {
                    return Err(Error::invalid(
                        "potential file dimension differs from config",
                    ));
                }
                Ok(p)
            }
            None => self.graph(derive_seed(self.master_seed, &[GRAPH_STREAM])),
        }
    }

    /// Worker count after applying the environment cap.
    pub fn worker_count(&self) -> usize {
        let available = std::thread::available_parallelism().map_or(1, |n| n.get());
        let requested = if self.threads == 0 {
            available
        } else {
            self.threads
        };
        let cap = std::env::var(THREADS_ENV)
            .ok()
            .and_then(|v| v.trim().parse::<usize>().ok())
            .filter(|&c| c > 0)
            .unwrap_or(usize::MAX);
        requested.min(cap).max(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialOutcome {
    pub false_positive: bool,
    pub false_negative: bool,
}

/// False positive: something selected outside `truth`; false negative:
/// something in `truth` missed.
pub fn classify_trial(
    estimate: &NeighborhoodEstimate,
    truth: &BTreeSet<LatticePoint>,
) -> TrialOutcome {
    debug_assert!(truth
        .iter()
        .all(|j| j != &estimate.center && j.distance(&estimate.center) <= estimate.radius));
    TrialOutcome {
        false_positive: !estimate.selected.is_subset(truth),
        false_negative: !truth.is_subset(&estimate.selected),
    }
}

/// Reference neighborhood of `i` within `B^L(i)`.
///
/// `epsilon` only matters in population mode, where the truncated model
/// `J^L` on the whole volume of `J` is enumerated.
pub fn truth_set(
    potential: &PairwisePotential,
    i: &LatticePoint,
    radius: u32,
    mode: TruthMode,
    epsilon: f64,
) -> Result<BTreeSet<LatticePoint>> {
    truth_set_with_cap(potential, i, radius, mode, epsilon, DEFAULT_ENUMERATION_CAP)
}

pub fn truth_set_with_cap(
    potential: &PairwisePotential,
    i: &LatticePoint,
    radius: u32,
    mode: TruthMode,
    epsilon: f64,
    cap: usize,
) -> Result<BTreeSet<LatticePoint>> {
    match mode {
        TruthMode::Graph => {
            if radius < 1 {
                return Err(Error::invalid("radius must be >= 1"));
            }
            Ok(potential
                .interaction_neighborhood(i)?
                .into_iter()
                .filter(|j| j.distance(i) <= radius)
                .collect())
        }
        TruthMode::Population => {
            let truncated = potential.truncate(radius)?;
            ExactModel::with_cap(&truncated, potential.volume(), cap)?
                .exact_v_set(i, radius, epsilon)
        }
    }
}

/// Where the variance proxy fed to the bounds came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceSource {
    Exact,
    AnalyticUpper,
}

/// Per-graph quantities shared by every trial on that graph.
struct Model {
    potential: PairwisePotential,
    sampler: GibbsSampler,
    oracle: Option<ExactModel>,
    r: f64,
    tail: f64,
    v: Option<(f64, VarianceSource)>,
}

impl Model {
    fn new(potential: PairwisePotential, config: &ExperimentConfig) -> Result<Self> {
        let center = config.center();
        let window = LatticeBox::new(center.clone(), config.radius);
        if let Some(p) = window
            .points()
            .iter()
            .find(|p| !potential.volume().contains(p))
        {
            return Err(Error::invalid(format!(
                "observation window site {p} lies outside the graph volume"
            )));
        }
        let sampler = GibbsSampler::new(&potential, potential.volume(), config.step_cap)?;
        let r = potential.dobrushin_coefficient().r;
        let tail = potential.tail_sum(config.radius)?;
        let oracle = if potential.volume().len() <= config.oracle_cap.min(63) {
            Some(ExactModel::with_cap(
                &potential.truncate(config.radius)?,
                potential.volume(),
                config.oracle_cap,
            )?)
        } else {
            None
        };
        let v = match &oracle {
            Some(m) => Some((
                m.exact_variance(&center, config.radius)?.v,
                VarianceSource::Exact,
            )),
            None if r < 1.0 => Some((
                v_analytic_bounds(r, config.radius, config.dimension)?.1,
                VarianceSource::AnalyticUpper,
            )),
            None => None,
        };
        Ok(Model {
            potential,
            sampler,
            oracle,
            r,
            tail,
            v,
        })
    }

    fn truth(&self, config: &ExperimentConfig, epsilon: f64) -> Result<BTreeSet<LatticePoint>> {
        let center = config.center();
        match config.truth {
            TruthMode::Graph => truth_set(
                &self.potential,
                &center,
                config.radius,
                TruthMode::Graph,
                0.0,
            ),
            TruthMode::Population => match &self.oracle {
                Some(m) => m.exact_v_set(&center, config.radius, epsilon),
                None => Err(Error::Capacity {
                    sites: self.potential.volume().len(),
                    cap: config.oracle_cap,
                }),
            },
        }
    }

    fn bounds(
        &self,
        config: &ExperimentConfig,
        n: u64,
        epsilon: f64,
    ) -> Result<(Option<BoundReport>, Option<BoundReport>)> {
        let Some((v, _)) = self.v else {
            return Ok((None, None));
        };
        if !(epsilon > 0.0) || !(v > 0.0) {
            return Ok((None, None));
        }
        let finite = misid_bound_finite(n, epsilon, v, config.radius, config.dimension)?;
        let infinite = if self.r < 1.0 {
            Some(misid_bound_infinite(
                n,
                epsilon,
                v,
                config.radius,
                config.dimension,
                self.r,
                self.tail,
            )?)
        } else {
            None
        };
        Ok((Some(finite), infinite))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub n: u64,
    #[serde(rename = "C")]
    pub c: f64,
    pub epsilon: f64,
    pub replications: u64,
    pub false_positives: u64,
    pub false_negatives: u64,
    /// Trials with a false positive or a false negative.
    pub mismatches: u64,
    pub fp_rate: f64,
    pub fn_rate: f64,
    pub fp_interval: (f64, f64),
    pub fn_interval: (f64, f64),
    /// Mean number of sampler steps per coalesced draw.
    pub mean_steps: f64,
    pub bound_finite: Option<BoundReport>,
    pub bound_infinite: Option<BoundReport>,
    /// Fixed-graph runs only.
    pub truth: Option<BTreeSet<LatticePoint>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    /// The graph shared by all trials, unless it was resampled per trial.
    pub potential: Option<PairwisePotential>,
    pub variance_source: Option<VarianceSource>,
    pub cells: Vec<CellResult>,
}

struct TrialRecord {
    outcome: TrialOutcome,
    steps: u64,
    bounds: (Option<BoundReport>, Option<BoundReport>),
}

fn worse(a: Option<BoundReport>, b: Option<BoundReport>) -> Option<BoundReport> {
    match (a, b) {
        (Some(x), Some(y)) => Some(if y.value > x.value { y } else { x }),
        (x, None) | (None, x) => x,
    }
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.worker_count())
        .build()
        .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))?;
    let potential = if config.resample_graph {
        None
    } else {
        Some(config.fixed_potential()?)
    };
    pool.install(|| run_in_pool(config, potential))
}

/// Runs the experiment on `potential` instead of the configured graph.
pub fn run_experiment_on(
    config: &ExperimentConfig,
    potential: &PairwisePotential,
) -> Result<ExperimentResult> {
    config.validate()?;
    if config.resample_graph {
        return Err(Error::invalid(
            "resample_graph cannot be combined with a given potential",
        ));
    }
    if potential.dimension() != config.dimension {
        return Err(Error::invalid("potential dimension differs from config"));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.worker_count())
        .build()
        .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))?;
    pool.install(|| run_in_pool(config, Some(potential.clone())))
}

fn run_in_pool(
    config: &ExperimentConfig,
    potential: Option<PairwisePotential>,
) -> Result<ExperimentResult> {
    let sizes = config.sample_sizes.values();
    let schedules = config.schedules()?;
    let fixed = potential.map(|p| Model::new(p, config)).transpose()?;

    struct Cell {
        n_idx: usize,
        c_idx: usize,
        epsilon: f64,
        truth: Option<BTreeSet<LatticePoint>>,
        bounds: (Option<BoundReport>, Option<BoundReport>),
    }
    let mut cells = Vec::new();
    for (n_idx, &n) in sizes.iter().enumerate() {
        for (c_idx, schedule) in schedules.iter().enumerate() {
            let epsilon = schedule.threshold(config.radius, n)?;
            let (truth, bounds) = match &fixed {
                Some(m) => (
                    Some(m.truth(config, epsilon)?),
                    m.bounds(config, n, epsilon)?,
                ),
                None => (None, (None, None)),
            };
            cells.push(Cell {
                n_idx,
                c_idx,
                epsilon,
                truth,
                bounds,
            });
        }
    }

    let center = config.center();
    let run_trial = |cell: &Cell, rep: u64| -> Result<TrialRecord> {
        let n = sizes[cell.n_idx];
        let seed = derive_seed(
            config.master_seed,
            &[cell.n_idx as u64, cell.c_idx as u64, rep],
        );
        let own;
        let (model, truth, bounds) = match (&fixed, &cell.truth) {
            (Some(m), Some(t)) => (m, t.clone(), cell.bounds),
            _ => {
                own = Model::new(config.graph(derive_seed(seed, &[GRAPH_STREAM]))?, config)?;
                let t = own.truth(config, cell.epsilon)?;
                let b = own.bounds(config, n, cell.epsilon)?;
                (&own, t, b)
            }
        };
        let (sample, steps) = model.sampler.sample(n as usize, seed)?;
        let estimate = estimate_neighborhood(&sample, &center, config.radius, cell.epsilon)?;
        Ok(TrialRecord {
            outcome: classify_trial(&estimate, &truth),
            steps,
            bounds,
        })
    };

    let jobs: Vec<(usize, u64)> = (0..cells.len())
        .flat_map(|k| (0..config.replications).map(move |rep| (k, rep)))
        .collect();
    let records = jobs
        .par_iter()
        .map(|&(k, rep)| {
            let cell = &cells[k];
            run_trial(cell, rep).map_err(|e| Error::Trial {
                n: sizes[cell.n_idx],
                c: schedules[cell.c_idx].c,
                replication: rep,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let reps = config.replications;
    let results = cells
        .iter()
        .zip(records.chunks_exact(reps as usize))
        .map(|(cell, trials)| {
            let n = sizes[cell.n_idx];
            let fp = trials.iter().filter(|t| t.outcome.false_positive).count() as u64;
            let fn_ = trials.iter().filter(|t| t.outcome.false_negative).count() as u64;
            let mismatches = trials
                .iter()
                .filter(|t| t.outcome.false_positive || t.outcome.false_negative)
                .count() as u64;
            let steps: u64 = trials.iter().map(|t| t.steps).sum();
            let (bound_finite, bound_infinite) = trials.iter().fold(cell.bounds, |acc, t| {
                (worse(acc.0, t.bounds.0), worse(acc.1, t.bounds.1))
            });
            Ok(CellResult {
                n,
                c: schedules[cell.c_idx].c,
                epsilon: cell.epsilon,
                replications: reps,
                false_positives: fp,
                false_negatives: fn_,
                mismatches,
                fp_rate: fp as f64 / reps as f64,
                fn_rate: fn_ as f64 / reps as f64,
                fp_interval: wilson_interval(fp, reps, INTERVAL_CONFIDENCE)?,
                fn_interval: wilson_interval(fn_, reps, INTERVAL_CONFIDENCE)?,
                mean_steps: steps as f64 / (n * reps) as f64,
                bound_finite,
                bound_infinite,
                truth: cell.truth.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(ExperimentResult {
        config: config.clone(),
        variance_source: fixed.as_ref().and_then(|m| m.v.map(|(_, s)| s)),
        potential: fixed.map(|m| m.potential),
        cells: results,
    })
}

fn bound_cell(b: &Option<BoundReport>) -> String {
    match b {
        Some(r) => format!("{:.6e}", r.value),
        None => "NA".to_string(),
    }
}

impl ExperimentResult {
    /// CSV table, one row per `(n, C)` cell, preceded by a comment line.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        writeln!(
            out,
            "# intervals: wilson {}%",
            (INTERVAL_CONFIDENCE * 100.0).round()
        )
        .unwrap();
        writeln!(out, "{CSV_HEADER}").unwrap();
        for c in &self.cells {
            writeln!(
                out,
                "{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{},{}",
                c.n,
                c.c,
                c.fp_rate,
                c.fp_interval.0,
                c.fp_interval.1,
                c.fn_rate,
                c.fn_interval.0,
                c.fn_interval.1,
                bound_cell(&c.bound_finite),
                bound_cell(&c.bound_infinite),
            )
            .unwrap();
        }
        out
    }

    pub fn cell(&self, n: u64, c: f64) -> Option<&CellResult> {
        self.cells.iter().find(|x| x.n == n && x.c == c)
    }

    /// Cells for one threshold constant, in sample-size order.
    pub fn series(&self, c: f64) -> Vec<&CellResult> {
        self.cells.iter().filter(|x| x.c == c).collect()
    }
}
