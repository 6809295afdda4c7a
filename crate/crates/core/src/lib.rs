//! Pairwise-interaction Ising models on finite volumes of `Z^d`: exact
//! sampling by coupled Gibbs chains, recovery of interaction neighborhoods from
//! i.i.d. samples, exact enumeration for small volumes, and the closed-form
//! misidentification and coupling bounds.

pub mod bounds;
pub mod error;
pub mod estimator;
pub mod experiment;
pub mod lattice;
pub mod oracle;
pub mod potential;
pub mod rng;
pub mod sample;
pub mod sampler;
pub mod spin;
pub mod stats;

pub use bounds::{
    bernstein, coupling_bound, misid_bound_finite, misid_bound_infinite, v_analytic_bounds,
    BoundInputs, BoundKind, BoundReport,
};
pub use error::{Error, Result};
pub use estimator::{
    empirical_conditional, empirical_d, empirical_prob, estimate_neighborhood,
    estimate_neighborhood_exhaustive, scale_l, threshold, NeighborhoodEstimate, ScheduleKind,
    ThresholdSchedule,
};
pub use experiment::{
    classify_trial, run_experiment, run_experiment_on, truth_set, CellResult, ExperimentConfig,
    ExperimentResult, SampleSizes, TrialOutcome, TruthMode,
};
pub use lattice::{LatticeBox, LatticePoint, SiteSet, VolumeSpec};
pub use oracle::{exact_distribution, ExactModel, VarianceProxies};
pub use potential::{random_interaction_graph, DobrushinCoefficient, PairwisePotential};
pub use sample::Sample;
pub use sampler::{
    coupled_gibbs_sample, coupled_truncation_chains, generate_sample, joint_update_law, local_spec,
    CoalescedDraw, CouplingTrace, GibbsSampler,
};
pub use spin::{Pattern, Spin, SpinConfiguration};
