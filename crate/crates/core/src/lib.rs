//! Simulation library for non-stationary stochastic multi-armed
//! bandits.
//!
//! The crate provides ground-truth environment models with polynomial
//! segment means, random generators for four structural families,
//! mechanical validation of the drift and significance assumptions,
//! two round-based policies (a quota-driven sampler with change
//! detection and a per-arm elimination rule for gap observations),
//! parameter derivations, and a replayable trace format. Runs are
//! deterministic in the seed: rewards are drawn from a counter-based
//! noise stream keyed by (seed, arm, time), so replaying any suffix of
//! a run reproduces it bitwise.

pub mod detect;
pub mod env;
pub mod error;
pub mod harness;
pub mod ledger;
pub mod numeric;
pub mod params;
pub mod prudent;
pub mod rng;
pub mod selective;
pub mod trace;

pub use detect::{cp_detect, ScanMode};
pub use env::generate::{
    gen_holder, gen_inflexion, gen_local_poly, gen_switching, switching_from_parts, ChannelConfig,
    HolderConfig, InflexionConfig, LocalPolyConfig, SwitchingConfig,
};
pub use env::model::{
    EnvironmentSpec, GeneratorMeta, MeanFunction, NoiseModel, ObservationMode, PolySegment,
};
pub use env::partition::{
    minimal_partition_exact, minimal_significant_partition, validate_assumptions, GapVerdict,
    PartitionReport,
};
pub use error::{Error, Result};
pub use harness::{
    aggregate, emit_csv, emit_json, emit_plot, run_experiment, Aggregates, BoundCurve,
    BoundOverlay, EnvSource, GeneratorRecipe, OutputConfig, PolicyConfig, RunConfig, RunReport,
    SeedSeries, CONFIG_SCHEMA_VERSION,
};
pub use ledger::{BoundContext, EpisodeLedger};
pub use params::{
    params_case_a, params_case_b, params_case_c, params_case_d, regret_bound_prudent,
    regret_bound_selective, CaseInputs, CaseParams,
};
pub use prudent::{PrudentParams, QuotaValue, ReplayOptions};
pub use rng::NoiseStream;
pub use selective::SelectiveParams;
pub use trace::{DetectionEvent, EpisodeSpan, PullRecord, RunTrace};
