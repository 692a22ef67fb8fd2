//! Dependence analysis and online fusion for multi-sensor symbol streams.
//!
//! The pipeline: quantize raw readings onto a finite alphabet
//! ([`data`]), estimate joint entropies of sensor subsets either from
//! first-order empirical frequencies ([`empirical`]) or by incremental
//! parsing ([`lz78`]), diagnose the resulting vectors against the
//! polymatroid axioms ([`polymatroid`]), select (near-)independent subsets
//! by random draws or greedy maximization ([`selection`]), and synthesize a
//! fused sensor online by exponential weighting with a provable regret
//! bound ([`fusion`]). [`sources`] generates seeded synthetic ensembles with
//! exact entropy oracles so every convergence and selection claim can be
//! tested; [`io`] holds the CSV/JSON formats shared with the CLI.

pub mod data;
pub mod empirical;
pub mod error;
pub mod fusion;
pub mod io;
pub mod lz78;
pub mod polymatroid;
pub mod selection;
pub mod sources;
pub mod subset;

pub use data::{project_subset, quantize_readings, AlphabetSpec, SensorMatrix};
pub use empirical::{
    empirical_entropy_vector, empirical_entropy_vector_with_cap, joint_type, EntropyKind,
    EntropyVector, JointType, DEFAULT_LATTICE_CAP,
};
pub use error::{Error, Result};
pub use fusion::{
    build_family, default_eta, online_fusion, online_fusion_with, regret_bound, CompetitorSet,
    EtaSchedule, FamilyCompetitors, FamilyKind, FusionOptions, FusionRun, Loss, OutputGrid,
    SynthesizedFamily,
};
pub use lz78::{
    format_phrase_dump, lz78_parse, lz78_phrases, lz_entropy_estimate, lz_entropy_vector,
    markov_deviation_bound, MarkovBound, ParseResult,
};
pub use polymatroid::{
    check_polymatroid, independence_defect, is_independent, round_to_matroid, AxiomReport,
    MatroidCandidate, MatroidFailure, RoundingOutcome,
};
pub use selection::{
    early_stop_gap, greedy_selection, random_selection, random_selection_guarantee, EntropyOracle,
    Estimator, GreedyStep, GreedyTrace, MatrixOracle, SelectionGuarantee, VectorOracle,
};
pub use sources::{markov_entropy_rate, markov_stationary, BaseSource, Derived, SourceSpec};
pub use subset::SubsetMask;
