//! Axiom diagnostics for entropy vectors: polymatroid checks, rounding to
//! candidate matroids, and independence queries.

use serde::Serialize;

use crate::empirical::EntropyVector;
use crate::error::{Error, Result};
use crate::subset::SubsetMask;

/// Most violating pairs retained in an [`AxiomReport`]; the scan itself is
/// exhaustive, only the listing is capped.
pub const VIOLATION_LIST_CAP: usize = 100;

/// Outcome of checking a fully evaluated entropy vector against the
/// polymatroid axioms (normalization, monotonicity, submodularity).
#[derive(Clone, Debug, Serialize)]
pub struct AxiomReport {
    pub is_polymatroid: bool,
    /// Largest `g(I) - g(J)` over nested pairs `I ⊆ J`; positive = violated.
    pub worst_monotonicity_violation: f64,
    /// Largest `g(I ∪ J) + g(I ∩ J) - g(I) - g(J)`; positive = violated.
    pub worst_submodularity_violation: f64,
    /// `g(∅) = 0` holds by construction (the empty set is never stored).
    pub normalization_ok: bool,
    pub tolerance: f64,
    /// Offending `(I, J)` pairs, capped at [`VIOLATION_LIST_CAP`].
    pub violating_pairs: Vec<(SubsetMask, SubsetMask)>,
}

/// Exhaustively checks monotonicity over all nested pairs and submodularity
/// over all pairs of non-empty subsets. Requires a fully evaluated vector.
pub fn check_polymatroid(vector: &EntropyVector, tolerance: f64) -> Result<AxiomReport> {
    require_full(vector)?;
    let k = vector.num_sensors();

    let mut worst_mono = f64::NEG_INFINITY;
    let mut worst_sub = f64::NEG_INFINITY;
    let mut violating: Vec<(SubsetMask, SubsetMask)> = Vec::new();
    let push_violation = |i: SubsetMask, j: SubsetMask, violating: &mut Vec<_>| {
        if violating.len() < VIOLATION_LIST_CAP {
            violating.push((i, j));
        }
    };

    for i in SubsetMask::all_nonempty(k) {
        let gi = vector.value(i).unwrap();
        for j in SubsetMask::all_nonempty(k) {
            if i.is_subset_of(j) {
                let gap = gi - vector.value(j).unwrap();
                worst_mono = worst_mono.max(gap);
                if gap > tolerance {
                    push_violation(i, j, &mut violating);
                }
            }
            if i < j {
                let gj = vector.value(j).unwrap();
                let union = vector.value(i.union(j)).unwrap();
                let inter = vector.value(i.intersection(j)).unwrap();
                let gap = union + inter - gi - gj;
                worst_sub = worst_sub.max(gap);
                if gap > tolerance {
                    push_violation(i, j, &mut violating);
                }
            }
        }
    }

    // A ground set of one sensor has no submodularity pairs to scan.
    if !worst_mono.is_finite() {
        worst_mono = 0.0;
    }
    if !worst_sub.is_finite() {
        worst_sub = 0.0;
    }
    Ok(AxiomReport {
        is_polymatroid: worst_mono <= tolerance && worst_sub <= tolerance,
        worst_monotonicity_violation: worst_mono,
        worst_submodularity_violation: worst_sub,
        normalization_ok: true,
        tolerance,
        violating_pairs: violating,
    })
}

/// Integer-valued rank function obtained by rounding an entropy vector.
#[derive(Clone, Debug)]
pub struct MatroidCandidate {
    /// Integer ranks, stored in an entropy vector of the source's kind.
    pub ranks: EntropyVector,
    /// Rank of the full ground set.
    pub rank: u64,
    /// Largest `|value / unit - round(value / unit)|` over subsets, in rank
    /// units; small residuals mean the vector was already near-integral.
    pub rounding_residual: f64,
}

impl MatroidCandidate {
    pub fn rank_of(&self, mask: SubsetMask) -> Option<u64> {
        self.ranks.value(mask).map(|v| v.round() as u64)
    }
}

/// Which matroid axiom rounding broke.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, thiserror::Error)]
pub enum MatroidFailure {
    #[error("rounded rank of {subset} exceeds its cardinality")]
    RankExceedsCardinality { subset: SubsetMask },
    #[error("rounded ranks are not monotone between {smaller} and {larger}")]
    NotMonotone {
        smaller: SubsetMask,
        larger: SubsetMask,
    },
    #[error("rounded ranks are not submodular on {a} and {b}")]
    NotSubmodular { a: SubsetMask, b: SubsetMask },
}

/// Result of [`round_to_matroid`]: either a verified matroid candidate, or a
/// report of the first axiom the rounded vector breaks.
#[derive(Clone, Debug)]
pub enum RoundingOutcome {
    Matroid(MatroidCandidate),
    NotAMatroid(MatroidFailure),
}

impl RoundingOutcome {
    pub fn is_matroid(&self) -> bool {
        matches!(self, RoundingOutcome::Matroid(_))
    }
}

/// Divides each entry by `unit` (entropy contributed by one fully random
/// sensor, typically `log2(alpha)`), rounds to the nearest integer, and
/// re-checks the matroid axioms exactly on the integers.
pub fn round_to_matroid(vector: &EntropyVector, unit: f64) -> Result<RoundingOutcome> {
    require_full(vector)?;
    if !(unit > 0.0) {
        return Err(Error::InvalidParameter {
            name: "unit",
            value: unit,
            requirement: "must be positive",
        });
    }
    let k = vector.num_sensors();

    let mut residual = 0.0f64;
    let mut ranks: Vec<i64> = Vec::with_capacity((1usize << k) - 1);
    for mask in SubsetMask::all_nonempty(k) {
        let scaled = vector.value(mask).unwrap() / unit;
        let rounded = scaled.round();
        residual = residual.max((scaled - rounded).abs());
        ranks.push(rounded as i64);
    }
    let rank_of = |mask: SubsetMask| -> i64 {
        if mask.is_empty() {
            0
        } else {
            ranks[mask.bits() as usize - 1]
        }
    };

    for mask in SubsetMask::all_nonempty(k) {
        let r = rank_of(mask);
        if r < 0 || r > mask.len() as i64 {
            return Ok(RoundingOutcome::NotAMatroid(
                MatroidFailure::RankExceedsCardinality { subset: mask },
            ));
        }
    }
    for i in SubsetMask::all_nonempty(k) {
        for j in SubsetMask::all_nonempty(k) {
            if i.is_subset_of(j) && rank_of(i) > rank_of(j) {
                return Ok(RoundingOutcome::NotAMatroid(MatroidFailure::NotMonotone {
                    smaller: i,
                    larger: j,
                }));
            }
            if i < j && rank_of(i) + rank_of(j) < rank_of(i.union(j)) + rank_of(i.intersection(j)) {
                return Ok(RoundingOutcome::NotAMatroid(MatroidFailure::NotSubmodular {
                    a: i,
                    b: j,
                }));
            }
        }
    }

    let mut integer_vector = EntropyVector::new(k, vector.kind());
    for mask in SubsetMask::all_nonempty(k) {
        integer_vector.insert(mask, rank_of(mask) as f64)?;
    }
    let rank = rank_of(SubsetMask::full(k)) as u64;
    Ok(RoundingOutcome::Matroid(MatroidCandidate {
        ranks: integer_vector,
        rank,
        rounding_residual: residual,
    }))
}

/// Additivity defect `sum_i g({i}) - g(I)` in bits; zero means the member
/// sensors are mutually independent under this vector.
pub fn independence_defect(vector: &EntropyVector, subset: SubsetMask) -> Result<f64> {
    if subset.is_empty() {
        return Err(Error::EmptySubset);
    }
    let mut singleton_sum = 0.0;
    for sensor in subset.sensors() {
        singleton_sum += vector.require(SubsetMask::singleton(sensor))?;
    }
    Ok(singleton_sum - vector.require(subset)?)
}

/// True when the additivity defect of `subset` is within `tolerance`.
pub fn is_independent(vector: &EntropyVector, subset: SubsetMask, tolerance: f64) -> Result<bool> {
    Ok(independence_defect(vector, subset)? <= tolerance)
}

fn require_full(vector: &EntropyVector) -> Result<()> {
    if vector.is_fully_evaluated() {
        return Ok(());
    }
    let missing = vector.missing();
    Err(Error::MissingSubset {
        mask: missing.first().map(|m| m.bits()).unwrap_or(0),
    })
}
