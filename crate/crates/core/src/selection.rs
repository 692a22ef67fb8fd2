//! Sensor subset selection: Bernoulli random draws with their success
//! guarantee, and greedy entropy maximization with an early-stop bound.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::data::SensorMatrix;
use crate::empirical::{joint_type, EntropyVector};
use crate::error::{Error, Result};
use crate::lz78::lz_entropy_estimate;
use crate::subset::SubsetMask;

/// Joint entropy backend the selection algorithms query. Implementations
/// must be deterministic: the same subset always yields the same value.
pub trait EntropyOracle {
    fn joint_entropy(&self, subset: SubsetMask) -> Result<f64>;
    fn num_sensors(&self) -> u32;
    /// Queries served so far (cache hits included).
    fn evaluations(&self) -> u64;
}

/// Oracle over a precomputed (analytic or estimated) entropy vector.
pub struct VectorOracle {
    vector: EntropyVector,
    evaluations: AtomicU64,
}

impl VectorOracle {
    pub fn new(vector: EntropyVector) -> Self {
        VectorOracle {
            vector,
            evaluations: AtomicU64::new(0),
        }
    }

    pub fn vector(&self) -> &EntropyVector {
        &self.vector
    }
}

impl EntropyOracle for VectorOracle {
    fn joint_entropy(&self, subset: SubsetMask) -> Result<f64> {
        self.evaluations.fetch_add(1, Ordering::Relaxed);
        self.vector.require(subset)
    }

    fn num_sensors(&self) -> u32 {
        self.vector.num_sensors()
    }

    fn evaluations(&self) -> u64 {
        self.evaluations.load(Ordering::Relaxed)
    }
}

/// Which estimate a data-backed oracle computes per subset.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Estimator {
    Empirical,
    Lz,
}

/// On-demand oracle over sensor data, memoizing one entry per queried subset.
pub struct MatrixOracle<'a> {
    matrix: &'a SensorMatrix,
    estimator: Estimator,
    cache: Mutex<HashMap<SubsetMask, f64>>,
    evaluations: AtomicU64,
}

impl<'a> MatrixOracle<'a> {
    pub fn new(matrix: &'a SensorMatrix, estimator: Estimator) -> Self {
        MatrixOracle {
            matrix,
            estimator,
            cache: Mutex::new(HashMap::new()),
            evaluations: AtomicU64::new(0),
        }
    }
}

impl EntropyOracle for MatrixOracle<'_> {
    fn joint_entropy(&self, subset: SubsetMask) -> Result<f64> {
        self.evaluations.fetch_add(1, Ordering::Relaxed);
        if let Some(&bits) = self.cache.lock().unwrap().get(&subset) {
            return Ok(bits);
        }
        let bits = match self.estimator {
            Estimator::Empirical => joint_type(self.matrix, subset)?.entropy_bits(),
            Estimator::Lz => {
                let (projected, alphabet) = crate::data::project_subset(self.matrix, subset)?;
                lz_entropy_estimate(&projected, &alphabet)?
            }
        };
        self.cache.lock().unwrap().insert(subset, bits);
        Ok(bits)
    }

    fn num_sensors(&self) -> u32 {
        self.matrix.num_sensors() as u32
    }

    fn evaluations(&self) -> u64 {
        self.evaluations.load(Ordering::Relaxed)
    }
}

/// Draws each of the `k` sensors independently with probability `q` from a
/// generator seeded by `seed`; reproducible bit-exactly.
pub fn random_selection(k: u32, q: f64, seed: u64) -> Result<SubsetMask> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::InvalidParameter {
            name: "q",
            value: q,
            requirement: "must lie in [0, 1]",
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mask = SubsetMask::empty();
    for sensor in 0..k as usize {
        if rng.gen::<f64>() < q {
            mask = mask.with(sensor);
        }
    }
    Ok(mask)
}

/// Success guarantee of the random draw when the true rank function is a
/// matroid of rank `r` containing enough disjoint bases.
#[derive(Clone, Debug, Serialize)]
pub struct SelectionGuarantee {
    /// `1 - e^{-a q}`: probability the draw contains a maximal independent
    /// set, given the disjoint-base precondition.
    pub success_probability_floor: f64,
    /// Disjoint bases required of the true matroid: `a + 2 + ln(r)/q`.
    pub required_disjoint_bases: f64,
    /// Estimation slack `(2^k - 1)/sqrt(n)` with unit constant; heuristic,
    /// the true constant is unknown.
    pub order_term: f64,
}

pub fn random_selection_guarantee(
    a: f64,
    q: f64,
    r: f64,
    k: u32,
    n: usize,
) -> Result<SelectionGuarantee> {
    if !(a > 0.0) {
        return Err(Error::InvalidParameter {
            name: "a",
            value: a,
            requirement: "must be positive",
        });
    }
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::InvalidParameter {
            name: "q",
            value: q,
            requirement: "must lie in (0, 1]",
        });
    }
    if !(r >= 1.0) {
        return Err(Error::InvalidParameter {
            name: "r",
            value: r,
            requirement: "rank must be at least 1",
        });
    }
    Ok(SelectionGuarantee {
        success_probability_floor: 1.0 - (-a * q).exp(),
        required_disjoint_bases: a + 2.0 + r.ln() / q,
        order_term: (2f64.powi(k as i32) - 1.0) / (n as f64).sqrt(),
    })
}

/// One accepted greedy step.
#[derive(Clone, Debug, Serialize)]
pub struct GreedyStep {
    /// Chosen sensor row (0-based).
    pub sensor: usize,
    /// Human label `s{row+1}`.
    pub label: String,
    /// Oracle entropy of the subset after inclusion.
    pub entropy_bits: f64,
    /// Increase over the previous subset; always exceeds the threshold.
    pub gain_bits: f64,
}

/// Full trace of a greedy run.
#[derive(Clone, Debug, Serialize)]
pub struct GreedyTrace {
    pub steps: Vec<GreedyStep>,
    pub final_subset: SubsetMask,
    pub final_entropy_bits: f64,
    /// True when the threshold stopped the run while the best remaining gain
    /// was still positive but under `epsilon`.
    pub stopped_early: bool,
    pub epsilon: f64,
    /// `k * epsilon`: bound on the entropy left on the table by stopping.
    pub residual_bound_bits: f64,
    pub oracle_evaluations: u64,
}

/// Residual entropy bound for an epsilon-stopped greedy run; an `o(1)`
/// estimation term applies on top when the oracle is a finite-sample
/// estimate rather than exact.
pub fn early_stop_gap(k: u32, epsilon: f64) -> Result<f64> {
    if !(epsilon >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "epsilon",
            value: epsilon,
            requirement: "must be non-negative",
        });
    }
    Ok(k as f64 * epsilon)
}

/// Grows a subset one sensor at a time, always taking the candidate whose
/// inclusion maximizes the oracle entropy (ties to the lowest row), and
/// stops once the best candidate no longer improves on the running entropy
/// by more than `epsilon`. `epsilon = 0` is the strict-increase rule.
pub fn greedy_selection(oracle: &dyn EntropyOracle, epsilon: f64) -> Result<GreedyTrace> {
    let residual_bound_bits = early_stop_gap(oracle.num_sensors(), epsilon)?;
    let k = oracle.num_sensors();

    let mut subset = SubsetMask::empty();
    let mut entropy = 0.0f64;
    let mut steps = Vec::new();
    let mut stopped_early = false;

    while subset.len() < k {
        let mut best: Option<(usize, f64)> = None;
        for sensor in 0..k as usize {
            if subset.contains(sensor) {
                continue;
            }
            let candidate = oracle.joint_entropy(subset.with(sensor))?;
            // Strict comparison keeps the lowest row on ties.
            if best.map_or(true, |(_, value)| candidate > value) {
                best = Some((sensor, candidate));
            }
        }
        let (sensor, value) = best.expect("loop guard leaves at least one candidate");
        if value <= entropy + epsilon {
            stopped_early = value - entropy < epsilon;
            break;
        }
        steps.push(GreedyStep {
            sensor,
            label: format!("s{}", sensor + 1),
            entropy_bits: value,
            gain_bits: value - entropy,
        });
        subset = subset.with(sensor);
        entropy = value;
    }

    Ok(GreedyTrace {
        steps,
        final_subset: subset,
        final_entropy_bits: entropy,
        stopped_early,
        epsilon,
        residual_bound_bits,
        oracle_evaluations: oracle.evaluations(),
    })
}
