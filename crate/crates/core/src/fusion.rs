//! Online sensor fusion by exponential weighting: loss functions, parametric
//! families of synthesized sensors, and the weighted sampling loop with its
//! regret accounting.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};

/// Per-step loss of an output `p` in `[0, 1]` against a binary truth symbol.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Loss {
    /// 0/1 disagreement; outputs must already be binary.
    Hamming,
    /// `-x log2(p) - (1-x) log2(1-p)`, with `p` clamped into
    /// `[delta, 1 - delta]` so that every step loss is bounded.
    LogLoss { clamp_delta: f64 },
}

impl Loss {
    pub fn log_loss(clamp_delta: f64) -> Result<Loss> {
        if !(clamp_delta > 0.0 && clamp_delta < 0.5) {
            return Err(Error::InvalidParameter {
                name: "clamp_delta",
                value: clamp_delta,
                requirement: "must lie in (0, 0.5)",
            });
        }
        Ok(Loss::LogLoss { clamp_delta })
    }

    /// Upper bound on any single-step loss.
    pub fn d_max(&self) -> f64 {
        match self {
            Loss::Hamming => 1.0,
            Loss::LogLoss { clamp_delta } => -clamp_delta.log2(),
        }
    }

    pub fn eval(&self, p: f64, x: bool) -> Result<f64> {
        if !p.is_finite() || !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidParameter {
                name: "p",
                value: p,
                requirement: "must lie in [0, 1]",
            });
        }
        match self {
            Loss::Hamming => {
                if p != 0.0 && p != 1.0 {
                    return Err(Error::HammingNonBinary { value: p });
                }
                Ok(if (p == 1.0) == x { 0.0 } else { 1.0 })
            }
            Loss::LogLoss { clamp_delta } => {
                let clamped = p.clamp(*clamp_delta, 1.0 - clamp_delta);
                Ok(if x {
                    -clamped.log2()
                } else {
                    -(1.0 - clamped).log2()
                })
            }
        }
    }
}

/// How a synthesized-sensor family combines its base tuple.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "subset_size")]
pub enum FamilyKind {
    /// Averages of unordered base pairs: `C(K, 2)` members.
    PairAverage,
    /// Averages of all ordered base pairs including self-pairs: `K^2` members.
    OrderedPairAverage,
    /// Pointwise maxima over base subsets of the given size: `C(K, m)` members.
    MaxOfSubset(usize),
    /// Pointwise medians over base subsets of the given size: `C(K, m)` members.
    MedianOfSubset(usize),
}

/// A deterministic enumeration of synthesized sensors, each a pointwise
/// function of a tuple of base sensors.
#[derive(Clone, Debug, Serialize)]
pub struct SynthesizedFamily {
    pub kind: FamilyKind,
    pub base_count: usize,
    /// Parameter tuples in lexicographic order, 0-based base indices.
    pub members: Vec<Vec<usize>>,
}

/// Enumerates the family parameters in lexicographic tuple order.
pub fn build_family(kind: FamilyKind, base_count: usize) -> Result<SynthesizedFamily> {
    if base_count == 0 {
        return Err(Error::EmptyInput);
    }
    let subset_size = match kind {
        FamilyKind::PairAverage | FamilyKind::OrderedPairAverage => 2,
        FamilyKind::MaxOfSubset(m) | FamilyKind::MedianOfSubset(m) => m,
    };
    if subset_size == 0 || subset_size > base_count {
        return Err(Error::InvalidParameter {
            name: "subset_size",
            value: subset_size as f64,
            requirement: "must lie in 1..=base_count",
        });
    }

    let members = match kind {
        FamilyKind::OrderedPairAverage => {
            let mut tuples = Vec::with_capacity(base_count * base_count);
            for i in 0..base_count {
                for j in 0..base_count {
                    tuples.push(vec![i, j]);
                }
            }
            tuples
        }
        FamilyKind::PairAverage => {
            let mut tuples = Vec::new();
            for i in 0..base_count {
                for j in i + 1..base_count {
                    tuples.push(vec![i, j]);
                }
            }
            tuples
        }
        FamilyKind::MaxOfSubset(m) | FamilyKind::MedianOfSubset(m) => combinations(base_count, m),
    };

    Ok(SynthesizedFamily {
        kind,
        base_count,
        members,
    })
}

fn combinations(n: usize, m: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current: Vec<usize> = (0..m).collect();
    loop {
        out.push(current.clone());
        // Advance the rightmost index that can still move.
        let mut i = m;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if current[i] != i + n - m {
                break;
            }
        }
        current[i] += 1;
        for j in i + 1..m {
            current[j] = current[j - 1] + 1;
        }
    }
}

impl SynthesizedFamily {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Output of one member given all base outputs at a time step.
    pub fn member_output(&self, member: usize, base_values: &[f64]) -> f64 {
        let tuple = &self.members[member];
        match self.kind {
            FamilyKind::PairAverage | FamilyKind::OrderedPairAverage => {
                (base_values[tuple[0]] + base_values[tuple[1]]) / 2.0
            }
            FamilyKind::MaxOfSubset(_) => tuple
                .iter()
                .map(|&b| base_values[b])
                .fold(f64::NEG_INFINITY, f64::max),
            FamilyKind::MedianOfSubset(_) => {
                let mut values: Vec<f64> = tuple.iter().map(|&b| base_values[b]).collect();
                values.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let mid = values.len() / 2;
                if values.len() % 2 == 1 {
                    values[mid]
                } else {
                    (values[mid - 1] + values[mid]) / 2.0
                }
            }
        }
    }
}

/// Precomputed competitor outputs, or a lazily expanded family; either way a
/// `(K + |family|) x n` view with values in `[0, 1]`.
pub trait CompetitorSet {
    fn num_competitors(&self) -> usize;
    fn horizon(&self) -> usize;
    fn output(&self, competitor: usize, t: usize) -> f64;
}

/// Fully materialized competitor-by-time grid.
pub struct OutputGrid {
    rows: Vec<Vec<f64>>,
}

impl OutputGrid {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.is_empty() || rows[0].is_empty() {
            return Err(Error::EmptyInput);
        }
        let n = rows[0].len();
        for (competitor, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::CompetitorShape {
                    detail: format!(
                        "competitor {competitor} has {} steps, expected {n}",
                        row.len()
                    ),
                });
            }
            for (step, &value) in row.iter().enumerate() {
                if !value.is_finite() || !(0.0..=1.0).contains(&value) {
                    return Err(Error::CompetitorOutput {
                        competitor,
                        step,
                        value,
                    });
                }
            }
        }
        Ok(OutputGrid { rows })
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }
}

impl CompetitorSet for OutputGrid {
    fn num_competitors(&self) -> usize {
        self.rows.len()
    }

    fn horizon(&self) -> usize {
        self.rows[0].len()
    }

    fn output(&self, competitor: usize, t: usize) -> f64 {
        self.rows[competitor][t]
    }
}

/// Bases plus a synthesized family, with member outputs computed on the fly
/// instead of materializing the `|family| x n` block.
pub struct FamilyCompetitors {
    bases: Vec<Vec<f64>>,
    family: SynthesizedFamily,
    scratch: std::cell::RefCell<Vec<f64>>,
}

impl FamilyCompetitors {
    pub fn new(bases: Vec<Vec<f64>>, family: SynthesizedFamily) -> Result<Self> {
        if bases.len() != family.base_count {
            return Err(Error::CompetitorShape {
                detail: format!(
                    "family expects {} bases, got {}",
                    family.base_count,
                    bases.len()
                ),
            });
        }
        let grid = OutputGrid::new(bases)?;
        let base_count = grid.rows.len();
        Ok(FamilyCompetitors {
            bases: grid.rows,
            family,
            scratch: std::cell::RefCell::new(vec![0.0; base_count]),
        })
    }

    /// Materializes the combined grid (bases first, then family members).
    pub fn expand(&self) -> OutputGrid {
        let n = self.horizon();
        let mut rows = self.bases.clone();
        for member in 0..self.family.len() {
            let mut row = Vec::with_capacity(n);
            for t in 0..n {
                row.push(self.output(self.bases.len() + member, t));
            }
            rows.push(row);
        }
        OutputGrid { rows }
    }
}

impl CompetitorSet for FamilyCompetitors {
    fn num_competitors(&self) -> usize {
        self.bases.len() + self.family.len()
    }

    fn horizon(&self) -> usize {
        self.bases[0].len()
    }

    fn output(&self, competitor: usize, t: usize) -> f64 {
        if competitor < self.bases.len() {
            return self.bases[competitor][t];
        }
        let mut scratch = self.scratch.borrow_mut();
        for (slot, row) in scratch.iter_mut().zip(&self.bases) {
            *slot = row[t];
        }
        self.family
            .member_output(competitor - self.bases.len(), &scratch)
    }
}

/// Horizon-optimal learning rate `sqrt(8 ln(M) / (n d_max^2))`.
pub fn default_eta(num_competitors: usize, horizon: usize, d_max: f64) -> Result<f64> {
    if num_competitors < 2 {
        return Err(Error::InvalidParameter {
            name: "num_competitors",
            value: num_competitors as f64,
            requirement: "needs at least 2 competitors",
        });
    }
    if horizon == 0 {
        return Err(Error::InvalidParameter {
            name: "horizon",
            value: 0.0,
            requirement: "must be positive",
        });
    }
    if !(d_max > 0.0) {
        return Err(Error::InvalidParameter {
            name: "d_max",
            value: d_max,
            requirement: "must be positive",
        });
    }
    Ok((8.0 * (num_competitors as f64).ln() / (horizon as f64 * d_max * d_max)).sqrt())
}

/// Expected per-step excess loss of the fused sensor over the best
/// competitor: `d_max sqrt(ln(M) / (2n))`.
pub fn regret_bound(num_competitors: usize, horizon: usize, d_max: f64) -> Result<f64> {
    if num_competitors < 2 {
        return Err(Error::InvalidParameter {
            name: "num_competitors",
            value: num_competitors as f64,
            requirement: "needs at least 2 competitors",
        });
    }
    if horizon == 0 {
        return Err(Error::InvalidParameter {
            name: "horizon",
            value: 0.0,
            requirement: "must be positive",
        });
    }
    Ok(d_max * ((num_competitors as f64).ln() / (2.0 * horizon as f64)).sqrt())
}

/// How the learning rate is chosen over the run.
#[derive(Copy, Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "mode", content = "value")]
pub enum EtaSchedule {
    /// One fixed rate for the whole horizon.
    Fixed(f64),
    /// `default_eta` for the full horizon.
    Auto,
    /// Exponentially growing blocks (1, 2, 4, ...), each restarted with the
    /// block-optimal rate; trades a constant factor for horizon freedom.
    Doubling,
}

#[derive(Clone, Debug)]
pub struct FusionOptions {
    /// Keep the full `(n + 1) x M` weight history. Disable for long sweeps
    /// where only the summary is needed.
    pub record_weights: bool,
}

impl Default for FusionOptions {
    fn default() -> Self {
        FusionOptions {
            record_weights: true,
        }
    }
}

/// Complete trace of one fusion run.
#[derive(Clone, Debug, Serialize)]
pub struct FusionRun {
    pub num_competitors: usize,
    pub horizon: usize,
    /// Learning rate of the (final) block.
    pub eta: f64,
    pub d_max: f64,
    /// Sampled competitor per step.
    pub chosen: Vec<usize>,
    /// Cumulative loss actually charged to the fused sensor.
    pub algorithm_loss: f64,
    /// Final cumulative loss of every competitor.
    pub per_competitor_loss: Vec<f64>,
    /// `algorithm_loss / n - min_j per_competitor_loss_j / n`.
    pub regret: f64,
    /// `d_max sqrt(ln(M) / (2n))`.
    pub regret_bound: f64,
    /// Weights after the final step.
    pub final_weights: Vec<f64>,
    /// Rows t = 0..n of the weight distribution; row 0 is uniform. Empty when
    /// recording is disabled. Serialized separately (weights CSV), not here.
    #[serde(skip)]
    pub weight_history: Vec<Vec<f64>>,
}

/// Runs the exponential-weighting fusion loop with a fixed learning rate.
pub fn online_fusion<C: CompetitorSet>(
    competitors: &C,
    truth: &[u8],
    loss: &Loss,
    eta: f64,
    seed: u64,
) -> Result<FusionRun> {
    online_fusion_with(
        competitors,
        truth,
        loss,
        EtaSchedule::Fixed(eta),
        seed,
        &FusionOptions::default(),
    )
}

/// As [`online_fusion`], with an explicit learning-rate schedule and options.
pub fn online_fusion_with<C: CompetitorSet>(
    competitors: &C,
    truth: &[u8],
    loss: &Loss,
    schedule: EtaSchedule,
    seed: u64,
    options: &FusionOptions,
) -> Result<FusionRun> {
    let m = competitors.num_competitors();
    let n = competitors.horizon();
    if m < 2 {
        return Err(Error::InvalidParameter {
            name: "num_competitors",
            value: m as f64,
            requirement: "needs at least 2 competitors",
        });
    }
    if truth.len() != n {
        return Err(Error::CompetitorShape {
            detail: format!("truth has {} steps, competitors have {n}", truth.len()),
        });
    }
    for (step, &x) in truth.iter().enumerate() {
        if x > 1 {
            return Err(Error::TruthNotBinary {
                step,
                value: x as u64,
            });
        }
    }

    let d_max = loss.d_max();
    let mut eta = match schedule {
        EtaSchedule::Fixed(value) => {
            if !(value > 0.0) {
                return Err(Error::InvalidParameter {
                    name: "eta",
                    value,
                    requirement: "must be positive",
                });
            }
            value
        }
        EtaSchedule::Auto => default_eta(m, n, d_max)?,
        EtaSchedule::Doubling => default_eta(m, 1, d_max)?,
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cumulative = vec![0.0f64; m];
    // Losses the weights are computed from; restarted at doubling blocks.
    let mut weighted_loss = vec![0.0f64; m];
    let mut weights = vec![1.0 / m as f64; m];
    let mut history = Vec::new();
    if options.record_weights {
        history.reserve(n + 1);
        history.push(weights.clone());
    }
    let mut chosen = Vec::with_capacity(n);
    let mut algorithm_loss = 0.0f64;

    let mut block_len = 1usize;
    let mut block_end = if matches!(schedule, EtaSchedule::Doubling) {
        1
    } else {
        n
    };

    for (t, &x) in truth.iter().enumerate() {
        let target = x == 1;

        let pick = sample_index(&weights, rng.gen::<f64>());
        chosen.push(pick);
        algorithm_loss += loss.eval(competitors.output(pick, t), target)?;

        for (j, slot) in weighted_loss.iter_mut().enumerate() {
            let step_loss = loss.eval(competitors.output(j, t), target)?;
            cumulative[j] += step_loss;
            *slot += step_loss;
        }

        if t + 1 == block_end && t + 1 < n {
            block_len *= 2;
            block_end += block_len;
            weighted_loss.iter_mut().for_each(|l| *l = 0.0);
            eta = default_eta(m, block_len, d_max)?;
        }

        // Shifting by the minimum keeps the largest exponent at 0, so the
        // normalizer never underflows; the distribution is unchanged.
        let shift = weighted_loss.iter().copied().fold(f64::INFINITY, f64::min);
        let mut total = 0.0;
        for (w, &l) in weights.iter_mut().zip(&weighted_loss) {
            *w = (-eta * (l - shift)).exp();
            total += *w;
        }
        weights.iter_mut().for_each(|w| *w /= total);
        if options.record_weights {
            history.push(weights.clone());
        }
    }

    let best = cumulative.iter().copied().fold(f64::INFINITY, f64::min);
    let bound = d_max * ((m as f64).ln() / (2.0 * n as f64)).sqrt();
    Ok(FusionRun {
        num_competitors: m,
        horizon: n,
        eta,
        d_max,
        chosen,
        algorithm_loss,
        per_competitor_loss: cumulative,
        regret: algorithm_loss / n as f64 - best / n as f64,
        regret_bound: bound,
        final_weights: weights,
        weight_history: history,
    })
}

fn sample_index(weights: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (index, &w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return index;
        }
    }
    weights.len() - 1
}
