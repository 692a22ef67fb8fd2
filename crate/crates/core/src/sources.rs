//! Synthetic sensor ensembles with known dependence structure, plus exact
//! entropy oracles for the memoryless case and entropy rates for Markov
//! bases.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{AlphabetSpec, SensorMatrix};
use crate::empirical::{EntropyKind, EntropyVector};
use crate::error::{Error, Result};
use crate::subset::SubsetMask;

/// A generating process for one base sensor.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaseSource {
    /// Independent draws from a fixed distribution over `{0..alpha-1}`.
    Iid { probabilities: Vec<f64> },
    /// Stationary Markov chain; the initial state is drawn from the
    /// stationary distribution, so the stream is stationary from step 0.
    Markov { transition: Vec<Vec<f64>> },
}

/// A sensor computed from earlier-declared sensors. Indices are 0-based
/// positions in the combined ordering: bases first, then derived sensors in
/// declaration order.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Derived {
    Copy { of: usize },
    /// Symbol-wise sum modulo the alphabet size; for binary alphabets this is
    /// the XOR of the two referenced sensors.
    Xor { a: usize, b: usize },
    /// The referenced sensor shifted by `lag` steps; the first `lag` outputs
    /// are padded with symbol 0.
    Delay { of: usize, lag: usize },
    /// Copies the referenced sensor, replacing each symbol with probability
    /// `flip_probability` by a uniformly drawn different symbol.
    NoisyCopy { of: usize, flip_probability: f64 },
    /// Deterministic lookup over the referenced sensors' joint symbol. The
    /// table is indexed by the product encoding of `of` (first listed sensor
    /// is the least-significant digit) and must have `alpha^|of|` entries.
    Function { of: Vec<usize>, table: Vec<u64> },
}

impl Derived {
    fn references(&self) -> Vec<usize> {
        match self {
            Derived::Copy { of } => vec![*of],
            Derived::Xor { a, b } => vec![*a, *b],
            Derived::Delay { of, .. } => vec![*of],
            Derived::NoisyCopy { of, .. } => vec![*of],
            Derived::Function { of, .. } => of.clone(),
        }
    }
}

/// Generative description of a sensor ensemble: i.i.d. or Markov bases plus
/// derived dependents, with a seed for reproducible realizations.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SourceSpec {
    pub bases: Vec<BaseSource>,
    #[serde(default)]
    pub derived: Vec<Derived>,
    pub seed: u64,
}

impl SourceSpec {
    pub fn num_sensors(&self) -> usize {
        self.bases.len() + self.derived.len()
    }

    /// The shared alphabet, deduced from the bases (all must agree).
    pub fn alphabet(&self) -> Result<AlphabetSpec> {
        let first = self
            .bases
            .first()
            .map(base_alphabet_size)
            .ok_or(Error::EmptyInput)?;
        for base in &self.bases {
            if base_alphabet_size(base) != first {
                return Err(Error::InvalidParameter {
                    name: "bases",
                    value: base_alphabet_size(base) as f64,
                    requirement: "all bases must share one alphabet size",
                });
            }
        }
        AlphabetSpec::new(first)
    }

    pub fn validate(&self) -> Result<()> {
        let alpha = self.alphabet()?.size();
        for base in &self.bases {
            match base {
                BaseSource::Iid { probabilities } => validate_distribution(probabilities)?,
                BaseSource::Markov { transition } => validate_transition(transition)?,
            }
        }
        for (i, d) in self.derived.iter().enumerate() {
            let index = self.bases.len() + i;
            for referenced in d.references() {
                if referenced >= index {
                    return Err(Error::ForwardReference { index, referenced });
                }
            }
            match d {
                Derived::NoisyCopy {
                    flip_probability, ..
                } => {
                    if !(0.0..=1.0).contains(flip_probability) {
                        return Err(Error::InvalidParameter {
                            name: "flip_probability",
                            value: *flip_probability,
                            requirement: "must lie in [0, 1]",
                        });
                    }
                }
                Derived::Function { of, table } => {
                    let expected = alpha.checked_pow(of.len() as u32).ok_or(
                        Error::ProductAlphabetOverflow {
                            alpha,
                            size: of.len() as u32,
                        },
                    )?;
                    if table.len() as u64 != expected {
                        return Err(Error::BadLookupTable {
                            index,
                            detail: format!("has {} entries, expected {expected}", table.len()),
                        });
                    }
                    if let Some(bad) = table.iter().find(|&&v| v >= alpha) {
                        return Err(Error::BadLookupTable {
                            index,
                            detail: format!("entry {bad} is outside the alphabet of size {alpha}"),
                        });
                    }
                }
                Derived::Delay { lag, .. } => {
                    if *lag == 0 {
                        return Err(Error::InvalidParameter {
                            name: "lag",
                            value: 0.0,
                            requirement: "must be positive",
                        });
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Draws a seeded, reproducible realization of length `n`.
    pub fn generate(&self, n: usize) -> Result<SensorMatrix> {
        self.validate()?;
        let max_lag = self
            .derived
            .iter()
            .filter_map(|d| match d {
                Derived::Delay { lag, .. } => Some(*lag),
                _ => None,
            })
            .max()
            .unwrap_or(0);
        if n == 0 || n < max_lag + 1 {
            return Err(Error::InvalidParameter {
                name: "n",
                value: n as f64,
                requirement: "must exceed the largest delay lag",
            });
        }

        let alpha = self.alphabet()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut rows: Vec<Vec<u64>> = Vec::with_capacity(self.num_sensors());

        for base in &self.bases {
            rows.push(match base {
                BaseSource::Iid { probabilities } => (0..n)
                    .map(|_| draw_from(probabilities, &mut rng))
                    .collect(),
                BaseSource::Markov { transition } => {
                    let stationary = markov_stationary(transition)?;
                    let mut state = draw_from(&stationary, &mut rng) as usize;
                    let mut row = Vec::with_capacity(n);
                    row.push(state as u64);
                    for _ in 1..n {
                        state = draw_from(&transition[state], &mut rng) as usize;
                        row.push(state as u64);
                    }
                    row
                }
            });
        }

        for d in &self.derived {
            let row = match d {
                Derived::Copy { of } => rows[*of].clone(),
                Derived::Xor { a, b } => rows[*a]
                    .iter()
                    .zip(&rows[*b])
                    .map(|(&x, &y)| (x + y) % alpha.size())
                    .collect(),
                Derived::Delay { of, lag } => {
                    let mut row = vec![0u64; *lag];
                    row.extend_from_slice(&rows[*of][..n - lag]);
                    row
                }
                Derived::NoisyCopy {
                    of,
                    flip_probability,
                } => rows[*of]
                    .iter()
                    .map(|&s| {
                        if rng.gen::<f64>() < *flip_probability {
                            flip_symbol(s, alpha.size(), &mut rng)
                        } else {
                            s
                        }
                    })
                    .collect(),
                Derived::Function { of, table } => (0..n)
                    .map(|t| {
                        let mut index = 0u64;
                        let mut place = 1u64;
                        for &r in of {
                            index += rows[r][t] * place;
                            place *= alpha.size();
                        }
                        table[index as usize]
                    })
                    .collect(),
            };
            rows.push(row);
        }

        SensorMatrix::new(rows, alpha)
    }

    /// Exact first-order joint entropies, by enumerating the joint law of all
    /// sensors. Only memoryless specs qualify: Markov bases and delays have
    /// no first-order analytic law and are rejected.
    pub fn analytic_entropy_vector(&self) -> Result<EntropyVector> {
        self.validate()?;
        for base in &self.bases {
            if matches!(base, BaseSource::Markov { .. }) {
                return Err(Error::NotMemoryless {
                    what: "markov base",
                });
            }
        }
        if self
            .derived
            .iter()
            .any(|d| matches!(d, Derived::Delay { .. }))
        {
            return Err(Error::NotMemoryless {
                what: "delay derivation",
            });
        }

        let alpha = self.alphabet()?.size();
        let k = self.num_sensors();

        // Enumerate base symbol combinations, then branch over each noisy
        // copy's outcomes; zero-probability branches are skipped so that the
        // support stays exact.
        let mut joint: HashMap<Vec<u64>, f64> = HashMap::new();
        let mut stack: Vec<(Vec<u64>, f64)> = vec![(Vec::new(), 1.0)];
        while let Some((symbols, prob)) = stack.pop() {
            let index = symbols.len();
            if index == k {
                *joint.entry(symbols).or_insert(0.0) += prob;
                continue;
            }
            if index < self.bases.len() {
                let BaseSource::Iid { probabilities } = &self.bases[index] else {
                    unreachable!("markov bases rejected above");
                };
                for (symbol, &p) in probabilities.iter().enumerate() {
                    if p > 0.0 {
                        let mut next = symbols.clone();
                        next.push(symbol as u64);
                        stack.push((next, prob * p));
                    }
                }
                continue;
            }
            match &self.derived[index - self.bases.len()] {
                Derived::Copy { of } => {
                    let value = symbols[*of];
                    let mut next = symbols;
                    next.push(value);
                    stack.push((next, prob));
                }
                Derived::Xor { a, b } => {
                    let value = (symbols[*a] + symbols[*b]) % alpha;
                    let mut next = symbols;
                    next.push(value);
                    stack.push((next, prob));
                }
                Derived::NoisyCopy {
                    of,
                    flip_probability,
                } => {
                    let source = symbols[*of];
                    let keep = 1.0 - flip_probability;
                    if keep > 0.0 {
                        let mut next = symbols.clone();
                        next.push(source);
                        stack.push((next, prob * keep));
                    }
                    if *flip_probability > 0.0 {
                        let each = flip_probability / (alpha - 1) as f64;
                        for other in (0..alpha).filter(|&s| s != source) {
                            let mut next = symbols.clone();
                            next.push(other);
                            stack.push((next, prob * each));
                        }
                    }
                }
                Derived::Function { of, table } => {
                    let mut index = 0u64;
                    let mut place = 1u64;
                    for &r in of {
                        index += symbols[r] * place;
                        place *= alpha;
                    }
                    let mut next = symbols;
                    next.push(table[index as usize]);
                    stack.push((next, prob));
                }
                Derived::Delay { .. } => unreachable!("delays rejected above"),
            }
        }

        let mut vector = EntropyVector::new(k as u32, EntropyKind::Analytic);
        for mask in SubsetMask::all_nonempty(k as u32) {
            let members: Vec<usize> = mask.sensors().collect();
            let mut marginal: HashMap<Vec<u64>, f64> = HashMap::new();
            for (symbols, &prob) in &joint {
                let key: Vec<u64> = members.iter().map(|&s| symbols[s]).collect();
                *marginal.entry(key).or_insert(0.0) += prob;
            }
            let mut h = 0.0;
            for &p in marginal.values() {
                if p > 0.0 {
                    h -= p * p.log2();
                }
            }
            vector.insert(mask, h.max(0.0))?;
        }
        Ok(vector)
    }
}

fn base_alphabet_size(base: &BaseSource) -> u64 {
    match base {
        BaseSource::Iid { probabilities } => probabilities.len() as u64,
        BaseSource::Markov { transition } => transition.len() as u64,
    }
}

fn validate_distribution(probabilities: &[f64]) -> Result<()> {
    if probabilities.is_empty() {
        return Err(Error::EmptyAlphabet);
    }
    let mut sum = 0.0;
    for (index, &p) in probabilities.iter().enumerate() {
        if !p.is_finite() || p < 0.0 {
            return Err(Error::InvalidProbability { index, value: p });
        }
        sum += p;
    }
    if (sum - 1.0).abs() > 1e-12 {
        return Err(Error::NotStochastic { row: 0, sum });
    }
    Ok(())
}

fn validate_transition(transition: &[Vec<f64>]) -> Result<()> {
    if transition.is_empty() {
        return Err(Error::EmptyAlphabet);
    }
    let states = transition.len();
    for (row, probs) in transition.iter().enumerate() {
        if probs.len() != states {
            return Err(Error::RaggedRows {
                row,
                got: probs.len(),
                expected: states,
            });
        }
        let mut sum = 0.0;
        for (index, &p) in probs.iter().enumerate() {
            if !p.is_finite() || p < 0.0 {
                return Err(Error::InvalidProbability { index, value: p });
            }
            sum += p;
        }
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::NotStochastic { row, sum });
        }
    }
    Ok(())
}

fn draw_from<R: Rng>(probabilities: &[f64], rng: &mut R) -> u64 {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (symbol, &p) in probabilities.iter().enumerate() {
        acc += p;
        if u < acc {
            return symbol as u64;
        }
    }
    probabilities.len() as u64 - 1
}

fn flip_symbol<R: Rng>(symbol: u64, alpha: u64, rng: &mut R) -> u64 {
    if alpha < 2 {
        return symbol;
    }
    let draw = rng.gen_range(0..alpha - 1);
    if draw >= symbol {
        draw + 1
    } else {
        draw
    }
}

/// Stationary distribution of an irreducible chain, by direct linear solve of
/// `pi P = pi`, `sum pi = 1`; the residual is verified to 1e-12.
pub fn markov_stationary(transition: &[Vec<f64>]) -> Result<Vec<f64>> {
    validate_transition(transition)?;
    if !is_irreducible(transition) {
        return Err(Error::ReducibleChain);
    }
    let m = transition.len();

    // Unknowns pi_0..pi_{m-1}: rows 0..m-2 from (P^T - I) pi = 0, last row is
    // the normalization constraint.
    let mut a = vec![vec![0.0f64; m + 1]; m];
    for eq in 0..m.saturating_sub(1) {
        for j in 0..m {
            a[eq][j] = transition[j][eq] - if j == eq { 1.0 } else { 0.0 };
        }
    }
    for j in 0..m {
        a[m - 1][j] = 1.0;
    }
    a[m - 1][m] = 1.0;

    // Gaussian elimination with partial pivoting.
    for col in 0..m {
        let pivot = (col..m)
            .max_by(|&x, &y| a[x][col].abs().partial_cmp(&a[y][col].abs()).unwrap())
            .unwrap();
        if a[pivot][col].abs() < 1e-14 {
            return Err(Error::ReducibleChain);
        }
        a.swap(col, pivot);
        for row in 0..m {
            if row != col {
                let factor = a[row][col] / a[col][col];
                for j in col..=m {
                    a[row][j] -= factor * a[col][j];
                }
            }
        }
    }
    let mut stationary: Vec<f64> = (0..m).map(|i| a[i][m] / a[i][i]).collect();
    for p in &mut stationary {
        *p = p.max(0.0);
    }
    let total: f64 = stationary.iter().sum();
    for p in &mut stationary {
        *p /= total;
    }

    for state in 0..m {
        let inflow: f64 = (0..m).map(|j| stationary[j] * transition[j][state]).sum();
        if (inflow - stationary[state]).abs() > 1e-12 {
            return Err(Error::ReducibleChain);
        }
    }
    Ok(stationary)
}

/// Entropy rate of a stationary irreducible chain in bits per step:
/// the stationary mixture of the per-state transition entropies.
pub fn markov_entropy_rate(transition: &[Vec<f64>]) -> Result<f64> {
    let stationary = markov_stationary(transition)?;
    let mut rate = 0.0;
    for (state, probs) in transition.iter().enumerate() {
        let mut h = 0.0;
        for &p in probs {
            if p > 0.0 {
                h -= p * p.log2();
            }
        }
        rate += stationary[state] * h;
    }
    Ok(rate.max(0.0))
}

fn is_irreducible(transition: &[Vec<f64>]) -> bool {
    let m = transition.len();
    let reaches = |start: usize| -> Vec<bool> {
        let mut seen = vec![false; m];
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(state) = stack.pop() {
            for (next, &p) in transition[state].iter().enumerate() {
                if p > 0.0 && !seen[next] {
                    seen[next] = true;
                    stack.push(next);
                }
            }
        }
        seen
    };
    (0..m).all(|s| reaches(s).iter().all(|&r| r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::empirical::empirical_entropy_vector;

    fn fair_bit() -> BaseSource {
        BaseSource::Iid {
            probabilities: vec![0.5, 0.5],
        }
    }

    /// Two fair bits plus their XOR: the running example of a dependent
    /// triple whose pairs are all independent.
    pub(crate) fn xor_triple_spec(seed: u64) -> SourceSpec {
        SourceSpec {
            bases: vec![fair_bit(), fair_bit()],
            derived: vec![Derived::Xor { a: 0, b: 1 }],
            seed,
        }
    }

    #[test]
    fn generation_is_reproducible() {
        let spec = SourceSpec {
            bases: vec![fair_bit()],
            derived: vec![],
            seed: 1234,
        };
        let a = spec.generate(4).unwrap();
        let b = spec.generate(4).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.num_steps(), 4);
    }

    #[test]
    fn copy_rows_match() {
        let spec = SourceSpec {
            bases: vec![fair_bit()],
            derived: vec![Derived::Copy { of: 0 }],
            seed: 9,
        };
        let m = spec.generate(64).unwrap();
        assert_eq!(m.row(0), m.row(1));
    }

    #[test]
    fn xor_triple_empirical_matches_analytic() {
        let spec = xor_triple_spec(42);
        let m = spec.generate(100_000).unwrap();
        let v = empirical_entropy_vector(&m, None).unwrap();
        assert!((v.value(SubsetMask::from_bits(0b111)).unwrap() - 2.0).abs() < 0.02);
        assert!((v.value(SubsetMask::from_bits(0b011)).unwrap() - 2.0).abs() < 0.02);
    }

    #[test]
    fn analytic_independent_pair() {
        let spec = SourceSpec {
            bases: vec![fair_bit(), fair_bit()],
            derived: vec![],
            seed: 0,
        };
        let v = spec.analytic_entropy_vector().unwrap();
        assert_eq!(v.value(SubsetMask::from_bits(0b01)), Some(1.0));
        assert_eq!(v.value(SubsetMask::from_bits(0b10)), Some(1.0));
        assert_eq!(v.value(SubsetMask::from_bits(0b11)), Some(2.0));
    }

    #[test]
    fn analytic_xor_triple() {
        let v = xor_triple_spec(0).analytic_entropy_vector().unwrap();
        for mask in SubsetMask::all_nonempty(3) {
            let expected = if mask.len() == 1 { 1.0 } else { 2.0 };
            assert!(
                (v.value(mask).unwrap() - expected).abs() < 1e-12,
                "mask {mask}"
            );
        }
    }

    #[test]
    fn noiseless_copy_equals_copy() {
        let noisy = SourceSpec {
            bases: vec![fair_bit()],
            derived: vec![Derived::NoisyCopy {
                of: 0,
                flip_probability: 0.0,
            }],
            seed: 3,
        };
        let copied = SourceSpec {
            bases: vec![fair_bit()],
            derived: vec![Derived::Copy { of: 0 }],
            seed: 3,
        };
        let a = noisy.analytic_entropy_vector().unwrap();
        let b = copied.analytic_entropy_vector().unwrap();
        for mask in SubsetMask::all_nonempty(2) {
            assert_eq!(a.value(mask), b.value(mask));
        }
    }

    #[test]
    fn delay_pads_with_zeros() {
        let spec = SourceSpec {
            bases: vec![fair_bit()],
            derived: vec![Derived::Delay { of: 0, lag: 2 }],
            seed: 11,
        };
        let m = spec.generate(10).unwrap();
        assert_eq!(&m.row(1)[..2], &[0, 0]);
        assert_eq!(&m.row(1)[2..], &m.row(0)[..8]);
        // n must exceed the lag.
        assert!(spec.generate(2).is_err());
    }

    #[test]
    fn analytic_rejects_memory() {
        let delayed = SourceSpec {
            bases: vec![fair_bit()],
            derived: vec![Derived::Delay { of: 0, lag: 1 }],
            seed: 0,
        };
        assert!(matches!(
            delayed.analytic_entropy_vector(),
            Err(Error::NotMemoryless { .. })
        ));

        let markov = SourceSpec {
            bases: vec![BaseSource::Markov {
                transition: vec![vec![0.9, 0.1], vec![0.2, 0.8]],
            }],
            derived: vec![],
            seed: 0,
        };
        assert!(matches!(
            markov.analytic_entropy_vector(),
            Err(Error::NotMemoryless { .. })
        ));
    }

    #[test]
    fn spec_validation_errors() {
        let forward = SourceSpec {
            bases: vec![fair_bit()],
            derived: vec![Derived::Copy { of: 5 }],
            seed: 0,
        };
        assert!(matches!(
            forward.validate(),
            Err(Error::ForwardReference {
                index: 1,
                referenced: 5
            })
        ));

        let bad = SourceSpec {
            bases: vec![BaseSource::Iid {
                probabilities: vec![0.5, 0.6],
            }],
            derived: vec![],
            seed: 0,
        };
        assert!(matches!(bad.validate(), Err(Error::NotStochastic { .. })));

        let table = SourceSpec {
            bases: vec![fair_bit()],
            derived: vec![Derived::Function {
                of: vec![0],
                table: vec![0, 1, 1],
            }],
            seed: 0,
        };
        assert!(matches!(
            table.validate(),
            Err(Error::BadLookupTable { index: 1, .. })
        ));
    }

    #[test]
    fn stationary_and_rate_examples() {
        // Fair-coin rows: the chain is i.i.d. with rate 1.
        let rate = markov_entropy_rate(&[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        assert!((rate - 1.0).abs() < 1e-12);

        // Identity never leaves its start state: reducible.
        assert!(matches!(
            markov_entropy_rate(&[vec![1.0, 0.0], vec![0.0, 1.0]]),
            Err(Error::ReducibleChain)
        ));

        // Hand solve: pi = (2/3, 1/3).
        let transition = vec![vec![0.9, 0.1], vec![0.2, 0.8]];
        let pi = markov_stationary(&transition).unwrap();
        assert!((pi[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((pi[1] - 1.0 / 3.0).abs() < 1e-12);
        let h2 = |p: f64| -p * p.log2() - (1.0 - p) * (1.0 - p).log2();
        let expected = (2.0 / 3.0) * h2(0.9) + (1.0 / 3.0) * h2(0.8);
        let rate = markov_entropy_rate(&transition).unwrap();
        assert!((rate - expected).abs() < 1e-12);
        assert!((rate - 0.5533).abs() < 1e-4);

        // Periodic but irreducible: unique stationary, deterministic moves.
        let flip = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        let pi = markov_stationary(&flip).unwrap();
        assert!((pi[0] - 0.5).abs() < 1e-12);
        assert_eq!(markov_entropy_rate(&flip).unwrap(), 0.0);
    }

    #[test]
    fn spec_json_roundtrip() {
        let spec = xor_triple_spec(7);
        let json = serde_json::to_string(&spec).unwrap();
        let back: SourceSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back.num_sensors(), 3);
        assert_eq!(back.seed, 7);
        assert_eq!(back.generate(16).unwrap(), spec.generate(16).unwrap());
    }
}
