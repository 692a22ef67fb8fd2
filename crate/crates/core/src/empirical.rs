//! Joint types (empirical distributions over product symbols) and the
//! first-order joint empirical entropy vector.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::{decode_product_symbol, project_subset, AlphabetSpec, SensorMatrix};
use crate::error::{Error, Result};
use crate::subset::SubsetMask;

/// Default cap on the number of sensors for which the full 2^K - 1 subset
/// lattice may be evaluated without an explicit subset list.
pub const DEFAULT_LATTICE_CAP: u32 = 24;

/// Empirical distribution of the product symbols of a sensor subset.
///
/// Counts are sparse: symbols never observed are absent and count as zero.
#[derive(Clone, Debug, PartialEq)]
pub struct JointType {
    subset: SubsetMask,
    counts: BTreeMap<u64, u64>,
    total: u64,
    base_alphabet: AlphabetSpec,
}

impl JointType {
    pub fn subset(&self) -> SubsetMask {
        self.subset
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn counts(&self) -> &BTreeMap<u64, u64> {
        &self.counts
    }

    pub fn count(&self, symbol: u64) -> u64 {
        self.counts.get(&symbol).copied().unwrap_or(0)
    }

    /// Observed support size.
    pub fn support(&self) -> usize {
        self.counts.len()
    }

    /// `(symbol, relative frequency)` pairs in symbol order.
    pub fn frequencies(&self) -> impl Iterator<Item = (u64, f64)> + '_ {
        let n = self.total as f64;
        self.counts.iter().map(move |(&s, &c)| (s, c as f64 / n))
    }

    /// Empirical entropy in bits, with `0 log 0 = 0`.
    pub fn entropy_bits(&self) -> f64 {
        entropy_of_counts(self.counts.values().copied(), self.total)
    }

    /// Restricts the joint type to `sub`, which must be a non-empty subset of
    /// this type's sensors. The result equals the joint type computed
    /// directly on `sub`, and keeps the same total.
    pub fn marginalize(&self, sub: SubsetMask) -> Result<JointType> {
        if sub.is_empty() {
            return Err(Error::EmptySubset);
        }
        if !sub.is_subset_of(self.subset) {
            return Err(Error::NotASubset {
                sub: sub.bits(),
                of: self.subset.bits(),
            });
        }
        if sub == self.subset {
            return Ok(self.clone());
        }

        let members: Vec<usize> = self.subset.sensors().collect();
        let keep: Vec<bool> = members.iter().map(|&s| sub.contains(s)).collect();
        let alpha = self.base_alphabet.size();

        let mut counts: BTreeMap<u64, u64> = BTreeMap::new();
        for (&symbol, &count) in &self.counts {
            let digits = decode_product_symbol(symbol, alpha, members.len());
            let mut reduced = 0u64;
            let mut place = 1u64;
            for (digit, &kept) in digits.iter().zip(&keep) {
                if kept {
                    reduced += digit * place;
                    place *= alpha;
                }
            }
            *counts.entry(reduced).or_insert(0) += count;
        }
        Ok(JointType {
            subset: sub,
            counts,
            total: self.total,
            base_alphabet: self.base_alphabet,
        })
    }
}

fn entropy_of_counts<I: Iterator<Item = u64>>(counts: I, total: u64) -> f64 {
    let n = total as f64;
    let mut h = 0.0;
    for c in counts {
        if c > 0 {
            let p = c as f64 / n;
            h -= p * p.log2();
        }
    }
    h.max(0.0)
}

/// Tallies the joint type of `subset` in `matrix`.
pub fn joint_type(matrix: &SensorMatrix, subset: SubsetMask) -> Result<JointType> {
    let (projected, _) = project_subset(matrix, subset)?;
    let mut counts: BTreeMap<u64, u64> = BTreeMap::new();
    for symbol in &projected {
        *counts.entry(*symbol).or_insert(0) += 1;
    }
    Ok(JointType {
        subset,
        counts,
        total: matrix.num_steps() as u64,
        base_alphabet: matrix.alphabet(),
    })
}

/// Which estimator (or ground truth) produced an entropy vector.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EntropyKind {
    #[serde(rename = "empirical-first-order")]
    EmpiricalFirstOrder,
    #[serde(rename = "lz78")]
    Lz78,
    #[serde(rename = "analytic")]
    Analytic,
}

impl EntropyKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EntropyKind::EmpiricalFirstOrder => "empirical-first-order",
            EntropyKind::Lz78 => "lz78",
            EntropyKind::Analytic => "analytic",
        }
    }
}

/// A map from non-empty sensor subsets to joint entropies in bits.
///
/// Supports partial evaluation: only the subsets present have been computed.
/// The value of the empty set is 0 by definition and is not stored.
#[derive(Clone, Debug, PartialEq)]
pub struct EntropyVector {
    num_sensors: u32,
    kind: EntropyKind,
    values: BTreeMap<SubsetMask, f64>,
}

impl EntropyVector {
    pub fn new(num_sensors: u32, kind: EntropyKind) -> Self {
        EntropyVector {
            num_sensors,
            kind,
            values: BTreeMap::new(),
        }
    }

    pub fn num_sensors(&self) -> u32 {
        self.num_sensors
    }

    pub fn kind(&self) -> EntropyKind {
        self.kind
    }

    pub fn insert(&mut self, mask: SubsetMask, bits: f64) -> Result<()> {
        mask.validate(self.num_sensors)?;
        if bits < 0.0 {
            return Err(Error::NegativeEntropy {
                mask: mask.bits(),
                value: bits,
            });
        }
        self.values.insert(mask, bits);
        Ok(())
    }

    /// Entropy of `mask` if it has been evaluated. The empty mask reports 0.
    pub fn value(&self, mask: SubsetMask) -> Option<f64> {
        if mask.is_empty() {
            return Some(0.0);
        }
        self.values.get(&mask).copied()
    }

    /// Like [`value`](Self::value) but errors on unevaluated subsets.
    pub fn require(&self, mask: SubsetMask) -> Result<f64> {
        self.value(mask).ok_or(Error::MissingSubset { mask: mask.bits() })
    }

    pub fn is_evaluated(&self, mask: SubsetMask) -> bool {
        mask.is_empty() || self.values.contains_key(&mask)
    }

    pub fn evaluated(&self) -> impl Iterator<Item = (SubsetMask, f64)> + '_ {
        self.values.iter().map(|(&m, &v)| (m, v))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn full_mask(&self) -> SubsetMask {
        SubsetMask::full(self.num_sensors)
    }

    /// True when every non-empty subset of the ground set has a value.
    pub fn is_fully_evaluated(&self) -> bool {
        self.num_sensors < 64 && self.values.len() as u64 == (1u64 << self.num_sensors) - 1
    }

    /// Masks of the full lattice that are missing from this vector.
    pub fn missing(&self) -> Vec<SubsetMask> {
        SubsetMask::all_nonempty(self.num_sensors)
            .filter(|m| !self.values.contains_key(m))
            .collect()
    }
}

/// Computes the first-order joint empirical entropy of every requested
/// subset (all 2^K - 1 when `subsets` is `None`, subject to the lattice cap).
pub fn empirical_entropy_vector(
    matrix: &SensorMatrix,
    subsets: Option<&[SubsetMask]>,
) -> Result<EntropyVector> {
    empirical_entropy_vector_with_cap(matrix, subsets, DEFAULT_LATTICE_CAP)
}

/// As [`empirical_entropy_vector`], with an explicit full-lattice cap.
pub fn empirical_entropy_vector_with_cap(
    matrix: &SensorMatrix,
    subsets: Option<&[SubsetMask]>,
    lattice_cap: u32,
) -> Result<EntropyVector> {
    let k = matrix.num_sensors() as u32;
    let mut vector = EntropyVector::new(k, EntropyKind::EmpiricalFirstOrder);
    match subsets {
        Some(list) => {
            for &mask in list {
                vector.insert(mask, joint_type(matrix, mask)?.entropy_bits())?;
            }
        }
        None => {
            if k > lattice_cap {
                return Err(Error::LatticeTooLarge { k, cap: lattice_cap });
            }
            for mask in SubsetMask::all_nonempty(k) {
                vector.insert(mask, joint_type(matrix, mask)?.entropy_bits())?;
            }
        }
    }
    Ok(vector)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn binary_matrix(rows: Vec<Vec<u64>>) -> SensorMatrix {
        SensorMatrix::new(rows, AlphabetSpec::binary()).unwrap()
    }

    #[test]
    fn balanced_singleton_type() {
        let m = binary_matrix(vec![vec![0, 1, 0, 1]]);
        let t = joint_type(&m, SubsetMask::singleton(0)).unwrap();
        assert_eq!(t.count(0), 2);
        assert_eq!(t.count(1), 2);
        assert_eq!(t.total(), 4);
        assert!((t.entropy_bits() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pair_tally() {
        let m = binary_matrix(vec![vec![0, 0, 1], vec![1, 0, 1]]);
        let t = joint_type(&m, SubsetMask::from_bits(0b11)).unwrap();
        // product symbol = s1 + 2*s2
        assert_eq!(t.count(2), 1); // (0,1)
        assert_eq!(t.count(0), 1); // (0,0)
        assert_eq!(t.count(3), 1); // (1,1)
        assert_eq!(t.support(), 3);
    }

    #[test]
    fn degenerate_type_has_zero_entropy() {
        let m = binary_matrix(vec![vec![0; 10]]);
        let t = joint_type(&m, SubsetMask::singleton(0)).unwrap();
        assert_eq!(t.count(0), 10);
        assert_eq!(t.entropy_bits(), 0.0);
    }

    #[test]
    fn uniform_four_symbols() {
        let m = SensorMatrix::new(vec![vec![0, 1, 2, 3]], AlphabetSpec::new(4).unwrap()).unwrap();
        let t = joint_type(&m, SubsetMask::singleton(0)).unwrap();
        assert!((t.entropy_bits() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn marginal_matches_direct_tally() {
        let m = binary_matrix(vec![vec![0, 0, 1, 1], vec![1, 0, 1, 0]]);
        let joint = joint_type(&m, SubsetMask::from_bits(0b11)).unwrap();
        for sub in [SubsetMask::singleton(0), SubsetMask::singleton(1)] {
            let via_marginal = joint.marginalize(sub).unwrap();
            let direct = joint_type(&m, sub).unwrap();
            assert_eq!(via_marginal, direct);
        }
    }

    #[test]
    fn marginal_identity_and_errors() {
        let m = binary_matrix(vec![vec![0, 1], vec![1, 1]]);
        let joint = joint_type(&m, SubsetMask::from_bits(0b11)).unwrap();
        assert_eq!(joint.marginalize(joint.subset()).unwrap(), joint);
        assert!(matches!(
            joint.marginalize(SubsetMask::empty()),
            Err(Error::EmptySubset)
        ));

        let single = joint_type(&m, SubsetMask::singleton(0)).unwrap();
        assert!(matches!(
            single.marginalize(SubsetMask::from_bits(0b10)),
            Err(Error::NotASubset { .. })
        ));
    }

    #[test]
    fn duplicated_row_vector() {
        let row = vec![0, 1, 1, 0, 1, 0, 0, 1];
        let m = binary_matrix(vec![row.clone(), row]);
        let v = empirical_entropy_vector(&m, None).unwrap();
        for mask in SubsetMask::all_nonempty(2) {
            assert!((v.value(mask).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn lattice_cap_is_enforced() {
        let m = binary_matrix(vec![vec![0, 1]; 4]);
        assert!(matches!(
            empirical_entropy_vector_with_cap(&m, None, 3),
            Err(Error::LatticeTooLarge { k: 4, cap: 3 })
        ));
        // An explicit list bypasses the cap.
        let v =
            empirical_entropy_vector_with_cap(&m, Some(&[SubsetMask::singleton(2)]), 3).unwrap();
        assert_eq!(v.len(), 1);
    }

    #[test]
    fn vector_bookkeeping() {
        let mut v = EntropyVector::new(3, EntropyKind::Analytic);
        assert_eq!(v.value(SubsetMask::empty()), Some(0.0));
        v.insert(SubsetMask::from_bits(0b1), 1.0).unwrap();
        assert!(!v.is_fully_evaluated());
        assert_eq!(v.missing().len(), 6);
        assert!(matches!(
            v.require(SubsetMask::from_bits(0b10)),
            Err(Error::MissingSubset { mask: 0b10 })
        ));
        assert!(matches!(
            v.insert(SubsetMask::from_bits(0b1), -0.5),
            Err(Error::NegativeEntropy { .. })
        ));
        assert!(matches!(
            v.insert(SubsetMask::from_bits(0b1000), 1.0),
            Err(Error::SubsetOutOfRange { .. })
        ));
    }

    #[test]
    fn independent_fair_pair_approaches_two_bits() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5eed);
        let n = 100_000;
        let a: Vec<u64> = (0..n).map(|_| rng.gen_range(0..2u64)).collect();
        let b: Vec<u64> = (0..n).map(|_| rng.gen_range(0..2u64)).collect();
        let m = binary_matrix(vec![a, b]);
        let v = empirical_entropy_vector(&m, None).unwrap();
        assert!((v.value(SubsetMask::from_bits(0b11)).unwrap() - 2.0).abs() < 0.01);
    }

    fn random_matrix_strategy() -> impl Strategy<Value = SensorMatrix> {
        (2usize..=4, 4usize..=64, 2u64..=3).prop_flat_map(|(k, n, alpha)| {
            proptest::collection::vec(proptest::collection::vec(0..alpha, n), k)
                .prop_map(move |rows| {
                    SensorMatrix::new(rows, AlphabetSpec::new(alpha).unwrap()).unwrap()
                })
        })
    }

    proptest! {
        // Empirical entropy vectors are polymatroids for every realization:
        // normalized, monotone, submodular.
        #[test]
        fn empirical_vector_is_a_polymatroid(m in random_matrix_strategy()) {
            let v = empirical_entropy_vector(&m, None).unwrap();
            let k = v.num_sensors();
            let tol = 1e-9;
            for i in SubsetMask::all_nonempty(k) {
                for j in SubsetMask::all_nonempty(k) {
                    if i.is_subset_of(j) {
                        prop_assert!(v.value(i).unwrap() <= v.value(j).unwrap() + tol);
                    }
                    let union = v.value(i.union(j)).unwrap();
                    let inter = v.value(i.intersection(j)).unwrap_or(0.0);
                    prop_assert!(
                        v.value(i).unwrap() + v.value(j).unwrap() >= union + inter - tol
                    );
                }
            }
        }

        #[test]
        fn marginal_entropy_never_exceeds_joint(m in random_matrix_strategy()) {
            let full = m.full_mask();
            let joint = joint_type(&m, full).unwrap();
            for sub in SubsetMask::all_nonempty(m.num_sensors() as u32) {
                let marg = joint.marginalize(sub).unwrap();
                prop_assert!(marg.entropy_bits() <= joint.entropy_bits() + 1e-9);
                // Consistency: marginalizing the full type equals direct tallying.
                prop_assert_eq!(marg, joint_type(&m, sub).unwrap());
            }
        }

        #[test]
        fn frequencies_form_a_distribution(m in random_matrix_strategy()) {
            let t = joint_type(&m, m.full_mask()).unwrap();
            let sum: f64 = t.frequencies().map(|(_, f)| f).sum();
            prop_assert!((sum - 1.0).abs() < 1e-12);
            let max_bits = (m.num_sensors() as f64) * (m.alphabet().size() as f64).log2();
            prop_assert!(t.entropy_bits() <= max_bits + 1e-9);
        }
    }
}
