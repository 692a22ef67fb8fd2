//! Multi-sensor symbol data: alphabets, the sensor-by-time symbol grid,
//! quantization of real-valued readings, and subset projection onto
//! product alphabets.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::subset::SubsetMask;

/// A finite symbol alphabet `{0, .., size-1}`.
///
/// Size 1 is representable (a constant stream has entropy 0) but flagged as
/// degenerate; entropy estimation expects size >= 2.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlphabetSpec {
    size: u64,
}

impl AlphabetSpec {
    pub fn new(size: u64) -> Result<Self> {
        if size == 0 {
            return Err(Error::EmptyAlphabet);
        }
        Ok(AlphabetSpec { size })
    }

    pub fn binary() -> Self {
        AlphabetSpec { size: 2 }
    }

    pub const fn size(self) -> u64 {
        self.size
    }

    /// True for single-symbol alphabets, which carry no information.
    pub fn is_degenerate(self) -> bool {
        self.size < 2
    }

    /// Bits needed for a fixed-width binary encoding of one symbol.
    pub fn symbol_bits(self) -> u32 {
        if self.size <= 2 {
            1
        } else {
            64 - (self.size - 1).leading_zeros()
        }
    }

    pub fn contains(self, symbol: u64) -> bool {
        symbol < self.size
    }
}

/// K sensor streams over a shared alphabet, n time steps each. Immutable
/// after construction; all queries are pure reads.
#[derive(Clone, Debug, PartialEq)]
pub struct SensorMatrix {
    alphabet: AlphabetSpec,
    rows: Vec<Vec<u64>>,
    num_steps: usize,
}

impl SensorMatrix {
    /// Validates that rows are non-empty, equal-length, and in-alphabet.
    pub fn new(rows: Vec<Vec<u64>>, alphabet: AlphabetSpec) -> Result<Self> {
        if rows.is_empty() || rows[0].is_empty() {
            return Err(Error::EmptyInput);
        }
        let num_steps = rows[0].len();
        for (sensor, row) in rows.iter().enumerate() {
            if row.len() != num_steps {
                return Err(Error::RaggedRows {
                    row: sensor,
                    got: row.len(),
                    expected: num_steps,
                });
            }
            for (step, &symbol) in row.iter().enumerate() {
                if !alphabet.contains(symbol) {
                    return Err(Error::SymbolOutOfRange {
                        sensor,
                        step,
                        symbol,
                        alphabet: alphabet.size(),
                    });
                }
            }
        }
        Ok(SensorMatrix {
            alphabet,
            rows,
            num_steps,
        })
    }

    /// Single-row matrix, convenient for per-sequence estimators.
    pub fn from_row(row: Vec<u64>, alphabet: AlphabetSpec) -> Result<Self> {
        SensorMatrix::new(vec![row], alphabet)
    }

    pub fn num_sensors(&self) -> usize {
        self.rows.len()
    }

    pub fn num_steps(&self) -> usize {
        self.num_steps
    }

    pub fn alphabet(&self) -> AlphabetSpec {
        self.alphabet
    }

    pub fn row(&self, sensor: usize) -> &[u64] {
        &self.rows[sensor]
    }

    pub fn rows(&self) -> &[Vec<u64>] {
        &self.rows
    }

    pub fn full_mask(&self) -> SubsetMask {
        SubsetMask::full(self.rows.len() as u32)
    }

    pub fn symbol(&self, sensor: usize, step: usize) -> u64 {
        self.rows[sensor][step]
    }
}

/// Quantizes readings in `[0, 1]` onto `{0, .., bins-1}` by `floor(v * bins)`,
/// with 1.0 clamped into the top bin.
pub fn quantize_readings(values: &[f64], bins: u64) -> Result<Vec<u64>> {
    if bins < 2 {
        return Err(Error::TooFewBins { bins });
    }
    values
        .iter()
        .enumerate()
        .map(|(index, &v)| {
            if !v.is_finite() {
                return Err(Error::NonFinite { index });
            }
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::ValueOutOfRange { index, value: v });
            }
            Ok(((v * bins as f64) as u64).min(bins - 1))
        })
        .collect()
}

/// Encodes the member rows of `subset` into a single sequence over the
/// product alphabet of size `alpha^|subset|`. The member with the lowest
/// sensor index contributes the least-significant digit.
pub fn project_subset(matrix: &SensorMatrix, subset: SubsetMask) -> Result<(Vec<u64>, AlphabetSpec)> {
    subset.validate(matrix.num_sensors() as u32)?;
    let alpha = matrix.alphabet().size();
    let members: Vec<usize> = subset.sensors().collect();
    let product_size = checked_product_alphabet(alpha, members.len() as u32)?;

    if members.len() == 1 {
        return Ok((matrix.row(members[0]).to_vec(), AlphabetSpec::new(product_size)?));
    }

    let n = matrix.num_steps();
    let mut projected = Vec::with_capacity(n);
    for t in 0..n {
        let mut symbol = 0u64;
        let mut place = 1u64;
        for &sensor in &members {
            symbol += matrix.symbol(sensor, t) * place;
            place *= alpha;
        }
        projected.push(symbol);
    }
    Ok((projected, AlphabetSpec::new(product_size)?))
}

/// Inverse of the product encoding: the member symbols in ascending sensor
/// order. Used by marginalization and round-trip tests.
pub fn decode_product_symbol(symbol: u64, alpha: u64, member_count: usize) -> Vec<u64> {
    let mut digits = Vec::with_capacity(member_count);
    let mut rest = symbol;
    for _ in 0..member_count {
        digits.push(rest % alpha);
        rest /= alpha;
    }
    digits
}

pub(crate) fn checked_product_alphabet(alpha: u64, member_count: u32) -> Result<u64> {
    alpha
        .checked_pow(member_count)
        .ok_or(Error::ProductAlphabetOverflow {
            alpha,
            size: member_count,
        })
}
