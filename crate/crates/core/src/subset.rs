use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{Error, Result};

/// A subset of sensors encoded as a bitmask: bit `b` set means sensor row `b`
/// is a member. Rows are 0-indexed in code; human-facing output labels row `b`
/// as `s{b+1}`, matching the wide-CSV column headers.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SubsetMask(u64);

impl SubsetMask {
    pub const fn empty() -> Self {
        SubsetMask(0)
    }

    pub const fn from_bits(bits: u64) -> Self {
        SubsetMask(bits)
    }

    pub const fn bits(self) -> u64 {
        self.0
    }

    /// Mask containing every one of the first `k` sensors.
    pub fn full(k: u32) -> Self {
        assert!(k <= 64, "at most 64 sensors are supported");
        if k == 64 {
            SubsetMask(u64::MAX)
        } else {
            SubsetMask((1u64 << k) - 1)
        }
    }

    pub fn singleton(sensor: usize) -> Self {
        assert!(sensor < 64, "at most 64 sensors are supported");
        SubsetMask(1u64 << sensor)
    }

    pub fn from_sensors<I: IntoIterator<Item = usize>>(sensors: I) -> Self {
        let mut mask = 0u64;
        for s in sensors {
            assert!(s < 64, "at most 64 sensors are supported");
            mask |= 1u64 << s;
        }
        SubsetMask(mask)
    }

    pub fn with(self, sensor: usize) -> Self {
        SubsetMask(self.0 | SubsetMask::singleton(sensor).0)
    }

    pub fn contains(self, sensor: usize) -> bool {
        sensor < 64 && self.0 & (1u64 << sensor) != 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    /// Number of member sensors.
    pub fn len(self) -> u32 {
        self.0.count_ones()
    }

    pub fn is_subset_of(self, other: SubsetMask) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn union(self, other: SubsetMask) -> Self {
        SubsetMask(self.0 | other.0)
    }

    pub fn intersection(self, other: SubsetMask) -> Self {
        SubsetMask(self.0 & other.0)
    }

    /// Member sensor rows in ascending order.
    pub fn sensors(self) -> impl Iterator<Item = usize> {
        let mut bits = self.0;
        std::iter::from_fn(move || {
            if bits == 0 {
                None
            } else {
                let s = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(s)
            }
        })
    }

    /// Every non-empty subset of the first `k` sensors, in ascending mask order.
    pub fn all_nonempty(k: u32) -> impl Iterator<Item = SubsetMask> {
        assert!(k < 64, "full lattice enumeration needs k < 64");
        (1..(1u64 << k)).map(SubsetMask)
    }

    /// Errors unless the mask is non-empty and lies within the first `k` sensors.
    pub fn validate(self, k: u32) -> Result<()> {
        if self.is_empty() {
            return Err(Error::EmptySubset);
        }
        if !self.is_subset_of(SubsetMask::full(k)) {
            return Err(Error::SubsetOutOfRange { mask: self.0, k });
        }
        Ok(())
    }

    /// Human label, e.g. `s1+s3` for mask 0b101.
    pub fn label(self) -> String {
        if self.is_empty() {
            return "(empty)".into();
        }
        let parts: Vec<String> = self.sensors().map(|s| format!("s{}", s + 1)).collect();
        parts.join("+")
    }
}

impl fmt::Display for SubsetMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.label())
    }
}
