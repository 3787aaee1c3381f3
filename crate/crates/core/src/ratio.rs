//! Exact non-negative rationals for report arithmetic.

use std::cmp::Ordering;
use std::fmt;

use serde::{Serialize, Serializer};

/// `num / den`. A zero denominator reads as zero.
#[derive(Debug, Clone, Copy)]
pub struct Ratio {
    pub num: u128,
    pub den: u128,
}

impl Ratio {
    pub const ZERO: Ratio = Ratio { num: 0, den: 1 };

    pub fn new(num: u128, den: u128) -> Ratio {
        if den == 0 {
            Ratio::ZERO
        } else {
            Ratio { num, den }
        }
    }

    pub fn as_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// Decimal rendering rounded half up at `places` digits.
    pub fn to_fixed(&self, places: u32) -> String {
        let scale = 10u128.pow(places);
        let scaled = (self.num * scale * 2 + self.den) / (self.den * 2);
        let int = scaled / scale;
        if places == 0 {
            return int.to_string();
        }
        format!("{int}.{:0width$}", scaled % scale, width = places as usize)
    }

    /// `self` as a percentage, rendered with `places` decimals.
    pub fn percent(&self, places: u32) -> String {
        Ratio::new(self.num * 100, self.den).to_fixed(places)
    }
}

impl Default for Ratio {
    fn default() -> Self {
        Ratio::ZERO
    }
}

impl PartialEq for Ratio {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Ratio {}

impl PartialOrd for Ratio {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Ratio {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.num * other.den).cmp(&(other.num * self.den))
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_fixed(6))
    }
}

/// Serialized as a fixed six-decimal string so reports stay byte-stable.
impl Serialize for Ratio {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_fixed(6))
    }
}
