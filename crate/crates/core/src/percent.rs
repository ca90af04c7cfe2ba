use std::fmt;
use std::str::FromStr;

use serde::{de, Deserialize, Deserializer, Serialize, Serializer};

/// A percentage with two decimal places, stored as hundredths of a percent.
///
/// `87.5%` is `Percent::from_hundredths(8750)`. Thresholds such as 93.75% are
/// represented exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Percent(u32);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid percentage `{0}`: expected a decimal with at most two fractional digits")]
pub struct ParsePercentError(String);

impl Percent {
    pub const fn from_hundredths(h: u32) -> Self {
        Percent(h)
    }

    pub const fn from_whole(p: u32) -> Self {
        Percent(p * 100)
    }

    pub const fn hundredths(self) -> u32 {
        self.0
    }

    /// Smallest `m` such that `100 * m / n >= self`.
    pub fn min_count_of(self, n: usize) -> usize {
        let num = self.0 as u128 * n as u128;
        num.div_ceil(10_000) as usize
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64 / 100.0
    }
}

impl fmt::Display for Percent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let whole = self.0 / 100;
        let frac = self.0 % 100;
        if frac == 0 {
            write!(f, "{whole}")
        } else if frac.is_multiple_of(10) {
            write!(f, "{whole}.{}", frac / 10)
        } else {
            write!(f, "{whole}.{frac:02}")
        }
    }
}

impl FromStr for Percent {
    type Err = ParsePercentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ParsePercentError(s.to_string());
        let s = s.trim().trim_end_matches('%');
        let (whole, frac) = match s.split_once('.') {
            Some((w, f)) => (w, f),
            None => (s, ""),
        };
        if whole.is_empty() || frac.len() > 2 || !whole.bytes().all(|b| b.is_ascii_digit()) {
            return Err(err());
        }
        if !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(err());
        }
        let whole: u32 = whole.parse().map_err(|_| err())?;
        let mut frac_val: u32 = if frac.is_empty() {
            0
        } else {
            frac.parse().map_err(|_| err())?
        };
        if frac.len() == 1 {
            frac_val *= 10;
        }
        whole
            .checked_mul(100)
            .and_then(|w| w.checked_add(frac_val))
            .map(Percent)
            .ok_or_else(err)
    }
}

impl Serialize for Percent {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.as_f64())
    }
}

impl<'de> Deserialize<'de> for Percent {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl<'de> de::Visitor<'de> for V {
            type Value = Percent;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a percentage such as 75 or 87.5")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Percent, E> {
                let scaled = v * 100.0;
                let rounded = scaled.round();
                if !(0.0..=u32::MAX as f64).contains(&rounded) || (scaled - rounded).abs() > 1e-6 {
                    return Err(E::custom(format!(
                        "percentage {v} needs at most two decimals"
                    )));
                }
                Ok(Percent(rounded as u32))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Percent, E> {
                self.visit_f64(v as f64)
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Percent, E> {
                self.visit_f64(v as f64)
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<Percent, E> {
                v.parse().map_err(E::custom)
            }
        }
        d.deserialize_any(V)
    }
}
