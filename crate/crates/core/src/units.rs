//! Decimal amounts for human-edited files: ether as wei (18 decimals) and
//! tokens as subunits (9 decimals).

use std::fmt;

use serde::{de, Deserializer, Serializer};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid amount {input:?}: {reason}")]
pub struct AmountError {
    input: String,
    reason: &'static str,
}

/// Parses `"12"`, `"0.5"` or `"1_000"` into integer base units.
pub fn parse_decimal(s: &str, decimals: u32) -> Result<u128, AmountError> {
    let err = |reason| AmountError {
        input: s.to_string(),
        reason,
    };
    let cleaned: String = s.trim().chars().filter(|&c| c != '_').collect();
    let (whole, frac) = cleaned.split_once('.').unwrap_or((&cleaned, ""));
    if whole.is_empty() && frac.is_empty() {
        return Err(err("empty"));
    }
    if !whole
        .chars()
        .chain(frac.chars())
        .all(|c| c.is_ascii_digit())
    {
        return Err(err("not a non-negative decimal"));
    }
    if frac.len() > decimals as usize {
        return Err(err("too many decimal places"));
    }
    let scale = 10u128.pow(decimals);
    let w: u128 = if whole.is_empty() {
        0
    } else {
        whole.parse().map_err(|_| err("too large"))?
    };
    let f: u128 = if frac.is_empty() {
        0
    } else {
        frac.parse::<u128>().unwrap() * 10u128.pow(decimals - frac.len() as u32)
    };
    w.checked_mul(scale)
        .and_then(|v| v.checked_add(f))
        .ok_or_else(|| err("too large"))
}

/// Formats base units with trailing zero decimals trimmed.
pub fn format_decimal(v: u128, decimals: u32) -> String {
    let scale = 10u128.pow(decimals);
    let (w, f) = (v / scale, v % scale);
    if f == 0 {
        return w.to_string();
    }
    let frac = format!("{f:0width$}", width = decimals as usize);
    format!("{w}.{}", frac.trim_end_matches('0'))
}

struct DecimalVisitor(u32);

impl de::Visitor<'_> for DecimalVisitor {
    type Value = u128;

    fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
        write!(f, "a non-negative integer or decimal string")
    }

    fn visit_u64<E: de::Error>(self, v: u64) -> Result<u128, E> {
        (v as u128)
            .checked_mul(10u128.pow(self.0))
            .ok_or_else(|| E::custom("amount too large"))
    }

    fn visit_i64<E: de::Error>(self, v: i64) -> Result<u128, E> {
        u64::try_from(v)
            .map_err(|_| E::custom("amount must be non-negative"))
            .and_then(|v| self.visit_u64(v))
    }

    fn visit_str<E: de::Error>(self, v: &str) -> Result<u128, E> {
        parse_decimal(v, self.0).map_err(E::custom)
    }
}

macro_rules! unit_module {
    ($name:ident, $decimals:expr, $ty:ty) => {
        pub mod $name {
            use super::*;

            pub const DECIMALS: u32 = $decimals;

            pub fn serialize<S: Serializer>(v: &$ty, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_str(&format_decimal(*v as u128, DECIMALS))
            }

            pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<$ty, D::Error> {
                let v = d.deserialize_any(DecimalVisitor(DECIMALS))?;
                <$ty>::try_from(v).map_err(|_| de::Error::custom("amount too large"))
            }
        }
    };
}

unit_module!(ether, 18, u128);
unit_module!(tokens, 9, u64);
unit_module!(tokens_u128, 9, u128);
