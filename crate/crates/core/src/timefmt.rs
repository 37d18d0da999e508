//! Millisecond-precision decimal rendering of timestamps.
//!
//! Rounding is done on the shortest decimal representation of the value, so
//! a literal such as `0.0015` rounds half-up to `"0.002"` even though its
//! binary value sits slightly below the midpoint.

use alloc::format;
use alloc::string::{String, ToString};

/// Renders `seconds` with exactly three fractional digits, rounding half away
/// from zero on the decimal expansion.
pub fn format_seconds(seconds: f64) -> String {
    if !seconds.is_finite() {
        return seconds.to_string();
    }
    let negative = seconds < 0.0;
    let text = format!("{}", libm::fabs(seconds));
    let (int_part, frac_part) = match text.split_once('.') {
        Some((i, f)) => (i, f),
        None => (text.as_str(), ""),
    };
    let mut frac = [b'0'; 3];
    for (slot, b) in frac.iter_mut().zip(frac_part.bytes()) {
        *slot = b;
    }
    let round_up = frac_part.as_bytes().get(3).is_some_and(|d| *d >= b'5');
    let int_value: u128 = int_part.parse().unwrap_or(u128::MAX / 2000);
    let frac_value = (frac[0] - b'0') as u128 * 100 + (frac[1] - b'0') as u128 * 10 + (frac[2] - b'0') as u128;
    let millis = int_value * 1000 + frac_value + round_up as u128;
    let sign = if negative && millis != 0 { "-" } else { "" };
    format!("{sign}{}.{:03}", millis / 1000, millis % 1000)
}

/// Quantizes to the value that [`format_seconds`] would print.
pub fn quantize_seconds(seconds: f64) -> f64 {
    format_seconds(seconds).parse().unwrap_or(seconds)
}

/// Serde adapter: seconds as a decimal string, accepting plain numbers on input.
pub mod secs {
    use super::format_seconds;
    use core::fmt;
    use serde::de::{self, Visitor};
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(value: &f64, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_seconds(*value))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        struct SecondsVisitor;

        impl Visitor<'_> for SecondsVisitor {
            type Value = f64;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("seconds as a decimal string or number")
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<f64, E> {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| E::custom(alloc::format!("invalid seconds value {v:?}")))
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> Result<f64, E> {
                Ok(v)
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<f64, E> {
                Ok(v as f64)
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<f64, E> {
                Ok(v as f64)
            }
        }

        d.deserialize_any(SecondsVisitor)
    }
}
