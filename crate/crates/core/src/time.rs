//! Fixed-resolution timestamps.
//!
//! Every interchange file carries seconds as decimal text. Holding them as
//! integer microseconds keeps comparisons exact and makes parse/print a
//! lossless round trip.

use std::fmt;
use std::ops::{Add, Sub};
use std::str::FromStr;

use serde::{de, Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub const MICROS_PER_SECOND: i64 = 1_000_000;

/// A point or span on the timeline, in whole microseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Seconds(i64);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TimeParseError {
    #[error("empty time value")]
    Empty,
    #[error("invalid time value {0:?}")]
    Invalid(String),
    #[error("time value {0:?} has more than 6 decimal places")]
    TooPrecise(String),
}

impl Seconds {
    pub const ZERO: Seconds = Seconds(0);

    pub const fn from_micros(us: i64) -> Self {
        Seconds(us)
    }

    pub const fn as_micros(self) -> i64 {
        self.0
    }

    /// Rounds to the nearest microsecond.
    pub fn from_secs_f64(s: f64) -> Self {
        Seconds((s * MICROS_PER_SECOND as f64).round() as i64)
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / MICROS_PER_SECOND as f64
    }

    pub fn is_negative(self) -> bool {
        self.0 < 0
    }
}

impl Add for Seconds {
    type Output = Seconds;
    fn add(self, rhs: Seconds) -> Seconds {
        Seconds(self.0 + rhs.0)
    }
}

impl Sub for Seconds {
    type Output = Seconds;
    fn sub(self, rhs: Seconds) -> Seconds {
        Seconds(self.0 - rhs.0)
    }
}

impl fmt::Display for Seconds {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        let whole = abs / MICROS_PER_SECOND as u64;
        let frac = abs % MICROS_PER_SECOND as u64;
        write!(f, "{sign}{whole}.{frac:06}")
    }
}

impl FromStr for Seconds {
    type Err = TimeParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        if t.is_empty() {
            return Err(TimeParseError::Empty);
        }
        let invalid = || TimeParseError::Invalid(t.to_string());
        let (negative, body) = match t.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, t.strip_prefix('+').unwrap_or(t)),
        };
        let (int_part, frac_part) = match body.split_once('.') {
            Some((i, f)) => (i, f),
            None => (body, ""),
        };
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(invalid());
        }
        if !int_part.bytes().all(|b| b.is_ascii_digit())
            || !frac_part.bytes().all(|b| b.is_ascii_digit())
        {
            return Err(invalid());
        }
        if frac_part.len() > 6 {
            return Err(TimeParseError::TooPrecise(t.to_string()));
        }
        let whole: i64 = if int_part.is_empty() {
            0
        } else {
            int_part.parse().map_err(|_| invalid())?
        };
        let mut frac: i64 = 0;
        for (i, b) in frac_part.bytes().enumerate() {
            frac += i64::from(b - b'0') * 10i64.pow(5 - i as u32);
        }
        let us = whole
            .checked_mul(MICROS_PER_SECOND)
            .and_then(|w| w.checked_add(frac))
            .ok_or_else(invalid)?;
        Ok(Seconds(if negative { -us } else { us }))
    }
}

impl Serialize for Seconds {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

/// Accepts the canonical decimal string, or a JSON number rounded to the
/// nearest microsecond.
impl<'de> Deserialize<'de> for Seconds {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Text(String),
            Number(f64),
        }
        match Repr::deserialize(deserializer)? {
            Repr::Text(s) => s.parse().map_err(de::Error::custom),
            Repr::Number(n) if n.is_finite() => Ok(Seconds::from_secs_f64(n)),
            Repr::Number(n) => Err(de::Error::custom(format!("time {n} is not finite"))),
        }
    }
}
