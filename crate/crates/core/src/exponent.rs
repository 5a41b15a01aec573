//! Exponents in `[1, ∞]` and the ℓp reductions built on them.

use std::fmt;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// A Lebesgue exponent `p ∈ [1, ∞]`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct Exponent(f64);

impl Exponent {
    pub const ONE: Exponent = Exponent(1.0);
    pub const TWO: Exponent = Exponent(2.0);
    pub const INFINITY: Exponent = Exponent(f64::INFINITY);

    pub fn new(p: f64) -> Result<Self> {
        if p.is_nan() || p < 1.0 {
            return Err(Error::invalid(format!("exponent must lie in [1, inf], got {p}")));
        }
        Ok(Exponent(p))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_infinite(self) -> bool {
        self.0.is_infinite()
    }

    /// ℓp norm of a family of non-negative magnitudes. Scaled by the maximum so
    /// large exponents neither overflow nor underflow.
    pub fn norm<I>(self, values: I) -> f64
    where
        I: IntoIterator<Item = f64>,
    {
        let values: Vec<f64> = values.into_iter().map(f64::abs).collect();
        let max = values.iter().copied().fold(0.0_f64, f64::max);
        if max == 0.0 || self.is_infinite() {
            return max;
        }
        if self.0 == 1.0 {
            return values.iter().sum();
        }
        let p = self.0;
        let sum: f64 = values.iter().map(|v| (v / max).powf(p)).sum();
        max * sum.powf(1.0 / p)
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_infinite() {
            write!(f, "inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

impl std::str::FromStr for Exponent {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "inf" | "infinity" | "∞" => Ok(Exponent::INFINITY),
            other => {
                let p: f64 = other
                    .parse()
                    .map_err(|_| Error::invalid(format!("cannot parse exponent {s:?}")))?;
                Exponent::new(p)
            }
        }
    }
}

impl Serialize for Exponent {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        if self.is_infinite() {
            serializer.serialize_str("inf")
        } else {
            serializer.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Exponent {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        struct ExponentVisitor;

        impl Visitor<'_> for ExponentVisitor {
            type Value = Exponent;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a number >= 1 or the string \"inf\"")
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<Exponent, E> {
                Exponent::new(v).map_err(E::custom)
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Exponent, E> {
                self.visit_f64(v as f64)
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Exponent, E> {
                self.visit_f64(v as f64)
            }

            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Exponent, E> {
                v.parse().map_err(E::custom)
            }
        }

        deserializer.deserialize_any(ExponentVisitor)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_sub_one() {
        assert!(Exponent::new(0.5).is_err());
        assert!(Exponent::new(f64::NAN).is_err());
    }

    #[test]
    fn norms() {
        let v = [3.0, 4.0];
        assert_eq!(Exponent::ONE.norm(v), 7.0);
        assert!((Exponent::TWO.norm(v) - 5.0).abs() < 1e-15);
        assert_eq!(Exponent::INFINITY.norm(v), 4.0);
        assert_eq!(Exponent::TWO.norm([0.0, 0.0]), 0.0);
        // huge exponent stays finite
        let big = Exponent::new(1e6).unwrap().norm([1e300, 1e300]);
        assert!((big / 1e300 - 1.0).abs() < 1e-5);
    }

    #[test]
    fn json_forms() {
        let e: Exponent = serde_json::from_str("\"inf\"").unwrap();
        assert!(e.is_infinite());
        let e: Exponent = serde_json::from_str("2").unwrap();
        assert_eq!(e, Exponent::TWO);
        assert_eq!(serde_json::to_string(&Exponent::INFINITY).unwrap(), "\"inf\"");
        assert!(serde_json::from_str::<Exponent>("0.3").is_err());
    }
}
