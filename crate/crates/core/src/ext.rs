//! Extended reals with explicit infinities.

use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::fmt;

/// A real number or one of the two infinities. Never holds a NaN.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ExtReal {
    Finite(f64),
    #[serde(with = "pos_inf")]
    PosInf,
    #[serde(with = "neg_inf")]
    NegInf,
}

impl ExtReal {
    pub const ZERO: ExtReal = ExtReal::Finite(0.0);

    /// Wraps a float, mapping signed infinities to the sentinels. Panics on NaN.
    pub fn new(x: f64) -> Self {
        assert!(!x.is_nan(), "NaN has no extended-real value");
        if x == f64::INFINITY {
            ExtReal::PosInf
        } else if x == f64::NEG_INFINITY {
            ExtReal::NegInf
        } else {
            ExtReal::Finite(x)
        }
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            ExtReal::Finite(x) => Some(x),
            _ => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, ExtReal::Finite(_))
    }

    /// Lossy conversion for plotting and JSON-free arithmetic.
    pub fn to_f64(self) -> f64 {
        match self {
            ExtReal::Finite(x) => x,
            ExtReal::PosInf => f64::INFINITY,
            ExtReal::NegInf => f64::NEG_INFINITY,
        }
    }

    /// Product with the convention 0·∞ = 0.
    #[allow(clippy::should_implement_trait)]
    pub fn mul(self, other: ExtReal) -> ExtReal {
        use ExtReal::*;
        match (self, other) {
            (Finite(a), Finite(b)) => Finite(a * b),
            (Finite(a), inf) | (inf, Finite(a)) => {
                if a == 0.0 {
                    Finite(0.0)
                } else if (a > 0.0) == (inf == PosInf) {
                    PosInf
                } else {
                    NegInf
                }
            }
            (PosInf, PosInf) | (NegInf, NegInf) => PosInf,
            _ => NegInf,
        }
    }

    /// Power of a nonnegative value with ∞^α = ∞ for α > 0 and ∞^0 = 1.
    pub fn powf(self, alpha: f64) -> ExtReal {
        match self {
            ExtReal::Finite(x) => ExtReal::new(x.powf(alpha)),
            ExtReal::PosInf if alpha > 0.0 => ExtReal::PosInf,
            ExtReal::PosInf if alpha == 0.0 => ExtReal::Finite(1.0),
            ExtReal::PosInf => ExtReal::Finite(0.0),
            ExtReal::NegInf => ExtReal::NegInf,
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn add(self, other: ExtReal) -> ExtReal {
        use ExtReal::*;
        match (self, other) {
            (Finite(a), Finite(b)) => Finite(a + b),
            (NegInf, _) | (_, NegInf) => NegInf,
            _ => PosInf,
        }
    }
}

impl PartialOrd for ExtReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        use ExtReal::*;
        Some(match (self, other) {
            (Finite(a), Finite(b)) => a.total_cmp(b),
            (NegInf, NegInf) | (PosInf, PosInf) => Ordering::Equal,
            (NegInf, _) | (_, PosInf) => Ordering::Less,
            (PosInf, _) | (_, NegInf) => Ordering::Greater,
        })
    }
}

impl From<f64> for ExtReal {
    fn from(x: f64) -> Self {
        ExtReal::new(x)
    }
}

impl fmt::Display for ExtReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtReal::Finite(x) => write!(f, "{x}"),
            ExtReal::PosInf => write!(f, "+inf"),
            ExtReal::NegInf => write!(f, "-inf"),
        }
    }
}

macro_rules! sentinel {
    ($name:ident, $text:literal) => {
        mod $name {
            use serde::{Deserialize, Deserializer, Serializer};

            pub fn serialize<S: Serializer>(s: S) -> Result<S::Ok, S::Error> {
                s.serialize_str($text)
            }

            pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<(), D::Error> {
                let text = String::deserialize(d)?;
                if text == $text {
                    Ok(())
                } else {
                    Err(serde::de::Error::custom(format!("expected {:?}", $text)))
                }
            }
        }
    };
}

sentinel!(pos_inf, "+inf");
sentinel!(neg_inf, "-inf");

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_times_infinity_is_zero() {
        assert_eq!(ExtReal::ZERO.mul(ExtReal::PosInf), ExtReal::ZERO);
        assert_eq!(ExtReal::PosInf.mul(ExtReal::Finite(2.0)), ExtReal::PosInf);
        assert_eq!(ExtReal::PosInf.powf(0.5), ExtReal::PosInf);
    }

    #[test]
    fn ordering_puts_sentinels_at_the_ends() {
        assert!(ExtReal::NegInf < ExtReal::Finite(-1e300));
        assert!(ExtReal::Finite(1e300) < ExtReal::PosInf);
    }

    #[test]
    fn json_round_trip() {
        for v in [ExtReal::Finite(1.5), ExtReal::PosInf, ExtReal::NegInf] {
            let text = serde_json::to_string(&v).unwrap();
            let back: ExtReal = serde_json::from_str(&text).unwrap();
            assert_eq!(v, back);
        }
    }
}
