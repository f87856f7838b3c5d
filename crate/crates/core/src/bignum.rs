//! Helpers for mixing exact big integers with floating-point logarithms.
//!
//! Logarithms of big integers are evaluated from the leading 64 bits. The
//! relative error of the result is below `LOG_REL_ERR`; the `*_upper` and
//! `*_lower` variants widen by that margin so inequalities decided with them
//! are sound.

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};

const LOG_REL_ERR: f64 = 1e-12;

/// Natural logarithm of a positive big integer.
pub fn ln(x: &BigUint) -> f64 {
    assert!(!x.is_zero(), "ln of zero");
    let bits = x.bits();
    if bits <= 64 {
        return (x.to_u64().unwrap() as f64).ln();
    }
    let shift = bits - 64;
    let top = (x >> shift).to_u64().unwrap();
    (top as f64).ln() + shift as f64 * std::f64::consts::LN_2
}

pub fn ln_upper(x: &BigUint) -> f64 {
    let v = ln(x);
    v + v.abs() * LOG_REL_ERR + LOG_REL_ERR
}

/// Lower bound on the value of `x` as an `f64`.
pub fn to_f64_lower(x: &BigUint) -> f64 {
    if x.bits() <= 53 {
        return x.to_u64().unwrap() as f64;
    }
    x.to_f64().unwrap_or(f64::INFINITY) * (1.0 - 4.0 * f64::EPSILON)
}

pub fn to_f64(x: &BigUint) -> f64 {
    x.to_f64().unwrap_or(f64::INFINITY)
}

pub fn to_u64(x: &BigUint) -> Option<u64> {
    x.to_u64()
}

pub fn product<I: IntoIterator<Item = u64>>(it: I) -> BigUint {
    it.into_iter().fold(BigUint::one(), |acc, v| acc * v)
}

/// Serde adapters that write big integers as decimal strings.
pub mod serde_dec {
    use num_bigint::BigUint;
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[BigUint], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(|x| x.to_str_radix(10)))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<BigUint>, D::Error> {
        let raw: Vec<String> = Vec::deserialize(d)?;
        raw.iter()
            .map(|s| BigUint::parse_bytes(s.as_bytes(), 10).ok_or_else(|| D::Error::custom(format!("bad integer {s:?}"))))
            .collect()
    }
}
