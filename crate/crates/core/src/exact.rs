//! Exact rational helpers shared by the probability and Kraft computations.

use std::fmt;
use std::str::FromStr;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::de::{self, Deserializer, Visitor};
use serde::ser::{SerializeStruct, Serializer};
use serde::{Deserialize, Serialize};

/// Arbitrary precision rational used for every exact probability.
pub type Rational = BigRational;

/// Builds `num / den` as a reduced rational.
///
/// Panics if `den == 0`.
pub fn ratio(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

pub fn int(v: u128) -> Rational {
    Rational::from_integer(BigInt::from(v))
}

/// `base^-exp` as an exact rational.
pub fn inv_pow(base: u32, exp: u32) -> Rational {
    let den = BigUint::from(base).pow(exp);
    Rational::new(BigInt::one(), BigInt::from(den))
}

pub fn to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("cannot parse `{0}` as an exact number")]
pub struct ParseExactError(pub String);

/// Parses `"3/5"`, `"0.6"`, `"-1.25e-2"` or `"7"` into an exact rational.
///
/// Decimal notation is read digit by digit, so `"0.1"` is exactly 1/10 rather
/// than the nearest binary double.
pub fn parse_exact(text: &str) -> Result<Rational, ParseExactError> {
    let err = || ParseExactError(text.to_string());
    let s = text.trim();
    if s.is_empty() {
        return Err(err());
    }
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().map_err(|_| err())?;
        let d: BigInt = d.trim().parse().map_err(|_| err())?;
        if d.is_zero() {
            return Err(err());
        }
        return Ok(Rational::new(n, d));
    }

    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(pos) => {
            let e: i32 = s[pos + 1..].parse().map_err(|_| err())?;
            (&s[..pos], e)
        }
        None => (s, 0),
    };
    let (negative, mantissa) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (whole, frac) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    if whole.is_empty() && frac.is_empty() {
        return Err(err());
    }
    if !whole
        .chars()
        .chain(frac.chars())
        .all(|c| c.is_ascii_digit())
    {
        return Err(err());
    }
    let digits = format!("{whole}{frac}");
    let mut value = Rational::from_integer(digits.parse::<BigInt>().map_err(|_| err())?);
    let scale = exponent - frac.len() as i32;
    let ten = Rational::from_integer(BigInt::from(10));
    if scale >= 0 {
        value *= num_traits::pow(ten, scale as usize);
    } else {
        value /= num_traits::pow(ten, (-scale) as usize);
    }
    if negative {
        value = -value;
    }
    Ok(value)
}

/// Converts a double through its shortest round-trip decimal rendering, so
/// `0.6_f64` becomes exactly 3/5.
pub fn from_decimal_f64(v: f64) -> Option<Rational> {
    if !v.is_finite() {
        return None;
    }
    parse_exact(&format!("{v}")).ok()
}

/// An exact number as read from or written to JSON.
///
/// Deserializes from a JSON number (via its decimal text) or a string such as
/// `"1/3"`. Serializes as `{"num": .., "den": .., "decimal": ..}`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Exact(pub Rational);

impl Exact {
    pub fn value(&self) -> &Rational {
        &self.0
    }
}

impl From<Rational> for Exact {
    fn from(r: Rational) -> Self {
        Exact(r)
    }
}

impl fmt::Display for Exact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.denom().is_one() {
            write!(f, "{}", self.0.numer())
        } else {
            write!(f, "{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

impl FromStr for Exact {
    type Err = ParseExactError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_exact(s).map(Exact)
    }
}

fn big_to_json(v: &BigInt) -> serde_json::Value {
    match v.to_i64() {
        Some(i) => serde_json::Value::from(i),
        None => serde_json::Value::from(v.to_string()),
    }
}

impl Serialize for Exact {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut st = serializer.serialize_struct("Exact", 3)?;
        st.serialize_field("num", &big_to_json(self.0.numer()))?;
        st.serialize_field("den", &big_to_json(self.0.denom()))?;
        st.serialize_field("decimal", &to_f64(&self.0))?;
        st.end()
    }
}

struct ExactVisitor;

impl<'de> Visitor<'de> for ExactVisitor {
    type Value = Exact;

    fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("a number, a string like \"1/3\", or {\"num\", \"den\"}")
    }

    fn visit_i64<E: de::Error>(self, v: i64) -> Result<Exact, E> {
        Ok(Exact(Rational::from_integer(BigInt::from(v))))
    }

    fn visit_u64<E: de::Error>(self, v: u64) -> Result<Exact, E> {
        Ok(Exact(Rational::from_integer(BigInt::from(v))))
    }

    fn visit_f64<E: de::Error>(self, v: f64) -> Result<Exact, E> {
        from_decimal_f64(v)
            .map(Exact)
            .ok_or_else(|| E::custom(format!("non-finite number {v}")))
    }

    fn visit_str<E: de::Error>(self, v: &str) -> Result<Exact, E> {
        v.parse().map_err(E::custom)
    }

    fn visit_map<A: de::MapAccess<'de>>(self, mut map: A) -> Result<Exact, A::Error> {
        let mut num: Option<serde_json::Value> = None;
        let mut den: Option<serde_json::Value> = None;
        while let Some(key) = map.next_key::<String>()? {
            match key.as_str() {
                "num" => num = Some(map.next_value()?),
                "den" => den = Some(map.next_value()?),
                _ => {
                    map.next_value::<de::IgnoredAny>()?;
                }
            }
        }
        let part = |v: Option<serde_json::Value>, name: &str| -> Result<BigInt, A::Error> {
            let v = v.ok_or_else(|| de::Error::custom(format!("missing field `{name}`")))?;
            let text = match v {
                serde_json::Value::Number(n) => n.to_string(),
                serde_json::Value::String(s) => s,
                other => return Err(de::Error::custom(format!("bad {name}: {other}"))),
            };
            text.parse()
                .map_err(|_| de::Error::custom(format!("bad {name}: {text}")))
        };
        let num = part(num, "num")?;
        let den = part(den, "den")?;
        if den.is_zero() {
            return Err(de::Error::custom("zero denominator"));
        }
        Ok(Exact(Rational::new(num, den)))
    }
}

impl<'de> Deserialize<'de> for Exact {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        deserializer.deserialize_any(ExactVisitor)
    }
}

pub fn is_probability(r: &Rational) -> bool {
    !r.is_negative() && *r <= Rational::one()
}
