//! Exact distance values.
//!
//! Every distance handled by the toolkit is the square root of a nonnegative
//! integer: L1/Linf lattices and integer matrices produce perfect squares,
//! Euclidean lattices produce arbitrary ones. [`Dist`] stores the squared
//! value so that every comparison against a threshold is exact integer
//! arithmetic.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::{BigInt, BigUint};
use num_integer::Roots;
use serde::de::{self, Deserializer, Visitor};
use serde::ser::SerializeStruct;
use serde::{Deserialize, Serialize, Serializer};

/// A distance `sqrt(k)` for a nonnegative integer `k`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Dist(u128);

impl Dist {
    pub const ZERO: Dist = Dist(0);
    pub const ONE: Dist = Dist(1);

    pub const fn from_int(v: u64) -> Dist {
        Dist(v as u128 * v as u128)
    }

    pub const fn from_squared(sq: u128) -> Dist {
        Dist(sq)
    }

    pub const fn squared(self) -> u128 {
        self.0
    }

    /// The integer value, when this distance is a perfect square.
    pub fn as_int(self) -> Option<u64> {
        let root = self.0.sqrt();
        (root * root == self.0).then_some(root as u64)
    }

    pub fn floor_int(self) -> u64 {
        self.0.sqrt() as u64
    }

    pub fn ceil_int(self) -> u64 {
        let root = self.0.sqrt();
        if root * root == self.0 {
            root as u64
        } else {
            root as u64 + 1
        }
    }

    pub fn to_f64(self) -> f64 {
        (self.0 as f64).sqrt()
    }

    /// Largest representable threshold not exceeding the rational `num / den`.
    ///
    /// For any distance `d`, `d <= num/den` iff `d <= Dist::at_most_ratio(num, den)`.
    pub fn at_most_ratio(num: u128, den: u128) -> Dist {
        assert!(den > 0, "zero denominator");
        let n = BigUint::from(num);
        let d = BigUint::from(den);
        let q = (&n * &n) / (&d * &d);
        Dist(to_u128_saturating(&q))
    }

    /// Largest representable threshold not exceeding `ratio * self`.
    pub fn scaled_floor(self, ratio: DistRatio) -> Dist {
        let num = BigUint::from(self.0) * BigUint::from(ratio.num.0);
        let q = num / BigUint::from(ratio.den.0);
        Dist(to_u128_saturating(&q))
    }

    /// Multiplies by an integer exactly (saturating at `u128::MAX`).
    pub fn times(self, k: u64) -> Dist {
        let k2 = k as u128 * k as u128;
        Dist(self.0.saturating_mul(k2))
    }

    /// `self <= a + b`, decided exactly.
    pub fn le_sum(self, a: Dist, b: Dist) -> bool {
        // sqrt(A) <= sqrt(B) + sqrt(C)  <=>  X <= 0 or X^2 <= 4BC, X = A - B - C
        let x = BigInt::from(self.0) - BigInt::from(a.0) - BigInt::from(b.0);
        if x <= BigInt::from(0) {
            return true;
        }
        &x * &x <= BigInt::from(4u8) * BigInt::from(a.0) * BigInt::from(b.0)
    }

    /// `a + b <= self`, decided exactly.
    pub fn ge_sum(self, a: Dist, b: Dist) -> bool {
        // sqrt(A) + sqrt(B) <= sqrt(C)  <=>  X >= 0 and X^2 >= 4AB, X = C - A - B
        let x = BigInt::from(self.0) - BigInt::from(a.0) - BigInt::from(b.0);
        if x < BigInt::from(0) {
            return false;
        }
        &x * &x >= BigInt::from(4u8) * BigInt::from(a.0) * BigInt::from(b.0)
    }

    /// `self <= slope * base + offset`, decided exactly.
    pub fn le_affine(self, slope: DistRatio, base: Dist, offset: u64) -> bool {
        // value of slope*base squared is P/Q with P = num.sq * base.sq, Q = den.sq
        let p = BigInt::from(slope.num.0) * BigInt::from(base.0);
        let q = BigInt::from(slope.den.0);
        let o = BigInt::from(offset);
        // sqrt(A) <= sqrt(P/Q) + o  <=>  Y <= 0 or Y^2 <= 4 o^2 P Q,  Y = A Q - P - o^2 Q
        let y = BigInt::from(self.0) * &q - &p - &o * &o * &q;
        if y <= BigInt::from(0) {
            return true;
        }
        &y * &y <= BigInt::from(4u8) * &o * &o * &p * &q
    }
}

fn to_u128_saturating(v: &BigUint) -> u128 {
    u128::try_from(v).unwrap_or(u128::MAX)
}

impl From<u64> for Dist {
    fn from(v: u64) -> Self {
        Dist::from_int(v)
    }
}

impl fmt::Display for Dist {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.as_int() {
            Some(v) => write!(f, "{v}"),
            None => write!(f, "sqrt({})", self.0),
        }
    }
}

impl fmt::Debug for Dist {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Perfect squares serialize as plain integers, everything else as `"sqrt(k)"`.
impl Serialize for Dist {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self.as_int() {
            Some(v) => s.serialize_u64(v),
            None => s.serialize_str(&format!("sqrt({})", self.0)),
        }
    }
}

impl<'de> Deserialize<'de> for Dist {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct DistVisitor;
        impl Visitor<'_> for DistVisitor {
            type Value = Dist;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a nonnegative integer or a string \"sqrt(k)\"")
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Dist, E> {
                Ok(Dist::from_int(v))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Dist, E> {
                u64::try_from(v)
                    .map(Dist::from_int)
                    .map_err(|_| E::custom("negative distance"))
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Dist, E> {
                if v >= 0.0 && v.fract() == 0.0 && v < u64::MAX as f64 {
                    Ok(Dist::from_int(v as u64))
                } else {
                    Err(E::custom("distances must be integers or sqrt(k)"))
                }
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<Dist, E> {
                let inner = v
                    .strip_prefix("sqrt(")
                    .and_then(|r| r.strip_suffix(')'))
                    .ok_or_else(|| E::custom(format!("bad distance literal {v:?}")))?;
                inner
                    .trim()
                    .parse::<u128>()
                    .map(Dist::from_squared)
                    .map_err(E::custom)
            }
        }
        d.deserialize_any(DistVisitor)
    }
}

/// An exact ratio `num / den` of two distances, `den > 0`. Equality is by value.
#[derive(Clone, Copy)]
pub struct DistRatio {
    pub num: Dist,
    pub den: Dist,
}

impl DistRatio {
    pub const ZERO: DistRatio = DistRatio {
        num: Dist::ZERO,
        den: Dist::ONE,
    };

    pub fn new(num: Dist, den: Dist) -> DistRatio {
        assert!(den > Dist::ZERO, "zero denominator");
        DistRatio { num, den }
    }

    pub fn from_ints(num: u64, den: u64) -> DistRatio {
        DistRatio::new(Dist::from_int(num), Dist::from_int(den))
    }

    pub fn integer(v: u64) -> DistRatio {
        DistRatio::from_ints(v, 1)
    }

    pub fn to_f64(self) -> f64 {
        self.num.to_f64() / self.den.to_f64()
    }

    /// Smallest integer not below this ratio.
    pub fn ceil_int(self) -> u64 {
        let mut v = (self.to_f64().ceil() as u64).saturating_sub(1);
        while DistRatio::integer(v) < self {
            v += 1;
        }
        v
    }
}

impl PartialEq for DistRatio {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for DistRatio {}

impl PartialOrd for DistRatio {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for DistRatio {
    fn cmp(&self, other: &Self) -> Ordering {
        match (
            self.num.0.checked_mul(other.den.0),
            other.num.0.checked_mul(self.den.0),
        ) {
            (Some(a), Some(b)) => a.cmp(&b),
            _ => {
                let a = BigUint::from(self.num.0) * BigUint::from(other.den.0);
                let b = BigUint::from(other.num.0) * BigUint::from(self.den.0);
                a.cmp(&b)
            }
        }
    }
}

impl fmt::Display for DistRatio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == Dist::ONE {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

impl fmt::Debug for DistRatio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl Serialize for DistRatio {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("DistRatio", 3)?;
        st.serialize_field("num", &self.num)?;
        st.serialize_field("den", &self.den)?;
        st.serialize_field("approx", &self.to_f64())?;
        st.end()
    }
}
