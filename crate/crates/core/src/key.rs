//! Exact rational keys.
//!
//! Real keys are integers; constructions insert auxiliary elements at
//! positions like `i - 1/2` or `i + 1/4` to steer tree shape without
//! disturbing the order of the real keys. Floating point would make
//! betweenness tests fragile, so keys are exact rationals with an `i64`
//! numerator and denominator, always stored normalized (positive
//! denominator, reduced by gcd). Comparisons cross-multiply in `i128`.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use crate::error::Error;

/// An exact rational key.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Key {
    num: i64,
    den: i64,
}

fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

impl Key {
    /// Rational key `num/den`. Panics on zero denominator.
    pub fn new(num: i64, den: i64) -> Key {
        assert!(den != 0, "zero denominator");
        let sign = if den < 0 { -1 } else { 1 };
        let g = gcd(num, den).max(1);
        Key {
            num: sign * num / g,
            den: sign * den / g,
        }
    }

    /// Integer key.
    pub const fn int(v: i64) -> Key {
        Key { num: v, den: 1 }
    }

    pub fn numer(self) -> i64 {
        self.num
    }

    pub fn denom(self) -> i64 {
        self.den
    }

    pub fn is_integer(self) -> bool {
        self.den == 1
    }

    /// The integer value, if this key is an integer.
    pub fn as_integer(self) -> Option<i64> {
        self.is_integer().then_some(self.num)
    }

    pub fn to_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// `self + p/q` as an exact rational.
    pub fn offset(self, p: i64, q: i64) -> Key {
        Key::new(
            self.num
                .checked_mul(q)
                .and_then(|x| x.checked_add(p.checked_mul(self.den).unwrap()))
                .unwrap(),
            self.den.checked_mul(q).unwrap(),
        )
    }
}

impl Ord for Key {
    fn cmp(&self, other: &Key) -> Ordering {
        let lhs = self.num as i128 * other.den as i128;
        let rhs = other.num as i128 * self.den as i128;
        lhs.cmp(&rhs)
    }
}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Key) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl From<i64> for Key {
    fn from(v: i64) -> Key {
        Key::int(v)
    }
}

impl From<usize> for Key {
    fn from(v: usize) -> Key {
        Key::int(v as i64)
    }
}

impl fmt::Display for Key {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

impl fmt::Debug for Key {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for Key {
    type Err = Error;

    fn from_str(s: &str) -> Result<Key, Error> {
        let parse_int = |t: &str| {
            t.parse::<i64>().map_err(|_| Error::Parse {
                line: 0,
                msg: format!("bad key component {t:?}"),
            })
        };
        match s.split_once('/') {
            None => Ok(Key::int(parse_int(s)?)),
            Some((p, q)) => {
                let den = parse_int(q)?;
                if den <= 0 {
                    return Err(Error::Parse {
                        line: 0,
                        msg: format!("nonpositive denominator in {s:?}"),
                    });
                }
                Ok(Key::new(parse_int(p)?, den))
            }
        }
    }
}
