//! Rational and integer helpers shared by the exact modules.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub type Q = BigRational;

pub fn q(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

pub fn qi(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

/// The positive generator of the fractional ideal spanned by `a` and `b`:
/// gcd of the numerators over lcm of the denominators.
pub fn rat_gcd(a: &Q, b: &Q) -> Q {
    if a.is_zero() {
        return b.abs();
    }
    if b.is_zero() {
        return a.abs();
    }
    Q::new(a.numer().gcd(b.numer()), a.denom().lcm(b.denom()))
}

pub fn rat_gcd_all<'a>(it: impl IntoIterator<Item = &'a Q>) -> Q {
    it.into_iter().fold(Q::zero(), |acc, x| rat_gcd(&acc, x))
}

pub fn perfect_square(n: &BigInt) -> Option<BigInt> {
    if n.is_negative() {
        return None;
    }
    let r = n.sqrt();
    if &r * &r == *n {
        Some(r)
    } else {
        None
    }
}

pub fn rational_sqrt(x: &Q) -> Option<Q> {
    let n = perfect_square(x.numer())?;
    let d = perfect_square(x.denom())?;
    Some(Q::new(n, d))
}

fn small_primes() -> &'static [u64] {
    static PRIMES: OnceLock<Vec<u64>> = OnceLock::new();
    PRIMES.get_or_init(|| {
        let limit = 1usize << 16;
        let mut sieve = vec![true; limit + 1];
        let mut out = Vec::new();
        for i in 2..=limit {
            if sieve[i] {
                out.push(i as u64);
                let mut j = i * i;
                while j <= limit {
                    sieve[j] = false;
                    j += i;
                }
            }
        }
        out
    })
}

/// Writes `n = s^2 * f` with `f` squarefree as far as trial division by primes
/// below 2^16 (plus a perfect-square test of the cofactor) can tell. The sign
/// of `n` goes into `f`.
pub fn squarefree_split(n: &BigInt) -> (BigInt, BigInt) {
    assert!(!n.is_zero());
    let neg = n.is_negative();
    let mut m = n.abs();
    let mut s = BigInt::one();
    let mut f = BigInt::one();
    for &p in small_primes() {
        let pb = BigInt::from(p);
        if &pb * &pb > m {
            break;
        }
        let mut e = 0u32;
        while (&m % &pb).is_zero() {
            m /= &pb;
            e += 1;
        }
        if e > 0 {
            s *= pb.pow(e / 2);
            if e % 2 == 1 {
                f *= &pb;
            }
        }
    }
    if let Some(r) = perfect_square(&m) {
        s *= r;
    } else {
        f *= m;
    }
    if neg {
        f = -f;
    }
    (s, f)
}

/// Best-effort factorization by trial division; a leftover cofactor is
/// reported as if it were prime.
pub fn factor_small(n: &BigInt) -> BTreeMap<BigInt, u32> {
    let mut out = BTreeMap::new();
    let mut m = n.abs();
    if m.is_zero() {
        return out;
    }
    for &p in small_primes() {
        let pb = BigInt::from(p);
        if &pb * &pb > m {
            break;
        }
        while (&m % &pb).is_zero() {
            m /= &pb;
            *out.entry(pb.clone()).or_insert(0) += 1;
        }
    }
    if !m.is_one() {
        *out.entry(m).or_insert(0) += 1;
    }
    out
}

/// Exponents `p -> e` with `x = ±∏ p^e`, negative for primes of the
/// denominator.
pub fn rational_valuations(x: &Q) -> BTreeMap<BigInt, i64> {
    let mut out: BTreeMap<BigInt, i64> = BTreeMap::new();
    for (p, e) in factor_small(x.numer()) {
        *out.entry(p).or_insert(0) += e as i64;
    }
    for (p, e) in factor_small(x.denom()) {
        *out.entry(p).or_insert(0) -= e as i64;
    }
    out
}

pub fn pow_q(x: &Q, e: u64) -> Q {
    if e == 0 {
        return Q::one();
    }
    let e32 = u32::try_from(e).expect("exponent too large");
    Q::new(x.numer().pow(e32), x.denom().pow(e32))
}

pub fn q_to_f64(x: &Q) -> f64 {
    let n = x.numer();
    let d = x.denom();
    let nb = n.bits() as i64;
    let db = d.bits() as i64;
    let ns = (nb - 60).max(0);
    let ds = (db - 60).max(0);
    let nf = (n >> (ns as u64)).to_f64().unwrap_or(0.0);
    let df = (d >> (ds as u64)).to_f64().unwrap_or(1.0);
    nf / df * 2f64.powi((ns - ds).clamp(-2000, 2000) as i32)
}

/// Parses an integer or a fraction `a/b`.
pub fn parse_q(s: &str) -> Option<Q> {
    let s = s.trim();
    if let Some((a, b)) = s.split_once('/') {
        let a: BigInt = a.trim().parse().ok()?;
        let b: BigInt = b.trim().parse().ok()?;
        if b.is_zero() {
            return None;
        }
        Some(Q::new(a, b))
    } else {
        Some(Q::from_integer(s.parse().ok()?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn squarefree() {
        let (s, f) = squarefree_split(&BigInt::from(8));
        assert_eq!((s, f), (BigInt::from(2), BigInt::from(2)));
        let (s, f) = squarefree_split(&BigInt::from(-75));
        assert_eq!((s, f), (BigInt::from(5), BigInt::from(-3)));
        let big = BigInt::from(1_000_003u64) * BigInt::from(1_000_003u64) * 7;
        let (s, f) = squarefree_split(&big);
        assert_eq!((s, f), (BigInt::from(1_000_003u64), BigInt::from(7)));
    }

    #[test]
    fn ideal_gcd() {
        assert_eq!(rat_gcd(&q(4, 3), &q(6, 5)), q(2, 15));
        assert_eq!(rat_gcd_all(&[q(3, 1), q(6, 1), Q::zero()]), q(3, 1));
    }

    #[test]
    fn valuations() {
        let v = rational_valuations(&q(12, 5));
        assert_eq!(v[&BigInt::from(2)], 2);
        assert_eq!(v[&BigInt::from(3)], 1);
        assert_eq!(v[&BigInt::from(5)], -1);
    }
}
