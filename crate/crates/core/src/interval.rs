//! Outward-rounded interval arithmetic over dyadic rationals.
//!
//! Every endpoint is a dyadic number `m * 2^e` with a big-integer mantissa.
//! Operations compute exact results and then round the lower endpoint down
//! and the upper endpoint up to the requested number of mantissa bits, so an
//! interval always contains the true value of the expression it encloses.

use std::cell::RefCell;
use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// A dyadic rational `m * 2^e`, normalized so that `m` is odd (or zero).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Dyadic {
    m: BigInt,
    e: i64,
}

fn floor_div(n: &BigInt, d: &BigInt) -> BigInt {
    n.div_floor(d)
}

fn ceil_div(n: &BigInt, d: &BigInt) -> BigInt {
    -((-n).div_floor(d))
}

impl Dyadic {
    pub fn new(m: BigInt, e: i64) -> Self {
        let mut d = Dyadic { m, e };
        d.normalize();
        d
    }

    fn normalize(&mut self) {
        if self.m.is_zero() {
            self.e = 0;
            return;
        }
        if let Some(tz) = self.m.trailing_zeros() {
            if tz > 0 {
                self.m >>= tz;
                self.e += tz as i64;
            }
        }
    }

    pub fn zero() -> Self {
        Dyadic { m: BigInt::zero(), e: 0 }
    }

    pub fn from_int(v: i64) -> Self {
        Dyadic::new(BigInt::from(v), 0)
    }

    pub fn from_bigint(v: BigInt) -> Self {
        Dyadic::new(v, 0)
    }

    pub fn mantissa(&self) -> &BigInt {
        &self.m
    }

    pub fn exponent(&self) -> i64 {
        self.e
    }

    pub fn is_zero(&self) -> bool {
        self.m.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.m.is_negative()
    }

    pub fn is_positive(&self) -> bool {
        self.m.is_positive()
    }

    pub fn signum(&self) -> i32 {
        if self.m.is_zero() {
            0
        } else if self.m.is_positive() {
            1
        } else {
            -1
        }
    }

    pub fn bits(&self) -> u64 {
        self.m.bits()
    }

    pub fn abs(&self) -> Dyadic {
        Dyadic { m: self.m.abs(), e: self.e }
    }

    /// Multiplication by `2^k`, exact.
    pub fn shl(&self, k: i64) -> Dyadic {
        if self.m.is_zero() {
            return self.clone();
        }
        Dyadic { m: self.m.clone(), e: self.e + k }
    }

    /// Round to at most `prec` mantissa bits, toward +inf when `up`.
    pub fn round(&self, prec: u32, up: bool) -> Dyadic {
        let bits = self.m.bits();
        if bits <= prec as u64 {
            return self.clone();
        }
        let s = bits - prec as u64;
        let p = BigInt::one() << s;
        let q = if up { ceil_div(&self.m, &p) } else { floor_div(&self.m, &p) };
        Dyadic::new(q, self.e + s as i64)
    }

    fn aligned(a: &Dyadic, b: &Dyadic) -> (BigInt, BigInt, i64) {
        let e = a.e.min(b.e);
        let am = &a.m << ((a.e - e) as u64);
        let bm = &b.m << ((b.e - e) as u64);
        (am, bm, e)
    }

    pub fn add(&self, o: &Dyadic) -> Dyadic {
        if self.is_zero() {
            return o.clone();
        }
        if o.is_zero() {
            return self.clone();
        }
        let (a, b, e) = Dyadic::aligned(self, o);
        Dyadic::new(a + b, e)
    }

    pub fn sub(&self, o: &Dyadic) -> Dyadic {
        self.add(&o.neg())
    }

    pub fn neg(&self) -> Dyadic {
        Dyadic { m: -&self.m, e: self.e }
    }

    pub fn mul(&self, o: &Dyadic) -> Dyadic {
        Dyadic::new(&self.m * &o.m, self.e + o.e)
    }

    /// `n / d` rounded to `prec` bits in the given direction.
    pub fn from_ratio(n: &BigInt, d: &BigInt, prec: u32, up: bool) -> Dyadic {
        assert!(!d.is_zero(), "dyadic division by zero");
        if n.is_zero() {
            return Dyadic::zero();
        }
        let (n, d) = if d.is_negative() { (-n, -d) } else { (n.clone(), d.clone()) };
        let s = prec as i64 + d.bits() as i64 - n.bits() as i64 + 2;
        let (num, den) = if s >= 0 {
            (&n << (s as u64), d)
        } else {
            (n, &d << ((-s) as u64))
        };
        let q = if up { ceil_div(&num, &den) } else { floor_div(&num, &den) };
        Dyadic::new(q, -s).round(prec, up)
    }

    pub fn from_rational(q: &BigRational, prec: u32, up: bool) -> Dyadic {
        Dyadic::from_ratio(q.numer(), q.denom(), prec, up)
    }

    pub fn div(&self, o: &Dyadic, prec: u32, up: bool) -> Dyadic {
        let r = Dyadic::from_ratio(&self.m, &o.m, prec, up);
        r.shl(self.e - o.e)
    }

    /// Square root of a nonnegative dyadic, rounded in the given direction.
    pub fn sqrt(&self, prec: u32, up: bool) -> Dyadic {
        assert!(!self.is_negative(), "sqrt of negative dyadic");
        if self.is_zero() {
            return Dyadic::zero();
        }
        let bits = self.m.bits() as i64;
        let mut s = (2 * prec as i64 + 4 - bits).max(0);
        if (self.e - s).rem_euclid(2) != 0 {
            s += 1;
        }
        let mm = &self.m << (s as u64);
        let mut r = mm.sqrt();
        if up && &r * &r != mm {
            r += 1;
        }
        Dyadic::new(r, (self.e - s) / 2).round(prec, up)
    }

    pub fn to_rational(&self) -> BigRational {
        if self.e >= 0 {
            BigRational::from_integer(&self.m << (self.e as u64))
        } else {
            BigRational::new(self.m.clone(), BigInt::one() << ((-self.e) as u64))
        }
    }

    pub fn to_f64(&self) -> f64 {
        if self.m.is_zero() {
            return 0.0;
        }
        let bits = self.m.bits() as i64;
        let shift = (bits - 60).max(0);
        let top = (&self.m >> (shift as u64)).to_f64().unwrap_or(0.0);
        let exp = self.e + shift;
        if exp > 2000 {
            return if top > 0.0 { f64::INFINITY } else { f64::NEG_INFINITY };
        }
        if exp < -2000 {
            return 0.0;
        }
        top * 2f64.powi(exp as i32)
    }
}

impl PartialOrd for Dyadic {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Dyadic {
    fn cmp(&self, other: &Self) -> Ordering {
        let (a, b, _) = Dyadic::aligned(self, other);
        a.cmp(&b)
    }
}

/// A closed real interval `[lo, hi]` with dyadic endpoints.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Interval {
    pub lo: Dyadic,
    pub hi: Dyadic,
}

impl Interval {
    pub fn new(lo: Dyadic, hi: Dyadic) -> Self {
        debug_assert!(lo <= hi, "inverted interval");
        Interval { lo, hi }
    }

    pub fn point(v: Dyadic) -> Self {
        Interval { lo: v.clone(), hi: v }
    }

    pub fn zero() -> Self {
        Interval::point(Dyadic::zero())
    }

    pub fn from_int(v: i64) -> Self {
        Interval::point(Dyadic::from_int(v))
    }

    pub fn from_rational(q: &BigRational, prec: u32) -> Self {
        if q.denom().is_one() {
            return Interval::point(Dyadic::from_bigint(q.numer().clone()));
        }
        Interval {
            lo: Dyadic::from_rational(q, prec, false),
            hi: Dyadic::from_rational(q, prec, true),
        }
    }

    pub fn is_point(&self) -> bool {
        self.lo == self.hi
    }

    pub fn is_exact_zero(&self) -> bool {
        self.lo.is_zero() && self.hi.is_zero()
    }

    pub fn contains_zero(&self) -> bool {
        !self.lo.is_positive() && !self.hi.is_negative()
    }

    pub fn is_positive(&self) -> bool {
        self.lo.is_positive()
    }

    pub fn is_negative(&self) -> bool {
        self.hi.is_negative()
    }

    pub fn width(&self) -> Dyadic {
        self.hi.sub(&self.lo)
    }

    pub fn mid(&self) -> Dyadic {
        self.lo.add(&self.hi).shl(-1)
    }

    pub fn mid_f64(&self) -> f64 {
        self.mid().to_f64()
    }

    /// Largest absolute value attained on the interval.
    pub fn mag(&self) -> Dyadic {
        let a = self.lo.abs();
        let b = self.hi.abs();
        if a > b {
            a
        } else {
            b
        }
    }

    /// Smallest absolute value attained on the interval.
    pub fn mig(&self) -> Dyadic {
        if self.contains_zero() {
            Dyadic::zero()
        } else if self.lo.is_positive() {
            self.lo.clone()
        } else {
            self.hi.abs()
        }
    }

    pub fn overlaps(&self, o: &Interval) -> bool {
        self.lo <= o.hi && o.lo <= self.hi
    }

    pub fn contains(&self, v: &Dyadic) -> bool {
        &self.lo <= v && v <= &self.hi
    }

    pub fn neg(&self) -> Interval {
        Interval { lo: self.hi.neg(), hi: self.lo.neg() }
    }

    pub fn add(&self, o: &Interval, prec: u32) -> Interval {
        Interval {
            lo: self.lo.add(&o.lo).round(prec, false),
            hi: self.hi.add(&o.hi).round(prec, true),
        }
    }

    pub fn sub(&self, o: &Interval, prec: u32) -> Interval {
        self.add(&o.neg(), prec)
    }

    pub fn mul(&self, o: &Interval, prec: u32) -> Interval {
        if self.is_point() && o.is_point() {
            let p = self.lo.mul(&o.lo);
            return Interval { lo: p.round(prec, false), hi: p.round(prec, true) };
        }
        let c = [self.lo.mul(&o.lo), self.lo.mul(&o.hi), self.hi.mul(&o.lo), self.hi.mul(&o.hi)];
        let lo = c.iter().min().unwrap().round(prec, false);
        let hi = c.iter().max().unwrap().round(prec, true);
        Interval { lo, hi }
    }

    pub fn sqr(&self, prec: u32) -> Interval {
        let a = self.lo.mul(&self.lo);
        let b = self.hi.mul(&self.hi);
        let (lo, hi) = if self.contains_zero() {
            (Dyadic::zero(), if a > b { a } else { b })
        } else if a < b {
            (a, b)
        } else {
            (b, a)
        };
        Interval { lo: lo.round(prec, false), hi: hi.round(prec, true) }
    }

    /// Quotient; the divisor must exclude zero.
    pub fn div(&self, o: &Interval, prec: u32) -> Interval {
        assert!(!o.contains_zero(), "interval division by an interval containing zero");
        let q = [
            (&self.lo, &o.lo),
            (&self.lo, &o.hi),
            (&self.hi, &o.lo),
            (&self.hi, &o.hi),
        ];
        let lo = q.iter().map(|(a, b)| a.div(b, prec, false)).min().unwrap();
        let hi = q.iter().map(|(a, b)| a.div(b, prec, true)).max().unwrap();
        Interval { lo, hi }
    }

    pub fn mul_rational(&self, q: &BigRational, prec: u32) -> Interval {
        if q.denom().is_one() {
            return self.mul(&Interval::point(Dyadic::from_bigint(q.numer().clone())), prec);
        }
        self.mul(&Interval::from_rational(q, prec + 8), prec)
    }

    /// Exact scaling by `2^k`.
    pub fn shl(&self, k: i64) -> Interval {
        Interval { lo: self.lo.shl(k), hi: self.hi.shl(k) }
    }

    /// Square root; negative parts of the interval are clamped to zero.
    pub fn sqrt(&self, prec: u32) -> Interval {
        assert!(!self.hi.is_negative(), "sqrt of negative interval");
        let lo = if self.lo.is_negative() { Dyadic::zero() } else { self.lo.sqrt(prec, false) };
        Interval { lo, hi: self.hi.sqrt(prec, true) }
    }

    /// Natural logarithm of a positive interval.
    pub fn ln(&self, prec: u32) -> Interval {
        assert!(self.lo.is_positive(), "log of non-positive interval");
        if self.is_point() {
            return ln_point(&self.lo, prec);
        }
        Interval { lo: ln_point(&self.lo, prec).lo, hi: ln_point(&self.hi, prec).hi }
    }

    /// Union hull.
    pub fn hull(&self, o: &Interval) -> Interval {
        Interval {
            lo: if self.lo < o.lo { self.lo.clone() } else { o.lo.clone() },
            hi: if self.hi > o.hi { self.hi.clone() } else { o.hi.clone() },
        }
    }

    /// Widen by `r` on both sides.
    pub fn inflate(&self, r: &Dyadic) -> Interval {
        Interval { lo: self.lo.sub(r), hi: self.hi.add(r) }
    }

    pub fn to_f64_pair(&self) -> (f64, f64) {
        (self.lo.to_f64(), self.hi.to_f64())
    }

    /// Width divided by the magnitude of the midpoint, as an f64 estimate.
    pub fn relative_width(&self) -> f64 {
        let m = self.mid().abs();
        if m.is_zero() {
            return self.width().to_f64();
        }
        let w = self.width();
        let shift = m.bits() as i64 + m.exponent() - w.bits() as i64 - w.exponent();
        let wm = w.mantissa().to_f64().unwrap_or(f64::MAX) / 2f64.powi(w.bits().min(1000) as i32);
        let mm = m.mantissa().to_f64().unwrap_or(f64::MAX) / 2f64.powi(m.bits().min(1000) as i32);
        if shift > 1000 {
            return 0.0;
        }
        (wm / mm) * 2f64.powi(-(shift as i32))
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (a, b) = self.to_f64_pair();
        write!(f, "[{a:.17e}, {b:.17e}]")
    }
}

thread_local! {
    static LN2_CACHE: RefCell<HashMap<u32, Interval>> = RefCell::new(HashMap::new());
}

/// Enclosure of `atanh(u)` for a rational `|u| <= 1/3`, by the odd power series
/// with an explicit geometric tail bound.
fn atanh_small(u: &BigRational, prec: u32) -> Interval {
    let wp = prec + 32;
    let ui = Interval::from_rational(u, wp);
    let u2 = ui.sqr(wp);
    let mut pow = ui.clone();
    let mut sum = Interval::zero();
    // |u| <= 1/3 gives at least 3 bits per term; bound |u|^(2n+1) via its upper endpoint.
    let mut n: i64 = 0;
    loop {
        let term = pow.div(&Interval::from_int(2 * n + 1), wp);
        sum = sum.add(&term, wp);
        pow = pow.mul(&u2, wp);
        n += 1;
        let m = pow.mag();
        if m.is_zero() || (m.bits() as i64 + m.exponent()) < -(wp as i64) {
            break;
        }
    }
    // Remaining tail: sum_{j>=n} |u|^(2j+1)/(2j+1) <= |u|^(2n+1) / (1 - u^2) <= 2 |u|^(2n+1).
    let tail = pow.mag().shl(1).round(wp, true);
    sum.inflate(&tail)
}

/// Enclosure of ln 2.
pub fn ln2(prec: u32) -> Interval {
    if let Some(v) = LN2_CACHE.with(|c| c.borrow().get(&prec).cloned()) {
        return v;
    }
    let third = BigRational::new(BigInt::one(), BigInt::from(3));
    let v = atanh_small(&third, prec).shl(1);
    LN2_CACHE.with(|c| c.borrow_mut().insert(prec, v.clone()));
    v
}

/// Enclosure of the natural logarithm of a positive dyadic point.
pub fn ln_point(v: &Dyadic, prec: u32) -> Interval {
    assert!(v.is_positive(), "log of non-positive value");
    let b = v.bits() as i64;
    // v = f * 2^k with f = m / 2^j in [2/3, 4/3].
    let mut j = b - 1;
    let three_m = v.mantissa() * 3;
    if three_m > (BigInt::one() << ((b + 1) as u64)) {
        j = b;
    }
    let k = v.exponent() + j;
    let pj = BigInt::one() << (j as u64);
    let u = BigRational::new(v.mantissa() - &pj, v.mantissa() + &pj);
    let wp = prec + 16;
    let mut out = atanh_small(&u, wp).shl(1);
    if k != 0 {
        out = out.add(&ln2(wp).mul(&Interval::from_int(k), wp), wp);
    }
    Interval { lo: out.lo.round(prec, false), hi: out.hi.round(prec, true) }
}

/// Enclosure of `ln q` for a positive rational.
pub fn ln_rational(q: &BigRational, prec: u32) -> Interval {
    assert!(q.is_positive(), "log of non-positive rational");
    if q.denom().is_one() {
        return ln_point(&Dyadic::from_bigint(q.numer().clone()), prec);
    }
    let wp = prec + 8;
    let a = ln_point(&Dyadic::from_bigint(q.numer().clone()), wp);
    let b = ln_point(&Dyadic::from_bigint(q.denom().clone()), wp);
    let d = a.sub(&b, wp);
    Interval { lo: d.lo.round(prec, false), hi: d.hi.round(prec, true) }
}

/// A rectangular complex interval.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ComplexBox {
    pub re: Interval,
    pub im: Interval,
}

impl ComplexBox {
    pub fn real(re: Interval) -> Self {
        ComplexBox { re, im: Interval::zero() }
    }

    pub fn zero() -> Self {
        ComplexBox::real(Interval::zero())
    }

    pub fn one() -> Self {
        ComplexBox::real(Interval::from_int(1))
    }

    /// True when the imaginary part is exactly zero.
    pub fn is_real(&self) -> bool {
        self.im.is_exact_zero()
    }

    pub fn contains_zero(&self) -> bool {
        self.re.contains_zero() && self.im.contains_zero()
    }

    pub fn neg(&self) -> ComplexBox {
        ComplexBox { re: self.re.neg(), im: self.im.neg() }
    }

    pub fn add(&self, o: &ComplexBox, prec: u32) -> ComplexBox {
        ComplexBox { re: self.re.add(&o.re, prec), im: self.im.add(&o.im, prec) }
    }

    pub fn sub(&self, o: &ComplexBox, prec: u32) -> ComplexBox {
        ComplexBox { re: self.re.sub(&o.re, prec), im: self.im.sub(&o.im, prec) }
    }

    pub fn mul(&self, o: &ComplexBox, prec: u32) -> ComplexBox {
        if self.is_real() && o.is_real() {
            return ComplexBox::real(self.re.mul(&o.re, prec));
        }
        let wp = prec + 4;
        let re = self.re.mul(&o.re, wp).sub(&self.im.mul(&o.im, wp), prec);
        let im = self.re.mul(&o.im, wp).add(&self.im.mul(&o.re, wp), prec);
        ComplexBox { re, im }
    }

    pub fn scale(&self, q: &BigRational, prec: u32) -> ComplexBox {
        if self.is_real() {
            return ComplexBox::real(self.re.mul_rational(q, prec));
        }
        ComplexBox { re: self.re.mul_rational(q, prec), im: self.im.mul_rational(q, prec) }
    }

    /// `|z|^2` as a real interval.
    pub fn abs_sq(&self, prec: u32) -> Interval {
        if self.is_real() {
            return self.re.sqr(prec);
        }
        self.re.sqr(prec + 2).add(&self.im.sqr(prec + 2), prec)
    }

    /// An upper bound for `|z|` over the whole box.
    pub fn mag_upper(&self, prec: u32) -> Dyadic {
        let r = self.re.mag();
        let i = self.im.mag();
        r.mul(&r).add(&i.mul(&i)).sqrt(prec, true)
    }

    /// A lower bound for `|z|` over the whole box.
    pub fn mag_lower(&self, prec: u32) -> Dyadic {
        let r = self.re.mig();
        let i = self.im.mig();
        r.mul(&r).add(&i.mul(&i)).sqrt(prec, false)
    }

    /// Enclosure of one square root of every point of the box; the other root
    /// is its negation. Returns `None` when the box is too close to zero for the
    /// working precision to separate the two roots.
    pub fn sqrt(&self, prec: u32) -> Option<ComplexBox> {
        if self.is_real() {
            if self.re.is_positive() {
                return Some(ComplexBox::real(self.re.sqrt(prec)));
            }
            if self.re.is_negative() {
                return Some(ComplexBox { re: Interval::zero(), im: self.re.neg().sqrt(prec) });
            }
            return None;
        }
        if self.contains_zero() {
            return None;
        }
        let wp = prec + 16;
        // Approximate principal root of the midpoint.
        let a = self.re.mid();
        let b = self.im.mid();
        let modulus = a.mul(&a).add(&b.mul(&b)).sqrt(wp, false);
        let re = modulus.add(&a).shl(-1);
        let re = if re.is_negative() { Dyadic::zero() } else { re.sqrt(wp, false) };
        let im2 = modulus.sub(&a).shl(-1);
        let mut im = if im2.is_negative() { Dyadic::zero() } else { im2.sqrt(wp, false) };
        if b.is_negative() {
            im = im.neg();
        }
        let r = ComplexBox { re: Interval::point(re), im: Interval::point(im) };
        // Residual bound: every target w in the box satisfies |r^2 - w| <= eps.
        let resid = r.mul(&r, wp).sub(self, wp);
        let eps = resid.mag_upper(wp);
        let rmag = r.mag_lower(wp);
        if rmag.is_zero() {
            return None;
        }
        // If sqrt(eps) <= |r| the root s nearest r satisfies |s - r| <= eps / |r|.
        if eps > rmag.mul(&rmag) {
            return None;
        }
        let rho = eps.div(&rmag, wp, true);
        Some(ComplexBox { re: r.re.inflate(&rho), im: r.im.inflate(&rho) })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn rounding_is_outward() {
        let third = Interval::from_rational(&q(1, 3), 64);
        let exact = q(1, 3);
        assert!(third.lo.to_rational() < exact);
        assert!(third.hi.to_rational() > exact);
        assert!(third.width().bits() as i64 + third.width().exponent() <= -60);
    }

    #[test]
    fn sqrt_two_enclosure() {
        let s = Interval::from_int(2).sqrt(128);
        let lo = s.lo.to_rational();
        let hi = s.hi.to_rational();
        assert!(&lo * &lo <= q(2, 1));
        assert!(&hi * &hi >= q(2, 1));
        assert!((s.mid_f64() - std::f64::consts::SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn log_constants() {
        let l2 = ln2(200);
        assert!((l2.mid_f64() - std::f64::consts::LN_2).abs() < 1e-15);
        let l3 = ln_rational(&q(3, 1), 200);
        assert!((l3.mid_f64() - 3f64.ln()).abs() < 1e-15);
        assert!(l3.relative_width() < 1e-50);
        let l = ln_rational(&q(7, 1000), 128);
        assert!((l.mid_f64() - (0.007f64).ln()).abs() < 1e-14);
    }

    #[test]
    fn log_of_one_is_zero_enclosure() {
        let l = ln_point(&Dyadic::from_int(1), 128);
        assert!(l.contains_zero());
        let w = l.width();
        assert!(w.is_zero() || w.bits() as i64 + w.exponent() < -120);
    }

    #[test]
    fn log_monotone_interval() {
        let i = Interval::new(Dyadic::from_int(2), Dyadic::from_int(3));
        let l = i.ln(128);
        assert!(l.lo.to_f64() <= 2f64.ln() + 1e-15);
        assert!(l.hi.to_f64() >= 3f64.ln() - 1e-15);
    }

    #[test]
    fn complex_sqrt_of_minus_one() {
        let m1 = ComplexBox::real(Interval::from_int(-1));
        let r = m1.sqrt(64).unwrap();
        assert!(r.re.is_exact_zero());
        assert!(r.im.contains(&Dyadic::from_int(1)));
    }

    #[test]
    fn complex_sqrt_generic() {
        // sqrt(3 + 4i) = 2 + i
        let z = ComplexBox { re: Interval::from_int(3), im: Interval::from_int(4) };
        let r = z.sqrt(128).unwrap();
        assert!(r.re.contains(&Dyadic::from_int(2)));
        assert!(r.im.contains(&Dyadic::from_int(1)));
        let sq = r.mul(&r, 128);
        assert!(sq.re.contains(&Dyadic::from_int(3)));
        assert!(sq.im.contains(&Dyadic::from_int(4)));
    }

    #[test]
    fn division_encloses_quotient() {
        let a = Interval::from_int(1);
        let b = Interval::from_int(7);
        let c = a.div(&b, 96);
        assert!(c.lo.to_rational() <= q(1, 7) && c.hi.to_rational() >= q(1, 7));
    }
}
