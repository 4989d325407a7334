//! Exact arithmetic in towers `Q(g1, ..., gt)` with `gi^2 = Di`, each `Di` an
//! element of the previous level.
//!
//! An element is stored as `2^t` integer numerators over one common positive
//! denominator. Coefficient `m` belongs to the monomial whose generator set is
//! the set bits of `m`, so the upper half of the vector is the part divisible
//! by the top generator. Generator squares always have integer coefficients,
//! which keeps multiplication inside the integers.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::{Arc, Mutex};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::arith::{perfect_square, squarefree_split, Q};
use crate::error::{Error, Result};
use crate::interval::{ComplexBox, Interval};

pub const DEFAULT_DEGREE_CAP: usize = 64;
pub const DEFAULT_PREC_MAX: u32 = 4096;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Generator {
    pub name: String,
    /// Integer coefficients of the square, an element of the previous level.
    pub square: Vec<BigInt>,
}

pub struct Tower {
    gens: Vec<Generator>,
    parent: Option<Arc<Tower>>,
    cap: usize,
    embeddings: Mutex<HashMap<u32, Arc<EmbeddingSet>>>,
}

impl fmt::Debug for Tower {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list()
            .entries(self.gens.iter().enumerate().map(|(i, g)| {
                let sq = Elem::from_ints(self.ancestor(i), g.square.clone(), BigInt::one());
                format!("{}^2 = {}", g.name, sq)
            }))
            .finish()
    }
}

impl Tower {
    pub fn rational() -> Arc<Tower> {
        Tower::rational_with_cap(DEFAULT_DEGREE_CAP)
    }

    pub fn rational_with_cap(cap: usize) -> Arc<Tower> {
        Arc::new(Tower { gens: Vec::new(), parent: None, cap, embeddings: Mutex::new(HashMap::new()) })
    }

    fn push(self: &Arc<Self>, name: String, square: Vec<BigInt>) -> Arc<Tower> {
        let mut gens = self.gens.clone();
        gens.push(Generator { name, square });
        Arc::new(Tower {
            gens,
            parent: Some(self.clone()),
            cap: self.cap,
            embeddings: Mutex::new(HashMap::new()),
        })
    }

    pub fn num_gens(&self) -> usize {
        self.gens.len()
    }

    pub fn degree(&self) -> usize {
        1 << self.gens.len()
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    pub fn generators(&self) -> &[Generator] {
        &self.gens
    }

    pub fn parent(&self) -> Option<&Arc<Tower>> {
        self.parent.as_ref()
    }

    /// The sub-tower made of the first `level` generators.
    pub fn prefix(self: &Arc<Self>, level: usize) -> Arc<Tower> {
        if level == self.gens.len() {
            return self.clone();
        }
        self.ancestor(level)
    }

    fn ancestor(&self, level: usize) -> Arc<Tower> {
        assert!(level < self.gens.len());
        let mut cur = self.parent.clone().expect("ancestor chain");
        while cur.gens.len() > level {
            cur = cur.parent.clone().expect("ancestor chain");
        }
        cur
    }

    pub fn is_prefix_of(&self, other: &Tower) -> bool {
        self.gens.len() <= other.gens.len() && self.gens[..] == other.gens[..self.gens.len()]
    }

    pub fn same(a: &Arc<Tower>, b: &Arc<Tower>) -> bool {
        Arc::ptr_eq(a, b) || a.gens == b.gens
    }

    /// The smaller of two towers when one extends the other.
    pub fn common(a: &Arc<Tower>, b: &Arc<Tower>) -> Option<Arc<Tower>> {
        if Arc::ptr_eq(a, b) {
            return Some(a.clone());
        }
        if a.gens.len() >= b.gens.len() {
            b.is_prefix_of(a).then(|| a.clone())
        } else {
            a.is_prefix_of(b).then(|| b.clone())
        }
    }

    pub fn names(&self) -> Vec<String> {
        self.gens.iter().map(|g| g.name.clone()).collect()
    }

    pub fn square_elem(self: &Arc<Self>, i: usize) -> Elem {
        Elem::from_ints(self.prefix(i), self.gens[i].square.clone(), BigInt::one())
    }

    fn fresh_name(&self) -> String {
        let mut k = self.gens.len() + 1;
        loop {
            let name = format!("g{k}");
            if self.gens.iter().all(|g| g.name != name) {
                return name;
            }
            k += 1;
        }
    }

    /// Whether every embedding is real.
    pub fn is_totally_real(self: &Arc<Self>) -> Result<bool> {
        if self.gens.is_empty() {
            return Ok(true);
        }
        let es = embed_all(self, 64)?;
        Ok((0..es.count()).all(|e| es.is_real(e)))
    }
}

/// An element of a tower.
#[derive(Clone)]
pub struct Elem {
    tower: Arc<Tower>,
    num: Vec<BigInt>,
    den: BigInt,
}

fn all_zero(v: &[BigInt]) -> bool {
    v.iter().all(|x| x.is_zero())
}

fn vadd(a: &[BigInt], b: &[BigInt]) -> Vec<BigInt> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

/// Product of two integer coefficient vectors of length `2^gens.len()`.
fn mul_vec(a: &[BigInt], b: &[BigInt], gens: &[Generator]) -> Vec<BigInt> {
    let n = a.len();
    if n == 1 {
        return vec![&a[0] * &b[0]];
    }
    if all_zero(a) || all_zero(b) {
        return vec![BigInt::zero(); n];
    }
    if all_zero(&a[1..]) {
        return b.iter().map(|x| x * &a[0]).collect();
    }
    if all_zero(&b[1..]) {
        return a.iter().map(|x| x * &b[0]).collect();
    }
    let h = n / 2;
    let rest = &gens[..gens.len() - 1];
    let d = &gens[gens.len() - 1].square;
    let (a0, a1) = a.split_at(h);
    let (b0, b1) = b.split_at(h);
    let a1z = all_zero(a1);
    let b1z = all_zero(b1);
    let mut c0 = mul_vec(a0, b0, rest);
    let c1 = match (a1z, b1z) {
        (true, true) => vec![BigInt::zero(); h],
        (true, false) => mul_vec(a0, b1, rest),
        (false, true) => mul_vec(a1, b0, rest),
        (false, false) => {
            let q = mul_vec(a1, b1, rest);
            c0 = vadd(&c0, &mul_vec(&q, d, rest));
            vadd(&mul_vec(a0, b1, rest), &mul_vec(a1, b0, rest))
        }
    };
    c0.extend(c1);
    c0
}

impl Elem {
    fn from_ints(tower: Arc<Tower>, num: Vec<BigInt>, den: BigInt) -> Elem {
        debug_assert_eq!(num.len(), tower.degree());
        let mut e = Elem { tower, num, den };
        e.normalize();
        e
    }

    fn normalize(&mut self) {
        if self.den.is_negative() {
            self.den = -&self.den;
            for x in &mut self.num {
                *x = -&*x;
            }
        }
        let mut g = self.den.clone();
        for x in &self.num {
            if g.is_one() {
                break;
            }
            g = g.gcd(x);
        }
        if all_zero(&self.num) {
            self.den = BigInt::one();
            return;
        }
        if !g.is_one() {
            self.den /= &g;
            for x in &mut self.num {
                *x /= &g;
            }
        }
    }

    pub fn zero(tower: &Arc<Tower>) -> Elem {
        Elem { tower: tower.clone(), num: vec![BigInt::zero(); tower.degree()], den: BigInt::one() }
    }

    pub fn one(tower: &Arc<Tower>) -> Elem {
        Elem::from_int(tower, 1)
    }

    pub fn from_int(tower: &Arc<Tower>, v: i64) -> Elem {
        Elem::from_q(tower, &Q::from_integer(BigInt::from(v)))
    }

    pub fn from_q(tower: &Arc<Tower>, v: &Q) -> Elem {
        let mut num = vec![BigInt::zero(); tower.degree()];
        num[0] = v.numer().clone();
        Elem { tower: tower.clone(), num, den: v.denom().clone() }
    }

    pub fn from_coeffs(tower: &Arc<Tower>, coeffs: &[Q]) -> Elem {
        assert_eq!(coeffs.len(), tower.degree());
        let den = coeffs.iter().fold(BigInt::one(), |acc, c| acc.lcm(c.denom()));
        let num = coeffs.iter().map(|c| c.numer() * (&den / c.denom())).collect();
        Elem::from_ints(tower.clone(), num, den)
    }

    /// The `i`-th generator (0-based).
    pub fn generator(tower: &Arc<Tower>, i: usize) -> Elem {
        let mut num = vec![BigInt::zero(); tower.degree()];
        num[1 << i] = BigInt::one();
        Elem { tower: tower.clone(), num, den: BigInt::one() }
    }

    pub fn tower(&self) -> &Arc<Tower> {
        &self.tower
    }

    pub fn numerators(&self) -> &[BigInt] {
        &self.num
    }

    pub fn denominator(&self) -> &BigInt {
        &self.den
    }

    pub fn coeff(&self, m: usize) -> Q {
        Q::new(self.num[m].clone(), self.den.clone())
    }

    pub fn coeffs(&self) -> Vec<Q> {
        (0..self.num.len()).map(|m| self.coeff(m)).collect()
    }

    pub fn is_zero(&self) -> bool {
        all_zero(&self.num)
    }

    pub fn is_one(&self) -> bool {
        self.den.is_one() && self.num[0].is_one() && all_zero(&self.num[1..])
    }

    pub fn as_rational(&self) -> Option<Q> {
        all_zero(&self.num[1..]).then(|| self.coeff(0))
    }

    pub fn is_rational(&self) -> bool {
        all_zero(&self.num[1..])
    }

    /// Smallest level holding the element.
    pub fn level(&self) -> usize {
        let last = self.num.iter().rposition(|x| !x.is_zero()).unwrap_or(0);
        (usize::BITS - last.leading_zeros()) as usize
    }

    /// Same element viewed in an extension tower.
    pub fn lift(&self, tower: &Arc<Tower>) -> Elem {
        if Arc::ptr_eq(&self.tower, tower) {
            return self.clone();
        }
        assert!(self.tower.is_prefix_of(tower), "lifting into a tower that does not extend the element's tower");
        let mut num = self.num.clone();
        num.resize(tower.degree(), BigInt::zero());
        Elem { tower: tower.clone(), num, den: self.den.clone() }
    }

    /// The same element viewed in the sub-tower of the given level; the element
    /// must lie there.
    pub fn restrict(&self, level: usize) -> Elem {
        let n = 1usize << level;
        assert!(all_zero(&self.num[n..]), "element does not lie in the requested sub-tower");
        Elem::from_ints(self.tower.prefix(level), self.num[..n].to_vec(), self.den.clone())
    }

    fn pair(&self, o: &Elem) -> (Elem, Elem) {
        if Arc::ptr_eq(&self.tower, &o.tower) {
            return (self.clone(), o.clone());
        }
        let t = Tower::common(&self.tower, &o.tower).expect("elements from incompatible towers");
        (self.lift(&t), o.lift(&t))
    }

    fn with_pair<R>(&self, o: &Elem, f: impl FnOnce(&Elem, &Elem) -> R) -> R {
        if Arc::ptr_eq(&self.tower, &o.tower) || self.tower.gens.len() == o.tower.gens.len() {
            if !Arc::ptr_eq(&self.tower, &o.tower) {
                assert!(self.tower.gens == o.tower.gens, "elements from incompatible towers");
            }
            return f(self, o);
        }
        let (a, b) = self.pair(o);
        f(&a, &b)
    }

    fn add_impl(&self, o: &Elem) -> Elem {
        self.with_pair(o, |a, b| {
            if a.den == b.den {
                return Elem::from_ints(a.tower.clone(), vadd(&a.num, &b.num), a.den.clone());
            }
            let num = a.num.iter().zip(&b.num).map(|(x, y)| x * &b.den + y * &a.den).collect();
            Elem::from_ints(a.tower.clone(), num, &a.den * &b.den)
        })
    }

    fn mul_impl(&self, o: &Elem) -> Elem {
        self.with_pair(o, |a, b| {
            let num = mul_vec(&a.num, &b.num, &a.tower.gens);
            Elem::from_ints(a.tower.clone(), num, &a.den * &b.den)
        })
    }

    pub fn neg_ref(&self) -> Elem {
        Elem { tower: self.tower.clone(), num: self.num.iter().map(|x| -x).collect(), den: self.den.clone() }
    }

    pub fn scale(&self, c: &Q) -> Elem {
        let num = self.num.iter().map(|x| x * c.numer()).collect();
        Elem::from_ints(self.tower.clone(), num, &self.den * c.denom())
    }

    pub fn square(&self) -> Elem {
        self.mul_impl(self)
    }

    pub fn pow(&self, e: u32) -> Elem {
        let mut acc = Elem::one(&self.tower);
        let mut base = self.clone();
        let mut e = e;
        while e > 0 {
            if e & 1 == 1 {
                acc = &acc * &base;
            }
            base = base.square();
            e >>= 1;
        }
        acc
    }

    /// `(low, high)` with `self = low + high * g_top`, both in the parent tower.
    pub fn split(&self) -> (Elem, Elem) {
        let parent = self.tower.parent.clone().expect("split of a rational element");
        let h = self.num.len() / 2;
        (
            Elem::from_ints(parent.clone(), self.num[..h].to_vec(), self.den.clone()),
            Elem::from_ints(parent, self.num[h..].to_vec(), self.den.clone()),
        )
    }

    fn join(tower: &Arc<Tower>, lo: &Elem, hi: &Elem) -> Elem {
        let parent = tower.parent.as_ref().expect("join needs a parent");
        let lo = lo.lift(parent);
        let hi = hi.lift(parent);
        let den = lo.den.lcm(&hi.den);
        let fl = &den / &lo.den;
        let fh = &den / &hi.den;
        let mut num: Vec<BigInt> = lo.num.iter().map(|x| x * &fl).collect();
        num.extend(hi.num.iter().map(|x| x * &fh));
        Elem::from_ints(tower.clone(), num, den)
    }

    /// Multiplicative inverse by the recursive rule
    /// `(a + b g)^{-1} = (a - b g) / (a^2 - D b^2)`.
    pub fn invert(&self) -> Result<Elem> {
        if self.is_zero() {
            return Err(Error::DivisionByZero);
        }
        let t = self.tower.gens.len();
        if let Some(q) = self.as_rational() {
            return Ok(Elem::from_q(&self.tower, &(Q::one() / q)));
        }
        let (a, b) = self.split();
        if b.is_zero() {
            return Ok(a.invert()?.lift(&self.tower));
        }
        let d = self.tower.square_elem(t - 1);
        let n = &a.square() - &(&d * &b.square());
        if n.is_zero() {
            let witness = -(&a * &b.invert()?);
            return Err(Error::SquareDetected { level: t, radicand: Box::new(d), witness: Box::new(witness) });
        }
        let ninv = n.invert()?;
        Ok(Elem::join(&self.tower, &(&a * &ninv), &-(&b * &ninv)))
    }

    pub fn div(&self, o: &Elem) -> Result<Elem> {
        Ok(self * &o.invert()?)
    }

    /// Flips the sign of the top generator.
    pub fn relative_conjugate(&self) -> Result<Elem> {
        if self.tower.gens.is_empty() {
            return Err(Error::RationalContext);
        }
        let h = self.num.len() / 2;
        let mut num = self.num.clone();
        for x in &mut num[h..] {
            *x = -&*x;
        }
        Ok(Elem { tower: self.tower.clone(), num, den: self.den.clone() })
    }

    /// `x * conj(x)` as an element of the parent tower.
    pub fn relative_norm(&self) -> Elem {
        let c = self.relative_conjugate().expect("relative norm of a rational element");
        (self * &c).split().0
    }

    pub fn field_norm(&self) -> Q {
        let mut x = self.clone();
        while !x.tower.gens.is_empty() {
            if x.is_rational() {
                let q = x.coeff(0);
                let e = x.tower.degree() as u32;
                return Q::new(q.numer().pow(e), q.denom().pow(e));
            }
            x = x.relative_norm();
        }
        x.coeff(0)
    }

    /// `Tr_{K/Q}`; only the constant coefficient survives.
    pub fn trace(&self) -> Q {
        self.coeff(0) * Q::from_integer(BigInt::from(self.tower.degree()))
    }

    /// A square root inside the tower if one exists.
    pub fn sqrt_in_tower(&self) -> Option<Elem> {
        if self.is_zero() {
            return Some(self.clone());
        }
        if self.tower.gens.is_empty() {
            let q = self.coeff(0);
            let prod = q.numer() * q.denom();
            let r = perfect_square(&prod)?;
            return Some(Elem::from_q(&self.tower, &Q::new(r, q.denom().clone())));
        }
        let t = self.tower.gens.len();
        let (a, b) = self.split();
        if b.is_zero() {
            if let Some(r) = a.sqrt_in_tower() {
                return Some(r.lift(&self.tower));
            }
            let d = self.tower.square_elem(t - 1);
            let s = a.div(&d).ok()?.sqrt_in_tower()?;
            return Some(&s.lift(&self.tower) * &Elem::generator(&self.tower, t - 1));
        }
        let d = self.tower.square_elem(t - 1);
        let n = &a.square() - &(&d * &b.square());
        let s = n.sqrt_in_tower()?;
        let half = Q::new(BigInt::one(), BigInt::from(2));
        for cand in [&a + &s, &a - &s] {
            let c2 = cand.scale(&half);
            if c2.is_zero() {
                continue;
            }
            if let Some(c) = c2.sqrt_in_tower() {
                let e = match b.div(&c.scale(&Q::from_integer(BigInt::from(2)))) {
                    Ok(e) => e,
                    Err(_) => continue,
                };
                let g = Elem::generator(&self.tower, t - 1);
                let r = &c.lift(&self.tower) + &(&e.lift(&self.tower) * &g);
                debug_assert!(r.square() == *self);
                return Some(r);
            }
        }
        None
    }

    /// Enclosure of the image under embedding `e`.
    pub fn embed(&self, es: &EmbeddingSet, e: usize) -> ComplexBox {
        let prec = es.work;
        let mut acc = ComplexBox::zero();
        for (m, c) in self.num.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let coef = Interval::point(crate::interval::Dyadic::from_bigint(c.clone()));
            let mono = &es.monomials[e][m];
            let term = if m == 0 {
                ComplexBox::real(coef)
            } else {
                ComplexBox { re: mono.re.mul(&coef, prec), im: mono.im.mul(&coef, prec) }
            };
            acc = acc.add(&term, prec);
        }
        if self.den.is_one() {
            acc
        } else {
            acc.scale(&Q::new(BigInt::one(), self.den.clone()), prec)
        }
    }

    /// Double-precision image under embedding `e`, as `(re, im)`.
    pub fn embed_f64(&self, es: &EmbeddingSet, e: usize) -> (f64, f64) {
        let b = self.embed(es, e);
        (b.re.mid_f64(), b.im.mid_f64())
    }

    /// Structural key independent of the tower object identity.
    pub fn key(&self) -> String {
        self.to_string()
    }
}

impl PartialEq for Elem {
    fn eq(&self, o: &Elem) -> bool {
        match Tower::common(&self.tower, &o.tower) {
            None => false,
            Some(t) => {
                let a = self.lift(&t);
                let b = o.lift(&t);
                a.den == b.den && a.num == b.num
            }
        }
    }
}

impl Eq for Elem {}

impl fmt::Debug for Elem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

fn monomial_name(tower: &Tower, m: usize) -> String {
    let mut parts = Vec::new();
    for (i, g) in tower.gens.iter().enumerate() {
        if m >> i & 1 == 1 {
            parts.push(g.name.clone());
        }
    }
    parts.join("*")
}

impl fmt::Display for Elem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for m in 0..self.num.len() {
            if self.num[m].is_zero() {
                continue;
            }
            let c = self.coeff(m);
            let neg = c.is_negative();
            let a = c.abs();
            if first {
                if neg {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {} ", if neg { "-" } else { "+" })?;
            }
            first = false;
            if m == 0 {
                write!(f, "{a}")?;
            } else if a.is_one() {
                write!(f, "{}", monomial_name(&self.tower, m))?;
            } else {
                write!(f, "{a}*{}", monomial_name(&self.tower, m))?;
            }
        }
        Ok(())
    }
}

macro_rules! binop {
    ($tr:ident, $m:ident, $body:expr) => {
        impl<'a> $tr<&'a Elem> for &'a Elem {
            type Output = Elem;
            fn $m(self, o: &'a Elem) -> Elem {
                let f: fn(&Elem, &Elem) -> Elem = $body;
                f(self, o)
            }
        }
        impl $tr<Elem> for Elem {
            type Output = Elem;
            fn $m(self, o: Elem) -> Elem {
                let f: fn(&Elem, &Elem) -> Elem = $body;
                f(&self, &o)
            }
        }
        impl<'a> $tr<&'a Elem> for Elem {
            type Output = Elem;
            fn $m(self, o: &'a Elem) -> Elem {
                let f: fn(&Elem, &Elem) -> Elem = $body;
                f(&self, o)
            }
        }
    };
}

binop!(Add, add, |a, b| a.add_impl(b));
binop!(Sub, sub, |a, b| a.add_impl(&b.neg_ref()));
binop!(Mul, mul, |a, b| a.mul_impl(b));

impl Neg for &Elem {
    type Output = Elem;
    fn neg(self) -> Elem {
        self.neg_ref()
    }
}

impl Neg for Elem {
    type Output = Elem;
    fn neg(self) -> Elem {
        self.neg_ref()
    }
}

/// Adjoins a square root of `d`, reusing existing structure whenever the root
/// already lies in the tower. Returns the (possibly unchanged) tower and a
/// root `s` with `s^2 = d`.
pub fn adjoin_sqrt(tower: &Arc<Tower>, d: &Elem) -> Result<(Arc<Tower>, Elem)> {
    adjoin_sqrt_named(tower, d, None)
}

pub fn adjoin_sqrt_named(tower: &Arc<Tower>, d: &Elem, name: Option<&str>) -> Result<(Arc<Tower>, Elem)> {
    let t = Tower::common(tower, d.tower()).expect("radicand from an incompatible tower");
    let d = d.lift(&t);
    if d.is_zero() {
        return Err(Error::ZeroRadicand);
    }
    if let Some(qv) = d.as_rational() {
        let (s, f) = squarefree_split(&(qv.numer() * qv.denom()));
        let factor = Q::new(s, qv.denom().clone());
        if f.is_one() {
            return Ok((t.clone(), Elem::from_q(&t, &factor)));
        }
        for (i, g) in t.gens.iter().enumerate() {
            if g.square[0] == f && all_zero(&g.square[1..]) {
                return Ok((t.clone(), Elem::generator(&t, i).scale(&factor)));
            }
        }
        let fe = Elem::from_q(&t, &Q::from_integer(f.clone()));
        if let Some(r) = fe.sqrt_in_tower() {
            return Ok((t.clone(), r.scale(&factor)));
        }
        let mut square = vec![BigInt::zero(); t.degree()];
        square[0] = f;
        let nt = extend(&t, name, square)?;
        let g = Elem::generator(&nt, nt.num_gens() - 1);
        return Ok((nt, g.scale(&factor)));
    }
    if let Some(r) = d.sqrt_in_tower() {
        return Ok((t.clone(), r));
    }
    adjoin_unchecked(&t, &d, name)
}

/// Adjoins a root of `d` without testing whether `d` is already a square.
/// Towers built this way may fail to be fields; arithmetic then reports
/// [`Error::SquareDetected`] when it divides by a zero divisor.
pub fn adjoin_unchecked(tower: &Arc<Tower>, d: &Elem, name: Option<&str>) -> Result<(Arc<Tower>, Elem)> {
    let t = Tower::common(tower, d.tower()).expect("radicand from an incompatible tower");
    let d = d.lift(&t);
    if d.is_zero() {
        return Err(Error::ZeroRadicand);
    }
    // d = num/den, so d * den^2 = num * den is integral; then divide out the
    // square part of the content.
    let mut square: Vec<BigInt> = d.num.iter().map(|x| x * &d.den).collect();
    let content = square.iter().fold(BigInt::zero(), |acc, x| acc.gcd(x));
    let (s, _) = squarefree_split(&content);
    let s2 = &s * &s;
    for x in &mut square {
        *x /= &s2;
    }
    let nt = extend(&t, name, square)?;
    let g = Elem::generator(&nt, nt.num_gens() - 1);
    Ok((nt, g.scale(&Q::new(s, d.den.clone()))))
}

fn extend(t: &Arc<Tower>, name: Option<&str>, square: Vec<BigInt>) -> Result<Arc<Tower>> {
    let needed = t.degree() * 2;
    if needed > t.cap {
        return Err(Error::DegreeCapExceeded { cap: t.cap, needed });
    }
    let name = name.map(str::to_string).unwrap_or_else(|| t.fresh_name());
    Ok(t.push(name, square))
}

/// `Norm_{K(t)/Q(t)}(y1 + t*y2)` as ascending rational coefficients.
pub fn pencil_norm(y1: &Elem, y2: &Elem) -> Vec<Q> {
    let (a, b) = y1.pair(y2);
    let mut poly = vec![a, b];
    while !poly[0].tower.gens.is_empty() {
        let conj: Vec<Elem> = poly.iter().map(|c| c.relative_conjugate().unwrap()).collect();
        let tower = poly[0].tower.clone();
        let mut prod = vec![Elem::zero(&tower); poly.len() * 2 - 1];
        for (i, x) in poly.iter().enumerate() {
            if x.is_zero() {
                continue;
            }
            for (j, y) in conj.iter().enumerate() {
                if y.is_zero() {
                    continue;
                }
                prod[i + j] = &prod[i + j] + &(x * y);
            }
        }
        poly = prod.into_iter().map(|c| c.split().0).collect();
    }
    let mut out: Vec<Q> = poly.iter().map(|c| c.coeff(0)).collect();
    while out.len() > 1 && out.last().is_some_and(|c| c.is_zero()) {
        out.pop();
    }
    out
}

/// Complex-interval images of the generators under every embedding.
#[derive(Debug)]
pub struct EmbeddingSet {
    pub precision: u32,
    /// Working precision the boxes were computed at.
    pub work: u32,
    /// `generators[e][i]` is the image of generator `i` under embedding `e`.
    pub generators: Vec<Vec<ComplexBox>>,
    monomials: Vec<Vec<ComplexBox>>,
}

impl EmbeddingSet {
    pub fn count(&self) -> usize {
        self.monomials.len()
    }

    pub fn is_real(&self, e: usize) -> bool {
        self.generators[e].iter().all(|b| b.is_real())
    }

    pub fn monomial(&self, e: usize, m: usize) -> &ComplexBox {
        &self.monomials[e][m]
    }
}

pub fn embed_all(tower: &Arc<Tower>, precision: u32) -> Result<Arc<EmbeddingSet>> {
    embed_all_capped(tower, precision, DEFAULT_PREC_MAX.max(precision.saturating_mul(4)))
}

/// Builds the `2^t` embeddings; embedding `e` sends generator `i` to the
/// principal root of the embedded square when bit `i` of `e` is clear and to
/// its negative otherwise.
pub fn embed_all_capped(tower: &Arc<Tower>, precision: u32, cap: u32) -> Result<Arc<EmbeddingSet>> {
    assert!(precision >= 32, "embedding precision below 32 bits");
    if let Some(es) = tower.embeddings.lock().unwrap().get(&precision) {
        return Ok(es.clone());
    }
    let mut wp = precision + 32 + 8 * tower.num_gens() as u32;
    let es = loop {
        if let Some(es) = try_embed(tower, wp, precision) {
            break es;
        }
        if wp >= cap {
            return Err(Error::PrecisionCapExceeded(cap));
        }
        wp = (wp * 2).min(cap);
    };
    let es = Arc::new(es);
    tower.embeddings.lock().unwrap().insert(precision, es.clone());
    Ok(es)
}

fn try_embed(tower: &Arc<Tower>, wp: u32, precision: u32) -> Option<EmbeddingSet> {
    let mut gens: Vec<Vec<ComplexBox>> = vec![Vec::new()];
    let mut monos: Vec<Vec<ComplexBox>> = vec![vec![ComplexBox::one()]];
    for (i, g) in tower.gens.iter().enumerate() {
        let half = 1usize << i;
        let mut new_gens = vec![Vec::new(); half * 2];
        let mut new_monos = vec![Vec::new(); half * 2];
        for e in 0..half {
            let mut d = ComplexBox::zero();
            for (m, c) in g.square.iter().enumerate() {
                if c.is_zero() {
                    continue;
                }
                let coef = Interval::point(crate::interval::Dyadic::from_bigint(c.clone()));
                let mono = &monos[e][m];
                let term = ComplexBox { re: mono.re.mul(&coef, wp), im: mono.im.mul(&coef, wp) };
                d = d.add(&term, wp);
            }
            let r = d.sqrt(wp)?;
            if r.contains_zero() {
                return None;
            }
            for (sign, root) in [(0usize, r.clone()), (1usize, r.neg())] {
                let idx = e + sign * half;
                let mut gv = gens[e].clone();
                gv.push(root.clone());
                new_gens[idx] = gv;
                let mut mv = monos[e].clone();
                mv.extend(monos[e].iter().map(|b| b.mul(&root, wp)));
                new_monos[idx] = mv;
            }
        }
        gens = new_gens;
        monos = new_monos;
    }
    Some(EmbeddingSet { precision, work: wp, generators: gens, monomials: monos })
}

/// Parses a polynomial expression in the tower's generator names, e.g.
/// `"1/2 + 3*g1 - g1*g2"`. Division by tower elements is allowed.
pub fn parse_elem(tower: &Arc<Tower>, s: &str) -> Result<Elem> {
    let mut p = Parser { tower, src: s.as_bytes(), pos: 0 };
    let v = p.expr()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(Error::Parse(format!("unexpected input at offset {} in {s:?}", p.pos)));
    }
    Ok(v)
}

struct Parser<'a> {
    tower: &'a Arc<Tower>,
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn expr(&mut self) -> Result<Elem> {
        let mut acc = self.term()?;
        while let Some(c) = self.peek() {
            match c {
                b'+' => {
                    self.pos += 1;
                    acc = &acc + &self.term()?;
                }
                b'-' => {
                    self.pos += 1;
                    acc = &acc - &self.term()?;
                }
                _ => break,
            }
        }
        Ok(acc)
    }

    fn term(&mut self) -> Result<Elem> {
        let mut acc = self.power()?;
        while let Some(c) = self.peek() {
            match c {
                b'*' => {
                    self.pos += 1;
                    acc = &acc * &self.power()?;
                }
                b'/' => {
                    self.pos += 1;
                    let d = self.power()?;
                    acc = acc.div(&d)?;
                }
                _ => break,
            }
        }
        Ok(acc)
    }

    fn power(&mut self) -> Result<Elem> {
        let base = self.unary()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            self.skip_ws();
            let start = self.pos;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            let e: u32 = std::str::from_utf8(&self.src[start..self.pos])
                .unwrap()
                .parse()
                .map_err(|_| Error::Parse(format!("bad exponent at offset {start}")))?;
            return Ok(base.pow(e));
        }
        Ok(base)
    }

    fn unary(&mut self) -> Result<Elem> {
        match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                Ok(-self.unary()?)
            }
            Some(b'+') => {
                self.pos += 1;
                self.unary()
            }
            Some(b'(') => {
                self.pos += 1;
                let v = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(Error::Parse(format!("expected ')' at offset {}", self.pos)));
                }
                self.pos += 1;
                Ok(v)
            }
            Some(c) if c.is_ascii_digit() => {
                let start = self.pos;
                while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
                let n: BigInt = std::str::from_utf8(&self.src[start..self.pos]).unwrap().parse().unwrap();
                Ok(Elem::from_q(self.tower, &Q::from_integer(n)))
            }
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => {
                let start = self.pos;
                while self.pos < self.src.len() && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_') {
                    self.pos += 1;
                }
                let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
                let i = self
                    .tower
                    .gens
                    .iter()
                    .position(|g| g.name == name)
                    .ok_or_else(|| Error::Parse(format!("unknown generator {name:?}")))?;
                Ok(Elem::generator(self.tower, i))
            }
            other => Err(Error::Parse(format!(
                "unexpected {:?} at offset {}",
                other.map(|c| c as char),
                self.pos
            ))),
        }
    }
}

/// A ring map from a tower into a simplified tower, obtained by replacing one
/// generator with a square root of its radicand that already exists one level
/// down.
pub struct Substitution {
    pub target: Arc<Tower>,
    monomials: Vec<Elem>,
}

impl Substitution {
    pub fn apply(&self, x: &Elem) -> Elem {
        let mut acc = Elem::zero(&self.target);
        for (m, c) in x.num.iter().enumerate() {
            if !c.is_zero() {
                acc = &acc + &self.monomials[m].scale(&Q::new(c.clone(), x.den.clone()));
            }
        }
        acc.lift(&self.target)
    }
}

/// Rebuilds `tower` with generator `level` (1-based) replaced by `witness`,
/// re-adjoining the later generators through [`adjoin_sqrt_named`].
pub fn simplify_tower(tower: &Arc<Tower>, level: usize, witness: &Elem) -> Result<Substitution> {
    assert!(level >= 1 && level <= tower.num_gens());
    let mut target = Tower::rational_with_cap(tower.cap);
    let mut images: Vec<Elem> = Vec::new();
    let map = |images: &[Elem], target: &Arc<Tower>, x: &Elem| -> Elem {
        let mut acc = Elem::zero(target);
        for (m, c) in x.num.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let mut mono = Elem::one(target);
            for (i, img) in images.iter().enumerate() {
                if m >> i & 1 == 1 {
                    mono = &mono * img;
                }
            }
            acc = &acc + &mono.scale(&Q::new(c.clone(), x.den.clone()));
        }
        acc
    };
    for i in 0..tower.num_gens() {
        if i + 1 == level {
            let img = map(&images, &target, witness);
            images.push(img);
            continue;
        }
        let d = tower.square_elem(i);
        let d2 = map(&images, &target, &d);
        let (nt, s) = adjoin_sqrt_named(&target, &d2, Some(&tower.gens[i].name))?;
        target = nt;
        images.push(s);
    }
    let monomials = (0..tower.degree())
        .map(|m| {
            let mut mono = Elem::one(&target);
            for (i, img) in images.iter().enumerate() {
                if m >> i & 1 == 1 {
                    mono = &mono * img;
                }
            }
            mono
        })
        .collect();
    Ok(Substitution { target, monomials })
}

/// Builds a tower from `(name, square)` pairs, where each square is an
/// expression in the earlier names. With `eager`, squares that are already
/// squares collapse and rational squares are normalized; without it the
/// generators are adjoined verbatim. Returns the tower and the element each
/// name denotes.
pub fn build_tower(spec: &[(String, String)], eager: bool, cap: usize) -> Result<(Arc<Tower>, Vec<Elem>)> {
    let mut tower = Tower::rational_with_cap(cap);
    // Names map to elements, which may differ from raw generators after
    // normalization; parse each square in a scratch tower that knows the names.
    let mut values: Vec<Elem> = Vec::new();
    for (i, (name, sq)) in spec.iter().enumerate() {
        let scratch = named_view(&tower, &spec[..i], &values)?;
        let d = substitute_names(&scratch, sq, &values, &tower)?;
        let (nt, s) = if eager {
            adjoin_sqrt_named(&tower, &d, Some(name))?
        } else {
            adjoin_unchecked(&tower, &d, Some(name))?
        };
        tower = nt;
        values.push(s);
    }
    let values = values.iter().map(|v| v.lift(&tower)).collect();
    Ok((tower, values))
}

/// Parses an expression in the user names of a tower built by
/// [`build_tower`] from the same `spec`, mapping names to `values`.
pub fn parse_named(tower: &Arc<Tower>, spec: &[(String, String)], values: &[Elem], s: &str) -> Result<Elem> {
    let scratch = named_view(tower, spec, values)?;
    substitute_names(&scratch, s, values, tower)
}

fn named_view(_tower: &Arc<Tower>, names: &[(String, String)], _values: &[Elem]) -> Result<Arc<Tower>> {
    // A formal tower whose generators carry the user names; only used for
    // parsing, the squares are irrelevant there.
    let mut t = Tower::rational();
    for (n, _) in names {
        let mut sq = vec![BigInt::zero(); t.degree()];
        sq[0] = BigInt::from(2);
        t = t.push(n.clone(), sq);
    }
    Ok(t)
}

/// Parses `s` formally in `scratch`, then maps every user name to its value.
fn substitute_names(scratch: &Arc<Tower>, s: &str, values: &[Elem], target: &Arc<Tower>) -> Result<Elem> {
    let formal = parse_formal(scratch, s)?;
    let mut acc = Elem::zero(target);
    for (m, c) in formal.iter() {
        let mut mono = Elem::one(target);
        for (i, v) in values.iter().enumerate() {
            for _ in 0..m[i] {
                mono = &mono * v;
            }
        }
        acc = &acc + &mono.scale(c);
    }
    Ok(acc)
}

/// Polynomial in the user names with exponent vectors, so that parsing does
/// not depend on the squares. Division is only allowed by rationals here.
fn parse_formal(scratch: &Arc<Tower>, s: &str) -> Result<Vec<(Vec<u32>, Q)>> {
    let n = scratch.num_gens();
    let mut fp = FormalParser { n, names: scratch.names(), src: s.as_bytes(), pos: 0 };
    let v = fp.expr()?;
    fp.skip_ws();
    if fp.pos != fp.src.len() {
        return Err(Error::Parse(format!("unexpected input at offset {} in {s:?}", fp.pos)));
    }
    Ok(v.into_iter().filter(|(_, c)| !c.is_zero()).collect())
}

type Formal = Vec<(Vec<u32>, Q)>;

struct FormalParser<'a> {
    n: usize,
    names: Vec<String>,
    src: &'a [u8],
    pos: usize,
}

fn formal_add(a: Formal, b: Formal) -> Formal {
    let mut out = a;
    for (m, c) in b {
        if let Some(slot) = out.iter_mut().find(|(mm, _)| *mm == m) {
            slot.1 = &slot.1 + &c;
        } else {
            out.push((m, c));
        }
    }
    out
}

fn formal_mul(a: &Formal, b: &Formal) -> Formal {
    let mut out: Formal = Vec::new();
    for (ma, ca) in a {
        for (mb, cb) in b {
            let m: Vec<u32> = ma.iter().zip(mb).map(|(x, y)| x + y).collect();
            out = formal_add(out, vec![(m, ca * cb)]);
        }
    }
    out
}

impl FormalParser<'_> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn constant(&self, q: Q) -> Formal {
        vec![(vec![0; self.n], q)]
    }

    fn expr(&mut self) -> Result<Formal> {
        let mut acc = self.term()?;
        while let Some(c) = self.peek() {
            match c {
                b'+' => {
                    self.pos += 1;
                    acc = formal_add(acc, self.term()?);
                }
                b'-' => {
                    self.pos += 1;
                    let t = self.term()?;
                    acc = formal_add(acc, t.into_iter().map(|(m, c)| (m, -c)).collect());
                }
                _ => break,
            }
        }
        Ok(acc)
    }

    fn term(&mut self) -> Result<Formal> {
        let mut acc = self.power()?;
        while let Some(c) = self.peek() {
            match c {
                b'*' => {
                    self.pos += 1;
                    let f = self.power()?;
                    acc = formal_mul(&acc, &f);
                }
                b'/' => {
                    self.pos += 1;
                    let f = self.power()?;
                    let nz: Vec<_> = f.iter().filter(|(_, c)| !c.is_zero()).collect();
                    if nz.len() != 1 || nz[0].0.iter().any(|&e| e != 0) {
                        return Err(Error::Parse("generator squares may only divide by rationals".into()));
                    }
                    let inv = Q::one() / &nz[0].1;
                    acc = acc.into_iter().map(|(m, c)| (m, c * &inv)).collect();
                }
                _ => break,
            }
        }
        Ok(acc)
    }

    fn power(&mut self) -> Result<Formal> {
        let base = self.unary()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            self.skip_ws();
            let start = self.pos;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            let e: u32 = std::str::from_utf8(&self.src[start..self.pos])
                .unwrap()
                .parse()
                .map_err(|_| Error::Parse(format!("bad exponent at offset {start}")))?;
            let mut acc = self.constant(Q::one());
            for _ in 0..e {
                acc = formal_mul(&acc, &base);
            }
            return Ok(acc);
        }
        Ok(base)
    }

    fn unary(&mut self) -> Result<Formal> {
        match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                Ok(self.unary()?.into_iter().map(|(m, c)| (m, -c)).collect())
            }
            Some(b'+') => {
                self.pos += 1;
                self.unary()
            }
            Some(b'(') => {
                self.pos += 1;
                let v = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(Error::Parse(format!("expected ')' at offset {}", self.pos)));
                }
                self.pos += 1;
                Ok(v)
            }
            Some(c) if c.is_ascii_digit() => {
                let start = self.pos;
                while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
                let n: BigInt = std::str::from_utf8(&self.src[start..self.pos]).unwrap().parse().unwrap();
                Ok(self.constant(Q::from_integer(n)))
            }
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => {
                let start = self.pos;
                while self.pos < self.src.len() && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_') {
                    self.pos += 1;
                }
                let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
                let i = self
                    .names
                    .iter()
                    .position(|g| g == name)
                    .ok_or_else(|| Error::Parse(format!("unknown generator {name:?}")))?;
                let mut m = vec![0; self.n];
                m[i] = 1;
                Ok(vec![(m, Q::one())])
            }
            other => Err(Error::Parse(format!(
                "unexpected {:?} at offset {}",
                other.map(|c| c as char),
                self.pos
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::{q, qi};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn q2() -> (Arc<Tower>, Elem) {
        let t = Tower::rational();
        adjoin_sqrt(&t, &Elem::from_int(&t, 2)).unwrap()
    }

    #[test]
    fn adjoin_eight() {
        let t = Tower::rational();
        let (t2, s) = adjoin_sqrt(&t, &Elem::from_int(&t, 8)).unwrap();
        assert_eq!(t2.num_gens(), 1);
        assert_eq!(t2.generators()[0].square, vec![BigInt::from(2)]);
        assert_eq!(s, Elem::generator(&t2, 0).scale(&qi(2)));
        assert_eq!(s.to_string(), "2*g1");
    }

    #[test]
    fn adjoin_perfect_square() {
        let t = Tower::rational();
        let (t2, s) = adjoin_sqrt(&t, &Elem::from_int(&t, 1)).unwrap();
        assert_eq!(t2.num_gens(), 0);
        assert!(s.is_one());
    }

    #[test]
    fn fourth_root_of_two() {
        let (t, g1) = q2();
        let (t2, g2) = adjoin_sqrt(&t, &g1).unwrap();
        assert_eq!(t2.degree(), 4);
        assert_eq!(g2, Elem::generator(&t2, 1));
        assert_eq!(g2.square(), g1);
        assert_eq!(g2.field_norm(), qi(-2));
    }

    #[test]
    fn reuse_and_collapse() {
        let (t, _) = q2();
        let (t1, s) = adjoin_sqrt(&t, &Elem::from_q(&t, &q(1, 2))).unwrap();
        assert!(Arc::ptr_eq(&t, &t1));
        assert_eq!(s.square(), Elem::from_q(&t, &q(1, 2)));
        // 3 + 2 sqrt2 = (1 + sqrt2)^2
        let g = Elem::generator(&t, 0);
        let d = &Elem::from_int(&t, 3) + &g.scale(&qi(2));
        let (t3, r) = adjoin_sqrt(&t, &d).unwrap();
        assert_eq!(t3.num_gens(), 1);
        assert_eq!(r.square(), d);
        // sqrt 6 = sqrt 2 sqrt 3
        let (t4, _) = adjoin_sqrt(&t, &Elem::from_int(&t, 3)).unwrap();
        let (t5, r6) = adjoin_sqrt(&t4, &Elem::from_int(&t4, 6)).unwrap();
        assert_eq!(t5.num_gens(), 2);
        assert_eq!(r6.square(), Elem::from_int(&t5, 6));
    }

    #[test]
    fn degree_cap() {
        let t = Tower::rational_with_cap(2);
        let (t, _) = adjoin_sqrt(&t, &Elem::from_int(&t, 2)).unwrap();
        let err = adjoin_sqrt(&t, &Elem::from_int(&t, 3)).unwrap_err();
        assert!(matches!(err, Error::DegreeCapExceeded { cap: 2, needed: 4 }));
        assert!(matches!(adjoin_sqrt(&t, &Elem::zero(&t)), Err(Error::ZeroRadicand)));
    }

    #[test]
    fn invert_examples() {
        let (t, g) = q2();
        let x = &Elem::one(&t) + &g;
        assert_eq!(x.invert().unwrap(), &g - &Elem::one(&t));
        assert!(matches!(Elem::zero(&t).invert(), Err(Error::DivisionByZero)));
    }

    #[test]
    fn square_detected() {
        let spec = vec![("g1".to_string(), "2".to_string()), ("g2".to_string(), "3 + 2*g1".to_string())];
        let (t, vals) = build_tower(&spec, false, 64).unwrap();
        assert_eq!(t.num_gens(), 2);
        let x = &(&Elem::one(&t) + &vals[0]) - &vals[1];
        match x.invert() {
            Err(Error::SquareDetected { level, radicand, witness }) => {
                assert_eq!(level, 2);
                assert_eq!(radicand.to_string(), "3 + 2*g1");
                assert_eq!(witness.to_string(), "1 + g1");
            }
            other => panic!("expected SquareDetected, got {other:?}"),
        }
        let (te, _) = build_tower(&spec, true, 64).unwrap();
        assert_eq!(te.num_gens(), 1);
    }

    #[test]
    fn conjugate_and_norm() {
        let t = Tower::rational();
        let (t, g) = adjoin_sqrt(&t, &Elem::from_int(&t, 5)).unwrap();
        let x = &Elem::from_int(&t, 3) + &g.scale(&qi(2));
        assert_eq!(x.relative_conjugate().unwrap().to_string(), "3 - 2*g1");
        assert_eq!(x.field_norm(), qi(-11));
        assert_eq!(Elem::from_int(&t, 5).field_norm(), qi(25));
        assert_eq!(Elem::from_int(&t, 5).relative_conjugate().unwrap(), Elem::from_int(&t, 5));
        assert!(matches!(Elem::one(&Tower::rational()).relative_conjugate(), Err(Error::RationalContext)));
    }

    #[test]
    fn pencil_examples() {
        let (t, g) = q2();
        let one = Elem::one(&t);
        assert_eq!(pencil_norm(&one, &g), vec![qi(1), qi(0), qi(-2)]);
        assert_eq!(pencil_norm(&one.scale(&qi(2)), &g.scale(&qi(2))), vec![qi(4), qi(0), qi(-8)]);
        let x = &one + &g;
        assert_eq!(pencil_norm(&x, &Elem::zero(&t)), vec![x.field_norm()]);
    }

    #[test]
    fn embeddings() {
        let (t, g) = q2();
        let es = embed_all(&t, 64).unwrap();
        assert_eq!(es.count(), 2);
        let (a, _) = g.embed_f64(&es, 0);
        let (b, _) = g.embed_f64(&es, 1);
        assert!((a - 2f64.sqrt()).abs() < 1e-15 && (b + 2f64.sqrt()).abs() < 1e-15);
        assert!(t.is_totally_real().unwrap());

        let r = Tower::rational();
        let (ti, i) = adjoin_sqrt(&r, &Elem::from_int(&r, -1)).unwrap();
        let es = embed_all(&ti, 64).unwrap();
        let (re, im) = i.embed_f64(&es, 0);
        assert!(re.abs() < 1e-30 && (im.abs() - 1.0).abs() < 1e-15);
        assert!(!ti.is_totally_real().unwrap());

        let (t4, g2) = adjoin_sqrt(&t, &g).unwrap();
        let es = embed_all(&t4, 64).unwrap();
        assert_eq!(es.count(), 4);
        let r4 = 2f64.powf(0.25);
        let mut seen: Vec<(f64, f64)> = (0..4).map(|e| g2.embed_f64(&es, e)).collect();
        seen.sort_by(|a, b| (a.0, a.1).partial_cmp(&(b.0, b.1)).unwrap());
        let want = [(-r4, 0.0), (0.0, -r4), (0.0, r4), (r4, 0.0)];
        for (s, w) in seen.iter().zip(want) {
            assert!((s.0 - w.0).abs() < 1e-12 && (s.1 - w.1).abs() < 1e-12, "{seen:?}");
        }
    }

    #[test]
    fn parse_and_print() {
        let spec = vec![("g1".to_string(), "2".to_string()), ("g2".to_string(), "3".to_string())];
        let (t, _) = build_tower(&spec, true, 64).unwrap();
        let x = parse_elem(&t, "1/2 + 3*g1 - g1*g2").unwrap();
        assert_eq!(x.to_string(), "1/2 + 3*g1 - g1*g2");
        assert_eq!(parse_elem(&t, "(g1 + 1)^2").unwrap().to_string(), "3 + 2*g1");
        assert!(parse_elem(&t, "g7").is_err());
    }

    fn random_elem(rng: &mut ChaCha8Rng, t: &Arc<Tower>) -> Elem {
        let coeffs: Vec<Q> = (0..t.degree()).map(|_| q(rng.gen_range(-9..=9), rng.gen_range(1..=5))).collect();
        Elem::from_coeffs(t, &coeffs)
    }

    fn test_towers() -> Vec<Arc<Tower>> {
        let r = Tower::rational();
        let (a, g) = adjoin_sqrt(&r, &Elem::from_int(&r, 2)).unwrap();
        let (b, _) = adjoin_sqrt(&a, &(&g + &Elem::from_int(&a, 3))).unwrap();
        let (c, _) = adjoin_sqrt(&a, &Elem::from_int(&a, -3)).unwrap();
        vec![r, a, b, c]
    }

    #[test]
    fn random_field_laws() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let towers = test_towers();
        for i in 0..500 {
            let t = &towers[i % towers.len()];
            let x = random_elem(&mut rng, t);
            let y = random_elem(&mut rng, t);
            if x.is_zero() {
                continue;
            }
            let xi = x.invert().unwrap();
            assert!((&x * &xi).is_one());
            assert_eq!(xi.invert().unwrap(), x);
            assert_eq!((&x * &y).field_norm(), x.field_norm() * y.field_norm());
        }
    }

    #[test]
    fn norm_matches_embeddings() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for t in test_towers().iter().skip(1) {
            for prec in [64, 128] {
                let es = embed_all(t, prec).unwrap();
                for _ in 0..10 {
                    let x = random_elem(&mut rng, t);
                    let mut p = ComplexBox::one();
                    for e in 0..es.count() {
                        p = p.mul(&x.embed(&es, e), prec);
                    }
                    let n = Interval::from_rational(&x.field_norm(), prec);
                    assert!(p.re.overlaps(&n) && p.im.contains_zero());
                }
            }
        }
    }

    #[test]
    fn pencil_matches_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for t in test_towers().iter().skip(1) {
            let y1 = random_elem(&mut rng, t);
            let y2 = random_elem(&mut rng, t);
            let r = pencil_norm(&y1, &y2);
            for _ in 0..20 {
                let qv = q(rng.gen_range(-20..=20), rng.gen_range(1..=7));
                let val = r.iter().rev().fold(Q::zero(), |acc, c| acc * &qv + c);
                assert_eq!(val, (&y1 + &y2.scale(&qv)).field_norm());
            }
        }
    }

    #[test]
    fn adjoin_then_square() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let towers = test_towers();
        for t in &towers[..3] {
            for _ in 0..10 {
                let d = random_elem(&mut rng, t);
                if d.is_zero() {
                    continue;
                }
                let (t2, s) = adjoin_sqrt(t, &d).unwrap();
                assert_eq!(s.square(), d.lift(&t2));
            }
        }
        let r = Tower::rational();
        let (a, s1) = adjoin_sqrt(&r, &Elem::from_int(&r, 12)).unwrap();
        let (b, s2) = adjoin_sqrt(&a, &Elem::from_int(&a, 3)).unwrap();
        assert!(Arc::ptr_eq(&a, &b));
        assert_eq!(s1, s2.scale(&qi(2)));
    }

    /// Random expression trees over a tower that is not a field; evaluation
    /// that hits a zero divisor simplifies the tower and retries.
    #[derive(Debug, Clone)]
    enum Expr {
        Leaf(i64, usize),
        Add(Box<Expr>, Box<Expr>),
        Mul(Box<Expr>, Box<Expr>),
        Div(Box<Expr>, Box<Expr>),
    }

    fn random_expr(rng: &mut ChaCha8Rng, depth: u32) -> Expr {
        if depth == 0 || rng.gen_bool(0.3) {
            return Expr::Leaf(rng.gen_range(-3..=3), rng.gen_range(0..4));
        }
        let a = Box::new(random_expr(rng, depth - 1));
        let b = Box::new(random_expr(rng, depth - 1));
        match rng.gen_range(0..3) {
            0 => Expr::Add(a, b),
            1 => Expr::Mul(a, b),
            _ => Expr::Div(a, b),
        }
    }

    fn eval(e: &Expr, t: &Arc<Tower>, basis: &[Elem]) -> Result<Elem> {
        Ok(match e {
            Expr::Leaf(c, m) => basis[*m].scale(&qi(*c)).lift(t),
            Expr::Add(a, b) => &eval(a, t, basis)? + &eval(b, t, basis)?,
            Expr::Mul(a, b) => &eval(a, t, basis)? * &eval(b, t, basis)?,
            Expr::Div(a, b) => {
                let d = eval(b, t, basis)?;
                if d.is_zero() {
                    return Ok(Elem::zero(t));
                }
                eval(a, t, basis)?.div(&d)?
            }
        })
    }

    #[test]
    fn simplify_and_retry_preserves_results() {
        let spec = vec![("g1".to_string(), "2".to_string()), ("g2".to_string(), "3 + 2*g1".to_string())];
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut retries = 0;
        for _ in 0..100 {
            let (t, v) = build_tower(&spec, false, 64).unwrap();
            let one = Elem::one(&t);
            let basis = vec![one.clone(), v[0].clone(), v[1].clone(), &one + &v[0] - v[1].clone()];
            // A completed computation without division.
            let mut pre = random_expr(&mut rng, 3);
            while format!("{pre:?}").contains("Div") {
                pre = random_expr(&mut rng, 3);
            }
            let done = eval(&pre, &t, &basis).unwrap();
            let tree = random_expr(&mut rng, 4);
            match eval(&tree, &t, &basis) {
                Ok(_) => {}
                Err(Error::SquareDetected { level, witness, .. }) => {
                    retries += 1;
                    let sub = simplify_tower(&t, level, &witness).unwrap();
                    let nb: Vec<Elem> = basis.iter().map(|b| sub.apply(b)).collect();
                    assert_eq!(sub.apply(&done), eval(&pre, &sub.target, &nb).unwrap());
                    eval(&tree, &sub.target, &nb).unwrap();
                }
                Err(e) => panic!("{e}"),
            }
        }
        assert!(retries > 0);
    }
}
