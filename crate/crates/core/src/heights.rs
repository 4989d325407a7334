//! Absolute Weil heights of vectors, subspaces and matrices.
//!
//! For `x` over a tower of degree `d`, `H(x)^d` is the product of a finite
//! part `FP^d = ∏_{v∤∞} max_i |x_i|_v^{d_v}` and the archimedean product
//! `∏_σ ‖σ(x)‖₂` over all `d` embeddings. The finite part is an exact
//! rational; the archimedean product is an interval, or an exact rational
//! `Norm(Σ x_i²)` (for `H^{2d}`) when every embedding is real.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::{Arc, Mutex};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::arith::{rat_gcd, rat_gcd_all, rational_sqrt, rational_valuations, squarefree_split, Q};
use crate::error::{Error, Result};
use crate::interval::{ln_rational, Interval};
use crate::linalg::{common_tower, normalize_first, Matrix, Subspace, Vector};
use crate::tower::{embed_all, pencil_norm, Elem, Tower};

#[derive(Clone, Debug)]
pub struct HeightConfig {
    /// Random trials for the Monte Carlo finite part.
    pub trials: usize,
    pub seed: u64,
    /// Compute in the smallest sub-tower holding the coordinates.
    pub minimize_field: bool,
}

impl Default for HeightConfig {
    fn default() -> Self {
        HeightConfig { trials: 8, seed: 0x5eed, minimize_field: true }
    }
}

/// The finite part stored as its `d`-th power.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FinitePart {
    pub pow: Q,
    pub degree: usize,
}

impl FinitePart {
    /// The finite part itself when it is rational.
    pub fn value(&self) -> Option<Q> {
        let mut v = self.pow.clone();
        let mut d = self.degree;
        while d > 1 {
            v = rational_sqrt(&v)?;
            d /= 2;
        }
        Some(v)
    }

    pub fn interval(&self, prec: u32) -> Interval {
        let mut iv = Interval::from_rational(&self.pow, prec + 16);
        let mut d = self.degree;
        while d > 1 {
            iv = iv.sqrt(prec + 16);
            d /= 2;
        }
        iv
    }

    pub fn log(&self, prec: u32) -> Interval {
        ln_rational(&self.pow, prec + 8).div(&Interval::from_int(self.degree as i64), prec)
    }

    /// `p -> m_p` with `FP = ∏ p^{m_p/d}`.
    pub fn prime_contents(&self) -> BTreeMap<BigInt, i64> {
        rational_valuations(&self.pow)
    }

    /// Equality of the real numbers `a^{1/d1}` and `b^{1/d2}`.
    pub fn same_value(&self, o: &FinitePart) -> bool {
        powers_equal(&self.pow, self.degree, &o.pow, o.degree)
    }
}

/// `a^{1/da} == b^{1/db}` for positive rationals, via `a^db == b^da`.
pub fn powers_equal(a: &Q, da: usize, b: &Q, db: usize) -> bool {
    let g = da.gcd(&db);
    crate::arith::pow_q(a, (db / g) as u64) == crate::arith::pow_q(b, (da / g) as u64)
}

fn restrict_minimal(x: &[Elem], cfg: &HeightConfig) -> Vector {
    let t = common_tower(x[0].tower(), x);
    let x: Vector = x.iter().map(|e| e.lift(&t)).collect();
    if !cfg.minimize_field {
        return x;
    }
    let level = x.iter().map(Elem::level).max().unwrap_or(0);
    if level == t.num_gens() {
        return x;
    }
    x.iter().map(|e| e.restrict(level)).collect()
}

/// `∏_{v∤∞} max_i |x_i|_v` of the vector as given (no projective
/// normalization), routed to an exact method when one exists.
pub fn finite_part(x: &[Elem], cfg: &HeightConfig) -> Result<FinitePart> {
    if x.iter().all(Elem::is_zero) {
        return Err(Error::ZeroVector);
    }
    let x = restrict_minimal(x, cfg);
    let t = x[0].tower().clone();
    match t.num_gens() {
        0 => Ok(finite_part_rational(&x)),
        1 => Ok(finite_part_quadratic(&x).unwrap_or_else(|| finite_part_mc(&x, cfg))),
        _ => Ok(finite_part_mc(&x, cfg)),
    }
}

/// Rational vectors: the finite part of `x` is `1 / gcd(x)` for the
/// fractional-ideal gcd.
pub fn finite_part_rational(x: &[Elem]) -> FinitePart {
    let coords: Vec<Q> = x.iter().map(|e| e.as_rational().expect("rational vector expected")).collect();
    let g = rat_gcd_all(&coords);
    FinitePart { pow: Q::one() / g, degree: 1 }
}

/// Exact path over `Q(√f)` with `f` a squarefree integer: the index of the
/// coordinate ideal in the maximal order `Z[ω]` is the gcd of the `2x2` minors
/// of its generators as a `Z`-module.
pub fn finite_part_quadratic(x: &[Elem]) -> Option<FinitePart> {
    let t = x[0].tower();
    if t.num_gens() != 1 {
        return None;
    }
    let f = t.generators()[0].square[0].clone();
    if !squarefree_split(&f).0.is_one() {
        return None;
    }
    let m = x.iter().fold(BigInt::one(), |acc, e| acc.lcm(e.denominator()));
    let one_mod_4 = f.mod_floor(&BigInt::from(4)).is_one();
    let mut gens: Vec<(BigInt, BigInt)> = Vec::new();
    for e in x {
        if e.is_zero() {
            continue;
        }
        let s = &m / e.denominator();
        let u = &e.numerators()[0] * &s;
        let v = &e.numerators()[1] * &s;
        if one_mod_4 {
            gens.push((&u - &v, &v * 2));
            let fm1 = (&f - 1) / 2;
            gens.push((&v * fm1, &u + &v));
        } else {
            gens.push((u.clone(), v.clone()));
            gens.push((&v * &f, u));
        }
    }
    let mut det = BigInt::zero();
    for i in 0..gens.len() {
        for j in i + 1..gens.len() {
            let d = &gens[i].0 * &gens[j].1 - &gens[i].1 * &gens[j].0;
            det = det.gcd(&d);
        }
    }
    if det.is_zero() {
        return None;
    }
    Some(FinitePart { pow: Q::new(&m * &m, det.abs()), degree: 2 })
}

/// Monte Carlo Gauss-content finite part. With `x1` the first nonzero
/// coordinate, each trial `y` contributes the rational content of
/// `Norm(x1 + t*y)`, whose `p`-part is `∏_{v|p} max(|x1|_v, |y|_v)^{d_v}`;
/// the best trial per prime (the fractional-ideal gcd of the contents)
/// reaches the true maximum for generic `y`.
pub fn finite_part_mc(x: &[Elem], cfg: &HeightConfig) -> FinitePart {
    let t = common_tower(x[0].tower(), x);
    let x: Vector = x.iter().map(|e| e.lift(&t)).collect();
    let first = x.iter().position(|e| !e.is_zero()).expect("nonzero vector");
    let x1 = &x[first];
    let others: Vec<usize> = (0..x.len()).filter(|&i| i != first && !x[i].is_zero()).collect();
    let mut pool: Vec<Elem> = others.iter().map(|&i| x[i].clone()).collect();
    if others.len() <= 8 {
        for a in 0..others.len() {
            for b in a + 1..others.len() {
                pool.push(&x[others[a]] + &x[others[b]]);
            }
        }
    }
    if !others.is_empty() {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x6a09_e667_f3bc_c908);
        for j in 1..=cfg.trials {
            let bound = 1i64 << j.min(40);
            let mut y = Elem::zero(&t);
            for &i in &others {
                let c: i64 = rng.gen_range(-bound..=bound);
                if c != 0 {
                    y = &y + &x[i].scale(&Q::from_integer(BigInt::from(c)));
                }
            }
            if !y.is_zero() {
                pool.push(y);
            }
        }
    }
    if pool.is_empty() {
        pool.push(Elem::zero(&t));
    }
    let mut g = Q::zero();
    for y in &pool {
        let content = rat_gcd_all(&pencil_norm(x1, y));
        g = rat_gcd(&g, &content);
    }
    FinitePart { pow: Q::one() / g, degree: t.degree() }
}

struct HeightInner {
    degree: usize,
    fp: FinitePart,
    /// `H^{2d}` when it is known exactly.
    exact_pow: Option<Q>,
    vector: Option<Vector>,
    key: String,
    cache: Mutex<HashMap<u32, Interval>>,
}

/// A global height with exact finite part and a certified enclosure at any
/// requested precision.
#[derive(Clone)]
pub struct HeightValue {
    inner: Arc<HeightInner>,
}

impl fmt::Debug for HeightValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (lo, hi) = self.enclosure(64).map(|i| i.to_f64_pair()).unwrap_or((f64::NAN, f64::NAN));
        write!(f, "H∈[{lo:.12}, {hi:.12}] (d={}, exact={})", self.inner.degree, self.inner.exact_pow.is_some())
    }
}

impl HeightValue {
    pub fn one() -> HeightValue {
        HeightValue::from_exact_pow(Q::one(), 1, "one".into())
    }

    /// A height given by `H^{2d} = pow`.
    pub fn from_exact_pow(pow: Q, degree: usize, key: String) -> HeightValue {
        HeightValue {
            inner: Arc::new(HeightInner {
                degree,
                fp: FinitePart { pow: Q::one(), degree },
                exact_pow: Some(pow),
                vector: None,
                key,
                cache: Mutex::new(HashMap::new()),
            }),
        }
    }

    pub fn degree(&self) -> usize {
        self.inner.degree
    }

    pub fn finite_part(&self) -> &FinitePart {
        &self.inner.fp
    }

    /// `(H^{2d}, 2d)` when the height is known exactly.
    pub fn exact_pow(&self) -> Option<(&Q, usize)> {
        self.inner.exact_pow.as_ref().map(|p| (p, 2 * self.inner.degree))
    }

    pub fn is_exact(&self) -> bool {
        self.inner.exact_pow.is_some()
    }

    /// Projective identity of the measured object, used for symbolic
    /// cancellation in certificates.
    pub fn key(&self) -> &str {
        &self.inner.key
    }

    /// Enclosure of `log H`.
    pub fn log(&self, prec: u32) -> Result<Interval> {
        if let Some(v) = self.inner.cache.lock().unwrap().get(&prec) {
            return Ok(v.clone());
        }
        let two_d = Interval::from_int(2 * self.inner.degree as i64);
        let v = if let Some(p) = &self.inner.exact_pow {
            ln_rational(p, prec + 8).div(&two_d, prec)
        } else {
            let x = self.inner.vector.as_ref().expect("inexact height without vector");
            let arch = arch_log_sum(x, prec)?;
            let fp = ln_rational(&self.inner.fp.pow, prec + 8).shl(1);
            fp.add(&arch, prec + 8).div(&two_d, prec)
        };
        self.inner.cache.lock().unwrap().insert(prec, v.clone());
        Ok(v)
    }

    /// Enclosure of `H` itself.
    pub fn enclosure(&self, prec: u32) -> Result<Interval> {
        let wp = prec + 16;
        let mut steps = (2 * self.inner.degree).trailing_zeros();
        let mut iv = if let Some(p) = &self.inner.exact_pow {
            Interval::from_rational(p, wp)
        } else {
            let x = self.inner.vector.as_ref().expect("inexact height without vector");
            let fp2 = Interval::from_rational(&(&self.inner.fp.pow * &self.inner.fp.pow), wp);
            fp2.mul(&arch_product(x, wp)?, wp)
        };
        while steps > 0 {
            iv = iv.sqrt(wp);
            steps -= 1;
        }
        Ok(iv)
    }

    pub fn approx(&self) -> f64 {
        self.enclosure(64).map(|i| i.mid_f64()).unwrap_or(f64::NAN)
    }

    /// The vector the height was computed from, if any.
    pub fn vector(&self) -> Option<&Vector> {
        self.inner.vector.as_ref()
    }
}

/// `∏_σ Σ_i |σ(x_i)|²` as an interval.
fn arch_product(x: &[Elem], prec: u32) -> Result<Interval> {
    let t = x[0].tower().clone();
    if t.num_gens() == 0 {
        let s = x.iter().fold(Q::zero(), |acc, e| acc + e.coeff(0) * e.coeff(0));
        return Ok(Interval::from_rational(&s, prec));
    }
    let es = embed_all(&t, prec)?;
    let mut prod = Interval::from_int(1);
    for e in 0..es.count() {
        prod = prod.mul(&sq_norm_at(x, &es, e, prec), prec);
    }
    Ok(prod)
}

fn sq_norm_at(x: &[Elem], es: &crate::tower::EmbeddingSet, e: usize, prec: u32) -> Interval {
    let mut s = Interval::zero();
    for c in x {
        if !c.is_zero() {
            s = s.add(&c.embed(es, e).abs_sq(prec + 8), prec + 8);
        }
    }
    s
}

/// `Σ_σ log Σ_i |σ(x_i)|²`.
fn arch_log_sum(x: &[Elem], prec: u32) -> Result<Interval> {
    let t = x[0].tower().clone();
    if t.num_gens() == 0 {
        let s = x.iter().fold(Q::zero(), |acc, e| acc + e.coeff(0) * e.coeff(0));
        return Ok(ln_rational(&s, prec));
    }
    let es = embed_all(&t, prec + 16)?;
    let mut acc = Interval::zero();
    for e in 0..es.count() {
        let s = sq_norm_at(x, &es, e, prec + 16);
        if !s.is_positive() {
            return Err(Error::PrecisionCapExceeded(prec));
        }
        acc = acc.add(&s.ln(prec + 8), prec + 8);
    }
    Ok(acc)
}

fn projective_key(x: &[Elem]) -> String {
    let t = x[0].tower();
    let names: Vec<String> = t
        .generators()
        .iter()
        .map(|g| format!("{}:{:?}", g.name, g.square))
        .collect();
    match normalize_first(x) {
        Ok(v) => format!("[{}]{}", names.join(","), crate::linalg::vec_to_string(&v)),
        Err(_) => "zero".into(),
    }
}

pub fn height_vector(x: &[Elem], cfg: &HeightConfig) -> Result<HeightValue> {
    if x.is_empty() || x.iter().all(Elem::is_zero) {
        return Err(Error::ZeroVector);
    }
    let x = restrict_minimal(x, cfg);
    let fp = finite_part(&x, cfg)?;
    let t = x[0].tower().clone();
    let degree = t.degree();
    let exact_pow = if t.is_totally_real()? {
        let s = x.iter().fold(Elem::zero(&t), |acc, e| &acc + &e.square());
        Some(&fp.pow * &fp.pow * s.field_norm())
    } else {
        None
    };
    let key = projective_key(&x);
    Ok(HeightValue {
        inner: Arc::new(HeightInner { degree, fp, exact_pow, vector: Some(x), key, cache: Mutex::new(HashMap::new()) }),
    })
}

/// `h(x) = H(1, x)`.
pub fn height_inhom(x: &[Elem], cfg: &HeightConfig) -> Result<HeightValue> {
    let t = if x.is_empty() { Tower::rational() } else { common_tower(x[0].tower(), x) };
    let mut v = vec![Elem::one(&t)];
    v.extend(x.iter().cloned());
    height_vector(&v, cfg)
}

pub fn height_subspace(z: &Subspace, cfg: &HeightConfig) -> Result<HeightValue> {
    if z.is_zero() || z.dim() == z.ambient() {
        return Ok(HeightValue::one());
    }
    height_vector(z.grassmann()?, cfg)
}

/// Height of the matrix flattened to a vector of length `rows*cols`.
pub fn height_gram(m: &Matrix, cfg: &HeightConfig) -> Result<HeightValue> {
    if m.is_zero() {
        return Err(Error::ZeroObject);
    }
    height_vector(m.entries(), cfg)
}

/// Coefficient vector of the quadratic polynomial `F(X) = Σ f_ij X_i X_j`:
/// `f_ii` and `2 f_ij` for `i < j`.
pub fn form_coefficients(f: &Matrix) -> Vector {
    let n = f.rows();
    let mut v = Vec::new();
    for i in 0..n {
        for j in i..n {
            if i == j {
                v.push(f.get(i, i).clone());
            } else {
                v.push(f.get(i, j).scale(&Q::from_integer(BigInt::from(2))));
            }
        }
    }
    v
}

pub fn height_form_poly(f: &Matrix, cfg: &HeightConfig) -> Result<HeightValue> {
    if f.is_zero() {
        return Err(Error::ZeroObject);
    }
    height_vector(&form_coefficients(f), cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::{q, qi};
    use crate::linalg::{kernel, unit, vec_from_ints, vec_from_q};
    use crate::tower::adjoin_sqrt;

    fn cfg() -> HeightConfig {
        HeightConfig::default()
    }

    fn close(h: &HeightValue, want: f64) {
        let iv = h.enclosure(128).unwrap();
        assert!((iv.mid_f64() - want).abs() < 1e-12, "{h:?} vs {want}");
    }

    #[test]
    fn finite_part_examples() {
        let t = Tower::rational();
        let fp = finite_part(&vec_from_ints(&t, &[3, 6]), &cfg()).unwrap();
        assert_eq!(fp.value(), Some(q(1, 3)));
        let fp = finite_part(&vec_from_q(&t, &[q(1, 2), qi(3)]), &cfg()).unwrap();
        assert_eq!(fp.value(), Some(qi(2)));
        let (t2, g) = adjoin_sqrt(&t, &Elem::from_int(&t, 2)).unwrap();
        let x = vec![Elem::from_int(&t2, 2), g.scale(&qi(2))];
        let fp = finite_part(&x, &cfg()).unwrap();
        assert_eq!(fp.value(), Some(q(1, 2)));
        assert_eq!(finite_part_mc(&x, &cfg()).value(), Some(q(1, 2)));
        assert!(matches!(finite_part(&vec_from_ints(&t, &[0, 0]), &cfg()), Err(Error::ZeroVector)));
    }

    #[test]
    fn vector_heights() {
        let t = Tower::rational();
        let h = height_vector(&vec_from_ints(&t, &[1, 0, 0]), &cfg()).unwrap();
        assert_eq!(h.exact_pow(), Some((&qi(1), 2)));
        let h = height_vector(&vec_from_ints(&t, &[3, 4]), &cfg()).unwrap();
        assert_eq!(h.exact_pow(), Some((&qi(25), 2)));
        let (t2, g) = adjoin_sqrt(&t, &Elem::from_int(&t, 2)).unwrap();
        let h = height_vector(&[Elem::one(&t2), g], &cfg()).unwrap();
        close(&h, 3f64.sqrt());
        assert_eq!(h.exact_pow(), Some((&qi(9), 4)));
    }

    #[test]
    fn inhomogeneous_heights() {
        let t = Tower::rational();
        close(&height_inhom(&vec_from_ints(&t, &[1]), &cfg()).unwrap(), 2f64.sqrt());
        close(&height_inhom(&vec_from_ints(&t, &[3, 4]), &cfg()).unwrap(), 26f64.sqrt());
        close(&height_inhom(&vec_from_ints(&t, &[0, 0]), &cfg()).unwrap(), 1.0);
    }

    #[test]
    fn subspace_heights() {
        let t = Tower::rational();
        let z = Subspace::span(&t, 3, &[vec_from_ints(&t, &[1, 0, 1]), vec_from_ints(&t, &[0, 1, 0])]).unwrap();
        close(&height_subspace(&z, &cfg()).unwrap(), 2f64.sqrt());
        close(&height_subspace(&Subspace::full(&t, 4), &cfg()).unwrap(), 1.0);
        let k = kernel(&Matrix::from_rows(&[vec_from_ints(&t, &[1, 1, 1])])).unwrap();
        close(&height_subspace(&k, &cfg()).unwrap(), 3f64.sqrt());
    }

    #[test]
    fn gram_heights() {
        let t = Tower::rational();
        let d = Matrix::from_rows(&[vec_from_ints(&t, &[1, 0]), vec_from_ints(&t, &[0, -1])]);
        close(&height_gram(&d, &cfg()).unwrap(), 2f64.sqrt());
        close(&height_gram(&Matrix::identity(&t, 2), &cfg()).unwrap(), 2f64.sqrt());
        assert!(matches!(height_gram(&Matrix::zeros(&t, 2, 2), &cfg()), Err(Error::ZeroObject)));
    }

    #[test]
    fn form_poly_heights() {
        let t = Tower::rational();
        let d = Matrix::from_rows(&[vec_from_ints(&t, &[1, 0]), vec_from_ints(&t, &[0, -1])]);
        close(&height_form_poly(&d, &cfg()).unwrap(), 2f64.sqrt());
        let h = Matrix::from_q(&t, &[vec![qi(0), q(1, 2)], vec![q(1, 2), qi(0)]]);
        close(&height_form_poly(&h, &cfg()).unwrap(), 1.0);
        // Flattened Gram (0, 1/2, 1/2, 0) is projectively (0, 1, 1, 0).
        close(&height_gram(&h, &cfg()).unwrap(), 2f64.sqrt());
        let sq = Matrix::from_rows(&[vec_from_ints(&t, &[1, 0]), vec_from_ints(&t, &[0, 0])]);
        close(&height_form_poly(&sq, &cfg()).unwrap(), 1.0);
    }

    #[test]
    fn complex_tower_heights() {
        let t = Tower::rational();
        let (ti, i) = adjoin_sqrt(&t, &Elem::from_int(&t, -1)).unwrap();
        // (i, 1): finite part 1, |σ(x)|² = 2 under both embeddings.
        let h = height_vector(&[i.clone(), Elem::one(&ti)], &cfg()).unwrap();
        assert!(!h.is_exact());
        close(&h, 2f64.sqrt());
        let l = h.log(256).unwrap();
        assert!((l.mid_f64() - 0.5 * 2f64.ln()).abs() < 1e-15);
        assert!(l.relative_width() < 1e-60);
        let _ = unit(&ti, 2, 0);
    }
}
