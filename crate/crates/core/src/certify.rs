//! Height bounds as executable right-hand sides, and three-valued
//! certificates comparing them with computed heights.
//!
//! Both sides of a bound are products `∏ b_i^{e_i}` of positive rational
//! constants and heights with rational exponents ([`LogQuantity`]). A
//! certificate decides `lhs ≤ rhs` from the quotient `rhs / lhs`: factors with
//! the same projective key cancel symbolically, then the sign of
//! `log(rhs / lhs)` is read off an interval enclosure, escalating precision.
//! When every remaining factor is an exact rational power the comparison is
//! finished exactly, so equality cases verify.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::arith::{q, qi, Q};
use crate::error::{Error, Result};
use crate::heights::{height_gram, height_inhom, height_subspace, height_vector, height_form_poly, HeightConfig, HeightValue};
use crate::interval::{ln_rational, Interval};
use crate::linalg::{intersect, is_zero_vec, vadd, vscale, Matrix, Subspace, Vector};
use crate::tower::{Elem, Tower};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Verified,
    Violated,
    Inconclusive,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Verified => "verified",
            Verdict::Violated => "violated",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Clone)]
pub enum Base {
    Const(Q),
    Height(HeightValue),
}

impl fmt::Debug for Base {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Base::Const(c) => write!(f, "{c}"),
            Base::Height(h) => write!(f, "H[{}]", h.key()),
        }
    }
}

/// `∏ base_i^{exp_i}` with positive bases.
#[derive(Clone, Debug, Default)]
pub struct LogQuantity {
    terms: Vec<(Base, Q)>,
}

impl LogQuantity {
    pub fn one() -> LogQuantity {
        LogQuantity::default()
    }

    pub fn constant(c: Q) -> LogQuantity {
        LogQuantity::one().cpow(c, Q::one())
    }

    pub fn height(h: &HeightValue) -> LogQuantity {
        LogQuantity::one().hpow(h, Q::one())
    }

    pub fn product(hs: &[HeightValue]) -> LogQuantity {
        hs.iter().fold(LogQuantity::one(), |acc, h| acc.hpow(h, Q::one()))
    }

    /// Multiplies by `c^e`.
    pub fn cpow(mut self, c: Q, e: Q) -> LogQuantity {
        assert!(c.is_positive(), "bound constants are positive");
        if !e.is_zero() && !c.is_one() {
            self.terms.push((Base::Const(c), e));
        }
        self
    }

    /// Multiplies by `h^e`.
    pub fn hpow(mut self, h: &HeightValue, e: Q) -> LogQuantity {
        if !e.is_zero() {
            self.terms.push((Base::Height(h.clone()), e));
        }
        self
    }

    pub fn times(mut self, o: &LogQuantity) -> LogQuantity {
        self.terms.extend(o.terms.iter().cloned());
        self
    }

    pub fn pow(self, e: &Q) -> LogQuantity {
        LogQuantity { terms: self.terms.into_iter().map(|(b, x)| (b, x * e)).collect() }
    }

    pub fn recip(self) -> LogQuantity {
        self.pow(&qi(-1))
    }

    pub fn terms(&self) -> &[(Base, Q)] {
        &self.terms
    }

    /// Merges equal constants and heights with equal keys; drops zero
    /// exponents.
    pub fn simplified(&self) -> LogQuantity {
        let mut consts: BTreeMap<Q, Q> = BTreeMap::new();
        let mut heights: BTreeMap<String, (HeightValue, Q)> = BTreeMap::new();
        for (b, e) in &self.terms {
            match b {
                Base::Const(c) => *consts.entry(c.clone()).or_insert_with(Q::zero) += e,
                Base::Height(h) => {
                    heights.entry(h.key().to_string()).or_insert_with(|| (h.clone(), Q::zero())).1 += e;
                }
            }
        }
        let mut terms = Vec::new();
        for (c, e) in consts {
            if !e.is_zero() && !c.is_one() {
                terms.push((Base::Const(c), e));
            }
        }
        for (_, (h, e)) in heights {
            if !e.is_zero() {
                terms.push((Base::Height(h), e));
            }
        }
        LogQuantity { terms }
    }

    /// Enclosure of the logarithm.
    pub fn log(&self, prec: u32) -> Result<Interval> {
        let wp = prec + 16;
        let mut acc = Interval::zero();
        for (b, e) in &self.terms {
            let l = match b {
                Base::Const(c) => ln_rational(c, wp),
                Base::Height(h) => h.log(wp)?,
            };
            acc = acc.add(&l.mul_rational(e, wp), wp);
        }
        Ok(acc)
    }

    /// Every factor as `(rational base, rational exponent)`, when all heights
    /// are exact.
    fn exact_terms(&self) -> Option<Vec<(Q, Q)>> {
        let mut out = Vec::new();
        for (b, e) in &self.terms {
            match b {
                Base::Const(c) => out.push((c.clone(), e.clone())),
                Base::Height(h) => {
                    let (p, denom) = h.exact_pow()?;
                    out.push((p.clone(), e / qi(denom as i64)));
                }
            }
        }
        Some(out)
    }
}

/// Largest exact comparison attempted, in bits of the raised products.
const EXACT_BIT_BUDGET: u64 = 1 << 21;

/// Sign of `log ∏ b_i^{e_i}` decided exactly, or `None` if too large.
fn exact_log_sign(terms: &[(Q, Q)]) -> Option<std::cmp::Ordering> {
    let d = terms.iter().fold(BigInt::one(), |acc, (_, e)| acc.lcm(e.denom()));
    let mut num = BigInt::one();
    let mut den = BigInt::one();
    let mut budget: u64 = 0;
    let mut raised = Vec::new();
    for (b, e) in terms {
        let n = (e * Q::from_integer(d.clone())).to_integer();
        let n = n.to_i64()?;
        let bits = b.numer().bits().max(1) + b.denom().bits();
        budget = budget.saturating_add(bits.saturating_mul(n.unsigned_abs()));
        if budget > EXACT_BIT_BUDGET {
            return None;
        }
        raised.push((b, n));
    }
    for (b, n) in raised {
        let e = u32::try_from(n.unsigned_abs()).ok()?;
        if n > 0 {
            num *= b.numer().pow(e);
            den *= b.denom().pow(e);
        } else {
            num *= b.denom().pow(e);
            den *= b.numer().pow(e);
        }
    }
    Some(num.cmp(&den))
}

#[derive(Clone, Debug)]
pub struct CertConfig {
    pub prec_start: u32,
    pub prec_max: u32,
}

impl Default for CertConfig {
    fn default() -> Self {
        CertConfig { prec_start: 128, prec_max: 4096 }
    }
}

/// A log-domain interval in reportable form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogRange {
    pub lo: f64,
    pub hi: f64,
}

impl LogRange {
    fn of(iv: &Interval) -> LogRange {
        let (lo, hi) = iv.to_f64_pair();
        LogRange { lo, hi }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BoundCertificate {
    pub bound_id: String,
    pub params: BTreeMap<String, String>,
    /// `log` of the left-hand side.
    pub lhs_log: LogRange,
    pub rhs_log: LogRange,
    /// Enclosure of `log(rhs / lhs)` after cancellation; `slack.lo ≥ 0` is
    /// what verification means.
    pub slack_log: LogRange,
    pub verdict: Verdict,
    /// Decided by exact rational comparison rather than by intervals.
    pub exact: bool,
    pub bits: u32,
    pub caveats: Vec<String>,
    /// Where in a construction the certificate was produced.
    pub site: String,
}

impl BoundCertificate {
    pub fn with_site(mut self, site: impl Into<String>) -> Self {
        self.site = site.into();
        self
    }

    pub fn with_caveat(mut self, c: impl Into<String>) -> Self {
        self.caveats.push(c.into());
        self
    }
}

/// Parameters a bound formula may consume. Heights are supplied as computed
/// values; `factors` carries the per-vector heights of product bounds.
#[derive(Clone, Default)]
pub struct BoundParams {
    pub n: Option<u64>,
    pub l: Option<u64>,
    pub k: Option<u64>,
    pub r: Option<u64>,
    /// `𝓗(F)`, the height of the Gram matrix.
    pub hf: Option<HeightValue>,
    pub hz: Option<HeightValue>,
    pub hw: Option<HeightValue>,
    pub hu: Option<HeightValue>,
    pub hx: Option<HeightValue>,
    pub hsigma: Option<HeightValue>,
    pub ha: Option<HeightValue>,
    pub hb: Option<HeightValue>,
    pub factors: Vec<HeightValue>,
}

impl BoundParams {
    fn int(&self, v: Option<u64>, name: &str) -> Result<i64> {
        v.map(|x| x as i64).ok_or_else(|| Error::BadParams(format!("missing {name}")))
    }

    fn h<'a>(&self, v: &'a Option<HeightValue>, name: &str) -> Result<&'a HeightValue> {
        v.as_ref().ok_or_else(|| Error::BadParams(format!("missing {name}")))
    }

    fn echo(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        for (name, v) in [("N", self.n), ("L", self.l), ("k", self.k), ("r", self.r)] {
            if let Some(v) = v {
                m.insert(name.to_string(), v.to_string());
            }
        }
        let hs = [
            ("HF", &self.hf),
            ("HZ", &self.hz),
            ("HW", &self.hw),
            ("HU", &self.hu),
            ("Hx", &self.hx),
            ("Hsigma", &self.hsigma),
            ("HA", &self.ha),
            ("HB", &self.hb),
        ];
        for (name, h) in hs {
            if let Some(h) = h {
                m.insert(name.to_string(), format!("{:.9}", h.approx()));
            }
        }
        if !self.factors.is_empty() {
            m.insert("factors".into(), self.factors.len().to_string());
        }
        m
    }
}

/// Bound ids understood by [`bound_rhs`]. The last group are proof-internal
/// inequalities checked only in trace mode.
pub const BOUND_IDS: &[&str] = &[
    "qz:bound",
    "zero_eq",
    "vaaler_even",
    "vaaler_odd",
    "siegel3",
    "regular2",
    "regular3",
    "anis",
    "witt1",
    "witt2",
    "even_dec",
    "hyp1",
    "siegel2",
    "ref_bound",
    "isom_bound",
    "cd_bound",
    "bezout",
    "matrix_pm",
    "matrix_prod",
    "sum_height",
    "hf_vs_curly",
    "prod_1",
    "prod_2",
    "prod_3",
    "intersection",
    "ind_sub",
    "H_W",
    "o1",
    "Z1",
    "W",
    "zz1",
    "zz2",
    "cd6",
    "cd13",
    "cd13.1",
    "cd13.2",
];

fn three_halves_pow(k: i64) -> Q {
    Q::new(BigInt::from(3).pow(k as u32), BigInt::from(2).pow(k as u32))
}

/// The right-hand side of bound `id` as a product of powers.
pub fn bound_rhs(id: &str, p: &BoundParams) -> Result<LogQuantity> {
    let one = LogQuantity::one;
    let two = qi(2);
    let three = qi(3);
    let rhs = match id {
        "qz:bound" => one().cpow(two, qi(1)).hpow(p.h(&p.hf, "HF")?, q(1, 2)),
        "zero_eq" => {
            let l = p.int(p.l, "L")?;
            if l < 2 {
                return Err(Error::BadParams("zero_eq needs L >= 2".into()));
            }
            one()
                .cpow(qi(8), qi(1))
                .cpow(three, qi(2 * (l - 1)))
                .hpow(p.h(&p.hf, "HF")?, q(1, 2))
                .hpow(p.h(&p.hz, "HZ")?, q(4, l))
        }
        "vaaler_even" => {
            let k = p.int(p.k, "k")?;
            if k < 1 {
                return Err(Error::BadParams("vaaler_even needs k >= 1".into()));
            }
            one()
                .cpow(qi(24), qi(1))
                .cpow(two, q(k - 1, 4))
                .cpow(three, q(k * k * (k + 1) * (k + 1), 4))
                .hpow(p.h(&p.hf, "HF")?, q(k * k, 2))
                .hpow(p.h(&p.hz, "HZ")?, q(k * k + k + 2, 2 * k))
        }
        "vaaler_odd" => {
            let k = p.int(p.k, "k")?;
            one()
                .cpow(three, qi(2 * k * (k + 1).pow(3)))
                .hpow(p.h(&p.hf, "HF")?, qi(k * k))
                .hpow(p.h(&p.hz, "HZ")?, q(4 * k, 3))
        }
        "siegel3" | "regular3" => {
            let l = p.int(p.l, "L")?;
            one().cpow(three, q(l * (l - 1), 2)).hpow(p.h(&p.hz, "HZ")?, qi(1))
        }
        "regular2" => {
            let l = p.int(p.l, "L")?;
            let r = p.int(p.r, "r")?;
            one()
                .cpow(three, q(l * (l - 1), 2))
                .hpow(p.h(&p.hf, "HF")?, qi(r))
                .hpow(p.h(&p.hz, "HZ")?, qi(2))
        }
        "anis" => {
            let l = p.int(p.l, "L")?;
            one()
                .cpow(two, qi(1))
                .cpow(qi(l), q(1, 2))
                .cpow(three, q((l + 2) * (l - 1), 4))
                .hpow(p.h(&p.hz, "HZ")?, q(l + 2, 2 * l))
        }
        "witt1" => {
            let k = p.int(p.k, "k")?;
            let e = q((k + 1) * (k + 2), 2) * three_halves_pow(k);
            one()
                .cpow(three.clone(), qi(12 * k.pow(4) * (k + 1)) * three_halves_pow(k))
                .cpow(qi(k), &e / qi(2))
                .hpow(p.h(&p.hf, "HF")?, qi(k * k + 1) * &e)
                .hpow(p.h(&p.hz, "HZ")?, q(6 * k + 5, 4 * k + 2) * &e)
        }
        "witt2" => {
            let k = p.int(p.k, "k")?;
            one()
                .cpow(two, qi(1))
                .cpow(qi(2 * k + 1), q(1, 2))
                .cpow(three, q((2 * k + 3) * k, 2))
                .hpow(p.h(&p.hz, "HZ")?, q(2 * k + 3, 4 * k + 2))
        }
        "even_dec" => {
            let k = p.int(p.k, "k")?;
            let e = q((k + 1) * (k + 2), 2) * three_halves_pow(k);
            one()
                .cpow(three, qi(12 * k.pow(5)) * three_halves_pow(k))
                .hpow(p.h(&p.hf, "HF")?, qi(k * k) * &e)
                .hpow(p.h(&p.hz, "HZ")?, e)
        }
        "hyp1" => {
            let k = p.int(p.k, "k")?;
            if k < 1 {
                return Err(Error::BadParams("hyp1 needs k >= 1".into()));
            }
            one()
                .cpow(three, qi((k + 1).pow(3)))
                .hpow(p.h(&p.hf, "HF")?, q(k, 2))
                .hpow(p.h(&p.hz, "HZ")?, q((k + 1) * (k + 2), 2 * k * k))
        }
        "siegel2" => {
            let l = p.int(p.l, "L")?;
            one()
                .cpow(three, q((l - 1) * (l - 1) * (l + 2), 4))
                .hpow(p.h(&p.hf, "HF")?, q(l * (l + 1), 2))
                .hpow(p.h(&p.hz, "HZ")?, qi(l))
        }
        "ref_bound" => {
            let n = p.int(p.n, "N")?;
            one()
                .cpow(qi(n.pow(3) * (n + 2)), qi(1))
                .hpow(p.h(&p.hf, "HF")?, qi(1))
                .hpow(p.h(&p.hx, "Hx")?, qi(2))
        }
        "isom_bound" => {
            let n = p.int(p.n, "N")?;
            let l = p.int(p.l, "L")?;
            one()
                .cpow(three, q((l + 2) * (l - 1), 2))
                .cpow(qi(4 * l * n.pow(3) * (n + 2)), qi(1))
                .hpow(p.h(&p.hf, "HF")?, qi(1))
                .hpow(p.h(&p.hz, "HZ")?, q(l + 2, l))
        }
        "cd_bound" => {
            let n = p.int(p.n, "N")?;
            let l = p.int(p.l, "L")?;
            let outer = Q::from_integer(BigInt::from(5).pow((l - 1) as u32));
            one()
                .cpow(qi(2 * n * n), q(l * l, 2))
                .cpow(three, q((l - 1) * l * l, 4))
                .hpow(p.h(&p.hf, "HF")?, q(l, 3))
                .hpow(p.h(&p.hz, "HZ")?, q(l, 2))
                .hpow(p.h(&p.hsigma, "Hsigma")?, qi(1))
                .pow(&outer)
        }
        "bezout" => one()
            .cpow(two, q(1, 2))
            .hpow(p.h(&p.hw, "HW")?, qi(2))
            .hpow(p.h(&p.hf, "HF")?, qi(1)),
        "matrix_pm" => one().cpow(two, qi(1)).hpow(p.h(&p.ha, "HA")?, qi(1)),
        "matrix_prod" => one().hpow(p.h(&p.ha, "HA")?, qi(1)).hpow(p.h(&p.hb, "HB")?, qi(1)),
        "hf_vs_curly" => one().cpow(two, q(1, 2)).hpow(p.h(&p.hf, "HF")?, qi(1)),
        "sum_height" | "prod_1" | "prod_2" | "intersection" => {
            if p.factors.is_empty() {
                return Err(Error::BadParams(format!("{id} needs factors")));
            }
            LogQuantity::product(&p.factors)
        }
        "prod_3" => {
            let j = p.factors.len() as i64;
            LogQuantity::product(&p.factors).hpow(p.h(&p.hf, "HF")?, qi(j))
        }
        "ind_sub" => {
            let k = p.int(p.k, "k")?;
            one().cpow(three, qi((2 * k - 1) * (k - 1))).hpow(p.h(&p.hz, "HZ")?, q(k - 1, k))
        }
        "H_W" => {
            let k = p.int(p.k, "k")?;
            one()
                .cpow(three, q(k * (k - 1), 2))
                .hpow(p.h(&p.hf, "HF")?, qi(k - 1))
                .hpow(p.h(&p.hu, "HU")?, qi(1))
                .hpow(p.h(&p.hz, "HZ")?, qi(1))
        }
        "o1" => {
            let k = p.int(p.k, "k")?;
            one()
                .cpow(qi(24), qi(1))
                .cpow(two, q(k - 1, 4))
                .cpow(three, q(k * (k + 1) * (k + 1) * (k + 4), 4))
                .hpow(p.h(&p.hf, "HF")?, q(k * k, 2))
                .hpow(p.h(&p.hz, "HZ")?, q(k * k + k + 2, 2 * k + 1))
        }
        "Z1" => {
            let k = p.int(p.k, "k")?;
            one().cpow(three, qi(2 * k * k)).hpow(p.h(&p.hz, "HZ")?, q(2 * k, 2 * k + 1))
        }
        "W" => {
            let k = p.int(p.k, "k")?;
            one().cpow(three, qi(k * (4 * k - 1))).hpow(p.h(&p.hz, "HZ")?, q(2 * k, 2 * k + 1))
        }
        "zz1" => {
            let k = p.int(p.k, "k")?;
            one()
                .cpow(three, qi((k + 1).pow(3)))
                .hpow(p.h(&p.hf, "HF")?, q(k + 4, 2))
                .hpow(p.h(&p.hz, "HZ")?, q(3 * k * k + 3 * k + 2, 2 * k * k))
        }
        "zz2" => {
            let k = p.int(p.k, "k")?;
            one()
                .cpow(two, qi(1))
                .cpow(qi(2 * k + 1), q(1, 2))
                .cpow(three, q((2 * k + 3) * k, 2))
                .hpow(p.h(&p.hf, "HF")?, qi(1))
                .hpow(p.h(&p.hz, "HZ")?, q(6 * k + 5, 4 * k + 2))
        }
        "cd6" | "cd13" => {
            let n = p.int(p.n, "N")?;
            let l = p.int(p.l, "L")?;
            let c = if id == "cd6" { 4 } else { 16 };
            one()
                .cpow(qi(c * l * n.pow(3) * (n + 2)), qi(1))
                .cpow(three, q((l + 2) * (l - 1), 2))
                .hpow(p.h(&p.hf, "HF")?, qi(1))
                .hpow(p.h(&p.hz, "HZ")?, q(l + 2, l))
                .hpow(p.h(&p.hsigma, "Hsigma")?, qi(2))
        }
        "cd13.1" => {
            let n = p.int(p.n, "N")?;
            let l = p.int(p.l, "L")?;
            one()
                .cpow(qi(64 * l * l * n.pow(6) * (n + 2) * (n + 2)), qi(1))
                .cpow(three, qi((l + 2) * (l - 1)))
                .hpow(p.h(&p.hf, "HF")?, qi(2))
                .hpow(p.h(&p.hz, "HZ")?, q(2 * l + 4, l))
                .hpow(p.h(&p.hsigma, "Hsigma")?, qi(5))
        }
        "cd13.2" => {
            let l = p.int(p.l, "L")?;
            one()
                .cpow(two, qi(1))
                .cpow(qi(l), q(1, 2))
                .cpow(three, q((l + 2) * (l - 1), 4))
                .hpow(p.h(&p.hf, "HF")?, qi(1))
                .hpow(p.h(&p.hz, "HZ")?, q(3 * l + 2, 2 * l))
        }
        _ => return Err(Error::UnknownBoundId(id.to_string())),
    };
    Ok(rhs)
}

/// Enclosure of `log` of the right-hand side of bound `id`.
pub fn bound_rhs_log(id: &str, p: &BoundParams, prec: u32) -> Result<Interval> {
    bound_rhs(id, p)?.log(prec)
}

/// Checks `lhs ≤ rhs(id, params)`.
pub fn check(id: &str, lhs: &LogQuantity, p: &BoundParams, cfg: &CertConfig) -> Result<BoundCertificate> {
    let rhs = bound_rhs(id, p)?;
    Ok(compare(id, lhs, &rhs, p.echo(), cfg))
}

/// Three-valued comparison `lhs ≤ rhs` with precision escalation.
pub fn compare(
    id: &str,
    lhs: &LogQuantity,
    rhs: &LogQuantity,
    params: BTreeMap<String, String>,
    cfg: &CertConfig,
) -> BoundCertificate {
    let quotient = rhs.clone().times(&lhs.clone().recip()).simplified();
    let exact_terms = quotient.exact_terms();
    let mut prec = cfg.prec_start.max(32);
    let mut last: Option<(Interval, Interval, Interval)> = None;
    let mut verdict = Verdict::Inconclusive;
    let mut exact = false;
    loop {
        if let (Ok(l), Ok(r), Ok(s)) = (lhs.log(prec), rhs.log(prec), quotient.log(prec)) {
            let decided = if !s.lo.is_negative() {
                Some(Verdict::Verified)
            } else if s.hi.is_negative() {
                Some(Verdict::Violated)
            } else {
                None
            };
            last = Some((l, r, s));
            if let Some(v) = decided {
                verdict = v;
                break;
            }
            if let Some(t) = &exact_terms {
                if let Some(ord) = exact_log_sign(t) {
                    verdict = if ord == std::cmp::Ordering::Less { Verdict::Violated } else { Verdict::Verified };
                    exact = true;
                    break;
                }
            }
        }
        if prec >= cfg.prec_max {
            break;
        }
        prec = (prec * 2).min(cfg.prec_max);
    }
    let (l, r, s) = last.unwrap_or_else(|| {
        let nan = Interval::zero();
        (nan.clone(), nan.clone(), nan)
    });
    BoundCertificate {
        bound_id: id.to_string(),
        params,
        lhs_log: LogRange::of(&l),
        rhs_log: LogRange::of(&r),
        slack_log: LogRange::of(&s),
        verdict,
        exact,
        bits: prec,
        caveats: Vec::new(),
        site: String::new(),
    }
}

/// Random material for the stand-alone inequality families.
#[derive(Clone, Debug)]
pub struct SuiteInstance {
    pub tower: std::sync::Arc<Tower>,
    pub n: usize,
    /// Columns `x_1..x_J` of `X`, split into blocks at `split`.
    pub columns: Vec<Vector>,
    pub split: usize,
    pub form: Matrix,
    /// `det = ±1`.
    pub unimodular: Matrix,
    pub other: Matrix,
    pub u1: Subspace,
    pub u2: Subspace,
    pub coeffs: Vector,
}

fn rand_q(rng: &mut ChaCha8Rng, bound: i64) -> Q {
    let n = rng.gen_range(-bound..=bound);
    let d = rng.gen_range(1..=bound);
    q(n, d)
}

fn rand_elem(rng: &mut ChaCha8Rng, t: &std::sync::Arc<Tower>, bound: i64) -> Elem {
    let coeffs: Vec<Q> = (0..t.degree()).map(|_| rand_q(rng, bound)).collect();
    Elem::from_coeffs(t, &coeffs)
}

fn rand_nonzero_vec(rng: &mut ChaCha8Rng, t: &std::sync::Arc<Tower>, n: usize, bound: i64) -> Vector {
    loop {
        let v: Vector = (0..n).map(|_| rand_elem(rng, t, bound)).collect();
        if !is_zero_vec(&v) {
            return v;
        }
    }
}

impl SuiteInstance {
    /// Draws an instance over `tower` in dimension `n ≥ 2`.
    pub fn random(tower: &std::sync::Arc<Tower>, n: usize, seed: u64) -> SuiteInstance {
        assert!(n >= 2);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = 6;
        let j = rng.gen_range(2..=n);
        let columns = loop {
            let cols: Vec<Vector> = (0..j).map(|_| rand_nonzero_vec(&mut rng, tower, n, b)).collect();
            if crate::linalg::grassmann(&cols).is_ok() {
                break cols;
            }
        };
        let split = rng.gen_range(1..j);
        // F with F·X of full rank, so the multiplication bound applies
        let mut form = Matrix::zeros(tower, n, n);
        loop {
            for r in 0..n {
                for c in r..n {
                    let e = rand_elem(&mut rng, tower, b);
                    form.set(r, c, e.clone());
                    form.set(c, r, e);
                }
            }
            let fx: Vec<Vector> = columns.iter().map(|x| form.mul_vec(x)).collect();
            if crate::linalg::grassmann(&fx).is_ok() {
                break;
            }
        }
        // Unimodular: random elementary operations, optionally a sign flip.
        let mut a = Matrix::identity(tower, n);
        for _ in 0..(2 * n) {
            let r = rng.gen_range(0..n);
            let mut c = rng.gen_range(0..n);
            if c == r {
                c = (c + 1) % n;
            }
            let m = rand_elem(&mut rng, tower, 3);
            let row: Vector = vadd(&a.row(r), &vscale(&a.row(c), &m));
            for (k, e) in row.into_iter().enumerate() {
                a.set(r, k, e);
            }
        }
        if rng.gen_bool(0.5) {
            let row: Vector = a.row(0).iter().map(|e| -e).collect();
            for (k, e) in row.into_iter().enumerate() {
                a.set(0, k, e);
            }
        }
        let mut other = Matrix::zeros(tower, n, n);
        loop {
            for r in 0..n {
                for c in 0..n {
                    other.set(r, c, rand_elem(&mut rng, tower, b));
                }
            }
            if !other.is_zero() {
                break;
            }
        }
        // dimensions summing past n, so that U1 ∩ U2 ≠ 0
        let rand_sub = |rng: &mut ChaCha8Rng, lo: usize, hi: usize| -> Subspace {
            loop {
                let dim = rng.gen_range(lo..=hi);
                let vs: Vec<Vector> = (0..dim).map(|_| rand_nonzero_vec(rng, tower, n, b)).collect();
                let z = Subspace::span(tower, n, &vs).expect("ambient dimensions agree");
                if z.dim() == dim {
                    return z;
                }
            }
        };
        let (u1, u2) = loop {
            let u1 = rand_sub(&mut rng, 1, n - 1);
            let u2 = rand_sub(&mut rng, n + 1 - u1.dim(), n);
            if intersect(&u1, &u2).is_ok_and(|c| !c.is_zero()) {
                break (u1, u2);
            }
        };
        // primitive integer coefficients: the sum bound with the projective
        // H(a) fails for general a (a = (2), x = (1) gives h(2) = √5 > √2)
        let coeffs = loop {
            let ints: Vec<i64> = (0..j).map(|_| rng.gen_range(-b..=b)).collect();
            let g = ints.iter().fold(0i64, |g, &x| num_integer::gcd(g, x));
            if g != 0 {
                break ints.iter().map(|&x| Elem::from_int(tower, x / g)).collect::<Vector>();
            }
        };
        SuiteInstance { tower: tower.clone(), n, columns, split, form, unimodular: a, other, u1, u2, coeffs }
    }
}

/// Runs the stand-alone inequality families on one instance: wedge products
/// (`prod_1`, `prod_2`), multiplication by `F` (`prod_3`), intersections,
/// `𝓗(A ± I) ≤ 2𝓗(A)` for `det A = ±1`, submultiplicativity, the sum bound
/// and `H(F) ≤ √2 𝓗(F)`.
pub fn inequality_suite(inst: &SuiteInstance, hc: &HeightConfig, cc: &CertConfig) -> Result<Vec<BoundCertificate>> {
    let mut out = Vec::new();
    let t = &inst.tower;
    let n = inst.n;
    let col_heights: Vec<HeightValue> =
        inst.columns.iter().map(|x| height_vector(x, hc)).collect::<Result<_>>()?;
    let hx_all = height_vector(&crate::linalg::grassmann(&inst.columns)?, hc)?;
    let params = |factors: Vec<HeightValue>| BoundParams { factors, ..Default::default() };

    out.push(check("prod_1", &LogQuantity::height(&hx_all), &params(col_heights.clone()), cc)?);

    let (x1, x2) = inst.columns.split_at(inst.split);
    let h1 = height_vector(&crate::linalg::grassmann(x1)?, hc)?;
    let h2 = height_vector(&crate::linalg::grassmann(x2)?, hc)?;
    out.push(check("prod_2", &LogQuantity::height(&hx_all), &params(vec![h1, h2]), cc)?);

    let hf = height_gram(&inst.form, hc)?;
    let fx: Vec<Vector> = inst.columns.iter().map(|x| inst.form.mul_vec(x)).collect();
    if let Ok(g) = crate::linalg::grassmann(&fx) {
        let p = BoundParams { hf: Some(hf.clone()), factors: col_heights.clone(), ..Default::default() };
        out.push(check("prod_3", &LogQuantity::height(&height_vector(&g, hc)?), &p, cc)?);
    }

    let cap = intersect(&inst.u1, &inst.u2)?;
    if !cap.is_zero() {
        let lhs = height_subspace(&cap, hc)?;
        let p = params(vec![height_subspace(&inst.u1, hc)?, height_subspace(&inst.u2, hc)?]);
        out.push(check("intersection", &LogQuantity::height(&lhs), &p, cc)?);
    }

    let a = &inst.unimodular;
    let ha = height_gram(a, hc)?;
    let id = Matrix::identity(t, n);
    for (tag, m) in [("+", a.add(&id)), ("-", a.sub(&id))] {
        if m.is_zero() {
            continue;
        }
        let p = BoundParams { ha: Some(ha.clone()), ..Default::default() };
        let c = check("matrix_pm", &LogQuantity::height(&height_gram(&m, hc)?), &p, cc)?;
        out.push(c.with_site(format!("A{tag}I")));
    }

    let hb = height_gram(&inst.other, hc)?;
    let ab = a.mul(&inst.other);
    if !ab.is_zero() {
        let p = BoundParams { ha: Some(ha.clone()), hb: Some(hb), ..Default::default() };
        out.push(check("matrix_prod", &LogQuantity::height(&height_gram(&ab, hc)?), &p, cc)?);
    }

    let mut sum = vec![Elem::zero(t); n];
    for (c, x) in inst.coeffs.iter().zip(&inst.columns) {
        sum = vadd(&sum, &vscale(x, c));
    }
    let mut factors = vec![height_vector(&inst.coeffs, hc)?];
    for x in &inst.columns {
        factors.push(height_inhom(x, hc)?);
    }
    out.push(check("sum_height", &LogQuantity::height(&height_inhom(&sum, hc)?), &params(factors), cc)?);

    let p = BoundParams { hf: Some(hf), ..Default::default() };
    out.push(check("hf_vs_curly", &LogQuantity::height(&height_form_poly(&inst.form, hc)?), &p, cc)?);
    Ok(out)
}
