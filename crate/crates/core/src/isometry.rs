//! Isometries of `(Z, F)`: reflections, exact verification, small
//! anisotropic vectors and the Cartan–Dieudonné factorization.
//!
//! An isometry is stored as a concrete `N x N` matrix preserving `F` on all
//! of `K^N` (constructions extend by the identity off `Z`). Its height is the
//! height of that matrix, an upper bound for the minimum over extensions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::arith::Q;
use crate::certify::{BoundParams, LogQuantity};
use crate::error::{Error, Result};
use crate::heights::{height_gram, height_inhom, HeightConfig, HeightValue};
use crate::linalg::{vadd, vscale, vsub, Matrix, Subspace, Vector};
use crate::quadspace::{Ctx, QuadraticSpace};
use crate::reduction::{primitive_integer, sign_normalize};
use crate::tower::Elem;

pub const SURROGATE: &str = "surrogate: height of the stored matrix stands in for the minimal extension";

#[derive(Clone, Debug)]
pub struct Isometry {
    a: Matrix,
    domain: QuadraticSpace,
    det: Elem,
}

impl Isometry {
    pub fn new(q: &QuadraticSpace, a: Matrix) -> Result<Isometry> {
        if a.rows() != q.n() || a.cols() != q.n() {
            return Err(Error::AmbientMismatch(q.n(), a.rows()));
        }
        if !is_isometry(q, &a) {
            return Err(Error::NotAnIsometry);
        }
        let det = a.det()?;
        Ok(Isometry { a, domain: q.clone(), det })
    }

    pub fn identity(q: &QuadraticSpace) -> Isometry {
        let t = q.tower();
        Isometry { a: Matrix::identity(&t, q.n()), domain: q.clone(), det: Elem::one(&t) }
    }

    pub fn matrix(&self) -> &Matrix {
        &self.a
    }

    pub fn domain(&self) -> &QuadraticSpace {
        &self.domain
    }

    pub fn det(&self) -> &Elem {
        &self.det
    }

    pub fn is_rotation(&self) -> bool {
        self.det.is_one()
    }

    pub fn apply(&self, x: &[Elem]) -> Vector {
        self.a.mul_vec(x)
    }

    /// Agreement with `o` on `Z`.
    pub fn agrees_on(&self, o: &Isometry, z: &Subspace) -> bool {
        z.basis().iter().all(|v| self.apply(v) == o.apply(v))
    }

    pub fn is_identity_on(&self, z: &Subspace) -> bool {
        z.basis().iter().all(|v| &self.apply(v) == v)
    }
}

#[derive(Clone, Debug)]
pub struct Reflection {
    pub x: Vector,
    pub iso: Isometry,
}

fn tidy(x: Vector) -> Vector {
    match primitive_integer(&x) {
        Some(ints) => {
            let t = x[0].tower().clone();
            sign_normalize(ints.iter().map(|c| Elem::from_q(&t, &Q::from_integer(c.clone()))).collect())
        }
        None => sign_normalize(x),
    }
}

/// `τ_x(y) = y − 2F(x,y)/F(x)·x`.
pub fn reflection(q: &QuadraticSpace, x: &[Elem]) -> Result<Reflection> {
    let n = q.n();
    if x.len() != n {
        return Err(Error::AmbientMismatch(n, x.len()));
    }
    let fx = q.quad(x);
    if fx.is_zero() {
        return Err(Error::AnisotropicRequired);
    }
    let x = tidy(x.to_vec());
    let fx = q.quad(&x);
    let c = &fx.invert()? * &Elem::from_int(fx.tower(), 2);
    let img = q.image(&x);
    let t = crate::linalg::common_tower(&q.tower(), x.iter().chain(&img));
    let mut data = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let mut e = -&(&c * &(&x[i] * &img[j]));
            if i == j {
                e = &e + &Elem::one(&t);
            }
            data.push(e);
        }
    }
    let a = Matrix::new(n, n, data);
    let det = Elem::from_int(&t, -1);
    Ok(Reflection { x, iso: Isometry { a, domain: q.clone(), det } })
}

/// `AᵗFA = F`, `AZ = Z` and `det A = ±1`, all exact.
pub fn is_isometry(q: &QuadraticSpace, a: &Matrix) -> bool {
    if a.rows() != q.n() || a.cols() != q.n() {
        return false;
    }
    if !a.transpose().mul(q.gram()).mul(a).sub(q.gram()).is_zero() {
        return false;
    }
    let Ok(det) = a.det() else { return false };
    let sq = det.square();
    if !sq.is_one() {
        return false;
    }
    q.subspace().basis().iter().all(|v| q.subspace().contains(&a.mul_vec(v)))
}

fn same_domain(a: &QuadraticSpace, b: &QuadraticSpace) -> bool {
    a.n() == b.n()
        && a.gram().sub(b.gram()).is_zero()
        && a.subspace().contains_subspace(b.subspace())
        && b.subspace().contains_subspace(a.subspace())
}

/// `σ∘τ` (apply `τ` first).
pub fn compose(s: &Isometry, t: &Isometry) -> Result<Isometry> {
    if !same_domain(&s.domain, &t.domain) {
        return Err(Error::DomainMismatch);
    }
    let a = s.a.mul(&t.a);
    let det = &s.det * &t.det;
    debug_assert!(is_isometry(&s.domain, &a));
    Ok(Isometry { a, domain: s.domain.clone(), det })
}

pub fn compose_all(q: &QuadraticSpace, rs: &[Reflection]) -> Result<Isometry> {
    let mut acc = Isometry::identity(q);
    for r in rs {
        acc = compose(&acc, &r.iso)?;
    }
    Ok(acc)
}

/// `𝓗(σ)` of the stored matrix.
pub fn isometry_height(s: &Isometry, hc: &HeightConfig) -> Result<HeightValue> {
    height_gram(&s.a, hc)
}

/// Candidate pool: small-basis vectors, then `x_i ± x_j`.
fn deterministic_pool(q: &QuadraticSpace, ctx: &Ctx) -> Result<Vec<Vector>> {
    let sb = ctx.small_basis(q.subspace())?;
    let v = sb.vectors;
    let mut pool = v.clone();
    for i in 0..v.len() {
        for j in i + 1..v.len() {
            pool.push(vadd(&v[i], &v[j]));
            pool.push(vsub(&v[i], &v[j]));
        }
    }
    Ok(pool)
}

fn random_in(q: &QuadraticSpace, rng: &mut ChaCha8Rng, bound: i64) -> Vector {
    let t = q.tower();
    let basis = q.subspace().basis();
    let mut y: Vector = (0..q.n()).map(|_| Elem::zero(&t)).collect();
    for b in basis {
        let c: i64 = rng.gen_range(-bound..=bound);
        y = vadd(&y, &vscale(b, &Elem::from_int(&t, c)));
    }
    y
}

fn lemma_sign(q: &QuadraticSpace, s: &Isometry, y: &[Elem]) -> Option<i8> {
    if q.quad(y).is_zero() {
        return None;
    }
    let sy = s.apply(y);
    if !q.quad(&vsub(&sy, y)).is_zero() {
        Some(-1)
    } else if !q.quad(&vadd(&sy, y)).is_zero() {
        Some(1)
    } else {
        None
    }
}

fn check_regular(q: &QuadraticSpace) -> Result<()> {
    if q.dim() == 0 || q.is_null() {
        return Err(Error::NoAnisotropicVector);
    }
    if !q.is_regular() {
        return Err(Error::NotRegular);
    }
    Ok(())
}

/// `y ∈ Z` with `F(y) ≠ 0` and `F(σy ∓ y) ≠ 0`; the sign is `-1` when
/// `σy − y` is anisotropic, `+1` when only `σy + y` is.
pub fn small_anisotropic(q: &QuadraticSpace, s: &Isometry, ctx: &mut Ctx) -> Result<(Vector, i8)> {
    check_regular(q)?;
    let (y, sign, pooled) = find_anisotropic(q, |y| lemma_sign(q, s, y), ctx)?;
    let hy = height_inhom(&y, &ctx.cfg.heights)?;
    let p = BoundParams { l: Some(q.dim() as u64), hz: Some(ctx.hs(q.subspace())?), ..Default::default() };
    let caveats = if pooled { vec![] } else { vec!["witness from the randomized pool".to_string()] };
    ctx.certify_with("anis", &LogQuantity::height(&hy), &p, "small_anisotropic", &caveats)?;
    Ok((y, sign))
}

fn find_anisotropic<T>(
    q: &QuadraticSpace,
    mut accept: impl FnMut(&[Elem]) -> Option<T>,
    ctx: &Ctx,
) -> Result<(Vector, T, bool)> {
    for y in deterministic_pool(q, ctx)? {
        if let Some(v) = accept(&y) {
            return Ok((y, v, true));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.cfg.heights.seed ^ 0xa1150);
    for round in 0..4096u32 {
        let bound = 1i64 << (round / 64).min(40);
        let y = random_in(q, &mut rng, bound.max(1));
        if let Some(v) = accept(&y) {
            return Ok((y, v, false));
        }
    }
    Err(Error::NoAnisotropicVector)
}

pub fn small_reflection(q: &QuadraticSpace, ctx: &mut Ctx) -> Result<Reflection> {
    let id = Isometry::identity(q);
    let (y, _) = small_anisotropic(q, &id, ctx)?;
    let r = reflection(q, &y)?;
    let h = isometry_height(&r.iso, &ctx.cfg.heights)?;
    let hf = q.gram_height(&ctx.cfg.heights)?;
    let p = BoundParams {
        n: Some(q.n() as u64),
        l: Some(q.dim() as u64),
        hf: Some(hf.clone()),
        hz: Some(ctx.hs(q.subspace())?),
        hx: Some(ctx.hv(&r.x)?),
        ..Default::default()
    };
    ctx.certify("isom_bound", &LogQuantity::height(&h), &p, "small_reflection")?;
    ctx.certify("ref_bound", &LogQuantity::height(&h), &p, "small_reflection")?;
    Ok(r)
}

enum Pick {
    Fixed,
    Minus,
    Plus,
}

/// Reflections `τ₁,…,τ_l` with `σ = τ₁∘…∘τ_l` on `Z` and `l ≤ 2L−1`.
pub fn cartan_dieudonne(q: &QuadraticSpace, s: &Isometry, ctx: &mut Ctx) -> Result<Vec<Reflection>> {
    if !q.is_regular() {
        return Err(Error::NotRegular);
    }
    if !is_isometry(q, &s.a) {
        return Err(Error::NotAnIsometry);
    }
    let hc = ctx.cfg.heights.clone();
    let hf = q.gram_height(&hc)?;
    let top = BoundParams {
        n: Some(q.n() as u64),
        l: Some(q.dim() as u64),
        hf: Some(hf.clone()),
        hz: Some(ctx.hs(q.subspace())?),
        hsigma: Some(isometry_height(s, &hc)?),
        ..Default::default()
    };
    let mut out: Vec<Reflection> = Vec::new();
    let mut cur = q.clone();
    let mut sig = Isometry { a: s.a.clone(), domain: q.clone(), det: s.det.clone() };
    while cur.dim() > 0 && !sig.is_identity_on(cur.subspace()) {
        if cur.dim() == 1 {
            let x = cur.subspace().basis()[0].clone();
            if sig.apply(&x) != crate::linalg::vneg(&x) {
                return Err(Error::NotAnIsometry);
            }
            out.push(reflection(q, &x)?);
            break;
        }
        let level = BoundParams {
            n: Some(q.n() as u64),
            l: Some(cur.dim() as u64),
            hf: Some(hf.clone()),
            hz: Some(ctx.hs(cur.subspace())?),
            hsigma: Some(isometry_height(&sig, &hc)?),
            ha: Some(isometry_height(&sig, &hc)?),
            ..Default::default()
        };
        let (y, pick) = cd_pick(&cur, &sig, ctx)?;
        let sy = sig.apply(&y);
        match pick {
            Pick::Fixed => {}
            Pick::Minus => {
                let r = reflection(q, &vsub(&sy, &y))?;
                sig = compose(&r.iso, &sig)?;
                let h = isometry_height(&r.iso, &hc)?;
                ctx.trace("cd13", &LogQuantity::height(&h), &level, "cartan_dieudonne")?;
                out.push(r);
            }
            Pick::Plus => {
                let ra = reflection(q, &sy)?;
                let rb = reflection(q, &vadd(&sy, &y))?;
                sig = compose(&rb.iso, &compose(&ra.iso, &sig)?)?;
                let ha = isometry_height(&ra.iso, &hc)?;
                let hb = isometry_height(&rb.iso, &hc)?;
                ctx.trace("cd6", &LogQuantity::height(&ha), &level, "cartan_dieudonne")?;
                ctx.trace("cd13", &LogQuantity::height(&hb), &level, "cartan_dieudonne")?;
                out.push(ra);
                out.push(rb);
            }
        }
        debug_assert!(sig.apply(&y) == y);
        if ctx.cfg.trace {
            let t = cur.tower();
            let id = Matrix::identity(&t, q.n());
            for (sgn, m) in [("+", sig.a.add(&id)), ("-", sig.a.sub(&id))] {
                if !m.is_zero() {
                    let h = height_gram(&m, &hc)?;
                    ctx.trace("matrix_pm", &LogQuantity::height(&h), &level, &format!("cartan_dieudonne A{sgn}I"))?;
                }
            }
            let hs2 = isometry_height(&sig, &hc)?;
            ctx.trace("cd13.1", &LogQuantity::height(&hs2), &level, "cartan_dieudonne")?;
        }
        let rest = q.orthogonal_in(cur.subspace(), &[y])?;
        if ctx.cfg.trace {
            let hr = ctx.hs(&rest)?;
            ctx.trace("cd13.2", &LogQuantity::height(&hr), &level, "cartan_dieudonne")?;
        }
        cur = q.with_subspace(rest)?;
    }
    let back = compose_all(q, &out)?;
    if !back.agrees_on(s, q.subspace()) || out.len() + 1 > 2 * q.dim() {
        return Err(Error::NotAnIsometry);
    }
    for (i, r) in out.iter().enumerate() {
        let h = isometry_height(&r.iso, &hc)?;
        ctx.certify_with(
            "cd_bound",
            &LogQuantity::height(&h),
            &top,
            &format!("cartan_dieudonne reflection {i}"),
            &[SURROGATE.to_string()],
        )?;
    }
    Ok(out)
}

/// Prefers vectors fixed by `σ` (no reflection needed), then the one-reflection
/// branch, then the two-reflection branch.
fn cd_pick(q: &QuadraticSpace, s: &Isometry, ctx: &mut Ctx) -> Result<(Vector, Pick)> {
    let pool = deterministic_pool(q, ctx)?;
    let aniso: Vec<&Vector> = pool.iter().filter(|y| !q.quad(y).is_zero()).collect();
    if let Some(y) = aniso.iter().find(|y| &&s.apply(y) == *y) {
        return Ok(((*y).clone(), Pick::Fixed));
    }
    for y in &aniso {
        if lemma_sign(q, s, y) == Some(-1) {
            return Ok(((*y).clone(), Pick::Minus));
        }
    }
    let (y, sign) = small_anisotropic(q, s, ctx)?;
    Ok((y, if sign < 0 { Pick::Minus } else { Pick::Plus }))
}

/// Product of `len` reflections at random anisotropic vectors of `Z` with
/// small integer coordinates in the basis of `Z`.
pub fn random_isometry(q: &QuadraticSpace, len: usize, seed: u64) -> Result<(Isometry, Vec<Reflection>)> {
    if !q.is_regular() || q.dim() == 0 {
        return Err(Error::NotRegular);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut acc = Isometry::identity(q);
    let mut used = Vec::new();
    while used.len() < len {
        let y = random_in(q, &mut rng, 3);
        if q.quad(&y).is_zero() {
            continue;
        }
        let r = reflection(q, &y)?;
        acc = compose(&acc, &r.iso)?;
        used.push(r);
    }
    Ok((acc, used))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::q;
    use crate::certify::Verdict;
    use crate::linalg::vec_from_ints;
    use crate::quadspace::ConstructionConfig;
    use crate::tower::Tower;
    use std::sync::Arc;

    fn diag(t: &Arc<Tower>, d: &[i64]) -> QuadraticSpace {
        let n = d.len();
        let rows: Vec<Vec<Q>> =
            (0..n).map(|i| (0..n).map(|j| if i == j { Q::from_integer(d[i].into()) } else { q(0, 1) }).collect()).collect();
        QuadraticSpace::full(Matrix::from_q(t, &rows)).unwrap()
    }

    fn hyp(t: &Arc<Tower>) -> QuadraticSpace {
        QuadraticSpace::full(Matrix::from_q(t, &[vec![q(0, 1), q(1, 2)], vec![q(1, 2), q(0, 1)]])).unwrap()
    }

    fn mq(t: &Arc<Tower>, rows: &[&[(i64, i64)]]) -> Matrix {
        Matrix::from_q(t, &rows.iter().map(|r| r.iter().map(|&(a, b)| q(a, b)).collect()).collect::<Vec<_>>())
    }

    fn verified(ctx: &Ctx) {
        for c in &ctx.certificates {
            assert_eq!(c.verdict, Verdict::Verified, "{} at {}", c.bound_id, c.site);
        }
    }

    #[test]
    fn reflection_examples() {
        let t = Tower::rational();
        let d = diag(&t, &[1, 1]);
        let r = reflection(&d, &vec_from_ints(&t, &[1, 0])).unwrap();
        assert_eq!(r.iso.matrix(), &mq(&t, &[&[(-1, 1), (0, 1)], &[(0, 1), (1, 1)]]));
        let h = hyp(&t);
        let r = reflection(&h, &vec_from_ints(&t, &[1, 1])).unwrap();
        assert_eq!(r.iso.matrix(), &mq(&t, &[&[(0, 1), (-1, 1)], &[(-1, 1), (0, 1)]]));
        assert!(matches!(reflection(&h, &vec_from_ints(&t, &[1, 0])), Err(Error::AnisotropicRequired)));
        let rr = compose(&r.iso, &r.iso).unwrap();
        assert!(rr.is_identity_on(&Subspace::full(&t, 2)));
        assert_eq!(r.iso.matrix().det().unwrap(), Elem::from_int(&t, -1));
    }

    #[test]
    fn isometry_checks() {
        let t = Tower::rational();
        let d = diag(&t, &[1, 1]);
        assert!(is_isometry(&d, &mq(&t, &[&[(-1, 1), (0, 1)], &[(0, 1), (1, 1)]])));
        assert!(!is_isometry(&d, &mq(&t, &[&[(2, 1), (0, 1)], &[(0, 1), (2, 1)]])));
        assert!(is_isometry(&d, &mq(&t, &[&[(3, 5), (-4, 5)], &[(4, 5), (3, 5)]])));
        let a = reflection(&d, &vec_from_ints(&t, &[1, 0])).unwrap();
        let b = reflection(&d, &vec_from_ints(&t, &[1, 1])).unwrap();
        assert!(compose(&a.iso, &b.iso).unwrap().is_rotation());
        let other = diag(&t, &[1, 2]);
        let c = reflection(&other, &vec_from_ints(&t, &[1, 0])).unwrap();
        assert!(matches!(compose(&a.iso, &c.iso), Err(Error::DomainMismatch)));
    }

    #[test]
    fn heights_of_isometries() {
        let t = Tower::rational();
        let hc = HeightConfig::default();
        let d = diag(&t, &[1, 1, 1]);
        let h = isometry_height(&Isometry::identity(&d), &hc).unwrap();
        assert_eq!(h.exact_pow(), Some((&q(3, 1), 2)));
        let d2 = diag(&t, &[1, 1]);
        let r = reflection(&d2, &vec_from_ints(&t, &[1, 0])).unwrap();
        assert_eq!(isometry_height(&r.iso, &hc).unwrap().exact_pow(), Some((&q(2, 1), 2)));
    }

    #[test]
    fn small_anisotropic_examples() {
        let t = Tower::rational();
        let d = diag(&t, &[1, -1]);
        let mut ctx = Ctx::for_space(ConstructionConfig::default(), &d);
        let (y, s) = small_anisotropic(&d, &Isometry::identity(&d), &mut ctx).unwrap();
        assert_eq!((y, s), (vec_from_ints(&t, &[1, 0]), 1));
        let h = hyp(&t);
        let (y, _) = small_anisotropic(&h, &Isometry::identity(&h), &mut ctx).unwrap();
        assert_eq!(y, vec_from_ints(&t, &[1, 1]));
        let z = diag(&t, &[0, 0]);
        assert!(matches!(small_anisotropic(&z, &Isometry::identity(&z), &mut ctx), Err(Error::NoAnisotropicVector)));
        verified(&ctx);
    }

    #[test]
    fn small_reflection_examples() {
        let t = Tower::rational();
        let d = diag(&t, &[1, 1]);
        let mut ctx = Ctx::for_space(ConstructionConfig::default(), &d);
        let r = small_reflection(&d, &mut ctx).unwrap();
        assert_eq!(r.x, vec_from_ints(&t, &[1, 0]));
        let h = hyp(&t);
        let r = small_reflection(&h, &mut ctx).unwrap();
        assert_eq!(r.x, vec_from_ints(&t, &[1, 1]));
        let s = diag(&t, &[1, 0]);
        assert!(matches!(small_reflection(&s, &mut ctx), Err(Error::NotRegular)));
        verified(&ctx);
    }

    #[test]
    fn cd_examples() {
        let t = Tower::rational();
        let d = diag(&t, &[1, 1]);
        let mut ctx = Ctx::for_space(ConstructionConfig::default(), &d);
        assert!(cartan_dieudonne(&d, &Isometry::identity(&d), &mut ctx).unwrap().is_empty());
        let r = reflection(&d, &vec_from_ints(&t, &[1, 2])).unwrap();
        let f = cartan_dieudonne(&d, &r.iso, &mut ctx).unwrap();
        assert_eq!(f.len(), 1);
        assert_eq!(f[0].x, r.x);
        let minus = Isometry::new(&d, Matrix::identity(&t, 2).neg()).unwrap();
        let f = cartan_dieudonne(&d, &minus, &mut ctx).unwrap();
        assert_eq!(f.len(), 2);
        assert!(compose_all(&d, &f).unwrap().agrees_on(&minus, d.subspace()));
        verified(&ctx);
    }

    #[test]
    fn cd_recomposes_random() {
        let t = Tower::rational();
        for (k, dd) in [&[1, 1, 1][..], &[1, -1, 2], &[2, 3, -5, 7]].iter().enumerate() {
            let d = diag(&t, dd);
            let l = d.dim();
            for seed in 0..6u64 {
                let len = 1 + (seed as usize) % (2 * l - 1);
                let (s, _) = random_isometry(&d, len, seed * 31 + k as u64).unwrap();
                let cfg = ConstructionConfig { trace: true, ..Default::default() };
                let mut ctx = Ctx::for_space(cfg, &d);
                let f = cartan_dieudonne(&d, &s, &mut ctx).unwrap();
                assert!(f.len() < 2 * l);
                assert!(compose_all(&d, &f).unwrap().agrees_on(&s, d.subspace()));
                for c in ctx.certificates.iter().filter(|c| c.bound_id == "cd_bound") {
                    assert_eq!(c.verdict, Verdict::Verified);
                }
            }
        }
    }
}
