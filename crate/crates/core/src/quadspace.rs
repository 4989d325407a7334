//! Quadratic spaces `(Z, F)`: radicals, small zeros, maximal totally
//! isotropic subspaces, hyperbolic planes, Witt decompositions and
//! orthogonal bases.
//!
//! Every construction threads a [`Ctx`], which owns the current tower (all
//! square roots are adjoined on top of it, so intermediate data always lives
//! in one chain of extensions) and collects the bound certificates.

use std::sync::{Arc, OnceLock};

use serde::Serialize;

use crate::certify::{check, BoundCertificate, BoundParams, CertConfig, LogQuantity};
use crate::error::{Error, Result};
use crate::heights::{height_gram, height_subspace, height_vector, HeightConfig, HeightValue};
use crate::isometry::{small_anisotropic, Isometry};
use crate::linalg::{constrained_kernel, dot, vadd, vec_to_string, vscale, Matrix, Subspace, Vector};
use crate::reduction::{small_basis, SmallBasis};
use crate::tower::{adjoin_sqrt, Elem, Tower};

#[derive(Clone, Debug, Default)]
pub struct ConstructionConfig {
    pub heights: HeightConfig,
    pub cert: CertConfig,
    /// Also certify the proof-internal inequalities.
    pub trace: bool,
    /// Use the literal orthogonal-basis recursion instead of the repaired one.
    pub literal_orthobasis: bool,
}

/// Mutable state of one construction.
#[derive(Debug)]
pub struct Ctx {
    pub cfg: ConstructionConfig,
    pub tower: Arc<Tower>,
    pub certificates: Vec<BoundCertificate>,
    pub notes: Vec<String>,
}

impl Ctx {
    pub fn new(cfg: ConstructionConfig, tower: &Arc<Tower>) -> Ctx {
        Ctx { cfg, tower: tower.clone(), certificates: Vec::new(), notes: Vec::new() }
    }

    pub fn for_space(cfg: ConstructionConfig, q: &QuadraticSpace) -> Ctx {
        Ctx::new(cfg, &q.tower())
    }

    fn absorb(&mut self, t: &Arc<Tower>) {
        self.tower = Tower::common(&self.tower, t).expect("construction left its tower chain");
    }

    /// `√d`, adjoined on top of the current tower when needed.
    pub fn sqrt(&mut self, d: &Elem) -> Result<Elem> {
        self.absorb(d.tower());
        let (t, r) = adjoin_sqrt(&self.tower, d)?;
        self.tower = t;
        Ok(r)
    }

    pub fn small_basis(&self, z: &Subspace) -> Result<SmallBasis> {
        small_basis(z, &self.cfg.heights, &self.cfg.cert)
    }

    pub fn hv(&self, x: &[Elem]) -> Result<HeightValue> {
        height_vector(x, &self.cfg.heights)
    }

    pub fn hs(&self, z: &Subspace) -> Result<HeightValue> {
        height_subspace(z, &self.cfg.heights)
    }

    pub fn certify(&mut self, id: &str, lhs: &LogQuantity, p: &BoundParams, site: &str) -> Result<()> {
        let c = check(id, lhs, p, &self.cfg.cert)?.with_site(site);
        self.certificates.push(c);
        Ok(())
    }

    pub fn certify_with(
        &mut self,
        id: &str,
        lhs: &LogQuantity,
        p: &BoundParams,
        site: &str,
        caveats: &[String],
    ) -> Result<()> {
        let mut c = check(id, lhs, p, &self.cfg.cert)?.with_site(site);
        c.caveats.extend(caveats.iter().cloned());
        self.certificates.push(c);
        Ok(())
    }

    pub fn trace(&mut self, id: &str, lhs: &LogQuantity, p: &BoundParams, site: &str) -> Result<()> {
        if self.cfg.trace {
            let c = check(id, lhs, p, &self.cfg.cert)?.with_site(site).with_caveat("trace");
            self.certificates.push(c);
        }
        Ok(())
    }
}

/// The symmetric bilinear space `(Z, F)` inside `K^N`.
#[derive(Clone, Debug)]
pub struct QuadraticSpace {
    gram: Matrix,
    z: Subspace,
    restricted: Matrix,
    rank: usize,
    gram_height: Arc<OnceLock<HeightValue>>,
}

impl QuadraticSpace {
    pub fn new(gram: Matrix, z: Subspace) -> Result<QuadraticSpace> {
        if gram.rows() != gram.cols() {
            return Err(Error::BadParams("Gram matrix must be square".into()));
        }
        if !gram.is_symmetric() {
            return Err(Error::BadParams("Gram matrix must be symmetric".into()));
        }
        if gram.rows() != z.ambient() {
            return Err(Error::AmbientMismatch(gram.rows(), z.ambient()));
        }
        let (restricted, rank) = restrict(&gram, &z)?;
        Ok(QuadraticSpace { gram, z, restricted, rank, gram_height: Arc::new(OnceLock::new()) })
    }

    pub fn full(gram: Matrix) -> Result<QuadraticSpace> {
        let z = Subspace::full(gram.tower(), gram.rows());
        QuadraticSpace::new(gram, z)
    }

    /// Same form on another subspace.
    pub fn with_subspace(&self, z: Subspace) -> Result<QuadraticSpace> {
        if z.ambient() != self.n() {
            return Err(Error::AmbientMismatch(self.n(), z.ambient()));
        }
        let (restricted, rank) = restrict(&self.gram, &z)?;
        Ok(QuadraticSpace { gram: self.gram.clone(), z, restricted, rank, gram_height: self.gram_height.clone() })
    }

    pub fn n(&self) -> usize {
        self.gram.rows()
    }

    pub fn dim(&self) -> usize {
        self.z.dim()
    }

    pub fn gram(&self) -> &Matrix {
        &self.gram
    }

    pub fn subspace(&self) -> &Subspace {
        &self.z
    }

    /// `XᵗFX` on the canonical basis of `Z`; empty spaces report `None`.
    pub fn restricted_gram(&self) -> Option<&Matrix> {
        (self.dim() > 0).then_some(&self.restricted)
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn is_regular(&self) -> bool {
        self.rank == self.dim()
    }

    /// `F|_Z ≡ 0`.
    pub fn is_null(&self) -> bool {
        self.rank == 0
    }

    /// `⌊L/2⌋` for regular spaces.
    pub fn witt_index(&self) -> Option<usize> {
        self.is_regular().then_some(self.dim() / 2)
    }

    pub fn tower(&self) -> Arc<Tower> {
        Tower::common(self.gram.tower(), self.z.tower()).expect("form and subspace over unrelated towers")
    }

    /// `𝓗(F)`.
    pub fn gram_height(&self, hc: &HeightConfig) -> Result<HeightValue> {
        if let Some(h) = self.gram_height.get() {
            return Ok(h.clone());
        }
        let h = height_gram(&self.gram, hc)?;
        Ok(self.gram_height.get_or_init(|| h).clone())
    }

    pub fn bilinear(&self, x: &[Elem], y: &[Elem]) -> Elem {
        dot(x, &self.gram.mul_vec(y))
    }

    pub fn quad(&self, x: &[Elem]) -> Elem {
        self.bilinear(x, x)
    }

    /// `F·x`.
    pub fn image(&self, x: &[Elem]) -> Vector {
        self.gram.mul_vec(x)
    }

    /// `{y ∈ Z : F(y, v) = 0 for all v in vs}`.
    pub fn orthogonal_in(&self, z: &Subspace, vs: &[Vector]) -> Result<Subspace> {
        if vs.is_empty() {
            return Ok(z.clone());
        }
        let images: Vec<Vector> = vs.iter().map(|v| self.image(v)).collect();
        constrained_kernel(z, &Matrix::from_cols(&images))
    }
}

fn restrict(gram: &Matrix, z: &Subspace) -> Result<(Matrix, usize)> {
    if z.is_zero() {
        return Ok((Matrix::zeros(gram.tower(), 1, 1), 0));
    }
    let x = z.basis_matrix();
    let r = x.transpose().mul(gram).mul(&x);
    let rank = r.rank()?;
    Ok((r, rank))
}

/// `xᵗFy`, or `xᵗFx` without `y`.
pub fn evaluate(q: &QuadraticSpace, x: &[Elem], y: Option<&[Elem]>) -> Result<Elem> {
    let n = q.n();
    if x.len() != n {
        return Err(Error::AmbientMismatch(n, x.len()));
    }
    match y {
        Some(y) if y.len() != n => Err(Error::AmbientMismatch(n, y.len())),
        Some(y) => Ok(q.bilinear(x, y)),
        None => Ok(q.quad(x)),
    }
}

fn span_of(t: &Arc<Tower>, n: usize, vs: &[Vector]) -> Result<Subspace> {
    Subspace::span(t, n, vs)
}

fn base_params(ctx: &Ctx, q: &QuadraticSpace) -> Result<BoundParams> {
    Ok(BoundParams {
        n: Some(q.n() as u64),
        l: Some(q.dim() as u64),
        hf: Some(q.gram_height(&ctx.cfg.heights)?),
        hz: Some(ctx.hs(q.subspace())?),
        ..Default::default()
    })
}

/// Splits `Z = Z^⊥ ⊥ W` with `W` spanned by small-basis vectors.
pub fn radical_split(q: &QuadraticSpace, ctx: &mut Ctx) -> Result<(Subspace, Subspace)> {
    let t = q.tower();
    let (n, l, r) = (q.n(), q.dim(), q.rank());
    if l == 0 {
        return Ok((Subspace::zero(&t, n), Subspace::zero(&t, n)));
    }
    if r == l {
        return Ok((Subspace::zero(&t, n), q.subspace().clone()));
    }
    if q.gram().is_zero() {
        ctx.notes.push("zero form: Z is its own radical, no bound applies".into());
        return Ok((q.subspace().clone(), Subspace::zero(&t, n)));
    }
    let sb = ctx.small_basis(q.subspace())?;
    let radical = q.orthogonal_in(q.subspace(), &sb.vectors)?;
    // Rows of the restricted Gram in small-basis coordinates; a maximal
    // independent set of rows indexes a nonsingular principal minor.
    let rows: Vec<Vector> = sb.vectors.iter().map(|a| sb.vectors.iter().map(|b| q.bilinear(a, b)).collect()).collect();
    let mut picked: Vec<usize> = Vec::new();
    for i in 0..l {
        if picked.len() == r {
            break;
        }
        let mut trial: Vec<Vector> = picked.iter().map(|&j| rows[j].clone()).collect();
        trial.push(rows[i].clone());
        if Matrix::from_rows(&trial).rank()? == trial.len() {
            picked.push(i);
        }
    }
    let w = if picked.is_empty() {
        Subspace::zero(&t, n)
    } else {
        span_of(&t, n, &picked.iter().map(|&i| sb.vectors[i].clone()).collect::<Vec<_>>())?
    };
    debug_assert!(q.with_subspace(w.clone())?.is_regular());
    let mut p = base_params(ctx, q)?;
    p.r = Some(r as u64);
    let hrad = ctx.hs(&radical)?;
    let hw = ctx.hs(&w)?;
    ctx.certify("regular2", &LogQuantity::height(&hrad), &p, "radical_split")?;
    ctx.certify("regular3", &LogQuantity::height(&hw), &p, "radical_split")?;
    Ok((radical, w))
}

/// A nontrivial zero of the form with Gram matrix `f` in `K^N` (N ≥ 2).
pub fn small_zero_free(f: &Matrix, ctx: &mut Ctx) -> Result<Vector> {
    let n = f.rows();
    if n < 2 {
        return Err(Error::DimensionTooSmall);
    }
    ctx.absorb(f.tower());
    let t = ctx.tower.clone();
    let unit = |i: usize| -> Vector { (0..n).map(|j| Elem::from_int(&t, (i == j) as i64)).collect() };
    if f.is_zero() {
        ctx.notes.push("small_zero_free: zero form, returning e1".into());
        return Ok(unit(0));
    }
    let x = if let Some(i) = (0..n).find(|&i| f.get(i, i).is_zero()) {
        unit(i)
    } else {
        // f11 α² + 2 f12 α + f22 = 0
        let (a, b, c) = (f.get(0, 0).clone(), f.get(0, 1).clone(), f.get(1, 1).clone());
        let disc = &(&b * &b) - &(&a * &c);
        let inv = a.invert()?;
        let nb = -&b;
        let roots = if disc.is_zero() {
            vec![&nb * &inv]
        } else {
            let s = ctx.sqrt(&disc)?;
            vec![&(&nb + &s) * &inv, &(&nb - &s) * &inv]
        };
        let t = ctx.tower.clone();
        let mut best: Option<(HeightValue, Vector)> = None;
        for alpha in roots {
            let mut v: Vector = (0..n).map(|_| Elem::zero(&t)).collect();
            v[0] = alpha.lift(&t);
            v[1] = Elem::one(&t);
            let h = ctx.hv(&v)?;
            let better = match &best {
                None => true,
                Some((hb, _)) => h.approx() < hb.approx(),
            };
            if better {
                best = Some((h, v));
            }
        }
        best.unwrap().1
    };
    debug_assert!(dot(&x, &f.mul_vec(&x)).is_zero());
    let p = BoundParams { hf: Some(height_gram(f, &ctx.cfg.heights)?), ..Default::default() };
    let hx = ctx.hv(&x)?;
    ctx.certify("qz:bound", &LogQuantity::height(&hx), &p, "small_zero_free")?;
    Ok(x)
}

/// An isotropic vector of a regular space of dimension at least 2.
pub fn isotropic_in_space(q: &QuadraticSpace, ctx: &mut Ctx) -> Result<Vector> {
    if q.dim() < 2 {
        return Err(Error::DimensionTooSmall);
    }
    if !q.is_regular() {
        return Err(Error::NotRegular);
    }
    let sb = ctx.small_basis(q.subspace())?;
    let (z1, z2) = (&sb.vectors[0], &sb.vectors[1]);
    let g = Matrix::from_rows(&[
        vec![q.quad(z1), q.bilinear(z1, z2)],
        vec![q.bilinear(z2, z1), q.quad(z2)],
    ]);
    let a = small_zero_free(&g, ctx)?;
    let y = vadd(&vscale(z1, &a[0]), &vscale(z2, &a[1]));
    debug_assert!(q.quad(&y).is_zero());
    let p = base_params(ctx, q)?;
    let hy = ctx.hv(&y)?;
    ctx.certify("zero_eq", &LogQuantity::height(&hy), &p, "isotropic_in_space")?;
    Ok(y)
}

/// One level of the even-dimensional recursion.
#[derive(Clone, Debug, Serialize)]
pub struct IsoLevel {
    pub k: usize,
    pub u: String,
    pub w: String,
    /// `[F(w₁), F(w₁,w₂), F(w₂)]`: `G(a,b) = F(w₁)a² + 2F(w₁,w₂)ab + F(w₂)b²`.
    pub g: [String; 3],
    pub candidates: Vec<(String, f64)>,
    pub chosen: usize,
}

#[derive(Clone, Debug)]
pub struct MaxIsotropic {
    pub v: Subspace,
    pub levels: Vec<IsoLevel>,
}

/// A maximal totally isotropic subspace of a regular space.
pub fn max_isotropic(q: &QuadraticSpace, ctx: &mut Ctx) -> Result<MaxIsotropic> {
    if !q.is_regular() {
        return Err(Error::NotRegular);
    }
    let mut levels = Vec::new();
    let v = max_iso(q, ctx, &mut levels)?;
    if v.dim() != q.dim() / 2 || !totally_isotropic(q, &v) || !q.subspace().contains_subspace(&v) {
        return Err(Error::ContradictsRegularity);
    }
    Ok(MaxIsotropic { v, levels })
}

pub fn totally_isotropic(q: &QuadraticSpace, v: &Subspace) -> bool {
    let b = v.basis();
    b.iter().all(|x| b.iter().all(|y| q.bilinear(x, y).is_zero()))
}

fn max_iso(q: &QuadraticSpace, ctx: &mut Ctx, levels: &mut Vec<IsoLevel>) -> Result<Subspace> {
    if q.dim().is_multiple_of(2) {
        max_iso_even(q, ctx, levels)
    } else {
        max_iso_odd(q, ctx, levels)
    }
}

fn max_iso_even(q: &QuadraticSpace, ctx: &mut Ctx, levels: &mut Vec<IsoLevel>) -> Result<Subspace> {
    let (n, l) = (q.n(), q.dim());
    let k = l / 2;
    if k == 0 {
        return Ok(Subspace::zero(&q.tower(), n));
    }
    let mut p = base_params(ctx, q)?;
    p.k = Some(k as u64);
    let v = if k == 1 {
        let y = isotropic_in_space(q, ctx)?;
        span_of(&ctx.tower, n, &[y])?
    } else {
        let sb = ctx.small_basis(q.subspace())?;
        let u = inductive_subspace(q, &sb, ctx, levels)?;
        let hu = ctx.hs(&u)?;
        let w = q.orthogonal_in(q.subspace(), u.basis())?;
        if w.dim() != k + 1 {
            return Err(Error::ContradictsRegularity);
        }
        let hw = ctx.hs(&w)?;
        let mut ph = p.clone();
        ph.hu = Some(hu);
        ctx.trace("H_W", &LogQuantity::height(&hw), &ph, "max_isotropic")?;
        let wb = ctx.small_basis(&w)?;
        let mut picked: Vec<Vector> = Vec::new();
        let mut acc = u.basis().to_vec();
        for v in &wb.vectors {
            if picked.len() == 2 {
                break;
            }
            let mut trial = acc.clone();
            trial.push(v.clone());
            if span_of(&ctx.tower, n, &trial)?.dim() == trial.len() {
                acc = trial;
                picked.push(v.clone());
            }
        }
        let (w1, w2) = (&picked[0], &picked[1]);
        let (a, b, c) = (q.quad(w1), q.bilinear(w1, w2), q.quad(w2));
        if a.is_zero() && b.is_zero() && c.is_zero() {
            return Err(Error::ContradictsRegularity);
        }
        // zeros of G(1, β) = a + 2bβ + cβ², plus β = ∞ (w₂) when c = 0
        let ys: Vec<Vector> = if !c.is_zero() {
            let disc = &(&b * &b) - &(&a * &c);
            let inv = c.invert()?;
            let nb = -&b;
            let betas = if disc.is_zero() {
                vec![&nb * &inv]
            } else {
                let s = ctx.sqrt(&disc)?;
                vec![&(&nb + &s) * &inv, &(&nb - &s) * &inv]
            };
            betas.iter().map(|beta| vadd(w1, &vscale(w2, beta))).collect()
        } else if !b.is_zero() {
            let beta = -&(&a * &(&b * &Elem::from_int(b.tower(), 2)).invert()?);
            vec![vadd(w1, &vscale(w2, &beta)), w2.clone()]
        } else {
            vec![w2.clone()]
        };
        let mut cands: Vec<(Subspace, HeightValue)> = Vec::new();
        for y in &ys {
            debug_assert!(q.quad(y).is_zero());
            let mut gens = u.basis().to_vec();
            gens.push(y.clone());
            let vi = span_of(&ctx.tower, n, &gens)?;
            let h = ctx.hs(&vi)?;
            cands.push((vi, h));
        }
        let mut chosen = 0;
        for (i, (_, h)) in cands.iter().enumerate().skip(1) {
            if h.approx() < cands[chosen].1.approx() {
                chosen = i;
            }
        }
        let hv2 = if cands.len() > 1 { cands[1].1.clone() } else { cands[0].1.clone() };
        let pb = BoundParams { hw: Some(hw), hf: p.hf.clone(), k: Some(k as u64), ..Default::default() };
        ctx.certify("bezout", &LogQuantity::product(&[cands[0].1.clone(), hv2]), &pb, &format!("max_isotropic k={k}"))?;
        levels.push(IsoLevel {
            k,
            u: format!("{u:?}"),
            w: format!("{w:?}"),
            g: [a.to_string(), b.to_string(), c.to_string()],
            candidates: cands.iter().map(|(s, h)| (format!("{s:?}"), h.approx())).collect(),
            chosen,
        });
        cands.swap_remove(chosen).0
    };
    let hv = ctx.hs(&v)?;
    ctx.certify("vaaler_even", &LogQuantity::height(&hv), &p, &format!("max_isotropic L={l}"))?;
    Ok(v)
}

/// A totally isotropic `U` of dimension `k−1` inside a regular `Z₁` spanned by
/// `L−2` small-basis vectors.
fn inductive_subspace(
    q: &QuadraticSpace,
    sb: &SmallBasis,
    ctx: &mut Ctx,
    levels: &mut Vec<IsoLevel>,
) -> Result<Subspace> {
    let (n, l) = (q.n(), q.dim());
    let k = l / 2;
    let mut drops: Vec<(usize, usize)> = Vec::new();
    for j in (0..l).rev() {
        for i in (0..j).rev() {
            drops.push((i, j));
        }
    }
    for &(i, j) in &drops {
        let keep: Vec<Vector> =
            (0..l).filter(|&m| m != i && m != j).map(|m| sb.vectors[m].clone()).collect();
        let z1 = span_of(&q.tower(), n, &keep)?;
        let q1 = q.with_subspace(z1)?;
        if q1.is_regular() {
            if (i, j) != (l - 2, l - 1) {
                ctx.notes.push(format!("max_isotropic: Z1 singular, dropped basis vectors {i},{j}"));
            }
            let mut p = base_params(ctx, q)?;
            p.k = Some(k as u64);
            let hz1 = ctx.hs(q1.subspace())?;
            ctx.trace("ind_sub", &LogQuantity::height(&hz1), &p, "max_isotropic")?;
            return max_iso_even(&q1, ctx, levels);
        }
    }
    ctx.notes.push("max_isotropic: every Z1 singular, using radical split".into());
    let keep: Vec<Vector> = sb.vectors[..l - 2].to_vec();
    let q1 = q.with_subspace(span_of(&q.tower(), n, &keep)?)?;
    let (rad, reg) = radical_split(&q1, ctx)?;
    let inner = if reg.dim() >= 2 { max_iso(&q.with_subspace(reg)?, ctx, levels)? } else { Subspace::zero(&ctx.tower, n) };
    let iso = rad.sum(&inner)?;
    span_of(&ctx.tower, n, &iso.basis()[..k - 1])
}

fn max_iso_odd(q: &QuadraticSpace, ctx: &mut Ctx, levels: &mut Vec<IsoLevel>) -> Result<Subspace> {
    let (n, l) = (q.n(), q.dim());
    let k = l / 2;
    let mut p = base_params(ctx, q)?;
    p.k = Some(k as u64);
    let v = if k == 0 {
        Subspace::zero(&q.tower(), n)
    } else {
        let sb = ctx.small_basis(q.subspace())?;
        let z1 = span_of(&q.tower(), n, &sb.vectors[..l - 1])?;
        let q1 = q.with_subspace(z1)?;
        if q1.is_regular() {
            let v = max_iso_even(&q1, ctx, levels)?;
            let hv = ctx.hs(&v)?;
            ctx.trace("o1", &LogQuantity::height(&hv), &p, "max_isotropic l=0")?;
            v
        } else {
            let hz1 = ctx.hs(q1.subspace())?;
            ctx.trace("Z1", &LogQuantity::height(&hz1), &p, "max_isotropic l=1")?;
            let (rad, reg) = radical_split(&q1, ctx)?;
            if rad.dim() != 1 {
                return Err(Error::ContradictsRegularity);
            }
            let hw = ctx.hs(&reg)?;
            ctx.trace("W", &LogQuantity::height(&hw), &p, "max_isotropic l=1")?;
            let u = max_iso_odd(&q.with_subspace(reg)?, ctx, levels)?;
            rad.sum(&u)?
        }
    };
    let hv = ctx.hs(&v)?;
    ctx.certify("vaaler_odd", &LogQuantity::height(&hv), &p, &format!("max_isotropic L={l}"))?;
    Ok(v)
}

#[derive(Clone, Debug)]
pub struct HyperbolicPlane {
    pub x: Vector,
    pub y: Vector,
    pub span: Subspace,
}

/// Completes an isotropic `x ∈ Z` to a hyperbolic pair.
pub fn hyperbolic_pair(q: &QuadraticSpace, x: &[Elem], ctx: &mut Ctx) -> Result<HyperbolicPlane> {
    if x.len() != q.n() {
        return Err(Error::AmbientMismatch(q.n(), x.len()));
    }
    if !q.quad(x).is_zero() {
        return Err(Error::AnisotropicInput);
    }
    if !q.subspace().contains(x) {
        return Err(Error::BadParams("vector is not in Z".into()));
    }
    let sb = ctx.small_basis(q.subspace())?;
    let yp = sb.vectors.iter().find(|v| !q.bilinear(x, v).is_zero()).ok_or(Error::RadicalVector)?;
    let c = q.bilinear(x, yp);
    let cinv = c.invert()?;
    let coef = &(&q.quad(yp) * &(&cinv * &cinv)) * &Elem::from_q(c.tower(), &crate::arith::q(1, 2));
    let y = vadd(&vscale(yp, &cinv), &vscale(x, &-&coef));
    debug_assert!(q.quad(&y).is_zero() && q.bilinear(x, &y).is_one());
    let span = span_of(&ctx.tower, q.n(), &[x.to_vec(), y.clone()])?;
    let mut p = base_params(ctx, q)?;
    p.k = Some((q.dim() / 2).max(1) as u64);
    let hh = ctx.hs(&span)?;
    ctx.certify("hyp1", &LogQuantity::height(&hh), &p, "hyperbolic_pair")?;
    Ok(HyperbolicPlane { x: x.to_vec(), y, span })
}

#[derive(Clone, Debug)]
pub struct WittDecomposition {
    pub radical: Subspace,
    pub planes: Vec<HyperbolicPlane>,
    pub anisotropic_line: Option<Vector>,
    pub certificates: Vec<BoundCertificate>,
}

impl WittDecomposition {
    /// Exact check of orthogonality, hyperbolic relations and `⊕ = Z`.
    pub fn verify(&self, q: &QuadraticSpace) -> Result<bool> {
        let mut parts: Vec<Vec<Vector>> = Vec::new();
        if !self.radical.is_zero() {
            parts.push(self.radical.basis().to_vec());
        }
        for h in &self.planes {
            if !(q.quad(&h.x).is_zero() && q.quad(&h.y).is_zero() && q.bilinear(&h.x, &h.y).is_one()) {
                return Ok(false);
            }
            parts.push(vec![h.x.clone(), h.y.clone()]);
        }
        if let Some(y) = &self.anisotropic_line {
            if q.quad(y).is_zero() {
                return Ok(false);
            }
            parts.push(vec![y.clone()]);
        }
        for i in 0..parts.len() {
            for j in i + 1..parts.len() {
                for a in &parts[i] {
                    for b in &parts[j] {
                        if !q.bilinear(a, b).is_zero() {
                            return Ok(false);
                        }
                    }
                }
            }
        }
        if !self.radical.basis().iter().all(|r| q.subspace().basis().iter().all(|z| q.bilinear(r, z).is_zero())) {
            return Ok(false);
        }
        let all: Vec<Vector> = parts.concat();
        if all.len() != q.dim() {
            return Ok(false);
        }
        if all.is_empty() {
            return Ok(q.dim() == 0);
        }
        let t = crate::linalg::common_tower(&q.tower(), all.iter().flatten());
        let s = Subspace::span(&t, q.n(), &all)?;
        Ok(s.dim() == q.dim() && s.contains_subspace(&q.subspace().lift(&t)))
    }
}

pub fn witt_decompose(q: &QuadraticSpace, ctx: &mut Ctx) -> Result<WittDecomposition> {
    let mark = ctx.certificates.len();
    let (radical, reg) = radical_split(q, ctx)?;
    let singular = !radical.is_zero();
    let qr = q.with_subspace(reg)?;
    let l = qr.dim();
    let k = l / 2;
    let mut planes = Vec::new();
    let mut line = None;
    if l > 0 {
        let top = base_params(ctx, &qr)?;
        let mut cur = qr.clone();
        if l % 2 == 1 {
            let id = Isometry::identity(&qr);
            let (y, _) = small_anisotropic(&qr, &id, ctx)?;
            let hy = ctx.hv(&y)?;
            let mut p = top.clone();
            p.k = Some(k as u64);
            ctx.certify("witt2", &LogQuantity::height(&hy), &p, "witt_decompose line")?;
            let z1 = q.orthogonal_in(qr.subspace(), std::slice::from_ref(&y))?;
            cur = q.with_subspace(z1)?;
            if !cur.is_regular() {
                return Err(Error::ContradictsRegularity);
            }
            line = Some(y);
        }
        while cur.dim() > 0 {
            let x = isotropic_in_space(&cur, ctx)?;
            let h = hyperbolic_pair(&cur, &x, ctx)?;
            let rest = q.orthogonal_in(cur.subspace(), &[h.x.clone(), h.y.clone()])?;
            cur = q.with_subspace(rest)?;
            planes.push(h);
        }
        for (i, h) in planes.iter().enumerate() {
            let mut p = top.clone();
            p.k = Some(k as u64);
            let hh = ctx.hs(&h.span)?;
            ctx.certify("witt1", &LogQuantity::height(&hh), &p, &format!("witt_decompose plane {i}"))?;
            if l % 2 == 0 {
                ctx.trace("even_dec", &LogQuantity::height(&hh), &p, &format!("witt_decompose plane {i}"))?;
            }
        }
    }
    let mut certificates = ctx.certificates[mark..].to_vec();
    if singular {
        for c in &mut certificates {
            c.caveats.push("singular: bounds relative to the regular part".into());
        }
    }
    Ok(WittDecomposition { radical, planes, anisotropic_line: line, certificates })
}

/// A basis of `Z` orthogonal under `F`.
pub fn orthogonal_basis(q: &QuadraticSpace, ctx: &mut Ctx) -> Result<Vec<Vector>> {
    if q.dim() == 0 {
        return Err(Error::ZeroSubspace);
    }
    let mut out = Vec::new();
    let mut cur = q.clone();
    loop {
        if cur.dim() == 0 {
            break;
        }
        let sb = ctx.small_basis(cur.subspace())?;
        if cur.is_null() {
            out.extend(sb.vectors.iter().cloned());
            break;
        }
        let (x1, rest) = if ctx.cfg.literal_orthobasis {
            let x1 = sb.vectors[0].clone();
            if sb.vectors.iter().all(|z| cur.bilinear(&x1, z).is_zero()) {
                let j = x1.iter().position(|c| !c.is_zero()).unwrap();
                let t = cur.tower();
                let e: Vector = (0..q.n()).map(|i| Elem::from_int(&t, (i == j) as i64)).collect();
                let hyper = constrained_kernel(cur.subspace(), &Matrix::from_cols(&[e]))?;
                (x1, hyper)
            } else if cur.quad(&x1).is_zero() {
                return Err(Error::LiteralBranchGap);
            } else {
                let r = q.orthogonal_in(cur.subspace(), std::slice::from_ref(&x1))?;
                (x1, r)
            }
        } else {
            let x1 = smallest_anisotropic(&cur, &sb, ctx)?;
            let r = q.orthogonal_in(cur.subspace(), std::slice::from_ref(&x1))?;
            (x1, r)
        };
        out.push(x1);
        cur = q.with_subspace(rest)?;
    }
    if q.gram().is_zero() {
        ctx.notes.push("orthogonal_basis: zero form, no height bound to certify".into());
        return Ok(out);
    }
    let hs: Vec<HeightValue> = out.iter().map(|v| ctx.hv(v)).collect::<Result<_>>()?;
    let p = base_params(ctx, q)?;
    ctx.certify("siegel2", &LogQuantity::product(&hs), &p, "orthogonal_basis")?;
    Ok(out)
}

fn smallest_anisotropic(q: &QuadraticSpace, sb: &SmallBasis, ctx: &Ctx) -> Result<Vector> {
    let v = &sb.vectors;
    let mut pool: Vec<Vector> = v.clone();
    for i in 0..v.len() {
        for j in i + 1..v.len() {
            pool.push(vadd(&v[i], &v[j]));
        }
    }
    let mut best: Option<(HeightValue, Vector)> = None;
    for c in pool {
        if q.quad(&c).is_zero() {
            continue;
        }
        let h = ctx.hv(&c)?;
        if best.as_ref().is_none_or(|(hb, _)| h.approx() < hb.approx()) {
            best = Some((h, c));
        }
    }
    best.map(|b| b.1).ok_or(Error::NoAnisotropicVector)
}

/// True when the listed vectors are pairwise `F`-orthogonal.
pub fn pairwise_orthogonal(q: &QuadraticSpace, vs: &[Vector]) -> bool {
    (0..vs.len()).all(|i| (i + 1..vs.len()).all(|j| q.bilinear(&vs[i], &vs[j]).is_zero()))
}

pub fn describe(v: &[Elem]) -> String {
    vec_to_string(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::{q as qq, Q};
    use crate::certify::Verdict;
    use crate::linalg::vec_from_ints;

    fn diag(t: &Arc<Tower>, d: &[i64]) -> Matrix {
        let n = d.len();
        let rows: Vec<Vec<Q>> =
            (0..n).map(|i| (0..n).map(|j| if i == j { Q::from_integer(d[i].into()) } else { Q::from_integer(0.into()) }).collect()).collect();
        Matrix::from_q(t, &rows)
    }

    fn hyperbolic(t: &Arc<Tower>, pairs: usize) -> Matrix {
        let n = 2 * pairs;
        let rows: Vec<Vec<Q>> = (0..n)
            .map(|i| (0..n).map(|j| if i / 2 == j / 2 && i != j { qq(1, 2) } else { qq(0, 1) }).collect())
            .collect();
        Matrix::from_q(t, &rows)
    }

    fn ctx_for(q: &QuadraticSpace) -> Ctx {
        Ctx::for_space(ConstructionConfig::default(), q)
    }

    fn all_verified(ctx: &Ctx) {
        for c in &ctx.certificates {
            assert_eq!(c.verdict, Verdict::Verified, "{} at {}", c.bound_id, c.site);
        }
    }

    #[test]
    fn evaluate_examples() {
        let t = Tower::rational();
        let h = QuadraticSpace::full(hyperbolic(&t, 1)).unwrap();
        let e1 = vec_from_ints(&t, &[1, 0]);
        let e2 = vec_from_ints(&t, &[0, 1]);
        assert!(evaluate(&h, &e1, None).unwrap().is_zero());
        assert_eq!(evaluate(&h, &e1, Some(&e2)).unwrap(), Elem::from_q(&t, &qq(1, 2)));
        let d = QuadraticSpace::full(diag(&t, &[1, 1])).unwrap();
        assert_eq!(evaluate(&d, &vec_from_ints(&t, &[3, 4]), None).unwrap(), Elem::from_int(&t, 25));
        assert!(matches!(evaluate(&d, &vec_from_ints(&t, &[1]), None), Err(Error::AmbientMismatch(2, 1))));
    }

    #[test]
    fn radical_split_examples() {
        let t = Tower::rational();
        let q = QuadraticSpace::full(diag(&t, &[1, 0])).unwrap();
        let mut ctx = ctx_for(&q);
        let (r, w) = radical_split(&q, &mut ctx).unwrap();
        assert_eq!(r, Subspace::span(&t, 2, &[vec_from_ints(&t, &[0, 1])]).unwrap());
        assert_eq!(w, Subspace::span(&t, 2, &[vec_from_ints(&t, &[1, 0])]).unwrap());
        let q3 = QuadraticSpace::full(diag(&t, &[1, 0, 0])).unwrap();
        let (r3, _) = radical_split(&q3, &mut ctx).unwrap();
        assert_eq!(r3.dim(), 2);
        assert!(!r3.contains(&vec_from_ints(&t, &[1, 0, 0])));
        let qr = QuadraticSpace::full(diag(&t, &[1, -1])).unwrap();
        let (r0, w0) = radical_split(&qr, &mut ctx).unwrap();
        assert!(r0.is_zero());
        assert_eq!(w0.dim(), 2);
        let qz = QuadraticSpace::full(diag(&t, &[0, 0])).unwrap();
        let (rz, wz) = radical_split(&qz, &mut ctx).unwrap();
        assert_eq!((rz.dim(), wz.dim()), (2, 0));
        all_verified(&ctx);
    }

    #[test]
    fn small_zero_examples() {
        let t = Tower::rational();
        let mut ctx = Ctx::new(ConstructionConfig::default(), &t);
        let x = small_zero_free(&diag(&t, &[1, -1]), &mut ctx).unwrap();
        assert_eq!(x, vec_from_ints(&t, &[1, 1]));
        let x = small_zero_free(&hyperbolic(&t, 1), &mut ctx).unwrap();
        assert_eq!(x, vec_from_ints(&t, &[1, 0]));
        let x = small_zero_free(&diag(&t, &[1, 1]), &mut ctx).unwrap();
        let g = &x[0];
        assert_eq!(g.square(), Elem::from_int(g.tower(), -1));
        assert!(x[1].is_one());
        all_verified(&ctx);
    }

    #[test]
    fn isotropic_examples() {
        let t = Tower::rational();
        let q = QuadraticSpace::full(diag(&t, &[1, -1, 2])).unwrap();
        let mut ctx = ctx_for(&q);
        assert_eq!(isotropic_in_space(&q, &mut ctx).unwrap(), vec_from_ints(&t, &[1, 1, 0]));
        let h = QuadraticSpace::full(hyperbolic(&t, 1)).unwrap();
        assert_eq!(isotropic_in_space(&h, &mut ctx).unwrap(), vec_from_ints(&t, &[1, 0]));
        let one = QuadraticSpace::full(diag(&t, &[1])).unwrap();
        assert!(matches!(isotropic_in_space(&one, &mut ctx), Err(Error::DimensionTooSmall)));
        let sing = QuadraticSpace::full(diag(&t, &[1, 0])).unwrap();
        assert!(matches!(isotropic_in_space(&sing, &mut ctx), Err(Error::NotRegular)));
        all_verified(&ctx);
    }

    #[test]
    fn max_isotropic_worked_trace() {
        let t = Tower::rational();
        let q = QuadraticSpace::full(hyperbolic(&t, 2)).unwrap();
        let mut ctx = ctx_for(&q);
        let m = max_isotropic(&q, &mut ctx).unwrap();
        let e = |v: &[i64]| vec_from_ints(&t, v);
        assert_eq!(m.v, Subspace::span(&t, 4, &[e(&[1, 0, 0, 0]), e(&[0, 0, 1, 0])]).unwrap());
        let lv = &m.levels[0];
        assert_eq!(lv.u, format!("{:?}", Subspace::span(&t, 4, &[e(&[1, 0, 0, 0])]).unwrap()));
        let w = Subspace::span(&t, 4, &[e(&[1, 0, 0, 0]), e(&[0, 0, 1, 0]), e(&[0, 0, 0, 1])]).unwrap();
        assert_eq!(lv.w, format!("{w:?}"));
        assert_eq!(lv.g, ["0".to_string(), "1/2".to_string(), "0".to_string()]);
        assert_eq!(lv.candidates.len(), 2);
        assert!(lv.candidates.iter().all(|c| (c.1 - 1.0).abs() < 1e-12));
        assert_eq!(lv.chosen, 0);
        all_verified(&ctx);
    }

    #[test]
    fn max_isotropic_diag() {
        let t = Tower::rational();
        let q = QuadraticSpace::full(diag(&t, &[1, -1, 2, -2])).unwrap();
        let mut ctx = ctx_for(&q);
        let m = max_isotropic(&q, &mut ctx).unwrap();
        assert_eq!(m.v.dim(), 2);
        assert!(totally_isotropic(&q, &m.v));
        let one = QuadraticSpace::full(diag(&t, &[3])).unwrap();
        assert!(max_isotropic(&one, &mut ctx).unwrap().v.is_zero());
        all_verified(&ctx);
    }

    #[test]
    fn max_isotropic_odd_and_towers() {
        let t = Tower::rational();
        for d in [&[1, 1, 1][..], &[1, 2, 3, 5, 7], &[1, -1, 1, -1, 1], &[2, 3, 5, 7]] {
            let q = QuadraticSpace::full(diag(&t, d)).unwrap();
            let mut ctx = ctx_for(&q);
            let m = max_isotropic(&q, &mut ctx).unwrap();
            assert_eq!(m.v.dim(), d.len() / 2);
            assert!(totally_isotropic(&q, &m.v));
            all_verified(&ctx);
        }
    }

    #[test]
    fn hyperbolic_pair_examples() {
        let t = Tower::rational();
        let q = QuadraticSpace::full(diag(&t, &[1, -1])).unwrap();
        let mut ctx = ctx_for(&q);
        let h = hyperbolic_pair(&q, &vec_from_ints(&t, &[1, 1]), &mut ctx).unwrap();
        assert_eq!(h.y, vec![Elem::from_q(&t, &qq(1, 2)), Elem::from_q(&t, &qq(-1, 2))]);
        let hq = QuadraticSpace::full(hyperbolic(&t, 1)).unwrap();
        let h = hyperbolic_pair(&hq, &vec_from_ints(&t, &[1, 0]), &mut ctx).unwrap();
        assert_eq!(h.y, vec_from_ints(&t, &[0, 2]));
        assert!(matches!(hyperbolic_pair(&q, &vec_from_ints(&t, &[1, 0]), &mut ctx), Err(Error::AnisotropicInput)));
        let s = QuadraticSpace::full(diag(&t, &[1, 0])).unwrap();
        assert!(matches!(hyperbolic_pair(&s, &vec_from_ints(&t, &[0, 1]), &mut ctx), Err(Error::RadicalVector)));
        all_verified(&ctx);
    }

    #[test]
    fn witt_examples() {
        let t = Tower::rational();
        let q = QuadraticSpace::full(diag(&t, &[1, -1])).unwrap();
        let mut ctx = ctx_for(&q);
        let w = witt_decompose(&q, &mut ctx).unwrap();
        assert_eq!(w.planes.len(), 1);
        assert_eq!(w.planes[0].x, vec_from_ints(&t, &[1, 1]));
        assert!(w.anisotropic_line.is_none());
        assert!(w.verify(&q).unwrap());

        let q = QuadraticSpace::full(diag(&t, &[1, -1, 3])).unwrap();
        let w = witt_decompose(&q, &mut ctx).unwrap();
        assert_eq!(w.planes.len(), 1);
        assert!(w.anisotropic_line.is_some());
        assert!(w.verify(&q).unwrap());
        assert!(w.certificates.iter().any(|c| c.bound_id == "anis"));

        let q = QuadraticSpace::full(diag(&t, &[1, 0])).unwrap();
        let w = witt_decompose(&q, &mut ctx).unwrap();
        assert_eq!(w.radical, Subspace::span(&t, 2, &[vec_from_ints(&t, &[0, 1])]).unwrap());
        assert!(w.planes.is_empty());
        assert!(w.verify(&q).unwrap());
        all_verified(&ctx);
    }

    #[test]
    fn witt_over_closure() {
        let t = Tower::rational_with_cap(64);
        for d in [&[1, 1][..], &[1, 1, 1, 1], &[1, 2, 3]] {
            let q = QuadraticSpace::full(diag(&t, d)).unwrap();
            let mut ctx = ctx_for(&q);
            let w = witt_decompose(&q, &mut ctx).unwrap();
            assert_eq!(w.planes.len(), d.len() / 2);
            assert!(w.verify(&q).unwrap());
            all_verified(&ctx);
        }
    }

    #[test]
    fn orthobasis_examples() {
        let t = Tower::rational();
        let q = QuadraticSpace::full(diag(&t, &[1, 1])).unwrap();
        let mut ctx = ctx_for(&q);
        assert_eq!(orthogonal_basis(&q, &mut ctx).unwrap(), vec![vec_from_ints(&t, &[1, 0]), vec_from_ints(&t, &[0, 1])]);
        let h = QuadraticSpace::full(hyperbolic(&t, 1)).unwrap();
        assert_eq!(orthogonal_basis(&h, &mut ctx).unwrap(), vec![vec_from_ints(&t, &[1, 1]), vec_from_ints(&t, &[1, -1])]);
        let z = QuadraticSpace::full(diag(&t, &[0, 0])).unwrap();
        assert_eq!(orthogonal_basis(&z, &mut ctx).unwrap().len(), 2);
        all_verified(&ctx);
    }

    #[test]
    fn literal_orthobasis_gap() {
        let t = Tower::rational();
        let h = QuadraticSpace::full(hyperbolic(&t, 1)).unwrap();
        let cfg = ConstructionConfig { literal_orthobasis: true, ..Default::default() };
        let mut ctx = Ctx::new(cfg, &t);
        assert!(matches!(orthogonal_basis(&h, &mut ctx), Err(Error::LiteralBranchGap)));
        let s = QuadraticSpace::full(diag(&t, &[0, 1])).unwrap();
        let b = orthogonal_basis(&s, &mut ctx).unwrap();
        assert!(pairwise_orthogonal(&s, &b));
    }
}
