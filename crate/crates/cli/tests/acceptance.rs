//! Acceptance criteria 1-10. Runs without the libtest harness so every
//! criterion prints exactly one PASS/FAIL line; exits non-zero on any FAIL.

use std::path::PathBuf;
use std::process::Command;
use std::sync::Arc;
use std::time::Instant;

use num_bigint::BigInt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qbar_cli::campaign::{run_campaign, CampaignConfig, CampaignReport, Op, RunConfig};
use qbar_cli::instance::parse_instance;
use qbar_core::arith::{q, Q};
use qbar_core::certify::{check, BoundParams, CertConfig, Verdict};
use qbar_core::heights::{
    finite_part, finite_part_mc, finite_part_quadratic, finite_part_rational, height_form_poly, height_gram,
    height_subspace, height_vector, powers_equal, HeightConfig,
};
use qbar_core::interval::Dyadic;
use qbar_core::isometry::{cartan_dieudonne, Isometry, SURROGATE};
use qbar_core::linalg::{kernel, vec_from_ints, Matrix, Subspace, Vector};
use qbar_core::quadspace::{max_isotropic, ConstructionConfig, Ctx, QuadraticSpace};
use qbar_core::tower::{build_tower, Elem, Tower};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn quadratic_field(d: i64) -> (Arc<Tower>, Elem) {
    let (t, g) = build_tower(&[("g".to_string(), d.to_string())], true, 64).unwrap();
    (t, g[0].clone())
}

fn rand_q(rng: &mut ChaCha8Rng, num: i64, den: i64) -> Q {
    Q::new(BigInt::from(rng.gen_range(-num..=num)), BigInt::from(rng.gen_range(1..=den)))
}

fn rand_elem(rng: &mut ChaCha8Rng, t: &Arc<Tower>, g: Option<&Elem>) -> Elem {
    let a = Elem::from_q(t, &rand_q(rng, 30, 12));
    match g {
        None => a,
        Some(g) => &a + &g.scale(&rand_q(rng, 30, 12)),
    }
}

fn rand_vec(rng: &mut ChaCha8Rng, t: &Arc<Tower>, g: Option<&Elem>) -> Vector {
    loop {
        let n = rng.gen_range(1..=5);
        let v: Vector = (0..n).map(|_| rand_elem(rng, t, g)).collect();
        if v.iter().any(|c| !c.is_zero()) {
            return v;
        }
    }
}

fn run_config() -> RunConfig {
    RunConfig::default()
}

/// Every certificate with one of `ids` verified; returns how many there were.
fn all_verified(r: &CampaignReport, ids: &[&str]) -> Result<usize, String> {
    let mut n = 0;
    for inst in &r.instances {
        for c in inst.certificates.iter().filter(|c| ids.contains(&c.bound_id.as_str())) {
            ensure(c.verdict == Verdict::Verified, || {
                format!("instance {} (seed {}): {} {} at {}", inst.id, inst.seed, c.bound_id, c.verdict, c.site)
            })?;
            n += 1;
        }
    }
    Ok(n)
}

fn clean_run(r: &CampaignReport, budget_ms: f64) -> Result<(), String> {
    for inst in &r.instances {
        ensure(inst.status == "ok", || format!("instance {} (seed {}): {:?}", inst.id, inst.seed, inst.error))?;
        for (k, v) in &inst.checks {
            ensure(*v, || format!("instance {} (seed {}): exact check {k} failed", inst.id, inst.seed))?;
        }
        ensure(inst.elapsed_ms < budget_ms, || {
            format!("instance {} took {:.0} ms (budget {budget_ms} ms)", inst.id, inst.elapsed_ms)
        })?;
    }
    let t = r.totals();
    ensure(t.violated == 0 && t.inconclusive == 0, || format!("{} violated, {} inconclusive", t.violated, t.inconclusive))
}

fn campaign(op: Op, m: usize, n: (usize, usize), l: (usize, Option<usize>)) -> CampaignConfig {
    let mut c = CampaignConfig::new(op, m, run_config());
    c.n_min = n.0;
    c.n_max = n.1;
    c.l_min = l.0;
    c.l_max = l.1;
    c
}

fn c1_finite_parts() -> Outcome {
    let start = Instant::now();
    let hc = HeightConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let q0 = Tower::rational();
    for i in 0..500 {
        let v = rand_vec(&mut rng, &q0, None);
        let (mc, ex) = (finite_part_mc(&v, &hc), finite_part_rational(&v));
        ensure(mc == ex, || format!("rational vector {i}: mc {mc:?} vs exact {ex:?}"))?;
    }
    for (k, d) in [-1, 2, 3, 5, -7].into_iter().enumerate() {
        let (t, g) = quadratic_field(d);
        for i in 0..40 {
            let v = rand_vec(&mut rng, &t, Some(&g));
            let v: Vector = v.iter().map(|c| c.lift(&t)).collect();
            let mc = finite_part_mc(&v, &hc);
            let ex = finite_part_quadratic(&v).ok_or("no exact quadratic path")?;
            ensure(mc == ex, || format!("Q(sqrt {d}) vector {}: mc {mc:?} vs exact {ex:?}", k * 40 + i))?;
        }
    }
    let s = start.elapsed().as_secs_f64();
    ensure(s < 30.0, || format!("took {s:.1} s"))?;
    Ok(format!("500 rational + 200 quadratic vectors, 0 mismatches, {s:.2} s"))
}

fn c2_height_invariants() -> Outcome {
    let start = Instant::now();
    let hc = HeightConfig::default();
    let prec = 128;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let one = Dyadic::from_int(1);

    // product formula
    let (t2, g2) = quadratic_field(2);
    for i in 0..100 {
        let a = rand_elem(&mut rng, &t2, Some(&g2));
        if a.is_zero() {
            continue;
        }
        let fp = finite_part(std::slice::from_ref(&a), &hc).map_err(|e| e.to_string())?;
        let norm = a.field_norm();
        let norm = if norm < Q::from_integer(0.into()) { -norm } else { norm };
        let exact = if fp.degree == 2 { &fp.pow * &norm } else { &fp.pow * &fp.pow * &norm };
        ensure(exact == Q::from_integer(1.into()), || format!("scalar {i}: FP·|N| = {exact}"))?;
        let iv = height_vector(&[a], &hc).and_then(|h| h.enclosure(prec)).map_err(|e| e.to_string())?;
        ensure(iv.contains(&one) && iv.width().to_f64() < 1e-25, || format!("scalar {i}: enclosure {iv:?}"))?;
    }

    // projective invariance over Q, Q(√2) and Q(i)
    let (ti, gi) = quadratic_field(-1);
    let fields: [(Arc<Tower>, Option<Elem>); 3] = [(Tower::rational(), None), (t2.clone(), Some(g2.clone())), (ti, Some(gi))];
    for (t, g) in &fields {
        for i in 0..40 {
            let x = rand_vec(&mut rng, t, g.as_ref());
            let lam = rand_elem(&mut rng, t, g.as_ref());
            if lam.is_zero() {
                continue;
            }
            let y: Vector = x.iter().map(|c| c * &lam).collect();
            let (hx, hy) = (height_vector(&x, &hc).map_err(|e| e.to_string())?, height_vector(&y, &hc).map_err(|e| e.to_string())?);
            let fl = finite_part(std::slice::from_ref(&lam), &hc).map_err(|e| e.to_string())?;
            let (fx, fy) = (hx.finite_part(), hy.finite_part());
            // FP(λx) = FP(λ)·FP(x), compared as d-th powers
            let d = fx.degree.max(fy.degree).max(fl.degree);
            let lift = |p: &Q, dp: usize| -> Q {
                let mut v = p.clone();
                let mut k = dp;
                while k < d {
                    v = &v * &v;
                    k *= 2;
                }
                v
            };
            ensure(lift(&fy.pow, fy.degree) == lift(&fx.pow, fx.degree) * lift(&fl.pow, fl.degree), || {
                format!("{t:?} vector {i}: finite parts {fx:?} · {fl:?} ≠ {fy:?}")
            })?;
            let (ex, ey) = (hx.enclosure(prec).map_err(|e| e.to_string())?, hy.enclosure(prec).map_err(|e| e.to_string())?);
            ensure(ex.overlaps(&ey), || format!("vector {i}: enclosures {ex:?} / {ey:?} disjoint"))?;
            ensure(ex.relative_width() < 1e-20 && ey.relative_width() < 1e-20, || format!("vector {i}: enclosure too wide"))?;
        }
    }

    // base change Q → Q(√2), computed in the larger field
    let wide = HeightConfig { minimize_field: false, ..HeightConfig::default() };
    let q0 = Tower::rational();
    for i in 0..100 {
        let x = rand_vec(&mut rng, &q0, None);
        let xl: Vector = x.iter().map(|c| c.lift(&t2)).collect();
        let (h0, h1) = (height_vector(&x, &hc).map_err(|e| e.to_string())?, height_vector(&xl, &wide).map_err(|e| e.to_string())?);
        ensure(h1.degree() == 2, || "base change did not use the quadratic field".into())?;
        let (f0, f1) = (h0.finite_part(), h1.finite_part());
        ensure(powers_equal(&f0.pow, f0.degree, &f1.pow, f1.degree), || format!("vector {i}: {f0:?} vs {f1:?}"))?;
        let (e0, e1) = (h0.enclosure(prec).map_err(|e| e.to_string())?, h1.enclosure(prec).map_err(|e| e.to_string())?);
        ensure(e0.overlaps(&e1) && e1.relative_width() < 1e-20, || format!("vector {i}: {e0:?} vs {e1:?}"))?;
    }

    // Brill–Gordan duality
    for i in 0..100 {
        let n = rng.gen_range(2..=6);
        let l = rng.gen_range(1..n);
        let rows: Vec<Vector> =
            (0..l).map(|_| (0..n).map(|_| Elem::from_q(&q0, &rand_q(&mut rng, 9, 4))).collect()).collect();
        let z = Subspace::span(&q0, n, &rows).map_err(|e| e.to_string())?;
        if z.dim() == 0 || z.dim() == n {
            continue;
        }
        let eq = kernel(&Matrix::from_rows(&rows)).map_err(|e| e.to_string())?;
        let (hz, he) = (height_subspace(&z, &hc).map_err(|e| e.to_string())?, height_subspace(&eq, &hc).map_err(|e| e.to_string())?);
        let (a, b) = (hz.exact_pow().ok_or("no exact path")?, he.exact_pow().ok_or("no exact path")?);
        ensure(powers_equal(a.0, a.1, b.0, b.1), || format!("subspace {i}: H(Z)^2 = {} vs H(Z^⊥)^2 = {}", a.0, b.0))?;
    }
    let s = start.elapsed().as_secs_f64();
    ensure(s < 60.0, || format!("took {s:.1} s"))?;
    Ok(format!("product formula, projective, base change, duality on 100 subspaces, {s:.2} s"))
}

fn c3_suites() -> Outcome {
    let r = run_campaign(&campaign(Op::Suite, 200, (2, 6), (1, None)));
    clean_run(&r, f64::INFINITY)?;
    let ids = ["prod_1", "prod_2", "prod_3", "intersection", "matrix_pm", "matrix_prod", "sum_height", "hf_vs_curly"];
    for id in ids {
        let n = all_verified(&r, &[id])?;
        ensure(n >= 200, || format!("{id}: only {n} certificates"))?;
    }
    // equality case H(F) = √2·𝓗(F) for x₁x₂
    let t = Tower::rational();
    let f = Matrix::from_q(&t, &[vec![q(0, 1), q(1, 2)], vec![q(1, 2), q(0, 1)]]);
    let hc = HeightConfig::default();
    let lhs = height_form_poly(&f, &hc).map_err(|e| e.to_string())?;
    let p = BoundParams { hf: Some(height_gram(&f, &hc).map_err(|e| e.to_string())?), ..Default::default() };
    let c = check("hf_vs_curly", &qbar_core::certify::LogQuantity::height(&lhs), &p, &CertConfig::default())
        .map_err(|e| e.to_string())?;
    ensure(c.verdict == Verdict::Verified && c.slack_log.lo.abs() < 1e-25 && c.slack_log.hi.abs() < 1e-25, || {
        format!(
            "x1x2 equality case not attained: H(F) = {:.6}, √2·𝓗(F) = {:.6}, log slack {:.6} ({:?}); \
             projective 𝓗 of [[0,1/2],[1/2,0]] is √2, and the 2-adic place is strict whenever the diagonal vanishes",
            c.lhs_log.lo.exp(),
            c.rhs_log.lo.exp(),
            c.slack_log.lo,
            c.verdict
        )
    })?;
    Ok(format!("8 families x 200 instances, {} certificates verified; x1x2 tight", r.totals().verified))
}

fn c4_small_zeros() -> Outcome {
    let r = run_campaign(&campaign(Op::Isotropic, 100, (2, 6), (2, None)));
    clean_run(&r, 2_000.0)?;
    let qz = all_verified(&r, &["qz:bound"])?;
    let ze = all_verified(&r, &["zero_eq"])?;
    for inst in &r.instances {
        ensure(inst.checks.get("small_zero_isotropic") == Some(&true), || format!("instance {}: no small zero", inst.id))?;
        ensure(inst.checks.get("isotropic_in_Z") == Some(&true), || format!("instance {}: no zero in Z", inst.id))?;
    }
    Ok(format!("100 instances, qz:bound {qz} and zero_eq {ze} verified"))
}

fn c5_max_isotropic() -> Outcome {
    let r = run_campaign(&campaign(Op::Maxiso, 100, (2, 6), (2, Some(5))));
    clean_run(&r, 10_000.0)?;
    for inst in &r.instances {
        let has = inst.certificates.iter().any(|c| c.bound_id == "vaaler_even" || c.bound_id == "vaaler_odd");
        ensure(has, || format!("instance {}: no vaaler certificate", inst.id))?;
        for k in ["dimension", "totally_isotropic", "inside_Z"] {
            ensure(inst.checks.get(k) == Some(&true), || format!("instance {}: {k}", inst.id))?;
        }
    }
    let v = all_verified(&r, &["vaaler_even", "vaaler_odd"])?;
    let b = all_verified(&r, &["bezout"])?;

    let bytes = std::fs::read(fixture("hyperbolic4.json")).map_err(|e| e.to_string())?;
    let inst = parse_instance(&bytes).and_then(|s| s.build(64)).map_err(|e| e.to_string())?;
    let mut ctx = Ctx::for_space(ConstructionConfig::default(), &inst.space);
    let m = max_isotropic(&inst.space, &mut ctx).map_err(|e| e.to_string())?;
    let t = Tower::rational();
    let want = Subspace::span(&t, 4, &[vec_from_ints(&t, &[1, 0, 0, 0]), vec_from_ints(&t, &[0, 0, 1, 0])]).unwrap();
    ensure(m.v == want, || format!("worked trace: V = {:?}", m.v))?;
    let h = height_subspace(&m.v, &HeightConfig::default()).map_err(|e| e.to_string())?;
    ensure(h.exact_pow().map(|(p, _)| p == &Q::from_integer(1.into())) == Some(true), || "worked trace: H(V) ≠ 1".into())?;
    Ok(format!("100 instances, {v} vaaler + {b} bezout verified; x1x2+x3x4 gives span{{e1,e3}}, H = 1"))
}

fn c6_witt() -> Outcome {
    let mut cfg = campaign(Op::Witt, 50, (2, 6), (1, None));
    cfg.singular_every = 5;
    let r = run_campaign(&cfg);
    clean_run(&r, 15_000.0)?;
    let singular = r.instances.iter().filter(|i| i.output["radical"].as_array().is_some_and(|a| !a.is_empty())).count();
    ensure(singular > 0, || "no singular instance exercised".into())?;
    let n = all_verified(&r, &["witt1", "witt2"])?;
    Ok(format!("50 instances ({singular} singular), {n} witt1/witt2 verified"))
}

fn c7_orthobasis() -> Outcome {
    let r = run_campaign(&campaign(Op::Orthobasis, 100, (2, 6), (1, None)));
    clean_run(&r, f64::INFINITY)?;
    let n = all_verified(&r, &["siegel2"])?;
    ensure(n == 100, || format!("{n} siegel2 certificates"))?;
    Ok("100 instances, pairwise orthogonal, siegel2 verified".into())
}

fn c8_cartan_dieudonne() -> Outcome {
    let r = run_campaign(&campaign(Op::Cd, 100, (2, 5), (1, None)));
    clean_run(&r, 10_000.0)?;
    let mut n = 0;
    for inst in &r.instances {
        for c in inst.certificates.iter().filter(|c| c.bound_id == "cd_bound") {
            ensure(c.caveats.iter().any(|s| s == SURROGATE), || format!("instance {}: cd_bound lacks the surrogate caveat", inst.id))?;
            n += 1;
        }
    }
    all_verified(&r, &["cd_bound"])?;
    let t = Tower::rational();
    let q3 = QuadraticSpace::full(Matrix::from_q(&t, &[
        vec![q(1, 1), q(0, 1), q(0, 1)],
        vec![q(0, 1), q(2, 1), q(0, 1)],
        vec![q(0, 1), q(0, 1), q(-3, 1)],
    ]))
    .map_err(|e| e.to_string())?;
    let mut ctx = Ctx::for_space(ConstructionConfig::default(), &q3);
    let f = cartan_dieudonne(&q3, &Isometry::identity(&q3), &mut ctx).map_err(|e| e.to_string())?;
    ensure(f.is_empty(), || format!("identity factored into {} reflections", f.len()))?;
    Ok(format!("100 isometries, length ≤ 2L-1, exact recomposition, {n} cd_bound verified; identity → []"))
}

fn c9_small_basis() -> Outcome {
    let mut cfg = campaign(Op::Height, 500, (3, 8), (2, None));
    cfg.proper = true;
    let r = run_campaign(&cfg);
    let bad = r.instances.iter().filter(|i| i.status != "ok").count();
    let t = r.tallies.get("siegel3").cloned().unwrap_or_default();
    ensure(bad == 0 && t.verified == 500, || {
        format!("{bad} failed instances; siegel3 {} / {} / {}", t.verified, t.violated, t.inconclusive)
    })?;
    clean_run(&r, f64::INFINITY)?;
    Ok("500 instances, siegel3 verified on all".into())
}

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn qbar(args: &[&str]) -> Result<(i32, Vec<u8>), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_qbar")).args(args).output().map_err(|e| e.to_string())?;
    Ok((out.status.code().unwrap_or(-1), out.stdout))
}

fn c10_determinism() -> Outcome {
    for (op, fmt) in [("maxiso", "json"), ("cd", "csv"), ("witt", "json")] {
        let args = [op, "--campaign", "12", "--seed", "42", "--mask-timing", "--report", fmt];
        let (c1, a) = qbar(&args)?;
        let (c2, b) = qbar(&args)?;
        ensure(c1 == 0 && c2 == 0, || format!("{op}: exit codes {c1}, {c2}"))?;
        ensure(!a.is_empty() && a == b, || format!("{op} {fmt} reports differ"))?;
    }
    let cases: [(&str, &[&str], i32); 6] = [
        ("claims_verified.json", &[], 0),
        ("hyperbolic4.json", &[], 0),
        ("claims_violated.json", &[], 2),
        ("claims_inconclusive.json", &["--prec-start", "64", "--prec-max", "256"], 3),
        ("asymmetric.json", &[], 4),
        ("malformed.json", &[], 4),
    ];
    for (file, extra, want) in cases {
        let path = fixture(file);
        let mut args = vec!["verify", "--input", path.to_str().unwrap()];
        args.extend_from_slice(extra);
        let (code, _) = qbar(&args)?;
        ensure(code == want, || format!("{file}: exit {code}, expected {want}"))?;
    }
    Ok("byte-identical reports; exit codes 0/2/3/4 on fixtures".into())
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("finite-part oracle equivalence", c1_finite_parts),
        ("height engine invariants", c2_height_invariants),
        ("inequality suites", c3_suites),
        ("small zeros", c4_small_zeros),
        ("maximal isotropic subspaces", c5_max_isotropic),
        ("Witt decomposition", c6_witt),
        ("orthogonal bases", c7_orthobasis),
        ("Cartan-Dieudonne factorization", c8_cartan_dieudonne),
        ("small-basis contract", c9_small_basis),
        ("determinism and exit codes", c10_determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let res = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        let s = start.elapsed().as_secs_f64();
        match res {
            Ok(msg) => println!("criterion {:>2} PASS  {name}: {msg} [{s:.1} s]", i + 1),
            Err(msg) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {msg} [{s:.1} s]", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
