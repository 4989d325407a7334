//! Running constructions on instances, seeded campaigns and reports.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use qbar_core::certify::{inequality_suite, BoundCertificate, CertConfig, SuiteInstance, Verdict};
use qbar_core::heights::HeightConfig;
use qbar_core::isometry::{cartan_dieudonne, compose_all, random_isometry, Isometry};
use qbar_core::linalg::{vec_to_string, Subspace, Vector};
use qbar_core::quadspace::{
    isotropic_in_space, max_isotropic, orthogonal_basis, pairwise_orthogonal, small_zero_free, totally_isotropic,
    witt_decompose, ConstructionConfig, Ctx,
};
use qbar_core::tower::Tower;

use crate::instance::{random_instance, Instance, RandomSpec};
use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Op {
    Height,
    Isotropic,
    Maxiso,
    Witt,
    Orthobasis,
    Cd,
    Suite,
}

impl Op {
    pub const CONSTRUCTIONS: [Op; 6] = [Op::Height, Op::Isotropic, Op::Maxiso, Op::Witt, Op::Orthobasis, Op::Cd];

    pub fn name(self) -> &'static str {
        match self {
            Op::Height => "height",
            Op::Isotropic => "isotropic",
            Op::Maxiso => "maxiso",
            Op::Witt => "witt",
            Op::Orthobasis => "orthobasis",
            Op::Cd => "cd",
            Op::Suite => "suite",
        }
    }
}

/// Settings shared by every run.
#[derive(Clone, Debug, Serialize)]
pub struct RunConfig {
    pub seed: u64,
    pub trials: usize,
    pub prec_start: u32,
    pub prec_max: u32,
    pub degree_cap: usize,
    pub trace_bounds: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig { seed: 0, trials: 8, prec_start: 128, prec_max: 4096, degree_cap: 64, trace_bounds: false }
    }
}

impl RunConfig {
    pub fn construction(&self) -> ConstructionConfig {
        ConstructionConfig {
            heights: HeightConfig { trials: self.trials, seed: self.seed ^ 0x5eed, ..HeightConfig::default() },
            cert: CertConfig { prec_start: self.prec_start, prec_max: self.prec_max },
            trace: self.trace_bounds,
            literal_orthobasis: false,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CampaignConfig {
    pub op: Op,
    pub instances: usize,
    pub n_min: usize,
    pub n_max: usize,
    pub l_min: usize,
    /// Upper bound on `L`; `None` means `N`.
    pub l_max: Option<usize>,
    /// Keep `L < N` (small-basis campaigns).
    pub proper: bool,
    pub bound: i64,
    /// Every `k`-th instance is singular (0: none).
    pub singular_every: usize,
    pub run: RunConfig,
}

impl CampaignConfig {
    pub fn new(op: Op, instances: usize, run: RunConfig) -> CampaignConfig {
        CampaignConfig {
            op,
            instances,
            n_min: 2,
            n_max: 6,
            l_min: 1,
            l_max: None,
            proper: false,
            bound: 10,
            singular_every: 0,
            run,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct InstanceResult {
    pub id: usize,
    pub seed: u64,
    pub n: usize,
    pub l: usize,
    pub op: Op,
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub output: Value,
    /// Exact algebraic checks on the output.
    pub checks: BTreeMap<String, bool>,
    pub certificates: Vec<BoundCertificate>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    #[serde(skip)]
    pub elapsed_ms: f64,
}

impl InstanceResult {
    pub fn new_claim(id: usize, seed: u64) -> InstanceResult {
        InstanceResult::new(id, seed, 0, 0, Op::Suite)
    }

    fn new(id: usize, seed: u64, n: usize, l: usize, op: Op) -> InstanceResult {
        InstanceResult {
            id,
            seed,
            n,
            l,
            op,
            status: "ok".into(),
            error: None,
            output: Value::Null,
            checks: BTreeMap::new(),
            certificates: Vec::new(),
            notes: Vec::new(),
            elapsed_ms: 0.0,
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, PartialEq, Eq)]
pub struct Tally {
    pub verified: usize,
    pub violated: usize,
    pub inconclusive: usize,
}

impl Tally {
    fn add(&mut self, v: Verdict) {
        match v {
            Verdict::Verified => self.verified += 1,
            Verdict::Violated => self.violated += 1,
            Verdict::Inconclusive => self.inconclusive += 1,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SlackStats {
    pub count: usize,
    pub min: f64,
    pub mean: f64,
    pub max: f64,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Timing {
    pub total_ms: f64,
    pub max_instance_ms: f64,
    pub mean_instance_ms: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CampaignReport {
    pub config: Value,
    pub seed: u64,
    pub instances: Vec<InstanceResult>,
    pub tallies: BTreeMap<String, Tally>,
    /// Proof-internal inequalities (trace mode); informative only.
    pub trace_tallies: BTreeMap<String, Tally>,
    pub slack: BTreeMap<String, SlackStats>,
    /// Instances whose construction failed.
    pub failures: usize,
    /// Exact output checks that failed.
    pub check_failures: usize,
    pub timing: Timing,
}

fn is_trace(c: &BoundCertificate) -> bool {
    c.caveats.iter().any(|x| x == "trace")
}

impl CampaignReport {
    pub fn from_results(config: Value, seed: u64, instances: Vec<InstanceResult>, total_ms: f64) -> CampaignReport {
        let mut tallies: BTreeMap<String, Tally> = BTreeMap::new();
        let mut trace_tallies: BTreeMap<String, Tally> = BTreeMap::new();
        let mut slacks: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for r in &instances {
            for c in &r.certificates {
                if is_trace(c) {
                    trace_tallies.entry(c.bound_id.clone()).or_default().add(c.verdict);
                } else {
                    tallies.entry(c.bound_id.clone()).or_default().add(c.verdict);
                    slacks.entry(c.bound_id.clone()).or_default().push(c.slack_log.lo);
                }
            }
        }
        let slack = slacks
            .into_iter()
            .map(|(k, v)| {
                let count = v.len();
                let min = v.iter().cloned().fold(f64::INFINITY, f64::min);
                let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let mean = v.iter().sum::<f64>() / count as f64;
                (k, SlackStats { count, min, mean, max })
            })
            .collect();
        let failures = instances.iter().filter(|r| r.status != "ok").count();
        let check_failures = instances.iter().map(|r| r.checks.values().filter(|ok| !**ok).count()).sum();
        let max_instance_ms = instances.iter().map(|r| r.elapsed_ms).fold(0.0, f64::max);
        let mean_instance_ms =
            if instances.is_empty() { 0.0 } else { instances.iter().map(|r| r.elapsed_ms).sum::<f64>() / instances.len() as f64 };
        CampaignReport {
            config,
            seed,
            instances,
            tallies,
            trace_tallies,
            slack,
            failures,
            check_failures,
            timing: Timing { total_ms, max_instance_ms, mean_instance_ms },
        }
    }

    pub fn totals(&self) -> Tally {
        let mut t = Tally::default();
        for v in self.tallies.values() {
            t.verified += v.verified;
            t.violated += v.violated;
            t.inconclusive += v.inconclusive;
        }
        t
    }

    /// 0 all verified; 2 any violated; 3 any inconclusive or failed.
    pub fn exit_code(&self) -> i32 {
        let t = self.totals();
        if t.violated > 0 || self.check_failures > 0 {
            2
        } else if t.inconclusive > 0 || self.failures > 0 {
            3
        } else {
            0
        }
    }

    pub fn mask_timing(&mut self) {
        self.timing = Timing::default();
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("instance_id,bound_id,lhs_hi,rhs_lo,slack,verdict,caveats\n");
        for r in &self.instances {
            for c in &r.certificates {
                let cav = c.caveats.join("; ").replace('"', "\"\"");
                out.push_str(&format!(
                    "{},{},{:e},{:e},{:e},{},\"{}\"\n",
                    r.id, c.bound_id, c.lhs_log.hi, c.rhs_log.lo, c.slack_log.lo, c.verdict, cav
                ));
            }
        }
        out
    }

    pub fn summary(&self) -> String {
        let t = self.totals();
        let mut s = format!(
            "instances: {}  failures: {}  check failures: {}\ncertificates: {} verified, {} violated, {} inconclusive\n",
            self.instances.len(),
            self.failures,
            self.check_failures,
            t.verified,
            t.violated,
            t.inconclusive
        );
        for (id, v) in &self.tallies {
            s.push_str(&format!("  {id:<14} {:>6} / {:>3} / {:>3}\n", v.verified, v.violated, v.inconclusive));
        }
        s
    }
}

fn subspace_json(z: &Subspace) -> Value {
    json!(z.basis().iter().map(|v| vec_to_string(v)).collect::<Vec<_>>())
}

fn tower_json(t: &Arc<Tower>) -> Value {
    let names = t.names();
    let gens: Vec<Value> =
        (0..t.num_gens()).map(|i| json!({"name": names[i], "square": t.square_elem(i).to_string()})).collect();
    json!(gens)
}

fn spans_z(q: &qbar_core::quadspace::QuadraticSpace, vs: &[Vector]) -> bool {
    if vs.len() != q.dim() {
        return false;
    }
    let t = qbar_core::linalg::common_tower(&q.tower(), vs.iter().flatten());
    match Subspace::span(&t, q.n(), vs) {
        Ok(s) => s.dim() == q.dim() && s.contains_subspace(&q.subspace().lift(&t)),
        Err(_) => false,
    }
}

/// Runs one construction on a parsed instance.
pub fn run_op(op: Op, inst: &Instance, run: &RunConfig, id: usize, seed: u64) -> InstanceResult {
    let q = &inst.space;
    let mut res = InstanceResult::new(id, seed, q.n(), q.dim(), op);
    let start = Instant::now();
    let mut ctx = Ctx::for_space(run.construction(), q);
    let outcome = run_op_inner(op, inst, &mut ctx, &mut res, seed);
    if let Err(e) = outcome {
        res.status = "error".into();
        res.error = Some(e.to_string());
    }
    res.certificates.extend(ctx.certificates);
    res.notes.extend(ctx.notes);
    res.elapsed_ms = start.elapsed().as_secs_f64() * 1e3;
    res
}

fn run_op_inner(op: Op, inst: &Instance, ctx: &mut Ctx, res: &mut InstanceResult, seed: u64) -> qbar_core::Result<()> {
    let q = &inst.space;
    let hc = ctx.cfg.heights.clone();
    match op {
        Op::Height => {
            let sb = ctx.small_basis(q.subspace())?;
            let hf = q.gram_height(&hc).ok();
            res.output = json!({
                "H_Z": sb.subspace_height.approx(),
                "H_F": hf.map(|h| h.approx()),
                "small_basis": sb.vectors.iter().map(|v| vec_to_string(v)).collect::<Vec<_>>(),
                "heights": sb.heights.iter().map(|h| h.approx()).collect::<Vec<_>>(),
            });
            res.checks.insert("basis_spans_Z".into(), spans_z(q, &sb.vectors));
            ctx.certificates.push(sb.certificate.clone().with_site("small_basis"));
        }
        Op::Isotropic => {
            let mut out = serde_json::Map::new();
            if q.n() >= 2 && !q.gram().is_zero() {
                let x = small_zero_free(q.gram(), ctx)?;
                res.checks.insert("small_zero_isotropic".into(), q.quad(&x).is_zero() && x.iter().any(|c| !c.is_zero()));
                out.insert("small_zero".into(), json!(vec_to_string(&x)));
            }
            if q.dim() >= 2 && q.is_regular() {
                let y = isotropic_in_space(q, ctx)?;
                res.checks.insert("isotropic_in_Z".into(), q.quad(&y).is_zero() && q.subspace().contains(&y));
                out.insert("isotropic".into(), json!(vec_to_string(&y)));
            }
            out.insert("tower".into(), tower_json(&ctx.tower));
            res.output = Value::Object(out);
        }
        Op::Maxiso => {
            let m = max_isotropic(q, ctx)?;
            res.checks.insert("dimension".into(), m.v.dim() == q.dim() / 2);
            res.checks.insert("totally_isotropic".into(), totally_isotropic(q, &m.v));
            res.checks.insert("inside_Z".into(), q.subspace().contains_subspace(&m.v));
            res.output = json!({"V": subspace_json(&m.v), "levels": m.levels, "tower": tower_json(&ctx.tower)});
        }
        Op::Witt => {
            let w = witt_decompose(q, ctx)?;
            res.checks.insert("decomposition".into(), w.verify(q)?);
            let regular_dim = q.dim() - w.radical.dim();
            res.checks.insert("plane_count".into(), w.planes.len() == regular_dim / 2);
            res.output = json!({
                "radical": subspace_json(&w.radical),
                "planes": w.planes.iter().map(|h| [vec_to_string(&h.x), vec_to_string(&h.y)]).collect::<Vec<_>>(),
                "anisotropic_line": w.anisotropic_line.as_ref().map(|y| vec_to_string(y)),
                "tower": tower_json(&ctx.tower),
            });
        }
        Op::Orthobasis => {
            let b = orthogonal_basis(q, ctx)?;
            res.checks.insert("pairwise_orthogonal".into(), pairwise_orthogonal(q, &b));
            res.checks.insert("basis_spans_Z".into(), spans_z(q, &b));
            res.output = json!({"basis": b.iter().map(|v| vec_to_string(v)).collect::<Vec<_>>()});
        }
        Op::Cd => {
            let l = q.dim();
            let (sigma, generated) = match &inst.isometry {
                Some(a) => (Isometry::new(q, a.clone())?, None),
                None => {
                    let len = 1 + (seed as usize) % (2 * l - 1).max(1);
                    let (s, rs) = random_isometry(q, len, seed)?;
                    (s, Some(rs.len()))
                }
            };
            let f = cartan_dieudonne(q, &sigma, ctx)?;
            let back = compose_all(q, &f)?;
            res.checks.insert("length".into(), f.len() < 2 * l.max(1));
            res.checks.insert("recomposition".into(), back.agrees_on(&sigma, q.subspace()));
            res.output = json!({
                "generated_length": generated,
                "reflections": f.iter().map(|r| vec_to_string(&r.x)).collect::<Vec<_>>(),
            });
        }
        Op::Suite => {
            let n = q.n().max(2);
            let si = SuiteInstance::random(&inst.tower, n, seed);
            let certs = inequality_suite(&si, &hc, &ctx.cfg.cert)?;
            ctx.certificates.extend(certs);
            res.output = json!({"n": n});
        }
    }
    Ok(())
}

/// Per-instance seed derived from the campaign seed.
pub fn instance_seed(seed: u64, i: usize) -> u64 {
    let mut z = seed.wrapping_add((i as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn draw_shape(cfg: &CampaignConfig, seed: u64) -> (usize, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5ba9e);
    let n = rng.gen_range(cfg.n_min..=cfg.n_max.max(cfg.n_min));
    let mut lmax = cfg.l_max.unwrap_or(n).min(n);
    if cfg.proper {
        lmax = lmax.min(n - 1);
    }
    let lmin = cfg.l_min.min(lmax).max(1);
    (n, rng.gen_range(lmin..=lmax))
}

pub fn campaign_instance(cfg: &CampaignConfig, i: usize) -> Result<(Instance, u64), CliError> {
    let seed = instance_seed(cfg.run.seed, i);
    let (n, l) = draw_shape(cfg, seed);
    let singular = cfg.singular_every > 0 && i % cfg.singular_every == cfg.singular_every - 1;
    let spec = random_instance(&RandomSpec { n, l, bound: cfg.bound, singular }, seed)?;
    Ok((spec.build(cfg.run.degree_cap)?, seed))
}

pub fn run_campaign(cfg: &CampaignConfig) -> CampaignReport {
    let start = Instant::now();
    let results: Vec<InstanceResult> = (0..cfg.instances)
        .into_par_iter()
        .map(|i| match campaign_instance(cfg, i) {
            Ok((inst, seed)) => run_op(cfg.op, &inst, &cfg.run, i, seed),
            Err(e) => {
                let mut r = InstanceResult::new(i, instance_seed(cfg.run.seed, i), 0, 0, cfg.op);
                r.status = "error".into();
                r.error = Some(e.to_string());
                r
            }
        })
        .collect();
    let total = start.elapsed().as_secs_f64() * 1e3;
    CampaignReport::from_results(serde_json::to_value(cfg).unwrap(), cfg.run.seed, results, total)
}

/// Runs the given constructions on one instance.
pub fn run_instance(ops: &[Op], inst: &Instance, run: &RunConfig) -> CampaignReport {
    let start = Instant::now();
    let results: Vec<InstanceResult> = ops
        .iter()
        .enumerate()
        .filter(|(_, op)| applicable(**op, inst))
        .map(|(i, op)| run_op(*op, inst, run, i, run.seed))
        .collect();
    let total = start.elapsed().as_secs_f64() * 1e3;
    let config = json!({"ops": ops.iter().map(|o| o.name()).collect::<Vec<_>>(), "run": run, "instance": inst.spec});
    CampaignReport::from_results(config, run.seed, results, total)
}

fn applicable(op: Op, inst: &Instance) -> bool {
    let q = &inst.space;
    match op {
        Op::Maxiso | Op::Cd => q.is_regular() && q.dim() > 0,
        Op::Isotropic => q.n() >= 2,
        _ => true,
    }
}
