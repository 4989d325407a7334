//! Claim files: explicit inequalities checked by the certificate engine.
//!
//! ```json
//! {"tower": [{"name": "i", "square": "-1"}],
//!  "claims": [{"label": "x", "lhs": {"height": ["i", "1"]},
//!              "bound": "qz:bound", "params": {"HF": ["1", "0", "0", "-1"]}}]}
//! ```
//! A claim compares `lhs` against either a catalog bound (`bound` with
//! `params`) or an explicit `rhs` of the form `const^exp`.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::Deserialize;
use serde_json::json;

use qbar_core::arith::parse_q;
use qbar_core::certify::{check, compare, BoundParams, LogQuantity};
use qbar_core::heights::{height_inhom, height_vector, HeightValue};
use qbar_core::linalg::Vector;
use qbar_core::tower::{build_tower, parse_named, Elem, Tower};

use crate::campaign::{CampaignReport, InstanceResult, Op, RunConfig};
use crate::instance::GenSpec;
use crate::CliError;

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClaimFile {
    #[serde(default)]
    pub tower: Vec<GenSpec>,
    pub claims: Vec<Claim>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Claim {
    #[serde(default)]
    pub label: String,
    pub lhs: Side,
    #[serde(default)]
    pub bound: Option<String>,
    #[serde(default)]
    pub params: BTreeMap<String, serde_json::Value>,
    #[serde(default)]
    pub rhs: Option<Side>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum Side {
    Height(Vec<String>),
    Inhom(Vec<String>),
    Const { value: String, #[serde(default)] exp: Option<String> },
}

struct Env {
    tower: Arc<Tower>,
    names: Vec<(String, String)>,
    values: Vec<Elem>,
}

impl Env {
    fn vector(&self, v: &[String]) -> Result<Vector, CliError> {
        v.iter()
            .map(|s| parse_named(&self.tower, &self.names, &self.values, s).map_err(|e| CliError::Schema(e.to_string())))
            .collect()
    }

    fn side(&self, s: &Side, run: &RunConfig) -> Result<LogQuantity, CliError> {
        let hc = run.construction().heights;
        Ok(match s {
            Side::Height(v) => LogQuantity::height(&height_vector(&self.vector(v)?, &hc)?),
            Side::Inhom(v) => LogQuantity::height(&height_inhom(&self.vector(v)?, &hc)?),
            Side::Const { value, exp } => {
                let c = parse_q(value).ok_or_else(|| CliError::Schema(format!("bad constant {value:?}")))?;
                let e = match exp {
                    None => parse_q("1").unwrap(),
                    Some(e) => parse_q(e).ok_or_else(|| CliError::Schema(format!("bad exponent {e:?}")))?,
                };
                LogQuantity::one().cpow(c, e)
            }
        })
    }

    fn params(&self, p: &BTreeMap<String, serde_json::Value>, run: &RunConfig) -> Result<BoundParams, CliError> {
        let hc = run.construction().heights;
        let mut out = BoundParams::default();
        for (k, v) in p {
            let int = || v.as_u64().ok_or_else(|| CliError::Schema(format!("params.{k}: expected an integer")));
            let height = || -> Result<HeightValue, CliError> {
                let items: Vec<String> = serde_json::from_value(v.clone())
                    .map_err(|_| CliError::Schema(format!("params.{k}: expected a coordinate list")))?;
                Ok(height_vector(&self.vector(&items)?, &hc)?)
            };
            match k.as_str() {
                "N" => out.n = Some(int()?),
                "L" => out.l = Some(int()?),
                "k" => out.k = Some(int()?),
                "r" => out.r = Some(int()?),
                "HF" => out.hf = Some(height()?),
                "HZ" => out.hz = Some(height()?),
                "HW" => out.hw = Some(height()?),
                "HU" => out.hu = Some(height()?),
                "Hx" => out.hx = Some(height()?),
                "Hsigma" => out.hsigma = Some(height()?),
                "HA" => out.ha = Some(height()?),
                "HB" => out.hb = Some(height()?),
                _ => return Err(CliError::Schema(format!("params: unknown key {k:?}"))),
            }
        }
        Ok(out)
    }
}

pub fn parse_claims(bytes: &[u8]) -> Result<ClaimFile, CliError> {
    let text = std::str::from_utf8(bytes).map_err(|e| CliError::Schema(format!("not UTF-8: {e}")))?;
    serde_json::from_str(text).map_err(|e| CliError::Schema(format!("line {} column {}: {e}", e.line(), e.column())))
}

pub fn verify_claims(file: &ClaimFile, run: &RunConfig) -> Result<CampaignReport, CliError> {
    let names: Vec<(String, String)> = file.tower.iter().map(|g| (g.name.clone(), g.square.clone())).collect();
    let (tower, values) =
        build_tower(&names, true, run.degree_cap).map_err(|e| CliError::BadTowerExpr(e.to_string()))?;
    let env = Env { tower, names, values };
    let mut results = Vec::new();
    for (i, c) in file.claims.iter().enumerate() {
        let lhs = env.side(&c.lhs, run)?;
        let cc = run.construction().cert;
        let cert = match (&c.bound, &c.rhs) {
            (Some(id), None) => check(id, &lhs, &env.params(&c.params, run)?, &cc)?,
            (None, Some(r)) => compare("claim", &lhs, &env.side(r, run)?, BTreeMap::new(), &cc),
            _ => return Err(CliError::Schema(format!("claims[{i}]: give exactly one of bound or rhs"))),
        };
        let mut r = InstanceResult::new_claim(i, run.seed);
        r.output = json!({"label": c.label});
        r.certificates.push(cert.with_site(c.label.clone()));
        results.push(r);
    }
    let config = json!({"claims": file.claims.len(), "run": run, "op": Op::Suite.name()});
    Ok(CampaignReport::from_results(config, run.seed, results, 0.0))
}
