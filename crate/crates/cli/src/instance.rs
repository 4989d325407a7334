//! Instance files and the seeded instance generator.

use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use qbar_core::linalg::{Matrix, Subspace, Vector};
use qbar_core::quadspace::QuadraticSpace;
use qbar_core::tower::{build_tower, parse_named, Elem, Tower};

use crate::CliError;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenSpec {
    pub name: String,
    pub square: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SubspaceSpec {
    Keyword(String),
    Basis(Vec<Vec<String>>),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceSpec {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(default)]
    pub tower: Vec<GenSpec>,
    pub form: Vec<Vec<String>>,
    #[serde(default = "full")]
    pub subspace: SubspaceSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub isometry: Option<Vec<Vec<String>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

fn full() -> SubspaceSpec {
    SubspaceSpec::Keyword("full".into())
}

/// A parsed instance with its exact objects.
#[derive(Clone, Debug)]
pub struct Instance {
    pub spec: InstanceSpec,
    pub tower: Arc<Tower>,
    pub space: QuadraticSpace,
    pub isometry: Option<Matrix>,
}

pub fn parse_instance(bytes: &[u8]) -> Result<InstanceSpec, CliError> {
    let text = std::str::from_utf8(bytes).map_err(|e| CliError::Schema(format!("not UTF-8: {e}")))?;
    let spec: InstanceSpec = serde_json::from_str(text)
        .map_err(|e| CliError::Schema(format!("line {} column {}: {e}", e.line(), e.column())))?;
    validate_shape(&spec)?;
    Ok(spec)
}

fn validate_shape(spec: &InstanceSpec) -> Result<(), CliError> {
    let n = spec.n;
    if n == 0 {
        return Err(CliError::Schema("N must be positive".into()));
    }
    check_square("form", &spec.form, n)?;
    if let Some(a) = &spec.isometry {
        check_square("isometry", a, n)?;
    }
    match &spec.subspace {
        SubspaceSpec::Keyword(k) if k == "full" => {}
        SubspaceSpec::Keyword(k) => return Err(CliError::Schema(format!("subspace: unknown keyword {k:?}"))),
        SubspaceSpec::Basis(b) => {
            if b.is_empty() {
                return Err(CliError::Schema("subspace: empty basis".into()));
            }
            for (i, v) in b.iter().enumerate() {
                if v.len() != n {
                    return Err(CliError::Schema(format!("subspace[{i}]: expected {n} entries, found {}", v.len())));
                }
            }
        }
    }
    Ok(())
}

fn check_square(field: &str, m: &[Vec<String>], n: usize) -> Result<(), CliError> {
    if m.len() != n {
        return Err(CliError::Schema(format!("{field}: expected {n} rows, found {}", m.len())));
    }
    for (i, r) in m.iter().enumerate() {
        if r.len() != n {
            return Err(CliError::Schema(format!("{field}[{i}]: expected {n} entries, found {}", r.len())));
        }
    }
    Ok(())
}

impl InstanceSpec {
    pub fn build(&self, degree_cap: usize) -> Result<Instance, CliError> {
        validate_shape(self)?;
        let names: Vec<(String, String)> = self.tower.iter().map(|g| (g.name.clone(), g.square.clone())).collect();
        let (tower, values) =
            build_tower(&names, true, degree_cap).map_err(|e| CliError::BadTowerExpr(e.to_string()))?;
        let parse = |field: &str, i: usize, j: usize, s: &str| -> Result<Elem, CliError> {
            parse_named(&tower, &names, &values, s).map_err(|e| CliError::Schema(format!("{field}[{i}][{j}]: {e}")))
        };
        let n = self.n;
        let mut rows: Vec<Vector> = Vec::with_capacity(n);
        for (i, r) in self.form.iter().enumerate() {
            rows.push(r.iter().enumerate().map(|(j, s)| parse("form", i, j, s)).collect::<Result<_, _>>()?);
        }
        for i in 0..n {
            for j in 0..i {
                if rows[i][j] != rows[j][i] {
                    return Err(CliError::AsymmetricGram { row: i, col: j });
                }
            }
        }
        let gram = Matrix::from_rows(&rows);
        let z = match &self.subspace {
            SubspaceSpec::Keyword(_) => Subspace::full(&tower, n),
            SubspaceSpec::Basis(b) => {
                let mut vs = Vec::new();
                for (i, v) in b.iter().enumerate() {
                    vs.push(v.iter().enumerate().map(|(j, s)| parse("subspace", i, j, s)).collect::<Result<Vector, _>>()?);
                }
                let z = Subspace::span(&tower, n, &vs)?;
                if z.dim() != vs.len() {
                    return Err(CliError::Schema("subspace: basis vectors are linearly dependent".into()));
                }
                z
            }
        };
        let isometry = match &self.isometry {
            None => None,
            Some(a) => {
                let mut rs = Vec::new();
                for (i, r) in a.iter().enumerate() {
                    rs.push(r.iter().enumerate().map(|(j, s)| parse("isometry", i, j, s)).collect::<Result<Vector, _>>()?);
                }
                Some(Matrix::from_rows(&rs))
            }
        };
        let space = QuadraticSpace::new(gram, z)?;
        Ok(Instance { spec: self.clone(), tower, space, isometry })
    }
}

/// Parameters of the random generator.
#[derive(Clone, Debug, Serialize)]
pub struct RandomSpec {
    pub n: usize,
    pub l: usize,
    /// Bound on numerators, denominators and subspace entries.
    pub bound: i64,
    /// Produce a singular space instead of a regular one.
    pub singular: bool,
}

fn rand_q(rng: &mut ChaCha8Rng, b: i64) -> BigRational {
    let num: i64 = rng.gen_range(-b..=b);
    let den: i64 = rng.gen_range(1..=b);
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// A seeded random instance; regular (or, on request, singular) by resampling.
pub fn random_instance(cfg: &RandomSpec, seed: u64) -> Result<InstanceSpec, CliError> {
    let (n, l, b) = (cfg.n, cfg.l, cfg.bound.max(1));
    if l == 0 || l > n {
        return Err(CliError::Schema(format!("need 1 <= L <= N, got L = {l}, N = {n}")));
    }
    if cfg.singular && l < 1 {
        return Err(CliError::Schema("singular instances need L >= 1".into()));
    }
    let t = Tower::rational();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..10_000 {
        let mut g = vec![vec![BigRational::from_integer(0.into()); n]; n];
        if cfg.singular {
            // PᵀDP with some zero diagonal entries of D
            let p: Vec<Vec<i64>> = (0..n).map(|_| (0..n).map(|_| rng.gen_range(-2..=2)).collect()).collect();
            let zeros = rng.gen_range(1..=n.min(2));
            let d: Vec<BigRational> = (0..n).map(|i| if i < zeros { BigRational::from_integer(0.into()) } else { rand_q(&mut rng, b) }).collect();
            for i in 0..n {
                for j in 0..n {
                    let mut s = BigRational::from_integer(0.into());
                    for k in 0..n {
                        s += &d[k] * BigRational::from_integer((p[k][i] * p[k][j]).into());
                    }
                    g[i][j] = s;
                }
            }
        } else {
            for i in 0..n {
                for j in i..n {
                    let v = rand_q(&mut rng, b);
                    g[i][j] = v.clone();
                    g[j][i] = v;
                }
            }
        }
        let basis: Option<Vec<Vec<i64>>> = (l < n).then(|| (0..l).map(|_| (0..n).map(|_| rng.gen_range(-b..=b)).collect()).collect());
        let gram = Matrix::from_q(&t, &g);
        let z = match &basis {
            None => Subspace::full(&t, n),
            Some(bs) => {
                let vs: Vec<Vector> = bs.iter().map(|r| r.iter().map(|&x| Elem::from_int(&t, x)).collect()).collect();
                let z = Subspace::span(&t, n, &vs)?;
                if z.dim() != l {
                    continue;
                }
                z
            }
        };
        if gram.is_zero() {
            continue;
        }
        let q = QuadraticSpace::new(gram, z)?;
        if q.is_regular() == cfg.singular {
            continue;
        }
        if cfg.singular && q.is_null() && l > 1 {
            continue;
        }
        return Ok(InstanceSpec {
            n,
            tower: Vec::new(),
            form: g.iter().map(|r| r.iter().map(|x| x.to_string()).collect()).collect(),
            subspace: match basis {
                None => full(),
                Some(bs) => SubspaceSpec::Basis(bs.iter().map(|r| r.iter().map(|x| x.to_string()).collect()).collect()),
            },
            isometry: None,
            seed: Some(seed),
        });
    }
    Err(CliError::Schema("random generator failed to meet the regularity requirement".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_examples() {
        let s = parse_instance(br#"{"N":2,"form":[["1","0"],["0","-1"]],"subspace":"full"}"#).unwrap();
        let inst = s.build(64).unwrap();
        assert!(inst.space.is_regular());
        assert_eq!(inst.space.gram().get(1, 1).to_string(), "-1");

        let s = parse_instance(br#"{"N":2,"tower":[{"name":"g1","square":"2"}],"form":[["g1","0"],["0","1"]]}"#).unwrap();
        let inst = s.build(64).unwrap();
        assert_eq!(inst.tower.degree(), 2);

        let s = parse_instance(br#"{"N":2,"form":[["1","2"],["3","1"]]}"#).unwrap();
        assert!(matches!(s.build(64), Err(CliError::AsymmetricGram { row: 1, col: 0 })));

        assert!(matches!(parse_instance(br#"{"N":2,"form":[["1"]]}"#), Err(CliError::Schema(_))));
        let s = parse_instance(br#"{"N":1,"tower":[{"name":"g","square":"h+"}],"form":[["1"]]}"#).unwrap();
        assert!(matches!(s.build(64), Err(CliError::BadTowerExpr(_))));
    }

    #[test]
    fn random_is_reproducible() {
        let cfg = RandomSpec { n: 4, l: 4, bound: 10, singular: false };
        let a = random_instance(&cfg, 1).unwrap();
        assert_eq!(a, random_instance(&cfg, 1).unwrap());
        let pinned = [
            ["-2/3", "-7/8", "0", "9/10"],
            ["-7/8", "-3", "-3/2", "-5/2"],
            ["0", "-3/2", "2", "1/4"],
            ["9/10", "-5/2", "1/4", "5"],
        ];
        assert_eq!(a.form, pinned.map(|r| r.map(String::from).to_vec()).to_vec());
        assert_eq!(a.subspace, full());
        assert!(a.build(64).unwrap().space.is_regular());
        let bad = RandomSpec { l: 0, ..cfg.clone() };
        assert!(random_instance(&bad, 1).is_err());
        let sing = RandomSpec { n: 3, l: 2, bound: 5, singular: true };
        assert!(!random_instance(&sing, 7).unwrap().build(64).unwrap().space.is_regular());
    }
}
