//! Input distributions: matching databases and theta-dense databases.
//!
//! Every generator is a pure function of its spec. Relation `j` draws from
//! its own ChaCha stream (`stream = j`) of the generator seed, so relations can
//! be generated independently and in any order.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rand::seq::index;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bounds::InstanceSchema;
use crate::query::Query;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Distribution {
    Matching,
    /// Exactly `floor(theta n^r)` tuples, without replacement.
    Dense,
    /// Every tuple present independently with probability `theta`.
    DenseBernoulli,
    /// Loaded from files.
    External,
}

impl Distribution {
    pub fn is_dense(self) -> bool {
        matches!(self, Distribution::Dense | Distribution::DenseBernoulli)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Relation {
    pub atom: String,
    pub arity: usize,
    /// Sorted, distinct.
    pub tuples: Vec<Vec<u64>>,
}

impl Relation {
    pub fn new(atom: impl Into<String>, arity: usize, tuples: Vec<Vec<u64>>) -> Result<Self> {
        let atom = atom.into();
        if let Some(t) = tuples.iter().find(|t| t.len() != arity) {
            return Err(Error::InstanceMismatch(format!(
                "{atom}: tuple {t:?} does not have arity {arity}"
            )));
        }
        let set: BTreeSet<Vec<u64>> = tuples.into_iter().collect();
        Ok(Relation {
            atom,
            arity,
            tuples: set.into_iter().collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    /// Every attribute value occurs at most once per column.
    pub fn is_matching(&self) -> bool {
        (0..self.arity).all(|i| {
            let mut seen = BTreeSet::new();
            self.tuples.iter().all(|t| seen.insert(t[i]))
        })
    }

    /// CSV with a `# atom=S1 arity=2 n=8` header line.
    pub fn to_csv(&self, n: u64) -> String {
        let mut out = format!("# atom={} arity={} n={n}\n", self.atom, self.arity);
        for t in &self.tuples {
            let row: Vec<String> = t.iter().map(u64::to_string).collect();
            let _ = writeln!(out, "{}", row.join(","));
        }
        out
    }

    /// Parses [`Relation::to_csv`] output; returns the relation and `n`.
    pub fn from_csv(text: &str) -> Result<(Self, u64)> {
        let mut lines = text.lines().enumerate();
        let header = lines
            .by_ref()
            .find(|(_, l)| !l.trim().is_empty())
            .ok_or_else(|| Error::Parse {
                line: 1,
                msg: "empty relation file".into(),
            })?;
        let head = header
            .1
            .trim()
            .strip_prefix('#')
            .ok_or_else(|| Error::Parse {
                line: header.0 + 1,
                msg: "expected '# atom=.. arity=.. n=..' header".into(),
            })?;
        let (mut atom, mut arity, mut n) = (None, None, None);
        for field in head.split_whitespace() {
            match field.split_once('=') {
                Some(("atom", v)) => atom = Some(v.to_string()),
                Some(("arity", v)) => arity = v.parse::<usize>().ok(),
                Some(("n", v)) => n = v.parse::<u64>().ok(),
                _ => {}
            }
        }
        let missing = |what: &str| Error::Parse {
            line: header.0 + 1,
            msg: format!("header lacks a valid {what}"),
        };
        let atom = atom.ok_or_else(|| missing("atom"))?;
        let arity = arity.ok_or_else(|| missing("arity"))?;
        let n = n.ok_or_else(|| missing("n"))?;
        let mut tuples = Vec::new();
        for (i, line) in lines {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let t: std::result::Result<Vec<u64>, _> =
                line.split(',').map(|v| v.trim().parse::<u64>()).collect();
            let t = t.map_err(|e| Error::Parse {
                line: i + 1,
                msg: e.to_string(),
            })?;
            if t.len() != arity || t.iter().any(|&v| v >= n) {
                return Err(Error::Parse {
                    line: i + 1,
                    msg: format!("expected {arity} values in [0,{n})"),
                });
            }
            tuples.push(t);
        }
        Ok((Relation::new(atom, arity, tuples)?, n))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatabaseInstance {
    pub n: u64,
    /// One relation per query atom, in atom order.
    pub relations: Vec<Relation>,
    pub distribution: Distribution,
    pub seed: u64,
}

impl DatabaseInstance {
    /// Checks relation names, arities and the value range against `q`.
    pub fn check(&self, q: &Query) -> Result<()> {
        if self.relations.len() != q.l() {
            return Err(Error::InstanceMismatch(format!(
                "{} relations for {} atoms",
                self.relations.len(),
                q.l()
            )));
        }
        for (rel, atom) in self.relations.iter().zip(q.atoms()) {
            if rel.atom != atom.name || rel.arity != atom.arity() {
                return Err(Error::InstanceMismatch(format!(
                    "relation {}/{} does not match atom {}/{}",
                    rel.atom,
                    rel.arity,
                    atom.name,
                    atom.arity()
                )));
            }
            if rel.tuples.iter().flatten().any(|&v| v >= self.n) {
                return Err(Error::InstanceMismatch(format!(
                    "{}: value outside [0,{})",
                    rel.atom, self.n
                )));
            }
        }
        Ok(())
    }

    pub fn cardinalities(&self) -> Vec<u64> {
        self.relations.iter().map(|r| r.len() as u64).collect()
    }

    /// Schema for planning. Empty relations are planned as if they held one
    /// tuple; the join output is empty either way.
    pub fn planning_schema(&self, q: &Query) -> Result<InstanceSchema> {
        let cards = self.cardinalities().into_iter().map(|m| m.max(1)).collect();
        InstanceSchema::for_query(q, self.n, cards)
    }

    pub fn total_tuples(&self) -> usize {
        self.relations.iter().map(Relation::len).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchingSpec {
    pub n: u64,
    /// `m_j` per atom.
    pub cardinalities: Vec<u64>,
    /// Density cap for arity-1 relations; unchecked when absent.
    #[serde(default)]
    pub theta: Option<f64>,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenseSpec {
    pub n: u64,
    pub theta: f64,
    pub seed: u64,
    #[serde(default)]
    pub bernoulli: bool,
}

fn relation_rng(seed: u64, j: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(j as u64);
    rng
}

fn check_n(n: u64) -> Result<()> {
    if n < 1 || usize::try_from(n).is_err() {
        return Err(Error::InvalidSpec(format!("domain size {n} out of range")));
    }
    Ok(())
}

/// Uniform matching database: each column of `S_j` is an independent
/// uniform injection `[m_j] -> [n]`.
pub fn gen_matching(q: &Query, spec: &MatchingSpec) -> Result<DatabaseInstance> {
    check_n(spec.n)?;
    if spec.cardinalities.len() != q.l() {
        return Err(Error::InvalidSpec(format!(
            "{} cardinalities for {} atoms",
            spec.cardinalities.len(),
            q.l()
        )));
    }
    for (atom, &m) in q.atoms().iter().zip(&spec.cardinalities) {
        if m > spec.n {
            return Err(Error::InvalidSpec(format!(
                "{}: matching cardinality {m} exceeds n = {}",
                atom.name, spec.n
            )));
        }
        if let Some(theta) = spec.theta {
            if atom.arity() == 1 && m as f64 / spec.n as f64 > theta {
                return Err(Error::InvalidSpec(format!(
                    "{}: m/n = {} exceeds theta = {theta}",
                    atom.name,
                    m as f64 / spec.n as f64
                )));
            }
        }
    }
    let n = spec.n as usize;
    let relations = q
        .atoms()
        .iter()
        .zip(&spec.cardinalities)
        .enumerate()
        .map(|(j, (atom, &m))| {
            let mut rng = relation_rng(spec.seed, j);
            let m = m as usize;
            let columns: Vec<Vec<usize>> = (0..atom.arity())
                .map(|_| index::sample(&mut rng, n, m).into_vec())
                .collect();
            let tuples = (0..m)
                .map(|t| columns.iter().map(|col| col[t] as u64).collect())
                .collect();
            Relation::new(atom.name.clone(), atom.arity(), tuples)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DatabaseInstance {
        n: spec.n,
        relations,
        distribution: Distribution::Matching,
        seed: spec.seed,
    })
}

fn decode(mut idx: u64, n: u64, arity: usize) -> Vec<u64> {
    let mut t = vec![0; arity];
    for slot in t.iter_mut().rev() {
        *slot = idx % n;
        idx /= n;
    }
    t
}

/// Theta-dense database over `[n]^{r_j}` per atom.
pub fn gen_dense(q: &Query, spec: &DenseSpec) -> Result<DatabaseInstance> {
    check_n(spec.n)?;
    if !(spec.theta > 0.0 && spec.theta < 1.0) {
        return Err(Error::InvalidSpec(format!(
            "theta must lie in (0,1), got {}",
            spec.theta
        )));
    }
    let relations = q
        .atoms()
        .iter()
        .enumerate()
        .map(|(j, atom)| {
            let space = spec
                .n
                .checked_pow(atom.arity() as u32)
                .and_then(|s| usize::try_from(s).ok().map(|_| s))
                .ok_or_else(|| {
                    Error::InvalidSpec(format!("{}: n^{} is too large", atom.name, atom.arity()))
                })?;
            let mut rng = relation_rng(spec.seed, j);
            let tuples: Vec<Vec<u64>> = if spec.bernoulli {
                (0..space)
                    .filter(|_| rng.gen_bool(spec.theta))
                    .map(|i| decode(i, spec.n, atom.arity()))
                    .collect()
            } else {
                let count = (spec.theta * space as f64).floor() as usize;
                index::sample(&mut rng, space as usize, count)
                    .into_iter()
                    .map(|i| decode(i as u64, spec.n, atom.arity()))
                    .collect()
            };
            Relation::new(atom.name.clone(), atom.arity(), tuples)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DatabaseInstance {
        n: spec.n,
        relations,
        distribution: if spec.bernoulli {
            Distribution::DenseBernoulli
        } else {
            Distribution::Dense
        },
        seed: spec.seed,
    })
}

/// `prod_j m_j * n^(k - sum_j r_j)` for uniformly random relations.
pub fn expected_output_size(q: &Query, schema: &InstanceSchema) -> f64 {
    let cards: Vec<f64> = schema.cardinalities.iter().map(|&m| m as f64).collect();
    expected_output_size_for(q, schema.n, &cards)
}

/// Same formula with real-valued (expected) cardinalities.
pub fn expected_output_size_for(q: &Query, n: u64, cardinalities: &[f64]) -> f64 {
    let exponent = q.k() as i32 - q.total_arity() as i32;
    cardinalities.iter().product::<f64>() * (n as f64).powi(exponent)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_matching_is_permutation() {
        let q = Query::binary_join();
        let spec = MatchingSpec {
            n: 4,
            cardinalities: vec![4, 4],
            theta: None,
            seed: 7,
        };
        let db = gen_matching(&q, &spec).unwrap();
        for rel in &db.relations {
            for i in 0..2 {
                let col: BTreeSet<u64> = rel.tuples.iter().map(|t| t[i]).collect();
                assert_eq!(col, (0..4).collect());
            }
        }
    }

    #[test]
    fn partial_matching() {
        let q = Query::binary_join();
        let spec = MatchingSpec {
            n: 8,
            cardinalities: vec![4, 0],
            theta: None,
            seed: 1,
        };
        let db = gen_matching(&q, &spec).unwrap();
        assert_eq!(db.cardinalities(), vec![4, 0]);
        assert!(db.relations.iter().all(Relation::is_matching));
        assert_eq!(gen_matching(&q, &spec).unwrap(), db);
    }

    #[test]
    fn matching_rejections() {
        let q = Query::cartesian();
        let mut spec = MatchingSpec {
            n: 8,
            cardinalities: vec![9, 1],
            theta: None,
            seed: 0,
        };
        assert!(gen_matching(&q, &spec).is_err());
        spec.cardinalities = vec![6, 1];
        spec.theta = Some(0.5);
        assert!(gen_matching(&q, &spec).is_err());
    }

    #[test]
    fn dense_counts() {
        let q = Query::binary_join();
        let mut spec = DenseSpec {
            n: 4,
            theta: 0.5,
            seed: 3,
            bernoulli: false,
        };
        assert_eq!(gen_dense(&q, &spec).unwrap().cardinalities(), vec![8, 8]);
        spec.n = 3;
        let db = gen_dense(&q, &spec).unwrap();
        assert_eq!(db.cardinalities(), vec![4, 4]);
        assert!(db.relations[0].tuples.iter().flatten().all(|&v| v < 3));
        spec.theta = 0.01;
        assert_eq!(gen_dense(&q, &spec).unwrap().total_tuples(), 0);
        spec.theta = 1.0;
        assert!(gen_dense(&q, &spec).is_err());
    }

    #[test]
    fn expected_sizes() {
        let n = 10;
        let m = 6;
        let e = |q: &Query| expected_output_size(q, &InstanceSchema::uniform(q, n, m).unwrap());
        assert_eq!(e(&Query::cartesian()), 36.0);
        assert!((e(&Query::triangle()) - 216.0 / 1000.0).abs() < 1e-12);
        assert!((e(&Query::binary_join()) - 3.6).abs() < 1e-12);
    }

    #[test]
    fn csv_round_trip() {
        let rel = Relation::new("S1", 2, vec![vec![3, 1], vec![0, 2]]).unwrap();
        let text = rel.to_csv(4);
        assert!(text.starts_with("# atom=S1 arity=2 n=4\n"));
        let (back, n) = Relation::from_csv(&text).unwrap();
        assert_eq!((back, n), (rel, 4));
        assert!(Relation::from_csv("# atom=S1 arity=2 n=4\n5,0\n").is_err());
    }
}
