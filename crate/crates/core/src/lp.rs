//! Exact fractional vertex covers and edge packings.
//!
//! The LPs involved have at most a handful of variables and constraints, so
//! they are solved by enumerating every basic feasible solution in exact
//! rational arithmetic: each choice of `dim` linearly independent constraints
//! made tight yields a candidate vertex, which is kept if it satisfies all
//! constraints. Among optimal vertices the lexicographically smallest weight
//! vector wins, which makes every solution deterministic.

use std::collections::BTreeSet;
use std::fmt;

use itertools::Itertools;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::query::Query;
use crate::{Error, Result};

pub fn rational(numer: i64, denom: i64) -> BigRational {
    BigRational::new(BigInt::from(numer), BigInt::from(denom))
}

pub fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().expect("rational out of f64 range")
}

/// Serializes rationals as `"p/q"` strings (or `"p"` for integers).
pub mod ratio_serde {
    use super::*;
    use serde::de::Error as _;
    use serde::{Deserializer, Serializer};

    pub fn format(r: &BigRational) -> String {
        if r.is_integer() {
            r.numer().to_string()
        } else {
            format!("{}/{}", r.numer(), r.denom())
        }
    }

    pub fn parse(s: &str) -> Option<BigRational> {
        let s = s.trim();
        match s.split_once('/') {
            Some((n, d)) => {
                let n: BigInt = n.trim().parse().ok()?;
                let d: BigInt = d.trim().parse().ok()?;
                if d.is_zero() {
                    None
                } else {
                    Some(BigRational::new(n, d))
                }
            }
            None => s.parse::<BigInt>().ok().map(BigRational::from_integer),
        }
    }

    pub fn serialize<S: Serializer>(r: &BigRational, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&format(r))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> std::result::Result<BigRational, D::Error> {
        let s = String::deserialize(d)?;
        parse(&s).ok_or_else(|| D::Error::custom(format!("invalid rational {s:?}")))
    }

    pub mod vec {
        use super::*;

        pub fn serialize<S: Serializer>(
            v: &[BigRational],
            s: S,
        ) -> std::result::Result<S::Ok, S::Error> {
            s.collect_seq(v.iter().map(format))
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(
            d: D,
        ) -> std::result::Result<Vec<BigRational>, D::Error> {
            let raw = Vec::<String>::deserialize(d)?;
            raw.iter()
                .map(|s| {
                    parse(s).ok_or_else(|| D::Error::custom(format!("invalid rational {s:?}")))
                })
                .collect()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Sense {
    Le,
    Ge,
}

#[derive(Clone, Debug)]
pub(crate) struct Constraint {
    pub coeffs: Vec<BigRational>,
    pub sense: Sense,
    pub rhs: BigRational,
}

impl Constraint {
    fn lhs(&self, x: &[BigRational]) -> BigRational {
        self.coeffs
            .iter()
            .zip(x)
            .fold(BigRational::zero(), |acc, (a, b)| acc + a * b)
    }

    fn satisfied(&self, x: &[BigRational]) -> bool {
        let lhs = self.lhs(x);
        match self.sense {
            Sense::Le => lhs <= self.rhs,
            Sense::Ge => lhs >= self.rhs,
        }
    }
}

/// Solves the square system `a x = b`; `None` when singular.
fn solve_square(mut a: Vec<Vec<BigRational>>, mut b: Vec<BigRational>) -> Option<Vec<BigRational>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).find(|&r| !a[r][col].is_zero())?;
        a.swap(col, pivot);
        b.swap(col, pivot);
        let inv = a[col][col].recip();
        for c in col..n {
            a[col][c] = &a[col][c] * &inv;
        }
        b[col] = &b[col] * &inv;
        for r in 0..n {
            if r != col && !a[r][col].is_zero() {
                let factor = a[r][col].clone();
                for c in col..n {
                    let delta = &factor * &a[col][c];
                    a[r][c] -= delta;
                }
                let delta = &factor * &b[col];
                b[r] -= delta;
            }
        }
    }
    Some(b)
}

/// Every vertex of `{x >= 0 : constraints}` in lexicographic order.
pub(crate) fn enumerate_vertices(dim: usize, constraints: &[Constraint]) -> Vec<Vec<BigRational>> {
    let mut rows: Vec<Constraint> = constraints.to_vec();
    for i in 0..dim {
        let mut coeffs = vec![BigRational::zero(); dim];
        coeffs[i] = BigRational::one();
        rows.push(Constraint {
            coeffs,
            sense: Sense::Ge,
            rhs: BigRational::zero(),
        });
    }
    let mut found = BTreeSet::new();
    for subset in (0..rows.len()).combinations(dim) {
        let a = subset.iter().map(|&r| rows[r].coeffs.clone()).collect();
        let b = subset.iter().map(|&r| rows[r].rhs.clone()).collect();
        if let Some(x) = solve_square(a, b) {
            if rows.iter().all(|c| c.satisfied(&x)) {
                found.insert(x);
            }
        }
    }
    found.into_iter().collect()
}

/// Lexicographically smallest vertex among those optimising `objective`.
fn lex_optimum(
    vertices: &[Vec<BigRational>],
    objective: &[BigRational],
    maximize: bool,
) -> Option<Vec<BigRational>> {
    let mut best: Option<(BigRational, &Vec<BigRational>)> = None;
    for v in vertices {
        let value = v
            .iter()
            .zip(objective)
            .fold(BigRational::zero(), |acc, (a, b)| acc + a * b);
        let better = match &best {
            None => true,
            Some((b, _)) if maximize => value > *b,
            Some((b, _)) => value < *b,
        };
        if better {
            best = Some((value, v));
        }
    }
    best.map(|(_, v)| v.clone())
}

fn sum(weights: &[BigRational]) -> BigRational {
    weights.iter().fold(BigRational::zero(), |acc, w| acc + w)
}

/// Weights `v_i` per variable with every atom covered to at least 1.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VertexCover {
    #[serde(with = "ratio_serde::vec")]
    pub weights: Vec<BigRational>,
    #[serde(with = "ratio_serde")]
    pub total: BigRational,
}

/// Weights `u_j` per atom with every variable loaded to at most 1.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgePacking {
    #[serde(with = "ratio_serde::vec")]
    pub weights: Vec<BigRational>,
    #[serde(with = "ratio_serde")]
    pub total: BigRational,
}

impl VertexCover {
    pub fn new(q: &Query, weights: Vec<BigRational>) -> Result<Self> {
        let cover = VertexCover {
            total: sum(&weights),
            weights,
        };
        if !cover.is_feasible(q) {
            return Err(Error::InvalidQuery(
                "weights are not a fractional vertex cover".into(),
            ));
        }
        Ok(cover)
    }

    pub fn is_feasible(&self, q: &Query) -> bool {
        self.weights.len() == q.k()
            && self.weights.iter().all(|w| !w.is_negative())
            && q.atoms().iter().all(|a| {
                let covered = a
                    .vars
                    .iter()
                    .fold(BigRational::zero(), |acc, &v| acc + &self.weights[v]);
                covered >= BigRational::one()
            })
    }

    pub fn weights_f64(&self) -> Vec<f64> {
        self.weights.iter().map(to_f64).collect()
    }

    pub fn total_f64(&self) -> f64 {
        to_f64(&self.total)
    }
}

impl EdgePacking {
    pub fn new(q: &Query, weights: Vec<BigRational>) -> Result<Self> {
        let packing = EdgePacking {
            total: sum(&weights),
            weights,
        };
        if !packing.is_feasible(q) {
            return Err(Error::InvalidQuery(
                "weights are not a fractional edge packing".into(),
            ));
        }
        Ok(packing)
    }

    /// Packing with weight 1 on atom `j` and 0 elsewhere.
    pub fn single(q: &Query, j: usize) -> Self {
        let mut weights = vec![BigRational::zero(); q.l()];
        weights[j] = BigRational::one();
        EdgePacking {
            total: BigRational::one(),
            weights,
        }
    }

    pub fn is_feasible(&self, q: &Query) -> bool {
        self.weights.len() == q.l()
            && self.weights.iter().all(|w| !w.is_negative())
            && (0..q.k()).all(|v| {
                let load = q
                    .atoms_of(v)
                    .fold(BigRational::zero(), |acc, j| acc + &self.weights[j]);
                load <= BigRational::one()
            })
    }

    pub fn weights_f64(&self) -> Vec<f64> {
        self.weights.iter().map(to_f64).collect()
    }

    pub fn total_f64(&self) -> f64 {
        to_f64(&self.total)
    }
}

fn fmt_weights(f: &mut fmt::Formatter<'_>, w: &[BigRational], total: &BigRational) -> fmt::Result {
    let parts: Vec<String> = w.iter().map(ratio_serde::format).collect();
    write!(
        f,
        "({}) total {}",
        parts.join(", "),
        ratio_serde::format(total)
    )
}

impl fmt::Display for VertexCover {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_weights(f, &self.weights, &self.total)
    }
}

impl fmt::Display for EdgePacking {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_weights(f, &self.weights, &self.total)
    }
}

fn cover_constraints(q: &Query) -> Vec<Constraint> {
    q.atoms()
        .iter()
        .map(|a| {
            let mut coeffs = vec![BigRational::zero(); q.k()];
            for &v in &a.vars {
                coeffs[v] = BigRational::one();
            }
            Constraint {
                coeffs,
                sense: Sense::Ge,
                rhs: BigRational::one(),
            }
        })
        .collect()
}

fn packing_constraints(q: &Query) -> Vec<Constraint> {
    (0..q.k())
        .map(|v| {
            let mut coeffs = vec![BigRational::zero(); q.l()];
            for j in q.atoms_of(v) {
                coeffs[j] = BigRational::one();
            }
            Constraint {
                coeffs,
                sense: Sense::Le,
                rhs: BigRational::one(),
            }
        })
        .collect()
}

pub fn minimum_fractional_vertex_cover(q: &Query) -> VertexCover {
    let vertices = enumerate_vertices(q.k(), &cover_constraints(q));
    let ones = vec![BigRational::one(); q.k()];
    // the cover polyhedron is pointed and bounded below, so an optimal vertex exists
    let weights = lex_optimum(&vertices, &ones, false).expect("cover LP always has a vertex");
    VertexCover {
        total: sum(&weights),
        weights,
    }
}

pub fn maximum_fractional_edge_packing(q: &Query) -> EdgePacking {
    let vertices = enumerate_vertices(q.l(), &packing_constraints(q));
    let ones = vec![BigRational::one(); q.l()];
    let weights = lex_optimum(&vertices, &ones, true).expect("packing polytope contains 0");
    EdgePacking {
        total: sum(&weights),
        weights,
    }
}

/// The vertices of a query's edge-packing polytope, computed once and reused
/// for per-machine packings with real-valued (log) objectives.
#[derive(Clone, Debug)]
pub struct PackingPolytope {
    vertices: Vec<EdgePacking>,
    vertices_f64: Vec<Vec<f64>>,
}

impl PackingPolytope {
    pub fn new(q: &Query) -> Self {
        let vertices: Vec<EdgePacking> = enumerate_vertices(q.l(), &packing_constraints(q))
            .into_iter()
            .map(|w| EdgePacking {
                total: sum(&w),
                weights: w,
            })
            .collect();
        let vertices_f64 = vertices.iter().map(EdgePacking::weights_f64).collect();
        PackingPolytope {
            vertices,
            vertices_f64,
        }
    }

    pub fn vertices(&self) -> &[EdgePacking] {
        &self.vertices
    }

    /// Vertex minimising `sum_j u_j * coeffs[j]`; near-ties (relative 1e-12)
    /// go to the lexicographically smallest vertex. Returns the index and the
    /// objective value.
    pub fn argmin(&self, coeffs: &[f64]) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for (i, u) in self.vertices_f64.iter().enumerate() {
            let value: f64 = u.iter().zip(coeffs).map(|(a, b)| a * b).sum();
            if !best.1.is_finite() {
                best = (i, value);
                continue;
            }
            let slack = 1e-12 * value.abs().max(best.1.abs()).max(1.0);
            if value < best.1 - slack {
                best = (i, value);
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cartesian_cover_and_packing() {
        let q = Query::cartesian();
        let v = minimum_fractional_vertex_cover(&q);
        assert_eq!(v.weights, vec![rational(1, 1), rational(1, 1)]);
        assert_eq!(v.total, rational(2, 1));
        let u = maximum_fractional_edge_packing(&q);
        assert_eq!(u.weights, vec![rational(1, 1), rational(1, 1)]);
    }

    #[test]
    fn binary_join_cover_puts_weight_on_join_variable() {
        let q = Query::binary_join();
        let v = minimum_fractional_vertex_cover(&q);
        assert_eq!(
            v.weights,
            vec![rational(0, 1), rational(0, 1), rational(1, 1)]
        );
        assert_eq!(v.total, rational(1, 1));
    }

    #[test]
    fn triangle_half_weights() {
        let q = Query::triangle();
        let u = maximum_fractional_edge_packing(&q);
        assert_eq!(u.weights, vec![rational(1, 2); 3]);
        assert_eq!(minimum_fractional_vertex_cover(&q).total, rational(3, 2));
    }

    #[test]
    fn star_packing_capped_by_center() {
        let u = maximum_fractional_edge_packing(&Query::star(2));
        assert_eq!(u.total, rational(1, 1));
        // tie between (0,1) and (1,0): lexicographic minimum
        assert_eq!(u.weights, vec![rational(0, 1), rational(1, 1)]);
    }

    #[test]
    fn feasibility_checks() {
        let q = Query::triangle();
        assert!(
            EdgePacking::new(&q, vec![rational(1, 1), rational(1, 1), rational(0, 1)]).is_err()
        );
        assert!(
            VertexCover::new(&q, vec![rational(1, 1), rational(0, 1), rational(0, 1)]).is_err()
        );
        assert!(VertexCover::new(&q, vec![rational(1, 1), rational(0, 1), rational(1, 1)]).is_ok());
    }

    #[test]
    fn singular_subsets_are_skipped() {
        // x + y >= 1 twice: duplicate rows are singular together
        let c = Constraint {
            coeffs: vec![rational(1, 1), rational(1, 1)],
            sense: Sense::Ge,
            rhs: rational(1, 1),
        };
        let v = enumerate_vertices(2, &[c.clone(), c]);
        assert_eq!(
            v,
            vec![
                vec![rational(0, 1), rational(1, 1)],
                vec![rational(1, 1), rational(0, 1)]
            ]
        );
    }

    #[test]
    fn ratio_strings() {
        assert_eq!(ratio_serde::format(&rational(3, 2)), "3/2");
        assert_eq!(ratio_serde::format(&rational(4, 2)), "2");
        assert_eq!(ratio_serde::parse(" 6/4 "), Some(rational(3, 2)));
        assert_eq!(ratio_serde::parse("1/0"), None);
    }

    #[test]
    fn polytope_argmin_prefers_lexicographic_minimum_on_ties() {
        let p = PackingPolytope::new(&Query::cartesian());
        // zero coefficients: every vertex ties at 0
        let (i, value) = p.argmin(&[0.0, 0.0]);
        assert_eq!(value, 0.0);
        assert_eq!(p.vertices()[i].total, rational(0, 1));
        let (i, _) = p.argmin(&[-1.0, -2.0]);
        assert_eq!(
            p.vertices()[i].weights,
            vec![rational(1, 1), rational(1, 1)]
        );
    }
}
