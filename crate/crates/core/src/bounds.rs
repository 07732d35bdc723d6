//! Load lower bounds and upper-bound predictions.
//!
//! Three regimes are covered:
//!
//! * equal cardinalities, linear costs: `m / ||w||_u` against the upper
//!   prediction `m log n / ||w||_v`, which coincide up to `log n` at the
//!   maximum packing / minimum cover;
//! * equal cardinalities, general costs: the least `L` with
//!   `sum_c g_c*(L)^u >= m^u`, found by bisection on `(0, min_c g_c(m)]`;
//! * unequal cardinalities, linear costs: the least `L` with
//!   `sum_c min_{u_c} prod_j (L w_c / s_j)^{u_c,j} >= 1`, found by doubling
//!   from `max_j s_j / sum_c w_c` and refined by bisection.

use serde::{Deserialize, Serialize};

use crate::cost::{lp_norm, MachineFleet};
use crate::lp::{
    maximum_fractional_edge_packing, minimum_fractional_vertex_cover, EdgePacking, PackingPolytope,
    VertexCover,
};
use crate::query::Query;
use crate::{Error, Result};

pub const DEFAULT_TOLERANCE: f64 = 1e-6;

/// Relative slack when comparing a feasibility sum against its target.
const FEASIBILITY_SLACK: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SizeUnit {
    /// Relation sizes are tuple counts `m_j`.
    Tuples,
    /// Relation sizes are encoded bits `M_j = m_j r_j ceil(log2 n)`.
    Bits,
}

/// Domain size and per-atom statistics of an instance.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceSchema {
    pub n: u64,
    pub cardinalities: Vec<u64>,
    pub arities: Vec<usize>,
}

impl InstanceSchema {
    pub fn new(n: u64, cardinalities: Vec<u64>, arities: Vec<usize>) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidSchema(format!(
                "domain size must be >= 2, got {n}"
            )));
        }
        if cardinalities.len() != arities.len() {
            return Err(Error::InvalidSchema(
                "one cardinality per atom required".into(),
            ));
        }
        for (j, (&m, &r)) in cardinalities.iter().zip(&arities).enumerate() {
            if r == 0 {
                return Err(Error::InvalidSchema(format!("atom {j} has arity 0")));
            }
            let cap = n.checked_pow(r as u32).unwrap_or(u64::MAX);
            if m == 0 || m > cap {
                return Err(Error::InvalidSchema(format!(
                    "atom {j}: cardinality {m} outside [1, n^{r}]"
                )));
            }
        }
        Ok(InstanceSchema {
            n,
            cardinalities,
            arities,
        })
    }

    pub fn for_query(q: &Query, n: u64, cardinalities: Vec<u64>) -> Result<Self> {
        Self::new(n, cardinalities, q.arities())
    }

    pub fn uniform(q: &Query, n: u64, m: u64) -> Result<Self> {
        Self::for_query(q, n, vec![m; q.l()])
    }

    /// `ceil(log2 n)`, the bits needed per attribute value.
    pub fn bits_per_value(&self) -> u64 {
        (64 - (self.n - 1).leading_zeros()) as u64
    }

    pub fn log2_n(&self) -> f64 {
        (self.n as f64).log2()
    }

    /// `M_j` under the naive encoding.
    pub fn bits(&self, j: usize) -> u64 {
        self.cardinalities[j] * self.arities[j] as u64 * self.bits_per_value()
    }

    pub fn sizes(&self, unit: SizeUnit) -> Vec<f64> {
        (0..self.cardinalities.len())
            .map(|j| match unit {
                SizeUnit::Tuples => self.cardinalities[j] as f64,
                SizeUnit::Bits => self.bits(j) as f64,
            })
            .collect()
    }

    pub fn uniform_cardinality(&self) -> Result<u64> {
        let m = self.cardinalities[0];
        if self.cardinalities.iter().all(|&x| x == m) {
            Ok(m)
        } else {
            Err(Error::NonUniformCardinality)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundMethod {
    EqualLinear,
    EqualGeneral,
    Unequal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub method: BoundMethod,
    /// Lower bound on the load, with relation sizes measured in `unit`.
    #[serde(rename = "L_lower")]
    pub l_lower: f64,
    /// Load the matching algorithm is predicted to achieve (without constants).
    #[serde(rename = "L_upper_predicted")]
    pub l_upper_predicted: f64,
    pub unit: SizeUnit,
    /// Uniform-case witness.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub packing: Option<EdgePacking>,
    /// Unequal-case witnesses, one per machine in id order.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub packings: Option<Vec<EdgePacking>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub cover: Option<VertexCover>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub bracket: Option<[f64; 2]>,
    /// Probes spent in the doubling phase (unequal case).
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub doubling_probes: Option<usize>,
    pub search_probes: usize,
    /// Probe pairs where a smaller load was feasible but a larger one was not.
    pub monotonicity_violations: usize,
}

pub fn upper_bound_linear(
    schema: &InstanceSchema,
    fleet: &MachineFleet,
    cover: &VertexCover,
) -> Result<f64> {
    let m = schema.uniform_cardinality()? as f64;
    Ok(m * schema.log2_n() / lp_norm(fleet, cover.total_f64())?)
}

pub fn lower_bound_linear(
    schema: &InstanceSchema,
    fleet: &MachineFleet,
    packing: &EdgePacking,
) -> Result<f64> {
    let m = schema.uniform_cardinality()? as f64;
    fleet.linear_weights()?;
    let u = packing.total_f64();
    if u == 0.0 {
        return Ok(0.0);
    }
    Ok(m / lp_norm(fleet, u)?)
}

/// `sum_c g_c*(load)^u >= m^u`, evaluated as `sum_c (g_c*/m)^u >= 1`.
pub fn general_feasible(fleet: &MachineFleet, m: u64, u: f64, load: f64) -> bool {
    let total: f64 = fleet
        .machines()
        .iter()
        .map(|mc| (mc.cost.pseudo_inverse(load) as f64 / m as f64).powf(u))
        .sum();
    total >= 1.0 - FEASIBILITY_SLACK
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SearchOutcome {
    pub value: f64,
    pub probes: usize,
}

/// Bisection for the least feasible load; `lo` must be infeasible and `hi`
/// feasible. Stops once `hi - lo <= tol * hi` and returns `hi`.
fn bisect(
    mut lo: f64,
    mut hi: f64,
    tol: f64,
    mut feasible: impl FnMut(f64) -> bool,
) -> SearchOutcome {
    let mut probes = 0;
    while hi - lo > tol * hi {
        let mid = lo + (hi - lo) / 2.0;
        if mid <= lo || mid >= hi {
            break;
        }
        probes += 1;
        if feasible(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    SearchOutcome { value: hi, probes }
}

pub fn lower_bound_general_search(
    schema: &InstanceSchema,
    fleet: &MachineFleet,
    packing: &EdgePacking,
    tol: f64,
) -> Result<SearchOutcome> {
    assert!(tol > 0.0, "tolerance must be positive");
    let m = schema.uniform_cardinality()?;
    let u = packing.total_f64();
    if u == 0.0 {
        return Ok(SearchOutcome {
            value: 0.0,
            probes: 0,
        });
    }
    let l_max = fleet
        .machines()
        .iter()
        .map(|mc| mc.cost.evaluate(m))
        .fold(f64::INFINITY, f64::min);
    Ok(bisect(0.0, l_max, tol, |l| {
        general_feasible(fleet, m, u, l)
    }))
}

pub fn lower_bound_general(
    schema: &InstanceSchema,
    fleet: &MachineFleet,
    packing: &EdgePacking,
    tol: f64,
) -> Result<f64> {
    lower_bound_general_search(schema, fleet, packing, tol).map(|s| s.value)
}

/// Per-machine packing minimising `prod_j (budget / size_j)^{u_j}` where
/// `budget = L w_c`.
pub fn per_machine_edge_packing(q: &Query, budget: f64, sizes: &[f64]) -> EdgePacking {
    let polytope = PackingPolytope::new(q);
    let (i, _) = polytope.argmin(&log_ratios(budget, sizes));
    polytope.vertices()[i].clone()
}

fn log_ratios(budget: f64, sizes: &[f64]) -> Vec<f64> {
    sizes.iter().map(|s| (budget / s).ln()).collect()
}

/// Left-hand side of the unequal-cardinality condition at `load`, with the
/// minimising vertex index per machine.
pub(crate) fn unequal_condition(
    polytope: &PackingPolytope,
    weights: &[u64],
    sizes: &[f64],
    load: f64,
) -> (f64, Vec<usize>) {
    let mut total = 0.0;
    let mut argmins = Vec::with_capacity(weights.len());
    for &w in weights {
        let (i, log_term) = polytope.argmin(&log_ratios(load * w as f64, sizes));
        total += log_term.exp();
        argmins.push(i);
    }
    (total, argmins)
}

/// Equal-cardinality linear report at the maximum packing and minimum cover.
pub fn bound_report_linear(
    q: &Query,
    schema: &InstanceSchema,
    fleet: &MachineFleet,
) -> Result<BoundReport> {
    let packing = maximum_fractional_edge_packing(q);
    let cover = minimum_fractional_vertex_cover(q);
    let l_lower = lower_bound_linear(schema, fleet, &packing)?;
    let l_upper = upper_bound_linear(schema, fleet, &cover)?;
    Ok(BoundReport {
        method: BoundMethod::EqualLinear,
        l_lower,
        l_upper_predicted: l_upper,
        unit: SizeUnit::Tuples,
        packing: Some(packing),
        packings: None,
        cover: Some(cover),
        bracket: None,
        doubling_probes: None,
        search_probes: 0,
        monotonicity_violations: 0,
    })
}

/// Equal-cardinality general-cost report at the maximum packing.
pub fn bound_report_general(
    q: &Query,
    schema: &InstanceSchema,
    fleet: &MachineFleet,
    tol: f64,
) -> Result<BoundReport> {
    let packing = maximum_fractional_edge_packing(q);
    let cover = minimum_fractional_vertex_cover(q);
    let search = lower_bound_general_search(schema, fleet, &packing, tol)?;
    Ok(BoundReport {
        method: BoundMethod::EqualGeneral,
        l_lower: search.value,
        l_upper_predicted: search.value * schema.log2_n(),
        unit: SizeUnit::Tuples,
        packing: Some(packing),
        packings: None,
        cover: Some(cover),
        bracket: None,
        doubling_probes: None,
        search_probes: search.probes,
        monotonicity_violations: 0,
    })
}

/// Least load satisfying the unequal-cardinality condition, with relation
/// sizes measured in `unit`.
pub fn lower_bound_unequal(
    q: &Query,
    schema: &InstanceSchema,
    fleet: &MachineFleet,
    tol: f64,
    unit: SizeUnit,
) -> Result<BoundReport> {
    assert!(tol > 0.0, "tolerance must be positive");
    if schema.cardinalities.len() != q.l() {
        return Err(Error::InvalidSchema("schema does not match query".into()));
    }
    let weights = fleet.linear_weights()?;
    let sizes = schema.sizes(unit);
    let polytope = PackingPolytope::new(q);

    let max_size = sizes.iter().copied().fold(0.0, f64::max);
    let sum_w: u64 = weights.iter().sum();
    let max_w = *weights.iter().max().expect("fleet is nonempty");
    let lower = max_size / sum_w as f64;
    let upper = max_size / max_w as f64;

    let mut probes: Vec<(f64, bool)> = Vec::new();
    let mut feasible = |l: f64| {
        let ok = unequal_condition(&polytope, &weights, &sizes, l).0 >= 1.0 - FEASIBILITY_SLACK;
        probes.push((l, ok));
        ok
    };

    let mut guess = lower;
    let mut last_infeasible = None;
    let mut doubling = 0;
    loop {
        doubling += 1;
        if feasible(guess) {
            break;
        }
        last_infeasible = Some(guess);
        if guess >= upper {
            return Err(Error::Internal(format!(
                "unequal condition infeasible at the upper bracket {upper}"
            )));
        }
        guess = (2.0 * guess).min(upper);
    }
    let value = match last_infeasible {
        None => guess,
        Some(lo) => bisect(lo, guess, tol, &mut feasible).value,
    };

    let violations = count_monotonicity_violations(&probes);
    let search_probes = probes.len();
    let (_, argmins) = unequal_condition(&polytope, &weights, &sizes, value);
    let packings = argmins
        .into_iter()
        .map(|i| polytope.vertices()[i].clone())
        .collect();
    Ok(BoundReport {
        method: BoundMethod::Unequal,
        l_lower: value,
        l_upper_predicted: value * schema.log2_n(),
        unit,
        packing: None,
        packings: Some(packings),
        cover: None,
        bracket: Some([lower, upper]),
        doubling_probes: Some(doubling),
        search_probes,
        monotonicity_violations: violations,
    })
}

fn count_monotonicity_violations(probes: &[(f64, bool)]) -> usize {
    let mut count = 0;
    for &(a, ok_a) in probes {
        for &(b, ok_b) in probes {
            if a < b && ok_a && !ok_b {
                count += 1;
            }
        }
    }
    count
}
