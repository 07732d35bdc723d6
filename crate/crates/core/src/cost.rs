//! Per-machine cost functions.
//!
//! A machine charges `g(N)` for receiving `N` bits. Every cost function here
//! is well-behaved: `g(0) = 0`, strictly increasing, and polynomially
//! bounded (`g((1+d)x) <= (1+d)^a g(x)` for `x >= 1`). The pseudo-inverse
//! `g*(L)` is the largest bit count whose cost stays within `L`.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Pow, ToPrimitive};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Cap for pseudo-inverses so that `x + 1` never overflows.
const MAX_BITS: u64 = u64::MAX / 4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum CostFunction {
    /// `g(x) = x / weight`.
    Linear { weight: u64 },
    /// `g(x) = x^exponent / weight`.
    #[serde(rename = "poly")]
    Polynomial { exponent: f64, weight: f64 },
    /// Piecewise-linear through `(bits, cost)` breakpoints, starting at
    /// `(0, 0)`, extrapolated past the last breakpoint with the last slope.
    /// `growth` is the declared polynomial-growth constant `a > 1`.
    Table {
        breakpoints: Vec<(u64, f64)>,
        growth: f64,
    },
}

impl CostFunction {
    pub fn validate(&self) -> Result<()> {
        match self {
            CostFunction::Linear { weight } => {
                if *weight == 0 {
                    return Err(Error::InvalidCost("linear weight must be positive".into()));
                }
            }
            CostFunction::Polynomial { exponent, weight } => {
                if !(exponent.is_finite() && *exponent > 0.0) {
                    return Err(Error::InvalidCost(format!("bad exponent {exponent}")));
                }
                if !(weight.is_finite() && *weight > 0.0) {
                    return Err(Error::InvalidCost(format!("bad weight {weight}")));
                }
            }
            CostFunction::Table {
                breakpoints,
                growth,
            } => {
                if breakpoints.len() < 2 {
                    return Err(Error::InvalidCost(
                        "table needs at least two breakpoints".into(),
                    ));
                }
                if breakpoints[0] != (0, 0.0) {
                    return Err(Error::InvalidCost("table must start at (0, 0)".into()));
                }
                for w in breakpoints.windows(2) {
                    let ((x0, c0), (x1, c1)) = (w[0], w[1]);
                    if x1 <= x0 || !(c1 > c0) || !c1.is_finite() {
                        return Err(Error::InvalidCost(format!(
                            "table must be strictly increasing, got ({x0},{c0}) then ({x1},{c1})"
                        )));
                    }
                }
                if !(growth.is_finite() && *growth > 1.0) {
                    return Err(Error::InvalidCost("growth constant must exceed 1".into()));
                }
                self.check_growth_cap()?;
            }
        }
        Ok(())
    }

    /// Samples `g(y) <= (y/x)^a g(x)` over every breakpoint pair `1 <= x < y`.
    fn check_growth_cap(&self) -> Result<()> {
        let CostFunction::Table {
            breakpoints,
            growth,
        } = self
        else {
            return Ok(());
        };
        let pts: Vec<(u64, f64)> = breakpoints
            .iter()
            .copied()
            .filter(|&(x, _)| x >= 1)
            .collect();
        for (i, &(x, gx)) in pts.iter().enumerate() {
            for &(y, gy) in &pts[i + 1..] {
                let cap = (y as f64 / x as f64).powf(*growth) * gx;
                if gy > cap * (1.0 + 1e-9) {
                    return Err(Error::InvalidCost(format!(
                        "growth cap a={growth} violated between {x} and {y} bits"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn evaluate(&self, bits: u64) -> f64 {
        match self {
            CostFunction::Linear { weight } => bits as f64 / *weight as f64,
            CostFunction::Polynomial { exponent, weight } => {
                if bits == 0 {
                    0.0
                } else {
                    (bits as f64).powf(*exponent) / weight
                }
            }
            CostFunction::Table { breakpoints, .. } => {
                let seg = match breakpoints.iter().position(|&(x, _)| x >= bits) {
                    Some(0) => return 0.0,
                    Some(i) => i - 1,
                    None => breakpoints.len() - 2,
                };
                let (x0, c0) = breakpoints[seg];
                let (x1, c1) = breakpoints[seg + 1];
                let slope = (c1 - c0) / (x1 - x0) as f64;
                c0 + slope * (bits - x0) as f64
            }
        }
    }

    /// Largest `x` with `g(x) <= load`; 0 when even one bit costs more.
    pub fn pseudo_inverse(&self, load: f64) -> u64 {
        if !(load > 0.0) {
            return 0;
        }
        let guess = match self {
            CostFunction::Linear { weight } => load * *weight as f64,
            CostFunction::Polynomial { exponent, weight } => (load * weight).powf(1.0 / exponent),
            CostFunction::Table { .. } => return self.search_inverse(load),
        };
        let start = if guess.is_finite() {
            guess.floor().min(MAX_BITS as f64) as u64
        } else {
            MAX_BITS
        };
        self.settle(start, load)
    }

    /// Walks from a closed-form estimate to the exact integer maximum.
    fn settle(&self, mut x: u64, load: f64) -> u64 {
        while x > 0 && self.evaluate(x) > load {
            x -= 1;
        }
        while x < MAX_BITS && self.evaluate(x + 1) <= load {
            x += 1;
        }
        x
    }

    fn search_inverse(&self, load: f64) -> u64 {
        let mut hi = 1u64;
        while hi < MAX_BITS && self.evaluate(hi) <= load {
            hi = hi.saturating_mul(2).min(MAX_BITS);
        }
        if self.evaluate(hi) <= load {
            return hi;
        }
        // invariant: g(lo) <= load < g(hi)
        let mut lo = 0u64;
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if self.evaluate(mid) <= load {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }

    pub fn linear_weight(&self) -> Option<u64> {
        match self {
            CostFunction::Linear { weight } => Some(*weight),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Machine {
    pub id: usize,
    #[serde(flatten)]
    pub cost: CostFunction,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MachineFleet {
    #[serde(rename = "machine")]
    machines: Vec<Machine>,
}

impl MachineFleet {
    /// Validates ids (dense `1..=p`, any order) and every cost function;
    /// machines are stored in id order.
    pub fn new(mut machines: Vec<Machine>) -> Result<Self> {
        if machines.is_empty() {
            return Err(Error::InvalidFleet("fleet is empty".into()));
        }
        machines.sort_by_key(|m| m.id);
        for (i, m) in machines.iter().enumerate() {
            if m.id != i + 1 {
                return Err(Error::InvalidFleet(format!(
                    "machine ids must be 1..={}, found {}",
                    machines.len(),
                    m.id
                )));
            }
            m.cost.validate()?;
        }
        Ok(MachineFleet { machines })
    }

    pub fn linear(weights: &[u64]) -> Result<Self> {
        Self::new(
            weights
                .iter()
                .enumerate()
                .map(|(i, &weight)| Machine {
                    id: i + 1,
                    cost: CostFunction::Linear { weight },
                })
                .collect(),
        )
    }

    pub fn polynomial(exponent: f64, weights: &[f64]) -> Result<Self> {
        Self::new(
            weights
                .iter()
                .enumerate()
                .map(|(i, &weight)| Machine {
                    id: i + 1,
                    cost: CostFunction::Polynomial { exponent, weight },
                })
                .collect(),
        )
    }

    pub fn machines(&self) -> &[Machine] {
        &self.machines
    }

    pub fn len(&self) -> usize {
        self.machines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.machines.is_empty()
    }

    pub fn is_linear(&self) -> bool {
        self.machines
            .iter()
            .all(|m| m.cost.linear_weight().is_some())
    }

    pub fn linear_weights(&self) -> Result<Vec<u64>> {
        self.machines
            .iter()
            .map(|m| m.cost.linear_weight().ok_or(Error::NonLinearFleet(m.id)))
            .collect()
    }

    pub fn cost(&self, id: usize) -> &CostFunction {
        &self.machines[id - 1].cost
    }
}

/// `(sum_c w_c^exponent)^(1/exponent)` over a linear fleet.
pub fn lp_norm(fleet: &MachineFleet, exponent: f64) -> Result<f64> {
    assert!(exponent > 0.0, "norm exponent must be positive");
    let weights = fleet.linear_weights()?;
    if let [w] = weights[..] {
        return Ok(w as f64);
    }
    let total: f64 = weights.iter().map(|&w| (w as f64).powf(exponent)).sum();
    Ok(total.powf(1.0 / exponent))
}

/// Exact norm for integer exponents whose power sum is a perfect power;
/// `None` when the norm is irrational (or the exponent is fractional).
pub fn exact_lp_norm(fleet: &MachineFleet, exponent: &BigRational) -> Result<Option<BigRational>> {
    let weights = fleet.linear_weights()?;
    if !exponent.is_integer() {
        return Ok(None);
    }
    let Some(e) = exponent.to_integer().to_u32().filter(|&e| e > 0) else {
        return Ok(None);
    };
    let total: BigInt = weights.iter().map(|&w| Pow::pow(BigInt::from(w), e)).sum();
    let root = total.nth_root(e);
    if Pow::pow(&root, e) == total {
        Ok(Some(BigRational::from_integer(root)))
    } else {
        Ok(None)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::rational;

    fn table() -> CostFunction {
        CostFunction::Table {
            breakpoints: vec![(0, 0.0), (10, 5.0), (20, 15.0)],
            growth: 2.0,
        }
    }

    #[test]
    fn evaluate_examples() {
        let lin = CostFunction::Linear { weight: 4 };
        assert_eq!(lin.evaluate(0), 0.0);
        assert_eq!(lin.evaluate(100), 25.0);
        let poly = CostFunction::Polynomial {
            exponent: 2.0,
            weight: 2.0,
        };
        assert_eq!(poly.evaluate(10), 50.0);
        assert_eq!(poly.evaluate(0), 0.0);
    }

    #[test]
    fn table_interpolates_and_extrapolates() {
        let t = table();
        t.validate().unwrap();
        assert_eq!(t.evaluate(0), 0.0);
        assert_eq!(t.evaluate(4), 2.0);
        assert_eq!(t.evaluate(15), 10.0);
        assert_eq!(t.evaluate(30), 25.0);
    }

    #[test]
    fn pseudo_inverse_examples() {
        assert_eq!(CostFunction::Linear { weight: 3 }.pseudo_inverse(5.0), 15);
        let sq = CostFunction::Polynomial {
            exponent: 2.0,
            weight: 1.0,
        };
        assert_eq!(sq.pseudo_inverse(10.0), 3);
        assert_eq!(sq.pseudo_inverse(0.0), 0);
        assert_eq!(table().pseudo_inverse(0.0), 0);
        assert_eq!(table().pseudo_inverse(10.0), 15);
        assert_eq!(table().pseudo_inverse(0.49), 0);
    }

    #[test]
    fn rejects_ill_behaved_tables() {
        let bad_start = CostFunction::Table {
            breakpoints: vec![(0, 1.0), (10, 5.0)],
            growth: 2.0,
        };
        assert!(bad_start.validate().is_err());
        let decreasing = CostFunction::Table {
            breakpoints: vec![(0, 0.0), (10, 5.0), (20, 4.0)],
            growth: 2.0,
        };
        assert!(decreasing.validate().is_err());
        // cost jumps 100x between 1 and 2 bits: violates a=2
        let steep = CostFunction::Table {
            breakpoints: vec![(0, 0.0), (1, 0.01), (2, 1.0)],
            growth: 2.0,
        };
        assert!(steep.validate().is_err());
        assert!(CostFunction::Linear { weight: 0 }.validate().is_err());
    }

    #[test]
    fn fleet_ids_must_be_dense() {
        let m = |id| Machine {
            id,
            cost: CostFunction::Linear { weight: 1 },
        };
        assert!(MachineFleet::new(vec![m(1), m(3)]).is_err());
        assert!(MachineFleet::new(vec![]).is_err());
        let f = MachineFleet::new(vec![m(2), m(1)]).unwrap();
        assert_eq!(f.machines()[0].id, 1);
    }

    #[test]
    fn norm_examples() {
        let mut w = vec![4, 4, 3, 2, 2, 2];
        w.extend([1; 11]);
        let fleet = MachineFleet::linear(&w).unwrap();
        assert_eq!(lp_norm(&fleet, 2.0).unwrap(), 8.0);
        assert_eq!(
            exact_lp_norm(&fleet, &rational(2, 1)).unwrap(),
            Some(rational(8, 1))
        );
        let single = MachineFleet::linear(&[7]).unwrap();
        assert_eq!(lp_norm(&single, 1.5).unwrap(), 7.0);
        let pair = MachineFleet::linear(&[1, 1]).unwrap();
        assert!((lp_norm(&pair, 2.0).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(exact_lp_norm(&pair, &rational(2, 1)).unwrap(), None);
        let poly = MachineFleet::polynomial(2.0, &[1.0]).unwrap();
        assert!(matches!(lp_norm(&poly, 2.0), Err(Error::NonLinearFleet(1))));
    }

    #[test]
    fn fleet_serde_round_trip() {
        let fleet = MachineFleet::new(vec![
            Machine {
                id: 1,
                cost: CostFunction::Linear { weight: 2 },
            },
            Machine {
                id: 2,
                cost: table(),
            },
        ])
        .unwrap();
        let json = serde_json::to_string(&fleet).unwrap();
        assert!(json.contains("\"kind\":\"linear\""));
        let back: MachineFleet = serde_json::from_str(&json).unwrap();
        assert_eq!(back, fleet);
    }
}
