//! Plans: bounds, side lengths and placement for one query on one fleet.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bounds::{
    bound_report_general, bound_report_linear, lower_bound_unequal, BoundReport, InstanceSchema,
    SizeUnit,
};
use crate::cost::MachineFleet;
use crate::lp::minimum_fractional_vertex_cover;
use crate::packing::{pack, Placement};
use crate::partition::{
    binary_join_dims, cartesian_dims, equal_card_general_dims, equal_card_linear_dims, star_dims,
    triangle_dims, Partition,
};
use crate::query::{Query, QueryShape};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlanKind {
    EqualLinear,
    EqualGeneral,
    Cartesian,
    BinaryJoin,
    Star,
    Triangle,
}

impl PlanKind {
    pub const ALL: [PlanKind; 6] = [
        PlanKind::EqualLinear,
        PlanKind::EqualGeneral,
        PlanKind::Cartesian,
        PlanKind::BinaryJoin,
        PlanKind::Star,
        PlanKind::Triangle,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PlanKind::EqualLinear => "equal-linear",
            PlanKind::EqualGeneral => "equal-general",
            PlanKind::Cartesian => "cartesian",
            PlanKind::BinaryJoin => "binary-join",
            PlanKind::Star => "star",
            PlanKind::Triangle => "triangle",
        }
    }

    /// Default plan: the equal-cardinality constructions when every atom has
    /// the same size, otherwise the construction for the query's shape.
    pub fn choose(q: &Query, schema: &InstanceSchema, fleet: &MachineFleet) -> Result<Self> {
        if schema.uniform_cardinality().is_ok() {
            return Ok(if fleet.is_linear() {
                PlanKind::EqualLinear
            } else {
                PlanKind::EqualGeneral
            });
        }
        match q.shape() {
            QueryShape::Cartesian { .. } => Ok(PlanKind::Cartesian),
            QueryShape::BinaryJoin { .. } => Ok(PlanKind::BinaryJoin),
            QueryShape::Star { .. } => Ok(PlanKind::Star),
            QueryShape::Triangle => Ok(PlanKind::Triangle),
            QueryShape::Other => Err(Error::UnsupportedShape {
                plan: "auto".into(),
                reason: "unequal cardinalities are only supported for the cartesian product, \
                         binary join, star and triangle queries"
                    .into(),
            }),
        }
    }
}

impl fmt::Display for PlanKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PlanKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PlanKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::InvalidSpec(format!("unknown plan kind {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub kind: PlanKind,
    pub schema: InstanceSchema,
    /// Lower bound with sizes in tuples; the reference for load ratios.
    pub bounds: BoundReport,
    /// Load the side lengths were computed from, in the unit the
    /// construction expects (bits for the unequal-cardinality plans).
    pub l_star: f64,
    pub partition: Partition,
    pub placement: Placement,
}

impl Plan {
    pub fn build(
        q: &Query,
        schema: &InstanceSchema,
        fleet: &MachineFleet,
        kind: PlanKind,
        tol: f64,
    ) -> Result<Self> {
        if schema.arities != q.arities() {
            return Err(Error::InvalidSchema("schema does not match query".into()));
        }
        let (bounds, l_star, partition) = match kind {
            PlanKind::EqualLinear => {
                let bounds = bound_report_linear(q, schema, fleet)?;
                let cover = minimum_fractional_vertex_cover(q);
                let rects = equal_card_linear_dims(schema, fleet, &cover)?;
                let l = bounds.l_lower;
                (
                    bounds,
                    l,
                    Partition {
                        rects,
                        flags: Vec::new(),
                        profiles: Vec::new(),
                    },
                )
            }
            PlanKind::EqualGeneral => {
                let bounds = bound_report_general(q, schema, fleet, tol)?;
                let cover = minimum_fractional_vertex_cover(q);
                let l = bounds.l_lower;
                let partition = equal_card_general_dims(schema, fleet, &cover, l)?;
                (bounds, l, partition)
            }
            PlanKind::Cartesian | PlanKind::BinaryJoin | PlanKind::Star | PlanKind::Triangle => {
                let bounds = lower_bound_unequal(q, schema, fleet, tol, SizeUnit::Tuples)?;
                let l = lower_bound_unequal(q, schema, fleet, tol, SizeUnit::Bits)?.l_lower;
                let partition = match kind {
                    PlanKind::Cartesian => cartesian_dims(q, schema, fleet, l)?,
                    PlanKind::BinaryJoin => binary_join_dims(q, schema, fleet, l)?,
                    PlanKind::Star => star_dims(q, schema, fleet, l)?,
                    _ => triangle_dims(q, schema, fleet, l)?,
                };
                (bounds, l, partition)
            }
        };
        let placement = pack(&partition.rects, schema.n, q.k())?;
        Ok(Plan {
            kind,
            schema: schema.clone(),
            bounds,
            l_star,
            partition,
            placement,
        })
    }
}
