//! Side lengths of each machine's hyperrectangle in the output space `[n]^k`.
//!
//! Every construction here is monotone in machine strength: a machine that
//! is at least as strong as another gets sides at least as long in every
//! dimension. The packing stage depends on that ordering.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Pow};
use serde::{Deserialize, Serialize};

use crate::bounds::InstanceSchema;
use crate::cost::{exact_lp_norm, lp_norm, MachineFleet};
use crate::lp::VertexCover;
use crate::query::{Query, QueryShape};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hyperrectangle {
    pub machine: usize,
    /// One side per query variable, in variable order.
    pub sides: Vec<f64>,
}

impl Hyperrectangle {
    pub fn volume(&self) -> f64 {
        self.sides.iter().product()
    }

    /// Volume of the projection onto `vars`.
    pub fn projection_volume(&self, vars: &[usize]) -> f64 {
        vars.iter().map(|&v| self.sides[v]).product()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TriangleLabel {
    Small,
    Medium,
    Big,
    /// `f_y >= 1`: outside the three classes; the machine gets the full cube.
    Saturated,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TriangleProfile {
    pub f_x: f64,
    pub f_y: f64,
    pub f_z: f64,
    pub label: TriangleLabel,
}

/// Something the construction had to adjust; never silent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "flag", rename_all = "kebab-case")]
pub enum PartitionFlag {
    /// `g_c*(L*) / m` exceeded 1 and was clamped.
    GeneralClamped { machine: usize, ratio: f64 },
    /// A big triangle machine's `y` side exceeded `n` and was clamped.
    TriangleSideClamped { machine: usize, unclamped: f64 },
    /// `f_y >= 1`; the machine was given the full cube.
    TriangleSaturated { machine: usize, f_y: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    pub rects: Vec<Hyperrectangle>,
    #[serde(default)]
    pub flags: Vec<PartitionFlag>,
    /// Triangle constructions only, one per machine.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub profiles: Vec<TriangleProfile>,
}

impl Partition {
    fn plain(rects: Vec<Hyperrectangle>) -> Self {
        Partition {
            rects,
            flags: Vec::new(),
            profiles: Vec::new(),
        }
    }

    pub fn total_volume(&self) -> f64 {
        self.rects.iter().map(Hyperrectangle::volume).sum()
    }
}

fn unsupported(plan: &str, reason: impl Into<String>) -> Error {
    Error::UnsupportedShape {
        plan: plan.to_string(),
        reason: reason.into(),
    }
}

/// `lambda_{c,i} = (w_c / ||w||_v)^{v_i} n`.
pub fn equal_card_linear_dims(
    schema: &InstanceSchema,
    fleet: &MachineFleet,
    cover: &VertexCover,
) -> Result<Vec<Hyperrectangle>> {
    let weights = fleet.linear_weights()?;
    let norm = lp_norm(fleet, cover.total_f64())?;
    let v = cover.weights_f64();
    let n = schema.n as f64;
    Ok(weights
        .iter()
        .enumerate()
        .map(|(c, &w)| Hyperrectangle {
            machine: c + 1,
            sides: v.iter().map(|&vi| (w as f64 / norm).powf(vi) * n).collect(),
        })
        .collect())
}

/// Exact rational sides for the linear construction when every cover weight
/// is an integer and the norm is rational; `None` otherwise.
pub fn exact_linear_sides(
    n: u64,
    fleet: &MachineFleet,
    cover: &VertexCover,
) -> Result<Option<Vec<Vec<BigRational>>>> {
    let weights = fleet.linear_weights()?;
    let Some(norm) = exact_lp_norm(fleet, &cover.total)? else {
        return Ok(None);
    };
    let mut exps = Vec::with_capacity(cover.weights.len());
    for v in &cover.weights {
        if !v.is_integer() {
            return Ok(None);
        }
        exps.push(
            u32::try_from(v.to_integer()).map_err(|_| Error::Internal("cover weight".into()))?,
        );
    }
    let n = BigRational::from_integer(BigInt::from(n));
    Ok(Some(
        weights
            .iter()
            .map(|&w| {
                let ratio = BigRational::from_integer(BigInt::from(w)) / &norm;
                exps.iter()
                    .map(|&e| {
                        let scale: BigRational = if e == 0 {
                            BigRational::one()
                        } else {
                            Pow::pow(&ratio, e)
                        };
                        scale * &n
                    })
                    .collect()
            })
            .collect(),
    ))
}

/// `lambda_{c,i} = min(g_c*(L*) / m, 1)^{v_i} n`.
pub fn equal_card_general_dims(
    schema: &InstanceSchema,
    fleet: &MachineFleet,
    cover: &VertexCover,
    l_star: f64,
) -> Result<Partition> {
    let m = schema.uniform_cardinality()? as f64;
    let v = cover.weights_f64();
    let n = schema.n as f64;
    let mut flags = Vec::new();
    let rects = fleet
        .machines()
        .iter()
        .map(|mc| {
            let mut ratio = mc.cost.pseudo_inverse(l_star) as f64 / m;
            if ratio > 1.0 {
                flags.push(PartitionFlag::GeneralClamped {
                    machine: mc.id,
                    ratio,
                });
                ratio = 1.0;
            }
            Hyperrectangle {
                machine: mc.id,
                sides: v
                    .iter()
                    .map(|&vi| if vi == 0.0 { n } else { ratio.powf(vi) * n })
                    .collect(),
            }
        })
        .collect();
    Ok(Partition {
        rects,
        flags,
        profiles: Vec::new(),
    })
}

fn check_arity(q: &Query, schema: &InstanceSchema) -> Result<()> {
    if schema.arities != q.arities() {
        return Err(Error::InvalidSchema("schema does not match query".into()));
    }
    Ok(())
}

/// Index of the atom with the most bits (first on ties).
fn largest_atom(schema: &InstanceSchema) -> usize {
    let mut best = 0;
    for j in 1..schema.cardinalities.len() {
        if schema.bits(j) > schema.bits(best) {
            best = j;
        }
    }
    best
}

/// `lambda_{c,j} = min(L* w_c / M_j, 1) n` for the variable of atom `j`.
pub fn cartesian_dims(
    q: &Query,
    schema: &InstanceSchema,
    fleet: &MachineFleet,
    l_star: f64,
) -> Result<Partition> {
    check_arity(q, schema)?;
    let QueryShape::Cartesian { atoms, vars } = q.shape() else {
        return Err(unsupported("cartesian", "query is not S1(x), S2(y)"));
    };
    let weights = fleet.linear_weights()?;
    let n = schema.n as f64;
    let rects = weights
        .iter()
        .enumerate()
        .map(|(c, &w)| {
            let mut sides = vec![0.0; 2];
            for (&j, &v) in atoms.iter().zip(&vars) {
                sides[v] = (l_star * w as f64 / schema.bits(j) as f64).min(1.0) * n;
            }
            Hyperrectangle {
                machine: c + 1,
                sides,
            }
        })
        .collect();
    Ok(Partition::plain(rects))
}

/// Full sides everywhere except the centre variable, which gets
/// `min(L* w_c / M_max, 1) n`.
fn centered_dims(
    schema: &InstanceSchema,
    fleet: &MachineFleet,
    k: usize,
    center: usize,
    l_star: f64,
) -> Result<Partition> {
    let weights = fleet.linear_weights()?;
    let n = schema.n as f64;
    let m_max = schema.bits(largest_atom(schema)) as f64;
    let rects = weights
        .iter()
        .enumerate()
        .map(|(c, &w)| {
            let mut sides = vec![n; k];
            sides[center] = (l_star * w as f64 / m_max).min(1.0) * n;
            Hyperrectangle {
                machine: c + 1,
                sides,
            }
        })
        .collect();
    Ok(Partition::plain(rects))
}

pub fn binary_join_dims(
    q: &Query,
    schema: &InstanceSchema,
    fleet: &MachineFleet,
    l_star: f64,
) -> Result<Partition> {
    check_arity(q, schema)?;
    let QueryShape::BinaryJoin { join_var, .. } = q.shape() else {
        return Err(unsupported("binary-join", "query is not S1(x,z), S2(y,z)"));
    };
    centered_dims(schema, fleet, q.k(), join_var, l_star)
}

/// Star queries; a two-armed star is a binary join and is accepted too.
pub fn star_dims(
    q: &Query,
    schema: &InstanceSchema,
    fleet: &MachineFleet,
    l_star: f64,
) -> Result<Partition> {
    check_arity(q, schema)?;
    let center = match q.shape() {
        QueryShape::Star { center, .. } => center,
        QueryShape::BinaryJoin { join_var, .. } => join_var,
        _ => return Err(unsupported("star", "query is not S1(z,x1), .., Sa(z,xa)")),
    };
    centered_dims(schema, fleet, q.k(), center, l_star)
}

/// Triangle atoms relabelled so that `M_1 >= M_2 >= M_3` with
/// `S1(x,y), S2(y,z), S3(z,x)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TriangleRoles {
    /// Atom indices of S1, S2, S3.
    pub atoms: [usize; 3],
    pub x: usize,
    pub y: usize,
    pub z: usize,
}

impl TriangleRoles {
    pub fn new(q: &Query, schema: &InstanceSchema) -> Result<Self> {
        check_arity(q, schema)?;
        if q.shape() != QueryShape::Triangle {
            return Err(unsupported(
                "triangle",
                "query is not S1(x,y), S2(y,z), S3(z,x)",
            ));
        }
        let mut order = [0, 1, 2];
        // stable: equal sizes keep declaration order
        order.sort_by_key(|&j| std::cmp::Reverse(schema.bits(j)));
        let shared = |a: usize, b: usize| {
            let atoms = q.atoms();
            *atoms[a]
                .vars
                .iter()
                .find(|v| atoms[b].vars.contains(v))
                .expect("triangle atoms pairwise share a variable")
        };
        let [s1, s2, s3] = order;
        Ok(TriangleRoles {
            atoms: order,
            x: shared(s1, s3),
            y: shared(s1, s2),
            z: shared(s2, s3),
        })
    }

    fn sizes(&self, schema: &InstanceSchema) -> [f64; 3] {
        self.atoms.map(|j| schema.bits(j) as f64)
    }
}

fn profile_from_sizes(sizes: [f64; 3], weight: u64, l_star: f64) -> Result<TriangleProfile> {
    let [m1, m2, m3] = sizes;
    let budget = l_star * weight as f64;
    let f_x = (budget * m2 / (m1 * m3)).sqrt();
    let f_y = (budget * m3 / (m1 * m2)).sqrt();
    let f_z = (budget * m1 / (m2 * m3)).sqrt();
    let label = if f_z < 1.0 {
        TriangleLabel::Small
    } else if f_x < 1.0 {
        TriangleLabel::Medium
    } else if f_y < 1.0 {
        TriangleLabel::Big
    } else {
        return Err(Error::TriangleOutOfClass { weight, f_y });
    };
    Ok(TriangleProfile {
        f_x,
        f_y,
        f_z,
        label,
    })
}

pub fn triangle_profile(
    q: &Query,
    schema: &InstanceSchema,
    weight: u64,
    l_star: f64,
) -> Result<TriangleProfile> {
    let roles = TriangleRoles::new(q, schema)?;
    profile_from_sizes(roles.sizes(schema), weight, l_star)
}

/// The three branches of the triangle side map, as `(x, y, z)` sides.
pub fn triangle_branch(profile: &TriangleProfile, label: TriangleLabel, n: f64) -> [f64; 3] {
    let TriangleProfile { f_x, f_y, f_z, .. } = *profile;
    match label {
        TriangleLabel::Small => [f_x * n, f_y * n, f_z * n],
        TriangleLabel::Medium => [f_x * n, f_y * n, n],
        // L* w_c / M_1 = f_x f_y
        TriangleLabel::Big => [n, f_x * f_y * n, n],
        TriangleLabel::Saturated => [n, n, n],
    }
}

pub fn triangle_dims(
    q: &Query,
    schema: &InstanceSchema,
    fleet: &MachineFleet,
    l_star: f64,
) -> Result<Partition> {
    let roles = TriangleRoles::new(q, schema)?;
    let weights = fleet.linear_weights()?;
    let sizes = roles.sizes(schema);
    let n = schema.n as f64;
    let mut flags = Vec::new();
    let mut rects = Vec::with_capacity(weights.len());
    let mut profiles = Vec::with_capacity(weights.len());
    for (c, &w) in weights.iter().enumerate() {
        let machine = c + 1;
        let profile = match profile_from_sizes(sizes, w, l_star) {
            Ok(p) => p,
            Err(Error::TriangleOutOfClass { f_y, .. }) => {
                flags.push(PartitionFlag::TriangleSaturated { machine, f_y });
                let budget = l_star * w as f64;
                let [m1, m2, m3] = sizes;
                TriangleProfile {
                    f_x: (budget * m2 / (m1 * m3)).sqrt(),
                    f_y,
                    f_z: (budget * m1 / (m2 * m3)).sqrt(),
                    label: TriangleLabel::Saturated,
                }
            }
            Err(e) => return Err(e),
        };
        let mut xyz = triangle_branch(&profile, profile.label, n);
        if xyz[1] > n {
            flags.push(PartitionFlag::TriangleSideClamped {
                machine,
                unclamped: xyz[1],
            });
            xyz[1] = n;
        }
        let mut sides = vec![0.0; 3];
        sides[roles.x] = xyz[0];
        sides[roles.y] = xyz[1];
        sides[roles.z] = xyz[2];
        rects.push(Hyperrectangle { machine, sides });
        profiles.push(profile);
    }
    Ok(Partition {
        rects,
        flags,
        profiles,
    })
}
