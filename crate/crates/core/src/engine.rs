//! One-round execution: hash, route, join locally, account loads.
//!
//! Machine `c` receives tuple `a` of `S_j` iff the projection of its box onto
//! the variables of `S_j` contains `h(a)`, and outputs every joined tuple `t`
//! of its shard with `h(t)` inside its box. Boxes are disjoint, so every
//! output tuple is produced by exactly one machine.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::DEFAULT_TOLERANCE;
use crate::cost::MachineFleet;
use crate::datagen::DatabaseInstance;
use crate::packing::MachinePlacement;
use crate::plan::{Plan, PlanKind};
use crate::query::Query;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HashMode {
    Identity,
    Random,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HashFamily {
    pub mode: HashMode,
    pub n: u64,
    pub seed: u64,
    /// One permutation of `[n]` per variable; empty in identity mode.
    perms: Vec<Vec<u64>>,
}

impl HashFamily {
    pub fn new(mode: HashMode, n: u64, k: usize, seed: u64) -> Self {
        let perms = match mode {
            HashMode::Identity => Vec::new(),
            HashMode::Random => (0..k)
                .map(|i| {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    rng.set_stream(i as u64);
                    let mut p: Vec<u64> = (0..n).collect();
                    p.shuffle(&mut rng);
                    p
                })
                .collect(),
        };
        HashFamily {
            mode,
            n,
            seed,
            perms,
        }
    }

    pub fn apply(&self, var: usize, value: u64) -> u64 {
        match self.mode {
            HashMode::Identity => value,
            HashMode::Random => self.perms[var][value as usize],
        }
    }
}

/// Tuples one machine receives, per atom.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Shard {
    pub machine: usize,
    pub relations: Vec<Vec<Vec<u64>>>,
}

fn tuple_in_box(atom_vars: &[usize], t: &[u64], mp: &MachinePlacement, h: &HashFamily) -> bool {
    atom_vars.iter().zip(t).all(|(&v, &a)| {
        let x = h.apply(v, a);
        mp.grid_lo[v] <= x && x < mp.grid_hi[v]
    })
}

/// Shards for every machine of the placement, in placement order.
pub fn route(
    q: &Query,
    instance: &DatabaseInstance,
    machines: &[MachinePlacement],
    hashes: &HashFamily,
) -> Vec<Shard> {
    machines
        .par_iter()
        .map(|mp| Shard {
            machine: mp.machine,
            relations: q
                .atoms()
                .iter()
                .zip(&instance.relations)
                .map(|(atom, rel)| {
                    if !mp.used {
                        return Vec::new();
                    }
                    rel.tuples
                        .iter()
                        .filter(|t| tuple_in_box(&atom.vars, t, mp, hashes))
                        .cloned()
                        .collect()
                })
                .collect(),
        })
        .collect()
}

/// Atom order for the local join: each next atom shares the most variables
/// with those already joined.
fn join_order(q: &Query) -> Vec<usize> {
    let mut bound = vec![false; q.k()];
    let mut left: Vec<usize> = (0..q.l()).collect();
    let mut order = Vec::with_capacity(q.l());
    while !left.is_empty() {
        let (pos, _) = left
            .iter()
            .enumerate()
            .max_by_key(|(i, &j)| {
                let shared = q.atoms()[j].vars.iter().filter(|&&v| bound[v]).count();
                (shared, std::cmp::Reverse(*i))
            })
            .expect("nonempty");
        let j = left.remove(pos);
        for &v in &q.atoms()[j].vars {
            bound[v] = true;
        }
        order.push(j);
    }
    order
}

/// Hash join of a shard, keeping only tuples hashed into the machine's box.
pub fn local_join(
    q: &Query,
    shard: &[Vec<Vec<u64>>],
    mp: &MachinePlacement,
    hashes: &HashFamily,
) -> Vec<Vec<u64>> {
    if !mp.used || shard.iter().any(Vec::is_empty) {
        return Vec::new();
    }
    let mut bound = vec![false; q.k()];
    let mut partial: Vec<Vec<u64>> = vec![vec![0; q.k()]];
    for j in join_order(q) {
        let atom = &q.atoms()[j];
        let key_pos: Vec<usize> = (0..atom.arity()).filter(|&p| bound[atom.vars[p]]).collect();
        let mut index: HashMap<Vec<u64>, Vec<&Vec<u64>>> = HashMap::new();
        for t in &shard[j] {
            if tuple_in_box(&atom.vars, t, mp, hashes) {
                index
                    .entry(key_pos.iter().map(|&p| t[p]).collect())
                    .or_default()
                    .push(t);
            }
        }
        let mut next = Vec::new();
        for row in &partial {
            let key: Vec<u64> = key_pos.iter().map(|&p| row[atom.vars[p]]).collect();
            if let Some(matches) = index.get(&key) {
                for t in matches {
                    let mut r = row.clone();
                    for (p, &v) in atom.vars.iter().enumerate() {
                        r[v] = t[p];
                    }
                    next.push(r);
                }
            }
        }
        partial = next;
        for &v in &atom.vars {
            bound[v] = true;
        }
        if partial.is_empty() {
            break;
        }
    }
    partial.sort_unstable();
    partial
}

/// Nested-loop evaluation; the reference answer.
pub fn brute_force_join(q: &Query, instance: &DatabaseInstance) -> Vec<Vec<u64>> {
    fn go(
        q: &Query,
        instance: &DatabaseInstance,
        j: usize,
        assignment: &mut Vec<Option<u64>>,
        out: &mut Vec<Vec<u64>>,
    ) {
        if j == q.l() {
            out.push(
                assignment
                    .iter()
                    .map(|a| a.expect("all variables bound"))
                    .collect(),
            );
            return;
        }
        let vars = &q.atoms()[j].vars;
        for t in &instance.relations[j].tuples {
            if vars
                .iter()
                .zip(t)
                .all(|(&v, &a)| assignment[v].is_none_or(|b| a == b))
            {
                let fresh: Vec<usize> = vars
                    .iter()
                    .copied()
                    .filter(|&v| assignment[v].is_none())
                    .collect();
                for (&v, &a) in vars.iter().zip(t) {
                    assignment[v] = Some(a);
                }
                go(q, instance, j + 1, assignment, out);
                for v in fresh {
                    assignment[v] = None;
                }
            }
        }
    }
    let mut out = Vec::new();
    go(q, instance, 0, &mut vec![None; q.k()], &mut out);
    out.sort_unstable();
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MachineLoad {
    pub id: usize,
    pub used: bool,
    /// `n_{c,j}`.
    pub tuples_per_atom: Vec<u64>,
    /// `N_c = sum_j n_{c,j} r_j ceil(log2 n)`.
    pub bits: u64,
    /// `g_c(N_c)`.
    pub cost: f64,
    pub output: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoadReport {
    pub machines: Vec<MachineLoad>,
    pub max_cost: f64,
    /// Lower bound on the load with sizes in tuples.
    pub lower_bound: f64,
    /// `max_cost / (lower_bound * log2 n)`.
    pub ratio: f64,
    pub output_size: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RoundResult {
    /// Sorted.
    pub output: Vec<Vec<u64>>,
    /// Sorted output of each machine, in placement order.
    pub machine_outputs: Vec<Vec<Vec<u64>>>,
    pub report: LoadReport,
}

/// Executes a prepared plan.
pub fn execute(
    q: &Query,
    instance: &DatabaseInstance,
    fleet: &MachineFleet,
    plan: &Plan,
    hashes: &HashFamily,
) -> Result<RoundResult> {
    instance.check(q)?;
    if plan.placement.n != instance.n {
        return Err(Error::InstanceMismatch(
            "plan and instance use different n".into(),
        ));
    }
    let machines = &plan.placement.machines;
    let shards = route(q, instance, machines, hashes);
    let machine_outputs: Vec<Vec<Vec<u64>>> = shards
        .par_iter()
        .zip(machines.par_iter())
        .map(|(s, mp)| local_join(q, &s.relations, mp, hashes))
        .collect();

    let mut output: Vec<Vec<u64>> = machine_outputs.iter().flatten().cloned().collect();
    output.sort_unstable();
    if output.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Internal(
            "two machines produced the same output tuple".into(),
        ));
    }

    let bits_per_value = plan.schema.bits_per_value();
    let loads: Vec<MachineLoad> = shards
        .iter()
        .zip(machines)
        .zip(&machine_outputs)
        .map(|((s, mp), out)| {
            let tuples: Vec<u64> = s.relations.iter().map(|r| r.len() as u64).collect();
            let bits: u64 = tuples
                .iter()
                .zip(q.atoms())
                .map(|(&t, a)| t * a.arity() as u64 * bits_per_value)
                .sum();
            MachineLoad {
                id: mp.machine,
                used: mp.used,
                tuples_per_atom: tuples,
                bits,
                cost: fleet.cost(mp.machine).evaluate(bits),
                output: out.len() as u64,
            }
        })
        .collect();
    let max_cost = loads.iter().map(|l| l.cost).fold(0.0, f64::max);
    let lower_bound = plan.bounds.l_lower;
    let denom = lower_bound * plan.schema.log2_n();
    Ok(RoundResult {
        report: LoadReport {
            machines: loads,
            max_cost,
            lower_bound,
            ratio: if denom > 0.0 {
                max_cost / denom
            } else {
                f64::INFINITY
            },
            output_size: output.len() as u64,
        },
        output,
        machine_outputs,
    })
}

/// Default hashing: identity for dense inputs, seeded permutations otherwise.
pub fn default_hash_mode(instance: &DatabaseInstance) -> HashMode {
    if instance.distribution.is_dense() {
        HashMode::Identity
    } else {
        HashMode::Random
    }
}

/// Plans and executes one round: bounds, partition, packing, routing and
/// local joins.
pub fn run_one_round(
    q: &Query,
    instance: &DatabaseInstance,
    fleet: &MachineFleet,
    kind: PlanKind,
    seed: u64,
) -> Result<(RoundResult, Plan)> {
    instance.check(q)?;
    let schema = instance.planning_schema(q)?;
    let plan = Plan::build(q, &schema, fleet, kind, DEFAULT_TOLERANCE)?;
    let hashes = HashFamily::new(default_hash_mode(instance), instance.n, q.k(), seed);
    let result = execute(q, instance, fleet, &plan, &hashes)?;
    Ok((result, plan))
}
