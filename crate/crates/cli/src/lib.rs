//! Command implementations behind the `hetjoin` binary. Each `cmd_*`
//! returns a value; rendering and file output live in `main.rs`.

pub mod config;

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{ensure, Context, Result};
use hetjoin::bounds::{BoundReport, InstanceSchema};
use hetjoin::cost::{exact_lp_norm, lp_norm, MachineFleet};
use hetjoin::datagen::DatabaseInstance;
use hetjoin::engine::{brute_force_join, default_hash_mode, execute, HashFamily, LoadReport};
use hetjoin::lp::{minimum_fractional_vertex_cover, ratio_serde};
use hetjoin::packing::Placement;
use hetjoin::partition::{exact_linear_sides, Partition};
use hetjoin::plan::{Plan, PlanKind};
use hetjoin::Query;
use serde::{Deserialize, Serialize};

pub use config::{DistKind, Experiment, ExperimentConfig, Overrides, SweepParam};

/// Version stamped into every JSON report.
pub const REPORT_SCHEMA: u32 = 1;

/// Grids up to this many points are checked point by point in `verify`.
const EXHAUSTIVE_LIMIT: u128 = 1 << 20;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    /// The exponent `v = sum of cover weights`, as `p/q`.
    pub exponent: String,
    pub value: f64,
    /// `p/q` when the norm is rational.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanOutput {
    pub schema: u32,
    pub plan: PlanKind,
    pub n: u64,
    pub cardinalities: Vec<u64>,
    #[serde(flatten)]
    pub bounds: BoundReport,
    pub l_star: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub norm: Option<NormReport>,
    pub partition: Partition,
    /// Rational sides, when the linear construction has them.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact_sides: Option<Vec<Vec<String>>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PackOutput {
    pub schema: u32,
    pub plan: PlanKind,
    #[serde(flatten)]
    pub placement: Placement,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema: u32,
    pub plan: PlanKind,
    pub seed: u64,
    pub n: u64,
    #[serde(flatten)]
    pub load: LoadReport,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VerifySummary {
    pub checks: Vec<Check>,
}

impl VerifySummary {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            let tag = if c.pass { "PASS" } else { "FAIL" };
            let _ = writeln!(out, "{tag} {}: {}", c.name, c.detail);
        }
        let failed = self.checks.iter().filter(|c| !c.pass).count();
        let _ = writeln!(out, "{} checks, {failed} failed", self.checks.len());
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub parameter: SweepParam,
    pub value: f64,
    pub seed: u64,
    pub plan: PlanKind,
    pub max_cost: f64,
    pub lower_bound: f64,
    pub ratio: f64,
}

fn build_plan(exp: &Experiment, schema: &InstanceSchema) -> Result<Plan> {
    let kind = exp.plan_kind(schema)?;
    Plan::build(&exp.query, schema, &exp.fleet, kind, exp.tolerance)
        .with_context(|| format!("building the {kind} plan"))
}

/// Bounds and side lengths for the configured schema.
pub fn cmd_plan(exp: &Experiment) -> Result<PlanOutput> {
    let schema = exp.schema()?;
    let plan = build_plan(exp, &schema)?;
    let (mut norm, mut exact_sides) = (None, None);
    if plan.kind == PlanKind::EqualLinear {
        let cover = minimum_fractional_vertex_cover(&exp.query);
        norm = Some(NormReport {
            exponent: ratio_serde::format(&cover.total),
            value: lp_norm(&exp.fleet, cover.total_f64())?,
            exact: exact_lp_norm(&exp.fleet, &cover.total)?.map(|r| ratio_serde::format(&r)),
        });
        exact_sides = exact_linear_sides(schema.n, &exp.fleet, &cover)?.map(|rows| {
            rows.iter()
                .map(|r| r.iter().map(ratio_serde::format).collect())
                .collect()
        });
    }
    Ok(PlanOutput {
        schema: REPORT_SCHEMA,
        plan: plan.kind,
        n: schema.n,
        cardinalities: schema.cardinalities.clone(),
        bounds: plan.bounds,
        l_star: plan.l_star,
        norm,
        partition: plan.partition,
        exact_sides,
    })
}

/// `machine,var,lambda` rows.
pub fn dims_csv(q: &Query, partition: &Partition) -> String {
    let mut out = String::from("machine,var,lambda\n");
    for r in &partition.rects {
        for (v, side) in q.variables().iter().zip(&r.sides) {
            let _ = writeln!(out, "{},{v},{side}", r.machine);
        }
    }
    out
}

pub fn cmd_pack(exp: &Experiment) -> Result<PackOutput> {
    let schema = exp.schema()?;
    let plan = build_plan(exp, &schema)?;
    Ok(PackOutput {
        schema: REPORT_SCHEMA,
        plan: plan.kind,
        placement: plan.placement,
    })
}

pub fn read_placement(path: &Path) -> Result<Placement> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let out: PackOutput =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    ensure!(
        out.schema == REPORT_SCHEMA,
        "{}: unsupported report schema {}",
        path.display(),
        out.schema
    );
    Ok(out.placement)
}

/// Writes one `<atom>.csv` per relation into `dir` for the first seed.
pub fn cmd_gen(exp: &Experiment, dir: &Path) -> Result<Vec<PathBuf>> {
    let inst = exp.instance(exp.seeds[0])?;
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut written = Vec::new();
    for rel in &inst.relations {
        let path = dir.join(format!("{}.csv", rel.atom));
        fs::write(&path, rel.to_csv(inst.n))
            .with_context(|| format!("writing {}", path.display()))?;
        written.push(path);
    }
    Ok(written)
}

fn run_instance(exp: &Experiment, inst: &DatabaseInstance, seed: u64) -> Result<RunReport> {
    let schema = inst.planning_schema(&exp.query)?;
    let plan = build_plan(exp, &schema)?;
    let hashes = HashFamily::new(default_hash_mode(inst), inst.n, exp.query.k(), seed);
    let res = execute(&exp.query, inst, &exp.fleet, &plan, &hashes)?;
    Ok(RunReport {
        schema: REPORT_SCHEMA,
        plan: plan.kind,
        seed,
        n: inst.n,
        load: res.report,
    })
}

/// One round on the instance generated from `seed`.
pub fn cmd_run(exp: &Experiment, seed: u64) -> Result<RunReport> {
    let inst = exp.instance(seed)?;
    run_instance(exp, &inst, seed)
}

fn grid_check(q: &Query, p: &Placement) -> Check {
    let total = (p.n as u128).checked_pow(p.k as u32).unwrap_or(u128::MAX);
    if total > EXHAUSTIVE_LIMIT {
        return Check {
            name: "grid".into(),
            pass: true,
            detail: format!("skipped, {total} points"),
        };
    }
    let mut bad = 0u64;
    let mut first = None;
    let mut point = vec![0u64; q.k()];
    for mut code in 0..total {
        for x in point.iter_mut() {
            *x = (code % p.n as u128) as u64;
            code /= p.n as u128;
        }
        let owners: Vec<usize> = p
            .used()
            .filter(|m| m.contains(&point))
            .map(|m| m.machine)
            .collect();
        let located = p.locate(&point).ok();
        if owners.len() != 1 || located != Some(owners[0]) {
            bad += 1;
            first.get_or_insert_with(|| {
                format!("{point:?} owned by {owners:?}, located {located:?}")
            });
        }
    }
    Check {
        name: "grid".into(),
        pass: bad == 0,
        detail: match first {
            None => format!("{total} points each in exactly one box"),
            Some(f) => format!("{bad} bad points, first {f}"),
        },
    }
}

fn oracle_check(exp: &Experiment, plan: &Plan, seed: u64) -> Check {
    let name = format!("oracle seed={seed}");
    let outcome = (|| -> Result<(bool, String)> {
        let inst = exp.instance(seed)?;
        let hashes = HashFamily::new(default_hash_mode(&inst), inst.n, exp.query.k(), seed);
        let res = execute(&exp.query, &inst, &exp.fleet, plan, &hashes)?;
        let want = brute_force_join(&exp.query, &inst);
        let total: usize = res.machine_outputs.iter().map(Vec::len).sum();
        let distinct: BTreeSet<&Vec<u64>> = res.machine_outputs.iter().flatten().collect();
        let pass = res.output == want && total == distinct.len();
        Ok((
            pass,
            format!(
                "{} output tuples, oracle {}, ratio {:.4}",
                res.output.len(),
                want.len(),
                res.report.ratio
            ),
        ))
    })();
    match outcome {
        Ok((pass, detail)) => Check { name, pass, detail },
        Err(e) => Check {
            name,
            pass: false,
            detail: format!("{e:#}"),
        },
    }
}

/// Coverage, inflation and oracle equality on the configured instance.
/// A supplied placement replaces the one the plan computes.
pub fn cmd_verify(exp: &Experiment, placement: Option<Placement>) -> Result<VerifySummary> {
    let q = &exp.query;
    let schema = exp.instance(exp.seeds[0])?.planning_schema(q)?;
    let mut plan = build_plan(exp, &schema)?;
    let mut checks = Vec::new();
    if let Some(p) = placement {
        let fits = p.n == plan.placement.n && p.k == plan.placement.k;
        checks.push(Check {
            name: "placement file".into(),
            pass: fits,
            detail: format!("n = {}, k = {}", p.n, p.k),
        });
        if !fits {
            return Ok(VerifySummary { checks });
        }
        plan.placement = p;
    }
    let problems = plan.placement.verify(Some(q));
    checks.push(Check {
        name: "coverage".into(),
        pass: problems.is_empty(),
        detail: if problems.is_empty() {
            format!(
                "{} of {} machines used, tiling consistent",
                plan.placement.used().count(),
                plan.placement.machines.len()
            )
        } else {
            problems.join("; ")
        },
    });
    if !problems.is_empty() {
        return Ok(VerifySummary { checks });
    }
    checks.push(grid_check(q, &plan.placement));
    let records = plan.placement.inflation(q);
    let worst = records
        .iter()
        .map(|r| r.ratio / r.bound)
        .fold(0.0f64, f64::max);
    checks.push(Check {
        name: "inflation".into(),
        pass: worst <= 1.0 + 1e-9,
        detail: format!("max inflation / bound = {worst:.4}"),
    });
    for &seed in &exp.seeds {
        checks.push(oracle_check(exp, &plan, seed));
    }
    Ok(VerifySummary { checks })
}

fn sweep_variant(exp: &Experiment, param: SweepParam, value: f64) -> Result<Experiment> {
    let mut e = exp.clone();
    let whole = || -> Result<u64> {
        ensure!(
            value >= 1.0 && value.fract() == 0.0,
            "{} takes positive integers, got {value}",
            param.as_str()
        );
        Ok(value as u64)
    };
    match param {
        SweepParam::P => e.fleet = MachineFleet::linear(&vec![1; whole()? as usize])?,
        SweepParam::Theta => e.theta = Some(value),
        SweepParam::M => e.cardinalities = Some(vec![whole()?; e.query.l()]),
        SweepParam::Skew => {
            let mut w = vec![1; exp.fleet.len()];
            w[0] = whole()?;
            e.fleet = MachineFleet::linear(&w)?;
        }
    }
    Ok(e)
}

/// One row per value and seed, in the order given.
pub fn cmd_sweep(exp: &Experiment, param: SweepParam, values: &[f64]) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::new();
    for &value in values {
        let e = sweep_variant(exp, param, value)?;
        for &seed in &e.seeds {
            let r = cmd_run(&e, seed)
                .with_context(|| format!("{} = {value}, seed {seed}", param.as_str()))?;
            rows.push(SweepRow {
                parameter: param,
                value,
                seed,
                plan: r.plan,
                max_cost: r.load.max_cost,
                lower_bound: r.load.lower_bound,
                ratio: r.load.ratio,
            });
        }
    }
    Ok(rows)
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("parameter,value,seed,plan,max_cost,lower_bound,ratio\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.parameter.as_str(),
            r.value,
            r.seed,
            r.plan,
            r.max_cost,
            r.lower_bound,
            r.ratio
        );
    }
    out
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}
