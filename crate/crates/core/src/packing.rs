//! Packing machine hyperrectangles into a disjoint cover of `[0,n)^k`.
//!
//! Sides are rounded up to powers of two, rectangles of equal shape are
//! bucketed, each bucket is merged into the next larger one, the largest
//! bucket is merged pairwise along its smallest dimension until one
//! rectangle `R` remains, and `R` is scaled up to cover the grid.
//!
//! Coordinates are exact. Rounded sides are `2^alpha` with `alpha` possibly
//! negative, so a box may be narrower than one grid cell; a grid point `x`
//! belongs to the box `[lo, hi)` iff `lo <= x < hi`, which for integers is
//! `ceil(lo) <= x < ceil(hi)`. Those integer bounds are kept as `grid_lo` /
//! `grid_hi`, clipped to `[0, n]`.

use std::collections::VecDeque;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::lp::{ratio_serde, to_f64};
use crate::partition::Hyperrectangle;
use crate::query::Query;
use crate::{Error, Result};

/// Relative slack for the floating-point inflation comparison.
const INFLATION_SLACK: f64 = 1e-9;

/// Exponent `alpha` with `2^(alpha-1) < x <= 2^alpha`; `None` for zero,
/// negative, subnormal or non-finite input.
pub fn round_up_pow2(x: f64) -> Option<i32> {
    if !x.is_normal() || x < 0.0 {
        return None;
    }
    let bits = x.to_bits();
    let exp = ((bits >> 52) & 0x7ff) as i32 - 1023;
    let frac = bits & ((1u64 << 52) - 1);
    Some(if frac == 0 { exp } else { exp + 1 })
}

/// Rounds every side up to a power of two. Rectangles with a zero side get
/// all sides zero.
pub fn round_sides(rects: &[Hyperrectangle]) -> Vec<Hyperrectangle> {
    rects
        .iter()
        .map(|r| {
            let exps: Option<Vec<i32>> = r.sides.iter().map(|&s| round_up_pow2(s)).collect();
            Hyperrectangle {
                machine: r.machine,
                sides: match exps {
                    Some(e) => e.iter().map(|&a| 2f64.powi(a)).collect(),
                    None => vec![0.0; r.sides.len()],
                },
            }
        })
        .collect()
}

fn pow2(e: i64) -> BigRational {
    let base = BigInt::one() << e.unsigned_abs();
    if e >= 0 {
        BigRational::from_integer(base)
    } else {
        BigRational::new(BigInt::one(), base)
    }
}

fn ceil_clip(x: &BigRational, n: u64) -> u64 {
    let c = x.ceil().to_integer();
    if c <= BigInt::zero() {
        0
    } else {
        c.to_u64().map_or(n, |v| v.min(n))
    }
}

/// Merge tree of the final rectangle `R`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "lowercase")]
pub enum MergeNode {
    Leaf {
        machine: usize,
    },
    /// A grid of `prod counts` equal children of shape `2^child_log_sides`,
    /// listed with dimension 0 varying fastest.
    Stack {
        counts: Vec<u64>,
        child_log_sides: Vec<i32>,
        children: Vec<MergeNode>,
    },
}

impl MergeNode {
    fn leaves(&self, out: &mut Vec<usize>) {
        match self {
            MergeNode::Leaf { machine } => out.push(*machine),
            MergeNode::Stack { children, .. } => {
                for c in children {
                    c.leaves(out);
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MachinePlacement {
    pub machine: usize,
    pub used: bool,
    /// Sides before packing.
    pub sides: Vec<f64>,
    /// `alpha` per side after rounding; empty when a side was zero.
    pub log_sides: Vec<i32>,
    /// Exact box `[lo, hi)`; all zero when unused.
    #[serde(with = "ratio_serde::vec")]
    pub lo: Vec<BigRational>,
    #[serde(with = "ratio_serde::vec")]
    pub hi: Vec<BigRational>,
    /// Integer points covered, clipped to `[0, n]`.
    pub grid_lo: Vec<u64>,
    pub grid_hi: Vec<u64>,
}

impl MachinePlacement {
    pub fn contains(&self, point: &[u64]) -> bool {
        self.used
            && point
                .iter()
                .enumerate()
                .all(|(i, &x)| self.grid_lo[i] <= x && x < self.grid_hi[i])
    }

    /// Whether the projection of the box onto `vars` contains `values`.
    pub fn projection_contains(&self, vars: &[usize], values: &[u64]) -> bool {
        self.used
            && vars
                .iter()
                .zip(values)
                .all(|(&i, &x)| self.grid_lo[i] <= x && x < self.grid_hi[i])
    }

    /// Exact side lengths after packing.
    pub fn adjusted_sides(&self) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| to_f64(&(h - l)))
            .collect()
    }

    /// Number of grid points in the projection onto `vars`.
    pub fn grid_projection_volume(&self, vars: &[usize]) -> u128 {
        if !self.used {
            return 0;
        }
        vars.iter()
            .map(|&i| self.grid_hi[i].saturating_sub(self.grid_lo[i]) as u128)
            .product()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub n: u64,
    pub k: usize,
    /// In input order.
    pub machines: Vec<MachinePlacement>,
    /// Scale factors `f_i = max(n / |R_i|, 1)`.
    #[serde(with = "ratio_serde::vec")]
    pub scale: Vec<BigRational>,
    /// `log2` of the sides of `R` before scaling.
    pub root_log_sides: Vec<i32>,
    pub tree: MergeNode,
    pub trace: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InflationRecord {
    pub machine: usize,
    pub atom: usize,
    pub ratio: f64,
    pub bound: f64,
}

fn fmt_shape(exps: &[i32]) -> String {
    let parts: Vec<String> = exps.iter().map(|&a| format!("{}", 2f64.powi(a))).collect();
    parts.join("x")
}

/// Runs the packing algorithm. Rectangles must be monotone: for any two,
/// one is at least as large as the other in every dimension after rounding.
pub fn pack(rects: &[Hyperrectangle], n: u64, k: usize) -> Result<Placement> {
    if rects.iter().any(|r| r.sides.len() != k) {
        return Err(Error::PackingPrecondition(format!(
            "every rectangle needs {k} sides"
        )));
    }
    let mut trace = Vec::new();
    let mut exps: Vec<Option<Vec<i32>>> = Vec::with_capacity(rects.len());
    for r in rects {
        let e: Option<Vec<i32>> = r.sides.iter().map(|&s| round_up_pow2(s)).collect();
        match &e {
            Some(a) => trace.push(format!(
                "round machine {}: {:?} -> {}",
                r.machine,
                r.sides,
                fmt_shape(a)
            )),
            None => trace.push(format!("machine {} has a zero side: unused", r.machine)),
        }
        exps.push(e);
    }

    // buckets ordered by volume; shapes must form a chain
    let mut shapes: Vec<Vec<i32>> = exps.iter().flatten().cloned().collect();
    shapes.sort_by_key(|s| (s.iter().map(|&a| a as i64).sum::<i64>(), s.clone()));
    shapes.dedup();
    if shapes.is_empty() {
        return Err(Error::PackingPrecondition(
            "no rectangle has positive sides".into(),
        ));
    }
    for pair in shapes.windows(2) {
        if pair[0].iter().zip(&pair[1]).any(|(a, b)| a > b) {
            return Err(Error::PackingPrecondition(format!(
                "shapes {} and {} are not ordered",
                fmt_shape(&pair[0]),
                fmt_shape(&pair[1])
            )));
        }
    }
    let mut buckets: Vec<VecDeque<MergeNode>> = Vec::new();
    buckets.resize_with(shapes.len(), VecDeque::new);
    for (r, e) in rects.iter().zip(&exps) {
        if let Some(e) = e {
            let t = shapes.binary_search_by_key(
                &(e.iter().map(|&a| a as i64).sum::<i64>(), e.clone()),
                |s| (s.iter().map(|&a| a as i64).sum::<i64>(), s.clone()),
            );
            let t = t.expect("shape was collected above");
            buckets[t].push_back(MergeNode::Leaf { machine: r.machine });
        }
    }
    for (t, b) in buckets.iter().enumerate() {
        trace.push(format!(
            "bucket {}: {} x{}",
            t + 1,
            fmt_shape(&shapes[t]),
            b.len()
        ));
    }

    let mut unused_roots: Vec<MergeNode> = Vec::new();
    for t in 0..shapes.len() - 1 {
        let steps: Vec<u32> = shapes[t]
            .iter()
            .zip(&shapes[t + 1])
            .map(|(a, b)| (b - a) as u32)
            .collect();
        let total: u32 = steps.iter().sum();
        let group = if total >= 63 { u64::MAX } else { 1u64 << total };
        let mut merged = 0;
        while buckets[t].len() as u64 >= group {
            let children: Vec<MergeNode> = buckets[t].drain(..group as usize).collect();
            buckets[t + 1].push_back(MergeNode::Stack {
                counts: steps.iter().map(|&s| 1u64 << s).collect(),
                child_log_sides: shapes[t].clone(),
                children,
            });
            merged += 1;
        }
        if merged > 0 {
            trace.push(format!(
                "merge bucket {} into bucket {}: {merged} group(s) of {group}",
                t + 1,
                t + 2
            ));
        }
        for left in buckets[t].drain(..) {
            let mut ids = Vec::new();
            left.leaves(&mut ids);
            trace.push(format!(
                "bucket {} leftover, unused: machines {ids:?}",
                t + 1
            ));
            unused_roots.push(left);
        }
    }

    let mut shape = shapes.last().expect("nonempty").clone();
    let mut top: VecDeque<MergeNode> = buckets.pop().expect("nonempty");
    while top.len() > 1 {
        let min = *shape.iter().min().expect("k >= 1");
        let dim = shape.iter().rposition(|&a| a == min).expect("min exists");
        let mut next = VecDeque::with_capacity(top.len() / 2 + 1);
        while top.len() >= 2 {
            let a = top.pop_front().expect("len >= 2");
            let b = top.pop_front().expect("len >= 2");
            let mut counts = vec![1u64; k];
            counts[dim] = 2;
            next.push_back(MergeNode::Stack {
                counts,
                child_log_sides: shape.clone(),
                children: vec![a, b],
            });
        }
        trace.push(format!(
            "pairwise merge {} along dimension {dim}: {} pair(s)",
            fmt_shape(&shape),
            next.len()
        ));
        if let Some(left) = top.pop_front() {
            let mut ids = Vec::new();
            left.leaves(&mut ids);
            trace.push(format!("odd one out, unused: machines {ids:?}"));
            unused_roots.push(left);
        }
        shape[dim] += 1;
        top = next;
    }
    let root = top.pop_front().expect("top bucket nonempty");

    let n_big = BigRational::from_integer(BigInt::from(n));
    let scale: Vec<BigRational> = shape
        .iter()
        .map(|&a| {
            let side = pow2(a as i64);
            if side < n_big {
                &n_big / side
            } else {
                BigRational::one()
            }
        })
        .collect();
    trace.push(format!(
        "R = {}, scale f = [{}]",
        fmt_shape(&shape),
        scale
            .iter()
            .map(ratio_serde::format)
            .collect::<Vec<_>>()
            .join(", ")
    ));

    let mut machines: Vec<MachinePlacement> = rects
        .iter()
        .zip(&exps)
        .map(|(r, e)| MachinePlacement {
            machine: r.machine,
            used: false,
            sides: r.sides.clone(),
            log_sides: e.clone().unwrap_or_default(),
            lo: vec![BigRational::zero(); k],
            hi: vec![BigRational::zero(); k],
            grid_lo: vec![0; k],
            grid_hi: vec![0; k],
        })
        .collect();
    let mut index = std::collections::HashMap::new();
    for (i, r) in rects.iter().enumerate() {
        if index.insert(r.machine, i).is_some() {
            return Err(Error::PackingPrecondition(format!(
                "machine {} appears twice",
                r.machine
            )));
        }
    }
    let origin = vec![BigRational::zero(); k];
    layout(&root, &shape, &origin, &scale, n, &index, &mut machines)?;

    Ok(Placement {
        n,
        k,
        machines,
        scale,
        root_log_sides: shape,
        tree: root,
        trace,
    })
}

fn layout(
    node: &MergeNode,
    log_sides: &[i32],
    origin: &[BigRational],
    scale: &[BigRational],
    n: u64,
    index: &std::collections::HashMap<usize, usize>,
    machines: &mut [MachinePlacement],
) -> Result<()> {
    match node {
        MergeNode::Leaf { machine } => {
            let i = *index
                .get(machine)
                .ok_or_else(|| Error::Placement(format!("unknown machine {machine}")))?;
            let mp = &mut machines[i];
            if mp.used {
                return Err(Error::Placement(format!("machine {machine} placed twice")));
            }
            if mp.log_sides != log_sides {
                return Err(Error::Placement(format!(
                    "machine {machine} has the wrong shape"
                )));
            }
            mp.used = true;
            for d in 0..log_sides.len() {
                let lo = &origin[d] * &scale[d];
                let hi = (&origin[d] + pow2(log_sides[d] as i64)) * &scale[d];
                mp.grid_lo[d] = ceil_clip(&lo, n);
                mp.grid_hi[d] = ceil_clip(&hi, n);
                mp.lo[d] = lo;
                mp.hi[d] = hi;
            }
            Ok(())
        }
        MergeNode::Stack {
            counts,
            child_log_sides,
            children,
        } => {
            let expected: u64 = counts.iter().product();
            if children.len() as u64 != expected {
                return Err(Error::Placement("stack child count mismatch".into()));
            }
            for (q, child) in children.iter().enumerate() {
                let mut rest = q as u64;
                let mut o = origin.to_vec();
                for d in 0..counts.len() {
                    let digit = rest % counts[d];
                    rest /= counts[d];
                    o[d] += pow2(child_log_sides[d] as i64) * BigInt::from(digit);
                }
                layout(child, child_log_sides, &o, scale, n, index, machines)?;
            }
            Ok(())
        }
    }
}

impl Placement {
    pub fn machine(&self, id: usize) -> Option<&MachinePlacement> {
        self.machines.iter().find(|m| m.machine == id)
    }

    pub fn used(&self) -> impl Iterator<Item = &MachinePlacement> {
        self.machines.iter().filter(|m| m.used)
    }

    /// Volume of `R` before scaling.
    pub fn root_volume(&self) -> BigRational {
        pow2(self.root_log_sides.iter().map(|&a| a as i64).sum())
    }

    pub fn scale_product(&self) -> BigRational {
        self.scale.iter().fold(BigRational::one(), |acc, f| acc * f)
    }

    /// Machine owning a grid point, found by descending the merge tree.
    pub fn locate(&self, point: &[u64]) -> Result<usize> {
        if point.len() != self.k || point.iter().any(|&x| x >= self.n) {
            return Err(Error::Placement(format!(
                "point {point:?} outside the grid"
            )));
        }
        // point in pre-scaling coordinates
        let y: Vec<BigRational> = point
            .iter()
            .zip(&self.scale)
            .map(|(&x, f)| BigRational::from_integer(BigInt::from(x)) / f)
            .collect();
        let mut origin = vec![BigRational::zero(); self.k];
        let mut node = &self.tree;
        loop {
            match node {
                MergeNode::Leaf { machine } => return Ok(*machine),
                MergeNode::Stack {
                    counts,
                    child_log_sides,
                    children,
                } => {
                    let mut q = 0u64;
                    let mut stride = 1u64;
                    for d in 0..self.k {
                        let side = pow2(child_log_sides[d] as i64);
                        let digit = ((&y[d] - &origin[d]) / &side).floor().to_integer();
                        let digit = digit.to_u64().filter(|&v| v < counts[d]).ok_or_else(|| {
                            Error::Placement(format!("point {point:?} falls outside R"))
                        })?;
                        origin[d] += side * BigInt::from(digit);
                        q += digit * stride;
                        stride *= counts[d];
                    }
                    node = &children[q as usize];
                }
            }
        }
    }

    /// Projection inflation `vol(pi_S adjusted) / vol(pi_S original)` for
    /// every used machine and atom, with its bound `2^(k+1+r_j)`.
    pub fn inflation(&self, q: &Query) -> Vec<InflationRecord> {
        let mut out = Vec::new();
        for m in self.used() {
            let adjusted = m.adjusted_sides();
            for (j, atom) in q.atoms().iter().enumerate() {
                let before: f64 = atom.vars.iter().map(|&v| m.sides[v]).product();
                let after: f64 = atom.vars.iter().map(|&v| adjusted[v]).product();
                out.push(InflationRecord {
                    machine: m.machine,
                    atom: j,
                    ratio: after / before,
                    bound: 2f64.powi((self.k + 1 + atom.arity()) as i32),
                });
            }
        }
        out
    }

    /// Every invariant of a placement; returns the violations found.
    pub fn verify(&self, q: Option<&Query>) -> Vec<String> {
        let mut problems = Vec::new();
        let k = self.k;
        if self.scale.len() != k || self.root_log_sides.len() != k {
            problems.push("scale or root shape has the wrong dimension".into());
            return problems;
        }
        for m in &self.machines {
            if m.lo.len() != k || m.hi.len() != k || m.grid_lo.len() != k || m.grid_hi.len() != k {
                problems.push(format!("machine {}: wrong dimension", m.machine));
                return problems;
            }
        }

        // placed leaves and used flags reconcile
        let mut leaves = Vec::new();
        self.tree.leaves(&mut leaves);
        let mut sorted = leaves.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != leaves.len() {
            problems.push("a machine occurs twice in the merge tree".into());
        }
        for m in &self.machines {
            if m.used != leaves.contains(&m.machine) {
                problems.push(format!(
                    "machine {}: used flag disagrees with the merge tree",
                    m.machine
                ));
            }
        }

        // box geometry agrees with rounded sides and scale
        for m in self.used() {
            if m.log_sides.len() != k {
                problems.push(format!("machine {}: used without rounded sides", m.machine));
                continue;
            }
            for d in 0..k {
                let want = pow2(m.log_sides[d] as i64) * &self.scale[d];
                if &m.hi[d] - &m.lo[d] != want {
                    problems.push(format!(
                        "machine {}: side {d} is not 2^alpha * f",
                        m.machine
                    ));
                }
                if m.grid_lo[d] != ceil_clip(&m.lo[d], self.n)
                    || m.grid_hi[d] != ceil_clip(&m.hi[d], self.n)
                {
                    problems.push(format!(
                        "machine {}: grid bounds disagree with box",
                        m.machine
                    ));
                }
            }
            if m.sides
                .iter()
                .zip(&m.log_sides)
                .any(|(&s, &a)| round_up_pow2(s) != Some(a))
            {
                problems.push(format!(
                    "machine {}: rounding is not the next power of two",
                    m.machine
                ));
            }
        }

        // disjoint boxes whose clipped volumes sum to n^k tile the grid
        let used: Vec<&MachinePlacement> = self.used().collect();
        for (a, ma) in used.iter().enumerate() {
            for mb in &used[a + 1..] {
                let overlap = (0..k)
                    .all(|d| ma.grid_lo[d].max(mb.grid_lo[d]) < ma.grid_hi[d].min(mb.grid_hi[d]));
                if overlap {
                    problems.push(format!(
                        "machines {} and {} overlap",
                        ma.machine, mb.machine
                    ));
                }
            }
        }
        let all: Vec<usize> = (0..k).collect();
        let covered: u128 = used.iter().map(|m| m.grid_projection_volume(&all)).sum();
        let want = (self.n as u128).checked_pow(k as u32);
        if want != Some(covered) {
            problems.push(format!("boxes cover {covered} grid points, expected n^k"));
        }

        // size bounds on R and the scale factors
        let half = BigRational::from_integer(BigInt::from(self.n).pow(k as u32)) / BigInt::from(2);
        if self.root_volume() <= half {
            problems.push("R has volume at most n^k / 2".into());
        }
        if self.scale_product() > pow2(k as i64 + 1) {
            problems.push("product of scale factors exceeds 2^(k+1)".into());
        }
        if let Some(q) = q {
            for rec in self.inflation(q) {
                if rec.ratio > rec.bound * (1.0 + INFLATION_SLACK) {
                    problems.push(format!(
                        "machine {} atom {}: inflation {} exceeds {}",
                        rec.machine, rec.atom, rec.ratio, rec.bound
                    ));
                }
            }
        }
        problems
    }
}
