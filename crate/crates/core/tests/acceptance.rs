//! Acceptance suite. Runs without the libtest harness and prints one
//! `PASS` / `FAIL` line per criterion; the process fails if any criterion
//! fails.

use std::collections::BTreeSet;
use std::process::ExitCode;

use hetjoin::bounds::{
    lower_bound_general, lower_bound_linear, lower_bound_unequal, per_machine_edge_packing,
    InstanceSchema, SizeUnit,
};
use hetjoin::cost::{exact_lp_norm, MachineFleet};
use hetjoin::datagen::{
    expected_output_size_for, gen_dense, gen_matching, DenseSpec, MatchingSpec,
};
use hetjoin::engine::{brute_force_join, run_one_round};
use hetjoin::lp::{
    maximum_fractional_edge_packing, minimum_fractional_vertex_cover, rational, EdgePacking,
};
use hetjoin::packing::{pack, Placement};
use hetjoin::partition::{
    binary_join_dims, cartesian_dims, equal_card_linear_dims, exact_linear_sides, triangle_branch,
    triangle_dims, triangle_profile, TriangleLabel,
};
use hetjoin::plan::PlanKind;
use hetjoin::Query;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 0x5eed;

struct Outcome {
    pass: bool,
    detail: String,
}

type Criterion = (&'static str, fn() -> Outcome);

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn main() -> ExitCode {
    let criteria: [Criterion; 12] = [
        ("17-machine fleet: norm 8 and exact sides", reference_fleet),
        ("LP duality with brute-force oracle", duality),
        ("coverage before and after packing", coverage),
        ("packing inflation and scale bounds", inflation),
        ("one-round output equals oracle", oracle_equivalence),
        ("load ratio within 2^(k+1+r)/theta", load_ratio),
        ("general-cost search vs closed form", general_cost),
        ("maximum packing dominates", packing_dominance),
        (
            "unequal bracket, (1,0) packings, doubling probes",
            unequal_bracket,
        ),
        ("triangle side map continuity", triangle_continuity),
        ("sparse load concentration", sparse_concentration),
        ("expected output size", output_size),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let o = run();
        if !o.pass {
            failed += 1;
        }
        println!(
            "{} criterion {:>2}: {name} ({})",
            if o.pass { "PASS" } else { "FAIL" },
            i + 1,
            o.detail
        );
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn mixed_fleet() -> MachineFleet {
    let mut w = vec![4, 4, 3, 2, 2, 2];
    w.extend([1; 11]);
    MachineFleet::linear(&w).unwrap()
}

fn reference_fleet() -> Outcome {
    let fleet = mixed_fleet();
    let q = Query::cartesian();
    let cover = minimum_fractional_vertex_cover(&q);
    let norm = exact_lp_norm(&fleet, &cover.total).unwrap();
    let n = 64u64;
    let sides = exact_linear_sides(n, &fleet, &cover).unwrap().unwrap();
    let want = |w: u64| match w {
        4 => rational(64, 2),
        3 => rational(3 * 64, 8),
        2 => rational(64, 4),
        _ => rational(64, 8),
    };
    let weights = fleet.linear_weights().unwrap();
    let sides_ok = weights
        .iter()
        .zip(&sides)
        .all(|(&w, s)| s.iter().all(|x| *x == want(w)));
    let norm_ok = norm == Some(rational(8, 1));
    outcome(
        norm_ok && sides_ok,
        format!(
            "norm = {:?}, sides exact = {sides_ok}",
            norm.map(|r| r.to_string())
        ),
    )
}

/// Optimum of the packing / cover LP over a grid of weights `i / d`.
fn grid_oracle(q: &Query, d: i64) -> (BigRational, BigRational) {
    let grid: Vec<BigRational> = (0..=d).map(|i| rational(i, d)).collect();
    let mut best_pack = BigRational::zero();
    let mut idx = vec![0usize; q.l()];
    loop {
        let u: Vec<&BigRational> = idx.iter().map(|&i| &grid[i]).collect();
        let feasible = (0..q.k()).all(|v| {
            q.atoms_of(v).map(|j| u[j].clone()).sum::<BigRational>() <= BigRational::one()
        });
        if feasible {
            let total: BigRational = u.iter().copied().sum();
            if total > best_pack {
                best_pack = total;
            }
        }
        if !advance(&mut idx, grid.len()) {
            break;
        }
    }
    let mut best_cover: Option<BigRational> = None;
    let mut idx = vec![0usize; q.k()];
    loop {
        let v: Vec<&BigRational> = idx.iter().map(|&i| &grid[i]).collect();
        let feasible = q.atoms().iter().all(|a| {
            a.vars.iter().map(|&x| v[x].clone()).sum::<BigRational>() >= BigRational::one()
        });
        if feasible {
            let total: BigRational = v.iter().copied().sum();
            if best_cover.as_ref().is_none_or(|b| total < *b) {
                best_cover = Some(total);
            }
        }
        if !advance(&mut idx, grid.len()) {
            break;
        }
    }
    (best_pack, best_cover.expect("all-ones cover is feasible"))
}

fn advance(idx: &mut [usize], base: usize) -> bool {
    for slot in idx.iter_mut() {
        *slot += 1;
        if *slot < base {
            return true;
        }
        *slot = 0;
    }
    false
}

fn duality() -> Outcome {
    let cases = [
        ("cartesian", Query::cartesian(), rational(2, 1)),
        ("binary join", Query::binary_join(), rational(1, 1)),
        ("star(2)", Query::star(2), rational(1, 1)),
        ("star(3)", Query::star(3), rational(1, 1)),
        ("triangle", Query::triangle(), rational(3, 2)),
    ];
    let mut pass = true;
    let mut notes = Vec::new();
    for (name, q, want) in cases {
        let u = maximum_fractional_edge_packing(&q);
        let v = minimum_fractional_vertex_cover(&q);
        let (oracle_u, oracle_v) = grid_oracle(&q, 6);
        let ok = u.total == v.total
            && u.total == want
            && oracle_u == want
            && oracle_v == want
            && u.is_feasible(&q)
            && v.is_feasible(&q);
        pass &= ok;
        notes.push(format!("{name}={}", u.total));
    }
    outcome(pass, notes.join(", "))
}

fn random_fleet(rng: &mut ChaCha8Rng, max_p: usize, max_w: u64) -> MachineFleet {
    let p = rng.gen_range(1..=max_p);
    let w: Vec<u64> = (0..p).map(|_| rng.gen_range(1..=max_w)).collect();
    MachineFleet::linear(&w).unwrap()
}

/// Every grid point lies in exactly one used box, and `locate` agrees.
fn exhaustive_cover(p: &Placement) -> bool {
    let k = p.k;
    let total = (p.n as usize).pow(k as u32);
    (0..total).all(|mut code| {
        let mut point = vec![0u64; k];
        for x in point.iter_mut() {
            *x = (code % p.n as usize) as u64;
            code /= p.n as usize;
        }
        let owners: Vec<usize> = p
            .machines
            .iter()
            .filter(|m| m.contains(&point))
            .map(|m| m.machine)
            .collect();
        owners.len() == 1 && p.locate(&point).ok() == Some(owners[0])
    })
}

struct Trial {
    q: Query,
    placement: Placement,
    exact_case: bool,
    volume_ratio: f64,
}

/// Shared by the coverage and inflation criteria: random fleets, each packed for
/// the equal-cardinality construction and for the query's own construction
/// with random cardinalities.
fn trials() -> Vec<Trial> {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut out = Vec::new();
    for _ in 0..200 {
        let fleet = random_fleet(&mut rng, 20, 8);
        let n = rng.gen_range(2..=8u64);
        for q in [Query::cartesian(), Query::binary_join(), Query::triangle()] {
            let k = q.k();
            let nk = (n as f64).powi(k as i32);
            let m = rng.gen_range(1..=n);
            let schema = InstanceSchema::uniform(&q, n, m).unwrap();
            let cover = minimum_fractional_vertex_cover(&q);
            let rects = equal_card_linear_dims(&schema, &fleet, &cover).unwrap();
            let vol: f64 = rects.iter().map(|r| r.volume()).sum();
            out.push(Trial {
                placement: pack(&rects, n, k).unwrap(),
                q: q.clone(),
                exact_case: true,
                volume_ratio: vol / nk,
            });

            let cards: Vec<u64> = q
                .arities()
                .iter()
                .map(|&r| rng.gen_range(1..=n.pow(r as u32).min(n)))
                .collect();
            let schema = InstanceSchema::for_query(&q, n, cards).unwrap();
            let l = lower_bound_unequal(&q, &schema, &fleet, 1e-9, SizeUnit::Bits)
                .unwrap()
                .l_lower;
            let part = match q.l() {
                2 if q.k() == 2 => cartesian_dims(&q, &schema, &fleet, l),
                2 => binary_join_dims(&q, &schema, &fleet, l),
                _ => triangle_dims(&q, &schema, &fleet, l),
            }
            .unwrap();
            out.push(Trial {
                placement: pack(&part.rects, n, k).unwrap(),
                q,
                exact_case: false,
                volume_ratio: part.total_volume() / nk,
            });
        }
    }
    out
}

fn coverage() -> Outcome {
    let trials = trials();
    let mut worst_exact: f64 = 0.0;
    let mut min_other = f64::INFINITY;
    let mut grid_ok = true;
    for t in &trials {
        if t.exact_case {
            worst_exact = worst_exact.max((t.volume_ratio - 1.0).abs());
        } else {
            min_other = min_other.min(t.volume_ratio);
        }
        grid_ok &= exhaustive_cover(&t.placement) && t.placement.verify(Some(&t.q)).is_empty();
    }
    let pass = worst_exact <= 1e-9 && min_other >= 1.0 - 1e-9 && grid_ok;
    outcome(
        pass,
        format!(
            "{} placements, max |sum/n^k - 1| = {worst_exact:.1e} (exact case), \
             min sum/n^k = {min_other:.6} (other), exhaustive grid ok = {grid_ok}",
            trials.len()
        ),
    )
}

fn inflation() -> Outcome {
    let trials = trials();
    let mut worst: f64 = 0.0;
    let mut scale_ok = true;
    let mut root_ok = true;
    for t in &trials {
        for rec in t.placement.inflation(&t.q) {
            worst = worst.max(rec.ratio / rec.bound);
        }
        let k = t.placement.k as u32;
        scale_ok &=
            t.placement.scale_product() <= BigRational::from_integer(BigInt::from(2u64.pow(k + 1)));
        let half = BigRational::new(BigInt::from(t.placement.n).pow(k), BigInt::from(2));
        root_ok &= t.placement.root_volume() > half;
    }
    outcome(
        worst <= 1.0 && scale_ok && root_ok,
        format!(
            "max inflation / 2^(k+1+r) = {worst:.4}, prod f <= 2^(k+1): {scale_ok}, vol(R) > n^k/2: {root_ok}"
        ),
    )
}

fn plan_cases() -> Vec<(PlanKind, Query, MachineFleet)> {
    let lin = MachineFleet::linear(&[3, 2, 1, 1]).unwrap();
    let poly = MachineFleet::polynomial(2.0, &[4.0, 1.0, 1.0]).unwrap();
    vec![
        (PlanKind::EqualLinear, Query::triangle(), lin.clone()),
        (PlanKind::EqualGeneral, Query::triangle(), poly),
        (PlanKind::Cartesian, Query::cartesian(), lin.clone()),
        (PlanKind::BinaryJoin, Query::binary_join(), lin.clone()),
        (PlanKind::Star, Query::star(3), lin.clone()),
        (PlanKind::Triangle, Query::triangle(), lin),
    ]
}

fn oracle_equivalence() -> Outcome {
    let mut runs = 0;
    let mut mismatches = Vec::new();
    for (kind, q, fleet) in plan_cases() {
        for n in [4u64, 8, 16] {
            for seed in 0..50u64 {
                for dense in [false, true] {
                    let inst = if dense {
                        gen_dense(
                            &q,
                            &DenseSpec {
                                n,
                                theta: 0.5,
                                seed,
                                bernoulli: false,
                            },
                        )
                    } else {
                        // unequal cardinalities, except where the plan needs them equal
                        let cards = (0..q.l())
                            .map(|j| match kind {
                                PlanKind::EqualLinear | PlanKind::EqualGeneral => n / 2,
                                _ => (n - j as u64 * n / 4).max(1),
                            })
                            .collect();
                        gen_matching(
                            &q,
                            &MatchingSpec {
                                n,
                                cardinalities: cards,
                                theta: None,
                                seed,
                            },
                        )
                    }
                    .unwrap();
                    runs += 1;
                    let ok = match run_one_round(&q, &inst, &fleet, kind, seed) {
                        Ok((res, _)) => {
                            let total: usize = res.machine_outputs.iter().map(Vec::len).sum();
                            let union: BTreeSet<&Vec<u64>> =
                                res.machine_outputs.iter().flatten().collect();
                            res.output == brute_force_join(&q, &inst) && total == union.len()
                        }
                        Err(_) => false,
                    };
                    if !ok {
                        mismatches.push(format!("{kind}/n={n}/seed={seed}/dense={dense}"));
                    }
                }
            }
        }
    }
    outcome(
        mismatches.is_empty(),
        format!(
            "{runs} runs, {} mismatches{}",
            mismatches.len(),
            mismatches
                .first()
                .map(|m| format!(", first {m}"))
                .unwrap_or_default()
        ),
    )
}

fn load_ratio() -> Outcome {
    let q = Query::triangle();
    let bound = 2f64.powi(3 + 1 + 2) / 0.5;
    let mut notes = Vec::new();
    let mut pass = true;
    for weights in [vec![1u64; 8], vec![8, 4, 2, 1, 1, 1, 1, 1]] {
        let fleet = MachineFleet::linear(&weights).unwrap();
        let inst = gen_dense(
            &q,
            &DenseSpec {
                n: 16,
                theta: 0.5,
                seed: SEED,
                bernoulli: false,
            },
        )
        .unwrap();
        let (res, _) = run_one_round(&q, &inst, &fleet, PlanKind::EqualLinear, SEED).unwrap();
        pass &= res.report.ratio <= bound;
        notes.push(format!("w={weights:?}: ratio {:.3}", res.report.ratio));
    }
    outcome(pass, format!("{} (bound {bound})", notes.join("; ")))
}

fn general_cost() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let a = 2.0;
    let mut worst: f64 = 0.0;
    for trial in 0..40 {
        let q = [Query::cartesian(), Query::binary_join(), Query::triangle()][trial % 3].clone();
        let p = rng.gen_range(1..=8);
        let w: Vec<f64> = (0..p).map(|_| rng.gen_range(1..=16) as f64).collect();
        let fleet = MachineFleet::polynomial(a, &w).unwrap();
        let m = 1_000_000u64;
        let n = if q.arities().iter().all(|&r| r == 1) {
            m
        } else {
            1000
        };
        let schema = InstanceSchema::uniform(&q, n, m).unwrap();
        let packing = maximum_fractional_edge_packing(&q);
        let u = packing.total_f64();
        let got = lower_bound_general(&schema, &fleet, &packing, 1e-10).unwrap();
        let sum: f64 = w.iter().map(|wc| wc.powf(u / a)).sum();
        let closed = (m as f64).powf(a) / sum.powf(a / u);
        worst = worst.max((got - closed).abs() / closed);
    }
    outcome(
        worst <= 1e-5,
        format!("40 fleets, max relative gap {worst:.2e}"),
    )
}

fn random_packing(q: &Query, rng: &mut ChaCha8Rng) -> EdgePacking {
    let raw: Vec<i64> = (0..q.l()).map(|_| rng.gen_range(0..=1000)).collect();
    let worst = (0..q.k())
        .map(|v| q.atoms_of(v).map(|j| raw[j]).sum::<i64>())
        .max()
        .unwrap_or(1)
        .max(1000);
    let weights = raw.iter().map(|&x| rational(x, worst)).collect();
    EdgePacking::new(q, weights).unwrap()
}

fn packing_dominance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let lin = MachineFleet::linear(&[5, 3, 2, 1]).unwrap();
    let poly = MachineFleet::polynomial(1.5, &[5.0, 3.0, 2.0, 1.0]).unwrap();
    let mut checked = 0;
    let mut violations = 0;
    for q in [
        Query::cartesian(),
        Query::binary_join(),
        Query::star(3),
        Query::triangle(),
    ] {
        let schema = InstanceSchema::uniform(&q, 64, 50).unwrap();
        let best = maximum_fractional_edge_packing(&q);
        let lin_best = lower_bound_linear(&schema, &lin, &best).unwrap();
        let gen_best = lower_bound_general(&schema, &poly, &best, 1e-9).unwrap();
        for _ in 0..100 {
            let u = random_packing(&q, &mut rng);
            checked += 2;
            if lower_bound_linear(&schema, &lin, &u).unwrap() > lin_best * (1.0 + 1e-12) {
                violations += 1;
            }
            if lower_bound_general(&schema, &poly, &u, 1e-9).unwrap() > gen_best * (1.0 + 1e-8) {
                violations += 1;
            }
        }
    }
    outcome(
        violations == 0,
        format!("{checked} comparisons, {violations} violations"),
    )
}

fn unequal_bracket() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let queries = [
        Query::cartesian(),
        Query::binary_join(),
        Query::star(3),
        Query::triangle(),
    ];
    let mut trials = 0;
    let mut bracket_bad = 0;
    let mut probes_bad = 0;
    let mut packing_bad = 0;
    let mut strict_checked = 0;
    for t in 0..200 {
        let q = &queries[t % queries.len()];
        let fleet = random_fleet(&mut rng, 16, 10);
        let n = 256u64;
        let cards: Vec<u64> = (0..q.l()).map(|_| rng.gen_range(1..=n)).collect();
        let schema = InstanceSchema::for_query(q, n, cards.clone()).unwrap();
        let r = lower_bound_unequal(q, &schema, &fleet, 1e-9, SizeUnit::Tuples).unwrap();
        trials += 1;
        let w = fleet.linear_weights().unwrap();
        let max_m = *cards.iter().max().unwrap() as f64;
        let lo = max_m / w.iter().sum::<u64>() as f64;
        let hi = max_m / *w.iter().max().unwrap() as f64;
        if r.l_lower < lo * (1.0 - 1e-12)
            || r.l_lower > hi * (1.0 + 1e-12)
            || r.monotonicity_violations > 0
        {
            bracket_bad += 1;
        }
        let cap = (w.len() as f64).log2().ceil() as usize + 1;
        if r.doubling_probes.unwrap_or(usize::MAX) > cap {
            probes_bad += 1;
        }
        if t % queries.len() == 1 {
            // binary join: (1,0) attains the per-machine minimum
            let sizes = schema.sizes(SizeUnit::Tuples);
            let (big, small) = if sizes[0] >= sizes[1] { (0, 1) } else { (1, 0) };
            for &wc in &w {
                let budget = r.l_lower * wc as f64;
                let chosen = per_machine_edge_packing(q, budget, &sizes);
                let value = |u: &[f64]| -> f64 {
                    u.iter()
                        .zip(&sizes)
                        .map(|(uj, s)| uj * (budget / s).ln())
                        .sum()
                };
                let mut one_zero = vec![0.0; 2];
                one_zero[big] = 1.0;
                let attained = value(&one_zero) <= value(&chosen.weights_f64()) + 1e-12;
                let strict = sizes[big] > sizes[small] && budget < sizes[big] * (1.0 - 1e-9);
                let exact = chosen.weights_f64() == one_zero;
                if strict {
                    strict_checked += 1;
                }
                if !attained || (strict && !exact) {
                    packing_bad += 1;
                }
            }
        }
    }
    outcome(
        bracket_bad + probes_bad + packing_bad == 0,
        format!(
            "{trials} instances: {bracket_bad} outside bracket, {probes_bad} over the probe cap, \
             {packing_bad} binary-join packings not (1,0) ({strict_checked} strict cases)"
        ),
    )
}

fn triangle_continuity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let q = Query::triangle();
    let n = 1024u64;
    let mut worst: f64 = 0.0;
    let mut labels_ok = true;
    for _ in 0..100 {
        // distinct sizes, so f_y = M_3 / M_2 < 1 at the upper boundary
        let mut cards: BTreeSet<u64> = BTreeSet::new();
        while cards.len() < 3 {
            cards.insert(rng.gen_range(1..=n * 4));
        }
        let cards: Vec<u64> = cards.into_iter().rev().collect();
        let schema = InstanceSchema::for_query(&q, n, cards).unwrap();
        let m: Vec<f64> = (0..3).map(|j| schema.bits(j) as f64).collect();
        // budgets where f_z = 1 and f_x = 1
        let at_z = m[1] * m[2] / m[0];
        let at_x = m[0] * m[2] / m[1];
        for (budget, lo_label, hi_label) in [
            (at_z, TriangleLabel::Small, TriangleLabel::Medium),
            (at_x, TriangleLabel::Medium, TriangleLabel::Big),
        ] {
            let p = triangle_profile(&q, &schema, 1, budget).unwrap();
            let a = triangle_branch(&p, lo_label, n as f64);
            let b = triangle_branch(&p, hi_label, n as f64);
            for (x, y) in a.iter().zip(&b) {
                worst = worst.max((x - y).abs() / n as f64);
            }
            // just below and just above the boundary
            let below = triangle_profile(&q, &schema, 1, budget * (1.0 - 1e-12)).unwrap();
            let above = triangle_profile(&q, &schema, 1, budget * (1.0 + 1e-12)).unwrap();
            labels_ok &= below.label == lo_label && above.label == hi_label;
            let da = triangle_branch(&below, below.label, n as f64);
            let db = triangle_branch(&above, above.label, n as f64);
            for (x, y) in da.iter().zip(&db) {
                worst = worst.max((x - y).abs() / n as f64);
            }
        }
    }
    outcome(
        worst <= 1e-9 && labels_ok,
        format!("max branch gap / n = {worst:.1e}, labels straddle boundaries: {labels_ok}"),
    )
}

fn sparse_concentration() -> Outcome {
    let q = Query::binary_join();
    let fleet = MachineFleet::linear(&[1; 4]).unwrap();
    let (n, m) = (256u64, 256u64);
    let mut pairs = 0;
    let mut inside = 0;
    for seed in 0..100u64 {
        let inst = gen_matching(
            &q,
            &MatchingSpec {
                n,
                cardinalities: vec![m, m],
                theta: None,
                seed,
            },
        )
        .unwrap();
        let (res, plan) = run_one_round(&q, &inst, &fleet, PlanKind::EqualLinear, seed).unwrap();
        for (load, mp) in res.report.machines.iter().zip(&plan.placement.machines) {
            for (j, atom) in q.atoms().iter().enumerate() {
                let qc = mp.grid_projection_volume(&atom.vars) as f64
                    / (n as f64).powi(atom.arity() as i32);
                let mean = m as f64 * qc;
                let sd = (m as f64 * qc * (1.0 - qc)).sqrt();
                pairs += 1;
                if (load.tuples_per_atom[j] as f64 - mean).abs() <= 3.0 * sd + 1e-9 {
                    inside += 1;
                }
            }
        }
    }
    let frac = inside as f64 / pairs as f64;
    outcome(
        frac >= 0.99,
        format!("{inside}/{pairs} (machine, atom, seed) counts within 3 sd"),
    )
}

fn output_size() -> Outcome {
    let mut notes = Vec::new();
    let mut pass = true;
    for (q, n) in [(Query::triangle(), 8u64), (Query::binary_join(), 8)] {
        let theta = 0.5;
        let sizes: Vec<f64> = (0..200u64)
            .map(|seed| {
                let inst = gen_dense(
                    &q,
                    &DenseSpec {
                        n,
                        theta,
                        seed,
                        bernoulli: true,
                    },
                )
                .unwrap();
                brute_force_join(&q, &inst).len() as f64
            })
            .collect();
        let mean = sizes.iter().sum::<f64>() / sizes.len() as f64;
        let var = sizes.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (sizes.len() - 1) as f64;
        let se = (var / sizes.len() as f64).sqrt();
        let cards: Vec<f64> = q
            .arities()
            .iter()
            .map(|&r| theta * (n as f64).powi(r as i32))
            .collect();
        let expected = expected_output_size_for(&q, n, &cards);
        let ok = (mean - expected).abs() <= 5.0 * se;
        pass &= ok;
        notes.push(format!("mean {mean:.2} vs {expected:.2} (se {se:.2})"));
    }
    outcome(pass, notes.join("; "))
}
