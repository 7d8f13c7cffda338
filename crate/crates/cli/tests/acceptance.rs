//! Acceptance criteria, one pass/fail line each.
//!
//! Run with `cargo test -p sepqcqp-cli --test acceptance`.

use std::io::Write as _;
use std::time::Instant;

use rand::Rng;
use sepqcqp::certificates::{
    check_qcqp_sign_pattern, check_sign_pattern, extract_convex_solution, CertificateKind, SignCase,
    SparsityGraph,
};
use sepqcqp::connection::{judge, JudgeOptions, VerdictStatus};
use sepqcqp::model::{brute_force, HomSepQcqp, Qcqp, SearchBox};
use sepqcqp::random::{
    generate_example52, random_convex, random_homogeneous, random_sign_pattern, rng_from_seed, sample_feasible,
    Example52Dims,
};
use sepqcqp::{build_hom, build_shor, extract_point, make_example51, reduce, solve, Error, SolveStatus, SolverOptions};
use sepqcqp_cli::commands::example51_row;

const RANK_TOL: f64 = 1e-6;
const REDUCE_TOL: f64 = 1e-7;
const SAMPLES: usize = 100;
const SAMPLE_TRIES: usize = 400_000;

/// An instance kept for the weak-duality sweep.
struct Instance {
    label: String,
    qcqp: Qcqp<f64>,
    eta: f64,
    center: Vec<f64>,
    radius: f64,
}

struct Outcome {
    pass: bool,
    detail: String,
}

/// Written to the stderr handle directly so the lines survive output capture.
fn line(n: usize, o: &Outcome) {
    let _ = writeln!(std::io::stderr(), "criterion {n}: {} {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
}

fn criterion1(pool: &mut Vec<Instance>) -> Outcome {
    let opts = JudgeOptions::default();
    let cases = [
        (0.0, -6.0, 1, true, -6.0),
        (1.0, -1.0, 1, true, -1.0),
        (2.0, 4.0, 1, true, 4.0),
        (2.5, 22.0 / 3.0, 2, false, 9.0),
        (3.0, 9.0, 1, true, 9.0),
    ];
    let start = Instant::now();
    let mut rows = Vec::new();
    for &(alpha, ..) in &cases {
        rows.push(example51_row(alpha, &opts).expect("example row"));
    }
    let elapsed = start.elapsed().as_secs_f64();
    let mut fails = Vec::new();
    for (row, &(alpha, eta, rank, exact, zeta)) in rows.iter().zip(&cases) {
        if (row.eta - eta).abs() > 1e-4 {
            fails.push(format!("alpha {alpha}: eta {} != {eta}", row.eta));
        }
        if row.rank_v != rank {
            fails.push(format!("alpha {alpha}: rank {} != {rank}", row.rank_v));
        }
        let want = if exact { row.verdict_is_exact() } else { row.verdict == "not-exact" };
        if !want {
            fails.push(format!("alpha {alpha}: verdict {}", row.verdict));
        }
        if row.oracle_value.is_none_or(|z| (z - zeta).abs() > 1e-3) {
            fails.push(format!("alpha {alpha}: oracle {:?} != {zeta}", row.oracle_value));
        }
        if row.matches_table != Some(true) {
            fails.push(format!("alpha {alpha}: table mismatch"));
        }
    }
    if elapsed >= 2.0 {
        fails.push(format!("runtime {elapsed:.2}s"));
    }
    let observed = example51_row(3.5, &opts).expect("observed row");
    if observed.matches_table.is_some() {
        fails.push("alpha 3.5 asserted against the table".into());
    }
    for &(alpha, ..) in &cases {
        let h = make_example51(alpha).unwrap();
        let sol = solve(&build_hom(&h), &SolverOptions::default()).unwrap();
        pool.push(Instance {
            label: format!("example51 alpha {alpha}"),
            qcqp: h.to_qcqp(),
            eta: sol.value,
            center: vec![0.0; h.total_dim()],
            radius: 4.0,
        });
    }
    Outcome {
        pass: fails.is_empty(),
        detail: format!(
            "5 rows in {elapsed:.2}s; alpha 3.5 observed eta {:.6}, {}{}",
            observed.eta,
            observed.verdict,
            if fails.is_empty() { String::new() } else { format!("; {}", fails.join("; ")) }
        ),
    }
}

fn criterion2(pool: &mut Vec<Instance>) -> Outcome {
    let start = Instant::now();
    let mut fails = Vec::new();
    let (mut worst_feas, mut worst_obj) = (0.0f64, 0.0f64);
    for seed in 0..50u64 {
        let mut rng = rng_from_seed(seed);
        let n = rng.gen_range(1..=5);
        let m = rng.gen_range(1..=4);
        let p = random_convex(&mut rng, n, m);
        let sol = solve(&build_shor(&p.qcqp), &SolverOptions::default()).unwrap();
        if sol.status != SolveStatus::Optimal {
            fails.push(format!("seed {seed}: {}", sol.status));
            continue;
        }
        let u = match extract_convex_solution(&sol.blocks[0]) {
            Ok(u) => u,
            Err(e) => {
                fails.push(format!("seed {seed}: {e}"));
                continue;
            }
        };
        let feas = p.qcqp.max_violation(&u).unwrap();
        let obj = (p.qcqp.eval_objective(&u).unwrap() - sol.value).abs();
        worst_feas = worst_feas.max(feas);
        worst_obj = worst_obj.max(obj);
        if feas > 1e-6 || obj > 1e-5 {
            fails.push(format!("seed {seed}: violation {feas:e}, objective gap {obj:e}"));
        }
        pool.push(Instance {
            label: format!("convex seed {seed}"),
            qcqp: p.qcqp,
            eta: sol.value,
            center: p.anchor,
            radius: p.radius,
        });
    }
    let elapsed = start.elapsed().as_secs_f64();
    if elapsed >= 10.0 {
        fails.push(format!("runtime {elapsed:.2}s"));
    }
    Outcome {
        pass: fails.is_empty(),
        detail: format!(
            "50 instances in {elapsed:.2}s, worst violation {worst_feas:.1e}, worst objective gap {worst_obj:.1e}{}",
            if fails.is_empty() { String::new() } else { format!("; {}", fails.join("; ")) }
        ),
    }
}

fn graph_cases() -> Vec<String> {
    let signed = |n: usize, edges: &[(usize, usize)], s: i8| SparsityGraph::new(n, edges.iter().map(|&e| (e, s)).collect());
    let triangle = [(0, 1), (1, 2), (0, 2)];
    let square = [(0, 1), (1, 2), (2, 3), (0, 3)];
    let mut fails = Vec::new();
    if !check_sign_pattern(&signed(3, &triangle, -1)).certified() {
        fails.push("negative triangle rejected".to_string());
    }
    if !check_sign_pattern(&signed(4, &square, 1)).certified() {
        fails.push("positive square rejected".to_string());
    }
    if check_sign_pattern(&signed(3, &triangle, 1)).certified() {
        fails.push("positive triangle accepted".to_string());
    }
    fails
}

fn criterion3(pool: &mut Vec<Instance>) -> Outcome {
    let mut fails = graph_cases();
    let (mut worst_wit, mut worst_oracle) = (0.0f64, 0.0f64);
    for seed in 0..30u64 {
        let mut rng = rng_from_seed(100 + seed);
        let n = rng.gen_range(1..=3);
        let m = rng.gen_range(1..=3);
        let p = random_sign_pattern(&mut rng, n, m);
        let cert = check_qcqp_sign_pattern(&p.qcqp);
        if cert.kind != CertificateKind::SignPattern(SignCase::AllNonpositive) {
            fails.push(format!("seed {seed}: certificate {}", cert.kind));
        }
        let b = build_shor(&p.qcqp);
        let sol = solve(&b, &SolverOptions::default()).unwrap();
        if sol.status != SolveStatus::Optimal {
            fails.push(format!("seed {seed}: {}", sol.status));
            continue;
        }
        let witness = match reduce(&b, &sol, REDUCE_TOL, RANK_TOL) {
            Ok((red, _)) => extract_point(&red, &b.block_kinds, RANK_TOL).ok(),
            Err(e) => {
                fails.push(format!("seed {seed}: {e}"));
                None
            }
        };
        let Some(w) = witness else {
            fails.push(format!("seed {seed}: no rank-one point"));
            continue;
        };
        let u = &w[0];
        let viol = p.qcqp.max_violation(u).unwrap();
        let gap = (p.qcqp.eval_objective(u).unwrap() - sol.value).abs();
        worst_wit = worst_wit.max(gap);
        if gap > 1e-4 || viol > 1e-6 {
            fails.push(format!("seed {seed}: witness gap {gap:e}, violation {viol:e}"));
        }
        let oracle = brute_force(&p.qcqp, &SearchBox::cube(n, p.radius), 41, 30).unwrap();
        let og = (oracle.value - sol.value).abs();
        worst_oracle = worst_oracle.max(og);
        if og > 1e-3 {
            fails.push(format!("seed {seed}: oracle {} vs eta {}", oracle.value, sol.value));
        }
        pool.push(Instance {
            label: format!("sign-pattern seed {seed}"),
            qcqp: p.qcqp,
            eta: sol.value,
            center: p.anchor,
            radius: p.radius,
        });
    }
    Outcome {
        pass: fails.is_empty(),
        detail: format!(
            "30 instances + 3 graph cases, worst witness gap {worst_wit:.1e}, worst oracle gap {worst_oracle:.1e}{}",
            if fails.is_empty() { String::new() } else { format!("; {}", fails.join("; ")) }
        ),
    }
}

/// Seeded homogeneous instances with optimal relaxations, `count` of them.
fn optimal_homogeneous(base: u64, count: usize, m_of: impl Fn(&mut dyn rand::RngCore) -> usize) -> Vec<(u64, HomSepQcqp<f64>, Vec<f64>)> {
    let mut out = Vec::new();
    let mut seed = base;
    while out.len() < count {
        let mut rng = rng_from_seed(seed);
        let q = rng.gen_range(1..=3);
        let dims: Vec<usize> = (0..q).map(|_| rng.gen_range(1..=3)).collect();
        let m = m_of(&mut rng);
        let p = random_homogeneous(&mut rng, &dims, m, false);
        let sol = solve(&build_hom(&p.problem), &SolverOptions::default()).unwrap();
        if sol.status == SolveStatus::Optimal {
            out.push((seed, p.problem, p.anchor));
        }
        seed += 1;
    }
    out
}

enum Reduced {
    Done { ranks: Vec<usize>, pataki: usize, m: usize, residual: f64, drift: f64 },
    Stalled(String),
}

fn reduce_hom(h: &HomSepQcqp<f64>) -> (f64, Reduced) {
    let b = build_hom(h);
    let sol = solve(&b, &SolverOptions::default()).unwrap();
    match reduce(&b, &sol, REDUCE_TOL, RANK_TOL) {
        Ok((_, rep)) => (
            sol.value,
            Reduced::Done {
                ranks: rep.final_ranks.clone(),
                pataki: rep.pataki_sum,
                m: h.m(),
                residual: rep.max_residual,
                drift: rep.max_objective_drift,
            },
        ),
        Err(e @ Error::ReductionStall { .. }) => (sol.value, Reduced::Stalled(e.to_string())),
        Err(e) => panic!("reduction error: {e}"),
    }
}

fn criterion4(pool: &mut Vec<Instance>) -> Outcome {
    let mut fails = Vec::new();
    let mut completed = 0;
    for (seed, h, anchor) in optimal_homogeneous(200, 30, |r| r.gen_range(1..=4)) {
        let (eta, red) = reduce_hom(&h);
        match red {
            Reduced::Done { pataki, m, residual, drift, .. } => {
                completed += 1;
                if pataki > m {
                    fails.push(format!("seed {seed}: pataki sum {pataki} > m = {m}"));
                }
                if residual > 1e-6 || drift > 1e-6 {
                    fails.push(format!("seed {seed}: residual {residual:e}, drift {drift:e}"));
                }
            }
            Reduced::Stalled(msg) => println!("  seed {seed}: {msg}"),
        }
        pool.push(Instance { label: format!("homogeneous seed {seed}"), qcqp: h.to_qcqp(), eta, center: anchor, radius: 0.5 });
    }
    if completed < 28 {
        fails.push(format!("only {completed}/30 completed"));
    }
    Outcome {
        pass: fails.is_empty(),
        detail: format!(
            "{completed}/30 completed without stall{}",
            if fails.is_empty() { String::new() } else { format!("; {}", fails.join("; ")) }
        ),
    }
}

fn criterion5(pool: &mut Vec<Instance>) -> Outcome {
    let start = Instant::now();
    let opts = JudgeOptions::default();
    let mut fails = Vec::new();
    let mut completed = 0;
    let (mut worst_gap, mut worst_wit) = (0.0f64, 0.0f64);
    for seed in 0..25u64 {
        let dims = Example52Dims::random(&mut rng_from_seed(500 + seed), 3);
        let e = generate_example52(seed, &dims).expect("instance");
        let v = judge(&e.problem, &opts).unwrap();
        if v.solver_status != SolveStatus::Optimal {
            fails.push(format!("seed {seed}: solver {}", v.solver_status));
            continue;
        }
        if v.reduction.is_none() {
            println!("  seed {seed}: reduction did not complete ({:?})", v.notes);
        } else {
            completed += 1;
        }
        for (p, b) in v.per_block.iter().enumerate() {
            if !b.certificate.certified() {
                fails.push(format!("seed {seed}: block {} not certified", p + 1));
            }
            match b.check.as_ref().and_then(|c| c.gap) {
                Some(g) => {
                    worst_gap = worst_gap.max(g.abs());
                    if g.abs() > 1e-6 {
                        fails.push(format!("seed {seed}: block {} gap {g:e}", p + 1));
                    }
                }
                None => fails.push(format!("seed {seed}: block {} unverified", p + 1)),
            }
        }
        match v.zeta_witness {
            Some(z) => {
                let g = (z - v.eta).abs();
                worst_wit = worst_wit.max(g);
                if g > 1e-5 {
                    fails.push(format!("seed {seed}: witness gap {g:e}"));
                }
            }
            None => fails.push(format!("seed {seed}: no witness")),
        }
        if v.status != VerdictStatus::ExactCertified || !v.witnessed {
            fails.push(format!("seed {seed}: verdict {} witnessed {}", v.status, v.witnessed));
        }
        pool.push(Instance {
            label: format!("example52 seed {seed}"),
            qcqp: e.problem.flatten(),
            eta: v.eta,
            center: e.anchor.concat(),
            radius: 0.5,
        });
    }
    let elapsed = start.elapsed().as_secs_f64();
    if completed < 22 {
        fails.push(format!("only {completed}/25 completed"));
    }
    if elapsed >= 60.0 {
        fails.push(format!("runtime {elapsed:.2}s"));
    }
    Outcome {
        pass: fails.is_empty(),
        detail: format!(
            "{completed}/25 completed in {elapsed:.2}s, worst verify gap {worst_gap:.1e}, worst witness gap {worst_wit:.1e}{}",
            if fails.is_empty() { String::new() } else { format!("; {}", fails.join("; ")) }
        ),
    }
}

fn criterion6(pool: &[Instance]) -> Outcome {
    let mut fails = Vec::new();
    let mut checked = 0;
    let mut rng = rng_from_seed(6);
    for inst in pool {
        // Halve the box around the strictly feasible center until enough points are accepted.
        let mut pts = Vec::new();
        let mut radius = inst.radius;
        while pts.len() < SAMPLES && radius > 1e-3 {
            let more = sample_feasible(&inst.qcqp, &inst.center, radius, SAMPLES - pts.len(), SAMPLE_TRIES, &mut rng);
            pts.extend(more);
            radius /= 2.0;
        }
        if pts.len() < SAMPLES {
            fails.push(format!("{}: only {} feasible samples", inst.label, pts.len()));
        }
        for u in &pts {
            checked += 1;
            let f = inst.qcqp.eval_objective(u).unwrap();
            if inst.eta > f + 1e-6 {
                fails.push(format!("{}: eta {} > objective {f}", inst.label, inst.eta));
            }
        }
    }
    Outcome {
        pass: fails.is_empty(),
        detail: format!(
            "{} instances, {checked} feasible points{}",
            pool.len(),
            if fails.is_empty() { String::new() } else { format!("; {}", fails.join("; ")) }
        ),
    }
}

fn criterion7(pool: &mut Vec<Instance>) -> Outcome {
    let mut fails = Vec::new();
    let mut completed = 0;
    for (seed, h, anchor) in optimal_homogeneous(700, 20, |_| 2) {
        let (eta, red) = reduce_hom(&h);
        match red {
            Reduced::Done { ranks, .. } => {
                completed += 1;
                if ranks.iter().any(|&r| r > 1) {
                    fails.push(format!("seed {seed}: ranks {ranks:?}"));
                }
            }
            Reduced::Stalled(msg) => println!("  seed {seed}: {msg}"),
        }
        pool.push(Instance { label: format!("m=2 seed {seed}"), qcqp: h.to_qcqp(), eta, center: anchor, radius: 0.5 });
    }
    Outcome {
        pass: fails.is_empty(),
        detail: format!(
            "{completed}/20 completed, all blockwise ranks <= 1 on completed runs{}",
            if fails.is_empty() { String::new() } else { format!("; {}", fails.join("; ")) }
        ),
    }
}

#[test]
fn acceptance_criteria() {
    let mut pool = Vec::new();
    let mut outcomes = vec![
        (1, criterion1(&mut pool)),
        (2, criterion2(&mut pool)),
        (3, criterion3(&mut pool)),
        (4, criterion4(&mut pool)),
        (5, criterion5(&mut pool)),
    ];
    // The m <= 2 instances join the weak-duality pool as well.
    let seventh = criterion7(&mut pool);
    outcomes.push((6, criterion6(&pool)));
    outcomes.push((7, seventh));
    for (n, o) in &outcomes {
        line(*n, o);
    }
    let failed: Vec<usize> = outcomes.iter().filter(|(_, o)| !o.pass).map(|(n, _)| *n).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
