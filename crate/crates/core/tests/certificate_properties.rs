use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;
use sepqcqp::certificates::{
    check_convex, check_qcqp_sign_pattern, check_sign_pattern, cycle_basis_with, SparsityGraph, Traversal,
};
use sepqcqp::connection::{judge, JudgeOptions};
use sepqcqp::model::connect;
use sepqcqp::random::{random_convex, random_homogeneous, random_sign_pattern, random_vector, rng_from_seed};
use sepqcqp::{CertificateKind, Qcqp, SolveStatus};

fn random_graph(seed: u64, n: usize, density: f64) -> SparsityGraph {
    let mut rng = rng_from_seed(seed);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen_bool(density) {
                edges.push(((i, j), if rng.gen_bool(0.5) { 1 } else { -1 }));
            }
        }
    }
    SparsityGraph::new(n, edges)
}

fn permuted(g: &SparsityGraph, perm: &[usize]) -> SparsityGraph {
    let edges = g
        .edges
        .iter()
        .zip(&g.sigma)
        .map(|(&(i, j), &s)| {
            let (a, b) = (perm[i], perm[j]);
            ((a.min(b), a.max(b)), s)
        })
        .collect();
    SparsityGraph::new(g.n, edges)
}

fn cycles_pass(g: &SparsityGraph, order: Traversal) -> bool {
    cycle_basis_with(g, order).iter().all(|c| {
        let prod: i32 = c.iter().map(|&(i, j)| g.sign(i, j).unwrap() as i32).product();
        prod == if c.len() % 2 == 0 { 1 } else { -1 }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sign_pattern_ignores_labels(seed in any::<u64>(), n in 2usize..7, density in 0.2f64..0.9) {
        let g = random_graph(seed, n, density);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng_from_seed(seed ^ 0x5eed));
        let h = permuted(&g, &perm);
        prop_assert_eq!(check_sign_pattern(&g).certified(), check_sign_pattern(&h).certified());
    }

    #[test]
    fn cycle_condition_is_basis_independent(seed in any::<u64>(), n in 2usize..8) {
        let g = random_graph(seed, n, 0.6);
        prop_assume!(g.components() == 1);
        prop_assert_eq!(cycles_pass(&g, Traversal::Ascending), cycles_pass(&g, Traversal::Descending));
    }
}

#[test]
fn convexity_verdict_ignores_rhs() {
    for seed in 0..10u64 {
        let mut rng = rng_from_seed(seed);
        let n = rng.gen_range(1..=4);
        let m = rng.gen_range(1..=3);
        let qs: [Qcqp<f64>; 2] = [
            random_convex(&mut rng, n, m).qcqp,
            random_sign_pattern(&mut rng, n.max(2), m).qcqp,
        ];
        for q in qs {
            let base = check_convex(&q).kind;
            for _ in 0..100 {
                let rhs = random_vector(&mut rng, q.m(), 5.0);
                assert_eq!(check_convex(&q.with_rhs(rhs).unwrap()).kind, base, "seed {seed}");
            }
        }
    }
}

/// Every certificate other than `None` on an optimally solved instance
/// comes with a feasible point attaining the relaxation value.
#[test]
fn certificates_yield_witnesses() {
    let opts = JudgeOptions::default();
    let mut cases = 0;
    for seed in 0..60u64 {
        let mut rng = rng_from_seed(3000 + seed);
        let (n, m) = (rng.gen_range(1..=4), rng.gen_range(1..=3));
        let s = match seed % 3 {
            0 => {
                let q = random_convex(&mut rng, n, m).qcqp;
                connect(vec![q.clone().into()], q.rhs().to_vec()).unwrap()
            }
            1 => {
                let q = random_sign_pattern(&mut rng, n.min(3), m).qcqp;
                connect(vec![q.clone().into()], q.rhs().to_vec()).unwrap()
            }
            _ => {
                let dims: Vec<usize> = (0..rng.gen_range(1..=3)).map(|_| rng.gen_range(1..=3)).collect();
                let h = random_homogeneous(&mut rng, &dims, 2, false).problem;
                connect(vec![h.clone().into()], h.rhs().to_vec()).unwrap()
            }
        };
        let v = judge(&s, &opts).unwrap();
        if v.solver_status != SolveStatus::Optimal {
            continue;
        }
        let cert = &v.per_block[0].certificate;
        if cert.kind == CertificateKind::None {
            continue;
        }
        cases += 1;
        let w = v.witness.as_ref().unwrap_or_else(|| panic!("seed {seed}: {} without witness", cert.kind));
        assert!(s.is_feasible(w, 1e-5).unwrap(), "seed {seed}: infeasible witness");
        let z = s.eval_objective(w).unwrap();
        assert!((z - v.eta).abs() <= 1e-5 * (1.0 + v.eta.abs()), "seed {seed}: {z} vs {}", v.eta);
    }
    assert!(cases >= 50, "only {cases} certified cases");
}

#[test]
fn sign_pattern_on_generated_instances() {
    for seed in 0..20u64 {
        let mut rng = rng_from_seed(seed);
        let (n, m) = (rng.gen_range(1..=4), rng.gen_range(1..=3));
        let p = random_sign_pattern(&mut rng, n, m);
        assert!(check_qcqp_sign_pattern(&p.qcqp).certified(), "seed {seed}");
    }
}
