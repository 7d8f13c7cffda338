use rand::Rng;
use sepqcqp::connection::{block_ranges, judge, JudgeOptions, VerdictStatus};
use sepqcqp::model::{brute_force, connect, SearchBox};
use sepqcqp::random::{make_example52, random_convex, random_sign_pattern, rng_from_seed, Example52Dims, Planted};
use sepqcqp::{build_block, frob_inner, solve, Relation, SeparableQcqp, SolverOptions};

fn draw(rng: &mut impl Rng, m: usize) -> Planted {
    let n = rng.gen_range(1..=2);
    if rng.gen_bool(0.5) {
        random_convex(rng, n, m)
    } else {
        random_sign_pattern(rng, n, m)
    }
}

/// Two planted blocks with a common row count; gamma is the sum of their rhs.
fn two_blocks(seed: u64) -> (SeparableQcqp<f64>, f64) {
    let mut rng = rng_from_seed(seed);
    let m = rng.gen_range(1..=2);
    let a = draw(&mut rng, m);
    let b = draw(&mut rng, m);
    let gamma: Vec<f64> = a.qcqp.rhs().iter().zip(b.qcqp.rhs()).map(|(x, y)| x + y).collect();
    let s = connect(vec![a.qcqp.into(), b.qcqp.into()], gamma).unwrap();
    (s, a.radius.max(b.radius))
}

#[test]
fn eta_is_below_the_oracle() {
    let opts = JudgeOptions::default();
    for seed in 0..20u64 {
        let (s, radius) = two_blocks(seed);
        let v = judge(&s, &opts).unwrap();
        let flat = s.flatten();
        let oracle = brute_force(&flat, &SearchBox::cube(flat.n(), radius), 21, 24).unwrap();
        if oracle.is_feasible() {
            assert!(v.eta <= oracle.value + 1e-5, "seed {seed}: {} > {}", v.eta, oracle.value);
        }
    }
}

#[test]
fn block_objectives_sum_to_eta() {
    for seed in 0..20u64 {
        let s = make_example52(seed, &Example52Dims::default()).unwrap();
        let b = build_block(&s);
        let sol = solve(&b, &SolverOptions::default()).unwrap();
        let total: f64 = block_ranges(&s)
            .into_iter()
            .map(|r| r.map(|j| frob_inner(&b.objective[j], &sol.blocks[j]).unwrap()).sum::<f64>())
            .sum();
        assert!((total - sol.value).abs() <= 1e-8 * (1.0 + sol.value.abs()), "seed {seed}");
    }
}

#[test]
fn example52_witnesses_match_eta() {
    let opts = JudgeOptions::default();
    for seed in 0..50u64 {
        let dims = Example52Dims::random(&mut rng_from_seed(seed), 3);
        let s = make_example52(1000 + seed, &dims).unwrap();
        let v = judge(&s, &opts).unwrap();
        if !(v.certified && v.solution.as_ref().is_some_and(|x| x.is_optimal())) {
            continue;
        }
        let z = v.zeta_witness.unwrap_or_else(|| panic!("seed {seed}: certified without witness"));
        assert!((z - v.eta).abs() <= 1e-5, "seed {seed}: {z} vs {}", v.eta);
        assert_eq!(v.status, VerdictStatus::ExactCertified);
    }
}

#[test]
fn relaxing_gamma_never_raises_eta() {
    let opts = SolverOptions::default();
    for seed in 0..20u64 {
        let s = if seed % 2 == 0 {
            make_example52(seed, &Example52Dims::default()).unwrap()
        } else {
            two_blocks(seed).0
        };
        let relaxed: Vec<f64> = s
            .gamma()
            .iter()
            .zip(s.relations())
            .map(|(&g, &r)| if r == Relation::Le { g + 1.0 } else { g })
            .collect();
        let t = s.with_gamma(relaxed).unwrap();
        let a = solve(&build_block(&s), &opts).unwrap();
        let b = solve(&build_block(&t), &opts).unwrap();
        assert!(a.is_optimal() && b.is_optimal(), "seed {seed}");
        assert!(b.value <= a.value + 1e-6 * (1.0 + a.value.abs()), "seed {seed}: {} > {}", b.value, a.value);
    }
}
