use approx::assert_abs_diff_eq;
use sepqcqp::connection::{judge, make_example51, JudgeOptions, VerdictStatus};
use sepqcqp::model::{connect, hom_to_qcqp};
use sepqcqp::{build_hom, numeric_rank, solve, SolverOptions};

fn eta(alpha: f64) -> f64 {
    let h = make_example51(alpha).unwrap();
    let sol = solve(&build_hom(&h), &SolverOptions::default()).unwrap();
    assert!(sol.is_optimal(), "alpha {alpha}: {:?}", sol.status);
    sol.value
}

#[test]
fn relaxation_values() {
    for (alpha, expect) in [(0.0, -6.0), (1.0, -1.0), (2.0, 4.0), (2.5, 22.0 / 3.0), (3.0, 9.0), (3.5, 11.5)] {
        assert_abs_diff_eq!(eta(alpha), expect, epsilon = 1e-6);
    }
}

#[test]
fn rank_two_at_two_and_a_half() {
    let h = make_example51(2.5).unwrap();
    let sol = solve(&build_hom(&h), &SolverOptions::default()).unwrap();
    assert_eq!(numeric_rank(&sol.blocks[0], 1e-6), 2);
}

#[test]
fn verdicts() {
    for (alpha, exact) in [(0.0, true), (1.0, true), (2.0, true), (2.5, false), (3.0, true)] {
        let h = make_example51(alpha).unwrap();
        let s = connect(vec![h.clone().into()], h.rhs().to_vec()).unwrap();
        let v = judge(&s, &JudgeOptions::default()).unwrap();
        let g = judge(&hom_to_qcqp(&h), &JudgeOptions::default()).unwrap();
        assert_eq!(g.status.is_exact(), exact, "split form, alpha {alpha}");
        eprintln!("alpha {alpha}: {} eta {} zeta {:?} oracle {:?} notes {:?}", v.status, v.eta, v.zeta_witness, v.oracle_value, v.notes);
        assert_eq!(v.status.is_exact(), exact, "alpha {alpha}");
        if !exact {
            assert_eq!(v.status, VerdictStatus::NotExact);
        }
    }
}
