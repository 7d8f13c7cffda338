use std::process::Command;

use sepqcqp_cli::report::{Envelope, Report};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sepqcqp"))
}

fn run(args: &[&str]) -> (String, String, i32) {
    let out = bin().args(args).output().expect("binary runs");
    (
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
        out.status.code().expect("exit code"),
    )
}

const CONVEX: &str = r#"
schema_version = 1
kind = "qcqp"
relations = ["le"]
rhs = [4.0]

[[blocks]]
n = 2
[[blocks.matrices]]
k = 0
entries = [[1, 1, 1.0], [2, 2, 2.0], [1, 3, -1.0], [2, 3, 0.5]]
[[blocks.matrices]]
k = 1
entries = [[1, 1, 1.0], [2, 2, 1.0]]
"#;

#[test]
fn example51_alpha_two_json() {
    let (out, _, code) = run(&["example51", "--alpha", "2", "--format", "json", "--no-timestamp"]);
    assert_eq!(code, 0);
    let env: Envelope = serde_json::from_str(&out).unwrap();
    assert!(env.generated_at.is_none());
    let Report::Example51(r) = &env.report else { panic!("wrong report") };
    let row = &r.rows[0];
    assert!((row.eta - 4.0).abs() < 1e-4);
    assert!((row.zeta_witness.unwrap() - 4.0).abs() < 1e-4);
    assert_eq!(row.rank_v, 1);
    assert_eq!(row.verdict, "exact-witnessed");
    // Round trip through the data model.
    let again = serde_json::to_string_pretty(&env).unwrap();
    assert_eq!(again + "\n", out);
}

#[test]
fn example51_not_exact_exits_two() {
    let (out, _, code) = run(&["example51", "--alpha", "2.5"]);
    assert_eq!(code, 2);
    assert!(out.contains("7.333333"));
    assert!(out.contains("not-exact"));
}

#[test]
fn json_is_deterministic_without_timestamp() {
    let args = ["example52", "--seed", "4", "--format", "json", "--no-timestamp"];
    let (a, _, ca) = run(&args);
    let (b, _, cb) = run(&args);
    assert_eq!(ca, 0);
    assert_eq!(cb, 0);
    assert_eq!(a, b);
    let (stamped, _, _) = run(&["example52", "--seed", "4", "--format", "json"]);
    let env: Envelope = serde_json::from_str(&stamped).unwrap();
    assert!(env.generated_at.is_some());
}

#[test]
fn judge_convex_file_is_certified() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("convex.toml");
    std::fs::write(&path, CONVEX).unwrap();
    let out_path = dir.path().join("report.json");
    let (_, _, code) = run(&[
        "judge",
        path.to_str().unwrap(),
        "--format",
        "json",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let env: Envelope = serde_json::from_str(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    let Report::Judge(j) = env.report else { panic!("wrong report") };
    assert_eq!(j.verdict, "exact-certified");
    assert_eq!(j.per_block[0].certificate.kind, "convex");
    let s = j.solver.unwrap();
    assert_eq!(s.status, "optimal");
    assert!(s.primal_residual < 1e-6);
}

#[test]
fn file_commands_report_solver_fields() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("convex.toml");
    std::fs::write(&path, CONVEX).unwrap();
    let p = path.to_str().unwrap();
    for cmd in ["solve", "certify", "reduce"] {
        let (out, err, code) = run(&[cmd, p, "--format", "json", "--no-timestamp"]);
        assert_eq!(code, 0, "{cmd}: {err}");
        let env: Envelope = serde_json::from_str(&out).unwrap();
        match env.report {
            Report::Solve(r) => assert_eq!(r.solver.ranks, vec![1]),
            Report::Certify(r) => assert!(r.blocks[0].certified),
            Report::Reduce(r) => {
                assert_eq!(r.outcome, "completed");
                assert!(r.bound_holds);
            }
            other => panic!("{cmd}: unexpected {other:?}"),
        }
    }
}

#[test]
fn emitted_problem_judges_like_the_builtin() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("e51.toml");
    let (text, _, code) = run(&["example51", "--alpha", "2.5", "--emit-problem"]);
    assert_eq!(code, 0);
    std::fs::write(&path, text).unwrap();
    let (out, _, code) = run(&["judge", path.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(out.contains("verdict: not-exact"));
}

#[test]
fn errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, CONVEX.replace("[1, 1, 1.0], [2, 2, 1.0]", "[1, 1, 1.0], [3, 3, 0.5]")).unwrap();
    let (_, err, code) = run(&["solve", path.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(err.contains("corner"), "{err}");
    let (_, err, code) = run(&["solve", "/definitely/missing.toml"]);
    assert_eq!(code, 1);
    assert!(err.contains("cannot read"));
    let (_, _, code) = run(&["example51", "--alpha", "5"]);
    assert_eq!(code, 1);
}
