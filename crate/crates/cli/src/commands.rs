//! Command-line definition and dispatch.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use sepqcqp::certificates::pataki_sum;
use sepqcqp::connection::{bilevel_report, oracle_grid_for};
use sepqcqp::model::{brute_force, connect, SearchBox};
use sepqcqp::random::{generate_example52, Example52Dims};
use sepqcqp::{
    build_block, judge, make_example51, reduce, solve, BlockSdp, Error, JudgeOptions, SdpSolution,
    SeparableQcqp, SolverOptions,
};

use crate::problem::{emit, parse_file, Problem};
use crate::report::{
    BlockCertificate, CertifyReport, Envelope, Example51Report, Example51Row, Example52Report,
    JudgeReport, ReduceReport, Report, SolveReport, SolverSummary,
};

/// Exit code for a completed run whose answer is "not exact", "undetermined",
/// "not optimal" or "stalled".
pub const EXIT_INCONCLUSIVE: i32 = 2;
pub const EXIT_ERROR: i32 = 1;

/// Alpha grid used by `example51 --table`.
pub const TABLE_ALPHAS: [f64; 11] = [0.0, 0.5, 1.0, 1.5, 2.0, 2.25, 2.5, 2.75, 3.0, 3.5, 4.0];

const TABLE_TOL: f64 = 1e-4;
const TABLE_ORACLE_TOL: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "sepqcqp", version, about = "Semidefinite relaxations of separable QCQPs")]
pub struct Cli {
    /// Solver stopping tolerance.
    #[arg(long, global = true, default_value_t = 1e-8)]
    pub tol: f64,
    /// Eigenvalue threshold for numerical rank.
    #[arg(long = "rank-tol", global = true, default_value_t = 1e-6)]
    pub rank_tol: f64,
    /// Interior-point iteration cap.
    #[arg(long = "max-iter", global = true, default_value_t = 200)]
    pub max_iter: usize,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    /// Write the report to this path instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Omit the `generated_at` field from reports.
    #[arg(long = "no-timestamp", global = true)]
    pub no_timestamp: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the relaxation and summarize the solution.
    Solve { file: PathBuf },
    /// Per-block exactness certificates.
    Certify { file: PathBuf },
    /// Full exactness pipeline: solve, certify, verify, extract.
    Judge { file: PathBuf },
    /// Rank reduction of the relaxation optimum.
    Reduce { file: PathBuf },
    /// Parametric two-block instance.
    Example51 {
        #[arg(long, required_unless_present = "table", conflicts_with = "table")]
        alpha: Option<f64>,
        /// Sweep the alpha grid and compare with the reference table.
        #[arg(long)]
        table: bool,
        /// Print the instance as a problem file instead of judging it.
        #[arg(long = "emit-problem", requires = "alpha")]
        emit_problem: bool,
    },
    /// Seeded three-block instance.
    Example52 {
        #[arg(long)]
        seed: u64,
        /// Block sizes `n1,n2,h1,h2,h3`.
        #[arg(long, value_delimiter = ',', num_args = 5)]
        dims: Option<Vec<usize>>,
        /// Print the instance as a problem file instead of judging it.
        #[arg(long = "emit-problem")]
        emit_problem: bool,
    },
}

/// What a command produced: a report or a problem file.
#[derive(Debug)]
pub enum Output {
    Report(Report),
    ProblemFile(String),
}

impl Cli {
    pub fn judge_options(&self) -> anyhow::Result<JudgeOptions<f64>> {
        let solver = SolverOptions { tol: self.tol, max_iter: self.max_iter, ..SolverOptions::default() };
        solver.validate()?;
        if !(self.rank_tol > 0.0) {
            bail!("--rank-tol must be positive, got {}", self.rank_tol);
        }
        Ok(JudgeOptions { solver, rank_tol: self.rank_tol, ..JudgeOptions::default() })
    }
}

fn load(path: &Path) -> anyhow::Result<Problem> {
    Ok(parse_file(path)?)
}

fn exit_for(exact: bool) -> i32 {
    if exact {
        0
    } else {
        EXIT_INCONCLUSIVE
    }
}

fn solved(s: &SeparableQcqp<f64>, opts: &JudgeOptions<f64>) -> anyhow::Result<(BlockSdp<f64>, SdpSolution<f64>)> {
    let b = build_block(s);
    let sol = solve(&b, &opts.solver).context("solving the relaxation")?;
    Ok((b, sol))
}

fn judge_report(kind: &str, s: &SeparableQcqp<f64>, opts: &JudgeOptions<f64>) -> anyhow::Result<JudgeReport> {
    let v = judge(s, opts)?;
    let b = build_block(s);
    let bl = v.solution.as_ref().map(|_| bilevel_report(s, &v, opts.witness_tol));
    Ok(JudgeReport::new(kind, &b, &v, bl.as_ref(), opts.rank_tol))
}

/// Reference relaxation and QCQP values for the parametric instance, where asserted.
pub fn table_values(alpha: f64) -> Option<(f64, f64)> {
    if alpha <= 2.0 {
        Some((5.0 * alpha - 6.0, 5.0 * alpha - 6.0))
    } else if alpha <= 3.0 {
        Some(((14.0 * alpha - 24.0) / (alpha - 1.0), 9.0))
    } else {
        None
    }
}

pub fn example51_row(alpha: f64, opts: &JudgeOptions<f64>) -> anyhow::Result<Example51Row> {
    let h = make_example51(alpha)?;
    let s = connect(vec![h.clone().into()], h.rhs().to_vec())?;
    let v = judge(&s, opts)?;
    let flat = s.flatten();
    let oracle = brute_force(
        &flat,
        &SearchBox::cube(flat.n(), opts.oracle_box),
        oracle_grid_for(flat.n()),
        opts.oracle_rounds,
    )?;
    let oracle_value = oracle.point.as_ref().map(|_| oracle.value);
    let table = table_values(alpha);
    let exact = v.status.is_exact();
    let matches_table = table.map(|(te, tz)| {
        let table_exact = (te - tz).abs() <= TABLE_TOL;
        (v.eta - te).abs() <= TABLE_TOL
            && exact == table_exact
            && oracle_value.is_some_and(|z| (z - tz).abs() <= TABLE_ORACLE_TOL)
    });
    Ok(Example51Row {
        alpha,
        eta: v.eta,
        zeta_witness: v.zeta_witness,
        oracle_value,
        rank_v: v.ranks.first().copied().unwrap_or(0),
        rank_w: v.ranks.get(1).copied().unwrap_or(0),
        verdict: v.status.to_string(),
        table_eta: table.map(|t| t.0),
        table_zeta: table.map(|t| t.1),
        matches_table,
    })
}

fn dims_from(v: &Option<Vec<usize>>) -> Example52Dims {
    match v.as_deref() {
        Some(&[n1, n2, a, b, c]) => Example52Dims { n1, n2, hom: [a, b, c] },
        _ => Example52Dims::default(),
    }
}

/// Runs the parsed command; returns the output and the exit code.
pub fn execute(cli: &Cli) -> anyhow::Result<(Output, i32)> {
    let opts = cli.judge_options()?;
    let rank_tol = opts.rank_tol;
    let (report, code) = match &cli.command {
        Command::Solve { file } => {
            let p = load(file)?;
            let (b, sol) = solved(&p.to_separable(), &opts)?;
            let code = exit_for(sol.is_optimal());
            (
                Report::Solve(SolveReport {
                    problem_kind: p.kind().into(),
                    solver: SolverSummary::new(&b, &sol, rank_tol),
                }),
                code,
            )
        }
        Command::Certify { file } => {
            let p = load(file)?;
            let s = p.to_separable();
            let v = judge(&s, &opts)?;
            let b = build_block(&s);
            let blocks: Vec<BlockCertificate> = v
                .per_block
                .iter()
                .enumerate()
                .map(|(i, bv)| BlockCertificate::new(i + 1, &bv.certificate, bv.assumption.as_ref()))
                .collect();
            let code = exit_for(blocks.iter().all(|c| c.certified));
            (
                Report::Certify(CertifyReport {
                    problem_kind: p.kind().into(),
                    blocks,
                    solver: v.solution.as_ref().map(|sol| SolverSummary::new(&b, sol, rank_tol)),
                }),
                code,
            )
        }
        Command::Judge { file } => {
            let p = load(file)?;
            let r = judge_report(p.kind(), &p.to_separable(), &opts)?;
            let code = exit_for(r.verdict_is_exact());
            (Report::Judge(r), code)
        }
        Command::Reduce { file } => {
            let p = load(file)?;
            let (b, sol) = solved(&p.to_separable(), &opts)?;
            let solver = SolverSummary::new(&b, &sol, rank_tol);
            let mut r = ReduceReport {
                problem_kind: p.kind().into(),
                outcome: "failed".into(),
                message: None,
                iterations: 0,
                final_ranks: solver.ranks.clone(),
                pataki_sum: solver.pataki_sum,
                bound_m: b.num_rows(),
                bound_holds: solver.pataki_sum <= b.num_rows(),
                max_residual: solver.primal_residual,
                max_objective_drift: 0.0,
                extracted: None,
                solver,
            };
            let code = if !sol.is_optimal() {
                r.message = Some(format!("solver status {}", sol.status));
                EXIT_INCONCLUSIVE
            } else {
                match reduce(&b, &sol, opts.reduce_tol, rank_tol) {
                    Ok((red, rep)) => {
                        r.outcome = "completed".into();
                        r.iterations = rep.iterations;
                        r.final_ranks = rep.final_ranks.clone();
                        r.pataki_sum = pataki_sum(&red.blocks, &red.slacks, rank_tol);
                        r.bound_m = rep.bound_m;
                        r.bound_holds = rep.bound_holds();
                        r.max_residual = rep.max_residual;
                        r.max_objective_drift = rep.max_objective_drift;
                        r.extracted = rep.extracted;
                        0
                    }
                    Err(Error::ReductionStall { iterations, ranks, pataki_sum }) => {
                        r.outcome = "stalled".into();
                        r.message = Some(format!("stalled with ranks {ranks:?}"));
                        r.iterations = iterations;
                        r.final_ranks = ranks;
                        r.pataki_sum = pataki_sum;
                        r.bound_holds = pataki_sum <= r.bound_m;
                        EXIT_INCONCLUSIVE
                    }
                    Err(e) => return Err(e).context("rank reduction"),
                }
            };
            (Report::Reduce(r), code)
        }
        Command::Example51 { alpha: Some(a), emit_problem: true, .. } => {
            let h = make_example51(*a)?;
            return Ok((Output::ProblemFile(emit(&Problem::Homogeneous(h))), 0));
        }
        Command::Example51 { alpha: Some(a), .. } => {
            let row = example51_row(*a, &opts)?;
            let code = exit_for(row.verdict_is_exact());
            let all_match = row.matches_table.unwrap_or(true);
            (Report::Example51(Example51Report { rows: vec![row], all_match }), code)
        }
        Command::Example51 { .. } => {
            let rows = TABLE_ALPHAS
                .par_iter()
                .map(|&a| example51_row(a, &opts))
                .collect::<anyhow::Result<Vec<_>>>()?;
            let all_match = rows.iter().all(|r| r.matches_table != Some(false));
            let code = exit_for(all_match);
            (Report::Example51(Example51Report { rows, all_match }), code)
        }
        Command::Example52 { seed, dims, emit_problem } => {
            let d = dims_from(dims);
            let e = generate_example52(*seed, &d)?;
            if *emit_problem {
                return Ok((Output::ProblemFile(emit(&Problem::Separable(e.problem))), 0));
            }
            let j = judge_report("separable", &e.problem, &opts)?;
            let code = exit_for(j.verdict_is_exact());
            (
                Report::Example52(Example52Report {
                    seed: *seed,
                    dims: vec![d.n1, d.n2, d.hom[0], d.hom[1], d.hom[2]],
                    draws: e.draws,
                    alpha: e.alpha,
                    judge: j,
                }),
                code,
            )
        }
    };
    Ok((Output::Report(report), code))
}

fn timestamp() -> Option<u64> {
    SystemTime::now().duration_since(UNIX_EPOCH).ok().map(|d| d.as_secs())
}

/// Wraps a report with tool metadata.
pub fn envelope(report: Report, with_timestamp: bool) -> Envelope {
    Envelope {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        generated_at: if with_timestamp { timestamp() } else { None },
        report,
    }
}

/// Renders an output in the requested format.
pub fn render(out: Output, format: Format, with_timestamp: bool) -> anyhow::Result<String> {
    match out {
        Output::ProblemFile(s) => Ok(s),
        Output::Report(r) => match format {
            Format::Json => {
                let mut s = serde_json::to_string_pretty(&envelope(r, with_timestamp))?;
                s.push('\n');
                Ok(s)
            }
            Format::Text => Ok(r.to_text()),
        },
    }
}

/// Runs the command and writes its output; returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    let result = execute(cli).and_then(|(out, code)| {
        let text = render(out, cli.format, !cli.no_timestamp)?;
        match &cli.out {
            Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?,
            None => print!("{text}"),
        }
        Ok(code)
    });
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_ERROR
        }
    }
}
