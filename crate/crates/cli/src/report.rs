//! Report data model shared by the text and JSON outputs.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sepqcqp::certificates::{pataki_sum, AssumptionReport, Certificate};
use sepqcqp::connection::{BilevelReport, ExactnessVerdict};
use sepqcqp::{check_solution, numeric_rank, BlockSdp, SdpSolution};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub tool: String,
    pub version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generated_at: Option<u64>,
    #[serde(flatten)]
    pub report: Report,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Report {
    Solve(SolveReport),
    Certify(CertifyReport),
    Judge(JudgeReport),
    Reduce(ReduceReport),
    Example51(Example51Report),
    Example52(Example52Report),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverSummary {
    pub status: String,
    pub iterations: usize,
    pub value: f64,
    pub dual_value: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub gap: f64,
    pub block_dims: Vec<usize>,
    pub ranks: Vec<usize>,
    pub block_min_eigenvalues: Vec<f64>,
    pub pataki_sum: usize,
    pub rows: usize,
}

impl SolverSummary {
    pub fn new(b: &BlockSdp<f64>, sol: &SdpSolution<f64>, rank_tol: f64) -> Self {
        let mins = check_solution(b, sol, rank_tol)
            .map(|r| r.block_min_eigenvalues)
            .unwrap_or_default();
        Self {
            status: sol.status.to_string(),
            iterations: sol.iterations,
            value: sol.value,
            dual_value: sol.dual_value,
            primal_residual: sol.primal_residual,
            dual_residual: sol.dual_residual,
            gap: sol.gap,
            block_dims: b.block_dims.clone(),
            ranks: sol.blocks.iter().map(|x| numeric_rank(x, rank_tol)).collect(),
            block_min_eigenvalues: mins,
            pataki_sum: pataki_sum(&sol.blocks, &sol.slacks, rank_tol),
            rows: b.num_rows(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub problem_kind: String,
    pub solver: SolverSummary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssumptionSummary {
    pub holds: bool,
    pub nonzero_count: usize,
    pub required: usize,
    pub block_nonzero: Vec<bool>,
    pub residual_nonzero: Vec<Option<bool>>,
}

impl From<&AssumptionReport> for AssumptionSummary {
    fn from(a: &AssumptionReport) -> Self {
        Self {
            holds: a.holds,
            nonzero_count: a.nonzero_count,
            required: a.required,
            block_nonzero: a.block_nonzero.clone(),
            residual_nonzero: a.residual_nonzero.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockCertificate {
    pub block: usize,
    pub kind: String,
    pub certified: bool,
    pub details: String,
    pub depends_on_solution: bool,
    #[serde(default)]
    pub assumption: Option<AssumptionSummary>,
}

impl BlockCertificate {
    pub fn new(block: usize, c: &Certificate, a: Option<&AssumptionReport>) -> Self {
        Self {
            block,
            kind: c.kind.to_string(),
            certified: c.certified(),
            details: c.details.clone(),
            depends_on_solution: c.depends_on_solution,
            assumption: a.map(AssumptionSummary::from),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertifyReport {
    pub problem_kind: String,
    pub blocks: Vec<BlockCertificate>,
    #[serde(default)]
    pub solver: Option<SolverSummary>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReduceReport {
    pub problem_kind: String,
    pub solver: SolverSummary,
    /// "completed", "stalled" or "failed".
    pub outcome: String,
    #[serde(default)]
    pub message: Option<String>,
    pub iterations: usize,
    pub final_ranks: Vec<usize>,
    pub pataki_sum: usize,
    pub bound_m: usize,
    pub bound_holds: bool,
    pub max_residual: f64,
    pub max_objective_drift: f64,
    #[serde(default)]
    pub extracted: Option<Vec<Vec<f64>>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockVerdictSummary {
    pub certificate: BlockCertificate,
    pub block_value: Option<f64>,
    pub sub_value: Option<f64>,
    pub sub_status: Option<String>,
    pub verify_gap: Option<f64>,
    pub witness_route: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AllocationSummary {
    pub block: usize,
    pub allocation: Vec<f64>,
    pub value: f64,
    pub exact: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BilevelSummary {
    pub rows: Vec<AllocationSummary>,
    pub total: f64,
    pub eta: f64,
    pub identity_holds: bool,
}

impl From<&BilevelReport<f64>> for BilevelSummary {
    fn from(b: &BilevelReport<f64>) -> Self {
        Self {
            rows: b
                .rows
                .iter()
                .map(|r| AllocationSummary {
                    block: r.block,
                    allocation: r.allocation.clone(),
                    value: r.value,
                    exact: r.exact,
                })
                .collect(),
            total: b.total,
            eta: b.eta,
            identity_holds: b.identity_holds,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JudgeReport {
    pub problem_kind: String,
    pub verdict: String,
    pub certified: bool,
    pub witnessed: bool,
    pub eta: f64,
    pub zeta_witness: Option<f64>,
    pub oracle_value: Option<f64>,
    pub solver: Option<SolverSummary>,
    pub reduced_ranks: Option<Vec<usize>>,
    pub reduced_pataki_sum: Option<usize>,
    pub per_block: Vec<BlockVerdictSummary>,
    pub delta_decomposition: Vec<Vec<f64>>,
    pub bilevel: Option<BilevelSummary>,
    pub witness: Option<Vec<Vec<f64>>>,
    pub notes: Vec<String>,
}

/// True for the two exact verdict strings.
pub fn is_exact_verdict(v: &str) -> bool {
    matches!(v, "exact-certified" | "exact-witnessed")
}

impl JudgeReport {
    pub fn verdict_is_exact(&self) -> bool {
        is_exact_verdict(&self.verdict)
    }

    pub fn new(
        kind: &str,
        b: &BlockSdp<f64>,
        v: &ExactnessVerdict<f64>,
        bilevel: Option<&BilevelReport<f64>>,
        rank_tol: f64,
    ) -> Self {
        Self {
            problem_kind: kind.to_string(),
            verdict: v.status.to_string(),
            certified: v.certified,
            witnessed: v.witnessed,
            eta: v.eta,
            zeta_witness: v.zeta_witness,
            oracle_value: v.oracle_value.filter(|x| x.is_finite()),
            solver: v.solution.as_ref().map(|s| SolverSummary::new(b, s, rank_tol)),
            reduced_ranks: v.reduced_ranks.clone(),
            reduced_pataki_sum: v.reduction.as_ref().map(|r| r.pataki_sum),
            per_block: v
                .per_block
                .iter()
                .enumerate()
                .map(|(p, bv)| BlockVerdictSummary {
                    certificate: BlockCertificate::new(p + 1, &bv.certificate, bv.assumption.as_ref()),
                    block_value: bv.check.as_ref().map(|c| c.block_value),
                    sub_value: bv.check.as_ref().and_then(|c| c.sub_value),
                    sub_status: bv.check.as_ref().and_then(|c| c.sub_status).map(|s| s.to_string()),
                    verify_gap: bv.check.as_ref().and_then(|c| c.gap),
                    witness_route: bv.witness_route.map(str::to_string),
                })
                .collect(),
            delta_decomposition: v.delta_decomposition.clone(),
            bilevel: bilevel.map(BilevelSummary::from),
            witness: v.witness.clone(),
            notes: v.notes.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Example51Row {
    pub alpha: f64,
    pub eta: f64,
    pub zeta_witness: Option<f64>,
    pub oracle_value: Option<f64>,
    pub rank_v: usize,
    pub rank_w: usize,
    pub verdict: String,
    /// Reference relaxation value; absent where the reference table is not asserted.
    pub table_eta: Option<f64>,
    pub table_zeta: Option<f64>,
    pub matches_table: Option<bool>,
}

impl Example51Row {
    pub fn verdict_is_exact(&self) -> bool {
        is_exact_verdict(&self.verdict)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Example51Report {
    pub rows: Vec<Example51Row>,
    pub all_match: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Example52Report {
    pub seed: u64,
    /// `n1, n2` then the three homogeneous sub-block sizes.
    pub dims: Vec<usize>,
    pub draws: usize,
    pub alpha: f64,
    pub judge: JudgeReport,
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.6}"))
}

fn solver_text(out: &mut String, s: &SolverSummary) {
    let _ = writeln!(out, "solver: {} after {} iterations", s.status, s.iterations);
    let _ = writeln!(out, "  value {:.8}  dual {:.8}", s.value, s.dual_value);
    let _ = writeln!(
        out,
        "  residuals: primal {:.2e}  dual {:.2e}  gap {:.2e}",
        s.primal_residual, s.dual_residual, s.gap
    );
    let _ = writeln!(out, "  block dims {:?}  ranks {:?}  pataki sum {}", s.block_dims, s.ranks, s.pataki_sum);
}

fn judge_text(out: &mut String, j: &JudgeReport) {
    let _ = writeln!(out, "verdict: {} (certified {}, witnessed {})", j.verdict, j.certified, j.witnessed);
    let _ = writeln!(out, "eta {:.8}  zeta(witness) {}  oracle {}", j.eta, opt(j.zeta_witness), opt(j.oracle_value));
    if let Some(s) = &j.solver {
        solver_text(out, s);
    }
    if let Some(r) = &j.reduced_ranks {
        let _ = writeln!(out, "reduced ranks {r:?}  pataki sum {}", j.reduced_pataki_sum.unwrap_or(0));
    }
    for b in &j.per_block {
        let c = &b.certificate;
        let _ = writeln!(
            out,
            "block {}: {} [{}] {}",
            c.block,
            c.kind,
            if c.certified { "certified" } else { "not certified" },
            c.details
        );
        let _ = writeln!(
            out,
            "  value {}  sub-relaxation {}  gap {}  witness {}",
            opt(b.block_value),
            opt(b.sub_value),
            b.verify_gap.map_or("-".into(), |g| format!("{g:.2e}")),
            b.witness_route.as_deref().unwrap_or("-")
        );
    }
    if let Some(bl) = &j.bilevel {
        let _ = writeln!(out, "allocation (upper level):");
        for r in &bl.rows {
            let alloc: Vec<String> = r.allocation.iter().map(|x| format!("{x:.4}")).collect();
            let _ = writeln!(out, "  block {}: v = [{}]  value {:.6}{}", r.block, alloc.join(", "), r.value, if r.exact { "" } else { " (relaxation)" });
        }
        let _ = writeln!(out, "  sum {:.8} vs eta {:.8}: {}", bl.total, bl.eta, if bl.identity_holds { "ok" } else { "mismatch" });
    }
    if let Some(w) = &j.witness {
        for (p, x) in w.iter().enumerate() {
            let xs: Vec<String> = x.iter().map(|v| format!("{v:.6}")).collect();
            let _ = writeln!(out, "witness block {}: [{}]", p + 1, xs.join(", "));
        }
    }
    for n in &j.notes {
        let _ = writeln!(out, "note: {n}");
    }
}

impl Report {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        match self {
            Report::Solve(r) => {
                let _ = writeln!(out, "problem: {}", r.problem_kind);
                solver_text(&mut out, &r.solver);
            }
            Report::Certify(r) => {
                let _ = writeln!(out, "problem: {}", r.problem_kind);
                for b in &r.blocks {
                    let _ = writeln!(
                        out,
                        "block {}: {} [{}] {}",
                        b.block,
                        b.kind,
                        if b.certified { "certified" } else { "not certified" },
                        b.details
                    );
                }
                if let Some(s) = &r.solver {
                    solver_text(&mut out, s);
                }
            }
            Report::Judge(j) => {
                let _ = writeln!(out, "problem: {}", j.problem_kind);
                judge_text(&mut out, j);
            }
            Report::Reduce(r) => {
                let _ = writeln!(out, "problem: {}", r.problem_kind);
                solver_text(&mut out, &r.solver);
                let _ = writeln!(out, "reduction: {} after {} steps", r.outcome, r.iterations);
                if let Some(m) = &r.message {
                    let _ = writeln!(out, "  {m}");
                }
                let _ = writeln!(
                    out,
                    "  final ranks {:?}  pataki sum {} <= {}: {}",
                    r.final_ranks, r.pataki_sum, r.bound_m, r.bound_holds
                );
                let _ = writeln!(out, "  max residual {:.2e}  max objective drift {:.2e}", r.max_residual, r.max_objective_drift);
                if let Some(x) = &r.extracted {
                    let _ = writeln!(out, "  rank-one point: {x:?}");
                }
            }
            Report::Example51(r) => {
                let _ = writeln!(out, "{:>6} {:>12} {:>12} {:>12} {:>6} {:>6} {:>16} {:>10}", "alpha", "eta", "zeta", "oracle", "rankV", "rankW", "verdict", "table");
                for row in &r.rows {
                    let table = match row.matches_table {
                        Some(true) => "match",
                        Some(false) => "MISMATCH",
                        None => "observed",
                    };
                    let _ = writeln!(
                        out,
                        "{:>6.3} {:>12.6} {:>12} {:>12} {:>6} {:>6} {:>16} {:>10}",
                        row.alpha,
                        row.eta,
                        opt(row.zeta_witness),
                        opt(row.oracle_value),
                        row.rank_v,
                        row.rank_w,
                        row.verdict,
                        table
                    );
                }
            }
            Report::Example52(r) => {
                let _ = writeln!(out, "seed {}  dims {:?}  draws {}  alpha {:.6}", r.seed, r.dims, r.draws, r.alpha);
                judge_text(&mut out, &r.judge);
            }
        }
        out
    }
}
