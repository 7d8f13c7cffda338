//! Exactness of horizontally connected QCQPs.
//!
//! [`judge`] runs the whole pipeline on a [`SeparableQcqp`]: certify each
//! block, solve the block relaxation, split the right-hand side into
//! per-block allocations, check that each block is optimal for its own
//! relaxation, and look for a feasible point attaining the relaxation value.

use std::ops::Range;

use crate::certificates::{
    check_convex, check_hom_at, check_m_le_2, check_qcqp_sign_pattern, essential_rows_at,
    qcqp_graph, restrict_rows, AssumptionReport, Certificate, CertificateKind, SparsityGraph,
};
use crate::error::{check_dim, Error, Result};
use crate::model::{brute_force, HomSepQcqp, Qcqp, Relation, SearchBox, SeparableQcqp, SubQcqp};
use crate::reduction::{extract_point, reduce, ReductionReport};
use crate::scalar::Real;
use crate::sdpr::{build_block, build_hom, build_sub, BlockSdp};
use crate::solver::{solve, SdpSolution, SolveStatus, SolverOptions};
use crate::symkernel::{numeric_rank, SymMatrix};

/// PSD blocks of [`build_block`] owned by each sub-QCQP.
pub fn block_ranges<T: Real>(s: &SeparableQcqp<T>) -> Vec<Range<usize>> {
    let mut start = 0;
    s.blocks()
        .iter()
        .map(|b| {
            let len = match b {
                SubQcqp::General(_) => 1,
                SubQcqp::Homogeneous(h) => h.blocks(),
            };
            start += len;
            start - len..start
        })
        .collect()
}

/// `Σ_j ⟨A^p_{k,j}, X_j⟩` of row `k` (0 = objective) of block `p`.
fn block_row_value<T: Real>(sub: &SubQcqp<T>, k: usize, xs: &[SymMatrix<T>]) -> T {
    match sub {
        SubQcqp::General(q) => {
            let a = if k == 0 { q.objective().matrix() } else { q.constraint(k - 1).matrix() };
            a.dot(&xs[0])
        }
        SubQcqp::Homogeneous(h) => h.row(k).iter().zip(xs).map(|(c, v)| c.dot(v)).sum(),
    }
}

fn check_solution_shape<T: Real>(s: &SeparableQcqp<T>, sol: &SdpSolution<T>) -> Result<Vec<Range<usize>>> {
    let ranges = block_ranges(s);
    let nb = ranges.last().map_or(0, |r| r.end);
    check_dim("number of relaxation blocks", nb, sol.blocks.len())?;
    Ok(ranges)
}

/// Per-block allocations `δ^p_k = ⟨B^p_k, X̃^p⟩` achieved by `sol`.
pub fn decompose_delta<T: Real>(s: &SeparableQcqp<T>, sol: &SdpSolution<T>) -> Result<Vec<Vec<T>>> {
    let ranges = check_solution_shape(s, sol)?;
    Ok(s.blocks()
        .iter()
        .zip(&ranges)
        .map(|(sub, r)| (1..=s.m()).map(|k| block_row_value(sub, k, &sol.blocks[r.clone()])).collect())
        .collect())
}

/// Allocations `γ_k - Σ_{p' ≠ p} ⟨B^{p'}_k, X̃^{p'}⟩`: block `p` absorbs the row slack.
pub fn absorbed_delta<T: Real>(s: &SeparableQcqp<T>, sol: &SdpSolution<T>) -> Result<Vec<Vec<T>>> {
    let used = decompose_delta(s, sol)?;
    let total: Vec<T> = (0..s.m()).map(|k| used.iter().map(|d| d[k]).sum()).collect();
    Ok(used
        .iter()
        .map(|d| (0..s.m()).map(|k| s.gamma()[k] - (total[k] - d[k])).collect())
        .collect())
}

/// Outcome of re-solving one block's relaxation at its allocation.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockCheck<T> {
    /// `⟨B^p_0, X̃^p⟩`.
    pub block_value: T,
    /// Optimal value of the block relaxation at its allocation, if solved.
    pub sub_value: Option<T>,
    pub sub_status: Option<SolveStatus>,
    /// `|sub_value - block_value|`.
    pub gap: Option<T>,
}

/// Re-solves every block relaxation at `deltas` and compares values.
pub fn verify_suboptimality<T: Real>(
    s: &SeparableQcqp<T>,
    sol: &SdpSolution<T>,
    deltas: &[Vec<T>],
    opts: &SolverOptions<T>,
) -> Result<Vec<BlockCheck<T>>> {
    let ranges = check_solution_shape(s, sol)?;
    check_dim("allocations", s.blocks().len(), deltas.len())?;
    let mut out = Vec::new();
    for ((sub, r), d) in s.blocks().iter().zip(&ranges).zip(deltas) {
        let block_value = block_row_value(sub, 0, &sol.blocks[r.clone()]);
        let check = match sub.with_rhs(d.clone()).map(|local| solve(&build_sub(&local), opts)) {
            Ok(Ok(local)) if local.is_optimal() => BlockCheck {
                block_value,
                sub_value: Some(local.value),
                sub_status: Some(local.status),
                gap: Some((local.value - block_value).abs()),
            },
            Ok(Ok(local)) => BlockCheck {
                block_value,
                sub_value: None,
                sub_status: Some(local.status),
                gap: None,
            },
            _ => BlockCheck {
                block_value,
                sub_value: None,
                sub_status: None,
                gap: None,
            },
        };
        out.push(check);
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JudgeOptions<T> {
    pub solver: SolverOptions<T>,
    /// Threshold for numeric rank and nonzero tests.
    pub rank_tol: T,
    /// Freezing and feasibility tolerance for rank reduction.
    pub reduce_tol: T,
    /// Allowed `|objective - η|` and constraint violation of a witness, scaled by `1 + |η|`.
    pub witness_tol: T,
    /// Allowed relative gap in [`verify_suboptimality`].
    pub verify_tol: T,
    /// Half-width of the oracle search box.
    pub oracle_box: T,
    /// Grid points per axis; `None` picks [`oracle_grid_for`] of the dimension.
    pub oracle_grid: Option<usize>,
    pub oracle_rounds: usize,
}

impl<T: Real> Default for JudgeOptions<T> {
    fn default() -> Self {
        Self {
            solver: SolverOptions::default(),
            rank_tol: T::lit(1e-6),
            reduce_tol: T::lit(1e-7),
            witness_tol: T::lit(1e-5),
            verify_tol: T::lit(1e-6),
            oracle_box: T::lit(5.0),
            oracle_grid: None,
            oracle_rounds: 24,
        }
    }
}

/// Grid size keeping one oracle scan near `10^5` points.
pub fn oracle_grid_for(n: usize) -> usize {
    match n {
        0 | 1 => 201,
        2 => 81,
        3 => 41,
        _ => 21,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VerdictStatus {
    ExactCertified,
    ExactWitnessed,
    NotExact,
    Undetermined,
}

impl VerdictStatus {
    pub fn is_exact(self) -> bool {
        matches!(self, VerdictStatus::ExactCertified | VerdictStatus::ExactWitnessed)
    }
}

impl std::fmt::Display for VerdictStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            VerdictStatus::ExactCertified => "exact-certified",
            VerdictStatus::ExactWitnessed => "exact-witnessed",
            VerdictStatus::NotExact => "not-exact",
            VerdictStatus::Undetermined => "undetermined",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlockVerdict<T> {
    pub certificate: Certificate,
    pub assumption: Option<AssumptionReport>,
    pub check: Option<BlockCheck<T>>,
    /// How the block's witness was produced, if it was.
    pub witness_route: Option<&'static str>,
}

#[derive(Clone, Debug)]
pub struct ExactnessVerdict<T> {
    pub status: VerdictStatus,
    /// Every block certified and the relaxation solved to optimality.
    pub certified: bool,
    /// A feasible point attaining `eta` within tolerance was found.
    pub witnessed: bool,
    pub eta: T,
    pub solver_status: SolveStatus,
    /// Objective of the best feasible witness found.
    pub zeta_witness: Option<T>,
    pub witness: Option<Vec<Vec<T>>>,
    /// Grid-oracle value, when it was consulted.
    pub oracle_value: Option<T>,
    pub delta_decomposition: Vec<Vec<T>>,
    pub per_block: Vec<BlockVerdict<T>>,
    /// Numeric ranks of the relaxation blocks as returned by the solver.
    pub ranks: Vec<usize>,
    /// Ranks after reduction, when it completed.
    pub reduced_ranks: Option<Vec<usize>>,
    pub reduction: Option<ReductionReport<T>>,
    pub notes: Vec<String>,
    pub solution: Option<SdpSolution<T>>,
}

fn undetermined<T: Real>(
    eta: T,
    status: SolveStatus,
    per_block: Vec<BlockVerdict<T>>,
    note: String,
) -> ExactnessVerdict<T> {
    ExactnessVerdict {
        status: VerdictStatus::Undetermined,
        certified: false,
        witnessed: false,
        eta,
        solver_status: status,
        zeta_witness: None,
        witness: None,
        oracle_value: None,
        delta_decomposition: Vec::new(),
        per_block,
        ranks: Vec::new(),
        reduced_ranks: None,
        reduction: None,
        notes: vec![note],
        solution: None,
    }
}

/// Solution-independent certificate of one block.
pub fn static_certificate<T: Real>(sub: &SubQcqp<T>) -> Option<Certificate> {
    match sub {
        SubQcqp::General(q) => {
            let c = check_convex(q);
            if c.certified() {
                return Some(c);
            }
            let c = check_qcqp_sign_pattern(q);
            Some(if c.certified() {
                c
            } else {
                Certificate::none("neither convex nor sign-pattern")
            })
        }
        SubQcqp::Homogeneous(h) => {
            let c = check_m_le_2(h);
            c.certified().then_some(c)
        }
    }
}

/// Signs `s` with `s_i s_j = -σ_ij` on every edge, rooted at `+1`.
fn edge_signs(g: &SparsityGraph) -> Option<Vec<i8>> {
    let mut sign = vec![0i8; g.n];
    let mut adj = vec![Vec::new(); g.n];
    for (&(i, j), &s) in g.edges.iter().zip(&g.sigma) {
        adj[i].push((j, s));
        adj[j].push((i, s));
    }
    for root in 0..g.n {
        if sign[root] != 0 {
            continue;
        }
        sign[root] = 1;
        let mut stack = vec![root];
        while let Some(v) = stack.pop() {
            for &(w, s) in &adj[v] {
                if s == 0 {
                    return None;
                }
                let want = -s * sign[v];
                if sign[w] == 0 {
                    sign[w] = want;
                    stack.push(w);
                } else if sign[w] != want {
                    return None;
                }
            }
        }
    }
    Some(sign)
}

/// Rounds a homogenized relaxation block to `x_i = s_i √X_ii` using the sign pattern.
pub fn sign_rounding<T: Real>(q: &Qcqp<T>, x: &SymMatrix<T>) -> Option<Vec<T>> {
    let g = qcqp_graph(q);
    let sign = edge_signs(&g)?;
    let n = q.n();
    let last = T::lit(sign[n] as f64);
    Some(
        (0..n)
            .map(|i| T::lit(sign[i] as f64) * last * x.get(i, i).max(T::zero()).sqrt())
            .collect(),
    )
}

/// Point for one homogeneous block: reduce its own relaxation at `rhs` on the
/// essential rows, then extract.
fn hom_witness<T: Real>(
    h: &HomSepQcqp<T>,
    xs: &[SymMatrix<T>],
    rhs: &[T],
    opts: &JudgeOptions<T>,
) -> Result<Option<Vec<T>>> {
    let rows = essential_rows_at(h, rhs);
    let local = restrict_rows(h, &rows, rhs)?;
    let b = build_hom(&local);
    let sol = SdpSolution {
        blocks: xs.to_vec(),
        slacks: b.implied_slacks(xs),
        dual_multipliers: vec![T::zero(); b.num_rows()],
        dual_blocks: xs.to_vec(),
        status: SolveStatus::Optimal,
        value: b.objective_value(xs),
        dual_value: T::zero(),
        iterations: 0,
        primal_residual: T::zero(),
        dual_residual: T::zero(),
        gap: T::zero(),
        gap_history: Vec::new(),
    };
    let sol = SdpSolution {
        slacks: sol.slacks.iter().map(|&v| v.max(T::zero())).collect(),
        ..sol
    };
    let (reduced, _) = match reduce(&b, &sol, opts.reduce_tol, opts.rank_tol) {
        Ok(r) => r,
        Err(_) => return Ok(None),
    };
    Ok(extract_point(&reduced, &b.block_kinds, opts.rank_tol)
        .ok()
        .map(|vs| vs.concat()))
}

/// Full exactness pipeline on a horizontal connection.
pub fn judge<T: Real>(s: &SeparableQcqp<T>, opts: &JudgeOptions<T>) -> Result<ExactnessVerdict<T>> {
    let static_certs: Vec<Option<Certificate>> = s.blocks().iter().map(static_certificate).collect();
    let b = build_block(s);
    let sol = solve(&b, &opts.solver)?;
    let eta = sol.value;
    if !sol.is_optimal() {
        let per_block = static_certs
            .into_iter()
            .map(|c| BlockVerdict {
                certificate: c.unwrap_or_else(|| Certificate::none("no solution to evaluate")),
                assumption: None,
                check: None,
                witness_route: None,
            })
            .collect();
        let why = match sol.status {
            SolveStatus::Diverged => "iterates diverged; no attained primal-dual optimum",
            SolveStatus::MaxIter => "solver hit the iteration limit",
            _ => "solver failed numerically",
        };
        return Ok(undetermined(eta, sol.status, per_block, why.to_string()));
    }
    let ranges = block_ranges(s);
    let mut notes = Vec::new();

    // Allocations and per-block optimality.
    let deltas = decompose_delta(s, &sol)?;
    let absorbed = absorbed_delta(s, &sol)?;
    let mut checks = verify_suboptimality(s, &sol, &deltas, &opts.solver)?;
    for p in 0..checks.len() {
        if checks[p].gap.is_none() {
            let retry = verify_suboptimality(s, &sol, &absorbed, &opts.solver)?;
            if retry[p].gap.is_some() {
                notes.push(format!(
                    "block {}: relaxation at its achieved allocation did not solve; verified at the absorbed allocation",
                    p + 1
                ));
                checks[p] = retry[p].clone();
            }
        }
    }

    // Certificates, including the solution-dependent homogeneous one.
    let mut per_block = Vec::new();
    for (p, sub) in s.blocks().iter().enumerate() {
        let xs = &sol.blocks[ranges[p].clone()];
        let (certificate, assumption) = match (&static_certs[p], sub) {
            (Some(c), _) => (c.clone(), None),
            (None, SubQcqp::Homogeneous(h)) => check_hom_at(h, xs, &absorbed[p], opts.rank_tol)?,
            (None, SubQcqp::General(_)) => unreachable!("general blocks always get a static verdict"),
        };
        per_block.push(BlockVerdict {
            certificate,
            assumption,
            check: Some(checks[p].clone()),
            witness_route: None,
        });
    }
    let certified = per_block.iter().all(|v| v.certificate.certified());

    let ranks: Vec<usize> = sol.blocks.iter().map(|x| numeric_rank(x, opts.rank_tol)).collect();
    let scale = T::one() + eta.abs();
    let tol = opts.witness_tol * scale;

    // Witness: reduce the whole relaxation, then fall back to per-block routes.
    let mut best: Option<(T, Vec<Vec<T>>)> = None;
    let consider = |pts: Vec<Vec<T>>, best: &mut Option<(T, Vec<Vec<T>>)>| -> Result<bool> {
        let viol = s.max_violation(&pts)?;
        if viol > tol {
            return Ok(false);
        }
        let obj = s.eval_objective(&pts)?;
        if best.as_ref().is_none_or(|(v, _)| obj < *v) {
            *best = Some((obj, pts));
        }
        Ok((obj - eta).abs() <= tol)
    };

    let (base, reduction) = match reduce(&b, &sol, opts.reduce_tol, opts.rank_tol) {
        Ok((r, rep)) => (r, Some(rep)),
        Err(Error::ReductionStall { iterations, .. }) => {
            notes.push(format!("rank reduction stalled after {iterations} steps"));
            (sol.clone(), None)
        }
        Err(e) => {
            notes.push(format!("rank reduction failed: {e}"));
            (sol.clone(), None)
        }
    };
    let reduced_ranks = reduction.as_ref().map(|r| r.final_ranks.clone());
    let mut found = false;
    if let Some(vs) = reduction.as_ref().and_then(|r| r.extracted.clone()) {
        let pts: Vec<Vec<T>> = ranges.iter().map(|r| vs[r.clone()].concat()).collect();
        found = consider(pts, &mut best)?;
        if found {
            for v in per_block.iter_mut() {
                v.witness_route = Some("rank-one extraction");
            }
        }
    }
    if !found {
        let mut pts = Vec::new();
        let mut routes = Vec::new();
        for (p, sub) in s.blocks().iter().enumerate() {
            let xs = &base.blocks[ranges[p].clone()];
            let kind = per_block[p].certificate.kind;
            let (pt, route) = match sub {
                SubQcqp::General(q) => {
                    if let Ok(Some(v)) = extract_point(
                        &SdpSolution { blocks: xs.to_vec(), ..base.clone() },
                        &b.block_kinds[ranges[p].clone()],
                        opts.rank_tol,
                    )
                    .map(|v| v.into_iter().next())
                    {
                        (Some(v), "rank-one extraction")
                    } else if kind == CertificateKind::Convex {
                        (crate::certificates::extract_convex_solution(&xs[0]).ok(), "last column")
                    } else if matches!(kind, CertificateKind::SignPattern(_)) {
                        (sign_rounding(q, &xs[0]), "sign rounding")
                    } else {
                        (None, "none")
                    }
                }
                SubQcqp::Homogeneous(h) => (hom_witness(h, xs, &absorbed[p], opts)?, "block reduction"),
            };
            routes.push(route);
            match pt {
                Some(v) => pts.push(v),
                None => {
                    notes.push(format!("block {}: no witness from route '{route}'", p + 1));
                    break;
                }
            }
        }
        if pts.len() == s.blocks().len() {
            found = consider(pts, &mut best)?;
            if found {
                for (v, r) in per_block.iter_mut().zip(routes) {
                    v.witness_route = Some(r);
                }
            }
        }
    }

    let mut oracle_value = None;
    let mut status = if certified {
        VerdictStatus::ExactCertified
    } else if found {
        VerdictStatus::ExactWitnessed
    } else {
        VerdictStatus::Undetermined
    };
    if !certified && !found {
        let flat = s.flatten();
        if flat.n() <= 4 {
            let bx = SearchBox::cube(flat.n(), opts.oracle_box);
            let grid = opts.oracle_grid.unwrap_or_else(|| oracle_grid_for(flat.n()));
            let r = brute_force(&flat, &bx, grid, opts.oracle_rounds)?;
            oracle_value = Some(r.value);
            if r.value - eta > T::lit(10.0) * tol {
                status = VerdictStatus::NotExact;
                notes.push(format!(
                    "grid oracle on [-{0}, {0}]^{1} found {2} > eta = {eta}",
                    opts.oracle_box,
                    flat.n(),
                    r.value
                ));
            } else if let Some(pt) = r.point {
                if (r.value - eta).abs() <= tol {
                    status = VerdictStatus::ExactWitnessed;
                    found = true;
                    let pts = s.split(&pt);
                    best = Some((r.value, pts));
                    notes.push("witness supplied by the grid oracle".into());
                }
            }
        } else {
            notes.push(format!("no oracle for {} variables", flat.n()));
        }
    }
    if !certified {
        for (p, v) in per_block.iter().enumerate() {
            if !v.certificate.certified() {
                notes.push(format!("block {}: {}", p + 1, v.certificate.details));
            }
        }
    }

    Ok(ExactnessVerdict {
        status,
        certified,
        witnessed: found,
        eta,
        solver_status: sol.status,
        zeta_witness: best.as_ref().map(|(v, _)| *v),
        witness: best.map(|(_, p)| p),
        oracle_value,
        delta_decomposition: deltas,
        per_block,
        ranks,
        reduced_ranks,
        reduction,
        notes,
        solution: Some(sol),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct AllocationRow<T> {
    pub block: usize,
    pub allocation: Vec<T>,
    /// Lower-level value at the allocation.
    pub value: T,
    /// Whether `value` is a certified lower-level optimum rather than a relaxation value.
    pub exact: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BilevelReport<T> {
    pub rows: Vec<AllocationRow<T>>,
    pub total: T,
    pub eta: T,
    /// `Σ_p value_p = η` within tolerance.
    pub identity_holds: bool,
}

/// Upper level allocates `γ = Σ_p δ^p`; lower levels report their values.
pub fn bilevel_report<T: Real>(s: &SeparableQcqp<T>, verdict: &ExactnessVerdict<T>, tol: T) -> BilevelReport<T> {
    let rows: Vec<AllocationRow<T>> = verdict
        .delta_decomposition
        .iter()
        .zip(&verdict.per_block)
        .enumerate()
        .map(|(p, (d, v))| {
            let check = v.check.as_ref();
            AllocationRow {
                block: p + 1,
                allocation: d.clone(),
                value: check.map_or(T::nan(), |c| c.block_value),
                exact: v.certificate.certified(),
            }
        })
        .collect();
    let total: T = rows.iter().map(|r| r.value).sum();
    let _ = s;
    BilevelReport {
        identity_holds: (total - verdict.eta).abs() <= tol * (T::one() + verdict.eta.abs()),
        rows,
        total,
        eta: verdict.eta,
    }
}

/// Parametric two-block purely quadratic instance with three constraints.
pub fn make_example51<T: Real>(alpha: T) -> Result<HomSepQcqp<T>> {
    if !(alpha >= T::zero() && alpha <= T::lit(4.0)) {
        return Err(Error::Range(format!("alpha must lie in [0, 4], got {alpha}")));
    }
    let m2 = |a: f64, b: T, c: T| {
        SymMatrix::from_rows(&[vec![T::lit(a), b], vec![b, c]]).expect("finite entries")
    };
    let z = T::zero();
    let one = T::one();
    let half_sum = -(T::lit(4.0) + alpha) / T::lit(2.0);
    let v = vec![
        m2(1.0, z, z),
        m2(0.0, z, one),
        m2(1.0, half_sum, T::lit(4.0) * alpha),
        m2(-1.0, T::lit(2.5), T::lit(-6.0)),
    ];
    let w = [-1.0, 0.0, 0.0, 1.0];
    let mats = v
        .into_iter()
        .zip(w)
        .map(|(vk, wk)| vec![vk, SymMatrix::diagonal(&[T::lit(wk)])])
        .collect();
    HomSepQcqp::new(
        mats,
        vec![Relation::Eq, Relation::Le, Relation::Le],
        vec![one, z, z],
    )
}

/// Relaxation of a connection and its layout, for callers that drive the steps themselves.
pub fn relaxation<T: Real>(s: &SeparableQcqp<T>) -> (BlockSdp<T>, Vec<Range<usize>>) {
    (build_block(s), block_ranges(s))
}
