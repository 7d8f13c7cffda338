//! Rank reduction on the optimal face and rank-one extraction.
//!
//! Starting from an optimal solution, each step writes every nonzero block as
//! `X_j = U_j D_j U_jᵀ`, finds a direction `(Δ_j, d)` that leaves every row
//! and the objective unchanged, and moves along it until a block loses rank
//! or a slack reaches zero. When no such direction remains the solution is an
//! extreme point of the optimal face and
//! `Σ_j r_j (r_j + 1) / 2 + #{nonzero slacks} ≤ #rows`.

use crate::error::{check_dim, Error, Result};
use crate::scalar::Real;
use crate::sdpr::{BlockKind, BlockSdp};
use crate::solver::SdpSolution;
use crate::symkernel::{default_eigen_tol, eigen, numeric_rank, Dense, SymMatrix};

/// Eigenvalues below this fraction of `max(1, λ_max)` are treated as exact zeros.
const ZERO_EIG: f64 = 1e-12;
/// Relative residual below which a row is taken as dependent.
const NULL_TOL: f64 = 1e-9;
const MIN_STEP: f64 = 1e-14;

#[derive(Clone, Debug, PartialEq)]
pub struct ReductionReport<T> {
    pub iterations: usize,
    pub final_ranks: Vec<usize>,
    pub pataki_sum: usize,
    /// Number of rows of the relaxation.
    pub bound_m: usize,
    pub extracted: Option<Vec<Vec<T>>>,
    /// Largest row residual seen over all iterates.
    pub max_residual: T,
    /// Largest `|value(iterate) - value(input)|` over all iterates.
    pub max_objective_drift: T,
}

impl<T> ReductionReport<T> {
    pub fn bound_holds(&self) -> bool {
        self.pataki_sum <= self.bound_m
    }
}

struct Face<T> {
    /// Orthonormal range basis and eigenvalues per block; empty when zero.
    bases: Vec<Option<(Dense<T>, Vec<T>)>>,
}

fn factor_block<T: Real>(x: &SymMatrix<T>, freeze: T) -> Result<Option<(Dense<T>, Vec<T>)>> {
    if x.fro_norm() <= freeze {
        return Ok(None);
    }
    let e = eigen(x, default_eigen_tol(x.dim()))?;
    let thr = T::lit(ZERO_EIG) * T::one().max(e.max_abs());
    let keep: Vec<usize> = (0..x.dim()).filter(|&k| e.eigenvalues[k] > thr).collect();
    if keep.is_empty() {
        return Ok(None);
    }
    let mut u = Dense::zeros(x.dim(), keep.len());
    for (c, &k) in keep.iter().enumerate() {
        for i in 0..x.dim() {
            u[(i, c)] = e.eigenvectors[(i, k)];
        }
    }
    Ok(Some((u, keep.iter().map(|&k| e.eigenvalues[k]).collect())))
}

fn rebuild<T: Real>(u: &Dense<T>, d: &SymMatrix<T>) -> SymMatrix<T> {
    // U D Uᵀ = (Uᵀ)ᵀ D (Uᵀ).
    u.transpose().congruence(d)
}

/// Coefficients of `⟨UᵀAU, Δ⟩` in the packed upper coordinates of `Δ`.
fn reduced_coeffs<T: Real>(u: &Dense<T>, a: &SymMatrix<T>, out: &mut Vec<T>) {
    let m = u.congruence(a);
    let r = m.dim();
    let two = T::lit(2.0);
    for i in 0..r {
        for j in i..r {
            out.push(if i == j { m.get(i, j) } else { two * m.get(i, j) });
        }
    }
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

/// Orthonormal basis of `{z : R z = 0}` via pivoted Gram-Schmidt.
fn null_space<T: Real>(rows: &[Vec<T>], n: usize) -> Vec<Vec<T>> {
    let tol = T::lit(NULL_TOL);
    let mut pending: Vec<Vec<T>> = rows
        .iter()
        .filter_map(|r| {
            let nr = dot(r, r).sqrt();
            (nr > T::zero()).then(|| r.iter().map(|&v| v / nr).collect())
        })
        .collect();
    let mut basis: Vec<Vec<T>> = Vec::new();
    let project = |v: &mut Vec<T>, basis: &[Vec<T>]| {
        for _ in 0..2 {
            for q in basis {
                let c = dot(q, v);
                for (x, &qx) in v.iter_mut().zip(q) {
                    *x -= c * qx;
                }
            }
        }
    };
    while !pending.is_empty() {
        for v in pending.iter_mut() {
            project(v, &basis);
        }
        let (k, nk) = pending
            .iter()
            .enumerate()
            .map(|(k, v)| (k, dot(v, v).sqrt()))
            .fold((0, T::zero()), |acc, x| if x.1 > acc.1 { x } else { acc });
        if nk <= tol {
            break;
        }
        let v = pending.swap_remove(k);
        basis.push(v.into_iter().map(|x| x / nk).collect());
    }
    let rank = basis.len();
    let mut null: Vec<Vec<T>> = Vec::new();
    let mut units: Vec<Vec<T>> = (0..n)
        .map(|i| {
            let mut e = vec![T::zero(); n];
            e[i] = T::one();
            e
        })
        .collect();
    while basis.len() < n {
        for v in units.iter_mut() {
            project(v, &basis);
        }
        let (k, nk) = units
            .iter()
            .enumerate()
            .map(|(k, v)| (k, dot(v, v).sqrt()))
            .fold((0, T::zero()), |acc, x| if x.1 > acc.1 { x } else { acc });
        let v: Vec<T> = units.swap_remove(k).into_iter().map(|x| x / nk).collect();
        basis.push(v.clone());
        null.push(v);
    }
    debug_assert_eq!(null.len(), n - rank);
    null
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Hit {
    Block(usize),
    Slack(usize),
    None,
}

/// Largest step along a direction and what it hits first.
fn boundary<T: Real>(
    face: &Face<T>,
    deltas: &[Option<SymMatrix<T>>],
    slacks: &[T],
    d: &[(usize, T)],
) -> Result<(T, Hit)> {
    let mut best = (T::infinity(), Hit::None);
    for (j, (basis, delta)) in face.bases.iter().zip(deltas).enumerate() {
        let (Some((_, lam)), Some(delta)) = (basis, delta) else {
            continue;
        };
        let r = lam.len();
        let w = SymMatrix::from_fn(r, |a, b| delta.get(a, b) / (lam[a] * lam[b]).sqrt());
        let mu = eigen(&w, default_eigen_tol(r))?.min();
        if mu < T::zero() {
            let t = -T::one() / mu;
            if t < best.0 {
                best = (t, Hit::Block(j));
            }
        }
    }
    for &(k, dk) in d {
        if dk < T::zero() {
            let t = slacks[k] / -dk;
            // Blocks win exact ties.
            if t < best.0 * (T::one() - T::lit(1e-12)) {
                best = (t, Hit::Slack(k));
            }
        }
    }
    Ok(best)
}

fn preference(h: Hit) -> (u8, usize) {
    match h {
        Hit::Block(j) => (0, j),
        Hit::Slack(k) => (1, k),
        Hit::None => (2, 0),
    }
}

fn feasibility<T: Real>(b: &BlockSdp<T>, blocks: &[SymMatrix<T>], slacks: &[T]) -> Result<T> {
    Ok(b.row_residuals(blocks, slacks)?
        .into_iter()
        .fold(T::zero(), |m, r| m.max(r.abs())))
}

/// Moves `sol` to an extreme point of the optimal face of `b`.
///
/// Blocks with Frobenius norm at most `tol` and slacks at most `tol` are
/// frozen at zero. `rank_tol` is used for the final extraction attempt.
pub fn reduce<T: Real>(
    b: &BlockSdp<T>,
    sol: &SdpSolution<T>,
    tol: T,
    rank_tol: T,
) -> Result<(SdpSolution<T>, ReductionReport<T>)> {
    check_dim("number of blocks", b.num_blocks(), sol.blocks.len())?;
    let m = b.num_rows();
    let b_scale = T::one() + b.rows.iter().fold(T::zero(), |mx, r| mx.max(r.rhs.abs()));
    let start_res = feasibility(b, &sol.blocks, &sol.slacks)?;
    let stale_tol = T::lit(10.0) * tol * b_scale;
    if start_res > stale_tol {
        return Err(Error::StaleSolution(format!(
            "row residual {start_res} exceeds {stale_tol}"
        )));
    }
    for (j, x) in sol.blocks.iter().enumerate() {
        let e = eigen(x, default_eigen_tol(x.dim()))?;
        if e.min() < -T::lit(10.0) * tol * (T::one() + e.max_abs()) {
            return Err(Error::StaleSolution(format!(
                "block {j} has eigenvalue {}",
                e.min()
            )));
        }
    }
    let value0 = b.objective_value(&sol.blocks);
    let mut x = sol.blocks.clone();
    let mut s: Vec<T> = b
        .rows
        .iter()
        .zip(&sol.slacks)
        .map(|(r, &v)| if r.slack == 0 || v <= tol { T::zero() } else { v })
        .collect();
    let mut max_residual = start_res;
    let mut max_drift = T::zero();
    let mut iterations = 0;
    let mut stalls = 0;
    let mut prev_count = usize::MAX;

    loop {
        let mut face = Face { bases: Vec::new() };
        for xj in x.iter_mut() {
            let f = factor_block(xj, tol)?;
            *xj = match &f {
                Some((u, lam)) => rebuild(u, &SymMatrix::diagonal(lam)),
                None => SymMatrix::zeros(xj.dim()),
            };
            face.bases.push(f);
        }
        let ranks: Vec<usize> = face
            .bases
            .iter()
            .map(|f| f.as_ref().map_or(0, |(_, l)| l.len()))
            .collect();
        let active: Vec<usize> = (0..m).filter(|&i| s[i] > T::zero()).collect();
        let count: usize = ranks.iter().map(|r| r * (r + 1) / 2).sum::<usize>() + active.len();
        max_residual = max_residual.max(feasibility(b, &x, &s)?);
        max_drift = max_drift.max((b.objective_value(&x) - value0).abs());

        if iterations > 0 && count >= prev_count {
            stalls += 1;
        }
        if stalls >= 2 {
            return Err(Error::ReductionStall {
                iterations,
                ranks,
                pataki_sum: count,
            });
        }
        prev_count = count;

        // Reduced system over (Δ_j packed, d_k).
        let mut rows: Vec<Vec<T>> = Vec::with_capacity(m);
        for (i, row) in b.rows.iter().enumerate() {
            let mut r = Vec::with_capacity(count);
            for (j, f) in face.bases.iter().enumerate() {
                if let Some((u, _)) = f {
                    reduced_coeffs(u, &row.blocks[j], &mut r);
                }
            }
            for &k in &active {
                r.push(if k == i { T::lit(row.slack as f64) } else { T::zero() });
            }
            rows.push(r);
        }
        let mut obj = Vec::with_capacity(count);
        for (j, f) in face.bases.iter().enumerate() {
            if let Some((u, _)) = f {
                reduced_coeffs(u, &b.objective[j], &mut obj);
            }
        }
        obj.resize(count, T::zero());

        let null = if count == 0 { Vec::new() } else { null_space(&rows, count) };
        if null.is_empty() {
            let final_sol = SdpSolution {
                value: b.objective_value(&x),
                blocks: x,
                slacks: s,
                ..sol.clone()
            };
            let extracted = extract_point(&final_sol, &b.block_kinds, rank_tol).ok();
            let report = ReductionReport {
                iterations,
                final_ranks: ranks,
                pataki_sum: count,
                bound_m: m,
                extracted,
                max_residual,
                max_objective_drift: max_drift,
            };
            return Ok((final_sol, report));
        }
        iterations += 1;

        // A null direction that also keeps the objective fixed, if possible.
        let g: Vec<T> = null.iter().map(|v| dot(v, &obj)).collect();
        let obj_norm = dot(&obj, &obj).sqrt();
        let flat = g.iter().all(|v| v.abs() <= T::lit(NULL_TOL) * (T::one() + obj_norm));
        let (z, descend) = if flat {
            (null[0].clone(), false)
        } else if null.len() >= 2 {
            let p = (0..g.len())
                .max_by(|&a, &c| g[a].abs().partial_cmp(&g[c].abs()).unwrap())
                .unwrap();
            let q = if p == 0 { 1 } else { 0 };
            let z: Vec<T> = (0..count)
                .map(|c| g[p] * null[q][c] - g[q] * null[p][c])
                .collect();
            let nz = dot(&z, &z).sqrt();
            (z.into_iter().map(|v| v / nz).collect(), false)
        } else {
            // Only an improving direction is left: follow it downhill.
            let sign = if g[0] > T::zero() { -T::one() } else { T::one() };
            (null[0].iter().map(|&v| sign * v).collect(), true)
        };

        let split = |z: &[T], sign: T| {
            let mut off = 0;
            let mut deltas = Vec::with_capacity(face.bases.len());
            for f in &face.bases {
                match f {
                    Some((_, lam)) => {
                        let r = lam.len();
                        let mut dm = SymMatrix::zeros(r);
                        for a in 0..r {
                            for c in a..r {
                                dm.set(a, c, sign * z[off]);
                                off += 1;
                            }
                        }
                        deltas.push(Some(dm));
                    }
                    None => deltas.push(None),
                }
            }
            let d: Vec<(usize, T)> = active
                .iter()
                .enumerate()
                .map(|(t, &k)| (k, sign * z[off + t]))
                .collect();
            (deltas, d)
        };

        let (dp, sp) = split(&z, T::one());
        let (tp, hp) = boundary(&face, &dp, &s, &sp)?;
        let (deltas, d, t, hit) = if descend {
            (dp, sp, tp, hp)
        } else {
            let (dn, sn) = split(&z, -T::one());
            let (tn, hn) = boundary(&face, &dn, &s, &sn)?;
            if hp != Hit::None && (hn == Hit::None || preference(hp) <= preference(hn)) {
                (dp, sp, tp, hp)
            } else {
                (dn, sn, tn, hn)
            }
        };
        if hit == Hit::None || !t.is_finite() {
            return Err(Error::ReductionStall {
                iterations,
                ranks,
                pataki_sum: count,
            });
        }
        if t < T::lit(MIN_STEP) {
            stalls += 1;
        }
        for (j, f) in face.bases.iter().enumerate() {
            if let (Some((u, lam)), Some(dm)) = (f, &deltas[j]) {
                let moved = SymMatrix::diagonal(lam).axpy(t, dm);
                x[j] = rebuild(u, &moved);
            }
        }
        for &(k, dk) in &d {
            s[k] += t * dk;
        }
        if let Hit::Slack(k) = hit {
            s[k] = T::zero();
        }
        log::trace!("reduction step {iterations}: t = {t:e}, hit {hit:?}");
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExtractionFailure {
    /// Block has numeric rank above one.
    Rank { block: usize, rank: usize },
    /// Homogenized block whose corner is not one.
    Corner { block: usize },
}

impl std::fmt::Display for ExtractionFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ExtractionFailure::Rank { block, rank } => write!(f, "block {block} has rank {rank}"),
            ExtractionFailure::Corner { block } => write!(f, "block {block} corner is not 1"),
        }
    }
}

/// Reads one vector per PSD block from a solution of rank at most one per block.
///
/// Homogeneous blocks yield their factor with the first nonzero entry
/// positive; homogenized blocks yield the leading `n` entries of the factor
/// scaled so that its last entry is one.
pub fn extract_point<T: Real>(
    sol: &SdpSolution<T>,
    kinds: &[BlockKind],
    tol: T,
) -> std::result::Result<Vec<Vec<T>>, ExtractionFailure> {
    let mut out = Vec::with_capacity(sol.blocks.len());
    for (j, (x, kind)) in sol.blocks.iter().zip(kinds).enumerate() {
        let d = x.dim();
        let rank = numeric_rank(x, tol);
        if rank > 1 {
            return Err(ExtractionFailure::Rank { block: j, rank });
        }
        let v: Vec<T> = if rank == 0 {
            vec![T::zero(); d]
        } else {
            let e = eigen(x, default_eigen_tol(d)).expect("jacobi sweep cap exceeded");
            let s = e.eigenvalues[0].max(T::zero()).sqrt();
            e.eigenvector(0).into_iter().map(|c| c * s).collect()
        };
        match kind {
            BlockKind::Homogeneous => {
                let sign = v
                    .iter()
                    .find(|c| c.abs() > tol)
                    .map_or(T::one(), |c| c.signum());
                out.push(v.into_iter().map(|c| c * sign).collect());
            }
            BlockKind::Inhomogeneous => {
                let last = v[d - 1];
                if (last.abs() - T::one()).abs() > tol {
                    return Err(ExtractionFailure::Corner { block: j });
                }
                let sign = last.signum();
                out.push(v[..d - 1].iter().map(|&c| c * sign).collect());
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::lift;
    use crate::sdpr::{RowOrigin, SdpRow};
    use crate::solver::SolveStatus;
    use approx::assert_abs_diff_eq;

    fn solution(blocks: Vec<SymMatrix<f64>>, slacks: Vec<f64>) -> SdpSolution<f64> {
        let m = slacks.len();
        SdpSolution {
            dual_blocks: blocks.clone(),
            blocks,
            slacks,
            dual_multipliers: vec![0.0; m],
            status: SolveStatus::Optimal,
            value: 0.0,
            dual_value: 0.0,
            iterations: 0,
            primal_residual: 0.0,
            dual_residual: 0.0,
            gap: 0.0,
            gap_history: vec![],
        }
    }

    fn trace_one(d: usize) -> BlockSdp<f64> {
        BlockSdp {
            block_dims: vec![d],
            block_kinds: vec![BlockKind::Homogeneous],
            block_owner: vec![0],
            objective: vec![SymMatrix::zeros(d)],
            rows: vec![SdpRow {
                blocks: vec![SymMatrix::identity(d)],
                slack: 0,
                rhs: 1.0,
                origin: RowOrigin::Constraint { k: 1 },
            }],
            source_m: 1,
            dropped: vec![],
        }
    }

    #[test]
    fn trace_constraint_reduces_to_rank_one() {
        let b = trace_one(2);
        let sol = solution(vec![SymMatrix::identity(2).scaled(0.5)], vec![0.0]);
        let (out, rep) = reduce(&b, &sol, 1e-9, 1e-6).unwrap();
        assert_eq!(rep.final_ranks, vec![1]);
        assert_eq!(rep.pataki_sum, 1);
        assert!(rep.bound_holds());
        assert_abs_diff_eq!(out.blocks[0].trace(), 1.0, epsilon = 1e-12);
        assert!(rep.max_residual < 1e-12);
        let v = rep.extracted.unwrap();
        assert_abs_diff_eq!(v[0][0] * v[0][0] + v[0][1] * v[0][1], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn rank_one_input_is_untouched() {
        let b = trace_one(3);
        let x = SymMatrix::outer(&[0.6, 0.8, 0.0]);
        let sol = solution(vec![x.clone()], vec![0.0]);
        let (out, rep) = reduce(&b, &sol, 1e-9, 1e-6).unwrap();
        assert_eq!(rep.iterations, 0);
        for (a, c) in out.blocks[0].packed().iter().zip(x.packed()) {
            assert_abs_diff_eq!(a, c, epsilon = 1e-14);
        }
    }

    #[test]
    fn stale_solution_rejected() {
        let b = trace_one(2);
        let sol = solution(vec![SymMatrix::identity(2)], vec![0.0]);
        assert!(matches!(reduce(&b, &sol, 1e-9, 1e-6), Err(Error::StaleSolution(_))));
    }

    #[test]
    fn extraction_examples() {
        let u = [0.25, -3.0];
        let sol = solution(vec![lift(&u)], vec![]);
        let got = extract_point(&sol, &[BlockKind::Inhomogeneous], 1e-9).unwrap();
        assert_abs_diff_eq!(got[0][0], 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(got[0][1], -3.0, epsilon = 1e-12);

        let v = SymMatrix::from_rows(&[vec![9.0, 3.0], vec![3.0, 1.0]]).unwrap();
        let sol = solution(vec![v, SymMatrix::zeros(1)], vec![]);
        let got = extract_point(&sol, &[BlockKind::Homogeneous; 2], 1e-9).unwrap();
        assert_abs_diff_eq!(got[0][0], 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(got[0][1], 1.0, epsilon = 1e-12);
        assert_eq!(got[1], vec![0.0]);

        let sol = solution(vec![SymMatrix::identity(2)], vec![]);
        assert_eq!(
            extract_point(&sol, &[BlockKind::Homogeneous], 1e-9),
            Err(ExtractionFailure::Rank { block: 0, rank: 2 })
        );
        let sol = solution(vec![SymMatrix::diagonal(&[0.0, 4.0])], vec![]);
        assert_eq!(
            extract_point(&sol, &[BlockKind::Inhomogeneous], 1e-9),
            Err(ExtractionFailure::Corner { block: 0 })
        );
    }

    #[test]
    fn null_space_of_rank_deficient_rows() {
        let rows: Vec<Vec<f64>> = vec![vec![1.0, 1.0, 0.0], vec![2.0, 2.0, 0.0]];
        let n = null_space(&rows, 3);
        assert_eq!(n.len(), 2);
        for v in &n {
            assert!(dot(&rows[0], v).abs() < 1e-14);
            assert_abs_diff_eq!(dot(v, v), 1.0, epsilon = 1e-14);
        }
        assert!(dot(&n[0], &n[1]).abs() < 1e-14);
    }
}
