//! Sufficient conditions for an exact relaxation.
//!
//! Three classes are recognised: convex problems, problems whose aggregated
//! sparsity graph carries a compatible sign pattern, and separable purely
//! quadratic problems with few essential constraints.

use std::collections::VecDeque;
use std::fmt;

use crate::error::{check_dim, Error, Result};
use crate::model::{HomSepQcqp, Qcqp, Relation};
use crate::scalar::Real;
use crate::solver::SdpSolution;
use crate::symkernel::{is_psd, numeric_rank, SymMatrix};

/// PSD tolerance for the quadratic parts in [`check_convex`].
pub const CONVEX_PSD_TOL: f64 = 1e-9;
/// Default threshold for treating blocks and residuals as nonzero.
pub const DEFAULT_RANK_TOL: f64 = 1e-6;

/// Aggregated sparsity pattern with edge signs; vertices are `0..n`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SparsityGraph {
    pub n: usize,
    /// Sorted edges `(i, j)` with `i < j`.
    pub edges: Vec<(usize, usize)>,
    /// `+1`, `-1` or `0` per edge, aligned with `edges`.
    pub sigma: Vec<i8>,
}

impl SparsityGraph {
    pub fn new(n: usize, mut signed: Vec<((usize, usize), i8)>) -> Self {
        for ((i, j), _) in signed.iter_mut() {
            assert!(*i != *j && *i < n && *j < n, "invalid edge ({i}, {j})");
            if *i > *j {
                std::mem::swap(i, j);
            }
        }
        signed.sort_unstable();
        signed.dedup_by_key(|(e, _)| *e);
        let (edges, sigma) = signed.into_iter().unzip();
        Self { n, edges, sigma }
    }

    pub fn sign(&self, i: usize, j: usize) -> Option<i8> {
        let e = if i < j { (i, j) } else { (j, i) };
        self.edges.binary_search(&e).ok().map(|k| self.sigma[k])
    }

    fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(i, j) in &self.edges {
            adj[i].push(j);
            adj[j].push(i);
        }
        for a in adj.iter_mut() {
            a.sort_unstable();
        }
        adj
    }

    pub fn components(&self) -> usize {
        let adj = self.adjacency();
        let mut seen = vec![false; self.n];
        let mut count = 0;
        for s in 0..self.n {
            if seen[s] {
                continue;
            }
            count += 1;
            seen[s] = true;
            let mut stack = vec![s];
            while let Some(v) = stack.pop() {
                for &w in &adj[v] {
                    if !seen[w] {
                        seen[w] = true;
                        stack.push(w);
                    }
                }
            }
        }
        count
    }

    pub fn is_forest(&self) -> bool {
        self.edges.len() + self.components() == self.n
    }

    pub fn is_bipartite(&self) -> bool {
        let adj = self.adjacency();
        let mut color: Vec<Option<bool>> = vec![None; self.n];
        for s in 0..self.n {
            if color[s].is_some() {
                continue;
            }
            color[s] = Some(false);
            let mut queue = VecDeque::from([s]);
            while let Some(v) = queue.pop_front() {
                let c = color[v].unwrap();
                for &w in &adj[v] {
                    match color[w] {
                        None => {
                            color[w] = Some(!c);
                            queue.push_back(w);
                        }
                        Some(cw) if cw == c => return false,
                        _ => {}
                    }
                }
            }
        }
        true
    }
}

/// Graph over all indices of `mats`: edge `(i, j)` whenever some matrix has a
/// nonzero `(i, j)` entry, signed by the common sign of those entries.
pub fn aggregated_graph<T: Real>(mats: &[&SymMatrix<T>]) -> Result<SparsityGraph> {
    let Some(first) = mats.first() else {
        return Err(Error::Structure("aggregated graph needs at least one matrix".into()));
    };
    let n = first.dim();
    for m in mats {
        check_dim("aggregated graph matrix", n, m.dim())?;
    }
    let mut signed = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let (mut pos, mut neg) = (false, false);
            for m in mats {
                let v = m.get(i, j);
                pos |= v > T::zero();
                neg |= v < T::zero();
            }
            let s = match (pos, neg) {
                (false, false) => continue,
                (true, false) => 1,
                (false, true) => -1,
                (true, true) => 0,
            };
            signed.push(((i, j), s));
        }
    }
    Ok(SparsityGraph::new(n, signed))
}

/// Graph of a QCQP over its homogenized matrices, the last vertex being the
/// homogenization coordinate. Rows that are identically zero are skipped.
pub fn qcqp_graph<T: Real>(q: &Qcqp<T>) -> SparsityGraph {
    let mats: Vec<&SymMatrix<T>> = std::iter::once(q.objective().matrix())
        .chain(q.constraints().iter().map(|f| f.matrix()))
        .collect();
    aggregated_graph(&mats).expect("qcqp matrices share a dimension")
}

/// Vertex visiting order of the spanning forest used by [`cycle_basis_with`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Traversal {
    Ascending,
    Descending,
}

/// Fundamental cycles of a breadth-first spanning forest.
pub fn cycle_basis(g: &SparsityGraph) -> Vec<Vec<(usize, usize)>> {
    cycle_basis_with(g, Traversal::Ascending)
}

pub fn cycle_basis_with(g: &SparsityGraph, order: Traversal) -> Vec<Vec<(usize, usize)>> {
    let mut adj = g.adjacency();
    let roots: Vec<usize> = match order {
        Traversal::Ascending => (0..g.n).collect(),
        Traversal::Descending => {
            for a in adj.iter_mut() {
                a.reverse();
            }
            (0..g.n).rev().collect()
        }
    };
    let mut parent: Vec<Option<usize>> = vec![None; g.n];
    let mut depth = vec![0usize; g.n];
    let mut seen = vec![false; g.n];
    let mut tree = std::collections::BTreeSet::new();
    for &r in &roots {
        if seen[r] {
            continue;
        }
        seen[r] = true;
        let mut queue = VecDeque::from([r]);
        while let Some(v) = queue.pop_front() {
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    parent[w] = Some(v);
                    depth[w] = depth[v] + 1;
                    tree.insert((v.min(w), v.max(w)));
                    queue.push_back(w);
                }
            }
        }
    }
    let norm = |a: usize, b: usize| (a.min(b), a.max(b));
    let mut cycles = Vec::new();
    for &(i, j) in &g.edges {
        if tree.contains(&(i, j)) {
            continue;
        }
        // Tree paths from both endpoints up to their lowest common ancestor.
        let (mut a, mut b) = (i, j);
        let mut left = Vec::new();
        let mut right = Vec::new();
        while depth[a] > depth[b] {
            let p = parent[a].unwrap();
            left.push(norm(a, p));
            a = p;
        }
        while depth[b] > depth[a] {
            let p = parent[b].unwrap();
            right.push(norm(b, p));
            b = p;
        }
        while a != b {
            let pa = parent[a].unwrap();
            let pb = parent[b].unwrap();
            left.push(norm(a, pa));
            right.push(norm(b, pb));
            a = pa;
            b = pb;
        }
        let mut cycle = vec![(i, j)];
        cycle.extend(left);
        cycle.extend(right.into_iter().rev());
        cycles.push(cycle);
    }
    cycles
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SignCase {
    General,
    AllNonpositive,
    Forest,
    BipartitePositive,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CertificateKind {
    Convex,
    SignPattern(SignCase),
    HomLimited,
    None,
}

impl fmt::Display for CertificateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CertificateKind::Convex => f.write_str("convex"),
            CertificateKind::SignPattern(c) => write!(f, "sign-pattern({c:?})"),
            CertificateKind::HomLimited => f.write_str("hom-limited"),
            CertificateKind::None => f.write_str("none"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Certificate {
    pub kind: CertificateKind,
    pub details: String,
    pub depends_on_solution: bool,
}

impl Certificate {
    fn new(kind: CertificateKind, details: impl Into<String>, depends_on_solution: bool) -> Self {
        Self {
            kind,
            details: details.into(),
            depends_on_solution,
        }
    }

    pub fn none(details: impl Into<String>) -> Self {
        Self::new(CertificateKind::None, details, false)
    }

    pub fn certified(&self) -> bool {
        self.kind != CertificateKind::None
    }
}

/// Conditions (i) and (ii) on a signed graph, with the matched special case.
pub fn check_sign_pattern(g: &SparsityGraph) -> Certificate {
    if let Some(k) = g.sigma.iter().position(|&s| s == 0) {
        let (i, j) = g.edges[k];
        return Certificate::none(format!("edge ({}, {}) has mixed signs", i + 1, j + 1));
    }
    if g.sigma.iter().all(|&s| s == -1) {
        return Certificate::new(
            CertificateKind::SignPattern(SignCase::AllNonpositive),
            format!("all {} edges nonpositive", g.edges.len()),
            false,
        );
    }
    if g.is_forest() {
        return Certificate::new(
            CertificateKind::SignPattern(SignCase::Forest),
            "graph is a forest with definite edge signs",
            false,
        );
    }
    if g.sigma.iter().all(|&s| s == 1) && g.is_bipartite() {
        return Certificate::new(
            CertificateKind::SignPattern(SignCase::BipartitePositive),
            "graph is bipartite with all edges nonnegative",
            false,
        );
    }
    let cycles = cycle_basis(g);
    for c in &cycles {
        let prod: i32 = c.iter().map(|&(i, j)| g.sign(i, j).unwrap() as i32).product();
        let want = if c.len() % 2 == 0 { 1 } else { -1 };
        if prod != want {
            return Certificate::none(format!(
                "cycle of length {} has sign product {prod}, need {want}",
                c.len()
            ));
        }
    }
    Certificate::new(
        CertificateKind::SignPattern(SignCase::General),
        format!("{} basis cycles satisfy the sign condition", cycles.len()),
        false,
    )
}

fn nonzero_rows<T: Real>(q: &Qcqp<T>) -> Vec<usize> {
    (0..q.m()).filter(|&k| !q.constraint(k).is_zero()).collect()
}

/// Sign-pattern certificate of a QCQP whose nonzero rows are all `≤`.
pub fn check_qcqp_sign_pattern<T: Real>(q: &Qcqp<T>) -> Certificate {
    let rows = nonzero_rows(q);
    if let Some(&k) = rows.iter().find(|&&k| q.relations()[k] != Relation::Le) {
        return Certificate::none(format!("row {} is not a <= constraint", k + 1));
    }
    let mats: Vec<&SymMatrix<T>> = std::iter::once(q.objective().matrix())
        .chain(rows.iter().map(|&k| q.constraint(k).matrix()))
        .collect();
    let g = aggregated_graph(&mats).expect("qcqp matrices share a dimension");
    check_sign_pattern(&g)
}

/// Convex certificate: every nonzero row is `≤` and every quadratic part is PSD.
pub fn check_convex<T: Real>(q: &Qcqp<T>) -> Certificate {
    let rows = nonzero_rows(q);
    if let Some(&k) = rows.iter().find(|&&k| q.relations()[k] != Relation::Le) {
        return Certificate::none(format!("row {} is not a <= constraint", k + 1));
    }
    let tol = T::lit(CONVEX_PSD_TOL);
    if !is_psd(&q.objective().quadratic_part(), tol) {
        return Certificate::none("objective is not convex");
    }
    for &k in &rows {
        if !is_psd(&q.constraint(k).quadratic_part(), tol) {
            return Certificate::none(format!("constraint {} is not convex", k + 1));
        }
    }
    Certificate::new(
        CertificateKind::Convex,
        format!("objective and {} constraints convex", rows.len()),
        false,
    )
}

/// Reads `u` from the last column of a homogenized relaxation block.
pub fn extract_convex_solution<T: Real>(x: &SymMatrix<T>) -> Result<Vec<T>> {
    let d = x.dim();
    if d == 0 {
        return Err(Error::Structure("empty block".into()));
    }
    let corner = x.get(d - 1, d - 1);
    if (corner - T::one()).abs() > T::lit(1e-6) {
        return Err(Error::Structure(format!("corner entry {corner} is not 1")));
    }
    Ok((0..d - 1).map(|i| x.get(i, d - 1)).collect())
}

/// Evidence for the rank-count condition on one solution.
#[derive(Clone, Debug, PartialEq)]
pub struct AssumptionReport {
    pub holds: bool,
    pub nonzero_count: usize,
    pub required: usize,
    pub block_nonzero: Vec<bool>,
    /// `None` on equality rows, whose residual vanishes identically.
    pub residual_nonzero: Vec<Option<bool>>,
}

/// Counts nonzero blocks and nonzero inequality residuals at `blocks`.
pub fn assumption_a_at<T: Real>(
    h: &HomSepQcqp<T>,
    blocks: &[SymMatrix<T>],
    tol: T,
) -> Result<AssumptionReport> {
    check_dim("number of blocks", h.blocks(), blocks.len())?;
    for (v, &d) in blocks.iter().zip(h.dims()) {
        check_dim("block dimension", d, v.dim())?;
    }
    let vmax = blocks.iter().fold(T::zero(), |m, v| m.max(v.fro_norm()));
    let block_nonzero: Vec<bool> = blocks
        .iter()
        .map(|v| v.fro_norm() > tol * (T::one() + vmax))
        .collect();
    let residual_nonzero: Vec<Option<bool>> = (1..=h.m())
        .map(|k| {
            if h.relations()[k - 1] == Relation::Eq {
                return None;
            }
            let d = h.rhs()[k - 1];
            let lhs: T = h.row(k).iter().zip(blocks).map(|(c, v)| c.dot(v)).sum();
            Some((d - lhs).abs() > tol * (T::one() + d.abs()))
        })
        .collect();
    let nonzero_count = block_nonzero.iter().filter(|&&b| b).count()
        + residual_nonzero.iter().filter(|r| **r == Some(true)).count();
    let required = h.m().saturating_sub(1);
    Ok(AssumptionReport {
        holds: nonzero_count >= required,
        nonzero_count,
        required,
        block_nonzero,
        residual_nonzero,
    })
}

/// Rank-count condition on a solution of the relaxation of `h`.
pub fn check_assumption_a<T: Real>(
    h: &HomSepQcqp<T>,
    sol: &SdpSolution<T>,
    tol: T,
) -> Result<AssumptionReport> {
    assumption_a_at(h, &sol.blocks, tol)
}

/// Indices (1-based) of rows of `h` that are not identically zero.
pub fn essential_rows<T: Real>(h: &HomSepQcqp<T>) -> Vec<usize> {
    (1..=h.m()).filter(|&k| !h.row_is_zero(k)).collect()
}

/// Restriction of `h` to the given 1-based rows, with right-hand side `rhs`.
pub fn restrict_rows<T: Real>(h: &HomSepQcqp<T>, rows: &[usize], rhs: &[T]) -> Result<HomSepQcqp<T>> {
    check_dim("right-hand side", h.m(), rhs.len())?;
    let mut mats = vec![h.row(0).to_vec()];
    let mut rel = Vec::new();
    let mut b = Vec::new();
    for &k in rows {
        mats.push(h.row(k).to_vec());
        rel.push(h.relations()[k - 1]);
        b.push(rhs[k - 1]);
    }
    HomSepQcqp::new(mats, rel, b)
}

/// Positive ratio `a` with `row_l = a · row_k`, if one exists.
fn proportional<T: Real>(h: &HomSepQcqp<T>, k: usize, l: usize) -> Option<T> {
    let rk = h.row(k);
    let rl = h.row(l);
    let (mut best, mut idx) = (T::zero(), None);
    for (q, c) in rk.iter().enumerate() {
        for (p, &v) in c.packed().iter().enumerate() {
            if v.abs() > best {
                best = v.abs();
                idx = Some((q, p));
            }
        }
    }
    let (q, p) = idx?;
    let a = rl[q].packed()[p] / rk[q].packed()[p];
    if !(a > T::zero()) {
        return None;
    }
    let scale = T::one().max(best * a);
    let tol = T::lit(1e-12) * scale;
    let same = rk
        .iter()
        .zip(rl)
        .all(|(ck, cl)| ck.packed().iter().zip(cl.packed()).all(|(&x, &y)| (y - a * x).abs() <= tol));
    same.then_some(a)
}

/// Rows left after dropping identically zero rows and, from every pair of
/// positively proportional inequality rows, the looser one under `rhs`.
pub fn essential_rows_at<T: Real>(h: &HomSepQcqp<T>, rhs: &[T]) -> Vec<usize> {
    let mut rows = essential_rows(h);
    let mut i = 0;
    while i < rows.len() {
        let k = rows[i];
        let rel = h.relations()[k - 1];
        let mut dropped_k = false;
        let mut j = i + 1;
        while j < rows.len() {
            let l = rows[j];
            if rel == Relation::Eq || h.relations()[l - 1] != rel {
                j += 1;
                continue;
            }
            let Some(a) = proportional(h, k, l) else {
                j += 1;
                continue;
            };
            // Row l reads ⟨C_k, V⟩ (rel) rhs_l / a.
            let bk = rhs[k - 1];
            let bl = rhs[l - 1] / a;
            let keep_k = match rel {
                Relation::Le => bk <= bl,
                _ => bk >= bl,
            };
            if keep_k {
                rows.remove(j);
            } else {
                rows.remove(i);
                dropped_k = true;
                break;
            }
        }
        if !dropped_k {
            i += 1;
        }
    }
    rows
}

/// Certificate for at most two essential constraints.
pub fn check_m_le_2<T: Real>(h: &HomSepQcqp<T>) -> Certificate {
    let rows = essential_rows(h);
    if rows.len() <= 2 {
        Certificate::new(
            CertificateKind::HomLimited,
            format!("{} essential constraints", rows.len()),
            false,
        )
    } else {
        Certificate::none(format!("{} essential constraints exceed 2", rows.len()))
    }
}

/// Homogeneous certificate evaluated at a solution with right-hand side `rhs`.
pub fn check_hom_at<T: Real>(
    h: &HomSepQcqp<T>,
    blocks: &[SymMatrix<T>],
    rhs: &[T],
    tol: T,
) -> Result<(Certificate, Option<AssumptionReport>)> {
    let direct = check_m_le_2(h);
    if direct.certified() {
        return Ok((direct, None));
    }
    let rows = essential_rows_at(h, rhs);
    let reduced = restrict_rows(h, &rows, rhs)?;
    let rep = assumption_a_at(&reduced, blocks, tol)?;
    let kept: Vec<String> = rows.iter().map(|k| k.to_string()).collect();
    let cert = if reduced.m() <= 2 {
        Certificate::new(
            CertificateKind::HomLimited,
            format!("{} essential constraints at this solution (rows {})", reduced.m(), kept.join(",")),
            true,
        )
    } else if rep.holds {
        Certificate::new(
            CertificateKind::HomLimited,
            format!(
                "{} of {} blocks and residuals nonzero, need {} (rows {}); checked on this solution only",
                rep.nonzero_count,
                reduced.blocks() + reduced.m(),
                rep.required,
                kept.join(",")
            ),
            true,
        )
    } else {
        Certificate::none(format!(
            "condition fails, exactness undetermined: {} nonzero, need {}",
            rep.nonzero_count, rep.required
        ))
    };
    Ok((cert, Some(rep)))
}

/// `Σ_{q ∈ Q} r_q (r_q + 1) / 2 + |K|` over nonzero blocks and nonzero slacks.
pub fn pataki_sum<T: Real>(blocks: &[SymMatrix<T>], slacks: &[T], rank_tol: T) -> usize {
    let ranks: usize = blocks
        .iter()
        .map(|x| {
            if x.fro_norm() <= rank_tol {
                0
            } else {
                let r = numeric_rank(x, rank_tol);
                r * (r + 1) / 2
            }
        })
        .sum();
    ranks + slacks.iter().filter(|s| s.abs() > rank_tol).count()
}

pub fn pataki_bound_holds<T: Real>(sol: &SdpSolution<T>, m: usize, rank_tol: T) -> bool {
    pataki_sum(&sol.blocks, &sol.slacks, rank_tol) <= m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::QuadFunc;
    use crate::solver::SolveStatus;

    fn signed(n: usize, edges: &[(usize, usize)], s: i8) -> SparsityGraph {
        SparsityGraph::new(n, edges.iter().map(|&e| (e, s)).collect())
    }

    fn m2(a: f64, b: f64, c: f64) -> SymMatrix<f64> {
        SymMatrix::from_rows(&[vec![a, b], vec![b, c]]).unwrap()
    }

    #[test]
    fn aggregated_graph_examples() {
        let d = SymMatrix::diagonal(&[1.0, 2.0, 3.0]);
        assert!(aggregated_graph(&[&d]).unwrap().edges.is_empty());

        let a = m2(0.0, -1.0, 0.0);
        let g = aggregated_graph(&[&a]).unwrap();
        assert_eq!(g.edges, vec![(0, 1)]);
        assert_eq!(g.sigma, vec![-1]);

        let b = m2(0.0, 1.0, 0.0);
        let g = aggregated_graph(&[&a, &b]).unwrap();
        assert_eq!(g.sigma, vec![0]);
        assert_eq!(check_sign_pattern(&g).kind, CertificateKind::None);

        let e: Vec<&SymMatrix<f64>> = vec![];
        assert!(aggregated_graph(&e).is_err());
        assert!(matches!(
            aggregated_graph(&[&a, &d]),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn cycle_basis_examples() {
        let path = signed(4, &[(0, 1), (1, 2), (1, 3)], 1);
        assert!(cycle_basis(&path).is_empty());

        let tri = signed(3, &[(0, 1), (1, 2), (0, 2)], 1);
        let c = cycle_basis(&tri);
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].len(), 3);

        let k4 = signed(4, &[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)], 1);
        assert_eq!(cycle_basis(&k4).len(), 3);
        assert_eq!(cycle_basis_with(&k4, Traversal::Descending).len(), 3);
    }

    #[test]
    fn cycles_are_closed_walks() {
        let g = signed(5, &[(0, 1), (1, 2), (2, 3), (3, 0), (1, 3), (3, 4), (4, 0)], 1);
        for order in [Traversal::Ascending, Traversal::Descending] {
            for c in cycle_basis_with(&g, order) {
                let mut deg = vec![0; g.n];
                for &(i, j) in &c {
                    assert!(g.sign(i, j).is_some());
                    deg[i] += 1;
                    deg[j] += 1;
                }
                assert!(deg.iter().all(|&d| d % 2 == 0), "{c:?}");
            }
        }
    }

    #[test]
    fn sign_pattern_examples() {
        let tri = [(0, 1), (1, 2), (0, 2)];
        assert_eq!(
            check_sign_pattern(&signed(3, &tri, -1)).kind,
            CertificateKind::SignPattern(SignCase::AllNonpositive)
        );
        let square = [(0, 1), (1, 2), (2, 3), (0, 3)];
        assert_eq!(
            check_sign_pattern(&signed(4, &square, 1)).kind,
            CertificateKind::SignPattern(SignCase::BipartitePositive)
        );
        assert_eq!(check_sign_pattern(&signed(3, &tri, 1)).kind, CertificateKind::None);
        let path = SparsityGraph::new(3, vec![((0, 1), 1), ((1, 2), -1)]);
        assert_eq!(
            check_sign_pattern(&path).kind,
            CertificateKind::SignPattern(SignCase::Forest)
        );
        // Mixed signs on a square with an even number of negative edges.
        let g = SparsityGraph::new(4, vec![((0, 1), 1), ((1, 2), -1), ((2, 3), -1), ((0, 3), 1)]);
        assert_eq!(
            check_sign_pattern(&g).kind,
            CertificateKind::SignPattern(SignCase::General)
        );
        let g = SparsityGraph::new(4, vec![((0, 1), 1), ((1, 2), -1), ((2, 3), 1), ((0, 3), 1)]);
        assert_eq!(check_sign_pattern(&g).kind, CertificateKind::None);
    }

    #[test]
    fn linear_terms_enter_the_graph() {
        // Binary knapsack: u_i² - u_i = 0 written as two inequalities,
        // min -u₁ - u₂ s.t. u₁ + u₂ <= 1.5. Relaxation value -1.5, problem value -1.
        let n = 2;
        let lin = |c: [f64; 2]| QuadFunc::from_parts(&SymMatrix::zeros(n), &c).unwrap();
        let sq = |i: usize, s: f64| {
            let mut a = SymMatrix::zeros(n);
            a.set(i, i, s);
            let mut b = [0.0; 2];
            b[i] = -0.5 * s;
            QuadFunc::from_parts(&a, &b).unwrap()
        };
        let q = Qcqp::new(
            lin([-0.5, -0.5]),
            vec![
                (sq(0, 1.0), Relation::Le),
                (sq(0, -1.0), Relation::Le),
                (sq(1, 1.0), Relation::Le),
                (sq(1, -1.0), Relation::Le),
                (lin([0.5, 0.5]), Relation::Le),
            ],
            vec![0.0, 0.0, 0.0, 0.0, 1.5],
        )
        .unwrap();
        // No variable-variable edges at all ...
        let inner: Vec<SymMatrix<f64>> = q.matrices().map(|b| b.submatrix(&[0, 1])).collect();
        let refs: Vec<&SymMatrix<f64>> = inner.iter().collect();
        assert!(aggregated_graph(&refs).unwrap().edges.is_empty());
        // ... but the homogenized graph has mixed signs and is rejected.
        assert_eq!(check_qcqp_sign_pattern(&q).kind, CertificateKind::None);
    }

    #[test]
    fn convex_examples() {
        let sq = QuadFunc::from_parts(&SymMatrix::identity(1), &[0.0]).unwrap();
        let q = Qcqp::new(sq.clone(), vec![(sq.clone(), Relation::Le)], vec![1.0]).unwrap();
        assert_eq!(check_convex(&q).kind, CertificateKind::Convex);

        let q = Qcqp::new(sq.clone(), vec![(sq.clone(), Relation::Eq)], vec![1.0]).unwrap();
        assert_eq!(check_convex(&q).kind, CertificateKind::None);

        let indefinite = QuadFunc::homogeneous(&m2(1.0, -2.0, 0.0));
        let q = Qcqp::new(
            QuadFunc::zero(2),
            vec![(indefinite, Relation::Le)],
            vec![0.0],
        )
        .unwrap();
        assert_eq!(check_convex(&q).kind, CertificateKind::None);

        // Variable-free rows are ignored whatever their relation.
        let q = Qcqp::new(
            sq.clone(),
            vec![(QuadFunc::zero(1), Relation::Eq), (sq, Relation::Le)],
            vec![3.0, 1.0],
        )
        .unwrap();
        assert_eq!(check_convex(&q).kind, CertificateKind::Convex);
    }

    #[test]
    fn extract_convex_examples() {
        let u = [0.5, -2.0];
        assert_eq!(extract_convex_solution(&crate::model::lift(&u)).unwrap(), u.to_vec());
        assert_eq!(
            extract_convex_solution(&SymMatrix::diagonal(&[0.0, 1.0])).unwrap(),
            vec![0.0]
        );
        assert!(matches!(
            extract_convex_solution(&SymMatrix::diagonal(&[0.0, 2.0])),
            Err(Error::Structure(_))
        ));
    }

    fn fake_solution(blocks: Vec<SymMatrix<f64>>, slacks: Vec<f64>) -> SdpSolution<f64> {
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

    #[test]
    fn assumption_trivial_and_m_le_2() {
        let h = HomSepQcqp::new(
            vec![vec![SymMatrix::<f64>::identity(1)], vec![SymMatrix::identity(1)]],
            vec![Relation::Le],
            vec![1.0],
        )
        .unwrap();
        let sol = fake_solution(vec![SymMatrix::zeros(1)], vec![1.0]);
        let rep = check_assumption_a(&h, &sol, 1e-6).unwrap();
        assert!(rep.holds);
        assert_eq!(rep.required, 0);
        assert_eq!(check_m_le_2(&h).kind, CertificateKind::HomLimited);
        assert!(!check_m_le_2(&h).depends_on_solution);

        let h0 = HomSepQcqp::new(vec![vec![SymMatrix::<f64>::identity(1)]], vec![], vec![]).unwrap();
        assert_eq!(check_m_le_2(&h0).kind, CertificateKind::HomLimited);
    }

    #[test]
    fn proportional_rows_keep_the_tighter() {
        let c = SymMatrix::<f64>::identity(1);
        let h = HomSepQcqp::new(
            vec![vec![c.clone()], vec![c.clone()], vec![c.scaled(2.0)], vec![SymMatrix::zeros(1)]],
            vec![Relation::Le, Relation::Le, Relation::Le],
            vec![1.0, 1.0, 0.0],
        )
        .unwrap();
        // Row 2 reads v² <= 0.5, tighter than row 1.
        assert_eq!(essential_rows_at(&h, &[1.0, 1.0, 0.0]), vec![2]);
        // Row 1 is tighter when its rhs drops below rhs₂ / 2.
        assert_eq!(essential_rows_at(&h, &[0.25, 1.0, 0.0]), vec![1]);
    }

    #[test]
    fn pataki_examples() {
        let x = SymMatrix::outer(&[1.0, 1.0]);
        assert!(pataki_bound_holds(&fake_solution(vec![x.clone()], vec![0.0]), 1, 1e-9));
        let sol = fake_solution(
            vec![x.clone(), SymMatrix::outer(&[2.0]), SymMatrix::zeros(2)],
            vec![0.0, 0.0, 0.3, 0.0],
        );
        assert_eq!(pataki_sum(&sol.blocks, &sol.slacks, 1e-9), 3);
        assert!(pataki_bound_holds(&sol, 4, 1e-9));
        let full = fake_solution(vec![SymMatrix::identity(2)], vec![0.0, 0.0]);
        assert_eq!(pataki_sum(&full.blocks, &full.slacks, 1e-9), 3);
        assert!(!pataki_bound_holds(&full, 2, 1e-9));
    }
}
