//! Semidefinite relaxations in block form.
//!
//! Every relaxation is emitted as a [`BlockSdp`]: PSD blocks, one optional
//! nonnegative slack per row, and linear equality rows
//! `Σ_j ⟨A_ij, X_j⟩ + c_i s_i = b_i` with `c_i ∈ {-1, 0, +1}`.

use crate::error::{check_dim, Result};
use crate::model::{lift, HomSepQcqp, Qcqp, Relation, SeparableQcqp, SubQcqp};
use crate::scalar::Real;
use crate::symkernel::SymMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BlockKind {
    /// Homogenized block `((U, u), (uᵀ, 1))` with its corner pinned to one.
    Inhomogeneous,
    /// Purely quadratic block `V ⪰ 0` without normalization.
    Homogeneous,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RowOrigin {
    /// Pins the corner of PSD block `block` to one.
    Normalization { block: usize },
    /// Constraint `k` (1-based) of the source problem.
    Constraint { k: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct SdpRow<T> {
    /// One coefficient matrix per PSD block.
    pub blocks: Vec<SymMatrix<T>>,
    /// Coefficient of this row's slack: `+1` (≤), `-1` (≥) or `0` (=).
    pub slack: i8,
    pub rhs: T,
    pub origin: RowOrigin,
}

impl<T: Real> SdpRow<T> {
    pub fn is_normalization(&self) -> bool {
        matches!(self.origin, RowOrigin::Normalization { .. })
    }

    /// `Σ_j ⟨A_j, X_j⟩` without the slack term.
    pub fn apply(&self, blocks: &[SymMatrix<T>]) -> T {
        self.blocks.iter().zip(blocks).map(|(a, x)| a.dot(x)).sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlockSdp<T> {
    pub block_dims: Vec<usize>,
    pub block_kinds: Vec<BlockKind>,
    /// Index of the sub-QCQP each PSD block came from.
    pub block_owner: Vec<usize>,
    pub objective: Vec<SymMatrix<T>>,
    pub rows: Vec<SdpRow<T>>,
    /// Number of constraints of the source problem.
    pub source_m: usize,
    /// Source constraints dropped as identically zero with zero right-hand side.
    pub dropped: Vec<usize>,
}

impl<T: Real> BlockSdp<T> {
    pub fn num_blocks(&self) -> usize {
        self.block_dims.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn num_slacks(&self) -> usize {
        self.rows.iter().filter(|r| r.slack != 0).count()
    }

    pub fn normalization_rows(&self) -> Vec<usize> {
        (0..self.rows.len())
            .filter(|&i| self.rows[i].is_normalization())
            .collect()
    }

    /// Every slack has coefficient `0` or `+1`.
    pub fn is_standard(&self) -> bool {
        self.rows.iter().all(|r| r.slack >= 0)
    }

    pub fn objective_value(&self, blocks: &[SymMatrix<T>]) -> T {
        self.objective.iter().zip(blocks).map(|(c, x)| c.dot(x)).sum()
    }

    /// `b_i - Σ_j ⟨A_ij, X_j⟩ - c_i s_i` for every row.
    pub fn row_residuals(&self, blocks: &[SymMatrix<T>], slacks: &[T]) -> Result<Vec<T>> {
        check_dim("number of blocks", self.num_blocks(), blocks.len())?;
        check_dim("number of slacks", self.num_rows(), slacks.len())?;
        for (x, &d) in blocks.iter().zip(&self.block_dims) {
            check_dim("block dimension", d, x.dim())?;
        }
        Ok(self
            .rows
            .iter()
            .zip(slacks)
            .map(|(r, &s)| r.rhs - r.apply(blocks) - T::lit(r.slack as f64) * s)
            .collect())
    }

    /// Slack values that make every inequality row tight at `blocks`.
    pub fn implied_slacks(&self, blocks: &[SymMatrix<T>]) -> Vec<T> {
        self.rows
            .iter()
            .map(|r| match r.slack {
                0 => T::zero(),
                c => (r.rhs - r.apply(blocks)) / T::lit(c as f64),
            })
            .collect()
    }
}

fn relation_slack(r: Relation) -> i8 {
    match r {
        Relation::Le => 1,
        Relation::Eq => 0,
        Relation::Ge => -1,
    }
}

fn corner<T: Real>(dim: usize) -> SymMatrix<T> {
    let mut e = SymMatrix::zeros(dim);
    e.set(dim - 1, dim - 1, T::one());
    e
}

/// Block layout shared by the builders.
struct Layout<T> {
    dims: Vec<usize>,
    kinds: Vec<BlockKind>,
    owner: Vec<usize>,
    objective: Vec<SymMatrix<T>>,
    /// `coeffs[k][j]` for constraint `k` (0-based) and PSD block `j`.
    coeffs: Vec<Vec<SymMatrix<T>>>,
}

impl<T: Real> Layout<T> {
    fn new(m: usize) -> Self {
        Self {
            dims: Vec::new(),
            kinds: Vec::new(),
            owner: Vec::new(),
            objective: Vec::new(),
            coeffs: vec![Vec::new(); m],
        }
    }

    fn push_general(&mut self, q: &Qcqp<T>, owner: usize) {
        self.dims.push(q.n() + 1);
        self.kinds.push(BlockKind::Inhomogeneous);
        self.owner.push(owner);
        self.objective.push(q.objective().matrix().clone());
        for (k, row) in self.coeffs.iter_mut().enumerate() {
            row.push(q.constraint(k).matrix().clone());
        }
    }

    fn push_homogeneous(&mut self, h: &HomSepQcqp<T>, owner: usize) {
        for q in 0..h.blocks() {
            self.dims.push(h.dims()[q]);
            self.kinds.push(BlockKind::Homogeneous);
            self.owner.push(owner);
            self.objective.push(h.matrix(0, q).clone());
            for (k, row) in self.coeffs.iter_mut().enumerate() {
                row.push(h.matrix(k + 1, q).clone());
            }
        }
    }

    fn finish(self, relations: &[Relation], rhs: &[T]) -> BlockSdp<T> {
        let mut rows = Vec::new();
        for (j, kind) in self.kinds.iter().enumerate() {
            if *kind == BlockKind::Inhomogeneous {
                let blocks = self
                    .dims
                    .iter()
                    .enumerate()
                    .map(|(i, &d)| if i == j { corner(d) } else { SymMatrix::zeros(d) })
                    .collect();
                rows.push(SdpRow {
                    blocks,
                    slack: 0,
                    rhs: T::one(),
                    origin: RowOrigin::Normalization { block: j },
                });
            }
        }
        let mut dropped = Vec::new();
        for (k, blocks) in self.coeffs.into_iter().enumerate() {
            if rhs[k].is_zero() && blocks.iter().all(|a| a.is_zero()) {
                log::warn!("constraint {} is identically zero with zero rhs; dropped", k + 1);
                dropped.push(k + 1);
                continue;
            }
            rows.push(SdpRow {
                blocks,
                slack: relation_slack(relations[k]),
                rhs: rhs[k],
                origin: RowOrigin::Constraint { k: k + 1 },
            });
        }
        BlockSdp {
            block_dims: self.dims,
            block_kinds: self.kinds,
            block_owner: self.owner,
            objective: self.objective,
            rows,
            source_m: relations.len(),
            dropped,
        }
    }
}

/// Shor relaxation of a single sub-QCQP.
pub fn build_shor<T: Real>(q: &Qcqp<T>) -> BlockSdp<T> {
    let mut layout = Layout::new(q.m());
    layout.push_general(q, 0);
    layout.finish(q.relations(), q.rhs())
}

/// Relaxation of a single sub-QCQP of either kind at its own right-hand side.
pub fn build_sub<T: Real>(sub: &SubQcqp<T>) -> BlockSdp<T> {
    match sub {
        SubQcqp::General(q) => build_shor(q),
        SubQcqp::Homogeneous(h) => build_hom(h),
    }
}

/// Block relaxation of a horizontal connection.
pub fn build_block<T: Real>(s: &SeparableQcqp<T>) -> BlockSdp<T> {
    let mut layout = Layout::new(s.m());
    for (p, sub) in s.blocks().iter().enumerate() {
        match sub {
            SubQcqp::General(q) => layout.push_general(q, p),
            SubQcqp::Homogeneous(h) => layout.push_homogeneous(h, p),
        }
    }
    layout.finish(s.relations(), s.gamma())
}

/// Relaxation of a separable purely quadratic QCQP (no normalization rows).
pub fn build_hom<T: Real>(h: &HomSepQcqp<T>) -> BlockSdp<T> {
    let mut layout = Layout::new(h.m());
    layout.push_homogeneous(h, 0);
    layout.finish(h.relations(), h.rhs())
}

/// Negates every `≥` row so that all slacks enter with coefficient `+1`.
pub fn to_standard_form<T: Real>(b: &BlockSdp<T>) -> BlockSdp<T> {
    let mut out = b.clone();
    for row in out.rows.iter_mut().filter(|r| r.slack < 0) {
        row.blocks = row.blocks.iter().map(|a| a.scaled(-T::one())).collect();
        row.rhs = -row.rhs;
        row.slack = 1;
    }
    out
}

/// Lifts per-block points of a connection into PSD blocks of [`build_block`].
pub fn lift_points<T: Real>(s: &SeparableQcqp<T>, points: &[Vec<T>]) -> Result<Vec<SymMatrix<T>>> {
    check_dim("number of block points", s.blocks().len(), points.len())?;
    let mut out = Vec::new();
    for (sub, u) in s.blocks().iter().zip(points) {
        check_dim("block point", sub.n(), u.len())?;
        match sub {
            SubQcqp::General(_) => out.push(lift(u)),
            SubQcqp::Homogeneous(h) => {
                for v in h.split(u) {
                    out.push(SymMatrix::outer(v));
                }
            }
        }
    }
    Ok(out)
}
