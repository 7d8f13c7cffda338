//! Problem data for sub-QCQPs, their horizontal connections and the purely
//! quadratic separable form.
//!
//! A quadratic function `f : Rⁿ → R` with `f(0) = 0` is stored through its
//! homogenized matrix `B ∈ Sⁿ⁺¹` so that `f(u) = (u;1)ᵀ B (u;1)`; the corner
//! entry of `B` is zero.

use std::fmt;

use crate::error::{check_dim, Error, Result};
use crate::scalar::Real;
use crate::symkernel::SymMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

impl Relation {
    /// Whether `lhs ⊴ rhs` holds up to an absolute tolerance.
    pub fn holds<T: Real>(self, lhs: T, rhs: T, tol: T) -> bool {
        match self {
            Relation::Le => lhs <= rhs + tol,
            Relation::Eq => (lhs - rhs).abs() <= tol,
            Relation::Ge => lhs >= rhs - tol,
        }
    }

    /// Signed violation of `lhs ⊴ rhs` (zero when satisfied).
    pub fn violation<T: Real>(self, lhs: T, rhs: T) -> T {
        match self {
            Relation::Le => (lhs - rhs).max(T::zero()),
            Relation::Eq => (lhs - rhs).abs(),
            Relation::Ge => (rhs - lhs).max(T::zero()),
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
        }
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// Quadratic function with `f(0) = 0` in homogenized form.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadFunc<T> {
    b: SymMatrix<T>,
}

impl<T: Real> QuadFunc<T> {
    /// Wraps a homogenized matrix of size `n + 1`; the corner entry must be zero.
    pub fn new(b: SymMatrix<T>) -> Result<Self> {
        let d = b.dim();
        if d == 0 {
            return Err(Error::Structure(
                "homogenized matrix needs at least the corner entry".into(),
            ));
        }
        if !b.get(d - 1, d - 1).is_zero() {
            return Err(Error::Structure(format!(
                "corner entry [B]_{{{d},{d}}} must be 0 (f(0) = 0)"
            )));
        }
        Ok(Self { b })
    }

    pub fn zero(n: usize) -> Self {
        Self {
            b: SymMatrix::zeros(n + 1),
        }
    }

    /// `uᵀ A u + 2 bᵀ u` from its quadratic part `A` (n × n) and linear vector `b`.
    pub fn from_parts(quadratic: &SymMatrix<T>, linear: &[T]) -> Result<Self> {
        let n = quadratic.dim();
        check_dim("linear term", n, linear.len())?;
        let mut b = quadratic.embed(n + 1);
        for (i, &l) in linear.iter().enumerate() {
            b.set(i, n, l);
        }
        Ok(Self { b })
    }

    /// Purely quadratic function `vᵀ C v` embedded with a zero border.
    pub fn homogeneous(c: &SymMatrix<T>) -> Self {
        Self {
            b: c.embed(c.dim() + 1),
        }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.b.dim() - 1
    }

    #[inline]
    pub fn matrix(&self) -> &SymMatrix<T> {
        &self.b
    }

    /// The n × n quadratic part (homogenization row and column dropped).
    pub fn quadratic_part(&self) -> SymMatrix<T> {
        let n = self.n();
        SymMatrix::from_fn(n, |i, j| self.b.get(i, j))
    }

    /// Half the gradient at the origin, i.e. the last column of `B` without the corner.
    pub fn linear_part(&self) -> Vec<T> {
        let n = self.n();
        (0..n).map(|i| self.b.get(i, n)).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.b.is_zero()
    }

    pub fn eval(&self, u: &[T]) -> Result<T> {
        check_dim("quadratic function argument", self.n(), u.len())?;
        Ok(self.eval_unchecked(u))
    }

    pub(crate) fn eval_unchecked(&self, u: &[T]) -> T {
        let n = self.n();
        let mut acc = T::zero();
        let two = T::lit(2.0);
        for i in 0..n {
            acc += self.b.get(i, i) * u[i] * u[i];
            for j in (i + 1)..n {
                acc += two * self.b.get(i, j) * u[i] * u[j];
            }
            acc += two * self.b.get(i, n) * u[i];
        }
        acc
    }
}

/// `((u uᵀ, u), (uᵀ, 1))`.
pub fn lift<T: Real>(u: &[T]) -> SymMatrix<T> {
    let n = u.len();
    SymMatrix::from_fn(n + 1, |i, j| {
        let a = if i < n { u[i] } else { T::one() };
        let b = if j < n { u[j] } else { T::one() };
        a * b
    })
}

/// `min f₀(u)  s.t.  f_k(u) ⊴_k δ_k  (k = 1..m)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Qcqp<T> {
    n: usize,
    objective: QuadFunc<T>,
    constraints: Vec<QuadFunc<T>>,
    relations: Vec<Relation>,
    rhs: Vec<T>,
}

impl<T: Real> Qcqp<T> {
    pub fn new(
        objective: QuadFunc<T>,
        constraints: Vec<(QuadFunc<T>, Relation)>,
        rhs: Vec<T>,
    ) -> Result<Self> {
        let n = objective.n();
        check_dim("right-hand side", constraints.len(), rhs.len())?;
        for (f, _) in &constraints {
            check_dim("constraint dimension", n, f.n())?;
        }
        if rhs.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("right-hand side"));
        }
        let (constraints, relations) = constraints.into_iter().unzip();
        Ok(Self {
            n,
            objective,
            constraints,
            relations,
            rhs,
        })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn m(&self) -> usize {
        self.constraints.len()
    }

    pub fn objective(&self) -> &QuadFunc<T> {
        &self.objective
    }

    pub fn constraint(&self, k: usize) -> &QuadFunc<T> {
        &self.constraints[k]
    }

    pub fn constraints(&self) -> &[QuadFunc<T>] {
        &self.constraints
    }

    pub fn relations(&self) -> &[Relation] {
        &self.relations
    }

    pub fn rhs(&self) -> &[T] {
        &self.rhs
    }

    pub fn with_rhs(&self, rhs: Vec<T>) -> Result<Self> {
        check_dim("right-hand side", self.m(), rhs.len())?;
        Ok(Self {
            rhs,
            ..self.clone()
        })
    }

    /// Objective and constraint matrices `B₀, B₁, …, B_m`.
    pub fn matrices(&self) -> impl Iterator<Item = &SymMatrix<T>> {
        std::iter::once(self.objective.matrix()).chain(self.constraints.iter().map(|f| f.matrix()))
    }

    pub fn eval_objective(&self, u: &[T]) -> Result<T> {
        self.objective.eval(u)
    }

    /// Largest constraint violation at `u`.
    pub fn max_violation(&self, u: &[T]) -> Result<T> {
        check_dim("qcqp point", self.n, u.len())?;
        Ok(self
            .constraints
            .iter()
            .zip(&self.relations)
            .zip(&self.rhs)
            .map(|((f, r), &d)| r.violation(f.eval_unchecked(u), d))
            .fold(T::zero(), T::max))
    }

    pub fn is_feasible(&self, u: &[T], tol: T) -> Result<bool> {
        check_dim("qcqp point", self.n, u.len())?;
        Ok(self
            .constraints
            .iter()
            .zip(&self.relations)
            .zip(&self.rhs)
            .all(|((f, r), &d)| r.holds(f.eval_unchecked(u), d, tol)))
    }

    /// Appends identically-zero constraints with the given relations.
    pub(crate) fn padded(&self, relations: &[Relation]) -> Self {
        let mut out = self.clone();
        for &r in &relations[self.m()..] {
            out.constraints.push(QuadFunc::zero(self.n));
            out.relations.push(r);
            out.rhs.push(T::zero());
        }
        out
    }
}

/// `min Σ_q ⟨C⁰_q, v_q v_qᵀ⟩  s.t.  Σ_q ⟨Cᵏ_q, v_q v_qᵀ⟩ ⊴_k δ_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct HomSepQcqp<T> {
    dims: Vec<usize>,
    /// `matrices[k][q]` for `k = 0..=m` (row 0 is the objective).
    matrices: Vec<Vec<SymMatrix<T>>>,
    relations: Vec<Relation>,
    rhs: Vec<T>,
}

impl<T: Real> HomSepQcqp<T> {
    /// `matrices[k][q]` holds `C^q_k`, with `k = 0` the objective.
    pub fn new(
        matrices: Vec<Vec<SymMatrix<T>>>,
        relations: Vec<Relation>,
        rhs: Vec<T>,
    ) -> Result<Self> {
        if matrices.is_empty() {
            return Err(Error::Structure("objective row missing".into()));
        }
        check_dim("relations", matrices.len() - 1, relations.len())?;
        check_dim("right-hand side", relations.len(), rhs.len())?;
        let dims: Vec<usize> = matrices[0].iter().map(|c| c.dim()).collect();
        if dims.is_empty() {
            return Err(Error::Structure("need at least one block".into()));
        }
        for row in &matrices {
            check_dim("number of blocks", dims.len(), row.len())?;
            for (c, &d) in row.iter().zip(&dims) {
                check_dim("block dimension", d, c.dim())?;
            }
        }
        if rhs.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("right-hand side"));
        }
        Ok(Self {
            dims,
            matrices,
            relations,
            rhs,
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// Number of blocks `q̂`.
    pub fn blocks(&self) -> usize {
        self.dims.len()
    }

    pub fn m(&self) -> usize {
        self.relations.len()
    }

    pub fn total_dim(&self) -> usize {
        self.dims.iter().sum()
    }

    /// `C^q_k`, with `k = 0` the objective.
    pub fn matrix(&self, k: usize, q: usize) -> &SymMatrix<T> {
        &self.matrices[k][q]
    }

    pub fn row(&self, k: usize) -> &[SymMatrix<T>] {
        &self.matrices[k]
    }

    pub fn relations(&self) -> &[Relation] {
        &self.relations
    }

    pub fn rhs(&self) -> &[T] {
        &self.rhs
    }

    pub fn with_rhs(&self, rhs: Vec<T>) -> Result<Self> {
        check_dim("right-hand side", self.m(), rhs.len())?;
        Ok(Self {
            rhs,
            ..self.clone()
        })
    }

    /// Whether row `k` (1-based constraint index, 0 = objective) is identically zero.
    pub fn row_is_zero(&self, k: usize) -> bool {
        self.matrices[k].iter().all(|c| c.is_zero())
    }

    /// Splits a concatenated point into per-block vectors.
    pub fn split<'a>(&self, v: &'a [T]) -> Vec<&'a [T]> {
        let mut out = Vec::with_capacity(self.dims.len());
        let mut off = 0;
        for &d in &self.dims {
            out.push(&v[off..off + d]);
            off += d;
        }
        out
    }

    pub fn eval_row(&self, k: usize, v: &[T]) -> Result<T> {
        check_dim("homogeneous point", self.total_dim(), v.len())?;
        Ok(self
            .split(v)
            .into_iter()
            .zip(&self.matrices[k])
            .map(|(vq, c)| c.quad_form(vq))
            .sum())
    }

    /// The block-diagonal purely quadratic sub-QCQP over all blocks at once.
    pub fn to_qcqp(&self) -> Qcqp<T> {
        let n = self.total_dim();
        let make = |row: &[SymMatrix<T>]| {
            let mut b = SymMatrix::zeros(n + 1);
            let mut off = 0;
            for c in row {
                for i in 0..c.dim() {
                    for j in i..c.dim() {
                        b.set(off + i, off + j, c.get(i, j));
                    }
                }
                off += c.dim();
            }
            QuadFunc { b }
        };
        Qcqp {
            n,
            objective: make(&self.matrices[0]),
            constraints: self.matrices[1..].iter().map(|r| make(r)).collect(),
            relations: self.relations.clone(),
            rhs: self.rhs.clone(),
        }
    }

    pub(crate) fn padded(&self, relations: &[Relation]) -> Self {
        let mut out = self.clone();
        for &r in &relations[self.m()..] {
            out.matrices
                .push(self.dims.iter().map(|&d| SymMatrix::zeros(d)).collect());
            out.relations.push(r);
            out.rhs.push(T::zero());
        }
        out
    }
}

/// One block of a horizontal connection.
#[derive(Clone, Debug, PartialEq)]
pub enum SubQcqp<T> {
    /// Inhomogeneous sub-QCQP, relaxed with one normalized PSD block.
    General(Qcqp<T>),
    /// Separable purely quadratic sub-QCQP, relaxed with one PSD block per part.
    Homogeneous(HomSepQcqp<T>),
}

impl<T: Real> SubQcqp<T> {
    pub fn m(&self) -> usize {
        match self {
            SubQcqp::General(q) => q.m(),
            SubQcqp::Homogeneous(h) => h.m(),
        }
    }

    pub fn relations(&self) -> &[Relation] {
        match self {
            SubQcqp::General(q) => q.relations(),
            SubQcqp::Homogeneous(h) => h.relations(),
        }
    }

    /// Number of decision variables.
    pub fn n(&self) -> usize {
        match self {
            SubQcqp::General(q) => q.n(),
            SubQcqp::Homogeneous(h) => h.total_dim(),
        }
    }

    /// Flat sub-QCQP in homogenized form.
    pub fn as_qcqp(&self) -> Qcqp<T> {
        match self {
            SubQcqp::General(q) => q.clone(),
            SubQcqp::Homogeneous(h) => h.to_qcqp(),
        }
    }

    /// Whether constraint `k` (1-based) is identically zero in this block.
    pub fn row_is_zero(&self, k: usize) -> bool {
        match self {
            SubQcqp::General(q) => q.constraint(k - 1).is_zero(),
            SubQcqp::Homogeneous(h) => h.row_is_zero(k),
        }
    }

    pub fn with_rhs(&self, rhs: Vec<T>) -> Result<Self> {
        Ok(match self {
            SubQcqp::General(q) => SubQcqp::General(q.with_rhs(rhs)?),
            SubQcqp::Homogeneous(h) => SubQcqp::Homogeneous(h.with_rhs(rhs)?),
        })
    }

    /// Value of constraint `k` (0 = objective) at a block point.
    pub fn eval_row(&self, k: usize, u: &[T]) -> Result<T> {
        match self {
            SubQcqp::General(q) => {
                if k == 0 {
                    q.objective().eval(u)
                } else {
                    q.constraint(k - 1).eval(u)
                }
            }
            SubQcqp::Homogeneous(h) => h.eval_row(k, u),
        }
    }

    fn padded(&self, relations: &[Relation]) -> Self {
        match self {
            SubQcqp::General(q) => SubQcqp::General(q.padded(relations)),
            SubQcqp::Homogeneous(h) => SubQcqp::Homogeneous(h.padded(relations)),
        }
    }

    fn set_relation(&mut self, k: usize, r: Relation) {
        match self {
            SubQcqp::General(q) => q.relations[k] = r,
            SubQcqp::Homogeneous(h) => h.relations[k] = r,
        }
    }
}

impl<T> From<Qcqp<T>> for SubQcqp<T> {
    fn from(q: Qcqp<T>) -> Self {
        SubQcqp::General(q)
    }
}

impl<T> From<HomSepQcqp<T>> for SubQcqp<T> {
    fn from(h: HomSepQcqp<T>) -> Self {
        SubQcqp::Homogeneous(h)
    }
}

/// Horizontal connection: blockwise sums of objectives and constraints against a shared `γ`.
#[derive(Clone, Debug, PartialEq)]
pub struct SeparableQcqp<T> {
    blocks: Vec<SubQcqp<T>>,
    relations: Vec<Relation>,
    gamma: Vec<T>,
}

impl<T: Real> SeparableQcqp<T> {
    pub fn blocks(&self) -> &[SubQcqp<T>] {
        &self.blocks
    }

    pub fn block(&self, p: usize) -> &SubQcqp<T> {
        &self.blocks[p]
    }

    pub fn relations(&self) -> &[Relation] {
        &self.relations
    }

    pub fn gamma(&self) -> &[T] {
        &self.gamma
    }

    pub fn m(&self) -> usize {
        self.relations.len()
    }

    pub fn with_gamma(&self, gamma: Vec<T>) -> Result<Self> {
        check_dim("gamma", self.m(), gamma.len())?;
        Ok(Self {
            gamma,
            ..self.clone()
        })
    }

    pub fn n(&self) -> usize {
        self.blocks.iter().map(|b| b.n()).sum()
    }

    /// Value of row `k` (0 = objective) summed over blocks.
    pub fn eval_row(&self, k: usize, points: &[Vec<T>]) -> Result<T> {
        check_dim("number of block points", self.blocks.len(), points.len())?;
        self.blocks
            .iter()
            .zip(points)
            .map(|(b, u)| b.eval_row(k, u))
            .sum()
    }

    pub fn eval_objective(&self, points: &[Vec<T>]) -> Result<T> {
        self.eval_row(0, points)
    }

    pub fn max_violation(&self, points: &[Vec<T>]) -> Result<T> {
        let mut worst = T::zero();
        for k in 1..=self.m() {
            let v = self.eval_row(k, points)?;
            worst = worst.max(self.relations[k - 1].violation(v, self.gamma[k - 1]));
        }
        Ok(worst)
    }

    pub fn is_feasible(&self, points: &[Vec<T>], tol: T) -> Result<bool> {
        for k in 1..=self.m() {
            let v = self.eval_row(k, points)?;
            if !self.relations[k - 1].holds(v, self.gamma[k - 1], tol) {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// All blocks flattened into one QCQP over the concatenated variables.
    pub fn flatten(&self) -> Qcqp<T> {
        let n = self.n();
        let flats: Vec<Qcqp<T>> = self.blocks.iter().map(|b| b.as_qcqp()).collect();
        let make = |k: usize| {
            let mut b = SymMatrix::zeros(n + 1);
            let mut off = 0;
            for q in &flats {
                let f = if k == 0 {
                    q.objective()
                } else {
                    q.constraint(k - 1)
                };
                let bp = f.matrix();
                let np = q.n();
                for i in 0..np {
                    for j in i..np {
                        b.set(off + i, off + j, bp.get(i, j));
                    }
                    b.set(off + i, n, bp.get(i, np));
                }
                off += np;
            }
            QuadFunc { b }
        };
        Qcqp {
            n,
            objective: make(0),
            constraints: (1..=self.m()).map(make).collect(),
            relations: self.relations.clone(),
            rhs: self.gamma.clone(),
        }
    }

    /// Splits a concatenated point into per-block points.
    pub fn split(&self, u: &[T]) -> Vec<Vec<T>> {
        let mut out = Vec::with_capacity(self.blocks.len());
        let mut off = 0;
        for b in &self.blocks {
            out.push(u[off..off + b.n()].to_vec());
            off += b.n();
        }
        out
    }
}

/// Horizontally connects sub-QCQPs through a shared right-hand side `γ`.
///
/// Shorter constraint lists are padded with identically-zero constraints. Two
/// blocks may disagree on the relation of a row only where one of them is
/// identically zero there.
pub fn connect<T: Real>(subs: Vec<SubQcqp<T>>, gamma: Vec<T>) -> Result<SeparableQcqp<T>> {
    if subs.is_empty() {
        return Err(Error::Structure("a connection needs at least one block".into()));
    }
    let m = subs.iter().map(|s| s.m()).max().unwrap_or(0);
    check_dim("gamma", m, gamma.len())?;
    if gamma.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("gamma"));
    }
    let mut relations: Vec<Option<Relation>> = vec![None; m];
    for (p, s) in subs.iter().enumerate() {
        for (k, &r) in s.relations().iter().enumerate() {
            if s.row_is_zero(k + 1) {
                continue;
            }
            match relations[k] {
                None => relations[k] = Some(r),
                Some(prev) if prev == r => {}
                Some(prev) => {
                    return Err(Error::Structure(format!(
                        "constraint {} has relation {prev} in an earlier block but {r} in block {}",
                        k + 1,
                        p + 1
                    )))
                }
            }
        }
    }
    // Rows that are zero everywhere keep the relation of the first block defining them.
    for (k, slot) in relations.iter_mut().enumerate() {
        if slot.is_none() {
            *slot = subs
                .iter()
                .find(|s| s.m() > k)
                .map(|s| s.relations()[k])
                .or(Some(Relation::Le));
        }
    }
    let relations: Vec<Relation> = relations.into_iter().map(|r| r.unwrap()).collect();
    let blocks = subs
        .into_iter()
        .map(|s| {
            let mut s = s.padded(&relations);
            for (k, &r) in relations.iter().enumerate() {
                s.set_relation(k, r);
            }
            s
        })
        .collect();
    Ok(SeparableQcqp {
        blocks,
        relations,
        gamma,
    })
}

/// Every homogeneous block becomes a general block with a zero homogenization border.
pub fn hom_to_qcqp<T: Real>(h: &HomSepQcqp<T>) -> SeparableQcqp<T> {
    let blocks = (0..h.blocks())
        .map(|q| {
            let objective = QuadFunc::homogeneous(h.matrix(0, q));
            let constraints = (1..=h.m())
                .map(|k| QuadFunc::homogeneous(h.matrix(k, q)))
                .collect();
            SubQcqp::General(Qcqp {
                n: h.dims()[q],
                objective,
                constraints,
                relations: h.relations().to_vec(),
                rhs: h.rhs().to_vec(),
            })
        })
        .collect();
    SeparableQcqp {
        blocks,
        relations: h.relations().to_vec(),
        gamma: h.rhs().to_vec(),
    }
}

/// Per-coordinate search box.
#[derive(Clone, Debug, PartialEq)]
pub struct SearchBox<T> {
    pub lower: Vec<T>,
    pub upper: Vec<T>,
}

impl<T: Real> SearchBox<T> {
    pub fn cube(n: usize, half_width: T) -> Self {
        Self {
            lower: vec![-half_width; n],
            upper: vec![half_width; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }
}

/// Result of the grid oracle; `value` is `+∞` when no feasible grid point was found.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleResult<T> {
    pub value: T,
    pub point: Option<Vec<T>>,
}

impl<T: Real> OracleResult<T> {
    pub fn is_feasible(&self) -> bool {
        self.point.is_some()
    }
}

/// Default refinement rounds for [`brute_force`].
pub const DEFAULT_REFINE_ROUNDS: usize = 4;

const ORACLE_FEAS_TOL: f64 = 1e-9;
const ORACLE_CANDIDATES: usize = 4;

/// Grid search with successive refinement around the best candidates.
///
/// Each round evaluates a `grid_points`-per-axis grid over the current box,
/// then halves the box width around every retained incumbent. Intended only
/// as an independent oracle for small problems (`n ≤ 4`).
pub fn brute_force<T: Real>(
    q: &Qcqp<T>,
    bounds: &SearchBox<T>,
    grid_points: usize,
    refine_rounds: usize,
) -> Result<OracleResult<T>> {
    let n = q.n();
    check_dim("search box", n, bounds.dim())?;
    if n > 4 {
        return Err(Error::Range(format!("brute force limited to n <= 4, got {n}")));
    }
    if grid_points < 11 {
        return Err(Error::Range(format!("need at least 11 grid points, got {grid_points}")));
    }
    let tol = T::lit(ORACLE_FEAS_TOL);
    let g = grid_points;

    let scan = |lo: &[T], hi: &[T], keep: usize| -> Vec<(T, Vec<T>)> {
        let mut best: Vec<(T, Vec<T>)> = Vec::new();
        let total = g.pow(n as u32);
        let mut u = vec![T::zero(); n];
        for idx in 0..total {
            let mut r = idx;
            for i in 0..n {
                let t = T::of_usize(r % g) / T::of_usize(g - 1);
                r /= g;
                u[i] = lo[i] + (hi[i] - lo[i]) * t;
            }
            let feasible = q
                .constraints
                .iter()
                .zip(&q.relations)
                .zip(&q.rhs)
                .all(|((f, rel), &d)| rel.holds(f.eval_unchecked(&u), d, tol));
            if !feasible {
                continue;
            }
            let v = q.objective.eval_unchecked(&u);
            if best.len() < keep || v < best[best.len() - 1].0 {
                let pos = best.partition_point(|(b, _)| *b <= v);
                best.insert(pos, (v, u.clone()));
                best.truncate(keep);
            }
        }
        best
    };

    if n == 0 {
        let ok = q.is_feasible(&[], tol)?;
        return Ok(if ok {
            OracleResult {
                value: q.objective.eval_unchecked(&[]),
                point: Some(vec![]),
            }
        } else {
            OracleResult {
                value: T::infinity(),
                point: None,
            }
        });
    }

    let mut incumbents = scan(&bounds.lower, &bounds.upper, ORACLE_CANDIDATES);
    let mut half: Vec<T> = bounds
        .lower
        .iter()
        .zip(&bounds.upper)
        .map(|(&l, &h)| (h - l) * T::lit(0.5))
        .collect();
    for _ in 0..refine_rounds {
        if incumbents.is_empty() {
            break;
        }
        for h in half.iter_mut() {
            *h *= T::lit(0.5);
        }
        let mut next: Vec<(T, Vec<T>)> = Vec::new();
        for (_, c) in &incumbents {
            let lo: Vec<T> = c.iter().zip(&half).map(|(&x, &h)| x - h).collect();
            let hi: Vec<T> = c.iter().zip(&half).map(|(&x, &h)| x + h).collect();
            next.extend(scan(&lo, &hi, ORACLE_CANDIDATES));
        }
        next.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
        next.dedup_by(|a, b| a.1 == b.1);
        next.truncate(ORACLE_CANDIDATES);
        incumbents = next;
    }
    Ok(match incumbents.into_iter().next() {
        Some((value, point)) => OracleResult {
            value,
            point: Some(point),
        },
        None => OracleResult {
            value: T::infinity(),
            point: None,
        },
    })
}
