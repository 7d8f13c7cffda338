//! Primal-dual interior-point method for [`BlockSdp`] problems.
//!
//! Path-following with the HKM search direction and Mehrotra
//! predictor-corrector steps from an infeasible start. Dense throughout;
//! meant for block dimensions and row counts in the tens.

use crate::error::{check_dim, Error, Result};
use crate::scalar::Real;
use crate::sdpr::{to_standard_form, BlockSdp};
use crate::symkernel::{default_eigen_tol, eigen, Dense, SymMatrix};

/// Iterates larger than this are taken as evidence of unboundedness or infeasibility.
pub const DIVERGENCE_CAP: f64 = 1e10;

const BACKTRACK_LIMIT: usize = 30;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions<T> {
    pub tol: T,
    pub max_iter: usize,
    pub initial_scale: T,
    pub step_fraction: T,
}

impl<T: Real> Default for SolverOptions<T> {
    fn default() -> Self {
        Self {
            tol: T::lit(1e-8),
            max_iter: 200,
            initial_scale: T::lit(10.0),
            step_fraction: T::lit(0.98),
        }
    }
}

impl<T: Real> SolverOptions<T> {
    pub fn with_tol(mut self, tol: T) -> Self {
        self.tol = tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > T::zero()) {
            return Err(Error::Range(format!("tol must be positive, got {}", self.tol)));
        }
        if !(self.step_fraction > T::zero() && self.step_fraction < T::one()) {
            return Err(Error::Range(format!(
                "step_fraction must lie in (0, 1), got {}",
                self.step_fraction
            )));
        }
        if !(self.initial_scale > T::zero()) {
            return Err(Error::Range("initial_scale must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    MaxIter,
    Diverged,
    NumericalFailure,
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::MaxIter => "max-iter",
            SolveStatus::Diverged => "diverged",
            SolveStatus::NumericalFailure => "numerical-failure",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug)]
pub struct SdpSolution<T> {
    pub blocks: Vec<SymMatrix<T>>,
    /// One entry per row; zero on rows without a slack.
    pub slacks: Vec<T>,
    /// Multipliers of the rows as given to [`solve`].
    pub dual_multipliers: Vec<T>,
    pub dual_blocks: Vec<SymMatrix<T>>,
    pub status: SolveStatus,
    /// Primal objective value.
    pub value: T,
    pub dual_value: T,
    pub iterations: usize,
    pub primal_residual: T,
    pub dual_residual: T,
    pub gap: T,
    /// Total complementarity `Σ⟨X, Z⟩ + sᵀz` after each accepted step.
    pub gap_history: Vec<T>,
}

impl<T: Real> SdpSolution<T> {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }

    /// Fails with [`Error::NotOptimal`] unless the solve converged.
    pub fn require_optimal(self) -> Result<Self> {
        if self.is_optimal() {
            Ok(self)
        } else {
            Err(Error::NotOptimal(self.status))
        }
    }
}

#[derive(Clone, Debug)]
pub struct ResidualReport<T> {
    /// `b_i - Σ_j⟨A_ij, X_j⟩ - c_i s_i` per row.
    pub row_residuals: Vec<T>,
    pub max_row_residual: T,
    pub block_min_eigenvalues: Vec<T>,
    pub min_slack: T,
    pub primal_value: T,
    pub dual_value: T,
    pub gap: T,
    pub dual_residual: T,
    /// Every quantity above is within the tolerance passed to [`check_solution`].
    pub within_tol: bool,
}

impl<T: Real> ResidualReport<T> {
    pub fn passes(&self, tol: T) -> bool {
        self.max_row_residual <= tol
            && self.block_min_eigenvalues.iter().all(|&e| e >= -tol)
            && self.min_slack >= -tol
            && self.gap <= tol
            && self.dual_residual <= tol
    }
}

fn rel_gap<T: Real>(p: T, d: T) -> T {
    (p - d).abs() / (T::one() + p.abs() + d.abs())
}

/// Dual slack blocks `C_j - Σ_i y_i A_ij` and row slacks `-c_i y_i`.
fn dual_slacks<T: Real>(b: &BlockSdp<T>, y: &[T]) -> (Vec<SymMatrix<T>>, Vec<T>) {
    let mut z: Vec<SymMatrix<T>> = b.objective.clone();
    for (row, &yi) in b.rows.iter().zip(y) {
        if yi.is_zero() {
            continue;
        }
        for (zj, a) in z.iter_mut().zip(&row.blocks) {
            if !a.is_zero() {
                *zj = zj.axpy(-yi, a);
            }
        }
    }
    let zs = b
        .rows
        .iter()
        .zip(y)
        .map(|(r, &yi)| -T::lit(r.slack as f64) * yi)
        .collect();
    (z, zs)
}

/// Independent verification of a candidate primal-dual pair.
pub fn check_solution<T: Real>(b: &BlockSdp<T>, sol: &SdpSolution<T>, tol: T) -> Result<ResidualReport<T>> {
    check_dim("dual multipliers", b.num_rows(), sol.dual_multipliers.len())?;
    let row_residuals = b.row_residuals(&sol.blocks, &sol.slacks)?;
    let max_row_residual = row_residuals.iter().fold(T::zero(), |m, r| m.max(r.abs()));
    let block_min_eigenvalues = sol
        .blocks
        .iter()
        .map(|x| eigen(x, default_eigen_tol(x.dim())).map(|e| e.min()))
        .collect::<Result<Vec<_>>>()?;
    let min_slack = b
        .rows
        .iter()
        .zip(&sol.slacks)
        .filter(|(r, _)| r.slack != 0)
        .fold(T::infinity(), |m, (_, &s)| m.min(s));
    let min_slack = if min_slack.is_infinite() { T::zero() } else { min_slack };
    let primal_value = b.objective_value(&sol.blocks);
    let dual_value: T = b.rows.iter().zip(&sol.dual_multipliers).map(|(r, &y)| r.rhs * y).sum();
    let (z, zs) = dual_slacks(b, &sol.dual_multipliers);
    let mut dual_residual = T::zero();
    for zj in &z {
        if zj.dim() > 0 {
            let e = eigen(zj, default_eigen_tol(zj.dim()))?;
            dual_residual = dual_residual.max(-e.min());
        }
    }
    for s in zs {
        dual_residual = dual_residual.max(-s);
    }
    let mut rep = ResidualReport {
        row_residuals,
        max_row_residual,
        block_min_eigenvalues,
        min_slack,
        primal_value,
        dual_value,
        gap: rel_gap(primal_value, dual_value),
        dual_residual,
        within_tol: false,
    };
    rep.within_tol = rep.passes(tol);
    Ok(rep)
}

/// Rows kept after structural preprocessing, in standard form.
struct Reduced<T> {
    active: Vec<usize>,
    /// Slack values of rows fixed by preprocessing.
    fixed_slack: Vec<(usize, T)>,
}

fn weighted_vector<T: Real>(blocks: &[SymMatrix<T>]) -> Vec<T> {
    let two = T::lit(2.0);
    let mut v = Vec::new();
    for a in blocks {
        let n = a.dim();
        let mut k = 0;
        for i in 0..n {
            for j in i..n {
                let w = if i == j { T::one() } else { two };
                v.push(w * a.packed()[k]);
                k += 1;
            }
        }
    }
    v
}

fn dotv<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

/// Removes linearly dependent equality rows and rows whose slack is forced.
fn preprocess<T: Real>(b: &BlockSdp<T>) -> Result<Reduced<T>> {
    let dep_tol = T::lit(1e-10);
    let mut active = Vec::new();
    let mut fixed_slack = Vec::new();
    // Orthonormal basis of retained equality rows and its expansion in those rows.
    let mut basis: Vec<Vec<T>> = Vec::new();
    let mut expansion: Vec<Vec<T>> = Vec::new();
    let mut kept_eq: Vec<usize> = Vec::new();
    for (i, row) in b.rows.iter().enumerate() {
        let all_zero = row.blocks.iter().all(|a| a.is_zero());
        if row.slack != 0 {
            if all_zero {
                // 0 + s = rhs.
                if row.rhs < T::zero() {
                    return Err(Error::InfeasibleStructure(format!(
                        "row {i} forces a negative slack {}",
                        row.rhs
                    )));
                }
                fixed_slack.push((i, row.rhs));
            } else {
                active.push(i);
            }
            continue;
        }
        let v = weighted_vector(&row.blocks);
        let norm = dotv(&v, &v).sqrt();
        let mut r = v.clone();
        let mut coef = vec![T::zero(); basis.len()];
        for _ in 0..2 {
            for (t, q) in basis.iter().enumerate() {
                let c = dotv(q, &r);
                coef[t] += c;
                for (x, &qx) in r.iter_mut().zip(q) {
                    *x -= c * qx;
                }
            }
        }
        let rnorm = dotv(&r, &r).sqrt();
        if rnorm <= dep_tol * norm || norm.is_zero() {
            // v = Σ_t coef_t q_t = Σ_s (Σ_t coef_t E_ts) r_s.
            let mut predicted = T::zero();
            let mut scale = row.rhs.abs();
            for (s, &ks) in kept_eq.iter().enumerate() {
                let w: T = (0..basis.len()).map(|t| coef[t] * expansion[t][s]).sum();
                predicted += w * b.rows[ks].rhs;
                scale += (w * b.rows[ks].rhs).abs();
            }
            if (predicted - row.rhs).abs() > T::lit(1e-8) * (T::one() + scale) {
                return Err(Error::InfeasibleStructure(format!(
                    "equality row {i} contradicts the rows it depends on"
                )));
            }
            log::debug!("dropping dependent equality row {i}");
            continue;
        }
        // New basis vector q = (v - Σ coef_t q_t) / rnorm.
        let mut e = vec![T::zero(); kept_eq.len() + 1];
        for t in 0..basis.len() {
            for s in 0..kept_eq.len() {
                e[s] -= coef[t] * expansion[t][s];
            }
        }
        e[kept_eq.len()] = T::one();
        for x in e.iter_mut() {
            *x /= rnorm;
        }
        for ex in expansion.iter_mut() {
            ex.push(T::zero());
        }
        expansion.push(e);
        basis.push(r.into_iter().map(|x| x / rnorm).collect());
        kept_eq.push(i);
        active.push(i);
    }
    active.sort_unstable();
    Ok(Reduced { active, fixed_slack })
}

struct Iterate<T> {
    x: Vec<SymMatrix<T>>,
    z: Vec<SymMatrix<T>>,
    y: Vec<T>,
    s: Vec<T>,
    zs: Vec<T>,
}

/// Minimal step `α` with `X + α dX` on the boundary of the PSD cone.
fn max_step_psd<T: Real>(x: &SymMatrix<T>, dx: &SymMatrix<T>) -> Option<T> {
    let l = x.to_dense().cholesky()?;
    let li = l.lower_inverse();
    let w = li.matmul(&dx.to_dense()).matmul(&li.transpose()).symmetrize();
    let e = eigen(&w, default_eigen_tol(w.dim())).ok()?;
    let lmin = e.min();
    Some(if lmin < T::zero() { -T::one() / lmin } else { T::infinity() })
}

fn max_step_lp<T: Real>(s: &[T], ds: &[T]) -> T {
    s.iter()
        .zip(ds)
        .filter(|(_, &d)| d < T::zero())
        .fold(T::infinity(), |m, (&v, &d)| m.min(-v / d))
}

fn inverse_spd<T: Real>(a: &SymMatrix<T>) -> Option<Dense<T>> {
    let l = a.to_dense().cholesky()?;
    let li = l.lower_inverse();
    Some(li.transpose().matmul(&li))
}

/// Solves the relaxation; rows with slack coefficient `-1` are handled by negation.
pub fn solve<T: Real>(b: &BlockSdp<T>, opts: &SolverOptions<T>) -> Result<SdpSolution<T>> {
    opts.validate()?;
    for (c, &d) in b.objective.iter().zip(&b.block_dims) {
        check_dim("objective block", d, c.dim())?;
    }
    for row in &b.rows {
        check_dim("row blocks", b.num_blocks(), row.blocks.len())?;
        for (a, &d) in row.blocks.iter().zip(&b.block_dims) {
            check_dim("row block dimension", d, a.dim())?;
        }
    }
    let std = to_standard_form(b);
    let red = preprocess(&std)?;
    let mut sol = ipm(&std, &red, opts)?;
    // Report multipliers against the rows as given.
    for (y, row) in sol.dual_multipliers.iter_mut().zip(&b.rows) {
        if row.slack < 0 {
            *y = -*y;
        }
    }
    Ok(sol)
}

fn ipm<T: Real>(b: &BlockSdp<T>, red: &Reduced<T>, opts: &SolverOptions<T>) -> Result<SdpSolution<T>> {
    let nb = b.num_blocks();
    let rows: Vec<&crate::sdpr::SdpRow<T>> = red.active.iter().map(|&i| &b.rows[i]).collect();
    let m = rows.len();
    let has_slack: Vec<bool> = rows.iter().map(|r| r.slack != 0).collect();
    let nz: Vec<Vec<bool>> = rows
        .iter()
        .map(|r| r.blocks.iter().map(|a| !a.is_zero()).collect())
        .collect();
    let a_dense: Vec<Vec<Dense<T>>> = rows
        .iter()
        .map(|r| r.blocks.iter().map(|a| a.to_dense()).collect())
        .collect();
    let rhs: Vec<T> = rows.iter().map(|r| r.rhs).collect();
    let c = &b.objective;

    let nu = T::of_usize(b.block_dims.iter().sum::<usize>() + has_slack.iter().filter(|&&h| h).count());
    let b_norm = rhs.iter().fold(T::zero(), |mx, v| mx.max(v.abs()));
    let c_norm = c.iter().fold(T::zero(), |mx, cj| mx.max(cj.fro_norm()));
    let tol = opts.tol;
    let cap = T::lit(DIVERGENCE_CAP);
    let one = T::one();

    let s0 = opts.initial_scale;
    let mut it = Iterate {
        x: b.block_dims.iter().map(|&d| SymMatrix::identity(d).scaled(s0)).collect(),
        z: b.block_dims.iter().map(|&d| SymMatrix::identity(d).scaled(s0)).collect(),
        y: vec![T::zero(); m],
        s: has_slack.iter().map(|&h| if h { s0 } else { T::zero() }).collect(),
        zs: has_slack.iter().map(|&h| if h { s0 } else { T::zero() }).collect(),
    };

    struct Best<T> {
        merit: T,
        x: Vec<SymMatrix<T>>,
        y: Vec<T>,
        s: Vec<T>,
        z: Vec<SymMatrix<T>>,
        pinf: T,
        dinf: T,
        gap: T,
    }
    let mut best: Option<Best<T>> = None;
    let mut history = Vec::new();
    let mut status = SolveStatus::MaxIter;
    let mut iterations = 0;

    loop {
        // Residuals.
        let rp: Vec<T> = (0..m)
            .map(|i| {
                let ax: T = (0..nb)
                    .filter(|&j| nz[i][j])
                    .map(|j| rows[i].blocks[j].dot(&it.x[j]))
                    .sum();
                rhs[i] - ax - if has_slack[i] { it.s[i] } else { T::zero() }
            })
            .collect();
        let mut rd: Vec<SymMatrix<T>> = Vec::with_capacity(nb);
        for j in 0..nb {
            let mut r = c[j].sub(&it.z[j]);
            for i in 0..m {
                if nz[i][j] && !it.y[i].is_zero() {
                    r = r.axpy(-it.y[i], &rows[i].blocks[j]);
                }
            }
            rd.push(r);
        }
        let rds: Vec<T> = (0..m)
            .map(|i| if has_slack[i] { -it.y[i] - it.zs[i] } else { T::zero() })
            .collect();

        let pobj: T = (0..nb).map(|j| c[j].dot(&it.x[j])).sum();
        let dobj: T = (0..m).map(|i| rhs[i] * it.y[i]).sum();
        let compl: T = (0..nb).map(|j| it.x[j].dot(&it.z[j])).sum::<T>()
            + (0..m).filter(|&i| has_slack[i]).map(|i| it.s[i] * it.zs[i]).sum::<T>();
        let mu = compl / nu;
        history.push(compl);

        let pinf = rp.iter().fold(T::zero(), |mx, v| mx.max(v.abs()));
        let dinf = rd
            .iter()
            .map(|r| r.fro_norm())
            .chain(rds.iter().map(|v| v.abs()))
            .fold(T::zero(), |mx, v| mx.max(v));
        let denom = one + pobj.abs() + dobj.abs();
        let gap = rel_gap(pobj, dobj).max(compl.abs() / denom);
        let pinf_rel = pinf / (one + b_norm);
        let dinf_rel = dinf / (one + c_norm);
        let merit = pinf_rel.max(dinf_rel).max(gap);
        if best.as_ref().is_none_or(|bst| merit < bst.merit) {
            best = Some(Best {
                merit,
                x: it.x.clone(),
                y: it.y.clone(),
                s: it.s.clone(),
                z: it.z.clone(),
                pinf,
                dinf,
                gap,
            });
        }
        log::trace!(
            "iter {iterations}: pobj {pobj:e} dobj {dobj:e} pinf {pinf_rel:e} dinf {dinf_rel:e} gap {gap:e}"
        );

        if pinf_rel <= tol && dinf_rel <= tol && gap <= tol {
            status = SolveStatus::Optimal;
            break;
        }
        let big = it
            .x
            .iter()
            .chain(&it.z)
            .map(|v| v.max_abs())
            .chain(it.y.iter().map(|v| v.abs()))
            .fold(T::zero(), |mx, v| mx.max(v));
        if big > cap || !big.is_finite() {
            status = SolveStatus::Diverged;
            break;
        }
        if iterations >= opts.max_iter {
            status = SolveStatus::MaxIter;
            break;
        }
        iterations += 1;

        // Schur complement.
        let mut zinv = Vec::with_capacity(nb);
        let mut xd = Vec::with_capacity(nb);
        for j in 0..nb {
            match inverse_spd(&it.z[j]) {
                Some(zi) => zinv.push(zi),
                None => {
                    status = SolveStatus::NumericalFailure;
                    break;
                }
            }
            xd.push(it.x[j].to_dense());
        }
        if status == SolveStatus::NumericalFailure {
            break;
        }
        let mut mat = Dense::zeros(m, m);
        for j in 0..nb {
            for k in 0..m {
                if !nz[k][j] {
                    continue;
                }
                let g = xd[j].matmul(&a_dense[k][j]).matmul(&zinv[j]);
                for i in 0..m {
                    if nz[i][j] {
                        mat[(i, k)] += g.dot_sym(&rows[i].blocks[j]);
                    }
                }
            }
        }
        for i in 0..m {
            if has_slack[i] {
                mat[(i, i)] += it.s[i] / it.zs[i];
            }
            for k in 0..i {
                let v = T::lit(0.5) * (mat[(i, k)] + mat[(k, i)]);
                mat[(i, k)] = v;
                mat[(k, i)] = v;
            }
        }
        let diag_max = (0..m).fold(T::zero(), |mx, i| mx.max(mat[(i, i)].abs()));
        let mut chol = mat.cholesky();
        let mut reg = T::epsilon() * T::lit(100.0) * diag_max.max(one);
        while chol.is_none() && reg < T::lit(1e-4) * diag_max.max(one) {
            let mut mr = mat.clone();
            for i in 0..m {
                mr[(i, i)] += reg;
            }
            chol = mr.cholesky();
            reg *= T::lit(100.0);
        }
        let Some(lm) = chol else {
            status = SolveStatus::NumericalFailure;
            break;
        };

        // Direction for complementarity targets (rc, rcs).
        let direction = |rc: &[Dense<T>], rcs: &[T]| {
            // H_j = (R_c - X Rd) Z^{-1}.
            let h: Vec<Dense<T>> = (0..nb)
                .map(|j| {
                    let mut t = rc[j].clone();
                    let xr = xd[j].matmul(&rd[j].to_dense());
                    for r in 0..t.rows() {
                        for s in 0..t.cols() {
                            t[(r, s)] -= xr[(r, s)];
                        }
                    }
                    t.matmul(&zinv[j])
                })
                .collect();
            let rhs_vec: Vec<T> = (0..m)
                .map(|i| {
                    let mut v = rp[i];
                    for j in 0..nb {
                        if nz[i][j] {
                            v -= h[j].dot_sym(&rows[i].blocks[j]);
                        }
                    }
                    if has_slack[i] {
                        v -= (rcs[i] - it.s[i] * rds[i]) / it.zs[i];
                    }
                    v
                })
                .collect();
            let dy = lm.cholesky_solve(&rhs_vec);
            let mut dz = Vec::with_capacity(nb);
            let mut dx = Vec::with_capacity(nb);
            for j in 0..nb {
                let mut d = rd[j].clone();
                for i in 0..m {
                    if nz[i][j] && !dy[i].is_zero() {
                        d = d.axpy(-dy[i], &rows[i].blocks[j]);
                    }
                }
                // dX = (R_c - X dZ) Z^{-1}, symmetrized.
                let xdz = xd[j].matmul(&d.to_dense());
                let mut t = rc[j].clone();
                for r in 0..t.rows() {
                    for s in 0..t.cols() {
                        t[(r, s)] -= xdz[(r, s)];
                    }
                }
                dx.push(t.matmul(&zinv[j]).symmetrize());
                dz.push(d);
            }
            let mut dzs = vec![T::zero(); m];
            let mut dss = vec![T::zero(); m];
            for i in 0..m {
                if has_slack[i] {
                    dzs[i] = rds[i] - dy[i];
                    dss[i] = (rcs[i] - it.s[i] * dzs[i]) / it.zs[i];
                }
            }
            (dx, dy, dz, dss, dzs)
        };

        let step_lengths = |dx: &[SymMatrix<T>], dz: &[SymMatrix<T>], dss: &[T], dzs: &[T]| {
            let mut ap = max_step_lp(&it.s, dss);
            let mut ad = max_step_lp(&it.zs, dzs);
            for j in 0..nb {
                ap = ap.min(max_step_psd(&it.x[j], &dx[j])?);
                ad = ad.min(max_step_psd(&it.z[j], &dz[j])?);
            }
            Some((ap, ad))
        };

        // Predictor.
        let rc_aff: Vec<Dense<T>> = (0..nb)
            .map(|j| {
                let mut t = xd[j].matmul(&it.z[j].to_dense());
                for r in 0..t.rows() {
                    for s in 0..t.cols() {
                        t[(r, s)] = -t[(r, s)];
                    }
                }
                t
            })
            .collect();
        let rcs_aff: Vec<T> = (0..m).map(|i| -it.s[i] * it.zs[i]).collect();
        let (dxa, _dya, dza, dsa, dzsa) = direction(&rc_aff, &rcs_aff);
        let Some((apa, ada)) = step_lengths(&dxa, &dza, &dsa, &dzsa) else {
            status = SolveStatus::NumericalFailure;
            break;
        };
        let apa = apa.min(one);
        let ada = ada.min(one);
        let mut compl_aff = T::zero();
        for j in 0..nb {
            compl_aff += it.x[j].axpy(apa, &dxa[j]).dot(&it.z[j].axpy(ada, &dza[j]));
        }
        for i in 0..m {
            if has_slack[i] {
                compl_aff += (it.s[i] + apa * dsa[i]) * (it.zs[i] + ada * dzsa[i]);
            }
        }
        let mu_aff = compl_aff / nu;
        let sigma = if mu > T::zero() {
            (mu_aff / mu).max(T::zero()).min(one).powi(3)
        } else {
            T::zero()
        };

        // Corrector.
        let target = sigma * mu;
        let rc: Vec<Dense<T>> = (0..nb)
            .map(|j| {
                let mut t = xd[j].matmul(&it.z[j].to_dense());
                let cross = dxa[j].to_dense().matmul(&dza[j].to_dense());
                for r in 0..t.rows() {
                    for s in 0..t.cols() {
                        t[(r, s)] = -t[(r, s)] - cross[(r, s)];
                    }
                    t[(r, r)] += target;
                }
                t
            })
            .collect();
        let rcs: Vec<T> = (0..m)
            .map(|i| {
                if has_slack[i] {
                    target - it.s[i] * it.zs[i] - dsa[i] * dzsa[i]
                } else {
                    T::zero()
                }
            })
            .collect();
        let (dx, dy, dz, dss, dzs) = direction(&rc, &rcs);
        let Some((ap, ad)) = step_lengths(&dx, &dz, &dss, &dzs) else {
            status = SolveStatus::NumericalFailure;
            break;
        };
        let mut ap = (opts.step_fraction * ap).min(one);
        let mut ad = (opts.step_fraction * ad).min(one);

        let all_finite = dx.iter().chain(&dz).all(|d| d.packed().iter().all(|v| v.is_finite()))
            && dy.iter().chain(&dss).chain(&dzs).all(|v| v.is_finite());
        if !all_finite {
            status = SolveStatus::NumericalFailure;
            break;
        }
        // Near a face the fraction-to-boundary rule can still land on a
        // numerically singular matrix; shorten the step until it factors.
        let advance = |cur: &[SymMatrix<T>], d: &[SymMatrix<T>], mut a: T| {
            for _ in 0..BACKTRACK_LIMIT {
                let next: Vec<SymMatrix<T>> = cur.iter().zip(d).map(|(x, dx)| x.axpy(a, dx)).collect();
                if next.iter().all(|x| x.to_dense().cholesky().is_some()) {
                    return Some((next, a));
                }
                a *= T::lit(0.5);
            }
            None
        };
        let (Some((xn, a1)), Some((zn, a2))) = (advance(&it.x, &dx, ap), advance(&it.z, &dz, ad)) else {
            status = SolveStatus::NumericalFailure;
            break;
        };
        it.x = xn;
        it.z = zn;
        ap = a1;
        ad = a2;
        for i in 0..m {
            it.y[i] += ad * dy[i];
            if has_slack[i] {
                it.s[i] += ap * dss[i];
                it.zs[i] += ad * dzs[i];
            }
        }
    }

    let best = best.expect("at least one iterate is evaluated");
    let (x, y_act, s_act, z, pinf, dinf, gap) = if status == SolveStatus::Optimal {
        (it.x, it.y, it.s, it.z, best.pinf, best.dinf, best.gap)
    } else {
        (best.x, best.y, best.s, best.z, best.pinf, best.dinf, best.gap)
    };
    let mut slacks = vec![T::zero(); b.num_rows()];
    let mut y = vec![T::zero(); b.num_rows()];
    for (t, &i) in red.active.iter().enumerate() {
        slacks[i] = s_act[t];
        y[i] = y_act[t];
    }
    for &(i, v) in &red.fixed_slack {
        slacks[i] = v;
    }
    let value = b.objective_value(&x);
    let dual_value: T = b.rows.iter().zip(&y).map(|(r, &yi)| r.rhs * yi).sum();
    Ok(SdpSolution {
        blocks: x,
        slacks,
        dual_multipliers: y,
        dual_blocks: z,
        status,
        value,
        dual_value,
        iterations,
        primal_residual: pinf,
        dual_residual: dinf,
        gap,
        gap_history: history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sdpr::{BlockKind, RowOrigin, SdpRow};
    use approx::assert_abs_diff_eq;

    fn single_block(c: SymMatrix<f64>, rows: Vec<(SymMatrix<f64>, i8, f64)>) -> BlockSdp<f64> {
        let d = c.dim();
        BlockSdp {
            block_dims: vec![d],
            block_kinds: vec![BlockKind::Homogeneous],
            block_owner: vec![0],
            objective: vec![c],
            rows: rows
                .into_iter()
                .enumerate()
                .map(|(k, (a, slack, rhs))| SdpRow {
                    blocks: vec![a],
                    slack,
                    rhs,
                    origin: RowOrigin::Constraint { k: k + 1 },
                })
                .collect(),
            source_m: 0,
            dropped: vec![],
        }
    }

    fn trivial() -> BlockSdp<f64> {
        single_block(
            SymMatrix::diagonal(&[1.0, 0.0]),
            vec![(SymMatrix::diagonal(&[0.0, 1.0]), 0, 1.0)],
        )
    }

    #[test]
    fn trivial_sdp() {
        let sol = solve(&trivial(), &SolverOptions::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert_abs_diff_eq!(sol.value, 0.0, epsilon = 1e-7);
        let x = &sol.blocks[0];
        assert_abs_diff_eq!(x.get(0, 0), 0.0, epsilon = 1e-6);
        assert_abs_diff_eq!(x.get(1, 1), 1.0, epsilon = 1e-7);
        assert_abs_diff_eq!(x.get(0, 1), 0.0, epsilon = 1e-4);
    }

    #[test]
    fn check_solution_on_hand_built_optimum() {
        let b = trivial();
        let sol = SdpSolution {
            blocks: vec![SymMatrix::diagonal(&[0.0, 1.0])],
            slacks: vec![0.0],
            dual_multipliers: vec![0.0],
            dual_blocks: vec![SymMatrix::diagonal(&[1.0, 0.0])],
            status: SolveStatus::Optimal,
            value: 0.0,
            dual_value: 0.0,
            iterations: 0,
            primal_residual: 0.0,
            dual_residual: 0.0,
            gap: 0.0,
            gap_history: vec![],
        };
        let rep = check_solution(&b, &sol, 1e-12).unwrap();
        assert!(rep.max_row_residual <= 1e-12);
        assert!(rep.passes(1e-12));

        let mut bumped = sol.clone();
        bumped.blocks[0].add_to(0, 0, 1e-3);
        let rep = check_solution(&b, &bumped, 1e-12).unwrap();
        assert!(rep.max_row_residual <= 1e-12);
        assert_abs_diff_eq!(rep.primal_value, 1e-3, epsilon = 1e-15);

        let mut bumped = sol;
        bumped.blocks[0].add_to(1, 1, 1e-3);
        let rep = check_solution(&b, &bumped, 1e-12).unwrap();
        assert_abs_diff_eq!(rep.max_row_residual, 1e-3, epsilon = 1e-12);
        assert!(!rep.passes(1e-6));
    }

    #[test]
    fn check_solution_rejects_shape_mismatch() {
        let b = trivial();
        let sol = solve(&b, &SolverOptions::default()).unwrap();
        let mut bad = sol;
        bad.slacks.push(0.0);
        assert!(matches!(check_solution(&b, &bad, 1e-8), Err(Error::Dimension { .. })));
    }

    #[test]
    fn slack_rows_both_orientations() {
        // min X s.t. X >= 2, X <= 5 on a 1x1 block.
        let one = SymMatrix::identity(1);
        let b = single_block(one.clone(), vec![(one.clone(), -1, 2.0), (one.clone(), 1, 5.0)]);
        let sol = solve(&b, &SolverOptions::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert_abs_diff_eq!(sol.value, 2.0, epsilon = 1e-7);
        assert_abs_diff_eq!(sol.slacks[0], 0.0, epsilon = 1e-6);
        assert_abs_diff_eq!(sol.slacks[1], 3.0, epsilon = 1e-6);
        // Multiplier of the active ≥ row is the dual value 2 = 2·y.
        assert_abs_diff_eq!(sol.dual_multipliers[0], 1.0, epsilon = 1e-6);
        let rep = check_solution(&b, &sol, 1e-6).unwrap();
        assert!(rep.passes(1e-6), "{rep:?}");
    }

    #[test]
    fn dependent_rows_consistent_and_contradictory() {
        let e = SymMatrix::diagonal(&[0.0, 1.0]);
        let ok = single_block(
            SymMatrix::diagonal(&[1.0, 0.0]),
            vec![(e.clone(), 0, 1.0), (e.scaled(2.0), 0, 2.0)],
        );
        let sol = solve(&ok, &SolverOptions::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert_abs_diff_eq!(sol.value, 0.0, epsilon = 1e-7);

        let bad = single_block(
            SymMatrix::diagonal(&[1.0, 0.0]),
            vec![(e.clone(), 0, 1.0), (e.scaled(2.0), 0, 3.0)],
        );
        assert!(matches!(
            solve(&bad, &SolverOptions::default()),
            Err(Error::InfeasibleStructure(_))
        ));
    }

    #[test]
    fn unbounded_reports_diverged() {
        // min -X11 with only X22 = 1: unbounded below.
        let b = single_block(
            SymMatrix::diagonal(&[-1.0, 0.0]),
            vec![(SymMatrix::diagonal(&[0.0, 1.0]), 0, 1.0)],
        );
        let sol = solve(&b, &SolverOptions::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Diverged);
    }

    #[test]
    fn invalid_options_rejected() {
        let b = trivial();
        let mut o = SolverOptions::default();
        o.step_fraction = 1.0;
        assert!(matches!(solve(&b, &o), Err(Error::Range(_))));
        let o = SolverOptions::default().with_tol(0.0);
        assert!(matches!(solve(&b, &o), Err(Error::Range(_))));
    }
}
