//! Seeded instance generators and a feasible-point sampler.
//!
//! Every generator plants a strictly feasible anchor point, so the instances
//! are feasible, and includes one coercive constraint, so the feasible sets
//! and their relaxations are bounded.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::certificates::{check_convex, check_qcqp_sign_pattern, CertificateKind, SignCase};
use crate::error::{Error, Result};
use crate::model::{connect, HomSepQcqp, Qcqp, QuadFunc, Relation, SeparableQcqp, SubQcqp};
use crate::symkernel::{eigen, Dense, SymMatrix};

/// Deterministic generator used throughout.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn uniform(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    rng.gen_range(lo..hi)
}

pub fn random_vector(rng: &mut impl Rng, n: usize, half_width: f64) -> Vec<f64> {
    (0..n).map(|_| uniform(rng, -half_width, half_width)).collect()
}

pub fn random_symmetric(rng: &mut impl Rng, n: usize) -> SymMatrix<f64> {
    let mut a = SymMatrix::zeros(n);
    for i in 0..n {
        for j in i..n {
            a.set(i, j, uniform(rng, -1.0, 1.0));
        }
    }
    a
}

/// `G Gᵀ` for a random `n × rank` factor, plus `shift · I`.
pub fn random_psd(rng: &mut impl Rng, n: usize, rank: usize, shift: f64) -> SymMatrix<f64> {
    let g: Vec<Vec<f64>> = (0..rank).map(|_| random_vector(rng, n, 1.0)).collect();
    SymMatrix::from_fn(n, |i, j| {
        g.iter().map(|c| c[i] * c[j]).sum::<f64>() + if i == j { shift } else { 0.0 }
    })
}

/// Symmetric matrix with nonpositive off-diagonal entries and free diagonal.
pub fn random_nonpositive_offdiag(rng: &mut impl Rng, n: usize, density: f64) -> SymMatrix<f64> {
    let mut a = SymMatrix::zeros(n);
    for i in 0..n {
        a.set(i, i, uniform(rng, -1.0, 1.0));
        for j in i + 1..n {
            if rng.gen_bool(density) {
                a.set(i, j, -uniform(rng, 0.05, 1.0));
            }
        }
    }
    a
}

/// Diagonally dominant matrix with nonpositive off-diagonals; `λmin ≥ margin`.
pub fn random_m_matrix(rng: &mut impl Rng, n: usize, density: f64, margin: f64) -> SymMatrix<f64> {
    let mut a = random_nonpositive_offdiag(rng, n, density);
    for i in 0..n {
        let off: f64 = (0..n).filter(|&j| j != i).map(|j| a.get(i, j).abs()).sum();
        a.set(i, i, off + margin + uniform(rng, 0.0, 0.5));
    }
    a
}

fn quad(quadratic: &SymMatrix<f64>, linear: &[f64]) -> QuadFunc<f64> {
    QuadFunc::from_parts(quadratic, linear).expect("finite generated data")
}

/// Rhs for a row valued `value` at the anchor, with a strict margin.
fn planted_rhs(rng: &mut impl Rng, rel: Relation, value: f64) -> f64 {
    match rel {
        Relation::Le => value + uniform(rng, 0.2, 1.0),
        Relation::Ge => value - uniform(rng, 0.2, 1.0),
        Relation::Eq => value,
    }
}

/// A generated QCQP with a strictly feasible anchor and a radius bounding its feasible set.
#[derive(Clone, Debug)]
pub struct Planted {
    pub qcqp: Qcqp<f64>,
    pub anchor: Vec<f64>,
    pub radius: f64,
}

/// Radius containing `{u : uᵀAu + 2bᵀu ≤ r}` given `λmin(A) ≥ lam > 0`.
fn sublevel_radius(lam: f64, b: &[f64], r: f64) -> f64 {
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    // lam t² - 2 nb t - r ≤ 0.
    (nb + (nb * nb + lam * r.max(0.0)).sqrt()) / lam
}

fn finish_planted(
    rng: &mut impl Rng,
    objective: QuadFunc<f64>,
    rows: Vec<(QuadFunc<f64>, Relation)>,
    anchor: Vec<f64>,
    radius_of_first: impl FnOnce(f64) -> f64,
) -> Planted {
    let rhs: Vec<f64> = rows
        .iter()
        .map(|(f, r)| planted_rhs(rng, *r, f.eval(&anchor).expect("anchor matches dimension")))
        .collect();
    let radius = radius_of_first(rhs[0]);
    Planted {
        qcqp: Qcqp::new(objective, rows, rhs).expect("consistent generated dimensions"),
        anchor,
        radius,
    }
}

/// Convex QCQP: PSD quadratic parts, LE rows, row 1 strongly convex.
pub fn random_convex(rng: &mut impl Rng, n: usize, m: usize) -> Planted {
    assert!(m >= 1);
    let anchor = random_vector(rng, n, 1.0);
    let rank = rng.gen_range(1..=n);
    let objective = quad(&random_psd(rng, n, rank, 0.0), &random_vector(rng, n, 1.0));
    let a1 = random_psd(rng, n, n, 0.5);
    let b1 = random_vector(rng, n, 0.5);
    let mut rows = vec![(quad(&a1, &b1), Relation::Le)];
    for _ in 1..m {
        let rank = rng.gen_range(1..=n);
        let a = random_psd(rng, n, rank, 0.0);
        rows.push((quad(&a, &random_vector(rng, n, 1.0)), Relation::Le));
    }
    finish_planted(rng, objective, rows, anchor, |r| sublevel_radius(0.5, &b1, r))
}

/// QCQP whose homogenized matrices all have nonpositive off-diagonal entries.
pub fn random_sign_pattern(rng: &mut impl Rng, n: usize, m: usize) -> Planted {
    assert!(m >= 1);
    let anchor = random_vector(rng, n, 1.0);
    let nonpos = |rng: &mut ChaCha8Rng, n: usize| -> Vec<f64> { (0..n).map(|_| -uniform(rng, 0.0, 1.0)).collect() };
    let mut local = rng_from_seed(rng.gen());
    let objective = quad(&random_nonpositive_offdiag(&mut local, n, 0.8), &nonpos(&mut local, n));
    let a1 = random_m_matrix(&mut local, n, 0.8, 0.5);
    let b1 = nonpos(&mut local, n);
    let mut rows = vec![(quad(&a1, &b1), Relation::Le)];
    for _ in 1..m {
        let a = random_nonpositive_offdiag(&mut local, n, 0.8);
        rows.push((quad(&a, &nonpos(&mut local, n)), Relation::Le));
    }
    finish_planted(&mut local, objective, rows, anchor, |r| sublevel_radius(0.5, &b1, r))
}

/// A generated homogeneous instance with its anchor `(v^1, …, v^q̂)`.
#[derive(Clone, Debug)]
pub struct PlantedHom {
    pub problem: HomSepQcqp<f64>,
    pub anchor: Vec<f64>,
}

/// Homogeneous instance with `m` rows: row 1 bounds `Σ_q |v^q|²`, the rest are
/// random LE/GE rows. With `degenerate` the objective is zero.
pub fn random_homogeneous(rng: &mut impl Rng, dims: &[usize], m: usize, degenerate: bool) -> PlantedHom {
    assert!(m >= 1 && !dims.is_empty());
    let anchor: Vec<Vec<f64>> = dims.iter().map(|&d| random_vector(rng, d, 1.0)).collect();
    let mut mats: Vec<Vec<SymMatrix<f64>>> = Vec::with_capacity(m + 1);
    mats.push(
        dims.iter()
            .map(|&d| if degenerate { SymMatrix::zeros(d) } else { random_symmetric(rng, d) })
            .collect(),
    );
    mats.push(dims.iter().map(|&d| SymMatrix::identity(d)).collect());
    let mut relations = vec![Relation::Le];
    for _ in 1..m {
        mats.push(dims.iter().map(|&d| random_symmetric(rng, d)).collect());
        relations.push(if rng.gen_bool(0.5) { Relation::Le } else { Relation::Ge });
    }
    let rhs: Vec<f64> = (1..=m)
        .map(|k| {
            let value: f64 = mats[k].iter().zip(&anchor).map(|(c, v)| c.quad_form(v)).sum();
            planted_rhs(rng, relations[k - 1], value)
        })
        .collect();
    PlantedHom {
        problem: HomSepQcqp::new(mats, relations, rhs).expect("consistent generated dimensions"),
        anchor: anchor.concat(),
    }
}

/// Block sizes of a three-block instance: `n1`, `n2` and the three homogeneous blocks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Example52Dims {
    pub n1: usize,
    pub n2: usize,
    pub hom: [usize; 3],
}

impl Default for Example52Dims {
    fn default() -> Self {
        Self { n1: 2, n2: 2, hom: [2, 2, 1] }
    }
}

impl Example52Dims {
    /// Sizes drawn from `1..=max` per block.
    pub fn random(rng: &mut impl Rng, max: usize) -> Self {
        let mut d = || rng.gen_range(1..=max);
        Self { n1: d(), n2: d(), hom: [d(), d(), d()] }
    }
}

#[derive(Clone, Debug)]
pub struct Example52 {
    pub problem: SeparableQcqp<f64>,
    /// Ratio between rows 5 and 4 of the homogeneous block.
    pub alpha: f64,
    /// Strictly feasible planted point, one entry per sub-QCQP.
    pub anchor: Vec<Vec<f64>>,
    /// Draws consumed before validation passed.
    pub draws: usize,
}

const EXAMPLE52_ROWS: usize = 7;
const MAX_DRAWS: usize = 100;

/// Seeded three-block instance: a convex block, a sign-pattern block and a
/// homogeneous block with three sub-blocks, coupled through seven rows.
pub fn make_example52(seed: u64, dims: &Example52Dims) -> Result<SeparableQcqp<f64>> {
    generate_example52(seed, dims).map(|e| e.problem)
}

pub fn generate_example52(seed: u64, dims: &Example52Dims) -> Result<Example52> {
    let sizes = [dims.n1, dims.n2, dims.hom[0], dims.hom[1], dims.hom[2]];
    if sizes.iter().any(|&d| d == 0 || d > 4) {
        return Err(Error::Range(format!("block sizes must lie in 1..=4, got {sizes:?}")));
    }
    let mut rng = rng_from_seed(seed);
    let mut last = String::new();
    for draw in 1..=MAX_DRAWS {
        match draw_example52(&mut rng, dims) {
            Some(e) => match validate_example52(&e.problem) {
                Ok(alpha) if alpha == e.alpha => return Ok(Example52 { draws: draw, ..e }),
                Ok(_) => last = "proportionality factor mismatch".into(),
                Err(why) => last = why,
            },
            None => last = "anchor scaling system was ill-conditioned".into(),
        }
    }
    Err(Error::Generation(format!("no valid draw in {MAX_DRAWS} attempts: {last}")))
}

fn draw_example52(rng: &mut ChaCha8Rng, dims: &Example52Dims) -> Option<Example52> {
    let (n1, n2) = (dims.n1, dims.n2);
    let hd = dims.hom;
    let zero_q = |n: usize| QuadFunc::zero(n);

    // Block 1: convex.
    let u1 = random_vector(rng, n1, 1.0);
    let mut f1: Vec<QuadFunc<f64>> = Vec::new();
    f1.push(quad(&random_psd(rng, n1, n1, 0.0), &random_vector(rng, n1, 1.0)));
    f1.push(zero_q(n1));
    f1.push(zero_q(n1));
    f1.push(QuadFunc::homogeneous(&random_psd(rng, n1, n1, 0.0)));
    f1.push(quad(&random_psd(rng, n1, n1, 0.5), &random_vector(rng, n1, 1.0)));
    for _ in 5..=EXAMPLE52_ROWS {
        let rank = rng.gen_range(1..=n1);
        f1.push(quad(&random_psd(rng, n1, rank, 0.0), &random_vector(rng, n1, 1.0)));
    }

    // Block 2: nonpositive off-diagonals in every homogenized matrix.
    let u2 = random_vector(rng, n2, 1.0);
    let nonpos = |rng: &mut ChaCha8Rng, n: usize| -> Vec<f64> { (0..n).map(|_| -uniform(rng, 0.0, 1.0)).collect() };
    let mut f2: Vec<QuadFunc<f64>> = Vec::new();
    let a = random_nonpositive_offdiag(rng, n2, 0.8);
    let b = nonpos(rng, n2);
    f2.push(quad(&a, &b));
    f2.push(zero_q(n2));
    f2.push(zero_q(n2));
    f2.push(QuadFunc::homogeneous(&random_m_matrix(rng, n2, 0.8, 0.1)));
    let a = random_m_matrix(rng, n2, 0.8, 0.5);
    let b = nonpos(rng, n2);
    f2.push(quad(&a, &b));
    for _ in 5..=EXAMPLE52_ROWS {
        let a = random_nonpositive_offdiag(rng, n2, 0.8);
        let b = nonpos(rng, n2);
        f2.push(quad(&a, &b));
    }

    // Block 3: homogeneous, three sub-blocks.
    let alpha = uniform(rng, 0.5, 2.0);
    let z = |d: usize| SymMatrix::zeros(d);
    let mut c: Vec<Vec<SymMatrix<f64>>> = vec![Vec::new(); EXAMPLE52_ROWS + 1];
    c[0] = hd.iter().map(|&d| random_symmetric(rng, d)).collect();
    c[1] = vec![random_psd(rng, hd[0], hd[0], 0.3), z(hd[1]), z(hd[2])];
    c[2] = vec![
        random_psd(rng, hd[0], 1, 0.0).scaled(-0.5),
        random_psd(rng, hd[1], hd[1], 0.3),
        random_psd(rng, hd[2], 1, 0.0).scaled(-0.3),
    ];
    c[3] = vec![
        random_psd(rng, hd[0], 1, 0.0).scaled(0.5),
        random_psd(rng, hd[1], 1, 0.0).scaled(0.3),
        random_psd(rng, hd[2], hd[2], 0.3).scaled(-1.0),
    ];
    c[4] = hd.iter().map(|&d| random_psd(rng, d, d, 0.3)).collect();
    c[5] = c[4].iter().map(|m| m.scaled(alpha)).collect();
    c[6] = hd.iter().map(|&d| z(d)).collect();
    c[7] = hd.iter().map(|&d| z(d)).collect();

    // Anchor: v¹ free, then scale v², v³ so rows 2 and 3 sit at ±2 with
    // rhs γ₂ = 1 > 0 and γ₃ = -1 < 0.
    let v1 = random_vector(rng, hd[0], 1.0);
    let unit = |rng: &mut ChaCha8Rng, d: usize| {
        let v = random_vector(rng, d, 1.0);
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-3);
        v.into_iter().map(|x| x / n).collect::<Vec<f64>>()
    };
    let w2 = unit(rng, hd[1]);
    let w3 = unit(rng, hd[2]);
    let margin = 1.0;
    let a2 = c[2][0].quad_form(&v1);
    let p2 = c[2][1].quad_form(&w2);
    let n3 = -c[2][2].quad_form(&w3);
    let c3 = f1[3].eval(&u1).ok()? + f2[3].eval(&u2).ok()? + c[3][0].quad_form(&v1);
    let q2 = c[3][1].quad_form(&w2);
    let m3 = -c[3][2].quad_form(&w3);
    let det = p2 * m3 - n3 * q2;
    if !(det > 0.1 * p2 * m3) {
        return None;
    }
    let r1 = 2.0 * margin - a2;
    let r2 = c3 + 2.0 * margin;
    let x = (r1 * m3 + n3 * r2) / det;
    let y = (p2 * r2 + q2 * r1) / det;
    let v2: Vec<f64> = w2.iter().map(|t| t * x.sqrt()).collect();
    let v3: Vec<f64> = w3.iter().map(|t| t * y.sqrt()).collect();
    let v = [v1, v2, v3].concat();

    let h_rel = {
        let mut r = vec![Relation::Eq, Relation::Ge];
        r.extend(std::iter::repeat_n(Relation::Le, EXAMPLE52_ROWS - 2));
        r
    };
    let value = |k: usize| -> Option<f64> {
        let mut s = f1[k].eval(&u1).ok()? + f2[k].eval(&u2).ok()?;
        let mut off = 0;
        for (q, &d) in hd.iter().enumerate() {
            s += c[k][q].quad_form(&v[off..off + d]);
            off += d;
        }
        Some(s)
    };
    let mut gamma = Vec::with_capacity(EXAMPLE52_ROWS);
    gamma.push(value(1)?);
    gamma.push(value(2)? - margin);
    gamma.push(value(3)? + margin);
    for k in 4..=EXAMPLE52_ROWS {
        gamma.push(value(k)? + uniform(rng, 0.5, 1.5));
    }

    let split = |f: Vec<QuadFunc<f64>>| -> Option<Qcqp<f64>> {
        let mut it = f.into_iter();
        let obj = it.next()?;
        let rows: Vec<(QuadFunc<f64>, Relation)> = it.zip(h_rel.iter().copied()).collect();
        Qcqp::new(obj, rows, gamma.clone()).ok()
    };
    let b1 = split(f1)?;
    let b2 = split(f2)?;
    let b3 = HomSepQcqp::new(c, h_rel.clone(), gamma.clone()).ok()?;
    let problem = connect(vec![b1.into(), b2.into(), b3.into()], gamma).ok()?;
    let anchor = vec![u1, u2, v];
    Some(Example52 {
        problem,
        alpha,
        anchor,
        draws: 0,
    })
}

fn min_eig(a: &SymMatrix<f64>) -> f64 {
    if a.dim() == 0 {
        return 0.0;
    }
    eigen(a, 1e-14).map(|e| e.min()).unwrap_or(f64::NAN)
}

fn max_eig(a: &SymMatrix<f64>) -> f64 {
    -min_eig(&a.scaled(-1.0))
}

/// Re-checks the structural conditions of a three-block instance and returns
/// the proportionality factor between rows 5 and 4.
pub fn validate_example52(s: &SeparableQcqp<f64>) -> std::result::Result<f64, String> {
    const TOL: f64 = 1e-10;
    let m = s.m();
    if s.blocks().len() != 3 || m != EXAMPLE52_ROWS {
        return Err(format!("expected 3 blocks and {EXAMPLE52_ROWS} rows, got {} and {m}", s.blocks().len()));
    }
    let rel = s.relations();
    if rel[0] != Relation::Eq || rel[1] != Relation::Ge || rel[2..].iter().any(|&r| r != Relation::Le) {
        return Err(format!("relation pattern {rel:?}"));
    }
    let g = s.gamma();
    if g[0] == 0.0 || !(g[1] > 0.0) || !(g[2] < 0.0) {
        return Err(format!("rhs signs violated: {:?}", &g[..3]));
    }
    let (SubQcqp::General(q1), SubQcqp::General(q2), SubQcqp::Homogeneous(h)) =
        (s.block(0), s.block(1), s.block(2))
    else {
        return Err("block kinds must be general, general, homogeneous".into());
    };
    // Block 1.
    if check_convex(q1).kind != CertificateKind::Convex {
        return Err("block 1 is not convex".into());
    }
    if !q1.constraint(0).is_zero() || !q1.constraint(1).is_zero() {
        return Err("block 1 rows 1, 2 must vanish".into());
    }
    if min_eig(q1.constraint(2).matrix()) < -TOL {
        return Err("block 1 row 3 matrix is not PSD".into());
    }
    // Block 2.
    if check_qcqp_sign_pattern(q2).kind != CertificateKind::SignPattern(SignCase::AllNonpositive) {
        return Err("block 2 off-diagonals are not all nonpositive".into());
    }
    for b in q2.matrices() {
        let n = b.dim();
        if (0..n).any(|i| (i + 1..n).any(|j| b.get(i, j) > 0.0)) {
            return Err("block 2 has a positive off-diagonal entry".into());
        }
    }
    if !q2.constraint(0).is_zero() || !q2.constraint(1).is_zero() {
        return Err("block 2 rows 1, 2 must vanish".into());
    }
    if min_eig(q2.constraint(2).matrix()) < -TOL {
        return Err("block 2 row 3 matrix is not PSD".into());
    }
    // Block 3.
    if h.blocks() != 3 {
        return Err(format!("homogeneous block needs 3 sub-blocks, got {}", h.blocks()));
    }
    if h.matrix(1, 0).is_zero() || !h.matrix(1, 1).is_zero() || !h.matrix(1, 2).is_zero() {
        return Err("row 1 must involve only the first sub-block".into());
    }
    if max_eig(h.matrix(2, 0)) > TOL || max_eig(h.matrix(2, 2)) > TOL {
        return Err("row 2 matrices of sub-blocks 1, 3 must be NSD".into());
    }
    if min_eig(h.matrix(3, 0)) < -TOL || min_eig(h.matrix(3, 1)) < -TOL {
        return Err("row 3 matrices of sub-blocks 1, 2 must be PSD".into());
    }
    let mut alpha = None;
    for q in 0..3 {
        let (c4, c5) = (h.matrix(4, q), h.matrix(5, q));
        let (i, j, _) = c4
            .packed()
            .iter()
            .enumerate()
            .map(|(p, &x)| (p, x))
            .fold((0, 0, 0.0f64), |best, (p, x)| {
                if x.abs() > best.2 {
                    let (i, j) = packed_pos(c4.dim(), p);
                    (i, j, x.abs())
                } else {
                    best
                }
            });
        let a = c5.get(i, j) / c4.get(i, j);
        if !(a > 0.0) || c5.sub(&c4.scaled(a)).max_abs() > TOL * (1.0 + c5.max_abs()) {
            return Err(format!("row 5 of sub-block {} is not a positive multiple of row 4", q + 1));
        }
        match alpha {
            None => alpha = Some(a),
            Some(prev) if (prev - a).abs() <= TOL * prev => {}
            Some(_) => return Err("rows 4 and 5 use different factors across sub-blocks".into()),
        }
        if !h.matrix(6, q).is_zero() || !h.matrix(7, q).is_zero() {
            return Err("rows 6, 7 must vanish on the homogeneous block".into());
        }
    }
    alpha.ok_or_else(|| "row 4 is identically zero".into())
}

fn packed_pos(n: usize, p: usize) -> (usize, usize) {
    let mut start = 0;
    for i in 0..n {
        let len = n - i;
        if p < start + len {
            return (i, i + p - start);
        }
        start += len;
    }
    unreachable!("packed index out of range")
}

/// Random points of `q` near `center`: draw in the box `center ± radius`,
/// project onto equality rows by Gauss-Newton, keep points satisfying every
/// inequality strictly and every equality to `1e-10`.
pub fn sample_feasible(
    q: &Qcqp<f64>,
    center: &[f64],
    radius: f64,
    count: usize,
    max_tries: usize,
    rng: &mut impl Rng,
) -> Vec<Vec<f64>> {
    let n = q.n();
    let eq: Vec<usize> = (0..q.m()).filter(|&k| q.relations()[k] == Relation::Eq).collect();
    let mut out = Vec::new();
    for _ in 0..max_tries {
        if out.len() == count {
            break;
        }
        let mut u: Vec<f64> = center.iter().map(|c| c + uniform(rng, -radius, radius)).collect();
        if !eq.is_empty() && !project_equalities(q, &eq, &mut u) {
            continue;
        }
        let ok = (0..q.m()).all(|k| {
            let lhs = q.constraint(k).eval(&u).unwrap_or(f64::NAN);
            let rhs = q.rhs()[k];
            match q.relations()[k] {
                Relation::Le => lhs < rhs,
                Relation::Ge => lhs > rhs,
                Relation::Eq => (lhs - rhs).abs() <= 1e-10 * (1.0 + rhs.abs()),
            }
        });
        if ok {
            out.push(u);
        }
        debug_assert_eq!(out.last().map_or(n, |p| p.len()), n);
    }
    out
}

fn project_equalities(q: &Qcqp<f64>, eq: &[usize], u: &mut [f64]) -> bool {
    let n = u.len();
    for _ in 0..50 {
        let h: Vec<f64> = eq.iter().map(|&k| q.constraint(k).eval(u).unwrap() - q.rhs()[k]).collect();
        if h.iter().all(|x| x.abs() <= 1e-12 * (1.0 + q.rhs().iter().map(|r| r.abs()).fold(0.0, f64::max))) {
            return true;
        }
        // ∇(uᵀAu + 2bᵀu + c) = 2 (A u + b) = 2 (B [u; 1])[..n].
        let jac: Vec<Vec<f64>> = eq
            .iter()
            .map(|&k| {
                let b = q.constraint(k).matrix();
                (0..n)
                    .map(|i| 2.0 * ((0..n).map(|j| b.get(i, j) * u[j]).sum::<f64>() + b.get(i, n)))
                    .collect()
            })
            .collect();
        let p = eq.len();
        let mut jjt = Dense::zeros(p, p);
        for a in 0..p {
            for b in 0..p {
                jjt[(a, b)] = jac[a].iter().zip(&jac[b]).map(|(x, y)| x * y).sum();
            }
        }
        let Some(l) = jjt.cholesky() else { return false };
        let y = l.cholesky_solve(&h);
        for i in 0..n {
            u[i] -= (0..p).map(|a| jac[a][i] * y[a]).sum::<f64>();
        }
        if u.iter().any(|x| !x.is_finite()) {
            return false;
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certificates::check_m_le_2;

    #[test]
    fn generators_are_deterministic() {
        let a = random_convex(&mut rng_from_seed(7), 3, 2);
        let b = random_convex(&mut rng_from_seed(7), 3, 2);
        assert_eq!(a.qcqp, b.qcqp);
        let c = random_convex(&mut rng_from_seed(8), 3, 2);
        assert_ne!(a.qcqp, c.qcqp);
    }

    #[test]
    fn planted_anchors_are_strictly_feasible() {
        let mut rng = rng_from_seed(1);
        for _ in 0..20 {
            let p = random_convex(&mut rng, 4, 3);
            assert!(p.qcqp.max_violation(&p.anchor).unwrap() == 0.0);
            assert_eq!(check_convex(&p.qcqp).kind, CertificateKind::Convex);
            let p = random_sign_pattern(&mut rng, 3, 3);
            assert!(p.qcqp.max_violation(&p.anchor).unwrap() == 0.0);
            assert!(p.anchor.iter().all(|x| x.abs() <= p.radius));
            assert_eq!(
                check_qcqp_sign_pattern(&p.qcqp).kind,
                CertificateKind::SignPattern(SignCase::AllNonpositive)
            );
            let h = random_homogeneous(&mut rng, &[2, 1], 2, false);
            assert!(h.problem.to_qcqp().max_violation(&h.anchor).unwrap() == 0.0);
            assert!(check_m_le_2(&h.problem).certified());
        }
    }

    #[test]
    fn example52_instances_validate() {
        for seed in 0..10 {
            let e = generate_example52(seed, &Example52Dims::default()).unwrap();
            let alpha = validate_example52(&e.problem).unwrap();
            assert!((alpha - e.alpha).abs() < 1e-12);
            assert!(e.problem.is_feasible(&e.anchor, 1e-9).unwrap());
            assert!(e.problem.gamma()[1] > 0.0 && e.problem.gamma()[2] < 0.0);
        }
    }

    #[test]
    fn example52_rejects_large_blocks() {
        let dims = Example52Dims { n1: 5, ..Default::default() };
        assert!(matches!(make_example52(0, &dims), Err(Error::Range(_))));
    }

    #[test]
    fn validator_rejects_broken_structure() {
        let e = generate_example52(3, &Example52Dims::default()).unwrap();
        let mut g = e.problem.gamma().to_vec();
        g[2] = 1.0;
        let broken = e.problem.with_gamma(g).unwrap();
        assert!(validate_example52(&broken).is_err());
    }

    #[test]
    fn sampler_respects_equalities() {
        let q = Qcqp::new(
            QuadFunc::zero(2),
            vec![(QuadFunc::homogeneous(&SymMatrix::identity(2)), Relation::Eq)],
            vec![1.0],
        )
        .unwrap();
        let pts = sample_feasible(&q, &[0.5, 0.5], 0.5, 30, 300, &mut rng_from_seed(2));
        assert_eq!(pts.len(), 30);
        for p in pts {
            assert!((p[0] * p[0] + p[1] * p[1] - 1.0).abs() < 1e-10);
        }
    }
}
