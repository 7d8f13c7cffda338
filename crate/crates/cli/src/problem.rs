//! Problem files: a TOML document listing matrices as sparse `[i, j, value]`
//! triples (upper triangle, 1-based).
//!
//! ```toml
//! schema_version = 1
//! kind = "qcqp"            # or "homogeneous", "separable"
//! relations = ["le", "eq"]
//! rhs = [1.0, 0.0]
//!
//! [[blocks]]
//! n = 2
//! [[blocks.matrices]]
//! k = 0                    # 0 = objective, 1..m = constraints
//! entries = [[1, 1, 1.0], [1, 3, -0.5]]
//! ```
//!
//! General matrices are homogenized, of size `n + 1`; the last row and
//! column hold the linear terms and the corner must be absent or zero.
//! Homogeneous matrices are `n × n`.

use std::fmt::Write as _;
use std::ops::Range;
use std::path::Path;

use serde::Deserialize;
use sepqcqp::model::{connect, HomSepQcqp, Qcqp, QuadFunc, Relation, SeparableQcqp, SubQcqp};
use sepqcqp::SymMatrix;
use toml::Spanned;

pub const SCHEMA_VERSION: i64 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ProblemError {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid {path}{}: {message}", line.map(|l| format!(" (line {l})")).unwrap_or_default())]
    Validation {
        path: String,
        line: Option<usize>,
        message: String,
    },
    #[error("cannot read {path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// A parsed problem of any of the three kinds.
#[derive(Clone, Debug, PartialEq)]
pub enum Problem {
    Qcqp(Qcqp<f64>),
    Homogeneous(HomSepQcqp<f64>),
    Separable(SeparableQcqp<f64>),
}

impl Problem {
    /// The problem as a horizontal connection (single block unless separable).
    pub fn to_separable(&self) -> SeparableQcqp<f64> {
        match self {
            Problem::Qcqp(q) => connect(vec![q.clone().into()], q.rhs().to_vec()).expect("single block"),
            Problem::Homogeneous(h) => connect(vec![h.clone().into()], h.rhs().to_vec()).expect("single block"),
            Problem::Separable(s) => s.clone(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Problem::Qcqp(_) => "qcqp",
            Problem::Homogeneous(_) => "homogeneous",
            Problem::Separable(_) => "separable",
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FileSpec {
    schema_version: Spanned<i64>,
    kind: Spanned<String>,
    relations: Spanned<Vec<Spanned<String>>>,
    rhs: Option<Spanned<Vec<f64>>>,
    gamma: Option<Spanned<Vec<f64>>>,
    blocks: Spanned<Vec<BlockSpec>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BlockSpec {
    n: Spanned<usize>,
    /// Inside a separable file: "general" (default) or "homogeneous".
    kind: Option<Spanned<String>>,
    /// Sub-block sizes of a homogeneous block inside a separable file.
    dims: Option<Spanned<Vec<usize>>>,
    #[serde(default)]
    matrices: Vec<MatrixSpec>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MatrixSpec {
    k: Spanned<usize>,
    /// 1-based sub-block of a homogeneous block inside a separable file.
    q: Option<Spanned<usize>>,
    entries: Vec<Spanned<(usize, usize, f64)>>,
}

struct Ctx<'a> {
    src: &'a str,
}

impl Ctx<'_> {
    fn line(&self, span: Range<usize>) -> usize {
        self.src[..span.start.min(self.src.len())].matches('\n').count() + 1
    }

    fn err<T>(&self, path: impl Into<String>, span: Option<Range<usize>>, message: impl Into<String>) -> Result<T, ProblemError> {
        Err(ProblemError::Validation {
            path: path.into(),
            line: span.map(|s| self.line(s)),
            message: message.into(),
        })
    }
}

pub fn parse_file(path: &Path) -> Result<Problem, ProblemError> {
    let src = std::fs::read_to_string(path).map_err(|source| ProblemError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_str(&src)
}

pub fn parse_str(src: &str) -> Result<Problem, ProblemError> {
    let spec: FileSpec = toml::from_str(src).map_err(|e| {
        let line = e.span().map_or(1, |s| src[..s.start.min(src.len())].matches('\n').count() + 1);
        ProblemError::Parse {
            line,
            message: e.message().to_string(),
        }
    })?;
    let cx = Ctx { src };
    if *spec.schema_version.get_ref() != SCHEMA_VERSION {
        return cx.err(
            "schema_version",
            Some(spec.schema_version.span()),
            format!("unsupported version {}, expected {SCHEMA_VERSION}", spec.schema_version.get_ref()),
        );
    }
    let mut relations = Vec::new();
    for (i, r) in spec.relations.get_ref().iter().enumerate() {
        relations.push(match r.get_ref().as_str() {
            "le" => Relation::Le,
            "eq" => Relation::Eq,
            "ge" => Relation::Ge,
            other => return cx.err(format!("relations[{i}]"), Some(r.span()), format!("unknown relation '{other}', expected le, eq or ge")),
        });
    }
    let m = relations.len();
    let kind = spec.kind.get_ref().as_str();
    let rhs_field = match kind {
        "separable" => spec.gamma.as_ref().or(spec.rhs.as_ref()).map(|g| ("gamma", g)),
        _ => {
            if let Some(g) = &spec.gamma {
                return cx.err("gamma", Some(g.span()), format!("only separable problems take gamma, this one is '{kind}'"));
            }
            spec.rhs.as_ref().map(|r| ("rhs", r))
        }
    };
    let Some((rhs_name, rhs)) = rhs_field else {
        return cx.err(if kind == "separable" { "gamma" } else { "rhs" }, None, "missing right-hand side");
    };
    if rhs.get_ref().len() != m {
        return cx.err(
            rhs_name,
            Some(rhs.span()),
            format!("has {} entries but relations has {m}", rhs.get_ref().len()),
        );
    }
    let rhs_v = rhs.get_ref().clone();
    let blocks = spec.blocks.get_ref();
    if blocks.is_empty() {
        return cx.err("blocks", Some(spec.blocks.span()), "at least one block is required");
    }
    let model_err = |path: &str, span: Range<usize>, e: sepqcqp::Error| cx.err::<Problem>(path, Some(span), e.to_string());

    match kind {
        "qcqp" => {
            if blocks.len() != 1 {
                return cx.err("blocks", Some(spec.blocks.span()), "a qcqp file has exactly one block");
            }
            let q = general_block(&cx, "blocks[0]", &blocks[0], &relations, &rhs_v)?;
            Ok(Problem::Qcqp(q))
        }
        "homogeneous" => {
            let dims: Vec<usize> = blocks.iter().map(|b| *b.n.get_ref()).collect();
            let mut mats: Vec<Vec<SymMatrix<f64>>> = (0..=m).map(|_| dims.iter().map(|&d| SymMatrix::zeros(d)).collect()).collect();
            for (bi, b) in blocks.iter().enumerate() {
                if let Some(k) = &b.kind {
                    return cx.err(format!("blocks[{bi}].kind"), Some(k.span()), "block kinds are only used in separable files");
                }
                for (mi, ms) in b.matrices.iter().enumerate() {
                    let path = format!("blocks[{bi}].matrices[{mi}]");
                    if let Some(q) = &ms.q {
                        return cx.err(format!("{path}.q"), Some(q.span()), "sub-block index is only used inside separable files");
                    }
                    let k = row_index(&cx, &path, &ms.k, m)?;
                    mats[k][bi] = fill(&cx, &path, ms, dims[bi], false)?;
                }
            }
            match HomSepQcqp::new(mats, relations, rhs_v) {
                Ok(h) => Ok(Problem::Homogeneous(h)),
                Err(e) => model_err("blocks", spec.blocks.span(), e),
            }
        }
        "separable" => {
            let mut subs: Vec<SubQcqp<f64>> = Vec::new();
            for (bi, b) in blocks.iter().enumerate() {
                let path = format!("blocks[{bi}]");
                let bkind = b.kind.as_ref().map_or("general", |k| k.get_ref().as_str());
                match bkind {
                    "general" => {
                        if let Some(d) = &b.dims {
                            return cx.err(format!("{path}.dims"), Some(d.span()), "dims only applies to homogeneous blocks");
                        }
                        subs.push(general_block(&cx, &path, b, &relations, &rhs_v)?.into());
                    }
                    "homogeneous" => subs.push(hom_block(&cx, &path, b, &relations, &rhs_v)?.into()),
                    other => {
                        return cx.err(
                            format!("{path}.kind"),
                            b.kind.as_ref().map(|k| k.span()),
                            format!("unknown block kind '{other}', expected general or homogeneous"),
                        )
                    }
                }
            }
            match connect(subs, rhs_v) {
                Ok(s) => Ok(Problem::Separable(s)),
                Err(e) => model_err("blocks", spec.blocks.span(), e),
            }
        }
        other => cx.err("kind", Some(spec.kind.span()), format!("unknown kind '{other}', expected qcqp, homogeneous or separable")),
    }
}

fn row_index(cx: &Ctx, path: &str, k: &Spanned<usize>, m: usize) -> Result<usize, ProblemError> {
    let kv = *k.get_ref();
    if kv > m {
        return cx.err(format!("{path}.k"), Some(k.span()), format!("row {kv} exceeds the {m} constraints"));
    }
    Ok(kv)
}

/// Fills a `dim × dim` matrix from triples; `homogenized` enforces the zero corner.
fn fill(cx: &Ctx, path: &str, ms: &MatrixSpec, dim: usize, homogenized: bool) -> Result<SymMatrix<f64>, ProblemError> {
    let mut a = SymMatrix::zeros(dim);
    let mut seen = std::collections::BTreeSet::new();
    for (ei, e) in ms.entries.iter().enumerate() {
        let (i, j, v) = *e.get_ref();
        let epath = format!("{path}.entries[{ei}]");
        if i == 0 || j == 0 || i > dim || j > dim {
            return cx.err(epath, Some(e.span()), format!("index ({i}, {j}) outside 1..={dim}"));
        }
        if i > j {
            return cx.err(epath, Some(e.span()), format!("entry ({i}, {j}) is below the diagonal; list the upper triangle"));
        }
        if !v.is_finite() {
            return cx.err(epath, Some(e.span()), "value must be finite");
        }
        if homogenized && i == dim && j == dim && v != 0.0 {
            return cx.err(epath, Some(e.span()), format!("corner entry ({dim}, {dim}) of a homogenized matrix must be zero"));
        }
        if !seen.insert((i, j)) {
            return cx.err(epath, Some(e.span()), format!("entry ({i}, {j}) given twice"));
        }
        a.set(i - 1, j - 1, v);
    }
    Ok(a)
}

fn general_block(cx: &Ctx, path: &str, b: &BlockSpec, relations: &[Relation], rhs: &[f64]) -> Result<Qcqp<f64>, ProblemError> {
    let n = *b.n.get_ref();
    let m = relations.len();
    let mut funcs: Vec<QuadFunc<f64>> = (0..=m).map(|_| QuadFunc::zero(n)).collect();
    let mut given = vec![false; m + 1];
    for (mi, ms) in b.matrices.iter().enumerate() {
        let mpath = format!("{path}.matrices[{mi}]");
        if let Some(q) = &ms.q {
            return cx.err(format!("{mpath}.q"), Some(q.span()), "sub-block index only applies to homogeneous blocks");
        }
        let k = row_index(cx, &mpath, &ms.k, m)?;
        if std::mem::replace(&mut given[k], true) {
            return cx.err(format!("{mpath}.k"), Some(ms.k.span()), format!("row {k} given twice"));
        }
        let a = fill(cx, &mpath, ms, n + 1, true)?;
        funcs[k] = match QuadFunc::new(a) {
            Ok(f) => f,
            Err(e) => return cx.err(mpath, Some(ms.k.span()), e.to_string()),
        };
    }
    let mut it = funcs.into_iter();
    let obj = it.next().expect("objective slot");
    let rows = it.zip(relations.iter().copied()).collect();
    Qcqp::new(obj, rows, rhs.to_vec()).or_else(|e| cx.err(path, Some(b.n.span()), e.to_string()))
}

fn hom_block(cx: &Ctx, path: &str, b: &BlockSpec, relations: &[Relation], rhs: &[f64]) -> Result<HomSepQcqp<f64>, ProblemError> {
    let Some(dims) = &b.dims else {
        return cx.err(format!("{path}.dims"), Some(b.n.span()), "homogeneous blocks list their sub-block sizes in dims");
    };
    let d = dims.get_ref().clone();
    if d.iter().sum::<usize>() != *b.n.get_ref() {
        return cx.err(format!("{path}.dims"), Some(dims.span()), format!("sizes sum to {} but n = {}", d.iter().sum::<usize>(), b.n.get_ref()));
    }
    let m = relations.len();
    let mut mats: Vec<Vec<SymMatrix<f64>>> = (0..=m).map(|_| d.iter().map(|&x| SymMatrix::zeros(x)).collect()).collect();
    let mut given = std::collections::BTreeSet::new();
    for (mi, ms) in b.matrices.iter().enumerate() {
        let mpath = format!("{path}.matrices[{mi}]");
        let Some(q) = &ms.q else {
            return cx.err(format!("{mpath}.q"), Some(ms.k.span()), "matrices of a homogeneous block need a sub-block index q");
        };
        let qv = *q.get_ref();
        if qv == 0 || qv > d.len() {
            return cx.err(format!("{mpath}.q"), Some(q.span()), format!("sub-block {qv} outside 1..={}", d.len()));
        }
        let k = row_index(cx, &mpath, &ms.k, m)?;
        if !given.insert((k, qv)) {
            return cx.err(format!("{mpath}.k"), Some(ms.k.span()), format!("row {k} of sub-block {qv} given twice"));
        }
        mats[k][qv - 1] = fill(cx, &mpath, ms, d[qv - 1], false)?;
    }
    HomSepQcqp::new(mats, relations.to_vec(), rhs.to_vec()).or_else(|e| cx.err(path, Some(b.n.span()), e.to_string()))
}

fn fmt_f64(v: f64) -> String {
    // Debug prints the shortest round-tripping form and always marks floats.
    format!("{v:?}")
}

fn relation_name(r: Relation) -> &'static str {
    match r {
        Relation::Le => "le",
        Relation::Eq => "eq",
        Relation::Ge => "ge",
    }
}

fn emit_matrix(out: &mut String, table: &str, k: usize, q: Option<usize>, a: &SymMatrix<f64>) {
    let entries: Vec<String> = (0..a.dim())
        .flat_map(|i| (i..a.dim()).map(move |j| (i, j)))
        .filter(|&(i, j)| a.get(i, j) != 0.0)
        .map(|(i, j)| format!("[{}, {}, {}]", i + 1, j + 1, fmt_f64(a.get(i, j))))
        .collect();
    if entries.is_empty() {
        return;
    }
    let _ = writeln!(out, "\n[[{table}]]");
    let _ = writeln!(out, "k = {k}");
    if let Some(q) = q {
        let _ = writeln!(out, "q = {q}");
    }
    let _ = writeln!(out, "entries = [{}]", entries.join(", "));
}

fn emit_header(out: &mut String, kind: &str, relations: &[Relation], rhs_name: &str, rhs: &[f64]) {
    let _ = writeln!(out, "schema_version = {SCHEMA_VERSION}");
    let _ = writeln!(out, "kind = \"{kind}\"");
    let rel: Vec<String> = relations.iter().map(|&r| format!("\"{}\"", relation_name(r))).collect();
    let _ = writeln!(out, "relations = [{}]", rel.join(", "));
    let v: Vec<String> = rhs.iter().map(|&x| fmt_f64(x)).collect();
    let _ = writeln!(out, "{rhs_name} = [{}]", v.join(", "));
}

fn emit_general(out: &mut String, q: &Qcqp<f64>, kind_line: bool) {
    let _ = writeln!(out, "\n[[blocks]]");
    let _ = writeln!(out, "n = {}", q.n());
    if kind_line {
        let _ = writeln!(out, "kind = \"general\"");
    }
    emit_matrix(out, "blocks.matrices", 0, None, q.objective().matrix());
    for (k, f) in q.constraints().iter().enumerate() {
        emit_matrix(out, "blocks.matrices", k + 1, None, f.matrix());
    }
}

/// Writes a problem in the file format; [`parse_str`] reads it back unchanged.
pub fn emit(p: &Problem) -> String {
    let mut out = String::new();
    match p {
        Problem::Qcqp(q) => {
            emit_header(&mut out, "qcqp", q.relations(), "rhs", q.rhs());
            emit_general(&mut out, q, false);
        }
        Problem::Homogeneous(h) => {
            emit_header(&mut out, "homogeneous", h.relations(), "rhs", h.rhs());
            for (qi, &d) in h.dims().iter().enumerate() {
                let _ = writeln!(out, "\n[[blocks]]");
                let _ = writeln!(out, "n = {d}");
                for k in 0..=h.m() {
                    emit_matrix(&mut out, "blocks.matrices", k, None, h.matrix(k, qi));
                }
            }
        }
        Problem::Separable(s) => {
            emit_header(&mut out, "separable", s.relations(), "gamma", s.gamma());
            for b in s.blocks() {
                match b {
                    SubQcqp::General(q) => emit_general(&mut out, q, true),
                    SubQcqp::Homogeneous(h) => {
                        let _ = writeln!(out, "\n[[blocks]]");
                        let _ = writeln!(out, "n = {}", h.total_dim());
                        let _ = writeln!(out, "kind = \"homogeneous\"");
                        let d: Vec<String> = h.dims().iter().map(|x| x.to_string()).collect();
                        let _ = writeln!(out, "dims = [{}]", d.join(", "));
                        for k in 0..=h.m() {
                            for qi in 0..h.blocks() {
                                emit_matrix(&mut out, "blocks.matrices", k, Some(qi + 1), h.matrix(k, qi));
                            }
                        }
                    }
                }
            }
        }
    }
    out
}
