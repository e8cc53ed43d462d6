//! Problem-file parser and the `sparsepos` command line.
//!
//! ```text
//! # two overlapping balls
//! vars x : X; y : Y; z : Z
//! minimize x + (x - y)^2 + (y - z)^2 + z
//! st g1: 1 - x^2 - y^2 >= 0
//! st h1: 1 - y^2 - z^2 >= 0
//! ```
//!
//! Statements end at a newline or `;`. Each constraint is assigned to the
//! `g` family when it avoids Z and to the `h` family when it avoids X.

use std::fmt::Write as _;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, ValueEnum};
use num::bigint::BigInt;
use num::traits::{Pow, Zero};
use rayon::prelude::*;

use crate::certificate::{extract_cone, extract_sos, to_json, Certificate};
use crate::error::{Error, Result};
use crate::oracle::{grid_min, OracleResult};
use crate::poly::{Block, BlockLayout, Polynomial, ProblemInstance, Rational};
use crate::relaxation::{assemble_conic, assemble_krivine, krivine_auto_bounds, normalize_krivine, Variant};
use crate::solver::{solve_lp, solve_sdp, SolveStatus, DEFAULT_MAX_ITER};

// ---- lexer ----

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Number(Rational),
    Sym(char),
    Ge,
    Le,
    End,
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    line: usize,
    column: usize,
}

fn syntax(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Syntax {
        line,
        column,
        message: message.into(),
    }
}

fn decimal(int_part: &str, frac: &str) -> Rational {
    let digits: BigInt = format!("{int_part}{frac}").parse().unwrap_or_else(|_| BigInt::zero());
    let denom: BigInt = Pow::pow(BigInt::from(10), frac.len());
    Rational::new(digits, denom)
}

/// Splits the text into statements of tokens; `#` starts a comment.
fn lex(text: &str) -> Result<Vec<Vec<Token>>> {
    let mut statements = Vec::new();
    let mut current = Vec::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = ln + 1;
        let chars: Vec<char> = raw.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            let column = i + 1;
            let push = |current: &mut Vec<Token>, tok| current.push(Token { tok, line, column });
            match c {
                '#' => break,
                c if c.is_whitespace() => i += 1,
                ';' => {
                    if !current.is_empty() {
                        statements.push(std::mem::take(&mut current));
                    }
                    i += 1;
                }
                '>' | '<' | '≥' | '≤' => {
                    let ge = c == '>' || c == '≥';
                    if c == '>' || c == '<' {
                        if chars.get(i + 1) != Some(&'=') {
                            return Err(syntax(line, column, format!("expected '=' after '{c}'")));
                        }
                        i += 2;
                    } else {
                        i += 1;
                    }
                    push(&mut current, if ge { Tok::Ge } else { Tok::Le });
                }
                '+' | '*' | '/' | '^' | '(' | ')' | ':' | ',' | '-' => {
                    push(&mut current, Tok::Sym(c));
                    i += 1;
                }
                '−' => {
                    push(&mut current, Tok::Sym('-'));
                    i += 1;
                }
                '·' | '×' => {
                    push(&mut current, Tok::Sym('*'));
                    i += 1;
                }
                c if c.is_ascii_digit() || c == '.' => {
                    let start = i;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                    let int_part: String = chars[start..i].iter().collect();
                    let mut frac = String::new();
                    if i < chars.len() && chars[i] == '.' {
                        i += 1;
                        let fs = i;
                        while i < chars.len() && chars[i].is_ascii_digit() {
                            i += 1;
                        }
                        frac = chars[fs..i].iter().collect();
                    }
                    if int_part.is_empty() && frac.is_empty() {
                        return Err(syntax(line, column, "malformed number"));
                    }
                    let mut value = decimal(&int_part, &frac);
                    if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                        let mut j = i + 1;
                        let neg = chars.get(j) == Some(&'-');
                        if neg || chars.get(j) == Some(&'+') {
                            j += 1;
                        }
                        let es = j;
                        while j < chars.len() && chars[j].is_ascii_digit() {
                            j += 1;
                        }
                        if j > es {
                            let e: usize = chars[es..j].iter().collect::<String>().parse().map_err(|_| syntax(line, column, "exponent too large"))?;
                            let p = Rational::from_integer(Pow::pow(BigInt::from(10), e));
                            value = if neg { value / p } else { value * p };
                            i = j;
                        }
                    }
                    push(&mut current, Tok::Number(value));
                }
                c if c.is_alphabetic() || c == '_' => {
                    let start = i;
                    while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                        i += 1;
                    }
                    push(&mut current, Tok::Ident(chars[start..i].iter().collect()));
                }
                other => return Err(syntax(line, column, format!("unexpected character '{other}'"))),
            }
        }
        if !current.is_empty() {
            statements.push(std::mem::take(&mut current));
        }
    }
    Ok(statements)
}

// ---- expressions ----

struct Expr<'a> {
    toks: &'a [Token],
    pos: usize,
    names: &'a [String],
    end: (usize, usize),
}

impl<'a> Expr<'a> {
    fn peek(&self) -> &Tok {
        self.toks.get(self.pos).map(|t| &t.tok).unwrap_or(&Tok::End)
    }

    fn here(&self) -> (usize, usize) {
        self.toks.get(self.pos).map(|t| (t.line, t.column)).unwrap_or(self.end)
    }

    fn err(&self, message: impl Into<String>) -> Error {
        let (l, c) = self.here();
        syntax(l, c, message)
    }

    fn nvars(&self) -> usize {
        self.names.len()
    }

    fn sum(&mut self) -> Result<Polynomial> {
        let mut acc = self.product()?;
        loop {
            match self.peek() {
                Tok::Sym('+') => {
                    self.pos += 1;
                    acc = acc.add(&self.product()?)?;
                }
                Tok::Sym('-') => {
                    self.pos += 1;
                    acc = acc.sub(&self.product()?)?;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn starts_factor(&self) -> bool {
        matches!(self.peek(), Tok::Ident(_) | Tok::Number(_) | Tok::Sym('('))
    }

    fn product(&mut self) -> Result<Polynomial> {
        let mut acc = self.unary()?;
        loop {
            match self.peek() {
                Tok::Sym('*') => {
                    self.pos += 1;
                    acc = acc.mul(&self.unary()?)?;
                }
                Tok::Sym('/') => {
                    self.pos += 1;
                    let at = self.here();
                    let d = self.unary()?;
                    if d.degree() > 0 || d.is_zero() {
                        return Err(syntax(at.0, at.1, "division by a non-constant or zero polynomial"));
                    }
                    acc = acc.scale(&(Rational::from_integer(1.into()) / d.constant_term()));
                }
                _ if self.starts_factor() => acc = acc.mul(&self.power()?)?,
                _ => return Ok(acc),
            }
        }
    }

    fn unary(&mut self) -> Result<Polynomial> {
        match self.peek() {
            Tok::Sym('-') => {
                self.pos += 1;
                Ok(self.unary()?.neg())
            }
            Tok::Sym('+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Polynomial> {
        let base = self.atom()?;
        if self.peek() == &Tok::Sym('^') {
            self.pos += 1;
            let at = self.here();
            let Tok::Number(k) = self.peek().clone() else {
                return Err(syntax(at.0, at.1, "expected a nonnegative integer exponent"));
            };
            self.pos += 1;
            if !k.is_integer() || k < Rational::zero() || k > Rational::from_integer(1000.into()) {
                return Err(syntax(at.0, at.1, "expected a nonnegative integer exponent"));
            }
            let k: u32 = k.to_integer().to_string().parse().expect("bounded exponent");
            return Ok(base.pow(k));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Polynomial> {
        match self.peek().clone() {
            Tok::Number(v) => {
                self.pos += 1;
                Ok(Polynomial::constant(self.nvars(), v))
            }
            Tok::Ident(name) => match self.names.iter().position(|n| *n == name) {
                Some(i) => {
                    self.pos += 1;
                    Ok(Polynomial::var(self.nvars(), i))
                }
                None => Err(self.err(format!("undeclared variable '{name}'"))),
            },
            Tok::Sym('(') => {
                self.pos += 1;
                let inner = self.sum()?;
                if self.peek() != &Tok::Sym(')') {
                    return Err(self.err("expected ')'"));
                }
                self.pos += 1;
                Ok(inner)
            }
            Tok::End => Err(self.err("expected an expression")),
            other => Err(self.err(format!("unexpected {}", describe(&other)))),
        }
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Ident(s) => format!("'{s}'"),
        Tok::Number(n) => format!("number {n}"),
        Tok::Sym(c) => format!("'{c}'"),
        Tok::Ge => "'>='".into(),
        Tok::Le => "'<='".into(),
        Tok::End => "end of statement".into(),
    }
}

fn end_of(stmt: &[Token]) -> (usize, usize) {
    let last = stmt.last().expect("statements are nonempty");
    (last.line, last.column + 1)
}

fn parse_poly(toks: &[Token], names: &[String], end: (usize, usize)) -> Result<Polynomial> {
    let mut e = Expr { toks, pos: 0, names, end };
    let p = e.sum()?;
    if e.pos != toks.len() {
        return Err(e.err(format!("unexpected {}", describe(e.peek()))));
    }
    Ok(p)
}

// ---- problem files ----

/// Parses a problem file into a validated instance.
pub fn parse_problem(text: &str) -> Result<ProblemInstance> {
    let statements = lex(text)?;
    let mut decls: Vec<(String, Block, (usize, usize))> = Vec::new();
    let mut objective: Option<Vec<Token>> = None;
    let mut constraints: Vec<(Option<String>, Vec<Token>, (usize, usize))> = Vec::new();

    let is_decl = |s: &[Token]| {
        s.len() == 3
            && matches!(s[0].tok, Tok::Ident(_))
            && s[1].tok == Tok::Sym(':')
            && matches!(&s[2].tok, Tok::Ident(b) if b == "X" || b == "Y" || b == "Z")
    };

    for stmt in statements {
        let end = end_of(&stmt);
        match &stmt[0].tok {
            Tok::Ident(k) if k == "vars" => {
                for chunk in stmt[1..].split(|t| t.tok == Tok::Sym(',')) {
                    if !is_decl(chunk) {
                        let (l, c) = chunk.first().map(|t| (t.line, t.column)).unwrap_or(end);
                        return Err(syntax(l, c, "expected a declaration 'name : X|Y|Z'"));
                    }
                    push_decl(&mut decls, chunk)?;
                }
            }
            _ if is_decl(&stmt) => push_decl(&mut decls, &stmt)?,
            Tok::Ident(k) if k == "minimize" => {
                if objective.is_some() {
                    return Err(syntax(stmt[0].line, stmt[0].column, "duplicate objective"));
                }
                if stmt.len() == 1 {
                    return Err(syntax(end.0, end.1, "empty objective"));
                }
                objective = Some(stmt[1..].to_vec());
            }
            Tok::Ident(k) if k == "st" => {
                let mut body = &stmt[1..];
                let mut name = None;
                if body.len() >= 2 && body[1].tok == Tok::Sym(':') {
                    if let Tok::Ident(n) = &body[0].tok {
                        name = Some(n.clone());
                        body = &body[2..];
                    }
                }
                if body.is_empty() {
                    return Err(syntax(end.0, end.1, "empty constraint"));
                }
                constraints.push((name, body.to_vec(), end));
            }
            other => {
                return Err(syntax(
                    stmt[0].line,
                    stmt[0].column,
                    format!("expected 'vars', 'minimize' or 'st', found {}", describe(other)),
                ))
            }
        }
    }

    if decls.is_empty() {
        return Err(syntax(1, 1, "no variables declared"));
    }
    let mut ordered: Vec<String> = Vec::new();
    let mut counts = [0usize; 3];
    for (slot, block) in [Block::X, Block::Xy, Block::Yz].into_iter().enumerate() {
        for (name, b, _) in &decls {
            if *b == block {
                ordered.push(name.clone());
                counts[slot] += 1;
            }
        }
    }
    let layout = BlockLayout::new(counts[0], counts[1], counts[2], ordered.clone())?;
    let objective = objective.ok_or_else(|| syntax(1, 1, "missing 'minimize' statement"))?;
    let oend = end_of(&objective);
    let f = parse_poly(&objective, &ordered, oend)?;

    let mut g = Vec::new();
    let mut h = Vec::new();
    let mut g_names = Vec::new();
    let mut h_names = Vec::new();
    for (i, (name, body, end)) in constraints.into_iter().enumerate() {
        let name = name.unwrap_or_else(|| format!("c{}", i + 1));
        let split = body.iter().position(|t| t.tok == Tok::Ge || t.tok == Tok::Le);
        let Some(at) = split else {
            return Err(syntax(end.0, end.1, "expected '>=' or '<='"));
        };
        let lhs = parse_poly(&body[..at], &ordered, (body[at].line, body[at].column))?;
        let rhs_toks = &body[at + 1..];
        if rhs_toks.is_empty() {
            return Err(syntax(end.0, end.1, "missing right-hand side"));
        }
        let rhs = parse_poly(rhs_toks, &ordered, end)?;
        let p = if body[at].tok == Tok::Ge { lhs.sub(&rhs)? } else { rhs.sub(&lhs)? };
        let touches = |range: std::ops::Range<usize>| p.terms().any(|(e, _)| range.clone().any(|v| e.exponents()[v] > 0));
        let (tx, tz) = (touches(layout.x_range()), touches(layout.z_range()));
        if tx && tz {
            return Err(Error::BlockViolation {
                name,
                block: "X ∪ Y or Y ∪ Z".into(),
            });
        }
        if tz {
            h.push(p);
            h_names.push(name);
        } else {
            g.push(p);
            g_names.push(name);
        }
    }
    ProblemInstance::with_names(layout, f, g, h, g_names, h_names, false)
}

fn push_decl(decls: &mut Vec<(String, Block, (usize, usize))>, chunk: &[Token]) -> Result<()> {
    let (Tok::Ident(name), Tok::Ident(b)) = (&chunk[0].tok, &chunk[2].tok) else {
        unreachable!("checked by caller")
    };
    if ["vars", "minimize", "st"].contains(&name.as_str()) {
        return Err(syntax(chunk[0].line, chunk[0].column, format!("'{name}' is reserved")));
    }
    if decls.iter().any(|(n, _, _)| n == name) {
        return Err(syntax(chunk[0].line, chunk[0].column, format!("variable '{name}' declared twice")));
    }
    let block = match b.as_str() {
        "X" => Block::X,
        "Y" => Block::Xy,
        _ => Block::Yz,
    };
    decls.push((name.clone(), block, (chunk[0].line, chunk[0].column)));
    Ok(())
}

// ---- hierarchy runs ----

#[derive(Clone, Debug, PartialEq)]
pub struct OracleOptions {
    pub bounds: Vec<(f64, f64)>,
    pub step: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub variant: Variant,
    pub r_min: u32,
    pub r_max: u32,
    pub tol: f64,
    pub certificate: Option<PathBuf>,
    pub oracle: Option<OracleOptions>,
    /// Krivine normalization bounds, `g` first; computed when absent.
    pub krivine_bounds: Option<Vec<Rational>>,
}

impl RunConfig {
    pub fn new(variant: Variant, r_min: u32, r_max: u32) -> Self {
        RunConfig {
            variant,
            r_min,
            r_max,
            tol: crate::solver::DEFAULT_TOL,
            certificate: None,
            oracle: None,
            krivine_bounds: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.r_min > self.r_max {
            return Err(Error::InvalidArgument(format!(
                "order range [{}, {}] is empty",
                self.r_min, self.r_max
            )));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidArgument("tolerance must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct Row {
    pub r: u32,
    pub bound: Option<f64>,
    pub status: Option<SolveStatus>,
    pub gap: Option<f64>,
    pub blocks: usize,
    pub max_block: usize,
    pub ms: f64,
    pub error: Option<Error>,
    /// Lower than the previous order's bound by more than `1e-7`.
    pub non_monotone: bool,
    pub certificate: Option<Certificate>,
}

#[derive(Clone, Debug)]
pub struct HierarchyReport {
    pub variant: Variant,
    pub rows: Vec<Row>,
    pub oracle: Option<std::result::Result<OracleResult, Error>>,
    pub setup_error: Option<Error>,
}

impl HierarchyReport {
    /// 0 when every row is optimal, 2 for configuration or order errors,
    /// 3 when any solve failed.
    pub fn exit_code(&self) -> i32 {
        if self.setup_error.is_some() {
            return match self.setup_error {
                Some(Error::Solver(_)) => 3,
                _ => 2,
            };
        }
        if self.rows.iter().any(|r| matches!(r.error, Some(ref e) if !matches!(e, Error::Solver(_) | Error::Extraction(_)))) {
            return 2;
        }
        if self.rows.iter().any(|r| r.status != Some(SolveStatus::Optimal)) {
            return 3;
        }
        0
    }
}

fn error_row(r: u32, e: Error) -> Row {
    Row {
        r,
        bound: None,
        status: None,
        gap: None,
        blocks: 0,
        max_block: 0,
        ms: 0.0,
        error: Some(e),
        non_monotone: false,
        certificate: None,
    }
}

/// Assembles, solves and extracts a certificate at one order.
pub fn solve_row(instance: &ProblemInstance, variant: Variant, r: u32, tol: f64) -> Row {
    let start = Instant::now();
    let outcome = if variant == Variant::Krivine {
        assemble_krivine(instance, r).map(|lp| {
            let rep = solve_lp(&lp, tol);
            let cert = extract_cone(&rep, &lp, &instance.scaling).ok().map(Certificate::Cone);
            (rep, lp.rows.len(), 1, cert)
        })
    } else {
        assemble_conic(variant, instance, r).map(|p| {
            let rep = solve_sdp(&p, tol, DEFAULT_MAX_ITER);
            let cert = extract_sos(&rep, &p).ok().map(Certificate::Sos);
            (rep, p.blocks.len(), p.max_block(), cert)
        })
    };
    let ms = start.elapsed().as_secs_f64() * 1e3;
    match outcome {
        Err(e) => error_row(r, e),
        Ok((rep, blocks, max_block, certificate)) => Row {
            r,
            bound: Some(rep.bound()),
            status: Some(rep.status),
            gap: Some(rep.residuals.gap),
            blocks,
            max_block,
            ms,
            error: None,
            non_monotone: false,
            certificate,
        },
    }
}

/// The instance a variant actually solves: product mode or Krivine
/// normalization applied when the variant needs them.
pub fn prepare_instance(instance: &ProblemInstance, config: &RunConfig) -> Result<ProblemInstance> {
    let mut inst = instance.clone();
    if config.variant == Variant::Product && !inst.product_mode {
        inst = inst.into_product_mode()?;
    }
    if config.variant == Variant::Krivine && !inst.normalized {
        let bounds = match &config.krivine_bounds {
            Some(b) => b.clone(),
            None => krivine_auto_bounds(&inst, config.tol, 1e-6)?,
        };
        inst = normalize_krivine(&inst, &bounds)?;
    }
    Ok(inst)
}

/// Runs orders `r_min ..= r_max` in sequence; errors stay in their row.
pub fn run_hierarchy(instance: &ProblemInstance, config: &RunConfig) -> HierarchyReport {
    let mut report = HierarchyReport {
        variant: config.variant,
        rows: Vec::new(),
        oracle: None,
        setup_error: None,
    };
    if let Err(e) = config.validate() {
        report.setup_error = Some(e);
        return report;
    }
    let inst = match prepare_instance(instance, config) {
        Ok(i) => i,
        Err(e) => {
            report.setup_error = Some(e);
            return report;
        }
    };
    let mut previous: Option<f64> = None;
    for r in config.r_min..=config.r_max {
        let mut row = solve_row(&inst, config.variant, r, config.tol);
        if let (Some(p), Some(b), Some(SolveStatus::Optimal)) = (previous, row.bound, row.status) {
            row.non_monotone = b < p - 1e-7;
        }
        if row.status == Some(SolveStatus::Optimal) {
            previous = row.bound;
        }
        report.rows.push(row);
    }
    if let Some(o) = &config.oracle {
        report.oracle = Some(grid_min(&inst, &o.bounds, o.step));
    }
    report
}

// ---- output ----

/// `%.{digits}g`-style formatting.
pub fn format_sig(v: f64, digits: usize) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let exp = v.abs().log10().floor() as i32;
    let sci = format!("{:.*e}", digits - 1, v);
    let (mantissa, e) = sci.split_once('e').expect("scientific format");
    let exp = e.parse::<i32>().unwrap_or(exp);
    let trim = |s: &str| {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if exp < -5 || exp >= digits as i32 {
        format!("{}e{}{:02}", trim(mantissa), if exp < 0 { '-' } else { '+' }, exp.abs())
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim(&format!("{v:.decimals$}"))
    }
}

fn row_fields(row: &Row, timing: bool) -> [String; 7] {
    let status = match (&row.status, &row.error) {
        (Some(s), _) => s.name().to_string(),
        (None, Some(_)) => "error".into(),
        _ => "-".into(),
    };
    [
        row.r.to_string(),
        row.bound.map(|b| format_sig(b, 9)).unwrap_or_else(|| "-".into()),
        status,
        row.gap.map(|g| format!("{g:.2e}")).unwrap_or_else(|| "-".into()),
        row.blocks.to_string(),
        row.max_block.to_string(),
        if timing && row.error.is_none() { format!("{:.1}", row.ms) } else { "-".into() },
    ]
}

pub fn render_table(report: &HierarchyReport, timing: bool) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "variant: {}", report.variant);
    if let Some(e) = &report.setup_error {
        let _ = writeln!(out, "error: {e}");
        return out;
    }
    let _ = writeln!(
        out,
        "{:>3}  {:>16}  {:>17}  {:>9}  {:>6}  {:>9}  {:>9}",
        "r", "bound", "status", "gap", "blocks", "max_block", "ms"
    );
    for row in &report.rows {
        let f = row_fields(row, timing);
        let _ = write!(
            out,
            "{:>3}  {:>16}  {:>17}  {:>9}  {:>6}  {:>9}  {:>9}",
            f[0], f[1], f[2], f[3], f[4], f[5], f[6]
        );
        if row.non_monotone {
            let _ = write!(out, "  non-monotone");
        }
        out.push('\n');
        if let Some(e) = &row.error {
            let _ = writeln!(out, "     r={}: {e}", row.r);
        }
    }
    match &report.oracle {
        Some(Ok(o)) => {
            let _ = writeln!(
                out,
                "oracle minimum {} at ({}), step {}, margin {}",
                format_sig(o.minimum, 9),
                o.argmin.iter().map(|v| format_sig(*v, 6)).collect::<Vec<_>>().join(", "),
                format_sig(o.step, 6),
                format_sig(o.margin, 3)
            );
            for row in &report.rows {
                if let Some(b) = row.bound {
                    let _ = writeln!(out, "slack r={}: {}", row.r, format_sig(o.minimum - b, 3));
                }
            }
        }
        Some(Err(e)) => {
            let _ = writeln!(out, "oracle: {e}");
        }
        None => {}
    }
    out
}

pub const CSV_HEADER: &str = "r,bound,status,gap,blocks,max_block,ms";

pub fn render_csv(report: &HierarchyReport, timing: bool) -> String {
    let mut out = String::new();
    if let Some(e) = &report.setup_error {
        let _ = writeln!(out, "# {}: {e}", report.variant);
        return out;
    }
    for row in &report.rows {
        let mut f = row_fields(row, timing);
        for v in f.iter_mut() {
            if v == "-" {
                v.clear();
            }
        }
        let _ = writeln!(out, "{}", f.join(","));
    }
    if let Some(Ok(o)) = &report.oracle {
        let _ = writeln!(out, "oracle,{},optimal,,,,", format_sig(o.minimum, 9));
    }
    out
}

// ---- command line ----

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Table,
    Csv,
}

/// Lower bounds for block-structured polynomial optimization.
#[derive(Parser, Debug)]
#[command(name = "sparsepos", version)]
pub struct Args {
    /// Problem file; `-` reads standard input.
    pub problem: PathBuf,
    /// One or more of schmudgen-sparse, putinar-sparse, dense, product, krivine.
    #[arg(long, value_delimiter = ',', default_value = "schmudgen-sparse")]
    pub variant: Vec<Variant>,
    /// First relaxation order (default: the variant's minimum).
    #[arg(long)]
    pub order: Option<u32>,
    /// Last relaxation order (default: the first).
    #[arg(long)]
    pub max_order: Option<u32>,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    /// Write the certificate of the highest optimal order as JSON.
    #[arg(long)]
    pub certificate: Option<PathBuf>,
    /// Grid box `lo:hi` per variable, or a single interval for all.
    #[arg(long, allow_hyphen_values = true)]
    pub oracle_box: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub oracle_step: Option<f64>,
    /// Krivine normalization bounds, `g` constraints first.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub krivine_bounds: Option<Vec<String>>,
    #[arg(long, value_enum, default_value = "table")]
    pub format: Format,
    /// Omit wall times so that output is byte-stable.
    #[arg(long)]
    pub no_timing: bool,
}

fn parse_box(text: &str, nvars: usize) -> Result<Vec<(f64, f64)>> {
    let parsed = text
        .split(',')
        .map(|part| {
            let (lo, hi) = part
                .split_once(':')
                .ok_or_else(|| Error::InvalidArgument(format!("box interval {part:?} needs lo:hi")))?;
            let p = |s: &str| s.trim().parse::<f64>().map_err(|_| Error::InvalidArgument(format!("invalid number {s:?}")));
            Ok((p(lo)?, p(hi)?))
        })
        .collect::<Result<Vec<_>>>()?;
    match parsed.len() {
        1 => Ok(vec![parsed[0]; nvars]),
        n if n == nvars => Ok(parsed),
        n => Err(Error::InvalidArgument(format!("box has {n} intervals for {nvars} variables"))),
    }
}

fn parse_bound(s: &str) -> Result<Rational> {
    let s = s.trim();
    if let Ok(r) = s.parse::<Rational>() {
        return Ok(r);
    }
    let v: f64 = s.parse().map_err(|_| Error::Bound(s.to_string()))?;
    Ok(crate::poly::rational_from_f64(v))
}

fn certificate_path(base: &std::path::Path, variant: Variant, many: bool) -> PathBuf {
    if !many {
        return base.to_path_buf();
    }
    let stem = base.file_stem().and_then(|s| s.to_str()).unwrap_or("certificate");
    let ext = base.extension().and_then(|s| s.to_str()).unwrap_or("json");
    base.with_file_name(format!("{stem}.{variant}.{ext}"))
}

/// Runs the command line; returns the process exit code.
pub fn run(args: Args, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let text = if args.problem.as_os_str() == "-" {
        let mut s = String::new();
        if let Err(e) = std::io::Read::read_to_string(&mut std::io::stdin(), &mut s) {
            let _ = writeln!(err, "error: reading standard input: {e}");
            return 2;
        }
        s
    } else {
        match std::fs::read_to_string(&args.problem) {
            Ok(s) => s,
            Err(e) => {
                let _ = writeln!(err, "error: {}: {e}", args.problem.display());
                return 2;
            }
        }
    };
    let instance = match parse_problem(&text) {
        Ok(i) => i,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return 2;
        }
    };
    let oracle = match (&args.oracle_box, args.oracle_step) {
        (None, None) => None,
        (b, s) => {
            let bounds = match parse_box(b.as_deref().unwrap_or("-1:1"), instance.nvars()) {
                Ok(b) => b,
                Err(e) => {
                    let _ = writeln!(err, "error: {e}");
                    return 2;
                }
            };
            Some(OracleOptions {
                bounds,
                step: s.unwrap_or(0.01),
            })
        }
    };
    let krivine_bounds = match &args.krivine_bounds {
        None => None,
        Some(list) => match list.iter().map(|s| parse_bound(s)).collect::<Result<Vec<_>>>() {
            Ok(b) => Some(b),
            Err(e) => {
                let _ = writeln!(err, "error: {e}");
                return 2;
            }
        },
    };
    let many = args.variant.len() > 1;
    let configs: Vec<RunConfig> = args
        .variant
        .iter()
        .map(|&variant| {
            let min = match variant {
                Variant::Product => instance
                    .clone()
                    .into_product_mode()
                    .map(|i| variant.min_order(&i))
                    .unwrap_or(0),
                _ => variant.min_order(&instance),
            };
            let r_min = args.order.unwrap_or(min);
            RunConfig {
                variant,
                r_min,
                r_max: args.max_order.unwrap_or(r_min),
                tol: args.tol,
                certificate: args.certificate.as_ref().map(|p| certificate_path(p, variant, many)),
                oracle: oracle.clone(),
                krivine_bounds: krivine_bounds.clone(),
            }
        })
        .collect();
    let reports: Vec<HierarchyReport> = configs.par_iter().map(|c| run_hierarchy(&instance, c)).collect();
    let timing = !args.no_timing;
    let mut code = 0;
    if args.format == Format::Csv {
        let _ = writeln!(out, "{CSV_HEADER}");
    }
    for (report, config) in reports.iter().zip(&configs) {
        let text = match args.format {
            Format::Table => render_table(report, timing),
            Format::Csv => render_csv(report, timing),
        };
        let _ = write!(out, "{text}");
        if let Some(path) = &config.certificate {
            let best = report
                .rows
                .iter()
                .rev()
                .find(|r| r.status == Some(SolveStatus::Optimal) && r.certificate.is_some());
            match best.and_then(|r| r.certificate.as_ref()) {
                Some(cert) => {
                    if let Err(e) = std::fs::write(path, to_json(cert) + "\n") {
                        let _ = writeln!(err, "error: {}: {e}", path.display());
                        code = code.max(2);
                    }
                }
                None => {
                    let _ = writeln!(err, "warning: no certificate for {}", report.variant);
                }
            }
        }
        for row in &report.rows {
            if let Some(e) = &row.error {
                let _ = writeln!(err, "{} r={}: {e}", report.variant, row.r);
            }
        }
        if let Some(e) = &report.setup_error {
            let _ = writeln!(err, "{}: {e}", report.variant);
        }
        code = code.max(report.exit_code());
    }
    code
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::{int, ratio};

    const TWOBALLS: &str = "vars x : X; y : Y; z : Z;  minimize x + (x−y)^2 + (y−z)^2 + z;  st g1: 1 − x^2 − y^2 >= 0;  st h1: 1 − y^2 − z^2 >= 0;";

    #[test]
    fn parses_twoballs() {
        let inst = parse_problem(TWOBALLS).unwrap();
        assert_eq!(inst.g_constraints.len(), 1);
        assert_eq!(inst.h_constraints.len(), 1);
        assert_eq!(inst.g_names, ["g1"]);
        assert_eq!((inst.layout.n, inst.layout.m, inst.layout.p), (1, 1, 1));
        assert_eq!(inst.objective.eval_f64(&[1.0, 0.0, -1.0]).unwrap(), 2.0);
    }

    #[test]
    fn coupled_constraint_is_rejected() {
        let text = "vars x : X, y : Y, z : Z\nminimize x\nst c: 1 − x·z >= 0\n";
        assert!(matches!(parse_problem(text), Err(Error::BlockViolation { .. })));
    }

    #[test]
    fn empty_objective_is_a_syntax_error() {
        let text = "vars x : X\nminimize\n";
        assert!(matches!(parse_problem(text), Err(Error::Syntax { line: 2, .. })));
        assert!(matches!(parse_problem("vars x : X\n"), Err(Error::Syntax { .. })));
    }

    #[test]
    fn syntax_positions() {
        let text = "vars x : X\nminimize x + * 2\n";
        assert_eq!(
            parse_problem(text).unwrap_err(),
            Error::Syntax {
                line: 2,
                column: 14,
                message: "unexpected '*'".into()
            }
        );
        let text = "vars x : X\nminimize q\n";
        assert!(matches!(parse_problem(text), Err(Error::Syntax { line: 2, column: 10, .. })));
    }

    #[test]
    fn literals_and_products() {
        let text = "vars x : X # comment\nminimize 3/4 x^2 - 0.25 + 2(x - 1)\nst 1 >= x^2";
        let inst = parse_problem(text).unwrap();
        let x = Polynomial::var(1, 0);
        let one = Polynomial::one(1);
        let expect = x
            .pow(2)
            .scale(&ratio(3, 4))
            .sub(&Polynomial::constant(1, ratio(1, 4)))
            .unwrap()
            .add(&x.sub(&one).unwrap().scale(&int(2)))
            .unwrap();
        assert_eq!(inst.objective, expect);
        assert_eq!(inst.g_constraints[0], one.sub(&x.pow(2)).unwrap());
    }

    #[test]
    fn objective_coupling_is_reported() {
        let text = "vars x : X; z : Z\nminimize x*z\n";
        assert!(matches!(parse_problem(text), Err(Error::Coupling { .. })));
    }

    #[test]
    fn significant_digits() {
        assert_eq!(format_sig(5.0, 9), "5");
        assert_eq!(format_sig(-1.0, 9), "-1");
        assert_eq!(format_sig(-1.52034518612, 9), "-1.52034519");
        assert_eq!(format_sig(1.5e-9, 9), "1.5e-09");
        assert_eq!(format_sig(123456789012.0, 9), "1.23456789e+11");
    }

    #[test]
    fn hierarchy_rows_and_exit_codes() {
        let inst = parse_problem(TWOBALLS).unwrap();
        let rep = run_hierarchy(&inst, &RunConfig::new(Variant::SchmudgenSparse, 1, 3));
        assert_eq!(rep.rows.len(), 3);
        assert_eq!(rep.exit_code(), 0);
        let b: Vec<f64> = rep.rows.iter().map(|r| r.bound.unwrap()).collect();
        assert!(b.windows(2).all(|w| w[0] <= w[1] + 1e-7));

        let rep = run_hierarchy(&inst, &RunConfig::new(Variant::Dense, 1, 2));
        assert!(matches!(rep.rows[0].error, Some(Error::Order { order: 1, min: 2 })));
        assert_eq!(rep.rows[1].status, Some(SolveStatus::Optimal));
        assert_eq!(rep.exit_code(), 2);

        let rep = run_hierarchy(&inst, &RunConfig::new(Variant::SchmudgenSparse, 3, 1));
        assert_eq!(rep.exit_code(), 2);
    }

    #[test]
    fn constant_objective_table() {
        let inst = parse_problem("vars x : X\nminimize 5\nst 1 - x^2 >= 0").unwrap();
        let rep = run_hierarchy(&inst, &RunConfig::new(Variant::SchmudgenSparse, 1, 2));
        let table = render_table(&rep, false);
        assert!(table.lines().nth(2).unwrap().contains(" 5 "));
        let csv = render_csv(&rep, false);
        assert!(csv.starts_with("1,5,optimal,"));
    }
}
