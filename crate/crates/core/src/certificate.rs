//! Positivity certificates recovered from dual solutions.
//!
//! An SOS certificate states `f - λ = Σ_terms (vᵀ G v) · w` where `v` is the
//! term's monomial basis, `G ⪰ 0` its Gram matrix and `w` the product of the
//! constraints named by the term's subset. A cone certificate states
//! `f - λ = Σ c_{αβ} g^α (1-g)^β` with `c ≥ 0`. Both are re-expanded in exact
//! rational arithmetic so that the identity can be checked coefficientwise.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, SymmetricEigen};
use num::bigint::BigInt;
use num::traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::moments::{inf_norm, min_eigenvalue};
use crate::poly::{rational_from_f64, rational_to_f64, ConstraintScaling, ExponentVector, Polynomial, ProblemInstance, Rational};
use crate::relaxation::{ConicProgram, Family, LinearProgram, Variant};
use crate::solver::{DualBlocks, SolveReport, SolveStatus};

/// Largest denominator used when snapping floating data to rationals.
pub const SNAP_DENOMINATOR: i64 = 1_000_000;
/// Cone coefficients above `-CONE_CLIP` are clipped to zero.
pub const CONE_CLIP: f64 = 1e-9;

pub fn clip_threshold(gram: &DMatrix<f64>) -> f64 {
    1e-7 * (1.0 + inf_norm(gram))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CertificateMode {
    Schmudgen,
    Putinar,
    Product,
    Dense,
    Krivine,
}

impl CertificateMode {
    pub fn name(self) -> &'static str {
        match self {
            CertificateMode::Schmudgen => "schmudgen",
            CertificateMode::Putinar => "putinar",
            CertificateMode::Product => "product",
            CertificateMode::Dense => "dense",
            CertificateMode::Krivine => "krivine",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        use CertificateMode::*;
        [Schmudgen, Putinar, Product, Dense, Krivine]
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Serialization(format!("unknown mode {s}")))
    }

    fn of_variant(v: Variant) -> Self {
        match v {
            Variant::SchmudgenSparse => CertificateMode::Schmudgen,
            Variant::PutinarSparse => CertificateMode::Putinar,
            Variant::Dense => CertificateMode::Dense,
            Variant::Product => CertificateMode::Product,
            Variant::Krivine => CertificateMode::Krivine,
        }
    }
}

/// One `σ_J · g_J` term. The weight is rebuilt from the instance, so a
/// certificate cannot claim a weight its subset does not produce.
#[derive(Clone, Debug, PartialEq)]
pub struct SosTerm {
    pub family: Family,
    pub subset: Vec<usize>,
    pub basis: Vec<ExponentVector>,
    pub gram: DMatrix<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SosCertificate {
    pub mode: CertificateMode,
    pub order: u32,
    pub lambda: f64,
    pub terms: Vec<SosTerm>,
}

/// Coefficients keyed by `(α, β)`.
pub type ConeCoefficients = BTreeMap<(Vec<u32>, Vec<u32>), f64>;

#[derive(Clone, Debug, PartialEq)]
pub struct ConeCertificate {
    pub order: u32,
    pub lambda: f64,
    pub xy_coeffs: ConeCoefficients,
    pub yz_coeffs: ConeCoefficients,
    /// Divisors the LP's constraints were normalized with.
    pub scaling: ConstraintScaling,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Certificate {
    Sos(SosCertificate),
    Cone(ConeCertificate),
}

impl Certificate {
    pub fn lambda(&self) -> f64 {
        match self {
            Certificate::Sos(c) => c.lambda,
            Certificate::Cone(c) => c.lambda,
        }
    }

    pub fn mode(&self) -> CertificateMode {
        match self {
            Certificate::Sos(c) => c.mode,
            Certificate::Cone(_) => CertificateMode::Krivine,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VerificationReport {
    pub residual: f64,
    pub coupling_free: bool,
    pub psd_ok: bool,
    /// Every basis monomial lies in its term's block and every cone index
    /// pair respects the certificate's order.
    pub structure_ok: bool,
    pub lambda: f64,
    pub passed: bool,
    pub message: Option<String>,
}

fn require_optimal(report: &SolveReport) -> Result<()> {
    if report.status != SolveStatus::Optimal {
        return Err(Error::Extraction(format!("solver status is {}", report.status)));
    }
    Ok(())
}

/// Symmetrizes and projects away negative eigenvalues above `-clip`.
pub fn clip_gram(gram: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let sym = (gram + gram.transpose()) * 0.5;
    let clip = clip_threshold(&sym);
    let eig = SymmetricEigen::new(sym.clone());
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if min < -clip {
        return Err(Error::Extraction(format!(
            "gram eigenvalue {min:.3e} below clip threshold {clip:.3e}"
        )));
    }
    if min >= 0.0 {
        return Ok(sym);
    }
    let clipped = eig.eigenvalues.map(|v| v.max(0.0));
    let mut out = &eig.eigenvectors * DMatrix::from_diagonal(&clipped) * eig.eigenvectors.transpose();
    out = (&out + out.transpose()) * 0.5;
    Ok(out)
}

pub fn extract_sos(report: &SolveReport, program: &ConicProgram) -> Result<SosCertificate> {
    require_optimal(report)?;
    let DualBlocks::Psd(blocks) = &report.dual_blocks else {
        return Err(Error::Extraction("expected semidefinite dual blocks".into()));
    };
    if blocks.len() != program.blocks.len() {
        return Err(Error::Dimension(format!(
            "{} dual blocks for {} program blocks",
            blocks.len(),
            program.blocks.len()
        )));
    }
    let terms = blocks
        .iter()
        .zip(&program.blocks)
        .map(|((label, gram), (_, matrix))| {
            Ok(SosTerm {
                family: label.family,
                subset: label.subset.clone(),
                basis: matrix.basis().to_vec(),
                gram: clip_gram(gram)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SosCertificate {
        mode: CertificateMode::of_variant(program.variant),
        order: program.order,
        lambda: report.dual_objective,
        terms,
    })
}

pub fn extract_cone(report: &SolveReport, program: &LinearProgram, scaling: &ConstraintScaling) -> Result<ConeCertificate> {
    require_optimal(report)?;
    let DualBlocks::Linear(rows) = &report.dual_blocks else {
        return Err(Error::Extraction("expected linear row duals".into()));
    };
    if rows.len() != program.rows.len() {
        return Err(Error::Dimension("row dual count differs from program".into()));
    }
    let mut xy = ConeCoefficients::new();
    let mut yz = ConeCoefficients::new();
    for (label, value) in rows {
        if *value < -CONE_CLIP {
            return Err(Error::Extraction(format!("negative cone coefficient {value:.3e}")));
        }
        let v = value.max(0.0);
        let key = (label.alpha.clone(), label.beta.clone());
        match label.family {
            Family::Yz => yz.insert(key, v),
            _ => xy.insert(key, v),
        };
    }
    Ok(ConeCertificate {
        order: program.order,
        lambda: report.dual_objective,
        xy_coeffs: xy,
        yz_coeffs: yz,
        scaling: scaling.clone(),
    })
}

/// Best rational approximation with denominator at most `max_den`, taken
/// from the continued fraction expansion of the exact binary value.
pub fn snap(value: f64, max_den: i64) -> Rational {
    if !value.is_finite() {
        return Rational::zero();
    }
    let exact = rational_from_f64(value);
    let max_den = BigInt::from(max_den);
    let (mut p0, mut q0) = (BigInt::zero(), BigInt::one());
    let (mut p1, mut q1) = (BigInt::one(), BigInt::zero());
    let mut rest = exact.clone();
    loop {
        let a = rest.floor().to_integer();
        let p2 = &a * &p1 + &p0;
        let q2 = &a * &q1 + &q0;
        if q2 > max_den {
            // best semiconvergent between the last two convergents
            let k = (&max_den - &q0) / &q1;
            let ps = &k * &p1 + &p0;
            let qs = &k * &q1 + &q0;
            let conv = Rational::new(p1.clone(), q1.clone());
            let semi = Rational::new(ps, qs);
            return if (&semi - &exact).abs() < (&conv - &exact).abs() { semi } else { conv };
        }
        let frac = &rest - Rational::from_integer(a);
        p0 = std::mem::replace(&mut p1, p2);
        q0 = std::mem::replace(&mut q1, q2);
        if frac.is_zero() {
            return Rational::new(p1, q1);
        }
        rest = frac.recip();
    }
}

fn product_of(polys: &[Polynomial], subset: &[usize], nvars: usize) -> Result<Polynomial> {
    let mut w = Polynomial::one(nvars);
    for &j in subset {
        let g = polys
            .get(j)
            .ok_or_else(|| Error::Dimension(format!("subset index {j} out of range")))?;
        w = w.mul(g)?;
    }
    Ok(w)
}

/// The weight polynomial a term's family and subset denote on `instance`.
pub fn term_weight(term: &SosTerm, instance: &ProblemInstance) -> Result<Polynomial> {
    let nvars = instance.nvars();
    match term.family {
        Family::Xy | Family::X => product_of(&instance.g_constraints, &term.subset, nvars),
        Family::Yz => product_of(&instance.h_constraints, &term.subset, nvars),
        Family::SigmaXy => {
            if term.subset.is_empty() {
                Ok(Polynomial::one(nvars))
            } else {
                Err(Error::Dimension("the unweighted term takes no subset".into()))
            }
        }
        Family::Full => {
            let all: Vec<Polynomial> = instance
                .g_constraints
                .iter()
                .chain(&instance.h_constraints)
                .cloned()
                .collect();
            product_of(&all, &term.subset, nvars)
        }
    }
}

/// `vᵀ G v` with the entries of `G` snapped to rationals. The result is the
/// exact expansion of `Σ d_i (l_i·v)²` for the rational `LDLᵀ` factors of the
/// snapped matrix, computed without forming them.
pub fn expand_gram(gram: &DMatrix<f64>, basis: &[ExponentVector], nvars: usize) -> Result<Polynomial> {
    let k = basis.len();
    if gram.nrows() != k || gram.ncols() != k {
        return Err(Error::Dimension(format!(
            "gram is {}x{} for a basis of {k}",
            gram.nrows(),
            gram.ncols()
        )));
    }
    if basis.iter().any(|b| b.len() != nvars) {
        return Err(Error::Dimension("basis monomial has the wrong arity".into()));
    }
    let two = Rational::from_integer(BigInt::from(2));
    let mut out = Polynomial::zero(nvars);
    for i in 0..k {
        for j in i..k {
            let v = 0.5 * (gram[(i, j)] + gram[(j, i)]);
            let q = snap(v, SNAP_DENOMINATOR);
            if q.is_zero() {
                continue;
            }
            let q = if i == j { q } else { q * &two };
            out.add_term(basis[i].add(&basis[j]), q);
        }
    }
    Ok(out)
}

fn expand_sos(cert: &SosCertificate, instance: &ProblemInstance) -> Result<(Polynomial, Vec<Polynomial>)> {
    let nvars = instance.nvars();
    let mut total = Polynomial::zero(nvars);
    let mut parts = Vec::with_capacity(cert.terms.len());
    for term in &cert.terms {
        let weight = term_weight(term, instance)?;
        let part = expand_gram(&term.gram, &term.basis, nvars)?.mul(&weight)?;
        total = total.add(&part)?;
        parts.push(part);
    }
    Ok((total, parts))
}

/// Constraints of the LP: instance constraints rescaled to the divisors the
/// certificate was computed with.
fn cone_constraints(cert: &ConeCertificate, instance: &ProblemInstance) -> Result<(Vec<Polynomial>, Vec<Polynomial>)> {
    let rescale = |polys: &[Polynomial], have: &[Rational], want: &[Rational]| -> Result<Vec<Polynomial>> {
        if polys.len() != have.len() || polys.len() != want.len() {
            return Err(Error::Dimension("scaling record does not match constraint count".into()));
        }
        Ok(polys
            .iter()
            .zip(have.iter().zip(want))
            .map(|(g, (h, w))| g.scale(&(h / w)))
            .collect())
    };
    Ok((
        rescale(&instance.g_constraints, &instance.scaling.xy, &cert.scaling.xy)?,
        rescale(&instance.h_constraints, &instance.scaling.yz, &cert.scaling.yz)?,
    ))
}

fn cone_product(g: &[Polynomial], alpha: &[u32], beta: &[u32], nvars: usize) -> Result<Polynomial> {
    if alpha.len() != g.len() || beta.len() != g.len() {
        return Err(Error::Dimension("cone index length differs from constraint count".into()));
    }
    let one = Polynomial::one(nvars);
    let mut p = one.clone();
    for (j, gj) in g.iter().enumerate() {
        p = p.mul(&gj.pow(alpha[j]))?;
        p = p.mul(&one.sub(gj)?.pow(beta[j]))?;
    }
    Ok(p)
}

fn expand_cone(cert: &ConeCertificate, instance: &ProblemInstance) -> Result<(Polynomial, Vec<Polynomial>)> {
    let nvars = instance.nvars();
    let (g, h) = cone_constraints(cert, instance)?;
    let mut total = Polynomial::zero(nvars);
    let mut parts = Vec::new();
    for (coeffs, constraints) in [(&cert.xy_coeffs, &g), (&cert.yz_coeffs, &h)] {
        for ((alpha, beta), c) in coeffs {
            if *c == 0.0 {
                continue;
            }
            let part = cone_product(constraints, alpha, beta, nvars)?.scale(&rational_from_f64(*c));
            total = total.add(&part)?;
            parts.push(part);
        }
    }
    Ok((total, parts))
}

/// `Σ terms` as an exact polynomial in the instance's variables.
pub fn expand(cert: &Certificate, instance: &ProblemInstance) -> Result<Polynomial> {
    Ok(match cert {
        Certificate::Sos(c) => expand_sos(c, instance)?.0,
        Certificate::Cone(c) => expand_cone(c, instance)?.0,
    })
}

fn structure_ok(cert: &Certificate, instance: &ProblemInstance) -> bool {
    let layout = &instance.layout;
    match cert {
        Certificate::Sos(c) => c
            .terms
            .iter()
            .all(|t| t.basis.iter().all(|b| b.len() == layout.nvars() && layout.in_block(b, t.family.block()))),
        Certificate::Cone(c) => {
            let within = |coeffs: &ConeCoefficients, polys: &[Polynomial]| {
                coeffs.keys().all(|(a, b)| {
                    a.len() == polys.len()
                        && b.len() == polys.len()
                        && polys
                            .iter()
                            .zip(a.iter().zip(b))
                            .map(|(g, (x, y))| g.degree() * (x + y))
                            .sum::<u32>()
                            <= 2 * c.order
                })
            };
            within(&c.xy_coeffs, &instance.g_constraints) && within(&c.yz_coeffs, &instance.h_constraints)
        }
    }
}

fn psd_ok(cert: &Certificate) -> bool {
    match cert {
        Certificate::Sos(c) => c.terms.iter().all(|t| {
            if t.gram.nrows() == 0 {
                return true;
            }
            let asym = (&t.gram - t.gram.transpose()).amax();
            let sym = (&t.gram + t.gram.transpose()) * 0.5;
            asym <= 1e-9 * (1.0 + inf_norm(&sym)) && min_eigenvalue(&sym) >= -clip_threshold(&sym)
        }),
        Certificate::Cone(c) => c.xy_coeffs.values().chain(c.yz_coeffs.values()).all(|&v| v >= 0.0),
    }
}

pub fn verify(cert: &Certificate, instance: &ProblemInstance, tol: f64) -> VerificationReport {
    let lambda = cert.lambda();
    let fail = |message: String| VerificationReport {
        residual: f64::INFINITY,
        coupling_free: false,
        psd_ok: false,
        structure_ok: false,
        lambda,
        passed: false,
        message: Some(message),
    };
    if !lambda.is_finite() {
        return fail("certificate bound is not finite".into());
    }
    let expanded = match cert {
        Certificate::Sos(c) => expand_sos(c, instance),
        Certificate::Cone(c) => expand_cone(c, instance),
    };
    let (total, parts) = match expanded {
        Ok(v) => v,
        Err(e) => return fail(e.to_string()),
    };
    let nvars = instance.nvars();
    let lam = Polynomial::constant(nvars, rational_from_f64(lambda));
    let diff = instance
        .objective
        .sub(&lam)
        .and_then(|d| d.sub(&total))
        .expect("expansion shares the instance layout");
    let residual = rational_to_f64(&diff.max_abs_coefficient());
    let layout = &instance.layout;
    let coupling_free = std::iter::once(&total)
        .chain(&parts)
        .all(|p| p.terms().all(|(e, _)| !layout.couples_xz(e)));
    let psd = psd_ok(cert);
    let structure = structure_ok(cert, instance);
    let scale = 1.0 + rational_to_f64(&instance.objective.max_abs_coefficient());
    let coupling_required = cert.mode() != CertificateMode::Dense;
    let passed = residual <= tol * scale && psd && structure && (coupling_free || !coupling_required);
    VerificationReport {
        residual,
        coupling_free,
        psd_ok: psd,
        structure_ok: structure,
        lambda,
        passed,
        message: None,
    }
}

// ---- serialization ----

fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

fn parse_num(s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::Serialization(format!("invalid number {s:?}")))
}

fn parse_rational(s: &str) -> Result<Rational> {
    s.trim()
        .parse::<Rational>()
        .map_err(|_| Error::Serialization(format!("invalid rational {s:?}")))
}

#[derive(Serialize, Deserialize, Debug)]
struct CoeffDoc {
    alpha: Vec<u32>,
    beta: Vec<u32>,
    value: String,
}

#[derive(Serialize, Deserialize, Debug)]
struct TermDoc {
    family: String,
    subset: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    basis: Vec<Vec<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gram: Option<Vec<Vec<String>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    coeffs: Option<Vec<CoeffDoc>>,
}

#[derive(Serialize, Deserialize, Debug)]
struct ScalingDoc {
    xy: Vec<String>,
    yz: Vec<String>,
}

#[derive(Serialize, Deserialize, Debug)]
struct CertificateDoc {
    mode: String,
    order: u32,
    lambda: String,
    terms: Vec<TermDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    scaling: Option<ScalingDoc>,
}

fn coeff_docs(coeffs: &ConeCoefficients) -> Vec<CoeffDoc> {
    coeffs
        .iter()
        .map(|((a, b), v)| CoeffDoc {
            alpha: a.clone(),
            beta: b.clone(),
            value: num(*v),
        })
        .collect()
}

/// JSON document; floating values are written with 17 significant digits.
pub fn to_json(cert: &Certificate) -> String {
    let doc = match cert {
        Certificate::Sos(c) => CertificateDoc {
            mode: c.mode.name().into(),
            order: c.order,
            lambda: num(c.lambda),
            terms: c
                .terms
                .iter()
                .map(|t| TermDoc {
                    family: t.family.name().into(),
                    subset: t.subset.clone(),
                    basis: t.basis.iter().map(|e| e.exponents().to_vec()).collect(),
                    gram: Some(
                        (0..t.gram.nrows())
                            .map(|i| (0..t.gram.ncols()).map(|j| num(t.gram[(i, j)])).collect())
                            .collect(),
                    ),
                    coeffs: None,
                })
                .collect(),
            scaling: None,
        },
        Certificate::Cone(c) => CertificateDoc {
            mode: CertificateMode::Krivine.name().into(),
            order: c.order,
            lambda: num(c.lambda),
            terms: vec![
                TermDoc {
                    family: Family::Xy.name().into(),
                    subset: (0..c.scaling.xy.len()).collect(),
                    basis: Vec::new(),
                    gram: None,
                    coeffs: Some(coeff_docs(&c.xy_coeffs)),
                },
                TermDoc {
                    family: Family::Yz.name().into(),
                    subset: (0..c.scaling.yz.len()).collect(),
                    basis: Vec::new(),
                    gram: None,
                    coeffs: Some(coeff_docs(&c.yz_coeffs)),
                },
            ],
            scaling: Some(ScalingDoc {
                xy: c.scaling.xy.iter().map(|r| r.to_string()).collect(),
                yz: c.scaling.yz.iter().map(|r| r.to_string()).collect(),
            }),
        },
    };
    serde_json::to_string_pretty(&doc).expect("certificate documents serialize")
}

pub fn from_json(text: &str) -> Result<Certificate> {
    let doc: CertificateDoc = serde_json::from_str(text).map_err(|e| Error::Serialization(e.to_string()))?;
    let mode = CertificateMode::parse(&doc.mode)?;
    let lambda = parse_num(&doc.lambda)?;
    if mode == CertificateMode::Krivine {
        let scaling = doc
            .scaling
            .ok_or_else(|| Error::Serialization("cone certificate without scaling".into()))?;
        let scaling = ConstraintScaling {
            xy: scaling.xy.iter().map(|s| parse_rational(s)).collect::<Result<_>>()?,
            yz: scaling.yz.iter().map(|s| parse_rational(s)).collect::<Result<_>>()?,
        };
        let mut xy = ConeCoefficients::new();
        let mut yz = ConeCoefficients::new();
        for term in doc.terms {
            let target = match Family::parse(&term.family)? {
                Family::Yz => &mut yz,
                _ => &mut xy,
            };
            for c in term.coeffs.unwrap_or_default() {
                target.insert((c.alpha, c.beta), parse_num(&c.value)?);
            }
        }
        return Ok(Certificate::Cone(ConeCertificate {
            order: doc.order,
            lambda,
            xy_coeffs: xy,
            yz_coeffs: yz,
            scaling,
        }));
    }
    let terms = doc
        .terms
        .into_iter()
        .map(|t| {
            let rows = t
                .gram
                .ok_or_else(|| Error::Serialization("SOS term without gram".into()))?;
            let k = rows.len();
            if rows.iter().any(|r| r.len() != k) || t.basis.len() != k {
                return Err(Error::Serialization("gram is not square over its basis".into()));
            }
            let mut gram = DMatrix::zeros(k, k);
            for (i, row) in rows.iter().enumerate() {
                for (j, v) in row.iter().enumerate() {
                    gram[(i, j)] = parse_num(v)?;
                }
            }
            Ok(SosTerm {
                family: Family::parse(&t.family)?,
                subset: t.subset,
                basis: t.basis.into_iter().map(ExponentVector::new).collect(),
                gram,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Certificate::Sos(SosCertificate {
        mode,
        order: doc.order,
        lambda,
        terms,
    }))
}

/// `f - λ - expand(cert)`.
pub fn residual_polynomial(cert: &Certificate, instance: &ProblemInstance) -> Result<Polynomial> {
    let lam = Polynomial::constant(instance.nvars(), rational_from_f64(cert.lambda()));
    instance.objective.sub(&lam)?.sub(&expand(cert, instance)?)
}
