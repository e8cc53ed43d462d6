//! Exact sparse multivariate polynomials over the rationals, together with
//! the X/Y/Z variable-block bookkeeping used by every relaxation.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use num::traits::{One, Signed, ToPrimitive, Zero};
use num::{BigInt, BigRational};

use crate::error::{Error, Result};

pub type Rational = BigRational;

/// Converts an `f64` into the exactly equal rational.
pub fn rational_from_f64(value: f64) -> Rational {
    BigRational::from_float(value).unwrap_or_else(Rational::zero)
}

pub fn rational_to_f64(value: &Rational) -> f64 {
    value.to_f64().unwrap_or(f64::NAN)
}

pub fn int(value: i64) -> Rational {
    Rational::from_integer(BigInt::from(value))
}

pub fn ratio(numer: i64, denom: i64) -> Rational {
    Rational::new(BigInt::from(numer), BigInt::from(denom))
}

/// Exponent vector over all `n + m + p` variables of a layout.
///
/// Ordered graded-lexicographically: lower total degree first, and within a
/// degree the vector with the larger leading exponent first, so the basis of
/// `(x, y)` reads `1, x, y, x^2, xy, y^2`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ExponentVector(Vec<u32>);

impl ExponentVector {
    pub fn new(exponents: Vec<u32>) -> Self {
        ExponentVector(exponents)
    }

    pub fn zero(nvars: usize) -> Self {
        ExponentVector(vec![0; nvars])
    }

    pub fn unit(nvars: usize, var: usize) -> Self {
        let mut e = vec![0; nvars];
        e[var] = 1;
        ExponentVector(e)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn is_constant(&self) -> bool {
        self.0.iter().all(|&e| e == 0)
    }

    pub fn add(&self, other: &ExponentVector) -> ExponentVector {
        debug_assert_eq!(self.len(), other.len());
        ExponentVector(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    /// Exponents restricted to a contiguous variable range.
    pub fn slice(&self, range: std::ops::Range<usize>) -> &[u32] {
        &self.0[range]
    }

    fn touches(&self, range: std::ops::Range<usize>) -> bool {
        self.0[range].iter().any(|&e| e > 0)
    }

    pub fn display(&self, layout: &BlockLayout) -> String {
        let mut parts = Vec::new();
        for (i, &e) in self.0.iter().enumerate() {
            let name = layout.names.get(i).map(String::as_str).unwrap_or("?");
            match e {
                0 => {}
                1 => parts.push(name.to_string()),
                _ => parts.push(format!("{name}^{e}")),
            }
        }
        if parts.is_empty() {
            "1".to_string()
        } else {
            parts.join("*")
        }
    }
}

impl Ord for ExponentVector {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| other.0.cmp(&self.0))
    }
}

impl PartialOrd for ExponentVector {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Variable selection used by bases and matrices.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Block {
    X,
    Xy,
    Yz,
    Xyz,
}

impl fmt::Display for Block {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Block::X => "x",
            Block::Xy => "xy",
            Block::Yz => "yz",
            Block::Xyz => "xyz",
        };
        f.write_str(s)
    }
}

/// Partition of the variables into `n` X-variables, `m` Y-variables and `p`
/// Z-variables, stored in that order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockLayout {
    pub n: usize,
    pub m: usize,
    pub p: usize,
    pub names: Vec<String>,
}

impl BlockLayout {
    pub fn new(n: usize, m: usize, p: usize, names: Vec<String>) -> Result<Self> {
        if n + m + p == 0 {
            return Err(Error::InvalidLayout("at least one variable is required".into()));
        }
        if names.len() != n + m + p {
            return Err(Error::InvalidLayout(format!(
                "{} names given for {} variables",
                names.len(),
                n + m + p
            )));
        }
        for (i, a) in names.iter().enumerate() {
            if names[..i].contains(a) {
                return Err(Error::InvalidLayout(format!("duplicate variable name {a}")));
            }
        }
        Ok(BlockLayout { n, m, p, names })
    }

    /// Layout with generated names `x1.., y1.., z1..`.
    pub fn with_counts(n: usize, m: usize, p: usize) -> Result<Self> {
        let single = |prefix: &str, count: usize| -> Vec<String> {
            if count == 1 {
                vec![prefix.to_string()]
            } else {
                (1..=count).map(|i| format!("{prefix}{i}")).collect()
            }
        };
        let mut names = single("x", n);
        names.extend(single("y", m));
        names.extend(single("z", p));
        Self::new(n, m, p, names)
    }

    pub fn nvars(&self) -> usize {
        self.n + self.m + self.p
    }

    pub fn x_range(&self) -> std::ops::Range<usize> {
        0..self.n
    }

    pub fn y_range(&self) -> std::ops::Range<usize> {
        self.n..self.n + self.m
    }

    pub fn z_range(&self) -> std::ops::Range<usize> {
        self.n + self.m..self.nvars()
    }

    /// Variable positions selected by a block.
    pub fn block_vars(&self, block: Block) -> std::ops::Range<usize> {
        match block {
            Block::X => self.x_range(),
            Block::Xy => 0..self.n + self.m,
            Block::Yz => self.n..self.nvars(),
            Block::Xyz => 0..self.nvars(),
        }
    }

    pub fn block_size(&self, block: Block) -> usize {
        self.block_vars(block).len()
    }

    /// True when the exponent vector is zero outside the block.
    pub fn in_block(&self, e: &ExponentVector, block: Block) -> bool {
        let vars = self.block_vars(block);
        e.exponents()
            .iter()
            .enumerate()
            .all(|(i, &x)| x == 0 || vars.contains(&i))
    }

    /// True when the monomial has positive degree in some X and some Z variable.
    pub fn couples_xz(&self, e: &ExponentVector) -> bool {
        e.touches(self.x_range()) && e.touches(self.z_range())
    }
}

/// Sparse polynomial with exact rational coefficients. Zero coefficients are
/// never stored.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Polynomial {
    nvars: usize,
    terms: BTreeMap<ExponentVector, Rational>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ArithOp {
    Add,
    Mul,
    Scale(Rational),
}

/// Binary arithmetic entry point; `Scale` ignores `b` apart from the layout check.
pub fn poly_arith(a: &Polynomial, b: &Polynomial, op: ArithOp) -> Result<Polynomial> {
    match op {
        ArithOp::Add => a.add(b),
        ArithOp::Mul => a.mul(b),
        ArithOp::Scale(c) => {
            a.check_nvars(b.nvars)?;
            Ok(a.scale(&c))
        }
    }
}

impl Polynomial {
    pub fn zero(nvars: usize) -> Self {
        Polynomial {
            nvars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(nvars: usize, c: Rational) -> Self {
        Self::monomial(nvars, ExponentVector::zero(nvars), c)
    }

    pub fn one(nvars: usize) -> Self {
        Self::constant(nvars, Rational::one())
    }

    pub fn var(nvars: usize, index: usize) -> Self {
        Self::monomial(nvars, ExponentVector::unit(nvars, index), Rational::one())
    }

    pub fn monomial(nvars: usize, e: ExponentVector, c: Rational) -> Self {
        assert_eq!(e.len(), nvars, "exponent vector length");
        let mut p = Self::zero(nvars);
        if !c.is_zero() {
            p.terms.insert(e, c);
        }
        p
    }

    pub fn from_terms<I>(nvars: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (ExponentVector, Rational)>,
    {
        let mut p = Self::zero(nvars);
        for (e, c) in terms {
            if e.len() != nvars {
                return Err(Error::Layout {
                    expected: nvars,
                    found: e.len(),
                });
            }
            p.add_term(e, c);
        }
        Ok(p)
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&ExponentVector, &Rational)> {
        self.terms.iter()
    }

    pub fn coefficient(&self, e: &ExponentVector) -> Rational {
        self.terms.get(e).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn constant_term(&self) -> Rational {
        self.coefficient(&ExponentVector::zero(self.nvars))
    }

    /// Maximum total degree; the zero polynomial has degree 0.
    pub fn degree(&self) -> u32 {
        self.terms.keys().map(ExponentVector::degree).max().unwrap_or(0)
    }

    /// Largest absolute coefficient.
    pub fn max_abs_coefficient(&self) -> Rational {
        self.terms
            .values()
            .map(|c| c.abs())
            .max()
            .unwrap_or_else(Rational::zero)
    }

    pub fn add_term(&mut self, e: ExponentVector, c: Rational) {
        if c.is_zero() {
            return;
        }
        let entry = self.terms.entry(e);
        match entry {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    fn check_nvars(&self, other: usize) -> Result<()> {
        if self.nvars != other {
            return Err(Error::Layout {
                expected: self.nvars,
                found: other,
            });
        }
        Ok(())
    }

    pub fn add(&self, other: &Polynomial) -> Result<Polynomial> {
        self.check_nvars(other.nvars)?;
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.add_term(e.clone(), c.clone());
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Polynomial) -> Result<Polynomial> {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Polynomial {
        Polynomial {
            nvars: self.nvars,
            terms: self.terms.iter().map(|(e, c)| (e.clone(), -c)).collect(),
        }
    }

    pub fn scale(&self, c: &Rational) -> Polynomial {
        if c.is_zero() {
            return Polynomial::zero(self.nvars);
        }
        Polynomial {
            nvars: self.nvars,
            terms: self.terms.iter().map(|(e, v)| (e.clone(), v * c)).collect(),
        }
    }

    pub fn mul(&self, other: &Polynomial) -> Result<Polynomial> {
        self.check_nvars(other.nvars)?;
        let mut out = Polynomial::zero(self.nvars);
        for (ea, ca) in &self.terms {
            for (eb, cb) in &other.terms {
                out.add_term(ea.add(eb), ca * cb);
            }
        }
        Ok(out)
    }

    pub fn pow(&self, k: u32) -> Polynomial {
        let mut out = Polynomial::one(self.nvars);
        for _ in 0..k {
            out = out.mul(self).expect("same layout");
        }
        out
    }

    pub fn eval_rational(&self, point: &[Rational]) -> Result<Rational> {
        self.check_nvars(point.len())?;
        let mut total = Rational::zero();
        for (e, c) in &self.terms {
            let mut term = c.clone();
            for (x, &k) in point.iter().zip(e.exponents()) {
                for _ in 0..k {
                    term *= x;
                }
            }
            total += term;
        }
        Ok(total)
    }

    pub fn eval_f64(&self, point: &[f64]) -> Result<f64> {
        self.check_nvars(point.len())?;
        Ok(self
            .terms
            .iter()
            .map(|(e, c)| {
                let mono: f64 = point
                    .iter()
                    .zip(e.exponents())
                    .map(|(x, &k)| x.powi(k as i32))
                    .product();
                rational_to_f64(c) * mono
            })
            .sum())
    }

    /// True when every stored monomial lies in the block.
    pub fn supported_on(&self, layout: &BlockLayout, block: Block) -> bool {
        self.terms.keys().all(|e| layout.in_block(e, block))
    }

    pub fn display(&self, layout: &BlockLayout) -> String {
        if self.terms.is_empty() {
            return "0".to_string();
        }
        let mut out = String::new();
        for (i, (e, c)) in self.terms.iter().enumerate() {
            let neg = c.is_negative();
            let abs = c.abs();
            if i == 0 {
                if neg {
                    out.push('-');
                }
            } else {
                out.push_str(if neg { " - " } else { " + " });
            }
            if e.is_constant() {
                out.push_str(&abs.to_string());
            } else if abs.is_one() {
                out.push_str(&e.display(layout));
            } else {
                out.push_str(&format!("{}*{}", abs, e.display(layout)));
            }
        }
        out
    }
}

/// Splits `f` into `f_xy + f_yz`; pure-Y monomials go to `f_xy`.
pub fn check_sparsity(f: &Polynomial, layout: &BlockLayout) -> Result<(Polynomial, Polynomial)> {
    if f.nvars() != layout.nvars() {
        return Err(Error::Layout {
            expected: layout.nvars(),
            found: f.nvars(),
        });
    }
    let mut fxy = Polynomial::zero(f.nvars());
    let mut fyz = Polynomial::zero(f.nvars());
    for (e, c) in f.terms() {
        if layout.couples_xz(e) {
            return Err(Error::Coupling {
                monomial: e.display(layout),
            });
        }
        if layout.in_block(e, Block::Xy) {
            fxy.add_term(e.clone(), c.clone());
        } else {
            fyz.add_term(e.clone(), c.clone());
        }
    }
    Ok((fxy, fyz))
}

/// All exponent vectors of total degree at most `r` supported on `block`,
/// as full-length vectors, in graded lexicographic order.
pub fn monomial_basis(layout: &BlockLayout, block: Block, r: u32) -> Vec<ExponentVector> {
    let vars: Vec<usize> = layout.block_vars(block).collect();
    let nvars = layout.nvars();
    let mut out = Vec::new();
    let mut current = vec![0u32; vars.len()];
    for degree in 0..=r {
        fill_degree(&mut current, 0, degree, &mut |local| {
            let mut e = vec![0u32; nvars];
            for (slot, &v) in vars.iter().enumerate() {
                e[v] = local[slot];
            }
            out.push(ExponentVector(e));
        });
    }
    out
}

// Emits exponent tuples of exactly `remaining` total degree in descending lex
// order, which is the within-degree order of `ExponentVector`.
fn fill_degree(current: &mut [u32], pos: usize, remaining: u32, emit: &mut dyn FnMut(&[u32])) {
    if pos == current.len() {
        if remaining == 0 {
            emit(current);
        }
        return;
    }
    if pos + 1 == current.len() {
        current[pos] = remaining;
        emit(current);
        current[pos] = 0;
        return;
    }
    for k in (0..=remaining).rev() {
        current[pos] = k;
        fill_degree(current, pos + 1, remaining - k, emit);
    }
    current[pos] = 0;
}

/// Positive divisors applied by Krivine normalization, one per constraint.
#[derive(Clone, Debug, PartialEq)]
pub struct ConstraintScaling {
    pub xy: Vec<Rational>,
    pub yz: Vec<Rational>,
}

impl ConstraintScaling {
    pub fn identity(nxy: usize, nyz: usize) -> Self {
        ConstraintScaling {
            xy: vec![Rational::one(); nxy],
            yz: vec![Rational::one(); nyz],
        }
    }

    pub fn is_identity(&self) -> bool {
        self.xy.iter().chain(&self.yz).all(|b| b.is_one())
    }
}

/// Objective, constraint families and variable partition of one problem.
#[derive(Clone, Debug, PartialEq)]
pub struct ProblemInstance {
    pub layout: BlockLayout,
    pub objective: Polynomial,
    /// Constraints `g_j >= 0` on X ∪ Y.
    pub g_constraints: Vec<Polynomial>,
    /// Constraints `h_k >= 0` on Y ∪ Z.
    pub h_constraints: Vec<Polynomial>,
    /// Cartesian-product regime: every `g_j` depends on X only.
    pub product_mode: bool,
    pub g_names: Vec<String>,
    pub h_names: Vec<String>,
    /// Divisors applied to the constraints by Krivine normalization.
    pub scaling: ConstraintScaling,
    /// Set once the constraints are known to satisfy `0 <= g <= 1` on K.
    pub normalized: bool,
}

impl ProblemInstance {
    pub fn new(
        layout: BlockLayout,
        objective: Polynomial,
        g_constraints: Vec<Polynomial>,
        h_constraints: Vec<Polynomial>,
    ) -> Result<Self> {
        let g_names = (1..=g_constraints.len()).map(|i| format!("g{i}")).collect();
        let h_names = (1..=h_constraints.len()).map(|i| format!("h{i}")).collect();
        Self::with_names(layout, objective, g_constraints, h_constraints, g_names, h_names, false)
    }

    pub fn with_names(
        layout: BlockLayout,
        objective: Polynomial,
        g_constraints: Vec<Polynomial>,
        h_constraints: Vec<Polynomial>,
        g_names: Vec<String>,
        h_names: Vec<String>,
        product_mode: bool,
    ) -> Result<Self> {
        let instance = ProblemInstance {
            scaling: ConstraintScaling::identity(g_constraints.len(), h_constraints.len()),
            layout,
            objective,
            g_constraints,
            h_constraints,
            product_mode,
            g_names,
            h_names,
            normalized: false,
        };
        instance.validate()?;
        Ok(instance)
    }

    /// Re-checks every structural invariant of the instance.
    pub fn validate(&self) -> Result<()> {
        let nvars = self.layout.nvars();
        let all = std::iter::once(&self.objective)
            .chain(&self.g_constraints)
            .chain(&self.h_constraints);
        for p in all {
            if p.nvars() != nvars {
                return Err(Error::Layout {
                    expected: nvars,
                    found: p.nvars(),
                });
            }
        }
        check_sparsity(&self.objective, &self.layout)?;
        let g_block = if self.product_mode { Block::X } else { Block::Xy };
        for (g, name) in self.g_constraints.iter().zip(&self.g_names) {
            if !g.supported_on(&self.layout, g_block) {
                return Err(Error::BlockViolation {
                    name: name.clone(),
                    block: g_block.to_string(),
                });
            }
        }
        for (h, name) in self.h_constraints.iter().zip(&self.h_names) {
            if !h.supported_on(&self.layout, Block::Yz) {
                return Err(Error::BlockViolation {
                    name: name.clone(),
                    block: Block::Yz.to_string(),
                });
            }
        }
        if self.g_names.len() != self.g_constraints.len()
            || self.h_names.len() != self.h_constraints.len()
        {
            return Err(Error::InvalidArgument("constraint name count mismatch".into()));
        }
        Ok(())
    }

    /// Same instance flagged for the cartesian-product regime.
    pub fn into_product_mode(mut self) -> Result<Self> {
        self.product_mode = true;
        self.validate()?;
        Ok(self)
    }

    pub fn nvars(&self) -> usize {
        self.layout.nvars()
    }

    /// True when `point` satisfies every constraint with slack `>= -slack`.
    pub fn is_feasible(&self, point: &[f64], slack: f64) -> bool {
        self.g_constraints
            .iter()
            .chain(&self.h_constraints)
            .all(|c| c.eval_f64(point).map(|v| v >= -slack).unwrap_or(false))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn xyz() -> BlockLayout {
        BlockLayout::with_counts(1, 1, 1).unwrap()
    }

    fn x() -> Polynomial {
        Polynomial::var(3, 0)
    }
    fn y() -> Polynomial {
        Polynomial::var(3, 1)
    }
    fn z() -> Polynomial {
        Polynomial::var(3, 2)
    }

    #[test]
    fn difference_of_squares() {
        let l = xyz();
        let p = x().add(&y()).unwrap().mul(&x().sub(&y()).unwrap()).unwrap();
        assert_eq!(p.display(&l), "x^2 - y^2");
        assert_eq!(p.degree(), 2);
    }

    #[test]
    fn add_zero_is_identity() {
        let p = x().mul(&y()).unwrap().add(&z()).unwrap();
        assert_eq!(p.add(&Polynomial::zero(3)).unwrap(), p);
    }

    #[test]
    fn scale_by_rational() {
        let p = x().pow(2).scale(&ratio(3, 2));
        assert_eq!(p.coefficient(&ExponentVector::new(vec![2, 0, 0])), ratio(3, 2));
        assert_eq!(poly_arith(&x().pow(2), &Polynomial::zero(3), ArithOp::Scale(ratio(3, 2))).unwrap(), p);
    }

    #[test]
    fn mismatched_layouts_rejected() {
        let a = Polynomial::var(2, 0);
        assert!(matches!(a.add(&x()), Err(Error::Layout { .. })));
        assert!(matches!(a.mul(&x()), Err(Error::Layout { .. })));
    }

    #[test]
    fn zero_polynomial_degree_is_zero() {
        assert_eq!(Polynomial::zero(3).degree(), 0);
        assert!(x().sub(&x()).unwrap().is_zero());
    }

    #[test]
    fn evaluation() {
        let p = x().pow(2).add(&y().scale(&int(2))).unwrap();
        assert_eq!(p.eval_rational(&[int(1), int(2), int(0)]).unwrap(), int(5));
        assert_eq!(Polynomial::constant(3, int(7)).eval_f64(&[0.3, -2.0, 9.0]).unwrap(), 7.0);
        assert_eq!(x().mul(&z()).unwrap().eval_f64(&[3.0, 0.0, 2.0]).unwrap(), 6.0);
        assert!(matches!(p.eval_f64(&[1.0]), Err(Error::Layout { .. })));
    }

    #[test]
    fn sparsity_split() {
        let l = xyz();
        let f = x().pow(2).mul(&y()).unwrap().add(&y().mul(&z()).unwrap()).unwrap();
        let (a, b) = check_sparsity(&f, &l).unwrap();
        assert_eq!(a.display(&l), "x^2*y");
        assert_eq!(b.display(&l), "y*z");

        let (a, b) = check_sparsity(&y().pow(2), &l).unwrap();
        assert_eq!(a, y().pow(2));
        assert!(b.is_zero());

        match check_sparsity(&x().mul(&z()).unwrap(), &l) {
            Err(Error::Coupling { monomial }) => assert_eq!(monomial, "x*z"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn basis_examples() {
        let l = BlockLayout::with_counts(1, 1, 0).unwrap();
        let b = monomial_basis(&l, Block::X, 2);
        let shown: Vec<_> = b.iter().map(|e| e.display(&l)).collect();
        assert_eq!(shown, ["1", "x", "x^2"]);
        let b = monomial_basis(&l, Block::Xy, 2);
        let shown: Vec<_> = b.iter().map(|e| e.display(&l)).collect();
        assert_eq!(shown, ["1", "x", "y", "x^2", "x*y", "y^2"]);
        for block in [Block::X, Block::Xy, Block::Yz, Block::Xyz] {
            assert_eq!(monomial_basis(&xyz(), block, 0).len(), 1);
        }
    }

    #[test]
    fn layout_validation() {
        assert!(BlockLayout::with_counts(0, 0, 0).is_err());
        assert!(BlockLayout::new(1, 1, 0, vec!["a".into(), "a".into()]).is_err());
        assert!(BlockLayout::new(1, 1, 0, vec!["a".into()]).is_err());
    }

    #[test]
    fn instance_block_checks() {
        let l = xyz();
        let g = Polynomial::one(3).sub(&x().pow(2)).unwrap();
        let h = Polynomial::one(3).sub(&z().pow(2)).unwrap();
        assert!(ProblemInstance::new(l.clone(), x(), vec![g.clone()], vec![h.clone()]).is_ok());
        assert!(matches!(
            ProblemInstance::new(l.clone(), x(), vec![h.clone()], vec![]),
            Err(Error::BlockViolation { .. })
        ));
        assert!(matches!(
            ProblemInstance::new(l.clone(), x(), vec![], vec![g.clone()]),
            Err(Error::BlockViolation { .. })
        ));
        let gy = Polynomial::one(3).sub(&y().pow(2)).unwrap();
        let inst = ProblemInstance::new(l, x(), vec![gy], vec![h]).unwrap();
        assert!(matches!(inst.into_product_mode(), Err(Error::BlockViolation { .. })));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn poly3() -> impl Strategy<Value = Polynomial> {
            prop::collection::vec(((0u32..3, 0u32..3, 0u32..3), -20i64..20), 0..6).prop_map(|terms| {
                let mut p = Polynomial::zero(3);
                for ((a, b, c), k) in terms {
                    p.add_term(ExponentVector::new(vec![a, b, c]), ratio(k, 4));
                }
                p
            })
        }

        fn point() -> impl Strategy<Value = Vec<i64>> {
            prop::collection::vec(-5i64..5, 3)
        }

        proptest! {
            #[test]
            fn product_evaluates_pointwise(p in poly3(), q in poly3(), v in point()) {
                let pt: Vec<Rational> = v.iter().map(|&k| ratio(k, 3)).collect();
                let lhs = p.mul(&q).unwrap().eval_rational(&pt).unwrap();
                let rhs = p.eval_rational(&pt).unwrap() * q.eval_rational(&pt).unwrap();
                prop_assert_eq!(lhs, rhs);
            }

            #[test]
            fn sum_and_difference_cancel(p in poly3(), q in poly3()) {
                prop_assert_eq!(p.add(&q).unwrap().sub(&q).unwrap(), p);
            }

            #[test]
            fn sparsity_split_partitions_terms(p in poly3()) {
                let l = xyz();
                let clean = Polynomial::from_terms(
                    3,
                    p.terms().filter(|(e, _)| !l.couples_xz(e)).map(|(e, c)| (e.clone(), c.clone())),
                )
                .unwrap();
                let (a, b) = check_sparsity(&clean, &l).unwrap();
                prop_assert!(a.supported_on(&l, Block::Xy));
                prop_assert!(b.supported_on(&l, Block::Yz));
                prop_assert_eq!(a.add(&b).unwrap(), clean.clone());
                prop_assert_eq!(check_sparsity(&p, &l).is_ok(), clean == p);
            }

            #[test]
            fn basis_size_is_binomial(n in 0usize..3, m in 0usize..3, r in 0u32..4) {
                let l = BlockLayout::with_counts(n, m, 1).unwrap();
                let k = n + m;
                let binom = (1..=r as usize).fold(1usize, |acc, i| acc * (k + i) / i);
                let basis = monomial_basis(&l, Block::Xy, r);
                prop_assert_eq!(basis.len(), binom);
                prop_assert!(basis.windows(2).all(|w| w[0] < w[1]));
            }

            #[test]
            fn graded_order_is_total(a in prop::collection::vec(0u32..4, 3), b in prop::collection::vec(0u32..4, 3)) {
                let (a, b) = (ExponentVector::new(a), ExponentVector::new(b));
                prop_assert_eq!(a.cmp(&b), b.cmp(&a).reverse());
                prop_assert_eq!(a.cmp(&b) == Ordering::Equal, a == b);
                if a.degree() < b.degree() {
                    prop_assert!(a < b);
                }
            }
        }
    }
}
