//! Assembly of the hierarchy programs: sparse Schmüdgen and Putinar SDPs,
//! the dense full-preordering baseline, the cartesian-product SDP and the
//! Krivine LP.
//!
//! Every program shares one convention: the decision variables are the
//! moments listed in `moments`, whose first entry is the constant moment
//! pinned to `u_0 = 1`.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use num::traits::{One, Signed};

use crate::error::{Error, Result};
use crate::moments::{build_localizing_matrix, build_moment_matrix, half_degree, LinearForm, SymbolicMatrix};
use crate::poly::{rational_from_f64, Block, BlockLayout, ExponentVector, Polynomial, ProblemInstance, Rational};

/// Largest number of subset products a preordering enumeration may produce.
pub const MAX_SUBSET_PRODUCTS: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Variant {
    SchmudgenSparse,
    PutinarSparse,
    Dense,
    Product,
    Krivine,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::SchmudgenSparse,
        Variant::PutinarSparse,
        Variant::Dense,
        Variant::Product,
        Variant::Krivine,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::SchmudgenSparse => "schmudgen-sparse",
            Variant::PutinarSparse => "putinar-sparse",
            Variant::Dense => "dense",
            Variant::Product => "product",
            Variant::Krivine => "krivine",
        }
    }

    pub fn is_sparse(self) -> bool {
        !matches!(self, Variant::Dense)
    }

    /// Smallest admissible order of this variant on the instance.
    pub fn min_order(self, instance: &ProblemInstance) -> u32 {
        let fdeg = instance.objective.degree();
        let g: Vec<u32> = instance.g_constraints.iter().map(Polynomial::degree).collect();
        let h: Vec<u32> = instance.h_constraints.iter().map(Polynomial::degree).collect();
        let fhalf = fdeg.div_ceil(2);
        match self {
            Variant::SchmudgenSparse | Variant::Product => {
                let sg: u32 = g.iter().sum();
                let sh: u32 = h.iter().sum();
                fhalf.max(sg.div_ceil(2)).max(sh.div_ceil(2))
            }
            Variant::PutinarSparse => g
                .iter()
                .chain(&h)
                .map(|d| d.div_ceil(2))
                .fold(fhalf, u32::max),
            Variant::Dense => {
                let s: u32 = g.iter().chain(&h).sum();
                fhalf.max(s.div_ceil(2))
            }
            Variant::Krivine => g.iter().chain(&h).fold(fdeg, |a, &d| a.max(d)).div_ceil(2),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .iter()
            .copied()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown variant {s}")))
    }
}

/// `r_0` of the sparse Schmüdgen hierarchy: half of
/// `max(deg f, 2 max_{J,K} r(g_J), 2 max r(h_K))`.
pub fn min_order(instance: &ProblemInstance) -> u32 {
    Variant::SchmudgenSparse.min_order(instance)
}

/// Which constraint family a PSD block or certificate term belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Family {
    /// Weighted by a product of `g`'s, living on X ∪ Y.
    Xy,
    /// Weighted by a product of `h`'s, living on Y ∪ Z.
    Yz,
    /// Product regime: `g`-products on X only.
    X,
    /// Product regime: the unweighted SOS term on X ∪ Y.
    SigmaXy,
    /// Dense baseline: products of any constraints over all variables.
    Full,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Xy => "xy",
            Family::Yz => "yz",
            Family::X => "x",
            Family::SigmaXy => "sigma_xy",
            Family::Full => "xyz",
        }
    }

    pub fn block(self) -> Block {
        match self {
            Family::Xy | Family::SigmaXy => Block::Xy,
            Family::Yz => Block::Yz,
            Family::X => Block::X,
            Family::Full => Block::Xyz,
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        [Family::Xy, Family::Yz, Family::X, Family::SigmaXy, Family::Full]
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown family {s}")))
    }
}

/// Identifies a PSD block: its family, the subset of constraints whose
/// product weights it, and the localizing order.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockLabel {
    pub family: Family,
    /// Indices into the family's constraint list; for `Family::Full` the list
    /// is the `g` constraints followed by the `h` constraints.
    pub subset: Vec<usize>,
    pub weight: Polynomial,
    pub order: u32,
}

/// One subset product `g_J` with its half-degree.
#[derive(Clone, Debug, PartialEq)]
pub struct SubsetProduct {
    pub subset: Vec<usize>,
    pub product: Polynomial,
    pub half_degree: u32,
}

/// All `2^|I|` products `g_J`, with `g_∅ = 1` first; subsets in binary counting order.
pub fn enumerate_products(constraints: &[Polynomial], nvars: usize) -> Result<Vec<SubsetProduct>> {
    let count = constraints.len();
    if count >= usize::BITS as usize || (1usize << count) > MAX_SUBSET_PRODUCTS {
        return Err(Error::Capacity {
            count,
            limit: MAX_SUBSET_PRODUCTS,
        });
    }
    let mut out: Vec<SubsetProduct> = Vec::with_capacity(1 << count);
    out.push(SubsetProduct {
        subset: Vec::new(),
        product: Polynomial::one(nvars),
        half_degree: 0,
    });
    for (j, g) in constraints.iter().enumerate() {
        if g.nvars() != nvars {
            return Err(Error::Layout {
                expected: nvars,
                found: g.nvars(),
            });
        }
        let extended: Vec<SubsetProduct> = out
            .iter()
            .map(|s| {
                let product = s.product.mul(g).expect("checked layout");
                let mut subset = s.subset.clone();
                subset.push(j);
                SubsetProduct {
                    half_degree: half_degree(&product),
                    subset,
                    product,
                }
            })
            .collect();
        out.extend(extended);
    }
    Ok(out)
}

fn singleton_products(constraints: &[Polynomial], nvars: usize) -> Vec<SubsetProduct> {
    let mut out = vec![SubsetProduct {
        subset: Vec::new(),
        product: Polynomial::one(nvars),
        half_degree: 0,
    }];
    out.extend(constraints.iter().enumerate().map(|(j, g)| SubsetProduct {
        subset: vec![j],
        product: g.clone(),
        half_degree: half_degree(g),
    }));
    out
}

/// Semidefinite relaxation in moment form:
/// minimize `L_u(f)` subject to every block being PSD and `u_0 = 1`.
#[derive(Clone, Debug)]
pub struct ConicProgram {
    pub variant: Variant,
    pub order: u32,
    pub layout: BlockLayout,
    /// Moment indices in graded-lex order; `moments[0]` is the pinned constant moment.
    pub moments: Vec<ExponentVector>,
    pub objective: LinearForm,
    pub blocks: Vec<(BlockLabel, SymbolicMatrix)>,
}

impl ConicProgram {
    /// Moments other than `u_0`.
    pub fn free_moments(&self) -> &[ExponentVector] {
        &self.moments[1..]
    }

    pub fn moment_count(&self) -> usize {
        self.moments.len()
    }

    pub fn block_sizes(&self) -> Vec<usize> {
        self.blocks.iter().map(|(_, m)| m.size()).collect()
    }

    pub fn max_block(&self) -> usize {
        self.block_sizes().into_iter().max().unwrap_or(0)
    }

    /// True when some referenced moment has positive X- and Z-degree.
    pub fn references_xz_coupling(&self) -> bool {
        self.moments.iter().any(|e| self.layout.couples_xz(e))
    }
}

/// Row `L_u(g^alpha (1-g)^beta) >= 0` of the Krivine LP.
#[derive(Clone, Debug, PartialEq)]
pub struct RowLabel {
    pub family: Family,
    pub alpha: Vec<u32>,
    pub beta: Vec<u32>,
    pub polynomial: Polynomial,
}

#[derive(Clone, Debug)]
pub struct LinearProgram {
    pub order: u32,
    pub layout: BlockLayout,
    pub moments: Vec<ExponentVector>,
    pub objective: LinearForm,
    pub rows: Vec<(RowLabel, LinearForm)>,
}

impl LinearProgram {
    pub fn free_moments(&self) -> &[ExponentVector] {
        &self.moments[1..]
    }
}

fn collect_moments<'a, I>(nvars: usize, objective: &Polynomial, referenced: I) -> Vec<ExponentVector>
where
    I: IntoIterator<Item = &'a ExponentVector>,
{
    let mut set: BTreeSet<ExponentVector> = referenced.into_iter().cloned().collect();
    set.extend(objective.terms().map(|(e, _)| e.clone()));
    set.insert(ExponentVector::zero(nvars));
    set.into_iter().collect()
}

fn check_order(order: u32, min: u32) -> Result<()> {
    if order < min {
        return Err(Error::Order { order, min });
    }
    Ok(())
}

fn localizing_blocks(
    layout: &BlockLayout,
    family: Family,
    products: Vec<SubsetProduct>,
    r: u32,
) -> Result<Vec<(BlockLabel, SymbolicMatrix)>> {
    products
        .into_iter()
        .map(|sp| {
            let order = r
                .checked_sub(sp.half_degree)
                .ok_or(Error::Order {
                    order: r,
                    min: sp.half_degree,
                })?;
            let matrix = build_localizing_matrix(&sp.product, layout, family.block(), order)?;
            Ok((
                BlockLabel {
                    family,
                    subset: sp.subset,
                    weight: sp.product,
                    order,
                },
                matrix,
            ))
        })
        .collect()
}

fn finish(
    variant: Variant,
    instance: &ProblemInstance,
    r: u32,
    blocks: Vec<(BlockLabel, SymbolicMatrix)>,
) -> ConicProgram {
    let moments = collect_moments(
        instance.nvars(),
        &instance.objective,
        blocks.iter().flat_map(|(_, m)| m.referenced()),
    );
    ConicProgram {
        variant,
        order: r,
        layout: instance.layout.clone(),
        moments,
        objective: LinearForm::of_polynomial(&instance.objective),
        blocks,
    }
}

/// Sparse preordering relaxation: `M_{r-r(g_J)}(g_J u, xy) ⪰ 0` for all
/// `J ⊆ I_xy` and `M_{r-r(h_K)}(h_K u, yz) ⪰ 0` for all `K ⊆ I_yz`.
pub fn assemble_sparse_schmudgen(instance: &ProblemInstance, r: u32) -> Result<ConicProgram> {
    check_order(r, Variant::SchmudgenSparse.min_order(instance))?;
    let nvars = instance.nvars();
    let mut blocks = localizing_blocks(
        &instance.layout,
        Family::Xy,
        enumerate_products(&instance.g_constraints, nvars)?,
        r,
    )?;
    blocks.extend(localizing_blocks(
        &instance.layout,
        Family::Yz,
        enumerate_products(&instance.h_constraints, nvars)?,
        r,
    )?);
    Ok(finish(Variant::SchmudgenSparse, instance, r, blocks))
}

/// Sparse quadratic-module relaxation: only `J = ∅` and singletons on each side.
pub fn assemble_sparse_putinar(instance: &ProblemInstance, r: u32) -> Result<ConicProgram> {
    check_order(r, Variant::PutinarSparse.min_order(instance))?;
    let nvars = instance.nvars();
    let mut blocks = localizing_blocks(
        &instance.layout,
        Family::Xy,
        singleton_products(&instance.g_constraints, nvars),
        r,
    )?;
    blocks.extend(localizing_blocks(
        &instance.layout,
        Family::Yz,
        singleton_products(&instance.h_constraints, nvars),
        r,
    )?);
    Ok(finish(Variant::PutinarSparse, instance, r, blocks))
}

/// Dense baseline over the full preordering `P(g, h)` in all variables.
pub fn assemble_dense(instance: &ProblemInstance, r: u32) -> Result<ConicProgram> {
    let mut all = instance.g_constraints.clone();
    all.extend(instance.h_constraints.iter().cloned());
    let products = enumerate_products(&all, instance.nvars())?;
    check_order(r, Variant::Dense.min_order(instance))?;
    let blocks = localizing_blocks(&instance.layout, Family::Full, products, r)?;
    Ok(finish(Variant::Dense, instance, r, blocks))
}

/// Cartesian-product relaxation: `M_r(u, xy) ⪰ 0`, `M_{r-r(g_J)}(g_J u, x) ⪰ 0`
/// for nonempty `J ⊆ I_x`, and the yz preordering blocks.
///
/// The `J = ∅` block on X is a principal submatrix of `M_r(u, xy)` and is
/// not repeated.
pub fn assemble_product(instance: &ProblemInstance, r: u32) -> Result<ConicProgram> {
    if !instance.product_mode {
        return Err(Error::Mode);
    }
    check_order(r, Variant::Product.min_order(instance))?;
    let nvars = instance.nvars();
    let layout = &instance.layout;
    let mut blocks = vec![(
        BlockLabel {
            family: Family::SigmaXy,
            subset: Vec::new(),
            weight: Polynomial::one(nvars),
            order: r,
        },
        build_moment_matrix(layout, Block::Xy, r),
    )];
    let g_products: Vec<SubsetProduct> = enumerate_products(&instance.g_constraints, nvars)?
        .into_iter()
        .filter(|sp| !sp.subset.is_empty())
        .collect();
    blocks.extend(localizing_blocks(layout, Family::X, g_products, r)?);
    blocks.extend(localizing_blocks(
        layout,
        Family::Yz,
        enumerate_products(&instance.h_constraints, nvars)?,
        r,
    )?);
    Ok(finish(Variant::Product, instance, r, blocks))
}

pub fn assemble_conic(variant: Variant, instance: &ProblemInstance, r: u32) -> Result<ConicProgram> {
    match variant {
        Variant::SchmudgenSparse => assemble_sparse_schmudgen(instance, r),
        Variant::PutinarSparse => assemble_sparse_putinar(instance, r),
        Variant::Dense => assemble_dense(instance, r),
        Variant::Product => assemble_product(instance, r),
        Variant::Krivine => Err(Error::InvalidArgument(
            "the krivine variant assembles a linear program".into(),
        )),
    }
}

/// All `(alpha, beta)` with `sum_j deg(g_j) (alpha_j + beta_j) <= 2r`.
fn exponent_pairs(degrees: &[u32], budget: u32) -> Vec<(Vec<u32>, Vec<u32>)> {
    let mut out = Vec::new();
    let len = degrees.len();
    let mut alpha = vec![0u32; len];
    let mut beta = vec![0u32; len];
    fn rec(
        j: usize,
        left: u32,
        degrees: &[u32],
        alpha: &mut Vec<u32>,
        beta: &mut Vec<u32>,
        out: &mut Vec<(Vec<u32>, Vec<u32>)>,
    ) {
        if j == degrees.len() {
            out.push((alpha.clone(), beta.clone()));
            return;
        }
        let d = degrees[j];
        let max_total = left / d;
        for total in 0..=max_total {
            for a in (0..=total).rev() {
                alpha[j] = a;
                beta[j] = total - a;
                rec(j + 1, left - total * d, degrees, alpha, beta, out);
            }
        }
        alpha[j] = 0;
        beta[j] = 0;
    }
    rec(0, budget, degrees, &mut alpha, &mut beta, &mut out);
    out
}

fn krivine_rows(constraints: &[Polynomial], nvars: usize, family: Family, r: u32) -> Result<Vec<(RowLabel, LinearForm)>> {
    if constraints.is_empty() {
        return Ok(Vec::new());
    }
    let degrees: Vec<u32> = constraints.iter().map(Polynomial::degree).collect();
    if degrees.contains(&0) {
        return Err(Error::InvalidArgument(
            "constant constraints have no finite Krivine index set".into(),
        ));
    }
    let one = Polynomial::one(nvars);
    let complements: Vec<Polynomial> = constraints
        .iter()
        .map(|g| one.sub(g).expect("same layout"))
        .collect();
    let mut rows = Vec::new();
    for (alpha, beta) in exponent_pairs(&degrees, 2 * r) {
        let mut product = one.clone();
        for j in 0..constraints.len() {
            product = product.mul(&constraints[j].pow(alpha[j]))?;
            product = product.mul(&complements[j].pow(beta[j]))?;
        }
        let form = LinearForm::of_polynomial(&product);
        rows.push((
            RowLabel {
                family,
                alpha,
                beta,
                polynomial: product,
            },
            form,
        ));
    }
    Ok(rows)
}

/// Krivine LP: `L_u(g^alpha (1-g)^beta) >= 0` over `G_r`, likewise over `H_r`.
pub fn assemble_krivine(instance: &ProblemInstance, r: u32) -> Result<LinearProgram> {
    if !instance.normalized {
        return Err(Error::NormalizationRequired);
    }
    check_order(r, Variant::Krivine.min_order(instance))?;
    let nvars = instance.nvars();
    let mut rows = krivine_rows(&instance.g_constraints, nvars, Family::Xy, r)?;
    rows.extend(krivine_rows(&instance.h_constraints, nvars, Family::Yz, r)?);
    let moments = collect_moments(
        nvars,
        &instance.objective,
        rows.iter().flat_map(|(_, f)| f.terms().iter().map(|(_, e)| e)),
    );
    Ok(LinearProgram {
        order: r,
        layout: instance.layout.clone(),
        moments,
        objective: LinearForm::of_polynomial(&instance.objective),
        rows,
    })
}

/// Divides each constraint by its bound so that `0 <= g_j / B_j <= 1` on K.
/// `bounds` lists the `g` bounds followed by the `h` bounds.
pub fn normalize_krivine(instance: &ProblemInstance, bounds: &[Rational]) -> Result<ProblemInstance> {
    let ng = instance.g_constraints.len();
    let nh = instance.h_constraints.len();
    if bounds.len() != ng + nh {
        return Err(Error::InvalidArgument(format!(
            "{} normalization bounds given for {} constraints",
            bounds.len(),
            ng + nh
        )));
    }
    if let Some(b) = bounds.iter().find(|b| !b.is_positive()) {
        return Err(Error::Bound(b.to_string()));
    }
    let mut out = instance.clone();
    for (j, b) in bounds.iter().enumerate() {
        let inv = Rational::one() / b;
        if j < ng {
            out.g_constraints[j] = instance.g_constraints[j].scale(&inv);
            out.scaling.xy[j] = &instance.scaling.xy[j] * b;
        } else {
            let k = j - ng;
            out.h_constraints[k] = instance.h_constraints[k].scale(&inv);
            out.scaling.yz[k] = &instance.scaling.yz[k] * b;
        }
    }
    out.normalized = true;
    Ok(out)
}

/// Upper bounds `B_j >= max_K g_j` from a Putinar relaxation of
/// `min -g_j` at one order above its minimum, padded by `margin`.
pub fn krivine_auto_bounds(instance: &ProblemInstance, tol: f64, margin: f64) -> Result<Vec<Rational>> {
    let mut bounds = Vec::new();
    let constraints: Vec<&Polynomial> = instance.g_constraints.iter().chain(&instance.h_constraints).collect();
    for c in constraints {
        let mut aux = instance.clone();
        aux.objective = c.neg();
        aux.product_mode = false;
        let r = Variant::PutinarSparse.min_order(&aux) + 1;
        let program = assemble_sparse_putinar(&aux, r)?;
        let report = crate::solver::solve_sdp(&program, tol, crate::solver::DEFAULT_MAX_ITER);
        if report.status != crate::solver::SolveStatus::Optimal {
            return Err(Error::Solver(format!(
                "normalization bound for {}: {}",
                c.display(&instance.layout),
                report.status
            )));
        }
        let upper = -report.primal_objective + margin;
        let b = rational_from_f64(upper);
        if !b.is_positive() {
            return Err(Error::Bound(format!("{upper}")));
        }
        bounds.push(b);
    }
    Ok(bounds)
}
