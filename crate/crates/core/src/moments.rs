//! Moment sequences, the Riesz functional, and symbolic moment/localizing
//! matrices over a block of variables.
//!
//! Matrices always reference moments by their full `(x, y, z)` exponent
//! vector, so an xy-matrix and a yz-matrix built on the same layout share
//! the pure-Y moments without any extra bookkeeping.

use std::collections::HashMap;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::poly::{monomial_basis, rational_to_f64, Block, BlockLayout, ExponentVector, Polynomial, Rational};

/// `ceil(deg(g) / 2)`.
pub fn half_degree(g: &Polynomial) -> u32 {
    g.degree().div_ceil(2)
}

/// Truncated moment sequence `u`.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentVector {
    pub layout: BlockLayout,
    values: HashMap<ExponentVector, f64>,
    truncation: u32,
}

impl MomentVector {
    pub fn new(layout: BlockLayout, truncation: u32) -> Self {
        MomentVector {
            layout,
            values: HashMap::new(),
            truncation,
        }
    }

    pub fn truncation(&self) -> u32 {
        self.truncation
    }

    pub fn set(&mut self, index: ExponentVector, value: f64) -> Result<()> {
        if index.len() != self.layout.nvars() {
            return Err(Error::Layout {
                expected: self.layout.nvars(),
                found: index.len(),
            });
        }
        if index.degree() > self.truncation {
            return Err(Error::Truncation {
                index: index.display(&self.layout),
            });
        }
        self.values.insert(index, value);
        Ok(())
    }

    pub fn get(&self, index: &ExponentVector) -> Result<f64> {
        self.values.get(index).copied().ok_or_else(|| Error::Truncation {
            index: index.display(&self.layout),
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ExponentVector, &f64)> {
        self.values.iter()
    }

    /// Moments of the Dirac measure at `point`, for all indices of degree `<= 2r`.
    pub fn dirac(layout: &BlockLayout, point: &[f64], r: u32) -> Result<Self> {
        Self::mixture(layout, &[1.0], &[point.to_vec()], r)
    }

    /// Moments of `sum_i w_i delta_{p_i}`.
    pub fn mixture(layout: &BlockLayout, weights: &[f64], points: &[Vec<f64>], r: u32) -> Result<Self> {
        if weights.len() != points.len() {
            return Err(Error::Dimension("one weight per point required".into()));
        }
        for p in points {
            if p.len() != layout.nvars() {
                return Err(Error::Layout {
                    expected: layout.nvars(),
                    found: p.len(),
                });
            }
        }
        let mut u = MomentVector::new(layout.clone(), 2 * r);
        for e in monomial_basis(layout, Block::Xyz, 2 * r) {
            let value = weights
                .iter()
                .zip(points)
                .map(|(w, p)| {
                    w * p
                        .iter()
                        .zip(e.exponents())
                        .map(|(x, &k)| x.powi(k as i32))
                        .product::<f64>()
                })
                .sum();
            u.values.insert(e, value);
        }
        Ok(u)
    }
}

/// `moments_of_dirac` under its operation name.
pub fn moments_of_dirac(layout: &BlockLayout, point: &[f64], r: u32) -> Result<MomentVector> {
    MomentVector::dirac(layout, point, r)
}

/// `L_u(f) = sum_a f_a u_a`.
pub fn riesz(f: &Polynomial, u: &MomentVector) -> Result<f64> {
    f.terms()
        .map(|(e, c)| Ok(rational_to_f64(c) * u.get(e)?))
        .sum()
}

/// Linear combination of moments `sum c_i u_{e_i}`.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct LinearForm(pub Vec<(Rational, ExponentVector)>);

impl LinearForm {
    /// The form `L_u(p)` of a polynomial.
    pub fn of_polynomial(p: &Polynomial) -> Self {
        LinearForm(p.terms().map(|(e, c)| (c.clone(), e.clone())).collect())
    }

    pub fn terms(&self) -> &[(Rational, ExponentVector)] {
        &self.0
    }

    pub fn evaluate(&self, u: &MomentVector) -> Result<f64> {
        self.0
            .iter()
            .map(|(c, e)| Ok(rational_to_f64(c) * u.get(e)?))
            .sum()
    }

    pub fn max_degree(&self) -> u32 {
        self.0.iter().map(|(_, e)| e.degree()).max().unwrap_or(0)
    }
}

/// Square matrix of linear forms in the moments, indexed by a monomial basis.
#[derive(Clone, Debug, PartialEq)]
pub struct SymbolicMatrix {
    basis: Vec<ExponentVector>,
    entries: Vec<LinearForm>,
}

impl SymbolicMatrix {
    pub fn size(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[ExponentVector] {
        &self.basis
    }

    pub fn entry(&self, i: usize, j: usize) -> &LinearForm {
        &self.entries[i * self.basis.len() + j]
    }

    /// Every moment index referenced by some entry.
    pub fn referenced(&self) -> impl Iterator<Item = &ExponentVector> {
        self.entries.iter().flat_map(|f| f.0.iter().map(|(_, e)| e))
    }

    /// Principal submatrix on the basis elements accepted by `keep`.
    pub fn restrict<F: Fn(&ExponentVector) -> bool>(&self, keep: F) -> SymbolicMatrix {
        let idx: Vec<usize> = (0..self.size()).filter(|&i| keep(&self.basis[i])).collect();
        let mut entries = Vec::with_capacity(idx.len() * idx.len());
        for &i in &idx {
            for &j in &idx {
                entries.push(self.entry(i, j).clone());
            }
        }
        SymbolicMatrix {
            basis: idx.iter().map(|&i| self.basis[i].clone()).collect(),
            entries,
        }
    }

    pub fn is_symmetric(&self) -> bool {
        let k = self.size();
        (0..k).all(|i| (0..i).all(|j| self.entry(i, j) == self.entry(j, i)))
    }
}

pub fn build_moment_matrix(layout: &BlockLayout, block: Block, r: u32) -> SymbolicMatrix {
    let one = Polynomial::one(layout.nvars());
    build_localizing_matrix(&one, layout, block, r).expect("constant weight lies in every block")
}

/// `M_r(g u)` on `block`: entry `(a, b)` is `sum_c g_c u_{a+b+c}`.
pub fn build_localizing_matrix(
    g: &Polynomial,
    layout: &BlockLayout,
    block: Block,
    r: u32,
) -> Result<SymbolicMatrix> {
    if g.nvars() != layout.nvars() {
        return Err(Error::Layout {
            expected: layout.nvars(),
            found: g.nvars(),
        });
    }
    if !g.supported_on(layout, block) {
        return Err(Error::BlockViolation {
            name: g.display(layout),
            block: block.to_string(),
        });
    }
    let basis = monomial_basis(layout, block, r);
    let k = basis.len();
    let weight: Vec<(Rational, ExponentVector)> = if g.is_zero() {
        Vec::new()
    } else {
        g.terms().map(|(e, c)| (c.clone(), e.clone())).collect()
    };
    let mut entries = vec![LinearForm::default(); k * k];
    for i in 0..k {
        for j in i..k {
            let shift = basis[i].add(&basis[j]);
            let form = LinearForm(weight.iter().map(|(c, e)| (c.clone(), e.add(&shift))).collect());
            entries[j * k + i] = form.clone();
            entries[i * k + j] = form;
        }
    }
    Ok(SymbolicMatrix { basis, entries })
}

/// Substitute moment values into a symbolic matrix.
pub fn instantiate(sym: &SymbolicMatrix, u: &MomentVector) -> Result<DMatrix<f64>> {
    let k = sym.size();
    let mut m = DMatrix::zeros(k, k);
    for i in 0..k {
        for j in i..k {
            let v = sym.entry(i, j).evaluate(u)?;
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    Ok(m)
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    m.clone()
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

pub fn inf_norm(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |a, v| a.max(v.abs()))
}

/// PSD up to `-1e-8 (1 + ||m||_inf)`.
pub fn is_psd(m: &DMatrix<f64>) -> bool {
    min_eigenvalue(m) >= -1e-8 * (1.0 + inf_norm(m))
}

/// Coefficient vector of `f` over `basis`; errors if `f` has a monomial off the basis.
pub fn coefficients_on(f: &Polynomial, basis: &[ExponentVector]) -> Result<Vec<f64>> {
    let mut v = vec![0.0; basis.len()];
    for (e, c) in f.terms() {
        let pos = basis
            .iter()
            .position(|b| b == e)
            .ok_or_else(|| Error::Dimension("polynomial has a monomial outside the basis".into()))?;
        v[pos] = rational_to_f64(c);
    }
    Ok(v)
}
