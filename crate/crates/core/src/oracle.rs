//! Brute-force reference minimum over a uniform grid.
//!
//! Because `f = f_xy + f_yz` and every constraint lives on one side, the
//! minimum over the product grid splits exactly: for each grid value of `y`
//! the `x` and `z` parts are minimized independently. [`grid_min`] uses that
//! split; [`grid_min_full`] enumerates the full product for cross-checking.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::poly::{check_sparsity, rational_to_f64, Polynomial, ProblemInstance};

/// Limit on evaluated grid points.
pub const GRID_LIMIT: u128 = 100_000_000;
/// Constraints are accepted at grid points where they are at least this.
pub const SLACK: f64 = -1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct OracleResult {
    pub minimum: f64,
    pub argmin: Vec<f64>,
    /// Actual spacing, after fitting an integral number of steps per axis.
    pub step: f64,
    pub feasible_count: u128,
    /// `Lipschitz · step · sqrt(d)` over the box.
    pub margin: f64,
}

/// Polynomial compiled for fast floating evaluation.
#[derive(Clone, Debug)]
struct Compiled(Vec<(f64, Vec<(usize, i32)>)>);

impl Compiled {
    fn new(p: &Polynomial) -> Self {
        Compiled(
            p.terms()
                .map(|(e, c)| {
                    let powers = e
                        .exponents()
                        .iter()
                        .enumerate()
                        .filter(|(_, &k)| k > 0)
                        .map(|(i, &k)| (i, k as i32))
                        .collect();
                    (rational_to_f64(c), powers)
                })
                .collect(),
        )
    }

    fn eval(&self, point: &[f64]) -> f64 {
        self.0
            .iter()
            .map(|(c, powers)| c * powers.iter().map(|&(i, k)| point[i].powi(k)).product::<f64>())
            .sum()
    }
}

struct Axis {
    values: Vec<Vec<f64>>,
}

impl Axis {
    fn count(&self) -> u128 {
        self.values.iter().map(|v| v.len() as u128).product()
    }

    /// Writes the `index`-th point (first variable most significant) into
    /// `point[offset..]`.
    fn fill(&self, mut index: usize, point: &mut [f64], offset: usize) {
        for (k, vals) in self.values.iter().enumerate().rev() {
            let n = vals.len();
            point[offset + k] = vals[index % n];
            index /= n;
        }
    }
}

fn axis_values(lo: f64, hi: f64, step: f64) -> (Vec<f64>, f64) {
    let width = hi - lo;
    if width == 0.0 {
        return (vec![lo], step);
    }
    let n = ((width / step).round() as usize).max(1);
    let h = width / n as f64;
    ((0..=n).map(|i| if i == n { hi } else { lo + h * i as f64 }).collect(), h)
}

fn check_inputs(instance: &ProblemInstance, bounds: &[(f64, f64)], step: f64) -> Result<()> {
    if bounds.len() != instance.nvars() {
        return Err(Error::InvalidArgument(format!(
            "box has {} intervals for {} variables",
            bounds.len(),
            instance.nvars()
        )));
    }
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::InvalidArgument("grid step must be positive".into()));
    }
    if bounds.iter().any(|(lo, hi)| !(lo <= hi) || !lo.is_finite() || !hi.is_finite()) {
        return Err(Error::InvalidArgument("box intervals need finite lo <= hi".into()));
    }
    Ok(())
}

/// Bound on `|∂f/∂x_i|` over the box, combined in the Euclidean norm.
pub fn lipschitz_bound(f: &Polynomial, bounds: &[(f64, f64)]) -> f64 {
    let radius: Vec<f64> = bounds.iter().map(|(lo, hi)| lo.abs().max(hi.abs())).collect();
    let mut grad = vec![0.0; bounds.len()];
    for (e, c) in f.terms() {
        let c = rational_to_f64(c).abs();
        let ex = e.exponents();
        for i in 0..ex.len() {
            if ex[i] == 0 {
                continue;
            }
            let mut t = c * ex[i] as f64;
            for (j, &k) in ex.iter().enumerate() {
                let k = if j == i { k - 1 } else { k };
                t *= radius[j].powi(k as i32);
            }
            grad[i] += t;
        }
    }
    grad.iter().map(|g| g * g).sum::<f64>().sqrt()
}

fn axes(instance: &ProblemInstance, bounds: &[(f64, f64)], step: f64) -> (Axis, Axis, Axis, f64) {
    let l = &instance.layout;
    let mut actual = 0.0f64;
    let mut make = |range: std::ops::Range<usize>| Axis {
        values: range
            .map(|i| {
                let (v, h) = axis_values(bounds[i].0, bounds[i].1, step);
                if v.len() > 1 {
                    actual = actual.max(h);
                }
                v
            })
            .collect(),
    };
    let x = make(l.x_range());
    let y = make(l.y_range());
    let z = make(l.z_range());
    (x, y, z, if actual > 0.0 { actual } else { step })
}

fn feasible(constraints: &[Compiled], point: &[f64]) -> bool {
    constraints.iter().all(|g| g.eval(point) >= SLACK)
}

/// Best value of one side for a fixed `y`, plus the number of feasible
/// points and the first minimizing index.
fn side_min(axis: &Axis, offset: usize, f: &Compiled, constraints: &[Compiled], point: &mut [f64]) -> (f64, u128, usize) {
    let mut best = f64::INFINITY;
    let mut arg = 0usize;
    let mut count = 0u128;
    for idx in 0..axis.count() as usize {
        axis.fill(idx, point, offset);
        if feasible(constraints, point) {
            count += 1;
            let v = f.eval(point);
            if v < best {
                best = v;
                arg = idx;
            }
        }
    }
    (best, count, arg)
}

/// Grid minimum of `f` over the feasible points of a box, split along `y`.
pub fn grid_min(instance: &ProblemInstance, bounds: &[(f64, f64)], step: f64) -> Result<OracleResult> {
    check_inputs(instance, bounds, step)?;
    instance.validate()?;
    let layout = &instance.layout;
    let (fxy, fyz) = check_sparsity(&instance.objective, layout)?;
    let (fxy, fyz) = (Compiled::new(&fxy), Compiled::new(&fyz));
    let g: Vec<Compiled> = instance.g_constraints.iter().map(Compiled::new).collect();
    let h: Vec<Compiled> = instance.h_constraints.iter().map(Compiled::new).collect();
    let (xa, ya, za, actual) = axes(instance, bounds, step);
    let evaluated = ya.count().saturating_mul(xa.count().saturating_add(za.count()));
    if evaluated > GRID_LIMIT {
        return Err(Error::GridCapacity {
            points: evaluated,
            limit: GRID_LIMIT,
        });
    }
    let d = instance.nvars();
    let ny = ya.count() as usize;
    let per_y: Vec<(f64, u128, Vec<f64>)> = (0..ny)
        .into_par_iter()
        .map(|iy| {
            let mut point = vec![0.0; d];
            ya.fill(iy, &mut point, layout.y_range().start);
            let (bx, cx, ax) = side_min(&xa, layout.x_range().start, &fxy, &g, &mut point);
            let (bz, cz, az) = side_min(&za, layout.z_range().start, &fyz, &h, &mut point);
            xa.fill(ax, &mut point, layout.x_range().start);
            za.fill(az, &mut point, layout.z_range().start);
            (bx + bz, cx * cz, point)
        })
        .collect();
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut count = 0u128;
    for (v, c, p) in per_y {
        count += c;
        if c > 0 && best.as_ref().is_none_or(|(b, _)| v < *b) {
            best = Some((v, p));
        }
    }
    let (_, argmin) = best.ok_or(Error::EmptyFeasible)?;
    Ok(OracleResult {
        minimum: Compiled::new(&instance.objective).eval(&argmin),
        argmin,
        step: actual,
        feasible_count: count,
        margin: lipschitz_bound(&instance.objective, bounds) * actual * (d as f64).sqrt(),
    })
}

/// Enumerates every point of the product grid.
pub fn grid_min_full(instance: &ProblemInstance, bounds: &[(f64, f64)], step: f64) -> Result<OracleResult> {
    check_inputs(instance, bounds, step)?;
    let (xa, ya, za, actual) = axes(instance, bounds, step);
    let all = Axis {
        values: xa.values.into_iter().chain(ya.values).chain(za.values).collect(),
    };
    let total = all.count();
    if total > GRID_LIMIT {
        return Err(Error::GridCapacity {
            points: total,
            limit: GRID_LIMIT,
        });
    }
    let f = Compiled::new(&instance.objective);
    let cons: Vec<Compiled> = instance
        .g_constraints
        .iter()
        .chain(&instance.h_constraints)
        .map(Compiled::new)
        .collect();
    let d = instance.nvars();
    const CHUNK: usize = 1 << 14;
    let total = total as usize;
    let chunks: Vec<(f64, usize, u128)> = (0..total.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut point = vec![0.0; d];
            let mut best = (f64::INFINITY, usize::MAX, 0u128);
            for idx in c * CHUNK..((c + 1) * CHUNK).min(total) {
                all.fill(idx, &mut point, 0);
                if feasible(&cons, &point) {
                    best.2 += 1;
                    let v = f.eval(&point);
                    if v < best.0 {
                        best.0 = v;
                        best.1 = idx;
                    }
                }
            }
            best
        })
        .collect();
    let count = chunks.iter().map(|c| c.2).sum();
    let (minimum, idx, _) = chunks
        .into_iter()
        .filter(|c| c.1 != usize::MAX)
        .fold((f64::INFINITY, usize::MAX, 0), |a, c| if c.0 < a.0 { c } else { a });
    if idx == usize::MAX {
        return Err(Error::EmptyFeasible);
    }
    let mut argmin = vec![0.0; d];
    all.fill(idx, &mut argmin, 0);
    Ok(OracleResult {
        minimum,
        argmin,
        step: actual,
        feasible_count: count,
        margin: lipschitz_bound(&instance.objective, bounds) * actual * (d as f64).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::{int, BlockLayout};

    fn univariate(f: Polynomial, constrained: bool) -> ProblemInstance {
        let l = BlockLayout::with_counts(1, 0, 0).unwrap();
        let g = if constrained {
            vec![Polynomial::one(1).sub(&Polynomial::var(1, 0).pow(2)).unwrap()]
        } else {
            vec![]
        };
        ProblemInstance::new(l, f, g, vec![]).unwrap()
    }

    pub(crate) fn twoballs() -> ProblemInstance {
        let l = BlockLayout::with_counts(1, 1, 1).unwrap();
        let v = |i| Polynomial::var(3, i);
        let f = v(0)
            .add(&v(0).sub(&v(1)).unwrap().pow(2))
            .unwrap()
            .add(&v(1).sub(&v(2)).unwrap().pow(2))
            .unwrap()
            .add(&v(2))
            .unwrap();
        let one = Polynomial::one(3);
        let g = one.sub(&v(0).pow(2)).unwrap().sub(&v(1).pow(2)).unwrap();
        let h = one.sub(&v(1).pow(2)).unwrap().sub(&v(2).pow(2)).unwrap();
        ProblemInstance::new(l, f, vec![g], vec![h]).unwrap()
    }

    #[test]
    fn square_minimum() {
        let r = grid_min(&univariate(Polynomial::var(1, 0).pow(2), false), &[(-1.0, 1.0)], 0.01).unwrap();
        assert_eq!(r.minimum, 0.0);
        assert!(r.argmin[0].abs() < 1e-12);
        assert_eq!(r.feasible_count, 201);
    }

    #[test]
    fn boundary_minimum() {
        let r = grid_min(&univariate(Polynomial::var(1, 0), true), &[(-1.0, 1.0)], 0.001).unwrap();
        assert_eq!(r.minimum, -1.0);
        assert_eq!(r.argmin, vec![-1.0]);
    }

    #[test]
    fn split_matches_full_enumeration() {
        let inst = twoballs();
        let b = [(-1.0, 1.0); 3];
        let a = grid_min(&inst, &b, 0.05).unwrap();
        let f = grid_min_full(&inst, &b, 0.05).unwrap();
        assert!((a.minimum - f.minimum).abs() < 1e-12);
        assert_eq!(a.argmin, f.argmin);
        assert_eq!(a.feasible_count, f.feasible_count);
    }

    #[test]
    fn halving_step_stays_within_margin() {
        let inst = twoballs();
        let b = [(-1.0, 1.0); 3];
        let coarse = grid_min(&inst, &b, 0.04).unwrap();
        let fine = grid_min(&inst, &b, 0.02).unwrap();
        assert!(fine.minimum <= coarse.minimum + 1e-12);
        assert!(coarse.minimum - fine.minimum <= coarse.margin);
    }

    #[test]
    fn errors() {
        let l = BlockLayout::with_counts(1, 0, 0).unwrap();
        let g = Polynomial::constant(1, int(-1));
        let inst = ProblemInstance::new(l, Polynomial::var(1, 0), vec![g], vec![]).unwrap();
        assert_eq!(grid_min(&inst, &[(-1.0, 1.0)], 0.1), Err(Error::EmptyFeasible));
        let inst = twoballs();
        assert!(matches!(
            grid_min_full(&inst, &[(-1.0, 1.0); 3], 1e-3),
            Err(Error::GridCapacity { .. })
        ));
        assert!(matches!(grid_min(&inst, &[(-1.0, 1.0); 2], 0.1), Err(Error::InvalidArgument(_))));
        assert!(matches!(grid_min(&inst, &[(-1.0, 1.0); 3], 0.0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn deterministic_across_runs() {
        let inst = twoballs();
        let a = grid_min(&inst, &[(-1.0, 1.0); 3], 0.01).unwrap();
        let b = grid_min(&inst, &[(-1.0, 1.0); 3], 0.01).unwrap();
        assert_eq!(a, b);
    }
}
