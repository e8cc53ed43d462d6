#![allow(dead_code)]

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sparsepos::poly::{int, ratio, BlockLayout, ExponentVector, Polynomial, ProblemInstance};

pub fn var(nvars: usize, i: usize) -> Polynomial {
    Polynomial::var(nvars, i)
}

/// `1 - Σ x_i²` over the listed variables.
pub fn ball(nvars: usize, vars: &[usize]) -> Polynomial {
    vars.iter()
        .fold(Polynomial::one(nvars), |acc, &i| acc.sub(&var(nvars, i).pow(2)).unwrap())
}

pub fn twoballs_objective() -> Polynomial {
    let v = |i| var(3, i);
    v(0).add(&v(0).sub(&v(1)).unwrap().pow(2))
        .unwrap()
        .add(&v(1).sub(&v(2)).unwrap().pow(2))
        .unwrap()
        .add(&v(2))
        .unwrap()
}

pub fn twoballs() -> ProblemInstance {
    let l = BlockLayout::with_counts(1, 1, 1).unwrap();
    ProblemInstance::new(l, twoballs_objective(), vec![ball(3, &[0, 1])], vec![ball(3, &[1, 2])]).unwrap()
}

/// `g = 1 - x²` on X only; `h` the yz ball.
pub fn product() -> ProblemInstance {
    let l = BlockLayout::with_counts(1, 1, 1).unwrap();
    ProblemInstance::new(l, twoballs_objective(), vec![ball(3, &[0])], vec![ball(3, &[1, 2])]).unwrap()
}

pub fn interval() -> ProblemInstance {
    let l = BlockLayout::with_counts(1, 0, 0).unwrap();
    ProblemInstance::new(l, var(1, 0), vec![ball(1, &[0])], vec![]).unwrap()
}

/// `x` subject to `(1 - x)/2 >= 0`, i.e. `0 <= g <= 1` on `[-1, 1]`.
pub fn halved_interval() -> ProblemInstance {
    let l = BlockLayout::with_counts(1, 0, 0).unwrap();
    let g = Polynomial::one(1).sub(&var(1, 0)).unwrap().scale(&ratio(1, 2));
    ProblemInstance::new(l, var(1, 0), vec![g], vec![]).unwrap()
}

pub fn constant() -> ProblemInstance {
    let l = BlockLayout::with_counts(1, 1, 1).unwrap();
    ProblemInstance::new(l, Polynomial::constant(3, int(5)), vec![ball(3, &[0, 1])], vec![ball(3, &[1, 2])]).unwrap()
}

/// Degree-2 polynomial on the listed variables with coefficients `k/100`,
/// `k` uniform in `[-100, 100]`.
fn random_quadratic(rng: &mut ChaCha8Rng, nvars: usize, vars: &[usize], with_constant: bool) -> Polynomial {
    let mut p = Polynomial::zero(nvars);
    let coef = |rng: &mut ChaCha8Rng| ratio(rng.gen_range(-100..=100), 100);
    if with_constant {
        p.add_term(ExponentVector::zero(nvars), coef(rng));
    }
    for (a, &i) in vars.iter().enumerate() {
        p.add_term(ExponentVector::unit(nvars, i), coef(rng));
        for &j in &vars[a..] {
            let e = ExponentVector::unit(nvars, i).add(&ExponentVector::unit(nvars, j));
            p.add_term(e, coef(rng));
        }
    }
    p
}

/// Five variables `x1 x2 | y | z1 z2` with seeded random quadratic data.
pub fn random_five() -> ProblemInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(20240531);
    let l = BlockLayout::with_counts(2, 1, 2).unwrap();
    let fxy = random_quadratic(&mut rng, 5, &[0, 1, 2], true);
    let fyz = random_quadratic(&mut rng, 5, &[2, 3, 4], false);
    ProblemInstance::new(l, fxy.add(&fyz).unwrap(), vec![ball(5, &[0, 1, 2])], vec![ball(5, &[2, 3, 4])]).unwrap()
}

pub const TWOBALLS_FILE: &str = "\
# two overlapping balls
vars x : X; y : Y; z : Z
minimize x + (x - y)^2 + (y - z)^2 + z
st g1: 1 - x^2 - y^2 >= 0
st h1: 1 - y^2 - z^2 >= 0
";
