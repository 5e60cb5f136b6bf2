//! Hard instance families and a seeded fuzzer of valid super-martingale trees.
//!
//! Families with a multiplier `e^n` use the rational `ê = exp_approx(n)` and
//! survival probability exactly `1/ê`, so each node's conditional mean
//! equals its value. Branches absorbed at zero are padded with zero chains
//! to the full horizon.

use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rational::{exp_approx, int, Rational};
use crate::tree_model::{InstanceTree, NodeId, TreeBuilder};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GeneratorError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

fn invalid(message: impl Into<String>) -> GeneratorError {
    GeneratorError::InvalidParameter(message.into())
}

fn pad_zeros(b: &mut TreeBuilder, mut at: NodeId, from_depth: usize, horizon: usize) {
    for _ in from_depth..horizon {
        at = b.add_child(at, Rational::zero(), Rational::one());
    }
}

/// `X_0 = 1`; `X_i = 0` w.p. `1/(i+1)`, else `X_i = i + 1`.
pub fn harmonic_instance(n: usize) -> Result<InstanceTree, GeneratorError> {
    if n == 0 {
        return Err(invalid("harmonic instance needs n >= 1"));
    }
    let mut b = TreeBuilder::new();
    let root = b.add(int(1));
    let mut alive = root;
    for i in 1..=n {
        let i_big = BigInt::from(i);
        let next = BigInt::from(i + 1);
        let dead = b.add_child(alive, Rational::zero(), Rational::new(BigInt::one(), next.clone()));
        pad_zeros(&mut b, dead, i, n);
        alive = b.add_child(alive, Rational::from_integer(next.clone()), Rational::new(i_big, next));
    }
    Ok(b.build(root).expect("construction is a tree"))
}

/// Geometric survival chain: start at `start`, multiply by `ê` w.p. `1/ê`,
/// otherwise drop to zero, for `rounds` rounds; then zeros down to `horizon`.
fn survival_chain(start: Rational, multiplier: &Rational, rounds: usize, horizon: usize) -> InstanceTree {
    let survive = multiplier.recip();
    let die = Rational::one() - &survive;
    let mut b = TreeBuilder::new();
    let root = b.add(start.clone());
    let mut alive = root;
    let mut value = start;
    for depth in 1..=rounds {
        value = &value * multiplier;
        let dead = b.add_child(alive, Rational::zero(), die.clone());
        pad_zeros(&mut b, dead, depth, horizon);
        alive = b.add_child(alive, value.clone(), survive.clone());
    }
    pad_zeros(&mut b, alive, rounds, horizon);
    b.build(root).expect("construction is a tree")
}

/// `X_0 = n`, `X_i = ê X_{i-1}` w.p. `1/ê` (else 0) for `i <= n`, and
/// `X_{n+1} = 0` on every branch.
pub fn exp_trap_instance(n: u32) -> Result<InstanceTree, GeneratorError> {
    if n == 0 {
        return Err(invalid("exp-trap instance needs n >= 1"));
    }
    let n_usize = n as usize;
    Ok(survival_chain(int(i64::from(n)), &exp_approx(n), n_usize, n_usize + 1))
}

/// `X_0 = N`, `X_{i+1} = ê X_i` w.p. `1/ê` (else 0), up to `horizon`.
/// The optimum stops at the root, while the prophet pays about 1.
pub fn benchmark_gap_instance(n: u32, horizon: usize) -> Result<InstanceTree, GeneratorError> {
    if n == 0 {
        return Err(invalid("benchmark-gap instance needs N >= 1"));
    }
    if horizon < n as usize {
        return Err(invalid(format!("benchmark-gap horizon {horizon} is below N = {n}")));
    }
    Ok(survival_chain(int(i64::from(n)), &exp_approx(n), horizon, horizon))
}

/// Deterministic chain: `X_i = B` for `i < T`, `X_i = 0` for `T <= i <= horizon`.
pub fn ski_rental_instance(b: &Rational, t: usize, horizon: usize) -> Result<InstanceTree, GeneratorError> {
    if !b.is_positive() {
        return Err(invalid("ski-rental price B must be positive"));
    }
    if t > horizon {
        return Err(invalid(format!("T = {t} exceeds horizon {horizon}")));
    }
    let values: Vec<Rational> = (0..=horizon).map(|i| if i < t { b.clone() } else { Rational::zero() }).collect();
    Ok(InstanceTree::chain(&values))
}

/// Ski rental with a random season length: `dist` lists `(T, Pr(T))` with
/// `1 <= T <= horizon`. The surviving branch at depth `i` splits into a zero
/// branch (`T = i + 1`) and a branch still at `B`.
pub fn ski_rental_mixture(
    b: &Rational,
    dist: &[(usize, Rational)],
    horizon: usize,
) -> Result<InstanceTree, GeneratorError> {
    if !b.is_positive() {
        return Err(invalid("ski-rental price B must be positive"));
    }
    let mut mass = vec![Rational::zero(); horizon + 1];
    for (t, p) in dist {
        if *t == 0 || *t > horizon {
            return Err(invalid(format!("season length {t} outside 1..={horizon}")));
        }
        if p.is_negative() {
            return Err(invalid(format!("Pr(T = {t}) is negative")));
        }
        mass[*t] += p;
    }
    if mass.iter().sum::<Rational>() != Rational::one() {
        return Err(invalid("season-length probabilities must sum to 1"));
    }

    let mut builder = TreeBuilder::new();
    let root = builder.add(b.clone());
    let mut alive = root;
    let mut remaining = Rational::one();
    for (depth, here) in mass.iter().enumerate().skip(1) {
        if remaining.is_zero() {
            break;
        }
        let ends_now = here / &remaining;
        remaining -= here;
        if !ends_now.is_zero() {
            let dead = builder.add_child(alive, Rational::zero(), ends_now.clone());
            pad_zeros(&mut builder, dead, depth, horizon);
        }
        if ends_now.is_one() {
            break;
        }
        alive = builder.add_child(alive, b.clone(), Rational::one() - ends_now);
    }
    Ok(builder.build(root).expect("construction is a tree"))
}

const VALUE_GRID: i64 = 64;
const MAX_WEIGHT: u32 = 4;
const MAX_RAW: i64 = 64;

fn floor_to_grid(x: &Rational) -> Rational {
    let grid = BigInt::from(VALUE_GRID);
    let scaled = (x * Rational::from_integer(grid.clone())).floor().to_integer();
    Rational::new(scaled, grid)
}

/// Seeded random tree whose leaves all sit at `depth`.
///
/// Children get probabilities proportional to weights in `1..=4`. Raw child
/// values are rescaled so their mean is `v·u` with `u` uniform on a `1/64`
/// grid, then floored to multiples of `1/64`; flooring only lowers the mean.
pub fn random_supermartingale(
    depth: usize,
    max_branching: usize,
    value_scale: u64,
    seed: u64,
) -> Result<InstanceTree, GeneratorError> {
    if max_branching == 0 {
        return Err(invalid("max_branching must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = TreeBuilder::new();
    let root_value = Rational::from_integer(BigInt::from(rng.gen_range(0..=value_scale)));
    let root = b.add(root_value.clone());
    let mut frontier = vec![(root, root_value)];
    for _ in 0..depth {
        let mut next = Vec::new();
        for (parent, value) in frontier {
            let k = rng.gen_range(1..=max_branching);
            let weights: Vec<u32> = (0..k).map(|_| rng.gen_range(1..=MAX_WEIGHT)).collect();
            let total: u32 = weights.iter().sum();
            let probs: Vec<Rational> =
                weights.iter().map(|&w| Rational::new(BigInt::from(w), BigInt::from(total))).collect();
            let raw: Vec<Rational> = (0..k).map(|_| int(rng.gen_range(0..=MAX_RAW))).collect();
            let target = &value * Rational::new(BigInt::from(rng.gen_range(0..=VALUE_GRID)), BigInt::from(VALUE_GRID));
            let raw_mean: Rational = probs.iter().zip(&raw).map(|(p, r)| p * r).sum();
            for (p, r) in probs.into_iter().zip(raw) {
                let child_value =
                    if raw_mean.is_zero() { Rational::zero() } else { floor_to_grid(&(r * &target / &raw_mean)) };
                let id = b.add_child(parent, child_value.clone(), p);
                next.push((id, child_value));
            }
        }
        frontier = next;
    }
    Ok(b.build(root).expect("construction is a tree"))
}

/// A named instance family with its parameters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GeneratorSpec {
    Harmonic { n: usize },
    ExpTrap { n: u32 },
    BenchmarkGap { n: u32, horizon: usize },
    SkiRental { b: u64, t: usize, horizon: usize },
    Random { depth: usize, max_branching: usize, value_scale: u64, seed: u64 },
}

impl GeneratorSpec {
    pub fn generate(&self) -> Result<InstanceTree, GeneratorError> {
        match *self {
            GeneratorSpec::Harmonic { n } => harmonic_instance(n),
            GeneratorSpec::ExpTrap { n } => exp_trap_instance(n),
            GeneratorSpec::BenchmarkGap { n, horizon } => benchmark_gap_instance(n, horizon),
            GeneratorSpec::SkiRental { b, t, horizon } => {
                ski_rental_instance(&Rational::from_integer(BigInt::from(b)), t, horizon)
            }
            GeneratorSpec::Random { depth, max_branching, value_scale, seed } => {
                random_supermartingale(depth, max_branching, value_scale, seed)
            }
        }
    }
}

impl fmt::Display for GeneratorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GeneratorSpec::Harmonic { n } => write!(f, "harmonic-n{n}"),
            GeneratorSpec::ExpTrap { n } => write!(f, "exp-trap-n{n}"),
            GeneratorSpec::BenchmarkGap { n, horizon } => write!(f, "benchmark-gap-n{n}-h{horizon}"),
            GeneratorSpec::SkiRental { b, t, horizon } => write!(f, "ski-rental-b{b}-t{t}-h{horizon}"),
            GeneratorSpec::Random { depth, max_branching, value_scale, seed } => {
                write!(f, "random-d{depth}-k{max_branching}-s{value_scale}-seed{seed}")
            }
        }
    }
}
