//! Online stopping rules for the super-martingale stopping problem.
//!
//! A policy sees the realized values `v_0, v_1, ...` one at a time and
//! answers [`Decision::Stop`] or [`Decision::Continue`]. Stopping after
//! observing `v_i` costs `i + v_i`. The horizon is enforced by [`walk`]: at
//! the last value of a path the policy stops whatever it answers.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_traits::One;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::q_estimator::{QFunction, QValue};
use crate::rational::{from_f64, Rational, E_OVER_E_MINUS_ONE};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Continue,
    Stop,
}

pub trait StoppingPolicy {
    fn name(&self) -> &'static str;

    /// Observes the next value `v_i` and decides whether to stop at `i`.
    fn observe(&mut self, value: &Rational) -> Decision;
}

impl<P: StoppingPolicy + ?Sized> StoppingPolicy for Box<P> {
    fn name(&self) -> &'static str {
        (**self).name()
    }

    fn observe(&mut self, value: &Rational) -> Decision {
        (**self).observe(value)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StopOutcome {
    pub index: usize,
    pub value: Rational,
    /// The path ended before the policy chose to stop.
    pub forced: bool,
}

impl StopOutcome {
    pub fn cost(&self) -> Rational {
        Rational::from_integer(BigInt::from(self.index)) + &self.value
    }
}

/// Runs a single-use policy down one realized path.
pub fn walk<P: StoppingPolicy>(mut policy: P, path: &[Rational]) -> StopOutcome {
    assert!(!path.is_empty(), "a path has at least the root value");
    let last = path.len() - 1;
    for (i, value) in path.iter().enumerate() {
        let decision = policy.observe(value);
        if decision == Decision::Stop || i == last {
            return StopOutcome { index: i, value: value.clone(), forced: decision == Decision::Continue };
        }
    }
    unreachable!("loop returns at the last value")
}

fn segment_end(q: &QFunction, i: usize) -> QValue {
    q.at_index(i + 1)
}

/// Stops at the first `i` such that `Q_p(t) = 1` for some `t ∈ (i, i+1]`.
#[derive(Debug, Clone, Default)]
pub struct DeterministicStopping {
    q: QFunction,
}

impl DeterministicStopping {
    pub fn new() -> Self {
        Self { q: QFunction::new() }
    }
}

impl StoppingPolicy for DeterministicStopping {
    fn name(&self) -> &'static str {
        "det"
    }

    fn observe(&mut self, value: &Rational) -> Decision {
        let i = self.q.covered();
        self.q.push(value.clone()).expect("instance values are nonnegative");
        let one = Rational::one();
        let start_below = matches!(self.q.at_index(i), QValue::Finite(ref q) if *q < one);
        let end_reaches = match segment_end(&self.q, i) {
            QValue::Infinite => true,
            QValue::Finite(q) => q >= one,
        };
        if start_below && end_reaches {
            Decision::Stop
        } else {
            Decision::Continue
        }
    }
}

/// Inverse CDF of the threshold density `e^ρ / (e - 1)` on `[0, 1]`.
pub fn threshold_from_uniform(u: f64) -> f64 {
    ((std::f64::consts::E - 1.0) * u).ln_1p()
}

/// CDF `F(ρ) = (e^ρ - 1) / (e - 1)` of the random threshold.
pub fn threshold_cdf(rho: f64) -> f64 {
    rho.clamp(0.0, 1.0).exp_m1() / (std::f64::consts::E - 1.0)
}

/// Draws a threshold `ρ` once, then stops at the first `i` whose segment
/// `[i, i+1]` contains `t` with `Q_p(t) = ρ`.
#[derive(Debug, Clone)]
pub struct RandomizedStopping {
    rho: Rational,
    q: QFunction,
}

impl RandomizedStopping {
    pub fn with_threshold(rho: Rational) -> Self {
        Self { rho, q: QFunction::new() }
    }

    pub fn from_rng<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let u: f64 = rng.gen();
        let rho = threshold_from_uniform(u).clamp(0.0, 1.0);
        Self::with_threshold(from_f64(rho).expect("threshold is finite"))
    }

    pub fn from_seed(seed: u64) -> Self {
        Self::from_rng(&mut ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn threshold(&self) -> &Rational {
        &self.rho
    }
}

impl StoppingPolicy for RandomizedStopping {
    fn name(&self) -> &'static str {
        "rand"
    }

    fn observe(&mut self, value: &Rational) -> Decision {
        let i = self.q.covered();
        self.q.push(value.clone()).expect("instance values are nonnegative");
        let start_ok = matches!(self.q.at_index(i), QValue::Finite(ref q) if *q <= self.rho);
        let end_ok = match segment_end(&self.q, i) {
            QValue::Infinite => true,
            QValue::Finite(q) => self.rho <= q,
        };
        if start_ok && end_ok {
            Decision::Stop
        } else {
            Decision::Continue
        }
    }
}

/// Stops at each step with probability `min{1, 1/v_i}`.
#[derive(Debug, Clone)]
pub struct ThrowCoin {
    rng: ChaCha8Rng,
}

impl ThrowCoin {
    pub fn from_seed(seed: u64) -> Self {
        Self { rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    /// `min{1, 1/v}`, with `v = 0` stopping surely.
    pub fn stop_probability(value: &Rational) -> Rational {
        if *value <= Rational::one() {
            Rational::one()
        } else {
            value.recip()
        }
    }
}

impl StoppingPolicy for ThrowCoin {
    fn name(&self) -> &'static str {
        "coin"
    }

    fn observe(&mut self, value: &Rational) -> Decision {
        if *value <= Rational::one() {
            return Decision::Stop;
        }
        let u: f64 = self.rng.gen();
        let u = from_f64(u).expect("uniform draw is finite");
        if u * value < Rational::one() {
            Decision::Stop
        } else {
            Decision::Continue
        }
    }
}

/// Stops as soon as `v_i <= i`.
#[derive(Debug, Clone, Default)]
pub struct ClassicSkiRental {
    index: usize,
}

impl ClassicSkiRental {
    pub fn new() -> Self {
        Self::default()
    }
}

impl StoppingPolicy for ClassicSkiRental {
    fn name(&self) -> &'static str {
        "ski"
    }

    fn observe(&mut self, value: &Rational) -> Decision {
        let i = Rational::from_integer(BigInt::from(self.index));
        self.index += 1;
        if *value <= i {
            Decision::Stop
        } else {
            Decision::Continue
        }
    }
}

/// Stops as soon as `min{v_0, ..., v_i} <= i`.
#[derive(Debug, Clone, Default)]
pub struct RevisedSkiRental {
    index: usize,
    min: Option<Rational>,
}

impl RevisedSkiRental {
    pub fn new() -> Self {
        Self::default()
    }
}

impl StoppingPolicy for RevisedSkiRental {
    fn name(&self) -> &'static str {
        "ski-min"
    }

    fn observe(&mut self, value: &Rational) -> Decision {
        let i = Rational::from_integer(BigInt::from(self.index));
        self.index += 1;
        let min = match self.min.take() {
            Some(m) if m <= *value => m,
            _ => value.clone(),
        };
        let stop = min <= i;
        self.min = Some(min);
        if stop {
            Decision::Stop
        } else {
            Decision::Continue
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PolicyKind {
    #[serde(rename = "det")]
    Det,
    #[serde(rename = "rand")]
    Rand,
    #[serde(rename = "coin")]
    Coin,
    #[serde(rename = "ski")]
    Ski,
    #[serde(rename = "ski-min")]
    SkiMin,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 5] =
        [PolicyKind::Det, PolicyKind::Rand, PolicyKind::Coin, PolicyKind::Ski, PolicyKind::SkiMin];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Det => "det",
            PolicyKind::Rand => "rand",
            PolicyKind::Coin => "coin",
            PolicyKind::Ski => "ski",
            PolicyKind::SkiMin => "ski-min",
        }
    }

    pub fn is_deterministic(self) -> bool {
        !matches!(self, PolicyKind::Rand | PolicyKind::Coin)
    }

    /// Proven competitive ratio against the offline optimum, if any.
    pub fn competitive_bound(self) -> Option<f64> {
        match self {
            PolicyKind::Det | PolicyKind::Coin => Some(2.0),
            PolicyKind::Rand => Some(E_OVER_E_MINUS_ONE),
            PolicyKind::Ski | PolicyKind::SkiMin => None,
        }
    }

    /// A fresh single-use policy; `seed` feeds the randomized ones.
    pub fn build(self, seed: u64) -> Box<dyn StoppingPolicy + Send> {
        match self {
            PolicyKind::Det => Box::new(DeterministicStopping::new()),
            PolicyKind::Rand => Box::new(RandomizedStopping::from_seed(seed)),
            PolicyKind::Coin => Box::new(ThrowCoin::from_seed(seed)),
            PolicyKind::Ski => Box::new(ClassicSkiRental::new()),
            PolicyKind::SkiMin => Box::new(RevisedSkiRental::new()),
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PolicyKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown policy {s:?} (expected det, rand, coin, ski, ski-min)"))
    }
}

/// Convenience for tests and examples: repeats `value` `len` times.
pub fn constant_path(value: i64, len: usize) -> Vec<Rational> {
    vec![Rational::from_integer(BigInt::from(value)); len]
}
