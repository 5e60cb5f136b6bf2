//! Expansion of a randomized signaling scheme into a deterministic one over
//! copies of the scenarios with a uniform prior.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

use crate::rational::Rational;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SignalingError {
    #[error("prior has {prior} entries but the scheme has {scheme} rows")]
    LengthMismatch { prior: usize, scheme: usize },
    #[error("prior mass of scenario {0} is negative")]
    NegativePrior(usize),
    #[error("prior masses sum to {0}, expected 1")]
    PriorSum(Rational),
    #[error("scenario {scenario} signal {signal} has probability {prob} outside [0,1]")]
    SignalProbability { scenario: usize, signal: usize, prob: Rational },
    #[error("signal probabilities of scenario {scenario} sum to {sum}, expected 1")]
    SchemeSum { scenario: usize, sum: Rational },
    #[error("scenario {scenario} lists signal {signal} twice")]
    DuplicateSignal { scenario: usize, signal: usize },
    #[error("expansion needs {0} copies, which does not fit in memory")]
    TooManyCopies(BigInt),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ScenarioCopy {
    pub scenario: usize,
    pub signal: usize,
}

/// Copies of the original scenarios, uniformly weighted, each mapped to a
/// single signal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeterministicSignaling {
    pub copies: Vec<ScenarioCopy>,
}

impl DeterministicSignaling {
    pub fn copy_count(&self) -> usize {
        self.copies.len()
    }

    /// Mass of each copy under the uniform prior.
    pub fn copy_mass(&self) -> Rational {
        Rational::new(BigInt::one(), BigInt::from(self.copies.len()))
    }

    pub fn signal_of(&self, copy: usize) -> usize {
        self.copies[copy].signal
    }

    pub fn copies_of(&self, scenario: usize) -> usize {
        self.copies.iter().filter(|c| c.scenario == scenario).count()
    }

    /// Posterior over original scenarios after observing `signal`, computed
    /// by counting copies. `None` if no copy emits the signal.
    pub fn posterior(&self, n_scenarios: usize, signal: usize) -> Option<Vec<Rational>> {
        let mut counts = vec![0usize; n_scenarios];
        let mut total = 0usize;
        for copy in self.copies.iter().filter(|c| c.signal == signal) {
            counts[copy.scenario] += 1;
            total += 1;
        }
        if total == 0 {
            return None;
        }
        Some(counts.into_iter().map(|c| Rational::new(BigInt::from(c), BigInt::from(total))).collect())
    }
}

/// `scheme[s]` lists `(signal, Pr(f(s) = signal))` for scenario `s`.
///
/// The number of copies is the least common denominator of all joint masses
/// `prior(s) * Pr(f(s) = y)`, so each (scenario, signal) pair receives an
/// integral number of copies.
pub fn determinize_signaling(
    prior: &[Rational],
    scheme: &[Vec<(usize, Rational)>],
) -> Result<DeterministicSignaling, SignalingError> {
    if prior.len() != scheme.len() {
        return Err(SignalingError::LengthMismatch { prior: prior.len(), scheme: scheme.len() });
    }
    let mut total = Rational::zero();
    for (s, p) in prior.iter().enumerate() {
        if p.is_negative() {
            return Err(SignalingError::NegativePrior(s));
        }
        total += p;
    }
    if !total.is_one() {
        return Err(SignalingError::PriorSum(total));
    }

    let mut joint: Vec<(ScenarioCopy, Rational)> = Vec::new();
    for (s, row) in scheme.iter().enumerate() {
        let mut seen = BTreeMap::new();
        let mut sum = Rational::zero();
        for (signal, prob) in row {
            if prob.is_negative() || *prob > Rational::one() {
                return Err(SignalingError::SignalProbability { scenario: s, signal: *signal, prob: prob.clone() });
            }
            if seen.insert(*signal, ()).is_some() {
                return Err(SignalingError::DuplicateSignal { scenario: s, signal: *signal });
            }
            sum += prob;
            let mass = &prior[s] * prob;
            if !mass.is_zero() {
                joint.push((ScenarioCopy { scenario: s, signal: *signal }, mass));
            }
        }
        if !sum.is_one() {
            return Err(SignalingError::SchemeSum { scenario: s, sum });
        }
    }

    let lcd = joint.iter().fold(BigInt::one(), |acc, (_, m)| acc.lcm(m.denom()));
    let mut copies = Vec::new();
    for (copy, mass) in joint {
        let count = (mass * Rational::from_integer(lcd.clone())).to_integer();
        let count =
            count.to_usize().filter(|&c| c <= 1 << 28).ok_or_else(|| SignalingError::TooManyCopies(lcd.clone()))?;
        copies.extend(std::iter::repeat_n(copy, count));
    }
    Ok(DeterministicSignaling { copies })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, ratio};

    /// Bayes rule on the original randomized scheme.
    fn bayes(prior: &[Rational], scheme: &[Vec<(usize, Rational)>], signal: usize) -> Vec<Rational> {
        let likelihood: Vec<Rational> = scheme
            .iter()
            .map(|row| row.iter().find(|(y, _)| *y == signal).map(|(_, p)| p.clone()).unwrap_or_else(Rational::zero))
            .collect();
        let evidence: Rational = prior.iter().zip(&likelihood).map(|(p, l)| p * l).sum();
        prior.iter().zip(&likelihood).map(|(p, l)| p * l / &evidence).collect()
    }

    #[test]
    fn deterministic_scheme_is_identity() {
        let prior = vec![ratio(1, 2), ratio(1, 2)];
        let scheme = vec![vec![(0, int(1))], vec![(1, int(1))]];
        let det = determinize_signaling(&prior, &scheme).unwrap();
        assert_eq!(det.copies, vec![ScenarioCopy { scenario: 0, signal: 0 }, ScenarioCopy { scenario: 1, signal: 1 }]);
    }

    #[test]
    fn coin_flip_signal_gets_two_copies() {
        let det = determinize_signaling(&[int(1)], &[vec![(0, ratio(1, 2)), (1, ratio(1, 2))]]).unwrap();
        assert_eq!(det.copy_count(), 2);
        assert_eq!(det.signal_of(0), 0);
        assert_eq!(det.signal_of(1), 1);
    }

    #[test]
    fn posterior_matches_bayes() {
        let prior = vec![ratio(1, 3), ratio(2, 3)];
        let scheme = vec![vec![(0, ratio(1, 2)), (1, ratio(1, 2))], vec![(0, int(1))]];
        let det = determinize_signaling(&prior, &scheme).unwrap();
        assert_eq!(det.copy_count(), 6);
        assert_eq!(det.copies_of(0), 2);
        assert_eq!(det.copies_of(1), 4);
        for y in [0, 1] {
            assert_eq!(det.posterior(2, y).unwrap(), bayes(&prior, &scheme, y));
        }
        assert_eq!(det.copy_mass(), ratio(1, 6));
    }

    #[test]
    fn rejects_bad_tables() {
        assert!(matches!(
            determinize_signaling(&[ratio(1, 2)], &[vec![(0, int(1))]]),
            Err(SignalingError::PriorSum(_))
        ));
        assert!(matches!(
            determinize_signaling(&[int(1)], &[vec![(0, ratio(1, 3))]]),
            Err(SignalingError::SchemeSum { .. })
        ));
        assert!(matches!(
            determinize_signaling(&[int(1)], &[vec![(0, ratio(1, 2)), (0, ratio(1, 2))]]),
            Err(SignalingError::DuplicateSignal { .. })
        ));
        assert!(matches!(determinize_signaling(&[int(1)], &[]), Err(SignalingError::LengthMismatch { .. })));
    }
}
