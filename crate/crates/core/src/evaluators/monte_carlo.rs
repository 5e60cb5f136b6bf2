//! Seeded Monte-Carlo estimates, used to cross-check the exact evaluators.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::rational::to_f64;
use crate::stopping_policies::{walk, PolicyKind};
use crate::tree_model::{InstanceTree, PathSampler};

use super::EvalError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub mean: f64,
    /// Sample standard deviation over `√trials`; zero when `trials = 1`.
    pub stderr: f64,
    pub trials: u64,
    /// Set when the standard error is not meaningful (a single trial).
    pub degenerate: bool,
}

impl McEstimate {
    /// `|exact - mean| <= k * stderr`, with a float tolerance for zero-variance
    /// samples.
    pub fn agrees_with(&self, exact: f64, k: f64) -> bool {
        let slack = 1e-9 * exact.abs().max(1.0);
        (exact - self.mean).abs() <= k * self.stderr + slack
    }
}

/// Trial `t` draws its path and its policy seed from the ChaCha stream
/// `(seed, t)`, so results do not depend on thread scheduling.
pub fn monte_carlo_cost(
    tree: &InstanceTree,
    kind: PolicyKind,
    trials: u64,
    seed: u64,
) -> Result<McEstimate, EvalError> {
    if trials == 0 {
        return Err(EvalError::NoTrials);
    }
    let sampler = PathSampler::new(tree);
    let costs: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(trial);
            let path = sampler.sample(&mut rng);
            let policy = kind.build(rng.gen());
            to_f64(&walk(policy, &path.values).cost())
        })
        .collect();

    let n = costs.len() as f64;
    let mean = costs.iter().sum::<f64>() / n;
    let stderr = if trials > 1 {
        let var = costs.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    } else {
        0.0
    };
    Ok(McEstimate { mean, stderr, trials, degenerate: trials == 1 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluators::exact_cost;
    use crate::rational::{int, ratio};
    use crate::tree_model::TreeBuilder;

    fn small() -> InstanceTree {
        let mut t = TreeBuilder::new();
        let r = t.add(int(3));
        let a = t.add_child(r, int(1), ratio(1, 2));
        t.add_child(r, int(5), ratio(1, 2));
        t.add_child(a, int(0), ratio(1, 4));
        t.add_child(a, int(1), ratio(3, 4));
        t.build(r).unwrap()
    }

    #[test]
    fn reproducible() {
        let tree = small();
        let a = monte_carlo_cost(&tree, PolicyKind::Rand, 2000, 9).unwrap();
        let b = monte_carlo_cost(&tree, PolicyKind::Rand, 2000, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn single_trial_is_flagged() {
        let est = monte_carlo_cost(&small(), PolicyKind::Det, 1, 0).unwrap();
        assert!(est.degenerate);
        assert_eq!(est.stderr, 0.0);
        assert!(monte_carlo_cost(&small(), PolicyKind::Det, 0, 0).is_err());
    }

    #[test]
    fn agrees_with_exact() {
        let tree = small();
        for kind in PolicyKind::ALL {
            let est = monte_carlo_cost(&tree, kind, 20_000, 1).unwrap();
            let exact = exact_cost(&tree, kind).to_f64();
            assert!(est.agrees_with(exact, 4.0), "{kind}: {exact} vs {est:?}");
        }
    }
}
