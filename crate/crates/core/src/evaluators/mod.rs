//! Exact and sampled expected costs of stopping policies, the offline
//! optimum, the prophet benchmark and competitive-ratio reports.

mod exact;
mod monte_carlo;
mod report;

pub use exact::{
    exact_cost, exact_deterministic_cost, exact_policy_cost, exact_randomized_cost, opt_dp, opt_dp_costed,
    prophet_value, randomized_threshold_cost, throw_coin_cost, ExactCost, ExpIntegral, ExpTerm, OptSolution,
};
pub use monte_carlo::{monte_carlo_cost, McEstimate};
pub use report::{competitive_report, write_csv, write_json_lines, EvalReport, McConfig, Ratio, BOUND_TOLERANCE};

use thiserror::Error;

use crate::stopping_policies::PolicyKind;
use crate::tree_model::NodeId;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("policy {0} is randomized; use the randomized evaluator")]
    NotDeterministic(PolicyKind),
    #[error("policy {0} is deterministic; use the deterministic evaluator")]
    NotRandomized(PolicyKind),
    #[error("node {0} carries scenarios, not a value")]
    NotAValueTree(NodeId),
    #[error("Monte-Carlo estimate needs at least one trial")]
    NoTrials,
}
