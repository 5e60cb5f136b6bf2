//! Min-sum set cover where a learner walks a feedback tree over scenario
//! subsets while querying boxes, either receiving one signal per round for
//! free or paying a per-node cost for the next signal.
//!
//! A scenario is covered by the first queried box holding a 1. Costs count
//! the covering query as 1; buying adds the signal costs paid before it.

mod adversary;
mod greedy;
mod instance;
mod learners;
mod oracle;

pub use adversary::{
    adversarial_feedback_buying, adversarial_feedback_td, buy_report, buying_learner, covering_learner, td_report,
    AdversaryMode, AdversaryReport, BuyAdversary, CounterCost, TdAdversary, BUY_LEARNERS, TD_LEARNERS,
};
pub use greedy::{greedy_buying, greedy_time_dependent};
pub use instance::{
    parse_instance, random_instance, serialize_instance, FeedbackSpec, MsscInstance, Problem, RandomInstanceSpec,
};
pub use learners::{
    greedy_box, greedy_buying_learner, run_buying, run_time_dependent, Action, BuyUntilRevealed, BuyingAction,
    BuyingContext, BuyingLearner, CoveringLearner, Evaluation, Greedy, LearnerContext, LearnerTrace, NoFeedback,
    NodeAssignment, Reduction,
};
pub use oracle::{
    memo_limit, opt_buying, opt_buying_with_limit, opt_time_dependent, opt_time_dependent_with_limit,
    DEFAULT_MEMO_LIMIT, MEMO_LIMIT_ENV,
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MsscError {
    #[error("invalid instance: {0}")]
    Invalid(String),
    #[error("malformed instance file: {0}")]
    Format(String),
    #[error("learner {learner} made an invalid move on scenario {scenario}: {detail}")]
    InvalidAction { learner: String, scenario: usize, detail: String },
    #[error("learner {learner} left scenario {scenario} uncovered after {steps} steps")]
    Stalled { learner: String, scenario: usize, steps: usize },
    #[error("state space of {nodes} nodes x 2^{boxes} query sets exceeds the limit {limit}")]
    StateSpace { nodes: usize, boxes: usize, limit: u64 },
}
