//! Online stopping on super-martingale trees and min-sum set cover with
//! costly feedback, with exact rational evaluators and adversarial
//! instance generators.

pub mod cli;
pub mod evaluators;
pub mod generators;
pub mod mssc;
pub mod q_estimator;
pub mod rational;
pub mod stopping_policies;
pub mod tree_model;
