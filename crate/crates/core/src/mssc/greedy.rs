//! Greedy learners simulated on all feedback branches at once: each state
//! holds the scenarios still uncovered on that branch.

use super::instance::MsscInstance;
use super::learners::{greedy_box, Action, Evaluation, LearnerTrace};
use crate::tree_model::NodeId;

struct Branch {
    node: NodeId,
    queried: u64,
    uncovered: Vec<usize>,
    queries: usize,
    queries_at_node: u64,
    spend: u64,
}

fn traces_from(actions: Vec<Vec<Action>>, cover: Vec<usize>, spend: Vec<u64>) -> Vec<LearnerTrace> {
    actions
        .into_iter()
        .zip(cover.into_iter().zip(spend))
        .enumerate()
        .map(|(s, (actions, (cover_time, feedback_spend)))| LearnerTrace {
            scenario: s,
            actions,
            cover_time,
            feedback_spend,
        })
        .collect()
}

fn query(inst: &MsscInstance, branch: &mut Branch, actions: &mut [Vec<Action>], cover: &mut [usize]) {
    let b = greedy_box(&inst.problem, &branch.uncovered);
    branch.queried |= 1 << b;
    branch.queries += 1;
    branch.queries_at_node += 1;
    for &s in &branch.uncovered {
        let covered = inst.problem.has_one(s, b);
        actions[s].push(Action::Query { box_index: b, covered });
        if covered {
            cover[s] = branch.queries;
        }
    }
    branch.uncovered.retain(|&s| !inst.problem.has_one(s, b));
}

fn split(inst: &MsscInstance, branch: Branch, stack: &mut Vec<Branch>) {
    for child in &inst.feedback.node(branch.node).children {
        let uncovered: Vec<usize> =
            inst.scenarios_at(child.id).iter().copied().filter(|s| branch.uncovered.contains(s)).collect();
        if !uncovered.is_empty() {
            stack.push(Branch {
                node: child.id,
                uncovered,
                queried: branch.queried,
                queries: branch.queries,
                queries_at_node: 0,
                spend: branch.spend,
            });
        }
    }
}

fn initial(inst: &MsscInstance) -> Branch {
    Branch {
        node: inst.feedback.root(),
        queried: 0,
        uncovered: (0..inst.problem.n_scenarios()).collect(),
        queries: 0,
        queries_at_node: 0,
        spend: 0,
    }
}

/// Greedy with one free signal per round: query, then descend one level.
pub fn greedy_time_dependent(inst: &MsscInstance) -> Evaluation {
    let n = inst.problem.n_scenarios();
    let mut actions = vec![Vec::new(); n];
    let mut cover = vec![0; n];
    let mut stack = vec![initial(inst)];
    while let Some(mut branch) = stack.pop() {
        query(inst, &mut branch, &mut actions, &mut cover);
        if branch.uncovered.is_empty() {
            continue;
        }
        if inst.feedback.node(branch.node).is_leaf() {
            stack.push(branch);
        } else {
            split(inst, branch, &mut stack);
        }
    }
    Evaluation::from_traces(&inst.problem, traces_from(actions, cover, vec![0; n]))
}

/// Greedy buying: at a node whose next signal costs `c`, make `c` greedy
/// queries, then pay `c` for the signal. No signal exists past a leaf.
pub fn greedy_buying(inst: &MsscInstance) -> Evaluation {
    let n = inst.problem.n_scenarios();
    let mut actions = vec![Vec::new(); n];
    let mut cover = vec![0; n];
    let mut spend = vec![0; n];
    let mut stack = vec![initial(inst)];
    while let Some(mut branch) = stack.pop() {
        let node = inst.feedback.node(branch.node);
        if node.is_leaf() || branch.queries_at_node < node.cost {
            query(inst, &mut branch, &mut actions, &mut cover);
            if !branch.uncovered.is_empty() {
                stack.push(branch);
            }
            continue;
        }
        branch.spend += node.cost;
        for &s in &branch.uncovered {
            actions[s].push(Action::Buy { cost: node.cost });
            spend[s] = branch.spend;
        }
        split(inst, branch, &mut stack);
    }
    Evaluation::from_traces(&inst.problem, traces_from(actions, cover, spend))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mssc::instance::{FeedbackSpec, Problem};
    use crate::rational::{int, ratio};

    fn revealing(n: usize, cost: u64) -> MsscInstance {
        let all: Vec<usize> = (0..n).collect();
        let kids = all.iter().map(|&s| FeedbackSpec::leaf(vec![s])).collect();
        MsscInstance::from_nested(Problem::singletons(n), FeedbackSpec::node(all, cost, kids)).unwrap()
    }

    #[test]
    fn flat_singletons_cost_average_position() {
        let inst = MsscInstance::without_feedback(Problem::singletons(3)).unwrap();
        assert_eq!(greedy_time_dependent(&inst).expected_cost, int(2));
    }

    #[test]
    fn revealing_children_cover_on_second_query() {
        // The root query is uninformed; the revelation arrives before query 2.
        let eval = greedy_time_dependent(&revealing(3, 1));
        assert_eq!(eval.expected_cost, ratio(5, 3));
        assert!(eval.traces.iter().all(|t| t.cover_time <= 2));
    }

    #[test]
    fn buying_with_revealing_first_signal() {
        let eval = greedy_buying(&revealing(4, 1));
        // Box 0 covers scenario 0 at once; the rest pay 1 and cover next.
        assert_eq!(eval.traces[0].total_cost(), 1);
        for s in 1..4 {
            assert_eq!(eval.traces[s].total_cost(), 3);
            assert_eq!(
                eval.traces[s].actions,
                vec![
                    Action::Query { box_index: 0, covered: false },
                    Action::Buy { cost: 1 },
                    Action::Query { box_index: s, covered: true }
                ]
            );
        }
        assert!(eval.expected_cost <= int(3));
        assert_eq!(eval.expected_cost, ratio(10, 4));
    }

    #[test]
    fn huge_costs_degenerate_to_plain_greedy() {
        let inst = revealing(4, 10);
        let plain = greedy_time_dependent(&MsscInstance::without_feedback(Problem::singletons(4)).unwrap());
        let eval = greedy_buying(&inst);
        assert_eq!(eval.expected_cost, plain.expected_cost);
        assert_eq!(eval.expected_spend, int(0));
    }
}
