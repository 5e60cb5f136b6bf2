use std::fmt;
use std::io::Write;

use num_traits::Zero;
use serde::{Serialize, Serializer};

use crate::rational::{format_rational, to_f64, Rational};
use crate::stopping_policies::PolicyKind;
use crate::tree_model::InstanceTree;

use super::{exact_cost, monte_carlo_cost, opt_dp, prophet_value, McEstimate};

/// `ALG / OPT`, with `OPT = 0` mapped to `∞` (or `1` when `ALG = 0` too).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Ratio {
    Finite(f64),
    Infinite,
}

impl Ratio {
    pub fn new(alg: f64, opt: &Rational) -> Self {
        if opt.is_zero() {
            if alg.abs() <= 1e-12 {
                Ratio::Finite(1.0)
            } else {
                Ratio::Infinite
            }
        } else {
            Ratio::Finite(alg / to_f64(opt))
        }
    }

    pub fn exceeds(&self, bound: f64, tolerance: f64) -> bool {
        match *self {
            Ratio::Finite(r) => r > bound + tolerance,
            Ratio::Infinite => true,
        }
    }

    pub fn as_f64(&self) -> f64 {
        match *self {
            Ratio::Finite(r) => r,
            Ratio::Infinite => f64::INFINITY,
        }
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ratio::Finite(r) => write!(f, "{r}"),
            Ratio::Infinite => f.write_str("inf"),
        }
    }
}

impl Serialize for Ratio {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match *self {
            Ratio::Finite(r) => s.serialize_f64(r),
            Ratio::Infinite => s.serialize_str("inf"),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub instance: String,
    pub policy: PolicyKind,
    pub exact_cost: f64,
    /// `"p/q"` for rational costs, otherwise the exponential closed form.
    pub exact_cost_expr: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mc: Option<McEstimate>,
    /// Monte-Carlo mean more than four standard errors from the exact cost.
    pub mc_disagrees: bool,
    pub opt: String,
    pub opt_value: f64,
    pub prophet: String,
    pub prophet_value: f64,
    pub ratio: Ratio,
    /// Informational: no policy is competitive against the prophet.
    pub prophet_ratio: Ratio,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound: Option<f64>,
    pub bound_violated: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct McConfig {
    pub trials: u64,
    pub seed: u64,
}

/// Float slack when comparing the closed-form `rand` cost with a bound.
pub const BOUND_TOLERANCE: f64 = 1e-12;

pub fn competitive_report(
    instance: &str,
    tree: &InstanceTree,
    policies: &[PolicyKind],
    mc: Option<McConfig>,
) -> Vec<EvalReport> {
    let opt = opt_dp(tree).value;
    let prophet = prophet_value(tree);
    policies
        .iter()
        .map(|&policy| {
            let exact = exact_cost(tree, policy);
            let cost = exact.to_f64();
            let mc = mc.map(|c| monte_carlo_cost(tree, policy, c.trials, c.seed).expect("trials checked by caller"));
            let ratio = Ratio::new(cost, &opt);
            let bound = policy.competitive_bound();
            let scale = to_f64(&opt).max(1.0);
            EvalReport {
                instance: instance.to_string(),
                policy,
                exact_cost: cost,
                exact_cost_expr: exact.to_string(),
                mc_disagrees: mc.is_some_and(|m| !m.degenerate && !m.agrees_with(cost, 4.0)),
                mc,
                opt: format_rational(&opt),
                opt_value: to_f64(&opt),
                prophet: format_rational(&prophet),
                prophet_value: to_f64(&prophet),
                ratio,
                prophet_ratio: Ratio::new(cost, &prophet),
                bound,
                bound_violated: bound.is_some_and(|b| ratio.exceeds(b, BOUND_TOLERANCE * scale)),
            }
        })
        .collect()
}

pub fn write_json_lines<W: Write>(reports: &[EvalReport], mut out: W) -> std::io::Result<()> {
    for report in reports {
        serde_json::to_writer(&mut out, report)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

#[derive(Serialize)]
struct CsvRow<'a> {
    instance: &'a str,
    policy: &'a str,
    exact_cost: f64,
    mc_mean: Option<f64>,
    mc_stderr: Option<f64>,
    opt: f64,
    prophet: f64,
    ratio: String,
    prophet_ratio: String,
    bound: Option<f64>,
    bound_violated: bool,
}

pub fn write_csv<W: Write>(reports: &[EvalReport], out: W) -> Result<(), csv::Error> {
    let mut writer = csv::Writer::from_writer(out);
    for r in reports {
        writer.serialize(CsvRow {
            instance: &r.instance,
            policy: r.policy.name(),
            exact_cost: r.exact_cost,
            mc_mean: r.mc.map(|m| m.mean),
            mc_stderr: r.mc.map(|m| m.stderr),
            opt: r.opt_value,
            prophet: r.prophet_value,
            ratio: r.ratio.to_string(),
            prophet_ratio: r.prophet_ratio.to_string(),
            bound: r.bound,
            bound_violated: r.bound_violated,
        })?;
    }
    writer.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::int;

    #[test]
    fn single_node_ratios_are_one() {
        let reports = competitive_report("leaf", &InstanceTree::leaf(int(3)), &PolicyKind::ALL, None);
        assert_eq!(reports.len(), 5);
        for r in &reports {
            assert_eq!(r.ratio, Ratio::Finite(1.0));
            assert!(!r.bound_violated);
        }
    }

    #[test]
    fn zero_opt_conventions() {
        assert_eq!(Ratio::new(0.0, &int(0)), Ratio::Finite(1.0));
        assert_eq!(Ratio::new(2.0, &int(0)), Ratio::Infinite);
        assert_eq!(serde_json::to_string(&Ratio::Infinite).unwrap(), "\"inf\"");
    }

    #[test]
    fn outputs_are_machine_readable() {
        let tree = InstanceTree::chain(&[int(4), int(0)]);
        let reports = competitive_report(
            "chain",
            &tree,
            &[PolicyKind::Det, PolicyKind::Coin],
            Some(McConfig { trials: 100, seed: 3 }),
        );
        let mut json = Vec::new();
        write_json_lines(&reports, &mut json).unwrap();
        let text = String::from_utf8(json).unwrap();
        assert_eq!(text.lines().count(), 2);
        for line in text.lines() {
            let v: serde_json::Value = serde_json::from_str(line).unwrap();
            assert_eq!(v["instance"], "chain");
        }
        let mut csv_out = Vec::new();
        write_csv(&reports, &mut csv_out).unwrap();
        let csv_text = String::from_utf8(csv_out).unwrap();
        assert!(csv_text.starts_with("instance,policy,exact_cost"));
        assert_eq!(csv_text.lines().count(), 3);
    }
}
