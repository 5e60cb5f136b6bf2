//! Batch driver behind the `stopwise` binary.
//!
//! Exit codes: 0 when every requested assertion holds, 1 when one fails,
//! 2 for usage errors and unreadable or malformed input. Reports are JSON
//! with the full command configuration embedded and no timestamps, so
//! repeated runs are byte-identical.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use crate::evaluators::{competitive_report, write_csv, EvalReport, McConfig, Ratio, BOUND_TOLERANCE};
use crate::generators::GeneratorSpec;
use crate::mssc::{
    buy_report, buying_learner, covering_learner, greedy_buying, greedy_time_dependent, opt_buying, opt_time_dependent,
    parse_instance, random_instance, run_buying, serialize_instance, td_report, AdversaryReport, LearnerTrace,
    MsscError, MsscInstance, RandomInstanceSpec, BUY_LEARNERS, TD_LEARNERS,
};
use crate::rational::{format_rational, to_f64};
use crate::stopping_policies::PolicyKind;
use crate::tree_model::{deserialize, serialize, validate_supermartingale, InstanceTree, TreeDocument};

const EXIT_OK: i32 = 0;
const EXIT_ASSERTION: i32 = 1;
const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "stopwise", version, about = "Online stopping and min-sum set cover experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate an instance file.
    Gen(GenArgs),
    /// Evaluate stopping policies against the offline optimum.
    Eval(EvalArgs),
    /// Run a min-sum set cover learner on an instance.
    Mssc(MsscArgs),
    /// Build an adversarial feedback tree against a learner.
    Adversary(AdversaryArgs),
    /// Check instance files.
    Validate(ValidateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Kind {
    Harmonic,
    ExpTrap,
    BenchmarkGap,
    SkiRental,
    Random,
    MsscRandom,
}

#[derive(Debug, Clone, Args, Serialize)]
struct GenFlags {
    /// Instance family.
    #[arg(long, value_enum)]
    kind: Option<Kind>,
    /// Size parameter of harmonic, exp-trap and benchmark-gap.
    #[arg(long)]
    n: Option<u32>,
    /// Horizon of benchmark-gap and ski-rental (defaults to n, resp. t).
    #[arg(long)]
    horizon: Option<usize>,
    /// Ski-rental buying price.
    #[arg(long, default_value_t = 10)]
    b: u64,
    /// Ski-rental season length.
    #[arg(long, default_value_t = 5)]
    t: usize,
    /// Depth of random trees.
    #[arg(long, default_value_t = 4)]
    depth: usize,
    /// Maximum branching of random trees.
    #[arg(long, default_value_t = 3)]
    branching: usize,
    /// Maximum root value of random trees.
    #[arg(long, default_value_t = 16)]
    scale: u64,
    /// Seed of random instances.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Boxes of random set cover instances.
    #[arg(long, default_value_t = 4)]
    boxes: usize,
    /// Scenarios of random set cover instances.
    #[arg(long, default_value_t = 6)]
    scenarios: usize,
    /// Largest signal price of random set cover instances.
    #[arg(long, default_value_t = 1)]
    max_cost: u64,
}

#[derive(Debug, Args, Serialize)]
struct GenArgs {
    #[command(flatten)]
    #[serde(flatten)]
    flags: GenFlags,
    /// Output file; stdout when absent.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct EvalArgs {
    /// Instance files.
    #[arg(long = "in")]
    inputs: Vec<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    flags: GenFlags,
    /// Number of random trees, with seeds seed, seed+1, ...
    #[arg(long, default_value_t = 1)]
    count: u64,
    /// Policies to evaluate.
    #[arg(long, value_delimiter = ',', default_values_t = PolicyKind::ALL.to_vec())]
    policies: Vec<PolicyKind>,
    /// Monte-Carlo trials per policy; 0 skips simulation.
    #[arg(long, default_value_t = 0)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    mc_seed: u64,
    /// Fail unless every ratio ALG/OPT is at most this.
    #[arg(long)]
    assert_ratio_le: Option<f64>,
    /// Fail unless every ratio ALG/OPT is at least this.
    #[arg(long)]
    assert_ratio_ge: Option<f64>,
    /// Fail if a policy exceeds its proven competitive ratio.
    #[arg(long)]
    assert_bound: bool,
    /// JSON-lines report; stdout when neither this nor --csv is given.
    #[arg(long)]
    json: Option<PathBuf>,
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Algo {
    Greedy,
    GreedyBuy,
    NoFeedback,
    BuyUntilRevealed,
}

#[derive(Debug, Args, Serialize)]
struct MsscArgs {
    /// Instance file; a random instance from the generator flags when absent.
    #[arg(long = "in")]
    input: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    flags: GenFlags,
    #[arg(long, value_enum, default_value_t = Algo::Greedy)]
    algo: Algo,
    /// Also compute the exact optimum.
    #[arg(long)]
    opt: bool,
    /// Include per-scenario traces.
    #[arg(long)]
    traces: bool,
    /// Fail unless cost/OPT is at most this (implies --opt).
    #[arg(long)]
    assert_ratio_le: Option<f64>,
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Mode {
    Td,
    Buy,
}

#[derive(Debug, Args, Serialize)]
struct AdversaryArgs {
    #[arg(long, value_enum)]
    mode: Mode,
    #[arg(long)]
    learner: String,
    #[arg(long)]
    n: usize,
    /// Fail unless the learner/counter ratio is at least this.
    #[arg(long)]
    assert_ratio_ge: Option<f64>,
    /// Write the adversarial instance here.
    #[arg(long)]
    instance_out: Option<PathBuf>,
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct ValidateArgs {
    #[arg(required = true)]
    files: Vec<PathBuf>,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Assertion,
}

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Usage(e.to_string())
    }
}

/// Parses `args` (program name first) and runs the command; returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let result = match &cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Mssc(a) => cmd_mssc(a),
        Command::Adversary(a) => cmd_adversary(a),
        Command::Validate(a) => cmd_validate(a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(Failure::Assertion) => EXIT_ASSERTION,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn json_line<T: Serialize>(value: &T) -> String {
    let mut line = serde_json::to_string(value).expect("reports serialize");
    line.push('\n');
    line
}

fn pretty<T: Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("reports serialize");
    text.push('\n');
    text
}

impl GenFlags {
    fn need_n(&self) -> Result<u32, Failure> {
        self.n.ok_or_else(|| Failure::Usage(format!("--kind {} needs --n", self.kind_name())))
    }

    fn kind_name(&self) -> String {
        self.kind.and_then(|k| k.to_possible_value()).map_or("?".into(), |v| v.get_name().to_string())
    }

    fn tree_spec(&self, seed: u64) -> Result<GeneratorSpec, Failure> {
        let kind = self.kind.ok_or_else(|| Failure::Usage("--kind is required".into()))?;
        Ok(match kind {
            Kind::Harmonic => GeneratorSpec::Harmonic { n: self.need_n()? as usize },
            Kind::ExpTrap => GeneratorSpec::ExpTrap { n: self.need_n()? },
            Kind::BenchmarkGap => {
                let n = self.need_n()?;
                GeneratorSpec::BenchmarkGap { n, horizon: self.horizon.unwrap_or(n as usize) }
            }
            Kind::SkiRental => {
                GeneratorSpec::SkiRental { b: self.b, t: self.t, horizon: self.horizon.unwrap_or(self.t) }
            }
            Kind::Random => GeneratorSpec::Random {
                depth: self.depth,
                max_branching: self.branching,
                value_scale: self.scale,
                seed,
            },
            Kind::MsscRandom => return Err(Failure::Usage("mssc-random is not a stopping instance".into())),
        })
    }

    fn mssc_spec(&self) -> RandomInstanceSpec {
        RandomInstanceSpec {
            n_boxes: self.boxes,
            n_scenarios: self.scenarios,
            depth: self.depth,
            max_cost: self.max_cost,
            seed: self.seed,
        }
    }
}

fn cmd_gen(args: &GenArgs) -> Result<(), Failure> {
    let text = if args.flags.kind == Some(Kind::MsscRandom) {
        serialize_instance(&random_instance(args.flags.mssc_spec())?)
    } else {
        serialize(&args.flags.tree_spec(args.flags.seed)?.generate()?)
    };
    emit(args.out.as_deref(), &text)
}

fn load_tree(path: &Path) -> Result<InstanceTree, Failure> {
    match deserialize(&read(path)?) {
        Ok(TreeDocument::Supermartingale(tree)) => Ok(tree),
        Ok(TreeDocument::Feedback(_)) => {
            Err(Failure::Usage(format!("{}: expected a super-martingale tree, found a feedback tree", path.display())))
        }
        Err(e) => Err(Failure::Usage(format!("{}: {e}", path.display()))),
    }
}

#[derive(Serialize)]
struct ConfigLine<'a, C> {
    config: &'a C,
}

#[derive(Serialize)]
struct EvalLine<'a> {
    #[serde(flatten)]
    report: &'a EvalReport,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    failed_assertions: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    violating_instance: Option<serde_json::Value>,
}

fn ratio_tolerance(report: &EvalReport) -> f64 {
    BOUND_TOLERANCE * report.opt_value.max(1.0)
}

fn failed_assertions(args: &EvalArgs, report: &EvalReport) -> Vec<String> {
    let mut failed = Vec::new();
    if let Some(le) = args.assert_ratio_le {
        if report.ratio.exceeds(le, ratio_tolerance(report)) {
            failed.push(format!("ratio {} > {le}", report.ratio));
        }
    }
    if let Some(ge) = args.assert_ratio_ge {
        if report.ratio.as_f64() < ge - ratio_tolerance(report) {
            failed.push(format!("ratio {} < {ge}", report.ratio));
        }
    }
    if args.assert_bound && report.bound_violated {
        failed.push(format!("ratio {} exceeds the proven bound {}", report.ratio, report.bound.unwrap_or(f64::NAN)));
    }
    failed
}

fn cmd_eval(args: &EvalArgs) -> Result<(), Failure> {
    if args.policies.is_empty() {
        return Err(Failure::Usage("--policies is empty".into()));
    }
    if args.count == 0 {
        return Err(Failure::Usage("--count must be at least 1".into()));
    }
    if args.count > 1 && args.flags.kind != Some(Kind::Random) {
        return Err(Failure::Usage("--count > 1 needs --kind random".into()));
    }
    let mut instances: Vec<(String, InstanceTree)> = Vec::new();
    for path in &args.inputs {
        instances.push((path.display().to_string(), load_tree(path)?));
    }
    if args.flags.kind.is_some() {
        for i in 0..args.count {
            let spec = args.flags.tree_spec(args.flags.seed.wrapping_add(i))?;
            instances.push((spec.to_string(), spec.generate()?));
        }
    }
    if instances.is_empty() {
        return Err(Failure::Usage("nothing to evaluate: give --in or --kind".into()));
    }

    let mc = (args.trials > 0).then_some(McConfig { trials: args.trials, seed: args.mc_seed });
    let reports: Vec<Vec<EvalReport>> =
        instances.par_iter().map(|(id, tree)| competitive_report(id, tree, &args.policies, mc)).collect();

    let mut text = json_line(&ConfigLine { config: args });
    let mut failures = 0usize;
    for ((_, tree), group) in instances.iter().zip(&reports) {
        for report in group {
            let failed = failed_assertions(args, report);
            let violating_instance = (!failed.is_empty())
                .then(|| serde_json::from_str(&serialize(tree)).expect("serialized trees are JSON"));
            failures += failed.len();
            text.push_str(&json_line(&EvalLine { report, failed_assertions: failed, violating_instance }));
        }
    }
    let flat: Vec<EvalReport> = reports.into_iter().flatten().collect();
    if args.json.is_some() || args.csv.is_none() {
        emit(args.json.as_deref(), &text)?;
    }
    if let Some(path) = &args.csv {
        let mut buf = Vec::new();
        write_csv(&flat, &mut buf)?;
        fs::write(path, buf).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    }
    eprintln!("{} instances, {} records, {failures} failed assertions", instances.len(), flat.len());
    if failures > 0 {
        Err(Failure::Assertion)
    } else {
        Ok(())
    }
}

#[derive(Serialize)]
struct MsscReport<'a> {
    config: &'a MsscArgs,
    instance: String,
    algo: Algo,
    expected_cost: String,
    expected_cost_value: f64,
    expected_cover_time: String,
    expected_spend: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    opt: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ratio: Option<Ratio>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    failed_assertions: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    violating_instance: Option<serde_json::Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    traces: Option<&'a [LearnerTrace]>,
}

fn state_space_hint(e: MsscError) -> Failure {
    match e {
        MsscError::StateSpace { .. } => Failure::Usage(format!("{e}; raise STOPWISE_MEMO_LIMIT to allow it")),
        other => other.into(),
    }
}

fn cmd_mssc(args: &MsscArgs) -> Result<(), Failure> {
    let (id, inst): (String, MsscInstance) = match &args.input {
        Some(path) => {
            let inst = parse_instance(&read(path)?).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
            (path.display().to_string(), inst)
        }
        None => {
            let spec = args.flags.mssc_spec();
            (
                format!(
                    "mssc-random-b{}-s{}-d{}-c{}-seed{}",
                    spec.n_boxes, spec.n_scenarios, spec.depth, spec.max_cost, spec.seed
                ),
                random_instance(spec)?,
            )
        }
    };
    let eval = match args.algo {
        Algo::Greedy => greedy_time_dependent(&inst),
        Algo::GreedyBuy => greedy_buying(&inst),
        Algo::NoFeedback | Algo::BuyUntilRevealed => {
            let name = if args.algo == Algo::NoFeedback { "no-feedback" } else { "buy-until-revealed" };
            run_buying(&inst, buying_learner(name).expect("built-in learner").as_ref())?
        }
    };
    let opt = if args.opt || args.assert_ratio_le.is_some() {
        let value = match args.algo {
            Algo::Greedy => opt_time_dependent(&inst),
            _ => opt_buying(&inst),
        }
        .map_err(state_space_hint)?;
        Some(value)
    } else {
        None
    };
    let ratio = opt.as_ref().map(|o| Ratio::new(to_f64(&eval.expected_cost), o));
    let mut failed = Vec::new();
    if let (Some(le), Some(r)) = (args.assert_ratio_le, ratio) {
        if r.exceeds(le, BOUND_TOLERANCE) {
            failed.push(format!("ratio {r} > {le}"));
        }
    }
    let report = MsscReport {
        config: args,
        instance: id,
        algo: args.algo,
        expected_cost: format_rational(&eval.expected_cost),
        expected_cost_value: to_f64(&eval.expected_cost),
        expected_cover_time: format_rational(&eval.expected_cover_time),
        expected_spend: format_rational(&eval.expected_spend),
        opt: opt.as_ref().map(format_rational),
        ratio,
        violating_instance: (!failed.is_empty())
            .then(|| serde_json::from_str(&serialize_instance(&inst)).expect("instances are JSON")),
        failed_assertions: failed,
        traces: args.traces.then_some(eval.traces.as_slice()),
    };
    emit(args.out.as_deref(), &pretty(&report))?;
    if report.failed_assertions.is_empty() {
        Ok(())
    } else {
        Err(Failure::Assertion)
    }
}

#[derive(Serialize)]
struct AdversaryOutput<'a> {
    config: &'a AdversaryArgs,
    #[serde(flatten)]
    report: AdversaryReport,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    failed_assertions: Vec<String>,
}

fn cmd_adversary(args: &AdversaryArgs) -> Result<(), Failure> {
    let (report, instance) = match args.mode {
        Mode::Td => {
            let learner = covering_learner(&args.learner).ok_or_else(|| {
                Failure::Usage(format!(
                    "unknown td learner {:?} (expected one of {})",
                    args.learner,
                    TD_LEARNERS.join(", ")
                ))
            })?;
            let adv = crate::mssc::adversarial_feedback_td(learner.as_ref(), args.n)?;
            (td_report(learner.as_ref(), args.n)?, adv.instance)
        }
        Mode::Buy => {
            let learner = buying_learner(&args.learner).ok_or_else(|| {
                Failure::Usage(format!(
                    "unknown buying learner {:?} (expected one of {})",
                    args.learner,
                    BUY_LEARNERS.join(", ")
                ))
            })?;
            let adv = crate::mssc::adversarial_feedback_buying(learner.as_ref(), args.n)?;
            (buy_report(learner.as_ref(), args.n)?, adv.instance)
        }
    };
    if let Some(path) = &args.instance_out {
        emit(Some(path), &serialize_instance(&instance))?;
    }
    let mut failed = Vec::new();
    if let Some(ge) = args.assert_ratio_ge {
        if report.ratio.as_f64() < ge - BOUND_TOLERANCE {
            failed.push(format!("ratio {} < {ge}", report.ratio));
        }
    }
    eprintln!("ratio {}", report.ratio);
    let output = AdversaryOutput { config: args, report, failed_assertions: failed };
    emit(args.out.as_deref(), &pretty(&output))?;
    if output.failed_assertions.is_empty() {
        Ok(())
    } else {
        Err(Failure::Assertion)
    }
}

#[derive(Serialize)]
struct ValidateLine {
    file: String,
    kind: &'static str,
    valid: bool,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    problems: Vec<String>,
}

fn validate_text(text: &str) -> Result<(&'static str, Vec<String>), String> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| format!("malformed JSON: {e}"))?;
    if value.get("boxes").is_some() {
        parse_instance(text).map_err(|e| e.to_string())?;
        return Ok(("mssc", Vec::new()));
    }
    match deserialize(text).map_err(|e| e.to_string())? {
        TreeDocument::Supermartingale(tree) => {
            let problems =
                validate_supermartingale(&tree, &num_traits::Zero::zero()).iter().map(ToString::to_string).collect();
            Ok(("supermartingale", problems))
        }
        TreeDocument::Feedback(_) => Ok(("feedback", Vec::new())),
    }
}

fn cmd_validate(args: &ValidateArgs) -> Result<(), Failure> {
    let mut out = String::new();
    let mut malformed = false;
    let mut invalid = false;
    for path in &args.files {
        let line = match read(path)
            .map_err(|e| match e {
                Failure::Usage(m) => m,
                Failure::Assertion => unreachable!(),
            })
            .and_then(|t| validate_text(&t))
        {
            Ok((kind, problems)) => {
                invalid |= !problems.is_empty();
                ValidateLine { file: path.display().to_string(), kind, valid: problems.is_empty(), problems }
            }
            Err(msg) => {
                malformed = true;
                ValidateLine { file: path.display().to_string(), kind: "unknown", valid: false, problems: vec![msg] }
            }
        };
        out.push_str(&json_line(&line));
    }
    emit(None, &out)?;
    if malformed {
        Err(Failure::Usage("malformed input".into()))
    } else if invalid {
        Err(Failure::Assertion)
    } else {
        Ok(())
    }
}
