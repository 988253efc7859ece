use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgMatches, Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use serde_json::json;

use mk_core::corpus::{self, CorpusSpec};
use mk_core::extrapolation::{
    extrapolation_verify, lemma_l1star_check, lemma_lstar_check, transfer_constant, Phi0, VerifyOptions,
};
use mk_core::falsifier::{
    check_golden, eval_sides, paper_instances, violation_search, InequalityForm, InequalityInstance, InstanceReport,
};
use mk_core::generators::{format_values, WeightSpec};
use mk_core::norm_est::{estimate_operator_norm, DEFAULT_SAFETY};
use mk_core::operators::{g_operator, weighted_maximal};
use mk_core::report::{emit_report, GoldenReport, OutputFormat, RdfReport, Report, ReportList, RunConfig};
use mk_core::weights::{
    a1_norm, ainf_norm, ap_norm, ap_norm_profile, bp_constant, BpTail, LEMMA_REL_TOL, UNIT_FLOOR_TOL,
};
use mk_core::{Error, Exponent, OperatorKind, RdfConfig, Sequence, Weight};

const SEED_ENV: &str = "MK_SEED";

#[derive(Parser, Debug)]
#[command(
    name = "mk",
    version,
    about = "Discrete weights, maximal operators and extrapolation checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Random seed; MK_SEED overrides it.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    #[arg(long, global = true, default_value = "json")]
    format: String,

    /// Write the report here instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads (default: all available).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Truncated weight-class constants.
    #[command(subcommand)]
    Norm(NormCmd),
    /// Apply operators or estimate their norms.
    #[command(subcommand)]
    Op(OpCmd),
    /// Truncated Rubio de Francia iteration.
    #[command(subcommand)]
    Rdf(RdfCmd),
    /// Factorization lemmas, transfer constants and empirical verification.
    #[command(subcommand)]
    Extrapolate(ExtrapolateCmd),
    /// Discretized Hardy-type inequalities and their counterexamples.
    Counterexample(CounterexampleArgs),
    /// Print a generated weight in the plain-text file format.
    Generate(GenerateArgs),
}

#[derive(Args, Debug)]
struct WeightArgs {
    /// Generator spec: power:lambda=, const:c=, random:dist=loguniform,..., file:<path>.
    #[arg(long)]
    weight: String,
    /// Truncation length.
    #[arg(long)]
    n: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum NormCmd {
    Ap {
        #[command(flatten)]
        w: WeightArgs,
        #[arg(long)]
        p: f64,
        /// Include the per-window values.
        #[arg(long)]
        per_n: bool,
    },
    A1 {
        #[command(flatten)]
        w: WeightArgs,
        #[arg(long)]
        per_n: bool,
    },
    Ainf {
        #[command(flatten)]
        w: WeightArgs,
        #[arg(long)]
        per_n: bool,
    },
    Bp {
        #[command(flatten)]
        w: WeightArgs,
        #[arg(long)]
        p: f64,
        /// Add the analytic tail beyond N (power generators only).
        #[arg(long)]
        tail: bool,
        #[arg(long)]
        per_n: bool,
    },
    Profile {
        #[command(flatten)]
        w: WeightArgs,
        /// Comma-separated increasing exponents.
        #[arg(long, value_delimiter = ',', required = true)]
        grid: Vec<f64>,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum OpName {
    Hardy,
    Maximal,
    DualMaximal,
    Identity,
    WeightedMaximal,
    G,
}

#[derive(Subcommand, Debug)]
enum OpCmd {
    Apply {
        #[arg(long, value_enum)]
        op: OpName,
        /// Input sequence: a generator spec or a comma-separated list.
        #[arg(long)]
        f: String,
        /// Weight for the weighted operators (default const:c=1).
        #[arg(long)]
        weight: Option<String>,
        #[arg(long)]
        n: Option<usize>,
        /// Exponent of the G operator.
        #[arg(long)]
        gamma: Option<f64>,
    },
    NormEst {
        #[arg(long, value_enum)]
        op: OpName,
        #[command(flatten)]
        w: WeightArgs,
        #[arg(long)]
        p: f64,
        #[arg(long, default_value_t = 20_000)]
        budget: usize,
        /// Leave the witness out of the report.
        #[arg(long)]
        no_witness: bool,
    },
}

#[derive(Args, Debug)]
struct RdfArgs {
    #[command(flatten)]
    w: WeightArgs,
    /// Starting sequence: a generator spec or a comma-separated list.
    #[arg(long)]
    h: String,
    #[arg(long)]
    p: f64,
    /// Constant standing in for the operator norm; estimated when absent.
    #[arg(long)]
    k: Option<f64>,
    #[arg(long, default_value_t = mk_core::rdf::DEFAULT_MAX_TERMS)]
    max_terms: usize,
    #[arg(long, default_value_t = mk_core::rdf::DEFAULT_TAIL_TOL)]
    tail_tol: f64,
    /// Budget for estimating K when --k is absent.
    #[arg(long, default_value_t = 20_000)]
    budget: usize,
    /// Safety factor applied to an estimated K.
    #[arg(long, default_value_t = DEFAULT_SAFETY)]
    safety: f64,
    /// Keep long iterates in the report.
    #[arg(long)]
    full: bool,
}

#[derive(Subcommand, Debug)]
enum RdfCmd {
    Iterate(RdfArgs),
    Dual(RdfArgs),
}

#[derive(Args, Debug)]
struct LemmaArgs {
    #[command(flatten)]
    rdf: RdfArgs,
    #[arg(long)]
    p0: f64,
}

#[derive(Subcommand, Debug)]
enum ExtrapolateCmd {
    LemmaLstar(LemmaArgs),
    LemmaL1star(LemmaArgs),
    Constant {
        #[arg(long)]
        p0: f64,
        #[arg(long)]
        p: f64,
        /// linear:c=, power:c=,a=, const:c= or identity.
        #[arg(long)]
        phi0: String,
        #[arg(long)]
        k: f64,
        /// The A_p constant of the target weight; computed from --weight when absent.
        #[arg(long)]
        apw: Option<f64>,
        #[arg(long)]
        weight: Option<String>,
        #[arg(long)]
        n: Option<usize>,
    },
    Verify {
        #[arg(long, value_enum)]
        op: OpName,
        #[arg(long)]
        p0: f64,
        #[arg(long)]
        p: f64,
        #[arg(long, default_value_t = 512)]
        n: usize,
        /// Weights for the fit at p0 (repeatable); default: a power-weight span.
        #[arg(long = "weight-p0")]
        weights_p0: Vec<String>,
        /// Weights checked at p (repeatable); default: a power-weight span.
        #[arg(long = "weight")]
        weights: Vec<String>,
        /// Size of the default power-weight spans.
        #[arg(long, default_value_t = 11)]
        span: usize,
        #[arg(long, default_value_t = 4000)]
        budget: usize,
        #[arg(long, default_value_t = DEFAULT_SAFETY)]
        safety: f64,
        /// Random sequences added to the corpus.
        #[arg(long, default_value_t = 16)]
        random: usize,
    },
}

#[derive(Args, Debug)]
#[command(args_conflicts_with_subcommands = true)]
struct CounterexampleArgs {
    /// Evaluate the four published examples.
    #[arg(long)]
    paper: bool,
    #[command(subcommand)]
    cmd: Option<CounterexampleCmd>,
}

#[derive(Subcommand, Debug)]
enum CounterexampleCmd {
    Eval {
        #[arg(long)]
        form: String,
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        beta: f64,
        /// Comma-separated entries or a generator spec.
        #[arg(long)]
        v: String,
        #[arg(long)]
        lambda: Option<String>,
    },
    Search {
        #[arg(long)]
        form: String,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        beta: f64,
        #[arg(long, default_value_t = 10_000)]
        budget: usize,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Family {
    A1,
    Ap,
}

#[derive(Args, Debug)]
struct GenerateArgs {
    /// Generator spec; mutually exclusive with --family.
    #[arg(long, conflicts_with = "family")]
    weight: Option<String>,
    /// Draw from a seeded random weight family instead.
    #[arg(long, value_enum)]
    family: Option<Family>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    n: Option<usize>,
}

/// A usage or input error; exits with status 2.
enum Failure {
    Usage(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

type Outcome = Result<(Box<dyn ReportBox>, bool), Failure>;

/// Object-safe face of [`Report`].
trait ReportBox {
    fn render(&self, format: OutputFormat, config: &RunConfig) -> mk_core::Result<String>;
    fn text_body(&self) -> mk_core::Result<String>;
}

impl<R: Report> ReportBox for R {
    fn render(&self, format: OutputFormat, config: &RunConfig) -> mk_core::Result<String> {
        emit_report(self, format, config)
    }

    fn text_body(&self) -> mk_core::Result<String> {
        self.text()
    }
}

fn ok<R: Report + 'static>(r: R) -> Outcome {
    Ok((Box::new(r), true))
}

fn checked<R: Report + 'static>(r: R, passed: bool) -> Outcome {
    Ok((Box::new(r), passed))
}

fn exponent(p: f64) -> Result<Exponent, Failure> {
    Ok(Exponent::new(p)?)
}

fn load_weight(spec: &str, n: Option<usize>) -> Result<Weight, Failure> {
    Ok(spec.parse::<WeightSpec>()?.generate(n)?)
}

/// A comma-separated list or a generator spec.
fn load_sequence(text: &str, n: Option<usize>) -> Result<Sequence, Failure> {
    if text.contains(':') {
        return Ok(Sequence::from(load_weight(text, n)?));
    }
    let values = text
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Failure::Usage(format!("`{t}` is not a number")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Sequence::new(values)?)
}

fn core_op(op: OpName) -> Result<OperatorKind, Failure> {
    match op {
        OpName::Hardy => Ok(OperatorKind::Hardy),
        OpName::Maximal => Ok(OperatorKind::Maximal),
        OpName::DualMaximal => Ok(OperatorKind::DualMaximal),
        OpName::Identity => Ok(OperatorKind::Identity),
        other => Err(Error::UnsupportedOperator(format!("{other:?}").to_lowercase()).into()),
    }
}

fn profile(report: mk_core::NormReport, keep: bool) -> mk_core::NormReport {
    if keep {
        report
    } else {
        report.without_profile()
    }
}

fn run_norm(cmd: NormCmd) -> Outcome {
    match cmd {
        NormCmd::Ap { w, p, per_n } => {
            let p = exponent(p)?;
            ok(profile(ap_norm(&load_weight(&w.weight, w.n)?, p)?, per_n))
        }
        NormCmd::A1 { w, per_n } => ok(profile(a1_norm(&load_weight(&w.weight, w.n)?)?, per_n)),
        NormCmd::Ainf { w, per_n } => ok(profile(ainf_norm(&load_weight(&w.weight, w.n)?)?, per_n)),
        NormCmd::Bp { w, p, tail, per_n } => {
            let spec: WeightSpec = w.weight.parse()?;
            let tail = match (&spec, tail) {
                (_, false) => BpTail::None,
                (WeightSpec::Power { lambda }, true) => BpTail::Power {
                    lambda: *lambda,
                    scale: 1.0,
                },
                (WeightSpec::Const { c }, true) => BpTail::Power { lambda: 0.0, scale: *c },
                (_, true) => {
                    return Err(Failure::Usage("--tail needs a power or const generator".into()));
                }
            };
            ok(profile(bp_constant(&spec.generate(w.n)?, p, tail)?, per_n))
        }
        NormCmd::Profile { w, grid } => {
            let grid = grid.into_iter().map(exponent).collect::<Result<Vec<_>, _>>()?;
            let reports = ap_norm_profile(&load_weight(&w.weight, w.n)?, &grid)?;
            ok(ReportList {
                items: reports.into_iter().map(|r| r.without_profile()).collect(),
            })
        }
    }
}

fn run_op(cmd: OpCmd, seed: u64) -> Outcome {
    match cmd {
        OpCmd::Apply {
            op,
            f,
            weight,
            n,
            gamma,
        } => {
            let f = load_sequence(&f, n)?;
            let w = match weight {
                Some(spec) => load_weight(&spec, Some(f.len()))?,
                None => Weight::constant(f.len(), 1.0)?,
            };
            let out = match op {
                OpName::WeightedMaximal => weighted_maximal(&f, &w)?,
                OpName::G => {
                    let gamma = gamma.ok_or_else(|| Failure::Usage("--op g needs --gamma".into()))?;
                    g_operator(&f, &w, gamma)?
                }
                other => core_op(other)?.apply(&f, &w)?,
            };
            ok(json!({
                "operator": format!("{op:?}").to_lowercase(),
                "input": f,
                "output": out,
            }))
        }
        OpCmd::NormEst {
            op,
            w,
            p,
            budget,
            no_witness,
        } => {
            let weight = load_weight(&w.weight, w.n)?;
            let est = estimate_operator_norm(core_op(op)?, &weight, exponent(p)?, budget, seed)?;
            let mut v = serde_json::to_value(&est).map_err(|e| Failure::Usage(e.to_string()))?;
            if no_witness {
                if let Some(map) = v.as_object_mut() {
                    map.remove("witness");
                }
            }
            ok(v)
        }
    }
}

/// `K` from the flag, or an estimate of the relevant operator norm times
/// the safety factor.
fn resolve_k(args: &RdfArgs, w: &Weight, p: Exponent, dual: bool, seed: u64) -> Result<f64, Failure> {
    if let Some(k) = args.k {
        return Ok(k);
    }
    let est = if dual {
        estimate_operator_norm(OperatorKind::DualMaximal, w, p.conjugate(), args.budget, seed)?
    } else {
        estimate_operator_norm(OperatorKind::Maximal, w, p, args.budget, seed)?
    };
    Ok(est.constant_with_safety(args.safety))
}

fn rdf_inputs(args: &RdfArgs, dual: bool, seed: u64) -> Result<(Weight, Sequence, Exponent, RdfConfig), Failure> {
    let w = load_weight(&args.w.weight, args.w.n)?;
    let h = load_sequence(&args.h, Some(w.len()))?;
    let p = exponent(args.p)?;
    let k = resolve_k(args, &w, p, dual, seed)?;
    let cfg = RdfConfig::new(k, args.max_terms, args.tail_tol)?;
    Ok((w, h, p, cfg))
}

fn run_rdf(cmd: RdfCmd, seed: u64) -> Outcome {
    let (args, dual) = match &cmd {
        RdfCmd::Iterate(a) => (a, false),
        RdfCmd::Dual(a) => (a, true),
    };
    let (w, h, p, cfg) = rdf_inputs(args, dual, seed)?;
    let result = if dual {
        mk_core::rdf_dual_iterate(&h, &w, p, &cfg)?
    } else {
        mk_core::rdf_iterate(&h, &w, p, &cfg)?
    };
    let passed = result.checks.i && result.checks.ii && result.checks.iii;
    checked(
        RdfReport {
            result,
            full: args.full,
        },
        passed,
    )
}

fn weight_list(
    specs: &[String],
    n: usize,
    fallback: impl FnOnce() -> mk_core::Result<Vec<Weight>>,
) -> Result<Vec<Weight>, Failure> {
    if specs.is_empty() {
        return Ok(fallback()?);
    }
    specs.iter().map(|s| load_weight(s, Some(n))).collect()
}

fn run_extrapolate(cmd: ExtrapolateCmd, seed: u64) -> Outcome {
    match cmd {
        ExtrapolateCmd::LemmaLstar(args) => {
            let (w, h, p, cfg) = rdf_inputs(&args.rdf, false, seed)?;
            let report = lemma_lstar_check(&w, &h, p, exponent(args.p0)?, &cfg)?;
            let holds = report.holds;
            checked(report, holds)
        }
        ExtrapolateCmd::LemmaL1star(args) => {
            let (w, h, p, cfg) = rdf_inputs(&args.rdf, true, seed)?;
            let report = lemma_l1star_check(&w, &h, p, exponent(args.p0)?, &cfg)?;
            let holds = report.holds;
            checked(report, holds)
        }
        ExtrapolateCmd::Constant {
            p0,
            p,
            phi0,
            k,
            apw,
            weight,
            n,
        } => {
            let (p0, p) = (exponent(p0)?, exponent(p)?);
            let phi0: Phi0 = phi0.parse()?;
            let apw = match (apw, weight) {
                (Some(x), _) => x,
                (None, Some(spec)) => ap_norm(&load_weight(&spec, n)?, p)?.value,
                (None, None) => return Err(Failure::Usage("give --apw or --weight".into())),
            };
            ok(transfer_constant(p0, p, phi0, k, apw)?)
        }
        ExtrapolateCmd::Verify {
            op,
            p0,
            p,
            n,
            weights_p0,
            weights,
            span,
            budget,
            safety,
            random,
        } => {
            let (p0, p) = (exponent(p0)?, exponent(p)?);
            let ws0 = weight_list(&weights_p0, n, || corpus::power_weight_span(n, p0, span))?;
            let ws = weight_list(&weights, n, || corpus::power_weight_span(n, p, span.min(5)))?;
            let corpus = CorpusSpec {
                n,
                seed,
                random_count: random,
            };
            let opts = VerifyOptions { budget, seed, safety };
            let report = extrapolation_verify(core_op(op)?, &corpus, &ws0, &ws, p0, p, &opts)?;
            let passed = report.violations.is_empty();
            checked(report, passed)
        }
    }
}

fn run_counterexample(args: CounterexampleArgs, seed: u64) -> Outcome {
    match (args.paper, args.cmd) {
        (true, _) => {
            let cases = paper_instances()
                .iter()
                .map(check_golden)
                .collect::<mk_core::Result<Vec<_>>>()?;
            let all_ok = cases.iter().all(|c| c.ok);
            checked(GoldenReport { cases, all_ok }, all_ok)
        }
        (
            false,
            Some(CounterexampleCmd::Eval {
                form,
                alpha,
                beta,
                v,
                lambda,
            }),
        ) => {
            let form: InequalityForm = form.parse()?;
            let v = load_sequence(&v, None)?;
            let n = v.len();
            let mut inst = InequalityInstance::new(form, alpha, beta, v.into_values())?;
            if let Some(spec) = lambda {
                inst = inst.with_lambda(load_weight(&spec, Some(n))?)?;
            }
            eval_sides(&inst)?;
            ok(InstanceReport::evaluate(&inst)?)
        }
        (
            false,
            Some(CounterexampleCmd::Search {
                form,
                n,
                alpha,
                beta,
                budget,
            }),
        ) => {
            let form: InequalityForm = form.parse()?;
            ok(violation_search(form, n, alpha, beta, budget, seed)?)
        }
        (false, None) => Err(Failure::Usage("counterexample needs --paper, eval or search".into())),
    }
}

/// Plain-text weight file, or the weight as a JSON report.
struct Generated(Weight);

impl serde::Serialize for Generated {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.0.serialize(s)
    }
}

impl Report for Generated {
    fn text(&self) -> mk_core::Result<String> {
        Ok(format_values(self.0.values()))
    }
}

fn run_generate(args: GenerateArgs, seed: u64) -> Outcome {
    let w = match (args.weight, args.family) {
        (Some(spec), _) => load_weight(&spec, args.n)?,
        (None, Some(family)) => {
            let n = args.n.ok_or_else(|| Failure::Usage("--family needs --n".into()))?;
            let mut rng = corpus::rng(seed);
            match family {
                Family::A1 => corpus::random_a1_weight(&mut rng, n)?,
                Family::Ap => {
                    let p = exponent(args.p.ok_or_else(|| Failure::Usage("--family ap needs --p".into()))?)?;
                    corpus::random_ap_weight(&mut rng, n, p)?
                }
            }
        }
        (None, None) => return Err(Failure::Usage("generate needs --weight or --family".into())),
    };
    ok(Generated(w))
}

/// Every argument that clap resolved, defaults included, keyed by id.
fn resolved_args(m: &ArgMatches, path: &mut Vec<String>, out: &mut BTreeMap<String, String>) {
    for id in m.ids() {
        let id = id.as_str();
        // argument groups are keyed by their struct name
        if id.starts_with(char::is_uppercase) {
            continue;
        }
        if let Ok(Some(raw)) = m.try_get_raw(id) {
            let joined: Vec<String> = raw.map(|v| v.to_string_lossy().into_owned()).collect();
            out.insert(id.replace('_', "-"), joined.join(","));
        }
    }
    if let Some((name, sub)) = m.subcommand() {
        path.push(name.to_string());
        resolved_args(sub, path, out);
    }
}

fn run(matches: &ArgMatches) -> Result<(String, bool, Option<PathBuf>), Failure> {
    let cli = Cli::from_arg_matches(matches).map_err(|e| Failure::Usage(e.to_string()))?;
    let seed = match std::env::var(SEED_ENV) {
        Ok(s) => s
            .trim()
            .parse()
            .map_err(|_| Failure::Usage(format!("{SEED_ENV} = `{s}` is not an unsigned integer")))?,
        Err(_) => cli.seed,
    };
    let format: OutputFormat = cli.format.parse()?;
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(Failure::Usage("--threads must be at least 1".into()));
        }
        // the global pool can be set once; later calls in-process are no-ops
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }

    let mut path = Vec::new();
    let mut args = BTreeMap::new();
    resolved_args(matches, &mut path, &mut args);
    args.insert("seed".into(), seed.to_string());
    let n = args.get("n").and_then(|s| s.parse().ok());
    let config = RunConfig {
        command: path.join(" "),
        args,
        seed,
        n,
        output_format: format,
        tolerances: BTreeMap::from([
            ("lemma_rel_tol".to_string(), LEMMA_REL_TOL),
            ("unit_floor_tol".to_string(), UNIT_FLOOR_TOL),
        ]),
    };

    let bare_file = matches!(cli.command, Command::Generate(_)) && format == OutputFormat::Text;
    let (report, passed) = match cli.command {
        Command::Norm(c) => run_norm(c),
        Command::Op(c) => run_op(c, seed),
        Command::Rdf(c) => run_rdf(c, seed),
        Command::Extrapolate(c) => run_extrapolate(c, seed),
        Command::Counterexample(c) => run_counterexample(c, seed),
        Command::Generate(c) => run_generate(c, seed),
    }?;
    let text = if bare_file {
        report.text_body()?
    } else {
        report.render(format, &config)?
    };
    Ok((text, passed, cli.out))
}

fn main() -> ExitCode {
    let matches = match Cli::command().try_get_matches() {
        Ok(m) => m,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&matches) {
        Ok((text, passed, out)) => {
            let written = match out {
                Some(path) => std::fs::write(&path, text.as_bytes()).map_err(|e| format!("{}: {e}", path.display())),
                None => std::io::stdout().write_all(text.as_bytes()).map_err(|e| e.to_string()),
            };
            if let Err(e) = written {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
            if passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
