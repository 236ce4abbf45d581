use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use mlp_core::bounds::{eta_constant, mlp_error_bound, BoundInputs};
use mlp_core::numeric::MeanAccumulator;
use mlp_core::study::{
    bound_inputs, complexity_study, convergence_study, empirical_lp_error, write_csv, ComplexityConfig,
    ConvergenceConfig,
};
use mlp_core::{
    builtin, reference_value, replicate, run_suite, BaseMode, CostLedger, Form, MlpParams, ProblemSpec, SUITES,
};

#[derive(Parser, Debug)]
#[command(
    name = "mlp",
    version,
    about = "Multilevel Picard Monte Carlo for semilinear heat equations"
)]
struct Cli {
    /// Worker threads; falls back to MLP_THREADS, then to the machine's parallelism.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Estimate the solution at one point.
    Solve(SolveArgs),
    /// Run a convergence or complexity sweep and write CSV.
    #[command(subcommand)]
    Study(StudyCommand),
    /// Run named check suites.
    Verify(VerifyArgs),
    /// Print the analytic error bound for one configuration.
    Bounds(BoundsArgs),
}

#[derive(Subcommand, Debug)]
enum StudyCommand {
    /// Sweep the depth n = 1..=nmax.
    Convergence(ConvergenceArgs),
    /// Sweep the tolerance and select the depth for each.
    Complexity(ComplexityArgs),
}

#[derive(Args, Debug, Clone)]
struct ProblemArgs {
    /// heat-quadratic, constant-source, flat-ode or linear-reaction.
    #[arg(long)]
    problem: String,
    #[arg(long, default_value_t = 1)]
    d: usize,
    #[arg(long = "T", default_value_t = 1.0)]
    horizon: f64,
    /// terminal or initial.
    #[arg(long, default_value = "terminal")]
    form: String,
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long)]
    n: u32,
    /// raw:K uses base K, phi:K uses base φ(K).
    #[arg(long)]
    m: String,
    #[arg(long, default_value_t = 0.0)]
    t: f64,
    /// Comma-separated coordinates, or one value for every coordinate.
    #[arg(long)]
    x: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    reps: usize,
    #[arg(long, default_value_t = 2.0)]
    p: f64,
}

#[derive(Args, Debug)]
struct ConvergenceArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long)]
    nmax: u32,
    /// raw:K or phi:K for a fixed m; raw:n or phi:n for the diagonal m = n.
    #[arg(long, default_value = "phi:n")]
    m: String,
    #[arg(long, default_value_t = 0.0)]
    t: f64,
    #[arg(long)]
    x: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    reps: usize,
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ComplexityArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    /// Comma-separated tolerances.
    #[arg(long, value_delimiter = ',', required = true)]
    eps: Vec<f64>,
    #[arg(long, default_value_t = 0.5)]
    delta: f64,
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    reps: usize,
    /// Replace the problem's selector constant L.
    #[arg(long)]
    lipschitz: Option<f64>,
    /// Largest admissible cost of one realization.
    #[arg(long, default_value_t = 1_000_000_000)]
    budget: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// One of mc, recursions, stirling, talk1, phi, gronwall, cost, exactness, all.
    #[arg(long)]
    suite: String,
    /// Emit CSV instead of aligned text.
    #[arg(long)]
    csv: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BoundsArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long)]
    n: u32,
    #[arg(long)]
    m: String,
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    #[arg(long)]
    x: Option<String>,
    /// Also write the report as CSV to this path.
    #[arg(long)]
    csv: Option<PathBuf>,
}

enum Failure {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

type Outcome<T> = std::result::Result<T, Failure>;

trait UsageContext<T> {
    fn usage(self) -> Outcome<T>;
    fn runtime(self) -> Outcome<T>;
}

impl<T, E: Into<anyhow::Error>> UsageContext<T> for std::result::Result<T, E> {
    fn usage(self) -> Outcome<T> {
        self.map_err(|e| Failure::Usage(e.into()))
    }
    fn runtime(self) -> Outcome<T> {
        self.map_err(|e| Failure::Runtime(e.into()))
    }
}

fn fmt(v: f64) -> String {
    format!("{v:?}")
}

fn problem(args: &ProblemArgs) -> Outcome<ProblemSpec> {
    let form: Form = args.form.parse().usage()?;
    Ok(builtin(&args.problem, args.d, args.horizon).usage()?.with_form(form))
}

/// `(mode, Some(K))` for `raw:K`/`phi:K`, `(mode, None)` for the diagonal `raw:n`/`phi:n`.
fn parse_base(text: &str) -> Outcome<(BaseMode, Option<u64>)> {
    let (mode, value) = text
        .split_once(':')
        .ok_or_else(|| Failure::Usage(anyhow!("--m expects raw:K or phi:K, got '{text}'")))?;
    let mode = match mode {
        "raw" => BaseMode::Raw,
        "phi" => BaseMode::Scheduled,
        other => return Err(Failure::Usage(anyhow!("unknown base mode '{other}'"))),
    };
    if value == "n" {
        return Ok((mode, None));
    }
    let k: u64 = value
        .parse()
        .with_context(|| format!("invalid base '{value}'"))
        .usage()?;
    if k == 0 {
        return Err(Failure::Usage(anyhow!("base must be at least 1")));
    }
    Ok((mode, Some(k)))
}

fn fixed_base(text: &str) -> Outcome<(BaseMode, u64)> {
    match parse_base(text)? {
        (mode, Some(k)) => Ok((mode, k)),
        (_, None) => Err(Failure::Usage(anyhow!("--m needs an explicit value here"))),
    }
}

fn parse_point(x: Option<&str>, d: usize) -> Outcome<Vec<f64>> {
    let Some(x) = x else { return Ok(vec![0.0; d]) };
    let values: Vec<f64> = x
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .with_context(|| format!("invalid point '{x}'"))
        .usage()?;
    match values.len() {
        1 => Ok(vec![values[0]; d]),
        n if n == d => Ok(values),
        n => Err(Failure::Usage(anyhow!("point has {n} coordinates, expected {d}"))),
    }
}

fn sink(out: Option<&PathBuf>) -> Outcome<Box<dyn Write>> {
    match out {
        Some(path) => Ok(Box::new(
            File::create(path)
                .with_context(|| format!("cannot write {}", path.display()))
                .runtime()?,
        )),
        None => Ok(Box::new(io::stdout().lock())),
    }
}

fn print_pairs(out: &mut dyn Write, pairs: &[(&str, String)]) -> io::Result<()> {
    let width = pairs.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    for (k, v) in pairs {
        writeln!(out, "{k:<width$}  {v}")?;
    }
    Ok(())
}

fn ledger_pairs(l: &CostLedger) -> Vec<(&'static str, String)> {
    vec![
        ("cost_f", l.f_evals.to_string()),
        ("cost_g", l.g_evals.to_string()),
        ("cost_uniform", l.uniform_draws.to_string()),
        ("cost_gaussian", l.gaussian_scalar_draws.to_string()),
        ("cost_total", l.total().to_string()),
    ]
}

fn run_solve(args: &SolveArgs) -> Outcome<bool> {
    let p = problem(&args.problem)?;
    let (base_mode, m) = fixed_base(&args.m)?;
    let x = parse_point(args.x.as_deref(), p.d)?;
    p.check_point(&x).usage()?;
    p.terminal_time(args.t).usage()?;
    if args.reps == 0 {
        return Err(Failure::Usage(anyhow!("--reps must be positive")));
    }
    let params = MlpParams {
        n: args.n,
        base_mode,
        m,
        p_hat: args.p,
    };
    let base = params.base().usage()?;
    let runs = replicate(&p, &params, args.t, &x, args.reps, args.seed).runtime()?;
    let values: Vec<f64> = runs.iter().map(|r| r.value).collect();
    let mut mean = MeanAccumulator::new();
    values.iter().for_each(|v| mean.add(*v));
    let mut pairs = vec![
        ("problem", p.name.clone()),
        ("form", p.form.as_str().to_string()),
        ("n", args.n.to_string()),
        ("base", format!("{}:{} -> {base}", base_mode.as_str(), m)),
        ("reps", args.reps.to_string()),
        ("value", fmt(mean.mean())),
    ];
    if let Ok(reference) = reference_value(&p, args.t, &x) {
        pairs.push(("reference", fmt(reference)));
        pairs.push((
            "empirical_lp",
            fmt(empirical_lp_error(&values, reference, args.p).runtime()?),
        ));
    }
    let first = runs.first().map(|r| r.ledger).unwrap_or_default();
    pairs.extend(ledger_pairs(&first));
    let inputs = bound_inputs(&p, args.n, base, args.p, &x).usage()?;
    let (sharp, relaxed) = mlp_error_bound(&inputs).runtime()?;
    pairs.push(("bound_sharp", fmt(sharp)));
    pairs.push(("bound_relaxed", fmt(relaxed)));
    print_pairs(&mut io::stdout().lock(), &pairs).runtime()?;
    Ok(true)
}

fn run_convergence(args: &ConvergenceArgs) -> Outcome<bool> {
    let p = problem(&args.problem)?;
    let (base_mode, m) = parse_base(&args.m)?;
    let x = parse_point(args.x.as_deref(), p.d)?;
    p.check_point(&x).usage()?;
    p.terminal_time(args.t).usage()?;
    if args.nmax == 0 || args.reps == 0 {
        return Err(Failure::Usage(anyhow!("--nmax and --reps must be positive")));
    }
    let cfg = ConvergenceConfig {
        n_list: (1..=args.nmax).collect(),
        base_mode,
        m,
        p_hat: args.p,
        reps: args.reps,
        root_seed: args.seed,
        t: args.t,
        x,
    };
    let out = sink(args.out.as_ref())?;
    let rows = convergence_study(&p, &cfg).runtime()?;
    write_csv(&rows, out).runtime()?;
    Ok(true)
}

fn run_complexity(args: &ComplexityArgs) -> Outcome<bool> {
    let p = problem(&args.problem)?;
    if args.reps == 0 {
        return Err(Failure::Usage(anyhow!("--reps must be positive")));
    }
    let cfg = ComplexityConfig {
        eps_list: args.eps.clone(),
        delta: args.delta,
        p_hat: args.p,
        reps: args.reps,
        root_seed: args.seed,
        selector_lipschitz: args.lipschitz,
        cost_budget: Some(args.budget),
    };
    let mut out = sink(args.out.as_ref())?;
    let study = complexity_study(&p, &cfg).runtime()?;
    let rows: Vec<_> = study.rows.iter().map(|r| r.row.clone()).collect();
    write_csv(&rows, &mut out).runtime()?;
    let eps: Vec<String> = study.rows.iter().map(|r| fmt(r.eps)).collect();
    let slope = study.slope.map(fmt).unwrap_or_else(|| "nan".into());
    writeln!(out, "# eps={} slope={slope}", eps.join(";")).runtime()?;
    Ok(true)
}

fn run_verify(args: &VerifyArgs) -> Outcome<bool> {
    if args.suite != "all" && !SUITES.contains(&args.suite.as_str()) {
        return Err(Failure::Usage(anyhow!(
            "unknown suite '{}', expected one of {} or all",
            args.suite,
            SUITES.join(", ")
        )));
    }
    let checks = run_suite(&args.suite).runtime()?;
    let mut out = sink(args.out.as_ref())?;
    if args.csv {
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record(["suite", "check", "pass", "detail"]).runtime()?;
        for c in &checks {
            w.write_record([c.suite, &c.name, if c.pass { "true" } else { "false" }, &c.detail])
                .runtime()?;
        }
        w.flush().runtime()?;
    } else {
        for c in &checks {
            let status = if c.pass { "PASS" } else { "FAIL" };
            writeln!(out, "{status} {:<10} {} [{}]", c.suite, c.name, c.detail).runtime()?;
        }
        let passed = checks.iter().filter(|c| c.pass).count();
        writeln!(out, "{passed}/{} checks passed", checks.len()).runtime()?;
    }
    Ok(checks.iter().all(|c| c.pass))
}

fn run_bounds(args: &BoundsArgs) -> Outcome<bool> {
    let p = problem(&args.problem)?;
    let (base_mode, m) = fixed_base(&args.m)?;
    let x = parse_point(args.x.as_deref(), p.d)?;
    p.check_point(&x).usage()?;
    let params = MlpParams {
        n: args.n,
        base_mode,
        m,
        p_hat: args.p,
    };
    let base = params.base().usage()?;
    let b = bound_inputs(&p, args.n, base, args.p, &x).usage()?;
    let (sharp, relaxed) = mlp_error_bound(&b).runtime()?;
    let pairs = vec![
        ("problem", p.name.clone()),
        ("d", b.d.to_string()),
        ("T", fmt(b.horizon)),
        ("n", b.n.to_string()),
        ("base_mode", base_mode.as_str().to_string()),
        ("m", m.to_string()),
        ("base", b.base.to_string()),
        ("p_hat", fmt(b.p_hat)),
        ("frak_m", fmt(b.frak_m)),
        ("lipschitz", fmt(b.lipschitz)),
        ("frak_l", fmt(b.frak_l)),
        ("growth_p", fmt(b.growth_p)),
        ("growth_q", fmt(b.growth_q)),
        ("x_norm", fmt(b.x_norm)),
        ("exact_moment", b.exact_moment.map(fmt).unwrap_or_else(|| "none".into())),
        ("selector_constant", fmt(p.selector_constant())),
        (
            "eta",
            fmt(eta_constant(&BoundInputs {
                lipschitz: p.selector_constant(),
                ..b
            })),
        ),
        ("bound_sharp", fmt(sharp)),
        ("bound_relaxed", fmt(relaxed)),
    ];
    print_pairs(&mut io::stdout().lock(), &pairs).runtime()?;
    if let Some(path) = &args.csv {
        let file = File::create(path)
            .with_context(|| format!("cannot write {}", path.display()))
            .runtime()?;
        let mut w = csv::Writer::from_writer(file);
        w.write_record(pairs.iter().map(|(k, _)| *k)).runtime()?;
        w.write_record(pairs.iter().map(|(_, v)| v.as_str())).runtime()?;
        w.flush().runtime()?;
    }
    Ok(true)
}

fn dispatch(cli: &Cli) -> Outcome<bool> {
    match &cli.command {
        Command::Solve(a) => run_solve(a),
        Command::Study(StudyCommand::Convergence(a)) => run_convergence(a),
        Command::Study(StudyCommand::Complexity(a)) => run_complexity(a),
        Command::Verify(a) => run_verify(a),
        Command::Bounds(a) => run_bounds(a),
    }
}

fn threads(flag: Option<usize>) -> Outcome<Option<usize>> {
    let n = match flag {
        Some(n) => Some(n),
        None => match std::env::var("MLP_THREADS") {
            Ok(v) => Some(
                v.trim()
                    .parse()
                    .with_context(|| format!("invalid MLP_THREADS '{v}'"))
                    .usage()?,
            ),
            Err(_) => None,
        },
    };
    if n == Some(0) {
        return Err(Failure::Usage(anyhow!("thread count must be positive")));
    }
    Ok(n)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = threads(cli.threads).and_then(|n| {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(n) = n {
            builder = builder.num_threads(n);
        }
        let pool = builder.build().runtime()?;
        pool.install(|| dispatch(&cli))
    });
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            eprintln!("run 'mlp --help' for usage");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
