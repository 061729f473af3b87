mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use knot_core::backends::{Backend, ReplayStore};
use knot_core::harness::{run_bench, run_samples_sequential, with_workers, BenchSpec, PlanSource, Scheme};
use knot_core::lwt::{parse_script, to_dot, validate_script, LwtScript};
use knot_core::metrics::{score, task_prompt_cost, Report};
use knot_core::pipeline::{
    build_extraction_prompt, build_translation_prompt, run_knot, AblationConfig, FixturePlanner, KnotError,
    KnotOptions, SolutionPlan,
};
use knot_core::runtime::ExecOptions;
use knot_core::tasks::{generate_with, GenerateOptions, Rounding, TaskKind};

use config::{GlobalArgs, Settings};

#[derive(Parser)]
#[command(
    name = "knot",
    version,
    about = "Plan, translate and execute LWT scripts as networks of single-step inferences"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum RoundingArg {
    PerStep,
    FinalOnly,
}

impl From<RoundingArg> for Rounding {
    fn from(r: RoundingArg) -> Self {
        match r {
            RoundingArg::PerStep => Rounding::PerStep,
            RoundingArg::FinalOnly => Rounding::FinalOnly,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum GraphFormat {
    Dot,
    Json,
}

#[derive(Debug, clap::Args)]
struct InstanceArgs {
    /// yelp, keyword, sorting, set_intersection, arithmetic or large_digit.
    #[arg(long)]
    task: TaskKind,
    /// Problem size; defaults to the task's smallest.
    #[arg(long)]
    size: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Six-character ablation mask, `1` keeps a component.
    #[arg(long, default_value = "111111")]
    ablation: AblationConfig,
    /// How the arithmetic ground truth rounds.
    #[arg(long, value_enum, default_value = "per-step")]
    rounding: RoundingArg,
    /// Arithmetic operands from 10 to 99.
    #[arg(long)]
    two_digit: bool,
}

impl InstanceArgs {
    fn size(&self) -> usize {
        self.size.unwrap_or(self.task.sizes()[0])
    }

    fn generate(&self) -> GenerateOptions {
        GenerateOptions { two_digit_operands: self.two_digit }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Solve one generated instance and write its execution trace.
    Run {
        #[command(flatten)]
        instance: InstanceArgs,
        /// Execute this LWT script instead of the reference script.
        #[arg(long)]
        script: Option<PathBuf>,
        #[arg(long, default_value = "trace.jsonl")]
        trace: PathBuf,
        /// Print a JSON summary instead of the bare answer.
        #[arg(long)]
        json: bool,
    },
    /// Score schemes over a grid of tasks and sizes.
    Bench {
        /// Comma-separated tasks; all six by default.
        #[arg(long, value_delimiter = ',')]
        tasks: Vec<TaskKind>,
        /// Comma-separated sizes; each task's documented sizes by default.
        #[arg(long, value_delimiter = ',')]
        sizes: Vec<usize>,
        /// knot, zero_shot, few_shot, zero_cot or cot.
        #[arg(long, value_delimiter = ',', default_value = "knot")]
        schemes: Vec<Scheme>,
        #[arg(short, long, default_value_t = 100)]
        n: usize,
        /// Sample i uses seed base + i.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "111111")]
        ablation: AblationConfig,
        #[arg(long, value_enum, default_value = "per-step")]
        rounding: RoundingArg,
        #[arg(long)]
        two_digit: bool,
        /// Report JSON path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Accuracy grid as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Check an LWT script for forward references and unbound inputs.
    Validate {
        path: PathBuf,
        /// Named inputs the script may use.
        #[arg(long = "input", default_values = ["input", "Set1", "Set2"])]
        inputs: Vec<String>,
        #[arg(long)]
        json: bool,
    },
    /// Emit the dependency graph of an LWT script.
    Graph {
        path: PathBuf,
        #[arg(long, value_enum, default_value = "dot")]
        format: GraphFormat,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run instances and save every execution prompt and response as a replay fixture.
    Record {
        #[command(flatten)]
        instance: InstanceArgs,
        #[arg(short, long, default_value_t = 1)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
        /// Also record planning calls here when a planning backend is configured.
        #[arg(long)]
        plan_out: Option<PathBuf>,
    },
    /// Run the full scheme and each single-component removal.
    Ablate {
        #[command(flatten)]
        instance: InstanceArgs,
        #[arg(short, long, default_value_t = 100)]
        n: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Validate { path, inputs, json } => cmd_validate(&path, &inputs, json),
        Command::Graph { path, format, out } => cmd_graph(&path, format, out.as_deref()),
        command => {
            let settings = Settings::resolve(&cli.global)?;
            match command {
                Command::Run { instance, script, trace, json } => {
                    cmd_run(&settings, &instance, script.as_deref(), &trace, json)
                }
                Command::Bench { tasks, sizes, schemes, n, seed, ablation, rounding, two_digit, out, csv } => {
                    let tasks = if tasks.is_empty() { TaskKind::ALL.to_vec() } else { tasks };
                    let mut specs = Vec::new();
                    for task in tasks {
                        let task_sizes = if sizes.is_empty() { task.sizes().to_vec() } else { sizes.clone() };
                        for size in task_sizes {
                            for &scheme in &schemes {
                                let mut spec = BenchSpec::new(task, size, scheme, n);
                                spec.base_seed = seed;
                                spec.ablation = ablation;
                                spec.rounding = rounding.into();
                                spec.generate = GenerateOptions { two_digit_operands: two_digit };
                                specs.push(spec);
                            }
                        }
                    }
                    cmd_bench(&settings, &specs, out.as_deref(), csv.as_deref())
                }
                Command::Record { instance, n, out, plan_out } => {
                    cmd_record(&settings, &instance, n, &out, plan_out.as_deref())
                }
                Command::Ablate { instance, n, out, csv } => {
                    cmd_ablate(&settings, &instance, n, out.as_deref(), csv.as_deref())
                }
                Command::Validate { .. } | Command::Graph { .. } => unreachable!(),
            }
        }
    }
}

fn read_script(path: &Path) -> Result<LwtScript> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_script(&text).with_context(|| format!("parsing {}", path.display()))
}

fn write_output(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn exec_options(settings: &Settings) -> (ExecOptions, Option<usize>) {
    (ExecOptions::default(), settings.max_in_flight.filter(|n| *n > 1))
}

fn cmd_validate(path: &Path, inputs: &[String], json: bool) -> Result<ExitCode> {
    let script = read_script(path)?;
    let report = validate_script(&script, inputs);
    if json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        println!("{}: {} instructions, {}", path.display(), script.len(), report.summary());
        for e in &report.errors {
            println!("error ({}): {}: {}", e.index, e.kind, e.message);
        }
        for w in &report.warnings {
            let at = w.index.map(|i| format!(" ({i})")).unwrap_or_default();
            println!("warning{at}: {}", w.message);
        }
    }
    Ok(if report.is_ok() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn cmd_graph(path: &Path, format: GraphFormat, out: Option<&Path>) -> Result<ExitCode> {
    let script = read_script(path)?;
    let text = match format {
        GraphFormat::Dot => to_dot(&script),
        GraphFormat::Json => script.to_json() + "\n",
    };
    write_output(out, &text)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_run(
    settings: &Settings,
    args: &InstanceArgs,
    script: Option<&Path>,
    trace_path: &Path,
    json: bool,
) -> Result<ExitCode> {
    let instance = generate_with(args.task, args.size(), args.seed, args.generate())?;
    let exec = settings.exec_backend()?;
    let planner: Box<dyn Backend> = match (script, settings.plan_backend()?) {
        (Some(path), _) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            Box::new(FixturePlanner::new(args.task.fixture_plan(), text))
        }
        (None, Some(backend)) => backend,
        (None, None) => Box::new(FixturePlanner::new(args.task.fixture_plan(), instance.reference_script())),
    };
    let (exec_opts, max_in_flight) = exec_options(settings);
    let options = KnotOptions { ablation: args.ablation, exec: exec_opts, max_in_flight };
    let parts = args.task.prompt_parts();
    let result =
        match run_knot(&instance.query(), &instance.bindings(), &parts, options, planner.as_ref(), exec.as_ref()) {
            Ok(r) => r,
            Err(KnotError::Execution(e)) => {
                fs::write(trace_path, e.trace.to_jsonl())
                    .with_context(|| format!("writing {}", trace_path.display()))?;
                eprintln!("partial trace written to {}", trace_path.display());
                return Err(e.into());
            }
            Err(KnotError::Parse { source, raw }) => bail!("{source}\n--- translation output ---\n{raw}"),
            Err(KnotError::Invalid { report, raw }) => {
                bail!("generated script is invalid: {}\n--- script ---\n{raw}", report.summary())
            }
            Err(e) => return Err(e.into()),
        };
    fs::write(trace_path, result.trace.to_jsonl()).with_context(|| format!("writing {}", trace_path.display()))?;

    let truth = instance.ground_truth_with(args.rounding.into());
    let normalized = knot_core::tasks::normalize(args.task, &result.answer).ok();
    let correct = normalized.as_ref() == Some(&truth);
    let usage = result.planning_usage + result.trace.usage();
    if json {
        let summary = serde_json::json!({
            "task": args.task,
            "size": args.size(),
            "seed": args.seed,
            "query": instance.query(),
            "answer": result.answer,
            "ground_truth": truth.to_string(),
            "correct": correct,
            "instructions": result.script.len(),
            "usage": usage,
            "trace": trace_path,
        });
        println!("{}", serde_json::to_string_pretty(&summary)?);
    } else {
        println!("{}", result.answer);
        eprintln!(
            "ground truth {truth} ({}), {} calls, trace in {}",
            if correct { "correct" } else { "incorrect" },
            result.trace.steps.len(),
            trace_path.display()
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn run_specs(settings: &Settings, specs: &[BenchSpec]) -> Result<Report> {
    if specs.iter().any(|s| s.n == 0) {
        bail!("-n must be positive");
    }
    let exec = settings.exec_backend()?;
    let planner = settings.plan_backend()?;
    let plan = match &planner {
        Some(b) => PlanSource::Backend(b.as_ref()),
        None => PlanSource::Fixture,
    };
    let (_, max_in_flight) = exec_options(settings);
    let mut report = Report { prices: settings.prices, ..Report::default() };
    for spec in specs {
        let spec = BenchSpec { max_in_flight, ..*spec };
        let result = with_workers(settings.jobs, || run_bench(&spec, plan, exec.as_ref()))?;
        eprintln!(
            "{}-{} {} [{}]: {}/{} correct",
            spec.task, spec.size, spec.scheme, result.label.ablation, result.n_correct, result.n_samples
        );
        report.results.push(result);
    }
    let mut tasks: Vec<TaskKind> = specs.iter().map(|s| s.task).collect();
    tasks.sort();
    tasks.dedup();
    for task in tasks {
        let usage = report.results.iter().filter(|r| r.label.task == task).map(|r| r.usage).sum();
        report.costs.push(task_prompt_cost(task).with_usage(usage, settings.prices.as_ref()));
    }
    Ok(report)
}

fn emit_report(report: &Report, out: Option<&Path>, csv: Option<&Path>) -> Result<()> {
    eprint!("{}", report.to_table());
    write_output(out, &(report.to_json() + "\n"))?;
    if let Some(path) = csv {
        fs::write(path, report.to_csv()?).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn cmd_bench(settings: &Settings, specs: &[BenchSpec], out: Option<&Path>, csv: Option<&Path>) -> Result<ExitCode> {
    for spec in specs {
        if !spec.task.sizes().contains(&spec.size) {
            bail!("{} does not support size {} (supported: {:?})", spec.task, spec.size, spec.task.sizes());
        }
    }
    let report = run_specs(settings, specs)?;
    emit_report(&report, out, csv)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_ablate(
    settings: &Settings,
    args: &InstanceArgs,
    n: usize,
    out: Option<&Path>,
    csv: Option<&Path>,
) -> Result<ExitCode> {
    let instance = generate_with(args.task, args.size(), args.seed, args.generate())?;
    let parts = args.task.prompt_parts();
    let plan = SolutionPlan::new(args.task.fixture_plan());
    let specs: Vec<BenchSpec> = AblationConfig::single_removals()
        .into_iter()
        .map(|ablation| {
            let extraction = build_extraction_prompt(&instance.query(), &parts, ablation);
            let translation = build_translation_prompt(&plan, &instance.query(), &parts, ablation);
            eprintln!(
                "{}: extraction prompt {} chars, translation prompt {} chars",
                ablation.mask(),
                extraction.chars().count(),
                translation.chars().count()
            );
            let mut spec = BenchSpec::new(args.task, args.size(), Scheme::Knot, n);
            spec.base_seed = args.seed;
            spec.ablation = ablation;
            spec.rounding = args.rounding.into();
            spec.generate = args.generate();
            spec
        })
        .collect();
    if settings.plan_backend()?.is_none() {
        eprintln!("note: the fixture planner ignores prompt content, so accuracy is the same for every variant");
    }
    let report = run_specs(settings, &specs)?;
    emit_report(&report, out, csv)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_record(
    settings: &Settings,
    args: &InstanceArgs,
    n: usize,
    out: &Path,
    plan_out: Option<&Path>,
) -> Result<ExitCode> {
    if n == 0 {
        bail!("-n must be positive");
    }
    let recorder = ReplayStore::record(out, settings.exec_backend()?)?;
    let plan_recorder = match (settings.plan_backend()?, plan_out) {
        (Some(b), Some(path)) => Some(Box::new(ReplayStore::record(path, b)?) as Box<dyn Backend>),
        (Some(b), None) => Some(b),
        (None, _) => None,
    };
    let plan = match &plan_recorder {
        Some(b) => PlanSource::Backend(b.as_ref()),
        None => PlanSource::Fixture,
    };
    let mut spec = BenchSpec::new(args.task, args.size(), Scheme::Knot, n);
    spec.base_seed = args.seed;
    spec.ablation = args.ablation;
    spec.rounding = args.rounding.into();
    spec.generate = args.generate();
    // one sample at a time keeps the fixture in a reproducible order
    let outcomes = run_samples_sequential(&spec, plan, &recorder)?;
    let result = score(spec.label(), outcomes)?;
    eprintln!(
        "recorded {} prompts from {} runs ({} correct) to {}",
        recorder.len(),
        result.n_samples,
        result.n_correct,
        out.display()
    );
    if let Some(failed) = result.samples.iter().find(|s| s.error.is_some()) {
        bail!("seed {} failed: {}", failed.seed, failed.error.as_deref().unwrap_or_default());
    }
    Ok(ExitCode::SUCCESS)
}
