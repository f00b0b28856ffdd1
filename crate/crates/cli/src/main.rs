use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use milp::{export_lp, SolverParams};
use plausible_ce::bench::{brute_force_oracle, run_benchmark, DatasetSource, Pipeline, RunConfig};
use plausible_ce::classifiers::{evaluate, ClassifierKind, TrainConfig};
use plausible_ce::formulations::{build_model, explain, Formulation, Outcome};
use plausible_ce::stats::LofContext;
use plausible_ce::Error;
use serde_json::json;

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_NO_RECOURSE: u8 = 3;

/// Plausible counterfactual explanations for credit classifiers.
#[derive(Debug, Parser)]
#[command(name = "pce", version)]
struct Cli {
    /// Run config (JSON). Without one, a synthetic German-like dataset is used.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Restricts the run to one formulation.
    #[arg(long, global = true)]
    formulation: Option<Formulation>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a classifier and write model.json and metrics.json.
    Train {
        /// Overrides the classifier kind from the config.
        #[arg(long)]
        kind: Option<ClassifierKind>,
    },
    /// Explain one test instance and print the explanation as JSON.
    Explain(InstanceArgs),
    /// Run the benchmark sweep and write the CSV outputs.
    Bench,
    /// Build the MILP for one instance and write it in LP format without solving.
    ExportLp(InstanceArgs),
    /// Solve one instance by exhaustive enumeration.
    Oracle(InstanceArgs),
}

#[derive(Debug, Args)]
struct InstanceArgs {
    /// Index into the test split.
    #[arg(long)]
    instance: usize,
    /// Reference-set size; defaults to the first configured N.
    #[arg(long)]
    n: Option<usize>,
    /// Pre-trained model JSON; overrides the config.
    #[arg(long)]
    model: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Data(String),
    NoRecourse(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::InvalidParameter(_) => Failure::Usage(e.to_string()),
            _ => Failure::Data(e.to_string()),
        }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn load_config(cli: &Cli) -> CliResult<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::new(DatasetSource::Synthetic { rows: 1000 }),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(f) = cli.formulation {
        cfg.formulations = vec![f];
    }
    if let Some(o) = &cli.out {
        cfg.out_dir = o.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Prints to stdout, treating a closed pipe as success.
fn emit(text: &str) -> CliResult<()> {
    use std::io::Write;
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(Failure::Data(format!("stdout: {e}"))),
        _ => Ok(()),
    }
}

fn write_json(path: &Path, value: &serde_json::Value) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).expect("json value") + "\n";
    std::fs::write(path, text).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

fn create_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| Failure::Data(format!("{}: {e}", dir.display())))
}

struct Prepared {
    pipe: Pipeline,
    lof: LofContext,
    x_bar: Vec<f64>,
    n: usize,
}

fn prepare_instance(cfg: &mut RunConfig, args: &InstanceArgs) -> CliResult<Prepared> {
    if let Some(m) = &args.model {
        cfg.model = Some(m.clone());
    }
    let n = args.n.unwrap_or(cfg.n_values[0]);
    if n < 2 {
        return Err(Failure::Usage("--n must be at least 2".into()));
    }
    let pipe = Pipeline::prepare(cfg)?;
    let Some(x_bar) = pipe.test.rows.get(args.instance).cloned() else {
        return Err(Failure::Usage(format!(
            "instance {} out of range: the test split has {} rows",
            args.instance,
            pipe.test.len()
        )));
    };
    let lof = pipe.reference_set(n, cfg.reference_seed(n))?;
    Ok(Prepared { pipe, lof, x_bar, n })
}

fn single_formulation(cfg: &RunConfig) -> Formulation {
    if cfg.formulations.len() == 1 { cfg.formulations[0] } else { Formulation::Reduced }
}

fn cmd_train(cli: &Cli, kind: Option<ClassifierKind>) -> CliResult<()> {
    let mut cfg = load_config(cli)?;
    if let Some(k) = kind {
        cfg.classifier.kind = k;
    }
    cfg.model = None;
    let pipe = Pipeline::prepare(&cfg)?;
    let train_m = evaluate(&pipe.classifier, &pipe.train)?;
    let test_m = evaluate(&pipe.classifier, &pipe.test)?;
    create_dir(&cfg.out_dir)?;
    pipe.classifier.save(cfg.out_dir.join("model.json"))?;
    let cls = TrainConfig { seed: cfg.seed, ..cfg.classifier };
    let metrics = json!({ "classifier": cls, "train": train_m, "test": test_m });
    write_json(&cfg.out_dir.join("metrics.json"), &metrics)?;
    emit(&(serde_json::to_string_pretty(&metrics).expect("json value") + "\n"))
}

fn cmd_explain(cli: &Cli, args: &InstanceArgs) -> CliResult<()> {
    let mut cfg = load_config(cli)?;
    let p = prepare_instance(&mut cfg, args)?;
    let (space, k) = p.pipe.instance(&p.x_bar, &p.lof, &cfg.actions)?;
    let problem = p.pipe.problem(&p.lof, &space, &k, cfg.lambda, cfg.margin);
    let form = single_formulation(&cfg);
    let params = SolverParams::default().with_time_limit(cfg.time_limit(p.n));
    match explain(&problem, form, &params)? {
        Outcome::Found(e) => {
            let text = serde_json::to_string_pretty(&e).expect("explanation serializes") + "\n";
            if let Some(dir) = &cli.out {
                create_dir(dir)?;
                let path = dir.join(format!("explanation_{}_{}.json", args.instance, form));
                std::fs::write(&path, &text).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
            }
            emit(&text)
        }
        Outcome::NoRecourse { status, .. } => {
            Err(Failure::NoRecourse(format!("no recourse for instance {}: {}", args.instance, status.as_str())))
        }
    }
}

fn cmd_export_lp(cli: &Cli, args: &InstanceArgs) -> CliResult<()> {
    let mut cfg = load_config(cli)?;
    let p = prepare_instance(&mut cfg, args)?;
    let (space, k) = p.pipe.instance(&p.x_bar, &p.lof, &cfg.actions)?;
    let problem = p.pipe.problem(&p.lof, &space, &k, cfg.lambda, cfg.margin);
    let form = single_formulation(&cfg);
    let (model, _) = build_model(&problem, form)?;
    let text = export_lp(&model);
    match &cli.out {
        Some(dir) => {
            create_dir(dir)?;
            let path = dir.join(format!("instance_{}_n{}_{}.lp", args.instance, p.n, form));
            std::fs::write(&path, text).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
            emit(&format!("{}\n", path.display()))
        }
        None => emit(&text),
    }
}

fn cmd_oracle(cli: &Cli, args: &InstanceArgs) -> CliResult<()> {
    let mut cfg = load_config(cli)?;
    let p = prepare_instance(&mut cfg, args)?;
    let (space, k) = p.pipe.instance(&p.x_bar, &p.lof, &cfg.actions)?;
    let problem = p.pipe.problem(&p.lof, &space, &k, cfg.lambda, cfg.margin);
    let Some(best) = brute_force_oracle(&problem)? else {
        return Err(Failure::NoRecourse(format!("no valid action for instance {}", args.instance)));
    };
    let action: serde_json::Map<String, serde_json::Value> = space
        .dims
        .iter()
        .zip(&best.choice)
        .filter(|(d, &i)| i != d.zero)
        .map(|(d, &i)| (d.name.clone(), json!(d.label(i))))
        .collect();
    let out = json!({
        "action": action,
        "choice": best.choice,
        "counterfactual": space.counterfactual(&best.choice),
        "objective": best.objective,
        "md_l1": best.md_l1,
        "q1": best.q1,
    });
    let text = serde_json::to_string_pretty(&out).expect("json value") + "\n";
    if let Some(dir) = &cli.out {
        create_dir(dir)?;
        write_json(&dir.join(format!("oracle_{}.json", args.instance)), &out)?;
    }
    emit(&text)
}

fn cmd_bench(cli: &Cli) -> CliResult<()> {
    let cfg = load_config(cli)?;
    let out = run_benchmark(&cfg)?;
    emit(&format!(
        "explained {} instances, {} records written to {}\n",
        out.explained,
        out.records.len(),
        cfg.out_dir.display()
    ))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Train { kind } => cmd_train(&cli, *kind),
        Command::Explain(a) => cmd_explain(&cli, a),
        Command::Bench => cmd_bench(&cli),
        Command::ExportLp(a) => cmd_export_lp(&cli, a),
        Command::Oracle(a) => cmd_oracle(&cli, a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Data(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_DATA)
        }
        Err(Failure::NoRecourse(m)) => {
            eprintln!("{m}");
            ExitCode::from(EXIT_NO_RECOURSE)
        }
    }
}
