use std::path::PathBuf;
use std::process::ExitCode;

use clab_cli::catalogue::{catalogue, find};
use clab_cli::scenario::parse_scenarios;
use clab_cli::{emit, exit_code, run_scenario, Format, RunOptions, Scenario, Task};
use clab_core::ClabError;
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Map, Value};

/// Closed subgroups, Chabauty distances and expansivity certificates.
#[derive(Parser)]
#[command(name = "clab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Depth K of the epsilon grid p^-j, j = 0..K.
    #[arg(long = "precision-K", global = true, default_value_t = 24)]
    precision: u32,
    /// Cap on coset representatives per neighbourhood check.
    #[arg(long, global = true, default_value_t = 1 << 16)]
    budget: usize,
    #[arg(long, global = true, default_value = "json")]
    format: Format,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Include wall-clock timing (reports are then no longer byte-identical).
    #[arg(long, global = true)]
    timing: bool,
}

#[derive(Args, Clone)]
struct Target {
    /// Ambient: z, r, circle, qp, product, shift, or a compact literal such as qp:3:2.
    #[arg(long)]
    ambient: String,
    #[arg(long)]
    p: Option<u64>,
    /// Dimension for qp.
    #[arg(long)]
    n: Option<u64>,
    /// Automorphism literal (compact or JSON).
    #[arg(long = "t", alias = "automorphism", default_value = "id")]
    t: String,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file, or a built-in scenario by id.
    Run { scenario: String },
    /// List the built-in scenarios, or run them all with --run.
    Catalogue {
        #[arg(long)]
        run: bool,
    },
    /// Chabauty distance between two subgroups.
    Metric {
        #[command(flatten)]
        target: Target,
        #[arg(long)]
        a: String,
        #[arg(long)]
        b: String,
    },
    /// Windowed separation of a pair under T^n, |n| <= N.
    Separation {
        #[command(flatten)]
        target: Target,
        #[arg(long)]
        a: String,
        #[arg(long)]
        b: String,
        #[arg(long = "N", default_value_t = 20)]
        horizon: u64,
        #[arg(long)]
        delta: Option<String>,
    },
    /// Expansivity certificate (or a witness after a refusal).
    Certify {
        #[command(flatten)]
        target: Target,
        /// Delta for the fallback refutation.
        #[arg(long)]
        delta: Option<String>,
    },
    /// Refutation witness for a given delta.
    Refute {
        #[command(flatten)]
        target: Target,
        #[arg(long)]
        delta: String,
        #[arg(long = "N", default_value_t = 20)]
        horizon: u64,
    },
    /// Contraction groups C(T), C(T^-1) and M(T).
    Contract {
        #[command(flatten)]
        target: Target,
    },
    /// Closure of generated subgroups of a prime product, factor by factor.
    Decompose {
        #[command(flatten)]
        target: Target,
        /// Generator as comma-separated coordinates; repeat for a list of closures.
        #[arg(long = "gen", required = true)]
        gens: Vec<String>,
    },
}

fn literal(s: &str) -> Value {
    let t = s.trim();
    if t.starts_with('{') || t.starts_with('[') {
        serde_json::from_str(t).unwrap_or_else(|_| json!(s))
    } else {
        json!(s)
    }
}

impl Target {
    fn ambient(&self) -> Value {
        let mut s = self.ambient.clone();
        if let Some(p) = self.p {
            s = format!("{s}:{p}");
        }
        if let Some(n) = self.n {
            s = format!("{s}:{n}");
        }
        literal(&s)
    }

    fn scenario(&self, id: &str, task: Task, params: Value) -> Scenario {
        Scenario::new(id, "ad hoc", self.ambient(), literal(&self.t), task, params)
    }
}

fn put(params: &mut Map<String, Value>, k: &str, v: Option<Value>) {
    if let Some(v) = v {
        params.insert(k.into(), v);
    }
}

fn scenarios(cmd: &Command) -> Result<Vec<Scenario>, ClabError> {
    let mut params = Map::new();
    let one = |s: Scenario| Ok(vec![s]);
    match cmd {
        Command::Run { scenario } => {
            let path = PathBuf::from(scenario);
            if path.exists() {
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| ClabError::Malformed(format!("cannot read {}: {e}", path.display())))?;
                parse_scenarios(&text)
            } else {
                find(scenario)
                    .map(|s| vec![s])
                    .ok_or_else(|| ClabError::Malformed(format!("no scenario file or built-in id {scenario:?}")))
            }
        }
        Command::Catalogue { .. } => Ok(catalogue()),
        Command::Metric { target, a, b } => {
            params.insert("pairs".into(), json!([[literal(a), literal(b)]]));
            one(target.scenario("metric", Task::MetricTable, Value::Object(params)))
        }
        Command::Separation { target, a, b, horizon, delta } => {
            put(&mut params, "a", Some(literal(a)));
            put(&mut params, "b", Some(literal(b)));
            put(&mut params, "horizon", Some(json!(horizon)));
            put(&mut params, "delta", delta.as_ref().map(|d| json!(d)));
            one(target.scenario("separation", Task::Separation, Value::Object(params)))
        }
        Command::Certify { target, delta } => {
            put(&mut params, "delta", delta.as_ref().map(|d| json!(d)));
            one(target.scenario("certify", Task::Certify, Value::Object(params)))
        }
        Command::Refute { target, delta, horizon } => {
            put(&mut params, "delta", Some(json!(delta)));
            put(&mut params, "horizon", Some(json!(horizon)));
            one(target.scenario("refute", Task::Refute, Value::Object(params)))
        }
        Command::Contract { target } => one(target.scenario("contract", Task::Contract, json!({}))),
        Command::Decompose { target, gens } => {
            put(&mut params, "generators", Some(json!(gens)));
            one(target.scenario("decompose", Task::Decompose, Value::Object(params)))
        }
    }
}

fn write(common: &Common, text: &str) -> Result<(), String> {
    match &common.out {
        Some(path) => std::fs::write(path, text).map_err(|e| format!("cannot write {}: {e}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn listing(list: &[Scenario]) -> String {
    list.iter().map(|s| format!("{}\t{}\t{}\n", s.id, s.task.as_str(), s.anchor)).collect()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let common = &cli.common;
    let opts = RunOptions { precision: common.precision, budget: common.budget, timing: common.timing };
    let list = match scenarios(&cli.command) {
        Ok(l) => l,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(exit_code(&e) as u8);
        }
    };
    if let Command::Catalogue { run: false } = cli.command {
        return match write(common, &listing(&list)) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(2)
            }
        };
    }
    let mut reports = Vec::new();
    let mut code = 0;
    for s in &list {
        match run_scenario(s, &opts) {
            Ok(r) => reports.push(r),
            Err(e) => {
                eprintln!("error in scenario {}: {e}", s.id);
                code = code.max(exit_code(&e));
            }
        }
    }
    if let Err(e) = write(common, &emit(&reports, common.format)) {
        eprintln!("error: {e}");
        code = code.max(2);
    }
    ExitCode::from(code as u8)
}
