//! `rcabench`: batch runner for reversible cellular automaton experiments.

mod config;
mod run;
mod table;
mod verify;

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rcabench::engine::{verify_reversibility, verify_translation_covariance, Rule, RuleDescription, VerifyMode};
use rcabench::lattice::Geometry;
use serde_json::{json, Value};

use crate::run::{Failure, Overrides};

#[derive(Parser, Debug)]
#[command(name = "rcabench", version, about = "Reversible cellular automaton workbench")]
struct Cli {
    /// Seed for every seeded stream (overrides the config's seed)
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on this
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Enumeration and search cap (overrides the config and RCABENCH_CAP)
    #[arg(long, global = true)]
    cap: Option<u64>,
    /// Record output path (JSON lines); stdout when absent
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run every experiment of a config file
    Run { config: PathBuf },
    /// Re-verify the certificates in a record file
    Verify { records: PathBuf },
    /// Built-in rules
    Rules {
        #[command(subcommand)]
        command: RulesCommand,
    },
}

#[derive(Subcommand, Debug)]
enum RulesCommand {
    /// List built-in rules
    List,
    /// Check reversibility and translation covariance of a rule file
    Check { file: PathBuf },
}

fn fail(f: Failure) -> ExitCode {
    eprintln!("rcabench: {}", f.message());
    ExitCode::from(f.exit_code() as u8)
}

fn open_out(path: Option<&Path>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

fn cmd_run(cli: &Cli, path: &Path) -> ExitCode {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => return fail(Failure::Config(format!("{}: {e}", path.display()))),
    };
    let cfg = match config::parse_config(&text) {
        Ok(c) => c,
        Err(m) => return fail(Failure::Config(m)),
    };
    let base = path.parent().unwrap_or(Path::new("."));
    let out_path = cli.out.clone().or_else(|| cfg.out.as_ref().map(|p| base.join(p)));
    let mut out = match open_out(out_path.as_deref()) {
        Ok(o) => o,
        Err(e) => return fail(Failure::Config(format!("output: {e}"))),
    };
    let overrides = Overrides {
        seed: cli.seed,
        cap: cli.cap,
    };
    let mut records = Vec::new();
    let mut io_error = None;
    let status = run::run(&cfg, base, &overrides, &mut |r: &Value| {
        let line = serde_json::to_string(r).expect("records serialize");
        if let Err(e) = writeln!(out, "{line}").and_then(|_| out.flush()) {
            io_error.get_or_insert(e);
        }
        records.push(r.clone());
    });
    drop(out);
    if let Some(e) = io_error {
        return fail(Failure::Config(format!("output: {e}")));
    }
    let table = table::render(&records);
    if out_path.is_some() {
        print!("{table}");
    } else {
        eprint!("{table}");
    }
    match status {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => fail(f),
    }
}

fn cmd_verify(path: &Path) -> ExitCode {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) => return fail(Failure::Config(format!("{}: {e}", path.display()))),
    };
    let mut rows = Vec::new();
    let mut failed = false;
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = match line {
            Ok(l) => l,
            Err(e) => return fail(Failure::Config(format!("line {}: {e}", n + 1))),
        };
        if line.trim().is_empty() {
            continue;
        }
        let record: Value = match serde_json::from_str(&line) {
            Ok(v) => v,
            Err(e) => return fail(Failure::Config(format!("line {}: {e}", n + 1))),
        };
        let verdict = match verify::verify_record(&record) {
            Ok(v) => v,
            Err(m) => return fail(Failure::Config(format!("line {}: {m}", n + 1))),
        };
        failed |= verdict == verify::Verdict::Failed;
        let id = record.get("experiment").and_then(Value::as_str).unwrap_or_default().to_string();
        let kind = record.get("kind").and_then(Value::as_str).unwrap_or_default().to_string();
        rows.push([id, kind, verdict.as_str().to_string()]);
    }
    print!("{}", table::render_rows(["experiment", "kind", "verdict"], &rows));
    if failed {
        fail(Failure::Violation("certificate re-verification failed".into()))
    } else {
        ExitCode::SUCCESS
    }
}

/// Smallest torus the rule fits on: side 4 on every axis.
fn check_geometry(rule: &Rule) -> Result<Geometry, String> {
    Geometry::new(vec![4; rule.dimension()], rule.alphabet().unwrap_or(2)).map_err(|e| e.to_string())
}

fn cmd_rules_check(cli: &Cli, path: &Path) -> ExitCode {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => return fail(Failure::Config(format!("{}: {e}", path.display()))),
    };
    let rule = match RuleDescription::parse_json(&text) {
        Ok(r) => r,
        Err(e) => return fail(Failure::Config(e.to_string())),
    };
    let g = match check_geometry(&rule) {
        Ok(g) => g,
        Err(m) => return fail(Failure::Config(m)),
    };
    let cap = cli.cap.unwrap_or(1 << 20);
    let mode = if g.configurations(g.cell_count()) <= cap as u128 {
        VerifyMode::Exhaustive
    } else {
        VerifyMode::Sampled {
            samples: 10_000,
            seed: cli.seed.unwrap_or(0),
        }
    };
    let step = if rule.in_covariance_sublattice(&[1]) { 1 } else { 2 };
    let mut unit = vec![0; g.dimension()];
    unit[0] = step;
    let reversible = verify_reversibility(&rule, &g, mode, cap);
    let covariant = verify_translation_covariance(&rule, &g, &unit, mode, cap);
    let (reversible, covariant) = match (reversible, covariant) {
        (Ok(r), Ok(c)) => (r, c),
        (Err(e), _) | (_, Err(e)) => return fail(Failure::Config(e.to_string())),
    };
    let report = json!({
        "rule_label": rule.label(),
        "geometry": g,
        "mode": mode,
        "tested": reversible.tested.to_string(),
        "reversible": reversible.pass,
        "covariant": covariant,
    });
    println!("{report}");
    if reversible.pass && covariant {
        ExitCode::SUCCESS
    } else {
        fail(Failure::Violation("rule check failed".into()))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.workers {
        if n == 0 {
            return fail(Failure::Config("--workers must be positive".into()));
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            return fail(Failure::Config(format!("thread pool: {e}")));
        }
    }
    match &cli.command {
        Command::Run { config } => cmd_run(&cli, config),
        Command::Verify { records } => cmd_verify(records),
        Command::Rules { command: RulesCommand::List } => {
            let rows: Vec<[String; 2]> = Rule::builtin_names()
                .iter()
                .map(|(n, d)| [n.to_string(), d.to_string()])
                .collect();
            print!("{}", table::render_rows(["name", "description"], &rows));
            ExitCode::SUCCESS
        }
        Command::Rules {
            command: RulesCommand::Check { file },
        } => cmd_rules_check(&cli, file),
    }
}
