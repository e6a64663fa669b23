use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use imagnoise::runner::{
    compare, config_schema, parse_config, run, series_from_csv, RunError, ToleranceRule, OUT_DIR_ENV,
};

#[derive(Parser)]
#[command(
    name = "imagnoise",
    version,
    about = "Cross-check representations of the A + A -> 0 chain"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario described by a JSON config.
    Run {
        config: PathBuf,
        /// Output root; overrides the config and the environment.
        #[arg(long, env = OUT_DIR_ENV)]
        out_dir: Option<PathBuf>,
    },
    /// Compare two series CSVs (columns observable,t,value[,stderr]).
    Compare {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, value_enum, default_value = "abs")]
        rule: Rule,
        /// Tolerance for abs/rel, multiplier of the summed standard errors for kse.
        #[arg(long, default_value_t = 1e-8)]
        k: f64,
        /// Also write the report CSV here.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Print the JSON schema of the run config.
    Schema,
}

#[derive(Clone, Copy, ValueEnum)]
enum Rule {
    Abs,
    Rel,
    Kse,
}

fn fail(code: u8, msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(code)
}

fn run_cmd(config: PathBuf, out_dir: Option<PathBuf>) -> ExitCode {
    let text = match std::fs::read_to_string(&config) {
        Ok(t) => t,
        Err(e) => return fail(2, format!("cannot read {}: {e}", config.display())),
    };
    let mut cfg = match parse_config(&text) {
        Ok(c) => c,
        Err(e) => return fail(e.exit_code() as u8, e),
    };
    if let Some(dir) = out_dir {
        cfg.output_dir = dir;
    }
    match run(&cfg) {
        Ok(outcome) => {
            let rep = &outcome.report;
            for p in &rep.pairs {
                println!(
                    "{} vs {}: {} compared, {} failed",
                    p.engine_a, p.engine_b, p.compared, p.failed
                );
            }
            println!("artifacts in {}", outcome.dir.display());
            if rep.passed() {
                println!("PASS");
            } else {
                println!("FAIL ({} of {} rows)", rep.n_failed(), rep.rows.len());
            }
            ExitCode::from(outcome.exit_code() as u8)
        }
        Err(e @ RunError::Config { .. }) => fail(2, e),
        Err(e) => fail(3, e),
    }
}

fn compare_cmd(a: PathBuf, b: PathBuf, rule: Rule, k: f64, output: Option<PathBuf>) -> ExitCode {
    if !(k >= 0.0) {
        return fail(2, "--k must be a non-negative number");
    }
    let load = |p: &PathBuf| {
        std::fs::read_to_string(p)
            .map_err(|e| format!("cannot read {}: {e}", p.display()))
            .and_then(|t| series_from_csv(&t).map_err(|e| format!("{}: {e}", p.display())))
    };
    let (sa, sb) = match (load(&a), load(&b)) {
        (Ok(x), Ok(y)) => (x, y),
        (Err(e), _) | (_, Err(e)) => return fail(2, e),
    };
    let rule = match rule {
        Rule::Abs => ToleranceRule::absolute(k),
        Rule::Rel => ToleranceRule::relative(k),
        Rule::Kse => ToleranceRule::k_se(k),
    };
    let report = match compare(&sa, &sb, rule) {
        Ok(r) => r,
        Err(e) => return fail(2, e),
    };
    let csv = report.to_csv();
    if let Some(path) = output {
        if let Err(e) = std::fs::write(&path, &csv) {
            return fail(3, format!("cannot write {}: {e}", path.display()));
        }
    }
    print!("{csv}");
    if report.passed() {
        ExitCode::SUCCESS
    } else {
        eprintln!("{} of {} rows outside tolerance", report.n_failed(), report.rows.len());
        ExitCode::from(1)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match cli.command {
        Command::Run { config, out_dir } => run_cmd(config, out_dir),
        Command::Compare { a, b, rule, k, output } => compare_cmd(a, b, rule, k, output),
        Command::Schema => {
            println!(
                "{}",
                serde_json::to_string_pretty(&config_schema()).expect("schema serializes")
            );
            ExitCode::SUCCESS
        }
    }
}
