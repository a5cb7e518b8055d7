use std::process::ExitCode;

use clap::Parser;

use ssep_cli::{execute, Cli, CliError};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}

fn run(cli: &Cli) -> Result<i32, CliError> {
    let cfg = cli.run_config()?.resolve()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.workers.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Config(format!("cannot start {} workers: {e}", cli.workers.unwrap_or(0))))?;
    let (report, _) = pool.install(|| execute(&cfg))?;
    for o in &report.outcomes {
        println!("{} {}: {}", if o.passed { "PASS" } else { "FAIL" }, o.name, o.detail);
    }
    Ok(report.exit_code())
}
