mod args;
mod observable;
mod run;

use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use serde_json::json;

use args::{Cli, Format};
use run::{CliError, Report, EXIT_CHECK_FAILED, EXIT_OK, EXIT_USAGE, REPORT_SCHEMA};

fn render(cli: &Cli, report: &Report) -> Result<String, CliError> {
    match cli.global.output {
        Format::Human => Ok(report.human.clone()),
        Format::Json if report.bare_json => Ok(serde_json::to_string_pretty(&report.result).expect("json") + "\n"),
        Format::Json => {
            let doc = json!({
                "schema": REPORT_SCHEMA,
                "command": cli.command.name(),
                "config": cli,
                "result": report.result,
                "pass": report.pass,
            });
            Ok(serde_json::to_string_pretty(&doc).expect("json") + "\n")
        }
        Format::Csv => report
            .csv
            .clone()
            .ok_or_else(|| CliError::usage(format!("`{}` has no CSV output", cli.command.name()))),
    }
}

fn emit(cli: &Cli, text: &str) -> Result<(), CliError> {
    match &cli.global.output_path {
        Some(path) => std::fs::write(path, text).map_err(|e| CliError::io(format!("{}: {e}", path.display()))),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::io(format!("stdout: {e}"))),
    }
}

fn execute(cli: &Cli) -> Result<i32, CliError> {
    if cli.global.dry_run {
        emit(cli, &(serde_json::to_string_pretty(cli).expect("json") + "\n"))?;
        return Ok(EXIT_OK);
    }
    let report = run::run(cli)?;
    emit(cli, &render(cli, &report)?)?;
    Ok(if report.pass { EXIT_OK } else { EXIT_CHECK_FAILED })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE as u8 } else { EXIT_OK as u8 });
        }
    };
    let code = execute(&cli).unwrap_or_else(|e| {
        eprintln!("error: {}", e.message);
        e.code
    });
    ExitCode::from(code as u8)
}
