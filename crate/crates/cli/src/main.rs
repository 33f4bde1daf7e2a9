mod args;
mod commands;
mod output;

use args::{Cli, Command, Format};
use clap::error::ErrorKind;
use clap::Parser;
use output::{apply_config, CliError, CliResult, Output};
use serde_json::{Map, Value};
use std::path::PathBuf;
use std::process::ExitCode;

fn load_config(path: &std::path::Path) -> CliResult<Map<String, Value>> {
    match output::parse_json::<Value>(path)? {
        Value::Object(m) => Ok(m),
        _ => Err(CliError::Usage(format!("{}: config must be a JSON object", path.display()))),
    }
}

/// Pulls the global keys out of a config so the rest can target the subcommand.
fn take_globals(cfg: &mut Map<String, Value>) -> CliResult<(Option<PathBuf>, Option<Format>)> {
    let dir = match cfg.remove("output_dir") {
        None => None,
        Some(Value::String(s)) => Some(PathBuf::from(s)),
        Some(v) => return Err(CliError::Usage(format!("output_dir must be a string, got {v}"))),
    };
    let format = match cfg.remove("format") {
        None => None,
        Some(v) => Some(serde_json::from_value(v).map_err(|e| CliError::Usage(format!("format: {e}")))?),
    };
    Ok((dir, format))
}

fn dispatch(cli: Cli) -> CliResult<bool> {
    let mut cfg = cli.config.as_deref().map(load_config).transpose()?;
    let (cfg_dir, cfg_format) = match cfg.as_mut() {
        Some(c) => take_globals(c)?,
        None => (None, None),
    };
    let cfg = cfg.as_ref();
    let (out, config): (Output, Value) = match cli.command {
        Command::Kernel(a) => {
            let (a, v) = apply_config(a, cfg)?;
            (commands::kernel(&a)?, v)
        }
        Command::Prop(a) => {
            let (a, v) = apply_config(a, cfg)?;
            (commands::prop(&a)?, v)
        }
        Command::Forest(f) => {
            use args::ForestCommand as F;
            let (f, v) = match f {
                F::Enumerate(a) => apply_config(a, cfg).map(|(a, v)| (F::Enumerate(a), v))?,
                F::Reduce(a) => apply_config(a, cfg).map(|(a, v)| (F::Reduce(a), v))?,
                F::Merge(a) => apply_config(a, cfg).map(|(a, v)| (F::Merge(a), v))?,
                F::Validate(a) => apply_config(a, cfg).map(|(a, v)| (F::Validate(a), v))?,
            };
            (commands::forest(&f)?, v)
        }
        Command::Lemma(a) => {
            let (a, v) = apply_config(a, cfg)?;
            (commands::lemma(&a)?, v)
        }
        Command::Flow(f) => {
            use args::FlowCommand as F;
            let (f, v) = match f {
                F::Tadpole(a) => apply_config(a, cfg).map(|(a, v)| (F::Tadpole(a), v))?,
                F::Fourpoint(a) => apply_config(a, cfg).map(|(a, v)| (F::Fourpoint(a), v))?,
                F::RobinLimit(a) => apply_config(a, cfg).map(|(a, v)| (F::RobinLimit(a), v))?,
                F::Amputation(a) => apply_config(a, cfg).map(|(a, v)| (F::Amputation(a), v))?,
                F::PowerCounting(a) => apply_config(a, cfg).map(|(a, v)| (F::PowerCounting(a), v))?,
            };
            (commands::flow(&f)?, v)
        }
    };
    let dir = cfg_dir.or(cli.output_dir);
    out.emit(&config, cfg_format.or(cli.format), dir.as_deref())?;
    Ok(out.passed)
}

/// Runs the CLI on `argv` and returns the process exit code:
/// 0 on success, 1 when a check or evaluation fails, 2 on usage errors.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
        }
    };
    match dispatch(cli) {
        Ok(true) => 0,
        Ok(false) => {
            eprintln!("check failed; see the `passed` fields of the output");
            1
        }
        Err(e) => {
            eprintln!("{e}");
            e.code()
        }
    }
}

fn main() -> ExitCode {
    ExitCode::from(run(std::env::args_os()) as u8)
}
