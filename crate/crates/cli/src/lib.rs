//! Command-line front end: model files, command dispatch and emission of
//! reports and CSV trajectories.

pub mod commands;
pub mod error;
mod fields;
pub mod kinds;
pub mod model;
pub mod output;

use std::io::Write;
use std::path::Path;

pub use commands::{execute, Command, Output, RunOptions};
pub use error::{CliError, EXIT_CHECK_FAILED, EXIT_INPUT, EXIT_NUMERICAL, EXIT_OK};
pub use model::{load_model, load_model_with, parse_model, LoadOptions, Model};

fn emit(cmd: Command, out: &Output, opts: &RunOptions, stdout: &mut dyn Write) -> Result<(), CliError> {
    match &opts.out {
        Some(path) => {
            std::fs::write(path, &out.text)?;
            if opts.gnuplot {
                if let Some(columns) = out.columns {
                    std::fs::write(path.with_extension("gp"), output::gnuplot_script(path, columns))?;
                }
            }
        }
        None if opts.gnuplot && cmd.produces_csv() => {
            return Err(CliError::Input(
                "--gnuplot needs --out so the script can reference the CSV".into(),
            ));
        }
        None => stdout.write_all(out.text.as_bytes())?,
    }
    Ok(())
}

/// Loads the model, runs the command and writes its artifacts. Returns the
/// process exit code.
pub fn run(cmd: Command, model_path: &Path, opts: &RunOptions, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let result = load_model(model_path).and_then(|model| {
        let out = execute(cmd, &model, opts)?;
        emit(cmd, &out, opts, stdout)?;
        Ok(out)
    });
    match result {
        Ok(out) => {
            for d in &out.diagnostics {
                let _ = writeln!(stderr, "{d}");
            }
            out.code
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}
