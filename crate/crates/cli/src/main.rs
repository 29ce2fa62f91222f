use std::process::ExitCode;

use hardcore_cli::{parse_and_validate, run, EXIT_ERROR};

fn main() -> ExitCode {
    let (cfg, warnings) = match parse_and_validate(std::env::args_os()) {
        Ok(x) => x,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_ERROR as u8);
        }
    };
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    let outcome = match run(&cfg) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_ERROR as u8);
        }
    };
    let written = match &cfg.output.path {
        Some(p) => std::fs::write(p, &outcome.text),
        None => {
            use std::io::Write;
            std::io::stdout().write_all(outcome.text.as_bytes())
        }
    };
    if let Err(e) = written {
        eprintln!("error: output: {e}");
        return ExitCode::from(EXIT_ERROR as u8);
    }
    ExitCode::from(outcome.exit_code as u8)
}
