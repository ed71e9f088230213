mod args;
mod cmd;

use clap::error::ErrorKind;
use clap::Parser;
use rsgrove::error::Error;

/// Expand `--config FILE` into flags inserted right after the subcommand so
/// explicit flags, which come later, override the file.
fn expand_config(argv: Vec<String>) -> Result<Vec<String>, String> {
    let config_pos = argv.iter().position(|a| a == "--config" || a.starts_with("--config="));
    let Some(pos) = config_pos else {
        return Ok(argv);
    };
    let path = if argv[pos] == "--config" {
        argv.get(pos + 1)
            .cloned()
            .ok_or_else(|| "--config needs a file path".to_string())?
    } else {
        argv[pos]["--config=".len()..].to_string()
    };
    let text = std::fs::read_to_string(&path).map_err(|e| format!("{path}: {e}"))?;

    let mut expanded = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(format!("{path}:{}: expected key=value", line_no + 1));
        };
        let flag = format!("--{}", key.trim().replace('_', "-"));
        match value.trim() {
            "true" => expanded.push(flag),
            "false" => {}
            v => {
                expanded.push(flag);
                expanded.push(v.to_string());
            }
        }
    }

    // argv = [bin, subcommand, rest...]; insert after the subcommand
    let mut out: Vec<String> = argv.iter().take(2).cloned().collect();
    out.extend(expanded);
    out.extend(argv.into_iter().skip(2));
    Ok(out)
}

fn main() {
    let argv: Vec<String> = std::env::args().collect();
    let argv = match expand_config(argv) {
        Ok(v) => v,
        Err(msg) => {
            eprintln!("error: {msg}");
            std::process::exit(1);
        }
    };
    let cli = match args::Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };

    match std::panic::catch_unwind(|| cmd::run(cli.command)) {
        Ok(Ok(())) => {}
        Ok(Err(e @ Error::Internal(_))) => {
            eprintln!("internal: {e}");
            std::process::exit(3);
        }
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            std::process::exit(2);
        }
        Err(_) => {
            eprintln!("internal: unexpected panic; this is a bug");
            std::process::exit(3);
        }
    }
}
