//! `wigcorr`: command-line front end for the exact checks and Monte Carlo
//! experiments in the `wigcorr` library.

mod args;
mod error;
mod report;
mod run;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{CommandFactory, Parser};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use args::{Command, Common, Format};
use error::CliError;
use run::Outcome;

const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser, Debug)]
#[command(name = "wigcorr", version, about = "Covariance of high traces of Wigner matrices: exact checks and Monte Carlo")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Serialize, Deserialize)]
struct TaskSeed {
    task: String,
    seed: u64,
}

#[derive(Serialize, Deserialize)]
struct OutputDigest {
    path: String,
    sha256: String,
}

/// Everything needed to reproduce a run. `--workers` is deliberately absent.
#[derive(Serialize, Deserialize)]
struct Manifest {
    artifact: String,
    version: String,
    timestamp_unix: u64,
    config: Command,
    format: Format,
    master_seed: Option<u64>,
    task_seeds: Vec<TaskSeed>,
    outputs: Vec<OutputDigest>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn read_manifest(path: &Path) -> Result<Manifest, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
}

fn envelope(command: &Command, outcome: &Outcome) -> Result<Value, CliError> {
    let mut params = serde_json::to_value(command)?;
    if let Value::Object(m) = &mut params {
        m.remove("command");
    }
    let mut doc = Map::new();
    doc.insert("kind".into(), Value::String(command.kind().into()));
    doc.insert("version".into(), Value::String(VERSION.into()));
    doc.insert("pass".into(), outcome.pass.map_or(Value::Null, Value::Bool));
    doc.insert("params".into(), params);
    for (k, v) in &outcome.body {
        doc.insert(k.clone(), v.clone());
    }
    Ok(Value::Object(doc))
}

fn render(doc: &Value, outcome: &Outcome, format: Format) -> Result<String, CliError> {
    Ok(match format {
        Format::Json => serde_json::to_string_pretty(doc)? + "\n",
        Format::Csv => outcome.csv.clone().unwrap_or_default(),
        Format::Text => match &outcome.text {
            Some(text) => text.clone(),
            None => {
                let mut md = String::from("| field | value |\n|---|---|\n");
                for (field, value) in run::leaves(doc) {
                    md += &format!("| {} | {} |\n", field.replace('|', "\\|"), value.replace('|', "\\|"));
                }
                md
            }
        },
    })
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (command, recorded_format) = match (&cli.common.from_manifest, cli.command) {
        (Some(_), Some(_)) => {
            Cli::command()
                .error(clap::error::ErrorKind::ArgumentConflict, "--from-manifest cannot be combined with a subcommand")
                .exit();
        }
        (None, None) => {
            Cli::command().error(clap::error::ErrorKind::MissingSubcommand, "a subcommand is required").exit();
        }
        (Some(path), None) => {
            let m = read_manifest(path)?;
            (m.config, Some(m.format))
        }
        (None, Some(c)) => (c, None),
    };
    let default_format = if matches!(command, Command::Report(_)) { Format::Text } else { Format::Json };
    let format = cli.common.format.or(recorded_format).unwrap_or(default_format);
    let workers = cli
        .common
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
        .max(1);

    let outcome = run::execute(&command, workers)?;
    let mut seen = std::collections::BTreeSet::new();
    for w in outcome.warnings.iter().filter(|w| seen.insert(w.as_str())) {
        eprintln!("warning: {w}");
    }
    let doc = envelope(&command, &outcome)?;
    let rendered = render(&doc, &outcome, format)?;

    let mut outputs = Vec::new();
    match &cli.common.out {
        Some(path) => {
            fs::write(path, &rendered).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            outputs.push(OutputDigest { path: path.display().to_string(), sha256: sha256_hex(rendered.as_bytes()) });
        }
        None => {
            print!("{rendered}");
            outputs.push(OutputDigest { path: "<stdout>".into(), sha256: sha256_hex(rendered.as_bytes()) });
        }
    }
    for extra in &outcome.artifacts {
        let bytes = fs::read(extra).map_err(|e| CliError::Io(format!("{}: {e}", extra.display())))?;
        outputs.push(OutputDigest { path: extra.display().to_string(), sha256: sha256_hex(&bytes) });
    }

    let manifest_path: Option<PathBuf> = cli.common.manifest.clone().or_else(|| {
        cli.common.out.as_ref().map(|p| {
            let mut s = p.clone().into_os_string();
            s.push(".manifest.json");
            PathBuf::from(s)
        })
    });
    if let Some(path) = manifest_path {
        let manifest = Manifest {
            artifact: command.kind().into(),
            version: VERSION.into(),
            timestamp_unix: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
            config: command.clone(),
            format,
            master_seed: outcome.master_seed,
            task_seeds: outcome.seeds.iter().map(|(task, seed)| TaskSeed { task: task.clone(), seed: *seed }).collect(),
            outputs,
        };
        let text = serde_json::to_string_pretty(&manifest)? + "\n";
        fs::write(&path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    }

    if outcome.pass == Some(false) {
        return Err(CliError::ChecksFailed);
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
