use std::fs;
use std::path::PathBuf;

use serde_json::{json, Map, Value};

use crate::args::ReportArgs;
use crate::error::CliError;
use crate::run::{leaves, Outcome};

const MANIFEST_SUFFIX: &str = ".manifest.json";

/// Files named by the arguments, globs expanded in order, duplicates dropped.
/// Manifests picked up by a wildcard are skipped; named ones are not.
fn expand(patterns: &[String]) -> Result<Vec<PathBuf>, CliError> {
    let mut files: Vec<PathBuf> = Vec::new();
    for pattern in patterns {
        let wildcard = pattern.contains(['*', '?', '[']);
        let matches: Vec<PathBuf> = glob::glob(pattern)
            .map_err(|e| CliError::Parse(format!("{pattern}: {e}")))?
            .filter_map(|m| m.ok())
            .filter(|m| !(wildcard && m.to_string_lossy().ends_with(MANIFEST_SUFFIX)))
            .collect();
        if matches.is_empty() {
            return Err(CliError::Io(format!("{pattern}: no such file")));
        }
        for m in matches {
            if !files.contains(&m) {
                files.push(m);
            }
        }
    }
    Ok(files)
}

fn load(path: &PathBuf) -> Result<Map<String, Value>, CliError> {
    let name = path.display();
    let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{name}: {e}")))?;
    let value: Value = serde_json::from_str(&text).map_err(|e| CliError::Parse(format!("{name}: {e}")))?;
    let Value::Object(doc) = value else {
        return Err(CliError::Parse(format!("{name}: not a result document")));
    };
    let well_formed = matches!(doc.get("kind"), Some(Value::String(_)))
        && matches!(doc.get("version"), Some(Value::String(_)))
        && matches!(doc.get("pass"), Some(Value::Bool(_) | Value::Null));
    if !well_formed {
        return Err(CliError::Parse(format!("{name}: missing kind, version or pass")));
    }
    Ok(doc)
}

fn cell(text: &str) -> String {
    text.replace('|', "\\|")
}

pub fn report(args: &ReportArgs) -> Result<Outcome, CliError> {
    let files = expand(&args.files)?;
    let mut listing = Vec::new();
    let mut failed = Vec::new();
    let mut sections = Vec::new();
    let mut md = String::from("# wigcorr report\n\n| file | kind | pass |\n|---|---|---|\n");
    let mut body_md = String::new();
    let mut csv = String::from("file,path,value\n");
    for path in &files {
        let doc = load(path)?;
        let file = path.display().to_string();
        let kind = doc["kind"].as_str().unwrap_or_default().to_string();
        let pass = doc["pass"].clone();
        md += &format!("| {} | {} | {} |\n", cell(&file), cell(&kind), pass);
        listing.push(json!({ "file": file, "kind": kind, "pass": pass }));

        let values = leaves(&Value::Object(doc));
        body_md += &format!("\n## {kind}: {}\n\n| field | value |\n|---|---|\n", cell(&file));
        for (field, value) in &values {
            let flagged = value == "false" && (field == "pass" || field.ends_with(".pass"));
            if flagged {
                failed.push(json!({ "file": file, "path": field }));
            }
            let shown = if flagged { format!("**{}** (failed)", cell(value)) } else { cell(value) };
            body_md += &format!("| {} | {} |\n", cell(field), shown);
            csv += &format!("\"{}\",\"{}\",\"{}\"\n", file.replace('"', "\"\""), field, value.replace('"', "\"\""));
        }
        sections.push(json!({ "file": file, "kind": kind, "values": values }));
    }
    if !failed.is_empty() {
        md += "\n## Failed checks\n\n";
        for f in &failed {
            md += &format!("- {}: `{}`\n", f["file"].as_str().unwrap_or_default(), f["path"].as_str().unwrap_or_default());
        }
    }
    md += &body_md;

    let mut body = Map::new();
    body.insert("files".into(), Value::Array(listing));
    body.insert("failed_checks".into(), Value::Array(failed.clone()));
    body.insert("sections".into(), Value::Array(sections));
    Ok(Outcome { body, pass: Some(failed.is_empty()), csv: Some(csv), text: Some(md), ..Default::default() })
}
