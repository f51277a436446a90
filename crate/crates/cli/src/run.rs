use std::collections::BTreeMap;
use std::fs;

use serde_json::{json, Map, Value};
use wigcorr::law::EntryLaw;
use wigcorr::majorant::{self, BoundParams, CheckReport, PqtOptions, RDecomposition};
use wigcorr::montecarlo::{self, law_seed, McConfig, RegimePoint, UniversalityReport};
use wigcorr::paths::{self, PathClass};
use wigcorr::series::{format_rational, identity_report, to_f64};
use wigcorr::wick::{self, Endpoints, GueOracle, MomentTable, MonomialSpec};

use crate::args::*;
use crate::error::CliError;

/// What a subcommand produced, before it is wrapped and written.
#[derive(Default)]
pub struct Outcome {
    /// Fields merged into the result document.
    pub body: Map<String, Value>,
    /// Overall verdict; `None` for purely informational runs.
    pub pass: Option<bool>,
    pub csv: Option<String>,
    /// Pre-rendered text, used by `report`.
    pub text: Option<String>,
    pub seeds: Vec<(String, u64)>,
    pub master_seed: Option<u64>,
    /// Extra files written by the run.
    pub artifacts: Vec<std::path::PathBuf>,
    pub warnings: Vec<String>,
}

pub fn execute(command: &Command, workers: usize) -> Result<Outcome, CliError> {
    match command {
        Command::Identities(a) => identities(a),
        Command::Oracle(a) => oracle(a),
        Command::Majorant(a) => majorant(a),
        Command::Paths(a) => paths(a),
        Command::Montecarlo(a) => montecarlo(a, workers),
        Command::Universality(a) => universality(a, workers),
        Command::Report(a) => crate::report::report(a),
    }
}

fn r(value: &wigcorr::Rational) -> Value {
    Value::String(format_rational(value))
}

fn csv_line(fields: &[String]) -> String {
    let mut line = fields
        .iter()
        .map(|f| if f.contains([',', '"', '\n']) { format!("\"{}\"", f.replace('"', "\"\"")) } else { f.clone() })
        .collect::<Vec<_>>()
        .join(",");
    line.push('\n');
    line
}

fn identities(a: &IdentitiesArgs) -> Result<Outcome, CliError> {
    let report = identity_report(a.smax, a.rmax);
    let mut pass = report.all_pass();
    let mut csv = csv_line(&["family".into(), "n".into(), "cases".into(), "pass".into()]);
    for c in &report.checks {
        csv += &csv_line(&[c.name.clone(), String::new(), c.points.to_string(), c.pass.to_string()]);
    }
    let mut body = Map::new();
    body.insert("series".into(), serde_json::to_value(&report)?);
    if a.wick {
        let mut entries = Vec::new();
        for &n in &a.ibp_n {
            entries.extend(wick::ibp_suite(n, a.ibp_k)?);
        }
        for &n in &a.ten_term_n {
            entries.push(wick::ten_term_suite(n, a.ten_term_degree)?);
        }
        for e in &entries {
            pass &= e.pass();
            csv += &csv_line(&[e.family.clone(), e.n.to_string(), e.cases.to_string(), e.pass().to_string()]);
        }
        body.insert("wick".into(), serde_json::to_value(&entries)?);
    }
    Ok(Outcome { body, pass: Some(pass), csv: Some(csv), ..Default::default() })
}

fn table_rows(table: &MomentTable) -> Vec<Value> {
    table
        .iter()
        .map(|(k, v)| json!({ "quantity": k.quantity.label(), "s": k.s, "r": k.r, "x": k.x, "y": k.y, "value": r(v) }))
        .collect()
}

fn oracle(a: &OracleArgs) -> Result<Outcome, CliError> {
    let mut o = GueOracle::new(a.n)?;
    let mut body = Map::new();
    let mut csv = csv_line(&["item".into(), "value".into()]);
    let mut moments = Vec::new();
    for k in 1..=a.smax {
        let v = o.m(2 * k)?;
        csv += &csv_line(&[format!("M_{}", 2 * k), to_f64(&v).to_string()]);
        moments.push(json!({ "power": 2 * k, "value": r(&v) }));
    }
    body.insert("moments".into(), Value::Array(moments));
    let mut monomials = Vec::new();
    for text in &a.monomial {
        let spec = MonomialSpec::parse(a.n, text)?;
        let v = o.evaluate(&spec)?;
        csv += &csv_line(&[spec.to_string(), to_f64(&v).to_string()]);
        monomials.push(json!({ "monomial": spec.to_string(), "value": r(&v) }));
    }
    body.insert("monomials".into(), Value::Array(monomials));
    if let Some(kind) = a.table {
        let endpoints = if a.all_endpoints { Endpoints::All } else { Endpoints::Representative };
        let table = match kind {
            TableKind::U => wick::u_table(&mut o, a.smax, endpoints)?,
            TableKind::D => wick::d_table(&mut o, a.smax, 2 * a.smax, endpoints)?,
            TableKind::Pqt => wick::pqt_table(&mut o, a.smax, 2 * a.smax, endpoints)?,
        };
        csv = table.to_csv();
        body.insert("table".into(), Value::Array(table_rows(&table)));
    }
    Ok(Outcome { body, csv: Some(csv), ..Default::default() })
}

fn check_report_value(report: &CheckReport) -> Value {
    let checks: Vec<Value> = report
        .checks
        .iter()
        .map(|c| {
            json!({
                "check": c.check,
                "s": c.s,
                "r": c.r,
                "value": r(&c.value),
                "bound": r(&c.bound),
                "margin": r(&c.margin()),
                "in_regime": c.in_regime,
                "pass": c.pass,
            })
        })
        .collect();
    json!({ "name": report.name, "n": report.n, "pass": report.pass(), "notes": report.notes, "checks": checks })
}

fn check_report_csv(reports: &[CheckReport]) -> String {
    let header = ["report", "check", "s", "r", "value", "bound", "margin", "in_regime", "pass"];
    let mut out = csv_line(&header.map(String::from));
    for rep in reports {
        for c in &rep.checks {
            out += &csv_line(&[
                rep.name.clone(),
                c.check.clone(),
                c.s.to_string(),
                c.r.map(|r| r.to_string()).unwrap_or_default(),
                to_f64(&c.value).to_string(),
                to_f64(&c.bound).to_string(),
                to_f64(&c.margin()).to_string(),
                c.in_regime.to_string(),
                c.pass.to_string(),
            ]);
        }
    }
    out
}

fn majorant(a: &MajorantArgs) -> Result<Outcome, CliError> {
    let params = BoundParams { h: a.h.0.clone(), kappa: a.kappa.0.clone(), c: a.c.0.clone(), chi: a.chi.0.clone(), s0: a.s0 };
    let mut body = Map::new();
    let reports: Vec<CheckReport> = match a.check {
        MajorantCheck::ClosedForms => vec![majorant::check_majorant_closed_forms(a.n, &params, a.oracle_smax)?],
        MajorantCheck::PqtOracle => vec![majorant::check_pqt_oracle(a.n, &params, a.oracle_smax.unwrap_or(2))?],
        MajorantCheck::Pqt => {
            let base = majorant::iterate_majorants(a.n, a.s0)?;
            let pqt = majorant::iterate_pqt_majorants(&base, &PqtOptions::default());
            let mut out = vec![majorant::check_pqt_closed_forms(&pqt, &params)?];
            if let Some(os) = a.oracle_smax {
                out.push(majorant::check_pqt_domination(a.n, os)?);
            }
            out
        }
        MajorantCheck::MomentBound => {
            let mut o = GueOracle::new(a.n)?;
            let mut rows = Vec::new();
            let mut pass = true;
            let mut csv = csv_line(&["s", "value", "bound", "margin", "pass"].map(String::from));
            for s in 1..=a.oracle_smax.unwrap_or(a.s0) {
                let c = majorant::check_moment_bound(&mut o, s, &a.h.0)?;
                pass &= c.pass;
                csv += &csv_line(&[
                    s.to_string(),
                    to_f64(&c.value).to_string(),
                    to_f64(&c.bound).to_string(),
                    to_f64(&c.margin()).to_string(),
                    c.pass.to_string(),
                ]);
                rows.push(json!({ "s": s, "value": r(&c.value), "bound": r(&c.bound), "margin": r(&c.margin()), "pass": c.pass }));
            }
            body.insert("moment_bound".into(), Value::Array(rows));
            return Ok(Outcome { body, pass: Some(pass), csv: Some(csv), ..Default::default() });
        }
        MajorantCheck::RAssembly => {
            let d = majorant::assemble_r_oracle(a.n, a.s1, a.s2, a.v4.0.clone(), to_f64(&a.h.0))?;
            let pass = d.recomposes;
            let warnings = d.warnings.clone();
            let csv = r_terms_csv(&d);
            body.insert("r_assembly".into(), r_decomposition_value(&d));
            return Ok(Outcome { body, pass, csv: Some(csv), warnings, ..Default::default() });
        }
    };
    let pass = reports.iter().all(CheckReport::pass);
    body.insert("reports".into(), Value::Array(reports.iter().map(check_report_value).collect()));
    Ok(Outcome { body, pass: Some(pass), csv: Some(check_report_csv(&reports)), ..Default::default() })
}

fn r_decomposition_value(d: &RDecomposition) -> Value {
    let mut v = json!({
        "n": d.n,
        "s1": d.s1,
        "s2": d.s2,
        "source": d.source,
        "terms": d.terms,
        "std_errors": d.std_errors,
        "v4": r(&d.v4),
        "r_n": d.r_n,
        "s4": d.s4,
        "s4_std_error": d.s4_std_error,
        "chi": [d.chi.0, d.chi.1],
        "r1_bound": d.r1_bound,
        "warnings": d.warnings,
    });
    if let Some(exact) = &d.exact_terms {
        v["exact_terms"] = Value::Array(exact.iter().map(r).collect());
    }
    if let Some(direct) = &d.direct {
        v["direct"] = r(direct);
        v["recomposes"] = json!(d.recomposes);
    }
    if let Some(se) = d.std_errors {
        v["r1_below_bound"] = json!(d.terms[0] <= d.r1_bound + 3.0 * se[0]);
    }
    v
}

fn r_terms_csv(d: &RDecomposition) -> String {
    let mut out = csv_line(&["n", "s1", "s2", "term", "value", "stderr"].map(String::from));
    for k in 0..4 {
        let se = d.std_errors.map(|s| s[k].to_string()).unwrap_or_default();
        out += &csv_line(&[d.n.to_string(), d.s1.to_string(), d.s2.to_string(), format!("R{}", k + 1), d.terms[k].to_string(), se]);
    }
    out
}

fn paths(a: &PathsArgs) -> Result<Outcome, CliError> {
    let sums = paths::sum_by_class(a.n, a.s1, a.s2, &a.law)?;
    let brute = paths::covariance_bruteforce(a.n, a.s1, a.s2, &a.law)?;
    let direct = paths::covariance_direct(a.n, a.s1, a.s2, &a.law)?;
    let agree = brute.agree && sums.total == brute.full_expansion && direct == brute.full_expansion;
    let mut body = Map::new();
    let mut by_class = Map::new();
    let mut counts = Map::new();
    let mut csv = csv_line(&["class", "pairs", "sum"].map(String::from));
    for class in PathClass::ALL {
        let v = &sums.by_class[&class];
        let c = sums.pair_counts.get(&class).copied().unwrap_or(0);
        by_class.insert(class.label().into(), r(v));
        counts.insert(class.label().into(), json!(c));
        csv += &csv_line(&[class.label().into(), c.to_string(), to_f64(v).to_string()]);
    }
    body.insert("law".into(), json!(a.law.name()));
    body.insert("by_class".into(), Value::Object(by_class));
    body.insert("pair_counts".into(), Value::Object(counts));
    body.insert("single_quartic".into(), r(&sums.single_quartic));
    body.insert("second_order".into(), r(&sums.second_order));
    body.insert("total".into(), r(&sums.total));
    body.insert("bruteforce".into(), r(&brute.full_expansion));
    body.insert("bruteforce_restricted".into(), r(&brute.restricted));
    body.insert("direct".into(), r(&direct));
    body.insert("agree".into(), json!(agree));
    let mut pass = agree;
    if a.survey {
        let (checked, failures) = paths::reduction_survey(a.n, a.s1, a.s2, &a.law)?;
        pass &= failures.is_empty();
        body.insert(
            "reduction".into(),
            json!({ "checked": checked, "failures": failures.iter().map(|p| p.to_string()).collect::<Vec<_>>() }),
        );
    }
    let mut artifacts = Vec::new();
    if let Some(path) = &a.pairs_csv {
        fs::write(path, paths::nonzero_pairs_csv(a.n, a.s1, a.s2, &a.law)?)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        artifacts.push(path.clone());
    }
    Ok(Outcome { body, pass: Some(pass), csv: Some(csv), artifacts, ..Default::default() })
}

fn point_value(report: &UniversalityReport) -> Result<Map<String, Value>, CliError> {
    let mut params = serde_json::to_value(&report.regime)?;
    params["samples"] = json!(report.n_samples);
    params["seed"] = json!(report.seed);
    let mut out = Map::new();
    out.insert("params".into(), params);
    out.insert("per_law".into(), serde_json::to_value(&report.per_law)?);
    out.insert("comparisons".into(), serde_json::to_value(&report.comparisons)?);
    out.insert("warnings".into(), json!(report.warnings));
    Ok(out)
}

const SWEEP_HEADER: [&str; 9] = ["n", "chi1", "chi2", "s1", "s2", "law", "K_mean", "K_stderr", "excluded"];

fn sweep_rows(report: &UniversalityReport) -> String {
    let p = &report.regime;
    report
        .per_law
        .iter()
        .map(|l| {
            csv_line(&[
                p.n.to_string(),
                format_rational(&p.chi1),
                format_rational(&p.chi2),
                p.s1.to_string(),
                p.s2.to_string(),
                l.law.clone(),
                l.k_mean.to_string(),
                l.k_stderr.to_string(),
                l.excluded.to_string(),
            ])
        })
        .collect()
}

/// One document per point, or `{"sweep": [...]}` for several.
fn collect_points(points: Vec<Map<String, Value>>) -> Map<String, Value> {
    if points.len() == 1 {
        points.into_iter().next().expect("one point")
    } else {
        let mut body = Map::new();
        body.insert("sweep".into(), Value::Array(points.into_iter().map(Value::Object).collect()));
        body
    }
}

fn record_seeds(outcome: &mut Outcome, report: &UniversalityReport) {
    for l in &report.per_law {
        outcome.seeds.push((format!("n={} s1={} s2={} law={}", report.regime.n, report.regime.s1, report.regime.s2, l.law), l.seed));
    }
    outcome.warnings.extend(report.warnings.iter().cloned());
}

fn montecarlo(a: &MontecarloArgs, workers: usize) -> Result<Outcome, CliError> {
    let mut outcome = Outcome { master_seed: Some(a.seed), ..Default::default() };
    let mut csv = csv_line(&SWEEP_HEADER.map(String::from));
    let mut points = Vec::new();
    let mut pass = true;
    let config = McConfig::new(a.samples, a.seed, workers);
    for &n in &a.n {
        let regime = match a.s {
            Some(s) => RegimePoint::explicit(n, s, s)?,
            None => RegimePoint::from_chi(n, a.chi1.0.clone(), a.chi2.0.clone())?,
        };
        let report = montecarlo::universality_test(&regime, &a.law, &config)?;
        pass &= report.per_law.iter().all(|l| l.valid);
        csv += &sweep_rows(&report);
        record_seeds(&mut outcome, &report);
        let mut point = point_value(&report)?;
        if a.r_terms {
            let seed = law_seed(a.seed, a.law.len());
            let v4 = match &a.v4 {
                Some(v) => v.0.clone(),
                None => a.law.first().cloned().unwrap_or(EntryLaw::Gaussian).v4_offdiag(),
            };
            let d = montecarlo::estimate_r_terms(&regime, &McConfig::new(a.samples, seed, workers), v4, to_f64(&a.h.0), a.s4)?;
            outcome.seeds.push((format!("n={n} r-terms"), seed));
            outcome.warnings.extend(d.warnings.iter().cloned());
            point.insert("r_terms".into(), r_decomposition_value(&d));
        }
        points.push(point);
    }
    outcome.body = collect_points(points);
    outcome.pass = Some(pass);
    outcome.csv = Some(csv);
    Ok(outcome)
}

fn universality(a: &UniversalityArgs, workers: usize) -> Result<Outcome, CliError> {
    let mut outcome = Outcome { master_seed: Some(a.seed), ..Default::default() };
    let mut csv = csv_line(&SWEEP_HEADER.map(String::from));
    let mut points = Vec::new();
    let mut pass = true;
    let config = McConfig::new(a.samples, a.seed, workers);
    for &n in &a.n {
        for chi in &a.chi {
            let regime = RegimePoint::from_chi(n, chi.0.clone(), chi.0.clone())?;
            let report = montecarlo::universality_test(&regime, &a.law, &config)?;
            pass &= report.pass();
            csv += &sweep_rows(&report);
            record_seeds(&mut outcome, &report);
            points.push(point_value(&report)?);
        }
    }
    outcome.body = collect_points(points);
    outcome.pass = Some(pass);
    outcome.csv = Some(csv);
    Ok(outcome)
}

/// Flattened `path -> value` view of a JSON document, values rendered as
/// their JSON tokens (strings unquoted).
pub fn leaves(value: &Value) -> BTreeMap<String, String> {
    fn walk(prefix: String, v: &Value, out: &mut BTreeMap<String, String>) {
        match v {
            Value::Object(m) => {
                for (k, x) in m {
                    let p = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                    walk(p, x, out);
                }
            }
            Value::Array(items) => {
                for (i, x) in items.iter().enumerate() {
                    walk(format!("{prefix}[{i}]"), x, out);
                }
            }
            Value::String(s) => {
                out.insert(prefix, s.clone());
            }
            other => {
                out.insert(prefix, other.to_string());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(String::new(), value, &mut out);
    out
}
