use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Subcommand, ValueEnum};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use wigcorr::law::EntryLaw;
use wigcorr::series::{format_rational, parse_rational};
use wigcorr::Rational;

/// Exact rational flag value, written `p/q` or as a terminating decimal.
#[derive(Clone, Debug, PartialEq)]
pub struct Rat(pub Rational);

impl FromStr for Rat {
    type Err = wigcorr::Error;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        parse_rational(text).map(Rat)
    }
}

impl fmt::Display for Rat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_rational(&self.0))
    }
}

impl Serialize for Rat {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Rat {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
    /// Markdown tables; the default for `report`.
    Text,
}

/// Flags shared by every subcommand.
#[derive(Args, Clone, Debug)]
pub struct Common {
    /// Result file; standard output when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Manifest file; defaults to `<out>.manifest.json` when `--out` is given.
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,
    /// Output format. JSON is canonical, CSV is a lossy export.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Worker threads for Monte Carlo; never changes results.
    #[arg(long, global = true, env = "WIGCORR_WORKERS")]
    pub workers: Option<usize>,
    /// Re-run the command recorded in a manifest.
    #[arg(long, global = true)]
    pub from_manifest: Option<PathBuf>,
}

#[derive(Subcommand, Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "lowercase")]
pub enum Command {
    /// Exact generating-function identities, optionally with the Wick-oracle
    /// integration-by-parts and ten-term suites.
    Identities(IdentitiesArgs),
    /// Exact GUE mixed moments and moment tables.
    Oracle(OracleArgs),
    /// Majorant iterations and bound checks.
    Majorant(MajorantArgs),
    /// Path-pair enumeration for a given entry law.
    Paths(PathsArgs),
    /// Covariance estimates of high traces, optionally with the R-term split.
    Montecarlo(MontecarloArgs),
    /// Law-independence test of the covariance in the edge regime.
    Universality(UniversalityArgs),
    /// Consolidates result files into one summary.
    Report(ReportArgs),
}

impl Command {
    pub fn kind(&self) -> &'static str {
        match self {
            Command::Identities(_) => "identities",
            Command::Oracle(_) => "oracle",
            Command::Majorant(_) => "majorant",
            Command::Paths(_) => "paths",
            Command::Montecarlo(_) => "montecarlo",
            Command::Universality(_) => "universality",
            Command::Report(_) => "report",
        }
    }
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct IdentitiesArgs {
    #[arg(long, default_value_t = 100)]
    pub smax: u64,
    #[arg(long, default_value_t = 50)]
    pub rmax: u64,
    /// Also run the oracle identity suites.
    #[arg(long)]
    pub wick: bool,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
    pub ibp_n: Vec<usize>,
    #[arg(long, default_value_t = 5)]
    pub ibp_k: u32,
    #[arg(long, value_delimiter = ',', default_value = "2,3")]
    pub ten_term_n: Vec<usize>,
    #[arg(long, default_value_t = 8)]
    pub ten_term_degree: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TableKind {
    U,
    D,
    Pqt,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct OracleArgs {
    #[arg(long)]
    pub n: usize,
    /// Monomial such as `A2(1,3)o L4 [L2o L1o]o`; repeatable.
    #[arg(long)]
    pub monomial: Vec<String>,
    /// Moment table to tabulate.
    #[arg(long, value_enum)]
    pub table: Option<TableKind>,
    /// Largest half-degree of the table.
    #[arg(long, default_value_t = 3)]
    pub smax: u32,
    /// Evaluate every endpoint instead of one per equality pattern.
    #[arg(long)]
    pub all_endpoints: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MajorantCheck {
    /// Majorants against closed forms, and the oracle against majorants.
    ClosedForms,
    /// `sup_x U_{2s}(x)` against the finite-n moment bound.
    MomentBound,
    /// Oracle `P`, `Q`, `T` against their closed forms.
    PqtOracle,
    /// Iterated `P`, `Q`, `T` majorants against closed forms and the oracle.
    Pqt,
    /// Exact four-way split of the GUE double sum.
    RAssembly,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct MajorantArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 4)]
    pub s0: u32,
    #[arg(long, default_value = "1/8")]
    pub h: Rat,
    #[arg(long, default_value = "5")]
    pub kappa: Rat,
    #[arg(long, default_value = "1/12")]
    pub c: Rat,
    #[arg(long, default_value = "1/128")]
    pub chi: Rat,
    /// Half-degree up to which exact oracle values are compared.
    #[arg(long)]
    pub oracle_smax: Option<u32>,
    #[arg(long, value_enum, default_value = "closed-forms")]
    pub check: MajorantCheck,
    /// Half-degrees for `r-assembly`.
    #[arg(long, default_value_t = 1)]
    pub s1: u32,
    #[arg(long, default_value_t = 1)]
    pub s2: u32,
    /// Fourth moment in the `V₄/n²` prefactor of `r-assembly`.
    #[arg(long, default_value = "3/64")]
    pub v4: Rat,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct PathsArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub s1: u32,
    #[arg(long)]
    pub s2: u32,
    #[arg(long, default_value = "gaussian")]
    pub law: EntryLaw,
    /// Dump every nonzero pair with its class to this CSV file.
    #[arg(long)]
    pub pairs_csv: Option<PathBuf>,
    /// Also check the two-steps reduction weight identity on every pair.
    #[arg(long)]
    pub survey: bool,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct MontecarloArgs {
    /// Matrix size; repeat for a sweep.
    #[arg(long, required = true)]
    pub n: Vec<usize>,
    #[arg(long, default_value = "1/20")]
    pub chi1: Rat,
    #[arg(long, default_value = "1/20")]
    pub chi2: Rat,
    /// Overrides both half-degrees.
    #[arg(long)]
    pub s: Option<u32>,
    #[arg(long, default_value = "gaussian")]
    pub law: Vec<EntryLaw>,
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Also estimate the four-way split of the GUE double sum.
    #[arg(long)]
    pub r_terms: bool,
    /// Include the off-diagonal analogue with the R terms.
    #[arg(long)]
    pub s4: bool,
    #[arg(long, default_value = "1/8")]
    pub h: Rat,
    /// Fourth moment for the R-term prefactor; defaults to the first law's.
    #[arg(long)]
    pub v4: Option<Rat>,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct UniversalityArgs {
    /// Matrix size; repeat for a sweep.
    #[arg(long, required = true)]
    pub n: Vec<usize>,
    /// Regime parameter; repeat for a sweep.
    #[arg(long, default_value = "1/20")]
    pub chi: Vec<Rat>,
    #[arg(long, default_values = ["gaussian", "rademacher", "three-point"])]
    pub law: Vec<EntryLaw>,
    #[arg(long, default_value_t = 2000)]
    pub samples: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct ReportArgs {
    /// Result files or glob patterns.
    #[arg(required = true)]
    pub files: Vec<String>,
}
