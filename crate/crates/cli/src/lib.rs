//! The `iacsmell` command line.

mod history;
mod lint;

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use iacsmell_core::advisory::{self, load_advisories, AdvisoryDb};
use iacsmell_core::evalharness::{emit_report, evaluate_corpus, load_manifest, ReportFormat};
use iacsmell_core::frontends::ToolKind;
use iacsmell_core::predicates::Lexicons;
use iacsmell_core::rules::{explain, RuleSet, Severity};
use iacsmell_core::taxonomy;

pub use lint::{collect_files, lint_files, LintReport, SCHEMA_VERSION};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FINDINGS: i32 = 1;
pub const EXIT_ERROR: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "iacsmell", version, about = "Security smell linter for infrastructure-as-code scripts")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Lint files, directories or globs.
    Lint {
        #[arg(required = true)]
        inputs: Vec<String>,
        #[command(flatten)]
        common: Common,
        /// Lowest severity that makes the run fail.
        #[arg(long, value_enum, default_value = "low")]
        fail_on: SeverityArg,
    },
    /// Score the rules against a labeled corpus manifest (JSON lines).
    Evaluate {
        manifest: PathBuf,
        #[command(flatten)]
        common: Common,
        /// Minimum precision every defined cell must reach.
        #[arg(long, default_value_t = 0.9)]
        threshold: f64,
    },
    /// Track smell lifespans through a git repository or a snapshot directory.
    History {
        repo: PathBuf,
        /// Files to follow (git mode), or the logical file name (snapshot mode).
        globs: Vec<String>,
        #[command(flatten)]
        common: Common,
    },
    /// List the smell taxonomy, or show one rule card.
    Taxonomy {
        #[arg(long)]
        rule: Option<String>,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
}

#[derive(Debug, Args)]
pub struct Common {
    /// Override tool detection.
    #[arg(long)]
    pub tool: Option<ToolKind>,
    /// Comma-separated rule ids to run (default: all).
    #[arg(long)]
    pub rules: Option<String>,
    /// Lexicon file extending the bundled lexicons.
    #[arg(long)]
    pub lexicons: Option<PathBuf>,
    /// Advisory file extending the bundled advisory data.
    #[arg(long)]
    pub advisories: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "text")]
    pub format: Format,
    /// Worker threads (default: available parallelism).
    #[arg(long, value_parser = clap::value_parser!(u16).range(1..))]
    pub jobs: Option<u16>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SeverityArg {
    Low,
    Medium,
    High,
}

impl From<SeverityArg> for Severity {
    fn from(s: SeverityArg) -> Self {
        match s {
            SeverityArg::Low => Severity::Low,
            SeverityArg::Medium => Severity::Medium,
            SeverityArg::High => Severity::High,
        }
    }
}

/// Everything the analysis needs, resolved from the common flags.
pub struct Config {
    pub tool: Option<ToolKind>,
    pub rules: RuleSet,
    pub lexicons: Lexicons,
    pub advisories: AdvisoryDb,
    pub format: Format,
    pub jobs: usize,
    pub color: bool,
}

impl Config {
    pub fn from_common(c: &Common) -> Result<Config> {
        let rules = match &c.rules {
            Some(list) => RuleSet::parse(list)?,
            None => RuleSet::all(),
        };
        let lexicons = match &c.lexicons {
            Some(p) => Lexicons::with_overrides(&read(p)?).with_context(|| p.display().to_string())?,
            None => Lexicons::bundled().clone(),
        };
        let mut advisories = advisory::bundled().clone();
        if let Some(p) = &c.advisories {
            let extra = load_advisories(&read(p)?).with_context(|| p.display().to_string())?;
            for r in extra.records() {
                advisories.insert(r.clone());
            }
        }
        let jobs = c
            .jobs
            .map(usize::from)
            .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1));
        Ok(Config {
            tool: c.tool,
            rules,
            lexicons,
            advisories,
            format: c.format,
            jobs,
            color: false,
        })
    }

    pub fn pool(&self) -> Result<rayon::ThreadPool> {
        Ok(rayon::ThreadPoolBuilder::new().num_threads(self.jobs).build()?)
    }
}

fn read(p: &Path) -> Result<String> {
    std::fs::read_to_string(p).with_context(|| format!("cannot read {}", p.display()))
}

/// Run with explicit arguments and output streams; returns the exit code.
pub fn run<I, S>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(text.as_bytes()) } else { out.write_all(text.as_bytes()) };
            return code;
        }
    };
    match dispatch(cli, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e:#}");
            EXIT_ERROR
        }
    }
}

fn color_enabled() -> bool {
    use std::io::IsTerminal;
    std::env::var_os("IACSMELL_NO_COLOR").is_none() && std::io::stdout().is_terminal()
}

fn dispatch(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    match cli.command {
        Command::Lint { inputs, common, fail_on } => {
            let mut cfg = Config::from_common(&common)?;
            cfg.color = color_enabled();
            lint::cmd_lint(&cfg, &inputs, fail_on.into(), out, err)
        }
        Command::Evaluate {
            manifest,
            common,
            threshold,
        } => {
            let cfg = Config::from_common(&common)?;
            let corpus = load_manifest(&manifest)?;
            let report = evaluate_corpus(&corpus, &cfg.advisories, &cfg.lexicons, &cfg.rules)?;
            let fmt = match cfg.format {
                Format::Text => ReportFormat::Text,
                Format::Json => ReportFormat::Json,
            };
            out.write_all(emit_report(&report, fmt).as_bytes())?;
            let low: Vec<String> = report
                .cells
                .iter()
                .filter(|c| c.precision.is_some_and(|p| p < threshold))
                .map(|c| format!("{}/{}", c.tool, c.rule_id))
                .collect();
            if low.is_empty() {
                Ok(EXIT_OK)
            } else {
                writeln!(err, "precision below {threshold}: {}", low.join(", "))?;
                Ok(EXIT_FINDINGS)
            }
        }
        Command::History { repo, globs, common } => {
            let cfg = Config::from_common(&common)?;
            history::cmd_history(&cfg, &repo, &globs, out, err)
        }
        Command::Taxonomy { rule, format } => cmd_taxonomy(rule.as_deref(), format, out, err),
    }
}

fn cmd_taxonomy(rule: Option<&str>, format: Format, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    if let Some(id) = rule {
        let card = match explain(id) {
            Ok(c) => c,
            Err(e) => {
                writeln!(err, "error: {e}")?;
                return Ok(EXIT_ERROR);
            }
        };
        match format {
            Format::Text => out.write_all(card.render().as_bytes())?,
            Format::Json => writeln!(out, "{}", serde_json::to_string_pretty(&card)?)?,
        }
        return Ok(EXIT_OK);
    }
    let tax = taxonomy::bundled();
    match format {
        Format::Json => writeln!(out, "{}", serde_json::to_string_pretty(tax.categories())?)?,
        Format::Text => {
            for c in tax.categories() {
                let flag = if c.rule_bound {
                    "rule"
                } else if c.provisional {
                    "prov"
                } else {
                    "-"
                };
                let cwes = if c.cwes.is_empty() { "-".to_string() } else { c.cwes.join(",") };
                writeln!(out, "{:<4} {:<36} {:<18} {}", flag, c.id, cwes, c.name)?;
            }
        }
    }
    Ok(EXIT_OK)
}
