//! Batch command-line front end.
//!
//! Every run is described by a serializable [`RunConfig`]; reports embed it so
//! a run can be reproduced from its report alone. Exit status: 0 when all
//! assertions pass, 1 when one fails, 2 on usage, input or feasibility errors.

use std::collections::HashSet;
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::balance::{balance_check_almost, measure_eps_star, rainbow_check, search_rainbow, Feasibility};
use crate::bits::BitString;
use crate::calibration;
use crate::error::{Error, Result};
use crate::experiments::{dependent_census_sweep, hitting_demo, save_census_csv};
use crate::kx::{curse_demo, enumerate_class, equivalence_report, kolm_extract_check, popular_color_demo, vv_procedure};
use crate::machine::MachineBudget;
use crate::oracle::{symmetry_report, ComplexityTable, TableBuilder};
use crate::report::Report;
use crate::table::{AnyTable, SingleSourceTable, TwoSourceTable};

#[derive(Parser, Debug)]
#[command(name = "kextlab", version, about = "Exact Kolmogorov-extraction experiments on a small reference machine")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone, Default)]
pub struct GlobalArgs {
    /// Where to write the artifact or report (reports go to stdout when absent).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Seed for randomized subcommands; required by them.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (results do not depend on it).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Run even when the estimated work exceeds the feasibility limit.
    #[arg(long, global = true)]
    pub override_feasibility: bool,
}

#[derive(Subcommand, Serialize, Deserialize, Clone, Debug, PartialEq)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Build or query complexity tables.
    #[command(subcommand)]
    Oracle(OracleCmd),
    /// Generate and verify extractor tables.
    #[command(subcommand)]
    Table(TableCmd),
    /// Kolmogorov-extraction checks.
    #[command(subcommand)]
    Extract(ExtractCmd),
    /// Constructive demonstrations.
    #[command(subcommand)]
    Demo(DemoCmd),
    /// Counting experiments.
    #[command(subcommand)]
    Exp(ExpCmd),
    /// Run a list of configurations.
    #[command(subcommand)]
    Pipeline(PipelineCmd),
}

#[derive(ValueEnum, Serialize, Deserialize, Clone, Copy, Debug, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum ConditionSet {
    /// λ only.
    Lambda,
    /// λ and every string of the condition length.
    All,
}

#[derive(Subcommand, Serialize, Deserialize, Clone, Debug, PartialEq)]
#[serde(rename_all = "kebab-case")]
pub enum OracleCmd {
    Build {
        /// Target length.
        #[arg(long)]
        n: u32,
        /// Longest program enumerated (default n + 6).
        #[arg(long)]
        l_max: Option<u32>,
        #[arg(long, value_enum, default_value = "lambda")]
        conditions: ConditionSet,
        /// Length of the non-empty conditions (default n).
        #[arg(long)]
        condition_len: Option<u32>,
        #[arg(long, default_value_t = 4096)]
        budget_out: usize,
        #[arg(long, default_value_t = 4096)]
        budget_ops: usize,
    },
    Query {
        #[arg(long)]
        oracle: PathBuf,
        /// Target as a bit string.
        #[arg(long)]
        x: String,
        /// Condition as a bit string; λ or empty for the empty condition.
        #[arg(long, default_value = "λ")]
        y: String,
    },
    /// Symmetry-of-information census.
    Symmetry {
        /// `n`-bit targets under λ and every `n`-bit condition.
        #[arg(long)]
        oracle: PathBuf,
        /// `2n`-bit targets under λ.
        #[arg(long)]
        pair_oracle: PathBuf,
    },
}

#[derive(ValueEnum, Serialize, Deserialize, Clone, Copy, Debug, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum TableKind {
    InnerProduct,
    Gf2,
    Random,
    Constant,
    Truncate,
    RandomSingle,
}

#[derive(ValueEnum, Serialize, Deserialize, Clone, Copy, Debug, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum VerifyMode {
    Almost,
    Rainbow,
}

#[derive(Subcommand, Serialize, Deserialize, Clone, Debug, PartialEq)]
#[serde(rename_all = "kebab-case")]
pub enum TableCmd {
    Gen {
        #[arg(long, value_enum)]
        kind: TableKind,
        #[arg(long)]
        n: u32,
        /// Output bits (ignored by inner-product).
        #[arg(long, default_value_t = 1)]
        m: u32,
        /// Color of a constant table.
        #[arg(long, default_value_t = 0)]
        color: u16,
    },
    Verify {
        #[arg(long)]
        table: PathBuf,
        #[arg(long, value_enum)]
        mode: VerifyMode,
        /// Almost mode: rectangles of side 2^k.
        #[arg(long, default_value_t = 1)]
        k: u32,
        #[arg(long, default_value_t = 0)]
        d: u32,
        #[arg(long, default_value_t = calibration::DEFAULT_BALANCE_EPS)]
        eps: f64,
        #[arg(long, default_value_t = 1)]
        u_size: usize,
        /// Rainbow mode: rectangle side K.
        #[arg(long, default_value_t = 2)]
        side: usize,
        /// Rainbow mode: denominator D.
        #[arg(long, default_value_t = 2)]
        denominator: u64,
    },
    Search {
        #[arg(long)]
        n: u32,
        #[arg(long)]
        m: u32,
        #[arg(long)]
        side: usize,
        #[arg(long)]
        denominator: u64,
        #[arg(long, default_value_t = 100)]
        max_trials: u64,
        /// Where to write the first passing table.
        #[arg(long)]
        table_out: Option<PathBuf>,
    },
    EpsStar {
        #[arg(long)]
        table: PathBuf,
        #[arg(long)]
        k: u32,
        #[arg(long, default_value_t = 0)]
        d: u32,
    },
}

#[derive(Subcommand, Serialize, Deserialize, Clone, Debug, PartialEq)]
#[serde(rename_all = "kebab-case")]
pub enum ExtractCmd {
    Check {
        #[arg(long)]
        table: PathBuf,
        /// `n`-bit targets under λ and every `n`-bit condition.
        #[arg(long)]
        oracle: PathBuf,
        /// `m`-bit targets under λ.
        #[arg(long)]
        output_oracle: PathBuf,
        #[arg(long)]
        k: u32,
        #[arg(long)]
        alpha: i64,
        /// Deficiency allowed for certification.
        #[arg(long)]
        d: Option<i64>,
    },
    Equiv {
        #[arg(long)]
        table: PathBuf,
        #[arg(long)]
        oracle: PathBuf,
        #[arg(long)]
        output_oracle: PathBuf,
        #[arg(long)]
        k: u32,
        #[arg(long, default_value_t = 0)]
        d: u32,
        #[arg(long, default_value_t = calibration::EQUIVALENCE_MARGIN)]
        margin: u32,
    },
}

#[derive(Subcommand, Serialize, Deserialize, Clone, Debug, PartialEq)]
#[serde(rename_all = "kebab-case")]
pub enum DemoCmd {
    Popular {
        /// Single-source table.
        #[arg(long)]
        table: PathBuf,
        #[arg(long)]
        oracle: PathBuf,
    },
    Curse {
        #[arg(long)]
        table: PathBuf,
        #[arg(long)]
        alpha: u32,
        #[arg(long)]
        pair_oracle: PathBuf,
        #[arg(long)]
        output_oracle: Option<PathBuf>,
    },
    Vv {
        #[arg(long)]
        n: u32,
        #[arg(long)]
        m: u32,
        #[arg(long)]
        advice: u32,
        /// `m`-bit targets under every `n`-bit condition.
        #[arg(long)]
        oracle: PathBuf,
    },
}

#[derive(Subcommand, Serialize, Deserialize, Clone, Debug, PartialEq)]
#[serde(rename_all = "kebab-case")]
pub enum ExpCmd {
    DepCensus {
        #[arg(long)]
        oracle: PathBuf,
        #[arg(long)]
        alpha: i64,
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Ceiling asserted on the fitted constant.
        #[arg(long, default_value_t = calibration::DEP_CENSUS_MAX_C)]
        calibration: f64,
    },
    Hitting {
        #[arg(long)]
        table: PathBuf,
        #[arg(long)]
        oracle: PathBuf,
        #[arg(long)]
        output_oracle: PathBuf,
        #[arg(long)]
        k: u32,
        #[arg(long)]
        alpha: i64,
        /// Comma-separated `m`-bit strings.
        #[arg(long)]
        set: String,
    },
}

#[derive(Subcommand, Serialize, Deserialize, Clone, Debug, PartialEq)]
#[serde(rename_all = "kebab-case")]
pub enum PipelineCmd {
    Run {
        /// JSON file with a `steps` list of run configurations.
        #[arg(long)]
        config: PathBuf,
        /// Base directory for relative paths in the steps (default: current directory).
        #[arg(long)]
        workdir: Option<PathBuf>,
    },
}

/// One reproducible run: the command plus the global flags that affect results.
#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default)]
    pub override_feasibility: bool,
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    pub steps: Vec<RunConfig>,
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingArtifact(path.to_path_buf()));
        }
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Result of one dispatched run.
#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub passed: bool,
    pub summary: String,
}

/// Resolution of relative paths and report stamping.
#[derive(Clone, Debug)]
pub struct Context {
    pub workdir: PathBuf,
    pub timestamp: bool,
}

impl Default for Context {
    fn default() -> Self {
        Self {
            workdir: PathBuf::from("."),
            timestamp: true,
        }
    }
}

impl Context {
    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.workdir.join(p)
        }
    }

    fn load_oracle(&self, p: &Path) -> Result<ComplexityTable> {
        ComplexityTable::load(&self.resolve(p))
    }

    fn load_two(&self, p: &Path) -> Result<TwoSourceTable> {
        TwoSourceTable::load(&self.resolve(p))
    }
}

impl RunConfig {
    fn feasibility(&self) -> Feasibility {
        if self.override_feasibility {
            Feasibility::overridden()
        } else {
            Feasibility::default()
        }
    }

    fn require_seed(&self) -> Result<u64> {
        self.seed
            .ok_or_else(|| Error::InvalidParameter("randomized subcommands require --seed".into()))
    }

    /// Files the run reads.
    pub fn inputs(&self) -> Vec<PathBuf> {
        let mut v: Vec<&PathBuf> = Vec::new();
        match &self.command {
            Command::Oracle(OracleCmd::Query { oracle, .. }) => v.push(oracle),
            Command::Oracle(OracleCmd::Symmetry { oracle, pair_oracle }) => v.extend([oracle, pair_oracle]),
            Command::Table(TableCmd::Verify { table, .. } | TableCmd::EpsStar { table, .. }) => v.push(table),
            Command::Extract(
                ExtractCmd::Check {
                    table,
                    oracle,
                    output_oracle,
                    ..
                }
                | ExtractCmd::Equiv {
                    table,
                    oracle,
                    output_oracle,
                    ..
                },
            ) => v.extend([table, oracle, output_oracle]),
            Command::Demo(DemoCmd::Popular { table, oracle }) => v.extend([table, oracle]),
            Command::Demo(DemoCmd::Curse {
                table,
                pair_oracle,
                output_oracle,
                ..
            }) => {
                v.extend([table, pair_oracle]);
                v.extend(output_oracle);
            }
            Command::Demo(DemoCmd::Vv { oracle, .. }) => v.push(oracle),
            Command::Exp(ExpCmd::DepCensus { oracle, .. }) => v.push(oracle),
            Command::Exp(ExpCmd::Hitting {
                table,
                oracle,
                output_oracle,
                ..
            }) => v.extend([table, oracle, output_oracle]),
            Command::Pipeline(PipelineCmd::Run { config, .. }) => v.push(config),
            Command::Oracle(OracleCmd::Build { .. }) | Command::Table(TableCmd::Gen { .. } | TableCmd::Search { .. }) => {}
        }
        v.into_iter().cloned().collect()
    }

    /// Files the run writes.
    pub fn outputs(&self) -> Vec<PathBuf> {
        let mut v: Vec<PathBuf> = self.out.iter().cloned().collect();
        match &self.command {
            Command::Table(TableCmd::Search {
                table_out: Some(p), ..
            }) => v.push(p.clone()),
            Command::Exp(ExpCmd::DepCensus { csv: Some(p), .. }) => v.push(p.clone()),
            _ => {}
        }
        v
    }
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    ensure_parent(path)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn artifact_path(cfg: &RunConfig, ctx: &Context) -> Result<PathBuf> {
    let p = cfg
        .out
        .as_ref()
        .map(|p| ctx.resolve(p))
        .ok_or_else(|| Error::InvalidParameter("this subcommand writes an artifact and needs --out".into()))?;
    ensure_parent(&p)?;
    Ok(p)
}

fn summarize(report: &Report) -> String {
    let failed: Vec<&str> = report
        .assertions
        .iter()
        .filter(|a| !a.pass)
        .map(|a| a.name.as_str())
        .collect();
    if failed.is_empty() {
        format!("PASS {} ({} assertions)", report.demo, report.assertions.len())
    } else {
        format!("FAIL {}: {}", report.demo, failed.join("; "))
    }
}

/// Embeds the config, stamps, and writes the report to `--out` or stdout.
fn emit(mut report: Report, cfg: &RunConfig, ctx: &Context) -> Result<Outcome> {
    report.config = Some(serde_json::to_value(cfg)?);
    if ctx.timestamp {
        report.timestamp = SystemTime::now().duration_since(UNIX_EPOCH).ok().map(|d| d.as_secs());
    }
    let text = report.to_json_pretty() + "\n";
    match &cfg.out {
        Some(p) => write_text(&ctx.resolve(p), &text)?,
        None => print!("{text}"),
    }
    Ok(Outcome {
        passed: report.passed(),
        summary: summarize(&report),
    })
}

fn parse_bits(s: &str) -> Result<BitString> {
    if s.is_empty() {
        return Ok(BitString::empty());
    }
    s.parse()
}

/// Executes exactly one run.
pub fn dispatch(cfg: &RunConfig, ctx: &Context) -> Result<Outcome> {
    let feas = cfg.feasibility();
    match &cfg.command {
        Command::Oracle(OracleCmd::Build {
            n,
            l_max,
            conditions,
            condition_len,
            budget_out,
            budget_ops,
        }) => {
            let path = artifact_path(cfg, ctx)?;
            let mut b = TableBuilder::new(*n)
                .l_max(l_max.unwrap_or(n + 6))
                .budget(MachineBudget::new(*budget_out, *budget_ops)?);
            if *conditions == ConditionSet::All {
                b = b.all_conditions_of_length(condition_len.unwrap_or(*n));
            }
            let t = b.build()?;
            t.save(&path)?;
            Ok(Outcome {
                passed: true,
                summary: format!(
                    "built oracle n={} l_max={} conditions={} -> {}",
                    t.n(),
                    t.l_max(),
                    t.conditions().len(),
                    cfg.out.as_deref().unwrap_or(&path).display()
                ),
            })
        }
        Command::Oracle(OracleCmd::Query { oracle, x, y }) => {
            let t = ctx.load_oracle(oracle)?;
            let (xb, yb) = (parse_bits(x)?, parse_bits(y)?);
            let c = t.complexity(&xb, &yb)?;
            let mut r = Report::new("query").param("x", xb.to_string()).param("y", yb.to_string());
            r.metric("complexity", c.to_string());
            r.metric("l_max", t.l_max());
            emit(r, cfg, ctx)
        }
        Command::Oracle(OracleCmd::Symmetry { oracle, pair_oracle }) => {
            let base = ctx.load_oracle(oracle)?;
            let pairs = ctx.load_oracle(pair_oracle)?;
            emit(symmetry_report(&base, &pairs)?.to_report(), cfg, ctx)
        }
        Command::Table(TableCmd::Gen { kind, n, m, color }) => {
            let path = artifact_path(cfg, ctx)?;
            let table = match kind {
                TableKind::InnerProduct => AnyTable::Two(TwoSourceTable::inner_product(*n)?),
                TableKind::Gf2 => AnyTable::Two(TwoSourceTable::gf2_mult(*n, *m)?),
                TableKind::Random => AnyTable::Two(TwoSourceTable::random(*n, *m, cfg.require_seed()?)?),
                TableKind::Constant => AnyTable::Two(TwoSourceTable::constant(*n, *m, *color)?),
                TableKind::Truncate => AnyTable::Single(SingleSourceTable::truncate(*n, *m)?),
                TableKind::RandomSingle => AnyTable::Single(SingleSourceTable::random(*n, *m, cfg.require_seed()?)?),
            };
            table.save(&path)?;
            Ok(Outcome {
                passed: true,
                summary: format!("wrote {kind:?} table -> {}", cfg.out.as_deref().unwrap_or(&path).display()),
            })
        }
        Command::Table(TableCmd::Verify {
            table,
            mode,
            k,
            d,
            eps,
            u_size,
            side,
            denominator,
        }) => {
            let t = ctx.load_two(table)?;
            let report = match mode {
                VerifyMode::Almost => balance_check_almost(&t, *k, *d, *eps, *u_size, feas)?.to_report(&t),
                VerifyMode::Rainbow => rainbow_check(&t, *side, *denominator, feas)?.to_report(&t),
            };
            emit(report, cfg, ctx)
        }
        Command::Table(TableCmd::Search {
            n,
            m,
            side,
            denominator,
            max_trials,
            table_out,
        }) => {
            let seed = cfg.require_seed()?;
            let s = search_rainbow(*n, *m, *side, *denominator, seed, *max_trials, feas)?;
            if let (Some(p), Some((_, t, _))) = (table_out, &s.found) {
                let p = ctx.resolve(p);
                ensure_parent(&p)?;
                t.save(&p)?;
            }
            emit(s.to_report(*n, *m, *side, *denominator, seed, *max_trials), cfg, ctx)
        }
        Command::Table(TableCmd::EpsStar { table, k, d }) => {
            let t = ctx.load_two(table)?;
            emit(measure_eps_star(&t, *k, *d, feas)?.to_report(&t), cfg, ctx)
        }
        Command::Extract(ExtractCmd::Check {
            table,
            oracle,
            output_oracle,
            k,
            alpha,
            d,
        }) => {
            let f = ctx.load_two(table)?;
            let cls = enumerate_class(&ctx.load_oracle(oracle)?, *k, *alpha)?;
            let rep = kolm_extract_check(&f, &cls, &ctx.load_oracle(output_oracle)?)?;
            let mut r = Report::new("extract-check")
                .param("n", f.n())
                .param("m", f.m())
                .param("k", *k)
                .param("alpha", *alpha);
            r.histogram = rep.histogram.clone();
            r.metric("class_size", rep.pairs);
            r.metric("class_indeterminate", cls.indeterminate);
            r.metric("min_output_complexity", rep.min_output_complexity.map(|c| c.to_string()));
            r.metric("max_deficiency", rep.max_deficiency.map(|w| w.to_string()));
            if let Some((x, y)) = rep.worst_witness {
                r.witnesses.push(crate::report::Witness::new(
                    Some(BitString::from_value(x, f.n()).to_string()),
                    Some(BitString::from_value(y, f.n()).to_string()),
                ));
            }
            if let Some(d) = d {
                r.assert(
                    "max deficiency<=d",
                    rep.certifies(*d),
                    rep.max_deficiency.map(|w| w.to_string()),
                    *d,
                );
            }
            emit(r, cfg, ctx)
        }
        Command::Extract(ExtractCmd::Equiv {
            table,
            oracle,
            output_oracle,
            k,
            d,
            margin,
        }) => {
            let f = ctx.load_two(table)?;
            let e = equivalence_report(
                &f,
                *k,
                *d,
                *margin,
                &ctx.load_oracle(oracle)?,
                &ctx.load_oracle(output_oracle)?,
                feas,
            )?;
            emit(e.to_report(), cfg, ctx)
        }
        Command::Demo(DemoCmd::Popular { table, oracle }) => {
            let f = SingleSourceTable::load(&ctx.resolve(table))?;
            emit(popular_color_demo(&f, &ctx.load_oracle(oracle)?)?.to_report(), cfg, ctx)
        }
        Command::Demo(DemoCmd::Curse {
            table,
            alpha,
            pair_oracle,
            output_oracle,
        }) => {
            let f = ctx.load_two(table)?;
            let t2n = ctx.load_oracle(pair_oracle)?;
            let tm = output_oracle.as_ref().map(|p| ctx.load_oracle(p)).transpose()?;
            emit(curse_demo(&f, *alpha, &t2n, tm.as_ref())?.to_report(), cfg, ctx)
        }
        Command::Demo(DemoCmd::Vv { n, m, advice, oracle }) => {
            let t = ctx.load_oracle(oracle)?;
            if t.n() != *m {
                return Err(Error::Coverage(format!("oracle holds {}-bit targets, need {m}", t.n())));
            }
            emit(vv_procedure(&t, *n, *advice)?.to_report(), cfg, ctx)
        }
        Command::Exp(ExpCmd::DepCensus {
            oracle,
            alpha,
            csv,
            calibration,
        }) => {
            let sweep = dependent_census_sweep(&ctx.load_oracle(oracle)?, *alpha)?;
            if let Some(p) = csv {
                let p = ctx.resolve(p);
                ensure_parent(&p)?;
                save_census_csv(&p, &sweep.censuses)?;
            }
            emit(sweep.to_report(Some(*calibration)), cfg, ctx)
        }
        Command::Exp(ExpCmd::Hitting {
            table,
            oracle,
            output_oracle,
            k,
            alpha,
            set,
        }) => {
            let f = ctx.load_two(table)?;
            let cls = enumerate_class(&ctx.load_oracle(oracle)?, *k, *alpha)?;
            let values = set
                .split(',')
                .map(|s| {
                    let b = parse_bits(s.trim())?;
                    if b.len() != f.m() as usize {
                        return Err(Error::InvalidParameter(format!("{b} is not an {}-bit string", f.m())));
                    }
                    Ok(b.to_value().expect("m <= 16") as u16)
                })
                .collect::<Result<Vec<u16>>>()?;
            let h = hitting_demo(&f, &cls, &values, &ctx.load_oracle(output_oracle)?)?;
            emit(h.to_report(&f), cfg, ctx)
        }
        Command::Pipeline(PipelineCmd::Run { config, workdir }) => {
            let plan = PipelineConfig::load(&ctx.resolve(config))?;
            let inner = Context {
                workdir: workdir.as_ref().map_or_else(|| ctx.workdir.clone(), |w| ctx.resolve(w)),
                timestamp: ctx.timestamp,
            };
            let summary = run_pipeline(&plan, &inner)?;
            emit(summary, cfg, ctx)
        }
    }
}

/// Checks that every input exists or is produced by an earlier step.
pub fn validate_pipeline(plan: &PipelineConfig, ctx: &Context) -> Result<()> {
    let mut produced: HashSet<PathBuf> = HashSet::new();
    for step in &plan.steps {
        if matches!(step.command, Command::Pipeline(_)) {
            return Err(Error::InvalidParameter("pipelines cannot nest".into()));
        }
        for input in step.inputs() {
            let p = ctx.resolve(&input);
            if !produced.contains(&p) && !p.exists() {
                return Err(Error::MissingArtifact(p));
            }
        }
        produced.extend(step.outputs().iter().map(|p| ctx.resolve(p)));
    }
    Ok(())
}

/// Runs every step in order and aggregates one assertion per step.
pub fn run_pipeline(plan: &PipelineConfig, ctx: &Context) -> Result<Report> {
    validate_pipeline(plan, ctx)?;
    let mut summary = Report::new("pipeline").param("steps", plan.steps.len() as u64);
    for (i, step) in plan.steps.iter().enumerate() {
        let outcome = dispatch(step, ctx)?;
        log::info!("step {i}: {}", outcome.summary);
        summary.assert(&format!("step {i}"), outcome.passed, outcome.summary, true);
    }
    Ok(summary)
}

fn exit_code(code: u8) -> ExitCode {
    ExitCode::from(code)
}

/// Parses arguments, runs one command and maps the result to an exit status.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return exit_code(code);
        }
    };
    let cfg = RunConfig {
        command: cli.command,
        out: cli.global.out,
        seed: cli.global.seed,
        override_feasibility: cli.global.override_feasibility,
    };
    let ctx = Context::default();
    let result = match cli.global.threads {
        Some(threads) => match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
            Ok(pool) => pool.install(|| dispatch(&cfg, &ctx)),
            Err(e) => Err(Error::InvalidParameter(format!("thread pool: {e}"))),
        },
        None => dispatch(&cfg, &ctx),
    };
    match result {
        Ok(o) => {
            eprintln!("{}", o.summary);
            exit_code(if o.passed { 0 } else { 1 })
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(2)
        }
    }
}
