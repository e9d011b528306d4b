//! `metadkit` command-line interface.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::nonparam::compare_formats;
use crate::profile::{diagnose, Diagnosis, Metric};
use crate::report::{self, Precision, ReportBundle};
use crate::resample::{run_hypothesis_suite, BootstrapConfig, Execution, RNG_SCHEME};
use crate::synth::SynthPlan;
use crate::trialstore::{load_trials, Selector, TrialFormat, TrialSet};

#[derive(Debug, Parser)]
#[command(name = "metadkit", version, about = "Metacognitive diagnostics for LLM trial records")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load and validate a trial file; print per-domain counts.
    Validate(RunArgs),
    /// Per-domain SDT and rank-based profiles for every (condition, format).
    Diagnose(RunArgs),
    /// Cross-format rank agreement of M-ratio and AUROC2 profiles.
    CompareFormats {
        format_a: String,
        format_b: String,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Run the confirmatory hypothesis suite.
    Confirm(RunArgs),
    /// Generate synthetic trials from a JSON config.
    Synth {
        spec: PathBuf,
        /// Output JSONL path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args, Default, Clone)]
pub struct RunArgs {
    #[arg(long)]
    pub trials: Option<PathBuf>,
    /// Flat key = value run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub resamples: Option<usize>,
    #[arg(long)]
    pub bins: Option<usize>,
    #[arg(long)]
    pub nratings: Option<usize>,
    /// TOST equivalence bound.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Restrict to one inference format.
    #[arg(long)]
    pub format: Option<String>,
    #[arg(long, env = "METADKIT_WORKERS")]
    pub workers: Option<usize>,
    /// Keep full precision in CSV output.
    #[arg(long)]
    pub full_precision: bool,
    #[arg(long)]
    pub pad_value: Option<f64>,
    #[arg(long)]
    pub binning_scope: Option<String>,
    #[arg(long)]
    pub pairing: Option<String>,
    /// Confirmatory and TOST levels, e.g. `0.95,0.90`.
    #[arg(long)]
    pub ci_levels: Option<String>,
}

impl RunArgs {
    /// Config file (or defaults) with flags applied on top.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(t) = &self.trials {
            cfg.trials_path = Some(t.clone());
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(r) = self.resamples {
            cfg.n_resamples = r;
        }
        match (self.nratings, self.bins) {
            (Some(r), Some(b)) => {
                cfg.n_ratings = r;
                cfg.n_bins = b;
            }
            (Some(r), None) => {
                cfg.n_ratings = r;
                cfg.n_bins = 2 * r;
            }
            (None, Some(b)) => {
                cfg.n_bins = b;
                cfg.n_ratings = b / 2;
                if b % 2 != 0 {
                    return Err(Error::Config(format!("--bins {b} is odd; bins must be 2 * n_ratings")));
                }
            }
            (None, None) => {}
        }
        if let Some(d) = self.delta {
            cfg.tost_delta = d;
        }
        if let Some(o) = &self.out {
            cfg.output_dir = o.clone();
        }
        if let Some(p) = self.pad_value {
            cfg.pad_value = p;
        }
        if let Some(s) = &self.binning_scope {
            cfg.set("binning_scope", s)?;
        }
        if let Some(s) = &self.pairing {
            cfg.set("pairing", s)?;
        }
        if let Some(s) = &self.ci_levels {
            cfg.set("ci_levels", s)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn precision(&self) -> Precision {
        if self.full_precision {
            Precision::Full
        } else {
            Precision::Rounded
        }
    }

    fn execution(&self) -> Execution {
        Execution::with_workers(self.workers)
    }
}

fn load(cfg: &RunConfig) -> Result<TrialSet> {
    let path = cfg
        .trials_path
        .as_ref()
        .ok_or_else(|| Error::Config("no trials file (use --trials or trials_path)".into()))?;
    let set = load_trials(path, TrialFormat::from_path(path))?;
    if set.is_empty() {
        return Err(Error::EmptySet);
    }
    Ok(set)
}

fn restrict(trials: TrialSet, format: Option<&str>) -> Result<TrialSet> {
    match format {
        None => Ok(trials),
        Some(f) => {
            let s = trials.filter(&Selector::default().format(f));
            if s.is_empty() {
                return Err(Error::Config(format!("no trials with format `{f}`")));
            }
            Ok(s)
        }
    }
}

fn pipeline_notes(cfg: &RunConfig) -> Vec<String> {
    vec![format!(
        "pipeline: {} quantile bins ({} scope, ascending nlp), +{} padding on every cell, correctness-as-stimulus reduction",
        cfg.n_bins, cfg.binning_scope, cfg.pad_value
    )]
}

/// Tables and charts for every group of a diagnosis.
fn diagnosis_bundle(diag: &Diagnosis, cfg: &RunConfig) -> Result<ReportBundle> {
    let mut b = ReportBundle::default();
    let all: Vec<_> = diag.profiles().cloned().collect();
    b.tables.push(report::profile_table(&all));
    let formats: std::collections::BTreeSet<&str> = diag.groups.keys().map(|(_, f)| f.as_str()).collect();
    for f in &formats {
        b.tables.push(report::condition_table(diag, f));
        b.tables.push(report::nlp_gap_table(diag, f));
    }
    let conditions: std::collections::BTreeSet<&str> = diag.groups.keys().map(|(c, _)| c.as_str()).collect();
    for c in conditions {
        let ps: Vec<_> = diag.profiles().filter(|p| p.condition == c).cloned().collect();
        for m in [Metric::MRatio, Metric::Auroc2] {
            b.charts.push((format!("{}_condition_{c}", m.label()), report::emit_bar_chart(&ps, m)?));
        }
    }
    b.notes.extend(pipeline_notes(cfg));
    b.notes.extend(diag.notes.iter().cloned());
    Ok(b)
}

fn emit(bundle: &ReportBundle, cfg: &RunConfig, prec: Precision) -> Result<()> {
    bundle.write(&cfg.output_dir, prec)?;
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(bundle.to_markdown(Precision::Rounded).as_bytes());
    Ok(())
}

fn cmd_validate(args: &RunArgs) -> Result<i32> {
    let cfg = args.resolve()?;
    let trials = load(&cfg)?;
    println!("{} trials", trials.len());
    for (d, n) in trials.domain_counts() {
        println!("{d}\t{n}");
    }
    println!("conditions: {}", trials.conditions().join(", "));
    println!("formats: {}", trials.formats().join(", "));
    Ok(0)
}

fn cmd_diagnose(args: &RunArgs) -> Result<i32> {
    let cfg = args.resolve()?;
    let trials = restrict(load(&cfg)?, args.format.as_deref())?;
    let diag = diagnose(&trials, &cfg.cell_options()?)?;
    let bundle = diagnosis_bundle(&diag, &cfg)?;
    emit(&bundle, &cfg, args.precision())?;
    Ok(if diag.any_unconverged() { 3 } else { 0 })
}

fn cmd_compare(format_a: &str, format_b: &str, args: &RunArgs) -> Result<i32> {
    let cfg = args.resolve()?;
    let trials = load(&cfg)?;
    let diag = diagnose(&trials, &cfg.cell_options()?)?;
    let mut b = ReportBundle::default();
    let mut compared = 0;
    for c in trials.conditions() {
        let (Some(a), Some(bb)) = (diag.group(&c, format_a), diag.group(&c, format_b)) else {
            continue;
        };
        compared += 1;
        let cmp = compare_formats(a, bb)?;
        let mut t2 = report::format_table(a, bb)?;
        let mut t3 = report::auroc_table(a, bb)?;
        let mut s = report::comparison_summary(&cmp);
        let mut mv = report::comparison_table(&cmp);
        for t in [&mut t2, &mut t3, &mut s, &mut mv] {
            t.name = format!("{}_condition_{c}", t.name);
            t.title = format!("{} (condition {c})", t.title);
        }
        b.tables.extend([t2, t3, s, mv]);
        let both: Vec<_> = a.iter().chain(bb).cloned().collect();
        for m in [Metric::MRatio, Metric::Auroc2] {
            b.charts
                .push((format!("{}_condition_{c}", m.label()), report::emit_bar_chart(&both, m)?));
        }
        if let Some(r) = cmp.rho_m_ratio {
            b.notes.push(format!(
                "condition {c}: rho_m_ratio = {r:.3} is the Spearman correlation of the M-ratio values \
                 (average ranks for ties), reported as computed"
            ));
        }
        b.notes.extend(cmp.notes.iter().map(|n| format!("condition {c}: {n}")));
    }
    if compared == 0 {
        return Err(Error::IncompleteInput(format!(
            "no condition has profiles at both `{format_a}` and `{format_b}`"
        )));
    }
    b.notes.extend(pipeline_notes(&cfg));
    b.notes.extend(diag.notes.iter().cloned());
    emit(&b, &cfg, args.precision())?;
    Ok(if diag.any_unconverged() { 3 } else { 0 })
}

fn cmd_confirm(args: &RunArgs) -> Result<i32> {
    let cfg = args.resolve()?;
    let trials = load(&cfg)?;
    let format = match args.format.clone() {
        Some(f) => Some(f),
        None => {
            let fs = trials.formats();
            if fs.len() > 1 {
                return Err(Error::Config(format!(
                    "trials span formats {}; choose one with --format",
                    fs.join(", ")
                )));
            }
            None
        }
    };
    let suite = cfg.suite();
    let boot = BootstrapConfig {
        n_resamples: cfg.n_resamples,
        seed: cfg.seed,
        ci_level: cfg.ci_levels.0,
        pairing: cfg.pairing,
        execution: args.execution(),
        cell: cfg.cell_options()?,
    };
    let results = run_hypothesis_suite(&trials, &suite, format.as_deref(), &boot)?;
    let rules: BTreeMap<String, _> = suite.iter().map(|s| (s.id.clone(), s.rule)).collect();

    let mut b = ReportBundle {
        tables: report::contrast_tables(&results, &rules),
        ..Default::default()
    };
    b.notes.push(format!(
        "bootstrap: {} resamples over question ids, seed {}, {} resampling, percentile intervals, rng {RNG_SCHEME}",
        cfg.n_resamples, cfg.seed, cfg.pairing
    ));
    b.notes.extend(pipeline_notes(&cfg));
    for r in &results {
        b.notes.extend(r.warnings());
    }
    emit(&b, &cfg, args.precision())?;
    let json = serde_json::to_string_pretty(&results).expect("contrast results serialize");
    let path = cfg.output_dir.join("contrasts.json");
    std::fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(if results.iter().any(|r| r.too_many_degenerate) { 3 } else { 0 })
}

fn cmd_synth(spec: &Path, out: Option<&Path>) -> Result<i32> {
    let set = SynthPlan::load(spec)?.generate()?;
    match out {
        Some(p) => {
            set.write_jsonl(p)?;
            eprintln!("wrote {} trials to {}", set.len(), p.display());
        }
        None => {
            let _ = std::io::stdout().lock().write_all(set.to_jsonl().as_bytes());
        }
    }
    Ok(0)
}

pub fn execute(cli: &Cli) -> Result<i32> {
    match &cli.command {
        Command::Validate(a) => cmd_validate(a),
        Command::Diagnose(a) => cmd_diagnose(a),
        Command::CompareFormats { format_a, format_b, run } => cmd_compare(format_a, format_b, run),
        Command::Confirm(a) => cmd_confirm(a),
        Command::Synth { spec, out } => cmd_synth(spec, out.as_deref()),
    }
}

/// Parse arguments, run, and map the outcome to an exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
