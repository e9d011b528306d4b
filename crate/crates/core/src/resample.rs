//! Question-level bootstrap, percentile intervals, TOST and the confirmatory
//! hypothesis suite.
//!
//! # Determinism
//!
//! Resample `r` of a stream labelled `L` is drawn from a ChaCha8 generator
//! keyed by `(seed, fnv1a(L))` and positioned on stream `r`. Draws therefore
//! depend only on the seed, the label, the sorted question-id list and the
//! resample ordinal, and results do not change with worker count or scheduling.
//! Labels are the domain for single-metric intervals and
//! `"{domain}|{condition_a}-{condition_b}"` for contrasts.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profile::{CellOptions, Metric};
use crate::trialstore::{validate_paired, Selector, TrialSet};

/// Name of the resample stream scheme; bump when draws would change.
pub const RNG_SCHEME: &str = "chacha8-fnv1a-v1";

/// Fraction of undefined resamples above which a result is flagged.
pub const DEGENERATE_ALARM: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    /// Fan out over rayon; `None` uses the global pool.
    #[cfg(feature = "parallel")]
    Parallel { workers: Option<usize> },
}

impl Execution {
    /// `workers == Some(1)` or a build without the `parallel` feature runs sequentially.
    pub fn with_workers(workers: Option<usize>) -> Self {
        #[cfg(feature = "parallel")]
        {
            match workers {
                Some(1) => Execution::Sequential,
                w => Execution::Parallel { workers: w },
            }
        }
        #[cfg(not(feature = "parallel"))]
        {
            let _ = workers;
            Execution::Sequential
        }
    }

    fn map<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self {
            Execution::Sequential => (0..n).map(f).collect(),
            #[cfg(feature = "parallel")]
            Execution::Parallel { workers } => {
                use rayon::prelude::*;
                let run = || (0..n).into_par_iter().map(&f).collect();
                match workers {
                    Some(w) => rayon::ThreadPoolBuilder::new()
                        .num_threads(w)
                        .build()
                        .expect("thread pool")
                        .install(run),
                    None => run(),
                }
            }
        }
    }
}

impl Default for Execution {
    fn default() -> Self {
        Execution::with_workers(None)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Pairing {
    /// One shared sequence of question-id draws drives both conditions.
    #[default]
    Paired,
    /// Each condition is resampled from its own stream.
    Independent,
}

impl FromStr for Pairing {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paired" => Ok(Pairing::Paired),
            "independent" => Ok(Pairing::Independent),
            other => Err(Error::Config(format!("pairing must be paired or independent, got `{other}`"))),
        }
    }
}

impl fmt::Display for Pairing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Pairing::Paired => "paired",
            Pairing::Independent => "independent",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BootstrapConfig {
    pub n_resamples: usize,
    pub seed: u64,
    pub ci_level: f64,
    pub pairing: Pairing,
    pub execution: Execution,
    pub cell: CellOptions,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig {
            n_resamples: 10_000,
            seed: 42,
            ci_level: 0.95,
            pairing: Pairing::Paired,
            execution: Execution::default(),
            cell: CellOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapInterval {
    pub point: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub ci_level: f64,
    pub n_resamples: usize,
    pub degenerate: usize,
    /// More than 1% of resamples were undefined.
    pub too_many_degenerate: bool,
}

fn fnv1a(label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// The generator for one resample ordinal of a labelled stream.
pub fn resample_rng(seed: u64, label: &str, ordinal: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&fnv1a(label).to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(ordinal);
    rng
}

/// Indices into an id list of length `n`, drawn with replacement.
pub fn draw_indices(seed: u64, label: &str, ordinal: u64, n: usize) -> Vec<usize> {
    let mut rng = resample_rng(seed, label, ordinal);
    (0..n).map(|_| rng.random_range(0..n)).collect()
}

/// Linear-interpolation percentile of sorted data, `q` in [0, 1].
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Percentile interval over the defined resample statistics.
fn summarize(point: f64, stats: Vec<Option<f64>>, ci_level: f64) -> Result<BootstrapInterval> {
    let total = stats.len();
    let mut valid: Vec<f64> = stats.into_iter().flatten().collect();
    let degenerate = total - valid.len();
    if valid.is_empty() {
        return Err(Error::TooManyDegenerate { degenerate, total });
    }
    valid.sort_by(f64::total_cmp);
    let alpha = 1.0 - ci_level;
    Ok(BootstrapInterval {
        point,
        ci_low: percentile(&valid, alpha / 2.0),
        ci_high: percentile(&valid, 1.0 - alpha / 2.0),
        ci_level,
        n_resamples: total,
        degenerate,
        too_many_degenerate: degenerate as f64 > DEGENERATE_ALARM * total as f64,
    })
}

/// Question ids (sorted) and, for each, the `(correct, nlp)` rows it owns.
struct QuestionIndex {
    ids: Vec<String>,
    rows: Vec<Vec<(bool, f64)>>,
}

impl QuestionIndex {
    fn new(trials: &TrialSet) -> Self {
        let mut map: BTreeMap<&str, Vec<(bool, f64)>> = BTreeMap::new();
        for t in trials {
            map.entry(&t.question_id).or_default().push((t.correct, t.nlp));
        }
        let (ids, rows) = map.into_iter().map(|(k, v)| (k.to_string(), v)).unzip();
        QuestionIndex { ids, rows }
    }

    fn gather(&self, picks: impl Iterator<Item = usize>) -> (Vec<bool>, Vec<f64>) {
        let mut correct = Vec::new();
        let mut nlp = Vec::new();
        for i in picks {
            for &(c, x) in &self.rows[i] {
                correct.push(c);
                nlp.push(x);
            }
        }
        (correct, nlp)
    }

    fn gather_ids<'a>(&self, ids: impl Iterator<Item = &'a str>) -> (Vec<bool>, Vec<f64>) {
        self.gather(ids.filter_map(|id| self.ids.binary_search_by(|p| p.as_str().cmp(id)).ok()))
    }
}

fn single_domain(trials: &TrialSet) -> Result<String> {
    let domains = trials.domains();
    match domains.len() {
        0 => Err(Error::EmptySet),
        1 => Ok(domains[0].clone()),
        _ => Err(Error::MultipleDomains(domains.join(", "))),
    }
}

/// Percentile bootstrap of one metric within one domain.
pub fn bootstrap_metric(trials: &TrialSet, metric: Metric, cfg: &BootstrapConfig) -> Result<BootstrapInterval> {
    let domain = single_domain(trials)?;
    let point = metric.evaluate_set(trials, &cfg.cell)?;
    let index = QuestionIndex::new(trials);
    let n = index.ids.len();
    let stats = cfg.execution.map(cfg.n_resamples, |r| {
        let picks = draw_indices(cfg.seed, &domain, r as u64, n);
        let (c, x) = index.gather(picks.into_iter());
        metric.evaluate(&c, &x, &cfg.cell).ok()
    });
    summarize(point, stats, cfg.ci_level)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Decision {
    Supported,
    NotSupported,
    Equivalent,
    NotEquivalent,
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Decision::Supported => "Supported",
            Decision::NotSupported => "Not supported",
            Decision::Equivalent => "Equivalent",
            Decision::NotEquivalent => "Not equivalent",
        })
    }
}

impl FromStr for Decision {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "Supported" => Ok(Decision::Supported),
            "Not supported" => Ok(Decision::NotSupported),
            "Equivalent" => Ok(Decision::Equivalent),
            "Not equivalent" => Ok(Decision::NotEquivalent),
            other => Err(Error::IncompleteInput(format!("unknown decision `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContrastResult {
    pub hypothesis_id: String,
    pub metric: Metric,
    pub domain: String,
    pub condition_a: String,
    pub condition_b: String,
    /// metric(a) − metric(b) on the full samples.
    pub delta_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub ci_level: f64,
    pub n_resamples: usize,
    pub seed: u64,
    pub pairing: Pairing,
    pub decision: Option<Decision>,
    pub degenerate_resample_count: usize,
    pub too_many_degenerate: bool,
    /// The plug-in estimate falls outside its own percentile interval.
    pub point_outside_ci: bool,
}

impl ContrastResult {
    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        let tag = format!("{} {} ({}-{})", self.hypothesis_id, self.domain, self.condition_a, self.condition_b);
        if self.degenerate_resample_count > 0 {
            w.push(format!(
                "{tag}: {} of {} resamples undefined and excluded",
                self.degenerate_resample_count, self.n_resamples
            ));
        }
        if self.too_many_degenerate {
            w.push(format!("{tag}: undefined resamples exceed 1%; interval flagged"));
        }
        if self.point_outside_ci {
            w.push(format!("{tag}: point estimate lies outside its percentile interval"));
        }
        w
    }
}

/// Bootstrap of metric(a) − metric(b) over question ids.
pub fn bootstrap_contrast(
    trials_a: &TrialSet,
    trials_b: &TrialSet,
    metric: Metric,
    cfg: &BootstrapConfig,
) -> Result<ContrastResult> {
    let domain = single_domain(trials_a)?;
    let cond = |s: &TrialSet| s.conditions().join("+");
    let (cond_a, cond_b) = (cond(trials_a), cond(trials_b));
    let label = format!("{domain}|{cond_a}-{cond_b}");
    contrast_with_label(trials_a, trials_b, metric, cfg, &label, &domain, &cond_a, &cond_b)
}

#[allow(clippy::too_many_arguments)]
fn contrast_with_label(
    trials_a: &TrialSet,
    trials_b: &TrialSet,
    metric: Metric,
    cfg: &BootstrapConfig,
    label: &str,
    domain: &str,
    cond_a: &str,
    cond_b: &str,
) -> Result<ContrastResult> {
    let ia = QuestionIndex::new(trials_a);
    let ib = QuestionIndex::new(trials_b);
    if cfg.pairing == Pairing::Paired {
        let report = validate_paired(trials_a, trials_b);
        if !report.paired {
            return Err(Error::UnpairedSets {
                missing: report.missing.len(),
                extra: report.extra.len(),
            });
        }
    }
    let delta_hat = metric.evaluate_set(trials_a, &cfg.cell)? - metric.evaluate_set(trials_b, &cfg.cell)?;

    let stats = cfg.execution.map(cfg.n_resamples, |r| {
        let (a, b) = match cfg.pairing {
            Pairing::Paired => {
                let picks = draw_indices(cfg.seed, label, r as u64, ia.ids.len());
                let a = ia.gather(picks.iter().copied());
                let b = ib.gather_ids(picks.iter().map(|&i| ia.ids[i].as_str()));
                (a, b)
            }
            Pairing::Independent => {
                let pa = draw_indices(cfg.seed, &format!("{label}|a"), r as u64, ia.ids.len());
                let pb = draw_indices(cfg.seed, &format!("{label}|b"), r as u64, ib.ids.len());
                (ia.gather(pa.into_iter()), ib.gather(pb.into_iter()))
            }
        };
        let va = metric.evaluate(&a.0, &a.1, &cfg.cell).ok()?;
        let vb = metric.evaluate(&b.0, &b.1, &cfg.cell).ok()?;
        Some(va - vb)
    });
    let iv = summarize(delta_hat, stats, cfg.ci_level)?;
    Ok(ContrastResult {
        hypothesis_id: String::new(),
        metric,
        domain: domain.to_string(),
        condition_a: cond_a.to_string(),
        condition_b: cond_b.to_string(),
        delta_hat,
        ci_low: iv.ci_low,
        ci_high: iv.ci_high,
        ci_level: iv.ci_level,
        n_resamples: iv.n_resamples,
        seed: cfg.seed,
        pairing: cfg.pairing,
        decision: None,
        degenerate_resample_count: iv.degenerate,
        too_many_degenerate: iv.too_many_degenerate,
        point_outside_ci: !(iv.ci_low <= delta_hat && delta_hat <= iv.ci_high),
    })
}

/// Two one-sided tests: equivalent iff the 90% interval lies strictly inside (−δ, δ).
pub fn tost(contrast: &ContrastResult, delta: f64) -> Result<Decision> {
    if (contrast.ci_level - 0.90).abs() > 1e-9 {
        return Err(Error::WrongCiLevel(contrast.ci_level));
    }
    Ok(if -delta < contrast.ci_low && contrast.ci_high < delta {
        Decision::Equivalent
    } else {
        Decision::NotEquivalent
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Rule {
    CiLowerGtZero,
    Tost,
}

impl FromStr for Rule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ci_lower_gt_zero" => Ok(Rule::CiLowerGtZero),
            "tost" => Ok(Rule::Tost),
            other => Err(Error::Config(format!("unknown rule `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisSpec {
    pub id: String,
    pub condition_a: String,
    pub condition_b: String,
    pub domains: Vec<String>,
    pub metric: Metric,
    pub rule: Rule,
    /// Equivalence bound for TOST.
    pub delta: f64,
    pub ci_level: f64,
}

impl HypothesisSpec {
    pub fn validate(&self) -> Result<()> {
        if self.rule == Rule::Tost && !(self.delta > 0.0) {
            return Err(Error::Config(format!("{}: TOST needs delta > 0", self.id)));
        }
        if !(self.ci_level > 0.0 && self.ci_level < 1.0) {
            return Err(Error::Config(format!("{}: ci_level must be in (0, 1)", self.id)));
        }
        if self.domains.is_empty() {
            return Err(Error::Config(format!("{}: no domains", self.id)));
        }
        Ok(())
    }
}

/// The four pre-registered meta-d′ hypotheses.
pub fn default_suite(tost_delta: f64, ci_confirm: f64, ci_tost: f64) -> Vec<HypothesisSpec> {
    let spec = |id: &str, b: &str, domains: &[&str], rule: Rule, level: f64| HypothesisSpec {
        id: id.into(),
        condition_a: "2".into(),
        condition_b: b.into(),
        domains: domains.iter().map(|d| d.to_string()).collect(),
        metric: Metric::MetaD,
        rule,
        delta: tost_delta,
        ci_level: level,
    };
    vec![
        spec("H1", "1", &["Science"], Rule::CiLowerGtZero, ci_confirm),
        spec("H2", "1", &["History", "Arts", "Geography"], Rule::Tost, ci_tost),
        spec("H3", "3", &["Science"], Rule::CiLowerGtZero, ci_confirm),
        spec("H4", "4", &["Science"], Rule::CiLowerGtZero, ci_confirm),
    ]
}

/// Run every (hypothesis, domain) contrast. `format`, when given, restricts
/// both conditions to that inference format.
pub fn run_hypothesis_suite(
    trials: &TrialSet,
    specs: &[HypothesisSpec],
    format: Option<&str>,
    cfg: &BootstrapConfig,
) -> Result<Vec<ContrastResult>> {
    let mut out = Vec::new();
    for spec in specs {
        spec.validate()?;
        for domain in &spec.domains {
            let pick = |condition: &str| -> Result<TrialSet> {
                let mut sel = Selector::default().domain(domain).condition(condition);
                sel.format = format.map(str::to_string);
                let s = trials.filter(&sel);
                if s.is_empty() {
                    return Err(Error::MissingCondition {
                        condition: condition.into(),
                        domain: domain.clone(),
                    });
                }
                Ok(s)
            };
            let a = pick(&spec.condition_a)?;
            let b = pick(&spec.condition_b)?;
            let local = BootstrapConfig {
                ci_level: spec.ci_level,
                ..*cfg
            };
            let label = format!("{domain}|{}-{}", spec.condition_a, spec.condition_b);
            let mut res = contrast_with_label(
                &a,
                &b,
                spec.metric,
                &local,
                &label,
                domain,
                &spec.condition_a,
                &spec.condition_b,
            )?;
            res.hypothesis_id = spec.id.clone();
            res.decision = Some(match spec.rule {
                Rule::CiLowerGtZero => {
                    if res.ci_low > 0.0 {
                        Decision::Supported
                    } else {
                        Decision::NotSupported
                    }
                }
                Rule::Tost => tost(&res, spec.delta)?,
            });
            out.push(res);
        }
    }
    Ok(out)
}
