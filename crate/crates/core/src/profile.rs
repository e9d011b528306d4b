//! The per-cell metric pipeline and the domain profiles built from it.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::binning::{counts_from_values, CountTable, RatingScale, DEFAULT_PAD};
use crate::error::{Error, Result};
use crate::nonparam::{auroc2_values, rank_profile, DomainProfile, RankMetric};
use crate::sdt::{fit_table, SdtFit};
use crate::trialstore::{Selector, TrialSet};

/// Where quantile bin edges are computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum BinningScope {
    /// Within each (condition, format, domain) cell.
    #[default]
    PerCell,
    /// Across all domains of a (condition, format) group.
    Global,
}

impl FromStr for BinningScope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per_cell" => Ok(BinningScope::PerCell),
            "global" => Ok(BinningScope::Global),
            other => Err(Error::Config(format!("binning_scope must be per_cell or global, got `{other}`"))),
        }
    }
}

impl fmt::Display for BinningScope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BinningScope::PerCell => "per_cell",
            BinningScope::Global => "global",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellOptions {
    pub scale: RatingScale,
    pub pad_value: f64,
    pub binning_scope: BinningScope,
}

impl Default for CellOptions {
    fn default() -> Self {
        CellOptions {
            scale: RatingScale::default(),
            pad_value: DEFAULT_PAD,
            binning_scope: BinningScope::PerCell,
        }
    }
}

/// A statistic computable on a bag of `(correct, nlp)` trials.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Metric {
    Accuracy,
    NlpGap,
    Auroc2,
    DPrime,
    MetaD,
    MRatio,
}

impl Metric {
    pub const ALL: [Metric; 6] = [
        Metric::Accuracy,
        Metric::NlpGap,
        Metric::Auroc2,
        Metric::DPrime,
        Metric::MetaD,
        Metric::MRatio,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Metric::Accuracy => "accuracy",
            Metric::NlpGap => "nlp_gap",
            Metric::Auroc2 => "auroc2",
            Metric::DPrime => "d_prime",
            Metric::MetaD => "meta_d",
            Metric::MRatio => "m_ratio",
        }
    }

    fn needs_fit(self) -> bool {
        matches!(self, Metric::DPrime | Metric::MetaD | Metric::MRatio)
    }

    /// Evaluate on parallel slices. SDT metrics re-bin the given trials, and
    /// count a non-converged fit as undefined.
    pub fn evaluate(self, correct: &[bool], nlp: &[f64], opts: &CellOptions) -> Result<f64> {
        if correct.is_empty() {
            return Err(Error::EmptySet);
        }
        let n_pos = correct.iter().filter(|&&c| c).count();
        let n_neg = correct.len() - n_pos;
        match self {
            Metric::Accuracy => Ok(n_pos as f64 / correct.len() as f64),
            Metric::NlpGap => {
                if n_pos == 0 || n_neg == 0 {
                    return Err(Error::OneClassOnly);
                }
                let (mut sp, mut sn) = (0.0, 0.0);
                for (&c, &x) in correct.iter().zip(nlp) {
                    if c {
                        sp += x;
                    } else {
                        sn += x;
                    }
                }
                Ok(sp / n_pos as f64 - sn / n_neg as f64)
            }
            Metric::Auroc2 => auroc2_values(correct, nlp),
            _ => {
                debug_assert!(self.needs_fit());
                if n_pos == 0 || n_neg == 0 {
                    return Err(Error::OneClassOnly);
                }
                let fit = sdt_from_values(correct, nlp, opts)?;
                if !fit.converged {
                    return Err(Error::IncompleteInput("meta-d' fit did not converge".into()));
                }
                Ok(match self {
                    Metric::DPrime => fit.d_prime,
                    Metric::MetaD => fit.meta_d,
                    _ => fit.m_ratio,
                })
            }
        }
    }

    pub fn evaluate_set(self, trials: &TrialSet, opts: &CellOptions) -> Result<f64> {
        let (correct, nlp) = columns(trials);
        self.evaluate(&correct, &nlp, opts)
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.label() == s)
            .ok_or_else(|| Error::UnknownMetric(s.into()))
    }
}

pub fn columns(trials: &TrialSet) -> (Vec<bool>, Vec<f64>) {
    trials.iter().map(|t| (t.correct, t.nlp)).unzip()
}

/// Bin, count, pad and fit.
pub fn sdt_from_values(correct: &[bool], nlp: &[f64], opts: &CellOptions) -> Result<SdtFit> {
    let table = counts_from_values(correct, nlp, opts.scale)?;
    fit_table(&table, opts.pad_value)
}

/// Profile for one analysis cell; `table` supplies pre-binned counts when
/// binning happened at a wider scope.
pub fn profile_cell(trials: &TrialSet, opts: &CellOptions, table: Option<&CountTable>) -> Result<DomainProfile> {
    let first = trials.records().first().ok_or(Error::EmptySet)?;
    // two trials per bin on average; below that the table is mostly padding
    let min = 2 * opts.scale.n_bins();
    if trials.len() < min {
        return Err(Error::TooFewTrials { n: trials.len(), min });
    }
    let (correct, nlp) = columns(trials);
    let n_pos = correct.iter().filter(|&&c| c).count();
    if n_pos == 0 || n_pos == correct.len() {
        return Err(Error::OneClassOnly);
    }
    let fit = match table {
        Some(t) => fit_table(t, opts.pad_value)?,
        None => sdt_from_values(&correct, &nlp, opts)?,
    };
    Ok(DomainProfile {
        domain: first.domain.clone(),
        condition: first.condition.clone(),
        format: first.format.clone(),
        n: trials.len(),
        accuracy: Metric::Accuracy.evaluate(&correct, &nlp, opts)?,
        d_prime: fit.d_prime,
        criterion_c: fit.criterion_c,
        meta_d: fit.meta_d,
        m_ratio: fit.m_ratio,
        auroc2: auroc2_values(&correct, &nlp)?,
        nlp_gap: Metric::NlpGap.evaluate(&correct, &nlp, opts)?,
        rank_m_ratio: 0,
        rank_auroc2: 0,
        converged: fit.converged,
        warnings: fit.warnings(),
    })
}

/// Profiles for every (condition, format) group, ranked within each group.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Diagnosis {
    pub groups: BTreeMap<(String, String), Vec<DomainProfile>>,
    pub notes: Vec<String>,
}

impl Diagnosis {
    pub fn profiles(&self) -> impl Iterator<Item = &DomainProfile> {
        self.groups.values().flatten()
    }

    pub fn group(&self, condition: &str, format: &str) -> Option<&[DomainProfile]> {
        self.groups
            .get(&(condition.to_string(), format.to_string()))
            .map(Vec::as_slice)
    }

    pub fn any_unconverged(&self) -> bool {
        self.profiles().any(|p| !p.converged)
    }
}

pub fn diagnose(trials: &TrialSet, opts: &CellOptions) -> Result<Diagnosis> {
    if trials.is_empty() {
        return Err(Error::EmptySet);
    }
    let mut out = Diagnosis::default();
    let mut first_err = None;
    for condition in trials.conditions() {
        for format in trials.formats() {
            let group = trials.filter(&Selector::default().condition(&condition).format(&format));
            if group.is_empty() {
                continue;
            }
            let global_bins = match opts.binning_scope {
                BinningScope::Global => {
                    let nlp: Vec<f64> = group.iter().map(|t| t.nlp).collect();
                    Some(crate::binning::quantile_bins(&nlp, opts.scale.n_bins())?)
                }
                BinningScope::PerCell => None,
            };
            let mut profiles = Vec::new();
            for domain in group.domains() {
                let cell = group.filter(&Selector::default().domain(&domain));
                let table = match &global_bins {
                    Some(bins) => Some(global_cell_table(&group, bins, &domain, opts.scale)?),
                    None => None,
                };
                match profile_cell(&cell, opts, table.as_ref()) {
                    Ok(p) => {
                        for w in &p.warnings {
                            out.notes.push(format!("condition {condition}, {format}, {domain}: {w}"));
                        }
                        profiles.push(p);
                    }
                    Err(e) => {
                        out.notes.push(format!("condition {condition}, {format}, {domain}: skipped ({e})"));
                        first_err.get_or_insert(e);
                    }
                }
            }
            if profiles.is_empty() {
                continue;
            }
            let by_m = rank_profile(&profiles, RankMetric::MRatio)?;
            let by_a = rank_profile(&by_m.profiles, RankMetric::Auroc2)?;
            out.notes.extend(by_m.ties);
            out.notes.extend(by_a.ties);
            out.groups.insert((condition.clone(), format.clone()), by_a.profiles);
        }
    }
    // a report with no cells at all is an error, not an empty table
    match first_err {
        Some(e) if out.groups.is_empty() => Err(e),
        _ => Ok(out),
    }
}

fn global_cell_table(group: &TrialSet, bins: &[usize], domain: &str, scale: RatingScale) -> Result<CountTable> {
    let mut inc = vec![0.0; scale.n_bins()];
    let mut cor = vec![0.0; scale.n_bins()];
    for (t, &b) in group.iter().zip(bins) {
        if t.domain == domain {
            if t.correct {
                cor[b - 1] += 1.0;
            } else {
                inc[b - 1] += 1.0;
            }
        }
    }
    CountTable::from_counts(scale.n_ratings(), inc, cor)
}
