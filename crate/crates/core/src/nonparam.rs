//! Model-free metrics: Type-2 AUROC, NLP gap, accuracy, Spearman's rho and
//! the rank profiles built from them.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trialstore::TrialSet;

/// Split confidence values by correctness: `(correct, incorrect)`.
fn split(trials: &TrialSet) -> (Vec<f64>, Vec<f64>) {
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for t in trials {
        if t.correct {
            pos.push(t.nlp);
        } else {
            neg.push(t.nlp);
        }
    }
    (pos, neg)
}

/// 1-based average ranks (ties share the mean of their positions).
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && values[order[j]] == values[order[i]] {
            j += 1;
        }
        // positions i+1 ..= j
        let avg = (i + 1 + j) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = avg;
        }
        i = j;
    }
    ranks
}

/// P(correct nlp > incorrect nlp) + ½·P(tie), via the Mann–Whitney rank sum.
pub fn auroc2_values(correct: &[bool], nlp: &[f64]) -> Result<f64> {
    let n_pos = correct.iter().filter(|&&c| c).count();
    let n_neg = correct.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::OneClassOnly);
    }
    let ranks = average_ranks(nlp);
    let rank_sum: f64 = ranks.iter().zip(correct).filter(|(_, &c)| c).map(|(r, _)| r).sum();
    let u = rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

pub fn auroc2(trials: &TrialSet) -> Result<f64> {
    let correct: Vec<bool> = trials.iter().map(|t| t.correct).collect();
    let nlp: Vec<f64> = trials.iter().map(|t| t.nlp).collect();
    auroc2_values(&correct, &nlp)
}

/// Mean nlp of correct trials minus mean nlp of incorrect trials.
pub fn nlp_gap(trials: &TrialSet) -> Result<f64> {
    let (pos, neg) = split(trials);
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::OneClassOnly);
    }
    Ok(mean(&pos) - mean(&neg))
}

pub fn accuracy(trials: &TrialSet) -> Result<f64> {
    if trials.is_empty() {
        return Err(Error::EmptySet);
    }
    Ok(trials.iter().filter(|t| t.correct).count() as f64 / trials.len() as f64)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Pearson correlation of average ranks.
pub fn spearman_rho(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(Error::ZeroVariance);
    }
    let rx = average_ranks(x);
    let ry = average_ranks(y);
    let (mx, my) = (mean(&rx), mean(&ry));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::ZeroVariance);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Per-(condition, format, domain) metric bundle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainProfile {
    pub domain: String,
    pub condition: String,
    pub format: String,
    pub n: usize,
    pub accuracy: f64,
    pub d_prime: f64,
    pub criterion_c: f64,
    pub meta_d: f64,
    pub m_ratio: f64,
    pub auroc2: f64,
    pub nlp_gap: f64,
    /// 1 = largest M-ratio within the (condition, format) set; 0 until ranked.
    pub rank_m_ratio: usize,
    pub rank_auroc2: usize,
    pub converged: bool,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RankMetric {
    MRatio,
    Auroc2,
}

impl RankMetric {
    pub fn value(self, p: &DomainProfile) -> f64 {
        match self {
            RankMetric::MRatio => p.m_ratio,
            RankMetric::Auroc2 => p.auroc2,
        }
    }

    fn set_rank(self, p: &mut DomainProfile, rank: usize) {
        match self {
            RankMetric::MRatio => p.rank_m_ratio = rank,
            RankMetric::Auroc2 => p.rank_auroc2 = rank,
        }
    }

    pub fn rank(self, p: &DomainProfile) -> usize {
        match self {
            RankMetric::MRatio => p.rank_m_ratio,
            RankMetric::Auroc2 => p.rank_auroc2,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            RankMetric::MRatio => "m_ratio",
            RankMetric::Auroc2 => "auroc2",
        }
    }
}

impl fmt::Display for RankMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for RankMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "m_ratio" | "mratio" => Ok(RankMetric::MRatio),
            "auroc2" => Ok(RankMetric::Auroc2),
            other => Err(Error::UnknownMetric(other.into())),
        }
    }
}

/// Ranked profiles plus any ties that the domain-name rule had to break.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedProfiles {
    pub profiles: Vec<DomainProfile>,
    pub ties: Vec<String>,
}

/// Rank 1 = largest value; equal values are ordered by domain name and flagged.
/// Output keeps the input order of `profiles`.
pub fn rank_profile(profiles: &[DomainProfile], metric: RankMetric) -> Result<RankedProfiles> {
    if let Some(first) = profiles.first() {
        if profiles
            .iter()
            .any(|p| p.condition != first.condition || p.format != first.format)
        {
            return Err(Error::MixedProfileSet);
        }
    }
    let mut order: Vec<usize> = (0..profiles.len()).collect();
    order.sort_by(|&a, &b| {
        let (va, vb) = (metric.value(&profiles[a]), metric.value(&profiles[b]));
        vb.partial_cmp(&va)
            .unwrap_or(Ordering::Equal)
            .then_with(|| profiles[a].domain.cmp(&profiles[b].domain))
    });
    let mut out = profiles.to_vec();
    let mut ties = Vec::new();
    for (pos, &idx) in order.iter().enumerate() {
        metric.set_rank(&mut out[idx], pos + 1);
        if pos > 0 {
            let prev = &profiles[order[pos - 1]];
            if metric.value(prev) == metric.value(&profiles[idx]) {
                ties.push(format!(
                    "{metric} tie between {} and {} at {:.6} (condition {}, format {}); broken by domain name",
                    prev.domain,
                    profiles[idx].domain,
                    metric.value(prev),
                    prev.condition,
                    prev.format
                ));
            }
        }
    }
    Ok(RankedProfiles { profiles: out, ties })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankMove {
    pub domain: String,
    pub m_ratio_a: f64,
    pub m_ratio_b: f64,
    pub rank_m_ratio_a: usize,
    pub rank_m_ratio_b: usize,
    pub auroc2_a: f64,
    pub auroc2_b: f64,
    pub rank_auroc2_a: usize,
    pub rank_auroc2_b: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormatComparison {
    pub format_a: String,
    pub format_b: String,
    /// `None` when undefined (fewer than two domains or a constant profile).
    pub rho_m_ratio: Option<f64>,
    pub rho_auroc2: Option<f64>,
    /// Spearman's rho computed from the integer rank columns via 1 − 6Σd²/(n(n²−1)).
    pub rho_m_ratio_from_ranks: Option<f64>,
    pub moves: Vec<RankMove>,
    pub notes: Vec<String>,
}

/// Cross-format rank agreement for matched domains. Both inputs must already be ranked.
pub fn compare_formats(a: &[DomainProfile], b: &[DomainProfile]) -> Result<FormatComparison> {
    let index = |ps: &[DomainProfile]| -> BTreeMap<String, DomainProfile> {
        ps.iter().map(|p| (p.domain.clone(), p.clone())).collect()
    };
    let ia = index(a);
    let ib = index(b);
    if ia.keys().ne(ib.keys()) || ia.len() != a.len() || ib.len() != b.len() {
        let only_a: Vec<&String> = ia.keys().filter(|k| !ib.contains_key(*k)).collect();
        let only_b: Vec<&String> = ib.keys().filter(|k| !ia.contains_key(*k)).collect();
        return Err(Error::DomainMismatch(format!(
            "only in A: {only_a:?}; only in B: {only_b:?}"
        )));
    }
    let mut notes = Vec::new();
    let mut moves = Vec::new();
    let (mut ma, mut mb, mut aa, mut ab) = (vec![], vec![], vec![], vec![]);
    for (domain, pa) in &ia {
        let pb = &ib[domain];
        ma.push(pa.m_ratio);
        mb.push(pb.m_ratio);
        aa.push(pa.auroc2);
        ab.push(pb.auroc2);
        moves.push(RankMove {
            domain: domain.clone(),
            m_ratio_a: pa.m_ratio,
            m_ratio_b: pb.m_ratio,
            rank_m_ratio_a: pa.rank_m_ratio,
            rank_m_ratio_b: pb.rank_m_ratio,
            auroc2_a: pa.auroc2,
            auroc2_b: pb.auroc2,
            rank_auroc2_a: pa.rank_auroc2,
            rank_auroc2_b: pb.rank_auroc2,
        });
    }
    let mut rho = |x: &[f64], y: &[f64], what: &str| match spearman_rho(x, y) {
        Ok(r) => Some(r),
        Err(e) => {
            notes.push(format!("rho_{what} undefined: {e}"));
            None
        }
    };
    let rho_m_ratio = rho(&ma, &mb, "m_ratio");
    let rho_auroc2 = rho(&aa, &ab, "auroc2");

    let k = moves.len() as f64;
    let rho_m_ratio_from_ranks = (moves.len() >= 2).then(|| {
        let d2: f64 = moves
            .iter()
            .map(|m| (m.rank_m_ratio_a as f64 - m.rank_m_ratio_b as f64).powi(2))
            .sum();
        1.0 - 6.0 * d2 / (k * (k * k - 1.0))
    });
    if let (Some(r), Some(rr)) = (rho_m_ratio, rho_m_ratio_from_ranks) {
        if (r - rr).abs() > 1e-12 {
            notes.push(format!(
                "rho_m_ratio from values ({r:.3}) differs from the rank-difference formula ({rr:.3}); ties present"
            ));
        }
    }
    let (fa, fb) = (
        a.first().map(|p| p.format.clone()).unwrap_or_default(),
        b.first().map(|p| p.format.clone()).unwrap_or_default(),
    );
    Ok(FormatComparison {
        format_a: fa,
        format_b: fb,
        rho_m_ratio,
        rho_auroc2,
        rho_m_ratio_from_ranks,
        moves,
        notes,
    })
}
