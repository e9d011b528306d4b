//! Quantile binning of continuous confidence onto a response/rating scale,
//! and the count tables that feed every SDT fit.
//!
//! Correctness plays the role of the stimulus class. The lower half of the
//! bins is response R1 and the upper half R2; the rating is the distance
//! from the median split, so bin 1 is (R1, rating n) and bin 2n is (R2, rating n).

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trialstore::TrialRecord;

/// Log-linear correction added to every cell.
pub const DEFAULT_PAD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatingScale {
    n_ratings: usize,
}

impl RatingScale {
    pub fn new(n_ratings: usize) -> Result<Self> {
        if n_ratings < 2 {
            return Err(Error::InvalidScale(n_ratings));
        }
        Ok(RatingScale { n_ratings })
    }

    pub fn n_ratings(self) -> usize {
        self.n_ratings
    }

    pub fn n_bins(self) -> usize {
        2 * self.n_ratings
    }

    /// Response and rating for a 1-based bin.
    pub fn split(self, bin: usize) -> (Response, usize) {
        debug_assert!((1..=self.n_bins()).contains(&bin));
        if bin <= self.n_ratings {
            (Response::R1, self.n_ratings - bin + 1)
        } else {
            (Response::R2, bin - self.n_ratings)
        }
    }

    /// Inverse of [`RatingScale::split`].
    pub fn bin_of(self, response: Response, rating: usize) -> usize {
        match response {
            Response::R1 => self.n_ratings - rating + 1,
            Response::R2 => self.n_ratings + rating,
        }
    }
}

impl Default for RatingScale {
    fn default() -> Self {
        RatingScale { n_ratings: 4 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Response {
    R1,
    R2,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinnedTrial<'a> {
    pub trial: &'a TrialRecord,
    pub bin: usize,
    pub response: Response,
    pub rating: usize,
}

/// 1-based quantile bins for `values`, in input order.
///
/// Rank is the position in a stable ascending sort, so ties resolve by
/// input order and bin sizes differ by at most one.
pub fn quantile_bins(values: &[f64], n_bins: usize) -> Result<Vec<usize>> {
    let n = values.len();
    if n < n_bins {
        return Err(Error::TooFewTrials { n, min: n_bins });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut bins = vec![0; n];
    for (rank0, &idx) in order.iter().enumerate() {
        bins[idx] = rank0 * n_bins / n + 1;
    }
    Ok(bins)
}

pub fn quantile_bin<'a, I>(trials: I, scale: RatingScale) -> Result<Vec<BinnedTrial<'a>>>
where
    I: IntoIterator<Item = &'a TrialRecord>,
{
    let trials: Vec<&TrialRecord> = trials.into_iter().collect();
    let nlp: Vec<f64> = trials.iter().map(|t| t.nlp).collect();
    let bins = quantile_bins(&nlp, scale.n_bins())?;
    Ok(trials
        .into_iter()
        .zip(bins)
        .map(|(trial, bin)| {
            let (response, rating) = scale.split(bin);
            BinnedTrial {
                trial,
                bin,
                response,
                rating,
            }
        })
        .collect())
}

/// Response/rating counts for the two correctness classes, indexed by bin - 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountTable {
    pub n_ratings: usize,
    pub counts_incorrect: Vec<f64>,
    pub counts_correct: Vec<f64>,
    pub padded: bool,
    pub pad_value: f64,
}

impl CountTable {
    /// Unpadded table from raw counts. Both vectors must have length 2·n_ratings.
    pub fn from_counts(n_ratings: usize, counts_incorrect: Vec<f64>, counts_correct: Vec<f64>) -> Result<Self> {
        let scale = RatingScale::new(n_ratings)?;
        for v in [&counts_incorrect, &counts_correct] {
            if v.len() != scale.n_bins() {
                return Err(Error::LengthMismatch(v.len(), scale.n_bins()));
            }
            if v.iter().any(|&c| !(c >= 0.0) || !c.is_finite()) {
                return Err(Error::IncompleteInput("counts must be finite and non-negative".into()));
            }
        }
        Ok(CountTable {
            n_ratings,
            counts_incorrect,
            counts_correct,
            padded: false,
            pad_value: 0.0,
        })
    }

    pub fn n_bins(&self) -> usize {
        2 * self.n_ratings
    }

    pub fn total_correct(&self) -> f64 {
        self.counts_correct.iter().sum()
    }

    pub fn total_incorrect(&self) -> f64 {
        self.counts_incorrect.iter().sum()
    }

    /// Trials that went into the table, excluding padding.
    pub fn raw_total(&self) -> f64 {
        let pad = if self.padded {
            self.pad_value * (2 * self.n_bins()) as f64
        } else {
            0.0
        };
        self.total_correct() + self.total_incorrect() - pad
    }

    /// Raw (pre-padding) class totals: (incorrect, correct).
    pub fn raw_class_totals(&self) -> (f64, f64) {
        let pad = if self.padded {
            self.pad_value * self.n_bins() as f64
        } else {
            0.0
        };
        (self.total_incorrect() - pad, self.total_correct() - pad)
    }

    pub fn pad(&self, pad_value: f64) -> Result<CountTable> {
        if self.padded {
            return Err(Error::AlreadyPadded);
        }
        let add = |v: &[f64]| v.iter().map(|c| c + pad_value).collect();
        Ok(CountTable {
            n_ratings: self.n_ratings,
            counts_incorrect: add(&self.counts_incorrect),
            counts_correct: add(&self.counts_correct),
            padded: true,
            pad_value,
        })
    }

    /// Multiply every cell by `k` (padding included).
    pub fn scaled(&self, k: f64) -> CountTable {
        CountTable {
            counts_incorrect: self.counts_incorrect.iter().map(|c| c * k).collect(),
            counts_correct: self.counts_correct.iter().map(|c| c * k).collect(),
            ..self.clone()
        }
    }

    /// Two-row CSV: header `class,b1..bN`, then the incorrect and correct rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("class");
        for b in 1..=self.n_bins() {
            let _ = write!(out, ",b{b}");
        }
        out.push('\n');
        for (name, row) in [("incorrect", &self.counts_incorrect), ("correct", &self.counts_correct)] {
            out.push_str(name);
            for c in row {
                let _ = write!(out, ",{c}");
            }
            out.push('\n');
        }
        out
    }
}

pub fn build_counts(binned: &[BinnedTrial<'_>], scale: RatingScale) -> Result<CountTable> {
    let n_bins = scale.n_bins();
    let mut inc = vec![0.0; n_bins];
    let mut cor = vec![0.0; n_bins];
    for b in binned {
        if !(1..=n_bins).contains(&b.bin) {
            return Err(Error::BinOutOfRange { bin: b.bin, n_bins });
        }
        if b.trial.correct {
            cor[b.bin - 1] += 1.0;
        } else {
            inc[b.bin - 1] += 1.0;
        }
    }
    CountTable::from_counts(scale.n_ratings(), inc, cor)
}

/// Bin + count in one pass over correctness flags and confidence values.
pub fn counts_from_values(correct: &[bool], nlp: &[f64], scale: RatingScale) -> Result<CountTable> {
    let bins = quantile_bins(nlp, scale.n_bins())?;
    let mut inc = vec![0.0; scale.n_bins()];
    let mut cor = vec![0.0; scale.n_bins()];
    for (&ok, bin) in correct.iter().zip(bins) {
        if ok {
            cor[bin - 1] += 1.0;
        } else {
            inc[bin - 1] += 1.0;
        }
    }
    CountTable::from_counts(scale.n_ratings(), inc, cor)
}

/// Apply the log-linear correction at the default pad value.
pub fn pad_counts(table: &CountTable) -> Result<CountTable> {
    table.pad(DEFAULT_PAD)
}
