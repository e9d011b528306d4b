//! Flat `key = value` run configuration.
//!
//! ```text
//! # frozen analysis plan
//! trials_path = data/c1.jsonl
//! n_ratings = 4
//! seed = 42
//! n_resamples = 10000
//! ci_levels = 0.95, 0.90
//! hypothesis = H1 2 1 Science ci_lower_gt_zero
//! ```
//!
//! `hypothesis` may repeat; each line is `id condition_a condition_b
//! domain[,domain..] rule [metric]`. When no hypothesis line is present the
//! four default contrasts are used.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use crate::binning::{RatingScale, DEFAULT_PAD};
use crate::error::{Error, Result};
use crate::profile::{BinningScope, CellOptions, Metric};
use crate::resample::{default_suite, HypothesisSpec, Pairing, Rule};

pub const KEYS: [&str; 12] = [
    "trials_path",
    "n_ratings",
    "n_bins",
    "pad_value",
    "seed",
    "n_resamples",
    "tost_delta",
    "ci_levels",
    "binning_scope",
    "pairing",
    "output_dir",
    "hypothesis",
];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub trials_path: Option<PathBuf>,
    pub n_ratings: usize,
    pub n_bins: usize,
    pub pad_value: f64,
    pub seed: u64,
    pub n_resamples: usize,
    pub tost_delta: f64,
    /// Confirmatory level, then TOST level.
    pub ci_levels: (f64, f64),
    pub binning_scope: BinningScope,
    pub pairing: Pairing,
    pub output_dir: PathBuf,
    pub hypotheses: Vec<HypothesisLine>,
}

/// A hypothesis as written in the config; levels and delta are filled in later.
#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisLine {
    pub id: String,
    pub condition_a: String,
    pub condition_b: String,
    pub domains: Vec<String>,
    pub rule: Rule,
    pub metric: Metric,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            trials_path: None,
            n_ratings: 4,
            n_bins: 8,
            pad_value: DEFAULT_PAD,
            seed: 42,
            n_resamples: 10_000,
            tost_delta: 0.17,
            ci_levels: (0.95, 0.90),
            binning_scope: BinningScope::PerCell,
            pairing: Pairing::Paired,
            output_dir: PathBuf::from("metadkit-out"),
            hypotheses: Vec::new(),
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse `{v}`")))
}

pub fn parse_hypothesis(v: &str) -> Result<HypothesisLine> {
    let parts: Vec<&str> = v.split_whitespace().collect();
    if !(5..=6).contains(&parts.len()) {
        return Err(Error::Config(format!(
            "hypothesis `{v}`: expected `id condition_a condition_b domains rule [metric]`"
        )));
    }
    Ok(HypothesisLine {
        id: parts[0].into(),
        condition_a: parts[1].into(),
        condition_b: parts[2].into(),
        domains: parts[3].split(',').map(|d| d.trim().to_string()).filter(|d| !d.is_empty()).collect(),
        rule: parts[4].parse()?,
        metric: match parts.get(5) {
            Some(m) => m.parse()?,
            None => Metric::MetaD,
        },
    })
}

impl RunConfig {
    pub fn parse(src: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut seen = BTreeSet::new();
        let (mut got_ratings, mut got_bins) = (false, false);
        for (i, raw) in src.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(Error::Config(format!("line {}: expected key = value", i + 1)));
            };
            let (k, v) = (k.trim(), v.trim());
            if k != "hypothesis" && !seen.insert(k.to_string()) {
                return Err(Error::Config(format!("line {}: `{k}` set twice", i + 1)));
            }
            match k {
                "n_ratings" => got_ratings = true,
                "n_bins" => got_bins = true,
                _ => {}
            }
            cfg.set(k, v).map_err(|e| match e {
                Error::Config(m) => Error::Config(format!("line {}: {m}", i + 1)),
                other => other,
            })?;
        }
        if got_bins && !got_ratings {
            cfg.n_ratings = cfg.n_bins / 2;
        } else if got_ratings && !got_bins {
            cfg.n_bins = 2 * cfg.n_ratings;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let src = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&src)
    }

    /// Assign one key; `hypothesis` appends.
    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "trials_path" => self.trials_path = Some(PathBuf::from(v)),
            "n_ratings" => self.n_ratings = parse_num(key, v)?,
            "n_bins" => self.n_bins = parse_num(key, v)?,
            "pad_value" => self.pad_value = parse_num(key, v)?,
            "seed" => self.seed = parse_num(key, v)?,
            "n_resamples" => self.n_resamples = parse_num(key, v)?,
            "tost_delta" => self.tost_delta = parse_num(key, v)?,
            "ci_levels" => {
                let levels: Vec<&str> = v.split(',').map(str::trim).collect();
                if levels.len() != 2 {
                    return Err(Error::Config(format!("ci_levels: expected two values, got `{v}`")));
                }
                self.ci_levels = (parse_num(key, levels[0])?, parse_num(key, levels[1])?);
            }
            "binning_scope" => self.binning_scope = v.parse()?,
            "pairing" => self.pairing = v.parse()?,
            "output_dir" => self.output_dir = PathBuf::from(v),
            "hypothesis" => self.hypotheses.push(parse_hypothesis(v)?),
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_ratings < 2 {
            return Err(Error::Config(format!("n_ratings must be >= 2, got {}", self.n_ratings)));
        }
        if self.n_bins != 2 * self.n_ratings {
            return Err(Error::Config(format!(
                "n_bins ({}) must equal 2 * n_ratings ({})",
                self.n_bins, self.n_ratings
            )));
        }
        if self.n_resamples < 1 {
            return Err(Error::Config("n_resamples must be >= 1".into()));
        }
        if !(self.tost_delta > 0.0) {
            return Err(Error::Config("tost_delta must be > 0".into()));
        }
        if !(self.pad_value >= 0.0 && self.pad_value.is_finite()) {
            return Err(Error::Config("pad_value must be a finite non-negative number".into()));
        }
        for l in [self.ci_levels.0, self.ci_levels.1] {
            if !(l > 0.0 && l < 1.0) {
                return Err(Error::Config(format!("ci level {l} outside (0, 1)")));
            }
        }
        Ok(())
    }

    pub fn cell_options(&self) -> Result<CellOptions> {
        Ok(CellOptions {
            scale: RatingScale::new(self.n_ratings)?,
            pad_value: self.pad_value,
            binning_scope: self.binning_scope,
        })
    }

    pub fn suite(&self) -> Vec<HypothesisSpec> {
        if self.hypotheses.is_empty() {
            return default_suite(self.tost_delta, self.ci_levels.0, self.ci_levels.1);
        }
        self.hypotheses
            .iter()
            .map(|h| HypothesisSpec {
                id: h.id.clone(),
                condition_a: h.condition_a.clone(),
                condition_b: h.condition_b.clone(),
                domains: h.domains.clone(),
                metric: h.metric,
                rule: h.rule,
                delta: self.tost_delta,
                ci_level: match h.rule {
                    Rule::Tost => self.ci_levels.1,
                    Rule::CiLowerGtZero => self.ci_levels.0,
                },
            })
            .collect()
    }

    /// Canonical text form; parses back to an equal config.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        if let Some(p) = &self.trials_path {
            out.push_str(&format!("trials_path = {}\n", p.display()));
        }
        out.push_str(&format!(
            "n_ratings = {}\nn_bins = {}\npad_value = {}\nseed = {}\nn_resamples = {}\ntost_delta = {}\n\
             ci_levels = {}, {}\nbinning_scope = {}\npairing = {}\noutput_dir = {}\n",
            self.n_ratings,
            self.n_bins,
            self.pad_value,
            self.seed,
            self.n_resamples,
            self.tost_delta,
            self.ci_levels.0,
            self.ci_levels.1,
            self.binning_scope,
            self.pairing,
            self.output_dir.display()
        ));
        for h in &self.hypotheses {
            let rule = match h.rule {
                Rule::Tost => "tost",
                Rule::CiLowerGtZero => "ci_lower_gt_zero",
            };
            out.push_str(&format!(
                "hypothesis = {} {} {} {} {rule} {}\n",
                h.id,
                h.condition_a,
                h.condition_b,
                h.domains.join(","),
                h.metric.label()
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_protocol() {
        let c = RunConfig::parse("").unwrap();
        assert_eq!((c.n_ratings, c.n_bins, c.seed, c.n_resamples), (4, 8, 42, 10_000));
        assert_eq!((c.pad_value, c.tost_delta, c.ci_levels), (0.5, 0.17, (0.95, 0.90)));
        let suite = c.suite();
        assert_eq!(suite.len(), 4);
        assert_eq!(suite[1].domains, ["History", "Arts", "Geography"]);
        assert_eq!(suite[1].ci_level, 0.90);
    }

    #[test]
    fn parses_keys_and_comments() {
        let c = RunConfig::parse(
            "# plan\nseed = 7 # inline\nn_ratings = 3\npairing = independent\n\
             hypothesis = X 2 1 Arts,History tost\nhypothesis = Y 2 3 Science ci_lower_gt_zero auroc2\n",
        )
        .unwrap();
        assert_eq!((c.seed, c.n_ratings, c.n_bins), (7, 3, 6));
        assert_eq!(c.pairing, Pairing::Independent);
        let s = c.suite();
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].domains, ["Arts", "History"]);
        assert_eq!(s[1].metric, Metric::Auroc2);
    }

    #[test]
    fn rejects_bad_input() {
        for src in [
            "seed = x",
            "bogus = 1",
            "seed = 1\nseed = 2",
            "n_ratings = 4\nn_bins = 6",
            "n_resamples = 0",
            "tost_delta = 0",
            "just a line",
            "hypothesis = H1 2 1",
            "binning_scope = weird",
        ] {
            assert!(matches!(RunConfig::parse(src), Err(Error::Config(_))), "{src}");
        }
    }

    #[test]
    fn text_round_trip() {
        let mut c = RunConfig::parse("hypothesis = H9 2 1 Arts tost\nbinning_scope = global").unwrap();
        c.trials_path = Some("x.jsonl".into());
        assert_eq!(RunConfig::parse(&c.to_text()).unwrap(), c);
    }
}
