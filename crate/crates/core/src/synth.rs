//! Parametric trial generators and closed-form / brute-force oracles used to
//! check every estimator against known ground truth.
//!
//! The grid oracle here has its own likelihood code and does not share
//! anything with [`crate::sdt::meta`] beyond the count-table type.

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::binning::CountTable;
use crate::error::{Error, Result};
use crate::sdt::Type1;
use crate::trialstore::{TrialRecord, TrialSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Gaussian,
    /// `nlp = mu − (exp(σ·z) − exp(σ²/2))`: mean `mu`, long left tail.
    LognormalSkew,
    Mixture,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub weight: f64,
    pub mu: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MixtureSpec {
    pub correct: Vec<Component>,
    pub incorrect: Vec<Component>,
}

fn default_label(s: &str) -> String {
    s.to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_trials: usize,
    pub p_correct: f64,
    pub family: Family,
    #[serde(default)]
    pub mu_correct: f64,
    #[serde(default)]
    pub mu_incorrect: f64,
    #[serde(default = "one")]
    pub sigma_correct: f64,
    #[serde(default = "one")]
    pub sigma_incorrect: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mixture: Option<MixtureSpec>,
    #[serde(default = "synth_domain")]
    pub domain: String,
    #[serde(default = "synth_condition")]
    pub condition: String,
    #[serde(default = "synth_format")]
    pub format: String,
    #[serde(default)]
    pub seed: u64,
    /// Added to the 1-based trial index when synthesizing question ids.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id_offset: Option<usize>,
}

fn one() -> f64 {
    1.0
}
fn synth_domain() -> String {
    default_label("Synthetic")
}
fn synth_condition() -> String {
    default_label("1")
}
fn synth_format() -> String {
    default_label("f16")
}

impl SynthConfig {
    pub fn gaussian(n_trials: usize, p_correct: f64, mu_correct: f64, mu_incorrect: f64, sigma: f64, seed: u64) -> Self {
        SynthConfig {
            n_trials,
            p_correct,
            family: Family::Gaussian,
            mu_correct,
            mu_incorrect,
            sigma_correct: sigma,
            sigma_incorrect: sigma,
            mixture: None,
            domain: synth_domain(),
            condition: synth_condition(),
            format: synth_format(),
            seed,
            id_offset: None,
        }
    }

    pub fn labelled(mut self, domain: &str, condition: &str, format: &str) -> Self {
        self.domain = domain.into();
        self.condition = condition.into();
        self.format = format.into();
        self
    }

    /// Trial-count checks against the binning scale happen when the data is
    /// diagnosed, so a config with few trials still generates.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.n_trials == 0 {
            return bad("n_trials must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.p_correct) {
            return bad(format!("p_correct {} outside [0, 1]", self.p_correct));
        }
        match self.family {
            Family::Gaussian | Family::LognormalSkew => {
                for (name, s) in [("sigma_correct", self.sigma_correct), ("sigma_incorrect", self.sigma_incorrect)] {
                    if !(s > 0.0 && s.is_finite()) {
                        return bad(format!("{name} must be positive"));
                    }
                }
                if !(self.mu_correct.is_finite() && self.mu_incorrect.is_finite()) {
                    return bad("means must be finite".into());
                }
            }
            Family::Mixture => {
                let Some(m) = &self.mixture else {
                    return bad("mixture family needs mixture components".into());
                };
                for (name, comps) in [("correct", &m.correct), ("incorrect", &m.incorrect)] {
                    if comps.is_empty() {
                        return bad(format!("no {name} mixture components"));
                    }
                    if comps.iter().any(|c| !(c.sigma > 0.0) || !(c.weight >= 0.0) || !c.mu.is_finite()) {
                        return bad(format!("invalid {name} mixture component"));
                    }
                    let w: f64 = comps.iter().map(|c| c.weight).sum();
                    if (w - 1.0).abs() > 1e-9 {
                        return bad(format!("{name} mixture weights sum to {w}, not 1"));
                    }
                }
            }
        }
        Ok(())
    }

    fn draw_nlp(&self, rng: &mut ChaCha8Rng, correct: bool) -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        let (mu, sigma) = if correct {
            (self.mu_correct, self.sigma_correct)
        } else {
            (self.mu_incorrect, self.sigma_incorrect)
        };
        match self.family {
            Family::Gaussian => mu + sigma * z,
            Family::LognormalSkew => mu - ((sigma * z).exp() - (sigma * sigma / 2.0).exp()),
            Family::Mixture => {
                let m = self.mixture.as_ref().expect("validated");
                let comps = if correct { &m.correct } else { &m.incorrect };
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut pick = &comps[comps.len() - 1];
                for c in comps {
                    acc += c.weight;
                    if u < acc {
                        pick = c;
                        break;
                    }
                }
                pick.mu + pick.sigma * z
            }
        }
    }
}

/// Draw `n_trials` i.i.d. trials. Same config, same records.
pub fn generate(config: &SynthConfig) -> Result<TrialSet> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let offset = config.id_offset.unwrap_or(0);
    let records = (1..=config.n_trials)
        .map(|i| {
            let correct = rng.random_bool(config.p_correct);
            let nlp = config.draw_nlp(&mut rng, correct);
            TrialRecord {
                question_id: format!("q{:06}", offset + i),
                domain: config.domain.clone(),
                condition: config.condition.clone(),
                format: config.format.clone(),
                correct,
                nlp,
                answer_text: None,
            }
        })
        .collect();
    TrialSet::new(records)
}

/// Several cells written into one trial file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthPlan {
    pub cells: Vec<SynthConfig>,
}

impl SynthPlan {
    /// Accepts either a single config object or `{"cells": [...]}`.
    pub fn from_json(src: &str) -> Result<Self> {
        let value: serde_json::Value =
            serde_json::from_str(src).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        if value.get("cells").is_some() {
            serde_json::from_value(value).map_err(|e| Error::InvalidConfig(e.to_string()))
        } else {
            let cell = serde_json::from_value(value).map_err(|e| Error::InvalidConfig(e.to_string()))?;
            Ok(SynthPlan { cells: vec![cell] })
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let src = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&src)
    }

    /// Cells without an explicit `id_offset` share question ids within a
    /// domain (so conditions and formats pair up) and get disjoint id ranges
    /// across domains.
    pub fn generate(&self) -> Result<TrialSet> {
        let mut widths: Vec<(String, usize)> = Vec::new();
        for c in &self.cells {
            match widths.iter_mut().find(|(d, _)| *d == c.domain) {
                Some((_, w)) => *w = (*w).max(c.n_trials),
                None => widths.push((c.domain.clone(), c.n_trials)),
            }
        }
        let mut offsets = BTreeMap::new();
        let mut acc = 0;
        for (d, w) in &widths {
            offsets.insert(d.clone(), acc);
            acc += w;
        }
        let mut records = Vec::new();
        for c in &self.cells {
            let mut c = c.clone();
            c.id_offset.get_or_insert(offsets[&c.domain]);
            records.extend(generate(&c)?.records().iter().cloned());
        }
        TrialSet::new(records)
    }
}

fn cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Mass of Normal(mu, 1) on (lo, hi], computed in whichever tail keeps precision.
fn mass(lo: f64, hi: f64, mu: f64) -> f64 {
    let (a, b) = (lo - mu, hi - mu);
    if a > 0.0 {
        cdf(-a) - cdf(-b)
    } else {
        cdf(b) - cdf(a)
    }
}

/// Closed-form AUROC₂ of the Gaussian family.
pub fn oracle_auroc2(config: &SynthConfig) -> Result<f64> {
    if config.family != Family::Gaussian {
        return Err(Error::UnsupportedFamily(format!("{:?}", config.family)));
    }
    let s = (config.sigma_correct.powi(2) + config.sigma_incorrect.powi(2)).sqrt();
    Ok(cdf((config.mu_correct - config.mu_incorrect) / s))
}

/// Expected counts of the equal-variance model with `d′ = meta_d`, criterion
/// `c`, confidence criteria `r1` (descending, below the Type-1 criterion) and
/// `r2` (ascending, above it). Unpadded.
pub fn model_table(meta_d: f64, c: f64, r1: &[f64], r2: &[f64], n_incorrect: f64, n_correct: f64) -> Result<CountTable> {
    let n = r1.len() + 1;
    if r2.len() != n - 1 {
        return Err(Error::InvalidConfig("r1 and r2 lengths differ".into()));
    }
    let mut edges = vec![f64::NEG_INFINITY];
    edges.extend(r1.iter().rev());
    edges.push(c);
    edges.extend(r2.iter());
    edges.push(f64::INFINITY);
    if edges.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidConfig("criteria not ordered".into()));
    }
    let counts = |mu: f64, total: f64| -> Vec<f64> { edges.windows(2).map(|w| total * mass(w[0], w[1], mu)).collect() };
    CountTable::from_counts(n, counts(-meta_d / 2.0, n_incorrect), counts(meta_d / 2.0, n_correct))
}

/// Conditional log-likelihood of one response side for both classes.
/// `edges` runs from the outer tail to the Type-1 criterion (R1) or from the
/// criterion outward (R2); `cells` are the matching counts `(incorrect, correct)`.
fn side_ll(edges: &[f64], cells: &[(f64, f64)], mus: (f64, f64), norms: (f64, f64)) -> f64 {
    let mut ll = 0.0;
    for (k, &(ci, cc)) in cells.iter().enumerate() {
        let (lo, hi) = (edges[k], edges[k + 1]);
        let pi = (mass(lo, hi, mus.0) / norms.0).max(1e-12);
        let pc = (mass(lo, hi, mus.1) / norms.1).max(1e-12);
        ll += ci * pi.ln() + cc * pc.ln();
    }
    ll
}

fn golden_max(mut f: impl FnMut(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while b - a > 1e-10 {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = f(x1);
        }
    }
    (a + b) / 2.0
}

/// Maximize one side by cyclic coordinate ascent; `edges` holds the inner
/// (free) criteria in increasing order and is updated in place.
fn optimize_side(free: &mut [f64], lo_end: f64, hi_end: f64, eval: &dyn Fn(&[f64]) -> f64) -> f64 {
    let span = 12.0;
    let mut best = eval(free);
    for _ in 0..2000 {
        for k in 0..free.len() {
            let left = if k == 0 { lo_end } else { free[k - 1] };
            let right = if k + 1 == free.len() { hi_end } else { free[k + 1] };
            let a = if left.is_finite() { left } else { right - span };
            let b = if right.is_finite() { right } else { left + span };
            let mut trial = free.to_vec();
            let x = golden_max(
                |x| {
                    trial[k] = x;
                    eval(&trial)
                },
                a,
                b,
            );
            free[k] = x;
        }
        let now = eval(free);
        let gain = now - best;
        best = now;
        if gain.abs() < 1e-13 {
            break;
        }
    }
    best
}

/// Profile log-likelihood at a fixed meta_d, with the criteria re-optimized.
fn profile_ll(table: &CountTable, c_ratio: f64, m: f64, warm: &mut (Vec<f64>, Vec<f64>)) -> f64 {
    let n = table.n_ratings;
    let mc = c_ratio * m;
    let mus = (-m / 2.0, m / 2.0);
    let below = (cdf(mc - mus.0), cdf(mc - mus.1));
    let above = (cdf(-(mc - mus.0)), cdf(-(mc - mus.1)));
    let cells: Vec<(f64, f64)> = (0..2 * n)
        .map(|b| (table.counts_incorrect[b], table.counts_correct[b]))
        .collect();
    let (r1cells, r2cells) = cells.split_at(n);

    let eval1 = |free: &[f64]| {
        let mut e = vec![f64::NEG_INFINITY];
        e.extend(free.iter().map(|x| mc + x));
        e.push(mc);
        side_ll(&e, r1cells, mus, below)
    };
    let eval2 = |free: &[f64]| {
        let mut e = vec![mc];
        e.extend(free.iter().map(|x| mc + x));
        e.push(f64::INFINITY);
        side_ll(&e, r2cells, mus, above)
    };
    // criteria are stored relative to meta_c so warm starts track it
    let l1 = optimize_side(&mut warm.0, f64::NEG_INFINITY, 0.0, &eval1);
    let l2 = optimize_side(&mut warm.1, 0.0, f64::INFINITY, &eval2);
    l1 + l2
}

/// Grid search over meta_d ∈ [0, 3]: step 0.05, then 0.005 and 0.001 around
/// the best points. Returns `(meta_d, log_likelihood)`.
pub fn oracle_meta_grid(table: &CountTable, type1: &Type1) -> Result<(f64, f64)> {
    if type1.d_prime == 0.0 || !type1.d_prime.is_finite() {
        return Err(Error::ZeroDPrime);
    }
    let n = table.n_ratings;
    let c_ratio = type1.criterion_c / type1.d_prime;
    let start = || {
        let r1: Vec<f64> = (1..n).map(|k| -0.5 * (n - k) as f64).collect();
        let r2: Vec<f64> = (1..n).map(|k| 0.5 * k as f64).collect();
        (r1, r2)
    };
    let mut cache: BTreeMap<i64, f64> = BTreeMap::new();
    let eval_grid = |cache: &mut BTreeMap<i64, f64>, points: Vec<i64>, warm: &mut (Vec<f64>, Vec<f64>)| {
        for p in points {
            if !cache.contains_key(&p) {
                let v = profile_ll(table, c_ratio, p as f64 / 1000.0, warm);
                cache.insert(p, v);
            }
        }
    };
    let mut warm = start();
    eval_grid(&mut cache, (0..=3000).step_by(50).collect(), &mut warm);
    for (step, radius) in [(5i64, 50i64), (1, 5)] {
        let mut top: Vec<(i64, f64)> = cache.iter().map(|(k, v)| (*k, *v)).collect();
        top.sort_by(|a, b| b.1.total_cmp(&a.1));
        for &(centre, _) in top.iter().take(3) {
            let lo = (centre - radius).max(0);
            let hi = (centre + radius).min(3000);
            let mut w = start();
            eval_grid(&mut cache, (lo..=hi).step_by(step as usize).collect(), &mut w);
        }
    }
    let (k, v) = cache
        .iter()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(k, v)| (*k, *v))
        .expect("grid non-empty");
    Ok((k as f64 / 1000.0, v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::binning::{counts_from_values, RatingScale};
    use crate::nonparam::auroc2;
    use crate::sdt::{meta_d_fit, type1_fit};

    #[test]
    fn deterministic_under_seed() {
        let cfg = SynthConfig::gaussian(500, 0.6, -0.3, -0.8, 0.4, 9);
        assert_eq!(generate(&cfg).unwrap(), generate(&cfg).unwrap());
        let other = SynthConfig { seed: 10, ..cfg.clone() };
        assert_ne!(generate(&cfg).unwrap(), generate(&other).unwrap());
    }

    #[test]
    fn question_ids_synthesized() {
        let set = generate(&SynthConfig::gaussian(3, 0.5, 0.0, 0.0, 1.0, 1)).unwrap();
        let ids: Vec<&str> = set.iter().map(|r| r.question_id.as_str()).collect();
        assert_eq!(ids, ["q000001", "q000002", "q000003"]);
    }

    #[test]
    fn certain_correctness() {
        let set = generate(&SynthConfig::gaussian(200, 1.0, 0.0, -1.0, 1.0, 3)).unwrap();
        assert!(set.iter().all(|r| r.correct));
    }

    #[test]
    fn invalid_configs_rejected() {
        let base = SynthConfig::gaussian(100, 0.5, 0.0, 0.0, 1.0, 1);
        assert!(generate(&SynthConfig { p_correct: 1.5, ..base.clone() }).is_err());
        assert!(generate(&SynthConfig { sigma_correct: 0.0, ..base.clone() }).is_err());
        let mix = SynthConfig {
            family: Family::Mixture,
            mixture: Some(MixtureSpec {
                correct: vec![Component { weight: 0.5, mu: 0.0, sigma: 1.0 }],
                incorrect: vec![Component { weight: 1.0, mu: 0.0, sigma: 1.0 }],
            }),
            ..base
        };
        assert!(matches!(generate(&mix), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn few_trials_still_generate() {
        assert_eq!(generate(&SynthConfig::gaussian(15, 0.5, 0.0, -1.0, 1.0, 1)).unwrap().len(), 15);
    }

    #[test]
    fn exchangeable_classes_give_chance_auroc() {
        let set = generate(&SynthConfig::gaussian(10_000, 0.5, -0.5, -0.5, 0.3, 5)).unwrap();
        assert!((auroc2(&set).unwrap() - 0.5).abs() < 0.02);
    }

    #[test]
    fn closed_form_auroc() {
        let cfg = SynthConfig::gaussian(100_000, 0.7, std::f64::consts::SQRT_2 * 0.3, 0.0, 0.3, 11);
        let oracle = oracle_auroc2(&cfg).unwrap();
        assert!((oracle - 0.841_344_746).abs() < 1e-8);
        let set = generate(&cfg).unwrap();
        assert!((auroc2(&set).unwrap() - oracle).abs() < 0.01);
    }

    #[test]
    fn oracle_auroc_limits() {
        let zero = SynthConfig::gaussian(10, 0.5, -1.0, -1.0, 1.0, 0);
        assert_eq!(oracle_auroc2(&zero).unwrap(), 0.5);
        let far = SynthConfig::gaussian(10, 0.5, 100.0, 0.0, 1.0, 0);
        assert_eq!(oracle_auroc2(&far).unwrap(), 1.0);
        let skew = SynthConfig { family: Family::LognormalSkew, ..zero };
        assert!(matches!(oracle_auroc2(&skew), Err(Error::UnsupportedFamily(_))));
    }

    #[test]
    fn plan_pairs_ids_within_domain() {
        let base = SynthConfig::gaussian(20, 0.6, 0.0, -1.0, 1.0, 1);
        let plan = SynthPlan {
            cells: vec![
                base.clone().labelled("Arts", "1", "f16"),
                SynthConfig { seed: 2, ..base.clone().labelled("Arts", "2", "f16") },
                base.clone().labelled("Science", "1", "f16"),
            ],
        };
        let set = plan.generate().unwrap();
        let ids = |d: &str, c: &str| -> Vec<String> {
            set.iter()
                .filter(|r| r.domain == d && r.condition == c)
                .map(|r| r.question_id.clone())
                .collect()
        };
        assert_eq!(ids("Arts", "1"), ids("Arts", "2"));
        assert_eq!(ids("Science", "1")[0], "q000021");
    }

    #[test]
    fn plan_accepts_single_config() {
        let src = r#"{"n_trials": 10, "p_correct": 0.5, "family": "gaussian", "mu_correct": 0.0, "mu_incorrect": -1.0, "seed": 4}"#;
        let plan = SynthPlan::from_json(src).unwrap();
        assert_eq!(plan.cells.len(), 1);
        assert_eq!(plan.cells[0].sigma_correct, 1.0);
    }

    #[test]
    fn model_table_probabilities_sum() {
        let t = model_table(1.2, 0.1, &[-0.4, -1.0, -1.6], &[0.6, 1.2, 1.8], 1.0, 1.0).unwrap();
        assert!((t.counts_incorrect.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((t.counts_correct.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(model_table(1.2, 0.1, &[-1.0, -0.4, -1.6], &[0.6, 1.2, 1.8], 1.0, 1.0).is_err());
    }

    #[test]
    fn grid_matches_generative_value() {
        let raw = model_table(1.2, 0.1, &[-0.4, -1.0, -1.6], &[0.6, 1.2, 1.8], 1e6, 1e6).unwrap();
        let t = raw.pad(0.5).unwrap();
        let t1 = type1_fit(&t).unwrap();
        let (m, _) = oracle_meta_grid(&t, &t1).unwrap();
        assert!((m - 1.2).abs() <= 0.002, "grid meta_d {m}");
    }

    #[test]
    fn grid_agrees_with_mle_on_sampled_table() {
        let cfg = SynthConfig::gaussian(600, 0.65, -0.4, -0.9, 0.45, 21);
        let set = generate(&cfg).unwrap();
        let c: Vec<bool> = set.iter().map(|r| r.correct).collect();
        let x: Vec<f64> = set.iter().map(|r| r.nlp).collect();
        let t = counts_from_values(&c, &x, RatingScale::default()).unwrap().pad(0.5).unwrap();
        let t1 = type1_fit(&t).unwrap();
        let fit = meta_d_fit(&t, &t1).unwrap();
        let (m, ll) = oracle_meta_grid(&t, &t1).unwrap();
        assert!((fit.meta_d - m).abs() <= 0.01, "mle {} grid {m}", fit.meta_d);
        assert!(fit.log_likelihood >= ll - 1e-6);
    }
}
