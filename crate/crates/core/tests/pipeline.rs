use metadkit::profile::{diagnose, CellOptions, Metric};
use metadkit::resample::{default_suite, run_hypothesis_suite, BootstrapConfig, Decision, HypothesisSpec, Rule};
use metadkit::synth::{SynthConfig, SynthPlan};
use metadkit::trialstore::{load_trials, TrialFormat};

const DOMAINS: [&str; 4] = ["Arts", "Geography", "History", "Science"];

/// Four conditions; condition 2 has the sharper confidence split in `boost_domain`.
fn plan(n: usize, boost_domain: &str, boost: f64) -> SynthPlan {
    let mut cells = vec![];
    for (ci, c) in ["1", "2", "3", "4"].iter().enumerate() {
        for (di, d) in DOMAINS.iter().enumerate() {
            let extra = if *c == "2" && *d == boost_domain { boost } else { 0.0 };
            let cfg = SynthConfig::gaussian(n, 0.67, -0.35 + extra, -0.5, 0.3, (100 * ci + di) as u64);
            cells.push(cfg.labelled(d, c, "f16"));
        }
    }
    SynthPlan { cells }
}

fn quick(n_resamples: usize) -> BootstrapConfig {
    BootstrapConfig {
        n_resamples,
        ..Default::default()
    }
}

#[test]
fn csv_and_jsonl_give_the_same_report() {
    let set = plan(240, "Science", 0.0).generate().unwrap();
    let dir = tempfile::tempdir().unwrap();
    let (j, c) = (dir.path().join("t.jsonl"), dir.path().join("t.csv"));
    set.write_jsonl(&j).unwrap();
    set.write_csv(&c).unwrap();
    let from_j = load_trials(&j, TrialFormat::from_path(&j)).unwrap();
    let from_c = load_trials(&c, TrialFormat::from_path(&c)).unwrap();
    assert_eq!(from_j.records(), from_c.records());

    let opts = CellOptions::default();
    assert_eq!(diagnose(&from_j, &opts).unwrap(), diagnose(&from_c, &opts).unwrap());
    let suite = default_suite(0.17, 0.95, 0.90);
    let a = run_hypothesis_suite(&from_j, &suite, None, &quick(200)).unwrap();
    let b = run_hypothesis_suite(&from_c, &suite, None, &quick(200)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn planted_effect_is_supported() {
    // condition 2 gets a much larger correct/incorrect separation in Science
    let set = plan(600, "Science", 0.35).generate().unwrap();
    let h1 = HypothesisSpec {
        id: "H1".into(),
        condition_a: "2".into(),
        condition_b: "1".into(),
        domains: vec!["Science".into()],
        metric: Metric::MetaD,
        rule: Rule::CiLowerGtZero,
        delta: 0.17,
        ci_level: 0.95,
    };
    let r = run_hypothesis_suite(&set, &[h1], None, &quick(1000)).unwrap();
    assert_eq!(r.len(), 1);
    assert!(r[0].delta_hat > 0.0 && r[0].ci_low > 0.0, "{:?}", r[0]);
    assert_eq!(r[0].decision, Some(Decision::Supported));
}

#[test]
fn null_effect_is_not_supported() {
    let set = plan(600, "Science", 0.0).generate().unwrap();
    let r = run_hypothesis_suite(&set, &default_suite(0.17, 0.95, 0.90)[..1], None, &quick(500)).unwrap();
    assert_eq!(r[0].decision, Some(Decision::NotSupported), "{:?}", r[0]);
}
