//! Markdown / CSV tables and SVG bar charts built from computed profiles and
//! contrasts. Nothing here computes statistics; every cell is copied from an
//! input value and only rounded on the way out.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::nonparam::{DomainProfile, FormatComparison};
use crate::profile::{Diagnosis, Metric};
use crate::resample::{ContrastResult, Rule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Precision {
    /// Three decimals.
    #[default]
    Rounded,
    /// Shortest representation that parses back to the same f64.
    Full,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Text(String),
    Real(f64),
    /// Real with an explicit leading sign.
    Signed(f64),
    Int(i64),
    Interval(f64, f64),
    Missing,
}

fn real(x: f64, prec: Precision) -> String {
    match prec {
        Precision::Full => format!("{x}"),
        Precision::Rounded => {
            let s = format!("{x:.3}");
            if s == "-0.000" {
                "0.000".into()
            } else {
                s
            }
        }
    }
}

fn signed(x: f64, prec: Precision) -> String {
    let s = real(x, prec);
    if s.starts_with('-') || s == "0.000" || x == 0.0 {
        s
    } else {
        format!("+{s}")
    }
}

impl Cell {
    fn markdown(&self, prec: Precision) -> String {
        match self {
            Cell::Text(s) => s.clone(),
            Cell::Real(x) => real(*x, prec),
            Cell::Signed(x) => signed(*x, prec),
            Cell::Int(i) => i.to_string(),
            Cell::Interval(lo, hi) => format!("[{}, {}]", real(*lo, prec), real(*hi, prec)),
            Cell::Missing => "n/a".into(),
        }
    }

    fn csv(&self, prec: Precision) -> Vec<String> {
        match self {
            Cell::Interval(lo, hi) => vec![real(*lo, prec), real(*hi, prec)],
            Cell::Signed(x) => vec![real(*x, prec)],
            Cell::Missing => vec![String::new()],
            other => vec![other.markdown(prec)],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    /// File stem when written to disk.
    pub name: String,
    pub title: String,
    pub headers: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, title: &str, headers: &[&str]) -> Self {
        Table {
            name: name.into(),
            title: title.into(),
            headers: headers.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn to_markdown(&self, prec: Precision) -> String {
        let mut out = format!("**{}**\n\n| {} |\n", self.title, self.headers.join(" | "));
        let _ = writeln!(out, "|{}", self.headers.iter().map(|_| "---|").collect::<String>());
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|c| c.markdown(prec)).collect();
            let _ = writeln!(out, "| {} |", cells.join(" | "));
        }
        out
    }

    /// Interval columns split into `<header> low` and `<header> high`.
    pub fn csv_headers(&self) -> Vec<String> {
        let mut h = Vec::new();
        for (i, name) in self.headers.iter().enumerate() {
            let is_interval = self.rows.first().is_some_and(|r| matches!(r.get(i), Some(Cell::Interval(..))));
            if is_interval {
                h.push(format!("{name} low"));
                h.push(format!("{name} high"));
            } else {
                h.push(name.clone());
            }
        }
        h
    }

    pub fn to_csv(&self, prec: Precision) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let to_err = |e: csv::Error| Error::Malformed {
            line: 0,
            message: e.to_string(),
        };
        w.write_record(self.csv_headers()).map_err(to_err)?;
        for row in &self.rows {
            let fields: Vec<String> = row.iter().flat_map(|c| c.csv(prec)).collect();
            w.write_record(fields).map_err(to_err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Malformed {
            line: 0,
            message: e.to_string(),
        })?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

pub fn profile_value(p: &DomainProfile, metric: Metric) -> f64 {
    match metric {
        Metric::Accuracy => p.accuracy,
        Metric::NlpGap => p.nlp_gap,
        Metric::Auroc2 => p.auroc2,
        Metric::DPrime => p.d_prime,
        Metric::MetaD => p.meta_d,
        Metric::MRatio => p.m_ratio,
    }
}

fn matched<'a>(
    a: &'a [DomainProfile],
    b: &'a [DomainProfile],
) -> Result<Vec<(&'a DomainProfile, &'a DomainProfile)>> {
    let ib: BTreeMap<&str, &DomainProfile> = b.iter().map(|p| (p.domain.as_str(), p)).collect();
    let ia: BTreeSet<&str> = a.iter().map(|p| p.domain.as_str()).collect();
    let mut missing: Vec<String> = Vec::new();
    for p in a {
        if !ib.contains_key(p.domain.as_str()) {
            missing.push(format!("{}/{}", p.format, p.domain));
        }
    }
    for p in b {
        if !ia.contains(p.domain.as_str()) {
            missing.push(format!("{}/{}", a.first().map_or("?", |x| x.format.as_str()), p.domain));
        }
    }
    if !missing.is_empty() {
        return Err(Error::IncompleteInput(format!("missing cells: {}", missing.join(", "))));
    }
    Ok(a.iter().map(|p| (p, ib[p.domain.as_str()])).collect())
}

/// d′, meta-d′, M-ratio and rank side by side for two formats, ordered by
/// the M-ratio rank in `a`.
pub fn format_table(a: &[DomainProfile], b: &[DomainProfile]) -> Result<Table> {
    let mut pairs = matched(a, b)?;
    pairs.sort_by_key(|(pa, _)| (pa.rank_m_ratio, pa.domain.clone()));
    let (fa, fb) = (fmt_name(a), fmt_name(b));
    let headers: Vec<String> = std::iter::once("Domain".to_string())
        .chain([&fa, &fb].iter().flat_map(|f| {
            ["d′", "meta-d′", "M-ratio", "Rank"].map(|h| format!("{f} {h}"))
        }))
        .collect();
    let mut t = Table {
        name: format!("m_ratio_{fa}_vs_{fb}"),
        title: format!("Domain-level M-ratio profiles, {fa} and {fb}"),
        headers,
        rows: Vec::new(),
    };
    for (pa, pb) in pairs {
        let mut row = vec![Cell::Text(pa.domain.clone())];
        for p in [pa, pb] {
            row.extend([
                Cell::Real(p.d_prime),
                Cell::Real(p.meta_d),
                Cell::Real(p.m_ratio),
                Cell::Int(p.rank_m_ratio as i64),
            ]);
        }
        t.rows.push(row);
    }
    Ok(t)
}

/// AUROC₂ and rank side by side for two formats.
pub fn auroc_table(a: &[DomainProfile], b: &[DomainProfile]) -> Result<Table> {
    let mut pairs = matched(a, b)?;
    pairs.sort_by_key(|(pa, _)| (pa.rank_auroc2, pa.domain.clone()));
    let (fa, fb) = (fmt_name(a), fmt_name(b));
    let mut t = Table {
        name: format!("auroc2_{fa}_vs_{fb}"),
        title: format!("Type-2 AUROC per domain, {fa} and {fb}"),
        headers: vec![
            "Domain".into(),
            format!("{fa} AUROC2"),
            format!("{fa} Rank"),
            format!("{fb} AUROC2"),
            format!("{fb} Rank"),
        ],
        rows: Vec::new(),
    };
    for (pa, pb) in pairs {
        t.rows.push(vec![
            Cell::Text(pa.domain.clone()),
            Cell::Real(pa.auroc2),
            Cell::Int(pa.rank_auroc2 as i64),
            Cell::Real(pb.auroc2),
            Cell::Int(pb.rank_auroc2 as i64),
        ]);
    }
    Ok(t)
}

fn fmt_name(ps: &[DomainProfile]) -> String {
    ps.first().map(|p| p.format.clone()).unwrap_or_default()
}

fn level_header(results: &[&ContrastResult], fallback: f64) -> String {
    let level = results.first().map_or(fallback, |r| r.ci_level);
    format!("{}% CI", (level * 100.0).round())
}

/// Confirmatory contrasts (one-sided rule) and equivalence tests, as two tables.
/// `rules` maps hypothesis id to its decision rule; ids absent from it count as confirmatory.
pub fn contrast_tables(results: &[ContrastResult], rules: &BTreeMap<String, Rule>) -> Vec<Table> {
    let is_tost = |r: &&ContrastResult| rules.get(&r.hypothesis_id) == Some(&Rule::Tost);
    let conf: Vec<&ContrastResult> = results.iter().filter(|r| !is_tost(r)).collect();
    let eq: Vec<&ContrastResult> = results.iter().filter(is_tost).collect();

    let ci = level_header(&conf, 0.95);
    let mut t1 = Table::new(
        "confirmatory",
        "Confirmatory results",
        &["Hypothesis", "Contrast", "Domain", "Δmeta-d′", &ci, "Result"],
    );
    for r in conf {
        t1.rows.push(vec![
            Cell::Text(r.hypothesis_id.clone()),
            Cell::Text(format!("Cond {} - Cond {}", r.condition_a, r.condition_b)),
            Cell::Text(r.domain.clone()),
            Cell::Signed(r.delta_hat),
            Cell::Interval(r.ci_low, r.ci_high),
            r.decision.map_or(Cell::Missing, |d| Cell::Text(d.to_string())),
        ]);
    }
    let mut out = vec![t1];
    if !eq.is_empty() {
        let ci = level_header(&eq, 0.90);
        let mut t2 = Table::new(
            "equivalence",
            "Equivalence tests (TOST)",
            &["Hypothesis", "Domain", "Δmeta-d′", &ci, "Result"],
        );
        for r in eq {
            t2.rows.push(vec![
                Cell::Text(r.hypothesis_id.clone()),
                Cell::Text(r.domain.clone()),
                Cell::Signed(r.delta_hat),
                Cell::Interval(r.ci_low, r.ci_high),
                r.decision.map_or(Cell::Missing, |d| Cell::Text(d.to_string())),
            ]);
        }
        out.push(t2);
    }
    out
}

/// NLP gap by condition (rows) and domain (columns) for one format.
pub fn nlp_gap_table(diag: &Diagnosis, format: &str) -> Table {
    let groups: Vec<(&String, &Vec<DomainProfile>)> = diag
        .groups
        .iter()
        .filter(|((_, f), _)| f == format)
        .map(|((c, _), ps)| (c, ps))
        .collect();
    let domains: BTreeSet<&str> = groups.iter().flat_map(|(_, ps)| ps.iter().map(|p| p.domain.as_str())).collect();
    let mut headers = vec!["Condition"];
    headers.extend(domains.iter().copied());
    let mut t = Table::new(&format!("nlp_gap_{format}"), &format!("NLP gap (correct − incorrect), {format}"), &headers);
    for (cond, ps) in groups {
        let mut row = vec![Cell::Text(cond.clone())];
        for d in &domains {
            row.push(ps.iter().find(|p| p.domain == *d).map_or(Cell::Missing, |p| Cell::Real(p.nlp_gap)));
        }
        t.rows.push(row);
    }
    t
}

/// Per-condition, per-domain metrics for one format.
pub fn condition_table(diag: &Diagnosis, format: &str) -> Table {
    let mut t = Table::new(
        &format!("conditions_{format}"),
        &format!("Per-condition, per-domain metrics, {format}"),
        &["Cond", "Domain", "N", "Acc", "d′", "meta-d′", "M-ratio", "NLP gap"],
    );
    for ((cond, f), ps) in &diag.groups {
        if f != format {
            continue;
        }
        let mut ps: Vec<&DomainProfile> = ps.iter().collect();
        ps.sort_by(|a, b| a.domain.cmp(&b.domain));
        for p in ps {
            t.rows.push(vec![
                Cell::Text(cond.clone()),
                Cell::Text(p.domain.clone()),
                Cell::Int(p.n as i64),
                Cell::Real(p.accuracy),
                Cell::Real(p.d_prime),
                Cell::Real(p.meta_d),
                Cell::Real(p.m_ratio),
                Cell::Real(p.nlp_gap),
            ]);
        }
    }
    t
}

/// Every profile field, one row per cell.
pub fn profile_table(profiles: &[DomainProfile]) -> Table {
    let mut t = Table::new(
        "profiles",
        "Domain profiles",
        &[
            "condition",
            "format",
            "domain",
            "n",
            "accuracy",
            "d_prime",
            "criterion_c",
            "meta_d",
            "m_ratio",
            "auroc2",
            "nlp_gap",
            "rank_m_ratio",
            "rank_auroc2",
            "converged",
        ],
    );
    for p in profiles {
        t.rows.push(vec![
            Cell::Text(p.condition.clone()),
            Cell::Text(p.format.clone()),
            Cell::Text(p.domain.clone()),
            Cell::Int(p.n as i64),
            Cell::Real(p.accuracy),
            Cell::Real(p.d_prime),
            Cell::Real(p.criterion_c),
            Cell::Real(p.meta_d),
            Cell::Real(p.m_ratio),
            Cell::Real(p.auroc2),
            Cell::Real(p.nlp_gap),
            Cell::Int(p.rank_m_ratio as i64),
            Cell::Int(p.rank_auroc2 as i64),
            Cell::Text(p.converged.to_string()),
        ]);
    }
    t
}

/// Rho values and per-domain rank moves between two formats.
pub fn comparison_table(cmp: &FormatComparison) -> Table {
    let (fa, fb) = (&cmp.format_a, &cmp.format_b);
    let mut t = Table::new(
        &format!("rank_moves_{fa}_vs_{fb}"),
        &format!("Rank moves, {fa} to {fb}"),
        &[
            "Domain",
            &format!("{fa} M-ratio rank"),
            &format!("{fb} M-ratio rank"),
            &format!("{fa} AUROC2 rank"),
            &format!("{fb} AUROC2 rank"),
        ],
    );
    for m in &cmp.moves {
        t.rows.push(vec![
            Cell::Text(m.domain.clone()),
            Cell::Int(m.rank_m_ratio_a as i64),
            Cell::Int(m.rank_m_ratio_b as i64),
            Cell::Int(m.rank_auroc2_a as i64),
            Cell::Int(m.rank_auroc2_b as i64),
        ]);
    }
    t
}

pub fn comparison_summary(cmp: &FormatComparison) -> Table {
    let opt = |x: Option<f64>| x.map_or(Cell::Missing, Cell::Real);
    let mut t = Table::new(
        &format!("rho_{}_vs_{}", cmp.format_a, cmp.format_b),
        &format!("Spearman rank correlation, {} vs {}", cmp.format_a, cmp.format_b),
        &["Metric", "rho"],
    );
    t.rows.push(vec![Cell::Text("m_ratio".into()), opt(cmp.rho_m_ratio)]);
    t.rows.push(vec![Cell::Text("m_ratio (rank-difference formula)".into()), opt(cmp.rho_m_ratio_from_ranks)]);
    t.rows.push(vec![Cell::Text("auroc2".into()), opt(cmp.rho_auroc2)]);
    t
}

const PALETTE: [&str; 6] = ["#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3", "#937860"];

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Grouped bars: one group per domain, one bar per format. Output depends
/// only on the input values.
pub fn emit_bar_chart(profiles: &[DomainProfile], metric: Metric) -> Result<String> {
    if profiles.is_empty() {
        return Err(Error::EmptyInput);
    }
    let domains: BTreeSet<&str> = profiles.iter().map(|p| p.domain.as_str()).collect();
    let formats: BTreeSet<&str> = profiles.iter().map(|p| p.format.as_str()).collect();
    let value = |d: &str, f: &str| {
        profiles
            .iter()
            .find(|p| p.domain == d && p.format == f)
            .map(|p| profile_value(p, metric))
    };
    let vals: Vec<f64> = profiles.iter().map(|p| profile_value(p, metric)).filter(|v| v.is_finite()).collect();
    let top = vals.iter().copied().fold(0.0f64, f64::max);
    let bottom = vals.iter().copied().fold(0.0f64, f64::min);
    let span = if top - bottom > 0.0 { top - bottom } else { 1.0 };

    let (bar_w, gap, left, right, plot_top, plot_h) = (28.0, 24.0, 70.0, 150.0, 30.0, 240.0);
    let group_w = bar_w * formats.len() as f64;
    let width = left + right + domains.len() as f64 * (group_w + gap);
    let height = plot_top + plot_h + 60.0;
    let y = |v: f64| plot_top + plot_h * (top - v) / span;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width:.0}" height="{height:.0}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    // axes
    let _ = writeln!(
        s,
        r#"<line x1="{left}" y1="{plot_top}" x2="{left}" y2="{:.2}" stroke="black"/>"#,
        plot_top + plot_h
    );
    let _ = writeln!(
        s,
        r#"<line x1="{left}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="black"/>"#,
        y(0.0),
        width - right,
        y(0.0)
    );
    for k in 0..=4 {
        let v = bottom + span * k as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{v:.2}</text>"#,
            left - 6.0,
            y(v) + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
        plot_top + plot_h / 2.0,
        plot_top + plot_h / 2.0,
        xml_escape(metric.label())
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">Domain</text>"#,
        left + (width - left - right) / 2.0,
        height - 12.0
    );
    for (gi, d) in domains.iter().enumerate() {
        let gx = left + gap / 2.0 + gi as f64 * (group_w + gap);
        for (fi, f) in formats.iter().enumerate() {
            let Some(v) = value(d, f).filter(|v| v.is_finite()) else {
                continue;
            };
            let (y0, y1) = (y(v.max(0.0)), y(v.min(0.0)));
            let _ = writeln!(
                s,
                r#"<rect x="{:.2}" y="{y0:.2}" width="{bar_w}" height="{:.2}" fill="{}"><title>{} {}: {v:.3}</title></rect>"#,
                gx + fi as f64 * bar_w,
                y1 - y0,
                PALETTE[fi % PALETTE.len()],
                xml_escape(d),
                xml_escape(f)
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            gx + group_w / 2.0,
            plot_top + plot_h + 18.0,
            xml_escape(d)
        );
    }
    for (fi, f) in formats.iter().enumerate() {
        let ly = plot_top + 10.0 + fi as f64 * 18.0;
        let lx = width - right + 16.0;
        let _ = writeln!(
            s,
            r#"<rect x="{lx:.2}" y="{:.2}" width="12" height="12" fill="{}"/><text x="{:.2}" y="{ly:.2}">{}</text>"#,
            ly - 10.0,
            PALETTE[fi % PALETTE.len()],
            lx + 18.0,
            xml_escape(f)
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

/// Tables, charts and reproduction notes for one command run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReportBundle {
    pub tables: Vec<Table>,
    /// `(file stem, svg document)`.
    pub charts: Vec<(String, String)>,
    pub notes: Vec<String>,
}

impl ReportBundle {
    pub fn to_markdown(&self, prec: Precision) -> String {
        let mut out = String::new();
        for t in &self.tables {
            out.push_str(&t.to_markdown(prec));
            out.push('\n');
        }
        out.push_str("**Reproduction notes**\n\n");
        if self.notes.is_empty() {
            out.push_str("- none\n");
        }
        for n in &self.notes {
            let _ = writeln!(out, "- {n}");
        }
        out
    }

    /// Writes `report.md`, one CSV per table and one SVG per chart.
    pub fn write(&self, dir: &Path, prec: Precision) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut written = Vec::new();
        let mut put = |name: String, body: &str| -> Result<()> {
            let path = dir.join(name);
            std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
            written.push(path);
            Ok(())
        };
        put("report.md".into(), &self.to_markdown(prec))?;
        for t in &self.tables {
            put(format!("{}.csv", t.name), &t.to_csv(prec)?)?;
        }
        for (name, svg) in &self.charts {
            put(format!("{name}.svg"), svg)?;
        }
        Ok(written)
    }
}
