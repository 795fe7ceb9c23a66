//! Report rendering: JSON, one CSV line per run, or a text table.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::RunReport;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    CsvRow,
    Human,
}

impl FromStr for ReportFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "csv" | "csv-row" => Ok(ReportFormat::CsvRow),
            "human" => Ok(ReportFormat::Human),
            other => Err(Error::Parse(format!("unknown report format '{other}'"))),
        }
    }
}

/// Flat view of a report, one CSV column per field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub n: usize,
    pub d: usize,
    pub kernel: String,
    pub k: usize,
    pub num_trees: usize,
    pub ann_leaf_size: usize,
    pub leaf_capacity: usize,
    pub split_rule: String,
    pub skeleton_size: usize,
    pub uniform_samples: usize,
    pub k_prune: usize,
    pub seed: u64,
    pub threads: usize,
    pub t_ann: f64,
    pub t_tree: f64,
    pub t_skeletonize: f64,
    pub t_eval: f64,
    pub t_direct_sample: f64,
    pub relative_error: f64,
    pub sample_size: usize,
    pub nodes_visited: u64,
    pub nodes_pruned: u64,
    pub direct_interactions: u64,
    pub skeleton_interactions: u64,
    pub missing_skeletons: u64,
    pub skeletons: usize,
    pub speedup: f64,
}

impl From<&RunReport> for ReportRow {
    fn from(r: &RunReport) -> Self {
        let p = &r.params;
        Self {
            n: r.n,
            d: r.d,
            kernel: r.kernel.clone(),
            k: p.k,
            num_trees: p.num_trees,
            ann_leaf_size: p.ann_leaf_size,
            leaf_capacity: p.leaf_capacity,
            split_rule: p.split_rule.as_str().to_string(),
            skeleton_size: p.skeleton_size,
            uniform_samples: p.uniform_samples,
            k_prune: p.k_prune.unwrap_or(p.k),
            seed: p.seed,
            threads: p.threads.unwrap_or(0),
            t_ann: r.timings.ann,
            t_tree: r.timings.tree,
            t_skeletonize: r.timings.skeletonize,
            t_eval: r.timings.eval,
            t_direct_sample: r.timings.direct_sample,
            relative_error: r.relative_error,
            sample_size: r.sample_size,
            nodes_visited: r.stats.nodes_visited,
            nodes_pruned: r.stats.nodes_pruned,
            direct_interactions: r.stats.direct_interactions,
            skeleton_interactions: r.stats.skeleton_interactions,
            missing_skeletons: r.stats.missing_skeletons,
            skeletons: r.skeletons,
            speedup: r.speedup,
        }
    }
}

fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new())
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Parse(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))
}

/// Header line matching [`ReportFormat::CsvRow`] output.
pub fn csv_header() -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.serialize(ReportRow::from(&RunReport::default()))
        .expect("in-memory write");
    let text = finish(w).expect("utf-8");
    let end = text.find('\n').map_or(text.len(), |i| i + 1);
    text[..end].to_string()
}

/// Parses CSV text with a header line into rows.
pub fn parse_csv_rows(text: &str) -> Result<Vec<ReportRow>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

pub fn parse_json_report(text: &str) -> Result<RunReport> {
    Ok(serde_json::from_str(text)?)
}

pub fn emit_report(report: &RunReport, format: ReportFormat) -> Result<String> {
    match format {
        ReportFormat::Json => Ok(serde_json::to_string_pretty(report)? + "\n"),
        ReportFormat::CsvRow => {
            let mut w = csv_writer();
            w.serialize(ReportRow::from(report))?;
            finish(w)
        }
        ReportFormat::Human => Ok(human_table(report)),
    }
}

fn human_table(r: &RunReport) -> String {
    let p = &r.params;
    let s = &r.stats;
    let mut lines = vec![
        format!("points            {} x {}", r.n, r.d),
        format!("kernel            {}", r.kernel),
        format!(
            "neighbors         k={} trees={} leaf={} k_prune={}",
            p.k,
            p.num_trees,
            p.ann_leaf_size,
            p.k_prune.unwrap_or(p.k)
        ),
        format!(
            "tree              leaf={} split={} nodes={}",
            p.leaf_capacity,
            p.split_rule.as_str(),
            r.tree_nodes
        ),
        format!(
            "skeletons         s={} uniform={} compressed={}",
            p.skeleton_size, p.uniform_samples, r.skeletons
        ),
        String::new(),
        format!("{:<18}{:>12}", "phase", "seconds"),
    ];
    for (name, t) in [
        ("ann", r.timings.ann),
        ("tree", r.timings.tree),
        ("skeletonize", r.timings.skeletonize),
        ("eval", r.timings.eval),
        ("direct (sample)", r.timings.direct_sample),
    ] {
        lines.push(format!("{name:<18}{t:>12.4}"));
    }
    lines.push(String::new());
    lines.push(format!(
        "relative error    {:.3e} ({} targets)",
        r.relative_error, r.sample_size
    ));
    lines.push(format!(
        "interactions      direct={} skeleton={} ({:.1}% skeleton)",
        s.direct_interactions,
        s.skeleton_interactions,
        100.0 * s.skeleton_fraction()
    ));
    lines.push(format!(
        "nodes             visited={} pruned={} missing-skeleton={}",
        s.nodes_visited, s.nodes_pruned, s.missing_skeletons
    ));
    lines.push(format!(
        "speedup           {:.2}x (direct extrapolated {:.3} s)",
        r.speedup, r.direct_time_extrapolated
    ));
    lines.join("\n") + "\n"
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_report_is_valid_json_with_zeros() {
        let text = emit_report(&RunReport::default(), ReportFormat::Json).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["relative_error"], 0.0);
        assert_eq!(v["stats"]["direct_interactions"], 0);
        let back: RunReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back, RunReport::default());
    }

    #[test]
    fn csv_rows_parse_back() {
        let mut a = RunReport::default();
        a.n = 100;
        a.kernel = "gaussian-fixed".into();
        a.relative_error = 1.234e-5;
        a.timings.eval = 0.1 + 0.2;
        a.stats.skeleton_interactions = 77;
        let mut b = a.clone();
        b.params.seed = 9;
        b.speedup = 1.0 / 3.0;
        let text = csv_header()
            + &emit_report(&a, ReportFormat::CsvRow).unwrap()
            + &emit_report(&b, ReportFormat::CsvRow).unwrap();
        let rows = parse_csv_rows(&text).unwrap();
        assert_eq!(rows, vec![ReportRow::from(&a), ReportRow::from(&b)]);
    }

    #[test]
    fn human_output_mentions_error() {
        let text = emit_report(&RunReport::default(), ReportFormat::Human).unwrap();
        assert!(text.contains("relative error"));
        assert!("csv-row".parse::<ReportFormat>().is_ok());
        assert!("xml".parse::<ReportFormat>().is_err());
    }
}
