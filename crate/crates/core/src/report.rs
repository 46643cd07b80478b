//! Machine-readable run report and its plain-text rendering.
//!
//! All maps are `BTreeMap`s so the JSON output has a fixed key order and two
//! runs with the same inputs serialize byte-for-byte identically.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::abc::{StopReason, TraceRow};
use crate::eab::{EabParams, PARAM_NAMES};
use crate::hysteresis::HysteresisComparison;
use crate::platoon::SweepPoint;
use crate::{Error, Result};

pub const REPORT_FILE: &str = "report.json";
pub const SUMMARY_FILE: &str = "summary.txt";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NewellSummary {
    pub tau: f64,
    pub delta: f64,
    pub w: f64,
    pub objective: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComponentSummary {
    pub median: f64,
    pub ci90: (f64, f64),
    pub iqr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AsmcSummary {
    pub seed: u64,
    pub iterations: usize,
    pub stop: StopReason,
    pub final_gamma: f64,
    pub final_rho: f64,
    pub trace: Vec<TraceRow>,
    pub best_theta: EabParams,
    pub best_gof: f64,
    /// Keyed by parameter name.
    pub posterior: BTreeMap<String, ComponentSummary>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WsSummary {
    /// `[position, deviation, critical-point]` mean minimum errors.
    pub ws: [f64; 3],
    pub ws_literal: [f64; 3],
    pub matched: usize,
    pub excluded: Vec<String>,
}

/// Per-pair classification results.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairReport {
    pub pair_id: String,
    pub split: String,
    /// Pattern of the measured deviation series.
    pub observed_pattern: Option<String>,
    /// Pattern of the best-fitting particle on this pair.
    pub fitted_pattern: Option<String>,
    pub best_particle: Option<usize>,
    pub observed_hysteresis: Option<String>,
    pub simulated_hysteresis: Option<String>,
    /// Why a classification is missing, if one is.
    pub notes: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupReport {
    pub n_pairs: usize,
    pub train: Vec<String>,
    pub test: Vec<String>,
    pub newell: NewellSummary,
    pub asmc: AsmcSummary,
    pub ws: Option<WsSummary>,
    pub pairs: Vec<PairReport>,
    /// Proportion of pairs per fitted pattern label.
    pub pattern_table: BTreeMap<String, f64>,
    /// Proportion of pairs per observed hysteresis pattern.
    pub hysteresis_table: BTreeMap<String, f64>,
    pub hysteresis_comparison: Option<HysteresisComparison>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PenetrationReport {
    pub hdv_group: String,
    pub acc_group: String,
    pub seed: u64,
    pub points: Vec<SweepPoint>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub seed: u64,
    pub groups: BTreeMap<String, GroupReport>,
    /// Pairwise Jensen–Shannon distances between group posteriors.
    pub jsd: BTreeMap<String, BTreeMap<String, f64>>,
    pub penetration: Option<PenetrationReport>,
}

/// Share of each label in `labels`, skipping missing ones.
pub fn proportions<'a>(labels: impl IntoIterator<Item = Option<&'a str>>) -> BTreeMap<String, f64> {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    let mut total = 0usize;
    for l in labels.into_iter().flatten() {
        *counts.entry(l.to_string()).or_default() += 1;
        total += 1;
    }
    counts.into_iter().map(|(k, c)| (k, c as f64 / total as f64)).collect()
}

pub fn write_report(path: &Path, report: &Report) -> Result<()> {
    let text = serde_json::to_string_pretty(report)?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub fn read_report(path: &Path) -> Result<Report> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

fn table(out: &mut String, t: &BTreeMap<String, f64>) {
    if t.is_empty() {
        out.push_str("    (none)\n");
    }
    for (k, v) in t {
        let _ = writeln!(out, "    {k:<24} {:>5.1}%", 100.0 * v);
    }
}

/// Human-readable summary of a report.
pub fn render_summary(report: &Report) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "seed {}", report.seed);
    for (name, g) in &report.groups {
        let _ = writeln!(
            out,
            "\n== {name} ({} pairs: {} train, {} test)",
            g.n_pairs,
            g.train.len(),
            g.test.len()
        );
        let n = &g.newell;
        let _ = writeln!(
            out,
            "  newell: tau {:.2} s, delta {:.2} m, w {:.2} m/s, objective {:.4}",
            n.tau, n.delta, n.w, n.objective
        );
        let a = &g.asmc;
        let _ = writeln!(
            out,
            "  asmc: {} iterations, stop {:?}, gamma {:.5}, rho {:.4}, best gof {:.5}",
            a.iterations, a.stop, a.final_gamma, a.final_rho, a.best_gof
        );
        for name in PARAM_NAMES {
            if let Some(c) = a.posterior.get(name) {
                let _ = writeln!(
                    out,
                    "    {name:<4} median {:>8.4}  90% [{:>8.4}, {:>8.4}]  iqr {:.4}",
                    c.median, c.ci90.0, c.ci90.1, c.iqr
                );
            }
        }
        match &g.ws {
            Some(ws) => {
                let _ = writeln!(
                    out,
                    "  ws: x {:.4} m, eta {:.4}, crit {:.4} ({} matched, {} excluded)",
                    ws.ws[0],
                    ws.ws[1],
                    ws.ws[2],
                    ws.matched,
                    ws.excluded.len()
                );
            }
            None => out.push_str("  ws: n/a\n"),
        }
        out.push_str("  patterns:\n");
        table(&mut out, &g.pattern_table);
        out.push_str("  hysteresis:\n");
        table(&mut out, &g.hysteresis_table);
        if let Some(c) = &g.hysteresis_comparison {
            let _ = writeln!(
                out,
                "  loop fit: center {:.5}, sd {:.5}, cross nrmse {:.4}",
                c.d_center, c.d_sd, c.nrmse_cross
            );
        }
    }
    if !report.jsd.is_empty() {
        out.push_str("\njsd:\n");
        for (a, row) in &report.jsd {
            for (b, d) in row {
                let _ = writeln!(out, "  {a} | {b}: {d:.4}");
            }
        }
    }
    if let Some(p) = &report.penetration {
        let _ = writeln!(out, "\npenetration (HDV {}, ACC {}):", p.hdv_group, p.acc_group);
        for pt in &p.points {
            let _ = writeln!(
                out,
                "  {:>4.0}%  magnitude {:>10.1} +- {:>8.1}  center ({:.4}, {:.4})  runs {}/{}",
                100.0 * pt.penetration,
                pt.magnitude,
                pt.magnitude_se,
                pt.center_k,
                pt.center_q,
                pt.completed,
                pt.completed + pt.failed
            );
        }
    }
    out
}
