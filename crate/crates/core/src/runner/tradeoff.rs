use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{EvalReport, RunLog};
use crate::llm::{estimate_cost, PricingTable};

/// Cost of manual threading, per transcript.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HumanBaseline {
    pub hours_per_transcript: f64,
    pub usd_per_transcript: f64,
    /// Agreement plotted for the human row; human threads are the reference.
    pub kappa: f64,
}

impl Default for HumanBaseline {
    fn default() -> Self {
        Self {
            hours_per_transcript: 1.5,
            usd_per_transcript: 25.0,
            kappa: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeoffRow {
    pub condition: String,
    pub kappa_mean: f64,
    pub n_transcripts: usize,
    pub hours_per_transcript: f64,
    pub hours_total: f64,
    pub usd_per_transcript: Option<f64>,
    pub usd_total: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeoffTable {
    pub rows: Vec<TradeoffRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Time,
    Cost,
}

pub const CSV_HEADER: [&str; 7] = [
    "condition",
    "kappa_mean",
    "n_transcripts",
    "hours_per_transcript",
    "hours_total",
    "usd_per_transcript",
    "usd_total",
];

/// One row per run in the given order, then the human row. Rows are not
/// ranked. Cost comes from `pricing` when it knows the model, else from the
/// run summary.
pub fn tradeoff_report(
    runs: &[(&RunLog, &EvalReport)],
    baseline: &HumanBaseline,
    pricing: Option<&PricingTable>,
) -> TradeoffTable {
    let mut rows = Vec::with_capacity(runs.len() + 1);
    let mut max_n = 0;
    for (log, eval) in runs {
        let n = log.summary.n_transcripts.max(1);
        max_n = max_n.max(n);
        let hours_total = log.summary.wall_time_ms as f64 / 3_600_000.0;
        let model = &log.header.spec.model.model_id;
        let usd_total = pricing
            .and_then(|p| {
                let completions: Vec<_> = log
                    .requests
                    .iter()
                    .map(|r| r.as_completion(log.header.provider))
                    .collect();
                estimate_cost(&completions, p, model).ok()
            })
            .or(log.summary.cost_usd);
        if usd_total.is_none() {
            log::warn!("no pricing for {model}; cost left blank");
        }
        rows.push(TradeoffRow {
            condition: eval.condition.clone(),
            kappa_mean: eval.aggregate.kappa.mean,
            n_transcripts: n,
            hours_per_transcript: hours_total / n as f64,
            hours_total,
            usd_per_transcript: usd_total.map(|c| c / n as f64),
            usd_total,
        });
    }
    let n = max_n.max(1);
    rows.push(TradeoffRow {
        condition: "human annotation".into(),
        kappa_mean: baseline.kappa,
        n_transcripts: n,
        hours_per_transcript: baseline.hours_per_transcript,
        hours_total: baseline.hours_per_transcript * n as f64,
        usd_per_transcript: Some(baseline.usd_per_transcript),
        usd_total: Some(baseline.usd_per_transcript * n as f64),
    });
    TradeoffTable { rows }
}

fn opt(v: Option<f64>, digits: usize) -> String {
    v.map_or_else(String::new, |x| format!("{x:.digits$}"))
}

impl TradeoffTable {
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(CSV_HEADER).expect("in-memory write");
        for r in &self.rows {
            w.write_record([
                r.condition.clone(),
                format!("{:.4}", r.kappa_mean),
                r.n_transcripts.to_string(),
                format!("{:.6}", r.hours_per_transcript),
                format!("{:.6}", r.hours_total),
                opt(r.usd_per_transcript, 6),
                opt(r.usd_total, 6),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
    }

    /// Scatter of per-transcript time or cost (log scale) against mean kappa.
    /// Rows without a cost are left out of the cost plot.
    pub fn to_svg(&self, axis: Axis) -> String {
        const W: f64 = 640.0;
        const H: f64 = 420.0;
        const PAD: f64 = 60.0;
        let points: Vec<(&TradeoffRow, f64)> = self
            .rows
            .iter()
            .filter_map(|r| {
                let x = match axis {
                    Axis::Time => Some(r.hours_per_transcript),
                    Axis::Cost => r.usd_per_transcript,
                }?;
                Some((r, x.max(1e-6)))
            })
            .collect();
        let (label, unit) = match axis {
            Axis::Time => ("Time per transcript", "hours"),
            Axis::Cost => ("Cost per transcript", "USD"),
        };
        let logs: Vec<f64> = points.iter().map(|(_, x)| x.log10()).collect();
        let lo = logs.iter().cloned().fold(f64::INFINITY, f64::min).floor();
        let hi = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max).ceil();
        let (lo, hi) = if lo.is_finite() && hi > lo {
            (lo, hi)
        } else {
            (-1.0, 1.0)
        };
        let kappa_lo = points
            .iter()
            .map(|(r, _)| r.kappa_mean)
            .fold(0.0, f64::min)
            .floor();
        let px = |lx: f64| PAD + (lx - lo) / (hi - lo) * (W - 2.0 * PAD);
        let py = |k: f64| H - PAD - (k - kappa_lo) / (1.0 - kappa_lo) * (H - 2.0 * PAD);

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<line x1="{PAD}" y1="{y}" x2="{x2}" y2="{y}" stroke="black"/>"#,
            y = H - PAD,
            x2 = W - PAD
        );
        let _ = writeln!(
            s,
            r#"<line x1="{PAD}" y1="{PAD}" x2="{PAD}" y2="{y}" stroke="black"/>"#,
            y = H - PAD
        );
        let mut e = lo;
        while e <= hi {
            let x = px(e);
            let _ = writeln!(
                s,
                r#"<text x="{x:.1}" y="{y}" text-anchor="middle">{v}</text>"#,
                y = H - PAD + 16.0,
                v = 10f64.powf(e)
            );
            e += 1.0;
        }
        for k in [kappa_lo, (kappa_lo + 1.0) / 2.0, 1.0] {
            let _ = writeln!(
                s,
                r#"<text x="{x}" y="{y:.1}" text-anchor="end">{k:.2}</text>"#,
                x = PAD - 6.0,
                y = py(k) + 4.0
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{x}" y="{y}" text-anchor="middle">{label} ({unit}, log scale)</text>"#,
            x = W / 2.0,
            y = H - 16.0
        );
        let _ = writeln!(
            s,
            r#"<text x="16" y="{y}" text-anchor="middle" transform="rotate(-90 16 {y})">Cohen's kappa (mean)</text>"#,
            y = H / 2.0
        );
        for (r, x) in &points {
            let (cx, cy) = (px(x.log10()), py(r.kappa_mean));
            let _ = writeln!(
                s,
                r#"<circle class="point" cx="{cx:.1}" cy="{cy:.1}" r="5" fill="steelblue"><title>{}</title></circle>"#,
                escape(&r.condition)
            );
            let _ = writeln!(
                s,
                r#"<text x="{:.1}" y="{:.1}">{}</text>"#,
                cx + 8.0,
                cy - 6.0,
                escape(&r.condition)
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}
