//! SVG bar chart of an ablation report.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::model::Setting;

#[derive(Debug, Clone, PartialEq)]
pub struct AccRow {
    pub dataset: String,
    pub setting: Setting,
    pub acc: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReportSummary {
    pub rows: Vec<AccRow>,
    /// `(dataset, gain)` in file order.
    pub gains: Vec<(String, f64)>,
}

impl ReportSummary {
    pub fn datasets(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.dataset) {
                out.push(r.dataset.clone());
            }
        }
        out
    }

    fn acc(&self, dataset: &str, setting: Setting) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.dataset == dataset && r.setting == setting)
            .map(|r| r.acc)
    }
}

/// Reads the long-format ablation CSV (comment lines start with `#`).
pub fn parse_ablation_csv(text: &str) -> Result<ReportSummary> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.starts_with('#') && !l.trim().is_empty());
    let bad = |line: usize, message: String| Error::Format(format!("ablation report line {}: {message}", line + 1));
    match lines.next() {
        Some((_, h)) if h.starts_with("dataset,setting,acc") => {}
        Some((i, _)) => return Err(bad(i, "expected the `dataset,setting,acc,...` header".into())),
        None => return Err(Error::Format("ablation report is empty".into())),
    }
    let mut out = ReportSummary::default();
    for (i, line) in lines {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() < 3 {
            return Err(bad(i, format!("expected at least 3 fields, found {}", fields.len())));
        }
        let acc: f64 = fields[2]
            .parse()
            .map_err(|_| bad(i, format!("acc `{}` is not a number", fields[2])))?;
        if fields[1] == "gain" {
            out.gains.push((fields[0].to_string(), acc));
        } else {
            let setting = fields[1].parse().map_err(|e| bad(i, format!("{e}")))?;
            out.rows.push(AccRow {
                dataset: fields[0].to_string(),
                setting,
                acc,
            });
        }
    }
    if out.rows.is_empty() {
        return Err(Error::Format("ablation report has no rows".into()));
    }
    Ok(out)
}

const BAR_W: f64 = 46.0;
const GAP: f64 = 10.0;
const GROUP_GAP: f64 = 50.0;
const PLOT_H: f64 = 240.0;
const TOP: f64 = 60.0;
const LEFT: f64 = 60.0;
const COLORS: [&str; 3] = ["#440154", "#21918c", "#fde725"];

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Grouped bars of ACC per setting for each dataset; each group is
/// annotated with `Δ = ACC(fused) − ACC(acoustic_only)`.
pub fn ablation_svg(report: &ReportSummary) -> String {
    let datasets = report.datasets();
    let group_w = 3.0 * BAR_W + 2.0 * GAP;
    let width = LEFT + datasets.len() as f64 * (group_w + GROUP_GAP) + 140.0;
    let height = TOP + PLOT_H + 70.0;
    let y_of = |acc: f64| TOP + PLOT_H * (1.0 - acc.clamp(0.0, 100.0) / 100.0);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{LEFT}" y="24" font-size="15">Accuracy by input setting</text>"#);
    for tick in (0..=100).step_by(20) {
        let y = y_of(tick as f64);
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#ddd"/><text x="{:.1}" y="{:.1}" text-anchor="end">{tick}</text>"##,
            width - 140.0,
            LEFT - 6.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.1}" transform="rotate(-90 16 {:.1})" text-anchor="middle">ACC (%)</text>"#,
        TOP + PLOT_H / 2.0,
        TOP + PLOT_H / 2.0
    );
    for (g, dataset) in datasets.iter().enumerate() {
        let x0 = LEFT + 20.0 + g as f64 * (group_w + GROUP_GAP);
        let _ = writeln!(s, r#"<g class="dataset" data-dataset="{}">"#, esc(dataset));
        for (k, setting) in Setting::ALL.into_iter().enumerate() {
            let Some(acc) = report.acc(dataset, setting) else { continue };
            let x = x0 + k as f64 * (BAR_W + GAP);
            let y = y_of(acc);
            let _ = writeln!(
                s,
                r#"<rect x="{x:.1}" y="{y:.1}" width="{BAR_W}" height="{:.1}" fill="{}" data-setting="{setting}" data-acc="{acc:.2}"/>"#,
                TOP + PLOT_H - y,
                COLORS[k]
            );
            let _ = writeln!(
                s,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{acc:.2}</text>"#,
                x + BAR_W / 2.0,
                y - 4.0
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="13">{}</text>"#,
            x0 + group_w / 2.0,
            TOP + PLOT_H + 20.0,
            esc(dataset)
        );
        let gain = report.gains.iter().find(|(d, _)| d == dataset).map(|(_, v)| *v).or_else(|| {
            Some(report.acc(dataset, Setting::Fused)? - report.acc(dataset, Setting::AcousticOnly)?)
        });
        if let Some(gain) = gain {
            let _ = writeln!(
                s,
                r#"<text class="delta" x="{:.1}" y="{:.1}" text-anchor="middle" data-gain="{gain:.2}">Δ = ACC(fused) − ACC(acoustic_only) = {gain:+.2}</text>"#,
                x0 + group_w / 2.0,
                TOP + PLOT_H + 40.0
            );
        }
        let _ = writeln!(s, "</g>");
    }
    let lx = width - 130.0;
    for (k, setting) in Setting::ALL.into_iter().enumerate() {
        let y = TOP + 10.0 + 20.0 * k as f64;
        let _ = writeln!(
            s,
            r#"<rect x="{lx:.1}" y="{y:.1}" width="12" height="12" fill="{}"/><text x="{:.1}" y="{:.1}">{setting}</text>"#,
            COLORS[k],
            lx + 18.0,
            y + 10.0
        );
    }
    s.push_str("</svg>\n");
    s
}
