//! Declarative bar-chart specs for released explanations, plus a plain SVG
//! rendering.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::explain::ExplanationReport;

pub const IN_CLUSTER: &str = "in-cluster";
pub const OUT_OF_CLUSTER: &str = "out-of-cluster";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bar {
    pub bin: String,
    pub series: String,
    pub proportion: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterChart {
    pub label: usize,
    pub attribute: String,
    pub bars: Vec<Bar>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartSpec {
    pub method: String,
    pub clusters: Vec<ClusterChart>,
}

/// Clamp negative noisy counts to zero and normalize to proportions. A side
/// whose clamped total is zero yields all-zero bars.
pub fn proportions(counts: &[i64]) -> Vec<f64> {
    let clamped: Vec<f64> = counts.iter().map(|c| (*c).max(0) as f64).collect();
    let total: f64 = clamped.iter().sum();
    if total <= 0.0 {
        return vec![0.0; counts.len()];
    }
    clamped.into_iter().map(|c| c / total).collect()
}

pub fn chart_spec(report: &ExplanationReport) -> ChartSpec {
    let clusters = report
        .clusters
        .iter()
        .map(|c| {
            let inside = proportions(&c.in_counts);
            let outside = proportions(&c.out_counts);
            let mut bars = Vec::with_capacity(2 * c.bins.len());
            for (i, bin) in c.bins.iter().enumerate() {
                bars.push(Bar {
                    bin: bin.clone(),
                    series: IN_CLUSTER.into(),
                    proportion: inside[i],
                });
                bars.push(Bar {
                    bin: bin.clone(),
                    series: OUT_OF_CLUSTER.into(),
                    proportion: outside[i],
                });
            }
            ClusterChart {
                label: c.label,
                attribute: c.attribute.clone(),
                bars,
            }
        })
        .collect();
    ChartSpec {
        method: report.method.to_string(),
        clusters,
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Grouped bar charts stacked vertically, one panel per cluster.
pub fn render_svg(spec: &ChartSpec) -> String {
    const PANEL_H: f64 = 180.0;
    const PLOT_H: f64 = 120.0;
    const BAR_W: f64 = 14.0;
    const GROUP_GAP: f64 = 18.0;
    const LEFT: f64 = 40.0;

    let widest = spec
        .clusters
        .iter()
        .map(|c| c.bars.len() / 2)
        .max()
        .unwrap_or(0) as f64;
    let width = LEFT + widest * (2.0 * BAR_W + GROUP_GAP) + 20.0;
    let height = PANEL_H * spec.clusters.len() as f64 + 30.0;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" font-family="sans-serif" font-size="10">"#
    );
    let _ = writeln!(
        svg,
        r##"<rect x="{LEFT}" y="4" width="10" height="10" fill="#4c78a8"/><text x="{}" y="13">{IN_CLUSTER}</text><rect x="{}" y="4" width="10" height="10" fill="#bab0ac"/><text x="{}" y="13">{OUT_OF_CLUSTER}</text>"##,
        LEFT + 14.0,
        LEFT + 90.0,
        LEFT + 104.0
    );
    for (p, cluster) in spec.clusters.iter().enumerate() {
        let top = 30.0 + p as f64 * PANEL_H;
        let base = top + 20.0 + PLOT_H;
        let _ = writeln!(
            svg,
            r#"<text x="{LEFT}" y="{:.1}">cluster {}: {}</text>"#,
            top + 12.0,
            cluster.label,
            escape(&cluster.attribute)
        );
        let _ = writeln!(
            svg,
            r#"<line x1="{LEFT}" y1="{base:.1}" x2="{:.1}" y2="{base:.1}" stroke="black"/>"#,
            width - 10.0
        );
        for (i, pair) in cluster.bars.chunks(2).enumerate() {
            let x0 = LEFT + 6.0 + i as f64 * (2.0 * BAR_W + GROUP_GAP);
            for (j, bar) in pair.iter().enumerate() {
                let h = bar.proportion * PLOT_H;
                let fill = if bar.series == IN_CLUSTER {
                    "#4c78a8"
                } else {
                    "#bab0ac"
                };
                let _ = writeln!(
                    svg,
                    r#"<rect x="{:.1}" y="{:.1}" width="{BAR_W}" height="{h:.1}" fill="{fill}"/>"#,
                    x0 + j as f64 * BAR_W,
                    base - h
                );
            }
            let _ = writeln!(
                svg,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
                x0 + BAR_W,
                base + 12.0,
                escape(&pair[0].bin)
            );
        }
    }
    svg.push_str("</svg>\n");
    svg
}
