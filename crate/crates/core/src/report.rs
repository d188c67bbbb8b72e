//! Tables, transmission reports and a minimal SVG bar-chart writer.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::metrics::{chance_level, spearman_rho};
use crate::signal::{Finger, N_FINGERS};
use crate::sim::HandArchetype;
use crate::workflow::TransmissionSummary;

/// Contact-cue recognition accuracy (%) of a prosthesis user wearing each
/// hand, from the reference perception study.
pub fn perception_accuracy(a: HandArchetype) -> f64 {
    match a {
        HandArchetype::Ch => 58.0,
        HandArchetype::Vp => 52.0,
        HandArchetype::Il => 45.0,
        HandArchetype::Sh => 37.0,
    }
}

/// Per-hand perception accuracy next to the chance level, as CSV.
pub fn perception_table_csv() -> String {
    let cl = chance_level(N_FINGERS).expect("five classes");
    let mut s = String::from("hand,accuracy_percent,chance_level_percent\n");
    for a in HandArchetype::ALL {
        let _ = writeln!(s, "{},{:.0},{:.0}", a.code(), perception_accuracy(a), cl);
    }
    s
}

/// Validation accuracy, test accuracy and test mean precision of one hand, in
/// percent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifierRow {
    pub archetype: HandArchetype,
    pub val_accuracy: Option<f64>,
    pub test_accuracy: f64,
    pub test_mean_precision: f64,
}

fn opt_pct(v: Option<f64>) -> String {
    v.map_or("n/a".into(), |v| format!("{v:.2}"))
}

pub fn classifier_table_csv(rows: &[ClassifierRow]) -> String {
    let mut s = String::from("hand,val_accuracy_percent,test_accuracy_percent,test_mean_precision_percent\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{:.2},{:.2}",
            r.archetype.code(),
            opt_pct(r.val_accuracy),
            r.test_accuracy,
            r.test_mean_precision
        );
    }
    s
}

pub fn classifier_table_text(rows: &[ClassifierRow]) -> String {
    let mut s = format!("{:<6}{:>12}{:>12}{:>16}\n", "hand", "val acc %", "test acc %", "test mean P %");
    for r in rows {
        let _ = writeln!(
            s,
            "{:<6}{:>12}{:>12.2}{:>16.2}",
            r.archetype.code(),
            opt_pct(r.val_accuracy),
            r.test_accuracy,
            r.test_mean_precision
        );
    }
    s
}

/// Mean socket energy of each hand ranked against the perception accuracies.
#[derive(Debug, Clone, PartialEq)]
pub struct TransmissionReport {
    /// In the order CH, VP, IL, SH.
    pub summaries: Vec<TransmissionSummary>,
    /// `None` when the energies (or accuracies) are all equal.
    pub rho: Option<f64>,
}

impl TransmissionReport {
    /// Needs exactly one summary per archetype, in any order.
    pub fn new(mut summaries: Vec<TransmissionSummary>) -> Result<Self> {
        if summaries.len() != HandArchetype::ALL.len() {
            return Err(Error::InvalidArgument(format!(
                "transmission report requires four archives (one per hand), got {}",
                summaries.len()
            )));
        }
        summaries.sort_by_key(|s| s.archetype.index());
        if summaries.iter().zip(HandArchetype::ALL).any(|(s, a)| s.archetype != a) {
            return Err(Error::InvalidArgument(
                "transmission report requires four archives, one per hand; found duplicates".into(),
            ));
        }
        let energies: Vec<f64> = summaries.iter().map(|s| s.mean).collect();
        let accuracies: Vec<f64> = summaries.iter().map(|s| perception_accuracy(s.archetype)).collect();
        let rho = spearman_rho(&energies, &accuracies)?;
        Ok(Self { summaries, rho })
    }

    /// Per-hand energy matrices: one row per (hand, contacted finger).
    pub fn energy_csv(&self) -> String {
        let mut s = String::from("hand,finger,sensor_0,sensor_1,sensor_2,sensor_3,sensor_4\n");
        for sum in &self.summaries {
            for (f, row) in Finger::ALL.iter().zip(&sum.matrix) {
                let _ = write!(s, "{},{}", sum.archetype.code(), f.name());
                for v in row {
                    let _ = write!(s, ",{v:.9e}");
                }
                s.push('\n');
            }
        }
        s
    }

    pub fn summary_csv(&self) -> String {
        let mut s = String::from("hand,mean_energy,perception_accuracy_percent\n");
        for sum in &self.summaries {
            let _ = writeln!(s, "{},{:.9e},{:.0}", sum.archetype.code(), sum.mean, perception_accuracy(sum.archetype));
        }
        s
    }

    pub fn to_text(&self) -> String {
        let mut s = self.summary_csv();
        match self.rho {
            Some(r) => {
                let _ = writeln!(s, "spearman_rho={r:.6}");
            }
            None => s.push_str("spearman_rho=undefined (constant ranks)\n"),
        }
        s
    }
}

/// Grouped vertical bar chart as a standalone SVG document. `groups` holds
/// one label and one value per series.
pub fn bar_chart_svg(title: &str, y_label: &str, series: &[&str], groups: &[(String, Vec<f64>)]) -> String {
    const W: f64 = 720.0;
    const H: f64 = 360.0;
    const LEFT: f64 = 70.0;
    const RIGHT: f64 = 20.0;
    const TOP: f64 = 40.0;
    const BOTTOM: f64 = 60.0;
    const COLORS: [&str; 6] = ["#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3", "#937860"];
    let esc = |t: &str| t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;");

    let max = groups
        .iter()
        .flat_map(|(_, v)| v.iter().copied())
        .filter(|v| v.is_finite())
        .fold(0.0, f64::max);
    let top = if max > 0.0 { max * 1.1 } else { 1.0 };
    let plot_w = W - LEFT - RIGHT;
    let plot_h = H - TOP - BOTTOM;
    let y_of = |v: f64| TOP + plot_h * (1.0 - (v.max(0.0) / top));

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#, W / 2.0, esc(title));
    let _ = writeln!(
        s,
        r#"<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{}" stroke="black"/><line x1="{LEFT}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#,
        TOP + plot_h,
        TOP + plot_h,
        LEFT + plot_w,
        TOP + plot_h
    );
    for i in 0..=4 {
        let v = top * i as f64 / 4.0;
        let y = y_of(v);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{:.1}" text-anchor="end">{:.3e}</text><line x1="{LEFT}" y1="{y:.1}" x2="{}" y2="{y:.1}" stroke="lightgray"/>"#,
            LEFT - 4.0,
            y + 4.0,
            v,
            LEFT + plot_w
        );
    }
    let _ = writeln!(
        s,
        r#"<text transform="translate(16 {}) rotate(-90)" text-anchor="middle">{}</text>"#,
        TOP + plot_h / 2.0,
        esc(y_label)
    );
    let n_groups = groups.len().max(1) as f64;
    let group_w = plot_w / n_groups;
    let n_series = series.len().max(1) as f64;
    let bar_w = group_w * 0.8 / n_series;
    for (g, (label, values)) in groups.iter().enumerate() {
        let x0 = LEFT + g as f64 * group_w + group_w * 0.1;
        for (k, &v) in values.iter().enumerate() {
            let y = y_of(v);
            let _ = writeln!(
                s,
                r#"<rect x="{:.1}" y="{y:.1}" width="{:.1}" height="{:.1}" fill="{}"/>"#,
                x0 + k as f64 * bar_w,
                bar_w * 0.95,
                TOP + plot_h - y,
                COLORS[k % COLORS.len()]
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{}" text-anchor="middle">{}</text>"#,
            x0 + group_w * 0.4,
            TOP + plot_h + 18.0,
            esc(label)
        );
    }
    for (k, name) in series.iter().enumerate() {
        let x = LEFT + k as f64 * 110.0;
        let y = H - 18.0;
        let _ = writeln!(
            s,
            r#"<rect x="{x:.1}" y="{:.1}" width="10" height="10" fill="{}"/><text x="{:.1}" y="{y:.1}">{}</text>"#,
            y - 9.0,
            COLORS[k % COLORS.len()],
            x + 14.0,
            esc(name)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Energy of each sensor per contacted finger for one hand.
pub fn energy_chart_svg(summary: &TransmissionSummary) -> String {
    let groups: Vec<(String, Vec<f64>)> = Finger::ALL
        .iter()
        .zip(&summary.matrix)
        .map(|(f, row)| (f.name().to_string(), row.to_vec()))
        .collect();
    bar_chart_svg(
        &format!("{} socket energy per contacted finger", summary.archetype.long_name()),
        "energy (m/s^2)^2 x samples",
        &["sensor 0", "sensor 1", "sensor 2", "sensor 3", "sensor 4"],
        &groups,
    )
}
