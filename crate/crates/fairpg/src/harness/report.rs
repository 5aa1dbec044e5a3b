//! Report emission: canonical JSON, paper-style CSV tables, SVG plots.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};

use super::svg::{histogram_svg, line_chart_svg};
use super::sweep::{CellOutcome, SweepResult, TauStudyResult};

/// Output formats beyond the always-written JSON dump.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
    Svg,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            "svg" => Ok(Format::Svg),
            other => Err(Error::InvalidConfig(format!("unknown format {other:?}"))),
        }
    }
}

/// Table cell text: percentages with the spread in parentheses.
pub fn table_cell(mean_percent: f64, std_percent: f64) -> String {
    format!("{mean_percent:.2} (±{std_percent:.2})")
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text)?;
    Ok(())
}

/// Row label for a (policy, trainer) pair.
fn method_label(policy: &str, trainer: &str) -> String {
    format!("{policy}/{trainer}")
}

fn metric_table(
    result: &SweepResult,
    pick: impl Fn(&super::sweep::AggregateCell) -> (f64, f64),
) -> String {
    let mut out = String::new();
    out.push_str("method");
    for ratio in &result.config.ratios {
        out.push_str(&format!(",{:.0}%", ratio * 100.0));
    }
    out.push('\n');
    for policy in &result.config.policies {
        let policy_key = policy.key();
        for grid in &result.config.trainers {
            let family = grid.family();
            out.push_str(&method_label(&policy_key, family));
            for &ratio in &result.config.ratios {
                let cell = result
                    .aggregates
                    .iter()
                    .find(|a| a.ratio == ratio && a.policy == policy_key && a.trainer == family);
                match cell {
                    Some(agg) => {
                        let (mean, std) = pick(agg);
                        out.push_str(&format!(",{}", table_cell(mean * 100.0, std * 100.0)));
                    }
                    None => out.push_str(",-"),
                }
            }
            out.push('\n');
        }
    }
    out
}

fn sweep_line_series(
    result: &SweepResult,
    family: &str,
    pick: impl Fn(&super::sweep::AggregateCell) -> f64,
) -> Vec<(String, Vec<(f64, f64)>)> {
    result
        .config
        .policies
        .iter()
        .map(|policy| {
            let key = policy.key();
            let mut points: Vec<(f64, f64)> = result
                .aggregates
                .iter()
                .filter(|a| a.policy == key && a.trainer == family)
                .map(|a| (a.ratio, pick(a) * 100.0))
                .collect();
            points.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            (key, points)
        })
        .collect()
}

/// Writes the sweep outputs into `dir` and returns the created paths.
///
/// `sweep.json` is always written; `Csv` adds one table per metric in the
/// appendix-table layout (methods by ratios, cells `mean (±std)` in
/// percent); `Svg` adds accuracy and max-disparity line plots per trainer
/// family plus the pooled confidence histogram.
pub fn emit_report(result: &SweepResult, formats: &[Format], dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();

    let json_path = dir.join("sweep.json");
    write_text(&json_path, &serde_json::to_string_pretty(result)?)?;
    written.push(json_path);

    if formats.contains(&Format::Csv) {
        for (name, pick) in [
            (
                "accuracy.csv",
                Box::new(|a: &super::sweep::AggregateCell| (a.accuracy_mean, a.accuracy_std))
                    as Box<dyn Fn(&super::sweep::AggregateCell) -> (f64, f64)>,
            ),
            (
                "delta_m.csv",
                Box::new(|a: &super::sweep::AggregateCell| (a.delta_m_mean, a.delta_m_std)),
            ),
            (
                "delta_a.csv",
                Box::new(|a: &super::sweep::AggregateCell| (a.delta_a_mean, a.delta_a_std)),
            ),
        ] {
            let path = dir.join(name);
            write_text(&path, &metric_table(result, pick))?;
            written.push(path);
        }
    }

    if formats.contains(&Format::Svg) {
        for grid in &result.config.trainers {
            let family = grid.family();
            let acc = line_chart_svg(
                &format!("accuracy vs group-label ratio ({family})"),
                "group-label ratio",
                "accuracy (%)",
                &sweep_line_series(result, family, |a| a.accuracy_mean),
            );
            let path = dir.join(format!("accuracy_{family}.svg"));
            write_text(&path, &acc)?;
            written.push(path);

            let dm = line_chart_svg(
                &format!("max disparity vs group-label ratio ({family})"),
                "group-label ratio",
                "delta_m (%)",
                &sweep_line_series(result, family, |a| a.delta_m_mean),
            );
            let path = dir.join(format!("delta_m_{family}.svg"));
            write_text(&path, &dm)?;
            written.push(path);
        }

        // Pool the per-cell confidence histograms.
        let mut pooled = vec![0u64; 20];
        for cell in &result.cells {
            if let CellOutcome::Ok {
                confidence_histogram,
                ..
            } = &cell.outcome
            {
                for (slot, &count) in pooled.iter_mut().zip(confidence_histogram) {
                    *slot += count;
                }
            }
        }
        let hist = histogram_svg("group-classifier confidences", &pooled, 0.05);
        let path = dir.join("confidence_histogram.svg");
        write_text(&path, &hist)?;
        written.push(path);
    }

    Ok(written)
}

/// Reads back a `sweep.json` dump.
pub fn load_sweep(path: &Path) -> Result<SweepResult> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

/// Writes the threshold-study outputs into `dir`.
pub fn emit_tau_study(
    study: &TauStudyResult,
    formats: &[Format],
    dir: &Path,
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();

    let json_path = dir.join("tau_study.json");
    write_text(&json_path, &serde_json::to_string_pretty(study)?)?;
    written.push(json_path);

    if formats.contains(&Format::Csv) {
        let mut out = String::from("label,tau,n,accuracy,delta_m,delta_a\n");
        for entry in &study.entries {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                entry.label,
                entry.tau.map_or("-".into(), |t| t.to_string()),
                entry.n,
                table_cell(entry.accuracy_mean * 100.0, entry.accuracy_std * 100.0),
                table_cell(entry.delta_m_mean * 100.0, entry.delta_m_std * 100.0),
                table_cell(entry.delta_a_mean * 100.0, entry.delta_a_std * 100.0),
            ));
        }
        let path = dir.join("tau_study.csv");
        write_text(&path, &out)?;
        written.push(path);
    }

    if formats.contains(&Format::Svg) {
        let tau_points = |pick: &dyn Fn(&super::sweep::TauCell) -> f64| {
            let mut pts: Vec<(f64, f64)> = study
                .entries
                .iter()
                .filter_map(|e| e.tau.map(|t| (t, pick(e) * 100.0)))
                .collect();
            pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            pts
        };
        let chart = line_chart_svg(
            "threshold study",
            "threshold",
            "percent",
            &[
                ("accuracy".into(), tau_points(&|e| e.accuracy_mean)),
                ("delta_m".into(), tau_points(&|e| e.delta_m_mean)),
            ],
        );
        let path = dir.join("tau_study.svg");
        write_text(&path, &chart)?;
        written.push(path);
    }

    Ok(written)
}
