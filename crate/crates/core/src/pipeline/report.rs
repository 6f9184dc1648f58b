use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::experiment::{ExperimentReport, PLOT_HEADER};
use crate::error::{Error, Result};
use crate::ml::Algorithm;

/// One line of the plot-data CSV. Empty fields mean "not available".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotRow {
    pub algorithm: Algorithm,
    pub error_halfwidth_deg: f64,
    pub mean_accuracy: Option<f64>,
    pub ci_half_width: Option<f64>,
    pub n_runs: usize,
}

pub fn plot_rows(report: &ExperimentReport) -> Vec<PlotRow> {
    report
        .cells
        .iter()
        .map(|c| PlotRow {
            algorithm: c.algorithm,
            error_halfwidth_deg: c.error_halfwidth_deg,
            mean_accuracy: c.interval.map(|i| i.mean).or_else(|| c.mean()),
            ci_half_width: c.interval.map(|i| i.half_width),
            n_runs: c.accuracies.len(),
        })
        .collect()
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:?}")).unwrap_or_default()
}

pub fn write_plot_csv(rows: &[PlotRow], mut w: impl std::io::Write) -> std::io::Result<()> {
    writeln!(w, "{PLOT_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{:?},{},{},{}",
            r.algorithm,
            r.error_halfwidth_deg,
            opt(r.mean_accuracy),
            opt(r.ci_half_width),
            r.n_runs
        )?;
    }
    w.flush()
}

pub fn save_plot_csv(rows: &[PlotRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_plot_csv(rows, std::io::BufWriter::new(f)).map_err(|e| Error::io(path, e))
}

pub fn read_plot_csv(text: &str, location: &str) -> Result<Vec<PlotRow>> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(PLOT_HEADER) {
        return Err(Error::parse(format!("{location}:1"), format!("expected header {PLOT_HEADER}")));
    }
    let mut out = Vec::new();
    for (k, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let at = |col: usize| format!("{location}:{}:{}", k + 2, col + 1);
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 5 {
            return Err(Error::parse(format!("{location}:{}", k + 2), format!("expected 5 fields, got {}", f.len())));
        }
        let num = |col: usize| -> Result<Option<f64>> {
            let s = f[col].trim();
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse().map(Some).map_err(|e| Error::parse(at(col), e))
            }
        };
        out.push(PlotRow {
            algorithm: f[0].trim().parse().map_err(|e: Error| Error::parse(at(0), e))?,
            error_halfwidth_deg: num(1)?.ok_or_else(|| Error::parse(at(1), "missing half-width"))?,
            mean_accuracy: num(2)?,
            ci_half_width: num(3)?,
            n_runs: f[4].trim().parse().map_err(|e| Error::parse(at(4), e))?,
        });
    }
    Ok(out)
}

fn table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut width: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for r in rows {
        for (w, c) in width.iter_mut().zip(r) {
            *w = (*w).max(c.len());
        }
    }
    let mut out = String::new();
    let line = |cells: Vec<&str>, out: &mut String| {
        let padded: Vec<String> = cells
            .iter()
            .zip(&width)
            .enumerate()
            .map(|(i, (c, w))| if i == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
            .collect();
        out.push_str(padded.join("  ").trim_end());
        out.push('\n');
    };
    line(header.to_vec(), &mut out);
    line(width.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().iter().map(String::as_str).collect(), &mut out);
    for r in rows {
        line(r.iter().map(String::as_str).collect(), &mut out);
    }
    out
}

fn pct(v: Option<f64>) -> String {
    v.map(|x| format!("{:.2}", 100.0 * x)).unwrap_or_else(|| "-".into())
}

/// Human-readable summary: dataset counts, the accuracy table, leaders.
pub fn render_report(report: &ExperimentReport) -> String {
    let d = &report.dataset;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "dataset: {} cases ({} secure, {} insecure, {} skipped), {} season, {} PMUs, {} features, solar {:.1}%\n",
        d.n_cases,
        d.n_secure,
        d.n_insecure,
        d.n_skipped,
        d.season,
        d.n_pmu,
        d.n_features,
        100.0 * d.solar_penetration
    );
    let rows: Vec<Vec<String>> = report
        .cells
        .iter()
        .map(|c| {
            vec![
                c.algorithm.to_string(),
                format!("{}", c.error_halfwidth_deg),
                pct(c.interval.map(|i| i.mean).or_else(|| c.mean())),
                pct(c.interval.map(|i| i.half_width)),
                c.accuracies.len().to_string(),
                c.failures.len().to_string(),
            ]
        })
        .collect();
    out.push_str(&table(
        &["algorithm", "halfwidth_deg", "accuracy_%", "ci95_%", "runs", "failed"],
        &rows,
    ));
    if !report.leaders.is_empty() {
        out.push('\n');
        let rows: Vec<Vec<String>> = report
            .leaders
            .iter()
            .map(|l| vec![format!("{}", l.error_halfwidth_deg), l.algorithm.to_string(), pct(Some(l.mean_accuracy))])
            .collect();
        out.push_str(&table(&["halfwidth_deg", "leader", "accuracy_%"], &rows));
    }
    if !report.monotonicity.is_empty() {
        out.push('\n');
        let rows: Vec<Vec<String>> = report
            .monotonicity
            .iter()
            .map(|m| {
                vec![
                    m.algorithm.to_string(),
                    m.max_rise.map(|r| format!("{:+.2}", 100.0 * r)).unwrap_or_else(|| "-".into()),
                    if m.non_increasing_within_slack { "yes" } else { "no" }.to_string(),
                ]
            })
            .collect();
        out.push_str(&table(&["algorithm", "max_rise_pts", "non_increasing"], &rows));
    }
    out
}
