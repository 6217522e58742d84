use std::collections::BTreeMap;
use std::fmt::Write;

use super::coverage::CoverageReport;
use super::report::{mean, CVReport};
use crate::corpus::Criterion;

/// `0.82 ( 6)`: mean to two decimals, standard deviation in hundredths.
pub fn format_mean_std(mean: f64, std: f64) -> String {
    format!("{mean:.2} ({:>2})", (std * 100.0).round() as i64)
}

fn render(rows: &[Vec<String>], right_from: usize) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| rows.iter().filter_map(|r| r.get(c)).map(|s| s.chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for (i, row) in rows.iter().enumerate() {
        let cells: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(c, s)| {
                if c >= right_from {
                    format!("{s:>w$}", w = widths[c])
                } else {
                    format!("{s:<w$}", w = widths[c])
                }
            })
            .collect();
        writeln!(out, "{}", cells.join("  ").trim_end()).unwrap();
        if i == 0 {
            let rule = widths.iter().sum::<usize>() + 2 * widths.len().saturating_sub(1);
            writeln!(out, "{}", "-".repeat(rule)).unwrap();
        }
    }
    out
}

/// Mean F1-macro (std) per model and criterion, plus the per-model average.
pub fn f1_table(reports: &[CVReport]) -> String {
    let mut models: Vec<&str> = Vec::new();
    let mut cells: BTreeMap<(&str, Criterion), &CVReport> = BTreeMap::new();
    for r in reports {
        if !models.contains(&r.model.as_str()) {
            models.push(&r.model);
        }
        cells.insert((&r.model, r.criterion), r);
    }
    let criteria: Vec<Criterion> = Criterion::ALL
        .into_iter()
        .filter(|c| reports.iter().any(|r| r.criterion == *c))
        .collect();
    let mut header = vec!["Model Architecture".to_string()];
    header.extend(criteria.iter().map(|c| c.title().to_string()));
    header.push("All Questions Avg".into());
    let mut rows = vec![header];
    for m in models {
        let mut row = vec![m.to_string()];
        let mut means = Vec::new();
        for c in &criteria {
            match cells.get(&(m, *c)) {
                Some(r) => {
                    means.push(r.mean.f1_macro);
                    row.push(format_mean_std(r.mean.f1_macro, r.std.f1_macro));
                }
                None => row.push("-".into()),
            }
        }
        row.push(if means.is_empty() { "-".into() } else { format!("{:.2}", mean(&means)) });
        rows.push(row);
    }
    render(&rows, 1)
}

fn percent(x: f64) -> String {
    format!("{:.0}%", x * 100.0)
}

/// Coverage blocks in level order, one row per criterion.
pub fn coverage_table(reports: &[(Criterion, CoverageReport)]) -> String {
    let mut rows = vec![["Question", "Coverage", "Threshold", "Precision", "Recall", "Accuracy"]
        .map(String::from)
        .to_vec()];
    let levels = reports.first().map(|(_, r)| r.rows.len()).unwrap_or(0);
    for level in 0..levels {
        for (c, report) in reports {
            let Some(row) = report.rows.get(level) else { continue };
            let mut line = vec![c.title().to_string(), percent(row.coverage), format!("{:.2}", row.threshold)];
            match row.metrics {
                Some(m) => line.extend([format!("{:.2}", m.precision), format!("{:.2}", m.recall), percent(m.accuracy)]),
                None => line.extend(["-", "-", "-"].map(String::from)),
            }
            rows.push(line);
        }
    }
    render(&rows, 1)
}

/// Human agreement next to model accuracy at two coverage levels.
#[derive(Clone, Debug, PartialEq)]
pub struct AgreementRow {
    pub criterion: Criterion,
    pub raters: f64,
    pub partial: Option<f64>,
    pub full: Option<f64>,
}

pub fn agreement_table(rows: &[AgreementRow], partial_label: &str) -> String {
    let cell = |x: Option<f64>| x.map_or("-".to_string(), percent);
    let mut out = vec![vec![
        "Question".to_string(),
        "Raters".to_string(),
        format!("Model {partial_label}"),
        "Model 100%".to_string(),
    ]];
    for r in rows {
        out.push(vec![r.criterion.title().to_string(), percent(r.raters), cell(r.partial), cell(r.full)]);
    }
    if !rows.is_empty() {
        let avg = |f: fn(&AgreementRow) -> Option<f64>| {
            let xs: Vec<f64> = rows.iter().filter_map(f).collect();
            (!xs.is_empty()).then(|| mean(&xs))
        };
        out.push(vec![
            "average".into(),
            cell(avg(|r| Some(r.raters))),
            cell(avg(|r| r.partial)),
            cell(avg(|r| r.full)),
        ]);
    }
    render(&out, 1)
}
