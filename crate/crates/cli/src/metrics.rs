//! Per-repetition metric rows, summaries and CSV output.

use std::path::Path;

use crate::error::Result;

/// One method on one repetition of an interval benchmark.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub repetition: usize,
    pub method: String,
    pub coverage: f64,
    pub mean_length: f64,
    pub wall_time_s: f64,
    pub fit_count: u64,
}

/// One screening method at one FDR level on one repetition.
#[derive(Debug, Clone, PartialEq)]
pub struct ScreenRow {
    pub repetition: usize,
    pub method: String,
    pub q: f64,
    pub fdp: f64,
    pub power: f64,
    pub power_undefined: bool,
    pub rejections: usize,
    pub wall_time_s: f64,
    pub fit_count: u64,
}

/// A row type that can be written and summarized.
pub trait Row {
    fn header() -> Vec<&'static str>;
    fn record(&self) -> Vec<String>;
    /// Grouping columns for the summary.
    fn group_header() -> Vec<&'static str>;
    fn group(&self) -> Vec<String>;
    fn repetition(&self) -> usize;
    /// Summarized metrics as `(name, value)`.
    fn metrics(&self) -> Vec<(&'static str, f64)>;
}

impl Row for MetricsRow {
    fn header() -> Vec<&'static str> {
        vec!["repetition", "method", "coverage", "mean_length", "wall_time_s", "fit_count"]
    }

    fn record(&self) -> Vec<String> {
        vec![
            self.repetition.to_string(),
            self.method.clone(),
            self.coverage.to_string(),
            self.mean_length.to_string(),
            self.wall_time_s.to_string(),
            self.fit_count.to_string(),
        ]
    }

    fn group_header() -> Vec<&'static str> {
        vec!["method"]
    }

    fn group(&self) -> Vec<String> {
        vec![self.method.clone()]
    }

    fn repetition(&self) -> usize {
        self.repetition
    }

    fn metrics(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("coverage", self.coverage),
            ("mean_length", self.mean_length),
            ("wall_time_s", self.wall_time_s),
            ("fit_count", self.fit_count as f64),
        ]
    }
}

impl Row for ScreenRow {
    fn header() -> Vec<&'static str> {
        vec!["repetition", "method", "q", "fdp", "power", "power_undefined", "rejections", "wall_time_s", "fit_count"]
    }

    fn record(&self) -> Vec<String> {
        vec![
            self.repetition.to_string(),
            self.method.clone(),
            self.q.to_string(),
            self.fdp.to_string(),
            self.power.to_string(),
            self.power_undefined.to_string(),
            self.rejections.to_string(),
            self.wall_time_s.to_string(),
            self.fit_count.to_string(),
        ]
    }

    fn group_header() -> Vec<&'static str> {
        vec!["method", "q"]
    }

    fn group(&self) -> Vec<String> {
        vec![self.method.clone(), self.q.to_string()]
    }

    fn repetition(&self) -> usize {
        self.repetition
    }

    fn metrics(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("fdp", self.fdp),
            ("power", self.power),
            ("wall_time_s", self.wall_time_s),
            ("fit_count", self.fit_count as f64),
        ]
    }
}

/// Mean and sample standard deviation (0 for a single value).
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub group: Vec<String>,
    pub repetitions: usize,
    /// `(metric, mean, sd)`
    pub stats: Vec<(&'static str, f64, f64)>,
}

impl SummaryRow {
    pub fn stat(&self, metric: &str) -> Option<(f64, f64)> {
        self.stats.iter().find(|s| s.0 == metric).map(|s| (s.1, s.2))
    }
}

/// Groups rows in first-appearance order.
pub fn summarize<R: Row>(rows: &[R]) -> Vec<SummaryRow> {
    let mut groups: Vec<(Vec<String>, Vec<&R>)> = Vec::new();
    for r in rows {
        let g = r.group();
        match groups.iter_mut().find(|(k, _)| *k == g) {
            Some((_, members)) => members.push(r),
            None => groups.push((g, vec![r])),
        }
    }
    groups
        .into_iter()
        .map(|(group, members)| {
            let names: Vec<&'static str> = members[0].metrics().iter().map(|m| m.0).collect();
            let stats = names
                .iter()
                .enumerate()
                .map(|(k, name)| {
                    let values: Vec<f64> = members.iter().map(|r| r.metrics()[k].1).collect();
                    let (mean, sd) = mean_sd(&values);
                    (*name, mean, sd)
                })
                .collect();
            SummaryRow { group, repetitions: members.len(), stats }
        })
        .collect()
}

pub fn write_metrics<R: Row>(rows: &[R], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(R::header())?;
    for r in rows {
        w.write_record(r.record())?;
    }
    w.flush()?;
    Ok(())
}

/// Extra columns appended to each summary row, e.g. published reference values.
pub type Annotate<'a> = &'a dyn Fn(&SummaryRow) -> Vec<(&'static str, String)>;

pub fn write_summary<R: Row>(summary: &[SummaryRow], path: &Path, annotate: Option<Annotate<'_>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let Some(first) = summary.first() else {
        w.flush()?;
        return Ok(());
    };
    let mut header: Vec<String> = R::group_header().into_iter().map(String::from).collect();
    header.push("repetitions".into());
    for (name, _, _) in &first.stats {
        header.push(format!("{name}_mean"));
        header.push(format!("{name}_sd"));
    }
    if let Some(f) = annotate {
        header.extend(f(first).into_iter().map(|(k, _)| k.to_string()));
    }
    w.write_record(&header)?;
    for s in summary {
        let mut rec = s.group.clone();
        rec.push(s.repetitions.to_string());
        for (_, mean, sd) in &s.stats {
            rec.push(mean.to_string());
            rec.push(sd.to_string());
        }
        if let Some(f) = annotate {
            rec.extend(f(s).into_iter().map(|(_, v)| v));
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Long format `repetition, group..., metric, value` for box plots.
pub fn write_plot_data<R: Row>(rows: &[R], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["repetition"];
    header.extend(R::group_header());
    header.extend(["metric", "value"]);
    w.write_record(&header)?;
    for r in rows {
        for (name, value) in r.metrics() {
            let mut rec = vec![r.repetition().to_string()];
            rec.extend(r.group());
            rec.push(name.to_string());
            rec.push(value.to_string());
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Text table of means with standard deviations in parentheses.
pub fn format_summary(summary: &[SummaryRow]) -> String {
    let mut out = String::new();
    for s in summary {
        let cells: Vec<String> = s.stats.iter().map(|(n, m, sd)| format!("{n} {m:.4} ({sd:.4})")).collect();
        out.push_str(&format!("{:<24} {}\n", s.group.join(" q="), cells.join("  ")));
    }
    out
}
