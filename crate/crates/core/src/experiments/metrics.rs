use std::io::Write;

use crate::error::{Error, Result};

pub const CSV_COLUMNS: [&str; 9] = [
    "experiment",
    "coordinate",
    "repeat",
    "grad_evals",
    "data_passes",
    "phi_hat",
    "sq_err",
    "nll",
    "error_rate",
];

/// Marker written in the `phi_hat` column of a diverged series.
pub const DIVERGED: &str = "diverged";

/// Marker written in the `repeat` column of a per-coordinate summary row.
pub const MEDIAN: &str = "median";

/// One CSV record.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub experiment: String,
    pub coordinate: String,
    /// `None` for summary rows.
    pub repeat: Option<usize>,
    pub grad_evals: u64,
    pub data_passes: f64,
    pub phi_hat: Option<f64>,
    pub sq_err: Option<f64>,
    pub nll: Option<f64>,
    pub error_rate: Option<f64>,
    /// The chain stopped on a non-finite state at `grad_evals`.
    pub diverged: bool,
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl MetricRow {
    pub fn is_summary(&self) -> bool {
        self.repeat.is_none()
    }

    fn record(&self) -> [String; 9] {
        [
            self.experiment.clone(),
            self.coordinate.clone(),
            self.repeat.map_or_else(|| MEDIAN.to_string(), |r| r.to_string()),
            self.grad_evals.to_string(),
            self.data_passes.to_string(),
            if self.diverged { DIVERGED.to_string() } else { cell(self.phi_hat) },
            cell(self.sq_err),
            cell(self.nll),
            cell(self.error_rate),
        ]
    }
}

/// Rows of one experiment in emission order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExperimentOutput {
    pub rows: Vec<MetricRow>,
}

impl ExperimentOutput {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CSV_COLUMNS)?;
        for row in &self.rows {
            w.write_record(row.record())?;
        }
        w.flush().map_err(|source| Error::Io {
            path: "<csv>".into(),
            source,
        })
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        String::from_utf8(buf).map_err(|e| Error::invalid(e.to_string()))
    }

    /// Sweep coordinates in first-appearance order.
    pub fn coordinates(&self) -> Vec<&str> {
        let mut seen: Vec<&str> = Vec::new();
        for r in &self.rows {
            if !seen.contains(&r.coordinate.as_str()) {
                seen.push(&r.coordinate);
            }
        }
        seen
    }

    /// Checkpoint rows of one `(coordinate, repeat)` series.
    pub fn series(&self, coordinate: &str, repeat: usize) -> Vec<&MetricRow> {
        self.rows
            .iter()
            .filter(|r| r.coordinate == coordinate && r.repeat == Some(repeat))
            .collect()
    }

    /// Per-checkpoint median of `metric` across repeats, paired with the
    /// checkpoint's `grad_evals`. Diverged series count as `+∞` from the point
    /// they stop.
    pub fn median_series(&self, coordinate: &str, metric: impl Fn(&MetricRow) -> Option<f64>) -> Vec<(u64, f64)> {
        let mut repeats: Vec<usize> = self
            .rows
            .iter()
            .filter(|r| r.coordinate == coordinate)
            .filter_map(|r| r.repeat)
            .collect();
        repeats.sort_unstable();
        repeats.dedup();
        let all: Vec<Vec<&MetricRow>> = repeats.iter().map(|&r| self.series(coordinate, r)).collect();
        let Some(longest) = all.iter().max_by_key(|s| s.len()) else {
            return Vec::new();
        };
        (0..longest.len())
            .map(|k| {
                let values: Vec<f64> = all
                    .iter()
                    .map(|s| match s.get(k) {
                        Some(r) if !r.diverged => metric(r).unwrap_or(f64::NAN),
                        _ => f64::INFINITY,
                    })
                    .collect();
                (longest[k].grad_evals, median(&values))
            })
            .collect()
    }

    /// Median over repeats of the last row of each series.
    pub fn median_final(&self, coordinate: &str, metric: impl Fn(&MetricRow) -> Option<f64>) -> Option<f64> {
        self.median_series(coordinate, metric).last().map(|&(_, v)| v)
    }
}

/// Median with `NaN`s sorted last; the mean of the two central values for
/// even lengths.
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let k = v.len() / 2;
    if v.len() % 2 == 1 {
        v[k]
    } else {
        0.5 * (v[k - 1] + v[k])
    }
}
