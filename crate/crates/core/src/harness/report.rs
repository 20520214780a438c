//! Comparison statistics over a (track, model) objective table.
//!
//! CSV outputs:
//!
//! * `rewards.csv`: `track,model,z`, one row per pair in table order.
//! * `pct_increase.csv`: `model,n,excluded,mean_pct,std_pct,min_pct,max_pct`,
//!   percent increase over model `B` for each other model. `n` counts tracks
//!   with a positive baseline; the rest are `excluded`. Empty statistics are
//!   written as `undefined`.
//! * `outperform.csv`: square matrix; the cell in row `r`, column `c` counts
//!   tracks where `z_c > z_r`. The diagonal holds `-`.

use std::fmt::Write as _;

pub const BASELINE: &str = "B";
pub const UNDEFINED: &str = "undefined";

/// Objective of every model on every track: `z[track][model]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ZTable {
    pub tracks: Vec<String>,
    pub models: Vec<String>,
    pub z: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PctStats {
    pub model: String,
    pub n: usize,
    pub excluded: usize,
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub min: Option<f64>,
    pub max: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub table: ZTable,
    pub pct: Vec<PctStats>,
    /// `outperform[r][c]`; `None` on the diagonal.
    pub outperform: Vec<Vec<Option<usize>>>,
    /// Free-form lines for the text report (solver status and the like).
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    TextTable,
}

/// `100 (z - z_b) / z_b`, undefined for a non-positive baseline.
pub fn percent_increase(z_model: f64, z_baseline: f64) -> Option<f64> {
    (z_baseline > 0.0).then(|| 100.0 * (z_model - z_baseline) / z_baseline)
}

/// Mean, sample standard deviation, min and max of the defined values.
pub fn summarize(model: &str, values: &[Option<f64>]) -> PctStats {
    let xs: Vec<f64> = values.iter().flatten().copied().collect();
    let n = xs.len();
    let mut st = PctStats {
        model: model.to_string(),
        n,
        excluded: values.len() - n,
        mean: None,
        std: None,
        min: None,
        max: None,
    };
    if n == 0 {
        return st;
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    st.mean = Some(mean);
    st.std = (n > 1).then(|| (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt());
    st.min = xs.iter().copied().reduce(f64::min);
    st.max = xs.iter().copied().reduce(f64::max);
    st
}

/// Row `r`, column `c`: tracks where model `c` strictly beats model `r`.
pub fn outperformance_matrix(table: &ZTable) -> Vec<Vec<Option<usize>>> {
    let m = table.models.len();
    (0..m)
        .map(|r| {
            (0..m)
                .map(|c| (r != c).then(|| table.z.iter().filter(|row| row[c] > row[r]).count()))
                .collect()
        })
        .collect()
}

impl ComparisonReport {
    pub fn new(table: ZTable, notes: Vec<String>) -> Self {
        let pct = match table.models.iter().position(|m| m == BASELINE) {
            Some(b) => table
                .models
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != b)
                .map(|(i, name)| {
                    let vals: Vec<Option<f64>> =
                        table.z.iter().map(|row| percent_increase(row[i], row[b])).collect();
                    summarize(name, &vals)
                })
                .collect(),
            None => Vec::new(),
        };
        let outperform = outperformance_matrix(&table);
        Self {
            table,
            pct,
            outperform,
            notes,
        }
    }

    pub fn z(&self, track: usize, model: &str) -> Option<f64> {
        let m = self.table.models.iter().position(|x| x == model)?;
        self.table.z.get(track).map(|row| row[m])
    }

    pub fn rewards_csv(&self) -> String {
        let mut out = String::from("track,model,z\n");
        for (t, row) in self.table.tracks.iter().zip(&self.table.z) {
            for (m, z) in self.table.models.iter().zip(row) {
                let _ = writeln!(out, "{t},{m},{z:.6}");
            }
        }
        out
    }

    pub fn pct_csv(&self) -> String {
        let mut out = String::from("model,n,excluded,mean_pct,std_pct,min_pct,max_pct\n");
        for s in &self.pct {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                s.model,
                s.n,
                s.excluded,
                opt(s.mean),
                opt(s.std),
                opt(s.min),
                opt(s.max)
            );
        }
        out
    }

    pub fn outperform_csv(&self) -> String {
        let mut out = String::from("row_model");
        for m in &self.table.models {
            let _ = write!(out, ",{m}");
        }
        out.push('\n');
        for (name, row) in self.table.models.iter().zip(&self.outperform) {
            out.push_str(name);
            for c in row {
                match c {
                    Some(n) => {
                        let _ = write!(out, ",{n}");
                    }
                    None => out.push_str(",-"),
                }
            }
            out.push('\n');
        }
        out
    }

    /// Human-readable rendering of all three tables plus notes.
    pub fn text_table(&self) -> String {
        let mut out = String::new();
        let models = &self.table.models;
        let tw = self.table.tracks.iter().map(String::len).max().unwrap_or(5).max(5);

        out.push_str("Objective z per track\n");
        let _ = write!(out, "{:<tw$}", "track");
        for m in models {
            let _ = write!(out, " {m:>12}");
        }
        out.push('\n');
        for (t, row) in self.table.tracks.iter().zip(&self.table.z) {
            let _ = write!(out, "{t:<tw$}");
            for z in row {
                let _ = write!(out, " {z:>12.3}");
            }
            out.push('\n');
        }

        out.push_str("\nPercent increase over model B\n");
        let _ = writeln!(
            out,
            "{:<6} {:>4} {:>8} {:>12} {:>12} {:>12} {:>12}",
            "model", "n", "excluded", "mean", "std", "min", "max"
        );
        for s in &self.pct {
            let _ = writeln!(
                out,
                "{:<6} {:>4} {:>8} {:>12} {:>12} {:>12} {:>12}",
                s.model,
                s.n,
                s.excluded,
                opt2(s.mean),
                opt2(s.std),
                opt2(s.min),
                opt2(s.max)
            );
        }

        out.push_str("\nTracks where the column model beats the row model\n");
        let _ = write!(out, "{:<6}", "");
        for m in models {
            let _ = write!(out, " {m:>5}");
        }
        out.push('\n');
        for (name, row) in models.iter().zip(&self.outperform) {
            let _ = write!(out, "{name:<6}");
            for c in row {
                match c {
                    Some(n) => {
                        let _ = write!(out, " {n:>5}");
                    }
                    None => {
                        let _ = write!(out, " {:>5}", "-");
                    }
                }
            }
            out.push('\n');
        }

        if !self.notes.is_empty() {
            out.push_str("\nNotes\n");
            for n in &self.notes {
                let _ = writeln!(out, "- {n}");
            }
        }
        out
    }
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| UNDEFINED.to_string(), |v| format!("{v:.6}"))
}

fn opt2(x: Option<f64>) -> String {
    x.map_or_else(|| UNDEFINED.to_string(), |v| format!("{v:.2}"))
}

/// CSV emits the long `track,model,z` table; the text table renders
/// everything.
pub fn emit_report(report: &ComparisonReport, format: ReportFormat) -> Vec<u8> {
    match format {
        ReportFormat::Csv => report.rewards_csv().into_bytes(),
        ReportFormat::TextTable => report.text_table().into_bytes(),
    }
}
