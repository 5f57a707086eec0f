//! Structured experiment results: named numeric columns, fitted exponents,
//! pass/fail verdicts, CSV emission and gnuplot script emission.

use crate::error::Result;
use std::fmt::Write as _;
use std::path::Path;

#[derive(Clone, Debug)]
pub struct Column {
    pub name: String,
    pub values: Vec<f64>,
}

/// A fitted power-law exponent together with the target it is judged against.
#[derive(Clone, Debug)]
pub struct FitSummary {
    pub name: String,
    /// Column names of the fitted series, for plot emission.
    pub x_column: String,
    pub y_column: String,
    pub slope: f64,
    pub intercept: f64,
    pub half_width: f64,
    pub target: Option<f64>,
    pub tolerance: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct Verdict {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    /// Human-readable statement of the threshold the value was judged against.
    pub threshold: String,
}

#[derive(Clone, Debug, Default)]
pub struct ExperimentReport {
    pub name: String,
    pub params: Vec<(String, String)>,
    pub columns: Vec<Column>,
    pub fits: Vec<FitSummary>,
    pub verdicts: Vec<Verdict>,
}

impl ExperimentReport {
    pub fn new(name: impl Into<String>) -> Self {
        ExperimentReport {
            name: name.into(),
            ..Default::default()
        }
    }

    pub fn param(&mut self, key: impl Into<String>, value: impl ToString) {
        self.params.push((key.into(), value.to_string()));
    }

    pub fn column(&mut self, name: impl Into<String>, values: Vec<f64>) {
        self.columns.push(Column {
            name: name.into(),
            values,
        });
    }

    pub fn fit(&mut self, fit: FitSummary) {
        self.fits.push(fit);
    }

    pub fn verdict(
        &mut self,
        name: impl Into<String>,
        passed: bool,
        value: f64,
        threshold: impl Into<String>,
    ) {
        self.verdicts.push(Verdict {
            name: name.into(),
            passed,
            value,
            threshold: threshold.into(),
        });
    }

    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.passed)
    }

    /// One line per verdict, prefixed PASS/FAIL, citing the threshold.
    pub fn summary_lines(&self) -> Vec<String> {
        self.verdicts
            .iter()
            .map(|v| {
                format!(
                    "{} {}::{}: value {:.6e} ({})",
                    if v.passed { "PASS" } else { "FAIL" },
                    self.name,
                    v.name,
                    v.value,
                    v.threshold
                )
            })
            .collect()
    }

    /// CSV body: header row of column names, 17-significant-digit numbers,
    /// comma separators, LF line endings; ragged columns pad with empty cells.
    pub fn csv_string(&self) -> String {
        let mut out = String::new();
        let header: Vec<&str> = self.columns.iter().map(|c| c.name.as_str()).collect();
        out.push_str(&header.join(","));
        out.push('\n');
        let rows = self.columns.iter().map(|c| c.values.len()).max().unwrap_or(0);
        for i in 0..rows {
            let mut first = true;
            for c in &self.columns {
                if !first {
                    out.push(',');
                }
                first = false;
                if let Some(v) = c.values.get(i) {
                    let _ = write!(out, "{:.16e}", v);
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.csv_string())?;
        Ok(())
    }

    /// gnuplot script plotting each fitted series with its fitted power law
    /// overlaid; the fitted exponent is recorded in a script comment.
    pub fn plot_script(&self, csv_file: &str) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# plots for experiment '{}'", self.name);
        for (k, v) in &self.params {
            let _ = writeln!(out, "# param {k} = {v}");
        }
        let _ = writeln!(out, "set datafile separator ','");
        let _ = writeln!(out, "set logscale xy");
        let _ = writeln!(out, "set key left bottom");
        let col_index = |name: &str| -> Option<usize> {
            self.columns.iter().position(|c| c.name == name).map(|i| i + 1)
        };
        for fit in &self.fits {
            let (Some(xi), Some(yi)) = (col_index(&fit.x_column), col_index(&fit.y_column))
            else {
                continue;
            };
            let _ = writeln!(
                out,
                "# fit '{}': exponent {:.6} +- {:.6}{}",
                fit.name,
                fit.slope,
                fit.half_width,
                match (fit.target, fit.tolerance) {
                    (Some(t), Some(tol)) => format!(" (target {t:.6} +- {tol:.6})"),
                    (Some(t), None) => format!(" (target {t:.6})"),
                    _ => String::new(),
                }
            );
            let _ = writeln!(
                out,
                "plot '{csv_file}' using {xi}:(abs(column({yi}))) with points title '{}', \\",
                fit.y_column
            );
            let _ = writeln!(
                out,
                "     exp({:.17e}) * x**({:.17e}) with lines title 'fit x^{:.3}'",
                fit.intercept, fit.slope, fit.slope
            );
            let _ = writeln!(out, "pause -1");
        }
        out
    }

    pub fn write_plot_script(&self, path: &Path, csv_file: &str) -> Result<()> {
        std::fs::write(path, self.plot_script(csv_file))?;
        Ok(())
    }
}

/// Parse a CSV produced by `csv_string` back into (header, columns).
/// Empty cells are skipped, restoring ragged columns.
pub fn read_csv(text: &str) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .map(|h| h.split(',').map(|s| s.to_string()).collect())
        .unwrap_or_default();
    let mut cols = vec![Vec::new(); header.len()];
    for line in lines {
        if line.is_empty() {
            continue;
        }
        for (j, cell) in line.split(',').enumerate() {
            if cell.is_empty() || j >= cols.len() {
                continue;
            }
            cols[j].push(cell.parse::<f64>().expect("numeric cell"));
        }
    }
    (header, cols)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let mut rep = ExperimentReport::new("demo");
        let xs = vec![0.1, 1.0 / 3.0, std::f64::consts::PI, 1e-300, 6.02e23];
        let ys = vec![-1.5, 2.0f64.sqrt(), f64::MAX];
        rep.column("x", xs.clone());
        rep.column("y", ys.clone());
        let text = rep.csv_string();
        let (header, cols) = read_csv(&text);
        assert_eq!(header, vec!["x", "y"]);
        assert_eq!(cols[0], xs, "x column must round-trip bit-exactly");
        assert_eq!(cols[1], ys, "y column must round-trip bit-exactly");
        assert!(text.ends_with('\n'));
        assert!(!text.contains('\r'));
    }

    #[test]
    fn empty_columns_give_header_only() {
        let mut rep = ExperimentReport::new("empty");
        rep.column("a", vec![]);
        rep.column("b", vec![]);
        assert_eq!(rep.csv_string(), "a,b\n");
    }

    #[test]
    fn plot_script_carries_fit_annotation() {
        let mut rep = ExperimentReport::new("fits");
        rep.column("eps", vec![0.1, 0.2]);
        rep.column("ratio", vec![1.0, 2.0]);
        rep.fit(FitSummary {
            name: "decay".into(),
            x_column: "eps".into(),
            y_column: "ratio".into(),
            slope: -1.25,
            intercept: 0.3,
            half_width: 0.02,
            target: Some(-1.25),
            tolerance: Some(0.1),
        });
        let script = rep.plot_script("fits.csv");
        assert!(script.contains("# fit 'decay': exponent -1.250000 +- 0.020000"));
        assert!(script.contains("fits.csv"));
    }

    #[test]
    fn verdict_lines_cite_threshold() {
        let mut rep = ExperimentReport::new("v");
        rep.verdict("slope", true, -1.2, "|slope + 1.25| <= 0.1");
        let lines = rep.summary_lines();
        assert_eq!(lines.len(), 1);
        assert!(lines[0].starts_with("PASS v::slope"));
        assert!(lines[0].contains("|slope + 1.25| <= 0.1"));
        assert!(rep.passed());
        rep.verdict("other", false, 0.0, "x");
        assert!(!rep.passed());
    }
}
