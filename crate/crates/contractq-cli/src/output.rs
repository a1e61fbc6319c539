//! Deterministic CSV/JSON emission: '.' decimal, no locale, every float
//! printed with 12 significant digits so identical configs reproduce
//! byte-identical artifacts.

use crate::CliError;
use std::fmt::Write as _;
use std::path::Path;

/// Formats with 12 significant digits; plain decimal in a readable range,
/// scientific outside it.
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let mag = x.abs().log10().floor() as i32;
    if (-4..12).contains(&mag) {
        let decimals = (11 - mag).max(0) as usize;
        let s = format!("{x:.decimals$}");
        let trimmed = s.trim_end_matches('0').trim_end_matches('.');
        trimmed.to_string()
    } else {
        format!("{x:.11e}")
    }
}

/// Joins a list of floats with ';' for single-column embedding.
pub fn fmt_list(xs: &[f64]) -> String {
    xs.iter().map(|x| fmt_sig(*x)).collect::<Vec<_>>().join(";")
}

/// A CSV table with optional '#' metadata header lines.
pub struct Table {
    pub metadata: Vec<String>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table {
            metadata: Vec::new(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn meta(&mut self, line: impl Into<String>) {
        self.metadata.push(line.into());
    }

    pub fn row(&mut self, cells: Vec<String>) {
        debug_assert_eq!(cells.len(), self.header.len());
        self.rows.push(cells);
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for m in &self.metadata {
            let _ = writeln!(out, "# {m}");
        }
        let _ = writeln!(out, "{}", self.header.join(","));
        for row in &self.rows {
            let _ = writeln!(out, "{}", row.join(","));
        }
        out
    }
}

pub fn write_file(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("create {dir:?}: {e}")))?;
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| CliError::Io(format!("write {path:?}: {e}")))
}

/// Figure targets the sweeps can be distilled into.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    /// optimal rating scale against mu
    Fig1,
    /// group-vs-individual index against mu
    Fig4,
    /// assessment-weight ratio against sigma1^2
    Fig5,
}

/// Records a figure CSV can be distilled from.
pub enum FigureRecords<'a> {
    ScaleSweep(&'a [contractq::sweep::ScaleSweepRow]),
    GroupIndex(&'a [contractq::sweep::GroupIndexRow]),
    Multitask(&'a [contractq::sweep::MultitaskSweepRow]),
}

/// Two-column (x, y) CSV for the requested figure, with a config-digest
/// metadata line. Mismatched record/figure kinds are an error.
pub fn emit_figure_data(
    records: &FigureRecords,
    figure: Figure,
    digest: &str,
) -> Result<String, CliError> {
    let mut table = match (records, figure) {
        (FigureRecords::ScaleSweep(rows), Figure::Fig1) => {
            let mut t = Table::new(&["mu", "n_star"]);
            for r in rows.iter() {
                t.row(vec![fmt_sig(r.mu), r.n_star.to_string()]);
            }
            t
        }
        (FigureRecords::GroupIndex(rows), Figure::Fig4) => {
            let mut t = Table::new(&["mu", "index"]);
            for w in rows.windows(2) {
                if (w[0].index >= 1.0) != (w[1].index >= 1.0) {
                    t.meta(format!(
                        "index crosses 1 between mu = {} and mu = {}",
                        fmt_sig(w[0].mu),
                        fmt_sig(w[1].mu)
                    ));
                }
            }
            for r in rows.iter() {
                t.row(vec![fmt_sig(r.mu), fmt_sig(r.index)]);
            }
            t
        }
        (FigureRecords::Multitask(rows), Figure::Fig5) => {
            let mut t = Table::new(&["sigma1_sq", "ratio"]);
            for r in rows.iter() {
                if let Ok(sol) = &r.outcome {
                    t.row(vec![fmt_sig(r.sigma1_sq), fmt_sig(sol.ratio)]);
                }
            }
            t
        }
        (_, figure) => {
            return Err(CliError::Config(format!(
                "records do not match figure {figure:?}"
            )))
        }
    };
    table.metadata.insert(0, format!("config digest {digest}"));
    Ok(table.to_csv())
}
