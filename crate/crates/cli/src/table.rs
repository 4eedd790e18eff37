//! Tabular experiment output with a config-echo provenance preamble.

use std::io::Write;
use std::path::Path;

use relu_recover::{Error, Result};

use crate::config::ExperimentConfig;

pub const ARTIFACT: &str = concat!("relu-recover ", env!("CARGO_PKG_VERSION"));

/// Rows plus the config needed to reproduce them. Serialized as CSV with a
/// `#`-prefixed preamble; `\n` line endings throughout.
#[derive(Debug, Clone)]
pub struct ResultTable {
    pub schema: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
    pub config: ExperimentConfig,
    /// Free-form provenance notes (divergence reports, warnings).
    pub notes: Vec<String>,
}

impl ResultTable {
    pub fn new(schema: Vec<&'static str>, config: ExperimentConfig) -> Self {
        ResultTable {
            schema,
            rows: Vec::new(),
            config,
            notes: Vec::new(),
        }
    }

    pub fn push_row(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.schema.len(), "row width mismatch");
        self.rows.push(row);
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        for line in self.config.echo_lines() {
            out.push_str("# config ");
            out.push_str(&line);
            out.push('\n');
        }
        out.push_str("# artifact = ");
        out.push_str(ARTIFACT);
        out.push('\n');
        for note in &self.notes {
            out.push_str("# note ");
            out.push_str(note);
            out.push('\n');
        }
        out.push_str(&self.schema.join(","));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        write!(f, "{}", self.to_csv_string())?;
        Ok(())
    }

    /// Reconstructs the config from the `# config` preamble of a serialized
    /// table.
    pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
        let lines: Vec<&str> = text
            .lines()
            .filter_map(|l| l.strip_prefix("# config "))
            .collect();
        if lines.is_empty() {
            return Err(Error::Parse("no `# config` preamble found".into()));
        }
        ExperimentConfig::from_echo_lines(lines.into_iter())
    }

    /// Column index by name.
    pub fn col_index(&self, name: &str) -> Option<usize> {
        self.schema.iter().position(|&c| c == name)
    }

    /// Column parsed as f64; empty cells are skipped.
    pub fn numeric_column(&self, name: &str) -> Result<Vec<f64>> {
        let idx = self
            .col_index(name)
            .ok_or_else(|| Error::Parse(format!("no column {name:?}")))?;
        self.rows
            .iter()
            .filter(|r| !r[idx].is_empty())
            .map(|r| {
                r[idx]
                    .parse()
                    .map_err(|e| Error::Parse(format!("bad number {:?}: {e}", r[idx])))
            })
            .collect()
    }
}
