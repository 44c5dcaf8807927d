//! CSV output with a fixed float format.

use anyhow::{Context, Result};
use std::io::Write;
use std::path::{Path, PathBuf};

/// 17 significant digits, so every `f64` round-trips exactly.
pub fn fmt(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

/// A table collected in memory and written in one piece.
#[derive(Debug, Clone)]
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn write_to<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(&self.header)?;
        for r in &self.rows {
            out.write_record(r)?;
        }
        out.flush()?;
        Ok(())
    }

    /// Writes `name` inside `dir`, or to stdout when no directory is given.
    pub fn emit(&self, dir: Option<&Path>, name: &str) -> Result<Option<PathBuf>> {
        match dir {
            Some(dir) => {
                std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
                let path = dir.join(name);
                let file = std::fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
                self.write_to(std::io::BufWriter::new(file))?;
                Ok(Some(path))
            }
            None => {
                self.write_to(std::io::stdout().lock())?;
                Ok(None)
            }
        }
    }
}
