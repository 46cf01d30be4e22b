//! CSV emission: `#`-prefixed metadata lines, then a header row, then data.

use anyhow::{Context, Result};
use std::io::Write;
use std::path::Path;

pub struct CsvWriter {
    out: std::io::BufWriter<std::fs::File>,
}

impl CsvWriter {
    pub fn create(path: &Path, schema: &str, meta: &[(&str, String)]) -> Result<Self> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)
                .with_context(|| format!("cannot create {}", dir.display()))?;
        }
        let file = std::fs::File::create(path)
            .with_context(|| format!("cannot create {}", path.display()))?;
        let mut out = std::io::BufWriter::new(file);
        writeln!(out, "# schema: {schema}")?;
        for (key, value) in meta {
            writeln!(out, "# {key} = {value}")?;
        }
        Ok(Self { out })
    }

    pub fn header(&mut self, columns: &str) -> Result<()> {
        writeln!(self.out, "{columns}")?;
        Ok(())
    }

    pub fn row(&mut self, fields: std::fmt::Arguments<'_>) -> Result<()> {
        writeln!(self.out, "{fields}")?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}

/// Write a gnuplot script next to the CSV it draws.
pub fn write_plot_script(path: &Path, body: &str) -> Result<()> {
    std::fs::write(path, body).with_context(|| format!("cannot write {}", path.display()))
}
