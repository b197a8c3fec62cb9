use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{CliError, Result};

/// Format a float with 17 significant digits so values round-trip exactly
/// through the CSV.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Buffered CSV writer with a fixed column count.
pub struct CsvFile {
    out: BufWriter<File>,
    columns: usize,
    path: PathBuf,
}

impl CsvFile {
    pub fn create(path: &Path, header: &[&str]) -> Result<Self> {
        let file = File::create(path)
            .map_err(|e| CliError::Io(format!("cannot create {}: {e}", path.display())))?;
        let mut out = BufWriter::new(file);
        writeln!(out, "{}", header.join(","))?;
        Ok(Self {
            out,
            columns: header.len(),
            path: path.to_owned(),
        })
    }

    pub fn row(&mut self, fields: &[String]) -> Result<()> {
        assert_eq!(
            fields.len(),
            self.columns,
            "row width mismatch in {}",
            self.path.display()
        );
        writeln!(self.out, "{}", fields.join(","))?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}

/// Create the output directory if needed and return the full path for a
/// file inside it.
pub fn out_path(dir: &Path, file: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir.join(file))
}
