use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use crate::CliError;

pub struct Table {
    w: csv::Writer<BufWriter<File>>,
}

impl Table {
    pub fn create<S: AsRef<str>>(path: &Path, header: &[S]) -> Result<Self, CliError> {
        let file = File::create(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let mut w = csv::Writer::from_writer(BufWriter::new(file));
        w.write_record(header.iter().map(|h| h.as_ref()))?;
        Ok(Self { w })
    }

    pub fn row<I, T>(&mut self, values: I) -> Result<(), CliError>
    where
        I: IntoIterator<Item = T>,
        T: std::fmt::Display,
    {
        let rec: Vec<String> = values.into_iter().map(|v| v.to_string()).collect();
        self.w.write_record(&rec)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<(), CliError> {
        self.w.flush()?;
        Ok(())
    }
}

/// `name,value` pairs.
pub fn key_values(path: &Path, rows: &[(&str, String)]) -> Result<(), CliError> {
    let mut t = Table::create(path, &["name", "value"])?;
    for (k, v) in rows {
        t.row([k.to_string(), v.clone()])?;
    }
    t.finish()
}

/// Row-major map with one CSV line per image row.
pub fn map(path: &Path, width: usize, values: &[f64]) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(BufWriter::new(file));
    for row in values.chunks(width) {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}
