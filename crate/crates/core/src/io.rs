//! File formats: system JSON in, report JSON and tidy CSV out.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcore::ComplexMatrix;
use crate::ssm::{bilinear_discretize, zoh_discretize, ContinuousSystem, DiscreteSystem, Scheme};

/// `{"A", "B", "C", "delta", "scheme"}` with matrices in the shared matrix schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemFile {
    #[serde(rename = "A")]
    pub a: ComplexMatrix,
    #[serde(rename = "B")]
    pub b: ComplexMatrix,
    #[serde(rename = "C")]
    pub c: ComplexMatrix,
    pub delta: f64,
    pub scheme: Scheme,
}

impl SystemFile {
    pub fn continuous(&self) -> Result<ContinuousSystem> {
        ContinuousSystem::new(self.a.clone(), self.b.clone(), self.c.clone())
    }

    pub fn discretize(&self) -> Result<DiscreteSystem> {
        let sys = self.continuous()?;
        match self.scheme {
            Scheme::Bilinear => bilinear_discretize(&sys, self.delta),
            Scheme::Zoh => zoh_discretize(&sys, self.delta),
        }
    }
}

pub fn parse_system(text: &str) -> Result<SystemFile> {
    let file: SystemFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    if !file.a.is_finite() || !file.b.is_finite() || !file.c.is_finite() || !file.delta.is_finite() {
        return Err(Error::NonFinite("system file".into()));
    }
    file.continuous()?;
    Ok(file)
}

pub fn read_system(path: &Path) -> Result<SystemFile> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_system(&text)
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Parse(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn fill_csv<W: std::io::Write, T: Serialize>(w: W, rows: &[T], header: &[&str]) -> Result<W> {
    let mut wtr = csv::Writer::from_writer(w);
    if rows.is_empty() {
        wtr.write_record(header).map_err(|e| Error::Io(e.to_string()))?;
    }
    for r in rows {
        wtr.serialize(r).map_err(|e| Error::Io(e.to_string()))?;
    }
    wtr.into_inner().map_err(|e| Error::Io(e.to_string()))
}

/// Serializes `rows` as CSV. `header` is written only when `rows` is empty;
/// otherwise the field names of `T` form the header.
pub fn csv_string<T: Serialize>(rows: &[T], header: &[&str]) -> Result<String> {
    let bytes = fill_csv(Vec::new(), rows, header)?;
    String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T], header: &[&str]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    fill_csv(file, rows, header).map(|_| ())
}
