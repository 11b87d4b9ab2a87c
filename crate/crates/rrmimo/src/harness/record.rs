//! Result rows and their CSV form.

use std::fmt;
use std::path::Path;

use serde::Serialize;

use crate::Result;

/// One Monte Carlo measurement.
///
/// Field order is the CSV column order. Records for windows that lie
/// entirely in the training phase carry `training_phase = true` and zero
/// counted bits.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BerRecord {
    pub experiment: String,
    pub sweep_var: String,
    pub sweep_value: f64,
    pub algorithm: String,
    pub mode: String,
    pub d_policy: String,
    pub runs: usize,
    pub bits: u64,
    pub errors: u64,
    pub ber: f64,
    pub mean_ses: f64,
    pub mean_rank: f64,
    pub seed: u64,
    #[serde(skip)]
    pub config_hash: String,
    #[serde(skip)]
    pub training_phase: bool,
    #[serde(skip)]
    pub lambda: f64,
}

impl fmt::Display for BerRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}={} {} {} {} lambda={}: ber={:.4e} ({}/{} bits, {} runs) ses={:.4} rank={:.2}{}",
            self.experiment,
            self.sweep_var,
            self.sweep_value,
            self.algorithm,
            self.mode,
            self.d_policy,
            self.lambda,
            self.ber,
            self.errors,
            self.bits,
            self.runs,
            self.mean_ses,
            self.mean_rank,
            if self.training_phase { " [training]" } else { "" }
        )
    }
}

/// Write records with a header row.
pub fn write_csv<W: std::io::Write>(records: &[BerRecord], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv_file(records: &[BerRecord], path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    write_csv(records, std::fs::File::create(path)?)
}
