use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};

/// Measured rate at one dipole moment, in lab units.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DataRow {
    pub d_debye: f64,
    pub k_cm3_s: f64,
    pub sigma: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub rows: Vec<DataRow>,
    pub provenance: String,
}

impl Dataset {
    pub fn new(rows: Vec<DataRow>, provenance: impl Into<String>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::invalid("dataset has no rows"));
        }
        for (i, row) in rows.iter().enumerate() {
            if !(row.d_debye >= 0.0 && row.d_debye.is_finite()) {
                return Err(Error::invalid(format!("row {}: d = {} must be non-negative", i + 1, row.d_debye)));
            }
            if !(row.k_cm3_s > 0.0 && row.k_cm3_s.is_finite()) {
                return Err(Error::invalid(format!("row {}: K = {} must be positive", i + 1, row.k_cm3_s)));
            }
            if let Some(sigma) = row.sigma {
                if !(sigma > 0.0 && sigma.is_finite()) {
                    return Err(Error::invalid(format!("row {}: sigma = {sigma} must be positive", i + 1)));
                }
            }
        }
        if rows.iter().any(|r| r.sigma.is_some()) && rows.iter().any(|r| r.sigma.is_none()) {
            return Err(Error::invalid("sigma must be given for every row or for none"));
        }
        Ok(Self { rows, provenance: provenance.into() })
    }

    /// CSV with header `d_debye,K_cm3_s[,sigma]`; `#` starts a comment line.
    pub fn from_reader(reader: impl Read, provenance: impl Into<String>) -> Result<Self> {
        let mut csv =
            csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).flexible(false).from_reader(reader);
        let headers = csv.headers().map_err(|e| Error::invalid(format!("dataset header: {e}")))?.clone();
        let names: Vec<&str> = headers.iter().collect();
        let with_sigma = match names.as_slice() {
            ["d_debye", "K_cm3_s"] => false,
            ["d_debye", "K_cm3_s", "sigma"] => true,
            _ => {
                return Err(Error::invalid(format!(
                    "dataset header must be d_debye,K_cm3_s[,sigma], got {}",
                    names.join(",")
                )))
            }
        };
        let mut rows = Vec::new();
        for (i, record) in csv.records().enumerate() {
            let record = record.map_err(|e| Error::invalid(format!("dataset record {}: {e}", i + 1)))?;
            let field = |j: usize| -> Result<f64> {
                record[j]
                    .parse::<f64>()
                    .map_err(|e| Error::invalid(format!("dataset record {}, column {}: {e}", i + 1, names[j])))
            };
            rows.push(DataRow {
                d_debye: field(0)?,
                k_cm3_s: field(1)?,
                sigma: if with_sigma { Some(field(2)?) } else { None },
            });
        }
        Self::new(rows, provenance)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::invalid(format!("{}: {e}", path.display())))?;
        Self::from_reader(file, path.display().to_string())
    }

    pub fn has_sigma(&self) -> bool {
        self.rows.iter().all(|r| r.sigma.is_some())
    }
}
