use std::io::Read;
use std::path::Path;

use super::{DatasetMeta, PairDataset};
use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Reads feature pairs from CSV, one pair per row: `id, s_1..s_ds, t_1..t_dt`.
///
/// A first row whose feature fields do not all parse as numbers is treated
/// as a header and skipped.
pub fn read_csv<R: Read>(reader: R, d_s: usize, name: &str) -> Result<PairDataset> {
    if d_s == 0 {
        return Err(Error::Config("source dimension must be positive".into()));
    }
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let mut ids = Vec::new();
    let mut src = Vec::new();
    let mut tgt = Vec::new();
    let mut width: Option<usize> = None;
    for (line, record) in rdr.records().enumerate() {
        let record = record?;
        let parsed: std::result::Result<Vec<f64>, _> =
            record.iter().skip(1).map(str::parse::<f64>).collect();
        let values = match parsed {
            Ok(v) => v,
            Err(_) if line == 0 => continue,
            Err(e) => {
                return Err(Error::Invalid(format!("row {}: {e}", line + 1)));
            }
        };
        if values.len() <= d_s {
            return Err(Error::Invalid(format!(
                "row {}: {} features, need more than d_s = {d_s}",
                line + 1,
                values.len()
            )));
        }
        match width {
            None => width = Some(values.len()),
            Some(w) if w != values.len() => {
                return Err(Error::Dimension(format!(
                    "row {}: {} features, earlier rows have {w}",
                    line + 1,
                    values.len()
                )))
            }
            _ => {}
        }
        ids.push(record.get(0).unwrap_or_default().to_string());
        src.extend_from_slice(&values[..d_s]);
        tgt.extend_from_slice(&values[d_s..]);
    }
    let n = ids.len();
    let w = width.ok_or_else(|| Error::Invalid("CSV contains no data rows".into()))?;
    PairDataset::new(
        Matrix::new(n, d_s, src)?,
        Matrix::new(n, w - d_s, tgt)?,
        ids,
        DatasetMeta {
            name: name.to_string(),
            seed: None,
            provenance: format!("{{\"source\":\"csv\",\"d_s\":{d_s}}}"),
        },
    )
}

pub fn import_csv(path: impl AsRef<Path>, d_s: usize) -> Result<PairDataset> {
    let path = path.as_ref();
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    read_csv(std::fs::File::open(path)?, d_s, &name)
}
