//! Sample input and atomic file output.

use std::io::Write;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use logcave_core::SortedSample;

/// Values of a single-column CSV; a first line that is not a number is
/// taken as a header.
pub fn read_values(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    parse_values(&text).with_context(|| format!("in {}", path.display()))
}

pub fn parse_values(text: &str) -> Result<Vec<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut out = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| anyhow!("malformed CSV: {e}"))?;
        let line = rec.position().map_or(k as u64 + 1, |p| p.line());
        let fields: Vec<&str> = rec.iter().collect();
        if fields.len() != 1 {
            bail!("line {line}: expected one column, found {}", fields.len());
        }
        let field = fields[0];
        match field.parse::<f64>() {
            Ok(v) if v.is_finite() => out.push(v),
            Ok(_) => bail!("line {line}: non-finite value {field:?}"),
            Err(_) if k == 0 => {}
            Err(_) => bail!("line {line}: cannot parse {field:?} as a number"),
        }
    }
    if out.len() < 2 {
        bail!("need at least two values, found {}", out.len());
    }
    Ok(out)
}

pub fn read_sample(path: &Path) -> Result<SortedSample> {
    let xs = read_values(path)?;
    Ok(SortedSample::from_observations(&xs)?)
}

/// Writes `bytes` to `path` through a temporary file in the same directory
/// and a rename, so readers see either nothing or the whole file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).with_context(|| format!("cannot write in {}", dir.display()))?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(())
}

/// Writes to `path` atomically, or to stdout when no path is given.
pub fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => write_atomic(p, text.as_bytes()),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}
