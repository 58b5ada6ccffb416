use std::fs::File;
use std::io::Write;
use std::path::Path;

use ebspline::spectral::DesignGrid;
use serde::de::DeserializeOwned;
use serde::Serialize;
use tempfile::NamedTempFile;

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

/// Observations read from a `y` or `x,y` CSV.
pub struct Dataset {
    pub x: Option<Vec<f64>>,
    pub y: Vec<f64>,
}

fn parse_value(field: &str, line: u64, column: &str) -> Result<f64, CliError> {
    let v: f64 = field.trim().parse().map_err(|_| {
        CliError::Input(format!(
            "line {line}: `{field}` in column {column} is not a number"
        ))
    })?;
    if !v.is_finite() {
        return Err(CliError::Input(format!(
            "line {line}: non-finite value in column {column}"
        )));
    }
    Ok(v)
}

pub fn read_dataset(path: &Path) -> Result<Dataset, CliError> {
    let file = File::open(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(file);
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?
        .iter()
        .map(|h| h.trim().to_ascii_lowercase())
        .collect();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (xi, yi) = match (col("x"), col("y"), headers.len()) {
        (None, Some(y), 1) => (None, y),
        (Some(x), Some(y), 2) => (Some(x), y),
        _ => {
            return Err(CliError::Input(format!(
                "{}: header must be `y` or `x,y`, found `{}`",
                path.display(),
                headers.join(",")
            )))
        }
    };
    let mut x = xi.map(|_| Vec::new());
    let mut y = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            CliError::Input(format!("line {line}: {e}"))
        })?;
        let line = record.position().map_or(0, |p| p.line());
        y.push(parse_value(&record[yi], line, "y")?);
        if let (Some(xs), Some(i)) = (x.as_mut(), xi) {
            xs.push(parse_value(&record[i], line, "x")?);
        }
    }
    if y.is_empty() {
        return Err(CliError::Input(format!("{}: no data rows", path.display())));
    }
    Ok(Dataset { x, y })
}

/// Supplied x values must coincide with the design grid.
pub fn check_design(data: &Dataset, grid: &DesignGrid) -> Result<(), CliError> {
    if let Some(xs) = &data.x {
        for (k, (a, b)) in xs.iter().zip(grid.points()).enumerate() {
            if (a - b).abs() > 1e-6 {
                return Err(CliError::Input(format!(
                    "line {}: x = {a} does not match the {} design point {b}",
                    k + 2,
                    grid.convention()
                )));
            }
        }
    }
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

/// Write via a temporary file in the target directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let io = |e: std::io::Error| CliError::Input(format!("{}: {e}", path.display()));
    let mut tmp = NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

/// JSON payload with `schema_version` and `command` leading the fields.
pub fn envelope<T: Serialize>(command: &str, payload: &T) -> Result<String, CliError> {
    let mut map = serde_json::Map::new();
    map.insert("schema_version".into(), SCHEMA_VERSION.into());
    map.insert("command".into(), command.into());
    match serde_json::to_value(payload).map_err(|e| CliError::Numeric(e.to_string()))? {
        serde_json::Value::Object(fields) => map.extend(fields),
        other => {
            map.insert("result".into(), other);
        }
    }
    let mut text =
        serde_json::to_string_pretty(&map).map_err(|e| CliError::Numeric(e.to_string()))?;
    text.push('\n');
    Ok(text)
}

/// Header plus rows of numbers.
pub fn csv_bytes(
    header: &[String],
    rows: impl Iterator<Item = Vec<f64>>,
) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| CliError::Numeric(e.to_string());
    w.write_record(header).map_err(err)?;
    for row in rows {
        w.write_record(row.iter().map(|v| v.to_string()))
            .map_err(err)?;
    }
    w.into_inner().map_err(|e| CliError::Numeric(e.to_string()))
}
