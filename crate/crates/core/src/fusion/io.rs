use std::path::Path;

use ndarray::Array2;

use super::{FusionWeights, ScoreMatrix};
use crate::error::{Error, Result};

const NORMALIZED_KEY: &str = "#normalized=";

/// Scores of one or more systems over the same classes.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreFile {
    pub class_names: Vec<String>,
    pub systems: Vec<ScoreMatrix>,
}

impl ScoreFile {
    pub fn system(&self, id: &str) -> Option<&ScoreMatrix> {
        self.systems.iter().find(|s| s.system_id == id)
    }

    /// The only system in the file, or an error naming the ones present.
    pub fn single(&self) -> Result<&ScoreMatrix> {
        match self.systems.as_slice() {
            [one] => Ok(one),
            many => Err(Error::invalid(format!(
                "expected one system in score file, found {}",
                many.iter().map(|s| s.system_id.as_str()).collect::<Vec<_>>().join(", ")
            ))),
        }
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize + 1).unwrap_or(0);
    Error::Parse {
        path: path.display().to_string(),
        line,
        message: e.to_string(),
    }
}

fn parse_float(path: &Path, line: usize, field: &str) -> Result<f64> {
    field.trim().parse::<f64>().map_err(|_| Error::Parse {
        path: path.display().to_string(),
        line,
        message: format!("invalid number {field:?}"),
    })
}

/// One row per (clip, system) under a `#normalized=` preamble line.
/// Floats are written in shortest round-trip form.
pub fn write_scores(path: impl AsRef<Path>, file: &ScoreFile) -> Result<()> {
    let path = path.as_ref();
    let normalized = file.systems.first().map(|s| s.normalized).unwrap_or(false);
    if file.systems.iter().any(|s| s.normalized != normalized) {
        return Err(Error::invalid("cannot mix normalized and raw scores in one file"));
    }
    let mut out = format!("{NORMALIZED_KEY}{normalized}\n").into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut out);
        let header = ["clip_id", "system_id"]
            .into_iter()
            .map(String::from)
            .chain(file.class_names.iter().cloned());
        w.write_record(header).map_err(|e| csv_error(path, e))?;
        for sys in &file.systems {
            if sys.n_classes() != file.class_names.len() {
                return Err(Error::DimensionMismatch {
                    expected: file.class_names.len(),
                    found: sys.n_classes(),
                });
            }
            for (clip, row) in sys.clip_ids.iter().zip(sys.values.rows()) {
                let record = [clip.clone(), sys.system_id.clone()]
                    .into_iter()
                    .chain(row.iter().map(|v| v.to_string()));
                w.write_record(record).map_err(|e| csv_error(path, e))?;
            }
        }
        w.flush().map_err(|e| Error::io(path, e))?;
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_scores(path: impl AsRef<Path>) -> Result<ScoreFile> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let (first, rest) = text.split_once('\n').unwrap_or((&text, ""));
    let normalized = match first.trim().strip_prefix(NORMALIZED_KEY) {
        Some("true") => true,
        Some("false") => false,
        _ => {
            return Err(Error::Parse {
                path: path.display().to_string(),
                line: 1,
                message: format!("expected {NORMALIZED_KEY}true|false"),
            })
        }
    };
    let mut reader = csv::Reader::from_reader(rest.as_bytes());
    let header = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    if header.len() < 3 || &header[0] != "clip_id" || &header[1] != "system_id" {
        return Err(Error::Parse {
            path: path.display().to_string(),
            line: 2,
            message: "header must be clip_id,system_id,<classes...>".into(),
        });
    }
    let class_names: Vec<String> = header.iter().skip(2).map(String::from).collect();
    let mut order: Vec<String> = Vec::new();
    let mut rows: Vec<(Vec<String>, Vec<f64>)> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 3;
        let record = record.map_err(|e| csv_error(path, e))?;
        let system = record[1].to_string();
        let slot = match order.iter().position(|s| *s == system) {
            Some(s) => s,
            None => {
                order.push(system);
                rows.push((Vec::new(), Vec::new()));
                order.len() - 1
            }
        };
        rows[slot].0.push(record[0].to_string());
        for field in record.iter().skip(2) {
            rows[slot].1.push(parse_float(path, line, field)?);
        }
    }
    let n_classes = class_names.len();
    let systems = order
        .into_iter()
        .zip(rows)
        .map(|(id, (clips, flat))| {
            let values = Array2::from_shape_vec((clips.len(), n_classes), flat)
                .map_err(|e| Error::invalid(e.to_string()))?;
            let mut m = ScoreMatrix::new(id, clips, values)?;
            m.normalized = normalized;
            Ok(m)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ScoreFile { class_names, systems })
}

/// Header `system_id,<classes...>`, one row per system.
pub fn write_weights(path: impl AsRef<Path>, weights: &FusionWeights, class_names: &[String]) -> Result<()> {
    let path = path.as_ref();
    if class_names.len() != weights.n_classes() {
        return Err(Error::DimensionMismatch {
            expected: weights.n_classes(),
            found: class_names.len(),
        });
    }
    let mut out = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut out);
        let header = std::iter::once("system_id".to_string()).chain(class_names.iter().cloned());
        w.write_record(header).map_err(|e| csv_error(path, e))?;
        for (id, row) in weights.system_ids.iter().zip(weights.values.rows()) {
            let record = std::iter::once(id.clone()).chain(row.iter().map(|v| v.to_string()));
            w.write_record(record).map_err(|e| csv_error(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Returns the weights and the class names from the header.
pub fn read_weights(path: impl AsRef<Path>) -> Result<(FusionWeights, Vec<String>)> {
    let path = path.as_ref();
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let header = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    if header.len() < 2 || &header[0] != "system_id" {
        return Err(Error::Parse {
            path: path.display().to_string(),
            line: 1,
            message: "header must be system_id,<classes...>".into(),
        });
    }
    let class_names: Vec<String> = header.iter().skip(1).map(String::from).collect();
    let mut ids = Vec::new();
    let mut flat = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_error(path, e))?;
        ids.push(record[0].to_string());
        for field in record.iter().skip(1) {
            let w = parse_float(path, i + 2, field)?;
            if !(0.0..=1.0).contains(&w) {
                return Err(Error::Parse {
                    path: path.display().to_string(),
                    line: i + 2,
                    message: format!("weight {w} outside [0, 1]"),
                });
            }
            flat.push(w);
        }
    }
    let values = Array2::from_shape_vec((ids.len(), class_names.len()), flat)
        .map_err(|e| Error::invalid(e.to_string()))?;
    Ok((FusionWeights { system_ids: ids, values }, class_names))
}
