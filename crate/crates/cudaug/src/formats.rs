//! CSV file formats.
//!
//! | file        | header                          |
//! |-------------|---------------------------------|
//! | profile     | `class_id,count`                |
//! | history     | `epoch,class_id,level`          |
//! | labels      | `sample,class_id`               |
//! | predictions | `prediction,label`              |
//! | weights     | none; one row of floats per class |
//! | features    | none; vector columns then the label |

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use cudaug_core::analysis::{AccuracyBreakdown, AlignmentReport, FeatureBatch, WeightMatrix};
use cudaug_core::{ClassId, ClassProfile, LoLTable, MAX_STRENGTH};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

fn create(path: &Path) -> Result<File> {
    File::create(path).map_err(|e| Error::io(path, e))
}

fn data_err(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Csv { path: path.to_path_buf(), line, message: message.into() }
}

fn read_records<T: for<'de> Deserialize<'de>, R: Read>(path: &Path, reader: R) -> Result<Vec<(u64, T)>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out = Vec::new();
    for rec in rdr.deserialize() {
        let rec: T = rec.map_err(|e| Error::csv(path, &e))?;
        out.push((out.len() as u64 + 2, rec));
    }
    Ok(out)
}

fn write_records<T: Serialize, W: Write>(path: &Path, writer: W, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    for row in rows {
        wtr.serialize(row).map_err(|e| Error::csv(path, &e))?;
    }
    wtr.flush().map_err(|e| Error::io(path, e))
}

#[derive(Debug, Serialize, Deserialize)]
struct ProfileRow {
    class_id: usize,
    count: u32,
}

pub fn write_profile<W: Write>(profile: &ClassProfile, out: W) -> Result<()> {
    let rows = profile.counts().iter().enumerate().map(|(class_id, &count)| ProfileRow { class_id, count });
    write_records(Path::new("<profile>"), out, rows)
}

pub fn save_profile(profile: &ClassProfile, path: &Path) -> Result<()> {
    write_profile(profile, create(path)?).map_err(|e| relabel(e, path))
}

pub fn read_profile<R: Read>(path: &Path, reader: R) -> Result<ClassProfile> {
    let rows: Vec<(u64, ProfileRow)> = read_records(path, reader)?;
    for (i, (line, row)) in rows.iter().enumerate() {
        if row.class_id != i {
            return Err(data_err(path, *line, format!("expected class_id {i}, found {}", row.class_id)));
        }
    }
    ClassProfile::new(rows.into_iter().map(|(_, r)| r.count).collect())
        .map_err(|e| data_err(path, 0, e.to_string()))
}

pub fn load_profile(path: &Path) -> Result<ClassProfile> {
    read_profile(path, open(path)?)
}

#[derive(Debug, Serialize, Deserialize)]
struct HistoryRow {
    epoch: u32,
    class_id: usize,
    level: u32,
}

pub fn write_history<W: Write>(table: &LoLTable, out: W) -> Result<()> {
    let rows = table.history_rows().map(|(epoch, class_id, level)| HistoryRow { epoch, class_id, level });
    write_records(Path::new("<history>"), out, rows)
}

pub fn save_history(table: &LoLTable, path: &Path) -> Result<()> {
    write_history(table, create(path)?).map_err(|e| relabel(e, path))
}

/// Read a history written by [`write_history`]: epochs `1..=E`, classes
/// `0..C`, one row each, epoch-major.
pub fn read_history<R: Read>(path: &Path, reader: R) -> Result<LoLTable> {
    let rows: Vec<(u64, HistoryRow)> = read_records(path, reader)?;
    let num_classes = rows.iter().take_while(|(_, r)| r.epoch == 1).count();
    if num_classes == 0 && !rows.is_empty() {
        return Err(data_err(path, 2, "history must start at epoch 1"));
    }
    let mut history: Vec<Vec<u32>> = Vec::new();
    for (i, (line, row)) in rows.iter().enumerate() {
        let (epoch, class_id) = (i / num_classes + 1, i % num_classes);
        if row.epoch as usize != epoch || row.class_id != class_id {
            return Err(data_err(
                path,
                *line,
                format!("expected epoch {epoch}, class {class_id}; found epoch {}, class {}", row.epoch, row.class_id),
            ));
        }
        if row.level > MAX_STRENGTH {
            return Err(data_err(path, *line, format!("level {} above {MAX_STRENGTH}", row.level)));
        }
        if class_id == 0 {
            history.push(Vec::with_capacity(num_classes));
        }
        history.last_mut().unwrap().push(row.level);
    }
    if history.last().is_some_and(|h| h.len() != num_classes) {
        return Err(data_err(path, rows.len() as u64 + 1, "last epoch is incomplete"));
    }
    Ok(LoLTable::from_history(history, MAX_STRENGTH)?)
}

pub fn load_history(path: &Path) -> Result<LoLTable> {
    read_history(path, open(path)?)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelRow {
    pub sample: String,
    pub class_id: ClassId,
}

pub fn read_labels<R: Read>(path: &Path, reader: R) -> Result<Vec<LabelRow>> {
    Ok(read_records(path, reader)?.into_iter().map(|(_, r)| r).collect())
}

pub fn load_labels(path: &Path) -> Result<Vec<LabelRow>> {
    read_labels(path, open(path)?)
}

pub fn write_labels<W: Write>(labels: &[LabelRow], out: W) -> Result<()> {
    write_records(Path::new("<labels>"), out, labels)
}

#[derive(Debug, Serialize, Deserialize)]
struct PredictionRow {
    prediction: ClassId,
    label: ClassId,
}

/// `(predictions, labels)`.
pub fn load_predictions(path: &Path) -> Result<(Vec<ClassId>, Vec<ClassId>)> {
    let rows: Vec<(u64, PredictionRow)> = read_records(path, open(path)?)?;
    Ok(rows.into_iter().map(|(_, r)| (r.prediction, r.label)).unzip())
}

fn read_float_rows(path: &Path) -> Result<Vec<(u64, Vec<f64>)>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(open(path)?);
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::csv(path, &e))?;
        let line = rec.position().map_or(0, |p| p.line());
        let values = rec
            .iter()
            .map(|f| f.parse::<f64>().map_err(|_| data_err(path, line, format!("not a number: {f:?}"))))
            .collect::<Result<Vec<_>>>()?;
        rows.push((line, values));
    }
    Ok(rows)
}

pub fn load_weights(path: &Path) -> Result<WeightMatrix> {
    let rows: Vec<Vec<f64>> = read_float_rows(path)?.into_iter().map(|(_, r)| r).collect();
    WeightMatrix::from_rows(&rows).map_err(|e| data_err(path, 0, e.to_string()))
}

/// Features: every column but the last is the vector, the last is the label.
pub fn load_features(path: &Path) -> Result<FeatureBatch> {
    let rows = read_float_rows(path)?;
    let dim = rows.first().map_or(0, |(_, r)| r.len().saturating_sub(1));
    let mut data = Vec::with_capacity(rows.len() * dim);
    let mut labels = Vec::with_capacity(rows.len());
    for (line, row) in rows {
        if row.len() != dim + 1 {
            return Err(data_err(path, line, format!("expected {} columns, found {}", dim + 1, row.len())));
        }
        let label = row[dim];
        if label < 0.0 || label.fract() != 0.0 {
            return Err(data_err(path, line, format!("label {label} is not a class id")));
        }
        data.extend_from_slice(&row[..dim]);
        labels.push(label as ClassId);
    }
    FeatureBatch::new(dim, data, labels).map_err(|e| data_err(path, 0, e.to_string()))
}

pub fn write_alignment<W: Write>(report: &AlignmentReport, out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    let path = Path::new("<alignment>");
    wtr.write_record(["class_id", "samples", "alignment"]).map_err(|e| Error::csv(path, &e))?;
    for c in &report.classes {
        wtr.write_record([c.class_id.to_string(), c.samples.to_string(), c.alignment.to_string()])
            .map_err(|e| Error::csv(path, &e))?;
    }
    wtr.flush().map_err(|e| Error::io(path, e))
}

pub fn write_gain<W: Write>(gain: &[(ClassId, f64)], out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    let path = Path::new("<gain>");
    wtr.write_record(["class_id", "gain"]).map_err(|e| Error::csv(path, &e))?;
    for (c, g) in gain {
        wtr.write_record([c.to_string(), g.to_string()]).map_err(|e| Error::csv(path, &e))?;
    }
    wtr.flush().map_err(|e| Error::io(path, e))
}

/// `metric,value` rows; absent categories get an empty value.
pub fn write_breakdown<W: Write>(b: &AccuracyBreakdown, out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    let path = Path::new("<accuracy>");
    let fmt = |v: Option<f64>| v.map_or_else(String::new, |v| v.to_string());
    wtr.write_record(["metric", "value"]).map_err(|e| Error::csv(path, &e))?;
    for (name, v) in [("all", Some(b.all)), ("many", b.many), ("med", b.med), ("few", b.few)] {
        wtr.write_record([name.to_string(), fmt(v)]).map_err(|e| Error::csv(path, &e))?;
    }
    wtr.flush().map_err(|e| Error::io(path, e))
}

fn relabel(err: Error, path: &Path) -> Error {
    match err {
        Error::Csv { line, message, .. } => Error::Csv { path: path.to_path_buf(), line, message },
        Error::Io { source, .. } => Error::Io { path: path.to_path_buf(), source },
        other => other,
    }
}
