//! JSON Lines dataset files, one scene record per line.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use tpsgtr_core::numerics::Tensor;
use tpsgtr_core::rolespace::Triplet;
use tpsgtr_core::scenegraph::{SceneRecord, MAX_TRIPLETS};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TripletJson {
    pub s: Vec<f64>,
    pub p: Vec<f64>,
    pub o: Vec<f64>,
    /// Subject, predicate and object names; empty when unknown.
    #[serde(default)]
    pub labels: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecordJson {
    pub id: String,
    pub triplets: Vec<TripletJson>,
    pub tags: Vec<f64>,
    #[serde(default)]
    pub global_feature: Option<Vec<f64>>,
    pub captions: Vec<Vec<String>>,
}

impl From<&SceneRecord> for RecordJson {
    fn from(rec: &SceneRecord) -> Self {
        RecordJson {
            id: rec.id.clone(),
            triplets: rec
                .triplets
                .iter()
                .map(|t| TripletJson {
                    s: t.subject.data().to_vec(),
                    p: t.predicate.data().to_vec(),
                    o: t.object.data().to_vec(),
                    labels: t.labels.clone().map(Vec::from).unwrap_or_default(),
                })
                .collect(),
            tags: rec.tags.data().to_vec(),
            global_feature: rec.global_feature.as_ref().map(|v| v.data().to_vec()),
            captions: rec.captions.clone(),
        }
    }
}

impl RecordJson {
    pub fn into_record(self) -> std::result::Result<SceneRecord, String> {
        let triplets = self
            .triplets
            .into_iter()
            .enumerate()
            .map(|(i, t)| {
                let mut tr = Triplet::new(t.s, t.p, t.o).map_err(|e| format!("triplet {i}: {e}"))?;
                match t.labels.as_slice() {
                    [] => {}
                    [s, p, o] => tr = tr.with_labels(s, p, o),
                    other => return Err(format!("triplet {i}: {} labels, expected 3", other.len())),
                }
                Ok(tr)
            })
            .collect::<std::result::Result<Vec<_>, String>>()?;
        let rec = SceneRecord {
            id: self.id,
            triplets,
            tags: Tensor::vector(self.tags),
            global_feature: self.global_feature.map(Tensor::vector),
            captions: self.captions,
        };
        rec.validate(MAX_TRIPLETS).map_err(|e| e.to_string())?;
        Ok(rec)
    }
}

pub fn record_to_line(rec: &SceneRecord) -> String {
    serde_json::to_string(&RecordJson::from(rec)).expect("records serialize")
}

pub fn write_dataset(path: &Path, records: &[SceneRecord]) -> Result<()> {
    let file = File::create(path).map_err(CliError::io(path))?;
    let mut out = BufWriter::new(file);
    for rec in records {
        writeln!(out, "{}", record_to_line(rec)).map_err(CliError::io(path))?;
    }
    out.flush().map_err(CliError::io(path))
}

/// Reads and validates every record; blank lines are skipped.
pub fn read_dataset(path: &Path) -> Result<Vec<SceneRecord>> {
    let file = File::open(path).map_err(CliError::io(path))?;
    let mut records = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(CliError::io(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let corrupt = |msg: String| CliError::Corrupt {
            path: path.to_path_buf(),
            msg: format!("line {}: {msg}", n + 1),
        };
        let json: RecordJson = serde_json::from_str(&line).map_err(|e| corrupt(e.to_string()))?;
        records.push(json.into_record().map_err(corrupt)?);
    }
    if records.is_empty() {
        return Err(CliError::Corrupt {
            path: path.to_path_buf(),
            msg: "no records".into(),
        });
    }
    Ok(records)
}
