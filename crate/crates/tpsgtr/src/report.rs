//! Evaluation report files.

use std::path::Path;

use serde::{Deserialize, Serialize};
use tpsgtr_core::metrics::MetricReport;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleJson {
    pub id: String,
    pub caption: String,
    pub bleu_4: f64,
    pub rouge_l: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportJson {
    pub bleu_1: f64,
    pub bleu_2: f64,
    pub bleu_3: f64,
    pub bleu_4: f64,
    pub rouge_l: f64,
    pub candidates: usize,
    pub references: usize,
    pub examples: Vec<ExampleJson>,
}

impl From<&MetricReport> for ReportJson {
    fn from(r: &MetricReport) -> Self {
        ReportJson {
            bleu_1: r.bleu[0],
            bleu_2: r.bleu[1],
            bleu_3: r.bleu[2],
            bleu_4: r.bleu[3],
            rouge_l: r.rouge_l,
            candidates: r.candidates,
            references: r.references,
            examples: r
                .examples
                .iter()
                .map(|e| ExampleJson {
                    id: e.id.clone(),
                    caption: e.candidate.join(" "),
                    bleu_4: e.bleu_4,
                    rouge_l: e.rouge_l,
                })
                .collect(),
        }
    }
}

pub fn write_report(r: &MetricReport, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(&ReportJson::from(r)).expect("reports serialize");
    text.push('\n');
    std::fs::write(path, text).map_err(CliError::io(path))
}

pub fn read_report(path: &Path) -> Result<ReportJson> {
    let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
    serde_json::from_str(&text).map_err(|e| CliError::Corrupt {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })
}
