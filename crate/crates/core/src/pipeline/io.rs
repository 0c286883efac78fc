//! JSONL dataset files: one example per line.
//!
//! A line is an object with an `embedding` (rows x dims array of numbers),
//! a `label` (class probabilities), an optional `mask` (0/1 per row,
//! defaults to all ones), and an optional `provenance` string that
//! defaults to `original`. Masks of all ones are omitted on write, so a
//! save/load cycle is the identity on the data.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::relabeler::RelabelTrace;
use crate::types::{Dataset, EmbeddingSequence, Example, Provenance, SoftLabel};
use crate::Scalar;

#[derive(Debug, Serialize, Deserialize)]
struct Record {
    embedding: Vec<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mask: Option<Vec<u8>>,
    label: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    provenance: Option<String>,
}

fn record_to_example<F: Scalar>(record: Record) -> Result<Example<F>> {
    let embedding = record
        .embedding
        .into_iter()
        .map(|row| row.into_iter().map(F::of).collect())
        .collect();
    let seq = EmbeddingSequence::from_rows(embedding, record.mask)?;
    let label = SoftLabel::new(record.label.into_iter().map(F::of).collect())?;
    let provenance = match record.provenance {
        Some(text) => text.parse()?,
        None => Provenance::Original,
    };
    Ok(Example::new(seq, label, provenance))
}

fn example_to_record<F: Scalar>(example: &Example<F>) -> Record {
    let seq = &example.seq;
    let embedding = (0..seq.rows())
        .map(|i| {
            seq.row(i)
                .iter()
                .map(|v| v.to_f64().expect("data is finite"))
                .collect()
        })
        .collect();
    let mask = if seq.mask().iter().all(|&m| m == 1) {
        None
    } else {
        Some(seq.mask().to_vec())
    };
    let label = example
        .label
        .probs()
        .iter()
        .map(|v| v.to_f64().expect("label is finite"))
        .collect();
    Record {
        embedding,
        mask,
        label,
        provenance: Some(example.provenance.as_str().to_string()),
    }
}

/// Load and validate a JSONL dataset. Errors carry the 1-based line number.
pub fn load_jsonl<F: Scalar>(path: &Path) -> Result<Dataset<F>> {
    let shown_path = path.display().to_string();
    let reader = BufReader::new(File::open(path)?);
    let mut examples: Vec<Example<F>> = Vec::new();
    let mut line_of_example: Vec<usize> = Vec::new();

    for (line_index, line) in reader.lines().enumerate() {
        let line = line?;
        let line_number = line_index + 1;
        if line.trim().is_empty() {
            continue;
        }
        let record: Record = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: shown_path.clone(),
            line: line_number,
            message: e.to_string(),
        })?;
        let example = record_to_example(record).map_err(|e| Error::Validation {
            path: shown_path.clone(),
            line: line_number,
            message: e.to_string(),
        })?;
        examples.push(example);
        line_of_example.push(line_number);
    }

    Dataset::new(examples).map_err(|e| match &e {
        Error::DimensionAt { index, message } | Error::LabelAt { index, message } => {
            Error::Validation {
                path: shown_path.clone(),
                line: line_of_example[*index],
                message: message.clone(),
            }
        }
        _ => e,
    })
}

/// Write examples as JSONL, one per line, in order.
pub fn write_jsonl<F: Scalar, W: Write>(examples: &[Example<F>], mut out: W) -> Result<()> {
    for example in examples {
        serde_json::to_writer(&mut out, &example_to_record(example))
            .map_err(|e| Error::Io(e.into()))?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// [`write_jsonl`] to a file path.
pub fn save_jsonl<F: Scalar>(examples: &[Example<F>], path: &Path) -> Result<()> {
    write_jsonl(examples, BufWriter::new(File::create(path)?))
}

#[derive(Debug, Serialize)]
struct TraceRecord {
    vanilla_index: usize,
    pool: Vec<usize>,
    sims: Vec<f64>,
    kept: Vec<usize>,
    weights: Vec<f64>,
    label: Vec<f64>,
}

/// Write per-sample relabeling reports as JSONL.
pub fn write_traces<F: Scalar>(traces: &[RelabelTrace<F>], path: &Path) -> Result<()> {
    let to_f64 = |xs: &[F]| -> Vec<f64> {
        xs.iter()
            .map(|v| v.to_f64().expect("trace values are finite"))
            .collect()
    };
    let mut out = BufWriter::new(File::create(path)?);
    for trace in traces {
        let record = TraceRecord {
            vanilla_index: trace.vanilla_index,
            pool: trace.pool_indices.clone(),
            sims: to_f64(trace.report.sims()),
            kept: trace.report.kept().to_vec(),
            weights: to_f64(trace.report.weights()),
            label: to_f64(trace.label.probs()),
        };
        serde_json::to_writer(&mut out, &record).map_err(|e| Error::Io(e.into()))?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}
