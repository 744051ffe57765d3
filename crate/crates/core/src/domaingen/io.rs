//! Line-delimited dataset files.
//!
//! Line 1 is `#crossdistill-dataset/v1` followed by a tab and a JSON header
//! holding the domain, row count, generator fingerprint, schema and optional
//! teacher-label provenance. Every following line is one example with
//! tab-separated fields in this order:
//!
//! | # | field            | encoding                                         |
//! |---|------------------|--------------------------------------------------|
//! | 1 | row_id           | unsigned integer                                 |
//! | 2 | domain           | `source` or `target`                             |
//! | 3 | is_new_item      | `0` / `1`                                        |
//! | 4 | mask             | bitstring of length F, `1` = observed            |
//! | 5 | features         | F comma-separated reals, `NA` where unobserved   |
//! | 6 | click            | `0` / `1`                                        |
//! | 7 | trail            | real, or `NA` when click = 0                     |
//! | 8 | discovery        | `0` / `1`                                        |
//! | 9 | continue_watch   | `0` / `1`                                        |
//! | 10| radio_engagement | `0` / `1`                                        |
//! | 11+ | teacher slots  | one real or `NA` per slot, in schema order       |
//!
//! Reals are written in Rust's shortest round-trip form, so a write/read
//! cycle reproduces every bit.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::dataset::{Dataset, Domain, Example, Labels, Provenance, Schema};
use crate::error::{Error, Result};

pub const DATASET_MAGIC: &str = "#crossdistill-dataset/v1";
const NA: &str = "NA";

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    domain: Domain,
    count: usize,
    fingerprint: String,
    schema: Schema,
    provenance: Option<Provenance>,
}

fn bit(b: bool) -> char {
    if b {
        '1'
    } else {
        '0'
    }
}

fn opt_real(v: Option<f64>) -> String {
    v.map_or_else(|| NA.to_string(), |x| x.to_string())
}

pub fn write_dataset<W: Write>(dataset: &Dataset, mut out: W) -> Result<()> {
    let header = Header {
        domain: dataset.domain,
        count: dataset.len(),
        fingerprint: dataset.fingerprint.clone(),
        schema: dataset.schema.clone(),
        provenance: dataset.provenance.clone(),
    };
    let io = |e| Error::io("<dataset stream>", e);
    writeln!(out, "{DATASET_MAGIC}\t{}", serde_json::to_string(&header)?).map_err(io)?;
    let mut line = String::new();
    for ex in &dataset.examples {
        line.clear();
        line.push_str(&ex.row_id.to_string());
        line.push('\t');
        line.push_str(ex.domain.as_str());
        line.push('\t');
        line.push(bit(ex.is_new_item));
        line.push('\t');
        line.extend(ex.mask.iter().map(|m| bit(*m)));
        line.push('\t');
        for (i, (v, m)) in ex.features.iter().zip(&ex.mask).enumerate() {
            if i > 0 {
                line.push(',');
            }
            if *m {
                line.push_str(&v.to_string());
            } else {
                line.push_str(NA);
            }
        }
        let l = &ex.labels;
        line.push('\t');
        line.push(bit(l.click));
        line.push('\t');
        line.push_str(&opt_real(l.trail));
        for b in [l.discovery, l.continue_watch, l.radio_engagement] {
            line.push('\t');
            line.push(bit(b));
        }
        for slot in &ex.teacher {
            line.push('\t');
            line.push_str(&opt_real(*slot));
        }
        writeln!(out, "{line}").map_err(io)?;
    }
    out.flush().map_err(io)
}

pub fn dataset_to_string(dataset: &Dataset) -> Result<String> {
    let mut buf = Vec::new();
    write_dataset(dataset, &mut buf)?;
    Ok(String::from_utf8(buf).expect("dataset text is utf-8"))
}

pub fn save_dataset(dataset: &Dataset, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_dataset(dataset, BufWriter::new(file)).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_dataset(BufReader::new(file))
}

fn parse_bit(field: &str, what: &str, line: usize) -> Result<bool> {
    match field {
        "1" => Ok(true),
        "0" => Ok(false),
        other => Err(Error::parse(
            format!("line {line}"),
            format!("{what}: expected 0/1, got `{other}`"),
        )),
    }
}

fn parse_real(field: &str, what: &str, line: usize) -> Result<f64> {
    field
        .parse::<f64>()
        .map_err(|e| Error::parse(format!("line {line}"), format!("{what}: {e}")))
}

fn parse_opt_real(field: &str, what: &str, line: usize) -> Result<Option<f64>> {
    if field == NA {
        Ok(None)
    } else {
        parse_real(field, what, line).map(Some)
    }
}

pub fn read_dataset<R: BufRead>(input: R) -> Result<Dataset> {
    let mut lines = input.lines();
    let first = lines
        .next()
        .ok_or_else(|| Error::parse("line 1", "empty dataset file"))?
        .map_err(|e| Error::io("<dataset stream>", e))?;
    let json = first
        .strip_prefix(DATASET_MAGIC)
        .and_then(|rest| rest.strip_prefix('\t'))
        .ok_or_else(|| Error::parse("line 1", format!("missing `{DATASET_MAGIC}` header")))?;
    let header: Header =
        serde_json::from_str(json).map_err(|e| Error::parse("line 1", e.to_string()))?;
    let f = header.schema.feature_count();
    let slots = header.schema.teacher_slots.len();
    let expected_fields = 10 + slots;

    let mut examples = Vec::with_capacity(header.count);
    for (i, line) in lines.enumerate() {
        let lineno = i + 2;
        let line = line.map_err(|e| Error::io("<dataset stream>", e))?;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != expected_fields {
            return Err(Error::parse(
                format!("line {lineno}"),
                format!("expected {expected_fields} fields, got {}", fields.len()),
            ));
        }
        let row_id = fields[0]
            .parse::<u64>()
            .map_err(|e| Error::parse(format!("line {lineno}"), format!("row_id: {e}")))?;
        let domain: Domain = fields[1].parse()?;
        let is_new_item = parse_bit(fields[2], "is_new_item", lineno)?;
        let mask = fields[3]
            .chars()
            .map(|c| parse_bit(c.encode_utf8(&mut [0; 4]), "mask", lineno))
            .collect::<Result<Vec<_>>>()?;
        if mask.len() != f {
            return Err(Error::parse(
                format!("line {lineno}"),
                format!("mask has {} bits, schema has {f} features", mask.len()),
            ));
        }
        let raw: Vec<&str> = fields[4].split(',').collect();
        if raw.len() != f {
            return Err(Error::parse(
                format!("line {lineno}"),
                format!("{} feature values, schema has {f}", raw.len()),
            ));
        }
        let mut features = Vec::with_capacity(f);
        for (j, (v, m)) in raw.iter().zip(&mask).enumerate() {
            match (*v == NA, *m) {
                (true, false) => features.push(f64::NAN),
                (false, true) => features.push(parse_real(v, "feature", lineno)?),
                _ => {
                    return Err(Error::parse(
                        format!("line {lineno}"),
                        format!("feature {j}: NA must appear exactly where the mask is 0"),
                    ))
                }
            }
        }
        let click = parse_bit(fields[5], "click", lineno)?;
        let trail = parse_opt_real(fields[6], "trail", lineno)?;
        if click != trail.is_some() {
            return Err(Error::parse(
                format!("line {lineno}"),
                "trail must be present exactly when click = 1",
            ));
        }
        let labels = Labels {
            click,
            trail,
            discovery: parse_bit(fields[7], "discovery", lineno)?,
            continue_watch: parse_bit(fields[8], "continue_watch", lineno)?,
            radio_engagement: parse_bit(fields[9], "radio_engagement", lineno)?,
        };
        let teacher = fields[10..]
            .iter()
            .map(|s| parse_opt_real(s, "teacher slot", lineno))
            .collect::<Result<Vec<_>>>()?;
        examples.push(Example {
            row_id,
            domain,
            is_new_item,
            features,
            mask,
            labels,
            teacher,
        });
    }
    if examples.len() != header.count {
        return Err(Error::parse(
            "header",
            format!("header says {} rows, file has {}", header.count, examples.len()),
        ));
    }
    let dataset = Dataset {
        schema: header.schema,
        domain: header.domain,
        fingerprint: header.fingerprint,
        provenance: header.provenance,
        examples,
    };
    dataset.validate()?;
    Ok(dataset)
}
