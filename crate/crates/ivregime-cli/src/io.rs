//! Dataset CSV, model JSON, and result emission.
//!
//! The dataset format is four comma-separated columns with header
//! `l,z,a,y`: a nonnegative cell id, instrument and treatment in
//! `{-1, 1}`, and a finite outcome. UTF-8, LF line endings, no quoting.
//! Write-then-read is the identity, and all float formatting uses the
//! shortest round-trip representation, so repeated runs produce
//! byte-identical files.

use std::fs;
use std::path::Path;

use ivregime_core::analysis::{ReplicationOutcome, ReplicationRecord, SweepRow};
use ivregime_core::{Dataset, ObservedRow, StructuralModel};
use serde::Serialize;

use crate::AppError;

const DATASET_HEADER: &str = "l,z,a,y";

/// Loads and validates a structural model from its JSON document.
pub fn load_model(path: &Path) -> Result<StructuralModel, AppError> {
    let text = fs::read_to_string(path)
        .map_err(|err| AppError::Validation(format!("cannot read {}: {err}", path.display())))?;
    let model: StructuralModel = serde_json::from_str(&text)
        .map_err(|err| AppError::Validation(format!("{}: {err}", path.display())))?;
    model.validate()?;
    Ok(model)
}

/// Reads a dataset, reporting the offending line on malformed input.
pub fn read_dataset_csv(path: &Path) -> Result<Dataset, AppError> {
    let text = fs::read_to_string(path)
        .map_err(|err| AppError::Validation(format!("cannot read {}: {err}", path.display())))?;
    parse_dataset_csv(&text).map_err(|err| {
        AppError::Validation(format!("{}: {}", path.display(), err.message()))
    })
}

/// Parses CSV text; exposed separately so tests can exercise the format
/// without touching the filesystem.
pub fn parse_dataset_csv(text: &str) -> Result<Dataset, AppError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim_end() == DATASET_HEADER => {}
        Some((_, header)) => {
            return Err(AppError::Validation(format!(
                "line 1: expected header `{DATASET_HEADER}`, found `{}`",
                header.trim_end()
            )));
        }
        None => return Err(AppError::Validation("file is empty".into())),
    }
    let mut rows = Vec::new();
    let mut max_cell = 0usize;
    for (index, line) in lines {
        let line_no = index + 1;
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(AppError::Validation(format!(
                "line {line_no}: expected 4 fields, found {}",
                fields.len()
            )));
        }
        let l: usize = fields[0].parse().map_err(|_| {
            AppError::Validation(format!("line {line_no}: cell id `{}` is not a nonnegative integer", fields[0]))
        })?;
        let z = parse_arm(fields[1], line_no, "instrument")?;
        let a = parse_arm(fields[2], line_no, "treatment")?;
        let y: f64 = fields[3].parse().map_err(|_| {
            AppError::Validation(format!("line {line_no}: outcome `{}` is not a number", fields[3]))
        })?;
        if !y.is_finite() {
            return Err(AppError::Validation(format!(
                "line {line_no}: outcome {y} is not finite"
            )));
        }
        max_cell = max_cell.max(l);
        rows.push(ObservedRow { l, z, a, y });
    }
    if rows.is_empty() {
        return Err(AppError::Validation("dataset holds no rows (header only)".into()));
    }
    Ok(Dataset::new(rows, max_cell + 1)?)
}

fn parse_arm(field: &str, line_no: usize, role: &str) -> Result<i8, AppError> {
    let value: i64 = field.parse().map_err(|_| {
        AppError::Validation(format!("line {line_no}: {role} `{field}` is not an integer"))
    })?;
    match value {
        1 => Ok(1),
        -1 => Ok(-1),
        other => Err(AppError::Validation(format!(
            "line {line_no}: {role} {other} is outside {{-1, 1}}"
        ))),
    }
}

/// Renders a dataset in the canonical format.
pub fn dataset_csv_string(dataset: &Dataset) -> String {
    let mut out = String::with_capacity(16 * dataset.len() + DATASET_HEADER.len() + 1);
    out.push_str(DATASET_HEADER);
    out.push('\n');
    for row in &dataset.rows {
        out.push_str(&format!("{},{},{},{}\n", row.l, row.z, row.a, row.y));
    }
    out
}

pub fn write_dataset_csv(dataset: &Dataset, path: &Path) -> Result<(), AppError> {
    write_text(path, &dataset_csv_string(dataset))
}

/// Serializes a value as pretty JSON with a trailing newline.
pub fn json_string<T: Serialize>(value: &T) -> Result<String, AppError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|err| AppError::Validation(format!("serialization failed: {err}")))?;
    text.push('\n');
    Ok(text)
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<(), AppError> {
    write_text(path, &json_string(value)?)
}

pub fn write_text(path: &Path, text: &str) -> Result<(), AppError> {
    fs::write(path, text)
        .map_err(|err| AppError::Validation(format!("cannot write {}: {err}", path.display())))
}

fn optional(value: Option<f64>) -> String {
    value.map(|v| v.to_string()).unwrap_or_default()
}

/// Sweep table in its fixed column layout.
pub fn sweep_csv_string(rows: &[SweepRow]) -> String {
    let mut out = String::from(
        "eps,cov7,var8,Aa_holds,Ab_holds,match_rate,mean_regret,q90_regret,maximin_regret\n",
    );
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            row.eps,
            row.cov7,
            row.var8,
            row.aa_holds,
            row.ab_holds,
            optional(row.match_rate),
            optional(row.mean_regret),
            optional(row.q90_regret),
            row.maximin_regret,
        ));
    }
    out
}

fn push_record(out: &mut String, prefix: &str, record: &ReplicationRecord) {
    match &record.outcome {
        ReplicationOutcome::Fit { regime, regret, matched } => {
            let actions: Vec<String> =
                regime.actions().iter().map(|a| a.to_string()).collect();
            out.push_str(&format!(
                "{prefix}{},ok,{},{},{}\n",
                record.rep,
                matched,
                regret,
                actions.join(";")
            ));
        }
        ReplicationOutcome::Failed { reason } => {
            out.push_str(&format!(
                "{prefix}{},failed:{},,,\n",
                record.rep,
                reason.replace(',', ";")
            ));
        }
    }
}

/// Per-replication table for a single regret experiment.
pub fn replication_csv_string(records: &[ReplicationRecord]) -> String {
    let mut out = String::from("rep,status,matched,regret,regime\n");
    for record in records {
        push_record(&mut out, "", record);
    }
    out
}

/// Per-replication table for a sweep, keyed by grid point.
pub fn sweep_replication_csv_string(groups: &[(f64, Vec<ReplicationRecord>)]) -> String {
    let mut out = String::from("eps,rep,status,matched,regret,regime\n");
    for (eps, records) in groups {
        for record in records {
            push_record(&mut out, &format!("{eps},"), record);
        }
    }
    out
}
