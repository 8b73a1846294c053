//! Plain-text gain container.
//!
//! ```text
//! # any number of comment lines
//! format_version = 1
//! model = benney
//! ...
//! rows = 5
//! cols = 256
//! [data]
//! <row 0, space separated>
//! ```
//!
//! Entries are written with 17 significant digits, which round-trips every
//! `f64` exactly.

use std::collections::BTreeMap;

use nalgebra::DMatrix;

use super::{GainMatrix, GainMetadata, LqrError, SolverTag};
use crate::model::{FlowParameters, ModelKind};

pub const GAIN_FORMAT_VERSION: u32 = 1;

/// Serialises a gain with full metadata. `comments` are emitted first, each
/// prefixed with `# `.
pub fn write_gain(gain: &GainMatrix, comments: &[String]) -> Result<String, LqrError> {
    let meta = gain.metadata.as_ref().ok_or_else(|| LqrError::GainFormat {
        line: 0,
        message: "gain has no metadata to persist".into(),
    })?;
    let mut out = String::new();
    for c in comments {
        out.push_str("# ");
        out.push_str(c);
        out.push('\n');
    }
    let header: [(&str, String); 15] = [
        ("format_version", GAIN_FORMAT_VERSION.to_string()),
        ("model", meta.model.tag().to_string()),
        ("reynolds", format!("{:.16e}", meta.params.reynolds())),
        ("capillary", format!("{:.16e}", meta.params.capillary())),
        ("theta", format!("{:.16e}", meta.params.theta())),
        ("aspect", format!("{:.16e}", meta.params.aspect())),
        ("grid_points", meta.grid_points.to_string()),
        ("actuators", meta.actuators.to_string()),
        ("width", format!("{:.16e}", meta.width)),
        ("beta", format!("{:.16e}", meta.beta)),
        ("solver", meta.solver.to_string()),
        ("reduced", meta.reduced.to_string()),
        ("rows", gain.rows().to_string()),
        ("cols", gain.cols().to_string()),
        ("layout", "row-major".to_string()),
    ];
    for (k, v) in header {
        out.push_str(&format!("{k} = {v}\n"));
    }
    out.push_str("[data]\n");
    for r in 0..gain.rows() {
        let row: Vec<String> = (0..gain.cols()).map(|c| format!("{:.16e}", gain.k[(r, c)])).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    Ok(out)
}

fn format_err(line: usize, message: impl Into<String>) -> LqrError {
    LqrError::GainFormat {
        line,
        message: message.into(),
    }
}

fn take<T: std::str::FromStr>(fields: &BTreeMap<String, (usize, String)>, key: &str) -> Result<T, LqrError> {
    let (line, raw) = fields.get(key).ok_or_else(|| format_err(0, format!("missing header key `{key}`")))?;
    raw.parse::<T>()
        .map_err(|_| format_err(*line, format!("cannot parse `{key}` from `{raw}`")))
}

/// Parses a gain written by [`write_gain`].
pub fn read_gain(text: &str) -> Result<GainMatrix, LqrError> {
    let mut fields: BTreeMap<String, (usize, String)> = BTreeMap::new();
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let mut data_start = None;
    for (no, line) in lines.by_ref() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        if t == "[data]" {
            data_start = Some(no);
            break;
        }
        let (k, v) = t
            .split_once('=')
            .ok_or_else(|| format_err(no, format!("expected `key = value`, found `{t}`")))?;
        if fields.insert(k.trim().to_string(), (no, v.trim().to_string())).is_some() {
            return Err(format_err(no, format!("duplicate key `{}`", k.trim())));
        }
    }
    let data_line = data_start.ok_or_else(|| format_err(0, "missing [data] section"))?;
    let version: u32 = take(&fields, "format_version")?;
    if version != GAIN_FORMAT_VERSION {
        return Err(format_err(0, format!("unsupported format_version {version}")));
    }
    if let Some((no, layout)) = fields.get("layout") {
        if layout != "row-major" {
            return Err(format_err(*no, format!("unsupported layout `{layout}`")));
        }
    }
    let model: ModelKind = take(&fields, "model")?;
    let params = FlowParameters::new(
        take(&fields, "reynolds")?,
        take(&fields, "capillary")?,
        take(&fields, "theta")?,
        take(&fields, "aspect")?,
    )?;
    let solver: SolverTag = take::<String>(&fields, "solver")?
        .parse()
        .map_err(|e: String| format_err(fields["solver"].0, e))?;
    let rows: usize = take(&fields, "rows")?;
    let cols: usize = take(&fields, "cols")?;
    let metadata = GainMetadata {
        model,
        params,
        beta: take(&fields, "beta")?,
        actuators: take(&fields, "actuators")?,
        width: take(&fields, "width")?,
        grid_points: take(&fields, "grid_points")?,
        solver,
        reduced: take(&fields, "reduced")?,
    };
    if metadata.actuators != rows {
        return Err(format_err(0, "row count disagrees with the actuator count"));
    }
    let expected_cols = if metadata.reduced { 1 } else { model.fields() } * metadata.grid_points;
    if cols != expected_cols {
        return Err(format_err(0, format!("expected {expected_cols} columns, header says {cols}")));
    }
    let mut values = Vec::with_capacity(rows * cols);
    let mut last_line = data_line;
    for (no, line) in lines {
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        last_line = no;
        let before = values.len();
        for tok in t.split_whitespace() {
            let v: f64 = tok.parse().map_err(|_| format_err(no, format!("bad number `{tok}`")))?;
            if !v.is_finite() {
                return Err(format_err(no, "non-finite gain entry"));
            }
            values.push(v);
        }
        if values.len() - before != cols {
            return Err(format_err(no, format!("row has {} entries, expected {cols}", values.len() - before)));
        }
    }
    if values.len() != rows * cols {
        return Err(format_err(last_line, format!("found {} entries, expected {}", values.len(), rows * cols)));
    }
    Ok(GainMatrix {
        k: DMatrix::from_row_slice(rows, cols, &values),
        metadata: Some(metadata),
    })
}
