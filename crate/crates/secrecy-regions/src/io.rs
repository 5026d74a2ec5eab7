//! File formats: JSON channel descriptions, JSON inequality systems, and the
//! frontier CSV export. Parsing reports the row and column of the first
//! violated invariant; writes go through a temp file and an atomic rename.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::ChannelError;
use crate::geometry::{GeometryError, LinearInequality};
use crate::{BroadcastWiretapChannel, ParallelChannel};

const ROW_SUM_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("{path}: invalid JSON: {source}")]
    Json { path: String, source: serde_json::Error },
    #[error("{path}: {message}")]
    Format { path: String, message: String },
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawChannel {
    input_size: usize,
    receivers: Vec<usize>,
    eavesdropper: usize,
    joint: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawParallel {
    subchannels: Vec<RawChannel>,
}

/// A channel file holds either one broadcast wiretap channel or a list of
/// parallel sub-channels.
#[derive(Debug, Clone)]
pub enum ChannelInput {
    Single(BroadcastWiretapChannel),
    Parallel(ParallelChannel),
}

fn format_err(path: &Path, message: impl Into<String>) -> IoError {
    IoError::Format {
        path: path.display().to_string(),
        message: message.into(),
    }
}

fn validate_raw(path: &Path, raw: &RawChannel, label: &str) -> Result<(), IoError> {
    let cols: usize = raw.receivers.iter().product::<usize>() * raw.eavesdropper;
    if raw.receivers.is_empty() || raw.receivers.contains(&0) || raw.eavesdropper == 0 {
        return Err(format_err(path, format!("{label}: alphabet sizes must be positive")));
    }
    if raw.joint.len() != raw.input_size {
        return Err(format_err(
            path,
            format!(
                "{label}: expected {} rows, found {}",
                raw.input_size,
                raw.joint.len()
            ),
        ));
    }
    for (r, row) in raw.joint.iter().enumerate() {
        if row.len() != cols {
            return Err(format_err(
                path,
                format!("{label}: row {r} has {} columns, expected {cols}", row.len()),
            ));
        }
        for (c, &p) in row.iter().enumerate() {
            if !p.is_finite() || p < 0.0 {
                return Err(format_err(
                    path,
                    format!("{label}: row {r}, column {c}: entry {p} is not a probability"),
                ));
            }
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > ROW_SUM_TOL {
            return Err(format_err(
                path,
                format!("{label}: row {r} sums to {sum}, expected 1"),
            ));
        }
    }
    Ok(())
}

fn raw_to_channel(path: &Path, raw: RawChannel, label: &str) -> Result<BroadcastWiretapChannel, IoError> {
    validate_raw(path, &raw, label)?;
    Ok(BroadcastWiretapChannel::new(
        raw.input_size,
        raw.receivers,
        raw.eavesdropper,
        raw.joint,
    )?)
}

fn channel_to_raw(bc: &BroadcastWiretapChannel) -> RawChannel {
    RawChannel {
        input_size: bc.input_size(),
        receivers: bc.receiver_alphabets().to_vec(),
        eavesdropper: bc.eavesdropper_alphabet(),
        joint: bc.joint().to_vec(),
    }
}

pub fn load_channel(path: &Path) -> Result<ChannelInput, IoError> {
    let text = fs::read_to_string(path).map_err(|source| IoError::Read {
        path: path.display().to_string(),
        source,
    })?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|source| IoError::Json {
        path: path.display().to_string(),
        source,
    })?;
    if value.get("subchannels").is_some() {
        let raw: RawParallel = serde_json::from_value(value).map_err(|source| IoError::Json {
            path: path.display().to_string(),
            source,
        })?;
        let subs = raw
            .subchannels
            .into_iter()
            .enumerate()
            .map(|(l, sub)| raw_to_channel(path, sub, &format!("sub-channel {l}")))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(ChannelInput::Parallel(ParallelChannel::new(subs)?))
    } else {
        let raw: RawChannel = serde_json::from_value(value).map_err(|source| IoError::Json {
            path: path.display().to_string(),
            source,
        })?;
        Ok(ChannelInput::Single(raw_to_channel(path, raw, "channel")?))
    }
}

pub fn save_channel(path: &Path, input: &ChannelInput) -> Result<(), IoError> {
    let value = match input {
        ChannelInput::Single(bc) => serde_json::to_value(channel_to_raw(bc)),
        ChannelInput::Parallel(pc) => serde_json::to_value(RawParallel {
            subchannels: pc.subchannels().iter().map(channel_to_raw).collect(),
        }),
    }
    .expect("channel serialization cannot fail");
    write_json_atomic(path, &value)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawInequality {
    coeffs: BTreeMap<String, f64>,
    bound: f64,
}

/// Loads a JSON array of `{"coeffs": {...}, "bound": b}` objects.
pub fn load_inequalities(path: &Path) -> Result<Vec<LinearInequality>, IoError> {
    let text = fs::read_to_string(path).map_err(|source| IoError::Read {
        path: path.display().to_string(),
        source,
    })?;
    let raw: Vec<RawInequality> = serde_json::from_str(&text).map_err(|source| IoError::Json {
        path: path.display().to_string(),
        source,
    })?;
    raw.into_iter()
        .enumerate()
        .map(|(i, r)| {
            LinearInequality::new(r.coeffs, r.bound)
                .map_err(|e| format_err(path, format!("inequality {i}: {e}")))
        })
        .collect()
}

pub fn save_inequalities(path: &Path, system: &[LinearInequality]) -> Result<(), IoError> {
    let raw: Vec<RawInequality> = system
        .iter()
        .map(|i| RawInequality {
            coeffs: i.coeffs.clone(),
            bound: i.bound,
        })
        .collect();
    write_json_atomic(path, &serde_json::to_value(raw).expect("inequality serialization cannot fail"))
}

/// Writes frontier samples as CSV with header `R0,R1,...,piece_id`.
pub fn write_frontier_csv(
    path: &Path,
    variables: &[String],
    rows: &[(Vec<f64>, usize)],
) -> Result<(), IoError> {
    let mut out = String::new();
    out.push_str(&variables.join(","));
    out.push_str(",piece_id\n");
    for (point, piece_id) in rows {
        for x in point {
            out.push_str(&format!("{x:.12},"));
        }
        out.push_str(&format!("{piece_id}\n"));
    }
    write_bytes_atomic(path, out.as_bytes())
}

/// Serializes to pretty JSON and writes via a temp file plus atomic rename,
/// so a failed run never leaves a partial output.
pub fn write_json_atomic(path: &Path, value: &serde_json::Value) -> Result<(), IoError> {
    let mut text = serde_json::to_string_pretty(value).expect("JSON serialization cannot fail");
    text.push('\n');
    write_bytes_atomic(path, text.as_bytes())
}

pub fn write_bytes_atomic(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(format!(".tmp.{}", std::process::id()));
    let tmp = std::path::PathBuf::from(tmp);
    if let Some(dir) = dir {
        fs::create_dir_all(dir)?;
    }
    let mut file = fs::File::create(&tmp)?;
    file.write_all(bytes)?;
    file.sync_all()?;
    drop(file);
    fs::rename(&tmp, path)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{Channel, Terminal};
    use tempfile::tempdir;

    fn sample_channel() -> BroadcastWiretapChannel {
        BroadcastWiretapChannel::from_degraded_chain(
            &[Channel::bsc(0.1), Channel::bsc(0.2)],
            &[Terminal::Receiver(0), Terminal::Eavesdropper],
        )
        .unwrap()
    }

    #[test]
    fn channel_json_round_trips() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("ch.json");
        let bc = sample_channel();
        save_channel(&path, &ChannelInput::Single(bc.clone())).unwrap();
        match load_channel(&path).unwrap() {
            ChannelInput::Single(got) => assert_eq!(got, bc),
            ChannelInput::Parallel(_) => panic!("expected a single channel"),
        }
    }

    #[test]
    fn parallel_json_round_trips() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("pc.json");
        let pc = ParallelChannel::new(vec![sample_channel(), sample_channel()]).unwrap();
        save_channel(&path, &ChannelInput::Parallel(pc.clone())).unwrap();
        match load_channel(&path).unwrap() {
            ChannelInput::Parallel(got) => assert_eq!(got, pc),
            ChannelInput::Single(_) => panic!("expected a parallel channel"),
        }
    }

    #[test]
    fn bad_row_sum_reports_the_row() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bad.json");
        fs::write(
            &path,
            r#"{"input_size":2,"receivers":[2],"eavesdropper":1,
                "joint":[[0.5,0.5],[0.5,0.6]]}"#,
        )
        .unwrap();
        let err = load_channel(&path).unwrap_err();
        assert!(err.to_string().contains("row 1"), "{err}");
    }

    #[test]
    fn negative_entry_reports_row_and_column() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bad.json");
        fs::write(
            &path,
            r#"{"input_size":1,"receivers":[2],"eavesdropper":1,
                "joint":[[1.2,-0.2]]}"#,
        )
        .unwrap();
        let err = load_channel(&path).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("row 0") && msg.contains("column 1"), "{msg}");
    }

    #[test]
    fn wrong_column_count_reports_expectation() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bad.json");
        fs::write(
            &path,
            r#"{"input_size":1,"receivers":[2],"eavesdropper":2,
                "joint":[[0.5,0.5]]}"#,
        )
        .unwrap();
        let err = load_channel(&path).unwrap_err();
        assert!(err.to_string().contains("expected 4"), "{err}");
    }

    #[test]
    fn inequality_json_round_trips() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("sys.json");
        let system = vec![
            LinearInequality::from_terms(&[("R0", 1.0), ("R1", 1.0)], 0.83).unwrap(),
            LinearInequality::from_terms(&[("R1", -1.0)], 0.0).unwrap(),
        ];
        save_inequalities(&path, &system).unwrap();
        assert_eq!(load_inequalities(&path).unwrap(), system);
    }

    #[test]
    fn empty_inequality_is_rejected() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("sys.json");
        fs::write(&path, r#"[{"coeffs":{},"bound":1.0}]"#).unwrap();
        let err = load_inequalities(&path).unwrap_err();
        assert!(err.to_string().contains("inequality 0"), "{err}");
    }

    #[test]
    fn frontier_csv_has_header_and_rows() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("frontier.csv");
        let vars = vec!["R0".to_string(), "R1".to_string()];
        write_frontier_csv(&path, &vars, &[(vec![0.25, 0.5], 3)]).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("R0,R1,piece_id"));
        let row = lines.next().unwrap();
        assert!(row.starts_with("0.25") && row.ends_with(",3"), "{row}");
    }

    #[test]
    fn atomic_write_leaves_no_temp_files() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("out.json");
        write_json_atomic(&path, &serde_json::json!({"a": 1})).unwrap();
        let entries: Vec<_> = fs::read_dir(dir.path()).unwrap().collect();
        assert_eq!(entries.len(), 1);
    }
}
