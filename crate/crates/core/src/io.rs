//! Session directories on disk.
//!
//! A session directory holds `signals.csv` (header `index,ppg,ecg`, one row
//! per sample) and `meta.json`:
//!
//! ```json
//! {"fs": 300, "age": 4, "weight": 18,
//!  "artifact_intervals": [[1000, 1300]],
//!  "ppg_peaks": [...], "ecg_peaks": [...]}
//! ```
//!
//! Only `fs` is required. Intervals are half-open sample ranges.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numfmt::fmt17;
use crate::preprocess::Preprocessed;
use crate::regression::SubjectRun;
use crate::signal::{validate_session, Interval, Scheme, Session, TimeSeries};

pub const SIGNALS_FILE: &str = "signals.csv";
pub const META_FILE: &str = "meta.json";
const HEADER: [&str; 3] = ["index", "ppg", "ecg"];

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SessionMeta {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fs: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub age: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<f64>,
    #[serde(default)]
    pub artifact_intervals: Vec<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ppg_peaks: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ecg_peaks: Option<Vec<usize>>,
}

fn parse_err(path: &Path, line: u64, msg: impl Into<String>) -> Error {
    Error::ParseError {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

pub fn read_meta(path: &Path) -> Result<SessionMeta> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| parse_err(path, e.line() as u64, e.to_string()))
}

/// Reads `(ppg, ecg)` columns.
pub fn read_signals(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let header = reader
        .headers()
        .map_err(|e| parse_err(path, 1, e.to_string()))?;
    if header.iter().collect::<Vec<_>>() != HEADER {
        return Err(parse_err(path, 1, format!("expected header {}", HEADER.join(","))));
    }
    let (mut ppg, mut ecg) = (Vec::new(), Vec::new());
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(path, line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |i: usize| -> Result<f64> {
            let raw = record.get(i).unwrap_or("");
            raw.parse::<f64>()
                .map_err(|_| parse_err(path, line, format!("field '{}' is not a number: '{raw}'", HEADER[i])))
        };
        record
            .get(0)
            .unwrap_or("")
            .parse::<u64>()
            .map_err(|_| parse_err(path, line, "index is not a nonnegative integer"))?;
        ppg.push(field(1)?);
        ecg.push(field(2)?);
    }
    Ok((ppg, ecg))
}

/// Loads and validates a session directory.
pub fn ingest(dir: &Path) -> Result<Session> {
    let meta_path = dir.join(META_FILE);
    let meta = read_meta(&meta_path)?;
    let fs = meta.fs.ok_or_else(|| Error::MissingMeta {
        path: meta_path.clone(),
        msg: "field 'fs' is required".into(),
    })?;
    if !(fs > 0.0) {
        return Err(Error::UnitMismatch(fs));
    }
    let (ppg, ecg) = read_signals(&dir.join(SIGNALS_FILE))?;
    let session = Session {
        ppg: TimeSeries::new(ppg, fs),
        ecg: TimeSeries::new(ecg, fs),
        age: meta.age,
        weight: meta.weight,
        artifact_mask: meta
            .artifact_intervals
            .iter()
            .map(|&[s, e]| Interval::new(s, e))
            .collect(),
        ppg_peaks: meta.ppg_peaks,
        ecg_peaks: meta.ecg_peaks,
    };
    validate_session(session)
}

/// Writes a session in the layout [`ingest`] reads. Samples use the shortest
/// decimal that round-trips.
pub fn write_session(dir: &Path, s: &Session) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let sig_path = dir.join(SIGNALS_FILE);
    let file = File::create(&sig_path).map_err(|e| Error::io(&sig_path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(&sig_path, e);
    writeln!(w, "{}", HEADER.join(",")).map_err(io)?;
    for (i, (p, e)) in s.ppg.samples.iter().zip(&s.ecg.samples).enumerate() {
        writeln!(w, "{i},{p},{e}").map_err(io)?;
    }
    w.flush().map_err(io)?;

    let meta = SessionMeta {
        fs: Some(s.fs()),
        age: s.age,
        weight: s.weight,
        artifact_intervals: s.artifact_mask.iter().map(|iv| [iv.start, iv.end]).collect(),
        ppg_peaks: s.ppg_peaks.clone(),
        ecg_peaks: s.ecg_peaks.clone(),
    };
    let meta_path = dir.join(META_FILE);
    fs::write(&meta_path, serde_json::to_string_pretty(&meta)? + "\n").map_err(|e| Error::io(&meta_path, e))
}

/// One row per matrix row, 17 significant digits, no header.
pub fn write_matrix_csv(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let mut out = String::with_capacity(m.nrows() * m.ncols() * 24);
    for row in m.row_iter() {
        let cells: Vec<String> = row.iter().map(|&v| fmt17(v)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[derive(Serialize)]
struct CycleMeta<'a> {
    scheme: Scheme,
    #[serde(rename = "L")]
    len: usize,
    n_cycles: usize,
    cycle_delay: i64,
    sample_shift: i64,
    ecg_offset: usize,
    degenerate_dropped: usize,
    /// Half-open, in the input ECG timeline.
    boundaries: &'a [Interval],
}

/// Writes `c_x.csv`, `c_y.csv` and `cycles.json`.
pub fn write_cycles(dir: &Path, p: &Preprocessed) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_matrix_csv(&dir.join("c_x.csv"), &p.cycles.c_x)?;
    write_matrix_csv(&dir.join("c_y.csv"), &p.cycles.c_y)?;
    let meta = CycleMeta {
        scheme: p.cycles.scheme,
        len: p.cycles.len,
        n_cycles: p.cycles.n_cycles(),
        cycle_delay: p.cycle_delay,
        sample_shift: p.sample_shift,
        ecg_offset: p.ecg_offset,
        degenerate_dropped: p.cycles.degenerate_dropped,
        boundaries: &p.cycles.boundaries,
    };
    let path = dir.join("cycles.json");
    fs::write(&path, serde_json::to_string_pretty(&meta)? + "\n").map_err(|e| Error::io(&path, e))
}

/// Writes `reconstruction.csv` (`index,reference,reconstruction`) over the
/// concatenated test cycles.
pub fn write_reconstruction(dir: &Path, run: &SubjectRun) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut out = String::from("index,reference,reconstruction\n");
    for (i, (r, y)) in run.reference.iter().zip(&run.reconstruction).enumerate() {
        out.push_str(&format!("{i},{},{}\n", fmt17(*r), fmt17(*y)));
    }
    let path = dir.join("reconstruction.csv");
    fs::write(&path, out).map_err(|e| Error::io(&path, e))
}

/// Reads back `reconstruction.csv` as `(reference, reconstruction)`.
pub fn read_reconstruction(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let (mut r, mut y) = (Vec::new(), Vec::new());
    for record in reader.records() {
        let record = record.map_err(|e| parse_err(path, e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        let get = |i: usize| -> Result<f64> {
            record
                .get(i)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| parse_err(path, line, "expected a number"))
        };
        r.push(get(1)?);
        y.push(get(2)?);
    }
    Ok((r, y))
}
