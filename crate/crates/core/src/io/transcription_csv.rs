use std::io::Write;
use std::path::Path;

use super::atomic_write;
use crate::classes::DrumClass;
use crate::error::{Error, Result};
use crate::transcription::{OnsetEvent, Transcription};

pub const TRANSCRIPTION_HEADER: &str = "onset_sec,class,velocity";
/// Class token used for class-agnostic onsets.
pub const UNKNOWN_CLASS: &str = "unknown";

fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

/// Rows as `(line, onset_sec, class token, velocity)` after header validation.
fn read_rows(path: &Path) -> Result<Vec<(usize, f64, String, f64)>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut records = reader.records();
    match records.next() {
        Some(Ok(header)) if header.iter().collect::<Vec<_>>().join(",") == TRANSCRIPTION_HEADER => {}
        Some(Ok(_)) | None => {
            return Err(parse_error(path, 1, format!("header must be `{TRANSCRIPTION_HEADER}`")))
        }
        Some(Err(e)) => return Err(parse_error(path, 1, e.to_string())),
    }
    let mut rows = Vec::new();
    for record in records {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_error(path, line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != 3 {
            return Err(parse_error(path, line, format!("expected 3 fields, found {}", record.len())));
        }
        let number = |field: &str, name: &str| -> Result<f64> {
            field
                .trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| parse_error(path, line, format!("invalid {name} `{field}`")))
        };
        let time = number(&record[0], "onset time")?;
        if time < 0.0 {
            return Err(parse_error(path, line, format!("negative onset time {time}")));
        }
        let velocity = number(&record[2], "velocity")?;
        if !(0.0..=2.0).contains(&velocity) {
            return Err(parse_error(path, line, format!("velocity {velocity} outside [0, 2]")));
        }
        rows.push((line, time, record[1].trim().to_string(), velocity));
    }
    Ok(rows)
}

pub fn read_transcription(path: impl AsRef<Path>) -> Result<Transcription> {
    let path = path.as_ref();
    let events = read_rows(path)?
        .into_iter()
        .map(|(line, time, class, velocity)| {
            let class: DrumClass = class
                .parse()
                .map_err(|_| parse_error(path, line, format!("unknown class `{class}`")))?;
            Ok(OnsetEvent { time, class, velocity })
        })
        .collect::<Result<Vec<_>>>()?;
    Transcription::new(events)
}

/// Onset times of any class, including `unknown`, sorted ascending.
pub fn read_onset_times(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    let path = path.as_ref();
    let mut times = Vec::new();
    for (line, time, class, _) in read_rows(path)? {
        if class != UNKNOWN_CLASS && class.parse::<DrumClass>().is_err() {
            return Err(parse_error(path, line, format!("unknown class `{class}`")));
        }
        times.push(time);
    }
    times.sort_by(f64::total_cmp);
    Ok(times)
}

/// Rows sorted by (class, time), six decimals.
pub fn write_transcription(t: &Transcription, path: impl AsRef<Path>) -> Result<()> {
    let rows = t
        .events()
        .iter()
        .map(|e| (e.time, e.class.token(), e.velocity));
    write_rows(path.as_ref(), rows)
}

/// Class-agnostic onsets with class `unknown` and unit velocity.
pub fn write_onset_times(times: &[f64], path: impl AsRef<Path>) -> Result<()> {
    write_rows(path.as_ref(), times.iter().map(|&t| (t, UNKNOWN_CLASS, 1.0)))
}

fn write_rows<'a>(path: &Path, rows: impl Iterator<Item = (f64, &'a str, f64)>) -> Result<()> {
    let mut text = format!("{TRANSCRIPTION_HEADER}\n");
    for (time, class, velocity) in rows {
        text.push_str(&format!("{time:.6},{class},{velocity:.6}\n"));
    }
    atomic_write(path, |file| file.write_all(text.as_bytes()).map_err(|e| Error::io(path, e)))
}
