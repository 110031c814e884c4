//! File formats: WAV audio, transcription CSV, one-shot bank directories,
//! run configuration and text artifacts. All writes are atomic.

mod config;
mod transcription_csv;
mod wav;

pub use config::{RunConfig, CONFIG_KEYS};
pub use transcription_csv::{
    read_onset_times, read_transcription, write_onset_times, write_transcription, TRANSCRIPTION_HEADER,
    UNKNOWN_CLASS,
};
pub use wav::{read_wav, write_wav};

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::classes::DrumClass;
use crate::drum_machine::OneShotBank;
use crate::error::{Error, Result};
use crate::signal::Waveform;

/// Write through a temporary file in the destination directory, then rename.
pub(crate) fn atomic_write(path: &Path, write: impl FnOnce(&mut File) -> Result<()>) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    write(tmp.as_file_mut())?;
    tmp.as_file_mut().flush().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn write_text(path: impl AsRef<Path>, text: &str) -> Result<()> {
    let path = path.as_ref();
    atomic_write(path, |f| f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e)))
}

pub fn create_dir(path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// `<dir>/<class>.wav` for every class token.
pub fn class_paths(dir: &Path) -> Vec<(DrumClass, PathBuf)> {
    DrumClass::ALL
        .iter()
        .map(|&c| (c, dir.join(format!("{}.wav", c.token()))))
        .collect()
}

/// Nine per-class stems from `<dir>/<class>.wav`.
pub fn read_stems(dir: impl AsRef<Path>) -> Result<Vec<Waveform>> {
    let dir = dir.as_ref();
    class_paths(dir)
        .into_iter()
        .map(|(class, path)| {
            if !path.is_file() {
                return Err(Error::invalid(format!(
                    "{} is missing `{}.wav`",
                    dir.display(),
                    class.token()
                )));
            }
            read_wav(&path)
        })
        .collect()
}

/// Write nine stems as `<dir>/<class>.wav`; returns the total clipped-sample count.
pub fn write_stems(dir: impl AsRef<Path>, stems: &[Waveform]) -> Result<usize> {
    let dir = dir.as_ref();
    create_dir(dir)?;
    let mut clipped = 0;
    for ((_, path), stem) in class_paths(dir).into_iter().zip(stems) {
        clipped += write_wav(&path, stem)?;
    }
    Ok(clipped)
}

/// A bank directory; the kit id is the directory name.
pub fn read_bank(dir: impl AsRef<Path>) -> Result<OneShotBank> {
    let dir = dir.as_ref();
    let kit_id = dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "kit".to_string());
    OneShotBank::new(kit_id, read_stems(dir)?)
}

pub fn write_bank(dir: impl AsRef<Path>, bank: &OneShotBank) -> Result<()> {
    write_stems(dir, bank.one_shots()).map(|_| ())
}
