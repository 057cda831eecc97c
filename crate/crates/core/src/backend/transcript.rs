use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::{BackendError, DecodingSettings, Message};

/// One request/response exchange; one JSON object per transcript line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub digest: String,
    pub backend: String,
    pub settings: DecodingSettings,
    pub sample: u32,
    pub request: Vec<Message>,
    pub response: String,
    pub started_at: DateTime<Utc>,
    pub finished_at: DateTime<Utc>,
}

struct Inner {
    entries: Vec<TranscriptEntry>,
    writer: Option<BufWriter<File>>,
}

/// Append-only exchange log, optionally mirrored to a JSON-lines file.
/// Appends are serialized, so file order is completion order.
pub struct TranscriptLog {
    path: Option<PathBuf>,
    inner: Mutex<Inner>,
}

impl TranscriptLog {
    pub fn in_memory() -> Self {
        Self {
            path: None,
            inner: Mutex::new(Inner {
                entries: Vec::new(),
                writer: None,
            }),
        }
    }

    /// Creates (truncating) a transcript file.
    pub fn create(path: &Path) -> Result<Self, BackendError> {
        let file = File::create(path).map_err(|e| io_error(path, e))?;
        Ok(Self::with_writer(path, file))
    }

    /// Opens a transcript file for appending, creating it if needed.
    pub fn append_to(path: &Path) -> Result<Self, BackendError> {
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| io_error(path, e))?;
        Ok(Self::with_writer(path, file))
    }

    fn with_writer(path: &Path, file: File) -> Self {
        Self {
            path: Some(path.to_path_buf()),
            inner: Mutex::new(Inner {
                entries: Vec::new(),
                writer: Some(BufWriter::new(file)),
            }),
        }
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn append(&self, entry: TranscriptEntry) -> Result<(), BackendError> {
        let mut inner = self.inner.lock().unwrap();
        if let Some(w) = inner.writer.as_mut() {
            let line = serde_json::to_string(&entry).expect("transcript entry serializes");
            let path = self.path.as_deref().unwrap_or(Path::new("<transcript>"));
            writeln!(w, "{line}")
                .and_then(|_| w.flush())
                .map_err(|e| io_error(path, e))?;
        }
        inner.entries.push(entry);
        Ok(())
    }

    /// Entries recorded through this handle, in append order.
    pub fn entries(&self) -> Vec<TranscriptEntry> {
        self.inner.lock().unwrap().entries.clone()
    }

    pub fn len(&self) -> usize {
        self.inner.lock().unwrap().entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn io_error(path: &Path, e: std::io::Error) -> BackendError {
    BackendError::Transcript {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

/// Reads every entry of a JSON-lines transcript. Blank lines are skipped;
/// a malformed line fails the whole load with its line number.
pub fn load_transcript(path: &Path) -> Result<Vec<TranscriptEntry>, BackendError> {
    let file = File::open(path).map_err(|e| io_error(path, e))?;
    let mut entries = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| io_error(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let entry = serde_json::from_str(&line).map_err(|e| BackendError::Transcript {
            path: path.display().to_string(),
            message: format!("corrupt entry on line {}: {e}", n + 1),
        })?;
        entries.push(entry);
    }
    Ok(entries)
}
