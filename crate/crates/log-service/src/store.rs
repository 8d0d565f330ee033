//! Append-only record file plus a sidecar offset index.
//!
//! `records.log` is a sequence of `len u32 ‖ body` frames; `records.idx`
//! holds one `u64` file offset per frame. The log file is the source of
//! truth: a torn final frame is cut off on open, and the index is rebuilt
//! whenever it disagrees with the log.

use std::fs::{File, OpenOptions};
use std::io::{self, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use larch_core::record::StoredRecord;

pub const LOG_FILE: &str = "records.log";
pub const INDEX_FILE: &str = "records.idx";

/// A frame as read back from disk.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Entry {
    Record(StoredRecord),
    /// The frame is complete but its body no longer parses.
    Corrupt { seq: u64, raw: Vec<u8> },
}

impl Entry {
    pub fn seq(&self) -> u64 {
        match self {
            Entry::Record(r) => r.seq,
            Entry::Corrupt { seq, .. } => *seq,
        }
    }
}

pub struct RecordStore {
    dir: PathBuf,
    log: File,
    entries: Vec<Entry>,
    len: u64,
}

impl RecordStore {
    pub fn open(dir: &Path) -> io::Result<RecordStore> {
        let path = dir.join(LOG_FILE);
        let mut log = OpenOptions::new().read(true).append(true).create(true).open(&path)?;
        let mut bytes = Vec::new();
        log.read_to_end(&mut bytes)?;

        let mut entries = Vec::new();
        let mut offsets = Vec::new();
        let mut at = 0usize;
        while bytes.len() - at >= 4 {
            let n = u32::from_be_bytes(bytes[at..at + 4].try_into().unwrap()) as usize;
            if bytes.len() - at - 4 < n {
                break;
            }
            let body = &bytes[at + 4..at + 4 + n];
            let seq = entries.len() as u64;
            entries.push(match StoredRecord::decode(body) {
                Some(r) => Entry::Record(r),
                None => Entry::Corrupt { seq, raw: body.to_vec() },
            });
            offsets.push(at as u64);
            at += 4 + n;
        }
        if at < bytes.len() {
            tracing::warn!(dir = %dir.display(), dropped = bytes.len() - at, "truncating torn record frame");
            log.set_len(at as u64)?;
            log.sync_all()?;
        }
        log.seek(SeekFrom::End(0))?;

        let store = RecordStore { dir: dir.to_path_buf(), log, entries, len: at as u64 };
        store.check_index(&offsets)?;
        Ok(store)
    }

    fn check_index(&self, offsets: &[u64]) -> io::Result<()> {
        let path = self.dir.join(INDEX_FILE);
        let want: Vec<u8> = offsets.iter().flat_map(|o| o.to_be_bytes()).collect();
        if std::fs::read(&path).ok().as_deref() != Some(&want[..]) {
            std::fs::write(&path, &want)?;
        }
        Ok(())
    }

    /// Sequence number the next record must carry.
    pub fn head(&self) -> u64 {
        self.entries.len() as u64
    }

    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    /// Writes and syncs one record. Returns its sequence number.
    pub fn append(&mut self, rec: StoredRecord) -> io::Result<u64> {
        if rec.seq != self.head() {
            return Err(io::Error::new(io::ErrorKind::InvalidInput, "record sequence out of order"));
        }
        let body = rec.encode();
        let mut frame = Vec::with_capacity(4 + body.len());
        frame.extend_from_slice(&(body.len() as u32).to_be_bytes());
        frame.extend_from_slice(&body);
        self.log.write_all(&frame)?;
        self.log.sync_data()?;
        let offset = self.len;
        self.len += frame.len() as u64;
        // The index is advisory; a failure here is repaired on the next open.
        let _ = OpenOptions::new()
            .append(true)
            .create(true)
            .open(self.dir.join(INDEX_FILE))
            .and_then(|mut f| f.write_all(&offset.to_be_bytes()));
        self.entries.push(Entry::Record(rec));
        Ok(self.head() - 1)
    }

    /// Contiguous entries starting at `from`, at most `limit`.
    pub fn fetch(&self, from: u64, limit: usize) -> &[Entry] {
        let start = (from as usize).min(self.entries.len());
        let end = start.saturating_add(limit).min(self.entries.len());
        &self.entries[start..end]
    }
}
