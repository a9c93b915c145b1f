//! Output files are written to a temp file in the target directory and
//! renamed into place, so a crash never leaves a truncated table behind.

use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};
use tempfile::NamedTempFile;

use crate::CliError;

/// One file listed in the manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rows: Option<u64>,
}

/// Hashes everything that passes through it.
pub struct DigestWriter<W: Write> {
    inner: W,
    hasher: Sha256,
    bytes: u64,
}

impl<W: Write> DigestWriter<W> {
    pub fn new(inner: W) -> Self {
        DigestWriter { inner, hasher: Sha256::new(), bytes: 0 }
    }

    fn finish(self) -> (W, String, u64) {
        (self.inner, hex::encode(self.hasher.finalize()), self.bytes)
    }
}

impl<W: Write> Write for DigestWriter<W> {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        let n = self.inner.write(buf)?;
        self.hasher.update(&buf[..n]);
        self.bytes += n as u64;
        Ok(n)
    }

    fn flush(&mut self) -> io::Result<()> {
        self.inner.flush()
    }
}

pub type Sink = DigestWriter<BufWriter<NamedTempFile>>;
pub type CsvSink = csv::Writer<Sink>;

/// Streams a file's contents through SHA-256.
pub fn digest_file(path: &Path) -> Result<FileDigest, CliError> {
    let missing = |source| CliError::MissingInput { path: path.to_path_buf(), source };
    let mut f = File::open(path).map_err(missing)?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    let mut bytes = 0u64;
    loop {
        let n = f.read(&mut buf).map_err(missing)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
        bytes += n as u64;
    }
    Ok(FileDigest { path: path.display().to_string(), bytes, sha256: hex::encode(hasher.finalize()), rows: None })
}

/// An output directory plus the digests of everything written to it.
#[derive(Debug)]
pub struct OutputDir {
    dir: PathBuf,
    written: Vec<FileDigest>,
}

impl OutputDir {
    pub fn create(dir: &Path) -> Result<OutputDir, CliError> {
        std::fs::create_dir_all(dir).map_err(|source| CliError::Output { path: dir.to_path_buf(), source })?;
        Ok(OutputDir { dir: dir.to_path_buf(), written: Vec::new() })
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }

    /// Files written so far, in write order.
    pub fn written(&self) -> &[FileDigest] {
        &self.written
    }

    /// Writes `name` atomically. `fill` returns the row count to record,
    /// if the file has rows.
    pub fn write<F>(&mut self, name: &str, fill: F) -> Result<(), CliError>
    where
        F: FnOnce(&mut Sink) -> io::Result<Option<u64>>,
    {
        let target = self.dir.join(name);
        let fail = |source| CliError::Output { path: target.clone(), source };
        let tmp = NamedTempFile::new_in(&self.dir).map_err(fail)?;
        let mut sink = DigestWriter::new(BufWriter::new(tmp));
        let rows = fill(&mut sink).map_err(fail)?;
        sink.flush().map_err(fail)?;
        let (buf, sha256, bytes) = sink.finish();
        let tmp = buf.into_inner().map_err(|e| fail(e.into_error()))?;
        tmp.persist(&target).map_err(|e| fail(e.error))?;
        log::info!("wrote {}", target.display());
        self.written.retain(|d| d.path != name);
        self.written.push(FileDigest { path: name.to_string(), bytes, sha256, rows });
        Ok(())
    }

    /// Writes a CSV table; `fill` returns the number of data rows.
    pub fn csv<F>(&mut self, name: &str, header: &[&str], fill: F) -> Result<(), CliError>
    where
        F: FnOnce(&mut csv::Writer<&mut Sink>) -> Result<u64, csv::Error>,
    {
        self.write(name, |sink| {
            let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(sink);
            w.write_record(header)?;
            let rows = fill(&mut w)?;
            w.flush()?;
            Ok(Some(rows))
        })
    }

    /// Writes pretty JSON with a trailing newline.
    pub fn json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        self.write(name, |sink| {
            serde_json::to_writer_pretty(&mut *sink, value)?;
            sink.write_all(b"\n")?;
            Ok(None)
        })
    }
}
