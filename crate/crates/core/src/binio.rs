//! Little-endian reader/writer helpers for the binary cache containers.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};

pub(crate) struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    pub fn new(magic: &[u8; 8], version: u32) -> Self {
        let mut w = Self { buf: Vec::new() };
        w.buf.extend_from_slice(magic);
        w.u32(version);
        w
    }

    pub fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f64s(&mut self, v: &[f64]) {
        v.iter().for_each(|x| self.f64(*x));
    }

    pub fn bytes(&mut self, v: &[u8]) {
        self.buf.extend_from_slice(v);
    }

    /// Length-prefixed UTF-8.
    pub fn str(&mut self, s: &str) {
        self.u64(s.len() as u64);
        self.bytes(s.as_bytes());
    }

    /// Writes to a sibling temp file, then renames into place.
    pub fn finish(self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            if !dir.as_os_str().is_empty() {
                std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            }
        }
        // unique per writer, so concurrent stores of the same key cannot collide
        static SERIAL: AtomicU64 = AtomicU64::new(0);
        let serial = SERIAL.fetch_add(1, Ordering::Relaxed);
        let tmp = path.with_extension(format!("{}.{serial}.tmp", std::process::id()));
        let mut f = std::fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        f.write_all(&self.buf).map_err(|e| Error::io(&tmp, e))?;
        drop(f);
        std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }
}

pub(crate) struct Reader {
    buf: Vec<u8>,
    pos: usize,
    path: PathBuf,
}

impl Reader {
    pub fn open(path: &Path, magic: &[u8; 8], version: u32) -> Result<Self> {
        let mut buf = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut buf))
            .map_err(|e| Error::io(path, e))?;
        let mut r = Self {
            buf,
            pos: 0,
            path: path.to_path_buf(),
        };
        if r.take(8)? != magic {
            return Err(r.err("bad magic"));
        }
        let v = r.u32()?;
        if v != version {
            return Err(r.err(&format!("format version {v}, expected {version}")));
        }
        Ok(r)
    }

    pub fn err(&self, message: &str) -> Error {
        Error::Cache {
            path: self.path.clone(),
            message: message.to_string(),
        }
    }

    pub fn take(&mut self, len: usize) -> Result<&[u8]> {
        if self.buf.len() - self.pos < len {
            return Err(self.err("truncated"));
        }
        let s = &self.buf[self.pos..self.pos + len];
        self.pos += len;
        Ok(s)
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    /// A `u64` that must index memory and stay below `limit`.
    pub fn count(&mut self, limit: u64) -> Result<usize> {
        let v = self.u64()?;
        if v > limit {
            return Err(self.err(&format!("implausible count {v}")));
        }
        Ok(v as usize)
    }

    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn f64s(&mut self, len: usize) -> Result<Vec<f64>> {
        let raw = self.take(len.checked_mul(8).ok_or_else(|| self.err("overflow"))?)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    pub fn str(&mut self) -> Result<String> {
        let len = self.count(1 << 20)?;
        let raw = self.take(len)?.to_vec();
        String::from_utf8(raw).map_err(|_| self.err("invalid UTF-8"))
    }

    pub fn expect_end(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(self.err("trailing bytes"));
        }
        Ok(())
    }

    pub fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }
}
