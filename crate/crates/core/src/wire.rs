//! Little-endian helpers shared by the binary file formats (checkpoints,
//! embedding stores, neighbor caches).

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

pub(crate) fn push_u16(buf: &mut Vec<u8>, v: u16) {
    buf.extend_from_slice(&v.to_le_bytes());
}

pub(crate) fn push_u32(buf: &mut Vec<u8>, v: u32) {
    buf.extend_from_slice(&v.to_le_bytes());
}

pub(crate) fn push_u64(buf: &mut Vec<u8>, v: u64) {
    buf.extend_from_slice(&v.to_le_bytes());
}

pub(crate) fn push_f32(buf: &mut Vec<u8>, v: f32) {
    buf.extend_from_slice(&v.to_le_bytes());
}

/// Append a CRC32 of everything currently in the buffer.
pub(crate) fn append_crc(buf: &mut Vec<u8>) {
    let crc = crc32fast::hash(buf);
    push_u32(buf, crc);
}

/// Split off and verify a trailing CRC32, returning the covered payload.
/// Any corruption or truncation lands here before field parsing starts.
pub(crate) fn check_crc<'a>(path: &Path, raw: &'a [u8]) -> Result<&'a [u8]> {
    if raw.len() < 4 {
        return Err(Error::format(path, "file too short for a checksum"));
    }
    let (payload, tail) = raw.split_at(raw.len() - 4);
    let stored = u32::from_le_bytes(tail.try_into().expect("four bytes"));
    if crc32fast::hash(payload) != stored {
        return Err(Error::Checksum { path: path.to_path_buf() });
    }
    Ok(payload)
}

/// Bounds-checked little-endian reader over a byte slice.
pub(crate) struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    path: PathBuf,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(path: &Path, buf: &'a [u8]) -> Self {
        Reader {
            buf,
            pos: 0,
            path: path.to_path_buf(),
        }
    }

    pub(crate) fn err(&self, reason: impl Into<String>) -> Error {
        Error::format(&self.path, reason)
    }

    pub(crate) fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    pub(crate) fn bytes(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.remaining() < n {
            return Err(self.err(format!(
                "unexpected end of file: wanted {n} bytes, {} left",
                self.remaining()
            )));
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub(crate) fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.bytes(2)?.try_into().unwrap()))
    }

    pub(crate) fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes(4)?.try_into().unwrap()))
    }

    pub(crate) fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes(8)?.try_into().unwrap()))
    }

    pub(crate) fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.bytes(4)?.try_into().unwrap()))
    }

    /// A length-prefixed UTF-8 name (u16 length, then the bytes).
    pub(crate) fn name(&mut self) -> Result<String> {
        let len = self.u16()? as usize;
        let bytes = self.bytes(len)?;
        String::from_utf8(bytes.to_vec()).map_err(|_| self.err("name is not UTF-8"))
    }
}

/// Write a length-prefixed UTF-8 name.
pub(crate) fn push_name(buf: &mut Vec<u8>, name: &str) {
    push_u16(buf, name.len() as u16);
    buf.extend_from_slice(name.as_bytes());
}
