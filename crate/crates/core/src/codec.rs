//! Framing shared by every binary store file.
//!
//! ```text
//! magic     8 bytes
//! version   u32 LE
//! body_len  u64 LE
//! body      body_len bytes
//! checksum  32 bytes, SHA-256 of everything before it
//! ```
//!
//! Integers inside bodies are little-endian; strings are a u32 byte length
//! followed by UTF-8 bytes; floats are IEEE-754 binary32 LE.

use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

const HEADER_LEN: usize = 8 + 4 + 8;
const CHECKSUM_LEN: usize = 32;

#[derive(Default)]
pub(crate) struct Encoder {
    buf: Vec<u8>,
}

impl Encoder {
    pub fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn bytes(&mut self, v: &[u8]) {
        self.buf.extend_from_slice(v);
    }

    pub fn str(&mut self, v: &str) {
        self.u32(len_u32(v.len()));
        self.bytes(v.as_bytes());
    }

    pub fn finish(self, magic: &[u8; 8], version: u32) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.buf.len() + CHECKSUM_LEN);
        out.extend_from_slice(magic);
        out.extend_from_slice(&version.to_le_bytes());
        out.extend_from_slice(&(self.buf.len() as u64).to_le_bytes());
        out.extend_from_slice(&self.buf);
        let digest = Sha256::digest(&out);
        out.extend_from_slice(&digest);
        out
    }
}

pub(crate) fn len_u32(n: usize) -> u32 {
    u32::try_from(n).expect("length exceeds u32 range")
}

pub(crate) struct Decoder<'a> {
    body: &'a [u8],
    pos: usize,
    path: PathBuf,
}

impl<'a> Decoder<'a> {
    /// Validates framing and checksum and positions at the start of the body.
    pub fn open(path: &Path, data: &'a [u8], magic: &[u8; 8], version: u32) -> Result<Self> {
        if data.len() < HEADER_LEN + CHECKSUM_LEN {
            return Err(Error::corrupt(path, "file truncated"));
        }
        if &data[..8] != magic {
            return Err(Error::corrupt(path, "bad magic"));
        }
        let (payload, checksum) = data.split_at(data.len() - CHECKSUM_LEN);
        if Sha256::digest(payload).as_slice() != checksum {
            return Err(Error::corrupt(path, "checksum mismatch"));
        }
        let found = u32::from_le_bytes(data[8..12].try_into().unwrap());
        if found != version {
            return Err(Error::Version {
                path: path.to_owned(),
                found,
                expected: version,
            });
        }
        let body_len = u64::from_le_bytes(data[12..20].try_into().unwrap());
        if body_len != (payload.len() - HEADER_LEN) as u64 {
            return Err(Error::corrupt(path, "body length mismatch"));
        }
        Ok(Self {
            body: &payload[HEADER_LEN..],
            pos: 0,
            path: path.to_owned(),
        })
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.body.len())
            .ok_or_else(|| Error::corrupt(&self.path, "unexpected end of body"))?;
        let out = &self.body[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn bytes(&mut self, n: usize) -> Result<&'a [u8]> {
        self.take(n)
    }

    pub fn str(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        let raw = self.take(n)?;
        String::from_utf8(raw.to_vec()).map_err(|_| Error::corrupt(&self.path, "invalid UTF-8"))
    }

    pub fn corrupt(&self, msg: impl Into<String>) -> Error {
        Error::corrupt(&self.path, msg)
    }

    pub fn finish(self) -> Result<()> {
        if self.pos != self.body.len() {
            return Err(Error::corrupt(&self.path, "trailing bytes in body"));
        }
        Ok(())
    }
}
