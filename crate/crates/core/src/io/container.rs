//! The `PINV` container: a 4-byte magic, a version byte, then tagged sections.
//!
//! ```text
//! "PINV" | version: u8 | count: u32 | count x (tag: [u8; 4] | len: u64 | payload)
//! ```
//! All integers and floats are little-endian.

use ndarray::{Array1, Array2};

use crate::error::{CoreError, Result};

pub const MAGIC: &[u8; 4] = b"PINV";
pub const CONTAINER_VERSION: u8 = 1;

pub type Tag = [u8; 4];

fn malformed(msg: impl Into<String>) -> CoreError {
    CoreError::Format { format: "PINV", msg: msg.into() }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Container {
    sections: Vec<(Tag, Vec<u8>)>,
}

impl Container {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, tag: Tag, payload: Vec<u8>) {
        self.sections.push((tag, payload));
    }

    pub fn get(&self, tag: &Tag) -> Option<&[u8]> {
        self.sections.iter().find(|(t, _)| t == tag).map(|(_, p)| p.as_slice())
    }

    pub fn require(&self, tag: &Tag) -> Result<&[u8]> {
        self.get(tag).ok_or_else(|| malformed(format!("missing section {}", String::from_utf8_lossy(tag))))
    }

    pub fn tags(&self) -> impl Iterator<Item = &Tag> {
        self.sections.iter().map(|(t, _)| t)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.push(CONTAINER_VERSION);
        out.extend_from_slice(&(self.sections.len() as u32).to_le_bytes());
        for (tag, payload) in &self.sections {
            out.extend_from_slice(tag);
            out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
            out.extend_from_slice(payload);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if !bytes.starts_with(MAGIC) {
            return Err(malformed("bad magic"));
        }
        let mut r = ByteReader::new(&bytes[4..]);
        let version = r.u8()?;
        if version != CONTAINER_VERSION {
            return Err(malformed(format!("unsupported version {version}")));
        }
        let count = r.u32()? as usize;
        let mut sections = Vec::with_capacity(count.min(64));
        for _ in 0..count {
            let tag: Tag = r.bytes(4)?.try_into().expect("4 bytes");
            let len = r.u64()? as usize;
            sections.push((tag, r.bytes(len)?.to_vec()));
        }
        if !r.is_empty() {
            return Err(malformed("trailing bytes after last section"));
        }
        Ok(Self { sections })
    }

    pub fn write(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn read(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

/// Little-endian payload builder.
#[derive(Debug, Default)]
pub struct ByteWriter {
    buf: Vec<u8>,
}

impl ByteWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn u8(&mut self, v: u8) -> &mut Self {
        self.buf.push(v);
        self
    }

    pub fn u32(&mut self, v: u32) -> &mut Self {
        self.buf.extend_from_slice(&v.to_le_bytes());
        self
    }

    pub fn u64(&mut self, v: u64) -> &mut Self {
        self.buf.extend_from_slice(&v.to_le_bytes());
        self
    }

    pub fn f64(&mut self, v: f64) -> &mut Self {
        self.buf.extend_from_slice(&v.to_le_bytes());
        self
    }

    pub fn str(&mut self, s: &str) -> &mut Self {
        self.u32(s.len() as u32);
        self.buf.extend_from_slice(s.as_bytes());
        self
    }

    pub fn f64s(&mut self, values: &[f64]) -> &mut Self {
        self.u64(values.len() as u64);
        for &v in values {
            self.f64(v);
        }
        self
    }

    pub fn vector(&mut self, v: &Array1<f64>) -> &mut Self {
        self.u64(v.len() as u64);
        for &x in v {
            self.f64(x);
        }
        self
    }

    pub fn matrix(&mut self, m: &Array2<f64>) -> &mut Self {
        self.u64(m.nrows() as u64).u64(m.ncols() as u64);
        for &x in m.iter() {
            self.f64(x);
        }
        self
    }

    pub fn finish(self) -> Vec<u8> {
        self.buf
    }
}

/// Little-endian payload cursor.
#[derive(Debug)]
pub struct ByteReader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    pub fn new(data: &'a [u8]) -> Self {
        Self { data, pos: 0 }
    }

    pub fn is_empty(&self) -> bool {
        self.pos == self.data.len()
    }

    pub fn bytes(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.data.len() - self.pos < n {
            return Err(malformed("unexpected end of data"));
        }
        let out = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.bytes(1)?[0])
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes(4)?.try_into().expect("4")))
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes(8)?.try_into().expect("8")))
    }

    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes(8)?.try_into().expect("8")))
    }

    pub fn str(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.bytes(n)?.to_vec()).map_err(|_| malformed("invalid UTF-8 string"))
    }

    fn len_prefix(&mut self, elem: usize) -> Result<usize> {
        let n = self.u64()? as usize;
        if n.checked_mul(elem).is_none_or(|b| b > self.data.len() - self.pos) {
            return Err(malformed("length prefix exceeds payload"));
        }
        Ok(n)
    }

    pub fn f64s(&mut self) -> Result<Vec<f64>> {
        let n = self.len_prefix(8)?;
        (0..n).map(|_| self.f64()).collect()
    }

    pub fn vector(&mut self) -> Result<Array1<f64>> {
        Ok(Array1::from(self.f64s()?))
    }

    pub fn matrix(&mut self) -> Result<Array2<f64>> {
        let rows = self.u64()? as usize;
        let cols = self.u64()? as usize;
        let total = rows.checked_mul(cols).ok_or_else(|| malformed("matrix too large"))?;
        if total.checked_mul(8).is_none_or(|b| b > self.data.len() - self.pos) {
            return Err(malformed("matrix exceeds payload"));
        }
        let vals = (0..total).map(|_| self.f64()).collect::<Result<Vec<_>>>()?;
        Array2::from_shape_vec((rows, cols), vals).map_err(|e| malformed(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout() {
        let mut c = Container::new();
        c.push(*b"ABCD", vec![1, 2, 3]);
        let bytes = c.to_bytes();
        assert_eq!(&bytes[..4], b"PINV");
        assert_eq!(bytes[4], CONTAINER_VERSION);
        assert_eq!(&bytes[5..9], &1u32.to_le_bytes());
        assert_eq!(&bytes[9..13], b"ABCD");
        assert_eq!(&bytes[13..21], &3u64.to_le_bytes());
        assert_eq!(Container::from_bytes(&bytes).unwrap(), c);
    }

    #[test]
    fn rejects_truncation_and_bad_magic() {
        let mut c = Container::new();
        c.push(*b"ABCD", vec![0; 16]);
        let bytes = c.to_bytes();
        assert!(Container::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        assert!(Container::from_bytes(b"NOPE\x01\0\0\0\0").is_err());
    }

    #[test]
    fn hostile_length_prefix() {
        let mut w = ByteWriter::new();
        w.u64(u64::MAX);
        let bytes = w.finish();
        assert!(ByteReader::new(&bytes).f64s().is_err());
    }
}
