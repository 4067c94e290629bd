//! MAIF Canonical Binary Encoding (MCBE).
//!
//! The deterministic serialization used for manifests, provenance records,
//! access policies, knowledge-graph triples, lifecycle metadata and WAL
//! payloads:
//!
//! * fixed-width little-endian integers
//! * byte strings and UTF-8 text as `u32` length + raw bytes
//! * sequences as `u32` count + elements
//! * hashes as raw 32 bytes, UUIDs as raw 16 bytes, fourcc as raw 4 bytes
//! * fields in declaration order, no internal padding
//!
//! Encoding the same value twice always yields identical bytes.

use uuid::Uuid;

use crate::error::{MaifError, Result};

/// Append-only MCBE encoder.
#[derive(Default)]
pub struct Encoder {
    buf: Vec<u8>,
}

impl Encoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(cap: usize) -> Self {
        Self { buf: Vec::with_capacity(cap) }
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.buf
    }

    pub fn len(&self) -> usize {
        self.buf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }

    pub fn put_u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn put_u16(&mut self, v: u16) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn put_u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn put_u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn put_i8(&mut self, v: i8) {
        self.buf.push(v as u8);
    }

    pub fn put_f32(&mut self, v: f32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    /// Raw fixed-width bytes (hashes, UUIDs, fourcc); no length prefix.
    pub fn put_raw(&mut self, v: &[u8]) {
        self.buf.extend_from_slice(v);
    }

    pub fn put_hash(&mut self, v: &[u8; 32]) {
        self.buf.extend_from_slice(v);
    }

    pub fn put_uuid(&mut self, v: &Uuid) {
        self.buf.extend_from_slice(v.as_bytes());
    }

    /// Length-prefixed byte string.
    pub fn put_bytes(&mut self, v: &[u8]) {
        self.put_u32(v.len() as u32);
        self.buf.extend_from_slice(v);
    }

    /// Length-prefixed UTF-8 text.
    pub fn put_text(&mut self, v: &str) {
        self.put_bytes(v.as_bytes());
    }
}

/// Cursor-based MCBE decoder over a byte slice. All reads are bounds-checked.
pub struct Decoder<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Decoder<'a> {
    pub fn new(data: &'a [u8]) -> Self {
        Self { data, pos: 0 }
    }

    pub fn remaining(&self) -> usize {
        self.data.len() - self.pos
    }

    pub fn position(&self) -> usize {
        self.pos
    }

    pub fn is_done(&self) -> bool {
        self.pos == self.data.len()
    }

    /// Error unless every byte has been consumed.
    pub fn finish(&self) -> Result<()> {
        if self.is_done() {
            Ok(())
        } else {
            Err(MaifError::Decode(format!(
                "{} trailing bytes after structure",
                self.remaining()
            )))
        }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.remaining() < n {
            return Err(MaifError::Decode(format!(
                "unexpected end of input: need {n} bytes, have {}",
                self.remaining()
            )));
        }
        let out = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub fn get_u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub fn get_u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    pub fn get_u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn get_u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn get_i8(&mut self) -> Result<i8> {
        Ok(self.take(1)?[0] as i8)
    }

    pub fn get_f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn get_raw(&mut self, n: usize) -> Result<&'a [u8]> {
        self.take(n)
    }

    pub fn get_hash(&mut self) -> Result<[u8; 32]> {
        Ok(self.take(32)?.try_into().unwrap())
    }

    pub fn get_uuid(&mut self) -> Result<Uuid> {
        let raw: [u8; 16] = self.take(16)?.try_into().unwrap();
        Ok(Uuid::from_bytes(raw))
    }

    pub fn get_bytes(&mut self) -> Result<&'a [u8]> {
        let len = self.get_u32()? as usize;
        self.take(len)
    }

    pub fn get_text(&mut self) -> Result<String> {
        let raw = self.get_bytes()?;
        String::from_utf8(raw.to_vec())
            .map_err(|_| MaifError::Decode("invalid UTF-8 in text field".into()))
    }

    /// Sequence count prefix, capped so corrupt counts cannot trigger huge
    /// allocations before element parsing fails anyway.
    pub fn get_count(&mut self, max: u32) -> Result<u32> {
        let n = self.get_u32()?;
        if n > max {
            return Err(MaifError::Decode(format!("sequence count {n} exceeds cap {max}")));
        }
        Ok(n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_scalars_and_strings() {
        let mut enc = Encoder::new();
        enc.put_u8(7);
        enc.put_u16(0xBEEF);
        enc.put_u32(0xDEADBEEF);
        enc.put_u64(u64::MAX - 1);
        enc.put_text("héllo");
        enc.put_bytes(&[1, 2, 3]);
        let id = Uuid::from_bytes([9; 16]);
        enc.put_uuid(&id);
        let bytes = enc.into_bytes();

        let mut dec = Decoder::new(&bytes);
        assert_eq!(dec.get_u8().unwrap(), 7);
        assert_eq!(dec.get_u16().unwrap(), 0xBEEF);
        assert_eq!(dec.get_u32().unwrap(), 0xDEADBEEF);
        assert_eq!(dec.get_u64().unwrap(), u64::MAX - 1);
        assert_eq!(dec.get_text().unwrap(), "héllo");
        assert_eq!(dec.get_bytes().unwrap(), &[1, 2, 3]);
        assert_eq!(dec.get_uuid().unwrap(), id);
        dec.finish().unwrap();
    }

    #[test]
    fn truncated_input_errors() {
        let mut enc = Encoder::new();
        enc.put_u32(10); // claims 10 bytes follow
        enc.put_raw(&[1, 2]);
        let bytes = enc.into_bytes();
        let mut dec = Decoder::new(&bytes);
        assert!(dec.get_bytes().is_err());
    }

    #[test]
    fn determinism_same_value_same_bytes() {
        let encode = || {
            let mut e = Encoder::new();
            e.put_u64(42);
            e.put_text("abc");
            e.into_bytes()
        };
        assert_eq!(encode(), encode());
    }

    #[test]
    fn trailing_bytes_rejected_by_finish() {
        let bytes = [0u8; 3];
        let mut dec = Decoder::new(&bytes);
        dec.get_u8().unwrap();
        assert!(dec.finish().is_err());
    }
}
