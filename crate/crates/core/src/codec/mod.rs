//! OPC UA binary encoding for the subset of the protocol the scanner speaks.
//!
//! Everything in here is a pure function over byte buffers. Multi-octet
//! integers are little-endian; strings, byte strings and arrays carry a signed
//! 32-bit length prefix where `-1` encodes null.

mod frame;
pub mod golden;
pub mod ids;
pub mod sample;
mod service;
mod status;
mod value;

pub use frame::*;
pub use service::*;
pub use status::StatusCode;
pub use value::*;

use thiserror::Error;

/// Hard ceiling for any length prefix we are willing to emit.
pub const MAX_ENCODABLE_LEN: usize = i32::MAX as usize;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodecError {
    #[error("truncated input: needed {needed} octets at offset {offset}, {available} available")]
    Truncated {
        offset: usize,
        needed: usize,
        available: usize,
    },
    #[error("malformed input: {0}")]
    Malformed(String),
    #[error("value too large: length {len} exceeds limit {limit}")]
    OversizeValue { len: usize, limit: usize },
    #[error("unsupported service type id {0}")]
    UnsupportedService(u32),
    #[error("service fault: {status}")]
    ServiceFault {
        status: StatusCode,
        request_handle: u32,
    },
    #[error("frame of {size} octets exceeds maximum {max}")]
    FrameTooLarge { size: usize, max: usize },
    #[error("unknown message type {0:?}")]
    UnknownMessageType([u8; 3]),
    #[error("declared frame size {declared} does not match {actual}")]
    SizeMismatch { declared: usize, actual: usize },
}

impl CodecError {
    pub(crate) fn malformed(msg: impl Into<String>) -> Self {
        CodecError::Malformed(msg.into())
    }
}

pub type CodecResult<T> = Result<T, CodecError>;

/// Bounds applied while decoding untrusted input.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecodeLimits {
    pub max_string_len: usize,
    pub max_array_len: usize,
    /// Nesting bound for recursive structures (variants, diagnostic infos).
    pub max_depth: usize,
}

impl Default for DecodeLimits {
    fn default() -> Self {
        Self {
            max_string_len: 1 << 24,
            max_array_len: 1 << 16,
            max_depth: 16,
        }
    }
}

/// Cursor over an input buffer.
pub struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    limits: DecodeLimits,
    depth: usize,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Self::with_limits(buf, DecodeLimits::default())
    }

    pub fn with_limits(buf: &'a [u8], limits: DecodeLimits) -> Self {
        Self {
            buf,
            pos: 0,
            limits,
            depth: 0,
        }
    }

    pub fn position(&self) -> usize {
        self.pos
    }

    pub fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    pub fn limits(&self) -> &DecodeLimits {
        &self.limits
    }

    pub fn take(&mut self, n: usize) -> CodecResult<&'a [u8]> {
        if self.remaining() < n {
            return Err(CodecError::Truncated {
                offset: self.pos,
                needed: n,
                available: self.remaining(),
            });
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn array<const N: usize>(&mut self) -> CodecResult<[u8; N]> {
        let mut out = [0u8; N];
        out.copy_from_slice(self.take(N)?);
        Ok(out)
    }

    pub fn u8(&mut self) -> CodecResult<u8> {
        Ok(self.take(1)?[0])
    }

    pub fn i8(&mut self) -> CodecResult<i8> {
        Ok(self.u8()? as i8)
    }

    pub fn bool(&mut self) -> CodecResult<bool> {
        Ok(self.u8()? != 0)
    }

    pub fn u16(&mut self) -> CodecResult<u16> {
        self.array().map(u16::from_le_bytes)
    }

    pub fn i16(&mut self) -> CodecResult<i16> {
        self.array().map(i16::from_le_bytes)
    }

    pub fn u32(&mut self) -> CodecResult<u32> {
        self.array().map(u32::from_le_bytes)
    }

    pub fn i32(&mut self) -> CodecResult<i32> {
        self.array().map(i32::from_le_bytes)
    }

    pub fn u64(&mut self) -> CodecResult<u64> {
        self.array().map(u64::from_le_bytes)
    }

    pub fn i64(&mut self) -> CodecResult<i64> {
        self.array().map(i64::from_le_bytes)
    }

    pub fn f32(&mut self) -> CodecResult<f32> {
        self.array().map(f32::from_le_bytes)
    }

    pub fn f64(&mut self) -> CodecResult<f64> {
        self.array().map(f64::from_le_bytes)
    }

    /// Reads a length prefix. `None` is the null marker (-1).
    fn length(&mut self, limit: usize) -> CodecResult<Option<usize>> {
        let at = self.pos;
        let len = self.i32()?;
        if len == -1 {
            return Ok(None);
        }
        if len < -1 {
            return Err(CodecError::malformed(format!(
                "negative length {len} at offset {at}"
            )));
        }
        let len = len as usize;
        if len > limit {
            return Err(CodecError::OversizeValue { len, limit });
        }
        Ok(Some(len))
    }

    pub fn byte_string(&mut self) -> CodecResult<Option<Vec<u8>>> {
        match self.length(self.limits.max_string_len)? {
            None => Ok(None),
            Some(n) => Ok(Some(self.take(n)?.to_vec())),
        }
    }

    pub fn string(&mut self) -> CodecResult<Option<String>> {
        match self.length(self.limits.max_string_len)? {
            None => Ok(None),
            Some(n) => {
                let at = self.pos;
                let raw = self.take(n)?;
                std::str::from_utf8(raw)
                    .map(|s| Some(s.to_owned()))
                    .map_err(|_| {
                        CodecError::malformed(format!("invalid UTF-8 string at offset {at}"))
                    })
            }
        }
    }

    /// String field inside a structure; null collapses to empty.
    pub fn string_or_empty(&mut self) -> CodecResult<String> {
        Ok(self.string()?.unwrap_or_default())
    }

    pub fn bytes_or_empty(&mut self) -> CodecResult<Vec<u8>> {
        Ok(self.byte_string()?.unwrap_or_default())
    }

    pub fn array_len(&mut self) -> CodecResult<Option<usize>> {
        let len = self.length(self.limits.max_array_len)?;
        if let Some(n) = len {
            // every element occupies at least one octet
            if n > self.remaining() {
                return Err(CodecError::Truncated {
                    offset: self.pos,
                    needed: n,
                    available: self.remaining(),
                });
            }
        }
        Ok(len)
    }

    pub fn array_of<T>(
        &mut self,
        mut item: impl FnMut(&mut Self) -> CodecResult<T>,
    ) -> CodecResult<Option<Vec<T>>> {
        match self.array_len()? {
            None => Ok(None),
            Some(n) => {
                let mut out = Vec::with_capacity(n);
                for _ in 0..n {
                    out.push(item(self)?);
                }
                Ok(Some(out))
            }
        }
    }

    /// Array field inside a structure; null collapses to empty.
    pub fn vec_of<T>(
        &mut self,
        item: impl FnMut(&mut Self) -> CodecResult<T>,
    ) -> CodecResult<Vec<T>> {
        Ok(self.array_of(item)?.unwrap_or_default())
    }

    pub(crate) fn enter(&mut self) -> CodecResult<()> {
        self.depth += 1;
        if self.depth > self.limits.max_depth {
            return Err(CodecError::malformed("nesting too deep"));
        }
        Ok(())
    }

    pub(crate) fn leave(&mut self) {
        self.depth -= 1;
    }
}

/// Output buffer.
#[derive(Debug, Default)]
pub struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn into_inner(self) -> Vec<u8> {
        self.buf
    }

    pub fn len(&self) -> usize {
        self.buf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }

    pub fn raw(&mut self, b: &[u8]) {
        self.buf.extend_from_slice(b);
    }

    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn bool(&mut self, v: bool) {
        self.buf.push(v as u8);
    }

    pub fn u16(&mut self, v: u16) {
        self.raw(&v.to_le_bytes());
    }

    pub fn i16(&mut self, v: i16) {
        self.raw(&v.to_le_bytes());
    }

    pub fn u32(&mut self, v: u32) {
        self.raw(&v.to_le_bytes());
    }

    pub fn i32(&mut self, v: i32) {
        self.raw(&v.to_le_bytes());
    }

    pub fn u64(&mut self, v: u64) {
        self.raw(&v.to_le_bytes());
    }

    pub fn i64(&mut self, v: i64) {
        self.raw(&v.to_le_bytes());
    }

    pub fn f32(&mut self, v: f32) {
        self.raw(&v.to_le_bytes());
    }

    pub fn f64(&mut self, v: f64) {
        self.raw(&v.to_le_bytes());
    }

    fn length(&mut self, len: usize) -> CodecResult<()> {
        if len > MAX_ENCODABLE_LEN {
            return Err(CodecError::OversizeValue {
                len,
                limit: MAX_ENCODABLE_LEN,
            });
        }
        self.i32(len as i32);
        Ok(())
    }

    pub fn null(&mut self) {
        self.i32(-1);
    }

    pub fn byte_string(&mut self, v: Option<&[u8]>) -> CodecResult<()> {
        match v {
            None => self.null(),
            Some(b) => {
                self.length(b.len())?;
                self.raw(b);
            }
        }
        Ok(())
    }

    pub fn string(&mut self, v: Option<&str>) -> CodecResult<()> {
        self.byte_string(v.map(str::as_bytes))
    }

    /// String field inside a structure; empty is written as null.
    pub fn string_or_null(&mut self, v: &str) -> CodecResult<()> {
        self.string((!v.is_empty()).then_some(v))
    }

    pub fn bytes_or_null(&mut self, v: &[u8]) -> CodecResult<()> {
        self.byte_string((!v.is_empty()).then_some(v))
    }

    pub fn array_len(&mut self, len: Option<usize>) -> CodecResult<()> {
        match len {
            None => self.null(),
            Some(n) => self.length(n)?,
        }
        Ok(())
    }

    pub fn vec_of<T>(
        &mut self,
        items: &[T],
        mut item: impl FnMut(&mut Self, &T) -> CodecResult<()>,
    ) -> CodecResult<()> {
        self.array_len(Some(items.len()))?;
        for it in items {
            item(self, it)?;
        }
        Ok(())
    }
}

/// Types with a fixed binary layout.
pub trait BinaryCodec: Sized {
    fn encode(&self, w: &mut Writer) -> CodecResult<()>;
    fn decode(r: &mut Reader<'_>) -> CodecResult<Self>;

    fn to_bytes(&self) -> CodecResult<Vec<u8>> {
        let mut w = Writer::new();
        self.encode(&mut w)?;
        Ok(w.into_inner())
    }

    fn from_bytes(buf: &[u8]) -> CodecResult<Self> {
        let mut r = Reader::new(buf);
        Self::decode(&mut r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn null_and_empty_strings_differ() {
        let mut w = Writer::new();
        w.string(None).unwrap();
        w.string(Some("")).unwrap();
        let buf = w.into_inner();
        assert_eq!(buf, [0xff, 0xff, 0xff, 0xff, 0, 0, 0, 0]);
        let mut r = Reader::new(&buf);
        assert_eq!(r.string().unwrap(), None);
        assert_eq!(r.string().unwrap(), Some(String::new()));
    }

    #[test]
    fn negative_length_is_malformed() {
        let buf = (-2i32).to_le_bytes();
        assert!(matches!(
            Reader::new(&buf).string(),
            Err(CodecError::Malformed(_))
        ));
    }

    #[test]
    fn string_limit_enforced() {
        let limits = DecodeLimits {
            max_string_len: 4,
            ..Default::default()
        };
        let mut w = Writer::new();
        w.string(Some("hello")).unwrap();
        let buf = w.into_inner();
        let err = Reader::with_limits(&buf, limits).string().unwrap_err();
        assert_eq!(err, CodecError::OversizeValue { len: 5, limit: 4 });
    }

    #[test]
    fn array_length_beyond_buffer_is_truncated() {
        let mut w = Writer::new();
        w.i32(1000);
        let buf = w.into_inner();
        assert!(matches!(
            Reader::new(&buf).array_len(),
            Err(CodecError::Truncated { .. })
        ));
    }
}
