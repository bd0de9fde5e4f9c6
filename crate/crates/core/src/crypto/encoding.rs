//! Canonical byte layouts: big-endian integers and u32 length prefixes.

use num_bigint::BigUint;
use sha2::{Digest, Sha256};

use super::CryptoError;

pub type Hash256 = [u8; 32];

/// SHA-256 over a domain label followed by each part, length-prefixed.
pub fn hash_parts(label: &str, parts: &[&[u8]]) -> Hash256 {
    let mut h = Sha256::new();
    h.update((label.len() as u32).to_be_bytes());
    h.update(label.as_bytes());
    for p in parts {
        h.update((p.len() as u32).to_be_bytes());
        h.update(p);
    }
    h.finalize().into()
}

#[derive(Default, Debug, Clone)]
pub struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn u8(&mut self, v: u8) -> &mut Self {
        self.buf.push(v);
        self
    }

    pub fn u32(&mut self, v: u32) -> &mut Self {
        self.buf.extend_from_slice(&v.to_be_bytes());
        self
    }

    pub fn u64(&mut self, v: u64) -> &mut Self {
        self.buf.extend_from_slice(&v.to_be_bytes());
        self
    }

    pub fn raw(&mut self, bytes: &[u8]) -> &mut Self {
        self.buf.extend_from_slice(bytes);
        self
    }

    pub fn bytes(&mut self, bytes: &[u8]) -> &mut Self {
        self.u32(bytes.len() as u32);
        self.raw(bytes)
    }

    pub fn big(&mut self, v: &BigUint) -> &mut Self {
        self.bytes(&v.to_bytes_be())
    }

    /// Big integer left-padded to exactly `width` bytes.
    pub fn big_fixed(&mut self, v: &BigUint, width: usize) -> &mut Self {
        let b = v.to_bytes_be();
        assert!(b.len() <= width, "integer wider than its slot");
        self.buf.extend(std::iter::repeat_n(0u8, width - b.len()));
        self.raw(&b)
    }

    pub fn finish(&mut self) -> Vec<u8> {
        std::mem::take(&mut self.buf)
    }
}

pub struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Reader { buf }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], CryptoError> {
        if self.buf.len() < n {
            return Err(CryptoError::Decode("truncated input"));
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }

    pub fn u8(&mut self) -> Result<u8, CryptoError> {
        Ok(self.take(1)?[0])
    }

    pub fn u32(&mut self) -> Result<u32, CryptoError> {
        Ok(u32::from_be_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    pub fn u64(&mut self) -> Result<u64, CryptoError> {
        Ok(u64::from_be_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }

    pub fn raw(&mut self, n: usize) -> Result<&'a [u8], CryptoError> {
        self.take(n)
    }

    pub fn bytes(&mut self) -> Result<&'a [u8], CryptoError> {
        let n = self.u32()? as usize;
        self.take(n)
    }

    pub fn big(&mut self) -> Result<BigUint, CryptoError> {
        Ok(BigUint::from_bytes_be(self.bytes()?))
    }

    pub fn hash(&mut self) -> Result<Hash256, CryptoError> {
        Ok(self.take(32)?.try_into().expect("32 bytes"))
    }

    pub fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }

    pub fn finish(self) -> Result<(), CryptoError> {
        if self.buf.is_empty() {
            Ok(())
        } else {
            Err(CryptoError::Decode("trailing bytes"))
        }
    }
}
