//! Canonical length-prefixed encoding.
//!
//! Every field is written as a 4-byte big-endian length followed by the
//! field bytes. Integers are fixed-width big-endian, floats are their IEEE-754
//! bit pattern in big-endian, strings are UTF-8 and lists are a count field
//! followed by one field per element. Decoding is strict: trailing bytes,
//! wrong widths and invalid tags are errors.

use crate::error::{Error, Result};

#[derive(Debug, Default, Clone)]
pub struct Encoder {
    buf: Vec<u8>,
}

impl Encoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bytes(&mut self, b: &[u8]) -> &mut Self {
        self.buf.extend_from_slice(&(b.len() as u32).to_be_bytes());
        self.buf.extend_from_slice(b);
        self
    }

    pub fn u8(&mut self, v: u8) -> &mut Self {
        self.bytes(&[v])
    }

    pub fn u32(&mut self, v: u32) -> &mut Self {
        self.bytes(&v.to_be_bytes())
    }

    pub fn u64(&mut self, v: u64) -> &mut Self {
        self.bytes(&v.to_be_bytes())
    }

    pub fn f64(&mut self, v: f64) -> &mut Self {
        self.bytes(&v.to_bits().to_be_bytes())
    }

    pub fn str(&mut self, s: &str) -> &mut Self {
        self.bytes(s.as_bytes())
    }

    pub fn finish(&mut self) -> Vec<u8> {
        std::mem::take(&mut self.buf)
    }
}

pub struct Decoder<'a> {
    data: &'a [u8],
    pos: usize,
}

fn err(msg: impl Into<String>) -> Error {
    Error::Decode(msg.into())
}

impl<'a> Decoder<'a> {
    pub fn new(data: &'a [u8]) -> Self {
        Decoder { data, pos: 0 }
    }

    pub fn bytes(&mut self) -> Result<&'a [u8]> {
        let rest = &self.data[self.pos..];
        if rest.len() < 4 {
            return Err(err("truncated length"));
        }
        let n = u32::from_be_bytes(rest[..4].try_into().unwrap()) as usize;
        if rest.len() - 4 < n {
            return Err(err("truncated field"));
        }
        self.pos += 4 + n;
        Ok(&rest[4..4 + n])
    }

    fn fixed<const N: usize>(&mut self) -> Result<[u8; N]> {
        self.bytes()?.try_into().map_err(|_| err(format!("expected {N}-byte field")))
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.fixed::<1>()?[0])
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_be_bytes(self.fixed()?))
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_be_bytes(self.fixed()?))
    }

    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_bits(u64::from_be_bytes(self.fixed()?)))
    }

    pub fn digest(&mut self) -> Result<[u8; 32]> {
        self.fixed()
    }

    pub fn str(&mut self) -> Result<String> {
        String::from_utf8(self.bytes()?.to_vec()).map_err(|_| err("invalid utf-8"))
    }

    pub fn finish(self) -> Result<()> {
        if self.pos == self.data.len() {
            Ok(())
        } else {
            Err(err("trailing bytes"))
        }
    }
}
