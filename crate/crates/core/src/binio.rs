//! Little-endian readers/writers for the weight and shard formats.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub(crate) struct Writer {
    pub buf: Vec<u8>,
}

impl Writer {
    pub fn new() -> Self {
        Writer { buf: Vec::new() }
    }

    pub fn bytes(&mut self, b: &[u8]) {
        self.buf.extend_from_slice(b);
    }

    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn u16(&mut self, v: u16) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    /// `u8 rank, rank × u32 dims, f32 values`.
    pub fn tensor(&mut self, t: &Tensor<f32>) {
        self.u8(t.rank() as u8);
        for &d in t.shape() {
            self.u32(d as u32);
        }
        self.buf.reserve(t.len() * 4);
        for v in t.data() {
            self.buf.extend_from_slice(&v.to_le_bytes());
        }
    }
}

pub(crate) struct Reader<'a> {
    what: &'static str,
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(what: &'static str, data: &'a [u8]) -> Self {
        Reader { what, data, pos: 0 }
    }

    pub fn offset(&self) -> usize {
        self.pos
    }

    pub fn at_end(&self) -> bool {
        self.pos == self.data.len()
    }

    pub fn take(&mut self, n: usize, detail: &str) -> Result<&'a [u8]> {
        if self.data.len() - self.pos < n {
            return Err(Error::Truncated {
                what: self.what,
                offset: self.pos as u64,
                detail: format!("need {n} bytes for {detail}, {} left", self.data.len() - self.pos),
            });
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn magic(&mut self, expected: &'static [u8]) -> Result<()> {
        let got = self.take(expected.len(), "magic")?;
        if got != expected {
            return Err(Error::BadMagic {
                what: self.what,
                expected,
            });
        }
        Ok(())
    }

    pub fn u8(&mut self, detail: &str) -> Result<u8> {
        Ok(self.take(1, detail)?[0])
    }

    pub fn u16(&mut self, detail: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, detail)?.try_into().unwrap()))
    }

    pub fn u32(&mut self, detail: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, detail)?.try_into().unwrap()))
    }

    pub fn tensor(&mut self, detail: &str) -> Result<Tensor<f32>> {
        let rank = self.u8(detail)? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(self.u32(detail)? as usize);
        }
        let len: usize = shape.iter().product();
        let raw = self.take(len * 4, detail)?;
        let data = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Tensor::from_vec(&shape, data)
    }
}
