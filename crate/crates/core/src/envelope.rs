//! Versioned binary envelope for trained models.
//!
//! ```text
//! b"DSMD" | version: u16 | kind: u8 | payload
//! ```
//!
//! All integers are little-endian `u32` unless noted. Neural-network
//! parameters are stored as `f32`; forest thresholds and leaf values as
//! `f64` so routing is exact after a reload.

use crate::error::{Error, Result};
use crate::nn::{Activation, Dense};

pub const MAGIC: &[u8; 4] = b"DSMD";
pub const VERSION: u16 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum ModelKind {
    Autoencoder = 1,
    Forest = 2,
    Mlp = 3,
}

#[derive(Debug, Default)]
pub(crate) struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    pub fn new(kind: ModelKind) -> Self {
        let mut w = Writer::default();
        w.buf.extend_from_slice(MAGIC);
        w.buf.extend_from_slice(&VERSION.to_le_bytes());
        w.u8(kind as u8);
        w
    }

    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn u32(&mut self, v: usize) {
        let v = u32::try_from(v).expect("model dimension exceeds u32");
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f32(&mut self, v: f64) {
        self.buf.extend_from_slice(&(v as f32).to_le_bytes());
    }

    pub fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn dense(&mut self, l: &Dense) {
        self.u32(l.fan_in());
        self.u32(l.fan_out());
        self.u8(l.activation.code());
        l.weights.iter().for_each(|&w| self.f32(w));
        l.bias.iter().for_each(|&b| self.f32(b));
    }

    pub fn finish(self) -> Vec<u8> {
        self.buf
    }
}

pub(crate) struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8], kind: ModelKind) -> Result<Self> {
        if buf.len() < 7 || &buf[..4] != MAGIC {
            return Err(Error::Format("not a model envelope".into()));
        }
        let version = u16::from_le_bytes([buf[4], buf[5]]);
        if version != VERSION {
            return Err(Error::Format(format!(
                "unsupported model envelope version {version}"
            )));
        }
        if buf[6] != kind as u8 {
            return Err(Error::Format(format!(
                "model kind {} does not match expected {:?}",
                buf[6], kind
            )));
        }
        Ok(Reader { buf, pos: 7 })
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Format("truncated model envelope".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }

    pub fn f32(&mut self) -> Result<f64> {
        let v = f32::from_le_bytes(self.take(4)?.try_into().unwrap());
        if !v.is_finite() {
            return Err(Error::Format(
                "non-finite parameter in model envelope".into(),
            ));
        }
        Ok(f64::from(v))
    }

    pub fn f64(&mut self) -> Result<f64> {
        let v = f64::from_le_bytes(self.take(8)?.try_into().unwrap());
        if !v.is_finite() {
            return Err(Error::Format("non-finite value in model envelope".into()));
        }
        Ok(v)
    }

    pub fn dense(&mut self) -> Result<Dense> {
        let fan_in = self.u32()?;
        let fan_out = self.u32()?;
        let activation = Activation::from_code(self.u8()?)
            .ok_or_else(|| Error::Format("unknown activation code".into()))?;
        if fan_in.saturating_mul(fan_out) > self.buf.len() {
            return Err(Error::Format("layer larger than envelope".into()));
        }
        let mut l = Dense::zeros(fan_in, fan_out, activation);
        for w in l.weights.iter_mut() {
            *w = self.f32()?;
        }
        for b in l.bias.iter_mut() {
            *b = self.f32()?;
        }
        Ok(l)
    }

    pub fn finish(self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::Format(format!(
                "{} trailing bytes in model envelope",
                self.buf.len() - self.pos
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_checks() {
        let w = Writer::new(ModelKind::Forest);
        let bytes = w.finish();
        assert!(Reader::new(&bytes, ModelKind::Forest).is_ok());
        assert!(Reader::new(&bytes, ModelKind::Mlp).is_err());
        let mut bad = bytes.clone();
        bad[4] = 9;
        assert!(Reader::new(&bad, ModelKind::Forest).is_err());
        assert!(Reader::new(b"nope", ModelKind::Forest).is_err());
    }

    #[test]
    fn truncation_and_trailing_bytes() {
        let mut w = Writer::new(ModelKind::Mlp);
        w.u32(7);
        let bytes = w.finish();
        let mut r = Reader::new(&bytes[..bytes.len() - 1], ModelKind::Mlp).unwrap();
        assert!(r.u32().is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        let mut r = Reader::new(&extra, ModelKind::Mlp).unwrap();
        assert_eq!(r.u32().unwrap(), 7);
        assert!(r.finish().is_err());
    }
}
