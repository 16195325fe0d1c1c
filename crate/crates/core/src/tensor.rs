//! Latent tensors and the `NPT1` binary container.
//!
//! Layout on disk: magic `NPT1`, then `u32` little-endian channels, height and
//! width, then `channels * height * width` little-endian binary32 values in
//! channel-major, row-major order. No padding, no checksum.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const TENSOR_MAGIC: [u8; 4] = *b"NPT1";

/// A `channels x height x width` grid of finite `f32` values.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentTensor {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl LatentTensor {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if channels == 0 || height == 0 || width == 0 {
            return Err(Error::Shape(format!(
                "dimensions must be positive, got {channels}x{height}x{width}"
            )));
        }
        let expected = channels
            .checked_mul(height)
            .and_then(|v| v.checked_mul(width))
            .ok_or_else(|| Error::Shape("shape overflows".into()))?;
        if data.len() != expected {
            return Err(Error::Shape(format!(
                "{channels}x{height}x{width} needs {expected} values, got {}",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Format(format!("non-finite value at index {i}")));
        }
        Ok(Self {
            channels,
            height,
            width,
            data,
        })
    }

    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self {
            channels,
            height,
            width,
            data: vec![0.0; channels * height * width],
        }
    }

    /// Builds a tensor from f64 values, rounding each to f32.
    pub fn from_f64(channels: usize, height: usize, width: usize, data: &[f64]) -> Result<Self> {
        Self::new(
            channels,
            height,
            width,
            data.iter().map(|&v| v as f32).collect(),
        )
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    /// Flattened dimension `d = channels * height * width`.
    pub fn dim(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn get(&self, c: usize, y: usize, x: usize) -> f32 {
        self.data[(c * self.height + y) * self.width + x]
    }

    pub fn plane(&self, c: usize) -> &[f32] {
        let n = self.height * self.width;
        &self.data[c * n..(c + 1) * n]
    }

    pub fn plane_mut(&mut self, c: usize) -> &mut [f32] {
        let n = self.height * self.width;
        &mut self.data[c * n..(c + 1) * n]
    }

    pub fn same_shape(&self, other: &LatentTensor) -> bool {
        self.shape() == other.shape()
    }

    pub fn ensure_same_shape(&self, other: &LatentTensor) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::Shape(format!(
                "{:?} vs {:?}",
                self.shape(),
                other.shape()
            )))
        }
    }

    /// Euclidean norm accumulated sequentially in f64.
    pub fn norm(&self) -> f64 {
        self.data
            .iter()
            .map(|&v| f64::from(v) * f64::from(v))
            .sum::<f64>()
            .sqrt()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.data.iter().map(|&v| f64::from(v)).collect()
    }

    pub fn map(&self, f: impl Fn(f32) -> f32) -> LatentTensor {
        LatentTensor {
            channels: self.channels,
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + 4 * self.data.len());
        out.extend_from_slice(&TENSOR_MAGIC);
        for dim in [self.channels, self.height, self.width] {
            out.extend_from_slice(&(dim as u32).to_le_bytes());
        }
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 16 {
            return Err(Error::Format(format!(
                "tensor header needs 16 bytes, got {}",
                bytes.len()
            )));
        }
        if bytes[..4] != TENSOR_MAGIC {
            return Err(Error::Format(format!(
                "bad magic {:02x?}, expected NPT1",
                &bytes[..4]
            )));
        }
        let dim = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap());
        let (c, h, w) = (dim(0) as usize, dim(1) as usize, dim(2) as usize);
        let count = c
            .checked_mul(h)
            .and_then(|v| v.checked_mul(w))
            .filter(|&n| n.checked_mul(4).is_some())
            .ok_or_else(|| Error::Format(format!("shape {c}x{h}x{w} overflows")))?;
        let payload = &bytes[16..];
        if payload.len() != count * 4 {
            return Err(Error::Format(format!(
                "truncated payload: header declares {count} values, found {} bytes",
                payload.len()
            )));
        }
        let data = payload
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
            .collect();
        Self::new(c, h, w, data)
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        w.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut buf = Vec::new();
        r.read_to_end(&mut buf)?;
        Self::from_bytes(&buf)
    }
}

pub fn write_tensor(path: impl AsRef<Path>, tensor: &LatentTensor) -> Result<()> {
    fs::write(path, tensor.to_bytes())?;
    Ok(())
}

pub fn read_tensor(path: impl AsRef<Path>) -> Result<LatentTensor> {
    LatentTensor::from_bytes(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_wrong_magic() {
        let mut bytes = LatentTensor::zeros(1, 2, 2).to_bytes();
        bytes[0] = b'X';
        assert!(matches!(
            LatentTensor::from_bytes(&bytes),
            Err(Error::Format(_))
        ));
    }

    #[test]
    fn rejects_truncated_payload() {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(b"NPT1");
        for d in [2u32, 2, 2] {
            bytes.extend_from_slice(&d.to_le_bytes());
        }
        for i in 0..7 {
            bytes.extend_from_slice(&(i as f32).to_le_bytes());
        }
        let err = LatentTensor::from_bytes(&bytes).unwrap_err();
        assert!(err.to_string().contains("truncated"), "{err}");
    }

    #[test]
    fn rejects_shape_overflow() {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(b"NPT1");
        for d in [u32::MAX, u32::MAX, u32::MAX] {
            bytes.extend_from_slice(&d.to_le_bytes());
        }
        assert!(matches!(
            LatentTensor::from_bytes(&bytes),
            Err(Error::Format(_))
        ));
    }

    #[test]
    fn rejects_non_finite() {
        assert!(LatentTensor::new(1, 1, 2, vec![1.0, f32::NAN]).is_err());
        assert!(LatentTensor::new(1, 1, 2, vec![1.0]).is_err());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.npt");
        let t = LatentTensor::new(2, 1, 3, vec![1.5, -0.0, 3.25, f32::MIN_POSITIVE, -7.0, 1e30])
            .unwrap();
        write_tensor(&path, &t).unwrap();
        let back = read_tensor(&path).unwrap();
        let bits = |t: &LatentTensor| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&t), bits(&back));
        assert_eq!(t.shape(), back.shape());
    }

    proptest! {
        #[test]
        fn bytes_round_trip_bit_exact(
            c in 1usize..4, h in 1usize..6, w in 1usize..6,
            seed in proptest::collection::vec(any::<u32>(), 1..200),
        ) {
            let n = c * h * w;
            let data: Vec<f32> = (0..n)
                .map(|i| f32::from_bits(seed[i % seed.len()].wrapping_add(i as u32)))
                .map(|v| if v.is_finite() { v } else { 0.5 })
                .collect();
            let t = LatentTensor::new(c, h, w, data).unwrap();
            let back = LatentTensor::from_bytes(&t.to_bytes()).unwrap();
            prop_assert_eq!(t.shape(), back.shape());
            for (a, b) in t.data().iter().zip(back.data()) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }
}
