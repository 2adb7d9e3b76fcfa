//! Flat binary model container.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! magic            8 bytes  "SRFDNET\0"
//! version          u32
//! config echo      u64 byte length, UTF-8 bytes
//! embedding seed   u64
//! sigma_scale      f64
//! horizon T        f64
//! layer sizes      u64 count, then u64 per entry
//! B matrix         u64 length (3m), then f64 row-major
//! tensor count     u64
//! tensors          per layer: weights then bias, each u64 length + f64s
//! ```

use std::io::{Read, Write};
use std::path::Path;

use super::{FieldModel, FourierEmbedding, NetworkError, NetworkParams};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"SRFDNET\0";
pub const CHECKPOINT_VERSION: u32 = 1;

/// A model together with the configuration text it was trained under.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config_echo: String,
    pub model: FieldModel,
}

fn put_u64(out: &mut Vec<u8>, x: u64) {
    out.extend_from_slice(&x.to_le_bytes());
}

fn put_f64s(out: &mut Vec<u8>, xs: &[f64]) {
    put_u64(out, xs.len() as u64);
    for x in xs {
        out.extend_from_slice(&x.to_le_bytes());
    }
}

struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], NetworkError> {
        if self.buf.len() < n {
            return Err(NetworkError::Corrupt("unexpected end of data".into()));
        }
        let (a, b) = self.buf.split_at(n);
        self.buf = b;
        Ok(a)
    }

    fn u32(&mut self) -> Result<u32, NetworkError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, NetworkError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64, NetworkError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn len(&mut self) -> Result<usize, NetworkError> {
        let n = self.u64()?;
        if n > self.buf.len() as u64 {
            return Err(NetworkError::Corrupt(format!("length {n} exceeds remaining data")));
        }
        Ok(n as usize)
    }

    fn f64s(&mut self) -> Result<Vec<f64>, NetworkError> {
        let n = self.len()?;
        (0..n).map(|_| self.f64()).collect()
    }
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let m = &self.model;
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        put_u64(&mut out, self.config_echo.len() as u64);
        out.extend_from_slice(self.config_echo.as_bytes());
        put_u64(&mut out, m.embedding.seed());
        out.extend_from_slice(&m.embedding.sigma_scale().to_le_bytes());
        out.extend_from_slice(&m.horizon.to_le_bytes());
        let sizes = m.params.sizes();
        put_u64(&mut out, sizes.len() as u64);
        for &s in sizes {
            put_u64(&mut out, s as u64);
        }
        let b: Vec<f64> = m.embedding.matrix().iter().flatten().copied().collect();
        put_f64s(&mut out, &b);
        put_u64(&mut out, 2 * m.params.n_layers() as u64);
        for l in 0..m.params.n_layers() {
            put_f64s(&mut out, m.params.weights(l));
            put_f64s(&mut out, m.params.bias(l));
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, NetworkError> {
        let mut r = Reader { buf: bytes };
        if r.take(8).map_err(|_| NetworkError::BadMagic)? != CHECKPOINT_MAGIC {
            return Err(NetworkError::BadMagic);
        }
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(NetworkError::UnsupportedVersion(version));
        }
        let n = r.len()?;
        let config_echo = String::from_utf8(r.take(n)?.to_vec())
            .map_err(|_| NetworkError::Corrupt("config echo is not UTF-8".into()))?;
        let seed = r.u64()?;
        let sigma = r.f64()?;
        let horizon = r.f64()?;
        let n_sizes = r.len()?;
        let sizes: Vec<usize> = (0..n_sizes)
            .map(|_| r.u64().map(|s| s as usize))
            .collect::<Result<_, _>>()?;
        if sizes.len() < 2 {
            return Err(NetworkError::Corrupt("fewer than two layer sizes".into()));
        }
        let b = r.f64s()?;
        if b.len() % 3 != 0 || b.len() / 3 * 2 != sizes[0] {
            return Err(NetworkError::Corrupt("embedding matrix does not match input width".into()));
        }
        let n_tensors = r.u64()? as usize;
        if n_tensors != 2 * (sizes.len() - 1) {
            return Err(NetworkError::Corrupt(format!("unexpected tensor count {n_tensors}")));
        }
        let mut flat = Vec::new();
        for l in 0..sizes.len() - 1 {
            let w = r.f64s()?;
            let bias = r.f64s()?;
            if w.len() != sizes[l] * sizes[l + 1] || bias.len() != sizes[l + 1] {
                return Err(NetworkError::Corrupt(format!("layer {l} has the wrong shape")));
            }
            flat.extend(w);
            flat.extend(bias);
        }
        if !r.buf.is_empty() {
            return Err(NetworkError::Corrupt("trailing bytes".into()));
        }
        let b: Vec<[f64; 3]> = b.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
        Ok(Self {
            config_echo,
            model: FieldModel {
                embedding: FourierEmbedding::from_matrix(b, sigma, seed),
                params: NetworkParams::from_flat(&sizes, flat)?,
                horizon,
            },
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), NetworkError> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, NetworkError> {
        let mut buf = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut buf)?;
        Self::from_bytes(&buf)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::NetworkConfig;

    fn sample() -> Checkpoint {
        let cfg = NetworkConfig {
            fourier_features: 4,
            depth: 2,
            width: 6,
            ..NetworkConfig::default()
        };
        Checkpoint {
            config_echo: "[network]\nwidth = 6\n".into(),
            model: FieldModel::new(&cfg, 200.0),
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let c = sample();
        let bytes = c.to_bytes();
        let back = Checkpoint::from_bytes(&bytes).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_bytes(), bytes);
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.ckpt");
        let c = sample();
        c.save(&p).unwrap();
        assert_eq!(Checkpoint::load(&p).unwrap(), c);
    }

    #[test]
    fn rejects_damaged_input() {
        let bytes = sample().to_bytes();
        assert!(matches!(Checkpoint::from_bytes(b"nope"), Err(NetworkError::BadMagic)));
        let mut v = bytes.clone();
        v[8] = 9;
        assert!(matches!(Checkpoint::from_bytes(&v), Err(NetworkError::UnsupportedVersion(9))));
        assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 3]).is_err());
        let mut long = bytes;
        long.push(0);
        assert!(Checkpoint::from_bytes(&long).is_err());
    }
}
