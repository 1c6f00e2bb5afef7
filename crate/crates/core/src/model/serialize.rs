//! Flat binary parameter blobs.
//!
//! Layout: the 8-byte magic `FSKMLP01`, one byte with the scalar width
//! (4 or 8), four little-endian `u64` dimensions `d, h1, h2, out`, then the
//! payload: every scalar of `w1, b1, w2, b2, w3, b3` in little-endian order.
//! The payload length equals [`MlpParams::byte_size`].

use crate::error::{Error, Result};
use crate::model::mlp::MlpParams;
use crate::model::real::Real;

const MAGIC: &[u8; 8] = b"FSKMLP01";
const HEADER_LEN: usize = 8 + 1 + 4 * 8;

impl<T: Real> MlpParams<T> {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.byte_size());
        out.extend_from_slice(MAGIC);
        out.push(T::PRECISION.bytes() as u8);
        for d in self.dims {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for t in self.tensors() {
            for &v in t {
                v.write_le(&mut out);
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN || &bytes[..8] != MAGIC {
            return Err(Error::format(None, "not a parameter blob"));
        }
        let width = bytes[8] as usize;
        if width != T::PRECISION.bytes() {
            return Err(Error::format(
                None,
                format!("blob has {width}-byte scalars, expected {}", T::PRECISION.bytes()),
            ));
        }
        let mut dims = [0usize; 4];
        for (i, d) in dims.iter_mut().enumerate() {
            let at = 9 + 8 * i;
            *d = u64::from_le_bytes(bytes[at..at + 8].try_into().unwrap()) as usize;
        }
        let mut p = MlpParams::<T>::zeros(dims);
        let payload = &bytes[HEADER_LEN..];
        if payload.len() != p.byte_size() {
            return Err(Error::format(
                None,
                format!("payload has {} bytes, shape needs {}", payload.len(), p.byte_size()),
            ));
        }
        let mut chunks = payload.chunks_exact(width);
        for t in p.tensors_mut() {
            for v in t.iter_mut() {
                *v = T::read_le(chunks.next().unwrap());
            }
        }
        Ok(p)
    }
}
