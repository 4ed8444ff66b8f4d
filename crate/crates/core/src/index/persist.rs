//! Binary index file.
//!
//! Little-endian layout:
//!
//! ```text
//! magic "PDIX" | version u16 | kind u8 (0 flat, 1 ivf) | dim u32 | count u64
//! [ivf: nlist u32 | centroids nlist*dim f32 | list offsets (nlist+1) u64]
//! vectors count*dim f32 (row-major, storage order)
//! ids: count * (len u32 | UTF-8 bytes)
//! CRC-32 (IEEE) of every preceding byte, u32
//! ```

use std::path::Path;

use super::{IndexError, IvfLists, VectorIndex};

pub const MAGIC: &[u8; 4] = b"PDIX";
pub const FORMAT_VERSION: u16 = 1;

const KIND_FLAT: u8 = 0;
const KIND_IVF: u8 = 1;

fn corrupt(msg: impl Into<String>) -> IndexError {
    IndexError::CorruptIndex(msg.into())
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], IndexError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| corrupt(format!("unexpected end of data at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, IndexError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, IndexError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self) -> Result<u32, IndexError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, IndexError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f32>, IndexError> {
        let bytes = self.take(n.checked_mul(4).ok_or_else(|| corrupt("size overflow"))?)?;
        Ok(bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect())
    }
}

impl VectorIndex<f32> {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(32 + self.data.len() * 4 + self.ids.len() * 16);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.push(if self.ivf.is_some() { KIND_IVF } else { KIND_FLAT });
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        out.extend_from_slice(&(self.ids.len() as u64).to_le_bytes());
        if let Some(l) = &self.ivf {
            out.extend_from_slice(&(l.nlist() as u32).to_le_bytes());
            for c in &l.centroids {
                out.extend_from_slice(&c.to_le_bytes());
            }
            for o in &l.offsets {
                out.extend_from_slice(&o.to_le_bytes());
            }
        }
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for id in &self.ids {
            out.extend_from_slice(&(id.len() as u32).to_le_bytes());
            out.extend_from_slice(id.as_bytes());
        }
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    /// Parses an index file image. A loaded IVF index scans one list per
    /// query until [`set_nprobe`](Self::set_nprobe) is called.
    pub fn from_bytes(buf: &[u8]) -> Result<Self, IndexError> {
        if buf.len() < MAGIC.len() + 2 + 1 + 4 + 8 + 4 {
            return Err(corrupt(format!("file too short ({} bytes)", buf.len())));
        }
        if &buf[..4] != MAGIC {
            return Err(corrupt("bad magic"));
        }
        let (body, tail) = buf.split_at(buf.len() - 4);
        let stored = u32::from_le_bytes(tail.try_into().expect("4 bytes"));
        if crc32fast::hash(body) != stored {
            return Err(corrupt("checksum mismatch"));
        }

        let mut r = Reader { buf: body, pos: 4 };
        let version = r.u16()?;
        if version != FORMAT_VERSION {
            return Err(corrupt(format!("unsupported format version {version}")));
        }
        let kind = r.u8()?;
        let dim = r.u32()? as usize;
        let count = usize::try_from(r.u64()?).map_err(|_| corrupt("count overflow"))?;
        if dim == 0 {
            return Err(corrupt("zero dimension"));
        }
        let ivf = match kind {
            KIND_FLAT => None,
            KIND_IVF => {
                let nlist = r.u32()? as usize;
                if nlist == 0 {
                    return Err(corrupt("IVF index with zero lists"));
                }
                let centroids = r.f32s(nlist * dim)?;
                let offsets = (0..=nlist).map(|_| r.u64()).collect::<Result<Vec<_>, _>>()?;
                if offsets[0] != 0
                    || offsets.windows(2).any(|w| w[0] > w[1])
                    || offsets[nlist] != count as u64
                {
                    return Err(corrupt("inconsistent list offsets"));
                }
                Some(IvfLists {
                    centroids,
                    offsets,
                    nprobe: 1,
                })
            }
            other => return Err(corrupt(format!("unknown index kind {other}"))),
        };
        let data = r.f32s(count.checked_mul(dim).ok_or_else(|| corrupt("size overflow"))?)?;
        let mut ids = Vec::with_capacity(count);
        for _ in 0..count {
            let len = r.u32()? as usize;
            let bytes = r.take(len)?;
            ids.push(
                std::str::from_utf8(bytes)
                    .map_err(|_| corrupt("id is not UTF-8"))?
                    .to_string(),
            );
        }
        if r.pos != body.len() {
            return Err(corrupt(format!("{} trailing bytes", body.len() - r.pos)));
        }
        Ok(Self::from_parts(dim, ids, data, ivf))
    }

    pub fn save(&self, path: &Path) -> Result<(), IndexError> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, IndexError> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::EmbeddingVector;
    use crate::index::IndexConfig;

    fn small(kind_ivf: bool) -> VectorIndex {
        let rows: Vec<(String, EmbeddingVector)> = (0..12)
            .map(|i| {
                let a = i as f32 * 0.5;
                (format!("id{i:02}"), EmbeddingVector::from_unnormalized(&[a.cos() as f64, a.sin() as f64, 0.1]))
            })
            .collect();
        let cfg = if kind_ivf {
            IndexConfig::ivf(3, 3, 2, 9)
        } else {
            IndexConfig::flat(3)
        };
        VectorIndex::build(&rows, &cfg).unwrap()
    }

    #[test]
    fn header_layout() {
        let b = small(false).to_bytes();
        assert_eq!(&b[..4], b"PDIX");
        assert_eq!(u16::from_le_bytes([b[4], b[5]]), 1);
        assert_eq!(b[6], 0);
        assert_eq!(u32::from_le_bytes(b[7..11].try_into().unwrap()), 3);
        assert_eq!(u64::from_le_bytes(b[11..19].try_into().unwrap()), 12);
        let b = small(true).to_bytes();
        assert_eq!(b[6], 1);
        assert_eq!(u32::from_le_bytes(b[19..23].try_into().unwrap()), 3);
    }

    #[test]
    fn round_trip_bytes() {
        for ivf in [false, true] {
            let idx = small(ivf);
            let bytes = idx.to_bytes();
            let back = VectorIndex::from_bytes(&bytes).unwrap();
            assert_eq!(back.to_bytes(), bytes);
        }
    }

    #[test]
    fn truncation_and_bitflips_rejected() {
        let bytes = small(true).to_bytes();
        for cut in [0, 3, 10, bytes.len() / 2, bytes.len() - 1] {
            assert!(matches!(
                VectorIndex::from_bytes(&bytes[..cut]),
                Err(IndexError::CorruptIndex(_))
            ));
        }
        let mut flipped = bytes.clone();
        flipped[40] ^= 0x01;
        assert!(matches!(VectorIndex::from_bytes(&flipped), Err(IndexError::CorruptIndex(_))));
        let mut magic = bytes;
        magic[0] = b'X';
        assert!(matches!(VectorIndex::from_bytes(&magic), Err(IndexError::CorruptIndex(_))));
    }
}
