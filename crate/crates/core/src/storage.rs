//! Binary index file.
//!
//! All integers and floats are little-endian.
//!
//! ```text
//! magic            4 bytes  "CTXS"
//! version          u16
//! dims             u32
//! seed             u64
//! vocab_size       u64
//! entity_count     u64
//! sample_size      u32      background sample size
//! entity table     entity_count x {
//!                    kind u8 (0 term, 1 author, 2 journal, 3 dewey)
//!                    key_len u32, key UTF-8 bytes
//!                    norm f32, mu f32, sigma f32
//!                    active u8 (0 or 1)
//!                  }
//! matrix           entity_count x dims f32, row-major
//! crc32            u32      IEEE CRC-32 of every preceding byte
//! ```

use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::Path;

use crate::entity::{EntityId, EntityKind};
use crate::error::{Error, Result};
use crate::index::{Background, BackgroundStats, SemanticIndex};
use crate::projector::ProjectorConfig;

pub const MAGIC: &[u8; 4] = b"CTXS";
pub const FORMAT_VERSION: u16 = 1;
pub const HEADER_LEN: usize = 4 + 2 + 4 + 8 + 8 + 8 + 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IndexHeader {
    pub version: u16,
    pub dims: u32,
    pub seed: u64,
    pub vocab_size: u64,
    pub entity_count: u64,
    pub sample_size: u32,
}

impl IndexHeader {
    fn of(index: &SemanticIndex) -> Self {
        let c = index.config();
        IndexHeader {
            version: FORMAT_VERSION,
            dims: c.dims as u32,
            seed: c.seed,
            vocab_size: c.vocab_size,
            entity_count: index.len() as u64,
            sample_size: index.background_stats().sample_size,
        }
    }

    fn encode(&self) -> [u8; HEADER_LEN] {
        let mut b = [0u8; HEADER_LEN];
        b[0..4].copy_from_slice(MAGIC);
        b[4..6].copy_from_slice(&self.version.to_le_bytes());
        b[6..10].copy_from_slice(&self.dims.to_le_bytes());
        b[10..18].copy_from_slice(&self.seed.to_le_bytes());
        b[18..26].copy_from_slice(&self.vocab_size.to_le_bytes());
        b[26..34].copy_from_slice(&self.entity_count.to_le_bytes());
        b[34..38].copy_from_slice(&self.sample_size.to_le_bytes());
        b
    }

    /// Checks magic and version; needs at least the first six bytes.
    fn decode(b: &[u8]) -> Result<Self> {
        if b.len() < 6 {
            return Err(Error::CorruptIndex("file too short for header".into()));
        }
        if &b[0..4] != MAGIC {
            return Err(Error::CorruptIndex("bad magic".into()));
        }
        let version = u16::from_le_bytes([b[4], b[5]]);
        if version != FORMAT_VERSION {
            return Err(Error::VersionMismatch { found: version, expected: FORMAT_VERSION });
        }
        if b.len() < HEADER_LEN {
            return Err(Error::CorruptIndex("truncated header".into()));
        }
        let mut c = Cursor::new(&b[6..HEADER_LEN]);
        Ok(IndexHeader {
            version,
            dims: c.u32()?,
            seed: c.u64()?,
            vocab_size: c.u64()?,
            entity_count: c.u64()?,
            sample_size: c.u32()?,
        })
    }
}

struct CrcWriter<W> {
    inner: W,
    hasher: crc32fast::Hasher,
}

impl<W: Write> Write for CrcWriter<W> {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        let n = self.inner.write(buf)?;
        self.hasher.update(&buf[..n]);
        Ok(n)
    }

    fn flush(&mut self) -> io::Result<()> {
        self.inner.flush()
    }
}

/// Serializes an index to any writer.
pub fn write_index<W: Write>(index: &SemanticIndex, writer: W) -> Result<()> {
    let mut w = CrcWriter { inner: writer, hasher: crc32fast::Hasher::new() };
    w.write_all(&IndexHeader::of(index).encode())?;
    for i in 0..index.len() {
        let e = index.entity(i);
        let bg = index.background(i);
        let key = e.key.as_bytes();
        let key_len = u32::try_from(key.len())
            .map_err(|_| Error::InvalidConfig(format!("entity key of {} bytes is too long", key.len())))?;
        w.write_all(&[e.kind.to_byte()])?;
        w.write_all(&key_len.to_le_bytes())?;
        w.write_all(key)?;
        w.write_all(&index.norm(i).to_le_bytes())?;
        w.write_all(&bg.mu.to_le_bytes())?;
        w.write_all(&bg.sigma.to_le_bytes())?;
        w.write_all(&[u8::from(index.is_active(i))])?;
    }
    let mut buf = Vec::with_capacity(index.dims() * 4);
    for row in index.matrix().chunks(index.dims().max(1)) {
        buf.clear();
        for v in row {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    let crc = w.hasher.clone().finalize();
    w.inner.write_all(&crc.to_le_bytes())?;
    w.inner.flush()?;
    Ok(())
}

pub fn save(index: &SemanticIndex, path: impl AsRef<Path>) -> Result<()> {
    let file = File::create(path)?;
    write_index(index, BufWriter::new(file))
}

pub fn load(path: impl AsRef<Path>) -> Result<SemanticIndex> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    from_bytes(&bytes)
}

/// Reads only the fixed-size header.
pub fn read_header(path: impl AsRef<Path>) -> Result<IndexHeader> {
    let mut buf = Vec::with_capacity(HEADER_LEN);
    File::open(path)?.take(HEADER_LEN as u64).read_to_end(&mut buf)?;
    IndexHeader::decode(&buf)
}

pub fn from_bytes(bytes: &[u8]) -> Result<SemanticIndex> {
    let header = IndexHeader::decode(bytes)?;
    if bytes.len() < HEADER_LEN + 4 {
        return Err(Error::CorruptIndex("truncated file".into()));
    }
    let (body, trailer) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(trailer.try_into().expect("4-byte trailer"));
    if crc32fast::hash(body) != stored {
        return Err(Error::CorruptIndex("checksum mismatch".into()));
    }

    let dims = header.dims as usize;
    let n = usize::try_from(header.entity_count)
        .map_err(|_| Error::CorruptIndex("entity count overflows".into()))?;
    if dims == 0 {
        return Err(Error::CorruptIndex("zero dims".into()));
    }
    let mut c = Cursor::new(&body[HEADER_LEN..]);
    // Each table entry takes at least 18 bytes.
    if n > c.remaining() / 18 {
        return Err(Error::CorruptIndex("entity count exceeds file size".into()));
    }
    let mut entities = Vec::with_capacity(n);
    let mut norms = Vec::with_capacity(n);
    let mut active = Vec::with_capacity(n);
    let mut background = Vec::with_capacity(n);
    for _ in 0..n {
        let kind = EntityKind::from_byte(c.u8()?)
            .ok_or_else(|| Error::CorruptIndex("unknown entity kind".into()))?;
        let len = c.u32()? as usize;
        let key = std::str::from_utf8(c.take(len)?)
            .map_err(|_| Error::CorruptIndex("entity key is not UTF-8".into()))?
            .to_string();
        entities.push(EntityId::new(kind, key));
        norms.push(c.f32()?);
        background.push(Background { mu: c.f32()?, sigma: c.f32()? });
        active.push(match c.u8()? {
            0 => false,
            1 => true,
            _ => return Err(Error::CorruptIndex("bad active flag".into())),
        });
    }
    let cells = n
        .checked_mul(dims)
        .ok_or_else(|| Error::CorruptIndex("matrix size overflows".into()))?;
    if c.remaining() != cells * 4 {
        return Err(Error::CorruptIndex(format!(
            "matrix section holds {} bytes, expected {}",
            c.remaining(),
            cells * 4
        )));
    }
    let matrix: Vec<f32> = c
        .take(cells * 4)?
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().expect("4-byte chunk")))
        .collect();

    let config = ProjectorConfig { seed: header.seed, dims, vocab_size: header.vocab_size };
    SemanticIndex::from_parts(
        config,
        entities,
        matrix,
        norms,
        active,
        BackgroundStats { sample_size: header.sample_size, per_entity: background },
    )
    .map_err(|e| Error::CorruptIndex(e.to_string()))
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Cursor { buf, pos: 0 }
    }

    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if n > self.remaining() {
            return Err(Error::CorruptIndex("unexpected end of data".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_index() -> SemanticIndex {
        let config = ProjectorConfig { seed: 77, dims: 3, vocab_size: 40 };
        let entities = vec![
            EntityId::term("neural network"),
            EntityId::author("lee k"),
            EntityId::journal("1234-5678"),
            EntityId::dewey("006"),
        ];
        let m = vec![1.0, 2.0, 3.0, -1.0, 0.5, 0.0, 0.0, 0.0, 0.0, 4.0, 4.0, -4.0];
        SemanticIndex::from_rows(config, entities, m).unwrap().with_background(3, 1).unwrap()
    }

    fn encode(index: &SemanticIndex) -> Vec<u8> {
        let mut buf = Vec::new();
        write_index(index, &mut buf).unwrap();
        buf
    }

    #[test]
    fn round_trip() {
        let idx = small_index();
        let bytes = encode(&idx);
        let back = from_bytes(&bytes).unwrap();
        assert_eq!(back, idx);
        assert_eq!(encode(&back), bytes);
    }

    #[test]
    fn layout_of_header() {
        let bytes = encode(&small_index());
        assert_eq!(&bytes[..4], b"CTXS");
        assert_eq!(u16::from_le_bytes([bytes[4], bytes[5]]), 1);
        let h = IndexHeader::decode(&bytes).unwrap();
        assert_eq!((h.dims, h.seed, h.vocab_size, h.entity_count, h.sample_size), (3, 77, 40, 4, 3));
        // first entity: kind byte then length-prefixed key
        assert_eq!(bytes[HEADER_LEN], 0);
        assert_eq!(&bytes[HEADER_LEN + 1..HEADER_LEN + 5], &14u32.to_le_bytes());
        assert_eq!(&bytes[HEADER_LEN + 5..HEADER_LEN + 19], b"neural network");
    }

    #[test]
    fn corruption_is_detected() {
        let bytes = encode(&small_index());
        for cut in [0, 3, 5, 20, HEADER_LEN + 2, bytes.len() - 1] {
            assert!(matches!(from_bytes(&bytes[..cut]), Err(Error::CorruptIndex(_))), "cut at {cut}");
        }
        let mut flipped = bytes.clone();
        flipped[HEADER_LEN + 8] ^= 0x40;
        assert!(matches!(from_bytes(&flipped), Err(Error::CorruptIndex(_))));
        let mut magic = bytes.clone();
        magic[0] = b'X';
        assert!(matches!(from_bytes(&magic), Err(Error::CorruptIndex(_))));
        let mut version = bytes;
        version[4] = 9;
        assert!(matches!(from_bytes(&version), Err(Error::VersionMismatch { found: 9, .. })));
    }
}
