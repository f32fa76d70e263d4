//! EMBD binary embedding files.
//!
//! Little-endian layout: magic `EMBD`, u16 version (1), u64 n, u32 d, u32 K,
//! u32 tower boundary (0 = none), n·d f32 row-major values, n u32 labels and
//! n u8 split tags (0 train, 1 val, 2 test).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use embsurr_core::data::{EmbeddingDataset, Split};
use embsurr_core::Matrix;

use crate::{Error, Result};

pub const MAGIC: &[u8; 4] = b"EMBD";
pub const VERSION: u16 = 1;
const HEADER_LEN: u64 = 4 + 2 + 8 + 4 + 4 + 4;

pub fn write_embd<W: Write>(ds: &EmbeddingDataset, mut w: W) -> std::io::Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(ds.n() as u64).to_le_bytes())?;
    w.write_all(&(ds.d() as u32).to_le_bytes())?;
    w.write_all(&(ds.classes as u32).to_le_bytes())?;
    w.write_all(&(ds.tower_boundary.unwrap_or(0) as u32).to_le_bytes())?;
    for v in ds.x.as_slice() {
        w.write_all(&(*v as f32).to_le_bytes())?;
    }
    for &y in &ds.y {
        w.write_all(&(y as u32).to_le_bytes())?;
    }
    let tags: Vec<u8> = ds.split.iter().map(|s| s.code()).collect();
    w.write_all(&tags)?;
    w.flush()
}

/// Values are stored as f32, so saving is exact only for f32-representable
/// matrices; a loaded file always saves back to identical bytes.
pub fn save(ds: &EmbeddingDataset, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_embd(ds, BufWriter::new(file)).map_err(|e| Error::io(path, e))
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let out = self.bytes.get(self.pos..self.pos.checked_add(n)?)?;
        self.pos += n;
        Some(out)
    }

    fn array<const N: usize>(&mut self) -> Option<[u8; N]> {
        self.take(N).map(|b| b.try_into().expect("slice has length N"))
    }
}

/// Parse an EMBD image; `path` is only used in error messages.
pub fn parse_embd(bytes: &[u8], name: &str, path: &Path) -> Result<EmbeddingDataset> {
    let bad = |msg: String| Error::format(path, msg);
    let truncated = || bad("file is truncated".into());
    let mut c = Cursor { bytes, pos: 0 };
    if c.take(4) != Some(MAGIC.as_slice()) {
        return Err(bad("not an EMBD file (bad magic)".into()));
    }
    let version = u16::from_le_bytes(c.array().ok_or_else(truncated)?);
    if version != VERSION {
        return Err(bad(format!("unsupported EMBD version {version}")));
    }
    let n = u64::from_le_bytes(c.array().ok_or_else(truncated)?);
    let d = u32::from_le_bytes(c.array().ok_or_else(truncated)?) as u64;
    let k = u32::from_le_bytes(c.array().ok_or_else(truncated)?) as usize;
    let tower = u32::from_le_bytes(c.array().ok_or_else(truncated)?) as usize;
    // n * (4d + 4 + 1) payload bytes, checked before anything is allocated
    let payload = d
        .checked_mul(4)
        .and_then(|row| row.checked_add(5))
        .and_then(|row| row.checked_mul(n))
        .ok_or_else(|| bad(format!("n = {n}, d = {d} overflows")))?;
    let expected = payload.checked_add(HEADER_LEN).ok_or_else(|| bad(format!("n = {n}, d = {d} overflows")))?;
    if expected != bytes.len() as u64 {
        return Err(bad(format!("header promises {expected} bytes, file has {}", bytes.len())));
    }
    let (n, d) = (n as usize, d as usize);
    let x: Vec<f64> = c
        .take(n * d * 4)
        .ok_or_else(truncated)?
        .chunks_exact(4)
        .map(|b| f64::from(f32::from_le_bytes(b.try_into().expect("chunk of 4"))))
        .collect();
    let y: Vec<usize> = c
        .take(n * 4)
        .ok_or_else(truncated)?
        .chunks_exact(4)
        .map(|b| u32::from_le_bytes(b.try_into().expect("chunk of 4")) as usize)
        .collect();
    let split = c
        .take(n)
        .ok_or_else(truncated)?
        .iter()
        .enumerate()
        .map(|(i, &t)| Split::from_code(t).ok_or_else(|| bad(format!("row {i}: split tag {t} is not 0, 1 or 2"))))
        .collect::<Result<Vec<_>>>()?;
    let x = Matrix::from_vec(n, d, x)?;
    let tower = (tower != 0).then_some(tower);
    Ok(EmbeddingDataset::new(name, x, y, split, k, tower)?)
}

pub fn read_embd<R: Read>(mut r: R, name: &str, path: &Path) -> Result<EmbeddingDataset> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes).map_err(|e| Error::io(path, e))?;
    parse_embd(&bytes, name, path)
}

pub fn load(path: &Path) -> Result<EmbeddingDataset> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_embd(BufReader::new(file), &dataset_name(path), path)
}

pub(crate) fn dataset_name(path: &Path) -> String {
    path.file_stem().map_or_else(|| "dataset".into(), |s| s.to_string_lossy().into_owned())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> EmbeddingDataset {
        let x = Matrix::from_rows(&[vec![0.5, -1.0, 2.25], vec![3.0, 0.0, -0.125]]).unwrap();
        EmbeddingDataset::new("tiny", x, vec![1, 0], vec![Split::Train, Split::Test], 2, None).unwrap()
    }

    #[test]
    fn header_layout() {
        let mut bytes = Vec::new();
        write_embd(&tiny(), &mut bytes).unwrap();
        assert_eq!(&bytes[..4], b"EMBD");
        assert_eq!(u16::from_le_bytes([bytes[4], bytes[5]]), 1);
        assert_eq!(u64::from_le_bytes(bytes[6..14].try_into().unwrap()), 2);
        assert_eq!(bytes.len(), 26 + 2 * 3 * 4 + 2 * 4 + 2);
        assert_eq!(&bytes[bytes.len() - 2..], &[0, 2]);
    }

    #[test]
    fn rejects_bad_magic_and_version() {
        let mut bytes = Vec::new();
        write_embd(&tiny(), &mut bytes).unwrap();
        let p = Path::new("x.embd");
        let mut wrong = bytes.clone();
        wrong[0] = b'F';
        assert!(matches!(parse_embd(&wrong, "x", p), Err(Error::Format { .. })));
        bytes[4] = 2;
        assert!(parse_embd(&bytes, "x", p).unwrap_err().to_string().contains("version 2"));
    }

    #[test]
    fn rejects_overflowing_header() {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(b"EMBD");
        bytes.extend_from_slice(&1u16.to_le_bytes());
        bytes.extend_from_slice(&u64::MAX.to_le_bytes());
        bytes.extend_from_slice(&u32::MAX.to_le_bytes());
        bytes.extend_from_slice(&2u32.to_le_bytes());
        bytes.extend_from_slice(&0u32.to_le_bytes());
        assert!(parse_embd(&bytes, "x", Path::new("x")).unwrap_err().to_string().contains("overflows"));
    }

    #[test]
    fn rejects_label_beyond_k() {
        let mut bytes = Vec::new();
        write_embd(&tiny(), &mut bytes).unwrap();
        let labels = 26 + 24;
        bytes[labels..labels + 4].copy_from_slice(&5u32.to_le_bytes());
        let err = parse_embd(&bytes, "x", Path::new("x")).unwrap_err();
        assert!(matches!(err, Error::Core(embsurr_core::Error::LabelOutOfRange { label: 5, classes: 2 })));
    }
}
