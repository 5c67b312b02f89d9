//! Deterministic image archive stream.
//!
//! An archive is a sequence of records, in ascending path order, with no
//! header, padding or trailer:
//!
//! ```text
//! [u32 path_len LE][path bytes, UTF-8][u64 data_len LE][data bytes]
//! ```

use std::collections::BTreeMap;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ArchiveError {
    #[error("archive truncated at byte {0}")]
    Truncated(usize),
    #[error("record path at byte {0} is not UTF-8")]
    BadPath(usize),
    #[error("duplicate path `{0}`")]
    DuplicatePath(String),
}

pub fn pack(files: &BTreeMap<String, Vec<u8>>) -> Vec<u8> {
    let size: usize = files.iter().map(|(p, d)| 12 + p.len() + d.len()).sum();
    let mut out = Vec::with_capacity(size);
    for (path, data) in files {
        out.extend_from_slice(&(path.len() as u32).to_le_bytes());
        out.extend_from_slice(path.as_bytes());
        out.extend_from_slice(&(data.len() as u64).to_le_bytes());
        out.extend_from_slice(data);
    }
    out
}

pub fn unpack(bytes: &[u8]) -> Result<BTreeMap<String, Vec<u8>>, ArchiveError> {
    let mut files = BTreeMap::new();
    let mut pos = 0usize;
    let take = |pos: &mut usize, n: usize| -> Result<&[u8], ArchiveError> {
        let end = pos
            .checked_add(n)
            .filter(|&e| e <= bytes.len())
            .ok_or(ArchiveError::Truncated(*pos))?;
        let slice = &bytes[*pos..end];
        *pos = end;
        Ok(slice)
    };
    while pos < bytes.len() {
        let path_len = u32::from_le_bytes(take(&mut pos, 4)?.try_into().expect("4 bytes")) as usize;
        let path_at = pos;
        let path = std::str::from_utf8(take(&mut pos, path_len)?)
            .map_err(|_| ArchiveError::BadPath(path_at))?
            .to_string();
        let data_len = u64::from_le_bytes(take(&mut pos, 8)?.try_into().expect("8 bytes"));
        let data_len = usize::try_from(data_len).map_err(|_| ArchiveError::Truncated(pos))?;
        let data = take(&mut pos, data_len)?.to_vec();
        if files.insert(path.clone(), data).is_some() {
            return Err(ArchiveError::DuplicatePath(path));
        }
    }
    Ok(files)
}
