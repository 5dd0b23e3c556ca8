//! Reader and writer for the IDX binary tensor format.
//!
//! ```text
//! bytes 0-1   0x00 0x00
//! byte  2     element type (0x08 = unsigned byte)
//! byte  3     number of dimensions
//! then        one big-endian u32 per dimension
//! then        the payload, row-major
//! ```

use super::DatasetError;

pub const MAGIC_LABELS: u32 = 0x0000_0801;
pub const MAGIC_IMAGES: u32 = 0x0000_0803;

const UBYTE: u8 = 0x08;
const MAX_DIMS: usize = 4;

/// An unsigned-byte IDX tensor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxTensor {
    pub dims: Vec<usize>,
    pub data: Vec<u8>,
}

impl IdxTensor {
    pub fn magic(&self) -> u32 {
        ((UBYTE as u32) << 8) | self.dims.len() as u32
    }

    pub fn len(&self) -> usize {
        self.dims.first().copied().unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Size of one item (product of all dimensions but the first).
    pub fn item_size(&self) -> usize {
        self.dims.iter().skip(1).product()
    }

    /// Re-serialize into the exact on-disk representation.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(4 + 4 * self.dims.len() + self.data.len());
        out.extend_from_slice(&self.magic().to_be_bytes());
        for &d in &self.dims {
            out.extend_from_slice(&(d as u32).to_be_bytes());
        }
        out.extend_from_slice(&self.data);
        out
    }
}

/// Parse an unsigned-byte IDX tensor. The payload must match the declared
/// dimensions exactly.
pub fn parse_idx(bytes: &[u8]) -> Result<IdxTensor, DatasetError> {
    if bytes.len() < 4 {
        return Err(DatasetError::Truncated { expected: 4, actual: bytes.len() });
    }
    let magic = u32::from_be_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]);
    let ndims = bytes[3] as usize;
    if bytes[0] != 0 || bytes[1] != 0 || bytes[2] != UBYTE || ndims == 0 || ndims > MAX_DIMS {
        return Err(DatasetError::BadMagic(magic));
    }
    let header = 4 + 4 * ndims;
    if bytes.len() < header {
        return Err(DatasetError::Truncated { expected: header, actual: bytes.len() });
    }
    let dims: Vec<usize> =
        bytes[4..header].chunks_exact(4).map(|c| u32::from_be_bytes([c[0], c[1], c[2], c[3]]) as usize).collect();
    let payload = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .and_then(|p| p.checked_add(header).map(|_| p))
        .ok_or(DatasetError::DimensionOverflow)?;
    let actual = bytes.len() - header;
    if actual < payload {
        return Err(DatasetError::Truncated { expected: header + payload, actual: bytes.len() });
    }
    if actual > payload {
        return Err(DatasetError::TrailingBytes { extra: actual - payload });
    }
    Ok(IdxTensor { dims, data: bytes[header..].to_vec() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn header(magic: u32, dims: &[u32]) -> Vec<u8> {
        let mut v = magic.to_be_bytes().to_vec();
        for d in dims {
            v.extend_from_slice(&d.to_be_bytes());
        }
        v
    }

    #[test]
    fn parses_two_images() {
        let mut bytes = header(MAGIC_IMAGES, &[2, 28, 28]);
        bytes.extend((0..1568).map(|i| (i % 251) as u8));
        let t = parse_idx(&bytes).unwrap();
        assert_eq!(t.dims, vec![2, 28, 28]);
        assert_eq!(t.len(), 2);
        assert_eq!(t.item_size(), 784);
        assert_eq!(t.data.len(), 1568);
        assert_eq!(t.magic(), MAGIC_IMAGES);
    }

    #[test]
    fn parses_labels() {
        let mut bytes = header(MAGIC_LABELS, &[2]);
        bytes.extend([7, 3]);
        let t = parse_idx(&bytes).unwrap();
        assert_eq!(t.dims, vec![2]);
        assert_eq!(t.data, vec![7, 3]);
    }

    #[test]
    fn short_payload_is_truncated() {
        let mut bytes = header(MAGIC_IMAGES, &[2, 28, 28]);
        bytes.extend(std::iter::repeat_n(0, 100));
        assert!(matches!(parse_idx(&bytes), Err(DatasetError::Truncated { .. })));
    }

    #[test]
    fn short_header_is_truncated() {
        let bytes = header(MAGIC_IMAGES, &[2]);
        assert!(matches!(parse_idx(&bytes), Err(DatasetError::Truncated { .. })));
        assert!(matches!(parse_idx(&[0, 0]), Err(DatasetError::Truncated { .. })));
    }

    #[test]
    fn rejects_unknown_magic() {
        let mut bytes = header(0x0000_0D03, &[1, 1, 1]);
        bytes.push(0);
        assert!(matches!(parse_idx(&bytes), Err(DatasetError::BadMagic(0x0D03))));
        assert!(matches!(parse_idx(&header(0x0100_0801, &[0])), Err(DatasetError::BadMagic(_))));
        assert!(matches!(parse_idx(&header(0x0000_0800, &[])), Err(DatasetError::BadMagic(_))));
    }

    #[test]
    fn rejects_trailing_bytes() {
        let mut bytes = header(MAGIC_LABELS, &[1]);
        bytes.extend([1, 2]);
        assert!(matches!(parse_idx(&bytes), Err(DatasetError::TrailingBytes { extra: 1 })));
    }

    #[test]
    fn overflowing_dimensions_are_rejected() {
        let bytes = header(0x0000_0804, &[u32::MAX, u32::MAX, u32::MAX, u32::MAX]);
        assert!(matches!(parse_idx(&bytes), Err(DatasetError::DimensionOverflow)));
    }

    proptest! {
        #[test]
        fn reserialization_reproduces_bytes(
            dims in prop::collection::vec(1usize..6, 1..4),
            seed in any::<u64>(),
        ) {
            let n: usize = dims.iter().product();
            let mut bytes = header(0x0800 | dims.len() as u32, &dims.iter().map(|&d| d as u32).collect::<Vec<_>>());
            bytes.extend((0..n).map(|i| (seed.wrapping_mul(i as u64 + 1) >> 7) as u8));
            let t = parse_idx(&bytes).unwrap();
            prop_assert_eq!(t.to_bytes(), bytes);
        }
    }
}
