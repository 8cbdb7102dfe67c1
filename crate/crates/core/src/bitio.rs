//! Packed bit strings and their on-disk formats.
//!
//! Bit `i` of a stream is bit `i mod 8` of byte `i / 8`, counted from the most
//! significant position. Every format in this module uses that order.

use std::fmt;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Size of the read buffer used by [`read_bits`].
pub const READ_CHUNK: usize = 64 * 1024;

#[derive(Debug, Error)]
pub enum BitError {
    #[error("file not found: {0}")]
    NotFound(PathBuf),
    #[error("malformed input at byte offset {offset}: unexpected {found:?}")]
    Malformed { offset: u64, found: char },
    #[error("hex input has an odd number of digits")]
    OddHexDigits,
    #[error("input contains no bits")]
    Empty,
    #[error("block length must be at least 1")]
    ZeroBlockLength,
    #[error("unknown stream format {0:?}")]
    UnknownFormat(String),
    #[error("bad sidecar {path}: {reason}")]
    Sidecar { path: PathBuf, reason: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// An immutable-by-convention sequence of bits with an explicit length.
///
/// Pad bits in the final byte are kept at zero so that equality and hashing
/// only ever see addressable bits.
#[derive(Clone, Default, PartialEq, Eq, Hash)]
pub struct BitString {
    bytes: Vec<u8>,
    len: usize,
}

impl BitString {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(bits: usize) -> Self {
        Self {
            bytes: Vec::with_capacity(bits.div_ceil(8)),
            len: 0,
        }
    }

    /// Wrap packed bytes, keeping the first `len` bits.
    ///
    /// Panics if `bytes` holds fewer than `len` bits.
    pub fn from_bytes(mut bytes: Vec<u8>, len: usize) -> Self {
        assert!(len <= bytes.len() * 8, "bit length exceeds payload");
        bytes.truncate(len.div_ceil(8));
        let mut s = Self { bytes, len };
        s.clear_padding();
        s
    }

    /// Packs a whole byte slice, `8 * bytes.len()` bits.
    pub fn from_byte_slice(bytes: &[u8]) -> Self {
        Self {
            bytes: bytes.to_vec(),
            len: bytes.len() * 8,
        }
    }

    /// Builds from a slice of 0/1 values. Any nonzero entry counts as 1.
    pub fn from_bit_values(bits: &[u8]) -> Self {
        bits.iter().map(|&b| b != 0).collect()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Packed payload; the trailing pad bits are zero.
    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.bytes
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit index {i} out of range {}", self.len);
        (self.bytes[i >> 3] >> (7 - (i & 7))) & 1 == 1
    }

    #[inline]
    pub fn push(&mut self, bit: bool) {
        if self.len & 7 == 0 {
            self.bytes.push(0);
        }
        if bit {
            let last = self.bytes.len() - 1;
            self.bytes[last] |= 0x80 >> (self.len & 7);
        }
        self.len += 1;
    }

    /// Appends another bit string.
    pub fn extend_bits(&mut self, other: &BitString) {
        if self.len & 7 == 0 {
            self.bytes.extend_from_slice(&other.bytes);
            self.len += other.len;
            return;
        }
        for b in other.iter() {
            self.push(b);
        }
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }

    /// One byte per bit, each 0 or 1.
    pub fn to_bit_values(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.len);
        for (k, &byte) in self.bytes.iter().enumerate() {
            let take = (self.len - 8 * k).min(8);
            for j in 0..take {
                out.push((byte >> (7 - j)) & 1);
            }
        }
        out
    }

    pub fn count_ones(&self) -> usize {
        self.bytes.iter().map(|b| b.count_ones() as usize).sum()
    }

    /// Bits `[start, end)` as a new string.
    pub fn slice(&self, start: usize, end: usize) -> BitString {
        assert!(start <= end && end <= self.len, "slice out of range");
        if start & 7 == 0 {
            return BitString::from_bytes(self.bytes[start / 8..end.div_ceil(8)].to_vec(), end - start);
        }
        (start..end).map(|i| self.get(i)).collect()
    }

    pub fn truncate(&mut self, len: usize) {
        if len < self.len {
            self.len = len;
            self.bytes.truncate(len.div_ceil(8));
            self.clear_padding();
        }
    }

    /// Bitwise XOR of two equal-length strings.
    pub fn xor(&self, other: &BitString) -> BitString {
        assert_eq!(self.len, other.len, "xor of unequal lengths");
        let bytes = self.bytes.iter().zip(&other.bytes).map(|(a, b)| a ^ b).collect();
        BitString { bytes, len: self.len }
    }

    pub fn to_ascii01(&self) -> String {
        self.iter().map(|b| if b { '1' } else { '0' }).collect()
    }

    /// Parses a string of '0'/'1' characters, ignoring whitespace.
    pub fn parse_ascii01(text: &str) -> Result<BitString, BitError> {
        let mut dec = Decoder::new(StreamFormat::Ascii01);
        dec.feed(text.as_bytes(), usize::MAX)?;
        dec.finish()
    }

    fn clear_padding(&mut self) {
        let rem = self.len & 7;
        if rem != 0 {
            if let Some(last) = self.bytes.last_mut() {
                *last &= 0xFFu8 << (8 - rem);
            }
        }
    }
}

impl FromIterator<bool> for BitString {
    fn from_iter<I: IntoIterator<Item = bool>>(iter: I) -> Self {
        let iter = iter.into_iter();
        let mut s = BitString::with_capacity(iter.size_hint().0);
        for b in iter {
            s.push(b);
        }
        s
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        const SHOW: usize = 64;
        let head: String = self.iter().take(SHOW).map(|b| if b { '1' } else { '0' }).collect();
        let more = if self.len > SHOW { "…" } else { "" };
        write!(f, "BitString(n={}, {head}{more})", self.len)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StreamFormat {
    /// Packed bytes, MSB first, no header.
    RawBinary,
    /// One '0' or '1' character per bit; whitespace ignored on input.
    Ascii01,
    /// Two hex digits per byte; either case accepted, uppercase emitted.
    Hex,
}

impl FromStr for StreamFormat {
    type Err = BitError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "raw" | "raw-binary" | "bin" => Ok(Self::RawBinary),
            "ascii01" | "ascii" | "txt" => Ok(Self::Ascii01),
            "hex" => Ok(Self::Hex),
            other => Err(BitError::UnknownFormat(other.to_string())),
        }
    }
}

impl fmt::Display for StreamFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::RawBinary => "raw-binary",
            Self::Ascii01 => "ascii01",
            Self::Hex => "hex",
        })
    }
}

/// Serializes `s` in `format`. Raw and hex payloads are padded to whole
/// bytes / nibbles; the true length must travel separately.
pub fn encode(s: &BitString, format: StreamFormat) -> Vec<u8> {
    match format {
        StreamFormat::RawBinary => s.as_bytes().to_vec(),
        StreamFormat::Ascii01 => s.to_ascii01().into_bytes(),
        StreamFormat::Hex => {
            const DIGITS: &[u8; 16] = b"0123456789ABCDEF";
            let mut out = Vec::with_capacity(2 * s.as_bytes().len());
            for &byte in s.as_bytes() {
                out.push(DIGITS[(byte >> 4) as usize]);
                out.push(DIGITS[(byte & 0xF) as usize]);
            }
            out
        }
    }
}

/// Inverse of [`encode`]. `bit_len` trims padding for raw and hex payloads.
pub fn decode(payload: &[u8], format: StreamFormat, bit_len: Option<usize>) -> Result<BitString, BitError> {
    let mut dec = Decoder::new(format);
    dec.feed(payload, bit_len.unwrap_or(usize::MAX))?;
    let mut s = dec.finish_allow_empty()?;
    if let Some(n) = bit_len {
        s.truncate(n);
    }
    Ok(s)
}

/// Incremental decoder so large files can be read through a fixed buffer.
struct Decoder {
    format: StreamFormat,
    out: BitString,
    offset: u64,
    pending_nibble: Option<u8>,
}

impl Decoder {
    fn new(format: StreamFormat) -> Self {
        Self {
            format,
            out: BitString::new(),
            offset: 0,
            pending_nibble: None,
        }
    }

    fn done(&self, limit: usize) -> bool {
        self.out.len() >= limit
    }

    /// Consumes a chunk; returns true once `limit` bits are available.
    fn feed(&mut self, chunk: &[u8], limit: usize) -> Result<bool, BitError> {
        for &c in chunk {
            if self.done(limit) {
                return Ok(true);
            }
            match self.format {
                StreamFormat::RawBinary => {
                    let room = limit - self.out.len();
                    if room >= 8 && self.out.len() & 7 == 0 {
                        self.out.bytes.push(c);
                        self.out.len += 8;
                    } else {
                        for j in 0..8.min(room) {
                            self.out.push((c >> (7 - j)) & 1 == 1);
                        }
                    }
                }
                StreamFormat::Ascii01 => match c {
                    b'0' => self.out.push(false),
                    b'1' => self.out.push(true),
                    c if c.is_ascii_whitespace() => {}
                    c => {
                        return Err(BitError::Malformed {
                            offset: self.offset,
                            found: c as char,
                        })
                    }
                },
                StreamFormat::Hex => {
                    if c.is_ascii_whitespace() {
                        self.offset += 1;
                        continue;
                    }
                    let v = (c as char).to_digit(16).ok_or(BitError::Malformed {
                        offset: self.offset,
                        found: c as char,
                    })? as u8;
                    match self.pending_nibble.take() {
                        None => self.pending_nibble = Some(v),
                        Some(hi) => {
                            let byte = (hi << 4) | v;
                            let room = limit - self.out.len();
                            for j in 0..8.min(room) {
                                self.out.push((byte >> (7 - j)) & 1 == 1);
                            }
                        }
                    }
                }
            }
            self.offset += 1;
        }
        Ok(self.done(limit))
    }

    fn finish_allow_empty(self) -> Result<BitString, BitError> {
        if self.pending_nibble.is_some() {
            return Err(BitError::OddHexDigits);
        }
        Ok(self.out)
    }

    fn finish(self) -> Result<BitString, BitError> {
        let s = self.finish_allow_empty()?;
        if s.is_empty() {
            return Err(BitError::Empty);
        }
        Ok(s)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Sidecar {
    bits: usize,
    format: StreamFormat,
}

/// Path of the length sidecar written next to raw and hex payloads.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".meta.json");
    PathBuf::from(name)
}

fn read_sidecar(path: &Path) -> Result<Option<usize>, BitError> {
    let side = sidecar_path(path);
    let text = match std::fs::read_to_string(&side) {
        Ok(t) => t,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(e.into()),
    };
    let meta: Sidecar = serde_json::from_str(&text).map_err(|e| BitError::Sidecar {
        path: side,
        reason: e.to_string(),
    })?;
    Ok(Some(meta.bits))
}

/// Reads up to `max_bits` bits from `path`.
///
/// The file is consumed through a fixed [`READ_CHUNK`] buffer. For raw and
/// hex files a `<path>.meta.json` sidecar, when present, supplies the true
/// bit length.
pub fn read_bits(path: &Path, format: StreamFormat, max_bits: Option<usize>) -> Result<BitString, BitError> {
    let file = File::open(path).map_err(|e| match e.kind() {
        io::ErrorKind::NotFound => BitError::NotFound(path.to_path_buf()),
        _ => BitError::Io(e),
    })?;
    let mut limit = max_bits.unwrap_or(usize::MAX);
    if format != StreamFormat::Ascii01 {
        if let Some(n) = read_sidecar(path)? {
            limit = limit.min(n);
        }
    }
    let mut reader = BufReader::with_capacity(READ_CHUNK, file);
    let mut buf = vec![0u8; READ_CHUNK];
    let mut dec = Decoder::new(format);
    loop {
        let got = reader.read(&mut buf)?;
        if got == 0 {
            break;
        }
        if dec.feed(&buf[..got], limit)? {
            // limit reached; a dangling hex nibble past it is irrelevant
            dec.pending_nibble = None;
            break;
        }
    }
    dec.finish()
}

/// Writes `s` to `path`; raw and hex outputs also get a length sidecar.
pub fn write_bits(s: &BitString, path: &Path, format: StreamFormat) -> Result<(), BitError> {
    if s.is_empty() {
        return Err(BitError::Empty);
    }
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&encode(s, format))?;
    w.flush()?;
    if format != StreamFormat::Ascii01 {
        let meta = Sidecar { bits: s.len(), format };
        std::fs::write(
            sidecar_path(path),
            serde_json::to_string_pretty(&meta).expect("sidecar serializes"),
        )?;
    }
    Ok(())
}

/// Full blocks produced by [`split_blocks`] plus the discarded tail size.
#[derive(Debug, Clone)]
pub struct Blocks {
    pub blocks: Vec<BitString>,
    pub discarded: usize,
}

/// Splits `s` into `floor(n / block_len)` consecutive blocks; the tail is
/// dropped rather than padded.
pub fn split_blocks(s: &BitString, block_len: usize) -> Result<Blocks, BitError> {
    if block_len == 0 {
        return Err(BitError::ZeroBlockLength);
    }
    let count = s.len() / block_len;
    let blocks = (0..count)
        .map(|k| s.slice(k * block_len, (k + 1) * block_len))
        .collect();
    Ok(Blocks {
        blocks,
        discarded: s.len() - count * block_len,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bits(text: &str) -> BitString {
        BitString::parse_ascii01(text).unwrap()
    }

    #[test]
    fn raw_byte_is_msb_first() {
        let s = decode(&[0xA5], StreamFormat::RawBinary, None).unwrap();
        assert_eq!(s.to_ascii01(), "10100101");
    }

    #[test]
    fn ascii_and_hex_decode() {
        let s = decode(b"0110", StreamFormat::Ascii01, None).unwrap();
        assert_eq!(s.len(), 4);
        assert_eq!(s.to_ascii01(), "0110");
        let h = decode(b"F0", StreamFormat::Hex, None).unwrap();
        assert_eq!(h.to_ascii01(), "11110000");
        let lower = decode(b"f0", StreamFormat::Hex, None).unwrap();
        assert_eq!(lower, h);
    }

    #[test]
    fn encode_examples() {
        assert_eq!(encode(&bits("10100101"), StreamFormat::RawBinary), vec![0xA5]);
        assert_eq!(encode(&bits("111"), StreamFormat::RawBinary), vec![0xE0]);
        assert_eq!(encode(&bits("0110"), StreamFormat::Ascii01), b"0110".to_vec());
        assert_eq!(encode(&bits("10101111"), StreamFormat::Hex), b"AF".to_vec());
    }

    #[test]
    fn malformed_reports_offset() {
        match decode(b"01 1x0", StreamFormat::Ascii01, None) {
            Err(BitError::Malformed { offset, found }) => {
                assert_eq!(offset, 4);
                assert_eq!(found, 'x');
            }
            other => panic!("expected malformed, got {other:?}"),
        }
        assert!(matches!(
            decode(b"ABC", StreamFormat::Hex, None),
            Err(BitError::OddHexDigits)
        ));
        assert!(matches!(
            decode(b"AG", StreamFormat::Hex, None),
            Err(BitError::Malformed { offset: 1, .. })
        ));
    }

    #[test]
    fn file_round_trip_with_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let s = bits("111");
        let path = dir.path().join("x.bin");
        write_bits(&s, &path, StreamFormat::RawBinary).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), vec![0xE0]);
        let meta = std::fs::read_to_string(sidecar_path(&path)).unwrap();
        assert!(meta.contains("\"bits\": 3"));
        assert_eq!(read_bits(&path, StreamFormat::RawBinary, None).unwrap(), s);
    }

    #[test]
    fn read_respects_max_bits() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.hex");
        std::fs::write(&path, "F0F0").unwrap();
        let s = read_bits(&path, StreamFormat::Hex, Some(6)).unwrap();
        assert_eq!(s.to_ascii01(), "111100");
        // a limit that lands mid-nibble-pair must not trip the odd-digit check
        std::fs::write(&path, "F0F").unwrap();
        let s = read_bits(&path, StreamFormat::Hex, Some(8)).unwrap();
        assert_eq!(s.to_ascii01(), "11110000");
    }

    #[test]
    fn read_errors() {
        let dir = tempfile::tempdir().unwrap();
        let missing = dir.path().join("nope");
        assert!(matches!(
            read_bits(&missing, StreamFormat::RawBinary, None),
            Err(BitError::NotFound(_))
        ));
        let empty = dir.path().join("empty");
        std::fs::write(&empty, "").unwrap();
        assert!(matches!(
            read_bits(&empty, StreamFormat::RawBinary, None),
            Err(BitError::Empty)
        ));
        assert!(matches!(
            write_bits(&BitString::new(), &empty, StreamFormat::Ascii01),
            Err(BitError::Empty)
        ));
    }

    #[test]
    fn streaming_read_spans_chunks() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("big.bin");
        let payload: Vec<u8> = (0..(3 * READ_CHUNK + 17)).map(|i| (i * 31 % 251) as u8).collect();
        std::fs::write(&path, &payload).unwrap();
        let s = read_bits(&path, StreamFormat::RawBinary, None).unwrap();
        assert_eq!(s.as_bytes(), &payload[..]);
        let s = read_bits(&path, StreamFormat::RawBinary, Some(8 * READ_CHUNK + 3)).unwrap();
        assert_eq!(s.len(), 8 * READ_CHUNK + 3);
    }

    #[test]
    fn split_examples() {
        let s: BitString = (0..25).map(|i| i % 3 == 0).collect();
        let b = split_blocks(&s, 10).unwrap();
        assert_eq!(b.blocks.len(), 2);
        assert_eq!(b.discarded, 5);

        let s = BitString::from_bytes(vec![0u8; (10006 * 3usize).div_ceil(8)], 10006 * 3);
        assert_eq!(split_blocks(&s, 10006).unwrap().blocks.len(), 3);

        let s: BitString = (0..9).map(|_| true).collect();
        let b = split_blocks(&s, 10).unwrap();
        assert!(b.blocks.is_empty());
        assert_eq!(b.discarded, 9);
        assert!(matches!(split_blocks(&s, 0), Err(BitError::ZeroBlockLength)));
    }

    #[test]
    fn padding_is_invisible() {
        let a = BitString::from_bytes(vec![0xFF], 3);
        let b = BitString::from_bytes(vec![0xE0], 3);
        assert_eq!(a, b);
        assert_eq!(a.count_ones(), 3);
        let mut c = a.clone();
        c.push(false);
        assert_eq!(c.to_ascii01(), "1110");
    }

    fn arb_bits() -> impl Strategy<Value = BitString> {
        proptest::collection::vec(any::<bool>(), 0..=4096).prop_map(|v| v.into_iter().collect())
    }

    proptest! {
        #[test]
        fn round_trip_all_formats(s in arb_bits()) {
            for f in [StreamFormat::RawBinary, StreamFormat::Ascii01, StreamFormat::Hex] {
                let back = decode(&encode(&s, f), f, Some(s.len())).unwrap();
                prop_assert_eq!(&back, &s);
            }
        }

        #[test]
        fn blocks_are_a_prefix(s in arb_bits(), b in 1usize..300) {
            let blocks = split_blocks(&s, b).unwrap();
            let mut joined = BitString::new();
            for blk in &blocks.blocks {
                prop_assert_eq!(blk.len(), b);
                joined.extend_bits(blk);
            }
            prop_assert_eq!(joined.len(), b * (s.len() / b));
            prop_assert_eq!(joined, s.slice(0, b * (s.len() / b)));
        }

        #[test]
        fn slice_and_extend_agree(s in arb_bits(), cut in 0usize..4096) {
            let cut = cut.min(s.len());
            let mut joined = s.slice(0, cut);
            joined.extend_bits(&s.slice(cut, s.len()));
            prop_assert_eq!(joined, s);
        }
    }
}
