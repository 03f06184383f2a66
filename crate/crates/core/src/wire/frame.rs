use super::WireError;

pub const MAGIC: [u8; 4] = *b"EDLS";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 12;
const ENTRY_LEN: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u16)]
pub enum Tag {
    Params = 1,
    Metadata = 2,
    Ciphertext = 3,
    PublicKey = 4,
    RelinKey = 5,
    SecretKey = 6,
    Values = 7,
}

impl Tag {
    pub fn code(self) -> u16 {
        self as u16
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Section {
    pub tag: u16,
    pub body: Vec<u8>,
}

/// An ordered list of tagged sections. Unknown tags survive decoding and are
/// ignored by the typed readers.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Frame {
    sections: Vec<Section>,
}

impl Frame {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, tag: Tag, body: Vec<u8>) {
        self.push_raw(tag.code(), body);
    }

    pub fn push_raw(&mut self, tag: u16, body: Vec<u8>) {
        self.sections.push(Section { tag, body });
    }

    pub fn sections(&self) -> &[Section] {
        &self.sections
    }

    pub fn all(&self, tag: Tag) -> impl Iterator<Item = &[u8]> {
        self.sections
            .iter()
            .filter(move |s| s.tag == tag.code())
            .map(|s| s.body.as_slice())
    }

    pub fn has(&self, tag: Tag) -> bool {
        self.all(tag).next().is_some()
    }

    /// The single section with `tag`.
    pub fn one(&self, tag: Tag, what: &'static str) -> Result<&[u8], WireError> {
        let mut it = self.all(tag);
        let first = it.next().ok_or(WireError::MissingSection(what))?;
        if it.next().is_some() {
            return Err(WireError::BadSection(format!("duplicate {what} section")));
        }
        Ok(first)
    }

    pub fn encode(&self) -> Vec<u8> {
        let payload_len: usize = self.sections.iter().map(|s| s.body.len()).sum();
        let table_len = ENTRY_LEN * self.sections.len();
        let mut out = Vec::with_capacity(HEADER_LEN + table_len + payload_len + 4);
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&u16::try_from(self.sections.len()).expect("section count").to_le_bytes());
        out.extend_from_slice(&u32::try_from(payload_len).expect("payload below 4 GiB").to_le_bytes());
        let mut offset = 0u32;
        for s in &self.sections {
            out.extend_from_slice(&s.tag.to_le_bytes());
            out.extend_from_slice(&offset.to_le_bytes());
            out.extend_from_slice(&(s.body.len() as u32).to_le_bytes());
            offset += s.body.len() as u32;
        }
        for s in &self.sections {
            out.extend_from_slice(&s.body);
        }
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, WireError> {
        let truncated = |needed| WireError::Truncated {
            needed,
            available: bytes.len(),
        };
        if bytes.len() < HEADER_LEN + 4 {
            return Err(if bytes.len() >= 4 && bytes[..4] != MAGIC {
                WireError::BadMagic
            } else {
                truncated(HEADER_LEN + 4)
            });
        }
        if bytes[..4] != MAGIC {
            return Err(WireError::BadMagic);
        }
        let u16_at = |at: usize| u16::from_le_bytes([bytes[at], bytes[at + 1]]);
        let u32_at = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes"));
        let count = u16_at(6) as usize;
        let payload_len = u32_at(8) as usize;
        let payload_start = HEADER_LEN + ENTRY_LEN * count;
        let total = payload_start + payload_len + 4;
        if bytes.len() < total {
            return Err(truncated(total));
        }
        if bytes.len() > total {
            return Err(WireError::BadSection(format!(
                "{} trailing bytes after the checksum",
                bytes.len() - total
            )));
        }
        let stored = u32_at(total - 4);
        let computed = crc32fast::hash(&bytes[..total - 4]);
        if stored != computed {
            return Err(WireError::Checksum { stored, computed });
        }
        let version = u16_at(4);
        if version != VERSION {
            return Err(WireError::UnsupportedVersion(version));
        }
        let payload = &bytes[payload_start..payload_start + payload_len];
        let mut sections = Vec::with_capacity(count);
        for i in 0..count {
            let at = HEADER_LEN + ENTRY_LEN * i;
            let tag = u16_at(at);
            let offset = u32_at(at + 2) as usize;
            let len = u32_at(at + 6) as usize;
            let body = offset
                .checked_add(len)
                .and_then(|end| payload.get(offset..end))
                .ok_or_else(|| WireError::BadSection(format!("section {i} lies outside the payload")))?;
            sections.push(Section {
                tag,
                body: body.to_vec(),
            });
        }
        Ok(Self { sections })
    }
}

/// Bounds-checked little-endian reader over one section body.
pub(crate) struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    what: &'static str,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(buf: &'a [u8], what: &'static str) -> Self {
        Self { buf, pos: 0, what }
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8], WireError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| WireError::BadSection(format!("{} section is too short", self.what)))?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    pub(crate) fn u8(&mut self) -> Result<u8, WireError> {
        Ok(self.take(1)?[0])
    }

    pub(crate) fn u16(&mut self) -> Result<u16, WireError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    pub(crate) fn u32(&mut self) -> Result<u32, WireError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    pub(crate) fn u64(&mut self) -> Result<u64, WireError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    pub(crate) fn f64(&mut self) -> Result<f64, WireError> {
        Ok(f64::from_bits(self.u64()?))
    }

    pub(crate) fn finish(self) -> Result<(), WireError> {
        if self.pos != self.buf.len() {
            return Err(WireError::BadSection(format!(
                "{} trailing bytes in {} section",
                self.buf.len() - self.pos,
                self.what
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout() {
        let mut f = Frame::new();
        f.push(Tag::Metadata, b"{}".to_vec());
        f.push_raw(999, vec![7]);
        let bytes = f.encode();
        assert_eq!(&bytes[..4], b"EDLS");
        assert_eq!(bytes.len(), HEADER_LEN + 2 * ENTRY_LEN + 3 + 4);
        assert_eq!(Frame::decode(&bytes).unwrap(), f);
    }

    #[test]
    fn rejects_damage() {
        let mut f = Frame::new();
        f.push(Tag::Values, vec![1, 2, 3, 4]);
        let bytes = f.encode();
        for cut in 0..bytes.len() {
            assert!(Frame::decode(&bytes[..cut]).is_err(), "cut {cut}");
        }
        let mut flipped = bytes.clone();
        flipped[HEADER_LEN + ENTRY_LEN + 1] ^= 0x10;
        assert!(matches!(Frame::decode(&flipped), Err(WireError::Checksum { .. })));
        let mut versioned = bytes.clone();
        versioned[4] = 9;
        let crc = crc32fast::hash(&versioned[..versioned.len() - 4]);
        let n = versioned.len();
        versioned[n - 4..].copy_from_slice(&crc.to_le_bytes());
        assert!(matches!(Frame::decode(&versioned), Err(WireError::UnsupportedVersion(9))));
        let mut extended = bytes;
        extended.push(0);
        assert!(Frame::decode(&extended).is_err());
    }
}
