//! 16+16 bit pair packing used for CSR entries and per-token top-topic metadata.

use crate::error::{Error, Result};

/// Two 16-bit halves stored in one 32-bit word, high half first.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(transparent)]
pub struct PackedEntry(pub u32);

impl PackedEntry {
    pub const MAX_HALF: u32 = u16::MAX as u32;

    pub fn pack(hi: u32, lo: u32) -> Result<Self> {
        if hi > Self::MAX_HALF {
            return Err(Error::PackOverflow { value: hi });
        }
        if lo > Self::MAX_HALF {
            return Err(Error::PackOverflow { value: lo });
        }
        Ok(Self((hi << 16) | lo))
    }

    /// Packs without range checks; callers guarantee both halves are < 2^16.
    #[inline]
    pub(crate) fn pack_unchecked(hi: u32, lo: u32) -> Self {
        debug_assert!(hi <= Self::MAX_HALF && lo <= Self::MAX_HALF);
        Self((hi << 16) | lo)
    }

    #[inline]
    pub fn hi(self) -> u32 {
        self.0 >> 16
    }

    #[inline]
    pub fn lo(self) -> u32 {
        self.0 & 0xffff
    }

    #[inline]
    pub fn unpack(self) -> (u32, u32) {
        (self.hi(), self.lo())
    }

    #[inline]
    pub fn bits(self) -> u32 {
        self.0
    }
}
