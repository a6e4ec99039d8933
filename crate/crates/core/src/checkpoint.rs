//! Binary topic-assignment checkpoints.
//!
//! Layout, all integers little-endian:
//!
//! | offset | size | field                          |
//! |--------|------|--------------------------------|
//! | 0      | 8    | magic `SKLDACKP`               |
//! | 8      | 4    | format version (1)             |
//! | 12     | 4    | K                              |
//! | 16     | 4    | V                              |
//! | 20     | 4    | dense word count               |
//! | 24     | 4    | completed iterations           |
//! | 28     | 8    | N (tokens)                     |
//! | 36     | 2·N  | topic of each token, `u16`     |
//!
//! Topics are stored in global token order, i.e. the order in which the UCI
//! docword file expands into tokens. Only the topic array is stored; counts
//! are rebuilt from it on load.

use std::io::{Read, Write};

use crate::corpus::MAX_TOPICS;
use crate::error::{Error, Result};

pub const MAGIC: [u8; 8] = *b"SKLDACKP";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 36;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Checkpoint {
    pub topics_k: u32,
    pub num_words: u32,
    pub dense_words: u32,
    pub iteration: u32,
    pub topics: Vec<u32>,
}

impl Checkpoint {
    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        self.check()?;
        let mut header = Vec::with_capacity(HEADER_LEN);
        header.extend_from_slice(&MAGIC);
        header.extend_from_slice(&VERSION.to_le_bytes());
        header.extend_from_slice(&self.topics_k.to_le_bytes());
        header.extend_from_slice(&self.num_words.to_le_bytes());
        header.extend_from_slice(&self.dense_words.to_le_bytes());
        header.extend_from_slice(&self.iteration.to_le_bytes());
        header.extend_from_slice(&(self.topics.len() as u64).to_le_bytes());
        out.write_all(&header)?;
        let body: Vec<u8> = self
            .topics
            .iter()
            .flat_map(|&t| (t as u16).to_le_bytes())
            .collect();
        out.write_all(&body)?;
        out.flush()?;
        Ok(())
    }

    /// Decodes a checkpoint, rejecting bad magic, unknown versions,
    /// truncated or oversized bodies and out-of-range topics.
    pub fn read<R: Read>(input: R) -> Result<Self> {
        let mut header = [0u8; HEADER_LEN];
        let mut input = input;
        input
            .read_exact(&mut header)
            .map_err(|_| Error::Checkpoint("truncated header".into()))?;
        if header[..8] != MAGIC {
            return Err(Error::Checkpoint("bad magic".into()));
        }
        let u32_at = |o: usize| u32::from_le_bytes(header[o..o + 4].try_into().unwrap());
        let version = u32_at(8);
        if version != VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {version}")));
        }
        let n = u64::from_le_bytes(header[28..36].try_into().unwrap());
        let expected = n
            .checked_mul(2)
            .ok_or_else(|| Error::Checkpoint(format!("token count {n} too large")))?;
        // read at most one byte past the declared body so a huge N cannot
        // force a huge allocation up front
        let mut body = Vec::new();
        input.take(expected.saturating_add(1)).read_to_end(&mut body)?;
        if body.len() as u64 != expected {
            return Err(Error::Checkpoint(format!(
                "body holds {} bytes, header declares {n} tokens",
                body.len()
            )));
        }
        let ckpt = Self {
            topics_k: u32_at(12),
            num_words: u32_at(16),
            dense_words: u32_at(20),
            iteration: u32_at(24),
            topics: body
                .chunks_exact(2)
                .map(|b| u16::from_le_bytes([b[0], b[1]]) as u32)
                .collect(),
        };
        ckpt.check()?;
        Ok(ckpt)
    }

    fn check(&self) -> Result<()> {
        if self.topics_k == 0 || self.topics_k > MAX_TOPICS {
            return Err(Error::Checkpoint(format!("K = {} out of range", self.topics_k)));
        }
        if self.dense_words > self.num_words {
            return Err(Error::Checkpoint(format!(
                "{} dense words exceed V = {}",
                self.dense_words, self.num_words
            )));
        }
        if let Some(bad) = self.topics.iter().find(|&&t| t >= self.topics_k) {
            return Err(Error::Checkpoint(format!("topic {bad} >= K = {}", self.topics_k)));
        }
        Ok(())
    }
}
