//! UCI bag-of-words reader.
//!
//! `docword` files start with three header lines (`D`, `W`, `NNZ`) followed by
//! `NNZ` lines of `docId wordId count`, all ids 1-based. The matching vocabulary
//! file lists one word per line; line `i` names word `i - 1`.

use std::io::BufRead;

use crate::error::{Error, Result};

/// Caps applied while parsing so that hostile headers cannot force huge
/// allocations.
#[derive(Clone, Copy, Debug)]
pub struct Limits {
    pub max_docs: u64,
    pub max_words: u64,
    pub max_tokens: u64,
}

impl Default for Limits {
    fn default() -> Self {
        Self {
            max_docs: u32::MAX as u64,
            max_words: u32::MAX as u64,
            max_tokens: u32::MAX as u64,
        }
    }
}

/// Parsed contents of a docword stream, with counts already expanded into one
/// `(doc, word)` pair per token, in file order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Docword {
    pub num_docs: usize,
    pub num_words: usize,
    pub docs: Vec<u32>,
    pub words: Vec<u32>,
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

struct Lines<R> {
    inner: R,
    buf: String,
    line: usize,
}

impl<R: BufRead> Lines<R> {
    /// Next non-blank line, trimmed, with its 1-based line number.
    fn next_content(&mut self) -> Result<Option<(usize, &str)>> {
        loop {
            self.buf.clear();
            let n = self.inner.read_line(&mut self.buf).map_err(|e| {
                if e.kind() == std::io::ErrorKind::InvalidData {
                    parse_err(self.line + 1, "invalid UTF-8")
                } else {
                    Error::Io(e)
                }
            })?;
            if n == 0 {
                return Ok(None);
            }
            self.line += 1;
            if !self.buf.trim().is_empty() {
                return Ok(Some((self.line, self.buf.trim())));
            }
        }
    }
}

fn parse_u64(field: &str, line: usize, what: &str) -> Result<u64> {
    field
        .parse::<u64>()
        .map_err(|_| parse_err(line, format!("expected {what}, found {field:?}")))
}

fn header(lines: &mut Lines<impl BufRead>, what: &str) -> Result<u64> {
    let line = lines.line + 1;
    let (line, text) = lines
        .next_content()?
        .ok_or_else(|| parse_err(line, format!("missing header line {what}")))?;
    let mut fields = text.split_whitespace();
    let value = parse_u64(fields.next().unwrap_or_default(), line, what)?;
    if fields.next().is_some() {
        return Err(parse_err(line, format!("trailing data after {what}")));
    }
    Ok(value)
}

/// Parses a docword stream under the given limits.
pub fn parse_docword<R: BufRead>(reader: R, limits: Limits) -> Result<Docword> {
    let mut lines = Lines {
        inner: reader,
        buf: String::new(),
        line: 0,
    };
    let num_docs = header(&mut lines, "document count D")?;
    let num_words = header(&mut lines, "vocabulary size W")?;
    let nnz = header(&mut lines, "entry count NNZ")?;
    if num_docs > limits.max_docs {
        return Err(Error::Validation(format!(
            "D = {num_docs} exceeds limit {}",
            limits.max_docs
        )));
    }
    if num_words > limits.max_words {
        return Err(Error::Validation(format!(
            "W = {num_words} exceeds limit {}",
            limits.max_words
        )));
    }

    let mut out = Docword {
        num_docs: num_docs as usize,
        num_words: num_words as usize,
        ..Default::default()
    };
    let mut total: u64 = 0;
    for _ in 0..nnz {
        let expected = lines.line + 1;
        let (line, text) = lines
            .next_content()?
            .ok_or_else(|| parse_err(expected, format!("expected {nnz} entries, input ended")))?;
        let mut fields = text.split_whitespace();
        let mut next = |what: &str| -> Result<u64> {
            let f = fields
                .next()
                .ok_or_else(|| parse_err(line, format!("missing {what}")))?;
            parse_u64(f, line, what)
        };
        let doc = next("docId")?;
        let word = next("wordId")?;
        let count = next("count")?;
        if fields.next().is_some() {
            return Err(parse_err(line, "expected exactly three fields"));
        }
        if doc == 0 || doc > num_docs {
            return Err(Error::Validation(format!(
                "line {line}: docId {doc} outside 1..={num_docs}"
            )));
        }
        if word == 0 || word > num_words {
            return Err(Error::Validation(format!(
                "line {line}: wordId {word} outside 1..={num_words}"
            )));
        }
        total = total.saturating_add(count);
        if total > limits.max_tokens {
            return Err(Error::Validation(format!(
                "line {line}: token total exceeds limit {}",
                limits.max_tokens
            )));
        }
        for _ in 0..count {
            out.docs.push((doc - 1) as u32);
            out.words.push((word - 1) as u32);
        }
    }
    if lines.next_content()?.is_some() {
        return Err(parse_err(
            lines.line,
            format!("more than NNZ = {nnz} entries"),
        ));
    }
    Ok(out)
}

/// Reads a vocabulary stream, one word per line. Trailing blank lines are
/// ignored; interior blank lines are kept as empty words so ids stay aligned.
pub fn parse_vocab<R: BufRead>(reader: R) -> Result<Vec<String>> {
    let mut words = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| {
            if e.kind() == std::io::ErrorKind::InvalidData {
                parse_err(i + 1, "invalid UTF-8")
            } else {
                Error::Io(e)
            }
        })?;
        words.push(line.trim_end_matches('\r').to_string());
    }
    while words.last().is_some_and(|w| w.trim().is_empty()) {
        words.pop();
    }
    Ok(words)
}
