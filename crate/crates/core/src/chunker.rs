//! Code chunk extraction.
//!
//! A chunk is a contiguous window of function lines around a set of edited
//! (or oracle-flagged) lines `E`. When the edits sit close together
//! (`max(E) - min(E) <= 10`) the window is widened by `n` lines on each side
//! and clamped to the function; otherwise only `[min(E), max(E)]` is kept.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::patch::{FunctionSource, Language, LineSpan, Origin, PatchHunk};

/// Lines of context added on each side by default.
pub const DEFAULT_EXTENSION: usize = 3;
/// Largest `max(E) - min(E)` that still receives context lines.
pub const SPREAD_LIMIT: usize = 10;
pub const NEGATIVE_MIN_LINES: usize = 5;
pub const NEGATIVE_MAX_LINES: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ChunkError {
    #[error("hunk starts at line {start} but the function has only {len} lines")]
    WindowOutOfBounds { start: usize, len: usize },
    #[error("edit set is empty")]
    EmptyEditSet,
    #[error("edited line {index} is outside a {len}-line function")]
    EditOutOfBounds { index: usize, len: usize },
    #[error("function has {len} lines, fewer than the {min} required")]
    FunctionTooShort { len: usize, min: usize },
    #[error("invalid negative length bounds [{min}, {max}]")]
    InvalidLengthBounds { min: usize, max: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ChunkVariant {
    Raw,
    Generic,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeChunk {
    pub text_lines: Vec<String>,
    pub span: LineSpan,
    pub variant: ChunkVariant,
    pub language: Language,
    pub source_origin: Origin,
}

impl CodeChunk {
    fn slice(f: &FunctionSource, span: LineSpan) -> Self {
        CodeChunk {
            text_lines: f.lines()[span.start..span.end_exclusive].to_vec(),
            span,
            variant: ChunkVariant::Raw,
            language: f.language(),
            source_origin: f.origin().clone(),
        }
    }

    pub fn text(&self) -> String {
        self.text_lines.join("\n")
    }

    pub fn len(&self) -> usize {
        self.text_lines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.text_lines.is_empty()
    }

    /// Map function-local indices into this chunk's local frame, dropping
    /// those that fall outside it.
    pub fn to_local(&self, indices: impl IntoIterator<Item = usize>) -> BTreeSet<usize> {
        indices
            .into_iter()
            .filter(|&i| self.span.contains(i))
            .map(|i| i - self.span.start)
            .collect()
    }
}

/// Sorted, non-empty set of 0-based line indices into a function.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct EditSet(BTreeSet<usize>);

impl EditSet {
    pub fn new(indices: impl IntoIterator<Item = usize>) -> Result<Self, ChunkError> {
        let set: BTreeSet<usize> = indices.into_iter().collect();
        if set.is_empty() {
            return Err(ChunkError::EmptyEditSet);
        }
        Ok(EditSet(set))
    }

    pub fn min(&self) -> usize {
        *self.0.first().expect("non-empty")
    }

    pub fn max(&self) -> usize {
        *self.0.last().expect("non-empty")
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    pub fn as_set(&self) -> &BTreeSet<usize> {
        &self.0
    }
}

impl TryFrom<Vec<usize>> for EditSet {
    type Error = ChunkError;

    fn try_from(v: Vec<usize>) -> Result<Self, Self::Error> {
        EditSet::new(v)
    }
}

impl From<EditSet> for Vec<usize> {
    fn from(e: EditSet) -> Self {
        e.0.into_iter().collect()
    }
}

fn same_line(a: &str, b: &str) -> bool {
    a.trim_end() == b.trim_end()
}

/// Indices of `f` holding the hunk's removed lines at their expected
/// positions. Lines that differ (ignoring trailing whitespace) or fall past
/// the end of `f` are not matched.
pub fn match_removed_lines(f: &FunctionSource, hunk: &PatchHunk) -> Result<Vec<usize>, ChunkError> {
    let start = hunk.removed_start_line();
    if start >= f.len() {
        return Err(ChunkError::WindowOutOfBounds {
            start,
            len: f.len(),
        });
    }
    let lines = f.lines();
    Ok(hunk
        .removed_positions()
        .filter(|&(i, text)| lines.get(i).is_some_and(|l| same_line(l, text)))
        .map(|(i, _)| i)
        .collect())
}

/// Window around `edits` for a function of `len` lines.
pub fn chunk_span(edits: &EditSet, n: usize, len: usize) -> LineSpan {
    let (lo, hi) = (edits.min(), edits.max());
    if hi - lo <= SPREAD_LIMIT {
        LineSpan::new(lo.saturating_sub(n), (hi + n + 1).min(len))
    } else {
        LineSpan::new(lo, hi + 1)
    }
}

/// Chunk around the removed lines of `hunk`, or `None` when none of them
/// can be found in `f` (including pure additions).
///
/// `hunk` must already be expressed in `f`'s local coordinates.
pub fn find_function_code_chunk(
    f: &FunctionSource,
    hunk: &PatchHunk,
    n: usize,
) -> Result<Option<CodeChunk>, ChunkError> {
    let matched = match_removed_lines(f, hunk)?;
    let Ok(edits) = EditSet::new(matched) else {
        return Ok(None);
    };
    Ok(Some(CodeChunk::slice(f, chunk_span(&edits, n, f.len()))))
}

/// Chunk around externally supplied line indices, for example the lines an
/// oracle flagged in a whole function.
pub fn chunk_around_lines(f: &FunctionSource, lines: &EditSet, n: usize) -> Result<CodeChunk, ChunkError> {
    if lines.max() >= f.len() {
        return Err(ChunkError::EditOutOfBounds {
            index: lines.max(),
            len: f.len(),
        });
    }
    Ok(CodeChunk::slice(f, chunk_span(lines, n, f.len())))
}

/// A random contiguous window of `min_len..=min(max_len, |f|)` lines.
/// Length and start are both uniform; the result depends only on the seed.
pub fn random_negative_chunk(
    f: &FunctionSource,
    seed: u64,
    min_len: usize,
    max_len: usize,
) -> Result<CodeChunk, ChunkError> {
    if min_len == 0 || min_len > max_len {
        return Err(ChunkError::InvalidLengthBounds {
            min: min_len,
            max: max_len,
        });
    }
    if f.len() < min_len {
        return Err(ChunkError::FunctionTooShort {
            len: f.len(),
            min: min_len,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let len = rng.random_range(min_len..=max_len.min(f.len()));
    let start = rng.random_range(0..=f.len() - len);
    Ok(CodeChunk::slice(f, LineSpan::new(start, start + len)))
}
