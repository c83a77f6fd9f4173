//! Function sources and unified-diff patches.
//!
//! Every line index in this crate is 0-based. Unified-diff headers carry
//! 1-based line numbers; they are converted once, in [`parse_unified_diff`],
//! and [`PatchHunk::to_unified`] converts back.

use std::fmt;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

static HUNK_HEADER: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^@@ -(\d+)(?:,(\d+))? \+(\d+)(?:,(\d+))? @@").expect("hunk header regex")
});
static GIT_HEADER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^diff --git (\S+) (\S+)").expect("git header regex"));
static COMMIT_LINE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^(?:commit ([0-9a-fA-F]{7,64})\b|From ([0-9a-fA-F]{40}) )").expect("commit regex")
});

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PatchError {
    #[error("line {line}: malformed hunk header `{text}`")]
    MalformedHunkHeader { line: usize, text: String },
    #[error("line {line}: hunk ends before its declared line ranges are consumed")]
    TruncatedHunk { line: usize },
    #[error("span [{start}, {end}) is out of bounds for {len} lines")]
    SpanOutOfBounds { start: usize, end: usize, len: usize },
    #[error("function source has no lines")]
    EmptyFunction,
    #[error("hunk body line `{0}` has no `+`, `-` or ` ` prefix")]
    BadBodyLine(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Language {
    C,
    Cpp,
    Python,
}

impl Language {
    /// Guess the language from a file extension; `None` for anything else.
    pub fn from_path(path: &str) -> Option<Self> {
        let ext = path.rsplit_once('.').map(|(_, e)| e.to_ascii_lowercase())?;
        match ext.as_str() {
            "c" | "h" => Some(Language::C),
            "cc" | "cpp" | "cxx" | "hpp" | "hh" | "hxx" | "c++" => Some(Language::Cpp),
            "py" | "pyw" => Some(Language::Python),
            _ => None,
        }
    }
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Language::C => "C",
            Language::Cpp => "CPP",
            Language::Python => "PYTHON",
        })
    }
}

/// Where a function came from.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Origin {
    pub repo_url: String,
    pub file_path: String,
    pub commit_sha: String,
    pub function_name: String,
}

/// Half-open line range `[start, end_exclusive)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LineSpan {
    pub start: usize,
    pub end_exclusive: usize,
}

impl LineSpan {
    pub fn new(start: usize, end_exclusive: usize) -> Self {
        Self {
            start,
            end_exclusive,
        }
    }

    pub fn len(&self) -> usize {
        self.end_exclusive.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, index: usize) -> bool {
        self.start <= index && index < self.end_exclusive
    }
}

impl fmt::Display for LineSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {})", self.start, self.end_exclusive)
    }
}

/// A function's text, one entry per line, without line terminators.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "FunctionSourceRepr")]
pub struct FunctionSource {
    lines: Vec<String>,
    language: Language,
    origin: Origin,
}

#[derive(Deserialize)]
struct FunctionSourceRepr {
    lines: Vec<String>,
    language: Language,
    origin: Origin,
}

impl TryFrom<FunctionSourceRepr> for FunctionSource {
    type Error = PatchError;

    fn try_from(r: FunctionSourceRepr) -> Result<Self, Self::Error> {
        FunctionSource::new(r.lines, r.language, r.origin)
    }
}

impl FunctionSource {
    pub fn new(lines: Vec<String>, language: Language, origin: Origin) -> Result<Self, PatchError> {
        if lines.is_empty() {
            return Err(PatchError::EmptyFunction);
        }
        Ok(Self {
            lines,
            language,
            origin,
        })
    }

    /// Split `text` into lines after normalising line endings.
    pub fn from_text(text: &str, language: Language, origin: Origin) -> Result<Self, PatchError> {
        Self::new(split_lines(text), language, origin)
    }

    pub fn lines(&self) -> &[String] {
        &self.lines
    }

    pub fn len(&self) -> usize {
        self.lines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }

    pub fn language(&self) -> Language {
        self.language
    }

    pub fn origin(&self) -> &Origin {
        &self.origin
    }

    pub fn text(&self) -> String {
        self.lines.join("\n")
    }
}

/// Normalise CRLF and lone CR to LF, then split. A single trailing newline
/// does not produce an empty last line.
pub fn split_lines(text: &str) -> Vec<String> {
    let normalized = normalize_newlines(text);
    let trimmed = normalized.strip_suffix('\n').unwrap_or(&normalized);
    if trimmed.is_empty() && normalized.is_empty() {
        return Vec::new();
    }
    trimmed.split('\n').map(str::to_owned).collect()
}

pub fn normalize_newlines(text: &str) -> String {
    if !text.contains('\r') {
        return text.to_owned();
    }
    text.replace("\r\n", "\n").replace('\r', "\n")
}

/// Slice `[span.start, span.end_exclusive)` of `file_text` into a function.
pub fn extract_function(
    file_text: &str,
    span: LineSpan,
    origin: Origin,
    language: Language,
) -> Result<FunctionSource, PatchError> {
    let lines = split_lines(file_text);
    if span.start >= span.end_exclusive || span.end_exclusive > lines.len() {
        return Err(PatchError::SpanOutOfBounds {
            start: span.start,
            end: span.end_exclusive,
            len: lines.len(),
        });
    }
    FunctionSource::new(
        lines[span.start..span.end_exclusive].to_vec(),
        language,
        origin,
    )
}

/// One line of a hunk body.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum HunkLine {
    Context(String),
    Removed(String),
    Added(String),
}

impl HunkLine {
    fn parse(line: &str) -> Result<Self, PatchError> {
        match line.chars().next() {
            Some(' ') => Ok(HunkLine::Context(line[1..].to_owned())),
            Some('-') => Ok(HunkLine::Removed(line[1..].to_owned())),
            Some('+') => Ok(HunkLine::Added(line[1..].to_owned())),
            // Some tools strip the single space off blank context lines.
            None => Ok(HunkLine::Context(String::new())),
            Some(_) => Err(PatchError::BadBodyLine(line.to_owned())),
        }
    }

    pub fn text(&self) -> &str {
        match self {
            HunkLine::Context(t) | HunkLine::Removed(t) | HunkLine::Added(t) => t,
        }
    }

    fn in_pre_image(&self) -> bool {
        !matches!(self, HunkLine::Added(_))
    }

    fn in_post_image(&self) -> bool {
        !matches!(self, HunkLine::Removed(_))
    }
}

impl fmt::Display for HunkLine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HunkLine::Context(t) => write!(f, " {t}"),
            HunkLine::Removed(t) => write!(f, "-{t}"),
            HunkLine::Added(t) => write!(f, "+{t}"),
        }
    }
}

/// One `@@`-delimited change region.
///
/// The ordered body (context, removed and added lines) is retained so each
/// removed line's expected position in the pre-image is known exactly.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "HunkRepr", try_from = "HunkRepr")]
pub struct PatchHunk {
    removed_start_line: usize,
    removed_line_range: usize,
    added_start_line: usize,
    added_line_range: usize,
    removed_lines: Vec<String>,
    added_lines: Vec<String>,
    body: Vec<HunkLine>,
}

#[derive(Serialize, Deserialize)]
struct HunkRepr {
    removed_start_line: usize,
    added_start_line: usize,
    lines: Vec<String>,
}

impl From<PatchHunk> for HunkRepr {
    fn from(h: PatchHunk) -> Self {
        HunkRepr {
            removed_start_line: h.removed_start_line,
            added_start_line: h.added_start_line,
            lines: h.body.iter().map(ToString::to_string).collect(),
        }
    }
}

impl TryFrom<HunkRepr> for PatchHunk {
    type Error = PatchError;

    fn try_from(r: HunkRepr) -> Result<Self, Self::Error> {
        let body = r
            .lines
            .iter()
            .map(|l| HunkLine::parse(l))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(PatchHunk::from_body(r.removed_start_line, r.added_start_line, body))
    }
}

impl PatchHunk {
    /// Build a hunk from its ordered body; ranges and line lists are derived.
    pub fn from_body(removed_start_line: usize, added_start_line: usize, body: Vec<HunkLine>) -> Self {
        let mut removed_lines = Vec::new();
        let mut added_lines = Vec::new();
        let (mut removed_line_range, mut added_line_range) = (0, 0);
        for line in &body {
            match line {
                HunkLine::Context(_) => {
                    removed_line_range += 1;
                    added_line_range += 1;
                }
                HunkLine::Removed(t) => {
                    removed_line_range += 1;
                    removed_lines.push(t.clone());
                }
                HunkLine::Added(t) => {
                    added_line_range += 1;
                    added_lines.push(t.clone());
                }
            }
        }
        Self {
            removed_start_line,
            removed_line_range,
            added_start_line,
            added_line_range,
            removed_lines,
            added_lines,
            body,
        }
    }

    pub fn removed_start_line(&self) -> usize {
        self.removed_start_line
    }

    pub fn removed_line_range(&self) -> usize {
        self.removed_line_range
    }

    pub fn added_start_line(&self) -> usize {
        self.added_start_line
    }

    pub fn added_line_range(&self) -> usize {
        self.added_line_range
    }

    pub fn removed_lines(&self) -> &[String] {
        &self.removed_lines
    }

    pub fn added_lines(&self) -> &[String] {
        &self.added_lines
    }

    pub fn body(&self) -> &[HunkLine] {
        &self.body
    }

    pub fn context_count(&self) -> usize {
        self.body
            .iter()
            .filter(|l| matches!(l, HunkLine::Context(_)))
            .count()
    }

    /// Removed lines paired with their pre-image line index.
    pub fn removed_positions(&self) -> impl Iterator<Item = (usize, &str)> + '_ {
        let mut pre = self.removed_start_line;
        self.body.iter().filter_map(move |line| {
            let at = pre;
            if line.in_pre_image() {
                pre += 1;
            }
            match line {
                HunkLine::Removed(t) => Some((at, t.as_str())),
                _ => None,
            }
        })
    }

    /// Added lines paired with their post-image line index.
    pub fn added_positions(&self) -> impl Iterator<Item = (usize, &str)> + '_ {
        let mut post = self.added_start_line;
        self.body.iter().filter_map(move |line| {
            let at = post;
            if line.in_post_image() {
                post += 1;
            }
            match line {
                HunkLine::Added(t) => Some((at, t.as_str())),
                _ => None,
            }
        })
    }

    /// Pre-image range spanned by the removed lines, or the insertion point
    /// for a pure addition.
    pub fn changed_pre_range(&self) -> LineSpan {
        changed_range(self.removed_positions().map(|(i, _)| i), self.insertion_point(true))
    }

    /// Post-image range spanned by the added lines, or the deletion point
    /// for a pure removal.
    pub fn changed_post_range(&self) -> LineSpan {
        changed_range(self.added_positions().map(|(i, _)| i), self.insertion_point(false))
    }

    // Index (pre or post image) of the first changed body line.
    fn insertion_point(&self, pre_side: bool) -> usize {
        let mut idx = if pre_side {
            self.removed_start_line
        } else {
            self.added_start_line
        };
        for line in &self.body {
            match line {
                HunkLine::Context(_) => idx += 1,
                _ => break,
            }
        }
        idx
    }

    /// Re-express the hunk relative to function spans in the pre- and
    /// post-image. Leading and trailing body lines outside the spans are
    /// trimmed; the remaining coordinates are shifted to be span-local.
    pub fn rebase(&self, before: LineSpan, after: LineSpan) -> PatchHunk {
        let mut pre = self.removed_start_line;
        let mut post = self.added_start_line;
        let mut coords = Vec::with_capacity(self.body.len());
        for line in &self.body {
            coords.push((pre, post));
            if line.in_pre_image() {
                pre += 1;
            }
            if line.in_post_image() {
                post += 1;
            }
        }
        let inside = |i: usize| {
            let (p, q) = coords[i];
            match &self.body[i] {
                HunkLine::Context(_) => before.contains(p) && after.contains(q),
                HunkLine::Removed(_) => before.contains(p),
                HunkLine::Added(_) => after.contains(q),
            }
        };
        let first = (0..self.body.len()).find(|&i| inside(i));
        let last = (0..self.body.len()).rev().find(|&i| inside(i));
        match (first, last) {
            (Some(a), Some(b)) => {
                let (p, q) = coords[a];
                PatchHunk::from_body(
                    p.saturating_sub(before.start),
                    q.saturating_sub(after.start),
                    self.body[a..=b].to_vec(),
                )
            }
            _ => PatchHunk::from_body(
                self.removed_start_line
                    .clamp(before.start, before.end_exclusive)
                    - before.start,
                self.added_start_line.clamp(after.start, after.end_exclusive) - after.start,
                Vec::new(),
            ),
        }
    }

    /// Render the hunk back into unified-diff text, header included.
    pub fn to_unified(&self) -> String {
        let mut out = format!(
            "@@ -{} +{} @@\n",
            header_range(self.removed_start_line, self.removed_line_range),
            header_range(self.added_start_line, self.added_line_range)
        );
        for line in &self.body {
            out.push_str(&line.to_string());
            out.push('\n');
        }
        out
    }
}

fn changed_range(mut positions: impl Iterator<Item = usize>, fallback: usize) -> LineSpan {
    match positions.next() {
        Some(first) => {
            let last = positions.last().unwrap_or(first);
            LineSpan::new(first, last + 1)
        }
        None => LineSpan::new(fallback, fallback),
    }
}

fn header_range(start: usize, count: usize) -> String {
    // An empty range names the line *before* the insertion point.
    let first = if count == 0 { start } else { start + 1 };
    if count == 1 {
        first.to_string()
    } else {
        format!("{first},{count}")
    }
}

/// All hunks touching one file in one commit.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Patch {
    pub hunks: Vec<PatchHunk>,
    pub file_path_before: String,
    pub file_path_after: String,
    pub commit_sha: String,
}

impl Patch {
    /// The file this patch applies to, preferring the post-image path.
    pub fn path(&self) -> &str {
        if self.file_path_after.is_empty() || self.file_path_after == "/dev/null" {
            &self.file_path_before
        } else {
            &self.file_path_after
        }
    }

    pub fn to_unified(&self) -> String {
        let mut out = String::new();
        if !self.file_path_before.is_empty() || !self.file_path_after.is_empty() {
            out.push_str(&format!("--- {}\n", with_prefix("a/", &self.file_path_before)));
            out.push_str(&format!("+++ {}\n", with_prefix("b/", &self.file_path_after)));
        }
        for hunk in &self.hunks {
            out.push_str(&hunk.to_unified());
        }
        out
    }
}

fn with_prefix(prefix: &str, path: &str) -> String {
    if path == "/dev/null" {
        path.to_owned()
    } else {
        format!("{prefix}{path}")
    }
}

fn strip_path(raw: &str) -> String {
    let path = raw.split('\t').next().unwrap_or(raw).trim_end();
    if path == "/dev/null" {
        return path.to_owned();
    }
    path.strip_prefix("a/")
        .or_else(|| path.strip_prefix("b/"))
        .unwrap_or(path)
        .to_owned()
}

fn parse_count(m: Option<regex::Match<'_>>) -> usize {
    m.map_or(1, |m| m.as_str().parse().unwrap_or(usize::MAX))
}

/// 1-based header start to 0-based index. Empty ranges name the line before
/// the insertion point, so that number already is the 0-based insert index.
fn to_zero_based(start: usize, count: usize) -> usize {
    if count == 0 {
        start
    } else {
        start.saturating_sub(1)
    }
}

/// Parse `diff_text` into one [`Patch`] per file section.
///
/// Anything before the first file header or hunk (a commit message, say) is
/// skipped. A bare hunk with no file header yields a patch with empty paths.
pub fn parse_unified_diff(diff_text: &str) -> Result<Vec<Patch>, PatchError> {
    let text = normalize_newlines(diff_text);
    let lines: Vec<&str> = text.lines().collect();
    let mut patches: Vec<Patch> = Vec::new();
    let mut current: Option<Patch> = None;
    let mut commit_sha = String::new();
    let mut i = 0;

    while i < lines.len() {
        let line = lines[i];

        if current.is_none() && patches.is_empty() {
            if let Some(c) = COMMIT_LINE.captures(line) {
                let sha = c.get(1).or_else(|| c.get(2)).map(|m| m.as_str());
                commit_sha = sha.unwrap_or_default().to_ascii_lowercase();
            }
        }

        if let Some(c) = GIT_HEADER.captures(line) {
            finish(&mut patches, current.take());
            current = Some(Patch {
                file_path_before: strip_path(&c[1]),
                file_path_after: strip_path(&c[2]),
                commit_sha: commit_sha.clone(),
                ..Patch::default()
            });
            i += 1;
            continue;
        }

        if let Some(before) = line.strip_prefix("--- ") {
            if let Some(after) = lines.get(i + 1).and_then(|l| l.strip_prefix("+++ ")) {
                let same_section = current.as_ref().is_some_and(|p| p.hunks.is_empty());
                if !same_section {
                    finish(&mut patches, current.take());
                }
                let patch = current.get_or_insert_with(|| Patch {
                    commit_sha: commit_sha.clone(),
                    ..Patch::default()
                });
                patch.file_path_before = strip_path(before);
                patch.file_path_after = strip_path(after);
                i += 2;
                continue;
            }
        }

        if line.starts_with("@@") {
            let caps = HUNK_HEADER
                .captures(line)
                .ok_or_else(|| PatchError::MalformedHunkHeader {
                    line: i + 1,
                    text: line.to_owned(),
                })?;
            let old_count = parse_count(caps.get(2));
            let new_count = parse_count(caps.get(4));
            let old_start = to_zero_based(caps[1].parse().unwrap_or(0), old_count);
            let new_start = to_zero_based(caps[3].parse().unwrap_or(0), new_count);

            let (mut old_left, mut new_left) = (old_count, new_count);
            let mut body = Vec::new();
            i += 1;
            while old_left > 0 || new_left > 0 {
                let Some(raw) = lines.get(i) else {
                    return Err(PatchError::TruncatedHunk { line: i + 1 });
                };
                if raw.starts_with('\\') {
                    i += 1;
                    continue;
                }
                let body_line =
                    HunkLine::parse(raw).map_err(|_| PatchError::TruncatedHunk { line: i + 1 })?;
                let fits = match body_line {
                    HunkLine::Context(_) => old_left > 0 && new_left > 0,
                    HunkLine::Removed(_) => old_left > 0,
                    HunkLine::Added(_) => new_left > 0,
                };
                if !fits {
                    return Err(PatchError::TruncatedHunk { line: i + 1 });
                }
                if body_line.in_pre_image() {
                    old_left -= 1;
                }
                if body_line.in_post_image() {
                    new_left -= 1;
                }
                body.push(body_line);
                i += 1;
            }
            current
                .get_or_insert_with(|| Patch {
                    commit_sha: commit_sha.clone(),
                    ..Patch::default()
                })
                .hunks
                .push(PatchHunk::from_body(old_start, new_start, body));
            continue;
        }

        i += 1;
    }
    finish(&mut patches, current);
    Ok(patches)
}

fn finish(patches: &mut Vec<Patch>, patch: Option<Patch>) {
    if let Some(mut p) = patch {
        p.hunks.sort_by_key(PatchHunk::removed_start_line);
        patches.push(p);
    }
}
