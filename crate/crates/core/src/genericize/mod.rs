//! Generic code chunks: identifiers renamed to positional placeholders.
//!
//! Function names (and C goto labels) become `F1, F2, ...`; every other
//! identifier that is not a language keyword or builtin becomes `v1, v2,
//! ...`. Numbering follows first occurrence, and a spelling keeps the same
//! placeholder everywhere in the chunk. Literals, comments, operators and
//! layout are left untouched.

pub mod lexer;

use std::collections::{BTreeSet, HashSet};
use std::sync::LazyLock;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chunker::{ChunkVariant, CodeChunk};
use crate::oracle::{parse_literal, OracleClient, OracleError, Value};
use crate::patch::{split_lines, Language};
use lexer::{tokenize, Token, TokenKind};

static C_WORDS: &str = include_str!("../../resources/keywords/c.txt");
static CPP_WORDS: &str = include_str!("../../resources/keywords/cpp.txt");
static PYTHON_WORDS: &str = include_str!("../../resources/keywords/python.txt");

fn word_list(text: &str) -> impl Iterator<Item = &str> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
}

static C_SET: LazyLock<HashSet<&'static str>> = LazyLock::new(|| word_list(C_WORDS).collect());
static CPP_SET: LazyLock<HashSet<&'static str>> =
    LazyLock::new(|| word_list(C_WORDS).chain(word_list(CPP_WORDS)).collect());
static PYTHON_SET: LazyLock<HashSet<&'static str>> =
    LazyLock::new(|| word_list(PYTHON_WORDS).collect());

/// Keywords and builtins that are never renamed.
pub fn reserved_words(language: Language) -> &'static HashSet<&'static str> {
    match language {
        Language::C => &C_SET,
        Language::Cpp => &CPP_SET,
        Language::Python => &PYTHON_SET,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Namespace {
    Function,
    Variable,
}

/// `F<k>` or `v<k>` with `k >= 1` and no leading zero.
pub fn placeholder_kind(ident: &str) -> Option<(Namespace, usize)> {
    let (ns, digits) = match ident.as_bytes().first()? {
        b'F' => (Namespace::Function, &ident[1..]),
        b'v' => (Namespace::Variable, &ident[1..]),
        _ => return None,
    };
    if digits.is_empty() || digits.starts_with('0') || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok().map(|k| (ns, k))
}

#[derive(Debug, Error)]
pub enum GenericizeError {
    #[error("chunk is already {0:?}; only RAW chunks are genericized")]
    NotRaw(ChunkVariant),
    #[error("LLM backend failed: {0}")]
    LlmBackend(#[from] OracleError),
}

/// Original spelling to placeholder, per namespace, in first-occurrence order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenameMap {
    pub function_names: IndexMap<String, String>,
    pub variable_names: IndexMap<String, String>,
}

impl RenameMap {
    pub fn is_empty(&self) -> bool {
        self.function_names.is_empty() && self.variable_names.is_empty()
    }

    pub fn get(&self, original: &str) -> Option<&str> {
        self.function_names
            .get(original)
            .or_else(|| self.variable_names.get(original))
            .map(String::as_str)
    }

    /// Undo the renaming on `generic` text.
    pub fn restore(&self, generic: &str, language: Language) -> String {
        let inverse: IndexMap<&str, &str> = self
            .function_names
            .iter()
            .chain(&self.variable_names)
            .map(|(k, v)| (v.as_str(), k.as_str()))
            .collect();
        tokenize(generic, language)
            .into_iter()
            .map(|t| match t.kind {
                TokenKind::Ident => inverse.get(t.text).copied().unwrap_or(t.text),
                _ => t.text,
            })
            .collect()
    }
}

pub enum Backend<'a> {
    RuleBased,
    Llm(&'a OracleClient),
}

pub fn genericize(chunk: &CodeChunk, backend: &Backend<'_>) -> Result<(CodeChunk, RenameMap), GenericizeError> {
    if chunk.variant != ChunkVariant::Raw {
        return Err(GenericizeError::NotRaw(chunk.variant));
    }
    let text = chunk.text();
    let (generic_text, map) = match backend {
        Backend::RuleBased => rename_identifiers(&text, chunk.language),
        Backend::Llm(client) => {
            let raw = client.complete(&generic_prompt(&text))?;
            let generic = extract_generic_code(&raw);
            let map = align_rename_map(&text, &generic, chunk.language);
            (generic, map)
        }
    };
    let mut out = chunk.clone();
    out.text_lines = split_lines(&generic_text);
    // A chunk that ends in blank lines must keep its line count.
    out.text_lines.resize(chunk.text_lines.len().max(out.text_lines.len()), String::new());
    out.variant = ChunkVariant::Generic;
    Ok((out, map))
}

/// Rename identifiers in `text` with the rule-based scheme.
pub fn rename_identifiers(text: &str, language: Language) -> (String, RenameMap) {
    let tokens = tokenize(text, language);
    let reserved = reserved_words(language);
    let functions = function_spellings(&tokens, language);
    let renameable = |i: usize| {
        let t = &tokens[i];
        t.kind == TokenKind::Ident
            && !reserved.contains(t.text)
            && placeholder_kind(t.text).is_none()
            && !is_directive_name(&tokens, i, language)
    };

    // Placeholder numbers already present in the text are skipped so a
    // fresh placeholder never collides with one.
    let taken: BTreeSet<(Namespace, usize)> = tokens
        .iter()
        .filter(|t| t.kind == TokenKind::Ident)
        .filter_map(|t| placeholder_kind(t.text))
        .collect();
    let mut next = [1usize, 1usize];
    let mut fresh = |ns: Namespace| {
        let slot = match ns {
            Namespace::Function => 0,
            Namespace::Variable => 1,
        };
        while taken.contains(&(ns, next[slot])) {
            next[slot] += 1;
        }
        let k = next[slot];
        next[slot] += 1;
        match ns {
            Namespace::Function => format!("F{k}"),
            Namespace::Variable => format!("v{k}"),
        }
    };

    let mut map = RenameMap::default();
    let mut out = String::with_capacity(text.len());
    for (i, t) in tokens.iter().enumerate() {
        if !renameable(i) {
            out.push_str(t.text);
            continue;
        }
        let table = if functions.contains(t.text) {
            &mut map.function_names
        } else {
            &mut map.variable_names
        };
        let ns = if functions.contains(t.text) {
            Namespace::Function
        } else {
            Namespace::Variable
        };
        let placeholder = table
            .entry(t.text.to_owned())
            .or_insert_with(|| fresh(ns));
        out.push_str(placeholder);
    }
    (out, map)
}

fn prev_significant(tokens: &[Token<'_>], i: usize) -> Option<usize> {
    (0..i).rev().find(|&j| !tokens[j].is_trivia())
}

fn next_significant(tokens: &[Token<'_>], i: usize) -> Option<usize> {
    (i + 1..tokens.len()).find(|&j| !tokens[j].is_trivia())
}

fn starts_line(tokens: &[Token<'_>], i: usize) -> bool {
    for t in tokens[..i].iter().rev() {
        match t.kind {
            TokenKind::Space if t.text.contains('\n') => return true,
            TokenKind::Space | TokenKind::Comment => continue,
            _ => return false,
        }
    }
    true
}

// `#include`, `#define` and friends.
fn is_directive_name(tokens: &[Token<'_>], i: usize, language: Language) -> bool {
    language != Language::Python
        && prev_significant(tokens, i).is_some_and(|p| tokens[p].text == "#" && starts_line(tokens, p))
}

/// Spellings that occur in at least one function position: directly before
/// `(`, after `goto`, or as a C/C++ label definition (`name:` opening a line).
fn function_spellings<'a>(tokens: &[Token<'a>], language: Language) -> HashSet<&'a str> {
    let c_like = language != Language::Python;
    let mut out = HashSet::new();
    for (i, t) in tokens.iter().enumerate() {
        if t.kind != TokenKind::Ident {
            continue;
        }
        let next = next_significant(tokens, i).map(|j| tokens[j].text);
        let prev = prev_significant(tokens, i).map(|j| tokens[j].text);
        let called = next == Some("(");
        let goto_target = c_like && prev == Some("goto");
        let label = c_like && next == Some(":") && starts_line(tokens, i);
        if called || goto_target || label {
            out.insert(t.text);
        }
    }
    out
}

/// The generic-code conversion prompt sent to an LLM backend.
pub fn generic_prompt(code_chunk: &str) -> String {
    format!(
        "Here is the function code chunk: {code_chunk}\n\n\
Please convert the code chunk by renaming functions to F1, F2, ..., FN and variables to v1, v2, ..., vn.\n\n\
Return the converted code in a variable named generic_code."
    )
}

/// Pull the converted code out of an LLM reply.
pub fn extract_generic_code(response: &str) -> String {
    // {"generic_code": "..."} style answers.
    for (start, _) in response.match_indices('{') {
        if let Some((Value::Dict(entries), _)) = parse_literal(&response[start..]) {
            if let Some((_, Value::Str(code))) = entries.iter().find(|(k, _)| k == "generic_code") {
                return code.clone();
            }
        }
    }
    // generic_code = """...""" or generic_code = "..."
    if let Some(at) = response.find("generic_code") {
        let after = response[at + "generic_code".len()..].trim_start();
        if let Some(rhs) = after.strip_prefix('=').or_else(|| after.strip_prefix(':')) {
            let rhs = rhs.trim_start();
            for quote in ["\"\"\"", "'''"] {
                if let Some(body) = rhs.strip_prefix(quote) {
                    if let Some(end) = body.find(quote) {
                        return trim_outer_newlines(&body[..end]);
                    }
                }
            }
            if let Some((Value::Str(s), _)) = parse_literal(rhs) {
                return s;
            }
        }
    }
    // A fenced block.
    if let Some(open) = response.find("```") {
        let after = &response[open + 3..];
        let body_start = after.find('\n').map_or(0, |i| i + 1);
        let body = &after[body_start..];
        let end = body.find("```").unwrap_or(body.len());
        return trim_outer_newlines(&body[..end]);
    }
    response.trim().to_owned()
}

fn trim_outer_newlines(s: &str) -> String {
    s.trim_start_matches('\n').trim_end_matches(['\n', ' ']).to_owned()
}

/// Best-effort rename map for a backend that only returns text: align the
/// two token streams and record identifier pairs. Empty when the structure
/// differs.
pub fn align_rename_map(raw: &str, generic: &str, language: Language) -> RenameMap {
    let significant = |s| {
        tokenize(s, language)
            .into_iter()
            .filter(|t| !t.is_trivia())
            .collect::<Vec<_>>()
    };
    let (a, b) = (significant(raw), significant(generic));
    let mut map = RenameMap::default();
    if a.len() != b.len() {
        return map;
    }
    for (x, y) in a.iter().zip(&b) {
        if x.kind != y.kind || (x.kind != TokenKind::Ident && x.text != y.text) {
            return RenameMap::default();
        }
        if x.kind == TokenKind::Ident && x.text != y.text {
            let table = match placeholder_kind(y.text) {
                Some((Namespace::Function, _)) => &mut map.function_names,
                _ => &mut map.variable_names,
            };
            table.entry(x.text.to_owned()).or_insert_with(|| y.text.to_owned());
        }
    }
    map
}
