//! Brute-force chunk reference and a random (function, hunk) generator.
//!
//! The reference deliberately shares no code with the chunker: it recomputes
//! pre-image positions from the raw body, scans every index of the function
//! for a matching removed line, and builds the span by testing each index
//! for membership in the chunk.

#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use vulnchunk_core::patch::HunkLine;
use vulnchunk_core::{FunctionSource, Language, Origin, PatchHunk};

/// How the "more than 10" threshold of the chunk rule is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Threshold {
    /// `max(E) - min(E) <= 10`, as the extraction algorithm tests it.
    Spread,
    /// `|E| <= 10`, as the closed-form rule writes it.
    Count,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RefOutcome {
    OutOfBounds,
    Empty,
    Span(usize, usize),
}

/// Indices of `lines` that hold a removed line of `body` at the position the
/// body puts it, given that the body starts at pre-image line `start`.
pub fn reference_edits(lines: &[String], start: usize, body: &[HunkLine]) -> Vec<usize> {
    let mut expected: Vec<(usize, &str)> = Vec::new();
    let mut pre = start;
    for line in body {
        match line {
            HunkLine::Context(_) => pre += 1,
            HunkLine::Removed(t) => {
                expected.push((pre, t));
                pre += 1;
            }
            HunkLine::Added(_) => {}
        }
    }
    (0..lines.len())
        .filter(|&i| {
            expected
                .iter()
                .any(|&(at, text)| at == i && lines[i].trim_end() == text.trim_end())
        })
        .collect()
}

pub fn reference_chunk(lines: &[String], start: usize, body: &[HunkLine], n: usize, threshold: Threshold) -> RefOutcome {
    if start >= lines.len() {
        return RefOutcome::OutOfBounds;
    }
    let edits = reference_edits(lines, start, body);
    if edits.is_empty() {
        return RefOutcome::Empty;
    }
    let lo = *edits.iter().min().unwrap();
    let hi = *edits.iter().max().unwrap();
    let narrow = match threshold {
        Threshold::Spread => hi - lo <= 10,
        Threshold::Count => edits.len() <= 10,
    };
    let inside = |i: usize| {
        if narrow {
            i + n >= lo && i <= hi + n
        } else {
            lo <= i && i <= hi
        }
    };
    let members: Vec<usize> = (0..lines.len()).filter(|&i| inside(i)).collect();
    RefOutcome::Span(members[0], members[members.len() - 1] + 1)
}

const VOCAB: [&str; 8] = [
    "x = 1;",
    "y = x + 2;",
    "return x;",
    "}",
    "if (x) {",
    "",
    "buf[i] = 0;",
    "free(p);",
];

/// A random function of at most 50 lines and a hunk against it. Lines are
/// drawn from a small vocabulary so that repeated text is common; removed
/// lines sometimes disagree with the function, the body may run past its
/// end, and the start may fall outside it.
pub fn random_instance(rng: &mut ChaCha8Rng) -> (FunctionSource, PatchHunk) {
    let len = rng.random_range(1..=50);
    let lines: Vec<String> = (0..len)
        .map(|i| {
            if rng.random_bool(0.5) {
                VOCAB[rng.random_range(0..VOCAB.len())].to_owned()
            } else {
                format!("stmt_{i};")
            }
        })
        .collect();
    let start = if rng.random_bool(0.05) {
        rng.random_range(len..len + 5)
    } else {
        rng.random_range(0..len)
    };
    let pure_addition = rng.random_bool(0.05);
    let steps = rng.random_range(1..=30);
    let mut body = Vec::new();
    let mut pre = start;
    for _ in 0..steps {
        let roll = rng.random_range(0..10);
        let actual = lines.get(pre).cloned().unwrap_or_else(|| "past_end();".to_owned());
        if roll < 2 {
            body.push(HunkLine::Added(format!("added_{}();", rng.random_range(0..100))));
            continue;
        }
        if roll < 5 && !pure_addition {
            let text = match rng.random_range(0..10) {
                0 => format!("{actual}   "),
                1 => "mismatch();".to_owned(),
                2 => VOCAB[rng.random_range(0..VOCAB.len())].to_owned(),
                _ => actual,
            };
            body.push(HunkLine::Removed(text));
        } else {
            body.push(HunkLine::Context(actual));
        }
        pre += 1;
    }
    let f = FunctionSource::new(lines, Language::C, Origin::default()).expect("non-empty");
    (f, PatchHunk::from_body(start, start, body))
}
