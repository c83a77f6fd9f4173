//! Independent recounts and structural checks shared by the test suites.

#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use vulnchunk_core::genericize::lexer::{tokenize, TokenKind};
use vulnchunk_core::genericize::{placeholder_kind, rename_identifiers, Namespace};
use vulnchunk_core::metrics::Scores;
use vulnchunk_core::Language;

/// Recount scores from raw prediction and label vectors with textbook
/// formulas; MCC is the Pearson correlation of the two 0/1 vectors.
pub fn brute_scores(pred: &[u8], actual: &[u8]) -> Scores {
    let n = pred.len() as f64;
    let count = |p: u8, a: u8| pred.iter().zip(actual).filter(|&(&x, &y)| x == p && y == a).count() as f64;
    let (tp, fp, fn_) = (count(1, 1), count(1, 0), count(0, 1));
    let correct = pred.iter().zip(actual).filter(|(x, y)| x == y).count() as f64;
    let precision = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
    let recall = if tp + fn_ > 0.0 { tp / (tp + fn_) } else { 0.0 };
    let f1 = if tp > 0.0 { 2.0 * tp / (2.0 * tp + fp + fn_) } else { 0.0 };
    let mp = pred.iter().map(|&x| x as f64).sum::<f64>() / n;
    let ma = actual.iter().map(|&x| x as f64).sum::<f64>() / n;
    let cov: f64 = pred.iter().zip(actual).map(|(&x, &y)| (x as f64 - mp) * (y as f64 - ma)).sum();
    let vp: f64 = pred.iter().map(|&x| (x as f64 - mp).powi(2)).sum();
    let va: f64 = actual.iter().map(|&y| (y as f64 - ma).powi(2)).sum();
    let mcc = if vp > 0.0 && va > 0.0 { cov / (vp * va).sqrt() } else { 0.0 };
    Scores {
        accuracy: correct / n,
        precision,
        recall,
        f1,
        mcc,
    }
}

pub fn max_abs_diff(a: &Scores, b: &Scores) -> f64 {
    [
        (a.accuracy, b.accuracy),
        (a.precision, b.precision),
        (a.recall, b.recall),
        (a.f1, b.f1),
        (a.mcc, b.mcc),
    ]
    .iter()
    .map(|(x, y)| (x - y).abs())
    .fold(0.0, f64::max)
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures")
}

fn walk(dir: &Path, out: &mut Vec<PathBuf>) {
    let mut entries: Vec<PathBuf> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    entries.sort();
    for p in entries {
        if p.is_dir() {
            walk(&p, out);
        } else {
            out.push(p);
        }
    }
}

/// 100 ten-line windows cut from the fixture source files, cycling through
/// the files so every language is represented.
pub fn fixture_chunks() -> Vec<(String, Language)> {
    let mut files = Vec::new();
    for corpus in ["osv25", "corpus40"] {
        walk(&fixtures().join(corpus).join("cache/blobs"), &mut files);
    }
    let sources: Vec<(Vec<String>, Language)> = files
        .iter()
        .filter_map(|p| {
            let lang = Language::from_path(p.to_str()?)?;
            let text = fs::read_to_string(p).ok()?;
            Some((text.lines().map(str::to_owned).collect(), lang))
        })
        .collect();
    let mut chunks = Vec::new();
    let mut offset = 0;
    while chunks.len() < 100 {
        for (lines, lang) in &sources {
            if offset + 10 <= lines.len() && chunks.len() < 100 {
                chunks.push((lines[offset..offset + 10].join("\n"), *lang));
            }
        }
        offset += 7;
    }
    chunks
}

/// Renaming restores exactly through its map.
pub fn check_round_trip(raw: &str, lang: Language) -> Result<(), String> {
    let (generic, map) = rename_identifiers(raw, lang);
    let back = map.restore(&generic, lang);
    (back == raw).then_some(()).ok_or_else(|| format!("round trip changed:\n{raw}\n---\n{back}"))
}

/// Renaming generic text is a no-op.
pub fn check_idempotent(raw: &str, lang: Language) -> Result<(), String> {
    let (generic, _) = rename_identifiers(raw, lang);
    let (again, map) = rename_identifiers(&generic, lang);
    (again == generic && map.is_empty())
        .then_some(())
        .ok_or_else(|| format!("second pass changed:\n{generic}\n---\n{again}"))
}

/// Same token kinds in the same order, non-identifiers untouched, and
/// identifiers renamed by a bijection.
pub fn check_structure(raw: &str, lang: Language) -> Result<(), String> {
    let (generic, _) = rename_identifiers(raw, lang);
    let a = tokenize(raw, lang);
    let b = tokenize(&generic, lang);
    if a.len() != b.len() {
        return Err(format!("token count {} became {}", a.len(), b.len()));
    }
    let mut kinds_a: BTreeMap<String, usize> = BTreeMap::new();
    let mut kinds_b: BTreeMap<String, usize> = BTreeMap::new();
    let mut forward: HashMap<&str, &str> = HashMap::new();
    let mut backward: HashMap<&str, &str> = HashMap::new();
    for (x, y) in a.iter().zip(&b) {
        *kinds_a.entry(format!("{:?}", x.kind)).or_default() += 1;
        *kinds_b.entry(format!("{:?}", y.kind)).or_default() += 1;
        if x.kind != TokenKind::Ident {
            if x.text != y.text {
                return Err(format!("non-identifier `{}` became `{}`", x.text, y.text));
            }
            continue;
        }
        if *forward.entry(x.text).or_insert(y.text) != y.text {
            return Err(format!("`{}` renamed two ways", x.text));
        }
        if *backward.entry(y.text).or_insert(x.text) != x.text {
            return Err(format!("`{}` stands for two names", y.text));
        }
    }
    if kinds_a != kinds_b {
        return Err("token kind multiset changed".into());
    }
    Ok(())
}

/// Distinct `F<k>` and `v<k>` placeholders in generic text.
pub fn placeholder_counts(generic: &str, lang: Language) -> (usize, usize) {
    let mut f = std::collections::BTreeSet::new();
    let mut v = std::collections::BTreeSet::new();
    for t in tokenize(generic, lang) {
        match placeholder_kind(t.text) {
            Some((Namespace::Function, k)) => {
                f.insert(k);
            }
            Some((Namespace::Variable, k)) => {
                v.insert(k);
            }
            None => {}
        }
    }
    (f.len(), v.len())
}
