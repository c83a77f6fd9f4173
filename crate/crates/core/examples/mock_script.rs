//! Writes a mock oracle script for an ingested fixture corpus.
//!
//! ```text
//! cargo run -p vulnchunk-core --example mock_script -- CANDIDATES.jsonl MANIFEST.json OUT.jsonl
//! ```
//!
//! The manifest's `policies` map decides how each CVE's prompts are answered.
//! Entries cover recipes 1, 2, 5 and 6 for every width in [`WIDTHS`].

use std::collections::{BTreeMap, BTreeSet};
use std::env;
use std::fs;
use std::io::Write;
use std::process::ExitCode;

use vulnchunk_core::chunker::{find_function_code_chunk, match_removed_lines};
use vulnchunk_core::ingest::Candidate;
use vulnchunk_core::oracle::{build_prompt, prompt_hash, PromptVariant, ScriptEntry};

const WIDTHS: [usize; 10] = [1, 3, 5, 7, 9, 10, 15, 20, 25, 2];
const VARIANTS: [PromptVariant; 2] = [PromptVariant::CodeOnly, PromptVariant::CodePlusDescription];

fn quoted(s: &str) -> String {
    serde_json::to_string(s).expect("strings serialize")
}

fn dict(line: &str, number: usize) -> String {
    format!(
        "{{'line_code': [{}], 'vul_lines': [{number}], 'vul_category': ['CWE-787']}}",
        quoted(line.trim())
    )
}

const NONE_DICT: &str = "{'line_code': ['None'], 'vul_lines': ['None'], 'vul_category': ['None']}";

/// Response for `policy`, given the submitted lines and the 0-based indices
/// among them that the fix removed.
fn respond(policy: &str, lines: &[String], removed: &BTreeSet<usize>) -> Option<(String, u32)> {
    let hit = removed.first().copied().unwrap_or(0);
    let hit_dict = dict(&lines[hit], hit + 1);
    Some(match policy {
        "hit" => (hit_dict, 0),
        "fail_once" => (hit_dict, 1),
        "miss" => match (0..lines.len()).find(|i| !removed.contains(i) && !lines[*i].trim().is_empty()) {
            Some(i) => (dict(&lines[i], i + 1), 0),
            None => (NONE_DICT.to_owned(), 0),
        },
        "none" => (NONE_DICT.to_owned(), 0),
        "noisy" => (
            format!("Sure! Here is what I found.\n```python\n{hit_dict}\n```\nLet me know if you need anything else."),
            0,
        ),
        "python_dict" => (
            format!(
                "{{line_code: ({},), vul_lines: ['{}'], vul_category: ('CWE-20', None,),}}",
                quoted(lines[hit].trim()),
                hit + 1
            ),
            0,
        ),
        "garbage" => ("I am unable to analyze this code.".to_owned(), 0),
        _ => return None,
    })
}

fn main() -> ExitCode {
    let args: Vec<String> = env::args().skip(1).collect();
    let [candidates, manifest, out] = args.as_slice() else {
        eprintln!("usage: mock_script CANDIDATES.jsonl MANIFEST.json OUT.jsonl");
        return ExitCode::from(2);
    };
    let candidates: Vec<Candidate> = fs::read_to_string(candidates)
        .expect("candidates readable")
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).expect("candidate row"))
        .collect();
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(manifest).expect("manifest readable")).expect("manifest json");
    let policies: BTreeMap<String, String> =
        serde_json::from_value(manifest["policies"].clone()).expect("manifest has policies");

    let mut entries: BTreeMap<String, ScriptEntry> = BTreeMap::new();
    let mut add = |prompt: String, response: Option<(String, u32)>| {
        if let Some((response, fail_times)) = response {
            let key = prompt_hash(&prompt);
            entries.insert(
                key.clone(),
                ScriptEntry {
                    prompt_sha256: Some(key),
                    prompt: None,
                    response,
                    fail_times,
                },
            );
        }
    };
    for c in &candidates {
        let policy = policies.get(&c.cve_id).map(String::as_str).unwrap_or("unscripted");
        let f = &c.function_before;
        let matched = match_removed_lines(f, &c.hunk).unwrap_or_default();
        for variant in VARIANTS {
            // Whole-function prompts.
            if let Ok(prompt) = build_prompt(&f.text(), variant, Some(&c.description)) {
                let mut removed: BTreeSet<usize> = matched.iter().copied().collect();
                if removed.is_empty() {
                    removed.insert(c.hunk.changed_pre_range().start.min(f.len().saturating_sub(1)));
                }
                add(prompt, respond(policy, f.lines(), &removed));
            }
            if !c.single_patch {
                continue;
            }
            for n in WIDTHS {
                let Ok(Some(chunk)) = find_function_code_chunk(f, &c.hunk, n) else {
                    continue;
                };
                let Ok(prompt) = build_prompt(&chunk.text(), variant, Some(&c.description)) else {
                    continue;
                };
                let removed = chunk.to_local(matched.iter().copied());
                add(prompt, respond(policy, &chunk.text_lines, &removed));
            }
        }
    }
    let mut w = fs::File::create(out).expect("output writable");
    for e in entries.values() {
        serde_json::to_writer(&mut w, e).expect("entry serializes");
        w.write_all(b"\n").expect("output writable");
    }
    eprintln!("{} entries", entries.len());
    ExitCode::SUCCESS
}
