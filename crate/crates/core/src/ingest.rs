//! Advisory ingestion: OSV records, fix-commit diffs, file snapshots and
//! function location.
//!
//! The output is one [`Candidate`] per hunk of a fix commit: the enclosing
//! function before and after the fix, plus the hunk rebased into the
//! function's local coordinates.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Component, Path, PathBuf};
use std::sync::LazyLock;
use std::time::Duration;

use regex::Regex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::genericize::lexer::{tokenize, Token, TokenKind};
use crate::patch::{
    extract_function, parse_unified_diff, split_lines, Language, LineSpan, Origin, Patch, PatchHunk,
};
use crate::FunctionSource;

static COMMIT_URL_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^(https?://[^/]+/.+?)(?:/-)?/commits?/([0-9a-fA-F]{7,40})(?:[./?#].*)?$")
        .expect("commit url regex")
});
static SHA_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^[0-9a-fA-F]{7,64}$").expect("sha regex"));

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FixCommit {
    pub repo_url: String,
    pub sha: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdvisoryRecord {
    pub cve_id: String,
    pub description: String,
    /// Taken from the package ecosystem when it pins one down.
    pub language: Option<Language>,
    pub fix_commits: Vec<FixCommit>,
    pub project_id: String,
}

/// A file that could not be turned into a record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileError {
    pub path: String,
    pub message: String,
}

#[derive(Deserialize)]
struct OsvDoc {
    id: String,
    #[serde(default)]
    details: String,
    #[serde(default)]
    summary: String,
    #[serde(default)]
    affected: Vec<OsvAffected>,
    #[serde(default)]
    references: Vec<OsvReference>,
}

#[derive(Deserialize)]
struct OsvAffected {
    #[serde(default)]
    package: Option<OsvPackage>,
    #[serde(default)]
    ranges: Vec<OsvRange>,
}

#[derive(Deserialize)]
struct OsvPackage {
    #[serde(default)]
    ecosystem: String,
    #[serde(default)]
    name: String,
}

#[derive(Deserialize)]
struct OsvRange {
    #[serde(rename = "type")]
    kind: String,
    #[serde(default)]
    repo: Option<String>,
    #[serde(default)]
    events: Vec<BTreeMap<String, String>>,
}

#[derive(Deserialize)]
struct OsvReference {
    #[serde(rename = "type")]
    kind: String,
    url: String,
}

fn normalize_repo(url: &str) -> String {
    let url = url.trim().trim_end_matches('/');
    url.strip_suffix(".git").unwrap_or(url).to_owned()
}

/// `owner/name` for a forge URL, or the last path segment.
pub fn repo_slug(repo_url: &str) -> String {
    let url = normalize_repo(repo_url);
    let path = url.split_once("://").map_or(url.as_str(), |(_, rest)| rest);
    let segments: Vec<&str> = path.split('/').skip(1).filter(|s| !s.is_empty()).collect();
    match segments.as_slice() {
        [] => path.to_owned(),
        [one] => (*one).to_owned(),
        [.., owner, name] => format!("{owner}/{name}"),
    }
}

/// Repository and commit named by a forge commit URL.
pub fn parse_commit_url(url: &str) -> Option<FixCommit> {
    let caps = COMMIT_URL_RE.captures(url.trim())?;
    Some(FixCommit {
        repo_url: normalize_repo(&caps[1]),
        sha: caps[2].to_ascii_lowercase(),
    })
}

/// Map one OSV JSON document onto an [`AdvisoryRecord`].
pub fn parse_osv(text: &str) -> Result<AdvisoryRecord, serde_json::Error> {
    let doc: OsvDoc = serde_json::from_str(text)?;
    let mut fix_commits: Vec<FixCommit> = Vec::new();
    let mut push = |c: FixCommit| {
        if !fix_commits.iter().any(|f| f.sha == c.sha) {
            fix_commits.push(c);
        }
    };
    let mut language = None;
    let mut package_name = None;
    for affected in &doc.affected {
        if let Some(pkg) = &affected.package {
            if pkg.ecosystem.eq_ignore_ascii_case("pypi") {
                language = Some(Language::Python);
            }
            if package_name.is_none() && !pkg.name.is_empty() {
                package_name = Some(pkg.name.clone());
            }
        }
        for range in &affected.ranges {
            let Some(repo) = range.repo.as_deref().filter(|_| range.kind == "GIT") else {
                continue;
            };
            for sha in range.events.iter().filter_map(|e| e.get("fixed")) {
                if SHA_RE.is_match(sha) {
                    push(FixCommit {
                        repo_url: normalize_repo(repo),
                        sha: sha.to_ascii_lowercase(),
                    });
                }
            }
        }
    }
    for r in doc.references.iter().filter(|r| r.kind == "FIX") {
        if let Some(c) = parse_commit_url(&r.url) {
            push(c);
        }
    }
    let project_id = fix_commits
        .first()
        .map(|c| repo_slug(&c.repo_url))
        .or(package_name)
        .unwrap_or_default();
    let description = if doc.details.trim().is_empty() {
        doc.summary
    } else {
        doc.details
    };
    Ok(AdvisoryRecord {
        cve_id: doc.id,
        description: description.trim().to_owned(),
        language,
        fix_commits,
        project_id,
    })
}

/// Read every `*.json` file in `dir`, in file-name order. Unparseable files
/// are reported, not fatal.
pub fn load_osv_dir(dir: &Path) -> Result<(Vec<AdvisoryRecord>, Vec<FileError>), IngestError> {
    let io = |source| IngestError::Io {
        path: dir.display().to_string(),
        source,
    };
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")))
        .collect();
    paths.sort();
    let mut records = Vec::new();
    let mut errors = Vec::new();
    for path in paths {
        let parsed = fs::read_to_string(&path)
            .map_err(|e| e.to_string())
            .and_then(|t| parse_osv(&t).map_err(|e| e.to_string()));
        match parsed {
            Ok(r) => records.push(r),
            Err(message) => errors.push(FileError {
                path: path.display().to_string(),
                message,
            }),
        }
    }
    Ok((records, errors))
}

#[derive(Debug, Error)]
pub enum FetchError {
    #[error("{0} not found")]
    NotFound(String),
    #[error("network error fetching {url}: {message}")]
    Network { url: String, message: String },
    #[error("{0} is not in the local cache")]
    CacheMiss(String),
    #[error("refusing unsafe {0}")]
    InvalidPath(String),
    #[error("cache I/O on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl FetchError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, FetchError::Network { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FetchMode {
    LocalCache,
    Remote,
}

/// Which side of a commit a file snapshot comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Before,
    After,
}

impl Side {
    fn dir(self) -> &'static str {
        match self {
            Side::Before => "before",
            Side::After => "after",
        }
    }
}

/// URL templates for remote fetches. Placeholders: `{repo_url}`, `{slug}`,
/// `{sha}`, `{rev}` (the commit for the after side, `{sha}^` for the before
/// side) and `{path}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RemoteConfig {
    pub diff_url: String,
    pub file_url: String,
    pub timeout_secs: u64,
}

impl Default for RemoteConfig {
    fn default() -> Self {
        Self {
            diff_url: "{repo_url}/commit/{sha}.diff".into(),
            file_url: "{repo_url}/raw/{rev}/{path}".into(),
            timeout_secs: 30,
        }
    }
}

/// Diff and file snapshot source backed by a content-addressed cache:
/// `{cache}/{sha}.diff` and `{cache}/blobs/{sha}/{before|after}/{path}`.
pub struct Fetcher {
    cache_dir: PathBuf,
    mode: FetchMode,
    remote: RemoteConfig,
    client: Option<reqwest::blocking::Client>,
}

impl Fetcher {
    pub fn local(cache_dir: impl Into<PathBuf>) -> Self {
        Self {
            cache_dir: cache_dir.into(),
            mode: FetchMode::LocalCache,
            remote: RemoteConfig::default(),
            client: None,
        }
    }

    pub fn remote(cache_dir: impl Into<PathBuf>, remote: RemoteConfig) -> Result<Self, FetchError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(remote.timeout_secs.max(1)))
            .build()
            .map_err(|e| FetchError::Network {
                url: String::new(),
                message: e.to_string(),
            })?;
        Ok(Self {
            cache_dir: cache_dir.into(),
            mode: FetchMode::Remote,
            remote,
            client: Some(client),
        })
    }

    pub fn mode(&self) -> FetchMode {
        self.mode
    }

    fn diff_path(&self, sha: &str) -> Result<PathBuf, FetchError> {
        if !SHA_RE.is_match(sha) {
            return Err(FetchError::InvalidPath(format!("commit id `{sha}`")));
        }
        Ok(self.cache_dir.join(format!("{}.diff", sha.to_ascii_lowercase())))
    }

    fn blob_path(&self, sha: &str, side: Side, file: &str) -> Result<PathBuf, FetchError> {
        if !SHA_RE.is_match(sha) {
            return Err(FetchError::InvalidPath(format!("commit id `{sha}`")));
        }
        let rel = Path::new(file);
        let safe = !file.is_empty() && rel.components().all(|c| matches!(c, Component::Normal(_)));
        if !safe {
            return Err(FetchError::InvalidPath(format!("file path `{file}`")));
        }
        Ok(self
            .cache_dir
            .join("blobs")
            .join(sha.to_ascii_lowercase())
            .join(side.dir())
            .join(rel))
    }

    pub fn fetch_commit_diff(&self, repo_url: &str, sha: &str) -> Result<String, FetchError> {
        let path = self.diff_path(sha)?;
        let url = self.expand(&self.remote.diff_url, repo_url, sha, sha, "");
        self.cached_or_remote(&path, &url, || format!("diff for {sha}"))
    }

    pub fn fetch_file(&self, repo_url: &str, sha: &str, side: Side, file: &str) -> Result<String, FetchError> {
        let path = self.blob_path(sha, side, file)?;
        let rev = match side {
            Side::Before => format!("{sha}^"),
            Side::After => sha.to_owned(),
        };
        let url = self.expand(&self.remote.file_url, repo_url, sha, &rev, file);
        self.cached_or_remote(&path, &url, || format!("{} version of {file} at {sha}", side.dir()))
    }

    fn expand(&self, template: &str, repo_url: &str, sha: &str, rev: &str, path: &str) -> String {
        template
            .replace("{repo_url}", &normalize_repo(repo_url))
            .replace("{slug}", &repo_slug(repo_url))
            .replace("{sha}", sha)
            .replace("{rev}", rev)
            .replace("{path}", path)
    }

    fn cached_or_remote(&self, path: &Path, url: &str, what: impl Fn() -> String) -> Result<String, FetchError> {
        match fs::read(path) {
            Ok(bytes) => return Ok(String::from_utf8_lossy(&bytes).into_owned()),
            Err(e) if e.kind() != std::io::ErrorKind::NotFound => {
                return Err(FetchError::Io {
                    path: path.display().to_string(),
                    source: e,
                })
            }
            Err(_) => {}
        }
        let Some(client) = self.client.as_ref().filter(|_| self.mode == FetchMode::Remote) else {
            return Err(FetchError::CacheMiss(what()));
        };
        let network = |message: String| FetchError::Network {
            url: url.to_owned(),
            message,
        };
        let resp = client.get(url).send().map_err(|e| network(e.to_string()))?;
        let status = resp.status();
        if status.as_u16() == 404 || status.as_u16() == 410 {
            return Err(FetchError::NotFound(what()));
        }
        if !status.is_success() {
            return Err(network(format!("HTTP {status}")));
        }
        let body = resp.text().map_err(|e| network(e.to_string()))?;
        write_through(path, body.as_bytes())?;
        Ok(body)
    }
}

// Create-then-rename so concurrent writers never expose a partial file.
fn write_through(path: &Path, bytes: &[u8]) -> Result<(), FetchError> {
    let io = |source| FetchError::Io {
        path: path.display().to_string(),
        source,
    };
    let dir = path.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(io)?;
    let tmp = dir.join(format!(
        ".{}.{}.{:?}.tmp",
        path.file_name().and_then(|n| n.to_str()).unwrap_or("blob"),
        std::process::id(),
        std::thread::current().id()
    ));
    fs::write(&tmp, bytes).map_err(io)?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        io(e)
    })
}

/// Result of [`locate_function`]: a half-open line span in the file and the
/// function's name, or the whole file with `non_function` set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Located {
    pub span: LineSpan,
    pub name: String,
    pub non_function: bool,
}

/// Smallest function in `file_text` enclosing the hunk's removed range (the
/// insertion point for pure additions).
pub fn locate_function(file_text: &str, hunk: &PatchHunk, language: Language) -> Located {
    locate_enclosing(file_text, hunk.changed_pre_range(), language)
}

/// Smallest function enclosing `range`, or the whole file flagged
/// `non_function`.
pub fn locate_enclosing(file_text: &str, range: LineSpan, language: Language) -> Located {
    let line_count = split_lines(file_text).len();
    let encloses = |s: &LineSpan| {
        if range.is_empty() {
            s.contains(range.start)
        } else {
            s.start <= range.start && range.end_exclusive <= s.end_exclusive
        }
    };
    function_spans(file_text, language)
        .into_iter()
        .filter(|(s, _)| encloses(s))
        .min_by_key(|(s, _)| (s.len(), std::cmp::Reverse(s.start)))
        .map(|(span, name)| Located {
            span,
            name,
            non_function: false,
        })
        .unwrap_or(Located {
            span: LineSpan::new(0, line_count),
            name: String::new(),
            non_function: true,
        })
}

/// Every function definition found by the scanner, with its name.
pub fn function_spans(file_text: &str, language: Language) -> Vec<(LineSpan, String)> {
    let text = crate::patch::normalize_newlines(file_text);
    let tokens = tokenize(&text, language);
    let mut lines = Vec::with_capacity(tokens.len());
    let mut line = 0;
    for t in &tokens {
        lines.push(line);
        line += t.text.matches('\n').count();
    }
    let src_lines = split_lines(&text);
    match language {
        Language::Python => python_spans(&tokens, &lines, &src_lines),
        Language::C | Language::Cpp => brace_spans(&tokens, &lines, &src_lines),
    }
}

const NOT_FUNCTIONS: &[&str] = &[
    "if", "while", "for", "switch", "catch", "return", "sizeof", "do", "else", "defined", "alignof",
    "decltype", "typeof", "__typeof__", "_Alignof", "static_assert", "_Static_assert",
];
const TRAILING_QUALIFIERS: &[&str] = &["const", "noexcept", "override", "final", "volatile", "mutable", "try"];

fn is_directive(src_lines: &[String], line: usize) -> bool {
    src_lines.get(line).is_some_and(|l| l.trim_start().starts_with('#'))
}

fn brace_spans(tokens: &[Token<'_>], lines: &[usize], src_lines: &[String]) -> Vec<(LineSpan, String)> {
    // Significant tokens outside preprocessor lines.
    let sig: Vec<usize> = (0..tokens.len())
        .filter(|&i| !tokens[i].is_trivia() && !is_directive(src_lines, lines[i]))
        .collect();
    let text = |k: usize| tokens[sig[k]].text;
    let mut spans = Vec::new();
    let mut k = 0;
    while k < sig.len() {
        if text(k) != "{" {
            k += 1;
            continue;
        }
        let Some(name_at) = signature_name(&sig, tokens, k) else {
            k += 1;
            continue;
        };
        // Matching close brace.
        let mut depth = 0usize;
        let mut close = None;
        for j in k..sig.len() {
            match text(j) {
                "{" => depth += 1,
                "}" => {
                    depth -= 1;
                    if depth == 0 {
                        close = Some(j);
                        break;
                    }
                }
                _ => {}
            }
        }
        let Some(close) = close else { break };
        // Declaration starts after the previous statement or block boundary.
        let mut first = name_at;
        while first > 0 && !matches!(text(first - 1), ";" | "}" | "{") {
            first -= 1;
        }
        let start = lines[sig[first]];
        let end = lines[sig[close]] + 1;
        spans.push((LineSpan::new(start, end), text(name_at).to_owned()));
        // Function bodies are not searched for nested definitions.
        k = close + 1;
    }
    spans
}

// For a `{` at significant index `k`, the index of the function name when
// the preceding tokens look like `name ( ... ) [qualifiers] {`.
fn signature_name(sig: &[usize], tokens: &[Token<'_>], k: usize) -> Option<usize> {
    let text = |j: usize| tokens[sig[j]].text;
    let mut j = k.checked_sub(1)?;
    while tokens[sig[j]].kind == TokenKind::Ident && TRAILING_QUALIFIERS.contains(&text(j)) {
        j = j.checked_sub(1)?;
    }
    if text(j) != ")" {
        return None;
    }
    let mut depth = 0usize;
    loop {
        match text(j) {
            ")" => depth += 1,
            "(" => {
                depth -= 1;
                if depth == 0 {
                    break;
                }
            }
            "{" | "}" | ";" => return None,
            _ => {}
        }
        j = j.checked_sub(1)?;
    }
    let name = j.checked_sub(1)?;
    let tok = &tokens[sig[name]];
    (tok.kind == TokenKind::Ident && !NOT_FUNCTIONS.contains(&tok.text)).then_some(name)
}

fn indent_of(line: &str) -> usize {
    line.chars()
        .take_while(|c| c.is_whitespace())
        .map(|c| if c == '\t' { 8 } else { 1 })
        .sum()
}

fn python_spans(tokens: &[Token<'_>], lines: &[usize], src_lines: &[String]) -> Vec<(LineSpan, String)> {
    let n = src_lines.len();
    // Lines that begin a logical line: not inside brackets or a string.
    let mut logical = vec![false; n];
    let mut depth = 0i32;
    let mut continued = false;
    if n > 0 {
        logical[0] = true;
    }
    for (i, t) in tokens.iter().enumerate() {
        match t.kind {
            TokenKind::Punct => match t.text {
                "(" | "[" | "{" => depth += 1,
                ")" | "]" | "}" => depth = (depth - 1).max(0),
                "\\" => continued = true,
                _ => {}
            },
            TokenKind::Space => {
                let breaks = t.text.matches('\n').count();
                if breaks > 0 {
                    let next = lines[i] + breaks;
                    if depth == 0 && !continued && next < n {
                        logical[next] = true;
                    }
                    continued = false;
                }
            }
            TokenKind::Comment => {}
            _ => {}
        }
    }
    let blank_or_comment = |l: usize| {
        let t = src_lines[l].trim();
        t.is_empty() || t.starts_with('#')
    };
    let mut spans = Vec::new();
    let sig: Vec<usize> = (0..tokens.len()).filter(|&i| !tokens[i].is_trivia()).collect();
    for (p, &i) in sig.iter().enumerate() {
        if tokens[i].text != "def" || tokens[i].kind != TokenKind::Ident {
            continue;
        }
        let def_line = lines[i];
        let first_on_line = p == 0 || lines[sig[p - 1]] != def_line;
        let after_async = p > 0 && tokens[sig[p - 1]].text == "async" && lines[sig[p - 1]] == def_line;
        if !(first_on_line || after_async) || !logical[def_line] {
            continue;
        }
        let Some(name) = sig.get(p + 1).map(|&j| tokens[j].text) else {
            continue;
        };
        let indent = indent_of(&src_lines[def_line]);
        let mut start = def_line;
        while start > 0 && src_lines[start - 1].trim_start().starts_with('@') && indent_of(&src_lines[start - 1]) == indent
        {
            start -= 1;
        }
        let mut end = n;
        for l in def_line + 1..n {
            if logical[l] && !blank_or_comment(l) && indent_of(&src_lines[l]) <= indent {
                end = l;
                break;
            }
        }
        while end > def_line + 1 && blank_or_comment(end - 1) && indent_of(&src_lines[end - 1]) <= indent {
            end -= 1;
        }
        while end > def_line + 1 && src_lines[end - 1].trim().is_empty() {
            end -= 1;
        }
        spans.push((LineSpan::new(start, end), name.to_owned()));
    }
    spans
}

/// One hunk of a fix commit, with the enclosing function on both sides.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Candidate {
    pub candidate_id: String,
    pub cve_id: String,
    pub description: String,
    pub project_id: String,
    pub repo_url: String,
    pub commit_sha: String,
    pub file_path: String,
    pub language: Language,
    /// One fix commit touching exactly one file.
    pub single_patch: bool,
    pub hunk_index: usize,
    pub non_function: bool,
    pub span_before: LineSpan,
    pub span_after: LineSpan,
    pub function_before: FunctionSource,
    pub function_after: FunctionSource,
    /// The hunk in the functions' local coordinates.
    pub hunk: PatchHunk,
}

/// A record, commit, file or hunk that produced no candidate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Skip {
    pub cve_id: String,
    pub commit_sha: Option<String>,
    pub file_path: Option<String>,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordOutcome {
    pub candidates: Vec<Candidate>,
    pub skips: Vec<Skip>,
}

/// True iff exactly one fix commit is listed and its diff touches exactly
/// one file. `per_commit_files` holds the changed paths of each commit, or
/// `None` when its diff is unavailable.
pub fn check_single_patch(per_commit_files: &[Option<Vec<String>>]) -> bool {
    matches!(per_commit_files, [Some(files)] if files.len() == 1)
}

fn candidate_id(cve_id: &str, sha: &str, path: &str, hunk_index: usize) -> String {
    let mut h = Sha256::new();
    for part in [cve_id, sha, path, &hunk_index.to_string()] {
        h.update(part.as_bytes());
        h.update([0]);
    }
    hex::encode(h.finalize())
}

/// Fetch every fix commit of `record` and cut candidates from its hunks.
pub fn ingest_record(record: &AdvisoryRecord, fetcher: &Fetcher) -> RecordOutcome {
    let mut out = RecordOutcome::default();
    let skip = |sha: Option<&str>, path: Option<&str>, reason: String| Skip {
        cve_id: record.cve_id.clone(),
        commit_sha: sha.map(str::to_owned),
        file_path: path.map(str::to_owned),
        reason,
    };
    if record.fix_commits.is_empty() {
        out.skips.push(skip(None, None, "no fix commit".into()));
        return out;
    }
    let mut diffs = Vec::new();
    for commit in &record.fix_commits {
        let parsed = fetcher
            .fetch_commit_diff(&commit.repo_url, &commit.sha)
            .map_err(|e| e.to_string())
            .and_then(|d| parse_unified_diff(&d).map_err(|e| e.to_string()));
        match parsed {
            Ok(patches) => diffs.push((commit, Some(patches))),
            Err(e) => {
                out.skips.push(skip(Some(&commit.sha), None, e));
                diffs.push((commit, None));
            }
        }
    }
    let files: Vec<Option<Vec<String>>> = diffs
        .iter()
        .map(|(_, p)| p.as_ref().map(|ps| ps.iter().map(|p| p.path().to_owned()).collect()))
        .collect();
    let single_patch = check_single_patch(&files);

    for (commit, patches) in &diffs {
        for patch in patches.iter().flatten() {
            let path = patch.path();
            let skip_file = |reason: &str| skip(Some(&commit.sha), Some(path), reason.to_owned());
            let Some(language) = Language::from_path(path) else {
                out.skips.push(skip_file("unsupported language"));
                continue;
            };
            if patch.file_path_before == "/dev/null" || patch.file_path_after == "/dev/null" {
                out.skips.push(skip_file("file added or deleted"));
                continue;
            }
            let before = fetcher.fetch_file(&commit.repo_url, &commit.sha, Side::Before, &patch.file_path_before);
            let after = fetcher.fetch_file(&commit.repo_url, &commit.sha, Side::After, &patch.file_path_after);
            let (before, after) = match (before, after) {
                (Ok(b), Ok(a)) => (b, a),
                (Err(e), _) | (_, Err(e)) => {
                    out.skips.push(skip_file(&e.to_string()));
                    continue;
                }
            };
            for (hunk_index, hunk) in patch.hunks.iter().enumerate() {
                match build_candidate(record, commit, patch, hunk_index, hunk, language, &before, &after, single_patch) {
                    Ok(c) => out.candidates.push(c),
                    Err(reason) => out.skips.push(skip_file(&format!("hunk {hunk_index}: {reason}"))),
                }
            }
        }
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn build_candidate(
    record: &AdvisoryRecord,
    commit: &FixCommit,
    patch: &Patch,
    hunk_index: usize,
    hunk: &PatchHunk,
    language: Language,
    before: &str,
    after: &str,
    single_patch: bool,
) -> Result<Candidate, String> {
    let loc_before = locate_function(before, hunk, language);
    let loc_after = locate_enclosing(after, hunk.changed_post_range(), language);
    if loc_before.span.is_empty() || loc_after.span.is_empty() {
        return Err("empty file".into());
    }
    let origin = |path: &str, name: &str, sha: &str| Origin {
        repo_url: commit.repo_url.clone(),
        file_path: path.to_owned(),
        commit_sha: sha.to_owned(),
        function_name: name.to_owned(),
    };
    let function_before = extract_function(
        before,
        loc_before.span,
        origin(&patch.file_path_before, &loc_before.name, &format!("{}^", commit.sha)),
        language,
    )
    .map_err(|e| e.to_string())?;
    let function_after = extract_function(
        after,
        loc_after.span,
        origin(&patch.file_path_after, &loc_after.name, &commit.sha),
        language,
    )
    .map_err(|e| e.to_string())?;
    let local = hunk.rebase(loc_before.span, loc_after.span);
    if local.removed_start_line() >= function_before.len() {
        return Err("hunk lies outside the located function".into());
    }
    Ok(Candidate {
        candidate_id: candidate_id(&record.cve_id, &commit.sha, patch.path(), hunk_index),
        cve_id: record.cve_id.clone(),
        description: record.description.clone(),
        project_id: record.project_id.clone(),
        repo_url: commit.repo_url.clone(),
        commit_sha: commit.sha.clone(),
        file_path: patch.path().to_owned(),
        language,
        single_patch,
        hunk_index,
        non_function: loc_before.non_function,
        span_before: loc_before.span,
        span_after: loc_after.span,
        function_before,
        function_after,
        hunk: local,
    })
}

/// Share of advisories naming exactly one fix commit.
pub fn single_commit_count(records: &[AdvisoryRecord]) -> usize {
    records.iter().filter(|r| r.fix_commits.len() == 1).count()
}
