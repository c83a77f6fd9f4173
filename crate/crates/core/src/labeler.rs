//! Ground-truth labeling and dataset recipes.
//!
//! A candidate hunk is labeled vulnerable when its advisory has a single
//! one-file fix, the oracle flags at least one line, and a flagged line
//! overlaps a line the fix removed. Everything else is unknown and left out
//! of the dataset. Negatives come from the fixed version of functions that
//! were labeled vulnerable.
//!
//! | recipe | prompt                | chunk   | labels from          |
//! |--------|-----------------------|---------|----------------------|
//! | 1      | code + description    | raw     | oracle and patch     |
//! | 2      | code only             | raw     | oracle and patch     |
//! | 3      | recipe 1, genericized | generic | recipe 1             |
//! | 4      | recipe 2, genericized | generic | recipe 2             |
//! | 5      | code + description    | raw     | oracle, whole function |
//! | 6      | code only             | raw     | oracle, whole function |

use std::collections::{BTreeMap, HashSet};

use indexmap::IndexMap;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::chunker::{
    chunk_around_lines, find_function_code_chunk, match_removed_lines, random_negative_chunk, ChunkVariant,
    CodeChunk, EditSet, NEGATIVE_MAX_LINES, NEGATIVE_MIN_LINES,
};
use crate::genericize::{genericize, rename_identifiers, Backend, GenericizeError};
pub use crate::ingest::check_single_patch;
use crate::ingest::Candidate;
use crate::oracle::{build_prompt, OracleClient, OracleVerdict, PromptVariant};
use crate::patch::{split_lines, FunctionSource, Language, LineSpan, Origin, PatchHunk};

#[derive(Debug, Error)]
pub enum LabelError {
    #[error("unknown recipe {0}; expected 1 to 6")]
    UnknownRecipe(u8),
    #[error("recipe {recipe} is derived from recipe {needs}, whose output was not supplied")]
    RecipeInputMissing { recipe: u8, needs: u8 },
    #[error("recipe {recipe} input row {row} is not a RAW recipe {needs} sample")]
    WrongRecipeInput { recipe: u8, needs: u8, row: usize },
    #[error(transparent)]
    Genericize(#[from] GenericizeError),
    #[error("building worker pool: {0}")]
    Pool(String),
}

/// Where a recipe's labels come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelSource {
    /// Oracle verdict on the patch-anchored chunk, checked against the fix.
    OracleAndPatch,
    /// Genericized copy of another recipe.
    Derived { base: u8 },
    /// Oracle verdict on the whole function, chunked around flagged lines.
    OracleOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RecipeSpec {
    pub id: u8,
    pub prompt_variant: PromptVariant,
    pub chunk_variant: ChunkVariant,
    pub source: LabelSource,
}

pub fn recipe_spec(id: u8) -> Result<RecipeSpec, LabelError> {
    use PromptVariant::{CodeOnly, CodePlusDescription};
    let (prompt_variant, chunk_variant, source) = match id {
        1 => (CodePlusDescription, ChunkVariant::Raw, LabelSource::OracleAndPatch),
        2 => (CodeOnly, ChunkVariant::Raw, LabelSource::OracleAndPatch),
        3 => (CodePlusDescription, ChunkVariant::Generic, LabelSource::Derived { base: 1 }),
        4 => (CodeOnly, ChunkVariant::Generic, LabelSource::Derived { base: 2 }),
        5 => (CodePlusDescription, ChunkVariant::Raw, LabelSource::OracleOnly),
        6 => (CodeOnly, ChunkVariant::Raw, LabelSource::OracleOnly),
        other => return Err(LabelError::UnknownRecipe(other)),
    };
    Ok(RecipeSpec {
        id,
        prompt_variant,
        chunk_variant,
        source,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Provenance {
    pub cve_id: String,
    pub project_id: String,
    pub commit_sha: String,
    pub file_path: String,
    /// Lines of the file (not the function) covered by the chunk.
    pub span: LineSpan,
    pub language: Language,
}

/// One dataset row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub sample_id: String,
    pub chunk_text: String,
    pub label: u8,
    pub recipe: u8,
    pub prompt_variant: PromptVariant,
    pub chunk_variant: ChunkVariant,
    pub provenance: Provenance,
    pub oracle: Option<OracleVerdict>,
}

impl LabeledSample {
    pub fn new(
        chunk_text: String,
        label: u8,
        spec: &RecipeSpec,
        provenance: Provenance,
        oracle: Option<OracleVerdict>,
    ) -> Self {
        let mut s = LabeledSample {
            sample_id: String::new(),
            chunk_text,
            label,
            recipe: spec.id,
            prompt_variant: spec.prompt_variant,
            chunk_variant: spec.chunk_variant,
            provenance,
            oracle,
        };
        s.sample_id = sample_id(&s.chunk_text, s.recipe, s.label, &s.provenance);
        s
    }
}

/// Hex SHA-256 over the canonical JSON of `(chunk_text, recipe, label,
/// provenance)`.
pub fn sample_id(chunk_text: &str, recipe: u8, label: u8, provenance: &Provenance) -> String {
    let canonical = serde_json::to_string(&(chunk_text, recipe, label, provenance)).expect("plain data serializes");
    hex::encode(Sha256::digest(canonical.as_bytes()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Outcome {
    Vulnerable,
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Reason {
    SinglePatchFail,
    OracleNone,
    NoOverlap,
    ChunkEmpty,
    /// The oracle could not be reached or its reply could not be parsed.
    OracleError,
    Passed,
}

impl Reason {
    fn name(self) -> &'static str {
        match self {
            Reason::SinglePatchFail => "SINGLE_PATCH_FAIL",
            Reason::OracleNone => "ORACLE_NONE",
            Reason::NoOverlap => "NO_OVERLAP",
            Reason::ChunkEmpty => "CHUNK_EMPTY",
            Reason::OracleError => "ORACLE_ERROR",
            Reason::Passed => "PASSED",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelDecision {
    pub outcome: Outcome,
    pub reason: Reason,
}

impl LabelDecision {
    fn unknown(reason: Reason) -> Self {
        LabelDecision {
            outcome: Outcome::Unknown,
            reason,
        }
    }
}

/// Label a patch-anchored chunk. `removed` and the verdict's lines are both
/// chunk-local; flagged lines past the chunk end are ignored.
pub fn decide_label(chunk: &CodeChunk, verdict: &OracleVerdict, removed: &EditSet, single_patch: bool) -> LabelDecision {
    if !single_patch {
        return LabelDecision::unknown(Reason::SinglePatchFail);
    }
    let Some(flagged) = verdict.vulnerable_lines() else {
        return LabelDecision::unknown(Reason::OracleNone);
    };
    if flagged.iter().any(|&i| i < chunk.len() && removed.as_set().contains(&i)) {
        LabelDecision {
            outcome: Outcome::Vulnerable,
            reason: Reason::Passed,
        }
    } else {
        LabelDecision::unknown(Reason::NoOverlap)
    }
}

/// Negative chunks from the fixed function: one around the added lines
/// (around the deletion point for pure removals) and one random 5 to 10
/// line window when the function is long enough.
pub fn make_negatives(fixed: &FunctionSource, hunk: &PatchHunk, seed: u64, n: usize) -> Vec<CodeChunk> {
    let last = fixed.len() - 1;
    let added: Vec<usize> = hunk.added_positions().map(|(i, _)| i).filter(|&i| i <= last).collect();
    let anchor = EditSet::new(added).unwrap_or_else(|_| {
        EditSet::new([hunk.changed_post_range().start.min(last)]).expect("one index")
    });
    let mut out = vec![chunk_around_lines(fixed, &anchor, n).expect("anchor lies inside the function")];
    if let Ok(random) = random_negative_chunk(fixed, seed, NEGATIVE_MIN_LINES, NEGATIVE_MAX_LINES) {
        out.push(random);
    }
    out
}

/// Per-candidate seed: the run seed mixed with a stable key.
pub fn derive_seed(run_seed: u64, key: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(run_seed.to_le_bytes());
    h.update(key.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SkipReason {
    /// The recipe's prompt needs an advisory description and there is none.
    NoDescription,
    /// The hunk's coordinates do not fit the located function.
    ChunkError,
}

impl SkipReason {
    fn name(self) -> &'static str {
        match self {
            SkipReason::NoDescription => "NO_DESCRIPTION",
            SkipReason::ChunkError => "CHUNK_ERROR",
        }
    }
}

/// Run statistics. `vulnerable + unknown + skipped == total`, where `total`
/// counts labeling units (candidate hunks, or functions for recipes 5 and 6).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecipeStats {
    pub total: usize,
    pub vulnerable: usize,
    pub non_vulnerable: usize,
    pub unknown: usize,
    pub skipped: usize,
    pub reasons: BTreeMap<String, usize>,
    pub skip_reasons: BTreeMap<String, usize>,
    /// Negatives dropped because their text also occurs as a positive.
    pub leak_dropped: usize,
    /// Samples dropped to balance the classes.
    pub balance_dropped: usize,
}

impl RecipeStats {
    pub fn is_conserved(&self) -> bool {
        self.vulnerable + self.unknown + self.skipped == self.total
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BuildOptions {
    pub n: usize,
    pub seed: u64,
    pub jobs: usize,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self {
            n: crate::chunker::DEFAULT_EXTENSION,
            seed: 0,
            jobs: 1,
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Status {
    Decided(LabelDecision),
    Skipped(SkipReason),
}

struct UnitResult {
    status: Status,
    positives: Vec<LabeledSample>,
    negatives: Vec<LabeledSample>,
}

impl UnitResult {
    fn status(status: Status) -> Self {
        UnitResult {
            status,
            positives: Vec::new(),
            negatives: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RecipeOutput {
    pub samples: Vec<LabeledSample>,
    pub stats: RecipeStats,
}

/// Build recipe 1, 2, 5 or 6 from ingested candidates. Recipes 3 and 4 are
/// built from their base recipe's output with [`derive_generic`].
pub fn build_recipe(
    recipe: u8,
    candidates: &[Candidate],
    client: &OracleClient,
    opts: &BuildOptions,
) -> Result<RecipeOutput, LabelError> {
    let spec = recipe_spec(recipe)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs.max(1))
        .build()
        .map_err(|e| LabelError::Pool(e.to_string()))?;
    match spec.source {
        LabelSource::Derived { base } => Err(LabelError::RecipeInputMissing { recipe, needs: base }),
        LabelSource::OracleAndPatch => {
            let units: Vec<UnitResult> =
                pool.install(|| candidates.par_iter().map(|c| label_hunk(&spec, c, client, opts)).collect());
            Ok(assemble(units, None))
        }
        LabelSource::OracleOnly => {
            let mut groups: IndexMap<(&str, &str, &str, LineSpan), Vec<&Candidate>> = IndexMap::new();
            for c in candidates {
                groups
                    .entry((&c.cve_id, &c.commit_sha, &c.file_path, c.span_before))
                    .or_default()
                    .push(c);
            }
            let groups: Vec<Vec<&Candidate>> = groups.into_values().collect();
            let units: Vec<UnitResult> =
                pool.install(|| groups.par_iter().map(|g| label_function(&spec, g, client, opts)).collect());
            Ok(assemble(units, Some(opts.seed)))
        }
    }
}

fn shifted(span: LineSpan, by: usize) -> LineSpan {
    LineSpan::new(span.start + by, span.end_exclusive + by)
}

fn provenance(c: &Candidate, file_span: LineSpan) -> Provenance {
    Provenance {
        cve_id: c.cve_id.clone(),
        project_id: c.project_id.clone(),
        commit_sha: c.commit_sha.clone(),
        file_path: c.file_path.clone(),
        span: file_span,
        language: c.language,
    }
}

fn negatives_for(spec: &RecipeSpec, c: &Candidate, opts: &BuildOptions) -> Vec<LabeledSample> {
    let seed = derive_seed(opts.seed, &c.candidate_id);
    make_negatives(&c.function_after, &c.hunk, seed, opts.n)
        .into_iter()
        .map(|chunk| {
            let prov = provenance(c, shifted(chunk.span, c.span_after.start));
            LabeledSample::new(chunk.text(), 0, spec, prov, None)
        })
        .collect()
}

fn needs_description(spec: &RecipeSpec, c: &Candidate) -> bool {
    spec.prompt_variant == PromptVariant::CodePlusDescription && c.description.trim().is_empty()
}

fn label_hunk(spec: &RecipeSpec, c: &Candidate, client: &OracleClient, opts: &BuildOptions) -> UnitResult {
    if needs_description(spec, c) {
        return UnitResult::status(Status::Skipped(SkipReason::NoDescription));
    }
    if !c.single_patch {
        return UnitResult::status(Status::Decided(LabelDecision::unknown(Reason::SinglePatchFail)));
    }
    let f = &c.function_before;
    let chunk = match find_function_code_chunk(f, &c.hunk, opts.n) {
        Err(_) => return UnitResult::status(Status::Skipped(SkipReason::ChunkError)),
        Ok(None) => return UnitResult::status(Status::Decided(LabelDecision::unknown(Reason::ChunkEmpty))),
        Ok(Some(chunk)) => chunk,
    };
    let matched = match_removed_lines(f, &c.hunk).expect("chunking already validated the window");
    let removed = EditSet::new(chunk.to_local(matched)).expect("chunk covers its edits");
    let prompt = build_prompt(&chunk.text(), spec.prompt_variant, Some(&c.description));
    let verdict = match prompt.and_then(|p| client.query(&p)) {
        Ok(v) => v,
        Err(e) => {
            log::debug!("{} hunk {}: {e}", c.cve_id, c.hunk_index);
            return UnitResult::status(Status::Decided(LabelDecision::unknown(Reason::OracleError)));
        }
    };
    let decision = decide_label(&chunk, &verdict, &removed, c.single_patch);
    if decision.outcome != Outcome::Vulnerable {
        return UnitResult::status(Status::Decided(decision));
    }
    let prov = provenance(c, shifted(chunk.span, c.span_before.start));
    UnitResult {
        status: Status::Decided(decision),
        positives: vec![LabeledSample::new(chunk.text(), 1, spec, prov, Some(verdict))],
        negatives: negatives_for(spec, c, opts),
    }
}

fn label_function(spec: &RecipeSpec, group: &[&Candidate], client: &OracleClient, opts: &BuildOptions) -> UnitResult {
    let c = group[0];
    if needs_description(spec, c) {
        return UnitResult::status(Status::Skipped(SkipReason::NoDescription));
    }
    let f = &c.function_before;
    let prompt = build_prompt(&f.text(), spec.prompt_variant, Some(&c.description));
    let verdict = match prompt.and_then(|p| client.query(&p)) {
        Ok(v) => v,
        Err(e) => {
            log::debug!("{} function {}: {e}", c.cve_id, c.span_before);
            return UnitResult::status(Status::Decided(LabelDecision::unknown(Reason::OracleError)));
        }
    };
    let flagged = verdict
        .vulnerable_lines()
        .map(|lines| lines.iter().copied().filter(|&i| i < f.len()).collect::<Vec<_>>())
        .and_then(|lines| EditSet::new(lines).ok());
    let Some(flagged) = flagged else {
        return UnitResult::status(Status::Decided(LabelDecision::unknown(Reason::OracleNone)));
    };
    let chunk = chunk_around_lines(f, &flagged, opts.n).expect("flagged lines are inside the function");
    let prov = provenance(c, shifted(chunk.span, c.span_before.start));
    UnitResult {
        status: Status::Decided(LabelDecision {
            outcome: Outcome::Vulnerable,
            reason: Reason::Passed,
        }),
        positives: vec![LabeledSample::new(chunk.text(), 1, spec, prov, Some(verdict))],
        negatives: group.iter().flat_map(|c| negatives_for(spec, c, opts)).collect(),
    }
}

fn generic_key(s: &LabeledSample) -> String {
    rename_identifiers(&s.chunk_text, s.provenance.language).0
}

fn dedup_sorted(mut v: Vec<LabeledSample>) -> Vec<LabeledSample> {
    v.sort_by(|a, b| a.sample_id.cmp(&b.sample_id));
    v.dedup_by(|a, b| a.sample_id == b.sample_id);
    v
}

fn assemble(units: Vec<UnitResult>, balance_seed: Option<u64>) -> RecipeOutput {
    let mut stats = RecipeStats::default();
    let mut positives = Vec::new();
    let mut negatives = Vec::new();
    for u in units {
        stats.total += 1;
        match u.status {
            Status::Decided(d) => {
                *stats.reasons.entry(d.reason.name().to_owned()).or_default() += 1;
                match d.outcome {
                    Outcome::Vulnerable => stats.vulnerable += 1,
                    Outcome::Unknown => stats.unknown += 1,
                }
            }
            Status::Skipped(r) => {
                stats.skipped += 1;
                *stats.skip_reasons.entry(r.name().to_owned()).or_default() += 1;
            }
        }
        positives.extend(u.positives);
        negatives.extend(u.negatives);
    }
    let mut positives = dedup_sorted(positives);
    let mut negatives = dedup_sorted(negatives);

    // A text (raw, or after genericization) may carry only one label.
    let positive_texts: HashSet<String> = positives
        .iter()
        .flat_map(|s| [s.chunk_text.clone(), generic_key(s)])
        .collect();
    let before = negatives.len();
    negatives.retain(|s| !positive_texts.contains(&s.chunk_text) && !positive_texts.contains(&generic_key(s)));
    stats.leak_dropped = before - negatives.len();

    if let Some(seed) = balance_seed {
        let keep = positives.len().min(negatives.len());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for class in [&mut positives, &mut negatives] {
            if class.len() > keep {
                stats.balance_dropped += class.len() - keep;
                class.shuffle(&mut rng);
                class.truncate(keep);
            }
        }
    }
    stats.non_vulnerable = negatives.len();
    let mut samples = positives;
    samples.extend(negatives);
    samples.sort_by(|a, b| a.sample_id.cmp(&b.sample_id));
    RecipeOutput { samples, stats }
}

/// Recipe 3 or 4: genericize every sample of the base recipe, keeping order
/// and labels.
pub fn derive_generic(
    recipe: u8,
    base: Option<&[LabeledSample]>,
    backend: &Backend<'_>,
) -> Result<Vec<LabeledSample>, LabelError> {
    let spec = recipe_spec(recipe)?;
    let LabelSource::Derived { base: needs } = spec.source else {
        return Err(LabelError::UnknownRecipe(recipe));
    };
    let base = base.ok_or(LabelError::RecipeInputMissing { recipe, needs })?;
    base.iter()
        .enumerate()
        .map(|(row, s)| {
            if s.recipe != needs || s.chunk_variant != ChunkVariant::Raw {
                return Err(LabelError::WrongRecipeInput { recipe, needs, row });
            }
            let raw = CodeChunk {
                text_lines: split_lines(&s.chunk_text),
                span: s.provenance.span,
                variant: ChunkVariant::Raw,
                language: s.provenance.language,
                source_origin: Origin::default(),
            };
            let (generic, _) = genericize(&raw, backend)?;
            Ok(LabeledSample::new(
                generic.text(),
                s.label,
                &spec,
                s.provenance.clone(),
                s.oracle.clone(),
            ))
        })
        .collect()
}

/// Stats for a derived recipe: the base's counts carry over unchanged.
pub fn derived_stats(base_stats: Option<RecipeStats>, samples: &[LabeledSample]) -> RecipeStats {
    base_stats.unwrap_or_else(|| {
        let vulnerable = samples.iter().filter(|s| s.label == 1).count();
        RecipeStats {
            total: vulnerable,
            vulnerable,
            non_vulnerable: samples.len() - vulnerable,
            ..RecipeStats::default()
        }
    })
}
