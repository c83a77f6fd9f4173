//! Build labeled function-level code chunk vulnerability datasets from
//! security advisories and their fix commits.
//!
//! The pipeline stages map onto modules:
//!
//! * [`patch`] parses unified diffs and slices function sources.
//! * [`chunker`] cuts context windows around edited or flagged lines.
//! * [`genericize`] renames identifiers to `F<k>` / `v<k>` placeholders.
//! * [`oracle`] prompts a line-level vulnerability oracle and parses verdicts.
//! * [`labeler`] applies the ground-truth rules and assembles dataset recipes.
//! * [`ingest`] reads OSV advisories, fetches diffs and locates functions.
//! * [`metrics`] scores predictions and splits datasets for evaluation.

pub mod chunker;
pub mod genericize;
pub mod ingest;
pub mod labeler;
pub mod metrics;
pub mod oracle;
pub mod patch;

pub use chunker::{ChunkVariant, CodeChunk, EditSet};
pub use patch::{FunctionSource, Language, LineSpan, Origin, Patch, PatchHunk};
