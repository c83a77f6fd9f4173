mod support {
    pub mod corpus;
}

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fs;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use support::corpus;
use vulnchunk_core::chunker::{find_function_code_chunk, EditSet};
use vulnchunk_core::genericize::Backend;
use vulnchunk_core::labeler::{
    build_recipe, decide_label, derive_generic, derived_stats, BuildOptions, LabelError, LabeledSample, Outcome,
    Reason,
};
use vulnchunk_core::oracle::{BackendError, OracleBackend, OracleVerdict};
use vulnchunk_core::{ChunkVariant, CodeChunk, Language, LineSpan, Origin};

struct Counting {
    inner: Arc<dyn OracleBackend>,
    calls: AtomicUsize,
}

impl OracleBackend for Counting {
    fn id(&self) -> &str {
        self.inner.id()
    }

    fn complete(&self, prompt: &str) -> Result<String, BackendError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.inner.complete(prompt)
    }
}

fn build(recipe: u8, seed: u64, jobs: usize) -> (Vec<LabeledSample>, vulnchunk_core::labeler::RecipeStats) {
    let out = build_recipe(
        recipe,
        &corpus::candidates(),
        &corpus::client(corpus::mock_backend()),
        &BuildOptions { n: 3, seed, jobs },
    )
    .unwrap();
    (out.samples, out.stats)
}

#[test]
fn decision_truth_table() {
    let chunk = CodeChunk {
        text_lines: vec!["x".into(); 8],
        span: LineSpan::new(0, 8),
        variant: ChunkVariant::Raw,
        language: Language::C,
        source_origin: Origin::default(),
    };
    let removed = EditSet::new([3]).unwrap();
    let mut vulnerable = 0;
    for single_patch in [false, true] {
        for oracle_none in [false, true] {
            for overlap in [false, true] {
                let lines = if overlap { vec![3] } else { vec![6] };
                let verdict = OracleVerdict {
                    line_code: (!oracle_none).then(|| vec!["x".into()]),
                    vul_lines: (!oracle_none).then_some(lines),
                    vul_category: (!oracle_none).then(|| vec!["CWE-20".into()]),
                    raw_response: String::new(),
                    backend_id: "t".into(),
                };
                let d = decide_label(&chunk, &verdict, &removed, single_patch);
                let expected = single_patch && !oracle_none && overlap;
                assert_eq!(d.outcome == Outcome::Vulnerable, expected, "{single_patch} {oracle_none} {overlap}");
                let reason = match (single_patch, oracle_none, overlap) {
                    (false, _, _) => Reason::SinglePatchFail,
                    (true, true, _) => Reason::OracleNone,
                    (true, false, false) => Reason::NoOverlap,
                    (true, false, true) => Reason::Passed,
                };
                assert_eq!(d.reason, reason);
                vulnerable += expected as usize;
            }
        }
    }
    assert_eq!(vulnerable, 1);
}

#[test]
fn recipe_two_matches_golden_file() {
    let golden = fs::read_to_string(corpus::corpus40().join("golden_recipe2.jsonl")).unwrap();
    let (samples, _) = build(2, 0, 1);
    assert_eq!(corpus::to_jsonl(&samples), golden);
    let (parallel, _) = build(2, 0, 8);
    assert_eq!(parallel, samples);
}

#[test]
fn seed_moves_random_negatives_only() {
    let (a, _) = build(2, 0, 2);
    let (b, _) = build(2, 1, 2);
    assert_ne!(a, b);
    let positives = |s: &[LabeledSample]| -> Vec<String> {
        s.iter().filter(|x| x.label == 1).map(|x| x.sample_id.clone()).collect()
    };
    assert_eq!(positives(&a), positives(&b));
}

#[test]
fn patch_recipes_respect_labeling_rules() {
    let candidates = corpus::candidates();
    let policies = corpus::policies();
    let single: HashMap<&str, bool> = candidates.iter().map(|c| (c.cve_id.as_str(), c.single_patch)).collect();
    for recipe in [1, 2] {
        let (samples, stats) = build(recipe, 0, 4);
        assert!(stats.is_conserved());
        assert_eq!(stats.total, candidates.len());
        assert_eq!(samples.iter().filter(|s| s.label == 1).count(), stats.vulnerable);
        assert_eq!(samples.iter().filter(|s| s.label == 0).count(), stats.non_vulnerable);
        for s in samples.iter().filter(|s| s.label == 1) {
            let cve = s.provenance.cve_id.as_str();
            assert!(single[cve], "{cve} is not a single-patch fix");
            assert!(
                ["hit", "noisy", "python_dict", "fail_once"].contains(&policies[cve].as_str()),
                "{cve} answered {}",
                policies[cve]
            );
            let v = s.oracle.as_ref().unwrap();
            assert!(v.vulnerable_lines().is_some());
        }
        let no_leak: HashSet<&str> = samples.iter().filter(|s| s.label == 1).map(|s| s.chunk_text.as_str()).collect();
        assert!(samples.iter().filter(|s| s.label == 0).all(|s| !no_leak.contains(s.chunk_text.as_str())));
        let ids: BTreeSet<&str> = samples.iter().map(|s| s.sample_id.as_str()).collect();
        assert_eq!(ids.len(), samples.len());
    }
}

#[test]
fn oracle_is_asked_only_for_eligible_hunks() {
    let candidates = corpus::candidates();
    let policies = corpus::policies();
    let counting = Arc::new(Counting {
        inner: corpus::mock_backend(),
        calls: AtomicUsize::new(0),
    });
    let client = corpus::client(counting.clone());
    build_recipe(2, &candidates, &client, &BuildOptions::default()).unwrap();
    let mut expected = 0;
    for c in &candidates {
        if !c.single_patch || !matches!(find_function_code_chunk(&c.function_before, &c.hunk, 3), Ok(Some(_))) {
            continue;
        }
        // A scripted failure costs one extra call.
        expected += if policies[&c.cve_id] == "fail_once" { 2 } else { 1 };
    }
    assert_eq!(counting.calls.load(Ordering::SeqCst), expected);
}

#[test]
fn generic_recipes_mirror_their_base() {
    for (base, derived) in [(1u8, 3u8), (2, 4)] {
        let (samples, stats) = build(base, 0, 2);
        let generic = derive_generic(derived, Some(&samples), &Backend::RuleBased).unwrap();
        assert_eq!(generic.len(), samples.len());
        for (g, s) in generic.iter().zip(&samples) {
            assert_eq!(g.label, s.label);
            assert_eq!(g.provenance, s.provenance);
            assert_eq!(g.recipe, derived);
            assert_eq!(g.chunk_variant, ChunkVariant::Generic);
            assert_eq!(g.prompt_variant, s.prompt_variant);
        }
        let positives: HashSet<&str> = generic.iter().filter(|s| s.label == 1).map(|s| s.chunk_text.as_str()).collect();
        assert!(generic.iter().filter(|s| s.label == 0).all(|s| !positives.contains(s.chunk_text.as_str())));
        assert_eq!(derived_stats(Some(stats.clone()), &generic), stats);
        assert!(matches!(
            derive_generic(derived, None, &Backend::RuleBased),
            Err(LabelError::RecipeInputMissing { needs, .. }) if needs == base
        ));
    }
}

#[test]
fn function_recipes_are_balanced() {
    for recipe in [5, 6] {
        let (samples, stats) = build(recipe, 0, 3);
        let positives = samples.iter().filter(|s| s.label == 1).count();
        assert!(positives > 0);
        assert_eq!(positives * 2, samples.len());
        assert!(stats.is_conserved());
        for s in samples.iter().filter(|s| s.label == 1) {
            assert!(s.oracle.as_ref().unwrap().vulnerable_lines().is_some());
        }
    }
}

#[test]
fn derived_recipe_cannot_be_built_directly() {
    let err = build_recipe(
        3,
        &[],
        &corpus::client(corpus::mock_backend()),
        &BuildOptions::default(),
    )
    .unwrap_err();
    assert!(matches!(err, LabelError::RecipeInputMissing { recipe: 3, needs: 1 }));
}
