mod common;

use proptest::prelude::*;
use simt_core::curation::{merge_short_chunks, run_pipeline, CurationConfig, MergeRule, MergeSide, Stage};
use simt_core::{validate_record, AlignedChunkRecord};

fn concat(chunks: &[Vec<String>]) -> Vec<String> {
    chunks.iter().flatten().cloned().collect()
}

fn side() -> impl Strategy<Value = MergeSide> {
    prop::sample::select(vec![MergeSide::Source, MergeSide::Target, MergeSide::Either])
}

/// Records that may be misaligned or unscored.
fn raw_record() -> impl Strategy<Value = AlignedChunkRecord> {
    (
        common::record(8, 4),
        any::<bool>(),
        prop::option::of(60.0f64..100.0),
    )
        .prop_map(|(mut r, misalign, score)| {
            if misalign && r.target_chunks.len() > 1 {
                r.target_chunks.pop();
            }
            r.quality_score = score;
            r
        })
}

proptest! {
    #[test]
    fn merge_preserves_words_and_is_idempotent(r in common::record(10, 3), side in side(), min in 1usize..4) {
        let rule = MergeRule { min_words: min, side, ..MergeRule::default() };
        let m = merge_short_chunks(&r, &rule);
        prop_assert_eq!(concat(&m.source_chunks), concat(&r.source_chunks));
        prop_assert_eq!(concat(&m.target_chunks), concat(&r.target_chunks));
        prop_assert_eq!(m.source_chunks.len(), m.target_chunks.len());
        prop_assert_eq!(&merge_short_chunks(&m, &rule), &m);
        // post-merge scan oracle: only a lone chunk may stay short
        if m.source_chunks.len() > 1 && side == MergeSide::Source {
            prop_assert!(m.source_chunks.iter().all(|c| c.len() >= min));
        }
    }

    #[test]
    fn pipeline_output_is_valid_and_stable(corpus in prop::collection::vec(raw_record(), 0..20)) {
        let cfg = CurationConfig { min_source_words: 6, quality_threshold: None, ..CurationConfig::default() };
        let once = run_pipeline(&corpus, &cfg);
        for r in &once.kept {
            prop_assert!(validate_record(r).is_ok());
        }
        let twice = run_pipeline(&once.kept, &cfg);
        prop_assert_eq!(twice.kept, once.kept);
        prop_assert!(twice.drops.is_empty());
    }

    #[test]
    fn filter_order_only_changes_attribution(corpus in prop::collection::vec(raw_record(), 0..20)) {
        let scored: Vec<_> = corpus.into_iter().map(|mut r| { r.quality_score.get_or_insert(70.0); r }).collect();
        let base = CurationConfig { min_source_words: 6, ..CurationConfig::default() };
        let orders = [
            vec![Stage::SourceLength, Stage::Alignment, Stage::Quality],
            vec![Stage::Quality, Stage::SourceLength, Stage::Alignment],
            vec![Stage::Alignment, Stage::Quality, Stage::SourceLength],
            vec![Stage::Quality, Stage::Alignment, Stage::SourceLength],
        ];
        let reference = run_pipeline(&scored, &base);
        for order in orders {
            let cfg = CurationConfig { filter_order: order, ..base.clone() };
            let out = run_pipeline(&scored, &cfg);
            prop_assert_eq!(&out.kept, &reference.kept);
            prop_assert_eq!(out.drops.len(), reference.drops.len());
        }
    }
}
