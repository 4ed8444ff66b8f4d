use std::collections::{HashMap, HashSet};

use proptest::prelude::*;

use multidedup::dedup::{apply_rules, threshold_filter, CandidatePair, ExpertRule};
use multidedup::embed::{EmbeddingVector, HashedEmbedder};
use multidedup::eval::synth::{HARD_BAND, NEGATIVE_MARGIN, POSITIVE_MARGIN};
use multidedup::eval::{pseudo_languages, score, synth_corpus, GoldSet, SynthConfig};
use multidedup::index::IndexConfig;
use multidedup::normalize::{clean_text, NormalizeConfig};
use multidedup::scalar::l2;
use multidedup::{DuplicateLabel, Embedding, Index, LabeledPair, Posting};

fn unit_rows(raw: &[Vec<f64>]) -> Vec<(String, Embedding)> {
    raw.iter()
        .enumerate()
        .map(|(i, v)| (format!("p{i:03}"), EmbeddingVector::from_unnormalized(v)))
        .collect()
}

fn oracle(rows: &[(String, Embedding)], q: &[f32], k: usize) -> Vec<(String, f64)> {
    let mut all: Vec<(String, f64)> = rows
        .iter()
        .map(|(id, v)| {
            let s: f64 = q
                .iter()
                .zip(v.values())
                .map(|(a, b)| (*a as f64 - *b as f64).powi(2))
                .sum();
            (id.clone(), s.sqrt())
        })
        .collect();
    all.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
    all.truncate(k);
    all
}

fn posting(id: &str, company: Option<&str>) -> Posting {
    Posting {
        id: id.into(),
        title: "t".into(),
        description: "d".into(),
        company: company.map(Into::into),
        location: None,
        country: None,
        language: Some("en".into()),
        retrieval_date: chrono::NaiveDate::from_ymd_opt(2024, 1, 1).unwrap(),
        source: "s".into(),
    }
}

fn label() -> impl Strategy<Value = DuplicateLabel> {
    prop_oneof![
        Just(DuplicateLabel::Full),
        Just(DuplicateLabel::Semantic),
        Just(DuplicateLabel::Temporal),
    ]
}

fn labeled(pairs: &[(usize, usize, DuplicateLabel)]) -> (Vec<LabeledPair>, GoldSet) {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    let mut gold = GoldSet::default();
    for &(a, b, l) in pairs {
        if a == b || !seen.insert((a.min(b), a.max(b))) {
            continue;
        }
        let (x, y) = (format!("j{:02}", a.min(b)), format!("j{:02}", a.max(b)));
        out.push(LabeledPair {
            id_a: x.clone(),
            id_b: y.clone(),
            label: l,
            distance: None,
            reason: multidedup::dedup::Reason::ExactFingerprint,
        });
        gold.insert(&x, &y, l).unwrap();
    }
    (out, gold)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn flat_search_matches_exhaustive_scan(
        raw in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 8), 2..60),
        k in 1usize..20,
        dup in any::<bool>(),
    ) {
        let mut raw = raw;
        if dup {
            let first = raw[0].clone();
            raw.push(first);
        }
        let rows = unit_rows(&raw);
        let index = Index::build(&rows, &IndexConfig::flat(8)).unwrap();
        for (_, q) in &rows {
            let got: Vec<(String, f64)> = index
                .search(q.values(), k)
                .unwrap()
                .into_iter()
                .map(|h| (h.id, h.distance))
                .collect();
            prop_assert_eq!(got, oracle(&rows, q.values(), k));
        }
    }

    #[test]
    fn ivf_with_all_lists_probed_matches_flat(
        raw in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 6), 8..80),
        nlist in 1usize..8,
        seed in any::<u64>(),
    ) {
        let rows = unit_rows(&raw);
        let flat = Index::build(&rows, &IndexConfig::flat(6)).unwrap();
        let ivf = Index::build(&rows, &IndexConfig::ivf(6, nlist, nlist, seed)).unwrap();
        let queries: Vec<&[f32]> = rows.iter().map(|(_, v)| v.values()).collect();
        prop_assert_eq!(flat.search_batch(&queries, 5).unwrap(), ivf.search_batch(&queries, 5).unwrap());
    }

    #[test]
    fn cleaning_is_idempotent(s in "(<[a-z/ =\"]{0,8}>|&[#a-z0-9]{0,6};?|[A-Za-z]{1,6}|[ \t\n!?.,;:'-]{1,3}|\\PC){0,20}") {
        for c in [NormalizeConfig::default(), NormalizeConfig::paper_strict()] {
            let once = clean_text(&s, &c);
            prop_assert_eq!(clean_text(&once, &c), once);
        }
    }

    #[test]
    fn catch_all_rules_equal_threshold_filter(
        ds in prop::collection::vec(0.0f64..1.0, 0..40),
        theta in 0.01f64..1.0,
    ) {
        let postings: Vec<Posting> = (0..ds.len() * 2).map(|i| posting(&format!("x{i:03}"), None)).collect();
        let by_id: HashMap<&str, &Posting> = postings.iter().map(|p| (p.id.as_str(), p)).collect();
        let pairs: Vec<CandidatePair> = ds
            .iter()
            .enumerate()
            .map(|(i, &d)| CandidatePair::new(&format!("x{:03}", 2 * i), &format!("x{:03}", 2 * i + 1), d).unwrap())
            .collect();
        let want = threshold_filter(&pairs, theta);
        for rules in [vec![], vec![ExpertRule::catch_all()]] {
            let got: Vec<CandidatePair> = apply_rules(&pairs, &by_id, &rules, theta)
                .unwrap()
                .into_iter()
                .map(|r| r.pair)
                .collect();
            prop_assert_eq!(&got, &want);
        }
    }

    #[test]
    fn rules_only_tighten_when_thresholds_do(
        ds in prop::collection::vec(0.0f64..1.0, 1..40),
        companies in prop::collection::vec(prop::option::of(0u8..3), 2..80),
        theta in 0.05f64..0.6,
    ) {
        let n = ds.len() * 2;
        let postings: Vec<Posting> = (0..n)
            .map(|i| {
                let c = companies[i % companies.len()].map(|c| format!("co{c}"));
                posting(&format!("x{i:03}"), c.as_deref())
            })
            .collect();
        let by_id: HashMap<&str, &Posting> = postings.iter().map(|p| (p.id.as_str(), p)).collect();
        let pairs: Vec<CandidatePair> = ds
            .iter()
            .enumerate()
            .map(|(i, &d)| CandidatePair::new(&format!("x{:03}", 2 * i), &format!("x{:03}", 2 * i + 1), d).unwrap())
            .collect();
        // every rule threshold at or below the base: the result can only shrink
        let rules: Vec<ExpertRule> = serde_json::from_value(serde_json::json!([
            {"company": "same", "language": "any", "location": "any", "action": "threshold", "threshold": theta * 0.9},
            {"company": "different", "language": "any", "action": "reject"},
            {"company": "any", "language": "any", "action": "threshold"}
        ])).unwrap();
        let kept = apply_rules(&pairs, &by_id, &rules, theta).unwrap();
        let base: HashSet<_> = threshold_filter(&pairs, theta).into_iter().map(|p| (p.id_a, p.id_b)).collect();
        for r in kept {
            prop_assert!(base.contains(&(r.pair.id_a, r.pair.id_b)));
        }
    }

    #[test]
    fn metric_identity_on_unit_vectors(
        a in prop::collection::vec(-1.0f64..1.0, 16),
        b in prop::collection::vec(-1.0f64..1.0, 16),
    ) {
        let va: EmbeddingVector<f64> = EmbeddingVector::from_unnormalized(&a);
        let vb: EmbeddingVector<f64> = EmbeddingVector::from_unnormalized(&b);
        prop_assume!(!va.is_zero() && !vb.is_zero());
        let d = l2(va.values(), vb.values());
        let cos: f64 = va.values().iter().zip(vb.values()).map(|(x, y)| x * y).sum();
        prop_assert!((d * d - 2.0 * (1.0 - cos)).abs() <= 1e-10);
        prop_assert!((0.0..=2.0 + 1e-12).contains(&d));
    }

    #[test]
    fn perfect_prediction_scores_one_and_extra_pairs_cost_precision(
        pairs in prop::collection::vec((0usize..30, 0usize..30, label()), 1..40),
    ) {
        let (pred, gold) = labeled(&pairs);
        prop_assume!(!pred.is_empty());
        let r = score(&pred, &gold).unwrap();
        for class in [&r.full, &r.semantic, &r.temporal] {
            prop_assert_eq!(class.fp + class.fn_, 0);
        }
        // scoring is symmetric in the order of ids within a pair
        let flipped: Vec<LabeledPair> = pred
            .iter()
            .map(|p| LabeledPair { id_a: p.id_b.clone(), id_b: p.id_a.clone(), ..p.clone() })
            .collect();
        prop_assert_eq!(score(&flipped, &gold).unwrap(), r);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn generator_respects_its_margins(seed in any::<u64>(), signal in any::<bool>()) {
        let cfg = SynthConfig { n_base: 60, seed, metadata_signal: signal, hard_rate: 0.1, ..Default::default() };
        let corpus = synth_corpus(&cfg, &pseudo_languages(2)).unwrap();
        let emb = HashedEmbedder::new(cfg.dim, cfg.max_tokens).unwrap();
        let vecs: Vec<(&String, Embedding)> = corpus.english.iter().map(|(id, t)| (id, emb.embed_one(t))).collect();
        let key = |a: &str, b: &str| if a < b { (a.to_string(), b.to_string()) } else { (b.to_string(), a.to_string()) };
        let hard: HashSet<(String, String)> = corpus
            .hard_positives
            .iter()
            .chain(&corpus.hard_negatives)
            .map(|(a, b)| key(a, b))
            .collect();
        for (i, (a, va)) in vecs.iter().enumerate() {
            for (b, vb) in &vecs[i + 1..] {
                let d = l2(va.values(), vb.values());
                let k = key(a, b);
                if hard.contains(&k) {
                    prop_assert!(d >= HARD_BAND.0 && d < HARD_BAND.1, "hard pair {:?} at {}", k, d);
                } else if let Some(l) = corpus.gold.get(a, b) {
                    if l != DuplicateLabel::Full {
                        prop_assert!(d < POSITIVE_MARGIN, "{:?} pair {:?} at {}", l, k, d);
                    }
                } else {
                    prop_assert!(d > NEGATIVE_MARGIN, "unrelated pair {:?} at {}", k, d);
                }
            }
        }
    }
}
