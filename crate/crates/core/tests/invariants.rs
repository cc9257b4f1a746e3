use proptest::prelude::*;

use cxnprobe::affinity::{analyze, global_affinity, local_affinity, pairwise_matrix};
use cxnprobe::corpus::{NgramCounter, NgramQuery};
use cxnprobe::gateway::{CachedGateway, Gateway, MockGateway, MOCK_VOCAB};
use cxnprobe::report::{Cell, ReportTable};
use cxnprobe::stats::{jsd, nucleus, roc_auc, words_to_percentile, ScoredSample};

fn vocab_sentence() -> impl Strategy<Value = String> {
    prop::collection::vec(1usize..MOCK_VOCAB.len(), 2..9).prop_map(|ids| {
        ids.iter()
            .map(|&i| MOCK_VOCAB[i])
            .collect::<Vec<_>>()
            .join(" ")
    })
}

fn distribution() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0u32..20, 1..30).prop_filter_map("all zero", |w| {
        let total: u32 = w.iter().sum();
        (total > 0).then(|| w.iter().map(|&x| x as f64 / total as f64).collect())
    })
}

const PHRASES: [&str; 4] = ["day by day", "the road", "so the", "year after year"];

fn corpus_text() -> impl Strategy<Value = String> {
    let word = prop::sample::select(vec![
        "day", "by", "the", "road", "so", "year", "after", "Day", "so.", "road,",
    ]);
    let line = prop::collection::vec(word, 0..12).prop_map(|w| w.join(" "));
    prop::collection::vec(line, 0..20).prop_map(|l| l.join("\n"))
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn affinities_lie_in_the_unit_interval(text in vocab_sentence(), seed in any::<u64>()) {
        let gw = MockGateway::new(seed);
        let s = analyze(&gw, "p", &text).unwrap();
        for i in 0..s.len() {
            let g = global_affinity(&gw, &s, i).unwrap();
            prop_assert!((0.0..=1.0).contains(&g));
            for j in 0..s.len() {
                if i != j {
                    let l = local_affinity(&gw, &s, i, j).unwrap();
                    prop_assert!((0.0..=1.0 + 1e-12).contains(&l), "{l}");
                }
            }
        }
    }

    #[test]
    fn pairwise_matrix_agrees_with_pointwise_local_affinity(text in vocab_sentence(), seed in any::<u64>()) {
        let gw = MockGateway::new(seed);
        let s = analyze(&gw, "p", &text).unwrap();
        let m = pairwise_matrix(&gw, &s).unwrap();
        for i in 0..s.len() {
            for j in 0..s.len() {
                if i != j {
                    prop_assert_eq!(m.get(i, j).unwrap().to_bits(), local_affinity(&gw, &s, i, j).unwrap().to_bits());
                }
            }
        }
    }

    #[test]
    fn caching_never_changes_results(text in vocab_sentence()) {
        let gw = MockGateway::new(5);
        let cached = CachedGateway::new(MockGateway::new(5)).unwrap();
        let s = analyze(&gw, "p", &text).unwrap();
        for _ in 0..2 {
            for i in 0..s.len() {
                prop_assert_eq!(global_affinity(&gw, &s, i).unwrap().to_bits(), global_affinity(&cached, &s, i).unwrap().to_bits());
            }
        }
        prop_assert_eq!(cached.inner_distribution_calls(), s.len() as u64);
    }

    #[test]
    fn tokenization_covers_every_word_core(text in vocab_sentence()) {
        let gw = MockGateway::new(0);
        let s = analyze(&gw, "p", &text).unwrap();
        let toks = gw.tokenize(&text).unwrap();
        for w in &s.words {
            let covered: Vec<_> = toks[w.token_start..w.token_end].iter().collect();
            prop_assert!(covered.first().unwrap().start <= w.core_start);
            prop_assert!(covered.last().unwrap().end >= w.core_end);
        }
    }

    #[test]
    fn jsd_is_bounded_and_symmetric(p in distribution(), q in distribution()) {
        let n = p.len().min(q.len());
        let renorm = |v: &[f64]| {
            let t: f64 = v[..n].iter().sum();
            if t == 0.0 { let mut u = vec![0.0; n]; u[0] = 1.0; u } else { v[..n].iter().map(|x| x / t).collect::<Vec<_>>() }
        };
        let (p, q) = (renorm(&p), renorm(&q));
        let a = jsd(&p, &q).unwrap();
        let b = jsd(&q, &p).unwrap();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&a));
        prop_assert!((a - b).abs() < 1e-12);
        prop_assert!(jsd(&p, &p).unwrap().abs() < 1e-12);
    }

    #[test]
    fn nucleus_is_a_minimal_descending_prefix(p in distribution(), q in 0.05f64..=1.0) {
        let nuc = nucleus(&p, q).unwrap();
        let mass: f64 = nuc.entries.iter().map(|&(_, m)| m).sum();
        prop_assert!(mass >= q - 1e-9);
        let drop_last = mass - nuc.entries.last().unwrap().1;
        prop_assert!(drop_last < q - 1e-12 || nuc.len() == 1);
        prop_assert!(nuc.entries.windows(2).all(|w| w[0].1 >= w[1].1));
        prop_assert_eq!(words_to_percentile(&p, q).unwrap(), nuc.len());
    }

    #[test]
    fn auc_flips_with_labels(v in prop::collection::vec((0u8..6, any::<bool>()), 2..60)) {
        prop_assume!(v.iter().any(|x| x.1) && v.iter().any(|x| !x.1));
        let a: Vec<_> = v.iter().map(|&(s, l)| ScoredSample::new(s as f64, l)).collect();
        let b: Vec<_> = v.iter().map(|&(s, l)| ScoredSample::new(s as f64, !l)).collect();
        let (x, y) = (roc_auc(&a).unwrap(), roc_auc(&b).unwrap());
        prop_assert!((0.0..=1.0).contains(&x));
        prop_assert!((x + y - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ngram_counts_are_additive_over_line_splits(text in corpus_text(), cut in any::<prop::sample::Index>()) {
        let queries: Vec<_> = PHRASES.iter().map(|p| NgramQuery::parse(p).unwrap()).collect();
        let counter = NgramCounter::new(queries.clone());
        let whole = counter.count_text(&text);
        let lines: Vec<&str> = text.split('\n').collect();
        let k = cut.index(lines.len() + 1);
        let mut parts = counter.count_text(&lines[..k].join("\n"));
        parts.merge(&counter.count_text(&lines[k..].join("\n")));
        prop_assert_eq!(whole.counts, parts.counts);
    }

    #[test]
    fn report_tsv_round_trips(vals in prop::collection::vec(prop::option::of(0.0f64..100.0), 1..10)) {
        let cols: Vec<String> = (0..vals.len()).map(|k| format!("c{k}")).collect();
        let mut t = ReportTable::new(cols.clone());
        for (c, v) in cols.iter().zip(&vals) {
            if let Some(v) = v {
                t.set("m", c, Cell { value: (v * 10.0).round() / 10.0, n_used: Some(3), n_skipped: Some(1) });
            }
        }
        if t.rows.is_empty() {
            return Ok(());
        }
        let back = ReportTable::parse_tsv(&t.to_tsv()).unwrap();
        prop_assert_eq!(back.to_tsv(), t.to_tsv());
    }
}
