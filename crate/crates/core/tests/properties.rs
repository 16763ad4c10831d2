//! Property tests for detector, metric and parsing invariants.

use proptest::prelude::*;

use mtcheck::detection::{judge_contrastive, match_exhaustive, max_sim, MatchMode, MockEmbedder};
use mtcheck::generation::{filter_sentences, SeenSentences};
use mtcheck::metrics::{
    bootstrap_ci, diversity_series, macro_pass_rate, paired_bootstrap, pass_rate, trend_fit_points, trend_value,
    ResampleConfig, Sample,
};
use mtcheck::model::{dedupe_candidates, parse_bracketed, CandidateSet, ContrastivePair, TestCase};
use mtcheck::text::{fold, TokenizerConfig};

fn naive_contains(hay: &str, needle: &str) -> bool {
    let (h, n) = (fold(hay), fold(needle));
    !n.is_empty() && (0..=h.len().saturating_sub(n.len())).any(|i| h.get(i..i + n.len()) == Some(n.as_str()))
}

fn word() -> impl Strategy<Value = String> {
    "[a-zäöüßA-ZÄÖÜ0-9.,]{1,6}"
}

fn words(max: usize) -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec(word(), 0..max)
}

fn candidate_set() -> impl Strategy<Value = CandidateSet> {
    prop::collection::vec("[a-zäßA-Z0-9,]{1,4}", 1..5).prop_filter_map("all duplicates", |raw| {
        let c = dedupe_candidates(raw);
        (!c.is_empty()).then(|| CandidateSet {
            value: "v".into(),
            candidates: c,
        })
    })
}

fn labelled_bits(max: usize) -> impl Strategy<Value = Vec<(u8, bool)>> {
    prop::collection::vec((0u8..5, any::<bool>()), 1..max)
}

fn sample(bits: &[(u8, bool)]) -> Sample {
    Sample::new(bits.iter().map(|(v, b)| (format!("v{v}"), *b))).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn exhaustive_matches_naive_scan(t in words(8), set in candidate_set()) {
        let text = t.join(" ");
        let out = match_exhaustive(&text, &set, MatchMode::Substring);
        let want = set.candidates.iter().find(|c| naive_contains(&text, c)).cloned();
        prop_assert_eq!(out.pass, want.is_some());
        prop_assert_eq!(out.matched_candidate, want);
    }

    #[test]
    fn exhaustive_ignores_case(t in words(8), set in candidate_set()) {
        let text = t.join(" ");
        let a = match_exhaustive(&text, &set, MatchMode::Substring).pass;
        prop_assert_eq!(a, match_exhaustive(&text.to_uppercase(), &set, MatchMode::Substring).pass);
        prop_assert_eq!(a, match_exhaustive(&text.to_lowercase(), &set, MatchMode::Substring).pass);
    }

    #[test]
    fn adding_candidates_never_breaks_a_pass(t in words(8), set in candidate_set(), extra in "[a-z]{1,4}") {
        let text = t.join(" ");
        let before = match_exhaustive(&text, &set, MatchMode::Substring).pass;
        let mut grown = set.clone();
        grown.candidates = dedupe_candidates(grown.candidates.iter().cloned().chain([extra]));
        prop_assert!(!before || match_exhaustive(&text, &grown, MatchMode::Substring).pass);
    }

    #[test]
    fn boundary_mode_is_stricter(t in words(8), set in candidate_set()) {
        let text = t.join(" ");
        if match_exhaustive(&text, &set, MatchMode::TokenBoundary).pass {
            prop_assert!(match_exhaustive(&text, &set, MatchMode::Substring).pass);
        }
    }

    #[test]
    fn max_sim_is_bounded_and_exact_on_contained_phrases(t in prop::collection::vec("[a-z]{1,5}", 1..8), start in 0usize..8, len in 1usize..4) {
        let emb = MockEmbedder::new(24);
        let tok = TokenizerConfig::default();
        let text = t.join(" ");
        let start = start % t.len();
        let end = (start + len).min(t.len());
        let phrase = t[start..end].join(" ");
        let s = max_sim(&text, &phrase, &emb, &tok).unwrap();
        prop_assert!((-1.0..=1.0).contains(&s));
        prop_assert!(s > 1.0 - 1e-12, "{phrase:?} in {text:?}: {s}");
    }

    #[test]
    fn contrastive_pass_iff_correct_not_below_foil(t in words(8), c in "[a-z]{1,5}( [a-z]{1,5})?", f in "[a-z]{1,5}( [a-z]{1,5}){0,2}") {
        prop_assume!(fold(&c) != fold(&f));
        let emb = MockEmbedder::new(24);
        let tok = TokenizerConfig::default();
        let text = t.join(" ");
        let pair = ContrastivePair::new("v", vec![c.clone()], vec![f.clone()]).unwrap();
        let out = judge_contrastive(&text, &pair, &emb, &tok).unwrap();
        prop_assert_eq!(out.scores.correct, max_sim(&text, &c, &emb, &tok).unwrap());
        prop_assert_eq!(out.scores.foil, max_sim(&text, &f, &emb, &tok).unwrap());
        prop_assert_eq!(out.pass, out.scores.correct.is_finite() && out.scores.correct >= out.scores.foil);
    }

    #[test]
    fn rates_lie_between_group_extremes(bits in labelled_bits(60)) {
        let s = sample(&bits);
        let rates: Vec<f64> = s.groups().iter()
            .map(|(_, b)| b.iter().filter(|x| **x).count() as f64 / b.len() as f64)
            .collect();
        let lo = rates.iter().copied().fold(1.0, f64::min);
        let hi = rates.iter().copied().fold(0.0, f64::max);
        for r in [pass_rate(&s), macro_pass_rate(&s)] {
            prop_assert!(lo - 1e-12 <= r && r <= hi + 1e-12);
        }
    }

    #[test]
    fn singleton_groups_make_rates_equal(bits in prop::collection::vec(any::<bool>(), 1..80)) {
        let s = Sample::new(bits.iter().enumerate().map(|(i, b)| (i.to_string(), *b))).unwrap();
        prop_assert_eq!(pass_rate(&s), macro_pass_rate(&s));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn bootstrap_interval_is_ordered_and_reproducible(bits in labelled_bits(80), seed in any::<u64>()) {
        let s = sample(&bits);
        let cfg = ResampleConfig { k: 200, alpha: 0.1, seed };
        let ci = bootstrap_ci(&s, &cfg).unwrap();
        prop_assert!(0.0 <= ci.lo && ci.lo <= ci.hi && ci.hi <= 1.0);
        prop_assert_eq!(ci, bootstrap_ci(&s, &cfg).unwrap());
    }

    #[test]
    fn paired_comparison_is_antisymmetric(rows in prop::collection::vec((0u8..4, any::<bool>(), any::<bool>()), 1..50), seed in any::<u64>()) {
        let a = Sample::new(rows.iter().map(|(v, x, _)| (v.to_string(), *x))).unwrap();
        let b = Sample::new(rows.iter().map(|(v, _, y)| (v.to_string(), *y))).unwrap();
        let cfg = ResampleConfig { k: 150, alpha: 0.05, seed };
        let ab = paired_bootstrap(&a, &b, &cfg).unwrap();
        let ba = paired_bootstrap(&b, &a, &cfg).unwrap();
        prop_assert_eq!(ab.winner, ba.winner.swapped());
        prop_assert_eq!(ab.p_value, ba.p_value);
        prop_assert_eq!((ab.wins_a, ab.wins_b, ab.ties), (ba.wins_b, ba.wins_a, ba.ties));
        prop_assert!((0.0..=0.5).contains(&ab.p_value));
    }

    #[test]
    fn trend_residual_is_orthogonal_to_design(ys in prop::collection::vec(0.0f64..1.0, 6..60), degree in 0usize..4) {
        let points: Vec<(f64, f64)> = ys.iter().enumerate().map(|(i, y)| (i as f64, *y)).collect();
        let coefs = trend_fit_points(&points, degree).unwrap();
        prop_assert_eq!(coefs.len(), degree + 1);
        let resid: Vec<f64> = points.iter().map(|(x, y)| y - trend_value(&coefs, *x)).collect();
        for p in 0..=degree as i32 {
            let col: Vec<f64> = points.iter().map(|(x, _)| x.powi(p)).collect();
            let dot: f64 = col.iter().zip(&resid).map(|(c, r)| c * r).sum();
            let norm = col.iter().map(|c| c * c).sum::<f64>().sqrt();
            prop_assert!(dot.abs() <= 1e-7 * norm * (ys.len() as f64).sqrt(), "power {p}: {dot}");
        }
    }

    #[test]
    fn diversity_values_are_fractions(suite in prop::collection::vec(prop::collection::vec("[a-d]", 0..7), 1..25), n in 1usize..4) {
        let lines: Vec<String> = suite.iter().map(|w| w.join(" ")).collect();
        let s = diversity_series(lines.iter().map(String::as_str), n, &TokenizerConfig::default()).unwrap();
        prop_assert_eq!(s.values.len(), lines.len());
        prop_assert!(s.values.iter().flatten().all(|v| (0.0..=1.0).contains(v)));
        prop_assert!(s.cumulative.windows(2).all(|w| w[0] <= w[1]));
    }
}

proptest! {
    #[test]
    fn bracket_parse_reconstructs_raw(pre in "[^\\[\\]]{0,12}", value in "[^\\[\\]]{0,6}[a-z0-9][^\\[\\]]{0,6}", post in "[^\\[\\]]{0,12}") {
        let raw = format!("{pre}[{value}]{post}");
        let case = TestCase::from_raw("p-0001", "p", raw.clone()).unwrap();
        prop_assert_eq!(&case.source, &format!("{pre}{value}{post}"));
        prop_assert_eq!(&case.value, &value);
        let inside: String = case.source.chars().skip(case.value_span.start).take(case.value_span.len()).collect();
        prop_assert_eq!(&inside, &value);
        prop_assert_eq!(case.reconstruct_raw(), raw);
    }

    #[test]
    fn extra_brackets_are_rejected(pre in "[a-z ]{0,8}", a in "[a-z]{1,4}", mid in "[a-z ]{0,8}", b in "[a-z]{1,4}") {
        let two = format!("{pre}[{a}]{mid}[{b}]");
        let open = format!("{pre}[{a}{mid}");
        let none = format!("{pre}{a}{mid}");
        prop_assert!(parse_bracketed(&two).is_err());
        prop_assert!(parse_bracketed(&open).is_err());
        prop_assert!(parse_bracketed(&none).is_err());
    }

    #[test]
    fn filtering_kept_items_again_keeps_them_all(items in prop::collection::vec("[A-Za-z ]{0,10}(\\[[a-z]{1,4}\\])?[a-z ]{0,10}\\.?", 0..20)) {
        let first = filter_sentences(&items, &mut SeenSentences::default());
        let kept: Vec<String> = first.accepted.iter().map(|(raw, _)| raw.clone()).collect();
        let again = filter_sentences(&kept, &mut SeenSentences::default());
        prop_assert!(again.rejections.is_empty());
        prop_assert_eq!(again.accepted.len(), kept.len());
        prop_assert_eq!(first.accepted.len() + first.rejections.len(), items.len());
    }
}
