use std::collections::BTreeSet;

use contopic_core::contrastive::{beta_at, bound_check, contrastive_loss, contrastive_loss_from_similarity, SimilarityTriple};
use contopic_core::corpus::{ingest, smoothed_idf, Corpus, Document, IngestOptions};
use contopic_core::eval::{build_cooccurrence, competitive_link, js_divergence, npmi_topic};
use contopic_core::math::{softmax, Matrix};
use contopic_core::ntm::{elbo_loss, reparameterize, ModelDims, ModelParams};
use contopic_core::sampler::{word_based_pair, zero_sampling_pair};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn simplex(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-4.0f64..4.0, n).prop_map(|v| softmax(&v))
}

fn bow(v: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prop_oneof![Just(0u32), 0u32..6], v).prop_map(|c| c.into_iter().map(f64::from).collect())
}

fn small_corpus() -> impl Strategy<Value = Corpus> {
    prop::collection::vec(prop::collection::btree_set(0u32..12, 1..8), 2..15).prop_map(|docs| {
        let docs = docs
            .into_iter()
            .map(|ids| Document::from_counts(ids.into_iter().map(|i| (i, 1 + i % 3)), None))
            .collect();
        Corpus::new((0..12).map(|i| format!("w{i}")).collect(), docs).unwrap()
    })
}

proptest! {
    #[test]
    fn theta_is_on_the_simplex(
        mu in prop::collection::vec(-30.0f64..30.0, 6),
        lv in prop::collection::vec(-10.0f64..10.0, 6),
        noise in prop::collection::vec(-5.0f64..5.0, 6),
    ) {
        let theta = reparameterize(&mu, &lv, &noise).theta;
        prop_assert!((theta.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert!(theta.iter().all(|&t| t >= 0.0));
    }

    #[test]
    fn kl_is_non_negative(
        mu in prop::collection::vec(-20.0f64..20.0, 5),
        lv in prop::collection::vec(-10.0f64..10.0, 5),
    ) {
        let (_, kl) = elbo_loss(&[1.0, 0.0], &[0.5, 0.5], &mu, &lv).unwrap();
        prop_assert!(kl >= 0.0);
    }

    #[test]
    fn decode_ignores_bias_shift(theta in simplex(3), shift in -50.0f64..50.0, seed in 0u64..1000) {
        let dims = ModelDims { vocab: 7, topics: 3, hidden: 4, covariates: 0 };
        let p = ModelParams::init(dims, &mut ChaCha8Rng::seed_from_u64(seed));
        let mut q = p.clone();
        q.word_bias.iter_mut().for_each(|b| *b += shift);
        for (a, b) in p.decode(&theta).iter().zip(q.decode(&theta)) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn contrastive_loss_is_non_negative_and_monotone(
        s_pos in -2.0f64..2.0, s_neg in -2.0f64..2.0, b1 in 0.0f64..10.0, b2 in 0.0f64..10.0,
    ) {
        let sim = SimilarityTriple { s_pos, s_neg };
        let (lo, hi) = if b1 <= b2 { (b1, b2) } else { (b2, b1) };
        let l_lo = contrastive_loss_from_similarity(sim, lo);
        prop_assert!(l_lo >= 0.0);
        prop_assert_eq!(l_lo == 0.0, lo == 0.0 || l_lo < 1e-300);
        prop_assert!(contrastive_loss_from_similarity(sim, hi) >= l_lo);
    }

    #[test]
    fn loss_on_simplex_triples_is_finite(a in simplex(5), b in simplex(5), c in simplex(5), beta in 0.0f64..10.0) {
        prop_assert!(contrastive_loss(&a, &b, &c, beta).is_finite());
    }

    #[test]
    fn bound_always_holds(s_pos in -5.0f64..5.0, s_neg in -5.0f64..5.0, beta in 1e-9f64..10.0) {
        prop_assert!(bound_check(s_pos, s_neg, beta));
    }

    #[test]
    fn schedule_is_symmetric(total in 1u64..10_000, t in 0u64..10_000, beta0 in 0.0f64..5.0) {
        let t = t % (total + 1);
        prop_assert_eq!(beta_at(t, total, beta0), beta_at(total - t, total, beta0));
        prop_assert!(beta_at(t, total, beta0) >= 0.0);
    }

    #[test]
    fn js_metric_properties(p in simplex(8), q in simplex(8)) {
        let d = js_divergence(&p, &q).unwrap();
        prop_assert!((0.0..=std::f64::consts::LN_2).contains(&d));
        prop_assert_eq!(d, js_divergence(&q, &p).unwrap());
        prop_assert_eq!(js_divergence(&p, &p).unwrap(), 0.0);
    }

    #[test]
    fn alignment_is_an_ordered_matching(
        a in prop::collection::vec(simplex(6), 1..6),
        b in prop::collection::vec(simplex(6), 1..6),
        threshold in 0.0f64..0.7,
    ) {
        let ma = Matrix::from_rows(&a).unwrap();
        let mb = Matrix::from_rows(&b).unwrap();
        let r = competitive_link(&ma, &mb, threshold, None).unwrap();
        let left: BTreeSet<_> = r.pairs.iter().map(|p| p.a).collect();
        let right: BTreeSet<_> = r.pairs.iter().map(|p| p.b).collect();
        prop_assert_eq!(left.len(), r.pairs.len());
        prop_assert_eq!(right.len(), r.pairs.len());
        prop_assert!(r.pairs.windows(2).all(|w| w[0].js <= w[1].js));
        prop_assert!(r.pairs.iter().all(|p| p.js <= threshold));
    }

    #[test]
    fn npmi_is_bounded(c in small_corpus(), words in prop::collection::btree_set(0u32..12, 2..8)) {
        let docs: Vec<usize> = (0..c.len()).collect();
        let stats = build_cooccurrence(&c, &docs, None);
        let words: Vec<u32> = words.into_iter().collect();
        let v = npmi_topic(&words, &stats).unwrap();
        prop_assert!((-1.0 - 1e-9..=1.0 + 1e-9).contains(&v));
    }

    #[test]
    fn tfidf_positive_exactly_where_counts_are(c in small_corpus()) {
        for (d, doc) in c.docs().iter().enumerate() {
            prop_assert_eq!(doc.counts().len(), c.tfidf_row(d).len());
            prop_assert!(doc.counts().iter().all(|&(_, n)| n > 0));
            prop_assert!(c.tfidf_row(d).iter().all(|&s| s > 0.0));
        }
    }

    #[test]
    fn idf_is_non_increasing(n in 1usize..1000, a in 0u32..1000, b in 0u32..1000) {
        let (a, b) = (a.min(n as u32), b.min(n as u32));
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(smoothed_idf(n, lo) >= smoothed_idf(n, hi));
    }

    #[test]
    fn ingest_is_idempotent(texts in prop::collection::vec("[a-e]{2,4}( [a-e]{1,4}){0,6}", 1..10)) {
        let opts = IngestOptions::default();
        let (c, _) = ingest(&texts, None, &opts).unwrap();
        let again: Vec<String> = (0..c.len()).map(|i| c.detokenize(i)).collect();
        let (c2, rep) = ingest(&again, None, &opts).unwrap();
        prop_assert!(rep.dropped.is_empty());
        prop_assert_eq!(c.vocab().tokens(), c2.vocab().tokens());
        prop_assert_eq!(c.docs(), c2.docs());
    }

    #[test]
    fn word_based_pairs_are_local_and_disjoint(x in bow(12), recon in prop::collection::vec(0.0f64..5.0, 12), k in 1usize..8) {
        let scores: Vec<(u32, f64)> = x.iter().enumerate().filter(|(_, &c)| c > 0.0).map(|(i, &c)| (i as u32, c * (1.0 + i as f64 * 0.1))).collect();
        match word_based_pair(&x, &recon, &scores, k) {
            Ok(p) => {
                let pos: BTreeSet<_> = p.pos_indices.iter().collect();
                prop_assert!(p.neg_indices.iter().all(|i| !pos.contains(i)));
                prop_assert_eq!(p.pos_indices.len(), p.neg_indices.len());
                prop_assert!(p.pos_indices.len() <= k);
                let changed = |s: &[f64]| s.iter().zip(&x).filter(|(a, b)| a != b).count();
                prop_assert!(changed(&p.x_pos) <= k && changed(&p.x_neg) <= k);
                prop_assert_eq!(&p, &word_based_pair(&x, &recon, &scores, k).unwrap());
                let z = zero_sampling_pair(&x, &scores, k).unwrap();
                prop_assert_eq!((&z.pos_indices, &z.neg_indices), (&p.pos_indices, &p.neg_indices));
            }
            Err(_) => prop_assert!(scores.len() < 2),
        }
    }

    #[test]
    fn pairs_degenerate_with_the_reconstruction(x in bow(10), eps in 0.0f64..1e-3) {
        let scores: Vec<(u32, f64)> = x.iter().enumerate().filter(|(_, &c)| c > 0.0).map(|(i, &c)| (i as u32, c)).collect();
        let recon: Vec<f64> = x.iter().map(|v| v + eps).collect();
        if let Ok(p) = word_based_pair(&x, &recon, &scores, 3) {
            let l1 = |s: &[f64]| s.iter().zip(&x).map(|(a, b)| (a - b).abs()).sum::<f64>();
            prop_assert!(l1(&p.x_pos) <= 3.0 * eps + 1e-12);
            prop_assert!(l1(&p.x_neg) <= 3.0 * eps + 1e-12);
        }
    }
}
