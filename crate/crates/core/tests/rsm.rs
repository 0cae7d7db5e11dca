mod common;

use common::*;
use proptest::prelude::*;
use semrsm_core::batch::permute_spatial;
use semrsm_core::kernels::SigmaPolicy;
use semrsm_core::rsm::{cross_similarity, rsm, semantic_rsm, spatio_semantic_rsm, SigmaScope};
use semrsm_core::{Kernel, Matcher, RepresentationBatch};

fn gaussian_batch(seed: u64, n: usize, c: usize, s: usize) -> RepresentationBatch {
    RepresentationBatch::new(gaussian(&mut rng(seed), n * c * s), n, c, s).unwrap()
}

#[test]
fn optimal_semantic_dominates_spatio_semantic() {
    let z = gaussian_batch(1, 8, 4, 9);
    let sem = semantic_rsm(&z, Kernel::Linear, Matcher::Optimal).unwrap();
    let spa = spatio_semantic_rsm(&z, Kernel::Linear).unwrap();
    for i in 0..8 {
        for j in 0..8 {
            assert!(sem.get(i, j) >= spa.get(i, j) - 1e-9);
        }
    }
}

#[test]
fn approximate_matchers_bracketed_by_optimal() {
    let z = gaussian_batch(2, 6, 4, 12);
    let opt = semantic_rsm(&z, Kernel::Linear, Matcher::Optimal).unwrap();
    for m in [
        Matcher::Greedy,
        Matcher::TopKGreedy { k: 3 },
        Matcher::BatchOptimal { b: 4 },
    ] {
        let approx = semantic_rsm(&z, Kernel::Linear, m).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                assert!(opt.get(i, j) >= approx.get(i, j) - 1e-9);
            }
        }
    }
}

#[test]
fn permuted_copy_matches_self_similarity() {
    let (c, s) = (5, 16);
    let mut r = rng(3);
    for _ in 0..10 {
        let z = gaussian(&mut r, c * s);
        let mut perm: Vec<usize> = (0..s).collect();
        rand::seq::SliceRandom::shuffle(perm.as_mut_slice(), &mut r);
        let b = RepresentationBatch::from_samples(&[z.clone(), permute_spatial(&z, c, &perm)], c, s).unwrap();
        let k = semantic_rsm(&b, Kernel::Linear, Matcher::Optimal).unwrap();
        assert!(rel_close(k.get(0, 1), k.get(0, 0), 1e-6));
        let cos = semantic_rsm(&b, Kernel::Cosine, Matcher::Optimal).unwrap();
        assert!((cos.get(0, 1) - 1.0).abs() < 1e-9);
    }
}

#[test]
fn cross_with_itself_equals_square() {
    let z = gaussian_batch(4, 7, 3, 5);
    for kernel in [Kernel::Linear, Kernel::Cosine, Kernel::rbf_fixed(2.0).unwrap()] {
        let sq = spatio_semantic_rsm(&z, kernel).unwrap();
        let cross = cross_similarity(&z, &z, kernel, Matcher::None, 3, SigmaScope::PerBlock).unwrap();
        assert_eq!(sq.values, cross.values);
    }
}

#[test]
fn cross_identical_query_is_row_max() {
    let db = gaussian_batch(5, 9, 3, 4);
    let q = db.select(&[6]).unwrap();
    let m = cross_similarity(&q, &db, Kernel::Cosine, Matcher::None, 4, SigmaScope::PerBlock).unwrap();
    assert!((m.get(0, 6) - 1.0).abs() < 1e-12);
    assert!((0..9).all(|j| m.get(0, j) <= m.get(0, 6)));
}

#[test]
fn rbf_global_sigma_is_block_invariant() {
    let q = gaussian_batch(6, 5, 2, 3);
    let d = gaussian_batch(7, 8, 2, 3);
    let k = Kernel::Rbf(SigmaPolicy::MedianHeuristic);
    let a = cross_similarity(&q, &d, k, Matcher::Optimal, 1, SigmaScope::Global).unwrap();
    let b = cross_similarity(&q, &d, k, Matcher::Optimal, 8, SigmaScope::Global).unwrap();
    assert_eq!(a.values, b.values);
    // per-block sigma generally differs from the global one
    let c = cross_similarity(&q, &d, k, Matcher::Optimal, 2, SigmaScope::PerBlock).unwrap();
    assert!(c.values.max_abs_diff(&a.values) > 0.0);
}

#[test]
fn rbf_and_cosine_bounds() {
    let z = gaussian_batch(8, 6, 3, 6);
    for m in [Matcher::None, Matcher::Optimal, Matcher::BatchOptimal { b: 2 }] {
        let r = rsm(&z, Kernel::Rbf(SigmaPolicy::MedianHeuristic), m).unwrap();
        assert!(r.values.values().iter().all(|&v| v > 0.0 && v <= 1.0));
        let c = rsm(&z, Kernel::Cosine, m).unwrap();
        assert!(c
            .values
            .values()
            .iter()
            .all(|&v| (-1.0 - 1e-9..=1.0 + 1e-9).contains(&v)));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn blocking_does_not_change_linear_or_cosine(seed in any::<u64>(), block in 1usize..10) {
        let q = gaussian_batch(seed, 4, 3, 4);
        let d = gaussian_batch(seed.wrapping_add(1), 9, 3, 4);
        for kernel in [Kernel::Linear, Kernel::Cosine] {
            for m in [Matcher::None, Matcher::Optimal] {
                let a = cross_similarity(&q, &d, kernel, m, block, SigmaScope::PerBlock).unwrap();
                let b = cross_similarity(&q, &d, kernel, m, 9, SigmaScope::PerBlock).unwrap();
                prop_assert!(a.values.max_abs_diff(&b.values) < 1e-9);
            }
        }
    }

    #[test]
    fn square_rsms_are_exactly_symmetric(seed in any::<u64>(), n in 1usize..6) {
        let z = gaussian_batch(seed, n, 2, 5);
        for m in [Matcher::None, Matcher::Optimal, Matcher::Greedy, Matcher::BatchOptimal { b: 2 }] {
            prop_assert!(rsm(&z, Kernel::Linear, m).unwrap().values.is_symmetric());
        }
    }
}
