#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use semrsm_core::AffinityMatrix;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

pub fn random_affinity(rng: &mut impl Rng, s: usize) -> AffinityMatrix {
    let values = gaussian(rng, s * s);
    let rn: Vec<f64> = (0..s).map(|_| rng.random_range(0.0..3.0)).collect();
    let cn: Vec<f64> = (0..s).map(|_| rng.random_range(0.0..3.0)).collect();
    AffinityMatrix::new(s, values, rn, cn).unwrap()
}

/// Heap's algorithm over all permutations of `0..n`.
pub fn for_each_permutation(n: usize, mut f: impl FnMut(&[usize])) {
    let mut p: Vec<usize> = (0..n).collect();
    let mut c = vec![0usize; n];
    f(&p);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                p.swap(0, i);
            } else {
                p.swap(c[i], i);
            }
            f(&p);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
}

/// Best total over all `n!` permutations.
pub fn brute_force_max(a: &AffinityMatrix) -> f64 {
    let mut best = f64::NEG_INFINITY;
    for_each_permutation(a.size(), |p| {
        let t: f64 = p.iter().enumerate().map(|(r, &c)| a.get(r, c)).sum();
        if t > best {
            best = t;
        }
    });
    best
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}
