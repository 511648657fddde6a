//! Randomized algebraic properties: quadratic-extension field axioms on
//! large random samples, plus the exhaustive permutation property of the
//! maps on small projective lines.

use proptest::prelude::*;

use moebius_orbits::arith::sieve_primes;
use moebius_orbits::fpcore::{Fp, Fp2};
use moebius_orbits::harness::SplitMix64;
use moebius_orbits::{MoebiusMap, ProjPoint};

const TEST_PRIMES: [u64; 4] = [3, 7, 10007, 4_611_686_018_427_387_847];

fn ext(p: u64) -> Fp2 {
    Fp2::new(Fp::new(p).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn fp2_ring_axioms(which in 0usize..4, raw in any::<[u64; 6]>()) {
        let p = TEST_PRIMES[which];
        let k = ext(p);
        let fp = k.fp;
        let el = |c0: u64, c1: u64| moebius_orbits::fpcore::Fp2El {
            c0: fp.reduce(c0),
            c1: fp.reduce(c1),
        };
        let a = el(raw[0], raw[1]);
        let b = el(raw[2], raw[3]);
        let c = el(raw[4], raw[5]);
        prop_assert_eq!(k.mul(a, b), k.mul(b, a));
        prop_assert_eq!(k.mul(k.mul(a, b), c), k.mul(a, k.mul(b, c)));
        prop_assert_eq!(k.add(a, b), k.add(b, a));
        prop_assert_eq!(k.add(k.add(a, b), c), k.add(a, k.add(b, c)));
        prop_assert_eq!(k.mul(a, k.add(b, c)), k.add(k.mul(a, b), k.mul(a, c)));
        prop_assert_eq!(k.sub(k.add(a, b), b), a);
    }

    #[test]
    fn fp2_inverse_and_norm(which in 0usize..4, raw in any::<[u64; 4]>()) {
        let p = TEST_PRIMES[which];
        let k = ext(p);
        let fp = k.fp;
        let el = |c0: u64, c1: u64| moebius_orbits::fpcore::Fp2El {
            c0: fp.reduce(c0),
            c1: fp.reduce(c1),
        };
        let one = k.one();
        let a = el(raw[0], raw[1]);
        let b = el(raw[2], raw[3]);
        // norm is multiplicative
        prop_assert_eq!(k.norm(k.mul(a, b)), fp.mul(k.norm(a), k.norm(b)));
        if !a.is_zero() {
            let inv = k.inv(a).unwrap();
            prop_assert_eq!(k.mul(a, inv), one);
        }
        // Frobenius is a field automorphism of order dividing 2
        prop_assert_eq!(k.frobenius(k.frobenius(a)), a);
        prop_assert_eq!(
            k.frobenius(k.mul(a, b)),
            k.mul(k.frobenius(a), k.frobenius(b))
        );
    }
}

#[test]
fn projective_permutation_exhaustive() {
    for p in sieve_primes(101).into_iter().filter(|&p| p >= 3) {
        let fp = Fp::new(p).unwrap();
        let mut rng = SplitMix64::new(4242 + p);
        for _ in 0..20 {
            let map = loop {
                if let Ok(m) =
                    MoebiusMap::new(fp, rng.below(p), rng.below(p), rng.below(p), rng.below(p))
                {
                    break m;
                }
            };
            let mut seen = vec![false; p as usize + 1];
            for pt in moebius_orbits::moebius::projective_line(fp) {
                let idx = match map.apply(pt) {
                    ProjPoint::Affine(u) => u as usize,
                    ProjPoint::Infinity => p as usize,
                };
                assert!(!seen[idx], "p={p}: image point repeated");
                seen[idx] = true;
            }
            assert!(seen.iter().all(|&s| s), "p={p}: image misses a point");
        }
    }
}
