use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use reprolift::algebra;
use reprolift::cipher::{self, Cipher, Triple};
use reprolift::perm::{self, Pair, Permutation};

fn perm_from(n: usize, seed: u64) -> Permutation {
    Permutation::random(n, &mut ChaCha8Rng::seed_from_u64(seed))
}

fn pairs_strategy(max_n: usize, max_k: usize) -> impl Strategy<Value = (usize, u64, Vec<(usize, usize)>)> {
    (4..=max_n).prop_flat_map(move |n| (Just(n), any::<u64>(), prop::collection::vec((0..n, 0..n), 1..=max_k)))
}

proptest! {
    #[test]
    fn reprogram_is_a_permutation((n, seed, list) in pairs_strategy(40, 5)) {
        let pi = perm_from(n, seed);
        let out = pi.reprogram_seq(&perm::pairs(&list)).unwrap();
        prop_assert!(Permutation::from_table(out.table().to_vec()).is_ok());
        let last = *list.last().unwrap();
        prop_assert_eq!(out.apply(last.0), last.1);
    }

    #[test]
    fn inverse_law((n, seed, list) in pairs_strategy(40, 5)) {
        let pi = perm_from(n, seed);
        let l = perm::pairs(&list);
        let swapped: Vec<Pair> = l.iter().map(|p| Pair::new(p.y, p.x)).collect();
        prop_assert_eq!(pi.reprogram_seq(&l).unwrap().inverse(), pi.inverse().reprogram_seq(&swapped).unwrap());
    }

    #[test]
    fn disjoint_pairs_commute(n in 6usize..40, seed: u64, shift in 1usize..5) {
        let pi = perm_from(n, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let xs = perm_from(n, seed.wrapping_add(1));
        let ys = Permutation::random(n, &mut rng);
        let l: Vec<Pair> = (0..3).map(|i| Pair::new(xs.apply(i * shift % n), ys.apply(i))).collect();
        prop_assume!(perm::is_disjoint(&l));
        let base = pi.reprogram_seq(&l).unwrap();
        let rev: Vec<Pair> = l.iter().rev().copied().collect();
        prop_assert_eq!(pi.reprogram_seq(&rev).unwrap(), base);
    }

    #[test]
    fn good_tuples_match_closed_form((n, seed, list) in pairs_strategy(40, 4)) {
        let pi = perm_from(n, seed);
        let l = perm::pairs(&list);
        prop_assume!(perm::is_good(&pi, &l));
        prop_assert_eq!(pi.reprogram_seq(&l).unwrap(), perm::good_closed_form(&pi, &l).unwrap());
    }

    #[test]
    fn one_key_cipher_matches_permutation((n, seed, list) in pairs_strategy(16, 4)) {
        let pi = perm_from(n, seed);
        let e = Cipher::single(pi.clone());
        let triples: Vec<Triple> = list.iter().map(|&(x, y)| Triple::new(0, x, y)).collect();
        let keyed = e.reprogram_seq(&triples).unwrap();
        prop_assert_eq!(keyed.key(0), &pi.reprogram_seq(&perm::pairs(&list)).unwrap());
        prop_assert_eq!(cipher::is_good(&e, &triples), perm::is_good(&pi, &perm::pairs(&list)));
    }
}

#[test]
fn exhaustive_suites_pass() {
    for n in 2..=4 {
        for k in 1..=3 {
            for s in algebra::permutation_suites(n, k).unwrap() {
                assert!(s.passed() && s.checked > 0, "{s:?}");
            }
        }
    }
}

#[test]
fn mutated_law_is_caught() {
    let s = algebra::mutated_inverse_law(3, 1).unwrap();
    assert!(s.violations > 0);
}

#[test]
fn uniform_counts_at_three_points() {
    for counts in algebra::uniformity(3).unwrap() {
        let first = counts[&0];
        assert!(first > 0 && counts.values().all(|v| *v == first));
    }
}

#[test]
fn bad_fraction_is_exact_on_small_domains() {
    // One target: bad iff π(x) = π*(x), so exactly 1/n of the π*.
    for n in 2..=5 {
        let r = algebra::bad_probability_exhaustive(n, 1).unwrap();
        assert_eq!(r.worst, format!("1/{n}"));
    }
    assert!(algebra::bad_probability_exhaustive(7, 1).is_err());
    assert!(algebra::cipher_bad_probability_exhaustive(3, 4, 1).is_err());
}

#[test]
fn sampled_bad_probability_is_seeded() {
    let a = algebra::bad_probability_sampled(12, 2, 5_000, 9).unwrap();
    let b = algebra::bad_probability_sampled(12, 2, 5_000, 9).unwrap();
    assert_eq!(a, b);
    assert!(a.holds);
    assert!(algebra::bad_probability_sampled(3, 4, 10, 0).is_err());
}

#[test]
fn reprogramming_rejects_out_of_range() {
    let pi = Permutation::identity(4);
    assert!(pi.reprogram(4, 0).is_err());
    assert!(perm::in_g(&pi, &pi, &[1, 1]).is_err());
    assert!(perm::good_closed_form(&pi, &[Pair::new(0, 0)]).is_err());
}
