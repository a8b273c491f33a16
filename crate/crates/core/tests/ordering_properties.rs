mod common;

use std::cmp::Ordering;

use hope_core::hope::{self, ComparisonKey};
use hope_core::numtheory::SeededRandom;
use hope_core::ostore::EncryptedIndex;
use hope_core::{Ciphertext, Integer};
use proptest::prelude::*;

use common::{key_256, two_pow};

fn encrypt_all(values: &[i64], seed: u64) -> (ComparisonKey, Vec<Ciphertext>) {
    let sk = key_256();
    let mut rng = SeededRandom::new(seed);
    let ck = ComparisonKey::generate(sk, &two_pow(40), &mut rng).unwrap();
    let cs = values
        .iter()
        .map(|v| hope::encrypt(sk.public(), &Integer::from(*v), &mut rng).unwrap())
        .collect();
    (ck, cs)
}

fn permutations(items: &[i64]) -> Vec<Vec<i64>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, head);
            out.push(tail);
        }
    }
    out
}

#[test]
fn every_insertion_order_of_five_values_sorts_the_same() {
    let sk = key_256();
    let values = [4i64, -1, 4, 0, -9];
    let mut sorted = values.to_vec();
    sorted.sort();
    let perms = permutations(&values);
    assert_eq!(perms.len(), 120);
    for (k, perm) in perms.iter().enumerate() {
        let (ck, cs) = encrypt_all(perm, k as u64);
        let mut index = EncryptedIndex::new(sk.public().clone(), ck).unwrap();
        for c in cs {
            index.insert(c, Vec::new()).unwrap();
        }
        let walked: Vec<i64> = index
            .iter()
            .map(|e| hope::decrypt(sk, &e.key).unwrap().to_i64().unwrap())
            .collect();
        assert_eq!(walked, sorted, "insertion order {perm:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn comparator_is_a_strict_weak_order(
        values in proptest::collection::vec(-(1i64 << 40)..=(1i64 << 40), 3..6),
        seed in any::<u64>(),
    ) {
        let pk = key_256().public();
        let (ck, cs) = encrypt_all(&values, seed);
        let cmp = |i: usize, j: usize| ck.compare(pk, &cs[i], &cs[j]).unwrap().ordering;
        let n = cs.len();
        for i in 0..n {
            prop_assert_eq!(cmp(i, i), Ordering::Equal);
            for j in 0..n {
                prop_assert_eq!(cmp(i, j), cmp(j, i).reverse());
                prop_assert_eq!(cmp(i, j), values[i].cmp(&values[j]));
                for k in 0..n {
                    if cmp(i, j) == Ordering::Less && cmp(j, k) == Ordering::Less {
                        prop_assert_eq!(cmp(i, k), Ordering::Less);
                    }
                }
            }
        }
    }

    #[test]
    fn sign_of_difference_matches_plain_sign(
        a in -(1i64 << 40)..=(1i64 << 40),
        b in -(1i64 << 40)..=(1i64 << 40),
        seed in any::<u64>(),
    ) {
        let pk = key_256().public();
        let (ck, cs) = encrypt_all(&[a, b], seed);
        let d = hope::subtract(pk, &cs[0], &cs[1]).unwrap();
        let r = ck.sign(pk, &d).unwrap();
        prop_assert_eq!(r.ordering, a.cmp(&b));
        prop_assert_eq!(r.blinded_diff, ck.eta(pk) * Integer::from(a - b));
    }
}
