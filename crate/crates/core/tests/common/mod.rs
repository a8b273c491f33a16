#![allow(dead_code)]

use std::sync::OnceLock;

use hope_core::numtheory::{random_below, RandomSource, SeededRandom};
use hope_core::{keygen, Integer, PrivateKey};

fn seeded_key(bits: u32, seed: u64) -> PrivateKey {
    keygen(bits, &mut SeededRandom::new(seed)).expect("keygen").1
}

/// 2048-bit key shared by the tests of one binary.
pub fn key_2048() -> &'static PrivateKey {
    static KEY: OnceLock<PrivateKey> = OnceLock::new();
    KEY.get_or_init(|| seeded_key(2048, 0x2048))
}

pub fn key_1024() -> &'static PrivateKey {
    static KEY: OnceLock<PrivateKey> = OnceLock::new();
    KEY.get_or_init(|| seeded_key(1024, 0x1024))
}

pub fn key_256() -> &'static PrivateKey {
    static KEY: OnceLock<PrivateKey> = OnceLock::new();
    KEY.get_or_init(|| seeded_key(256, 0x256))
}

pub fn toy_key() -> PrivateKey {
    PrivateKey::from_primes(Integer::from(5), Integer::from(7)).expect("5·7 is a valid key")
}

/// Uniform integer in `[-bound, bound]`.
pub fn signed_in<R: RandomSource + ?Sized>(bound: &Integer, rng: &mut R) -> Integer {
    let span = Integer::from(bound * 2u32) + 1u32;
    random_below(&span, rng) - bound
}

pub fn two_pow(k: u32) -> Integer {
    Integer::from(1) << k
}
