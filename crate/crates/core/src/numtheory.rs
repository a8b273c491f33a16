//! Arbitrary-precision number theory used by the Paillier and HOPE layers.
//!
//! Values are [`rug::Integer`] throughout. Everything here is a pure function
//! of its arguments plus the injected [`RandomSource`].

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rug::integer::Order;
use rug::{Assign, Integer};

use crate::error::{Error, Result};

/// Miller–Rabin rounds used by key generation.
pub const DEFAULT_MR_ROUNDS: u32 = 64;

const COPRIME_RETRY_BUDGET: usize = 10_000;

const SMALL_PRIMES: [u32; 54] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97,
    101, 103, 107, 109, 113, 127, 131, 137, 139, 149, 151, 157, 163, 167, 173, 179, 181, 191, 193,
    197, 199, 211, 223, 227, 229, 233, 239, 241, 251,
];

/// Witnesses that make Miller–Rabin deterministic below 2^64.
const DETERMINISTIC_WITNESSES: [u32; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

/// Source of random bytes for sampling.
///
/// Two implementations ship: [`SecureRandom`] for real keys and ciphertexts, and
/// [`SeededRandom`] for reproducible test vectors.
pub trait RandomSource {
    fn fill_bytes(&mut self, dest: &mut [u8]);
}

/// ChaCha20 seeded from the operating system.
pub struct SecureRandom(ChaCha20Rng);

impl SecureRandom {
    pub fn new() -> Self {
        SecureRandom(ChaCha20Rng::from_entropy())
    }
}

impl Default for SecureRandom {
    fn default() -> Self {
        Self::new()
    }
}

impl RandomSource for SecureRandom {
    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.0.fill_bytes(dest)
    }
}

/// Deterministic ChaCha20 stream. Tests and known-answer vectors only.
pub struct SeededRandom(ChaCha20Rng);

impl SeededRandom {
    pub fn new(seed: u64) -> Self {
        SeededRandom(ChaCha20Rng::seed_from_u64(seed))
    }
}

impl RandomSource for SeededRandom {
    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.0.fill_bytes(dest)
    }
}

/// Greatest common divisor by Euclid's algorithm. `gcd(0, 0)` is 0.
pub fn gcd(a: &Integer, b: &Integer) -> Integer {
    let mut x = Integer::from(a.abs_ref());
    let mut y = Integer::from(b.abs_ref());
    while !y.is_zero() {
        x %= &y;
        std::mem::swap(&mut x, &mut y);
    }
    x
}

/// Inverse of `a` modulo `modulus` via the extended Euclidean algorithm.
///
/// The result lies in `(0, modulus)`.
pub fn mod_inverse(a: &Integer, modulus: &Integer) -> Result<Integer> {
    if *modulus < 2 {
        return Err(Error::InvalidParameter("modulus must be at least 2".into()));
    }
    let mut old_r = Integer::from(a.modulo_ref(modulus));
    let mut r = modulus.clone();
    let mut old_s = Integer::from(1);
    let mut s = Integer::new();
    let mut q = Integer::new();
    let mut tmp = Integer::new();

    while !r.is_zero() {
        // (old_r, r) <- (r, old_r - q r), same for the Bezout coefficient
        (&mut q, &mut tmp).assign(old_r.div_rem_floor_ref(&r));
        old_r = std::mem::replace(&mut r, std::mem::take(&mut tmp));
        tmp.assign(&q * &s);
        old_s -= &tmp;
        std::mem::swap(&mut old_s, &mut s);
    }

    if old_r != 1 {
        return Err(Error::NotInvertible);
    }
    Ok(old_s.modulo(modulus))
}

/// `base^exp mod modulus`.
///
/// Delegates to GMP's windowed square-and-multiply. `exp` must be non-negative and
/// `modulus` at least 2.
pub fn mod_pow(base: &Integer, exp: &Integer, modulus: &Integer) -> Integer {
    assert!(*modulus >= 2, "mod_pow: modulus must be at least 2");
    assert!(exp.cmp0().is_ge(), "mod_pow: negative exponent");
    Integer::from(
        base.pow_mod_ref(exp, modulus)
            .expect("non-negative exponent always has a result"),
    )
}

/// Symmetric modulo: the representative of `x mod n` in `[-⌊n/2⌋, n - ⌊n/2⌋)`.
pub fn smod(x: &Integer, n: &Integer) -> Integer {
    let half = Integer::from(n >> 1u32);
    let shifted = Integer::from(x + &half).modulo(n);
    shifted - half
}

/// Ternary sign: -1, 0 or +1.
pub fn sgn(x: &Integer) -> i8 {
    match x.cmp0() {
        std::cmp::Ordering::Less => -1,
        std::cmp::Ordering::Equal => 0,
        std::cmp::Ordering::Greater => 1,
    }
}

/// Miller–Rabin with `rounds` bases drawn from an OS-seeded generator.
///
/// Inputs below 2^64 use a deterministic witness set and are answered exactly.
pub fn is_probable_prime(x: &Integer, rounds: u32) -> bool {
    is_probable_prime_with(x, rounds, &mut SecureRandom::new())
}

/// Miller–Rabin with bases drawn from `rng`.
pub fn is_probable_prime_with<R: RandomSource + ?Sized>(
    x: &Integer,
    rounds: u32,
    rng: &mut R,
) -> bool {
    if *x < 2 {
        return false;
    }
    for &p in SMALL_PRIMES.iter() {
        if *x == p {
            return true;
        }
        if x.is_divisible_u(p) {
            return false;
        }
    }

    let x_minus_one = Integer::from(x - 1u32);
    let s = x_minus_one.find_one(0).expect("x - 1 is positive");
    let d = Integer::from(&x_minus_one >> s);

    let witness_is_liar = |a: &Integer| -> bool {
        let mut y = mod_pow(a, &d, x);
        if y == 1 || y == x_minus_one {
            return true;
        }
        for _ in 1..s {
            y.square_mut();
            y %= x;
            if y == x_minus_one {
                return true;
            }
            if y == 1 {
                return false;
            }
        }
        false
    };

    if x.significant_bits() <= 64 {
        return DETERMINISTIC_WITNESSES
            .iter()
            .all(|&a| witness_is_liar(&Integer::from(a)));
    }

    // bases uniform in [2, x - 2]
    let span = Integer::from(x - 3u32);
    (0..rounds.max(1)).all(|_| {
        let a = random_below(&span, rng) + 2u32;
        witness_is_liar(&a)
    })
}

/// Uniform integer in `[0, bound)` by rejection on the bit length of `bound`.
pub fn random_below<R: RandomSource + ?Sized>(bound: &Integer, rng: &mut R) -> Integer {
    assert!(bound.cmp0().is_gt(), "random_below: bound must be positive");
    let bits = bound.significant_bits();
    loop {
        let candidate = random_bits(bits, rng);
        if candidate < *bound {
            return candidate;
        }
    }
}

/// Uniform integer in `[0, 2^bits)`.
pub fn random_bits<R: RandomSource + ?Sized>(bits: u32, rng: &mut R) -> Integer {
    let nbytes = bits.div_ceil(8) as usize;
    let mut buf = vec![0u8; nbytes];
    rng.fill_bytes(&mut buf);
    let excess = nbytes as u32 * 8 - bits;
    if excess > 0 && nbytes > 0 {
        buf[0] &= 0xffu8 >> excess;
    }
    Integer::from_digits(&buf, Order::Msf)
}

/// Odd probable prime with exactly `bits` bits.
pub fn random_prime<R: RandomSource + ?Sized>(bits: u32, rng: &mut R) -> Integer {
    assert!(bits >= 3, "random_prime: need at least 3 bits");
    loop {
        let mut candidate = random_bits(bits, rng);
        candidate.set_bit(bits - 1, true);
        candidate.set_bit(0, true);
        if is_probable_prime_with(&candidate, DEFAULT_MR_ROUNDS, rng) {
            return candidate;
        }
    }
}

/// Uniform element of `{x : 1 <= x < upper, gcd(x, modulus) = 1}` by rejection.
pub fn random_coprime<R: RandomSource + ?Sized>(
    modulus: &Integer,
    upper: &Integer,
    rng: &mut R,
) -> Result<Integer> {
    if *upper < 2 || upper > modulus {
        return Err(Error::InvalidParameter(
            "random_coprime requires 2 <= upper <= modulus".into(),
        ));
    }
    let span = Integer::from(upper - 1u32);
    for _ in 0..COPRIME_RETRY_BUDGET {
        let x = random_below(&span, rng) + 1u32;
        if gcd(&x, modulus) == 1 {
            return Ok(x);
        }
    }
    Err(Error::Exhausted("no unit found below the requested bound"))
}
