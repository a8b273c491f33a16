//! Signed plaintexts, homomorphic subtraction and the server-side comparison key.
//!
//! Plaintexts live in `[-⌊n/2⌋, ⌊n/2⌋)` and are mapped onto Paillier's `Z_n` by
//! reduction mod `n`; decryption maps back with [`smod`].
//!
//! A [`ComparisonKey`] `(ck₀, ck₁)` lets its holder compute `η·(m₀ - m₁) smod n` from two
//! ciphertexts, where `η = ck₀·ck₁ mod n`. With `η ≤ ⌊n/(4M)⌋` and `|mᵢ| ≤ M` the product
//! never wraps, so its sign is the sign of `m₀ - m₁`.
//!
//! `ck₀` is the exponent `η₀·φ(n)^ζ` reduced modulo `n·φ(n)`, the order of `Z*_{n²}`.
//! Keeping the factor `φ(n)` in the exponent is what cancels the encryption nonces; a
//! `ck₀` reduced modulo `n` alone would not.
//!
//! Trust caveat: `η` is computable from `ck` alone, and `ck₀` is a multiple of `φ(n)`,
//! so whoever holds the comparison key can learn plaintext differences and factor `n`.

use std::cmp::Ordering;
use std::fmt;

use rug::Integer;

use crate::error::{Error, Result};
use crate::numtheory::{gcd, mod_inverse, mod_pow, random_coprime, smod, RandomSource};
use crate::paillier::{Ciphertext, Fingerprint, PrivateKey, PublicKey};

fn check_signed_range(pk: &PublicKey, m: &Integer) -> Result<()> {
    let half = pk.half_n();
    if *m < -Integer::from(half) || m >= half {
        return Err(Error::PlaintextOutOfRange);
    }
    Ok(())
}

/// Encrypts `m ∈ [-⌊n/2⌋, ⌊n/2⌋)` as the Paillier encryption of `m mod n`.
pub fn encrypt<R: RandomSource + ?Sized>(
    pk: &PublicKey,
    m: &Integer,
    rng: &mut R,
) -> Result<Ciphertext> {
    check_signed_range(pk, m)?;
    pk.encrypt(&Integer::from(m.modulo_ref(pk.n())), rng)
}

#[cfg(feature = "test-vectors")]
pub fn encrypt_with_nonce(pk: &PublicKey, m: &Integer, r: &Integer) -> Result<Ciphertext> {
    check_signed_range(pk, m)?;
    pk.encrypt_with_nonce(&Integer::from(m.modulo_ref(pk.n())), r)
}

pub fn decrypt(sk: &PrivateKey, c: &Ciphertext) -> Result<Integer> {
    let m = sk.decrypt(c)?;
    Ok(smod(&m, sk.public().n()))
}

/// `c⁻¹ mod n²`, an encryption of `-m`.
pub fn negate(pk: &PublicKey, c: &Ciphertext) -> Result<Ciphertext> {
    pk.check(c)?;
    let inv = mod_inverse(c.value(), pk.n_squared())
        .map_err(|_| Error::MalformedCiphertext("ciphertext not invertible modulo n²"))?;
    Ok(Ciphertext::from_raw(inv, pk.fingerprint()))
}

/// Encryption of `m₀ - m₁`.
pub fn subtract(pk: &PublicKey, c0: &Ciphertext, c1: &Ciphertext) -> Result<Ciphertext> {
    pk.check(c0)?;
    let neg = negate(pk, c1)?;
    pk.add(c0, &neg)
}

/// Outcome of a homomorphic comparison.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct CmpResult {
    /// `η·(m₀ - m₁) smod n`.
    pub blinded_diff: Integer,
    pub ordering: Ordering,
}

impl CmpResult {
    /// -1, 0 or +1.
    pub fn sign(&self) -> i8 {
        match self.ordering {
            Ordering::Less => -1,
            Ordering::Equal => 0,
            Ordering::Greater => 1,
        }
    }
}

/// Server-held order-revealing key.
#[derive(Clone, PartialEq, Eq)]
pub struct ComparisonKey {
    ck0: Integer,
    ck1: Integer,
    bound_m: Integer,
    key_fingerprint: Fingerprint,
    epoch: u64,
}

impl fmt::Debug for ComparisonKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ComparisonKey")
            .field("bound_m", &self.bound_m)
            .field("key_fingerprint", &self.key_fingerprint)
            .field("epoch", &self.epoch)
            .finish_non_exhaustive()
    }
}

/// `⌊n/(4M)⌋`, the largest admissible blinding factor for bound `M`.
pub fn eta_bound(n: &Integer, bound_m: &Integer) -> Result<Integer> {
    if bound_m.cmp0().is_le() {
        return Err(Error::InvalidParameter("comparison bound must be positive".into()));
    }
    let limit = n / Integer::from(bound_m * 4u32);
    if limit < 1 {
        return Err(Error::BoundTooLarge);
    }
    Ok(limit)
}

impl ComparisonKey {
    /// Samples a fresh key for plaintexts with `|m| ≤ bound_m`.
    pub fn generate<R: RandomSource + ?Sized>(
        sk: &PrivateKey,
        bound_m: &Integer,
        rng: &mut R,
    ) -> Result<Self> {
        Self::generate_at_epoch(sk, bound_m, 0, rng)
    }

    /// Like [`ComparisonKey::generate`], tagged with an explicit epoch.
    pub fn generate_at_epoch<R: RandomSource + ?Sized>(
        sk: &PrivateKey,
        bound_m: &Integer,
        epoch: u64,
        rng: &mut R,
    ) -> Result<Self> {
        let n = sk.public().n();
        let limit = eta_bound(n, bound_m)?;
        let zeta = random_coprime(n, n, rng)?;
        let eta = random_coprime(n, &Integer::from(&limit + 1u32), rng)?;
        let eta0 = random_coprime(n, n, rng)?;
        Self::assemble(sk, bound_m, &zeta, &eta, &eta0, epoch)
    }

    /// `ck₀ = η₀·φ^ζ mod nφ`, `ck₁ = η₁·(φ^ζ)⁻¹ mod n` with `η₁ = η·η₀⁻¹ mod n`.
    fn assemble(
        sk: &PrivateKey,
        bound_m: &Integer,
        zeta: &Integer,
        eta: &Integer,
        eta0: &Integer,
        epoch: u64,
    ) -> Result<Self> {
        let n = sk.public().n();
        let exponent_order = Integer::from(n * sk.phi());
        let phi_zeta = mod_pow(sk.phi(), zeta, &exponent_order);
        let ck0 = Integer::from(eta0 * &phi_zeta) % &exponent_order;

        let eta1 = Integer::from(eta * &mod_inverse(eta0, n)?) % n;
        let phi_zeta_inv = mod_inverse(&Integer::from(&phi_zeta % n), n)?;
        let ck1 = (eta1 * phi_zeta_inv) % n;

        Ok(ComparisonKey {
            ck0,
            ck1,
            bound_m: bound_m.clone(),
            key_fingerprint: sk.public().fingerprint(),
            epoch,
        })
    }

    /// Comparison key from explicit `ζ`, `η`, `η₀`, for known-answer vectors.
    #[cfg(feature = "test-vectors")]
    pub fn from_secrets(
        sk: &PrivateKey,
        bound_m: &Integer,
        zeta: &Integer,
        eta: &Integer,
        eta0: &Integer,
        epoch: u64,
    ) -> Result<Self> {
        let n = sk.public().n();
        let limit = eta_bound(n, bound_m)?;
        for v in [zeta, eta, eta0] {
            if v.cmp0().is_le() || v >= n || gcd(v, n) != 1 {
                return Err(Error::InvalidParameter("parameters must lie in Z*_n".into()));
            }
        }
        if *eta > limit {
            return Err(Error::InvalidParameter("η exceeds ⌊n/(4M)⌋".into()));
        }
        Self::assemble(sk, bound_m, zeta, eta, eta0, epoch)
    }

    /// Key with `η₀`, `η₁` drawn independently from all of `Z*_n`, so `η` is unbounded.
    ///
    /// Sign preservation does not hold for such keys; they exist to demonstrate that.
    #[cfg(feature = "test-vectors")]
    pub fn generate_unbounded_eta<R: RandomSource + ?Sized>(
        sk: &PrivateKey,
        bound_m: &Integer,
        rng: &mut R,
    ) -> Result<Self> {
        let n = sk.public().n();
        let zeta = random_coprime(n, n, rng)?;
        let eta0 = random_coprime(n, n, rng)?;
        let eta1 = random_coprime(n, n, rng)?;
        let eta = Integer::from(&eta0 * &eta1) % n;
        Self::assemble(sk, bound_m, &zeta, &eta, &eta0, 0)
    }

    /// Fresh parameters under the same bound, one epoch later.
    pub fn rotate<R: RandomSource + ?Sized>(&self, sk: &PrivateKey, rng: &mut R) -> Result<Self> {
        if self.key_fingerprint != sk.public().fingerprint() {
            return Err(Error::KeyMismatch);
        }
        Self::generate_at_epoch(sk, &self.bound_m, self.epoch + 1, rng)
    }

    /// Rebuilds a key received from storage or the wire and checks it against `pk`.
    pub fn from_parts(
        pk: &PublicKey,
        ck0: Integer,
        ck1: Integer,
        bound_m: Integer,
        epoch: u64,
    ) -> Result<Self> {
        let n = pk.n();
        if ck0.cmp0().is_le() || ck0 >= *pk.n_squared() || gcd(&ck0, n) != 1 {
            return Err(Error::InvalidKey("ck0 out of range or not coprime to n".into()));
        }
        if ck1.cmp0().is_le() || ck1 >= *n || gcd(&ck1, n) != 1 {
            return Err(Error::InvalidKey("ck1 out of range or not coprime to n".into()));
        }
        let limit = eta_bound(n, &bound_m)?;
        let key = ComparisonKey {
            ck0,
            ck1,
            bound_m,
            key_fingerprint: pk.fingerprint(),
            epoch,
        };
        if key.eta(pk) > limit {
            return Err(Error::InvalidKey("ck0·ck1 mod n exceeds ⌊n/(4M)⌋".into()));
        }
        Ok(key)
    }

    pub fn ck0(&self) -> &Integer {
        &self.ck0
    }

    pub fn ck1(&self) -> &Integer {
        &self.ck1
    }

    pub fn bound_m(&self) -> &Integer {
        &self.bound_m
    }

    pub fn key_fingerprint(&self) -> Fingerprint {
        self.key_fingerprint
    }

    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    /// Blinding factor `η = ck₀·ck₁ mod n`.
    pub fn eta(&self, pk: &PublicKey) -> Integer {
        Integer::from(&self.ck0 * &self.ck1) % pk.n()
    }

    fn check_key(&self, pk: &PublicKey) -> Result<()> {
        if self.key_fingerprint != pk.fingerprint() {
            return Err(Error::KeyMismatch);
        }
        Ok(())
    }

    /// Reveals the sign of `m₀ - m₁`, valid when `|m₀|, |m₁| ≤ M`.
    pub fn compare(&self, pk: &PublicKey, c0: &Ciphertext, c1: &Ciphertext) -> Result<CmpResult> {
        self.check_key(pk)?;
        pk.check(c0)?;
        pk.check(c1)?;
        let n2 = pk.n_squared();
        let inv = mod_inverse(c1.value(), n2)
            .map_err(|_| Error::MalformedCiphertext("ciphertext not invertible modulo n²"))?;
        let quotient = Integer::from(c0.value() * &inv) % n2;
        self.sign_of(pk, &quotient)
    }

    /// Reveals the sign of `d` for an encryption of a difference `|d| ≤ 2M`.
    pub fn sign(&self, pk: &PublicKey, c_diff: &Ciphertext) -> Result<CmpResult> {
        self.check_key(pk)?;
        pk.check(c_diff)?;
        self.sign_of(pk, c_diff.value())
    }

    fn sign_of(&self, pk: &PublicKey, value: &Integer) -> Result<CmpResult> {
        let n = pk.n();
        let t = mod_pow(value, &self.ck0, pk.n_squared());
        let l = t - 1u32;
        if !l.is_divisible(n) {
            return Err(Error::MalformedCiphertext("t - 1 not divisible by n"));
        }
        let l = l.div_exact(n);
        let blinded = smod(&((l * &self.ck1) % n), n);
        let ordering = blinded.cmp0();
        Ok(CmpResult {
            blinded_diff: blinded,
            ordering,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numtheory::SeededRandom;
    use crate::paillier::keygen;

    fn int(v: i64) -> Integer {
        Integer::from(v)
    }

    fn toy() -> PrivateKey {
        PrivateKey::from_primes(int(5), int(7)).unwrap()
    }

    #[test]
    fn signed_encryption_vectors() {
        let sk = toy();
        let pk = sk.public();
        let neg = encrypt_with_nonce(pk, &int(-1), &int(1)).unwrap();
        assert_eq!(neg, pk.encrypt_with_nonce(&int(34), &int(1)).unwrap());
        assert_eq!(decrypt(&sk, &neg).unwrap(), -1);

        let mut rng = SeededRandom::new(1);
        assert_eq!(encrypt(pk, &int(17), &mut rng), Err(Error::PlaintextOutOfRange));
        assert_eq!(encrypt(pk, &int(-18), &mut rng), Err(Error::PlaintextOutOfRange));
        let lo = encrypt(pk, &int(-17), &mut rng).unwrap();
        assert_eq!(decrypt(&sk, &lo).unwrap(), -17);
        let z = encrypt(pk, &int(0), &mut rng).unwrap();
        assert_eq!(decrypt(&sk, &z).unwrap(), 0);
    }

    #[test]
    fn negation() {
        let sk = toy();
        let pk = sk.public();
        let mut rng = SeededRandom::new(2);
        for m in -17..17 {
            let c = encrypt(pk, &int(m), &mut rng).unwrap();
            let neg = negate(pk, &c).unwrap();
            // the signed range is symmetric for odd n, so -(-17) = 17 still decodes
            assert_eq!(decrypt(&sk, &neg).unwrap(), -m);
            assert_eq!(decrypt(&sk, &negate(pk, &neg).unwrap()).unwrap(), m);
        }
        let c = encrypt(pk, &int(3), &mut rng).unwrap();
        assert_eq!(decrypt(&sk, &negate(pk, &c).unwrap()).unwrap(), -3);
    }

    #[test]
    fn subtraction_spot_checks() {
        let sk = toy();
        let pk = sk.public();
        let mut rng = SeededRandom::new(3);
        let c5 = encrypt(pk, &int(5), &mut rng).unwrap();
        let c3 = encrypt(pk, &int(3), &mut rng).unwrap();
        assert_eq!(decrypt(&sk, &subtract(pk, &c5, &c3).unwrap()).unwrap(), 2);
        assert_eq!(decrypt(&sk, &subtract(pk, &c5, &c5).unwrap()).unwrap(), 0);
    }

    #[test]
    fn worked_comparison_key() {
        // ζ = 2, η = 3, η₀ = 11 under p = 5, q = 7, M = 2
        let sk = toy();
        let ck = ComparisonKey::from_secrets(&sk, &int(2), &int(2), &int(3), &int(11), 0).unwrap();
        assert_eq!(Integer::from(ck.ck0() % 35), 1);
        assert_eq!(*ck.ck0(), 456);
        assert_eq!(*ck.ck1(), 3);
        assert_eq!(ck.eta(sk.public()), 3);
        assert!(ck.ck0().is_divisible(sk.phi()));
    }

    #[test]
    fn worked_comparison() {
        let sk = toy();
        let pk = sk.public();
        let ck = ComparisonKey::from_secrets(&sk, &int(2), &int(2), &int(3), &int(11), 0).unwrap();
        let mut rng = SeededRandom::new(4);
        let a = encrypt(pk, &int(2), &mut rng).unwrap();
        let b = encrypt(pk, &int(-1), &mut rng).unwrap();
        let res = ck.compare(pk, &a, &b).unwrap();
        assert_eq!(res.blinded_diff, 9);
        assert_eq!(res.sign(), 1);
        let back = ck.compare(pk, &b, &a).unwrap();
        assert_eq!(back.blinded_diff, -9);
        assert_eq!(back.ordering, Ordering::Less);

        let d = encrypt(pk, &int(-1), &mut rng).unwrap();
        let s = ck.sign(pk, &d).unwrap();
        assert_eq!(s.sign(), -1);
        assert_eq!(s.blinded_diff, -3);
    }

    #[test]
    fn equal_plaintexts_compare_equal() {
        let (pk, sk) = keygen(256, &mut SeededRandom::new(5)).unwrap();
        let mut rng = SeededRandom::new(6);
        let ck = ComparisonKey::generate(&sk, &Integer::from(1u64 << 40), &mut rng).unwrap();
        let a = encrypt(&pk, &int(-77), &mut rng).unwrap();
        let b = encrypt(&pk, &int(-77), &mut rng).unwrap();
        assert_ne!(a, b);
        let r = ck.compare(&pk, &a, &b).unwrap();
        assert_eq!(r.sign(), 0);
        assert_eq!(r.blinded_diff, 0);
    }

    #[test]
    fn bound_checks() {
        let sk = toy();
        let mut rng = SeededRandom::new(7);
        assert_eq!(
            ComparisonKey::generate(&sk, &int(35), &mut rng),
            Err(Error::BoundTooLarge)
        );
        assert_eq!(
            ComparisonKey::generate(&sk, &int(9), &mut rng),
            Err(Error::BoundTooLarge)
        );
        assert!(ComparisonKey::generate(&sk, &int(8), &mut rng).is_ok());
        assert!(matches!(
            ComparisonKey::generate(&sk, &int(0), &mut rng),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn generated_keys_satisfy_invariants() {
        let sk = toy();
        let n = sk.public().n();
        let mut rng = SeededRandom::new(8);
        for _ in 0..200 {
            let ck = ComparisonKey::generate(&sk, &int(2), &mut rng).unwrap();
            assert_eq!(gcd(ck.ck0(), n), 1);
            assert_eq!(gcd(ck.ck1(), n), 1);
            let eta = ck.eta(sk.public());
            assert!((1..=4).contains(&eta));
            assert!(ck.ck0().is_divisible(sk.phi()));
            let rebuilt = ComparisonKey::from_parts(
                sk.public(),
                ck.ck0().clone(),
                ck.ck1().clone(),
                ck.bound_m().clone(),
                ck.epoch(),
            )
            .unwrap();
            assert_eq!(rebuilt, ck);
        }
    }

    #[test]
    fn from_parts_rejects_bad_keys() {
        let sk = toy();
        let pk = sk.public();
        // η = 1·6 = 6 > ⌊35/8⌋
        assert!(ComparisonKey::from_parts(pk, int(1), int(6), int(2), 0).is_err());
        assert!(ComparisonKey::from_parts(pk, int(5), int(1), int(2), 0).is_err());
        assert!(ComparisonKey::from_parts(pk, int(456), int(3), int(9), 0).is_err());
        assert!(ComparisonKey::from_parts(pk, int(456), int(3), int(2), 0).is_ok());
    }

    #[test]
    fn rotation_bumps_epoch_and_keeps_bound() {
        let sk = toy();
        let mut rng = SeededRandom::new(9);
        let ck = ComparisonKey::generate(&sk, &int(2), &mut rng).unwrap();
        let next = ck.rotate(&sk, &mut rng).unwrap();
        assert_eq!(next.epoch(), 1);
        assert_eq!(next.bound_m(), ck.bound_m());
        assert_eq!(next.rotate(&sk, &mut rng).unwrap().epoch(), 2);
        let other = PrivateKey::from_primes(int(11), int(17)).unwrap();
        assert_eq!(ck.rotate(&other, &mut rng), Err(Error::KeyMismatch));
    }

    #[test]
    fn key_mismatch_is_reported() {
        let sk = toy();
        let other = PrivateKey::from_primes(int(11), int(17)).unwrap();
        let mut rng = SeededRandom::new(10);
        let ck = ComparisonKey::generate(&sk, &int(2), &mut rng).unwrap();
        let a = encrypt(sk.public(), &int(1), &mut rng).unwrap();
        let b = encrypt(other.public(), &int(1), &mut rng).unwrap();
        assert_eq!(ck.compare(sk.public(), &a, &b), Err(Error::KeyMismatch));
        assert_eq!(ck.compare(other.public(), &b, &b), Err(Error::KeyMismatch));
        assert_eq!(subtract(sk.public(), &a, &b), Err(Error::KeyMismatch));
    }

    #[test]
    fn non_unit_input_is_malformed() {
        let sk = toy();
        let pk = sk.public();
        let ck = ComparisonKey::from_secrets(&sk, &int(2), &int(2), &int(3), &int(11), 0).unwrap();
        let bad = Ciphertext::from_raw(int(5), pk.fingerprint());
        let good = encrypt(pk, &int(1), &mut SeededRandom::new(1)).unwrap();
        assert!(matches!(ck.compare(pk, &good, &bad), Err(Error::MalformedCiphertext(_))));
        assert!(matches!(ck.sign(pk, &bad), Err(Error::MalformedCiphertext(_))));
        assert!(matches!(negate(pk, &bad), Err(Error::MalformedCiphertext(_))));
    }
}
