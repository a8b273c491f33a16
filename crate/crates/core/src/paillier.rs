//! Paillier with generator `g = n + 1`.
//!
//! Key generation additionally enforces `p ∤ (q - 1)` and `q ∤ (p - 1)`, which makes
//! `gcd(n, φ(n)) = 1` and lets `φ(n)` serve directly as the decryption exponent.

use std::fmt;

use rug::Integer;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::numtheory::{
    self, gcd, is_probable_prime_with, mod_inverse, mod_pow, random_coprime, random_prime,
    RandomSource,
};

const KEYGEN_RETRY_BUDGET: usize = 10_000;

/// Smallest accepted modulus size for [`keygen`].
pub const MIN_KEY_BITS: u32 = 6;

/// First 16 bytes of SHA-256 over the big-endian bytes of `n`.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Fingerprint(pub [u8; 16]);

impl Fingerprint {
    pub fn of_modulus(n: &Integer) -> Self {
        let digest = Sha256::digest(n.to_digits::<u8>(rug::integer::Order::Msf));
        let mut out = [0u8; 16];
        out.copy_from_slice(&digest[..16]);
        Fingerprint(out)
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Result<Self> {
        let bytes = hex::decode(s).map_err(|_| Error::InvalidKey("fingerprint is not hex".into()))?;
        let arr: [u8; 16] = bytes
            .try_into()
            .map_err(|_| Error::InvalidKey("fingerprint must be 16 bytes".into()))?;
        Ok(Fingerprint(arr))
    }
}

impl fmt::Debug for Fingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Fingerprint({})", self.to_hex())
    }
}

impl fmt::Display for Fingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct PublicKey {
    n: Integer,
    n_squared: Integer,
    half_n: Integer,
    fingerprint: Fingerprint,
}

impl PublicKey {
    /// Wraps a modulus. Only cheap structural checks are possible without the factors.
    pub fn from_modulus(n: Integer) -> Result<Self> {
        if n < 15 || n.is_even() {
            return Err(Error::InvalidKey("modulus must be an odd composite >= 15".into()));
        }
        let n_squared = Integer::from(n.square_ref());
        let half_n = Integer::from(&n >> 1u32);
        let fingerprint = Fingerprint::of_modulus(&n);
        Ok(PublicKey {
            n,
            n_squared,
            half_n,
            fingerprint,
        })
    }

    pub fn n(&self) -> &Integer {
        &self.n
    }

    pub fn n_squared(&self) -> &Integer {
        &self.n_squared
    }

    /// `⌊n/2⌋`.
    pub fn half_n(&self) -> &Integer {
        &self.half_n
    }

    pub fn fingerprint(&self) -> Fingerprint {
        self.fingerprint
    }

    pub fn bits(&self) -> u32 {
        self.n.significant_bits()
    }

    /// Checks that a ciphertext was produced under this key.
    pub fn check(&self, c: &Ciphertext) -> Result<()> {
        if c.key_fingerprint != self.fingerprint {
            return Err(Error::KeyMismatch);
        }
        Ok(())
    }

    /// `(n+1)^m · r^n mod n²` with fresh `r ← Z*_n`.
    pub fn encrypt<R: RandomSource + ?Sized>(&self, m: &Integer, rng: &mut R) -> Result<Ciphertext> {
        if m.cmp0().is_lt() || *m >= self.n {
            return Err(Error::PlaintextOutOfRange);
        }
        let r = random_coprime(&self.n, &self.n, rng)?;
        Ok(self.encrypt_with_nonce_unchecked(m, &r))
    }

    /// Encryption with a caller-chosen nonce, for known-answer vectors.
    #[cfg(feature = "test-vectors")]
    pub fn encrypt_with_nonce(&self, m: &Integer, r: &Integer) -> Result<Ciphertext> {
        if m.cmp0().is_lt() || *m >= self.n {
            return Err(Error::PlaintextOutOfRange);
        }
        if r.cmp0().is_le() || *r >= self.n || gcd(r, &self.n) != 1 {
            return Err(Error::InvalidParameter("nonce must lie in Z*_n".into()));
        }
        Ok(self.encrypt_with_nonce_unchecked(m, r))
    }

    fn encrypt_with_nonce_unchecked(&self, m: &Integer, r: &Integer) -> Ciphertext {
        // (n+1)^m ≡ 1 + n·m (mod n²)
        let g_m = (Integer::from(&self.n * m) + 1u32) % &self.n_squared;
        let r_n = mod_pow(r, &self.n, &self.n_squared);
        let value = (g_m * r_n) % &self.n_squared;
        Ciphertext {
            value,
            key_fingerprint: self.fingerprint,
        }
    }

    /// Homomorphic addition: `c0 · c1 mod n²`.
    pub fn add(&self, c0: &Ciphertext, c1: &Ciphertext) -> Result<Ciphertext> {
        self.check(c0)?;
        self.check(c1)?;
        Ok(Ciphertext {
            value: Integer::from(&c0.value * &c1.value) % &self.n_squared,
            key_fingerprint: self.fingerprint,
        })
    }

    /// Parses a ciphertext value received from outside and validates membership in `Z*_{n²}`.
    pub fn ciphertext_from_value(&self, value: Integer) -> Result<Ciphertext> {
        if value.cmp0().is_le() || value >= self.n_squared {
            return Err(Error::MalformedCiphertext("value outside (0, n²)"));
        }
        if gcd(&value, &self.n) != 1 {
            return Err(Error::MalformedCiphertext("value not a unit modulo n²"));
        }
        Ok(Ciphertext {
            value,
            key_fingerprint: self.fingerprint,
        })
    }
}

#[derive(Clone)]
pub struct PrivateKey {
    p: Integer,
    q: Integer,
    phi: Integer,
    phi_inv: Integer,
    public: PublicKey,
}

impl PrivateKey {
    /// Builds a key from explicit primes.
    ///
    /// No size check is applied, so tiny test keys such as `(5, 7)` are accepted, but the
    /// primality and divisibility constraints always are.
    pub fn from_primes(p: Integer, q: Integer) -> Result<Self> {
        let mut rng = numtheory::SecureRandom::new();
        for (name, x) in [("p", &p), ("q", &q)] {
            if *x <= 2 || x.is_even() || !is_probable_prime_with(x, numtheory::DEFAULT_MR_ROUNDS, &mut rng) {
                return Err(Error::ConstraintViolation(format!("{name} is not an odd prime")));
            }
        }
        check_prime_pair(&p, &q)?;
        Ok(Self::assemble(p, q))
    }

    fn assemble(p: Integer, q: Integer) -> Self {
        let n = Integer::from(&p * &q);
        let phi = Integer::from(&p - 1u32) * Integer::from(&q - 1u32);
        let phi_inv = mod_inverse(&phi, &n).expect("constraints imply gcd(n, φ(n)) = 1");
        let public = PublicKey::from_modulus(n).expect("product of two odd primes");
        PrivateKey {
            p,
            q,
            phi,
            phi_inv,
            public,
        }
    }

    pub fn public(&self) -> &PublicKey {
        &self.public
    }

    pub fn p(&self) -> &Integer {
        &self.p
    }

    pub fn q(&self) -> &Integer {
        &self.q
    }

    /// `φ(n) = (p-1)(q-1)`.
    pub fn phi(&self) -> &Integer {
        &self.phi
    }

    /// `φ(n)^{-1} mod n`.
    pub fn phi_inv(&self) -> &Integer {
        &self.phi_inv
    }

    /// `L(c^φ mod n²) · φ⁻¹ mod n` with `L(u) = (u - 1) / n`.
    pub fn decrypt(&self, c: &Ciphertext) -> Result<Integer> {
        self.public.check(c)?;
        let pk = &self.public;
        let u = mod_pow(&c.value, &self.phi, pk.n_squared());
        let l = Integer::from(&u - 1u32);
        if !l.is_divisible(pk.n()) {
            return Err(Error::MalformedCiphertext("c^φ(n) - 1 not divisible by n"));
        }
        let l = l.div_exact(pk.n());
        Ok((l * &self.phi_inv) % pk.n())
    }
}

impl fmt::Debug for PrivateKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PrivateKey")
            .field("fingerprint", &self.public.fingerprint)
            .finish_non_exhaustive()
    }
}

fn check_prime_pair(p: &Integer, q: &Integer) -> Result<()> {
    if p == q {
        return Err(Error::ConstraintViolation("p and q must be distinct".into()));
    }
    if Integer::from(q - 1u32).is_divisible(p) {
        return Err(Error::ConstraintViolation("p divides q - 1".into()));
    }
    if Integer::from(p - 1u32).is_divisible(q) {
        return Err(Error::ConstraintViolation("q divides p - 1".into()));
    }
    Ok(())
}

/// Generates a key pair whose modulus has `bits ± 1` bits.
pub fn keygen<R: RandomSource + ?Sized>(bits: u32, rng: &mut R) -> Result<(PublicKey, PrivateKey)> {
    if bits < MIN_KEY_BITS {
        return Err(Error::InvalidParameter(format!(
            "key size must be at least {MIN_KEY_BITS} bits"
        )));
    }
    let prime_bits = bits.div_ceil(2);
    for _ in 0..KEYGEN_RETRY_BUDGET {
        let p = random_prime(prime_bits, rng);
        let q = random_prime(prime_bits, rng);
        if check_prime_pair(&p, &q).is_err() {
            continue;
        }
        let sk = PrivateKey::assemble(p, q);
        return Ok((sk.public.clone(), sk));
    }
    Err(Error::Exhausted("no admissible prime pair found"))
}

/// An element of `Z*_{n²}` tagged with the fingerprint of the key that produced it.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Ciphertext {
    value: Integer,
    key_fingerprint: Fingerprint,
}

impl Ciphertext {
    pub fn value(&self) -> &Integer {
        &self.value
    }

    pub fn key_fingerprint(&self) -> Fingerprint {
        self.key_fingerprint
    }

    pub fn to_hex(&self) -> String {
        self.value.to_string_radix(16)
    }

    pub(crate) fn from_raw(value: Integer, key_fingerprint: Fingerprint) -> Self {
        Ciphertext {
            value,
            key_fingerprint,
        }
    }
}
