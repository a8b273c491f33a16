//! Versioned JSON documents for public, private and comparison keys.
//!
//! Big integers are lowercase hex without leading zeros. Loading always recomputes the
//! derived values (`φ`, `φ⁻¹`, fingerprints) and rejects inconsistent files.

use rug::Integer;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hope::ComparisonKey;
use crate::paillier::{Fingerprint, PrivateKey, PublicKey};

pub const KEYFILE_VERSION: u32 = 1;

pub fn int_to_hex(x: &Integer) -> String {
    x.to_string_radix(16)
}

/// Parses canonical hex: lowercase digits, no sign, prefix or leading zeros.
pub fn int_from_hex(s: &str) -> Option<Integer> {
    let canonical = !s.is_empty()
        && s.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b))
        && (s == "0" || !s.starts_with('0'));
    if !canonical {
        return None;
    }
    Integer::from_str_radix(s, 16).ok()
}

fn parse_hex(field: &str, s: &str) -> Result<Integer> {
    int_from_hex(s).ok_or_else(|| Error::InvalidKey(format!("{field} is not canonical hex")))
}

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq, Eq)]
#[serde(deny_unknown_fields)]
pub struct PublicKeyFile {
    pub version: u32,
    pub kind: String,
    pub n_hex: String,
}

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq, Eq)]
#[serde(deny_unknown_fields)]
pub struct PrivateKeyFile {
    pub version: u32,
    pub kind: String,
    pub p_hex: String,
    pub q_hex: String,
}

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq, Eq)]
#[serde(deny_unknown_fields)]
pub struct ComparisonKeyFile {
    pub version: u32,
    pub kind: String,
    pub ck0_hex: String,
    pub ck1_hex: String,
    pub m_bound_hex: String,
    pub epoch: u64,
    pub fingerprint_hex: String,
}

fn check_header(version: u32, kind: &str, expected: &str) -> Result<()> {
    if version != KEYFILE_VERSION {
        return Err(Error::InvalidKey(format!("unsupported key file version {version}")));
    }
    if kind != expected {
        return Err(Error::InvalidKey(format!("expected a {expected} key, found {kind}")));
    }
    Ok(())
}

impl PublicKeyFile {
    pub fn from_key(pk: &PublicKey) -> Self {
        PublicKeyFile {
            version: KEYFILE_VERSION,
            kind: "public".into(),
            n_hex: int_to_hex(pk.n()),
        }
    }

    pub fn to_key(&self) -> Result<PublicKey> {
        check_header(self.version, &self.kind, "public")?;
        PublicKey::from_modulus(parse_hex("n_hex", &self.n_hex)?)
    }
}

impl PrivateKeyFile {
    pub fn from_key(sk: &PrivateKey) -> Self {
        PrivateKeyFile {
            version: KEYFILE_VERSION,
            kind: "private".into(),
            p_hex: int_to_hex(sk.p()),
            q_hex: int_to_hex(sk.q()),
        }
    }

    pub fn to_key(&self) -> Result<PrivateKey> {
        check_header(self.version, &self.kind, "private")?;
        PrivateKey::from_primes(parse_hex("p_hex", &self.p_hex)?, parse_hex("q_hex", &self.q_hex)?)
    }
}

impl ComparisonKeyFile {
    pub fn from_key(ck: &ComparisonKey) -> Self {
        ComparisonKeyFile {
            version: KEYFILE_VERSION,
            kind: "comparison".into(),
            ck0_hex: int_to_hex(ck.ck0()),
            ck1_hex: int_to_hex(ck.ck1()),
            m_bound_hex: int_to_hex(ck.bound_m()),
            epoch: ck.epoch(),
            fingerprint_hex: ck.key_fingerprint().to_hex(),
        }
    }

    /// Validates against the public key it claims to belong to.
    pub fn to_key(&self, pk: &PublicKey) -> Result<ComparisonKey> {
        check_header(self.version, &self.kind, "comparison")?;
        if Fingerprint::from_hex(&self.fingerprint_hex)? != pk.fingerprint() {
            return Err(Error::KeyMismatch);
        }
        ComparisonKey::from_parts(
            pk,
            parse_hex("ck0_hex", &self.ck0_hex)?,
            parse_hex("ck1_hex", &self.ck1_hex)?,
            parse_hex("m_bound_hex", &self.m_bound_hex)?,
            self.epoch,
        )
    }
}

/// Pretty JSON with a trailing newline; stable across write → read → write.
pub fn to_json<T: Serialize>(doc: &T) -> String {
    let mut s = serde_json::to_string_pretty(doc).expect("key documents always serialize");
    s.push('\n');
    s
}

pub fn from_json<'a, T: Deserialize<'a>>(s: &'a str) -> Result<T> {
    serde_json::from_str(s).map_err(|e| Error::InvalidKey(format!("unreadable key file: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numtheory::SeededRandom;

    #[test]
    fn hex_is_canonical() {
        assert_eq!(int_to_hex(&Integer::from(35)), "23");
        assert_eq!(int_to_hex(&Integer::from(0)), "0");
        assert_eq!(int_from_hex("23"), Some(Integer::from(35)));
        assert_eq!(int_from_hex("0"), Some(Integer::from(0)));
        for bad in ["", "023", "0x23", "-23", "2G", "AB", " 23"] {
            assert_eq!(int_from_hex(bad), None, "{bad:?}");
        }
    }

    #[test]
    fn toy_public_key_file() {
        let sk = PrivateKey::from_primes(Integer::from(5), Integer::from(7)).unwrap();
        let doc = PublicKeyFile::from_key(sk.public());
        assert_eq!(doc.n_hex, "23");
        let json = to_json(&doc);
        let back: PublicKeyFile = from_json(&json).unwrap();
        assert_eq!(to_json(&back), json);
        assert_eq!(back.to_key().unwrap(), *sk.public());
    }

    #[test]
    fn files_round_trip_byte_identically() {
        let (pk, sk) = crate::paillier::keygen(128, &mut SeededRandom::new(1)).unwrap();
        let ck = ComparisonKey::generate(&sk, &Integer::from(1000), &mut SeededRandom::new(2)).unwrap();

        let priv_json = to_json(&PrivateKeyFile::from_key(&sk));
        let sk2 = from_json::<PrivateKeyFile>(&priv_json).unwrap().to_key().unwrap();
        assert_eq!(to_json(&PrivateKeyFile::from_key(&sk2)), priv_json);
        assert_eq!(sk2.phi(), sk.phi());

        let ck_json = to_json(&ComparisonKeyFile::from_key(&ck));
        let ck2 = from_json::<ComparisonKeyFile>(&ck_json).unwrap().to_key(&pk).unwrap();
        assert_eq!(ck2, ck);
        assert_eq!(to_json(&ComparisonKeyFile::from_key(&ck2)), ck_json);
    }

    #[test]
    fn inconsistent_files_are_rejected() {
        let bad_pair = PrivateKeyFile {
            version: 1,
            kind: "private".into(),
            p_hex: "3".into(),
            q_hex: "7".into(),
        };
        assert!(matches!(bad_pair.to_key(), Err(Error::ConstraintViolation(_))));

        let wrong_kind = PublicKeyFile {
            version: 1,
            kind: "private".into(),
            n_hex: "23".into(),
        };
        assert!(wrong_kind.to_key().is_err());
        let wrong_version = PublicKeyFile {
            version: 2,
            kind: "public".into(),
            n_hex: "23".into(),
        };
        assert!(wrong_version.to_key().is_err());

        let sk = PrivateKey::from_primes(Integer::from(5), Integer::from(7)).unwrap();
        let other = PrivateKey::from_primes(Integer::from(11), Integer::from(17)).unwrap();
        let ck = ComparisonKey::generate(&sk, &Integer::from(2), &mut SeededRandom::new(3)).unwrap();
        let doc = ComparisonKeyFile::from_key(&ck);
        assert_eq!(doc.to_key(other.public()), Err(Error::KeyMismatch));
        let mut tampered = doc.clone();
        tampered.m_bound_hex = "9".into();
        assert!(tampered.to_key(sk.public()).is_err());

        assert!(from_json::<PublicKeyFile>("{\"version\":1}").is_err());
    }
}
