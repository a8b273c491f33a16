//! Known-answer vectors over the toy key `p = 5`, `q = 7`.
//!
//! The file is a pure function of the seed, so regenerating it must reproduce the committed
//! copy byte for byte, and [`replay`] re-derives every value from the library.

use std::cmp::Ordering;

use hope_core::hope::{self, ComparisonKey};
use hope_core::keyfile::{int_from_hex, int_to_hex};
use hope_core::numtheory::{random_coprime, random_below, SeededRandom};
use hope_core::{Ciphertext, Integer, PrivateKey, PublicKey};
use serde::{Deserialize, Serialize};

pub const KAT_VERSION: u32 = 1;
const TOY_P: u32 = 5;
const TOY_Q: u32 = 7;
const HOMOMORPHIC_CASES: usize = 24;
const CMP_BOUND: i64 = 2;
const WORKED_ZETA: u32 = 2;
const WORKED_ETA: u32 = 3;
const WORKED_ETA0: u32 = 11;

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq, Eq)]
#[serde(deny_unknown_fields)]
pub struct KatKey {
    pub p_hex: String,
    pub q_hex: String,
    pub n_hex: String,
    pub phi_hex: String,
    pub phi_inv_hex: String,
    pub fingerprint_hex: String,
}

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq, Eq)]
#[serde(deny_unknown_fields)]
pub struct EncVector {
    pub m: i64,
    pub r_hex: String,
    pub c_hex: String,
}

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq, Eq)]
#[serde(deny_unknown_fields)]
pub struct BinaryVector {
    pub a: i64,
    pub b: i64,
    pub ca_hex: String,
    pub cb_hex: String,
    pub out_hex: String,
    pub plain: i64,
}

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq, Eq)]
#[serde(deny_unknown_fields)]
pub struct CmpVector {
    pub m0: i64,
    pub m1: i64,
    pub c0_hex: String,
    pub c1_hex: String,
    pub blinded: i64,
    pub result: String,
}

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq, Eq)]
#[serde(deny_unknown_fields)]
pub struct CmpSection {
    pub m_bound: i64,
    pub zeta_hex: String,
    pub eta_hex: String,
    pub eta0_hex: String,
    pub ck0_hex: String,
    pub ck0_mod_n_hex: String,
    pub ck1_hex: String,
    pub cases: Vec<CmpVector>,
}

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq, Eq)]
#[serde(deny_unknown_fields)]
pub struct KatFile {
    pub version: u32,
    pub seed: u64,
    pub key: KatKey,
    pub enc: Vec<EncVector>,
    pub add: Vec<BinaryVector>,
    pub sub: Vec<BinaryVector>,
    pub cmp: CmpSection,
}

pub fn toy_key() -> PrivateKey {
    PrivateKey::from_primes(Integer::from(TOY_P), Integer::from(TOY_Q)).expect("5·7 satisfies the key constraints")
}

pub fn worked_comparison_key(sk: &PrivateKey) -> ComparisonKey {
    ComparisonKey::from_secrets(
        sk,
        &Integer::from(CMP_BOUND),
        &Integer::from(WORKED_ZETA),
        &Integer::from(WORKED_ETA),
        &Integer::from(WORKED_ETA0),
        0,
    )
    .expect("worked parameters are valid for n = 35")
}

pub fn ordering_label(o: Ordering) -> &'static str {
    match o {
        Ordering::Less => "LT",
        Ordering::Equal => "EQ",
        Ordering::Greater => "GT",
    }
}

fn hex(x: &Integer) -> String {
    int_to_hex(x)
}

fn small(x: &Integer) -> i64 {
    x.to_i64().expect("toy-key values fit in i64")
}

fn signed_below(bound: i64, rng: &mut SeededRandom) -> i64 {
    small(&random_below(&Integer::from(2 * bound + 1), rng)) - bound
}

fn enc(pk: &PublicKey, m: i64, rng: &mut SeededRandom) -> (Integer, Ciphertext) {
    let r = random_coprime(pk.n(), pk.n(), rng).expect("Z*_35 is not empty");
    let c = hope::encrypt_with_nonce(pk, &Integer::from(m), &r).expect("m in range");
    (r, c)
}

pub fn generate(seed: u64) -> KatFile {
    let sk = toy_key();
    let pk = sk.public();
    let mut rng = SeededRandom::new(seed);
    let half = small(pk.half_n());

    let enc_vectors = (-half..half)
        .map(|m| {
            let (r, c) = enc(pk, m, &mut rng);
            EncVector {
                m,
                r_hex: hex(&r),
                c_hex: c.to_hex(),
            }
        })
        .collect();

    // operands kept within ±half/2 so sums and differences stay decodable
    let span = half / 2;
    let mut binary = |op: fn(&PublicKey, &Ciphertext, &Ciphertext) -> Ciphertext, plain: fn(i64, i64) -> i64| {
        (0..HOMOMORPHIC_CASES)
            .map(|_| {
                let a = signed_below(span, &mut rng);
                let b = signed_below(span, &mut rng);
                let (_, ca) = enc(pk, a, &mut rng);
                let (_, cb) = enc(pk, b, &mut rng);
                BinaryVector {
                    a,
                    b,
                    ca_hex: ca.to_hex(),
                    cb_hex: cb.to_hex(),
                    out_hex: op(pk, &ca, &cb).to_hex(),
                    plain: plain(a, b),
                }
            })
            .collect::<Vec<_>>()
    };
    let add = binary(|pk, a, b| pk.add(a, b).expect("same key"), |a, b| a + b);
    let sub = binary(|pk, a, b| hope::subtract(pk, a, b).expect("same key"), |a, b| a - b);

    let ck = worked_comparison_key(&sk);
    let mut cases = Vec::new();
    for m0 in -CMP_BOUND..=CMP_BOUND {
        for m1 in -CMP_BOUND..=CMP_BOUND {
            let (_, c0) = enc(pk, m0, &mut rng);
            let (_, c1) = enc(pk, m1, &mut rng);
            let r = ck.compare(pk, &c0, &c1).expect("worked key compares");
            cases.push(CmpVector {
                m0,
                m1,
                c0_hex: c0.to_hex(),
                c1_hex: c1.to_hex(),
                blinded: small(&r.blinded_diff),
                result: ordering_label(r.ordering).into(),
            });
        }
    }

    KatFile {
        version: KAT_VERSION,
        seed,
        key: KatKey {
            p_hex: hex(sk.p()),
            q_hex: hex(sk.q()),
            n_hex: hex(pk.n()),
            phi_hex: hex(sk.phi()),
            phi_inv_hex: hex(sk.phi_inv()),
            fingerprint_hex: pk.fingerprint().to_hex(),
        },
        enc: enc_vectors,
        add,
        sub,
        cmp: CmpSection {
            m_bound: CMP_BOUND,
            zeta_hex: hex(&Integer::from(WORKED_ZETA)),
            eta_hex: hex(&Integer::from(WORKED_ETA)),
            eta0_hex: hex(&Integer::from(WORKED_ETA0)),
            ck0_hex: hex(ck.ck0()),
            ck0_mod_n_hex: hex(&Integer::from(ck.ck0() % pk.n())),
            ck1_hex: hex(ck.ck1()),
            cases,
        },
    }
}

pub fn to_json(kat: &KatFile) -> String {
    let mut s = serde_json::to_string_pretty(kat).expect("KAT always serializes");
    s.push('\n');
    s
}

/// A replay failure: which vector, and what differed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mismatch(pub String);

fn parse(pk: &PublicKey, h: &str, what: &str) -> Result<Ciphertext, Mismatch> {
    int_from_hex(h)
        .and_then(|v| pk.ciphertext_from_value(v).ok())
        .ok_or_else(|| Mismatch(format!("{what}: {h} is not a ciphertext")))
}

fn expect_eq<T: PartialEq + std::fmt::Debug>(what: &str, got: T, want: T) -> Result<(), Mismatch> {
    if got == want {
        Ok(())
    } else {
        Err(Mismatch(format!("{what}: library gives {got:?}, file says {want:?}")))
    }
}

/// Recomputes every vector in `kat` with the library.
pub fn replay(kat: &KatFile) -> Result<usize, Mismatch> {
    expect_eq("version", kat.version, KAT_VERSION)?;
    let sk = toy_key();
    let pk = sk.public();
    expect_eq("n", kat.key.n_hex.as_str(), hex(pk.n()).as_str())?;
    expect_eq("phi", kat.key.phi_hex.as_str(), hex(sk.phi()).as_str())?;
    expect_eq("phi_inv", kat.key.phi_inv_hex.as_str(), hex(sk.phi_inv()).as_str())?;
    expect_eq("fingerprint", kat.key.fingerprint_hex.clone(), pk.fingerprint().to_hex())?;
    let mut checked = 0;

    for (i, v) in kat.enc.iter().enumerate() {
        let r = int_from_hex(&v.r_hex).ok_or_else(|| Mismatch(format!("enc[{i}] nonce")))?;
        let c = hope::encrypt_with_nonce(pk, &Integer::from(v.m), &r)
            .map_err(|e| Mismatch(format!("enc[{i}]: {e}")))?;
        expect_eq(&format!("enc[{i}]"), c.to_hex(), v.c_hex.clone())?;
        let m = hope::decrypt(&sk, &c).map_err(|e| Mismatch(format!("dec[{i}]: {e}")))?;
        expect_eq(&format!("dec[{i}]"), small(&m), v.m)?;
        checked += 1;
    }

    for (label, vectors, sub) in [("add", &kat.add, false), ("sub", &kat.sub, true)] {
        for (i, v) in vectors.iter().enumerate() {
            let what = format!("{label}[{i}]");
            let ca = parse(pk, &v.ca_hex, &what)?;
            let cb = parse(pk, &v.cb_hex, &what)?;
            expect_eq(&what, small(&hope::decrypt(&sk, &ca).unwrap()), v.a)?;
            expect_eq(&what, small(&hope::decrypt(&sk, &cb).unwrap()), v.b)?;
            let out = if sub {
                hope::subtract(pk, &ca, &cb)
            } else {
                pk.add(&ca, &cb)
            }
            .map_err(|e| Mismatch(format!("{what}: {e}")))?;
            expect_eq(&what, out.to_hex(), v.out_hex.clone())?;
            expect_eq(&what, small(&hope::decrypt(&sk, &out).unwrap()), v.plain)?;
            checked += 1;
        }
    }

    let ck = worked_comparison_key(&sk);
    expect_eq("ck0", hex(ck.ck0()), kat.cmp.ck0_hex.clone())?;
    expect_eq("ck0 mod n", hex(&Integer::from(ck.ck0() % pk.n())), kat.cmp.ck0_mod_n_hex.clone())?;
    expect_eq("ck1", hex(ck.ck1()), kat.cmp.ck1_hex.clone())?;
    for (i, v) in kat.cmp.cases.iter().enumerate() {
        let what = format!("cmp[{i}]");
        let c0 = parse(pk, &v.c0_hex, &what)?;
        let c1 = parse(pk, &v.c1_hex, &what)?;
        let r = ck.compare(pk, &c0, &c1).map_err(|e| Mismatch(format!("{what}: {e}")))?;
        expect_eq(&what, small(&r.blinded_diff), v.blinded)?;
        expect_eq(&what, ordering_label(r.ordering), v.result.as_str())?;
        expect_eq(&what, ordering_label(v.m0.cmp(&v.m1)), v.result.as_str())?;
        checked += 1;
    }
    Ok(checked)
}
