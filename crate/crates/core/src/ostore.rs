//! Server-side ordered index over ciphertext keys.
//!
//! Entries are grouped into FIFO buckets of keys that compare equal; the buckets are kept
//! in ascending order and located by binary search, so an insert costs at most
//! `⌈log₂(B + 1)⌉` homomorphic comparisons for `B` distinct keys. The index holds only the
//! public key and the comparison key.
//!
//! Ordering is only guaranteed for keys whose plaintexts satisfy `|m| ≤ M` for the bound
//! `M` of the comparison key.

use std::cmp::Ordering;
use std::sync::atomic::{AtomicU64, Ordering as AtomicOrdering};

use crate::error::{Error, Result};
use crate::hope::ComparisonKey;
use crate::paillier::{Ciphertext, PublicKey};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IndexEntry {
    pub entry_id: u64,
    pub key: Ciphertext,
    pub payload: Vec<u8>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct IndexStats {
    pub size: usize,
    pub comparisons: u64,
    pub depth: u32,
}

/// Which ends of a range query are closed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Inclusive {
    pub lo: bool,
    pub hi: bool,
}

impl Inclusive {
    pub const BOTH: Inclusive = Inclusive { lo: true, hi: true };
}

impl Default for Inclusive {
    fn default() -> Self {
        Self::BOTH
    }
}

#[derive(Debug)]
struct Bucket {
    entries: Vec<IndexEntry>,
}

impl Bucket {
    fn representative(&self) -> &Ciphertext {
        &self.entries[0].key
    }
}

#[derive(Debug)]
pub struct EncryptedIndex {
    pk: PublicKey,
    ck: ComparisonKey,
    buckets: Vec<Bucket>,
    len: usize,
    next_id: u64,
    comparisons: AtomicU64,
}

impl EncryptedIndex {
    pub fn new(pk: PublicKey, ck: ComparisonKey) -> Result<Self> {
        if ck.key_fingerprint() != pk.fingerprint() {
            return Err(Error::KeyMismatch);
        }
        Ok(EncryptedIndex {
            pk,
            ck,
            buckets: Vec::new(),
            len: 0,
            next_id: 1,
            comparisons: AtomicU64::new(0),
        })
    }

    pub fn public_key(&self) -> &PublicKey {
        &self.pk
    }

    pub fn comparison_key(&self) -> &ComparisonKey {
        &self.ck
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Installs a rotated comparison key. Signs are epoch-invariant, so the order stays valid.
    pub fn replace_comparison_key(&mut self, ck: ComparisonKey) -> Result<()> {
        if ck.key_fingerprint() != self.pk.fingerprint() {
            return Err(Error::KeyMismatch);
        }
        if ck.bound_m() != self.ck.bound_m() {
            return Err(Error::InvalidKey("rotated key must keep the comparison bound".into()));
        }
        self.ck = ck;
        Ok(())
    }

    fn compare(&self, a: &Ciphertext, b: &Ciphertext) -> Result<Ordering> {
        self.comparisons.fetch_add(1, AtomicOrdering::Relaxed);
        Ok(self.ck.compare(&self.pk, a, b)?.ordering)
    }

    /// Adds a key with an opaque payload and returns its freshly assigned id.
    pub fn insert(&mut self, key: Ciphertext, payload: Vec<u8>) -> Result<u64> {
        let entry_id = self.next_id;
        self.insert_entry(IndexEntry {
            entry_id,
            key,
            payload,
        })?;
        Ok(entry_id)
    }

    /// Adds an entry that already carries an id, e.g. when restoring a snapshot.
    pub fn insert_entry(&mut self, entry: IndexEntry) -> Result<()> {
        self.pk.check(&entry.key)?;
        let (mut lo, mut hi) = (0usize, self.buckets.len());
        while lo < hi {
            let mid = lo + (hi - lo) / 2;
            match self.compare(&entry.key, self.buckets[mid].representative())? {
                Ordering::Equal => {
                    lo = mid;
                    hi = usize::MAX;
                    break;
                }
                Ordering::Less => hi = mid,
                Ordering::Greater => lo = mid + 1,
            }
        }
        self.next_id = self.next_id.max(entry.entry_id + 1);
        self.len += 1;
        if hi == usize::MAX {
            self.buckets[lo].entries.push(entry);
        } else {
            self.buckets.insert(
                lo,
                Bucket {
                    entries: vec![entry],
                },
            );
        }
        Ok(())
    }

    /// First bucket index whose representative is not `below` the probe.
    fn partition_point<F>(&self, probe: &Ciphertext, below: F) -> Result<usize>
    where
        F: Fn(Ordering) -> bool,
    {
        let (mut lo, mut hi) = (0usize, self.buckets.len());
        while lo < hi {
            let mid = lo + (hi - lo) / 2;
            if below(self.compare(self.buckets[mid].representative(), probe)?) {
                lo = mid + 1;
            } else {
                hi = mid;
            }
        }
        Ok(lo)
    }

    /// Entries with `lo ≤ key ≤ hi` (ends per `inclusive`) in ascending order.
    pub fn range(
        &self,
        lo: &Ciphertext,
        hi: &Ciphertext,
        inclusive: Inclusive,
    ) -> Result<Vec<&IndexEntry>> {
        self.pk.check(lo)?;
        self.pk.check(hi)?;
        let start = if inclusive.lo {
            self.partition_point(lo, |o| o == Ordering::Less)?
        } else {
            self.partition_point(lo, |o| o != Ordering::Greater)?
        };
        let end = if inclusive.hi {
            self.partition_point(hi, |o| o != Ordering::Greater)?
        } else {
            self.partition_point(hi, |o| o == Ordering::Less)?
        };
        if start >= end {
            return Ok(Vec::new());
        }
        Ok(self.buckets[start..end]
            .iter()
            .flat_map(|b| b.entries.iter())
            .collect())
    }

    /// One `(representative key, multiplicity)` per distinct plaintext, ascending.
    pub fn group_by(&self) -> Vec<(&Ciphertext, usize)> {
        self.buckets
            .iter()
            .map(|b| (b.representative(), b.entries.len()))
            .collect()
    }

    /// In-order traversal; equal keys appear in insertion order.
    pub fn iter(&self) -> impl Iterator<Item = &IndexEntry> {
        self.buckets.iter().flat_map(|b| b.entries.iter())
    }

    pub fn distinct_keys(&self) -> usize {
        self.buckets.len()
    }

    pub fn stats(&self) -> IndexStats {
        let buckets = self.buckets.len() as u64;
        IndexStats {
            size: self.len,
            comparisons: self.comparisons.load(AtomicOrdering::Relaxed),
            // height of the implicit search tree over the buckets
            depth: 64 - buckets.leading_zeros(),
        }
    }
}
