use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Mutex;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum OracleKind {
    /// The promised linear function `f_k`.
    F,
    /// The output function `g_k`.
    G,
}

/// Identity of a counted oracle, e.g. `f3` or `g1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct OracleKey {
    pub kind: OracleKind,
    pub level: usize,
}

impl OracleKey {
    pub fn f(level: usize) -> Self {
        Self {
            kind: OracleKind::F,
            level,
        }
    }

    pub fn g(level: usize) -> Self {
        Self {
            kind: OracleKind::G,
            level,
        }
    }
}

impl fmt::Display for OracleKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = match self.kind {
            OracleKind::F => 'f',
            OracleKind::G => 'g',
        };
        write!(f, "{c}{}", self.level)
    }
}

impl FromStr for OracleKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Format(format!("bad oracle key `{s}`"));
        let (kind, rest) = match s.split_at_checked(1).ok_or_else(bad)? {
            ("f", rest) => (OracleKind::F, rest),
            ("g", rest) => (OracleKind::G, rest),
            _ => return Err(bad()),
        };
        let level = rest.parse().map_err(|_| bad())?;
        Ok(Self { kind, level })
    }
}

impl Serialize for OracleKey {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for OracleKey {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(deserializer)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

/// Exact per-oracle invocation counts. Counters only ever increase; the
/// lock makes recording safe from parallel solvers.
#[derive(Debug, Default)]
pub struct QueryLedger {
    counts: Mutex<BTreeMap<OracleKey, u64>>,
}

impl QueryLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&self, key: OracleKey) {
        *self.lock().entry(key).or_insert(0) += 1;
    }

    pub fn count(&self, key: OracleKey) -> u64 {
        self.lock().get(&key).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.lock().values().sum()
    }

    pub fn snapshot(&self) -> BTreeMap<OracleKey, u64> {
        self.lock().clone()
    }

    /// Adds another run's counts into this ledger.
    pub fn merge(&self, other: &QueryLedger) {
        let theirs = other.snapshot();
        let mut mine = self.lock();
        for (k, v) in theirs {
            *mine.entry(k).or_insert(0) += v;
        }
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, BTreeMap<OracleKey, u64>> {
        // a poisoned ledger still holds valid counts
        self.counts.lock().unwrap_or_else(|e| e.into_inner())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_start_at_zero_and_merge() {
        let a = QueryLedger::new();
        assert_eq!(a.total(), 0);
        a.record(OracleKey::f(3));
        a.record(OracleKey::f(3));
        a.record(OracleKey::g(1));
        let b = QueryLedger::new();
        b.record(OracleKey::g(1));
        a.merge(&b);
        assert_eq!(a.count(OracleKey::f(3)), 2);
        assert_eq!(a.count(OracleKey::g(1)), 2);
        assert_eq!(a.count(OracleKey::g(2)), 0);
        assert_eq!(a.total(), 4);
    }

    #[test]
    fn parallel_recording_is_exact() {
        let ledger = QueryLedger::new();
        std::thread::scope(|s| {
            for _ in 0..8 {
                s.spawn(|| {
                    for _ in 0..1000 {
                        ledger.record(OracleKey::f(2));
                    }
                });
            }
        });
        assert_eq!(ledger.count(OracleKey::f(2)), 8000);
    }

    #[test]
    fn key_text_form() {
        assert_eq!(OracleKey::f(3).to_string(), "f3");
        assert_eq!("g12".parse::<OracleKey>().unwrap(), OracleKey::g(12));
        assert!("h1".parse::<OracleKey>().is_err());
        assert!("f".parse::<OracleKey>().is_err());
    }
}
