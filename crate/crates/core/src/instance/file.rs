use std::collections::BTreeMap;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use super::{fmt_args, FSTree, FSTreeConfig, GFamily, SecretTable};
use crate::bitmath::BitString;
use crate::error::{Error, Result};

pub const INSTANCE_FORMAT_VERSION: u32 = 1;

/// On-disk form of an [`FSTree`]. Explicit secrets are keyed by level and
/// then by the comma-joined prefix, e.g. `"00,01"`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceFile {
    pub format_version: u32,
    pub lengths: Vec<usize>,
    pub depth: usize,
    #[serde(serialize_with = "ser_family", deserialize_with = "de_family")]
    pub g_family: GFamily,
    pub seed: u64,
    #[serde(default)]
    pub trivializing: bool,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub secrets: BTreeMap<usize, BTreeMap<String, BitString>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x1: Option<BitString>,
}

fn ser_family<S: Serializer>(g: &GFamily, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_str(g)
}

fn de_family<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<GFamily, D::Error> {
    String::deserialize(d)?
        .parse()
        .map_err(serde::de::Error::custom)
}

impl InstanceFile {
    pub fn from_json(text: &str) -> Result<Self> {
        let file: InstanceFile = serde_json::from_str(text)?;
        if file.format_version != INSTANCE_FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported format_version {}",
                file.format_version
            )));
        }
        if file.lengths.len() != file.depth + 1 {
            return Err(Error::Format(format!(
                "depth {} does not match {} register widths",
                file.depth,
                file.lengths.len()
            )));
        }
        Ok(file)
    }

    /// Pretty JSON with a trailing newline; identical inputs give identical
    /// bytes.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("instance serializes");
        s.push('\n');
        s
    }

    pub fn config(&self) -> Result<FSTreeConfig> {
        let mut secrets = SecretTable::new();
        for (&k, entries) in &self.secrets {
            for (key, s) in entries {
                let prefix = key
                    .split(',')
                    .map(str::parse)
                    .collect::<Result<Vec<BitString>>>()?;
                secrets.entry(k).or_default().insert(prefix, *s);
            }
        }
        Ok(FSTreeConfig {
            lengths: self.lengths.clone(),
            g_family: self.g_family.clone(),
            seed: self.seed,
            secrets,
            x1: self.x1,
        })
    }

    pub fn digest(&self) -> String {
        let hash = Sha256::digest(self.to_json().as_bytes());
        hex::encode(&hash[..8])
    }
}

impl FSTree {
    pub fn to_file(&self) -> InstanceFile {
        let cfg = self.config();
        InstanceFile {
            format_version: INSTANCE_FORMAT_VERSION,
            lengths: cfg.lengths.clone(),
            depth: cfg.depth(),
            g_family: cfg.g_family.clone(),
            seed: cfg.seed,
            trivializing: self.is_trivializing(),
            secrets: cfg
                .secrets
                .iter()
                .map(|(&k, m)| (k, m.iter().map(|(p, s)| (fmt_args(p), *s)).collect()))
                .collect(),
            x1: cfg.x1,
        }
    }

    pub fn from_file(file: &InstanceFile) -> Result<Self> {
        FSTree::build(file.config()?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_file(&InstanceFile::from_json(text)?)
    }

    pub fn to_json(&self) -> String {
        self.to_file().to_json()
    }

    /// Short content hash of the canonical instance file.
    pub fn digest(&self) -> String {
        self.to_file().digest()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bs(s: &str) -> BitString {
        s.parse().unwrap()
    }

    #[test]
    fn explicit_tables_survive_round_trip() {
        let cfg = FSTreeConfig::new(vec![2, 2], GFamily::And, 3)
            .with_secret(1, vec![bs("00")], bs("11"))
            .with_secret(1, vec![bs("01")], bs("10"))
            .with_x1(bs("01"));
        let tree = FSTree::build(cfg.clone()).unwrap();
        let text = tree.to_json();
        assert!(text.contains("\"00\": \"11\""));
        let back = FSTree::from_json(&text).unwrap();
        assert_eq!(back.config(), &cfg);
        assert_eq!(back.to_json(), text);
    }

    #[test]
    fn rejects_bad_files() {
        let good = FSTree::build(FSTreeConfig::new(vec![2, 2], GFamily::Prf, 1))
            .unwrap()
            .to_json();
        let v2 = good.replace("\"format_version\": 1", "\"format_version\": 2");
        assert!(InstanceFile::from_json(&v2).is_err());
        let depth = good.replace("\"depth\": 1", "\"depth\": 2");
        assert!(InstanceFile::from_json(&depth).is_err());
        let fam = good.replace("\"prf\"", "\"nope\"");
        assert!(InstanceFile::from_json(&fam).is_err());
    }

    #[test]
    fn seed_survives_full_u64_range() {
        let tree = FSTree::build(FSTreeConfig::new(vec![1, 1], GFamily::Prf, u64::MAX)).unwrap();
        let back = FSTree::from_json(&tree.to_json()).unwrap();
        assert_eq!(back.config().seed, u64::MAX);
    }

    proptest! {
        #[test]
        fn file_round_trip_is_bit_exact(
            lengths in prop::collection::vec(1usize..=4, 2..=4),
            fam in 0usize..4,
            seed in any::<u64>(),
        ) {
            let family = [GFamily::And, GFamily::Majority, GFamily::Parity, GFamily::Prf][fam].clone();
            let tree = FSTree::build(FSTreeConfig::new(lengths, family, seed)).unwrap();
            let text = tree.to_json();
            let back = FSTree::from_json(&text).unwrap();
            prop_assert_eq!(back.to_json(), text);
            prop_assert_eq!(back.digest(), tree.digest());
        }
    }
}
