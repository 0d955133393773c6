//! Offline advisory database for version, end-of-life and vulnerability lookups.
//!
//! File format, one record per line, `#` starts a comment line:
//!
//! ```text
//! ecosystem|name|safe_below|eol|any_version|advisory_id|cwe
//! apt|openssl|1.0.2|false|false|CVE-2014-0160|CWE-125
//! ```
//!
//! `safe_below` may be empty; `eol` and `any_version` are `true`/`false`;
//! `advisory_id` and `cwe` may be empty. Every record sets at least one of
//! `safe_below`, `eol`, `any_version`.

mod version;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::LazyLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use version::{compare, Version, VersionError};

const BUNDLED: &str = include_str!("../../data/advisories.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Ecosystem {
    Apt,
    Yum,
    Pip,
    Gem,
    Terraform,
    Box,
    Generic,
}

impl Ecosystem {
    pub const ALL: [Ecosystem; 7] = [
        Ecosystem::Apt,
        Ecosystem::Yum,
        Ecosystem::Pip,
        Ecosystem::Gem,
        Ecosystem::Terraform,
        Ecosystem::Box,
        Ecosystem::Generic,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Ecosystem::Apt => "apt",
            Ecosystem::Yum => "yum",
            Ecosystem::Pip => "pip",
            Ecosystem::Gem => "gem",
            Ecosystem::Terraform => "terraform",
            Ecosystem::Box => "box",
            Ecosystem::Generic => "generic",
        }
    }
}

impl fmt::Display for Ecosystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Ecosystem {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ecosystem::ALL
            .into_iter()
            .find(|e| e.as_str() == s)
            .ok_or_else(|| format!("unknown ecosystem `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdvisoryRecord {
    pub ecosystem: Ecosystem,
    pub name: String,
    pub safe_below: Option<String>,
    pub eol: bool,
    pub any_version: bool,
    pub advisory_id: Option<String>,
    pub cwe: Option<String>,
}

impl AdvisoryRecord {
    /// Whether this record applies to `version` (`None` = unknown version).
    pub fn matches(&self, version: Option<&Version>) -> bool {
        if self.eol || self.any_version {
            return true;
        }
        match (version, &self.safe_below) {
            (Some(v), Some(sb)) => Version::parse(sb).map(|sb| *v < sb).unwrap_or(false),
            _ => false,
        }
    }

    /// Carries concrete vulnerability evidence (not just end-of-life).
    pub fn is_vulnerability(&self) -> bool {
        self.advisory_id.is_some() || (self.any_version && !self.eol)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("advisory file line {line}: {message}")]
pub struct AdvisoryError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, Default)]
pub struct AdvisoryDb {
    index: BTreeMap<(Ecosystem, String), Vec<AdvisoryRecord>>,
}

fn parse_bool(s: &str, line: usize, field: &str) -> Result<bool, AdvisoryError> {
    match s {
        "true" => Ok(true),
        "false" | "" => Ok(false),
        other => Err(AdvisoryError {
            line,
            message: format!("{field} must be true/false, got `{other}`"),
        }),
    }
}

pub fn load_advisories(text: &str) -> Result<AdvisoryDb, AdvisoryError> {
    let mut db = AdvisoryDb::default();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let l = raw.trim();
        if l.is_empty() || l.starts_with('#') {
            continue;
        }
        let err = |message: String| AdvisoryError { line, message };
        let f: Vec<&str> = l.split('|').map(str::trim).collect();
        if f.len() != 7 {
            return Err(err(format!("expected 7 fields, found {}", f.len())));
        }
        let ecosystem: Ecosystem = f[0].parse().map_err(err)?;
        if f[1].is_empty() {
            return Err(err("empty package name".into()));
        }
        let safe_below = (!f[2].is_empty()).then(|| f[2].to_string());
        if let Some(sb) = &safe_below {
            Version::parse(sb).map_err(|e| err(e.to_string()))?;
        }
        let eol = parse_bool(f[3], line, "eol")?;
        let any_version = parse_bool(f[4], line, "any_version")?;
        if safe_below.is_none() && !eol && !any_version {
            return Err(err("one of safe_below, eol, any_version must be set".into()));
        }
        let cwe = (!f[6].is_empty()).then(|| f[6].to_string());
        if let Some(c) = &cwe {
            if !c.starts_with("CWE-") || !c[4..].bytes().all(|b| b.is_ascii_digit()) || c.len() == 4 {
                return Err(err(format!("`{c}` is not a CWE identifier")));
            }
        }
        db.insert(AdvisoryRecord {
            ecosystem,
            name: f[1].to_string(),
            safe_below,
            eol,
            any_version,
            advisory_id: (!f[5].is_empty()).then(|| f[5].to_string()),
            cwe,
        });
    }
    Ok(db)
}

static DEFAULT: LazyLock<AdvisoryDb> =
    LazyLock::new(|| load_advisories(BUNDLED).expect("bundled advisories are valid"));

pub fn bundled() -> &'static AdvisoryDb {
    &DEFAULT
}

impl AdvisoryDb {
    /// Insert, merging with an existing record for the same advisory by
    /// keeping the widest affected range.
    pub fn insert(&mut self, rec: AdvisoryRecord) {
        let entry = self
            .index
            .entry((rec.ecosystem, rec.name.to_ascii_lowercase()))
            .or_default();
        if let Some(existing) = entry.iter_mut().find(|r| r.advisory_id == rec.advisory_id) {
            existing.eol |= rec.eol;
            existing.any_version |= rec.any_version;
            existing.safe_below = match (existing.safe_below.take(), rec.safe_below) {
                (Some(a), Some(b)) => {
                    let wider = compare(&a, &b).map(|o| o.is_lt()).unwrap_or(false);
                    Some(if wider { b } else { a })
                }
                (a, b) => a.or(b),
            };
            if existing.cwe.is_none() {
                existing.cwe = rec.cwe;
            }
        } else {
            entry.push(rec);
        }
        entry.sort_by(|a, b| a.advisory_id.cmp(&b.advisory_id));
    }

    pub fn len(&self) -> usize {
        self.index.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn contains(&self, ecosystem: Ecosystem, name: &str) -> bool {
        self.index
            .contains_key(&(ecosystem, name.to_ascii_lowercase()))
    }

    pub fn records(&self) -> impl Iterator<Item = &AdvisoryRecord> {
        self.index.values().flatten()
    }

    /// Records for `(ecosystem, name)` applying to `version`. An unparseable
    /// version is treated as unknown. Sorted by advisory id.
    pub fn query(&self, ecosystem: Ecosystem, name: &str, version: Option<&str>) -> Vec<&AdvisoryRecord> {
        let v = version.and_then(|v| Version::parse(v).ok());
        self.index
            .get(&(ecosystem, name.to_ascii_lowercase()))
            .map(|recs| recs.iter().filter(|r| r.matches(v.as_ref())).collect())
            .unwrap_or_default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_seed_entries() {
        let db = bundled();
        assert!(db.contains(Ecosystem::Apt, "openssl"));
        assert!(db.query(Ecosystem::Apt, "python2.7", None).iter().any(|r| r.eol));
        assert!(db.query(Ecosystem::Generic, "python2.7", None).iter().any(|r| r.eol));
    }

    #[test]
    fn query_semantics() {
        let db = bundled();
        let hit = db.query(Ecosystem::Apt, "openssl", Some("1.0.1"));
        assert_eq!(hit.len(), 1);
        assert_eq!(hit[0].advisory_id.as_deref(), Some("CVE-2014-0160"));
        assert!(db.query(Ecosystem::Apt, "openssl", None).is_empty());
        assert!(db.query(Ecosystem::Apt, "openssl", Some("3.9.9")).is_empty());
        assert!(db.query(Ecosystem::Gem, "left-pad", Some("1.0")).is_empty());
        assert!(db.query(Ecosystem::Apt, "openssl", Some("not a version")).is_empty());
    }

    #[test]
    fn empty_file_is_valid() {
        let db = load_advisories("").unwrap();
        assert!(db.is_empty());
        assert!(db.query(Ecosystem::Apt, "openssl", Some("1.0")).is_empty());
    }

    #[test]
    fn bad_rows_report_line() {
        let e = load_advisories("# c\napt|x|1..x y|false|false||\n").unwrap_err();
        assert_eq!(e.line, 2);
        let e = load_advisories("apt|x||false|false||\n").unwrap_err();
        assert_eq!(e.line, 1);
        assert!(load_advisories("zip|x|1|false|false||\n").is_err());
    }

    #[test]
    fn duplicates_merge_to_widest_range() {
        let db = load_advisories(
            "apt|foo|1.2|false|false|CVE-1|\napt|foo|1.5|false|false|CVE-1|\n",
        )
        .unwrap();
        assert_eq!(db.len(), 1);
        assert_eq!(db.query(Ecosystem::Apt, "foo", Some("1.4")).len(), 1);
    }
}
