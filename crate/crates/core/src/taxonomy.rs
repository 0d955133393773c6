//! Security smell categories and their CWE anchors.

use std::collections::{BTreeMap, HashSet};
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const EXPECTED_CATEGORIES: usize = 62;
pub const EXPECTED_RULE_BOUND: usize = 10;

const BUNDLED: &str = include_str!("../data/taxonomy.txt");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SmellCategory {
    pub id: String,
    pub name: String,
    pub cwes: Vec<String>,
    pub rule_bound: bool,
    pub description: String,
    #[serde(default)]
    pub provisional: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CweMapping {
    pub category_id: String,
    pub cwe: String,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TaxonomyError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: duplicate category id `{id}`")]
    DuplicateId { line: usize, id: String },
    #[error("{0}")]
    CountMismatch(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Taxonomy {
    categories: Vec<SmellCategory>,
    aliases: BTreeMap<String, String>,
    pub warnings: Vec<String>,
}

static ID_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^[a-z0-9]+(-[a-z0-9]+)*$").unwrap());
static CWE_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^CWE-[0-9]+$").unwrap());

/// Parse a taxonomy file. With `strict`, count mismatches are errors.
pub fn load_taxonomy(text: &str, strict: bool) -> Result<Taxonomy, TaxonomyError> {
    let mut categories: Vec<SmellCategory> = Vec::new();
    let mut aliases = BTreeMap::new();
    let mut seen = HashSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let l = raw.trim();
        if l.is_empty() || l.starts_with('#') {
            continue;
        }
        let malformed = |message: &str| TaxonomyError::Malformed {
            line,
            message: message.to_string(),
        };
        let fields: Vec<&str> = l.split('|').map(str::trim).collect();
        if fields[0] == "@alias" {
            if fields.len() != 3 || fields[1].is_empty() || fields[2].is_empty() {
                return Err(malformed("alias rows are `@alias|label|id`"));
            }
            aliases.insert(fields[1].to_ascii_lowercase(), fields[2].to_string());
            continue;
        }
        if !(5..=6).contains(&fields.len()) {
            return Err(malformed(
                "expected `id|name|cwes|rule_bound|description[|provisional]`",
            ));
        }
        let id = fields[0];
        if !ID_RE.is_match(id) {
            return Err(malformed(&format!("id `{id}` is not lowercase-kebab")));
        }
        if fields[1].is_empty() {
            return Err(malformed("empty name"));
        }
        let cwes: Vec<String> = fields[2]
            .split(',')
            .map(str::trim)
            .filter(|c| !c.is_empty())
            .map(str::to_string)
            .collect();
        if let Some(bad) = cwes.iter().find(|c| !CWE_RE.is_match(c)) {
            return Err(malformed(&format!("`{bad}` is not a CWE identifier")));
        }
        let rule_bound = match fields[3] {
            "true" => true,
            "false" => false,
            other => return Err(malformed(&format!("rule_bound must be true/false, got `{other}`"))),
        };
        let provisional = match fields.get(5) {
            None | Some(&"") => false,
            Some(&"provisional") => true,
            Some(other) => return Err(malformed(&format!("unknown flag `{other}`"))),
        };
        if !seen.insert(id.to_string()) {
            return Err(TaxonomyError::DuplicateId {
                line,
                id: id.to_string(),
            });
        }
        categories.push(SmellCategory {
            id: id.to_string(),
            name: fields[1].to_string(),
            cwes,
            rule_bound,
            description: fields[4].to_string(),
            provisional,
        });
    }
    for (alias, target) in &aliases {
        if !seen.contains(target) {
            return Err(TaxonomyError::Malformed {
                line: 0,
                message: format!("alias `{alias}` points at unknown id `{target}`"),
            });
        }
    }

    let mut warnings = Vec::new();
    let bound = categories.iter().filter(|c| c.rule_bound).count();
    if categories.len() != EXPECTED_CATEGORIES {
        warnings.push(format!(
            "expected {EXPECTED_CATEGORIES} categories, found {}",
            categories.len()
        ));
    }
    if bound != EXPECTED_RULE_BOUND {
        warnings.push(format!(
            "expected {EXPECTED_RULE_BOUND} rule-bound categories, found {bound}"
        ));
    }
    if strict && !warnings.is_empty() {
        return Err(TaxonomyError::CountMismatch(warnings.join("; ")));
    }
    Ok(Taxonomy {
        categories,
        aliases,
        warnings,
    })
}

static DEFAULT: LazyLock<Taxonomy> =
    LazyLock::new(|| load_taxonomy(BUNDLED, true).expect("bundled taxonomy is valid"));

/// The taxonomy shipped with the crate.
pub fn bundled() -> &'static Taxonomy {
    &DEFAULT
}

pub fn bundled_source() -> &'static str {
    BUNDLED
}

impl Taxonomy {
    pub fn categories(&self) -> &[SmellCategory] {
        &self.categories
    }

    pub fn rule_bound(&self) -> impl Iterator<Item = &SmellCategory> {
        self.categories.iter().filter(|c| c.rule_bound)
    }

    pub fn get(&self, id: &str) -> Option<&SmellCategory> {
        self.categories.iter().find(|c| c.id == id)
    }

    /// Look up by id, display name or alias (names are case-insensitive).
    pub fn resolve(&self, label: &str) -> Option<&SmellCategory> {
        if let Some(c) = self.get(label) {
            return Some(c);
        }
        let lower = label.to_ascii_lowercase();
        if let Some(id) = self.aliases.get(&lower) {
            return self.get(id);
        }
        self.categories
            .iter()
            .find(|c| c.name.to_ascii_lowercase() == lower)
    }

    pub fn aliases(&self) -> &BTreeMap<String, String> {
        &self.aliases
    }

    pub fn category_for_cwe(&self, cwe: &str) -> Vec<&SmellCategory> {
        self.categories
            .iter()
            .filter(|c| c.cwes.iter().any(|x| x.eq_ignore_ascii_case(cwe)))
            .collect()
    }

    pub fn mappings(&self) -> Vec<CweMapping> {
        let mut out = Vec::new();
        for c in &self.categories {
            for (i, cwe) in c.cwes.iter().enumerate() {
                out.push(CweMapping {
                    category_id: c.id.clone(),
                    cwe: cwe.clone(),
                    note: if i == 0 { "primary" } else { "secondary" }.to_string(),
                });
            }
        }
        out
    }

    /// Render back to the line format accepted by [`load_taxonomy`].
    pub fn serialize(&self) -> String {
        let mut out = String::from("# id|name|cwes|rule_bound|description[|provisional]\n");
        for c in &self.categories {
            out.push_str(&format!(
                "{}|{}|{}|{}|{}{}\n",
                c.id,
                c.name,
                c.cwes.join(","),
                c.rule_bound,
                c.description,
                if c.provisional { "|provisional" } else { "" }
            ));
        }
        for (alias, id) in &self.aliases {
            out.push_str(&format!("@alias|{alias}|{id}\n"));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_counts() {
        let t = bundled();
        assert_eq!(t.categories().len(), 62);
        assert_eq!(t.rule_bound().count(), 10);
        assert!(t.warnings.is_empty());
    }

    #[test]
    fn duplicate_is_rejected() {
        let dup = format!("{BUNDLED}\ncode-injection|Again|CWE-94|true|x\n");
        assert!(matches!(
            load_taxonomy(&dup, false),
            Err(TaxonomyError::DuplicateId { .. })
        ));
    }

    #[test]
    fn missing_row_warns_unless_strict() {
        let text: String = BUNDLED
            .lines()
            .filter(|l| !l.starts_with("provisional-51"))
            .map(|l| format!("{l}\n"))
            .collect();
        let t = load_taxonomy(&text, false).unwrap();
        assert_eq!(t.categories().len(), 61);
        assert_eq!(t.warnings.len(), 1);
        assert!(load_taxonomy(&text, true).is_err());
    }

    #[test]
    fn malformed_names_line() {
        let err = load_taxonomy("# c\nBad Id|x||false|d\n", false).unwrap_err();
        assert_eq!(
            err,
            TaxonomyError::Malformed {
                line: 2,
                message: "id `Bad Id` is not lowercase-kebab".into()
            }
        );
    }

    #[test]
    fn alias_and_reverse_index() {
        let t = bundled();
        assert_eq!(
            t.resolve("Outdated Software Dependencies").unwrap().id,
            "outdated-dependencies"
        );
        let ids: Vec<_> = t.category_for_cwe("CWE-1104").iter().map(|c| c.id.as_str()).collect();
        assert_eq!(
            ids,
            [
                "insecure-dependency-management",
                "outdated-dependencies",
                "outdated-software-version"
            ]
        );
        assert!(t.category_for_cwe("CWE-9999").is_empty());
    }

    #[test]
    fn serialize_round_trips() {
        let t = bundled();
        let again = load_taxonomy(&t.serialize(), true).unwrap();
        assert_eq!(&again, t);
    }
}
