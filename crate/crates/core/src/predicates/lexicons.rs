//! Keyword and pattern sets, loaded from a sectioned text file.

use std::collections::BTreeMap;
use std::sync::LazyLock;

use regex::{Regex, RegexBuilder};
use thiserror::Error;

const BUNDLED: &str = include_str!("../../data/lexicons.txt");

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("lexicon line {line}: {message}")]
pub struct LexiconError {
    pub line: usize,
    pub message: String,
}

/// Ordered regular expressions, case-insensitive unless an entry opts out.
#[derive(Debug, Clone, Default)]
pub struct PatternSet {
    sources: Vec<String>,
    regexes: Vec<Regex>,
}

impl PatternSet {
    pub fn new<S: AsRef<str>>(patterns: &[S]) -> Result<PatternSet, regex::Error> {
        let mut set = PatternSet::default();
        for p in patterns {
            set.push(p.as_ref())?;
        }
        Ok(set)
    }

    fn push(&mut self, pattern: &str) -> Result<(), regex::Error> {
        let re = RegexBuilder::new(pattern).case_insensitive(true).build()?;
        self.sources.push(pattern.to_string());
        self.regexes.push(re);
        Ok(())
    }

    pub fn is_match(&self, text: &str) -> bool {
        self.regexes.iter().any(|r| r.is_match(text))
    }

    /// Leftmost match over all patterns, as a byte range.
    pub fn find(&self, text: &str) -> Option<(usize, usize)> {
        self.regexes
            .iter()
            .filter_map(|r| r.find(text))
            .map(|m| (m.start(), m.end()))
            .min_by_key(|&(s, e)| (s, std::cmp::Reverse(e)))
    }

    pub fn patterns(&self) -> &[String] {
        &self.sources
    }

    pub fn len(&self) -> usize {
        self.sources.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sources.is_empty()
    }
}

/// Case-insensitive literal words.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct WordSet {
    words: Vec<String>,
}

impl WordSet {
    pub fn new<S: AsRef<str>>(words: &[S]) -> WordSet {
        let mut set = WordSet::default();
        for w in words {
            set.push(w.as_ref());
        }
        set
    }

    fn push(&mut self, word: &str) {
        let w = word.to_lowercase();
        if !self.words.contains(&w) {
            self.words.push(w);
        }
    }

    pub fn contains(&self, word: &str) -> bool {
        let w = word.to_lowercase();
        self.words.iter().any(|x| *x == w)
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct Lexicons {
    pub sensitive_keys: PatternSet,
    pub dangerous_settings: PatternSet,
    pub command_sinks: WordSet,
    pub command_arg_keys: WordSet,
    pub code_sinks: PatternSet,
    pub sanitizers: PatternSet,
    pub path_keys: WordSet,
    pub vague_names: WordSet,
    pub placeholders: PatternSet,
    pub secret_refs: PatternSet,
    pub trusted_registries: WordSet,
    pub trusted_refs: WordSet,
    pub config_constructs: WordSet,
    pub config_paths: PatternSet,
    pub security_keywords: PatternSet,
    pub scope_terms: WordSet,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Kind {
    Patterns,
    Words,
}

const SECTIONS: &[(&str, Kind)] = &[
    ("sensitive_keys", Kind::Patterns),
    ("dangerous_settings", Kind::Patterns),
    ("command_sinks", Kind::Words),
    ("command_arg_keys", Kind::Words),
    ("code_sinks", Kind::Patterns),
    ("sanitizers", Kind::Patterns),
    ("path_keys", Kind::Words),
    ("vague_names", Kind::Words),
    ("placeholders", Kind::Patterns),
    ("secret_refs", Kind::Patterns),
    ("trusted_registries", Kind::Words),
    ("trusted_refs", Kind::Words),
    ("config_constructs", Kind::Words),
    ("config_paths", Kind::Patterns),
    ("security_keywords", Kind::Patterns),
    ("scope_terms", Kind::Words),
];

/// Section name -> (entries, line numbers).
type Raw = BTreeMap<&'static str, Vec<(String, usize)>>;

fn read_sections(text: &str) -> Result<(Raw, Vec<&'static str>), LexiconError> {
    let mut raw: Raw = BTreeMap::new();
    let mut replaced = Vec::new();
    let mut current: Option<&'static str> = None;
    for (i, l) in text.lines().enumerate() {
        let line = i + 1;
        let t = l.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        if let Some(name) = t.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
            let Some(&(sec, _)) = SECTIONS.iter().find(|(n, _)| *n == name.trim()) else {
                return Err(LexiconError {
                    line,
                    message: format!("unknown section `{name}`"),
                });
            };
            current = Some(sec);
            raw.entry(sec).or_default();
            continue;
        }
        let Some(sec) = current else {
            return Err(LexiconError {
                line,
                message: "entry before any [section] header".into(),
            });
        };
        if t == "@replace" {
            replaced.push(sec);
            raw.entry(sec).or_default().clear();
            continue;
        }
        raw.entry(sec).or_default().push((t.to_string(), line));
    }
    Ok((raw, replaced))
}

impl Lexicons {
    /// The bundled defaults.
    pub fn bundled() -> &'static Lexicons {
        &DEFAULT
    }

    pub fn bundled_source() -> &'static str {
        BUNDLED
    }

    /// Parse a complete lexicon file without merging.
    pub fn parse(text: &str) -> Result<Lexicons, LexiconError> {
        Self::build(text, None)
    }

    /// Extend the bundled defaults with a user file.
    pub fn with_overrides(text: &str) -> Result<Lexicons, LexiconError> {
        Self::build(text, Some(BUNDLED))
    }

    fn build(text: &str, base: Option<&str>) -> Result<Lexicons, LexiconError> {
        let (user, replaced) = read_sections(text)?;
        let mut merged: Raw = match base {
            Some(b) => read_sections(b)?.0,
            None => BTreeMap::new(),
        };
        for sec in replaced {
            merged.insert(sec, Vec::new());
        }
        for (sec, entries) in user {
            merged.entry(sec).or_default().extend(entries);
        }

        let mut patterns: BTreeMap<&str, PatternSet> = BTreeMap::new();
        let mut words: BTreeMap<&str, WordSet> = BTreeMap::new();
        for &(sec, kind) in SECTIONS {
            let entries = merged.remove(sec).unwrap_or_default();
            if entries.is_empty() {
                return Err(LexiconError {
                    line: 0,
                    message: format!("section [{sec}] is empty"),
                });
            }
            match kind {
                Kind::Patterns => {
                    let mut set = PatternSet::default();
                    for (p, line) in entries {
                        set.push(&p).map_err(|e| LexiconError {
                            line,
                            message: format!("bad pattern `{p}`: {e}"),
                        })?;
                    }
                    patterns.insert(sec, set);
                }
                Kind::Words => {
                    let mut set = WordSet::default();
                    for (w, _) in entries {
                        set.push(&w);
                    }
                    words.insert(sec, set);
                }
            }
        }
        let mut p = |k: &str| patterns.remove(k).unwrap();
        let mut w = |k: &str| words.remove(k).unwrap();
        Ok(Lexicons {
            sensitive_keys: p("sensitive_keys"),
            dangerous_settings: p("dangerous_settings"),
            command_sinks: w("command_sinks"),
            command_arg_keys: w("command_arg_keys"),
            code_sinks: p("code_sinks"),
            sanitizers: p("sanitizers"),
            path_keys: w("path_keys"),
            vague_names: w("vague_names"),
            placeholders: p("placeholders"),
            secret_refs: p("secret_refs"),
            trusted_registries: w("trusted_registries"),
            trusted_refs: w("trusted_refs"),
            config_constructs: w("config_constructs"),
            config_paths: p("config_paths"),
            security_keywords: p("security_keywords"),
            scope_terms: w("scope_terms"),
        })
    }
}

impl Default for Lexicons {
    fn default() -> Self {
        DEFAULT.clone()
    }
}

static DEFAULT: LazyLock<Lexicons> =
    LazyLock::new(|| Lexicons::parse(BUNDLED).expect("bundled lexicons are valid"));

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_sets_are_populated() {
        let l = Lexicons::bundled();
        assert!(l.sensitive_keys.is_match("AWS_SECRET_ACCESS_KEY"));
        assert!(l.command_sinks.contains("Shell"));
        assert!(l.vague_names.contains("doitnow"));
        assert!(l.dangerous_settings.is_match("guest ALL=(ALL) NOPASSWD:ALL"));
        assert!(!l.dangerous_settings.is_match("PermitRootLogin no"));
    }

    #[test]
    fn user_file_extends_and_replaces() {
        let l = Lexicons::with_overrides("[vague_names]\nwidget\n").unwrap();
        assert!(l.vague_names.contains("widget"));
        assert!(l.vague_names.contains("doitnow"));
        let l = Lexicons::with_overrides("[vague_names]\n@replace\nwidget\n").unwrap();
        assert!(l.vague_names.contains("widget"));
        assert!(!l.vague_names.contains("doitnow"));
    }

    #[test]
    fn errors_carry_lines() {
        let e = Lexicons::with_overrides("# x\n[code_sinks]\n(unclosed\n").unwrap_err();
        assert_eq!(e.line, 3);
        let e = Lexicons::with_overrides("[nope]\n").unwrap_err();
        assert_eq!(e.line, 1);
        let e = Lexicons::with_overrides("stray\n").unwrap_err();
        assert_eq!(e.line, 1);
        assert!(Lexicons::with_overrides("[path_keys]\n@replace\n").is_err());
    }

    #[test]
    fn case_sensitivity_can_be_opted_out() {
        let s = PatternSet::new(&["(?-i)TOKEN"]).unwrap();
        assert!(s.is_match("MY_TOKEN"));
        assert!(!s.is_match("my_token"));
    }
}
