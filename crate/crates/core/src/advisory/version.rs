//! Dotted version comparison.
//!
//! A version is split on `.`; each segment is a numeric prefix plus an
//! optional suffix. Numbers compare numerically, missing segments count as
//! `0`, and a suffixed segment sorts below the bare number (`1.0.1f` <
//! `1.0.1` < `1.0.2`). A leading `v` and a Debian-style `epoch:` are dropped.

use std::cmp::Ordering;
use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unparseable version `{0}`")]
pub struct VersionError(pub String);

#[derive(Debug, Clone)]
struct Segment {
    /// Digits with leading zeros removed; `None` when the segment has no numeric prefix.
    number: Option<String>,
    suffix: String,
}

impl Segment {
    fn zero() -> Segment {
        Segment {
            number: Some(String::new()),
            suffix: String::new(),
        }
    }

    fn cmp(&self, other: &Segment) -> Ordering {
        let by_number = match (&self.number, &other.number) {
            (None, None) => Ordering::Equal,
            (None, Some(_)) => Ordering::Less,
            (Some(_), None) => Ordering::Greater,
            (Some(a), Some(b)) => a.len().cmp(&b.len()).then_with(|| a.cmp(b)),
        };
        by_number.then_with(|| match (self.suffix.is_empty(), other.suffix.is_empty()) {
            (true, true) => Ordering::Equal,
            (true, false) => Ordering::Greater,
            (false, true) => Ordering::Less,
            (false, false) => self.suffix.cmp(&other.suffix),
        })
    }
}

#[derive(Debug, Clone)]
pub struct Version {
    raw: String,
    segments: Vec<Segment>,
}

impl Version {
    pub fn parse(s: &str) -> Result<Version, VersionError> {
        let err = || VersionError(s.to_string());
        let mut t = s.trim();
        if let Some((epoch, rest)) = t.split_once(':') {
            if !epoch.is_empty() && epoch.bytes().all(|b| b.is_ascii_digit()) {
                t = rest;
            } else {
                return Err(err());
            }
        }
        if let Some(rest) = t.strip_prefix(['v', 'V']) {
            if rest.starts_with(|c: char| c.is_ascii_digit()) {
                t = rest;
            }
        }
        if t.is_empty()
            || !t
                .bytes()
                .all(|b| b.is_ascii_alphanumeric() || matches!(b, b'.' | b'+' | b'~' | b'_' | b'-'))
        {
            return Err(err());
        }
        let segments = t
            .split('.')
            .map(|part| {
                let digits = part.bytes().take_while(u8::is_ascii_digit).count();
                Segment {
                    number: (digits > 0)
                        .then(|| part[..digits].trim_start_matches('0').to_string()),
                    suffix: part[digits..].to_string(),
                }
            })
            .collect();
        Ok(Version {
            raw: s.trim().to_string(),
            segments,
        })
    }

    pub fn as_str(&self) -> &str {
        &self.raw
    }
}

impl fmt::Display for Version {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.raw)
    }
}

impl Ord for Version {
    fn cmp(&self, other: &Self) -> Ordering {
        let n = self.segments.len().max(other.segments.len());
        let zero = Segment::zero();
        for i in 0..n {
            let a = self.segments.get(i).unwrap_or(&zero);
            let b = other.segments.get(i).unwrap_or(&zero);
            match a.cmp(b) {
                Ordering::Equal => continue,
                o => return o,
            }
        }
        Ordering::Equal
    }
}

impl PartialOrd for Version {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Version {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Version {}

/// Convenience comparison of two version strings.
pub fn compare(a: &str, b: &str) -> Result<Ordering, VersionError> {
    Ok(Version::parse(a)?.cmp(&Version::parse(b)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lt(a: &str, b: &str) -> bool {
        compare(a, b).unwrap() == Ordering::Less
    }

    #[test]
    fn ordering_examples() {
        assert!(lt("1.0.1", "1.0.2"));
        assert!(lt("1.0.1f", "1.0.2"));
        assert!(lt("1.0.1f", "1.0.1"));
        assert!(lt("1.9", "1.10"));
        assert!(lt("2.7", "3"));
        assert_eq!(compare("1.0", "1.0.0").unwrap(), Ordering::Equal);
        assert_eq!(compare("v1.2", "1.2").unwrap(), Ordering::Equal);
        assert_eq!(compare("1:2.3", "2.3").unwrap(), Ordering::Equal);
        assert!(lt("1.0.007", "1.0.10"));
        assert!(lt("5.3.1", "5.4"));
    }

    #[test]
    fn rejects_garbage() {
        assert!(Version::parse("").is_err());
        assert!(Version::parse("1.0 beta").is_err());
        assert!(Version::parse("x:1").is_err());
        assert!(Version::parse("1.0/2").is_err());
    }
}
