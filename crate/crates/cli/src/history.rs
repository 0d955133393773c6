use std::io::Write;
use std::path::Path;
use std::process::Command;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde_json::json;

use iacsmell_core::evolution::{commits_to_fix, track, PersistenceRecord, Snapshot, SnapshotSeries};

use crate::{Config, Format, EXIT_ERROR, EXIT_OK};

fn git(repo: &Path, args: &[&str]) -> Result<Vec<u8>> {
    let out = Command::new("git")
        .arg("-C")
        .arg(repo)
        .args(args)
        .output()
        .context("cannot run git")?;
    if !out.status.success() {
        bail!("git {}: {}", args.join(" "), String::from_utf8_lossy(&out.stderr).trim());
    }
    Ok(out.stdout)
}

/// Adapter: commits touching `path` oldest first, with the file content at each.
pub fn git_series(repo: &Path, path: &str) -> Result<SnapshotSeries> {
    let log = git(repo, &["log", "--reverse", "--format=%H%x09%ct%x09%cI", "--", path])?;
    let mut snaps = Vec::new();
    for line in String::from_utf8_lossy(&log).lines() {
        let mut f = line.split('\t');
        let (Some(hash), Some(ct)) = (f.next(), f.next()) else {
            continue;
        };
        let timestamp: i64 = ct.parse().with_context(|| format!("bad commit time `{ct}`"))?;
        // A commit that deletes the file has no content.
        let content = git(repo, &["show", &format!("{hash}:{path}")])
            .map(|b| iacsmell_core::frontends::decode_source(&b).0)
            .unwrap_or_default();
        snaps.push(Snapshot {
            commit: hash.to_string(),
            timestamp,
            content,
        });
    }
    Ok(SnapshotSeries::new(repo.display().to_string(), path, snaps)?)
}

fn git_files(repo: &Path, globs: &[String], cfg: &Config) -> Result<Vec<String>> {
    let listing = git(repo, &["ls-files"])?;
    let patterns = globs.iter().map(|g| glob::Pattern::new(g)).collect::<Result<Vec<_>, _>>()?;
    Ok(String::from_utf8_lossy(&listing)
        .lines()
        .filter(|f| {
            if patterns.is_empty() {
                crate::lint::candidate(f, cfg.tool)
            } else {
                patterns.iter().any(|p| p.matches(f))
            }
        })
        .map(str::to_string)
        .collect())
}

fn is_fixture_dir(dir: &Path) -> bool {
    std::fs::read_dir(dir)
        .map(|rd| rd.filter_map(|e| e.ok()).any(|e| e.file_name().to_string_lossy().ends_with(".snap")))
        .unwrap_or(false)
}

fn load_series(cfg: &Config, repo: &Path, globs: &[String]) -> Result<Vec<SnapshotSeries>> {
    if is_fixture_dir(repo) {
        let name = globs.first().cloned().unwrap_or_else(|| {
            repo.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
        });
        return Ok(vec![SnapshotSeries::from_fixture_dir(repo, &name)?]);
    }
    if repo.join(".git").exists() {
        let files = git_files(repo, globs, cfg)?;
        return files.iter().map(|f| git_series(repo, f)).collect();
    }
    Ok(Vec::new())
}

pub fn cmd_history(cfg: &Config, repo: &Path, globs: &[String], out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let series = match load_series(cfg, repo, globs) {
        Ok(s) if !s.is_empty() => s,
        Ok(_) => {
            writeln!(err, "error: no history found under {}", repo.display())?;
            return Ok(EXIT_ERROR);
        }
        Err(e) => {
            writeln!(err, "error: {e:#}")?;
            return Ok(EXIT_ERROR);
        }
    };
    let results = cfg.pool()?.install(|| {
        series
            .par_iter()
            .map(|s| track(s, cfg.tool, &cfg.advisories, &cfg.lexicons, &cfg.rules))
            .collect::<Vec<_>>()
    });
    let mut records: Vec<PersistenceRecord> = Vec::new();
    for (s, r) in series.iter().zip(results) {
        for (commit, d) in r.diagnostics {
            writeln!(err, "{}@{}: warning: {}", s.path, commit, d.message)?;
        }
        records.extend(r.records);
    }
    records.sort_by(|a, b| (&a.path, a.first_index, a.rule_id, &a.fingerprint).cmp(&(&b.path, b.first_index, b.rule_id, &b.fingerprint)));
    let hist = commits_to_fix(&records);
    match cfg.format {
        Format::Json => {
            for r in &records {
                writeln!(out, "{}", json!({ "record": r }))?;
            }
            writeln!(out, "{}", json!({ "commits_to_fix": hist }))?;
        }
        Format::Text => {
            for r in &records {
                let end = match (&r.fixed_at, r.fixed_index) {
                    (Some(c), Some(i)) => format!("fixed at #{i} ({c})"),
                    _ => "still present".to_string(),
                };
                writeln!(
                    out,
                    "{} {} {} first #{} ({}) {} lifespan {} commits",
                    r.path, r.rule_id, r.status.as_str(), r.first_index, r.first_seen, end, r.lifespan_commits
                )?;
            }
            for (label, bucket) in [("fixed", &hist.fixed), ("persistent", &hist.persistent)] {
                for (rule, v) in bucket {
                    let list: Vec<String> = v.iter().map(usize::to_string).collect();
                    writeln!(out, "{label} {rule}: [{}]", list.join(", "))?;
                }
            }
        }
    }
    Ok(EXIT_OK)
}
