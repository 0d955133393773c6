//! One PASS/FAIL line per acceptance criterion. Exits nonzero if any fail.

#[path = "../../core/tests/common/oracle.rs"]
mod oracle;

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::time::{Duration, Instant};

use iacsmell_core::advisory;
use iacsmell_core::evalharness::{evaluate_corpus, load_manifest};
use iacsmell_core::frontends::{parse, ToolKind};
use iacsmell_core::predicates::{Lexicons, PredicateContext};
use iacsmell_core::rules::{evaluate, RuleId, RuleSet};
use iacsmell_core::taxonomy;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

type Outcome = Result<String, String>;

fn core(rel: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core").join(rel).display().to_string()
}

fn cli(args: &[&str]) -> (i32, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = iacsmell::run(std::iter::once("iacsmell").chain(args.iter().copied()), &mut out, &mut err);
    (code, String::from_utf8(out).unwrap())
}

fn lint_json(args: &[&str]) -> Value {
    let mut a = vec!["lint", "--format", "json"];
    a.extend_from_slice(args);
    serde_json::from_str(&cli(&a).1).unwrap()
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn golden_top10() -> Outcome {
    let path = core("tests/fixtures/top10_playbook.yml");
    let src = std::fs::read_to_string(&path).unwrap();
    let lines: Vec<&str> = src.lines().collect();
    // Task bounds for each "#N - Name" marker.
    let mut want = Vec::new();
    for (i, l) in lines.iter().enumerate() {
        let Some((_, tail)) = l.split_once(" #") else { continue };
        let Some((_, label)) = tail.split_once(" - ") else { continue };
        let rule = RuleId::ALL.into_iter().find(|r| r.name() == label.trim()).unwrap();
        let start = (0..=i).rev().find(|&j| lines[j].trim_start().starts_with("- name:")).unwrap();
        let end = (i + 1..lines.len()).find(|&j| lines[j].trim_start().starts_with("- name:")).unwrap_or(lines.len());
        want.push((rule, start + 1, end));
    }
    let t = Instant::now();
    let v = lint_json(&[&path]);
    let elapsed = t.elapsed();
    let got: Vec<(String, u64)> = v["findings"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| (f["rule_id"].as_str().unwrap().to_string(), f["span"]["start_line"].as_u64().unwrap()))
        .collect();
    let ids: BTreeSet<&str> = got.iter().map(|(r, _)| r.as_str()).collect();
    let placed = want.iter().all(|(rule, lo, hi)| {
        got.iter()
            .any(|(r, l)| r == rule.as_str() && (*l as usize) + 2 >= *lo && (*l as usize) <= hi + 2)
    });
    check(
        got.len() == 10 && ids.len() == 10 && want.len() == 10 && placed && elapsed < Duration::from_secs(1),
        format!("{} findings, {} distinct ids, located={placed}, {elapsed:.2?}", got.len(), ids.len()),
    )
}

fn passwordless_sudo() -> Outcome {
    let path = core("tests/fixtures/sudo_playbook.yml");
    let src = std::fs::read_to_string(&path).unwrap();
    let line = src.lines().position(|l| l.contains("NOPASSWD:ALL")).unwrap() + 1;
    let v = lint_json(&[&path]);
    let hit = v["findings"].as_array().unwrap().iter().any(|f| {
        f["rule_id"] == "insecure-configuration-management" && f["span"]["start_line"].as_u64() == Some(line as u64)
    });
    check(hit, format!("insecure-configuration-management on line {line}: {hit}"))
}

fn out_of_scope() -> Outcome {
    let (code, out) = cli(&["lint", &core("tests/fixtures/no_log_only.yml")]);
    check(code == 0 && out.is_empty(), format!("exit {code}, {} findings", out.lines().count()))
}

fn corpus_precision() -> Outcome {
    let t = Instant::now();
    let corpus = load_manifest(core("corpus/manifest.jsonl").as_ref()).unwrap();
    let report = evaluate_corpus(&corpus, advisory::bundled(), Lexicons::bundled(), &RuleSet::all()).unwrap();
    let elapsed = t.elapsed();
    let mut ok = elapsed < Duration::from_secs(5);
    let mut parts = Vec::new();
    for pack in ["ansible", "puppet", "saltstack"] {
        let s = report.pack(pack).unwrap();
        let (p, r) = (s.precision.unwrap_or(0.0), s.recall.unwrap_or(0.0));
        ok &= p == 1.0 && r >= 0.9;
        parts.push(format!("{pack} P={p:.2} R={r:.2}"));
    }
    check(ok, format!("{} entries; {}; {elapsed:.2?}", corpus.entries.len(), parts.join(", ")))
}

fn oracle_equivalence() -> Outcome {
    let mut mismatches = 0;
    for seed in 0..200u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (tool, src) = oracle::snippet(&mut rng);
        let f = parse("gen", &src, tool);
        let ctx = PredicateContext::new(&f, advisory::bundled(), Lexicons::bundled());
        let got: BTreeSet<(RuleId, usize)> = evaluate(&f, &ctx).iter().map(|x| (x.rule_id, x.line())).collect();
        if got != oracle::oracle(&f, &ctx) {
            mismatches += 1;
        }
    }
    check(mismatches == 0, format!("200 snippets, {mismatches} mismatches"))
}

fn taxonomy_integrity() -> Outcome {
    const EXPECTED: [(RuleId, &str); 10] = [
        (RuleId::InsecureConfigurationManagement, "CWE-306"),
        (RuleId::InsecureDependencyManagement, "CWE-1104"),
        (RuleId::InsecureInputHandling, "CWE-20"),
        (RuleId::OutdatedDependencies, "CWE-1104"),
        (RuleId::PathTraversal, "CWE-22"),
        (RuleId::CommandInjection, "CWE-77"),
        (RuleId::CodeInjection, "CWE-94"),
        (RuleId::OutdatedSoftwareVersion, "CWE-1104"),
        (RuleId::InadequateNamingConvention, "CWE-710"),
        (RuleId::SensitiveInformationExposure, "CWE-256"),
    ];
    let (_, out) = cli(&["taxonomy"]);
    let rows = out.lines().count();
    let bound = out.lines().filter(|l| l.starts_with("rule")).count();
    let tax = taxonomy::bundled();
    let bad: Vec<&str> = EXPECTED
        .iter()
        .filter(|(r, cwe)| {
            r.cwe() != *cwe || !tax.get(r.as_str()).is_some_and(|c| c.rule_bound && c.cwes.iter().any(|x| x == cwe))
        })
        .map(|(r, _)| r.as_str())
        .collect();
    check(rows == 62 && bound == 10 && bad.is_empty(), format!("{rows} categories, {bound} rule-bound, CWE mismatches {bad:?}"))
}

fn history_records(dir: &str, name: &str) -> Vec<Value> {
    let (code, out) = cli(&["history", &core(dir), name, "--format", "json"]);
    assert_eq!(code, 0);
    out.lines()
        .filter_map(|l| serde_json::from_str::<Value>(l).ok()?.get("record").cloned())
        .collect()
}

fn persistence() -> Outcome {
    let life = history_records("tests/fixtures/history/lifespan", "site.yml");
    let r = &life[0];
    let life_ok = life.len() == 1
        && r["first_index"] == 3
        && r["fixed_index"] == 7
        && r["lifespan_commits"] == 4
        && r["status"] == "fixed";
    let ren = history_records("tests/fixtures/history/rename", "site.yml");
    let ren_ok = ren.len() == 2 && ren[0]["fingerprint"] != ren[1]["fingerprint"];
    check(
        life_ok && ren_ok,
        format!(
            "lifespan: first #{} fixed #{} span {} {}; rename: {} records",
            r["first_index"], r["fixed_index"], r["lifespan_commits"], r["status"], ren.len()
        ),
    )
}

fn determinism() -> Outcome {
    let (corpus, fixtures) = (core("corpus"), core("tests/fixtures"));
    let one = cli(&["lint", "--format", "json", "--jobs", "1", &corpus, &fixtures]).1;
    let eight = cli(&["lint", "--format", "json", "--jobs", "8", &corpus, &fixtures]).1;
    check(one == eight && !one.is_empty(), format!("{} bytes, identical={}", one.len(), one == eight))
}

fn throughput() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut written = 0;
    while written < 1000 {
        let (tool, src) = oracle::snippet(&mut rng);
        let ext = match tool {
            ToolKind::Terraform => "tf",
            ToolKind::Puppet => "pp",
            _ => "yml",
        };
        if src.len() > 2048 {
            continue;
        }
        std::fs::write(tmp.path().join(format!("f{written:04}.{ext}")), src).unwrap();
        written += 1;
    }
    let t = Instant::now();
    let (code, _) = cli(&["lint", "--format", "json", tmp.path().to_str().unwrap()]);
    let elapsed = t.elapsed();
    check(code != 2 && elapsed < Duration::from_secs(5), format!("1000 files in {elapsed:.2?}"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("golden top-10 detection", golden_top10),
        ("passwordless sudo detection", passwordless_sudo),
        ("out-of-scope negative", out_of_scope),
        ("corpus precision", corpus_precision),
        ("oracle equivalence", oracle_equivalence),
        ("taxonomy integrity", taxonomy_integrity),
        ("persistence lifespan", persistence),
        ("determinism across --jobs", determinism),
        ("throughput", throughput),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let res = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
        match res {
            Ok(d) => println!("PASS {} {name}: {d}", i + 1),
            Err(d) => {
                failed += 1;
                println!("FAIL {} {name}: {d}", i + 1)
            }
        }
    }
    println!("{} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
