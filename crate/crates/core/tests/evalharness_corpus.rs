use std::path::{Path, PathBuf};

use iacsmell_core::advisory;
use iacsmell_core::evalharness::{emit_report, evaluate_corpus, load_manifest, match_counts, EvalError, ReportFormat};
use iacsmell_core::frontends::ToolKind;
use iacsmell_core::predicates::Lexicons;
use iacsmell_core::rules::{RuleId, RuleSet};
use proptest::prelude::*;

fn bundled_manifest() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("corpus/manifest.jsonl")
}

fn run(manifest: &Path) -> Result<iacsmell_core::evalharness::EvalReport, EvalError> {
    let corpus = load_manifest(manifest)?;
    evaluate_corpus(&corpus, advisory::bundled(), Lexicons::bundled(), &RuleSet::all())
}

#[test]
fn bundled_corpus_scores() {
    let corpus = load_manifest(&bundled_manifest()).unwrap();
    assert!(corpus.entries.len() >= 40);
    let report = run(&bundled_manifest()).unwrap();
    for tool in ["ansible", "puppet", "saltstack"] {
        let p = report.pack(tool).unwrap();
        assert_eq!(p.precision, Some(1.0), "{tool}");
        assert!(p.recall.unwrap() >= 0.9, "{tool}");
    }
    // Every Top-10 rule is exercised by at least one ansible entry.
    for r in RuleId::ALL {
        assert!(report.cell(ToolKind::Ansible, r).is_some_and(|c| c.counts.tp > 0), "{r}");
    }
}

fn write_manifest(dir: &Path, lines: &[&str]) -> PathBuf {
    let m = dir.join("manifest.jsonl");
    std::fs::write(&m, lines.join("\n")).unwrap();
    m
}

#[test]
fn top10_playbook_as_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let src = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/top10_playbook.yml");
    std::fs::copy(src, dir.path().join("top10.yml")).unwrap();
    let lines = [
        ("insecure-configuration-management", 8),
        ("insecure-dependency-management", 12),
        ("insecure-input-handling", 16),
        ("outdated-dependencies", 21),
        ("path-traversal", 26),
        ("command-injection", 30),
        ("code-injection", 36),
        ("outdated-software-version", 40),
        ("inadequate-naming-convention", 45),
        ("sensitive-information-exposure", 52),
    ];
    let expected: Vec<String> = lines
        .iter()
        .map(|(r, l)| format!(r#"{{"rule_id":"{r}","line":{l}}}"#))
        .collect();
    let entry = format!(
        r#"{{"id":"top10","tool":"ansible","snippet":"top10.yml","expected":[{}]}}"#,
        expected.join(",")
    );
    let report = run(&write_manifest(dir.path(), &[&entry])).unwrap();
    let p = report.pack("ansible").unwrap();
    assert_eq!((p.precision, p.recall), (Some(1.0), Some(1.0)));
    assert_eq!(p.counts.tp, 10);
}

#[test]
fn clean_snippet_expected_smelly_is_a_false_negative() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("ok.yml"), "- hosts: all\n  tasks:\n    - name: ping hosts\n      ping:\n").unwrap();
    let m = write_manifest(
        dir.path(),
        &[r#"{"id":"ok","tool":"ansible","snippet":"ok.yml","expected":[{"rule_id":"command-injection"}]}"#],
    );
    let report = run(&m).unwrap();
    let c = report.cell(ToolKind::Ansible, RuleId::CommandInjection).unwrap();
    assert_eq!((c.counts.tp, c.counts.fp, c.counts.fn_), (0, 0, 1));
    assert_eq!(c.recall, Some(0.0));
    assert_eq!(c.precision, None);
    assert!(emit_report(&report, ReportFormat::Text).contains("--"));
}

#[test]
fn missing_snippet_names_entry() {
    let dir = tempfile::tempdir().unwrap();
    let m = write_manifest(dir.path(), &[r#"{"id":"ghost-entry","tool":"ansible","snippet":"nope.yml"}"#]);
    let e = run(&m).unwrap_err();
    assert!(e.to_string().contains("ghost-entry"), "{e}");
}

#[test]
fn bad_manifest_line_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let m = write_manifest(dir.path(), &["# comment", r#"{"id":"x","tool":"nosuchtool","snippet":"a"}"#]);
    match run(&m).unwrap_err() {
        EvalError::Manifest { line, .. } => assert_eq!(line, 2),
        e => panic!("{e}"),
    }
}

#[test]
fn report_json_round_trips() {
    let report = run(&bundled_manifest()).unwrap();
    let json = emit_report(&report, ReportFormat::Json);
    let back: iacsmell_core::evalharness::EvalReport = serde_json::from_str(&json).unwrap();
    assert_eq!(back, report);
}

/// Largest injective assignment, by trying every option.
fn brute_tp(det: &[usize], exp: &[Option<usize>]) -> usize {
    fn go(i: usize, det: &[usize], exp: &[Option<usize>], used: &mut Vec<bool>) -> usize {
        if i == det.len() {
            return 0;
        }
        let mut best = go(i + 1, det, exp, used);
        for j in 0..exp.len() {
            let ok = exp[j].map_or(true, |l| (l as i64 - det[i] as i64).abs() <= 2);
            if !used[j] && ok {
                used[j] = true;
                best = best.max(1 + go(i + 1, det, exp, used));
                used[j] = false;
            }
        }
        best
    }
    let mut d: Vec<usize> = det.to_vec();
    d.sort();
    d.dedup();
    go(0, &d, exp, &mut vec![false; exp.len()])
}

proptest! {
    #[test]
    fn matching_is_maximum(
        det in prop::collection::vec(1usize..30, 0..6),
        exp in prop::collection::vec(prop::option::of(1usize..30), 0..6),
    ) {
        let c = match_counts(&det, &exp);
        let mut uniq = det.clone();
        uniq.sort();
        uniq.dedup();
        prop_assert_eq!(c.tp, brute_tp(&det, &exp));
        prop_assert_eq!(c.tp + c.fp, uniq.len());
        prop_assert_eq!(c.tp + c.fn_, exp.len());
        if let Some(p) = c.precision() { prop_assert!((0.0..=1.0).contains(&p)); }
        if let Some(r) = c.recall() { prop_assert!((0.0..=1.0).contains(&r)); }
    }

    #[test]
    fn duplicate_detections_do_not_change_tp(
        det in prop::collection::vec(1usize..30, 1..5),
        exp in prop::collection::vec(prop::option::of(1usize..30), 0..5),
    ) {
        let mut doubled = det.clone();
        doubled.extend(det.iter().copied());
        prop_assert_eq!(match_counts(&det, &exp), match_counts(&doubled, &exp));
    }
}
