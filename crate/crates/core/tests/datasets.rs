use std::collections::BTreeMap;
use std::path::PathBuf;

use cxnprobe::datasets::{
    load_cec, load_cogs, load_magpie, load_magpie_with, load_multithat, load_npn, load_reader,
    DatasetKind, Loaded, RejectReason,
};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn tally(pairs: &[(RejectReason, usize)]) -> BTreeMap<RejectReason, usize> {
    pairs.iter().copied().collect()
}

fn label_count(l: &Loaded, label: &str) -> usize {
    l.records.iter().filter(|r| r.label == label).count()
}

#[test]
fn cec_fixture_tallies() {
    let l = load_cec(&fixture("cec.jsonl")).unwrap();
    assert_eq!(l.report.lines, 20);
    assert_eq!(l.report.accepted_lines, 14);
    assert_eq!(l.records.len(), 14);
    assert_eq!(
        l.report.rejected_lines,
        tally(&[
            (RejectReason::MissingTarget, 1),
            (RejectReason::UnknownLabel, 1),
            (RejectReason::Schema, 1),
            (RejectReason::BadOffsets, 2),
            (RejectReason::WrongDataset, 1),
        ]),
        "{:#?}",
        l.report.errors
    );
    assert_eq!(
        (
            label_count(&l, "CEC"),
            label_count(&l, "EAP"),
            label_count(&l, "AAP")
        ),
        (8, 3, 3)
    );
}

#[test]
fn multithat_fixture_tallies() {
    let l = load_multithat(&fixture("multithat.jsonl")).unwrap();
    assert_eq!(l.report.lines, 20);
    assert_eq!(l.records.len(), 16);
    assert_eq!(
        l.report.rejected_lines,
        tally(&[
            (RejectReason::TooFewCandidates, 2),
            (RejectReason::MissingCausalIndex, 1),
            (RejectReason::Schema, 1),
        ]),
        "{:#?}",
        l.report.errors
    );
}

#[test]
fn magpie_filters_drop_exactly_the_planted_violations() {
    let l = load_magpie(&fixture("magpie.jsonl")).unwrap();
    assert_eq!(l.report.lines, 20);
    assert_eq!(l.report.accepted_lines, 16);
    assert_eq!(
        l.report.rejected_lines,
        tally(&[(RejectReason::LowConfidence, 3), (RejectReason::Schema, 1)]),
        "{:#?}",
        l.report.errors
    );
    assert_eq!(
        l.report.rejected_items,
        tally(&[(RejectReason::BadOffsets, 4)])
    );
    assert_eq!(l.records.len(), 28);
    let mut dropped: Vec<String> = ["mg03#1", "mg06#0", "mg10#1", "mg13#0"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    dropped.retain(|id| l.records.iter().any(|r| &r.id == id));
    assert!(
        dropped.is_empty(),
        "planted violations survived: {dropped:?}"
    );
    // The 0.99 line is kept; 0.989 is not.
    assert!(l.records.iter().any(|r| r.id.starts_with("mg04#")));
    assert!(!l.records.iter().any(|r| r.id.starts_with("mg19#")));
    assert!(l
        .records
        .iter()
        .all(|r| r.meta_f64("confidence").unwrap() >= 0.99));
}

#[test]
fn magpie_threshold_is_configurable() {
    let l = load_magpie_with(&fixture("magpie.jsonl"), 0.5).unwrap();
    assert_eq!(l.report.rejected_for(RejectReason::LowConfidence), 0);
    assert_eq!(l.records.len(), 28 + 6);
}

#[test]
fn cogs_fixture_tallies() {
    let l = load_cogs(&fixture("cogs.jsonl")).unwrap();
    assert_eq!(l.report.lines, 20);
    assert_eq!(l.records.len(), 17);
    assert_eq!(
        l.report.rejected_lines,
        tally(&[
            (RejectReason::UnknownConstruction, 1),
            (RejectReason::MissingTarget, 1),
            (RejectReason::BadOffsets, 1),
        ]),
        "{:#?}",
        l.report.errors
    );
    assert_eq!(label_count(&l, "comparative-correlative"), 3);
    assert_eq!(label_count(&l, "way-manner"), 2);
}

#[test]
fn npn_fixture_tallies() {
    let l = load_npn(&fixture("npn.jsonl")).unwrap();
    assert_eq!(l.report.lines, 20);
    assert_eq!(l.records.len(), 16);
    assert_eq!(
        l.report.rejected_lines,
        tally(&[
            (RejectReason::FormViolation, 1),
            (RejectReason::UnknownLabel, 1),
            (RejectReason::BadAcceptability, 1),
            (RejectReason::Schema, 1),
        ]),
        "{:#?}",
        l.report.errors
    );
    for prep in ["after", "upon", "by", "to"] {
        assert_eq!(label_count(&l, prep), 4, "{prep}");
    }
    for r in &l.records {
        let n1 = r.target("noun1").unwrap();
        let n2 = r.target("noun2").unwrap();
        assert_eq!(
            r.target_text(n1).to_lowercase(),
            r.target_text(n2).to_lowercase()
        );
    }
}

#[test]
fn reader_and_path_loaders_agree() {
    for kind in DatasetKind::ALL {
        let path = fixture(&format!("{}.jsonl", kind.name()));
        let text = std::fs::read_to_string(&path).unwrap();
        let a = load_reader(kind, text.as_bytes()).unwrap();
        let b = cxnprobe::datasets::load_path(kind, &path).unwrap();
        assert_eq!(a.records, b.records, "{kind:?}");
        assert_eq!(a.report, b.report, "{kind:?}");
    }
}

#[test]
fn rejected_lines_report_their_line_numbers() {
    let l = load_cec(&fixture("cec.jsonl")).unwrap();
    let lines: Vec<usize> = l.report.errors.iter().map(|e| e.line).collect();
    assert_eq!(lines, vec![15, 16, 17, 18, 19, 20]);
}
