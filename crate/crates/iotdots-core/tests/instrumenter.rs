//! Instrumenter integration tests: the golden modified listing, point
//! detection against the hand-built manifest, graph structure checks, and
//! the idempotence guard.

mod common;

use common::{fixture_dir, load_app, load_manifest};
use iotdots_core::ast::{SectionItem, StmtKind};
use iotdots_core::emit::emit_text;
use iotdots_core::icfg::build_icfg;
use iotdots_core::instrument::{
    detect_points, insert_logs, instrument, Category, InstrumentError,
};
use iotdots_core::parser::parse_source;
use iotdots_core::source::SourceUnit;
use std::collections::BTreeMap;

#[test]
fn golden_listing_instrumentation() {
    let src = load_app("listing1.groovy");
    let (out, report) = instrument(&src).expect("instruments");
    let golden_path = fixture_dir().join("golden").join("listing1.instrumented.groovy");
    let golden = std::fs::read_to_string(&golden_path).expect("golden readable");
    assert_eq!(out.text, golden, "instrumented listing differs from golden");
    assert_eq!(report.lines_added, 3);
    assert_eq!(report.points.len(), 2);

    // Exactly one inserted log mentions the phone input, inside the section.
    let phone_lines: Vec<&str> =
        out.text.lines().filter(|l| l.contains("log.iotdots") && l.contains("${phone}")).collect();
    assert_eq!(phone_lines.len(), 1);
}

#[test]
fn point_counts_match_manifest() {
    let manifest = load_manifest();
    for (name, expected) in &manifest.apps {
        let src = load_app(name);
        let app = parse_source(&src).expect("parses");
        let graph = build_icfg(&app).expect("graph builds");
        let points = detect_points(&graph, &app);
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for point in &points {
            *counts.entry(point.category.name().to_string()).or_default() += 1;
        }
        for cat in Category::ALL {
            let got = counts.get(cat.name()).copied().unwrap_or(0);
            let want = expected.points.get(cat.name()).copied().unwrap_or(0);
            assert_eq!(got, want, "{name}: {} points", cat.name());
        }
        if !expected.point_names.is_empty() {
            let got: Vec<(String, String)> = points
                .iter()
                .map(|p| (p.category.name().to_string(), p.label.clone()))
                .collect();
            assert_eq!(got, expected.point_names, "{name}: ordered point names");
        }
    }
}

#[test]
fn graph_structure_matches_manifest() {
    let manifest = load_manifest();
    for (name, expected) in &manifest.apps {
        let src = load_app(name);
        let app = parse_source(&src).expect("parses");
        let graph = build_icfg(&app).expect("graph builds");
        assert_eq!(graph.call_edges.len(), expected.call_edges, "{name}: call edges");
        for (helper, count) in &expected.call_edges_into_helper {
            assert_eq!(graph.call_edges_into(helper), *count, "{name}: edges into {helper}");
        }
        if !expected.entries.is_empty() {
            let got: Vec<&String> = graph.entries.keys().collect();
            let mut want: Vec<&String> = expected.entries.iter().collect();
            want.sort();
            assert_eq!(got, want, "{name}: entries");
        }
    }
}

#[test]
fn empty_app_graph_has_three_lifecycle_entries() {
    let app = parse_source(&SourceUnit::inline("")).expect("parses");
    let graph = build_icfg(&app).expect("graph builds");
    assert_eq!(graph.entries.len(), 3);
    for name in ["installed", "updated", "initialize"] {
        assert!(graph.entries.contains_key(name), "missing {name}");
    }
    assert!(graph.call_edges.is_empty());
    let points = detect_points(&graph, &app);
    assert!(points.is_empty());
}

#[test]
fn branch_rejoins_at_following_statement() {
    let src = SourceUnit::inline(
        "preferences {\n    section(\"d\") {\n        input \"light\", \"capability.switch\"\n    }\n}\n\
         def installed() {\n    initialize()\n}\n\
         def updated() {\n    initialize()\n}\n\
         def initialize() {\n    subscribe(light, \"switch\", handler)\n}\n\
         def handler(evt) {\n    if (evt.value == \"on\") {\n        light.off()\n    } else {\n        light.on()\n    }\n    log.debug(\"done\")\n}\n",
    );
    let app = parse_source(&src).expect("parses");
    let graph = build_icfg(&app).expect("graph builds");
    // Both branch statements flow into the statement after the if.
    let log_node = graph
        .nodes
        .iter()
        .find(|n| {
            matches!(&n.kind, iotdots_core::icfg::NodeKind::Stmt { addr }
                if addr.method == "handler" && addr.path.is_empty() && addr.index == 1)
        })
        .expect("log node");
    let preds: Vec<_> =
        graph.edges.iter().filter(|(_, to)| *to == log_node.id).map(|(from, _)| *from).collect();
    assert_eq!(preds.len(), 2, "two branch tails rejoin");
    assert!(graph.dead.is_empty());
}

#[test]
fn undeclared_handler_is_a_graph_error() {
    let src = SourceUnit::inline(
        "preferences {\n    section(\"d\") {\n        input \"light\", \"capability.switch\"\n    }\n}\n\
         def initialize() {\n    subscribe(light, \"switch\", nowhere)\n}\n",
    );
    let app = parse_source(&src).expect("parses");
    assert!(build_icfg(&app).is_err());
}

#[test]
fn dead_method_is_flagged() {
    let src = SourceUnit::inline("def initialize() {\n}\ndef orphan() {\n    sendPush(\"hi\")\n}\n");
    let app = parse_source(&src).expect("parses");
    let graph = build_icfg(&app).expect("graph builds");
    let orphan_entry = graph.entry_of("orphan").expect("entry exists");
    assert!(graph.dead.contains(&orphan_entry));
}

#[test]
fn empty_point_list_changes_nothing_but_prologue() {
    let src = load_app("listing1.groovy");
    let app = parse_source(&src).expect("parses");
    let out = insert_logs(&app, &[]).expect("inserts");
    let mut expected = emit_text(&app);
    expected.insert_str(0, "// instrumented-by: iotdots\n");
    assert_eq!(emit_text(&out), expected);
}

#[test]
fn instrumenting_twice_errors() {
    let src = load_app("lobby-light.groovy");
    let (once, _) = instrument(&src).expect("first pass");
    match instrument(&once) {
        Err(InstrumentError::AlreadyInstrumented) => {}
        other => panic!("expected AlreadyInstrumented, got {:?}", other.map(|_| ())),
    }
}

#[test]
fn redetection_after_insertion_preserves_point_multiset() {
    let manifest = load_manifest();
    for name in manifest.apps.keys() {
        let src = load_app(name);
        let app = parse_source(&src).expect("parses");
        let graph = build_icfg(&app).expect("graph builds");
        let points = detect_points(&graph, &app);
        let modified = insert_logs(&app, &points).expect("inserts");
        let regraph = build_icfg(&modified).expect("regraph");
        let repoints = detect_points(&regraph, &modified);
        let mut before: Vec<(Category, String)> =
            points.iter().map(|p| (p.category, p.label.clone())).collect();
        let mut after: Vec<(Category, String)> =
            repoints.iter().map(|p| (p.category, p.label.clone())).collect();
        before.sort();
        after.sort();
        assert_eq!(before, after, "{name}: point multiset changed after instrumentation");
    }
}

#[test]
fn reports_count_lines_and_bytes() {
    let manifest = load_manifest();
    for (name, expected) in &manifest.apps {
        let src = load_app(name);
        let (out, report) = instrument(&src).expect("instruments");
        assert_eq!(report.lines_added, expected.lines_added, "{name}: lines added");
        assert_eq!(report.lines_added, report.points.len() + 1, "{name}: points + prologue");
        assert!(report.bytes_added > 0, "{name}: bytes added");
        assert!(report.original_lines > 0);
        // The modified app still parses and the log calls survive reparsing.
        let reparsed = parse_source(&out).expect("modified app parses");
        let mut log_calls = 0usize;
        reparsed.visit_stmts(&mut |_, s| {
            if matches!(&s.kind, StmtKind::LogCall { level, .. } if level == "iotdots") {
                log_calls += 1;
            }
        });
        fn count_section_logs(items: &[SectionItem]) -> usize {
            items
                .iter()
                .map(|i| match i {
                    SectionItem::Log { level, .. } if level == "iotdots" => 1,
                    SectionItem::Input(input) => count_section_logs(&input.children),
                    _ => 0,
                })
                .sum()
        }
        log_calls += reparsed.preferences.iter().map(|s| count_section_logs(&s.items)).sum::<usize>();
        assert_eq!(log_calls, report.points.len(), "{name}: one log per point");
    }
}

#[test]
fn action_log_lands_after_the_command() {
    let src = load_app("lobby-light.groovy");
    let (out, _) = instrument(&src).expect("instruments");
    let lines: Vec<&str> = out.text.lines().map(str::trim).collect();
    let cmd = lines.iter().position(|l| *l == "light.on()").expect("command present");
    assert_eq!(lines[cmd + 1], "log.iotdots(\"Action: light.on=on\")");
}
