//! Frontend integration tests: corpus counts against the hand-built
//! manifest, round-trip and idempotence of emission, span soundness, and
//! parser totality on arbitrary input.

mod common;

use common::{load_app, load_manifest};
use iotdots_core::ast::*;
use iotdots_core::emit::{emit, emit_text};
use iotdots_core::lexer::{tokenize, Token};
use iotdots_core::parser::{parse_source, FrontendError};
use iotdots_core::source::SourceUnit;
use proptest::prelude::*;

#[test]
fn corpus_counts_match_manifest() {
    let manifest = load_manifest();
    for (name, expected) in &manifest.apps {
        let src = load_app(name);
        let app = parse_source(&src).unwrap_or_else(|e| panic!("{}: {}", name, e.render(&src)));
        assert_eq!(app.inputs().len(), expected.inputs, "{name}: inputs");
        assert_eq!(app.device_inputs().len(), expected.device_inputs, "{name}: device inputs");
        assert_eq!(app.count_subscriptions(), expected.subscriptions, "{name}: subscriptions");
        assert_eq!(app.count_device_commands(), expected.device_commands, "{name}: commands");
    }
}

#[test]
fn listing_fixture_structure() {
    let src = load_app("listing1.groovy");
    let app = parse_source(&src).expect("parses");
    assert_eq!(app.preferences.len(), 1);
    let section = &app.preferences[0];
    assert_eq!(section.title, "Via a push notification and/or an SMS message");
    let SectionItem::Input(recipients) = &section.items[0] else {
        panic!("first item should be an input");
    };
    assert_eq!(recipients.name, "recipients");
    assert_eq!(recipients.input_type, InputType::Contact);
    assert_eq!(recipients.title(), Some("Send notifications to"));
    let SectionItem::Input(phone) = &recipients.children[0] else {
        panic!("nested input expected");
    };
    assert_eq!(phone.name, "phone");
    assert_eq!(phone.input_type, InputType::Phone);
    assert!(!phone.required());
}

#[test]
fn empty_program_parses_to_empty_app() {
    let src = SourceUnit::inline("");
    let app = parse_source(&src).expect("parses");
    assert!(app.inputs().is_empty());
    assert_eq!(app.count_subscriptions(), 0);
    assert!(app.methods.is_empty());

    let src = SourceUnit::inline("preferences {\n}\ndef initialize() {\n}\n");
    let app = parse_source(&src).expect("parses");
    assert!(app.inputs().is_empty());
    assert_eq!(app.count_subscriptions(), 0);
    assert!(app.initialize().is_some());
}

#[test]
fn round_trip_is_structurally_stable() {
    let manifest = load_manifest();
    for name in manifest.apps.keys() {
        let src = load_app(name);
        let once = emit_text(&parse_source(&src).expect("first parse"));
        let reparsed = parse_source(&emit(&parse_source(&src).unwrap())).expect("reparses");
        assert_eq!(emit_text(&reparsed), once, "{name}: round trip changed structure");
    }
}

#[test]
fn emission_is_idempotent() {
    let manifest = load_manifest();
    for name in manifest.apps.keys() {
        let src = load_app(name);
        let app = parse_source(&src).expect("parses");
        let first = emit(&app);
        let second = emit(&parse_source(&first).expect("canonical output reparses"));
        assert_eq!(first.text, second.text, "{name}: emission not idempotent");
    }
}

#[test]
fn comments_survive_round_trip() {
    let src = load_app("lobby-light.groovy");
    let app = parse_source(&src).expect("parses");
    let emitted = emit_text(&app);
    assert!(emitted.contains("// Turns the lobby light on with motion"));
}

fn collect_spans(app: &SmartAppAst) -> Vec<iotdots_core::source::Span> {
    let mut spans = Vec::new();
    for section in &app.preferences {
        spans.push(section.span);
        collect_item_spans(&section.items, &mut spans);
    }
    for method in &app.methods {
        spans.push(method.span);
        collect_stmt_spans(&method.body, &mut spans);
    }
    spans.retain(|s| !s.is_synthetic());
    spans
}

fn collect_item_spans(items: &[SectionItem], spans: &mut Vec<iotdots_core::source::Span>) {
    for item in items {
        match item {
            SectionItem::Input(input) => {
                spans.push(input.span);
                collect_item_spans(&input.children, spans);
            }
            SectionItem::Log { span, .. } => spans.push(*span),
        }
    }
}

fn collect_stmt_spans(stmts: &[Stmt], spans: &mut Vec<iotdots_core::source::Span>) {
    for stmt in stmts {
        spans.push(stmt.span);
        for expr in stmt_exprs(&stmt.kind) {
            collect_expr_spans(expr, spans);
        }
        if let StmtKind::If { then_body, else_body, .. } = &stmt.kind {
            collect_stmt_spans(then_body, spans);
            if let Some(e) = else_body {
                collect_stmt_spans(e, spans);
            }
        }
    }
}

fn stmt_exprs(kind: &StmtKind) -> Vec<&Expr> {
    match kind {
        StmtKind::Subscribe { target, .. } => vec![target],
        StmtKind::DeviceCommand { args, .. } => args.iter().collect(),
        StmtKind::Assign { value, .. } => vec![value],
        StmtKind::If { cond, .. } => vec![cond],
        StmtKind::MethodCall { args, .. } => args.iter().collect(),
        StmtKind::Schedule { delay, .. } => vec![delay],
        StmtKind::SendMessage { args, .. } => args.iter().collect(),
        StmtKind::HttpCall { args, .. } => args.iter().collect(),
        StmtKind::LogCall { arg, .. } => vec![arg],
        StmtKind::Return { value } => value.iter().collect(),
    }
}

fn collect_expr_spans(expr: &Expr, spans: &mut Vec<iotdots_core::source::Span>) {
    spans.push(expr.span);
    match &expr.kind {
        ExprKind::Member { recv, .. } => collect_expr_spans(recv, spans),
        ExprKind::Call { args, .. } => args.iter().for_each(|a| collect_expr_spans(a, spans)),
        ExprKind::Binary { lhs, rhs, .. } => {
            collect_expr_spans(lhs, spans);
            collect_expr_spans(rhs, spans);
        }
        ExprKind::Unary { operand, .. } => collect_expr_spans(operand, spans),
        ExprKind::Interp(segments) => {
            for seg in segments {
                if let Segment::Expr(e) = seg {
                    collect_expr_spans(e, spans);
                }
            }
        }
        _ => {}
    }
}

fn is_contiguous_subsequence(haystack: &[Token], needle: &[Token]) -> bool {
    if needle.is_empty() {
        return true;
    }
    haystack.windows(needle.len()).any(|w| {
        w.iter().zip(needle).all(|(a, b)| a.kind == b.kind && a.lexeme == b.lexeme)
    })
}

#[test]
fn spans_slice_to_contiguous_token_runs() {
    let manifest = load_manifest();
    for name in manifest.apps.keys() {
        let src = load_app(name);
        let app = parse_source(&src).expect("parses");
        let full = tokenize(&src).expect("lexes");
        for span in collect_spans(&app) {
            let slice = SourceUnit::inline(span.slice(&src.text));
            let sub = tokenize(&slice)
                .unwrap_or_else(|e| panic!("{name}: span {span} does not lex: {e}"));
            assert!(
                is_contiguous_subsequence(&full, &sub),
                "{name}: span {span} is not a contiguous token run"
            );
        }
    }
}

#[test]
fn parse_error_reports_position_and_expectation() {
    let src = SourceUnit::new("def broken() {\n    light.on(\n}\n", "app.groovy");
    let err = parse_source(&src).expect_err("should fail");
    let message = err.render(&src);
    assert!(message.starts_with("app.groovy:"), "got {message}");
    assert!(message.contains("expected"), "got {message}");
}

#[test]
fn undeclared_subscription_target_is_rejected() {
    let src = SourceUnit::inline("def initialize() {\n    subscribe(ghost, \"motion\", handler)\n}\ndef handler(evt) {\n}\n");
    assert!(parse_source(&src).is_err());
}

#[test]
fn duplicate_method_names_are_rejected() {
    let src = SourceUnit::inline("def a() {\n}\ndef a() {\n}\n");
    assert!(parse_source(&src).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]
    // Totality: the frontend returns Ok or Err on arbitrary input, never panics.
    #[test]
    fn parser_is_total_on_arbitrary_text(text in "\\PC{0,200}") {
        let _ = parse_source(&SourceUnit::inline(text));
    }

    #[test]
    fn parser_is_total_on_mutated_corpus(idx in 0usize..16, flips in prop::collection::vec((0usize..800, any::<u8>()), 0..8)) {
        let names = ["lobby-light.groovy", "thermostat-comfort.groovy", "listing1.groovy", "security-monitor.groovy"];
        let mut text = load_app(names[idx % names.len()]).text.into_bytes();
        for (pos, byte) in flips {
            if !text.is_empty() {
                let at = pos % text.len();
                text[at] = byte;
            }
        }
        if let Ok(text) = String::from_utf8(text) {
            let _ = parse_source(&SourceUnit::inline(text));
        }
    }
}

#[test]
fn lex_errors_surface_through_parse_source() {
    let src = SourceUnit::inline("def x = \"unterminated\n");
    match parse_source(&src) {
        Err(FrontendError::Lex(_)) => {}
        other => panic!("expected lex error, got {:?}", other.map(|_| ())),
    }
}
