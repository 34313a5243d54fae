//! Forensic point detection and log insertion.
//!
//! Detection is purely syntactic: each category has a node-shape rule, and
//! the output order is fixed (node id, then category) so repeated runs agree.
//! Insertion writes one `log.iotdots("<Category>: <name>=<value>")` statement
//! per point and refuses to touch source that already carries the prologue
//! marker or any iotdots call.

use crate::ast::*;
use crate::emit;
use crate::icfg::{self, Branch, Icfg, NodeId, NodeKind, StmtAddr};
use crate::parser::{self, FrontendError};
use crate::source::SourceUnit;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

pub const PROLOGUE_COMMENT: &str = "// instrumented-by: iotdots";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Category {
    Event,
    Action,
    UserInput,
    DeviceInfo,
    TimeLocation,
    SinkInternet,
    SinkMessage,
}

impl Category {
    pub const ALL: [Category; 7] = [
        Category::Event,
        Category::Action,
        Category::UserInput,
        Category::DeviceInfo,
        Category::TimeLocation,
        Category::SinkInternet,
        Category::SinkMessage,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Category::Event => "Event",
            Category::Action => "Action",
            Category::UserInput => "UserInput",
            Category::DeviceInfo => "DeviceInfo",
            Category::TimeLocation => "TimeLocation",
            Category::SinkInternet => "SinkInternet",
            Category::SinkMessage => "SinkMessage",
        }
    }

    pub fn parse(s: &str) -> Option<Category> {
        Category::ALL.iter().copied().find(|c| c.name() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InsertionSite {
    Before,
    After,
}

/// Where a point's log statement lands in the AST.
#[derive(Debug, Clone, PartialEq)]
pub enum Anchor {
    /// After the `top_item`-th item of section `section`.
    Input { section: usize, top_item: usize },
    /// At the start of the named handler's body.
    HandlerEntry { method: String },
    /// Relative to an addressed statement.
    Stmt { addr: StmtAddr },
}

#[derive(Debug, Clone)]
pub struct ForensicPoint {
    pub category: Category,
    pub node_id: NodeId,
    pub site: InsertionSite,
    pub anchor: Anchor,
    /// Human-readable name of the flagged construct, e.g. `light.on`.
    pub label: String,
    /// Argument of the inserted log call.
    pub payload: Expr,
}

#[derive(Debug, Clone, Error)]
pub enum InstrumentError {
    #[error(transparent)]
    Frontend(#[from] FrontendError),
    #[error(transparent)]
    Graph(#[from] icfg::GraphError),
    #[error("source is already instrumented")]
    AlreadyInstrumented,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PointSummary {
    pub category: Category,
    pub label: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstrumentationReport {
    pub points: Vec<PointSummary>,
    pub lines_added: usize,
    pub original_lines: usize,
    pub bytes_added: usize,
}

/// Detect forensic points. Output is sorted by (node id, category).
pub fn detect_points(icfg: &Icfg, app: &SmartAppAst) -> Vec<ForensicPoint> {
    let mut points = Vec::new();
    for node in &icfg.nodes {
        match &node.kind {
            NodeKind::Input { name, section, top_item, device } => {
                let anchor = Anchor::Input { section: *section, top_item: *top_item };
                points.push(ForensicPoint {
                    category: Category::UserInput,
                    node_id: node.id,
                    site: InsertionSite::After,
                    anchor: anchor.clone(),
                    label: name.clone(),
                    payload: payload_expr("UserInput", name, &[Expr::ident(name)]),
                });
                if *device {
                    points.push(ForensicPoint {
                        category: Category::DeviceInfo,
                        node_id: node.id,
                        site: InsertionSite::After,
                        anchor,
                        label: name.clone(),
                        payload: payload_expr(
                            "DeviceInfo",
                            name,
                            &[Expr::synthetic(ExprKind::Member {
                                recv: Box::new(Expr::ident(name)),
                                name: "id".to_string(),
                            })],
                        ),
                    });
                }
            }
            NodeKind::Stmt { addr } => {
                let Some(stmt) = icfg.stmt_at(app, addr) else { continue };
                detect_stmt_points(icfg, node.id, addr, stmt, &mut points);
            }
            _ => {}
        }
    }
    points.sort_by(|a, b| (a.node_id, a.category).cmp(&(b.node_id, b.category)));
    points
}

fn detect_stmt_points(
    icfg: &Icfg,
    node_id: NodeId,
    addr: &StmtAddr,
    stmt: &Stmt,
    points: &mut Vec<ForensicPoint>,
) {
    // The instrumentation's own log calls never count as points.
    if let StmtKind::LogCall { level, .. } = &stmt.kind {
        if level == "iotdots" {
            return;
        }
    }
    match &stmt.kind {
        StmtKind::Subscribe { target, attribute, handler } => {
            let target_name = match &target.kind {
                ExprKind::Ident(n) => n.clone(),
                _ => "target".to_string(),
            };
            let label = format!("{}.{}", target_name, attribute);
            if let Some(entry) = icfg.entry_of(handler) {
                points.push(ForensicPoint {
                    category: Category::Event,
                    node_id: entry,
                    site: InsertionSite::Before,
                    anchor: Anchor::HandlerEntry { method: handler.clone() },
                    label: label.clone(),
                    payload: payload_expr(
                        "Event",
                        &label,
                        &[Expr::synthetic(ExprKind::Member {
                            recv: Box::new(Expr::ident("evt")),
                            name: "value".to_string(),
                        })],
                    ),
                });
            }
        }
        StmtKind::DeviceCommand { device, command, args } => {
            let label = format!("{}.{}", device, command);
            let value_args: Vec<Expr> =
                if args.is_empty() { vec![Expr::string(command)] } else { args.clone() };
            points.push(ForensicPoint {
                category: Category::Action,
                node_id,
                site: InsertionSite::After,
                anchor: Anchor::Stmt { addr: addr.clone() },
                label: label.clone(),
                payload: payload_expr("Action", &label, &value_args),
            });
        }
        StmtKind::Schedule { delay, .. } => {
            points.push(ForensicPoint {
                category: Category::TimeLocation,
                node_id,
                site: InsertionSite::After,
                anchor: Anchor::Stmt { addr: addr.clone() },
                label: "runIn".to_string(),
                payload: payload_expr("TimeLocation", "runIn", &[delay.clone()]),
            });
        }
        StmtKind::SendMessage { kind, args } => {
            let label = match kind {
                MessageKind::Push => "sendPush",
                MessageKind::Sms => "sendSms",
            };
            let value_args: Vec<Expr> =
                if args.is_empty() { vec![Expr::string(label)] } else { vec![args[0].clone()] };
            points.push(ForensicPoint {
                category: Category::SinkMessage,
                node_id,
                site: InsertionSite::After,
                anchor: Anchor::Stmt { addr: addr.clone() },
                label: label.to_string(),
                payload: payload_expr("SinkMessage", label, &value_args),
            });
        }
        StmtKind::HttpCall { function, args } => {
            let value_args: Vec<Expr> =
                if args.is_empty() { vec![Expr::string(function)] } else { vec![args[0].clone()] };
            points.push(ForensicPoint {
                category: Category::SinkInternet,
                node_id,
                site: InsertionSite::After,
                anchor: Anchor::Stmt { addr: addr.clone() },
                label: function.clone(),
                payload: payload_expr("SinkInternet", function, &value_args),
            });
        }
        _ => {}
    }
    // Any statement whose expressions mention the location object is a
    // time/location point, logged before the statement runs.
    if stmt_references_location(&stmt.kind) {
        points.push(ForensicPoint {
            category: Category::TimeLocation,
            node_id,
            site: InsertionSite::Before,
            anchor: Anchor::Stmt { addr: addr.clone() },
            label: "location.mode".to_string(),
            payload: payload_expr(
                "TimeLocation",
                "location.mode",
                &[Expr::synthetic(ExprKind::Member {
                    recv: Box::new(Expr::ident("location")),
                    name: "mode".to_string(),
                })],
            ),
        });
    }
}

fn stmt_references_location(kind: &StmtKind) -> bool {
    let exprs: Vec<&Expr> = match kind {
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
    };
    exprs.iter().any(|e| e.references_location())
}

/// Build the log argument `"<Category>: <name>=<values>"`, splicing literal
/// strings and interpolations from the captured expressions directly into
/// the template.
fn payload_expr(category: &str, name: &str, values: &[Expr]) -> Expr {
    let mut segments = vec![Segment::Lit(format!("{}: {}=", category, name))];
    for (i, value) in values.iter().enumerate() {
        if i > 0 {
            push_lit(&mut segments, ",");
        }
        match &value.kind {
            ExprKind::Str(s) => push_lit(&mut segments, s),
            ExprKind::Num(_) | ExprKind::Bool(_) => push_lit(&mut segments, &emit::render(value, 0)),
            ExprKind::Interp(inner) => {
                for seg in inner {
                    match seg {
                        Segment::Lit(text) => push_lit(&mut segments, text),
                        Segment::Expr(e) => segments.push(Segment::Expr(e.clone())),
                    }
                }
            }
            _ => segments.push(Segment::Expr(value.clone())),
        }
    }
    Expr::synthetic(ExprKind::Interp(segments))
}

fn push_lit(segments: &mut Vec<Segment>, text: &str) {
    if let Some(Segment::Lit(last)) = segments.last_mut() {
        last.push_str(text);
    } else {
        segments.push(Segment::Lit(text.to_string()));
    }
}

/// Insert one log statement per point. Fails on already-instrumented input.
pub fn insert_logs(app: &SmartAppAst, points: &[ForensicPoint]) -> Result<SmartAppAst, InstrumentError> {
    if app.has_iotdots_marker() {
        return Err(InstrumentError::AlreadyInstrumented);
    }
    let mut out = app.clone();

    // Section insertions: after the top-level item, grouped and applied from
    // the highest index down so earlier indices stay valid.
    let mut by_section: BTreeMap<(usize, usize), Vec<&ForensicPoint>> = BTreeMap::new();
    // Handler-entry insertions keep point order.
    let mut by_handler: BTreeMap<String, Vec<&ForensicPoint>> = BTreeMap::new();
    // Statement insertions grouped by enclosing body.
    let mut by_body: BTreeMap<(String, Vec<(usize, Branch)>), Vec<(usize, InsertionSite, &ForensicPoint)>> =
        BTreeMap::new();

    for point in points {
        match &point.anchor {
            Anchor::Input { section, top_item } => {
                by_section.entry((*section, *top_item)).or_default().push(point);
            }
            Anchor::HandlerEntry { method } => {
                by_handler.entry(method.clone()).or_default().push(point);
            }
            Anchor::Stmt { addr } => {
                by_body
                    .entry((addr.method.clone(), addr.path.clone()))
                    .or_default()
                    .push((addr.index, point.site, point));
            }
        }
    }

    // Statement insertions go first, deepest bodies before shallower ones,
    // so recorded statement addresses stay valid while logs are added.
    let mut body_groups: Vec<_> = by_body.into_iter().collect();
    body_groups.sort_by_key(|((_, path), _)| std::cmp::Reverse(path.len()));
    for ((method_name, path), mut inserts) in body_groups {
        let method = out
            .methods
            .iter_mut()
            .find(|m| m.name == method_name)
            .unwrap_or_else(|| panic!("point addresses method {method_name:?} not in this app"));
        let body = resolve_body_mut(&mut method.body, &path)
            .unwrap_or_else(|| panic!("point address is stale for method {method_name:?}"));
        // Applied back to front; at equal index the After insertion must be
        // applied first so the Before log ends up above the statement.
        inserts.sort_by_key(|(idx, site, _)| (*idx, matches!(site, InsertionSite::After)));
        for (idx, site, point) in inserts.into_iter().rev() {
            let at = match site {
                InsertionSite::Before => idx,
                InsertionSite::After => idx + 1,
            };
            let at = at.min(body.len());
            body.insert(at, log_stmt(&point.payload));
        }
    }

    for (method_name, pts) in &by_handler {
        if let Some(method) = out.methods.iter_mut().find(|m| &m.name == method_name) {
            for (k, point) in pts.iter().enumerate() {
                method.body.insert(k, log_stmt(&point.payload));
            }
        }
    }

    for ((section, top_item), pts) in by_section.iter().rev() {
        let Some(sec) = out.preferences.get_mut(*section) else { continue };
        let at = (*top_item + 1).min(sec.items.len());
        for (k, point) in pts.iter().enumerate() {
            sec.items.insert(
                at + k,
                SectionItem::Log {
                    level: "iotdots".to_string(),
                    arg: point.payload.clone(),
                    leading: Vec::new(),
                    span: crate::source::Span::synthetic(),
                },
            );
        }
    }

    out.leading.insert(0, PROLOGUE_COMMENT.to_string());
    Ok(out)
}

fn log_stmt(payload: &Expr) -> Stmt {
    Stmt::synthetic(StmtKind::LogCall { level: "iotdots".to_string(), arg: payload.clone() })
}

fn resolve_body_mut<'a>(body: &'a mut Vec<Stmt>, path: &[(usize, Branch)]) -> Option<&'a mut Vec<Stmt>> {
    let mut current = body;
    for (idx, branch) in path {
        let stmt = current.get_mut(*idx)?;
        let StmtKind::If { then_body, else_body, .. } = &mut stmt.kind else { return None };
        current = match branch {
            Branch::Then => then_body,
            Branch::Else => else_body.as_mut()?,
        };
    }
    Some(current)
}

/// Full instrumentation pipeline: parse, graph, detect, insert, emit.
pub fn instrument(src: &SourceUnit) -> Result<(SourceUnit, InstrumentationReport), InstrumentError> {
    let app = parser::parse_source(src)?;
    let graph = build_graph(&app)?;
    let points = detect_points(&graph, &app);
    let modified = insert_logs(&app, &points)?;
    let emitted = emit::emit(&modified);

    let plain_text = emit::emit_text(&app);
    let lines_added = count_lines(&emitted.text).saturating_sub(count_lines(&plain_text));
    let bytes_added = emitted.text.len().saturating_sub(plain_text.len());
    let report = InstrumentationReport {
        points: points
            .iter()
            .map(|p| PointSummary { category: p.category, label: p.label.clone() })
            .collect(),
        lines_added,
        original_lines: count_lines(&src.text),
        bytes_added,
    };
    Ok((emitted, report))
}

pub fn build_graph(app: &SmartAppAst) -> Result<Icfg, icfg::GraphError> {
    icfg::build_icfg(app)
}

fn count_lines(text: &str) -> usize {
    text.lines().count()
}
