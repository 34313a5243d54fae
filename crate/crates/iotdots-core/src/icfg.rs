//! Inter-procedural control-flow graph over a parsed app.
//!
//! Nodes cover method statements plus one pseudo-node per input declaration
//! (inputs take effect during the installed/updated phases, so the chain of
//! input nodes hangs off those entries). Every method gets a synthetic entry
//! and exit node; the three lifecycle entries exist even when the app does
//! not declare the methods.

use crate::ast::*;
use crate::source::Span;
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

pub type NodeId = usize;

#[derive(Debug, Clone)]
pub struct Icfg {
    pub nodes: Vec<Node>,
    /// Intra-procedural flow edges.
    pub edges: Vec<(NodeId, NodeId)>,
    /// Call statements (local calls and runIn scheduling) to callee entries.
    pub call_edges: Vec<(NodeId, NodeId)>,
    /// Lifecycle methods and subscribed handlers, by method name.
    pub entries: BTreeMap<String, NodeId>,
    /// Nodes unreachable from every entry.
    pub dead: BTreeSet<NodeId>,
}

#[derive(Debug, Clone)]
pub struct Node {
    pub id: NodeId,
    pub kind: NodeKind,
    pub span: Span,
}

#[derive(Debug, Clone)]
pub enum NodeKind {
    /// Input declaration pseudo-node; `section` indexes `app.preferences`,
    /// `top_item` the top-level section item the input sits under.
    Input { name: String, section: usize, top_item: usize, device: bool },
    Entry { method: String },
    Exit { method: String },
    Stmt { addr: StmtAddr },
}

/// Address of a statement inside a method body, stable across reparses.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StmtAddr {
    pub method: String,
    /// Steps descending into if-branches: the statement index of the `if`
    /// within the current body plus which branch to enter.
    pub path: Vec<(usize, Branch)>,
    /// Index in the final body.
    pub index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Branch {
    Then,
    Else,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum GraphError {
    #[error("subscription names undeclared handler {handler:?}")]
    UndeclaredHandler { handler: String, span: Span },
    #[error("runIn names undeclared handler {handler:?}")]
    UndeclaredSchedule { handler: String, span: Span },
}

impl Icfg {
    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id]
    }

    pub fn entry_of(&self, method: &str) -> Option<NodeId> {
        self.nodes
            .iter()
            .find(|n| matches!(&n.kind, NodeKind::Entry { method: m } if m == method))
            .map(|n| n.id)
    }

    pub fn call_edges_into(&self, method: &str) -> usize {
        match self.entry_of(method) {
            Some(entry) => self.call_edges.iter().filter(|(_, to)| *to == entry).count(),
            None => 0,
        }
    }

    /// Resolve a statement node back to the statement in the AST.
    pub fn stmt_at<'a>(&self, app: &'a SmartAppAst, addr: &StmtAddr) -> Option<&'a Stmt> {
        let method = app.method(&addr.method)?;
        let mut body = &method.body;
        for (idx, branch) in &addr.path {
            let stmt = body.get(*idx)?;
            let StmtKind::If { then_body, else_body, .. } = &stmt.kind else { return None };
            body = match branch {
                Branch::Then => then_body,
                Branch::Else => else_body.as_ref()?,
            };
        }
        body.get(addr.index)
    }
}

struct Builder {
    nodes: Vec<Node>,
    edges: Vec<(NodeId, NodeId)>,
    call_edges: Vec<(NodeId, NodeId)>,
}

impl Builder {
    fn push(&mut self, kind: NodeKind, span: Span) -> NodeId {
        let id = self.nodes.len();
        self.nodes.push(Node { id, kind, span });
        id
    }
}

pub fn build_icfg(app: &SmartAppAst) -> Result<Icfg, GraphError> {
    let mut g = Builder { nodes: Vec::new(), edges: Vec::new(), call_edges: Vec::new() };

    // Input pseudo-nodes in document order, chained.
    let mut input_nodes = Vec::new();
    for (si, section) in app.preferences.iter().enumerate() {
        for (ti, item) in section.items.iter().enumerate() {
            collect_input_nodes(item, si, ti, &mut g, &mut input_nodes);
        }
    }
    for pair in input_nodes.windows(2) {
        g.edges.push((pair[0], pair[1]));
    }

    // Entry nodes for every declared method first, so call edges can point
    // at callees regardless of declaration order.
    let mut method_entries: BTreeMap<String, NodeId> = BTreeMap::new();
    for method in &app.methods {
        let entry = g.push(NodeKind::Entry { method: method.name.clone() }, method.span);
        method_entries.insert(method.name.clone(), entry);
    }

    // Statement and exit nodes per method.
    for method in &app.methods {
        let entry = method_entries[&method.name];
        let (tails, returns) = {
            let mut lower = Lower {
                g: &mut g,
                method: &method.name,
                returns: Vec::new(),
                method_entries: &method_entries,
            };
            let tails = lower.body(&method.body, vec![entry], &[]);
            (tails, lower.returns)
        };
        let exit = g.push(NodeKind::Exit { method: method.name.clone() }, method.span);
        for t in tails.into_iter().chain(returns) {
            g.edges.push((t, exit));
        }
    }

    // Lifecycle entries exist even when the method is absent.
    let mut entries: BTreeMap<String, NodeId> = BTreeMap::new();
    for name in LIFECYCLE_METHODS {
        let id = match method_entries.get(*name) {
            Some(id) => *id,
            None => g.push(NodeKind::Entry { method: (*name).to_string() }, Span::synthetic()),
        };
        entries.insert((*name).to_string(), id);
    }

    // Inputs hang off installed and updated.
    if let Some(first_input) = input_nodes.first() {
        g.edges.push((entries["installed"], *first_input));
        g.edges.push((entries["updated"], *first_input));
    }

    // Handler entries come from subscriptions.
    let mut first_error: Option<GraphError> = None;
    let mut handler_names: Vec<String> = Vec::new();
    app.visit_stmts(&mut |_, stmt| {
        if first_error.is_some() {
            return;
        }
        match &stmt.kind {
            StmtKind::Subscribe { handler, .. } => {
                if method_entries.contains_key(handler) {
                    handler_names.push(handler.clone());
                } else {
                    first_error =
                        Some(GraphError::UndeclaredHandler { handler: handler.clone(), span: stmt.span });
                }
            }
            StmtKind::Schedule { handler, .. } => {
                if !method_entries.contains_key(handler) {
                    first_error =
                        Some(GraphError::UndeclaredSchedule { handler: handler.clone(), span: stmt.span });
                }
            }
            _ => {}
        }
    });
    if let Some(err) = first_error {
        return Err(err);
    }
    for handler in handler_names {
        let id = method_entries[&handler];
        entries.entry(handler).or_insert(id);
    }

    // Reachability over flow and call edges.
    let mut adjacency: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
    for (a, b) in g.edges.iter().chain(g.call_edges.iter()) {
        adjacency.entry(*a).or_default().push(*b);
    }
    let mut reachable: BTreeSet<NodeId> = BTreeSet::new();
    let mut stack: Vec<NodeId> = entries.values().copied().collect();
    while let Some(n) = stack.pop() {
        if reachable.insert(n) {
            if let Some(next) = adjacency.get(&n) {
                stack.extend(next.iter().copied());
            }
        }
    }
    let dead: BTreeSet<NodeId> =
        g.nodes.iter().map(|n| n.id).filter(|id| !reachable.contains(id)).collect();

    Ok(Icfg { nodes: g.nodes, edges: g.edges, call_edges: g.call_edges, entries, dead })
}

fn collect_input_nodes(
    item: &SectionItem,
    section: usize,
    top_item: usize,
    g: &mut Builder,
    out: &mut Vec<NodeId>,
) {
    if let SectionItem::Input(input) = item {
        let id = g.push(
            NodeKind::Input {
                name: input.name.clone(),
                section,
                top_item,
                device: input.input_type == InputType::DeviceCapability,
            },
            input.span,
        );
        out.push(id);
        for child in &input.children {
            collect_input_nodes(child, section, top_item, g, out);
        }
    }
}

struct Lower<'a> {
    g: &'a mut Builder,
    method: &'a str,
    returns: Vec<NodeId>,
    method_entries: &'a BTreeMap<String, NodeId>,
}

impl<'a> Lower<'a> {
    /// Lower a statement body; `preds` flow into the first statement and the
    /// returned set flows onward past the last.
    fn body(&mut self, stmts: &[Stmt], preds: Vec<NodeId>, path: &[(usize, Branch)]) -> Vec<NodeId> {
        let mut preds = preds;
        for (i, stmt) in stmts.iter().enumerate() {
            let addr = StmtAddr { method: self.method.to_string(), path: path.to_vec(), index: i };
            let node = self.g.push(NodeKind::Stmt { addr }, stmt.span);
            for p in &preds {
                self.g.edges.push((*p, node));
            }
            match &stmt.kind {
                StmtKind::If { then_body, else_body, .. } => {
                    let mut path_then = path.to_vec();
                    path_then.push((i, Branch::Then));
                    let mut tails = self.body(then_body, vec![node], &path_then);
                    match else_body {
                        Some(else_stmts) => {
                            let mut path_else = path.to_vec();
                            path_else.push((i, Branch::Else));
                            tails.extend(self.body(else_stmts, vec![node], &path_else));
                        }
                        None => tails.push(node),
                    }
                    preds = tails;
                }
                StmtKind::Return { .. } => {
                    self.returns.push(node);
                    preds = Vec::new();
                }
                StmtKind::MethodCall { name, .. } => {
                    if let Some(entry) = self.method_entries.get(name) {
                        self.g.call_edges.push((node, *entry));
                    }
                    preds = vec![node];
                }
                StmtKind::Schedule { handler, .. } => {
                    if let Some(entry) = self.method_entries.get(handler) {
                        self.g.call_edges.push((node, *entry));
                    }
                    preds = vec![node];
                }
                _ => {
                    preds = vec![node];
                }
            }
        }
        preds
    }
}
