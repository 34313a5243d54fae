//! Canonical source emission.
//!
//! Output is canonically formatted (4-space indents, one blank line between
//! top-level items) rather than byte-preserving, and re-emission of a
//! reparsed program is stable. Comments survive as leading trivia.

use crate::ast::*;
use crate::lexer::encode_string_inner;
use crate::source::SourceUnit;

pub fn emit(app: &SmartAppAst) -> SourceUnit {
    SourceUnit::new(emit_text(app), "<emitted>")
}

pub fn emit_text(app: &SmartAppAst) -> String {
    let mut w = Writer { out: String::new(), indent: 0 };
    let mut first = true;
    for line in &app.leading {
        w.line(line);
    }
    if !app.definition.is_empty() {
        let args: Vec<String> =
            app.definition.iter().map(|a| format!("{}: {}", a.name, render(&a.value, 0))).collect();
        w.line(&format!("definition({})", args.join(", ")));
        first = false;
    }
    if !app.preferences.is_empty() {
        if !first {
            w.blank();
        }
        first = false;
        w.line("preferences {");
        w.indent += 1;
        for section in &app.preferences {
            w.comments(&section.leading);
            w.line(&format!("section({}) {{", quoted(&section.title)));
            w.indent += 1;
            for item in &section.items {
                w.section_item(item);
            }
            w.indent -= 1;
            w.line("}");
        }
        w.indent -= 1;
        w.line("}");
    }
    for method in &app.methods {
        if !first {
            w.blank();
        }
        first = false;
        w.comments(&method.leading);
        w.line(&format!("def {}({}) {{", method.name, method.params.join(", ")));
        w.indent += 1;
        for stmt in &method.body {
            w.stmt(stmt);
        }
        w.indent -= 1;
        w.line("}");
    }
    for line in &app.trailing {
        w.line(line);
    }
    w.out
}

struct Writer {
    out: String,
    indent: usize,
}

impl Writer {
    fn line(&mut self, s: &str) {
        for _ in 0..self.indent {
            self.out.push_str("    ");
        }
        self.out.push_str(s);
        self.out.push('\n');
    }

    fn blank(&mut self) {
        self.out.push('\n');
    }

    fn comments(&mut self, lines: &[String]) {
        for c in lines {
            self.line(c);
        }
    }

    fn section_item(&mut self, item: &SectionItem) {
        match item {
            SectionItem::Input(input) => {
                self.comments(&input.leading);
                let mut parts = vec![quoted(&input.name), quoted(&input.raw_type)];
                parts.extend(input.args.iter().map(|a| format!("{}: {}", a.name, render(&a.value, 0))));
                if input.parenthesized || !input.children.is_empty() {
                    if input.children.is_empty() {
                        self.line(&format!("input({})", parts.join(", ")));
                    } else {
                        self.line(&format!("input({}) {{", parts.join(", ")));
                        self.indent += 1;
                        for child in &input.children {
                            self.section_item(child);
                        }
                        self.indent -= 1;
                        self.line("}");
                    }
                } else {
                    self.line(&format!("input {}", parts.join(", ")));
                }
            }
            SectionItem::Log { level, arg, leading, .. } => {
                self.comments(leading);
                self.line(&format!("log.{}({})", level, render(arg, 0)));
            }
        }
    }

    fn stmt(&mut self, stmt: &Stmt) {
        self.comments(&stmt.leading);
        match &stmt.kind {
            StmtKind::Subscribe { target, attribute, handler } => {
                self.line(&format!("subscribe({}, {}, {})", render(target, 0), quoted(attribute), handler));
            }
            StmtKind::DeviceCommand { device, command, args } => {
                self.line(&format!("{}.{}({})", device, command, render_args(args)));
            }
            StmtKind::Assign { declare, name, value } => {
                let prefix = if *declare { "def " } else { "" };
                self.line(&format!("{}{} = {}", prefix, name, render(value, 0)));
            }
            StmtKind::If { .. } => self.if_chain(stmt, true),
            StmtKind::MethodCall { name, args } => {
                self.line(&format!("{}({})", name, render_args(args)));
            }
            StmtKind::Schedule { delay, handler } => {
                self.line(&format!("runIn({}, {})", render(delay, 0), handler));
            }
            StmtKind::SendMessage { kind, args } => {
                let name = match kind {
                    MessageKind::Push => "sendPush",
                    MessageKind::Sms => "sendSms",
                };
                self.line(&format!("{}({})", name, render_args(args)));
            }
            StmtKind::HttpCall { function, args } => {
                self.line(&format!("{}({})", function, render_args(args)));
            }
            StmtKind::LogCall { level, arg } => {
                self.line(&format!("log.{}({})", level, render(arg, 0)));
            }
            StmtKind::Return { value } => match value {
                Some(v) => self.line(&format!("return {}", render(v, 0))),
                None => self.line("return"),
            },
        }
    }

    fn if_chain(&mut self, stmt: &Stmt, head: bool) {
        let StmtKind::If { cond, then_body, else_body } = &stmt.kind else { return };
        let opener = format!("if ({}) {{", render(cond, 0));
        if head {
            self.line(&opener);
        } else {
            self.append_to_last(&format!(" else {}", opener));
        }
        self.indent += 1;
        for s in then_body {
            self.stmt(s);
        }
        self.indent -= 1;
        self.line("}");
        if let Some(else_stmts) = else_body {
            let chains = else_stmts.len() == 1
                && matches!(else_stmts[0].kind, StmtKind::If { .. })
                && else_stmts[0].leading.is_empty();
            if chains {
                self.if_chain(&else_stmts[0], false);
            } else {
                self.append_to_last(" else {");
                self.indent += 1;
                for s in else_stmts {
                    self.stmt(s);
                }
                self.indent -= 1;
                self.line("}");
            }
        }
    }

    fn append_to_last(&mut self, s: &str) {
        if self.out.ends_with('\n') {
            self.out.pop();
        }
        self.out.push_str(s);
        self.out.push('\n');
    }
}

fn quoted(s: &str) -> String {
    format!("\"{}\"", encode_string_inner(s))
}

fn render_args(args: &[Expr]) -> String {
    args.iter().map(|a| render(a, 0)).collect::<Vec<_>>().join(", ")
}

/// Render an expression, parenthesizing children that bind looser than the
/// context requires.
pub fn render(expr: &Expr, min_prec: u8) -> String {
    match &expr.kind {
        ExprKind::Str(s) => quoted(s),
        ExprKind::Num(v) => render_num(*v),
        ExprKind::Bool(b) => b.to_string(),
        ExprKind::Null => "null".to_string(),
        ExprKind::Ident(n) => n.clone(),
        ExprKind::Member { recv, name } => format!("{}.{}", render(recv, 7), name),
        ExprKind::Call { callee, args } => format!("{}({})", callee, render_args(args)),
        ExprKind::Interp(segments) => {
            let mut out = String::from("\"");
            for seg in segments {
                match seg {
                    Segment::Lit(text) => out.push_str(&encode_string_inner(text)),
                    Segment::Expr(e) => {
                        out.push_str("${");
                        out.push_str(&render(e, 0));
                        out.push('}');
                    }
                }
            }
            out.push('"');
            out
        }
        ExprKind::Binary { op, lhs, rhs } => {
            let prec = op.precedence();
            let text =
                format!("{} {} {}", render(lhs, prec), op.symbol(), render(rhs, prec + 1));
            if prec < min_prec {
                format!("({})", text)
            } else {
                text
            }
        }
        ExprKind::Unary { op, operand } => {
            let sym = match op {
                UnOp::Not => "!",
                UnOp::Neg => "-",
            };
            let text = format!("{}{}", sym, render(operand, 6));
            if 6 < min_prec {
                format!("({})", text)
            } else {
                text
            }
        }
    }
}

fn render_num(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 9e15 {
        format!("{}", v as i64)
    } else {
        format!("{}", v)
    }
}
