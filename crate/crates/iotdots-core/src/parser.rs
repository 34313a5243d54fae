//! Recursive-descent parser for the smart-app DSL subset.
//!
//! The parser never panics on malformed input: every failure path returns a
//! `ParseError` carrying the expected/found tokens and a span. Statement
//! shapes outside the supported subset are rejected rather than guessed at.

use crate::ast::*;
use crate::lexer::{self, LexError, Token, TokenKind};
use crate::source::{SourceUnit, Span};
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
#[error("expected {expected}, found {found}")]
pub struct ParseError {
    pub expected: String,
    pub found: String,
    pub span: Span,
}

impl ParseError {
    /// Render as `origin:line:col: message` against the unit that was parsed.
    pub fn render(&self, src: &SourceUnit) -> String {
        let (line, col) = src.line_col(self.span.start.min(src.text.len()));
        format!("{}:{}:{}: {}", src.origin, line, col, self)
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum FrontendError {
    #[error(transparent)]
    Lex(#[from] LexError),
    #[error(transparent)]
    Parse(#[from] ParseError),
}

impl FrontendError {
    pub fn render(&self, src: &SourceUnit) -> String {
        match self {
            FrontendError::Lex(e) => {
                let (line, col) = src.line_col(e.span().start.min(src.text.len()));
                format!("{}:{}:{}: {}", src.origin, line, col, e)
            }
            FrontendError::Parse(e) => e.render(src),
        }
    }
}

/// Tokenize and parse a source unit.
pub fn parse_source(src: &SourceUnit) -> Result<SmartAppAst, FrontendError> {
    let tokens = lexer::tokenize(src)?;
    Ok(parse(&tokens)?)
}

const MAX_DEPTH: usize = 64;

pub fn parse(tokens: &[Token]) -> Result<SmartAppAst, ParseError> {
    let mut p = Parser { tokens, pos: 0, pending: Vec::new(), depth: 0 };
    p.parse_app()
}

struct Parser<'a> {
    tokens: &'a [Token],
    pos: usize,
    /// Comment lines seen since the last node was built.
    pending: Vec<String>,
    depth: usize,
}

impl<'a> Parser<'a> {
    fn skip_comments(&mut self) {
        while let Some(t) = self.tokens.get(self.pos) {
            if t.kind == TokenKind::Comment {
                self.pending.push(t.lexeme.clone());
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn peek(&mut self) -> Option<&'a Token> {
        self.skip_comments();
        self.tokens.get(self.pos)
    }

    fn peek_ahead(&mut self, n: usize) -> Option<&'a Token> {
        self.skip_comments();
        let mut idx = self.pos;
        let mut left = n;
        while let Some(t) = self.tokens.get(idx) {
            if t.kind == TokenKind::Comment {
                idx += 1;
                continue;
            }
            if left == 0 {
                return Some(t);
            }
            left -= 1;
            idx += 1;
        }
        None
    }

    fn advance(&mut self) -> Option<&'a Token> {
        self.skip_comments();
        let t = self.tokens.get(self.pos);
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn take_leading(&mut self) -> Vec<String> {
        self.skip_comments();
        std::mem::take(&mut self.pending)
    }

    fn here(&mut self) -> Span {
        match self.peek() {
            Some(t) => t.span,
            None => {
                let end = self.tokens.last().map(|t| t.span.end).unwrap_or(0);
                Span::new(end, end)
            }
        }
    }

    fn err<T>(&mut self, expected: &str) -> Result<T, ParseError> {
        let span = self.here();
        let found = match self.peek() {
            Some(t) => format!("{:?}", t.lexeme),
            None => "end of input".to_string(),
        };
        Err(ParseError { expected: expected.to_string(), found, span })
    }

    fn expect_punct(&mut self, p: &str) -> Result<Span, ParseError> {
        match self.peek() {
            Some(t) if t.is_punct(p) => {
                let span = t.span;
                self.pos += 1;
                Ok(span)
            }
            _ => self.err(&format!("{:?}", p)),
        }
    }

    fn expect_keyword(&mut self, k: &str) -> Result<Span, ParseError> {
        match self.peek() {
            Some(t) if t.is_keyword(k) => {
                let span = t.span;
                self.pos += 1;
                Ok(span)
            }
            _ => self.err(&format!("keyword {:?}", k)),
        }
    }

    fn expect_ident(&mut self) -> Result<(String, Span), ParseError> {
        match self.peek() {
            Some(t) if t.kind == TokenKind::Ident => {
                let out = (t.lexeme.clone(), t.span);
                self.pos += 1;
                Ok(out)
            }
            _ => self.err("identifier"),
        }
    }

    fn expect_string(&mut self) -> Result<(String, Span), ParseError> {
        match self.peek() {
            Some(t) if t.kind == TokenKind::Str => {
                let out = (lexer::decode_string(&t.lexeme), t.span);
                self.pos += 1;
                Ok(out)
            }
            _ => self.err("string literal"),
        }
    }

    fn enter(&mut self) -> Result<(), ParseError> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return self.err("shallower nesting");
        }
        Ok(())
    }

    fn leave(&mut self) {
        self.depth -= 1;
    }

    fn parse_app(&mut self) -> Result<SmartAppAst, ParseError> {
        let mut app = SmartAppAst {
            definition: Vec::new(),
            preferences: Vec::new(),
            methods: Vec::new(),
            leading: Vec::new(),
            trailing: Vec::new(),
            span: Span::new(0, self.tokens.last().map(|t| t.span.end).unwrap_or(0)),
        };
        let mut saw_definition = false;
        loop {
            let leading = self.take_leading();
            let Some(tok) = self.peek() else {
                app.trailing = leading;
                break;
            };
            if tok.is_keyword("definition") {
                if saw_definition {
                    return self.err("a single definition block");
                }
                saw_definition = true;
                app.leading.extend(leading);
                self.advance();
                self.expect_punct("(")?;
                app.definition = self.parse_named_args()?;
                self.expect_punct(")")?;
            } else if tok.is_keyword("preferences") {
                app.leading.extend(leading);
                self.advance();
                self.expect_punct("{")?;
                while !self.at_punct("}") {
                    let section = self.parse_section()?;
                    app.preferences.push(section);
                }
                self.expect_punct("}")?;
            } else if tok.is_keyword("def") {
                let method = self.parse_method(leading)?;
                if app.methods.iter().any(|m| m.name == method.name) {
                    return Err(ParseError {
                        expected: "unique method name".into(),
                        found: format!("{:?}", method.name),
                        span: method.span,
                    });
                }
                app.methods.push(method);
            } else {
                return self.err("definition, preferences, or a method declaration");
            }
        }
        validate(&app)?;
        Ok(app)
    }

    fn at_punct(&mut self, p: &str) -> bool {
        matches!(self.peek(), Some(t) if t.is_punct(p))
    }

    fn at_keyword(&mut self, k: &str) -> bool {
        matches!(self.peek(), Some(t) if t.is_keyword(k))
    }

    fn parse_named_args(&mut self) -> Result<Vec<NamedArg>, ParseError> {
        let mut args = Vec::new();
        if self.at_punct(")") {
            return Ok(args);
        }
        loop {
            let (name, _) = self.expect_ident()?;
            self.expect_punct(":")?;
            let value = self.parse_expr()?;
            args.push(NamedArg { name, value });
            if self.at_punct(",") {
                self.advance();
            } else {
                break;
            }
        }
        Ok(args)
    }

    fn parse_section(&mut self) -> Result<SectionDecl, ParseError> {
        let leading = self.take_leading();
        let start = self.expect_keyword("section")?;
        self.expect_punct("(")?;
        let (title, _) = self.expect_string()?;
        self.expect_punct(")")?;
        self.expect_punct("{")?;
        self.enter()?;
        let mut items = Vec::new();
        while !self.at_punct("}") {
            items.push(self.parse_section_item()?);
        }
        self.leave();
        let end = self.expect_punct("}")?;
        Ok(SectionDecl { title, items, leading, span: start.join(end) })
    }

    fn parse_section_item(&mut self) -> Result<SectionItem, ParseError> {
        let leading = self.take_leading();
        if self.at_keyword("input") {
            return Ok(SectionItem::Input(self.parse_input(leading)?));
        }
        // Instrumented apps carry `log.<level>(...)` statements inside sections.
        if matches!(self.peek(), Some(t) if t.kind == TokenKind::Ident && t.lexeme == "log") {
            let (_, start) = self.expect_ident()?;
            self.expect_punct(".")?;
            let (level, _) = self.expect_ident()?;
            self.expect_punct("(")?;
            let arg = self.parse_expr()?;
            let end = self.expect_punct(")")?;
            return Ok(SectionItem::Log { level, arg, leading, span: start.join(end) });
        }
        self.err("input declaration or log statement")
    }

    fn parse_input(&mut self, leading: Vec<String>) -> Result<InputDecl, ParseError> {
        let start = self.expect_keyword("input")?;
        let parenthesized = self.at_punct("(");
        if parenthesized {
            self.advance();
        }
        let (name, _) = self.expect_string()?;
        self.expect_punct(",")?;
        let (raw_type, type_span) = self.expect_string()?;
        let mut args = Vec::new();
        while self.at_punct(",") {
            self.advance();
            let (argname, _) = self.expect_ident()?;
            self.expect_punct(":")?;
            let value = self.parse_expr()?;
            args.push(NamedArg { name: argname, value });
        }
        let mut end = type_span;
        if parenthesized {
            end = self.expect_punct(")")?;
        }
        let mut children = Vec::new();
        if parenthesized && self.at_punct("{") {
            self.advance();
            self.enter()?;
            while !self.at_punct("}") {
                children.push(self.parse_section_item()?);
            }
            self.leave();
            end = self.expect_punct("}")?;
        }
        let Some(input_type) = InputType::from_raw(&raw_type) else {
            return Err(ParseError {
                expected: "supported input type".into(),
                found: format!("{:?}", raw_type),
                span: type_span,
            });
        };
        Ok(InputDecl {
            name,
            raw_type,
            input_type,
            args,
            children,
            parenthesized,
            leading,
            span: start.join(end),
        })
    }

    fn parse_method(&mut self, leading: Vec<String>) -> Result<MethodDecl, ParseError> {
        let start = self.expect_keyword("def")?;
        let (name, _) = self.expect_ident()?;
        self.expect_punct("(")?;
        let mut params = Vec::new();
        if !self.at_punct(")") {
            loop {
                let (p, _) = self.expect_ident()?;
                params.push(p);
                if self.at_punct(",") {
                    self.advance();
                } else {
                    break;
                }
            }
        }
        self.expect_punct(")")?;
        let (body, end) = self.parse_block()?;
        Ok(MethodDecl { name, params, body, leading, span: start.join(end) })
    }

    fn parse_block(&mut self) -> Result<(Vec<Stmt>, Span), ParseError> {
        let start = self.expect_punct("{")?;
        self.enter()?;
        let mut stmts = Vec::new();
        while !self.at_punct("}") {
            if self.peek().is_none() {
                self.leave();
                return self.err("\"}\"");
            }
            stmts.push(self.parse_stmt()?);
        }
        self.leave();
        let end = self.expect_punct("}")?;
        Ok((stmts, start.join(end)))
    }

    fn parse_stmt(&mut self) -> Result<Stmt, ParseError> {
        let leading = self.take_leading();
        let Some(tok) = self.peek() else {
            return self.err("statement");
        };
        if tok.is_keyword("def") {
            let start = tok.span;
            self.advance();
            let (name, _) = self.expect_ident()?;
            self.expect_punct("=")?;
            let value = self.parse_expr()?;
            let span = start.join(value.span);
            return Ok(Stmt { kind: StmtKind::Assign { declare: true, name, value }, leading, span });
        }
        if tok.is_keyword("if") {
            return self.parse_if(leading);
        }
        if tok.is_keyword("return") {
            let start = tok.span;
            self.advance();
            let value = if self.starts_expr() { Some(self.parse_expr()?) } else { None };
            let span = value.as_ref().map(|v| start.join(v.span)).unwrap_or(start);
            return Ok(Stmt { kind: StmtKind::Return { value }, leading, span });
        }
        if tok.kind == TokenKind::Ident {
            return self.parse_call_like(leading);
        }
        self.err("statement")
    }

    fn starts_expr(&mut self) -> bool {
        match self.peek() {
            Some(t) => matches!(t.kind, TokenKind::Ident | TokenKind::Number | TokenKind::Str)
                || t.opens_string()
                || t.is_punct("(")
                || t.is_punct("!")
                || t.is_punct("-")
                || t.is_keyword("true")
                || t.is_keyword("false")
                || t.is_keyword("null"),
            None => false,
        }
    }

    fn parse_if(&mut self, leading: Vec<String>) -> Result<Stmt, ParseError> {
        let start = self.expect_keyword("if")?;
        self.expect_punct("(")?;
        let cond = self.parse_expr()?;
        self.expect_punct(")")?;
        let (then_body, mut end) = self.parse_body_or_single()?;
        let mut else_body = None;
        if self.at_keyword("else") {
            self.advance();
            if self.at_keyword("if") {
                let nested = self.parse_if(Vec::new())?;
                end = nested.span;
                else_body = Some(vec![nested]);
            } else {
                let (body, e) = self.parse_body_or_single()?;
                end = e;
                else_body = Some(body);
            }
        }
        Ok(Stmt {
            kind: StmtKind::If { cond, then_body, else_body },
            leading,
            span: start.join(end),
        })
    }

    fn parse_body_or_single(&mut self) -> Result<(Vec<Stmt>, Span), ParseError> {
        if self.at_punct("{") {
            self.parse_block()
        } else {
            self.enter()?;
            let stmt = self.parse_stmt()?;
            self.leave();
            let span = stmt.span;
            Ok((vec![stmt], span))
        }
    }

    /// Statement beginning with an identifier: assignment, plain call, or
    /// receiver.method(...) call, then classified into the statement subset.
    fn parse_call_like(&mut self, leading: Vec<String>) -> Result<Stmt, ParseError> {
        let (name, start) = self.expect_ident()?;
        if self.at_punct("=") {
            self.advance();
            let value = self.parse_expr()?;
            let span = start.join(value.span);
            return Ok(Stmt { kind: StmtKind::Assign { declare: false, name, value }, leading, span });
        }
        if self.at_punct(".") {
            self.advance();
            let (method, _) = self.expect_ident()?;
            self.expect_punct("(")?;
            let args = self.parse_call_args()?;
            let end = self.expect_punct(")")?;
            let span = start.join(end);
            let kind = self.classify_member_call(&name, method, args, span)?;
            return Ok(Stmt { kind, leading, span });
        }
        if self.at_punct("(") {
            self.advance();
            let args = self.parse_call_args()?;
            let end = self.expect_punct(")")?;
            let span = start.join(end);
            let kind = self.classify_call(name, args, span)?;
            return Ok(Stmt { kind, leading, span });
        }
        self.err("\"=\", \".\", or \"(\" after identifier")
    }

    fn parse_call_args(&mut self) -> Result<Vec<Expr>, ParseError> {
        let mut args = Vec::new();
        if self.at_punct(")") {
            return Ok(args);
        }
        loop {
            args.push(self.parse_expr()?);
            if self.at_punct(",") {
                self.advance();
            } else {
                break;
            }
        }
        Ok(args)
    }

    fn classify_call(&mut self, callee: String, args: Vec<Expr>, span: Span) -> Result<StmtKind, ParseError> {
        match callee.as_str() {
            "subscribe" => {
                if args.len() != 3 {
                    return Err(ParseError {
                        expected: "subscribe(target, attribute, handler)".into(),
                        found: format!("{} arguments", args.len()),
                        span,
                    });
                }
                let mut it = args.into_iter();
                let target = it.next().unwrap();
                let attribute = expect_string_expr(it.next().unwrap(), "subscription attribute")?;
                let handler = expect_name_expr(it.next().unwrap(), "handler name")?;
                Ok(StmtKind::Subscribe { target, attribute, handler })
            }
            "runIn" => {
                if args.len() != 2 {
                    return Err(ParseError {
                        expected: "runIn(delay, handler)".into(),
                        found: format!("{} arguments", args.len()),
                        span,
                    });
                }
                let mut it = args.into_iter();
                let delay = it.next().unwrap();
                let handler = expect_name_expr(it.next().unwrap(), "handler name")?;
                Ok(StmtKind::Schedule { delay, handler })
            }
            "sendPush" | "sendNotification" => Ok(StmtKind::SendMessage { kind: MessageKind::Push, args }),
            "sendSms" | "sendSmsMessage" => Ok(StmtKind::SendMessage { kind: MessageKind::Sms, args }),
            "httpPost" | "httpPostJson" | "httpGet" => Ok(StmtKind::HttpCall { function: callee, args }),
            _ => Ok(StmtKind::MethodCall { name: callee, args }),
        }
    }

    fn classify_member_call(
        &mut self,
        recv: &str,
        method: String,
        args: Vec<Expr>,
        span: Span,
    ) -> Result<StmtKind, ParseError> {
        if recv == "log" {
            if args.len() != 1 {
                return Err(ParseError {
                    expected: "log call with one argument".into(),
                    found: format!("{} arguments", args.len()),
                    span,
                });
            }
            return Ok(StmtKind::LogCall { level: method, arg: args.into_iter().next().unwrap() });
        }
        Ok(StmtKind::DeviceCommand { device: recv.to_string(), command: method, args })
    }

    fn parse_expr(&mut self) -> Result<Expr, ParseError> {
        self.enter()?;
        let out = self.parse_binary(1);
        self.leave();
        out
    }

    fn parse_binary(&mut self, min_prec: u8) -> Result<Expr, ParseError> {
        let mut lhs = self.parse_unary()?;
        loop {
            let Some(op) = self.peek_binop() else { break };
            if op.precedence() < min_prec {
                break;
            }
            self.advance();
            let rhs = self.parse_binary(op.precedence() + 1)?;
            let span = lhs.span.join(rhs.span);
            lhs = Expr::new(ExprKind::Binary { op, lhs: Box::new(lhs), rhs: Box::new(rhs) }, span);
        }
        Ok(lhs)
    }

    fn peek_binop(&mut self) -> Option<BinOp> {
        let t = self.peek()?;
        if t.kind != TokenKind::Punct {
            return None;
        }
        match t.lexeme.as_str() {
            "||" => Some(BinOp::Or),
            "&&" => Some(BinOp::And),
            "==" => Some(BinOp::Eq),
            "!=" => Some(BinOp::Ne),
            "<" => Some(BinOp::Lt),
            "<=" => Some(BinOp::Le),
            ">" => Some(BinOp::Gt),
            ">=" => Some(BinOp::Ge),
            "+" => Some(BinOp::Add),
            "-" => Some(BinOp::Sub),
            "*" => Some(BinOp::Mul),
            "/" => Some(BinOp::Div),
            _ => None,
        }
    }

    fn parse_unary(&mut self) -> Result<Expr, ParseError> {
        if let Some(t) = self.peek() {
            if t.is_punct("!") || t.is_punct("-") {
                let op = if t.lexeme == "!" { UnOp::Not } else { UnOp::Neg };
                let start = t.span;
                self.advance();
                self.enter()?;
                let operand = self.parse_unary()?;
                self.leave();
                let span = start.join(operand.span);
                return Ok(Expr::new(ExprKind::Unary { op, operand: Box::new(operand) }, span));
            }
        }
        self.parse_postfix()
    }

    fn parse_postfix(&mut self) -> Result<Expr, ParseError> {
        let mut expr = self.parse_primary()?;
        while self.at_punct(".") {
            // Member access only; member calls are a statement form.
            let Some(next) = self.peek_ahead(1) else { break };
            if next.kind != TokenKind::Ident {
                break;
            }
            if matches!(self.peek_ahead(2), Some(t) if t.is_punct("(")) {
                break;
            }
            self.advance();
            let (name, end) = self.expect_ident()?;
            let span = expr.span.join(end);
            expr = Expr::new(ExprKind::Member { recv: Box::new(expr), name }, span);
        }
        Ok(expr)
    }

    fn parse_primary(&mut self) -> Result<Expr, ParseError> {
        let Some(tok) = self.peek() else {
            return self.err("expression");
        };
        let span = tok.span;
        match tok.kind {
            TokenKind::Number => {
                let text = tok.lexeme.clone();
                self.advance();
                match text.parse::<f64>() {
                    Ok(v) => Ok(Expr::new(ExprKind::Num(v), span)),
                    Err(_) => Err(ParseError {
                        expected: "numeric literal".into(),
                        found: format!("{:?}", text),
                        span,
                    }),
                }
            }
            TokenKind::Str => {
                let value = lexer::decode_string(&tok.lexeme);
                self.advance();
                Ok(Expr::new(ExprKind::Str(value), span))
            }
            TokenKind::InterpSegment if tok.opens_string() => self.parse_interp(),
            TokenKind::Keyword => {
                let kind = match tok.lexeme.as_str() {
                    "true" => Some(ExprKind::Bool(true)),
                    "false" => Some(ExprKind::Bool(false)),
                    "null" => Some(ExprKind::Null),
                    _ => None,
                };
                match kind {
                    Some(kind) => {
                        self.advance();
                        Ok(Expr::new(kind, span))
                    }
                    None => self.err("expression"),
                }
            }
            TokenKind::Ident => {
                let name = tok.lexeme.clone();
                self.advance();
                if self.at_punct("(") {
                    self.advance();
                    let args = self.parse_call_args()?;
                    let end = self.expect_punct(")")?;
                    return Ok(Expr::new(ExprKind::Call { callee: name, args }, span.join(end)));
                }
                Ok(Expr::new(ExprKind::Ident(name), span))
            }
            TokenKind::Punct if tok.lexeme == "(" => {
                self.advance();
                let inner = self.parse_expr()?;
                let end = self.expect_punct(")")?;
                Ok(Expr::new(inner.kind, span.join(end)))
            }
            _ => self.err("expression"),
        }
    }

    fn parse_interp(&mut self) -> Result<Expr, ParseError> {
        let Some(first) = self.peek() else {
            return self.err("interpolated string");
        };
        let start = first.span;
        let mut end = first.span;
        let mut segments = vec![Segment::Lit(lexer::decode_segment(&first.lexeme))];
        let mut closed = first.closes_string();
        self.pos += 1;
        while !closed {
            let expr = self.parse_expr()?;
            segments.push(Segment::Expr(expr));
            match self.peek() {
                Some(t) if t.kind == TokenKind::InterpSegment && !t.opens_string() => {
                    segments.push(Segment::Lit(lexer::decode_segment(&t.lexeme)));
                    closed = t.closes_string();
                    end = t.span;
                    self.pos += 1;
                }
                _ => return self.err("string continuation"),
            }
        }
        Ok(Expr::new(ExprKind::Interp(segments), start.join(end)))
    }
}

fn describe_expr(kind: &ExprKind) -> &'static str {
    match kind {
        ExprKind::Str(_) => "string literal",
        ExprKind::Num(_) => "number",
        ExprKind::Bool(_) => "boolean",
        ExprKind::Null => "null",
        ExprKind::Ident(_) => "identifier",
        ExprKind::Member { .. } => "member access",
        ExprKind::Call { .. } => "call",
        ExprKind::Interp(_) => "interpolated string",
        ExprKind::Binary { .. } => "binary expression",
        ExprKind::Unary { .. } => "unary expression",
    }
}

fn expect_string_expr(expr: Expr, what: &str) -> Result<String, ParseError> {
    match expr.kind {
        ExprKind::Str(s) => Ok(s),
        other => Err(ParseError {
            expected: format!("{} as a string literal", what),
            found: describe_expr(&other).to_string(),
            span: expr.span,
        }),
    }
}

fn expect_name_expr(expr: Expr, what: &str) -> Result<String, ParseError> {
    match expr.kind {
        ExprKind::Ident(s) | ExprKind::Str(s) => Ok(s),
        other => Err(ParseError {
            expected: format!("{} as an identifier", what),
            found: describe_expr(&other).to_string(),
            span: expr.span,
        }),
    }
}

/// Enforce app-level invariants the grammar cannot express.
fn validate(app: &SmartAppAst) -> Result<(), ParseError> {
    let input_names: Vec<&str> = app.inputs().iter().map(|i| i.name.as_str()).collect();
    {
        let mut seen = std::collections::HashSet::new();
        for input in app.inputs() {
            if !seen.insert(input.name.as_str()) {
                return Err(ParseError {
                    expected: "unique input name".into(),
                    found: format!("{:?}", input.name),
                    span: input.span,
                });
            }
        }
    }
    let device_names: Vec<&str> = app.device_inputs().iter().map(|i| i.name.as_str()).collect();
    let mut result = Ok(());
    app.visit_stmts(&mut |_, stmt| {
        if result.is_err() {
            return;
        }
        match &stmt.kind {
            StmtKind::Subscribe { target, .. } => {
                let ok = match &target.kind {
                    ExprKind::Ident(n) => n == "location" || input_names.contains(&n.as_str()),
                    _ => false,
                };
                if !ok {
                    result = Err(ParseError {
                        expected: "subscription target naming a declared input or location".into(),
                        found: "other expression".into(),
                        span: stmt.span,
                    });
                }
            }
            StmtKind::DeviceCommand { device, .. } => {
                if !device_names.contains(&device.as_str()) {
                    result = Err(ParseError {
                        expected: "device command on a declared device input".into(),
                        found: format!("{:?}", device),
                        span: stmt.span,
                    });
                }
            }
            _ => {}
        }
    });
    result
}
