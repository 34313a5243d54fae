//! AST for the smart-app DSL subset.
//!
//! Nodes keep their source span and any leading comment lines so the emitter
//! can reproduce a reviewable program. Spans of nodes synthesized by the
//! instrumenter are marked synthetic.

use crate::source::Span;

#[derive(Debug, Clone)]
pub struct SmartAppAst {
    /// Named arguments of the `definition(...)` metadata block, in order.
    pub definition: Vec<NamedArg>,
    pub preferences: Vec<SectionDecl>,
    /// All declared methods, lifecycle ones included, in declaration order.
    pub methods: Vec<MethodDecl>,
    /// Comment lines before the first item.
    pub leading: Vec<String>,
    /// Comment lines after the last item.
    pub trailing: Vec<String>,
    pub span: Span,
}

pub const LIFECYCLE_METHODS: &[&str] = &["installed", "updated", "initialize"];

impl SmartAppAst {
    pub fn method(&self, name: &str) -> Option<&MethodDecl> {
        self.methods.iter().find(|m| m.name == name)
    }

    pub fn installed(&self) -> Option<&MethodDecl> {
        self.method("installed")
    }

    pub fn updated(&self) -> Option<&MethodDecl> {
        self.method("updated")
    }

    pub fn initialize(&self) -> Option<&MethodDecl> {
        self.method("initialize")
    }

    /// App name from the definition block, when present.
    pub fn name(&self) -> Option<&str> {
        self.definition.iter().find(|a| a.name == "name").and_then(|a| match &a.value.kind {
            ExprKind::Str(s) => Some(s.as_str()),
            _ => None,
        })
    }

    /// All input declarations in document order, nested ones included.
    pub fn inputs(&self) -> Vec<&InputDecl> {
        let mut out = Vec::new();
        fn walk_items<'a>(items: &'a [SectionItem], out: &mut Vec<&'a InputDecl>) {
            for item in items {
                if let SectionItem::Input(input) = item {
                    out.push(input);
                    walk_items(&input.children, out);
                }
            }
        }
        for section in &self.preferences {
            walk_items(&section.items, &mut out);
        }
        out
    }

    pub fn input(&self, name: &str) -> Option<&InputDecl> {
        self.inputs().into_iter().find(|i| i.name == name)
    }

    pub fn device_inputs(&self) -> Vec<&InputDecl> {
        self.inputs()
            .into_iter()
            .filter(|i| i.input_type == InputType::DeviceCapability)
            .collect()
    }

    /// Visit every statement in every method body, depth first.
    pub fn visit_stmts<'a>(&'a self, f: &mut dyn FnMut(&'a MethodDecl, &'a Stmt)) {
        fn walk<'a>(method: &'a MethodDecl, stmts: &'a [Stmt], f: &mut dyn FnMut(&'a MethodDecl, &'a Stmt)) {
            for s in stmts {
                f(method, s);
                if let StmtKind::If { then_body, else_body, .. } = &s.kind {
                    walk(method, then_body, f);
                    if let Some(e) = else_body {
                        walk(method, e, f);
                    }
                }
            }
        }
        for m in &self.methods {
            walk(m, &m.body, f);
        }
    }

    pub fn count_subscriptions(&self) -> usize {
        let mut n = 0;
        self.visit_stmts(&mut |_, s| {
            if matches!(s.kind, StmtKind::Subscribe { .. }) {
                n += 1;
            }
        });
        n
    }

    pub fn count_device_commands(&self) -> usize {
        let mut n = 0;
        self.visit_stmts(&mut |_, s| {
            if matches!(s.kind, StmtKind::DeviceCommand { .. }) {
                n += 1;
            }
        });
        n
    }

    /// True if the app already carries instrumentation output.
    pub fn has_iotdots_marker(&self) -> bool {
        if self.leading.iter().any(|c| c.contains("instrumented-by: iotdots")) {
            return true;
        }
        let mut found = false;
        self.visit_stmts(&mut |_, s| {
            if let StmtKind::LogCall { level, .. } = &s.kind {
                if level == "iotdots" {
                    found = true;
                }
            }
        });
        if found {
            return true;
        }
        fn items_have_log(items: &[SectionItem]) -> bool {
            items.iter().any(|i| match i {
                SectionItem::Log { level, .. } => level == "iotdots",
                SectionItem::Input(input) => items_have_log(&input.children),
            })
        }
        self.preferences.iter().any(|s| items_have_log(&s.items))
    }
}

#[derive(Debug, Clone)]
pub struct NamedArg {
    pub name: String,
    pub value: Expr,
}

#[derive(Debug, Clone)]
pub struct SectionDecl {
    pub title: String,
    pub items: Vec<SectionItem>,
    pub leading: Vec<String>,
    pub span: Span,
}

#[derive(Debug, Clone)]
pub enum SectionItem {
    Input(InputDecl),
    /// A log statement inside a section; the runtime executes these during
    /// the installed and updated lifecycle phases.
    Log { level: String, arg: Expr, leading: Vec<String>, span: Span },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputType {
    DeviceCapability,
    Contact,
    Phone,
    Number,
    Enum,
    Text,
    Mode,
}

impl InputType {
    pub fn from_raw(raw: &str) -> Option<InputType> {
        if raw.starts_with("capability.") {
            return Some(InputType::DeviceCapability);
        }
        match raw {
            "contact" => Some(InputType::Contact),
            "phone" => Some(InputType::Phone),
            "number" | "decimal" => Some(InputType::Number),
            "enum" => Some(InputType::Enum),
            "text" | "string" => Some(InputType::Text),
            "mode" => Some(InputType::Mode),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct InputDecl {
    pub name: String,
    pub raw_type: String,
    pub input_type: InputType,
    /// Named arguments after the two positional ones, in source order.
    pub args: Vec<NamedArg>,
    pub children: Vec<SectionItem>,
    /// Whether the declaration used the parenthesized call form.
    pub parenthesized: bool,
    pub leading: Vec<String>,
    pub span: Span,
}

impl InputDecl {
    fn arg(&self, name: &str) -> Option<&Expr> {
        self.args.iter().find(|a| a.name == name).map(|a| &a.value)
    }

    pub fn title(&self) -> Option<&str> {
        match self.arg("title").map(|e| &e.kind) {
            Some(ExprKind::Str(s)) => Some(s.as_str()),
            _ => None,
        }
    }

    pub fn required(&self) -> bool {
        !matches!(self.arg("required").map(|e| &e.kind), Some(ExprKind::Bool(false)))
    }

    pub fn default_value(&self) -> Option<&Expr> {
        self.arg("defaultValue")
    }
}

#[derive(Debug, Clone)]
pub struct MethodDecl {
    pub name: String,
    pub params: Vec<String>,
    pub body: Vec<Stmt>,
    pub leading: Vec<String>,
    pub span: Span,
}

#[derive(Debug, Clone)]
pub struct Stmt {
    pub kind: StmtKind,
    pub leading: Vec<String>,
    pub span: Span,
}

impl Stmt {
    pub fn synthetic(kind: StmtKind) -> Self {
        Stmt { kind, leading: Vec::new(), span: Span::synthetic() }
    }
}

#[derive(Debug, Clone)]
pub enum StmtKind {
    Subscribe { target: Expr, attribute: String, handler: String },
    DeviceCommand { device: String, command: String, args: Vec<Expr> },
    Assign { declare: bool, name: String, value: Expr },
    If { cond: Expr, then_body: Vec<Stmt>, else_body: Option<Vec<Stmt>> },
    MethodCall { name: String, args: Vec<Expr> },
    Schedule { delay: Expr, handler: String },
    SendMessage { kind: MessageKind, args: Vec<Expr> },
    HttpCall { function: String, args: Vec<Expr> },
    LogCall { level: String, arg: Expr },
    Return { value: Option<Expr> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MessageKind {
    Push,
    Sms,
}

#[derive(Debug, Clone)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: Span,
}

impl Expr {
    pub fn new(kind: ExprKind, span: Span) -> Self {
        Expr { kind, span }
    }

    pub fn synthetic(kind: ExprKind) -> Self {
        Expr { kind, span: Span::synthetic() }
    }

    pub fn ident(name: &str) -> Self {
        Expr::synthetic(ExprKind::Ident(name.to_string()))
    }

    pub fn string(value: &str) -> Self {
        Expr::synthetic(ExprKind::Str(value.to_string()))
    }

    /// True if the expression mentions the `location` object anywhere.
    pub fn references_location(&self) -> bool {
        match &self.kind {
            ExprKind::Ident(n) => n == "location",
            ExprKind::Member { recv, .. } => recv.references_location(),
            ExprKind::Call { args, .. } => args.iter().any(|a| a.references_location()),
            ExprKind::Binary { lhs, rhs, .. } => lhs.references_location() || rhs.references_location(),
            ExprKind::Unary { operand, .. } => operand.references_location(),
            ExprKind::Interp(segments) => segments.iter().any(|s| match s {
                Segment::Expr(e) => e.references_location(),
                Segment::Lit(_) => false,
            }),
            _ => false,
        }
    }
}

#[derive(Debug, Clone)]
pub enum ExprKind {
    Str(String),
    Num(f64),
    Bool(bool),
    Null,
    Ident(String),
    Member { recv: Box<Expr>, name: String },
    Call { callee: String, args: Vec<Expr> },
    Interp(Vec<Segment>),
    Binary { op: BinOp, lhs: Box<Expr>, rhs: Box<Expr> },
    Unary { op: UnOp, operand: Box<Expr> },
}

#[derive(Debug, Clone)]
pub enum Segment {
    Lit(String),
    Expr(Expr),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Or,
    And,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    pub fn symbol(&self) -> &'static str {
        match self {
            BinOp::Or => "||",
            BinOp::And => "&&",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
        }
    }

    pub fn precedence(&self) -> u8 {
        match self {
            BinOp::Or => 1,
            BinOp::And => 2,
            BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 3,
            BinOp::Add | BinOp::Sub => 4,
            BinOp::Mul | BinOp::Div => 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnOp {
    Not,
    Neg,
}
