//! Discrete-event simulator and app interpreter.
//!
//! A run replays a scenario timeline against the bound apps: sensor changes
//! and commands mutate device state and dispatch events to subscribed
//! handlers, `runIn` callbacks land on a replace-on-reschedule queue, and
//! every `log.iotdots` call feeds the per-app batching transport. All
//! randomness lives in the timeline generator, so a run is a pure function
//! of the scenario.

use crate::ast::*;
use crate::device::invert_binary;
use crate::instrument::Category;
use crate::logstore::{flush_policy, BatchQueue, FlushReason, LocationMode, LogRecord, LogValue};
use crate::parser::{self, FrontendError};
use crate::scenario::{Actor, Scenario, TimelineAction, TruthWindow};
use crate::source::{SourceUnit, Span};
use std::collections::BTreeMap;
use thiserror::Error;

const MAX_DISPATCH_DEPTH: usize = 16;
const MAX_CALL_DEPTH: usize = 32;

#[derive(Debug, Clone, PartialEq)]
pub enum Effect {
    Command { ts: u64, by: String, device: String, command: String, args: Vec<LogValue> },
    Message { ts: u64, app: String, kind: String, args: Vec<String> },
    Http { ts: u64, app: String, function: String, args: Vec<String> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub logs: Vec<LogRecord>,
    pub effects: Vec<Effect>,
    pub truth: Vec<TruthWindow>,
    pub batch_count: usize,
    pub size_flushes: usize,
    pub interval_flushes: usize,
    pub shutdown_flushes: usize,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    /// Allow apps without the instrumentation marker (behavior-preservation
    /// tests run plain sources on purpose).
    pub allow_plain: bool,
    pub batch_size: usize,
    pub batch_age_ms: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            allow_plain: false,
            batch_size: crate::logstore::DEFAULT_BATCH_SIZE,
            batch_age_ms: crate::logstore::DEFAULT_BATCH_AGE_MS,
        }
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("app {app_id:?} does not parse: {message}")]
    BadApp { app_id: String, message: String },
    #[error("app {app_id:?} is not instrumented; pass allow_plain to run plain sources")]
    NotInstrumented { app_id: String },
    #[error("{app_id}: {message}")]
    Interpreter { app_id: String, message: String, span: Option<Span> },
    #[error("binding {input:?} of app {app_id:?} names unknown device {device:?}")]
    UnknownDevice { app_id: String, input: String, device: String },
}

impl SimError {
    fn interp(app: &str, message: impl Into<String>, span: Option<Span>) -> SimError {
        SimError::Interpreter { app_id: app.to_string(), message: message.into(), span }
    }
}

#[derive(Debug, Clone)]
pub struct PreparedApp {
    pub app_id: String,
    pub ast: SmartAppAst,
    pub bindings: BTreeMap<String, LogValue>,
}

/// Parse and bind every app in the scenario.
pub fn prepare_apps(scenario: &Scenario) -> Result<Vec<PreparedApp>, SimError> {
    scenario
        .apps
        .iter()
        .map(|instance| {
            let src = SourceUnit::new(instance.source.clone(), instance.app_id.clone());
            let ast = parser::parse_source(&src).map_err(|e: FrontendError| SimError::BadApp {
                app_id: instance.app_id.clone(),
                message: e.render(&src),
            })?;
            for input in ast.device_inputs() {
                match instance.bindings.get(&input.name) {
                    Some(LogValue::Text(device)) if scenario.device(device).is_some() => {}
                    Some(LogValue::Text(device)) => {
                        return Err(SimError::UnknownDevice {
                            app_id: instance.app_id.clone(),
                            input: input.name.clone(),
                            device: device.clone(),
                        })
                    }
                    _ => {
                        return Err(SimError::UnknownDevice {
                            app_id: instance.app_id.clone(),
                            input: input.name.clone(),
                            device: "<unbound>".to_string(),
                        })
                    }
                }
            }
            Ok(PreparedApp {
                app_id: instance.app_id.clone(),
                ast,
                bindings: instance.bindings.clone(),
            })
        })
        .collect()
}

/// An event delivered to handlers: `device` is None for location events.
#[derive(Debug, Clone, PartialEq)]
pub struct EventCtx {
    pub device: Option<String>,
    pub name: String,
    pub value: LogValue,
}

/// Mutable world state threaded through a run.
pub struct RuntimeContext {
    pub clock: u64,
    pub mode: LocationMode,
    pub devices: BTreeMap<String, BTreeMap<String, LogValue>>,
    pub effects: Vec<Effect>,
    pub logs: Vec<LogRecord>,
    pub batch_count: usize,
    pub size_flushes: usize,
    pub interval_flushes: usize,
    pub shutdown_flushes: usize,
    subs: BTreeMap<(String, String), Vec<(usize, String)>>,
    queues: BTreeMap<String, BatchQueue>,
    seqs: BTreeMap<String, u64>,
    /// Pending runIn callbacks; rescheduling a handler replaces its entry.
    pending: BTreeMap<(usize, String), u64>,
    current_controller: Option<String>,
    current_origin_mode: Option<LocationMode>,
    current_event: Option<EventCtx>,
    batch_size: usize,
    batch_age_ms: u64,
}

impl RuntimeContext {
    pub fn new(scenario: &Scenario, cfg: &RunConfig) -> RuntimeContext {
        let devices = scenario
            .topology
            .iter()
            .map(|d| (d.id.clone(), d.initial_attributes()))
            .collect();
        RuntimeContext {
            clock: 0,
            mode: LocationMode::Other,
            devices,
            effects: Vec::new(),
            logs: Vec::new(),
            batch_count: 0,
            size_flushes: 0,
            interval_flushes: 0,
            shutdown_flushes: 0,
            subs: BTreeMap::new(),
            queues: BTreeMap::new(),
            seqs: BTreeMap::new(),
            pending: BTreeMap::new(),
            current_controller: None,
            current_origin_mode: None,
            current_event: None,
            batch_size: cfg.batch_size,
            batch_age_ms: cfg.batch_age_ms,
        }
    }

    pub fn device_value(&self, device: &str, attribute: &str) -> Option<&LogValue> {
        self.devices.get(device).and_then(|attrs| attrs.get(attribute))
    }

    fn record_mode(&self) -> LocationMode {
        self.current_origin_mode.unwrap_or(self.mode)
    }

    fn next_seq(&mut self, app_id: &str) -> u64 {
        let seq = self.seqs.entry(app_id.to_string()).or_insert(0);
        *seq += 1;
        *seq
    }

    fn enqueue_record(&mut self, record: LogRecord) {
        let app_id = record.app_id.clone();
        let (batch_size, batch_age) = (self.batch_size, self.batch_age_ms);
        let queue = self
            .queues
            .entry(app_id.clone())
            .or_insert_with(|| BatchQueue::with_policy(app_id, batch_size, batch_age));
        queue.enqueue(record, self.clock);
        let now = self.clock;
        self.drain_queue_flushes(now);
    }

    fn drain_queue_flushes(&mut self, now: u64) {
        let mut flushed = Vec::new();
        for queue in self.queues.values_mut() {
            while let Some(batch) = flush_policy(queue, now) {
                flushed.push(batch);
            }
        }
        for batch in flushed {
            self.batch_count += 1;
            match batch.flush_reason {
                FlushReason::Size => self.size_flushes += 1,
                FlushReason::Interval => self.interval_flushes += 1,
                FlushReason::Shutdown => self.shutdown_flushes += 1,
            }
            self.logs.extend(batch.records);
        }
    }

    fn shutdown_flush(&mut self) {
        let mut flushed = Vec::new();
        for queue in self.queues.values_mut() {
            flushed.extend(queue.flush_all());
        }
        for batch in flushed {
            self.batch_count += 1;
            self.shutdown_flushes += 1;
            self.logs.extend(batch.records);
        }
    }
}

/// Run the scenario against prepared apps.
pub fn run(scenario: &Scenario, apps: &[PreparedApp], cfg: &RunConfig) -> Result<RunOutput, SimError> {
    if !cfg.allow_plain {
        for app in apps {
            if !app.ast.has_iotdots_marker() {
                return Err(SimError::NotInstrumented { app_id: app.app_id.clone() });
            }
        }
    }
    let mut ctx = RuntimeContext::new(scenario, cfg);

    // Installed lifecycle at t=0: section logs first, then the body.
    for idx in 0..apps.len() {
        run_lifecycle(scenario, apps, &mut ctx, idx, "installed")?;
    }

    let mut timeline_idx = 0usize;
    loop {
        let next_timeline = scenario.timeline.get(timeline_idx).map(|e| e.ts);
        let next_callback = ctx.pending.iter().map(|((i, h), ts)| (*ts, *i, h.clone())).min();
        let step = match (next_timeline, &next_callback) {
            (None, None) => break,
            (Some(t), None) => StepKind::Timeline(t),
            (None, Some((ts, i, h))) => StepKind::Callback(*ts, *i, h.clone()),
            (Some(t), Some((ts, i, h))) => {
                if *ts <= t {
                    StepKind::Callback(*ts, *i, h.clone())
                } else {
                    StepKind::Timeline(t)
                }
            }
        };
        match step {
            StepKind::Callback(ts, app_idx, handler) => {
                advance_clock(&mut ctx, ts);
                ctx.pending.remove(&(app_idx, handler.clone()));
                let event = EventCtx {
                    device: None,
                    name: "schedule".into(),
                    value: LogValue::Text("fired".into()),
                };
                call_method(scenario, apps, &mut ctx, app_idx, &handler, Some(&event), 0, 0)?;
            }
            StepKind::Timeline(ts) => {
                advance_clock(&mut ctx, ts);
                let event = scenario.timeline[timeline_idx].clone();
                timeline_idx += 1;
                apply_timeline_event(scenario, apps, &mut ctx, &event)?;
            }
        }
    }
    advance_clock(&mut ctx, scenario.duration_ms);
    ctx.shutdown_flush();

    Ok(RunOutput {
        logs: ctx.logs,
        effects: ctx.effects,
        truth: scenario.truth.clone(),
        batch_count: ctx.batch_count,
        size_flushes: ctx.size_flushes,
        interval_flushes: ctx.interval_flushes,
        shutdown_flushes: ctx.shutdown_flushes,
    })
}

enum StepKind {
    Timeline(u64),
    Callback(u64, usize, String),
}

fn advance_clock(ctx: &mut RuntimeContext, to: u64) {
    if to > ctx.clock {
        ctx.clock = to;
    }
    let now = ctx.clock;
    ctx.drain_queue_flushes(now);
}

fn run_lifecycle(
    scenario: &Scenario,
    apps: &[PreparedApp],
    ctx: &mut RuntimeContext,
    app_idx: usize,
    phase: &str,
) -> Result<(), SimError> {
    // Section-level logs capture configured inputs during installed/updated.
    for section in &apps[app_idx].ast.preferences {
        run_section_logs(scenario, apps, ctx, app_idx, &section.items)?;
    }
    if apps[app_idx].ast.method(phase).is_some() {
        call_method(scenario, apps, ctx, app_idx, phase, None, 0, 0)?;
    }
    Ok(())
}

fn run_section_logs(
    scenario: &Scenario,
    apps: &[PreparedApp],
    ctx: &mut RuntimeContext,
    app_idx: usize,
    items: &[SectionItem],
) -> Result<(), SimError> {
    for item in items {
        match item {
            SectionItem::Log { level, arg, .. } => {
                if level == "iotdots" {
                    let mut env = Env::new(None);
                    let payload = eval_to_text(scenario, apps, ctx, app_idx, &mut env, arg)?;
                    emit_iotdots_record(scenario, apps, ctx, app_idx, &payload)?;
                }
            }
            SectionItem::Input(input) => {
                run_section_logs(scenario, apps, ctx, app_idx, &input.children)?;
            }
        }
    }
    Ok(())
}

fn apply_timeline_event(
    scenario: &Scenario,
    apps: &[PreparedApp],
    ctx: &mut RuntimeContext,
    event: &crate::scenario::TimelineEvent,
) -> Result<(), SimError> {
    match &event.action {
        TimelineAction::SensorChange { device, attribute, value } => {
            if is_frozen(scenario, device, ctx.clock) {
                return Ok(());
            }
            set_device_attribute(scenario, apps, ctx, device, attribute, value.clone(), 0)?;
        }
        TimelineAction::Command { device, command, args, origin_mode, controller } => {
            let (by, controller_id) = match &event.actor {
                Actor::User { id } => {
                    let ctrl = controller
                        .clone()
                        .or_else(|| scenario.controller_of(id).map(str::to_string));
                    (format!("user:{id}"), ctrl)
                }
                Actor::App { id } => (format!("app:{id}"), None),
                Actor::Env => ("env".to_string(), None),
            };
            ctx.current_controller = controller_id;
            ctx.current_origin_mode = *origin_mode;
            ctx.effects.push(Effect::Command {
                ts: ctx.clock,
                by: by.clone(),
                device: device.clone(),
                command: command.clone(),
                args: args.clone(),
            });
            // External app actors are treated as instrumented: their issued
            // commands produce Action records under their own app id.
            if let Actor::App { id } = &event.actor {
                let seq = ctx.next_seq(id);
                let record = LogRecord {
                    ts: ctx.clock,
                    app_id: id.clone(),
                    seq,
                    kind: Category::Action,
                    device_id: Some(device.clone()),
                    attribute: Some(command.clone()),
                    value: LogValue::Text(command.clone()),
                    location_mode: ctx.record_mode(),
                    controller_id: None,
                    batch_id: String::new(),
                };
                ctx.enqueue_record(record);
            }
            let device_type = scenario
                .device(device)
                .map(|d| d.device_type)
                .ok_or_else(|| SimError::interp("timeline", format!("unknown device {device:?}"), None))?;
            if !is_frozen(scenario, device, ctx.clock) {
                if let Some((attribute, value)) = device_type.command_effect(command, args) {
                    set_device_attribute(scenario, apps, ctx, device, &attribute, value, 0)?;
                }
            }
            ctx.current_controller = None;
            ctx.current_origin_mode = None;
        }
        TimelineAction::ModeChange { mode } => {
            if ctx.mode != *mode {
                ctx.mode = *mode;
                let event = EventCtx {
                    device: None,
                    name: "mode".into(),
                    value: LogValue::Text(mode_name(*mode).into()),
                };
                dispatch(scenario, apps, ctx, "@location", "mode", event, 0)?;
            }
        }
    }
    Ok(())
}

fn mode_name(mode: LocationMode) -> &'static str {
    match mode {
        LocationMode::Office => "Office",
        LocationMode::Other => "Other",
    }
}

fn is_frozen(scenario: &Scenario, device: &str, clock: u64) -> bool {
    scenario
        .tampered
        .iter()
        .any(|t| t.device == device && clock >= t.from && clock < t.to)
}

/// Set a device attribute; a real change dispatches a device event.
fn set_device_attribute(
    scenario: &Scenario,
    apps: &[PreparedApp],
    ctx: &mut RuntimeContext,
    device: &str,
    attribute: &str,
    value: LogValue,
    depth: usize,
) -> Result<(), SimError> {
    let Some(attrs) = ctx.devices.get_mut(device) else {
        return Err(SimError::interp("runtime", format!("unknown device {device:?}"), None));
    };
    let changed = attrs.get(attribute) != Some(&value);
    if !changed {
        return Ok(());
    }
    attrs.insert(attribute.to_string(), value.clone());
    let event = EventCtx { device: Some(device.to_string()), name: attribute.to_string(), value };
    dispatch(scenario, apps, ctx, device, attribute, event, depth)
}

/// Deliver an event to every handler subscribed to (source, attribute).
fn dispatch(
    scenario: &Scenario,
    apps: &[PreparedApp],
    ctx: &mut RuntimeContext,
    source: &str,
    attribute: &str,
    event: EventCtx,
    depth: usize,
) -> Result<(), SimError> {
    if depth > MAX_DISPATCH_DEPTH {
        return Err(SimError::interp("runtime", "event cascade too deep", None));
    }
    let key = (source.to_string(), attribute.to_string());
    let Some(handlers) = ctx.subs.get(&key).cloned() else {
        return Ok(());
    };
    for (app_idx, handler) in handlers {
        call_method(scenario, apps, ctx, app_idx, &handler, Some(&event), depth + 1, 0)?;
    }
    Ok(())
}

struct Env {
    locals: BTreeMap<String, Value>,
    event: Option<EventCtx>,
    event_param: Option<String>,
}

impl Env {
    fn new(event: Option<EventCtx>) -> Env {
        Env { locals: BTreeMap::new(), event, event_param: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Value {
    Bool(bool),
    Data(LogValue),
    Device(String),
    Location,
    Null,
}

impl Value {
    fn as_text(&self) -> String {
        match self {
            Value::Bool(b) => b.to_string(),
            Value::Data(v) => v.as_text(),
            Value::Device(id) => id.clone(),
            Value::Location => "location".to_string(),
            Value::Null => "null".to_string(),
        }
    }

    fn as_number(&self) -> Option<f64> {
        match self {
            Value::Data(v) => v.as_number(),
            _ => None,
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn call_method(
    scenario: &Scenario,
    apps: &[PreparedApp],
    ctx: &mut RuntimeContext,
    app_idx: usize,
    method_name: &str,
    event: Option<&EventCtx>,
    dispatch_depth: usize,
    call_depth: usize,
) -> Result<(), SimError> {
    let app = &apps[app_idx];
    if call_depth > MAX_CALL_DEPTH {
        return Err(SimError::interp(&app.app_id, "method call recursion too deep", None));
    }
    let Some(method) = app.ast.method(method_name) else {
        return Err(SimError::interp(&app.app_id, format!("unknown method {method_name:?}"), None));
    };
    let mut env = Env::new(event.cloned());
    if let Some(param) = method.params.first() {
        env.event_param = Some(param.clone());
    }
    let prev_event = std::mem::replace(&mut ctx.current_event, event.cloned());
    let result = exec_block(scenario, apps, ctx, app_idx, &mut env, &method.body, dispatch_depth, call_depth);
    ctx.current_event = prev_event;
    result?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn exec_block(
    scenario: &Scenario,
    apps: &[PreparedApp],
    ctx: &mut RuntimeContext,
    app_idx: usize,
    env: &mut Env,
    stmts: &[Stmt],
    dispatch_depth: usize,
    call_depth: usize,
) -> Result<bool, SimError> {
    for stmt in stmts {
        if exec_stmt(scenario, apps, ctx, app_idx, env, stmt, dispatch_depth, call_depth)? {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Execute one statement; Ok(true) means a return was hit.
#[allow(clippy::too_many_arguments)]
fn exec_stmt(
    scenario: &Scenario,
    apps: &[PreparedApp],
    ctx: &mut RuntimeContext,
    app_idx: usize,
    env: &mut Env,
    stmt: &Stmt,
    dispatch_depth: usize,
    call_depth: usize,
) -> Result<bool, SimError> {
    let app_id = apps[app_idx].app_id.clone();
    match &stmt.kind {
        StmtKind::Subscribe { target, attribute, handler } => {
            let source = match &target.kind {
                ExprKind::Ident(name) if name == "location" => "@location".to_string(),
                ExprKind::Ident(name) => {
                    match resolve_binding(&apps[app_idx], name) {
                        Some(LogValue::Text(device)) => device,
                        _ => {
                            return Err(SimError::interp(
                                &app_id,
                                format!("subscription target {name:?} is not bound to a device"),
                                Some(stmt.span),
                            ))
                        }
                    }
                }
                _ => {
                    return Err(SimError::interp(&app_id, "unsupported subscription target", Some(stmt.span)))
                }
            };
            ctx.subs
                .entry((source, attribute.clone()))
                .or_default()
                .push((app_idx, handler.clone()));
        }
        StmtKind::DeviceCommand { device, command, args } => {
            let Some(LogValue::Text(device_id)) = resolve_binding(&apps[app_idx], device) else {
                return Err(SimError::interp(
                    &app_id,
                    format!("device input {device:?} is not bound"),
                    Some(stmt.span),
                ));
            };
            let mut arg_values = Vec::new();
            for arg in args {
                arg_values.push(eval_to_logvalue(scenario, apps, ctx, app_idx, env, arg)?);
            }
            let device_type = scenario
                .device(&device_id)
                .map(|d| d.device_type)
                .ok_or_else(|| SimError::interp(&app_id, format!("unknown device {device_id:?}"), Some(stmt.span)))?;
            ctx.effects.push(Effect::Command {
                ts: ctx.clock,
                by: app_id.clone(),
                device: device_id.clone(),
                command: command.clone(),
                args: arg_values.clone(),
            });
            let Some((attribute, value)) = device_type.command_effect(command, &arg_values) else {
                return Err(SimError::interp(
                    &app_id,
                    format!("device {device_id:?} does not support command {command:?}"),
                    Some(stmt.span),
                ));
            };
            if !is_frozen(scenario, &device_id, ctx.clock) {
                set_device_attribute(scenario, apps, ctx, &device_id, &attribute, value, dispatch_depth)?;
            }
        }
        StmtKind::Assign { name, value, .. } => {
            let v = eval(scenario, apps, ctx, app_idx, env, value)?;
            env.locals.insert(name.clone(), v);
        }
        StmtKind::If { cond, then_body, else_body } => {
            let c = eval(scenario, apps, ctx, app_idx, env, cond)?;
            let Value::Bool(flag) = c else {
                return Err(SimError::interp(&app_id, "if condition is not boolean", Some(cond.span)));
            };
            let body = if flag { Some(then_body) } else { else_body.as_ref() };
            if let Some(body) = body {
                if exec_block(scenario, apps, ctx, app_idx, env, body, dispatch_depth, call_depth)? {
                    return Ok(true);
                }
            }
        }
        StmtKind::MethodCall { name, args } => {
            if !args.is_empty() {
                return Err(SimError::interp(
                    &app_id,
                    format!("local call {name:?} with arguments is not supported"),
                    Some(stmt.span),
                ));
            }
            let event = env.event.clone();
            call_method(scenario, apps, ctx, app_idx, name, event.as_ref(), dispatch_depth, call_depth + 1)?;
        }
        StmtKind::Schedule { delay, handler } => {
            let d = eval(scenario, apps, ctx, app_idx, env, delay)?;
            let Some(seconds) = d.as_number() else {
                return Err(SimError::interp(&app_id, "runIn delay is not numeric", Some(delay.span)));
            };
            let due = ctx.clock + (seconds.max(0.0) * 1000.0) as u64;
            // Rescheduling the same handler replaces the pending callback.
            ctx.pending.insert((app_idx, handler.clone()), due);
        }
        StmtKind::SendMessage { kind, args } => {
            let mut rendered = Vec::new();
            for arg in args {
                rendered.push(eval_to_text(scenario, apps, ctx, app_idx, env, arg)?);
            }
            let kind = match kind {
                MessageKind::Push => "push",
                MessageKind::Sms => "sms",
            };
            ctx.effects.push(Effect::Message {
                ts: ctx.clock,
                app: app_id.clone(),
                kind: kind.to_string(),
                args: rendered,
            });
        }
        StmtKind::HttpCall { function, args } => {
            let mut rendered = Vec::new();
            for arg in args {
                rendered.push(eval_to_text(scenario, apps, ctx, app_idx, env, arg)?);
            }
            ctx.effects.push(Effect::Http {
                ts: ctx.clock,
                app: app_id.clone(),
                function: function.clone(),
                args: rendered,
            });
        }
        StmtKind::LogCall { level, arg } => {
            if level == "iotdots" {
                let payload = eval_to_text(scenario, apps, ctx, app_idx, env, arg)?;
                emit_iotdots_record(scenario, apps, ctx, app_idx, &payload)?;
            } else {
                // debug/info/warn logs are interpreter no-ops
                let _ = eval_to_text(scenario, apps, ctx, app_idx, env, arg)?;
            }
        }
        StmtKind::Return { value } => {
            if let Some(v) = value {
                let _ = eval(scenario, apps, ctx, app_idx, env, v)?;
            }
            return Ok(true);
        }
    }
    Ok(false)
}

fn resolve_binding(app: &PreparedApp, input: &str) -> Option<LogValue> {
    if let Some(v) = app.bindings.get(input) {
        return Some(v.clone());
    }
    let decl = app.ast.input(input)?;
    match decl.default_value().map(|e| &e.kind) {
        Some(ExprKind::Num(n)) => Some(LogValue::Number(*n)),
        Some(ExprKind::Str(s)) => Some(LogValue::Text(s.clone())),
        _ => None,
    }
}

fn eval_to_text(
    scenario: &Scenario,
    apps: &[PreparedApp],
    ctx: &mut RuntimeContext,
    app_idx: usize,
    env: &mut Env,
    expr: &Expr,
) -> Result<String, SimError> {
    Ok(eval(scenario, apps, ctx, app_idx, env, expr)?.as_text())
}

fn eval_to_logvalue(
    scenario: &Scenario,
    apps: &[PreparedApp],
    ctx: &mut RuntimeContext,
    app_idx: usize,
    env: &mut Env,
    expr: &Expr,
) -> Result<LogValue, SimError> {
    let v = eval(scenario, apps, ctx, app_idx, env, expr)?;
    Ok(match v {
        Value::Data(d) => d,
        other => LogValue::Text(other.as_text()),
    })
}

fn eval(
    scenario: &Scenario,
    apps: &[PreparedApp],
    ctx: &mut RuntimeContext,
    app_idx: usize,
    env: &mut Env,
    expr: &Expr,
) -> Result<Value, SimError> {
    let app = &apps[app_idx];
    let app_id = app.app_id.clone();
    match &expr.kind {
        ExprKind::Str(s) => Ok(Value::Data(LogValue::Text(s.clone()))),
        ExprKind::Num(n) => Ok(Value::Data(LogValue::Number(*n))),
        ExprKind::Bool(b) => Ok(Value::Bool(*b)),
        ExprKind::Null => Ok(Value::Null),
        ExprKind::Ident(name) => {
            if let Some(v) = env.locals.get(name) {
                return Ok(v.clone());
            }
            if env.event_param.as_deref() == Some(name.as_str()) {
                // The event object itself; only member access is meaningful.
                return Ok(Value::Data(LogValue::Text("<event>".into())));
            }
            if name == "location" {
                return Ok(Value::Location);
            }
            if let Some(decl) = app.ast.input(name) {
                let bound = resolve_binding(app, name);
                return match (decl.input_type, bound) {
                    (InputType::DeviceCapability, Some(LogValue::Text(id))) => Ok(Value::Device(id)),
                    (InputType::DeviceCapability, _) => Err(SimError::interp(
                        &app_id,
                        format!("device input {name:?} is not bound"),
                        Some(expr.span),
                    )),
                    (_, Some(v)) => Ok(Value::Data(v)),
                    (_, None) => Ok(Value::Data(LogValue::Text(String::new()))),
                };
            }
            Err(SimError::interp(&app_id, format!("unbound identifier {name:?}"), Some(expr.span)))
        }
        ExprKind::Member { recv, name } => {
            // evt members resolve against the current event
            if let ExprKind::Ident(ident) = &recv.kind {
                if env.event_param.as_deref() == Some(ident.as_str()) {
                    let Some(event) = env.event.clone() else {
                        return Err(SimError::interp(&app_id, "no event in scope", Some(expr.span)));
                    };
                    return match name.as_str() {
                        "value" => Ok(Value::Data(event.value.clone())),
                        "name" => Ok(Value::Data(LogValue::Text(event.name.clone()))),
                        "device" | "deviceId" => Ok(Value::Data(LogValue::Text(
                            event.device.clone().unwrap_or_else(|| "location".into()),
                        ))),
                        other => Err(SimError::interp(
                            &app_id,
                            format!("unsupported event member {other:?}"),
                            Some(expr.span),
                        )),
                    };
                }
            }
            let base = eval(scenario, apps, ctx, app_idx, env, recv)?;
            match (&base, name.as_str()) {
                (Value::Location, "mode") => {
                    Ok(Value::Data(LogValue::Text(mode_name(ctx.mode).into())))
                }
                (Value::Device(id), "id") => Ok(Value::Data(LogValue::Text(id.clone()))),
                (Value::Device(id), attr) => match ctx.device_value(id, attr) {
                    Some(v) => Ok(Value::Data(v.clone())),
                    None => Err(SimError::interp(
                        &app_id,
                        format!("device {id:?} has no attribute {attr:?}"),
                        Some(expr.span),
                    )),
                },
                _ => Err(SimError::interp(
                    &app_id,
                    format!("unsupported member access .{name}"),
                    Some(expr.span),
                )),
            }
        }
        ExprKind::Call { callee, .. } => Err(SimError::interp(
            &app_id,
            format!("call {callee:?} is not valid in expressions"),
            Some(expr.span),
        )),
        ExprKind::Interp(segments) => {
            let mut out = String::new();
            for seg in segments {
                match seg {
                    Segment::Lit(text) => out.push_str(text),
                    Segment::Expr(e) => {
                        out.push_str(&eval_to_text(scenario, apps, ctx, app_idx, env, e)?)
                    }
                }
            }
            Ok(Value::Data(LogValue::Text(out)))
        }
        ExprKind::Binary { op, lhs, rhs } => {
            let l = eval(scenario, apps, ctx, app_idx, env, lhs)?;
            match op {
                BinOp::And | BinOp::Or => {
                    let Value::Bool(lb) = l else {
                        return Err(SimError::interp(&app_id, "non-boolean operand", Some(lhs.span)));
                    };
                    // short-circuit
                    if (*op == BinOp::And && !lb) || (*op == BinOp::Or && lb) {
                        return Ok(Value::Bool(lb));
                    }
                    let r = eval(scenario, apps, ctx, app_idx, env, rhs)?;
                    let Value::Bool(rb) = r else {
                        return Err(SimError::interp(&app_id, "non-boolean operand", Some(rhs.span)));
                    };
                    Ok(Value::Bool(rb))
                }
                BinOp::Eq | BinOp::Ne => {
                    let r = eval(scenario, apps, ctx, app_idx, env, rhs)?;
                    let equal = match (l.as_number(), r.as_number()) {
                        (Some(a), Some(b)) => a == b,
                        _ => l.as_text() == r.as_text(),
                    };
                    Ok(Value::Bool(if *op == BinOp::Eq { equal } else { !equal }))
                }
                BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => {
                    let r = eval(scenario, apps, ctx, app_idx, env, rhs)?;
                    let (Some(a), Some(b)) = (l.as_number(), r.as_number()) else {
                        return Err(SimError::interp(
                            &app_id,
                            "comparison needs numeric operands",
                            Some(expr.span),
                        ));
                    };
                    Ok(Value::Bool(match op {
                        BinOp::Lt => a < b,
                        BinOp::Le => a <= b,
                        BinOp::Gt => a > b,
                        _ => a >= b,
                    }))
                }
                BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div => {
                    let r = eval(scenario, apps, ctx, app_idx, env, rhs)?;
                    match (l.as_number(), r.as_number()) {
                        (Some(a), Some(b)) => {
                            let v = match op {
                                BinOp::Add => a + b,
                                BinOp::Sub => a - b,
                                BinOp::Mul => a * b,
                                _ => a / b,
                            };
                            Ok(Value::Data(LogValue::Number(v)))
                        }
                        _ if *op == BinOp::Add => {
                            Ok(Value::Data(LogValue::Text(format!("{}{}", l.as_text(), r.as_text()))))
                        }
                        _ => Err(SimError::interp(
                            &app_id,
                            "arithmetic needs numeric operands",
                            Some(expr.span),
                        )),
                    }
                }
            }
        }
        ExprKind::Unary { op, operand } => {
            let v = eval(scenario, apps, ctx, app_idx, env, operand)?;
            match op {
                UnOp::Not => match v {
                    Value::Bool(b) => Ok(Value::Bool(!b)),
                    _ => Err(SimError::interp(&app_id, "! needs a boolean", Some(operand.span))),
                },
                UnOp::Neg => match v.as_number() {
                    Some(n) => Ok(Value::Data(LogValue::Number(-n))),
                    None => Err(SimError::interp(&app_id, "- needs a number", Some(operand.span))),
                },
            }
        }
    }
}

/// Turn an evaluated `log.iotdots` payload into a log record. The payload
/// template is `<Category>: <name>=<value>`; runtime context supplies the
/// authoritative device, attribute, and value fields per category.
fn emit_iotdots_record(
    scenario: &Scenario,
    apps: &[PreparedApp],
    ctx: &mut RuntimeContext,
    app_idx: usize,
    payload: &str,
) -> Result<(), SimError> {
    let app = &apps[app_idx];
    let app_id = app.app_id.clone();
    let (kind_str, rest) = payload
        .split_once(": ")
        .ok_or_else(|| SimError::interp(&app_id, format!("malformed iotdots payload {payload:?}"), None))?;
    let kind = Category::parse(kind_str)
        .ok_or_else(|| SimError::interp(&app_id, format!("unknown log category {kind_str:?}"), None))?;
    let (name, value_text) = rest.split_once('=').unwrap_or((rest, ""));

    let mut device_id: Option<String> = None;
    let attribute: Option<String>;
    let mut value: LogValue = match value_text.parse::<f64>() {
        Ok(n) => LogValue::Number(n),
        Err(_) => LogValue::Text(value_text.to_string()),
    };

    match kind {
        Category::Event => {
            if let Some(event) = &ctx.current_event {
                device_id = event.device.clone();
                attribute = Some(event.name.clone());
                value = event.value.clone();
            } else {
                attribute = Some(name.to_string());
            }
            // A false-data-injection window inverts this app's reports.
            if let Some(dev) = &device_id {
                let inverted = scenario.inverted.iter().any(|w| {
                    w.app_id == app_id && &w.device == dev && ctx.clock >= w.from && ctx.clock < w.to
                });
                if inverted {
                    value = invert_binary(&value);
                }
            }
        }
        Category::Action => {
            // name is `<input>.<command>`
            if let Some((input, command)) = name.rsplit_once('.') {
                if let Some(LogValue::Text(id)) = resolve_binding(app, input) {
                    device_id = Some(id);
                }
                attribute = Some(command.to_string());
            } else {
                attribute = Some(name.to_string());
            }
        }
        Category::UserInput => {
            attribute = Some(name.to_string());
            if let Some(decl) = app.ast.input(name) {
                if decl.input_type == InputType::DeviceCapability {
                    if let Some(LogValue::Text(id)) = resolve_binding(app, name) {
                        device_id = Some(id);
                    }
                }
            }
        }
        Category::DeviceInfo => {
            attribute = Some("device".to_string());
            if let Some(LogValue::Text(id)) = resolve_binding(app, name) {
                device_id = Some(id);
            }
        }
        Category::TimeLocation | Category::SinkInternet | Category::SinkMessage => {
            attribute = Some(name.to_string());
        }
    }

    let seq = ctx.next_seq(&app_id);
    let record = LogRecord {
        ts: ctx.clock,
        app_id,
        seq,
        kind,
        device_id,
        attribute,
        value,
        location_mode: ctx.record_mode(),
        controller_id: ctx.current_controller.clone(),
        batch_id: String::new(),
    };
    ctx.enqueue_record(record);
    Ok(())
}

/// Run one handler against a context, as the dispatcher would.
pub fn eval_handler(
    scenario: &Scenario,
    apps: &[PreparedApp],
    ctx: &mut RuntimeContext,
    app_idx: usize,
    handler: &str,
    event: &EventCtx,
) -> Result<(), SimError> {
    call_method(scenario, apps, ctx, app_idx, handler, Some(event), 0, 0)
}
