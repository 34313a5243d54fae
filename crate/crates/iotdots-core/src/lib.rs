//! Forensic toolkit for smart environments.
//!
//! The pipeline has two halves. At modification time, smart-app source in a
//! SmartThings-style DSL is parsed, scanned for forensically relevant points
//! over an inter-procedural control-flow graph, and rewritten with tracing
//! log calls. At investigation time, log records produced by running the
//! modified apps in a simulated environment are labeled, binarized into
//! per-slot state vectors, and scored against a Markov transition model to
//! classify policy-violating activities and malicious behavior.

pub mod source;
pub mod lexer;
pub mod ast;
pub mod parser;
pub mod emit;
pub mod icfg;
pub mod instrument;
pub mod device;
pub mod scenario;
pub mod sim;
pub mod logstore;
pub mod http;
pub mod schema;
pub mod markov;
pub mod detect;
pub mod metrics;
pub mod pipeline;
pub mod par;
