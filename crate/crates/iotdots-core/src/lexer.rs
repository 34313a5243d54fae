//! Lexer for the smart-app DSL.
//!
//! Double-quoted strings support `${...}` interpolation. An interpolated
//! string lexes to a sequence of `InterpSegment` tokens (each covering the
//! literal text up to and including the `${` or the closing quote) with the
//! embedded expression tokens in between, so token spans still cover the
//! whole input. Comments are kept as tokens so the emitter can preserve them.

use crate::source::{SourceUnit, Span};
use std::fmt;
use thiserror::Error;

pub const KEYWORDS: &[&str] = &[
    "definition",
    "preferences",
    "section",
    "input",
    "def",
    "if",
    "else",
    "return",
    "true",
    "false",
    "null",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    Ident,
    Keyword,
    Str,
    /// One literal piece of an interpolated string, quote/brace delimiters included.
    InterpSegment,
    Number,
    Punct,
    Comment,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    pub lexeme: String,
    pub span: Span,
}

impl Token {
    pub fn is_punct(&self, p: &str) -> bool {
        self.kind == TokenKind::Punct && self.lexeme == p
    }

    pub fn is_keyword(&self, k: &str) -> bool {
        self.kind == TokenKind::Keyword && self.lexeme == k
    }

    /// True for a segment that opens an interpolated string (starts at `"`),
    /// false for a continuation segment (starts at `}`).
    pub fn opens_string(&self) -> bool {
        self.kind == TokenKind::InterpSegment && self.lexeme.starts_with('"')
    }

    /// True for a segment that closes its string (ends at `"`).
    pub fn closes_string(&self) -> bool {
        self.kind == TokenKind::InterpSegment && self.lexeme.ends_with('"')
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.lexeme)
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum LexError {
    #[error("unterminated string starting at byte {}", span.start)]
    UnterminatedString { span: Span },
    #[error("illegal character {ch:?} at byte {}", span.start)]
    IllegalChar { ch: char, span: Span },
}

impl LexError {
    pub fn span(&self) -> Span {
        match self {
            LexError::UnterminatedString { span } => *span,
            LexError::IllegalChar { span, .. } => *span,
        }
    }
}

/// Decode a plain string literal lexeme (quotes and escapes) to its value.
pub fn decode_string(lexeme: &str) -> String {
    let inner = lexeme
        .strip_prefix('"')
        .or_else(|| lexeme.strip_prefix('\''))
        .unwrap_or(lexeme);
    let inner = inner
        .strip_suffix('"')
        .or_else(|| inner.strip_suffix('\''))
        .unwrap_or(inner);
    decode_escapes(inner)
}

/// Decode the literal text of an interpolation segment, stripping the
/// delimiters the segment carries (`"` / `}` at the front, `${` / `"` at the end).
pub fn decode_segment(lexeme: &str) -> String {
    let mut s = lexeme;
    s = s.strip_prefix('"').or_else(|| s.strip_prefix('}')).unwrap_or(s);
    s = s.strip_suffix("${").or_else(|| s.strip_suffix('"')).unwrap_or(s);
    decode_escapes(s)
}

fn decode_escapes(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    let mut chars = raw.chars();
    while let Some(c) = chars.next() {
        if c == '\\' {
            match chars.next() {
                Some('n') => out.push('\n'),
                Some('t') => out.push('\t'),
                Some(other) => out.push(other),
                None => out.push('\\'),
            }
        } else {
            out.push(c);
        }
    }
    out
}

pub fn encode_string_inner(value: &str) -> String {
    let mut out = String::with_capacity(value.len());
    for c in value.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '$' => out.push_str("\\$"),
            other => out.push(other),
        }
    }
    out
}

struct Lexer<'a> {
    text: &'a str,
    bytes: &'a [u8],
    pos: usize,
    tokens: Vec<Token>,
    /// Depth of `${` interpolations we are inside while lexing code.
    interp_depth: usize,
}

pub fn tokenize(src: &SourceUnit) -> Result<Vec<Token>, LexError> {
    let mut lx = Lexer {
        text: &src.text,
        bytes: src.text.as_bytes(),
        pos: 0,
        tokens: Vec::new(),
        interp_depth: 0,
    };
    lx.run()?;
    Ok(lx.tokens)
}

impl<'a> Lexer<'a> {
    fn run(&mut self) -> Result<(), LexError> {
        while self.pos < self.bytes.len() {
            let c = self.peek();
            if c.is_ascii_whitespace() {
                self.pos += 1;
                continue;
            }
            if c == '/' && self.peek_at(1) == Some('/') {
                self.lex_comment();
                continue;
            }
            if c == '"' || c == '\'' {
                self.lex_string(c)?;
                continue;
            }
            if c == '}' && self.interp_depth > 0 {
                self.interp_depth -= 1;
                self.lex_string_continuation()?;
                continue;
            }
            if c.is_ascii_digit() {
                self.lex_number();
                continue;
            }
            if c.is_ascii_alphabetic() || c == '_' {
                self.lex_word();
                continue;
            }
            if self.lex_punct() {
                continue;
            }
            return Err(LexError::IllegalChar {
                ch: c,
                span: Span::new(self.pos, self.pos + c.len_utf8()),
            });
        }
        Ok(())
    }

    fn peek(&self) -> char {
        self.text[self.pos..].chars().next().unwrap_or('\0')
    }

    fn peek_at(&self, off: usize) -> Option<char> {
        self.text[self.pos..].chars().nth(off)
    }

    fn push(&mut self, kind: TokenKind, start: usize) {
        let lexeme = self.text[start..self.pos].to_string();
        self.tokens.push(Token { kind, lexeme, span: Span::new(start, self.pos) });
    }

    fn lex_comment(&mut self) {
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
            self.pos += 1;
        }
        self.push(TokenKind::Comment, start);
    }

    fn lex_number(&mut self) {
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.pos < self.bytes.len()
            && self.bytes[self.pos] == b'.'
            && self.pos + 1 < self.bytes.len()
            && self.bytes[self.pos + 1].is_ascii_digit()
        {
            self.pos += 1;
            while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
        }
        self.push(TokenKind::Number, start);
    }

    fn lex_word(&mut self) {
        let start = self.pos;
        while self.pos < self.bytes.len() {
            let b = self.bytes[self.pos];
            if b.is_ascii_alphanumeric() || b == b'_' {
                self.pos += 1;
            } else {
                break;
            }
        }
        let word = &self.text[start..self.pos];
        let kind = if KEYWORDS.contains(&word) { TokenKind::Keyword } else { TokenKind::Ident };
        self.push(kind, start);
    }

    fn lex_punct(&mut self) -> bool {
        const TWO: &[&str] = &["&&", "||", "==", "!=", "<=", ">="];
        if let Some(pair) = self.text.get(self.pos..self.pos + 2) {
            if TWO.contains(&pair) {
                let start = self.pos;
                self.pos += 2;
                self.push(TokenKind::Punct, start);
                return true;
            }
        }
        let c = self.peek();
        if "(){},:.=<>+-*/!;".contains(c) {
            let start = self.pos;
            self.pos += 1;
            self.push(TokenKind::Punct, start);
            return true;
        }
        false
    }

    /// Lex a string starting at its opening quote. Single-quoted strings and
    /// double-quoted strings without interpolation become one `Str` token.
    fn lex_string(&mut self, quote: char) -> Result<(), LexError> {
        let start = self.pos;
        self.pos += 1;
        self.scan_string_body(start, quote, quote == '"')
    }

    /// Lex the continuation of an interpolated string, starting at the `}`
    /// closing the interpolation hole.
    fn lex_string_continuation(&mut self) -> Result<(), LexError> {
        let start = self.pos;
        self.pos += 1;
        self.scan_string_body(start, '"', true)
    }

    fn scan_string_body(&mut self, start: usize, quote: char, interp: bool) -> Result<(), LexError> {
        while self.pos < self.bytes.len() {
            let c = self.peek();
            if c == '\\' {
                self.pos += 1;
                if self.pos < self.bytes.len() {
                    self.pos += self.peek().len_utf8();
                }
                continue;
            }
            if c == '\n' {
                break;
            }
            if c == quote {
                self.pos += 1;
                let began_plain = self.text[start..].starts_with(quote);
                let kind = if began_plain { TokenKind::Str } else { TokenKind::InterpSegment };
                self.push(kind, start);
                return Ok(());
            }
            if interp && c == '$' && self.peek_at(1) == Some('{') {
                self.pos += 2;
                self.push(TokenKind::InterpSegment, start);
                self.interp_depth += 1;
                return Ok(());
            }
            self.pos += c.len_utf8();
        }
        Err(LexError::UnterminatedString { span: Span::new(start, self.pos) })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(src: &str) -> Vec<(TokenKind, String)> {
        tokenize(&SourceUnit::inline(src))
            .unwrap()
            .into_iter()
            .map(|t| (t.kind, t.lexeme))
            .collect()
    }

    #[test]
    fn empty_input_yields_no_tokens() {
        assert!(tokenize(&SourceUnit::inline("")).unwrap().is_empty());
    }

    #[test]
    fn listing_input_line_tokens() {
        let toks = kinds(
            r#"input "phone", "phone", title: "Enter a phone number to get SMS", required: false"#,
        );
        assert_eq!(toks[0], (TokenKind::Keyword, "input".into()));
        assert_eq!(toks[1], (TokenKind::Str, "\"phone\"".into()));
        assert_eq!(toks[2], (TokenKind::Punct, ",".into()));
        // `required: false` lexes as identifier, punctuation, keyword.
        let n = toks.len();
        assert_eq!(toks[n - 3], (TokenKind::Ident, "required".into()));
        assert_eq!(toks[n - 2], (TokenKind::Punct, ":".into()));
        assert_eq!(toks[n - 1], (TokenKind::Keyword, "false".into()));
    }

    #[test]
    fn interpolated_string_splits_into_segments() {
        let toks = kinds(r#"log.iotdots("New recipient defined: ${phone}")"#);
        let seg: Vec<_> = toks.iter().filter(|t| t.0 == TokenKind::InterpSegment).collect();
        assert_eq!(seg.len(), 2);
        assert_eq!(seg[0].1, "\"New recipient defined: ${");
        assert_eq!(seg[1].1, "}\"");
        assert!(toks.iter().any(|t| *t == (TokenKind::Ident, "phone".into())));
    }

    #[test]
    fn double_interpolation() {
        let toks = kinds(r#""a ${x} b ${y} c""#);
        let lexemes: Vec<_> = toks.iter().map(|t| t.1.as_str()).collect();
        assert_eq!(lexemes, vec!["\"a ${", "x", "} b ${", "y", "} c\""]);
    }

    #[test]
    fn unterminated_string_errors_with_span() {
        let err = tokenize(&SourceUnit::inline("def x = \"oops\n")).unwrap_err();
        assert!(matches!(err, LexError::UnterminatedString { .. }));
        assert_eq!(err.span().start, 8);
    }

    #[test]
    fn illegal_character_errors() {
        let err = tokenize(&SourceUnit::inline("def a = 1 @")).unwrap_err();
        assert!(matches!(err, LexError::IllegalChar { ch: '@', .. }));
    }

    #[test]
    fn comments_are_tokens() {
        let toks = kinds("// hello\ndef x = 1");
        assert_eq!(toks[0], (TokenKind::Comment, "// hello".into()));
    }

    #[test]
    fn lexemes_plus_whitespace_reconstruct_input() {
        let src = "def handler(evt) {\n    light.on() // act\n    sendSms(phone, \"hi ${name}\")\n}\n";
        let toks = tokenize(&SourceUnit::inline(src)).unwrap();
        let mut rebuilt = String::new();
        let mut cursor = 0;
        for t in &toks {
            rebuilt.push_str(&src[cursor..t.span.start]);
            rebuilt.push_str(&t.lexeme);
            cursor = t.span.end;
        }
        rebuilt.push_str(&src[cursor..]);
        assert_eq!(rebuilt, src);
        // Gaps between tokens are whitespace only.
        let mut prev_end = 0;
        for t in &toks {
            assert!(src[prev_end..t.span.start].chars().all(|c| c.is_ascii_whitespace()));
            prev_end = t.span.end;
        }
    }

    // Independent character-class token counter, used as the count oracle.
    fn reference_token_count(src: &str) -> usize {
        #[derive(PartialEq)]
        enum Mode {
            Code,
            Str { interp: bool },
        }
        let mut count = 0usize;
        let mut mode = Mode::Code;
        let mut interp_depth = 0usize;
        let chars: Vec<char> = src.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            match mode {
                Mode::Code => {
                    let c = chars[i];
                    if c.is_ascii_whitespace() {
                        i += 1;
                    } else if c == '/' && chars.get(i + 1) == Some(&'/') {
                        while i < chars.len() && chars[i] != '\n' {
                            i += 1;
                        }
                        count += 1;
                    } else if c == '"' {
                        mode = Mode::Str { interp: true };
                        i += 1;
                    } else if c == '\'' {
                        mode = Mode::Str { interp: false };
                        i += 1;
                    } else if c == '}' && interp_depth > 0 {
                        interp_depth -= 1;
                        mode = Mode::Str { interp: true };
                        i += 1;
                    } else if c.is_ascii_alphanumeric() || c == '_' {
                        while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_' || chars[i] == '.')
                        {
                            if chars[i] == '.' {
                                break;
                            }
                            i += 1;
                        }
                        // trailing decimal digits of a float
                        if i + 1 < chars.len() && chars[i] == '.' && chars[i + 1].is_ascii_digit() && c.is_ascii_digit()
                        {
                            i += 1;
                            while i < chars.len() && chars[i].is_ascii_digit() {
                                i += 1;
                            }
                        }
                        count += 1;
                    } else {
                        let two: String = chars[i..chars.len().min(i + 2)].iter().collect();
                        if ["&&", "||", "==", "!=", "<=", ">="].contains(&two.as_str()) {
                            i += 2;
                        } else {
                            i += 1;
                        }
                        count += 1;
                    }
                }
                Mode::Str { interp } => {
                    let c = chars[i];
                    if c == '\\' {
                        i += 2;
                    } else if interp && c == '"' {
                        count += 1;
                        mode = Mode::Code;
                        i += 1;
                    } else if !interp && c == '\'' {
                        count += 1;
                        mode = Mode::Code;
                        i += 1;
                    } else if interp && c == '$' && chars.get(i + 1) == Some(&'{') {
                        count += 1;
                        interp_depth += 1;
                        mode = Mode::Code;
                        i += 2;
                    } else {
                        i += 1;
                    }
                }
            }
        }
        count
    }

    #[test]
    fn token_count_matches_reference_classifier() {
        let sample = "def tempHandler(evt) {\n    if (evt.value > threshold) { sendSms(phone, \"temp is ${evt.value}\") } // alert\n}";
        assert_eq!(sample.lines().count(), 3);
        let toks = tokenize(&SourceUnit::inline(sample)).unwrap();
        assert_eq!(toks.len(), reference_token_count(sample));
    }

    #[test]
    fn spans_are_ordered_and_nonoverlapping() {
        let src = "preferences { section(\"s\") { input \"a\", \"number\" } }";
        let toks = tokenize(&SourceUnit::inline(src)).unwrap();
        for w in toks.windows(2) {
            assert!(w[0].span.end <= w[1].span.start);
        }
    }
}
