//! Source text handling: units of input and byte spans into them.

use std::fmt;
use std::path::Path;

/// A unit of smart-app source text together with where it came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceUnit {
    pub text: String,
    pub origin: String,
}

impl SourceUnit {
    pub fn new(text: impl Into<String>, origin: impl Into<String>) -> Self {
        let origin = origin.into();
        assert!(!origin.is_empty(), "source origin must be non-empty");
        Self { text: text.into(), origin }
    }

    pub fn inline(text: impl Into<String>) -> Self {
        Self::new(text, "<inline>")
    }

    pub fn from_file(path: &Path) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(Self::new(text, path.display().to_string()))
    }

    /// Translate a byte offset into 1-based line and column numbers.
    pub fn line_col(&self, offset: usize) -> (usize, usize) {
        let mut line = 1;
        let mut col = 1;
        for (i, ch) in self.text.char_indices() {
            if i >= offset {
                break;
            }
            if ch == '\n' {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
        }
        (line, col)
    }
}

/// Half-open byte range into a source unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Self { start, end }
    }

    /// Span for nodes synthesized by the instrumenter rather than parsed.
    pub fn synthetic() -> Self {
        Self { start: usize::MAX, end: usize::MAX }
    }

    pub fn is_synthetic(&self) -> bool {
        self.start == usize::MAX
    }

    pub fn join(self, other: Span) -> Span {
        if self.is_synthetic() {
            return other;
        }
        if other.is_synthetic() {
            return self;
        }
        Span::new(self.start.min(other.start), self.end.max(other.end))
    }

    pub fn slice<'a>(&self, text: &'a str) -> &'a str {
        &text[self.start..self.end]
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.start, self.end)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_col_counts_from_one() {
        let src = SourceUnit::inline("ab\ncd");
        assert_eq!(src.line_col(0), (1, 1));
        assert_eq!(src.line_col(1), (1, 2));
        assert_eq!(src.line_col(3), (2, 1));
        assert_eq!(src.line_col(4), (2, 2));
    }

    #[test]
    fn span_join_ignores_synthetic() {
        let a = Span::new(2, 5);
        assert_eq!(a.join(Span::synthetic()), a);
        assert_eq!(Span::synthetic().join(a), a);
        assert_eq!(a.join(Span::new(7, 9)), Span::new(2, 9));
    }
}
