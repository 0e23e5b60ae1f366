//! The Resin language: lexer, parser, syntax tree and type checker.

pub mod ast;
pub mod lexer;
pub mod parser;
pub mod typeck;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use ast::{Program, RelOp, SignalType};
pub use lexer::{tokenize, Token, TokenKind};
pub use parser::parse;
pub use typeck::{typecheck, GroundAtom, SourceInfo, TargetInfo, TypedProgram};

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

/// Every diagnostic the front end can produce falls into one of these classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ErrorClass {
    IllegalCharacter,
    UnterminatedPath,
    UnexpectedToken,
    /// Input ended inside a statement.
    UnexpectedEof,
    ComparisonHead,
    UnknownAtom,
    /// A comparison over a `Probability` or `Boolean` source.
    ComparisonType,
    /// A comparison without a numeric source, or between two densities.
    InvalidComparison,
    /// A `Number` or `Density` source used as a plain literal.
    MissingComparison,
    RedeclaredSource,
    DuplicateChannel,
    UnsafeVariable,
    FunctionTerm,
    NonGroundSignal,
    NonStratified,
}

impl ErrorClass {
    pub fn code(self) -> &'static str {
        match self {
            ErrorClass::IllegalCharacter => "illegal-character",
            ErrorClass::UnterminatedPath => "unterminated-path",
            ErrorClass::UnexpectedToken => "unexpected-token",
            ErrorClass::UnexpectedEof => "unexpected-eof",
            ErrorClass::ComparisonHead => "comparison-head",
            ErrorClass::UnknownAtom => "unknown-atom",
            ErrorClass::ComparisonType => "comparison-type",
            ErrorClass::InvalidComparison => "invalid-comparison",
            ErrorClass::MissingComparison => "missing-comparison",
            ErrorClass::RedeclaredSource => "redeclared-source",
            ErrorClass::DuplicateChannel => "duplicate-channel",
            ErrorClass::UnsafeVariable => "unsafe-variable",
            ErrorClass::FunctionTerm => "function-term",
            ErrorClass::NonGroundSignal => "non-ground-signal",
            ErrorClass::NonStratified => "non-stratified",
        }
    }
}

impl fmt::Display for ErrorClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub class: ErrorClass,
    pub pos: Pos,
    pub message: String,
}

impl Diagnostic {
    /// A lexical diagnostic; the class is inferred from the message.
    pub(crate) fn new(pos: Pos, message: impl Into<String>) -> Self {
        let message = message.into();
        let class = if message.starts_with("unterminated") {
            ErrorClass::UnterminatedPath
        } else {
            ErrorClass::IllegalCharacter
        };
        Diagnostic {
            class,
            pos,
            message,
        }
    }

    pub(crate) fn with_class(class: ErrorClass, pos: Pos, message: impl Into<String>) -> Self {
        Diagnostic {
            class,
            pos,
            message: message.into(),
        }
    }

    /// Renders as `file:line:col: message [class]`.
    pub fn render(&self, file: &str) -> String {
        format!("{file}:{}: {} [{}]", self.pos, self.message, self.class)
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.pos, self.message)
    }
}

impl std::error::Error for Diagnostic {}

/// Tokenizes and parses `text`.
pub fn parse_str(text: &str) -> Result<Program, Diagnostic> {
    parse(&tokenize(text)?)
}

/// Runs the whole front end and returns every diagnostic on failure.
pub fn check(text: &str) -> Result<TypedProgram, Vec<Diagnostic>> {
    let program = parse_str(text).map_err(|d| vec![d])?;
    typecheck(program)
}
