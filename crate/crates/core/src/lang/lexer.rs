use std::fmt;

use super::ast::{RelOp, SignalType};
use super::{Diagnostic, Pos};

#[derive(Debug, Clone, PartialEq)]
pub enum TokenKind {
    /// Lower-case identifier, `[a-z][a-zA-Z0-9_]*`.
    Id(String),
    /// Variable, `[A-Z][a-zA-Z0-9_]*`.
    Var(String),
    Number(f64),
    /// Contents of a quoted channel path, without the quotes.
    Path(String),
    Type(SignalType),
    Source,
    Target,
    If,
    And,
    Not,
    /// `<-`
    ArrowIn,
    /// `->`
    ArrowOut,
    RelOp(RelOp),
    LParen,
    RParen,
    Comma,
    Dot,
    /// Text following `#` up to the end of the line.
    Comment(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    pub pos: Pos,
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TokenKind::Id(s) => write!(f, "identifier `{s}`"),
            TokenKind::Var(s) => write!(f, "variable `{s}`"),
            TokenKind::Number(n) => write!(f, "number `{n}`"),
            TokenKind::Path(p) => write!(f, "path \"{p}\""),
            TokenKind::Type(t) => write!(f, "type `{t}`"),
            TokenKind::Source => f.write_str("`source`"),
            TokenKind::Target => f.write_str("`target`"),
            TokenKind::If => f.write_str("`if`"),
            TokenKind::And => f.write_str("`and`"),
            TokenKind::Not => f.write_str("`not`"),
            TokenKind::ArrowIn => f.write_str("`<-`"),
            TokenKind::ArrowOut => f.write_str("`->`"),
            TokenKind::RelOp(op) => write!(f, "`{op}`"),
            TokenKind::LParen => f.write_str("`(`"),
            TokenKind::RParen => f.write_str("`)`"),
            TokenKind::Comma => f.write_str("`,`"),
            TokenKind::Dot => f.write_str("`.`"),
            TokenKind::Comment(_) => f.write_str("comment"),
        }
    }
}

fn is_path_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '/'
}

fn is_word_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

struct Cursor<'a> {
    chars: std::iter::Peekable<std::str::CharIndices<'a>>,
    src: &'a str,
    line: usize,
    col: usize,
}

impl<'a> Cursor<'a> {
    fn new(src: &'a str) -> Self {
        Cursor {
            chars: src.char_indices().peekable(),
            src,
            line: 1,
            col: 1,
        }
    }

    fn pos(&self) -> Pos {
        Pos {
            line: self.line,
            col: self.col,
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.chars.peek().map(|&(_, c)| c)
    }

    fn peek2(&self) -> Option<char> {
        let mut it = self.chars.clone();
        it.next();
        it.next().map(|(_, c)| c)
    }

    fn offset(&mut self) -> usize {
        self.chars.peek().map(|&(i, _)| i).unwrap_or(self.src.len())
    }

    fn bump(&mut self) -> Option<char> {
        let (_, c) = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn take_while(&mut self, pred: impl Fn(char) -> bool) -> &'a str {
        let start = self.offset();
        while self.peek().is_some_and(&pred) {
            self.bump();
        }
        let end = self.offset();
        &self.src[start..end]
    }
}

/// Splits program text into tokens. Whitespace is dropped; comments are kept.
pub fn tokenize(text: &str) -> Result<Vec<Token>, Diagnostic> {
    let mut cur = Cursor::new(text);
    let mut tokens = Vec::new();

    while let Some(c) = cur.peek() {
        let pos = cur.pos();
        if c.is_whitespace() {
            cur.bump();
            continue;
        }
        let kind = match c {
            '#' => {
                cur.bump();
                let body = cur.take_while(|c| c != '\n');
                TokenKind::Comment(body.trim().to_string())
            }
            '(' => {
                cur.bump();
                TokenKind::LParen
            }
            ')' => {
                cur.bump();
                TokenKind::RParen
            }
            ',' => {
                cur.bump();
                TokenKind::Comma
            }
            '.' => {
                cur.bump();
                TokenKind::Dot
            }
            '"' => {
                cur.bump();
                let body = cur.take_while(is_path_char);
                match cur.peek() {
                    Some('"') => {
                        cur.bump();
                        TokenKind::Path(body.to_string())
                    }
                    None | Some('\n') => {
                        return Err(Diagnostic::new(pos, "unterminated path string"));
                    }
                    Some(other) => {
                        return Err(Diagnostic::new(
                            cur.pos(),
                            format!("illegal character `{other}` in path"),
                        ));
                    }
                }
            }
            '<' => {
                cur.bump();
                match cur.peek() {
                    Some('-') => {
                        cur.bump();
                        TokenKind::ArrowIn
                    }
                    Some('=') => {
                        cur.bump();
                        TokenKind::RelOp(RelOp::Le)
                    }
                    _ => TokenKind::RelOp(RelOp::Lt),
                }
            }
            '>' => {
                cur.bump();
                if cur.peek() == Some('=') {
                    cur.bump();
                    TokenKind::RelOp(RelOp::Ge)
                } else {
                    TokenKind::RelOp(RelOp::Gt)
                }
            }
            '=' => {
                cur.bump();
                if cur.peek() == Some('=') {
                    cur.bump();
                    TokenKind::RelOp(RelOp::Eq)
                } else {
                    return Err(Diagnostic::new(
                        pos,
                        "illegal character `=` (did you mean `==`?)",
                    ));
                }
            }
            '-' if cur.peek2() == Some('>') => {
                cur.bump();
                cur.bump();
                TokenKind::ArrowOut
            }
            '-' if cur.peek2().is_some_and(|c| c.is_ascii_digit()) => {
                cur.bump();
                let n = lex_number(&mut cur, pos)?;
                TokenKind::Number(-n)
            }
            c if c.is_ascii_digit() => TokenKind::Number(lex_number(&mut cur, pos)?),
            c if c.is_ascii_lowercase() => {
                let word = cur.take_while(is_word_char);
                match word {
                    "source" => TokenKind::Source,
                    "target" => TokenKind::Target,
                    "if" => TokenKind::If,
                    "and" => TokenKind::And,
                    "not" => TokenKind::Not,
                    _ => TokenKind::Id(word.to_string()),
                }
            }
            c if c.is_ascii_uppercase() => {
                let word = cur.take_while(is_word_char);
                match word.parse::<SignalType>() {
                    Ok(t) => TokenKind::Type(t),
                    Err(_) => TokenKind::Var(word.to_string()),
                }
            }
            other => {
                return Err(Diagnostic::new(pos, format!("illegal character `{other}`")));
            }
        };
        tokens.push(Token { kind, pos });
    }
    Ok(tokens)
}

fn lex_number(cur: &mut Cursor<'_>, pos: Pos) -> Result<f64, Diagnostic> {
    let int = cur.take_while(|c| c.is_ascii_digit());
    let mut text = int.to_string();
    // A dot only belongs to the number when a digit follows; otherwise it ends the statement.
    if cur.peek() == Some('.') && cur.peek2().is_some_and(|c| c.is_ascii_digit()) {
        cur.bump();
        text.push('.');
        text.push_str(cur.take_while(|c| c.is_ascii_digit()));
    }
    text.parse::<f64>()
        .map_err(|_| Diagnostic::new(pos, format!("malformed number `{text}`")))
}
