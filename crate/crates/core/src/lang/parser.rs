use super::ast::*;
use super::lexer::{Token, TokenKind};
use super::{Diagnostic, ErrorClass, Pos};

/// Parses a token stream into a [`Program`].
pub fn parse(tokens: &[Token]) -> Result<Program, Diagnostic> {
    Parser { tokens, at: 0 }.program()
}

struct Parser<'t> {
    tokens: &'t [Token],
    at: usize,
}

impl<'t> Parser<'t> {
    fn peek(&self) -> Option<&'t TokenKind> {
        self.tokens.get(self.at).map(|t| &t.kind)
    }

    fn pos(&self) -> Pos {
        match self.tokens.get(self.at) {
            Some(t) => t.pos,
            None => self.tokens.last().map(|t| t.pos).unwrap_or_default(),
        }
    }

    fn bump(&mut self) -> Option<&'t Token> {
        let t = self.tokens.get(self.at);
        if t.is_some() {
            self.at += 1;
        }
        t
    }

    fn unexpected(&self, expected: &str) -> Diagnostic {
        match self.peek() {
            Some(found) => Diagnostic::with_class(
                ErrorClass::UnexpectedToken,
                self.pos(),
                format!("expected {expected}, found {found}"),
            ),
            None => Diagnostic::with_class(
                ErrorClass::UnexpectedEof,
                self.pos(),
                format!("unexpected end of input, expected {expected}"),
            ),
        }
    }

    fn expect(&mut self, kind: TokenKind, expected: &str) -> Result<(), Diagnostic> {
        if self.peek() == Some(&kind) {
            self.bump();
            Ok(())
        } else {
            Err(self.unexpected(expected))
        }
    }

    fn program(&mut self) -> Result<Program, Diagnostic> {
        let mut statements = Vec::new();
        while self.peek().is_some() {
            statements.push(self.statement()?);
        }
        Ok(Program { statements })
    }

    fn statement(&mut self) -> Result<Statement, Diagnostic> {
        let start = self.pos();
        if let Some(TokenKind::Comment(text)) = self.peek() {
            self.bump();
            return Ok(Statement::Comment(text.clone()));
        }
        let head = match self.peek() {
            Some(TokenKind::Id(_)) => self.predicate()?,
            _ => return Err(self.unexpected("a statement")),
        };
        match self.peek() {
            Some(TokenKind::ArrowIn) => {
                self.bump();
                self.expect(TokenKind::Source, "`source`")?;
                self.expect(TokenKind::LParen, "`(`")?;
                let channel = self.path()?;
                self.expect(TokenKind::Comma, "`,`")?;
                let dtype = match self.peek() {
                    Some(TokenKind::Type(t)) => {
                        self.bump();
                        *t
                    }
                    _ => {
                        return Err(self.unexpected(
                            "a signal type (`Probability`, `Density`, `Number`, `Boolean`)",
                        ))
                    }
                };
                self.expect(TokenKind::RParen, "`)`")?;
                self.expect(TokenKind::Dot, "`.`")?;
                Ok(Statement::Source(SourceDecl {
                    atom: head,
                    channel,
                    dtype,
                    span: Span(start),
                }))
            }
            Some(TokenKind::ArrowOut) => {
                self.bump();
                self.expect(TokenKind::Target, "`target`")?;
                self.expect(TokenKind::LParen, "`(`")?;
                let channel = self.path()?;
                self.expect(TokenKind::RParen, "`)`")?;
                self.expect(TokenKind::Dot, "`.`")?;
                Ok(Statement::Target(TargetDecl {
                    atom: head,
                    channel,
                    span: Span(start),
                }))
            }
            Some(TokenKind::If) => {
                self.bump();
                let mut body = vec![self.literal()?];
                while self.peek() == Some(&TokenKind::And) {
                    self.bump();
                    body.push(self.literal()?);
                }
                self.expect(TokenKind::Dot, "`and` or `.`")?;
                Ok(Statement::Clause(Clause {
                    head,
                    body,
                    span: Span(start),
                }))
            }
            Some(TokenKind::RelOp(_)) => Err(Diagnostic::with_class(
                ErrorClass::ComparisonHead,
                self.pos(),
                "a comparison cannot be the head of a clause",
            )),
            _ => Err(self.unexpected("`<-`, `->` or `if`")),
        }
    }

    fn path(&mut self) -> Result<String, Diagnostic> {
        match self.peek() {
            Some(TokenKind::Path(p)) => {
                self.bump();
                Ok(p.clone())
            }
            _ => Err(self.unexpected("a quoted channel path")),
        }
    }

    fn literal(&mut self) -> Result<Literal, Diagnostic> {
        let negated = if self.peek() == Some(&TokenKind::Not) {
            self.bump();
            true
        } else {
            false
        };
        Ok(Literal {
            negated,
            atom: self.atom()?,
        })
    }

    fn atom(&mut self) -> Result<Atom, Diagnostic> {
        let start = self.pos();
        let lhs = self.term()?;
        if let Some(TokenKind::RelOp(op)) = self.peek() {
            self.bump();
            let rhs = self.term()?;
            return Ok(Atom::Cmp(Comparison {
                lhs,
                op: *op,
                rhs,
                span: Span(start),
            }));
        }
        match lhs {
            Term::Pred(p) => Ok(Atom::Pred(p)),
            Term::Const(name) => Ok(Atom::Pred(Predicate {
                name,
                args: vec![],
                span: Span(start),
            })),
            Term::Var(_) | Term::Number(_) => Err(self.unexpected("a comparison operator")),
        }
    }

    fn predicate(&mut self) -> Result<Predicate, Diagnostic> {
        let start = self.pos();
        match self.term()? {
            Term::Pred(p) => Ok(p),
            Term::Const(name) => Ok(Predicate {
                name,
                args: vec![],
                span: Span(start),
            }),
            _ => unreachable!("predicate() is only called on an identifier"),
        }
    }

    fn term(&mut self) -> Result<Term, Diagnostic> {
        let start = self.pos();
        match self.peek() {
            Some(TokenKind::Var(v)) => {
                self.bump();
                Ok(Term::Var(v.clone()))
            }
            Some(TokenKind::Number(n)) => {
                self.bump();
                Ok(Term::Number(*n))
            }
            Some(TokenKind::Id(name)) => {
                self.bump();
                if self.peek() != Some(&TokenKind::LParen) {
                    return Ok(Term::Const(name.clone()));
                }
                self.bump();
                let mut args = vec![self.term()?];
                while self.peek() == Some(&TokenKind::Comma) {
                    self.bump();
                    args.push(self.term()?);
                }
                self.expect(TokenKind::RParen, "`,` or `)`")?;
                Ok(Term::Pred(Predicate {
                    name: name.clone(),
                    args,
                    span: Span(start),
                }))
            }
            _ => Err(self.unexpected("a term")),
        }
    }
}
