//! Recursive-descent parser for the expression grammar:
//!
//! ```text
//! expr   := term (('+'|'-') term)*
//! term   := factor (('*'|'/') factor)*
//! factor := atom ('^' atom)?
//! atom   := number | ident | func '(' expr ')' | '(' expr ')' | '-' atom
//! ```
//!
//! Unary minus binds tighter than `^`, so `-x^2` reads as `(-x)^2`.

use super::expr::{Expr, Func};
use super::simplify::canon;
use super::SymbolicError;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    End,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

fn tokenize(text: &str) -> Result<Vec<Token>, SymbolicError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut line, mut col) = (1usize, 1usize);
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let (start_line, start_col) = (line, col);
        if c == '\n' {
            line += 1;
            col = 1;
            i += 1;
            continue;
        }
        if c.is_whitespace() {
            col += 1;
            i += 1;
            continue;
        }
        if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let begin = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            if i < chars.len() && chars[i] == '.' {
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                } else {
                    return Err(syntax(line, col + (i - begin), "malformed exponent in number"));
                }
            }
            let lexeme: String = chars[begin..i].iter().collect();
            let value: f64 = lexeme
                .parse()
                .map_err(|_| syntax(start_line, start_col, &format!("bad number '{lexeme}'")))?;
            col += i - begin;
            out.push(Token { tok: Tok::Num(value), line: start_line, col: start_col });
            continue;
        }
        if c.is_ascii_alphabetic() {
            let begin = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            col += i - begin;
            out.push(Token {
                tok: Tok::Ident(chars[begin..i].iter().collect()),
                line: start_line,
                col: start_col,
            });
            continue;
        }
        let tok = match c {
            '+' | '-' | '*' | '/' | '^' => Tok::Op(c),
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            other => return Err(syntax(line, col, &format!("unexpected character '{other}'"))),
        };
        out.push(Token { tok, line: start_line, col: start_col });
        col += 1;
        i += 1;
    }
    out.push(Token { tok: Tok::End, line, col });
    Ok(out)
}

fn syntax(line: usize, col: usize, message: &str) -> SymbolicError {
    SymbolicError::Syntax { line, col, message: message.to_string() }
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn next(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn error_here(&self, message: &str) -> SymbolicError {
        let t = self.peek();
        syntax(t.line, t.col, message)
    }

    fn expr(&mut self) -> Result<Expr, SymbolicError> {
        let mut terms = vec![self.term()?];
        loop {
            match self.peek().tok {
                Tok::Op('+') => {
                    self.next();
                    terms.push(self.term()?);
                }
                Tok::Op('-') => {
                    self.next();
                    terms.push(Expr::Neg(Box::new(self.term()?)));
                }
                _ => break,
            }
        }
        Ok(if terms.len() == 1 { terms.pop().unwrap() } else { Expr::Add(terms) })
    }

    fn term(&mut self) -> Result<Expr, SymbolicError> {
        let mut acc = self.factor()?;
        loop {
            match self.peek().tok {
                Tok::Op('*') => {
                    self.next();
                    let rhs = self.factor()?;
                    acc = Expr::Mul(vec![acc, rhs]);
                }
                Tok::Op('/') => {
                    let at = self.next();
                    let rhs = self.factor()?;
                    if canon(&rhs).is_zero() {
                        return Err(syntax(at.line, at.col, "division by a zero denominator"));
                    }
                    acc = Expr::Div(Box::new(acc), Box::new(rhs));
                }
                _ => break,
            }
        }
        Ok(acc)
    }

    fn factor(&mut self) -> Result<Expr, SymbolicError> {
        let base = self.atom()?;
        if self.peek().tok == Tok::Op('^') {
            let at = self.next();
            let exponent = self.atom()?;
            let (b, x) = (canon(&base), canon(&exponent));
            if b.is_zero() && x.as_const().is_some_and(|v| v < 0.0) {
                return Err(syntax(at.line, at.col, "zero raised to a negative power"));
            }
            return Ok(Expr::Pow(Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, SymbolicError> {
        let t = self.next();
        match t.tok {
            Tok::Num(v) => Ok(Expr::constant(v)),
            Tok::Op('-') => Ok(Expr::Neg(Box::new(self.atom()?))),
            Tok::LParen => {
                let unclosed = || syntax(t.line, t.col, "unclosed '('");
                let inner = match self.expr() {
                    Err(_) if self.peek().tok == Tok::End => return Err(unclosed()),
                    other => other?,
                };
                if self.peek().tok == Tok::End {
                    return Err(unclosed());
                }
                self.expect_rparen()?;
                Ok(inner)
            }
            Tok::Ident(name) => {
                if self.peek().tok == Tok::LParen {
                    let func = Func::from_name(&name).ok_or_else(|| SymbolicError::UnknownFunction {
                        name: name.clone(),
                        line: t.line,
                        col: t.col,
                    })?;
                    self.next();
                    let arg = self.expr()?;
                    self.expect_rparen()?;
                    Ok(Expr::Func(func, Box::new(arg)))
                } else if Func::from_name(&name).is_some() {
                    Err(syntax(t.line, t.col, &format!("function '{name}' needs an argument list")))
                } else {
                    Ok(Expr::Var(name))
                }
            }
            Tok::End => Err(syntax(t.line, t.col, "unexpected end of input")),
            Tok::RParen => Err(syntax(t.line, t.col, "unexpected ')'")),
            Tok::Op(c) => Err(syntax(t.line, t.col, &format!("unexpected '{c}'"))),
        }
    }

    fn expect_rparen(&mut self) -> Result<(), SymbolicError> {
        if self.peek().tok == Tok::RParen {
            self.next();
            Ok(())
        } else {
            Err(self.error_here("expected ')'"))
        }
    }
}

/// Parses `text` into a canonical expression.
pub fn parse(text: &str) -> Result<Expr, SymbolicError> {
    let tokens = tokenize(text)?;
    let mut parser = Parser { tokens, pos: 0 };
    let e = parser.expr()?;
    if parser.peek().tok != Tok::End {
        return Err(parser.error_here("unexpected trailing input"));
    }
    Ok(canon(&e))
}
