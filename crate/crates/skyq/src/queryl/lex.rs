use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Ident(String),
    Number(f64),
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    LParen,
    RParen,
    Comma,
    Minus,
    Eof,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub tok: Tok,
    pub line: u32,
    pub col: u32,
    pub text: String,
}

impl Token {
    pub fn is_kw(&self, kw: &str) -> bool {
        matches!(&self.tok, Tok::Ident(s) if s.eq_ignore_ascii_case(kw))
    }
}

/// Tokenizes query text; every token carries its 1-based line:column.
pub fn lex(input: &str) -> Result<Vec<Token>> {
    let mut out = Vec::new();
    let mut line: u32 = 1;
    let mut col: u32 = 1;
    let mut chars = input.chars().peekable();

    macro_rules! push {
        ($tok:expr, $text:expr, $l:expr, $c:expr) => {
            out.push(Token {
                tok: $tok,
                line: $l,
                col: $c,
                text: $text,
            })
        };
    }

    while let Some(&c) = chars.peek() {
        let (tl, tc) = (line, col);
        match c {
            '\n' => {
                chars.next();
                line += 1;
                col = 1;
            }
            ' ' | '\t' | '\r' => {
                chars.next();
                col += 1;
            }
            '(' => {
                chars.next();
                col += 1;
                push!(Tok::LParen, "(".into(), tl, tc);
            }
            ')' => {
                chars.next();
                col += 1;
                push!(Tok::RParen, ")".into(), tl, tc);
            }
            ',' => {
                chars.next();
                col += 1;
                push!(Tok::Comma, ",".into(), tl, tc);
            }
            '-' => {
                chars.next();
                col += 1;
                push!(Tok::Minus, "-".into(), tl, tc);
            }
            '<' => {
                chars.next();
                col += 1;
                if chars.peek() == Some(&'=') {
                    chars.next();
                    col += 1;
                    push!(Tok::Le, "<=".into(), tl, tc);
                } else {
                    push!(Tok::Lt, "<".into(), tl, tc);
                }
            }
            '>' => {
                chars.next();
                col += 1;
                if chars.peek() == Some(&'=') {
                    chars.next();
                    col += 1;
                    push!(Tok::Ge, ">=".into(), tl, tc);
                } else {
                    push!(Tok::Gt, ">".into(), tl, tc);
                }
            }
            '=' => {
                chars.next();
                col += 1;
                push!(Tok::Eq, "=".into(), tl, tc);
            }
            '!' => {
                chars.next();
                col += 1;
                if chars.peek() == Some(&'=') {
                    chars.next();
                    col += 1;
                    push!(Tok::Ne, "!=".into(), tl, tc);
                } else {
                    return Err(Error::Parse {
                        line: tl,
                        col: tc,
                        msg: "expected != after !".into(),
                    });
                }
            }
            c if c.is_ascii_digit() || c == '.' => {
                let mut text = String::new();
                while let Some(&d) = chars.peek() {
                    if d.is_ascii_digit() || d == '.' {
                        text.push(d);
                        chars.next();
                        col += 1;
                    } else if (d == 'e' || d == 'E')
                        && !text.is_empty()
                        && text.chars().last().unwrap().is_ascii_digit()
                    {
                        // exponent, optionally signed
                        let mut look = chars.clone();
                        look.next();
                        match look.peek() {
                            Some(&s) if s.is_ascii_digit() || s == '+' || s == '-' => {
                                text.push(d);
                                chars.next();
                                col += 1;
                                if let Some(&s) = chars.peek() {
                                    if s == '+' || s == '-' {
                                        text.push(s);
                                        chars.next();
                                        col += 1;
                                    }
                                }
                            }
                            _ => break,
                        }
                    } else {
                        break;
                    }
                }
                let value: f64 = text.parse().map_err(|_| Error::Parse {
                    line: tl,
                    col: tc,
                    msg: format!("bad number {text:?}"),
                })?;
                push!(Tok::Number(value), text, tl, tc);
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut text = String::new();
                while let Some(&d) = chars.peek() {
                    if d.is_ascii_alphanumeric() || d == '_' {
                        text.push(d);
                        chars.next();
                        col += 1;
                    } else {
                        break;
                    }
                }
                push!(Tok::Ident(text.clone()), text, tl, tc);
            }
            other => {
                return Err(Error::Parse {
                    line: tl,
                    col: tc,
                    msg: format!("unexpected character {other:?}"),
                });
            }
        }
    }
    push!(Tok::Eof, "end of query".into(), line, col);
    Ok(out)
}
