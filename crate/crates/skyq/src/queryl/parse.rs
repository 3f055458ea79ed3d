use crate::error::{Error, Result};
use crate::queryl::ast::*;
use crate::queryl::lex::{lex, Tok, Token};

const RESERVED: [&str; 21] = [
    "select", "from", "where", "and", "or", "not", "union", "intersect", "except", "order", "by",
    "asc", "desc", "limit", "tag", "full", "count", "min", "max", "avg", "circle",
];

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn peek2(&self) -> Option<&Token> {
        self.toks.get(self.pos + 1)
    }

    fn advance(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    /// Error at the current token. Unexpected end-of-query reports at the
    /// last real token so the position lands on visible text.
    fn err(&self, expected: &str) -> Error {
        let cur = self.peek();
        if cur.tok == Tok::Eof && self.pos > 0 {
            let prev = &self.toks[self.pos - 1];
            Error::Parse {
                line: prev.line,
                col: prev.col,
                msg: format!("unexpected end of query after {:?} (expected {expected})", prev.text),
            }
        } else {
            Error::Parse {
                line: cur.line,
                col: cur.col,
                msg: format!("expected {expected}, found {:?}", cur.text),
            }
        }
    }

    fn expect_kw(&mut self, kw: &str) -> Result<()> {
        if self.peek().is_kw(kw) {
            self.advance();
            Ok(())
        } else {
            Err(self.err(&kw.to_ascii_uppercase()))
        }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<Token> {
        if self.peek().tok == tok {
            Ok(self.advance())
        } else {
            Err(self.err(what))
        }
    }

    fn ident(&mut self, what: &str) -> Result<String> {
        match &self.peek().tok {
            Tok::Ident(s) => {
                let s = s.clone();
                self.advance();
                Ok(s)
            }
            _ => Err(self.err(what)),
        }
    }

    /// Identifier that is not a reserved keyword.
    fn name(&mut self, what: &str) -> Result<String> {
        match &self.peek().tok {
            Tok::Ident(s) if !RESERVED.iter().any(|k| s.eq_ignore_ascii_case(k)) => {
                let s = s.clone();
                self.advance();
                Ok(s)
            }
            _ => Err(self.err(what)),
        }
    }

    /// Signed number literal.
    fn number(&mut self, what: &str) -> Result<f64> {
        let neg = if self.peek().tok == Tok::Minus {
            self.advance();
            true
        } else {
            false
        };
        match self.peek().tok {
            Tok::Number(v) => {
                self.advance();
                Ok(if neg { -v } else { v })
            }
            _ => Err(self.err(what)),
        }
    }

    fn query(&mut self) -> Result<QueryAst> {
        let first = self.select()?;
        let mut rest = Vec::new();
        loop {
            let op = if self.peek().is_kw("union") {
                SetOp::Union
            } else if self.peek().is_kw("intersect") {
                SetOp::Intersect
            } else if self.peek().is_kw("except") {
                SetOp::Except
            } else {
                break;
            };
            self.advance();
            rest.push((op, self.select()?));
        }
        if self.peek().tok != Tok::Eof {
            return Err(self.err("UNION, INTERSECT, EXCEPT, or end of query"));
        }
        Ok(QueryAst { first, rest })
    }

    fn select(&mut self) -> Result<SelectAst> {
        self.expect_kw("select")?;
        let projection = self.projection()?;
        self.expect_kw("from")?;
        let catalog = self.name("catalog name")?;
        self.expect_kw("where")?;
        let where_expr = self.expr()?;
        let order_by = if self.peek().is_kw("order") {
            self.advance();
            self.expect_kw("by")?;
            let attr = self.attr_term()?;
            let desc = if self.peek().is_kw("desc") {
                self.advance();
                true
            } else {
                if self.peek().is_kw("asc") {
                    self.advance();
                }
                false
            };
            Some((attr, desc))
        } else {
            None
        };
        let limit = if self.peek().is_kw("limit") {
            self.advance();
            let t = self.peek().clone();
            let v = self.number("limit count")?;
            if v < 0.0 || v.fract() != 0.0 {
                return Err(Error::Parse {
                    line: t.line,
                    col: t.col,
                    msg: format!("LIMIT wants a non-negative integer, found {:?}", t.text),
                });
            }
            Some(v as u64)
        } else {
            None
        };
        Ok(SelectAst {
            projection,
            catalog,
            where_expr,
            order_by,
            limit,
        })
    }

    fn projection(&mut self) -> Result<ProjectionAst> {
        let t = self.peek().clone();
        if t.is_kw("tag") {
            self.advance();
            return Ok(ProjectionAst::Tag);
        }
        if t.is_kw("full") {
            self.advance();
            return Ok(ProjectionAst::Full);
        }
        if t.is_kw("count") {
            self.advance();
            return Ok(ProjectionAst::Count);
        }
        for (kw, make) in [
            ("min", ProjectionAst::Min as fn(AttrTerm) -> ProjectionAst),
            ("max", ProjectionAst::Max as fn(AttrTerm) -> ProjectionAst),
            ("avg", ProjectionAst::Avg as fn(AttrTerm) -> ProjectionAst),
        ] {
            if t.is_kw(kw) {
                self.advance();
                self.expect(Tok::LParen, "(")?;
                let attr = self.attr_term()?;
                self.expect(Tok::RParen, ")")?;
                return Ok(make(attr));
            }
        }
        let mut cols = vec![self.attr_term()?];
        while self.peek().tok == Tok::Comma {
            self.advance();
            cols.push(self.attr_term()?);
        }
        Ok(ProjectionAst::Columns(cols))
    }

    fn attr_term(&mut self) -> Result<AttrTerm> {
        let first = self.name("attribute name")?;
        if self.peek().tok == Tok::Minus {
            // color term `a - b`, but only when a name follows the minus
            if let Some(next) = self.peek2() {
                if matches!(&next.tok, Tok::Ident(_)) {
                    self.advance();
                    let second = self.name("attribute name")?;
                    return Ok(AttrTerm::Color(first, second));
                }
            }
        }
        Ok(AttrTerm::Name(first))
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut terms = vec![self.and_term()?];
        while self.peek().is_kw("or") {
            self.advance();
            terms.push(self.and_term()?);
        }
        Ok(if terms.len() == 1 {
            terms.pop().unwrap()
        } else {
            Expr::Or(terms)
        })
    }

    fn and_term(&mut self) -> Result<Expr> {
        let mut terms = vec![self.unary()?];
        while self.peek().is_kw("and") {
            self.advance();
            terms.push(self.unary()?);
        }
        Ok(if terms.len() == 1 {
            terms.pop().unwrap()
        } else {
            Expr::And(terms)
        })
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.peek().is_kw("not") {
            self.advance();
            return Ok(Expr::Not(Box::new(self.unary()?)));
        }
        if self.peek().tok == Tok::LParen {
            self.advance();
            let e = self.expr()?;
            self.expect(Tok::RParen, ")")?;
            return Ok(e);
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<Expr> {
        let t = self.peek().clone();
        if t.is_kw("circle") {
            self.advance();
            self.expect(Tok::LParen, "(")?;
            let ra_deg = self.number("right ascension (degrees)")?;
            self.expect(Tok::Comma, ",")?;
            let dec_deg = self.number("declination (degrees)")?;
            self.expect(Tok::Comma, ",")?;
            let radius_arcsec = self.number("radius (arcsec)")?;
            self.expect(Tok::RParen, ")")?;
            return Ok(Expr::Circle {
                ra_deg,
                dec_deg,
                radius_arcsec,
            });
        }
        if t.is_kw("latband") {
            self.advance();
            self.expect(Tok::LParen, "(")?;
            let frame = self.ident("frame name")?;
            self.expect(Tok::Comma, ",")?;
            let lo_deg = self.number("lower latitude (degrees)")?;
            self.expect(Tok::Comma, ",")?;
            let hi_deg = self.number("upper latitude (degrees)")?;
            self.expect(Tok::RParen, ")")?;
            return Ok(Expr::LatBand {
                frame,
                lo_deg,
                hi_deg,
            });
        }
        if t.is_kw("halfspace") {
            self.advance();
            self.expect(Tok::LParen, "(")?;
            let nx = self.number("normal x")?;
            self.expect(Tok::Comma, ",")?;
            let ny = self.number("normal y")?;
            self.expect(Tok::Comma, ",")?;
            let nz = self.number("normal z")?;
            self.expect(Tok::Comma, ",")?;
            let d = self.number("offset")?;
            self.expect(Tok::RParen, ")")?;
            return Ok(Expr::HalfSpaceAtom { nx, ny, nz, d });
        }
        // comparison: attr op literal
        let attr = self.attr_term()?;
        let op = match self.peek().tok {
            Tok::Lt => CmpOp::Lt,
            Tok::Le => CmpOp::Le,
            Tok::Gt => CmpOp::Gt,
            Tok::Ge => CmpOp::Ge,
            Tok::Eq => CmpOp::Eq,
            Tok::Ne => CmpOp::Ne,
            _ => return Err(self.err("comparison operator")),
        };
        self.advance();
        let value = match &self.peek().tok {
            Tok::Number(_) | Tok::Minus => Literal::Num(self.number("literal")?),
            Tok::Ident(s) if !RESERVED.iter().any(|k| s.eq_ignore_ascii_case(k)) => {
                let s = s.clone();
                self.advance();
                Literal::Word(s)
            }
            _ => return Err(self.err("literal")),
        };
        Ok(Expr::Cmp { attr, op, value })
    }
}

/// Parses query text into its AST. Errors carry a 1-based line:column and
/// the offending token.
pub fn parse(text: &str) -> Result<QueryAst> {
    let toks = lex(text)?;
    let mut p = Parser { toks, pos: 0 };
    p.query()
}
