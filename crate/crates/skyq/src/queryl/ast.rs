use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SetOp {
    Union,
    Intersect,
    Except,
}

impl SetOp {
    pub fn keyword(self) -> &'static str {
        match self {
            SetOp::Union => "UNION",
            SetOp::Intersect => "INTERSECT",
            SetOp::Except => "EXCEPT",
        }
    }
}

/// An attribute reference in query text: a plain name or a color term
/// (difference of two magnitude bands).
#[derive(Debug, Clone, PartialEq)]
pub enum AttrTerm {
    Name(String),
    Color(String, String),
}

impl fmt::Display for AttrTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AttrTerm::Name(n) => write!(f, "{n}"),
            AttrTerm::Color(a, b) => write!(f, "{a} - {b}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
            CmpOp::Eq => "=",
            CmpOp::Ne => "!=",
        }
    }

    pub fn holds(self, lhs: f64, rhs: f64) -> bool {
        match self {
            CmpOp::Lt => lhs < rhs,
            CmpOp::Le => lhs <= rhs,
            CmpOp::Gt => lhs > rhs,
            CmpOp::Ge => lhs >= rhs,
            CmpOp::Eq => lhs == rhs,
            CmpOp::Ne => lhs != rhs,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Literal {
    Num(f64),
    Word(String),
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Num(v) => write!(f, "{v}"),
            Literal::Word(w) => write!(f, "{w}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    And(Vec<Expr>),
    Or(Vec<Expr>),
    Not(Box<Expr>),
    Cmp {
        attr: AttrTerm,
        op: CmpOp,
        value: Literal,
    },
    Circle {
        ra_deg: f64,
        dec_deg: f64,
        radius_arcsec: f64,
    },
    LatBand {
        frame: String,
        lo_deg: f64,
        hi_deg: f64,
    },
    HalfSpaceAtom {
        nx: f64,
        ny: f64,
        nz: f64,
        d: f64,
    },
}

impl Expr {
    pub fn is_spatial_atom(&self) -> bool {
        matches!(
            self,
            Expr::Circle { .. } | Expr::LatBand { .. } | Expr::HalfSpaceAtom { .. }
        )
    }

    pub fn contains_spatial(&self) -> bool {
        match self {
            Expr::And(es) | Expr::Or(es) => es.iter().any(Expr::contains_spatial),
            Expr::Not(e) => e.contains_spatial(),
            Expr::Cmp { .. } => false,
            _ => true,
        }
    }

    /// Any spatial atom under an odd number of NOTs?
    pub fn spatial_under_not(&self) -> bool {
        fn walk(e: &Expr, negated: bool) -> bool {
            match e {
                Expr::And(es) | Expr::Or(es) => es.iter().any(|x| walk(x, negated)),
                Expr::Not(inner) => walk(inner, !negated),
                Expr::Cmp { .. } => false,
                _ => negated,
            }
        }
        walk(self, false)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::And(es) => {
                write!(f, "(")?;
                for (i, e) in es.iter().enumerate() {
                    if i > 0 {
                        write!(f, " AND ")?;
                    }
                    write!(f, "{e}")?;
                }
                write!(f, ")")
            }
            Expr::Or(es) => {
                write!(f, "(")?;
                for (i, e) in es.iter().enumerate() {
                    if i > 0 {
                        write!(f, " OR ")?;
                    }
                    write!(f, "{e}")?;
                }
                write!(f, ")")
            }
            Expr::Not(e) => write!(f, "NOT {e}"),
            Expr::Cmp { attr, op, value } => write!(f, "{attr} {} {value}", op.symbol()),
            Expr::Circle {
                ra_deg,
                dec_deg,
                radius_arcsec,
            } => write!(f, "CIRCLE({ra_deg}, {dec_deg}, {radius_arcsec})"),
            Expr::LatBand {
                frame,
                lo_deg,
                hi_deg,
            } => write!(f, "LATBAND({frame}, {lo_deg}, {hi_deg})"),
            Expr::HalfSpaceAtom { nx, ny, nz, d } => {
                write!(f, "HALFSPACE({nx}, {ny}, {nz}, {d})")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProjectionAst {
    Tag,
    Full,
    Count,
    Min(AttrTerm),
    Max(AttrTerm),
    Avg(AttrTerm),
    Columns(Vec<AttrTerm>),
}

impl fmt::Display for ProjectionAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProjectionAst::Tag => write!(f, "TAG"),
            ProjectionAst::Full => write!(f, "FULL"),
            ProjectionAst::Count => write!(f, "COUNT"),
            ProjectionAst::Min(a) => write!(f, "MIN({a})"),
            ProjectionAst::Max(a) => write!(f, "MAX({a})"),
            ProjectionAst::Avg(a) => write!(f, "AVG({a})"),
            ProjectionAst::Columns(cols) => {
                for (i, c) in cols.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{c}")?;
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectAst {
    pub projection: ProjectionAst,
    pub catalog: String,
    pub where_expr: Expr,
    pub order_by: Option<(AttrTerm, bool)>,
    pub limit: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryAst {
    pub first: SelectAst,
    pub rest: Vec<(SetOp, SelectAst)>,
}

impl fmt::Display for SelectAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "SELECT {} FROM {} WHERE {}",
            self.projection, self.catalog, self.where_expr
        )?;
        if let Some((attr, desc)) = &self.order_by {
            write!(f, " ORDER BY {attr} {}", if *desc { "DESC" } else { "ASC" })?;
        }
        if let Some(n) = self.limit {
            write!(f, " LIMIT {n}")?;
        }
        Ok(())
    }
}

/// Canonical text form; re-parsing it yields a structurally identical AST.
impl fmt::Display for QueryAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.first)?;
        for (op, sel) in &self.rest {
            write!(f, " {} {}", op.keyword(), sel)?;
        }
        Ok(())
    }
}

impl QueryAst {
    /// Stable-keyed debug rendering for `--dump-ast`.
    pub fn dump(&self) -> String {
        fn expr(e: &Expr, out: &mut String) {
            match e {
                Expr::And(es) => {
                    out.push_str("(and");
                    for x in es {
                        out.push(' ');
                        expr(x, out);
                    }
                    out.push(')');
                }
                Expr::Or(es) => {
                    out.push_str("(or");
                    for x in es {
                        out.push(' ');
                        expr(x, out);
                    }
                    out.push(')');
                }
                Expr::Not(x) => {
                    out.push_str("(not ");
                    expr(x, out);
                    out.push(')');
                }
                Expr::Cmp { attr, op, value } => {
                    out.push_str(&format!("(cmp {attr} {} {value})", op.symbol()));
                }
                Expr::Circle {
                    ra_deg,
                    dec_deg,
                    radius_arcsec,
                } => out.push_str(&format!("(circle {ra_deg} {dec_deg} {radius_arcsec})")),
                Expr::LatBand {
                    frame,
                    lo_deg,
                    hi_deg,
                } => out.push_str(&format!("(latband {frame} {lo_deg} {hi_deg})")),
                Expr::HalfSpaceAtom { nx, ny, nz, d } => {
                    out.push_str(&format!("(halfspace {nx} {ny} {nz} {d})"))
                }
            }
        }
        fn select(s: &SelectAst, out: &mut String) {
            out.push_str(&format!("(select (proj {}) (from {}) (where ", s.projection, s.catalog));
            expr(&s.where_expr, out);
            out.push(')');
            if let Some((attr, desc)) = &s.order_by {
                out.push_str(&format!(" (order {attr} {})", if *desc { "desc" } else { "asc" }));
            }
            if let Some(n) = s.limit {
                out.push_str(&format!(" (limit {n})"));
            }
            out.push(')');
        }
        let mut out = String::from("(query ");
        select(&self.first, &mut out);
        for (op, sel) in &self.rest {
            out.push_str(&format!(" ({} ", op.keyword().to_ascii_lowercase()));
            select(sel, &mut out);
            out.push(')');
        }
        out.push(')');
        out
    }
}
