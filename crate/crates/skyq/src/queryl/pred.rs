use std::fmt;

use crate::queryl::ast::CmpOp;
use crate::sphere::Region;
use crate::store::{ObjClass, Record, BAND_NAMES};

/// A schema-resolved attribute: evaluable against a record without
/// further name lookups.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AttrRef {
    ObjId,
    /// Magnitude band index 0..=4 (u,g,r,i,z).
    Mag(usize),
    /// Color index: difference mag[a] - mag[b].
    Color(usize, usize),
    Size,
    Class,
    /// Extra attribute by schema position (full projection only).
    Extra(usize),
}

impl AttrRef {
    /// Numeric view of the attribute; class yields its code.
    pub fn value(&self, r: &Record) -> f64 {
        match self {
            AttrRef::ObjId => r.obj_id() as f64,
            AttrRef::Mag(i) => r.mags()[*i],
            AttrRef::Color(a, b) => r.mags()[*a] - r.mags()[*b],
            AttrRef::Size => r.size_arcsec(),
            AttrRef::Class => r.class().code() as f64,
            AttrRef::Extra(i) => {
                debug_assert!(r.extra(*i).is_some(), "extras need the full projection");
                r.extra(*i).unwrap_or(f64::NAN)
            }
        }
    }

    pub fn needs_full(&self) -> bool {
        matches!(self, AttrRef::Extra(_))
    }
}

/// Resolved attribute plus its display name (for headers and explain).
#[derive(Debug, Clone, PartialEq)]
pub struct NamedAttr {
    pub name: String,
    pub attr: AttrRef,
}

/// Schema-resolved residual predicate, evaluated per record.
#[derive(Debug, Clone, PartialEq)]
pub enum Pred {
    True,
    And(Vec<Pred>),
    Or(Vec<Pred>),
    Not(Box<Pred>),
    Cmp {
        attr: NamedAttr,
        op: CmpOp,
        value: f64,
    },
    ClassIs {
        class: ObjClass,
        negated: bool,
    },
    /// A spatial atom kept in the residual: exact pointwise membership.
    Spatial(Region),
}

impl Pred {
    pub fn eval(&self, r: &Record) -> bool {
        match self {
            Pred::True => true,
            Pred::And(ps) => ps.iter().all(|p| p.eval(r)),
            Pred::Or(ps) => ps.iter().any(|p| p.eval(r)),
            Pred::Not(p) => !p.eval(r),
            Pred::Cmp { attr, op, value } => op.holds(attr.attr.value(r), *value),
            Pred::ClassIs { class, negated } => (r.class() == *class) != *negated,
            Pred::Spatial(region) => region.contains(r.pos()),
        }
    }

    pub fn needs_full(&self) -> bool {
        match self {
            Pred::True | Pred::ClassIs { .. } | Pred::Spatial(_) => false,
            Pred::And(ps) | Pred::Or(ps) => ps.iter().any(Pred::needs_full),
            Pred::Not(p) => p.needs_full(),
            Pred::Cmp { attr, .. } => attr.attr.needs_full(),
        }
    }
}

impl fmt::Display for Pred {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Pred::True => write!(f, "true"),
            Pred::And(ps) => {
                write!(f, "(")?;
                for (i, p) in ps.iter().enumerate() {
                    if i > 0 {
                        write!(f, " AND ")?;
                    }
                    write!(f, "{p}")?;
                }
                write!(f, ")")
            }
            Pred::Or(ps) => {
                write!(f, "(")?;
                for (i, p) in ps.iter().enumerate() {
                    if i > 0 {
                        write!(f, " OR ")?;
                    }
                    write!(f, "{p}")?;
                }
                write!(f, ")")
            }
            Pred::Not(p) => write!(f, "NOT {p}"),
            Pred::Cmp { attr, op, value } => write!(f, "{} {} {}", attr.name, op.symbol(), value),
            Pred::ClassIs { class, negated } => {
                write!(f, "class {} {}", if *negated { "!=" } else { "=" }, class.name())
            }
            Pred::Spatial(region) => write!(f, "<region:{} convexes>", region.convexes().len()),
        }
    }
}

/// Band index by single-letter name.
pub fn band_index(name: &str) -> Option<usize> {
    BAND_NAMES.iter().position(|b| *b == name)
}
